use thiserror::Error;

/// Errors raised anywhere in the evaluation pipeline.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("matrix is not unimodular (det = {0})")]
    NonUnimodular(f64),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("coefficient file has no spectral parameter line")]
    MissingSpectralParameter,
    #[error("need {needed} Fourier coefficients but only {available} are available")]
    InsufficientCoefficients { needed: usize, available: usize },
    #[error("derivative order {0} exceeds the supported maximum")]
    OrderTooHigh(u32),
    #[error("argument outside the domain: {0}")]
    Domain(String),
    #[error("label {label} is not coprime to modulus {modulus}")]
    InvalidLabel { modulus: u64, label: u64 },
    #[error("invalid split: {0}")]
    InvalidSplit(String),
    #[error("modulus split {m}x{n} cannot be factored as M1*M2 with M1 | N and gcd(M2, N) = 1")]
    NonFactorable { m: u64, n: u64 },
    #[error("({m}, {k}) is not an element of T({l})")]
    InvalidIndex { l: u64, m: u64, k: u64 },
    #[error("residue {residue} is not invertible modulo {modulus}")]
    NonInvertibleResidue { residue: u64, modulus: u64 },
    #[error("character {0} is not primitive")]
    NonPrimitiveCharacter(String),
    #[error("points are too far apart for a local expansion: {0}")]
    TooFar(String),
    #[error("missing derivative data of order {0}")]
    MissingOrder(u32),
    #[error("sum provider failed: {0}")]
    ProviderFailure(String),
    #[error("Gamma factor evaluated at a pole: {0}")]
    GammaPole(String),
    #[error("modulus {0} is too large for the direct oracle")]
    TooLarge(u64),
    #[error("quadrature did not converge: {0}")]
    Quadrature(String),
    #[error("io error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
