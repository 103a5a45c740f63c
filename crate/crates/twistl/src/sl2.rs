//! Geometry of SL(2, R): Iwasawa coordinates, reduction to an approximate
//! fundamental domain for SL(2, Z), and box sorting of reduced points.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};

const DET_TOL: f64 = 1e-8;

/// A real 2x2 matrix, normally of determinant one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroupElement {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

/// An integral 2x2 matrix.
pub type IntMatrix = [[i64; 2]; 2];

pub const INT_IDENTITY: IntMatrix = [[1, 0], [0, 1]];

pub fn int_mul(x: &IntMatrix, y: &IntMatrix) -> IntMatrix {
    let mut out = [[0i64; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = x[i][0] * y[0][j] + x[i][1] * y[1][j];
        }
    }
    out
}

pub fn int_det(x: &IntMatrix) -> i64 {
    x[0][0] * x[1][1] - x[0][1] * x[1][0]
}

/// Inverse of a determinant-one integral matrix.
pub fn int_inverse(x: &IntMatrix) -> IntMatrix {
    [[x[1][1], -x[0][1]], [-x[1][0], x[0][0]]]
}

impl GroupElement {
    pub const IDENTITY: GroupElement = GroupElement { a: 1.0, b: 0.0, c: 0.0, d: 1.0 };

    pub fn new(a: f64, b: f64, c: f64, d: f64) -> Self {
        GroupElement { a, b, c, d }
    }

    pub fn from_int(m: &IntMatrix) -> Self {
        GroupElement::new(m[0][0] as f64, m[0][1] as f64, m[1][0] as f64, m[1][1] as f64)
    }

    /// `n(t)`: unipotent upper-triangular translation.
    pub fn n(t: f64) -> Self {
        GroupElement::new(1.0, t, 0.0, 1.0)
    }

    /// `a(v) = diag(e^{v/2}, e^{-v/2})`.
    pub fn a(v: f64) -> Self {
        let h = (v / 2.0).exp();
        GroupElement::new(h, 0.0, 0.0, 1.0 / h)
    }

    /// Rotation `K(theta) = [[cos, sin], [-sin, cos]]`.
    pub fn k(theta: f64) -> Self {
        let (s, c) = theta.sin_cos();
        GroupElement::new(c, s, -s, c)
    }

    pub fn det(&self) -> f64 {
        self.a * self.d - self.b * self.c
    }

    pub fn mul(&self, o: &GroupElement) -> GroupElement {
        GroupElement::new(
            self.a * o.a + self.b * o.c,
            self.a * o.b + self.b * o.d,
            self.c * o.a + self.d * o.c,
            self.c * o.b + self.d * o.d,
        )
    }

    /// Inverse assuming determinant one.
    pub fn inverse(&self) -> GroupElement {
        GroupElement::new(self.d, -self.b, -self.c, self.a)
    }

    pub fn scale(&self, s: f64) -> GroupElement {
        GroupElement::new(self.a * s, self.b * s, self.c * s, self.d * s)
    }

    /// Moebius action on the upper half-plane.
    pub fn act(&self, z: Complex64) -> Complex64 {
        (z * self.a + self.b) / (z * self.c + self.d)
    }

    /// Image of `i`.
    pub fn point(&self) -> Complex64 {
        self.act(Complex64::i())
    }

    /// Automorphy factor `j(g, z) = cz + d`.
    pub fn j(&self, z: Complex64) -> Complex64 {
        z * self.c + self.d
    }

    pub fn max_abs_diff(&self, o: &GroupElement) -> f64 {
        [self.a - o.a, self.b - o.b, self.c - o.c, self.d - o.d]
            .iter()
            .fold(0.0f64, |m, x| m.max(x.abs()))
    }

    pub fn max_abs(&self) -> f64 {
        [self.a, self.b, self.c, self.d].iter().fold(0.0f64, |m, x| m.max(x.abs()))
    }

    fn check_unimodular(&self) -> Result<()> {
        let det = self.det();
        if (det - 1.0).abs() > DET_TOL * self.max_abs().powi(2).max(1.0) {
            return Err(Error::NonUnimodular(det));
        }
        Ok(())
    }
}

/// Coordinates `(t, v, theta)` with `g = n(t) a(v) K(theta)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IwasawaCoords {
    pub t: f64,
    pub v: f64,
    pub theta: f64,
}

impl IwasawaCoords {
    pub const ZERO: IwasawaCoords = IwasawaCoords { t: 0.0, v: 0.0, theta: 0.0 };

    pub fn new(t: f64, v: f64, theta: f64) -> Self {
        IwasawaCoords { t, v, theta }
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.t, self.v, self.theta]
    }

    pub fn max_abs(&self) -> f64 {
        self.t.abs().max(self.v.abs()).max(self.theta.abs())
    }
}

/// Wrap an angle into `(-pi, pi]`.
pub fn wrap_angle(theta: f64) -> f64 {
    let mut x = theta % (2.0 * PI);
    if x <= -PI {
        x += 2.0 * PI;
    } else if x > PI {
        x -= 2.0 * PI;
    }
    x
}

pub fn from_iwasawa(c: IwasawaCoords) -> GroupElement {
    GroupElement::n(c.t).mul(&GroupElement::a(c.v)).mul(&GroupElement::k(c.theta))
}

pub fn iwasawa_decompose(g: &GroupElement) -> Result<IwasawaCoords> {
    g.check_unimodular()?;
    let norm = g.c * g.c + g.d * g.d;
    let t = (g.a * g.c + g.b * g.d) / norm;
    let v = -norm.ln();
    let theta = wrap_angle((-g.c).atan2(g.d));
    Ok(IwasawaCoords { t, v, theta })
}

/// Iwasawa coordinates of `x^{-1} y`.
pub fn offset_coords(x: &GroupElement, y: &GroupElement) -> Result<IwasawaCoords> {
    x.check_unimodular()?;
    iwasawa_decompose(&x.inverse().mul(y))
}

/// Whether `x^{-1} y` lies in the neighbourhood `U_eta`.
pub fn in_neighborhood(x: &GroupElement, y: &GroupElement, eta: f64) -> bool {
    match offset_coords(x, y) {
        Ok(o) => o.t.abs() < eta && o.v.abs() < eta && o.theta.abs() < eta,
        Err(_) => false,
    }
}

/// `g = gamma * x` with `gamma` integral and `x` in the approximate
/// fundamental domain `|t| <= 1/2`, `|x . i| >= 1`, `theta in (-pi/2, pi/2]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReducedPoint {
    pub gamma: IntMatrix,
    pub x: GroupElement,
    pub source: usize,
}

impl ReducedPoint {
    pub fn coords(&self) -> IwasawaCoords {
        iwasawa_decompose(&self.x).expect("reduced points are unimodular")
    }
}

const REDUCE_SLACK: f64 = 1e-12;

/// Gauss reduction of `g` into the approximate fundamental domain.
pub fn reduce(g: &GroupElement) -> Result<ReducedPoint> {
    reduce_indexed(g, 0)
}

pub fn reduce_indexed(g: &GroupElement, source: usize) -> Result<ReducedPoint> {
    g.check_unimodular()?;
    let mut x = *g;
    let mut gamma = INT_IDENTITY;
    for _ in 0..10_000 {
        let z = x.point();
        let shift = z.re.round();
        if shift != 0.0 {
            let n = shift as i64;
            // x <- n(-n) x ; gamma <- gamma n(n)
            x = GroupElement::new(x.a - shift * x.c, x.b - shift * x.d, x.c, x.d);
            gamma = int_mul(&gamma, &[[1, n], [0, 1]]);
        }
        let z = x.point();
        if z.norm_sqr() < 1.0 - REDUCE_SLACK {
            // x <- S^{-1} x with S = [[0,-1],[1,0]] ; gamma <- gamma S
            x = GroupElement::new(x.c, x.d, -x.a, -x.b);
            gamma = int_mul(&gamma, &[[0, -1], [1, 0]]);
        } else {
            break;
        }
    }
    let theta = (-x.c).atan2(x.d);
    if theta <= -PI / 2.0 || theta > PI / 2.0 {
        x = x.scale(-1.0);
        gamma = [[-gamma[0][0], -gamma[0][1]], [-gamma[1][0], -gamma[1][1]]];
    }
    Ok(ReducedPoint { gamma, x, source })
}

/// Key of a box in the partition.
pub type BoxKey = (i64, i64, i64);

/// Partition of reduced points into small boxes.
#[derive(Debug, Clone)]
pub struct BoxPartition {
    pub eta: f64,
    pub boxes: BTreeMap<BoxKey, Vec<usize>>,
    /// One point index per box, in key order.
    pub representatives: Vec<usize>,
}

impl BoxPartition {
    pub fn len(&self) -> usize {
        self.boxes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.boxes.is_empty()
    }
}

/// Fraction of `eta` used as the horocycle box width at unit height.
const T_WIDTH: f64 = 0.25;

/// Sort reduced points into boxes so that two points sharing a box differ
/// by an element of `U_{2 eta}`.
///
/// The height and angle axes are cut into cells of side `eta` (the angle
/// axis uniformly over its half-open range), the horocycle axis into cells
/// of side `eta e^{v0} / 4` where `v0` is the lower edge of the height cell.
pub fn box_sort(points: &[ReducedPoint], eta: f64) -> BoxPartition {
    assert!(eta > 0.0);
    let n_theta = (PI / eta).ceil().max(1.0);
    let w_theta = PI / n_theta;
    let mut boxes: BTreeMap<BoxKey, Vec<usize>> = BTreeMap::new();
    for (i, p) in points.iter().enumerate() {
        let c = p.coords();
        let kv = (c.v / eta).floor();
        let w_t = T_WIDTH * eta * (kv * eta).exp();
        let kt = (c.t / w_t).floor();
        let mut kth = ((c.theta + PI / 2.0) / w_theta).floor();
        if kth >= n_theta {
            kth = n_theta - 1.0;
        }
        if kth < 0.0 {
            kth = 0.0;
        }
        boxes.entry((kt as i64, kv as i64, kth as i64)).or_default().push(i);
    }
    let representatives = boxes
        .values()
        .map(|members| *members.iter().min_by_key(|&&i| points[i].source).unwrap())
        .collect();
    BoxPartition { eta, boxes, representatives }
}
