//! Compensated accumulation.
//!
//! Sums in this crate are always reduced in a fixed order through
//! [`CompensatedSum`], so a result never depends on how the terms were
//! produced (thread count, chunking).

use num_complex::Complex64;

/// Neumaier's variant of Kahan summation for a single `f64` lane.
#[derive(Debug, Clone, Copy, Default)]
pub struct Neumaier {
    sum: f64,
    comp: f64,
}

impl Neumaier {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Compensated complex accumulator (independent real/imaginary lanes).
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    re: Neumaier,
    im: Neumaier,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, z: Complex64) {
        self.re.add(z.re);
        self.im.add(z.im);
    }

    pub fn value(&self) -> Complex64 {
        Complex64::new(self.re.value(), self.im.value())
    }
}

/// Sum an iterator of complex numbers in iteration order.
pub fn csum<I: IntoIterator<Item = Complex64>>(it: I) -> Complex64 {
    let mut acc = CompensatedSum::new();
    for z in it {
        acc.add(z);
    }
    acc.value()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_cancelled_small_terms() {
        let mut acc = Neumaier::default();
        for x in [1.0, 1e100, 1.0, -1e100] {
            acc.add(x);
        }
        assert_eq!(acc.value(), 2.0);
    }

    #[test]
    fn complex_lanes_are_independent() {
        let z = csum([
            Complex64::new(1e16, 1.0),
            Complex64::new(1.0, 1e16),
            Complex64::new(-1e16, -1e16),
        ]);
        assert_eq!(z, Complex64::new(1.0, 1.0));
    }
}
