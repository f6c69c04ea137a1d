//! Double-word (hi + lo) complex accumulator. Keeps the rounding of each
//! propagation step at ~ε² relative so that |A|² − |B|² survives thousands of
//! steps at high gain.

use num_complex::Complex64;

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub(crate) struct DoubleWord {
    hi: f64,
    lo: f64,
}

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

#[inline]
fn fast_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

impl DoubleWord {
    pub(crate) fn new(x: f64) -> Self {
        Self { hi: x, lo: 0.0 }
    }

    #[inline]
    pub(crate) fn value(self) -> f64 {
        self.hi + self.lo
    }

    /// Exact-to-ε² product with a plain double.
    #[inline]
    fn scale(self, a: f64) -> Self {
        let p = a * self.hi;
        let e = a.mul_add(self.hi, -p);
        let (hi, lo) = fast_two_sum(p, e + a * self.lo);
        Self { hi, lo }
    }

    #[inline]
    fn add(self, other: Self) -> Self {
        let (s, e) = two_sum(self.hi, other.hi);
        let (hi, lo) = fast_two_sum(s, e + self.lo + other.lo);
        Self { hi, lo }
    }

    #[inline]
    fn neg(self) -> Self {
        Self {
            hi: -self.hi,
            lo: -self.lo,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub(crate) struct ComplexDw {
    re: DoubleWord,
    im: DoubleWord,
}

impl ComplexDw {
    pub(crate) fn from_c64(z: Complex64) -> Self {
        Self {
            re: DoubleWord::new(z.re),
            im: DoubleWord::new(z.im),
        }
    }

    pub(crate) fn to_c64(self) -> Complex64 {
        Complex64::new(self.re.value(), self.im.value())
    }

    /// `a * self` with `a` a plain complex double.
    #[inline]
    fn scale(self, a: Complex64) -> Self {
        Self {
            re: self.re.scale(a.re).add(self.im.scale(a.im).neg()),
            im: self.im.scale(a.re).add(self.re.scale(a.im)),
        }
    }

    #[inline]
    fn add(self, other: Self) -> Self {
        Self {
            re: self.re.add(other.re),
            im: self.im.add(other.im),
        }
    }
}

/// Applies U = [[a, b], [b̄, ā]] to the column (x, y).
#[inline]
pub(crate) fn apply_su11(
    a: Complex64,
    b: Complex64,
    x: ComplexDw,
    y: ComplexDw,
) -> (ComplexDw, ComplexDw) {
    let nx = x.scale(a).add(y.scale(b));
    let ny = x.scale(b.conj()).add(y.scale(a.conj()));
    (nx, ny)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scale_recovers_product_error() {
        let x = DoubleWord::new(1.0 + f64::EPSILON);
        let p = x.scale(1.0 - f64::EPSILON);
        // (1+ε)(1−ε) = 1 − ε², not representable in one double.
        assert_eq!(p.hi, 1.0);
        assert_eq!(p.lo, -f64::EPSILON * f64::EPSILON);
    }

    #[test]
    fn add_keeps_small_terms() {
        let big = DoubleWord::new(1e16);
        let s = big.add(DoubleWord::new(1.0)).add(DoubleWord::new(-1e16));
        assert_eq!(s.value(), 1.0);
    }

    #[test]
    fn su11_application_matches_plain_arithmetic() {
        let a = Complex64::new(1.2, 0.3);
        let b = Complex64::new(0.4, -0.5);
        let x = Complex64::new(0.7, 0.1);
        let y = Complex64::new(-0.2, 0.9);
        let (nx, ny) = apply_su11(a, b, ComplexDw::from_c64(x), ComplexDw::from_c64(y));
        assert!((nx.to_c64() - (a * x + b * y)).norm() < 1e-15);
        assert!((ny.to_c64() - (b.conj() * x + a.conj() * y)).norm() < 1e-15);
    }
}
