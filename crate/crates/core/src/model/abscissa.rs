/// A point `v = base + offset` in `(0, 1]` that remembers its distance to a
/// reference point.
///
/// Quadrature nodes that crowd an endpoint (a root of the branching drift, or
/// `0`, or `1`) are carried in this form so that differences like
/// `p̃(v) - v` keep full relative precision even when `v` itself rounds to the
/// endpoint.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Abscissa {
    pub base: f64,
    pub offset: f64,
}

impl Abscissa {
    pub fn new(base: f64, offset: f64) -> Self {
        Self { base, offset }
    }

    pub fn at(v: f64) -> Self {
        Self {
            base: v,
            offset: 0.0,
        }
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.base + self.offset
    }

    /// `1 - v`, exact when the base is `1`.
    #[inline]
    pub fn one_minus(&self) -> f64 {
        if self.base == 1.0 {
            -self.offset
        } else {
            (1.0 - self.base) - self.offset
        }
    }

    /// Natural log of `v`.
    #[inline]
    pub fn ln(&self) -> f64 {
        if self.base == 0.0 {
            self.offset.ln()
        } else if self.offset == 0.0 {
            self.base.ln()
        } else {
            self.base.ln() + (self.offset / self.base).ln_1p()
        }
    }

    /// `v^x` for real `x >= 0`.
    #[inline]
    pub fn pow(&self, x: f64) -> f64 {
        if x == 0.0 {
            1.0
        } else {
            (x * self.ln()).exp()
        }
    }

    /// `v^k - base^k`, accurate for small offsets.
    pub(crate) fn pow_increment(&self, k: i32) -> f64 {
        if k == 0 || self.offset == 0.0 {
            return 0.0;
        }
        if self.base == 0.0 {
            return self.offset.powi(k);
        }
        let kf = f64::from(k);
        self.base.powi(k) * (kf * (self.offset / self.base).ln_1p()).exp_m1()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn increments_keep_precision_near_base() {
        let p = Abscissa::new(0.5, -1e-20);
        assert_eq!(p.value(), 0.5);
        let inc = p.pow_increment(2);
        assert!((inc - (-1e-20)).abs() < 1e-34);
        let q = Abscissa::new(1.0, -1e-30);
        assert_eq!(q.one_minus(), 1e-30);
        assert!((q.ln() + 1e-30).abs() < 1e-44);
    }

    #[test]
    fn zero_base_is_plain_value() {
        let p = Abscissa::new(0.0, 0.25);
        assert_eq!(p.pow_increment(2), 0.0625);
        assert!((p.pow(3.0) - 0.015625).abs() < 1e-16);
    }
}
