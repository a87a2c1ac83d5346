//! Complex numbers stored as `(ln|z|, arg z)`.
//!
//! Products and powers are exact in this representation, so factors such as
//! `exp(b^2 k0^2)` with `b^2 k0^2 ~ 10^7` can be carried through a formula and
//! cancelled before anything is exponentiated.

use std::f64::consts::PI;
use std::fmt;

use num_complex::Complex64;

/// Largest log-magnitude gap for which `add` keeps the smaller operand.
pub const ADD_GAP_LIMIT: f64 = 700.0;

/// A complex number in polar log form. Zero is `log_mag = -inf`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LogComplex {
    pub log_mag: f64,
    pub phase: f64,
}

/// Result of a log-domain sum, flagging whether a summand was swallowed.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LogSum {
    pub value: LogComplex,
    pub truncated: bool,
}

/// Wrap an angle into `(-pi, pi]`.
pub fn normalize_phase(phase: f64) -> f64 {
    if !phase.is_finite() {
        return 0.0;
    }
    if phase > -PI && phase <= PI {
        return phase;
    }
    let wrapped = phase.rem_euclid(2.0 * PI);
    if wrapped > PI {
        wrapped - 2.0 * PI
    } else {
        wrapped
    }
}

impl LogComplex {
    pub const ZERO: LogComplex = LogComplex { log_mag: f64::NEG_INFINITY, phase: 0.0 };
    pub const ONE: LogComplex = LogComplex { log_mag: 0.0, phase: 0.0 };

    pub fn new(log_mag: f64, phase: f64) -> Self {
        if log_mag == f64::NEG_INFINITY {
            return Self::ZERO;
        }
        LogComplex { log_mag, phase: normalize_phase(phase) }
    }

    /// `exp(z)` for a complex exponent, never overflowing.
    pub fn exp(z: Complex64) -> Self {
        Self::new(z.re, z.im)
    }

    pub fn from_real(x: f64) -> Self {
        Self::from(Complex64::new(x, 0.0))
    }

    pub fn is_zero(&self) -> bool {
        self.log_mag == f64::NEG_INFINITY
    }

    /// Back to Cartesian form; overflows to infinity or underflows to zero
    /// exactly where `f64` would.
    pub fn to_complex(self) -> Complex64 {
        if self.is_zero() {
            return Complex64::new(0.0, 0.0);
        }
        Complex64::from_polar(self.log_mag.exp(), self.phase)
    }

    pub fn conj(self) -> Self {
        Self::new(self.log_mag, -self.phase)
    }

    pub fn neg(self) -> Self {
        Self::new(self.log_mag, self.phase + PI)
    }

    pub fn mul(self, other: Self) -> Self {
        if self.is_zero() || other.is_zero() {
            return Self::ZERO;
        }
        Self::new(self.log_mag + other.log_mag, self.phase + other.phase)
    }

    /// Division; dividing by zero yields a value with `log_mag = +inf`.
    pub fn div(self, other: Self) -> Self {
        if self.is_zero() {
            return Self::ZERO;
        }
        Self::new(self.log_mag - other.log_mag, self.phase - other.phase)
    }

    pub fn pow_int(self, k: i64) -> Self {
        if k == 0 {
            return Self::ONE;
        }
        if self.is_zero() {
            return if k > 0 { Self::ZERO } else { Self::new(f64::INFINITY, 0.0) };
        }
        Self::new(self.log_mag * k as f64, self.phase * k as f64)
    }

    /// Sum by factoring out the larger magnitude. When the gap exceeds
    /// [`ADD_GAP_LIMIT`] the smaller term is dropped and the flag is set.
    pub fn add(self, other: Self) -> LogSum {
        if other.is_zero() {
            return LogSum { value: self, truncated: false };
        }
        if self.is_zero() {
            return LogSum { value: other, truncated: false };
        }
        let (big, small) = if self.log_mag >= other.log_mag { (self, other) } else { (other, self) };
        let gap = big.log_mag - small.log_mag;
        if gap > ADD_GAP_LIMIT {
            return LogSum { value: big, truncated: true };
        }
        // big * (1 + small/big), with small/big of modulus <= 1
        let ratio = Complex64::from_polar((-gap).exp(), small.phase - big.phase);
        let factor = Complex64::new(1.0, 0.0) + ratio;
        let value = if factor.norm() == 0.0 {
            Self::ZERO
        } else {
            Self::new(big.log_mag + factor.norm().ln(), big.phase + factor.arg())
        };
        LogSum { value, truncated: false }
    }

    /// `add`, discarding the truncation flag.
    pub fn plus(self, other: Self) -> Self {
        self.add(other).value
    }
}

impl From<Complex64> for LogComplex {
    fn from(z: Complex64) -> Self {
        let r = z.norm();
        if r == 0.0 {
            return Self::ZERO;
        }
        Self::new(r.ln(), z.arg())
    }
}

impl fmt::Display for LogComplex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "exp({} + {}i)", self.log_mag, self.phase)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: Complex64, b: Complex64, rel: f64) -> bool {
        (a - b).norm() <= rel * b.norm().max(1e-300)
    }

    #[test]
    fn two_times_three() {
        let p = LogComplex::from_real(2.0).mul(LogComplex::from_real(3.0));
        assert!(close(p.to_complex(), Complex64::new(6.0, 0.0), 1e-15));
    }

    #[test]
    fn power_matches_repeated_multiplication() {
        // (kappa / (i k0 - kappa))^(2N) with kappa = k0 = 1, N = 50
        let base = Complex64::new(1.0, 0.0) / Complex64::new(-1.0, 1.0);
        let mut direct = Complex64::new(1.0, 0.0);
        for _ in 0..100 {
            direct *= base;
        }
        let lc = LogComplex::from(base).pow_int(100);
        assert!(close(lc.to_complex(), direct, 1e-10));
    }

    #[test]
    fn add_with_huge_gap_truncates() {
        let big = LogComplex::new(800.0, 0.3);
        let small = LogComplex::new(0.0, 1.0);
        let s = big.add(small);
        assert!(s.truncated);
        assert_eq!(s.value, big);
        let s = small.add(big);
        assert!(s.truncated);
        assert_eq!(s.value, big);
    }

    #[test]
    fn add_matches_cartesian() {
        let a = Complex64::new(1.5, -2.0);
        let b = Complex64::new(-0.25, 0.75);
        let s = LogComplex::from(a).add(LogComplex::from(b));
        assert!(!s.truncated);
        assert!(close(s.value.to_complex(), a + b, 1e-14));
        let c = LogComplex::from(a).plus(LogComplex::from(-a));
        assert!(c.is_zero() || c.to_complex().norm() < 1e-15);
    }

    #[test]
    fn phases_stay_normalized() {
        let z = LogComplex::new(0.0, 1e6);
        assert!(z.phase > -PI && z.phase <= PI);
        assert_eq!(normalize_phase(PI), PI);
        assert_eq!(normalize_phase(-PI), PI);
        let w = z.pow_int(37);
        assert!(w.phase > -PI && w.phase <= PI);
    }

    #[test]
    fn zero_handling() {
        assert!(LogComplex::from(Complex64::new(0.0, 0.0)).is_zero());
        assert!(LogComplex::ZERO.mul(LogComplex::ONE).is_zero());
        assert_eq!(LogComplex::ZERO.to_complex(), Complex64::new(0.0, 0.0));
        assert_eq!(LogComplex::ZERO.pow_int(0), LogComplex::ONE);
    }

    #[test]
    fn overflow_free_cancellation() {
        // exp(2.5e7) * 3 / exp(2.5e7) = 3; the log magnitude passes through
        // 2.5e7, whose ulp (~4e-9) bounds the attainable relative accuracy.
        let huge = LogComplex::exp(Complex64::new(2.5e7, 0.0));
        let q = huge.mul(LogComplex::from_real(3.0)).div(huge);
        assert!(close(q.to_complex(), Complex64::new(3.0, 0.0), 1e-8));
    }
}
