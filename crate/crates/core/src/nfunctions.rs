//! Scalar Orlicz machinery for the N-function
//!
//! ```text
//! φ(t) = ∫₀ᵗ φ'(s) ds,   φ'(t) = (δ + t)^{p-2} t,
//! ```
//!
//! its shifted family `φ_a'(t) = φ'(a + t) t / (a + t) = (δ + a + t)^{p-2} t`
//! and the convex conjugate `φ*(t) = sup_{s ≥ 0} (s t − φ(s))`.
//!
//! All functions are defined at `t = 0` by their limit value `0` and reject
//! negative arguments with [`Error::Domain`].

use crate::error::{Error, Result};

/// Exponent `p ∈ (1, ∞)` and regularization `δ ≥ 0` of `φ_{p,δ}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NFunctionParams {
    p: f64,
    delta: f64,
}

impl NFunctionParams {
    pub fn new(p: f64, delta: f64) -> Result<Self> {
        if !(p.is_finite() && p > 1.0) {
            return Err(Error::Config(format!("exponent p must satisfy p > 1, got {p}")));
        }
        if !(delta.is_finite() && delta >= 0.0) {
            return Err(Error::Config(format!("delta must satisfy delta >= 0, got {delta}")));
        }
        Ok(Self { p, delta })
    }

    #[inline]
    pub fn p(&self) -> f64 {
        self.p
    }

    #[inline]
    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// Hölder conjugate exponent `p' = p / (p − 1)`.
    #[inline]
    pub fn conjugate_exponent(&self) -> f64 {
        self.p / (self.p - 1.0)
    }

    /// The shifted function `φ_a` with shift `a ≥ 0`.
    pub fn shifted(self, shift: f64) -> Result<ShiftedNFunction> {
        ShiftedNFunction::new(self, shift)
    }

    /// `φ'(t) = (δ + t)^{p-2} t`.
    pub fn phi_prime(&self, t: f64) -> Result<f64> {
        check_arg(t)?;
        Ok(derivative(self.p, self.delta, t))
    }

    /// `φ(t) = ∫₀ᵗ (δ + s)^{p-2} s ds`.
    pub fn phi_eval(&self, t: f64) -> Result<f64> {
        check_arg(t)?;
        Ok(antiderivative(self.p, self.delta, t))
    }

    /// `(φ*)'(t) = (φ')⁻¹(t)`, the inverse of [`phi_prime`](Self::phi_prime).
    pub fn conjugate_prime(&self, t: f64) -> Result<f64> {
        check_arg(t)?;
        Ok(inverse_derivative(self.p, self.delta, t))
    }

    /// `φ*(t) = sup_{s ≥ 0} (s t − φ(s))`.
    ///
    /// The supremum is attained at `s = (φ')⁻¹(t)`, so the value is
    /// `t s − φ(s)` there. For `δ = 0` this equals `t^{p'} / p'`.
    pub fn conjugate_eval(&self, t: f64) -> Result<f64> {
        check_arg(t)?;
        if t == 0.0 {
            return Ok(0.0);
        }
        if self.delta == 0.0 {
            let q = self.conjugate_exponent();
            return Ok(t.powf(q) / q);
        }
        let s = inverse_derivative(self.p, self.delta, t);
        Ok((t * s - antiderivative(self.p, self.delta, s)).max(0.0))
    }
}

/// The shifted N-function `φ_a` of a base `φ_{p,δ}`.
///
/// Since `(φ_{p,δ})_a = φ_{p,δ+a}`, every evaluation runs through the
/// unshifted formulas with regularization `δ + a`; for `a = 0` the code path
/// is identical to the base function.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ShiftedNFunction {
    base: NFunctionParams,
    shift: f64,
}

impl ShiftedNFunction {
    pub fn new(base: NFunctionParams, shift: f64) -> Result<Self> {
        if !(shift.is_finite() && shift >= 0.0) {
            return Err(Error::Domain(format!("shift must be >= 0, got {shift}")));
        }
        Ok(Self { base, shift })
    }

    pub fn base(&self) -> NFunctionParams {
        self.base
    }

    pub fn shift(&self) -> f64 {
        self.shift
    }

    #[inline]
    fn effective_delta(&self) -> f64 {
        self.base.delta + self.shift
    }

    /// `φ_a'(t) = (δ + a + t)^{p-2} t`.
    pub fn phi_prime(&self, t: f64) -> Result<f64> {
        check_arg(t)?;
        Ok(derivative(self.base.p, self.effective_delta(), t))
    }

    /// `φ_a(t) = ∫₀ᵗ φ_a'(s) ds`.
    pub fn phi_eval(&self, t: f64) -> Result<f64> {
        check_arg(t)?;
        Ok(antiderivative(self.base.p, self.effective_delta(), t))
    }
}

fn check_arg(t: f64) -> Result<()> {
    if t >= 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("argument must be a finite t >= 0, got {t}")))
    }
}

#[inline]
pub(crate) fn derivative(p: f64, c: f64, t: f64) -> f64 {
    if t == 0.0 {
        return 0.0;
    }
    (c + t).powf(p - 2.0) * t
}

/// `∫₀ᵗ (c + s)^{p-2} s ds` for `c, t ≥ 0`.
///
/// With `u = c + s` the integral is
/// `(c+t)^p/p − c (c+t)^{p−1}/(p−1) + c^p/(p(p−1))`. That form cancels
/// catastrophically when `t ≪ c`, so for `t/c ≤ 1/2` the binomial series
/// `c^{p−2} t² Σₙ C(p−2, n) (t/c)ⁿ / (n+2)` is summed instead.
pub(crate) fn antiderivative(p: f64, c: f64, t: f64) -> f64 {
    if t == 0.0 {
        return 0.0;
    }
    if c == 0.0 {
        return t.powf(p) / p;
    }
    if t / c <= 0.5 {
        antiderivative_series(p, c, t)
    } else {
        antiderivative_closed(p, c, t)
    }
}

// Binomial expansion of (c + s)^{p−2}, integrated termwise. Avoids the
// cancellation of the closed form when t ≪ c.
fn antiderivative_series(p: f64, c: f64, t: f64) -> f64 {
    let x = t / c;
    let mut binom = 1.0;
    let mut power = 1.0;
    let mut sum = 0.0;
    for n in 0..200 {
        let term = binom * power / (n as f64 + 2.0);
        sum += term;
        if term.abs() <= 1e-17 * sum.abs() {
            break;
        }
        binom *= (p - 2.0 - n as f64) / (n as f64 + 1.0);
        power *= x;
        if binom == 0.0 {
            break;
        }
    }
    c.powf(p - 2.0) * t * t * sum
}

fn antiderivative_closed(p: f64, c: f64, t: f64) -> f64 {
    let u = c + t;
    let value = u.powf(p) / p - c * u.powf(p - 1.0) / (p - 1.0) + c.powf(p) / (p * (p - 1.0));
    value.max(0.0)
}

/// Solves `(c + s)^{p−2} s = t` for `s ≥ 0` by safeguarded Newton.
pub(crate) fn inverse_derivative(p: f64, c: f64, t: f64) -> f64 {
    if t == 0.0 {
        return 0.0;
    }
    if c == 0.0 {
        return t.powf(1.0 / (p - 1.0));
    }
    let mut lo = 0.0_f64;
    let mut hi = (t.powf(1.0 / (p - 1.0)) * (1.0 + c)).max(1.0);
    while derivative(p, c, hi) < t {
        lo = hi;
        hi *= 2.0;
    }
    // Initial guess from whichever regime (linear near 0, power law far out)
    // dominates.
    let mut s = if t >= c.powf(p - 1.0) {
        t.powf(1.0 / (p - 1.0))
    } else {
        t * c.powf(2.0 - p)
    };
    if !(s > lo && s < hi) {
        s = 0.5 * (lo + hi);
    }
    for _ in 0..200 {
        let f = derivative(p, c, s) - t;
        if f == 0.0 {
            return s;
        }
        if f > 0.0 {
            hi = s;
        } else {
            lo = s;
        }
        let slope = (c + s).powf(p - 3.0) * ((p - 1.0) * s + c);
        let mut next = s - f / slope;
        if !(next > lo && next < hi) || !next.is_finite() {
            next = 0.5 * (lo + hi);
        }
        if (next - s).abs() <= 1e-15 * next.abs() || hi - lo <= 1e-16 * hi {
            return next;
        }
        s = next;
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(p: f64, delta: f64) -> NFunctionParams {
        NFunctionParams::new(p, delta).unwrap()
    }

    #[test]
    fn rejects_invalid_parameters() {
        assert!(NFunctionParams::new(1.0, 0.0).is_err());
        assert!(NFunctionParams::new(0.5, 0.0).is_err());
        assert!(NFunctionParams::new(2.0, -1e-3).is_err());
        assert!(NFunctionParams::new(f64::NAN, 0.0).is_err());
        assert!(params(2.0, 0.0).shifted(-1.0).is_err());
    }

    #[test]
    fn negative_argument_is_domain_error() {
        let f = params(2.5, 0.1);
        assert!(matches!(f.phi_prime(-1.0), Err(Error::Domain(_))));
        assert!(matches!(f.phi_eval(-1e-300), Err(Error::Domain(_))));
        assert!(matches!(f.conjugate_prime(-2.0), Err(Error::Domain(_))));
        assert!(matches!(f.conjugate_eval(-2.0), Err(Error::Domain(_))));
        assert!(f.shifted(1.0).unwrap().phi_eval(-1.0).is_err());
    }

    #[test]
    fn phi_prime_values() {
        assert_eq!(params(2.0, 0.0).phi_prime(3.0).unwrap(), 3.0);
        assert_eq!(params(3.0, 1.0).phi_prime(2.0).unwrap(), 6.0);
        assert_eq!(params(1.5, 0.0).phi_prime(4.0).unwrap(), 2.0);
        assert_eq!(params(1.5, 0.0).phi_prime(0.0).unwrap(), 0.0);
    }

    #[test]
    fn phi_closed_forms() {
        assert!((params(2.0, 0.0).phi_eval(2.0).unwrap() - 2.0).abs() < 1e-15);
        assert!((params(3.0, 0.0).phi_eval(3.0).unwrap() - 9.0).abs() < 1e-14);
        // p = 2 gives t²/2 for every δ, on both sides of the series switch.
        for &t in &[1e-8, 0.05, 0.5, 2.0, 50.0] {
            let v = params(2.0, 0.1).phi_eval(t).unwrap();
            assert!((v - 0.5 * t * t).abs() <= 1e-14 * t * t, "t={t}");
        }
    }

    #[test]
    fn series_and_closed_form_agree_at_switch() {
        for &p in &[1.3, 2.5, 3.5, 6.0] {
            let c = 0.7;
            let t = 0.5 * c;
            let series = antiderivative_series(p, c, t);
            let closed = antiderivative_closed(p, c, t);
            assert!((series - closed).abs() <= 1e-12 * closed, "p={p}");
        }
    }

    #[test]
    fn shifted_values() {
        let base = params(2.0, 0.0);
        assert_eq!(base.shifted(5.0).unwrap().phi_prime(3.0).unwrap(), 3.0);
        assert!((base.shifted(7.0).unwrap().phi_eval(2.0).unwrap() - 2.0).abs() < 1e-14);
        let cubic = params(3.0, 0.0);
        assert_eq!(cubic.shifted(1.0).unwrap().phi_prime(2.0).unwrap(), 6.0);
        // ∫₀¹ (1 + s) s ds = 1/2 + 1/3
        let v = cubic.shifted(1.0).unwrap().phi_eval(1.0).unwrap();
        assert!((v - 5.0 / 6.0).abs() < 1e-14);
    }

    #[test]
    fn zero_shift_is_bitwise_identical() {
        for &(p, d) in &[(1.5, 0.0), (2.5, 1e-4), (3.5, 1.0)] {
            let f = params(p, d);
            let g = f.shifted(0.0).unwrap();
            for &t in &[0.0, 1e-9, 0.3, 1.0, 17.0] {
                assert_eq!(f.phi_eval(t).unwrap().to_bits(), g.phi_eval(t).unwrap().to_bits());
                assert_eq!(
                    f.phi_prime(t).unwrap().to_bits(),
                    g.phi_prime(t).unwrap().to_bits()
                );
            }
        }
    }

    #[test]
    fn conjugate_values() {
        assert!((params(2.0, 0.0).conjugate_prime(4.0).unwrap() - 4.0).abs() < 1e-14);
        assert!((params(3.0, 0.0).conjugate_prime(4.0).unwrap() - 2.0).abs() < 1e-14);
        assert!((params(2.0, 0.0).conjugate_eval(2.0).unwrap() - 2.0).abs() < 1e-14);
        let expected = 2.0 * 3.0_f64.sqrt();
        assert!((params(3.0, 0.0).conjugate_eval(3.0).unwrap() - expected).abs() < 1e-13);
    }

    #[test]
    fn conjugate_prime_inverts_phi_prime() {
        for &(p, d) in &[(1.2, 0.0), (1.5, 0.3), (2.5, 1e-4), (3.0, 1.0), (5.0, 2.0)] {
            let f = params(p, d);
            for &t in &[1e-12, 1e-6, 1e-3, 0.1, 1.0, 10.0, 1e4, 1e8] {
                let s = f.conjugate_prime(t).unwrap();
                let back = f.phi_prime(s).unwrap();
                assert!((back - t).abs() <= 1e-10 * (1.0 + t), "p={p} d={d} t={t}");
            }
        }
    }
}
