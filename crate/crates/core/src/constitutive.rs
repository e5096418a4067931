//! The extra stress `S(A) = (δ + |A^sym|)^{p−2} A^sym`, its shifted
//! variants, the natural transforms `F`, `F*`, and the directional
//! derivative used by Newton's method.

use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

use crate::error::Result;
use crate::nfunctions::NFunctionParams;

/// A real 2×2 matrix, row-major.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Tensor2 {
    pub a11: f64,
    pub a12: f64,
    pub a21: f64,
    pub a22: f64,
}

impl Tensor2 {
    pub const ZERO: Tensor2 = Tensor2::new(0.0, 0.0, 0.0, 0.0);
    pub const IDENTITY: Tensor2 = Tensor2::new(1.0, 0.0, 0.0, 1.0);

    pub const fn new(a11: f64, a12: f64, a21: f64, a22: f64) -> Self {
        Self { a11, a12, a21, a22 }
    }

    pub const fn diag(a: f64, b: f64) -> Self {
        Self::new(a, 0.0, 0.0, b)
    }

    /// Entries in the order `a11, a12, a21, a22`.
    pub fn from_array(a: [f64; 4]) -> Self {
        Self::new(a[0], a[1], a[2], a[3])
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.a11, self.a12, self.a21, self.a22]
    }

    /// `u ⊗ v`, i.e. the matrix with entries `u_i v_j`.
    pub fn outer(u: [f64; 2], v: [f64; 2]) -> Self {
        Self::new(u[0] * v[0], u[0] * v[1], u[1] * v[0], u[1] * v[1])
    }

    pub fn transpose(self) -> Self {
        Self::new(self.a11, self.a21, self.a12, self.a22)
    }

    pub fn sym(self) -> Self {
        let off = 0.5 * (self.a12 + self.a21);
        Self::new(self.a11, off, off, self.a22)
    }

    pub fn trace(self) -> f64 {
        self.a11 + self.a22
    }

    /// Frobenius product `A : B`.
    pub fn dot(self, other: Self) -> f64 {
        self.a11 * other.a11 + self.a12 * other.a12 + self.a21 * other.a21 + self.a22 * other.a22
    }

    /// Frobenius norm.
    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    /// Matrix-vector product `A v`.
    pub fn apply(self, v: [f64; 2]) -> [f64; 2] {
        [self.a11 * v[0] + self.a12 * v[1], self.a21 * v[0] + self.a22 * v[1]]
    }

    pub fn is_finite(self) -> bool {
        self.to_array().iter().all(|x| x.is_finite())
    }
}

impl Add for Tensor2 {
    type Output = Tensor2;
    fn add(self, o: Tensor2) -> Tensor2 {
        Tensor2::new(self.a11 + o.a11, self.a12 + o.a12, self.a21 + o.a21, self.a22 + o.a22)
    }
}

impl Sub for Tensor2 {
    type Output = Tensor2;
    fn sub(self, o: Tensor2) -> Tensor2 {
        Tensor2::new(self.a11 - o.a11, self.a12 - o.a12, self.a21 - o.a21, self.a22 - o.a22)
    }
}

impl AddAssign for Tensor2 {
    fn add_assign(&mut self, o: Tensor2) {
        *self = *self + o;
    }
}

impl SubAssign for Tensor2 {
    fn sub_assign(&mut self, o: Tensor2) {
        *self = *self - o;
    }
}

impl Neg for Tensor2 {
    type Output = Tensor2;
    fn neg(self) -> Tensor2 {
        self * -1.0
    }
}

impl Mul<f64> for Tensor2 {
    type Output = Tensor2;
    fn mul(self, s: f64) -> Tensor2 {
        Tensor2::new(self.a11 * s, self.a12 * s, self.a21 * s, self.a22 * s)
    }
}

impl Mul<Tensor2> for f64 {
    type Output = Tensor2;
    fn mul(self, t: Tensor2) -> Tensor2 {
        t * self
    }
}

/// Stress law with `(p, δ)`-structure. The viscosity scale is fixed to 1.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StressLaw {
    params: NFunctionParams,
}

impl StressLaw {
    pub fn new(params: NFunctionParams) -> Self {
        Self { params }
    }

    pub fn from_parts(p: f64, delta: f64) -> Result<Self> {
        Ok(Self::new(NFunctionParams::new(p, delta)?))
    }

    pub fn params(&self) -> NFunctionParams {
        self.params
    }

    pub fn p(&self) -> f64 {
        self.params.p()
    }

    pub fn delta(&self) -> f64 {
        self.params.delta()
    }

    /// Viscosity scale, always 1.
    pub fn mu(&self) -> f64 {
        1.0
    }

    /// `S(A) = (δ + |A^sym|)^{p−2} A^sym`.
    pub fn stress(&self, a: Tensor2) -> Tensor2 {
        scaled_sym(self.p() - 2.0, self.delta(), a)
    }

    /// `S_a(A) = (δ + a + |A^sym|)^{p−2} A^sym`.
    pub fn shifted_stress(&self, shift: f64, a: Tensor2) -> Tensor2 {
        debug_assert!(shift >= 0.0);
        scaled_sym(self.p() - 2.0, self.delta() + shift, a)
    }

    /// `F(A) = (δ + |A^sym|)^{(p−2)/2} A^sym`.
    pub fn natural_transform_f(&self, a: Tensor2) -> Tensor2 {
        scaled_sym(0.5 * (self.p() - 2.0), self.delta(), a)
    }

    /// `F*(A) = (δ^{p−1} + |A^sym|)^{(p'−2)/2} A^sym`.
    pub fn conjugate_transform_fstar(&self, a: Tensor2) -> Tensor2 {
        let q = self.params.conjugate_exponent();
        scaled_sym(0.5 * (q - 2.0), self.delta().powf(self.p() - 1.0), a)
    }

    /// Directional derivative `d/dε S(A + εB)` at `ε = 0`.
    pub fn stress_jacobian(&self, a: Tensor2, b: Tensor2) -> Tensor2 {
        let (p, delta) = (self.p(), self.delta());
        let a_s = a.sym();
        let b_s = b.sym();
        let n = a_s.norm();
        let base = (delta + n).max(f64::MIN_POSITIVE);
        let first = b_s * base.powf(p - 2.0);
        if n < 1e-14 * (1.0 + delta) || p == 2.0 {
            return first;
        }
        let coef = (p - 2.0) * base.powf(p - 3.0) * a_s.dot(b_s) / n;
        first + a_s * coef
    }
}

/// `(c + |A^sym|)^e A^sym`, returning exactly zero when `A^sym = 0`.
#[inline]
fn scaled_sym(e: f64, c: f64, a: Tensor2) -> Tensor2 {
    let s = a.sym();
    let n = s.norm();
    if n == 0.0 {
        return Tensor2::ZERO;
    }
    s * (c + n).powf(e)
}
