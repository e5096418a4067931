//! Gauss–Legendre rules on `[0, 1]` and conical-product rules on the
//! reference triangle `{ξ, η ≥ 0, ξ + η ≤ 1}`.
//!
//! The triangle rule collapses the unit square onto the triangle with
//! `ξ = u`, `η = v (1 − u)`. All nodes are strictly interior, so integrands
//! that blow up at a vertex are never sampled there.

use crate::error::{Error, Result};

/// Highest exactness degree offered by [`quadrature_rule`] and
/// [`face_quadrature_rule`].
pub const MAX_DEGREE: usize = 40;

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, z);
        if d != 0.0 {
            dp = d;
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    (x, w)
}

/// `P_n(z)` and `P_n'(z)` by the three-term recurrence.
fn legendre(n: usize, z: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, z);
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let d = n as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, d)
}

/// A rule on `[0, 1]`; weights sum to 1.
#[derive(Clone, Debug, PartialEq)]
pub struct FaceRule {
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
    pub degree: usize,
}

impl FaceRule {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// A rule on the reference triangle; weights sum to `1/2`.
#[derive(Clone, Debug, PartialEq)]
pub struct TriangleRule {
    /// Reference coordinates `(ξ, η)`.
    pub points: Vec<[f64; 2]>,
    pub weights: Vec<f64>,
    pub degree: usize,
}

impl TriangleRule {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Barycentric coordinates `(1 − ξ − η, ξ, η)` of every node.
    pub fn barycentric(&self) -> Vec<[f64; 3]> {
        self.points.iter().map(|&[x, y]| [1.0 - x - y, x, y]).collect()
    }
}

/// Gauss–Legendre rule on `[0, 1]` exact for polynomials of degree `degree`.
pub fn face_quadrature_rule(degree: usize) -> Result<FaceRule> {
    if degree > MAX_DEGREE {
        return Err(Error::Config(format!("face quadrature degree {degree} exceeds {MAX_DEGREE}")));
    }
    let n = (degree + 2) / 2;
    let (x, w) = gauss_legendre(n);
    Ok(FaceRule {
        points: x.iter().map(|t| 0.5 * (t + 1.0)).collect(),
        weights: w.iter().map(|w| 0.5 * w).collect(),
        degree,
    })
}

/// Conical-product rule on the reference triangle exact for degree `degree`.
pub fn quadrature_rule(degree: usize) -> Result<TriangleRule> {
    if degree > MAX_DEGREE {
        return Err(Error::Config(format!("triangle quadrature degree {degree} exceeds {MAX_DEGREE}")));
    }
    // The collapsed integrand has degree `degree + 1` in u.
    let n = (degree + 3) / 2;
    let (x, w) = gauss_legendre(n);
    let u: Vec<f64> = x.iter().map(|t| 0.5 * (t + 1.0)).collect();
    let wu: Vec<f64> = w.iter().map(|w| 0.5 * w).collect();
    let mut points = Vec::with_capacity(n * n);
    let mut weights = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            points.push([u[i], u[j] * (1.0 - u[i])]);
            weights.push(wu[i] * wu[j] * (1.0 - u[i]));
        }
    }
    Ok(TriangleRule { points, weights, degree })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// ∫_T ξ^a η^b = a! b! / (a + b + 2)!
    fn monomial(a: usize, b: usize) -> f64 {
        let f = |n: usize| (1..=n).map(|k| k as f64).product::<f64>();
        f(a) * f(b) / f(a + b + 2)
    }

    #[test]
    fn gauss_legendre_small() {
        let (x, w) = gauss_legendre(2);
        assert!((x[1] - 1.0 / 3f64.sqrt()).abs() < 1e-15);
        assert!((w[0] - 1.0).abs() < 1e-15);
        let (x, _) = gauss_legendre(3);
        assert_eq!(x[1], 0.0);
    }

    #[test]
    fn face_rule_exactness() {
        for d in 0..=MAX_DEGREE {
            let r = face_quadrature_rule(d).unwrap();
            for k in 0..=d {
                let s: f64 = r.points.iter().zip(&r.weights).map(|(t, w)| w * t.powi(k as i32)).sum();
                assert!((s - 1.0 / (k as f64 + 1.0)).abs() < 1e-14, "d={d} k={k}");
            }
        }
        assert!(face_quadrature_rule(MAX_DEGREE + 1).is_err());
    }

    #[test]
    fn triangle_rule_exactness_and_interior_nodes() {
        for d in 0..=20 {
            let r = quadrature_rule(d).unwrap();
            let total: f64 = r.weights.iter().sum();
            assert!((total - 0.5).abs() < 1e-15);
            for a in 0..=d {
                for b in 0..=d - a {
                    let s: f64 = r
                        .points
                        .iter()
                        .zip(&r.weights)
                        .map(|(p, w)| w * p[0].powi(a as i32) * p[1].powi(b as i32))
                        .sum();
                    assert!((s - monomial(a, b)).abs() < 1e-15, "d={d} a={a} b={b}");
                }
            }
            for l in r.barycentric() {
                assert!(l.iter().all(|&x| x > 0.0));
            }
        }
        let r = quadrature_rule(2).unwrap();
        let s: f64 = r.points.iter().zip(&r.weights).map(|(p, w)| w * p[0] * p[1]).sum();
        assert!((s - 1.0 / 24.0).abs() < 1e-16);
    }
}
