//! Scalar shape functions on the reference triangle.

use super::quadrature::quadrature_rule;
use crate::error::{Error, Result};

/// Highest polynomial degree offered by [`OrthonormalBasis`].
pub const MAX_BROKEN_DEGREE: usize = 6;

/// Number of polynomials of total degree `≤ k` in two variables.
pub const fn dim_pk(k: usize) -> usize {
    (k + 1) * (k + 2) / 2
}

/// Exponents `(a, b)` of the monomials `ξ^a η^b`, graded by total degree.
fn exponents(k: usize) -> Vec<(usize, usize)> {
    let mut e = Vec::with_capacity(dim_pk(k));
    for d in 0..=k {
        for b in 0..=d {
            e.push((d - b, b));
        }
    }
    e
}

const CENTER: f64 = 1.0 / 3.0;

/// `P_k` basis orthonormal in `L²` of the reference triangle, obtained by
/// Gram–Schmidt on centred monomials. Its reference mass matrix is the
/// identity, so on a cell with Jacobian determinant `det` the mass matrix
/// is `det · I`.
#[derive(Clone, Debug, PartialEq)]
pub struct OrthonormalBasis {
    degree: usize,
    exps: Vec<(usize, usize)>,
    /// Row `i` holds the monomial coefficients of basis function `i`.
    coef: Vec<Vec<f64>>,
}

impl OrthonormalBasis {
    pub fn new(degree: usize) -> Result<Self> {
        if degree > MAX_BROKEN_DEGREE {
            return Err(Error::Config(format!(
                "broken polynomial degree {degree} exceeds {MAX_BROKEN_DEGREE}"
            )));
        }
        let exps = exponents(degree);
        let n = exps.len();
        let rule = quadrature_rule(2 * degree)?;
        let mono: Vec<Vec<f64>> = rule.points.iter().map(|&p| monomials(&exps, p)).collect();
        let inner = |u: &[f64], v: &[f64]| -> f64 {
            let mut s = 0.0;
            for (q, w) in rule.weights.iter().enumerate() {
                let mu: f64 = u.iter().zip(&mono[q]).map(|(a, b)| a * b).sum();
                let mv: f64 = v.iter().zip(&mono[q]).map(|(a, b)| a * b).sum();
                s += w * mu * mv;
            }
            s
        };
        let mut coef: Vec<Vec<f64>> = Vec::with_capacity(n);
        for i in 0..n {
            let mut c = vec![0.0; n];
            c[i] = 1.0;
            // Two passes of modified Gram–Schmidt.
            for _ in 0..2 {
                for prev in &coef {
                    let r = inner(&c, prev);
                    for (x, y) in c.iter_mut().zip(prev) {
                        *x -= r * y;
                    }
                }
            }
            let norm = inner(&c, &c).sqrt();
            c.iter_mut().for_each(|x| *x /= norm);
            coef.push(c);
        }
        Ok(Self { degree, exps, coef })
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn len(&self) -> usize {
        self.exps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exps.is_empty()
    }

    /// Values of all basis functions at `xi`.
    pub fn eval(&self, xi: [f64; 2], out: &mut [f64]) {
        let m = monomials(&self.exps, xi);
        for (o, c) in out.iter_mut().zip(&self.coef) {
            *o = c.iter().zip(&m).map(|(a, b)| a * b).sum();
        }
    }

    /// Reference gradients of all basis functions at `xi`.
    pub fn grad(&self, xi: [f64; 2], out: &mut [[f64; 2]]) {
        let (dx, dy) = monomial_grads(&self.exps, xi);
        for (o, c) in out.iter_mut().zip(&self.coef) {
            *o = [
                c.iter().zip(&dx).map(|(a, b)| a * b).sum(),
                c.iter().zip(&dy).map(|(a, b)| a * b).sum(),
            ];
        }
    }
}

fn monomials(exps: &[(usize, usize)], [x, y]: [f64; 2]) -> Vec<f64> {
    let (x, y) = (x - CENTER, y - CENTER);
    exps.iter().map(|&(a, b)| x.powi(a as i32) * y.powi(b as i32)).collect()
}

fn monomial_grads(exps: &[(usize, usize)], [x, y]: [f64; 2]) -> (Vec<f64>, Vec<f64>) {
    let (x, y) = (x - CENTER, y - CENTER);
    let pw = |t: f64, e: usize| if e == 0 { 0.0 } else { e as f64 * t.powi(e as i32 - 1) };
    let dx = exps.iter().map(|&(a, b)| pw(x, a) * y.powi(b as i32)).collect();
    let dy = exps.iter().map(|&(a, b)| x.powi(a as i32) * pw(y, b)).collect();
    (dx, dy)
}

/// Nodal Lagrange basis of degree 1 or 2.
///
/// Nodes are the vertices `0, 1, 2` followed, for degree 2, by the
/// midpoints of local edges `0, 1, 2` (edge `e` is opposite vertex `e`).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LagrangeBasis {
    degree: usize,
}

impl LagrangeBasis {
    pub fn new(degree: usize) -> Result<Self> {
        match degree {
            1 | 2 => Ok(Self { degree }),
            _ => Err(Error::Config(format!(
                "continuous pressure space supports degree 1 or 2, got {degree}"
            ))),
        }
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn len(&self) -> usize {
        if self.degree == 1 { 3 } else { 6 }
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn eval(&self, [x, y]: [f64; 2], out: &mut [f64]) {
        let l = [1.0 - x - y, x, y];
        if self.degree == 1 {
            out[..3].copy_from_slice(&l);
            return;
        }
        for i in 0..3 {
            out[i] = l[i] * (2.0 * l[i] - 1.0);
        }
        for e in 0..3 {
            let (a, b) = ((e + 1) % 3, (e + 2) % 3);
            out[3 + e] = 4.0 * l[a] * l[b];
        }
    }

    pub fn grad(&self, [x, y]: [f64; 2], out: &mut [[f64; 2]]) {
        let l = [1.0 - x - y, x, y];
        let dl = [[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]];
        if self.degree == 1 {
            out[..3].copy_from_slice(&dl);
            return;
        }
        for i in 0..3 {
            let s = 4.0 * l[i] - 1.0;
            out[i] = [s * dl[i][0], s * dl[i][1]];
        }
        for e in 0..3 {
            let (a, b) = ((e + 1) % 3, (e + 2) % 3);
            out[3 + e] = [
                4.0 * (dl[a][0] * l[b] + l[a] * dl[b][0]),
                4.0 * (dl[a][1] * l[b] + l[a] * dl[b][1]),
            ];
        }
    }

    /// Reference coordinates of the nodes.
    pub fn nodes(&self) -> Vec<[f64; 2]> {
        let mut v = vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
        if self.degree == 2 {
            v.extend_from_slice(&[[0.5, 0.5], [0.0, 0.5], [0.5, 0.0]]);
        }
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn orthonormal_on_reference() {
        for k in 0..=MAX_BROKEN_DEGREE {
            let b = OrthonormalBasis::new(k).unwrap();
            assert_eq!(b.len(), dim_pk(k));
            let rule = quadrature_rule(2 * k + 2).unwrap();
            let n = b.len();
            let mut gram = vec![0.0; n * n];
            let mut v = vec![0.0; n];
            for (p, w) in rule.points.iter().zip(&rule.weights) {
                b.eval(*p, &mut v);
                for i in 0..n {
                    for j in 0..n {
                        gram[i * n + j] += w * v[i] * v[j];
                    }
                }
            }
            for i in 0..n {
                for j in 0..n {
                    let e = if i == j { 1.0 } else { 0.0 };
                    assert!((gram[i * n + j] - e).abs() < 1e-12, "k={k} ({i},{j})");
                }
            }
        }
        assert!(OrthonormalBasis::new(MAX_BROKEN_DEGREE + 1).is_err());
    }

    #[test]
    fn orthonormal_gradients_match_differences() {
        let b = OrthonormalBasis::new(3).unwrap();
        let n = b.len();
        let (mut g, mut vp, mut vm) = (vec![[0.0; 2]; n], vec![0.0; n], vec![0.0; n]);
        let x = [0.21, 0.37];
        b.grad(x, &mut g);
        let h = 1e-6;
        for d in 0..2 {
            let mut xp = x;
            let mut xm = x;
            xp[d] += h;
            xm[d] -= h;
            b.eval(xp, &mut vp);
            b.eval(xm, &mut vm);
            for i in 0..n {
                assert!(((vp[i] - vm[i]) / (2.0 * h) - g[i][d]).abs() < 1e-7);
            }
        }
    }

    #[test]
    fn lagrange_is_nodal_and_partition_of_unity() {
        for k in 1..=2 {
            let b = LagrangeBasis::new(k).unwrap();
            let mut v = vec![0.0; b.len()];
            for (i, node) in b.nodes().iter().enumerate() {
                b.eval(*node, &mut v);
                for (j, x) in v.iter().enumerate() {
                    assert!((x - if i == j { 1.0 } else { 0.0 }).abs() < 1e-15);
                }
            }
            b.eval([0.2, 0.3], &mut v);
            assert!((v.iter().sum::<f64>() - 1.0).abs() < 1e-15);
            let mut g = vec![[0.0; 2]; b.len()];
            b.grad([0.2, 0.3], &mut g);
            assert!(g.iter().map(|x| x[0]).sum::<f64>().abs() < 1e-14);
        }
        assert!(LagrangeBasis::new(0).is_err());
        assert!(LagrangeBasis::new(3).is_err());
    }
}
