//! Face traces, lifting (jump) operators, DG gradients and DG norms.
//!
//! Jumps follow the orientation-free definition
//! `[[w ⊗ n]] = w⁻ ⊗ n⁻ + w⁺ ⊗ n⁺` on interior faces and `w ⊗ n` on
//! boundary faces; averages are `(w⁻ + w⁺)/2` and the trace, respectively.
//! The lifting `R w` is the broken tensor field of degree `k` with
//! `(R w, X) = ⟨[[w ⊗ n]], {X}⟩` for all broken tensor fields `X`.

use crate::constitutive::Tensor2;
use crate::error::{Error, Result};
use crate::femspace::{Discretization, Field, SpaceKind};
use crate::nfunctions::{antiderivative, NFunctionParams};

/// Where a piecewise function is being evaluated.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Node {
    /// Volume quadrature node `q` of the discretization.
    Volume(usize),
    /// Face quadrature node `q` seen through face table `t`.
    Face(usize, usize),
    /// Any other reference point.
    Other,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EvalPoint {
    pub cell: usize,
    pub xi: [f64; 2],
    pub x: [f64; 2],
    pub node: Node,
}

/// A vector field that can be evaluated cell by cell, possibly
/// discontinuous across faces.
pub trait PiecewiseVector {
    fn value(&self, disc: &Discretization, at: EvalPoint) -> [f64; 2];
    /// Broken gradient, entry `(a, b) = ∂w_a/∂x_b`.
    fn gradient(&self, disc: &Discretization, at: EvalPoint) -> Tensor2;
    /// Checks that the field can be used with `disc`.
    fn check(&self, _disc: &Discretization) -> Result<()> {
        Ok(())
    }
}

impl PiecewiseVector for Field {
    fn value(&self, disc: &Discretization, at: EvalPoint) -> [f64; 2] {
        let space = self.space();
        let n = space.scalar_dim();
        let c = self.coeffs();
        let base = space.dof(at.cell, 0, 0);
        let tab = table(disc, self, at.node);
        match tab {
            Some(phi) => {
                let mut v = [0.0; 2];
                for i in 0..n {
                    v[0] += c[base + i] * phi[i];
                    v[1] += c[base + n + i] * phi[i];
                }
                v
            }
            None => {
                let v = self.evaluate(at.cell, at.xi).expect("cell index checked");
                [v[0], v[1]]
            }
        }
    }

    fn gradient(&self, disc: &Discretization, at: EvalPoint) -> Tensor2 {
        let space = self.space();
        let n = space.scalar_dim();
        let c = self.coeffs();
        let base = space.dof(at.cell, 0, 0);
        let mut g = [[0.0; 2]; 2];
        match at.node {
            Node::Volume(q) if space.degree() == disc.degree => {
                for i in 0..n {
                    let d = disc.dphi[q * n + i];
                    for a in 0..2 {
                        g[a][0] += c[base + a * n + i] * d[0];
                        g[a][1] += c[base + a * n + i] * d[1];
                    }
                }
                let geo = &disc.geometry[at.cell];
                let r0 = geo.grad(g[0]);
                let r1 = geo.grad(g[1]);
                Tensor2::new(r0[0], r0[1], r1[0], r1[1])
            }
            _ => {
                let gr = self.evaluate_gradient(at.cell, at.xi).expect("cell index checked");
                Tensor2::new(gr[0][0], gr[0][1], gr[1][0], gr[1][1])
            }
        }
    }

    fn check(&self, disc: &Discretization) -> Result<()> {
        if self.space().kind() != SpaceKind::BrokenVector {
            return Err(Error::Mismatch("expected a broken vector field".into()));
        }
        if !self.space().same_mesh(&disc.velocity) {
            return Err(Error::Mismatch("field lives on a different mesh".into()));
        }
        Ok(())
    }
}

fn table<'a>(disc: &'a Discretization, f: &Field, node: Node) -> Option<&'a [f64]> {
    if f.space().degree() != disc.degree {
        return None;
    }
    let n = disc.nb();
    match node {
        Node::Volume(q) => Some(&disc.phi[q * n..(q + 1) * n]),
        Node::Face(t, q) => Some(&disc.face_phi[t][q * n..(q + 1) * n]),
        Node::Other => None,
    }
}

/// A smooth field given by closures of the physical point. Its interior
/// jumps vanish identically.
pub struct Analytic<F, G> {
    pub value: F,
    pub gradient: G,
}

impl<F, G> Analytic<F, G>
where
    F: Fn([f64; 2]) -> [f64; 2],
    G: Fn([f64; 2]) -> Tensor2,
{
    pub fn new(value: F, gradient: G) -> Self {
        Self { value, gradient }
    }
}

impl<F, G> PiecewiseVector for Analytic<F, G>
where
    F: Fn([f64; 2]) -> [f64; 2],
    G: Fn([f64; 2]) -> Tensor2,
{
    fn value(&self, _: &Discretization, at: EvalPoint) -> [f64; 2] {
        (self.value)(at.x)
    }

    fn gradient(&self, _: &Discretization, at: EvalPoint) -> Tensor2 {
        (self.gradient)(at.x)
    }
}

/// `a − b`.
pub struct Difference<'a, A: ?Sized, B: ?Sized>(pub &'a A, pub &'a B);

impl<A: PiecewiseVector + ?Sized, B: PiecewiseVector + ?Sized> PiecewiseVector for Difference<'_, A, B> {
    fn value(&self, disc: &Discretization, at: EvalPoint) -> [f64; 2] {
        let (a, b) = (self.0.value(disc, at), self.1.value(disc, at));
        [a[0] - b[0], a[1] - b[1]]
    }

    fn gradient(&self, disc: &Discretization, at: EvalPoint) -> Tensor2 {
        self.0.gradient(disc, at) - self.1.gradient(disc, at)
    }

    fn check(&self, disc: &Discretization) -> Result<()> {
        self.0.check(disc)?;
        self.1.check(disc)
    }
}

/// Evaluation point for volume node `q` of `cell`.
pub fn volume_point(disc: &Discretization, cell: usize, q: usize) -> EvalPoint {
    let xi = disc.rule.points[q];
    EvalPoint { cell, xi, x: disc.geometry[cell].map(xi), node: Node::Volume(q) }
}

/// Evaluation point for face node `q` of face `f` seen from `side`
/// (0 = minus, 1 = plus). `None` for the plus side of a boundary face.
pub fn face_point(disc: &Discretization, f: usize, side: usize, q: usize) -> Option<EvalPoint> {
    let (cell, t) = disc.face_side(f, side)?;
    Some(EvalPoint { cell, xi: disc.face_xi[t][q], x: disc.face_point(f, q), node: Node::Face(t, q) })
}

/// `{w}` at face node `q`.
pub fn face_average<W: PiecewiseVector + ?Sized>(disc: &Discretization, w: &W, f: usize, q: usize) -> [f64; 2] {
    let m = w.value(disc, face_point(disc, f, 0, q).expect("minus side exists"));
    match face_point(disc, f, 1, q) {
        Some(at) => {
            let p = w.value(disc, at);
            [0.5 * (m[0] + p[0]), 0.5 * (m[1] + p[1])]
        }
        None => m,
    }
}

/// `[[w ⊗ n]]` at face node `q`.
pub fn face_jump<W: PiecewiseVector + ?Sized>(disc: &Discretization, w: &W, f: usize, q: usize) -> Tensor2 {
    let n = disc.faces.faces[f].normal;
    let m = w.value(disc, face_point(disc, f, 0, q).expect("minus side exists"));
    match face_point(disc, f, 1, q) {
        Some(at) => {
            let p = w.value(disc, at);
            Tensor2::outer([m[0] - p[0], m[1] - p[1]], n)
        }
        None => Tensor2::outer(m, n),
    }
}

/// A tensor value at every volume quadrature node, `values[cell * nq + q]`.
#[derive(Clone, Debug, PartialEq)]
pub struct NodalTensors {
    pub nq: usize,
    pub values: Vec<Tensor2>,
}

impl NodalTensors {
    pub fn get(&self, cell: usize, q: usize) -> Tensor2 {
        self.values[cell * self.nq + q]
    }

    pub fn map(&self, f: impl Fn(Tensor2) -> Tensor2) -> Self {
        Self { nq: self.nq, values: self.values.iter().map(|&t| f(t)).collect() }
    }
}

/// Evaluates a broken tensor field at the volume nodes.
pub fn tensor_at_nodes(disc: &Discretization, field: &Field) -> NodalTensors {
    let nq = disc.rule.len();
    let nb = disc.nb();
    let c = field.coeffs();
    let mut values = Vec::with_capacity(disc.num_cells() * nq);
    for cell in 0..disc.num_cells() {
        let base = cell * 4 * nb;
        for q in 0..nq {
            let phi = &disc.phi[q * nb..(q + 1) * nb];
            let mut t = [0.0; 4];
            for (ab, ti) in t.iter_mut().enumerate() {
                *ti = (0..nb).map(|i| c[base + ab * nb + i] * phi[i]).sum();
            }
            values.push(Tensor2::from_array(t));
        }
    }
    NodalTensors { nq, values }
}

fn lift_faces<W: PiecewiseVector + ?Sized>(disc: &Discretization, w: &W, boundary_only: bool) -> Result<Field> {
    w.check(disc)?;
    let nb = disc.nb();
    let mut coeffs = vec![0.0; disc.tensor.ndofs()];
    for (f, face) in disc.faces.faces.iter().enumerate() {
        if boundary_only && !face.is_boundary() {
            continue;
        }
        let weight = if face.is_boundary() { 1.0 } else { 0.5 };
        for q in 0..disc.face_rule.len() {
            let jump = face_jump(disc, w, f, q).to_array();
            let wq = disc.face_rule.weights[q] * face.length * weight;
            for side in 0..2 {
                let Some((cell, t)) = disc.face_side(f, side) else { continue };
                let scale = wq / disc.geometry[cell].det;
                let phi = &disc.face_phi[t][q * nb..(q + 1) * nb];
                let base = cell * 4 * nb;
                for ab in 0..4 {
                    for i in 0..nb {
                        coeffs[base + ab * nb + i] += scale * jump[ab] * phi[i];
                    }
                }
            }
        }
    }
    Field::new(disc.tensor.clone(), coeffs)
}

/// The global lifting `R w` as a broken tensor field of the
/// discretization degree.
pub fn lifting<W: PiecewiseVector + ?Sized>(disc: &Discretization, w: &W) -> Result<Field> {
    lift_faces(disc, w, false)
}

/// Lifting of the boundary jumps only. For a smooth `w` this equals
/// [`lifting`], since interior jumps vanish.
pub fn boundary_lifting<W: PiecewiseVector + ?Sized>(disc: &Discretization, w: &W) -> Result<Field> {
    lift_faces(disc, w, true)
}

/// `G w = ∇_h w − R w` at the volume nodes.
pub fn dg_gradient<W: PiecewiseVector + ?Sized>(disc: &Discretization, w: &W) -> Result<NodalTensors> {
    let r = tensor_at_nodes(disc, &lifting(disc, w)?);
    let nq = disc.rule.len();
    let mut values = r.values;
    for cell in 0..disc.num_cells() {
        for q in 0..nq {
            let g = w.gradient(disc, volume_point(disc, cell, q));
            values[cell * nq + q] = g - values[cell * nq + q];
        }
    }
    Ok(NodalTensors { nq, values })
}

/// `D w = sym(G w)` at the volume nodes.
pub fn sym_dg_gradient<W: PiecewiseVector + ?Sized>(disc: &Discretization, w: &W) -> Result<NodalTensors> {
    Ok(dg_gradient(disc, w)?.map(Tensor2::sym))
}

/// `Div w = tr(G w)` at the volume nodes, `values[cell * nq + q]`.
pub fn dg_divergence<W: PiecewiseVector + ?Sized>(disc: &Discretization, w: &W) -> Result<Vec<f64>> {
    Ok(sym_dg_gradient(disc, w)?.values.iter().map(|t| t.trace()).collect())
}

/// `‖T‖_p` of nodal tensors (Frobenius norm pointwise).
pub fn lp_norm(disc: &Discretization, t: &NodalTensors, p: f64) -> f64 {
    let mut s = 0.0;
    for cell in 0..disc.num_cells() {
        let det = disc.geometry[cell].det;
        for (q, w) in disc.rule.weights.iter().enumerate() {
            s += w * det * t.get(cell, q).norm().powf(p);
        }
    }
    s.powf(1.0 / p)
}

/// `h^{1/p} ‖h^{-1} [[w ⊗ n]]‖_{p, Γ_h}`.
pub fn jump_seminorm<W: PiecewiseVector + ?Sized>(disc: &Discretization, w: &W, p: f64) -> Result<f64> {
    w.check(disc)?;
    let h = disc.h;
    let mut s = 0.0;
    for (f, face) in disc.faces.faces.iter().enumerate() {
        for (q, wq) in disc.face_rule.weights.iter().enumerate() {
            s += wq * face.length * (face_jump(disc, w, f, q).norm() / h).powf(p);
        }
    }
    Ok(h.powf(1.0 / p) * s.powf(1.0 / p))
}

fn broken_gradients<W: PiecewiseVector + ?Sized>(disc: &Discretization, w: &W) -> NodalTensors {
    let nq = disc.rule.len();
    let mut values = Vec::with_capacity(disc.num_cells() * nq);
    for cell in 0..disc.num_cells() {
        for q in 0..nq {
            values.push(w.gradient(disc, volume_point(disc, cell, q)));
        }
    }
    NodalTensors { nq, values }
}

/// `‖∇_h w‖_p + h^{1/p} ‖h^{-1} [[w ⊗ n]]‖_{p, Γ_h}`.
pub fn dg_norm<W: PiecewiseVector + ?Sized>(disc: &Discretization, w: &W, p: f64) -> Result<f64> {
    let j = jump_seminorm(disc, w, p)?;
    Ok(lp_norm(disc, &broken_gradients(disc, w), p) + j)
}

/// [`dg_norm`] with boundary jumps measured against Dirichlet data:
/// `‖∇_h w‖_p + h^{1/p} ‖h^{-1} [[(w − g) ⊗ n]]‖_{p, Γ_h}`. A smooth `g` has
/// no interior jumps, so only boundary faces differ from [`dg_norm`].
pub fn dg_norm_with_trace<W, B>(disc: &Discretization, w: &W, trace: &B, p: f64) -> Result<f64>
where
    W: PiecewiseVector + ?Sized,
    B: PiecewiseVector + ?Sized,
{
    let j = jump_seminorm(disc, &Difference(w, trace), p)?;
    Ok(lp_norm(disc, &broken_gradients(disc, w), p) + j)
}

/// `‖D_h w‖_p + h^{1/p} ‖h^{-1} [[w ⊗ n]]‖_{p, Γ_h}` with the broken
/// symmetric gradient `D_h`.
pub fn sym_dg_norm<W: PiecewiseVector + ?Sized>(disc: &Discretization, w: &W, p: f64) -> Result<f64> {
    let j = jump_seminorm(disc, w, p)?;
    Ok(lp_norm(disc, &broken_gradients(disc, w).map(Tensor2::sym), p) + j)
}

/// The shifted jump modular `h Σ_γ ∫_γ φ_{a_γ}(h^{-1} |[[w ⊗ n]]|) ds`
/// with one shift `a_γ ≥ 0` per face.
pub fn jump_modular<W: PiecewiseVector + ?Sized>(
    disc: &Discretization,
    w: &W,
    shifts: &[f64],
    params: NFunctionParams,
) -> Result<f64> {
    w.check(disc)?;
    if shifts.len() != disc.faces.faces.len() {
        return Err(Error::Mismatch(format!(
            "{} shifts given for {} faces",
            shifts.len(),
            disc.faces.faces.len()
        )));
    }
    if let Some(a) = shifts.iter().find(|a| !(**a >= 0.0)) {
        return Err(Error::Domain(format!("shift must be >= 0, got {a}")));
    }
    let h = disc.h;
    let mut s = 0.0;
    for (f, face) in disc.faces.faces.iter().enumerate() {
        let c = params.delta() + shifts[f];
        for (q, wq) in disc.face_rule.weights.iter().enumerate() {
            let t = face_jump(disc, w, f, q).norm() / h;
            s += wq * face.length * antiderivative(params.p(), c, t);
        }
    }
    Ok(h * s)
}

/// Per-face shifts `a_γ`: the mean over the adjacent cells (one on the
/// boundary) of a per-cell value.
pub fn face_average_of_cells(disc: &Discretization, per_cell: &[f64]) -> Vec<f64> {
    disc.faces
        .faces
        .iter()
        .map(|f| if f.is_boundary() { per_cell[f.minus] } else { 0.5 * (per_cell[f.minus] + per_cell[f.plus]) })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::femspace::Discretization;
    use crate::mesh::{generate_square_mesh, Mesh};
    use std::sync::Arc;

    fn disc(n0: usize) -> Discretization {
        Discretization::with_defaults(Arc::new(generate_square_mesh(n0).unwrap()), 1).unwrap()
    }

    #[test]
    fn zero_field_has_zero_everything() {
        let d = disc(2);
        let w = Field::zeros(d.velocity.clone());
        assert!(lifting(&d, &w).unwrap().coeffs().iter().all(|&x| x == 0.0));
        assert_eq!(dg_norm(&d, &w, 2.5).unwrap(), 0.0);
        let params = NFunctionParams::new(2.5, 1e-4).unwrap();
        let a = vec![0.3; d.faces.faces.len()];
        assert_eq!(jump_modular(&d, &w, &a, params).unwrap(), 0.0);
    }

    #[test]
    fn bubble_has_no_lifting() {
        // (1 − x²)(1 − y²) vanishes on ∂Ω and is continuous, so every jump is 0.
        let d = disc(2);
        let w = Analytic::new(
            |x: [f64; 2]| {
                let b = (1.0 - x[0] * x[0]) * (1.0 - x[1] * x[1]);
                [b, -b]
            },
            |x: [f64; 2]| {
                let bx = -2.0 * x[0] * (1.0 - x[1] * x[1]);
                let by = -2.0 * x[1] * (1.0 - x[0] * x[0]);
                Tensor2::new(bx, by, -bx, -by)
            },
        );
        let r = lifting(&d, &w).unwrap();
        assert!(r.coeffs().iter().all(|x| x.abs() < 1e-15));
    }

    #[test]
    fn boundary_lifting_lives_on_boundary_cells() {
        let d = disc(4);
        let w = Analytic::new(|x: [f64; 2]| [x[1], -x[0]], |_| Tensor2::new(0.0, 1.0, -1.0, 0.0));
        let r = lifting(&d, &w).unwrap();
        let nb = d.nb();
        let mut touches = vec![false; d.num_cells()];
        for f in &d.faces.faces {
            if f.is_boundary() {
                touches[f.minus] = true;
            }
        }
        for c in 0..d.num_cells() {
            let norm: f64 = r.coeffs()[c * 4 * nb..(c + 1) * 4 * nb].iter().map(|x| x.abs()).sum();
            assert_eq!(norm > 0.0, touches[c], "cell {c}");
        }
    }

    /// Two cells, piecewise constant field with a unit jump, solved with
    /// a hand-assembled dense P0 system: R|_K = ½ |γ| [[w⊗n]] / |K|.
    #[test]
    fn two_cell_lifting_matches_hand_solve() {
        let m = Mesh::new(vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]], vec![[0, 1, 2], [0, 2, 3]], 0).unwrap();
        let d = Discretization::with_defaults(Arc::new(m), 1).unwrap();
        let mut c = vec![0.0; d.velocity.ndofs()];
        // Constant (1, 0) on cell 0 and 0 on cell 1; the constant mode of the
        // orthonormal basis is √2 on the reference triangle.
        c[0] = 1.0 / 2f64.sqrt();
        let w = Field::new(d.velocity.clone(), c).unwrap();
        let r = lifting(&d, &w).unwrap();
        let rn = tensor_at_nodes(&d, &r);
        // Interior diagonal from (0,0) to (1,1): n⁻ = (-1,1)/√2 out of cell 0.
        let diag = 2f64.sqrt();
        let n = [-1.0 / diag, 1.0 / diag];
        let interior = Tensor2::outer([1.0, 0.0], n);
        let area = 0.5;
        // Cell mean of the lifting on cell 0: interior face share plus the two
        // boundary faces y = 0 (n = (0,-1)) and x = 1 (n = (1,0)).
        let boundary0 = Tensor2::outer([1.0, 0.0], [0.0, -1.0]) + Tensor2::outer([1.0, 0.0], [1.0, 0.0]);
        let expect0 = (interior * (0.5 * diag) + boundary0) * (1.0 / area);
        let expect1 = interior * (0.5 * diag / area);
        let mean = |cell: usize| {
            let mut s = Tensor2::ZERO;
            for (q, w) in d.rule.weights.iter().enumerate() {
                s += rn.get(cell, q) * (w * d.geometry[cell].det);
            }
            s * (1.0 / area)
        };
        assert!((mean(0) - expect0).norm() < 1e-14);
        assert!((mean(1) - expect1).norm() < 1e-14);
    }

    #[test]
    fn modular_for_p2_is_half_jump_square() {
        let d = disc(2);
        let w = Analytic::new(|x: [f64; 2]| [1.0 + x[0], 2.0], |_| Tensor2::new(1.0, 0.0, 0.0, 0.0));
        let params = NFunctionParams::new(2.0, 0.0).unwrap();
        let a = vec![0.7; d.faces.faces.len()];
        let m = jump_modular(&d, &w, &a, params).unwrap();
        let j = jump_seminorm(&d, &w, 2.0).unwrap();
        assert!((m - 0.5 * j * j).abs() < 1e-13 * m);
    }
}
