//! Broken and continuous polynomial spaces, coefficient fields, local
//! `L²` projection and tabulated quadrature data.

pub mod basis;
pub mod quadrature;

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::mesh::{build_faces, edge_vertices, mesh_metrics, FaceSet, Mesh, MeshMetrics};
pub use basis::{dim_pk, LagrangeBasis, OrthonormalBasis};
pub use quadrature::{face_quadrature_rule, quadrature_rule, FaceRule, TriangleRule};

/// Affine map `x = x₀ + J ξ` from the reference triangle onto a cell.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CellGeometry {
    pub x0: [f64; 2],
    /// `jac[r][c] = ∂x_r/∂ξ_c`.
    pub jac: [[f64; 2]; 2],
    pub det: f64,
    /// `J^{-T}`, mapping reference gradients to physical ones.
    pub jinv_t: [[f64; 2]; 2],
}

impl CellGeometry {
    pub fn new(v: [[f64; 2]; 3]) -> Self {
        let jac = [[v[1][0] - v[0][0], v[2][0] - v[0][0]], [v[1][1] - v[0][1], v[2][1] - v[0][1]]];
        let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
        let jinv_t = [[jac[1][1] / det, -jac[1][0] / det], [-jac[0][1] / det, jac[0][0] / det]];
        Self { x0: v[0], jac, det, jinv_t }
    }

    #[inline]
    pub fn map(&self, xi: [f64; 2]) -> [f64; 2] {
        [
            self.x0[0] + self.jac[0][0] * xi[0] + self.jac[0][1] * xi[1],
            self.x0[1] + self.jac[1][0] * xi[0] + self.jac[1][1] * xi[1],
        ]
    }

    /// Reference coordinates of a physical point.
    pub fn inverse_map(&self, x: [f64; 2]) -> [f64; 2] {
        let d = [x[0] - self.x0[0], x[1] - self.x0[1]];
        // J^{-1} = (J^{-T})^T
        [
            self.jinv_t[0][0] * d[0] + self.jinv_t[1][0] * d[1],
            self.jinv_t[0][1] * d[0] + self.jinv_t[1][1] * d[1],
        ]
    }

    #[inline]
    pub fn grad(&self, g: [f64; 2]) -> [f64; 2] {
        [
            self.jinv_t[0][0] * g[0] + self.jinv_t[0][1] * g[1],
            self.jinv_t[1][0] * g[0] + self.jinv_t[1][1] * g[1],
        ]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SpaceKind {
    BrokenScalar,
    BrokenVector,
    BrokenTensor,
    ContinuousScalar,
}

impl SpaceKind {
    /// Number of value components: 1, 2 or 4 (tensor entries `a11, a12, a21, a22`).
    pub fn components(self) -> usize {
        match self {
            SpaceKind::BrokenScalar | SpaceKind::ContinuousScalar => 1,
            SpaceKind::BrokenVector => 2,
            SpaceKind::BrokenTensor => 4,
        }
    }

    pub fn is_broken(self) -> bool {
        self != SpaceKind::ContinuousScalar
    }
}

#[derive(Clone, Debug)]
enum ScalarBasis {
    Orthonormal(Arc<OrthonormalBasis>),
    Lagrange(LagrangeBasis),
}

impl ScalarBasis {
    fn len(&self) -> usize {
        match self {
            ScalarBasis::Orthonormal(b) => b.len(),
            ScalarBasis::Lagrange(b) => b.len(),
        }
    }

    fn eval(&self, xi: [f64; 2], out: &mut [f64]) {
        match self {
            ScalarBasis::Orthonormal(b) => b.eval(xi, out),
            ScalarBasis::Lagrange(b) => b.eval(xi, out),
        }
    }

    fn grad(&self, xi: [f64; 2], out: &mut [[f64; 2]]) {
        match self {
            ScalarBasis::Orthonormal(b) => b.grad(xi, out),
            ScalarBasis::Lagrange(b) => b.grad(xi, out),
        }
    }
}

/// A finite element space on a mesh.
///
/// Broken spaces number their degrees of freedom cell by cell:
/// `cell · (components · n) + component · n + i` with `n = dim P_k`.
/// The continuous space numbers its nodes by `(y, x)` lexicographically.
#[derive(Clone, Debug)]
pub struct Space {
    mesh: Arc<Mesh>,
    kind: SpaceKind,
    degree: usize,
    ndofs: usize,
    basis: ScalarBasis,
    /// Continuous space only: `nodes[cell * nloc + j]`.
    nodes: Option<Arc<Vec<usize>>>,
    node_coords: Option<Arc<Vec<[f64; 2]>>>,
}

/// Builds a space of the given kind and degree.
pub fn make_space(mesh: &Arc<Mesh>, kind: SpaceKind, degree: usize) -> Result<Space> {
    match kind {
        SpaceKind::ContinuousScalar => {
            let basis = LagrangeBasis::new(degree)?;
            let (nodes, coords) = continuous_numbering(mesh, degree);
            Ok(Space {
                mesh: mesh.clone(),
                kind,
                degree,
                ndofs: coords.len(),
                basis: ScalarBasis::Lagrange(basis),
                nodes: Some(Arc::new(nodes)),
                node_coords: Some(Arc::new(coords)),
            })
        }
        _ => {
            let basis = OrthonormalBasis::new(degree)?;
            let ndofs = mesh.num_cells() * kind.components() * basis.len();
            Ok(Space {
                mesh: mesh.clone(),
                kind,
                degree,
                ndofs,
                basis: ScalarBasis::Orthonormal(Arc::new(basis)),
                nodes: None,
                node_coords: None,
            })
        }
    }
}

fn continuous_numbering(mesh: &Mesh, degree: usize) -> (Vec<usize>, Vec<[f64; 2]>) {
    let nloc = if degree == 1 { 3 } else { 6 };
    let mut coords: Vec<[f64; 2]> = mesh.vertices().to_vec();
    let mut local = vec![0usize; mesh.num_cells() * nloc];
    let mut edge_ids = std::collections::HashMap::new();
    for (c, cell) in mesh.cells().iter().enumerate() {
        for j in 0..3 {
            local[c * nloc + j] = cell[j];
        }
        if degree == 2 {
            for e in 0..3 {
                let (a, b) = edge_vertices(e);
                let (a, b) = (cell[a], cell[b]);
                let id = *edge_ids.entry((a.min(b), a.max(b))).or_insert_with(|| {
                    let (pa, pb) = (mesh.vertices()[a], mesh.vertices()[b]);
                    coords.push([0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])]);
                    coords.len() - 1
                });
                local[c * nloc + 3 + e] = id;
            }
        }
    }
    let mut order: Vec<usize> = (0..coords.len()).collect();
    order.sort_by(|&i, &j| {
        let (a, b) = (coords[i], coords[j]);
        a[1].total_cmp(&b[1]).then(a[0].total_cmp(&b[0]))
    });
    let mut rank = vec![0usize; coords.len()];
    for (r, &i) in order.iter().enumerate() {
        rank[i] = r;
    }
    let sorted = order.iter().map(|&i| coords[i]).collect();
    (local.iter().map(|&i| rank[i]).collect(), sorted)
}

impl Space {
    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn kind(&self) -> SpaceKind {
        self.kind
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn ndofs(&self) -> usize {
        self.ndofs
    }

    pub fn components(&self) -> usize {
        self.kind.components()
    }

    /// Scalar shape functions per cell.
    pub fn scalar_dim(&self) -> usize {
        self.basis.len()
    }

    /// Degrees of freedom per cell over all components.
    pub fn local_dim(&self) -> usize {
        self.components() * self.scalar_dim()
    }

    /// Global index of scalar shape function `i` of `component` on `cell`.
    #[inline]
    pub fn dof(&self, cell: usize, component: usize, i: usize) -> usize {
        match &self.nodes {
            Some(nodes) => nodes[cell * self.basis.len() + i],
            None => {
                let n = self.basis.len();
                cell * self.components() * n + component * n + i
            }
        }
    }

    /// All global dofs of a cell in local order.
    pub fn cell_dofs(&self, cell: usize) -> Vec<usize> {
        let n = self.scalar_dim();
        (0..self.components()).flat_map(|c| (0..n).map(move |i| (c, i))).map(|(c, i)| self.dof(cell, c, i)).collect()
    }

    /// Node coordinates of the continuous space, in dof order.
    pub fn node_coordinates(&self) -> Option<&[[f64; 2]]> {
        self.node_coords.as_deref().map(|v| v.as_slice())
    }

    pub fn same_mesh(&self, other: &Space) -> bool {
        Arc::ptr_eq(&self.mesh, &other.mesh)
    }

    pub fn eval_basis(&self, xi: [f64; 2], out: &mut [f64]) {
        self.basis.eval(xi, out)
    }

    pub fn eval_basis_grad(&self, xi: [f64; 2], out: &mut [[f64; 2]]) {
        self.basis.grad(xi, out)
    }

    pub fn geometry(&self, cell: usize) -> CellGeometry {
        CellGeometry::new(self.mesh.cell_vertices(cell))
    }
}

/// Coefficients of a function in a [`Space`].
#[derive(Clone, Debug)]
pub struct Field {
    space: Space,
    coeffs: Vec<f64>,
}

impl Field {
    pub fn new(space: Space, coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() != space.ndofs() {
            return Err(Error::Mismatch(format!(
                "coefficient vector has length {}, space has {} dofs",
                coeffs.len(),
                space.ndofs()
            )));
        }
        Ok(Self { space, coeffs })
    }

    pub fn zeros(space: Space) -> Self {
        let n = space.ndofs();
        Self { space, coeffs: vec![0.0; n] }
    }

    pub fn space(&self) -> &Space {
        &self.space
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<f64> {
        self.coeffs
    }

    /// Value (one entry per component) at reference point `xi` of `cell`.
    pub fn evaluate(&self, cell: usize, xi: [f64; 2]) -> Result<Vec<f64>> {
        self.check_cell(cell)?;
        let n = self.space.scalar_dim();
        let mut phi = vec![0.0; n];
        self.space.eval_basis(xi, &mut phi);
        Ok((0..self.space.components())
            .map(|c| (0..n).map(|i| self.coeffs[self.space.dof(cell, c, i)] * phi[i]).sum())
            .collect())
    }

    /// Physical gradient of every component at reference point `xi`.
    pub fn evaluate_gradient(&self, cell: usize, xi: [f64; 2]) -> Result<Vec<[f64; 2]>> {
        self.check_cell(cell)?;
        let n = self.space.scalar_dim();
        let mut g = vec![[0.0; 2]; n];
        self.space.eval_basis_grad(xi, &mut g);
        let geo = self.space.geometry(cell);
        Ok((0..self.space.components())
            .map(|c| {
                let mut s = [0.0; 2];
                for (i, gi) in g.iter().enumerate() {
                    let a = self.coeffs[self.space.dof(cell, c, i)];
                    s[0] += a * gi[0];
                    s[1] += a * gi[1];
                }
                geo.grad(s)
            })
            .collect())
    }

    fn check_cell(&self, cell: usize) -> Result<()> {
        if cell >= self.space.mesh.num_cells() {
            return Err(Error::Mismatch(format!(
                "cell index {cell} out of range ({} cells)",
                self.space.mesh.num_cells()
            )));
        }
        Ok(())
    }
}

/// Local `L²` projection onto a broken space.
///
/// `f(cell, ξ, x, out)` writes the function value (one entry per component
/// of the target) at reference point `ξ` / physical point `x`. Integrals use
/// `rule`. Since the broken basis is orthonormal on the reference cell, the
/// local mass matrix is `det · I` and the solve is a scaling.
pub fn l2_project<F>(target: &Space, rule: &TriangleRule, mut f: F) -> Result<Field>
where
    F: FnMut(usize, [f64; 2], [f64; 2], &mut [f64]),
{
    if !target.kind().is_broken() {
        return Err(Error::Config(
            "L2 projection onto the continuous space is not local; only broken targets are supported".into(),
        ));
    }
    let n = target.scalar_dim();
    let nc = target.components();
    let tab: Vec<f64> = rule
        .points
        .iter()
        .flat_map(|&p| {
            let mut v = vec![0.0; n];
            target.eval_basis(p, &mut v);
            v
        })
        .collect();
    let mut coeffs = vec![0.0; target.ndofs()];
    let mut val = vec![0.0; nc];
    for cell in 0..target.mesh().num_cells() {
        let geo = target.geometry(cell);
        for (q, (&xi, &w)) in rule.points.iter().zip(&rule.weights).enumerate() {
            val.iter_mut().for_each(|v| *v = 0.0);
            f(cell, xi, geo.map(xi), &mut val);
            for c in 0..nc {
                for i in 0..n {
                    coeffs[target.dof(cell, c, i)] += w * val[c] * tab[q * n + i];
                }
            }
        }
    }
    Field::new(target.clone(), coeffs)
}

/// Projects a field (broken or continuous) onto a broken space on the same
/// mesh with matching component count.
pub fn project_field(field: &Field, target: &Space, rule: &TriangleRule) -> Result<Field> {
    if !field.space().same_mesh(target) {
        return Err(Error::Mismatch("field and target live on different meshes".into()));
    }
    if field.space().components() != target.components() {
        return Err(Error::Mismatch("component counts differ".into()));
    }
    let src = field.space();
    let n = src.scalar_dim();
    let mut phi = vec![0.0; n];
    l2_project(target, rule, |cell, xi, _, out| {
        src.eval_basis(xi, &mut phi);
        for (c, o) in out.iter_mut().enumerate() {
            *o = (0..n).map(|i| field.coeffs()[src.dof(cell, c, i)] * phi[i]).sum();
        }
    })
}

/// Quadrature settings for a [`Discretization`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct QuadratureDegrees {
    pub volume: usize,
    pub face: usize,
}

impl QuadratureDegrees {
    /// `2k + 6` on cells and faces.
    pub fn default_for(k: usize) -> Self {
        Self { volume: 2 * k + 6, face: 2 * k + 6 }
    }
}

/// Everything the DG operators need on one mesh: faces, cell geometry,
/// spaces, quadrature rules and basis tabulations.
///
/// Tabulations are on the reference cell and shared by all cells. Face
/// tables are indexed by `2 e + flip`, where `e` is the local edge and
/// `flip` tells whether the cell traverses the edge against the face
/// parametrization (which runs from the lower to the higher vertex index).
#[derive(Clone, Debug)]
pub struct Discretization {
    pub mesh: Arc<Mesh>,
    pub faces: FaceSet,
    pub metrics: MeshMetrics,
    pub geometry: Vec<CellGeometry>,
    /// Global mesh size `max h_K`.
    pub h: f64,
    pub degree: usize,
    pub velocity: Space,
    pub tensor: Space,
    pub pressure: Space,
    pub rule: TriangleRule,
    pub face_rule: FaceRule,
    /// Broken scalar basis values `phi[q * nb + i]` at volume nodes.
    pub phi: Vec<f64>,
    /// Reference gradients `dphi[q * nb + i]`.
    pub dphi: Vec<[f64; 2]>,
    /// Pressure basis values `psi[q * np + i]`.
    pub psi: Vec<f64>,
    pub dpsi: Vec<[f64; 2]>,
    /// `face_phi[2e + flip][q * nb + i]`.
    pub face_phi: Vec<Vec<f64>>,
    /// Reference coordinates of the face nodes, `face_xi[2e + flip][q]`.
    pub face_xi: Vec<Vec<[f64; 2]>>,
    /// `face_psi[2e + flip][q * np + i]`.
    pub face_psi: Vec<Vec<f64>>,
}

const REF_VERTICES: [[f64; 2]; 3] = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];

impl Discretization {
    pub fn new(mesh: Arc<Mesh>, degree: usize, quad: QuadratureDegrees) -> Result<Self> {
        if degree == 0 {
            return Err(Error::Config("polynomial degree k must be >= 1".into()));
        }
        let faces = build_faces(&mesh)?;
        let metrics = mesh_metrics(&mesh)?;
        let geometry: Vec<CellGeometry> = (0..mesh.num_cells()).map(|c| CellGeometry::new(mesh.cell_vertices(c))).collect();
        let velocity = make_space(&mesh, SpaceKind::BrokenVector, degree)?;
        let tensor = make_space(&mesh, SpaceKind::BrokenTensor, degree)?;
        let pressure = make_space(&mesh, SpaceKind::ContinuousScalar, degree)?;
        let rule = quadrature_rule(quad.volume)?;
        let face_rule = face_quadrature_rule(quad.face)?;
        let nb = velocity.scalar_dim();
        let np = pressure.scalar_dim();
        let mut phi = vec![0.0; rule.len() * nb];
        let mut dphi = vec![[0.0; 2]; rule.len() * nb];
        let mut psi = vec![0.0; rule.len() * np];
        let mut dpsi = vec![[0.0; 2]; rule.len() * np];
        for (q, &xi) in rule.points.iter().enumerate() {
            velocity.eval_basis(xi, &mut phi[q * nb..(q + 1) * nb]);
            velocity.eval_basis_grad(xi, &mut dphi[q * nb..(q + 1) * nb]);
            pressure.eval_basis(xi, &mut psi[q * np..(q + 1) * np]);
            pressure.eval_basis_grad(xi, &mut dpsi[q * np..(q + 1) * np]);
        }
        let mut face_phi = Vec::with_capacity(6);
        let mut face_psi = Vec::with_capacity(6);
        let mut face_xi = Vec::with_capacity(6);
        for e in 0..3 {
            for flip in 0..2 {
                let (a, b) = edge_vertices(e);
                let (s, t) = if flip == 0 { (a, b) } else { (b, a) };
                let (ps, pt) = (REF_VERTICES[s], REF_VERTICES[t]);
                let xis: Vec<[f64; 2]> = face_rule
                    .points
                    .iter()
                    .map(|&u| [(1.0 - u) * ps[0] + u * pt[0], (1.0 - u) * ps[1] + u * pt[1]])
                    .collect();
                let mut fp = vec![0.0; xis.len() * nb];
                let mut fq = vec![0.0; xis.len() * np];
                for (q, &xi) in xis.iter().enumerate() {
                    velocity.eval_basis(xi, &mut fp[q * nb..(q + 1) * nb]);
                    pressure.eval_basis(xi, &mut fq[q * np..(q + 1) * np]);
                }
                face_phi.push(fp);
                face_psi.push(fq);
                face_xi.push(xis);
            }
        }
        let h = metrics.h;
        Ok(Self {
            mesh,
            faces,
            metrics,
            geometry,
            h,
            degree,
            velocity,
            tensor,
            pressure,
            rule,
            face_rule,
            phi,
            dphi,
            psi,
            dpsi,
            face_phi,
            face_xi,
            face_psi,
        })
    }

    /// Default quadrature (`2k + 6`).
    pub fn with_defaults(mesh: Arc<Mesh>, degree: usize) -> Result<Self> {
        Self::new(mesh, degree, QuadratureDegrees::default_for(degree))
    }

    pub fn num_cells(&self) -> usize {
        self.mesh.num_cells()
    }

    /// Scalar broken basis size `dim P_k`.
    pub fn nb(&self) -> usize {
        self.velocity.scalar_dim()
    }

    /// Pressure shape functions per cell.
    pub fn np(&self) -> usize {
        self.pressure.scalar_dim()
    }

    /// Cell and face-table index for side 0 (minus) or 1 (plus) of face `f`.
    /// Returns `None` for the plus side of a boundary face.
    pub fn face_side(&self, f: usize, side: usize) -> Option<(usize, usize)> {
        let face = &self.faces.faces[f];
        let (cell, e) = if side == 0 {
            (face.minus, face.local_edge[0])
        } else if face.is_boundary() {
            return None;
        } else {
            (face.plus, face.local_edge[1])
        };
        let (a, _) = edge_vertices(e);
        let flip = usize::from(self.mesh.cells()[cell][a] != face.vertices[0]);
        Some((cell, 2 * e + flip))
    }

    /// Physical coordinates of face quadrature node `q`.
    pub fn face_point(&self, f: usize, q: usize) -> [f64; 2] {
        let face = &self.faces.faces[f];
        let a = self.mesh.vertices()[face.vertices[0]];
        let b = self.mesh.vertices()[face.vertices[1]];
        let t = self.face_rule.points[q];
        [(1.0 - t) * a[0] + t * b[0], (1.0 - t) * a[1] + t * b[1]]
    }

    /// Physical gradients of the broken basis at volume node `q` of `cell`.
    pub fn grad_phi(&self, cell: usize, q: usize, out: &mut [[f64; 2]]) {
        let nb = self.nb();
        let geo = &self.geometry[cell];
        for i in 0..nb {
            out[i] = geo.grad(self.dphi[q * nb + i]);
        }
    }

    /// `∫_Ω ψ_i` for every pressure basis function.
    pub fn pressure_integrals(&self) -> Vec<f64> {
        let np = self.np();
        let mut c = vec![0.0; self.pressure.ndofs()];
        for cell in 0..self.num_cells() {
            let det = self.geometry[cell].det;
            for (q, w) in self.rule.weights.iter().enumerate() {
                for i in 0..np {
                    c[self.pressure.dof(cell, 0, i)] += w * det * self.psi[q * np + i];
                }
            }
        }
        c
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{generate_square_mesh, red_refine};

    fn mesh(n0: usize) -> Arc<Mesh> {
        Arc::new(generate_square_mesh(n0).unwrap())
    }

    #[test]
    fn dof_counts() {
        let m = mesh(4);
        assert_eq!(make_space(&m, SpaceKind::BrokenVector, 1).unwrap().ndofs(), 192);
        assert_eq!(make_space(&m, SpaceKind::BrokenTensor, 0).unwrap().local_dim(), 4);
        assert_eq!(make_space(&m, SpaceKind::ContinuousScalar, 1).unwrap().ndofs(), 25);
        let p2 = make_space(&m, SpaceKind::ContinuousScalar, 2).unwrap();
        assert_eq!(p2.ndofs(), 25 + 56);
        assert!(make_space(&m, SpaceKind::ContinuousScalar, 0).is_err());
        assert!(make_space(&m, SpaceKind::ContinuousScalar, 3).is_err());
    }

    #[test]
    fn continuous_numbering_is_lexicographic() {
        let m = mesh(2);
        let s = make_space(&m, SpaceKind::ContinuousScalar, 2).unwrap();
        let xs = s.node_coordinates().unwrap();
        for w in xs.windows(2) {
            assert!(w[0][1] < w[1][1] || (w[0][1] == w[1][1] && w[0][0] < w[1][0]));
        }
        for c in 0..m.num_cells() {
            let geo = s.geometry(c);
            for (j, node) in LagrangeBasis::new(2).unwrap().nodes().iter().enumerate() {
                assert_eq!(geo.map(*node), xs[s.dof(c, 0, j)]);
            }
        }
    }

    #[test]
    fn projection_reproduces_linear_and_takes_means() {
        let m = mesh(2);
        let rule = quadrature_rule(8).unwrap();
        let s = make_space(&m, SpaceKind::BrokenScalar, 1).unwrap();
        let f = l2_project(&s, &rule, |_, _, x, out| out[0] = x[0]).unwrap();
        for c in 0..m.num_cells() {
            let geo = s.geometry(c);
            let xi = [0.2, 0.5];
            assert!((f.evaluate(c, xi).unwrap()[0] - geo.map(xi)[0]).abs() < 1e-14);
            assert!((f.evaluate_gradient(c, xi).unwrap()[0][0] - 1.0).abs() < 1e-13);
        }
        let s0 = make_space(&m, SpaceKind::BrokenScalar, 0).unwrap();
        let g = l2_project(&s0, &rule, |_, _, x, out| out[0] = x[0] * x[0]).unwrap();
        for c in 0..m.num_cells() {
            let v = m.cell_vertices(c);
            // Exact mean of x² over a triangle.
            let s: f64 = v.iter().map(|p| p[0] * p[0]).sum::<f64>() + v[0][0] * v[1][0] + v[1][0] * v[2][0] + v[2][0] * v[0][0];
            assert!((g.evaluate(c, [0.3, 0.3]).unwrap()[0] - s / 6.0).abs() < 1e-14);
        }
        let p = make_space(&m, SpaceKind::ContinuousScalar, 1).unwrap();
        assert!(l2_project(&p, &rule, |_, _, _, _| {}).is_err());
    }

    #[test]
    fn nodal_evaluation_gives_barycentric() {
        let m = mesh(2);
        let p = make_space(&m, SpaceKind::ContinuousScalar, 1).unwrap();
        let mut coeffs = vec![0.0; p.ndofs()];
        coeffs[p.dof(3, 0, 0)] = 1.0;
        let f = Field::new(p, coeffs).unwrap();
        let xi = [0.25, 0.6];
        assert!((f.evaluate(3, xi).unwrap()[0] - (1.0 - 0.25 - 0.6)).abs() < 1e-15);
        assert!(f.evaluate(99, xi).is_err());
    }

    #[test]
    fn face_tables_agree_from_both_sides() {
        let m = Arc::new(red_refine(&generate_square_mesh(2).unwrap()));
        let d = Discretization::with_defaults(m, 1).unwrap();
        for f in 0..d.faces.faces.len() {
            for side in 0..2 {
                let Some((cell, t)) = d.face_side(f, side) else { continue };
                for q in 0..d.face_rule.len() {
                    let x = d.geometry[cell].map(d.face_xi[t][q]);
                    let y = d.face_point(f, q);
                    assert!((x[0] - y[0]).abs() < 1e-15 && (x[1] - y[1]).abs() < 1e-15);
                }
            }
        }
        let c = d.pressure_integrals();
        assert!((c.iter().sum::<f64>() - 4.0).abs() < 1e-13);
    }
}
