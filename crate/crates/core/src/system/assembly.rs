use super::linear::{CscMatrix, SaddleBlocks};
use super::{Model, ProblemData};
use crate::constitutive::Tensor2;
use crate::dgops::{boundary_lifting, tensor_at_nodes, Analytic};
use crate::error::{Error, Result};
use crate::femspace::Discretization;

/// Residual and, on request, Jacobian and preconditioner blocks.
#[derive(Debug)]
pub struct Assembled {
    pub residual: Vec<f64>,
    pub jacobian: Option<CscMatrix>,
    pub blocks: Option<SaddleBlocks>,
}

/// What to assemble besides the residual.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) struct Want {
    pub jacobian: bool,
    pub blocks: bool,
}

/// Precomputed connectivity, lifting tables and sparsity for one
/// discretization and data set.
///
/// The DG gradient of a basis function of cell `C` is supported on the
/// patch of `C` (the cell and its face neighbours), so the residual of
/// cell `K` couples every pair of cells in the patch of `K`.
pub struct Assembler<'a> {
    disc: &'a Discretization,
    data: &'a ProblemData,
    nb: usize,
    nv: usize,
    npg: usize,
    patches: Vec<Vec<usize>>,
    /// `lift[K][((m nb + j) 2 + r) nb + i]`: coefficient `i` of column `r`
    /// of the lifting on `K` of `φ_j e_c` living on patch cell `m`
    /// (identical for both components `c`).
    lift: Vec<Vec<f64>>,
    /// `R v*` at volume nodes.
    rvs: Vec<Tensor2>,
    weights: Vec<f64>,
    pattern: CscMatrix,
    velocity_pattern: CscMatrix,
    schur_pattern: CscMatrix,
    threads: usize,
}

impl std::fmt::Debug for Assembler<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Assembler").field("unknowns", &self.len()).field("nnz", &self.pattern.nnz()).finish()
    }
}

const CHUNK: usize = 256;

impl<'a> Assembler<'a> {
    pub fn new(disc: &'a Discretization, data: &'a ProblemData) -> Result<Self> {
        data.validate()?;
        if !disc.velocity.same_mesh(&disc.pressure) || !disc.velocity.same_mesh(&disc.tensor) {
            return Err(Error::Mismatch("spaces live on different meshes".into()));
        }
        let nb = disc.nb();
        let ncells = disc.num_cells();
        let nv = disc.velocity.ndofs();
        let npg = disc.pressure.ndofs();
        let patches: Vec<Vec<usize>> = (0..ncells)
            .map(|k| std::iter::once(k).chain(disc.faces.neighbors(k)).collect())
            .collect();
        let lift = lift_tables(disc, &patches);
        let vstar = {
            let value = data.boundary.clone();
            let gradient = data.boundary_gradient.clone();
            Analytic::new(move |x| value(x), move |x| gradient(x))
        };
        let rvs = tensor_at_nodes(disc, &boundary_lifting(disc, &vstar)?).values;
        if let Some(i) = rvs.iter().position(|t| !t.is_finite()) {
            return Err(Error::NonFinite { cell: i / disc.rule.len(), term: "boundary lifting" });
        }
        let weights = disc.pressure_integrals();
        let (pattern, velocity_pattern, schur_pattern) = build_patterns(disc, &patches)?;
        Ok(Self {
            disc,
            data,
            nb,
            nv,
            npg,
            patches,
            lift,
            rvs,
            weights,
            pattern,
            velocity_pattern,
            schur_pattern,
            threads: super::worker_threads(),
        })
    }

    /// Total number of unknowns.
    pub fn len(&self) -> usize {
        self.nv + self.npg + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn num_velocity(&self) -> usize {
        self.nv
    }

    /// Sparsity of the Jacobian.
    pub fn pattern(&self) -> &CscMatrix {
        &self.pattern
    }

    pub fn set_threads(&mut self, threads: usize) {
        self.threads = threads.max(1);
    }

    pub fn residual(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.run(x, Want { jacobian: false, blocks: false })?.residual)
    }

    pub fn assemble(&self, x: &[f64], jacobian: bool) -> Result<Assembled> {
        self.run(x, Want { jacobian, blocks: false })
    }

    /// Residual, Jacobian and the blocks of the saddle point preconditioner.
    pub fn assemble_with_blocks(&self, x: &[f64]) -> Result<Assembled> {
        self.run(x, Want { jacobian: true, blocks: true })
    }

    pub(crate) fn run(&self, x: &[f64], want: Want) -> Result<Assembled> {
        if x.len() != self.len() {
            return Err(Error::Mismatch(format!("state has length {}, expected {}", x.len(), self.len())));
        }
        let n = self.len();
        let mut res = vec![0.0; n];
        let mut jac = want.jacobian.then(|| self.pattern.clone());
        let mut vel = want.blocks.then(|| self.velocity_pattern.clone());
        let mut schur = want.blocks.then(|| self.schur_pattern.clone());
        let ncells = self.disc.num_cells();
        let mut start = 0;
        while start < ncells {
            let end = (start + CHUNK * self.threads).min(ncells);
            let locals = self.parallel(start..end, |k| self.cell_local(k, x, want))?;
            for loc in &locals {
                self.scatter_cell(loc, &mut res, jac.as_mut(), vel.as_mut(), schur.as_mut());
            }
            start = end;
        }
        let nf = self.disc.faces.faces.len();
        let mut start = 0;
        while start < nf {
            let end = (start + CHUNK * self.threads).min(nf);
            let locals = self.parallel(start..end, |f| self.face_local(f, x, want))?;
            for loc in &locals {
                self.scatter_face(loc, &mut res, jac.as_mut(), vel.as_mut());
            }
            start = end;
        }
        // Mean constraint and its multiplier.
        let lam = x[n - 1];
        for (i, &c) in self.weights.iter().enumerate() {
            res[self.nv + i] += lam * c;
            res[n - 1] += c * x[self.nv + i];
        }
        if let Some(j) = jac.as_mut() {
            for (i, &c) in self.weights.iter().enumerate() {
                j.add(self.nv + i, n - 1, c);
                j.add(n - 1, self.nv + i, c);
            }
        }
        if let Some(s) = schur.as_mut() {
            let m = self.npg;
            for (i, &c) in self.weights.iter().enumerate() {
                s.add(i, m, c);
                s.add(m, i, c);
            }
        }
        let blocks = match (vel, schur) {
            (Some(velocity), Some(schur)) => Some(SaddleBlocks { nv: self.nv, velocity, schur }),
            _ => None,
        };
        Ok(Assembled { residual: res, jacobian: jac, blocks })
    }

    fn parallel<T: Send>(&self, range: std::ops::Range<usize>, f: impl Fn(usize) -> Result<T> + Sync) -> Result<Vec<T>> {
        let len = range.len();
        if self.threads <= 1 || len < 2 * CHUNK {
            return range.map(f).collect();
        }
        let per = len.div_ceil(self.threads);
        let f = &f;
        let parts: Vec<Result<Vec<T>>> = std::thread::scope(|s| {
            let handles: Vec<_> = (0..self.threads)
                .map(|t| {
                    let lo = range.start + t * per;
                    let hi = (lo + per).min(range.end);
                    s.spawn(move || (lo..hi).map(f).collect::<Result<Vec<T>>>())
                })
                .collect();
            handles.into_iter().map(|h| h.join().expect("assembly worker panicked")).collect()
        });
        let mut out = Vec::with_capacity(len);
        for p in parts {
            out.extend(p?);
        }
        Ok(out)
    }

    fn cell_local(&self, k: usize, x: &[f64], want: Want) -> Result<CellLocal> {
        let disc = self.disc;
        let data = self.data;
        let law = &data.law;
        let ns = data.model == Model::PNavierStokes;
        let nb = self.nb;
        let nq = disc.rule.len();
        let npl = disc.np();
        let patch = &self.patches[k];
        let npatch = patch.len();
        let nvl = npatch * 2 * nb;
        let nloc = nvl + npl;
        let geo = &disc.geometry[k];
        let lift = &self.lift[k];
        let pdofs: Vec<usize> = (0..npl).map(|i| disc.pressure.dof(k, 0, i)).collect();
        let mut res = vec![0.0; nloc];
        let mut jac = if want.jacobian { vec![0.0; nloc * nloc] } else { Vec::new() };
        let mut spd = if want.blocks { vec![0.0; nvl * nvl] } else { Vec::new() };
        let mut schur = if want.blocks { vec![0.0; npl * npl] } else { Vec::new() };
        let mut grad = vec![[0.0; 2]; nb];
        // g[m nb + j]: DG gradient direction of φ_j on patch cell m.
        let mut g = vec![[0.0; 2]; npatch * nb];
        let mut tcol = vec![Tensor2::ZERO; npatch * 2 * nb];
        for q in 0..nq {
            let w = disc.rule.weights[q] * geo.det;
            let phi = &disc.phi[q * nb..(q + 1) * nb];
            let psi = &disc.psi[q * npl..(q + 1) * npl];
            disc.grad_phi(k, q, &mut grad);
            for m in 0..npatch {
                for j in 0..nb {
                    let mut gv = if m == 0 { grad[j] } else { [0.0; 2] };
                    for (r, gr) in gv.iter_mut().enumerate() {
                        let row = &lift[((m * nb + j) * 2 + r) * nb..((m * nb + j) * 2 + r + 1) * nb];
                        *gr -= row.iter().zip(phi).map(|(a, b)| a * b).sum::<f64>();
                    }
                    g[m * nb + j] = gv;
                }
            }
            let mut l = self.rvs[k * nq + q];
            for (m, &c_m) in patch.iter().enumerate() {
                for c in 0..2 {
                    let base = c_m * 2 * nb + c * nb;
                    let (mut s0, mut s1) = (0.0, 0.0);
                    for j in 0..nb {
                        let u = x[base + j];
                        s0 += u * g[m * nb + j][0];
                        s1 += u * g[m * nb + j][1];
                    }
                    add_row(&mut l, c, [s0, s1]);
                }
            }
            let mut v = [0.0; 2];
            for c in 0..2 {
                v[c] = (0..nb).map(|j| x[k * 2 * nb + c * nb + j] * phi[j]).sum();
            }
            let qh: f64 = (0..npl).map(|i| x[self.nv + pdofs[i]] * psi[i]).sum();
            let xp = geo.map(disc.rule.points[q]);
            let gval = (data.divergence)(xp);
            let stress = law.stress(l);
            let mut mten = stress - Tensor2::diag(qh, qh) - (data.tensor_force)(xp);
            if ns {
                mten -= Tensor2::outer(v, v) * 0.5;
            }
            let b = (data.body_force)(xp);
            let lg = l - Tensor2::diag(gval, gval);
            let conv = lg.apply(v);
            // Momentum rows.
            for m in 0..npatch {
                for d in 0..2 {
                    let row = row_of(mten, d);
                    for lj in 0..nb {
                        let gl = g[m * nb + lj];
                        res[m * 2 * nb + d * nb + lj] += w * (row[0] * gl[0] + row[1] * gl[1]);
                    }
                }
            }
            for d in 0..2 {
                let own = -b[d] + if ns { 0.5 * conv[d] } else { 0.0 };
                for lj in 0..nb {
                    res[d * nb + lj] += w * phi[lj] * own;
                }
            }
            let div = l.trace() - gval;
            for i in 0..npl {
                res[nvl + i] += w * psi[i] * div;
            }
            if !(want.jacobian || want.blocks) {
                continue;
            }
            // DS(L)[e_a ⊗ e_r] for the four unit tensors.
            let units = [
                law.stress_jacobian(l, Tensor2::new(1.0, 0.0, 0.0, 0.0)),
                law.stress_jacobian(l, Tensor2::new(0.0, 1.0, 0.0, 0.0)),
                law.stress_jacobian(l, Tensor2::new(0.0, 0.0, 1.0, 0.0)),
                law.stress_jacobian(l, Tensor2::new(0.0, 0.0, 0.0, 1.0)),
            ];
            for m in 0..npatch {
                for c in 0..2 {
                    for j in 0..nb {
                        let gj = g[m * nb + j];
                        tcol[m * 2 * nb + c * nb + j] = units[2 * c] * gj[0] + units[2 * c + 1] * gj[1];
                    }
                }
            }
            for col in 0..nvl {
                let t = tcol[col];
                for m in 0..npatch {
                    for d in 0..2 {
                        let row = row_of(t, d);
                        for lj in 0..nb {
                            let gl = g[m * nb + lj];
                            let val = w * (row[0] * gl[0] + row[1] * gl[1]);
                            let r = m * 2 * nb + d * nb + lj;
                            if want.jacobian {
                                jac[r * nloc + col] += val;
                            }
                            if want.blocks {
                                spd[r * nvl + col] += val;
                            }
                        }
                    }
                }
            }
            if want.jacobian {
                for m in 0..npatch {
                    for c in 0..2 {
                        for j in 0..nb {
                            let col = m * 2 * nb + c * nb + j;
                            let gj = g[m * nb + j];
                            for i in 0..npl {
                                // Divergence rows and the transposed pressure columns.
                                jac[(nvl + i) * nloc + col] += w * psi[i] * gj[c];
                                jac[col * nloc + nvl + i] -= w * psi[i] * gj[c];
                            }
                        }
                    }
                }
                if ns {
                    for m in 0..npatch {
                        for d in 0..2 {
                            for lj in 0..nb {
                                let r = m * 2 * nb + d * nb + lj;
                                let gl = g[m * nb + lj];
                                let vg = v[0] * gl[0] + v[1] * gl[1];
                                // −½ v ⊗ v tested with e_d ⊗ g_l, differentiated in v on K.
                                for c in 0..2 {
                                    let delta = if c == d { vg } else { 0.0 };
                                    let coef = -0.5 * w * (delta + v[d] * gl[c]);
                                    for j in 0..nb {
                                        jac[r * nloc + c * nb + j] += coef * phi[j];
                                    }
                                }
                            }
                        }
                    }
                    for d in 0..2 {
                        for lj in 0..nb {
                            let r = d * nb + lj;
                            let wl = 0.5 * w * phi[lj];
                            // ½ (L − gI) v: derivative through L ...
                            for m in 0..npatch {
                                for j in 0..nb {
                                    let gj = g[m * nb + j];
                                    jac[r * nloc + m * 2 * nb + d * nb + j] += wl * (gj[0] * v[0] + gj[1] * v[1]);
                                }
                            }
                            // ... and through v.
                            let row = row_of(lg, d);
                            for c in 0..2 {
                                for j in 0..nb {
                                    jac[r * nloc + c * nb + j] += wl * row[c] * phi[j];
                                }
                            }
                        }
                    }
                }
            }
            if want.blocks {
                let nu = viscosity(law.p(), law.delta(), l);
                for i in 0..npl {
                    for i2 in 0..npl {
                        schur[i * npl + i2] += w / nu * psi[i] * psi[i2];
                    }
                }
            }
        }
        if let Some(i) = res.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { cell: k, term: if i < nvl { "momentum" } else { "divergence" } });
        }
        if jac.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { cell: k, term: "jacobian" });
        }
        Ok(CellLocal { cell: k, pdofs, res, jac, spd, schur })
    }

    fn face_local(&self, f: usize, x: &[f64], want: Want) -> Result<FaceLocal> {
        let disc = self.disc;
        let law = &self.data.law;
        let nb = self.nb;
        let face = &disc.faces.faces[f];
        let normal = face.normal;
        let sides: Vec<(usize, usize)> = (0..2).filter_map(|s| disc.face_side(f, s)).collect();
        let ns = sides.len();
        let nloc = ns * 2 * nb;
        let alpha = self.data.alpha;
        let h = disc.h;
        let mut res = vec![0.0; nloc];
        let need = want.jacobian || want.blocks;
        let mut jac = if need { vec![0.0; nloc * nloc] } else { Vec::new() };
        for q in 0..disc.face_rule.len() {
            let w = disc.face_rule.weights[q] * face.length;
            let mut jump = [0.0; 2];
            for (s, &(cell, t)) in sides.iter().enumerate() {
                let sign = if s == 0 { 1.0 } else { -1.0 };
                let phi = &disc.face_phi[t][q * nb..(q + 1) * nb];
                for (c, jc) in jump.iter_mut().enumerate() {
                    *jc += sign * (0..nb).map(|j| x[cell * 2 * nb + c * nb + j] * phi[j]).sum::<f64>();
                }
            }
            if face.is_boundary() {
                let vs = (self.data.boundary)(disc.face_point(f, q));
                jump[0] -= vs[0];
                jump[1] -= vs[1];
            }
            let arg = Tensor2::outer(jump, normal) * (1.0 / h);
            let pn = law.stress(arg).apply(normal);
            for (s, &(_, t)) in sides.iter().enumerate() {
                let sign = if s == 0 { 1.0 } else { -1.0 };
                let phi = &disc.face_phi[t][q * nb..(q + 1) * nb];
                for d in 0..2 {
                    for l in 0..nb {
                        res[s * 2 * nb + d * nb + l] += alpha * w * sign * phi[l] * pn[d];
                    }
                }
            }
            if !need {
                continue;
            }
            // DS(arg)[e_c ⊗ n] n, for c = 0, 1.
            let dn: Vec<[f64; 2]> = (0..2)
                .map(|c| {
                    let mut e = [0.0; 2];
                    e[c] = 1.0;
                    law.stress_jacobian(arg, Tensor2::outer(e, normal)).apply(normal)
                })
                .collect();
            for (s2, &(_, t2)) in sides.iter().enumerate() {
                let sign2 = if s2 == 0 { 1.0 } else { -1.0 };
                let phi2 = &disc.face_phi[t2][q * nb..(q + 1) * nb];
                for c in 0..2 {
                    for j in 0..nb {
                        let col = s2 * 2 * nb + c * nb + j;
                        let scale = alpha * w * sign2 * phi2[j] / h;
                        for (s, &(_, t)) in sides.iter().enumerate() {
                            let sign = if s == 0 { 1.0 } else { -1.0 };
                            let phi = &disc.face_phi[t][q * nb..(q + 1) * nb];
                            for d in 0..2 {
                                for l in 0..nb {
                                    jac[(s * 2 * nb + d * nb + l) * nloc + col] += scale * sign * phi[l] * dn[c][d];
                                }
                            }
                        }
                    }
                }
            }
        }
        if res.iter().chain(&jac).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { cell: face.minus, term: "penalty" });
        }
        Ok(FaceLocal { cells: sides.iter().map(|s| s.0).collect(), res, jac })
    }

    fn scatter_cell(
        &self,
        loc: &CellLocal,
        res: &mut [f64],
        jac: Option<&mut CscMatrix>,
        vel: Option<&mut CscMatrix>,
        schur: Option<&mut CscMatrix>,
    ) {
        let nb2 = 2 * self.nb;
        let patch = &self.patches[loc.cell];
        let nvl = patch.len() * nb2;
        let global = |i: usize| -> usize {
            if i < nvl {
                patch[i / nb2] * nb2 + i % nb2
            } else {
                self.nv + loc.pdofs[i - nvl]
            }
        };
        let nloc = loc.res.len();
        for (i, r) in loc.res.iter().enumerate() {
            res[global(i)] += r;
        }
        if let Some(jac) = jac {
            for col in 0..nloc {
                let gc = global(col);
                for row in 0..nloc {
                    let v = loc.jac[row * nloc + col];
                    if v != 0.0 {
                        jac.add(global(row), gc, v);
                    }
                }
            }
        }
        if let Some(vel) = vel {
            for col in 0..nvl {
                let gc = global(col);
                for row in 0..nvl {
                    let v = loc.spd[row * nvl + col];
                    if v != 0.0 {
                        vel.add(global(row), gc, v);
                    }
                }
            }
        }
        if let Some(schur) = schur {
            let np = loc.pdofs.len();
            for i in 0..np {
                for i2 in 0..np {
                    schur.add(loc.pdofs[i], loc.pdofs[i2], loc.schur[i * np + i2]);
                }
            }
        }
    }

    fn scatter_face(&self, loc: &FaceLocal, res: &mut [f64], jac: Option<&mut CscMatrix>, vel: Option<&mut CscMatrix>) {
        let nb2 = 2 * self.nb;
        let global = |i: usize| loc.cells[i / nb2] * nb2 + i % nb2;
        let nloc = loc.res.len();
        for (i, r) in loc.res.iter().enumerate() {
            res[global(i)] += r;
        }
        for m in [jac, vel].into_iter().flatten() {
            for col in 0..nloc {
                let gc = global(col);
                for row in 0..nloc {
                    let v = loc.jac[row * nloc + col];
                    if v != 0.0 {
                        m.add(global(row), gc, v);
                    }
                }
            }
        }
    }
}

struct CellLocal {
    cell: usize,
    pdofs: Vec<usize>,
    res: Vec<f64>,
    jac: Vec<f64>,
    spd: Vec<f64>,
    schur: Vec<f64>,
}

struct FaceLocal {
    cells: Vec<usize>,
    res: Vec<f64>,
    jac: Vec<f64>,
}

#[inline]
fn row_of(t: Tensor2, d: usize) -> [f64; 2] {
    if d == 0 {
        [t.a11, t.a12]
    } else {
        [t.a21, t.a22]
    }
}

#[inline]
fn add_row(t: &mut Tensor2, d: usize, r: [f64; 2]) {
    if d == 0 {
        t.a11 += r[0];
        t.a12 += r[1];
    } else {
        t.a21 += r[0];
        t.a22 += r[1];
    }
}

/// Local viscosity `(δ + |L^sym|)^{p−2}`, clamped away from 0 and ∞.
fn viscosity(p: f64, delta: f64, l: Tensor2) -> f64 {
    (delta + l.sym().norm()).max(1e-12).powf(p - 2.0).clamp(1e-10, 1e10)
}

fn lift_tables(disc: &Discretization, patches: &[Vec<usize>]) -> Vec<Vec<f64>> {
    let nb = disc.nb();
    let mut out: Vec<Vec<f64>> = patches.iter().map(|p| vec![0.0; p.len() * nb * 2 * nb]).collect();
    for (f, face) in disc.faces.faces.iter().enumerate() {
        let coef = if face.is_boundary() { 1.0 } else { 0.5 };
        let sides: Vec<(usize, usize)> = (0..2).filter_map(|s| disc.face_side(f, s)).collect();
        for &(k, tk) in &sides {
            let det = disc.geometry[k].det;
            for (s, &(c, tc)) in sides.iter().enumerate() {
                let sign = if s == 0 { 1.0 } else { -1.0 };
                let m = patches[k].iter().position(|&x| x == c).expect("face neighbour in patch");
                let table = &mut out[k];
                for q in 0..disc.face_rule.len() {
                    let wq = coef * disc.face_rule.weights[q] * face.length / det;
                    let pk = &disc.face_phi[tk][q * nb..(q + 1) * nb];
                    let pc = &disc.face_phi[tc][q * nb..(q + 1) * nb];
                    for j in 0..nb {
                        for r in 0..2 {
                            let a = wq * sign * face.normal[r] * pc[j];
                            let row = &mut table[((m * nb + j) * 2 + r) * nb..((m * nb + j) * 2 + r + 1) * nb];
                            for (x, p) in row.iter_mut().zip(pk) {
                                *x += a * p;
                            }
                        }
                    }
                }
            }
        }
    }
    out
}

fn build_patterns(disc: &Discretization, patches: &[Vec<usize>]) -> Result<(CscMatrix, CscMatrix, CscMatrix)> {
    let nb2 = 2 * disc.nb();
    let nv = disc.velocity.ndofs();
    let npg = disc.pressure.ndofs();
    let n = nv + npg + 1;
    let npl = disc.np();
    let ncells = disc.num_cells();
    let pdofs = |k: usize| (0..npl).map(move |i| disc.pressure.dof(k, 0, i));
    let mut columns: Vec<Vec<usize>> = Vec::with_capacity(n);
    let mut vcolumns: Vec<Vec<usize>> = Vec::with_capacity(nv);
    for c in 0..ncells {
        let mut cells: Vec<usize> = patches[c].iter().flat_map(|&k| patches[k].iter().copied()).collect();
        cells.sort_unstable();
        cells.dedup();
        let vrows: Vec<usize> = cells.iter().flat_map(|&a| a * nb2..(a + 1) * nb2).collect();
        let mut prow: Vec<usize> = patches[c].iter().flat_map(|&k| pdofs(k)).map(|i| nv + i).collect();
        prow.sort_unstable();
        prow.dedup();
        for _ in 0..nb2 {
            let mut col = vrows.clone();
            col.extend_from_slice(&prow);
            columns.push(col);
            vcolumns.push(vrows.clone());
        }
    }
    let mut pcols: Vec<Vec<usize>> = vec![Vec::new(); npg];
    let mut scols: Vec<Vec<usize>> = vec![Vec::new(); npg + 1];
    for k in 0..ncells {
        for i in pdofs(k) {
            for &a in &patches[k] {
                pcols[i].extend(a * nb2..(a + 1) * nb2);
            }
            for i2 in pdofs(k) {
                scols[i].push(i2);
            }
        }
    }
    for (i, mut col) in pcols.into_iter().enumerate() {
        col.push(n - 1);
        columns.push(col);
        scols[i].push(npg);
    }
    columns.push((nv..nv + npg).collect());
    scols[npg] = (0..npg).collect();
    Ok((
        CscMatrix::from_pattern(n, columns)?,
        CscMatrix::from_pattern(nv, vcolumns)?,
        CscMatrix::from_pattern(npg + 1, scols)?,
    ))
}
