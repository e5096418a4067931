//! Manufactured solutions, error quantities, experimental orders of
//! convergence and the refinement study driver.

use std::sync::Arc;

use crate::constitutive::{StressLaw, Tensor2};
use crate::dgops::{dg_norm, dg_norm_with_trace, face_average_of_cells, jump_modular, tensor_at_nodes, Analytic, Difference};
use crate::error::{Error, Result};
use crate::femspace::quadrature::gauss_legendre;
use crate::femspace::{Discretization, QuadratureDegrees};
use crate::mesh::{generate_square_mesh, red_refine, Mesh};
use crate::system::{
    newton_solve, prolongate, reconstruct_auxiliary, AuxiliaryFields, DiscreteSolution, Model, NewtonOptions, ProblemData,
};

/// The singular family `v = |x|^β (x₂, −x₁)`, `q = |x|^γ − ⟨|·|^γ⟩` on
/// `(−1, 1)²` with `β = 2(ρ − 1)/p` and `γ = ρ − 2/p'`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ManufacturedSolution {
    pub law: StressLaw,
    pub rho: f64,
    pub beta: f64,
    pub gamma: f64,
    /// `⟨|·|^γ⟩_Ω`.
    pub mean: f64,
}

impl ManufacturedSolution {
    pub fn new(law: StressLaw, rho: f64) -> Result<Self> {
        if !(rho > 0.0 && rho <= 1.0) {
            return Err(Error::Config(format!("rho must lie in (0, 1], got {rho}")));
        }
        let beta = 2.0 * (rho - 1.0) / law.p();
        let gamma = rho - 2.0 / law.params().conjugate_exponent();
        Ok(Self { law, rho, beta, gamma, mean: radial_power_mean(gamma) })
    }

    pub fn p(&self) -> f64 {
        self.law.p()
    }

    pub fn velocity(&self, x: [f64; 2]) -> [f64; 2] {
        let r = x[0].hypot(x[1]);
        if r == 0.0 {
            return [0.0, 0.0];
        }
        let s = r.powf(self.beta);
        [s * x[1], -s * x[0]]
    }

    /// `∇v`, entry `(a, b) = ∂v_a/∂x_b`.
    pub fn gradient(&self, x: [f64; 2]) -> Tensor2 {
        let r2 = x[0] * x[0] + x[1] * x[1];
        if r2 == 0.0 {
            return Tensor2::ZERO;
        }
        let s = r2.powf(0.5 * self.beta);
        let t = self.beta * s / r2;
        let w = [x[1], -x[0]];
        Tensor2::outer(w, x) * t + Tensor2::new(0.0, s, -s, 0.0)
    }

    pub fn sym_gradient(&self, x: [f64; 2]) -> Tensor2 {
        self.gradient(x).sym()
    }

    pub fn pressure(&self, x: [f64; 2]) -> f64 {
        x[0].hypot(x[1]).powf(self.gamma) - self.mean
    }

    /// `ρ p'/2`.
    pub fn expected_rate(&self) -> f64 {
        0.5 * self.rho * self.law.params().conjugate_exponent()
    }

    /// Data for which `(v, q)` solves the problem: `G = S(Dv) − qI`,
    /// `b = (∇v) v` (zero for p-Stokes), `g = 0`, `v* = v`.
    pub fn problem_data(&self, alpha: f64, model: Model) -> Result<ProblemData> {
        let me = *self;
        let data = ProblemData {
            law: self.law,
            alpha,
            model,
            body_force: match model {
                Model::PStokes => Arc::new(|_| [0.0, 0.0]),
                Model::PNavierStokes => Arc::new(move |x| me.gradient(x).apply(me.velocity(x))),
            },
            tensor_force: Arc::new(move |x| {
                let q = me.pressure(x);
                me.law.stress(me.sym_gradient(x)) - Tensor2::diag(q, q)
            }),
            divergence: Arc::new(|_| 0.0),
            boundary: Arc::new(move |x| me.velocity(x)),
            boundary_gradient: Arc::new(move |x| me.gradient(x)),
        };
        data.validate()?;
        Ok(data)
    }

    /// Note on parameters outside the convergence theory, if any.
    pub fn theory_warning(&self, model: Model) -> Option<String> {
        (model == Model::PNavierStokes && self.p() <= 2.0)
            .then(|| format!("p = {} <= 2 with the convective model is not covered by the convergence theory", self.p()))
    }
}

/// Builds the manufactured solution and its problem data.
pub fn make_manufactured(p: f64, delta: f64, rho: f64, alpha: f64, model: Model) -> Result<(ManufacturedSolution, ProblemData)> {
    let exact = ManufacturedSolution::new(StressLaw::from_parts(p, delta)?, rho)?;
    let data = exact.problem_data(alpha, model)?;
    Ok((exact, data))
}

/// `⟨|x|^γ⟩` over `(−1, 1)²`, `γ > −2`.
///
/// By symmetry the square splits into eight triangles `0 ≤ θ ≤ π/4`,
/// `0 ≤ r ≤ sec θ`; the radial integral is exact and the remaining
/// integrand `sec^{γ+2} θ` is smooth.
pub fn radial_power_mean(gamma: f64) -> f64 {
    assert!(gamma > -2.0, "|x|^gamma is not integrable for gamma <= -2");
    let (nodes, weights) = gauss_legendre(40);
    // Nodes on [−1, 1] mapped to [0, π/4].
    let half = std::f64::consts::FRAC_PI_8;
    let mut s = 0.0;
    for (t, w) in nodes.iter().zip(&weights) {
        let theta = half * (t + 1.0);
        s += w * half * theta.cos().powf(-(gamma + 2.0));
    }
    8.0 * s / (gamma + 2.0) / 4.0
}

/// Errors of one level.
#[derive(Clone, Debug, PartialEq)]
pub struct ErrorRecord {
    pub level: usize,
    pub h: f64,
    pub ndof_v: usize,
    pub ndof_q: usize,
    /// `‖F(L_h^sym) − F(Dv)‖₂`.
    pub e_l: f64,
    /// `‖F*(S_h) − F*(S(Dv))‖₂`.
    pub e_s: f64,
    /// Square root of the shifted jump modular of `v_h − v`.
    pub e_jump: f64,
    /// `(‖q_h − q‖_{p'}^{p'})^{1/2}`.
    pub e_q: f64,
    pub newton_iterations: usize,
}

/// Solver health indicators of one level.
#[derive(Clone, Debug, PartialEq)]
pub struct LevelDiagnostics {
    /// `max_i |(tr L_h − g, ψ_i)|`.
    pub divergence_residual: f64,
    pub pressure_mean: f64,
    /// DG norm of `v_h` with boundary jumps taken against `v*`. This is the
    /// quantity that stays bounded under refinement for nonzero boundary data.
    pub velocity_dg_norm: f64,
    /// `‖v_h‖_{∇,p,h}` with boundary jumps `v_h ⊗ n`; grows like
    /// `h^{1/p−1} ‖v*‖_{p,∂Ω}` when `v* ≠ 0` on the boundary.
    pub velocity_dg_norm_zero_trace: f64,
    /// `‖q_h‖_{p'}`.
    pub pressure_norm: f64,
    pub final_residual: f64,
}

/// Computes the four error quantities. `ndof`s and iteration counts are
/// left for the caller.
pub fn compute_errors(
    solution: &DiscreteSolution,
    aux: &AuxiliaryFields,
    exact: &ManufacturedSolution,
    disc: &Discretization,
) -> Result<ErrorRecord> {
    let law = exact.law;
    let pc = law.params().conjugate_exponent();
    let nq = disc.rule.len();
    let l = tensor_at_nodes(disc, &aux.l_h);
    let s = tensor_at_nodes(disc, &aux.s_h);
    let npl = disc.np();
    let (mut el, mut es, mut eq) = (0.0, 0.0, 0.0);
    let mut cell_means = vec![0.0; disc.num_cells()];
    for cell in 0..disc.num_cells() {
        let geo = &disc.geometry[cell];
        let mut mean = Tensor2::ZERO;
        for q in 0..nq {
            let w = disc.rule.weights[q] * geo.det;
            let x = geo.map(disc.rule.points[q]);
            let dv = exact.sym_gradient(x);
            let lh = l.get(cell, q);
            mean += lh.sym() * (disc.rule.weights[q] * 2.0);
            el += w * (law.natural_transform_f(lh) - law.natural_transform_f(dv)).norm().powi(2);
            es += w * (law.conjugate_transform_fstar(s.get(cell, q)) - law.conjugate_transform_fstar(law.stress(dv))).norm().powi(2);
            let qh: f64 = (0..npl)
                .map(|i| solution.pressure.coeffs()[disc.pressure.dof(cell, 0, i)] * disc.psi[q * npl + i])
                .sum();
            eq += w * (qh - exact.pressure(x)).abs().powf(pc);
        }
        cell_means[cell] = mean.norm();
    }
    let shifts = face_average_of_cells(disc, &cell_means);
    let vexact = Analytic::new(|x| exact.velocity(x), |x| exact.gradient(x));
    let modular = jump_modular(disc, &Difference(&solution.velocity, &vexact), &shifts, law.params())?;
    Ok(ErrorRecord {
        level: disc.mesh.level(),
        h: disc.h,
        ndof_v: disc.velocity.ndofs(),
        ndof_q: disc.pressure.ndofs(),
        e_l: el.sqrt(),
        e_s: es.sqrt(),
        e_jump: modular.sqrt(),
        e_q: eq.sqrt(),
        newton_iterations: 0,
    })
}

/// Divergence residual, pressure mean and stability norms.
pub fn diagnostics(
    solution: &DiscreteSolution,
    aux: &AuxiliaryFields,
    data: &ProblemData,
    disc: &Discretization,
) -> Result<LevelDiagnostics> {
    let nq = disc.rule.len();
    let npl = disc.np();
    let l = tensor_at_nodes(disc, &aux.l_h);
    let pc = data.law.params().conjugate_exponent();
    let mut rows = vec![0.0; disc.pressure.ndofs()];
    let mut qnorm = 0.0;
    for cell in 0..disc.num_cells() {
        let geo = &disc.geometry[cell];
        for q in 0..nq {
            let w = disc.rule.weights[q] * geo.det;
            let x = geo.map(disc.rule.points[q]);
            let div = l.get(cell, q).trace() - (data.divergence)(x);
            let mut qh = 0.0;
            for i in 0..npl {
                let dof = disc.pressure.dof(cell, 0, i);
                rows[dof] += w * disc.psi[q * npl + i] * div;
                qh += solution.pressure.coeffs()[dof] * disc.psi[q * npl + i];
            }
            qnorm += w * qh.abs().powf(pc);
        }
    }
    let (value, gradient) = (data.boundary.clone(), data.boundary_gradient.clone());
    let vstar = Analytic::new(move |x| value(x), move |x| gradient(x));
    Ok(LevelDiagnostics {
        divergence_residual: rows.iter().fold(0.0, |m, v| m.max(v.abs())),
        pressure_mean: solution.pressure_mean(disc),
        velocity_dg_norm: dg_norm_with_trace(disc, &solution.velocity, &vstar, data.law.p())?,
        velocity_dg_norm_zero_trace: dg_norm(disc, &solution.velocity, data.law.p())?,
        pressure_norm: qnorm.powf(1.0 / pc),
        final_residual: f64::NAN,
    })
}

/// `log(e_i / e_{i−1}) / log(h_i / h_{i−1})`; `None` unless both errors are
/// positive and finite and the mesh sizes differ.
pub fn eoc(e_prev: f64, e: f64, h_prev: f64, h: f64) -> Option<f64> {
    let ok = |v: f64| v.is_finite() && v > 0.0;
    if !(ok(e_prev) && ok(e) && ok(h_prev) && ok(h)) || h == h_prev {
        return None;
    }
    Some((e / e_prev).ln() / (h / h_prev).ln())
}

/// The four orders of one level, in the order `L, S, jump, q`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct EocRow {
    pub l: Option<f64>,
    pub s: Option<f64>,
    pub jump: Option<f64>,
    pub q: Option<f64>,
}

impl EocRow {
    pub fn between(prev: &ErrorRecord, cur: &ErrorRecord) -> Self {
        let f = |a: f64, b: f64| eoc(a, b, prev.h, cur.h);
        Self {
            l: f(prev.e_l, cur.e_l),
            s: f(prev.e_s, cur.e_s),
            jump: f(prev.e_jump, cur.e_jump),
            q: f(prev.e_q, cur.e_q),
        }
    }
}

/// Parameters of a refinement study.
#[derive(Clone, Debug, PartialEq)]
pub struct StudyConfig {
    pub p: f64,
    pub delta: f64,
    pub alpha: f64,
    pub k: usize,
    pub model: Model,
    pub rho: f64,
    /// Cells per side of the level-0 mesh.
    pub n0: usize,
    /// Finest level; levels `0..=levels` are solved.
    pub levels: usize,
    pub quadrature: Option<QuadratureDegrees>,
    pub newton: NewtonOptions,
    /// Start each level from the prolonged coarse solution.
    pub warm_start: bool,
}

impl Default for StudyConfig {
    fn default() -> Self {
        Self {
            p: 2.5,
            delta: 1e-4,
            alpha: 2.5,
            k: 1,
            model: Model::PNavierStokes,
            rho: 0.1,
            n0: 4,
            levels: 5,
            quadrature: None,
            newton: NewtonOptions::default(),
            warm_start: true,
        }
    }
}

impl StudyConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.p > 1.0 && self.p.is_finite()) {
            return Err(Error::Config(format!("p must be > 1, got {}", self.p)));
        }
        if !(self.delta >= 0.0 && self.delta.is_finite()) {
            return Err(Error::Config(format!("delta must be >= 0, got {}", self.delta)));
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::Config(format!("alpha must be > 0, got {}", self.alpha)));
        }
        if !(1..=2).contains(&self.k) {
            return Err(Error::Config(format!("k must be 1 or 2, got {}", self.k)));
        }
        if !(self.rho > 0.0 && self.rho <= 1.0) {
            return Err(Error::Config(format!("rho must lie in (0, 1], got {}", self.rho)));
        }
        if self.n0 < 2 || !self.n0.is_multiple_of(2) {
            return Err(Error::Config(format!("n0 must be even and >= 2, got {}", self.n0)));
        }
        if self.levels < 2 {
            return Err(Error::Config(format!("levels must be >= 2 so that orders can be compared, got {}", self.levels)));
        }
        self.newton.validate()
    }

    fn quadrature(&self) -> QuadratureDegrees {
        self.quadrature.unwrap_or_else(|| QuadratureDegrees::default_for(self.k))
    }
}

/// One solved level.
#[derive(Clone, Debug, PartialEq)]
pub struct StudyLevel {
    pub errors: ErrorRecord,
    /// `None` on level 0.
    pub eoc: Option<EocRow>,
    pub diagnostics: LevelDiagnostics,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StudyReport {
    pub config: StudyConfig,
    pub levels: Vec<StudyLevel>,
    /// `ρ p'/2`.
    pub reference_rate: f64,
}

/// Runs the study, calling `progress` after each level.
pub fn run_convergence_study_with(config: &StudyConfig, mut progress: impl FnMut(&StudyLevel)) -> Result<StudyReport> {
    config.validate()?;
    let (exact, data) = make_manufactured(config.p, config.delta, config.rho, config.alpha, config.model)?;
    let quad = config.quadrature();
    let mut mesh = Arc::new(generate_square_mesh(config.n0)?);
    let mut prev: Option<(Discretization, DiscreteSolution)> = None;
    let mut levels: Vec<StudyLevel> = Vec::new();
    for level in 0..=config.levels {
        if level > 0 {
            mesh = Arc::new(red_refine(&mesh));
        }
        let disc = Discretization::new(mesh.clone(), config.k, quad)?;
        let initial = match (&prev, config.warm_start) {
            (Some((cd, cs)), true) => prolongate(cs, cd, &disc)?,
            _ => linear_initial_guess(&data, &disc, &config.newton).map_err(|e| at_level(e, level))?,
        };
        let outcome = newton_solve(&initial, &data, &disc, &config.newton).map_err(|e| at_level(e, level))?;
        let aux = reconstruct_auxiliary(&outcome.solution, &data, &disc)?;
        let mut errors = compute_errors(&outcome.solution, &aux, &exact, &disc)?;
        errors.level = level;
        errors.newton_iterations = outcome.log.iterations();
        let mut diag = diagnostics(&outcome.solution, &aux, &data, &disc)?;
        diag.final_residual = outcome.log.final_residual().unwrap_or(f64::NAN);
        let eoc = levels.last().map(|p| EocRow::between(&p.errors, &errors));
        let entry = StudyLevel { errors, eoc, diagnostics: diag };
        progress(&entry);
        levels.push(entry);
        prev = Some((disc, outcome.solution));
    }
    Ok(StudyReport { config: config.clone(), levels, reference_rate: exact.expected_rate() })
}

pub fn run_convergence_study(config: &StudyConfig) -> Result<StudyReport> {
    run_convergence_study_with(config, |_| {})
}

fn at_level(e: Error, level: usize) -> Error {
    match e {
        Error::NonConvergence { log, .. } => Error::NonConvergence { level: Some(level), log },
        Error::Solver(m) => Error::Solver(format!("level {level}: {m}")),
        other => other,
    }
}

/// Solution of the linear Stokes problem (`p = 2`, no convection) with the
/// same data, used to start Newton on a level without a coarser solution.
pub fn linear_initial_guess(data: &ProblemData, disc: &Discretization, opts: &NewtonOptions) -> Result<DiscreteSolution> {
    let mut linear = data.clone();
    linear.law = StressLaw::from_parts(2.0, 0.0)?;
    linear.model = Model::PStokes;
    let outcome = newton_solve(&DiscreteSolution::zeros(disc), &linear, disc, opts)?;
    Ok(outcome.solution)
}

/// Solves one level of the manufactured problem from the linear initial
/// guess, returning the mesh data for further processing.
pub fn solve_level(config: &StudyConfig, level: usize) -> Result<(Discretization, DiscreteSolution, ProblemData, ManufacturedSolution, crate::IterationLog)> {
    config.validate()?;
    let (exact, data) = make_manufactured(config.p, config.delta, config.rho, config.alpha, config.model)?;
    let mut mesh: Mesh = generate_square_mesh(config.n0)?;
    for _ in 0..level {
        mesh = red_refine(&mesh);
    }
    let disc = Discretization::new(Arc::new(mesh), config.k, config.quadrature())?;
    let initial = linear_initial_guess(&data, &disc, &config.newton).map_err(|e| at_level(e, level))?;
    let outcome = newton_solve(&initial, &data, &disc, &config.newton).map_err(|e| at_level(e, level))?;
    Ok((disc, outcome.solution, data, exact, outcome.log))
}

/// Outcome of the linear patch test.
#[derive(Clone, Debug, PartialEq)]
pub struct PatchTestReport {
    /// `‖F‖_∞` at the interpolant of the exact pair.
    pub interpolant_residual: f64,
    /// `‖F‖_∞` at the Newton solution.
    pub final_residual: f64,
    /// Largest coefficient difference between the solution and the interpolant.
    pub solution_error: f64,
    pub newton_iterations: usize,
}

/// Affine divergence-free velocity used by the patch test.
pub fn patch_velocity(x: [f64; 2]) -> [f64; 2] {
    [x[1] + 0.3 * x[0] + 0.1, -x[0] - 0.3 * x[1] + 0.2]
}

/// Linear zero-mean pressure used by the patch test.
pub fn patch_pressure(x: [f64; 2]) -> f64 {
    x[0] + 2.0 * x[1]
}

/// Linear Stokes (`p = 2`, `δ = 0`) with an affine velocity and a linear
/// pressure, both representable: the interpolant must solve the discrete
/// problem, and Newton from zero must find it in one step.
pub fn patch_test(n0: usize, level: usize) -> Result<PatchTestReport> {
    let law = StressLaw::from_parts(2.0, 0.0)?;
    let grad = Tensor2::new(0.3, 1.0, -1.0, -0.3);
    let data = ProblemData {
        law,
        alpha: 2.5,
        model: Model::PStokes,
        body_force: Arc::new(|_| [0.0, 0.0]),
        tensor_force: Arc::new(move |x| {
            let q = patch_pressure(x);
            law.stress(grad) - Tensor2::diag(q, q)
        }),
        divergence: Arc::new(|_| 0.0),
        boundary: Arc::new(patch_velocity),
        boundary_gradient: Arc::new(move |_| grad),
    };
    let mut mesh = generate_square_mesh(n0)?;
    for _ in 0..level {
        mesh = red_refine(&mesh);
    }
    let disc = Discretization::with_defaults(Arc::new(mesh), 1)?;
    let velocity = crate::femspace::l2_project(&disc.velocity, &disc.rule, |_, _, x, out| {
        out.copy_from_slice(&patch_velocity(x));
    })?;
    let nodes = disc.pressure.node_coordinates().expect("continuous space");
    let pressure = crate::femspace::Field::new(disc.pressure.clone(), nodes.iter().map(|&x| patch_pressure(x)).collect())?;
    let exact = DiscreteSolution { velocity, pressure, multiplier: 0.0 };
    let inf = |v: &[f64]| v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let interpolant_residual = inf(&crate::system::assemble_residual(&exact, &data, &disc)?);
    let outcome = newton_solve(&DiscreteSolution::zeros(&disc), &data, &disc, &NewtonOptions::default())?;
    let final_residual = inf(&crate::system::assemble_residual(&outcome.solution, &data, &disc)?);
    let diff: Vec<f64> = outcome.solution.to_vector().iter().zip(exact.to_vector()).map(|(a, b)| a - b).collect();
    Ok(PatchTestReport {
        interpolant_residual,
        final_residual,
        solution_error: inf(&diff),
        newton_iterations: outcome.log.iterations(),
    })
}
