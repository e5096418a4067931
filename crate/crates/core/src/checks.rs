//! Sampled property suites for the stress law and the DG operators.
//!
//! Both suites are deterministic given a seed and report the worst value
//! observed for every property; thresholds are left to the caller.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::constitutive::{StressLaw, Tensor2};
use crate::dgops::{
    dg_gradient, dg_norm, face_jump, jump_seminorm, lifting, lp_norm, sym_dg_norm, tensor_at_nodes, volume_point,
    PiecewiseVector,
};
use crate::error::Result;
use crate::femspace::{l2_project, project_field, Discretization, Field};
use crate::mesh::{generate_square_mesh, red_refine};
use crate::nfunctions::NFunctionParams;

pub const SUITE_EXPONENTS: [f64; 5] = [1.5, 2.2, 2.5, 3.0, 3.5];
pub const SUITE_DELTAS: [f64; 3] = [0.0, 1e-4, 1.0];

#[derive(Clone, Debug, PartialEq)]
pub struct ConstitutiveReport {
    /// Smallest `(S(A) − S(B)) : (A − B)` seen.
    pub min_monotonicity: f64,
    pub monotonicity_pairs: usize,
    /// Largest relative gap between the Jacobian and central differences.
    pub max_jacobian_error: f64,
    pub jacobian_cases: usize,
    /// Largest relative error of `(φ*)'(φ'(t)) = t`.
    pub max_roundtrip_error: f64,
}

fn random_tensor(rng: &mut ChaCha8Rng) -> Tensor2 {
    let scale = 10f64.powf(rng.gen_range(-3.0..1.0));
    Tensor2::new(
        scale * rng.gen_range(-1.0..1.0),
        scale * rng.gen_range(-1.0..1.0),
        scale * rng.gen_range(-1.0..1.0),
        scale * rng.gen_range(-1.0..1.0),
    )
}

/// Monotonicity over `pairs` random pairs for every `(p, δ)` of the suite
/// grid, Jacobian against central differences for `jacobian_cases` random
/// `(p, δ, A, B)`, and the conjugate round trip on a log grid.
pub fn constitutive_suite(seed: u64, pairs: usize, jacobian_cases: usize) -> Result<ConstitutiveReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut min_mono = f64::INFINITY;
    let mut max_rt: f64 = 0.0;
    for &p in &SUITE_EXPONENTS {
        for &delta in &SUITE_DELTAS {
            let law = StressLaw::from_parts(p, delta)?;
            for _ in 0..pairs {
                let (a, b) = (random_tensor(&mut rng), random_tensor(&mut rng));
                min_mono = min_mono.min((law.stress(a) - law.stress(b)).dot(a - b));
            }
            let params = NFunctionParams::new(p, delta)?;
            for e in -40..=40 {
                let t = 10f64.powf(e as f64 / 10.0);
                let back = params.conjugate_prime(params.phi_prime(t)?)?;
                max_rt = max_rt.max((back - t).abs() / t);
            }
        }
    }
    let mut max_jac: f64 = 0.0;
    for _ in 0..jacobian_cases {
        let p = SUITE_EXPONENTS[rng.gen_range(0..SUITE_EXPONENTS.len())];
        let delta = SUITE_DELTAS[rng.gen_range(0..SUITE_DELTAS.len())];
        let law = StressLaw::from_parts(p, delta)?;
        let (a, b) = (random_tensor(&mut rng), random_tensor(&mut rng));
        let h = 1e-5 * a.sym().norm().max(1e-3 * a.norm()) / b.norm();
        let fd = (law.stress(a + b * h) - law.stress(a - b * h)) * (0.5 / h);
        let jac = law.stress_jacobian(a, b);
        let scale = jac.norm().max(fd.norm()).max(f64::MIN_POSITIVE);
        max_jac = max_jac.max((jac - fd).norm() / scale);
    }
    Ok(ConstitutiveReport {
        min_monotonicity: min_mono,
        monotonicity_pairs: pairs * SUITE_EXPONENTS.len() * SUITE_DELTAS.len(),
        max_jacobian_error: max_jac,
        jacobian_cases,
        max_roundtrip_error: max_rt,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct OperatorReport {
    /// Largest relative defect of `(R w, X) = ⟨[[w ⊗ n]], {X}⟩`.
    pub lifting_adjointness: f64,
    pub lifting_samples: usize,
    /// Largest `|G v − ∇v|` for conforming `v` with zero trace, relative to `max |∇v|`.
    pub gradient_consistency: f64,
    /// Largest relative defect of `(Div w, z) = −(w, ∇z)` for continuous `z`.
    pub divergence_identity: f64,
    /// Sampled sup of `‖w‖_{∇,p,h} / ‖w‖_{D,p,h}` per level.
    pub korn_ratios: Vec<f64>,
    /// Sampled sup of `‖w‖_{∇,p,h} / (‖G w‖_p + |w|_{Γ,p})` per level.
    pub norm_equivalence_ratios: Vec<f64>,
    /// `max |Π Π f − Π f|`, relative.
    pub projection_idempotence: f64,
    /// `|(Π f, g) − (f, Π g)|`, relative.
    pub projection_symmetry: f64,
}

fn random_field(disc: &Discretization, rng: &mut ChaCha8Rng) -> Field {
    let c = (0..disc.velocity.ndofs()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    Field::new(disc.velocity.clone(), c).expect("sized to the space")
}

/// Runs the operator properties on the uniform meshes of levels
/// `0..levels` over an `n0 × n0` base grid, with `samples` random fields
/// per level and integrability exponent `p` for the norm ratios.
pub fn operator_suite(seed: u64, n0: usize, levels: usize, samples: usize, p: f64) -> Result<OperatorReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut mesh = generate_square_mesh(n0)?;
    let mut report = OperatorReport {
        lifting_adjointness: 0.0,
        lifting_samples: 0,
        gradient_consistency: 0.0,
        divergence_identity: 0.0,
        korn_ratios: Vec::new(),
        norm_equivalence_ratios: Vec::new(),
        projection_idempotence: 0.0,
        projection_symmetry: 0.0,
    };
    for level in 0..levels {
        if level > 0 {
            mesh = red_refine(&mesh);
        }
        let disc = Discretization::with_defaults(Arc::new(mesh.clone()), 1)?;
        let mut korn: f64 = 0.0;
        let mut equiv: f64 = 0.0;
        for s in 0..samples {
            let w = random_field(&disc, &mut rng);
            let x: Vec<f64> = (0..disc.tensor.ndofs()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let x = Field::new(disc.tensor.clone(), x)?;
            report.lifting_adjointness = report.lifting_adjointness.max(adjointness_defect(&disc, &w, &x)?);
            report.lifting_samples += 1;
            let z: Vec<f64> = (0..disc.pressure.ndofs()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let z = Field::new(disc.pressure.clone(), z)?;
            report.divergence_identity = report.divergence_identity.max(divergence_defect(&disc, &w, &z)?);
            // Every other sample is a perturbed rigid rotation, the hard case for Korn.
            let w = if s % 2 == 1 { perturbed_rotation(&disc, &mut rng)? } else { w };
            let full = dg_norm(&disc, &w, p)?;
            korn = korn.max(full / sym_dg_norm(&disc, &w, p)?);
            let g = lp_norm(&disc, &dg_gradient(&disc, &w)?, p) + jump_seminorm(&disc, &w, p)?;
            equiv = equiv.max(full / g);
        }
        report.korn_ratios.push(korn);
        report.norm_equivalence_ratios.push(equiv);
        report.gradient_consistency = report.gradient_consistency.max(gradient_defect(&disc, &mut rng)?);
        let (idem, sym) = projection_defects(&disc)?;
        report.projection_idempotence = report.projection_idempotence.max(idem);
        report.projection_symmetry = report.projection_symmetry.max(sym);
    }
    Ok(report)
}

fn tensor_on_face(disc: &Discretization, x: &Field, cell: usize, t: usize, q: usize) -> Tensor2 {
    let nb = disc.nb();
    let phi = &disc.face_phi[t][q * nb..(q + 1) * nb];
    let c = x.coeffs();
    let base = cell * 4 * nb;
    let mut a = [0.0; 4];
    for (ab, v) in a.iter_mut().enumerate() {
        *v = (0..nb).map(|i| c[base + ab * nb + i] * phi[i]).sum();
    }
    Tensor2::from_array(a)
}

fn adjointness_defect(disc: &Discretization, w: &Field, x: &Field) -> Result<f64> {
    let r = tensor_at_nodes(disc, &lifting(disc, w)?);
    let xn = tensor_at_nodes(disc, x);
    let (mut lhs, mut mag) = (0.0, 0.0);
    for cell in 0..disc.num_cells() {
        for (q, wq) in disc.rule.weights.iter().enumerate() {
            let v = wq * disc.geometry[cell].det * r.get(cell, q).dot(xn.get(cell, q));
            lhs += v;
            mag += v.abs();
        }
    }
    let mut rhs = 0.0;
    for (f, face) in disc.faces.faces.iter().enumerate() {
        for (q, wq) in disc.face_rule.weights.iter().enumerate() {
            let (c0, t0) = disc.face_side(f, 0).expect("minus side");
            let mut avg = tensor_on_face(disc, x, c0, t0, q);
            if let Some((c1, t1)) = disc.face_side(f, 1) {
                avg = (avg + tensor_on_face(disc, x, c1, t1, q)) * 0.5;
            }
            let v = wq * face.length * face_jump(disc, w, f, q).dot(avg);
            rhs += v;
            mag += v.abs();
        }
    }
    Ok((lhs - rhs).abs() / mag.max(f64::MIN_POSITIVE))
}

fn divergence_defect(disc: &Discretization, w: &Field, z: &Field) -> Result<f64> {
    let g = dg_gradient(disc, w)?;
    let (mut lhs, mut rhs, mut mag) = (0.0, 0.0, 0.0);
    for cell in 0..disc.num_cells() {
        let det = disc.geometry[cell].det;
        for (q, wq) in disc.rule.weights.iter().enumerate() {
            let xi = disc.rule.points[q];
            let zq = z.evaluate(cell, xi)?[0];
            let dz = z.evaluate_gradient(cell, xi)?[0];
            let wv = w.value(disc, volume_point(disc, cell, q));
            let a = wq * det * g.get(cell, q).trace() * zq;
            let b = -wq * det * (wv[0] * dz[0] + wv[1] * dz[1]);
            lhs += a;
            rhs += b;
            mag += a.abs() + b.abs();
        }
    }
    Ok((lhs - rhs).abs() / mag.max(f64::MIN_POSITIVE))
}

fn perturbed_rotation(disc: &Discretization, rng: &mut ChaCha8Rng) -> Result<Field> {
    let eps = 1e-3;
    let mut w = l2_project(&disc.velocity, &disc.rule, |_, _, x, out| {
        out[0] = x[1];
        out[1] = -x[0];
    })?;
    for c in w.coeffs_mut() {
        *c += eps * rng.gen_range(-1.0..1.0);
    }
    Ok(w)
}

fn gradient_defect(disc: &Discretization, rng: &mut ChaCha8Rng) -> Result<f64> {
    // Continuous piecewise linear components vanishing on the boundary.
    let coords = disc.pressure.node_coordinates().expect("continuous space");
    let comps: Vec<Field> = (0..2)
        .map(|_| {
            let c = coords
                .iter()
                .map(|x| if x[0].abs() == 1.0 || x[1].abs() == 1.0 { 0.0 } else { rng.gen_range(-1.0..1.0) })
                .collect();
            Field::new(disc.pressure.clone(), c)
        })
        .collect::<Result<_>>()?;
    let v = l2_project(&disc.velocity, &disc.rule, |cell, xi, _, out| {
        out[0] = comps[0].evaluate(cell, xi).expect("in range")[0];
        out[1] = comps[1].evaluate(cell, xi).expect("in range")[0];
    })?;
    let g = dg_gradient(disc, &v)?;
    let (mut err, mut mag): (f64, f64) = (0.0, 0.0);
    for cell in 0..disc.num_cells() {
        for q in 0..disc.rule.len() {
            let exact = v.gradient(disc, volume_point(disc, cell, q));
            err = err.max((g.get(cell, q) - exact).norm());
            mag = mag.max(exact.norm());
        }
    }
    Ok(err / mag.max(f64::MIN_POSITIVE))
}

fn projection_defects(disc: &Discretization) -> Result<(f64, f64)> {
    let f = |x: [f64; 2]| [(3.0 * x[0]).sin() * (2.0 * x[1]).cos() + x[0].powi(3), (x[0] * x[1]).exp()];
    let g = |x: [f64; 2]| [x[1].powi(4) - x[0], (5.0 * x[1]).cos()];
    let pf = l2_project(&disc.velocity, &disc.rule, |_, _, x, out| out.copy_from_slice(&f(x)))?;
    let ppf = project_field(&pf, &disc.velocity, &disc.rule)?;
    let scale = pf.coeffs().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let idem = pf.coeffs().iter().zip(ppf.coeffs()).fold(0.0f64, |m, (a, b)| m.max((a - b).abs())) / scale;
    let pg = l2_project(&disc.velocity, &disc.rule, |_, _, x, out| out.copy_from_slice(&g(x)))?;
    let (mut a, mut b, mut mag) = (0.0, 0.0, 0.0);
    for cell in 0..disc.num_cells() {
        for q in 0..disc.rule.len() {
            let at = volume_point(disc, cell, q);
            let w = disc.rule.weights[q] * disc.geometry[cell].det;
            let (fx, gx) = (f(at.x), g(at.x));
            let (pfx, pgx) = (pf.value(disc, at), pg.value(disc, at));
            let ta = w * (pfx[0] * gx[0] + pfx[1] * gx[1]);
            let tb = w * (fx[0] * pgx[0] + fx[1] * pgx[1]);
            a += ta;
            b += tb;
            mag += ta.abs() + tb.abs();
        }
    }
    Ok((idem, (a - b).abs() / mag))
}
