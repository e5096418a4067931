use std::sync::Arc;

use ldgpflow::constitutive::StressLaw;
use ldgpflow::femspace::{l2_project, Discretization};
use ldgpflow::mesh::generate_square_mesh;
use ldgpflow::system::{newton_solve, reconstruct_auxiliary, DiscreteSolution, Model, NewtonOptions};
use ldgpflow::verification::{
    compute_errors, eoc, make_manufactured, radial_power_mean, run_convergence_study, EocRow, ErrorRecord, ManufacturedSolution,
    StudyConfig,
};
use ldgpflow::Error;

#[test]
fn exponents_for_p_22_and_rho_01() {
    let m = ManufacturedSolution::new(StressLaw::from_parts(2.2, 1e-4).unwrap(), 0.1).unwrap();
    assert!((m.beta + 9.0 / 11.0).abs() < 1e-15);
    assert!((m.gamma - (0.1 - 12.0 / 11.0)).abs() < 1e-15);
    assert!((m.expected_rate() - 0.05 * 11.0 / 6.0).abs() < 1e-15);
}

#[test]
fn rho_one_gives_a_rigid_rotation() {
    let m = ManufacturedSolution::new(StressLaw::from_parts(3.0, 0.0).unwrap(), 1.0).unwrap();
    assert_eq!(m.beta, 0.0);
    for x in [[0.3, -0.2], [-0.9, 0.7]] {
        assert_eq!(m.velocity(x), [x[1], -x[0]]);
        assert!(m.sym_gradient(x).norm() < 1e-15);
    }
    assert!(ManufacturedSolution::new(StressLaw::from_parts(3.0, 0.0).unwrap(), 0.0).is_err());
    assert!(ManufacturedSolution::new(StressLaw::from_parts(3.0, 0.0).unwrap(), 1.5).is_err());
}

#[test]
fn velocity_is_divergence_free_and_gradient_matches_differences() {
    let m = ManufacturedSolution::new(StressLaw::from_parts(2.5, 1e-4).unwrap(), 0.1).unwrap();
    let h = 1e-6;
    for x in [[0.31, -0.22], [-0.7, 0.05], [0.01, 0.02], [-0.5, -0.5]] {
        let mut fd = [[0.0; 2]; 2];
        for b in 0..2 {
            let mut xp = x;
            let mut xm = x;
            xp[b] += h;
            xm[b] -= h;
            let (vp, vm) = (m.velocity(xp), m.velocity(xm));
            for a in 0..2 {
                fd[a][b] = (vp[a] - vm[a]) / (2.0 * h);
            }
        }
        let g = m.gradient(x).to_array();
        let scale = g.iter().fold(1.0f64, |s, v| s.max(v.abs()));
        for (k, v) in [fd[0][0], fd[0][1], fd[1][0], fd[1][1]].iter().enumerate() {
            assert!((g[k] - v).abs() <= 1e-6 * scale, "{x:?}");
        }
        assert!((fd[0][0] + fd[1][1]).abs() <= 1e-6 * scale);
        assert!(m.gradient(x).trace().abs() <= 1e-12 * scale);
    }
}

#[test]
fn radial_mean_against_closed_forms_and_brute_force() {
    assert!((radial_power_mean(0.0) - 1.0).abs() < 1e-13);
    assert!((radial_power_mean(2.0) - 2.0 / 3.0).abs() < 1e-13);
    assert!((radial_power_mean(4.0) - 28.0 / 45.0).abs() < 1e-13);
    // Midpoint rule on a fine grid for a non-polynomial power.
    let n = 2000;
    let step = 2.0 / n as f64;
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            let x = -1.0 + (i as f64 + 0.5) * step;
            let y = -1.0 + (j as f64 + 0.5) * step;
            s += x.hypot(y).powf(0.7);
        }
    }
    let brute = s * step * step / 4.0;
    assert!((radial_power_mean(0.7) - brute).abs() < 1e-6);
}

#[test]
fn pressure_has_zero_mean() {
    // ρ = 1, p = 2.5: γ = −0.2, a mild singularity for the midpoint rule.
    let m = ManufacturedSolution::new(StressLaw::from_parts(2.5, 1e-4).unwrap(), 1.0).unwrap();
    let n = 1000;
    let step = 2.0 / n as f64;
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            s += m.pressure([-1.0 + (i as f64 + 0.5) * step, -1.0 + (j as f64 + 0.5) * step]);
        }
    }
    assert!((s * step * step).abs() < 1e-4, "{}", s * step * step);
}

#[test]
fn eoc_of_exact_power_laws() {
    for r in [0.085, 0.5, 2.0] {
        let c = 3.7;
        let (h0, h1) = (0.25f64, 0.125f64);
        let got = eoc(c * h0.powf(r), c * h1.powf(r), h0, h1).unwrap();
        assert!((got - r).abs() < 1e-12);
    }
    assert_eq!(eoc(0.0, 1.0, 0.5, 0.25), None);
    assert_eq!(eoc(1.0, 1.0, 0.5, 0.5), None);
    assert_eq!(eoc(f64::NAN, 1.0, 0.5, 0.25), None);
    let rec = |h: f64, e: f64| ErrorRecord { level: 0, h, ndof_v: 0, ndof_q: 0, e_l: e, e_s: e, e_jump: 2.0 * e, e_q: e, newton_iterations: 0 };
    let row = EocRow::between(&rec(0.5, 1.0), &rec(0.25, 0.5));
    assert!((row.l.unwrap() - 1.0).abs() < 1e-14 && (row.jump.unwrap() - 1.0).abs() < 1e-14);
}

#[test]
fn representable_exact_solution_has_vanishing_errors() {
    // p = 2, ρ = 1: a rigid rotation with zero pressure.
    let (exact, data) = make_manufactured(2.0, 1e-4, 1.0, 2.5, Model::PStokes).unwrap();
    let d = Discretization::with_defaults(Arc::new(generate_square_mesh(4).unwrap()), 1).unwrap();
    let velocity = l2_project(&d.velocity, &d.rule, |_, _, x, out| out.copy_from_slice(&exact.velocity(x))).unwrap();
    let sol = DiscreteSolution { velocity, ..DiscreteSolution::zeros(&d) };
    let aux = reconstruct_auxiliary(&sol, &data, &d).unwrap();
    let e = compute_errors(&sol, &aux, &exact, &d).unwrap();
    for v in [e.e_l, e.e_s, e.e_jump, e.e_q] {
        assert!(v <= 1e-12, "{e:?}");
    }
    let solved = newton_solve(&DiscreteSolution::zeros(&d), &data, &d, &NewtonOptions::default()).unwrap();
    assert_eq!(solved.log.iterations(), 1);
    let diff = solved.solution.to_vector().iter().zip(sol.to_vector()).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    assert!(diff <= 1e-10);
}

#[test]
fn small_study_has_the_expected_shape() {
    let cfg = StudyConfig { n0: 2, levels: 2, ..Default::default() };
    let rep = run_convergence_study(&cfg).unwrap();
    assert_eq!(rep.levels.len(), 3);
    assert!(rep.levels[0].eoc.is_none());
    assert!(rep.levels[1..].iter().all(|l| l.eoc.is_some()));
    assert!((rep.reference_rate - 0.1 * 2.5 / 1.5 / 2.0).abs() < 1e-15);
    for (i, l) in rep.levels.iter().enumerate() {
        assert_eq!(l.errors.level, i);
        assert_eq!(l.errors.ndof_v, 6 * 8 * 4usize.pow(i as u32));
        assert!(l.errors.newton_iterations <= 25);
        assert!(l.diagnostics.divergence_residual <= 1e-8);
        assert!(l.diagnostics.pressure_mean.abs() <= 1e-10);
    }
    for w in rep.levels.windows(2) {
        assert!((w[1].errors.h - 0.5 * w[0].errors.h).abs() < 1e-15);
    }
}

#[test]
fn study_configuration_is_validated() {
    let bad = [
        StudyConfig { p: 1.0, ..Default::default() },
        StudyConfig { levels: 0, ..Default::default() },
        StudyConfig { levels: 1, ..Default::default() },
        StudyConfig { n0: 3, ..Default::default() },
        StudyConfig { rho: 0.0, ..Default::default() },
        StudyConfig { k: 3, ..Default::default() },
        StudyConfig { alpha: -1.0, ..Default::default() },
    ];
    for cfg in bad {
        assert!(matches!(run_convergence_study(&cfg), Err(Error::Config(_))), "{cfg:?}");
    }
}

#[test]
fn nonconvergence_reports_the_level() {
    let mut cfg = StudyConfig { n0: 2, levels: 2, ..Default::default() };
    cfg.newton.max_iter = 1;
    match run_convergence_study(&cfg) {
        Err(Error::NonConvergence { level: Some(0), log }) => assert_eq!(log.iterations(), 1),
        other => panic!("unexpected {other:?}"),
    }
}
