use std::sync::Arc;

use ldgpflow::constitutive::{StressLaw, Tensor2};
use ldgpflow::femspace::quadrature::quadrature_rule;
use ldgpflow::femspace::{l2_project, Discretization};
use ldgpflow::mesh::{build_faces, generate_square_mesh, mesh_metrics, red_refine, Mesh};
use ldgpflow::nfunctions::NFunctionParams;
use proptest::prelude::*;

fn tensor() -> impl Strategy<Value = Tensor2> {
    (prop::array::uniform4(-1.0f64..1.0), -3.0f64..1.0).prop_map(|(a, e)| Tensor2::from_array(a) * 10f64.powf(e))
}

fn params() -> impl Strategy<Value = (f64, f64)> {
    (1.3f64..4.0, prop_oneof![Just(0.0), 1e-6f64..1.0])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn young_inequality((p, delta) in params(), s in 0.0f64..10.0, t in 0.0f64..10.0) {
        let f = NFunctionParams::new(p, delta).unwrap();
        let lhs = f.phi_eval(s).unwrap() + f.conjugate_eval(t).unwrap();
        prop_assert!(lhs >= s * t - 1e-10 * (1.0 + s * t));
    }

    #[test]
    fn young_equality_at_the_derivative((p, delta) in params(), s in 0.0f64..10.0) {
        let f = NFunctionParams::new(p, delta).unwrap();
        let t = f.phi_prime(s).unwrap();
        let lhs = f.phi_eval(s).unwrap() + f.conjugate_eval(t).unwrap();
        prop_assert!((lhs - s * t).abs() <= 1e-9 * (1.0 + s * t));
    }

    #[test]
    fn derivative_inverse_round_trip((p, delta) in params(), s in 0.0f64..100.0) {
        let f = NFunctionParams::new(p, delta).unwrap();
        let back = f.conjugate_prime(f.phi_prime(s).unwrap()).unwrap();
        prop_assert!((back - s).abs() <= 1e-10 * (1.0 + s));
    }

    #[test]
    fn phi_matches_quadrature_of_its_derivative((p, delta) in params(), t in 0.0f64..5.0) {
        let f = NFunctionParams::new(p, delta).unwrap();
        // Composite Simpson after s = t u⁴, which smooths the power behaviour at 0.
        let n = 2000;
        let h = 1.0 / n as f64;
        let g = |u: f64| 4.0 * t * u.powi(3) * f.phi_prime(t * u.powi(4)).unwrap();
        let mut s = g(0.0) + g(1.0);
        for i in 1..n {
            s += if i % 2 == 1 { 4.0 } else { 2.0 } * g(i as f64 * h);
        }
        let simpson = s * h / 3.0;
        prop_assert!((f.phi_eval(t).unwrap() - simpson).abs() <= 1e-7 * (1.0 + simpson));
    }

    #[test]
    fn shifted_function_is_a_regularized_base((p, delta) in params(), a in 0.0f64..2.0, t in 0.0f64..5.0) {
        let base = NFunctionParams::new(p, delta).unwrap();
        let shifted = base.shifted(a).unwrap();
        let direct = NFunctionParams::new(p, delta + a).unwrap();
        prop_assert_eq!(shifted.phi_eval(t).unwrap(), direct.phi_eval(t).unwrap());
    }

    #[test]
    fn stress_is_monotone((p, delta) in params(), a in tensor(), b in tensor()) {
        let law = StressLaw::from_parts(p, delta).unwrap();
        let m = (law.stress(a) - law.stress(b)).dot(a - b);
        prop_assert!(m >= -1e-12 * (1.0 + (a - b).norm()));
    }

    #[test]
    fn stress_sees_only_the_symmetric_part((p, delta) in params(), a in tensor(), w in -1.0f64..1.0) {
        let law = StressLaw::from_parts(p, delta).unwrap();
        let skew = Tensor2::new(0.0, w, -w, 0.0);
        let s = law.stress(a);
        prop_assert!((s - law.stress(a + skew)).norm() <= 1e-13 * (1.0 + s.norm()));
        prop_assert!((s + law.stress(-a)).norm() <= 1e-14 * (1.0 + s.norm()));
        prop_assert!((s - s.transpose()).norm() == 0.0);
    }

    #[test]
    fn stress_is_the_gradient_of_the_potential((p, delta) in params(), a in tensor(), b in tensor()) {
        // d/dε φ(|(A + εB)^sym|) = S(A) : B.
        let f = NFunctionParams::new(p, delta).unwrap();
        let law = StressLaw::from_parts(p, delta).unwrap();
        let eps = 1e-6 * (1e-3 + a.norm()) / (1e-12 + b.norm());
        let pot = |t: f64| f.phi_eval((a + b * t).sym().norm()).unwrap();
        let fd = (pot(eps) - pot(-eps)) / (2.0 * eps);
        let exact = law.stress(a).dot(b);
        prop_assert!((fd - exact).abs() <= 1e-5 * (1e-12 + law.stress(a).norm() * b.norm()));
    }

    #[test]
    fn natural_transform_squares_to_the_stress_power((p, delta) in params(), a in tensor()) {
        // |F(A)|² = S(A) : A.
        let law = StressLaw::from_parts(p, delta).unwrap();
        let f = law.natural_transform_f(a).norm().powi(2);
        let s = law.stress(a).dot(a);
        prop_assert!((f - s).abs() <= 1e-12 * (1e-300 + s));
    }

    #[test]
    fn refinement_preserves_area_and_halves_size(n in prop::sample::select(vec![2usize, 4, 6])) {
        let m = generate_square_mesh(n).unwrap();
        let r = red_refine(&m);
        let area = |m: &Mesh| (0..m.num_cells()).map(|c| m.cell_area(c)).sum::<f64>();
        prop_assert!((area(&m) - 4.0).abs() < 1e-13);
        prop_assert!((area(&r) - 4.0).abs() < 1e-13);
        prop_assert_eq!(r.num_cells(), 4 * m.num_cells());
        let (hm, hr) = (mesh_metrics(&m).unwrap(), mesh_metrics(&r).unwrap());
        prop_assert!((hr.h - 0.5 * hm.h).abs() < 1e-14);
        prop_assert!((hr.chunkiness - hm.chunkiness).abs() < 1e-10);
        let parents = r.parents().unwrap();
        for (c, &par) in parents.iter().enumerate() {
            prop_assert!((r.cell_area(c) - 0.25 * m.cell_area(par)).abs() < 1e-15);
        }
    }

    #[test]
    fn cells_are_closed_and_faces_consistent(n in prop::sample::select(vec![2usize, 4]), levels in 0usize..3) {
        let mut m = generate_square_mesh(n).unwrap();
        for _ in 0..levels {
            m = red_refine(&m);
        }
        let faces = build_faces(&m).unwrap();
        let mut flux = vec![[0.0f64; 2]; m.num_cells()];
        let mut boundary_length = 0.0;
        for f in &faces.faces {
            flux[f.minus][0] += f.length * f.normal[0];
            flux[f.minus][1] += f.length * f.normal[1];
            if f.is_boundary() {
                boundary_length += f.length;
            } else {
                flux[f.plus][0] -= f.length * f.normal[0];
                flux[f.plus][1] -= f.length * f.normal[1];
            }
            prop_assert!((f.normal[0].hypot(f.normal[1]) - 1.0).abs() < 1e-14);
        }
        prop_assert!(flux.iter().all(|v| v[0].abs() < 1e-14 && v[1].abs() < 1e-14));
        prop_assert!((boundary_length - 8.0).abs() < 1e-12);
        // Euler: V − E + F = 1 for a disk.
        prop_assert_eq!(m.num_vertices() + m.num_cells(), faces.faces.len() + 1);
    }

    #[test]
    fn triangle_rules_integrate_monomials(deg in 0usize..12, a in 0usize..12) {
        let a = a.min(deg);
        let b = deg - a;
        let rule = quadrature_rule(deg).unwrap();
        let got: f64 = rule.points.iter().zip(&rule.weights).map(|(x, w)| w * x[0].powi(a as i32) * x[1].powi(b as i32)).sum();
        let fact = |n: usize| (1..=n).map(|k| k as f64).product::<f64>();
        let exact = fact(a) * fact(b) / fact(a + b + 2);
        prop_assert!((got - exact).abs() <= 1e-14 * (1.0 + exact) + 1e-15);
    }

    #[test]
    fn projection_reproduces_affine_fields(c in prop::array::uniform6(-2.0f64..2.0)) {
        let d = Discretization::with_defaults(Arc::new(generate_square_mesh(2).unwrap()), 1).unwrap();
        let f = move |x: [f64; 2]| [c[0] + c[1] * x[0] + c[2] * x[1], c[3] + c[4] * x[0] + c[5] * x[1]];
        let proj = l2_project(&d.velocity, &d.rule, |_, _, x, out| out.copy_from_slice(&f(x))).unwrap();
        for cell in 0..d.num_cells() {
            let xi = [0.3, 0.25];
            let v = proj.evaluate(cell, xi).unwrap();
            let e = f(d.geometry[cell].map(xi));
            prop_assert!((v[0] - e[0]).abs() < 1e-12 && (v[1] - e[1]).abs() < 1e-12);
        }
    }
}

#[test]
fn mesh_file_round_trip() {
    let m = red_refine(&generate_square_mesh(2).unwrap());
    let mut buf = Vec::new();
    m.write_to(&mut buf).unwrap();
    let back = Mesh::read_from(buf.as_slice()).unwrap();
    assert_eq!(back.vertices(), m.vertices());
    assert_eq!(back.cells(), m.cells());
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("mesh.txt");
    m.write_file(&path).unwrap();
    let from_disk = Mesh::read_file(&path).unwrap();
    assert_eq!(from_disk.cells(), m.cells());
    assert!(Mesh::read_file(dir.path().join("missing.txt")).is_err());
}

#[test]
fn square_mesh_is_mirror_symmetric_with_one_boundary_face_per_cell() {
    for n0 in [2, 4, 6, 8] {
        let m = generate_square_mesh(n0).unwrap();
        let faces = build_faces(&m).unwrap();
        let mut boundary = vec![0; m.num_cells()];
        for f in faces.faces.iter().filter(|f| f.is_boundary()) {
            boundary[f.minus] += 1;
        }
        assert!(boundary.iter().all(|&b| b <= 1), "n0={n0}");

        let key = |c: &[usize; 3], flip: [f64; 2]| {
            let mut pts: Vec<(i64, i64)> = c
                .iter()
                .map(|&v| {
                    let x = m.vertices()[v];
                    ((flip[0] * x[0] * 1e6).round() as i64, (flip[1] * x[1] * 1e6).round() as i64)
                })
                .collect();
            pts.sort();
            pts
        };
        let mut cells: Vec<_> = m.cells().iter().map(|c| key(c, [1.0, 1.0])).collect();
        cells.sort();
        for flip in [[-1.0, 1.0], [1.0, -1.0]] {
            let mut mirrored: Vec<_> = m.cells().iter().map(|c| key(c, flip)).collect();
            mirrored.sort();
            assert_eq!(mirrored, cells, "n0={n0}");
        }
    }
}
