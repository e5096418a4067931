use std::sync::Arc;

use ldgpflow::femspace::{Discretization, Field};
use ldgpflow::mesh::generate_square_mesh;
use ldgpflow::system::{AuxiliaryFields, DiscreteSolution, Model};
use ldgpflow::verification::{EocRow, ErrorRecord, LevelDiagnostics, StudyConfig, StudyLevel, StudyReport};
use ldgpflow_cli::output::{sci, vtk_string, write_atomic, TABLE_HEADER};
use ldgpflow_cli::Table;

fn level(level: usize, e: f64, eoc: Option<f64>) -> StudyLevel {
    StudyLevel {
        errors: ErrorRecord {
            level,
            h: std::f64::consts::FRAC_1_SQRT_2 / 2f64.powi(level as i32),
            ndof_v: 192 * 4usize.pow(level as u32),
            ndof_q: 25,
            e_l: e,
            e_s: 1.1 * e,
            e_jump: 0.4 * e,
            e_q: 2.0 * e,
            newton_iterations: 4 + level,
        },
        eoc: eoc.map(|r| EocRow { l: Some(r), s: Some(r + 0.001), jump: None, q: Some(r - 0.002) }),
        diagnostics: LevelDiagnostics {
            divergence_residual: 0.0,
            pressure_mean: 0.0,
            velocity_dg_norm: 1.0,
            velocity_dg_norm_zero_trace: 1.0,
            pressure_norm: 1.0,
            final_residual: 1e-12,
        },
    }
}

fn report(p: f64) -> StudyReport {
    StudyReport {
        config: StudyConfig { p, model: Model::PNavierStokes, ..Default::default() },
        levels: vec![level(0, 1.152331234, None), level(1, 1.09543321, Some(0.0730520342))],
        reference_rate: 0.5 * 0.1 * p / (p - 1.0),
    }
}

#[test]
fn two_levels_give_two_data_rows_and_a_reference_row() {
    let csv = Table::from_report(&report(3.0)).to_csv();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 4);
    assert_eq!(lines[0], TABLE_HEADER);
    assert_eq!(lines[3], "ref,,,,,,0.0750");
    assert_eq!(lines[1], "0,7.07107e-01,192,25,1.15233e+00,,1.26756e+00,,4.60932e-01,,2.30466e+00,,4");
    assert!(lines[2].starts_with("1,3.53553e-01,768,25,1.09543e+00,7.30520e-02,"));
}

#[test]
fn table_round_trips_and_is_deterministic() {
    let rep = report(2.5);
    let t = Table::from_report(&rep);
    let csv = t.to_csv();
    assert_eq!(csv, Table::from_report(&rep).to_csv());
    let back = Table::parse_csv(&csv).unwrap();
    assert_eq!(back.to_csv(), csv);
    assert_eq!(back.rows.len(), 2);
    for (a, b) in back.rows.iter().zip(&t.rows) {
        assert_eq!((a.level, a.ndof_v, a.ndof_q, a.newton_iters), (b.level, b.ndof_v, b.ndof_q, b.newton_iters));
        for (x, y) in [(a.h, b.h), (a.e_l, b.e_l), (a.e_s, b.e_s), (a.e_jump, b.e_jump), (a.e_q, b.e_q)] {
            assert!((x - y).abs() <= 5e-6 * y.abs());
        }
        assert_eq!(a.eoc_jump, None);
        assert_eq!(a.eoc_l.is_some(), b.eoc_l.is_some());
    }
    assert!((back.reference_rate - t.reference_rate).abs() < 5e-5);
}

#[test]
fn malformed_tables_are_rejected() {
    assert!(Table::parse_csv("level,h\n").is_err());
    let good = Table::from_report(&report(2.5)).to_csv();
    assert!(Table::parse_csv(good.trim_end().rsplit_once('\n').unwrap().0).is_err());
    assert!(Table::parse_csv(&good.replace("192", "x")).is_err());
    assert!(Table::parse_csv(&format!("{good}0,1,2,3,4,5,6,7,8,9,10,11,12\n")).is_err());
}

#[test]
fn scientific_format_has_six_significant_digits() {
    assert_eq!(sci(1.0), "1.00000e+00");
    assert_eq!(sci(0.000123456789), "1.23457e-04");
    assert_eq!(sci(-98765432.0), "-9.87654e+07");
    assert_eq!(sci(0.0), "0.00000e+00");
    assert_eq!(sci(1e-123), "1.00000e-123");
}

fn constant_fields(d: &Discretization, v: [f64; 2], q: f64) -> (DiscreteSolution, AuxiliaryFields) {
    let velocity = ldgpflow::femspace::l2_project(&d.velocity, &d.rule, |_, _, _, out| out.copy_from_slice(&v)).unwrap();
    let pressure = Field::new(d.pressure.clone(), vec![q; d.pressure.ndofs()]).unwrap();
    let zero = Field::zeros(d.tensor.clone());
    (
        DiscreteSolution { velocity, pressure, multiplier: 0.0 },
        AuxiliaryFields { l_h: zero.clone(), s_h: zero.clone(), k_h: zero },
    )
}

#[test]
fn vtk_layout_for_an_eight_cell_mesh() {
    let d = Discretization::with_defaults(Arc::new(generate_square_mesh(2).unwrap()), 1).unwrap();
    let (sol, aux) = constant_fields(&d, [0.5, -2.0], 3.0);
    let text = vtk_string(&sol, &aux, &d).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "# vtk DataFile Version 3.0");
    assert_eq!(lines[2], "ASCII");
    assert_eq!(lines[3], "DATASET UNSTRUCTURED_GRID");
    assert_eq!(lines[4], "POINTS 9 double");
    let cells = lines.iter().position(|l| *l == "CELLS 8 32").unwrap();
    assert!(lines[cells + 1..cells + 9].iter().all(|l| l.starts_with("3 ")));
    assert_eq!(lines[cells + 9], "CELL_TYPES 8");
    assert!(lines[cells + 10..cells + 18].iter().all(|l| *l == "5"));
    let corner = lines.iter().position(|l| l.starts_with("velocity_at_vertices 6 8")).unwrap();
    for l in &lines[corner + 1..corner + 9] {
        let v: Vec<f64> = l.split(' ').map(|s| s.parse().unwrap()).collect();
        for j in 0..3 {
            assert!((v[2 * j] - 0.5).abs() < 1e-13 && (v[2 * j + 1] + 2.0).abs() < 1e-13);
        }
    }
    let pd = lines.iter().position(|l| *l == "POINT_DATA 9").unwrap();
    assert_eq!(lines[pd + 1], "VECTORS velocity double");
    assert_eq!(lines[pd + 11], "SCALARS pressure double 1");
    assert!(lines[pd + 13..pd + 22].iter().all(|l| l.parse::<f64>().unwrap() == 3.0));
    assert_eq!(lines.len(), pd + 22);
}

#[test]
fn atomic_write_replaces_the_whole_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.csv");
    write_atomic(&path, b"first version, long\n").unwrap();
    write_atomic(&path, b"second\n").unwrap();
    assert_eq!(std::fs::read_to_string(&path).unwrap(), "second\n");
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    let e = write_atomic(&dir.path().join("missing/t.csv"), b"x").unwrap_err();
    assert_eq!(e.exit_code(), 4);
}
