//! CSV convergence tables and legacy VTK files.

use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use ldgpflow::constitutive::Tensor2;
use ldgpflow::femspace::Discretization;
use ldgpflow::system::{AuxiliaryFields, DiscreteSolution};
use ldgpflow::verification::StudyReport;

use crate::CliError;

pub const TABLE_HEADER: &str = "level,h,ndof_v,ndof_q,e_L,eoc_L,e_S,eoc_S,e_jump,eoc_jump,e_q,eoc_q,newton_iters";

/// One data row of a convergence table.
#[derive(Clone, Debug, PartialEq)]
pub struct TableRow {
    pub level: usize,
    pub h: f64,
    pub ndof_v: usize,
    pub ndof_q: usize,
    pub e_l: f64,
    pub eoc_l: Option<f64>,
    pub e_s: f64,
    pub eoc_s: Option<f64>,
    pub e_jump: f64,
    pub eoc_jump: Option<f64>,
    pub e_q: f64,
    pub eoc_q: Option<f64>,
    pub newton_iters: usize,
}

/// A convergence table with its reference rate `ρ p'/2`.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub rows: Vec<TableRow>,
    pub reference_rate: f64,
}

impl Table {
    pub fn from_report(report: &StudyReport) -> Self {
        let rows = report
            .levels
            .iter()
            .map(|l| {
                let e = &l.errors;
                let r = l.eoc.unwrap_or_default();
                TableRow {
                    level: e.level,
                    h: e.h,
                    ndof_v: e.ndof_v,
                    ndof_q: e.ndof_q,
                    e_l: e.e_l,
                    eoc_l: r.l,
                    e_s: e.e_s,
                    eoc_s: r.s,
                    e_jump: e.e_jump,
                    eoc_jump: r.jump,
                    e_q: e.e_q,
                    eoc_q: r.q,
                    newton_iters: e.newton_iterations,
                }
            })
            .collect();
        Self { rows, reference_rate: report.reference_rate }
    }

    /// CSV text: header, one row per level, then `ref,,,,,,<rate>`.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str(TABLE_HEADER);
        out.push('\n');
        let opt = |v: Option<f64>| v.map(sci).unwrap_or_default();
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{},{},{}",
                r.level,
                sci(r.h),
                r.ndof_v,
                r.ndof_q,
                sci(r.e_l),
                opt(r.eoc_l),
                sci(r.e_s),
                opt(r.eoc_s),
                sci(r.e_jump),
                opt(r.eoc_jump),
                sci(r.e_q),
                opt(r.eoc_q),
                r.newton_iters
            );
        }
        let _ = writeln!(out, "ref,,,,,,{:.4}", self.reference_rate);
        out
    }

    pub fn parse_csv(text: &str) -> Result<Self, CliError> {
        let bad = |line: usize, msg: &str| CliError::Parse(format!("table line {line}: {msg}"));
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, h)) if h.trim() == TABLE_HEADER => {}
            _ => return Err(bad(1, "missing or wrong header")),
        }
        let mut rows = Vec::new();
        let mut reference = None;
        for (i, line) in lines {
            let n = i + 1;
            if line.trim().is_empty() {
                continue;
            }
            if reference.is_some() {
                return Err(bad(n, "data after the reference row"));
            }
            let f: Vec<&str> = line.split(',').collect();
            if f[0] == "ref" {
                if f.len() != 7 || f[1..6].iter().any(|s| !s.is_empty()) {
                    return Err(bad(n, "reference row must be `ref,,,,,,<rate>`"));
                }
                reference = Some(f[6].parse::<f64>().map_err(|_| bad(n, "bad reference rate"))?);
                continue;
            }
            if f.len() != 13 {
                return Err(bad(n, "expected 13 fields"));
            }
            let real = |k: usize| f[k].parse::<f64>().map_err(|_| bad(n, &format!("bad number in column {}", k + 1)));
            let int = |k: usize| f[k].parse::<usize>().map_err(|_| bad(n, &format!("bad integer in column {}", k + 1)));
            let opt = |k: usize| if f[k].is_empty() { Ok(None) } else { real(k).map(Some) };
            rows.push(TableRow {
                level: int(0)?,
                h: real(1)?,
                ndof_v: int(2)?,
                ndof_q: int(3)?,
                e_l: real(4)?,
                eoc_l: opt(5)?,
                e_s: real(6)?,
                eoc_s: opt(7)?,
                e_jump: real(8)?,
                eoc_jump: opt(9)?,
                e_q: real(10)?,
                eoc_q: opt(11)?,
                newton_iters: int(12)?,
            });
        }
        let reference_rate = reference.ok_or_else(|| bad(text.lines().count(), "missing reference row"))?;
        Ok(Self { rows, reference_rate })
    }
}

/// `%.5e` in C notation: six significant digits, signed two-digit exponent.
pub fn sci(v: f64) -> String {
    if !v.is_finite() {
        return v.to_string();
    }
    let s = format!("{v:.5e}");
    let (mantissa, exp) = s.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    format!("{mantissa}e{}{:02}", if exp < 0 { '-' } else { '+' }, exp.abs())
}

/// Writes through a temporary file in the target directory, then renames.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<(), CliError> {
    let io = |e: std::io::Error| CliError::Io(format!("cannot write {}: {e}", path.display()));
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
    tmp.write_all(contents).map_err(io)?;
    tmp.as_file().sync_all().map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}

pub fn emit_table(report: &StudyReport, path: &Path) -> Result<(), CliError> {
    write_atomic(path, Table::from_report(report).to_csv().as_bytes())
}

const REFERENCE_VERTICES: [[f64; 2]; 3] = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];

/// Legacy ASCII VTK unstructured grid of the solution.
///
/// Cell data: the broken velocity at the three vertices of each cell
/// (`velocity_at_vertices`, six components), `|L_h^sym|` and `|S_h|` at the
/// centroid. Point data: vertex-averaged velocity and the pressure.
pub fn vtk_string(solution: &DiscreteSolution, aux: &AuxiliaryFields, disc: &Discretization) -> Result<String, CliError> {
    let mesh = &disc.mesh;
    let (nv, nc) = (mesh.num_vertices(), mesh.num_cells());
    let mut vel_sum = vec![[0.0f64; 2]; nv];
    let mut count = vec![0usize; nv];
    let mut pressure = vec![0.0f64; nv];
    let mut corner = Vec::with_capacity(nc);
    let mut strain = Vec::with_capacity(nc);
    let mut stress = Vec::with_capacity(nc);
    let tensor = |v: Vec<f64>| Tensor2::from_array([v[0], v[1], v[2], v[3]]);
    for (c, cell) in mesh.cells().iter().enumerate() {
        let mut vals = [0.0f64; 6];
        for (j, &vert) in cell.iter().enumerate() {
            let v = solution.velocity.evaluate(c, REFERENCE_VERTICES[j])?;
            vals[2 * j] = v[0];
            vals[2 * j + 1] = v[1];
            vel_sum[vert][0] += v[0];
            vel_sum[vert][1] += v[1];
            count[vert] += 1;
            pressure[vert] = solution.pressure.evaluate(c, REFERENCE_VERTICES[j])?[0];
        }
        corner.push(vals);
        let centroid = [1.0 / 3.0, 1.0 / 3.0];
        strain.push(tensor(aux.l_h.evaluate(c, centroid)?).sym().norm());
        stress.push(tensor(aux.s_h.evaluate(c, centroid)?).norm());
    }
    let mut out = String::new();
    out.push_str("# vtk DataFile Version 3.0\n");
    let _ = writeln!(out, "ldgpflow solution, level {}", mesh.level());
    out.push_str("ASCII\nDATASET UNSTRUCTURED_GRID\n");
    let _ = writeln!(out, "POINTS {nv} double");
    for v in mesh.vertices() {
        let _ = writeln!(out, "{} {} 0", v[0], v[1]);
    }
    let _ = writeln!(out, "CELLS {nc} {}", 4 * nc);
    for c in mesh.cells() {
        let _ = writeln!(out, "3 {} {} {}", c[0], c[1], c[2]);
    }
    let _ = writeln!(out, "CELL_TYPES {nc}");
    for _ in 0..nc {
        out.push_str("5\n");
    }
    let _ = writeln!(out, "CELL_DATA {nc}");
    out.push_str("FIELD cell_fields 3\n");
    let _ = writeln!(out, "velocity_at_vertices 6 {nc} double");
    for v in &corner {
        let _ = writeln!(out, "{} {} {} {} {} {}", v[0], v[1], v[2], v[3], v[4], v[5]);
    }
    let _ = writeln!(out, "sym_gradient_norm 1 {nc} double");
    for s in &strain {
        let _ = writeln!(out, "{s}");
    }
    let _ = writeln!(out, "stress_norm 1 {nc} double");
    for s in &stress {
        let _ = writeln!(out, "{s}");
    }
    let _ = writeln!(out, "POINT_DATA {nv}");
    out.push_str("VECTORS velocity double\n");
    for (s, &n) in vel_sum.iter().zip(&count) {
        let n = n.max(1) as f64;
        let _ = writeln!(out, "{} {} 0", s[0] / n, s[1] / n);
    }
    out.push_str("SCALARS pressure double 1\nLOOKUP_TABLE default\n");
    for p in &pressure {
        let _ = writeln!(out, "{p}");
    }
    Ok(out)
}

pub fn emit_vtk(solution: &DiscreteSolution, aux: &AuxiliaryFields, disc: &Discretization, path: &Path) -> Result<(), CliError> {
    write_atomic(path, vtk_string(solution, aux, disc)?.as_bytes())
}
