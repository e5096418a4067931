//! Conforming triangulations of `(−1, 1)²`, face topology, red refinement
//! and shape-regularity metrics.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::io::{BufRead, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// A triangulation. Cells are vertex triples in counter-clockwise order.
#[derive(Clone, Debug, PartialEq)]
pub struct Mesh {
    vertices: Vec<[f64; 2]>,
    cells: Vec<[usize; 3]>,
    level: usize,
    parents: Option<Vec<usize>>,
}

impl Mesh {
    /// Builds a mesh, checking indices and orientation.
    pub fn new(vertices: Vec<[f64; 2]>, cells: Vec<[usize; 3]>, level: usize) -> Result<Self> {
        for (c, cell) in cells.iter().enumerate() {
            for &v in cell {
                if v >= vertices.len() {
                    return Err(Error::Geometry {
                        cell: c,
                        message: format!("vertex index {v} out of range"),
                    });
                }
            }
            let area = signed_area(&vertices, *cell);
            if !(area > 0.0) {
                return Err(Error::Geometry {
                    cell: c,
                    message: format!("non-positive signed area {area:e}"),
                });
            }
        }
        Ok(Self { vertices, cells, level, parents: None })
    }

    pub fn vertices(&self) -> &[[f64; 2]] {
        &self.vertices
    }

    pub fn cells(&self) -> &[[usize; 3]] {
        &self.cells
    }

    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn level(&self) -> usize {
        self.level
    }

    /// For a refined mesh, the index of each cell's parent in the coarser mesh.
    pub fn parents(&self) -> Option<&[usize]> {
        self.parents.as_deref()
    }

    pub fn cell_vertices(&self, cell: usize) -> [[f64; 2]; 3] {
        let c = self.cells[cell];
        [self.vertices[c[0]], self.vertices[c[1]], self.vertices[c[2]]]
    }

    pub fn cell_area(&self, cell: usize) -> f64 {
        signed_area(&self.vertices, self.cells[cell])
    }

    /// Writes the `ldgmesh v1` text format.
    pub fn write_to<W: Write>(&self, mut out: W) -> Result<()> {
        let mut s = String::new();
        s.push_str("ldgmesh v1\n");
        let _ = writeln!(s, "{}", self.vertices.len());
        for v in &self.vertices {
            let _ = writeln!(s, "{:?} {:?}", v[0], v[1]);
        }
        let _ = writeln!(s, "{}", self.cells.len());
        for c in &self.cells {
            let _ = writeln!(s, "{} {} {}", c[0], c[1], c[2]);
        }
        out.write_all(s.as_bytes())?;
        Ok(())
    }

    pub fn write_file(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.write_to(std::io::BufWriter::new(file))
    }

    /// Reads the `ldgmesh v1` text format and validates the result,
    /// including conformity.
    pub fn read_from<R: BufRead>(input: R) -> Result<Self> {
        let mut lines = input
            .lines()
            .enumerate()
            .map(|(i, l)| l.map(|s| (i + 1, s)))
            .filter(|r| !matches!(r, Ok((_, s)) if s.trim().is_empty()));
        let mut next = |what: &str| -> Result<(usize, String)> {
            match lines.next() {
                Some(r) => Ok(r?),
                None => Err(Error::Parse { line: 0, message: format!("unexpected end of file, expected {what}") }),
            }
        };
        let (line, header) = next("header")?;
        if header.trim() != "ldgmesh v1" {
            return Err(Error::Parse { line, message: format!("bad header {header:?}") });
        }
        let nv: usize = parse_one(next("vertex count")?)?;
        let mut vertices = Vec::with_capacity(nv);
        for _ in 0..nv {
            let (line, s) = next("vertex")?;
            let xs = parse_fields::<f64>(line, &s, 2)?;
            vertices.push([xs[0], xs[1]]);
        }
        let nc: usize = parse_one(next("cell count")?)?;
        let mut cells = Vec::with_capacity(nc);
        for _ in 0..nc {
            let (line, s) = next("cell")?;
            let c = parse_fields::<usize>(line, &s, 3)?;
            cells.push([c[0], c[1], c[2]]);
        }
        if let Some(r) = lines.next() {
            let (line, _) = r?;
            return Err(Error::Parse { line, message: "trailing content".into() });
        }
        let mesh = Mesh::new(vertices, cells, 0)?;
        build_faces(&mesh)?;
        Ok(mesh)
    }

    pub fn read_file(path: impl AsRef<Path>) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::read_from(std::io::BufReader::new(file))
    }
}

fn parse_one(entry: (usize, String)) -> Result<usize> {
    let (line, s) = entry;
    s.trim()
        .parse()
        .map_err(|e| Error::Parse { line, message: format!("{e}: {s:?}") })
}

fn parse_fields<T: std::str::FromStr>(line: usize, s: &str, n: usize) -> Result<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    let fields: Vec<&str> = s.split_whitespace().collect();
    if fields.len() != n {
        return Err(Error::Parse { line, message: format!("expected {n} fields, got {}", fields.len()) });
    }
    fields
        .iter()
        .map(|f| f.parse::<T>().map_err(|e| Error::Parse { line, message: format!("{e}: {f:?}") }))
        .collect()
}

fn signed_area(vertices: &[[f64; 2]], c: [usize; 3]) -> f64 {
    let [a, b, d] = [vertices[c[0]], vertices[c[1]], vertices[c[2]]];
    0.5 * ((b[0] - a[0]) * (d[1] - a[1]) - (b[1] - a[1]) * (d[0] - a[0]))
}

/// `n0 × n0` squares on `(−1, 1)²`, each cut into two triangles. Every
/// diagonal points at the origin, so the orientation flips between
/// neighbouring quadrants, the diagonals form a union jack around the
/// origin, and the corner squares are cut through the domain corners.
pub fn generate_square_mesh(n0: usize) -> Result<Mesh> {
    if n0 < 2 || !n0.is_multiple_of(2) {
        return Err(Error::Config(format!("n0 must be even and >= 2, got {n0}")));
    }
    let m = n0 + 1;
    let step = 2.0 / n0 as f64;
    let mut vertices = Vec::with_capacity(m * m);
    for j in 0..m {
        for i in 0..m {
            // Exact for the dyadic n0 used in practice.
            vertices.push([-1.0 + i as f64 * step, -1.0 + j as f64 * step]);
        }
    }
    let half = n0 / 2;
    let mut cells = Vec::with_capacity(2 * n0 * n0);
    for j in 0..n0 {
        for i in 0..n0 {
            let sw = j * m + i;
            let se = sw + 1;
            let nw = sw + m;
            let ne = nw + 1;
            if (i < half) == (j < half) {
                cells.push([sw, se, ne]);
                cells.push([sw, ne, nw]);
            } else {
                cells.push([sw, se, nw]);
                cells.push([se, ne, nw]);
            }
        }
    }
    Mesh::new(vertices, cells, 0)
}

/// Splits every triangle into four by connecting edge midpoints.
///
/// Child `i < 3` keeps vertex `i` of the parent in local slot `i`; child 3
/// is the middle triangle. The parent index of each child is recorded.
pub fn red_refine(mesh: &Mesh) -> Mesh {
    let mut vertices = mesh.vertices.clone();
    let mut midpoints: HashMap<(usize, usize), usize> = HashMap::with_capacity(mesh.cells.len() * 2);
    let mut mid = |a: usize, b: usize, vertices: &mut Vec<[f64; 2]>| -> usize {
        let key = (a.min(b), a.max(b));
        *midpoints.entry(key).or_insert_with(|| {
            let (pa, pb) = (vertices[a], vertices[b]);
            vertices.push([0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])]);
            vertices.len() - 1
        })
    };
    let mut cells = Vec::with_capacity(mesh.cells.len() * 4);
    let mut parents = Vec::with_capacity(mesh.cells.len() * 4);
    for (c, &[a, b, d]) in mesh.cells.iter().enumerate() {
        let ab = mid(a, b, &mut vertices);
        let bd = mid(b, d, &mut vertices);
        let da = mid(d, a, &mut vertices);
        cells.push([a, ab, da]);
        cells.push([ab, b, bd]);
        cells.push([da, bd, d]);
        cells.push([ab, bd, da]);
        parents.extend_from_slice(&[c; 4]);
    }
    Mesh { vertices, cells, level: mesh.level + 1, parents: Some(parents) }
}

/// Marker for the missing neighbour of a boundary face.
pub const BOUNDARY: usize = usize::MAX;

/// A mesh edge with its adjacent cells.
#[derive(Clone, Debug, PartialEq)]
pub struct Face {
    /// Endpoints, sorted ascending.
    pub vertices: [usize; 2],
    /// Cell with the lower index.
    pub minus: usize,
    /// Neighbouring cell, or [`BOUNDARY`].
    pub plus: usize,
    /// Local edge index of the face in the minus / plus cell.
    pub local_edge: [usize; 2],
    /// Unit normal pointing out of the minus cell (outward on `∂Ω`).
    pub normal: [f64; 2],
    pub length: f64,
}

impl Face {
    pub fn is_boundary(&self) -> bool {
        self.plus == BOUNDARY
    }
}

/// All faces of a mesh with cell-to-face incidence.
#[derive(Clone, Debug, PartialEq)]
pub struct FaceSet {
    pub faces: Vec<Face>,
    /// `cell_faces[c][e]` is the face opposite local vertex `e` of cell `c`.
    pub cell_faces: Vec<[usize; 3]>,
}

impl FaceSet {
    pub fn num_interior(&self) -> usize {
        self.faces.iter().filter(|f| !f.is_boundary()).count()
    }

    pub fn num_boundary(&self) -> usize {
        self.faces.iter().filter(|f| f.is_boundary()).count()
    }

    /// Cells sharing a face with `cell`.
    pub fn neighbors(&self, cell: usize) -> impl Iterator<Item = usize> + '_ {
        self.cell_faces[cell].iter().filter_map(move |&f| {
            let face = &self.faces[f];
            let other = if face.minus == cell { face.plus } else { face.minus };
            (other != BOUNDARY).then_some(other)
        })
    }
}

/// Local edge `e` of a triangle joins local vertices `(e+1)%3` and `(e+2)%3`.
#[inline]
pub fn edge_vertices(e: usize) -> (usize, usize) {
    ((e + 1) % 3, (e + 2) % 3)
}

/// Extracts faces, sorted by vertex pair, and checks conformity.
pub fn build_faces(mesh: &Mesh) -> Result<FaceSet> {
    let mut edges: Vec<([usize; 2], usize, usize)> = Vec::with_capacity(3 * mesh.cells.len());
    for (c, cell) in mesh.cells.iter().enumerate() {
        for e in 0..3 {
            let (a, b) = edge_vertices(e);
            let (a, b) = (cell[a], cell[b]);
            edges.push(([a.min(b), a.max(b)], c, e));
        }
    }
    edges.sort_unstable();
    let mut faces = Vec::with_capacity(edges.len() / 2 + 1);
    let mut cell_faces = vec![[usize::MAX; 3]; mesh.cells.len()];
    let mut i = 0;
    while i < edges.len() {
        let mut j = i + 1;
        while j < edges.len() && edges[j].0 == edges[i].0 {
            j += 1;
        }
        let key = edges[i].0;
        if j - i > 2 {
            return Err(Error::Topology { message: format!("edge shared by {} cells", j - i), edge: key });
        }
        let (_, minus, e_minus) = edges[i];
        let (plus, e_plus) = if j - i == 2 { (edges[i + 1].1, edges[i + 1].2) } else { (BOUNDARY, usize::MAX) };
        if plus == minus {
            return Err(Error::Topology { message: "degenerate cell repeats an edge".into(), edge: key });
        }
        let (a, b) = edge_vertices(e_minus);
        let cell = mesh.cells[minus];
        let (pa, pb) = (mesh.vertices[cell[a]], mesh.vertices[cell[b]]);
        let (dx, dy) = (pb[0] - pa[0], pb[1] - pa[1]);
        let length = dx.hypot(dy);
        // Counter-clockwise traversal: the outward normal is the edge direction
        // rotated clockwise.
        let normal = [dy / length, -dx / length];
        let f = faces.len();
        cell_faces[minus][e_minus] = f;
        if plus != BOUNDARY {
            cell_faces[plus][e_plus] = f;
        }
        faces.push(Face { vertices: key, minus, plus, local_edge: [e_minus, e_plus], normal, length });
        i = j;
    }
    check_hanging_nodes(mesh, &faces)?;
    Ok(FaceSet { faces, cell_faces })
}

/// A conforming mesh has no vertex in the relative interior of a boundary
/// edge; a hanging node shows up exactly that way.
fn check_hanging_nodes(mesh: &Mesh, faces: &[Face]) -> Result<()> {
    let boundary: Vec<&Face> = faces.iter().filter(|f| f.is_boundary()).collect();
    let mut on_boundary: Vec<usize> = boundary.iter().flat_map(|f| f.vertices).collect();
    on_boundary.sort_unstable();
    on_boundary.dedup();
    for f in &boundary {
        let p = mesh.vertices[f.vertices[0]];
        let q = mesh.vertices[f.vertices[1]];
        let d = [q[0] - p[0], q[1] - p[1]];
        let len2 = d[0] * d[0] + d[1] * d[1];
        for &v in &on_boundary {
            if v == f.vertices[0] || v == f.vertices[1] {
                continue;
            }
            let x = mesh.vertices[v];
            let r = [x[0] - p[0], x[1] - p[1]];
            let cross = d[0] * r[1] - d[1] * r[0];
            let t = (d[0] * r[0] + d[1] * r[1]) / len2;
            if cross.abs() <= 1e-12 * len2 && t > 1e-12 && t < 1.0 - 1e-12 {
                return Err(Error::Topology {
                    message: format!("vertex {v} lies inside the edge (hanging node)"),
                    edge: f.vertices,
                });
            }
        }
    }
    Ok(())
}

/// Shape-regularity data.
#[derive(Clone, Debug, PartialEq)]
pub struct MeshMetrics {
    /// `max_K h_K`.
    pub h: f64,
    /// Cell diameters (longest edge).
    pub h_cell: Vec<f64>,
    /// Cell inradii.
    pub rho_cell: Vec<f64>,
    /// `max_K h_K / ρ_K`.
    pub chunkiness: f64,
}

pub fn mesh_metrics(mesh: &Mesh) -> Result<MeshMetrics> {
    let mut h_cell = Vec::with_capacity(mesh.num_cells());
    let mut rho_cell = Vec::with_capacity(mesh.num_cells());
    let mut chunkiness: f64 = 0.0;
    for c in 0..mesh.num_cells() {
        let [a, b, d] = mesh.cell_vertices(c);
        let l = [dist(b, d), dist(d, a), dist(a, b)];
        let area = mesh.cell_area(c);
        if !(area > 0.0) {
            return Err(Error::Geometry { cell: c, message: "degenerate cell".into() });
        }
        let hk = l[0].max(l[1]).max(l[2]);
        let rho = 2.0 * area / (l[0] + l[1] + l[2]);
        chunkiness = chunkiness.max(hk / rho);
        h_cell.push(hk);
        rho_cell.push(rho);
    }
    let h = h_cell.iter().copied().fold(0.0, f64::max);
    Ok(MeshMetrics { h, h_cell, rho_cell, chunkiness })
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_for_small_grids() {
        let m = generate_square_mesh(2).unwrap();
        assert_eq!((m.num_cells(), m.num_vertices()), (8, 9));
        let m = generate_square_mesh(4).unwrap();
        assert_eq!((m.num_cells(), m.num_vertices()), (32, 25));
        let metrics = mesh_metrics(&m).unwrap();
        assert!((metrics.h - 0.5f64.sqrt()).abs() < 1e-15);
        assert!(generate_square_mesh(3).is_err());
        assert!(generate_square_mesh(0).is_err());
    }

    #[test]
    fn origin_is_a_vertex_with_eight_cells() {
        let m = generate_square_mesh(4).unwrap();
        let o = m.vertices().iter().position(|v| *v == [0.0, 0.0]).unwrap();
        let n = m.cells().iter().filter(|c| c.contains(&o)).count();
        assert_eq!(n, 8);
    }

    #[test]
    fn refinement_halves_h_and_keeps_corner_slots() {
        let m0 = generate_square_mesh(4).unwrap();
        let m1 = red_refine(&m0);
        assert_eq!(m1.num_cells(), 128);
        assert_eq!(m1.num_vertices(), 81);
        assert_eq!(m1.level(), 1);
        let parents = m1.parents().unwrap();
        for (c, cell) in m1.cells().iter().enumerate() {
            let parent = m0.cells()[parents[c]];
            if c % 4 < 3 {
                assert_eq!(cell[c % 4], parent[c % 4]);
            }
        }
        let h0 = mesh_metrics(&m0).unwrap().h;
        let h1 = mesh_metrics(&m1).unwrap().h;
        assert_eq!(h1, h0 / 2.0);
    }

    #[test]
    fn faces_and_normals() {
        let m = generate_square_mesh(2).unwrap();
        let fs = build_faces(&m).unwrap();
        assert_eq!(3 * m.num_cells(), 2 * fs.num_interior() + fs.num_boundary());
        assert_eq!(fs.num_boundary(), 8);
        for f in &fs.faces {
            let n = f.normal;
            assert!((n[0].hypot(n[1]) - 1.0).abs() < 1e-15);
            if f.is_boundary() {
                let p = m.vertices()[f.vertices[0]];
                let q = m.vertices()[f.vertices[1]];
                if p[0] == 1.0 && q[0] == 1.0 {
                    assert_eq!(n, [1.0, 0.0]);
                }
                assert!(p[0].abs() == 1.0 || p[1].abs() == 1.0);
            }
        }
        for w in fs.faces.windows(2) {
            assert!(w[0].vertices < w[1].vertices);
        }
    }

    #[test]
    fn metrics_of_reference_triangles() {
        let right = Mesh::new(vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]], vec![[0, 1, 2]], 0).unwrap();
        let m = mesh_metrics(&right).unwrap();
        assert!((m.rho_cell[0] - (2.0 - 2f64.sqrt()) / 2.0).abs() < 1e-15);
        let ratio = 2.0 * 2f64.sqrt() / (2.0 - 2f64.sqrt());
        assert!((m.chunkiness - ratio).abs() < 1e-12);
        let eq = Mesh::new(vec![[0.0, 0.0], [1.0, 0.0], [0.5, 0.75f64.sqrt()]], vec![[0, 1, 2]], 0).unwrap();
        let m = mesh_metrics(&eq).unwrap();
        assert!((m.chunkiness - 2.0 * 3f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn rejects_inverted_and_nonconforming() {
        assert!(Mesh::new(vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]], vec![[0, 2, 1]], 0).is_err());
        // Square split in two, with one half split again at the diagonal midpoint.
        let v = vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0], [0.5, 0.5]];
        let cells = vec![[0, 1, 2], [0, 4, 3], [4, 2, 3]];
        let m = Mesh::new(v, cells, 0).unwrap();
        match build_faces(&m) {
            Err(Error::Topology { edge, .. }) => assert_eq!(edge, [0, 2]),
            other => panic!("expected topology error, got {other:?}"),
        }
        // Three triangles on one edge.
        let v = vec![[0.0, 0.0], [1.0, 0.0], [0.5, 1.0], [0.5, -1.0], [0.5, 2.0]];
        let m = Mesh::new(v, vec![[0, 1, 2], [0, 3, 1], [0, 1, 4]], 0).unwrap();
        assert!(matches!(build_faces(&m), Err(Error::Topology { edge: [0, 1], .. })));
    }

    #[test]
    fn text_round_trip_is_bit_exact() {
        let m = red_refine(&generate_square_mesh(2).unwrap());
        let mut buf = Vec::new();
        m.write_to(&mut buf).unwrap();
        let back = Mesh::read_from(&buf[..]).unwrap();
        assert_eq!(back.cells(), m.cells());
        for (a, b) in back.vertices().iter().zip(m.vertices()) {
            assert_eq!(a[0].to_bits(), b[0].to_bits());
            assert_eq!(a[1].to_bits(), b[1].to_bits());
        }
        assert!(Mesh::read_from(&b"ldgmesh v2\n0\n0\n"[..]).is_err());
        assert!(Mesh::read_from(&b"ldgmesh v1\n1\n0.0\n"[..]).is_err());
    }
}
