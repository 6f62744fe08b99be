//! Structured background grids.
//!
//! Two families are supported: criss-cross triangulations of the unit square
//! (optionally rotated rigidly about a pivot) and axis-aligned Cartesian quad
//! grids. Cells are stored counter-clockwise; edges are deduplicated and carry
//! their one or two neighboring cells.

use std::collections::HashMap;
use std::io::Write;

use crate::error::{invalid, Result};
use crate::{rotate_about, shoelace, Vec2};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CellKind {
    Tri3,
    Quad4,
}

impl CellKind {
    pub fn nodes_per_cell(self) -> usize {
        match self {
            CellKind::Tri3 => 3,
            CellKind::Quad4 => 4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Edge {
    pub nodes: [usize; 2],
    pub left: usize,
    /// `None` on the outer boundary of the grid.
    pub right: Option<usize>,
}

impl Edge {
    pub fn is_boundary(&self) -> bool {
        self.right.is_none()
    }

    /// The neighbor across this edge as seen from `cell`.
    pub fn other(&self, cell: usize) -> Option<usize> {
        if self.left == cell {
            self.right
        } else {
            Some(self.left)
        }
    }
}

#[derive(Debug, Clone)]
pub struct Mesh {
    nodes: Vec<Vec2>,
    kind: CellKind,
    /// Flat connectivity, `kind.nodes_per_cell()` entries per cell.
    cells: Vec<usize>,
    edges: Vec<Edge>,
    /// Local edge `k` of a cell joins local nodes `k` and `k + 1`.
    cell_edges: Vec<usize>,
    outer_boundary_edges: Vec<usize>,
    h_global: f64,
}

impl Mesh {
    /// Builds a mesh from raw nodes and counter-clockwise cells.
    pub fn from_cells(nodes: Vec<Vec2>, kind: CellKind, cells: Vec<usize>) -> Result<Self> {
        let npc = kind.nodes_per_cell();
        if !cells.len().is_multiple_of(npc) {
            return invalid("cell connectivity length is not a multiple of the cell size");
        }
        if let Some(&bad) = cells.iter().find(|&&i| i >= nodes.len()) {
            return invalid(format!("cell references missing node {bad}"));
        }
        let ncells = cells.len() / npc;

        let mut lookup: HashMap<(usize, usize), usize> = HashMap::new();
        let mut edges: Vec<Edge> = Vec::new();
        let mut cell_edges = Vec::with_capacity(cells.len());
        for c in 0..ncells {
            let cn = &cells[c * npc..(c + 1) * npc];
            for k in 0..npc {
                let (a, b) = (cn[k], cn[(k + 1) % npc]);
                let key = (a.min(b), a.max(b));
                let e = match lookup.get(&key) {
                    Some(&e) => {
                        if edges[e].right.is_some() {
                            return invalid(format!("edge {a}-{b} shared by more than two cells"));
                        }
                        edges[e].right = Some(c);
                        e
                    }
                    None => {
                        edges.push(Edge {
                            nodes: [a, b],
                            left: c,
                            right: None,
                        });
                        lookup.insert(key, edges.len() - 1);
                        edges.len() - 1
                    }
                };
                cell_edges.push(e);
            }
        }
        let outer_boundary_edges = (0..edges.len()).filter(|&e| edges[e].is_boundary()).collect();

        let mut mesh = Mesh {
            nodes,
            kind,
            cells,
            edges,
            cell_edges,
            outer_boundary_edges,
            h_global: 0.0,
        };
        for c in 0..ncells {
            if mesh.cell_area(c) <= 0.0 {
                return invalid(format!("cell {c} is not counter-clockwise"));
            }
        }
        mesh.h_global = (0..ncells).map(|c| mesh.cell_diameter(c)).fold(0.0, f64::max);
        Ok(mesh)
    }

    pub fn kind(&self) -> CellKind {
        self.kind
    }

    pub fn nodes(&self) -> &[Vec2] {
        &self.nodes
    }

    pub fn node(&self, i: usize) -> Vec2 {
        self.nodes[i]
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn num_cells(&self) -> usize {
        self.cells.len() / self.kind.nodes_per_cell()
    }

    pub fn cell(&self, c: usize) -> &[usize] {
        let npc = self.kind.nodes_per_cell();
        &self.cells[c * npc..(c + 1) * npc]
    }

    pub fn cell_points(&self, c: usize) -> Vec<Vec2> {
        self.cell(c).iter().map(|&i| self.nodes[i]).collect()
    }

    /// Global edge indices of a cell, in local-edge order.
    pub fn cell_edges(&self, c: usize) -> &[usize] {
        let npc = self.kind.nodes_per_cell();
        &self.cell_edges[c * npc..(c + 1) * npc]
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge(&self, e: usize) -> &Edge {
        &self.edges[e]
    }

    pub fn outer_boundary_edges(&self) -> &[usize] {
        &self.outer_boundary_edges
    }

    /// Representative mesh size: the largest cell diameter.
    pub fn h_global(&self) -> f64 {
        self.h_global
    }

    pub fn cell_area(&self, c: usize) -> f64 {
        shoelace(&self.cell_points(c))
    }

    pub fn cell_centroid(&self, c: usize) -> Vec2 {
        let pts = self.cell_points(c);
        pts.iter().fold(Vec2::zeros(), |acc, p| acc + p) / pts.len() as f64
    }

    /// Largest distance between two vertices of the cell.
    pub fn cell_diameter(&self, c: usize) -> f64 {
        let pts = self.cell_points(c);
        let mut d: f64 = 0.0;
        for i in 0..pts.len() {
            for j in i + 1..pts.len() {
                d = d.max((pts[i] - pts[j]).norm());
            }
        }
        d
    }

    pub fn edge_length(&self, e: usize) -> Result<f64> {
        match self.edges.get(e) {
            Some(edge) => Ok((self.nodes[edge.nodes[1]] - self.nodes[edge.nodes[0]]).norm()),
            None => invalid(format!("edge index {e} out of range ({} edges)", self.edges.len())),
        }
    }

    /// Rigidly rotates every node about `pivot` by `angle` radians.
    pub fn rotated(&self, pivot: Vec2, angle: f64) -> Mesh {
        let mut out = self.clone();
        for p in &mut out.nodes {
            *p = rotate_about(*p, pivot, angle);
        }
        out
    }

    /// Plain-text dump: one `node i x y` or `cell i n0 n1 ...` record per line.
    pub fn dump<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for (i, p) in self.nodes.iter().enumerate() {
            writeln!(w, "node {i} {} {}", p.x, p.y)?;
        }
        for c in 0..self.num_cells() {
            let ids: Vec<String> = self.cell(c).iter().map(|i| i.to_string()).collect();
            writeln!(w, "cell {c} {}", ids.join(" "))?;
        }
        Ok(())
    }
}

/// Criss-cross triangulation of the unit square with `n` cells per side,
/// rotated about `pivot` by `angle` radians. Each grid square is split into
/// two triangles with the diagonal direction alternating in a checkerboard.
pub fn build_tri_grid(n: usize, pivot: Vec2, angle: f64) -> Result<Mesh> {
    if n < 2 {
        return invalid(format!("tri grid needs n >= 2, got {n}"));
    }
    let h = 1.0 / n as f64;
    let idx = |i: usize, j: usize| j * (n + 1) + i;
    let mut nodes = Vec::with_capacity((n + 1) * (n + 1));
    for j in 0..=n {
        for i in 0..=n {
            nodes.push(rotate_about(Vec2::new(i as f64 * h, j as f64 * h), pivot, angle));
        }
    }
    let mut cells = Vec::with_capacity(6 * n * n);
    for j in 0..n {
        for i in 0..n {
            let (a, b, c, d) = (idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1));
            if (i + j) % 2 == 0 {
                cells.extend_from_slice(&[a, b, c, a, c, d]);
            } else {
                cells.extend_from_slice(&[a, b, d, b, c, d]);
            }
        }
    }
    Mesh::from_cells(nodes, CellKind::Tri3, cells)
}

/// Cartesian grid of `n x n` unit-square cells of side `1/n`.
pub fn build_quad_grid(n: usize) -> Result<Mesh> {
    if n < 2 {
        return invalid(format!("quad grid needs n >= 2, got {n}"));
    }
    build_quad_rect(Vec2::zeros(), Vec2::new(1.0, 1.0), n, n)
}

/// Cartesian grid on the rectangle `[lo, hi]` with `nx x ny` cells.
pub fn build_quad_rect(lo: Vec2, hi: Vec2, nx: usize, ny: usize) -> Result<Mesh> {
    if nx == 0 || ny == 0 || hi.x <= lo.x || hi.y <= lo.y {
        return invalid("degenerate rectangle grid");
    }
    let hx = (hi.x - lo.x) / nx as f64;
    let hy = (hi.y - lo.y) / ny as f64;
    let idx = |i: usize, j: usize| j * (nx + 1) + i;
    let mut nodes = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        for i in 0..=nx {
            nodes.push(Vec2::new(lo.x + i as f64 * hx, lo.y + j as f64 * hy));
        }
    }
    let mut cells = Vec::with_capacity(4 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            cells.extend_from_slice(&[idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1)]);
        }
    }
    Mesh::from_cells(nodes, CellKind::Quad4, cells)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_4, SQRT_2};

    fn min_angle(mesh: &Mesh) -> f64 {
        let mut m = f64::MAX;
        for c in 0..mesh.num_cells() {
            let p = mesh.cell_points(c);
            for k in 0..p.len() {
                let a = p[(k + p.len() - 1) % p.len()] - p[k];
                let b = p[(k + 1) % p.len()] - p[k];
                m = m.min((a.dot(&b) / (a.norm() * b.norm())).acos());
            }
        }
        m
    }

    #[test]
    fn tri_grid_counts() {
        let m = build_tri_grid(2, Vec2::new(0.5, 0.5), 0.0).unwrap();
        assert_eq!(m.num_cells(), 8);
        assert_eq!(m.num_nodes(), 9);
        assert!((m.h_global() - SQRT_2 / 2.0).abs() < 1e-15);
    }

    #[test]
    fn tri_grid_rotation_of_origin() {
        let m = build_tri_grid(2, Vec2::new(0.5, 0.5), FRAC_PI_4).unwrap();
        let p = m.node(0);
        assert!((p.x - 0.5).abs() < 1e-14);
        assert!((p.y - (0.5 - SQRT_2 / 2.0)).abs() < 1e-14);
    }

    #[test]
    fn tri_grid_h_matches_all_cell_diameters() {
        let n = 64;
        let m = build_tri_grid(n, Vec2::new(0.3, 0.7), 0.26).unwrap();
        let brute = (0..m.num_cells()).map(|c| m.cell_diameter(c)).fold(0.0, f64::max);
        let nominal = SQRT_2 / n as f64;
        assert!((brute - nominal).abs() / nominal < 0.05);
        assert_eq!(brute, m.h_global());
    }

    #[test]
    fn rejects_small_n() {
        assert!(build_tri_grid(1, Vec2::zeros(), 0.0).is_err());
        assert!(build_quad_grid(1).is_err());
    }

    #[test]
    fn quad_grid_counts() {
        let m = build_quad_grid(20).unwrap();
        assert_eq!(m.num_cells(), 400);
        assert_eq!(m.num_nodes(), 441);
        assert!((m.h_global() - SQRT_2 / 20.0).abs() < 1e-15);
        assert_eq!(build_quad_grid(2).unwrap().edges().len(), 12);
    }

    #[test]
    fn quad_grid_adjacency_exhaustive() {
        let m = build_quad_grid(40).unwrap();
        let mut refs = vec![0usize; m.edges().len()];
        for c in 0..m.num_cells() {
            for &e in m.cell_edges(c) {
                refs[e] += 1;
            }
        }
        let mut interior = 0;
        for (e, edge) in m.edges().iter().enumerate() {
            let a = m.node(edge.nodes[0]);
            let b = m.node(edge.nodes[1]);
            let on_hull = |v: f64| v.abs() < 1e-14 || (v - 1.0).abs() < 1e-14;
            let outer = (on_hull(a.x) && on_hull(b.x) && a.x == b.x) || (on_hull(a.y) && on_hull(b.y) && a.y == b.y);
            if outer {
                assert!(edge.is_boundary());
                assert_eq!(refs[e], 1);
            } else {
                assert!(edge.right.is_some());
                assert_eq!(refs[e], 2);
                interior += 1;
            }
        }
        let boundary = m.outer_boundary_edges().len();
        assert_eq!(4 * m.num_cells(), 2 * interior + boundary);
    }

    #[test]
    fn edge_length_basic() {
        let m = build_quad_grid(2).unwrap();
        let e = m
            .edges()
            .iter()
            .position(|e| m.node(e.nodes[0]).y == m.node(e.nodes[1]).y)
            .unwrap();
        assert!((m.edge_length(e).unwrap() - 0.5).abs() < 1e-15);
        assert!(m.edge_length(m.edges().len()).is_err());
        let empty = Mesh::from_cells(vec![], CellKind::Tri3, vec![]).unwrap();
        assert!(empty.edge_length(0).is_err());
    }

    #[test]
    fn rotation_preserves_lengths_areas_angles() {
        let base = build_tri_grid(12, Vec2::new(0.5, 0.5), 0.0).unwrap();
        let rot = base.rotated(Vec2::new(0.5, 0.5), 0.37);
        for e in 0..base.edges().len() {
            let (l0, l1) = (base.edge_length(e).unwrap(), rot.edge_length(e).unwrap());
            assert!((l0 - l1).abs() <= 1e-12 * l0);
        }
        for c in 0..base.num_cells() {
            let (a0, a1) = (base.cell_area(c), rot.cell_area(c));
            assert!((a0 - a1).abs() <= 1e-12 * a0);
        }
        assert!(min_angle(&rot) >= min_angle(&base) - 1e-12);
    }

    #[test]
    fn euler_characteristic() {
        for m in [
            build_tri_grid(7, Vec2::zeros(), 0.1).unwrap(),
            build_quad_grid(9).unwrap(),
        ] {
            let v = m.num_nodes() as i64;
            let e = m.edges().len() as i64;
            let f = m.num_cells() as i64;
            assert_eq!(v - e + f, 1);
        }
    }

    #[test]
    fn dump_lists_every_record() {
        let m = build_tri_grid(2, Vec2::zeros(), 0.0).unwrap();
        let mut buf = Vec::new();
        m.dump(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().filter(|l| l.starts_with("node ")).count(), 9);
        assert_eq!(text.lines().filter(|l| l.starts_with("cell ")).count(), 8);
    }
}
