//! Surrogate domain extraction and gap geometry.
//!
//! Active cells are the cells whose nodes all lie in the closure of Ω. Each
//! surrogate edge carries an extension quad `(a1, a2, a2_ext, a1_ext)` with the
//! attached cell on the right of `a1 -> a2`, so the quad is counter-clockwise
//! and `n_tilde` points away from the surrogate domain.

use std::collections::BTreeMap;
use std::io::Write;

use log::{debug, warn};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fem::CellMap;
use crate::geometry::{BcKind, ProjectionResult, Shape};
use crate::mesh::Mesh;
use crate::{rot90, shoelace, Vec2};

/// Relative area below which an extension quad counts as crossed.
pub const CROSSED_TOL: f64 = 1e-10;
/// Relative distance below which a node counts as lying on the boundary.
pub const ZERO_DISTANCE_TOL: f64 = 1e-12;
/// A projection is redirected when `d . n < -REDIRECT_COS |d|` for the
/// outward normal `n` of an incident surrogate edge.
pub const REDIRECT_COS: f64 = std::f64::consts::FRAC_1_SQRT_2;

#[derive(Debug, Clone)]
pub struct SurrogateEdge {
    pub edge: usize,
    pub cell: usize,
    /// Local edge index inside `cell`; it runs from `nodes[1]` to `nodes[0]`.
    pub local_edge: usize,
    /// Endpoints `a1`, `a2`.
    pub nodes: [usize; 2],
    pub points: [Vec2; 2],
    /// Distance vectors at the endpoints.
    pub d: [Vec2; 2],
    /// Projected endpoints.
    pub ext: [Vec2; 2],
    pub length: f64,
    /// Signed extension quad area over `length`; negative when the
    /// projections cross.
    pub h_e: f64,
    /// `|ext[1] - ext[0]| / length`.
    pub j_e: f64,
    pub bc: BcKind,
    /// Outward unit normal of the surrogate edge.
    pub n_tilde: Vec2,
    /// Outward unit normal of the chord `ext[0] -> ext[1]`.
    pub chord_normal: Vec2,
    /// Set when the projections cross, leaving a negative quad area.
    pub crossed: bool,
}

impl SurrogateEdge {
    /// Point on the edge at parameter `s` in [0, 1] from `a1`.
    pub fn point_at(&self, s: f64) -> Vec2 {
        self.points[0] * (1.0 - s) + self.points[1] * s
    }

    /// Linearly interpolated distance vector at parameter `s`.
    pub fn d_at(&self, s: f64) -> Vec2 {
        self.d[0] * (1.0 - s) + self.d[1] * s
    }

    /// Reference coordinates (in the attached cell) of the point at `s`.
    pub fn ref_point(&self, map: &CellMap, s: f64) -> Vec2 {
        map.edge_point(self.local_edge, 1.0 - s)
    }

    pub fn quad(&self) -> [Vec2; 4] {
        [self.points[0], self.points[1], self.ext[1], self.ext[0]]
    }

    /// Area centroid of the extension quad; the vertex mean when the quad is
    /// degenerate.
    pub fn gap_centroid(&self) -> Vec2 {
        let q = self.quad();
        let mut a = 0.0;
        let mut c = Vec2::zeros();
        for k in 0..4 {
            let (p, r) = (q[k], q[(k + 1) % 4]);
            let cross = p.x * r.y - r.x * p.y;
            a += cross;
            c += (p + r) * cross;
        }
        if a.abs() <= 1e-12 * self.length * self.length {
            return q.iter().sum::<Vec2>() / 4.0;
        }
        c / (3.0 * a)
    }
}

/// Two extension quads meeting along the lateral gap edge from a surrogate
/// node along its distance vector.
///
/// `n_plus` is the outward normal of the `plus` quad across the lateral edge,
/// so the jump of a scalar `q` is `(q_plus - q_minus) n_plus`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JumpPair {
    pub plus_edge: usize,
    pub minus_edge: usize,
    pub plus_cell: usize,
    pub minus_cell: usize,
    pub n_plus: Vec2,
}

#[derive(Debug, Clone)]
pub struct SurrogateNode {
    pub node: usize,
    pub d: Vec2,
    /// Indices into [`SurrogateModel::edges`].
    pub edges: Vec<usize>,
    pub pairs: Vec<JumpPair>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Diagnostics {
    pub crossed_quads: usize,
    pub zero_distance_nodes: usize,
    /// Pairs whose edges do not lie on opposite sides of `d`.
    pub inverted_pairs: usize,
    pub same_cell_pairs: usize,
    pub pinch_nodes: usize,
    pub open_nodes: usize,
    /// Cells with every node in Ω that Γ still passes through.
    pub cut_cells: usize,
    /// Surrogate nodes whose nearest point of Γ lay behind an incident edge
    /// and were projected to the nearest point in front instead.
    pub redirected_nodes: usize,
    /// Active cells dropped because they are not edge-connected to the
    /// largest active component.
    pub detached_cells: usize,
}

#[derive(Debug, Clone)]
pub struct SurrogateModel {
    pub active_cells: Vec<usize>,
    pub is_active: Vec<bool>,
    /// Sorted nodes of active cells.
    pub active_nodes: Vec<usize>,
    pub edges: Vec<SurrogateEdge>,
    pub nodes: Vec<SurrogateNode>,
    /// Sorted nodes of active cells lying on the outer boundary of the grid.
    pub outer_dirichlet_nodes: Vec<usize>,
    pub diagnostics: Diagnostics,
}

/// Scalar jump `(g_plus - g_minus) . d` and average `(g_plus + g_minus) / 2`.
pub fn node_jump_average(g_plus: Vec2, g_minus: Vec2, d: Vec2) -> (f64, Vec2) {
    ((g_plus - g_minus).dot(&d), (g_plus + g_minus) * 0.5)
}

pub fn build_surrogate(mesh: &Mesh, shape: &Shape) -> Result<SurrogateModel> {
    let inside: Vec<bool> = mesh.nodes().par_iter().map(|&p| shape.is_inside(p)).collect();
    let nodes_in: Vec<bool> = (0..mesh.num_cells())
        .map(|c| mesh.cell(c).iter().all(|&n| inside[n]))
        .collect();
    let mut is_active: Vec<bool> = (0..mesh.num_cells())
        .into_par_iter()
        .map(|c| nodes_in[c] && !shape.crosses_cell(&mesh.cell_points(c)))
        .collect();
    let cut_cells = nodes_in.iter().zip(&is_active).filter(|(a, b)| **a && !**b).count();
    let detached_cells = keep_largest_component(mesh, &mut is_active);
    if detached_cells > 0 {
        warn!("dropped {detached_cells} active cells outside the largest component");
    }
    let active_cells: Vec<usize> = (0..mesh.num_cells()).filter(|&c| is_active[c]).collect();
    if active_cells.is_empty() {
        return Err(Error::EmptyDomain);
    }
    let mut node_active = vec![false; mesh.num_nodes()];
    for &c in &active_cells {
        for &n in mesh.cell(c) {
            node_active[n] = true;
        }
    }
    let active_nodes: Vec<usize> = (0..mesh.num_nodes()).filter(|&n| node_active[n]).collect();

    let mut outer = vec![false; mesh.num_nodes()];
    let mut raw_edges = Vec::new();
    for (e, edge) in mesh.edges().iter().enumerate() {
        let l = is_active[edge.left];
        match edge.right {
            None => {
                if l {
                    outer[edge.nodes[0]] = true;
                    outer[edge.nodes[1]] = true;
                }
            }
            Some(r) => {
                if l != is_active[r] {
                    raw_edges.push((e, if l { edge.left } else { r }));
                }
            }
        }
    }
    let outer_dirichlet_nodes: Vec<usize> = (0..mesh.num_nodes()).filter(|&n| outer[n]).collect();

    // closest-point data at every surrogate node
    let mut node_ids: Vec<usize> = raw_edges.iter().flat_map(|&(e, _)| mesh.edge(e).nodes).collect();
    node_ids.sort_unstable();
    node_ids.dedup();
    let proj_of: BTreeMap<usize, usize> = node_ids.iter().enumerate().map(|(k, &n)| (n, k)).collect();
    // unnormalized outward normals: their length is the edge length
    let mut normals: Vec<Vec<Vec2>> = vec![Vec::new(); node_ids.len()];
    for &(e, cell) in &raw_edges {
        let (nodes, _) = edge_layout(mesh, e, cell);
        let n = rot90(mesh.node(nodes[1]) - mesh.node(nodes[0]));
        normals[proj_of[&nodes[0]]].push(n);
        normals[proj_of[&nodes[1]]].push(n);
    }
    let projected = node_ids
        .par_iter()
        .zip(&normals)
        .map(|(&n, nrm)| {
            let p = mesh.node(n);
            let pr = shape.project(p)?;
            if !behind(pr.distance_vec, nrm) {
                return Ok((pr, false));
            }
            let front = shape.project_where(p, &|x| !behind(x - p, nrm))?;
            Ok(front.map_or((pr, false), |f| (f, true)))
        })
        .collect::<Result<Vec<_>>>()?;
    let redirected_nodes = projected.iter().filter(|r| r.1).count();
    let projections: Vec<ProjectionResult> = projected.into_iter().map(|r| r.0).collect();

    let mut diagnostics = Diagnostics {
        cut_cells,
        detached_cells,
        redirected_nodes,
        ..Diagnostics::default()
    };
    let mut edges = Vec::with_capacity(raw_edges.len());
    for &(e, cell) in &raw_edges {
        let (nodes, local_edge) = edge_layout(mesh, e, cell);
        let points = [mesh.node(nodes[0]), mesh.node(nodes[1])];
        let pr = [projections[proj_of[&nodes[0]]], projections[proj_of[&nodes[1]]]];
        let ext = [pr[0].point, pr[1].point];
        let length = (points[1] - points[0]).norm();
        let n_tilde = rot90(points[1] - points[0]) / length;
        let area = shoelace(&[points[0], points[1], ext[1], ext[0]]);
        let crossed = area < -CROSSED_TOL * length * length;
        if crossed {
            diagnostics.crossed_quads += 1;
        }
        let chord = ext[1] - ext[0];
        let mid = shape.project((points[0] + points[1]) * 0.5)?;
        let chord_normal = if chord.norm() > 0.0 {
            rot90(chord) / chord.norm()
        } else {
            mid.normal
        };
        edges.push(SurrogateEdge {
            edge: e,
            cell,
            local_edge,
            nodes,
            points,
            d: [ext[0] - points[0], ext[1] - points[1]],
            ext,
            length,
            h_e: area / length,
            j_e: chord.norm() / length,
            bc: mid.bc,
            n_tilde,
            chord_normal,
            crossed,
        });
    }

    let mut incident: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (k, se) in edges.iter().enumerate() {
        incident.entry(se.nodes[0]).or_default().push(k);
        incident.entry(se.nodes[1]).or_default().push(k);
    }
    let mut nodes = Vec::with_capacity(incident.len());
    for (node, inc) in incident {
        let d = projections[proj_of[&node]].distance_vec;
        let pairs = pair_edges(mesh, &edges, node, d, &inc, &mut diagnostics);
        nodes.push(SurrogateNode {
            node,
            d,
            edges: inc,
            pairs,
        });
    }

    if diagnostics != Diagnostics::default() {
        debug!("surrogate diagnostics: {diagnostics:?}");
    }
    if diagnostics.crossed_quads > 0 {
        warn!(
            "{} extension quads have crossing projections",
            diagnostics.crossed_quads
        );
    }
    Ok(SurrogateModel {
        active_cells,
        is_active,
        active_nodes,
        edges,
        nodes,
        outer_dirichlet_nodes,
        diagnostics,
    })
}

/// Pairs the surrogate edges around `node` across each gap sector and fixes
/// the jump orientation of every pair.
/// Surrogate edge nodes ordered so the attached cell lies to their right,
/// and the local index of the edge in that cell.
fn edge_layout(mesh: &Mesh, e: usize, cell: usize) -> ([usize; 2], usize) {
    let local_edge = mesh
        .cell_edges(cell)
        .iter()
        .position(|&x| x == e)
        .expect("edge of cell");
    let cn = mesh.cell(cell);
    ([cn[(local_edge + 1) % cn.len()], cn[local_edge]], local_edge)
}

/// True iff `d` points back into the surrogate domain across some incident
/// edge, more than 45 degrees past the edge line. `normals` are outward edge
/// normals scaled by edge length; distances on the zero-distance scale never
/// count.
fn behind(d: Vec2, normals: &[Vec2]) -> bool {
    let dn = d.norm();
    normals
        .iter()
        .any(|n| dn > ZERO_DISTANCE_TOL * n.norm() && d.dot(n) < -REDIRECT_COS * dn * n.norm())
}

/// Deactivates every active cell outside the largest edge-connected group.
/// Returns the number of cells dropped.
fn keep_largest_component(mesh: &Mesh, is_active: &mut [bool]) -> usize {
    let mut label = vec![usize::MAX; mesh.num_cells()];
    let mut sizes = Vec::new();
    for seed in 0..mesh.num_cells() {
        if !is_active[seed] || label[seed] != usize::MAX {
            continue;
        }
        let id = sizes.len();
        let mut size = 0;
        let mut stack = vec![seed];
        label[seed] = id;
        while let Some(c) = stack.pop() {
            size += 1;
            for &e in mesh.cell_edges(c) {
                if let Some(o) = mesh.edge(e).other(c) {
                    if is_active[o] && label[o] == usize::MAX {
                        label[o] = id;
                        stack.push(o);
                    }
                }
            }
        }
        sizes.push(size);
    }
    let Some(keep) = (0..sizes.len()).max_by_key(|&k| (sizes[k], std::cmp::Reverse(k))) else {
        return 0;
    };
    let mut dropped = 0;
    for c in 0..mesh.num_cells() {
        if is_active[c] && label[c] != keep {
            is_active[c] = false;
            dropped += 1;
        }
    }
    dropped
}

fn pair_edges(
    mesh: &Mesh,
    edges: &[SurrogateEdge],
    node: usize,
    d: Vec2,
    incident: &[usize],
    diag: &mut Diagnostics,
) -> Vec<JumpPair> {
    let x = mesh.node(node);
    if incident.len() < 2 {
        diag.open_nodes += 1;
        return Vec::new();
    }
    if incident.len() > 2 {
        diag.pinch_nodes += 1;
    }
    // (angle, edge, starts here): the cell lies clockwise of an edge leaving
    // through a1 and counter-clockwise of one leaving through a2
    let mut around: Vec<(f64, usize, bool)> = incident
        .iter()
        .map(|&k| {
            let se = &edges[k];
            let starts = se.nodes[0] == node;
            let other = if starts { se.points[1] } else { se.points[0] };
            let u = other - x;
            (u.y.atan2(u.x), k, starts)
        })
        .collect();
    around.sort_by(|a, b| a.0.total_cmp(&b.0));

    let scale = incident.iter().map(|&k| edges[k].length).fold(f64::INFINITY, f64::min);
    let mut pairs = Vec::new();
    let m = around.len();
    for i in 0..m {
        let (_, ea, a_starts) = around[i];
        let (_, eb, b_starts) = around[(i + 1) % m];
        // gap sector between ea and eb, counter-clockwise
        if !(a_starts && !b_starts) {
            continue;
        }
        if d.norm() <= ZERO_DISTANCE_TOL * scale {
            diag.zero_distance_nodes += 1;
            continue;
        }
        // the lateral edge is the side `a2 -> a2_ext` of the quad ending here
        // and `a1_ext -> a1` of the quad starting here; the latter is plus
        let n_plus = rot90(d / d.norm());
        let side = |k: usize| {
            let se = &edges[k];
            let other = if se.nodes[0] == node {
                se.points[1]
            } else {
                se.points[0]
            };
            (other - x).dot(&n_plus)
        };
        if !(side(ea) < 0.0 && side(eb) > 0.0) {
            diag.inverted_pairs += 1;
        }
        if edges[ea].cell == edges[eb].cell {
            diag.same_cell_pairs += 1;
            continue;
        }
        pairs.push(JumpPair {
            plus_edge: ea,
            minus_edge: eb,
            plus_cell: edges[ea].cell,
            minus_cell: edges[eb].cell,
            n_plus,
        });
    }
    pairs
}

impl SurrogateModel {
    /// Per-edge CSV: id, endpoints, `H_e`, `j_e`, bc.
    pub fn dump_edges<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "edge,x1,y1,x2,y2,h_e,j_e,bc")?;
        for se in &self.edges {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{:?}",
                se.edge, se.points[0].x, se.points[0].y, se.points[1].x, se.points[1].y, se.h_e, se.j_e, se.bc
            )?;
        }
        Ok(())
    }

    pub fn max_distance(&self) -> f64 {
        self.nodes.iter().map(|n| n.d.norm()).fold(0.0, f64::max)
    }

    pub fn area(&self, mesh: &Mesh) -> f64 {
        self.active_cells.iter().map(|&c| mesh.cell_area(c)).sum()
    }
}
