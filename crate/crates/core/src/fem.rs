//! P1 / Q1 reference elements, quadrature rules and discrete error norms.
//!
//! Reference cells are the unit triangle `(0,0), (1,0), (0,1)` and the square
//! `[-1, 1]^2`. Segment rules live on `[-1, 1]`.

use nalgebra::Matrix2;
use rayon::prelude::*;

use crate::error::{invalid, Result};
use crate::mesh::{CellKind, Mesh};
use crate::Vec2;

#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    pub points: Vec<Vec2>,
    pub weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (Vec2, f64)> + '_ {
        self.points.iter().copied().zip(self.weights.iter().copied())
    }
}

/// Measure of the reference cell.
pub fn reference_measure(kind: CellKind) -> f64 {
    match kind {
        CellKind::Tri3 => 0.5,
        CellKind::Quad4 => 4.0,
    }
}

const GAUSS2: f64 = 0.577_350_269_189_625_8;

/// Cell rule exact for polynomials of degree `order` (total degree on
/// triangles, per-variable degree on quads).
pub fn cell_quadrature(kind: CellKind, order: usize) -> Result<QuadratureRule> {
    let rule = match (kind, order) {
        (CellKind::Tri3, 1) => QuadratureRule {
            points: vec![Vec2::new(1.0 / 3.0, 1.0 / 3.0)],
            weights: vec![0.5],
        },
        (CellKind::Tri3, 2) => QuadratureRule {
            points: vec![
                Vec2::new(1.0 / 6.0, 1.0 / 6.0),
                Vec2::new(2.0 / 3.0, 1.0 / 6.0),
                Vec2::new(1.0 / 6.0, 2.0 / 3.0),
            ],
            weights: vec![1.0 / 6.0; 3],
        },
        (CellKind::Tri3, 3) => {
            // six-point rule, degree 4
            let (a, b) = (0.445_948_490_915_965, 0.091_576_213_509_771);
            let (wa, wb) = (0.223_381_589_678_011 / 2.0, 0.109_951_743_655_322 / 2.0);
            QuadratureRule {
                points: vec![
                    Vec2::new(a, a),
                    Vec2::new(1.0 - 2.0 * a, a),
                    Vec2::new(a, 1.0 - 2.0 * a),
                    Vec2::new(b, b),
                    Vec2::new(1.0 - 2.0 * b, b),
                    Vec2::new(b, 1.0 - 2.0 * b),
                ],
                weights: vec![wa, wa, wa, wb, wb, wb],
            }
        }
        (CellKind::Quad4, 1) => QuadratureRule {
            points: vec![Vec2::zeros()],
            weights: vec![4.0],
        },
        (CellKind::Quad4, 2 | 3) => {
            let g = GAUSS2;
            QuadratureRule {
                points: vec![Vec2::new(-g, -g), Vec2::new(g, -g), Vec2::new(g, g), Vec2::new(-g, g)],
                weights: vec![1.0; 4],
            }
        }
        _ => return invalid(format!("unsupported cell quadrature order {order}")),
    };
    Ok(rule)
}

/// Segment rule on `[-1, 1]`; points are stored in the `x` component.
/// Orders 1 through 3 all use two-point Gauss.
pub fn edge_quadrature(order: usize) -> Result<QuadratureRule> {
    if !(1..=3).contains(&order) {
        return invalid(format!("unsupported edge quadrature order {order}"));
    }
    Ok(QuadratureRule {
        points: vec![Vec2::new(-GAUSS2, 0.0), Vec2::new(GAUSS2, 0.0)],
        weights: vec![1.0, 1.0],
    })
}

/// Reference coordinates of local node `k`.
pub fn reference_node(kind: CellKind, k: usize) -> Vec2 {
    match kind {
        CellKind::Tri3 => [Vec2::new(0.0, 0.0), Vec2::new(1.0, 0.0), Vec2::new(0.0, 1.0)][k],
        CellKind::Quad4 => [
            Vec2::new(-1.0, -1.0),
            Vec2::new(1.0, -1.0),
            Vec2::new(1.0, 1.0),
            Vec2::new(-1.0, 1.0),
        ][k],
    }
}

/// Shape function values; entries past `nodes_per_cell` are zero.
pub fn shape_values(kind: CellKind, xi: Vec2) -> [f64; 4] {
    match kind {
        CellKind::Tri3 => [1.0 - xi.x - xi.y, xi.x, xi.y, 0.0],
        CellKind::Quad4 => {
            let (x, y) = (xi.x, xi.y);
            [
                0.25 * (1.0 - x) * (1.0 - y),
                0.25 * (1.0 + x) * (1.0 - y),
                0.25 * (1.0 + x) * (1.0 + y),
                0.25 * (1.0 - x) * (1.0 + y),
            ]
        }
    }
}

/// Shape function gradients with respect to reference coordinates.
pub fn shape_ref_gradients(kind: CellKind, xi: Vec2) -> [Vec2; 4] {
    match kind {
        CellKind::Tri3 => [
            Vec2::new(-1.0, -1.0),
            Vec2::new(1.0, 0.0),
            Vec2::new(0.0, 1.0),
            Vec2::zeros(),
        ],
        CellKind::Quad4 => {
            let (x, y) = (xi.x, xi.y);
            [
                Vec2::new(-0.25 * (1.0 - y), -0.25 * (1.0 - x)),
                Vec2::new(0.25 * (1.0 - y), -0.25 * (1.0 + x)),
                Vec2::new(0.25 * (1.0 + y), 0.25 * (1.0 + x)),
                Vec2::new(-0.25 * (1.0 + y), 0.25 * (1.0 - x)),
            ]
        }
    }
}

/// Geometry of one physical cell: reference-to-physical map and basis
/// evaluation in physical coordinates.
const LOCATE_ITERS: usize = 30;

#[derive(Debug, Clone, Copy)]
pub struct CellMap {
    pub kind: CellKind,
    pub points: [Vec2; 4],
}

impl CellMap {
    pub fn new(mesh: &Mesh, cell: usize) -> CellMap {
        let mut points = [Vec2::zeros(); 4];
        for (k, &n) in mesh.cell(cell).iter().enumerate() {
            points[k] = mesh.node(n);
        }
        CellMap {
            kind: mesh.kind(),
            points,
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.kind.nodes_per_cell()
    }

    pub fn map(&self, xi: Vec2) -> Vec2 {
        let phi = shape_values(self.kind, xi);
        (0..self.num_nodes()).map(|k| self.points[k] * phi[k]).sum()
    }

    /// `J[(i, j)] = d x_i / d xi_j`.
    pub fn jacobian(&self, xi: Vec2) -> Matrix2<f64> {
        let g = shape_ref_gradients(self.kind, xi);
        let mut j = Matrix2::zeros();
        for k in 0..self.num_nodes() {
            j += self.points[k] * g[k].transpose();
        }
        j
    }

    pub fn values(&self, xi: Vec2) -> [f64; 4] {
        shape_values(self.kind, xi)
    }

    /// Physical gradients of the shape functions at reference point `xi`.
    pub fn gradients(&self, xi: Vec2) -> [Vec2; 4] {
        let j = self.jacobian(xi);
        let jinv_t = j.try_inverse().expect("degenerate cell").transpose();
        let g = shape_ref_gradients(self.kind, xi);
        let mut out = [Vec2::zeros(); 4];
        for k in 0..self.num_nodes() {
            out[k] = jinv_t * g[k];
        }
        out
    }

    /// Shifted basis `phi_k(xi) + grad phi_k(xi) . d`.
    pub fn shifted_values(&self, xi: Vec2, d: Vec2) -> [f64; 4] {
        let v = self.values(xi);
        let g = self.gradients(xi);
        let mut out = [0.0; 4];
        for k in 0..self.num_nodes() {
            out[k] = v[k] + g[k].dot(&d);
        }
        out
    }

    /// Reference coordinates of the physical point `x`, which may lie
    /// outside the cell.
    pub fn locate(&self, x: Vec2) -> Vec2 {
        let n = self.num_nodes();
        let mut r: Vec2 = (0..n).map(|k| reference_node(self.kind, k)).sum::<Vec2>() / n as f64;
        let scale = (self.points[1] - self.points[0]).norm();
        for _ in 0..LOCATE_ITERS {
            let res = self.map(r) - x;
            if res.norm() <= 1e-15 * scale {
                break;
            }
            match self.jacobian(r).try_inverse() {
                Some(jinv) => r -= jinv * res,
                None => break,
            }
        }
        r
    }

    /// Values at `x` of the cell's basis polynomials, extended beyond the
    /// cell.
    pub fn extension_values(&self, x: Vec2) -> [f64; 4] {
        self.values(self.locate(x))
    }

    pub fn extension_gradients(&self, x: Vec2) -> [Vec2; 4] {
        self.gradients(self.locate(x))
    }

    /// Reference point on local edge `k` (nodes `k`, `k+1`) at parameter
    /// `s` in [0, 1] measured from node `k`.
    pub fn edge_point(&self, k: usize, s: f64) -> Vec2 {
        let n = self.num_nodes();
        reference_node(self.kind, k) * (1.0 - s) + reference_node(self.kind, (k + 1) % n) * s
    }
}

/// First-order Taylor shift `v + grad_v . d`.
pub fn shift_eval(value: f64, grad: Vec2, d: Vec2) -> f64 {
    value + grad.dot(&d)
}

/// Reference-cell composite rule: the cell split into `m` parts per side with
/// the order-2 rule on each piece.
pub fn composite_rule(kind: CellKind, m: usize) -> QuadratureRule {
    let base = cell_quadrature(kind, 2).expect("order 2 exists");
    let mut points = Vec::new();
    let mut weights = Vec::new();
    let s = 1.0 / m as f64;
    match kind {
        CellKind::Tri3 => {
            let mut push_tri = |a: Vec2, b: Vec2, c: Vec2| {
                for (p, w) in base.iter() {
                    points.push(a + (b - a) * p.x + (c - a) * p.y);
                    weights.push(w * s * s);
                }
            };
            for j in 0..m {
                for i in 0..m - j {
                    let o = Vec2::new(i as f64, j as f64) * s;
                    push_tri(o, o + Vec2::new(s, 0.0), o + Vec2::new(0.0, s));
                    if i + j + 1 < m {
                        push_tri(o + Vec2::new(s, 0.0), o + Vec2::new(s, s), o + Vec2::new(0.0, s));
                    }
                }
            }
        }
        CellKind::Quad4 => {
            let side = 2.0 * s;
            for j in 0..m {
                for i in 0..m {
                    let c = Vec2::new(-1.0 + (i as f64 + 0.5) * side, -1.0 + (j as f64 + 0.5) * side);
                    for (p, w) in base.iter() {
                        points.push(c + p * s);
                        weights.push(w * s * s);
                    }
                }
            }
        }
    }
    QuadratureRule { points, weights }
}

/// Subdivisions per side used by [`error_norms`].
pub const ERROR_SUBDIVISIONS: usize = 4;

/// Exact solution with `ncomp` components: value and gradient per component.
pub struct ExactSolution<'a> {
    pub ncomp: usize,
    pub value: &'a (dyn Fn(Vec2) -> [f64; 2] + Sync),
    pub grad: &'a (dyn Fn(Vec2) -> [Vec2; 2] + Sync),
}

/// `L2` and `H1`-seminorm errors over `cells`.
///
/// `values` holds `ncomp` interleaved entries per mesh node. Each cell is
/// subdivided [`ERROR_SUBDIVISIONS`] times per side.
pub fn error_norms(mesh: &Mesh, cells: &[usize], values: &[f64], exact: &ExactSolution) -> Result<(f64, f64)> {
    let nc = exact.ncomp;
    if !(1..=2).contains(&nc) {
        return invalid("exact solution must have one or two components");
    }
    if values.len() != nc * mesh.num_nodes() {
        return invalid(format!(
            "expected {} nodal values, got {}",
            nc * mesh.num_nodes(),
            values.len()
        ));
    }
    let rule = composite_rule(mesh.kind(), ERROR_SUBDIVISIONS);
    let parts: Vec<(f64, f64)> = cells
        .par_iter()
        .map(|&c| {
            let map = CellMap::new(mesh, c);
            let nodes = mesh.cell(c);
            let (mut l2, mut h1) = (0.0, 0.0);
            for (xi, w) in rule.iter() {
                let det = map.jacobian(xi).determinant();
                let x = map.map(xi);
                let phi = map.values(xi);
                let grad = map.gradients(xi);
                let ue = (exact.value)(x);
                let ge = (exact.grad)(x);
                for comp in 0..nc {
                    let mut uh = 0.0;
                    let mut gh = Vec2::zeros();
                    for (k, &n) in nodes.iter().enumerate() {
                        let v = values[n * nc + comp];
                        uh += v * phi[k];
                        gh += grad[k] * v;
                    }
                    l2 += w * det * (uh - ue[comp]).powi(2);
                    h1 += w * det * (gh - ge[comp]).norm_squared();
                }
            }
            (l2, h1)
        })
        .collect();
    let (l2, h1) = parts.iter().fold((0.0, 0.0), |acc, p| (acc.0 + p.0, acc.1 + p.1));
    Ok((l2.sqrt(), h1.sqrt()))
}

/// Numbering of the unknowns: `ncomp` DOFs per active node, interleaved.
#[derive(Debug, Clone)]
pub struct DofMap {
    pub ncomp: usize,
    /// Mesh node of each block of `ncomp` DOFs.
    pub nodes: Vec<usize>,
    index: Vec<usize>,
}

impl DofMap {
    pub fn new(num_nodes: usize, active_nodes: &[usize], ncomp: usize) -> DofMap {
        let mut index = vec![usize::MAX; num_nodes];
        for (k, &n) in active_nodes.iter().enumerate() {
            index[n] = k;
        }
        DofMap {
            ncomp,
            nodes: active_nodes.to_vec(),
            index,
        }
    }

    pub fn len(&self) -> usize {
        self.ncomp * self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    #[inline]
    pub fn dof(&self, node: usize, comp: usize) -> Option<usize> {
        match self.index[node] {
            usize::MAX => None,
            k => Some(k * self.ncomp + comp),
        }
    }

    /// Scatters DOF values to all mesh nodes; inactive nodes get zero.
    pub fn expand(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.index.len() * self.ncomp];
        for (k, &n) in self.nodes.iter().enumerate() {
            for c in 0..self.ncomp {
                out[n * self.ncomp + c] = x[k * self.ncomp + c];
            }
        }
        out
    }
}

/// Nodal interpolant with `ncomp` interleaved components.
pub fn interpolate(mesh: &Mesh, ncomp: usize, f: impl Fn(Vec2) -> [f64; 2]) -> Vec<f64> {
    let mut out = Vec::with_capacity(ncomp * mesh.num_nodes());
    for &p in mesh.nodes() {
        let v = f(p);
        out.extend_from_slice(&v[..ncomp]);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_quad_grid, build_tri_grid};
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn integrate_ref(kind: CellKind, order: usize, f: impl Fn(Vec2) -> f64) -> f64 {
        cell_quadrature(kind, order)
            .unwrap()
            .iter()
            .map(|(p, w)| w * f(p))
            .sum()
    }

    #[test]
    fn tri_rules() {
        assert!((integrate_ref(CellKind::Tri3, 2, |p| p.x * p.y) - 1.0 / 24.0).abs() < 1e-15);
        assert!((integrate_ref(CellKind::Tri3, 2, |p| p.x * p.x) - 1.0 / 12.0).abs() < 1e-15);
        // x^2 y^2 over the unit triangle is 1/180
        assert!((integrate_ref(CellKind::Tri3, 3, |p| p.x * p.x * p.y * p.y) - 1.0 / 180.0).abs() < 1e-12);
        for order in 1..=3 {
            let r = cell_quadrature(CellKind::Tri3, order).unwrap();
            assert!((r.weights.iter().sum::<f64>() - 0.5).abs() < 1e-14);
            assert!(r.weights.iter().all(|&w| w > 0.0));
        }
    }

    #[test]
    fn quad_rules() {
        let v = integrate_ref(CellKind::Quad4, 2, |p| p.x * p.x * p.y * p.y);
        assert!((v - 4.0 / 9.0).abs() < 1e-15);
        assert!(integrate_ref(CellKind::Quad4, 2, |p| p.x.powi(3) * p.y).abs() < 1e-15);
        for order in 1..=3 {
            let r = cell_quadrature(CellKind::Quad4, order).unwrap();
            assert!((r.weights.iter().sum::<f64>() - 4.0).abs() < 1e-14);
        }
        assert!(cell_quadrature(CellKind::Quad4, 4).is_err());
        assert!(cell_quadrature(CellKind::Tri3, 0).is_err());
    }

    #[test]
    fn edge_rule() {
        let r = edge_quadrature(2).unwrap();
        let int = |f: &dyn Fn(f64) -> f64| r.iter().map(|(p, w)| w * f(p.x)).sum::<f64>();
        assert!(int(&|x| x.powi(3)).abs() < 1e-15);
        assert!((int(&|x| x * x) - 2.0 / 3.0).abs() < 1e-15);
        assert!((r.weights.iter().sum::<f64>() - 2.0).abs() < 1e-15);
        assert!(edge_quadrature(4).is_err());
    }

    #[test]
    fn edge_integral_of_trace_times_linear_jacobian() {
        // edge from a to b, trace u = 1 + 2x - y, factor j(s) = 1 + s along
        // the edge, s in [0, 1]
        let (a, b) = (Vec2::new(0.2, -0.4), Vec2::new(1.3, 0.9));
        let len = (b - a).norm();
        let r = edge_quadrature(2).unwrap();
        let got: f64 = r
            .iter()
            .map(|(p, w)| {
                let s = 0.5 * (p.x + 1.0);
                let x = a + (b - a) * s;
                0.5 * len * w * (1.0 + 2.0 * x.x - x.y) * (1.0 + s)
            })
            .sum();
        // u(s) = u0 + s du with u0 = u(a), du = u(b) - u(a);
        // int_0^1 (u0 + s du)(1 + s) ds = u0 * 3/2 + du * 5/6
        let u = |x: Vec2| 1.0 + 2.0 * x.x - x.y;
        let want = len * (u(a) * 1.5 + (u(b) - u(a)) * 5.0 / 6.0);
        assert!((got - want).abs() < 1e-13);
    }

    #[test]
    fn composite_rule_measure() {
        for kind in [CellKind::Tri3, CellKind::Quad4] {
            let r = composite_rule(kind, 4);
            assert!((r.weights.iter().sum::<f64>() - reference_measure(kind)).abs() < 1e-13);
            assert_eq!(r.len(), 16 * cell_quadrature(kind, 2).unwrap().len());
        }
    }

    #[test]
    fn constant_field_norms() {
        let mesh = build_quad_grid(8).unwrap();
        let cells: Vec<usize> = (0..mesh.num_cells()).collect();
        let ones = vec![1.0; mesh.num_nodes()];
        let one = |_: Vec2| [1.0, 0.0];
        let zero_g = |_: Vec2| [Vec2::zeros(); 2];
        let exact = ExactSolution {
            ncomp: 1,
            value: &one,
            grad: &zero_g,
        };
        let (l2, h1) = error_norms(&mesh, &cells, &ones, &exact).unwrap();
        assert!(l2 < 1e-14 && h1 < 1e-14);
        let zeros = vec![0.0; mesh.num_nodes()];
        let (norm, _) = error_norms(&mesh, &cells, &zeros, &exact).unwrap();
        assert!((norm - 1.0).abs() < 1e-13);
    }

    #[test]
    fn linear_field_seminorm_is_root_area() {
        let mesh = build_tri_grid(6, Vec2::new(0.5, 0.5), 0.0).unwrap();
        let cells: Vec<usize> = (0..mesh.num_cells())
            .filter(|&c| mesh.cell_centroid(c).x < 0.5)
            .collect();
        let area: f64 = cells.iter().map(|&c| mesh.cell_area(c)).sum();
        let zeros = vec![0.0; mesh.num_nodes()];
        let ux = |p: Vec2| [p.x, 0.0];
        let gx = |_: Vec2| [Vec2::new(1.0, 0.0), Vec2::zeros()];
        let exact = ExactSolution {
            ncomp: 1,
            value: &ux,
            grad: &gx,
        };
        let (_, h1) = error_norms(&mesh, &cells, &zeros, &exact).unwrap();
        assert!((h1 - area.sqrt()).abs() < 1e-13);
    }

    #[test]
    fn interpolation_error_is_second_order() {
        let u = |p: Vec2| [(4.0 * PI * p.x).sin() * (4.0 * PI * p.y).sin(), 0.0];
        let g = |p: Vec2| {
            let (sx, cx) = (4.0 * PI * p.x).sin_cos();
            let (sy, cy) = (4.0 * PI * p.y).sin_cos();
            [Vec2::new(4.0 * PI * cx * sy, 4.0 * PI * sx * cy), Vec2::zeros()]
        };
        let exact = ExactSolution {
            ncomp: 1,
            value: &u,
            grad: &g,
        };
        let err = |n: usize| {
            let mesh = build_tri_grid(n, Vec2::new(0.5, 0.5), 0.0).unwrap();
            let cells: Vec<usize> = (0..mesh.num_cells()).collect();
            let vals = interpolate(&mesh, 1, u);
            error_norms(&mesh, &cells, &vals, &exact).unwrap().0
        };
        let (e32, e64, e128) = (err(32), err(64), err(128));
        // C fitted from the two coarser levels predicts the finest within 10%
        let c = e64 / (1.0f64 / 64.0).powi(2);
        let rate = (e32 / e64).log2();
        assert!((rate - 2.0).abs() < 0.2, "rate {rate}");
        let predicted = c * (1.0f64 / 128.0).powi(2);
        assert!((e128 - predicted).abs() / predicted < 0.1);
    }

    #[test]
    fn rejects_wrong_value_count() {
        let mesh = build_quad_grid(2).unwrap();
        let f = |_: Vec2| [0.0; 2];
        let g = |_: Vec2| [Vec2::zeros(); 2];
        let exact = ExactSolution {
            ncomp: 1,
            value: &f,
            grad: &g,
        };
        assert!(error_norms(&mesh, &[0], &[0.0; 3], &exact).is_err());
    }

    #[test]
    fn bilinear_extension_reproduces_bilinear_fields() {
        let map = CellMap {
            kind: CellKind::Quad4,
            points: [
                Vec2::new(0.2, 0.1),
                Vec2::new(0.45, 0.1),
                Vec2::new(0.45, 0.3),
                Vec2::new(0.2, 0.3),
            ],
        };
        let u = |p: Vec2| 0.3 - 1.2 * p.x + 0.7 * p.y + 2.5 * p.x * p.y;
        let du = |p: Vec2| Vec2::new(-1.2 + 2.5 * p.y, 0.7 + 2.5 * p.x);
        for x in [Vec2::new(0.6, -0.2), Vec2::new(0.1, 0.35), Vec2::new(0.3, 0.2)] {
            let v = map.extension_values(x);
            let g = map.extension_gradients(x);
            let uh: f64 = (0..4).map(|k| v[k] * u(map.points[k])).sum();
            let gh: Vec2 = (0..4).map(|k| g[k] * u(map.points[k])).sum();
            assert!((uh - u(x)).abs() < 1e-13);
            assert!((gh - du(x)).norm() < 1e-12);
            assert!((map.map(map.locate(x)) - x).norm() < 1e-14);
        }
    }

    #[test]
    fn linear_extension_is_the_taylor_shift() {
        let map = CellMap {
            kind: CellKind::Tri3,
            points: [
                Vec2::new(0.1, 0.2),
                Vec2::new(0.9, 0.1),
                Vec2::new(0.3, 0.8),
                Vec2::zeros(),
            ],
        };
        let xi = Vec2::new(0.2, 0.3);
        let d = Vec2::new(0.37, -0.21);
        let a = map.shifted_values(xi, d);
        let b = map.extension_values(map.map(xi) + d);
        for k in 0..3 {
            assert!((a[k] - b[k]).abs() < 1e-14);
        }
    }

    #[test]
    fn shifted_basis_matches_linear_extension() {
        let map = CellMap {
            kind: CellKind::Tri3,
            points: [
                Vec2::new(0.1, 0.2),
                Vec2::new(0.9, 0.1),
                Vec2::new(0.3, 0.8),
                Vec2::zeros(),
            ],
        };
        let xi = Vec2::new(0.2, 0.3);
        let d = Vec2::new(0.37, -0.21);
        let shifted = map.shifted_values(xi, d);
        // the P1 basis extended linearly: evaluate at x + d through barycentric
        // coordinates of the shifted point
        let x = map.map(xi) + d;
        let j = map.jacobian(xi);
        let xi_shift = j.try_inverse().unwrap() * (x - map.points[0]);
        let direct = shape_values(CellKind::Tri3, xi_shift);
        for k in 0..3 {
            assert!((shifted[k] - direct[k]).abs() < 1e-14);
        }
    }

    #[test]
    fn shift_of_affine_field() {
        let g = Vec2::new(1.0, 1.0);
        let d = Vec2::new(0.1, 0.2);
        assert!((shift_eval(0.7, g, d) - 1.0).abs() < 1e-15);
        assert_eq!(shift_eval(0.7, g, Vec2::zeros()), 0.7);
    }

    fn arb_point(kind: CellKind) -> impl Strategy<Value = Vec2> {
        (0.0f64..1.0, 0.0f64..1.0).prop_map(move |(a, b)| match kind {
            CellKind::Tri3 => {
                if a + b > 1.0 {
                    Vec2::new(1.0 - a, 1.0 - b)
                } else {
                    Vec2::new(a, b)
                }
            }
            CellKind::Quad4 => Vec2::new(2.0 * a - 1.0, 2.0 * b - 1.0),
        })
    }

    proptest! {
        #[test]
        fn partition_of_unity_tri(xi in arb_point(CellKind::Tri3)) {
            let v = shape_values(CellKind::Tri3, xi);
            let g = shape_ref_gradients(CellKind::Tri3, xi);
            prop_assert!((v.iter().sum::<f64>() - 1.0).abs() < 1e-13);
            prop_assert!(g.iter().sum::<Vec2>().norm() < 1e-13);
        }

        #[test]
        fn partition_of_unity_quad(xi in arb_point(CellKind::Quad4)) {
            let v = shape_values(CellKind::Quad4, xi);
            let g = shape_ref_gradients(CellKind::Quad4, xi);
            prop_assert!((v.iter().sum::<f64>() - 1.0).abs() < 1e-13);
            prop_assert!(g.iter().sum::<Vec2>().norm() < 1e-13);
        }

        #[test]
        fn norms_are_homogeneous(alpha in -5.0f64..5.0) {
            let mesh = build_quad_grid(4).unwrap();
            let cells: Vec<usize> = (0..mesh.num_cells()).collect();
            let zero = |_: Vec2| [0.0; 2];
            let zero_g = |_: Vec2| [Vec2::zeros(); 2];
            let exact = ExactSolution { ncomp: 1, value: &zero, grad: &zero_g };
            let base: Vec<f64> = mesh.nodes().iter().map(|p| (3.0 * p.x).sin() + p.y * p.y).collect();
            let scaled: Vec<f64> = base.iter().map(|v| alpha * v).collect();
            let (l0, h0) = error_norms(&mesh, &cells, &base, &exact).unwrap();
            let (l1, h1) = error_norms(&mesh, &cells, &scaled, &exact).unwrap();
            prop_assert!((l1 - alpha.abs() * l0).abs() <= 1e-12 * l0.max(1.0));
            prop_assert!((h1 - alpha.abs() * h0).abs() <= 1e-12 * h0.max(1.0));
        }
    }
}
