//! Gap-SBM assembly for `-Δu = f`.
//!
//! Boundary data on a surrogate edge is evaluated on the chord joining the
//! projected endpoints, at `x~ + d(x~)` with `d` interpolated linearly along
//! the edge, and with the chord normal. Both choices make the discrete
//! problem exact for affine solutions on polygonal gaps.

use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{invalid, Result};
use crate::fem::{cell_quadrature, edge_quadrature, CellMap, DofMap};
use crate::geometry::BcKind;
use crate::linalg::{self, CsrMatrix, SparseSystem, TripletList};
use crate::mesh::Mesh;
use crate::surrogate::{JumpPair, SurrogateEdge, SurrogateModel};
use crate::Vec2;

pub use crate::linalg::apply_strong_dirichlet;

pub type ScalarField = Arc<dyn Fn(Vec2) -> f64 + Send + Sync>;
/// Boundary flux as a function of position and outward normal.
pub type FluxField = Arc<dyn Fn(Vec2, Vec2) -> f64 + Send + Sync>;

#[derive(Clone)]
pub struct PoissonProblem {
    pub f: ScalarField,
    pub u_d: ScalarField,
    pub h_n: FluxField,
    /// Trace imposed strongly on active nodes of the grid's outer boundary.
    pub outer: ScalarField,
    pub theta: f64,
    pub gamma: f64,
}

impl PoissonProblem {
    pub fn validate(&self) -> Result<()> {
        if self.theta != 1.0 && self.theta != -1.0 {
            return invalid(format!("theta must be 1 or -1, got {}", self.theta));
        }
        if !(self.gamma >= 0.0) {
            return invalid("gamma must be nonnegative");
        }
        if self.theta == 1.0 && self.gamma == 0.0 {
            return invalid("the symmetric variant needs a positive penalty");
        }
        Ok(())
    }
}

/// An assembled system before and after strong elimination of the outer
/// boundary DOFs.
#[derive(Debug, Clone)]
pub struct Assembled {
    pub dofs: DofMap,
    pub raw: SparseSystem,
    pub system: SparseSystem,
}

impl Assembled {
    /// Solves and scatters the result to mesh nodes.
    pub fn solve(&self) -> Result<Vec<f64>> {
        let x = linalg::solve(&self.system)?;
        Ok(self.dofs.expand(&x))
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.system.matrix
    }
}

pub(crate) fn check_consistent(mesh: &Mesh, sur: &SurrogateModel) -> Result<()> {
    if sur.is_active.len() != mesh.num_cells() {
        return invalid("surrogate model was built on a different mesh");
    }
    Ok(())
}

/// Two-point Gauss points on an edge as `(s, weight)` with `s` in [0, 1] and
/// weights summing to one.
pub(crate) fn edge_points() -> Vec<(f64, f64)> {
    edge_quadrature(2)
        .expect("order 2 exists")
        .iter()
        .map(|(p, w)| (0.5 * (p.x + 1.0), 0.5 * w))
        .collect()
}

/// One point on a lateral gap edge: Simpson weight and, per mesh node, the
/// jump of the extended basis and its average gradient.
pub(crate) struct JumpSample {
    pub weight: f64,
    pub basis: Vec<(usize, f64, Vec2)>,
}

/// Samples of the lateral edge from `node` along `d` at its midpoint and its
/// far end; the jump vanishes at the node itself. The midpoint comes first.
pub(crate) fn jump_samples(mesh: &Mesh, node: usize, d: Vec2, pair: &JumpPair) -> [JumpSample; 2] {
    let x0 = mesh.node(node);
    [(0.5, 4.0 / 6.0), (1.0, 1.0 / 6.0)].map(|(t, weight)| {
        let x = x0 + d * t;
        let mut basis: Vec<(usize, f64, Vec2)> = Vec::with_capacity(8);
        for (cell, sign) in [(pair.plus_cell, 1.0), (pair.minus_cell, -1.0)] {
            let map = CellMap::new(mesh, cell);
            let v = map.extension_values(x);
            let g = map.extension_gradients(x);
            for (k, &n) in mesh.cell(cell).iter().enumerate() {
                match basis.iter_mut().find(|e| e.0 == n) {
                    Some(e) => {
                        e.1 += sign * v[k];
                        e.2 += g[k] * 0.5;
                    }
                    None => basis.push((n, sign * v[k], g[k] * 0.5)),
                }
            }
        }
        JumpSample { weight, basis }
    })
}

/// Gap stiffness data of an edge: extension-quad area and the attached
/// cell's extended gradients at the quad centroid.
pub(crate) fn gap_gradients(map: &CellMap, se: &SurrogateEdge) -> (f64, [Vec2; 4]) {
    (se.h_e * se.length, map.extension_gradients(se.gap_centroid()))
}

pub(crate) fn outer_values(
    sur: &SurrogateModel,
    dofs: &DofMap,
    comps: usize,
    g: impl Fn(Vec2, usize) -> f64,
    mesh: &Mesh,
) -> (Vec<usize>, Vec<f64>) {
    let mut idx = Vec::new();
    let mut val = Vec::new();
    for &n in &sur.outer_dirichlet_nodes {
        for c in 0..comps {
            idx.push(dofs.dof(n, c).expect("outer node is active"));
            val.push(g(mesh.node(n), c));
        }
    }
    (idx, val)
}

struct LocalBlock {
    dofs: [usize; 4],
    n: usize,
    k: [[f64; 4]; 4],
    f: [f64; 4],
}

fn bulk_block(mesh: &Mesh, dofs: &DofMap, cell: usize, f: &ScalarField) -> LocalBlock {
    let map = CellMap::new(mesh, cell);
    let n = map.num_nodes();
    let rule = cell_quadrature(mesh.kind(), 2).expect("order 2 exists");
    let mut blk = LocalBlock {
        dofs: [0; 4],
        n,
        k: [[0.0; 4]; 4],
        f: [0.0; 4],
    };
    for (k, &node) in mesh.cell(cell).iter().enumerate() {
        blk.dofs[k] = dofs.dof(node, 0).expect("active cell node");
    }
    for (xi, w) in rule.iter() {
        let det = map.jacobian(xi).determinant();
        let g = map.gradients(xi);
        let phi = map.values(xi);
        let fx = f(map.map(xi));
        for a in 0..n {
            blk.f[a] += w * det * fx * phi[a];
            for b in 0..n {
                blk.k[a][b] += w * det * g[a].dot(&g[b]);
            }
        }
    }
    blk
}

fn edge_terms(
    mesh: &Mesh,
    dofs: &DofMap,
    se: &SurrogateEdge,
    p: &PoissonProblem,
    trips: &mut TripletList,
    rhs: &mut [f64],
) {
    let map = CellMap::new(mesh, se.cell);
    let n = map.num_nodes();
    let cell = mesh.cell(se.cell);
    let dof: Vec<usize> = cell
        .iter()
        .map(|&v| dofs.dof(v, 0).expect("active cell node"))
        .collect();
    let h = mesh.cell_diameter(se.cell);
    let nrm = se.chord_normal;
    let (area, gg) = gap_gradients(&map, se);
    for a in 0..n {
        for b in 0..n {
            trips.add(dof[a], dof[b], area * gg[a].dot(&gg[b]));
        }
    }
    for (s, wq) in edge_points() {
        let w = wq * se.length;
        let xi = se.ref_point(&map, s);
        let x = se.point_at(s);
        let y = x + se.d_at(s);
        let phi = map.values(xi);
        let fx = (p.f)(x);
        let shifted = map.extension_values(y);
        let g = map.extension_gradients(y);
        for a in 0..n {
            rhs[dof[a]] += w * se.h_e * fx * phi[a];
        }
        let wj = w * se.j_e;
        match se.bc {
            BcKind::Neumann => {
                let hn = (p.h_n)(y, nrm);
                for a in 0..n {
                    rhs[dof[a]] += wj * hn * shifted[a];
                }
            }
            BcKind::Dirichlet => {
                let ud = (p.u_d)(y);
                let pen = p.gamma / h;
                for a in 0..n {
                    let gn_a = g[a].dot(&nrm);
                    rhs[dof[a]] += wj * (-p.theta * gn_a * ud + pen * shifted[a] * ud);
                    for b in 0..n {
                        let gn_b = g[b].dot(&nrm);
                        let v = -shifted[a] * gn_b - p.theta * gn_a * shifted[b] + pen * shifted[a] * shifted[b];
                        trips.add(dof[a], dof[b], wj * v);
                    }
                }
            }
        }
    }
}

/// Node jump and jump-penalty terms of every pair in the model.
fn jump_terms(mesh: &Mesh, dofs: &DofMap, sur: &SurrogateModel, p: &PoissonProblem, trips: &mut TripletList) {
    for sn in &sur.nodes {
        let dn = sn.d.norm();
        for pair in &sn.pairs {
            let samples = jump_samples(mesh, sn.node, sn.d, pair);
            let h = 0.5 * (mesh.cell_diameter(pair.plus_cell) + mesh.cell_diameter(pair.minus_cell));
            for q in &samples {
                let wq = dn * q.weight;
                for &(na, ja, ga) in &q.basis {
                    let aa = ga.dot(&pair.n_plus);
                    let ra = dofs.dof(na, 0).expect("active");
                    for &(nb, jb, gb) in &q.basis {
                        let v = -wq * (ja * gb.dot(&pair.n_plus) + p.theta * aa * jb);
                        trips.add(ra, dofs.dof(nb, 0).expect("active"), v);
                    }
                }
            }
            let pen = p.gamma / h * dn;
            for &(na, ja, _) in &samples[0].basis {
                let ra = dofs.dof(na, 0).expect("active");
                for &(nb, jb, _) in &samples[0].basis {
                    trips.add(ra, dofs.dof(nb, 0).expect("active"), pen * ja * jb);
                }
            }
        }
    }
}

pub fn assemble(mesh: &Mesh, sur: &SurrogateModel, problem: &PoissonProblem) -> Result<Assembled> {
    problem.validate()?;
    check_consistent(mesh, sur)?;
    let dofs = DofMap::new(mesh.num_nodes(), &sur.active_nodes, 1);
    let n = dofs.len();
    let mut trips = TripletList::new(n);
    let mut rhs = vec![0.0; n];

    let blocks: Vec<LocalBlock> = sur
        .active_cells
        .par_iter()
        .map(|&c| bulk_block(mesh, &dofs, c, &problem.f))
        .collect();
    for blk in &blocks {
        for a in 0..blk.n {
            rhs[blk.dofs[a]] += blk.f[a];
            for b in 0..blk.n {
                trips.add(blk.dofs[a], blk.dofs[b], blk.k[a][b]);
            }
        }
    }
    for se in &sur.edges {
        edge_terms(mesh, &dofs, se, problem, &mut trips, &mut rhs);
    }
    jump_terms(mesh, &dofs, sur, problem, &mut trips);

    let raw = SparseSystem::new(trips.to_csr()?, rhs)?;
    let (idx, val) = outer_values(sur, &dofs, 1, |x, _| (problem.outer)(x), mesh);
    let system = apply_strong_dirichlet(&raw, &idx, &val)?;
    Ok(Assembled { dofs, raw, system })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{make_flower, make_star, BcRule, DomainSide, Shape};
    use crate::mesh::{build_quad_grid, build_tri_grid, CellKind};
    use crate::surrogate::build_surrogate;
    use proptest::prelude::*;

    fn affine_problem(a: f64, b: f64, c: f64, theta: f64, gamma: f64) -> PoissonProblem {
        let u: ScalarField = Arc::new(move |x: Vec2| a + b * x.x + c * x.y);
        PoissonProblem {
            f: Arc::new(|_| 0.0),
            u_d: u.clone(),
            h_n: Arc::new(move |_, n: Vec2| b * n.x + c * n.y),
            outer: u,
            theta,
            gamma,
        }
    }

    fn max_nodal_error(mesh: &Mesh, sur: &SurrogateModel, uh: &[f64], u: impl Fn(Vec2) -> f64) -> f64 {
        sur.active_nodes
            .iter()
            .map(|&n| (uh[n] - u(mesh.node(n))).abs())
            .fold(0.0, f64::max)
    }

    fn shapes() -> Vec<Shape> {
        let c = Vec2::new(0.5, 0.5);
        vec![
            Shape::circle(Vec2::new(0.6, 0.5), 0.25, DomainSide::Outside, BcRule::AllNeumann).unwrap(),
            Shape::circle(
                Vec2::new(0.6, 0.5),
                0.25,
                DomainSide::Outside,
                BcRule::DirichletWhereXAtMost(0.6),
            )
            .unwrap(),
            Shape::square(c, 0.48, 0.4, DomainSide::Outside, BcRule::AllNeumann).unwrap(),
            make_star(c, 0.3, 0.15, 5, DomainSide::Outside, BcRule::DirichletWhereXAtMost(0.5)).unwrap(),
            make_flower(DomainSide::Outside, BcRule::AllDirichlet).unwrap(),
        ]
    }

    #[test]
    fn reference_triangle_stiffness() {
        let mesh = Mesh::from_cells(
            vec![Vec2::new(0.0, 0.0), Vec2::new(1.0, 0.0), Vec2::new(0.0, 1.0)],
            CellKind::Tri3,
            vec![0, 1, 2],
        )
        .unwrap();
        let sur = build_surrogate(&mesh, &Shape::unbounded()).unwrap();
        let a = assemble(&mesh, &sur, &affine_problem(0.0, 0.0, 0.0, -1.0, 0.0)).unwrap();
        let want = [[1.0, -0.5, -0.5], [-0.5, 0.5, 0.0], [-0.5, 0.0, 0.5]];
        for i in 0..3 {
            for j in 0..3 {
                assert!((a.raw.matrix.get(i, j) - want[i][j]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn body_fitted_matches_standard_stiffness() {
        // square hole on grid lines: all distances vanish and the system
        // is the plain Q1 stiffness on the active cells
        let mesh = build_quad_grid(10).unwrap();
        let shape = Shape::polygon(
            vec![
                Vec2::new(0.3, 0.3),
                Vec2::new(0.7, 0.3),
                Vec2::new(0.7, 0.6),
                Vec2::new(0.3, 0.6),
            ],
            DomainSide::Outside,
            BcRule::AllNeumann,
        )
        .unwrap();
        let sur = build_surrogate(&mesh, &shape).unwrap();
        let a = assemble(&mesh, &sur, &affine_problem(0.0, 1.0, 0.0, -1.0, 0.0)).unwrap();
        let ke = [
            [4.0, -1.0, -2.0, -1.0],
            [-1.0, 4.0, -1.0, -2.0],
            [-2.0, -1.0, 4.0, -1.0],
            [-1.0, -2.0, -1.0, 4.0],
        ];
        let n = a.dofs.len();
        let mut want = vec![vec![0.0; n]; n];
        for &c in &sur.active_cells {
            let cn = mesh.cell(c);
            for i in 0..4 {
                for j in 0..4 {
                    want[a.dofs.dof(cn[i], 0).unwrap()][a.dofs.dof(cn[j], 0).unwrap()] += ke[i][j] / 6.0;
                }
            }
        }
        let got = a.raw.matrix.to_dense();
        let scale = a.raw.matrix.max_abs();
        for i in 0..n {
            for j in 0..n {
                assert!((got[i][j] - want[i][j]).abs() <= 1e-12 * scale);
            }
        }
    }

    #[test]
    fn symmetric_variant_is_symmetric() {
        for mesh in [
            build_tri_grid(16, Vec2::new(0.5, 0.5), 0.3).unwrap(),
            build_quad_grid(20).unwrap(),
        ] {
            for shape in shapes() {
                let sur = build_surrogate(&mesh, &shape).unwrap();
                let a = assemble(&mesh, &sur, &affine_problem(1.0, 2.0, 3.0, 1.0, 10.0)).unwrap();
                let m = &a.raw.matrix;
                assert!(m.max_asymmetry() <= 1e-12 * m.max_abs());
                let anti = assemble(&mesh, &sur, &affine_problem(1.0, 2.0, 3.0, -1.0, 0.0)).unwrap();
                assert!(anti.raw.matrix.max_asymmetry() > 1e-6 * anti.raw.matrix.max_abs());
            }
        }
    }

    #[test]
    fn patch_circle_x_plus_y() {
        let mesh = build_tri_grid(20, Vec2::new(0.5, 0.5), 0.0).unwrap();
        let shape = Shape::circle(Vec2::new(0.6, 0.5), 0.25, DomainSide::Outside, BcRule::AllNeumann).unwrap();
        let sur = build_surrogate(&mesh, &shape).unwrap();
        let a = assemble(&mesh, &sur, &affine_problem(0.0, 1.0, 1.0, -1.0, 0.0)).unwrap();
        let uh = a.solve().unwrap();
        assert!(max_nodal_error(&mesh, &sur, &uh, |x| x.x + x.y) <= 1e-10);
    }

    #[test]
    fn jump_labels_are_interchangeable() {
        let mesh = build_tri_grid(16, Vec2::new(0.5, 0.5), 0.2).unwrap();
        let shape = &shapes()[3];
        let sur = build_surrogate(&mesh, shape).unwrap();
        let mut swapped = sur.clone();
        for sn in &mut swapped.nodes {
            for p in &mut sn.pairs {
                std::mem::swap(&mut p.plus_edge, &mut p.minus_edge);
                std::mem::swap(&mut p.plus_cell, &mut p.minus_cell);
                p.n_plus = -p.n_plus;
            }
        }
        for (theta, gamma) in [(1.0, 10.0), (-1.0, 0.0)] {
            let p = affine_problem(0.0, 1.0, 0.0, theta, gamma);
            let a = assemble(&mesh, &sur, &p).unwrap().raw.matrix;
            let b = assemble(&mesh, &swapped, &p).unwrap().raw.matrix;
            let diff = a.add_scaled(1.0, &b, -1.0).unwrap();
            assert!(diff.max_abs() <= 1e-13 * a.max_abs());
        }
    }

    #[test]
    fn rejects_bad_parameters() {
        let mesh = build_quad_grid(4).unwrap();
        let sur = build_surrogate(&mesh, &Shape::unbounded()).unwrap();
        assert!(assemble(&mesh, &sur, &affine_problem(0.0, 0.0, 0.0, 1.0, 0.0)).is_err());
        assert!(assemble(&mesh, &sur, &affine_problem(0.0, 0.0, 0.0, 0.5, 1.0)).is_err());
        let other = build_quad_grid(5).unwrap();
        assert!(assemble(&other, &sur, &affine_problem(0.0, 0.0, 0.0, -1.0, 0.0)).is_err());
    }

    #[test]
    fn assembly_is_deterministic() {
        let mesh = build_tri_grid(16, Vec2::new(0.5, 0.5), 0.1).unwrap();
        let sur = build_surrogate(&mesh, &shapes()[3]).unwrap();
        let p = affine_problem(0.3, 1.0, -2.0, -1.0, 0.0);
        let a = assemble(&mesh, &sur, &p).unwrap();
        let b = assemble(&mesh, &sur, &p).unwrap();
        assert_eq!(a.system.matrix, b.system.matrix);
        assert!(a
            .system
            .rhs
            .iter()
            .zip(&b.system.rhs)
            .all(|(x, y)| x.to_bits() == y.to_bits()));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn affine_exactness(
            a in -1.0f64..1.0, b in -2.0f64..2.0, c in -2.0f64..2.0,
            which in 0usize..5, angle in 0.0f64..0.8, sym in proptest::bool::ANY, quad in proptest::bool::ANY,
        ) {
            let mesh = if quad {
                build_quad_grid(20).unwrap()
            } else {
                build_tri_grid(20, Vec2::new(0.5, 0.5), angle).unwrap()
            };
            let shape = &shapes()[which];
            let sur = build_surrogate(&mesh, shape).unwrap();
            let (theta, gamma) = if sym { (1.0, 10.0) } else { (-1.0, 0.0) };
            let asm = assemble(&mesh, &sur, &affine_problem(a, b, c, theta, gamma)).unwrap();
            let uh = asm.solve().unwrap();
            let err = max_nodal_error(&mesh, &sur, &uh, |x| a + b * x.x + c * x.y);
            prop_assert!(err <= 1e-9, "error {err}");
        }
    }
}
