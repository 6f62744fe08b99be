//! Gap-SBM assembly for isotropic linear elasticity,
//! `-div σ(u) = b` with `σ = 2μ ε(u) + λ (div u) I`.
//!
//! DOFs are interleaved `(u_x, u_y)` per active node. Boundary data follows
//! the same chord evaluation as the Poisson assembly.

use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{invalid, Result};
use crate::fem::{cell_quadrature, CellMap, DofMap};
use crate::geometry::BcKind;
use crate::linalg::{apply_strong_dirichlet, SparseSystem, TripletList};
use crate::mesh::Mesh;
use crate::poisson::{check_consistent, edge_points, gap_gradients, jump_samples, outer_values, Assembled};
use crate::surrogate::{SurrogateEdge, SurrogateModel};
use crate::Vec2;

pub type VectorField = Arc<dyn Fn(Vec2) -> Vec2 + Send + Sync>;
/// Traction as a function of position and outward normal.
pub type TractionField = Arc<dyn Fn(Vec2, Vec2) -> Vec2 + Send + Sync>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlaneMode {
    PlaneStrain,
    PlaneStress,
}

/// Lamé parameters `(λ, μ)` from Young's modulus and Poisson's ratio.
pub fn lame_from_e_nu(e: f64, nu: f64, mode: PlaneMode) -> Result<(f64, f64)> {
    if !(e > 0.0) {
        return invalid(format!("Young's modulus must be positive, got {e}"));
    }
    if !(nu > -1.0 && nu < 0.5) {
        return invalid(format!("Poisson's ratio must lie in (-1, 0.5), got {nu}"));
    }
    let mu = e / (2.0 * (1.0 + nu));
    let lambda = match mode {
        PlaneMode::PlaneStrain => e * nu / ((1.0 + nu) * (1.0 - 2.0 * nu)),
        PlaneMode::PlaneStress => e * nu / ((1.0 + nu) * (1.0 - nu)),
    };
    Ok((lambda, mu))
}

#[derive(Clone)]
pub struct ElasticityProblem {
    pub lambda: f64,
    pub mu: f64,
    pub b: VectorField,
    pub u_d: VectorField,
    pub t_n: TractionField,
    pub outer: VectorField,
    pub theta: f64,
    pub gamma: f64,
}

impl ElasticityProblem {
    /// Penalty coefficient scaled by the P-wave modulus.
    pub fn penalty(&self) -> f64 {
        self.gamma * (2.0 * self.mu + self.lambda)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mu > 0.0) || !(self.lambda >= 0.0) {
            return invalid("Lamé parameters need mu > 0 and lambda >= 0");
        }
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

    /// Traction `σ(φ e_d) n` of the vector basis function with scalar
    /// gradient `g` in component `d`.
    #[inline]
    fn traction(&self, g: Vec2, d: usize, n: Vec2) -> Vec2 {
        let mut t = Vec2::zeros();
        for c in 0..2 {
            let kron = if c == d { 1.0 } else { 0.0 };
            t[c] = self.mu * (kron * g.dot(&n) + g[c] * n[d]) + self.lambda * g[d] * n[c];
        }
        t
    }

    /// `σ(φ_j e_d) : ε(φ_i e_c)`.
    #[inline]
    fn energy(&self, gi: Vec2, c: usize, gj: Vec2, d: usize) -> f64 {
        let kron = if c == d { 1.0 } else { 0.0 };
        self.mu * (kron * gi.dot(&gj) + gi[d] * gj[c]) + self.lambda * gi[c] * gj[d]
    }

    /// Stress tensor of a displacement gradient `grad[(c, k)] = d u_c / d x_k`.
    pub fn stress(&self, grad: &nalgebra::Matrix2<f64>) -> nalgebra::Matrix2<f64> {
        let eps = (grad + grad.transpose()) * 0.5;
        eps * (2.0 * self.mu) + nalgebra::Matrix2::identity() * (self.lambda * grad.trace())
    }
}

struct LocalBlock {
    dofs: [usize; 8],
    n: usize,
    k: [[f64; 8]; 8],
    f: [f64; 8],
}

fn bulk_block(mesh: &Mesh, dofs: &DofMap, cell: usize, p: &ElasticityProblem) -> LocalBlock {
    let map = CellMap::new(mesh, cell);
    let nn = map.num_nodes();
    let rule = cell_quadrature(mesh.kind(), 2).expect("order 2 exists");
    let mut blk = LocalBlock {
        dofs: [0; 8],
        n: 2 * nn,
        k: [[0.0; 8]; 8],
        f: [0.0; 8],
    };
    for (a, &node) in mesh.cell(cell).iter().enumerate() {
        for c in 0..2 {
            blk.dofs[2 * a + c] = dofs.dof(node, c).expect("active cell node");
        }
    }
    for (xi, w) in rule.iter() {
        let wd = w * map.jacobian(xi).determinant();
        let g = map.gradients(xi);
        let phi = map.values(xi);
        let bx = (p.b)(map.map(xi));
        for a in 0..nn {
            for c in 0..2 {
                blk.f[2 * a + c] += wd * bx[c] * phi[a];
                for b in 0..nn {
                    for d in 0..2 {
                        blk.k[2 * a + c][2 * b + d] += wd * p.energy(g[a], c, g[b], d);
                    }
                }
            }
        }
    }
    blk
}

fn edge_terms(
    mesh: &Mesh,
    dofs: &DofMap,
    se: &SurrogateEdge,
    p: &ElasticityProblem,
    trips: &mut TripletList,
    rhs: &mut [f64],
) {
    let map = CellMap::new(mesh, se.cell);
    let nn = map.num_nodes();
    let cell = mesh.cell(se.cell);
    let dof = |a: usize, c: usize| dofs.dof(cell[a], c).expect("active cell node");
    let h = mesh.cell_diameter(se.cell);
    let nrm = se.chord_normal;
    let (area, gg) = gap_gradients(&map, se);
    for a in 0..nn {
        for c in 0..2 {
            for b in 0..nn {
                for dd in 0..2 {
                    trips.add(dof(a, c), dof(b, dd), area * p.energy(gg[a], c, gg[b], dd));
                }
            }
        }
    }
    for (s, wq) in edge_points() {
        let w = wq * se.length;
        let xi = se.ref_point(&map, s);
        let x = se.point_at(s);
        let y = x + se.d_at(s);
        let phi = map.values(xi);
        let bx = (p.b)(x);
        let shifted = map.extension_values(y);
        let g = map.extension_gradients(y);
        for a in 0..nn {
            for c in 0..2 {
                rhs[dof(a, c)] += w * se.h_e * bx[c] * phi[a];
            }
        }
        let wj = w * se.j_e;
        match se.bc {
            BcKind::Neumann => {
                let t = (p.t_n)(y, nrm);
                for a in 0..nn {
                    for c in 0..2 {
                        rhs[dof(a, c)] += wj * t[c] * shifted[a];
                    }
                }
            }
            BcKind::Dirichlet => {
                let ud = (p.u_d)(y);
                let pen = p.penalty() / h;
                for a in 0..nn {
                    for c in 0..2 {
                        let ta = p.traction(g[a], c, nrm);
                        rhs[dof(a, c)] += wj * (-p.theta * ta.dot(&ud) + pen * shifted[a] * ud[c]);
                        for b in 0..nn {
                            for dd in 0..2 {
                                let tb = p.traction(g[b], dd, nrm);
                                let kron = if c == dd { 1.0 } else { 0.0 };
                                let v = -shifted[a] * tb[c] - p.theta * ta[dd] * shifted[b]
                                    + pen * kron * shifted[a] * shifted[b];
                                trips.add(dof(a, c), dof(b, dd), wj * v);
                            }
                        }
                    }
                }
            }
        }
    }
}

fn jump_terms(mesh: &Mesh, dofs: &DofMap, sur: &SurrogateModel, p: &ElasticityProblem, trips: &mut TripletList) {
    for sn in &sur.nodes {
        let dn = sn.d.norm();
        for pair in &sn.pairs {
            let samples = jump_samples(mesh, sn.node, sn.d, pair);
            let h = 0.5 * (mesh.cell_diameter(pair.plus_cell) + mesh.cell_diameter(pair.minus_cell));
            let pen = p.penalty() / h * dn;
            for (k, q) in samples.iter().enumerate() {
                let wq = dn * q.weight;
                let pk = if k == 0 { pen } else { 0.0 };
                for &(na, ja, avg_a) in &q.basis {
                    for c in 0..2 {
                        let ta = p.traction(avg_a, c, pair.n_plus);
                        let ra = dofs.dof(na, c).expect("active");
                        for &(nb, jb, avg_b) in &q.basis {
                            for d in 0..2 {
                                let tb = p.traction(avg_b, d, pair.n_plus);
                                let kron = if c == d { 1.0 } else { 0.0 };
                                let v = -wq * (ja * tb[c] + p.theta * ta[d] * jb) + pk * kron * ja * jb;
                                trips.add(ra, dofs.dof(nb, d).expect("active"), v);
                            }
                        }
                    }
                }
            }
        }
    }
}

pub fn assemble_elasticity(mesh: &Mesh, sur: &SurrogateModel, problem: &ElasticityProblem) -> Result<Assembled> {
    problem.validate()?;
    check_consistent(mesh, sur)?;
    let dofs = DofMap::new(mesh.num_nodes(), &sur.active_nodes, 2);
    let n = dofs.len();
    let mut trips = TripletList::new(n);
    let mut rhs = vec![0.0; n];

    let blocks: Vec<LocalBlock> = sur
        .active_cells
        .par_iter()
        .map(|&c| bulk_block(mesh, &dofs, c, problem))
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
    let (idx, val) = outer_values(sur, &dofs, 2, |x, c| (problem.outer)(x)[c], mesh);
    let system = apply_strong_dirichlet(&raw, &idx, &val)?;
    Ok(Assembled { dofs, raw, system })
}
