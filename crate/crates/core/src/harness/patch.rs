//! Patch tests: affine exact solutions must be reproduced to round-off.

use std::sync::Arc;

use super::cases::{make_shape, Case, Geometry, PATCH_SQUARE_DEG, PIVOT};
use crate::error::{Error, Result};
use crate::geometry::BcRule;
use crate::mesh::build_tri_grid;
use crate::poisson::{assemble, PoissonProblem};
use crate::surrogate::build_surrogate;
use crate::Vec2;

pub const PATCH_CELLS: usize = 20;
pub const PATCH_TOL: f64 = 1e-9;

/// Exact affine solution `u = c . x` of a patch case.
pub fn patch_gradient(case: Case) -> Result<Vec2> {
    match case {
        Case::PatchCircle => Ok(Vec2::new(1.0, 1.0)),
        Case::PatchSquare => Ok(Vec2::new(1.0, 0.0)),
        Case::PatchStar => Ok(Vec2::new(0.0, 1.0)),
        _ => Err(Error::Config(format!("{case} is not a patch test"))),
    }
}

/// Antisymmetric, penalty-free solve with Neumann data on the embedded shape
/// and strong Dirichlet data on the grid boundary. Returns the largest nodal
/// error over active nodes.
pub fn run_patch(case: Case) -> Result<f64> {
    let c = patch_gradient(case)?;
    let (geometry, rotation) = match case {
        Case::PatchCircle => (Geometry::Circle, 0.0),
        Case::PatchSquare => (Geometry::Square, PATCH_SQUARE_DEG),
        _ => (Geometry::Star, 0.0),
    };
    let mesh = build_tri_grid(PATCH_CELLS, PIVOT, 0.0)?;
    let shape = make_shape(geometry, rotation, BcRule::AllNeumann)?;
    let sur = build_surrogate(&mesh, &shape)?;
    let u = Arc::new(move |x: Vec2| c.dot(&x));
    let problem = PoissonProblem {
        f: Arc::new(|_| 0.0),
        u_d: u.clone(),
        h_n: Arc::new(move |_, n| c.dot(&n)),
        outer: u.clone(),
        theta: -1.0,
        gamma: 0.0,
    };
    let values = assemble(&mesh, &sur, &problem)?.solve()?;
    Ok(sur
        .active_nodes
        .iter()
        .map(|&n| (values[n] - u(mesh.node(n))).abs())
        .fold(0.0, f64::max))
}
