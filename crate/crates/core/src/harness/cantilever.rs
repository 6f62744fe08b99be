//! Embedded cantilever beam under a distributed top load.

use std::sync::Arc;

use log::info;

use crate::elasticity::{assemble_elasticity, lame_from_e_nu, ElasticityProblem, PlaneMode};
use crate::error::{Error, Result};
use crate::fem::CellMap;
use crate::geometry::{BcRule, DomainSide, Shape};
use crate::mesh::{build_quad_rect, Mesh};
use crate::surrogate::{build_surrogate, SurrogateModel};
use crate::Vec2;

pub const BEAM_LENGTH: f64 = 20.0;
pub const BEAM_HEIGHT: f64 = 1.0;
pub const BEAM_LOAD: f64 = 1e-3;
pub const BEAM_E: f64 = 1e5;
pub const BEAM_NU: f64 = 0.3;
/// Background cells per unit length on level 0.
pub const BEAM_BASE_CELLS: usize = 3;
/// Grid offset in cells; keeps the beam faces off grid lines.
const GRID_SHIFT: f64 = 0.3;

/// Euler-Bernoulli tip deflection `q L^4 / (8 E I)` with `I = H^3 / 12`.
pub fn reference_deflection() -> f64 {
    let i = BEAM_HEIGHT.powi(3) / 12.0;
    BEAM_LOAD * BEAM_LENGTH.powi(4) / (8.0 * BEAM_E * i)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BeamLevel {
    pub level: usize,
    pub cells_per_unit: usize,
    pub segments: usize,
    pub dofs: usize,
    /// Most negative vertical displacement on the true boundary.
    pub tip: f64,
    /// `|tip| / reference`.
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CantileverResult {
    pub reference: f64,
    pub levels: Vec<BeamLevel>,
}

pub fn beam_shape() -> Result<Shape> {
    Shape::rectangle(
        Vec2::new(BEAM_LENGTH / 2.0, BEAM_HEIGHT / 2.0),
        Vec2::new(BEAM_LENGTH, BEAM_HEIGHT),
        0.0,
        DomainSide::Inside,
        BcRule::DirichletWhereXAtMost(1e-9),
    )
}

/// Background grid with `m` cells per unit length covering the beam.
pub fn beam_grid(m: usize) -> Result<Mesh> {
    let h = 1.0 / m as f64;
    let lo = Vec2::new(-0.5 - GRID_SHIFT * h, -0.5 - GRID_SHIFT * h);
    let nx = (BEAM_LENGTH as usize + 1) * m + 1;
    let ny = (BEAM_HEIGHT as usize + 1) * m;
    build_quad_rect(lo, lo + Vec2::new(nx as f64 * h, ny as f64 * h), nx, ny)
}

pub fn beam_problem() -> Result<ElasticityProblem> {
    let (lambda, mu) = lame_from_e_nu(BEAM_E, BEAM_NU, PlaneMode::PlaneStress)?;
    let zero = Arc::new(|_: Vec2| Vec2::zeros());
    Ok(ElasticityProblem {
        lambda,
        mu,
        b: zero.clone(),
        u_d: zero.clone(),
        t_n: Arc::new(|_, n: Vec2| {
            if n.y > 0.5 {
                Vec2::new(0.0, -BEAM_LOAD)
            } else {
                Vec2::zeros()
            }
        }),
        outer: zero,
        theta: -1.0,
        gamma: 0.0,
    })
}

/// Smallest vertical displacement over the true-boundary images of the
/// surrogate boundary nodes, evaluated through the attached cells.
pub fn min_shifted_uy(mesh: &Mesh, sur: &SurrogateModel, values: &[f64]) -> f64 {
    let mut best = f64::INFINITY;
    for e in &sur.edges {
        let map = CellMap::new(mesh, e.cell);
        for x in e.ext {
            let v = map.extension_values(x);
            let uy: f64 = mesh
                .cell(e.cell)
                .iter()
                .enumerate()
                .map(|(a, &n)| v[a] * values[2 * n + 1])
                .sum();
            best = best.min(uy);
        }
    }
    best
}

pub fn solve_level(level: usize) -> Result<BeamLevel> {
    let m = BEAM_BASE_CELLS << level;
    let mesh = beam_grid(m)?;
    let sur = build_surrogate(&mesh, &beam_shape()?)?;
    let assembled = assemble_elasticity(&mesh, &sur, &beam_problem()?)?;
    let values = assembled.solve()?;
    let tip = min_shifted_uy(&mesh, &sur, &values);
    let out = BeamLevel {
        level,
        cells_per_unit: m,
        segments: sur.edges.len(),
        dofs: assembled.dofs.len(),
        tip,
        ratio: tip.abs() / reference_deflection(),
    };
    info!(
        "beam level {level}: segments {} tip {:.6e} ratio {:.5}",
        out.segments, tip, out.ratio
    );
    Ok(out)
}

pub fn run_cantilever(levels: usize) -> Result<CantileverResult> {
    if levels < 3 {
        return Err(Error::Config("the beam study needs at least 3 levels".into()));
    }
    let levels = (0..levels).map(solve_level).collect::<Result<Vec<_>>>()?;
    Ok(CantileverResult {
        reference: reference_deflection(),
        levels,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_value() {
        assert!((reference_deflection() - 0.0024).abs() < 1e-15);
    }

    #[test]
    fn grid_covers_beam_without_fitting() {
        let mesh = beam_grid(3).unwrap();
        let sur = build_surrogate(&mesh, &beam_shape().unwrap()).unwrap();
        assert!(sur.outer_dirichlet_nodes.is_empty());
        assert!(sur.edges.iter().all(|e| e.d[0].norm() > 0.0));
        // 59 edges along each long face, 2 across each end
        assert_eq!(sur.edges.len(), 122);
    }

    #[test]
    fn coarse_level_deflects_down() {
        let l = solve_level(0).unwrap();
        assert!(l.tip < 0.0);
        assert!(l.ratio > 0.5 && l.ratio < 1.5, "ratio {}", l.ratio);
    }

    #[test]
    fn too_few_levels() {
        assert!(run_cantilever(2).is_err());
    }
}
