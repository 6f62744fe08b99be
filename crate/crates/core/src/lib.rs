//! Gap shifted boundary method (Gap-SBM) for 2D Poisson and isotropic linear
//! elasticity on unfitted background grids.
//!
//! The true boundary is never meshed. Cells that are fully inside the domain
//! form a surrogate domain, and the region between the surrogate boundary and
//! the true boundary (the gap) is accounted for by extension quadrilaterals
//! whose integrals are collapsed onto surrogate edges and nodes.
//!
//! Module map:
//! - [`mesh`]: structured triangle / quadrilateral background grids.
//! - [`geometry`]: embedded shapes, inside tests and closest-point projection.
//! - [`surrogate`]: surrogate domain extraction and gap geometry.
//! - [`fem`]: reference elements, quadrature and error norms.
//! - [`poisson`], [`elasticity`]: system assembly.
//! - [`linalg`]: CSR storage, sparse LU solves and condition numbers.
//! - [`harness`]: manufactured-solution studies, patch tests, cantilever beam.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod elasticity;
pub mod error;
pub mod fem;
pub mod geometry;
pub mod harness;
pub mod linalg;
pub mod mesh;
pub mod poisson;
pub mod surrogate;

pub use error::{Error, Result};

/// 2D point / vector type used throughout the crate.
pub type Vec2 = nalgebra::Vector2<f64>;

/// Rotates `v` by 90 degrees counter-clockwise.
#[inline]
pub fn rot90(v: Vec2) -> Vec2 {
    Vec2::new(-v.y, v.x)
}

/// Rigid rotation of `p` about `pivot` by `angle` radians (counter-clockwise).
#[inline]
pub fn rotate_about(p: Vec2, pivot: Vec2, angle: f64) -> Vec2 {
    let (s, c) = angle.sin_cos();
    let r = p - pivot;
    pivot + Vec2::new(c * r.x - s * r.y, s * r.x + c * r.y)
}

/// Signed area of a closed polygon (positive when counter-clockwise).
pub fn shoelace(points: &[Vec2]) -> f64 {
    let n = points.len();
    let mut twice = 0.0;
    for i in 0..n {
        let a = points[i];
        let b = points[(i + 1) % n];
        twice += a.x * b.y - a.y * b.x;
    }
    0.5 * twice
}
