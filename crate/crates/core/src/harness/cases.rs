//! Test-matrix definitions: geometries, grids and manufactured solutions.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use nalgebra::Matrix2;

use crate::elasticity::{lame_from_e_nu, ElasticityProblem, PlaneMode};
use crate::error::{Error, Result};
use crate::fem::ExactSolution;
use crate::geometry::{make_flower, make_star, BcRule, DomainSide, Shape};
use crate::mesh::{build_quad_grid, build_tri_grid, Mesh};
use crate::poisson::PoissonProblem;
use crate::Vec2;

pub const PIVOT: Vec2 = Vec2::new(0.5, 0.5);
pub const CIRCLE_CENTER: Vec2 = Vec2::new(0.6, 0.5);
pub const CIRCLE_RADIUS: f64 = 0.25;
pub const STAR_OUTER: f64 = 0.3;
pub const STAR_INNER: f64 = 0.15;
pub const STAR_POINTS: usize = 5;
pub const SQUARE_SIDE: f64 = 0.48;
/// Rotation of the square in its patch test.
pub const PATCH_SQUARE_DEG: f64 = 30.0;
pub const DEFAULT_GAMMA: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Geometry {
    Circle,
    Star,
    Square,
    Flower,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Case {
    PatchCircle,
    PatchSquare,
    PatchStar,
    PoissonCircle,
    PoissonStar,
    PoissonSquareQuad,
    PoissonFlowerQuad,
    ElasticityCircle,
    ElasticityStar,
    ElasticitySquareQuad,
    ElasticityFlowerQuad,
    Cantilever,
}

pub const ALL_CASES: [Case; 12] = [
    Case::PatchCircle,
    Case::PatchSquare,
    Case::PatchStar,
    Case::PoissonCircle,
    Case::PoissonStar,
    Case::PoissonSquareQuad,
    Case::PoissonFlowerQuad,
    Case::ElasticityCircle,
    Case::ElasticityStar,
    Case::ElasticitySquareQuad,
    Case::ElasticityFlowerQuad,
    Case::Cantilever,
];

impl Case {
    pub fn name(self) -> &'static str {
        match self {
            Case::PatchCircle => "patch_circle",
            Case::PatchSquare => "patch_square",
            Case::PatchStar => "patch_star",
            Case::PoissonCircle => "poisson_circle",
            Case::PoissonStar => "poisson_star",
            Case::PoissonSquareQuad => "poisson_square_quad",
            Case::PoissonFlowerQuad => "poisson_flower_quad",
            Case::ElasticityCircle => "elasticity_circle",
            Case::ElasticityStar => "elasticity_star",
            Case::ElasticitySquareQuad => "elasticity_square_quad",
            Case::ElasticityFlowerQuad => "elasticity_flower_quad",
            Case::Cantilever => "cantilever",
        }
    }

    pub fn is_patch(self) -> bool {
        matches!(self, Case::PatchCircle | Case::PatchSquare | Case::PatchStar)
    }

    pub fn is_elasticity(self) -> bool {
        matches!(
            self,
            Case::ElasticityCircle | Case::ElasticityStar | Case::ElasticitySquareQuad | Case::ElasticityFlowerQuad
        )
    }

    /// Quad cases keep the grid fixed and rotate the shape.
    pub fn is_quad(self) -> bool {
        matches!(
            self,
            Case::PoissonSquareQuad | Case::PoissonFlowerQuad | Case::ElasticitySquareQuad | Case::ElasticityFlowerQuad
        )
    }

    /// Whether the case is a manufactured-solution convergence study.
    pub fn is_study(self) -> bool {
        !self.is_patch() && self != Case::Cantilever
    }

    pub fn geometry(self) -> Option<Geometry> {
        match self {
            Case::PatchCircle | Case::PoissonCircle | Case::ElasticityCircle => Some(Geometry::Circle),
            Case::PatchStar | Case::PoissonStar | Case::ElasticityStar => Some(Geometry::Star),
            Case::PatchSquare | Case::PoissonSquareQuad | Case::ElasticitySquareQuad => Some(Geometry::Square),
            Case::PoissonFlowerQuad | Case::ElasticityFlowerQuad => Some(Geometry::Flower),
            Case::Cantilever => None,
        }
    }

    /// Cells per side on the coarsest level.
    pub fn base_n(self) -> usize {
        if self.is_quad() {
            20
        } else {
            8
        }
    }

    /// Refinement levels of the default sweep: n = 8..128 on triangles,
    /// 20..160 on quads.
    pub fn default_levels(self) -> usize {
        if self.is_quad() {
            4
        } else {
            5
        }
    }

    pub fn cells_per_side(self, level: usize) -> usize {
        self.base_n() << level
    }

    /// Rotation sweep in degrees: nine steps over 0..45 for triangle grids,
    /// five steps over 0..40 for quad grids.
    pub fn default_rotations_deg(self) -> Vec<f64> {
        if self.is_quad() {
            (0..5).map(|k| 10.0 * k as f64).collect()
        } else {
            (0..9).map(|k| 45.0 * k as f64 / 8.0).collect()
        }
    }
}

impl fmt::Display for Case {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Case {
    type Err = Error;

    fn from_str(s: &str) -> Result<Case> {
        ALL_CASES
            .iter()
            .copied()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown case '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Variant {
    Symmetric,
    Antisymmetric,
    /// No embedded shape: whole grid active, outer boundary fitted.
    FittedReference,
}

impl Variant {
    pub fn name(self) -> &'static str {
        match self {
            Variant::Symmetric => "symmetric",
            Variant::Antisymmetric => "antisymmetric",
            Variant::FittedReference => "fitted_reference",
        }
    }

    /// Default `(theta, gamma)`.
    pub fn parameters(self) -> (f64, f64) {
        match self {
            Variant::Symmetric => (1.0, DEFAULT_GAMMA),
            Variant::Antisymmetric | Variant::FittedReference => (-1.0, 0.0),
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Variant> {
        match s {
            "sym" | "symmetric" => Ok(Variant::Symmetric),
            "antisym" | "antisymmetric" => Ok(Variant::Antisymmetric),
            "fitted" | "fitted_reference" => Ok(Variant::FittedReference),
            _ => Err(Error::Config(format!("unknown variant '{s}'"))),
        }
    }
}

/// Embedded hole of the given kind, rotated about the grid center.
pub fn make_shape(geometry: Geometry, rotation_deg: f64, bc: BcRule) -> Result<Shape> {
    let shape = match geometry {
        Geometry::Circle => Shape::circle(CIRCLE_CENTER, CIRCLE_RADIUS, DomainSide::Outside, bc)?,
        Geometry::Star => make_star(PIVOT, STAR_OUTER, STAR_INNER, STAR_POINTS, DomainSide::Outside, bc)?,
        Geometry::Square => Shape::square(PIVOT, SQUARE_SIDE, 0.0, DomainSide::Outside, bc)?,
        Geometry::Flower => make_flower(DomainSide::Outside, bc)?,
    };
    if rotation_deg == 0.0 {
        Ok(shape)
    } else {
        shape.rotated(PIVOT, rotation_deg.to_radians())
    }
}

/// The star carries Dirichlet data for `x <= 0.5` and Neumann data elsewhere;
/// every other study shape is fully Neumann.
pub fn study_bc(geometry: Geometry) -> BcRule {
    match geometry {
        Geometry::Star => BcRule::DirichletWhereXAtMost(0.5),
        _ => BcRule::AllNeumann,
    }
}

/// Background grid and embedded shape for one study run.
pub fn study_setup(case: Case, variant: Variant, rotation_deg: f64, level: usize) -> Result<(Mesh, Shape)> {
    let geometry = case
        .geometry()
        .ok_or_else(|| Error::Config(format!("{case} is not a convergence study")))?;
    let n = case.cells_per_side(level);
    let angle = rotation_deg.to_radians();
    let mesh = if case.is_quad() {
        build_quad_grid(n)?
    } else {
        build_tri_grid(n, PIVOT, angle)?
    };
    let shape = match variant {
        Variant::FittedReference => Shape::unbounded(),
        _ if case.is_quad() => make_shape(geometry, rotation_deg, study_bc(geometry))?,
        _ => make_shape(geometry, 0.0, study_bc(geometry))?,
    };
    Ok((mesh, shape))
}

/// `u = sin(4πx) sin(4πy)` with `f = 32π² u`.
pub fn poisson_manufactured(theta: f64, gamma: f64) -> PoissonProblem {
    let k = 4.0 * PI;
    let u = Arc::new(move |x: Vec2| (k * x.x).sin() * (k * x.y).sin());
    let grad = move |x: Vec2| {
        let (sx, cx) = (k * x.x).sin_cos();
        let (sy, cy) = (k * x.y).sin_cos();
        Vec2::new(k * cx * sy, k * sx * cy)
    };
    let uf = u.clone();
    PoissonProblem {
        f: Arc::new(move |x| 2.0 * k * k * uf(x)),
        u_d: u.clone(),
        h_n: Arc::new(move |x, n| grad(x).dot(&n)),
        outer: u,
        theta,
        gamma,
    }
}

pub fn poisson_exact_value(x: Vec2) -> [f64; 2] {
    let k = 4.0 * PI;
    [(k * x.x).sin() * (k * x.y).sin(), 0.0]
}

pub fn poisson_exact_grad(x: Vec2) -> [Vec2; 2] {
    let k = 4.0 * PI;
    let (sx, cx) = (k * x.x).sin_cos();
    let (sy, cy) = (k * x.y).sin_cos();
    [Vec2::new(k * cx * sy, k * sx * cy), Vec2::zeros()]
}

/// Material and wave number of the elasticity studies: `E = 10, ν = 0.3`,
/// `a = 2` on triangle grids; `E = 2.25, ν = 0.125`, `a = 3` on quad grids.
pub fn elasticity_parameters(quad: bool) -> (f64, f64, f64) {
    if quad {
        (2.25, 0.125, 3.0)
    } else {
        (10.0, 0.3, 2.0)
    }
}

/// Divergence-free field `u = (sin(aπx) sin(aπy), cos(aπx) cos(aπy))`.
#[derive(Debug, Clone, Copy)]
pub struct ElasticField {
    pub k: f64,
}

impl ElasticField {
    pub fn new(a: f64) -> ElasticField {
        ElasticField { k: a * PI }
    }

    pub fn value(&self, x: Vec2) -> Vec2 {
        let (sx, cx) = (self.k * x.x).sin_cos();
        let (sy, cy) = (self.k * x.y).sin_cos();
        Vec2::new(sx * sy, cx * cy)
    }

    /// `grad[(c, j)] = d u_c / d x_j`.
    pub fn grad(&self, x: Vec2) -> Matrix2<f64> {
        let k = self.k;
        let (sx, cx) = (k * x.x).sin_cos();
        let (sy, cy) = (k * x.y).sin_cos();
        Matrix2::new(k * cx * sy, k * sx * cy, -k * sx * cy, -k * cx * sy)
    }

    /// Body force `-div σ = 2μ k² u`.
    pub fn body_force(&self, mu: f64, x: Vec2) -> Vec2 {
        self.value(x) * (2.0 * mu * self.k * self.k)
    }
}

pub fn elasticity_manufactured(quad: bool, theta: f64, gamma: f64) -> Result<(ElasticityProblem, ElasticField)> {
    let (e, nu, a) = elasticity_parameters(quad);
    let (lambda, mu) = lame_from_e_nu(e, nu, PlaneMode::PlaneStrain)?;
    let field = ElasticField::new(a);
    let u = Arc::new(move |x: Vec2| field.value(x));
    let problem = ElasticityProblem {
        lambda,
        mu,
        b: Arc::new(move |x| field.body_force(mu, x)),
        u_d: u.clone(),
        t_n: Arc::new(move |x, n| {
            let g = field.grad(x);
            let eps = (g + g.transpose()) * 0.5;
            (eps * (2.0 * mu) + Matrix2::identity() * (lambda * g.trace())) * n
        }),
        outer: u,
        theta,
        gamma,
    };
    Ok((problem, field))
}

/// Boxed closures for [`ExactSolution`].
pub struct ExactFns {
    pub ncomp: usize,
    pub value: Box<dyn Fn(Vec2) -> [f64; 2] + Send + Sync>,
    pub grad: Box<dyn Fn(Vec2) -> [Vec2; 2] + Send + Sync>,
}

impl ExactFns {
    pub fn poisson() -> ExactFns {
        ExactFns {
            ncomp: 1,
            value: Box::new(poisson_exact_value),
            grad: Box::new(poisson_exact_grad),
        }
    }

    pub fn elastic(field: ElasticField) -> ExactFns {
        ExactFns {
            ncomp: 2,
            value: Box::new(move |x| {
                let v = field.value(x);
                [v.x, v.y]
            }),
            grad: Box::new(move |x| {
                let g = field.grad(x);
                [Vec2::new(g[(0, 0)], g[(0, 1)]), Vec2::new(g[(1, 0)], g[(1, 1)])]
            }),
        }
    }

    pub fn as_exact(&self) -> ExactSolution<'_> {
        ExactSolution {
            ncomp: self.ncomp,
            value: &*self.value,
            grad: &*self.grad,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_roundtrip() {
        for c in ALL_CASES {
            assert_eq!(c.name().parse::<Case>().unwrap(), c);
        }
        assert!("poisson_triangle".parse::<Case>().is_err());
        assert_eq!("sym".parse::<Variant>().unwrap(), Variant::Symmetric);
        assert_eq!("fitted_reference".parse::<Variant>().unwrap(), Variant::FittedReference);
    }

    #[test]
    fn rotation_sweeps() {
        let tri = Case::PoissonCircle.default_rotations_deg();
        assert_eq!(tri.len(), 9);
        assert_eq!(tri[8], 45.0);
        assert!((tri[1] - 5.625).abs() < 1e-15);
        assert_eq!(
            Case::PoissonFlowerQuad.default_rotations_deg(),
            vec![0.0, 10.0, 20.0, 30.0, 40.0]
        );
        assert_eq!(Case::PoissonCircle.cells_per_side(4), 128);
        assert_eq!(Case::ElasticitySquareQuad.cells_per_side(3), 160);
    }

    #[test]
    fn poisson_source_matches_laplacian() {
        // five-point finite-difference Laplacian of u against f
        let p = poisson_manufactured(-1.0, 0.0);
        let u = |x: Vec2| poisson_exact_value(x)[0];
        let h = 1e-4;
        for &(x, y) in &[(0.13, 0.71), (0.4, 0.22), (0.9, 0.55)] {
            let c = Vec2::new(x, y);
            let lap = (u(c + Vec2::new(h, 0.0))
                + u(c - Vec2::new(h, 0.0))
                + u(c + Vec2::new(0.0, h))
                + u(c - Vec2::new(0.0, h))
                - 4.0 * u(c))
                / (h * h);
            assert!((-lap - (p.f)(c)).abs() < 1e-3 * (p.f)(c).abs().max(1.0));
        }
    }

    #[test]
    fn elastic_body_force_matches_finite_differences() {
        for quad in [false, true] {
            let (p, field) = elasticity_manufactured(quad, -1.0, 0.0).unwrap();
            let stress = |x: Vec2| p.stress(&field.grad(x));
            let h = 1e-5;
            for &(x, y) in &[(0.21, 0.37), (0.66, 0.8)] {
                let c = Vec2::new(x, y);
                let ex = Vec2::new(h, 0.0);
                let ey = Vec2::new(0.0, h);
                let dsx = (stress(c + ex) - stress(c - ex)) / (2.0 * h);
                let dsy = (stress(c + ey) - stress(c - ey)) / (2.0 * h);
                let div = Vec2::new(dsx[(0, 0)] + dsy[(0, 1)], dsx[(1, 0)] + dsy[(1, 1)]);
                let b = (p.b)(c);
                assert!((b + div).norm() < 1e-5 * b.norm().max(1.0), "b {b:?} div {div:?}");
                // divergence-free, no shear strain
                let g = field.grad(c);
                assert!(g.trace().abs() < 1e-12);
                assert!((g[(0, 1)] + g[(1, 0)]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn field_gradient_matches_finite_differences() {
        let f = ElasticField::new(3.0);
        let c = Vec2::new(0.31, 0.72);
        let h = 1e-6;
        let g = f.grad(c);
        let dx = (f.value(c + Vec2::new(h, 0.0)) - f.value(c - Vec2::new(h, 0.0))) / (2.0 * h);
        let dy = (f.value(c + Vec2::new(0.0, h)) - f.value(c - Vec2::new(0.0, h))) / (2.0 * h);
        assert!((g[(0, 0)] - dx.x).abs() < 1e-6 && (g[(1, 0)] - dx.y).abs() < 1e-6);
        assert!((g[(0, 1)] - dy.x).abs() < 1e-6 && (g[(1, 1)] - dy.y).abs() < 1e-6);
    }

    #[test]
    fn setups() {
        let (mesh, shape) = study_setup(Case::PoissonCircle, Variant::Antisymmetric, 22.5, 0).unwrap();
        assert_eq!(mesh.num_cells(), 128);
        assert!(!shape.is_unbounded());
        let (_, shape) = study_setup(Case::PoissonCircle, Variant::FittedReference, 0.0, 0).unwrap();
        assert!(shape.is_unbounded());
        assert!(study_setup(Case::Cantilever, Variant::Antisymmetric, 0.0, 0).is_err());
    }
}
