//! Manufactured-solution convergence sweeps over rotations and levels.

use std::time::Instant;

use log::{info, warn};
use rayon::prelude::*;

use super::cases::{elasticity_manufactured, poisson_manufactured, study_setup, Case, ExactFns, Variant};
use super::config::StudyConfig;
use crate::elasticity::assemble_elasticity;
use crate::error::Result;
use crate::fem::error_norms;
use crate::linalg::{condition_number, symmetric_part_is_positive_definite};
use crate::poisson::{assemble, Assembled};
use crate::surrogate::build_surrogate;

/// Number of finest levels used for fitted rates.
pub const RATE_LEVELS: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct StudyRow {
    pub case: Case,
    pub variant: Variant,
    pub rotation_deg: f64,
    pub level: usize,
    pub h: f64,
    pub dofs: usize,
    pub l2: f64,
    pub h1: f64,
    pub kappa: f64,
    pub wall_ms: f64,
    /// Largest `|A_ij - A_ji|` of the constrained matrix over its largest
    /// entry.
    pub asymmetry: f64,
    /// Positive definiteness of the symmetric part; checked for `theta = 1`.
    pub positive_definite: Option<bool>,
    pub surrogate_edges: usize,
    pub min_h_e: f64,
    pub min_j_e: f64,
    pub crossed_quads: usize,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Slopes {
    pub rotation_deg: f64,
    pub l2: f64,
    pub h1: f64,
    pub kappa: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyResult {
    pub rows: Vec<StudyRow>,
    pub slopes: Vec<Slopes>,
}

impl StudyResult {
    pub fn rows_for(&self, rotation_deg: f64) -> impl Iterator<Item = &StudyRow> {
        self.rows.iter().filter(move |r| r.rotation_deg == rotation_deg)
    }

    /// Max over min of the finest-level L2 errors across rotations.
    pub fn rotation_spread(&self) -> f64 {
        let Some(finest) = self.rows.iter().map(|r| r.level).max() else {
            return f64::NAN;
        };
        let errs: Vec<f64> = self.rows.iter().filter(|r| r.level == finest).map(|r| r.l2).collect();
        let max = errs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let min = errs.iter().cloned().fold(f64::INFINITY, f64::min);
        max / min
    }
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len().min(y.len());
    if n < 2 {
        return f64::NAN;
    }
    let lx: Vec<f64> = x[..n].iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y[..n].iter().map(|v| v.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n as f64;
    let my = ly.iter().sum::<f64>() / n as f64;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    for i in 0..n {
        sxy += (lx[i] - mx) * (ly[i] - my);
        sxx += (lx[i] - mx) * (lx[i] - mx);
    }
    sxy / sxx
}

fn fitted_slopes(rotation_deg: f64, rows: &[&StudyRow]) -> Slopes {
    let tail = &rows[rows.len().saturating_sub(RATE_LEVELS)..];
    let h: Vec<f64> = tail.iter().map(|r| r.h).collect();
    let pick = |f: fn(&StudyRow) -> f64| loglog_slope(&h, &tail.iter().map(|r| f(r)).collect::<Vec<_>>());
    Slopes {
        rotation_deg,
        l2: pick(|r| r.l2),
        h1: pick(|r| r.h1),
        kappa: pick(|r| r.kappa),
    }
}

fn failed_row(case: Case, variant: Variant, rotation_deg: f64, level: usize, msg: String) -> StudyRow {
    StudyRow {
        case,
        variant,
        rotation_deg,
        level,
        h: f64::NAN,
        dofs: 0,
        l2: f64::NAN,
        h1: f64::NAN,
        kappa: f64::NAN,
        wall_ms: 0.0,
        asymmetry: f64::NAN,
        positive_definite: None,
        surrogate_edges: 0,
        min_h_e: f64::NAN,
        min_j_e: f64::NAN,
        crossed_quads: 0,
        error: Some(msg),
    }
}

/// One solve of the study matrix.
pub fn run_single(cfg: &StudyConfig, rotation_deg: f64, level: usize) -> Result<StudyRow> {
    let start = Instant::now();
    let (theta, gamma) = cfg.parameters();
    let (mesh, shape) = study_setup(cfg.case, cfg.variant, rotation_deg, level)?;
    let sur = build_surrogate(&mesh, &shape)?;
    let (assembled, exact): (Assembled, ExactFns) = if cfg.case.is_elasticity() {
        let (p, field) = elasticity_manufactured(cfg.case.is_quad(), theta, gamma)?;
        (assemble_elasticity(&mesh, &sur, &p)?, ExactFns::elastic(field))
    } else {
        (
            assemble(&mesh, &sur, &poisson_manufactured(theta, gamma))?,
            ExactFns::poisson(),
        )
    };
    let values = assembled.solve()?;
    let (l2, h1) = error_norms(&mesh, &sur.active_cells, &values, &exact.as_exact())?;
    let a = assembled.matrix();
    let kappa = if cfg.condition { condition_number(a) } else { f64::NAN };
    let positive_definite = (theta == 1.0).then(|| symmetric_part_is_positive_definite(a));
    let wall_ms = if cfg.timings {
        start.elapsed().as_secs_f64() * 1e3
    } else {
        0.0
    };
    let row = StudyRow {
        case: cfg.case,
        variant: cfg.variant,
        rotation_deg,
        level,
        h: mesh.h_global(),
        dofs: assembled.dofs.len(),
        l2,
        h1,
        kappa,
        wall_ms,
        asymmetry: a.max_asymmetry() / a.max_abs(),
        positive_definite,
        surrogate_edges: sur.edges.len(),
        min_h_e: sur.edges.iter().map(|e| e.h_e).fold(f64::INFINITY, f64::min),
        min_j_e: sur.edges.iter().map(|e| e.j_e).fold(f64::INFINITY, f64::min),
        crossed_quads: sur.diagnostics.crossed_quads,
        error: None,
    };
    info!(
        "{} {} rot {:.3} level {}: dofs {} l2 {:.4e} h1 {:.4e} kappa {:.4e}",
        row.case, row.variant, rotation_deg, level, row.dofs, l2, h1, kappa
    );
    Ok(row)
}

/// Runs every `(rotation, level)` pair; failures become rows with `error` set.
pub fn run_convergence(cfg: &StudyConfig) -> Result<StudyResult> {
    cfg.validate()?;
    let jobs: Vec<(f64, usize)> = cfg
        .rotations
        .iter()
        .flat_map(|&r| (0..cfg.levels).map(move |l| (r, l)))
        .collect();
    let mut rows: Vec<StudyRow> = jobs
        .par_iter()
        .map(|&(rot, level)| {
            run_single(cfg, rot, level).unwrap_or_else(|e| {
                warn!("{} rot {rot} level {level} failed: {e}", cfg.case);
                failed_row(cfg.case, cfg.variant, rot, level, e.to_string())
            })
        })
        .collect();
    rows.sort_by(|a, b| a.rotation_deg.total_cmp(&b.rotation_deg).then(a.level.cmp(&b.level)));

    let mut rotations = cfg.rotations.clone();
    rotations.sort_by(f64::total_cmp);
    rotations.dedup();
    let slopes = rotations
        .iter()
        .map(|&rot| {
            let rs: Vec<&StudyRow> = rows.iter().filter(|r| r.rotation_deg == rot).collect();
            fitted_slopes(rot, &rs)
        })
        .collect();
    Ok(StudyResult { rows, slopes })
}

/// One line of a `--check` report.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Check {
        Check {
            name: name.into(),
            passed,
            detail: detail.into(),
        }
    }

    pub fn line(&self) -> String {
        format!(
            "{} {}: {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.detail
        )
    }
}

pub const L2_WINDOW: (f64, f64) = (1.8, 2.2);
pub const H1_WINDOW: (f64, f64) = (0.9, 1.1);
pub const KAPPA_WINDOW: (f64, f64) = (-2.4, -1.6);
pub const SYMMETRY_TOL: f64 = 1e-12;

fn within(v: f64, w: (f64, f64)) -> bool {
    v >= w.0 && v <= w.1
}

/// Rate windows per rotation, plus symmetry and definiteness for `theta = 1`.
pub fn check_study(cfg: &StudyConfig, result: &StudyResult) -> Vec<Check> {
    let mut out = Vec::new();
    let failed: Vec<&StudyRow> = result.rows.iter().filter(|r| r.error.is_some()).collect();
    out.push(Check::new(
        format!("{} {} solves", cfg.case, cfg.variant),
        failed.is_empty(),
        format!("{} of {} rows failed", failed.len(), result.rows.len()),
    ));
    for s in &result.slopes {
        let name = format!("{} {} rot {:.3}", cfg.case, cfg.variant, s.rotation_deg);
        out.push(Check::new(
            format!("{name} L2 slope"),
            within(s.l2, L2_WINDOW),
            format!("{:.3}", s.l2),
        ));
        out.push(Check::new(
            format!("{name} H1 slope"),
            within(s.h1, H1_WINDOW),
            format!("{:.3}", s.h1),
        ));
        if cfg.condition {
            out.push(Check::new(
                format!("{name} kappa slope"),
                within(s.kappa, KAPPA_WINDOW),
                format!("{:.3}", s.kappa),
            ));
        }
    }
    if cfg.parameters().0 == 1.0 {
        let asym = result.rows.iter().map(|r| r.asymmetry).fold(0.0, f64::max);
        out.push(Check::new(
            format!("{} {} symmetric matrix", cfg.case, cfg.variant),
            asym <= SYMMETRY_TOL,
            format!("max relative asymmetry {asym:.3e}"),
        ));
        let pd = result.rows.iter().all(|r| r.positive_definite == Some(true));
        out.push(Check::new(
            format!("{} {} positive definite", cfg.case, cfg.variant),
            pd,
            format!("{} rows", result.rows.len()),
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_of_power_law() {
        let h = [0.1, 0.05, 0.025];
        let y: Vec<f64> = h.iter().map(|x| 3.0 * x * x).collect();
        assert!((loglog_slope(&h, &y) - 2.0).abs() < 1e-12);
        assert!(loglog_slope(&[0.1], &[1.0]).is_nan());
    }

    #[test]
    fn small_study_is_ordered_and_deterministic() {
        let mut cfg = StudyConfig::new(Case::PoissonCircle, Variant::Antisymmetric);
        cfg.rotations = vec![22.5, 0.0];
        cfg.levels = 2;
        let a = run_convergence(&cfg).unwrap();
        let b = run_convergence(&cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.rows.len(), 4);
        assert_eq!(a.rows[0].rotation_deg, 0.0);
        assert_eq!(a.rows[1].level, 1);
        assert!(a.rows[1].h < a.rows[0].h);
        assert_eq!(a.slopes.len(), 2);
        assert!(a.rows.iter().all(|r| r.error.is_none() && r.l2 > 0.0 && r.kappa > 1.0));
    }

    #[test]
    fn fitted_reference_has_no_gap() {
        let mut cfg = StudyConfig::new(Case::PoissonCircle, Variant::FittedReference);
        cfg.rotations = vec![0.0];
        cfg.levels = 2;
        cfg.condition = false;
        let r = run_convergence(&cfg).unwrap();
        assert!(r.rows.iter().all(|r| r.surrogate_edges == 0));
    }
}
