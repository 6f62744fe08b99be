//! Test matrix driver: patch tests, convergence sweeps and the cantilever.

pub mod cantilever;
pub mod cases;
pub mod config;
pub mod csv;
pub mod patch;
pub mod study;

pub use cantilever::{run_cantilever, CantileverResult};
pub use cases::{Case, Variant};
pub use config::{Settings, StudyConfig};
pub use csv::emit_csv;
pub use patch::run_patch;
pub use study::{check_study, run_convergence, Check, StudyResult, StudyRow};
