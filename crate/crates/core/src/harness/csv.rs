//! CSV output of study rows.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::study::StudyResult;
use crate::error::Result;

pub const CSV_HEADER: &str = "case,variant,rotation_deg,level,h,dofs,l2,h1semi,kappa,wall_ms";

pub fn to_csv(result: &StudyResult) -> String {
    let mut rows: Vec<_> = result.rows.iter().collect();
    rows.sort_by(|a, b| {
        a.case
            .cmp(&b.case)
            .then(a.rotation_deg.total_cmp(&b.rotation_deg))
            .then(a.level.cmp(&b.level))
    });
    let mut s = String::with_capacity(64 * (rows.len() + 1));
    s.push_str(CSV_HEADER);
    s.push('\n');
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{:.9e},{},{:.9e},{:.9e},{:.6e},{:.3}",
            r.case, r.variant, r.rotation_deg, r.level, r.h, r.dofs, r.l2, r.h1, r.kappa, r.wall_ms
        );
    }
    s
}

pub fn emit_csv(result: &StudyResult, path: &Path) -> Result<()> {
    fs::write(path, to_csv(result))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_result_is_header_only() {
        let r = StudyResult {
            rows: vec![],
            slopes: vec![],
        };
        assert_eq!(to_csv(&r), format!("{CSV_HEADER}\n"));
    }

    #[test]
    fn unwritable_path_fails() {
        let r = StudyResult {
            rows: vec![],
            slopes: vec![],
        };
        assert!(emit_csv(&r, Path::new("/nonexistent-dir/x/out.csv")).is_err());
    }
}
