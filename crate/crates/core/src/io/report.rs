//! Plottable CSV export of an evaluation report.

use std::path::Path;

use crate::error::Result;
use crate::eval::EvalReport;
use crate::io::bytes::write_atomic;

/// Writes `roc.csv`, `pr.csv`, and `summary.txt` into `dir`, each through
/// a write-temp-rename so re-exports overwrite atomically.
pub fn export_report(report: &EvalReport<f64>, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;

    let mut roc = String::from("threshold,fpr,tpr\n");
    for p in &report.roc_points {
        roc.push_str(&format!("{},{},{}\n", p.threshold, p.fpr, p.tpr));
    }
    write_atomic(&dir.join("roc.csv"), roc.as_bytes())?;

    let mut pr = String::from("threshold,recall,precision\n");
    for p in &report.pr_points {
        pr.push_str(&format!("{},{},{}\n", p.threshold, p.recall, p.precision));
    }
    write_atomic(&dir.join("pr.csv"), pr.as_bytes())?;

    let mut summary = String::new();
    summary.push_str(&format!("roc_auc={}\n", report.roc_auc));
    summary.push_str(&format!("pr_auc={}\n", report.pr_auc));
    for p in &report.precision_at {
        summary.push_str(&format!("precision_at_{:.2}={}\n", p.recall_target, p.precision));
        if p.clamped {
            summary.push_str(&format!(
                "precision_at_{:.2}_note=clamped_to_max_recall\n",
                p.recall_target
            ));
        }
    }
    write_atomic(&dir.join("summary.txt"), summary.as_bytes())?;
    Ok(())
}
