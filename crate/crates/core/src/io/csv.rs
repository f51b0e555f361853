//! CSV emitters: the per-step energy log and diagnostic summaries.

use crate::error::Result;
use crate::flow::FlowReport;
use std::fmt::Write as _;
use std::path::Path;

pub const ENERGY_LOG_HEADER: &str = "step,E_s,E_ring,E_bulk,E_total,R_h,tnorm2,dsnorm2,cg_iters";

pub fn energy_log_string(report: &FlowReport) -> String {
    let mut out = String::new();
    out.push_str(ENERGY_LOG_HEADER);
    out.push('\n');
    for rec in &report.steps {
        let e = rec.e_after;
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            rec.step,
            e.e_s,
            e.e_ring,
            e.e_bulk,
            e.e_total,
            e.r_h,
            rec.tnorm2,
            rec.dsnorm2,
            rec.cg_iters_theta + rec.cg_iters_s
        );
    }
    out
}

/// One row per flow step under a fixed header; an empty report produces a
/// header-only file.
pub fn write_energy_log(report: &FlowReport, path: &Path) -> Result<()> {
    std::fs::write(path, energy_log_string(report))?;
    Ok(())
}

/// Winding numbers and minimum-s location of a final state.
pub fn write_diagnostics_csv(
    rows: &[(String, f64)],
    min_s: f64,
    min_s_pos: &[f64],
    path: &Path,
) -> Result<()> {
    let mut out = String::new();
    out.push_str("quantity,value\n");
    for (name, value) in rows {
        let _ = writeln!(out, "{name},{value}");
    }
    let _ = writeln!(out, "min_s,{min_s}");
    for (q, x) in min_s_pos.iter().enumerate() {
        let _ = writeln!(out, "min_s_{},{}", ["x", "y", "z"][q], x);
    }
    std::fs::write(path, out)?;
    Ok(())
}
