//! Report renderers: canonical JSON, Markdown tables, and CSV.
//!
//! JSON is the canonical schema (versioned, documented in docs/schemas.md);
//! Markdown and CSV are derived views. Both views format numbers through
//! the same helpers, so a Markdown cell always equals the JSON value after
//! the formatting rule (ratios to 4 decimals, percents to 1 decimal).

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};

use benchwatch_core::analytics::{
    percent_change, BreakdownTable, PlatformComparison, VariantComparison,
};
use benchwatch_core::bisect::{BisectionResult, BisectionSession, ProbeOutcome};
use benchwatch_core::measure::{CellStatus, ConfigMatrix, MeasurementSet, Selection};
use benchwatch_core::regression::DetectionReport;
use benchwatch_core::trace::Decomposition;

use crate::error::HarnessError;

pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// Ratio formatting rule shared by Markdown and CSV.
pub fn fmt_ratio(ratio: f64) -> String {
    format!("{ratio:.4}")
}

/// Percent formatting rule (one decimal), shared by Markdown and CSV.
pub fn fmt_pct(pct: f64) -> String {
    format!("{pct:.1}")
}

/// Wraps a payload in the versioned report envelope.
pub fn json_report(kind: &str, payload: impl Serialize) -> Value {
    json!({
        "schema_version": REPORT_SCHEMA_VERSION,
        "kind": kind,
        "report": payload,
    })
}

pub fn write_report_files(
    dir: &Path,
    stem: &str,
    json: &Value,
    markdown: &str,
) -> Result<(PathBuf, PathBuf), HarnessError> {
    std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    let json_path = dir.join(format!("{stem}.json"));
    let md_path = dir.join(format!("{stem}.md"));
    std::fs::write(&json_path, serde_json::to_string_pretty(json).expect("json"))
        .map_err(|e| HarnessError::io(&json_path, e))?;
    std::fs::write(&md_path, markdown).map_err(|e| HarnessError::io(&md_path, e))?;
    Ok((json_path, md_path))
}

// ---------------------------------------------------------------------------
// Decomposition
// ---------------------------------------------------------------------------

pub fn decomposition_json(d: &Decomposition) -> Value {
    json_report("decomposition", d)
}

pub fn decomposition_markdown(d: &Decomposition) -> String {
    let mut out = String::from("# Execution-time decomposition\n\n");
    let _ = writeln!(out, "Wall time (denominator): {} us\n", d.denominator_wall_time_us);
    out.push_str("| Portion | Share (%) |\n|---|---|\n");
    let _ = writeln!(out, "| GPU activeness | {} |", fmt_pct(d.active_fraction * 100.0));
    let _ = writeln!(out, "| Data movement | {} |", fmt_pct(d.movement_fraction * 100.0));
    let _ = writeln!(out, "| GPU idleness | {} |", fmt_pct(d.idle_fraction * 100.0));
    out.push_str("\nMovement overlapped by compute counts as compute.\n");
    out
}

// ---------------------------------------------------------------------------
// Breakdown table
// ---------------------------------------------------------------------------

pub fn breakdown_json(table: &BreakdownTable) -> Value {
    json_report("breakdown", table)
}

pub fn breakdown_markdown(table: &BreakdownTable) -> String {
    let mut out = String::from("# Execution-time breakdown by domain\n\n");
    out.push_str("| Domain | Mode | GPU activeness (%) | Data movement (%) | GPU idleness (%) |\n");
    out.push_str("|---|---|---|---|---|\n");
    for row in &table.domain_rows {
        let _ = writeln!(
            out,
            "| {} | {} | {} | {} | {} |",
            row.domain,
            row.mode,
            fmt_pct(row.active_pct),
            fmt_pct(row.movement_pct),
            fmt_pct(row.idle_pct),
        );
    }
    out.push_str("\nPer-workload rows:\n\n");
    out.push_str("| Workload | Domain | Mode | GPU activeness (%) | Data movement (%) | GPU idleness (%) |\n");
    out.push_str("|---|---|---|---|---|---|\n");
    for row in &table.workload_rows {
        let _ = writeln!(
            out,
            "| {} | {} | {} | {} | {} | {} |",
            row.workload,
            row.domain,
            row.mode,
            fmt_pct(row.active_pct),
            fmt_pct(row.movement_pct),
            fmt_pct(row.idle_pct),
        );
    }
    out.push_str(
        "\nDomain rows are arithmetic means of per-workload fractions. Movement \
         overlapped by compute counts as compute.\n",
    );
    out
}

pub fn breakdown_csv(table: &BreakdownTable) -> String {
    let mut out = String::from("domain,mode,gpu_activeness_pct,data_movement_pct,gpu_idleness_pct,workloads\n");
    for row in &table.domain_rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            row.domain,
            row.mode,
            fmt_pct(row.active_pct),
            fmt_pct(row.movement_pct),
            fmt_pct(row.idle_pct),
            row.workloads,
        );
    }
    out
}

// ---------------------------------------------------------------------------
// Variant / platform comparison
// ---------------------------------------------------------------------------

pub fn comparison_json(cmp: &VariantComparison) -> Value {
    json_report("variant_comparison", cmp)
}

fn optional_ratio_cells(ratio: Option<f64>) -> (String, String) {
    match ratio {
        Some(r) => (fmt_ratio(r), percent_change(r)),
        None => ("n/a".to_string(), "n/a".to_string()),
    }
}

pub fn comparison_markdown(cmp: &VariantComparison) -> String {
    let mut out = String::from("# Variant comparison\n\n");
    let _ = writeln!(out, "Baseline: {}", cmp.baseline_label);
    let _ = writeln!(out, "Candidate: {}", cmp.candidate_label);
    let _ = writeln!(out, "Orientation: {}\n", cmp.orientation);
    out.push_str(
        "| Cell | Time ratio | CPU mem ratio | CPU mem change | GPU mem ratio | GPU mem change |\n",
    );
    out.push_str("|---|---|---|---|---|---|\n");
    for row in &cmp.rows {
        let (cpu_ratio, cpu_change) = optional_ratio_cells(row.peak_cpu_mem_ratio);
        let (gpu_ratio, gpu_change) = optional_ratio_cells(row.peak_gpu_mem_ratio);
        let _ = writeln!(
            out,
            "| {} | {} | {} | {} | {} | {} |",
            row.cell,
            fmt_ratio(row.wall_time_ratio),
            cpu_ratio,
            cpu_change,
            gpu_ratio,
            gpu_change,
        );
    }
    let _ = writeln!(out, "\nGeomean time ratio: {}", fmt_ratio(cmp.geomean_wall_time));
    if let Some(g) = cmp.geomean_peak_cpu_mem {
        let _ = writeln!(out, "Geomean CPU memory ratio: {} ({})", fmt_ratio(g), percent_change(g));
    }
    if let Some(g) = cmp.geomean_peak_gpu_mem {
        let _ = writeln!(out, "Geomean GPU memory ratio: {} ({})", fmt_ratio(g), percent_change(g));
    }
    if !cmp.only_in_baseline.is_empty() {
        let _ = writeln!(out, "\nOnly in baseline: {}", cmp.only_in_baseline.join(", "));
    }
    if !cmp.only_in_candidate.is_empty() {
        let _ = writeln!(out, "Only in candidate: {}", cmp.only_in_candidate.join(", "));
    }
    out
}

pub fn comparison_csv(cmp: &VariantComparison) -> String {
    let mut out =
        String::from("cell,wall_time_ratio,peak_cpu_mem_ratio,peak_gpu_mem_ratio\n");
    for row in &cmp.rows {
        let opt = |r: Option<f64>| r.map(fmt_ratio).unwrap_or_default();
        let _ = writeln!(
            out,
            "{},{},{},{}",
            row.cell,
            fmt_ratio(row.wall_time_ratio),
            opt(row.peak_cpu_mem_ratio),
            opt(row.peak_gpu_mem_ratio),
        );
    }
    out
}

pub fn platform_json(cmp: &PlatformComparison) -> Value {
    json_report("platform_comparison", cmp)
}

pub fn platform_markdown(cmp: &PlatformComparison) -> String {
    let mut out = String::from("# Platform comparison\n\n");
    let _ = writeln!(out, "Convention: {}\n", cmp.convention);
    out.push_str("| Workload | Mode | Ratio |\n|---|---|---|\n");
    for row in &cmp.rows {
        let _ = writeln!(out, "| {} | {} | {} |", row.workload, row.mode, fmt_ratio(row.ratio));
    }
    out
}

// ---------------------------------------------------------------------------
// Measurement / matrix summaries
// ---------------------------------------------------------------------------

pub fn measurement_markdown(set: &MeasurementSet) -> String {
    let mut out = String::new();
    let rep = set.representative();
    let _ = writeln!(
        out,
        "## {} / {} / {} (bs={}, repeats={}, {:?})",
        set.workload, set.mode, set.device, set.batch_size, set.repeats, set.reduction
    );
    if set.degraded {
        out.push_str("\n**Degraded**: failed runs were dropped.\n");
    }
    let _ = writeln!(out, "\nRepresentative wall time: {} us", rep.wall_time_us);
    let _ = writeln!(out, "Peak CPU memory: {} bytes", rep.peak_cpu_mem_bytes);
    let _ = writeln!(out, "Peak GPU memory: {} bytes", rep.peak_gpu_mem_bytes);
    let _ = writeln!(out, "Post-run resident: {} bytes", rep.post_run_resident_bytes);
    if let Selection::MedianIndex(i) = set.selected {
        let _ = writeln!(out, "Median run index: {i}");
    }
    out.push_str("\n| Run | Outcome | Wall time (us) |\n|---|---|---|\n");
    for (i, run) in set.runs.iter().enumerate() {
        let _ = writeln!(
            out,
            "| {} | {} | {} |",
            i,
            run.exit_class,
            run.wall_time_us().map(|w| w.to_string()).unwrap_or_default()
        );
    }
    out
}

pub fn matrix_markdown(matrix: &ConfigMatrix) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "## Matrix: {}\n", matrix.workload);
    out.push_str("| Mode | Device | Status | Batch size | Wall time (us) |\n|---|---|---|---|---|\n");
    for cell in &matrix.cells {
        match &cell.status {
            CellStatus::Measured(set) => {
                let _ = writeln!(
                    out,
                    "| {} | {} | measured | {} | {} |",
                    cell.mode,
                    cell.device,
                    set.batch_size,
                    set.representative().wall_time_us
                );
            }
            CellStatus::Skipped { reason } => {
                let _ = writeln!(
                    out,
                    "| {} | {} | skipped: {} | | |",
                    cell.mode, cell.device, reason
                );
            }
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Detection and bisection
// ---------------------------------------------------------------------------

pub fn detection_json(report: &DetectionReport) -> Value {
    json_report("detection", report)
}

pub fn detection_markdown(report: &DetectionReport) -> String {
    let mut out = String::from("# Regression findings\n\n");
    if report.findings.is_empty() {
        out.push_str("No regressions detected.\n");
    } else {
        out.push_str("| Cell | Metric | Baseline | Observed | Ratio | Culprit |\n");
        out.push_str("|---|---|---|---|---|---|\n");
        for f in &report.findings {
            let _ = writeln!(
                out,
                "| {} | {} | {} | {} | {} | {} |",
                f.cell,
                f.metric,
                f.baseline_value,
                f.observed_value,
                fmt_ratio(f.ratio),
                f.culprit.as_deref().unwrap_or("unknown"),
            );
        }
    }
    if !report.new_cells.is_empty() {
        let cells: Vec<String> = report.new_cells.iter().map(|c| c.to_string()).collect();
        let _ = writeln!(out, "\nNew cells (no baseline yet): {}", cells.join(", "));
    }
    if !report.missing_cells.is_empty() {
        let cells: Vec<String> = report.missing_cells.iter().map(|c| c.to_string()).collect();
        let _ = writeln!(out, "\nBaseline cells missing from this run: {}", cells.join(", "));
    }
    out
}

pub fn bisection_json(session: &BisectionSession) -> Value {
    json_report("bisection", session)
}

pub fn bisection_markdown(session: &BisectionSession) -> String {
    let mut out = String::from("## Bisection\n\n");
    let _ = writeln!(out, "Cell: {}", session.cell);
    let _ = writeln!(out, "Metric: {}", session.metric);
    let _ = writeln!(
        out,
        "Range: {} commits ({} .. {})",
        session.commits.len(),
        session.commits.first().map(|c| c.id.as_str()).unwrap_or("-"),
        session.commits.last().map(|c| c.id.as_str()).unwrap_or("-"),
    );
    match &session.result {
        BisectionResult::Culprit { commit, index } => {
            let _ = writeln!(out, "Result: culprit {commit} (index {index})");
        }
        BisectionResult::Inconclusive { reason } => {
            let _ = writeln!(out, "Result: inconclusive ({reason})");
        }
    }
    out.push_str("\nProbe log:\n\n| Commit | Outcome |\n|---|---|\n");
    for entry in &session.probe_log {
        let outcome = match &entry.outcome {
            ProbeOutcome::Good { observed } => format!("good (observed {observed})"),
            ProbeOutcome::Bad { observed } => format!("bad (observed {observed})"),
            ProbeOutcome::Unbuildable { reason } => format!("unbuildable ({reason})"),
            ProbeOutcome::MeasurementFailed { reason } => {
                format!("measurement failed ({reason})")
            }
        };
        let _ = writeln!(out, "| {} | {} |", entry.commit, outcome);
    }
    out
}
