//! Comparison analytics: speedup ratios, geomean summaries, memory-ratio
//! comparisons, platform ratio tables, and domain-aggregated breakdowns.
//!
//! Ratios are always stored raw as candidate/baseline (or A/B); whether a
//! value below 1 is "better" is a rendering concern, and every report
//! header states the orientation. Domain breakdown averages use the
//! arithmetic mean of fractions; time comparisons aggregate by geomean.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use core::fmt;

use serde::{Deserialize, Serialize};

use crate::measure::{CellId, MeasurementSet};
use crate::trace::Decomposition;
use crate::workload::Mode;

/// exp(mean(log x)), computed in log space to avoid overflow.
pub fn geomean(values: &[f64]) -> Result<f64, AnalyticsError> {
    if values.is_empty() {
        return Err(AnalyticsError::EmptyInput);
    }
    let mut sum = 0.0;
    for &v in values {
        if !v.is_finite() || v <= 0.0 {
            return Err(AnalyticsError::NonPositiveValue { value: v });
        }
        sum += libm::log(v);
    }
    Ok(libm::exp(sum / values.len() as f64))
}

/// `t_a / t_b`. The caller owns the orientation; reports record it.
pub fn speedup_ratio(t_a_us: f64, t_b_us: f64) -> Result<f64, AnalyticsError> {
    if !t_b_us.is_finite() || t_b_us <= 0.0 {
        return Err(AnalyticsError::NonPositiveValue { value: t_b_us });
    }
    if !t_a_us.is_finite() || t_a_us <= 0.0 {
        return Err(AnalyticsError::NonPositiveValue { value: t_a_us });
    }
    Ok(t_a_us / t_b_us)
}

/// Renders a ratio as a signed percent change: 0.288 → "-71.2%",
/// 1.312 → "+31.2%".
pub fn percent_change(ratio: f64) -> String {
    format!("{:+.1}%", (ratio - 1.0) * 100.0)
}

/// Rounds to one decimal place.
fn round1(x: f64) -> f64 {
    libm::round(x * 10.0) / 10.0
}

/// Per-cell metric ratios, candidate over baseline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub cell: CellId,
    pub wall_time_ratio: f64,
    /// Absent when either side reported zero (no relative change exists).
    pub peak_cpu_mem_ratio: Option<f64>,
    pub peak_gpu_mem_ratio: Option<f64>,
}

/// Variant comparison over the three metrics of interest: execution time,
/// CPU memory, GPU memory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantComparison {
    pub baseline_label: String,
    pub candidate_label: String,
    /// "candidate/baseline; <1 means the candidate is better on time".
    pub orientation: String,
    pub rows: Vec<ComparisonRow>,
    pub geomean_wall_time: f64,
    pub geomean_peak_cpu_mem: Option<f64>,
    pub geomean_peak_gpu_mem: Option<f64>,
    /// Workloads present in exactly one side, excluded from all ratios.
    pub only_in_baseline: Vec<String>,
    pub only_in_candidate: Vec<String>,
}

fn index_by_cell(sets: &[MeasurementSet]) -> BTreeMap<CellId, &MeasurementSet> {
    sets.iter().map(|s| (s.cell(), s)).collect()
}

fn ratio_or_none(candidate: u64, baseline: u64) -> Option<f64> {
    if candidate == 0 || baseline == 0 {
        None
    } else {
        Some(candidate as f64 / baseline as f64)
    }
}

/// Joins two measurement sets by (workload, mode, device) and computes the
/// three ratio series plus their geomeans.
pub fn compare_variants(
    baseline_label: &str,
    baseline: &[MeasurementSet],
    candidate_label: &str,
    candidate: &[MeasurementSet],
) -> Result<VariantComparison, AnalyticsError> {
    if baseline.is_empty() || candidate.is_empty() {
        return Err(AnalyticsError::EmptyInput);
    }
    let base = index_by_cell(baseline);
    let cand = index_by_cell(candidate);

    let mut rows = Vec::new();
    for (cell, b) in &base {
        let Some(c) = cand.get(cell) else { continue };
        let bm = b.representative();
        let cm = c.representative();
        rows.push(ComparisonRow {
            cell: cell.clone(),
            wall_time_ratio: speedup_ratio(cm.wall_time_us as f64, bm.wall_time_us as f64)?,
            peak_cpu_mem_ratio: ratio_or_none(cm.peak_cpu_mem_bytes, bm.peak_cpu_mem_bytes),
            peak_gpu_mem_ratio: ratio_or_none(cm.peak_gpu_mem_bytes, bm.peak_gpu_mem_bytes),
        });
    }
    if rows.is_empty() {
        return Err(AnalyticsError::NoCommonWorkloads);
    }

    let workloads =
        |m: &BTreeMap<CellId, &MeasurementSet>| -> Vec<String> {
            let mut names: Vec<String> = m.keys().map(|c| c.workload.clone()).collect();
            names.dedup();
            names
        };
    let base_names = workloads(&base);
    let cand_names = workloads(&cand);
    let only_in_baseline: Vec<String> = base_names
        .iter()
        .filter(|n| !cand_names.contains(n))
        .cloned()
        .collect();
    let only_in_candidate: Vec<String> = cand_names
        .iter()
        .filter(|n| !base_names.contains(n))
        .cloned()
        .collect();

    let wall: Vec<f64> = rows.iter().map(|r| r.wall_time_ratio).collect();
    let cpu: Vec<f64> = rows.iter().filter_map(|r| r.peak_cpu_mem_ratio).collect();
    let gpu: Vec<f64> = rows.iter().filter_map(|r| r.peak_gpu_mem_ratio).collect();

    Ok(VariantComparison {
        baseline_label: String::from(baseline_label),
        candidate_label: String::from(candidate_label),
        orientation: format!(
            "ratios are {candidate_label}/{baseline_label}; <1 means {candidate_label} is lower"
        ),
        rows,
        geomean_wall_time: geomean(&wall)?,
        geomean_peak_cpu_mem: if cpu.is_empty() { None } else { Some(geomean(&cpu)?) },
        geomean_peak_gpu_mem: if gpu.is_empty() { None } else { Some(geomean(&gpu)?) },
        only_in_baseline,
        only_in_candidate,
    })
}

/// Wall-time ratio rows between two platforms, T_A / T_B.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlatformRow {
    pub workload: String,
    pub mode: Mode,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlatformComparison {
    pub platform_a: String,
    pub platform_b: String,
    /// Recorded direction, e.g. "T_A/T_B; <1 means A is faster".
    pub convention: String,
    pub rows: Vec<PlatformRow>,
}

/// Cross-platform execution-time ratios, joined by (workload, mode, device).
pub fn compare_platforms(
    platform_a: &str,
    a: &[MeasurementSet],
    platform_b: &str,
    b: &[MeasurementSet],
) -> Result<PlatformComparison, AnalyticsError> {
    if a.is_empty() || b.is_empty() {
        return Err(AnalyticsError::EmptyInput);
    }
    let a_cells = index_by_cell(a);
    let b_cells = index_by_cell(b);
    let mut rows = Vec::new();
    for (cell, sa) in &a_cells {
        let Some(sb) = b_cells.get(cell) else { continue };
        rows.push(PlatformRow {
            workload: cell.workload.clone(),
            mode: cell.mode,
            ratio: speedup_ratio(
                sa.representative().wall_time_us as f64,
                sb.representative().wall_time_us as f64,
            )?,
        });
    }
    if rows.is_empty() {
        return Err(AnalyticsError::NoCommonWorkloads);
    }
    Ok(PlatformComparison {
        platform_a: String::from(platform_a),
        platform_b: String::from(platform_b),
        convention: format!(
            "each ratio is T_{platform_a}/T_{platform_b}; <1 means {platform_a} is faster"
        ),
        rows,
    })
}

/// One workload's decomposition with its grouping labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BreakdownInput {
    pub workload: String,
    pub domain: String,
    pub mode: Mode,
    pub decomposition: Decomposition,
}

/// Percent columns of one breakdown row, rounded to one decimal. Rows sum
/// to 100 within 0.1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BreakdownRow {
    pub domain: String,
    pub mode: Mode,
    pub active_pct: f64,
    pub movement_pct: f64,
    pub idle_pct: f64,
    /// How many workloads the arithmetic mean covers.
    pub workloads: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkloadBreakdownRow {
    pub workload: String,
    pub domain: String,
    pub mode: Mode,
    pub active_pct: f64,
    pub movement_pct: f64,
    pub idle_pct: f64,
}

/// Breakdown table: per-(domain, mode) averages plus the per-workload
/// stacked rows underlying them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BreakdownTable {
    pub domain_rows: Vec<BreakdownRow>,
    pub workload_rows: Vec<WorkloadBreakdownRow>,
}

/// Arithmetic mean of each fraction per (domain, mode), as percents rounded
/// to one decimal.
pub fn breakdown_report(inputs: &[BreakdownInput]) -> Result<BreakdownTable, AnalyticsError> {
    if inputs.is_empty() {
        return Err(AnalyticsError::EmptyInput);
    }
    let mut groups: BTreeMap<(String, Mode), Vec<&Decomposition>> = BTreeMap::new();
    let mut workload_rows = Vec::with_capacity(inputs.len());
    for input in inputs {
        groups
            .entry((input.domain.clone(), input.mode))
            .or_default()
            .push(&input.decomposition);
        workload_rows.push(WorkloadBreakdownRow {
            workload: input.workload.clone(),
            domain: input.domain.clone(),
            mode: input.mode,
            active_pct: round1(input.decomposition.active_fraction * 100.0),
            movement_pct: round1(input.decomposition.movement_fraction * 100.0),
            idle_pct: round1(input.decomposition.idle_fraction * 100.0),
        });
    }
    let domain_rows = groups
        .into_iter()
        .map(|((domain, mode), decompositions)| {
            let n = decompositions.len() as f64;
            let mean = |f: fn(&Decomposition) -> f64| {
                round1(decompositions.iter().map(|d| f(d)).sum::<f64>() / n * 100.0)
            };
            BreakdownRow {
                domain,
                mode,
                active_pct: mean(|d| d.active_fraction),
                movement_pct: mean(|d| d.movement_fraction),
                idle_pct: mean(|d| d.idle_fraction),
                workloads: decompositions.len() as u32,
            }
        })
        .collect();
    Ok(BreakdownTable {
        domain_rows,
        workload_rows,
    })
}

impl BreakdownRow {
    /// Row conservation check after rounding.
    pub fn sums_to_100(&self) -> bool {
        libm::fabs(self.active_pct + self.movement_pct + self.idle_pct - 100.0) <= 0.1
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum AnalyticsError {
    EmptyInput,
    NonPositiveValue { value: f64 },
    NoCommonWorkloads,
}

impl fmt::Display for AnalyticsError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AnalyticsError::EmptyInput => f.write_str("input must be non-empty"),
            AnalyticsError::NonPositiveValue { value } => {
                write!(f, "values must be positive and finite, got {value}")
            }
            AnalyticsError::NoCommonWorkloads => f.write_str("no common workloads to compare"),
        }
    }
}

impl core::error::Error for AnalyticsError {}
