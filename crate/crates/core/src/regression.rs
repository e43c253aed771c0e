//! Threshold-based regression detection over the four-configuration matrix.
//!
//! A baseline is the persisted per-cell reference taken from the previous
//! accepted nightly. Detection flags a metric when the observed value grows
//! past the relative threshold (default 7% for time and memory); leaks use
//! an absolute rule on post-run resident growth. Flagged cells keep their
//! old baseline entry so repeated nightlies keep comparing against the last
//! known-good state; clean cells advance.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use core::fmt;

use serde::{Deserialize, Serialize};

use crate::measure::CellId;
use crate::workload::RunMetrics;

pub const BASELINE_SCHEMA_VERSION: u32 = 1;

/// Reference metrics plus provenance for one cell.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BaselineCell {
    pub wall_time_us: u64,
    pub peak_cpu_mem_bytes: u64,
    pub peak_gpu_mem_bytes: u64,
    pub post_run_resident_bytes: u64,
    pub commit: String,
    pub timestamp_unix: u64,
}

impl BaselineCell {
    pub fn from_metrics(metrics: &RunMetrics, provenance: &Provenance) -> Self {
        Self {
            wall_time_us: metrics.wall_time_us,
            peak_cpu_mem_bytes: metrics.peak_cpu_mem_bytes,
            peak_gpu_mem_bytes: metrics.peak_gpu_mem_bytes,
            post_run_resident_bytes: metrics.post_run_resident_bytes,
            commit: provenance.commit.clone(),
            timestamp_unix: provenance.timestamp_unix,
        }
    }
}

/// Where a baseline (cell) came from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub commit: String,
    pub timestamp_unix: u64,
}

/// The persisted reference metrics a nightly run is judged against. At most
/// one current entry per cell.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Baseline {
    pub schema_version: u32,
    pub cells: BTreeMap<CellId, BaselineCell>,
}

impl Baseline {
    pub fn empty() -> Self {
        Self {
            schema_version: BASELINE_SCHEMA_VERSION,
            cells: BTreeMap::new(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }
}

/// Detection thresholds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RegressionPolicy {
    /// Relative wall-time increase that flags, e.g. 0.07 for 7%.
    pub time_threshold: f64,
    /// Relative peak-memory increase that flags.
    pub mem_threshold: f64,
    /// Absolute post-run resident growth (bytes) that flags a leak.
    pub leak_threshold_bytes: u64,
    /// Cells with baseline wall time below this floor are never flagged on
    /// time; the relative rule alone would flag noise on sub-millisecond
    /// cells.
    pub min_abs_time_us: u64,
}

impl Default for RegressionPolicy {
    fn default() -> Self {
        Self {
            time_threshold: 0.07,
            mem_threshold: 0.07,
            leak_threshold_bytes: 1 << 20,
            min_abs_time_us: 1000,
        }
    }
}

impl RegressionPolicy {
    pub fn validate(&self) -> Result<(), RegressionError> {
        for threshold in [self.time_threshold, self.mem_threshold] {
            if !threshold.is_finite() || threshold <= 0.0 {
                return Err(RegressionError::NonPositiveThreshold);
            }
        }
        if self.leak_threshold_bytes == 0 {
            return Err(RegressionError::NonPositiveThreshold);
        }
        Ok(())
    }

    pub fn threshold_for(&self, metric: MetricKind) -> f64 {
        match metric {
            MetricKind::WallTime => self.time_threshold,
            MetricKind::PeakCpuMem | MetricKind::PeakGpuMem => self.mem_threshold,
            MetricKind::Leak => 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    WallTime,
    PeakCpuMem,
    PeakGpuMem,
    Leak,
}

impl fmt::Display for MetricKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MetricKind::WallTime => "wall_time",
            MetricKind::PeakCpuMem => "peak_cpu_mem",
            MetricKind::PeakGpuMem => "peak_gpu_mem",
            MetricKind::Leak => "leak",
        })
    }
}

impl core::str::FromStr for MetricKind {
    type Err = RegressionError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "wall_time" => Ok(MetricKind::WallTime),
            "peak_cpu_mem" => Ok(MetricKind::PeakCpuMem),
            "peak_gpu_mem" => Ok(MetricKind::PeakGpuMem),
            "leak" => Ok(MetricKind::Leak),
            _ => Err(RegressionError::BadMetric(String::from(s))),
        }
    }
}

/// One threshold violation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionFinding {
    pub cell: CellId,
    pub metric: MetricKind,
    pub baseline_value: u64,
    pub observed_value: u64,
    /// observed/baseline. Informational for leak findings, which flag on
    /// absolute growth.
    pub ratio: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub culprit: Option<String>,
}

/// Representative metrics of one measured cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservedCell {
    pub cell: CellId,
    pub metrics: RunMetrics,
}

/// Findings plus the cells detection could not compare.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionReport {
    pub findings: Vec<RegressionFinding>,
    /// Observed cells with no baseline entry (first sighting, no finding).
    pub new_cells: Vec<CellId>,
    /// Baseline cells absent from this run.
    pub missing_cells: Vec<CellId>,
}

impl DetectionReport {
    pub fn is_clean(&self) -> bool {
        self.findings.is_empty()
    }
}

/// Flags every common cell metric where observed/baseline meets the
/// threshold: `ratio >= 1 + threshold` for time and peak memory (time only
/// when the baseline clears the absolute floor), absolute growth for leaks.
pub fn detect_regressions(
    baseline: &Baseline,
    observed: &[ObservedCell],
    policy: &RegressionPolicy,
) -> Result<DetectionReport, RegressionError> {
    policy.validate()?;
    if baseline.schema_version != BASELINE_SCHEMA_VERSION {
        return Err(RegressionError::SchemaMismatch {
            found: baseline.schema_version,
            expected: BASELINE_SCHEMA_VERSION,
        });
    }
    if observed.is_empty() {
        return Err(RegressionError::EmptyObserved);
    }

    let mut findings = Vec::new();
    let mut new_cells = Vec::new();
    for obs in observed {
        let Some(base) = baseline.cells.get(&obs.cell) else {
            new_cells.push(obs.cell.clone());
            continue;
        };
        let mut relative = |metric: MetricKind, baseline_value: u64, observed_value: u64| {
            if baseline_value == 0 {
                return; // no relative change exists against a zero base
            }
            if metric == MetricKind::WallTime && baseline_value < policy.min_abs_time_us {
                return;
            }
            let ratio = observed_value as f64 / baseline_value as f64;
            if ratio >= 1.0 + policy.threshold_for(metric) {
                findings.push(RegressionFinding {
                    cell: obs.cell.clone(),
                    metric,
                    baseline_value,
                    observed_value,
                    ratio,
                    culprit: None,
                });
            }
        };
        relative(MetricKind::WallTime, base.wall_time_us, obs.metrics.wall_time_us);
        relative(
            MetricKind::PeakCpuMem,
            base.peak_cpu_mem_bytes,
            obs.metrics.peak_cpu_mem_bytes,
        );
        relative(
            MetricKind::PeakGpuMem,
            base.peak_gpu_mem_bytes,
            obs.metrics.peak_gpu_mem_bytes,
        );

        let grown = obs
            .metrics
            .post_run_resident_bytes
            .saturating_sub(base.post_run_resident_bytes);
        if grown >= policy.leak_threshold_bytes {
            findings.push(RegressionFinding {
                cell: obs.cell.clone(),
                metric: MetricKind::Leak,
                baseline_value: base.post_run_resident_bytes,
                observed_value: obs.metrics.post_run_resident_bytes,
                ratio: obs.metrics.post_run_resident_bytes as f64
                    / (base.post_run_resident_bytes.max(1)) as f64,
                culprit: None,
            });
        }
    }

    let missing_cells = baseline
        .cells
        .keys()
        .filter(|cell| !observed.iter().any(|o| &o.cell == *cell))
        .cloned()
        .collect();

    Ok(DetectionReport {
        findings,
        new_cells,
        missing_cells,
    })
}

/// Advances the baseline: clean cells move to the observed values with the
/// new provenance, flagged cells keep their previous entry, and cells not
/// observed this run are retained. An empty prior baseline initializes from
/// the observation.
pub fn update_baseline(
    baseline: &Baseline,
    observed: &[ObservedCell],
    findings: &[RegressionFinding],
    provenance: &Provenance,
) -> Baseline {
    let mut cells = baseline.cells.clone();
    for obs in observed {
        let flagged = findings.iter().any(|f| f.cell == obs.cell);
        if !flagged {
            cells.insert(
                obs.cell.clone(),
                BaselineCell::from_metrics(&obs.metrics, provenance),
            );
        }
    }
    Baseline {
        schema_version: baseline.schema_version,
        cells,
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RegressionError {
    EmptyObserved,
    SchemaMismatch { found: u32, expected: u32 },
    NonPositiveThreshold,
    BadMetric(String),
}

impl fmt::Display for RegressionError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RegressionError::EmptyObserved => f.write_str("observed matrix is empty"),
            RegressionError::SchemaMismatch { found, expected } => {
                write!(f, "baseline schema {found} does not match expected {expected}")
            }
            RegressionError::NonPositiveThreshold => f.write_str("thresholds must be > 0"),
            RegressionError::BadMetric(s) => write!(
                f,
                "unknown metric {s:?} (expected wall_time|peak_cpu_mem|peak_gpu_mem|leak)"
            ),
        }
    }
}

impl core::error::Error for RegressionError {}
