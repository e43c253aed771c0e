//! Seeded simulated commit histories.
//!
//! A history describes a day of commits with an optional injected step
//! regression at one index, multiplicative measurement noise, and a set of
//! unbuildable commits. It backs the provider traits for tests and demos,
//! and stands in for real builds in the CI entry point's simulated mode.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::bisect::{BuildProvider, CommitInfo, MeasureProvider};
use crate::measure::CellId;
use crate::regression::MetricKind;
use crate::workload::{Device, RunMetrics};
use crate::SplitMix64;

const MIB: u64 = 1 << 20;

/// Parameters of one simulated day.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulatedHistory {
    /// Number of commits, ordered by submission timestamp.
    #[serde(rename = "n")]
    pub commit_count: usize,
    /// First commit exhibiting the regression; `None` for a clean day.
    #[serde(default)]
    pub culprit_index: Option<usize>,
    /// Relative step at the culprit, e.g. 0.2 for +20%.
    #[serde(default = "default_step")]
    pub step: f64,
    /// Multiplicative measurement noise, uniform in ±noise.
    #[serde(default)]
    pub noise: f64,
    #[serde(default)]
    pub unbuildable: BTreeSet<usize>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_base_wall_time")]
    pub base_wall_time_us: u64,
    /// Which metric the step applies to.
    #[serde(default = "default_metric")]
    pub metric: MetricKind,
}

fn default_step() -> f64 {
    0.2
}

fn default_base_wall_time() -> u64 {
    100_000
}

fn default_metric() -> MetricKind {
    MetricKind::WallTime
}

/// Start of the simulated day, one commit per minute from here.
const DAY_START_UNIX: u64 = 1_700_000_000;

impl SimulatedHistory {
    pub fn validate(&self) -> Result<(), String> {
        if self.commit_count == 0 {
            return Err("simulated history needs n >= 1".to_string());
        }
        if let Some(c) = self.culprit_index {
            if c >= self.commit_count {
                return Err(format!(
                    "culprit_index {c} out of range for n={}",
                    self.commit_count
                ));
            }
        }
        if !(self.noise >= 0.0 && self.noise < 1.0) {
            return Err(format!("noise {} must be in [0, 1)", self.noise));
        }
        Ok(())
    }

    pub fn commit_id(index: usize) -> String {
        format!("sim-{index:05}")
    }

    pub fn parse_commit_id(id: &str) -> Option<usize> {
        id.strip_prefix("sim-")?.parse().ok()
    }

    pub fn commits(&self) -> Vec<CommitInfo> {
        (0..self.commit_count)
            .map(|i| CommitInfo {
                id: Self::commit_id(i),
                timestamp_unix: DAY_START_UNIX + 60 * i as u64,
            })
            .collect()
    }

    pub fn is_regressed(&self, index: usize) -> bool {
        self.culprit_index.is_some_and(|c| index >= c)
    }

    fn base_for(&self, metric: MetricKind, device: Device) -> u64 {
        match metric {
            MetricKind::WallTime => self.base_wall_time_us,
            MetricKind::PeakCpuMem => 512 * MIB,
            MetricKind::PeakGpuMem => match device {
                Device::Gpu => 1024 * MIB,
                Device::Cpu => 0,
            },
            MetricKind::Leak => 64 * MIB,
        }
    }

    /// The stepped, noisy value of `base` at a commit. Deterministic per
    /// (seed, index), so repeated probes of one commit agree.
    fn stepped_value(&self, index: usize, base: u64) -> u64 {
        let step_factor = if self.is_regressed(index) {
            1.0 + self.step
        } else {
            1.0
        };
        let mut rng = SplitMix64::new(
            self.seed
                .wrapping_add((index as u64 + 1).wrapping_mul(0x9e37_79b9_7f4a_7c15)),
        );
        let noise_factor = 1.0 + (rng.next_f64() * 2.0 - 1.0) * self.noise;
        libm::round(base as f64 * step_factor * noise_factor) as u64
    }

    /// The history's stepped metric at a commit (GPU-cell base).
    pub fn metric_value(&self, index: usize) -> u64 {
        self.stepped_value(index, self.base_for(self.metric, Device::Gpu))
    }

    /// The reference the day is judged against: the noiseless pre-step
    /// value (the previous accepted nightly).
    pub fn baseline_value(&self) -> u64 {
        self.base_for(self.metric, Device::Gpu)
    }

    /// Full metrics of one cell at one commit, for the simulated nightly
    /// measurement. Only the stepped metric varies; everything else is
    /// constant so no spurious findings appear.
    pub fn run_metrics(&self, index: usize, cell: &CellId) -> RunMetrics {
        let value = |metric: MetricKind| {
            let base = self.base_for(metric, cell.device);
            if metric == self.metric && base > 0 {
                self.stepped_value(index, base)
            } else {
                base
            }
        };
        RunMetrics {
            wall_time_us: value(MetricKind::WallTime),
            peak_cpu_mem_bytes: value(MetricKind::PeakCpuMem),
            peak_gpu_mem_bytes: value(MetricKind::PeakGpuMem),
            post_run_resident_bytes: value(MetricKind::Leak),
        }
    }

    pub fn providers(&self) -> (SimulatedBuild, SimulatedMeasure) {
        (
            SimulatedBuild { history: self.clone() },
            SimulatedMeasure { history: self.clone() },
        )
    }
}

/// Build provider over a simulated history: the "artifact" is the commit id.
#[derive(Debug, Clone)]
pub struct SimulatedBuild {
    pub history: SimulatedHistory,
}

impl BuildProvider for SimulatedBuild {
    fn build(&mut self, commit: &CommitInfo) -> Result<String, String> {
        let index = SimulatedHistory::parse_commit_id(&commit.id)
            .ok_or_else(|| format!("unknown simulated commit {:?}", commit.id))?;
        if self.history.unbuildable.contains(&index) {
            return Err(format!("simulated build failure at {}", commit.id));
        }
        Ok(commit.id.clone())
    }
}

#[derive(Debug, Clone)]
pub struct SimulatedMeasure {
    pub history: SimulatedHistory,
}

impl MeasureProvider for SimulatedMeasure {
    fn measure(
        &mut self,
        _artifact: &str,
        commit: &CommitInfo,
        cell: &CellId,
        metric: MetricKind,
    ) -> Result<u64, String> {
        let index = SimulatedHistory::parse_commit_id(&commit.id)
            .ok_or_else(|| format!("unknown simulated commit {:?}", commit.id))?;
        let metrics = self.history.run_metrics(index, cell);
        Ok(match metric {
            MetricKind::WallTime => metrics.wall_time_us,
            MetricKind::PeakCpuMem => metrics.peak_cpu_mem_bytes,
            MetricKind::PeakGpuMem => metrics.peak_gpu_mem_bytes,
            MetricKind::Leak => metrics.post_run_resident_bytes,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::workload::Mode;

    fn history() -> SimulatedHistory {
        SimulatedHistory {
            commit_count: 10,
            culprit_index: Some(4),
            step: 0.2,
            noise: 0.0,
            unbuildable: BTreeSet::new(),
            seed: 1,
            base_wall_time_us: 100_000,
            metric: MetricKind::WallTime,
        }
    }

    #[test]
    fn step_applies_from_culprit_onward() {
        let h = history();
        for i in 0..4 {
            assert_eq!(h.metric_value(i), 100_000);
        }
        for i in 4..10 {
            assert_eq!(h.metric_value(i), 120_000);
        }
    }

    #[test]
    fn noise_is_bounded_and_deterministic() {
        let mut h = history();
        h.noise = 0.03;
        for i in 0..10 {
            let v = h.metric_value(i);
            assert_eq!(v, h.metric_value(i));
            let base = if i >= 4 { 120_000.0 } else { 100_000.0 };
            assert!((v as f64 - base).abs() <= base * 0.03 + 1.0);
        }
    }

    #[test]
    fn commit_ids_round_trip_and_timestamps_ascend() {
        let h = history();
        let commits = h.commits();
        assert_eq!(commits.len(), 10);
        for (i, c) in commits.iter().enumerate() {
            assert_eq!(SimulatedHistory::parse_commit_id(&c.id), Some(i));
        }
        assert!(commits.windows(2).all(|w| w[0].timestamp_unix < w[1].timestamp_unix));
    }

    #[test]
    fn cpu_cells_have_zero_gpu_memory() {
        let h = history();
        let cpu_cell = CellId::new("w", Mode::Eval, Device::Cpu);
        let gpu_cell = CellId::new("w", Mode::Eval, Device::Gpu);
        assert_eq!(h.run_metrics(0, &cpu_cell).peak_gpu_mem_bytes, 0);
        assert!(h.run_metrics(0, &gpu_cell).peak_gpu_mem_bytes > 0);
    }

    #[test]
    fn only_the_stepped_metric_moves() {
        let h = history();
        let cell = CellId::new("w", Mode::Eval, Device::Gpu);
        let before = h.run_metrics(0, &cell);
        let after = h.run_metrics(9, &cell);
        assert!(after.wall_time_us > before.wall_time_us);
        assert_eq!(after.peak_cpu_mem_bytes, before.peak_cpu_mem_bytes);
        assert_eq!(after.peak_gpu_mem_bytes, before.peak_gpu_mem_bytes);
        assert_eq!(after.post_run_resident_bytes, before.post_run_resident_bytes);
    }

    #[test]
    fn leak_metric_steps_post_run_resident() {
        let mut h = history();
        h.metric = MetricKind::Leak;
        let cell = CellId::new("w", Mode::Eval, Device::Gpu);
        let before = h.run_metrics(0, &cell);
        let after = h.run_metrics(9, &cell);
        assert_eq!(before.post_run_resident_bytes, 64 * MIB);
        // +20% of 64 MiB is well past the 1 MiB leak threshold.
        assert!(after.post_run_resident_bytes >= before.post_run_resident_bytes + MIB);
        assert_eq!(after.wall_time_us, before.wall_time_us);
    }

    #[test]
    fn validation() {
        let mut h = history();
        assert!(h.validate().is_ok());
        h.culprit_index = Some(10);
        assert!(h.validate().is_err());
        h.culprit_index = None;
        h.commit_count = 0;
        assert!(h.validate().is_err());
    }

    #[test]
    fn json_round_trip_with_defaults() {
        let parsed: SimulatedHistory =
            serde_json::from_str(r#"{"n": 70, "culprit_index": 42}"#).unwrap();
        assert_eq!(parsed.commit_count, 70);
        assert_eq!(parsed.culprit_index, Some(42));
        assert_eq!(parsed.step, 0.2);
        assert_eq!(parsed.noise, 0.0);
        assert_eq!(parsed.metric, MetricKind::WallTime);
        assert!(parsed.unbuildable.is_empty());
    }
}
