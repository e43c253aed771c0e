//! Measurement discipline: repeated runs with median-run selection, the
//! four-configuration matrix, and the batch-size doubling search.
//!
//! The invocation loops live in the harness crate; this module owns the
//! policy so it can be tested against in-process fakes.

use alloc::string::String;
use alloc::vec::Vec;

use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::workload::{Device, Mode, RunMetrics, RunResult};

/// One (workload, mode, device) combination of the matrix.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CellId {
    pub workload: String,
    pub mode: Mode,
    pub device: Device,
}

impl CellId {
    pub fn new(workload: impl Into<String>, mode: Mode, device: Device) -> Self {
        Self {
            workload: workload.into(),
            mode,
            device,
        }
    }
}

impl fmt::Display for CellId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}/{}", self.workload, self.mode, self.device)
    }
}

impl FromStr for CellId {
    type Err = MeasureError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut parts = s.rsplitn(3, '/');
        let device = parts.next();
        let mode = parts.next();
        let workload = parts.next();
        match (workload, mode, device) {
            (Some(w), Some(m), Some(d)) if !w.is_empty() => Ok(CellId {
                workload: String::from(w),
                mode: m.parse().map_err(|_| MeasureError::BadCellId(String::from(s)))?,
                device: d.parse().map_err(|_| MeasureError::BadCellId(String::from(s)))?,
            }),
            _ => Err(MeasureError::BadCellId(String::from(s))),
        }
    }
}

// Cell ids appear as JSON object keys, so they serialize as their display
// form rather than as a struct.
impl Serialize for CellId {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for CellId {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reduction {
    /// Report the complete statistics of the run with the median wall time.
    MedianRun,
    /// Report per-metric arithmetic means across runs.
    ArithmeticMean,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BatchSize {
    Auto,
    Fixed(u32),
}

impl fmt::Display for BatchSize {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BatchSize::Auto => f.write_str("auto"),
            BatchSize::Fixed(n) => write!(f, "{n}"),
        }
    }
}

impl FromStr for BatchSize {
    type Err = MeasureError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "auto" {
            return Ok(BatchSize::Auto);
        }
        match s.parse::<u32>() {
            Ok(n) if n >= 1 => Ok(BatchSize::Fixed(n)),
            _ => Err(MeasureError::BadBatchSize(String::from(s))),
        }
    }
}

/// How one cell gets measured.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunConfig {
    pub mode: Mode,
    pub device: Device,
    pub batch_size: BatchSize,
    pub repeats: u32,
    pub reduction: Reduction,
}

pub const DEFAULT_REPEATS: u32 = 10;

impl RunConfig {
    pub fn new(mode: Mode, device: Device, batch_size: BatchSize) -> Self {
        Self {
            mode,
            device,
            batch_size,
            repeats: DEFAULT_REPEATS,
            reduction: Reduction::MedianRun,
        }
    }

    pub fn validate(&self) -> Result<(), MeasureError> {
        if self.repeats < 1 {
            return Err(MeasureError::InvalidRepeats);
        }
        if self.reduction == Reduction::ArithmeticMean && self.repeats < 2 {
            return Err(MeasureError::MeanNeedsTwoRepeats);
        }
        Ok(())
    }
}

/// Representative metrics of a measurement set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Selection {
    /// Index into `runs` of the median-wall-time run.
    MedianIndex(usize),
    /// Arithmetic means across surviving runs.
    Mean {
        wall_time_us: f64,
        peak_cpu_mem_bytes: f64,
        peak_gpu_mem_bytes: f64,
        post_run_resident_bytes: f64,
    },
}

/// Repeated runs of one (workload, config) cell plus the representative.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementSet {
    pub workload: String,
    pub mode: Mode,
    pub device: Device,
    /// Resolved batch size (never `auto`).
    pub batch_size: u32,
    pub repeats: u32,
    pub reduction: Reduction,
    /// All raw runs, in invocation order, including dropped failures.
    pub runs: Vec<RunResult>,
    pub selected: Selection,
    /// True when failed runs were dropped before reduction.
    pub degraded: bool,
}

impl MeasurementSet {
    pub fn cell(&self) -> CellId {
        CellId::new(self.workload.clone(), self.mode, self.device)
    }

    /// Structural soundness of a set that came from outside (a record
    /// file): the selection must point at an ok run.
    pub fn validate(&self) -> Result<(), MeasureError> {
        if self.runs.is_empty() {
            return Err(MeasureError::EmptyRuns);
        }
        if let Selection::MedianIndex(i) = self.selected {
            match self.runs.get(i) {
                Some(run) if run.is_ok() && run.metrics.is_some() => {}
                _ => return Err(MeasureError::BadSelection { index: i }),
            }
        }
        Ok(())
    }

    /// The metrics regressions are judged on: the median run's metrics, or
    /// the rounded means in mean mode.
    pub fn representative(&self) -> RunMetrics {
        match &self.selected {
            Selection::MedianIndex(i) => self.runs[*i]
                .metrics
                .expect("selected run is an ok run"),
            Selection::Mean {
                wall_time_us,
                peak_cpu_mem_bytes,
                peak_gpu_mem_bytes,
                post_run_resident_bytes,
            } => RunMetrics {
                wall_time_us: libm::round(*wall_time_us) as u64,
                peak_cpu_mem_bytes: libm::round(*peak_cpu_mem_bytes) as u64,
                peak_gpu_mem_bytes: libm::round(*peak_gpu_mem_bytes) as u64,
                post_run_resident_bytes: libm::round(*post_run_resident_bytes) as u64,
            },
        }
    }
}

/// Index of the run whose wall time is the ⌈n/2⌉-th smallest (odd n) or the
/// lower-middle (n/2)-th smallest (even n). Ties go to the earliest run, so
/// the reported statistics always belong to one actual run.
pub fn select_median_run(runs: &[RunResult]) -> Result<usize, MeasureError> {
    if runs.is_empty() {
        return Err(MeasureError::EmptyRuns);
    }
    let mut wall_times = Vec::with_capacity(runs.len());
    for (index, run) in runs.iter().enumerate() {
        match run.wall_time_us() {
            Some(w) if run.is_ok() => wall_times.push(w),
            _ => return Err(MeasureError::RunNotOk { index }),
        }
    }
    let mut sorted = wall_times.clone();
    sorted.sort_unstable();
    // ⌈n/2⌉-th smallest covers both rules: the middle for odd n, the
    // lower middle for even n.
    let order_statistic = sorted[sorted.len().div_ceil(2) - 1];
    Ok(wall_times
        .iter()
        .position(|&w| w == order_statistic)
        .expect("order statistic came from this list"))
}

/// Applies the failure policy and the configured reduction to raw runs.
///
/// Any OOM aborts (the caller decides what to do). More than ⌈repeats/2⌉
/// failed runs is a measurement failure; fewer failures degrade the set,
/// which then still needs at least 3 surviving runs.
pub fn reduce_runs(
    workload: &str,
    config: &RunConfig,
    batch_size: u32,
    runs: Vec<RunResult>,
) -> Result<MeasurementSet, MeasureError> {
    config.validate()?;
    if runs.is_empty() {
        return Err(MeasureError::EmptyRuns);
    }
    if runs.iter().any(|r| r.exit_class == crate::workload::ExitClass::Oom) {
        return Err(MeasureError::OomEncountered);
    }
    let failed = runs.iter().filter(|r| !r.is_ok()).count();
    if runs.len() != config.repeats as usize {
        // A clean set must hold exactly `repeats` runs; anything else means
        // the invocation loop and the config disagree.
        return Err(MeasureError::RunCountMismatch {
            runs: runs.len(),
            repeats: config.repeats,
        });
    }
    if failed > (config.repeats as usize).div_ceil(2) {
        return Err(MeasureError::TooManyFailures {
            failed,
            repeats: config.repeats,
        });
    }
    let degraded = failed > 0;
    let survivors: Vec<usize> = runs
        .iter()
        .enumerate()
        .filter(|(_, r)| r.is_ok())
        .map(|(i, _)| i)
        .collect();
    if degraded && survivors.len() < 3 {
        return Err(MeasureError::TooFewSurvivors {
            survived: survivors.len(),
        });
    }

    let selected = match config.reduction {
        Reduction::MedianRun => {
            let surviving_runs: Vec<RunResult> =
                survivors.iter().map(|&i| runs[i].clone()).collect();
            Selection::MedianIndex(survivors[select_median_run(&surviving_runs)?])
        }
        Reduction::ArithmeticMean => {
            let n = survivors.len() as f64;
            let mut wall = 0.0;
            let mut cpu = 0.0;
            let mut gpu = 0.0;
            let mut resident = 0.0;
            for &i in &survivors {
                let m = runs[i].metrics.expect("survivors are ok runs");
                wall += m.wall_time_us as f64;
                cpu += m.peak_cpu_mem_bytes as f64;
                gpu += m.peak_gpu_mem_bytes as f64;
                resident += m.post_run_resident_bytes as f64;
            }
            Selection::Mean {
                wall_time_us: wall / n,
                peak_cpu_mem_bytes: cpu / n,
                peak_gpu_mem_bytes: gpu / n,
                post_run_resident_bytes: resident / n,
            }
        }
    };

    Ok(MeasurementSet {
        workload: String::from(workload),
        mode: config.mode,
        device: config.device,
        batch_size,
        repeats: config.repeats,
        reduction: config.reduction,
        runs,
        selected,
        degraded,
    })
}

/// Doubling-search probe cap: batch sizes above this are never probed, so
/// workloads that never OOM terminate the search.
pub const DEFAULT_SEARCH_CAP: u32 = 1 << 15;

/// What a single search probe observed. `score` is the device-utilization
/// figure of merit: trace-derived active fraction on GPU, throughput
/// (batch_size / wall_time) on CPU.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeStatus {
    Measured { wall_time_us: u64, score: f64 },
    Oom,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchOutcome {
    pub best_batch_size: u32,
    /// Probe log in schedule order: 1, 2, 4, ...
    pub probes: Vec<(u32, ProbeStatus)>,
}

/// Batch-size doubling search: probes 1, 2, 4, ... with a single run each,
/// stopping at the first OOM or at the cap, and returns the probed batch
/// size with the highest score. Ties break toward the larger batch size.
pub fn search_batch_size(
    cap: u32,
    mut probe: impl FnMut(u32) -> ProbeStatus,
) -> Result<SearchOutcome, MeasureError> {
    if cap < 1 {
        return Err(MeasureError::InvalidSearchCap);
    }
    let mut probes: Vec<(u32, ProbeStatus)> = Vec::new();
    let mut best: Option<(u32, f64)> = None;
    let mut batch_size = 1u32;
    loop {
        let status = probe(batch_size);
        probes.push((batch_size, status));
        match status {
            ProbeStatus::Measured { score, .. } => {
                // `>=` prefers the later (larger) batch size on score ties.
                if best.is_none_or(|(_, s)| score >= s) {
                    best = Some((batch_size, score));
                }
            }
            ProbeStatus::Oom => {
                if batch_size == 1 {
                    return Err(MeasureError::NoFeasibleBatch);
                }
                break;
            }
            ProbeStatus::Failed => {}
        }
        if batch_size >= cap {
            break;
        }
        batch_size = match batch_size.checked_mul(2) {
            Some(next) => next,
            None => break,
        };
    }
    match best {
        Some((best_batch_size, _)) => Ok(SearchOutcome {
            best_batch_size,
            probes,
        }),
        None => Err(MeasureError::AllProbesFailed),
    }
}

/// Per-cell outcome within a workload's configuration matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellStatus {
    Measured(MeasurementSet),
    Skipped { reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixCell {
    pub mode: Mode,
    pub device: Device,
    pub status: CellStatus,
}

/// The four-configuration matrix of one workload: training on CPU, training
/// on GPU, inference on CPU, inference on GPU — always exactly four cells,
/// each measured or skipped with a reason.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigMatrix {
    pub workload: String,
    pub cells: Vec<MatrixCell>,
}

/// Fixed cell order of the matrix.
pub const MATRIX_CELLS: [(Mode, Device); 4] = [
    (Mode::Train, Device::Cpu),
    (Mode::Train, Device::Gpu),
    (Mode::Eval, Device::Cpu),
    (Mode::Eval, Device::Gpu),
];

impl ConfigMatrix {
    pub fn measured_sets(&self) -> impl Iterator<Item = &MeasurementSet> {
        self.cells.iter().filter_map(|c| match &c.status {
            CellStatus::Measured(set) => Some(set),
            CellStatus::Skipped { .. } => None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MeasureError {
    EmptyRuns,
    RunNotOk { index: usize },
    BadSelection { index: usize },
    OomEncountered,
    RunCountMismatch { runs: usize, repeats: u32 },
    TooManyFailures { failed: usize, repeats: u32 },
    TooFewSurvivors { survived: usize },
    InvalidRepeats,
    MeanNeedsTwoRepeats,
    InvalidSearchCap,
    NoFeasibleBatch,
    AllProbesFailed,
    BadCellId(String),
    BadBatchSize(String),
}

impl fmt::Display for MeasureError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MeasureError::EmptyRuns => f.write_str("no runs to reduce"),
            MeasureError::RunNotOk { index } => {
                write!(f, "run {index} is not ok; median selection needs ok runs")
            }
            MeasureError::BadSelection { index } => {
                write!(f, "selected index {index} is not an ok run")
            }
            MeasureError::OomEncountered => f.write_str("a run hit OOM"),
            MeasureError::RunCountMismatch { runs, repeats } => {
                write!(f, "{runs} runs recorded for repeats={repeats}")
            }
            MeasureError::TooManyFailures { failed, repeats } => {
                write!(f, "{failed} of {repeats} runs failed; measurement failed")
            }
            MeasureError::TooFewSurvivors { survived } => {
                write!(f, "only {survived} runs survived; need at least 3")
            }
            MeasureError::InvalidRepeats => f.write_str("repeats must be >= 1"),
            MeasureError::MeanNeedsTwoRepeats => {
                f.write_str("arithmetic_mean reduction needs repeats >= 2")
            }
            MeasureError::InvalidSearchCap => f.write_str("search cap must be >= 1"),
            MeasureError::NoFeasibleBatch => f.write_str("batch size 1 already OOMs"),
            MeasureError::AllProbesFailed => f.write_str("no search probe succeeded"),
            MeasureError::BadCellId(s) => {
                write!(f, "bad cell id {s:?} (expected workload/mode/device)")
            }
            MeasureError::BadBatchSize(s) => {
                write!(f, "bad batch size {s:?} (expected a positive integer or `auto`)")
            }
        }
    }
}

impl core::error::Error for MeasureError {}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::SplitMix64;
    use alloc::vec;

    pub(crate) fn ok_run(wall_time_us: u64) -> RunResult {
        RunResult::ok(
            RunMetrics {
                wall_time_us,
                peak_cpu_mem_bytes: 1000,
                peak_gpu_mem_bytes: 0,
                post_run_resident_bytes: 100,
            },
            None,
        )
        .unwrap()
    }

    fn failed_run() -> RunResult {
        RunResult::workload_error(String::from("exit code 3"))
    }

    /// Sort-based oracle for the lower-middle median rule with
    /// earliest-index tie break. Independent of `select_median_run`.
    pub(crate) fn median_oracle(wall_times: &[u64]) -> usize {
        let mut sorted: Vec<u64> = wall_times.to_vec();
        sorted.sort_unstable();
        let value = sorted[sorted.len().div_ceil(2) - 1];
        wall_times.iter().position(|&w| w == value).unwrap()
    }

    #[test]
    fn median_singleton() {
        assert_eq!(select_median_run(&[ok_run(5)]).unwrap(), 0);
    }

    #[test]
    fn median_odd_count() {
        let runs = vec![ok_run(3), ok_run(1), ok_run(2)];
        assert_eq!(select_median_run(&runs).unwrap(), 2);
    }

    #[test]
    fn median_even_count_is_lower_middle() {
        let runs: Vec<RunResult> = (1..=10).map(ok_run).collect();
        assert_eq!(select_median_run(&runs).unwrap(), 4);
        assert_eq!(runs[4].wall_time_us(), Some(5));
    }

    #[test]
    fn median_tie_breaks_to_earliest_index() {
        let runs = vec![ok_run(7), ok_run(5), ok_run(5)];
        assert_eq!(select_median_run(&runs).unwrap(), 1);
    }

    #[test]
    fn median_rejects_empty_and_failed() {
        assert_eq!(select_median_run(&[]), Err(MeasureError::EmptyRuns));
        let runs = vec![ok_run(1), failed_run()];
        assert_eq!(
            select_median_run(&runs),
            Err(MeasureError::RunNotOk { index: 1 })
        );
    }

    #[test]
    fn median_matches_oracle_and_is_permutation_invariant() {
        let mut rng = SplitMix64::new(99);
        for _ in 0..200 {
            let n = 1 + rng.next_below(12) as usize;
            let wall_times: Vec<u64> = (0..n).map(|_| 1 + rng.next_below(50)).collect();
            let runs: Vec<RunResult> = wall_times.iter().map(|&w| ok_run(w)).collect();
            let selected = select_median_run(&runs).unwrap();
            assert_eq!(selected, median_oracle(&wall_times));

            // The selected *value* is invariant under permutation.
            let mut shuffled = wall_times.clone();
            rng.shuffle(&mut shuffled);
            let shuffled_runs: Vec<RunResult> = shuffled.iter().map(|&w| ok_run(w)).collect();
            let permuted = select_median_run(&shuffled_runs).unwrap();
            assert_eq!(shuffled[permuted], wall_times[selected]);

            // And it lies between min and max.
            let value = wall_times[selected];
            assert!(value >= *wall_times.iter().min().unwrap());
            assert!(value <= *wall_times.iter().max().unwrap());
        }
    }

    fn config(repeats: u32) -> RunConfig {
        RunConfig {
            repeats,
            ..RunConfig::new(Mode::Eval, Device::Cpu, BatchSize::Fixed(8))
        }
    }

    #[test]
    fn reduce_selects_median_of_clean_runs() {
        let runs: Vec<RunResult> = [40, 10, 30, 20, 50].iter().map(|&w| ok_run(w)).collect();
        let set = reduce_runs("demo", &config(5), 8, runs).unwrap();
        assert_eq!(set.selected, Selection::MedianIndex(2));
        assert!(!set.degraded);
        assert_eq!(set.representative().wall_time_us, 30);
    }

    #[test]
    fn reduce_rejects_run_count_mismatch() {
        let runs = vec![ok_run(1), ok_run(2)];
        assert_eq!(
            reduce_runs("demo", &config(5), 8, runs),
            Err(MeasureError::RunCountMismatch { runs: 2, repeats: 5 })
        );
    }

    #[test]
    fn reduce_aborts_on_oom() {
        let runs = vec![ok_run(10), RunResult::oom()];
        assert_eq!(
            reduce_runs("demo", &config(10), 8, runs),
            Err(MeasureError::OomEncountered)
        );
    }

    #[test]
    fn reduce_fails_on_majority_failures() {
        let mut runs: Vec<RunResult> = (0..6).map(|_| failed_run()).collect();
        runs.extend((0..4).map(|i| ok_run(10 + i)));
        assert_eq!(
            reduce_runs("demo", &config(10), 8, runs),
            Err(MeasureError::TooManyFailures { failed: 6, repeats: 10 })
        );
    }

    #[test]
    fn reduce_degrades_with_enough_survivors() {
        let mut runs: Vec<RunResult> = (0..4).map(|_| failed_run()).collect();
        runs.extend([ok_run(30), ok_run(10), ok_run(20), ok_run(40), ok_run(50), ok_run(60)]);
        let set = reduce_runs("demo", &config(10), 8, runs).unwrap();
        assert!(set.degraded);
        // Median over the six survivors (lower middle of 10,20,30,40,50,60
        // is 30) at its original index.
        assert_eq!(set.selected, Selection::MedianIndex(4));
    }

    #[test]
    fn reduce_requires_three_survivors_when_degraded() {
        let runs = vec![failed_run(), ok_run(10), ok_run(20)];
        assert_eq!(
            reduce_runs("demo", &config(3), 8, runs),
            Err(MeasureError::TooFewSurvivors { survived: 2 })
        );
    }

    #[test]
    fn reduce_mean_mode() {
        let mut cfg = config(4);
        cfg.reduction = Reduction::ArithmeticMean;
        let runs: Vec<RunResult> = [10, 20, 30, 40].iter().map(|&w| ok_run(w)).collect();
        let set = reduce_runs("demo", &cfg, 8, runs).unwrap();
        match set.selected {
            Selection::Mean { wall_time_us, .. } => assert_eq!(wall_time_us, 25.0),
            _ => panic!("expected mean selection"),
        }
        assert_eq!(set.representative().wall_time_us, 25);

        let mut bad = config(1);
        bad.reduction = Reduction::ArithmeticMean;
        assert_eq!(bad.validate(), Err(MeasureError::MeanNeedsTwoRepeats));
    }

    #[test]
    fn search_follows_doubling_schedule_to_oom() {
        let outcome = search_batch_size(DEFAULT_SEARCH_CAP, |bs| {
            if bs >= 512 {
                ProbeStatus::Oom
            } else {
                let score = crate::synth::SYNTH_CONV.utilization(bs);
                ProbeStatus::Measured { wall_time_us: 100, score }
            }
        })
        .unwrap();
        assert_eq!(outcome.best_batch_size, 64);
        let schedule: Vec<u32> = outcome.probes.iter().map(|(bs, _)| *bs).collect();
        assert_eq!(schedule, vec![1, 2, 4, 8, 16, 32, 64, 128, 256, 512]);
        assert!(matches!(outcome.probes.last(), Some((512, ProbeStatus::Oom))));
    }

    #[test]
    fn search_monotone_curve_returns_last_feasible() {
        let outcome = search_batch_size(DEFAULT_SEARCH_CAP, |bs| {
            if bs >= 32 {
                ProbeStatus::Oom
            } else {
                let score = crate::synth::SYNTH_MATMUL.utilization(bs);
                ProbeStatus::Measured { wall_time_us: 100, score }
            }
        })
        .unwrap();
        assert_eq!(outcome.best_batch_size, 16);
        assert_eq!(outcome.probes.len(), 6); // 1..16 plus the OOM probe at 32
    }

    #[test]
    fn search_oom_at_one_is_no_feasible_batch() {
        assert_eq!(
            search_batch_size(DEFAULT_SEARCH_CAP, |_| ProbeStatus::Oom),
            Err(MeasureError::NoFeasibleBatch)
        );
    }

    #[test]
    fn search_stops_at_cap_and_breaks_ties_up() {
        let outcome = search_batch_size(DEFAULT_SEARCH_CAP, |_| ProbeStatus::Measured {
            wall_time_us: 7000,
            score: 0.5,
        })
        .unwrap();
        assert_eq!(outcome.best_batch_size, DEFAULT_SEARCH_CAP);
        assert_eq!(outcome.probes.len(), 16); // 2^0 ..= 2^15
    }

    #[test]
    fn search_skips_failed_probes() {
        let outcome = search_batch_size(8, |bs| {
            if bs == 2 {
                ProbeStatus::Failed
            } else {
                ProbeStatus::Measured { wall_time_us: 100, score: 1.0 / bs as f64 }
            }
        })
        .unwrap();
        assert_eq!(outcome.best_batch_size, 1);
        assert_eq!(outcome.probes.len(), 4);

        assert_eq!(
            search_batch_size(8, |_| ProbeStatus::Failed),
            Err(MeasureError::AllProbesFailed)
        );
    }

    #[test]
    fn search_probe_count_is_bounded_by_log_of_threshold() {
        for threshold in [2u32, 3, 8, 100, 512] {
            let outcome = search_batch_size(DEFAULT_SEARCH_CAP, |bs| {
                if bs >= threshold {
                    ProbeStatus::Oom
                } else {
                    ProbeStatus::Measured { wall_time_us: 10, score: bs as f64 }
                }
            })
            .unwrap();
            let bound = (threshold.ilog2() + 1) as usize + 1;
            assert!(outcome.probes.len() <= bound);
        }
    }

    #[test]
    fn cell_id_round_trip() {
        let id = CellId::new("synth-conv", Mode::Train, Device::Gpu);
        assert_eq!(id.to_string(), "synth-conv/train/gpu");
        assert_eq!("synth-conv/train/gpu".parse::<CellId>().unwrap(), id);
        assert!("nope".parse::<CellId>().is_err());
        assert!("w/x/cpu".parse::<CellId>().is_err());
    }

    #[test]
    fn matrix_order_matches_the_four_configurations() {
        assert_eq!(
            MATRIX_CELLS,
            [
                (Mode::Train, Device::Cpu),
                (Mode::Train, Device::Gpu),
                (Mode::Eval, Device::Cpu),
                (Mode::Eval, Device::Gpu),
            ]
        );
    }
}
