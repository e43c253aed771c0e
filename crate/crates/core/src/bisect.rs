//! First-bad-commit search over a day's commits.
//!
//! The predicate is assumed monotone (good... good bad... bad, one step
//! change per day); violations surface as "regression not reproduced" or
//! as oracle mismatches in tests. Build and measurement sit behind provider
//! traits so the same search drives real checkouts and simulated histories.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::measure::CellId;
use crate::regression::{MetricKind, RegressionFinding, RegressionPolicy};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommitInfo {
    pub id: String,
    pub timestamp_unix: u64,
}

/// Good/bad classification of an observed metric value against the
/// baseline reference.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Predicate {
    /// Bad iff observed/baseline >= 1 + threshold.
    RelativeIncrease { baseline_value: u64, threshold: f64 },
    /// Bad iff observed - baseline >= threshold_bytes (leak rule).
    AbsoluteIncrease { baseline_value: u64, threshold_bytes: u64 },
}

impl Predicate {
    /// The predicate a finding implies under the given policy.
    pub fn for_finding(finding: &RegressionFinding, policy: &RegressionPolicy) -> Predicate {
        match finding.metric {
            MetricKind::Leak => Predicate::AbsoluteIncrease {
                baseline_value: finding.baseline_value,
                threshold_bytes: policy.leak_threshold_bytes,
            },
            metric => Predicate::RelativeIncrease {
                baseline_value: finding.baseline_value,
                threshold: policy.threshold_for(metric),
            },
        }
    }

    pub fn is_bad(&self, observed: u64) -> bool {
        match *self {
            Predicate::RelativeIncrease {
                baseline_value,
                threshold,
            } => {
                baseline_value > 0
                    && observed as f64 / baseline_value as f64 >= 1.0 + threshold
            }
            Predicate::AbsoluteIncrease {
                baseline_value,
                threshold_bytes,
            } => observed.saturating_sub(baseline_value) >= threshold_bytes,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeOutcome {
    Good { observed: u64 },
    Bad { observed: u64 },
    Unbuildable { reason: String },
    MeasurementFailed { reason: String },
}

impl ProbeOutcome {
    /// Probes that cannot classify the commit and must be skipped over.
    fn is_unusable(&self) -> bool {
        matches!(
            self,
            ProbeOutcome::Unbuildable { .. } | ProbeOutcome::MeasurementFailed { .. }
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeLogEntry {
    pub index: usize,
    pub commit: String,
    pub outcome: ProbeOutcome,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BisectionResult {
    Culprit { index: usize, commit: String },
    Inconclusive { reason: String },
}

/// A completed search: the ordered range, the probes it actually executed,
/// and the determination.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BisectionSession {
    pub commits: Vec<CommitInfo>,
    pub cell: CellId,
    pub metric: MetricKind,
    pub predicate: Predicate,
    pub probe_log: Vec<ProbeLogEntry>,
    pub result: BisectionResult,
}

/// Documented slack on the probe-log-length invariant beyond ⌈log₂ n⌉,
/// covering the boundary verification probe and skip scans.
pub const SKIP_ALLOWANCE: usize = 4;

/// Probe budget the search is tested against: binary-search probes plus two
/// boundary probes plus one per unbuildable commit encountered.
pub fn probe_budget(commit_count: usize, unusable_probes: usize) -> usize {
    let log2 = if commit_count <= 1 {
        0
    } else {
        (usize::BITS - (commit_count - 1).leading_zeros()) as usize
    };
    log2 + 2 + unusable_probes
}

/// Produces a build artifact for a commit, or a reason it cannot be built.
pub trait BuildProvider {
    fn build(&mut self, commit: &CommitInfo) -> Result<String, String>;
}

/// Measures one metric of one cell using a built artifact.
pub trait MeasureProvider {
    fn measure(
        &mut self,
        artifact: &str,
        commit: &CommitInfo,
        cell: &CellId,
        metric: MetricKind,
    ) -> Result<u64, String>;
}

/// Builds and measures one commit, classifying the observation against the
/// predicate. A failed measurement is retried once.
pub fn probe_commit(
    build: &mut dyn BuildProvider,
    measure: &mut dyn MeasureProvider,
    cell: &CellId,
    metric: MetricKind,
    predicate: &Predicate,
    commit: &CommitInfo,
) -> ProbeOutcome {
    let artifact = match build.build(commit) {
        Ok(artifact) => artifact,
        Err(reason) => return ProbeOutcome::Unbuildable { reason },
    };
    let observed = match measure.measure(&artifact, commit, cell, metric) {
        Ok(v) => v,
        Err(_) => match measure.measure(&artifact, commit, cell, metric) {
            Ok(v) => v,
            Err(reason) => return ProbeOutcome::MeasurementFailed { reason },
        },
    };
    if predicate.is_bad(observed) {
        ProbeOutcome::Bad { observed }
    } else {
        ProbeOutcome::Good { observed }
    }
}

/// Binary search for the first bad commit in a timestamp-ordered range.
///
/// The range's last commit must reproduce the regression (verified with one
/// probe). The day-start baseline commit is good by assumption: its probe
/// is the baseline store entry itself — the previous accepted nightly
/// measured it — so no fresh probe is spent on it. Unbuildable midpoints
/// are skipped to the nearest buildable neighbor (alternating ±1, ±2, ...);
/// if a whole remaining range is unbuildable the result is inconclusive.
/// Probe results are cached per commit.
pub fn bisect(
    commits: &[CommitInfo],
    cell: CellId,
    metric: MetricKind,
    predicate: Predicate,
    build: &mut dyn BuildProvider,
    measure: &mut dyn MeasureProvider,
) -> BisectionSession {
    let mut ordered: Vec<CommitInfo> = commits.to_vec();
    ordered.sort_by_key(|c| c.timestamp_unix);

    let mut probe_log: Vec<ProbeLogEntry> = Vec::new();
    let mut cache: BTreeMap<usize, ProbeOutcome> = BTreeMap::new();
    let mut probe = |index: usize,
                     log: &mut Vec<ProbeLogEntry>,
                     cache: &mut BTreeMap<usize, ProbeOutcome>|
     -> ProbeOutcome {
        if let Some(outcome) = cache.get(&index) {
            return outcome.clone();
        }
        let outcome = probe_commit(build, measure, &cell, metric, &predicate, &ordered[index]);
        log.push(ProbeLogEntry {
            index,
            commit: ordered[index].id.clone(),
            outcome: outcome.clone(),
        });
        cache.insert(index, outcome.clone());
        outcome
    };

    let finish = |probe_log: Vec<ProbeLogEntry>, result: BisectionResult| BisectionSession {
        commits: ordered.clone(),
        cell: cell.clone(),
        metric,
        predicate,
        probe_log,
        result,
    };

    if ordered.is_empty() {
        return finish(
            probe_log,
            BisectionResult::Inconclusive {
                reason: String::from("empty commit range"),
            },
        );
    }

    // Precondition probe: the day's last commit must be bad.
    let last = ordered.len() - 1;
    match probe(last, &mut probe_log, &mut cache) {
        ProbeOutcome::Bad { .. } => {}
        ProbeOutcome::Good { .. } => {
            return finish(
                probe_log,
                BisectionResult::Inconclusive {
                    reason: String::from("regression not reproduced"),
                },
            );
        }
        outcome => {
            return finish(
                probe_log,
                BisectionResult::Inconclusive {
                    reason: format!("last commit not probeable: {outcome:?}"),
                },
            );
        }
    }

    let mut lo = 0usize;
    let mut hi = last;
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        // Scan mid, mid-1, mid+1, mid-2, mid+2, ... within [lo, hi) for a
        // commit that classifies.
        let mut classified: Option<(usize, bool)> = None;
        'scan: for delta in 0..=(hi - lo) {
            let mut candidates: [Option<usize>; 2] = [None, None];
            if mid >= delta && mid - delta >= lo {
                candidates[0] = Some(mid - delta);
            }
            if delta > 0 && mid + delta < hi {
                candidates[1] = Some(mid + delta);
            }
            for candidate in candidates.into_iter().flatten() {
                if cache.get(&candidate).is_some_and(ProbeOutcome::is_unusable) {
                    continue;
                }
                match probe(candidate, &mut probe_log, &mut cache) {
                    ProbeOutcome::Good { .. } => {
                        classified = Some((candidate, false));
                        break 'scan;
                    }
                    ProbeOutcome::Bad { .. } => {
                        classified = Some((candidate, true));
                        break 'scan;
                    }
                    _ => {}
                }
            }
        }
        match classified {
            Some((index, true)) => hi = index,
            Some((index, false)) => lo = index + 1,
            None => {
                return finish(
                    probe_log,
                    BisectionResult::Inconclusive {
                        reason: String::from("unbuildable range"),
                    },
                );
            }
        }
    }

    let result = BisectionResult::Culprit {
        index: lo,
        commit: ordered[lo].id.clone(),
    };
    finish(probe_log, result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::SimulatedHistory;
    use crate::workload::{Device, Mode};
    use alloc::string::ToString;

    fn cell() -> CellId {
        CellId::new("synth-conv", Mode::Train, Device::Gpu)
    }

    fn history(n: usize, culprit: Option<usize>) -> SimulatedHistory {
        SimulatedHistory {
            commit_count: n,
            culprit_index: culprit,
            step: 0.2,
            noise: 0.0,
            unbuildable: Default::default(),
            seed: 7,
            base_wall_time_us: 100_000,
            metric: MetricKind::WallTime,
        }
    }

    fn predicate(history: &SimulatedHistory) -> Predicate {
        Predicate::RelativeIncrease {
            baseline_value: history.base_wall_time_us,
            threshold: 0.07,
        }
    }

    /// Linear-scan oracle: the first index whose simulated metric violates
    /// the predicate. Independent of the binary search.
    fn linear_scan_first_bad(history: &SimulatedHistory, predicate: &Predicate) -> Option<usize> {
        (0..history.commit_count).find(|&i| predicate.is_bad(history.metric_value(i)))
    }

    fn run(history: &SimulatedHistory) -> BisectionSession {
        let (mut build, mut measure) = history.providers();
        bisect(
            &history.commits(),
            cell(),
            MetricKind::WallTime,
            predicate(history),
            &mut build,
            &mut measure,
        )
    }

    fn unusable_probes(session: &BisectionSession) -> usize {
        session
            .probe_log
            .iter()
            .filter(|e| e.outcome.is_unusable())
            .count()
    }

    #[test]
    fn finds_injected_culprit_with_budget() {
        let history = history(70, Some(42));
        let session = run(&history);
        assert_eq!(
            session.result,
            BisectionResult::Culprit { index: 42, commit: history.commits()[42].id.clone() }
        );
        assert!(session.probe_log.len() <= probe_budget(70, unusable_probes(&session)));
        assert!(session.probe_log.len() <= 9); // ceil(log2 70) = 7, plus 2
    }

    #[test]
    fn single_bad_commit() {
        let history = history(1, Some(0));
        let session = run(&history);
        assert!(matches!(
            session.result,
            BisectionResult::Culprit { index: 0, .. }
        ));
        assert!(session.probe_log.len() <= 2);
    }

    #[test]
    fn clean_history_is_not_reproduced() {
        let history = history(50, None);
        let session = run(&history);
        assert_eq!(
            session.result,
            BisectionResult::Inconclusive { reason: "regression not reproduced".to_string() }
        );
        assert_eq!(session.probe_log.len(), 1);
    }

    #[test]
    fn skips_unbuildable_midpoint() {
        let mut history = history(70, Some(42));
        history.unbuildable.insert(35);
        let session = run(&history);
        assert!(matches!(
            session.result,
            BisectionResult::Culprit { index: 42, .. }
        ));
        assert!(session.probe_log.len() <= probe_budget(70, unusable_probes(&session)));
    }

    #[test]
    fn unbuildable_successor_of_culprit_still_resolves() {
        let mut history = history(64, Some(20));
        history.unbuildable.insert(21);
        let session = run(&history);
        assert!(matches!(
            session.result,
            BisectionResult::Culprit { index: 20, .. }
        ));
    }

    #[test]
    fn unbuildable_predecessor_of_culprit_is_inconclusive() {
        // With commit 19 untestable, the first bad commit could be 19 or
        // 20; the search cannot pick one.
        let mut history = history(64, Some(20));
        history.unbuildable.insert(19);
        let session = run(&history);
        assert_eq!(
            session.result,
            BisectionResult::Inconclusive { reason: "unbuildable range".to_string() }
        );
    }

    #[test]
    fn fully_unbuildable_range_is_inconclusive() {
        let mut history = history(8, Some(4));
        for i in 0..7 {
            history.unbuildable.insert(i);
        }
        let session = run(&history);
        assert_eq!(
            session.result,
            BisectionResult::Inconclusive { reason: "unbuildable range".to_string() }
        );
    }

    #[test]
    fn unbuildable_last_commit_is_inconclusive() {
        let mut history = history(10, Some(5));
        history.unbuildable.insert(9);
        let session = run(&history);
        assert!(matches!(
            session.result,
            BisectionResult::Inconclusive { ref reason } if reason.contains("not probeable")
        ));
    }

    #[test]
    fn matches_linear_scan_oracle_over_seeded_histories() {
        let mut rng = crate::SplitMix64::new(2024);
        for round in 0u64..100 {
            let n = 1 + rng.next_below(200) as usize;
            let culprit = rng.next_below(n as u64) as usize;
            let history = SimulatedHistory {
                commit_count: n,
                culprit_index: Some(culprit),
                step: 0.2,
                noise: 0.0,
                unbuildable: Default::default(),
                seed: round,
                base_wall_time_us: 100_000,
                metric: MetricKind::WallTime,
            };
            let p = predicate(&history);
            let expected = linear_scan_first_bad(&history, &p).unwrap();
            assert_eq!(expected, culprit, "noiseless step must trip exactly at the culprit");
            let session = run(&history);
            assert_eq!(
                session.result,
                BisectionResult::Culprit {
                    index: expected,
                    commit: history.commits()[expected].id.clone()
                },
                "history n={n} culprit={culprit}"
            );
            assert!(session.probe_log.len() <= probe_budget(n, unusable_probes(&session)));
        }
    }

    #[test]
    fn exact_under_subthreshold_noise() {
        let mut rng = crate::SplitMix64::new(4096);
        for round in 0u64..100 {
            let n = 2 + rng.next_below(199) as usize;
            let culprit = rng.next_below(n as u64) as usize;
            let history = SimulatedHistory {
                commit_count: n,
                culprit_index: Some(culprit),
                step: 0.2,
                noise: 0.03,
                unbuildable: Default::default(),
                seed: round.wrapping_mul(97),
                base_wall_time_us: 100_000,
                metric: MetricKind::WallTime,
            };
            let session = run(&history);
            assert_eq!(
                session.result,
                BisectionResult::Culprit {
                    index: culprit,
                    commit: history.commits()[culprit].id.clone()
                },
                "noisy history n={n} culprit={culprit}"
            );
        }
    }

    #[test]
    fn measurement_failures_retry_then_skip() {
        struct FlakyMeasure {
            history: SimulatedHistory,
            fail_index: usize,
            attempts: usize,
        }
        impl MeasureProvider for FlakyMeasure {
            fn measure(
                &mut self,
                artifact: &str,
                commit: &CommitInfo,
                cell: &CellId,
                metric: MetricKind,
            ) -> Result<u64, String> {
                let (_, mut inner) = self.history.providers();
                let index: usize = commit.id.rsplit('-').next().unwrap().parse().unwrap();
                if index == self.fail_index {
                    self.attempts += 1;
                    return Err("simulated measurement failure".to_string());
                }
                inner.measure(artifact, commit, cell, metric)
            }
        }

        let history = history(32, Some(10));
        let (mut build, _) = history.providers();
        let mut measure = FlakyMeasure { history: history.clone(), fail_index: 15, attempts: 0 };
        let session = bisect(
            &history.commits(),
            cell(),
            MetricKind::WallTime,
            predicate(&history),
            &mut build,
            &mut measure,
        );
        assert!(matches!(
            session.result,
            BisectionResult::Culprit { index: 10, .. }
        ));
        // Retried exactly once before skipping.
        assert_eq!(measure.attempts, 2);
        assert!(session
            .probe_log
            .iter()
            .any(|e| matches!(e.outcome, ProbeOutcome::MeasurementFailed { .. })));
    }

    #[test]
    fn probe_commit_classifies() {
        let history = history(4, Some(2));
        let (mut build, mut measure) = history.providers();
        let p = predicate(&history);
        let commits = history.commits();
        assert!(matches!(
            probe_commit(&mut build, &mut measure, &cell(), MetricKind::WallTime, &p, &commits[1]),
            ProbeOutcome::Good { .. }
        ));
        assert!(matches!(
            probe_commit(&mut build, &mut measure, &cell(), MetricKind::WallTime, &p, &commits[2]),
            ProbeOutcome::Bad { .. }
        ));

        let mut unbuildable = history.clone();
        unbuildable.unbuildable.insert(3);
        let (mut build, mut measure) = unbuildable.providers();
        assert!(matches!(
            probe_commit(&mut build, &mut measure, &cell(), MetricKind::WallTime, &p, &commits[3]),
            ProbeOutcome::Unbuildable { .. }
        ));
    }

    #[test]
    fn commits_are_sorted_by_timestamp_before_search() {
        let history = history(16, Some(5));
        let mut shuffled = history.commits();
        shuffled.reverse();
        let (mut build, mut measure) = history.providers();
        let session = bisect(
            &shuffled,
            cell(),
            MetricKind::WallTime,
            predicate(&history),
            &mut build,
            &mut measure,
        );
        assert!(matches!(
            session.result,
            BisectionResult::Culprit { index: 5, .. }
        ));
    }

    #[test]
    fn predicate_rules() {
        let relative = Predicate::RelativeIncrease { baseline_value: 100_000, threshold: 0.07 };
        assert!(relative.is_bad(107_000));
        assert!(!relative.is_bad(106_999));
        let absolute = Predicate::AbsoluteIncrease { baseline_value: 1000, threshold_bytes: 500 };
        assert!(absolute.is_bad(1500));
        assert!(!absolute.is_bad(1499));
    }

    #[test]
    fn budget_formula() {
        assert_eq!(probe_budget(1, 0), 2);
        assert_eq!(probe_budget(2, 0), 3);
        assert_eq!(probe_budget(70, 0), 9);
        assert_eq!(probe_budget(70, 3), 12);
    }

    // The documented slack covers the boundary probe plus skip scans.
    const _: () = assert!(SKIP_ALLOWANCE >= 2);

    #[test]
    fn empty_range_is_inconclusive() {
        let history = history(4, Some(2));
        let (mut build, mut measure) = history.providers();
        let session = bisect(
            &[],
            cell(),
            MetricKind::WallTime,
            predicate(&history),
            &mut build,
            &mut measure,
        );
        assert!(matches!(session.result, BisectionResult::Inconclusive { .. }));
    }
}
