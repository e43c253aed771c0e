//! The nightly CI entry point: measure the matrix over every registered
//! workload, detect regressions against the baseline store, bisect each
//! finding over the day's commits, advance the baseline, emit reports, and
//! file an issue through the webhook when findings exist.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use serde_json::json;

use benchwatch_core::bisect::{bisect, BisectionSession, Predicate};
use benchwatch_core::measure::{
    BatchSize, CellId, CellStatus, ConfigMatrix, MatrixCell, MeasurementSet, Reduction, RunConfig,
    Selection, MATRIX_CELLS,
};
use benchwatch_core::regression::{
    detect_regressions, update_baseline, DetectionReport, ObservedCell, Provenance,
};
use benchwatch_core::sim::SimulatedHistory;
use benchwatch_core::workload::RunResult;

use crate::config::{CliConfig, ProviderMode};
use crate::error::{exit_code, HarnessError};
use crate::providers::{
    load_commits, load_history, CommandBuildProvider, HarnessMeasureProvider,
};
use crate::proto::SubprocessInvoker;
use crate::registry::{substitute_artifact, Registry};
use crate::report::{
    bisection_markdown, detection_markdown, json_report, matrix_markdown, write_report_files,
};
use crate::results::write_matrix_record;
use crate::runner::{run_matrix, BatchSizeCache};
use crate::store::BaselineStore;
use crate::webhook::{build_issue, post_issue, IssuePayload};

pub struct NightlyOptions {
    /// Simulated-history JSON (simulated mode) or commits-file JSON
    /// (command mode) holding the day's commits.
    pub commits_path: PathBuf,
    pub out_dir: PathBuf,
    pub baseline_dir: Option<PathBuf>,
    pub webhook_url: Option<String>,
    /// Overrides `providers.artifact` (the nightly build under test).
    pub artifact: Option<String>,
}

#[derive(Debug)]
pub struct NightlyOutcome {
    pub exit_code: i32,
    pub detection: DetectionReport,
    pub sessions: Vec<BisectionSession>,
    pub baseline_initialized: bool,
    pub issue: Option<IssuePayload>,
}

fn now_unix() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

/// Fabricates the nightly measurement of one cell from the simulated
/// history (single synthetic run; the simulation is noise-complete on its
/// own).
fn simulated_set(
    history: &SimulatedHistory,
    index: usize,
    cell: &CellId,
) -> MeasurementSet {
    let metrics = history.run_metrics(index, cell);
    MeasurementSet {
        workload: cell.workload.clone(),
        mode: cell.mode,
        device: cell.device,
        batch_size: 1,
        repeats: 1,
        reduction: Reduction::MedianRun,
        runs: vec![RunResult::ok(metrics, None).expect("simulated metrics are positive")],
        selected: Selection::MedianIndex(0),
        degraded: false,
    }
}

fn simulated_matrices(
    registry: &Registry,
    config: &CliConfig,
    history: &SimulatedHistory,
    index: usize,
) -> Vec<ConfigMatrix> {
    let availability = config.availability();
    registry
        .iter()
        .map(|spec| ConfigMatrix {
            workload: spec.name.clone(),
            cells: MATRIX_CELLS
                .iter()
                .map(|&(mode, device)| {
                    let status = if !spec.supported_modes.contains(mode) {
                        CellStatus::Skipped { reason: "mode unsupported".to_string() }
                    } else if !spec.supported_devices.contains(device) {
                        CellStatus::Skipped { reason: "device unsupported".to_string() }
                    } else if !availability.has(device) {
                        CellStatus::Skipped { reason: "device unavailable".to_string() }
                    } else {
                        let cell = CellId::new(spec.name.clone(), mode, device);
                        CellStatus::Measured(simulated_set(history, index, &cell))
                    };
                    MatrixCell { mode, device, status }
                })
                .collect(),
        })
        .collect()
}

fn measured_matrices(
    registry: &Registry,
    config: &CliConfig,
    artifact_override: Option<&str>,
) -> Result<Vec<ConfigMatrix>, HarnessError> {
    let mut invoker = SubprocessInvoker::new(config.timeout(), config.paths.output.join("traces"));
    let mut cache = BatchSizeCache::at(config.bs_cache_dir())?;
    let base = RunConfig {
        repeats: config.measure.repeats,
        ..RunConfig::new(
            benchwatch_core::workload::Mode::Eval,
            benchwatch_core::workload::Device::Cpu,
            BatchSize::Auto,
        )
    };
    let artifact = artifact_override
        .map(str::to_string)
        .or_else(|| config.providers.artifact.clone());
    Ok(registry
        .iter()
        .map(|spec| {
            let spec = match &artifact {
                Some(a) => substitute_artifact(spec, a),
                None => spec.clone(),
            };
            run_matrix(
                &spec,
                &base,
                config.availability(),
                config.measure.search_cap,
                &mut cache,
                &mut invoker,
            )
        })
        .collect())
}

fn observed_cells(matrices: &[ConfigMatrix]) -> Vec<ObservedCell> {
    matrices
        .iter()
        .flat_map(|m| m.measured_sets())
        .map(|set| ObservedCell {
            cell: set.cell(),
            metrics: set.representative(),
        })
        .collect()
}

fn bisect_findings(
    config: &CliConfig,
    registry: &Registry,
    detection: &mut DetectionReport,
    matrices: &[ConfigMatrix],
    history: Option<&SimulatedHistory>,
    commits: &[benchwatch_core::bisect::CommitInfo],
) -> Result<Vec<BisectionSession>, HarnessError> {
    let mut sessions: Vec<BisectionSession> = Vec::new();
    let mut done: Vec<(CellId, benchwatch_core::regression::MetricKind)> = Vec::new();
    let findings = detection.findings.clone();
    for finding in &findings {
        let key = (finding.cell.clone(), finding.metric);
        if done.contains(&key) {
            continue;
        }
        done.push(key);
        let predicate = Predicate::for_finding(finding, &config.policy);
        let session = match history {
            Some(history) => {
                let (mut build, mut measure) = history.providers();
                bisect(
                    commits,
                    finding.cell.clone(),
                    finding.metric,
                    predicate,
                    &mut build,
                    &mut measure,
                )
            }
            None => {
                let build_cmd = config.providers.build_cmd.clone().ok_or_else(|| {
                    HarnessError::Validation(
                        "providers.build_cmd is required to bisect in command mode".to_string(),
                    )
                })?;
                let spec = registry.get(&finding.cell.workload)?;
                let batch_size = matrices
                    .iter()
                    .flat_map(|m| m.measured_sets())
                    .find(|s| s.cell() == finding.cell)
                    .map(|s| s.batch_size)
                    .unwrap_or(spec.default_train_batch_size);
                let mut invoker =
                    SubprocessInvoker::new(config.timeout(), config.paths.output.join("traces"));
                let mut build = CommandBuildProvider { build_cmd };
                let mut measure = HarnessMeasureProvider {
                    spec,
                    repeats: config.measure.repeats,
                    invoker: &mut invoker,
                    batch_size,
                };
                bisect(
                    commits,
                    finding.cell.clone(),
                    finding.metric,
                    predicate,
                    &mut build,
                    &mut measure,
                )
            }
        };
        // Attach the culprit to every finding this session answers.
        if let benchwatch_core::bisect::BisectionResult::Culprit { commit, .. } = &session.result {
            for f in detection.findings.iter_mut() {
                if f.cell == session.cell && f.metric == session.metric {
                    f.culprit = Some(commit.clone());
                }
            }
        }
        sessions.push(session);
    }
    Ok(sessions)
}

#[derive(Serialize)]
struct NightlyReportBody<'a> {
    nightly_commit: &'a str,
    baseline_initialized: bool,
    detection: &'a DetectionReport,
    sessions: &'a [BisectionSession],
    matrices: &'a [ConfigMatrix],
}

fn write_nightly_reports(
    out_dir: &Path,
    nightly_commit: &str,
    baseline_initialized: bool,
    detection: &DetectionReport,
    sessions: &[BisectionSession],
    matrices: &[ConfigMatrix],
) -> Result<(), HarnessError> {
    let body = NightlyReportBody {
        nightly_commit,
        baseline_initialized,
        detection,
        sessions,
        matrices,
    };
    let json = json_report("ci_nightly", &body);
    let mut md = format!("# Nightly performance check: {nightly_commit}\n\n");
    md.push_str("Reference: previous accepted nightly (per-cell provenance in the baseline store).\n\n");
    if baseline_initialized {
        md.push_str("Baseline initialized from this run; nothing to compare yet.\n\n");
    }
    md.push_str(&detection_markdown(detection));
    for session in sessions {
        md.push('\n');
        md.push_str(&bisection_markdown(session));
    }
    md.push('\n');
    for matrix in matrices {
        md.push_str(&matrix_markdown(matrix));
        let _ = writeln!(md);
    }
    write_report_files(out_dir, "nightly", &json, &md)?;
    Ok(())
}

/// The `ci-nightly` command. Exit codes: 0 clean, 3 findings filed,
/// 4 webhook unreachable (reports still persisted), others operational.
pub fn run_ci_nightly(
    config: &CliConfig,
    registry: &Registry,
    options: &NightlyOptions,
) -> Result<NightlyOutcome, HarnessError> {
    let store_dir = options
        .baseline_dir
        .clone()
        .unwrap_or_else(|| config.paths.baseline_store.clone());
    let store = BaselineStore::open(store_dir)?;
    let lock = store.lock()?;

    let (history, commits) = match config.providers.mode {
        ProviderMode::Simulated => {
            let history = load_history(&options.commits_path)?;
            let commits = history.commits();
            (Some(history), commits)
        }
        ProviderMode::Command => (None, load_commits(&options.commits_path)?),
    };
    let nightly_commit = commits
        .last()
        .map(|c| c.id.clone())
        .ok_or_else(|| HarnessError::Validation("empty commit range".to_string()))?;

    let matrices = match &history {
        Some(history) => {
            simulated_matrices(registry, config, history, history.commit_count - 1)
        }
        None => measured_matrices(registry, config, options.artifact.as_deref())?,
    };
    for matrix in &matrices {
        write_matrix_record(&options.out_dir.join("nightly-results"), matrix)?;
    }

    let observed = observed_cells(&matrices);
    let baseline = store.load()?;
    let provenance = Provenance {
        commit: nightly_commit.clone(),
        timestamp_unix: now_unix(),
    };

    if baseline.is_empty() {
        let detection = DetectionReport {
            findings: vec![],
            new_cells: observed.iter().map(|o| o.cell.clone()).collect(),
            missing_cells: vec![],
        };
        if observed.is_empty() {
            return Err(HarnessError::Validation(
                "no cells measured; cannot initialize a baseline".to_string(),
            ));
        }
        let initialized = update_baseline(&baseline, &observed, &[], &provenance);
        store.save(&lock, &initialized, provenance.timestamp_unix)?;
        write_nightly_reports(&options.out_dir, &nightly_commit, true, &detection, &[], &matrices)?;
        return Ok(NightlyOutcome {
            exit_code: exit_code::CLEAN,
            detection,
            sessions: vec![],
            baseline_initialized: true,
            issue: None,
        });
    }

    let mut detection = detect_regressions(&baseline, &observed, &config.policy)?;
    let sessions = if detection.findings.is_empty() {
        vec![]
    } else {
        bisect_findings(
            config,
            registry,
            &mut detection,
            &matrices,
            history.as_ref(),
            &commits,
        )?
    };

    let advanced = update_baseline(&baseline, &observed, &detection.findings, &provenance);
    store.save(&lock, &advanced, provenance.timestamp_unix)?;
    write_nightly_reports(
        &options.out_dir,
        &nightly_commit,
        false,
        &detection,
        &sessions,
        &matrices,
    )?;

    if detection.findings.is_empty() {
        return Ok(NightlyOutcome {
            exit_code: exit_code::CLEAN,
            detection,
            sessions,
            baseline_initialized: false,
            issue: None,
        });
    }

    let issue = build_issue(&format!("nightly-{nightly_commit}"), &detection, &sessions);
    let issue_path = options.out_dir.join("issue.json");
    std::fs::write(
        &issue_path,
        serde_json::to_string_pretty(&json!({
            "schema_version": crate::report::REPORT_SCHEMA_VERSION,
            "kind": "issue_payload",
            "report": &issue,
        }))
        .expect("serializable"),
    )
    .map_err(|e| HarnessError::io(&issue_path, e))?;

    let url = options
        .webhook_url
        .clone()
        .or_else(|| config.webhook.url.clone());
    let exit = match url {
        Some(url) => match post_issue(&url, config.webhook.token().as_deref(), &issue) {
            Ok(()) => exit_code::FINDINGS,
            Err(_) => exit_code::WEBHOOK,
        },
        None => exit_code::FINDINGS,
    };
    Ok(NightlyOutcome {
        exit_code: exit,
        detection,
        sessions,
        baseline_initialized: false,
        issue: Some(issue),
    })
}
