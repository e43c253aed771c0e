use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;

use benchwatch_core::analytics::{
    breakdown_report, compare_platforms, compare_variants, BreakdownInput,
};
use benchwatch_core::bisect::{bisect, Predicate};
use benchwatch_core::measure::{BatchSize, CellId, RunConfig, Selection};
use benchwatch_core::regression::{detect_regressions, MetricKind};
use benchwatch_core::trace::decompose;
use benchwatch_core::workload::{Device, Mode};

use benchwatch::ci::{run_ci_nightly, NightlyOptions};
use benchwatch::config::{CliConfig, ProviderMode};
use benchwatch::error::{exit_code, HarnessError};
use benchwatch::providers::{
    load_commits, load_history, CommandBuildProvider, HarnessMeasureProvider,
};
use benchwatch::proto::SubprocessInvoker;
use benchwatch::registry::Registry;
use benchwatch::report;
use benchwatch::results::{read_results_dir, write_cell_record, write_matrix_record};
use benchwatch::runner::{
    measure, resolve_batch_size, run_matrix, search_eval_batch_size, BatchSizeCache,
};
use benchwatch::store::BaselineStore;
use benchwatch::synthexec::{run_synth_exec, SynthExecArgs};
use benchwatch::trace_io::parse_trace;

#[derive(Parser)]
#[command(
    name = "benchwatch",
    version,
    about = "Benchmark harness, GPU-timeline analytics, and CI regression sentinel"
)]
struct Cli {
    /// TOML configuration file (all sections optional).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Measure a single (workload, mode, device) cell.
    Run {
        #[arg(long)]
        workload: String,
        #[arg(long)]
        mode: Mode,
        #[arg(long)]
        device: Device,
        /// Batch size, or `auto` to search (eval) / use the spec default (train).
        #[arg(long, default_value = "auto")]
        bs: BatchSize,
        #[arg(long)]
        repeats: Option<u32>,
        /// Reduction: median_run or arithmetic_mean.
        #[arg(long, default_value = "median_run")]
        reduction: String,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        json: bool,
    },
    /// Measure the four-configuration matrix (all workloads unless --workload).
    Matrix {
        #[arg(long)]
        workload: Option<String>,
        #[arg(long, default_value = "auto")]
        bs: BatchSize,
        #[arg(long)]
        repeats: Option<u32>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        json: bool,
    },
    /// Batch-size doubling search for eval mode.
    Bsearch {
        #[arg(long)]
        workload: String,
        #[arg(long)]
        device: Device,
        #[arg(long)]
        json: bool,
    },
    /// Decompose a trace file into active/movement/idle fractions.
    Decompose {
        trace: PathBuf,
        /// Measured wall time of the computation region (the denominator).
        #[arg(long)]
        wall_time_us: u64,
        #[arg(long)]
        json: bool,
    },
    /// Compare two results directories (variant or platform comparison).
    Compare {
        baseline_dir: PathBuf,
        candidate_dir: PathBuf,
        #[arg(long, default_value = "variant")]
        kind: String,
        #[arg(long)]
        label_baseline: Option<String>,
        #[arg(long)]
        label_candidate: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        json: bool,
    },
    /// Detect regressions in a results directory against the baseline store.
    Detect {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        baseline: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        json: bool,
    },
    /// Bisect one cell/metric regression over a day's commits.
    Bisect {
        #[arg(long)]
        commits: PathBuf,
        #[arg(long)]
        cell: CellId,
        #[arg(long, default_value = "wall_time")]
        metric: MetricKind,
        #[arg(long)]
        baseline: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        json: bool,
    },
    /// Nightly CI check: matrix, detect, bisect, baseline update, issue filing.
    CiNightly {
        #[arg(long)]
        commits: PathBuf,
        #[arg(long)]
        baseline: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        webhook_url: Option<String>,
        /// Nightly build artifact under test (command mode); substituted
        /// for {artifact} in workload specs.
        #[arg(long)]
        artifact: Option<String>,
    },
    /// Re-render reports from raw records in a results directory.
    Report {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        json: bool,
    },
    /// (workload protocol) Run a built-in synthetic model.
    #[command(hide = true)]
    SynthExec(SynthExecArgs),
}

fn load_config(path: Option<&Path>) -> Result<CliConfig, HarnessError> {
    match path {
        Some(path) => CliConfig::load(path),
        None => {
            let config = CliConfig::default();
            config.validate()?;
            Ok(config)
        }
    }
}

fn load_registry(config: &CliConfig) -> Result<Registry, HarnessError> {
    let exe = std::env::current_exe()
        .map_err(|e| HarnessError::Launch(format!("cannot locate own executable: {e}")))?;
    Registry::load(config.paths.registry.as_deref(), &exe)
}

fn invoker_for(config: &CliConfig) -> SubprocessInvoker {
    SubprocessInvoker::new(config.timeout(), config.paths.output.join("traces"))
}

fn emit(json_flag: bool, json: &serde_json::Value, markdown: &str) {
    if json_flag {
        println!("{}", serde_json::to_string_pretty(json).expect("json"));
    } else {
        print!("{markdown}");
    }
}

fn run() -> Result<i32, HarnessError> {
    let cli = Cli::parse();

    // The workload protocol path must not require a config.
    if let Cmd::SynthExec(args) = &cli.command {
        return Ok(run_synth_exec(args));
    }

    let config = load_config(cli.config.as_deref())?;

    match cli.command {
        Cmd::SynthExec(_) => unreachable!("handled above"),
        Cmd::Run { workload, mode, device, bs, repeats, reduction, out, json } => {
            let registry = load_registry(&config)?;
            let spec = registry.get(&workload)?;
            let mut invoker = invoker_for(&config);
            let mut cache = BatchSizeCache::at(config.bs_cache_dir())?;
            let mut run_config = RunConfig::new(mode, device, bs);
            run_config.repeats = repeats.unwrap_or(config.measure.repeats);
            run_config.reduction = match reduction.as_str() {
                "median_run" => benchwatch_core::measure::Reduction::MedianRun,
                "arithmetic_mean" => benchwatch_core::measure::Reduction::ArithmeticMean,
                other => {
                    return Err(HarnessError::Validation(format!(
                        "unknown reduction {other:?} (expected median_run|arithmetic_mean)"
                    )))
                }
            };
            let batch_size = resolve_batch_size(
                spec,
                mode,
                device,
                bs,
                config.measure.search_cap,
                &mut cache,
                &mut invoker,
            )?;
            let set = measure(spec, &run_config, batch_size, &mut invoker)?;
            let out_dir = out.unwrap_or_else(|| config.paths.output.clone());
            let path = write_cell_record(&out_dir, &set)?;
            let md = report::measurement_markdown(&set);
            let json_value = report::json_report("measurement", &set);
            emit(json, &json_value, &md);
            eprintln!("raw record: {}", path.display());
            Ok(exit_code::CLEAN)
        }
        Cmd::Matrix { workload, bs, repeats, out, json } => {
            let registry = load_registry(&config)?;
            let mut invoker = invoker_for(&config);
            let mut cache = BatchSizeCache::at(config.bs_cache_dir())?;
            let mut base = RunConfig::new(Mode::Eval, Device::Cpu, bs);
            base.repeats = repeats.unwrap_or(config.measure.repeats);
            let specs: Vec<_> = match &workload {
                Some(name) => vec![registry.get(name)?.clone()],
                None => registry.iter().cloned().collect(),
            };
            let out_dir = out.unwrap_or_else(|| config.paths.output.clone());
            let mut matrices = Vec::new();
            for spec in &specs {
                let matrix = run_matrix(
                    spec,
                    &base,
                    config.availability(),
                    config.measure.search_cap,
                    &mut cache,
                    &mut invoker,
                );
                write_matrix_record(&out_dir, &matrix)?;
                matrices.push(matrix);
            }
            let md: String = matrices.iter().map(report::matrix_markdown).collect();
            let json_value = report::json_report("matrix", &matrices);
            emit(json, &json_value, &md);
            Ok(exit_code::CLEAN)
        }
        Cmd::Bsearch { workload, device, json } => {
            let registry = load_registry(&config)?;
            let spec = registry.get(&workload)?;
            let mut invoker = invoker_for(&config);
            let outcome =
                search_eval_batch_size(spec, device, config.measure.search_cap, &mut invoker)?;
            BatchSizeCache::at(config.bs_cache_dir())?.put(
                &workload,
                device,
                outcome.best_batch_size,
            )?;
            let md = {
                let probes: Vec<String> = outcome
                    .probes
                    .iter()
                    .map(|(bs, status)| format!("{bs}: {status:?}"))
                    .collect();
                format!(
                    "best batch size: {}\nprobes:\n  {}\n",
                    outcome.best_batch_size,
                    probes.join("\n  ")
                )
            };
            emit(json, &report::json_report("batch_search", &outcome), &md);
            Ok(exit_code::CLEAN)
        }
        Cmd::Decompose { trace, wall_time_us, json } => {
            let events = parse_trace(&trace)?;
            let d = decompose(&events, wall_time_us)?;
            emit(json, &report::decomposition_json(&d), &report::decomposition_markdown(&d));
            Ok(exit_code::CLEAN)
        }
        Cmd::Compare {
            baseline_dir,
            candidate_dir,
            kind,
            label_baseline,
            label_candidate,
            out,
            json,
        } => {
            let dir_label = |p: &Path| {
                p.file_name()
                    .map(|n| n.to_string_lossy().into_owned())
                    .unwrap_or_else(|| p.display().to_string())
            };
            let label_a = label_baseline.unwrap_or_else(|| dir_label(&baseline_dir));
            let label_b = label_candidate.unwrap_or_else(|| dir_label(&candidate_dir));
            let base = read_results_dir(&baseline_dir)?;
            let cand = read_results_dir(&candidate_dir)?;
            let (json_value, md) = match kind.as_str() {
                "variant" => {
                    let cmp = compare_variants(&label_a, &base, &label_b, &cand)?;
                    (report::comparison_json(&cmp), report::comparison_markdown(&cmp))
                }
                "platform" => {
                    let cmp = compare_platforms(&label_a, &base, &label_b, &cand)?;
                    (report::platform_json(&cmp), report::platform_markdown(&cmp))
                }
                other => {
                    return Err(HarnessError::Validation(format!(
                        "unknown comparison kind {other:?} (expected variant|platform)"
                    )))
                }
            };
            if let Some(out) = out {
                report::write_report_files(&out, "compare", &json_value, &md)?;
            }
            emit(json, &json_value, &md);
            Ok(exit_code::CLEAN)
        }
        Cmd::Detect { input, baseline, out, json } => {
            let store = BaselineStore::open(
                baseline.unwrap_or_else(|| config.paths.baseline_store.clone()),
            )?;
            let base = store.load()?;
            let sets = read_results_dir(&input)?;
            let observed: Vec<_> = sets
                .iter()
                .map(|s| benchwatch_core::regression::ObservedCell {
                    cell: s.cell(),
                    metrics: s.representative(),
                })
                .collect();
            let detection = detect_regressions(&base, &observed, &config.policy)?;
            let json_value = report::detection_json(&detection);
            let md = report::detection_markdown(&detection);
            if let Some(out) = out {
                report::write_report_files(&out, "detect", &json_value, &md)?;
            }
            emit(json, &json_value, &md);
            Ok(if detection.findings.is_empty() {
                exit_code::CLEAN
            } else {
                exit_code::FINDINGS
            })
        }
        Cmd::Bisect { commits, cell, metric, baseline, out, json } => {
            let store = BaselineStore::open(
                baseline.unwrap_or_else(|| config.paths.baseline_store.clone()),
            )?;
            let base = store.load()?;
            let entry = base.cells.get(&cell).ok_or_else(|| {
                HarnessError::Validation(format!("no baseline entry for cell {cell}"))
            })?;
            let baseline_value = match metric {
                MetricKind::WallTime => entry.wall_time_us,
                MetricKind::PeakCpuMem => entry.peak_cpu_mem_bytes,
                MetricKind::PeakGpuMem => entry.peak_gpu_mem_bytes,
                MetricKind::Leak => entry.post_run_resident_bytes,
            };
            let predicate = match metric {
                MetricKind::Leak => Predicate::AbsoluteIncrease {
                    baseline_value,
                    threshold_bytes: config.policy.leak_threshold_bytes,
                },
                other => Predicate::RelativeIncrease {
                    baseline_value,
                    threshold: config.policy.threshold_for(other),
                },
            };
            let session = match config.providers.mode {
                ProviderMode::Simulated => {
                    let history = load_history(&commits)?;
                    let (mut build, mut measure_provider) = history.providers();
                    bisect(
                        &history.commits(),
                        cell,
                        metric,
                        predicate,
                        &mut build,
                        &mut measure_provider,
                    )
                }
                ProviderMode::Command => {
                    let commit_list = load_commits(&commits)?;
                    let registry = load_registry(&config)?;
                    let spec = registry.get(&cell.workload)?;
                    let mut invoker = invoker_for(&config);
                    let mut build = CommandBuildProvider {
                        build_cmd: config.providers.build_cmd.clone().ok_or_else(|| {
                            HarnessError::Validation(
                                "providers.build_cmd is required in command mode".to_string(),
                            )
                        })?,
                    };
                    let mut measure_provider = HarnessMeasureProvider {
                        spec,
                        repeats: config.measure.repeats,
                        invoker: &mut invoker,
                        batch_size: spec.default_train_batch_size,
                    };
                    bisect(
                        &commit_list,
                        cell,
                        metric,
                        predicate,
                        &mut build,
                        &mut measure_provider,
                    )
                }
            };
            let json_value = report::bisection_json(&session);
            let md = report::bisection_markdown(&session);
            if let Some(out) = out {
                report::write_report_files(&out, "bisect", &json_value, &md)?;
            }
            emit(json, &json_value, &md);
            Ok(exit_code::CLEAN)
        }
        Cmd::CiNightly { commits, baseline, out, webhook_url, artifact } => {
            let registry = load_registry(&config)?;
            let options = NightlyOptions {
                commits_path: commits,
                out_dir: out.unwrap_or_else(|| config.paths.output.clone()),
                baseline_dir: baseline,
                webhook_url,
                artifact,
            };
            let outcome = run_ci_nightly(&config, &registry, &options)?;
            if outcome.baseline_initialized {
                println!("baseline initialized; no comparison possible yet");
            } else if outcome.detection.findings.is_empty() {
                println!("clean nightly: no regressions");
            } else {
                println!(
                    "{} finding(s); culprit: {}",
                    outcome.detection.findings.len(),
                    outcome
                        .issue
                        .as_ref()
                        .and_then(|i| i.culprit.as_deref())
                        .unwrap_or("unknown")
                );
            }
            Ok(outcome.exit_code)
        }
        Cmd::Report { input, out, json } => {
            let registry = load_registry(&config)?;
            let sets = read_results_dir(&input)?;
            if sets.is_empty() {
                return Err(HarnessError::Validation(format!(
                    "no cell records in {}",
                    input.display()
                )));
            }
            let mut md = String::from("# Measurement report\n\n");
            for set in &sets {
                md.push_str(&report::measurement_markdown(set));
                md.push('\n');
            }
            // Breakdown over whatever traces the records point at.
            let mut inputs = Vec::new();
            for set in &sets {
                let Selection::MedianIndex(i) = set.selected else { continue };
                let Some(path) = set.runs[i].trace_path.as_deref() else { continue };
                if !Path::new(path).exists() {
                    continue;
                }
                let events = parse_trace(Path::new(path))?;
                let wall = set.representative().wall_time_us;
                let domain = registry
                    .get(&set.workload)
                    .map(|s| s.domain.clone())
                    .unwrap_or_else(|_| "uncategorized".to_string());
                inputs.push(BreakdownInput {
                    workload: set.workload.clone(),
                    domain,
                    mode: set.mode,
                    decomposition: decompose(&events, wall)?,
                });
            }
            let breakdown = if inputs.is_empty() {
                None
            } else {
                let table = breakdown_report(&inputs)?;
                md.push_str(&report::breakdown_markdown(&table));
                Some(table)
            };
            let json_value = report::json_report(
                "results",
                json!({ "measurements": sets, "breakdown": breakdown }),
            );
            if let Some(out) = &out {
                report::write_report_files(out, "report", &json_value, &md)?;
                if let Some(table) = &breakdown {
                    let csv_path = out.join("breakdown.csv");
                    std::fs::write(&csv_path, report::breakdown_csv(table))
                        .map_err(|e| HarnessError::io(&csv_path, e))?;
                }
            }
            emit(json, &json_value, &md);
            Ok(exit_code::CLEAN)
        }
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("benchwatch: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
