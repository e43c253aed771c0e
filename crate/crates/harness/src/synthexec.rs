//! `synth-exec`: the workload-protocol executable for the built-in
//! synthetic models.
//!
//! This subcommand IS a workload: it parses the protocol flags, runs the
//! named synthetic model, optionally writes the device trace, prints the
//! single-line JSON result record, and exits 0 / 42 (OOM) / nonzero. The
//! registry points every builtin at the harness binary with
//! `synth-exec --model <name>` as fixed arguments.
//!
//! Wall times are simulated: the reported metrics come from the model (so
//! identical requests report identical results), while the process sleeps
//! for the simulated duration, capped to keep suites fast. Set
//! `BENCHWATCH_SYNTH_SLEEP_CAP_US` to raise or lower the cap.

use std::path::PathBuf;

use serde_json::json;

use benchwatch_core::synth::{builtin_model, SyntheticOutcome};
use benchwatch_core::workload::{Device, Mode, RunRequest, DEFAULT_OOM_EXIT_CODE};

use crate::trace_io::write_trace;

const DEFAULT_SLEEP_CAP_US: u64 = 20_000;
const WORKLOAD_ERROR: i32 = 3;

#[derive(Debug, clap::Args)]
pub struct SynthExecArgs {
    /// Built-in model name (synth-conv, synth-matmul, synth-const).
    #[arg(long)]
    pub model: String,
    #[arg(long)]
    pub mode: Mode,
    #[arg(long)]
    pub device: Device,
    #[arg(long)]
    pub bs: u32,
    #[arg(long, default_value_t = 1)]
    pub iterations: u32,
    #[arg(long, default_value = "fp32")]
    pub precision: String,
    #[arg(long)]
    pub trace_out: Option<PathBuf>,
}

fn sleep_cap_us() -> u64 {
    std::env::var("BENCHWATCH_SYNTH_SLEEP_CAP_US")
        .ok()
        .and_then(|v| v.parse().ok())
        .unwrap_or(DEFAULT_SLEEP_CAP_US)
}

pub fn run_synth_exec(args: &SynthExecArgs) -> i32 {
    let Some(model) = builtin_model(&args.model) else {
        eprintln!("synth-exec: unknown model {:?}", args.model);
        return WORKLOAD_ERROR;
    };
    if args.bs < 1 || args.iterations < 1 {
        eprintln!("synth-exec: bs and iterations must be >= 1");
        return WORKLOAD_ERROR;
    }
    let request = RunRequest {
        mode: args.mode,
        device: args.device,
        batch_size: args.bs,
        iterations: args.iterations,
        precision: args.precision.clone(),
        trace_requested: args.trace_out.is_some(),
    };
    let (metrics, trace) = match model.execute(&request) {
        SyntheticOutcome::Oom => return DEFAULT_OOM_EXIT_CODE,
        SyntheticOutcome::Ok { metrics, trace } => (metrics, trace),
    };

    std::thread::sleep(std::time::Duration::from_micros(
        metrics.wall_time_us.min(sleep_cap_us()),
    ));

    let mut trace_path = None;
    if let (Some(path), Some(events)) = (&args.trace_out, &trace) {
        if let Err(e) = write_trace(path, events) {
            eprintln!("synth-exec: cannot write trace: {e}");
            return WORKLOAD_ERROR;
        }
        trace_path = Some(path.display().to_string());
    }

    let mut record = json!({
        "wall_time_us": metrics.wall_time_us,
        "peak_cpu_mem_bytes": metrics.peak_cpu_mem_bytes,
        "peak_gpu_mem_bytes": metrics.peak_gpu_mem_bytes,
        "post_run_resident_bytes": metrics.post_run_resident_bytes,
    });
    if let Some(path) = trace_path {
        record["trace_path"] = json!(path);
    }
    println!("{record}");
    0
}
