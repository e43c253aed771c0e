//! Subprocess transport for the workload protocol.
//!
//! A workload is launched as
//!
//! ```text
//! <executable> [fixed args] --mode <train|eval> --device <cpu|gpu> \
//!     --bs <N> --iterations <N> --precision <label> [--trace-out <path>]
//! ```
//!
//! and reports one single-line JSON result record on stdout with keys
//! `wall_time_us`, `peak_cpu_mem_bytes`, `peak_gpu_mem_bytes`,
//! `post_run_resident_bytes`, and optional `trace_path`. Exit code 0 is ok,
//! the spec's `oom_exit_code` (default 42) is OOM, anything else is a
//! workload error. A zero exit with no parseable record is a protocol
//! error. Lines other than the record are tolerated; the last parseable
//! line wins.

use std::io::Read;
use std::path::{Path, PathBuf};
use std::process::{Child, Command, Stdio};
use std::time::{Duration, Instant};

use serde::Deserialize;

use benchwatch_core::workload::{RunMetrics, RunRequest, RunResult, WorkloadSpec};

use crate::error::HarnessError;

/// Protocol flags for one request, appended after the spec's fixed args.
pub fn protocol_args(req: &RunRequest, trace_out: Option<&Path>) -> Vec<String> {
    let mut args = vec![
        "--mode".to_string(),
        req.mode.to_string(),
        "--device".to_string(),
        req.device.to_string(),
        "--bs".to_string(),
        req.batch_size.to_string(),
        "--iterations".to_string(),
        req.iterations.to_string(),
        "--precision".to_string(),
        req.precision.clone(),
    ];
    if let Some(path) = trace_out {
        args.push("--trace-out".to_string());
        args.push(path.display().to_string());
    }
    args
}

/// The single-line stdout record. Unknown keys are ignored.
#[derive(Debug, Clone, Deserialize)]
pub struct ResultRecord {
    pub wall_time_us: u64,
    pub peak_cpu_mem_bytes: u64,
    pub peak_gpu_mem_bytes: u64,
    pub post_run_resident_bytes: u64,
    #[serde(default)]
    pub trace_path: Option<String>,
}

/// Scans stdout for the last line that parses as a result record.
pub fn parse_result_record(stdout: &str) -> Option<ResultRecord> {
    stdout
        .lines()
        .rev()
        .find_map(|line| serde_json::from_str::<ResultRecord>(line.trim()).ok())
}

/// Something that can execute one run request against a workload. The
/// subprocess invoker is the production implementation; tests may use
/// in-process fakes.
pub trait Invoker {
    fn invoke(&mut self, spec: &WorkloadSpec, req: &RunRequest)
        -> Result<RunResult, HarnessError>;
}

/// Launches workloads as subprocesses, one at a time.
pub struct SubprocessInvoker {
    pub timeout: Duration,
    /// Where `--trace-out` files go.
    pub trace_dir: PathBuf,
    trace_counter: u64,
}

impl SubprocessInvoker {
    pub fn new(timeout: Duration, trace_dir: impl Into<PathBuf>) -> Self {
        Self {
            timeout,
            trace_dir: trace_dir.into(),
            trace_counter: 0,
        }
    }
}

impl Invoker for SubprocessInvoker {
    fn invoke(
        &mut self,
        spec: &WorkloadSpec,
        req: &RunRequest,
    ) -> Result<RunResult, HarnessError> {
        let trace_out = if req.trace_requested {
            std::fs::create_dir_all(&self.trace_dir)
                .map_err(|e| HarnessError::io(&self.trace_dir, e))?;
            self.trace_counter += 1;
            Some(self.trace_dir.join(format!(
                "{}-{}-{}-bs{}-{:04}.trace.json",
                spec.name, req.mode, req.device, req.batch_size, self.trace_counter
            )))
        } else {
            None
        };
        invoke_workload_at(spec, req, trace_out.as_deref(), self.timeout)
    }
}

/// Launches the workload once and maps its exit to a [`RunResult`].
/// Precondition violations (unsupported mode/device, bad request) and
/// launch failures are errors; everything after a successful launch is a
/// classified `RunResult`.
pub fn invoke_workload(
    spec: &WorkloadSpec,
    req: &RunRequest,
    timeout: Duration,
    trace_dir: &Path,
) -> Result<RunResult, HarnessError> {
    SubprocessInvoker::new(timeout, trace_dir).invoke(spec, req)
}

/// Invocation preconditions shared by every invoker: valid spec and
/// request, and a (mode, device) the workload supports.
pub fn check_preconditions(spec: &WorkloadSpec, req: &RunRequest) -> Result<(), HarnessError> {
    spec.validate()?;
    req.validate()?;
    if !spec.supported_modes.contains(req.mode) {
        return Err(HarnessError::Validation(format!(
            "workload {} does not support mode {}",
            spec.name, req.mode
        )));
    }
    if !spec.supported_devices.contains(req.device) {
        return Err(HarnessError::Validation(format!(
            "workload {} does not support device {}",
            spec.name, req.device
        )));
    }
    Ok(())
}

fn invoke_workload_at(
    spec: &WorkloadSpec,
    req: &RunRequest,
    trace_out: Option<&Path>,
    timeout: Duration,
) -> Result<RunResult, HarnessError> {
    check_preconditions(spec, req)?;

    let mut command = Command::new(&spec.executable);
    command
        .args(&spec.args)
        .args(protocol_args(req, trace_out))
        .stdin(Stdio::null())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped());

    let mut child = command.spawn().map_err(|e| {
        HarnessError::Launch(format!("{}: {e}", spec.executable))
    })?;

    // Drain both pipes on threads so a chatty workload cannot deadlock on a
    // full pipe while we wait.
    let stdout_handle = drain(child.stdout.take().expect("stdout piped"));
    let stderr_handle = drain(child.stderr.take().expect("stderr piped"));

    let status = match wait_with_timeout(&mut child, timeout) {
        Some(status) => status,
        None => {
            let _ = child.kill();
            let _ = child.wait();
            // Orphaned grandchildren may keep the pipes open; the drain
            // threads are left to finish on their own.
            drop(stdout_handle);
            drop(stderr_handle);
            return Ok(RunResult::workload_error(format!(
                "timeout after {}s",
                timeout.as_secs()
            )));
        }
    };
    let stdout = stdout_handle.join().unwrap_or_default();
    let stderr = stderr_handle.join().unwrap_or_default();

    let result = match status.code() {
        Some(0) => match parse_result_record(&stdout) {
            Some(record) => {
                let metrics = RunMetrics {
                    wall_time_us: record.wall_time_us,
                    peak_cpu_mem_bytes: record.peak_cpu_mem_bytes,
                    peak_gpu_mem_bytes: record.peak_gpu_mem_bytes,
                    post_run_resident_bytes: record.post_run_resident_bytes,
                };
                let trace_path = record.trace_path.or_else(|| {
                    trace_out
                        .filter(|p| p.exists())
                        .map(|p| p.display().to_string())
                });
                RunResult::ok(metrics, trace_path).unwrap_or_else(|_| {
                    RunResult::protocol_error("record reported wall_time_us = 0".to_string())
                })
            }
            None => RunResult::protocol_error(format!(
                "no result record on stdout ({} bytes)",
                stdout.len()
            )),
        },
        Some(code) if code == spec.oom_exit_code => RunResult::oom(),
        Some(code) => RunResult::workload_error(format!(
            "exit code {code}{}",
            stderr_tail(&stderr)
        )),
        None => RunResult::workload_error(format!(
            "killed by signal{}",
            stderr_tail(&stderr)
        )),
    };
    Ok(result)
}

fn drain(mut pipe: impl Read + Send + 'static) -> std::thread::JoinHandle<String> {
    std::thread::spawn(move || {
        let mut buffer = String::new();
        let _ = pipe.read_to_string(&mut buffer);
        buffer
    })
}

fn wait_with_timeout(child: &mut Child, timeout: Duration) -> Option<std::process::ExitStatus> {
    let deadline = Instant::now() + timeout;
    loop {
        match child.try_wait() {
            Ok(Some(status)) => return Some(status),
            Ok(None) => {
                if Instant::now() >= deadline {
                    return None;
                }
                std::thread::sleep(Duration::from_millis(5));
            }
            Err(_) => return None,
        }
    }
}

fn stderr_tail(stderr: &str) -> String {
    let tail: String = stderr.trim().chars().rev().take(200).collect::<String>();
    let tail: String = tail.chars().rev().collect();
    if tail.is_empty() {
        String::new()
    } else {
        format!("; stderr: ...{tail}")
    }
}
