//! The executable-workload contract.
//!
//! A workload is an external program that measures one computation region
//! and reports its own metrics as a single-line JSON record on stdout. The
//! harness owns the invocation loop and the exit-code mapping; these types
//! carry the request and the parsed outcome.

use alloc::string::String;
use alloc::vec::Vec;

use core::fmt;

use serde::{Deserialize, Serialize};

/// Exit code a workload uses to signal out-of-memory, unless its spec
/// overrides it. Dedicated so batch-size search needs no output parsing
/// on the failure path.
pub const DEFAULT_OOM_EXIT_CODE: i32 = 42;

/// Default wall-clock timeout for a single workload invocation, in seconds.
pub const DEFAULT_TIMEOUT_SECS: u64 = 600;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Train,
    Eval,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Train => "train",
            Mode::Eval => "eval",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl core::str::FromStr for Mode {
    type Err = WorkloadError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "train" => Ok(Mode::Train),
            "eval" => Ok(Mode::Eval),
            _ => Err(WorkloadError::BadMode(String::from(s))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Device {
    Cpu,
    Gpu,
}

impl Device {
    pub fn as_str(self) -> &'static str {
        match self {
            Device::Cpu => "cpu",
            Device::Gpu => "gpu",
        }
    }
}

impl fmt::Display for Device {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl core::str::FromStr for Device {
    type Err = WorkloadError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "cpu" => Ok(Device::Cpu),
            "gpu" => Ok(Device::Gpu),
            _ => Err(WorkloadError::BadDevice(String::from(s))),
        }
    }
}

/// Which of train/eval a workload implements.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModeSet {
    pub train: bool,
    pub eval: bool,
}

impl ModeSet {
    pub const BOTH: ModeSet = ModeSet { train: true, eval: true };

    pub fn contains(self, mode: Mode) -> bool {
        match mode {
            Mode::Train => self.train,
            Mode::Eval => self.eval,
        }
    }

    pub fn is_empty(self) -> bool {
        !self.train && !self.eval
    }
}

/// Which devices a workload can run on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeviceSet {
    pub cpu: bool,
    pub gpu: bool,
}

impl DeviceSet {
    pub const BOTH: DeviceSet = DeviceSet { cpu: true, gpu: true };

    pub fn contains(self, device: Device) -> bool {
        match device {
            Device::Cpu => self.cpu,
            Device::Gpu => self.gpu,
        }
    }

    pub fn is_empty(self) -> bool {
        !self.cpu && !self.gpu
    }
}

/// Static description of one registered workload: its capability matrix,
/// its default training batch size, and how to launch it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorkloadSpec {
    pub name: String,
    /// Free-form grouping label, e.g. "computer-vision".
    pub domain: String,
    pub supported_modes: ModeSet,
    pub supported_devices: DeviceSet,
    /// Training always uses this batch size; only eval batch sizes are
    /// searched.
    pub default_train_batch_size: u32,
    pub executable: String,
    /// Fixed arguments placed before the protocol flags.
    pub args: Vec<String>,
    pub oom_exit_code: i32,
}

impl WorkloadSpec {
    pub fn validate(&self) -> Result<(), WorkloadError> {
        if self.name.is_empty()
            || !self
                .name
                .bytes()
                .all(|b| b.is_ascii_alphanumeric() || b == b'-' || b == b'_')
        {
            return Err(WorkloadError::BadName(self.name.clone()));
        }
        if self.supported_modes.is_empty() {
            return Err(WorkloadError::EmptyModes);
        }
        if self.supported_devices.is_empty() {
            return Err(WorkloadError::EmptyDevices);
        }
        if self.default_train_batch_size < 1 {
            return Err(WorkloadError::BadTrainBatchSize);
        }
        if self.executable.is_empty() {
            return Err(WorkloadError::EmptyExecutable);
        }
        Ok(())
    }

    pub fn supports(&self, mode: Mode, device: Device) -> bool {
        self.supported_modes.contains(mode) && self.supported_devices.contains(device)
    }
}

/// One invocation request, encoded onto the workload's argv by the harness.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunRequest {
    pub mode: Mode,
    pub device: Device,
    pub batch_size: u32,
    pub iterations: u32,
    /// Opaque label, passed through unchanged.
    pub precision: String,
    pub trace_requested: bool,
}

impl RunRequest {
    pub fn new(mode: Mode, device: Device, batch_size: u32) -> Self {
        Self {
            mode,
            device,
            batch_size,
            iterations: 1,
            precision: String::from("fp32"),
            trace_requested: false,
        }
    }

    pub fn with_trace(mut self) -> Self {
        self.trace_requested = true;
        self
    }

    pub fn validate(&self) -> Result<(), WorkloadError> {
        if self.batch_size < 1 {
            return Err(WorkloadError::BadBatchSize);
        }
        if self.iterations < 1 {
            return Err(WorkloadError::BadIterations);
        }
        Ok(())
    }
}

/// Metrics a workload self-reports for its computation region.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunMetrics {
    /// Duration of the computation region only, excluding data loading and
    /// postprocessing.
    pub wall_time_us: u64,
    pub peak_cpu_mem_bytes: u64,
    /// Zero when the run was CPU-only.
    pub peak_gpu_mem_bytes: u64,
    /// Resident set after teardown; the harness, not the workload, judges
    /// whether growth here is a leak.
    pub post_run_resident_bytes: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExitClass {
    Ok,
    Oom,
    /// The process exited 0 but its stdout did not carry a valid record.
    ProtocolError,
    WorkloadError,
}

impl fmt::Display for ExitClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ExitClass::Ok => "ok",
            ExitClass::Oom => "oom",
            ExitClass::ProtocolError => "protocol_error",
            ExitClass::WorkloadError => "workload_error",
        })
    }
}

/// Outcome of one workload invocation. Metric fields are only meaningful
/// when `exit_class` is `Ok`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunResult {
    pub exit_class: ExitClass,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub metrics: Option<RunMetrics>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trace_path: Option<String>,
    /// Diagnostic detail for non-ok outcomes ("timeout after 600s",
    /// "exit code 3", ...).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
}

impl RunResult {
    /// A successful run. Rejects `wall_time_us == 0`; a workload reporting a
    /// zero-length computation region broke the protocol.
    pub fn ok(metrics: RunMetrics, trace_path: Option<String>) -> Result<Self, WorkloadError> {
        if metrics.wall_time_us == 0 {
            return Err(WorkloadError::ZeroWallTime);
        }
        Ok(Self {
            exit_class: ExitClass::Ok,
            metrics: Some(metrics),
            trace_path,
            failure: None,
        })
    }

    pub fn oom() -> Self {
        Self {
            exit_class: ExitClass::Oom,
            metrics: None,
            trace_path: None,
            failure: None,
        }
    }

    pub fn protocol_error(reason: String) -> Self {
        Self {
            exit_class: ExitClass::ProtocolError,
            metrics: None,
            trace_path: None,
            failure: Some(reason),
        }
    }

    pub fn workload_error(reason: String) -> Self {
        Self {
            exit_class: ExitClass::WorkloadError,
            metrics: None,
            trace_path: None,
            failure: Some(reason),
        }
    }

    pub fn is_ok(&self) -> bool {
        self.exit_class == ExitClass::Ok
    }

    pub fn wall_time_us(&self) -> Option<u64> {
        self.metrics.map(|m| m.wall_time_us)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum WorkloadError {
    BadMode(String),
    BadDevice(String),
    BadName(String),
    EmptyModes,
    EmptyDevices,
    BadTrainBatchSize,
    EmptyExecutable,
    BadBatchSize,
    BadIterations,
    ZeroWallTime,
}

impl fmt::Display for WorkloadError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WorkloadError::BadMode(s) => write!(f, "unknown mode {s:?} (expected train|eval)"),
            WorkloadError::BadDevice(s) => write!(f, "unknown device {s:?} (expected cpu|gpu)"),
            WorkloadError::BadName(s) => write!(
                f,
                "invalid workload name {s:?} (need [A-Za-z0-9_-]+, non-empty)"
            ),
            WorkloadError::EmptyModes => f.write_str("supported_modes must be non-empty"),
            WorkloadError::EmptyDevices => f.write_str("supported_devices must be non-empty"),
            WorkloadError::BadTrainBatchSize => {
                f.write_str("default_train_batch_size must be >= 1")
            }
            WorkloadError::EmptyExecutable => f.write_str("executable path must be non-empty"),
            WorkloadError::BadBatchSize => f.write_str("batch_size must be >= 1"),
            WorkloadError::BadIterations => f.write_str("iterations must be >= 1"),
            WorkloadError::ZeroWallTime => {
                f.write_str("ok result must carry wall_time_us > 0")
            }
        }
    }
}

impl core::error::Error for WorkloadError {}
