//! Measurement orchestration on top of the invocation protocol.
//!
//! Measurement slots are mutually exclusive: everything here runs one
//! workload process at a time, and the matrix iterates its cells serially.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use benchwatch_core::measure::{
    reduce_runs, search_batch_size, BatchSize, CellStatus, ConfigMatrix, MatrixCell, MeasureError,
    MeasurementSet, ProbeStatus, RunConfig, SearchOutcome, MATRIX_CELLS,
};
use benchwatch_core::trace::decompose;
use benchwatch_core::workload::{Device, ExitClass, Mode, RunRequest, RunResult, WorkloadSpec};

use crate::error::HarnessError;
use crate::proto::Invoker;
use crate::trace_io::parse_trace;

/// Host device availability, from configuration. The synthetics simulate a
/// GPU, so `gpu = true` is sound on GPU-less hosts running only builtins.
#[derive(Debug, Clone, Copy)]
pub struct DeviceAvailability {
    pub cpu: bool,
    pub gpu: bool,
}

impl Default for DeviceAvailability {
    fn default() -> Self {
        Self { cpu: true, gpu: true }
    }
}

impl DeviceAvailability {
    pub fn has(&self, device: Device) -> bool {
        match device {
            Device::Cpu => self.cpu,
            Device::Gpu => self.gpu,
        }
    }
}

/// Runs one (workload, config) cell: `repeats` sequential invocations, then
/// the configured reduction. Stops at the first OOM. GPU runs request a
/// device trace so breakdown reports can be derived from the raw records.
pub fn measure(
    spec: &WorkloadSpec,
    config: &RunConfig,
    batch_size: u32,
    invoker: &mut dyn Invoker,
) -> Result<MeasurementSet, HarnessError> {
    config.validate()?;
    let mut runs: Vec<RunResult> = Vec::with_capacity(config.repeats as usize);
    for _ in 0..config.repeats {
        let mut request = RunRequest::new(config.mode, config.device, batch_size);
        request.trace_requested = config.device == Device::Gpu;
        let result = invoker.invoke(spec, &request)?;
        let oom = result.exit_class == ExitClass::Oom;
        runs.push(result);
        if oom {
            break;
        }
    }
    reduce_runs(&spec.name, config, batch_size, runs).map_err(|e| match e {
        MeasureError::OomEncountered => HarnessError::Oom { batch_size },
        other => other.into(),
    })
}

/// One search probe: a single eval run. On GPU the score is the
/// trace-derived active fraction; on CPU (no device timeline exists) it is
/// throughput, batch_size / wall_time. A GPU run that yields no trace falls
/// back to throughput.
fn probe_once(
    spec: &WorkloadSpec,
    device: Device,
    batch_size: u32,
    invoker: &mut dyn Invoker,
) -> Result<ProbeStatus, HarnessError> {
    let mut request = RunRequest::new(Mode::Eval, device, batch_size);
    request.trace_requested = device == Device::Gpu;
    let result = invoker.invoke(spec, &request)?;
    match result.exit_class {
        ExitClass::Oom => Ok(ProbeStatus::Oom),
        ExitClass::Ok => {
            let wall_time_us = result.wall_time_us().expect("ok runs carry metrics");
            let throughput = batch_size as f64 / wall_time_us as f64;
            let score = match (device, &result.trace_path) {
                (Device::Gpu, Some(path)) => {
                    let events = parse_trace(Path::new(path))?;
                    decompose(&events, wall_time_us)?.active_fraction
                }
                (Device::Gpu, None) | (Device::Cpu, _) => throughput,
            };
            Ok(ProbeStatus::Measured { wall_time_us, score })
        }
        ExitClass::ProtocolError | ExitClass::WorkloadError => Ok(ProbeStatus::Failed),
    }
}

/// Batch-size doubling search for eval mode (training always uses the
/// spec's default batch size).
pub fn search_eval_batch_size(
    spec: &WorkloadSpec,
    device: Device,
    cap: u32,
    invoker: &mut dyn Invoker,
) -> Result<SearchOutcome, HarnessError> {
    let mut deferred: Option<HarnessError> = None;
    let outcome = search_batch_size(cap, |batch_size| {
        if deferred.is_some() {
            return ProbeStatus::Failed;
        }
        match probe_once(spec, device, batch_size, invoker) {
            Ok(status) => status,
            Err(e) => {
                deferred = Some(e);
                ProbeStatus::Failed
            }
        }
    });
    if let Some(e) = deferred {
        return Err(e);
    }
    outcome.map_err(Into::into)
}

/// Searched eval batch sizes, persisted one key-value file per
/// (workload, device) so repeated matrix runs skip the search.
#[derive(Debug)]
pub struct BatchSizeCache {
    dir: Option<PathBuf>,
    entries: BTreeMap<(String, Device), u32>,
}

impl BatchSizeCache {
    /// In-memory only.
    pub fn ephemeral() -> Self {
        Self { dir: None, entries: BTreeMap::new() }
    }

    pub fn at(dir: impl Into<PathBuf>) -> Result<Self, HarnessError> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir).map_err(|e| HarnessError::io(&dir, e))?;
        Ok(Self { dir: Some(dir), entries: BTreeMap::new() })
    }

    fn file(&self, workload: &str, device: Device) -> Option<PathBuf> {
        self.dir
            .as_ref()
            .map(|d| d.join(format!("{workload}.{device}.bs")))
    }

    pub fn get(&mut self, workload: &str, device: Device) -> Option<u32> {
        let key = (workload.to_string(), device);
        if let Some(&bs) = self.entries.get(&key) {
            return Some(bs);
        }
        let path = self.file(workload, device)?;
        let text = std::fs::read_to_string(path).ok()?;
        let bs = text.lines().find_map(|line| {
            let (key, value) = line.split_once('=')?;
            (key.trim() == "batch_size").then(|| value.trim().parse::<u32>().ok())?
        })?;
        self.entries.insert(key, bs);
        Some(bs)
    }

    pub fn put(
        &mut self,
        workload: &str,
        device: Device,
        batch_size: u32,
    ) -> Result<(), HarnessError> {
        self.entries
            .insert((workload.to_string(), device), batch_size);
        if let Some(path) = self.file(workload, device) {
            let text = format!(
                "workload = {workload}\ndevice = {device}\nbatch_size = {batch_size}\n"
            );
            std::fs::write(&path, text).map_err(|e| HarnessError::io(&path, e))?;
        }
        Ok(())
    }
}

/// Resolves `auto` batch sizes: training uses the spec default; eval uses
/// the cache or a fresh search (which is then cached). An explicit batch
/// size always wins.
pub fn resolve_batch_size(
    spec: &WorkloadSpec,
    mode: Mode,
    device: Device,
    requested: BatchSize,
    cap: u32,
    cache: &mut BatchSizeCache,
    invoker: &mut dyn Invoker,
) -> Result<u32, HarnessError> {
    match (mode, requested) {
        (_, BatchSize::Fixed(n)) => Ok(n),
        (Mode::Train, BatchSize::Auto) => Ok(spec.default_train_batch_size),
        (Mode::Eval, BatchSize::Auto) => {
            if let Some(bs) = cache.get(&spec.name, device) {
                return Ok(bs);
            }
            let outcome = search_eval_batch_size(spec, device, cap, invoker)?;
            cache.put(&spec.name, device, outcome.best_batch_size)?;
            Ok(outcome.best_batch_size)
        }
    }
}

/// Measures the four-configuration matrix of one workload. Unsupported and
/// unavailable cells are skipped with a reason; per-cell failures are
/// recorded in place and never abort the matrix.
pub fn run_matrix(
    spec: &WorkloadSpec,
    base: &RunConfig,
    availability: DeviceAvailability,
    search_cap: u32,
    cache: &mut BatchSizeCache,
    invoker: &mut dyn Invoker,
) -> ConfigMatrix {
    let mut cells = Vec::with_capacity(MATRIX_CELLS.len());
    for (mode, device) in MATRIX_CELLS {
        let status = if !spec.supported_modes.contains(mode) {
            CellStatus::Skipped { reason: "mode unsupported".to_string() }
        } else if !spec.supported_devices.contains(device) {
            CellStatus::Skipped { reason: "device unsupported".to_string() }
        } else if !availability.has(device) {
            CellStatus::Skipped { reason: "device unavailable".to_string() }
        } else {
            let config = RunConfig {
                mode,
                device,
                batch_size: base.batch_size,
                repeats: base.repeats,
                reduction: base.reduction,
            };
            // Training always runs the spec default; an explicit --bs only
            // shapes the eval cells.
            let requested = match mode {
                Mode::Train => BatchSize::Auto,
                Mode::Eval => base.batch_size,
            };
            let measured =
                resolve_batch_size(spec, mode, device, requested, search_cap, cache, invoker)
                    .and_then(|batch_size| measure(spec, &config, batch_size, invoker));
            match measured {
                Ok(set) => CellStatus::Measured(set),
                Err(e) => CellStatus::Skipped { reason: format!("failed: {e}") },
            }
        };
        cells.push(MatrixCell { mode, device, status });
    }
    ConfigMatrix {
        workload: spec.name.clone(),
        cells,
    }
}
