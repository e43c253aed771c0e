//! In-process invoker over the built-in synthetic models, for tests and
//! demos that do not want to pay subprocess startup per run. Behaves like
//! the subprocess transport (same precondition checks, same trace files),
//! minus the process boundary.

use std::path::PathBuf;

use benchwatch_core::synth::{builtin_model, SyntheticOutcome};
use benchwatch_core::workload::{Device, RunRequest, RunResult, WorkloadSpec};

use crate::error::HarnessError;
use crate::proto::{check_preconditions, Invoker};
use crate::trace_io::write_trace;

pub struct SyntheticInvoker {
    trace_dir: PathBuf,
    invocations: u64,
}

impl SyntheticInvoker {
    pub fn new(trace_dir: impl Into<PathBuf>) -> Self {
        Self {
            trace_dir: trace_dir.into(),
            invocations: 0,
        }
    }

    pub fn invocations(&self) -> u64 {
        self.invocations
    }

    fn model_name(spec: &WorkloadSpec) -> Result<&str, HarnessError> {
        spec.args
            .windows(2)
            .find(|w| w[0] == "--model")
            .map(|w| w[1].as_str())
            .ok_or_else(|| {
                HarnessError::Launch(format!(
                    "workload {} is not a built-in synthetic",
                    spec.name
                ))
            })
    }
}

impl Invoker for SyntheticInvoker {
    fn invoke(
        &mut self,
        spec: &WorkloadSpec,
        req: &RunRequest,
    ) -> Result<RunResult, HarnessError> {
        check_preconditions(spec, req)?;
        self.invocations += 1;
        let model = builtin_model(Self::model_name(spec)?).ok_or_else(|| {
            HarnessError::Launch(format!("unknown built-in model for {}", spec.name))
        })?;
        match model.execute(req) {
            SyntheticOutcome::Oom => Ok(RunResult::oom()),
            SyntheticOutcome::Ok { metrics, trace } => {
                let trace_path = match trace {
                    Some(events) if req.device == Device::Gpu => {
                        std::fs::create_dir_all(&self.trace_dir)
                            .map_err(|e| HarnessError::io(&self.trace_dir, e))?;
                        let path = self.trace_dir.join(format!(
                            "{}-{}-{}-bs{}-{:04}.trace.json",
                            spec.name, req.mode, req.device, req.batch_size, self.invocations
                        ));
                        write_trace(&path, &events)?;
                        Some(path.display().to_string())
                    }
                    _ => None,
                };
                Ok(RunResult::ok(metrics, trace_path)?)
            }
        }
    }
}
