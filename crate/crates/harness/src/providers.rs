//! Build/measure providers behind the bisection search.
//!
//! The command provider is the reference real-world implementation: it
//! shells out to a configured command template with `{commit}` substituted,
//! treats a nonzero exit as unbuildable, and takes the last stdout line as
//! the artifact path. Measurement then runs the regular harness against
//! the artifact. The simulated provider comes from a history description
//! file (see [`benchwatch_core::sim`]).

use std::path::Path;
use std::process::Command;

use benchwatch_core::bisect::{BuildProvider, CommitInfo, MeasureProvider};
use benchwatch_core::measure::{CellId, RunConfig};
use benchwatch_core::regression::MetricKind;
use benchwatch_core::sim::SimulatedHistory;
use benchwatch_core::workload::WorkloadSpec;

use crate::error::HarnessError;
use crate::proto::Invoker;
use crate::registry::substitute_artifact;
use crate::runner::measure;

/// Loads a simulated history description file (JSON).
pub fn load_history(path: &Path) -> Result<SimulatedHistory, HarnessError> {
    let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    let history: SimulatedHistory = serde_json::from_str(&text)
        .map_err(|e| HarnessError::Parse(format!("{}: {e}", path.display())))?;
    history.validate().map_err(HarnessError::Validation)?;
    Ok(history)
}

/// The day's commit list for command-mode bisection.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct CommitsFile {
    pub commits: Vec<CommitInfo>,
}

pub fn load_commits(path: &Path) -> Result<Vec<CommitInfo>, HarnessError> {
    let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    let file: CommitsFile = serde_json::from_str(&text)
        .map_err(|e| HarnessError::Parse(format!("{}: {e}", path.display())))?;
    if file.commits.is_empty() {
        return Err(HarnessError::Validation(format!(
            "{}: empty commit list",
            path.display()
        )));
    }
    Ok(file.commits)
}

/// Shells out to `build_cmd` with `{commit}` substituted.
pub struct CommandBuildProvider {
    pub build_cmd: String,
}

impl BuildProvider for CommandBuildProvider {
    fn build(&mut self, commit: &CommitInfo) -> Result<String, String> {
        let command_line = self.build_cmd.replace("{commit}", &commit.id);
        let output = Command::new("sh")
            .arg("-c")
            .arg(&command_line)
            .output()
            .map_err(|e| format!("spawn failed: {e}"))?;
        if !output.status.success() {
            let stderr = String::from_utf8_lossy(&output.stderr);
            return Err(format!(
                "build command exited {:?}: {}",
                output.status.code(),
                stderr.trim().lines().last().unwrap_or("")
            ));
        }
        let stdout = String::from_utf8_lossy(&output.stdout);
        Ok(stdout
            .lines()
            .rev()
            .find(|l| !l.trim().is_empty())
            .unwrap_or(&commit.id)
            .trim()
            .to_string())
    }
}

/// Measures the predicate cell with the regular harness, substituting the
/// artifact into the workload spec. Bisection probes use full repeats so a
/// probe is as trustworthy as the nightly measurement itself.
pub struct HarnessMeasureProvider<'a> {
    pub spec: &'a WorkloadSpec,
    pub repeats: u32,
    pub invoker: &'a mut dyn Invoker,
    /// Batch size resolved once for the finding's cell.
    pub batch_size: u32,
}

impl MeasureProvider for HarnessMeasureProvider<'_> {
    fn measure(
        &mut self,
        artifact: &str,
        _commit: &CommitInfo,
        cell: &CellId,
        metric: MetricKind,
    ) -> Result<u64, String> {
        let spec = substitute_artifact(self.spec, artifact);
        let mut config = RunConfig::new(
            cell.mode,
            cell.device,
            benchwatch_core::measure::BatchSize::Fixed(self.batch_size),
        );
        config.repeats = self.repeats;
        let set = measure(&spec, &config, self.batch_size, self.invoker)
            .map_err(|e| e.to_string())?;
        let metrics = set.representative();
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

    #[test]
    fn command_provider_returns_last_stdout_line() {
        let mut provider = CommandBuildProvider {
            build_cmd: "echo building {commit}; echo /tmp/artifact-{commit}".to_string(),
        };
        let commit = CommitInfo { id: "abc123".to_string(), timestamp_unix: 0 };
        assert_eq!(provider.build(&commit).unwrap(), "/tmp/artifact-abc123");
    }

    #[test]
    fn command_provider_maps_failure_to_unbuildable() {
        let mut provider = CommandBuildProvider {
            build_cmd: "echo broken {commit} >&2; exit 3".to_string(),
        };
        let commit = CommitInfo { id: "abc".to_string(), timestamp_unix: 0 };
        let err = provider.build(&commit).unwrap_err();
        assert!(err.contains("exited"), "{err}");
        assert!(err.contains("broken abc"), "{err}");
    }

    #[test]
    fn history_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("history.json");
        std::fs::write(
            &path,
            r#"{"n": 70, "culprit_index": 42, "step": 0.2, "noise": 0.0, "unbuildable": [35], "seed": 7}"#,
        )
        .unwrap();
        let history = load_history(&path).unwrap();
        assert_eq!(history.commit_count, 70);
        assert!(history.unbuildable.contains(&35));

        std::fs::write(&path, r#"{"n": 0}"#).unwrap();
        assert!(load_history(&path).is_err());
    }

    #[test]
    fn commits_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("commits.json");
        std::fs::write(
            &path,
            r#"{"commits": [{"id": "a", "timestamp_unix": 1}, {"id": "b", "timestamp_unix": 2}]}"#,
        )
        .unwrap();
        let commits = load_commits(&path).unwrap();
        assert_eq!(commits.len(), 2);
        assert_eq!(commits[0].id, "a");

        std::fs::write(&path, r#"{"commits": []}"#).unwrap();
        assert!(load_commits(&path).is_err());
    }
}
