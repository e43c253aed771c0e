//! Workload registry: the built-in synthetics plus a directory of spec
//! files, one per workload.
//!
//! Spec files are `key = value` lines with `#` comments:
//!
//! ```text
//! # resnet50.workload
//! name = resnet50
//! domain = computer-vision
//! modes = train,eval
//! devices = cpu,gpu
//! train_batch_size = 32
//! executable = /opt/workloads/resnet50/run.sh
//! args = --variant v2
//! oom_exit_code = 42
//! ```
//!
//! `name`, `modes`, `devices`, `train_batch_size`, and `executable` are
//! required; `domain` defaults to "uncategorized", `args` to none, and
//! `oom_exit_code` to 42. `executable` and `args` may contain `{artifact}`,
//! substituted at run time with the build artifact under test.

use std::collections::BTreeMap;
use std::path::Path;

use benchwatch_core::synth::BUILTIN_MODELS;
use benchwatch_core::workload::{
    Device, DeviceSet, Mode, ModeSet, WorkloadSpec, DEFAULT_OOM_EXIT_CODE,
};

use crate::error::HarnessError;

/// Spec-file suffix recognized in a registry directory.
pub const WORKLOAD_FILE_EXTENSION: &str = "workload";

/// The built-in synthetic workloads, wired to the given harness executable
/// (they run as `<synth_exe> synth-exec --model <name> <protocol flags>`).
pub fn builtin_specs(synth_exe: &Path) -> Vec<WorkloadSpec> {
    BUILTIN_MODELS
        .iter()
        .map(|model| WorkloadSpec {
            name: model.name.to_string(),
            domain: model.domain.to_string(),
            supported_modes: ModeSet::BOTH,
            supported_devices: DeviceSet::BOTH,
            default_train_batch_size: model.default_train_batch_size,
            executable: synth_exe.display().to_string(),
            args: vec![
                "synth-exec".to_string(),
                "--model".to_string(),
                model.name.to_string(),
            ],
            oom_exit_code: DEFAULT_OOM_EXIT_CODE,
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct Registry {
    workloads: BTreeMap<String, WorkloadSpec>,
}

impl Registry {
    /// Builtins plus every `*.workload` file under `dir` (when given).
    /// Duplicate names are an error.
    pub fn load(dir: Option<&Path>, synth_exe: &Path) -> Result<Registry, HarnessError> {
        let mut workloads = BTreeMap::new();
        for spec in builtin_specs(synth_exe) {
            workloads.insert(spec.name.clone(), spec);
        }
        if let Some(dir) = dir {
            if !dir.is_dir() {
                return Err(HarnessError::Validation(format!(
                    "workload registry {} is not a directory",
                    dir.display()
                )));
            }
            let mut entries: Vec<_> = std::fs::read_dir(dir)
                .map_err(|e| HarnessError::io(dir, e))?
                .collect::<Result<_, _>>()
                .map_err(|e| HarnessError::io(dir, e))?;
            entries.sort_by_key(|e| e.path());
            for entry in entries {
                let path = entry.path();
                if path.extension().and_then(|e| e.to_str()) != Some(WORKLOAD_FILE_EXTENSION) {
                    continue;
                }
                let text =
                    std::fs::read_to_string(&path).map_err(|e| HarnessError::io(&path, e))?;
                let spec = parse_workload_file(&text).map_err(|e| {
                    HarnessError::Parse(format!("{}: {e}", path.display()))
                })?;
                if workloads.contains_key(&spec.name) {
                    return Err(HarnessError::Validation(format!(
                        "duplicate workload name {:?} in {}",
                        spec.name,
                        path.display()
                    )));
                }
                workloads.insert(spec.name.clone(), spec);
            }
        }
        Ok(Registry { workloads })
    }

    pub fn get(&self, name: &str) -> Result<&WorkloadSpec, HarnessError> {
        self.workloads.get(name).ok_or_else(|| {
            HarnessError::Validation(format!("unknown workload {name:?}"))
        })
    }

    pub fn iter(&self) -> impl Iterator<Item = &WorkloadSpec> {
        self.workloads.values()
    }

    pub fn len(&self) -> usize {
        self.workloads.len()
    }

    pub fn is_empty(&self) -> bool {
        self.workloads.is_empty()
    }
}

fn parse_modes(value: &str) -> Result<ModeSet, String> {
    let mut set = ModeSet { train: false, eval: false };
    for part in value.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        match part.parse::<Mode>() {
            Ok(Mode::Train) => set.train = true,
            Ok(Mode::Eval) => set.eval = true,
            Err(e) => return Err(e.to_string()),
        }
    }
    Ok(set)
}

fn parse_devices(value: &str) -> Result<DeviceSet, String> {
    let mut set = DeviceSet { cpu: false, gpu: false };
    for part in value.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        match part.parse::<Device>() {
            Ok(Device::Cpu) => set.cpu = true,
            Ok(Device::Gpu) => set.gpu = true,
            Err(e) => return Err(e.to_string()),
        }
    }
    Ok(set)
}

/// Parses one spec file. See the module docs for the format.
pub fn parse_workload_file(text: &str) -> Result<WorkloadSpec, String> {
    let mut fields: BTreeMap<&str, &str> = BTreeMap::new();
    for (number, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(format!("line {}: expected `key = value`", number + 1));
        };
        fields.insert(key.trim(), value.trim());
    }
    let required = |key: &str| -> Result<&str, String> {
        fields
            .get(key)
            .copied()
            .ok_or_else(|| format!("missing required key `{key}`"))
    };

    let spec = WorkloadSpec {
        name: required("name")?.to_string(),
        domain: fields
            .get("domain")
            .copied()
            .unwrap_or("uncategorized")
            .to_string(),
        supported_modes: parse_modes(required("modes")?)?,
        supported_devices: parse_devices(required("devices")?)?,
        default_train_batch_size: required("train_batch_size")?
            .parse()
            .map_err(|e| format!("train_batch_size: {e}"))?,
        executable: required("executable")?.to_string(),
        args: fields
            .get("args")
            .map(|s| s.split_whitespace().map(str::to_string).collect())
            .unwrap_or_default(),
        oom_exit_code: match fields.get("oom_exit_code") {
            Some(s) => s.parse().map_err(|e| format!("oom_exit_code: {e}"))?,
            None => DEFAULT_OOM_EXIT_CODE,
        },
    };
    spec.validate().map_err(|e| e.to_string())?;
    Ok(spec)
}

/// Renders a spec back into the file format (used by docs and tests).
pub fn format_workload_file(spec: &WorkloadSpec) -> String {
    let mut modes = Vec::new();
    if spec.supported_modes.train {
        modes.push("train");
    }
    if spec.supported_modes.eval {
        modes.push("eval");
    }
    let mut devices = Vec::new();
    if spec.supported_devices.cpu {
        devices.push("cpu");
    }
    if spec.supported_devices.gpu {
        devices.push("gpu");
    }
    let mut out = format!(
        "name = {}\ndomain = {}\nmodes = {}\ndevices = {}\ntrain_batch_size = {}\nexecutable = {}\n",
        spec.name,
        spec.domain,
        modes.join(","),
        devices.join(","),
        spec.default_train_batch_size,
        spec.executable,
    );
    if !spec.args.is_empty() {
        out.push_str(&format!("args = {}\n", spec.args.join(" ")));
    }
    if spec.oom_exit_code != DEFAULT_OOM_EXIT_CODE {
        out.push_str(&format!("oom_exit_code = {}\n", spec.oom_exit_code));
    }
    out
}

/// Replaces `{artifact}` in the executable and args with the artifact path.
pub fn substitute_artifact(spec: &WorkloadSpec, artifact: &str) -> WorkloadSpec {
    let mut out = spec.clone();
    out.executable = out.executable.replace("{artifact}", artifact);
    out.args = out
        .args
        .iter()
        .map(|a| a.replace("{artifact}", artifact))
        .collect();
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = "\
# demo workload
name = demo-net
domain = computer-vision
modes = train, eval
devices = gpu
train_batch_size = 32
executable = /opt/demo/run.sh
args = --variant v2
";

    #[test]
    fn parses_sample_file() {
        let spec = parse_workload_file(SAMPLE).unwrap();
        assert_eq!(spec.name, "demo-net");
        assert_eq!(spec.domain, "computer-vision");
        assert!(spec.supported_modes.train && spec.supported_modes.eval);
        assert!(spec.supported_devices.gpu && !spec.supported_devices.cpu);
        assert_eq!(spec.default_train_batch_size, 32);
        assert_eq!(spec.args, vec!["--variant", "v2"]);
        assert_eq!(spec.oom_exit_code, DEFAULT_OOM_EXIT_CODE);
    }

    #[test]
    fn format_parse_round_trip() {
        let spec = parse_workload_file(SAMPLE).unwrap();
        let rendered = format_workload_file(&spec);
        assert_eq!(parse_workload_file(&rendered).unwrap(), spec);
    }

    #[test]
    fn missing_required_key_fails() {
        let e = parse_workload_file("name = x\nmodes = eval\n").unwrap_err();
        assert!(e.contains("devices"), "{e}");
    }

    #[test]
    fn invariant_violations_fail() {
        let text = SAMPLE.replace("train_batch_size = 32", "train_batch_size = 0");
        assert!(parse_workload_file(&text).is_err());
        let text = SAMPLE.replace("devices = gpu", "devices = ");
        assert!(parse_workload_file(&text).is_err());
    }

    #[test]
    fn builtins_are_present_and_valid() {
        let specs = builtin_specs(Path::new("/usr/bin/benchwatch"));
        assert_eq!(specs.len(), 3);
        for spec in &specs {
            spec.validate().unwrap();
        }
        assert!(specs.iter().any(|s| s.name == "synth-conv"));
        assert!(specs.iter().any(|s| s.name == "synth-matmul"));
        assert!(specs.iter().any(|s| s.name == "synth-const"));
    }

    #[test]
    fn registry_loads_dir_and_rejects_duplicates() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("demo.workload"), SAMPLE).unwrap();
        std::fs::write(dir.path().join("ignored.txt"), "junk").unwrap();
        let registry = Registry::load(Some(dir.path()), Path::new("bw")).unwrap();
        assert_eq!(registry.len(), 4);
        assert!(registry.get("demo-net").is_ok());
        assert!(registry.get("missing").is_err());

        let clash = SAMPLE.replace("name = demo-net", "name = synth-conv");
        std::fs::write(dir.path().join("clash.workload"), clash).unwrap();
        assert!(Registry::load(Some(dir.path()), Path::new("bw")).is_err());
    }

    #[test]
    fn artifact_substitution() {
        let mut spec = parse_workload_file(SAMPLE).unwrap();
        spec.executable = "{artifact}/run.sh".to_string();
        spec.args = vec!["--root".to_string(), "{artifact}".to_string()];
        let out = substitute_artifact(&spec, "/builds/abc");
        assert_eq!(out.executable, "/builds/abc/run.sh");
        assert_eq!(out.args[1], "/builds/abc");
    }
}
