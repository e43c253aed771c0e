//! Built-in synthetic workloads and the synthetic trace generator.
//!
//! The synthetics stand in for real accelerator workloads at desk scale:
//! they simulate device behavior purely through generated trace files and
//! deterministic timings, so the whole harness can be exercised end to end
//! without hardware. Each model documents a utilization curve over batch
//! size, an OOM threshold, and a base wall time; identical requests always
//! produce identical metrics.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use core::fmt;

use crate::rng::SplitMix64;
use crate::trace::{Decomposition, EventCategory, TraceError, TraceEvent};
use crate::workload::{Device, RunMetrics, RunRequest};

/// Batch-size → utilization shape, defined for every batch size ≥ 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum UtilCurve {
    /// Concave in log2(batch): `1 - (log2(bs) - peak_log2)^2 / width`,
    /// clamped to [0.01, 1]. Peaks at `bs = 2^peak_log2`.
    ConcaveLog2 { peak_log2: f64, width: f64 },
    /// Monotone increasing, saturating toward 1: `bs / (bs + half)`.
    Saturating { half: f64 },
    Constant { level: f64 },
}

impl UtilCurve {
    pub fn utilization(&self, batch_size: u32) -> f64 {
        debug_assert!(batch_size >= 1);
        match *self {
            UtilCurve::ConcaveLog2 { peak_log2, width } => {
                let l = libm::log2(batch_size as f64);
                let u = 1.0 - (l - peak_log2) * (l - peak_log2) / width;
                u.clamp(0.01, 1.0)
            }
            UtilCurve::Saturating { half } => {
                let b = batch_size as f64;
                b / (b + half)
            }
            UtilCurve::Constant { level } => level,
        }
    }
}

/// Fully documented behavior of one built-in workload.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticWorkloadModel {
    pub name: &'static str,
    pub domain: &'static str,
    pub default_train_batch_size: u32,
    pub util_curve: UtilCurve,
    /// Requesting `batch_size >= oom_threshold` yields an OOM exit.
    pub oom_threshold: u32,
    /// Wall time at utilization 1 for one batch item (or the fixed wall
    /// time for constant curves), microseconds.
    pub base_wall_time_us: u64,
    pub deterministic_seed: u64,
    pub cpu_mem_base_bytes: u64,
    pub cpu_mem_per_batch_bytes: u64,
    pub gpu_mem_base_bytes: u64,
    pub gpu_mem_per_batch_bytes: u64,
    pub resident_bytes: u64,
}

const MIB: u64 = 1 << 20;

/// Concave utilization peaking at bs=64, OOM at 512.
pub const SYNTH_CONV: SyntheticWorkloadModel = SyntheticWorkloadModel {
    name: "synth-conv",
    domain: "computer-vision",
    default_train_batch_size: 32,
    util_curve: UtilCurve::ConcaveLog2 { peak_log2: 6.0, width: 64.0 },
    oom_threshold: 512,
    base_wall_time_us: 200,
    deterministic_seed: 0xc0ffee01,
    cpu_mem_base_bytes: 64 * MIB,
    cpu_mem_per_batch_bytes: MIB,
    gpu_mem_base_bytes: 256 * MIB,
    gpu_mem_per_batch_bytes: 4 * MIB,
    resident_bytes: 48 * MIB,
};

/// Monotone-increasing utilization, OOM at 32.
pub const SYNTH_MATMUL: SyntheticWorkloadModel = SyntheticWorkloadModel {
    name: "synth-matmul",
    domain: "nlp",
    default_train_batch_size: 4,
    util_curve: UtilCurve::Saturating { half: 8.0 },
    oom_threshold: 32,
    base_wall_time_us: 300,
    deterministic_seed: 0xc0ffee02,
    cpu_mem_base_bytes: 96 * MIB,
    cpu_mem_per_batch_bytes: 2 * MIB,
    gpu_mem_base_bytes: 512 * MIB,
    gpu_mem_per_batch_bytes: 16 * MIB,
    resident_bytes: 72 * MIB,
};

/// Constant 7000 µs wall time regardless of batch size.
pub const SYNTH_CONST: SyntheticWorkloadModel = SyntheticWorkloadModel {
    name: "synth-const",
    domain: "other",
    default_train_batch_size: 8,
    util_curve: UtilCurve::Constant { level: 0.5 },
    oom_threshold: 1 << 20,
    base_wall_time_us: 7000,
    deterministic_seed: 0xc0ffee03,
    cpu_mem_base_bytes: 32 * MIB,
    cpu_mem_per_batch_bytes: MIB / 4,
    gpu_mem_base_bytes: 128 * MIB,
    gpu_mem_per_batch_bytes: MIB,
    resident_bytes: 24 * MIB,
};

pub const BUILTIN_MODELS: [&SyntheticWorkloadModel; 3] = [&SYNTH_CONV, &SYNTH_MATMUL, &SYNTH_CONST];

pub fn builtin_model(name: &str) -> Option<&'static SyntheticWorkloadModel> {
    BUILTIN_MODELS.iter().copied().find(|m| m.name == name)
}

/// What one synthetic invocation produced.
#[derive(Debug, Clone, PartialEq)]
pub enum SyntheticOutcome {
    Ok {
        metrics: RunMetrics,
        /// Present for GPU runs that requested a trace.
        trace: Option<Vec<TraceEvent>>,
    },
    Oom,
}

impl SyntheticWorkloadModel {
    pub fn utilization(&self, batch_size: u32) -> f64 {
        self.util_curve.utilization(batch_size)
    }

    /// Simulated computation-region wall time. Time per batch scales as
    /// `batch_size / utilization`, so on CPU (where utilization is proxied
    /// by throughput) and on GPU (trace active fraction) the same batch
    /// size wins.
    pub fn wall_time_us(&self, batch_size: u32, iterations: u32) -> u64 {
        let per_iteration = match self.util_curve {
            UtilCurve::Constant { .. } => self.base_wall_time_us,
            _ => {
                let u = self.utilization(batch_size);
                libm::round(self.base_wall_time_us as f64 * batch_size as f64 / u) as u64
            }
        };
        per_iteration.max(1) * iterations as u64
    }

    /// Pure simulation of one invocation. Identical requests produce
    /// identical outcomes.
    pub fn execute(&self, req: &RunRequest) -> SyntheticOutcome {
        if req.batch_size >= self.oom_threshold {
            return SyntheticOutcome::Oom;
        }
        let wall = self.wall_time_us(req.batch_size, req.iterations);
        let bs = req.batch_size as u64;
        let metrics = RunMetrics {
            wall_time_us: wall,
            peak_cpu_mem_bytes: self.cpu_mem_base_bytes + bs * self.cpu_mem_per_batch_bytes,
            peak_gpu_mem_bytes: match req.device {
                Device::Gpu => self.gpu_mem_base_bytes + bs * self.gpu_mem_per_batch_bytes,
                Device::Cpu => 0,
            },
            post_run_resident_bytes: self.resident_bytes,
        };
        let trace = if req.device == Device::Gpu && req.trace_requested {
            Some(self.generate_trace(req, wall))
        } else {
            None
        };
        SyntheticOutcome::Ok { metrics, trace }
    }

    /// Device timeline whose active fraction equals the model's utilization
    /// at this batch size (up to 1 µs of rounding).
    fn generate_trace(&self, req: &RunRequest, wall_us: u64) -> Vec<TraceEvent> {
        let util = self.utilization(req.batch_size);
        let active_us = (libm::round(util * wall_us as f64) as u64).min(wall_us);
        let movement_us = (wall_us - active_us) / 4;
        let idle_us = wall_us - active_us - movement_us;
        let wall = wall_us as f64;
        // Integer-derived fractions are exactly representable, so the
        // generator's feasibility check always passes.
        let target = Decomposition::new(
            active_us as f64 / wall,
            movement_us as f64 / wall,
            idle_us as f64 / wall,
            wall_us,
        )
        .expect("integer-derived fractions are valid");
        let n_events = (wall_us / 500).clamp(4, 48) as u32;
        let seed = self
            .deterministic_seed
            .wrapping_mul(0x100000001b3)
            .wrapping_add(req.batch_size as u64)
            .wrapping_add((req.iterations as u64) << 40);
        synthesize_events(&target, n_events, seed).expect("feasible by construction")
    }
}

/// Generates a trace whose decomposition over the target's denominator
/// equals the target fractions within 1e-6 absolute per fraction (exactly,
/// on the integer portions). Deterministic for a fixed seed.
///
/// The target must be representable in integer microseconds at the given
/// wall time; a target that would round by more than 1e-6 per fraction is
/// rejected rather than silently approximated.
pub fn synthesize_events(
    target: &Decomposition,
    n_events: u32,
    seed: u64,
) -> Result<Vec<TraceEvent>, SynthesisError> {
    // Re-validate: the fields are public, so the target may not have come
    // through the checked constructor.
    let target = Decomposition::new(
        target.active_fraction,
        target.movement_fraction,
        target.idle_fraction,
        target.denominator_wall_time_us,
    )
    .map_err(SynthesisError::Target)?;
    if n_events == 0 {
        return Err(SynthesisError::ZeroEvents);
    }

    let wall_us = target.denominator_wall_time_us;
    let wall = wall_us as f64;
    let active_us = (libm::round(target.active_fraction * wall) as u64).min(wall_us);
    let movement_us =
        (libm::round(target.movement_fraction * wall) as u64).min(wall_us - active_us);
    let idle_us = wall_us - active_us - movement_us;

    let max_error = [
        active_us as f64 / wall - target.active_fraction,
        movement_us as f64 / wall - target.movement_fraction,
        idle_us as f64 / wall - target.idle_fraction,
    ]
    .into_iter()
    .fold(0.0_f64, |acc, e| acc.max(libm::fabs(e)));
    if max_error > 1e-6 {
        return Err(SynthesisError::Unrepresentable { wall_us, max_error });
    }

    if active_us > 0 && movement_us > 0 && n_events < 2 {
        return Err(SynthesisError::InfeasibleEventCount { n_events });
    }

    let n = n_events as usize;
    let (n_active, n_movement) = if active_us > 0 && movement_us > 0 {
        let share = n as f64 * movement_us as f64 / (active_us + movement_us) as f64;
        let n_movement = (libm::round(share) as usize).clamp(1, n - 1);
        (n - n_movement, n_movement)
    } else if movement_us > 0 {
        (0, n)
    } else {
        // Includes the all-idle case: zero-duration kernel events.
        (n, 0)
    };

    let mut rng = SplitMix64::new(seed);
    let mut active_parts = compose(active_us, n_active, &mut rng);
    let mut movement_parts = compose(movement_us, n_movement, &mut rng);
    let gaps = compose(idle_us, n + 1, &mut rng);

    #[derive(Clone, Copy)]
    enum Slot {
        Active,
        Movement,
    }
    let mut slots = vec![Slot::Active; n_active];
    slots.extend(vec![Slot::Movement; n_movement]);
    rng.shuffle(&mut slots);

    let mut events = Vec::with_capacity(n);
    let mut cursor = gaps[0];
    for (i, slot) in slots.iter().enumerate() {
        let (category, name, stream_id) = match slot {
            Slot::Active => {
                if rng.next_below(5) == 0 {
                    (EventCategory::MemcpyD2d, "Memcpy DtoD (synthetic)", 7)
                } else {
                    (EventCategory::Kernel, "synthetic_compute_kernel", 7)
                }
            }
            Slot::Movement => {
                if rng.next_below(2) == 0 {
                    (EventCategory::MemcpyH2d, "Memcpy HtoD (synthetic)", 14)
                } else {
                    (EventCategory::MemcpyD2h, "Memcpy DtoH (synthetic)", 14)
                }
            }
        };
        let duration = match slot {
            Slot::Active => active_parts.pop().unwrap(),
            Slot::Movement => movement_parts.pop().unwrap(),
        };
        events.push(TraceEvent {
            stream_id,
            category,
            name: String::from(name),
            start_us: cursor,
            duration_us: duration,
        });
        cursor += duration + gaps[i + 1];
    }
    debug_assert_eq!(cursor, wall_us);
    Ok(events)
}

/// Splits `total` into `parts` non-negative integers summing to `total`
/// (stars and bars with random cut points).
fn compose(total: u64, parts: usize, rng: &mut SplitMix64) -> Vec<u64> {
    if parts == 0 {
        debug_assert_eq!(total, 0);
        return Vec::new();
    }
    let mut cuts: Vec<u64> = (0..parts - 1).map(|_| rng.next_below(total + 1)).collect();
    cuts.sort_unstable();
    let mut out = Vec::with_capacity(parts);
    let mut previous = 0;
    for c in cuts {
        out.push(c - previous);
        previous = c;
    }
    out.push(total - previous);
    out
}

#[derive(Debug, Clone, PartialEq)]
pub enum SynthesisError {
    Target(TraceError),
    ZeroEvents,
    InfeasibleEventCount { n_events: u32 },
    Unrepresentable { wall_us: u64, max_error: f64 },
}

impl fmt::Display for SynthesisError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SynthesisError::Target(e) => write!(f, "invalid target: {e}"),
            SynthesisError::ZeroEvents => f.write_str("n_events must be >= 1"),
            SynthesisError::InfeasibleEventCount { n_events } => write!(
                f,
                "target needs both compute and memcpy events but n_events={n_events}"
            ),
            SynthesisError::Unrepresentable { wall_us, max_error } => write!(
                f,
                "target not representable in integer microseconds at wall={wall_us}us \
                 (best error {max_error:.2e} > 1e-6)"
            ),
        }
    }
}

impl core::error::Error for SynthesisError {}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trace::{decompose, decompose_portions};
    use crate::workload::Mode;

    fn gpu_request(batch_size: u32) -> RunRequest {
        RunRequest::new(Mode::Eval, Device::Gpu, batch_size).with_trace()
    }

    #[test]
    fn builtin_roster() {
        assert_eq!(BUILTIN_MODELS.len(), 3);
        let conv = builtin_model("synth-conv").unwrap();
        assert_eq!(conv.oom_threshold, 512);
        let constant = builtin_model("synth-const").unwrap();
        assert_eq!(constant.base_wall_time_us, 7000);
        assert!(builtin_model("synth-nope").is_none());
    }

    #[test]
    fn conv_curve_peaks_at_64() {
        let best = (0..=9)
            .map(|l| 1u32 << l)
            .max_by(|&a, &b| {
                SYNTH_CONV
                    .utilization(a)
                    .partial_cmp(&SYNTH_CONV.utilization(b))
                    .unwrap()
            })
            .unwrap();
        assert_eq!(best, 64);
        assert_eq!(SYNTH_CONV.utilization(64), 1.0);
    }

    #[test]
    fn matmul_curve_is_monotone() {
        let mut previous = 0.0;
        for l in 0..=15 {
            let u = SYNTH_MATMUL.utilization(1 << l);
            assert!(u > previous);
            previous = u;
        }
    }

    #[test]
    fn const_wall_time_ignores_batch_size() {
        for bs in [1, 8, 64, 4096] {
            assert_eq!(SYNTH_CONST.wall_time_us(bs, 1), 7000);
        }
        assert_eq!(SYNTH_CONST.wall_time_us(8, 3), 21_000);
    }

    #[test]
    fn execute_is_deterministic() {
        for model in BUILTIN_MODELS {
            let req = gpu_request(model.default_train_batch_size);
            assert_eq!(model.execute(&req), model.execute(&req));
        }
    }

    #[test]
    fn oom_at_and_above_threshold() {
        assert_eq!(SYNTH_CONV.execute(&gpu_request(512)), SyntheticOutcome::Oom);
        assert_eq!(SYNTH_CONV.execute(&gpu_request(1024)), SyntheticOutcome::Oom);
        assert!(matches!(
            SYNTH_CONV.execute(&gpu_request(511)),
            SyntheticOutcome::Ok { .. }
        ));
        // OOM monotonicity over the doubling schedule.
        for model in BUILTIN_MODELS {
            let mut seen_oom = false;
            let mut bs = 1u32;
            while bs <= 1 << 20 {
                let oom = matches!(model.execute(&gpu_request(bs)), SyntheticOutcome::Oom);
                assert!(!seen_oom || oom, "oom must be monotone in batch size");
                seen_oom = oom;
                bs <<= 1;
            }
        }
    }

    #[test]
    fn cpu_runs_report_zero_gpu_memory() {
        let req = RunRequest::new(Mode::Eval, Device::Cpu, 8);
        match SYNTH_MATMUL.execute(&req) {
            SyntheticOutcome::Ok { metrics, trace } => {
                assert_eq!(metrics.peak_gpu_mem_bytes, 0);
                assert!(trace.is_none());
            }
            SyntheticOutcome::Oom => panic!("bs=8 must not OOM"),
        }
    }

    #[test]
    fn trace_active_fraction_tracks_utilization() {
        for model in [&SYNTH_CONV, &SYNTH_MATMUL] {
            for bs in [1u32, 4, 16] {
                let req = gpu_request(bs);
                let wall = model.wall_time_us(bs, 1);
                let trace = match model.execute(&req) {
                    SyntheticOutcome::Ok { trace, .. } => trace.unwrap(),
                    SyntheticOutcome::Oom => panic!("bs={bs} must not OOM"),
                };
                let d = decompose(&trace, wall).unwrap();
                assert!(
                    libm::fabs(d.active_fraction - model.utilization(bs)) <= 1.0 / wall as f64,
                    "active fraction off for {} bs={bs}",
                    model.name
                );
            }
        }
    }

    #[test]
    fn synthesize_degenerate_full_active() {
        let target = Decomposition::new(1.0, 0.0, 0.0, 100_000).unwrap();
        let events = synthesize_events(&target, 1, 9).unwrap();
        assert_eq!(events.len(), 1);
        assert_eq!(events[0].start_us, 0);
        assert_eq!(events[0].duration_us, 100_000);
        assert!(events[0].category.is_active());
    }

    #[test]
    fn synthesize_round_trip_matches_decompose() {
        let mut rng = SplitMix64::new(1);
        for round in 0..100 {
            let wall = 10_000 + rng.next_below(990_000);
            let active = rng.next_below(wall + 1);
            let movement = rng.next_below(wall - active + 1);
            let idle = wall - active - movement;
            let w = wall as f64;
            let target = Decomposition::new(
                active as f64 / w,
                movement as f64 / w,
                idle as f64 / w,
                wall,
            )
            .unwrap();
            let n_events = 1 + rng.next_below(64) as u32;
            let events = match synthesize_events(&target, n_events, round) {
                Ok(events) => events,
                Err(SynthesisError::InfeasibleEventCount { .. }) if n_events < 2 => continue,
                Err(e) => panic!("unexpected synthesis failure: {e}"),
            };
            assert_eq!(events.len(), n_events as usize);
            let p = decompose_portions(&events, wall).unwrap();
            assert_eq!((p.active_us, p.movement_us, p.idle_us), (active, movement, idle));
            // Determinism for a fixed seed.
            assert_eq!(events, synthesize_events(&target, n_events, round).unwrap());
        }
    }

    #[test]
    fn synthesize_validation_errors() {
        let bad = Decomposition {
            active_fraction: 0.6,
            movement_fraction: 0.6,
            idle_fraction: -0.2,
            denominator_wall_time_us: 100_000,
        };
        assert!(matches!(
            synthesize_events(&bad, 4, 0),
            Err(SynthesisError::Target(_))
        ));

        let ok = Decomposition::new(0.5, 0.2, 0.3, 100_000).unwrap();
        assert_eq!(synthesize_events(&ok, 0, 0), Err(SynthesisError::ZeroEvents));
        assert_eq!(
            synthesize_events(&ok, 1, 0),
            Err(SynthesisError::InfeasibleEventCount { n_events: 1 })
        );

        // 1/3 of 100us rounds by 1/3 us: not representable within 1e-6.
        let third = 1.0 / 3.0;
        let coarse = Decomposition::new(third, third, 1.0 - 2.0 * third, 100).unwrap();
        assert!(matches!(
            synthesize_events(&coarse, 4, 0),
            Err(SynthesisError::Unrepresentable { .. })
        ));
    }
}
