//! Device timeline decomposition.
//!
//! A trace is a list of timed events on numbered streams. Execution time
//! splits into three disjoint portions: time the device is active for
//! computation, time spent moving data between host and device, and idle
//! time. Overlapping kernels on different streams must not double-count,
//! so everything is built on interval union over integer microseconds; no
//! floating point enters until the final normalization.

use alloc::string::String;
use alloc::vec::Vec;

use core::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventCategory {
    Kernel,
    MemcpyH2d,
    MemcpyD2h,
    MemcpyD2d,
    Other,
}

impl EventCategory {
    /// Device-local copies keep the device busy, so they count as compute.
    pub fn is_active(self) -> bool {
        matches!(self, EventCategory::Kernel | EventCategory::MemcpyD2d)
    }

    /// Host-device transfers in either direction.
    pub fn is_movement(self) -> bool {
        matches!(self, EventCategory::MemcpyH2d | EventCategory::MemcpyD2h)
    }
}

/// One timeline interval. Zero-duration events are legal and contribute
/// nothing to any portion.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub stream_id: u64,
    pub category: EventCategory,
    pub name: String,
    pub start_us: u64,
    pub duration_us: u64,
}

impl TraceEvent {
    pub fn end_us(&self) -> u64 {
        self.start_us + self.duration_us
    }
}

/// Disjoint, sorted, half-open `[start, end)` intervals in microseconds.
/// Canonical form: touching intervals are merged.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct IntervalSet {
    spans: Vec<(u64, u64)>,
}

impl IntervalSet {
    pub fn empty() -> Self {
        Self { spans: Vec::new() }
    }

    /// Union of arbitrary `[start, end)` spans. Empty spans are dropped.
    pub fn from_spans(spans: impl IntoIterator<Item = (u64, u64)>) -> Self {
        let mut spans: Vec<(u64, u64)> = spans.into_iter().filter(|(s, e)| e > s).collect();
        spans.sort_unstable();
        let mut merged: Vec<(u64, u64)> = Vec::with_capacity(spans.len());
        for (start, end) in spans {
            match merged.last_mut() {
                Some((_, last_end)) if start <= *last_end => {
                    if end > *last_end {
                        *last_end = end;
                    }
                }
                _ => merged.push((start, end)),
            }
        }
        Self { spans: merged }
    }

    pub fn spans(&self) -> &[(u64, u64)] {
        &self.spans
    }

    pub fn is_empty(&self) -> bool {
        self.spans.is_empty()
    }

    pub fn total_length(&self) -> u64 {
        self.spans.iter().map(|(s, e)| e - s).sum()
    }

    /// Set difference `self \ other`.
    pub fn subtract(&self, other: &IntervalSet) -> IntervalSet {
        let mut out: Vec<(u64, u64)> = Vec::new();
        let mut cuts = other.spans.iter().copied().peekable();
        for &(start, end) in &self.spans {
            let mut cursor = start;
            while cursor < end {
                // Skip cuts that end at or before the cursor.
                while matches!(cuts.peek(), Some(&(_, ce)) if ce <= cursor) {
                    cuts.next();
                }
                match cuts.peek() {
                    Some(&(cs, ce)) if cs < end => {
                        if cs > cursor {
                            out.push((cursor, cs));
                        }
                        cursor = ce.min(end).max(cursor);
                        if ce >= end {
                            break;
                        }
                        // This cut is exhausted inside the span.
                        cuts.next();
                    }
                    _ => {
                        out.push((cursor, end));
                        break;
                    }
                }
            }
        }
        IntervalSet { spans: out }
    }
}

/// Set-union of the intervals of the given events, merged across streams.
/// Callers filter to the category set they care about.
pub fn union_intervals<'a>(events: impl IntoIterator<Item = &'a TraceEvent>) -> IntervalSet {
    IntervalSet::from_spans(events.into_iter().map(|e| (e.start_us, e.end_us())))
}

/// Portions of the computation region, each in `[0, 1]`, summing to 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Decomposition {
    pub active_fraction: f64,
    pub movement_fraction: f64,
    pub idle_fraction: f64,
    pub denominator_wall_time_us: u64,
}

impl Decomposition {
    pub fn new(
        active_fraction: f64,
        movement_fraction: f64,
        idle_fraction: f64,
        denominator_wall_time_us: u64,
    ) -> Result<Self, TraceError> {
        for fraction in [active_fraction, movement_fraction, idle_fraction] {
            if !(0.0..=1.0).contains(&fraction) {
                return Err(TraceError::FractionOutOfRange { fraction });
            }
        }
        let sum = active_fraction + movement_fraction + idle_fraction;
        if libm::fabs(sum - 1.0) > 1e-9 {
            return Err(TraceError::FractionSum { sum });
        }
        if denominator_wall_time_us == 0 {
            return Err(TraceError::ZeroWallTime);
        }
        Ok(Self {
            active_fraction,
            movement_fraction,
            idle_fraction,
            denominator_wall_time_us,
        })
    }
}

/// Integer-microsecond portions before normalization.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PortionsUs {
    pub active_us: u64,
    pub movement_us: u64,
    pub idle_us: u64,
}

/// Splits `wall_time_us` into active / data-movement / idle portions.
///
/// Active is the union of kernel and device-local-copy intervals across all
/// streams; movement is the union of host-device copies minus the active
/// union (compute has priority on overlap, which is what makes the three
/// portions disjoint); idle is the remainder. The denominator is the
/// measured wall time of the computation region, not the trace span, and
/// events extending past it are an error rather than silently clamped.
pub fn decompose(events: &[TraceEvent], wall_time_us: u64) -> Result<Decomposition, TraceError> {
    let portions = decompose_portions(events, wall_time_us)?;
    let wall = wall_time_us as f64;
    // Exact conservation holds in integer microseconds; build the fractions
    // from the integer portions so they sum to 1 up to rounding of the
    // final three divisions.
    Ok(Decomposition {
        active_fraction: portions.active_us as f64 / wall,
        movement_fraction: portions.movement_us as f64 / wall,
        idle_fraction: portions.idle_us as f64 / wall,
        denominator_wall_time_us: wall_time_us,
    })
}

/// Integer-arithmetic core of [`decompose`].
pub fn decompose_portions(
    events: &[TraceEvent],
    wall_time_us: u64,
) -> Result<PortionsUs, TraceError> {
    if wall_time_us == 0 {
        return Err(TraceError::ZeroWallTime);
    }
    if let Some((index, event)) = events
        .iter()
        .enumerate()
        .find(|(_, e)| e.end_us() > wall_time_us)
    {
        return Err(TraceError::EventPastWall {
            index,
            end_us: event.end_us(),
            wall_time_us,
        });
    }

    let active = union_intervals(events.iter().filter(|e| e.category.is_active()));
    let movement_raw = union_intervals(events.iter().filter(|e| e.category.is_movement()));
    let movement = movement_raw.subtract(&active);

    let active_us = active.total_length();
    let movement_us = movement.total_length();
    let idle_us = wall_time_us - active_us - movement_us;
    Ok(PortionsUs {
        active_us,
        movement_us,
        idle_us,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub enum TraceError {
    ZeroWallTime,
    EventPastWall {
        index: usize,
        end_us: u64,
        wall_time_us: u64,
    },
    FractionOutOfRange {
        fraction: f64,
    },
    FractionSum {
        sum: f64,
    },
}

impl fmt::Display for TraceError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TraceError::ZeroWallTime => f.write_str("wall time must be > 0"),
            TraceError::EventPastWall {
                index,
                end_us,
                wall_time_us,
            } => write!(
                f,
                "event {index} ends at {end_us}us, past the {wall_time_us}us computation region"
            ),
            TraceError::FractionOutOfRange { fraction } => {
                write!(f, "fraction {fraction} outside [0, 1]")
            }
            TraceError::FractionSum { sum } => {
                write!(f, "fractions sum to {sum}, expected 1 within 1e-9")
            }
        }
    }
}

impl core::error::Error for TraceError {}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::SplitMix64;
    use alloc::format;
    use alloc::vec;

    pub(crate) fn ev(category: EventCategory, stream_id: u64, start_us: u64, duration_us: u64) -> TraceEvent {
        TraceEvent {
            stream_id,
            category,
            name: format!("{category:?}"),
            start_us,
            duration_us,
        }
    }

    /// Per-microsecond sampling oracle: marks each microsecond of the wall
    /// with the highest-priority category covering it (compute > movement).
    /// Independent of the interval-union implementation.
    pub(crate) fn sampling_oracle(events: &[TraceEvent], wall_time_us: u64) -> PortionsUs {
        let mut cells = vec![0u8; wall_time_us as usize];
        for e in events {
            let mark = if e.category.is_active() {
                2
            } else if e.category.is_movement() {
                1
            } else {
                continue;
            };
            for cell in &mut cells[e.start_us as usize..e.end_us() as usize] {
                if mark > *cell {
                    *cell = mark;
                }
            }
        }
        let active_us = cells.iter().filter(|&&c| c == 2).count() as u64;
        let movement_us = cells.iter().filter(|&&c| c == 1).count() as u64;
        PortionsUs {
            active_us,
            movement_us,
            idle_us: wall_time_us - active_us - movement_us,
        }
    }

    pub(crate) fn random_trace(rng: &mut SplitMix64, wall_time_us: u64, max_events: usize) -> Vec<TraceEvent> {
        let n = 1 + rng.next_below(max_events as u64) as usize;
        let categories = [
            EventCategory::Kernel,
            EventCategory::MemcpyH2d,
            EventCategory::MemcpyD2h,
            EventCategory::MemcpyD2d,
            EventCategory::Other,
        ];
        (0..n)
            .map(|_| {
                let start = rng.next_below(wall_time_us);
                let max_len = wall_time_us - start;
                let duration = rng.next_below(max_len + 1);
                let category = categories[rng.next_below(5) as usize];
                ev(category, rng.next_below(4), start, duration)
            })
            .collect()
    }

    #[test]
    fn union_empty() {
        let set = union_intervals(core::iter::empty());
        assert!(set.is_empty());
        assert_eq!(set.total_length(), 0);
    }

    #[test]
    fn union_merges_overlap() {
        let events = [
            ev(EventCategory::Kernel, 0, 0, 30_000),
            ev(EventCategory::Kernel, 1, 20_000, 30_000),
        ];
        let set = union_intervals(events.iter());
        assert_eq!(set.spans(), &[(0, 50_000)]);
        assert_eq!(set.total_length(), 50_000);
    }

    #[test]
    fn union_is_idempotent_and_order_invariant() {
        let mut rng = SplitMix64::new(11);
        let events = random_trace(&mut rng, 10_000, 50);
        let once = union_intervals(events.iter());
        let twice = IntervalSet::from_spans(once.spans().iter().copied());
        assert_eq!(once, twice);

        let mut reversed = events.clone();
        reversed.reverse();
        assert_eq!(once, union_intervals(reversed.iter()));
    }

    #[test]
    fn union_length_monotone_under_added_events() {
        let mut rng = SplitMix64::new(13);
        let events = random_trace(&mut rng, 10_000, 60);
        let mut previous = 0;
        for k in 0..events.len() {
            let len = union_intervals(events[..=k].iter()).total_length();
            assert!(len >= previous);
            previous = len;
        }
    }

    #[test]
    fn union_matches_sampling_oracle_on_random_intervals() {
        let mut rng = SplitMix64::new(17);
        for _ in 0..20 {
            let wall = 1_000 + rng.next_below(9_000);
            let events: Vec<TraceEvent> = (0..1000)
                .map(|_| {
                    let start = rng.next_below(wall);
                    let duration = rng.next_below(wall - start + 1);
                    ev(EventCategory::Kernel, 0, start, duration)
                })
                .collect();
            let expect = sampling_oracle(&events, wall).active_us;
            assert_eq!(union_intervals(events.iter()).total_length(), expect);
        }
    }

    #[test]
    fn subtract_cases() {
        let a = IntervalSet::from_spans([(0, 100), (200, 300)]);
        let b = IntervalSet::from_spans([(50, 250)]);
        assert_eq!(a.subtract(&b).spans(), &[(0, 50), (250, 300)]);

        assert_eq!(a.subtract(&IntervalSet::empty()), a);
        assert!(a.subtract(&a).is_empty());

        let inner = IntervalSet::from_spans([(10, 20), (30, 40)]);
        let outer = IntervalSet::from_spans([(0, 100)]);
        assert_eq!(outer.subtract(&inner).spans(), &[(0, 10), (20, 30), (40, 100)]);
    }

    #[test]
    fn decompose_all_idle() {
        let d = decompose(&[], 100_000).unwrap();
        assert_eq!(
            (d.active_fraction, d.movement_fraction, d.idle_fraction),
            (0.0, 0.0, 1.0)
        );
    }

    #[test]
    fn decompose_all_active() {
        let events = [ev(EventCategory::Kernel, 0, 0, 100_000)];
        let d = decompose(&events, 100_000).unwrap();
        assert_eq!(
            (d.active_fraction, d.movement_fraction, d.idle_fraction),
            (1.0, 0.0, 0.0)
        );
    }

    #[test]
    fn decompose_worked_example_with_compute_priority() {
        // Kernels [0,30000) and [20000,50000) union to [0,50000); the h2d
        // copy [40000,70000) loses its overlapped head to compute, leaving
        // [50000,70000). Exact fractions: 0.50 / 0.20 / 0.30.
        let events = [
            ev(EventCategory::Kernel, 0, 0, 30_000),
            ev(EventCategory::Kernel, 0, 20_000, 30_000),
            ev(EventCategory::MemcpyH2d, 1, 40_000, 30_000),
        ];
        let d = decompose(&events, 100_000).unwrap();
        assert_eq!(
            (d.active_fraction, d.movement_fraction, d.idle_fraction),
            (0.50, 0.20, 0.30)
        );
    }

    #[test]
    fn decompose_d2d_counts_as_active_and_other_as_idle() {
        let events = [
            ev(EventCategory::MemcpyD2d, 0, 0, 25_000),
            ev(EventCategory::Other, 0, 50_000, 25_000),
        ];
        let d = decompose(&events, 100_000).unwrap();
        assert_eq!(
            (d.active_fraction, d.movement_fraction, d.idle_fraction),
            (0.25, 0.0, 0.75)
        );
    }

    #[test]
    fn decompose_rejects_event_past_wall() {
        let events = [ev(EventCategory::Kernel, 0, 90_000, 20_000)];
        assert_eq!(
            decompose(&events, 100_000),
            Err(TraceError::EventPastWall {
                index: 0,
                end_us: 110_000,
                wall_time_us: 100_000
            })
        );
        assert_eq!(decompose(&[], 0), Err(TraceError::ZeroWallTime));
    }

    #[test]
    fn decompose_matches_sampling_oracle_on_random_traces() {
        let mut rng = SplitMix64::new(23);
        for _ in 0..50 {
            let wall = 1_000 + rng.next_below(19_000);
            let events = random_trace(&mut rng, wall, 200);
            let got = decompose_portions(&events, wall).unwrap();
            assert_eq!(got, sampling_oracle(&events, wall));
        }
    }

    #[test]
    fn decompose_invariant_under_stream_duplication() {
        let mut rng = SplitMix64::new(29);
        let wall = 50_000;
        let events = random_trace(&mut rng, wall, 100);
        let mut duplicated = events.clone();
        duplicated.extend(events.iter().filter(|e| e.category == EventCategory::Kernel).map(
            |e| TraceEvent {
                stream_id: e.stream_id + 100,
                ..e.clone()
            },
        ));
        assert_eq!(
            decompose_portions(&events, wall).unwrap(),
            decompose_portions(&duplicated, wall).unwrap()
        );
    }

    #[test]
    fn conservation_in_integer_arithmetic() {
        let mut rng = SplitMix64::new(31);
        for _ in 0..50 {
            let wall = 1 + rng.next_below(100_000);
            let events = random_trace(&mut rng, wall, 120);
            let p = decompose_portions(&events, wall).unwrap();
            assert_eq!(p.active_us + p.movement_us + p.idle_us, wall);
        }
    }

    #[test]
    fn fraction_validation() {
        assert!(Decomposition::new(0.6, 0.6, -0.2, 1000).is_err());
        assert!(Decomposition::new(0.5, 0.2, 0.31, 1000).is_err());
        assert!(Decomposition::new(0.5, 0.2, 0.3, 0).is_err());
        assert!(Decomposition::new(0.5, 0.2, 0.3, 1000).is_ok());
    }
}
