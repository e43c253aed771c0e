//! Chrome-trace-event-format ingestion and emission.
//!
//! Input is a JSON array of complete events (`"ph": "X"`) — or the
//! `{"traceEvents": [...]}` wrapper — with `ts` and `dur` in integer
//! microseconds and `tid` as the stream. Categories map as: `cat`
//! containing "kernel" is a kernel; `cat` containing "gpu_memcpy" with a
//! name containing "HtoD"/"DtoH"/"DtoD" is the respective copy class;
//! anything else is `other`. Non-"X" records (metadata and the like) are
//! skipped. Timestamps must be exact non-negative integers; everything is
//! integer-microsecond arithmetic downstream.

use std::path::Path;

use serde_json::{json, Value};

use benchwatch_core::synth::synthesize_events;
use benchwatch_core::trace::{Decomposition, EventCategory, TraceEvent};

use crate::error::HarnessError;

pub fn parse_trace(path: &Path) -> Result<Vec<TraceEvent>, HarnessError> {
    let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    parse_trace_str(&text)
        .map_err(|e| HarnessError::Parse(format!("{}: {e}", path.display())))
}

/// Parser core; errors name the offending record index.
pub fn parse_trace_str(text: &str) -> Result<Vec<TraceEvent>, String> {
    let root: Value = serde_json::from_str(text).map_err(|e| format!("invalid JSON: {e}"))?;
    let records = match &root {
        Value::Array(records) => records.as_slice(),
        Value::Object(map) => map
            .get("traceEvents")
            .and_then(Value::as_array)
            .map(Vec::as_slice)
            .ok_or("expected a JSON array or a {\"traceEvents\": [...]} wrapper")?,
        _ => return Err("expected a JSON array or a {\"traceEvents\": [...]} wrapper".to_string()),
    };

    let mut events = Vec::with_capacity(records.len());
    for (index, record) in records.iter().enumerate() {
        let object = record
            .as_object()
            .ok_or_else(|| format!("record {index}: not an object"))?;
        let ph = object
            .get("ph")
            .and_then(Value::as_str)
            .ok_or_else(|| format!("record {index}: missing ph"))?;
        if ph != "X" {
            continue; // metadata, counters, spans: not timeline intervals
        }
        let start_us = integer_field(object.get("ts"), "ts", index)?;
        let duration_us = integer_field(object.get("dur"), "dur", index)?;
        let stream_id = match object.get("tid") {
            None => 0,
            some => integer_field(some, "tid", index)?,
        };
        let cat = object.get("cat").and_then(Value::as_str).unwrap_or("");
        let name = object.get("name").and_then(Value::as_str).unwrap_or("");
        events.push(TraceEvent {
            stream_id,
            category: map_category(cat, name),
            name: name.to_string(),
            start_us,
            duration_us,
        });
    }
    Ok(events)
}

/// Accepts exact non-negative integer microseconds (also as `1.0`-style
/// floats); anything else is a parse error naming the record.
fn integer_field(value: Option<&Value>, key: &str, index: usize) -> Result<u64, String> {
    let value = value.ok_or_else(|| format!("record {index}: missing {key}"))?;
    if let Some(v) = value.as_u64() {
        return Ok(v);
    }
    if let Some(v) = value.as_f64() {
        if v >= 0.0 && v.fract() == 0.0 && v <= u64::MAX as f64 {
            return Ok(v as u64);
        }
        return Err(format!(
            "record {index}: {key} = {v} is not a non-negative integer microsecond count"
        ));
    }
    Err(format!("record {index}: non-numeric {key} = {value}"))
}

fn map_category(cat: &str, name: &str) -> EventCategory {
    if cat.contains("kernel") {
        EventCategory::Kernel
    } else if cat.contains("gpu_memcpy") {
        if name.contains("HtoD") {
            EventCategory::MemcpyH2d
        } else if name.contains("DtoH") {
            EventCategory::MemcpyD2h
        } else if name.contains("DtoD") {
            EventCategory::MemcpyD2d
        } else {
            EventCategory::Other
        }
    } else {
        EventCategory::Other
    }
}

fn category_parts(event: &TraceEvent) -> (&'static str, String) {
    match event.category {
        EventCategory::Kernel => ("kernel", event.name.clone()),
        EventCategory::MemcpyH2d => ("gpu_memcpy", ensure_tag(&event.name, "HtoD")),
        EventCategory::MemcpyD2h => ("gpu_memcpy", ensure_tag(&event.name, "DtoH")),
        EventCategory::MemcpyD2d => ("gpu_memcpy", ensure_tag(&event.name, "DtoD")),
        EventCategory::Other => ("other", event.name.clone()),
    }
}

fn ensure_tag(name: &str, tag: &str) -> String {
    if name.contains(tag) {
        name.to_string()
    } else {
        format!("{name} {tag}")
    }
}

/// Chrome-trace JSON for a list of events; parsing it back yields the same
/// events (modulo copy-direction tags appended to names).
pub fn trace_to_json(events: &[TraceEvent]) -> Value {
    let records: Vec<Value> = events
        .iter()
        .map(|event| {
            let (cat, name) = category_parts(event);
            json!({
                "ph": "X",
                "ts": event.start_us,
                "dur": event.duration_us,
                "pid": 1,
                "tid": event.stream_id,
                "cat": cat,
                "name": name,
            })
        })
        .collect();
    Value::Array(records)
}

pub fn write_trace(path: &Path, events: &[TraceEvent]) -> Result<(), HarnessError> {
    let text = serde_json::to_string(&trace_to_json(events)).expect("json serializes");
    std::fs::write(path, text).map_err(|e| HarnessError::io(path, e))
}

/// Writes a synthetic trace whose decomposition equals `target` (within
/// 1e-6 per fraction) over the target's denominator wall time.
pub fn emit_synthetic_trace(
    target: &Decomposition,
    n_events: u32,
    seed: u64,
    path: &Path,
) -> Result<(), HarnessError> {
    let events = synthesize_events(target, n_events, seed)?;
    write_trace(path, &events)
}
