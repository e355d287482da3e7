//! Line-delimited JSON trace files.
//!
//! One record per line:
//!
//! ```text
//! {"anchor":"method:twoSum","phase":"post","bindings":{"nums":[2,7],"target":9},"result":[0,1],"old":{"nums":[2,7],"target":9}}
//! ```
//!
//! `anchor` is `method:NAME` or `loop:NAME:ORDINAL`; `phase` is `pre`,
//! `post` or `iter`; `result` and `old` are optional. Values are JSON
//! integers, booleans, arrays of integers, strings or `null`. Blank lines
//! and lines starting with `#` are skipped.

use std::path::Path;

use num_bigint::BigInt;
use num_traits::ToPrimitive;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Number, Value as Json};
use thiserror::Error;

use super::clause::ProgramAnchor;
use super::eval::{Bindings, Phase, TraceRecord, Value};

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("trace line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("reading trace file: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRecord {
    anchor: ProgramAnchor,
    phase: Phase,
    bindings: Map<String, Json>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    result: Option<Json>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    old: Option<Map<String, Json>>,
}

fn value_from_json(v: &Json) -> Result<Value, String> {
    match v {
        Json::Null => Ok(Value::Null),
        Json::Bool(b) => Ok(Value::Bool(*b)),
        Json::Number(n) => int_from_number(n).map(Value::Int),
        Json::String(s) => Ok(Value::Str(s.clone())),
        Json::Array(items) => items
            .iter()
            .map(|item| match item {
                Json::Number(n) => int_from_number(n),
                other => Err(format!("array elements must be integers, found {other}")),
            })
            .collect::<Result<Vec<_>, _>>()
            .map(Value::IntArray),
        Json::Object(_) => Err("objects are not supported as values".into()),
    }
}

fn int_from_number(n: &Number) -> Result<BigInt, String> {
    if let Some(i) = n.as_i64() {
        Ok(i.into())
    } else if let Some(u) = n.as_u64() {
        Ok(u.into())
    } else {
        Err(format!("`{n}` is not an integer"))
    }
}

fn int_to_json(v: &BigInt) -> Json {
    match v.to_i64() {
        Some(i) => Json::from(i),
        None => match v.to_u64() {
            Some(u) => Json::from(u),
            // Outside the JSON integer range readers accept; keep it lossless as text.
            None => Json::String(v.to_string()),
        },
    }
}

fn value_to_json(v: &Value) -> Json {
    match v {
        Value::Int(i) => int_to_json(i),
        Value::Bool(b) => Json::Bool(*b),
        Value::IntArray(items) => Json::Array(items.iter().map(int_to_json).collect()),
        Value::Str(s) => Json::String(s.clone()),
        Value::Null => Json::Null,
    }
}

fn bindings_from_json(m: &Map<String, Json>) -> Result<Bindings, String> {
    m.iter()
        .map(|(k, v)| value_from_json(v).map(|v| (k.clone(), v)).map_err(|e| format!("`{k}`: {e}")))
        .collect()
}

fn bindings_to_json(b: &Bindings) -> Map<String, Json> {
    b.iter().map(|(k, v)| (k.clone(), value_to_json(v))).collect()
}

pub fn parse_trace_line(line: &str) -> Result<TraceRecord, String> {
    let raw: RawRecord = serde_json::from_str(line).map_err(|e| e.to_string())?;
    Ok(TraceRecord {
        anchor: raw.anchor,
        phase: raw.phase,
        bindings: bindings_from_json(&raw.bindings)?,
        result: raw.result.as_ref().map(value_from_json).transpose()?,
        old: raw.old.as_ref().map(bindings_from_json).transpose()?,
    })
}

pub fn parse_traces(text: &str) -> Result<Vec<TraceRecord>, TraceError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| {
            let t = l.trim();
            !t.is_empty() && !t.starts_with('#')
        })
        .map(|(i, l)| {
            parse_trace_line(l).map_err(|message| TraceError::Malformed {
                line: i + 1,
                message,
            })
        })
        .collect()
}

pub fn read_trace_file(path: &Path) -> Result<Vec<TraceRecord>, TraceError> {
    parse_traces(&std::fs::read_to_string(path)?)
}

pub fn render_trace_line(record: &TraceRecord) -> String {
    let raw = RawRecord {
        anchor: record.anchor.clone(),
        phase: record.phase,
        bindings: bindings_to_json(&record.bindings),
        result: record.result.as_ref().map(value_to_json),
        old: record.old.as_ref().map(bindings_to_json),
    };
    serde_json::to_string(&raw).expect("trace records always serialize")
}

pub fn render_traces(records: &[TraceRecord]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&render_trace_line(r));
        out.push('\n');
    }
    out
}
