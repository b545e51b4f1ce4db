//! SenML-style message dialects: strict parsing, canonical serialization,
//! and the learner-facing numeric/symbol view.
//!
//! Dialect A: a base record carrying `bn`/`bt`, then value records for
//! "lon", "lat" and one Kelvin reading. Dialect B: a single record with
//! `n`, `u` = "Cel", `v`, `t`. Unknown keys are rejected so that dialect
//! incompatibility is machine-detectable.

use crate::error::{LabError, Result};
use serde_json::Value;
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum Dialect {
    A,
    B,
}

impl fmt::Display for Dialect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Dialect::A => write!(f, "A"),
            Dialect::B => write!(f, "B"),
        }
    }
}

/// Affine conversion to the SI base unit: si = value * scale + offset.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitDef {
    pub symbol: &'static str,
    pub scale: f64,
    pub offset: f64,
}

/// Closed unit registry. "lon"/"lat" are the pseudo-units dialect A uses
/// for coordinate records; both convert to SI as identity (degrees).
pub const UNIT_REGISTRY: [UnitDef; 4] = [
    UnitDef { symbol: "K", scale: 1.0, offset: 0.0 },
    UnitDef { symbol: "Cel", scale: 1.0, offset: 273.15 },
    UnitDef { symbol: "lon", scale: 1.0, offset: 0.0 },
    UnitDef { symbol: "lat", scale: 1.0, offset: 0.0 },
];

pub fn unit_def(symbol: &str) -> Result<&'static UnitDef> {
    UNIT_REGISTRY
        .iter()
        .find(|u| u.symbol == symbol)
        .ok_or_else(|| LabError::UnknownUnit(symbol.into()))
}

pub fn celsius_to_kelvin(v: f64) -> f64 {
    v + 273.15
}

pub fn kelvin_to_celsius(v: f64) -> f64 {
    v - 273.15
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Record {
    pub base_name: Option<String>,
    pub base_time: Option<f64>,
    pub name: Option<String>,
    pub unit: Option<String>,
    pub value: Option<f64>,
    pub time: Option<f64>,
}

impl Record {
    pub fn base(bn: impl Into<String>, bt: f64) -> Record {
        Record { base_name: Some(bn.into()), base_time: Some(bt), ..Record::default() }
    }

    pub fn value(u: impl Into<String>, v: f64) -> Record {
        Record { unit: Some(u.into()), value: Some(v), ..Record::default() }
    }

    pub fn named(n: impl Into<String>, u: impl Into<String>, v: f64, t: f64) -> Record {
        Record {
            name: Some(n.into()),
            unit: Some(u.into()),
            value: Some(v),
            time: Some(t),
            ..Record::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Message {
    pub dialect: Dialect,
    pub records: Vec<Record>,
}

/// Aligned (m^A, m^B) ground-truth translation pair.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruthPair {
    pub m_a: Message,
    pub m_b: Message,
    pub alignment_id: String,
}

/// Per-dialect featurization schema: fixes the numeric layout and the
/// episode epoch that time offsets are measured from.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct DialectSchema {
    pub dialect: Dialect,
    pub epoch: f64,
}

impl DialectSchema {
    pub fn numeric_len(&self) -> usize {
        match self.dialect {
            Dialect::A => 4, // lon, lat, value, time offset
            Dialect::B => 2, // value, time offset
        }
    }

    pub fn symbol_count(&self) -> usize {
        match self.dialect {
            Dialect::A => 4, // bn, "lon", "lat", "K"
            Dialect::B => 2, // n, "Cel"
        }
    }
}

const KEY_ORDER: [&str; 6] = ["bn", "bt", "n", "u", "v", "t"];

/// Strict parse of a JSON array of records into a dialect message.
pub fn parse(text: &str, dialect: Dialect) -> Result<Message> {
    let value: Value =
        serde_json::from_str(text).map_err(|e| LabError::MalformedJson(e.to_string()))?;
    parse_value(&value, dialect)
}

/// Strict parse from an already-decoded JSON value.
pub fn parse_value(value: &Value, dialect: Dialect) -> Result<Message> {
    let array = value
        .as_array()
        .ok_or_else(|| LabError::MalformedJson("expected a JSON array of objects".into()))?;
    let mut records = Vec::with_capacity(array.len());
    for (index, item) in array.iter().enumerate() {
        let obj = item
            .as_object()
            .ok_or_else(|| LabError::MalformedJson(format!("record {index} is not an object")))?;
        let mut rec = Record::default();
        for (key, val) in obj {
            match key.as_str() {
                "bn" => rec.base_name = Some(expect_string(key, val, index)?),
                "bt" => rec.base_time = Some(expect_number(key, val, index)?),
                "n" => rec.name = Some(expect_string(key, val, index)?),
                "u" => rec.unit = Some(expect_string(key, val, index)?),
                "v" => rec.value = Some(expect_number(key, val, index)?),
                "t" => rec.time = Some(expect_number(key, val, index)?),
                other => {
                    return Err(LabError::UnknownKey { key: other.into(), index });
                }
            }
        }
        if let Some(u) = &rec.unit {
            unit_def(u)?;
        }
        if rec.value.is_none() && rec.base_name.is_none() {
            return Err(LabError::MissingField { field: "v or bn".into(), index });
        }
        records.push(rec);
    }
    let message = Message { dialect, records };
    validate_dialect(&message)?;
    Ok(message)
}

fn expect_string(key: &str, val: &Value, index: usize) -> Result<String> {
    val.as_str().map(str::to_string).ok_or_else(|| {
        LabError::MalformedJson(format!("record {index}: {key} must be a string"))
    })
}

fn expect_number(key: &str, val: &Value, index: usize) -> Result<f64> {
    val.as_f64()
        .filter(|v| v.is_finite())
        .ok_or_else(|| LabError::MalformedJson(format!("record {index}: {key} must be a number")))
}

fn validate_dialect(m: &Message) -> Result<()> {
    match m.dialect {
        Dialect::A => {
            if m.records.len() != 4 {
                return Err(LabError::SchemaMismatch(format!(
                    "dialect A expects 4 records, got {}",
                    m.records.len()
                )));
            }
            let base = &m.records[0];
            if base.base_name.is_none() || base.base_time.is_none() {
                return Err(LabError::MissingField { field: "bn/bt".into(), index: 0 });
            }
            if base.name.is_some() || base.unit.is_some() || base.value.is_some() || base.time.is_some() {
                return Err(LabError::SchemaMismatch("dialect A base record carries only bn/bt".into()));
            }
            for (i, (rec, unit)) in m.records[1..].iter().zip(["lon", "lat", "K"]).enumerate() {
                let index = i + 1;
                if rec.unit.as_deref() != Some(unit) {
                    return Err(LabError::SchemaMismatch(format!(
                        "dialect A record {index} must have unit {unit:?}, got {:?}",
                        rec.unit
                    )));
                }
                if rec.value.is_none() {
                    return Err(LabError::MissingField { field: "v".into(), index });
                }
                if rec.base_name.is_some() || rec.base_time.is_some() || rec.name.is_some() || rec.time.is_some() {
                    return Err(LabError::SchemaMismatch(format!(
                        "dialect A record {index} carries only u/v"
                    )));
                }
            }
        }
        Dialect::B => {
            if m.records.len() != 1 {
                return Err(LabError::SchemaMismatch(format!(
                    "dialect B expects 1 record, got {}",
                    m.records.len()
                )));
            }
            let rec = &m.records[0];
            if rec.name.is_none() {
                return Err(LabError::MissingField { field: "n".into(), index: 0 });
            }
            if rec.unit.as_deref() != Some("Cel") {
                return Err(LabError::SchemaMismatch(format!(
                    "dialect B unit must be \"Cel\", got {:?}",
                    rec.unit
                )));
            }
            if rec.value.is_none() {
                return Err(LabError::MissingField { field: "v".into(), index: 0 });
            }
            if rec.time.is_none() {
                return Err(LabError::MissingField { field: "t".into(), index: 0 });
            }
            if rec.base_name.is_some() || rec.base_time.is_some() {
                return Err(LabError::SchemaMismatch("dialect B record carries n/u/v/t only".into()));
            }
        }
    }
    Ok(())
}

/// Canonical serialization: keys in fixed order (bn,bt,n,u,v,t), no
/// whitespace, shortest round-trippable float representation.
pub fn serialize(m: &Message) -> String {
    let mut out = String::from("[");
    for (i, rec) in m.records.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        out.push('{');
        let mut first = true;
        let mut push = |key: &str, rendered: String, first: &mut bool| {
            if !*first {
                out.push(',');
            }
            out.push_str(&format!("\"{key}\":{rendered}"));
            *first = false;
        };
        for key in KEY_ORDER {
            match key {
                "bn" => {
                    if let Some(s) = &rec.base_name {
                        push(key, json_string(s), &mut first);
                    }
                }
                "bt" => {
                    if let Some(v) = rec.base_time {
                        push(key, format_number(v), &mut first);
                    }
                }
                "n" => {
                    if let Some(s) = &rec.name {
                        push(key, json_string(s), &mut first);
                    }
                }
                "u" => {
                    if let Some(s) = &rec.unit {
                        push(key, json_string(s), &mut first);
                    }
                }
                "v" => {
                    if let Some(v) = rec.value {
                        push(key, format_number(v), &mut first);
                    }
                }
                "t" => {
                    if let Some(v) = rec.time {
                        push(key, format_number(v), &mut first);
                    }
                }
                _ => unreachable!(),
            }
        }
        out.push('}');
    }
    out.push(']');
    out
}

fn json_string(s: &str) -> String {
    serde_json::to_string(s).expect("string serialization cannot fail")
}

/// Rust's float Display prints the shortest decimal that round-trips.
fn format_number(v: f64) -> String {
    format!("{v}")
}

/// Learner-facing featurization: numeric fields plus the symbols whose
/// graph features the learner concatenates after the numeric part.
/// Dialect A numeric layout: [lon, lat, value, time offset]; symbols
/// [bn, "lon", "lat", "K"]. Dialect B: [value, time offset]; [n, "Cel"].
pub fn numeric_view(m: &Message, schema: &DialectSchema) -> Result<(Vec<f64>, Vec<String>)> {
    if m.dialect != schema.dialect {
        return Err(LabError::SchemaMismatch(format!(
            "message dialect {} does not match schema dialect {}",
            m.dialect, schema.dialect
        )));
    }
    validate_dialect(m)?;
    match m.dialect {
        Dialect::A => {
            let base = &m.records[0];
            let numeric = vec![
                m.records[1].value.unwrap(),
                m.records[2].value.unwrap(),
                m.records[3].value.unwrap(),
                base.base_time.unwrap() - schema.epoch,
            ];
            let symbols = vec![
                base.base_name.clone().unwrap(),
                "lon".to_string(),
                "lat".to_string(),
                "K".to_string(),
            ];
            Ok((numeric, symbols))
        }
        Dialect::B => {
            let rec = &m.records[0];
            let numeric = vec![rec.value.unwrap(), rec.time.unwrap() - schema.epoch];
            let symbols = vec![rec.name.clone().unwrap(), "Cel".to_string()];
            Ok((numeric, symbols))
        }
    }
}

/// Message constructors used by the CPS encoders.
pub fn make_dialect_a(bn: &str, bt: f64, lon: f64, lat: f64, kelvin: f64) -> Message {
    Message {
        dialect: Dialect::A,
        records: vec![
            Record::base(bn, bt),
            Record::value("lon", lon),
            Record::value("lat", lat),
            Record::value("K", kelvin),
        ],
    }
}

pub fn make_dialect_b(name: &str, celsius: f64, t: f64) -> Message {
    Message {
        dialect: Dialect::B,
        records: vec![Record::named(name, "Cel", celsius, t)],
    }
}

// ---------------------------------------------------------------------------
// NDJSON corpora

/// One canonical message per line.
pub fn corpus_to_ndjson(messages: &[Message]) -> String {
    let mut out = String::new();
    for m in messages {
        out.push_str(&serialize(m));
        out.push('\n');
    }
    out
}

pub fn corpus_from_ndjson(text: &str, dialect: Dialect) -> Result<Vec<Message>> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| parse(l, dialect))
        .collect()
}

/// Pair corpus lines: `{"a": <msgA>, "b": <msgB>, "id": "..."}`.
pub fn pairs_to_ndjson(pairs: &[GroundTruthPair]) -> String {
    let mut out = String::new();
    for p in pairs {
        out.push_str(&format!(
            "{{\"a\":{},\"b\":{},\"id\":{}}}\n",
            serialize(&p.m_a),
            serialize(&p.m_b),
            json_string(&p.alignment_id)
        ));
    }
    out
}

pub fn pairs_from_ndjson(text: &str) -> Result<Vec<GroundTruthPair>> {
    let mut pairs = Vec::new();
    for line in text.lines().filter(|l| !l.trim().is_empty()) {
        let value: Value =
            serde_json::from_str(line).map_err(|e| LabError::MalformedJson(e.to_string()))?;
        let obj = value
            .as_object()
            .ok_or_else(|| LabError::MalformedJson("pair line must be an object".into()))?;
        let a = obj.get("a").ok_or_else(|| LabError::MissingField { field: "a".into(), index: 0 })?;
        let b = obj.get("b").ok_or_else(|| LabError::MissingField { field: "b".into(), index: 0 })?;
        let id = obj
            .get("id")
            .and_then(Value::as_str)
            .ok_or_else(|| LabError::MissingField { field: "id".into(), index: 0 })?;
        pairs.push(GroundTruthPair {
            m_a: parse_value(a, Dialect::A)?,
            m_b: parse_value(b, Dialect::B)?,
            alignment_id: id.to_string(),
        });
    }
    Ok(pairs)
}

/// Reference messages in both dialects (canonical bytes), used in tests
/// and docs.
pub mod samples {
    pub const MESSAGE_A: &str = concat!(
        "[{\"bn\":\"127.0.0.1/temp-service\",\"bt\":1549359472},",
        "{\"u\":\"lon\",\"v\":65.61721},",
        "{\"u\":\"lat\",\"v\":22.13683},",
        "{\"u\":\"K\",\"v\":253}]"
    );

    pub const MESSAGE_B: &str =
        "[{\"n\":\"office-A2312-temp-sensor\",\"u\":\"Cel\",\"v\":-20.4,\"t\":1549359472}]";
}
