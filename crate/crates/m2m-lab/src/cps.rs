//! One cyber-physical system: sensor/actuator bindings into the shared
//! environment, a matched encoder/decoder pair for its message dialect,
//! and a proportional control law.
//!
//! Internal canonical unit is Kelvin for both CPS; dialect units exist
//! only at the message boundary.

use crate::codec::{self, Dialect, DialectSchema, Message};
use crate::error::{LabError, Result};
use crate::semgraph::SemanticGraph;
use std::collections::BTreeMap;

#[derive(Debug, Clone, PartialEq)]
pub struct CpsConfig {
    pub domain: Dialect,
    /// Rows of the environment output vector this CPS reads, one per office.
    pub sensor_rows: Vec<usize>,
    /// Columns of the environment input vector this CPS drives, one per office.
    pub actuator_cols: Vec<usize>,
    /// Office symbol per local index (keys of own/remote readings).
    pub offices: Vec<String>,
    /// Sensor symbol per local index, resolved against this CPS's graph.
    pub sensors: Vec<String>,
    /// Proportional gain per office.
    pub control_gain: Vec<f64>,
    /// Setpoint per office, K.
    pub setpoints: Vec<f64>,
    pub schema: DialectSchema,
}

impl CpsConfig {
    pub fn office_count(&self) -> usize {
        self.offices.len()
    }

    pub fn validate(&self, input_count: usize, output_count: usize) -> Result<()> {
        let n = self.office_count();
        if n == 0 {
            return Err(LabError::Config("CPS must own at least one office".into()));
        }
        for (label, len) in [
            ("sensor_rows", self.sensor_rows.len()),
            ("actuator_cols", self.actuator_cols.len()),
            ("sensors", self.sensors.len()),
            ("control_gain", self.control_gain.len()),
            ("setpoints", self.setpoints.len()),
        ] {
            if len != n {
                return Err(LabError::Config(format!(
                    "{label} must have one entry per office ({n}), got {len}"
                )));
            }
        }
        if let Some(row) = self.sensor_rows.iter().find(|r| **r >= output_count) {
            return Err(LabError::Config(format!(
                "sensor row {row} out of range for plant with {output_count} outputs"
            )));
        }
        if let Some(col) = self.actuator_cols.iter().find(|c| **c >= input_count) {
            return Err(LabError::Config(format!(
                "actuator column {col} out of range for plant with {input_count} inputs"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CpsState {
    /// Named internal variables: `own.<office>` and `remote.<office>`
    /// readings in K.
    pub x_cps: BTreeMap<String, f64>,
    /// Actuation commands, saturated to [0, 1].
    pub u_local: Vec<f64>,
    /// Latest own readings, K.
    pub y_local: Vec<f64>,
    sensed: bool,
}

impl CpsState {
    pub fn new(cfg: &CpsConfig) -> CpsState {
        CpsState {
            x_cps: BTreeMap::new(),
            u_local: vec![0.0; cfg.office_count()],
            y_local: vec![0.0; cfg.office_count()],
            sensed: false,
        }
    }

    /// Project the environment output onto this CPS's sensor rows.
    pub fn sense(&mut self, cfg: &CpsConfig, y: &[f64]) -> Result<()> {
        for (i, row) in cfg.sensor_rows.iter().enumerate() {
            let reading = *y.get(*row).ok_or_else(|| {
                LabError::Input(format!("sensor row {row} out of range (y has {})", y.len()))
            })?;
            self.y_local[i] = reading;
            self.x_cps.insert(format!("own.{}", cfg.offices[i]), reading);
        }
        self.sensed = true;
        Ok(())
    }

    /// Encode the latest reading of one office into this CPS's dialect.
    pub fn encode(
        &self,
        cfg: &CpsConfig,
        graph: &SemanticGraph,
        office_idx: usize,
        time: f64,
    ) -> Result<Message> {
        if !self.sensed {
            return Err(LabError::Input("encode before first sense".into()));
        }
        if office_idx >= cfg.office_count() {
            return Err(LabError::Input(format!("office index {office_idx} out of range")));
        }
        let sensor = &cfg.sensors[office_idx];
        let office = &cfg.offices[office_idx];
        let kelvin = self.y_local[office_idx];
        match cfg.domain {
            Dialect::A => {
                let uri = graph.require_object(sensor, "exposedVia")?;
                let lon = parse_literal(graph.require_object(office, "hasLon")?, "hasLon")?;
                let lat = parse_literal(graph.require_object(office, "hasLat")?, "hasLat")?;
                Ok(codec::make_dialect_a(uri, time, lon, lat, kelvin))
            }
            Dialect::B => {
                let name = graph.require_object(sensor, "hasName")?;
                Ok(codec::make_dialect_b(name, codec::kelvin_to_celsius(kelvin), time))
            }
        }
    }

    /// Update internal state from a message in this CPS's own dialect.
    /// Cross-dialect input is rejected; that rejection is what the
    /// translator exists to avoid.
    pub fn decode(&mut self, cfg: &CpsConfig, graph: &SemanticGraph, m: &Message) -> Result<()> {
        let (office, kelvin) = interpret_message(cfg, graph, m)?;
        self.x_cps.insert(format!("remote.{office}"), kelvin);
        self.u_local = self.control(cfg);
        Ok(())
    }

    /// Own reading blended 50/50 with the decoded remote reading when one
    /// is available for the office.
    pub fn blended(&self, cfg: &CpsConfig, office_idx: usize) -> f64 {
        let own = self.y_local[office_idx];
        match self.x_cps.get(&format!("remote.{}", cfg.offices[office_idx])) {
            Some(remote) => 0.5 * (own + remote),
            None => own,
        }
    }

    /// Proportional law: u_i = clamp(gain_i * (setpoint_i - blended_i), 0, 1).
    pub fn control(&self, cfg: &CpsConfig) -> Vec<f64> {
        (0..cfg.office_count())
            .map(|i| {
                let err = cfg.setpoints[i] - self.blended(cfg, i);
                (cfg.control_gain[i] * err).clamp(0.0, 1.0)
            })
            .collect()
    }

    /// Recompute actuation from current readings (called once per step
    /// after sensing and decoding).
    pub fn actuate(&mut self, cfg: &CpsConfig) {
        self.u_local = self.control(cfg);
    }
}

/// Resolve a message in this CPS's dialect to (office, reading in K)
/// using the CPS's own metadata graph.
pub fn interpret_message(
    cfg: &CpsConfig,
    graph: &SemanticGraph,
    m: &Message,
) -> Result<(String, f64)> {
    if m.dialect != cfg.domain {
        return Err(LabError::Incompatibility {
            expected: cfg.domain.to_string(),
            got: m.dialect.to_string(),
        });
    }
    let (office, kelvin) = match cfg.domain {
        Dialect::B => {
            let rec = &m.records[0];
            let name = rec.name.as_deref().ok_or_else(|| LabError::MissingField {
                field: "n".into(),
                index: 0,
            })?;
            let sensors = graph.subjects("hasName", name);
            let sensor = sensors.first().ok_or_else(|| {
                LabError::Metadata(format!("no sensor named {name:?} in {}", graph.graph_id))
            })?;
            let office = graph.require_object(sensor, "locatedIn")?.to_string();
            (office, codec::celsius_to_kelvin(rec.value.unwrap_or(f64::NAN)))
        }
        Dialect::A => {
            let lon = m.records[1].value.unwrap_or(f64::NAN);
            let lat = m.records[2].value.unwrap_or(f64::NAN);
            let office = resolve_office_by_coords(graph, lon, lat)?;
            (office, m.records[3].value.unwrap_or(f64::NAN))
        }
    };
    if !kelvin.is_finite() {
        return Err(LabError::Numeric("decoded reading is not finite".into()));
    }
    Ok((office, kelvin))
}

fn parse_literal(text: &str, predicate: &str) -> Result<f64> {
    text.parse::<f64>()
        .map_err(|_| LabError::Metadata(format!("{predicate} literal {text:?} is not a number")))
}

/// Find the office whose hasLon/hasLat literals match the coordinates.
pub fn resolve_office_by_coords(graph: &SemanticGraph, lon: f64, lat: f64) -> Result<String> {
    for t in graph.triples() {
        if t.predicate != "hasLon" {
            continue;
        }
        let Ok(glon) = t.object.parse::<f64>() else { continue };
        if (glon - lon).abs() > 1e-9 {
            continue;
        }
        let glat = parse_literal(graph.require_object(&t.subject, "hasLat")?, "hasLat")?;
        if (glat - lat).abs() <= 1e-9 {
            return Ok(t.subject.clone());
        }
    }
    Err(LabError::Metadata(format!(
        "no office at lon {lon}, lat {lat} in {}",
        graph.graph_id
    )))
}
