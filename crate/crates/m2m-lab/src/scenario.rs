//! Scenario = one fully-specified experiment: the shared plant, both
//! control systems' bindings and setpoints, the episode length and seed,
//! and optional probe/fault events. Scenarios serialize to JSON and are
//! content-addressed so run directories name the exact configuration.

use crate::codec::{Dialect, DialectSchema};
use crate::cps::CpsConfig;
use crate::env::EnvModel;
use crate::error::{LabError, Result};
use crate::semgraph::{SemanticGraph, Triple};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const DEFAULT_EPOCH: f64 = 1549359472.0;

/// Step change applied to one system's setpoints mid-episode, used to
/// measure whether actions on one side still cause the expected response
/// in the other side's observations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeSpec {
    pub at_step: usize,
    /// Added to every CPS B setpoint from `at_step` onward.
    pub setpoint_delta_b: f64,
}

/// A stuck sensor: one of CPS B's readings is pinned to a constant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FaultSpec {
    pub office: usize,
    /// The stuck raw reading, K.
    pub reading: f64,
    #[serde(default)]
    pub from_step: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    pub env: EnvModel,
    pub episode_steps: usize,
    pub seed: u64,
    #[serde(default = "default_epoch")]
    pub epoch: f64,
    pub setpoints_a: Vec<f64>,
    pub setpoints_b: Vec<f64>,
    pub gain_a: f64,
    pub gain_b: f64,
    /// Weight of the comfort (setpoint tracking) term in the abstract
    /// operational loss; the effort term has weight 1.
    #[serde(default = "default_comfort_weight")]
    pub comfort_weight: f64,
    #[serde(default)]
    pub probe: Option<ProbeSpec>,
    #[serde(default)]
    pub fault: Option<FaultSpec>,
}

fn default_epoch() -> f64 {
    DEFAULT_EPOCH
}

fn default_comfort_weight() -> f64 {
    1.0
}

/// Fixed identity of the four offices both systems share. CPS A knows
/// them by service URI and coordinates; CPS B by sensor name.
pub const OFFICES: [&str; 4] = ["office-A2312", "office-A2313", "office-A2314", "office-A2315"];
pub const COORDS: [(&str, &str); 4] = [
    ("65.61721", "22.13683"),
    ("65.62001", "22.14101"),
    ("65.62288", "22.14507"),
    ("65.62544", "22.14919"),
];

pub fn service_uri(office_idx: usize) -> String {
    format!("127.0.0.{}/temp-service", office_idx + 1)
}

pub fn sensor_name(office_idx: usize) -> String {
    format!("{}-temp-sensor", OFFICES[office_idx])
}

impl Scenario {
    /// The default four-office experiment.
    pub fn office(seed: u64) -> Scenario {
        Scenario {
            name: "office".into(),
            env: EnvModel::canonical(0.05, 0.1),
            episode_steps: 240,
            seed,
            epoch: DEFAULT_EPOCH,
            setpoints_a: vec![268.0, 271.0, 274.0, 277.0],
            setpoints_b: vec![268.0, 271.0, 274.0, 277.0],
            gain_a: 0.2,
            // negative gain: the vent (a cooling actuator) opens when the
            // blended reading is above setpoint
            gain_b: -0.2,
            comfort_weight: 1.0,
            probe: None,
            fault: None,
        }
    }

    /// Noise-free variant, for exactness checks.
    pub fn office_noise_free(seed: u64) -> Scenario {
        Scenario {
            name: "office-noise-free".into(),
            env: EnvModel::canonical(0.0, 0.0),
            ..Scenario::office(seed)
        }
    }

    pub fn office_count(&self) -> usize {
        self.env.n_states
    }

    pub fn validate(&self) -> Result<()> {
        self.env.validate()?;
        if self.episode_steps == 0 {
            return Err(LabError::Config("episode_steps must be >= 1".into()));
        }
        let n = self.office_count();
        if n > OFFICES.len() {
            return Err(LabError::Config(format!(
                "plant has {n} offices but only {} are named",
                OFFICES.len()
            )));
        }
        if self.setpoints_a.len() != n || self.setpoints_b.len() != n {
            return Err(LabError::Config(format!(
                "setpoints must have one entry per office ({n})"
            )));
        }
        if self.env.input_count() != 2 * n || self.env.output_count() != 2 * n {
            return Err(LabError::Config(
                "plant must expose one actuator and one sensor per office and system".into(),
            ));
        }
        if let Some(p) = &self.probe {
            if p.at_step >= self.episode_steps {
                return Err(LabError::Config("probe at_step beyond episode end".into()));
            }
        }
        if let Some(f) = &self.fault {
            if f.office >= n {
                return Err(LabError::Config(format!("fault office {} out of range", f.office)));
            }
            if !f.reading.is_finite() {
                return Err(LabError::Config("fault reading must be finite".into()));
            }
        }
        let cfg_a = self.cps_config_a();
        let cfg_b = self.cps_config_b();
        cfg_a.validate(self.env.input_count(), self.env.output_count())?;
        cfg_b.validate(self.env.input_count(), self.env.output_count())?;
        Ok(())
    }

    pub fn schema_a(&self) -> DialectSchema {
        DialectSchema { dialect: Dialect::A, epoch: self.epoch }
    }

    pub fn schema_b(&self) -> DialectSchema {
        DialectSchema { dialect: Dialect::B, epoch: self.epoch }
    }

    /// CPS A: heaters on input columns 0..n, sensor rows 0..n.
    pub fn cps_config_a(&self) -> CpsConfig {
        let n = self.office_count();
        CpsConfig {
            domain: Dialect::A,
            sensor_rows: (0..n).collect(),
            actuator_cols: (0..n).collect(),
            offices: OFFICES[..n].iter().map(|s| s.to_string()).collect(),
            sensors: (0..n).map(|i| format!("tempA{}", i + 1)).collect(),
            control_gain: vec![self.gain_a; n],
            setpoints: self.setpoints_a.clone(),
            schema: self.schema_a(),
        }
    }

    /// CPS B: vents on input columns n..2n, sensor rows n..2n.
    pub fn cps_config_b(&self) -> CpsConfig {
        let n = self.office_count();
        CpsConfig {
            domain: Dialect::B,
            sensor_rows: (n..2 * n).collect(),
            actuator_cols: (n..2 * n).collect(),
            offices: OFFICES[..n].iter().map(|s| s.to_string()).collect(),
            sensors: (0..n).map(|i| format!("tempB{}", i + 1)).collect(),
            control_gain: vec![self.gain_b; n],
            setpoints: self.setpoints_b.clone(),
            schema: self.schema_b(),
        }
    }

    /// CPS A's private metadata: sensors bound to offices, service URIs,
    /// office coordinates.
    pub fn graph_a(&self) -> SemanticGraph {
        let mut g = SemanticGraph::new("G_A");
        for i in 0..self.office_count() {
            let sensor = format!("tempA{}", i + 1);
            g.add(Triple::new(&sensor, "locatedIn", OFFICES[i])).expect("static triples");
            g.add(Triple::new(&sensor, "exposedVia", service_uri(i))).expect("static triples");
            g.add(Triple::new(OFFICES[i], "hasLon", COORDS[i].0)).expect("static triples");
            g.add(Triple::new(OFFICES[i], "hasLat", COORDS[i].1)).expect("static triples");
        }
        g
    }

    /// CPS B's private metadata: sensors bound to offices by name.
    pub fn graph_b(&self) -> SemanticGraph {
        let mut g = SemanticGraph::new("G_B");
        for i in 0..self.office_count() {
            let sensor = format!("tempB{}", i + 1);
            g.add(Triple::new(&sensor, "locatedIn", OFFICES[i])).expect("static triples");
            g.add(Triple::new(&sensor, "hasName", sensor_name(i))).expect("static triples");
        }
        g
    }

    /// Evaluation-only alignment between the two vocabularies. Learners
    /// never see this graph; the engineered oracle and the scoring code do.
    pub fn eval_graph(&self) -> SemanticGraph {
        let mut g = SemanticGraph::new("G_eval");
        for i in 0..self.office_count() {
            g.add(Triple::new(OFFICES[i], "hasLon", COORDS[i].0)).expect("static triples");
            g.add(Triple::new(OFFICES[i], "hasLat", COORDS[i].1)).expect("static triples");
            g.add(Triple::new(OFFICES[i], "serviceUri", service_uri(i))).expect("static triples");
            g.add(Triple::new(OFFICES[i], "sensorName", sensor_name(i))).expect("static triples");
        }
        g
    }

    /// Names CPS B's sensors expose, in office order: the closed symbol
    /// set an A-to-B translator may emit.
    pub fn name_candidates_b(&self) -> Vec<String> {
        (0..self.office_count()).map(sensor_name).collect()
    }

    /// Service URIs CPS A's sensors expose, in office order.
    pub fn name_candidates_a(&self) -> Vec<String> {
        (0..self.office_count()).map(service_uri).collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    pub fn from_json(text: &str) -> Result<Scenario> {
        let s: Scenario =
            serde_json::from_str(text).map_err(|e| LabError::MalformedJson(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    /// First 8 hex digits of the SHA-256 of the canonical (compact) JSON
    /// form; run directories are named `<hash>-seed<seed>`.
    pub fn content_hash(&self) -> String {
        let compact = serde_json::to_string(self).expect("scenario serializes");
        hex::encode(Sha256::digest(compact.as_bytes()))[..8].to_string()
    }

    pub fn run_dir_name(&self) -> String {
        format!("{}-seed{}", self.content_hash(), self.seed)
    }
}
