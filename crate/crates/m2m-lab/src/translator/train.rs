//! Training routes for learned translators: supervised end-to-end
//! regression on aligned pairs, per-dialect autoencoders, and latent-map
//! training from pair-free co-observations or from an operational
//! objective evaluated by rollout.

use crate::codec::{self, Dialect, DialectSchema, GroundTruthPair, Message};
use crate::error::{LabError, Result};
use crate::rng::CounterRng;
use crate::semgraph::{SemanticGraph, FEATURE_DIM};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::mlp::{self, Activation, MlpMap, TrainConfig};
use super::{LearnedKind, LearnedTranslator, OutputSchema, Translator};

/// Per-dimension affine normalization fitted on a training corpus.
/// Near-constant dimensions keep std 1 so they map to ~0 instead of
/// amplifying noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    pub fn identity(dim: usize) -> Standardizer {
        Standardizer { mean: vec![0.0; dim], std: vec![1.0; dim] }
    }

    pub fn fit(rows: &[Vec<f64>]) -> Result<Standardizer> {
        if rows.is_empty() {
            return Err(LabError::Training("cannot fit a standardizer on no data".into()));
        }
        let dim = rows[0].len();
        let n = rows.len() as f64;
        let mut mean = vec![0.0; dim];
        for row in rows {
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v / n;
            }
        }
        let mut std = vec![0.0; dim];
        for row in rows {
            for (s, (v, m)) in std.iter_mut().zip(row.iter().zip(&mean)) {
                *s += (v - m) * (v - m) / n;
            }
        }
        for s in &mut std {
            *s = s.sqrt();
            if *s < 1e-8 {
                *s = 1.0;
            }
        }
        Ok(Standardizer { mean, std })
    }

    pub fn transform(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    }

    pub fn inverse(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(v, (m, s))| v * s + m)
            .collect()
    }
}

/// Full learner-facing feature vector of a message: the numeric fields
/// followed by the graph feature of every symbolic field.
pub fn message_features(
    m: &Message,
    schema: &DialectSchema,
    graph: &SemanticGraph,
) -> Result<Vec<f64>> {
    let (numeric, symbols) = codec::numeric_view(m, schema)?;
    let mut out = numeric;
    out.reserve(symbols.len() * FEATURE_DIM);
    for s in &symbols {
        out.extend(graph.symbol_features_lenient(s));
    }
    Ok(out)
}

pub fn feature_dim(schema: &DialectSchema) -> usize {
    schema.numeric_len() + FEATURE_DIM * schema.symbol_count()
}

/// Regression target for cross-dialect translation: the numeric fields
/// of the target message plus the embedding of its primary symbol.
pub fn target_vector(
    m: &Message,
    schema: &DialectSchema,
    graph: &SemanticGraph,
) -> Result<Vec<f64>> {
    let (numeric, symbols) = codec::numeric_view(m, schema)?;
    let mut out = numeric;
    out.extend(graph.symbol_features(&symbols[0])?.vector);
    Ok(out)
}

/// Value of a message's single reading, in K.
pub fn value_kelvin(m: &Message) -> Result<f64> {
    match m.dialect {
        Dialect::A => m.records[3]
            .value
            .ok_or_else(|| LabError::MissingField { field: "v".into(), index: 3 }),
        Dialect::B => m.records[0]
            .value
            .map(codec::celsius_to_kelvin)
            .ok_or_else(|| LabError::MissingField { field: "v".into(), index: 0 }),
    }
}

// ---------------------------------------------------------------------------
// End-to-end translator

/// Translator with all weights zero and identity normalization: the
/// theta = 0 reference point operational losses are compared against.
pub fn untrained_translator(
    kind: LearnedKind,
    input_schema: DialectSchema,
    output_schema: OutputSchema,
    hidden: &[usize],
) -> Translator {
    let in_dim = feature_dim(&input_schema);
    let out_dim = output_schema.schema.numeric_len() + FEATURE_DIM;
    let mut sizes = vec![in_dim];
    sizes.extend_from_slice(hidden);
    sizes.push(out_dim);
    let net = MlpMap::zeroed(&sizes, Activation::Tanh);
    Translator::Learned(LearnedTranslator {
        kind,
        input_schema,
        output_schema,
        in_standardizer: Standardizer::identity(in_dim),
        out_standardizer: Standardizer::identity(out_dim),
        net,
        training_curve: Vec::new(),
    })
}

/// Supervised route: regress target-dialect fields directly from
/// source-dialect features over an aligned pair corpus.
pub fn train_end_to_end(
    pairs: &[GroundTruthPair],
    g_a: &SemanticGraph,
    g_b: &SemanticGraph,
    schema_a: &DialectSchema,
    schema_b: &DialectSchema,
    direction: Dialect,
    name_candidates: Vec<String>,
    hidden: &[usize],
    cfg: &TrainConfig,
) -> Result<Translator> {
    if pairs.is_empty() {
        return Err(LabError::Training("end-to-end training needs a nonempty pair corpus".into()));
    }
    let (schema_in, schema_out, g_in, g_out) = match direction {
        Dialect::A => (schema_a, schema_b, g_a, g_b),
        Dialect::B => (schema_b, schema_a, g_b, g_a),
    };
    let mut inputs = Vec::with_capacity(pairs.len());
    let mut targets = Vec::with_capacity(pairs.len());
    for p in pairs {
        let (src, dst) = match direction {
            Dialect::A => (&p.m_a, &p.m_b),
            Dialect::B => (&p.m_b, &p.m_a),
        };
        inputs.push(message_features(src, schema_in, g_in)?);
        targets.push(target_vector(dst, schema_out, g_out)?);
    }
    let in_std = Standardizer::fit(&inputs)?;
    let out_std = Standardizer::fit(&targets)?;
    let xs: Vec<Vec<f64>> = inputs.iter().map(|r| in_std.transform(r)).collect();
    let ts: Vec<Vec<f64>> = targets.iter().map(|r| out_std.transform(r)).collect();
    let mut sizes = vec![xs[0].len()];
    sizes.extend_from_slice(hidden);
    sizes.push(ts[0].len());
    let mut rng = CounterRng::new(cfg.seed, 0);
    let mut net = MlpMap::new(&sizes, Activation::Tanh, &mut rng);
    let curve = mlp::train_mse(&mut net, &xs, &ts, cfg, None)?;
    Ok(Translator::Learned(LearnedTranslator {
        kind: LearnedKind::EndToEnd,
        input_schema: schema_in.clone(),
        output_schema: OutputSchema { schema: schema_out.clone(), name_candidates },
        in_standardizer: in_std,
        out_standardizer: out_std,
        net,
        training_curve: curve,
    }))
}

// ---------------------------------------------------------------------------
// Autoencoders and the latent route

/// Linear autoencoder over one dialect's standardized feature space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Autoencoder {
    pub schema: DialectSchema,
    pub latent_dim: usize,
    pub standardizer: Standardizer,
    pub enc: MlpMap,
    pub dec: MlpMap,
    pub training_curve: Vec<f64>,
}

impl Autoencoder {
    pub fn encode(&self, m: &Message, graph: &SemanticGraph) -> Result<Vec<f64>> {
        let features = message_features(m, &self.schema, graph)?;
        Ok(self.enc.forward(&self.standardizer.transform(&features)))
    }

    /// Mean squared reconstruction error per dimension, in standardized
    /// feature space.
    pub fn reconstruction_mse(&self, corpus: &[Message], graph: &SemanticGraph) -> Result<f64> {
        if corpus.is_empty() {
            return Err(LabError::Input("empty corpus".into()));
        }
        let mut total = 0.0;
        for m in corpus {
            let x = self.standardizer.transform(&message_features(m, &self.schema, graph)?);
            let x_hat = self.dec.forward(&self.enc.forward(&x));
            total += x
                .iter()
                .zip(&x_hat)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                / x.len() as f64;
        }
        Ok(total / corpus.len() as f64)
    }
}

pub fn train_autoencoder(
    corpus: &[Message],
    graph: &SemanticGraph,
    schema: &DialectSchema,
    latent_dim: usize,
    cfg: &TrainConfig,
) -> Result<Autoencoder> {
    if corpus.is_empty() {
        return Err(LabError::Training("autoencoder training needs a nonempty corpus".into()));
    }
    if latent_dim == 0 {
        return Err(LabError::Config("latent dimension must be >= 1".into()));
    }
    if let Some(m) = corpus.iter().find(|m| m.dialect != schema.dialect) {
        return Err(LabError::Training(format!(
            "mixed-dialect corpus: found dialect {} under schema {}",
            m.dialect, schema.dialect
        )));
    }
    let raw: Vec<Vec<f64>> = corpus
        .iter()
        .map(|m| message_features(m, schema, graph))
        .collect::<Result<_>>()?;
    let standardizer = Standardizer::fit(&raw)?;
    let xs: Vec<Vec<f64>> = raw.iter().map(|r| standardizer.transform(r)).collect();
    let d = xs[0].len();
    let mut rng = CounterRng::new(cfg.seed, 0);
    let mut net = MlpMap::new(&[d, latent_dim, d], Activation::Identity, &mut rng);
    let curve = mlp::train_mse(&mut net, &xs, &xs, cfg, None)?;
    let enc = MlpMap { layers: vec![net.layers[0].clone()] };
    let dec = MlpMap { layers: vec![net.layers[1].clone()] };
    Ok(Autoencoder {
        schema: schema.clone(),
        latent_dim,
        standardizer,
        enc,
        dec,
        training_curve: curve,
    })
}

/// Compose encoder, latent map, and decoder into a full translator.
pub fn latent_translator(
    ae_src: &Autoencoder,
    ae_dst: &Autoencoder,
    map: &MlpMap,
    name_candidates: Vec<String>,
    training_curve: Vec<f64>,
) -> Translator {
    let net = ae_src.enc.compose(map).compose(&ae_dst.dec);
    Translator::Learned(LearnedTranslator {
        kind: LearnedKind::LatentMap,
        input_schema: ae_src.schema.clone(),
        output_schema: OutputSchema { schema: ae_dst.schema.clone(), name_candidates },
        in_standardizer: ae_src.standardizer.clone(),
        out_standardizer: ae_dst.standardizer.clone(),
        net,
        training_curve,
    })
}

/// One pair-free training record: a source-dialect message together with
/// the messages the target-side system itself emitted at the same step.
#[derive(Debug, Clone, PartialEq)]
pub struct CoObservation {
    pub source: Message,
    pub observed: Vec<Message>,
    pub t: f64,
}

pub fn coobs_to_ndjson(records: &[CoObservation]) -> String {
    let mut out = String::new();
    for r in records {
        let observed: Vec<Value> = r
            .observed
            .iter()
            .map(|m| serde_json::from_str(&codec::serialize(m)).expect("canonical form is JSON"))
            .collect();
        let line = serde_json::json!({
            "dir": r.source.dialect.to_string(),
            "t": r.t,
            "source": serde_json::from_str::<Value>(&codec::serialize(&r.source)).expect("canonical form is JSON"),
            "observed": observed,
        });
        out.push_str(&line.to_string());
        out.push('\n');
    }
    out
}

pub fn coobs_from_ndjson(text: &str) -> Result<Vec<CoObservation>> {
    let mut records = Vec::new();
    for line in text.lines().filter(|l| !l.trim().is_empty()) {
        let value: Value =
            serde_json::from_str(line).map_err(|e| LabError::MalformedJson(e.to_string()))?;
        let dir = value
            .get("dir")
            .and_then(Value::as_str)
            .ok_or_else(|| LabError::MissingField { field: "dir".into(), index: 0 })?;
        let dialect = match dir {
            "A" => Dialect::A,
            "B" => Dialect::B,
            other => {
                return Err(LabError::SchemaMismatch(format!("unknown direction {other:?}")))
            }
        };
        let other = match dialect {
            Dialect::A => Dialect::B,
            Dialect::B => Dialect::A,
        };
        let t = value
            .get("t")
            .and_then(Value::as_f64)
            .ok_or_else(|| LabError::MissingField { field: "t".into(), index: 0 })?;
        let source = value
            .get("source")
            .ok_or_else(|| LabError::MissingField { field: "source".into(), index: 0 })?;
        let observed = value
            .get("observed")
            .and_then(Value::as_array)
            .ok_or_else(|| LabError::MissingField { field: "observed".into(), index: 0 })?;
        records.push(CoObservation {
            source: codec::parse_value(source, dialect)?,
            observed: observed
                .iter()
                .map(|v| codec::parse_value(v, other))
                .collect::<Result<_>>()?,
            t,
        });
    }
    Ok(records)
}

/// Pair each source message with the co-observed target-side message
/// whose reading (in K) is closest. Returns (source, assigned) pairs.
pub fn assign_coobservations<'a>(
    coobs: &'a [CoObservation],
    source_dialect: Dialect,
) -> Result<Vec<(&'a Message, &'a Message)>> {
    let mut out = Vec::new();
    for r in coobs {
        if r.source.dialect != source_dialect || r.observed.is_empty() {
            continue;
        }
        let v = value_kelvin(&r.source)?;
        let mut best: Option<(f64, &Message)> = None;
        for obs in &r.observed {
            let d = (value_kelvin(obs)? - v).abs();
            if best.map_or(true, |(bd, _)| d < bd) {
                best = Some((d, obs));
            }
        }
        out.push((&r.source, best.expect("observed nonempty").1));
    }
    Ok(out)
}

/// Pair-free latent-map training against the correlation objective:
/// the map (behind the frozen target decoder) learns to reproduce the
/// target system's own representation of the co-observed reading.
pub fn train_latent_correlation(
    ae_src: &Autoencoder,
    ae_dst: &Autoencoder,
    coobs: &[CoObservation],
    g_src: &SemanticGraph,
    g_dst: &SemanticGraph,
    name_candidates: Vec<String>,
    cfg: &TrainConfig,
) -> Result<Translator> {
    if ae_src.latent_dim != ae_dst.latent_dim {
        return Err(LabError::Incompatibility {
            expected: ae_src.latent_dim.to_string(),
            got: ae_dst.latent_dim.to_string(),
        });
    }
    let assigned = assign_coobservations(coobs, ae_src.schema.dialect)?;
    if assigned.is_empty() {
        return Err(LabError::Training("no usable co-observations for this direction".into()));
    }
    let mut inputs = Vec::with_capacity(assigned.len());
    let mut targets = Vec::with_capacity(assigned.len());
    for (src, dst) in &assigned {
        inputs.push(ae_src.encode(src, g_src)?);
        let feat = message_features(dst, &ae_dst.schema, g_dst)?;
        targets.push(ae_dst.standardizer.transform(&feat));
    }
    let d = ae_src.latent_dim;
    let mut rng = CounterRng::new(cfg.seed, 0);
    let map = MlpMap::new(&[d, d], Activation::Identity, &mut rng);
    let mut net = map.compose(&ae_dst.dec);
    let curve = mlp::train_mse(&mut net, &inputs, &targets, cfg, Some(map.layers.len()))?;
    let trained_map = MlpMap { layers: net.layers[..map.layers.len()].to_vec() };
    Ok(latent_translator(ae_src, ae_dst, &trained_map, name_candidates, curve))
}

/// Latent-map training directly against an operational objective
/// (e.g. the causation or abstract loss evaluated by rollout), by
/// central finite-difference gradient descent on the map parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveTrainConfig {
    pub iterations: usize,
    pub fd_step: f64,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for ObjectiveTrainConfig {
    fn default() -> Self {
        ObjectiveTrainConfig { iterations: 5, fd_step: 1e-3, learning_rate: 0.1, seed: 1 }
    }
}

pub fn train_latent_objective<F>(
    ae_src: &Autoencoder,
    ae_dst: &Autoencoder,
    name_candidates: &[String],
    mut objective: F,
    cfg: &ObjectiveTrainConfig,
) -> Result<(Translator, Vec<f64>)>
where
    F: FnMut(&Translator) -> Result<f64>,
{
    if ae_src.latent_dim != ae_dst.latent_dim {
        return Err(LabError::Incompatibility {
            expected: ae_src.latent_dim.to_string(),
            got: ae_dst.latent_dim.to_string(),
        });
    }
    let d = ae_src.latent_dim;
    let mut rng = CounterRng::new(cfg.seed, 0);
    let mut map = MlpMap::new(&[d, d], Activation::Identity, &mut rng);
    let eval = |m: &MlpMap, obj: &mut F| -> Result<f64> {
        obj(&latent_translator(ae_src, ae_dst, m, name_candidates.to_vec(), Vec::new()))
    };
    let mut curve = Vec::with_capacity(cfg.iterations + 1);
    for _ in 0..cfg.iterations {
        curve.push(eval(&map, &mut objective)?);
        let theta = map.params();
        let mut grad = vec![0.0; theta.len()];
        let mut probe = map.clone();
        for i in 0..theta.len() {
            let mut p = theta.clone();
            p[i] += cfg.fd_step;
            probe.set_params(&p);
            let up = eval(&probe, &mut objective)?;
            p[i] = theta[i] - cfg.fd_step;
            probe.set_params(&p);
            let down = eval(&probe, &mut objective)?;
            grad[i] = (up - down) / (2.0 * cfg.fd_step);
        }
        let step: Vec<f64> = theta
            .iter()
            .zip(&grad)
            .map(|(t, g)| t - cfg.learning_rate * g)
            .collect();
        map.set_params(&step);
    }
    curve.push(eval(&map, &mut objective)?);
    let t = latent_translator(ae_src, ae_dst, &map, name_candidates.to_vec(), curve.clone());
    Ok((t, curve))
}

/// Dispatch latent-map training by loss kind. Reconstruction needs an
/// aligned pair corpus and belongs to the end-to-end route; operational
/// losses that need rollouts go through `train_latent_objective`.
pub fn train_latent_map(
    spec: &super::LossSpec,
    ae_src: &Autoencoder,
    ae_dst: &Autoencoder,
    coobs: &[CoObservation],
    g_src: &SemanticGraph,
    g_dst: &SemanticGraph,
    name_candidates: Vec<String>,
    cfg: &TrainConfig,
) -> Result<Translator> {
    spec.validate()?;
    match spec.kind {
        super::LossKind::Correlation => train_latent_correlation(
            ae_src,
            ae_dst,
            coobs,
            g_src,
            g_dst,
            name_candidates,
            cfg,
        ),
        super::LossKind::Reconstruction => Err(LabError::Training(
            "reconstruction loss needs aligned pairs; use the end-to-end route".into(),
        )),
        super::LossKind::Causation | super::LossKind::Abstract => Err(LabError::Training(
            "operational losses need simulation rollouts; train via an objective closure".into(),
        )),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::semgraph::Triple;

    const EPOCH: f64 = 1549359472.0;

    fn schema(d: Dialect) -> DialectSchema {
        DialectSchema { dialect: d, epoch: EPOCH }
    }

    fn graphs() -> (SemanticGraph, SemanticGraph) {
        let mut g_a = SemanticGraph::new("G_A");
        let mut g_b = SemanticGraph::new("G_B");
        let coords = [("65.61721", "22.13683"), ("65.62001", "22.14101")];
        for (i, (lon, lat)) in coords.iter().enumerate() {
            let office = format!("office-A231{}", 2 + i);
            let sensor_a = format!("tempA{}", i + 1);
            let uri = format!("127.0.0.{}/temp-service", i + 1);
            g_a.add(Triple::new(&sensor_a, "locatedIn", &office)).unwrap();
            g_a.add(Triple::new(&sensor_a, "exposedVia", &uri)).unwrap();
            g_a.add(Triple::new(&office, "hasLon", *lon)).unwrap();
            g_a.add(Triple::new(&office, "hasLat", *lat)).unwrap();
            let sensor_b = format!("tempB{}", i + 1);
            g_b.add(Triple::new(&sensor_b, "locatedIn", &office)).unwrap();
            g_b.add(Triple::new(&sensor_b, "hasName", format!("{office}-temp-sensor"))).unwrap();
        }
        (g_a, g_b)
    }

    fn message_a(office: usize, kelvin: f64, t: f64) -> Message {
        let coords = [(65.61721, 22.13683), (65.62001, 22.14101)];
        codec::make_dialect_a(
            &format!("127.0.0.{}/temp-service", office + 1),
            EPOCH + t,
            coords[office].0,
            coords[office].1,
            kelvin,
        )
    }

    fn message_b(office: usize, kelvin: f64, t: f64) -> Message {
        codec::make_dialect_b(
            &format!("office-A231{}-temp-sensor", 2 + office),
            codec::kelvin_to_celsius(kelvin),
            EPOCH + t,
        )
    }

    fn pair_corpus(n: usize) -> Vec<GroundTruthPair> {
        let mut rng = CounterRng::new(42, 0);
        (0..n)
            .map(|i| {
                let office = i % 2;
                let kelvin = 265.0 + 10.0 * rng.next_uniform();
                let t = 60.0 * i as f64;
                GroundTruthPair {
                    m_a: message_a(office, kelvin, t),
                    m_b: message_b(office, kelvin, t),
                    alignment_id: format!("p{i}"),
                }
            })
            .collect()
    }

    #[test]
    fn standardizer_round_trips_and_handles_constant_dims() {
        let rows = vec![vec![1.0, 5.0], vec![3.0, 5.0], vec![5.0, 5.0]];
        let s = Standardizer::fit(&rows).unwrap();
        assert_eq!(s.mean, vec![3.0, 5.0]);
        assert_eq!(s.std[1], 1.0); // constant dim floored
        let z = s.transform(&rows[0]);
        assert_eq!(z[1], 0.0);
        let back = s.inverse(&z);
        assert!((back[0] - 1.0).abs() < 1e-12 && (back[1] - 5.0).abs() < 1e-12);
        assert!(Standardizer::fit(&[]).is_err());
    }

    #[test]
    fn feature_dims_match_schema() {
        let (g_a, g_b) = graphs();
        let fa = message_features(&message_a(0, 253.0, 0.0), &schema(Dialect::A), &g_a).unwrap();
        assert_eq!(fa.len(), 4 + 4 * FEATURE_DIM);
        assert_eq!(fa.len(), feature_dim(&schema(Dialect::A)));
        let fb = message_features(&message_b(0, 253.0, 0.0), &schema(Dialect::B), &g_b).unwrap();
        assert_eq!(fb.len(), 2 + 2 * FEATURE_DIM);
        // target vector carries only the primary symbol embedding
        let tv = target_vector(&message_b(0, 253.0, 0.0), &schema(Dialect::B), &g_b).unwrap();
        assert_eq!(tv.len(), 2 + FEATURE_DIM);
        assert_eq!(tv[0], codec::kelvin_to_celsius(253.0));
    }

    #[test]
    fn value_kelvin_reads_both_dialects() {
        assert_eq!(value_kelvin(&message_a(0, 253.0, 0.0)).unwrap(), 253.0);
        let v = value_kelvin(&message_b(0, 253.0, 0.0)).unwrap();
        assert!((v - 253.0).abs() < 1e-9);
    }

    #[test]
    fn untrained_translator_emits_zero_and_first_candidate() {
        let (g_a, g_b) = graphs();
        let candidates = vec![
            "office-A2312-temp-sensor".to_string(),
            "office-A2313-temp-sensor".to_string(),
        ];
        let t = untrained_translator(
            LearnedKind::EndToEnd,
            schema(Dialect::A),
            OutputSchema { schema: schema(Dialect::B), name_candidates: candidates },
            &[8],
        );
        let out = t.apply(&message_a(1, 300.0, 120.0), &g_a, &g_b).unwrap();
        assert_eq!(out.records[0].value, Some(0.0));
        assert_eq!(out.records[0].time, Some(EPOCH));
        // zero embedding is equidistant from all unit candidates; the tie
        // breaks to the lowest symbol index regardless of the input office
        assert_eq!(out.records[0].name.as_deref(), Some("office-A2312-temp-sensor"));
    }

    #[test]
    fn end_to_end_learns_value_and_office() {
        let (g_a, g_b) = graphs();
        let pairs = pair_corpus(60);
        let cfg = TrainConfig { epochs: 400, batch_size: 16, learning_rate: 0.05, momentum: 0.9, seed: 3 };
        let t = train_end_to_end(
            &pairs,
            &g_a,
            &g_b,
            &schema(Dialect::A),
            &schema(Dialect::B),
            Dialect::A,
            vec!["office-A2312-temp-sensor".into(), "office-A2313-temp-sensor".into()],
            &[16],
            &cfg,
        )
        .unwrap();
        // held-out probes
        for (office, kelvin) in [(0usize, 267.3), (1usize, 271.9)] {
            let m = message_a(office, kelvin, 1800.0);
            let out = t.apply(&m, &g_a, &g_b).unwrap();
            let got = codec::celsius_to_kelvin(out.records[0].value.unwrap());
            assert!(
                (got - kelvin).abs() < 0.5,
                "office {office}: expected ~{kelvin}, got {got}"
            );
            assert_eq!(
                out.records[0].name.as_deref().unwrap(),
                format!("office-A231{}-temp-sensor", 2 + office)
            );
        }
        // determinism: retraining reproduces the same translator
        let t2 = train_end_to_end(
            &pairs,
            &g_a,
            &g_b,
            &schema(Dialect::A),
            &schema(Dialect::B),
            Dialect::A,
            vec!["office-A2312-temp-sensor".into(), "office-A2313-temp-sensor".into()],
            &[16],
            &cfg,
        )
        .unwrap();
        assert_eq!(t, t2);
    }

    #[test]
    fn empty_pair_corpus_is_training_error() {
        let (g_a, g_b) = graphs();
        let err = train_end_to_end(
            &[],
            &g_a,
            &g_b,
            &schema(Dialect::A),
            &schema(Dialect::B),
            Dialect::A,
            vec![],
            &[8],
            &TrainConfig::default(),
        );
        assert!(matches!(err, Err(LabError::Training(_))));
    }

    fn corpus_b(n: usize) -> Vec<Message> {
        let mut rng = CounterRng::new(7, 0);
        (0..n)
            .map(|i| message_b(i % 2, 265.0 + 10.0 * rng.next_uniform(), 60.0 * i as f64))
            .collect()
    }

    #[test]
    fn autoencoder_reconstructs_low_rank_corpus() {
        let (_, g_b) = graphs();
        let corpus = corpus_b(80);
        let cfg = TrainConfig { epochs: 2000, batch_size: 16, learning_rate: 0.03, momentum: 0.9, seed: 5 };
        let ae = train_autoencoder(&corpus, &g_b, &schema(Dialect::B), 4, &cfg).unwrap();
        let mse = ae.reconstruction_mse(&corpus, &g_b).unwrap();
        assert!(mse < 0.01, "reconstruction mse {mse}");
        let h = ae.encode(&corpus[0], &g_b).unwrap();
        assert_eq!(h.len(), 4);
    }

    #[test]
    fn autoencoder_rejects_mixed_and_empty_corpora() {
        let (_, g_b) = graphs();
        let mut corpus = corpus_b(4);
        corpus.push(message_a(0, 270.0, 0.0));
        assert!(matches!(
            train_autoencoder(&corpus, &g_b, &schema(Dialect::B), 4, &TrainConfig::default()),
            Err(LabError::Training(_))
        ));
        assert!(train_autoencoder(&[], &g_b, &schema(Dialect::B), 4, &TrainConfig::default()).is_err());
    }

    fn coobs_corpus(n: usize) -> Vec<CoObservation> {
        // two offices ~4 K apart so nearest-value assignment is unambiguous
        let mut rng = CounterRng::new(9, 0);
        (0..n)
            .map(|i| {
                let t = 60.0 * i as f64;
                let v0 = 268.0 + 0.3 * rng.next_symmetric(1.0);
                let v1 = 274.0 + 0.3 * rng.next_symmetric(1.0);
                let office = i % 2;
                let v = if office == 0 { v0 } else { v1 };
                CoObservation {
                    source: message_a(office, v, t),
                    observed: vec![
                        message_b(0, v0 + 0.05, t),
                        message_b(1, v1 + 0.05, t),
                    ],
                    t: EPOCH + t,
                }
            })
            .collect()
    }

    #[test]
    fn coobservation_assignment_picks_nearest_value() {
        let coobs = coobs_corpus(6);
        let assigned = assign_coobservations(&coobs, Dialect::A).unwrap();
        assert_eq!(assigned.len(), 6);
        for (src, dst) in &assigned {
            let dv = (value_kelvin(src).unwrap() - value_kelvin(dst).unwrap()).abs();
            assert!(dv < 1.0, "assignment drifted by {dv} K");
        }
        // wrong-direction filter
        assert!(assign_coobservations(&coobs, Dialect::B).unwrap().is_empty());
    }

    #[test]
    fn coobs_ndjson_round_trip() {
        let coobs = coobs_corpus(3);
        let text = coobs_to_ndjson(&coobs);
        let back = coobs_from_ndjson(&text).unwrap();
        assert_eq!(back, coobs);
    }

    #[test]
    fn latent_map_learns_from_coobservations() {
        let (g_a, g_b) = graphs();
        let coobs = coobs_corpus(80);
        let ae_cfg = TrainConfig { epochs: 600, batch_size: 16, learning_rate: 0.02, momentum: 0.9, seed: 11 };
        let corpus_a: Vec<Message> = coobs.iter().map(|c| c.source.clone()).collect();
        let corpus_b: Vec<Message> =
            coobs.iter().flat_map(|c| c.observed.iter().cloned()).collect();
        let ae_a = train_autoencoder(&corpus_a, &g_a, &schema(Dialect::A), 6, &ae_cfg).unwrap();
        let ae_b = train_autoencoder(&corpus_b, &g_b, &schema(Dialect::B), 6, &ae_cfg).unwrap();
        let map_cfg = TrainConfig { epochs: 800, batch_size: 16, learning_rate: 0.05, momentum: 0.9, seed: 13 };
        let t = train_latent_correlation(
            &ae_a,
            &ae_b,
            &coobs,
            &g_a,
            &g_b,
            vec!["office-A2312-temp-sensor".into(), "office-A2313-temp-sensor".into()],
            &map_cfg,
        )
        .unwrap();
        for (office, kelvin) in [(0usize, 268.2), (1usize, 273.7)] {
            let m = message_a(office, kelvin, 900.0);
            let out = t.apply(&m, &g_a, &g_b).unwrap();
            let got = codec::celsius_to_kelvin(out.records[0].value.unwrap());
            assert!(
                (got - kelvin).abs() < 1.0,
                "office {office}: expected ~{kelvin}, got {got}"
            );
            assert_eq!(
                out.records[0].name.as_deref().unwrap(),
                format!("office-A231{}-temp-sensor", 2 + office)
            );
        }
    }

    #[test]
    fn latent_dispatch_rejects_reconstruction_kind() {
        let (g_a, g_b) = graphs();
        let coobs = coobs_corpus(8);
        let cfg = TrainConfig { epochs: 10, ..TrainConfig::default() };
        let corpus_a: Vec<Message> = coobs.iter().map(|c| c.source.clone()).collect();
        let corpus_b: Vec<Message> =
            coobs.iter().flat_map(|c| c.observed.iter().cloned()).collect();
        let ae_a = train_autoencoder(&corpus_a, &g_a, &schema(Dialect::A), 4, &cfg).unwrap();
        let ae_b = train_autoencoder(&corpus_b, &g_b, &schema(Dialect::B), 4, &cfg).unwrap();
        let spec = super::super::LossSpec::new(super::super::LossKind::Reconstruction);
        assert!(matches!(
            train_latent_map(&spec, &ae_a, &ae_b, &coobs, &g_a, &g_b, vec![], &cfg),
            Err(LabError::Training(_))
        ));
    }

    #[test]
    fn objective_training_descends_a_quadratic() {
        let (g_a, g_b) = graphs();
        let coobs = coobs_corpus(20);
        let cfg = TrainConfig { epochs: 200, batch_size: 8, learning_rate: 0.02, momentum: 0.9, seed: 17 };
        let corpus_a: Vec<Message> = coobs.iter().map(|c| c.source.clone()).collect();
        let corpus_b: Vec<Message> =
            coobs.iter().flat_map(|c| c.observed.iter().cloned()).collect();
        let ae_a = train_autoencoder(&corpus_a, &g_a, &schema(Dialect::A), 4, &cfg).unwrap();
        let ae_b = train_autoencoder(&corpus_b, &g_b, &schema(Dialect::B), 4, &cfg).unwrap();
        let probe = message_a(0, 268.0, 0.0);
        let objective = |t: &Translator| -> Result<f64> {
            let out = t.apply(&probe, &g_a, &g_b)?;
            let v = codec::celsius_to_kelvin(out.records[0].value.unwrap());
            Ok((v - 268.0) * (v - 268.0))
        };
        let ocfg = ObjectiveTrainConfig { iterations: 8, fd_step: 1e-3, learning_rate: 5e-4, seed: 1 };
        let (_, curve) = train_latent_objective(&ae_a, &ae_b, &[
            "office-A2312-temp-sensor".to_string(),
        ], objective, &ocfg)
        .unwrap();
        assert!(curve.last().unwrap() < curve.first().unwrap(), "curve {curve:?}");
    }
}
