//! Translator functions between the two message domains: the engineered
//! oracle (field mapping + exact unit conversion via alignment metadata),
//! learned end-to-end and latent-map translators, and the message-level
//! loss functions. Operational losses that need simulation rollouts
//! (causation, abstract) live in the harness.

pub mod mlp;
pub mod train;

use crate::codec::{self, Dialect, DialectSchema, Message};
use crate::cps::resolve_office_by_coords;
use crate::error::{LabError, Result};
use crate::semgraph::{SemanticGraph, FEATURE_DIM};
use mlp::MlpMap;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use train::Standardizer;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    Causation,
    Correlation,
    Abstract,
    Reconstruction,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossSpec {
    pub kind: LossKind,
    pub window: usize,
    pub weight: f64,
}

impl LossSpec {
    pub fn new(kind: LossKind) -> LossSpec {
        LossSpec { kind, window: 1, weight: 1.0 }
    }

    pub fn validate(&self) -> Result<()> {
        if self.window < 1 {
            return Err(LabError::Config("loss window must be >= 1".into()));
        }
        Ok(())
    }
}

/// Output side of a learned translator: target dialect schema plus the
/// closed set of symbols the nearest-neighbor lookup may emit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputSchema {
    pub schema: DialectSchema,
    pub name_candidates: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LearnedKind {
    EndToEnd,
    LatentMap,
}

/// A trained parametric map from source-dialect features to
/// target-dialect numeric fields plus a symbol embedding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnedTranslator {
    pub kind: LearnedKind,
    pub input_schema: DialectSchema,
    pub output_schema: OutputSchema,
    pub in_standardizer: Standardizer,
    pub out_standardizer: Standardizer,
    pub net: MlpMap,
    pub training_curve: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Translator {
    /// Engineered baseline: resolves the office through evaluation-only
    /// alignment triples and converts units exactly.
    Oracle { from: Dialect, eval_graph: SemanticGraph },
    Learned(LearnedTranslator),
    /// Emits the same message regardless of input; a degenerate baseline.
    Constant { from: Dialect, output: Message },
}

impl Translator {
    pub fn oracle(from: Dialect, eval_graph: SemanticGraph) -> Translator {
        Translator::Oracle { from, eval_graph }
    }

    pub fn input_dialect(&self) -> Dialect {
        match self {
            Translator::Oracle { from, .. } => *from,
            Translator::Learned(t) => t.input_schema.dialect,
            Translator::Constant { from, .. } => *from,
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            Translator::Oracle { .. } => "oracle",
            Translator::Learned(t) => match t.kind {
                LearnedKind::EndToEnd => "end_to_end",
                LearnedKind::LatentMap => "latent_map",
            },
            Translator::Constant { .. } => "constant",
        }
    }

    /// Translate one message. The source graph supplies symbol features
    /// for the input; the target graph grounds the emitted symbol.
    pub fn apply(
        &self,
        m: &Message,
        g_a: &SemanticGraph,
        g_b: &SemanticGraph,
    ) -> Result<Message> {
        if m.dialect != self.input_dialect() {
            return Err(LabError::SchemaMismatch(format!(
                "translator expects dialect {}, got {}",
                self.input_dialect(),
                m.dialect
            )));
        }
        match self {
            Translator::Oracle { eval_graph, .. } => {
                let out = oracle_translate(m, eval_graph)?;
                Ok(out.into_iter().next().expect("oracle emits one message"))
            }
            Translator::Constant { output, .. } => Ok(output.clone()),
            Translator::Learned(t) => {
                let (g_src, g_dst) = match t.input_schema.dialect {
                    Dialect::A => (g_a, g_b),
                    Dialect::B => (g_b, g_a),
                };
                apply_learned(t, m, g_src, g_dst)
            }
        }
    }
}

fn apply_learned(
    t: &LearnedTranslator,
    m: &Message,
    g_src: &SemanticGraph,
    g_dst: &SemanticGraph,
) -> Result<Message> {
    let features = train::message_features(m, &t.input_schema, g_src)?;
    let x = t.in_standardizer.transform(&features);
    let y = t.out_standardizer.inverse(&t.net.forward(&x));
    if !y.iter().all(|v| v.is_finite()) {
        return Err(LabError::Numeric("translator produced non-finite output".into()));
    }
    // The output starts with the numeric fields followed by the primary
    // symbol embedding; latent-route nets append further symbol embeddings
    // (the full target feature vector) which the lookup ignores.
    let out_schema = &t.output_schema.schema;
    let numeric_len = out_schema.numeric_len();
    if y.len() < numeric_len + FEATURE_DIM {
        return Err(LabError::SchemaMismatch(format!(
            "network output length {} is shorter than schema ({numeric_len} + {FEATURE_DIM})",
            y.len()
        )));
    }
    let embedding = &y[numeric_len..numeric_len + FEATURE_DIM];
    let symbol = nearest_symbol(embedding, &t.output_schema.name_candidates, g_dst)?;
    let epoch = out_schema.epoch;
    match out_schema.dialect {
        Dialect::B => Ok(codec::make_dialect_b(&symbol, y[0], epoch + y[1])),
        Dialect::A => Ok(codec::make_dialect_a(&symbol, epoch + y[3], y[0], y[1], y[2])),
    }
}

/// Nearest candidate symbol in feature space by Euclidean distance;
/// distances equal up to rounding noise tie-break to the candidate with
/// the lowest symbol index.
pub fn nearest_symbol(
    embedding: &[f64],
    candidates: &[String],
    graph: &SemanticGraph,
) -> Result<String> {
    if candidates.is_empty() {
        return Err(LabError::Config("no candidate symbols for output lookup".into()));
    }
    const TIE_EPS: f64 = 1e-9;
    let index = graph.symbol_index();
    let mut best: Option<(f64, usize, &String)> = None;
    for cand in candidates {
        let feat = graph.symbol_features(cand)?;
        let dist: f64 = feat
            .vector
            .iter()
            .zip(embedding)
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        let rank = *index.get(cand).unwrap_or(&usize::MAX);
        let better = match best {
            None => true,
            Some((bd, br, _)) => {
                dist + TIE_EPS < bd || ((dist - bd).abs() <= TIE_EPS && rank < br)
            }
        };
        if better {
            best = Some((dist, rank, cand));
        }
    }
    Ok(best.expect("candidates nonempty").2.clone())
}

/// Engineered translator: map fields, convert units exactly, resolve the
/// counterpart identifiers through the evaluation alignment graph.
/// Returns a list to leave room for one-to-many translations; the
/// current mapping always emits exactly one message.
pub fn oracle_translate(m: &Message, eval_graph: &SemanticGraph) -> Result<Vec<Message>> {
    match m.dialect {
        Dialect::A => {
            let lon = m.records[1].value.expect("validated dialect A");
            let lat = m.records[2].value.expect("validated dialect A");
            let office = resolve_office_by_coords(eval_graph, lon, lat)
                .map_err(|_| LabError::MissingData(format!("no office aligned at lon {lon}, lat {lat}")))?;
            let name = eval_graph
                .require_object(&office, "sensorName")
                .map_err(|_| LabError::MissingData(format!("no sensor name aligned for {office}")))?;
            let kelvin = m.records[3].value.expect("validated dialect A");
            let bt = m.records[0].base_time.expect("validated dialect A");
            Ok(vec![codec::make_dialect_b(name, codec::kelvin_to_celsius(kelvin), bt)])
        }
        Dialect::B => {
            let rec = &m.records[0];
            let name = rec.name.as_deref().expect("validated dialect B");
            let offices = eval_graph.subjects("sensorName", name);
            let office = offices.first().ok_or_else(|| {
                LabError::MissingData(format!("no office aligned to sensor {name:?}"))
            })?;
            let uri = eval_graph
                .require_object(office, "serviceUri")
                .map_err(|_| LabError::MissingData(format!("no service URI aligned for {office}")))?;
            let lon: f64 = eval_graph
                .require_object(office, "hasLon")?
                .parse()
                .map_err(|_| LabError::Metadata("hasLon literal is not a number".into()))?;
            let lat: f64 = eval_graph
                .require_object(office, "hasLat")?
                .parse()
                .map_err(|_| LabError::Metadata("hasLat literal is not a number".into()))?;
            let celsius = rec.value.expect("validated dialect B");
            let t = rec.time.expect("validated dialect B");
            Ok(vec![codec::make_dialect_a(uri, t, lon, lat, codec::celsius_to_kelvin(celsius))])
        }
    }
}

// ---------------------------------------------------------------------------
// Message-level losses

/// Mean squared error over the numeric views plus one penalty unit per
/// mismatched symbolic field.
pub fn loss_reconstruction(m_hat: &Message, m_ref: &Message, schema: &DialectSchema) -> Result<f64> {
    if m_hat.dialect != m_ref.dialect {
        return Err(LabError::SchemaMismatch("reconstruction loss needs matching dialects".into()));
    }
    let (num_hat, sym_hat) = codec::numeric_view(m_hat, schema)?;
    let (num_ref, sym_ref) = codec::numeric_view(m_ref, schema)?;
    let mse = num_hat
        .iter()
        .zip(&num_ref)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / num_hat.len() as f64;
    let mismatches = sym_hat.iter().zip(&sym_ref).filter(|(a, b)| a != b).count();
    Ok(mse + mismatches as f64)
}

/// MSE between co-located, co-timed reading windows, both in K.
pub fn loss_correlation(y_a: &[f64], y_b_hat: &[f64]) -> Result<f64> {
    if y_a.is_empty() {
        return Err(LabError::Input("correlation loss window is empty".into()));
    }
    if y_a.len() != y_b_hat.len() {
        return Err(LabError::Input(format!(
            "window lengths differ: {} vs {}",
            y_a.len(),
            y_b_hat.len()
        )));
    }
    Ok(y_a
        .iter()
        .zip(y_b_hat)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / y_a.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundTripReport {
    pub count: usize,
    pub mean_drift: f64,
    pub max_drift: f64,
    pub symbol_preservation: f64,
}

/// Translate each message A->B->A (or B->A->B) and report how far the
/// reading drifted (in K) and whether the symbolic fields survived. The
/// empty corpus yields an empty report.
pub fn round_trip_check(
    t_fwd: &Translator,
    t_back: &Translator,
    corpus: &[Message],
    g_a: &SemanticGraph,
    g_b: &SemanticGraph,
    schema: &DialectSchema,
) -> Result<RoundTripReport> {
    let mut drifts = Vec::with_capacity(corpus.len());
    let mut preserved = 0usize;
    for m in corpus {
        let over = t_fwd.apply(m, g_a, g_b)?;
        let back = t_back.apply(&over, g_a, g_b)?;
        let (_, sym_orig) = codec::numeric_view(m, schema)?;
        let (_, sym_back) = codec::numeric_view(&back, schema)?;
        let drift = (train::value_kelvin(m)? - train::value_kelvin(&back)?).abs();
        drifts.push(drift);
        if sym_orig == sym_back {
            preserved += 1;
        }
    }
    if drifts.is_empty() {
        return Ok(RoundTripReport { count: 0, mean_drift: 0.0, max_drift: 0.0, symbol_preservation: 1.0 });
    }
    Ok(RoundTripReport {
        count: drifts.len(),
        mean_drift: drifts.iter().sum::<f64>() / drifts.len() as f64,
        max_drift: drifts.iter().cloned().fold(0.0, f64::max),
        symbol_preservation: preserved as f64 / drifts.len() as f64,
    })
}

// ---------------------------------------------------------------------------
// Persistence

/// Versioned on-disk form of a learned translator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranslatorDoc {
    pub version: u32,
    #[serde(flatten)]
    pub translator: LearnedTranslator,
}

pub const TRANSLATOR_DOC_VERSION: u32 = 1;

impl Translator {
    /// Serialize a learned translator to its JSON document.
    pub fn to_doc(&self) -> Result<String> {
        match self {
            Translator::Learned(t) => {
                let doc = TranslatorDoc { version: TRANSLATOR_DOC_VERSION, translator: t.clone() };
                serde_json::to_string(&doc).map_err(|e| LabError::Config(e.to_string()))
            }
            _ => Err(LabError::Config("only learned translators are persisted".into())),
        }
    }

    pub fn from_doc(text: &str) -> Result<Translator> {
        let doc: TranslatorDoc =
            serde_json::from_str(text).map_err(|e| LabError::SchemaMismatch(e.to_string()))?;
        if doc.version != TRANSLATOR_DOC_VERSION {
            return Err(LabError::SchemaMismatch(format!(
                "unsupported translator document version {}",
                doc.version
            )));
        }
        let t = doc.translator;
        t.net.validate()?;
        let expect_in = t.input_schema.numeric_len() + FEATURE_DIM * t.input_schema.symbol_count();
        if t.net.in_dim() != expect_in {
            return Err(LabError::SchemaMismatch(format!(
                "network input {} does not match schema ({expect_in})",
                t.net.in_dim()
            )));
        }
        let min_out = t.output_schema.schema.numeric_len() + FEATURE_DIM;
        if t.net.out_dim() < min_out {
            return Err(LabError::SchemaMismatch(format!(
                "network output {} is shorter than schema ({min_out})",
                t.net.out_dim()
            )));
        }
        if t.in_standardizer.mean.len() != expect_in
            || t.out_standardizer.mean.len() != t.net.out_dim()
        {
            return Err(LabError::SchemaMismatch("standardizer length mismatch".into()));
        }
        Ok(Translator::Learned(t))
    }
}

/// Content address of a translator document: hex SHA-256 of its bytes.
pub fn translator_id(doc_bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(doc_bytes))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::samples;
    use crate::semgraph::Triple;

    pub fn eval_graph() -> SemanticGraph {
        let mut g = SemanticGraph::new("eval");
        g.add(Triple::new("office-A2312", "hasLon", "65.61721")).unwrap();
        g.add(Triple::new("office-A2312", "hasLat", "22.13683")).unwrap();
        g.add(Triple::new("office-A2312", "serviceUri", "127.0.0.1/temp-service")).unwrap();
        g.add(Triple::new("office-A2312", "sensorName", "office-A2312-temp-sensor")).unwrap();
        g
    }

    #[test]
    fn oracle_maps_sample_a_to_dialect_b() {
        let m = codec::parse(samples::MESSAGE_A, Dialect::A).unwrap();
        let out = oracle_translate(&m, &eval_graph()).unwrap();
        assert_eq!(out.len(), 1);
        let rec = &out[0].records[0];
        assert_eq!(rec.name.as_deref(), Some("office-A2312-temp-sensor"));
        assert_eq!(rec.value, Some(253.0 - 273.15));
        assert!((rec.value.unwrap() - (-20.15)).abs() < 1e-12);
        assert_eq!(rec.time, Some(1549359472.0));
    }

    #[test]
    fn reverse_oracle_recovers_kelvin_exactly() {
        let m = codec::parse(samples::MESSAGE_A, Dialect::A).unwrap();
        let b = oracle_translate(&m, &eval_graph()).unwrap().remove(0);
        let back = oracle_translate(&b, &eval_graph()).unwrap().remove(0);
        assert_eq!(back.records[3].value, Some(253.0));
        assert_eq!(back, m);
    }

    #[test]
    fn unaligned_location_is_missing_data() {
        let m = codec::make_dialect_a("svc", 0.0, 1.0, 2.0, 280.0);
        assert!(matches!(
            oracle_translate(&m, &eval_graph()),
            Err(LabError::MissingData(_))
        ));
    }

    #[test]
    fn apply_dispatches_to_oracle() {
        let m = codec::parse(samples::MESSAGE_A, Dialect::A).unwrap();
        let t = Translator::oracle(Dialect::A, eval_graph());
        let g = SemanticGraph::new("unused");
        let out = t.apply(&m, &g, &g).unwrap();
        assert_eq!(out, oracle_translate(&m, &eval_graph()).unwrap()[0]);
        // wrong-direction input rejected
        let b = codec::parse(samples::MESSAGE_B, Dialect::B).unwrap();
        assert!(t.apply(&b, &g, &g).is_err());
    }

    #[test]
    fn reconstruction_loss_arithmetic() {
        let schema = DialectSchema { dialect: Dialect::B, epoch: 1549359472.0 };
        let m = codec::parse(samples::MESSAGE_B, Dialect::B).unwrap();
        assert_eq!(loss_reconstruction(&m, &m, &schema).unwrap(), 0.0);
        // one of two numeric slots off by 1.0 -> 0.5
        let mut shifted = m.clone();
        shifted.records[0].value = Some(-19.4);
        assert_eq!(loss_reconstruction(&shifted, &m, &schema).unwrap(), 0.5);
        // symbol mismatch only -> one penalty unit
        let mut renamed = m.clone();
        renamed.records[0].name = Some("office-A2313-temp-sensor".into());
        assert_eq!(loss_reconstruction(&renamed, &m, &schema).unwrap(), 1.0);
        // dialect mismatch rejected
        let a = codec::parse(samples::MESSAGE_A, Dialect::A).unwrap();
        assert!(loss_reconstruction(&a, &m, &schema).is_err());
    }

    #[test]
    fn correlation_loss_arithmetic() {
        assert_eq!(loss_correlation(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        let w: Vec<f64> = vec![280.0; 10];
        let shifted: Vec<f64> = w.iter().map(|v| v + 0.25).collect();
        assert!((loss_correlation(&w, &shifted).unwrap() - 0.0625).abs() < 1e-12);
        assert!(loss_correlation(&[], &[]).is_err());
        assert!(loss_correlation(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn oracle_round_trip_has_zero_drift() {
        let m = codec::parse(samples::MESSAGE_A, Dialect::A).unwrap();
        let t_ab = Translator::oracle(Dialect::A, eval_graph());
        let t_ba = Translator::oracle(Dialect::B, eval_graph());
        let g = SemanticGraph::new("unused");
        let schema = DialectSchema { dialect: Dialect::A, epoch: 1549359472.0 };
        let report = round_trip_check(&t_ab, &t_ba, &[m], &g, &g, &schema).unwrap();
        assert_eq!(report.mean_drift, 0.0);
        assert_eq!(report.symbol_preservation, 1.0);
        // empty corpus -> empty report
        let empty = round_trip_check(&t_ab, &t_ba, &[], &g, &g, &schema).unwrap();
        assert_eq!(empty.count, 0);
    }

    #[test]
    fn loss_spec_window_validated() {
        assert!(LossSpec { kind: LossKind::Correlation, window: 0, weight: 1.0 }.validate().is_err());
        assert!(LossSpec::new(LossKind::Causation).validate().is_ok());
    }
}
