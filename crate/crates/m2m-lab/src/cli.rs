//! Command-line front end: simulate episodes, generate corpora, train
//! translators along each route, evaluate, round-trip, serve, and verify
//! gradients. Failures print one machine-readable JSON object on stderr
//! and exit nonzero.

use crate::codec::{self, Dialect};
use crate::error::{LabError, Result};
use crate::harness::{self, TranslatorPair};
use crate::rng::CounterRng;
use crate::scenario::Scenario;
use crate::translator::mlp::{self, Activation, MlpMap, TrainConfig};
use crate::translator::train::{self, Autoencoder};
use crate::translator::{translator_id, LossKind, LossSpec, Translator};
use clap::{Args, Parser, Subcommand};
use serde_json::json;
use std::fs;
use std::path::{Path, PathBuf};

/// Gradient checks worse than this are a failure.
pub const GRAD_TOLERANCE: f64 = 1e-4;

#[derive(Debug, Parser)]
#[command(name = "m2m-lab", version, about = "Two control systems, two message dialects, one shared plant: simulate, train translators, evaluate")]
pub struct Cli {
    /// Output root for run directories and artifacts
    /// (default: $M2M_LAB_OUT, then ./runs).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct ScenarioArgs {
    /// Scenario JSON file; omit for the built-in four-office scenario.
    #[arg(long)]
    pub scenario: Option<PathBuf>,
    /// Override the scenario seed.
    #[arg(long)]
    pub seed: Option<u64>,
}

impl ScenarioArgs {
    pub fn load(&self) -> Result<Scenario> {
        let mut s = match &self.scenario {
            Some(path) => Scenario::from_json(&fs::read_to_string(path)?)?,
            None => Scenario::office(1),
        };
        if let Some(seed) = self.seed {
            s.seed = seed;
        }
        s.validate()?;
        Ok(s)
    }
}

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    #[arg(long, default_value_t = 400)]
    pub epochs: usize,
    #[arg(long, default_value_t = 16)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 0.05)]
    pub learning_rate: f64,
    #[arg(long, default_value_t = 0.9)]
    pub momentum: f64,
    #[arg(long, default_value_t = 1)]
    pub train_seed: u64,
}

impl TrainArgs {
    pub fn config(&self) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            batch_size: self.batch_size,
            learning_rate: self.learning_rate,
            momentum: self.momentum,
            seed: self.train_seed,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one closed-loop episode and write its run directory.
    Simulate {
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// Message path: "none", "oracle", or a translator document; a
        /// document serves its own direction and the other side gets none.
        #[arg(long, default_value = "oracle")]
        translator: String,
    },
    /// Generate an aligned ground-truth pair corpus (NDJSON).
    GenPairs {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[arg(long, default_value_t = 400)]
        count: usize,
        /// Output file (default <out>/pairs.ndjson).
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Train the supervised end-to-end translator on a pair corpus.
    TrainE2e {
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// Pair corpus NDJSON.
        #[arg(long)]
        pairs: PathBuf,
        /// Source dialect: a or b.
        #[arg(long, default_value = "a")]
        direction: String,
        /// Hidden layer widths.
        #[arg(long, value_delimiter = ',', default_value = "32")]
        hidden: Vec<usize>,
        #[command(flatten)]
        train: TrainArgs,
        /// Output translator document (default <out>/translator-e2e.json).
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Train one dialect's autoencoder on a message corpus.
    TrainAe {
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// Message corpus NDJSON (single dialect).
        #[arg(long)]
        corpus: PathBuf,
        /// Corpus dialect: a or b.
        #[arg(long)]
        dialect: String,
        #[arg(long, default_value_t = 6)]
        latent_dim: usize,
        #[command(flatten)]
        train: TrainArgs,
        /// Output autoencoder JSON (default <out>/ae-<dialect>.json).
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Train a latent map between two autoencoders from co-observations.
    TrainLatent {
        /// Source-side autoencoder JSON.
        #[arg(long)]
        ae_src: PathBuf,
        /// Target-side autoencoder JSON.
        #[arg(long)]
        ae_dst: PathBuf,
        /// Co-observation NDJSON.
        #[arg(long)]
        coobs: PathBuf,
        /// Training objective (correlation is the pair-free route).
        #[arg(long, default_value = "correlation")]
        loss: String,
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[command(flatten)]
        train: TrainArgs,
        /// Output translator document (default <out>/translator-latent.json).
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Run an episode under a translator pair and score every objective.
    Evaluate {
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// Shorthand applied to both directions: "none" or "oracle".
        #[arg(long)]
        translator: Option<String>,
        /// A-to-B path: "none", "oracle", or a translator document.
        #[arg(long, default_value = "oracle")]
        translator_ab: String,
        /// B-to-A path: "none", "oracle", or a translator document.
        #[arg(long, default_value = "oracle")]
        translator_ba: String,
    },
    /// Translate a corpus there and back and report drift.
    Roundtrip {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[arg(long, default_value = "oracle")]
        translator_ab: String,
        #[arg(long, default_value = "oracle")]
        translator_ba: String,
        /// Dialect-A corpus NDJSON; omit to simulate one.
        #[arg(long)]
        corpus: Option<PathBuf>,
    },
    /// Serve translators over newline-delimited JSON on TCP.
    Serve {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[arg(long, default_value = "127.0.0.1:7171")]
        listen: String,
        /// Directory of translator documents to register at startup.
        #[arg(long)]
        registry: Option<PathBuf>,
    },
    /// Verify analytic gradients against finite differences.
    Gradcheck {
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

fn out_root(cli_out: &Option<PathBuf>) -> PathBuf {
    cli_out
        .clone()
        .or_else(|| std::env::var_os("M2M_LAB_OUT").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("runs"))
}

fn parse_dialect(text: &str) -> Result<Dialect> {
    match text.to_ascii_lowercase().as_str() {
        "a" => Ok(Dialect::A),
        "b" => Ok(Dialect::B),
        other => Err(LabError::Config(format!("dialect must be a or b, got {other:?}"))),
    }
}

/// Resolve one direction of the message path.
fn load_slot(spec: &str, dialect: Dialect, scenario: &Scenario) -> Result<Option<Translator>> {
    match spec {
        "none" => Ok(None),
        "oracle" => Ok(Some(Translator::oracle(dialect, scenario.eval_graph()))),
        path => {
            let t = Translator::from_doc(&fs::read_to_string(Path::new(path))?)?;
            if t.input_dialect() != dialect {
                return Err(LabError::Config(format!(
                    "translator at {path} reads dialect {}, expected {dialect}",
                    t.input_dialect()
                )));
            }
            Ok(Some(t))
        }
    }
}

fn write_with_default(
    output: Option<PathBuf>,
    root: &Path,
    default_name: &str,
    contents: &str,
) -> Result<PathBuf> {
    let path = output.unwrap_or_else(|| root.join(default_name));
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    fs::write(&path, contents)?;
    Ok(path)
}

/// Execute the parsed command; the returned code becomes the process
/// exit status.
pub fn run(cli: Cli) -> Result<i32> {
    let root = out_root(&cli.out);
    match cli.command {
        Command::Simulate { scenario, translator } => {
            let s = scenario.load()?;
            let pair = match translator.as_str() {
                "none" => TranslatorPair::none(),
                "oracle" => TranslatorPair::oracle(&s),
                path => {
                    let t = Translator::from_doc(&fs::read_to_string(Path::new(path))?)?;
                    match t.input_dialect() {
                        Dialect::A => TranslatorPair { a_to_b: Some(t), b_to_a: None },
                        Dialect::B => TranslatorPair { a_to_b: None, b_to_a: Some(t) },
                    }
                }
            };
            let log = harness::run_episode(&s, &pair)?;
            let dir = harness::write_run(&root, &s, &log, None)?;
            println!(
                "{}",
                json!({
                    "run_dir": dir,
                    "steps": log.steps.len(),
                    "messages": log.message_count(),
                    "translated": log.translated,
                    "rejected": log.rejected,
                    "dropped": log.dropped,
                })
            );
            Ok(0)
        }
        Command::GenPairs { scenario, count, output } => {
            let s = scenario.load()?;
            let pairs = harness::make_pair_corpus(&s, count)?;
            let path =
                write_with_default(output, &root, "pairs.ndjson", &codec::pairs_to_ndjson(&pairs))?;
            println!("{}", json!({ "pairs": pairs.len(), "output": path }));
            Ok(0)
        }
        Command::TrainE2e { scenario, pairs, direction, hidden, train, output } => {
            let s = scenario.load()?;
            let direction = parse_dialect(&direction)?;
            let corpus = codec::pairs_from_ndjson(&fs::read_to_string(&pairs)?)?;
            let candidates = match direction {
                Dialect::A => s.name_candidates_b(),
                Dialect::B => s.name_candidates_a(),
            };
            let t = train::train_end_to_end(
                &corpus,
                &s.graph_a(),
                &s.graph_b(),
                &s.schema_a(),
                &s.schema_b(),
                direction,
                candidates,
                &hidden,
                &train.config(),
            )?;
            let doc = t.to_doc()?;
            let path = write_with_default(output, &root, "translator-e2e.json", &doc)?;
            let final_loss = match &t {
                Translator::Learned(l) => l.training_curve.last().copied(),
                _ => None,
            };
            println!(
                "{}",
                json!({
                    "translator_id": translator_id(doc.as_bytes()),
                    "output": path,
                    "pairs": corpus.len(),
                    "final_loss": final_loss,
                })
            );
            Ok(0)
        }
        Command::TrainAe { scenario, corpus, dialect, latent_dim, train, output } => {
            let s = scenario.load()?;
            let dialect = parse_dialect(&dialect)?;
            let messages = codec::corpus_from_ndjson(&fs::read_to_string(&corpus)?, dialect)?;
            let (graph, schema) = match dialect {
                Dialect::A => (s.graph_a(), s.schema_a()),
                Dialect::B => (s.graph_b(), s.schema_b()),
            };
            let ae = train::train_autoencoder(&messages, &graph, &schema, latent_dim, &train.config())?;
            let mse = ae.reconstruction_mse(&messages, &graph)?;
            let text = serde_json::to_string(&ae).map_err(|e| LabError::Config(e.to_string()))?;
            let default_name = match dialect {
                Dialect::A => "ae-a.json",
                Dialect::B => "ae-b.json",
            };
            let path = write_with_default(output, &root, default_name, &text)?;
            println!(
                "{}",
                json!({
                    "output": path,
                    "messages": messages.len(),
                    "latent_dim": latent_dim,
                    "reconstruction_mse": mse,
                })
            );
            Ok(0)
        }
        Command::TrainLatent { ae_src, ae_dst, coobs, loss, scenario, train, output } => {
            let s = scenario.load()?;
            let ae_src: Autoencoder = serde_json::from_str(&fs::read_to_string(&ae_src)?)
                .map_err(|e| LabError::SchemaMismatch(e.to_string()))?;
            let ae_dst: Autoencoder = serde_json::from_str(&fs::read_to_string(&ae_dst)?)
                .map_err(|e| LabError::SchemaMismatch(e.to_string()))?;
            let records = train::coobs_from_ndjson(&fs::read_to_string(&coobs)?)?;
            let kind = match loss.as_str() {
                "correlation" => LossKind::Correlation,
                "causation" => LossKind::Causation,
                "abstract" => LossKind::Abstract,
                "reconstruction" => LossKind::Reconstruction,
                other => return Err(LabError::Config(format!("unknown loss {other:?}"))),
            };
            let (g_src, g_dst, candidates) = match ae_src.schema.dialect {
                Dialect::A => (s.graph_a(), s.graph_b(), s.name_candidates_b()),
                Dialect::B => (s.graph_b(), s.graph_a(), s.name_candidates_a()),
            };
            let t = train::train_latent_map(
                &LossSpec::new(kind),
                &ae_src,
                &ae_dst,
                &records,
                &g_src,
                &g_dst,
                candidates,
                &train.config(),
            )?;
            let doc = t.to_doc()?;
            let path = write_with_default(output, &root, "translator-latent.json", &doc)?;
            println!(
                "{}",
                json!({
                    "translator_id": translator_id(doc.as_bytes()),
                    "output": path,
                    "coobservations": records.len(),
                })
            );
            Ok(0)
        }
        Command::Evaluate { scenario, translator, translator_ab, translator_ba } => {
            let s = scenario.load()?;
            let (spec_ab, spec_ba) = match &translator {
                Some(both) => (both.as_str(), both.as_str()),
                None => (translator_ab.as_str(), translator_ba.as_str()),
            };
            let pair = TranslatorPair {
                a_to_b: load_slot(spec_ab, Dialect::A, &s)?,
                b_to_a: load_slot(spec_ba, Dialect::B, &s)?,
            };
            let (log, report) = harness::evaluate(&s, &pair)?;
            harness::write_run(&root, &s, &log, Some(&report))?;
            println!(
                "{}",
                serde_json::to_string_pretty(&report).map_err(|e| LabError::Config(e.to_string()))?
            );
            Ok(0)
        }
        Command::Roundtrip { scenario, translator_ab, translator_ba, corpus } => {
            let s = scenario.load()?;
            let fwd = load_slot(&translator_ab, Dialect::A, &s)?
                .ok_or_else(|| LabError::Config("round trip needs an A-to-B translator".into()))?;
            let back = load_slot(&translator_ba, Dialect::B, &s)?
                .ok_or_else(|| LabError::Config("round trip needs a B-to-A translator".into()))?;
            let messages = match corpus {
                Some(path) => codec::corpus_from_ndjson(&fs::read_to_string(&path)?, Dialect::A)?,
                None => harness::run_episode(&s, &TranslatorPair::oracle(&s))?.corpus_a,
            };
            let report = crate::translator::round_trip_check(
                &fwd,
                &back,
                &messages,
                &s.graph_a(),
                &s.graph_b(),
                &s.schema_a(),
            )?;
            println!(
                "{}",
                serde_json::to_string_pretty(&report).map_err(|e| LabError::Config(e.to_string()))?
            );
            Ok(0)
        }
        Command::Serve { scenario, listen, registry } => {
            let s = scenario.load()?;
            let state = std::sync::Arc::new(crate::service::ServiceState::new(&s));
            let mut registered = Vec::new();
            if let Some(dir) = registry {
                registered = state.load_registry_dir(&dir)?;
            }
            crate::service::install_sigint_handler();
            let handle = crate::service::serve_state(&listen, state)?;
            println!(
                "{}",
                json!({ "listening": handle.addr().to_string(), "registered": registered })
            );
            handle.shutdown_on_signal();
            Ok(0)
        }
        Command::Gradcheck { seed } => {
            let report = gradcheck(seed);
            let ok = report
                .iter()
                .all(|(_, err)| *err < GRAD_TOLERANCE);
            println!(
                "{}",
                json!({
                    "tolerance": GRAD_TOLERANCE,
                    "checks": report
                        .iter()
                        .map(|(name, err)| json!({ "net": name, "max_rel_error": err }))
                        .collect::<Vec<_>>(),
                    "ok": ok,
                })
            );
            Ok(if ok { 0 } else { 2 })
        }
    }
}

/// Compare backpropagated gradients with central finite differences on
/// representative network shapes.
pub fn gradcheck(seed: u64) -> Vec<(String, f64)> {
    let shapes: [(&str, &[usize], Activation); 3] = [
        ("linear-6x6", &[6, 6], Activation::Identity),
        ("tanh-10x8x4", &[10, 8, 4], Activation::Tanh),
        ("deep-12x8x8x3", &[12, 8, 8, 3], Activation::Tanh),
    ];
    let mut out = Vec::new();
    for (name, sizes, act) in shapes {
        let mut rng = CounterRng::new(seed, 0);
        let net = MlpMap::new(sizes, act, &mut rng);
        let din = sizes[0];
        let dout = *sizes.last().unwrap();
        let xs: Vec<Vec<f64>> = (0..8)
            .map(|_| (0..din).map(|_| rng.next_symmetric(1.0)).collect())
            .collect();
        let ts: Vec<Vec<f64>> = (0..8)
            .map(|_| (0..dout).map(|_| rng.next_symmetric(1.0)).collect())
            .collect();
        let theta = net.params();
        let err = mlp::grad_check(
            |p| {
                let mut probe = net.clone();
                probe.set_params(p);
                mlp::mse_loss_and_grad(&probe, &xs, &ts)
            },
            &theta,
        );
        out.push((name.to_string(), err));
    }
    out
}

/// One-object-per-error stderr form.
pub fn error_json(e: &LabError) -> String {
    let kind = match e {
        LabError::Config(_) => "config",
        LabError::Input(_) => "input",
        LabError::MalformedJson(_) => "malformed_json",
        LabError::UnknownKey { .. } => "unknown_key",
        LabError::UnknownUnit(_) => "unknown_unit",
        LabError::MissingField { .. } => "missing_field",
        LabError::SchemaMismatch(_) => "schema_mismatch",
        LabError::UnknownSymbol(_) => "unknown_symbol",
        LabError::Metadata(_) => "metadata",
        LabError::Incompatibility { .. } => "incompatibility",
        LabError::MissingData(_) => "missing_data",
        LabError::Numeric(_) => "numeric",
        LabError::Training(_) => "training",
        LabError::Service(_) => "service",
        LabError::Io(_) => "io",
    };
    json!({ "error": e.to_string(), "kind": kind }).to_string()
}
