//! Metadata graphs: RDF-style triples per CPS plus a deterministic
//! sub-symbolic featurizer (hashed character trigrams with 1-hop
//! neighbor smoothing) used as the side input to translators.

use crate::error::{LabError, Result};
use std::collections::{BTreeMap, BTreeSet};

pub const FEATURE_DIM: usize = 64;
const NEIGHBOR_WEIGHT: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Triple {
    pub subject: String,
    pub predicate: String,
    pub object: String,
}

impl Triple {
    pub fn new(
        subject: impl Into<String>,
        predicate: impl Into<String>,
        object: impl Into<String>,
    ) -> Self {
        Triple {
            subject: subject.into(),
            predicate: predicate.into(),
            object: object.into(),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.subject.is_empty() || self.predicate.is_empty() || self.object.is_empty() {
            return Err(LabError::Input("triple components must be nonempty".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SemanticGraph {
    pub graph_id: String,
    triples: BTreeSet<Triple>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SymbolFeature {
    pub symbol: String,
    pub vector: Vec<f64>,
}

impl SemanticGraph {
    pub fn new(graph_id: impl Into<String>) -> Self {
        SemanticGraph { graph_id: graph_id.into(), triples: BTreeSet::new() }
    }

    /// Idempotent insert; rejects triples with empty components.
    pub fn add(&mut self, t: Triple) -> Result<()> {
        t.validate()?;
        self.triples.insert(t);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }

    pub fn triples(&self) -> impl Iterator<Item = &Triple> {
        self.triples.iter()
    }

    pub fn contains(&self, t: &Triple) -> bool {
        self.triples.contains(t)
    }

    /// All symbols appearing anywhere in the triples, with their integer
    /// ids (sorted order, so ids are insertion-order independent).
    pub fn symbol_index(&self) -> BTreeMap<String, usize> {
        let mut symbols = BTreeSet::new();
        for t in &self.triples {
            symbols.insert(t.subject.clone());
            symbols.insert(t.predicate.clone());
            symbols.insert(t.object.clone());
        }
        symbols.into_iter().enumerate().map(|(i, s)| (s, i)).collect()
    }

    pub fn has_symbol(&self, symbol: &str) -> bool {
        self.triples.iter().any(|t| {
            t.subject == symbol || t.predicate == symbol || t.object == symbol
        })
    }

    /// 1-hop neighbors along subject-object edges, both directions.
    pub fn neighbors(&self, symbol: &str) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        for t in &self.triples {
            if t.subject == symbol {
                out.insert(t.object.clone());
            }
            if t.object == symbol {
                out.insert(t.subject.clone());
            }
        }
        out
    }

    /// Objects of all triples (subject, predicate, *).
    pub fn objects(&self, subject: &str, predicate: &str) -> Vec<&str> {
        self.triples
            .iter()
            .filter(|t| t.subject == subject && t.predicate == predicate)
            .map(|t| t.object.as_str())
            .collect()
    }

    /// Subjects of all triples (*, predicate, object).
    pub fn subjects(&self, predicate: &str, object: &str) -> Vec<&str> {
        self.triples
            .iter()
            .filter(|t| t.predicate == predicate && t.object == object)
            .map(|t| t.subject.as_str())
            .collect()
    }

    /// One object of (subject, predicate, *), or a metadata error naming
    /// what was missing.
    pub fn require_object(&self, subject: &str, predicate: &str) -> Result<&str> {
        self.objects(subject, predicate).first().copied().ok_or_else(|| {
            LabError::Metadata(format!("no triple <{subject}> <{predicate}> in {}", self.graph_id))
        })
    }

    /// L2-normalized trigram feature of a symbol plus 0.5x its 1-hop
    /// neighbors. Deterministic in the symbol string and neighborhood.
    pub fn symbol_features(&self, symbol: &str) -> Result<SymbolFeature> {
        if !self.has_symbol(symbol) {
            return Err(LabError::UnknownSymbol(symbol.into()));
        }
        let mut v = trigram_vector(symbol);
        for n in self.neighbors(symbol) {
            let nv = trigram_vector(&n);
            for (a, b) in v.iter_mut().zip(&nv) {
                *a += NEIGHBOR_WEIGHT * b;
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            for x in &mut v {
                *x /= norm;
            }
        }
        Ok(SymbolFeature { symbol: symbol.into(), vector: v })
    }

    /// Like `symbol_features`, but a symbol absent from the graph falls
    /// back to its bare lexical trigram vector (no neighbor context).
    /// Unit symbols live in the codec registry, not in the graphs, yet
    /// still need a feature.
    pub fn symbol_features_lenient(&self, symbol: &str) -> Vec<f64> {
        match self.symbol_features(symbol) {
            Ok(f) => f.vector,
            Err(_) => {
                let mut v = trigram_vector(symbol);
                let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                if norm > 0.0 {
                    for x in &mut v {
                        *x /= norm;
                    }
                }
                v
            }
        }
    }

    /// N-Triples-like line format: `<s> <p> <o> .`, literals quoted.
    pub fn to_ntriples(&self) -> String {
        let mut out = String::new();
        for t in &self.triples {
            out.push_str(&format!(
                "<{}> <{}> {} .\n",
                t.subject,
                t.predicate,
                format_object(&t.object)
            ));
        }
        out
    }

    pub fn from_ntriples(graph_id: impl Into<String>, text: &str) -> Result<SemanticGraph> {
        let mut graph = SemanticGraph::new(graph_id);
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let stripped = line.strip_suffix('.').map(str::trim_end).ok_or_else(|| {
                LabError::Input(format!("line {}: missing terminating '.'", lineno + 1))
            })?;
            let (subject, rest) = take_term(stripped, lineno)?;
            let (predicate, rest) = take_term(rest, lineno)?;
            let (object, rest) = take_term(rest, lineno)?;
            if !rest.trim().is_empty() {
                return Err(LabError::Input(format!("line {}: trailing tokens", lineno + 1)));
            }
            graph.add(Triple::new(subject, predicate, object))?;
        }
        Ok(graph)
    }
}

fn format_object(o: &str) -> String {
    let plain = o
        .chars()
        .all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | ':' | '#'));
    if plain {
        format!("<{o}>")
    } else {
        format!("\"{}\"", o.replace('\\', "\\\\").replace('"', "\\\""))
    }
}

fn take_term(input: &str, lineno: usize) -> Result<(String, &str)> {
    let input = input.trim_start();
    let err = || LabError::Input(format!("line {}: malformed term", lineno + 1));
    if let Some(rest) = input.strip_prefix('<') {
        let end = rest.find('>').ok_or_else(err)?;
        Ok((rest[..end].to_string(), &rest[end + 1..]))
    } else if let Some(rest) = input.strip_prefix('"') {
        let mut out = String::new();
        let mut chars = rest.char_indices();
        while let Some((i, c)) = chars.next() {
            match c {
                '\\' => {
                    let (_, esc) = chars.next().ok_or_else(err)?;
                    out.push(esc);
                }
                '"' => return Ok((out, &rest[i + 1..])),
                _ => out.push(c),
            }
        }
        Err(err())
    } else {
        Err(err())
    }
}

/// FNV-1a hash of a character n-gram.
fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= *b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Unnormalized hashed-trigram vector: each trigram adds +/-1 at
/// `hash % FEATURE_DIM`, sign from the hash's parity bit. Symbols shorter
/// than three characters contribute a single whole-string gram.
pub fn trigram_vector(symbol: &str) -> Vec<f64> {
    let mut v = vec![0.0; FEATURE_DIM];
    let chars: Vec<char> = symbol.chars().collect();
    let mut add = |gram: &str| {
        let h = fnv1a(gram.as_bytes());
        let dim = (h % FEATURE_DIM as u64) as usize;
        let sign = if h.count_ones() % 2 == 0 { 1.0 } else { -1.0 };
        v[dim] += sign;
    };
    if chars.len() < 3 {
        if !chars.is_empty() {
            add(symbol);
        }
    } else {
        for w in chars.windows(3) {
            add(&w.iter().collect::<String>());
        }
    }
    v
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}
