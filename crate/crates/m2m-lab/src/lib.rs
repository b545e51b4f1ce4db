//! A laboratory for machine-to-machine semantic interoperability: two
//! control systems share one simulated thermal plant but speak different
//! message dialects, and translator functions — engineered or learned —
//! bridge them. The crate provides the plant, the dialect codecs, the
//! semantic graphs, the translators and their training routes, the
//! evaluation harness, and a small translation service.

pub mod cli;
pub mod codec;
pub mod cps;
pub mod env;
pub mod error;
pub mod harness;
pub mod scenario;
pub mod rng;
pub mod semgraph;
pub mod service;
pub mod translator;
