//! Newline-delimited JSON translation service over TCP. One request per
//! line, one response per line; malformed input gets an error response
//! and the connection stays open. Translators are registered by content
//! hash and applied against the service's scenario graphs.
//!
//! Requests:
//!   {"op":"register","document":"<translator doc JSON>"}
//!   {"op":"list"}
//!   {"op":"translate","translator_id":"<hex>","message":"<message JSON>"}
//!
//! Responses always carry `status` first and measured `latency_us` last.

use crate::error::{LabError, Result};
use crate::scenario::Scenario;
use crate::semgraph::SemanticGraph;
use crate::translator::{translator_id, Translator};
use crate::codec;
use serde_json::{json, Value};
use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Write};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, RwLock};
use std::thread;
use std::time::{Duration, Instant};

pub const BUILTIN_ORACLE_AB: &str = "oracle-a-to-b";
pub const BUILTIN_ORACLE_BA: &str = "oracle-b-to-a";

struct Graphs {
    g_a: SemanticGraph,
    g_b: SemanticGraph,
}

type Registry = Arc<RwLock<BTreeMap<String, Translator>>>;

/// Shared service state; `handle_line` is the whole protocol, so it can
/// be exercised without sockets.
pub struct ServiceState {
    registry: Registry,
    graphs: Graphs,
}

impl ServiceState {
    /// Registry pre-seeded with the engineered oracles under well-known ids.
    pub fn new(scenario: &Scenario) -> ServiceState {
        let eval = scenario.eval_graph();
        let mut map = BTreeMap::new();
        map.insert(
            BUILTIN_ORACLE_AB.to_string(),
            Translator::oracle(codec::Dialect::A, eval.clone()),
        );
        map.insert(
            BUILTIN_ORACLE_BA.to_string(),
            Translator::oracle(codec::Dialect::B, eval),
        );
        ServiceState {
            registry: Arc::new(RwLock::new(map)),
            graphs: Graphs { g_a: scenario.graph_a(), g_b: scenario.graph_b() },
        }
    }

    /// Register every translator document (`*.json`) found in a directory.
    pub fn load_registry_dir(&self, dir: &std::path::Path) -> Result<Vec<String>> {
        let mut ids = Vec::new();
        let mut entries: Vec<_> = std::fs::read_dir(dir)?
            .collect::<std::io::Result<Vec<_>>>()?
            .into_iter()
            .map(|e| e.path())
            .filter(|p| p.extension().is_some_and(|e| e == "json"))
            .collect();
        entries.sort();
        for path in entries {
            let text = std::fs::read_to_string(&path)?;
            ids.push(self.register(&text)?);
        }
        Ok(ids)
    }

    pub fn register(&self, document: &str) -> Result<String> {
        let translator = Translator::from_doc(document)?;
        let id = translator_id(document.as_bytes());
        self.registry
            .write()
            .expect("registry lock poisoned")
            .insert(id.clone(), translator);
        Ok(id)
    }

    pub fn ids(&self) -> Vec<String> {
        self.registry
            .read()
            .expect("registry lock poisoned")
            .keys()
            .cloned()
            .collect()
    }

    /// Serve one request line, returning the response line (no newline).
    pub fn handle_line(&self, line: &str) -> String {
        let started = Instant::now();
        let (status, payload) = match self.dispatch(line) {
            Ok(payload) => ("ok", payload),
            Err(e) => {
                let status = match &e {
                    LabError::MalformedJson(_) | LabError::MissingField { .. } => "parse_error",
                    LabError::SchemaMismatch(_)
                    | LabError::UnknownKey { .. }
                    | LabError::UnknownUnit(_)
                    | LabError::Incompatibility { .. } => "schema_error",
                    LabError::UnknownSymbol(_) => "unknown_translator",
                    _ => "internal",
                };
                (status, json!({ "error": e.to_string() }))
            }
        };
        let mut response = json!({ "status": status });
        let obj = response.as_object_mut().expect("object literal");
        for (k, v) in payload.as_object().into_iter().flatten() {
            obj.insert(k.clone(), v.clone());
        }
        obj.insert("latency_us".into(), json!(started.elapsed().as_micros() as u64));
        response.to_string()
    }

    fn dispatch(&self, line: &str) -> Result<Value> {
        let req: Value =
            serde_json::from_str(line).map_err(|e| LabError::MalformedJson(e.to_string()))?;
        let op = req
            .get("op")
            .and_then(Value::as_str)
            .ok_or_else(|| LabError::MissingField { field: "op".into(), index: 0 })?;
        match op {
            "register" => {
                let doc = req
                    .get("document")
                    .and_then(Value::as_str)
                    .ok_or_else(|| LabError::MissingField { field: "document".into(), index: 0 })?;
                let id = self.register(doc)?;
                Ok(json!({ "translator_id": id }))
            }
            "list" => Ok(json!({ "translators": self.ids() })),
            "translate" => {
                let id = req
                    .get("translator_id")
                    .and_then(Value::as_str)
                    .ok_or_else(|| LabError::MissingField { field: "translator_id".into(), index: 0 })?;
                let text = req
                    .get("message")
                    .and_then(Value::as_str)
                    .ok_or_else(|| LabError::MissingField { field: "message".into(), index: 0 })?;
                let registry = self.registry.read().expect("registry lock poisoned");
                let translator = registry
                    .get(id)
                    .ok_or_else(|| LabError::UnknownSymbol(id.to_string()))?;
                let message = codec::parse(text, translator.input_dialect())?;
                let out = translator.apply(&message, &self.graphs.g_a, &self.graphs.g_b)?;
                Ok(json!({ "translated": codec::serialize(&out) }))
            }
            other => Err(LabError::MalformedJson(format!("unknown op {other:?}"))),
        }
    }
}

static SIGINT_FLAG: AtomicBool = AtomicBool::new(false);

extern "C" fn on_sigint(_: libc::c_int) {
    SIGINT_FLAG.store(true, Ordering::SeqCst);
}

/// Route SIGINT to a clean accept-loop exit instead of process death.
pub fn install_sigint_handler() {
    unsafe {
        libc::signal(libc::SIGINT, on_sigint as *const () as libc::sighandler_t);
    }
}

pub struct ServiceHandle {
    addr: SocketAddr,
    shutdown: Arc<AtomicBool>,
    join: thread::JoinHandle<()>,
}

impl ServiceHandle {
    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn shutdown(self) {
        self.shutdown.store(true, Ordering::SeqCst);
        let _ = self.join.join();
    }

    /// Block until the accept loop exits (e.g. on SIGINT).
    pub fn shutdown_on_signal(self) {
        let _ = self.join.join();
    }
}

/// Bind and serve in a background thread; one handler thread per
/// connection. The accept loop exits on `shutdown()` or SIGINT.
pub fn serve(bind: &str, scenario: &Scenario) -> Result<ServiceHandle> {
    serve_state(bind, Arc::new(ServiceState::new(scenario)))
}

pub fn serve_state(bind: &str, state: Arc<ServiceState>) -> Result<ServiceHandle> {
    let listener = TcpListener::bind(bind)
        .map_err(|e| LabError::Service(format!("bind {bind}: {e}")))?;
    let addr = listener
        .local_addr()
        .map_err(|e| LabError::Service(e.to_string()))?;
    listener
        .set_nonblocking(true)
        .map_err(|e| LabError::Service(e.to_string()))?;
    let shutdown = Arc::new(AtomicBool::new(false));
    let flag = shutdown.clone();
    let join = thread::spawn(move || {
        loop {
            if flag.load(Ordering::SeqCst) || SIGINT_FLAG.load(Ordering::SeqCst) {
                break;
            }
            match listener.accept() {
                Ok((stream, _)) => {
                    let state = state.clone();
                    thread::spawn(move || handle_connection(stream, state));
                }
                Err(e) if e.kind() == std::io::ErrorKind::WouldBlock => {
                    thread::sleep(Duration::from_millis(20));
                }
                Err(_) => break,
            }
        }
    });
    Ok(ServiceHandle { addr, shutdown, join })
}

fn handle_connection(stream: TcpStream, state: Arc<ServiceState>) {
    let mut writer = match stream.try_clone() {
        Ok(w) => w,
        Err(_) => return,
    };
    let reader = BufReader::new(stream);
    for line in reader.lines() {
        let Ok(line) = line else { break };
        if line.trim().is_empty() {
            continue;
        }
        let response = state.handle_line(&line);
        if writer
            .write_all(response.as_bytes())
            .and_then(|_| writer.write_all(b"\n"))
            .and_then(|_| writer.flush())
            .is_err()
        {
            break;
        }
    }
}
