//! Command-line front end: argument parsing, dispatch and output documents.

pub mod args;
mod commands;
pub mod output;
mod verify;

use std::ffi::OsString;
use std::time::Instant;

use bgwscale_core::{Error, ModelSpec, QuadConfig};
use clap::Parser;
use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};

use args::{Cli, OutFormat};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILED: i32 = 1;
pub const EXIT_REFUSED: i32 = 2;
pub const EXIT_USAGE: i32 = 64;

/// Result of one invocation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outcome {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

#[derive(Debug)]
pub(crate) enum CliError {
    Usage(String),
    Core(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

impl CliError {
    fn code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Core(Error::Format(_)) => EXIT_USAGE,
            CliError::Core(Error::Quadrature(_)) => EXIT_FAILED,
            CliError::Core(_) => EXIT_REFUSED,
        }
    }

    fn document(&self) -> Value {
        match self {
            CliError::Usage(msg) => json!({"kind": "usage", "reason": msg}),
            CliError::Core(e) => {
                let kind = match e {
                    Error::Domain { .. } => "domain",
                    Error::NoImmigration => "no_immigration",
                    Error::InvalidModel(_) => "invalid_model",
                    Error::UnsupportedRegime { .. } => "unsupported_regime",
                    Error::Precondition(_) => "precondition",
                    Error::Singularity(_) => "singularity",
                    Error::Divergent(_) => "divergent",
                    Error::Quadrature(_) => "quadrature",
                    Error::Admissibility { .. } => "admissibility",
                    Error::Format(_) => "model_format",
                };
                let mut doc = json!({"kind": kind, "reason": e.to_string()});
                if let Error::UnsupportedRegime { inequality, .. } = e {
                    doc["inequality"] = json!(inequality);
                }
                doc
            }
        }
    }
}

pub(crate) type CliResult<T> = Result<T, CliError>;

/// Result payload: a table of rows or a free-form document.
pub(crate) enum Body {
    Rows(Vec<Map<String, Value>>),
    Doc(Value),
}

pub(crate) struct Report {
    pub query: Value,
    pub body: Body,
    pub diagnostics: Value,
    /// Exit code on success; `verify` uses 1 for a failed suite.
    pub code: i32,
}

impl Report {
    pub fn new(query: Value, body: Body, diagnostics: Value) -> Self {
        Report { query, body, diagnostics, code: EXIT_OK }
    }
}

pub(crate) struct Ctx {
    pub out: OutFormat,
    pub quad: QuadConfig,
    pub digest: Option<String>,
}

impl Ctx {
    pub fn load(&mut self, path: &std::path::Path) -> CliResult<ModelSpec> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read model {}: {e}", path.display())))?;
        let spec = ModelSpec::from_json(&text)?;
        self.digest = Some(model_digest(&spec));
        Ok(spec)
    }
}

/// `sha256:` digest of the normalized model document.
pub fn model_digest(spec: &ModelSpec) -> String {
    format!("sha256:{}", hex::encode(Sha256::digest(spec.to_json().as_bytes())))
}

pub(crate) fn row(pairs: Value) -> Map<String, Value> {
    match pairs {
        Value::Object(m) => m,
        other => {
            let mut m = Map::new();
            m.insert("value".into(), other);
            m
        }
    }
}

fn command_name(cli: &Cli) -> String {
    use args::{Command::*, ControlAction as C, ModelAction as M, PassageAction as P};
    match &cli.command {
        Model { action: M::Check(_) } => "model check".into(),
        Model { action: M::Classify(_) } => "model classify".into(),
        Scale(a) => format!("scale {}", format!("{:?}", a.kind).to_lowercase()),
        Passage { action } => {
            let name = match action {
                P::Lt(_) => "lt",
                P::Prob(_) => "prob",
                P::Mean(_) => "mean",
                P::Explosion { .. } => "explosion",
                P::Atmin { .. } => "atmin",
                P::Condition { .. } => "condition",
                P::Tilt { .. } => "tilt",
                P::Avalanche { .. } => "avalanche",
            };
            format!("passage {name}")
        }
        Control { action } => {
            let name = match action {
                C::Value { .. } => "value",
                C::Gap { .. } => "gap",
                C::Bellman { .. } => "bellman",
                C::Simulate { .. } => "simulate",
            };
            format!("control {name}")
        }
        Simulate(a) => format!("simulate {}", format!("{:?}", a.estimator).to_lowercase()),
        Verify(a) => format!("verify {}", format!("{:?}", a.suite).to_lowercase()),
    }
}

fn render(
    out: OutFormat,
    command: &str,
    ctx: &Ctx,
    result: &CliResult<Report>,
    wall: Option<f64>,
) -> CliResult<String> {
    let mut doc = Map::new();
    doc.insert("command".into(), json!(command));
    if let Some(d) = &ctx.digest {
        doc.insert("model_digest".into(), json!(d));
    }
    if let Some(w) = wall {
        doc.insert("wall_time_s".into(), json!(w));
    }
    match result {
        Ok(report) => {
            if out == OutFormat::Csv {
                let rows = match &report.body {
                    Body::Rows(rows) => rows.clone(),
                    Body::Doc(Value::Object(m)) if m.values().all(|v| !v.is_object() && !v.is_array()) => {
                        vec![m.clone()]
                    }
                    Body::Doc(_) => return Err(CliError::Usage(format!("{command} has no CSV form; use --out json"))),
                };
                return Ok(output::to_csv(&rows));
            }
            doc.insert("query".into(), report.query.clone());
            let result = match &report.body {
                Body::Rows(rows) if rows.len() == 1 => Value::Object(rows[0].clone()),
                Body::Rows(rows) => Value::Array(rows.iter().cloned().map(Value::Object).collect()),
                Body::Doc(v) => v.clone(),
            };
            doc.insert("result".into(), result);
            doc.insert("diagnostics".into(), report.diagnostics.clone());
        }
        Err(e) => {
            doc.insert("error".into(), e.document());
        }
    }
    Ok(output::to_json(&Value::Object(doc)) + "\n")
}

/// Parses `argv` (including the program name) and runs one command.
pub fn run<I, T>(argv: I) -> Outcome
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    Outcome { code: EXIT_OK, stdout: text, stderr: String::new() }
                }
                _ => Outcome { code: EXIT_USAGE, stdout: String::new(), stderr: text },
            };
        }
    };
    let mut quad = QuadConfig::default();
    if let Some(tol) = cli.tol {
        quad.rel_tol = tol;
        quad.abs_tol = quad.abs_tol.min(tol);
    }
    let mut ctx = Ctx { out: cli.out, quad, digest: None };
    let name = command_name(&cli);
    let start = Instant::now();
    let result = match quad.validate() {
        Ok(()) => commands::dispatch(&cli, &mut ctx),
        Err(e) => Err(CliError::Usage(e.to_string())),
    };
    let wall = cli.timing.then(|| start.elapsed().as_secs_f64());
    let code = match &result {
        Ok(r) => r.code,
        Err(e) => e.code(),
    };
    let stderr = match &result {
        Err(e) => format!("bgwscale: {}\n", e.document()["reason"].as_str().unwrap_or("error")),
        Ok(_) => String::new(),
    };
    match render(cli.out, &name, &ctx, &result, wall) {
        Ok(stdout) => Outcome { code, stdout, stderr },
        Err(e) => Outcome {
            code: e.code(),
            stdout: String::new(),
            stderr: format!("bgwscale: {}\n", e.document()["reason"].as_str().unwrap_or("error")),
        },
    }
}
