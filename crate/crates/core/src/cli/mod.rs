//! Operator command line: seed the knowledge base, ingest documents, serve
//! the API, run queries and move snapshots around.
//!
//! Data goes to stdout, diagnostics to stderr. Exit codes: 0 success, 1
//! validation or domain failure, 2 I/O failure.

mod config;

use std::collections::HashSet;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Parser, Subcommand};
use serde_json::json;

pub use config::{CliConfig, ConfigError, ENV_PREFIX};

use crate::community::Community;
use crate::ontology::{
    parse_use_cases, validate_use_case, SpecRangeConfig, UseCase, UseCaseStatus,
};
use crate::providers::{fnv1a64, ProviderError};
use crate::rag::{radar_axes, RagEngine, RagError, SpecifyRequest, TemplateRegistry};
use crate::service::{serve, AppState};
use crate::store::{load_snapshot, Document, Store, StoreError};

#[derive(Debug, Parser)]
#[command(name = "netspec", version, about = "6G use-case knowledge base and specification generator")]
pub struct Cli {
    /// JSON config file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Machine-readable output and errors.
    #[arg(long, global = true)]
    pub json: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Validate, publish and index the use cases of a seed file.
    Init {
        #[arg(long)]
        seed: PathBuf,
        /// Exit 0 even when some entries are invalid (they are still skipped).
        #[arg(long)]
        skip_invalid: bool,
    },
    /// Extract draft use cases from a text document into the moderation queue.
    Ingest {
        document: PathBuf,
        /// Defaults to the file stem.
        #[arg(long)]
        document_id: Option<String>,
    },
    /// Run the HTTP API until SIGINT or SIGTERM.
    Serve {
        /// Overrides `listen_addr` from the config.
        #[arg(long)]
        listen: Option<String>,
    },
    /// Generate a network specification for a use case description.
    Query {
        #[arg(long, default_value = "")]
        name: String,
        #[arg(long)]
        description: String,
        #[arg(long, default_value_t = crate::store::DEFAULT_TOP_N)]
        n: usize,
        /// Generation provider id.
        #[arg(long)]
        provider: Option<String>,
    },
    /// Write a full snapshot of the knowledge base.
    Export { path: PathBuf },
    /// Replace the knowledge base with a snapshot.
    Import { path: PathBuf },
}

#[derive(Debug)]
pub struct CliError {
    pub exit_code: u8,
    pub kind: &'static str,
    pub message: String,
}

impl CliError {
    fn domain(kind: &'static str, message: impl Into<String>) -> Self {
        Self {
            exit_code: 1,
            kind,
            message: message.into(),
        }
    }

    fn io(message: impl Into<String>) -> Self {
        Self {
            exit_code: 2,
            kind: "io",
            message: message.into(),
        }
    }
}

impl From<StoreError> for CliError {
    fn from(e: StoreError) -> Self {
        match e {
            StoreError::IoFailure(_) | StoreError::StorageUnavailable(_) => Self::io(e.to_string()),
            StoreError::ValidationFailed(_) => Self::domain("validation", e.to_string()),
            StoreError::Embedding(_) => Self::domain("provider", e.to_string()),
            _ => Self::domain("store", e.to_string()),
        }
    }
}

impl From<RagError> for CliError {
    fn from(e: RagError) -> Self {
        match e {
            RagError::Store(s) => s.into(),
            RagError::Provider(_) => Self::domain("provider", e.to_string()),
            RagError::ExhaustedRetries { .. } => Self::domain("generation", e.to_string()),
            _ => Self::domain("invalid_input", e.to_string()),
        }
    }
}

impl From<ProviderError> for CliError {
    fn from(e: ProviderError) -> Self {
        Self::domain("provider", e.to_string())
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        match e {
            ConfigError::Io { .. } => Self::io(e.to_string()),
            ConfigError::Invalid { .. } => Self::domain("config", e.to_string()),
        }
    }
}

fn read_file(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::io(format!("{}: {e}", path.display())))
}

/// Parses arguments and runs the command, returning the exit code.
pub fn main_with_args<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let env = |k: &str| std::env::var(k).ok();
    // Unlocked handles: the server's worker threads log to stderr too.
    run(cli, env, &mut std::io::stdout(), &mut std::io::stderr())
}

/// Runs a parsed command. `env` supplies configuration overrides.
pub fn run(
    cli: Cli,
    env: impl Fn(&str) -> Option<String>,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> u8 {
    let json = cli.json;
    let result = CliConfig::load(cli.config.as_deref(), env)
        .map_err(CliError::from)
        .and_then(|config| dispatch(cli.command, &config, json, out, err));
    match result {
        Ok(code) => code,
        Err(e) => {
            if json {
                let body = json!({"error": {"kind": e.kind, "message": e.message, "exit_code": e.exit_code}});
                let _ = writeln!(err, "{body}");
            } else {
                let _ = writeln!(err, "error: {}", e.message);
            }
            e.exit_code
        }
    }
}

fn dispatch(
    command: Command,
    config: &CliConfig,
    json: bool,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<u8, CliError> {
    match command {
        Command::Init { seed, skip_invalid } => init(config, &seed, skip_invalid, json, out),
        Command::Ingest {
            document,
            document_id,
        } => ingest(config, &document, document_id, json, out, err),
        Command::Serve { listen } => serve_cmd(config, listen, err),
        Command::Query {
            name,
            description,
            n,
            provider,
        } => query(config, name, description, n, provider, out, err),
        Command::Export { path } => {
            let store = open_store(config)?;
            store.save_snapshot(&path)?;
            report(out, json, json!({"exported": path}), &format!("exported to {}", path.display()))?;
            Ok(0)
        }
        Command::Import { path } => {
            let snapshot = load_snapshot(&path)?;
            let store = open_store(config)?;
            let n = snapshot.use_cases.len();
            store.replace_with(snapshot)?;
            report(
                out,
                json,
                json!({"imported": path, "use_cases": n}),
                &format!("imported {n} use cases from {}", path.display()),
            )?;
            Ok(0)
        }
    }
}

fn report(out: &mut dyn Write, json: bool, value: serde_json::Value, text: &str) -> Result<(), CliError> {
    let r = if json {
        writeln!(out, "{value}")
    } else {
        writeln!(out, "{text}")
    };
    r.map_err(|e| CliError::io(e.to_string()))
}

/// Opens the data directory and installs the configured ranges.
pub fn open_store(config: &CliConfig) -> Result<Arc<Store>, CliError> {
    let embedder = config.embedding.build()?;
    let store = Store::open(&config.data_dir, embedder)?;
    if let Some(path) = config.ranges_file.as_deref().filter(|p| p.exists()) {
        let ranges: SpecRangeConfig = serde_json::from_str(&read_file(path)?)
            .map_err(|e| CliError::domain("config", format!("{}: {e}", path.display())))?;
        if let Err(errors) = ranges.check() {
            let list: Vec<String> = errors.iter().map(ToString::to_string).collect();
            return Err(CliError::domain("config", format!("{}: {}", path.display(), list.join("; "))));
        }
        if let Err(offenders) = store.set_ranges(ranges)? {
            return Err(CliError::domain(
                "range_conflict",
                format!("ranges in {} invalidate published use cases {offenders:?}", path.display()),
            ));
        }
    }
    Ok(Arc::new(store))
}

pub fn build_engine(config: &CliConfig, store: Arc<Store>) -> Result<RagEngine, CliError> {
    let mut generators = config
        .generation
        .iter()
        .map(|g| g.build())
        .collect::<Result<Vec<_>, _>>()?;
    if generators.is_empty() {
        return Err(CliError::domain("config", "no generation provider configured"));
    }
    if let Some(id) = &config.default_generator {
        let pos = generators
            .iter()
            .position(|g| g.id() == id)
            .ok_or_else(|| CliError::domain("config", format!("default generator {id:?} is not configured")))?;
        generators.swap(0, pos);
    }
    let templates = match &config.template_dir {
        Some(dir) => TemplateRegistry::with_dir(dir).map_err(|e| CliError::io(format!("{}: {e}", dir.display())))?,
        None => TemplateRegistry::default(),
    };
    let mut rest = generators.into_iter();
    let mut engine = RagEngine::new(store, rest.next().expect("checked non-empty"));
    for g in rest {
        engine = engine.with_generator(g);
    }
    Ok(engine.with_templates(templates).with_config(config.engine.clone()))
}

/// Hash of the content that defines a use case, used to make seeding
/// idempotent.
pub fn content_fingerprint(uc: &UseCase) -> u64 {
    let canonical = serde_json::to_string(&(&uc.name, &uc.description, &uc.processes)).expect("serializable");
    fnv1a64(canonical.as_bytes())
}

fn init(config: &CliConfig, seed: &Path, skip_invalid: bool, json: bool, out: &mut dyn Write) -> Result<u8, CliError> {
    let text = read_file(seed)?;
    let entries = parse_use_cases(&text)
        .map_err(|e| CliError::domain("validation", format!("{}: {e}", seed.display())))?;
    let store = open_store(config)?;
    let ranges = store.ranges();
    let mut known: HashSet<u64> = store.read().use_cases().map(content_fingerprint).collect();

    let mut publish = Vec::new();
    let mut items = Vec::new();
    let mut invalid = 0;
    for (i, mut uc) in entries.into_iter().enumerate() {
        let report = validate_use_case(&uc, &ranges);
        let (outcome, detail) = if !report.valid {
            invalid += 1;
            ("invalid", Some(report.to_string()))
        } else if !known.insert(content_fingerprint(&uc)) {
            ("unchanged", None)
        } else {
            uc.status = UseCaseStatus::Published;
            publish.push(uc.clone());
            ("published", None)
        };
        items.push(json!({"index": i, "id": uc.id, "name": uc.name, "result": outcome, "detail": detail}));
    }
    let published = publish.len();
    if !publish.is_empty() {
        store.upsert_many(publish)?;
    }

    let w = |r: std::io::Result<()>| r.map_err(|e| CliError::io(e.to_string()));
    if json {
        w(writeln!(
            out,
            "{}",
            json!({"published": published, "unchanged": items.len() - published - invalid, "invalid": invalid, "items": items})
        ))?;
    } else {
        for it in &items {
            let detail = it["detail"].as_str().map(|d| format!(": {d}")).unwrap_or_default();
            w(writeln!(
                out,
                "{:<10} [{}] {} {}{detail}",
                it["result"].as_str().unwrap_or_default(),
                it["index"],
                it["id"].as_str().unwrap_or_default(),
                it["name"].as_str().unwrap_or_default(),
            ))?;
        }
        w(writeln!(out, "{published} published, {invalid} invalid"))?;
    }
    Ok(if invalid > 0 && !skip_invalid { 1 } else { 0 })
}

fn ingest(
    config: &CliConfig,
    document: &Path,
    document_id: Option<String>,
    json: bool,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<u8, CliError> {
    let text = read_file(document)?;
    if text.trim().is_empty() {
        return Err(CliError::domain("validation", format!("{} is empty", document.display())));
    }
    let id = document_id.unwrap_or_else(|| {
        document
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "document".into())
    });
    let store = open_store(config)?;
    let engine = build_engine(config, store.clone())?;
    let community = Community::new(store.clone()).with_config(config.community.clone());
    store.put_document(Document {
        id: id.clone(),
        title: None,
        text: text.clone(),
        submitted_at: chrono::Utc::now(),
    })?;
    let outcome = engine.extract(&id, &text, |_, _| {})?;
    let mut drafts = Vec::new();
    for uc in outcome.use_cases {
        match community.submit_extracted(uc.clone(), &id) {
            Ok(c) => drafts.push(json!({"contribution_id": c.id, "use_case_id": c.submitted.id, "name": c.submitted.name})),
            Err(e) => {
                let _ = writeln!(err, "warning: draft {:?} not queued: {e}", uc.name);
            }
        }
    }
    for f in &outcome.failures {
        let _ = writeln!(err, "warning: chunk {}: {}", f.chunk_index, f.message);
    }
    let w = |r: std::io::Result<()>| r.map_err(|e| CliError::io(e.to_string()));
    if json {
        w(writeln!(
            out,
            "{}",
            json!({"document_id": id, "chunks": outcome.chunks, "drafts": drafts, "failures": outcome.failures})
        ))?;
    } else {
        for d in &drafts {
            w(writeln!(
                out,
                "{} {} {}",
                d["contribution_id"].as_str().unwrap_or_default(),
                d["use_case_id"].as_str().unwrap_or_default(),
                d["name"].as_str().unwrap_or_default()
            ))?;
        }
    }
    Ok(0)
}

fn query(
    config: &CliConfig,
    name: String,
    description: String,
    n: usize,
    provider: Option<String>,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<u8, CliError> {
    let store = open_store(config)?;
    let engine = build_engine(config, store.clone())?;
    let mut req = SpecifyRequest::new(name, description).top(n);
    req.provider_id = provider;
    let outcome = engine.generate_specification(&req)?;
    let text = serde_json::to_string_pretty(&outcome).expect("outcome serializes");
    writeln!(out, "{text}").map_err(|e| CliError::io(e.to_string()))?;

    let ranges = store.ranges();
    for p in &outcome.processes {
        let _ = writeln!(err, "{} ({:?}, real time: {})", p.name, p.direction, p.is_real_time);
        for axis in radar_axes(&p.specification, &ranges).axes {
            let raw = axis.raw.map_or_else(|| "-".to_string(), |v| format!("{v} {}", axis.unit));
            let bar = "#".repeat((axis.value * 20.0).round() as usize);
            let _ = writeln!(err, "  {:<28} {:>18}  {:.3} {bar}", axis.label, raw, axis.value);
        }
    }
    store.flush()?;
    Ok(0)
}

fn serve_cmd(config: &CliConfig, listen: Option<String>, err: &mut dyn Write) -> Result<u8, CliError> {
    let store = open_store(config)?;
    let engine = Arc::new(build_engine(config, store.clone())?);
    let mut community = Community::new(store.clone()).with_config(config.community.clone());
    if config.community.plausibility_check {
        community = community.with_checker(engine.generator(None)?.clone());
    }
    let mut state = AppState::new(engine, community, config.service.clone());
    if let Some(p) = &config.ranges_file {
        state = state.with_ranges_path(p.clone());
    }
    let state = Arc::new(state);
    let addr = listen.unwrap_or_else(|| config.listen_addr.clone());

    let runtime = tokio::runtime::Runtime::new().map_err(|e| CliError::io(e.to_string()))?;
    runtime.block_on(async {
        let listener = tokio::net::TcpListener::bind(&addr)
            .await
            .map_err(|e| CliError::io(format!("cannot listen on {addr}: {e}")))?;
        let local = listener.local_addr().map_err(|e| CliError::io(e.to_string()))?;
        let _ = writeln!(err, "listening on http://{local}");
        serve(listener, state, shutdown_signal())
            .await
            .map_err(|e| CliError::io(e.to_string()))
    })?;
    store.flush()?;
    Ok(0)
}

async fn shutdown_signal() {
    let ctrl_c = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    #[cfg(unix)]
    let term = async {
        match tokio::signal::unix::signal(tokio::signal::unix::SignalKind::terminate()) {
            Ok(mut s) => {
                s.recv().await;
            }
            Err(_) => std::future::pending::<()>().await,
        }
    };
    #[cfg(not(unix))]
    let term = std::future::pending::<()>();
    tokio::select! {
        _ = ctrl_c => {},
        _ = term => {},
    }
    tracing::info!("shutting down");
}
