//! Command-line entry points and the annotation HTTP server.

pub mod server;

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use factcheck_core::annotation::{
    evidence_breakdown, AnnotationStore, ExportFilter, MergePrefiller, PipelinePrefiller, Prefiller,
};
use factcheck_core::evaluation::{
    run_benchmark, select_data, AlwaysCheckworthy, AlwaysFalse, AlwaysTrue, BenchmarkOptions, FactcheckerAdapter,
    LabelConvention, PipelineAdapter, RandomAdapter, SelectionCriteria, SubprocessAdapter, Subtask,
};
use factcheck_core::model::{load_documents, validate_dataset, DatasetOptions, FactcheckDocument, Source};
use factcheck_core::store::{persist_run, RunArtifacts, RunFailure, RunMetadata};
use factcheck_core::{Pipeline, PipelineConfig, PipelineInput, StanceLabelSpace};

#[derive(Parser, Debug)]
#[command(name = "factcheck", version, about = "Claim-level fact-checking of LLM responses")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Fact-check question/response pairs and write a run directory.
    Run(RunArgs),
    /// Score fact-checkers on a gold benchmark file.
    Eval(EvalArgs),
    /// Keep long, low-FactScore responses that differ from gold answers.
    SelectData(SelectArgs),
    /// Serve the annotation API (and optionally a static UI).
    Serve(ServeArgs),
    /// Export fully consolidated annotations as JSON Lines.
    Export(ExportArgs),
}

#[derive(Args, Debug)]
pub struct RunArgs {
    /// Pipeline configuration (TOML). Defaults use the mock backends.
    #[arg(long, env = "FACTCHECK_CONFIG")]
    pub config: Option<PathBuf>,
    /// JSON Lines of {"id", "question", "response"}.
    #[arg(long, conflicts_with_all = ["question", "response"])]
    pub input: Option<PathBuf>,
    #[arg(long, requires = "response")]
    pub question: Option<String>,
    #[arg(long)]
    pub response: Option<String>,
    #[arg(long, default_value = "doc-1")]
    pub id: String,
    /// Run directory for config, metadata, outputs and checksums.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum LabelSpaceArg {
    Four,
    Three,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum ConventionArg {
    Observed,
    Full,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    /// Gold benchmark (JSON Lines or JSON array).
    #[arg(long)]
    pub data: PathBuf,
    /// always-checkworthy, always-true, always-false, random[:seed], pipeline.
    #[arg(long = "adapter", default_value = "pipeline")]
    pub adapters: Vec<String>,
    /// External adapter speaking line-delimited JSON, e.g. "python3 my_checker.py".
    #[arg(long)]
    pub adapter_cmd: Vec<String>,
    #[arg(long, env = "FACTCHECK_CONFIG")]
    pub config: Option<PathBuf>,
    /// Comma-separated subset, e.g. s1,s4. All by default.
    #[arg(long, value_delimiter = ',')]
    pub subtasks: Vec<String>,
    #[arg(long, value_enum, default_value = "four")]
    pub label_space: LabelSpaceArg,
    #[arg(long, value_enum, default_value = "observed")]
    pub convention: ConventionArg,
    /// Also write the reports as JSON.
    #[arg(long)]
    pub json: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SelectArgs {
    /// Fact-checked documents (pipeline output).
    #[arg(long)]
    pub input: PathBuf,
    /// JSON Lines of {"id", "answer"} gold answers.
    #[arg(long)]
    pub gold: Option<PathBuf>,
    #[arg(long, env = "FACTCHECK_CONFIG")]
    pub config: Option<PathBuf>,
    /// Kept documents as JSON Lines.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value_t = 200)]
    pub min_chars: usize,
    #[arg(long, default_value_t = 0.5)]
    pub max_cosine: f64,
    #[arg(long, default_value_t = 0.2)]
    pub max_factscore: f64,
}

#[derive(Args, Debug)]
pub struct ServeArgs {
    /// Server configuration (TOML).
    #[arg(long)]
    pub config: PathBuf,
    /// Documents to add to the store (skipped when already present).
    #[arg(long)]
    pub documents: Option<PathBuf>,
    /// Overrides `bind` from the configuration.
    #[arg(long)]
    pub bind: Option<String>,
}

#[derive(Args, Debug)]
pub struct ExportArgs {
    /// Annotation data directory, as configured for `serve`.
    #[arg(long)]
    pub data_dir: PathBuf,
    #[arg(long)]
    pub source: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Deserialize)]
pub struct AnnotatorConfig {
    pub id: String,
    #[serde(default)]
    pub token: Option<String>,
    #[serde(default)]
    pub token_env: Option<String>,
}

#[derive(Debug, Clone, Deserialize)]
pub struct ServeConfig {
    #[serde(default = "default_bind")]
    pub bind: String,
    pub data_dir: PathBuf,
    #[serde(default)]
    pub static_dir: Option<PathBuf>,
    /// Pipeline configuration used for automatic pre-fill.
    #[serde(default)]
    pub pipeline_config: Option<PathBuf>,
    #[serde(default)]
    pub annotators: Vec<AnnotatorConfig>,
}

fn default_bind() -> String {
    "127.0.0.1:8080".into()
}

impl ServeConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut cfg: Self = toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        resolve(&mut cfg.data_dir);
        if let Some(p) = cfg.static_dir.as_mut() {
            resolve(p);
        }
        if let Some(p) = cfg.pipeline_config.as_mut() {
            resolve(p);
        }
        Ok(cfg)
    }

    /// Bearer token -> annotator id.
    pub fn tokens(&self) -> anyhow::Result<HashMap<String, String>> {
        let mut out = HashMap::new();
        for a in &self.annotators {
            let token = match (&a.token, &a.token_env) {
                (Some(t), _) => t.clone(),
                (None, Some(var)) => std::env::var(var).with_context(|| format!("token variable {var} for {}", a.id))?,
                (None, None) => bail!("annotator {} has neither token nor token_env", a.id),
            };
            if out.insert(token, a.id.clone()).is_some() {
                bail!("annotator tokens must be distinct");
            }
        }
        Ok(out)
    }
}

fn load_config(path: Option<&Path>) -> anyhow::Result<PipelineConfig> {
    match path {
        Some(p) => PipelineConfig::load(p).with_context(|| format!("loading {}", p.display())),
        None => Ok(PipelineConfig::default()),
    }
}

fn read_jsonl<T: serde::de::DeserializeOwned>(path: &Path) -> anyhow::Result<Vec<T>> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).with_context(|| format!("{}:{}", path.display(), i + 1))?);
    }
    Ok(out)
}

fn write_jsonl<T: serde::Serialize>(mut w: impl Write, items: &[T]) -> anyhow::Result<()> {
    for item in items {
        writeln!(w, "{}", serde_json::to_string(item)?)?;
    }
    w.flush()?;
    Ok(())
}

pub fn run(args: RunArgs) -> anyhow::Result<bool> {
    let config = load_config(args.config.as_deref())?;
    let inputs: Vec<PipelineInput> = match (&args.input, &args.response) {
        (Some(path), _) => read_jsonl(path)?,
        (None, Some(response)) => {
            vec![PipelineInput::new(args.id.clone(), args.question.clone().unwrap_or_default(), response.clone())]
        }
        (None, None) => bail!("pass --input or --response"),
    };
    let started = chrono::Utc::now();
    let pipeline = Pipeline::from_config(config.clone())?;
    let mut documents = Vec::new();
    let mut revisions = Vec::new();
    let mut failures = Vec::new();
    for (input, result) in inputs.iter().zip(pipeline.run_batch(&inputs)) {
        match result {
            Ok(out) => {
                documents.push(out.document);
                revisions.push(out.revision);
            }
            Err(e) => {
                log::error!("{}: {e}", input.id);
                failures.push(RunFailure { document_id: input.id.clone(), error: e.to_string() });
            }
        }
    }
    write_jsonl(std::io::stdout().lock(), &documents)?;
    let ok = failures.is_empty();
    if let Some(dir) = &args.out_dir {
        let metadata = RunMetadata::collect(&config, pipeline.suite(), started, failures);
        let run = RunArtifacts { config, metadata, inputs, documents, revisions };
        persist_run(dir, &run)?;
        eprintln!("wrote run {} to {}", run.metadata.run_id, dir.display());
    }
    Ok(ok)
}

fn build_adapter(name: &str, pipeline: Option<&Arc<Pipeline>>) -> anyhow::Result<Box<dyn FactcheckerAdapter>> {
    Ok(match name {
        "always-checkworthy" => Box::new(AlwaysCheckworthy),
        "always-true" => Box::new(AlwaysTrue),
        "always-false" => Box::new(AlwaysFalse),
        "pipeline" => Box::new(PipelineAdapter::new(pipeline.expect("built when requested").clone())),
        other => match other.strip_prefix("random") {
            Some("") => Box::new(RandomAdapter { seed: 0 }),
            Some(rest) => {
                let seed = rest.trim_start_matches(':').parse().with_context(|| format!("bad seed in {other:?}"))?;
                Box::new(RandomAdapter { seed })
            }
            None => bail!("unknown adapter {other:?}"),
        },
    })
}

pub fn eval(args: EvalArgs) -> anyhow::Result<()> {
    let docs = load_documents(&args.data).with_context(|| format!("loading {}", args.data.display()))?;
    let config = load_config(args.config.as_deref())?;
    let pipeline = match args.adapters.iter().any(|a| a == "pipeline") {
        true => Some(Arc::new(Pipeline::from_config(config.clone())?)),
        false => None,
    };
    let mut adapters = Vec::new();
    for name in &args.adapters {
        adapters.push(build_adapter(name, pipeline.as_ref())?);
    }
    for cmd in &args.adapter_cmd {
        let parts: Vec<String> = cmd.split_whitespace().map(str::to_string).collect();
        let Some((program, rest)) = parts.split_first() else { bail!("empty --adapter-cmd") };
        adapters.push(Box::new(SubprocessAdapter::spawn(program, rest)?));
    }
    let subtasks = args
        .subtasks
        .iter()
        .map(|s| Subtask::parse(s).with_context(|| format!("unknown subtask {s:?}")))
        .collect::<anyhow::Result<Vec<_>>>()?;
    let opts = BenchmarkOptions {
        subtasks,
        label_space: match args.label_space {
            LabelSpaceArg::Four => StanceLabelSpace::FourLabel,
            LabelSpaceArg::Three => StanceLabelSpace::ThreeLabel,
        },
        convention: match args.convention {
            ConventionArg::Observed => LabelConvention::Observed,
            ConventionArg::Full => LabelConvention::Full,
        },
        embedder: Some(config.build_providers()?.embedding),
    };
    let mut reports = Vec::new();
    for adapter in &adapters {
        reports.push(run_benchmark(&docs, adapter.as_ref(), &opts)?);
    }
    print!("{}", factcheck_core::evaluation::tables::render_reports(&reports));
    if let Some(path) = &args.json {
        std::fs::write(path, serde_json::to_string_pretty(&reports)? + "\n")?;
    }
    Ok(())
}

#[derive(Deserialize)]
struct GoldAnswer {
    id: String,
    answer: String,
}

pub fn select(args: SelectArgs) -> anyhow::Result<()> {
    let docs = load_documents(&args.input)?;
    let gold: HashMap<String, String> = match &args.gold {
        Some(p) => read_jsonl::<GoldAnswer>(p)?.into_iter().map(|g| (g.id, g.answer)).collect(),
        None => HashMap::new(),
    };
    let suite = load_config(args.config.as_deref())?.build_providers()?;
    let criteria =
        SelectionCriteria { min_chars: args.min_chars, max_gold_cosine: args.max_cosine, max_factscore: args.max_factscore };
    let decisions = select_data(&docs, &gold, suite.embedding.as_ref(), &criteria)?;
    write_jsonl(std::io::stdout().lock(), &decisions)?;
    if let Some(out) = &args.out {
        let kept: Vec<&FactcheckDocument> =
            docs.iter().zip(&decisions).filter(|(_, d)| d.kept).map(|(doc, _)| doc).collect();
        write_jsonl(File::create(out)?, &kept)?;
    }
    Ok(())
}

fn parse_source(s: &str) -> anyhow::Result<Source> {
    serde_json::from_value(serde_json::Value::String(s.to_string())).with_context(|| format!("unknown source {s:?}"))
}

pub fn export(args: ExportArgs) -> anyhow::Result<()> {
    let store = AnnotationStore::open(&args.data_dir, Arc::new(MergePrefiller))?;
    let filter = ExportFilter { source: args.source.as_deref().map(parse_source).transpose()? };
    let docs = store.export(&filter)?;
    match &args.out {
        Some(p) => write_jsonl(File::create(p)?, &docs)?,
        None => write_jsonl(std::io::stdout().lock(), &docs)?,
    }
    let stats = validate_dataset(&docs, DatasetOptions { strict: true, ..Default::default() })?;
    let breakdown = evidence_breakdown(&docs);
    eprintln!(
        "exported {} documents, {} checkworthy claims ({} decided with retrieved evidence only, {} needed manual evidence)",
        stats.documents, stats.checkworthy_claims, breakdown.auto_only, breakdown.needed_manual
    );
    Ok(())
}

/// Reads documents to annotate: full records or bare {"id", "question",
/// "response"} inputs.
pub fn read_annotation_inputs(path: &Path) -> anyhow::Result<Vec<FactcheckDocument>> {
    let raw: Vec<serde_json::Value> = read_jsonl(path)?;
    raw.into_iter()
        .map(|v| match serde_json::from_value::<FactcheckDocument>(v.clone()) {
            Ok(d) => Ok(d),
            Err(_) => {
                let input: PipelineInput = serde_json::from_value(v)?;
                let mut d = FactcheckDocument::new(input.id, input.question, input.response);
                d.source = input.source;
                Ok(d)
            }
        })
        .collect()
}

/// Opens the store named by a server configuration.
pub fn open_store(cfg: &ServeConfig) -> anyhow::Result<AnnotationStore> {
    let prefiller: Arc<dyn Prefiller> = match &cfg.pipeline_config {
        Some(p) => Arc::new(PipelinePrefiller::new(Arc::new(Pipeline::from_config(PipelineConfig::load(p)?)?))),
        None => Arc::new(MergePrefiller),
    };
    Ok(AnnotationStore::open(&cfg.data_dir, prefiller)?)
}

pub fn serve(args: ServeArgs) -> anyhow::Result<()> {
    let cfg = ServeConfig::load(&args.config)?;
    let tokens = cfg.tokens()?;
    if tokens.is_empty() {
        log::warn!("no annotators configured; every API call will be rejected");
    }
    let mut store = open_store(&cfg)?;
    if let Some(path) = &args.documents {
        for doc in read_annotation_inputs(path)? {
            if store.state().documents.contains_key(&doc.id) {
                log::info!("document {} already in store", doc.id);
                continue;
            }
            store.add_document(doc)?;
        }
    }
    let bind = args.bind.unwrap_or(cfg.bind.clone());
    let app = server::router(server::AppState::new(store, tokens), cfg.static_dir.clone());
    let runtime = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind(&bind).await.with_context(|| format!("binding {bind}"))?;
        eprintln!("listening on http://{}", listener.local_addr()?);
        axum::serve(listener, app).await?;
        anyhow::Ok(())
    })
}

pub fn execute(cli: Cli) -> anyhow::Result<bool> {
    match cli.command {
        Command::Run(a) => run(a),
        Command::Eval(a) => eval(a).map(|_| true),
        Command::SelectData(a) => select(a).map(|_| true),
        Command::Serve(a) => serve(a).map(|_| true),
        Command::Export(a) => export(a).map(|_| true),
    }
}
