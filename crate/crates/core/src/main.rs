use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use oncoagent::agent::{load_case, replay_transcript, run_case, RunStatus, Transcript};
use oncoagent::config::{build_embedder, build_engine, load_config, EngineConfig};
use oncoagent::corpus::{
    archive_jsonl, keyword_filter, load_jsonl, normalize_structure, parse_structured_text,
    parse_tei, CuratedDocument, Section, SourceDocument, SourceKind,
};
use oncoagent::index::VectorIndex;
use oncoagent::eval::{compute_metrics, load_annotations, render_text_table};
use oncoagent::transport::HttpTransport;
use oncoagent::util::atomic_write;

#[derive(Parser)]
#[command(
    name = "oncoagent",
    version,
    about = "Retrieval-augmented, tool-orchestrating engine for oncology cases"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Ingest and curate literature corpora
    #[command(subcommand)]
    Corpus(CorpusCommand),
    /// Build vector indexes over curated corpora
    #[command(subcommand)]
    Index(IndexCommand),
    /// Run and replay cases
    #[command(subcommand)]
    Agent(AgentCommand),
    /// Compute multi-rater evaluation metrics
    #[command(subcommand)]
    Eval(EvalCommand),
    /// Inspect the tool registry
    #[command(subcommand)]
    Tools(ToolsCommand),
}

#[derive(Subcommand)]
enum CorpusCommand {
    /// Parse source documents into a curated jsonlines corpus
    Ingest(IngestArgs),
    /// Keep only documents matching at least one keyword
    Filter(FilterArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum IngestFormat {
    /// TEI XML files (.xml, .tei)
    Tei,
    /// Already curated jsonlines files (.jsonl)
    Jsonl,
    /// Plain text or markdown files (.txt, .md)
    Text,
}

#[derive(Args)]
struct IngestArgs {
    /// Directory of source files
    #[arg(long = "in", value_name = "DIR")]
    input: PathBuf,
    /// Source file format
    #[arg(long, value_enum)]
    format: IngestFormat,
    /// Output jsonlines corpus
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
}

#[derive(Args)]
struct FilterArgs {
    /// Input jsonlines corpus
    #[arg(long = "in", value_name = "FILE")]
    input: PathBuf,
    /// Keyword file, one keyword per line
    #[arg(long, value_name = "FILE")]
    keywords: PathBuf,
    /// Output jsonlines corpus
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum IndexCommand {
    /// Chunk and embed a curated corpus into a vector index
    Build(IndexBuildArgs),
}

#[derive(Args)]
struct IndexBuildArgs {
    /// Input jsonlines corpus
    #[arg(long, value_name = "FILE")]
    corpus: PathBuf,
    /// Output index file
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
    /// Chunk window sizes in tokens
    #[arg(long, value_delimiter = ',', default_value = "512,256,128")]
    windows: Vec<usize>,
    /// Token overlap between adjacent chunks
    #[arg(long, default_value_t = 50)]
    overlap: usize,
    /// Engine configuration file
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Use the deterministic mock embedder instead of any remote endpoint
    #[arg(long)]
    offline: bool,
}

#[derive(Subcommand)]
enum AgentCommand {
    /// Run one case end to end and write its transcript
    Run(RunArgs),
    /// Re-derive a transcript from its own records and verify it matches
    Replay(ReplayArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Case file
    #[arg(long = "case", value_name = "FILE")]
    case_path: PathBuf,
    /// Vector index file
    #[arg(long, value_name = "FILE")]
    index: PathBuf,
    /// Engine configuration file
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Force every provider and tool client to its mock
    #[arg(long)]
    offline: bool,
    /// Transcript output path, defaults to <case>.transcript.json
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ReplayArgs {
    /// Transcript file to replay
    #[arg(long, value_name = "FILE")]
    transcript: PathBuf,
}

#[derive(Subcommand)]
enum EvalCommand {
    /// Aggregate per-rater annotations into a metrics report
    Compute(ComputeArgs),
}

#[derive(Args)]
struct ComputeArgs {
    /// Directory of rater annotation JSON files
    #[arg(long, value_name = "DIR")]
    annotations: PathBuf,
    /// Optional JSON report output path
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum ToolsCommand {
    /// Print the JSON specs of every registered tool
    List,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Corpus(CorpusCommand::Ingest(args)) => corpus_ingest(&args),
        Command::Corpus(CorpusCommand::Filter(args)) => corpus_filter(&args),
        Command::Index(IndexCommand::Build(args)) => index_build(&args),
        Command::Agent(AgentCommand::Run(args)) => agent_run(&args),
        Command::Agent(AgentCommand::Replay(args)) => agent_replay(&args),
        Command::Eval(EvalCommand::Compute(args)) => eval_compute(&args),
        Command::Tools(ToolsCommand::List) => tools_list(),
    }
}

fn sorted_files_with_ext(dir: &Path, extensions: &[&str]) -> Result<Vec<PathBuf>> {
    let entries = std::fs::read_dir(dir)
        .with_context(|| format!("cannot read directory {}", dir.display()))?;
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.is_file()
                && p.extension()
                    .and_then(|e| e.to_str())
                    .is_some_and(|e| extensions.contains(&e))
        })
        .collect();
    paths.sort();
    if paths.is_empty() {
        bail!(
            "no files with extension {} in {}",
            extensions.join("/"),
            dir.display()
        );
    }
    Ok(paths)
}

fn file_stem(path: &Path) -> String {
    path.file_stem().and_then(|s| s.to_str()).unwrap_or("document").to_string()
}

fn text_source_document(path: &Path, content: &str) -> SourceDocument {
    let sections: Vec<Section> = parse_structured_text(content);
    let title = sections
        .iter()
        .map(|s| s.heading.trim())
        .find(|h| !h.is_empty())
        .map(str::to_string)
        .unwrap_or_else(|| file_stem(path));
    SourceDocument {
        id: file_stem(path),
        source: SourceKind::Custom,
        title,
        authors: Vec::new(),
        published: None,
        url: None,
        sections,
    }
}

fn corpus_ingest(args: &IngestArgs) -> Result<ExitCode> {
    let mut docs: Vec<CuratedDocument> = Vec::new();
    match args.format {
        IngestFormat::Tei => {
            for path in sorted_files_with_ext(&args.input, &["xml", "tei"])? {
                let content = std::fs::read_to_string(&path)
                    .with_context(|| format!("cannot read {}", path.display()))?;
                let source = parse_tei(&content)
                    .with_context(|| format!("cannot parse {}", path.display()))?;
                docs.push(normalize_structure(&source));
            }
        }
        IngestFormat::Text => {
            for path in sorted_files_with_ext(&args.input, &["txt", "md"])? {
                let content = std::fs::read_to_string(&path)
                    .with_context(|| format!("cannot read {}", path.display()))?;
                docs.push(normalize_structure(&text_source_document(&path, &content)));
            }
        }
        IngestFormat::Jsonl => {
            for path in sorted_files_with_ext(&args.input, &["jsonl"])? {
                let mut loaded = load_jsonl(&path)
                    .with_context(|| format!("cannot load {}", path.display()))?;
                docs.append(&mut loaded);
            }
        }
    }

    let mut seen = BTreeSet::new();
    for doc in &docs {
        doc.validate().with_context(|| format!("document '{}' is invalid", doc.id))?;
        if !seen.insert(doc.id.clone()) {
            bail!("duplicate document id '{}'", doc.id);
        }
    }
    let written = archive_jsonl(&docs, &args.out)?;
    println!("ingested {written} documents into {}", args.out.display());
    Ok(ExitCode::SUCCESS)
}

fn corpus_filter(args: &FilterArgs) -> Result<ExitCode> {
    let docs = load_jsonl(&args.input)
        .with_context(|| format!("cannot load {}", args.input.display()))?;
    let keyword_text = std::fs::read_to_string(&args.keywords)
        .with_context(|| format!("cannot read {}", args.keywords.display()))?;
    let keywords: Vec<String> = keyword_text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(str::to_string)
        .collect();
    let kept = keyword_filter(&docs, &keywords)?;
    let written = archive_jsonl(&kept, &args.out)?;
    println!(
        "kept {written} of {} documents into {}",
        docs.len(),
        args.out.display()
    );
    Ok(ExitCode::SUCCESS)
}

fn load_config_or_default(path: Option<&PathBuf>) -> Result<EngineConfig> {
    match path {
        Some(p) => Ok(load_config(p)?),
        None => Ok(EngineConfig::default()),
    }
}

fn index_build(args: &IndexBuildArgs) -> Result<ExitCode> {
    let config = load_config_or_default(args.config.as_ref())?;
    let docs = load_jsonl(&args.corpus)
        .with_context(|| format!("cannot load {}", args.corpus.display()))?;
    if docs.is_empty() {
        bail!("corpus {} is empty", args.corpus.display());
    }
    let transport = Arc::new(HttpTransport::new(Duration::from_secs(60)));
    let embedder = build_embedder(&config, args.offline, transport);
    let index = VectorIndex::build(&docs, &args.windows, args.overlap, embedder.as_ref())?;
    index.persist(&args.out)?;
    println!(
        "indexed {} chunks from {} documents at dimension {} into {}",
        index.len(),
        docs.len(),
        index.dimension(),
        args.out.display()
    );
    Ok(ExitCode::SUCCESS)
}

fn agent_run(args: &RunArgs) -> Result<ExitCode> {
    let config = load_config_or_default(args.config.as_ref())?;
    let case = load_case(&args.case_path)?;
    let index = VectorIndex::load(&args.index)
        .with_context(|| format!("cannot load index {}", args.index.display()))?;
    let case_dir = args
        .case_path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("."));
    let transport = Arc::new(HttpTransport::new(Duration::from_secs(120)));
    let engine = build_engine(&config, args.offline, &case_dir, transport)?;

    let transcript = run_case(&case, Arc::new(index), &engine);
    let out = args
        .out
        .clone()
        .unwrap_or_else(|| args.case_path.with_extension("transcript.json"));
    transcript.save(&out)?;

    match transcript.status {
        RunStatus::Ok => {
            println!("run complete: {}", out.display());
            Ok(ExitCode::SUCCESS)
        }
        RunStatus::Refused => {
            eprintln!(
                "run refused after {} attempt(s), transcript preserved at {}",
                transcript.attempt,
                out.display()
            );
            Ok(ExitCode::FAILURE)
        }
        RunStatus::Error => {
            eprintln!(
                "run failed: {} (transcript preserved at {})",
                transcript.error.as_deref().unwrap_or("unknown error"),
                out.display()
            );
            Ok(ExitCode::FAILURE)
        }
    }
}

fn agent_replay(args: &ReplayArgs) -> Result<ExitCode> {
    let original = Transcript::load(&args.transcript)?;
    let outcome = replay_transcript(&original)?;
    if outcome.matches {
        println!("replay matches {}", args.transcript.display());
        Ok(ExitCode::SUCCESS)
    } else {
        eprintln!(
            "replay diverges from {} in: {}",
            args.transcript.display(),
            outcome.differences.join(", ")
        );
        Ok(ExitCode::FAILURE)
    }
}

fn eval_compute(args: &ComputeArgs) -> Result<ExitCode> {
    let annotations = load_annotations(&args.annotations)?;
    if annotations.is_empty() {
        bail!("no annotation files in {}", args.annotations.display());
    }
    let report = compute_metrics(&annotations)?;
    print!("{}", render_text_table(&report));
    if let Some(out) = &args.out {
        let mut json = serde_json::to_string_pretty(&report)?;
        json.push('\n');
        atomic_write(out, json.as_bytes())?;
        println!("report written to {}", out.display());
    }
    Ok(ExitCode::SUCCESS)
}

fn tools_list() -> Result<ExitCode> {
    let config = EngineConfig::default();
    let transport = Arc::new(HttpTransport::new(Duration::from_secs(1)));
    let engine = build_engine(&config, true, Path::new("."), transport)?;
    println!("{}", serde_json::to_string_pretty(&engine.registry.specs())?);
    Ok(ExitCode::SUCCESS)
}
