use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use mole::commands::{
    load_model_config, load_prices, load_profile, load_schema, run_evaluate, run_extract, run_fewshot, run_report,
    run_schema_check, EvaluateOptions, ExtractOptions,
};
use mole::ingest::InputFormat;
use mole_core::extract::Strategy;
use mole_core::schema::apply_length_profile;
use mole_core::{Category, ProfileLevel, Schema};

#[derive(Parser)]
#[command(name = "mole", version, about = "Extract and score dataset metadata from research papers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Extract a metadata record per paper.
    Extract(ExtractArgs),
    /// Score predictions against gold annotations.
    Evaluate(EvaluateArgs),
    /// Write synthetic few-shot examples.
    Fewshot(FewshotArgs),
    /// Check a schema for invariant violations.
    SchemaCheck(SchemaArgs),
    /// Render one or more report.json files as Markdown tables.
    Report(ReportArgs),
}

#[derive(Args)]
struct SchemaArgs {
    /// Category code (ar, en, fr, jp, ru, multi) or a schema file.
    #[arg(long, default_value = "ar")]
    schema: String,
    /// Category of a schema file whose name is not a category code.
    #[arg(long)]
    category: Option<String>,
    /// Length profile: low, mid, high, or a profile file.
    #[arg(long, default_value = "low")]
    profile: String,
}

impl SchemaArgs {
    fn load(&self) -> Result<Schema> {
        let category = match &self.category {
            Some(c) => match Category::from_code(c) {
                Some(c) => Some(c),
                None => bail!("unknown category `{c}`"),
            },
            None => None,
        };
        let schema = load_schema(&self.schema, category)?;
        Ok(apply_length_profile(&schema, &load_profile(&self.profile)?)?)
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum StrategyArg {
    Llm,
    Random,
    Keyword,
}

#[derive(Args)]
struct ExtractArgs {
    #[command(flatten)]
    schema: SchemaArgs,
    /// Paper files or directories.
    #[arg(long = "paper", required = true, num_args = 1..)]
    papers: Vec<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<InputFormat>,
    /// Command turning a PDF into text, with {in} and {out} placeholders.
    #[arg(long)]
    pdf_extract_cmd: Option<String>,
    #[arg(long, value_enum, default_value = "llm")]
    strategy: StrategyArg,
    /// Model config JSON (model_id, endpoint_url, temperature, max_attempts, api_key_env, request_timeout).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides model_id from the config.
    #[arg(long)]
    model: Option<String>,
    #[arg(long, default_value_t = 0)]
    shots: usize,
    #[arg(long, default_value_t = 1.0)]
    fraction: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Re-extract with the dataset's README or landing page.
    #[arg(long)]
    browse: bool,
    #[arg(long)]
    fetch_cache: Option<PathBuf>,
    /// Directory of canned replies (<paper_id>.json); no network is used.
    #[arg(long)]
    mock_dir: Option<PathBuf>,
    /// Save request bodies under <out>/requests.
    #[arg(long)]
    record_requests: bool,
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long, default_value_t = 4)]
    max_in_flight: usize,
    /// Price table JSON: {"model": [usd_per_1m_input, usd_per_1m_output]}.
    #[arg(long)]
    prices: Option<PathBuf>,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Directory of <paper_id>.json records.
    #[arg(long)]
    predictions: PathBuf,
    /// Directory of <paper_id>.json gold annotations.
    #[arg(long)]
    gold: PathBuf,
    /// Schema files replacing the built-in schema of their category.
    #[arg(long = "schema")]
    schemas: Vec<String>,
    /// Profiles to report length adherence for (default: low, mid, high).
    #[arg(long = "profile")]
    profiles: Vec<String>,
    /// Keep only papers published after this year.
    #[arg(long)]
    year_after: Option<i32>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    prices: Option<PathBuf>,
    /// Row label in the Markdown tables.
    #[arg(long, default_value = "model")]
    label: String,
}

#[derive(Args)]
struct FewshotArgs {
    #[command(flatten)]
    schema: SchemaArgs,
    #[arg(long, default_value_t = 5)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ReportArgs {
    #[arg(required = true)]
    reports: Vec<PathBuf>,
    /// Write here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn extract(a: ExtractArgs) -> Result<ExitCode> {
    let schema = a.schema.load()?;
    let mut opts = ExtractOptions::new(schema, a.papers, a.out);
    opts.format = a.format;
    opts.pdf_cmd = a.pdf_extract_cmd;
    opts.strategy = match a.strategy {
        StrategyArg::Llm => Strategy::Llm,
        StrategyArg::Random => Strategy::Random,
        StrategyArg::Keyword => Strategy::Keyword,
    };
    opts.model = load_model_config(a.config.as_deref())?;
    if let Some(m) = a.model {
        opts.model.model_id = m;
    }
    opts.shots = a.shots;
    opts.fraction = a.fraction;
    opts.seed = a.seed;
    opts.browse = a.browse;
    opts.fetch_cache = a.fetch_cache;
    opts.mock_dir = a.mock_dir;
    opts.record_requests = a.record_requests;
    opts.jobs = a
        .jobs
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    opts.max_in_flight = a.max_in_flight;
    if let Some(p) = &a.prices {
        opts.prices = load_prices(p)?;
    }
    opts.profile = Some(a.schema.profile.clone());
    let manifest = run_extract(&opts)?;
    let failed = manifest.failed();
    eprintln!(
        "{} papers, {} failed; results in {}",
        manifest.papers.len(),
        failed,
        opts.out.display()
    );
    Ok(if failed == 0 { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}

fn evaluate(a: EvaluateArgs) -> Result<ExitCode> {
    let schemas = a.schemas.iter().map(|s| load_schema(s, None)).collect::<Result<Vec<_>>>()?;
    let names: Vec<String> = if a.profiles.is_empty() {
        ProfileLevel::ALL.iter().map(|l| l.name().to_owned()).collect()
    } else {
        a.profiles
    };
    let profiles = names
        .into_iter()
        .map(|n| Ok((n.clone(), load_profile(&n)?)))
        .collect::<Result<Vec<_>>>()?;
    let opts = EvaluateOptions {
        predictions: a.predictions,
        gold: a.gold,
        schemas,
        profiles,
        year_after: a.year_after,
        out: a.out,
        prices: match &a.prices {
            Some(p) => load_prices(p)?,
            None => Vec::new(),
        },
        label: a.label,
    };
    let report = run_evaluate(&opts)?;
    println!(
        "papers {}  precision {:.2}  recall {:.2}  f1 {:.2}",
        report.papers, report.overall.precision, report.overall.recall, report.overall.f1
    );
    Ok(ExitCode::SUCCESS)
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Extract(a) => extract(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Fewshot(a) => {
            let n = run_fewshot(&a.schema.load()?, a.n, a.seed, &a.out)?;
            eprintln!("wrote {n} examples to {}", a.out.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::SchemaCheck(a) => {
            let schema = a.load()?;
            let violations = run_schema_check(&schema);
            println!("{}: {} attributes", schema.category, schema.len());
            for v in &violations {
                println!("{}: {}", v.attribute, v.rule.id());
            }
            Ok(if violations.is_empty() { ExitCode::SUCCESS } else { ExitCode::FAILURE })
        }
        Command::Report(a) => {
            let md = run_report(&a.reports)?;
            match a.out {
                Some(p) => std::fs::write(&p, md)?,
                None => print!("{md}"),
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
