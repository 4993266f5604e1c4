//! The work behind each subcommand, callable without going through argv.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use anyhow::{anyhow, bail, Context, Result};
use mole_core::browse::{extract_with_browsing, Fetcher, NoFetch};
use mole_core::eval::{
    aggregate_report, length_adherence, render_markdown, score_paper, AdherenceRow, GoldRecord, ReportFilter,
    ScoreReport,
};
use mole_core::extract::{extract_keyword, extract_llm, extract_random, ExtractionRun, Strategy};
use mole_core::gateway::{estimate_cost, ChatBackend, CostLedger, CostRow, Gateway, ModelConfig, Sleep};
use mole_core::prompt::generate_synthetic_examples;
use mole_core::schema::{apply_length_profile, parse_schema, validate_schema, Violation};
use mole_core::{Category, LengthProfile, MetadataRecord, ProfileLevel, Schema};
use serde::Serialize;
use serde_json::{json, Value};

use crate::ingest::{discover, load_document, paper_id, InputFormat};
use crate::net::{
    CachingFetcher, HttpBackend, HttpFetcher, Limited, RealSleep, Recording, ReplayBackend, SharedLedger, Stage,
};

/// Resolves `--schema`: a category code selects the built-in schema,
/// anything else is a file whose category comes from `category` or the
/// file stem.
pub fn load_schema(spec: &str, category: Option<Category>) -> Result<Schema> {
    if let Some(c) = Category::from_code(spec) {
        if !Path::new(spec).exists() {
            return Ok(c.builtin_schema());
        }
    }
    let path = Path::new(spec);
    let category = match category {
        Some(c) => c,
        None => path
            .file_stem()
            .and_then(|s| s.to_str())
            .and_then(Category::from_code)
            .with_context(|| format!("cannot tell the category of {spec}; pass --category"))?,
    };
    let raw = fs::read_to_string(path).with_context(|| format!("reading schema {spec}"))?;
    parse_schema(&raw, category).with_context(|| format!("schema {spec}"))
}

/// `low`, `mid`, `high`, or a profile file.
pub fn load_profile(spec: &str) -> Result<LengthProfile> {
    if let Some(level) = ProfileLevel::from_name(spec) {
        return Ok(LengthProfile::builtin(level));
    }
    let raw = fs::read_to_string(spec).with_context(|| format!("reading profile {spec}"))?;
    LengthProfile::parse(&raw).with_context(|| format!("profile {spec}"))
}

pub fn load_model_config(path: Option<&Path>) -> Result<ModelConfig> {
    match path {
        None => Ok(ModelConfig::default()),
        Some(p) => {
            let raw = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            serde_json::from_str(&raw).with_context(|| format!("model config {}", p.display()))
        }
    }
}

pub fn load_prices(path: &Path) -> Result<Vec<(String, (f64, f64))>> {
    let raw = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    CostLedger::parse_prices(&raw).map_err(|e| anyhow!("price table {}: {e}", path.display()))
}

fn write_file(path: &Path, body: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    fs::write(path, body).with_context(|| format!("writing {}", path.display()))
}

fn to_pretty<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}

/// RFC 3339 time, honouring `SOURCE_DATE_EPOCH` for reproducible output.
pub fn timestamp() -> String {
    let now = std::env::var("SOURCE_DATE_EPOCH")
        .ok()
        .and_then(|s| s.parse::<i64>().ok())
        .and_then(|secs| chrono::DateTime::from_timestamp(secs, 0))
        .unwrap_or_else(chrono::Utc::now);
    now.to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
}

pub struct ExtractOptions {
    pub schema: Schema,
    pub papers: Vec<PathBuf>,
    pub format: Option<InputFormat>,
    pub pdf_cmd: Option<String>,
    pub strategy: Strategy,
    pub model: ModelConfig,
    pub shots: usize,
    pub fraction: f64,
    pub seed: u64,
    pub out: PathBuf,
    pub browse: bool,
    pub fetch_cache: Option<PathBuf>,
    /// Replay canned replies instead of calling the endpoint; implies no network.
    pub mock_dir: Option<PathBuf>,
    pub record_requests: bool,
    pub jobs: usize,
    pub max_in_flight: usize,
    pub prices: Vec<(String, (f64, f64))>,
    pub profile: Option<String>,
}

impl ExtractOptions {
    pub fn new(schema: Schema, papers: Vec<PathBuf>, out: PathBuf) -> Self {
        ExtractOptions {
            schema,
            papers,
            format: None,
            pdf_cmd: None,
            strategy: Strategy::Llm,
            model: ModelConfig::default(),
            shots: 0,
            fraction: 1.0,
            seed: 0,
            out,
            browse: false,
            fetch_cache: None,
            mock_dir: None,
            record_requests: false,
            jobs: 1,
            max_in_flight: 4,
            prices: Vec::new(),
            profile: None,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PaperEntry {
    pub paper_id: String,
    pub status: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub attempts: u32,
    pub browse_attempts: u32,
    pub input_tokens: u64,
    pub output_tokens: u64,
    pub log_entries: usize,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub strategy: Strategy,
    pub model: Option<String>,
    pub category: Category,
    pub profile: Option<String>,
    pub shots: usize,
    pub fraction: f64,
    pub seed: u64,
    pub browse: bool,
    pub timestamp: String,
    pub papers: Vec<PaperEntry>,
    pub usage: Vec<CostRow>,
    pub notes: Vec<String>,
}

impl Manifest {
    pub fn failed(&self) -> usize {
        self.papers.iter().filter(|p| p.status != "ok").count()
    }
}

struct Env<'a> {
    opts: &'a ExtractOptions,
    shared: Option<Limited<HttpBackend>>,
    fetcher: Box<dyn Fetcher + Sync + 'a>,
    ledger: SharedLedger,
    shots: Vec<mole_core::prompt::SyntheticExample>,
}

struct NoSleep;

impl Sleep for NoSleep {
    fn sleep(&self, _: Duration) {}
}

struct Outcome {
    run: ExtractionRun,
    browse_attempts: u32,
    requests: Vec<String>,
}

fn run_one(env: &Env<'_>, path: &Path) -> Result<Outcome> {
    let opts = env.opts;
    let doc = load_document(path, opts.format, opts.pdf_cmd.as_deref())?;
    let mut out = Outcome {
        run: match opts.strategy {
            Strategy::Random => extract_random(&doc.id, &opts.schema, opts.seed),
            Strategy::Keyword => extract_keyword(&doc, &opts.schema),
            Strategy::Llm => return run_llm(env, &doc),
        },
        browse_attempts: 0,
        requests: Vec::new(),
    };
    out.run.timestamp = Some(timestamp());
    Ok(out)
}

fn run_llm(env: &Env<'_>, doc: &mole_core::Document) -> Result<Outcome> {
    let opts = env.opts;
    let backend_for = |stage: Stage| -> Result<Box<dyn ChatBackend + '_>> {
        Ok(match (&opts.mock_dir, &env.shared) {
            (Some(dir), _) => Box::new(ReplayBackend::load(dir, &doc.id, stage)?),
            (None, Some(http)) => Box::new(http),
            (None, None) => unreachable!("http backend exists when not mocking"),
        })
    };
    // Replayed runs skip the retry delay.
    let sleeper: &dyn Sleep = if opts.mock_dir.is_some() { &NoSleep } else { &RealSleep };
    let first = Recording::new(backend_for(Stage::Extract)?);
    let result = extract_llm(
        &Gateway::new(&first, sleeper, &env.ledger),
        doc,
        &opts.schema,
        &opts.model,
        &env.shots,
        opts.fraction,
    );
    let mut requests = first.take();
    let mut run = result?;
    let mut browse_attempts = 0;
    if opts.browse {
        let second = Recording::new(backend_for(Stage::Browse)?);
        let gw = Gateway::new(&second, sleeper, &env.ledger);
        let browsed = extract_with_browsing(&gw, doc, &opts.schema, &run.record, &opts.model, &env.fetcher);
        requests.extend(second.take());
        let browsed = browsed?;
        browse_attempts = browsed.attempts_used;
        if browse_attempts > 0 {
            run.record = browsed.record;
            run.log = browsed.log;
        }
        run.warnings.extend(browsed.warnings);
        run.input_tokens += browsed.input_tokens;
        run.output_tokens += browsed.output_tokens;
    }
    run.timestamp = Some(timestamp());
    Ok(Outcome {
        run,
        browse_attempts,
        requests,
    })
}

/// Extracts every paper, writing `<id>.json`, `<id>.log.json` and
/// `manifest.json` under `opts.out`. Failing papers are reported in the
/// manifest; the others still complete.
pub fn run_extract(opts: &ExtractOptions) -> Result<Manifest> {
    if opts.browse && opts.strategy != Strategy::Llm {
        bail!("--browse needs --strategy llm");
    }
    if !(opts.fraction > 0.0 && opts.fraction <= 1.0) {
        bail!("--fraction must be in (0, 1], got {}", opts.fraction);
    }
    let offline = opts.mock_dir.is_some();
    if opts.strategy == Strategy::Llm && !offline {
        if opts.model.endpoint_url.is_empty() {
            bail!("--strategy llm needs an endpoint_url in --config, or --mock-dir");
        }
        opts.model.validate()?;
    }
    let papers = discover(&opts.papers)?;
    if papers.is_empty() {
        bail!("no papers found");
    }
    let base: Box<dyn Fetcher + Sync> = if offline {
        Box::new(NoFetch)
    } else {
        Box::new(HttpFetcher::new(Duration::from_secs(opts.model.request_timeout)))
    };
    let fetcher: Box<dyn Fetcher + Sync> = match &opts.fetch_cache {
        Some(dir) => Box::new(CachingFetcher::new(dir, base)),
        None => base,
    };
    let env = Env {
        opts,
        shared: (opts.strategy == Strategy::Llm && !offline)
            .then(|| Limited::new(HttpBackend::new(Duration::from_secs(opts.model.request_timeout)), opts.max_in_flight)),
        fetcher,
        ledger: SharedLedger::default(),
        shots: generate_synthetic_examples(&opts.schema, opts.shots, opts.seed)?,
    };
    fs::create_dir_all(&opts.out).with_context(|| format!("creating {}", opts.out.display()))?;

    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<PaperEntry>>> = Mutex::new(vec![None; papers.len()]);
    let worker = || -> Result<()> {
        loop {
            let i = next.fetch_add(1, Ordering::SeqCst);
            let Some(path) = papers.get(i) else { return Ok(()) };
            let id = paper_id(path);
            let entry = match run_one(&env, path) {
                Ok(Outcome {
                    run,
                    browse_attempts,
                    requests,
                }) => {
                    write_file(&opts.out.join(format!("{id}.json")), &(run.record.to_json_string() + "\n"))?;
                    write_file(
                        &opts.out.join(format!("{id}.log.json")),
                        &to_pretty(&json!({ "log": run.log, "warnings": run.warnings })),
                    )?;
                    if opts.record_requests {
                        write_file(&opts.out.join("requests").join(format!("{id}.jsonl")), &(requests.join("\n") + "\n"))?;
                    }
                    PaperEntry {
                        paper_id: id,
                        status: "ok",
                        error: None,
                        attempts: run.attempts_used,
                        browse_attempts,
                        input_tokens: run.input_tokens,
                        output_tokens: run.output_tokens,
                        log_entries: run.log.len(),
                        warnings: run.warnings,
                    }
                }
                Err(e) => {
                    log::error!("{id}: {e:#}");
                    PaperEntry {
                        paper_id: id,
                        status: "error",
                        error: Some(format!("{e:#}")),
                        attempts: 0,
                        browse_attempts: 0,
                        input_tokens: 0,
                        output_tokens: 0,
                        log_entries: 0,
                        warnings: Vec::new(),
                    }
                }
            };
            results.lock().expect("results lock")[i] = Some(entry);
        }
    };
    let jobs = opts.jobs.clamp(1, papers.len());
    std::thread::scope(|s| {
        let handles: Vec<_> = (0..jobs).map(|_| s.spawn(worker)).collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("worker panicked"))
            .collect::<Result<Vec<()>>>()
    })?;

    let mut ledger = env.ledger.snapshot();
    for (model, (i, o)) in &opts.prices {
        ledger.set_price(model, *i, *o);
    }
    let manifest = Manifest {
        strategy: opts.strategy,
        model: (opts.strategy == Strategy::Llm).then(|| opts.model.model_id.clone()),
        category: opts.schema.category,
        profile: opts.profile.clone(),
        shots: opts.shots,
        fraction: opts.fraction,
        seed: opts.seed,
        browse: opts.browse,
        timestamp: timestamp(),
        papers: results.into_inner().expect("results lock").into_iter().flatten().collect(),
        usage: estimate_cost(&ledger),
        notes: vec!["token counts include failed attempts".to_owned()],
    };
    write_file(&opts.out.join("manifest.json"), &to_pretty(&manifest))?;
    Ok(manifest)
}

pub struct EvaluateOptions {
    pub predictions: PathBuf,
    pub gold: PathBuf,
    /// Replace the built-in schema of a category.
    pub schemas: Vec<Schema>,
    pub profiles: Vec<(String, LengthProfile)>,
    pub year_after: Option<i32>,
    pub out: PathBuf,
    pub prices: Vec<(String, (f64, f64))>,
    pub label: String,
}

fn is_prediction_file(p: &Path) -> bool {
    let name = p.file_name().and_then(|n| n.to_str()).unwrap_or("");
    name.ends_with(".json") && !name.ends_with(".log.json") && name != "manifest.json"
}

fn manifest_usage(dir: &Path) -> Result<Vec<CostRow>> {
    let path = dir.join("manifest.json");
    if !path.exists() {
        return Ok(Vec::new());
    }
    let v: Value = serde_json::from_str(&fs::read_to_string(&path)?).with_context(|| format!("{}", path.display()))?;
    Ok(match v.get("usage") {
        Some(u) => serde_json::from_value(u.clone()).with_context(|| format!("usage in {}", path.display()))?,
        None => Vec::new(),
    })
}

/// Scores every `<id>.json` prediction against `<gold>/<id>.json` and
/// writes `report.json` and `report.md` under `opts.out`.
pub fn run_evaluate(opts: &EvaluateOptions) -> Result<ScoreReport> {
    let mut preds: Vec<PathBuf> = fs::read_dir(&opts.predictions)
        .with_context(|| format!("reading {}", opts.predictions.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| is_prediction_file(p))
        .collect();
    preds.sort();
    if preds.is_empty() {
        bail!("no predictions in {}", opts.predictions.display());
    }
    let schema_for = |c: Category| opts.schemas.iter().find(|s| s.category == c).cloned().unwrap_or_else(|| c.builtin_schema());
    let mut scores = Vec::new();
    let mut adherence: Vec<Vec<f64>> = vec![Vec::new(); opts.profiles.len()];
    for pred_path in &preds {
        let id = pred_path.file_stem().and_then(|s| s.to_str()).unwrap_or_default().to_owned();
        let gold_path = opts.gold.join(format!("{id}.json"));
        let gold_raw =
            fs::read_to_string(&gold_path).with_context(|| format!("missing gold for {id} at {}", gold_path.display()))?;
        let code: Value = serde_json::from_str(&gold_raw).with_context(|| format!("{}", gold_path.display()))?;
        let category = code
            .get("category")
            .and_then(Value::as_str)
            .and_then(Category::from_code)
            .with_context(|| format!("{}: bad or missing category", gold_path.display()))?;
        let schema = schema_for(category);
        let gold = GoldRecord::from_json_str(&gold_raw, &schema).with_context(|| format!("{}", gold_path.display()))?;
        let pred_raw = fs::read_to_string(pred_path)?;
        let pred = MetadataRecord::from_json_str(&pred_raw, &schema).with_context(|| format!("{}", pred_path.display()))?;
        scores.push(score_paper(&pred, &gold, &schema)?);
        for (k, (_, profile)) in opts.profiles.iter().enumerate() {
            let tightened = apply_length_profile(&schema, profile)?;
            adherence[k].push(length_adherence(&pred, &tightened));
        }
    }
    let filter = ReportFilter {
        year_after: opts.year_after,
    };
    let mut report = aggregate_report(&scores, &filter)?;
    report.length_adherence = opts
        .profiles
        .iter()
        .zip(&adherence)
        .map(|((name, _), xs)| AdherenceRow {
            profile: name.clone(),
            adherence: xs.iter().sum::<f64>() / xs.len() as f64,
        })
        .collect();
    let mut cost = manifest_usage(&opts.predictions)?;
    if !opts.prices.is_empty() {
        let mut ledger = CostLedger::with_prices(opts.prices.clone());
        for row in &cost {
            ledger.add(&row.model, row.input_tokens, row.output_tokens);
        }
        cost = estimate_cost(&ledger);
    }
    report.cost = cost;
    write_file(&opts.out.join("report.json"), &to_pretty(&report))?;
    write_file(&opts.out.join("report.md"), &render_markdown(&[(&opts.label, &report)]))?;
    Ok(report)
}

/// Writes `example_<i>.txt` (paper) and `example_<i>.json` (gold) pairs.
pub fn run_fewshot(schema: &Schema, n: usize, seed: u64, out: &Path) -> Result<usize> {
    let examples = generate_synthetic_examples(schema, n, seed)?;
    for (i, ex) in examples.iter().enumerate() {
        write_file(&out.join(format!("example_{}.txt", i + 1)), &ex.paper_text)?;
        write_file(&out.join(format!("example_{}.json", i + 1)), &(ex.gold.to_json_string() + "\n"))?;
    }
    Ok(examples.len())
}

pub fn run_schema_check(schema: &Schema) -> Vec<Violation> {
    validate_schema(schema)
}

/// Combines report files into one Markdown document, one row per report.
pub fn run_report(inputs: &[PathBuf]) -> Result<String> {
    if inputs.is_empty() {
        bail!("no reports given");
    }
    let mut loaded = Vec::new();
    for p in inputs {
        let raw = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
        let r: ScoreReport = serde_json::from_str(&raw).with_context(|| format!("report {}", p.display()))?;
        let label = if p.file_name().is_some_and(|n| n == "report.json") {
            p.parent().and_then(|d| d.file_name())
        } else {
            p.file_stem()
        };
        loaded.push((label.map_or_else(|| "report".to_owned(), |s| s.to_string_lossy().into_owned()), r));
    }
    let refs: Vec<(&str, &ScoreReport)> = loaded.iter().map(|(l, r)| (l.as_str(), r)).collect();
    Ok(render_markdown(&refs))
}
