//! The `escape` command line.
//!
//! ```text
//! escape scrape   --archive DIR --base-url URL [--cookie-file F | ESCAPE_COOKIE]
//! escape features --archive DIR [--strict]
//! escape label    --archive DIR [--assign ID=LABEL]... [--propagate-only] [--serve ADDR [--ui-dir DIR]]
//! escape evaluate --archive DIR [--splits N] [--seed S]
//! escape classify --archive DIR [--seed S]
//! escape report   --archive DIR [--speaker LABEL] [--format table|csv] [--out-dir DIR]
//! escape validate --archive DIR
//! ```
//!
//! Derived files go to `<archive>/derived/`, each with a `.meta.json`
//! sidecar holding the full run configuration.

use std::ffi::OsString;
use std::fmt::Display;
use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::{info, warn};

use crate::hmm::FitOptions;
use crate::ingest::{open_archive, scrape, Archive, ScrapeConfig};
use crate::label::server::BackgroundServer;
use crate::label::{LabelRecord, LabelSource, LabelStore, Labeler, Provenance, LABELS_FILE};
use crate::learn::{nested_cv_evaluate, train_final_and_classify, write_split_csv, EvaluationSummary};
use crate::pipeline::{self, RunConfig};
use crate::report::usage_report;
use crate::MfccParams;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
/// Some items failed and `--strict` was given.
pub const EXIT_PARTIAL: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "escape", version, about = "Voice-assistant archive toolkit")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Archive directory.
    #[arg(long, global = true, default_value = ".")]
    pub archive: PathBuf,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Exit nonzero when any item failed.
    #[arg(long, global = true)]
    pub strict: bool,
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Mirror the remote activity listing into the archive.
    Scrape(ScrapeArgs),
    /// Extract MFCCs for every clip with audio.
    Features(FeatureArgs),
    /// Propagate labels, assign labels by hand, or serve the labeling API.
    Label(LabelArgs),
    /// Nested cross-validation over the labeled clips.
    Evaluate(EvalArgs),
    /// Train on every labeled clip and label the rest.
    Classify(EvalArgs),
    /// Status, device and intent counts.
    Report(ReportArgs),
    /// Check that the archive, its audio and its labels parse.
    Validate,
}

#[derive(Debug, Args)]
pub struct ScrapeArgs {
    #[arg(long)]
    pub base_url: String,
    /// File holding the cookie header value.
    #[arg(long, conflicts_with = "cookie")]
    pub cookie_file: Option<PathBuf>,
    #[arg(long, env = "ESCAPE_COOKIE", hide_env_values = true)]
    pub cookie: Option<String>,
    #[arg(long, default_value_t = 50)]
    pub page_size: usize,
    #[arg(long)]
    pub list_template: Option<String>,
    #[arg(long)]
    pub audio_template: Option<String>,
    #[arg(long, default_value_t = 3)]
    pub max_retries: u32,
    #[arg(long, default_value_t = 200)]
    pub backoff_ms: u64,
    #[arg(long, default_value_t = 30_000)]
    pub timeout_ms: u64,
}

#[derive(Debug, Args)]
pub struct MfccArgs {
    /// Seconds kept from the start of each clip.
    #[arg(long)]
    pub max_duration: Option<f64>,
    #[arg(long)]
    pub n_filters: Option<usize>,
    #[arg(long)]
    pub fft_size: Option<usize>,
}

#[derive(Debug, Args)]
pub struct FeatureArgs {
    #[command(flatten)]
    pub mfcc: MfccArgs,
}

#[derive(Debug, Args)]
pub struct LabelArgs {
    /// Manual label, repeatable.
    #[arg(long, value_name = "ID=LABEL")]
    pub assign: Vec<String>,
    /// Run one propagation pass and exit.
    #[arg(long)]
    pub propagate_only: bool,
    /// Serve the labeling API on this address.
    #[arg(long, value_name = "ADDR", conflicts_with = "propagate_only")]
    pub serve: Option<SocketAddr>,
    /// Static UI assets to serve next to the API.
    #[arg(long, requires = "serve")]
    pub ui_dir: Option<PathBuf>,
    #[arg(long, default_value_t = crate::label::DEFAULT_THRESHOLD)]
    pub threshold: f64,
    /// Allowed speaker labels.
    #[arg(long, value_delimiter = ',', default_values_t = crate::label::default_label_set())]
    pub labels: Vec<String>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long, default_value_t = 100)]
    pub splits: usize,
    #[arg(long, default_value_t = 0.33)]
    pub test_fraction: f64,
    #[arg(long, default_value_t = 3)]
    pub inner_folds: usize,
    /// Comma-separated ridge penalties (default: 1e-10 to 1e10 by decades).
    #[arg(long, value_delimiter = ',')]
    pub alpha_grid: Option<Vec<f64>>,
    #[arg(long, default_value_t = 5)]
    pub hmm_states: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Table,
    Csv,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Restrict intent counts to clips with this speaker label.
    #[arg(long)]
    pub speaker: Option<String>,
    #[arg(long, value_enum, default_value_t = Format::Table)]
    pub format: Format,
    /// With `--format csv`, write status.csv, device.csv and intent.csv here
    /// instead of standard output.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', default_values_t = crate::label::default_label_set())]
    pub labels: Vec<String>,
}

/// Something that stops a command, printed to standard error.
#[derive(Debug)]
pub struct Failure(String);

impl<E: Display> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure(e.to_string())
    }
}

type Outcome = Result<i32, Failure>;

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
        }
    };
    let level = match cli.global.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).try_init();

    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(j) = cli.global.jobs {
        if j == 0 {
            eprintln!("error: --jobs must be positive");
            return EXIT_USAGE;
        }
        builder = builder.num_threads(j);
    }
    let pool = match builder.build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_FAILURE;
        }
    };
    match pool.install(|| dispatch(&cli)) {
        Ok(code) => code,
        Err(Failure(message)) => {
            eprintln!("error: {message}");
            EXIT_FAILURE
        }
    }
}

fn dispatch(cli: &Cli) -> Outcome {
    let g = &cli.global;
    match &cli.command {
        Command::Scrape(a) => cmd_scrape(g, a),
        Command::Features(a) => cmd_features(g, a),
        Command::Label(a) => cmd_label(g, a),
        Command::Evaluate(a) => cmd_evaluate(g, a),
        Command::Classify(a) => cmd_classify(g, a),
        Command::Report(a) => cmd_report(g, a),
        Command::Validate => cmd_validate(g),
    }
}

fn open(g: &GlobalArgs) -> Result<Archive, Failure> {
    if !g.archive.is_dir() {
        return Err(Failure(format!("archive {} does not exist", g.archive.display())));
    }
    Ok(open_archive(&g.archive)?)
}

fn base_config(g: &GlobalArgs) -> RunConfig {
    let mut c = RunConfig::new(&g.archive);
    c.seed = g.seed;
    c
}

fn partial(g: &GlobalArgs, failed: usize) -> i32 {
    if failed > 0 && g.strict {
        EXIT_PARTIAL
    } else {
        EXIT_OK
    }
}

fn cmd_scrape(g: &GlobalArgs, a: &ScrapeArgs) -> Outcome {
    let cookie = match (&a.cookie_file, &a.cookie) {
        (Some(path), _) => std::fs::read_to_string(path)
            .map_err(|e| Failure(format!("{}: {e}", path.display())))?
            .trim()
            .to_string(),
        (None, Some(c)) => c.trim().to_string(),
        (None, None) => return Err(Failure("no cookie: pass --cookie-file or set ESCAPE_COOKIE".into())),
    };
    let mut config = ScrapeConfig::new(&a.base_url, cookie);
    config.page_size = a.page_size;
    config.max_retries = a.max_retries;
    config.backoff_ms = a.backoff_ms;
    config.timeout_ms = a.timeout_ms;
    config.jobs = g.jobs.unwrap_or(4);
    if let Some(t) = &a.list_template {
        config.list_template = t.clone();
    }
    if let Some(t) = &a.audio_template {
        config.audio_template = t.clone();
    }
    let mut archive = if g.archive.join(crate::ingest::RECORDS_FILE).exists() {
        open_archive(&g.archive)?
    } else {
        Archive::create(&g.archive)?
    };
    let rt = tokio::runtime::Builder::new_current_thread().enable_all().build()?;
    let outcome = rt.block_on(scrape(&config, &mut archive))?;
    println!(
        "scraped {} pages: {} new records, {} audio files, {} already present, {} malformed",
        outcome.pages, outcome.new_records, outcome.audio_files, outcome.already_present, outcome.malformed
    );
    Ok(partial(g, outcome.malformed))
}

fn cmd_features(g: &GlobalArgs, a: &FeatureArgs) -> Outcome {
    let archive = open(g)?;
    let mut config = base_config(g);
    apply_mfcc(&mut config.mfcc, &a.mfcc);
    config.validate()?;
    let run = pipeline::extract_features(&archive, &config.mfcc)?;
    for f in &run.failures {
        eprintln!("failed: {}: {}", f.clip_id, f.reason);
    }
    println!(
        "features: {} clips processed, {} failed, {} records without audio",
        run.features.len(),
        run.failures.len(),
        run.without_audio
    );
    if run.features.is_empty() && !run.failures.is_empty() {
        return Err(pipeline::PipelineError::AllFailed.into());
    }
    let dir = config.derived_dir();
    pipeline::ensure_dir(&dir)?;
    let path = dir.join(pipeline::FEATURES_FILE);
    pipeline::save_features(&path, &run.features)?;
    pipeline::write_meta(&path, "features", &config)?;
    info!("wrote {}", path.display());
    Ok(partial(g, run.failures.len()))
}

fn apply_mfcc(p: &mut MfccParams, a: &MfccArgs) {
    if let Some(v) = a.max_duration {
        p.max_duration = v;
    }
    if let Some(v) = a.n_filters {
        p.n_filters = v;
    }
    if let Some(v) = a.fft_size {
        p.fft_size = v;
    }
}

fn load_features(config: &RunConfig) -> Result<Vec<crate::MfccMatrix>, Failure> {
    Ok(pipeline::load_features(&config.derived_dir().join(pipeline::FEATURES_FILE))?)
}

fn cmd_label(g: &GlobalArgs, a: &LabelArgs) -> Outcome {
    let archive = open(g)?;
    let mut config = base_config(g);
    config.threshold = a.threshold;
    if let Some(addr) = a.serve {
        config.bind = addr;
    }
    config.validate()?;
    let features = load_features(&config)?;
    let signatures = pipeline::signatures(&features)?;
    let clips = pipeline::clip_infos(&archive, &features);
    let store = LabelStore::open(archive.root().join(LABELS_FILE))?;
    let mut labeler = Labeler::new(
        clips,
        signatures.into_values().collect(),
        store,
        a.threshold,
        a.labels.clone(),
    )?;
    for assignment in &a.assign {
        let (id, label) = assignment
            .split_once('=')
            .ok_or_else(|| Failure(format!("--assign expects ID=LABEL, got {assignment:?}")))?;
        let outcome = labeler.submit_label(id, label)?;
        println!(
            "labeled {id} as {label}: {} propagated, {} queued",
            outcome.auto_propagated, outcome.remaining
        );
    }
    let stats = labeler.stats();
    println!(
        "labels: {} manual, {} propagated, {} classified; {} of {} clips queued",
        stats.manual, stats.propagated, stats.classified, stats.queued, stats.total
    );
    if let Some(addr) = a.serve {
        if let Some(dir) = &a.ui_dir {
            if !dir.join("index.html").exists() {
                warn!("{} has no index.html; serving the API only", dir.display());
            }
        }
        let server = BackgroundServer::start(labeler, addr, a.ui_dir.clone())?;
        println!("labeling API on {} (Ctrl-C to stop)", server.base_url());
        loop {
            std::thread::park();
        }
    }
    if !a.propagate_only && a.assign.is_empty() {
        if let Some(next) = labeler.next_queued() {
            println!("next clip to label: {}", next.clip_id);
        }
    }
    Ok(EXIT_OK)
}

fn eval_config(g: &GlobalArgs, a: &EvalArgs) -> Result<RunConfig, Failure> {
    let mut config = base_config(g);
    config.splits = a.splits;
    config.test_fraction = a.test_fraction;
    config.inner_folds = a.inner_folds;
    if let Some(grid) = &a.alpha_grid {
        config.alpha_grid = grid.clone();
    }
    config.hmm = FitOptions {
        n_states: a.hmm_states,
        ..FitOptions::default()
    };
    config.validate()?;
    Ok(config)
}

/// Similarity over every clip with features; written next to the features.
fn similarity(config: &RunConfig, command: &str) -> Result<crate::SimilarityMatrix, Failure> {
    let features = load_features(config)?;
    let sim = pipeline::compute_similarity(&features, config)?;
    let path = config.derived_dir().join(pipeline::SIMILARITY_FILE);
    pipeline::save_similarity(&path, &sim)?;
    pipeline::write_meta(&path, command, config)?;
    Ok(sim)
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), Failure> {
    std::fs::write(path, bytes).map_err(|e| Failure(format!("{}: {e}", path.display())))
}

fn cmd_evaluate(g: &GlobalArgs, a: &EvalArgs) -> Outcome {
    let archive = open(g)?;
    let config = eval_config(g, a)?;
    let store = LabelStore::open(archive.root().join(LABELS_FILE))?;
    let sim = similarity(&config, "evaluate")?;
    let labeled = pipeline::training_labels(&store, sim.clip_ids());
    info!("{} labeled clips of {}", labeled.len(), sim.len());
    let reports = nested_cv_evaluate(&sim, &labeled, &config.cv_options())?;
    let summary = EvaluationSummary::from_reports(&reports);

    let dir = config.derived_dir();
    let csv_path = dir.join(pipeline::EVALUATION_FILE);
    let mut csv = Vec::new();
    write_split_csv(&reports, &mut csv)?;
    write_file(&csv_path, &csv)?;
    pipeline::write_meta(&csv_path, "evaluate", &config)?;
    let json_path = dir.join(pipeline::SUMMARY_FILE);
    let mut json = serde_json::to_string_pretty(&summary)?;
    json.push('\n');
    write_file(&json_path, json.as_bytes())?;
    pipeline::write_meta(&json_path, "evaluate", &config)?;

    println!(
        "{} splits over {} labeled clips: median train {:.4}, median test {:.4}, mean test {:.4}, {} perfect test splits",
        summary.n_splits,
        labeled.len(),
        summary.median_train_accuracy,
        summary.median_test_accuracy,
        summary.mean_test_accuracy,
        summary.perfect_test_splits
    );
    Ok(EXIT_OK)
}

fn cmd_classify(g: &GlobalArgs, a: &EvalArgs) -> Outcome {
    let archive = open(g)?;
    let config = eval_config(g, a)?;
    let store = LabelStore::open(archive.root().join(LABELS_FILE))?;
    let sim = similarity(&config, "classify")?;
    let labeled = pipeline::training_labels(&store, sim.clip_ids());
    let unlabeled: Vec<String> = sim
        .clip_ids()
        .iter()
        .filter(|id| store.get(id).is_none_or(|r| r.source == LabelSource::Classified))
        .cloned()
        .collect();
    let outcome = train_final_and_classify(&sim, &labeled, &unlabeled, &config.cv_options())?;

    let mut out = Vec::new();
    for (id, label) in &outcome.predictions {
        let record = LabelRecord {
            clip_id: id.clone(),
            label: label.clone(),
            source: LabelSource::Classified,
            labeled_at: None,
            provenance: None::<Provenance>,
        };
        serde_json::to_writer(&mut out, &record)?;
        out.push(b'\n');
    }
    let path = config.derived_dir().join(pipeline::CLASSIFIED_FILE);
    write_file(&path, &out)?;
    pipeline::write_meta(&path, "classify", &config)?;
    let model_path = config.derived_dir().join(pipeline::CLASSIFIER_FILE);
    let model = serde_json::json!({
        "chosen_alpha": outcome.chosen_alpha,
        "cv_accuracy": outcome.cv_accuracy,
        "model": outcome.model,
    });
    write_file(&model_path, &serde_json::to_vec_pretty(&model)?)?;
    pipeline::write_meta(&model_path, "classify", &config)?;
    println!(
        "classified {} clips from {} labeled (alpha {:e}) into {}",
        outcome.predictions.len(),
        labeled.len(),
        outcome.chosen_alpha,
        path.display()
    );
    Ok(EXIT_OK)
}

fn cmd_report(g: &GlobalArgs, a: &ReportArgs) -> Outcome {
    let archive = open(g)?;
    let mut store = LabelStore::open(archive.root().join(LABELS_FILE))?;
    let classified = archive.root().join(pipeline::DERIVED_DIR).join(pipeline::CLASSIFIED_FILE);
    if classified.exists() {
        store.overlay(&classified)?;
    }
    let report = usage_report(&archive, &store, a.speaker.as_deref(), &a.labels)?;
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    match (a.format, &a.out_dir) {
        (Format::Table, _) => report.write_table(&mut out)?,
        (Format::Csv, Some(dir)) => {
            std::fs::create_dir_all(dir).map_err(|e| Failure(format!("{}: {e}", dir.display())))?;
            report.write_status_csv(std::fs::File::create(dir.join("status.csv"))?)?;
            report.write_device_csv(std::fs::File::create(dir.join("device.csv"))?)?;
            report.write_intent_csv(std::fs::File::create(dir.join("intent.csv"))?)?;
            writeln!(out, "wrote status.csv, device.csv and intent.csv to {}", dir.display())?;
        }
        (Format::Csv, None) => {
            writeln!(out, "# status")?;
            report.write_status_csv(&mut out)?;
            writeln!(out, "\n# device")?;
            report.write_device_csv(&mut out)?;
            writeln!(out, "\n# intent")?;
            report.write_intent_csv(&mut out)?;
        }
    }
    Ok(EXIT_OK)
}

fn cmd_validate(g: &GlobalArgs) -> Outcome {
    let archive = open(g)?;
    let mut problems = 0;
    for r in archive.records() {
        if r.audio_file.is_none() {
            continue;
        }
        match archive.audio_path(r) {
            None => {
                problems += 1;
                eprintln!("{}: audio reference {:?} is not inside audio/", r.id, r.audio_file);
            }
            Some(_) => {
                if let Some(Err(e)) = archive.load_clip(r) {
                    problems += 1;
                    eprintln!("{}: {e}", r.id);
                }
            }
        }
    }
    let store = LabelStore::open(archive.root().join(LABELS_FILE))?;
    let orphans: Vec<_> = store.iter().filter(|l| !archive.contains(&l.clip_id)).collect();
    for o in &orphans {
        eprintln!("label for unknown clip {}", o.clip_id);
    }
    problems += orphans.len();
    println!(
        "{} records, {} labels, {} problems",
        archive.len(),
        store.len(),
        problems
    );
    Ok(if problems > 0 { EXIT_FAILURE } else { EXIT_OK })
}
