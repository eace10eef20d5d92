//! `seeker`: corpus generation, detection, evaluation, null FPR simulation
//! and scaling benchmarks.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error.

use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use seeker_core::corpus::{self, AttackDescriptor, RecordMeta, Strength};
use seeker_core::detectors::AarSmoothing;
use seeker_core::evaluation::{config_hash, report_json, ReportMeta};
use seeker_core::harness::{self, BenchSpec, Calibration};
use seeker_core::rng::RNG_ALGORITHM;
use seeker_core::stats::thresholds::{DEFAULT_CLT_CUTOFF, DEFAULT_MAX_WINDOW};
use seeker_core::stream::{DEFAULT_ALPHA, DEFAULT_GAMMA};
use seeker_core::{
    score_tokens, AttackKind, CorpusRecord, CorpusSpec, Detector, Scheme, StrengthLabel, TokenScorerKey,
    WaterSeekerConfig,
};

#[derive(Parser)]
#[command(name = "seeker", version, about = "Watermark segment detection harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a labeled synthetic corpus as JSONL.
    Generate(GenerateArgs),
    /// Run one detector over a corpus and write per-document results.
    Detect(DetectArgs),
    /// Score results (or a fresh detection run) against corpus labels.
    Evaluate(EvaluateArgs),
    /// Document-level false-positive rate on null streams.
    SimulateFpr(SimulateFprArgs),
    /// Time detectors across document lengths and fit growth exponents.
    Bench(BenchArgs),
    /// Turn token ID sequences into corpus records under a secret key.
    Score(ScoreArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum SchemeArg {
    Kgw,
    Aar,
}

impl From<SchemeArg> for Scheme {
    fn from(s: SchemeArg) -> Self {
        match s {
            SchemeArg::Kgw => Scheme::Kgw,
            SchemeArg::Aar => Scheme::Aar,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum StrengthArg {
    Mixed,
    Strong,
    Medium,
    Weak,
}

#[derive(Clone, Copy, ValueEnum)]
enum AttackArg {
    Delete,
    Substitute,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum DetectorKind {
    Fulltext,
    Winmax,
    Flsw,
    Waterseeker,
    WaterseekerLocalize,
}

#[derive(Clone, Copy, ValueEnum)]
enum SmoothingArg {
    Uniform,
    LogScore,
}

#[derive(Args)]
struct CalibrationArgs {
    /// In-window false-positive probability.
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    alpha: f64,
    /// Window length from which KGW uses the normal threshold.
    #[arg(long, default_value_t = DEFAULT_CLT_CUTOFF)]
    clt_cutoff: usize,
    /// Window lengths precomputed in the threshold table.
    #[arg(long, default_value_t = DEFAULT_MAX_WINDOW)]
    max_window: usize,
}

impl CalibrationArgs {
    fn calibration(&self) -> Calibration {
        Calibration { alpha: self.alpha, clt_cutoff: self.clt_cutoff, max_window: self.max_window }
    }
}

#[derive(Args)]
struct DetectorArgs {
    #[arg(long, value_enum)]
    detector: DetectorKind,
    /// WinMax window size step.
    #[arg(long)]
    interval: Option<usize>,
    /// FLSW window, or the WaterSeeker smoothing window.
    #[arg(long)]
    window: Option<usize>,
    #[arg(long)]
    top_k: Option<usize>,
    #[arg(long)]
    connect_tolerance: Option<usize>,
    #[arg(long)]
    min_segment_len: Option<usize>,
    #[arg(long, value_enum)]
    aar_smoothing: Option<SmoothingArg>,
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Data(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Data(e)
    }
}

impl From<seeker_core::Error> for Failure {
    fn from(e: seeker_core::Error) -> Self {
        match e {
            seeker_core::Error::InvalidParameter(_) | seeker_core::Error::InfeasiblePacking(_) => {
                Failure::Usage(e.to_string())
            }
            other => Failure::Data(other.into()),
        }
    }
}

type CmdResult = Result<(), Failure>;

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

impl DetectorArgs {
    fn detector(&self) -> Result<Detector, Failure> {
        let ws_flags = self.top_k.is_some()
            || self.connect_tolerance.is_some()
            || self.min_segment_len.is_some()
            || self.aar_smoothing.is_some();
        let is_ws = matches!(self.detector, DetectorKind::Waterseeker | DetectorKind::WaterseekerLocalize);
        if ws_flags && !is_ws {
            return Err(usage("--top-k, --connect-tolerance, --min-segment-len and --aar-smoothing need a waterseeker detector"));
        }
        if self.interval.is_some() && self.detector != DetectorKind::Winmax {
            return Err(usage("--interval only applies to --detector winmax"));
        }
        let positive = |v: usize, flag: &str| if v == 0 { Err(usage(format!("{flag} must be positive"))) } else { Ok(v) };
        match self.detector {
            DetectorKind::Fulltext => {
                if self.window.is_some() {
                    return Err(usage("--window does not apply to --detector fulltext"));
                }
                Ok(Detector::FullText)
            }
            DetectorKind::Winmax => {
                if self.window.is_some() {
                    return Err(usage("--window does not apply to --detector winmax"));
                }
                Ok(Detector::WinMax { interval: positive(self.interval.unwrap_or(1), "--interval")? })
            }
            DetectorKind::Flsw => {
                let window = self.window.ok_or_else(|| usage("--detector flsw needs --window"))?;
                Ok(Detector::Flsw { window: positive(window, "--window")? })
            }
            DetectorKind::Waterseeker | DetectorKind::WaterseekerLocalize => {
                let d = WaterSeekerConfig::default();
                let cfg = WaterSeekerConfig {
                    window: positive(self.window.unwrap_or(d.window), "--window")?,
                    top_k: positive(self.top_k.unwrap_or(d.top_k), "--top-k")?,
                    connect_tolerance: self.connect_tolerance.unwrap_or(d.connect_tolerance),
                    min_segment_len: self.min_segment_len.unwrap_or(d.min_segment_len),
                    aar_smoothing: match self.aar_smoothing {
                        None => d.aar_smoothing,
                        Some(SmoothingArg::Uniform) => AarSmoothing::Uniform,
                        Some(SmoothingArg::LogScore) => AarSmoothing::LogScore,
                    },
                };
                Ok(if self.detector == DetectorKind::Waterseeker {
                    Detector::WaterSeeker(cfg)
                } else {
                    Detector::LocalizationOnly(cfg)
                })
            }
        }
    }
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long, value_enum)]
    scheme: SchemeArg,
    #[arg(long, default_value_t = DEFAULT_GAMMA)]
    gamma: f64,
    #[arg(long, default_value_t = 300)]
    pos: usize,
    #[arg(long, default_value_t = 300)]
    neg: usize,
    #[arg(long, default_value_t = 10_000)]
    doc_len: usize,
    #[arg(long, default_value_t = 100)]
    seg_min: usize,
    #[arg(long, default_value_t = 400)]
    seg_max: usize,
    /// Watermarked segments per positive document.
    #[arg(long, default_value_t = 1)]
    segments: usize,
    #[arg(long, default_value_t = 100)]
    min_gap: usize,
    #[arg(long, value_enum, default_value_t = StrengthArg::Mixed)]
    strength: StrengthArg,
    /// Edit attack applied after embedding.
    #[arg(long, value_enum, requires = "attack_ratio")]
    attack: Option<AttackArg>,
    #[arg(long, requires = "attack")]
    attack_ratio: Option<f64>,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

fn cmd_generate(a: &GenerateArgs) -> CmdResult {
    let scheme = Scheme::from(a.scheme);
    let pool = match a.strength {
        StrengthArg::Mixed => Strength::mixed(scheme, a.gamma)?,
        StrengthArg::Strong => vec![Strength::preset(StrengthLabel::Strong, scheme, a.gamma)?],
        StrengthArg::Medium => vec![Strength::preset(StrengthLabel::Medium, scheme, a.gamma)?],
        StrengthArg::Weak => vec![Strength::preset(StrengthLabel::Weak, scheme, a.gamma)?],
    };
    let spec = CorpusSpec {
        scheme,
        gamma: a.gamma,
        n_positive: a.pos,
        n_negative: a.neg,
        doc_len: a.doc_len,
        seg_len_range: (a.seg_min, a.seg_max),
        segments_per_doc: a.segments,
        min_gap: a.min_gap,
        strength_pool: pool,
        master_seed: a.seed,
    };
    spec.validate()?;
    let mut records = corpus::build_corpus(&spec)?;
    if let (Some(kind), Some(ratio)) = (a.attack, a.attack_ratio) {
        let kind = match kind {
            AttackArg::Delete => AttackKind::Delete,
            AttackArg::Substitute => AttackKind::Substitute,
        };
        records = corpus::attack_corpus(&records, kind, ratio, seeker_core::rng::derive_seed(a.seed, u64::MAX))?;
    }
    corpus::save_corpus(&records, &a.out).with_context(|| format!("writing {}", a.out.display()))?;
    let positive = records.iter().filter(|r| r.is_positive()).count();
    print_json(&json!({
        "records": records.len(),
        "positive": positive,
        "negative": records.len() - positive,
        "out": a.out.display().to_string(),
    }));
    Ok(())
}

#[derive(Args)]
struct DetectArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    detector: DetectorArgs,
    #[command(flatten)]
    calibration: CalibrationArgs,
    #[arg(long, default_value_t = 1)]
    threads: usize,
    /// Accepted for uniformity; detection draws no randomness.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn load(path: &Path) -> Result<Vec<CorpusRecord>, Failure> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    corpus::read_corpus(BufReader::new(file))
        .with_context(|| format!("reading corpus {}", path.display()))
        .map_err(Failure::Data)
}

fn cmd_detect(a: &DetectArgs) -> CmdResult {
    let detector = a.detector.detector()?;
    let records = load(&a.corpus)?;
    let results = harness::run_detection(&records, &detector, &a.calibration.calibration(), a.threads)?;
    let out = File::create(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    harness::write_results(&results, BufWriter::new(out))?;
    let errors: Vec<_> = results.iter().filter_map(|r| r.error.as_ref().map(|e| (&r.doc_id, e))).collect();
    for (id, e) in errors.iter().take(5) {
        eprintln!("{id}: {e}");
    }
    print_json(&json!({
        "detector": detector.id(),
        "config_hash": config_hash(&(detector, a.calibration.calibration()))?,
        "documents": results.len(),
        "flagged": results.iter().filter(|r| r.flagged()).count(),
        "errors": errors.len(),
        "out": a.out.display().to_string(),
    }));
    Ok(())
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    corpus: PathBuf,
    /// Results from `detect`. Without it, detection runs here using the
    /// detector flags.
    #[arg(long, conflicts_with = "detector")]
    results: Option<PathBuf>,
    #[arg(long)]
    detector: Option<DetectorKind>,
    #[arg(long)]
    interval: Option<usize>,
    #[arg(long)]
    window: Option<usize>,
    #[arg(long)]
    top_k: Option<usize>,
    #[arg(long)]
    connect_tolerance: Option<usize>,
    #[arg(long)]
    min_segment_len: Option<usize>,
    #[arg(long, value_enum)]
    aar_smoothing: Option<SmoothingArg>,
    #[command(flatten)]
    calibration: CalibrationArgs,
    /// Detector id recorded in the report when scoring a results file.
    #[arg(long)]
    label: Option<String>,
    #[arg(long, default_value_t = 1)]
    threads: usize,
    /// Accepted for uniformity; evaluation draws no randomness.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn file_digest(path: &Path) -> Result<String, Failure> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(config_hash(&bytes)?)
}

fn cmd_evaluate(a: &EvaluateArgs) -> CmdResult {
    let records = load(&a.corpus)?;
    let corpus_id = file_digest(&a.corpus)?[..16].to_string();
    let (results, detector_id, hash) = match (&a.results, a.detector) {
        (Some(path), None) => {
            let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
            let results = harness::read_results(BufReader::new(file))
                .with_context(|| format!("reading results {}", path.display()))?;
            let label = a.label.clone().unwrap_or_else(|| {
                path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
            });
            (results, label, file_digest(path)?)
        }
        (None, Some(kind)) => {
            let args = DetectorArgs {
                detector: kind,
                interval: a.interval,
                window: a.window,
                top_k: a.top_k,
                connect_tolerance: a.connect_tolerance,
                min_segment_len: a.min_segment_len,
                aar_smoothing: a.aar_smoothing,
            };
            let detector = args.detector()?;
            let cal = a.calibration.calibration();
            let results = harness::run_detection(&records, &detector, &cal, a.threads)?;
            (results, detector.id(), config_hash(&(detector, cal))?)
        }
        _ => return Err(usage("evaluate needs exactly one of --results or --detector")),
    };
    let summary = harness::evaluate_results(&records, &results)?;
    let meta = ReportMeta { corpus_id, detector_id, config_hash: hash };
    let report = report_json(
        &summary.outcome,
        &meta,
        &[("mean_time_s", summary.mean_time_s), ("errors", summary.errors as f64)],
    )?;
    print_json(&report);
    Ok(())
}

#[derive(Args)]
struct SimulateFprArgs {
    #[arg(long, value_enum)]
    scheme: SchemeArg,
    #[arg(long, default_value_t = DEFAULT_GAMMA)]
    gamma: f64,
    #[arg(long, default_value_t = 10_000)]
    samples: usize,
    #[arg(long, default_value_t = 10_000)]
    tokens: usize,
    #[command(flatten)]
    detector: DetectorArgs,
    #[command(flatten)]
    calibration: CalibrationArgs,
    #[arg(long)]
    seed: u64,
}

fn cmd_simulate_fpr(a: &SimulateFprArgs) -> CmdResult {
    if a.samples == 0 {
        return Err(usage("--samples must be at least 1"));
    }
    let detector = a.detector.detector()?;
    let report = harness::simulate_fpr(
        a.scheme.into(),
        a.gamma,
        &a.calibration.calibration(),
        a.samples,
        a.tokens,
        &detector,
        a.seed,
        1,
    )?;
    print_json(&serde_json::to_value(report).context("serializing report")?);
    Ok(())
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, value_enum)]
    scheme: SchemeArg,
    #[arg(long, default_value_t = DEFAULT_GAMMA)]
    gamma: f64,
    /// Detector ids, e.g. waterseeker,winmax-1,flsw-200.
    #[arg(long, value_delimiter = ',', default_value = "waterseeker,winmax-1")]
    detectors: Vec<String>,
    /// Ascending document lengths.
    #[arg(long, value_delimiter = ',', default_value = "500,2000,5000,10000")]
    lengths: Vec<usize>,
    /// Documents per length, half of them positive.
    #[arg(long, default_value_t = 20)]
    trials: usize,
    #[command(flatten)]
    calibration: CalibrationArgs,
    #[arg(long)]
    seed: u64,
}

fn cmd_bench(a: &BenchArgs) -> CmdResult {
    let scheme = Scheme::from(a.scheme);
    let detectors = a
        .detectors
        .iter()
        .map(|d| d.parse::<Detector>())
        .collect::<Result<Vec<_>, _>>()?;
    let spec = BenchSpec {
        scheme,
        gamma: a.gamma,
        detectors,
        lengths: a.lengths.clone(),
        trials: a.trials,
        strength_pool: Strength::mixed(scheme, a.gamma)?,
        calibration: a.calibration.calibration(),
        seed: a.seed,
    };
    let report = harness::bench(&spec)?;
    print_json(&serde_json::to_value(report).context("serializing report")?);
    Ok(())
}

#[derive(Args)]
struct ScoreArgs {
    /// One document per line, token IDs separated by whitespace.
    #[arg(long)]
    tokens: PathBuf,
    #[arg(long, value_enum)]
    scheme: SchemeArg,
    #[arg(long, default_value_t = DEFAULT_GAMMA)]
    gamma: f64,
    #[arg(long)]
    key: u64,
    #[arg(long)]
    vocab_size: u32,
    /// Recorded in each record's metadata.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

fn cmd_score(a: &ScoreArgs) -> CmdResult {
    let key = TokenScorerKey::new(a.key, a.vocab_size)?;
    let file = File::open(&a.tokens).with_context(|| format!("opening {}", a.tokens.display()))?;
    let mut records = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.context("reading tokens")?;
        if line.trim().is_empty() {
            continue;
        }
        let tokens = line
            .split_whitespace()
            .map(|t| t.parse::<u32>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| Failure::Data(anyhow::anyhow!("line {}: {e}", i + 1)))?;
        let stream = score_tokens(&tokens, &key, a.scheme.into(), a.gamma)
            .map_err(|e| Failure::Data(anyhow::anyhow!("line {}: {e}", i + 1)))?;
        records.push(CorpusRecord {
            doc_id: corpus::doc_id(records.len()),
            stream,
            gold: vec![],
            meta: RecordMeta {
                gamma: a.gamma,
                gamma1: None,
                aar_strength: None,
                seed: a.seed,
                strength: None,
                attack: None::<AttackDescriptor>,
                rng: RNG_ALGORITHM.to_string(),
            },
        });
    }
    corpus::save_corpus(&records, &a.out).with_context(|| format!("writing {}", a.out.display()))?;
    print_json(&json!({ "records": records.len(), "out": a.out.display().to_string() }));
    Ok(())
}

fn print_json(v: &serde_json::Value) {
    let mut out = io::stdout().lock();
    let _ = serde_json::to_writer(&mut out, v);
    let _ = writeln!(out);
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let outcome = match &cli.command {
        Command::Generate(a) => cmd_generate(a),
        Command::Detect(a) => cmd_detect(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::SimulateFpr(a) => cmd_simulate_fpr(a),
        Command::Bench(a) => cmd_bench(a),
        Command::Score(a) => cmd_score(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Data(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
