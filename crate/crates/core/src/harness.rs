//! Batch detection, corpus evaluation, null FPR simulation and scaling benchmarks.

use std::collections::HashMap;
use std::io::{BufRead, Write};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::corpus::{build_corpus, CorpusRecord, CorpusSpec, Strength};
use crate::detectors::{DetectionResult, Detector};
use crate::error::{Error, Result};
use crate::evaluation::{evaluate_corpus, EvalOutcome};
use crate::rng::derive_seed;
use crate::stats::ThresholdTable;
use crate::stream::{sample_null_stream, Scheme, SchemeParams, SegmentSpan};

/// Settings shared by every threshold table a run builds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub alpha: f64,
    pub clt_cutoff: usize,
    pub max_window: usize,
}

impl Default for Calibration {
    fn default() -> Self {
        Calibration {
            alpha: crate::stream::DEFAULT_ALPHA,
            clt_cutoff: crate::stats::thresholds::DEFAULT_CLT_CUTOFF,
            max_window: crate::stats::thresholds::DEFAULT_MAX_WINDOW,
        }
    }
}

impl Calibration {
    pub fn table(&self, scheme: Scheme, gamma: f64) -> Result<ThresholdTable> {
        ThresholdTable::build(scheme, gamma, self.alpha, self.clt_cutoff, self.max_window)
    }
}

/// One line of a results file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocResult {
    pub doc_id: String,
    pub result: Option<DetectionResult>,
    pub error: Option<String>,
    /// Detection wall time in seconds, excluding I/O and table construction.
    pub time_s: f64,
}

impl DocResult {
    pub fn flagged(&self) -> bool {
        self.result.as_ref().is_some_and(|r| r.has_watermark)
    }
}

fn timed_detect(detector: &Detector, record: &CorpusRecord, table: &ThresholdTable) -> DocResult {
    let t0 = Instant::now();
    let out = detector.detect(&record.stream, table);
    let time_s = t0.elapsed().as_secs_f64();
    let (result, error) = match out {
        Ok(r) => (Some(r), None),
        Err(e) => (None, Some(e.to_string())),
    };
    DocResult { doc_id: record.doc_id.clone(), result, error, time_s }
}

/// Maps `f` over `items` on up to `threads` scoped threads, preserving order.
pub fn parallel_map<T: Sync, U: Send>(items: &[T], threads: usize, f: impl Fn(&T) -> U + Sync) -> Result<Vec<U>> {
    let threads = threads.max(1).min(items.len().max(1));
    if threads == 1 {
        return Ok(items.iter().map(&f).collect());
    }
    let chunk = items.len().div_ceil(threads);
    std::thread::scope(|scope| {
        let handles: Vec<_> =
            items.chunks(chunk).map(|c| scope.spawn(|| c.iter().map(&f).collect::<Vec<U>>())).collect();
        let mut out = Vec::with_capacity(items.len());
        for h in handles {
            out.extend(h.join().map_err(|_| Error::Join("detection worker panicked".into()))?);
        }
        Ok(out)
    })
}

/// Runs `detector` over every record. Per-document failures are recorded in
/// the result and do not stop the run.
pub fn run_detection(
    records: &[CorpusRecord],
    detector: &Detector,
    calibration: &Calibration,
    threads: usize,
) -> Result<Vec<DocResult>> {
    let mut tables: HashMap<(Scheme, u64), ThresholdTable> = HashMap::new();
    for r in records {
        let key = (r.stream.scheme(), r.meta.gamma.to_bits());
        if !tables.contains_key(&key) {
            tables.insert(key, calibration.table(key.0, r.meta.gamma)?);
        }
    }
    parallel_map(records, threads, |r| timed_detect(detector, r, &tables[&(r.stream.scheme(), r.meta.gamma.to_bits())]))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub outcome: EvalOutcome,
    pub mean_time_s: f64,
    /// Documents whose detection failed; scored as unflagged.
    pub errors: usize,
}

/// Joins results to records by `doc_id` and scores them.
pub fn evaluate_results(records: &[CorpusRecord], results: &[DocResult]) -> Result<EvalSummary> {
    let by_id: HashMap<&str, &DocResult> = results.iter().map(|r| (r.doc_id.as_str(), r)).collect();
    if by_id.len() != results.len() {
        return Err(Error::invalid("results contain duplicate doc_id values"));
    }
    if results.len() != records.len() {
        return Err(Error::LengthMismatch { results: results.len(), labels: records.len() });
    }
    let empty = DetectionResult { has_watermark: false, indices: vec![], per_segment_stats: vec![], windows_evaluated: 0 };
    let mut detections = Vec::with_capacity(records.len());
    let mut labels: Vec<Vec<SegmentSpan>> = Vec::with_capacity(records.len());
    let mut errors = 0;
    let mut time = 0.0;
    for rec in records {
        let r = by_id
            .get(rec.doc_id.as_str())
            .ok_or_else(|| Error::invalid(format!("no result for doc_id `{}`", rec.doc_id)))?;
        time += r.time_s;
        match &r.result {
            Some(d) => detections.push(d.clone()),
            None => {
                errors += 1;
                detections.push(empty.clone());
            }
        }
        labels.push(rec.gold.clone());
    }
    Ok(EvalSummary {
        outcome: evaluate_corpus(&detections, &labels)?,
        mean_time_s: time / records.len().max(1) as f64,
        errors,
    })
}

pub fn write_results<W: Write>(results: &[DocResult], mut out: W) -> Result<()> {
    for r in results {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_results<R: BufRead>(input: R) -> Result<Vec<DocResult>> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::Parse { line: i + 1, message: e.to_string() })?);
    }
    Ok(out)
}

/// Wilson score interval for `k` successes in `n` trials.
pub fn wilson_interval(k: usize, n: usize, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let (k, n) = (k as f64, n as f64);
    let p = k / n;
    let z2 = z * z;
    let center = (p + z2 / (2.0 * n)) / (1.0 + z2 / n);
    let half = z / (1.0 + z2 / n) * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    ((center - half).max(0.0), (center + half).min(1.0))
}

pub const WILSON_Z95: f64 = 1.959_963_984_540_054;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FprReport {
    pub scheme: Scheme,
    pub detector: String,
    pub alpha: f64,
    pub n_samples: usize,
    pub n_tokens: usize,
    pub flagged: usize,
    pub errors: usize,
    pub fpr: f64,
    pub ci95: (f64, f64),
    pub seed: u64,
}

/// Document-level false-positive rate of `detector` on null streams.
/// Sample `i` is drawn from `derive_seed(seed, i)`.
#[allow(clippy::too_many_arguments)]
pub fn simulate_fpr(
    scheme: Scheme,
    gamma: f64,
    calibration: &Calibration,
    n_samples: usize,
    n_tokens: usize,
    detector: &Detector,
    seed: u64,
    threads: usize,
) -> Result<FprReport> {
    if n_samples == 0 {
        return Err(Error::EmptyInput("fpr sample count"));
    }
    let table = calibration.table(scheme, gamma)?;
    let params = SchemeParams::null(scheme, gamma)?;
    let idx: Vec<usize> = (0..n_samples).collect();
    let outcomes = parallel_map(&idx, threads, |&i| -> Result<bool> {
        let stream = sample_null_stream(&params, n_tokens, derive_seed(seed, i as u64))?;
        Ok(detector.detect(&stream, &table)?.has_watermark)
    })?;
    let (mut flagged, mut errors) = (0, 0);
    for o in outcomes {
        match o {
            Ok(true) => flagged += 1,
            Ok(false) => {}
            Err(_) => errors += 1,
        }
    }
    let scored = n_samples - errors;
    Ok(FprReport {
        scheme,
        detector: detector.id(),
        alpha: calibration.alpha,
        n_samples,
        n_tokens,
        flagged,
        errors,
        fpr: flagged as f64 / scored.max(1) as f64,
        ci95: wilson_interval(flagged, scored, WILSON_Z95),
        seed,
    })
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn log_log_slope(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::invalid("log-log fit needs at least two paired points"));
    }
    if xs.iter().chain(ys).any(|&v| !(v > 0.0 && v.is_finite())) {
        return Err(Error::invalid("log-log fit needs positive finite values"));
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::invalid("log-log fit needs distinct x values"));
    }
    Ok(sxy / sxx)
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        (v[m - 1] + v[m]) / 2.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub detector: String,
    pub n: usize,
    pub documents: usize,
    pub mean_time_s: f64,
    pub median_time_s: f64,
    pub mean_windows: f64,
    pub outcome: EvalOutcome,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchFit {
    pub detector: String,
    pub time_exponent: f64,
    pub windows_exponent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub scheme: Scheme,
    pub rows: Vec<BenchRow>,
    pub fits: Vec<BenchFit>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchSpec {
    pub scheme: Scheme,
    pub gamma: f64,
    pub detectors: Vec<Detector>,
    pub lengths: Vec<usize>,
    /// Documents per length, half positive.
    pub trials: usize,
    pub strength_pool: Vec<Strength>,
    pub calibration: Calibration,
    pub seed: u64,
}

/// Times every detector on a fresh corpus per document length, single-threaded.
pub fn bench(spec: &BenchSpec) -> Result<BenchReport> {
    if spec.lengths.windows(2).any(|p| p[0] >= p[1]) {
        return Err(Error::invalid("bench lengths must be strictly ascending"));
    }
    if spec.trials == 0 || spec.lengths.is_empty() || spec.detectors.is_empty() {
        return Err(Error::invalid("bench needs detectors, lengths and at least one trial"));
    }
    let table = spec.calibration.table(spec.scheme, spec.gamma)?;
    let mut rows = Vec::new();
    for (li, &n) in spec.lengths.iter().enumerate() {
        let n_pos = spec.trials / 2;
        let corpus_spec = CorpusSpec {
            scheme: spec.scheme,
            gamma: spec.gamma,
            n_positive: n_pos,
            n_negative: spec.trials - n_pos,
            doc_len: n,
            seg_len_range: (100.min(n), 400.min(n)),
            segments_per_doc: 1,
            min_gap: 100,
            strength_pool: spec.strength_pool.clone(),
            master_seed: derive_seed(spec.seed, li as u64),
        };
        let records = build_corpus(&corpus_spec)?;
        for det in &spec.detectors {
            let results: Vec<DocResult> = records.iter().map(|r| timed_detect(det, r, &table)).collect();
            let summary = evaluate_results(&records, &results)?;
            let mut times: Vec<f64> = results.iter().map(|r| r.time_s).collect();
            let windows: f64 = results.iter().filter_map(|r| r.result.as_ref()).map(|r| r.windows_evaluated as f64).sum();
            rows.push(BenchRow {
                detector: det.id(),
                n,
                documents: records.len(),
                mean_time_s: summary.mean_time_s,
                median_time_s: median(&mut times),
                mean_windows: windows / (records.len() - summary.errors).max(1) as f64,
                outcome: summary.outcome,
            });
        }
    }
    let mut fits = Vec::new();
    for det in &spec.detectors {
        let id = det.id();
        let mine: Vec<&BenchRow> = rows.iter().filter(|r| r.detector == id).collect();
        let xs: Vec<f64> = mine.iter().map(|r| r.n as f64).collect();
        let ts: Vec<f64> = mine.iter().map(|r| r.median_time_s.max(1e-9)).collect();
        let ws: Vec<f64> = mine.iter().map(|r| r.mean_windows.max(1.0)).collect();
        if xs.len() >= 2 {
            fits.push(BenchFit { detector: id, time_exponent: log_log_slope(&xs, &ts)?, windows_exponent: log_log_slope(&xs, &ws)? });
        }
    }
    Ok(BenchReport { scheme: spec.scheme, rows, fits })
}
