//! Full-text, WinMax, fixed-length sliding window and WaterSeeker detectors.
//!
//! Every detector ranks candidate windows by the natural log of their exact
//! null tail probability and decides with the length-specific rule of a
//! [`ThresholdTable`]. Window sums come from prefix sums: green counts for
//! KGW (exact integers) and `log(1/(1-u))` sums for Aar.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::{aar_token_score, window_statistic, ThresholdTable, WindowStatistic};
use crate::stream::{Scheme, ScoreStream, ScoreValues, SegmentSpan};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionResult {
    pub has_watermark: bool,
    pub indices: Vec<SegmentSpan>,
    pub per_segment_stats: Vec<WindowStatistic>,
    /// Number of window statistics evaluated, counting each smoothing mean once.
    pub windows_evaluated: u64,
}

impl DetectionResult {
    fn negative(windows_evaluated: u64) -> Self {
        DetectionResult { has_watermark: false, indices: Vec::new(), per_segment_stats: Vec::new(), windows_evaluated }
    }

    fn from_spans(stream: &ScoreStream, spans: Vec<SegmentSpan>, gamma: f64, windows_evaluated: u64) -> Result<Self> {
        let per_segment_stats = spans.iter().map(|s| window_statistic(stream, *s, gamma)).collect::<Result<_>>()?;
        Ok(DetectionResult { has_watermark: !spans.is_empty(), indices: spans, per_segment_stats, windows_evaluated })
    }
}

/// Per-token Aar score averaged by the smoothing window.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AarSmoothing {
    /// `log(1/(1-u))`, the additive term of the sum statistic. A single
    /// extreme token can lift a whole smoothing window on its own.
    LogScore,
    /// `u` itself; one token moves a window mean by at most `1/W`.
    #[default]
    Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WaterSeekerConfig {
    pub window: usize,
    pub top_k: usize,
    pub connect_tolerance: usize,
    pub min_segment_len: usize,
    #[serde(default)]
    pub aar_smoothing: AarSmoothing,
}

impl Default for WaterSeekerConfig {
    fn default() -> Self {
        WaterSeekerConfig {
            window: 50,
            top_k: 20,
            connect_tolerance: 100,
            // Spans are at least `window` long by construction, so this
            // asks for a run of at least `window` exceeding starts.
            min_segment_len: 100,
            aar_smoothing: AarSmoothing::Uniform,
        }
    }
}

impl WaterSeekerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window < 2 {
            return Err(Error::invalid(format!("window must be at least 2, got {}", self.window)));
        }
        if self.top_k == 0 {
            return Err(Error::invalid("top_k must be at least 1"));
        }
        if self.min_segment_len == 0 {
            return Err(Error::invalid("min_segment_len must be at least 1"));
        }
        Ok(())
    }
}

/// Prefix sums of the additive per-token scores.
enum Prefix {
    Counts(Vec<u32>),
    Sums(Vec<f64>),
}

impl Prefix {
    fn new(stream: &ScoreStream) -> Self {
        match stream.values() {
            ScoreValues::Green(v) => {
                let mut p = Vec::with_capacity(v.len() + 1);
                let mut acc = 0u32;
                p.push(0);
                for &g in v {
                    acc += u32::from(g);
                    p.push(acc);
                }
                Prefix::Counts(p)
            }
            ScoreValues::Uniform(v) => {
                let mut p = Vec::with_capacity(v.len() + 1);
                let mut acc = 0.0;
                p.push(0.0);
                for &u in v {
                    acc += aar_token_score(u);
                    p.push(acc);
                }
                Prefix::Sums(p)
            }
        }
    }

    /// Window sum over `[start, end)` as `f64`.
    #[inline]
    fn sum(&self, start: usize, end: usize) -> f64 {
        match self {
            Prefix::Counts(p) => f64::from(p[end] - p[start]),
            Prefix::Sums(p) => (p[end] - p[start]).max(0.0),
        }
    }

    /// Statistic of `[start, end)` from the prefix sums.
    fn statistic(&self, start: usize, end: usize, gamma: f64) -> Result<WindowStatistic> {
        let w = end - start;
        match self {
            Prefix::Counts(p) => Ok(WindowStatistic::kgw((p[end] - p[start]) as usize, w, gamma)),
            Prefix::Sums(_) => WindowStatistic::aar(self.sum(start, end), w),
        }
    }

    /// Largest window sum of length `w` and its first start.
    fn max_window(&self, w: usize) -> (f64, usize) {
        fn scan<T: Copy + PartialOrd + std::ops::Sub<Output = T>>(p: &[T], w: usize) -> (T, usize) {
            let mut best = p[w] - p[0];
            let mut at = 0;
            for i in 1..p.len() - w {
                let s = p[i + w] - p[i];
                if s > best {
                    best = s;
                    at = i;
                }
            }
            (best, at)
        }
        match self {
            Prefix::Counts(p) => {
                let (b, at) = scan(p, w);
                (f64::from(b), at)
            }
            Prefix::Sums(p) => scan(p, w),
        }
    }
}

fn check_scheme(stream: &ScoreStream, table: &ThresholdTable) -> Result<()> {
    if stream.scheme() != table.scheme() {
        return Err(Error::SchemeMismatch { expected: table.scheme().to_string(), found: stream.scheme().to_string() });
    }
    Ok(())
}

/// Tests the whole document as one window.
pub fn full_text_detect(stream: &ScoreStream, table: &ThresholdTable) -> Result<DetectionResult> {
    check_scheme(stream, table)?;
    let span = SegmentSpan::new(0, stream.len())?;
    let stat = window_statistic(stream, span, table.gamma())?;
    if table.passes(&stat) {
        Ok(DetectionResult { has_watermark: true, indices: vec![span], per_segment_stats: vec![stat], windows_evaluated: 1 })
    } else {
        Ok(DetectionResult::negative(1))
    }
}

/// Number of windows WinMax evaluates on a stream of `n` tokens.
pub fn winmax_window_count(n: usize, interval: usize) -> u64 {
    (1..=n).step_by(interval.max(1)).map(|w| (n - w + 1) as u64).sum()
}

/// Most significant window over sizes `1, 1 + interval, ...` and all offsets.
///
/// Undecidable sizes are skipped. Ties go to the smaller size, then the
/// smaller start. At most one span is returned.
pub fn winmax_detect(stream: &ScoreStream, table: &ThresholdTable, interval: usize) -> Result<DetectionResult> {
    check_scheme(stream, table)?;
    if interval == 0 {
        return Err(Error::invalid("winmax interval must be at least 1"));
    }
    let n = stream.len();
    let prefix = Prefix::new(stream);
    let mut best: Option<(WindowStatistic, usize)> = None;
    let mut evaluated = 0u64;
    for w in (1..=n).step_by(interval) {
        evaluated += (n - w + 1) as u64;
        if !table.is_decidable(w) {
            continue;
        }
        let (_, start) = prefix.max_window(w);
        let stat = prefix.statistic(start, start + w, table.gamma())?;
        if best.as_ref().is_none_or(|(b, _)| stat.log_tail < b.log_tail) {
            best = Some((stat, start));
        }
    }
    match best {
        Some((stat, start)) if table.passes(&stat) => {
            let span = SegmentSpan::new(start, start + stat.window_len)?;
            DetectionResult::from_spans(stream, vec![span], table.gamma(), evaluated)
        }
        _ => Ok(DetectionResult::negative(evaluated)),
    }
}

/// Smallest KGW green count of a `w`-token window that passes `table`.
fn kgw_pass_count(table: &ThresholdTable, w: usize) -> Option<usize> {
    let passes = |c: usize| table.passes(&WindowStatistic::kgw(c, w, table.gamma()));
    if !passes(w) {
        return None;
    }
    let (mut lo, mut hi) = (0usize, w);
    if passes(0) {
        return Some(0);
    }
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if passes(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Some(hi)
}

/// Slides a fixed window with stride 1 and merges passing windows that
/// overlap or abut.
pub fn flsw_detect(stream: &ScoreStream, table: &ThresholdTable, window: usize) -> Result<DetectionResult> {
    check_scheme(stream, table)?;
    let n = stream.len();
    if window == 0 || window > n {
        return Err(Error::DegenerateInput { window, len: n });
    }
    let prefix = Prefix::new(stream);
    let starts = n - window + 1;
    let mut passing = Vec::new();
    match &prefix {
        Prefix::Counts(p) => {
            if let Some(min) = kgw_pass_count(table, window) {
                let min = min as u32;
                passing.extend((0..starts).filter(|&i| p[i + window] - p[i] >= min));
            }
        }
        Prefix::Sums(_) => {
            // S* is only a prefilter; the p-value decides.
            if let Some(s_star) = table.aar_sum_threshold(window)? {
                let slack = 1e-9 * s_star.max(1.0);
                for i in 0..starts {
                    let s = prefix.sum(i, i + window);
                    if s >= s_star - slack && table.passes(&WindowStatistic::aar(s, window)?) {
                        passing.push(i);
                    }
                }
            }
        }
    }

    let mut spans: Vec<SegmentSpan> = Vec::new();
    for i in passing {
        match spans.last_mut() {
            Some(last) if i <= last.end => last.end = i + window,
            _ => spans.push(SegmentSpan::new(i, i + window)?),
        }
    }
    DetectionResult::from_spans(stream, spans, table.gamma(), starts as u64)
}

/// Anomalous token spans from the smoothed score list.
///
/// Returns the spans together with the number of smoothing windows computed.
fn localize(stream: &ScoreStream, cfg: &WaterSeekerConfig, prefix: &Prefix) -> Result<(Vec<SegmentSpan>, u64)> {
    cfg.validate()?;
    let n = stream.len();
    let w = cfg.window;
    if n < w {
        return Err(Error::DegenerateInput { window: w, len: n });
    }
    let m = n - w + 1;
    // Window sums stand in for means; the rule is invariant to the 1/W scale.
    let raw_u;
    let smoothing = match (stream.values(), cfg.aar_smoothing) {
        (ScoreValues::Uniform(v), AarSmoothing::Uniform) => {
            raw_u = Prefix::Sums(std::iter::once(0.0).chain(v.iter().scan(0.0, |a, &u| {
                *a += u;
                Some(*a)
            })).collect());
            &raw_u
        }
        _ => prefix,
    };
    let sums: Vec<f64> = (0..m).map(|i| smoothing.sum(i, i + w)).collect();
    let mean = sums.iter().sum::<f64>() / m as f64;
    let k = cfg.top_k.min(m);
    let mut sorted = sums.clone();
    let top_mean = if k == m {
        mean
    } else {
        sorted.select_nth_unstable_by(m - k, |a, b| a.total_cmp(b));
        sorted[m - k..].iter().sum::<f64>() / k as f64
    };
    let threshold = mean + (top_mean - mean) / 2.0;
    let limit = threshold + 1e-12 * threshold.abs().max(1.0);

    let mut spans = Vec::new();
    let mut run: Option<(usize, usize)> = None;
    for (i, &s) in sums.iter().enumerate() {
        if s <= limit {
            continue;
        }
        run = match run {
            Some((a, b)) if i - b - 1 <= cfg.connect_tolerance => Some((a, i)),
            Some((a, b)) => {
                spans.push(SegmentSpan::new(a, b + w)?);
                Some((i, i))
            }
            None => Some((i, i)),
        };
    }
    if let Some((a, b)) = run {
        spans.push(SegmentSpan::new(a, b + w)?);
    }
    spans.retain(|s| s.len() >= cfg.min_segment_len);
    Ok((spans, m as u64))
}

/// The localization stage of WaterSeeker on its own.
pub fn waterseeker_localize(stream: &ScoreStream, cfg: &WaterSeekerConfig) -> Result<Vec<SegmentSpan>> {
    localize(stream, cfg, &Prefix::new(stream)).map(|(s, _)| s)
}

/// Best candidate inside one localized span: starts in `[s', s' + W)`, ends
/// in `(e' - W, e']`. Ranked by tail, ties to the longer span, then the
/// smaller start. Returns the candidate and the number evaluated.
fn traverse(
    prefix: &Prefix,
    region: SegmentSpan,
    w: usize,
    table: &ThresholdTable,
) -> Result<(Option<WindowStatistic>, Option<usize>, u64)> {
    let s_hi = (region.start + w).min(region.end);
    let e_lo = region.end.saturating_sub(w - 1).max(region.start + 1);
    let min_len = e_lo.saturating_sub(s_hi - 1).max(1);
    let max_len = region.len();
    // Best sum per candidate length; the tail is monotone in the sum.
    let mut best: Vec<Option<(f64, usize)>> = vec![None; max_len - min_len + 1];
    let mut evaluated = 0u64;
    for s in region.start..s_hi {
        for e in e_lo.max(s + 1)..=region.end {
            evaluated += 1;
            let v = prefix.sum(s, e);
            let slot = &mut best[e - s - min_len];
            if slot.is_none_or(|(b, _)| v > b) {
                *slot = Some((v, s));
            }
        }
    }
    let mut chosen: Option<(WindowStatistic, usize)> = None;
    // Longest first so equal tails keep the longer span.
    for (idx, slot) in best.iter().enumerate().rev() {
        let Some((_, s)) = *slot else { continue };
        let len = idx + min_len;
        if !table.is_decidable(len) {
            continue;
        }
        let stat = prefix.statistic(s, s + len, table.gamma())?;
        if chosen.as_ref().is_none_or(|(c, _)| stat.log_tail < c.log_tail) {
            chosen = Some((stat, s));
        }
    }
    Ok(match chosen {
        Some((stat, s)) => (Some(stat), Some(s), evaluated),
        None => (None, None, evaluated),
    })
}

/// Sorts spans and unions any that overlap.
fn merge_overlapping(mut spans: Vec<SegmentSpan>) -> Vec<SegmentSpan> {
    spans.sort();
    let mut out: Vec<SegmentSpan> = Vec::with_capacity(spans.len());
    for s in spans {
        match out.last_mut() {
            Some(last) if s.start < last.end => last.end = last.end.max(s.end),
            _ => out.push(s),
        }
    }
    out
}

/// Localization followed by a local traversal of start and end points.
pub fn waterseeker_detect(stream: &ScoreStream, table: &ThresholdTable, cfg: &WaterSeekerConfig) -> Result<DetectionResult> {
    check_scheme(stream, table)?;
    let prefix = Prefix::new(stream);
    let (regions, mut evaluated) = localize(stream, cfg, &prefix)?;
    let mut accepted = Vec::new();
    for region in regions {
        let (stat, start, count) = traverse(&prefix, region, cfg.window, table)?;
        evaluated += count;
        if let (Some(stat), Some(start)) = (stat, start) {
            if table.passes(&stat) {
                accepted.push(SegmentSpan::new(start, start + stat.window_len)?);
            }
        }
    }
    DetectionResult::from_spans(stream, merge_overlapping(accepted), table.gamma(), evaluated)
}

/// Ablation: accepts each localized span that passes as is, with no traversal.
pub fn localization_only_detect(
    stream: &ScoreStream,
    table: &ThresholdTable,
    cfg: &WaterSeekerConfig,
) -> Result<DetectionResult> {
    check_scheme(stream, table)?;
    let prefix = Prefix::new(stream);
    let (regions, mut evaluated) = localize(stream, cfg, &prefix)?;
    let mut accepted = Vec::new();
    for region in regions {
        evaluated += 1;
        if table.is_decidable(region.len()) && table.passes(&prefix.statistic(region.start, region.end, table.gamma())?) {
            accepted.push(region);
        }
    }
    DetectionResult::from_spans(stream, accepted, table.gamma(), evaluated)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Detector {
    FullText,
    WinMax { interval: usize },
    Flsw { window: usize },
    WaterSeeker(WaterSeekerConfig),
    LocalizationOnly(WaterSeekerConfig),
}

impl Detector {
    pub fn id(&self) -> String {
        match self {
            Detector::FullText => "fulltext".into(),
            Detector::WinMax { interval } => format!("winmax-{interval}"),
            Detector::Flsw { window } => format!("flsw-{window}"),
            Detector::WaterSeeker(_) => "waterseeker".into(),
            Detector::LocalizationOnly(_) => "waterseeker-localize".into(),
        }
    }

    pub fn detect(&self, stream: &ScoreStream, table: &ThresholdTable) -> Result<DetectionResult> {
        match self {
            Detector::FullText => full_text_detect(stream, table),
            Detector::WinMax { interval } => winmax_detect(stream, table, *interval),
            Detector::Flsw { window } => flsw_detect(stream, table, *window),
            Detector::WaterSeeker(cfg) => waterseeker_detect(stream, table, cfg),
            Detector::LocalizationOnly(cfg) => localization_only_detect(stream, table, cfg),
        }
    }
}

impl fmt::Display for Detector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.id())
    }
}

/// Parses a detector id. WaterSeeker ids get the default configuration.
impl std::str::FromStr for Detector {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let size = |rest: &str| -> Result<usize> {
            match rest.parse::<usize>() {
                Ok(v) if v > 0 => Ok(v),
                _ => Err(Error::invalid(format!("bad size in detector id `{s}`"))),
            }
        };
        match s {
            "fulltext" => Ok(Detector::FullText),
            "waterseeker" => Ok(Detector::WaterSeeker(WaterSeekerConfig::default())),
            "waterseeker-localize" => Ok(Detector::LocalizationOnly(WaterSeekerConfig::default())),
            _ => {
                if let Some(rest) = s.strip_prefix("winmax-") {
                    Ok(Detector::WinMax { interval: size(rest)? })
                } else if let Some(rest) = s.strip_prefix("flsw-") {
                    Ok(Detector::Flsw { window: size(rest)? })
                } else {
                    Err(Error::invalid(format!("unknown detector `{s}`")))
                }
            }
        }
    }
}

/// Convenience: table with default settings for a scheme and gamma.
pub fn default_table(scheme: Scheme, gamma: f64, alpha: f64) -> Result<ThresholdTable> {
    ThresholdTable::build(
        scheme,
        gamma,
        alpha,
        crate::stats::thresholds::DEFAULT_CLT_CUTOFF,
        crate::stats::thresholds::DEFAULT_MAX_WINDOW,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stream::{embed_segments, sample_null_stream, SchemeParams};

    fn kgw_table() -> ThresholdTable {
        default_table(Scheme::Kgw, 0.5, 1e-6).unwrap()
    }

    fn planted(n: usize, span: SegmentSpan, gamma1: f64, seed: u64) -> ScoreStream {
        let null = sample_null_stream(&SchemeParams::null(Scheme::Kgw, 0.5).unwrap(), n, seed).unwrap();
        embed_segments(&null, &[(span, SchemeParams::kgw(0.5, gamma1).unwrap())], seed + 1).unwrap()
    }

    #[test]
    fn full_text_on_pure_watermark_and_null() {
        let t = kgw_table();
        let span = SegmentSpan::new(0, 10_000).unwrap();
        let r = full_text_detect(&planted(10_000, span, 0.75, 1), &t).unwrap();
        assert!(r.has_watermark);
        assert_eq!(r.indices, vec![span]);
        let null = sample_null_stream(&SchemeParams::null(Scheme::Kgw, 0.5).unwrap(), 10_000, 3).unwrap();
        assert!(!full_text_detect(&null, &t).unwrap().has_watermark);
    }

    #[test]
    fn winmax_pure_watermark_spans_everything() {
        let s = ScoreStream::kgw(vec![true; 300]).unwrap();
        let r = winmax_detect(&s, &kgw_table(), 1).unwrap();
        assert!(r.has_watermark);
        assert_eq!(r.indices, vec![SegmentSpan::new(0, 300).unwrap()]);
        assert_eq!(r.windows_evaluated, winmax_window_count(300, 1));
    }

    #[test]
    fn winmax_counter_closed_form() {
        let s = ScoreStream::kgw(vec![false; 1000]).unwrap();
        for k in [1usize, 7, 200] {
            let r = winmax_detect(&s, &kgw_table(), k).unwrap();
            let expected: u64 = (0..).map(|j| 1 + j * k).take_while(|&w| w <= 1000).map(|w| (1001 - w) as u64).sum();
            assert_eq!(r.windows_evaluated, expected);
        }
        assert_eq!(winmax_window_count(1000, 1), 1000 * 1001 / 2);
    }

    #[test]
    fn winmax_finds_planted_segment() {
        let gold = SegmentSpan::new(4000, 4300).unwrap();
        let r = winmax_detect(&planted(10_000, gold, 0.75, 5), &kgw_table(), 1).unwrap();
        assert!(r.has_watermark);
        assert!(r.indices[0].overlap(&gold) > 0);
    }

    #[test]
    fn flsw_rejects_oversized_window() {
        let s = ScoreStream::kgw(vec![true; 100]).unwrap();
        assert!(matches!(flsw_detect(&s, &kgw_table(), 101), Err(Error::DegenerateInput { .. })));
    }

    #[test]
    fn flsw_exact_green_segment() {
        let mut flags = vec![false; 1000];
        flags[300..400].iter_mut().for_each(|g| *g = true);
        let s = ScoreStream::kgw(flags).unwrap();
        let r = flsw_detect(&s, &kgw_table(), 100).unwrap();
        assert!(r.has_watermark);
        let gold = SegmentSpan::new(300, 400).unwrap();
        assert!(r.indices.iter().any(|d| d.start <= gold.start && d.end >= gold.end));
    }

    #[test]
    fn flsw_short_segment_diluted() {
        // Expected z of a 400-window around 120 tokens at 0.75 is 3.0.
        let gold = SegmentSpan::new(5000, 5120).unwrap();
        let r = flsw_detect(&planted(10_000, gold, 0.75, 8), &kgw_table(), 400).unwrap();
        assert!(!r.has_watermark);
        // The same segment is found by a window matched to its length.
        let r = flsw_detect(&planted(10_000, gold, 0.98, 8), &kgw_table(), 100).unwrap();
        assert!(r.has_watermark);
    }

    #[test]
    fn localize_constant_stream_is_empty() {
        let cfg = WaterSeekerConfig::default();
        for flags in [vec![true; 500], vec![false; 500]] {
            assert!(waterseeker_localize(&ScoreStream::kgw(flags).unwrap(), &cfg).unwrap().is_empty());
        }
        let aar = ScoreStream::aar(vec![0.3; 500]).unwrap();
        assert!(waterseeker_localize(&aar, &cfg).unwrap().is_empty());
    }

    #[test]
    fn localize_rejects_short_stream() {
        let s = ScoreStream::kgw(vec![true; 49]).unwrap();
        assert!(matches!(
            waterseeker_localize(&s, &WaterSeekerConfig::default()),
            Err(Error::DegenerateInput { window: 50, len: 49 })
        ));
    }

    #[test]
    fn localize_block_structure() {
        // A single clean block: the smoothed list peaks on the block and the
        // run of exceeding starts covers it within one window on each side.
        let mut flags: Vec<bool> = (0..2000).map(|i| i % 2 == 0).collect();
        flags[1000..1300].iter_mut().for_each(|g| *g = true);
        let spans = waterseeker_localize(&ScoreStream::kgw(flags).unwrap(), &WaterSeekerConfig::default()).unwrap();
        assert_eq!(spans.len(), 1);
        assert!(spans[0].start > 950 && spans[0].start <= 1000);
        assert!(spans[0].end >= 1300 && spans[0].end < 1350);
    }

    #[test]
    fn waterseeker_empty_localization_is_negative() {
        let r = waterseeker_detect(&ScoreStream::kgw(vec![false; 500]).unwrap(), &kgw_table(), &Default::default()).unwrap();
        assert!(!r.has_watermark && r.indices.is_empty());
        assert_eq!(r.windows_evaluated, 451);
    }

    #[test]
    fn waterseeker_recovers_clean_block() {
        let mut flags: Vec<bool> = (0..2000).map(|i| i % 2 == 0).collect();
        flags[1000..1300].iter_mut().for_each(|g| *g = true);
        let r = waterseeker_detect(&ScoreStream::kgw(flags).unwrap(), &kgw_table(), &Default::default()).unwrap();
        assert!(r.has_watermark);
        let d = r.indices[0];
        assert!(d.start.abs_diff(1000) <= 1 && d.end.abs_diff(1300) <= 1, "{d}");
    }

    #[test]
    fn waterseeker_counter_bound() {
        let cfg = WaterSeekerConfig::default();
        for seed in 0..20 {
            let gold = SegmentSpan::new(3000, 3250).unwrap();
            let s = planted(10_000, gold, 0.75, 100 + seed);
            let spans = waterseeker_localize(&s, &cfg).unwrap();
            let r = waterseeker_detect(&s, &kgw_table(), &cfg).unwrap();
            let bound = (spans.len() * cfg.window * cfg.window + 10_000 - cfg.window + 1) as u64;
            assert!(r.windows_evaluated <= bound);
        }
    }

    #[test]
    fn scheme_mismatch_is_an_error() {
        let s = ScoreStream::aar(vec![0.5; 100]).unwrap();
        assert!(matches!(full_text_detect(&s, &kgw_table()), Err(Error::SchemeMismatch { .. })));
    }

    #[test]
    fn merge_unions_overlaps_only() {
        let sp = |a, b| SegmentSpan::new(a, b).unwrap();
        assert_eq!(merge_overlapping(vec![sp(10, 20), sp(0, 12), sp(20, 30)]), vec![sp(0, 20), sp(20, 30)]);
    }

    #[test]
    fn detector_ids() {
        assert_eq!(Detector::WinMax { interval: 200 }.id(), "winmax-200");
        assert_eq!(Detector::Flsw { window: 100 }.id(), "flsw-100");
        assert_eq!(Detector::WaterSeeker(Default::default()).id(), "waterseeker");
        for id in ["fulltext", "winmax-1", "flsw-300", "waterseeker", "waterseeker-localize"] {
            assert_eq!(id.parse::<Detector>().unwrap().id(), id);
        }
        for bad in ["winmax-0", "flsw-", "flsw-x", "seeker"] {
            assert!(bad.parse::<Detector>().is_err(), "{bad}");
        }
    }
}
