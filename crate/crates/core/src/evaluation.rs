//! Scoring detections against gold spans.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::detectors::DetectionResult;
use crate::error::{Error, Result};
use crate::stream::SegmentSpan;

/// Sorted union of possibly overlapping spans.
fn union(spans: &[SegmentSpan]) -> Vec<SegmentSpan> {
    let mut sorted = spans.to_vec();
    sorted.sort();
    let mut out: Vec<SegmentSpan> = Vec::with_capacity(sorted.len());
    for s in sorted {
        match out.last_mut() {
            Some(last) if s.start <= last.end => last.end = last.end.max(s.end),
            _ => out.push(s),
        }
    }
    out
}

fn covered(spans: &[SegmentSpan]) -> usize {
    spans.iter().map(SegmentSpan::len).sum()
}

/// Token count shared by two sorted, disjoint span lists.
fn intersection(a: &[SegmentSpan], b: &[SegmentSpan]) -> usize {
    let (mut i, mut j, mut total) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        total += a[i].overlap(&b[j]);
        if a[i].end <= b[j].end {
            i += 1;
        } else {
            j += 1;
        }
    }
    total
}

/// Token-level intersection over union of the two span unions. Zero when
/// either side is empty.
pub fn iou(detected: &[SegmentSpan], gold: &[SegmentSpan]) -> f64 {
    let (d, g) = (union(detected), union(gold));
    if d.is_empty() || g.is_empty() {
        return 0.0;
    }
    let inter = intersection(&d, &g);
    let uni = covered(&d) + covered(&g) - inter;
    inter as f64 / uni as f64
}

/// A positive document is detected when flagged with non-zero IoU.
pub fn is_success(result: &DetectionResult, gold: &[SegmentSpan]) -> Result<bool> {
    if gold.is_empty() {
        return Err(Error::invalid("is_success needs a positive document; gold is empty"));
    }
    Ok(result.has_watermark && iou(&result.indices, gold) > 0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalOutcome {
    pub true_positive: usize,
    pub false_positive: usize,
    pub false_negative: usize,
    pub true_negative: usize,
    pub f1: f64,
    pub fpr: f64,
    pub fnr: f64,
    /// Pooled IoU averaged over positive documents.
    pub mean_iou: f64,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Confusion counts and rates. An empty gold list marks a negative document.
pub fn evaluate_corpus(results: &[DetectionResult], labels: &[Vec<SegmentSpan>]) -> Result<EvalOutcome> {
    if results.len() != labels.len() {
        return Err(Error::LengthMismatch { results: results.len(), labels: labels.len() });
    }
    let (mut tp, mut fp, mut fneg, mut tn) = (0, 0, 0, 0);
    let mut iou_sum = 0.0;
    for (r, gold) in results.iter().zip(labels) {
        if gold.is_empty() {
            if r.has_watermark {
                fp += 1;
            } else {
                tn += 1;
            }
        } else {
            iou_sum += iou(&r.indices, gold);
            if is_success(r, gold)? {
                tp += 1;
            } else {
                fneg += 1;
            }
        }
    }
    Ok(EvalOutcome {
        true_positive: tp,
        false_positive: fp,
        false_negative: fneg,
        true_negative: tn,
        f1: ratio(2 * tp, 2 * tp + fp + fneg),
        fpr: ratio(fp, fp + tn),
        fnr: ratio(fneg, fneg + tp),
        mean_iou: if tp + fneg == 0 { 0.0 } else { iou_sum / (tp + fneg) as f64 },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocalizationStats {
    pub coverage: f64,
    /// `(|s' - s|, |e' - e|)` for the localized span overlapping gold most;
    /// `None` when nothing overlaps.
    pub offsets: Option<(usize, usize)>,
}

/// Coverage of a single gold span by the localized spans, and the boundary
/// offsets of the best-overlapping localized span.
pub fn localization_stats(localized: &[SegmentSpan], gold: SegmentSpan) -> LocalizationStats {
    let coverage = intersection(&union(localized), &[gold]) as f64 / gold.len() as f64;
    let best = localized.iter().filter(|s| s.overlap(&gold) > 0).min_by_key(|s| (usize::MAX - s.overlap(&gold), s.start));
    LocalizationStats {
        coverage,
        offsets: best.map(|s| (s.start.abs_diff(gold.start), s.end.abs_diff(gold.end))),
    }
}

/// Averages over documents; offsets only over documents where one exists.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocalizationSummary {
    pub documents: usize,
    pub mean_coverage: f64,
    pub mean_start_offset: f64,
    pub mean_end_offset: f64,
    /// Mean over documents of `(start + end) / 2`.
    pub mean_offset: f64,
    /// Mean over documents of `max(start, end)`.
    pub mean_max_offset: f64,
    pub with_offsets: usize,
}

pub fn summarize_localization(stats: &[LocalizationStats]) -> LocalizationSummary {
    let n = stats.len();
    let offs: Vec<(f64, f64)> = stats.iter().filter_map(|s| s.offsets).map(|(a, b)| (a as f64, b as f64)).collect();
    let m = offs.len().max(1) as f64;
    LocalizationSummary {
        documents: n,
        mean_coverage: stats.iter().map(|s| s.coverage).sum::<f64>() / n.max(1) as f64,
        mean_start_offset: offs.iter().map(|o| o.0).sum::<f64>() / m,
        mean_end_offset: offs.iter().map(|o| o.1).sum::<f64>() / m,
        mean_offset: offs.iter().map(|o| (o.0 + o.1) / 2.0).sum::<f64>() / m,
        mean_max_offset: offs.iter().map(|o| o.0.max(o.1)).sum::<f64>() / m,
        with_offsets: offs.len(),
    }
}

/// Hex SHA-256 of a configuration's canonical JSON.
pub fn config_hash<T: Serialize>(config: &T) -> Result<String> {
    let bytes = serde_json::to_vec(config)?;
    Ok(Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportMeta {
    pub corpus_id: String,
    pub detector_id: String,
    pub config_hash: String,
}

/// Flat metric report plus a metadata block.
pub fn report_json(outcome: &EvalOutcome, meta: &ReportMeta, extra: &[(&str, f64)]) -> Result<serde_json::Value> {
    let mut v = serde_json::to_value(outcome)?;
    let obj = v.as_object_mut().expect("outcome serializes to an object");
    for (k, x) in extra {
        obj.insert((*k).to_string(), serde_json::json!(x));
    }
    obj.insert("meta".into(), serde_json::to_value(meta)?);
    Ok(v)
}
