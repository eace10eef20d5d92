//! Per-window-length decision thresholds for a target in-window rate `alpha`.
//!
//! KGW thresholds come from the exact binomial null: the minimal green count
//! whose upper tail falls below `alpha`. Windows of at least `clt_cutoff`
//! tokens use the normal threshold `Φ⁻¹(1 - alpha)` instead. Aar p-values are
//! exact, so the p-value threshold is `alpha` itself at every length; the
//! table still records the equivalent sum threshold `S*` for each length.
//!
//! Both schemes share one shortest decidable window: the shortest KGW window
//! whose all-green count reaches `alpha` at the table's `gamma`. Shorter Aar
//! windows are marked undecidable, so every detector searches the same
//! window lengths whatever the scheme.

use serde::{Deserialize, Serialize};

use super::special::{binomial_log_tail, gamma_upper_quantile, normal_upper_quantile};
use super::{kgw_z_unchecked, WindowStatistic};
use crate::error::{Error, Result};
use crate::stream::{Scheme, SchemeParams};

pub const TABLE_VERSION: u32 = 1;
pub const DEFAULT_CLT_CUTOFF: usize = 200;
pub const DEFAULT_MAX_WINDOW: usize = 400;

fn check_rate(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("alpha must lie in (0, 1), got {alpha}")))
    }
}

/// Minimal green count `k*` with `P(Binomial(w, gamma) ≥ k*) < alpha`, or
/// `None` when even an all-green window is not significant.
pub fn kgw_min_green(w: usize, gamma: f64, alpha: f64) -> Option<usize> {
    let ln_alpha = alpha.ln();
    let passes = |k: usize| binomial_log_tail(w as u64, gamma, k as u64) < ln_alpha;
    if w == 0 || !passes(w) {
        return None;
    }
    // k = 0 never passes since the tail is 1.
    let (mut lo, mut hi) = (0usize, w);
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

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KgwThreshold {
    /// Pass iff z is at least this value.
    Z(f64),
    /// No green count in a window this short reaches `alpha`.
    Undecidable,
}

/// Shortest window in which a KGW count can reach `alpha`: `gamma^w < alpha`.
pub fn shortest_decidable_window(gamma: f64, alpha: f64) -> usize {
    let mut w = (alpha.ln() / gamma.ln()).floor().max(1.0) as usize;
    while w > 1 && kgw_min_green(w - 1, gamma, alpha).is_some() {
        w -= 1;
    }
    while kgw_min_green(w, gamma, alpha).is_none() {
        w += 1;
    }
    w
}

/// Raw z threshold for a KGW window of `w` tokens.
pub fn kgw_threshold(w: usize, gamma: f64, alpha: f64, clt_cutoff: usize) -> Result<KgwThreshold> {
    if w == 0 {
        return Err(Error::EmptyInput("kgw window"));
    }
    check_rate(alpha)?;
    if w >= clt_cutoff {
        return Ok(KgwThreshold::Z(normal_upper_quantile(alpha)));
    }
    Ok(match kgw_min_green(w, gamma, alpha) {
        Some(k) => KgwThreshold::Z(kgw_z_unchecked(k, w, gamma)),
        None => KgwThreshold::Undecidable,
    })
}

/// Aar p-value threshold; the same for every window length.
pub fn aar_threshold(alpha: f64) -> Result<f64> {
    check_rate(alpha)?;
    Ok(alpha)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdEntry {
    pub w: usize,
    /// Threshold on the raw statistic (z for KGW, `S` for Aar); `null` when
    /// the window is undecidable.
    pub threshold: Option<f64>,
    /// Exact minimal green count, independent of the normal cutoff (KGW only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_green: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct TableWire {
    v: u32,
    scheme: Scheme,
    gamma: f64,
    alpha: f64,
    clt_cutoff: usize,
    entries: Vec<ThresholdEntry>,
}

/// Thresholds precomputed for every window length in `[1, max_window]`.
/// Longer windows are computed on demand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TableWire", into = "TableWire")]
pub struct ThresholdTable {
    scheme: Scheme,
    gamma: f64,
    alpha: f64,
    clt_cutoff: usize,
    entries: Vec<ThresholdEntry>,
    clt_z: f64,
    ln_alpha: f64,
    shortest: usize,
}

impl ThresholdTable {
    pub fn build(scheme: Scheme, gamma: f64, alpha: f64, clt_cutoff: usize, max_window: usize) -> Result<Self> {
        check_rate(alpha)?;
        if !(gamma > 0.0 && gamma < 1.0) {
            return Err(Error::invalid(format!("gamma must lie in (0, 1), got {gamma}")));
        }
        let mut table = ThresholdTable {
            scheme,
            gamma,
            alpha,
            clt_cutoff,
            entries: Vec::new(),
            clt_z: normal_upper_quantile(alpha),
            ln_alpha: alpha.ln(),
            shortest: shortest_decidable_window(gamma, alpha),
        };
        table.entries = (1..=max_window).map(|w| table.compute_entry(w)).collect::<Result<_>>()?;
        Ok(table)
    }

    /// Default table for `params`: normal cutoff at 200, lengths up to 400.
    pub fn for_params(params: &SchemeParams) -> Result<Self> {
        Self::build(params.scheme, params.gamma, params.alpha, DEFAULT_CLT_CUTOFF, DEFAULT_MAX_WINDOW)
    }

    fn compute_entry(&self, w: usize) -> Result<ThresholdEntry> {
        Ok(match self.scheme {
            Scheme::Kgw => {
                let min_green = kgw_min_green(w, self.gamma, self.alpha);
                let threshold = if w >= self.clt_cutoff {
                    Some(self.clt_z)
                } else {
                    min_green.map(|k| kgw_z_unchecked(k, w, self.gamma))
                };
                ThresholdEntry { w, threshold, min_green }
            }
            Scheme::Aar => ThresholdEntry {
                w,
                threshold: if w >= self.shortest { Some(gamma_upper_quantile(w as f64, self.alpha)?) } else { None },
                min_green: None,
            },
        })
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn clt_cutoff(&self) -> usize {
        self.clt_cutoff
    }

    pub fn shortest_decidable(&self) -> usize {
        self.shortest
    }

    pub fn max_window(&self) -> usize {
        self.entries.len()
    }

    pub fn entries(&self) -> &[ThresholdEntry] {
        &self.entries
    }

    pub fn entry(&self, w: usize) -> Result<ThresholdEntry> {
        if w == 0 {
            return Err(Error::EmptyInput("threshold window"));
        }
        match self.entries.get(w - 1) {
            Some(e) => Ok(e.clone()),
            None => self.compute_entry(w),
        }
    }

    fn kgw_min_green_at(&self, w: usize) -> Option<usize> {
        match self.entries.get(w.wrapping_sub(1)) {
            Some(e) => e.min_green,
            None => kgw_min_green(w, self.gamma, self.alpha),
        }
    }

    /// Whether any statistic on a window of `w` tokens can pass.
    pub fn is_decidable(&self, w: usize) -> bool {
        match self.scheme {
            Scheme::Kgw => w >= self.clt_cutoff || self.kgw_min_green_at(w).is_some(),
            Scheme::Aar => w >= self.shortest,
        }
    }

    /// The length-specific decision rule.
    pub fn passes(&self, stat: &WindowStatistic) -> bool {
        match self.scheme {
            Scheme::Kgw => {
                if stat.window_len >= self.clt_cutoff {
                    stat.raw >= self.clt_z
                } else {
                    match (self.kgw_min_green_at(stat.window_len), stat.green) {
                        (Some(k), Some(g)) => g >= k,
                        _ => false,
                    }
                }
            }
            Scheme::Aar => stat.window_len >= self.shortest && stat.log_tail < self.ln_alpha,
        }
    }

    /// Sum threshold `S*` for an Aar window; windows with a sum below it
    /// fail. `None` below the shortest decidable window.
    pub fn aar_sum_threshold(&self, w: usize) -> Result<Option<f64>> {
        Ok(self.entry(w)?.threshold)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

impl TryFrom<TableWire> for ThresholdTable {
    type Error = Error;

    fn try_from(w: TableWire) -> Result<Self> {
        if w.v != TABLE_VERSION {
            return Err(Error::SchemaVersion { found: u64::from(w.v), expected: u64::from(TABLE_VERSION) });
        }
        check_rate(w.alpha)?;
        for (i, e) in w.entries.iter().enumerate() {
            if e.w != i + 1 {
                return Err(Error::invalid(format!("threshold entry {i} has w = {}, expected {}", e.w, i + 1)));
            }
        }
        if !(w.gamma > 0.0 && w.gamma < 1.0) {
            return Err(Error::invalid(format!("gamma must lie in (0, 1), got {}", w.gamma)));
        }
        Ok(ThresholdTable {
            scheme: w.scheme,
            gamma: w.gamma,
            alpha: w.alpha,
            clt_cutoff: w.clt_cutoff,
            entries: w.entries,
            clt_z: normal_upper_quantile(w.alpha),
            ln_alpha: w.alpha.ln(),
            shortest: shortest_decidable_window(w.gamma, w.alpha),
        })
    }
}

impl From<ThresholdTable> for TableWire {
    fn from(t: ThresholdTable) -> Self {
        TableWire {
            v: TABLE_VERSION,
            scheme: t.scheme,
            gamma: t.gamma,
            alpha: t.alpha,
            clt_cutoff: t.clt_cutoff,
            entries: t.entries,
        }
    }
}
