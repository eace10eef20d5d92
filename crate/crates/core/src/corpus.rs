//! Labeled synthetic corpora: null host streams with embedded segments,
//! edit attacks, and JSONL persistence.

use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::attack::{apply_edit_attack, AttackKind};
use crate::error::{Error, Result};
use crate::rng::{self, derive_seed, labels};
use crate::stream::{
    embed_segments, sample_null_stream, validate_disjoint, Scheme, SchemeParams, ScoreStream, ScoreValues, SegmentSpan,
    DEFAULT_GAMMA,
};

pub const SCHEMA_VERSION: u64 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StrengthLabel {
    Strong,
    Medium,
    Weak,
}

impl StrengthLabel {
    pub const ALL: [StrengthLabel; 3] = [StrengthLabel::Strong, StrengthLabel::Medium, StrengthLabel::Weak];

    /// Preset parameters: KGW `gamma1` of 0.85 / 0.75 / 0.65, Aar strength 3 / 2 / 1.
    pub fn params(self, scheme: Scheme, gamma: f64) -> Result<SchemeParams> {
        match scheme {
            Scheme::Kgw => SchemeParams::kgw(
                gamma,
                match self {
                    StrengthLabel::Strong => 0.85,
                    StrengthLabel::Medium => 0.75,
                    StrengthLabel::Weak => 0.65,
                },
            ),
            Scheme::Aar => SchemeParams::aar(match self {
                StrengthLabel::Strong => 3.0,
                StrengthLabel::Medium => 2.0,
                StrengthLabel::Weak => 1.0,
            }),
        }
    }
}

impl fmt::Display for StrengthLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StrengthLabel::Strong => "strong",
            StrengthLabel::Medium => "medium",
            StrengthLabel::Weak => "weak",
        })
    }
}

impl std::str::FromStr for StrengthLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "strong" => Ok(StrengthLabel::Strong),
            "medium" => Ok(StrengthLabel::Medium),
            "weak" => Ok(StrengthLabel::Weak),
            other => Err(Error::invalid(format!("unknown strength `{other}`"))),
        }
    }
}

/// One entry of a strength pool; `label` is `None` for custom parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Strength {
    pub label: Option<StrengthLabel>,
    pub params: SchemeParams,
}

impl Strength {
    pub fn preset(label: StrengthLabel, scheme: Scheme, gamma: f64) -> Result<Self> {
        Ok(Strength { label: Some(label), params: label.params(scheme, gamma)? })
    }

    pub fn custom(params: SchemeParams) -> Self {
        Strength { label: None, params }
    }

    /// All three presets.
    pub fn mixed(scheme: Scheme, gamma: f64) -> Result<Vec<Self>> {
        StrengthLabel::ALL.iter().map(|&l| Self::preset(l, scheme, gamma)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusSpec {
    pub scheme: Scheme,
    pub gamma: f64,
    pub n_positive: usize,
    pub n_negative: usize,
    pub doc_len: usize,
    /// Inclusive segment length range.
    pub seg_len_range: (usize, usize),
    pub segments_per_doc: usize,
    /// Minimum number of null tokens between two segments of one document.
    pub min_gap: usize,
    pub strength_pool: Vec<Strength>,
    pub master_seed: u64,
}

impl CorpusSpec {
    /// 10,000-token documents, one 100 to 400 token segment, mixed presets.
    pub fn standard(scheme: Scheme, n_positive: usize, n_negative: usize, master_seed: u64) -> Result<Self> {
        Ok(CorpusSpec {
            scheme,
            gamma: DEFAULT_GAMMA,
            n_positive,
            n_negative,
            doc_len: 10_000,
            seg_len_range: (100, 400),
            segments_per_doc: 1,
            min_gap: 100,
            strength_pool: Strength::mixed(scheme, DEFAULT_GAMMA)?,
            master_seed,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.seg_len_range;
        if self.doc_len == 0 {
            return Err(Error::invalid("doc_len must be positive"));
        }
        if lo == 0 || lo > hi || hi > self.doc_len {
            return Err(Error::invalid(format!("segment length range [{lo}, {hi}] must lie in [1, {}]", self.doc_len)));
        }
        if self.n_positive > 0 {
            if self.segments_per_doc == 0 {
                return Err(Error::invalid("positive documents need at least one segment"));
            }
            let need = self.segments_per_doc * hi + (self.segments_per_doc - 1) * self.min_gap;
            if need > self.doc_len {
                return Err(Error::InfeasiblePacking(format!(
                    "{} segments of up to {hi} tokens with gaps of {} need {need} tokens, documents have {}",
                    self.segments_per_doc, self.min_gap, self.doc_len
                )));
            }
            if self.strength_pool.is_empty() {
                return Err(Error::invalid("strength pool is empty"));
            }
        }
        for s in &self.strength_pool {
            s.params.validate()?;
            if s.params.scheme != self.scheme {
                return Err(Error::SchemeMismatch { expected: self.scheme.to_string(), found: s.params.scheme.to_string() });
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.n_positive + self.n_negative
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttackDescriptor {
    pub kind: AttackKind,
    pub ratio: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordMeta {
    pub gamma: f64,
    pub gamma1: Option<f64>,
    pub aar_strength: Option<f64>,
    pub seed: u64,
    pub strength: Option<StrengthLabel>,
    pub attack: Option<AttackDescriptor>,
    /// Generator behind `seed`.
    pub rng: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorpusRecord {
    pub doc_id: String,
    pub stream: ScoreStream,
    pub gold: Vec<SegmentSpan>,
    pub meta: RecordMeta,
}

impl CorpusRecord {
    pub fn is_positive(&self) -> bool {
        !self.gold.is_empty()
    }
}

pub fn doc_id(index: usize) -> String {
    format!("doc-{index:06}")
}

/// Builds record `index` of `spec`: positives first, then negatives.
///
/// Each record depends only on `spec` and its own seed
/// `derive_seed(master_seed, index)`.
pub fn build_record(spec: &CorpusSpec, index: usize) -> Result<CorpusRecord> {
    if index >= spec.len() {
        return Err(Error::invalid(format!("record index {index} out of range for {} records", spec.len())));
    }
    let seed = derive_seed(spec.master_seed, index as u64);
    let null_params = SchemeParams::null(spec.scheme, spec.gamma)?;
    let null = sample_null_stream(&null_params, spec.doc_len, derive_seed(seed, labels::NULL_STREAM))?;
    let mut meta = RecordMeta {
        gamma: spec.gamma,
        gamma1: None,
        aar_strength: None,
        seed,
        strength: None,
        attack: None,
        rng: rng::RNG_ALGORITHM.to_string(),
    };
    if index >= spec.n_positive {
        return Ok(CorpusRecord { doc_id: doc_id(index), stream: null, gold: Vec::new(), meta });
    }

    let mut strength_rng = rng::seeded(derive_seed(seed, labels::STRENGTH));
    let strength = spec.strength_pool[strength_rng.random_range(0..spec.strength_pool.len())];
    let mut params = strength.params;
    params.gamma = spec.gamma;
    meta.strength = strength.label;
    match spec.scheme {
        Scheme::Kgw => meta.gamma1 = Some(params.gamma1),
        Scheme::Aar => meta.aar_strength = Some(params.aar_strength),
    }

    let gold = layout(spec, derive_seed(seed, labels::LAYOUT));
    let segments: Vec<(SegmentSpan, SchemeParams)> = gold.iter().map(|&s| (s, params)).collect();
    let stream = embed_segments(&null, &segments, seed)?;
    Ok(CorpusRecord { doc_id: doc_id(index), stream, gold, meta })
}

/// Segment lengths uniform in the range; placement uniform over all
/// layouts that respect the gap, by distributing the free tokens with
/// sorted uniform cut points.
fn layout(spec: &CorpusSpec, seed: u64) -> Vec<SegmentSpan> {
    let mut rng = rng::seeded(seed);
    let (lo, hi) = spec.seg_len_range;
    let k = spec.segments_per_doc;
    let lens: Vec<usize> = (0..k).map(|_| rng.random_range(lo..=hi)).collect();
    let free = spec.doc_len - lens.iter().sum::<usize>() - (k - 1) * spec.min_gap;
    let mut cuts: Vec<usize> = (0..k).map(|_| rng.random_range(0..=free)).collect();
    cuts.sort_unstable();
    let mut spans = Vec::with_capacity(k);
    let mut used = 0;
    for (i, (&len, &cut)) in lens.iter().zip(&cuts).enumerate() {
        let start = cut + used + i * spec.min_gap;
        spans.push(SegmentSpan { start, end: start + len });
        used += len;
    }
    spans
}

pub fn build_corpus(spec: &CorpusSpec) -> Result<Vec<CorpusRecord>> {
    spec.validate()?;
    (0..spec.len()).map(|i| build_record(spec, i)).collect()
}

/// Applies one edit attack per record, seeded from `(seed, record index)`.
pub fn attack_corpus(records: &[CorpusRecord], kind: AttackKind, ratio: f64, seed: u64) -> Result<Vec<CorpusRecord>> {
    records
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let s = derive_seed(seed, i as u64);
            let (stream, gold) = apply_edit_attack(&r.stream, &r.gold, kind, ratio, r.meta.gamma, s)?;
            let mut meta = r.meta.clone();
            meta.attack = Some(AttackDescriptor { kind, ratio, seed: s });
            Ok(CorpusRecord { doc_id: r.doc_id.clone(), stream, gold, meta })
        })
        .collect()
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum WireValues {
    Bits(Vec<u8>),
    Reals(Vec<f64>),
}

#[derive(Serialize, Deserialize)]
struct WireRecord {
    v: u64,
    doc_id: String,
    scheme: Scheme,
    n: usize,
    values: WireValues,
    gold: Vec<SegmentSpan>,
    meta: RecordMeta,
}

#[derive(Deserialize)]
struct WireVersion {
    v: u64,
}

impl CorpusRecord {
    fn to_wire(&self) -> WireRecord {
        let values = match self.stream.values() {
            ScoreValues::Green(v) => WireValues::Bits(v.iter().map(|&g| u8::from(g)).collect()),
            ScoreValues::Uniform(v) => WireValues::Reals(v.clone()),
        };
        WireRecord {
            v: SCHEMA_VERSION,
            doc_id: self.doc_id.clone(),
            scheme: self.stream.scheme(),
            n: self.stream.len(),
            values,
            gold: self.gold.clone(),
            meta: self.meta.clone(),
        }
    }

    fn from_wire(w: WireRecord) -> Result<Self> {
        if w.v != SCHEMA_VERSION {
            return Err(Error::SchemaVersion { found: w.v, expected: SCHEMA_VERSION });
        }
        let values = match (w.scheme, w.values) {
            (Scheme::Kgw, WireValues::Bits(b)) => {
                if b.iter().any(|&x| x > 1) {
                    return Err(Error::invalid("kgw values must be 0 or 1"));
                }
                ScoreValues::Green(b.into_iter().map(|x| x == 1).collect())
            }
            (Scheme::Aar, WireValues::Reals(r)) => ScoreValues::Uniform(r),
            (Scheme::Aar, WireValues::Bits(b)) => ScoreValues::Uniform(b.into_iter().map(f64::from).collect()),
            (Scheme::Kgw, WireValues::Reals(_)) => return Err(Error::invalid("kgw values must be 0 or 1")),
        };
        if values.len() != w.n {
            return Err(Error::invalid(format!("n = {} but {} values", w.n, values.len())));
        }
        let stream = ScoreStream::from_values(values)?;
        validate_disjoint(&w.gold, stream.len())?;
        Ok(CorpusRecord { doc_id: w.doc_id, stream, gold: w.gold, meta: w.meta })
    }

    pub fn to_json_line(&self) -> Result<String> {
        Ok(serde_json::to_string(&self.to_wire())?)
    }

    pub fn from_json_line(line: &str) -> Result<Self> {
        match serde_json::from_str::<WireRecord>(line) {
            Ok(w) => Self::from_wire(w),
            Err(e) => match serde_json::from_str::<WireVersion>(line) {
                Ok(WireVersion { v }) if v != SCHEMA_VERSION => {
                    Err(Error::SchemaVersion { found: v, expected: SCHEMA_VERSION })
                }
                _ => Err(e.into()),
            },
        }
    }
}

fn at_line(line: usize, e: Error) -> Error {
    match e {
        Error::SchemaVersion { .. } | Error::Io(_) => e,
        other => Error::Parse { line, message: other.to_string() },
    }
}

pub fn write_corpus<W: Write>(records: &[CorpusRecord], mut out: W) -> Result<()> {
    for r in records {
        out.write_all(r.to_json_line()?.as_bytes())?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

/// Reads JSONL records; blank lines are skipped and errors name their 1-based line.
pub fn read_corpus<R: BufRead>(input: R) -> Result<Vec<CorpusRecord>> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(CorpusRecord::from_json_line(&line).map_err(|e| at_line(i + 1, e))?);
    }
    Ok(out)
}

pub fn save_corpus(records: &[CorpusRecord], path: impl AsRef<Path>) -> Result<()> {
    write_corpus(records, BufWriter::new(File::create(path)?))
}

pub fn load_corpus(path: impl AsRef<Path>) -> Result<Vec<CorpusRecord>> {
    read_corpus(BufReader::new(File::open(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_spec(scheme: Scheme, pos: usize, neg: usize, seed: u64) -> CorpusSpec {
        CorpusSpec { doc_len: 2000, ..CorpusSpec::standard(scheme, pos, neg, seed).unwrap() }
    }

    #[test]
    fn no_positives_means_all_negative() {
        let c = build_corpus(&small_spec(Scheme::Kgw, 0, 5, 1)).unwrap();
        assert_eq!(c.len(), 5);
        assert!(c.iter().all(|r| r.gold.is_empty() && r.meta.strength.is_none()));
    }

    #[test]
    fn label_balance_and_layout() {
        let mut spec = small_spec(Scheme::Kgw, 40, 10, 3);
        spec.segments_per_doc = 3;
        let c = build_corpus(&spec).unwrap();
        assert_eq!(c.iter().filter(|r| r.is_positive()).count(), 40);
        for r in c.iter().filter(|r| r.is_positive()) {
            assert_eq!(r.gold.len(), 3);
            for g in &r.gold {
                assert!((100..=400).contains(&g.len()) && g.end <= 2000);
            }
            for pair in r.gold.windows(2) {
                assert!(pair[1].start >= pair[0].end + 100);
            }
        }
    }

    #[test]
    fn infeasible_packing_is_rejected() {
        let mut spec = small_spec(Scheme::Kgw, 1, 0, 3);
        spec.segments_per_doc = 5;
        assert!(matches!(build_corpus(&spec), Err(Error::InfeasiblePacking(_))));
    }

    #[test]
    fn records_regenerate_from_index() {
        let spec = small_spec(Scheme::Aar, 4, 4, 11);
        let c = build_corpus(&spec).unwrap();
        for (i, r) in c.iter().enumerate() {
            assert_eq!(&build_record(&spec, i).unwrap(), r);
            assert_eq!(r.meta.seed, derive_seed(11, i as u64));
        }
    }

    #[test]
    fn json_line_shape() {
        let spec = CorpusSpec { doc_len: 300, seg_len_range: (100, 100), ..small_spec(Scheme::Kgw, 1, 0, 5) };
        let line = build_corpus(&spec).unwrap()[0].to_json_line().unwrap();
        assert!(line.starts_with(r#"{"v":1,"doc_id":"doc-000000","scheme":"kgw","n":300,"values":["#));
        assert!(line.contains(r#""meta":{"gamma":0.5,"gamma1":"#));
        assert!(line.contains(r#""aar_strength":null,"seed":"#));
        assert!(line.ends_with(r#""attack":null,"rng":"chacha20-splitmix64"}}"#));
    }

    #[test]
    fn hand_written_fixture() {
        let text = concat!(
            r#"{"v":1,"doc_id":"a","scheme":"kgw","n":4,"values":[0,1,1,0],"gold":[[1,3]],"meta":{"gamma":0.5,"gamma1":0.75,"aar_strength":null,"seed":9,"strength":"medium","attack":null,"rng":"chacha20-splitmix64"}}"#,
            "\n",
            r#"{"v":1,"doc_id":"b","scheme":"aar","n":2,"values":[0.25,0.5],"gold":[],"meta":{"gamma":0.5,"gamma1":null,"aar_strength":null,"seed":10,"strength":null,"attack":{"kind":"delete","ratio":0.3,"seed":4},"rng":"chacha20-splitmix64"}}"#,
            "\n"
        );
        let c = read_corpus(text.as_bytes()).unwrap();
        assert_eq!(c[0].stream.green_flags().unwrap(), &[false, true, true, false]);
        assert_eq!(c[0].gold, vec![SegmentSpan::new(1, 3).unwrap()]);
        assert_eq!(c[0].meta.strength, Some(StrengthLabel::Medium));
        assert_eq!(c[1].stream.uniform_values().unwrap(), &[0.25, 0.5]);
        assert_eq!(c[1].meta.attack.unwrap().kind, AttackKind::Delete);
    }

    #[test]
    fn truncated_line_names_its_number() {
        let c = build_corpus(&small_spec(Scheme::Kgw, 1, 1, 2)).unwrap();
        let mut buf = Vec::new();
        write_corpus(&c, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let cut = &text[..text.len() - 20];
        match read_corpus(cut.as_bytes()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn version_mismatch_is_explicit() {
        let line = build_corpus(&small_spec(Scheme::Kgw, 0, 1, 2)).unwrap()[0].to_json_line().unwrap();
        let bumped = line.replacen(r#""v":1"#, r#""v":2"#, 1);
        assert!(matches!(
            read_corpus(bumped.as_bytes()),
            Err(Error::SchemaVersion { found: 2, expected: 1 })
        ));
    }

    #[test]
    fn inconsistent_n_rejected() {
        let text = r#"{"v":1,"doc_id":"a","scheme":"kgw","n":5,"values":[0,1],"gold":[],"meta":{"gamma":0.5,"gamma1":null,"aar_strength":null,"seed":0,"strength":null,"attack":null,"rng":"x"}}"#;
        assert!(matches!(read_corpus(text.as_bytes()), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn attack_corpus_records_descriptor() {
        let c = build_corpus(&small_spec(Scheme::Kgw, 3, 1, 8)).unwrap();
        let same = attack_corpus(&c, AttackKind::Substitute, 0.0, 1).unwrap();
        assert!(same.iter().zip(&c).all(|(a, b)| a.stream == b.stream && a.gold == b.gold));
        let del = attack_corpus(&c, AttackKind::Delete, 0.3, 1).unwrap();
        for r in &del {
            assert_eq!(r.stream.len(), 1400);
            assert_eq!(r.meta.attack.unwrap().ratio, 0.3);
        }
    }
}
