//! Watermark segment detection over per-token score streams.

pub mod attack;
pub mod corpus;
pub mod detectors;
pub mod error;
pub mod evaluation;
pub mod harness;
pub mod rng;
pub mod scorer;
pub mod stats;
pub mod stream;

pub use attack::{apply_edit_attack, AttackKind};
pub use corpus::{CorpusRecord, CorpusSpec, StrengthLabel};
pub use detectors::{DetectionResult, Detector, WaterSeekerConfig};
pub use error::{Error, Result};
pub use evaluation::{evaluate_corpus, iou, EvalOutcome};
pub use scorer::{score_tokens, TokenScorerKey};
pub use stats::{ThresholdTable, WindowStatistic};
pub use stream::{Scheme, SchemeParams, ScoreStream, ScoreValues, SegmentSpan};
