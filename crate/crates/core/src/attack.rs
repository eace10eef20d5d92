//! Score-level model of word edit attacks.
//!
//! Editing a token changes its own score and destroys the hash context of the
//! token after it, so both are re-drawn from the null distribution.

use std::fmt;

use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;
use crate::stream::{redraw_null, ScoreStream, ScoreValues, SegmentSpan};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AttackKind {
    Delete,
    Substitute,
}

impl fmt::Display for AttackKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AttackKind::Delete => "delete",
            AttackKind::Substitute => "substitute",
        })
    }
}

impl std::str::FromStr for AttackKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "delete" => Ok(AttackKind::Delete),
            "substitute" => Ok(AttackKind::Substitute),
            other => Err(Error::invalid(format!("unknown attack kind `{other}`"))),
        }
    }
}

fn keep_unchosen<T: Copy>(v: &[T], chosen: &[bool]) -> Vec<T> {
    v.iter().zip(chosen).filter(|(_, &c)| !c).map(|(x, _)| *x).collect()
}

/// Applies an edit attack to `stream`, returning the edited stream and the
/// gold spans mapped onto it.
///
/// `floor(ratio * n)` positions are chosen uniformly without replacement.
/// `gamma` is the null green rate used for KGW re-draws. Deleting a whole
/// gold span removes it from the returned list.
pub fn apply_edit_attack(
    stream: &ScoreStream,
    gold: &[SegmentSpan],
    kind: AttackKind,
    ratio: f64,
    gamma: f64,
    seed: u64,
) -> Result<(ScoreStream, Vec<SegmentSpan>)> {
    if !(0.0..1.0).contains(&ratio) {
        return Err(Error::invalid(format!("attack ratio must lie in [0, 1), got {ratio}")));
    }
    for g in gold {
        g.check_within(stream.len())?;
    }
    let n = stream.len();
    let edits = (ratio * n as f64).floor() as usize;
    if edits == 0 {
        return Ok((stream.clone(), gold.to_vec()));
    }

    let mut rng = rng::seeded(seed);
    let mut chosen = vec![false; n];
    for i in index::sample(&mut rng, n, edits) {
        chosen[i] = true;
    }

    match kind {
        AttackKind::Substitute => {
            let mut values = stream.values().clone();
            for i in 0..n {
                if chosen[i] || (i > 0 && chosen[i - 1]) {
                    redraw_null(&mut values, i, gamma, &mut rng);
                }
            }
            Ok((ScoreStream::from_values(values)?, gold.to_vec()))
        }
        AttackKind::Delete => {
            // survivors_before[i] = number of kept positions in [0, i)
            let mut survivors_before = Vec::with_capacity(n + 1);
            survivors_before.push(0usize);
            for &c in &chosen {
                survivors_before.push(survivors_before.last().unwrap() + usize::from(!c));
            }
            let mut values = match stream.values() {
                ScoreValues::Green(v) => ScoreValues::Green(keep_unchosen(v, &chosen)),
                ScoreValues::Uniform(v) => ScoreValues::Uniform(keep_unchosen(v, &chosen)),
            };
            // A survivor whose original predecessor was deleted lost its context.
            for i in 1..n {
                if !chosen[i] && chosen[i - 1] {
                    redraw_null(&mut values, survivors_before[i], gamma, &mut rng);
                }
            }
            let spans = gold
                .iter()
                .filter_map(|g| SegmentSpan::new(survivors_before[g.start], survivors_before[g.end]).ok())
                .collect();
            Ok((ScoreStream::from_values(values)?, spans))
        }
    }
}
