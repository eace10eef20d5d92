//! Keyed single-token scoring for callers that bring their own token IDs.
//!
//! Position `t` is scored from the context `(secret_key, token[t-1])`, with a
//! fixed sentinel standing in for the context of position 0. For KGW the
//! context keys a pseudo-random permutation of the vocabulary (a Feistel
//! network with cycle walking) and a token is green when it lands in the first
//! `floor(gamma * vocab_size)` slots. For Aar the context and the token are
//! hashed together into `u_t(y_t)` in `[0, 1)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::mix64;
use crate::stream::{Scheme, ScoreStream, ScoreValues};

/// Context used for the first token, which has no predecessor.
pub const SENTINEL_CONTEXT: u64 = u64::MAX;

const FEISTEL_ROUNDS: u64 = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenScorerKey {
    pub secret_key: u64,
    pub vocab_size: u32,
}

impl TokenScorerKey {
    pub fn new(secret_key: u64, vocab_size: u32) -> Result<Self> {
        if vocab_size < 2 {
            return Err(Error::invalid(format!("vocab_size must be at least 2, got {vocab_size}")));
        }
        Ok(TokenScorerKey { secret_key, vocab_size })
    }

    fn context_key(&self, previous: u64) -> u64 {
        mix64(self.secret_key ^ mix64(previous.wrapping_add(0x632B_E59B_D9B4_E019)))
    }
}

/// Keyed permutation of `[0, domain)`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct KeyedPermutation {
    key: u64,
    domain: u64,
    half_bits: u32,
}

impl KeyedPermutation {
    pub(crate) fn new(key: u64, domain: u64) -> Self {
        debug_assert!(domain >= 2);
        let bits = 64 - (domain - 1).leading_zeros();
        KeyedPermutation { key, domain, half_bits: bits.div_ceil(2).max(1) }
    }

    fn feistel(&self, x: u64) -> u64 {
        let mask = (1u64 << self.half_bits) - 1;
        let (mut left, mut right) = (x >> self.half_bits, x & mask);
        for round in 0..FEISTEL_ROUNDS {
            let f = mix64(self.key ^ round.wrapping_mul(0xA076_1D64_78BD_642F) ^ right) & mask;
            (left, right) = (right, left ^ f);
        }
        (left << self.half_bits) | right
    }

    pub(crate) fn apply(&self, x: u64) -> u64 {
        let mut y = self.feistel(x);
        while y >= self.domain {
            y = self.feistel(y);
        }
        y
    }
}

fn green(key: &TokenScorerKey, previous: u64, token: u32, green_slots: u64) -> bool {
    let perm = KeyedPermutation::new(key.context_key(previous), u64::from(key.vocab_size));
    perm.apply(u64::from(token)) < green_slots
}

fn correlation(key: &TokenScorerKey, previous: u64, token: u32) -> f64 {
    let h = mix64(key.context_key(previous) ^ mix64(u64::from(token) ^ 0x5851_F42D_4C95_7F2D));
    (h >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Scores a token sequence under a secret key. `gamma` sets the green-list
/// fraction and is ignored for Aar.
pub fn score_tokens(tokens: &[u32], key: &TokenScorerKey, scheme: Scheme, gamma: f64) -> Result<ScoreStream> {
    if tokens.is_empty() {
        return Err(Error::EmptyInput("token sequence"));
    }
    if let Some((position, &id)) = tokens.iter().enumerate().find(|(_, &t)| t >= key.vocab_size) {
        return Err(Error::TokenOutOfRange { id, position, vocab_size: key.vocab_size });
    }
    let previous = |t: usize| if t == 0 { SENTINEL_CONTEXT } else { u64::from(tokens[t - 1]) };
    let values = match scheme {
        Scheme::Kgw => {
            if !(gamma > 0.0 && gamma < 1.0) {
                return Err(Error::invalid(format!("gamma must lie in (0, 1), got {gamma}")));
            }
            let slots = (gamma * f64::from(key.vocab_size)).floor() as u64;
            ScoreValues::Green((0..tokens.len()).map(|t| green(key, previous(t), tokens[t], slots)).collect())
        }
        Scheme::Aar => {
            ScoreValues::Uniform((0..tokens.len()).map(|t| correlation(key, previous(t), tokens[t])).collect())
        }
    };
    ScoreStream::from_values(values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn random_tokens(n: usize, vocab: u32, seed: u64) -> Vec<u32> {
        let mut rng = crate::rng::seeded(seed);
        (0..n).map(|_| rng.random_range(0..vocab)).collect()
    }

    #[test]
    fn permutation_is_bijective() {
        for domain in [2u64, 3, 7, 16, 100, 1000, 32_000] {
            let p = KeyedPermutation::new(0xDEAD_BEEF ^ domain, domain);
            let mut seen = vec![false; domain as usize];
            for x in 0..domain {
                let y = p.apply(x) as usize;
                assert!(!seen[y], "collision in domain {domain}");
                seen[y] = true;
            }
        }
    }

    #[test]
    fn deterministic() {
        let key = TokenScorerKey::new(99, 32_000).unwrap();
        let toks = random_tokens(2000, 32_000, 1);
        for scheme in [Scheme::Kgw, Scheme::Aar] {
            assert_eq!(score_tokens(&toks, &key, scheme, 0.5).unwrap(), score_tokens(&toks, &key, scheme, 0.5).unwrap());
        }
    }

    #[test]
    fn kgw_green_fraction_and_bucket_uniformity() {
        let key = TokenScorerKey::new(0x1234_5678, 50_000).unwrap();
        let toks = random_tokens(10_000, 50_000, 2);
        let s = score_tokens(&toks, &key, Scheme::Kgw, 0.5).unwrap();
        let frac = s.green_count().unwrap() as f64 / 10_000.0;
        assert!((frac - 0.5).abs() < 0.02, "{frac}");

        // Chi-square over 20 buckets of the permuted slot, 19 dof; the 0.999
        // quantile is 43.8.
        let mut buckets = [0f64; 20];
        for t in 1..toks.len() {
            let perm = KeyedPermutation::new(key.context_key(u64::from(toks[t - 1])), 50_000);
            buckets[(perm.apply(u64::from(toks[t])) * 20 / 50_000) as usize] += 1.0;
        }
        let expected = (toks.len() - 1) as f64 / 20.0;
        let chi2: f64 = buckets.iter().map(|o| (o - expected).powi(2) / expected).sum();
        assert!(chi2 < 43.8, "chi2 = {chi2}");
    }

    #[test]
    fn aar_values_uniform_mean() {
        let key = TokenScorerKey::new(7, 32_000).unwrap();
        let s = score_tokens(&random_tokens(20_000, 32_000, 3), &key, Scheme::Aar, 0.5).unwrap();
        let v = s.uniform_values().unwrap();
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        assert!((mean - 0.5).abs() < 0.01);
    }

    #[test]
    fn flipped_key_bit_decorrelates() {
        let toks = random_tokens(10_000, 32_000, 4);
        let a = score_tokens(&toks, &TokenScorerKey::new(0xABCD, 32_000).unwrap(), Scheme::Kgw, 0.5).unwrap();
        let b = score_tokens(&toks, &TokenScorerKey::new(0xABCD ^ 1, 32_000).unwrap(), Scheme::Kgw, 0.5).unwrap();
        let (fa, fb) = (a.green_flags().unwrap(), b.green_flags().unwrap());
        let agree = fa.iter().zip(fb).filter(|(x, y)| x == y).count() as f64 / fa.len() as f64;
        assert!(agree < 0.55, "{agree}");
    }

    #[test]
    fn rejects_bad_input() {
        let key = TokenScorerKey::new(1, 10).unwrap();
        assert!(matches!(score_tokens(&[], &key, Scheme::Kgw, 0.5), Err(Error::EmptyInput(_))));
        assert!(matches!(
            score_tokens(&[1, 10], &key, Scheme::Kgw, 0.5),
            Err(Error::TokenOutOfRange { id: 10, position: 1, .. })
        ));
        assert!(TokenScorerKey::new(1, 1).is_err());
    }

    #[test]
    fn first_position_uses_sentinel() {
        // The first token's score depends only on the key and the token itself.
        let key = TokenScorerKey::new(5, 1000).unwrap();
        let a = score_tokens(&[17, 3], &key, Scheme::Aar, 0.5).unwrap();
        let b = score_tokens(&[17, 900], &key, Scheme::Aar, 0.5).unwrap();
        assert_eq!(a.uniform_values().unwrap()[0], b.uniform_values().unwrap()[0]);
    }
}
