use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tokenize::TokenSequence;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Smoothing {
    /// Any zero clipped count makes the score 0.
    #[default]
    None,
    /// Precisions are floored at [`EPSILON_FLOOR`].
    EpsilonFloor,
}

pub const EPSILON_FLOOR: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BleuParams {
    pub max_order: usize,
    pub weights: Vec<f64>,
    pub smoothing: Smoothing,
}

impl Default for BleuParams {
    fn default() -> Self {
        Self::uniform(4)
    }
}

impl BleuParams {
    pub fn uniform(max_order: usize) -> Self {
        BleuParams {
            max_order,
            weights: vec![1.0 / max_order as f64; max_order],
            smoothing: Smoothing::None,
        }
    }

    pub fn with_smoothing(mut self, smoothing: Smoothing) -> Self {
        self.smoothing = smoothing;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_order == 0 {
            return Err(Error::Config("bleu.max_order must be >= 1".into()));
        }
        if self.weights.len() != self.max_order {
            return Err(Error::Config(format!(
                "bleu.weights has {} entries, expected {}",
                self.weights.len(),
                self.max_order
            )));
        }
        if self.weights.iter().any(|w| !(*w >= 0.0)) {
            return Err(Error::Config("bleu.weights must be non-negative".into()));
        }
        let sum: f64 = self.weights.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::Config(format!("bleu.weights sum to {sum}, expected 1")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BleuScore {
    pub score: f64,
    pub precisions: Vec<f64>,
    pub brevity_penalty: f64,
    /// Set when the candidate had no tokens; the score is then 0.
    pub degenerate: bool,
}

/// Top-k most frequent n-grams of a counting corpus.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrivialNgramSet {
    pub k: usize,
    /// Members with their corpus frequency, most frequent first.
    pub ngrams: Vec<(Vec<String>, usize)>,
    members: HashSet<Vec<String>>,
}

impl TrivialNgramSet {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn contains(&self, ngram: &[String]) -> bool {
        self.members.contains(ngram)
    }

    pub fn len(&self) -> usize {
        self.ngrams.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ngrams.is_empty()
    }
}

pub(crate) fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut counts = HashMap::new();
    if n == 0 || tokens.len() < n {
        return counts;
    }
    for w in tokens.windows(n) {
        *counts.entry(w).or_insert(0) += 1;
    }
    counts
}

/// Clipped numerator and candidate-count denominator for one order.
/// `weight` returns `None` to drop an n-gram from both sides.
pub(crate) fn modified_precision_counts(
    cand: &[String],
    reference: &[String],
    n: usize,
    weight: impl Fn(&[String]) -> Option<f64>,
) -> (f64, f64) {
    let cand_counts = ngram_counts(cand, n);
    let ref_counts = ngram_counts(reference, n);
    let mut numerator = 0.0;
    let mut denominator = 0.0;
    // Sorted iteration keeps float sums independent of hash order.
    let mut grams: Vec<_> = cand_counts.into_iter().collect();
    grams.sort_unstable();
    for (gram, count) in grams {
        let Some(mu) = weight(gram) else { continue };
        let clipped = count.min(ref_counts.get(gram).copied().unwrap_or(0));
        numerator += mu * clipped as f64;
        denominator += mu * count as f64;
    }
    (numerator, denominator)
}

pub fn brevity_penalty(len_gen: usize, len_ref: usize) -> f64 {
    if len_gen > len_ref {
        1.0
    } else if len_gen == 0 {
        0.0
    } else {
        (1.0 - len_ref as f64 / len_gen as f64).exp()
    }
}

/// Shared BLEU pipeline. An order with an empty denominator contributes
/// precision 1.
pub(crate) fn bleu_with(
    cand: &TokenSequence,
    reference: &TokenSequence,
    params: &BleuParams,
    weight: impl Fn(&[String]) -> Option<f64>,
) -> Result<BleuScore> {
    params.validate()?;
    if cand.is_empty() {
        return Ok(BleuScore {
            score: 0.0,
            precisions: vec![0.0; params.max_order],
            brevity_penalty: 0.0,
            degenerate: true,
        });
    }
    let precisions: Vec<f64> = (1..=params.max_order)
        .map(|n| {
            let (num, den) = modified_precision_counts(&cand.tokens, &reference.tokens, n, &weight);
            if den == 0.0 {
                1.0
            } else {
                num / den
            }
        })
        .collect();
    let bp = brevity_penalty(cand.len(), reference.len());
    let mut log_sum = 0.0;
    for (&w, &p) in params.weights.iter().zip(&precisions) {
        if w == 0.0 {
            continue;
        }
        let p = match params.smoothing {
            Smoothing::None if p == 0.0 => {
                return Ok(BleuScore {
                    score: 0.0,
                    precisions,
                    brevity_penalty: bp,
                    degenerate: false,
                })
            }
            Smoothing::None => p,
            Smoothing::EpsilonFloor => p.max(EPSILON_FLOOR),
        };
        log_sum += w * p.ln();
    }
    let score = (bp * log_sum.exp()).clamp(0.0, 1.0);
    Ok(BleuScore {
        score,
        precisions,
        brevity_penalty: bp,
        degenerate: false,
    })
}

/// Sentence-level BLEU with clipped n-gram precision and brevity penalty.
pub fn bleu(cand: &TokenSequence, reference: &TokenSequence, params: &BleuParams) -> Result<BleuScore> {
    bleu_with(cand, reference, params, |_| Some(1.0))
}

/// The `k` most frequent n-grams (orders `1..=max_order`) across `refs`.
/// Ties are broken by ascending lexicographic order of the n-gram.
pub fn extract_trivial_ngrams(refs: &[TokenSequence], k: usize, max_order: usize) -> TrivialNgramSet {
    if k == 0 {
        return TrivialNgramSet {
            k,
            ..Default::default()
        };
    }
    let mut freq: HashMap<&[String], usize> = HashMap::new();
    for r in refs {
        for n in 1..=max_order {
            for (gram, c) in ngram_counts(&r.tokens, n) {
                *freq.entry(gram).or_insert(0) += c;
            }
        }
    }
    let mut ranked: Vec<(&[String], usize)> = freq.into_iter().collect();
    ranked.sort_unstable_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    ranked.truncate(k);
    let ngrams: Vec<(Vec<String>, usize)> = ranked.into_iter().map(|(g, c)| (g.to_vec(), c)).collect();
    let members = ngrams.iter().map(|(g, _)| g.clone()).collect();
    TrivialNgramSet { k, ngrams, members }
}

/// BLEU with every member of `trivial` removed from numerator and denominator counts.
pub fn crystal_bleu(
    cand: &TokenSequence,
    reference: &TokenSequence,
    params: &BleuParams,
    trivial: &TrivialNgramSet,
) -> Result<BleuScore> {
    bleu_with(cand, reference, params, |g| (!trivial.contains(g)).then_some(1.0))
}
