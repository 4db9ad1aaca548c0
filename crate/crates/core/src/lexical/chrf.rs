use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ChrfParams {
    pub max_n: usize,
    pub beta: f64,
}

impl Default for ChrfParams {
    fn default() -> Self {
        ChrfParams { max_n: 6, beta: 2.0 }
    }
}

fn char_ngrams(chars: &[char], n: usize) -> HashMap<&[char], usize> {
    let mut m = HashMap::new();
    if chars.len() >= n {
        for w in chars.windows(n) {
            *m.entry(w).or_insert(0) += 1;
        }
    }
    m
}

/// Character n-gram F-score. Whitespace is removed before counting;
/// precision and recall are averaged over the orders where both sides have
/// n-grams, then combined with `beta` weighting recall.
pub fn chrf(cand: &str, reference: &str, params: ChrfParams) -> Result<f64> {
    if params.max_n == 0 || !(params.beta > 0.0) {
        return Err(Error::Config("chrf requires max_n >= 1 and beta > 0".into()));
    }
    let hyp: Vec<char> = cand.chars().filter(|c| !c.is_whitespace()).collect();
    let refc: Vec<char> = reference.chars().filter(|c| !c.is_whitespace()).collect();
    match (hyp.is_empty(), refc.is_empty()) {
        (true, true) => return Ok(1.0),
        (true, false) | (false, true) => return Ok(0.0),
        _ => {}
    }
    let mut prec_sum = 0.0;
    let mut rec_sum = 0.0;
    let mut effective = 0usize;
    for n in 1..=params.max_n {
        let h = char_ngrams(&hyp, n);
        let r = char_ngrams(&refc, n);
        let h_total: usize = h.values().sum();
        let r_total: usize = r.values().sum();
        if h_total == 0 || r_total == 0 {
            continue;
        }
        let matches: usize = h
            .iter()
            .map(|(g, &c)| c.min(r.get(g).copied().unwrap_or(0)))
            .sum();
        prec_sum += matches as f64 / h_total as f64;
        rec_sum += matches as f64 / r_total as f64;
        effective += 1;
    }
    let p = prec_sum / effective as f64;
    let r = rec_sum / effective as f64;
    let b2 = params.beta * params.beta;
    let denom = b2 * p + r;
    if denom == 0.0 {
        return Ok(0.0);
    }
    Ok(((1.0 + b2) * p * r / denom).clamp(0.0, 1.0))
}
