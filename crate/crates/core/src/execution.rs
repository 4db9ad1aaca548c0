//! Functional correctness from execution records: the unbiased pass@k
//! estimator and per-model pass rates.

use std::collections::BTreeMap;

use crate::corpus::{Corpus, ExecutionRecord};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PassAtKInput {
    /// Samples drawn.
    pub n: u64,
    /// Samples passing every test.
    pub c: u64,
    pub k: u64,
}

impl PassAtKInput {
    pub fn new(n: u64, c: u64, k: u64) -> Result<Self> {
        if n == 0 || k == 0 || k > n || c > n {
            return Err(Error::Domain(format!(
                "pass@k needs 1 <= k <= n and c <= n (n={n}, c={c}, k={k})"
            )));
        }
        Ok(PassAtKInput { n, c, k })
    }
}

/// `1 - C(n-c, k) / C(n, k)` via the product `prod_{i=n-c+1..=n} (1 - k/i)`.
pub fn pass_at_k(input: PassAtKInput) -> f64 {
    let PassAtKInput { n, c, k } = input;
    if n - c < k {
        return 1.0;
    }
    let miss: f64 = ((n - c + 1)..=n).map(|i| 1.0 - k as f64 / i as f64).product();
    1.0 - miss
}

pub fn estimate_pass_at_k(n: u64, c: u64, k: u64) -> Result<f64> {
    Ok(pass_at_k(PassAtKInput::new(n, c, k)?))
}

pub fn instance_pass(rec: &ExecutionRecord) -> bool {
    rec.passed_all()
}

/// `(n, c)` per task for one model, aggregated over sample indices.
pub fn task_counts<'a>(
    records: impl IntoIterator<Item = &'a ExecutionRecord>,
    model_id: &str,
) -> BTreeMap<String, (u64, u64)> {
    let mut counts: BTreeMap<String, (u64, u64)> = BTreeMap::new();
    for rec in records.into_iter().filter(|r| r.model_id == model_id) {
        let e = counts.entry(rec.task_id.clone()).or_default();
        e.0 += 1;
        e.1 += u64::from(rec.passed_all());
    }
    counts
}

/// Mean over tasks of pass@k.
pub fn pass_rate_from_counts(counts: &BTreeMap<String, (u64, u64)>, k: u64) -> Result<f64> {
    if counts.is_empty() {
        return Err(Error::Degenerate("no execution-labeled tasks".into()));
    }
    let mut total = 0.0;
    for (task, &(n, c)) in counts {
        let input = PassAtKInput::new(n, c, k)
            .map_err(|_| Error::Domain(format!("task {task} has {n} samples, fewer than k={k}")))?;
        total += pass_at_k(input);
    }
    Ok(total / counts.len() as f64)
}

pub fn corpus_pass_rate(corpus: &Corpus, model_id: &str, k: u64) -> Result<f64> {
    let counts = task_counts(corpus.executions.values(), model_id);
    if counts.is_empty() {
        return Err(Error::Degenerate(format!(
            "model {model_id} has no execution-labeled instances"
        )));
    }
    pass_rate_from_counts(&counts, k)
}
