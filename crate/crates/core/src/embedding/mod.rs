//! Embedding-based precision, recall, F1 and F3 over token embeddings, with
//! token masking and pluggable embedding backends.
//!
//! Precision averages, over included candidate tokens, the best cosine
//! similarity to any included reference token. Recall is the mirror image.
//! F3 weights recall nine times as heavily as precision.

mod backend;
pub mod cemb;
mod file;
#[cfg(feature = "remote")]
mod remote;

pub use backend::{EmbedderBackend, HashEmbedder};
pub use file::FileEmbedder;
#[cfg(feature = "remote")]
pub use remote::RemoteEmbedder;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Row-major `n_tokens x dim` matrix of token vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenEmbeddingMatrix {
    pub tokens: Vec<String>,
    pub vectors: Vec<f32>,
    pub dim: usize,
}

impl TokenEmbeddingMatrix {
    pub fn new(tokens: Vec<String>, vectors: Vec<f32>, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Shape("embedding dim must be >= 1".into()));
        }
        if vectors.len() != tokens.len() * dim {
            return Err(Error::Shape(format!(
                "{} tokens x dim {dim} needs {} values, got {}",
                tokens.len(),
                tokens.len() * dim,
                vectors.len()
            )));
        }
        Ok(TokenEmbeddingMatrix { tokens, vectors, dim })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.vectors[i * self.dim..(i + 1) * self.dim]
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenMask {
    pub include: Vec<bool>,
}

impl TokenMask {
    pub fn all(n: usize) -> Self {
        TokenMask {
            include: vec![true; n],
        }
    }

    pub fn included(&self) -> usize {
        self.include.iter().filter(|b| **b).count()
    }

    /// No token is included, so the score is undefined.
    pub fn is_degenerate(&self) -> bool {
        self.included() == 0
    }
}

/// A snippet's embedding together with its scoring mask.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedded {
    pub matrix: TokenEmbeddingMatrix,
    pub mask: TokenMask,
}

impl Embedded {
    pub fn new(matrix: TokenEmbeddingMatrix, mask: TokenMask) -> Result<Self> {
        if mask.include.len() != matrix.len() {
            return Err(Error::Shape(format!(
                "mask has {} entries for {} tokens",
                mask.include.len(),
                matrix.len()
            )));
        }
        Ok(Embedded { matrix, mask })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaskPolicy {
    /// Drop punctuation-only tokens and special sentinel tokens.
    #[default]
    PunctuationOff,
    AllOn,
}

pub const SPECIAL_TOKENS: &[&str] = &[
    "<s>", "</s>", "<pad>", "<unk>", "<mask>", "[CLS]", "[SEP]", "[PAD]", "[UNK]", "[MASK]",
    "<|endoftext|>",
];

pub fn is_punctuation_token(token: &str) -> bool {
    !token.is_empty() && token.chars().all(|c| c.is_ascii_punctuation())
}

pub fn build_mask<S: AsRef<str>>(tokens: &[S], policy: MaskPolicy) -> TokenMask {
    let include = tokens
        .iter()
        .map(|t| match policy {
            MaskPolicy::AllOn => true,
            MaskPolicy::PunctuationOff => {
                let t = t.as_ref();
                !is_punctuation_token(t) && !SPECIAL_TOKENS.contains(&t)
            }
        })
        .collect();
    TokenMask { include }
}

/// Cosine similarities between reference rows (`i`) and candidate rows (`j`).
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl SimilarityMatrix {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }
}

fn normalized_rows(m: &TokenEmbeddingMatrix, which: &str) -> Result<Vec<Vec<f64>>> {
    (0..m.len())
        .map(|i| {
            let row = m.row(i);
            let norm = row.iter().map(|&v| f64::from(v) * f64::from(v)).sum::<f64>().sqrt();
            if !(norm > 0.0) || !norm.is_finite() {
                return Err(Error::Numeric(format!(
                    "{which} row {i} (token {:?}) has zero or non-finite norm",
                    m.tokens[i]
                )));
            }
            Ok(row.iter().map(|&v| f64::from(v) / norm).collect())
        })
        .collect()
}

/// Entry `(i, j)` is the cosine of reference row `i` and candidate row `j`.
/// Bit-identical rows score exactly 1.
pub fn similarity_matrix(cand: &TokenEmbeddingMatrix, reference: &TokenEmbeddingMatrix) -> Result<SimilarityMatrix> {
    if cand.dim != reference.dim {
        return Err(Error::Shape(format!(
            "embedding dim mismatch: candidate {} vs reference {}",
            cand.dim, reference.dim
        )));
    }
    let c = normalized_rows(cand, "candidate")?;
    let r = normalized_rows(reference, "reference")?;
    let mut data = Vec::with_capacity(r.len() * c.len());
    for (i, rrow) in r.iter().enumerate() {
        for (j, crow) in c.iter().enumerate() {
            let v = if reference.row(i) == cand.row(j) {
                1.0
            } else {
                rrow.iter().zip(crow).map(|(a, b)| a * b).sum::<f64>().clamp(-1.0, 1.0)
            };
            data.push(v);
        }
    }
    Ok(SimilarityMatrix {
        rows: r.len(),
        cols: c.len(),
        data,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairScore {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub f3: f64,
}

impl PairScore {
    pub fn from_precision_recall(precision: f64, recall: f64) -> Self {
        PairScore {
            precision,
            recall,
            f1: f_beta(precision, recall, 1.0),
            f3: f_beta(precision, recall, 3.0),
        }
    }
}

/// `(1 + b^2) P R / (b^2 P + R)`; for b = 3 this is `10 P R / (9 P + R)`.
pub fn f_beta(precision: f64, recall: f64, beta: f64) -> f64 {
    if precision == recall {
        return precision;
    }
    let b2 = beta * beta;
    let denom = b2 * precision + recall;
    if denom == 0.0 {
        0.0
    } else {
        (1.0 + b2) * precision * recall / denom
    }
}

fn subset(e: &Embedded) -> TokenEmbeddingMatrix {
    let mut tokens = Vec::new();
    let mut vectors = Vec::new();
    for (i, keep) in e.mask.include.iter().enumerate() {
        if *keep {
            tokens.push(e.matrix.tokens[i].clone());
            vectors.extend_from_slice(e.matrix.row(i));
        }
    }
    TokenEmbeddingMatrix {
        tokens,
        vectors,
        dim: e.matrix.dim,
    }
}

pub fn score_pair(cand: &Embedded, reference: &Embedded) -> Result<PairScore> {
    if cand.mask.is_degenerate() {
        return Err(Error::Degenerate("candidate has no scorable tokens".into()));
    }
    if reference.mask.is_degenerate() {
        return Err(Error::Degenerate("reference has no scorable tokens".into()));
    }
    let c = subset(cand);
    let r = subset(reference);
    let sim = similarity_matrix(&c, &r)?;
    let precision = (0..sim.cols)
        .map(|j| (0..sim.rows).map(|i| sim.get(i, j)).fold(f64::NEG_INFINITY, f64::max))
        .sum::<f64>()
        / sim.cols as f64;
    let recall = (0..sim.rows)
        .map(|i| (0..sim.cols).map(|j| sim.get(i, j)).fold(f64::NEG_INFINITY, f64::max))
        .sum::<f64>()
        / sim.rows as f64;
    Ok(PairScore::from_precision_recall(precision, recall))
}

/// Embed both snippets with `backend` and score them. With `context`, the NL
/// intent is embedded as a prefix of each snippet and then masked out.
pub fn score_code_pair(
    backend: &dyn EmbedderBackend,
    cand: &str,
    reference: &str,
    language: &str,
    context: Option<&str>,
) -> Result<PairScore> {
    let (c, r) = match context {
        Some(ctx) => (
            backend.embed_with_context(ctx, cand, language)?,
            backend.embed_with_context(ctx, reference, language)?,
        ),
        None => (backend.embed(cand, language)?, backend.embed(reference, language)?),
    };
    score_pair(&c, &r)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_hot(tokens: &[&str], vocab: &[&str]) -> Embedded {
        let dim = vocab.len();
        let mut vectors = vec![0.0f32; tokens.len() * dim];
        for (i, t) in tokens.iter().enumerate() {
            let k = vocab.iter().position(|v| v == t).unwrap();
            vectors[i * dim + k] = 1.0;
        }
        let m = TokenEmbeddingMatrix::new(tokens.iter().map(|s| s.to_string()).collect(), vectors, dim).unwrap();
        Embedded::new(m, TokenMask::all(tokens.len())).unwrap()
    }

    #[test]
    fn mask_policies() {
        assert_eq!(build_mask(&["a", "+", "b"], MaskPolicy::PunctuationOff).include, [true, false, true]);
        assert_eq!(build_mask(&["a", "+", "b"], MaskPolicy::AllOn).include, [true, true, true]);
        let all_punct = build_mask(&["(", ")", ":", "[CLS]"], MaskPolicy::PunctuationOff);
        assert!(all_punct.is_degenerate());
    }

    #[test]
    fn identical_single_token() {
        let a = one_hot(&["a"], &["a"]);
        let s = similarity_matrix(&a.matrix, &a.matrix).unwrap();
        assert_eq!(s.data, [1.0]);
    }

    #[test]
    fn orthogonal_rows() {
        let a = one_hot(&["a", "b"], &["a", "b"]);
        let s = similarity_matrix(&a.matrix, &a.matrix).unwrap();
        assert_eq!(s.data, [1.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn matches_naive_cosine_oracle() {
        let c = TokenEmbeddingMatrix::new(vec!["x".into(), "y".into()], vec![0.3, -1.2, 2.5, 0.7], 2).unwrap();
        let r = TokenEmbeddingMatrix::new(vec!["u".into(), "v".into()], vec![-0.4, 0.9, 1.1, 1.3], 2).unwrap();
        let s = similarity_matrix(&c, &r).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                let (a, b) = (r.row(i), c.row(j));
                let dot: f64 = a.iter().zip(b).map(|(x, y)| f64::from(*x) * f64::from(*y)).sum();
                let na: f64 = a.iter().map(|x| f64::from(*x).powi(2)).sum::<f64>().sqrt();
                let nb: f64 = b.iter().map(|x| f64::from(*x).powi(2)).sum::<f64>().sqrt();
                assert!((s.get(i, j) - dot / (na * nb)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn shape_and_numeric_errors() {
        let a = one_hot(&["a"], &["a"]);
        let b = one_hot(&["a"], &["a", "b"]);
        assert!(matches!(similarity_matrix(&a.matrix, &b.matrix), Err(Error::Shape(_))));
        let zero = TokenEmbeddingMatrix::new(vec!["z".into()], vec![0.0], 1).unwrap();
        match similarity_matrix(&a.matrix, &zero) {
            Err(Error::Numeric(msg)) => assert!(msg.contains("row 0")),
            other => panic!("{other:?}"),
        }
        assert!(TokenEmbeddingMatrix::new(vec!["a".into()], vec![1.0, 2.0], 1).is_err());
    }

    #[test]
    fn one_hot_hand_evaluation() {
        let vocab = ["a", "b", "c"];
        let s = score_pair(&one_hot(&["a", "b"], &vocab), &one_hot(&["a", "c"], &vocab)).unwrap();
        assert_eq!((s.precision, s.recall, s.f1), (0.5, 0.5, 0.5));
    }

    #[test]
    fn f3_hand_value() {
        let s = PairScore::from_precision_recall(0.5, 1.0);
        assert!((s.f3 - 10.0 * 0.5 / 5.5).abs() < 1e-12);
        assert!((s.f3 - 0.9091).abs() < 1e-4);
        assert!((s.f1 - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn identity_scores_one() {
        let vocab = ["a", "b", "c"];
        let e = one_hot(&["a", "b", "c", "a"], &vocab);
        let s = score_pair(&e, &e).unwrap();
        assert_eq!((s.precision, s.recall, s.f1, s.f3), (1.0, 1.0, 1.0, 1.0));
    }

    #[test]
    fn degenerate_mask_errors() {
        let mut e = one_hot(&["a"], &["a"]);
        e.mask.include[0] = false;
        let ok = one_hot(&["a"], &["a"]);
        assert!(matches!(score_pair(&e, &ok), Err(Error::Degenerate(_))));
        assert!(matches!(score_pair(&ok, &e), Err(Error::Degenerate(_))));
    }

    #[test]
    fn masked_tokens_do_not_count() {
        let vocab = ["a", "b", "("];
        let mut cand = one_hot(&["a", "("], &vocab);
        cand.mask = build_mask(&cand.matrix.tokens, MaskPolicy::PunctuationOff);
        let reference = one_hot(&["a"], &vocab);
        let s = score_pair(&cand, &reference).unwrap();
        assert_eq!(s.precision, 1.0);
    }
}
