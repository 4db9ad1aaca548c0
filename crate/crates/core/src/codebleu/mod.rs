//! CodeBLEU: a convex combination of BLEU, keyword-weighted BLEU, syntax
//! subtree match and dataflow match.

mod dataflow;
mod subtree;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

pub use dataflow::{dataflow_graph, dataflow_match, DataflowEdge, DataflowGraph, DataflowMatch, Relation};
pub use subtree::{subtree_fingerprints, syntax_match};

use crate::error::{Error, Result};
use crate::lexical::{bleu, bleu_with, BleuParams, BleuScore};
use crate::syntax::parse_syntax;
use crate::tokenize::{is_python, tokenize_code, TokenSequence};

const PYTHON_KEYWORDS: &str = include_str!("../../resources/keywords/python.txt");

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KeywordTable {
    pub language: String,
    pub keywords: BTreeSet<String>,
}

impl KeywordTable {
    /// Parse a resource file: one keyword per line, blank lines ignored.
    pub fn from_text(language: &str, text: &str) -> Self {
        KeywordTable {
            language: language.to_string(),
            keywords: text
                .lines()
                .map(str::trim)
                .filter(|l| !l.is_empty())
                .map(str::to_string)
                .collect(),
        }
    }

    pub fn for_language(language: &str) -> Result<Self> {
        if is_python(language) {
            Ok(Self::from_text("python", PYTHON_KEYWORDS))
        } else {
            Err(Error::UnsupportedLanguage(language.to_string()))
        }
    }

    pub fn contains(&self, token: &str) -> bool {
        self.keywords.contains(token)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CodeBleuParams {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub delta: f64,
    pub keyword_weight_ratio: f64,
}

impl Default for CodeBleuParams {
    fn default() -> Self {
        CodeBleuParams {
            alpha: 0.25,
            beta: 0.25,
            gamma: 0.25,
            delta: 0.25,
            keyword_weight_ratio: 5.0,
        }
    }
}

impl CodeBleuParams {
    pub fn validate(&self) -> Result<()> {
        let w = [self.alpha, self.beta, self.gamma, self.delta];
        if w.iter().any(|x| !(*x >= 0.0)) {
            return Err(Error::Config("codebleu weights must be non-negative".into()));
        }
        let sum: f64 = w.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::Config(format!("codebleu weights sum to {sum}, expected 1")));
        }
        if !(self.keyword_weight_ratio > 0.0) || !self.keyword_weight_ratio.is_finite() {
            return Err(Error::Config("codebleu.keyword_weight_ratio must be positive".into()));
        }
        Ok(())
    }
}

/// BLEU where every n-gram containing a keyword counts `ratio` times.
pub fn weighted_ngram_bleu(
    cand: &TokenSequence,
    reference: &TokenSequence,
    table: &KeywordTable,
    params: &BleuParams,
    ratio: f64,
) -> Result<BleuScore> {
    bleu_with(cand, reference, params, |gram| {
        Some(if gram.iter().any(|t| table.contains(t)) { ratio } else { 1.0 })
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CodeBleuScore {
    pub score: f64,
    pub bleu: f64,
    pub weighted_bleu: f64,
    pub syntax_match: f64,
    pub dataflow_match: f64,
    /// The reference had no dataflow edges, so the dataflow component is 1 by convention.
    pub dataflow_undefined: bool,
    /// The candidate had no tokens.
    pub degenerate: bool,
    /// The candidate did not parse cleanly; syntax and dataflow used the recovered tree.
    pub candidate_parse_error: bool,
}

pub fn codebleu(
    cand: &str,
    reference: &str,
    language: &str,
    params: &CodeBleuParams,
    bleu_params: &BleuParams,
    table: &KeywordTable,
) -> Result<CodeBleuScore> {
    params.validate()?;
    let ct = tokenize_code(cand, language);
    let rt = tokenize_code(reference, language);
    let plain = bleu(&ct, &rt, bleu_params).map_err(|e| e.within("bleu"))?;
    let weighted = weighted_ngram_bleu(&ct, &rt, table, bleu_params, params.keyword_weight_ratio)
        .map_err(|e| e.within("weighted_bleu"))?;
    let cand_tree = parse_syntax(cand, language).map_err(|e| e.within("syntax_match"))?;
    let ref_tree = parse_syntax(reference, language).map_err(|e| e.within("syntax_match"))?;
    let syntax = syntax_match(&cand_tree, &ref_tree).map_err(|e| e.within("syntax_match"))?;
    let df = dataflow_match(&dataflow_graph(&cand_tree), &dataflow_graph(&ref_tree));
    let score = params.alpha * plain.score
        + params.beta * weighted.score
        + params.gamma * syntax
        + params.delta * df.score;
    Ok(CodeBleuScore {
        score: score.clamp(0.0, 1.0),
        bleu: plain.score,
        weighted_bleu: weighted.score,
        syntax_match: syntax,
        dataflow_match: df.score,
        dataflow_undefined: df.undefined,
        degenerate: plain.degenerate,
        candidate_parse_error: cand_tree.has_error,
    })
}
