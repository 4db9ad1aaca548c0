//! Token- and character-level reference metrics.

mod bleu;
mod chrf;

pub use bleu::{
    bleu, brevity_penalty, crystal_bleu, extract_trivial_ngrams, BleuParams, BleuScore, Smoothing,
    TrivialNgramSet, EPSILON_FLOOR,
};
pub(crate) use bleu::bleu_with;
pub use chrf::{chrf, ChrfParams};

/// 1 when the strings are byte-identical after trimming trailing whitespace.
pub fn exact_match(cand: &str, reference: &str) -> f64 {
    if cand.trim_end() == reference.trim_end() {
        1.0
    } else {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_match_cases() {
        assert_eq!(exact_match("x=1", "x=1"), 1.0);
        assert_eq!(exact_match("x=1", "x = 1"), 0.0);
        assert_eq!(exact_match("x=1\n\n", "x=1"), 1.0);
        assert_eq!(exact_match(" x=1", "x=1"), 0.0);
    }
}
