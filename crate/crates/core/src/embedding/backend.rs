use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use sha2::{Digest, Sha256};

use super::{build_mask, Embedded, MaskPolicy, TokenEmbeddingMatrix, TokenMask};
use crate::error::Result;
use crate::tokenize::tokenize_code;

/// Source of per-token embeddings. Implementations must be deterministic.
pub trait EmbedderBackend: Send + Sync {
    fn identity(&self) -> String;

    fn embed(&self, code: &str, language: &str) -> Result<Embedded>;

    /// Embed `code` with `context` prepended, masking out the context tokens.
    fn embed_with_context(&self, context: &str, code: &str, language: &str) -> Result<Embedded> {
        let prefix = self.embed(context, language)?.matrix.len();
        let mut joined = self.embed(&format!("{context}\n{code}"), language)?;
        for keep in joined.mask.include.iter_mut().take(prefix) {
            *keep = false;
        }
        Ok(joined)
    }

    /// Fails when the backend cannot serve requests (e.g. unreachable service).
    fn check(&self) -> Result<()> {
        Ok(())
    }
}

/// Deterministic test backend: each token string is hashed to a fixed
/// pseudo-random vector, independent of its context.
///
/// With `signed = false` every component is in `[0, 1)`, so all cosine
/// similarities are non-negative.
#[derive(Debug, Clone)]
pub struct HashEmbedder {
    pub dim: usize,
    pub seed: u64,
    pub signed: bool,
    pub policy: MaskPolicy,
}

impl Default for HashEmbedder {
    fn default() -> Self {
        HashEmbedder {
            dim: 64,
            seed: 0,
            signed: false,
            policy: MaskPolicy::PunctuationOff,
        }
    }
}

impl HashEmbedder {
    pub fn token_vector(&self, token: &str) -> Vec<f32> {
        let mut hasher = Sha256::new();
        hasher.update(self.seed.to_le_bytes());
        hasher.update(token.as_bytes());
        let seed: [u8; 32] = hasher.finalize().into();
        let mut rng = ChaCha8Rng::from_seed(seed);
        let mut v: Vec<f32> = (0..self.dim)
            .map(|_| {
                // 24 random bits map exactly onto an f32 in [0, 1).
                let u = (rng.next_u32() >> 8) as f32 / (1u32 << 24) as f32;
                if self.signed {
                    2.0 * u - 1.0
                } else {
                    u
                }
            })
            .collect();
        if v.iter().all(|x| *x == 0.0) {
            v[0] = 1.0;
        }
        v
    }
}

impl EmbedderBackend for HashEmbedder {
    fn identity(&self) -> String {
        format!(
            "hash(dim={},seed={},{})",
            self.dim,
            self.seed,
            if self.signed { "signed" } else { "nonneg" }
        )
    }

    fn embed(&self, code: &str, language: &str) -> Result<Embedded> {
        let tokens = tokenize_code(code, language).tokens;
        let vectors = tokens.iter().flat_map(|t| self.token_vector(t)).collect();
        let mask = match self.policy {
            MaskPolicy::AllOn => TokenMask::all(tokens.len()),
            policy => build_mask(&tokens, policy),
        };
        let matrix = TokenEmbeddingMatrix::new(tokens, vectors, self.dim)?;
        Embedded::new(matrix, mask)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedding::{score_code_pair, similarity_matrix};

    #[test]
    fn deterministic_and_token_keyed() {
        let h = HashEmbedder::default();
        assert_eq!(h.token_vector("total"), h.token_vector("total"));
        assert_ne!(h.token_vector("total"), h.token_vector("sum"));
        let other_seed = HashEmbedder { seed: 7, ..HashEmbedder::default() };
        assert_ne!(h.token_vector("total"), other_seed.token_vector("total"));
        assert_eq!(h.embed("x = y", "python").unwrap(), h.embed("x = y", "python").unwrap());
    }

    #[test]
    fn nonnegative_backend_has_nonnegative_similarity() {
        let h = HashEmbedder::default();
        let a = h.embed("def f(a, b): return a * b", "python").unwrap();
        let b = h.embed("while True: pass", "python").unwrap();
        let s = similarity_matrix(&a.matrix, &b.matrix).unwrap();
        assert!(s.data.iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn signed_backend_can_go_negative() {
        let h = HashEmbedder { signed: true, ..HashEmbedder::default() };
        let a = h.embed("alpha beta gamma delta epsilon", "python").unwrap();
        let b = h.embed("one two three four five six seven", "python").unwrap();
        let s = similarity_matrix(&a.matrix, &b.matrix).unwrap();
        assert!(s.data.iter().any(|v| *v < 0.0));
    }

    #[test]
    fn identity_pair_is_exactly_one() {
        let h = HashEmbedder::default();
        let code = "def add(a, b):\n    return a + b\n";
        let s = score_code_pair(&h, code, code, "python", None).unwrap();
        assert_eq!((s.precision, s.recall, s.f1, s.f3), (1.0, 1.0, 1.0, 1.0));
    }

    #[test]
    fn context_tokens_are_masked() {
        let h = HashEmbedder::default();
        let e = h.embed_with_context("add numbers", "x + y", "python").unwrap();
        assert_eq!(e.matrix.tokens, ["add", "numbers", "x", "+", "y"]);
        assert_eq!(e.mask.include, [false, false, true, false, true]);
        let with = score_code_pair(&h, "x + y", "x + z", "python", Some("add numbers")).unwrap();
        let without = score_code_pair(&h, "x + y", "x + z", "python", None).unwrap();
        assert_eq!(with, without);
    }
}
