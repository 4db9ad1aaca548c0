//! Character Levenshtein distance and normalized edit similarity.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EditResult {
    pub distance: usize,
    pub max_len: usize,
    pub similarity: f64,
}

/// Unit-cost edit distance over Unicode scalar values.
pub fn levenshtein(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    levenshtein_chars(&a, &b)
}

fn levenshtein_chars(a: &[char], b: &[char]) -> usize {
    // Common prefix and suffix never change the distance.
    let prefix = a.iter().zip(b).take_while(|(x, y)| x == y).count();
    let (a, b) = (&a[prefix..], &b[prefix..]);
    let suffix = a.iter().rev().zip(b.iter().rev()).take_while(|(x, y)| x == y).count();
    let (a, b) = (&a[..a.len() - suffix], &b[..b.len() - suffix]);
    let (long, short) = if a.len() >= b.len() { (a, b) } else { (b, a) };
    if short.is_empty() {
        return long.len();
    }
    let mut row: Vec<usize> = (0..=short.len()).collect();
    for (i, lc) in long.iter().enumerate() {
        let mut diag = row[0];
        row[0] = i + 1;
        for (j, sc) in short.iter().enumerate() {
            let up = row[j + 1];
            let cost = usize::from(lc != sc);
            row[j + 1] = (diag + cost).min(up + 1).min(row[j] + 1);
            diag = up;
        }
    }
    row[short.len()]
}

pub fn edit_result(generated: &str, reference: &str) -> EditResult {
    let g: Vec<char> = generated.chars().collect();
    let r: Vec<char> = reference.chars().collect();
    let distance = levenshtein_chars(&g, &r);
    let max_len = g.len().max(r.len());
    let similarity = if max_len == 0 {
        1.0
    } else {
        1.0 - distance as f64 / max_len as f64
    };
    EditResult {
        distance,
        max_len,
        similarity,
    }
}

/// `1 - lev / max(len)`; 1.0 when both strings are empty.
pub fn edit_sim(generated: &str, reference: &str) -> f64 {
    edit_result(generated, reference).similarity
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Full quadratic DP table, no shortcuts.
    fn dp_oracle(a: &str, b: &str) -> usize {
        let a: Vec<char> = a.chars().collect();
        let b: Vec<char> = b.chars().collect();
        let mut t = vec![vec![0usize; b.len() + 1]; a.len() + 1];
        for (i, row) in t.iter_mut().enumerate() {
            row[0] = i;
        }
        for (j, cell) in t[0].iter_mut().enumerate() {
            *cell = j;
        }
        for i in 1..=a.len() {
            for j in 1..=b.len() {
                let sub = t[i - 1][j - 1] + usize::from(a[i - 1] != b[j - 1]);
                t[i][j] = sub.min(t[i - 1][j] + 1).min(t[i][j - 1] + 1);
            }
        }
        t[a.len()][b.len()]
    }

    #[test]
    fn worked_examples() {
        assert_eq!(levenshtein("", "abc"), 3);
        assert_eq!(levenshtein("abc", "abc"), 0);
        assert_eq!(dp_oracle("kitten", "sitting"), 3);
        assert_eq!(levenshtein("kitten", "sitting"), 3);
        assert!((edit_sim("kitten", "sitting") - (1.0 - 3.0 / 7.0)).abs() < 1e-12);
        assert_eq!(edit_sim("same", "same"), 1.0);
        assert_eq!(edit_sim("", ""), 1.0);
        assert_eq!(edit_sim("", "abc"), 0.0);
    }

    #[test]
    fn counts_scalar_values_not_bytes() {
        assert_eq!(levenshtein("é", "e"), 1);
        assert_eq!(edit_result("héllo", "hello").max_len, 5);
    }

    proptest! {
        #[test]
        fn agrees_with_dp(a in "[abc]{0,10}", b in "[abc]{0,10}") {
            prop_assert_eq!(levenshtein(&a, &b), dp_oracle(&a, &b));
        }

        #[test]
        fn metric_axioms(a in "[a-d]{0,8}", b in "[a-d]{0,8}", c in "[a-d]{0,8}") {
            prop_assert_eq!(levenshtein(&a, &b), levenshtein(&b, &a));
            prop_assert!(levenshtein(&a, &c) <= levenshtein(&a, &b) + levenshtein(&b, &c));
            let s = edit_sim(&a, &b);
            prop_assert!((0.0..=1.0).contains(&s));
            prop_assert_eq!(s, edit_sim(&b, &a));
        }
    }
}
