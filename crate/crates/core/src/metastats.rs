//! Statistics for judging metrics: correlations with constructs, score
//! distribution shape, tie rates, discriminative power, distinguishability
//! and robustness to perturbations.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal, StudentsT};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreVector {
    pub metric_id: String,
    pub model_id: String,
    /// Aligned by sorted task id.
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TTest {
    /// Pooled-variance Student test on independent samples.
    #[default]
    TwoSample,
    /// Test on per-task differences.
    Paired,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MetaParams {
    pub tie_epsilon: f64,
    pub base_alpha: f64,
    pub t_test: TTest,
}

impl Default for MetaParams {
    fn default() -> Self {
        MetaParams {
            tie_epsilon: 1e-6,
            base_alpha: 0.05,
            t_test: TTest::TwoSample,
        }
    }
}

impl MetaParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.tie_epsilon > 0.0) {
            return Err(Error::Config("meta.tie_epsilon must be positive".into()));
        }
        if !(self.base_alpha > 0.0 && self.base_alpha < 1.0) {
            return Err(Error::Config("meta.base_alpha must lie in (0, 1)".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Correlation {
    pub coefficient: f64,
    /// Two-sided.
    pub p_value: f64,
}

fn check_finite(xs: &[f64], what: &str) -> Result<()> {
    match xs.iter().position(|v| !v.is_finite()) {
        Some(i) => Err(Error::Numeric(format!("{what}[{i}] is not finite"))),
        None => Ok(()),
    }
}

fn check_pair(x: &[f64], y: &[f64], min: usize) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::Shape(format!("lengths differ: {} vs {}", x.len(), y.len())));
    }
    if x.len() < min {
        return Err(Error::Domain(format!("need at least {min} observations, got {}", x.len())));
    }
    check_finite(x, "x")?;
    check_finite(y, "y")
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn t_two_sided(r: f64, n: usize) -> f64 {
    if r.abs() >= 1.0 {
        return 0.0;
    }
    let df = (n - 2) as f64;
    let t = r * (df / (1.0 - r * r)).sqrt();
    let dist = StudentsT::new(0.0, 1.0, df).expect("df >= 1");
    (2.0 * dist.sf(t.abs())).min(1.0)
}

fn pearson_r(x: &[f64], y: &[f64]) -> Result<f64> {
    let (mx, my) = (mean(x), mean(y));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::Degenerate("zero variance".into()));
    }
    // sqrt(s * s) == s for correctly rounded sqrt, so identical inputs give exactly 1.
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Pearson correlation with a t-test p-value on n − 2 degrees of freedom.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<Correlation> {
    check_pair(x, y, 3)?;
    let r = pearson_r(x, y)?;
    Ok(Correlation {
        coefficient: r,
        p_value: t_two_sided(r, x.len()),
    })
}

/// Correlation between a dichotomous and a continuous variable.
pub fn point_biserial(binary: &[bool], continuous: &[f64]) -> Result<Correlation> {
    let coded: Vec<f64> = binary.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
    check_pair(&coded, continuous, 3)?;
    if binary.iter().all(|&b| b) || binary.iter().all(|&b| !b) {
        return Err(Error::Degenerate("binary variable has a single class".into()));
    }
    pearson(&coded, continuous)
}

fn tie_groups(xs: &[f64]) -> Vec<usize> {
    let mut sorted = xs.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut groups = Vec::new();
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i + 1;
        while j < sorted.len() && sorted[j] == sorted[i] {
            j += 1;
        }
        groups.push(j - i);
        i = j;
    }
    groups
}

/// Concordant-minus-discordant count and the tau-b denominator.
fn kendall_parts(x: &[f64], y: &[f64]) -> (i64, f64) {
    let n = x.len();
    let mut s = 0i64;
    let (mut tied_x, mut tied_y) = (0i64, 0i64);
    for i in 0..n {
        for j in i + 1..n {
            let dx = x[i].partial_cmp(&x[j]).unwrap_or(Ordering::Equal);
            let dy = y[i].partial_cmp(&y[j]).unwrap_or(Ordering::Equal);
            if dx == Ordering::Equal {
                tied_x += 1;
            }
            if dy == Ordering::Equal {
                tied_y += 1;
            }
            if dx != Ordering::Equal && dy != Ordering::Equal {
                s += if dx == dy { 1 } else { -1 };
            }
        }
    }
    let n0 = (n * (n - 1) / 2) as i64;
    let denom = (((n0 - tied_x) * (n0 - tied_y)) as f64).sqrt();
    (s, denom)
}

/// Tie-corrected Kendall tau-b coefficient only.
pub fn kendall_tau_b(x: &[f64], y: &[f64]) -> Result<f64> {
    check_pair(x, y, 2)?;
    let (s, denom) = kendall_parts(x, y);
    if denom == 0.0 {
        return Err(Error::Degenerate("all values tied".into()));
    }
    Ok((s as f64 / denom).clamp(-1.0, 1.0))
}

/// Largest n for which the p-value is computed by enumerating permutations.
pub const KENDALL_EXACT_MAX_N: usize = 10;

/// Kendall tau-b with a two-sided p-value: exact permutation distribution
/// for n ≤ 10, tie-corrected normal approximation above.
pub fn kendall_tau(x: &[f64], y: &[f64]) -> Result<Correlation> {
    let tau = kendall_tau_b(x, y)?;
    let n = x.len();
    let p_value = if n <= KENDALL_EXACT_MAX_N {
        kendall_exact_p(x, y)
    } else {
        kendall_normal_p(x, y)
    };
    Ok(Correlation {
        coefficient: tau,
        p_value,
    })
}

fn kendall_exact_p(x: &[f64], y: &[f64]) -> f64 {
    // Every permutation of y keeps both tie structures, so the tau-b
    // denominator is fixed and |S| can be compared directly.
    let n = y.len();
    let sign = |a: f64, b: f64| match a.partial_cmp(&b) {
        Some(Ordering::Less) => -1i32,
        Some(Ordering::Greater) => 1,
        _ => 0,
    };
    let mut x_sign = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            x_sign.push(sign(x[i], x[j]));
        }
    }
    let s_of = |ys: &[f64]| -> i32 {
        let mut s = 0;
        let mut k = 0;
        for i in 0..n {
            for j in i + 1..n {
                s += x_sign[k] * sign(ys[i], ys[j]);
                k += 1;
            }
        }
        s
    };
    let mut perm = y.to_vec();
    let target = s_of(&perm).abs();
    let mut c = vec![0usize; n];
    let mut total = 1u64;
    // The identity permutation is always at least as extreme as itself.
    let mut extreme = 1u64;
    // Heap's algorithm.
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(c[i], i);
            }
            total += 1;
            if s_of(&perm).abs() >= target {
                extreme += 1;
            }
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    extreme as f64 / total as f64
}

fn kendall_normal_p(x: &[f64], y: &[f64]) -> f64 {
    let (s, _) = kendall_parts(x, y);
    let n = x.len() as f64;
    let tx = tie_groups(x);
    let ty = tie_groups(y);
    let sum = |g: &[usize], f: &dyn Fn(f64) -> f64| g.iter().map(|&t| f(t as f64)).sum::<f64>();
    let v0 = n * (n - 1.0) * (2.0 * n + 5.0);
    let vt = sum(&tx, &|t| t * (t - 1.0) * (2.0 * t + 5.0));
    let vu = sum(&ty, &|t| t * (t - 1.0) * (2.0 * t + 5.0));
    let v1 = sum(&tx, &|t| t * (t - 1.0)) * sum(&ty, &|t| t * (t - 1.0));
    let v2 = sum(&tx, &|t| t * (t - 1.0) * (t - 2.0)) * sum(&ty, &|t| t * (t - 1.0) * (t - 2.0));
    let var = (v0 - vt - vu) / 18.0 + v1 / (2.0 * n * (n - 1.0)) + v2 / (9.0 * n * (n - 1.0) * (n - 2.0));
    if var <= 0.0 {
        return 1.0;
    }
    let z = s as f64 / var.sqrt();
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    (2.0 * normal.sf(z.abs())).min(1.0)
}

/// Average ranks (1-based), ties sharing the mean of their positions.
pub fn midranks(xs: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut ranks = vec![0.0; xs.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i + 1;
        while j < idx.len() && xs[idx[j]] == xs[idx[i]] {
            j += 1;
        }
        let r = (i + j + 1) as f64 / 2.0;
        for &k in &idx[i..j] {
            ranks[k] = r;
        }
        i = j;
    }
    ranks
}

/// Pearson correlation of midranks.
pub fn spearman_rho(x: &[f64], y: &[f64]) -> Result<Correlation> {
    check_pair(x, y, 3)?;
    pearson(&midranks(x), &midranks(y))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DistributionSummary {
    pub n: usize,
    pub mean: f64,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
    pub midhinge: f64,
    /// Population standard deviation.
    pub std_dev: f64,
    /// Population skewness g1; `None` when the variance is zero.
    pub skewness: Option<f64>,
    /// Population excess kurtosis g2; `None` when the variance is zero.
    pub excess_kurtosis: Option<f64>,
}

/// Quantile by linear interpolation between order statistics at p·(n − 1).
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    let pos = p * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

pub fn distribution_summary(values: &[f64]) -> Result<DistributionSummary> {
    if values.is_empty() {
        return Err(Error::Degenerate("no values".into()));
    }
    check_finite(values, "values")?;
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = values.len() as f64;
    let m = mean(values);
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for v in values {
        let d = v - m;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    m2 /= n;
    m3 /= n;
    m4 /= n;
    let (q1, q3) = (quantile(&sorted, 0.25), quantile(&sorted, 0.75));
    let shape = m2 > 0.0;
    Ok(DistributionSummary {
        n: values.len(),
        mean: m,
        median: quantile(&sorted, 0.5),
        q1,
        q3,
        midhinge: (q1 + q3) / 2.0,
        std_dev: m2.sqrt(),
        skewness: shape.then(|| m3 / m2.powf(1.5)),
        excess_kurtosis: shape.then(|| m4 / (m2 * m2) - 3.0),
    })
}

/// Fraction of aligned positions where the two vectors differ by less than ε.
pub fn tie_rate(a: &[f64], b: &[f64], epsilon: f64) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Shape(format!("lengths differ: {} vs {}", a.len(), b.len())));
    }
    if a.is_empty() {
        return Err(Error::Degenerate("empty score vectors".into()));
    }
    let ties = a.iter().zip(b).filter(|(x, y)| (*x - *y).abs() < epsilon).count();
    Ok(ties as f64 / a.len() as f64)
}

/// Mean tie rate over all unordered pairs of model vectors.
pub fn corpus_tie_rate(vectors: &[ScoreVector], params: &MetaParams) -> Result<f64> {
    params.validate()?;
    if vectors.len() < 2 {
        return Err(Error::Domain("tie rate needs at least two models".into()));
    }
    let mut rates = Vec::new();
    for i in 0..vectors.len() {
        for j in i + 1..vectors.len() {
            rates.push(tie_rate(&vectors[i].values, &vectors[j].values, params.tie_epsilon)?);
        }
    }
    Ok(mean(&rates))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairTest {
    pub model_a: String,
    pub model_b: String,
    pub t_statistic: f64,
    /// One-sided p-value for mean(a) < mean(b).
    pub p_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SignificanceReport {
    pub metric_id: String,
    pub tests: Vec<PairTest>,
    pub n_hypotheses: usize,
    pub alpha: f64,
    pub significant_count: usize,
}

impl SignificanceReport {
    /// p-values in ascending order: the achieved-significance-level curve.
    pub fn asl_curve(&self) -> Vec<f64> {
        let mut ps: Vec<f64> = self.tests.iter().map(|t| t.p_value).collect();
        ps.sort_by(f64::total_cmp);
        ps
    }
}

fn variance(xs: &[f64], m: f64) -> f64 {
    xs.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (xs.len() - 1) as f64
}

fn one_sided_less(diff: f64, se: f64, df: f64) -> (f64, f64) {
    if se == 0.0 {
        let p = match diff.partial_cmp(&0.0) {
            Some(Ordering::Less) => 0.0,
            Some(Ordering::Greater) => 1.0,
            _ => 0.5,
        };
        let t = if diff == 0.0 { 0.0 } else { diff.signum() * f64::INFINITY };
        return (t, p);
    }
    let t = diff / se;
    let dist = StudentsT::new(0.0, 1.0, df).expect("df >= 1");
    (t, dist.cdf(t))
}

/// One-sided test of H1: mean(a) < mean(b).
pub fn t_test_less(a: &[f64], b: &[f64], kind: TTest) -> Result<(f64, f64)> {
    check_finite(a, "a")?;
    check_finite(b, "b")?;
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::Domain("t-test needs at least two values per group".into()));
    }
    match kind {
        TTest::TwoSample => {
            let (ma, mb) = (mean(a), mean(b));
            let (na, nb) = (a.len() as f64, b.len() as f64);
            let pooled = ((na - 1.0) * variance(a, ma) + (nb - 1.0) * variance(b, mb)) / (na + nb - 2.0);
            let se = (pooled * (1.0 / na + 1.0 / nb)).sqrt();
            Ok(one_sided_less(ma - mb, se, na + nb - 2.0))
        }
        TTest::Paired => {
            if a.len() != b.len() {
                return Err(Error::Shape("paired test needs aligned vectors".into()));
            }
            let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
            let md = mean(&d);
            let n = d.len() as f64;
            let se = (variance(&d, md) / n).sqrt();
            Ok(one_sided_less(md, se, n - 1.0))
        }
    }
}

/// Bonferroni-corrected one-sided t-tests over every ordered pair of models.
pub fn discriminative_power(vectors: &[ScoreVector], params: &MetaParams) -> Result<SignificanceReport> {
    params.validate()?;
    let m = vectors.len();
    if m < 2 {
        return Err(Error::Domain("discriminative power needs at least two models".into()));
    }
    let len = vectors[0].values.len();
    if let Some(v) = vectors.iter().find(|v| v.values.len() != len) {
        return Err(Error::Shape(format!(
            "model {} has {} values, expected {len}",
            v.model_id,
            v.values.len()
        )));
    }
    if len < 2 {
        return Err(Error::Domain("score vectors need at least two values".into()));
    }
    let mut order: Vec<&ScoreVector> = vectors.iter().collect();
    order.sort_by(|a, b| a.model_id.cmp(&b.model_id));
    let n_hypotheses = m * (m - 1);
    let alpha = params.base_alpha / n_hypotheses as f64;
    let mut tests = Vec::with_capacity(n_hypotheses);
    for a in &order {
        for b in &order {
            if std::ptr::eq(*a, *b) {
                continue;
            }
            let (t, p) = t_test_less(&a.values, &b.values, params.t_test)?;
            tests.push(PairTest {
                model_a: a.model_id.clone(),
                model_b: b.model_id.clone(),
                t_statistic: t,
                p_value: p,
            });
        }
    }
    let significant_count = tests.iter().filter(|t| t.p_value < alpha).count();
    Ok(SignificanceReport {
        metric_id: vectors[0].metric_id.clone(),
        tests,
        n_hypotheses,
        alpha,
        significant_count,
    })
}

/// Ratio of mean intra-class to mean inter-class metric values.
pub fn distinguishability(intra: &[f64], inter: &[f64]) -> Result<f64> {
    if intra.is_empty() || inter.is_empty() {
        return Err(Error::Degenerate("distinguishability needs both groups".into()));
    }
    check_finite(intra, "intra")?;
    check_finite(inter, "inter")?;
    let d = mean(inter);
    if d == 0.0 {
        return Err(Error::Domain("inter-class mean is zero".into()));
    }
    Ok(mean(intra) / d)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RobustnessReport {
    pub n: usize,
    pub mean_before: f64,
    pub mean_after: f64,
    pub delta_mean: f64,
    pub tau: f64,
    pub tau_p: f64,
    pub rho: f64,
    pub rho_p: f64,
}

/// Mean shift and rank autocorrelation of a metric before and after a transform.
pub fn robustness_autocorrelation(before: &[f64], after: &[f64]) -> Result<RobustnessReport> {
    check_pair(before, after, 3)?;
    let tau = kendall_tau(before, after)?;
    let rho = spearman_rho(before, after)?;
    let (mb, ma) = (mean(before), mean(after));
    Ok(RobustnessReport {
        n: before.len(),
        mean_before: mb,
        mean_after: ma,
        delta_mean: ma - mb,
        tau: tau.coefficient,
        tau_p: tau.p_value,
        rho: rho.coefficient,
        rho_p: rho.p_value,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn point_biserial_hand_case() {
        let r = point_biserial(&[false, false, true, true], &[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert!(close(r.coefficient, 0.894_427_190_999_915_9, 1e-12));
        // (M1 − M0)/s · sqrt(pq) with population s.
        let s = (1.25f64).sqrt();
        assert!(close(r.coefficient, (3.5 - 1.5) / s * 0.5, 1e-12));
        // t = r·sqrt(2/(1−r²)) = 2.828..., two-sided df=2.
        assert!(close(r.p_value, 0.105_572_809_000_084, 1e-9));
        assert!(matches!(
            point_biserial(&[true, true, true], &[1.0, 2.0, 3.0]),
            Err(Error::Degenerate(_))
        ));
        assert!(matches!(
            point_biserial(&[true, false, true], &[2.0, 2.0, 2.0]),
            Err(Error::Degenerate(_))
        ));
    }

    /// All pairs, counted directly.
    fn tau_oracle(x: &[f64], y: &[f64]) -> f64 {
        let n = x.len();
        let (mut c, mut d, mut tx, mut ty) = (0.0, 0.0, 0.0, 0.0);
        for i in 0..n {
            for j in 0..n {
                if i >= j {
                    continue;
                }
                let sx = (x[i] - x[j]).signum() * f64::from(x[i] != x[j]);
                let sy = (y[i] - y[j]).signum() * f64::from(y[i] != y[j]);
                if sx == 0.0 {
                    tx += 1.0;
                }
                if sy == 0.0 {
                    ty += 1.0;
                }
                if sx * sy > 0.0 {
                    c += 1.0;
                } else if sx * sy < 0.0 {
                    d += 1.0;
                }
            }
        }
        let n0 = (n * (n - 1) / 2) as f64;
        (c - d) / ((n0 - tx) * (n0 - ty)).sqrt()
    }

    #[test]
    fn kendall_cases() {
        let x = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(kendall_tau(&x, &x).unwrap().coefficient, 1.0);
        assert_eq!(kendall_tau(&x, &[4.0, 3.0, 2.0, 1.0]).unwrap().coefficient, -1.0);
        let t = kendall_tau(&x, &[1.0, 3.0, 2.0, 4.0]).unwrap();
        assert!(close(t.coefficient, 4.0 / 6.0, 1e-15));
        // Exact: of 24 permutations, those with |S| >= 4 are S ∈ {±4, ±6}: 3+1+3+1 = 8.
        assert!(close(t.p_value, 8.0 / 24.0, 1e-15));
        assert!(matches!(kendall_tau(&x, &[2.0; 4]), Err(Error::Degenerate(_))));
    }

    #[test]
    fn kendall_normal_branch_matches_reference_value() {
        // n = 12, no ties: var(S) = n(n−1)(2n+5)/18.
        let x: Vec<f64> = (0..12).map(f64::from).collect();
        let y = [0.0, 2.0, 1.0, 3.0, 5.0, 4.0, 6.0, 8.0, 7.0, 9.0, 11.0, 10.0];
        let t = kendall_tau(&x, &y).unwrap();
        let s = 66.0 - 2.0 * 4.0;
        let z = s / (12.0f64 * 11.0 * 29.0 / 18.0).sqrt();
        let p = 2.0 * Normal::new(0.0, 1.0).unwrap().sf(z);
        assert!(close(t.coefficient, s / 66.0, 1e-15));
        assert!(close(t.p_value, p, 1e-15));
    }

    #[test]
    fn kendall_matches_oracle_on_small_alphabets() {
        // Every pair of length-5 sequences over {0,1,2}.
        let seqs: Vec<Vec<f64>> = (0..3usize.pow(5))
            .map(|mut c| {
                (0..5)
                    .map(|_| {
                        let d = c % 3;
                        c /= 3;
                        d as f64
                    })
                    .collect()
            })
            .collect();
        for x in &seqs {
            for y in &seqs {
                match kendall_tau_b(x, y) {
                    Ok(t) => assert!(close(t, tau_oracle(x, y), 1e-12)),
                    Err(_) => assert!(tau_oracle(x, y).is_nan()),
                }
            }
        }
    }

    #[test]
    fn spearman_cases() {
        assert_eq!(spearman_rho(&[1.0, 2.0, 3.0], &[10.0, 20.0, 30.0]).unwrap().coefficient, 1.0);
        assert_eq!(spearman_rho(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap().coefficient, -1.0);
        assert!(close(spearman_rho(&[1.0, 2.0, 3.0], &[1.0, 3.0, 2.0]).unwrap().coefficient, 0.5, 1e-15));
        assert_eq!(midranks(&[3.0, 1.0, 3.0, 2.0]), [3.5, 1.0, 3.5, 2.0]);
        assert!(matches!(spearman_rho(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]), Err(Error::Degenerate(_))));
    }

    #[test]
    fn distribution_cases() {
        let d = distribution_summary(&[0.0, 1.0]).unwrap();
        assert_eq!((d.mean, d.median, d.midhinge, d.skewness), (0.5, 0.5, 0.5, Some(0.0)));
        let d = distribution_summary(&[0.0, 0.0, 1.0]).unwrap();
        assert!(close(d.mean, 1.0 / 3.0, 1e-15));
        assert!(close(d.skewness.unwrap(), std::f64::consts::FRAC_1_SQRT_2, 1e-12));
        let d = distribution_summary(&[0.4; 5]).unwrap();
        assert_eq!(d.std_dev, 0.0);
        assert!(d.skewness.is_none() && d.excess_kurtosis.is_none());
        let d = distribution_summary(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!((d.q1, d.median, d.q3, d.midhinge), (1.75, 2.5, 3.25, 2.5));
    }

    #[test]
    fn tie_cases() {
        assert_eq!(tie_rate(&[0.1, 0.2], &[0.1, 0.2], 1e-6).unwrap(), 1.0);
        assert_eq!(tie_rate(&[0.5, 0.7], &[0.5 + 1e-9, 0.2], 1e-6).unwrap(), 0.5);
        assert!(matches!(tie_rate(&[0.5], &[0.5, 0.1], 1e-6), Err(Error::Shape(_))));
    }

    fn sv(model: &str, values: Vec<f64>) -> ScoreVector {
        ScoreVector {
            metric_id: "m".into(),
            model_id: model.into(),
            values,
        }
    }

    #[test]
    fn power_alpha_and_direction() {
        let vs: Vec<ScoreVector> = (0..10)
            .map(|i| sv(&format!("model{i}"), (0..20).map(|t| f64::from(t % 7) * 0.1 + f64::from(i) * 0.01).collect()))
            .collect();
        let r = discriminative_power(&vs, &MetaParams::default()).unwrap();
        assert_eq!(r.n_hypotheses, 90);
        assert_eq!(r.tests.len(), 90);
        assert!(close(r.alpha, 0.05 / 90.0, 1e-18));
        assert!(close(r.alpha, 0.000556, 5e-7));

        let same = discriminative_power(&[sv("a", vec![0.1, 0.5, 0.9]), sv("b", vec![0.1, 0.5, 0.9])], &MetaParams::default()).unwrap();
        assert!(same.tests.iter().all(|t| close(t.p_value, 0.5, 1e-12)));
        assert_eq!(same.significant_count, 0);

        let jitter = |base: f64| (0..50).map(|i| base + f64::from(i % 5) * 1e-4).collect::<Vec<_>>();
        let r = discriminative_power(&[sv("a", jitter(0.0)), sv("b", jitter(1.0))], &MetaParams::default()).unwrap();
        let ab = r.tests.iter().find(|t| t.model_a == "a").unwrap();
        let ba = r.tests.iter().find(|t| t.model_a == "b").unwrap();
        assert!(ab.p_value < r.alpha && ba.p_value > r.alpha);
        assert_eq!(r.significant_count, 1);

        let paired = MetaParams { t_test: TTest::Paired, ..MetaParams::default() };
        let r = discriminative_power(&[sv("a", jitter(0.0)), sv("b", jitter(1.0))], &paired).unwrap();
        // Constant differences: zero standard error, decided by sign.
        assert_eq!(r.tests[0].p_value, 0.0);
        assert_eq!(r.tests[1].p_value, 1.0);
    }

    #[test]
    fn distinguishability_cases() {
        assert!(close(distinguishability(&[0.7, 0.9], &[0.3, 0.5]).unwrap(), 2.0, 1e-15));
        assert_eq!(distinguishability(&[0.4, 0.6], &[0.6, 0.4]).unwrap(), 1.0);
        assert!(matches!(distinguishability(&[1.0], &[0.0]), Err(Error::Domain(_))));
        // A monotone rescaling changes d, so d can be gamed.
        let (intra, inter) = ([0.8, 0.9], [0.3, 0.5]);
        let d = distinguishability(&intra, &inter).unwrap();
        let e = |v: &[f64]| v.iter().map(|x| x.exp()).collect::<Vec<_>>();
        assert!(distinguishability(&e(&intra), &e(&inter)).unwrap() < d);
    }

    #[test]
    fn robustness_identity_and_shift() {
        let before = [0.2, 0.5, 0.3, 0.9, 0.7];
        let r = robustness_autocorrelation(&before, &before).unwrap();
        assert_eq!((r.delta_mean, r.tau, r.rho), (0.0, 1.0, 1.0));
        let after: Vec<f64> = before.iter().map(|v| v + 0.01).collect();
        let r = robustness_autocorrelation(&before, &after).unwrap();
        assert_eq!((r.tau, r.rho), (1.0, 1.0));
        assert!(close(r.delta_mean, 0.01, 1e-12));
    }

    fn naive_moments(v: &[f64]) -> (f64, f64, f64, f64) {
        let n = v.len() as f64;
        let m = v.iter().sum::<f64>() / n;
        let c = |k: i32| v.iter().map(|x| (x - m).powi(k)).sum::<f64>() / n;
        (m, c(2).sqrt(), c(3) / c(2).powf(1.5), c(4) / c(2).powi(2) - 3.0)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn rank_correlations_invariant_under_monotone_maps(
            pairs in prop::collection::vec((0u8..6, 0u8..6), 3..16)
        ) {
            let x: Vec<f64> = pairs.iter().map(|p| f64::from(p.0)).collect();
            let y: Vec<f64> = pairs.iter().map(|p| f64::from(p.1)).collect();
            let fx: Vec<f64> = x.iter().map(|v| v.exp()).collect();
            let fy: Vec<f64> = y.iter().map(|v| 3.0 * v - 7.0).collect();
            match (kendall_tau(&x, &y), kendall_tau(&fx, &fy)) {
                (Ok(a), Ok(b)) => {
                    prop_assert_eq!(a.coefficient, b.coefficient);
                    prop_assert!(close(a.p_value, b.p_value, 1e-12));
                }
                (Err(_), Err(_)) => {}
                _ => prop_assert!(false),
            }
            match (spearman_rho(&x, &y), spearman_rho(&fx, &fy)) {
                (Ok(a), Ok(b)) => prop_assert_eq!(a.coefficient, b.coefficient),
                (Err(_), Err(_)) => {}
                _ => prop_assert!(false),
            }
        }

    }

    proptest! {
        #[test]
        fn point_biserial_is_pearson_on_coding(
            rows in prop::collection::vec((any::<bool>(), -100.0f64..100.0), 3..40)
        ) {
            let b: Vec<bool> = rows.iter().map(|r| r.0).collect();
            let c: Vec<f64> = rows.iter().map(|r| r.1).collect();
            if let Ok(r) = point_biserial(&b, &c) {
                let coded: Vec<f64> = b.iter().map(|&v| f64::from(u8::from(v))).collect();
                let p = pearson(&coded, &c).unwrap();
                prop_assert!(close(r.coefficient, p.coefficient, 1e-12));
            }
        }

        #[test]
        fn moments_match_naive(v in prop::collection::vec(-10.0f64..10.0, 2..60)) {
            let d = distribution_summary(&v).unwrap();
            let (m, s, g1, g2) = naive_moments(&v);
            prop_assert!(close(d.mean, m, 1e-12));
            prop_assert!(close(d.std_dev, s, 1e-12));
            if let (Some(a), Some(b)) = (d.skewness, d.excess_kurtosis) {
                prop_assert!(close(a, g1, 1e-9 * g1.abs().max(1.0)));
                prop_assert!(close(b, g2, 1e-9 * g2.abs().max(1.0)));
            }
        }

        #[test]
        fn tie_rate_symmetric(v in prop::collection::vec((0.0f64..1.0, 0.0f64..1.0), 1..30)) {
            let a: Vec<f64> = v.iter().map(|p| p.0).collect();
            let b: Vec<f64> = v.iter().map(|p| (p.1 * 4.0).round() / 4.0).collect();
            prop_assert_eq!(tie_rate(&a, &b, 1e-6).unwrap(), tie_rate(&b, &a, 1e-6).unwrap());
        }

        #[test]
        fn alpha_scales_with_model_count(m in 2usize..12) {
            let vs: Vec<ScoreVector> = (0..m).map(|i| sv(&format!("m{i:02}"), vec![0.1 * i as f64, 0.2, 0.3])).collect();
            let r = discriminative_power(&vs, &MetaParams::default()).unwrap();
            prop_assert_eq!(r.n_hypotheses, 2 * (m * (m - 1) / 2));
            prop_assert_eq!(r.alpha, 0.05 / r.n_hypotheses as f64);
        }
    }
}
