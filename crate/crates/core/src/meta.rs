//! Meta-evaluation verbs over score tables. Each verb returns named tables
//! ("artifacts") that callers write as CSV/TSV and Markdown.

use std::collections::{BTreeMap, BTreeSet};

use crate::corpus::{ExecutionRecord, InstanceKey};
use crate::error::{Error, Result};
use crate::metastats::{
    corpus_tie_rate, discriminative_power, distinguishability, distribution_summary, kendall_tau,
    point_biserial, robustness_autocorrelation, spearman_rho, MetaParams,
};
use crate::pipeline::vectors_by_model;
use crate::report::{Cell, ReportFormat, ScoreTable, Table};

#[derive(Debug, Clone, PartialEq)]
pub struct Artifact {
    /// File stem, e.g. `distribution` or `asl_cbs_f1`.
    pub name: String,
    pub table: Table,
}

impl Artifact {
    fn new(name: impl Into<String>, table: Table) -> Self {
        Artifact {
            name: name.into(),
            table,
        }
    }
}

/// All artifacts as one Markdown document, in the given order.
pub fn render_document(heading: &str, artifacts: &[Artifact]) -> String {
    let mut out = format!("# {heading}\n\n");
    for (i, a) in artifacts.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        out.push_str(&a.table.render(ReportFormat::Md));
    }
    out
}

/// How instances are grouped for construct correlations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Grouping {
    #[default]
    Pooled,
    /// One group per dataset, taken from the task id prefix before `/`.
    PerDataset,
}

pub const POOLED: &str = "pooled";
pub const NO_DATASET: &str = "default";

pub fn dataset_of(task_id: &str) -> &str {
    task_id.split_once('/').map_or(NO_DATASET, |(d, _)| d)
}

fn selected(table: &ScoreTable, metrics: &[String]) -> Result<Vec<(String, usize)>> {
    let names: Vec<String> = if metrics.is_empty() {
        table.metrics.clone()
    } else {
        metrics.to_vec()
    };
    names
        .into_iter()
        .map(|m| {
            let col = table
                .column(&m)
                .ok_or_else(|| Error::Config(format!("score table has no `{m}` column")))?;
            Ok((m, col))
        })
        .collect()
}

fn cell_or_note(r: Result<f64>, note: &mut Vec<String>, what: &str) -> Cell {
    match r {
        Ok(v) => Cell::Num(v),
        Err(e) => {
            note.push(format!("{what}: {e}"));
            Cell::Null
        }
    }
}

fn groups_of(keys: impl Iterator<Item = String>, grouping: Grouping) -> Vec<String> {
    match grouping {
        Grouping::Pooled => vec![POOLED.to_string()],
        Grouping::PerDataset => keys
            .map(|t| dataset_of(&t).to_string())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect(),
    }
}

fn in_group(task_id: &str, group: &str, grouping: Grouping) -> bool {
    grouping == Grouping::Pooled || dataset_of(task_id) == group
}

/// Construct validity: point-biserial correlation with passing all tests,
/// rank correlation with edit similarity, and a metric-by-metric Kendall tau
/// matrix (pooled).
pub fn correlate(
    table: &ScoreTable,
    executions: &[ExecutionRecord],
    metrics: &[String],
    grouping: Grouping,
) -> Result<Vec<Artifact>> {
    let cols = selected(table, metrics)?;
    let passed: BTreeMap<InstanceKey, bool> = executions.iter().map(|r| (r.key(), r.passed_all())).collect();
    let groups = groups_of(table.rows.iter().map(|r| r.key.task_id.clone()), grouping);

    let mut h1 = Table::new(
        "Correlation with functional correctness (point-biserial)",
        &["metric", "group", "n", "r_bp", "p_value", "note"],
    );
    for (m, c) in &cols {
        for g in &groups {
            let (mut bin, mut cont) = (Vec::new(), Vec::new());
            for r in table.rows.iter().filter(|r| in_group(&r.key.task_id, g, grouping)) {
                if let (Some(v), Some(p)) = (r.values[*c], passed.get(&r.key)) {
                    bin.push(*p);
                    cont.push(v);
                }
            }
            let mut note = Vec::new();
            let (r, p) = match point_biserial(&bin, &cont) {
                Ok(c) => (Cell::Num(c.coefficient), Cell::Num(c.p_value)),
                Err(e) => {
                    note.push(e.to_string());
                    (Cell::Null, Cell::Null)
                }
            };
            h1.push(vec![m.as_str().into(), g.as_str().into(), Cell::from(bin.len()), r, p, note.join("; ").into()]);
        }
    }

    let mut h3 = Table::new(
        "Correlation with editing effort (edit similarity)",
        &["metric", "group", "n", "tau", "tau_p", "rho", "rho_p", "note"],
    );
    if let Some(e) = table.column("editsim") {
        for (m, c) in cols.iter().filter(|(m, _)| m != "editsim") {
            for g in &groups {
                let (mut x, mut y) = (Vec::new(), Vec::new());
                for r in table.rows.iter().filter(|r| in_group(&r.key.task_id, g, grouping)) {
                    if let (Some(a), Some(b)) = (r.values[*c], r.values[e]) {
                        x.push(a);
                        y.push(b);
                    }
                }
                let mut note = Vec::new();
                let mut row = vec![m.as_str().into(), g.as_str().into(), Cell::from(x.len())];
                match kendall_tau(&x, &y) {
                    Ok(k) => row.extend([Cell::Num(k.coefficient), Cell::Num(k.p_value)]),
                    Err(err) => {
                        note.push(format!("tau: {err}"));
                        row.extend([Cell::Null, Cell::Null]);
                    }
                }
                match spearman_rho(&x, &y) {
                    Ok(k) => row.extend([Cell::Num(k.coefficient), Cell::Num(k.p_value)]),
                    Err(err) => {
                        note.push(format!("rho: {err}"));
                        row.extend([Cell::Null, Cell::Null]);
                    }
                }
                row.push(note.join("; ").into());
                h3.push(row);
            }
        }
    }

    let mut headers = vec!["metric"];
    headers.extend(cols.iter().map(|(m, _)| m.as_str()));
    let mut heat = Table::new("Convergent validity (Kendall tau between metrics)", &headers);
    for (ma, ca) in &cols {
        let mut row = vec![Cell::from(ma.as_str())];
        for (_, cb) in &cols {
            let (x, y): (Vec<f64>, Vec<f64>) = table
                .rows
                .iter()
                .filter_map(|r| Some((r.values[*ca]?, r.values[*cb]?)))
                .unzip();
            row.push(kendall_tau(&x, &y).map_or(Cell::Null, |k| Cell::Num(k.coefficient)));
        }
        heat.push(row);
    }

    Ok(vec![
        Artifact::new("correlate_correctness", h1),
        Artifact::new("correlate_editsim", h3),
        Artifact::new("correlate_heatmap", heat),
    ])
}

pub const HISTOGRAM_BINS: usize = 10;

/// Centrality and shape per metric over all instances, plus histogram data.
pub fn distribution(table: &ScoreTable, metrics: &[String]) -> Result<Vec<Artifact>> {
    let cols = selected(table, metrics)?;
    let mut summary = Table::new(
        "Score distributions (population moments, excess kurtosis, linear-interpolated quartiles)",
        &["metric", "n", "median", "midhinge", "mean", "std_dev", "skewness", "excess_kurtosis", "note"],
    );
    let mut hist = Table::new(
        "Histogram (10 bins over [0, 1]; out-of-range values fall in the end bins)",
        &["metric", "bin_lower", "bin_upper", "count"],
    );
    for (m, c) in &cols {
        let values: Vec<f64> = table.rows.iter().filter_map(|r| r.values[*c]).collect();
        match distribution_summary(&values) {
            Ok(d) => {
                let note = if d.skewness.is_none() { "zero variance: shape undefined" } else { "" };
                summary.push(vec![
                    m.as_str().into(),
                    Cell::from(d.n),
                    Cell::Num(d.median),
                    Cell::Num(d.midhinge),
                    Cell::Num(d.mean),
                    Cell::Num(d.std_dev),
                    Cell::from(d.skewness),
                    Cell::from(d.excess_kurtosis),
                    note.into(),
                ]);
            }
            Err(e) => {
                let mut row = vec![m.as_str().into(), Cell::from(values.len())];
                row.extend(std::iter::repeat_n(Cell::Null, 6));
                row.push(e.to_string().into());
                summary.push(row);
            }
        }
        let mut counts = [0usize; HISTOGRAM_BINS];
        for v in &values {
            let b = (v * HISTOGRAM_BINS as f64).floor();
            counts[(b.max(0.0) as usize).min(HISTOGRAM_BINS - 1)] += 1;
        }
        for (i, n) in counts.iter().enumerate() {
            hist.push(vec![
                m.as_str().into(),
                Cell::Num(i as f64 / HISTOGRAM_BINS as f64),
                Cell::Num((i + 1) as f64 / HISTOGRAM_BINS as f64),
                Cell::from(*n),
            ]);
        }
    }
    Ok(vec![Artifact::new("distribution", summary), Artifact::new("histogram", hist)])
}

/// Percentage of task positions where two models' scores tie, averaged over model pairs.
pub fn ties(table: &ScoreTable, metrics: &[String], params: &MetaParams) -> Result<Vec<Artifact>> {
    params.validate()?;
    let cols = selected(table, metrics)?;
    let mut t = Table::new(
        format!("Percentage of ties (|a - b| < {})", params.tie_epsilon),
        &["metric", "n_models", "n_tasks", "tie_percent", "note"],
    );
    for (m, _) in &cols {
        let aligned = vectors_by_model(table, m)?;
        let mut note = Vec::new();
        if !aligned.dropped.is_empty() {
            note.push(format!("{} tasks dropped for null scores", aligned.dropped.len()));
        }
        let pct = cell_or_note(
            corpus_tie_rate(&aligned.vectors, params).map(|r| 100.0 * r),
            &mut note,
            "ties",
        );
        t.push(vec![
            m.as_str().into(),
            Cell::from(aligned.vectors.len()),
            Cell::from(aligned.task_ids.len()),
            pct,
            note.join("; ").into(),
        ]);
    }
    Ok(vec![Artifact::new("ties", t)])
}

/// Bonferroni-corrected one-sided t-tests over every ordered model pair.
/// Emits a summary, the per-pair tests and the ASL curve for each metric.
pub fn power(table: &ScoreTable, metrics: &[String], params: &MetaParams) -> Result<Vec<Artifact>> {
    params.validate()?;
    let cols = selected(table, metrics)?;
    let mut summary = Table::new(
        "Discriminative power",
        &["metric", "n_models", "n_hypotheses", "alpha", "significant_count", "note"],
    );
    let mut extra = Vec::new();
    for (m, _) in &cols {
        let aligned = vectors_by_model(table, m)?;
        match discriminative_power(&aligned.vectors, params) {
            Ok(rep) => {
                summary.push(vec![
                    m.as_str().into(),
                    Cell::from(aligned.vectors.len()),
                    Cell::from(rep.n_hypotheses),
                    Cell::Num(rep.alpha),
                    Cell::from(rep.significant_count),
                    "".into(),
                ]);
                let mut pairs = Table::new(
                    format!("Pairwise tests for {m} (H1: mean(a) < mean(b))"),
                    &["model_a", "model_b", "t_statistic", "p_value", "significant"],
                );
                for p in &rep.tests {
                    pairs.push(vec![
                        p.model_a.as_str().into(),
                        p.model_b.as_str().into(),
                        Cell::Num(p.t_statistic),
                        Cell::Num(p.p_value),
                        Cell::from(if p.p_value < rep.alpha { "yes" } else { "no" }),
                    ]);
                }
                let mut asl = Table::new(format!("Achieved significance levels for {m}"), &["rank", "p_value"]);
                for (i, p) in rep.asl_curve().into_iter().enumerate() {
                    asl.push(vec![Cell::from(i + 1), Cell::Num(p)]);
                }
                asl.push(vec!["alpha".into(), Cell::Num(rep.alpha)]);
                extra.push(Artifact::new(format!("power_pairs_{m}"), pairs));
                extra.push(Artifact::new(format!("asl_{m}"), asl));
            }
            Err(e) => {
                summary.push(vec![
                    m.as_str().into(),
                    Cell::from(aligned.vectors.len()),
                    Cell::Null,
                    Cell::Null,
                    Cell::Null,
                    e.to_string().into(),
                ]);
            }
        }
    }
    let mut out = vec![Artifact::new("power", summary)];
    out.extend(extra);
    Ok(out)
}

/// Distinguishability: mean score of instances that pass all tests over
/// mean score of instances that do not.
pub fn distinguish(table: &ScoreTable, executions: &[ExecutionRecord], metrics: &[String]) -> Result<Vec<Artifact>> {
    let cols = selected(table, metrics)?;
    let passed: BTreeMap<InstanceKey, bool> = executions.iter().map(|r| (r.key(), r.passed_all())).collect();
    let mut t = Table::new(
        "Distinguishability (passing over failing instances)",
        &["metric", "n_intra", "n_inter", "mean_intra", "mean_inter", "d", "note"],
    );
    let mean = |xs: &[f64]| (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64);
    for (m, c) in &cols {
        let (mut intra, mut inter) = (Vec::new(), Vec::new());
        for r in &table.rows {
            match (r.values[*c], passed.get(&r.key)) {
                (Some(v), Some(true)) => intra.push(v),
                (Some(v), Some(false)) => inter.push(v),
                _ => {}
            }
        }
        let mut note = Vec::new();
        let d = cell_or_note(distinguishability(&intra, &inter), &mut note, "d");
        t.push(vec![
            m.as_str().into(),
            Cell::from(intra.len()),
            Cell::from(inter.len()),
            Cell::from(mean(&intra)),
            Cell::from(mean(&inter)),
            d,
            note.join("; ").into(),
        ]);
    }
    Ok(vec![Artifact::new("distinguish", t)])
}

/// True when the row's instance could not be perturbed.
fn transform_failed(flags: &[String]) -> bool {
    flags.iter().any(|f| f.starts_with("transform:"))
}

/// Mean shift and rank autocorrelation per transform and metric. Rows whose
/// transform failed, or with a null on either side, are excluded and counted.
pub fn robustness(
    before: &ScoreTable,
    after: &[(String, ScoreTable)],
    metrics: &[String],
) -> Result<Vec<Artifact>> {
    let cols = selected(before, metrics)?;
    let base: BTreeMap<&InstanceKey, usize> = before.rows.iter().enumerate().map(|(i, r)| (&r.key, i)).collect();
    let mut t = Table::new(
        "Robustness to semantics-preserving perturbations",
        &[
            "transform",
            "metric",
            "n",
            "excluded",
            "mean_before",
            "mean_after",
            "delta_mean",
            "tau",
            "tau_p",
            "rho",
            "rho_p",
            "note",
        ],
    );
    for (label, table) in after {
        let keys: BTreeSet<&InstanceKey> = table.rows.iter().map(|r| &r.key).collect();
        let mut missing: Vec<String> = base
            .keys()
            .filter(|k| !keys.contains(*k))
            .map(|k| format!("{k} missing after {label}"))
            .collect();
        missing.extend(
            keys.iter()
                .filter(|k| !base.contains_key(*k))
                .map(|k| format!("{k} missing before {label}")),
        );
        if !missing.is_empty() {
            return Err(Error::Alignment(missing.join(", ")));
        }
        for (m, cb) in &cols {
            let ca = table
                .column(m)
                .ok_or_else(|| Error::Config(format!("{label}: score table has no `{m}` column")))?;
            let (mut xs, mut ys, mut excluded) = (Vec::new(), Vec::new(), 0usize);
            let mut rows: Vec<_> = table.rows.iter().collect();
            rows.sort_by(|a, b| a.key.cmp(&b.key));
            for r in rows {
                let b = &before.rows[base[&r.key]];
                match (b.values[*cb], r.values[ca]) {
                    (Some(x), Some(y)) if !transform_failed(&r.flags) => {
                        xs.push(x);
                        ys.push(y);
                    }
                    _ => excluded += 1,
                }
            }
            let mut row = vec![label.as_str().into(), m.as_str().into(), Cell::from(xs.len()), Cell::from(excluded)];
            match robustness_autocorrelation(&xs, &ys) {
                Ok(rep) => {
                    row.extend(
                        [rep.mean_before, rep.mean_after, rep.delta_mean, rep.tau, rep.tau_p, rep.rho, rep.rho_p]
                            .map(Cell::Num),
                    );
                    row.push("".into());
                }
                Err(e) => {
                    let mean = |v: &[f64]| (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64);
                    let (mb, ma) = (mean(&xs), mean(&ys));
                    row.extend([Cell::from(mb), Cell::from(ma), Cell::from(mb.zip(ma).map(|(b, a)| a - b))]);
                    row.extend(std::iter::repeat_n(Cell::Null, 4));
                    row.push(e.to_string().into());
                }
            }
            t.push(row);
        }
    }
    Ok(vec![Artifact::new("robustness", t)])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::report::ScoreRow;

    fn key(t: &str, m: &str) -> InstanceKey {
        InstanceKey {
            task_id: t.into(),
            model_id: m.into(),
            sample_index: 0,
        }
    }

    /// `n_models` models over `n_tasks` tasks, metric `s` = model_index/10 + task jitter.
    fn synthetic(n_models: usize, n_tasks: usize) -> ScoreTable {
        let mut rows = Vec::new();
        for m in 0..n_models {
            for t in 0..n_tasks {
                let v = m as f64 / 10.0 + (t % 5) as f64 / 100.0;
                rows.push(ScoreRow {
                    key: key(&format!("ds/t{t:02}"), &format!("m{m}")),
                    values: vec![Some(v), Some(1.0 - v)],
                    flags: vec![],
                });
            }
        }
        ScoreTable {
            metrics: vec!["s".into(), "editsim".into()],
            rows,
        }
    }

    #[test]
    fn power_over_ten_models_has_ninety_rows_and_alpha_line() {
        let out = power(&synthetic(10, 20), &["s".into()], &MetaParams::default()).unwrap();
        let summary = &out[0].table;
        assert_eq!(summary.rows[0][2], Cell::Int(90));
        assert_eq!(summary.rows[0][3], Cell::Num(0.05 / 90.0));
        let asl = out.iter().find(|a| a.name == "asl_s").unwrap();
        assert_eq!(asl.table.rows.len(), 91);
        let csv = asl.table.render(ReportFormat::Csv);
        assert!(csv.starts_with("rank,p_value\n1,"));
        assert!(csv.trim_end().ends_with(&format!("alpha,{}", 0.05 / 90.0)));
        assert!(format!("{:.6}", 0.05 / 90.0) == "0.000556");
    }

    #[test]
    fn distribution_row_has_table_four_shape() {
        let mut t = synthetic(1, 2);
        t.rows[0].values[0] = Some(0.0);
        t.rows[1].values[0] = Some(1.0);
        let out = distribution(&t, &["s".into()]).unwrap();
        let row = &out[0].table.rows[0];
        assert_eq!(out[0].table.headers[2..8], ["median", "midhinge", "mean", "std_dev", "skewness", "excess_kurtosis"]);
        assert_eq!(row[2..6], [Cell::Num(0.5), Cell::Num(0.5), Cell::Num(0.5), Cell::Num(0.5)]);
        assert_eq!(row[6], Cell::Num(0.0));
        let hist = &out[1].table;
        assert_eq!(hist.rows.len(), HISTOGRAM_BINS);
        assert_eq!((hist.rows[0][3].clone(), hist.rows[9][3].clone()), (Cell::Int(1), Cell::Int(1)));
    }

    #[test]
    fn ties_over_two_models_is_one_percentage() {
        let mut t = synthetic(2, 4);
        for r in t.rows.iter_mut() {
            r.values[0] = Some(if r.key.task_id.ends_with('0') { 0.3 } else { r.values[0].unwrap() });
        }
        let out = ties(&t, &["s".into()], &MetaParams::default()).unwrap();
        assert_eq!(out[0].table.rows.len(), 1);
        assert_eq!(out[0].table.rows[0][3], Cell::Num(25.0));
    }

    #[test]
    fn robustness_identity_and_shift() {
        let before = synthetic(2, 12);
        let mut shifted = before.clone();
        for r in shifted.rows.iter_mut() {
            r.values[0] = r.values[0].map(|v| v + 0.01);
        }
        let out = robustness(&before, &[("id".into(), before.clone()), ("shift".into(), shifted)], &["s".into()]).unwrap();
        let rows = &out[0].table.rows;
        assert_eq!(rows[0][6], Cell::Num(0.0));
        assert_eq!((rows[0][7].clone(), rows[0][9].clone()), (Cell::Num(1.0), Cell::Num(1.0)));
        match rows[1][6] {
            Cell::Num(d) => assert!((d - 0.01).abs() < 1e-12),
            ref c => panic!("{c:?}"),
        }
        assert_eq!((rows[1][7].clone(), rows[1][9].clone()), (Cell::Num(1.0), Cell::Num(1.0)));
    }

    #[test]
    fn robustness_excludes_failed_transforms_and_checks_keys() {
        let before = synthetic(1, 6);
        let mut after = before.clone();
        after.rows[0].flags.push("transform: transform error: x".into());
        after.rows[0].values[0] = Some(0.0);
        let out = robustness(&before, &[("t".into(), after.clone())], &["s".into()]).unwrap();
        assert_eq!((out[0].table.rows[0][2].clone(), out[0].table.rows[0][3].clone()), (Cell::Int(5), Cell::Int(1)));
        after.rows.pop();
        assert!(matches!(robustness(&before, &[("t".into(), after)], &["s".into()]), Err(Error::Alignment(_))));
    }

    #[test]
    fn correlate_groups_and_heatmap() {
        let t = synthetic(2, 10);
        let recs: Vec<ExecutionRecord> = t
            .rows
            .iter()
            .map(|r| ExecutionRecord {
                task_id: r.key.task_id.clone(),
                model_id: r.key.model_id.clone(),
                sample_index: 0,
                tests_passed: u32::from(r.values[0].unwrap() >= 0.1),
                tests_total: 1,
            })
            .collect();
        let out = correlate(&t, &recs, &[], Grouping::PerDataset).unwrap();
        assert_eq!(out[0].table.rows[0][1], Cell::from("ds"));
        match out[0].table.rows[0][3] {
            Cell::Num(r) => assert!(r > 0.8),
            ref c => panic!("{c:?}"),
        }
        // s and editsim are exactly anti-monotone.
        assert_eq!(out[1].table.rows[0][3], Cell::Num(-1.0));
        assert_eq!(out[2].table.rows[0][1], Cell::Num(1.0));
        assert_eq!(dataset_of("HumanEval/12"), "HumanEval");
        assert_eq!(dataset_of("t1"), NO_DATASET);
    }

    #[test]
    fn distinguish_ratio() {
        let mut t = synthetic(1, 4);
        let vals = [0.8, 0.8, 0.4, 0.4];
        for (r, v) in t.rows.iter_mut().zip(vals) {
            r.values[0] = Some(v);
        }
        let recs: Vec<ExecutionRecord> = t
            .rows
            .iter()
            .zip(vals)
            .map(|(r, v)| ExecutionRecord {
                task_id: r.key.task_id.clone(),
                model_id: r.key.model_id.clone(),
                sample_index: 0,
                tests_passed: u32::from(v > 0.5),
                tests_total: 1,
            })
            .collect();
        let out = distinguish(&t, &recs, &["s".into()]).unwrap();
        assert_eq!(out[0].table.rows[0][5], Cell::Num(2.0));
    }
}
