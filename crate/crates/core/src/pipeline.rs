//! Corpus-level scoring: metric selection, per-instance scoring with flagged
//! nulls, per-model summaries, pass@k tables and model-aligned score vectors.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use crate::codebleu::{codebleu, KeywordTable};
use crate::config::RunConfig;
use crate::corpus::{Corpus, EvaluationInstance, ExecutionRecord};
use crate::edit::edit_sim;
use crate::embedding::{score_pair, EmbedderBackend, Embedded, PairScore, TokenMask};
use crate::error::{Error, Result};
use crate::execution::{pass_rate_from_counts, task_counts};
use crate::lexical::{bleu, chrf, crystal_bleu, exact_match, extract_trivial_ngrams, TrivialNgramSet};
use crate::metastats::ScoreVector;
use crate::report::{sanitize_flag, Cell, ScoreRow, ScoreTable, Table};
use crate::tokenize::{tokenize_code, TokenSequence};

/// Every metric id in canonical column order.
pub const METRIC_IDS: &[&str] = &[
    "em",
    "bleu",
    "crystalbleu",
    "codebleu",
    "chrf",
    "editsim",
    "cbs_p",
    "cbs_r",
    "cbs_f1",
    "cbs_f3",
    "bertscore_f1",
];

/// Metrics that need an embedding backend.
pub const EMBEDDING_METRICS: &[&str] = &["cbs_p", "cbs_r", "cbs_f1", "cbs_f3", "bertscore_f1"];

pub fn is_embedding_metric(id: &str) -> bool {
    EMBEDDING_METRICS.contains(&id)
}

/// Resolve the configured selection into canonical order. An empty selection
/// means every metric whose requirements are met.
pub fn resolve_metrics(selection: &[String], have_backend: bool) -> Result<Vec<String>> {
    if selection.is_empty() {
        return Ok(METRIC_IDS
            .iter()
            .filter(|m| have_backend || !is_embedding_metric(m))
            .map(|m| m.to_string())
            .collect());
    }
    let mut wanted = BTreeSet::new();
    for m in selection {
        if !METRIC_IDS.contains(&m.as_str()) {
            return Err(Error::Config(format!(
                "unknown metric `{m}` (known: {})",
                METRIC_IDS.join(", ")
            )));
        }
        if is_embedding_metric(m) && !have_backend {
            return Err(Error::Config(format!(
                "metric `{m}` needs an embedding backend; set [embedding.backend]"
            )));
        }
        wanted.insert(m.as_str());
    }
    Ok(METRIC_IDS
        .iter()
        .filter(|m| wanted.contains(*m))
        .map(|m| m.to_string())
        .collect())
}

/// If `text` contains a fenced code block, return the first block's body.
pub fn strip_code_fences(text: &str) -> &str {
    let Some(open) = text.find("```") else {
        return text;
    };
    let after = &text[open + 3..];
    let Some(nl) = after.find('\n') else {
        return text;
    };
    let body = &after[nl + 1..];
    match body.find("```") {
        Some(close) => {
            let inner = &body[..close];
            inner.strip_suffix('\n').unwrap_or(inner)
        }
        None => body,
    }
}

struct Shared<'a> {
    config: &'a RunConfig,
    metrics: &'a [String],
    backend: Option<&'a dyn EmbedderBackend>,
    trivial: TrivialNgramSet,
    keywords: HashMap<String, std::result::Result<KeywordTable, String>>,
}

/// Embed one side and return it with the number of leading context tokens.
fn embed_side(
    backend: &dyn EmbedderBackend,
    code: &str,
    language: &str,
    context: Option<&str>,
) -> Result<(Embedded, usize)> {
    match context {
        Some(ctx) => {
            let prefix = backend.embed(ctx, language)?.matrix.len();
            Ok((backend.embed_with_context(ctx, code, language)?, prefix))
        }
        None => Ok((backend.embed(code, language)?, 0)),
    }
}

/// Same vectors with every non-context token included.
fn all_on(e: &Embedded, prefix: usize) -> Embedded {
    let include = (0..e.matrix.len()).map(|i| i >= prefix).collect();
    Embedded {
        matrix: e.matrix.clone(),
        mask: TokenMask { include },
    }
}

impl Shared<'_> {
    fn score_instance(&self, inst: &EvaluationInstance) -> ScoreRow {
        let cand = if self.config.strip_fences {
            strip_code_fences(&inst.candidate_code)
        } else {
            inst.candidate_code.as_str()
        };
        let reference = inst.reference_code.as_str();
        let lang = inst.language.as_str();
        let mut flags = Vec::new();
        if let Some(e) = &inst.transform_error {
            flags.push(format!("transform: {e}"));
        }
        let needs_tokens = self.metrics.iter().any(|m| m == "bleu" || m == "crystalbleu");
        let toks = needs_tokens.then(|| (tokenize_code(cand, lang), tokenize_code(reference, lang)));
        let needs_embedding = self.metrics.iter().any(|m| is_embedding_metric(m));
        let embedded = match (needs_embedding, self.backend) {
            (true, Some(b)) => Some(self.embed_pair(b, cand, reference, lang, &inst.nl_context)),
            _ => None,
        };

        let mut values = Vec::with_capacity(self.metrics.len());
        for m in self.metrics {
            let v: Result<f64> = match m.as_str() {
                "em" => Ok(exact_match(cand, reference)),
                "bleu" => {
                    let (c, r) = toks.as_ref().expect("tokens computed");
                    bleu(c, r, &self.config.bleu).map(|s| s.score)
                }
                "crystalbleu" => {
                    let (c, r) = toks.as_ref().expect("tokens computed");
                    crystal_bleu(c, r, &self.config.bleu, &self.trivial).map(|s| s.score)
                }
                "codebleu" => match &self.keywords[lang] {
                    Ok(table) => codebleu(cand, reference, lang, &self.config.codebleu, &self.config.bleu, table)
                        .map(|s| {
                            if s.candidate_parse_error {
                                flags.push("codebleu: candidate has syntax errors, scored on the recovered tree".into());
                            }
                            if s.dataflow_undefined {
                                flags.push("codebleu: reference has no dataflow edges, dataflow term set to 1".into());
                            }
                            s.score
                        }),
                    Err(e) => Err(Error::UnsupportedLanguage(e.clone())),
                },
                "chrf" => chrf(cand, reference, self.config.chrf),
                "editsim" => Ok(edit_sim(cand, reference)),
                emb => {
                    let pair = embedded.as_ref().expect("embedding computed");
                    pair.as_ref()
                        .map_err(|e| Error::Backend(e.clone()))
                        .and_then(|(cbs, bert)| match emb {
                            "cbs_p" => cbs.as_ref().map(|s| s.precision).map_err(|e| Error::Degenerate(e.clone())),
                            "cbs_r" => cbs.as_ref().map(|s| s.recall).map_err(|e| Error::Degenerate(e.clone())),
                            "cbs_f1" => cbs.as_ref().map(|s| s.f1).map_err(|e| Error::Degenerate(e.clone())),
                            "cbs_f3" => cbs.as_ref().map(|s| s.f3).map_err(|e| Error::Degenerate(e.clone())),
                            _ => bert.as_ref().map(|s| s.f1).map_err(|e| Error::Degenerate(e.clone())),
                        })
                }
            };
            match v {
                Ok(x) => values.push(Some(x)),
                Err(e) => {
                    flags.push(format!("{m}: {e}"));
                    values.push(None);
                }
            }
        }
        ScoreRow {
            key: inst.key(),
            values,
            flags: flags.iter().map(|f| sanitize_flag(f)).collect(),
        }
    }

    /// Outer error: the backend failed. Inner errors: the pair could not be scored.
    #[allow(clippy::type_complexity)]
    fn embed_pair(
        &self,
        backend: &dyn EmbedderBackend,
        cand: &str,
        reference: &str,
        lang: &str,
        nl_context: &str,
    ) -> std::result::Result<
        (std::result::Result<PairScore, String>, std::result::Result<PairScore, String>),
        String,
    > {
        let ctx = (self.config.embedding.context && !nl_context.is_empty()).then_some(nl_context);
        let (c, cp) = embed_side(backend, cand, lang, ctx).map_err(|e| e.to_string())?;
        let (r, rp) = embed_side(backend, reference, lang, ctx).map_err(|e| e.to_string())?;
        let cbs = score_pair(&c, &r).map_err(|e| e.to_string());
        let bert = score_pair(&all_on(&c, cp), &all_on(&r, rp)).map_err(|e| e.to_string());
        Ok((cbs, bert))
    }
}

/// Trivial n-grams for CrystalBLEU, counted over the distinct references.
pub fn corpus_trivial_ngrams(corpus: &Corpus, config: &RunConfig) -> TrivialNgramSet {
    let refs: BTreeSet<(&str, &str)> = corpus
        .instances
        .iter()
        .map(|i| (i.reference_code.as_str(), i.language.as_str()))
        .collect();
    let seqs: Vec<TokenSequence> = refs.into_iter().map(|(r, l)| tokenize_code(r, l)).collect();
    extract_trivial_ngrams(&seqs, config.crystal.k, config.bleu.max_order)
}

/// Score every instance. Configuration problems and an unreachable backend
/// fail before any scoring; per-instance metric errors become flagged nulls.
pub fn score_corpus(
    corpus: &Corpus,
    config: &RunConfig,
    backend: Option<&dyn EmbedderBackend>,
) -> Result<ScoreTable> {
    config.validate()?;
    let metrics = resolve_metrics(&config.metrics, backend.is_some())?;
    if metrics.iter().any(|m| is_embedding_metric(m)) {
        if let Some(b) = backend {
            b.check()?;
        }
    }
    let trivial = if metrics.iter().any(|m| m == "crystalbleu") {
        corpus_trivial_ngrams(corpus, config)
    } else {
        TrivialNgramSet::empty()
    };
    let mut keywords = HashMap::new();
    for inst in &corpus.instances {
        keywords
            .entry(inst.language.clone())
            .or_insert_with(|| KeywordTable::for_language(&inst.language).map_err(|_| inst.language.clone()));
    }
    let shared = Shared {
        config,
        metrics: &metrics,
        backend,
        trivial,
        keywords,
    };
    let rows = score_rows(&shared, &corpus.instances, config.jobs)?;
    let mut table = ScoreTable { metrics, rows };
    table.sort();
    Ok(table)
}

#[cfg(feature = "parallel")]
fn score_rows(shared: &Shared<'_>, instances: &[EvaluationInstance], jobs: usize) -> Result<Vec<ScoreRow>> {
    use rayon::prelude::*;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(|| instances.par_iter().map(|i| shared.score_instance(i)).collect()))
}

#[cfg(not(feature = "parallel"))]
fn score_rows(shared: &Shared<'_>, instances: &[EvaluationInstance], _jobs: usize) -> Result<Vec<ScoreRow>> {
    Ok(instances.iter().map(|i| shared.score_instance(i)).collect())
}

fn mean(xs: &[f64]) -> Option<f64> {
    (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
}

/// Macro average for one model and metric column: samples are averaged
/// within a task, then tasks are averaged. Null cells are skipped.
pub fn macro_mean(table: &ScoreTable, model_id: &str, column: usize) -> Option<f64> {
    let mut per_task: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for r in table.rows.iter().filter(|r| r.key.model_id == model_id) {
        if let Some(v) = r.values[column] {
            per_task.entry(r.key.task_id.as_str()).or_default().push(v);
        }
    }
    let task_means: Vec<f64> = per_task.values().filter_map(|v| mean(v)).collect();
    mean(&task_means)
}

fn table_models(table: &ScoreTable) -> Vec<String> {
    let set: BTreeSet<&str> = table.rows.iter().map(|r| r.key.model_id.as_str()).collect();
    set.into_iter().map(str::to_string).collect()
}

/// Per-model summary: functional correctness (pass@1 over execution
/// records), editing effort (mean edit similarity) and every metric's mean.
pub fn summary_table(table: &ScoreTable, executions: &[ExecutionRecord]) -> Table {
    let mut headers = vec!["model_id", "n", "functional_correctness", "editing_effort"];
    headers.extend(table.metrics.iter().map(String::as_str));
    let mut t = Table::new("Per-model means (macro-average over tasks)", &headers);
    let editsim = table.column("editsim");
    for model in table_models(table) {
        let n = table.rows.iter().filter(|r| r.key.model_id == model).count();
        let counts = task_counts(executions, &model);
        let fc = if counts.is_empty() {
            None
        } else {
            pass_rate_from_counts(&counts, 1).ok()
        };
        let mut row = vec![
            Cell::Text(model.clone()),
            Cell::from(n),
            Cell::from(fc),
            Cell::from(editsim.and_then(|c| macro_mean(table, &model, c))),
        ];
        row.extend((0..table.metrics.len()).map(|c| Cell::from(macro_mean(table, &model, c))));
        t.push(row);
    }
    t
}

/// Per-model pass@k for each requested k. A model with a task that has
/// fewer than k samples gets a null cell and a note.
pub fn passk_table(executions: &[ExecutionRecord], ks: &[u64]) -> Result<Table> {
    if ks.is_empty() || ks.contains(&0) {
        return Err(Error::Config("k list must contain positive integers".into()));
    }
    for rec in executions {
        rec.validate()?;
    }
    let k_headers: Vec<String> = ks.iter().map(|k| format!("pass@{k}")).collect();
    let mut headers = vec!["model_id", "n_tasks"];
    headers.extend(k_headers.iter().map(String::as_str));
    headers.push("note");
    let mut t = Table::new("Functional correctness (pass@k)", &headers);
    let models: BTreeSet<&str> = executions.iter().map(|r| r.model_id.as_str()).collect();
    for model in models {
        let counts = task_counts(executions, model);
        let mut row = vec![Cell::from(model), Cell::from(counts.len())];
        let mut notes = Vec::new();
        for &k in ks {
            match pass_rate_from_counts(&counts, k) {
                Ok(v) => row.push(Cell::Num(v)),
                Err(e) => {
                    notes.push(format!("pass@{k}: {e}"));
                    row.push(Cell::Null);
                }
            }
        }
        row.push(Cell::Text(notes.join("; ")));
        t.push(row);
    }
    Ok(t)
}

/// Per-model vectors for one metric, aligned on sorted task id.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignedVectors {
    pub task_ids: Vec<String>,
    pub vectors: Vec<ScoreVector>,
    /// Tasks dropped because some model had no value for them.
    pub dropped: Vec<String>,
}

/// Build one vector per model (samples averaged within a task). Every model
/// must cover the same tasks; otherwise the missing `(task, model)` pairs are
/// reported as an alignment error.
pub fn vectors_by_model(table: &ScoreTable, metric: &str) -> Result<AlignedVectors> {
    let col = table
        .column(metric)
        .ok_or_else(|| Error::Config(format!("score table has no `{metric}` column")))?;
    let models = table_models(table);
    let mut cells: BTreeMap<(&str, &str), Vec<Option<f64>>> = BTreeMap::new();
    for r in &table.rows {
        cells
            .entry((r.key.task_id.as_str(), r.key.model_id.as_str()))
            .or_default()
            .push(r.values[col]);
    }
    let tasks: BTreeSet<&str> = cells.keys().map(|(t, _)| *t).collect();
    let missing: Vec<String> = tasks
        .iter()
        .flat_map(|t| models.iter().map(move |m| (*t, m.as_str())))
        .filter(|k| !cells.contains_key(k))
        .map(|(t, m)| format!("({t}, {m})"))
        .collect();
    if !missing.is_empty() {
        return Err(Error::Alignment(format!(
            "{metric}: models do not cover the same tasks; missing {}",
            missing.join(", ")
        )));
    }
    let mut task_ids = Vec::new();
    let mut dropped = Vec::new();
    let mut vectors: Vec<ScoreVector> = models
        .iter()
        .map(|m| ScoreVector {
            metric_id: metric.to_string(),
            model_id: m.clone(),
            values: Vec::new(),
        })
        .collect();
    for t in tasks {
        let means: Vec<Option<f64>> = models
            .iter()
            .map(|m| {
                let vals: Vec<f64> = cells[&(t, m.as_str())].iter().flatten().copied().collect();
                mean(&vals)
            })
            .collect();
        if means.iter().all(Option::is_some) {
            task_ids.push(t.to_string());
            for (v, x) in vectors.iter_mut().zip(means) {
                v.values.push(x.expect("checked"));
            }
        } else {
            dropped.push(t.to_string());
        }
    }
    Ok(AlignedVectors {
        task_ids,
        vectors,
        dropped,
    })
}
