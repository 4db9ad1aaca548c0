//! wasm-bindgen entry points for the static demo page in `www/`.
//!
//! Every function takes plain strings or numbers and returns a JSON string,
//! so the page needs no bindings beyond `JSON.parse`. Errors come back as
//! `{"error": "..."}` rather than exceptions.

use codeval_core::config::RunConfig;
use codeval_core::corpus::{Corpus, EvaluationInstance};
use codeval_core::embedding::{similarity_matrix, EmbedderBackend, HashEmbedder};
use codeval_core::execution::estimate_pass_at_k;
use codeval_core::perturb::{apply_transform_pairwise, TransformKind};
use codeval_core::pipeline::score_corpus;
use codeval_core::Result;
use serde_json::{json, Value};
use wasm_bindgen::prelude::wasm_bindgen;

fn respond(r: Result<Value>) -> String {
    match r {
        Ok(v) => v.to_string(),
        Err(e) => json!({ "error": e.to_string() }).to_string(),
    }
}

fn instance(candidate: &str, reference: &str, language: &str) -> EvaluationInstance {
    EvaluationInstance {
        task_id: "demo".into(),
        model_id: "demo".into(),
        sample_index: 0,
        nl_context: String::new(),
        reference_code: reference.into(),
        candidate_code: candidate.into(),
        language: language.into(),
        transform: None,
        transform_error: None,
    }
}

fn compare_inner(candidate: &str, reference: &str, language: &str) -> Result<Value> {
    let backend = HashEmbedder::default();
    let corpus = Corpus::from_instances(vec![instance(candidate, reference, language)])?;
    let table = score_corpus(&corpus, &RunConfig::default(), Some(&backend))?;
    let row = &table.rows[0];
    let scores: serde_json::Map<String, Value> = table
        .metrics
        .iter()
        .zip(&row.values)
        .map(|(m, v)| (m.clone(), json!(v)))
        .collect();

    let c = backend.embed(candidate, language)?;
    let r = backend.embed(reference, language)?;
    let sim = similarity_matrix(&c.matrix, &r.matrix)?;
    let cells: Vec<Vec<f64>> = (0..sim.rows).map(|i| (0..sim.cols).map(|j| sim.get(i, j)).collect()).collect();
    Ok(json!({
        "scores": scores,
        "flags": row.flags,
        "backend": backend.identity(),
        "heatmap": {
            "reference_tokens": r.matrix.tokens,
            "candidate_tokens": c.matrix.tokens,
            "reference_mask": r.mask.include,
            "candidate_mask": c.mask.include,
            "cells": cells,
        },
    }))
}

/// Score one candidate against one reference with every metric.
/// The embedding metrics use the deterministic hash backend, so the heatmap
/// shows token identity rather than learned semantics.
#[wasm_bindgen]
pub fn compare(candidate: &str, reference: &str, language: &str) -> String {
    respond(compare_inner(candidate, reference, language))
}

fn perturb_inner(candidate: &str, reference: &str, language: &str, transform: &str) -> Result<Value> {
    let kind: TransformKind = transform.parse()?;
    let out = apply_transform_pairwise(&instance(candidate, reference, language), kind);
    Ok(json!({
        "transform": kind.label(),
        "applied": out.applied,
        "candidate": out.instance.candidate_code,
        "reference": out.instance.reference_code,
        "error": out.instance.transform_error,
    }))
}

/// Apply one identifier-renaming transform to the pair.
#[wasm_bindgen]
pub fn perturb(candidate: &str, reference: &str, language: &str, transform: &str) -> String {
    respond(perturb_inner(candidate, reference, language, transform))
}

fn passk_inner(n: u32, c: u32) -> Result<Value> {
    let curve = (1..=n)
        .map(|k| estimate_pass_at_k(n.into(), c.into(), k.into()).map(|p| json!({ "k": k, "pass": p })))
        .collect::<Result<Vec<_>>>()?;
    Ok(json!({ "n": n, "c": c, "curve": curve }))
}

/// Unbiased pass@k for every k in 1..=n given `c` passing samples out of `n`.
#[wasm_bindgen]
pub fn pass_at_k_curve(n: u32, c: u32) -> String {
    respond(passk_inner(n, c))
}
