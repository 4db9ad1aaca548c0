//! Evaluation instances and execution records, read from JSONL and joined
//! on `(task_id, model_id, sample_index)`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct InstanceKey {
    pub task_id: String,
    pub model_id: String,
    pub sample_index: i64,
}

impl fmt::Display for InstanceKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.task_id, self.model_id, self.sample_index)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvaluationInstance {
    pub task_id: String,
    pub model_id: String,
    pub sample_index: i64,
    #[serde(default)]
    pub nl_context: String,
    pub reference_code: String,
    pub candidate_code: String,
    #[serde(default = "default_language")]
    pub language: String,
    /// Set by the perturbation step to record which rewrite produced this row.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transform: Option<String>,
    /// Why the recorded transform could not be applied; the code is then unmodified.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transform_error: Option<String>,
}

fn default_language() -> String {
    "python".to_string()
}

impl EvaluationInstance {
    pub fn key(&self) -> InstanceKey {
        InstanceKey {
            task_id: self.task_id.clone(),
            model_id: self.model_id.clone(),
            sample_index: self.sample_index,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecutionRecord {
    pub task_id: String,
    pub model_id: String,
    pub sample_index: i64,
    pub tests_passed: u32,
    pub tests_total: u32,
}

impl ExecutionRecord {
    pub fn key(&self) -> InstanceKey {
        InstanceKey {
            task_id: self.task_id.clone(),
            model_id: self.model_id.clone(),
            sample_index: self.sample_index,
        }
    }

    /// The dichotomous correctness variable.
    pub fn passed_all(&self) -> bool {
        self.tests_passed == self.tests_total
    }

    pub fn validate(&self) -> Result<()> {
        if self.tests_total == 0 {
            return Err(Error::Domain(format!("{}: tests_total must be >= 1", self.key())));
        }
        if self.tests_passed > self.tests_total {
            return Err(Error::Domain(format!(
                "{}: tests_passed {} exceeds tests_total {}",
                self.key(),
                self.tests_passed,
                self.tests_total
            )));
        }
        if self.sample_index < 0 {
            return Err(Error::Domain(format!("{}: negative sample index", self.key())));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Violation {
    EmptyReference,
    NegativeIndex,
    EmptyTaskId,
    EmptyModelId,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Violation::EmptyReference => "empty reference",
            Violation::NegativeIndex => "negative index",
            Violation::EmptyTaskId => "empty task_id",
            Violation::EmptyModelId => "empty model_id",
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

pub fn validate_instance(inst: &EvaluationInstance) -> ValidationReport {
    let mut violations = Vec::new();
    if inst.task_id.is_empty() {
        violations.push(Violation::EmptyTaskId);
    }
    if inst.model_id.is_empty() {
        violations.push(Violation::EmptyModelId);
    }
    if inst.sample_index < 0 {
        violations.push(Violation::NegativeIndex);
    }
    if inst.reference_code.is_empty() {
        violations.push(Violation::EmptyReference);
    }
    ValidationReport { violations }
}

/// An immutable, key-unique set of instances with optional execution labels.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Corpus {
    pub instances: Vec<EvaluationInstance>,
    /// 1-based source line per instance (0 when built in memory).
    pub lines: Vec<usize>,
    pub executions: BTreeMap<InstanceKey, ExecutionRecord>,
    /// Records skipped at load time because they failed validation.
    pub rejected: Vec<(usize, ValidationReport)>,
}

impl Corpus {
    pub fn from_instances(instances: Vec<EvaluationInstance>) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for (i, inst) in instances.iter().enumerate() {
            if !seen.insert(inst.key()) {
                return Err(Error::DuplicateKey(inst.key(), i + 1));
            }
        }
        let lines = vec![0; instances.len()];
        Ok(Corpus {
            instances,
            lines,
            ..Default::default()
        })
    }

    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    pub fn execution(&self, key: &InstanceKey) -> Option<&ExecutionRecord> {
        self.executions.get(key)
    }

    /// Distinct model ids in sorted order.
    pub fn model_ids(&self) -> Vec<String> {
        let set: BTreeSet<&str> = self.instances.iter().map(|i| i.model_id.as_str()).collect();
        set.into_iter().map(str::to_string).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InputFormat {
    #[default]
    Jsonl,
}

pub fn load_instances(path: impl AsRef<Path>, format: InputFormat) -> Result<Corpus> {
    let InputFormat::Jsonl = format;
    let file = std::fs::File::open(path)?;
    read_instances(BufReader::new(file))
}

pub fn read_instances(reader: impl BufRead) -> Result<Corpus> {
    let mut corpus = Corpus::default();
    let mut seen: BTreeMap<InstanceKey, usize> = BTreeMap::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let inst: EvaluationInstance =
            serde_json::from_str(&line).map_err(|e| Error::Parse {
                line: line_no,
                message: e.to_string(),
            })?;
        let report = validate_instance(&inst);
        if !report.is_valid() {
            corpus.rejected.push((line_no, report));
            continue;
        }
        if seen.insert(inst.key(), line_no).is_some() {
            return Err(Error::DuplicateKey(inst.key(), line_no));
        }
        corpus.instances.push(inst);
        corpus.lines.push(line_no);
    }
    Ok(corpus)
}

pub fn write_instances(instances: &[EvaluationInstance], mut out: impl Write) -> Result<()> {
    for inst in instances {
        serde_json::to_writer(&mut out, inst).map_err(std::io::Error::from)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn load_executions(path: impl AsRef<Path>) -> Result<Vec<ExecutionRecord>> {
    let file = std::fs::File::open(path)?;
    read_executions(BufReader::new(file))
}

pub fn read_executions(reader: impl BufRead) -> Result<Vec<ExecutionRecord>> {
    let mut out = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: ExecutionRecord = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: idx + 1,
            message: e.to_string(),
        })?;
        rec.validate().map_err(|e| Error::Parse {
            line: idx + 1,
            message: e.to_string(),
        })?;
        out.push(rec);
    }
    Ok(out)
}

/// Attach execution records. Instances without a record stay unlabeled.
pub fn join_executions(corpus: &Corpus, records: &[ExecutionRecord]) -> Result<Corpus> {
    let keys: BTreeSet<InstanceKey> = corpus.instances.iter().map(|i| i.key()).collect();
    let dangling: Vec<InstanceKey> = records
        .iter()
        .map(|r| r.key())
        .filter(|k| !keys.contains(k))
        .collect();
    if !dangling.is_empty() {
        return Err(Error::DanglingKeys(dangling));
    }
    for rec in records {
        rec.validate()?;
    }
    let mut joined = corpus.clone();
    for rec in records {
        joined.executions.insert(rec.key(), rec.clone());
    }
    Ok(joined)
}
