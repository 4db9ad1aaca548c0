//! Semantics-preserving identifier rewrites: generic variable names
//! (`var0`, `var1`, ...) and fixed function names.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::EvaluationInstance;
use crate::error::{Error, Result};
use crate::syntax::{parse_syntax, Node, Role, SyntaxTree};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransformKind {
    VarCandOnly,
    VarRefOnly,
    VarCandAndRef,
    FuncSame,
    FuncDifferent,
}

impl TransformKind {
    pub const ALL: [TransformKind; 5] = [
        TransformKind::VarCandOnly,
        TransformKind::VarRefOnly,
        TransformKind::VarCandAndRef,
        TransformKind::FuncSame,
        TransformKind::FuncDifferent,
    ];

    /// Provenance label stored on rewritten instances.
    pub fn label(self) -> &'static str {
        match self {
            TransformKind::VarCandOnly => "var_cand_only",
            TransformKind::VarRefOnly => "var_ref_only",
            TransformKind::VarCandAndRef => "var_cand_and_ref",
            TransformKind::FuncSame => "func_same",
            TransformKind::FuncDifferent => "func_different",
        }
    }

    /// Short command-line spelling.
    pub fn cli_name(self) -> &'static str {
        match self {
            TransformKind::VarCandOnly => "var-cand",
            TransformKind::VarRefOnly => "var-ref",
            TransformKind::VarCandAndRef => "var-both",
            TransformKind::FuncSame => "func-same",
            TransformKind::FuncDifferent => "func-diff",
        }
    }
}

impl fmt::Display for TransformKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for TransformKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        TransformKind::ALL
            .into_iter()
            .find(|k| k.cli_name() == s || k.label() == s)
            .ok_or_else(|| Error::Config(format!("unknown transform `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IdentifierRole {
    Variable,
    Function,
}

/// Identifiers of one role with their 0-based first-occurrence ordinal.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdentifierInventory {
    pub role: IdentifierRole,
    pub entries: Vec<(String, usize)>,
}

impl IdentifierInventory {
    pub fn ordinal(&self, name: &str) -> Option<usize> {
        self.entries.iter().find(|(n, _)| n == name).map(|(_, i)| *i)
    }
}

fn parse_clean(code: &str, language: &str) -> Result<SyntaxTree> {
    let tree = parse_syntax(code, language)?;
    if tree.has_error {
        return Err(Error::Transform("code does not parse".into()));
    }
    Ok(tree)
}

/// Variables are names bound as parameters or assignment, loop, `with`,
/// `except` or comprehension targets, excluding names that are also
/// defined as functions or classes or imported. Ordinals follow first
/// occurrence in the source, so parameters come first, by position.
pub fn variable_inventory(tree: &SyntaxTree) -> IdentifierInventory {
    let mut bound = BTreeSet::new();
    let mut excluded = BTreeSet::new();
    for n in tree.identifiers() {
        match n.role {
            Some(Role::Store | Role::Param) => {
                bound.insert(tree.text(n));
            }
            Some(Role::FunctionName | Role::ClassName | Role::Import) => {
                excluded.insert(tree.text(n));
            }
            _ => {}
        }
    }
    let mut entries: Vec<(String, usize)> = Vec::new();
    for n in tree.identifiers() {
        let name = tree.text(n);
        if is_variable_occurrence(n)
            && bound.contains(name)
            && !excluded.contains(name)
            && !entries.iter().any(|(e, _)| e == name)
        {
            entries.push((name.to_string(), entries.len()));
        }
    }
    IdentifierInventory {
        role: IdentifierRole::Variable,
        entries,
    }
}

fn is_variable_occurrence(n: &Node) -> bool {
    matches!(n.role, Some(Role::Load | Role::Store | Role::Param))
}

fn replace_spans(src: &str, mut edits: Vec<(Range<usize>, String)>) -> String {
    edits.sort_by_key(|(r, _)| r.start);
    let mut out = String::with_capacity(src.len());
    let mut at = 0;
    for (r, text) in edits {
        out.push_str(&src[at..r.start]);
        out.push_str(&text);
        at = r.end;
    }
    out.push_str(&src[at..]);
    out
}

/// Rename every variable to `var{ordinal}`. Function names, attributes,
/// keyword-argument names, keywords and string contents are untouched.
pub fn rename_variables(code: &str, language: &str) -> Result<String> {
    let tree = parse_clean(code, language)?;
    let inv = variable_inventory(&tree);
    let names: HashMap<&str, usize> = inv.entries.iter().map(|(n, i)| (n.as_str(), *i)).collect();
    let edits = tree
        .identifiers()
        .filter(|n| is_variable_occurrence(n))
        .filter_map(|n| {
            let i = names.get(tree.text(n))?;
            Some((n.span.clone(), format!("var{i}")))
        })
        .collect();
    Ok(replace_spans(code, edits))
}

fn single_function(tree: &SyntaxTree) -> Result<&Node> {
    let defs: Vec<&Node> = tree
        .root
        .children
        .iter()
        .filter_map(|s| match s.kind {
            "function_definition" => Some(s),
            "decorated_definition" => s.children.iter().find(|c| c.kind == "function_definition"),
            _ => None,
        })
        .collect();
    match defs.as_slice() {
        [one] => Ok(one),
        other => Err(Error::Shape(format!(
            "expected exactly one top-level function definition, found {}",
            other.len()
        ))),
    }
}

fn function_name_node(def: &Node) -> &Node {
    def.children
        .iter()
        .find(|c| c.role == Some(Role::FunctionName))
        .expect("function definition has a name")
}

/// The name of the snippet's only top-level function.
pub fn function_inventory(code: &str, language: &str) -> Result<IdentifierInventory> {
    let tree = parse_clean(code, language)?;
    let def = single_function(&tree)?;
    Ok(IdentifierInventory {
        role: IdentifierRole::Function,
        entries: vec![(tree.text(function_name_node(def)).to_string(), 0)],
    })
}

fn rename_function(code: &str, language: &str, new_name: &str) -> Result<String> {
    let tree = parse_clean(code, language)?;
    let def = single_function(&tree)?;
    let old = tree.text(function_name_node(def));
    let edits = tree
        .identifiers()
        .filter(|n| tree.text(n) == old && matches!(n.role, Some(Role::FunctionName | Role::Load)))
        .map(|n| (n.span.clone(), new_name.to_string()))
        .collect();
    Ok(replace_spans(code, edits))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FunctionRenameMode {
    Same,
    Different,
}

pub const CANDIDATE_FUNCTION: &str = "candidate_function";
pub const REFERENCE_FUNCTION: &str = "reference_function";

/// Rename the single top-level function of each snippet, including
/// recursive call sites.
pub fn rename_functions(
    cand: &str,
    reference: &str,
    language: &str,
    mode: FunctionRenameMode,
) -> Result<(String, String)> {
    let ref_name = match mode {
        FunctionRenameMode::Same => CANDIDATE_FUNCTION,
        FunctionRenameMode::Different => REFERENCE_FUNCTION,
    };
    Ok((
        rename_function(cand, language, CANDIDATE_FUNCTION)?,
        rename_function(reference, language, ref_name)?,
    ))
}

/// Outcome of rewriting one instance. On failure the instance keeps its
/// original code and records the reason in `transform_error`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransformOutcome {
    pub instance: EvaluationInstance,
    pub applied: bool,
}

fn rewrite(inst: &EvaluationInstance, t: TransformKind) -> Result<(String, String)> {
    let lang = inst.language.as_str();
    let (c, r) = (&inst.candidate_code, &inst.reference_code);
    Ok(match t {
        TransformKind::VarCandOnly => (rename_variables(c, lang)?, r.clone()),
        TransformKind::VarRefOnly => (c.clone(), rename_variables(r, lang)?),
        TransformKind::VarCandAndRef => (rename_variables(c, lang)?, rename_variables(r, lang)?),
        TransformKind::FuncSame => rename_functions(c, r, lang, FunctionRenameMode::Same)?,
        TransformKind::FuncDifferent => rename_functions(c, r, lang, FunctionRenameMode::Different)?,
    })
}

pub fn apply_transform_pairwise(inst: &EvaluationInstance, t: TransformKind) -> TransformOutcome {
    let mut out = inst.clone();
    out.transform = Some(t.label().to_string());
    match rewrite(inst, t) {
        Ok((c, r)) => {
            out.candidate_code = c;
            out.reference_code = r;
            out.transform_error = None;
            TransformOutcome {
                instance: out,
                applied: true,
            }
        }
        Err(e) => {
            out.transform_error = Some(e.to_string());
            TransformOutcome {
                instance: out,
                applied: false,
            }
        }
    }
}
