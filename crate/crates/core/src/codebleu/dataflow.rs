use std::collections::{BTreeSet, HashMap};

use crate::syntax::{Node, Role, SyntaxTree};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Relation {
    /// A use reads the value of an earlier definition.
    ComesFrom,
    /// A binding's value was computed from another variable.
    ComputedFrom,
}

/// An edge between two variables, named by their first-occurrence ordinal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct DataflowEdge {
    pub relation: Relation,
    pub source: usize,
    pub target: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DataflowGraph {
    /// Variable names; the index is the normalized name.
    pub variables: Vec<String>,
    pub edges: Vec<DataflowEdge>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DataflowMatch {
    pub score: f64,
    pub matched: usize,
    pub reference_edges: usize,
    /// The reference had no edges; `score` is then 1 by convention.
    pub undefined: bool,
}

struct Extractor<'t> {
    tree: &'t SyntaxTree,
    ordinal: HashMap<&'t str, usize>,
    defined: Vec<bool>,
    edges: Vec<DataflowEdge>,
    /// Variables read by the expression currently being collected.
    reads: Vec<BTreeSet<usize>>,
}

const COMPREHENSIONS: &[&str] = &[
    "list_comprehension",
    "set_comprehension",
    "dictionary_comprehension",
    "generator_expression",
];

/// Extracts variable dataflow with source-order, flow-insensitive scoping.
pub fn dataflow_graph(tree: &SyntaxTree) -> DataflowGraph {
    let mut ordinal: HashMap<&str, usize> = HashMap::new();
    let mut variables: Vec<String> = Vec::new();
    let bound: BTreeSet<&str> = tree
        .identifiers()
        .filter(|n| matches!(n.role, Some(Role::Store | Role::Param)))
        .map(|n| tree.text(n))
        .collect();
    for n in tree.identifiers() {
        let name = tree.text(n);
        if bound.contains(name) && matches!(n.role, Some(Role::Store | Role::Param | Role::Load)) {
            ordinal.entry(name).or_insert_with(|| {
                variables.push(name.to_string());
                variables.len() - 1
            });
        }
    }
    let mut ex = Extractor {
        tree,
        defined: vec![false; variables.len()],
        ordinal,
        edges: Vec::new(),
        reads: Vec::new(),
    };
    ex.visit(&tree.root, 0);
    let mut edges = ex.edges;
    edges.sort_unstable();
    DataflowGraph { variables, edges }
}

const MAX_VISIT_DEPTH: usize = 400;

impl<'t> Extractor<'t> {
    fn var(&self, n: &Node) -> Option<usize> {
        if n.kind != "identifier" {
            return None;
        }
        self.ordinal.get(self.tree.text(n)).copied()
    }

    fn read(&mut self, v: usize) {
        if self.defined[v] {
            self.edges.push(DataflowEdge {
                relation: Relation::ComesFrom,
                source: v,
                target: v,
            });
        }
        for set in &mut self.reads {
            set.insert(v);
        }
    }

    /// Visit `nodes` as an expression and return the variables it reads.
    fn collect_reads(&mut self, nodes: &[&Node], depth: usize) -> BTreeSet<usize> {
        self.reads.push(BTreeSet::new());
        for n in nodes {
            self.visit(n, depth + 1);
        }
        self.reads.pop().unwrap_or_default()
    }

    /// Bind every store-role variable under `target`, each computed from `sources`.
    fn bind(&mut self, target: &Node, sources: &BTreeSet<usize>, depth: usize) {
        let mut targets = Vec::new();
        let mut stack = vec![target];
        while let Some(n) = stack.pop() {
            if n.kind == "identifier" && matches!(n.role, Some(Role::Store | Role::Param)) {
                if let Some(v) = self.var(n) {
                    targets.push(v);
                }
            } else if n.kind == "identifier" || n.is_leaf() {
                continue;
            } else if matches!(
                n.kind,
                "expression_list" | "tuple" | "list" | "parenthesized_expression" | "list_splat"
            ) {
                stack.extend(n.children.iter().rev());
            } else {
                // Attribute or subscript targets read their object.
                self.visit(n, depth + 1);
            }
        }
        for t in targets {
            for &s in sources {
                self.edges.push(DataflowEdge {
                    relation: Relation::ComputedFrom,
                    source: s,
                    target: t,
                });
            }
            self.defined[t] = true;
        }
    }

    fn visit(&mut self, node: &Node, depth: usize) {
        if depth > MAX_VISIT_DEPTH {
            return;
        }
        let ch = &node.children;
        match node.kind {
            "identifier" => match node.role {
                Some(Role::Load) => {
                    if let Some(v) = self.var(node) {
                        self.read(v);
                    }
                }
                Some(Role::Store | Role::Param) => {
                    if let Some(v) = self.var(node) {
                        self.defined[v] = true;
                    }
                }
                _ => {}
            },
            "assignment" => {
                // target = value | target : type [= value] | target = (assignment ...)
                let (target, rest) = ch.split_first().expect("assignment has children");
                let value: Vec<&Node> = match rest.first().map(|n| n.kind) {
                    Some(":") => rest.get(3).into_iter().collect(),
                    _ => rest.get(1).into_iter().collect(),
                };
                if value.first().map(|n| n.kind) == Some("assignment") {
                    // Chained: the inner assignment's value feeds every target.
                    let inner = value[0];
                    let reads = self.chain_reads(inner, depth);
                    self.bind(target, &reads, depth);
                } else {
                    let reads = self.collect_reads(&value, depth);
                    self.bind(target, &reads, depth);
                }
            }
            "augmented_assignment" => {
                let rhs: Vec<&Node> = ch[2..].iter().collect();
                let mut reads = self.collect_reads(&rhs, depth);
                // The target is read before it is rebound.
                if let Some(v) = self.var(&ch[0]) {
                    self.read(v);
                    reads.insert(v);
                }
                self.bind(&ch[0], &reads, depth);
            }
            "named_expression" => {
                let reads = self.collect_reads(&[&ch[2]], depth);
                self.bind(&ch[0], &reads, depth);
            }
            "for_statement" | "for_in_clause" => {
                let for_at = ch.iter().position(|c| c.kind == "for").unwrap_or(0);
                let in_at = ch.iter().position(|c| c.kind == "in").unwrap_or(ch.len());
                let target = &ch[for_at + 1];
                let iter: Vec<&Node> = ch.get(in_at + 1).into_iter().collect();
                let reads = self.collect_reads(&iter, depth);
                self.bind(target, &reads, depth);
                for c in ch.iter().skip(in_at + 2) {
                    self.visit(c, depth + 1);
                }
            }
            "with_item" => {
                let reads = self.collect_reads(&[&ch[0]], depth);
                if let Some(target) = ch.get(2) {
                    self.bind(target, &reads, depth);
                }
            }
            k if COMPREHENSIONS.contains(&k) => {
                // Clauses bind before the element expression reads.
                let (clauses, rest): (Vec<&Node>, Vec<&Node>) = ch
                    .iter()
                    .partition(|c| matches!(c.kind, "for_in_clause" | "if_clause"));
                for c in clauses {
                    self.visit(c, depth + 1);
                }
                for c in rest {
                    self.visit(c, depth + 1);
                }
            }
            _ => {
                for c in ch {
                    self.visit(c, depth + 1);
                }
            }
        }
    }

    fn chain_reads(&mut self, inner: &Node, depth: usize) -> BTreeSet<usize> {
        // Visiting the inner assignment binds its own targets; capture what its value read.
        self.reads.push(BTreeSet::new());
        self.visit(inner, depth + 1);
        self.reads.pop().unwrap_or_default()
    }
}

/// Clipped fraction of reference edges present in the candidate.
pub fn dataflow_match(cand: &DataflowGraph, reference: &DataflowGraph) -> DataflowMatch {
    if reference.edges.is_empty() {
        return DataflowMatch {
            score: 1.0,
            matched: 0,
            reference_edges: 0,
            undefined: true,
        };
    }
    let mut available: HashMap<DataflowEdge, usize> = HashMap::new();
    for e in &reference.edges {
        *available.entry(*e).or_insert(0) += 1;
    }
    let mut matched = 0;
    for e in &cand.edges {
        if let Some(n) = available.get_mut(e) {
            if *n > 0 {
                *n -= 1;
                matched += 1;
            }
        }
    }
    DataflowMatch {
        score: matched as f64 / reference.edges.len() as f64,
        matched,
        reference_edges: reference.edges.len(),
        undefined: false,
    }
}
