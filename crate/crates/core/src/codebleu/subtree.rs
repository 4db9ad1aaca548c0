use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::syntax::{Node, SyntaxTree};

/// Assigns one id per distinct kind structure. Leaves contribute only their
/// kind, so identifier text never affects matching.
#[derive(Default)]
struct Interner {
    ids: HashMap<(&'static str, Vec<u32>), u32>,
}

impl Interner {
    /// Interns `node` and pushes the id of every non-leaf subtree into `out`.
    /// Iterative post-order so deep trees cannot exhaust the stack.
    fn collect(&mut self, root: &Node, out: &mut Vec<u32>) -> u32 {
        let mut stack: Vec<(&Node, bool)> = vec![(root, false)];
        let mut values: Vec<u32> = Vec::new();
        while let Some((node, expanded)) = stack.pop() {
            if !expanded {
                stack.push((node, true));
                for c in node.children.iter().rev() {
                    stack.push((c, false));
                }
                continue;
            }
            let children = values.split_off(values.len() - node.children.len());
            let leaf = children.is_empty();
            let next = self.ids.len() as u32;
            let id = *self.ids.entry((node.kind, children)).or_insert(next);
            if !leaf {
                out.push(id);
            }
            values.push(id);
        }
        values[0]
    }
}

/// Kind-structure fingerprints of every non-leaf subtree, as s-expressions.
pub fn subtree_fingerprints(tree: &SyntaxTree) -> Vec<String> {
    fn render(n: &Node) -> String {
        if n.is_leaf() {
            n.kind.to_string()
        } else {
            let inner: Vec<String> = n.children.iter().map(render).collect();
            format!("({} {})", n.kind, inner.join(" "))
        }
    }
    tree.root.walk().filter(|n| !n.is_leaf()).map(render).collect()
}

/// Clipped fraction of reference subtrees that also occur in the candidate.
pub fn syntax_match(cand: &SyntaxTree, reference: &SyntaxTree) -> Result<f64> {
    let mut interner = Interner::default();
    let mut ref_ids = Vec::new();
    let mut cand_ids = Vec::new();
    interner.collect(&reference.root, &mut ref_ids);
    interner.collect(&cand.root, &mut cand_ids);
    if ref_ids.is_empty() {
        return Err(Error::Degenerate("reference has no syntax subtrees".into()));
    }
    let mut available: HashMap<u32, usize> = HashMap::new();
    for id in &ref_ids {
        *available.entry(*id).or_insert(0) += 1;
    }
    let mut matched = 0usize;
    for id in &cand_ids {
        if let Some(n) = available.get_mut(id) {
            if *n > 0 {
                *n -= 1;
                matched += 1;
            }
        }
    }
    Ok(matched as f64 / ref_ids.len() as f64)
}
