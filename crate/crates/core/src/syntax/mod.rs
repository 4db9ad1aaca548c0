//! Error-tolerant syntax trees for Python snippets.
//!
//! Node kinds follow the usual concrete-syntax naming (`function_definition`,
//! `assignment`, `call`, ...). Keywords and operators appear as leaves whose
//! kind is their own text; names, numbers and strings are `identifier`,
//! `number` and `string` leaves. Unparseable lines become `ERROR` nodes and
//! parsing continues on the next line.

mod layout;
mod parser;

use std::ops::Range;

use crate::error::{Error, Result};
use crate::tokenize::{is_python, scan};

/// How an identifier leaf is used.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Role {
    Load,
    Store,
    Param,
    FunctionName,
    ClassName,
    Attribute,
    KeywordArg,
    Import,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Node {
    pub kind: &'static str,
    pub span: Range<usize>,
    pub children: Vec<Node>,
    /// Only set on `identifier` leaves.
    pub role: Option<Role>,
}

pub const ERROR_KIND: &str = "ERROR";

impl Node {
    pub(crate) fn leaf(kind: &'static str, span: Range<usize>) -> Self {
        Node {
            kind,
            span,
            children: Vec::new(),
            role: None,
        }
    }

    pub(crate) fn branch(kind: &'static str, children: Vec<Node>) -> Self {
        let span = match (children.first(), children.last()) {
            (Some(a), Some(b)) => a.span.start..b.span.end,
            _ => 0..0,
        };
        Node {
            kind,
            span,
            children,
            role: None,
        }
    }

    pub fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }

    /// Pre-order traversal.
    pub fn walk(&self) -> Walk<'_> {
        Walk { stack: vec![self] }
    }
}

pub struct Walk<'a> {
    stack: Vec<&'a Node>,
}

impl<'a> Iterator for Walk<'a> {
    type Item = &'a Node;

    fn next(&mut self) -> Option<&'a Node> {
        let n = self.stack.pop()?;
        self.stack.extend(n.children.iter().rev());
        Some(n)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SyntaxTree {
    pub root: Node,
    pub source: String,
    /// True when at least one `ERROR` node was produced.
    pub has_error: bool,
}

impl SyntaxTree {
    pub fn text(&self, node: &Node) -> &str {
        &self.source[node.span.clone()]
    }

    /// Identifier leaves in source order.
    pub fn identifiers(&self) -> impl Iterator<Item = &Node> {
        self.root.walk().filter(|n| n.kind == "identifier")
    }

    /// Sequence of leaf kinds in source order; identifier text is not included.
    pub fn leaf_kinds(&self) -> Vec<&'static str> {
        self.root.walk().filter(|n| n.is_leaf()).map(|n| n.kind).collect()
    }
}

pub fn parse_syntax(code: &str, language: &str) -> Result<SyntaxTree> {
    if !is_python(language) {
        return Err(Error::UnsupportedLanguage(language.to_string()));
    }
    let raw = scan(code, "python");
    let toks = layout::layout(code, &raw);
    let (root, has_error) = parser::parse_module(code, toks);
    Ok(SyntaxTree {
        root,
        source: code.to_string(),
        has_error,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sexp(tree: &SyntaxTree, n: &Node) -> String {
        if n.is_leaf() {
            return if n.kind == "identifier" {
                format!("{}:{}", n.kind, tree.text(n))
            } else {
                n.kind.to_string()
            };
        }
        let inner: Vec<String> = n.children.iter().map(|c| sexp(tree, c)).collect();
        format!("({} {})", n.kind, inner.join(" "))
    }

    fn p(code: &str) -> SyntaxTree {
        parse_syntax(code, "python").unwrap()
    }

    #[test]
    fn smallest_program_is_an_assignment() {
        let t = p("x = 1");
        assert!(!t.has_error);
        assert_eq!(sexp(&t, &t.root), "(module (assignment identifier:x = number))");
    }

    #[test]
    fn function_definition_shape() {
        let t = p("def f(x):\n    total = x\n    return total\n");
        assert!(!t.has_error);
        assert_eq!(
            sexp(&t, &t.root),
            "(module (function_definition def identifier:f (parameters ( identifier:x )) : \
             (block (assignment identifier:total = identifier:x) (return_statement return identifier:total))))"
        );
        let roles: Vec<_> = t.identifiers().map(|n| (t.text(n), n.role.unwrap())).collect();
        assert_eq!(
            roles,
            [
                ("f", Role::FunctionName),
                ("x", Role::Param),
                ("total", Role::Store),
                ("x", Role::Load),
                ("total", Role::Load)
            ]
        );
    }

    #[test]
    fn broken_code_yields_error_node_and_continues() {
        let t = p("def f(:\n    return 1\nx = 2\n");
        assert!(t.has_error);
        assert!(t.root.walk().any(|n| n.kind == ERROR_KIND));
        assert!(t.root.walk().any(|n| n.kind == "assignment"));
    }

    #[test]
    fn deterministic() {
        let code = "for i in range(10):\n    if i % 2:\n        print(i)\n";
        assert_eq!(p(code), p(code));
    }

    #[test]
    fn unsupported_language() {
        assert!(matches!(parse_syntax("int x;", "java"), Err(Error::UnsupportedLanguage(_))));
    }

    #[test]
    fn broad_python_coverage_parses_cleanly() {
        let code = r#"
import os, sys as system
from collections import defaultdict as dd, Counter
from . import thing

@decorator(arg=1)
class Stack(Base, metaclass=Meta):
    """Docstring."""
    def __init__(self, *args, key=None, **kwargs) -> None:
        self.items = [a for a in args if a is not None]
        self.key: int = key or 0

    async def pop(self, /, idx: int = -1):
        async with lock as l:
            return await self.items.pop(idx)

def g(a, b=2, *rest, c, d=4, **kw):
    global counter
    counter += 1
    x, (y, *z) = a, (b, 1, 2)
    s = {k: v for k, v in kw.items() if v}
    t = {1, 2, 3}
    u = lambda p, q=1: p ** -q
    w = a if a > b else b
    del s[0], t
    assert w, "message"
    try:
        r = a[1:2, ::3][...]
    except (ValueError, KeyError) as err:
        raise RuntimeError("bad") from err
    except Exception:
        pass
    else:
        r = None
    finally:
        print(r, sep="", *rest, **kw)
    while not (a and b or c):
        break
    else:
        continue
    with open("f") as fh, open("g"):
        yield from fh
    if (n := len(rest)) > 10:
        return n
    elif n in rest or n not in kw or n is not None:
        return [*rest, *kw]
    return f"{a}" "b" 'c', ~a, a @ b, a // b, a >> 1 << 2 & 3 | 4 ^ 5
"#;
        let t = p(code);
        let errs: Vec<String> = t
            .root
            .walk()
            .filter(|n| n.kind == ERROR_KIND)
            .map(|n| t.text(n).to_string())
            .collect();
        assert!(errs.is_empty(), "unexpected errors: {errs:?}");
    }

    #[test]
    fn roles_for_targets_attributes_and_keywords() {
        let t = p("for k, v in d.items():\n    obj.attr = f(key=v)\n");
        let roles: Vec<_> = t.identifiers().map(|n| (t.text(n), n.role.unwrap())).collect();
        assert_eq!(
            roles,
            [
                ("k", Role::Store),
                ("v", Role::Store),
                ("d", Role::Load),
                ("items", Role::Attribute),
                ("obj", Role::Load),
                ("attr", Role::Attribute),
                ("f", Role::Load),
                ("key", Role::KeywordArg),
                ("v", Role::Load)
            ]
        );
    }

    #[test]
    fn pathological_nesting_does_not_overflow() {
        let code = "(".repeat(5000);
        let t = p(&code);
        assert!(t.has_error);
        let t = p(&"-".repeat(5000));
        assert!(t.has_error);
    }

    #[test]
    fn empty_program() {
        let t = p("");
        assert_eq!(t.root.kind, "module");
        assert!(t.root.is_leaf());
    }
}
