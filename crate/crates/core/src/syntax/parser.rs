//! Recursive-descent parser over the layout token stream.

use super::layout::{PKind, PTok};
use super::{Node, Role, ERROR_KIND};

const KEYWORDS: &[&str] = &[
    "False", "None", "True", "and", "as", "assert", "async", "await", "break", "class", "continue",
    "def", "del", "elif", "else", "except", "finally", "for", "from", "global", "if", "import",
    "in", "is", "lambda", "nonlocal", "not", "or", "pass", "raise", "return", "try", "while",
    "with", "yield",
];

const OPS: &[&str] = &[
    "**=", "//=", ">>=", "<<=", "...", "->", ":=", "==", "!=", "<=", ">=", "**", "//", "<<", ">>",
    "+=", "-=", "*=", "/=", "%=", "&=", "|=", "^=", "@=", "<>", "+", "-", "*", "/", "%", "@", "&",
    "|", "^", "~", "<", ">", "(", ")", "[", "]", "{", "}", ",", ":", ";", ".", "=", "!", "\\", "$",
    "?", "`", "#", "'", "\"",
];

const AUG_ASSIGN: &[&str] = &[
    "+=", "-=", "*=", "/=", "//=", "%=", "**=", ">>=", "<<=", "&=", "|=", "^=", "@=",
];

const COMPARE_OPS: &[&str] = &["<", ">", "==", ">=", "<=", "!=", "<>"];

const BINARY_LEVELS: &[&[&str]] = &[
    &["|"],
    &["^"],
    &["&"],
    &["<<", ">>"],
    &["+", "-"],
    &["*", "/", "//", "%", "@"],
];

const MAX_DEPTH: usize = 100;

fn lookup(list: &[&'static str], text: &str) -> Option<&'static str> {
    list.iter().copied().find(|s| *s == text)
}

fn is_keyword(text: &str) -> bool {
    KEYWORDS.contains(&text)
}

type PResult<T = Node> = Result<T, ()>;

pub(crate) fn parse_module(src: &str, toks: Vec<PTok>) -> (Node, bool) {
    let mut p = Parser {
        src,
        toks,
        pos: 0,
        depth: 0,
        errors: false,
    };
    let mut stmts = Vec::new();
    loop {
        match p.kind() {
            PKind::Eof => break,
            PKind::Newline | PKind::Dedent => {
                p.advance();
            }
            PKind::Indent => stmts.push(p.stray_block()),
            _ => stmts.extend(p.statement()),
        }
    }
    let mut root = Node::branch("module", stmts);
    root.span = 0..src.len();
    (root, p.errors)
}

struct Parser<'a> {
    src: &'a str,
    toks: Vec<PTok>,
    pos: usize,
    depth: usize,
    errors: bool,
}

fn mark_store(n: &mut Node) {
    match n.kind {
        "identifier" => n.role = Some(Role::Store),
        "expression_list" | "tuple" | "list" | "parenthesized_expression" | "list_splat" => {
            n.children.iter_mut().for_each(mark_store)
        }
        _ => {}
    }
}

impl<'a> Parser<'a> {
    fn tok(&self) -> &PTok {
        &self.toks[self.pos]
    }

    fn kind(&self) -> PKind {
        self.tok().kind
    }

    fn text(&self) -> &'a str {
        &self.src[self.tok().span.clone()]
    }

    fn text_at(&self, k: usize) -> &'a str {
        let t = &self.toks[(self.pos + k).min(self.toks.len() - 1)];
        &self.src[t.span.clone()]
    }

    fn kind_at(&self, k: usize) -> PKind {
        self.toks[(self.pos + k).min(self.toks.len() - 1)].kind
    }

    fn advance(&mut self) {
        if self.kind() != PKind::Eof {
            self.pos += 1;
        }
    }

    fn at_op(&self, s: &str) -> bool {
        self.kind() == PKind::Op && self.text() == s
    }

    fn at_kw(&self, s: &str) -> bool {
        self.kind() == PKind::Name && self.text() == s
    }

    fn at_name(&self) -> bool {
        self.kind() == PKind::Name && !is_keyword(self.text())
    }

    fn at_simple_end(&self) -> bool {
        matches!(self.kind(), PKind::Newline | PKind::Eof) || self.at_op(";")
    }

    /// Consume the current token as a leaf.
    fn leaf(&mut self) -> Node {
        let t = self.tok().clone();
        let text = &self.src[t.span.clone()];
        let mut node = match t.kind {
            PKind::Name => match lookup(KEYWORDS, text) {
                Some(kw) => Node::leaf(kw, t.span),
                None => {
                    let mut n = Node::leaf("identifier", t.span);
                    n.role = Some(Role::Load);
                    n
                }
            },
            PKind::Number => Node::leaf("number", t.span),
            PKind::Str => Node::leaf("string", t.span),
            PKind::Op => Node::leaf(lookup(OPS, text).unwrap_or("punct"), t.span),
            _ => Node::leaf("other", t.span),
        };
        if node.kind == "other" && t.kind == PKind::Other {
            node.kind = "other";
        }
        self.advance();
        node
    }

    fn expect_op(&mut self, s: &str) -> PResult {
        if self.at_op(s) {
            Ok(self.leaf())
        } else {
            Err(())
        }
    }

    fn expect_kw(&mut self, s: &str) -> PResult {
        if self.at_kw(s) {
            Ok(self.leaf())
        } else {
            Err(())
        }
    }

    fn expect_name(&mut self, role: Role) -> PResult {
        if self.at_name() {
            let mut n = self.leaf();
            n.role = Some(role);
            Ok(n)
        } else {
            Err(())
        }
    }

    fn guarded(&mut self, f: impl FnOnce(&mut Self) -> PResult) -> PResult {
        self.depth += 1;
        let r = if self.depth > MAX_DEPTH { Err(()) } else { f(self) };
        self.depth -= 1;
        r
    }

    // ---- statements -------------------------------------------------------

    fn stray_block(&mut self) -> Node {
        self.errors = true;
        let at = self.tok().span.clone();
        self.advance();
        let body = self.block_statements();
        let mut n = Node::branch(ERROR_KIND, body);
        if n.children.is_empty() {
            n.span = at;
        }
        n
    }

    fn block_statements(&mut self) -> Vec<Node> {
        let mut out = Vec::new();
        loop {
            match self.kind() {
                PKind::Dedent => {
                    self.advance();
                    break;
                }
                PKind::Eof => break,
                PKind::Newline => self.advance(),
                PKind::Indent => out.push(self.stray_block()),
                _ => out.extend(self.statement()),
            }
        }
        out
    }

    fn statement(&mut self) -> Vec<Node> {
        let start = self.pos;
        let r = if self.depth > MAX_DEPTH {
            Err(())
        } else {
            self.depth += 1;
            let r = self.statement_inner();
            self.depth -= 1;
            r
        };
        match r {
            Ok(v) => v,
            Err(()) => {
                self.pos = start;
                vec![self.recover()]
            }
        }
    }

    /// Skip to the end of the logical line, wrapping skipped tokens in ERROR.
    fn recover(&mut self) -> Node {
        self.errors = true;
        let at = self.tok().span.clone();
        let mut leaves = Vec::new();
        while !matches!(self.kind(), PKind::Newline | PKind::Eof | PKind::Indent | PKind::Dedent) {
            leaves.push(self.leaf());
        }
        if self.kind() == PKind::Newline {
            self.advance();
        }
        let mut n = Node::branch(ERROR_KIND, leaves);
        if n.children.is_empty() {
            n.span = at;
        }
        n
    }

    fn statement_inner(&mut self) -> PResult<Vec<Node>> {
        if self.at_op("@") {
            return Ok(vec![self.decorated()?]);
        }
        if self.kind() == PKind::Name {
            let compound = match self.text() {
                "def" => Some(self.function_def(None)?),
                "class" => Some(self.class_def()?),
                "if" => Some(self.if_statement()?),
                "for" => Some(self.for_statement(None)?),
                "while" => Some(self.while_statement()?),
                "try" => Some(self.try_statement()?),
                "with" => Some(self.with_statement(None)?),
                "async" if matches!(self.text_at(1), "def" | "for" | "with") => {
                    let a = self.leaf();
                    Some(match self.text() {
                        "def" => self.function_def(Some(a))?,
                        "for" => self.for_statement(Some(a))?,
                        _ => self.with_statement(Some(a))?,
                    })
                }
                _ => None,
            };
            if let Some(c) = compound {
                return Ok(vec![c]);
            }
        }
        self.simple_statements()
    }

    fn simple_statements(&mut self) -> PResult<Vec<Node>> {
        let mut out = vec![self.small_statement()?];
        while self.at_op(";") {
            self.leaf();
            if matches!(self.kind(), PKind::Newline | PKind::Eof) {
                break;
            }
            out.push(self.small_statement()?);
        }
        match self.kind() {
            PKind::Newline => {
                self.advance();
                Ok(out)
            }
            PKind::Eof => Ok(out),
            _ => Err(()),
        }
    }

    fn keyword_only(&mut self, kind: &'static str) -> PResult {
        Ok(Node::branch(kind, vec![self.leaf()]))
    }

    fn small_statement(&mut self) -> PResult {
        if self.kind() == PKind::Name {
            match self.text() {
                "pass" => return self.keyword_only("pass_statement"),
                "break" => return self.keyword_only("break_statement"),
                "continue" => return self.keyword_only("continue_statement"),
                "return" => {
                    let mut ch = vec![self.leaf()];
                    if !self.at_simple_end() {
                        ch.push(self.star_expressions()?);
                    }
                    return Ok(Node::branch("return_statement", ch));
                }
                "raise" => {
                    let mut ch = vec![self.leaf()];
                    if !self.at_simple_end() {
                        ch.push(self.expression()?);
                        if self.at_kw("from") {
                            ch.push(self.leaf());
                            ch.push(self.expression()?);
                        }
                    }
                    return Ok(Node::branch("raise_statement", ch));
                }
                "global" | "nonlocal" => {
                    let kind = if self.text() == "global" {
                        "global_statement"
                    } else {
                        "nonlocal_statement"
                    };
                    let mut ch = vec![self.leaf(), self.expect_name(Role::Load)?];
                    while self.at_op(",") {
                        ch.push(self.leaf());
                        ch.push(self.expect_name(Role::Load)?);
                    }
                    return Ok(Node::branch(kind, ch));
                }
                "del" => {
                    let ch = vec![self.leaf(), self.star_expressions()?];
                    return Ok(Node::branch("delete_statement", ch));
                }
                "assert" => {
                    let mut ch = vec![self.leaf(), self.expression()?];
                    if self.at_op(",") {
                        ch.push(self.leaf());
                        ch.push(self.expression()?);
                    }
                    return Ok(Node::branch("assert_statement", ch));
                }
                "import" => return self.import_statement(),
                "from" => return self.import_from(),
                _ => {}
            }
        }
        self.expression_statement()
    }

    fn dotted_name(&mut self) -> PResult {
        let mut ch = vec![self.expect_name(Role::Import)?];
        while self.at_op(".") {
            ch.push(self.leaf());
            ch.push(self.expect_name(Role::Import)?);
        }
        Ok(Node::branch("dotted_name", ch))
    }

    fn maybe_alias(&mut self, name: Node) -> PResult {
        if self.at_kw("as") {
            let as_kw = self.leaf();
            let alias = self.expect_name(Role::Import)?;
            Ok(Node::branch("aliased_import", vec![name, as_kw, alias]))
        } else {
            Ok(name)
        }
    }

    fn import_statement(&mut self) -> PResult {
        let mut ch = vec![self.leaf()];
        loop {
            let name = self.dotted_name()?;
            ch.push(self.maybe_alias(name)?);
            if !self.at_op(",") {
                break;
            }
            ch.push(self.leaf());
        }
        Ok(Node::branch("import_statement", ch))
    }

    fn import_from(&mut self) -> PResult {
        let mut ch = vec![self.leaf()];
        let mut module = Vec::new();
        while self.at_op(".") || self.at_op("...") {
            module.push(self.leaf());
        }
        if self.at_name() {
            module.push(self.dotted_name()?);
        }
        if module.is_empty() {
            return Err(());
        }
        ch.push(Node::branch("relative_import", module));
        ch.push(self.expect_kw("import")?);
        if self.at_op("*") {
            ch.push(Node::branch("wildcard_import", vec![self.leaf()]));
            return Ok(Node::branch("import_from_statement", ch));
        }
        let paren = self.at_op("(");
        if paren {
            ch.push(self.leaf());
        }
        loop {
            let name = self.dotted_name()?;
            ch.push(self.maybe_alias(name)?);
            if !self.at_op(",") {
                break;
            }
            ch.push(self.leaf());
            if paren && self.at_op(")") {
                break;
            }
        }
        if paren {
            ch.push(self.expect_op(")")?);
        }
        Ok(Node::branch("import_from_statement", ch))
    }

    fn assignment_value(&mut self) -> PResult {
        if self.at_kw("yield") {
            self.yield_expression()
        } else {
            self.star_expressions()
        }
    }

    fn expression_statement(&mut self) -> PResult {
        let mut first = self.assignment_value()?;
        if self.at_op("=") {
            let mut parts = vec![first];
            while self.at_op("=") {
                parts.push(self.leaf());
                parts.push(self.assignment_value()?);
            }
            let mut value = parts.pop().unwrap();
            while let Some(eq) = parts.pop() {
                let mut target = parts.pop().unwrap();
                mark_store(&mut target);
                value = Node::branch("assignment", vec![target, eq, value]);
            }
            return Ok(value);
        }
        if self.kind() == PKind::Op && AUG_ASSIGN.contains(&self.text()) {
            let op = self.leaf();
            let value = self.assignment_value()?;
            mark_store(&mut first);
            return Ok(Node::branch("augmented_assignment", vec![first, op, value]));
        }
        if self.at_op(":") {
            let colon = self.leaf();
            let ty = self.expression()?;
            mark_store(&mut first);
            let mut ch = vec![first, colon, ty];
            if self.at_op("=") {
                ch.push(self.leaf());
                ch.push(self.assignment_value()?);
            }
            return Ok(Node::branch("assignment", ch));
        }
        Ok(Node::branch("expression_statement", vec![first]))
    }

    fn block(&mut self) -> PResult {
        if self.kind() == PKind::Newline {
            self.advance();
            if self.kind() != PKind::Indent {
                return Err(());
            }
            self.advance();
            let stmts = self.block_statements();
            if stmts.is_empty() {
                return Err(());
            }
            Ok(Node::branch("block", stmts))
        } else {
            Ok(Node::branch("block", self.simple_statements()?))
        }
    }

    fn colon_block(&mut self, ch: &mut Vec<Node>) -> PResult<()> {
        ch.push(self.expect_op(":")?);
        ch.push(self.block()?);
        Ok(())
    }

    fn else_clause(&mut self) -> PResult {
        let mut ch = vec![self.leaf()];
        self.colon_block(&mut ch)?;
        Ok(Node::branch("else_clause", ch))
    }

    fn decorated(&mut self) -> PResult {
        let mut ch = Vec::new();
        while self.at_op("@") {
            let at = self.leaf();
            let expr = self.expression()?;
            if self.kind() != PKind::Newline {
                return Err(());
            }
            self.advance();
            ch.push(Node::branch("decorator", vec![at, expr]));
        }
        let def = match self.text() {
            "def" => self.function_def(None)?,
            "class" => self.class_def()?,
            "async" if self.text_at(1) == "def" => {
                let a = self.leaf();
                self.function_def(Some(a))?
            }
            _ => return Err(()),
        };
        ch.push(def);
        Ok(Node::branch("decorated_definition", ch))
    }

    fn function_def(&mut self, async_kw: Option<Node>) -> PResult {
        let mut ch: Vec<Node> = async_kw.into_iter().collect();
        ch.push(self.expect_kw("def")?);
        ch.push(self.expect_name(Role::FunctionName)?);
        ch.push(self.parameters()?);
        if self.at_op("->") {
            ch.push(self.leaf());
            ch.push(self.expression()?);
        }
        self.colon_block(&mut ch)?;
        Ok(Node::branch("function_definition", ch))
    }

    fn parameters(&mut self) -> PResult {
        let mut ch = vec![self.expect_op("(")?];
        while !self.at_op(")") {
            ch.push(self.parameter(true)?);
            if self.at_op(",") {
                ch.push(self.leaf());
            } else {
                break;
            }
        }
        ch.push(self.expect_op(")")?);
        Ok(Node::branch("parameters", ch))
    }

    fn parameter(&mut self, annotations: bool) -> PResult {
        if self.at_op("/") {
            return Ok(Node::branch("positional_separator", vec![self.leaf()]));
        }
        if self.at_op("*") || self.at_op("**") {
            let kind = if self.at_op("*") {
                "list_splat_pattern"
            } else {
                "dictionary_splat_pattern"
            };
            let star = self.leaf();
            if kind == "list_splat_pattern" && !self.at_name() {
                return Ok(Node::branch("keyword_separator", vec![star]));
            }
            let mut ch = vec![star, self.expect_name(Role::Param)?];
            if annotations && self.at_op(":") {
                ch.push(self.leaf());
                ch.push(self.expression()?);
            }
            return Ok(Node::branch(kind, ch));
        }
        let name = self.expect_name(Role::Param)?;
        let mut ch = vec![name];
        let mut typed = false;
        if annotations && self.at_op(":") {
            ch.push(self.leaf());
            ch.push(self.expression()?);
            typed = true;
        }
        if self.at_op("=") {
            ch.push(self.leaf());
            ch.push(self.expression()?);
            let kind = if typed {
                "typed_default_parameter"
            } else {
                "default_parameter"
            };
            return Ok(Node::branch(kind, ch));
        }
        if typed {
            return Ok(Node::branch("typed_parameter", ch));
        }
        Ok(ch.pop().unwrap())
    }

    fn class_def(&mut self) -> PResult {
        let mut ch = vec![self.expect_kw("class")?, self.expect_name(Role::ClassName)?];
        if self.at_op("(") {
            ch.push(self.argument_list()?);
        }
        self.colon_block(&mut ch)?;
        Ok(Node::branch("class_definition", ch))
    }

    fn if_statement(&mut self) -> PResult {
        let mut ch = vec![self.leaf(), self.expression()?];
        self.colon_block(&mut ch)?;
        while self.at_kw("elif") {
            let mut e = vec![self.leaf(), self.expression()?];
            self.colon_block(&mut e)?;
            ch.push(Node::branch("elif_clause", e));
        }
        if self.at_kw("else") {
            ch.push(self.else_clause()?);
        }
        Ok(Node::branch("if_statement", ch))
    }

    fn while_statement(&mut self) -> PResult {
        let mut ch = vec![self.leaf(), self.expression()?];
        self.colon_block(&mut ch)?;
        if self.at_kw("else") {
            ch.push(self.else_clause()?);
        }
        Ok(Node::branch("while_statement", ch))
    }

    fn for_statement(&mut self, async_kw: Option<Node>) -> PResult {
        let mut ch: Vec<Node> = async_kw.into_iter().collect();
        ch.push(self.expect_kw("for")?);
        ch.push(self.target_list()?);
        ch.push(self.expect_kw("in")?);
        ch.push(self.star_expressions()?);
        self.colon_block(&mut ch)?;
        if self.at_kw("else") {
            ch.push(self.else_clause()?);
        }
        Ok(Node::branch("for_statement", ch))
    }

    fn try_statement(&mut self) -> PResult {
        let mut ch = vec![self.leaf()];
        self.colon_block(&mut ch)?;
        let mut handlers = 0;
        while self.at_kw("except") {
            let mut e = vec![self.leaf()];
            if self.at_op("*") {
                e.push(self.leaf());
            }
            if !self.at_op(":") {
                e.push(self.expression()?);
                if self.at_kw("as") {
                    e.push(self.leaf());
                    e.push(self.expect_name(Role::Store)?);
                } else if self.at_op(",") {
                    e.push(self.leaf());
                    e.push(self.expression()?);
                }
            }
            self.colon_block(&mut e)?;
            ch.push(Node::branch("except_clause", e));
            handlers += 1;
        }
        if self.at_kw("else") {
            ch.push(self.else_clause()?);
        }
        if self.at_kw("finally") {
            let mut f = vec![self.leaf()];
            self.colon_block(&mut f)?;
            ch.push(Node::branch("finally_clause", f));
            handlers += 1;
        }
        if handlers == 0 {
            return Err(());
        }
        Ok(Node::branch("try_statement", ch))
    }

    fn with_statement(&mut self, async_kw: Option<Node>) -> PResult {
        let mut ch: Vec<Node> = async_kw.into_iter().collect();
        ch.push(self.expect_kw("with")?);
        loop {
            let mut item = vec![self.expression()?];
            if self.at_kw("as") {
                item.push(self.leaf());
                let mut target = self.star_or(Self::bitor)?;
                mark_store(&mut target);
                item.push(target);
            }
            ch.push(Node::branch("with_item", item));
            if !self.at_op(",") {
                break;
            }
            ch.push(self.leaf());
        }
        self.colon_block(&mut ch)?;
        Ok(Node::branch("with_statement", ch))
    }

    // ---- expressions ------------------------------------------------------

    fn can_start_expression(&self) -> bool {
        match self.kind() {
            PKind::Name => {
                let t = self.text();
                !is_keyword(t) || matches!(t, "None" | "True" | "False" | "lambda" | "not" | "await")
            }
            PKind::Number | PKind::Str => true,
            PKind::Op => matches!(self.text(), "(" | "[" | "{" | "-" | "+" | "~" | "*" | "..."),
            _ => false,
        }
    }

    fn star_or(&mut self, inner: fn(&mut Self) -> PResult) -> PResult {
        if self.at_op("*") {
            let star = self.leaf();
            let e = self.bitor()?;
            Ok(Node::branch("list_splat", vec![star, e]))
        } else {
            inner(self)
        }
    }

    /// Comma-separated expressions; a trailing comma or any comma makes a list.
    fn comma_list(&mut self, item: fn(&mut Self) -> PResult) -> PResult {
        let first = self.star_or(item)?;
        if !self.at_op(",") {
            return Ok(first);
        }
        let mut ch = vec![first];
        while self.at_op(",") {
            ch.push(self.leaf());
            if !self.can_start_expression() {
                break;
            }
            ch.push(self.star_or(item)?);
        }
        Ok(Node::branch("expression_list", ch))
    }

    fn star_expressions(&mut self) -> PResult {
        self.comma_list(Self::expression)
    }

    fn target_list(&mut self) -> PResult {
        let mut t = self.comma_list(Self::bitor)?;
        mark_store(&mut t);
        Ok(t)
    }

    fn yield_expression(&mut self) -> PResult {
        let mut ch = vec![self.leaf()];
        if self.at_kw("from") {
            ch.push(self.leaf());
            ch.push(self.expression()?);
        } else if self.can_start_expression() {
            ch.push(self.star_expressions()?);
        }
        Ok(Node::branch("yield", ch))
    }

    fn expression(&mut self) -> PResult {
        self.guarded(|p| {
            if p.at_kw("lambda") {
                return p.lambda();
            }
            if p.at_name() && p.kind_at(1) == PKind::Op && p.text_at(1) == ":=" {
                let mut name = p.leaf();
                name.role = Some(Role::Store);
                let op = p.leaf();
                let value = p.expression()?;
                return Ok(Node::branch("named_expression", vec![name, op, value]));
            }
            let test = p.or_test()?;
            if p.at_kw("if") {
                let if_kw = p.leaf();
                let cond = p.or_test()?;
                let else_kw = p.expect_kw("else")?;
                let other = p.expression()?;
                return Ok(Node::branch(
                    "conditional_expression",
                    vec![test, if_kw, cond, else_kw, other],
                ));
            }
            Ok(test)
        })
    }

    fn lambda(&mut self) -> PResult {
        let mut ch = vec![self.leaf()];
        if !self.at_op(":") {
            let mut params = Vec::new();
            loop {
                params.push(self.parameter(false)?);
                if !self.at_op(",") {
                    break;
                }
                params.push(self.leaf());
            }
            ch.push(Node::branch("lambda_parameters", params));
        }
        ch.push(self.expect_op(":")?);
        ch.push(self.expression()?);
        Ok(Node::branch("lambda", ch))
    }

    fn or_test(&mut self) -> PResult {
        let mut left = self.and_test()?;
        while self.at_kw("or") {
            let op = self.leaf();
            let right = self.and_test()?;
            left = Node::branch("boolean_operator", vec![left, op, right]);
        }
        Ok(left)
    }

    fn and_test(&mut self) -> PResult {
        let mut left = self.not_test()?;
        while self.at_kw("and") {
            let op = self.leaf();
            let right = self.not_test()?;
            left = Node::branch("boolean_operator", vec![left, op, right]);
        }
        Ok(left)
    }

    fn not_test(&mut self) -> PResult {
        if self.at_kw("not") {
            return self.guarded(|p| {
                let op = p.leaf();
                let e = p.not_test()?;
                Ok(Node::branch("not_operator", vec![op, e]))
            });
        }
        self.comparison()
    }

    fn comparison(&mut self) -> PResult {
        let first = self.bitor()?;
        let mut ch = vec![first];
        loop {
            if (self.kind() == PKind::Op && COMPARE_OPS.contains(&self.text())) || self.at_kw("in") {
                ch.push(self.leaf());
            } else if self.at_kw("not") && self.text_at(1) == "in" {
                ch.push(self.leaf());
                ch.push(self.leaf());
            } else if self.at_kw("is") {
                ch.push(self.leaf());
                if self.at_kw("not") {
                    ch.push(self.leaf());
                }
            } else {
                break;
            }
            ch.push(self.bitor()?);
        }
        if ch.len() == 1 {
            Ok(ch.pop().unwrap())
        } else {
            Ok(Node::branch("comparison_operator", ch))
        }
    }

    fn bitor(&mut self) -> PResult {
        self.binary_level(0)
    }

    fn binary_level(&mut self, level: usize) -> PResult {
        if level == BINARY_LEVELS.len() {
            return self.factor();
        }
        let mut left = self.binary_level(level + 1)?;
        while self.kind() == PKind::Op && BINARY_LEVELS[level].contains(&self.text()) {
            let op = self.leaf();
            let right = self.binary_level(level + 1)?;
            left = Node::branch("binary_operator", vec![left, op, right]);
        }
        Ok(left)
    }

    fn factor(&mut self) -> PResult {
        if self.kind() == PKind::Op && matches!(self.text(), "+" | "-" | "~") {
            return self.guarded(|p| {
                let op = p.leaf();
                let e = p.factor()?;
                Ok(Node::branch("unary_operator", vec![op, e]))
            });
        }
        self.power()
    }

    fn power(&mut self) -> PResult {
        let base = if self.at_kw("await") {
            let kw = self.leaf();
            let e = self.primary()?;
            Node::branch("await", vec![kw, e])
        } else {
            self.primary()?
        };
        if self.at_op("**") {
            let op = self.leaf();
            let exp = self.factor()?;
            return Ok(Node::branch("binary_operator", vec![base, op, exp]));
        }
        Ok(base)
    }

    fn primary(&mut self) -> PResult {
        let mut e = self.guarded(Self::atom)?;
        loop {
            if self.at_op(".") {
                let dot = self.leaf();
                let name = self.expect_name(Role::Attribute)?;
                e = Node::branch("attribute", vec![e, dot, name]);
            } else if self.at_op("(") {
                let args = self.argument_list()?;
                e = Node::branch("call", vec![e, args]);
            } else if self.at_op("[") {
                let mut ch = vec![e, self.leaf()];
                loop {
                    ch.push(self.slice_item()?);
                    if !self.at_op(",") {
                        break;
                    }
                    ch.push(self.leaf());
                    if self.at_op("]") {
                        break;
                    }
                }
                ch.push(self.expect_op("]")?);
                e = Node::branch("subscript", ch);
            } else {
                return Ok(e);
            }
        }
    }

    fn slice_item(&mut self) -> PResult {
        let mut ch = Vec::new();
        if !self.at_op(":") {
            let e = self.star_or(Self::expression)?;
            if !self.at_op(":") {
                return Ok(e);
            }
            ch.push(e);
        }
        ch.push(self.leaf());
        if !self.at_op(":") && !self.at_op("]") && !self.at_op(",") {
            ch.push(self.expression()?);
        }
        if self.at_op(":") {
            ch.push(self.leaf());
            if !self.at_op("]") && !self.at_op(",") {
                ch.push(self.expression()?);
            }
        }
        Ok(Node::branch("slice", ch))
    }

    fn argument_list(&mut self) -> PResult {
        let mut ch = vec![self.expect_op("(")?];
        while !self.at_op(")") {
            let arg = if self.at_op("*") || self.at_op("**") {
                let kind = if self.at_op("*") {
                    "list_splat"
                } else {
                    "dictionary_splat"
                };
                let star = self.leaf();
                Node::branch(kind, vec![star, self.expression()?])
            } else if self.at_name() && self.kind_at(1) == PKind::Op && self.text_at(1) == "=" {
                let name = self.expect_name(Role::KeywordArg)?;
                let eq = self.leaf();
                Node::branch("keyword_argument", vec![name, eq, self.expression()?])
            } else {
                let e = self.expression()?;
                if self.at_kw("for") || self.at_kw("async") {
                    let mut g = vec![e];
                    self.comprehension_clauses(&mut g)?;
                    Node::branch("generator_expression", g)
                } else {
                    e
                }
            };
            ch.push(arg);
            if self.at_op(",") {
                ch.push(self.leaf());
            } else {
                break;
            }
        }
        ch.push(self.expect_op(")")?);
        Ok(Node::branch("argument_list", ch))
    }

    fn comprehension_clauses(&mut self, out: &mut Vec<Node>) -> PResult<()> {
        let mut any = false;
        loop {
            if self.at_kw("for") || (self.at_kw("async") && self.text_at(1) == "for") {
                let mut ch = Vec::new();
                if self.at_kw("async") {
                    ch.push(self.leaf());
                }
                ch.push(self.leaf());
                ch.push(self.target_list()?);
                ch.push(self.expect_kw("in")?);
                ch.push(self.or_test()?);
                out.push(Node::branch("for_in_clause", ch));
                any = true;
            } else if any && self.at_kw("if") {
                let kw = self.leaf();
                let cond = self.or_test()?;
                out.push(Node::branch("if_clause", vec![kw, cond]));
            } else {
                break;
            }
        }
        if any {
            Ok(())
        } else {
            Err(())
        }
    }

    fn atom(&mut self) -> PResult {
        match self.kind() {
            PKind::Name => {
                let t = self.text();
                if matches!(t, "None" | "True" | "False") || !is_keyword(t) {
                    Ok(self.leaf())
                } else {
                    Err(())
                }
            }
            PKind::Number => Ok(self.leaf()),
            PKind::Str => {
                let first = self.leaf();
                if self.kind() != PKind::Str {
                    return Ok(first);
                }
                let mut ch = vec![first];
                while self.kind() == PKind::Str {
                    ch.push(self.leaf());
                }
                Ok(Node::branch("concatenated_string", ch))
            }
            PKind::Op => match self.text() {
                "..." => Ok(Node::branch("ellipsis", vec![self.leaf()])),
                "(" => self.paren_atom(),
                "[" => self.bracket_atom(),
                "{" => self.brace_atom(),
                _ => Err(()),
            },
            _ => Err(()),
        }
    }

    fn paren_atom(&mut self) -> PResult {
        let open = self.leaf();
        if self.at_op(")") {
            return Ok(Node::branch("tuple", vec![open, self.leaf()]));
        }
        if self.at_kw("yield") {
            let y = self.yield_expression()?;
            let close = self.expect_op(")")?;
            return Ok(Node::branch("parenthesized_expression", vec![open, y, close]));
        }
        let first = self.star_or(Self::expression)?;
        let mut ch = vec![open, first];
        if self.at_kw("for") || self.at_kw("async") {
            self.comprehension_clauses(&mut ch)?;
            ch.push(self.expect_op(")")?);
            return Ok(Node::branch("generator_expression", ch));
        }
        let mut tuple = false;
        while self.at_op(",") {
            tuple = true;
            ch.push(self.leaf());
            if self.at_op(")") {
                break;
            }
            ch.push(self.star_or(Self::expression)?);
        }
        ch.push(self.expect_op(")")?);
        Ok(Node::branch(
            if tuple { "tuple" } else { "parenthesized_expression" },
            ch,
        ))
    }

    fn bracket_atom(&mut self) -> PResult {
        let mut ch = vec![self.leaf()];
        if self.at_op("]") {
            ch.push(self.leaf());
            return Ok(Node::branch("list", ch));
        }
        ch.push(self.star_or(Self::expression)?);
        if self.at_kw("for") || self.at_kw("async") {
            self.comprehension_clauses(&mut ch)?;
            ch.push(self.expect_op("]")?);
            return Ok(Node::branch("list_comprehension", ch));
        }
        while self.at_op(",") {
            ch.push(self.leaf());
            if self.at_op("]") {
                break;
            }
            ch.push(self.star_or(Self::expression)?);
        }
        ch.push(self.expect_op("]")?);
        Ok(Node::branch("list", ch))
    }

    fn dict_item(&mut self) -> PResult {
        if self.at_op("**") {
            let star = self.leaf();
            return Ok(Node::branch("dictionary_splat", vec![star, self.bitor()?]));
        }
        let key = self.expression()?;
        let colon = self.expect_op(":")?;
        let value = self.expression()?;
        Ok(Node::branch("pair", vec![key, colon, value]))
    }

    fn brace_atom(&mut self) -> PResult {
        let mut ch = vec![self.leaf()];
        if self.at_op("}") {
            ch.push(self.leaf());
            return Ok(Node::branch("dictionary", ch));
        }
        let is_dict = self.at_op("**") || {
            // Look ahead: a dict item is `expr :`; parse the first expression to decide.
            let save = self.pos;
            let saved_errors = self.errors;
            let r = self.expression().is_ok() && self.at_op(":");
            self.pos = save;
            self.errors = saved_errors;
            r
        };
        if is_dict {
            ch.push(self.dict_item()?);
            if self.at_kw("for") || self.at_kw("async") {
                self.comprehension_clauses(&mut ch)?;
                ch.push(self.expect_op("}")?);
                return Ok(Node::branch("dictionary_comprehension", ch));
            }
            while self.at_op(",") {
                ch.push(self.leaf());
                if self.at_op("}") {
                    break;
                }
                ch.push(self.dict_item()?);
            }
            ch.push(self.expect_op("}")?);
            return Ok(Node::branch("dictionary", ch));
        }
        ch.push(self.star_or(Self::expression)?);
        if self.at_kw("for") || self.at_kw("async") {
            self.comprehension_clauses(&mut ch)?;
            ch.push(self.expect_op("}")?);
            return Ok(Node::branch("set_comprehension", ch));
        }
        while self.at_op(",") {
            ch.push(self.leaf());
            if self.at_op("}") {
                break;
            }
            ch.push(self.star_or(Self::expression)?);
        }
        ch.push(self.expect_op("}")?);
        Ok(Node::branch("set", ch))
    }
}
