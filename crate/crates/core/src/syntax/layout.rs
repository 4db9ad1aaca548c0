//! Turns scanner output into a logical-line token stream with synthetic
//! NEWLINE / INDENT / DEDENT tokens, following Python's layout rules:
//! brackets and trailing backslashes join physical lines, comments vanish.

use std::ops::Range;

use crate::tokenize::{RawToken, TokenKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum PKind {
    Name,
    Number,
    Str,
    Op,
    Other,
    Newline,
    Indent,
    Dedent,
    Eof,
}

#[derive(Debug, Clone)]
pub(crate) struct PTok {
    pub kind: PKind,
    pub span: Range<usize>,
}

const STATEMENT_ONLY: &[&str] = &[
    "def", "class", "return", "import", "while", "try", "except", "finally", "with", "pass",
    "break", "continue", "raise", "global", "nonlocal", "del", "assert", "elif",
];

fn line_starts(src: &str) -> Vec<usize> {
    std::iter::once(0)
        .chain(src.match_indices('\n').map(|(i, _)| i + 1))
        .collect()
}

fn line_of(starts: &[usize], offset: usize) -> usize {
    match starts.binary_search(&offset) {
        Ok(i) => i,
        Err(i) => i - 1,
    }
}

fn column(src: &str, line_start: usize, offset: usize) -> usize {
    let mut col = 0;
    for c in src[line_start..offset].chars() {
        col = if c == '\t' { (col / 8 + 1) * 8 } else { col + 1 };
    }
    col
}

pub(crate) fn layout(src: &str, raw: &[RawToken]) -> Vec<PTok> {
    let starts = line_starts(src);
    let mut out = Vec::with_capacity(raw.len() + 16);
    let mut depth = 0usize;
    let mut indents = vec![0usize];
    let mut in_line = false;
    let mut continuation = false;
    let mut last_line = 0usize;
    let mut last_end = 0usize;

    for tok in raw {
        if tok.kind == TokenKind::Comment {
            continue;
        }
        let text = &src[tok.span.clone()];
        if text == "\\" {
            continuation = true;
            continue;
        }
        let line = line_of(&starts, tok.span.start);
        if depth > 0 && line != last_line && STATEMENT_ONLY.contains(&text) {
            // An unclosed bracket would swallow the rest of the file; a keyword
            // that cannot occur inside brackets marks where the line really ended.
            depth = 0;
        }
        if in_line && depth == 0 && !continuation && line != last_line {
            out.push(PTok {
                kind: PKind::Newline,
                span: last_end..last_end,
            });
            in_line = false;
        }
        continuation = false;
        if !in_line {
            let col = column(src, starts[line], tok.span.start);
            let at = tok.span.start..tok.span.start;
            if col > *indents.last().unwrap() {
                indents.push(col);
                out.push(PTok { kind: PKind::Indent, span: at });
            } else {
                while col < *indents.last().unwrap() {
                    indents.pop();
                    out.push(PTok { kind: PKind::Dedent, span: at.clone() });
                }
                if col > *indents.last().unwrap() {
                    // Inconsistent dedent: treat the new column as its own level.
                    indents.push(col);
                    out.push(PTok { kind: PKind::Indent, span: at });
                }
            }
            in_line = true;
        }
        let kind = match tok.kind {
            TokenKind::Identifier => PKind::Name,
            TokenKind::Number => PKind::Number,
            TokenKind::String => PKind::Str,
            TokenKind::Punct => PKind::Op,
            TokenKind::Other | TokenKind::Comment => PKind::Other,
        };
        if kind == PKind::Op {
            match text {
                "(" | "[" | "{" => depth += 1,
                ")" | "]" | "}" => depth = depth.saturating_sub(1),
                _ => {}
            }
        }
        out.push(PTok { kind, span: tok.span.clone() });
        last_line = line_of(&starts, tok.span.end.saturating_sub(1).max(tok.span.start));
        last_end = tok.span.end;
    }
    if in_line {
        out.push(PTok {
            kind: PKind::Newline,
            span: last_end..last_end,
        });
    }
    for _ in 1..indents.len() {
        out.push(PTok {
            kind: PKind::Dedent,
            span: last_end..last_end,
        });
    }
    out.push(PTok {
        kind: PKind::Eof,
        span: src.len()..src.len(),
    });
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tokenize::scan;

    fn kinds(src: &str) -> Vec<String> {
        layout(src, &scan(src, "python"))
            .into_iter()
            .map(|t| match t.kind {
                PKind::Newline => "NL".to_string(),
                PKind::Indent => "IN".to_string(),
                PKind::Dedent => "DE".to_string(),
                PKind::Eof => "EOF".to_string(),
                _ => src[t.span].to_string(),
            })
            .collect()
    }

    #[test]
    fn indentation_and_newlines() {
        assert_eq!(
            kinds("def f(x):\n    y = x\n    return y\nz = 1\n"),
            [
                "def", "f", "(", "x", ")", ":", "NL", "IN", "y", "=", "x", "NL", "return", "y", "NL",
                "DE", "z", "=", "1", "NL", "EOF"
            ]
        );
    }

    #[test]
    fn brackets_and_backslash_join_lines() {
        assert_eq!(kinds("x = (1,\n  2)\ny = 1 + \\\n  2"), [
            "x", "=", "(", "1", ",", "2", ")", "NL", "y", "=", "1", "+", "2", "NL", "EOF"
        ]);
    }

    #[test]
    fn comments_and_blank_lines_ignored() {
        assert_eq!(kinds("# c\n\nx = 1  # t\n\n   # indented comment\ny"), [
            "x", "=", "1", "NL", "y", "NL", "EOF"
        ]);
    }

    #[test]
    fn unclosed_bracket_stops_at_statement_keyword() {
        assert_eq!(kinds("f(\nreturn 1"), ["f", "(", "NL", "return", "1", "NL", "EOF"]);
    }

    #[test]
    fn closes_open_blocks_at_eof() {
        assert_eq!(kinds("if a:\n  if b:\n    c"), [
            "if", "a", ":", "NL", "IN", "if", "b", ":", "NL", "IN", "c", "NL", "DE", "DE", "EOF"
        ]);
    }
}
