//! Presence-condition formulas and the small parser that reads them out of
//! `#if` lines and model files.

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

/// Macros that wrap a single feature name, e.g. `IS_ENABLED(CONFIG_FOO)`.
const FEATURE_WRAPPERS: &[&str] = &["IS_ENABLED", "IS_BUILTIN", "IS_MODULE", "IS_REACHABLE"];

/// Propositional formula over feature atoms.
///
/// Anything that is not plain boolean structure (arithmetic, relational
/// operators, macro calls) is kept as an opaque [`VarExpr::Comparison`] that
/// still remembers which identifiers it mentions.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum VarExpr {
    True,
    False,
    Atom(String),
    Comparison { text: String, features: BTreeSet<String> },
    Not(Box<VarExpr>),
    And(Box<VarExpr>, Box<VarExpr>),
    Or(Box<VarExpr>, Box<VarExpr>),
}

impl VarExpr {
    pub fn atom(name: impl Into<String>) -> Self {
        VarExpr::Atom(name.into())
    }

    /// Negation; a double negation collapses.
    #[allow(clippy::should_implement_trait)]
    pub fn not(self) -> Self {
        match self {
            VarExpr::Not(inner) => *inner,
            other => VarExpr::Not(Box::new(other)),
        }
    }

    pub fn and(self, other: VarExpr) -> Self {
        VarExpr::And(Box::new(self), Box::new(other))
    }

    pub fn or(self, other: VarExpr) -> Self {
        VarExpr::Or(Box::new(self), Box::new(other))
    }

    /// Left-folded conjunction. `True` operands are dropped, so an empty
    /// input (or one made only of `True`) yields `True`.
    pub fn conjunction<I>(parts: I) -> VarExpr
    where
        I: IntoIterator<Item = VarExpr>,
    {
        parts
            .into_iter()
            .filter(|e| !e.is_true())
            .reduce(VarExpr::and)
            .unwrap_or(VarExpr::True)
    }

    pub fn is_true(&self) -> bool {
        matches!(self, VarExpr::True)
    }

    /// Every feature name mentioned by an atom or comparison, sorted.
    pub fn referenced_features(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_features(&mut out);
        out
    }

    pub fn collect_features(&self, out: &mut BTreeSet<String>) {
        match self {
            VarExpr::True | VarExpr::False => {}
            VarExpr::Atom(name) => {
                out.insert(name.clone());
            }
            VarExpr::Comparison { features, .. } => out.extend(features.iter().cloned()),
            VarExpr::Not(inner) => inner.collect_features(out),
            VarExpr::And(l, r) | VarExpr::Or(l, r) => {
                l.collect_features(out);
                r.collect_features(out);
            }
        }
    }

    /// Evaluates the formula. Atoms are looked up by name, comparisons by
    /// their normalized text.
    pub fn eval(&self, assignment: &impl Fn(&str) -> bool) -> bool {
        match self {
            VarExpr::True => true,
            VarExpr::False => false,
            VarExpr::Atom(name) => assignment(name),
            VarExpr::Comparison { text, .. } => assignment(text),
            VarExpr::Not(inner) => !inner.eval(assignment),
            VarExpr::And(l, r) => l.eval(assignment) && r.eval(assignment),
            VarExpr::Or(l, r) => l.eval(assignment) || r.eval(assignment),
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            VarExpr::Or(..) => 1,
            VarExpr::And(..) => 2,
            _ => 3,
        }
    }

    fn fmt_child(&self, child: &VarExpr, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if child.precedence() < self.precedence() {
            write!(f, "({child})")
        } else {
            write!(f, "{child}")
        }
    }
}

impl fmt::Display for VarExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            VarExpr::True => f.write_str("1"),
            VarExpr::False => f.write_str("0"),
            VarExpr::Atom(name) => f.write_str(name),
            // Parenthesized so the text never re-associates with its neighbours.
            VarExpr::Comparison { text, .. } => write!(f, "({text})"),
            VarExpr::Not(inner) => {
                f.write_str("!")?;
                if inner.precedence() < 3 {
                    write!(f, "({inner})")
                } else {
                    write!(f, "{inner}")
                }
            }
            VarExpr::And(l, r) => {
                self.fmt_child(l, f)?;
                f.write_str(" && ")?;
                // Right operands of equal precedence need parens to keep the tree shape.
                if r.precedence() <= self.precedence() {
                    write!(f, "({r})")
                } else {
                    write!(f, "{r}")
                }
            }
            VarExpr::Or(l, r) => {
                self.fmt_child(l, f)?;
                f.write_str(" || ")?;
                if r.precedence() <= self.precedence() {
                    write!(f, "({r})")
                } else {
                    write!(f, "{r}")
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExprError {
    #[error("empty condition")]
    Empty,
    #[error("unbalanced parentheses in `{0}`")]
    UnbalancedParens(String),
    #[error("unexpected `{token}` in `{text}`")]
    Unexpected { token: String, text: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Number(String),
    AndAnd,
    OrOr,
    Bang,
    LParen,
    RParen,
    Other(String),
}

impl Tok {
    fn text(&self) -> &str {
        match self {
            Tok::Ident(s) | Tok::Number(s) | Tok::Other(s) => s,
            Tok::AndAnd => "&&",
            Tok::OrOr => "||",
            Tok::Bang => "!",
            Tok::LParen => "(",
            Tok::RParen => ")",
        }
    }
}

fn lex(text: &str) -> Vec<Tok> {
    let bytes = text.as_bytes();
    let mut toks = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        if c.is_ascii_whitespace() {
            i += 1;
        } else if c.is_ascii_alphabetic() || c == b'_' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            toks.push(Tok::Ident(text[start..i].to_string()));
        } else if c.is_ascii_digit() {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            toks.push(Tok::Number(text[start..i].to_string()));
        } else {
            let two = text.get(i..i + 2);
            match (c, two) {
                (_, Some("&&")) => {
                    toks.push(Tok::AndAnd);
                    i += 2;
                }
                (_, Some("||")) => {
                    toks.push(Tok::OrOr);
                    i += 2;
                }
                (_, Some(op @ ("!=" | "==" | "<=" | ">=" | "<<" | ">>"))) => {
                    toks.push(Tok::Other(op.to_string()));
                    i += 2;
                }
                (b'!', _) => {
                    toks.push(Tok::Bang);
                    i += 1;
                }
                (b'(', _) => {
                    toks.push(Tok::LParen);
                    i += 1;
                }
                (b')', _) => {
                    toks.push(Tok::RParen);
                    i += 1;
                }
                _ => {
                    let ch = text[i..].chars().next().unwrap_or('?');
                    toks.push(Tok::Other(ch.to_string()));
                    i += ch.len_utf8();
                }
            }
        }
    }
    toks
}

/// Parses a condition as written after `#if`/`#elif`, or an expression in a
/// model file. `&&`, `||`, `!`, parentheses and `defined` are structural;
/// everything else collapses into comparison atoms.
pub fn parse_condition(text: &str) -> Result<VarExpr, ExprError> {
    let toks = lex(text);
    if toks.is_empty() {
        return Err(ExprError::Empty);
    }
    let mut parser = Parser {
        toks: &toks,
        pos: 0,
        source: text,
    };
    let expr = parser.parse_or()?;
    match parser.toks.get(parser.pos) {
        None => Ok(expr),
        Some(Tok::RParen) => Err(ExprError::UnbalancedParens(text.to_string())),
        Some(t) => Err(ExprError::Unexpected {
            token: t.text().to_string(),
            text: text.to_string(),
        }),
    }
}

struct Parser<'a> {
    toks: &'a [Tok],
    pos: usize,
    source: &'a str,
}

impl Parser<'_> {
    fn parse_or(&mut self) -> Result<VarExpr, ExprError> {
        let mut left = self.parse_and()?;
        while self.toks.get(self.pos) == Some(&Tok::OrOr) {
            self.pos += 1;
            let right = self.parse_and()?;
            left = left.or(right);
        }
        Ok(left)
    }

    fn parse_and(&mut self) -> Result<VarExpr, ExprError> {
        let mut left = self.parse_unary()?;
        while self.toks.get(self.pos) == Some(&Tok::AndAnd) {
            self.pos += 1;
            let right = self.parse_unary()?;
            left = left.and(right);
        }
        Ok(left)
    }

    fn parse_unary(&mut self) -> Result<VarExpr, ExprError> {
        if self.toks.get(self.pos) == Some(&Tok::Bang) {
            self.pos += 1;
            return Ok(self.parse_unary()?.not());
        }
        self.parse_primary()
    }

    fn parse_primary(&mut self) -> Result<VarExpr, ExprError> {
        let start = self.pos;
        let mut depth = 0usize;
        let mut end = start;
        while let Some(tok) = self.toks.get(end) {
            match tok {
                Tok::LParen => depth += 1,
                Tok::RParen if depth == 0 => break,
                Tok::RParen => depth -= 1,
                Tok::AndAnd | Tok::OrOr if depth == 0 => break,
                _ => {}
            }
            end += 1;
        }
        if depth != 0 {
            return Err(ExprError::UnbalancedParens(self.source.to_string()));
        }
        let chunk = &self.toks[start..end];
        self.pos = end;
        match chunk {
            [] => match self.toks.get(end) {
                Some(t) => Err(ExprError::Unexpected {
                    token: t.text().to_string(),
                    text: self.source.to_string(),
                }),
                None => Err(ExprError::Empty),
            },
            [Tok::LParen, inner @ .., Tok::RParen] if encloses(chunk) => {
                let mut sub = Parser {
                    toks: inner,
                    pos: 0,
                    source: self.source,
                };
                let expr = sub.parse_or()?;
                if sub.pos != inner.len() {
                    return Err(ExprError::Unexpected {
                        token: inner[sub.pos].text().to_string(),
                        text: self.source.to_string(),
                    });
                }
                Ok(expr)
            }
            [Tok::Ident(name)] if name != "defined" => Ok(VarExpr::atom(name.as_str())),
            [Tok::Ident(d), Tok::Ident(name)] if d == "defined" => Ok(VarExpr::atom(name.as_str())),
            [Tok::Ident(d), Tok::LParen, Tok::Ident(name), Tok::RParen]
                if d == "defined" || FEATURE_WRAPPERS.contains(&d.as_str()) =>
            {
                Ok(VarExpr::atom(name.as_str()))
            }
            [Tok::Number(n)] => Ok(match parse_int(n) {
                Some(0) => VarExpr::False,
                Some(_) => VarExpr::True,
                None => comparison(chunk),
            }),
            _ => Ok(comparison(chunk)),
        }
    }
}

/// True when the first `(` of `chunk` is closed by its last token.
fn encloses(chunk: &[Tok]) -> bool {
    let mut depth = 0usize;
    for (i, tok) in chunk.iter().enumerate() {
        match tok {
            Tok::LParen => depth += 1,
            Tok::RParen => {
                depth -= 1;
                if depth == 0 {
                    return i == chunk.len() - 1;
                }
            }
            _ => {}
        }
    }
    false
}

fn comparison(chunk: &[Tok]) -> VarExpr {
    let text = chunk.iter().map(Tok::text).collect::<Vec<_>>().join(" ");
    let features = chunk
        .iter()
        .filter_map(|t| match t {
            Tok::Ident(name) if name != "defined" && !FEATURE_WRAPPERS.contains(&name.as_str()) => Some(name.clone()),
            _ => None,
        })
        .collect();
    VarExpr::Comparison { text, features }
}

fn parse_int(literal: &str) -> Option<u64> {
    let trimmed = literal.trim_end_matches(['u', 'U', 'l', 'L']);
    if let Some(hex) = trimmed.strip_prefix("0x").or_else(|| trimmed.strip_prefix("0X")) {
        u64::from_str_radix(hex, 16).ok()
    } else {
        trimmed.parse().ok()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(names: &[&str]) -> BTreeSet<String> {
        names.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn defined_forms_become_atoms() {
        assert_eq!(parse_condition("defined(A)").unwrap(), VarExpr::atom("A"));
        assert_eq!(parse_condition("defined A").unwrap(), VarExpr::atom("A"));
        assert_eq!(
            parse_condition("IS_ENABLED(CONFIG_NET)").unwrap(),
            VarExpr::atom("CONFIG_NET")
        );
    }

    #[test]
    fn boolean_structure() {
        let e = parse_condition("!defined(A) && (B || C)").unwrap();
        assert_eq!(
            e,
            VarExpr::atom("A").not().and(VarExpr::atom("B").or(VarExpr::atom("C")))
        );
        assert_eq!(e.to_string(), "!A && (B || C)");
    }

    #[test]
    fn arithmetic_collapses_into_comparison() {
        let e = parse_condition("X > 2 || Y").unwrap();
        assert_eq!(e.referenced_features(), set(&["X", "Y"]));
        match e {
            VarExpr::Or(l, _) => assert!(matches!(*l, VarExpr::Comparison { .. })),
            other => panic!("unexpected {other:?}"),
        }
        let e = parse_condition("(A + 1) > defined(B)").unwrap();
        assert_eq!(e.referenced_features(), set(&["A", "B"]));
    }

    #[test]
    fn numeric_literals() {
        assert_eq!(parse_condition("0").unwrap(), VarExpr::False);
        assert_eq!(parse_condition("1").unwrap(), VarExpr::True);
        assert_eq!(parse_condition("0x10UL").unwrap(), VarExpr::True);
    }

    #[test]
    fn referenced_features_deduplicates() {
        let e = VarExpr::atom("A").and(VarExpr::atom("A").not());
        assert_eq!(e.referenced_features(), set(&["A"]));
        let cmp = VarExpr::Comparison {
            text: "X > 2".into(),
            features: set(&["X"]),
        };
        assert_eq!(cmp.or(VarExpr::atom("Y")).referenced_features(), set(&["X", "Y"]));
    }

    #[test]
    fn malformed_conditions() {
        assert_eq!(parse_condition("  "), Err(ExprError::Empty));
        assert!(matches!(
            parse_condition("(A && B"),
            Err(ExprError::UnbalancedParens(_))
        ));
        assert!(matches!(
            parse_condition("A && B)"),
            Err(ExprError::UnbalancedParens(_))
        ));
        assert!(parse_condition("A &&").is_err());
    }

    #[test]
    fn display_round_trips() {
        for src in [
            "A",
            "!A",
            "A && B && C",
            "A && (B && C)",
            "(A || B) && !(C || D)",
            "A || B && C",
            "!!A",
            "X == 3 && !(Y < 2)",
        ] {
            let e = parse_condition(src).unwrap();
            assert_eq!(parse_condition(&e.to_string()).unwrap(), e, "{src}");
        }
    }

    #[test]
    fn conjunction_drops_true() {
        assert_eq!(VarExpr::conjunction([]), VarExpr::True);
        assert_eq!(
            VarExpr::conjunction([VarExpr::True, VarExpr::atom("A"), VarExpr::True]),
            VarExpr::atom("A")
        );
        assert_eq!(
            VarExpr::conjunction([VarExpr::atom("A"), VarExpr::atom("B").not()]),
            VarExpr::atom("A").and(VarExpr::atom("B").not())
        );
    }
}
