//! Token stream for the extractor: C tokens with comments removed and
//! conditional directives surfaced as single tokens.

use crate::ast::Directive;

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) enum TokKind {
    Ident(String),
    /// Literals, numbers and operators.
    Text(String),
    LBrace,
    RBrace,
    LParen,
    RParen,
    Semi,
    Colon,
    /// `#if`, `#ifdef`, `#ifndef`, `#elif`, `#else` with the condition text.
    Cond {
        directive: Directive,
        text: String,
    },
    Endif,
}

impl TokKind {
    pub(crate) fn text(&self) -> &str {
        match self {
            TokKind::Ident(s) | TokKind::Text(s) => s,
            TokKind::LBrace => "{",
            TokKind::RBrace => "}",
            TokKind::LParen => "(",
            TokKind::RParen => ")",
            TokKind::Semi => ";",
            TokKind::Colon => ":",
            TokKind::Cond { directive, .. } => directive.as_str(),
            TokKind::Endif => "#endif",
        }
    }

    pub(crate) fn is_ident(&self, word: &str) -> bool {
        matches!(self, TokKind::Ident(s) if s == word)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct Token {
    pub kind: TokKind,
    pub line: u32,
}

const OPERATORS: &[&str] = &[
    "<<=", ">>=", "...", "->", "++", "--", "<<", ">>", "<=", ">=", "==", "!=", "&&", "||", "+=", "-=", "*=", "/=",
    "%=", "&=", "|=", "^=", "##",
];

pub(crate) fn tokenize(src: &str) -> Vec<Token> {
    Lexer {
        src,
        bytes: src.as_bytes(),
        pos: 0,
        line: 1,
        line_start: true,
        out: Vec::new(),
    }
    .run()
}

struct Lexer<'a> {
    src: &'a str,
    bytes: &'a [u8],
    pos: usize,
    line: u32,
    /// Only whitespace seen since the last newline.
    line_start: bool,
    out: Vec<Token>,
}

impl Lexer<'_> {
    fn run(mut self) -> Vec<Token> {
        while self.pos < self.bytes.len() {
            let c = self.bytes[self.pos];
            match c {
                b'\n' => {
                    self.line += 1;
                    self.pos += 1;
                    self.line_start = true;
                }
                b' ' | b'\t' | b'\r' | 0x0b | 0x0c => self.pos += 1,
                b'\\' if self.peek(1) == Some(b'\n') => {
                    self.pos += 2;
                    self.line += 1;
                }
                b'\\' if self.peek(1) == Some(b'\r') && self.peek(2) == Some(b'\n') => {
                    self.pos += 3;
                    self.line += 1;
                }
                b'/' if self.peek(1) == Some(b'/') => self.skip_line_comment(),
                b'/' if self.peek(1) == Some(b'*') => self.skip_block_comment(),
                b'#' if self.line_start => self.directive(),
                _ => {
                    self.line_start = false;
                    self.code_token(c);
                }
            }
        }
        self.out
    }

    fn peek(&self, ahead: usize) -> Option<u8> {
        self.bytes.get(self.pos + ahead).copied()
    }

    fn push(&mut self, kind: TokKind, line: u32) {
        self.out.push(Token { kind, line });
    }

    fn skip_line_comment(&mut self) {
        while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
            if self.bytes[self.pos] == b'\\' && self.peek(1) == Some(b'\n') {
                self.pos += 2;
                self.line += 1;
            } else {
                self.pos += 1;
            }
        }
    }

    fn skip_block_comment(&mut self) {
        self.pos += 2;
        while self.pos < self.bytes.len() {
            if self.bytes[self.pos] == b'*' && self.peek(1) == Some(b'/') {
                self.pos += 2;
                return;
            }
            if self.bytes[self.pos] == b'\n' {
                self.line += 1;
            }
            self.pos += 1;
        }
    }

    fn code_token(&mut self, c: u8) {
        let line = self.line;
        let start = self.pos;
        let kind = match c {
            b'{' => Some(TokKind::LBrace),
            b'}' => Some(TokKind::RBrace),
            b'(' => Some(TokKind::LParen),
            b')' => Some(TokKind::RParen),
            b';' => Some(TokKind::Semi),
            b':' => Some(TokKind::Colon),
            _ => None,
        };
        if let Some(kind) = kind {
            self.pos += 1;
            self.push(kind, line);
            return;
        }
        if c.is_ascii_alphabetic() || c == b'_' || c >= 0x80 {
            while self.pos < self.bytes.len() {
                let b = self.bytes[self.pos];
                if b.is_ascii_alphanumeric() || b == b'_' || b >= 0x80 {
                    self.pos += 1;
                } else {
                    break;
                }
            }
            // Non-ASCII bytes only ever extend identifiers, so slicing stays on
            // char boundaries.
            let word = self.src[start..self.pos].to_string();
            self.push(TokKind::Ident(word), line);
        } else if c.is_ascii_digit() || (c == b'.' && self.peek(1).is_some_and(|b| b.is_ascii_digit())) {
            self.pos += 1;
            while self.pos < self.bytes.len() {
                let b = self.bytes[self.pos];
                let prev = self.bytes[self.pos - 1];
                let exponent_sign = (b == b'+' || b == b'-') && matches!(prev, b'e' | b'E' | b'p' | b'P');
                if !(b.is_ascii_alphanumeric() || b == b'_' || b == b'.' || exponent_sign) {
                    break;
                }
                self.pos += 1;
            }
            let text = self.src[start..self.pos].to_string();
            self.push(TokKind::Text(text), line);
        } else if c == b'"' || c == b'\'' {
            self.literal(c);
            let text = self.src[start..self.pos].to_string();
            self.push(TokKind::Text(text), line);
        } else {
            let rest = &self.src[self.pos..];
            let len = OPERATORS
                .iter()
                .find(|op| rest.starts_with(*op))
                .map(|op| op.len())
                .unwrap_or_else(|| rest.chars().next().map_or(1, char::len_utf8));
            self.pos += len;
            let text = self.src[start..self.pos].to_string();
            self.push(TokKind::Text(text), line);
        }
    }

    /// String or character literal; an unterminated literal ends at the newline.
    fn literal(&mut self, quote: u8) {
        self.pos += 1;
        while self.pos < self.bytes.len() {
            match self.bytes[self.pos] {
                b'\\' => {
                    self.pos += 1;
                    if let Some(ch) = self.src.get(self.pos..).and_then(|s| s.chars().next()) {
                        if ch == '\n' {
                            self.line += 1;
                        }
                        self.pos += ch.len_utf8();
                    }
                }
                b'\n' => return,
                b if b == quote => {
                    self.pos += 1;
                    return;
                }
                _ => self.pos += 1,
            }
        }
        self.pos = self.pos.min(self.bytes.len());
    }

    /// Reads one logical directive line (joining `\` continuations and
    /// dropping comments) and emits a token for conditional directives.
    fn directive(&mut self) {
        let line = self.line;
        self.pos += 1;
        let mut text = String::new();
        while self.pos < self.bytes.len() {
            let c = self.bytes[self.pos];
            match c {
                b'\n' => break,
                b'\\' if self.peek(1) == Some(b'\n') => {
                    self.pos += 2;
                    self.line += 1;
                    text.push(' ');
                }
                b'\\' if self.peek(1) == Some(b'\r') && self.peek(2) == Some(b'\n') => {
                    self.pos += 3;
                    self.line += 1;
                    text.push(' ');
                }
                b'/' if self.peek(1) == Some(b'/') => self.skip_line_comment(),
                b'/' if self.peek(1) == Some(b'*') => {
                    self.skip_block_comment();
                    text.push(' ');
                }
                _ => {
                    let ch = self.src[self.pos..].chars().next().unwrap_or(' ');
                    text.push(ch);
                    self.pos += ch.len_utf8();
                }
            }
        }
        let body = text.trim_start();
        let keyword_len = body
            .find(|c: char| !(c.is_ascii_alphanumeric() || c == '_'))
            .unwrap_or(body.len());
        let (keyword, rest) = body.split_at(keyword_len);
        let rest = rest.trim().to_string();
        let kind = match keyword {
            "if" => Some((Directive::If, rest)),
            "ifdef" => Some((Directive::Ifdef, rest)),
            "ifndef" => Some((Directive::Ifndef, rest)),
            "elif" => Some((Directive::Elif, rest)),
            "elifdef" => Some((Directive::Elif, format!("defined({rest})"))),
            "elifndef" => Some((Directive::Elif, format!("!defined({rest})"))),
            "else" => Some((Directive::Else, String::new())),
            "endif" => {
                self.push(TokKind::Endif, line);
                None
            }
            _ => None,
        };
        if let Some((directive, text)) = kind {
            self.push(TokKind::Cond { directive, text }, line);
        }
    }
}

/// Joins token texts into readable unparsed code.
pub(crate) fn join_tokens<'a, I>(toks: I) -> String
where
    I: IntoIterator<Item = &'a str>,
{
    let mut out = String::new();
    let mut prev: Option<&str> = None;
    for tok in toks {
        if let Some(p) = prev {
            let glue = matches!(tok, ")" | "]" | ";" | "," | "(" | "[" | ":")
                || matches!(p, "(" | "[")
                || matches!(tok, "++" | "--") && is_word(p);
            let spaced = !glue || (tok == "(" && (!is_word(p) || KEYWORDS_BEFORE_PAREN.contains(&p)));
            if spaced {
                out.push(' ');
            }
        }
        out.push_str(tok);
        prev = Some(tok);
    }
    out
}

const KEYWORDS_BEFORE_PAREN: &[&str] = &["if", "while", "for", "switch", "return", "case"];

fn is_word(tok: &str) -> bool {
    tok.bytes()
        .next()
        .is_some_and(|b| b.is_ascii_alphanumeric() || b == b'_')
}
