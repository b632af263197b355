//! Single-pass builder turning the token stream into a [`CodeNode`] tree.
//!
//! Language structure is driven by braces and semicolons; conditional
//! directives become CppBlocks wherever they occur:
//!
//! * between statements they open a *structural* block that nests like any
//!   other frame;
//! * inside an unfinished statement or header they open a *fragment* block
//!   that is stored in the statement's fragment list (or, for headers, as a
//!   leading child of the branch/loop/function node).
//!
//! Braces that are opened in one branch of a structural group and closed
//! after the `#endif` are tracked as credit on the enclosing frame, and
//! braces closed inside a branch but opened before the group are applied
//! when the group ends. Every branch of a fragment group must leave the
//! statement in the same state.

use std::iter;

use super::lexer::{join_tokens, tokenize, TokKind, Token};
use super::ExtractError;
use crate::ast::{
    parse_condition, BranchKind, CodeNode, CppBlock, Directive, GroupId, LabelKind, LoopKind, NodeKind, VarExpr,
};

const NOT_FUNCTION_NAMES: &[&str] = &[
    "if",
    "while",
    "for",
    "switch",
    "return",
    "sizeof",
    "do",
    "else",
    "case",
    "default",
    "typedef",
    "struct",
    "union",
    "enum",
    "int",
    "char",
    "short",
    "long",
    "float",
    "double",
    "void",
    "signed",
    "unsigned",
    "const",
    "volatile",
    "static",
    "extern",
    "inline",
    "_Alignof",
    "__typeof__",
    "typeof",
    "__attribute__",
    "__declspec",
    "asm",
    "__asm__",
];

/// Parses one source file into a `SourceFile` tree.
pub fn extract_file(path: &str, text: &str) -> Result<CodeNode, ExtractError> {
    let line_count = text.lines().count().max(1) as u32;
    let mut builder = Builder::new(path);
    for token in tokenize(text) {
        builder.token(token)?;
    }
    builder.finish(line_count)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Terminator {
    Semi,
    Brace,
}

/// Net effect of one fragment branch on the statement it splits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
struct Outcome {
    paren: i32,
    brace: i32,
    terminator: Option<Terminator>,
}

/// Bookkeeping for one `#if ... #endif` chain.
#[derive(Debug)]
struct Chain {
    id: GroupId,
    prior: Vec<VarExpr>,
    next_sibling: u32,
    has_else: bool,
    open_line: u32,
}

impl Chain {
    fn new(id: GroupId, open_line: u32) -> Self {
        Chain {
            id,
            prior: Vec::new(),
            next_sibling: 0,
            has_else: false,
            open_line,
        }
    }

    fn block(&mut self, directive: Directive, raw: Option<VarExpr>, line: u32) -> Result<CppBlock, ExtractError> {
        if self.has_else {
            return Err(ExtractError::UnbalancedDirective {
                line,
                message: format!("{} after #else", directive.as_str()),
            });
        }
        let negations = self.prior.iter().map(|p| p.clone().not());
        let condition = match &raw {
            Some(own) => VarExpr::conjunction(negations.chain(iter::once(own.clone()))),
            None => VarExpr::conjunction(negations),
        };
        if directive == Directive::Else {
            self.has_else = true;
        }
        if let Some(own) = &raw {
            self.prior.push(own.clone());
        }
        let sibling_index = self.next_sibling;
        self.next_sibling += 1;
        Ok(CppBlock {
            directive,
            condition,
            raw_condition: raw,
            group_id: self.id,
            sibling_index,
        })
    }
}

/// Consecutive unguarded tokens that become one `UnparsedCode` node.
#[derive(Debug, Default)]
struct Run {
    toks: Vec<String>,
    start: u32,
    end: u32,
}

impl Run {
    fn push(&mut self, text: &str, line: u32) {
        if self.toks.is_empty() {
            self.start = line;
        }
        self.end = line;
        self.toks.push(text.to_string());
    }

    fn take_node(&mut self) -> Option<CodeNode> {
        if self.toks.is_empty() {
            return None;
        }
        let text = join_tokens(self.toks.iter().map(String::as_str));
        self.toks.clear();
        Some(CodeNode::new(NodeKind::UnparsedCode { text }, self.start, self.end))
    }
}

#[derive(Debug)]
struct FragBlock {
    block: CppBlock,
    start_line: u32,
    children: Vec<CodeNode>,
    run: Run,
    paren: i32,
    brace: i32,
    terminator: Option<Terminator>,
}

impl FragBlock {
    fn new(block: CppBlock, start_line: u32) -> Self {
        FragBlock {
            block,
            start_line,
            children: Vec::new(),
            run: Run::default(),
            paren: 0,
            brace: 0,
            terminator: None,
        }
    }

    fn flush_run(&mut self) {
        if let Some(node) = self.run.take_node() {
            self.children.push(node);
        }
    }

    fn finish(mut self, end_line: u32) -> (CodeNode, Outcome) {
        self.flush_run();
        let outcome = Outcome {
            paren: self.paren,
            brace: self.brace,
            terminator: self.terminator,
        };
        let node =
            CodeNode::new(NodeKind::CppBlock(self.block), self.start_line, end_line).with_children(self.children);
        (node, outcome)
    }
}

#[derive(Debug)]
struct FragGroup {
    chain: Chain,
    current: FragBlock,
    outcomes: Vec<Outcome>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ControlKind {
    If,
    ElseIf,
    Switch,
    While,
    For,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Head {
    Statement,
    Control(ControlKind),
    /// A lone `else` whose meaning depends on the next token.
    ElseStart,
    Label(LabelKind),
    /// `while (...);` closing a do-while loop.
    DoTail,
}

/// The statement or header currently being read.
#[derive(Debug)]
struct Pending {
    head: Head,
    start_line: u32,
    end_line: u32,
    /// Unguarded tokens only.
    words: Vec<TokKind>,
    fragments: Vec<CodeNode>,
    run: Run,
    paren: i32,
    brace: i32,
    seen_paren: bool,
}

impl Pending {
    fn new(head: Head, line: u32) -> Self {
        Pending {
            head,
            start_line: line,
            end_line: line,
            words: Vec::new(),
            fragments: Vec::new(),
            run: Run::default(),
            paren: 0,
            brace: 0,
            seen_paren: false,
        }
    }

    fn push(&mut self, kind: TokKind, line: u32) {
        self.end_line = self.end_line.max(line);
        self.run.push(kind.text(), line);
        self.words.push(kind);
    }

    fn flush_run(&mut self) {
        if let Some(node) = self.run.take_node() {
            self.fragments.push(node);
        }
    }

    fn header_text(&self) -> String {
        join_tokens(self.words.iter().map(TokKind::text))
    }

    fn header_complete(&self) -> bool {
        matches!(self.head, Head::Control(_)) && self.seen_paren && self.paren == 0
    }

    /// CppBlocks among the fragments; used as leading children of headers.
    fn take_header_blocks(&mut self) -> Vec<CodeNode> {
        std::mem::take(&mut self.fragments)
            .into_iter()
            .filter(|n| matches!(n.kind, NodeKind::CppBlock(_)))
            .collect()
    }

    fn into_statement(mut self) -> CodeNode {
        self.flush_run();
        CodeNode::new(
            NodeKind::SingleStatement {
                fragments: self.fragments,
            },
            self.start_line,
            self.end_line,
        )
    }
}

fn has_assignment(words: &[TokKind]) -> bool {
    let mut depth = 0i32;
    words.iter().any(|w| {
        match w {
            TokKind::LParen | TokKind::LBrace => depth += 1,
            TokKind::RParen | TokKind::RBrace => depth -= 1,
            _ => {}
        }
        depth == 0 && matches!(w, TokKind::Text(t) if t == "=")
    })
}

fn is_aggregate(words: &[TokKind]) -> bool {
    has_assignment(words)
        || words.first().is_some_and(|w| w.is_ident("typedef"))
        || words
            .iter()
            .take_while(|w| **w != TokKind::LParen)
            .any(|w| w.is_ident("struct") || w.is_ident("union") || w.is_ident("enum"))
}

/// Name of the function a top-level header defines, if it looks like one:
/// an identifier followed by a parenthesized parameter list, and no
/// initializer.
fn function_name(words: &[TokKind]) -> Option<String> {
    if has_assignment(words) {
        return None;
    }
    let mut i = 0;
    while i < words.len() {
        if words[i] == TokKind::LParen {
            match i.checked_sub(1).map(|p| &words[p]) {
                Some(TokKind::Ident(name)) if name.starts_with("__attribute") || name == "__declspec" => {
                    // Skip the attribute's argument list.
                    let mut depth = 0;
                    while i < words.len() {
                        match words[i] {
                            TokKind::LParen => depth += 1,
                            TokKind::RParen => {
                                depth -= 1;
                                if depth == 0 {
                                    break;
                                }
                            }
                            _ => {}
                        }
                        i += 1;
                    }
                }
                Some(TokKind::Ident(name)) if !NOT_FUNCTION_NAMES.contains(&name.as_str()) => {
                    return Some(name.clone());
                }
                _ => return None,
            }
        }
        i += 1;
    }
    None
}

#[derive(Debug)]
enum FrameKind {
    Root {
        path: String,
    },
    Function {
        name: String,
        header: String,
    },
    Branch {
        kind: BranchKind,
        header: String,
    },
    Loop {
        kind: LoopKind,
        header: String,
    },
    Cpp(CppBlock),
    /// Bare `{ ... }`; its children are spliced into the parent on close.
    Transparent,
}

#[derive(Debug)]
struct Frame {
    kind: FrameKind,
    start_line: u32,
    children: Vec<CodeNode>,
    braced: bool,
    /// `}` tokens to swallow because a conditional branch left them open.
    credit: u32,
    /// For CppBlock frames: `}` tokens in this branch that close frames
    /// opened before the group.
    borrowed: u32,
}

impl Frame {
    fn is_control(&self) -> bool {
        matches!(self.kind, FrameKind::Branch { .. } | FrameKind::Loop { .. })
    }

    fn is_do_loop(&self) -> bool {
        matches!(
            self.kind,
            FrameKind::Loop {
                kind: LoopKind::DoWhile,
                ..
            }
        )
    }

    fn into_nodes(self, end_line: u32, file: &str) -> Vec<CodeNode> {
        let end_line = end_line.max(self.start_line);
        let kind = match self.kind {
            FrameKind::Transparent => return self.children,
            FrameKind::Root { path } => NodeKind::SourceFile { path },
            FrameKind::Function { name, header } => NodeKind::Function {
                name,
                file: file.to_string(),
                header,
            },
            FrameKind::Branch { kind, header } => NodeKind::Branch { kind, header },
            FrameKind::Loop { kind, header } => NodeKind::Loop { kind, header },
            FrameKind::Cpp(block) => NodeKind::CppBlock(block),
        };
        vec![CodeNode::new(kind, self.start_line, end_line).with_children(self.children)]
    }
}

/// A header whose body has not started yet.
#[derive(Debug)]
struct Owner {
    kind: FrameKind,
    start_line: u32,
    children: Vec<CodeNode>,
}

#[derive(Debug)]
struct StructGroup {
    chain: Chain,
    max_opens: u32,
    max_borrowed: u32,
}

struct Builder {
    path: String,
    frames: Vec<Frame>,
    groups: Vec<StructGroup>,
    frags: Vec<FragGroup>,
    pending: Option<Pending>,
    await_body: Option<Owner>,
    do_tail: bool,
    next_group: u32,
    last_line: u32,
}

impl Builder {
    fn new(path: &str) -> Self {
        Builder {
            path: path.to_string(),
            frames: vec![Frame {
                kind: FrameKind::Root { path: path.to_string() },
                start_line: 1,
                children: Vec::new(),
                braced: false,
                credit: 0,
                borrowed: 0,
            }],
            groups: Vec::new(),
            frags: Vec::new(),
            pending: None,
            await_body: None,
            do_tail: false,
            next_group: 0,
            last_line: 1,
        }
    }

    fn token(&mut self, token: Token) -> Result<(), ExtractError> {
        self.last_line = self.last_line.max(token.line);
        let line = token.line;
        match token.kind {
            TokKind::Cond { directive, text } => {
                let raw = raw_condition(directive, &text, line)?;
                self.directive(directive, raw, line)
            }
            TokKind::Endif => self.endif(line),
            kind if self.frags.is_empty() => self.code(kind, line),
            kind => self.fragment_code(kind, line),
        }
    }

    fn top(&mut self) -> &mut Frame {
        self.frames.last_mut().expect("root frame is never popped")
    }

    fn attach(&mut self, nodes: Vec<CodeNode>) {
        self.top().children.extend(nodes);
    }

    fn new_group_id(&mut self) -> GroupId {
        let id = GroupId(self.next_group);
        self.next_group += 1;
        id
    }

    fn at_top_level(&self) -> bool {
        self.frames
            .iter()
            .all(|f| matches!(f.kind, FrameKind::Root { .. } | FrameKind::Cpp(_)))
    }

    fn push_frame(&mut self, kind: FrameKind, start_line: u32, children: Vec<CodeNode>, braced: bool) {
        self.frames.push(Frame {
            kind,
            start_line,
            children,
            braced,
            credit: 0,
            borrowed: 0,
        });
    }

    fn push_owner(&mut self, owner: Owner, braced: bool) {
        self.push_frame(owner.kind, owner.start_line, owner.children, braced);
    }

    fn pop_frame(&mut self, end_line: u32) -> bool {
        let frame = self.frames.pop().expect("caller checked a non-root frame");
        let is_do = frame.is_do_loop();
        let nodes = frame.into_nodes(end_line, &self.path);
        self.attach(nodes);
        is_do
    }

    /// A unit ended in the current frame: brace-less bodies are complete.
    fn complete_unit(&mut self, line: u32) {
        while self.frames.len() > 1 {
            let top = self.frames.last().expect("non-empty");
            if !(top.is_control() && !top.braced) {
                break;
            }
            if self.pop_frame(line) {
                self.do_tail = true;
                break;
            }
        }
    }

    /// Resolves header/body state that must not survive a structural directive.
    fn settle(&mut self, line: u32) {
        if self.do_tail {
            self.do_tail = false;
            self.complete_unit(line);
        }
        if let Some(owner) = self.await_body.take() {
            self.push_owner(owner, false);
        }
    }

    fn resolve_lone_else(&mut self) {
        if self.frags.is_empty() && self.pending.as_ref().is_some_and(|p| p.head == Head::ElseStart) {
            let p = self.pending.take().expect("checked");
            self.await_body = Some(Owner {
                kind: FrameKind::Branch {
                    kind: BranchKind::Else,
                    header: "else".into(),
                },
                start_line: p.start_line,
                children: Vec::new(),
            });
        }
    }

    fn in_statement(&self) -> bool {
        !self.frags.is_empty() || self.pending.is_some()
    }

    fn directive(&mut self, directive: Directive, raw: Option<VarExpr>, line: u32) -> Result<(), ExtractError> {
        self.resolve_lone_else();
        if directive.opens_group() {
            if self.in_statement() {
                self.fragment_open(directive, raw, line)
            } else {
                self.settle(line);
                let id = self.new_group_id();
                let mut chain = Chain::new(id, line);
                let block = chain.block(directive, raw, line)?;
                self.groups.push(StructGroup {
                    chain,
                    max_opens: 0,
                    max_borrowed: 0,
                });
                self.push_frame(FrameKind::Cpp(block), line, Vec::new(), false);
                Ok(())
            }
        } else if !self.frags.is_empty() {
            self.fragment_branch(directive, raw, line)
        } else {
            self.structural_end(Some((directive, raw)), line)
        }
    }

    fn endif(&mut self, line: u32) -> Result<(), ExtractError> {
        self.resolve_lone_else();
        if !self.frags.is_empty() {
            self.fragment_endif(line)
        } else {
            self.structural_end(None, line)
        }
    }

    /// Ends the current branch of the innermost structural group and either
    /// opens the next sibling or closes the group.
    fn structural_end(&mut self, next: Option<(Directive, Option<VarExpr>)>, line: u32) -> Result<(), ExtractError> {
        if self.groups.is_empty() {
            let name = next.map_or("#endif", |(d, _)| d.as_str());
            return Err(ExtractError::UnbalancedDirective {
                line,
                message: format!("{name} without matching #if"),
            });
        }
        if let Some(p) = self.pending.take() {
            let end = p.end_line;
            self.attach(vec![p.into_statement()]);
            self.complete_unit(end);
        }
        self.settle(line);

        let mut opens = 0;
        loop {
            let top = self.frames.last().expect("non-empty");
            match top.kind {
                FrameKind::Cpp(_) => break,
                FrameKind::Function { .. } => {
                    return Err(ExtractError::UnbalancedDirective {
                        line,
                        message: "conditional branch ends inside a function it opened".into(),
                    })
                }
                FrameKind::Root { .. } => unreachable!("open group implies a CppBlock frame"),
                _ => {
                    opens += top.credit + u32::from(top.braced);
                    self.pop_frame(line);
                }
            }
        }
        let cpp = self.frames.pop().expect("CppBlock frame");
        opens += cpp.credit;
        let borrowed = cpp.borrowed;
        let nodes = cpp.into_nodes(line, &self.path);
        self.attach(nodes);
        let group = self.groups.last_mut().expect("checked non-empty");
        group.max_opens = group.max_opens.max(opens);
        group.max_borrowed = group.max_borrowed.max(borrowed);

        match next {
            Some((directive, raw)) => {
                let block = group.chain.block(directive, raw, line)?;
                self.push_frame(FrameKind::Cpp(block), line, Vec::new(), false);
            }
            None => {
                let group = self.groups.pop().expect("checked non-empty");
                self.apply_group_braces(group.max_borrowed, group.max_opens, line)?;
                if group.max_borrowed == 0 && group.max_opens == 0 {
                    let top = self.frames.last().expect("non-empty");
                    if top.is_control() && !top.braced && !top.children.is_empty() {
                        self.complete_unit(line);
                    }
                }
            }
        }
        Ok(())
    }

    fn apply_group_braces(&mut self, borrowed: u32, opens: u32, line: u32) -> Result<(), ExtractError> {
        for _ in 0..borrowed {
            while self.frames.len() > 1 {
                let top = self.frames.last().expect("non-empty");
                if top.is_control() && !top.braced {
                    self.pop_frame(line);
                } else {
                    break;
                }
            }
            let top = self.top();
            if matches!(top.kind, FrameKind::Cpp(_)) {
                top.borrowed += 1;
            } else if top.credit > 0 {
                top.credit -= 1;
            } else {
                match top.kind {
                    FrameKind::Root { .. } => {
                        return Err(ExtractError::BraceMismatch {
                            line,
                            message: "conditional block closes more braces than were opened".into(),
                        })
                    }
                    FrameKind::Function { .. } => {
                        return Err(ExtractError::UnbalancedDirective {
                            line,
                            message: "conditional block closes the function enclosing it".into(),
                        })
                    }
                    _ => {
                        if self.pop_frame(line) {
                            self.do_tail = true;
                        } else {
                            self.complete_unit(line);
                        }
                    }
                }
            }
        }
        self.top().credit += opens;
        Ok(())
    }

    fn fragment_container(&mut self) -> &mut Vec<CodeNode> {
        match self.frags.last_mut() {
            Some(parent) => &mut parent.current.children,
            None => &mut self.pending.as_mut().expect("fragments need a statement").fragments,
        }
    }

    fn fragment_open(&mut self, directive: Directive, raw: Option<VarExpr>, line: u32) -> Result<(), ExtractError> {
        match self.frags.last_mut() {
            Some(parent) => parent.current.flush_run(),
            None => self.pending.as_mut().expect("in statement").flush_run(),
        }
        let id = self.new_group_id();
        let mut chain = Chain::new(id, line);
        let block = chain.block(directive, raw, line)?;
        self.frags.push(FragGroup {
            chain,
            current: FragBlock::new(block, line),
            outcomes: Vec::new(),
        });
        Ok(())
    }

    fn fragment_branch(&mut self, directive: Directive, raw: Option<VarExpr>, line: u32) -> Result<(), ExtractError> {
        let mut group = self.frags.pop().expect("checked non-empty");
        let block = group.chain.block(directive, raw, line)?;
        let current = std::mem::replace(&mut group.current, FragBlock::new(block, line));
        let (node, outcome) = current.finish(line);
        self.fragment_container().push(node);
        group.outcomes.push(outcome);
        self.frags.push(group);
        Ok(())
    }

    fn fragment_endif(&mut self, line: u32) -> Result<(), ExtractError> {
        let group = self.frags.pop().expect("checked non-empty");
        let (node, outcome) = group.current.finish(line);
        self.fragment_container().push(node);
        let mut outcomes = group.outcomes;
        outcomes.push(outcome);
        if !group.chain.has_else {
            outcomes.push(Outcome::default());
        }
        let agreed = outcomes[0];
        if outcomes.iter().any(|o| *o != agreed) {
            return Err(ExtractError::UnbalancedDirective {
                line: group.chain.open_line,
                message: "conditional branches leave the enclosing statement in different states".into(),
            });
        }
        if let Some(parent) = self.frags.last_mut() {
            let cur = &mut parent.current;
            cur.paren += agreed.paren;
            cur.brace += agreed.brace;
            if agreed.terminator.is_some() {
                if cur.terminator.is_some() {
                    return Err(ExtractError::UnbalancedDirective {
                        line,
                        message: "statement ends twice inside a conditional fragment".into(),
                    });
                }
                cur.terminator = agreed.terminator;
            }
            return Ok(());
        }

        let p = self.pending.as_mut().expect("fragments need a statement");
        p.paren = (p.paren + agreed.paren).max(0);
        p.brace = (p.brace + agreed.brace).max(0);
        p.end_line = p.end_line.max(line);
        match agreed.terminator {
            Some(Terminator::Semi) => self.finish_at_semicolon(),
            Some(Terminator::Brace) => {
                if p.header_complete() {
                    self.finish_header();
                    let owner = self.await_body.take().expect("header just finished");
                    self.push_owner(owner, true);
                    Ok(())
                } else {
                    self.open_brace_with_pending(line)
                }
            }
            None => {
                if p.header_complete() {
                    self.finish_header();
                }
                Ok(())
            }
        }
    }

    fn brace_opens_block(&self) -> bool {
        let Some(p) = self.pending.as_ref() else {
            return true;
        };
        match p.head {
            Head::Control(_) | Head::ElseStart => true,
            Head::Label(_) | Head::DoTail => false,
            Head::Statement if self.at_top_level() => !has_assignment(&p.words) && p.seen_paren,
            Head::Statement => !is_aggregate(&p.words),
        }
    }

    fn fragment_code(&mut self, kind: TokKind, line: u32) -> Result<(), ExtractError> {
        let pending = self.pending.as_ref().expect("fragments need a statement");
        let total_paren = pending.paren + self.frags.iter().map(|g| g.current.paren).sum::<i32>();
        let total_brace = pending.brace + self.frags.iter().map(|g| g.current.brace).sum::<i32>();
        let opener = self.brace_opens_block();
        let pending = self.pending.as_mut().expect("checked");
        pending.end_line = pending.end_line.max(line);
        let cur = &mut self.frags.last_mut().expect("checked").current;
        if cur.terminator.is_some() {
            return Err(ExtractError::UnbalancedDirective {
                line,
                message: "code follows the end of a statement inside a conditional fragment".into(),
            });
        }
        let at_statement_level = total_paren == 0 && total_brace == 0;
        match kind {
            TokKind::LParen => {
                cur.paren += 1;
                pending.seen_paren = true;
            }
            TokKind::RParen => cur.paren -= 1,
            TokKind::Semi if at_statement_level => cur.terminator = Some(Terminator::Semi),
            TokKind::LBrace if at_statement_level && opener => {
                cur.terminator = Some(Terminator::Brace);
                return Ok(());
            }
            TokKind::LBrace => cur.brace += 1,
            TokKind::RBrace if total_brace > 0 => cur.brace -= 1,
            TokKind::RBrace => {
                return Err(ExtractError::BraceMismatch {
                    line,
                    message: "`}` inside a conditional fragment closes an outer block".into(),
                })
            }
            _ => {}
        }
        cur.run.push(kind.text(), line);
        Ok(())
    }

    fn code(&mut self, kind: TokKind, line: u32) -> Result<(), ExtractError> {
        if self.do_tail {
            self.do_tail = false;
            if self.pending.is_none() && kind.is_ident("while") {
                let mut p = Pending::new(Head::DoTail, line);
                p.push(kind, line);
                self.pending = Some(p);
                return Ok(());
            }
            self.complete_unit(line);
        }
        if let Some(owner) = self.await_body.take() {
            if kind == TokKind::LBrace {
                self.push_owner(owner, true);
                return Ok(());
            }
            self.push_owner(owner, false);
        }

        let Some(p) = self.pending.as_mut() else {
            return self.start_unit(kind, line);
        };

        if p.head == Head::ElseStart {
            if kind.is_ident("if") {
                p.head = Head::Control(ControlKind::ElseIf);
                p.push(kind, line);
                return Ok(());
            }
            self.resolve_lone_else();
            return self.code(kind, line);
        }

        match kind {
            TokKind::LParen => {
                p.paren += 1;
                p.seen_paren = true;
                p.push(kind, line);
            }
            TokKind::RParen => {
                p.paren = (p.paren - 1).max(0);
                p.push(kind, line);
                if p.header_complete() {
                    self.finish_header();
                }
            }
            TokKind::Semi => {
                p.push(kind, line);
                if p.paren == 0 && p.brace == 0 {
                    self.finish_at_semicolon()?;
                }
            }
            TokKind::Colon => {
                p.push(kind, line);
                if matches!(p.head, Head::Label(_)) && p.paren == 0 {
                    let p = self.pending.take().expect("checked");
                    let Head::Label(label) = p.head else { unreachable!() };
                    let node = CodeNode::new(
                        NodeKind::CaseLabel {
                            kind: label,
                            header: p.header_text(),
                        },
                        p.start_line,
                        p.end_line,
                    );
                    self.attach(vec![node]);
                }
            }
            TokKind::LBrace => {
                if p.paren == 0 && p.brace == 0 {
                    self.open_brace_with_pending(line)?;
                } else {
                    p.brace += 1;
                    p.push(kind, line);
                }
            }
            TokKind::RBrace => {
                if p.brace > 0 {
                    p.brace -= 1;
                    p.push(kind, line);
                } else {
                    let p = self.pending.take().expect("checked");
                    let end = p.end_line;
                    self.attach(vec![p.into_statement()]);
                    self.complete_unit(end);
                    self.close_brace(line)?;
                }
            }
            other => p.push(other, line),
        }
        Ok(())
    }

    /// First token of a statement, header or label.
    fn start_unit(&mut self, kind: TokKind, line: u32) -> Result<(), ExtractError> {
        let head = match &kind {
            TokKind::Semi => return Ok(()),
            TokKind::RBrace => return self.close_brace(line),
            TokKind::LBrace => {
                self.push_frame(FrameKind::Transparent, line, Vec::new(), true);
                return Ok(());
            }
            TokKind::Ident(word) => match word.as_str() {
                "if" => Head::Control(ControlKind::If),
                "while" => Head::Control(ControlKind::While),
                "for" => Head::Control(ControlKind::For),
                "switch" => Head::Control(ControlKind::Switch),
                "else" => Head::ElseStart,
                "case" => Head::Label(LabelKind::Case),
                "default" => Head::Label(LabelKind::Default),
                "do" => {
                    self.await_body = Some(Owner {
                        kind: FrameKind::Loop {
                            kind: LoopKind::DoWhile,
                            header: "do".into(),
                        },
                        start_line: line,
                        children: Vec::new(),
                    });
                    return Ok(());
                }
                _ => Head::Statement,
            },
            _ => Head::Statement,
        };
        let mut p = Pending::new(head, line);
        if kind == TokKind::LParen {
            p.paren = 1;
            p.seen_paren = true;
        }
        p.push(kind, line);
        self.pending = Some(p);
        Ok(())
    }

    fn finish_header(&mut self) {
        let mut p = self.pending.take().expect("header pending");
        let Head::Control(control) = p.head else {
            unreachable!("only control heads complete as headers")
        };
        let header = p.header_text();
        let kind = match control {
            ControlKind::If => FrameKind::Branch {
                kind: BranchKind::If,
                header,
            },
            ControlKind::ElseIf => FrameKind::Branch {
                kind: BranchKind::ElseIf,
                header,
            },
            ControlKind::Switch => FrameKind::Branch {
                kind: BranchKind::Switch,
                header,
            },
            ControlKind::While => FrameKind::Loop {
                kind: LoopKind::While,
                header,
            },
            ControlKind::For => FrameKind::Loop {
                kind: LoopKind::For,
                header,
            },
        };
        self.await_body = Some(Owner {
            kind,
            start_line: p.start_line,
            children: p.take_header_blocks(),
        });
    }

    fn finish_at_semicolon(&mut self) -> Result<(), ExtractError> {
        let p = self.pending.take().expect("statement pending");
        let end = p.end_line;
        if p.head == Head::DoTail {
            let tail = p.header_text();
            let top = self.top();
            if let Some(NodeKind::Loop {
                kind: LoopKind::DoWhile,
                header,
            }) = top.children.last_mut().map(|n| &mut n.kind)
            {
                header.push(' ');
                header.push_str(tail.trim_end_matches(';'));
            }
            if let Some(node) = top.children.last_mut() {
                node.end_line = node.end_line.max(end);
            }
        } else {
            self.attach(vec![p.into_statement()]);
        }
        self.complete_unit(end);
        Ok(())
    }

    fn open_brace_with_pending(&mut self, line: u32) -> Result<(), ExtractError> {
        let top_level = self.at_top_level();
        let p = self.pending.as_mut().expect("statement pending");
        match p.head {
            Head::Statement if top_level => {
                if let Some(name) = function_name(&p.words) {
                    let mut p = self.pending.take().expect("checked");
                    let header = p.header_text();
                    let children = p.take_header_blocks();
                    self.push_frame(FrameKind::Function { name, header }, p.start_line, children, true);
                } else {
                    p.brace += 1;
                    p.push(TokKind::LBrace, line);
                }
            }
            Head::Statement if !is_aggregate(&p.words) => {
                // Macro-style block such as `list_for_each(pos, head) {`.
                let p = self.pending.take().expect("checked");
                self.attach(vec![p.into_statement()]);
                self.push_frame(FrameKind::Transparent, line, Vec::new(), true);
            }
            _ => {
                p.brace += 1;
                p.push(TokKind::LBrace, line);
            }
        }
        Ok(())
    }

    fn close_brace(&mut self, line: u32) -> Result<(), ExtractError> {
        while self.frames.len() > 1 {
            let top = self.frames.last().expect("non-empty");
            if top.is_control() && !top.braced {
                self.pop_frame(line);
            } else {
                break;
            }
        }
        let top = self.top();
        if top.credit > 0 {
            top.credit -= 1;
            return Ok(());
        }
        match top.kind {
            FrameKind::Root { .. } => Err(ExtractError::BraceMismatch {
                line,
                message: "unmatched `}`".into(),
            }),
            FrameKind::Cpp(_) => {
                top.borrowed += 1;
                Ok(())
            }
            _ => {
                if self.pop_frame(line) {
                    self.do_tail = true;
                } else {
                    self.complete_unit(line);
                }
                Ok(())
            }
        }
    }

    fn finish(mut self, line_count: u32) -> Result<CodeNode, ExtractError> {
        let last = self.last_line;
        if let Some(group) = self.frags.first() {
            return Err(ExtractError::UnbalancedDirective {
                line: group.chain.open_line,
                message: "#if without matching #endif".into(),
            });
        }
        if let Some(group) = self.groups.first() {
            return Err(ExtractError::UnbalancedDirective {
                line: group.chain.open_line,
                message: "#if without matching #endif".into(),
            });
        }
        self.resolve_lone_else();
        if let Some(p) = self.pending.take() {
            let end = p.end_line;
            self.attach(vec![p.into_statement()]);
            self.complete_unit(end);
        }
        if self.do_tail {
            self.complete_unit(last);
        }
        if let Some(owner) = self.await_body.take() {
            self.push_owner(owner, false);
        }
        while self.frames.len() > 1 {
            let top = self.frames.last().expect("non-empty");
            if top.braced || top.credit > 0 {
                return Err(ExtractError::BraceMismatch {
                    line: top.start_line,
                    message: "`{` is never closed".into(),
                });
            }
            self.pop_frame(last);
        }
        let root = self.frames.pop().expect("root");
        if root.credit > 0 {
            return Err(ExtractError::BraceMismatch {
                line: last,
                message: "conditional block leaves a `{` open".into(),
            });
        }
        let end = line_count.max(last);
        Ok(root.into_nodes(end, &self.path).pop().expect("root yields one node"))
    }
}

fn raw_condition(directive: Directive, text: &str, line: u32) -> Result<Option<VarExpr>, ExtractError> {
    let macro_name = || {
        text.split(|c: char| !(c.is_ascii_alphanumeric() || c == '_'))
            .find(|w| !w.is_empty())
            .map(VarExpr::atom)
            .ok_or(ExtractError::MalformedCondition {
                line,
                source: crate::ast::ExprError::Empty,
            })
    };
    match directive {
        Directive::Ifdef => macro_name().map(Some),
        Directive::Ifndef => macro_name().map(|a| Some(a.not())),
        Directive::If | Directive::Elif => parse_condition(text)
            .map(Some)
            .map_err(|source| ExtractError::MalformedCondition { line, source }),
        Directive::Else => Ok(None),
    }
}
