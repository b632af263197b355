//! Common variability-aware AST.
//!
//! A [`CodeNode`] tree mixes language structure (functions, branches, loops,
//! statements) with C-preprocessor blocks. A [`CppBlock`] may appear at any
//! nesting level, and also inside a single statement's fragment list when a
//! directive splits that statement. Trees are immutable once built.

mod expr;
mod walk;

use std::fmt::Write as _;

pub use expr::{parse_condition, ExprError, VarExpr};
pub use walk::{count_statements, presence_condition, walk, Scope};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Directive {
    If,
    Ifdef,
    Ifndef,
    Elif,
    Else,
}

impl Directive {
    /// `#if`, `#ifdef` and `#ifndef` start a new group.
    pub fn opens_group(self) -> bool {
        matches!(self, Directive::If | Directive::Ifdef | Directive::Ifndef)
    }

    /// Every directive except `#else` carries a condition of its own.
    pub fn is_variation_point(self) -> bool {
        self != Directive::Else
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Directive::If => "#if",
            Directive::Ifdef => "#ifdef",
            Directive::Ifndef => "#ifndef",
            Directive::Elif => "#elif",
            Directive::Else => "#else",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BranchKind {
    If,
    ElseIf,
    Else,
    Switch,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum LoopKind {
    While,
    DoWhile,
    For,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum LabelKind {
    Case,
    Default,
}

/// Identifies one `#if ... #endif` chain within a source file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GroupId(pub u32);

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CppBlock {
    pub directive: Directive,
    /// Effective guard: for `#elif`/`#else` the negations of all earlier
    /// conditions of the group are already conjoined in.
    pub condition: VarExpr,
    /// Condition as written; `None` for `#else`.
    pub raw_condition: Option<VarExpr>,
    pub group_id: GroupId,
    pub sibling_index: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum NodeKind {
    SourceFile {
        path: String,
    },
    Function {
        name: String,
        file: String,
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
    CaseLabel {
        kind: LabelKind,
        header: String,
    },
    /// `fragments` holds `UnparsedCode` and `CppBlock` nodes in source order.
    SingleStatement {
        fragments: Vec<CodeNode>,
    },
    CppBlock(CppBlock),
    UnparsedCode {
        text: String,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CodeNode {
    pub kind: NodeKind,
    pub start_line: u32,
    pub end_line: u32,
    pub children: Vec<CodeNode>,
}

impl CodeNode {
    pub fn new(kind: NodeKind, start_line: u32, end_line: u32) -> Self {
        CodeNode {
            kind,
            start_line,
            end_line,
            children: Vec::new(),
        }
    }

    pub fn with_children(mut self, children: Vec<CodeNode>) -> Self {
        self.children = children;
        self
    }

    pub fn as_cpp_block(&self) -> Option<&CppBlock> {
        match &self.kind {
            NodeKind::CppBlock(block) => Some(block),
            _ => None,
        }
    }

    pub fn function_name(&self) -> Option<&str> {
        match &self.kind {
            NodeKind::Function { name, .. } => Some(name),
            _ => None,
        }
    }

    /// Statement fragments for `SingleStatement`, empty otherwise.
    pub fn fragments(&self) -> &[CodeNode] {
        match &self.kind {
            NodeKind::SingleStatement { fragments } => fragments,
            _ => &[],
        }
    }

    /// Whether this node is a statement-counting unit: statements, branch and
    /// loop headers and case labels each count once.
    pub fn is_statement_unit(&self) -> bool {
        matches!(
            self.kind,
            NodeKind::SingleStatement { .. }
                | NodeKind::Branch { .. }
                | NodeKind::Loop { .. }
                | NodeKind::CaseLabel { .. }
        )
    }

    /// Unparsed text belonging directly to this node (headers and the
    /// unguarded part of a statement).
    pub fn own_text(&self) -> String {
        match &self.kind {
            NodeKind::Branch { header, .. }
            | NodeKind::Loop { header, .. }
            | NodeKind::CaseLabel { header, .. }
            | NodeKind::Function { header, .. } => header.clone(),
            NodeKind::UnparsedCode { text } => text.clone(),
            NodeKind::SingleStatement { fragments } => fragments
                .iter()
                .filter_map(|f| match &f.kind {
                    NodeKind::UnparsedCode { text } => Some(text.as_str()),
                    _ => None,
                })
                .collect::<Vec<_>>()
                .join(" "),
            _ => String::new(),
        }
    }

    /// All functions in this tree with the conjunction of the CppBlock guards
    /// enclosing each of them.
    pub fn functions(&self) -> Vec<(&CodeNode, VarExpr)> {
        let mut out = Vec::new();
        walk(self, &mut |node, scope| {
            if matches!(node.kind, NodeKind::Function { .. }) {
                out.push((node, scope.presence_condition()));
            }
        });
        out
    }

    /// Deterministic, indented textual rendering used by `--dump-ast`.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        self.dump_into(&mut out, 0);
        out
    }

    fn dump_into(&self, out: &mut String, depth: usize) {
        let pad = "  ".repeat(depth);
        let lines = format!("[{}-{}]", self.start_line, self.end_line);
        let _ = match &self.kind {
            NodeKind::SourceFile { path } => writeln!(out, "{pad}SourceFile {path} {lines}"),
            NodeKind::Function { name, .. } => writeln!(out, "{pad}Function {name} {lines}"),
            NodeKind::Branch { kind, header } => {
                writeln!(out, "{pad}Branch {kind:?} `{header}` {lines}")
            }
            NodeKind::Loop { kind, header } => {
                writeln!(out, "{pad}Loop {kind:?} `{header}` {lines}")
            }
            NodeKind::CaseLabel { kind, header } => {
                writeln!(out, "{pad}CaseLabel {kind:?} `{header}` {lines}")
            }
            NodeKind::SingleStatement { .. } => {
                writeln!(out, "{pad}SingleStatement `{}` {lines}", self.own_text())
            }
            NodeKind::CppBlock(b) => writeln!(
                out,
                "{pad}CppBlock {} guard=`{}` group={}.{} {lines}",
                b.directive.as_str(),
                b.condition,
                b.group_id.0,
                b.sibling_index
            ),
            NodeKind::UnparsedCode { text } => writeln!(out, "{pad}UnparsedCode `{text}` {lines}"),
        };
        for fragment in self.fragments() {
            if matches!(fragment.kind, NodeKind::CppBlock(_)) {
                fragment.dump_into(out, depth + 1);
            }
        }
        for child in &self.children {
            child.dump_into(out, depth + 1);
        }
    }
}
