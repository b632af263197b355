use super::{CodeNode, NodeKind, VarExpr};

/// Structural context of a node relative to the root passed to [`walk`].
#[derive(Debug, Default, Clone)]
pub struct Scope<'a> {
    /// Effective guards of the enclosing CppBlocks, outermost first.
    pub guards: Vec<&'a VarExpr>,
    /// Enclosing branch and loop statements.
    pub code_nesting: usize,
    /// Enclosing CppBlocks.
    pub cpp_nesting: usize,
}

impl Scope<'_> {
    pub fn presence_condition(&self) -> VarExpr {
        VarExpr::conjunction(self.guards.iter().map(|g| (*g).clone()))
    }

    pub fn is_conditional(&self) -> bool {
        self.guards.iter().any(|g| !g.is_true())
    }
}

/// Visits every node strictly below `root` in source order, including the
/// CppBlocks and code pieces inside statement fragments. The scope excludes
/// `root` itself.
pub fn walk<'a, F>(root: &'a CodeNode, visit: &mut F)
where
    F: FnMut(&'a CodeNode, &Scope<'a>),
{
    let mut scope = Scope::default();
    descend(root, &mut scope, visit);
}

fn descend<'a, F>(node: &'a CodeNode, scope: &mut Scope<'a>, visit: &mut F)
where
    F: FnMut(&'a CodeNode, &Scope<'a>),
{
    for child in node.fragments().iter().chain(&node.children) {
        visit(child, scope);
        match &child.kind {
            NodeKind::CppBlock(block) => {
                scope.guards.push(&block.condition);
                scope.cpp_nesting += 1;
                descend(child, scope, visit);
                scope.cpp_nesting -= 1;
                scope.guards.pop();
            }
            NodeKind::Branch { .. } | NodeKind::Loop { .. } => {
                scope.code_nesting += 1;
                descend(child, scope, visit);
                scope.code_nesting -= 1;
            }
            _ => descend(child, scope, visit),
        }
    }
}

/// Presence condition of the last node of `path`, where `path` runs from the
/// tree root down to the node. Only CppBlock ancestors contribute.
pub fn presence_condition(path: &[&CodeNode]) -> VarExpr {
    let ancestors = path.split_last().map(|(_, rest)| rest).unwrap_or(&[]);
    VarExpr::conjunction(
        ancestors
            .iter()
            .filter_map(|n| n.as_cpp_block())
            .map(|b| b.condition.clone()),
    )
}

/// Counts statement units below `subtree`. With a filter, only units whose
/// presence condition (relative to `subtree`) satisfies it are counted.
pub fn count_statements(subtree: &CodeNode, filter: Option<&dyn Fn(&VarExpr) -> bool>) -> usize {
    let mut count = 0;
    walk(subtree, &mut |node, scope| {
        if node.is_statement_unit() && filter.is_none_or(|f| f(&scope.presence_condition())) {
            count += 1;
        }
    });
    count
}
