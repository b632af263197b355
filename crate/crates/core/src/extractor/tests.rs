use super::*;
use crate::ast::{walk, BranchKind, Directive, LabelKind, LoopKind, NodeKind, VarExpr};

pub(crate) const GUARDED_IF: &str = "void func() {
#ifdef A
\tif (...) {
\t\ta_statement;
\t}
#endif
}
";

fn parse(src: &str) -> CodeNode {
    extract_file("test.c", src).unwrap_or_else(|e| panic!("parse failed: {e}\n{src}"))
}

/// Compact shape of a tree: kind names only, children in brackets.
fn shape(node: &CodeNode) -> String {
    let name = match &node.kind {
        NodeKind::SourceFile { .. } => "File".to_string(),
        NodeKind::Function { name, .. } => format!("Fn:{name}"),
        NodeKind::Branch { kind, .. } => format!("{kind:?}"),
        NodeKind::Loop { kind, .. } => format!("{kind:?}"),
        NodeKind::CaseLabel { kind, .. } => format!("{kind:?}"),
        NodeKind::SingleStatement { .. } => "S".to_string(),
        NodeKind::CppBlock(b) => format!("{}:{}", b.directive.as_str(), b.condition),
        NodeKind::UnparsedCode { .. } => "U".to_string(),
    };
    let frag_blocks: Vec<String> = node
        .fragments()
        .iter()
        .filter(|f| f.as_cpp_block().is_some())
        .map(shape)
        .collect();
    let mut out = name;
    if !frag_blocks.is_empty() {
        out.push_str(&format!("<{}>", frag_blocks.join(",")));
    }
    if !node.children.is_empty() {
        let inner: Vec<String> = node.children.iter().map(shape).collect();
        out.push_str(&format!("[{}]", inner.join(",")));
    }
    out
}

fn guards_of_statements(tree: &CodeNode) -> Vec<VarExpr> {
    let mut out = Vec::new();
    walk(tree, &mut |node, scope| {
        if matches!(node.kind, NodeKind::SingleStatement { .. }) {
            out.push(scope.presence_condition());
        }
    });
    out
}

fn truth_table(expr: &VarExpr, vars: &[&str]) -> Vec<bool> {
    (0..1u32 << vars.len())
        .map(|bits| {
            expr.eval(&|name: &str| {
                let i = vars.iter().position(|v| *v == name).expect("known var");
                bits & (1 << i) != 0
            })
        })
        .collect()
}

#[test]
fn guarded_if_listing_structure() {
    let tree = parse(GUARDED_IF);
    assert_eq!(shape(&tree), "File[Fn:func[#ifdef:A[If[S]]]]");
    assert_eq!((tree.start_line, tree.end_line), (1, 7));
    let func = &tree.children[0];
    assert_eq!((func.start_line, func.end_line), (1, 7));
    let block = &func.children[0];
    assert_eq!((block.start_line, block.end_line), (2, 6));
    let branch = &block.children[0];
    assert_eq!((branch.start_line, branch.end_line), (3, 5));
    assert_eq!(branch.children[0].start_line, 4);
}

#[test]
fn empty_file() {
    let tree = parse("");
    assert!(tree.children.is_empty());
    assert!(matches!(tree.kind, NodeKind::SourceFile { .. }));
}

#[test]
fn elif_chain_at_top_level() {
    let tree = parse("#if A\nint x;\n#elif B\nint y;\n#endif\n");
    assert_eq!(tree.children.len(), 2);
    let a = tree.children[0].as_cpp_block().unwrap();
    let b = tree.children[1].as_cpp_block().unwrap();
    assert_eq!(a.group_id, b.group_id);
    assert_eq!((a.sibling_index, b.sibling_index), (0, 1));
    assert_eq!(a.condition, VarExpr::atom("A"));
    assert_eq!(b.condition, VarExpr::atom("A").not().and(VarExpr::atom("B")));
    assert_eq!(b.raw_condition, Some(VarExpr::atom("B")));
    assert_eq!(tree.children[0].children.len(), 1);
    assert_eq!(tree.children[1].children.len(), 1);

    // Truth-table oracle: the first guard is exactly A, the second is
    // exactly "B but not A".
    let vars = ["A", "B"];
    let expected_b: Vec<bool> = (0..4u32).map(|bits| bits & 1 == 0 && bits & 2 != 0).collect();
    assert_eq!(truth_table(&b.condition, &vars), expected_b);
    let expected_a: Vec<bool> = (0..4u32).map(|bits| bits & 1 != 0).collect();
    assert_eq!(truth_table(&a.condition, &vars), expected_a);
}

#[test]
fn nested_else_guard() {
    let tree = parse("void f() {\n#if A\n#if B\n  x();\n#else\n  y();\n#endif\n#endif\n}\n");
    let guards = guards_of_statements(&tree);
    assert_eq!(guards.len(), 2);
    assert_eq!(guards[1], VarExpr::atom("A").and(VarExpr::atom("B").not()));
    let vars = ["A", "B"];
    let expected: Vec<bool> = (0..4u32).map(|bits| bits & 1 != 0 && bits & 2 == 0).collect();
    assert_eq!(truth_table(&guards[1], &vars), expected);
}

#[test]
fn else_guards_are_pairwise_disjoint() {
    let tree = parse("#if A\na;\n#elif B\nb;\n#elif C\nc;\n#else\nd;\n#endif\n");
    let guards: Vec<&VarExpr> = tree
        .children
        .iter()
        .map(|n| &n.as_cpp_block().unwrap().condition)
        .collect();
    let vars = ["A", "B", "C"];
    let tables: Vec<Vec<bool>> = guards.iter().map(|g| truth_table(g, &vars)).collect();
    for row in 0..8 {
        let active = tables.iter().filter(|t| t[row]).count();
        assert_eq!(active, 1, "exactly one branch is active for assignment {row}");
    }
}

#[test]
fn control_structures() {
    let src = "int f(int n) {
  int i;
  for (i = 0; i < n; i++) {
    if (i) a(); else if (n) b(); else { c(); }
  }
  while (n--) d();
  do { e(); } while (n);
  switch (n) {
  case 1:
    g();
    break;
  default:
    h();
  }
  return 0;
}
";
    let tree = parse(src);
    assert_eq!(
        shape(&tree),
        "File[Fn:f[S,For[If[S],ElseIf[S],Else[S]],While[S],DoWhile[S],Switch[Case,S,S,Default,S],S]]"
    );
    let func = &tree.children[0];
    let do_loop = &func.children[3];
    assert!(matches!(
        &do_loop.kind,
        NodeKind::Loop { kind: LoopKind::DoWhile, header } if header.contains("while")
    ));
    assert_eq!(do_loop.end_line, 7);
    assert!(matches!(
        func.children[4].children[0].kind,
        NodeKind::CaseLabel {
            kind: LabelKind::Case,
            ..
        }
    ));
}

#[test]
fn braceless_nesting() {
    let tree = parse("void f() {\n  if (a)\n    if (b)\n      x();\n  y();\n}\n");
    assert_eq!(shape(&tree), "File[Fn:f[If[If[S]],S]]");
}

#[test]
fn braceless_body_with_directive() {
    let tree = parse("void f() {\n  if (a)\n#ifdef A\n    x();\n#endif\n  y();\n}\n");
    assert_eq!(shape(&tree), "File[Fn:f[If[#ifdef:A[S]],S]]");
}

#[test]
fn declarations_with_braces_are_statements() {
    let tree = parse(
        "struct point { int x; int y; };\nstatic int table[] = { 1, 2 };\nint main(void) { struct point p = { 1, 2 }; return p.x; }\n",
    );
    assert_eq!(shape(&tree), "File[S,S,Fn:main[S,S]]");
}

#[test]
fn directive_splitting_statement_becomes_fragment() {
    let tree = parse("void f() {\n  foo(a\n#ifdef A\n    , b\n#endif\n  );\n}\n");
    assert_eq!(shape(&tree), "File[Fn:f[S<#ifdef:A[U]>]]");
    let stmt = &tree.children[0].children[0];
    assert_eq!((stmt.start_line, stmt.end_line), (2, 6));
    assert_eq!(stmt.own_text(), "foo(a );");
}

#[test]
fn directive_splitting_if_header() {
    let src = "void f() {\n  if (x\n#ifdef A\n      && y)\n#else\n      )\n#endif\n  {\n    z();\n  }\n}\n";
    let tree = parse(src);
    assert_eq!(shape(&tree), "File[Fn:f[If[#ifdef:A[U],#else:!A[U],S]]]");
}

#[test]
fn directive_splitting_if_header_with_brace() {
    let src = "void f() {\n  if (x\n#ifdef A\n      && y) {\n#else\n      ) {\n#endif\n    z();\n  }\n}\n";
    let tree = parse(src);
    assert_eq!(shape(&tree), "File[Fn:f[If[#ifdef:A[U],#else:!A[U],S]]]");
}

#[test]
fn alternative_headers_across_branches_use_credit() {
    let src = "void f() {
#ifdef A
  if (x) {
#else
  if (y) {
#endif
    z();
  }
  w();
}
";
    let tree = parse(src);
    assert_eq!(shape(&tree), "File[Fn:f[#ifdef:A[If],#else:!A[If],S,S]]");
}

#[test]
fn guarded_closing_brace_is_borrowed() {
    let src = "void f() {
  while (x) {
    a();
#ifdef A
  }
#else
    b();
  }
#endif
  c();
}
";
    let tree = parse(src);
    assert_eq!(shape(&tree), "File[Fn:f[While[S,#ifdef:A,#else:!A[S]],S]]");
}

#[test]
fn functions_inside_conditional_blocks() {
    let tree = parse("#ifdef A\nstatic int g(void) { return 1; }\n#else\nstatic int g(void) { return 0; }\n#endif\n");
    assert_eq!(shape(&tree), "File[#ifdef:A[Fn:g[S]],#else:!A[Fn:g[S]]]");
    let fns = tree.functions();
    assert_eq!(fns.len(), 2);
    assert_eq!(fns[1].1, VarExpr::atom("A").not());
}

#[test]
fn non_conditional_directives_are_skipped() {
    let tree = parse("#include <stdio.h>\n#define X(a) { a }\n#pragma once\nint x;\n");
    assert_eq!(shape(&tree), "File[S]");
    assert_eq!(tree.children[0].start_line, 4);
}

#[test]
fn ifndef_and_comparison_conditions() {
    let tree = parse("#ifndef A\nint a;\n#endif\n#if VERSION > 3 && defined(B)\nint b;\n#endif\n");
    let a = tree.children[0].as_cpp_block().unwrap();
    assert_eq!(a.directive, Directive::Ifndef);
    assert_eq!(a.condition, VarExpr::atom("A").not());
    let b = tree.children[1].as_cpp_block().unwrap();
    let features: Vec<String> = b.condition.referenced_features().into_iter().collect();
    assert_eq!(features, ["B", "VERSION"]);
}

#[test]
fn else_if_keywords() {
    let tree = parse("void f() { if (a) { x(); } else if (b) { y(); } else { z(); } }");
    let kinds: Vec<BranchKind> = tree.children[0]
        .children
        .iter()
        .filter_map(|n| match n.kind {
            NodeKind::Branch { kind, .. } => Some(kind),
            _ => None,
        })
        .collect();
    assert_eq!(kinds, [BranchKind::If, BranchKind::ElseIf, BranchKind::Else]);
}

#[test]
fn stray_directives_are_errors() {
    for (src, line) in [
        ("int x;\n#endif\n", 2),
        ("#else\n", 1),
        ("int a;\n#elif A\n", 2),
        ("int a;\n#if A\nint x;\n", 2),
        ("#if A\n#else\n#else\n#endif\n", 3),
    ] {
        match extract_file("t.c", src) {
            Err(ExtractError::UnbalancedDirective { line: l, .. }) => assert_eq!(l, line, "{src}"),
            other => panic!("expected UnbalancedDirective for {src:?}, got {other:?}"),
        }
    }
}

#[test]
fn directive_crossing_functions_is_error() {
    let src = "void f() {\n#ifdef A\n  x();\n}\nvoid g() {\n#endif\n}\n";
    assert!(matches!(
        extract_file("t.c", src),
        Err(ExtractError::UnbalancedDirective { .. })
    ));
    let src = "#ifdef A\nvoid f(int a) {\n#else\nvoid f(void) {\n#endif\n}\n";
    assert!(matches!(
        extract_file("t.c", src),
        Err(ExtractError::UnbalancedDirective { line: 3, .. })
    ));
}

#[test]
fn brace_mismatch_is_error() {
    assert!(matches!(
        extract_file("t.c", "void f() {\n  x();\n"),
        Err(ExtractError::BraceMismatch { line: 1, .. })
    ));
    assert!(matches!(
        extract_file("t.c", "int x;\n}\n"),
        Err(ExtractError::BraceMismatch { line: 2, .. })
    ));
}

#[test]
fn binary_files_are_undecodable() {
    assert!(matches!(decode_source(b"int\0x;"), Err(ExtractError::UndecodableText)));
    assert_eq!(decode_source(b"/* \xe9 */ int x;").unwrap(), "/* \u{e9} */ int x;");
}

#[test]
fn extract_tree_isolates_failures() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::create_dir_all(dir.path().join("sub")).unwrap();
    std::fs::write(dir.path().join("guarded_if.c"), GUARDED_IF).unwrap();
    std::fs::write(dir.path().join("sub/ok.h"), "int x;\n").unwrap();
    std::fs::write(dir.path().join("sub/bad.c"), "#endif\n").unwrap();
    std::fs::write(dir.path().join("notes.txt"), "#endif\n").unwrap();
    let config = ExtractionConfig::new(dir.path()).with_threads(2);
    let (corpus, diags) = extract_tree(&config).unwrap();
    assert_eq!(
        corpus.files.keys().cloned().collect::<Vec<_>>(),
        ["guarded_if.c", "sub/ok.h"]
    );
    assert_eq!(diags.len(), 1);
    assert_eq!(diags[0].path, "sub/bad.c");
}

#[test]
fn extract_tree_errors() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("readme.md"), "x").unwrap();
    assert!(matches!(
        extract_tree(&ExtractionConfig::new(dir.path())),
        Err(CorpusError::EmptyCorpus(_))
    ));
    assert!(matches!(
        extract_tree(&ExtractionConfig::new(dir.path().join("missing"))),
        Err(CorpusError::NotADirectory(_))
    ));
    assert!(matches!(
        extract_tree(&ExtractionConfig::new(dir.path()).with_threads(0)),
        Err(CorpusError::InvalidThreads)
    ));
}

#[test]
fn extract_tree_is_thread_independent() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = crate::synth::CorpusSpec::default().generate(7);
    corpus.write_to(dir.path()).unwrap();
    let one = extract_tree(&ExtractionConfig::new(dir.path()).with_threads(1)).unwrap();
    let eight = extract_tree(&ExtractionConfig::new(dir.path()).with_threads(8)).unwrap();
    assert_eq!(one.0.dump(), eight.0.dump());
    assert_eq!(one.0, eight.0);
}
