//! Per-function code metrics, with or without feature weights.

use std::collections::BTreeSet;

use crate::ast::{walk, BranchKind, CodeNode, LabelKind, NodeKind, VarExpr};
use crate::preprocess::{CallSite, GlobalTables};
use crate::varmodel::BuildModel;
use crate::weights::WeightFunction;

/// What a metric may look at besides the function itself.
#[derive(Debug, Clone, Copy)]
pub struct FunctionContext<'a> {
    pub function: &'a CodeNode,
    pub file: &'a str,
    /// Conjunction of the CppBlock guards enclosing the function.
    pub presence: &'a VarExpr,
    pub tables: &'a GlobalTables,
    pub build: Option<&'a BuildModel>,
}

impl FunctionContext<'_> {
    pub fn name(&self) -> &str {
        self.function.function_name().unwrap_or("")
    }

    fn weigh<'f, I>(&self, features: I, weight: Option<&WeightFunction>) -> f64
    where
        I: IntoIterator<Item = &'f String>,
    {
        features
            .into_iter()
            .map(|f| weight.map_or(1.0, |w| w.evaluate(f, self.file)))
            .sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum McCabeMode {
    Code,
    Vp,
    Combined,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum NestingScope {
    Code,
    Vp,
    Combined,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Aggregation {
    Max,
    Avg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Direction {
    In,
    Out,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum FanMode {
    Classical,
    Conditional,
    Weighted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum LocKind {
    LoC,
    LoF,
    PLoF,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum BlockMode {
    IfOnly,
    SeparateElse,
}

pub fn mccabe(ctx: &FunctionContext<'_>, mode: McCabeMode, weight: Option<&WeightFunction>) -> f64 {
    match mode {
        McCabeMode::Code => 1.0 + code_branches(ctx.function) as f64,
        McCabeMode::Vp => 1.0 + vp_feature_sum(ctx, weight, false),
        McCabeMode::Combined => code_branches(ctx.function) as f64 + 1.0 + vp_feature_sum(ctx, weight, false),
    }
}

fn code_branches(function: &CodeNode) -> usize {
    let mut n = 0;
    walk(function, &mut |node, _| {
        let counts = match &node.kind {
            NodeKind::Branch { kind, .. } => matches!(kind, BranchKind::If | BranchKind::ElseIf),
            NodeKind::Loop { .. } => true,
            NodeKind::CaseLabel { kind, .. } => *kind == LabelKind::Case,
            _ => false,
        };
        n += usize::from(counts);
    });
    n
}

/// Opening and `#elif` blocks of the function. Without a weight each block
/// counts 1, or each feature occurrence counts 1 when `per_feature` is set.
fn vp_feature_sum(ctx: &FunctionContext<'_>, weight: Option<&WeightFunction>, per_feature: bool) -> f64 {
    let mut total = 0.0;
    walk(ctx.function, &mut |node, _| {
        let Some(block) = node.as_cpp_block() else {
            return;
        };
        if !block.directive.is_variation_point() {
            return;
        }
        if weight.is_none() && !per_feature {
            total += 1.0;
        } else if let Some(raw) = &block.raw_condition {
            total += ctx.weigh(&raw.referenced_features(), weight);
        }
    });
    total
}

pub fn nesting_depth(ctx: &FunctionContext<'_>, scope: NestingScope, agg: Aggregation) -> f64 {
    let mut depths = Vec::new();
    walk(ctx.function, &mut |node, s| {
        if node.is_statement_unit() {
            depths.push(match scope {
                NestingScope::Code => s.code_nesting,
                NestingScope::Vp => s.cpp_nesting,
                NestingScope::Combined => s.code_nesting + s.cpp_nesting,
            });
        }
    });
    match agg {
        Aggregation::Max => depths.iter().copied().max().unwrap_or(0) as f64,
        Aggregation::Avg if depths.is_empty() => 0.0,
        Aggregation::Avg => depths.iter().sum::<usize>() as f64 / depths.len() as f64,
    }
}

pub fn fan(ctx: &FunctionContext<'_>, direction: Direction, mode: FanMode, weight: Option<&WeightFunction>) -> f64 {
    let sites: &[CallSite] = match direction {
        Direction::Out => ctx.tables.callees_of(ctx.name()),
        Direction::In => ctx.tables.callers_of(ctx.name()),
    };
    match mode {
        FanMode::Classical => sites.iter().map(|s| &s.partner).collect::<BTreeSet<_>>().len() as f64,
        FanMode::Conditional => sites.iter().filter(|s| !s.condition.is_true()).count() as f64,
        FanMode::Weighted => sites
            .iter()
            .filter(|s| !s.condition.is_true())
            .map(|s| ctx.weigh(&s.condition.referenced_features(), weight))
            .sum(),
    }
}

pub fn loc_family(ctx: &FunctionContext<'_>, kind: LocKind) -> f64 {
    let loc = || crate::ast::count_statements(ctx.function, None);
    let lof = || crate::ast::count_statements(ctx.function, Some(&|pc: &VarExpr| !pc.is_true()));
    match kind {
        LocKind::LoC => loc() as f64,
        LocKind::LoF => lof() as f64,
        LocKind::PLoF => match loc() {
            0 => 0.0,
            n => lof() as f64 / n as f64,
        },
    }
}

/// Features inside the function body (variant 1).
pub fn body_features(function: &CodeNode) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    walk(function, &mut |node, _| {
        if let Some(raw) = node.as_cpp_block().and_then(|b| b.raw_condition.as_ref()) {
            raw.collect_features(&mut out);
        }
    });
    out
}

pub fn features_per_function(ctx: &FunctionContext<'_>, variant: u8, weight: Option<&WeightFunction>) -> f64 {
    let own = || ctx.presence.referenced_features();
    let with_build = || {
        let mut set = own();
        if let Some(build) = ctx.build {
            build.file_presence(ctx.file).collect_features(&mut set);
        }
        set
    };
    let set = match variant {
        1 => body_features(ctx.function),
        2 => own(),
        3 => with_build(),
        4 => &body_features(ctx.function) | &own(),
        5 => &body_features(ctx.function) | &with_build(),
        other => panic!("features-per-function variant {other} does not exist"),
    };
    ctx.weigh(&set, weight)
}

pub fn blocks_per_function(ctx: &FunctionContext<'_>, mode: BlockMode) -> f64 {
    let mut n = 0;
    walk(ctx.function, &mut |node, _| {
        if let Some(block) = node.as_cpp_block() {
            if mode == BlockMode::SeparateElse || block.directive.opens_group() {
                n += 1;
            }
        }
    });
    n as f64
}

pub fn tangling_degree(ctx: &FunctionContext<'_>, weight: Option<&WeightFunction>) -> f64 {
    vp_feature_sum(ctx, weight, true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::extractor::{extract_file, Corpus};
    use crate::varmodel::FeatureModel;
    use crate::weights::NocMode;

    const GUARDED_IF: &str = "void func() {\n#ifdef A\nif (x) {\na_statement;\n}\n#endif\n}\n";

    struct Fixture {
        tree: CodeNode,
        tables: GlobalTables,
        build: Option<BuildModel>,
        path: String,
    }

    impl Fixture {
        fn new(path: &str, src: &str) -> Self {
            let tree = extract_file(path, src).unwrap();
            let tables = GlobalTables::build(&Corpus::from_files([tree.clone()]));
            Fixture {
                tree,
                tables,
                build: None,
                path: path.to_string(),
            }
        }

        fn with<R>(&self, name: &str, f: impl FnOnce(&FunctionContext<'_>) -> R) -> R {
            let (function, presence) = self
                .tree
                .functions()
                .into_iter()
                .find(|(n, _)| n.function_name() == Some(name))
                .unwrap();
            let ctx = FunctionContext {
                function,
                file: &self.path,
                presence: &presence,
                tables: &self.tables,
                build: self.build.as_ref(),
            };
            f(&ctx)
        }
    }

    #[test]
    fn guarded_if_mccabe() {
        let fx = Fixture::new("guarded_if.c", GUARDED_IF);
        fx.with("func", |c| {
            assert_eq!(mccabe(c, McCabeMode::Code, None), 2.0);
            assert_eq!(mccabe(c, McCabeMode::Vp, None), 2.0);
            assert_eq!(mccabe(c, McCabeMode::Combined, None), 3.0);
        });
    }

    #[test]
    fn guarded_if_weighted_by_noc() {
        let fx = Fixture::new("guarded_if.c", GUARDED_IF);
        let m = FeatureModel::parse(
            "feature A type=bool file=m\nfeature B type=bool file=m\n\
             constraint of=A A || B\nconstraint of=B B || A\nconstraint A && B\n",
            "m",
        )
        .unwrap();
        let w = WeightFunction::noc(&m, NocMode::All);
        fx.with("func", |c| assert_eq!(mccabe(c, McCabeMode::Vp, Some(&w)), 4.0));
    }

    #[test]
    fn empty_function() {
        let fx = Fixture::new("e.c", "void e() {\n}\n");
        fx.with("e", |c| {
            for mode in [McCabeMode::Code, McCabeMode::Vp, McCabeMode::Combined] {
                assert_eq!(mccabe(c, mode, None), 1.0);
            }
            assert_eq!(nesting_depth(c, NestingScope::Combined, Aggregation::Avg), 0.0);
            assert_eq!(loc_family(c, LocKind::PLoF), 0.0);
        });
    }

    #[test]
    fn mccabe_counts_only_decisions() {
        let src = "int f() {\nif (a) {\nx;\n} else if (b) {\ny;\n} else {\nz;\n}\n\
                   switch (x) {\ncase 1:\nbreak;\ndefault:\nbreak;\n}\n\
                   while (a) {\n}\ndo {\n} while (b);\nfor (;;) {\n}\nreturn 0;\n}\n";
        let fx = Fixture::new("f.c", src);
        // if, else-if, case, while, do-while, for
        fx.with("f", |c| assert_eq!(mccabe(c, McCabeMode::Code, None), 7.0));
    }

    #[test]
    fn guarded_if_nesting_and_loc() {
        let fx = Fixture::new("guarded_if.c", GUARDED_IF);
        fx.with("func", |c| {
            assert_eq!(nesting_depth(c, NestingScope::Code, Aggregation::Max), 1.0);
            assert_eq!(nesting_depth(c, NestingScope::Vp, Aggregation::Max), 1.0);
            assert_eq!(nesting_depth(c, NestingScope::Combined, Aggregation::Max), 2.0);
            // header at 0+1, statement at 1+1
            assert_eq!(nesting_depth(c, NestingScope::Combined, Aggregation::Avg), 1.5);
            assert_eq!(loc_family(c, LocKind::LoC), 2.0);
            assert_eq!(loc_family(c, LocKind::LoF), 2.0);
            assert_eq!(loc_family(c, LocKind::PLoF), 1.0);
        });
    }

    #[test]
    fn avg_depth_arithmetic() {
        let fx = Fixture::new("f.c", "int f() {\nwhile (a) {\nif (b) {\nx;\n}\n}\n}\n");
        // units: while 0, if 1, x 2
        fx.with("f", |c| {
            assert_eq!(nesting_depth(c, NestingScope::Code, Aggregation::Avg), 1.0);
            assert_eq!(nesting_depth(c, NestingScope::Vp, Aggregation::Max), 0.0);
        });
    }

    #[test]
    fn plain_function_loc() {
        let fx = Fixture::new("f.c", "int f() {\na;\nb;\nc;\nd;\nreturn 0;\n}\n");
        fx.with("f", |c| {
            assert_eq!(
                [LocKind::LoC, LocKind::LoF, LocKind::PLoF].map(|k| loc_family(c, k)),
                [5.0, 0.0, 0.0]
            );
        });
    }

    #[test]
    fn guarded_if_features_per_function() {
        let mut fx = Fixture::new("drivers/net/guarded_if.c", GUARDED_IF);
        fx.build = Some(BuildModel::parse("drivers/net/** :: NET\n", "b").unwrap());
        fx.with("func", |c| {
            let values: Vec<f64> = (1..=5).map(|v| features_per_function(c, v, None)).collect();
            assert_eq!(values, [1.0, 0.0, 1.0, 1.0, 2.0]);
        });
    }

    #[test]
    fn guarded_function_presence() {
        let src = "#if B\nint f() {\n#ifdef A\nx;\n#endif\nreturn 0;\n}\n#endif\n";
        let fx = Fixture::new("f.c", src);
        fx.with("f", |c| {
            let values: Vec<f64> = (1..=5).map(|v| features_per_function(c, v, None)).collect();
            assert_eq!(values, [1.0, 1.0, 1.0, 2.0, 2.0]);
            // the enclosing #if is not part of the function
            assert_eq!(loc_family(c, LocKind::LoF), 1.0);
            assert_eq!(blocks_per_function(c, BlockMode::IfOnly), 1.0);
        });
    }

    #[test]
    fn blocks_and_tangling() {
        let src = "int f() {\n#if A\nx;\n#elif B\ny;\n#else\nz;\n#endif\n\
                   #if A && B\n#if A\nw;\n#endif\n#endif\nreturn 0;\n}\n";
        let fx = Fixture::new("f.c", src);
        fx.with("f", |c| {
            assert_eq!(blocks_per_function(c, BlockMode::IfOnly), 3.0);
            assert_eq!(blocks_per_function(c, BlockMode::SeparateElse), 5.0);
            // A, B, A+B, A
            assert_eq!(tangling_degree(c, None), 5.0);
            // four opening/elif blocks
            assert_eq!(mccabe(c, McCabeMode::Vp, None), 5.0);
        });
    }

    #[test]
    fn guarded_if_blocks_and_td() {
        let fx = Fixture::new("guarded_if.c", GUARDED_IF);
        fx.with("func", |c| {
            assert_eq!(blocks_per_function(c, BlockMode::IfOnly), 1.0);
            assert_eq!(blocks_per_function(c, BlockMode::SeparateElse), 1.0);
            assert_eq!(tangling_degree(c, None), 1.0);
        });
    }

    #[test]
    fn fan_modes() {
        let src = "int g() {\nreturn 0;\n}\nint f() {\ng();\n#if A\ng();\n#endif\nreturn 0;\n}\n";
        let fx = Fixture::new("f.c", src);
        let one = WeightFunction::constant_one();
        fx.with("f", |c| {
            assert_eq!(fan(c, Direction::Out, FanMode::Classical, None), 1.0);
            assert_eq!(fan(c, Direction::Out, FanMode::Conditional, None), 1.0);
            assert_eq!(fan(c, Direction::Out, FanMode::Weighted, Some(&one)), 1.0);
            assert_eq!(fan(c, Direction::In, FanMode::Classical, None), 0.0);
        });
        fx.with("g", |c| {
            assert_eq!(fan(c, Direction::In, FanMode::Classical, None), 1.0);
            assert_eq!(fan(c, Direction::In, FanMode::Conditional, None), 1.0);
            assert_eq!(fan(c, Direction::Out, FanMode::Classical, None), 0.0);
        });
    }
}
