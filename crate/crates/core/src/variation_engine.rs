//! Enumerates metric variants and evaluates them for every function.

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};

use rayon::prelude::*;
use thiserror::Error;

use crate::code_metrics::{
    self, Aggregation, BlockMode, Direction, FanMode, FunctionContext, LocKind, McCabeMode, NestingScope,
};
use crate::extractor::Corpus;
use crate::preprocess::GlobalTables;
use crate::varmodel::BuildModel;
use crate::weights::{WeightCatalog, WeightFunction};

/// Joins a metric name and a weight id.
pub const WEIGHT_SEPARATOR: char = '×';

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EngineError {
    #[error("unknown metric `{0}`")]
    UnknownMetric(String),
    #[error("unknown weight `{0}`")]
    UnknownWeight(String),
    #[error("metric selection is empty")]
    EmptySelection,
    #[error("cannot start metric threads: {0}")]
    ThreadPool(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Family {
    McCabe,
    NestingDepth,
    Fan,
    LoC,
    FeaturesPerFunction,
    BlocksPerFunction,
    TanglingDegree,
}

impl Family {
    pub const ALL: [Family; 7] = [
        Family::McCabe,
        Family::NestingDepth,
        Family::Fan,
        Family::LoC,
        Family::FeaturesPerFunction,
        Family::BlocksPerFunction,
        Family::TanglingDegree,
    ];

    /// Long and short spellings accepted in selections.
    pub fn names(self) -> [&'static str; 2] {
        match self {
            Family::McCabe => ["McCabe", "McCabe"],
            Family::NestingDepth => ["NestingDepth", "ND"],
            Family::Fan => ["FanInOut", "Fan"],
            Family::LoC => ["LoC", "LoC"],
            Family::FeaturesPerFunction => ["FeaturesPerFunction", "FpF"],
            Family::BlocksPerFunction => ["BlocksPerFunction", "BpF"],
            Family::TanglingDegree => ["TanglingDegree", "TD"],
        }
    }

    pub fn parse(name: &str) -> Option<Family> {
        let name = name.trim();
        Family::ALL
            .into_iter()
            .find(|f| f.names().iter().any(|n| n.eq_ignore_ascii_case(name)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Metric {
    McCabe(McCabeMode),
    NestingDepth(NestingScope, Aggregation),
    Fan(Direction, FanMode),
    Loc(LocKind),
    FeaturesPerFunction(u8),
    BlocksPerFunction(BlockMode),
    TanglingDegree,
}

impl Metric {
    pub fn all() -> Vec<Metric> {
        let mut out = Vec::new();
        for m in [McCabeMode::Code, McCabeMode::Vp, McCabeMode::Combined] {
            out.push(Metric::McCabe(m));
        }
        for s in [NestingScope::Code, NestingScope::Vp, NestingScope::Combined] {
            for a in [Aggregation::Max, Aggregation::Avg] {
                out.push(Metric::NestingDepth(s, a));
            }
        }
        for d in [Direction::In, Direction::Out] {
            for m in [FanMode::Classical, FanMode::Conditional, FanMode::Weighted] {
                out.push(Metric::Fan(d, m));
            }
        }
        for k in [LocKind::LoC, LocKind::LoF, LocKind::PLoF] {
            out.push(Metric::Loc(k));
        }
        for v in 1..=5 {
            out.push(Metric::FeaturesPerFunction(v));
        }
        for m in [BlockMode::IfOnly, BlockMode::SeparateElse] {
            out.push(Metric::BlocksPerFunction(m));
        }
        out.push(Metric::TanglingDegree);
        out
    }

    pub fn family(self) -> Family {
        match self {
            Metric::McCabe(_) => Family::McCabe,
            Metric::NestingDepth(..) => Family::NestingDepth,
            Metric::Fan(..) => Family::Fan,
            Metric::Loc(_) => Family::LoC,
            Metric::FeaturesPerFunction(_) => Family::FeaturesPerFunction,
            Metric::BlocksPerFunction(_) => Family::BlocksPerFunction,
            Metric::TanglingDegree => Family::TanglingDegree,
        }
    }

    pub fn accepts_weight(self) -> bool {
        matches!(
            self,
            Metric::McCabe(McCabeMode::Vp | McCabeMode::Combined)
                | Metric::Fan(_, FanMode::Weighted)
                | Metric::FeaturesPerFunction(_)
                | Metric::TanglingDegree
        )
    }

    pub fn options(self) -> BTreeMap<&'static str, String> {
        let mut o = BTreeMap::new();
        match self {
            Metric::McCabe(m) => {
                o.insert("mode", lower(m));
            }
            Metric::NestingDepth(s, a) => {
                o.insert("scope", lower(s));
                o.insert("aggregation", lower(a));
            }
            Metric::Fan(d, m) => {
                o.insert("direction", lower(d));
                o.insert("mode", lower(m));
            }
            Metric::Loc(k) => {
                o.insert("kind", format!("{k:?}"));
            }
            Metric::FeaturesPerFunction(v) => {
                o.insert("variant", v.to_string());
            }
            Metric::BlocksPerFunction(m) => {
                o.insert(
                    "mode",
                    match m {
                        BlockMode::IfOnly => "if_only",
                        BlockMode::SeparateElse => "separate_else",
                    }
                    .to_string(),
                );
            }
            Metric::TanglingDegree => {}
        }
        o
    }

    /// Name without weight, e.g. `ND[combined,max]`.
    pub fn base_name(self) -> String {
        let o = self.options();
        match self {
            Metric::McCabe(_) => format!("McCabe[{}]", o["mode"]),
            Metric::NestingDepth(..) => format!("ND[{},{}]", o["scope"], o["aggregation"]),
            Metric::Fan(..) => format!("Fan[{},{}]", o["direction"], o["mode"]),
            Metric::Loc(_) => o["kind"].clone(),
            Metric::FeaturesPerFunction(_) => format!("FpF[{}]", o["variant"]),
            Metric::BlocksPerFunction(_) => format!("BpF[{}]", o["mode"]),
            Metric::TanglingDegree => "TD".to_string(),
        }
    }

    pub fn evaluate(self, ctx: &FunctionContext<'_>, weight: Option<&WeightFunction>) -> f64 {
        match self {
            Metric::McCabe(m) => code_metrics::mccabe(ctx, m, weight),
            Metric::NestingDepth(s, a) => code_metrics::nesting_depth(ctx, s, a),
            Metric::Fan(d, m) => code_metrics::fan(ctx, d, m, weight),
            Metric::Loc(k) => code_metrics::loc_family(ctx, k),
            Metric::FeaturesPerFunction(v) => code_metrics::features_per_function(ctx, v, weight),
            Metric::BlocksPerFunction(m) => code_metrics::blocks_per_function(ctx, m),
            Metric::TanglingDegree => code_metrics::tangling_degree(ctx, weight),
        }
    }
}

fn lower(value: impl std::fmt::Debug) -> String {
    format!("{value:?}").to_ascii_lowercase()
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MetricVariant {
    pub metric: Metric,
    /// `None` is the plain counting variant.
    pub weight_id: Option<String>,
    pub canonical_name: String,
}

impl MetricVariant {
    pub fn new(metric: Metric, weight_id: Option<&str>) -> Self {
        let canonical_name = match weight_id {
            Some(w) => format!("{}{WEIGHT_SEPARATOR}{w}", metric.base_name()),
            None => metric.base_name(),
        };
        MetricVariant {
            metric,
            weight_id: weight_id.map(str::to_string),
            canonical_name,
        }
    }

    pub fn family(&self) -> Family {
        self.metric.family()
    }

    pub fn options(&self) -> BTreeMap<&'static str, String> {
        self.metric.options()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Selection {
    All,
    Families(Vec<Family>),
    Single(String),
}

impl Selection {
    /// Comma-separated family names.
    pub fn families(list: &str) -> Result<Selection, EngineError> {
        let names: Vec<&str> = list.split(',').map(str::trim).filter(|s| !s.is_empty()).collect();
        if names.is_empty() {
            return Err(EngineError::EmptySelection);
        }
        names
            .into_iter()
            .map(|n| Family::parse(n).ok_or_else(|| EngineError::UnknownMetric(n.to_string())))
            .collect::<Result<Vec<_>, _>>()
            .map(Selection::Families)
    }
}

/// Size of the full enumeration for `weights` catalog entries: every
/// weight-consuming metric is offered unweighted plus once per weight.
pub fn full_variant_count(weights: usize) -> usize {
    let unweighted = Metric::all().iter().filter(|m| !m.accepts_weight()).count();
    let weighted = Metric::all().iter().filter(|m| m.accepts_weight()).count();
    unweighted + weighted * (1 + weights)
}

/// Variants for a selection, sorted by canonical name.
pub fn enumerate_variants(selection: &Selection, weight_ids: &[&str]) -> Result<Vec<MetricVariant>, EngineError> {
    let expand = |metric: Metric| {
        let mut v = vec![MetricVariant::new(metric, None)];
        if metric.accepts_weight() {
            v.extend(weight_ids.iter().map(|w| MetricVariant::new(metric, Some(w))));
        }
        v
    };
    let mut variants: Vec<MetricVariant> = match selection {
        Selection::All => Metric::all().into_iter().flat_map(expand).collect(),
        Selection::Families(families) => {
            if families.is_empty() {
                return Err(EngineError::EmptySelection);
            }
            Metric::all()
                .into_iter()
                .filter(|m| families.contains(&m.family()))
                .flat_map(expand)
                .collect()
        }
        Selection::Single(name) => {
            let name = name.trim();
            let (base, weight) = match name.split_once(WEIGHT_SEPARATOR) {
                Some((b, w)) => (b, Some(w)),
                None => (name, None),
            };
            let metric = Metric::all()
                .into_iter()
                .find(|m| m.base_name() == base)
                .ok_or_else(|| EngineError::UnknownMetric(base.to_string()))?;
            if let Some(w) = weight {
                if !metric.accepts_weight() {
                    return Err(EngineError::UnknownMetric(name.to_string()));
                }
                if !weight_ids.contains(&w) {
                    return Err(EngineError::UnknownWeight(w.to_string()));
                }
            }
            vec![MetricVariant::new(metric, weight)]
        }
    };
    variants.sort_by(|a, b| a.canonical_name.cmp(&b.canonical_name));
    variants.dedup();
    Ok(variants)
}

/// Per-function measurements aligned with the variant list. A `None` cell
/// failed to evaluate.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementRow {
    pub file: String,
    pub function: String,
    pub line: u32,
    pub values: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CellFailure {
    pub file: String,
    pub function: String,
    pub variant: String,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunOutput {
    pub rows: Vec<MeasurementRow>,
    pub failures: Vec<CellFailure>,
}

pub struct RunInputs<'a> {
    pub corpus: &'a Corpus,
    pub build: Option<&'a BuildModel>,
    pub tables: &'a GlobalTables,
    pub catalog: &'a WeightCatalog,
}

/// Evaluates every variant on every function, ordered by (file, line).
/// Panicking evaluations become empty cells plus a failure record.
pub fn run(inputs: &RunInputs<'_>, variants: &[MetricVariant], threads: usize) -> Result<RunOutput, EngineError> {
    let weights: Vec<Option<&WeightFunction>> = variants
        .iter()
        .map(|v| match &v.weight_id {
            None => Ok(None),
            Some(id) => inputs
                .catalog
                .get(id)
                .map(Some)
                .ok_or_else(|| EngineError::UnknownWeight(id.clone())),
        })
        .collect::<Result<_, _>>()?;

    let mut functions = Vec::new();
    for (path, tree) in &inputs.corpus.files {
        for (function, presence) in tree.functions() {
            functions.push((path.as_str(), function, presence));
        }
    }
    functions.sort_by_key(|(path, f, _)| (*path, f.start_line));

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| EngineError::ThreadPool(e.to_string()))?;

    let measured: Vec<(MeasurementRow, Vec<CellFailure>)> = pool.install(|| {
        functions
            .par_iter()
            .map(|(path, function, presence)| {
                let ctx = FunctionContext {
                    function,
                    file: path,
                    presence,
                    tables: inputs.tables,
                    build: inputs.build,
                };
                let mut failures = Vec::new();
                let values = variants
                    .iter()
                    .zip(&weights)
                    .map(|(variant, weight)| {
                        let result = catch_unwind(AssertUnwindSafe(|| variant.metric.evaluate(&ctx, *weight)));
                        let message = match result {
                            Ok(v) if v.is_finite() => return Some(v),
                            Ok(v) => format!("non-finite value {v}"),
                            Err(payload) => panic_message(payload.as_ref()),
                        };
                        failures.push(CellFailure {
                            file: path.to_string(),
                            function: ctx.name().to_string(),
                            variant: variant.canonical_name.clone(),
                            message,
                        });
                        None
                    })
                    .collect();
                let row = MeasurementRow {
                    file: path.to_string(),
                    function: ctx.name().to_string(),
                    line: function.start_line,
                    values,
                };
                (row, failures)
            })
            .collect()
    });

    let mut output = RunOutput::default();
    for (row, failures) in measured {
        output.rows.push(row);
        output.failures.extend(failures);
    }
    Ok(output)
}

fn panic_message(payload: &(dyn std::any::Any + Send)) -> String {
    payload
        .downcast_ref::<&str>()
        .map(|s| s.to_string())
        .or_else(|| payload.downcast_ref::<String>().cloned())
        .unwrap_or_else(|| "evaluation panicked".to_string())
}
