//! Variability-aware code metrics for C-preprocessor annotated source code.
//!
//! The pipeline is: [`extractor`] parses sources into the common [`ast`],
//! [`preprocess`] computes corpus-wide tables, [`weights`] turns the feature
//! model and those tables into per-feature weights, [`code_metrics`]
//! evaluates single functions, and [`variation_engine`] enumerates and runs
//! every metric variant.

pub mod ast;
pub mod code_metrics;
pub mod extractor;
pub mod preprocess;
pub mod synth;
pub mod variation_engine;
pub mod varmodel;
pub mod weights;

pub use ast::{CodeNode, CppBlock, Directive, NodeKind, VarExpr};
pub use extractor::{extract_file, extract_tree, Corpus, ExtractError, ExtractionConfig};
pub use preprocess::GlobalTables;
pub use variation_engine::{
    enumerate_variants, run, EngineError, MeasurementRow, Metric, MetricVariant, RunInputs, RunOutput, Selection,
};
pub use varmodel::{BuildModel, Feature, FeatureModel, FeatureType, ModelError};
pub use weights::{WeightCatalog, WeightConfig, WeightFunction};
