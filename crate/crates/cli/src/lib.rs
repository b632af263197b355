//! Driver for the metric pipeline: configuration, orchestration and CSV
//! output. The `vmetrics` binary is a thin wrapper around [`execute`].

pub mod config;
pub mod report;

use std::collections::BTreeSet;
use std::io::Write;
use std::path::PathBuf;

use thiserror::Error;
use vmetrics_core::extractor::CorpusError;
use vmetrics_core::{
    enumerate_variants, extract_tree, run, BuildModel, Corpus, EngineError, ExtractionConfig, FeatureModel,
    GlobalTables, ModelError, RunInputs, WeightCatalog,
};

pub use config::{ConfigError, Properties, RunConfig};

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error("cannot write `{path}`: {message}")]
    Output { path: PathBuf, message: String },
}

#[derive(Debug, Clone, Copy, Default)]
pub struct DumpOptions {
    pub ast: bool,
    pub tables: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Summary {
    pub files_parsed: usize,
    pub files_failed: usize,
    pub functions: usize,
    pub variants: usize,
    pub failed_cells: usize,
    pub warnings: Vec<String>,
}

impl std::fmt::Display for Summary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "parsed {} files ({} failed), measured {} functions with {} variants, {} failed cells, {} warnings",
            self.files_parsed,
            self.files_failed,
            self.functions,
            self.variants,
            self.failed_cells,
            self.warnings.len()
        )
    }
}

/// Features named by variation points or build rules.
fn referenced_features(corpus: &Corpus, build: Option<&BuildModel>) -> BTreeSet<String> {
    let mut names = BTreeSet::new();
    for tree in corpus.files.values() {
        vmetrics_core::ast::walk(tree, &mut |node, _| {
            if let Some(raw) = node.as_cpp_block().and_then(|b| b.raw_condition.as_ref()) {
                raw.collect_features(&mut names);
            }
        });
    }
    for rule in build.map_or(&[][..], |b| &b.rules) {
        rule.condition.collect_features(&mut names);
    }
    names
}

fn pool(threads: usize) -> Result<rayon::ThreadPool, RunError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| RunError::Engine(EngineError::ThreadPool(e.to_string())))
}

/// Runs extract, preprocess, enumerate and measure, then writes the CSV.
/// Dumps requested by `dumps` go to `dump_out`.
pub fn execute(config: &RunConfig, dumps: DumpOptions, dump_out: &mut dyn Write) -> Result<Summary, RunError> {
    let mut summary = Summary::default();

    let mut model = FeatureModel::load(&config.feature_model)?;
    let build = config.build_model.as_deref().map(BuildModel::load).transpose()?;

    let extraction = ExtractionConfig::new(&config.source_tree).with_threads(config.parse_threads);
    let (corpus, diagnostics) = extract_tree(&extraction)?;
    summary.files_parsed = corpus.files.len();
    summary.files_failed = diagnostics.len();
    for d in &diagnostics {
        summary.warnings.push(format!("{}: {}", d.path, d.error));
    }

    model.add_pseudo_features(referenced_features(&corpus, build.as_ref()));
    for name in &model.pseudo_features {
        let message = format!("feature `{name}` is referenced but not modeled");
        log::warn!("{message}");
        summary.warnings.push(message);
    }
    if config.strict_features {
        model.require_no_pseudo_features()?;
    }

    let output_error = |e: std::io::Error| RunError::Output {
        path: PathBuf::from("<stdout>"),
        message: e.to_string(),
    };
    if dumps.ast {
        dump_out.write_all(corpus.dump().as_bytes()).map_err(output_error)?;
    }

    let tables = pool(config.parse_threads)?.install(|| GlobalTables::build(&corpus));
    if dumps.tables {
        write!(dump_out, "{tables}").map_err(output_error)?;
    }

    let catalog = WeightCatalog::build(&model, &tables, &config.weights);
    let ids: Vec<&str> = catalog.iter().map(|w| w.id()).collect();
    let variants = enumerate_variants(&config.selection, &ids)?;
    let inputs = RunInputs {
        corpus: &corpus,
        build: build.as_ref(),
        tables: &tables,
        catalog: &catalog,
    };
    let measured = run(&inputs, &variants, config.metric_threads)?;
    for failure in &measured.failures {
        let message = format!(
            "{}: {}: {} failed: {}",
            failure.file, failure.function, failure.variant, failure.message
        );
        log::warn!("{message}");
        summary.warnings.push(message);
    }
    summary.functions = measured.rows.len();
    summary.variants = variants.len();
    summary.failed_cells = measured.failures.len();

    let mut buffer = Vec::new();
    report::write_csv(&measured.rows, &variants, &mut buffer).map_err(|e| RunError::Output {
        path: config.output.clone(),
        message: e.to_string(),
    })?;
    if let Some(parent) = config.output.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| RunError::Output {
            path: config.output.clone(),
            message: e.to_string(),
        })?;
    }
    std::fs::write(&config.output, buffer).map_err(|e| RunError::Output {
        path: config.output.clone(),
        message: e.to_string(),
    })?;
    Ok(summary)
}
