//! Reads C-like sources into [`CodeNode`] trees.

mod lexer;
mod parser;

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use globset::{GlobBuilder, GlobSet, GlobSetBuilder};
use rayon::prelude::*;
use thiserror::Error;
use walkdir::WalkDir;

use crate::ast::{CodeNode, ExprError};

pub use parser::extract_file;

#[derive(Debug, Error)]
pub enum ExtractError {
    #[error("line {line}: unbalanced directive: {message}")]
    UnbalancedDirective { line: u32, message: String },
    #[error("line {line}: brace mismatch: {message}")]
    BraceMismatch { line: u32, message: String },
    #[error("line {line}: malformed condition: {source}")]
    MalformedCondition {
        line: u32,
        #[source]
        source: ExprError,
    },
    #[error("file is not decodable source text")]
    UndecodableText,
    #[error("cannot read file: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("source tree `{0}` is not a directory")]
    NotADirectory(PathBuf),
    #[error("parse thread count must be at least 1")]
    InvalidThreads,
    #[error("invalid file pattern `{pattern}`: {source}")]
    BadPattern {
        pattern: String,
        #[source]
        source: globset::Error,
    },
    #[error("no file under `{0}` matches the configured patterns")]
    EmptyCorpus(PathBuf),
    #[error("cannot walk source tree: {0}")]
    Walk(#[from] walkdir::Error),
    #[error("cannot start parser threads: {0}")]
    ThreadPool(#[from] rayon::ThreadPoolBuildError),
}

#[derive(Debug, Clone)]
pub struct ExtractionConfig {
    pub source_tree: PathBuf,
    pub file_globs: Vec<String>,
    pub parse_threads: usize,
}

impl ExtractionConfig {
    pub const DEFAULT_GLOBS: [&'static str; 2] = ["**/*.c", "**/*.h"];

    pub fn new(source_tree: impl Into<PathBuf>) -> Self {
        ExtractionConfig {
            source_tree: source_tree.into(),
            file_globs: Self::DEFAULT_GLOBS.iter().map(|g| g.to_string()).collect(),
            parse_threads: 1,
        }
    }

    pub fn with_threads(mut self, parse_threads: usize) -> Self {
        self.parse_threads = parse_threads;
        self
    }
}

/// A file that failed to parse and was left out of the corpus.
#[derive(Debug)]
pub struct FileDiagnostic {
    pub path: String,
    pub error: ExtractError,
}

/// All successfully parsed files, keyed by path relative to the source tree
/// (always `/`-separated).
#[derive(Debug, Default, Clone, PartialEq, Eq)]
pub struct Corpus {
    pub files: BTreeMap<String, CodeNode>,
}

impl Corpus {
    pub fn from_files<I>(files: I) -> Self
    where
        I: IntoIterator<Item = CodeNode>,
    {
        let files = files
            .into_iter()
            .map(|node| {
                let path = match &node.kind {
                    crate::ast::NodeKind::SourceFile { path } => path.clone(),
                    other => panic!("corpus entries must be SourceFile nodes, got {other:?}"),
                };
                (path, node)
            })
            .collect();
        Corpus { files }
    }

    pub fn is_empty(&self) -> bool {
        self.files.is_empty()
    }

    pub fn dump(&self) -> String {
        let mut out = String::new();
        for tree in self.files.values() {
            let _ = write!(out, "{}", tree.dump());
        }
        out
    }
}

/// Decodes raw file bytes. UTF-8 is tried first, anything else is read as
/// Latin-1. NUL bytes mark the file as binary.
pub fn decode_source(bytes: &[u8]) -> Result<String, ExtractError> {
    if bytes.contains(&0) {
        return Err(ExtractError::UndecodableText);
    }
    match std::str::from_utf8(bytes) {
        Ok(text) => Ok(text.to_string()),
        Err(_) => Ok(bytes.iter().map(|&b| b as char).collect()),
    }
}

fn build_globs(patterns: &[String]) -> Result<GlobSet, CorpusError> {
    let mut builder = GlobSetBuilder::new();
    for pattern in patterns {
        let glob = GlobBuilder::new(pattern)
            .literal_separator(true)
            .build()
            .map_err(|source| CorpusError::BadPattern {
                pattern: pattern.clone(),
                source,
            })?;
        builder.add(glob);
    }
    builder.build().map_err(|source| CorpusError::BadPattern {
        pattern: patterns.join(","),
        source,
    })
}

fn relative_path(root: &Path, path: &Path) -> String {
    path.strip_prefix(root)
        .unwrap_or(path)
        .components()
        .map(|c| c.as_os_str().to_string_lossy())
        .collect::<Vec<_>>()
        .join("/")
}

/// Parses every matching file under the source tree.
///
/// Files that fail to parse are returned as diagnostics and left out of the
/// corpus. The result does not depend on the thread count.
pub fn extract_tree(config: &ExtractionConfig) -> Result<(Corpus, Vec<FileDiagnostic>), CorpusError> {
    if !config.source_tree.is_dir() {
        return Err(CorpusError::NotADirectory(config.source_tree.clone()));
    }
    if config.parse_threads == 0 {
        return Err(CorpusError::InvalidThreads);
    }
    let globs = build_globs(&config.file_globs)?;

    let mut paths = Vec::new();
    for entry in WalkDir::new(&config.source_tree).sort_by_file_name() {
        let entry = entry?;
        if !entry.file_type().is_file() {
            continue;
        }
        let rel = relative_path(&config.source_tree, entry.path());
        if globs.is_match(&rel) {
            paths.push((rel, entry.into_path()));
        }
    }
    if paths.is_empty() {
        return Err(CorpusError::EmptyCorpus(config.source_tree.clone()));
    }
    paths.sort();

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.parse_threads)
        .build()?;
    let results: Vec<(String, Result<CodeNode, ExtractError>)> = pool.install(|| {
        paths
            .par_iter()
            .map(|(rel, abs)| {
                let parsed = std::fs::read(abs)
                    .map_err(ExtractError::from)
                    .and_then(|bytes| decode_source(&bytes))
                    .and_then(|text| extract_file(rel, &text));
                (rel.clone(), parsed)
            })
            .collect()
    });

    let mut corpus = Corpus::default();
    let mut diagnostics = Vec::new();
    for (path, result) in results {
        match result {
            Ok(tree) => {
                corpus.files.insert(path, tree);
            }
            Err(error) => {
                log::warn!("skipping {path}: {error}");
                diagnostics.push(FileDiagnostic { path, error });
            }
        }
    }
    Ok((corpus, diagnostics))
}

#[cfg(test)]
mod tests;
