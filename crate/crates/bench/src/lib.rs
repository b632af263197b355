//! Shared inputs for the benchmarks under `benches/`.

use vmetrics_core::synth::{CorpusSpec, SynthCorpus};
use vmetrics_core::{extract_file, Corpus};

/// A generated corpus of `files` files, reproducible per seed.
pub fn synthetic(files: usize, seed: u64) -> SynthCorpus {
    CorpusSpec {
        files,
        ..CorpusSpec::default()
    }
    .generate(seed)
}

pub fn extract(corpus: &SynthCorpus) -> Corpus {
    Corpus::from_files(
        corpus
            .files
            .iter()
            .map(|f| extract_file(&f.path, &f.text).expect("generated files parse")),
    )
}

#[cfg(test)]
mod tests {
    #[test]
    fn generated_corpus_extracts() {
        let corpus = super::synthetic(3, 1);
        assert_eq!(super::extract(&corpus).files.len(), 3);
    }
}
