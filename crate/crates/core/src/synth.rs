//! Seeded generator for synthetic C corpora with preprocessor variability.
//!
//! Output is deliberately regular (one statement, header or directive per
//! line) so that tests can rescan it with simple line-based oracles. Used by
//! the property tests, the acceptance suite and the benchmarks.

use std::io;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const DIRECTORIES: &[&str] = &["", "core", "drivers/net", "drivers/usb", "fs"];

/// Shape limits for a generated corpus.
#[derive(Debug, Clone)]
pub struct CorpusSpec {
    pub files: usize,
    pub max_functions_per_file: usize,
    /// Upper bound on statement units per file.
    pub max_statements: usize,
    pub features: usize,
    pub max_depth: usize,
}

impl Default for CorpusSpec {
    fn default() -> Self {
        CorpusSpec {
            files: 10,
            max_functions_per_file: 4,
            max_statements: 50,
            features: 8,
            max_depth: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SynthFile {
    pub path: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SynthCorpus {
    pub files: Vec<SynthFile>,
    pub features: Vec<String>,
    pub functions: Vec<String>,
}

impl SynthCorpus {
    pub fn write_to(&self, root: &Path) -> io::Result<()> {
        for file in &self.files {
            let path = root.join(&file.path);
            if let Some(parent) = path.parent() {
                std::fs::create_dir_all(parent)?;
            }
            std::fs::write(path, &file.text)?;
        }
        Ok(())
    }
}

pub fn feature_name(index: usize) -> String {
    format!("CONFIG_F{index}")
}

impl CorpusSpec {
    pub fn generate(&self, seed: u64) -> SynthCorpus {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let features: Vec<String> = (0..self.features.max(1)).map(feature_name).collect();
        let per_file: Vec<usize> = (0..self.files)
            .map(|_| rng.gen_range(1..=self.max_functions_per_file.max(1)))
            .collect();
        let functions: Vec<String> = per_file
            .iter()
            .enumerate()
            .flat_map(|(file, &n)| (0..n).map(move |k| format!("fn{file}_{k}")))
            .collect();

        let files = per_file
            .iter()
            .enumerate()
            .map(|(index, &count)| {
                let dir = DIRECTORIES[rng.gen_range(0..DIRECTORIES.len())];
                let path = if dir.is_empty() {
                    format!("file{index}.c")
                } else {
                    format!("{dir}/file{index}.c")
                };
                let mut gen = Gen {
                    rng: &mut rng,
                    lines: Vec::new(),
                    budget: self.max_statements,
                    reserve: 0,
                    features: &features,
                    functions: &functions,
                    max_depth: self.max_depth,
                };
                gen.file(index, count);
                SynthFile {
                    path,
                    text: gen.lines.join("\n") + "\n",
                }
            })
            .collect();

        SynthCorpus {
            files,
            features,
            functions,
        }
    }

    /// A single generated file, handy for per-function property tests.
    pub fn generate_file(&self, seed: u64) -> SynthFile {
        let spec = CorpusSpec {
            files: 1,
            ..self.clone()
        };
        spec.generate(seed).files.remove(0)
    }
}

struct Gen<'a> {
    rng: &'a mut ChaCha8Rng,
    lines: Vec<String>,
    budget: usize,
    /// Units still owed to the fixed parts of the remaining functions.
    reserve: usize,
    features: &'a [String],
    functions: &'a [String],
    max_depth: usize,
}

impl Gen<'_> {
    fn emit(&mut self, indent: usize, line: impl AsRef<str>) {
        self.lines.push(format!("{}{}", "  ".repeat(indent), line.as_ref()));
    }

    fn unit(&mut self, indent: usize, line: impl AsRef<str>) {
        self.budget = self.budget.saturating_sub(1);
        self.emit(indent, line);
    }

    fn room(&self, need: usize) -> bool {
        self.budget > self.reserve + need
    }

    fn feature(&mut self) -> String {
        self.features.choose(self.rng).cloned().expect("non-empty")
    }

    fn condition(&mut self) -> String {
        let a = self.feature();
        let b = self.feature();
        match self.rng.gen_range(0..6) {
            0 => format!("#ifdef {a}"),
            1 => format!("#ifndef {a}"),
            2 => format!("#if defined({a}) && defined({b})"),
            3 => format!("#if {a} || !{b}"),
            4 => format!("#if {a} > 2"),
            _ => format!("#if defined({a})"),
        }
    }

    fn file(&mut self, index: usize, count: usize) {
        self.emit(0, format!("/* generated file {index} */"));
        self.emit(0, "#include <stdio.h>");
        for k in 0..count {
            // Global, `int i` and `return` for this and every later function.
            self.reserve = 3 * (count - k);
            if self.rng.gen_bool(0.3) {
                let guard = self.condition();
                self.emit(0, guard);
                self.unit(0, format!("int g{index}_{k};"));
                self.emit(0, "#endif");
            }
            let wrapped = self.rng.gen_bool(0.25);
            if wrapped {
                let guard = self.condition();
                self.emit(0, guard);
            }
            self.emit(0, format!("int fn{index}_{k}(int x) {{"));
            self.unit(1, "int i = 0;");
            self.reserve = 3 * (count - k - 1) + 1;
            self.body(1, 0);
            self.unit(1, "return x + i;");
            self.emit(0, "}");
            if wrapped {
                self.emit(0, "#endif");
            }
        }
    }

    fn body(&mut self, indent: usize, depth: usize) {
        let items = self.rng.gen_range(0..=4);
        for _ in 0..items {
            // Nested structures may add a few units after their bodies.
            if !self.room(12) {
                return;
            }
            let roll = self.rng.gen_range(0..10);
            if depth >= self.max_depth || roll < 5 {
                self.statement(indent);
            } else if roll < 8 {
                self.control(indent, depth);
            } else {
                self.cpp(indent, depth);
            }
        }
    }

    fn call(&mut self) -> String {
        if self.rng.gen_bool(0.2) {
            "printf".to_string()
        } else {
            self.functions.choose(self.rng).cloned().expect("non-empty")
        }
    }

    fn statement(&mut self, indent: usize) {
        let n = self.rng.gen_range(0..10);
        let line = match self.rng.gen_range(0..4) {
            0 => format!("x = x + {n};"),
            1 => {
                let f = self.call();
                format!("x = {f}(x);")
            }
            2 => {
                let f = self.call();
                let g = self.call();
                format!("i = {f}(i) + {g}({n});")
            }
            _ => format!("i += x * {n};"),
        };
        self.unit(indent, line);
    }

    fn control(&mut self, indent: usize, depth: usize) {
        let n = self.rng.gen_range(0..10);
        match self.rng.gen_range(0..5) {
            0 => {
                self.unit(indent, format!("if (x > {n}) {{"));
                self.body(indent + 1, depth + 1);
                match self.rng.gen_range(0..3) {
                    _ if !self.room(4) => {}
                    0 => {
                        self.unit(indent, "} else {");
                        self.body(indent + 1, depth + 1);
                    }
                    1 => {
                        let f = self.call();
                        self.unit(indent, format!("}} else if ({f}(x) < {n}) {{"));
                        self.body(indent + 1, depth + 1);
                    }
                    _ => {}
                }
                self.emit(indent, "}");
            }
            1 => {
                let f = self.call();
                self.unit(indent, format!("while ({f}(x) < {n}) {{"));
                self.body(indent + 1, depth + 1);
                self.emit(indent, "}");
            }
            2 => {
                self.unit(indent, format!("for (i = 0; i < {n}; i++) {{"));
                self.body(indent + 1, depth + 1);
                self.emit(indent, "}");
            }
            3 => {
                self.unit(indent, "do {");
                self.body(indent + 1, depth + 1);
                self.emit(indent, format!("}} while (x < {n});"));
            }
            _ => {
                self.unit(indent, "switch (x) {");
                let cases = self.rng.gen_range(1..=3);
                for c in 0..cases {
                    if c > 0 && !self.room(4) {
                        break;
                    }
                    self.unit(indent, format!("case {c}:"));
                    self.body(indent + 1, depth + 1);
                    self.unit(indent + 1, "break;");
                }
                if self.room(4) && self.rng.gen_bool(0.5) {
                    self.unit(indent, "default:");
                    self.statement(indent + 1);
                }
                self.emit(indent, "}");
            }
        }
    }

    fn cpp(&mut self, indent: usize, depth: usize) {
        let guard = self.condition();
        self.emit(0, guard);
        self.body(indent, depth + 1);
        if self.rng.gen_bool(0.3) {
            let f = self.feature();
            self.emit(0, format!("#elif defined({f})"));
            self.body(indent, depth + 1);
        }
        if self.rng.gen_bool(0.4) {
            self.emit(0, "#else");
            self.body(indent, depth + 1);
        }
        self.emit(0, "#endif");
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::extractor::extract_file;

    #[test]
    fn deterministic_for_a_seed() {
        let spec = CorpusSpec::default();
        assert_eq!(spec.generate(3), spec.generate(3));
        assert_ne!(spec.generate(3), spec.generate(4));
    }

    #[test]
    fn generated_files_parse() {
        let spec = CorpusSpec::default();
        for seed in 0..50 {
            for file in spec.generate(seed).files {
                extract_file(&file.path, &file.text)
                    .unwrap_or_else(|e| panic!("seed {seed} {}: {e}\n{}", file.path, file.text));
            }
        }
    }

    #[test]
    fn respects_statement_budget() {
        let spec = CorpusSpec::default();
        for seed in 0..20 {
            for file in spec.generate(seed).files {
                let tree = extract_file(&file.path, &file.text).unwrap();
                assert!(crate::ast::count_statements(&tree, None) <= spec.max_statements);
            }
        }
    }
}
