//! Corpus-wide tables: scattering degrees, feature sizes and the call graph.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;

use rayon::prelude::*;

use crate::ast::{walk, CodeNode, NodeKind, VarExpr};
use crate::extractor::Corpus;

/// One call-graph entry seen from one side of the call.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CallSite {
    pub partner: String,
    /// Presence condition of the call site relative to the calling function.
    pub condition: VarExpr,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct GlobalTables {
    pub sd_vp: BTreeMap<String, usize>,
    pub sd_file: BTreeMap<String, usize>,
    pub feature_size: BTreeMap<String, usize>,
    /// Function name to the calls it makes, sorted. A multiset: repeated
    /// calls stay separate entries.
    pub callees: BTreeMap<String, Vec<CallSite>>,
    pub callers: BTreeMap<String, Vec<CallSite>>,
}

#[derive(Default)]
struct Partial {
    sd_vp: BTreeMap<String, usize>,
    sd_file: BTreeMap<String, usize>,
    feature_size: BTreeMap<String, usize>,
    calls: Vec<(String, String, VarExpr)>,
}

impl Partial {
    fn merge(mut self, other: Partial) -> Partial {
        for (into, from) in [
            (&mut self.sd_vp, other.sd_vp),
            (&mut self.sd_file, other.sd_file),
            (&mut self.feature_size, other.feature_size),
        ] {
            for (k, v) in from {
                *into.entry(k).or_default() += v;
            }
        }
        self.calls.extend(other.calls);
        self
    }
}

impl GlobalTables {
    /// Builds all tables. Files are processed in parallel on the current
    /// rayon pool; the result does not depend on scheduling.
    pub fn build(corpus: &Corpus) -> GlobalTables {
        let known: HashSet<&str> = corpus
            .files
            .values()
            .flat_map(|tree| tree.functions())
            .filter_map(|(f, _)| f.function_name())
            .collect();

        let partial = corpus
            .files
            .par_iter()
            .map(|(_, tree)| file_partial(tree, &known))
            .reduce(Partial::default, Partial::merge);

        let mut tables = GlobalTables {
            sd_vp: partial.sd_vp,
            sd_file: partial.sd_file,
            feature_size: partial.feature_size,
            ..Default::default()
        };
        for (caller, callee, condition) in partial.calls {
            tables.callers.entry(callee.clone()).or_default().push(CallSite {
                partner: caller.clone(),
                condition: condition.clone(),
            });
            tables.callees.entry(caller).or_default().push(CallSite {
                partner: callee,
                condition,
            });
        }
        for sites in tables.callees.values_mut().chain(tables.callers.values_mut()) {
            sites.sort();
        }
        tables
    }

    pub fn sd_vp(&self, feature: &str) -> usize {
        self.sd_vp.get(feature).copied().unwrap_or(0)
    }

    pub fn sd_file(&self, feature: &str) -> usize {
        self.sd_file.get(feature).copied().unwrap_or(0)
    }

    pub fn feature_size(&self, feature: &str) -> usize {
        self.feature_size.get(feature).copied().unwrap_or(0)
    }

    pub fn callees_of(&self, function: &str) -> &[CallSite] {
        self.callees.get(function).map_or(&[], Vec::as_slice)
    }

    pub fn callers_of(&self, function: &str) -> &[CallSite] {
        self.callers.get(function).map_or(&[], Vec::as_slice)
    }
}

fn file_partial(tree: &CodeNode, known: &HashSet<&str>) -> Partial {
    let mut partial = Partial::default();
    let mut in_file: BTreeSet<String> = BTreeSet::new();
    walk(tree, &mut |node, scope| {
        if let Some(block) = node.as_cpp_block() {
            if block.directive.is_variation_point() {
                if let Some(raw) = &block.raw_condition {
                    for feature in raw.referenced_features() {
                        *partial.sd_vp.entry(feature.clone()).or_default() += 1;
                        in_file.insert(feature);
                    }
                }
            }
        } else if node.is_statement_unit() {
            for feature in scope.presence_condition().referenced_features() {
                *partial.feature_size.entry(feature).or_default() += 1;
            }
        }
    });
    for feature in in_file {
        partial.sd_file.insert(feature, 1);
    }

    for (function, _) in tree.functions() {
        let Some(caller) = function.function_name() else {
            continue;
        };
        walk(function, &mut |node, scope| {
            let text = match &node.kind {
                NodeKind::UnparsedCode { text } => text,
                NodeKind::Branch { header, .. }
                | NodeKind::Loop { header, .. }
                | NodeKind::CaseLabel { header, .. } => header,
                _ => return,
            };
            for callee in scan_calls(text) {
                if known.contains(callee) {
                    partial
                        .calls
                        .push((caller.to_string(), callee.to_string(), scope.presence_condition()));
                }
            }
        });
    }
    partial
}

const NOT_CALLS: &[&str] = &[
    "if",
    "while",
    "for",
    "switch",
    "return",
    "sizeof",
    "typeof",
    "alignof",
    "_Alignof",
    "__typeof__",
    "defined",
    "case",
    "do",
    "else",
];

/// Identifiers directly followed by `(`, skipping string and character
/// literals and keywords.
pub fn scan_calls(text: &str) -> Vec<&str> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        if c == b'"' || c == b'\'' {
            i += 1;
            while i < bytes.len() && bytes[i] != c {
                i += if bytes[i] == b'\\' { 2 } else { 1 };
            }
            i += 1;
        } else if c.is_ascii_alphabetic() || c == b'_' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            let word = &text[start..i];
            let mut j = i;
            while j < bytes.len() && bytes[j].is_ascii_whitespace() {
                j += 1;
            }
            if bytes.get(j) == Some(&b'(') && !NOT_CALLS.contains(&word) {
                out.push(word);
            }
        } else if c.is_ascii_digit() {
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
        } else {
            i += 1;
        }
    }
    out
}

impl fmt::Display for GlobalTables {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (title, table) in [
            ("sd_vp", &self.sd_vp),
            ("sd_file", &self.sd_file),
            ("feature_size", &self.feature_size),
        ] {
            writeln!(f, "[{title}]")?;
            for (feature, n) in table {
                writeln!(f, "{feature} = {n}")?;
            }
        }
        writeln!(f, "[calls]")?;
        for (caller, sites) in &self.callees {
            for site in sites {
                writeln!(f, "{caller} -> {} if {}", site.partner, site.condition)?;
            }
        }
        Ok(())
    }
}
