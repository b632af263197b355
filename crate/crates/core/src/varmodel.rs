//! Feature model and build model loaded from their line-oriented text files.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use globset::{GlobBuilder, GlobMatcher};
use thiserror::Error;

use crate::ast::{parse_condition, VarExpr};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("{origin}:{line}: {message}")]
    Schema {
        origin: String,
        line: usize,
        message: String,
    },
    #[error("{origin}:{line}: feature `{name}` is defined twice")]
    DuplicateFeature { origin: String, line: usize, name: String },
    #[error("cyclic feature hierarchy: {}", .cycle.join(" -> "))]
    CyclicHierarchy { cycle: Vec<String> },
    #[error("features referenced but not modeled: {}", .names.join(", "))]
    UnknownFeatures { names: Vec<String> },
    #[error("cannot read `{path}`: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum FeatureType {
    Bool,
    Tristate,
    Int,
    Hex,
    String,
}

impl FeatureType {
    pub const ALL: [FeatureType; 5] = [
        FeatureType::Bool,
        FeatureType::Tristate,
        FeatureType::Int,
        FeatureType::Hex,
        FeatureType::String,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FeatureType::Bool => "bool",
            FeatureType::Tristate => "tristate",
            FeatureType::Int => "int",
            FeatureType::Hex => "hex",
            FeatureType::String => "string",
        }
    }
}

impl FromStr for FeatureType {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        FeatureType::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| format!("unknown feature type `{s}`"))
    }
}

/// A constraint with the feature names it mentions, computed once at load.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Constraint {
    pub expr: VarExpr,
    pub features: BTreeSet<String>,
}

impl Constraint {
    pub fn new(expr: VarExpr) -> Self {
        let features = expr.referenced_features();
        Constraint { expr, features }
    }

    pub fn mentions(&self, feature: &str) -> bool {
        self.features.contains(feature)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Feature {
    pub name: String,
    pub ftype: FeatureType,
    pub parent: Option<String>,
    pub attached_constraints: Vec<Constraint>,
    /// Empty only for pseudo-features.
    pub defining_files: Vec<String>,
}

impl Feature {
    fn pseudo(name: &str) -> Self {
        Feature {
            name: name.to_string(),
            ftype: FeatureType::Bool,
            parent: None,
            attached_constraints: Vec::new(),
            defining_files: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FeatureModel {
    pub features: BTreeMap<String, Feature>,
    pub global_constraints: Vec<Constraint>,
    /// Names referenced but never declared. They are present in `features`
    /// with default attributes.
    pub pseudo_features: BTreeSet<String>,
}

impl FeatureModel {
    pub fn load(path: &Path) -> Result<Self, ModelError> {
        let text = read(path)?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn parse(text: &str, origin: &str) -> Result<Self, ModelError> {
        let schema = |line: usize, message: String| ModelError::Schema {
            origin: origin.to_string(),
            line,
            message,
        };

        let mut model = FeatureModel::default();
        let mut pending: Vec<(usize, Option<String>, Constraint)> = Vec::new();
        for (index, raw) in text.lines().enumerate() {
            let line = index + 1;
            let content = strip_comment(raw).trim();
            if content.is_empty() {
                continue;
            }
            let (keyword, rest) = content.split_once(char::is_whitespace).unwrap_or((content, ""));
            match keyword {
                "feature" => {
                    let feature = parse_feature(rest).map_err(|m| schema(line, m))?;
                    if model.features.contains_key(&feature.name) {
                        return Err(ModelError::DuplicateFeature {
                            origin: origin.to_string(),
                            line,
                            name: feature.name,
                        });
                    }
                    model.features.insert(feature.name.clone(), feature);
                }
                "constraint" => {
                    let rest = rest.trim();
                    let (owner, expr_text) = match rest.strip_prefix("of=") {
                        Some(tail) => {
                            let (name, expr) = tail.split_once(char::is_whitespace).unwrap_or((tail, ""));
                            (Some(name.to_string()), expr.trim())
                        }
                        None => (None, rest),
                    };
                    let expr = parse_condition(expr_text).map_err(|e| schema(line, format!("bad constraint: {e}")))?;
                    pending.push((line, owner, Constraint::new(expr)));
                }
                other => return Err(schema(line, format!("unknown entry `{other}`"))),
            }
        }

        for (line, owner, constraint) in pending {
            match owner {
                Some(name) => match model.features.get_mut(&name) {
                    Some(feature) => feature.attached_constraints.push(constraint),
                    None => return Err(schema(line, format!("constraint attached to unknown feature `{name}`"))),
                },
                None => model.global_constraints.push(constraint),
            }
        }

        for feature in model.features.values() {
            if let Some(parent) = &feature.parent {
                if !model.features.contains_key(parent) {
                    return Err(ModelError::Schema {
                        origin: origin.to_string(),
                        line: 0,
                        message: format!("feature `{}` has unknown parent `{parent}`", feature.name),
                    });
                }
            }
        }
        model.check_acyclic()?;

        let referenced: BTreeSet<String> = model.constraints().flat_map(|c| c.features.iter().cloned()).collect();
        model.add_pseudo_features(referenced);
        Ok(model)
    }

    fn check_acyclic(&self) -> Result<(), ModelError> {
        let mut done: BTreeSet<&str> = BTreeSet::new();
        for start in self.features.keys() {
            let mut path: Vec<&str> = Vec::new();
            let mut current = Some(start.as_str());
            while let Some(name) = current {
                if done.contains(name) {
                    break;
                }
                if let Some(pos) = path.iter().position(|n| *n == name) {
                    let mut cycle: Vec<String> = path[pos..].iter().map(|s| s.to_string()).collect();
                    cycle.push(name.to_string());
                    return Err(ModelError::CyclicHierarchy { cycle });
                }
                path.push(name);
                current = self.features[name].parent.as_deref();
            }
            done.extend(path);
        }
        Ok(())
    }

    /// Adds every unknown name as a pseudo-feature and returns the names that
    /// were new.
    pub fn add_pseudo_features<I>(&mut self, names: I) -> Vec<String>
    where
        I: IntoIterator<Item = String>,
    {
        let mut added = Vec::new();
        for name in names {
            if !self.features.contains_key(&name) {
                self.features.insert(name.clone(), Feature::pseudo(&name));
                self.pseudo_features.insert(name.clone());
                added.push(name);
            }
        }
        added
    }

    /// Fails if any pseudo-feature was recorded.
    pub fn require_no_pseudo_features(&self) -> Result<(), ModelError> {
        if self.pseudo_features.is_empty() {
            Ok(())
        } else {
            Err(ModelError::UnknownFeatures {
                names: self.pseudo_features.iter().cloned().collect(),
            })
        }
    }

    pub fn is_declared(&self, name: &str) -> bool {
        self.features.contains_key(name) && !self.pseudo_features.contains(name)
    }

    /// Attached constraints in feature order, then global ones.
    pub fn constraints(&self) -> impl Iterator<Item = &Constraint> {
        self.features
            .values()
            .flat_map(|f| f.attached_constraints.iter())
            .chain(&self.global_constraints)
    }

    pub fn children(&self, name: &str) -> impl Iterator<Item = &Feature> + '_ {
        let name = name.to_string();
        self.features
            .values()
            .filter(move |f| f.parent.as_deref() == Some(name.as_str()))
    }
}

fn parse_feature(rest: &str) -> Result<Feature, String> {
    let mut parts = rest.split_whitespace();
    let name = parts.next().ok_or("feature without a name")?;
    if name.contains('=') {
        return Err(format!("expected a feature name, found `{name}`"));
    }
    let mut ftype = None;
    let mut parent = None;
    let mut files = None;
    for part in parts {
        let (key, value) = part
            .split_once('=')
            .ok_or_else(|| format!("expected key=value, found `{part}`"))?;
        match key {
            "type" => ftype = Some(value.parse::<FeatureType>()?),
            "parent" => parent = Some(value.to_string()),
            "file" => {
                let list: Vec<String> = value.split(',').filter(|p| !p.is_empty()).map(str::to_string).collect();
                files = Some(list);
            }
            other => return Err(format!("unknown attribute `{other}`")),
        }
    }
    let defining_files = files
        .filter(|f| !f.is_empty())
        .ok_or_else(|| format!("feature `{name}` needs file=<path>"))?;
    Ok(Feature {
        name: name.to_string(),
        ftype: ftype.ok_or_else(|| format!("feature `{name}` needs type=<type>"))?,
        parent,
        attached_constraints: Vec::new(),
        defining_files,
    })
}

impl fmt::Display for FeatureModel {
    /// Writes the model back in its input format. Pseudo-features are left
    /// out since loading re-creates them.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for feature in self.features.values() {
            if self.pseudo_features.contains(&feature.name) {
                continue;
            }
            write!(f, "feature {} type={}", feature.name, feature.ftype.as_str())?;
            if let Some(parent) = &feature.parent {
                write!(f, " parent={parent}")?;
            }
            writeln!(f, " file={}", feature.defining_files.join(","))?;
        }
        for feature in self.features.values() {
            for c in &feature.attached_constraints {
                writeln!(f, "constraint of={} {}", feature.name, c.expr)?;
            }
        }
        for c in &self.global_constraints {
            writeln!(f, "constraint {}", c.expr)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct BuildRule {
    pub pattern: String,
    matcher: GlobMatcher,
    pub condition: VarExpr,
}

#[derive(Debug, Clone, Default)]
pub struct BuildModel {
    pub rules: Vec<BuildRule>,
}

impl PartialEq for BuildModel {
    fn eq(&self, other: &Self) -> bool {
        self.rules.len() == other.rules.len()
            && self
                .rules
                .iter()
                .zip(&other.rules)
                .all(|(a, b)| a.pattern == b.pattern && a.condition == b.condition)
    }
}

impl BuildModel {
    pub fn load(path: &Path) -> Result<Self, ModelError> {
        let text = read(path)?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn parse(text: &str, origin: &str) -> Result<Self, ModelError> {
        let mut rules = Vec::new();
        for (index, raw) in text.lines().enumerate() {
            let line = index + 1;
            let content = strip_comment(raw).trim();
            if content.is_empty() {
                continue;
            }
            let schema = |message: String| ModelError::Schema {
                origin: origin.to_string(),
                line,
                message,
            };
            let (pattern, expr) = content
                .split_once("::")
                .ok_or_else(|| schema("expected `<glob> :: <expression>`".into()))?;
            let pattern = pattern.trim();
            let matcher = GlobBuilder::new(pattern)
                .literal_separator(true)
                .build()
                .map_err(|e| schema(format!("bad glob `{pattern}`: {e}")))?
                .compile_matcher();
            let condition = parse_condition(expr.trim()).map_err(|e| schema(format!("bad expression: {e}")))?;
            rules.push(BuildRule {
                pattern: pattern.to_string(),
                matcher,
                condition,
            });
        }
        Ok(BuildModel { rules })
    }

    /// Presence condition of a file: the first matching rule, else True.
    pub fn file_presence(&self, path: &str) -> VarExpr {
        self.rules
            .iter()
            .find(|r| r.matcher.is_match(path))
            .map_or(VarExpr::True, |r| r.condition.clone())
    }
}

impl fmt::Display for BuildModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for rule in &self.rules {
            writeln!(f, "{} :: {}", rule.pattern, rule.condition)?;
        }
        Ok(())
    }
}

fn strip_comment(line: &str) -> &str {
    line.split_once('#').map_or(line, |(head, _)| head)
}

fn read(path: &Path) -> Result<String, ModelError> {
    std::fs::read_to_string(path).map_err(|source| ModelError::Io {
        path: path.display().to_string(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const MODEL: &str = "\
# demo
feature A type=bool file=model/root.fm
feature B type=tristate parent=A file=model/root.fm,drivers/b.fm
constraint of=A A && B
constraint B || !C
";

    #[test]
    fn loads_features_and_constraints() {
        let m = FeatureModel::parse(MODEL, "m").unwrap();
        assert_eq!(m.features.len(), 3);
        assert_eq!(m.features["B"].parent.as_deref(), Some("A"));
        assert_eq!(m.features["B"].defining_files.len(), 2);
        let attached = &m.features["A"].attached_constraints;
        assert_eq!(attached.len(), 1);
        assert_eq!(attached[0].features, BTreeSet::from(["A".to_string(), "B".to_string()]));
        assert_eq!(m.global_constraints.len(), 1);
        assert_eq!(m.pseudo_features, BTreeSet::from(["C".to_string()]));
        assert!(m.is_declared("A"));
        assert!(!m.is_declared("C"));
        assert!(m.require_no_pseudo_features().is_err());
    }

    #[test]
    fn cyclic_hierarchy() {
        let text = "feature B type=bool parent=C file=a\nfeature C type=bool parent=B file=a\n";
        match FeatureModel::parse(text, "m") {
            Err(ModelError::CyclicHierarchy { cycle }) => {
                assert_eq!(cycle.first(), cycle.last());
                assert!(cycle.contains(&"B".to_string()) && cycle.contains(&"C".to_string()));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn self_parent_is_a_cycle() {
        let text = "feature A type=bool parent=A file=a\n";
        assert!(matches!(
            FeatureModel::parse(text, "m"),
            Err(ModelError::CyclicHierarchy { .. })
        ));
    }

    #[test]
    fn schema_errors_carry_locations() {
        for (text, line) in [
            ("feature A type=bool file=a\nfeature A type=bool file=b\n", 2),
            ("\nfeature A type=weird file=a\n", 2),
            ("feature A type=bool\n", 1),
            ("bogus line\n", 1),
            ("constraint of=Z A\n", 1),
            ("constraint A &&\n", 1),
        ] {
            let err = FeatureModel::parse(text, "m").unwrap_err();
            let got = match &err {
                ModelError::Schema { line, .. } | ModelError::DuplicateFeature { line, .. } => *line,
                other => panic!("{other:?}"),
            };
            assert_eq!(got, line, "{text:?}");
        }
        assert!(matches!(
            FeatureModel::parse("feature A type=bool parent=X file=a\n", "m"),
            Err(ModelError::Schema { .. })
        ));
    }

    #[test]
    fn dump_then_load_round_trips() {
        let m = FeatureModel::parse(MODEL, "m").unwrap();
        let again = FeatureModel::parse(&m.to_string(), "dump").unwrap();
        assert_eq!(m, again);
    }

    #[test]
    fn build_model_rules() {
        let b = BuildModel::parse("drivers/net/** :: NET\n# x\nfs/*.c :: FS && !NET\n", "b").unwrap();
        assert_eq!(b.file_presence("drivers/net/e100.c"), VarExpr::atom("NET"));
        assert_eq!(b.file_presence("kernel/x.c"), VarExpr::True);
        assert_eq!(b.file_presence("fs/sub/x.c"), VarExpr::True);
        assert_eq!(BuildModel::parse(&b.to_string(), "dump").unwrap(), b);
    }

    #[test]
    fn first_matching_rule_wins() {
        let a = BuildModel::parse("drivers/** :: DRV\ndrivers/net/** :: NET\n", "b").unwrap();
        let b = BuildModel::parse("drivers/net/** :: NET\ndrivers/** :: DRV\n", "b").unwrap();
        assert_eq!(a.file_presence("drivers/net/x.c"), VarExpr::atom("DRV"));
        assert_eq!(b.file_presence("drivers/net/x.c"), VarExpr::atom("NET"));
    }

    #[test]
    fn build_model_errors() {
        assert!(BuildModel::parse("drivers/net/**\n", "b").is_err());
        assert!(BuildModel::parse("[ :: A\n", "b").is_err());
    }
}
