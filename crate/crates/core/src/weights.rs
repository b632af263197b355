//! Feature metrics usable as weights in place of the +1 per feature.

use std::collections::{BTreeMap, HashMap};

use crate::preprocess::GlobalTables;
use crate::varmodel::{FeatureModel, FeatureType};

#[derive(Debug, Clone, PartialEq)]
pub struct WeightConfig {
    pub type_weights: BTreeMap<FeatureType, f64>,
    /// Top-level, intermediate and leaf weights.
    pub hierarchy_weights: (f64, f64, f64),
    pub locality_fallback: f64,
}

impl Default for WeightConfig {
    fn default() -> Self {
        WeightConfig {
            type_weights: FeatureType::ALL.into_iter().map(|t| (t, 1.0)).collect(),
            hierarchy_weights: (1.0, 1.0, 1.0),
            locality_fallback: 1.0,
        }
    }
}

impl WeightConfig {
    pub fn type_weight(&self, ftype: FeatureType) -> f64 {
        self.type_weights.get(&ftype).copied().unwrap_or(1.0)
    }

    /// All configured values must be finite and non-negative.
    pub fn validate(&self) -> Result<(), String> {
        let (top, mid, leaf) = self.hierarchy_weights;
        let values = self
            .type_weights
            .values()
            .copied()
            .chain([top, mid, leaf, self.locality_fallback]);
        for v in values {
            if !v.is_finite() || v < 0.0 {
                return Err(format!("weight {v} must be a finite number >= 0"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NocMode {
    All,
    Out,
    In,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CocMode {
    Children,
    ChildrenPlusConstraints,
}

#[derive(Debug, Clone, PartialEq)]
enum Table {
    Constant(f64),
    Lookup {
        values: HashMap<String, f64>,
        default: f64,
    },
    Locality {
        /// Directories (as component lists) of each feature's defining files.
        dirs: HashMap<String, Vec<Vec<String>>>,
        fallback: f64,
    },
}

/// A named mapping from feature to a non-negative value.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightFunction {
    id: String,
    table: Table,
    scale: f64,
}

impl WeightFunction {
    pub fn id(&self) -> &str {
        &self.id
    }

    /// Value of `feature` as used in `code_file` (only Locality looks at the
    /// file).
    pub fn evaluate(&self, feature: &str, code_file: &str) -> f64 {
        let raw = match &self.table {
            Table::Constant(v) => *v,
            Table::Lookup { values, default } => values.get(feature).copied().unwrap_or(*default),
            Table::Locality { dirs, fallback } => match dirs.get(feature) {
                Some(model_dirs) if !model_dirs.is_empty() => {
                    let code_dir = directory_of(code_file);
                    model_dirs
                        .iter()
                        .map(|d| distance(&code_dir, d) as f64)
                        .fold(f64::INFINITY, f64::min)
                }
                _ => *fallback,
            },
        };
        raw * self.scale
    }

    /// The same function multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> WeightFunction {
        WeightFunction {
            scale: self.scale * factor,
            ..self.clone()
        }
    }

    fn new(id: impl Into<String>, table: Table) -> Self {
        WeightFunction {
            id: id.into(),
            table,
            scale: 1.0,
        }
    }

    fn lookup<F>(id: &str, model: &FeatureModel, value: F) -> Self
    where
        F: Fn(&str) -> f64,
    {
        let values = model.features.keys().map(|name| (name.clone(), value(name))).collect();
        WeightFunction::new(id, Table::Lookup { values, default: 0.0 })
    }

    pub fn constant_one() -> Self {
        WeightFunction::new("One", Table::Constant(1.0))
    }

    /// Variation points using the feature. Pseudo-features weigh 0.
    pub fn sd_vp(model: &FeatureModel, tables: &GlobalTables) -> Self {
        Self::lookup("SD[vp]", model, |f| declared(model, f, tables.sd_vp(f) as f64))
    }

    pub fn sd_file(model: &FeatureModel, tables: &GlobalTables) -> Self {
        Self::lookup("SD[file]", model, |f| declared(model, f, tables.sd_file(f) as f64))
    }

    pub fn feature_size(model: &FeatureModel, tables: &GlobalTables) -> Self {
        Self::lookup("FeatureSize", model, |f| {
            declared(model, f, tables.feature_size(f) as f64)
        })
    }

    pub fn noc(model: &FeatureModel, mode: NocMode) -> Self {
        let id = match mode {
            NocMode::All => "NoC[all]",
            NocMode::Out => "NoC[out]",
            NocMode::In => "NoC[in]",
        };
        Self::lookup(id, model, |f| declared(model, f, noc(model, f, mode) as f64))
    }

    pub fn coc(model: &FeatureModel, mode: CocMode) -> Self {
        let id = match mode {
            CocMode::Children => "CoC[children]",
            CocMode::ChildrenPlusConstraints => "CoC[children+constraints]",
        };
        Self::lookup(id, model, |f| {
            let mut n = model.children(f).count();
            if mode == CocMode::ChildrenPlusConstraints {
                n += noc(model, f, NocMode::In) + noc(model, f, NocMode::Out);
            }
            declared(model, f, n as f64)
        })
    }

    /// Configured weight of the feature's type; unknown names count as bool.
    pub fn feature_type(model: &FeatureModel, config: &WeightConfig) -> Self {
        let values = model
            .features
            .values()
            .map(|f| (f.name.clone(), config.type_weight(f.ftype)))
            .collect();
        WeightFunction::new(
            "FeatureType",
            Table::Lookup {
                values,
                default: config.type_weight(FeatureType::Bool),
            },
        )
    }

    /// Parent edges up to the root; top-level features are at level 0.
    pub fn hierarchy_level(model: &FeatureModel) -> Self {
        Self::lookup("Hierarchy[level]", model, |f| {
            let mut level = 0usize;
            let mut current = model.features.get(f).and_then(|x| x.parent.as_deref());
            while let Some(parent) = current {
                level += 1;
                current = model.features.get(parent).and_then(|x| x.parent.as_deref());
            }
            level as f64
        })
    }

    /// Role weights: no parent is top (even without children), no children
    /// is leaf, anything else intermediate.
    pub fn hierarchy_roles(model: &FeatureModel, config: &WeightConfig) -> Self {
        let (top, mid, leaf) = config.hierarchy_weights;
        let values = model
            .features
            .values()
            .map(|f| {
                let w = if f.parent.is_none() {
                    top
                } else if model.children(&f.name).next().is_none() {
                    leaf
                } else {
                    mid
                };
                (f.name.clone(), w)
            })
            .collect();
        WeightFunction::new("Hierarchy[roles]", Table::Lookup { values, default: top })
    }

    /// Shortest directory distance between the code file and any file
    /// defining the feature.
    pub fn locality(model: &FeatureModel, config: &WeightConfig) -> Self {
        let dirs = model
            .features
            .values()
            .map(|f| {
                let dirs = f.defining_files.iter().map(|p| directory_of(p)).collect();
                (f.name.clone(), dirs)
            })
            .collect();
        WeightFunction::new(
            "Locality",
            Table::Locality {
                dirs,
                fallback: config.locality_fallback,
            },
        )
    }
}

fn declared(model: &FeatureModel, feature: &str, value: f64) -> f64 {
    if model.is_declared(feature) {
        value
    } else {
        0.0
    }
}

/// Number of constraints mentioning `feature`, by attachment.
pub fn noc(model: &FeatureModel, feature: &str, mode: NocMode) -> usize {
    let attached = model
        .features
        .values()
        .flat_map(|owner| owner.attached_constraints.iter().map(move |c| (Some(&owner.name), c)));
    let global = model.global_constraints.iter().map(|c| (None, c));
    attached
        .chain(global)
        .filter(|(owner, c)| {
            let own = owner.is_some_and(|o| o == feature);
            match mode {
                NocMode::All => c.mentions(feature),
                NocMode::Out => own,
                NocMode::In => !own && c.mentions(feature),
            }
        })
        .count()
}

fn directory_of(path: &str) -> Vec<String> {
    let mut parts: Vec<String> = path
        .split('/')
        .filter(|p| !p.is_empty() && *p != ".")
        .map(str::to_string)
        .collect();
    parts.pop();
    parts
}

/// Edges between two directories in the directory tree.
pub fn distance(a: &[String], b: &[String]) -> usize {
    let common = a.iter().zip(b).take_while(|(x, y)| x == y).count();
    (a.len() - common) + (b.len() - common)
}

/// Every weight function, in a fixed order.
#[derive(Debug, Clone)]
pub struct WeightCatalog {
    functions: Vec<WeightFunction>,
}

impl WeightCatalog {
    pub fn build(model: &FeatureModel, tables: &GlobalTables, config: &WeightConfig) -> Self {
        let functions = vec![
            WeightFunction::constant_one(),
            WeightFunction::sd_vp(model, tables),
            WeightFunction::sd_file(model, tables),
            WeightFunction::feature_size(model, tables),
            WeightFunction::noc(model, NocMode::All),
            WeightFunction::noc(model, NocMode::Out),
            WeightFunction::noc(model, NocMode::In),
            WeightFunction::coc(model, CocMode::Children),
            WeightFunction::coc(model, CocMode::ChildrenPlusConstraints),
            WeightFunction::feature_type(model, config),
            WeightFunction::hierarchy_level(model),
            WeightFunction::hierarchy_roles(model, config),
            WeightFunction::locality(model, config),
        ];
        WeightCatalog { functions }
    }

    /// Canonical ids in catalog order, usable without any model.
    pub const IDS: [&'static str; 13] = [
        "One",
        "SD[vp]",
        "SD[file]",
        "FeatureSize",
        "NoC[all]",
        "NoC[out]",
        "NoC[in]",
        "CoC[children]",
        "CoC[children+constraints]",
        "FeatureType",
        "Hierarchy[level]",
        "Hierarchy[roles]",
        "Locality",
    ];

    pub fn get(&self, id: &str) -> Option<&WeightFunction> {
        self.functions.iter().find(|w| w.id == id)
    }

    pub fn iter(&self) -> impl Iterator<Item = &WeightFunction> {
        self.functions.iter()
    }

    pub fn len(&self) -> usize {
        self.functions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.functions.is_empty()
    }
}
