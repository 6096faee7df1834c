//! Configurations (feature selections plus attribute values) and the
//! validity check against a feature model.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::EvalError;
use crate::formula::{Environment, Formula};
use crate::model::{FeatureId, FeatureModel, Variation};

/// Attribute values by attribute name.
pub type Valuation = BTreeMap<String, i64>;

#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct Configuration {
    pub selected: BTreeSet<FeatureId>,
    pub attributes: Valuation,
}

impl Configuration {
    pub fn new(selected: impl IntoIterator<Item = FeatureId>, attributes: Valuation) -> Self {
        Configuration { selected: selected.into_iter().collect(), attributes }
    }

    /// Builds a configuration from feature names.
    pub fn from_names<S: AsRef<str>>(
        model: &FeatureModel,
        names: impl IntoIterator<Item = S>,
        attributes: Valuation,
    ) -> Result<Self, EvalError> {
        let selected = names
            .into_iter()
            .map(|n| model.id(n.as_ref()).ok_or_else(|| EvalError::UnknownSymbol(n.as_ref().to_string())))
            .collect::<Result<_, _>>()?;
        Ok(Configuration { selected, attributes })
    }

    pub fn is_selected(&self, id: FeatureId) -> bool {
        self.selected.contains(&id)
    }

    pub fn names<'m>(&self, model: &'m FeatureModel) -> Vec<&'m str> {
        self.selected.iter().map(|&id| model.name_of(id)).collect()
    }

    /// Bit `i` set iff feature `i` is selected. Only meaningful for models
    /// with at most 64 features.
    pub fn mask(&self) -> u64 {
        self.selected.iter().fold(0, |m, id| m | (1u64 << id.0))
    }

    pub fn with<'a>(&'a self, model: &'a FeatureModel) -> ConfigView<'a> {
        ConfigView { model, config: self }
    }
}

/// A configuration seen through its model, so formulas can resolve names.
#[derive(Debug, Clone, Copy)]
pub struct ConfigView<'a> {
    pub model: &'a FeatureModel,
    pub config: &'a Configuration,
}

impl Environment for ConfigView<'_> {
    fn is_selected(&self, feature: &str) -> Option<bool> {
        self.model.id(feature).map(|id| self.config.is_selected(id))
    }

    fn attribute(&self, attribute: &str) -> Option<i64> {
        self.config.attributes.get(attribute).copied()
    }
}

pub fn eval_formula(model: &FeatureModel, formula: &Formula, config: &Configuration) -> Result<bool, EvalError> {
    formula.eval(&config.with(model))
}

/// A reason a configuration is invalid; each maps to one validity clause.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConfigViolation {
    UnknownFeature(u32),
    RootNotSelected,
    ParentNotSelected { feature: String, parent: String },
    MandatoryMissing { parent: String, child: String },
    XorViolation { parent: String, selected: usize },
    OrViolation { parent: String },
    OrphanGroupMember { parent: String, member: String },
    ConstraintViolated { label: String },
}

impl fmt::Display for ConfigViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigViolation::UnknownFeature(id) => write!(f, "feature #{id} is not in the model"),
            ConfigViolation::RootNotSelected => write!(f, "root is not selected"),
            ConfigViolation::ParentNotSelected { feature, parent } => {
                write!(f, "`{feature}` is selected but its parent `{parent}` is not")
            }
            ConfigViolation::MandatoryMissing { parent, child } => {
                write!(f, "mandatory `{child}` of selected `{parent}` is not selected")
            }
            ConfigViolation::XorViolation { parent, selected } => {
                write!(f, "xor group under `{parent}` has {selected} selected members; exactly 1 required")
            }
            ConfigViolation::OrViolation { parent } => {
                write!(f, "or group under `{parent}` has no selected member")
            }
            ConfigViolation::OrphanGroupMember { parent, member } => {
                write!(f, "group member `{member}` is selected but `{parent}` is not")
            }
            ConfigViolation::ConstraintViolated { label } => write!(f, "constraint {label} is violated"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Valid,
    Invalid(Vec<ConfigViolation>),
}

impl Verdict {
    pub fn is_valid(&self) -> bool {
        matches!(self, Verdict::Valid)
    }

    pub fn violations(&self) -> &[ConfigViolation] {
        match self {
            Verdict::Valid => &[],
            Verdict::Invalid(v) => v,
        }
    }
}

/// Checks the tree relations and every cross-tree constraint.
///
/// The model is assumed well-formed. Constraint evaluation errors (an
/// unvalued attribute) are returned rather than folded into the verdict.
pub fn is_valid_configuration(model: &FeatureModel, config: &Configuration) -> Result<Verdict, EvalError> {
    let mut out = Vec::new();
    let n = model.len() as u32;
    for id in &config.selected {
        if id.0 >= n {
            out.push(ConfigViolation::UnknownFeature(id.0));
        }
    }
    let on = |id: FeatureId| config.is_selected(id);
    let name = |id: FeatureId| model.name_of(id).to_string();

    if !on(model.root()) {
        out.push(ConfigViolation::RootNotSelected);
    }
    for (id, f) in model.features() {
        let Some(parent) = f.parent else { continue };
        let grouped = model.group_of(id).is_some();
        if on(id) && !on(parent) {
            out.push(if grouped {
                ConfigViolation::OrphanGroupMember { parent: name(parent), member: name(id) }
            } else {
                ConfigViolation::ParentNotSelected { feature: name(id), parent: name(parent) }
            });
        }
        if !grouped && f.variation == Variation::Mandatory && on(parent) && !on(id) {
            out.push(ConfigViolation::MandatoryMissing { parent: name(parent), child: name(id) });
        }
    }
    for g in model.groups() {
        if !on(g.parent) {
            continue;
        }
        let count = g.members.iter().filter(|&&m| on(m)).count();
        match g.kind {
            crate::model::GroupKind::Xor if count != 1 => {
                out.push(ConfigViolation::XorViolation { parent: name(g.parent), selected: count })
            }
            crate::model::GroupKind::Or if count == 0 => out.push(ConfigViolation::OrViolation { parent: name(g.parent) }),
            _ => {}
        }
    }
    let view = config.with(model);
    for c in model.constraints() {
        if !c.formula.eval(&view)? {
            out.push(ConfigViolation::ConstraintViolated { label: c.label.clone() });
        }
    }
    Ok(if out.is_empty() { Verdict::Valid } else { Verdict::Invalid(out) })
}
