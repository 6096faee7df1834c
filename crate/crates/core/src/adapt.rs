//! Re-selection when modeling assumptions change.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::assumptions::{AssumptionEnv, AssumptionError, ModelingAssumptions, Prediction};
use crate::config::Configuration;
use crate::evaluation::{new_session, Session, SessionError};
use crate::kb::{sort_labels, KnowledgeBase, TECHNIQUES_FEATURE};
use crate::recommend::{as_configuration, recommend, ConfigurationError, Recommendation};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Change<T> {
    pub old: T,
    pub new: T,
}

/// Changed fields of [`ModelingAssumptions`], each with its expected old value.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AssumptionDelta {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sample_size: Option<Change<u64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub num_features: Option<Change<u64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prediction: Option<Change<Prediction>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labeled: Option<Change<bool>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text_data: Option<Change<bool>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub known_categories: Option<Change<Option<bool>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub few_features: Option<Change<bool>>,
}

impl AssumptionDelta {
    pub fn is_empty(&self) -> bool {
        self == &AssumptionDelta::default()
    }

    /// The delta that turns `old` into `new`, listing only differing fields.
    pub fn between(old: &ModelingAssumptions, new: &ModelingAssumptions) -> Self {
        fn diff<T: PartialEq + Copy>(a: T, b: T) -> Option<Change<T>> {
            (a != b).then_some(Change { old: a, new: b })
        }
        AssumptionDelta {
            sample_size: diff(old.sample_size, new.sample_size),
            num_features: diff(old.num_features, new.num_features),
            prediction: diff(old.prediction, new.prediction),
            labeled: diff(old.labeled, new.labeled),
            text_data: diff(old.text_data, new.text_data),
            known_categories: diff(old.known_categories, new.known_categories),
            few_features: diff(old.few_features, new.few_features),
        }
    }
}

#[derive(Debug, Clone, Error)]
pub enum AdaptError {
    #[error("the delta changes no field")]
    EmptyDelta,
    #[error("stale delta: {field} is {actual}, the delta expects {expected}")]
    StaleDelta { field: &'static str, expected: String, actual: String },
    #[error("the changed assumptions are invalid: {0}")]
    Invalid(#[from] AssumptionError),
    #[error(transparent)]
    Configuration(ConfigurationError),
}

fn show<T: Serialize>(v: &T) -> String {
    serde_json::to_string(v).expect("assumption fields serialize")
}

fn replace<T: PartialEq + Copy + Serialize>(
    field: &'static str,
    slot: &mut T,
    change: Option<Change<T>>,
) -> Result<(), AdaptError> {
    if let Some(c) = change {
        if *slot != c.old {
            return Err(AdaptError::StaleDelta { field, expected: show(&c.old), actual: show(slot) });
        }
        *slot = c.new;
    }
    Ok(())
}

pub fn apply_delta(a: &ModelingAssumptions, d: &AssumptionDelta) -> Result<ModelingAssumptions, AdaptError> {
    if d.is_empty() {
        return Err(AdaptError::EmptyDelta);
    }
    let mut out = a.clone();
    replace("sample_size", &mut out.sample_size, d.sample_size)?;
    replace("num_features", &mut out.num_features, d.num_features)?;
    replace("prediction", &mut out.prediction, d.prediction)?;
    replace("labeled", &mut out.labeled, d.labeled)?;
    replace("text_data", &mut out.text_data, d.text_data)?;
    replace("known_categories", &mut out.known_categories, d.known_categories)?;
    replace("few_features", &mut out.few_features, d.few_features)?;
    out.validate()?;
    Ok(out)
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureDiff {
    pub selected: Vec<String>,
    pub deselected: Vec<String>,
}

impl FeatureDiff {
    pub fn is_empty(&self) -> bool {
        self.selected.is_empty() && self.deselected.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldChange {
    pub field: String,
    pub old: Value,
    pub new: Value,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdaptationReport {
    pub old: Recommendation,
    pub new: Recommendation,
    /// Constraints whose premise truth differs between the two instantiations.
    pub changed_constraints: Vec<String>,
    /// Technique-tree features selected or deselected between the configurations.
    pub feature_diff: FeatureDiff,
    /// Assumption fields whose value changed.
    pub assumption_diff: Vec<FieldChange>,
}

impl AdaptationReport {
    /// Whether both outcomes name the same category and steps (or neither has a chain).
    pub fn chains_identical(&self) -> bool {
        let key = |r: &Recommendation| r.chain().map(|c| (c.category, c.steps.clone()));
        key(&self.old) == key(&self.new)
    }

    /// Invalidates `session` and opens one over the new chain with the same criterion.
    pub fn restart(&self, session: &mut Session) -> Result<Option<Session>, SessionError> {
        session.invalidate();
        match self.new.chain() {
            Some(chain) => new_session(chain.clone(), session.criterion()).map(Some),
            None => Ok(None),
        }
    }
}

/// The configuration of the chain head, if there is a chain.
fn head_configuration(
    kb: &KnowledgeBase,
    a: &ModelingAssumptions,
    r: &Recommendation,
) -> Result<Option<Configuration>, AdaptError> {
    let Some(chain) = r.chain() else { return Ok(None) };
    let head = kb.model().id(&chain.head()[0]).expect("chain techniques exist");
    as_configuration(kb, a, head).map(Some).map_err(AdaptError::Configuration)
}

fn premise_truths(kb: &KnowledgeBase, a: &ModelingAssumptions, config: Option<&Configuration>) -> Vec<bool> {
    let model = kb.model();
    let env = AssumptionEnv::new(model, a);
    model
        .constraints()
        .iter()
        .map(|c| {
            let premise = c.formula.premise();
            match config {
                Some(cfg) => premise.eval(&cfg.with(model)),
                None => premise.eval(&env),
            }
            .expect("constraint symbols resolve")
        })
        .collect()
}

fn technique_features(kb: &KnowledgeBase, config: Option<&Configuration>) -> BTreeSet<String> {
    let model = kb.model();
    let root = model.id(TECHNIQUES_FEATURE).expect("checked on construction");
    let Some(config) = config else { return BTreeSet::new() };
    config
        .selected
        .iter()
        .filter(|&&id| id != root && model.is_descendant(id, root))
        .map(|&id| model.name_of(id).to_string())
        .collect()
}

fn field_changes(old: &ModelingAssumptions, new: &ModelingAssumptions) -> Vec<FieldChange> {
    let (Value::Object(o), Value::Object(n)) =
        (serde_json::to_value(old).expect("serializable"), serde_json::to_value(new).expect("serializable"))
    else {
        unreachable!("assumptions serialize as objects")
    };
    o.into_iter()
        .filter_map(|(field, old)| {
            let new = n.get(&field).cloned().unwrap_or(Value::Null);
            (old != new).then_some(FieldChange { field, old, new })
        })
        .collect()
}

pub fn reselect(kb: &KnowledgeBase, a: &ModelingAssumptions, d: &AssumptionDelta) -> Result<AdaptationReport, AdaptError> {
    let changed = apply_delta(a, d)?;
    let old: Recommendation = recommend(kb, a).into();
    let new: Recommendation = recommend(kb, &changed).into();
    let old_config = head_configuration(kb, a, &old)?;
    let new_config = head_configuration(kb, &changed, &new)?;

    let before = premise_truths(kb, a, old_config.as_ref());
    let after = premise_truths(kb, &changed, new_config.as_ref());
    let mut changed_constraints: Vec<String> = kb
        .model()
        .constraints()
        .iter()
        .zip(before.iter().zip(&after))
        .filter(|(_, (b, a))| b != a)
        .map(|(c, _)| c.label.clone())
        .collect();
    sort_labels(&mut changed_constraints);

    let old_features = technique_features(kb, old_config.as_ref());
    let new_features = technique_features(kb, new_config.as_ref());
    let order = |set: BTreeSet<&String>| -> Vec<String> {
        let mut v: Vec<String> = set.into_iter().cloned().collect();
        v.sort_by_key(|n| kb.model().id(n));
        v
    };
    let feature_diff = FeatureDiff {
        selected: order(new_features.difference(&old_features).collect()),
        deselected: order(old_features.difference(&new_features).collect()),
    };
    Ok(AdaptationReport { old, new, changed_constraints, feature_diff, assumption_diff: field_changes(a, &changed) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kb::load_knowledge_base;

    fn case() -> ModelingAssumptions {
        ModelingAssumptions::case_study()
    }

    #[test]
    fn stale_and_empty_deltas() {
        let d = AssumptionDelta { sample_size: Some(Change { old: 300, new: 150000 }), ..Default::default() };
        assert!(matches!(apply_delta(&case(), &d), Err(AdaptError::StaleDelta { field: "sample_size", .. })));
        assert!(matches!(apply_delta(&case(), &AssumptionDelta::default()), Err(AdaptError::EmptyDelta)));
        let d = AssumptionDelta { sample_size: Some(Change { old: 299, new: 150000 }), ..Default::default() };
        assert_eq!(apply_delta(&case(), &d).unwrap().sample_size, 150000);
    }

    #[test]
    fn invalid_result_is_rejected() {
        let d = AssumptionDelta { labeled: Some(Change { old: true, new: false }), ..Default::default() };
        assert!(matches!(apply_delta(&case(), &d), Err(AdaptError::Invalid(AssumptionError::KnownCategoriesMissing))));
    }

    #[test]
    fn larger_dataset_switches_to_sgd() {
        let kb = load_knowledge_base().unwrap();
        let d = AssumptionDelta { sample_size: Some(Change { old: 299, new: 150000 }), ..Default::default() };
        let r = reselect(&kb, &case(), &d).unwrap();
        assert_eq!(r.new.chain().unwrap().head(), ["SGDClassifier"]);
        assert!(r.changed_constraints.contains(&"C5.1".to_string()));
        assert!(r.changed_constraints.contains(&"C5.5".to_string()));
        assert!(r.feature_diff.selected.contains(&"SGDClassifier".to_string()));
        assert!(r.feature_diff.deselected.contains(&"LinearSVC".to_string()));
        assert_eq!(r.assumption_diff.len(), 1);
    }

    #[test]
    fn quantity_switches_to_regression() {
        let kb = load_knowledge_base().unwrap();
        let d = AssumptionDelta {
            prediction: Some(Change { old: Prediction::Category, new: Prediction::Quantity }),
            ..Default::default()
        };
        let r = reselect(&kb, &case(), &d).unwrap();
        assert_eq!(r.new.chain().unwrap().steps, [["Lasso", "ElasticNet"]]);
    }

    #[test]
    fn irrelevant_change_leaves_everything() {
        let kb = load_knowledge_base().unwrap();
        let d = AssumptionDelta { num_features: Some(Change { old: 13, new: 12 }), ..Default::default() };
        let r = reselect(&kb, &case(), &d).unwrap();
        assert!(r.chains_identical());
        assert!(r.feature_diff.is_empty());
        assert!(r.changed_constraints.is_empty());
    }

    #[test]
    fn restart_invalidates_the_old_session() {
        let kb = load_knowledge_base().unwrap();
        let chain = recommend(&kb, &case()).unwrap();
        let mut session = new_session(chain, "f1:0.77".parse().unwrap()).unwrap();
        let d = AssumptionDelta { sample_size: Some(Change { old: 299, new: 150000 }), ..Default::default() };
        let fresh = reselect(&kb, &case(), &d).unwrap().restart(&mut session).unwrap().unwrap();
        assert!(session.is_invalidated());
        assert_eq!(fresh.candidates(), ["SGDClassifier"]);
    }
}
