//! From modeling assumptions to a category and an ordered fallback chain,
//! with the constraints consulted along the way.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::find_completion;
use crate::assumptions::{AssumptionEnv, ModelingAssumptions};
use crate::config::Configuration;
use crate::error::AnalysisError;
use crate::kb::{assumption_partial, KnowledgeBase, TechniqueCategory};
use crate::model::{FeatureId, NamedConstraint};

/// One consulted constraint. `value` is the truth of its premise
/// (the left side of `implies`/`iff`) under the assumptions and the
/// techniques chosen so far.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub label: String,
    pub formula: String,
    pub value: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecommendationChain {
    pub category: TechniqueCategory,
    /// Each step holds alternatives of equal rank.
    pub steps: Vec<Vec<String>>,
    pub trace: Vec<TraceEntry>,
}

impl RecommendationChain {
    pub fn head(&self) -> &[String] {
        &self.steps[0]
    }

    pub fn techniques(&self) -> impl Iterator<Item = &str> {
        self.steps.iter().flatten().map(String::as_str)
    }

    pub fn step_of(&self, technique: &str) -> Option<usize> {
        self.steps.iter().position(|s| s.iter().any(|t| t == technique))
    }

    /// `LinearSVC -> KNeighborsClassifier -> SVC|EnsembleClassifiers`
    pub fn render(&self) -> String {
        self.steps.iter().map(|s| s.join("|")).collect::<Vec<_>>().join(" -> ")
    }

    /// Labels whose premise held, in trace order.
    pub fn fired_labels(&self) -> Vec<&str> {
        self.trace.iter().filter(|t| t.value).map(|t| t.label.as_str()).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum NoRecommendationReason {
    MoreDataNeeded,
    ToughLuck,
    IndeterminateAssumptions,
}

impl fmt::Display for NoRecommendationReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NoRecommendationReason::MoreDataNeeded => "more data needed",
            NoRecommendationReason::ToughLuck => "tough luck",
            NoRecommendationReason::IndeterminateAssumptions => "indeterminate assumptions",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Error)]
#[error("{reason}: {detail}")]
pub struct NoRecommendation {
    pub reason: NoRecommendationReason,
    pub detail: String,
    pub trace: Vec<TraceEntry>,
}

impl NoRecommendation {
    fn new(reason: NoRecommendationReason, detail: String, trace: Vec<TraceEntry>) -> Self {
        NoRecommendation { reason, detail, trace }
    }
}

/// Either outcome of [`recommend`], for serialization.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Recommendation {
    Chain(RecommendationChain),
    NoRecommendation(NoRecommendation),
}

impl From<Result<RecommendationChain, NoRecommendation>> for Recommendation {
    fn from(r: Result<RecommendationChain, NoRecommendation>) -> Self {
        match r {
            Ok(c) => Recommendation::Chain(c),
            Err(n) => Recommendation::NoRecommendation(n),
        }
    }
}

impl Recommendation {
    pub fn chain(&self) -> Option<&RecommendationChain> {
        match self {
            Recommendation::Chain(c) => Some(c),
            Recommendation::NoRecommendation(_) => None,
        }
    }

    pub fn trace(&self) -> &[TraceEntry] {
        match self {
            Recommendation::Chain(c) => &c.trace,
            Recommendation::NoRecommendation(n) => &n.trace,
        }
    }
}

fn entry(c: &NamedConstraint, env: &AssumptionEnv<'_>) -> TraceEntry {
    let value = c.formula.premise().eval(env).expect("constraint symbols resolve");
    TraceEntry { label: c.label.clone(), formula: c.formula.instantiate(&|a| env.value_of(a)), value }
}

fn join(labels: &[&str]) -> String {
    labels.join(", ")
}

fn classify(
    kb: &KnowledgeBase,
    a: &ModelingAssumptions,
    env: &AssumptionEnv<'_>,
    trace: &mut Vec<TraceEntry>,
) -> Result<TechniqueCategory, NoRecommendation> {
    let rules = kb.category_rules();
    trace.extend(rules.iter().map(|(c, _)| entry(c, env)));
    let labels: Vec<&str> = rules.iter().map(|(c, _)| c.label.as_str()).collect();
    let fired = kb.fired_categories(env);
    match fired.as_slice() {
        [(_, category)] => Ok(*category),
        [] if a.sample_size <= 50 => Err(NoRecommendation::new(
            NoRecommendationReason::MoreDataNeeded,
            format!("Samplesize {} is not greater than 50; none of {} applies", a.sample_size, join(&labels)),
            trace.clone(),
        )),
        [] => Err(NoRecommendation::new(
            NoRecommendationReason::ToughLuck,
            format!("no technique category fits prediction type {}; none of {} applies", a.prediction, join(&labels)),
            trace.clone(),
        )),
        many => {
            let fired: Vec<String> = many.iter().map(|(c, cat)| format!("{} ({cat})", c.label)).collect();
            Err(NoRecommendation::new(
                NoRecommendationReason::IndeterminateAssumptions,
                format!("several category rules apply: {}", fired.join(", ")),
                trace.clone(),
            ))
        }
    }
}

/// The technique category selected by the category rules.
pub fn classify_problem(kb: &KnowledgeBase, a: &ModelingAssumptions) -> Result<TechniqueCategory, NoRecommendation> {
    let env = AssumptionEnv::new(kb.model(), a);
    classify(kb, a, &env, &mut Vec::new())
}

pub fn recommend(kb: &KnowledgeBase, a: &ModelingAssumptions) -> Result<RecommendationChain, NoRecommendation> {
    let mut env = AssumptionEnv::new(kb.model(), a);
    let mut trace = Vec::new();
    let category = classify(kb, a, &env, &mut trace)?;
    env.select(category.name());

    let entries = kb.entry_constraints(category);
    if let Err(err) = a.validate() {
        let needs: Vec<&str> = entries
            .iter()
            .filter(|c| c.formula.features().contains("Knowncategories"))
            .map(|c| c.label.as_str())
            .collect();
        let detail = if needs.is_empty() { err.to_string() } else { format!("{err} ({} depend on it)", join(&needs)) };
        return Err(NoRecommendation::new(NoRecommendationReason::IndeterminateAssumptions, detail, trace));
    }

    let mut first: Vec<FeatureId> = Vec::new();
    for c in &entries {
        let e = entry(c, &env);
        let fired = e.value;
        trace.push(e);
        if !fired {
            continue;
        }
        let conclusion = c.formula.conclusion().expect("entry constraints are implications");
        let techniques: Vec<FeatureId> =
            conclusion.features().into_iter().filter(|f| kb.is_technique(f)).filter_map(|f| kb.model().id(f)).collect();
        if techniques.is_empty() {
            // A requirement on the assumptions rather than a technique choice.
            if !conclusion.eval(&env).expect("constraint symbols resolve") {
                let text = conclusion.instantiate(&|x| env.value_of(x));
                return Err(NoRecommendation::new(
                    NoRecommendationReason::ToughLuck,
                    format!("{} requires {text} for {category}", c.label),
                    trace,
                ));
            }
        }
        for t in techniques {
            if !first.contains(&t) {
                first.push(t);
            }
        }
    }
    if first.is_empty() {
        let labels: Vec<&str> = entries.iter().map(|c| c.label.as_str()).collect();
        return Err(NoRecommendation::new(
            NoRecommendationReason::ToughLuck,
            format!("no technique applies to {category}; none of {} selects one", join(&labels)),
            trace,
        ));
    }
    first.sort();

    let mut steps: Vec<Vec<String>> = vec![first.iter().map(|&id| kb.model().name_of(id).to_string()).collect()];
    loop {
        let current = steps.last().expect("steps are non-empty").clone();
        for t in &current {
            env.select(t.clone());
        }
        let mut cited: Vec<&str> = Vec::new();
        let mut next: Vec<String> = Vec::new();
        for edge in kb.fallback_edges().iter().filter(|e| current.contains(&e.from)) {
            if !cited.contains(&edge.label.as_str()) {
                cited.push(&edge.label);
                if let Some(c) = kb.model().constraint(&edge.label) {
                    trace.push(entry(c, &env));
                }
            }
            if edge.holds(&env) {
                for t in &edge.to {
                    if !next.contains(t) && !steps.iter().flatten().any(|s| s == t) {
                        next.push(t.clone());
                    }
                }
            }
        }
        if next.is_empty() {
            break;
        }
        steps.push(next);
    }
    Ok(RecommendationChain { category, steps, trace })
}

#[derive(Debug, Clone, Error)]
pub enum ConfigurationError {
    #[error("{0} is not a technique of the knowledge base")]
    UnknownTechnique(String),
    #[error("{technique} is not recommended for these assumptions (chain: {chain})")]
    NotRecommended { technique: String, chain: String },
    #[error(transparent)]
    NoRecommendation(#[from] NoRecommendation),
    #[error("no valid configuration selects {0}")]
    Unsatisfiable(String),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
}

/// A valid configuration of the enforced model for one technique of the chain.
/// Candidates after the first step are configured with `NotWorking` selected.
pub fn as_configuration(
    kb: &KnowledgeBase,
    a: &ModelingAssumptions,
    technique: FeatureId,
) -> Result<Configuration, ConfigurationError> {
    let model = kb.enforced_model();
    let name = (technique.index() < model.len()).then(|| model.name_of(technique));
    let Some(name) = name.filter(|n| kb.is_technique(n)) else {
        return Err(ConfigurationError::UnknownTechnique(technique.to_string()));
    };
    let chain = recommend(kb, a)?;
    let Some(step) = chain.step_of(name) else {
        return Err(ConfigurationError::NotRecommended { technique: name.to_string(), chain: chain.render() });
    };
    let mut partial = assumption_partial(kb, a, step > 0);
    for c in TechniqueCategory::ALL {
        partial.decided.insert(kb.category_feature(c), c == chain.category);
    }
    partial.select(technique);
    find_completion(model, &partial)?.ok_or_else(|| ConfigurationError::Unsatisfiable(name.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assumptions::Prediction;
    use crate::config::is_valid_configuration;
    use crate::kb::load_knowledge_base;

    fn assume(sample_size: u64, prediction: Prediction, labeled: bool) -> ModelingAssumptions {
        ModelingAssumptions { sample_size, prediction, labeled, ..ModelingAssumptions::case_study() }
    }

    #[test]
    fn case_study_chain() {
        let kb = load_knowledge_base().unwrap();
        let chain = recommend(&kb, &ModelingAssumptions::case_study()).unwrap();
        assert_eq!(chain.category, TechniqueCategory::Classification);
        assert_eq!(chain.render(), "LinearSVC -> KNeighborsClassifier -> SVC|EnsembleClassifiers");
        assert_eq!(chain.fired_labels(), ["C2.2", "C5.1", "C5.3", "C5.4"]);
        let labels: Vec<&str> = chain.trace.iter().map(|t| t.label.as_str()).collect();
        assert_eq!(labels, ["C2.1", "C2.2", "C2.3", "C2.4", "C5.1", "C5.5", "C5.2", "C5.3", "C5.4"]);
        assert_eq!(
            chain.trace[4].formula,
            "Classification and Samplesize[299] < 100000 implies LinearSVC"
        );
    }

    #[test]
    fn classify_examples() {
        let kb = load_knowledge_base().unwrap();
        assert_eq!(
            classify_problem(&kb, &assume(299, Prediction::Category, true)),
            Ok(TechniqueCategory::Classification)
        );
        let err = classify_problem(&kb, &assume(40, Prediction::Category, true)).unwrap_err();
        assert_eq!(err.reason, NoRecommendationReason::MoreDataNeeded);
        assert_eq!(
            classify_problem(&kb, &assume(5000, Prediction::None, false)),
            Ok(TechniqueCategory::DimensionalityReduction)
        );
        let err = classify_problem(&kb, &assume(5000, Prediction::Structure, false)).unwrap_err();
        assert_eq!(err.reason, NoRecommendationReason::ToughLuck);
        assert!(err.detail.contains("C2.1"));
    }

    #[test]
    fn unknown_categories_need_few_samples() {
        let kb = load_knowledge_base().unwrap();
        let mut a = assume(20000, Prediction::Category, false);
        a.known_categories = Some(false);
        let err = recommend(&kb, &a).unwrap_err();
        assert_eq!(err.reason, NoRecommendationReason::ToughLuck);
        assert!(err.detail.starts_with("C6.4 requires Samplesize[20000] < 10000"));
        a.known_categories = None;
        let err = recommend(&kb, &a).unwrap_err();
        assert_eq!(err.reason, NoRecommendationReason::IndeterminateAssumptions);
        assert!(err.detail.contains("C6.1"));
    }

    #[test]
    fn text_data_ends_at_naive_bayes() {
        let kb = load_knowledge_base().unwrap();
        let mut a = ModelingAssumptions::case_study();
        a.text_data = true;
        assert_eq!(recommend(&kb, &a).unwrap().render(), "LinearSVC -> NaiveBayes");
    }

    #[test]
    fn configurations_for_case_study() {
        let kb = load_knowledge_base().unwrap();
        let a = ModelingAssumptions::case_study();
        let id = |n| kb.model().id(n).unwrap();
        let c = as_configuration(&kb, &a, id("LinearSVC")).unwrap();
        assert!(is_valid_configuration(kb.enforced_model(), &c).unwrap().is_valid());
        assert!(c.is_selected(id("Classification")) && c.is_selected(id("LinearSVC")));
        assert!(matches!(
            as_configuration(&kb, &a, id("SGDClassifier")),
            Err(ConfigurationError::NotRecommended { .. })
        ));
        let big = assume(150000, Prediction::Category, true);
        let c = as_configuration(&kb, &big, id("SGDClassifier")).unwrap();
        assert!(is_valid_configuration(kb.enforced_model(), &c).unwrap().is_valid());
    }

    #[test]
    fn json_field_names() {
        let kb = load_knowledge_base().unwrap();
        let chain = recommend(&kb, &ModelingAssumptions::case_study()).unwrap();
        let v = serde_json::to_value(&chain).unwrap();
        assert_eq!(v["category"], "Classification");
        assert_eq!(v["steps"], serde_json::json!([["LinearSVC"], ["KNeighborsClassifier"], ["SVC", "EnsembleClassifiers"]]));
        assert_eq!(v["trace"][0].as_object().unwrap().keys().collect::<Vec<_>>(), ["formula", "label", "value"]);
    }
}
