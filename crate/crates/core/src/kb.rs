//! The shipped Scikit-Learn knowledge base: the merged feature model, its
//! labeled constraints and the fallback edges between techniques.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::{is_satisfiable, PartialConfiguration};
use crate::assumptions::{AssumptionEnv, ModelingAssumptions, Prediction, NUM_FEATURES, SAMPLE_SIZE};
use crate::dsl::{natural_cmp, parse_formula, parse_model, ParseDiagnostic};
use crate::formula::{Environment, Formula};
use crate::model::{validate_model, FeatureId, FeatureModel, NamedConstraint};

/// The knowledge base in the `.fm` format.
pub const SKLEARN_FM: &str = include_str!("../assets/sklearn.fm");
/// Published baseline rows for the heart-failure case study.
pub const BASELINES_JSON: &str = include_str!("../assets/baselines.json");
/// Metrics reported for LinearSVC in the case study.
pub const CASE_STUDY_REPORT_JSON: &str = include_str!("../assets/linearsvc_report.json");

pub const TECHNIQUES_FEATURE: &str = "ModelingTechniques";
pub const ASSUMPTIONS_FEATURE: &str = "ModelingAssumptions";

/// Constraints kept in the model as printed but left out of reasoning.
pub const DOCUMENTED_ONLY: &[&str] = &["C1.1"];

pub const EXPECTED_LABELS: &[&str] = &[
    "C1.1", "C2.1", "C2.2", "C2.3", "C2.4", "C3.1", "C3.2", "C3.3", "C3.4", "C4.1", "C4.2", "C4.3", "C4.4", "C5.1",
    "C5.2", "C5.3", "C5.4", "C5.5", "C5.6", "C6.1", "C6.2", "C6.3", "C6.4", "C6.5",
];

/// Samplesize values that exercise every threshold in the constraints.
pub const REPRESENTATIVE_SAMPLE_SIZES: [u64; 4] = [60, 5000, 20000, 150000];

// (from, guard, to, cited constraint); an empty guard always holds.
const FALLBACK_TABLE: &[(&str, &str, &[&str], &str)] = &[
    ("LinearSVC", "Textdata", &["NaiveBayes"], "C5.2"),
    ("LinearSVC", "not Textdata", &["KNeighborsClassifier"], "C5.3"),
    ("KNeighborsClassifier", "not Textdata", &["SVC", "EnsembleClassifiers"], "C5.4"),
    ("SGDClassifier", "Samplesize >= 100000", &["KernelApproximation"], "C5.6"),
    ("RidgeRegression", "", &["SVRRbf", "EnsembleRegressors"], "C3.3"),
    ("SVRLinear", "", &["SVRRbf", "EnsembleRegressors"], "C3.3"),
    ("RandomizedPCA", "Samplesize < 10000", &["Isomap", "SpectralEmbedding"], "C4.2"),
    ("Isomap", "Samplesize < 10000", &["LLE"], "C4.3"),
    ("SpectralEmbedding", "Samplesize < 10000", &["LLE"], "C4.3"),
    ("RandomizedPCA", "Samplesize >= 10000", &["KernelApproximationDR"], "C4.4"),
    ("KMeans", "", &["SpectralClustering", "GMM"], "C6.3"),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TechniqueCategory {
    Classification,
    Regression,
    Clustering,
    DimensionalityReduction,
}

impl TechniqueCategory {
    pub const ALL: [TechniqueCategory; 4] = [
        TechniqueCategory::Classification,
        TechniqueCategory::Regression,
        TechniqueCategory::Clustering,
        TechniqueCategory::DimensionalityReduction,
    ];

    /// The feature name in the knowledge base.
    pub fn name(self) -> &'static str {
        match self {
            TechniqueCategory::Classification => "Classification",
            TechniqueCategory::Regression => "Regression",
            TechniqueCategory::Clustering => "Clustering",
            TechniqueCategory::DimensionalityReduction => "DimensionalityReduction",
        }
    }
}

impl fmt::Display for TechniqueCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TechniqueCategory {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        TechniqueCategory::ALL.into_iter().find(|c| c.name() == s).ok_or_else(|| format!("unknown category `{s}`"))
    }
}

/// When `from` does not work and `guard` holds, try `to` next.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FallbackEdge {
    pub from: String,
    pub guard: Option<Formula>,
    pub to: Vec<String>,
    /// The constraint whose flowchart branch this edge follows.
    pub label: String,
}

impl FallbackEdge {
    pub fn new(from: impl Into<String>, guard: Option<Formula>, to: Vec<String>, label: impl Into<String>) -> Self {
        FallbackEdge { from: from.into(), guard, to, label: label.into() }
    }

    pub fn holds(&self, env: &impl Environment) -> bool {
        self.guard.as_ref().is_none_or(|g| g.eval(env).expect("guard symbols are checked on construction"))
    }
}

pub fn default_fallback_edges() -> Vec<FallbackEdge> {
    FALLBACK_TABLE
        .iter()
        .map(|&(from, guard, to, label)| {
            let guard = (!guard.is_empty()).then(|| parse_formula(guard).expect("fallback guards are well-formed"));
            FallbackEdge::new(from, guard, to.iter().map(|t| t.to_string()).collect(), label)
        })
        .collect()
}

#[derive(Debug, Clone, Error)]
pub enum KbError {
    #[error("knowledge base does not parse:\n{}", .0.iter().map(ToString::to_string).collect::<Vec<_>>().join("\n"))]
    Parse(Vec<ParseDiagnostic>),
    #[error("knowledge base lacks feature `{0}`")]
    MissingFeature(String),
    #[error("knowledge base lacks attribute `{0}`")]
    MissingAttribute(String),
    #[error("constraint {label} compares `{attribute}`, which assumptions do not value")]
    UnvaluedAttribute { label: String, attribute: String },
    #[error("fallback edge from `{from}` uses unknown symbol `{symbol}`")]
    UnknownGuardSymbol { from: String, symbol: String },
}

#[derive(Debug, Clone)]
pub struct KnowledgeBase {
    model: FeatureModel,
    enforced: FeatureModel,
    fallback_edges: Vec<FallbackEdge>,
}

/// Parses the embedded asset and attaches the default fallback edges.
pub fn load_knowledge_base() -> Result<KnowledgeBase, KbError> {
    KnowledgeBase::from_source(SKLEARN_FM)
}

impl KnowledgeBase {
    pub fn from_source(text: &str) -> Result<Self, KbError> {
        let model = parse_model(text).map_err(KbError::Parse)?;
        KnowledgeBase::new(model, default_fallback_edges())
    }

    pub fn new(model: FeatureModel, fallback_edges: Vec<FallbackEdge>) -> Result<Self, KbError> {
        let required = [TECHNIQUES_FEATURE, ASSUMPTIONS_FEATURE]
            .into_iter()
            .chain(TechniqueCategory::ALL.map(TechniqueCategory::name))
            .chain(ModelingAssumptions::case_study().feature_literals(false).map(|(n, _)| n));
        for name in required {
            if model.id(name).is_none() {
                return Err(KbError::MissingFeature(name.to_string()));
            }
        }
        for attr in [SAMPLE_SIZE, NUM_FEATURES] {
            if !model.has_attribute(attr) {
                return Err(KbError::MissingAttribute(attr.to_string()));
            }
        }
        for c in model.constraints() {
            if let Some(attr) = c.formula.attributes().into_iter().find(|a| ![SAMPLE_SIZE, NUM_FEATURES].contains(a)) {
                return Err(KbError::UnvaluedAttribute { label: c.label.clone(), attribute: attr.to_string() });
            }
        }
        for e in &fallback_edges {
            if let Some(g) = &e.guard {
                let unknown = g.features().into_iter().find(|f| model.id(f).is_none()).or_else(|| {
                    g.attributes().into_iter().find(|a| ![SAMPLE_SIZE, NUM_FEATURES].contains(a))
                });
                if let Some(symbol) = unknown {
                    return Err(KbError::UnknownGuardSymbol { from: e.from.clone(), symbol: symbol.to_string() });
                }
            }
        }
        let enforced = model.without_constraints(&DOCUMENTED_ONLY.iter().copied().collect());
        Ok(KnowledgeBase { model, enforced, fallback_edges })
    }

    /// The model with every shipped constraint.
    pub fn model(&self) -> &FeatureModel {
        &self.model
    }

    /// The model used for reasoning: shipped constraints minus the documented-only ones.
    pub fn enforced_model(&self) -> &FeatureModel {
        &self.enforced
    }

    pub fn fallback_edges(&self) -> &[FallbackEdge] {
        &self.fallback_edges
    }

    pub fn is_documented_only(&self, label: &str) -> bool {
        DOCUMENTED_ONLY.contains(&label)
    }

    pub fn category_feature(&self, category: TechniqueCategory) -> FeatureId {
        self.model.id(category.name()).expect("categories are checked on construction")
    }

    /// Techniques of a category in declaration order.
    pub fn techniques(&self, category: TechniqueCategory) -> Vec<FeatureId> {
        let cat = self.category_feature(category);
        self.model.feature_ids().filter(|&id| self.model.is_leaf(id) && self.model.is_descendant(id, cat)).collect()
    }

    pub fn technique_names(&self, category: TechniqueCategory) -> Vec<&str> {
        self.techniques(category).into_iter().map(|id| self.model.name_of(id)).collect()
    }

    pub fn category_of(&self, technique: &str) -> Option<TechniqueCategory> {
        let id = self.model.id(technique)?;
        if !self.model.is_leaf(id) {
            return None;
        }
        TechniqueCategory::ALL.into_iter().find(|&c| self.model.is_descendant(id, self.category_feature(c)))
    }

    pub fn is_technique(&self, name: &str) -> bool {
        self.category_of(name).is_some()
    }

    /// Rules of the form `premise iff <category>`, in model order.
    pub fn category_rules(&self) -> Vec<(&NamedConstraint, TechniqueCategory)> {
        self.enforced
            .constraints()
            .iter()
            .filter_map(|c| match &c.formula {
                Formula::Iff(_, rhs) => match rhs.as_ref() {
                    Formula::Feature(name) => name.parse().ok().map(|cat| (c, cat)),
                    _ => None,
                },
                _ => None,
            })
            .collect()
    }

    /// Category rules whose premise holds under `env`.
    pub fn fired_categories(&self, env: &AssumptionEnv<'_>) -> Vec<(&NamedConstraint, TechniqueCategory)> {
        self.category_rules()
            .into_iter()
            .filter(|(c, _)| c.formula.premise().eval(env).expect("constraint symbols resolve"))
            .collect()
    }

    /// Implications that start a chain: the premise names `category` and no technique.
    pub fn entry_constraints(&self, category: TechniqueCategory) -> Vec<&NamedConstraint> {
        self.enforced
            .constraints()
            .iter()
            .filter(|c| matches!(c.formula, Formula::Implies(..)))
            .filter(|c| {
                let premise = c.formula.premise().features();
                premise.contains(category.name()) && !premise.iter().any(|f| self.is_technique(f))
            })
            .collect()
    }

    pub fn without_constraint(&self, label: &str) -> Self {
        let labels = BTreeSet::from([label]);
        KnowledgeBase {
            model: self.model.without_constraints(&labels),
            enforced: self.enforced.without_constraints(&labels),
            fallback_edges: self.fallback_edges.clone(),
        }
    }

    pub fn with_fallback_edge(&self, edge: FallbackEdge) -> Result<Self, KbError> {
        let mut edges = self.fallback_edges.clone();
        edges.push(edge);
        KnowledgeBase::new(self.model.clone(), edges)
    }
}

/// Partial configuration of the enforced model fixing every assumption feature.
pub(crate) fn assumption_partial(
    kb: &KnowledgeBase,
    a: &ModelingAssumptions,
    not_working: bool,
) -> PartialConfiguration {
    let model = kb.enforced_model();
    let mut partial = PartialConfiguration::new(a.valuation());
    for (name, on) in a.feature_literals(not_working) {
        partial.decided.insert(model.id(name).expect("assumption features are checked on construction"), on);
    }
    partial
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub failures: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CheckReport {
    pub checks: Vec<Check>,
    pub notes: Vec<String>,
}

impl CheckReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

impl fmt::Display for CheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            writeln!(f, "{} {}", if c.passed { "ok  " } else { "FAIL" }, c.name)?;
            for msg in &c.failures {
                writeln!(f, "     {msg}")?;
            }
        }
        for n in &self.notes {
            writeln!(f, "note: {n}")?;
        }
        Ok(())
    }
}

fn check(name: &'static str, failures: Vec<String>) -> Check {
    Check { name, passed: failures.is_empty(), failures }
}

/// Every assumption combination over the representative sample sizes.
pub fn representative_assumptions() -> Vec<ModelingAssumptions> {
    let mut out = Vec::new();
    for sample_size in REPRESENTATIVE_SAMPLE_SIZES {
        for prediction in Prediction::ALL {
            for bits in 0..16u8 {
                let flag = |i: u8| bits & (1 << i) != 0;
                let mut a = ModelingAssumptions {
                    sample_size,
                    num_features: 10,
                    prediction,
                    labeled: flag(0),
                    text_data: flag(1),
                    few_features: flag(2),
                    known_categories: None,
                };
                if a.known_categories_required() {
                    a.known_categories = Some(flag(3));
                } else if flag(3) {
                    continue;
                }
                out.push(a);
            }
        }
    }
    out
}

pub fn self_check(kb: &KnowledgeBase) -> CheckReport {
    let model = kb.model();
    let mut checks = Vec::new();

    let mut symbols: Vec<String> = validate_model(model).violations.iter().map(ToString::to_string).collect();
    for e in kb.fallback_edges() {
        if model.constraint(&e.label).is_none() {
            symbols.push(format!("fallback edge from {} cites missing constraint {}", e.from, e.label));
        }
    }
    checks.push(check("symbols", symbols));

    let present: BTreeSet<&str> = model.constraints().iter().map(|c| c.label.as_str()).collect();
    let expected: BTreeSet<&str> = EXPECTED_LABELS.iter().copied().collect();
    let mut labels: Vec<String> =
        expected.difference(&present).map(|l| format!("constraint {l} is missing")).collect();
    labels.extend(present.difference(&expected).map(|l| format!("unexpected constraint {l}")));
    checks.push(check("labels", labels));

    let mut witness: BTreeMap<TechniqueCategory, ModelingAssumptions> = BTreeMap::new();
    for a in representative_assumptions() {
        let env = AssumptionEnv::new(model, &a);
        let fired = kb.fired_categories(&env);
        let [(_, category)] = fired.as_slice() else { continue };
        if witness.contains_key(category) {
            continue;
        }
        let mut partial = assumption_partial(kb, &a, false);
        partial.select(kb.category_feature(*category));
        if is_satisfiable(kb.enforced_model(), &partial).unwrap_or(false) {
            witness.insert(*category, a);
        }
    }
    let derivable = TechniqueCategory::ALL
        .into_iter()
        .filter(|c| !witness.contains_key(c))
        .map(|c| format!("{c}: no assumption valuation selects it through the category rules"))
        .collect();
    checks.push(check("derivable", derivable));

    checks.push(check("acyclic", fallback_cycles(kb.fallback_edges())));

    let mut techniques = Vec::new();
    let consequents: BTreeSet<&str> = kb
        .enforced_model()
        .constraints()
        .iter()
        .filter_map(|c| c.formula.conclusion())
        .flat_map(|f| f.features())
        .collect();
    let mut named = BTreeSet::new();
    for e in kb.fallback_edges() {
        named.insert(e.from.as_str());
        for t in &e.to {
            named.insert(t.as_str());
            if !consequents.contains(t.as_str()) {
                techniques.push(format!("{t} is a fallback target but no constraint derives it"));
            }
        }
    }
    for t in named {
        if !kb.is_technique(t) {
            techniques.push(format!("{t} is not a technique leaf under {TECHNIQUES_FEATURE}"));
        }
    }
    techniques.dedup();
    checks.push(check("fallback-techniques", techniques));

    let notes = DOCUMENTED_ONLY
        .iter()
        .filter_map(|l| model.constraint(l))
        .map(|c| {
            format!(
                "{} ({}) is shipped as printed but not enforced: prediction types form an xor group, \
                 and the printed text would force Category whenever Quantity and Structure are not both selected",
                c.label, c.formula
            )
        })
        .collect();
    CheckReport { checks, notes }
}

/// One message per cycle found in the fallback graph.
fn fallback_cycles(edges: &[FallbackEdge]) -> Vec<String> {
    let mut graph: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
    for e in edges {
        graph.entry(&e.from).or_default().extend(e.to.iter().map(String::as_str));
    }
    // 0 = unvisited, 1 = on stack, 2 = done
    let mut state: BTreeMap<&str, u8> = BTreeMap::new();
    let mut out = Vec::new();
    fn visit<'a>(
        node: &'a str,
        graph: &BTreeMap<&'a str, BTreeSet<&'a str>>,
        state: &mut BTreeMap<&'a str, u8>,
        path: &mut Vec<&'a str>,
        out: &mut Vec<String>,
    ) {
        state.insert(node, 1);
        path.push(node);
        for &next in graph.get(node).into_iter().flatten() {
            match state.get(next).copied().unwrap_or(0) {
                0 => visit(next, graph, state, path, out),
                1 => {
                    let start = path.iter().position(|&p| p == next).unwrap_or(0);
                    let mut cycle = path[start..].to_vec();
                    cycle.push(next);
                    out.push(format!("fallback cycle {}", cycle.join(" -> ")));
                }
                _ => {}
            }
        }
        path.pop();
        state.insert(node, 2);
    }
    for &node in graph.keys() {
        if !state.contains_key(node) {
            visit(node, &graph, &mut state, &mut Vec::new(), &mut out);
        }
    }
    out
}

/// Labels sorted with numeric parts compared as numbers.
pub fn sort_labels<S: AsRef<str>>(labels: &mut [S]) {
    labels.sort_by(|a, b| natural_cmp(a.as_ref(), b.as_ref()));
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kb() -> KnowledgeBase {
        load_knowledge_base().unwrap()
    }

    #[test]
    fn classification_techniques_in_order() {
        assert_eq!(
            kb().technique_names(TechniqueCategory::Classification),
            [
                "LinearSVC",
                "SGDClassifier",
                "SVC",
                "NaiveBayes",
                "KNeighborsClassifier",
                "KernelApproximation",
                "EnsembleClassifiers"
            ]
        );
    }

    #[test]
    fn attributes_and_c6_2() {
        let kb = kb();
        assert!(kb.model().has_attribute("Samplesize") && kb.model().has_attribute("NumFeatures"));
        assert_eq!(
            kb.model().constraint("C6.2").unwrap().formula.to_string(),
            "Clustering and Knowncategories and Samplesize < 10000 implies KMeans"
        );
    }

    #[test]
    fn c1_1_is_only_documented() {
        let kb = kb();
        assert!(kb.model().constraint("C1.1").is_some());
        assert!(kb.enforced_model().constraint("C1.1").is_none());
        assert_eq!(kb.enforced_model().constraints().len(), 23);
    }

    #[test]
    fn entry_constraints_skip_fallback_rules() {
        let kb = kb();
        let labels = |c| kb.entry_constraints(c).iter().map(|c| c.label.clone()).collect::<Vec<_>>();
        assert_eq!(labels(TechniqueCategory::Classification), ["C5.1", "C5.5"]);
        assert_eq!(labels(TechniqueCategory::Regression), ["C3.1", "C3.2", "C3.4"]);
        assert_eq!(labels(TechniqueCategory::Clustering), ["C6.1", "C6.2", "C6.4", "C6.5"]);
        assert_eq!(labels(TechniqueCategory::DimensionalityReduction), ["C4.1"]);
    }

    #[test]
    fn shipped_kb_passes_self_check() {
        let report = self_check(&kb());
        assert!(report.passed(), "{report}");
        assert_eq!(report.notes.len(), 1);
    }

    #[test]
    fn deleting_c2_2_breaks_classification() {
        let report = self_check(&kb().without_constraint("C2.2"));
        let derivable = report.check("derivable").unwrap();
        assert!(!derivable.passed);
        assert_eq!(derivable.failures.len(), 1);
        assert!(derivable.failures[0].starts_with("Classification"));
    }

    #[test]
    fn self_loop_is_a_cycle() {
        let kb = kb().with_fallback_edge(FallbackEdge::new("LinearSVC", None, vec!["LinearSVC".into()], "C5.1")).unwrap();
        let acyclic = self_check(&kb).check("acyclic").unwrap().clone();
        assert!(!acyclic.passed);
        assert_eq!(acyclic.failures, ["fallback cycle LinearSVC -> LinearSVC"]);
    }

    #[test]
    fn non_technique_edge_is_reported() {
        let kb = kb().with_fallback_edge(FallbackEdge::new("Classification", None, vec!["GMM".into()], "C6.3")).unwrap();
        let c = self_check(&kb).check("fallback-techniques").unwrap().clone();
        assert_eq!(c.failures, ["Classification is not a technique leaf under ModelingTechniques"]);
    }

    #[test]
    fn categories_are_exclusive_for_representative_assumptions() {
        let kb = kb();
        for a in representative_assumptions() {
            let env = AssumptionEnv::new(kb.model(), &a);
            assert!(kb.fired_categories(&env).len() <= 1, "{a:?}");
        }
    }
}
