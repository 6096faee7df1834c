use std::collections::BTreeSet;

use varsel_core::kb::{representative_assumptions, EXPECTED_LABELS};
use varsel_core::{
    as_configuration, classify_problem, is_valid_configuration, load_knowledge_base, parse_model, propagate,
    recommend, self_check, serialize_model, ModelingAssumptions, NoRecommendationReason, PartialConfiguration,
    Prediction, PropagationResult, TechniqueCategory,
};

fn assume(sample_size: u64, prediction: Prediction, labeled: bool, known: Option<bool>) -> ModelingAssumptions {
    ModelingAssumptions { sample_size, prediction, labeled, known_categories: known, ..ModelingAssumptions::case_study() }
}

#[test]
fn shipped_model_shape() {
    let kb = load_knowledge_base().unwrap();
    let m = kb.model();
    let root = m.root();
    let children: Vec<&str> = m.children(root).into_iter().map(|c| m.name_of(c)).collect();
    assert_eq!(children, ["ModelingTechniques", "ModelingAssumptions"]);
    let techniques = m.id("ModelingTechniques").unwrap();
    let groups: Vec<_> = m.groups_under(techniques).collect();
    assert_eq!(groups.len(), 1);
    assert_eq!(groups[0].kind, varsel_core::GroupKind::Xor);
    let members: Vec<&str> = groups[0].members.iter().map(|&c| m.name_of(c)).collect();
    assert_eq!(members, ["Classification", "Regression", "Clustering", "DimensionalityReduction"]);
}

#[test]
fn shipped_model_round_trips() {
    let kb = load_knowledge_base().unwrap();
    let text = serialize_model(kb.model());
    let back = parse_model(&text).unwrap();
    assert!(back.same_structure(kb.model()));
    assert_eq!(serialize_model(&back), text);
    let labels: BTreeSet<&str> = back.constraints().iter().map(|c| c.label.as_str()).collect();
    assert_eq!(labels, EXPECTED_LABELS.iter().copied().collect());
}

#[test]
fn self_check_passes() {
    let report = self_check(&load_knowledge_base().unwrap());
    assert!(report.passed(), "{report}");
    assert!(report.notes[0].starts_with("C1.1"));
}

#[test]
fn selecting_category_excludes_other_prediction_types() {
    let kb = load_knowledge_base().unwrap();
    let m = kb.enforced_model();
    let mut partial = PartialConfiguration::new(ModelingAssumptions::case_study().valuation());
    partial.select(m.id("Category").unwrap());
    let PropagationResult::Forced { excluded, .. } = propagate(m, &partial).unwrap() else {
        panic!("conflict")
    };
    assert!(excluded.contains(&m.id("Quantity").unwrap()));
    assert!(excluded.contains(&m.id("Structure").unwrap()));
}

#[test]
fn documented_examples() {
    let kb = load_knowledge_base().unwrap();
    let render = |a: &ModelingAssumptions| recommend(&kb, a).map(|c| c.render());
    let mut few = assume(5000, Prediction::Quantity, false, None);
    few.few_features = true;
    assert_eq!(render(&few).unwrap(), "Lasso|ElasticNet");
    few.few_features = false;
    assert_eq!(render(&few).unwrap(), "RidgeRegression|SVRLinear -> SVRRbf|EnsembleRegressors");
    assert_eq!(render(&assume(150000, Prediction::Quantity, false, None)).unwrap(), "SGDRegressor");
    assert_eq!(render(&assume(20000, Prediction::Category, false, Some(true))).unwrap(), "MiniBatchKMeans");
    assert_eq!(render(&assume(5000, Prediction::Category, false, Some(true))).unwrap(), "KMeans -> SpectralClustering|GMM");
    assert_eq!(render(&assume(5000, Prediction::Category, false, Some(false))).unwrap(), "MeanShift|VBGMM");
    assert_eq!(render(&assume(150000, Prediction::Category, true, None)).unwrap(), "SGDClassifier -> KernelApproximation");
    assert_eq!(
        render(&assume(5000, Prediction::None, false, None)).unwrap(),
        "RandomizedPCA -> Isomap|SpectralEmbedding -> LLE"
    );
    assert_eq!(render(&assume(20000, Prediction::None, false, None)).unwrap(), "RandomizedPCA -> KernelApproximationDR");
    let err = recommend(&kb, &assume(5000, Prediction::Structure, false, None)).unwrap_err();
    assert_eq!(err.reason, NoRecommendationReason::ToughLuck);
}

#[test]
fn boundary_table() {
    let kb = load_knowledge_base().unwrap();
    let head = |n: u64| recommend(&kb, &assume(n, Prediction::Category, true, None)).map(|c| c.head().to_vec());
    assert_eq!(head(50).unwrap_err().reason, NoRecommendationReason::MoreDataNeeded);
    assert_eq!(head(51).unwrap(), ["LinearSVC"]);
    assert_eq!(head(99999).unwrap(), ["LinearSVC"]);
    assert_eq!(head(100000).unwrap(), ["SGDClassifier"]);
    let cluster = |n: u64| recommend(&kb, &assume(n, Prediction::Category, false, Some(true))).unwrap().head().to_vec();
    assert_eq!(cluster(9999), ["KMeans"]);
    assert_eq!(cluster(10000), ["MiniBatchKMeans"]);
    let dr = |n: u64| recommend(&kb, &assume(n, Prediction::None, false, None)).unwrap().render();
    assert_eq!(dr(9999), "RandomizedPCA -> Isomap|SpectralEmbedding -> LLE");
    assert_eq!(dr(10000), "RandomizedPCA -> KernelApproximationDR");
}

/// Sample sizes around every threshold, crossed with all other assumptions.
fn assumption_grid() -> Vec<ModelingAssumptions> {
    let mut out = representative_assumptions();
    for n in [0, 50, 51, 9999, 10000, 99999, 100000] {
        for mut a in representative_assumptions().into_iter().filter(|a| a.sample_size == 5000) {
            a.sample_size = n;
            out.push(a);
        }
    }
    out
}

#[test]
fn every_chain_technique_configures_validly() {
    let kb = load_knowledge_base().unwrap();
    for a in assumption_grid() {
        let Ok(chain) = recommend(&kb, &a) else { continue };
        for t in chain.techniques() {
            let id = kb.model().id(t).unwrap();
            let config = as_configuration(&kb, &a, id).unwrap_or_else(|e| panic!("{t} for {a:?}: {e}"));
            let verdict = is_valid_configuration(kb.enforced_model(), &config).unwrap();
            assert!(verdict.is_valid(), "{t} for {a:?}: {:?}", verdict.violations());
            assert!(config.is_selected(id));
        }
    }
}

#[test]
fn chains_are_well_formed_and_deterministic() {
    let kb = load_knowledge_base().unwrap();
    for a in assumption_grid() {
        let first = recommend(&kb, &a);
        let again = recommend(&kb, &a);
        assert_eq!(
            serde_json::to_string(&first.clone().map_err(|e| e.detail)).unwrap(),
            serde_json::to_string(&again.map_err(|e| e.detail)).unwrap()
        );
        let trace = match &first {
            Ok(c) => &c.trace,
            Err(n) => &n.trace,
        };
        assert!(trace.iter().all(|t| kb.model().constraint(&t.label).is_some()));
        match first {
            Ok(chain) => {
                assert!(!chain.steps.is_empty() && chain.steps.iter().all(|s| !s.is_empty()));
                let all: Vec<&str> = chain.techniques().collect();
                let unique: BTreeSet<&str> = all.iter().copied().collect();
                assert_eq!(all.len(), unique.len());
                assert!(all.iter().all(|t| kb.category_of(t) == Some(chain.category)));
                assert_eq!(classify_problem(&kb, &a), Ok(chain.category));
            }
            Err(n) => assert!(!n.detail.is_empty()),
        }
    }
}

#[test]
fn text_data_only_matters_for_classification() {
    let kb = load_knowledge_base().unwrap();
    for a in assumption_grid() {
        let mut b = a.clone();
        b.text_data = !a.text_data;
        let (ra, rb) = (recommend(&kb, &a), recommend(&kb, &b));
        if let Ok(TechniqueCategory::Classification) = classify_problem(&kb, &a) {
            continue;
        }
        assert_eq!(ra.map(|c| c.steps).map_err(|e| e.reason), rb.map(|c| c.steps).map_err(|e| e.reason));
    }
}
