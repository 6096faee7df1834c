use proptest::prelude::*;
use varsel_core::kb::{BASELINES_JSON, CASE_STUDY_REPORT_JSON};
use varsel_core::{
    compare_baselines, load_knowledge_base, new_session, recommend, submit_metrics, Decision, MetricsReport,
    ModelingAssumptions, WorkingCriterion,
};

fn fixtures() -> (MetricsReport, Vec<MetricsReport>) {
    (serde_json::from_str(CASE_STUDY_REPORT_JSON).unwrap(), serde_json::from_str(BASELINES_JSON).unwrap())
}

#[test]
fn case_study_is_accepted_and_ranked_first() {
    let kb = load_knowledge_base().unwrap();
    let chain = recommend(&kb, &ModelingAssumptions::case_study()).unwrap();
    let mut session = new_session(chain, "f1:0.77".parse().unwrap()).unwrap();
    let (ours, baselines) = fixtures();
    let decision = submit_metrics(&mut session, ours.clone()).unwrap();
    assert_eq!(decision, Decision::Accepted { technique: "LinearSVC".into() });

    let ranking = compare_baselines(&ours, &baselines);
    assert_eq!(ranking.submitted_rank(), 1);
    let deltas: Vec<String> = ranking.entries[1..].iter().map(|e| format!("{:+.3}", e.delta_f1)).collect();
    let names: Vec<&str> = ranking.entries.iter().map(|e| e.technique.as_str()).collect();
    assert_eq!(names, ["LinearSVC", "RandomForest", "LogisticRegression"]);
    assert_eq!(deltas, ["+0.034", "+0.066"]);
}

#[test]
fn failing_report_falls_back_to_knn() {
    let kb = load_knowledge_base().unwrap();
    let chain = recommend(&kb, &ModelingAssumptions::case_study()).unwrap();
    let mut session = new_session(chain, "f1:0.77".parse().unwrap()).unwrap();
    let (mut ours, _) = fixtures();
    ours.f1 = 0.6;
    let decision = submit_metrics(&mut session, ours).unwrap();
    assert_eq!(
        decision,
        Decision::NotWorking { technique: "LinearSVC".into(), candidates: vec!["KNeighborsClassifier".into()] }
    );
}

#[test]
fn report_json_has_exact_fields() {
    let (ours, _) = fixtures();
    let v = serde_json::to_value(&ours).unwrap();
    let keys: Vec<&String> = v.as_object().unwrap().keys().collect();
    assert_eq!(keys, ["bacc", "f1", "mcc", "provenance", "sensitivity", "specificity", "technique"]);
    assert!(serde_json::from_str::<MetricsReport>(r#"{"technique":"X","f1":0.1,"mcc":0,"bacc":0,"sensitivity":0,"specificity":0,"auc":1}"#).is_err());
}

fn arb_report(techniques: &'static [&'static str]) -> impl Strategy<Value = MetricsReport> {
    (0..techniques.len(), 0u32..=1000, 0u32..=1000, 0u32..=1000).prop_map(move |(t, f1, mcc, bacc)| MetricsReport {
        technique: techniques[t].to_string(),
        f1: f64::from(f1) / 1000.0,
        mcc: f64::from(mcc) / 500.0 - 1.0,
        bacc: f64::from(bacc) / 1000.0,
        sensitivity: 0.5,
        specificity: 0.5,
        provenance: String::new(),
    })
}

const CHAIN: &[&str] = &["LinearSVC", "KNeighborsClassifier", "SVC", "EnsembleClassifiers"];

proptest! {
    #[test]
    fn replay_is_deterministic_and_cursor_monotone(
        reports in prop::collection::vec(arb_report(CHAIN), 0..10),
        threshold in 0u32..=1000,
    ) {
        let kb = load_knowledge_base().unwrap();
        let chain = recommend(&kb, &ModelingAssumptions::case_study()).unwrap();
        let criterion = WorkingCriterion::new(varsel_core::Metric::F1, f64::from(threshold) / 1000.0).unwrap();
        let run = || {
            let mut s = new_session(chain.clone(), criterion).unwrap();
            let mut out = Vec::new();
            let mut cursor = 0;
            for r in &reports {
                let d = submit_metrics(&mut s, r.clone()).map_err(|e| e.to_string());
                assert!(s.cursor() >= cursor);
                cursor = s.cursor();
                out.push(d);
            }
            let accepted = out.iter().filter(|d| d.is_ok()).count();
            assert_eq!(s.history().len(), accepted);
            out
        };
        prop_assert_eq!(run(), run());
    }

    #[test]
    fn ranking_is_a_permutation(ours in arb_report(CHAIN), rest in prop::collection::vec(arb_report(CHAIN), 0..6)) {
        let ranking = compare_baselines(&ours, &rest);
        prop_assert_eq!(ranking.entries.len(), rest.len() + 1);
        let mut got: Vec<(String, u64)> = ranking.entries.iter().map(|e| (e.technique.clone(), e.f1.to_bits())).collect();
        let mut want: Vec<(String, u64)> =
            std::iter::once(&ours).chain(&rest).map(|r| (r.technique.clone(), r.f1.to_bits())).collect();
        got.sort();
        want.sort();
        prop_assert_eq!(got, want);
        prop_assert!(ranking.entries.windows(2).all(|w| w[0].f1 >= w[1].f1));
        prop_assert_eq!(ranking.entries.iter().filter(|e| e.submitted).count(), 1);
    }
}
