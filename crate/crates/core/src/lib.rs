//! Variability-aware selection of machine-learning techniques.
//!
//! Selection knowledge is a feature model: a technique tree and an
//! assumption tree under one root, tied together by labeled cross-tree
//! constraints. The crate provides the feature-model engine, a text format
//! for models, the shipped Scikit-Learn knowledge base, the recommender that
//! turns modeling assumptions into a fallback chain, the evaluation loop that
//! walks that chain against metric reports, and re-selection when
//! assumptions change.

pub mod adapt;
pub mod analysis;
pub mod assumptions;
pub mod config;
pub mod dsl;
pub mod error;
pub mod evaluation;
pub mod formula;
pub mod kb;
pub mod model;
pub mod recommend;

pub use analysis::{
    enumerate_configurations, find_completion, is_satisfiable, propagate, FeatureState, PartialConfiguration,
    PropagationResult, ENUMERATION_LIMIT,
};
pub use config::{eval_formula, is_valid_configuration, ConfigViolation, Configuration, Valuation, Verdict};
pub use dsl::{
    export_dot, parse_formula, parse_model, serialize_model, DiagnosticKind, DotError, ParseDiagnostic, SourceSpan,
};
pub use error::{AnalysisError, EvalError};
pub use formula::{CmpOp, Environment, Formula};
pub use model::{
    validate_model, AttributeDecl, Feature, FeatureId, FeatureModel, FeatureModelBuilder, Group, GroupKind,
    ChildItem, ModelError, ModelViolation, NamedConstraint, Variation, WellFormednessReport,
};
pub use assumptions::{AssumptionError, ModelingAssumptions, Prediction};
pub use kb::{
    load_knowledge_base, self_check, CheckReport, FallbackEdge, KbError, KnowledgeBase, TechniqueCategory,
};
pub use recommend::{
    as_configuration, classify_problem, recommend, ConfigurationError, NoRecommendation, NoRecommendationReason,
    Recommendation, RecommendationChain, TraceEntry,
};
pub use adapt::{apply_delta, reselect, AdaptError, AdaptationReport, AssumptionDelta, Change, FeatureDiff, FieldChange};
pub use evaluation::{
    compare_baselines, new_session, submit_metrics, CriterionError, Decision, Metric, MetricsReport, RankedEntry,
    Ranking, ReportError, Session, SessionError, WorkingCriterion,
};
