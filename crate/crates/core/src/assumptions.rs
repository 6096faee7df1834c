//! Modeling assumptions declared by the user, and their reading as
//! assumption features and attribute values of the knowledge base.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::Valuation;
use crate::formula::Environment;
use crate::model::FeatureModel;

pub const SAMPLE_SIZE: &str = "Samplesize";
pub const NUM_FEATURES: &str = "NumFeatures";
pub const NOT_WORKING: &str = "NotWorking";

/// What the model is asked to predict. `None` means no prediction (exploration).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Prediction {
    Category,
    Quantity,
    Structure,
    None,
}

impl Prediction {
    pub const ALL: [Prediction; 4] = [Prediction::Category, Prediction::Quantity, Prediction::Structure, Prediction::None];

    pub fn as_str(self) -> &'static str {
        match self {
            Prediction::Category => "category",
            Prediction::Quantity => "quantity",
            Prediction::Structure => "structure",
            Prediction::None => "none",
        }
    }
}

impl fmt::Display for Prediction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Prediction {
    type Err = AssumptionError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Prediction::ALL
            .into_iter()
            .find(|p| p.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| AssumptionError::UnknownPrediction(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AssumptionError {
    #[error("unknown prediction type `{0}` (expected category, quantity, structure or none)")]
    UnknownPrediction(String),
    #[error("known_categories is required when predicting a category from unlabeled data")]
    KnownCategoriesMissing,
    #[error("known_categories only applies when predicting a category from unlabeled data")]
    KnownCategoriesNotApplicable,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelingAssumptions {
    pub sample_size: u64,
    #[serde(default)]
    pub num_features: u64,
    pub prediction: Prediction,
    #[serde(default)]
    pub labeled: bool,
    #[serde(default)]
    pub text_data: bool,
    #[serde(default)]
    pub known_categories: Option<bool>,
    #[serde(default)]
    pub few_features: bool,
}

impl ModelingAssumptions {
    /// 299 labeled heart-failure records with 13 features, predicting a category.
    /// Thirteen features count as few: with a quantity to predict the same
    /// data leads to Lasso or ElasticNet.
    pub fn case_study() -> Self {
        ModelingAssumptions {
            sample_size: 299,
            num_features: 13,
            prediction: Prediction::Category,
            labeled: true,
            text_data: false,
            known_categories: None,
            few_features: true,
        }
    }

    pub fn known_categories_required(&self) -> bool {
        self.prediction == Prediction::Category && !self.labeled
    }

    pub fn validate(&self) -> Result<(), AssumptionError> {
        match (self.known_categories_required(), self.known_categories.is_some()) {
            (true, false) => Err(AssumptionError::KnownCategoriesMissing),
            (false, true) => Err(AssumptionError::KnownCategoriesNotApplicable),
            _ => Ok(()),
        }
    }

    /// Assumption features and whether each is selected. `not_working` marks
    /// that an earlier candidate failed the working criterion.
    pub fn feature_literals(&self, not_working: bool) -> [(&'static str, bool); 9] {
        [
            ("Predictiontype", self.prediction != Prediction::None),
            ("Category", self.prediction == Prediction::Category),
            ("Quantity", self.prediction == Prediction::Quantity),
            ("Structure", self.prediction == Prediction::Structure),
            ("LabeledData", self.labeled),
            ("Textdata", self.text_data),
            ("Fewfeatures", self.few_features),
            ("Knowncategories", self.known_categories.unwrap_or(false)),
            (NOT_WORKING, not_working),
        ]
    }

    pub fn valuation(&self) -> Valuation {
        let clamp = |v: u64| i64::try_from(v).unwrap_or(i64::MAX);
        Valuation::from([
            (SAMPLE_SIZE.to_string(), clamp(self.sample_size)),
            (NUM_FEATURES.to_string(), clamp(self.num_features)),
        ])
    }
}

/// A closed-world environment: features of `model` are selected iff listed.
#[derive(Debug, Clone)]
pub struct AssumptionEnv<'a> {
    model: &'a FeatureModel,
    selected: BTreeSet<String>,
    valuation: Valuation,
}

impl<'a> AssumptionEnv<'a> {
    pub fn new(model: &'a FeatureModel, assumptions: &ModelingAssumptions) -> Self {
        let selected = assumptions
            .feature_literals(false)
            .into_iter()
            .filter(|&(_, on)| on)
            .map(|(name, _)| name.to_string())
            .collect();
        AssumptionEnv { model, selected, valuation: assumptions.valuation() }
    }

    pub fn select(&mut self, name: impl Into<String>) {
        self.selected.insert(name.into());
    }

    pub fn value_of(&self, attribute: &str) -> Option<i64> {
        self.valuation.get(attribute).copied()
    }
}

impl Environment for AssumptionEnv<'_> {
    fn is_selected(&self, feature: &str) -> Option<bool> {
        self.model.id(feature).map(|_| self.selected.contains(feature))
    }

    fn attribute(&self, attribute: &str) -> Option<i64> {
        self.valuation.get(attribute).copied()
    }
}
