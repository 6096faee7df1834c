//! Walking a recommendation chain against metric reports.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::recommend::RecommendationChain;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    F1,
    Mcc,
    Bacc,
    Sensitivity,
    Specificity,
}

impl Metric {
    pub const ALL: [Metric; 5] = [Metric::F1, Metric::Mcc, Metric::Bacc, Metric::Sensitivity, Metric::Specificity];

    pub fn as_str(self) -> &'static str {
        match self {
            Metric::F1 => "f1",
            Metric::Mcc => "mcc",
            Metric::Bacc => "bacc",
            Metric::Sensitivity => "sensitivity",
            Metric::Specificity => "specificity",
        }
    }

    /// Inclusive range of valid values.
    pub fn range(self) -> (f64, f64) {
        match self {
            Metric::Mcc => (-1.0, 1.0),
            _ => (0.0, 1.0),
        }
    }

    pub fn of(self, r: &MetricsReport) -> f64 {
        match self {
            Metric::F1 => r.f1,
            Metric::Mcc => r.mcc,
            Metric::Bacc => r.bacc,
            Metric::Sensitivity => r.sensitivity,
            Metric::Specificity => r.specificity,
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Metric {
    type Err = CriterionError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.to_ascii_lowercase();
        let m = match s.as_str() {
            "sens" => Metric::Sensitivity,
            "spec" => Metric::Specificity,
            _ => Metric::ALL.into_iter().find(|m| m.as_str() == s).ok_or(CriterionError::UnknownMetric(s))?,
        };
        Ok(m)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CriterionError {
    #[error("unknown metric `{0}` (expected f1, mcc, bacc, sensitivity or specificity)")]
    UnknownMetric(String),
    #[error("criterion must look like `f1:0.77`, got `{0}`")]
    Syntax(String),
    #[error("threshold {threshold} is outside the range of {metric} [{}, {}]", metric.range().0, metric.range().1)]
    OutOfRange { metric: Metric, threshold: f64 },
}

/// A candidate works when `metric >= threshold`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WorkingCriterion {
    pub metric: Metric,
    pub threshold: f64,
}

impl WorkingCriterion {
    pub fn new(metric: Metric, threshold: f64) -> Result<Self, CriterionError> {
        let (lo, hi) = metric.range();
        if !(lo..=hi).contains(&threshold) {
            return Err(CriterionError::OutOfRange { metric, threshold });
        }
        Ok(WorkingCriterion { metric, threshold })
    }

    pub fn passes(&self, report: &MetricsReport) -> bool {
        self.metric.of(report) >= self.threshold
    }
}

impl fmt::Display for WorkingCriterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} >= {}", self.metric, self.threshold)
    }
}

impl FromStr for WorkingCriterion {
    type Err = CriterionError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (metric, threshold) = s.split_once(':').ok_or_else(|| CriterionError::Syntax(s.to_string()))?;
        let threshold: f64 = threshold.trim().parse().map_err(|_| CriterionError::Syntax(s.to_string()))?;
        WorkingCriterion::new(metric.trim().parse()?, threshold)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricsReport {
    pub technique: String,
    pub f1: f64,
    pub mcc: f64,
    pub bacc: f64,
    pub sensitivity: f64,
    pub specificity: f64,
    #[serde(default)]
    pub provenance: String,
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("{technique}: {metric} = {value} is outside [{}, {}]", metric.range().0, metric.range().1)]
pub struct ReportError {
    pub technique: String,
    pub metric: Metric,
    pub value: f64,
}

impl MetricsReport {
    pub fn validate(&self) -> Result<(), ReportError> {
        for metric in Metric::ALL {
            let value = metric.of(self);
            let (lo, hi) = metric.range();
            if !(lo..=hi).contains(&value) {
                return Err(ReportError { technique: self.technique.clone(), metric, value });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "decision", rename_all = "snake_case")]
pub enum Decision {
    Accepted { technique: String },
    /// The reported technique failed; `candidates` are what to try next.
    NotWorking { technique: String, candidates: Vec<String> },
    Exhausted { technique: String },
}

impl fmt::Display for Decision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Decision::Accepted { technique } => write!(f, "Accepted {technique}"),
            Decision::NotWorking { technique, candidates } => {
                write!(f, "NotWorking {technique}; next {}", candidates.join("|"))
            }
            Decision::Exhausted { technique } => write!(f, "Exhausted after {technique}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SessionError {
    #[error("the chain has no steps")]
    EmptyChain,
    #[error("{technique} is not a current candidate (expected one of: {})", candidates.join(", "))]
    WrongTechnique { technique: String, candidates: Vec<String> },
    #[error("the session is closed: {0}")]
    Closed(Decision),
    #[error("the session was invalidated because the assumptions changed")]
    Invalidated,
    #[error(transparent)]
    InvalidReport(#[from] ReportError),
}

/// Evaluation state over one chain. A step with several alternatives fails
/// only once every alternative has a failing report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Session {
    chain: RecommendationChain,
    criterion: WorkingCriterion,
    cursor: usize,
    failed: BTreeSet<String>,
    history: Vec<(MetricsReport, Decision)>,
    invalidated: bool,
}

pub fn new_session(chain: RecommendationChain, criterion: WorkingCriterion) -> Result<Session, SessionError> {
    if chain.steps.is_empty() || chain.steps.iter().any(Vec::is_empty) {
        return Err(SessionError::EmptyChain);
    }
    Ok(Session { chain, criterion, cursor: 0, failed: BTreeSet::new(), history: Vec::new(), invalidated: false })
}

impl Session {
    pub fn chain(&self) -> &RecommendationChain {
        &self.chain
    }

    pub fn criterion(&self) -> WorkingCriterion {
        self.criterion
    }

    pub fn cursor(&self) -> usize {
        self.cursor
    }

    pub fn history(&self) -> &[(MetricsReport, Decision)] {
        &self.history
    }

    /// The final decision, once accepted or exhausted.
    pub fn outcome(&self) -> Option<&Decision> {
        self.history.last().map(|(_, d)| d).filter(|d| !matches!(d, Decision::NotWorking { .. }))
    }

    /// Untried alternatives of the current step; empty once closed.
    pub fn candidates(&self) -> Vec<String> {
        if self.outcome().is_some() || self.invalidated {
            return Vec::new();
        }
        self.chain.steps[self.cursor].iter().filter(|t| !self.failed.contains(*t)).cloned().collect()
    }

    /// Marks the session stale; later submissions fail.
    pub fn invalidate(&mut self) {
        self.invalidated = true;
    }

    pub fn is_invalidated(&self) -> bool {
        self.invalidated
    }
}

pub fn submit_metrics(session: &mut Session, report: MetricsReport) -> Result<Decision, SessionError> {
    if session.invalidated {
        return Err(SessionError::Invalidated);
    }
    if let Some(d) = session.outcome() {
        return Err(SessionError::Closed(d.clone()));
    }
    report.validate()?;
    let candidates = session.candidates();
    if !candidates.contains(&report.technique) {
        return Err(SessionError::WrongTechnique { technique: report.technique.clone(), candidates });
    }
    let technique = report.technique.clone();
    let decision = if session.criterion.passes(&report) {
        Decision::Accepted { technique }
    } else {
        session.failed.insert(technique.clone());
        let step = &session.chain.steps[session.cursor];
        let remaining: Vec<String> = step.iter().filter(|t| !session.failed.contains(*t)).cloned().collect();
        if !remaining.is_empty() {
            Decision::NotWorking { technique, candidates: remaining }
        } else if session.cursor + 1 < session.chain.steps.len() {
            session.cursor += 1;
            Decision::NotWorking { technique, candidates: session.chain.steps[session.cursor].clone() }
        } else {
            Decision::Exhausted { technique }
        }
    };
    session.history.push((report, decision.clone()));
    Ok(decision)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedEntry {
    pub rank: usize,
    pub technique: String,
    pub provenance: String,
    pub f1: f64,
    pub mcc: f64,
    pub bacc: f64,
    /// Submitted F1 minus this entry's F1.
    pub delta_f1: f64,
    pub submitted: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ranking {
    pub entries: Vec<RankedEntry>,
}

impl Ranking {
    /// 1-based rank of the submitted report.
    pub fn submitted_rank(&self) -> usize {
        self.entries.iter().find(|e| e.submitted).map(|e| e.rank).expect("the submitted report is always ranked")
    }
}

/// Ranks the report among the baselines by F1, then MCC, then BACC, all
/// descending. Ties keep input order with the report first.
pub fn compare_baselines(report: &MetricsReport, baselines: &[MetricsReport]) -> Ranking {
    let mut rows: Vec<(&MetricsReport, bool)> = vec![(report, true)];
    rows.extend(baselines.iter().map(|b| (b, false)));
    rows.sort_by(|(a, _), (b, _)| {
        b.f1.total_cmp(&a.f1).then(b.mcc.total_cmp(&a.mcc)).then(b.bacc.total_cmp(&a.bacc))
    });
    let entries = rows
        .into_iter()
        .enumerate()
        .map(|(i, (r, submitted))| RankedEntry {
            rank: i + 1,
            technique: r.technique.clone(),
            provenance: r.provenance.clone(),
            f1: r.f1,
            mcc: r.mcc,
            bacc: r.bacc,
            delta_f1: report.f1 - r.f1,
            submitted,
        })
        .collect();
    Ranking { entries }
}
