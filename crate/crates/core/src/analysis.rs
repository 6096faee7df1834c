//! Configuration-space analyses: enumeration, forced-feature propagation and
//! completion of partial configurations.
//!
//! All three run on one backtracking search. Features are decided from the
//! highest id down, `excluded` before `selected`, so solutions come out in
//! ascending order of their selection bitmask. Tree rules are propagated
//! eagerly; cross-tree constraints are checked in three-valued logic after
//! every decision.

use std::collections::{BTreeMap, BTreeSet};
use std::ops::ControlFlow;

use serde::{Deserialize, Serialize};

use crate::config::{Configuration, Valuation};
use crate::error::{AnalysisError, EvalError};
use crate::formula::Formula;
use crate::model::{FeatureId, FeatureModel, GroupKind, Variation};

/// Largest model [`enumerate_configurations`] accepts.
pub const ENUMERATION_LIMIT: usize = 24;

/// Per-feature decisions plus the attribute values constraints need.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PartialConfiguration {
    pub decided: BTreeMap<FeatureId, bool>,
    pub attributes: Valuation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FeatureState {
    Selected,
    Excluded,
    Unknown,
}

impl PartialConfiguration {
    pub fn new(attributes: Valuation) -> Self {
        PartialConfiguration { decided: BTreeMap::new(), attributes }
    }

    pub fn select(&mut self, id: FeatureId) -> &mut Self {
        self.decided.insert(id, true);
        self
    }

    pub fn exclude(&mut self, id: FeatureId) -> &mut Self {
        self.decided.insert(id, false);
        self
    }

    pub fn state(&self, id: FeatureId) -> FeatureState {
        match self.decided.get(&id) {
            Some(true) => FeatureState::Selected,
            Some(false) => FeatureState::Excluded,
            None => FeatureState::Unknown,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PropagationResult {
    /// No valid completion exists.
    Conflict,
    /// Features with the same value in every valid completion, including
    /// those already decided by the partial configuration.
    Forced { selected: BTreeSet<FeatureId>, excluded: BTreeSet<FeatureId> },
}

/// All valid configurations under a fixed attribute valuation, at most
/// `limit` of them, in ascending bitmask order.
pub fn enumerate_configurations(
    model: &FeatureModel,
    valuation: &Valuation,
    limit: usize,
) -> Result<Vec<Configuration>, AnalysisError> {
    if model.len() > ENUMERATION_LIMIT {
        return Err(AnalysisError::TooLarge { features: model.len(), limit: ENUMERATION_LIMIT });
    }
    let compiled = Compiled::new(model, valuation)?;
    let mut out = Vec::new();
    if limit == 0 {
        return Ok(out);
    }
    let _ = compiled.search(compiled.blank(), &mut |sol| {
        out.push(compiled.to_configuration(sol, valuation));
        if out.len() >= limit {
            ControlFlow::Break(())
        } else {
            ControlFlow::Continue(())
        }
    });
    Ok(out)
}

/// Features forced selected or excluded by `partial`, or `Conflict`.
pub fn propagate(model: &FeatureModel, partial: &PartialConfiguration) -> Result<PropagationResult, AnalysisError> {
    let compiled = Compiled::new(model, &partial.attributes)?;
    let start = compiled.seed(partial)?;
    let Some(first) = compiled.first(start.clone()) else {
        return Ok(PropagationResult::Conflict);
    };
    let mut seen = vec![[false; 2]; compiled.n];
    let record = |sol: &[bool], seen: &mut Vec<[bool; 2]>| {
        for (i, &v) in sol.iter().enumerate() {
            seen[i][v as usize] = true;
        }
    };
    record(&first, &mut seen);

    let mut selected = BTreeSet::new();
    let mut excluded = BTreeSet::new();
    for v in 0..compiled.n {
        if seen[v][0] && seen[v][1] {
            continue;
        }
        let value = first[v];
        let mut flipped = start.clone();
        if flipped[v] == Some(value) {
            // decided by the caller; the value holds in every completion
        } else {
            flipped[v] = Some(!value);
            if let Some(sol) = compiled.first(flipped) {
                record(&sol, &mut seen);
                continue;
            }
        }
        if value {
            selected.insert(FeatureId(v as u32));
        } else {
            excluded.insert(FeatureId(v as u32));
        }
    }
    Ok(PropagationResult::Forced { selected, excluded })
}

/// The least valid completion of `partial` in bitmask order, if any.
///
/// Works on models of any size; the search prefers leaving undecided
/// features unselected.
pub fn find_completion(
    model: &FeatureModel,
    partial: &PartialConfiguration,
) -> Result<Option<Configuration>, AnalysisError> {
    let compiled = Compiled::new(model, &partial.attributes)?;
    let start = compiled.seed(partial)?;
    Ok(compiled.first(start).map(|sol| compiled.to_configuration(&sol, &partial.attributes)))
}

pub fn is_satisfiable(model: &FeatureModel, partial: &PartialConfiguration) -> Result<bool, AnalysisError> {
    Ok(find_completion(model, partial)?.is_some())
}

/// Constraint formula with attribute comparisons folded to constants.
#[derive(Debug, Clone)]
enum Node {
    Var(usize),
    Const(bool),
    Not(Box<Node>),
    And(Box<Node>, Box<Node>),
    Or(Box<Node>, Box<Node>),
    Implies(Box<Node>, Box<Node>),
    Iff(Box<Node>, Box<Node>),
}

impl Node {
    fn compile(f: &Formula, model: &FeatureModel, valuation: &Valuation) -> Result<Node, EvalError> {
        let c = |g: &Formula| Node::compile(g, model, valuation).map(Box::new);
        Ok(match f {
            Formula::Feature(name) => {
                Node::Var(model.id(name).ok_or_else(|| EvalError::UnknownSymbol(name.clone()))?.index())
            }
            Formula::Compare { attribute, op, value } => {
                let lhs = valuation.get(attribute).ok_or_else(|| EvalError::MissingAttribute(attribute.clone()))?;
                Node::Const(op.apply(*lhs, *value))
            }
            Formula::Not(g) => Node::Not(c(g)?),
            Formula::And(a, b) => Node::And(c(a)?, c(b)?),
            Formula::Or(a, b) => Node::Or(c(a)?, c(b)?),
            Formula::Implies(a, b) => Node::Implies(c(a)?, c(b)?),
            Formula::Iff(a, b) => Node::Iff(c(a)?, c(b)?),
        })
    }

    /// Kleene three-valued evaluation; `None` is unknown.
    fn eval(&self, s: &[Option<bool>]) -> Option<bool> {
        match self {
            Node::Var(v) => s[*v],
            Node::Const(b) => Some(*b),
            Node::Not(a) => a.eval(s).map(|x| !x),
            Node::And(a, b) => match (a.eval(s), b.eval(s)) {
                (Some(false), _) | (_, Some(false)) => Some(false),
                (Some(true), Some(true)) => Some(true),
                _ => None,
            },
            Node::Or(a, b) => match (a.eval(s), b.eval(s)) {
                (Some(true), _) | (_, Some(true)) => Some(true),
                (Some(false), Some(false)) => Some(false),
                _ => None,
            },
            Node::Implies(a, b) => match (a.eval(s), b.eval(s)) {
                (Some(false), _) | (_, Some(true)) => Some(true),
                (Some(true), Some(false)) => Some(false),
                _ => None,
            },
            Node::Iff(a, b) => Some(a.eval(s)? == b.eval(s)?),
        }
    }
}

struct Compiled {
    n: usize,
    root: usize,
    parent: Vec<Option<usize>>,
    children: Vec<Vec<usize>>,
    /// Non-group mandatory children per feature.
    mandatory: Vec<Vec<usize>>,
    groups: Vec<(usize, GroupKind, Vec<usize>)>,
    constraints: Vec<Node>,
}

type State = Vec<Option<bool>>;

impl Compiled {
    fn new(model: &FeatureModel, valuation: &Valuation) -> Result<Self, EvalError> {
        let n = model.len();
        let mut parent = vec![None; n];
        let mut children = vec![Vec::new(); n];
        let mut mandatory = vec![Vec::new(); n];
        for (id, f) in model.features() {
            if let Some(p) = f.parent {
                parent[id.index()] = Some(p.index());
                children[p.index()].push(id.index());
                if f.variation == Variation::Mandatory && model.group_of(id).is_none() {
                    mandatory[p.index()].push(id.index());
                }
            }
        }
        let groups = model
            .groups()
            .iter()
            .map(|g| (g.parent.index(), g.kind, g.members.iter().map(|m| m.index()).collect()))
            .collect();
        let constraints = model
            .constraints()
            .iter()
            .map(|c| Node::compile(&c.formula, model, valuation))
            .collect::<Result<_, _>>()?;
        Ok(Compiled { n, root: model.root().index(), parent, children, mandatory, groups, constraints })
    }

    fn blank(&self) -> State {
        vec![None; self.n]
    }

    fn seed(&self, partial: &PartialConfiguration) -> Result<State, EvalError> {
        let mut s = self.blank();
        for (&id, &v) in &partial.decided {
            let slot = s.get_mut(id.index()).ok_or_else(|| EvalError::UnknownSymbol(id.to_string()))?;
            *slot = Some(v);
        }
        Ok(s)
    }

    fn to_configuration(&self, sol: &[bool], valuation: &Valuation) -> Configuration {
        Configuration::new(
            sol.iter().enumerate().filter(|(_, &v)| v).map(|(i, _)| FeatureId(i as u32)),
            valuation.clone(),
        )
    }

    fn first(&self, start: State) -> Option<Vec<bool>> {
        let mut found = None;
        let _ = self.search(start, &mut |sol| {
            found = Some(sol.to_vec());
            ControlFlow::Break(())
        });
        found
    }

    fn search(&self, mut state: State, visit: &mut dyn FnMut(&[bool]) -> ControlFlow<()>) -> ControlFlow<()> {
        if !self.settle(&mut state) {
            return ControlFlow::Continue(());
        }
        match (0..self.n).rev().find(|&i| state[i].is_none()) {
            None => {
                let sol: Vec<bool> = state.iter().map(|v| v.expect("fully assigned")).collect();
                visit(&sol)
            }
            Some(v) => {
                for value in [false, true] {
                    let mut next = state.clone();
                    next[v] = Some(value);
                    self.search(next, visit)?;
                }
                ControlFlow::Continue(())
            }
        }
    }

    /// Unit-propagates the tree rules to a fixpoint and checks constraints.
    /// Returns false on conflict.
    fn settle(&self, s: &mut State) -> bool {
        fn set(s: &mut State, v: usize, value: bool, changed: &mut bool) -> bool {
            match s[v] {
                Some(cur) => cur == value,
                None => {
                    s[v] = Some(value);
                    *changed = true;
                    true
                }
            }
        }

        let mut changed = true;
        if !set(s, self.root, true, &mut changed) {
            return false;
        }
        while changed {
            changed = false;
            for v in 0..self.n {
                match s[v] {
                    Some(true) => {
                        if let Some(p) = self.parent[v] {
                            if !set(s, p, true, &mut changed) {
                                return false;
                            }
                        }
                        for &c in &self.mandatory[v] {
                            if !set(s, c, true, &mut changed) {
                                return false;
                            }
                        }
                    }
                    Some(false) => {
                        for &c in &self.children[v] {
                            if !set(s, c, false, &mut changed) {
                                return false;
                            }
                        }
                    }
                    None => {}
                }
            }
            for (p, kind, members) in &self.groups {
                if s[*p] != Some(true) {
                    continue;
                }
                let on = members.iter().filter(|&&m| s[m] == Some(true)).count();
                let open: Vec<usize> = members.iter().copied().filter(|&m| s[m].is_none()).collect();
                if *kind == GroupKind::Xor && on > 1 {
                    return false;
                }
                if on == 0 && open.is_empty() {
                    return false;
                }
                if on == 0 && open.len() == 1 {
                    set(s, open[0], true, &mut changed);
                }
                if *kind == GroupKind::Xor && on == 1 {
                    for m in open {
                        set(s, m, false, &mut changed);
                    }
                }
            }
        }
        self.constraints.iter().all(|c| c.eval(s) != Some(false))
    }
}
