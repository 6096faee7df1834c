//! Feature models: a tree of features with mandatory/optional children,
//! or/xor groups, integer attributes and labeled cross-tree constraints.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::formula::Formula;

/// Index of a feature inside its model. Ids follow declaration order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct FeatureId(pub u32);

impl FeatureId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for FeatureId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variation {
    Mandatory,
    Optional,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum GroupKind {
    /// At least one member.
    Or,
    /// Exactly one member.
    Xor,
}

impl GroupKind {
    pub fn keyword(self) -> &'static str {
        match self {
            GroupKind::Or => "or",
            GroupKind::Xor => "xor",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Feature {
    pub name: String,
    pub parent: Option<FeatureId>,
    /// Ignored for group members, which are individually optional.
    pub variation: Variation,
}

/// An or/xor group over some children of `parent`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Group {
    pub parent: FeatureId,
    pub kind: GroupKind,
    pub members: Vec<FeatureId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttributeDecl {
    pub name: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NamedConstraint {
    pub label: String,
    pub formula: Formula,
}

/// A feature model. Construct with [`FeatureModelBuilder`] (checked) or
/// [`FeatureModel::from_parts`] (unchecked, inspect with [`validate_model`]).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureModel {
    name: String,
    root: FeatureId,
    features: Vec<Feature>,
    groups: Vec<Group>,
    attributes: Vec<AttributeDecl>,
    constraints: Vec<NamedConstraint>,
    by_name: HashMap<String, FeatureId>,
}

impl FeatureModel {
    /// Assembles a model without checking it. The feature at index `i` has id `i`.
    pub fn from_parts(
        name: impl Into<String>,
        root: FeatureId,
        features: Vec<Feature>,
        groups: Vec<Group>,
        attributes: Vec<AttributeDecl>,
        constraints: Vec<NamedConstraint>,
    ) -> Self {
        let mut by_name = HashMap::new();
        for (i, f) in features.iter().enumerate() {
            by_name.entry(f.name.clone()).or_insert(FeatureId(i as u32));
        }
        FeatureModel { name: name.into(), root, features, groups, attributes, constraints, by_name }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn root(&self) -> FeatureId {
        self.root
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn feature(&self, id: FeatureId) -> &Feature {
        &self.features[id.index()]
    }

    pub fn features(&self) -> impl Iterator<Item = (FeatureId, &Feature)> {
        self.features.iter().enumerate().map(|(i, f)| (FeatureId(i as u32), f))
    }

    pub fn feature_ids(&self) -> impl Iterator<Item = FeatureId> {
        (0..self.features.len() as u32).map(FeatureId)
    }

    pub fn id(&self, name: &str) -> Option<FeatureId> {
        self.by_name.get(name).copied()
    }

    pub fn name_of(&self, id: FeatureId) -> &str {
        &self.features[id.index()].name
    }

    pub fn groups(&self) -> &[Group] {
        &self.groups
    }

    pub fn attributes(&self) -> &[AttributeDecl] {
        &self.attributes
    }

    pub fn has_attribute(&self, name: &str) -> bool {
        self.attributes.iter().any(|a| a.name == name)
    }

    pub fn constraints(&self) -> &[NamedConstraint] {
        &self.constraints
    }

    pub fn constraint(&self, label: &str) -> Option<&NamedConstraint> {
        self.constraints.iter().find(|c| c.label == label)
    }

    /// Children of `id` in declaration order.
    pub fn children(&self, id: FeatureId) -> Vec<FeatureId> {
        self.features().filter(|(_, f)| f.parent == Some(id)).map(|(c, _)| c).collect()
    }

    /// The group `id` belongs to, if any.
    pub fn group_of(&self, id: FeatureId) -> Option<&Group> {
        self.groups.iter().find(|g| g.members.contains(&id))
    }

    /// Groups whose parent is `id`.
    pub fn groups_under(&self, id: FeatureId) -> impl Iterator<Item = &Group> {
        self.groups.iter().filter(move |g| g.parent == id)
    }

    /// Whether `id` lies in the subtree rooted at `ancestor` (inclusive).
    pub fn is_descendant(&self, id: FeatureId, ancestor: FeatureId) -> bool {
        let mut cur = Some(id);
        let mut steps = 0;
        while let Some(c) = cur {
            if c == ancestor {
                return true;
            }
            steps += 1;
            if steps > self.features.len() {
                return false;
            }
            cur = self.features.get(c.index()).and_then(|f| f.parent);
        }
        false
    }

    pub fn is_leaf(&self, id: FeatureId) -> bool {
        !self.features.iter().any(|f| f.parent == Some(id))
    }

    /// A copy of the model with the given constraints removed.
    pub fn without_constraints(&self, labels: &BTreeSet<&str>) -> FeatureModel {
        let mut out = self.clone();
        out.constraints.retain(|c| !labels.contains(c.label.as_str()));
        out
    }

    /// Structural equality that ignores feature numbering and constraint order:
    /// same tree by name, same groups, attributes and labeled formulas.
    pub fn same_structure(&self, other: &FeatureModel) -> bool {
        self.structure_key() == other.structure_key()
    }

    /// Children of `id` as written in the text format: ungrouped children in
    /// declaration order, each group at the position of its first member.
    pub fn child_items(&self, id: FeatureId) -> Vec<ChildItem<'_>> {
        let mut out = Vec::new();
        let mut emitted = BTreeSet::new();
        for c in self.children(id) {
            match self.groups.iter().position(|g| g.parent == id && g.members.contains(&c)) {
                None => out.push(ChildItem::Feature(c)),
                Some(g) => {
                    if emitted.insert(g) {
                        out.push(ChildItem::Group(&self.groups[g]));
                    }
                }
            }
        }
        out
    }

    fn structure_key(&self) -> StructureKey {
        let name = |id: FeatureId| self.features.get(id.index()).map(|f| f.name.clone());
        let features = self
            .features()
            .map(|(id, f)| {
                let items = self
                    .child_items(id)
                    .into_iter()
                    .map(|item| match item {
                        ChildItem::Feature(c) => ItemKey::Feature(name(c)),
                        ChildItem::Group(g) => ItemKey::Group(g.kind, g.members.iter().map(|m| name(*m)).collect()),
                    })
                    .collect();
                (f.name.clone(), (f.parent.and_then(name), f.variation, items))
            })
            .collect();
        StructureKey {
            name: self.name.clone(),
            root: name(self.root),
            features,
            attributes: self.attributes.iter().map(|a| a.name.clone()).collect(),
            constraints: self.constraints.iter().map(|c| (c.label.clone(), c.formula.clone())).collect(),
        }
    }
}

/// One entry of [`FeatureModel::child_items`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChildItem<'a> {
    Feature(FeatureId),
    Group(&'a Group),
}

#[derive(PartialEq, Eq)]
enum ItemKey {
    Feature(Option<String>),
    Group(GroupKind, Vec<Option<String>>),
}

#[derive(PartialEq, Eq)]
struct StructureKey {
    name: String,
    root: Option<String>,
    features: BTreeMap<String, (Option<String>, Variation, Vec<ItemKey>)>,
    attributes: Vec<String>,
    constraints: BTreeMap<String, Formula>,
}

/// One well-formedness problem.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum ModelViolation {
    EmptyModel,
    RootHasParent(String),
    /// A non-root feature without a parent.
    Orphan(String),
    DanglingParent { feature: String, parent: u32 },
    Cycle(String),
    DuplicateName(String),
    DuplicateLabel(String),
    /// An attribute name that is also a feature name, or declared twice.
    AttributeClash(String),
    UnknownSymbol(String),
    UndersizedGroup { parent: String, kind: GroupKind, size: usize },
    /// A group member that is not a child of the group's parent.
    GroupMemberNotChild { parent: String, member: String },
    /// A feature listed in more than one group.
    OverlappingGroups(String),
}

impl fmt::Display for ModelViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelViolation::EmptyModel => write!(f, "model has no features"),
            ModelViolation::RootHasParent(n) => write!(f, "root `{n}` has a parent"),
            ModelViolation::Orphan(n) => write!(f, "feature `{n}` has no parent but is not the root"),
            ModelViolation::DanglingParent { feature, parent } => {
                write!(f, "feature `{feature}` names missing parent #{parent}")
            }
            ModelViolation::Cycle(n) => write!(f, "feature `{n}` is on a parent cycle"),
            ModelViolation::DuplicateName(n) => write!(f, "duplicate feature name `{n}`"),
            ModelViolation::DuplicateLabel(l) => write!(f, "duplicate constraint label `{l}`"),
            ModelViolation::AttributeClash(n) => write!(f, "attribute `{n}` clashes with another declaration"),
            ModelViolation::UnknownSymbol(n) => write!(f, "unknown symbol `{n}`"),
            ModelViolation::UndersizedGroup { parent, kind, size } => {
                write!(f, "{} group under `{parent}` has {size} member(s); at least 2 required", kind.keyword())
            }
            ModelViolation::GroupMemberNotChild { parent, member } => {
                write!(f, "group member `{member}` is not a child of `{parent}`")
            }
            ModelViolation::OverlappingGroups(n) => write!(f, "feature `{n}` belongs to more than one group"),
        }
    }
}

/// Diagnostics from [`validate_model`]; empty iff the model is well-formed.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct WellFormednessReport {
    pub violations: Vec<ModelViolation>,
}

impl WellFormednessReport {
    pub fn is_well_formed(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for WellFormednessReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

pub fn validate_model(model: &FeatureModel) -> WellFormednessReport {
    let mut violations = Vec::new();
    let n = model.features.len();
    if n == 0 {
        violations.push(ModelViolation::EmptyModel);
        return WellFormednessReport { violations };
    }
    let label = |id: FeatureId| model.features.get(id.index()).map_or_else(|| id.to_string(), |f| f.name.clone());

    if model.root.index() >= n {
        violations.push(ModelViolation::DanglingParent { feature: "<root>".into(), parent: model.root.0 });
    }

    let mut seen = BTreeSet::new();
    for (id, f) in model.features() {
        if !seen.insert(f.name.as_str()) {
            violations.push(ModelViolation::DuplicateName(f.name.clone()));
        }
        match f.parent {
            None if id != model.root => violations.push(ModelViolation::Orphan(f.name.clone())),
            Some(_) if id == model.root => violations.push(ModelViolation::RootHasParent(f.name.clone())),
            Some(p) if p.index() >= n => {
                violations.push(ModelViolation::DanglingParent { feature: f.name.clone(), parent: p.0 })
            }
            _ => {}
        }
    }

    // A walk that does not reach a parentless feature within n steps is stuck in a cycle.
    for (id, f) in model.features() {
        let mut cur = f.parent;
        let mut steps = 0;
        while let Some(p) = cur {
            if p == id || steps > n {
                violations.push(ModelViolation::Cycle(f.name.clone()));
                break;
            }
            steps += 1;
            cur = model.features.get(p.index()).and_then(|pf| pf.parent);
        }
    }

    let mut grouped = BTreeSet::new();
    for g in &model.groups {
        if g.members.len() < 2 {
            violations.push(ModelViolation::UndersizedGroup {
                parent: label(g.parent),
                kind: g.kind,
                size: g.members.len(),
            });
        }
        for &m in &g.members {
            if model.features.get(m.index()).and_then(|f| f.parent) != Some(g.parent) {
                violations.push(ModelViolation::GroupMemberNotChild { parent: label(g.parent), member: label(m) });
            }
            if !grouped.insert(m) {
                violations.push(ModelViolation::OverlappingGroups(label(m)));
            }
        }
    }

    let mut attrs = BTreeSet::new();
    for a in &model.attributes {
        if seen.contains(a.name.as_str()) || !attrs.insert(a.name.as_str()) {
            violations.push(ModelViolation::AttributeClash(a.name.clone()));
        }
    }

    let mut labels = BTreeSet::new();
    let mut unknown = BTreeSet::new();
    for c in &model.constraints {
        if !labels.insert(c.label.as_str()) {
            violations.push(ModelViolation::DuplicateLabel(c.label.clone()));
        }
        for name in c.formula.features() {
            if !model.by_name.contains_key(name) {
                unknown.insert(name.to_string());
            }
        }
        for name in c.formula.attributes() {
            if !attrs.contains(name) {
                unknown.insert(name.to_string());
            }
        }
    }
    violations.extend(unknown.into_iter().map(ModelViolation::UnknownSymbol));

    WellFormednessReport { violations }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("ill-formed feature model:\n{0}")]
pub struct ModelError(pub WellFormednessReport);

/// Incremental, checked construction of a [`FeatureModel`].
#[derive(Debug, Clone)]
pub struct FeatureModelBuilder {
    name: String,
    features: Vec<Feature>,
    groups: Vec<Group>,
    attributes: Vec<AttributeDecl>,
    constraints: Vec<NamedConstraint>,
}

impl FeatureModelBuilder {
    /// Starts a model whose root (id 0) is `root`.
    pub fn new(name: impl Into<String>, root: impl Into<String>) -> Self {
        FeatureModelBuilder {
            name: name.into(),
            features: vec![Feature { name: root.into(), parent: None, variation: Variation::Mandatory }],
            groups: Vec::new(),
            attributes: Vec::new(),
            constraints: Vec::new(),
        }
    }

    pub fn root(&self) -> FeatureId {
        FeatureId(0)
    }

    pub fn child(&mut self, parent: FeatureId, name: impl Into<String>, variation: Variation) -> FeatureId {
        let id = FeatureId(self.features.len() as u32);
        self.features.push(Feature { name: name.into(), parent: Some(parent), variation });
        id
    }

    pub fn mandatory(&mut self, parent: FeatureId, name: impl Into<String>) -> FeatureId {
        self.child(parent, name, Variation::Mandatory)
    }

    pub fn optional(&mut self, parent: FeatureId, name: impl Into<String>) -> FeatureId {
        self.child(parent, name, Variation::Optional)
    }

    /// Adds a group of fresh optional children under `parent`.
    pub fn group<S: Into<String>>(
        &mut self,
        parent: FeatureId,
        kind: GroupKind,
        names: impl IntoIterator<Item = S>,
    ) -> Vec<FeatureId> {
        let members: Vec<_> = names.into_iter().map(|n| self.optional(parent, n)).collect();
        self.groups.push(Group { parent, kind, members: members.clone() });
        members
    }

    /// Groups existing children of `parent`.
    pub fn group_existing(&mut self, parent: FeatureId, kind: GroupKind, members: Vec<FeatureId>) {
        self.groups.push(Group { parent, kind, members });
    }

    pub fn attribute(&mut self, name: impl Into<String>) -> &mut Self {
        self.attributes.push(AttributeDecl { name: name.into() });
        self
    }

    pub fn constraint(&mut self, label: impl Into<String>, formula: Formula) -> &mut Self {
        self.constraints.push(NamedConstraint { label: label.into(), formula });
        self
    }

    pub fn build_unchecked(self) -> FeatureModel {
        FeatureModel::from_parts(self.name, FeatureId(0), self.features, self.groups, self.attributes, self.constraints)
    }

    pub fn build(self) -> Result<FeatureModel, ModelError> {
        let model = self.build_unchecked();
        let report = validate_model(&model);
        if report.is_well_formed() {
            Ok(model)
        } else {
            Err(ModelError(report))
        }
    }
}
