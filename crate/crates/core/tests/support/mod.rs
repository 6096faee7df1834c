//! Shared test support: a random feature-model generator and an exhaustive
//! 2^n oracle for validity. The oracle re-implements the tree rules on
//! bitmasks and does not use the crate's validity check or search.

#![allow(dead_code)]

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use varsel_core::{
    CmpOp, Environment, FeatureId, FeatureModel, FeatureModelBuilder, Formula, GroupKind, Valuation, Variation,
};

pub const SIZE_ATTRIBUTE: &str = "Size";

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A random well-formed model with `1..=max_features` features and up to
/// `max_constraints` constraints. Some models declare the `Size` attribute.
pub fn random_model(rng: &mut ChaCha8Rng, max_features: usize, max_constraints: usize) -> FeatureModel {
    let n = rng.gen_range(1..=max_features);
    let mut b = FeatureModelBuilder::new(format!("m{}", rng.gen::<u16>()), "F0");
    let mut parents: Vec<FeatureId> = vec![b.root()];
    let mut ids = vec![b.root()];
    for i in 1..n {
        // Bias towards recent features to get some depth.
        let lo = parents.len().saturating_sub(4);
        let parent = parents[rng.gen_range(lo..parents.len())];
        let variation = if rng.gen_bool(0.3) { Variation::Mandatory } else { Variation::Optional };
        let id = b.child(parent, format!("F{i}"), variation);
        ids.push(id);
        parents.push(id);
    }
    let draft = b.clone().build_unchecked();
    for &p in &ids {
        let mut kids = draft.children(p);
        kids.shuffle(rng);
        while kids.len() >= 2 && rng.gen_bool(0.5) {
            let size = rng.gen_range(2..=kids.len().min(4));
            let members: Vec<FeatureId> = kids.drain(..size).collect();
            let kind = if rng.gen_bool(0.5) { GroupKind::Xor } else { GroupKind::Or };
            b.group_existing(p, kind, members);
        }
    }
    let with_attr = rng.gen_bool(0.4);
    if with_attr {
        b.attribute(SIZE_ATTRIBUTE);
    }
    let names: Vec<String> = (0..n).map(|i| format!("F{i}")).collect();
    for k in 0..rng.gen_range(0..=max_constraints) {
        let f = random_formula(rng, &names, with_attr, 3);
        b.constraint(format!("K{}.{}", k / 2 + 1, k % 2 + 1), f);
    }
    b.build().expect("generator produces well-formed models")
}

pub fn random_formula(rng: &mut ChaCha8Rng, names: &[String], with_attr: bool, depth: u32) -> Formula {
    if depth == 0 || rng.gen_bool(0.3) {
        if with_attr && rng.gen_bool(0.2) {
            let op = *[CmpOp::Lt, CmpOp::Le, CmpOp::Gt, CmpOp::Ge, CmpOp::Eq].choose(rng).unwrap();
            return Formula::compare(SIZE_ATTRIBUTE, op, rng.gen_range(-5..100));
        }
        return Formula::feature(names.choose(rng).unwrap().clone());
    }
    let a = random_formula(rng, names, with_attr, depth - 1);
    match rng.gen_range(0..5) {
        0 => Formula::not(a),
        1 => Formula::and(a, random_formula(rng, names, with_attr, depth - 1)),
        2 => Formula::or(a, random_formula(rng, names, with_attr, depth - 1)),
        3 => Formula::implies(a, random_formula(rng, names, with_attr, depth - 1)),
        _ => Formula::iff(a, random_formula(rng, names, with_attr, depth - 1)),
    }
}

pub fn random_valuation(rng: &mut ChaCha8Rng, model: &FeatureModel) -> Valuation {
    model.attributes().iter().map(|a| (a.name.clone(), rng.gen_range(0..100))).collect()
}

/// Exhaustive oracle over all 2^n selections.
pub struct BruteForce<'a> {
    model: &'a FeatureModel,
    valuation: &'a Valuation,
}

struct MaskEnv<'a> {
    model: &'a FeatureModel,
    mask: u64,
    valuation: &'a Valuation,
}

impl Environment for MaskEnv<'_> {
    fn is_selected(&self, feature: &str) -> Option<bool> {
        self.model.id(feature).map(|id| self.mask & (1 << id.0) != 0)
    }
    fn attribute(&self, attribute: &str) -> Option<i64> {
        self.valuation.get(attribute).copied()
    }
}

impl<'a> BruteForce<'a> {
    pub fn new(model: &'a FeatureModel, valuation: &'a Valuation) -> Self {
        assert!(model.len() <= 22, "oracle is exhaustive");
        BruteForce { model, valuation }
    }

    /// Clauses (a)-(f) checked directly on the bitmask.
    pub fn is_valid(&self, mask: u64) -> bool {
        let m = self.model;
        let on = |id: FeatureId| mask & (1 << id.0) != 0;
        if !on(m.root()) {
            return false;
        }
        for (id, f) in m.features() {
            let Some(p) = f.parent else { continue };
            if on(id) && !on(p) {
                return false;
            }
            let grouped = m.groups().iter().any(|g| g.members.contains(&id));
            if !grouped && f.variation == Variation::Mandatory && on(p) && !on(id) {
                return false;
            }
        }
        for g in m.groups() {
            if on(g.parent) {
                let count = g.members.iter().filter(|&&x| on(x)).count();
                let ok = match g.kind {
                    GroupKind::Xor => count == 1,
                    GroupKind::Or => count >= 1,
                };
                if !ok {
                    return false;
                }
            }
        }
        let env = MaskEnv { model: m, mask, valuation: self.valuation };
        m.constraints().iter().all(|c| c.formula.eval(&env).expect("valuation covers attributes"))
    }

    /// Every valid selection bitmask, ascending.
    pub fn valid_masks(&self) -> Vec<u64> {
        (0..1u64 << self.model.len()).filter(|&m| self.is_valid(m)).collect()
    }
}

pub fn mask_of(ids: impl IntoIterator<Item = FeatureId>) -> u64 {
    ids.into_iter().fold(0, |m, id| m | (1 << id.0))
}
