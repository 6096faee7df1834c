//! Propositional cross-tree constraint formulas over feature literals and
//! integer attribute comparisons.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::EvalError;

/// Comparison operators allowed between an attribute and an integer literal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CmpOp {
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
}

impl CmpOp {
    pub fn apply(self, lhs: i64, rhs: i64) -> bool {
        match self {
            CmpOp::Lt => lhs < rhs,
            CmpOp::Le => lhs <= rhs,
            CmpOp::Gt => lhs > rhs,
            CmpOp::Ge => lhs >= rhs,
            CmpOp::Eq => lhs == rhs,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
            CmpOp::Eq => "==",
        }
    }
}

impl fmt::Display for CmpOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

/// A constraint formula. Symbols are kept by name so formulas can be moved
/// between models and printed exactly as written.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Formula {
    Feature(String),
    Compare { attribute: String, op: CmpOp, value: i64 },
    Not(Box<Formula>),
    And(Box<Formula>, Box<Formula>),
    Or(Box<Formula>, Box<Formula>),
    Implies(Box<Formula>, Box<Formula>),
    Iff(Box<Formula>, Box<Formula>),
}

/// Where a formula looks up feature selections and attribute values.
pub trait Environment {
    /// `None` when the feature is unknown to the environment.
    fn is_selected(&self, feature: &str) -> Option<bool>;
    /// `None` when the attribute has no value.
    fn attribute(&self, attribute: &str) -> Option<i64>;
}

impl Formula {
    pub fn feature(name: impl Into<String>) -> Self {
        Formula::Feature(name.into())
    }

    pub fn compare(attribute: impl Into<String>, op: CmpOp, value: i64) -> Self {
        Formula::Compare { attribute: attribute.into(), op, value }
    }

    pub fn not(f: Formula) -> Self {
        Formula::Not(Box::new(f))
    }

    pub fn and(a: Formula, b: Formula) -> Self {
        Formula::And(Box::new(a), Box::new(b))
    }

    pub fn or(a: Formula, b: Formula) -> Self {
        Formula::Or(Box::new(a), Box::new(b))
    }

    pub fn implies(a: Formula, b: Formula) -> Self {
        Formula::Implies(Box::new(a), Box::new(b))
    }

    pub fn iff(a: Formula, b: Formula) -> Self {
        Formula::Iff(Box::new(a), Box::new(b))
    }

    /// Two-valued evaluation.
    ///
    /// Every subterm is evaluated, so an unvalued attribute is reported even
    /// when a short-circuiting evaluator would never reach it.
    pub fn eval(&self, env: &impl Environment) -> Result<bool, EvalError> {
        Ok(match self {
            Formula::Feature(name) => env
                .is_selected(name)
                .ok_or_else(|| EvalError::UnknownSymbol(name.clone()))?,
            Formula::Compare { attribute, op, value } => {
                let lhs = env
                    .attribute(attribute)
                    .ok_or_else(|| EvalError::MissingAttribute(attribute.clone()))?;
                op.apply(lhs, *value)
            }
            Formula::Not(f) => !f.eval(env)?,
            Formula::And(a, b) => {
                let (a, b) = (a.eval(env)?, b.eval(env)?);
                a && b
            }
            Formula::Or(a, b) => {
                let (a, b) = (a.eval(env)?, b.eval(env)?);
                a || b
            }
            Formula::Implies(a, b) => {
                let (a, b) = (a.eval(env)?, b.eval(env)?);
                !a || b
            }
            Formula::Iff(a, b) => a.eval(env)? == b.eval(env)?,
        })
    }

    /// The premise of a rule: left side of `implies`/`iff`, otherwise the
    /// formula itself.
    pub fn premise(&self) -> &Formula {
        match self {
            Formula::Implies(a, _) | Formula::Iff(a, _) => a,
            other => other,
        }
    }

    /// The conclusion of a rule, if the formula has the shape of one.
    pub fn conclusion(&self) -> Option<&Formula> {
        match self {
            Formula::Implies(_, b) | Formula::Iff(_, b) => Some(b),
            _ => None,
        }
    }

    /// Feature names referenced by the formula.
    pub fn features(&self) -> BTreeSet<&str> {
        let mut out = BTreeSet::new();
        self.walk(&mut |f| {
            if let Formula::Feature(name) = f {
                out.insert(name.as_str());
            }
        });
        out
    }

    /// Attribute names referenced by the formula.
    pub fn attributes(&self) -> BTreeSet<&str> {
        let mut out = BTreeSet::new();
        self.walk(&mut |f| {
            if let Formula::Compare { attribute, .. } = f {
                out.insert(attribute.as_str());
            }
        });
        out
    }

    /// Flattens a chain of `or` into its operands, left to right.
    pub fn disjuncts(&self) -> Vec<&Formula> {
        match self {
            Formula::Or(a, b) => {
                let mut out = a.disjuncts();
                out.extend(b.disjuncts());
                out
            }
            other => vec![other],
        }
    }

    /// Flattens a chain of `and` into its operands, left to right.
    pub fn conjuncts(&self) -> Vec<&Formula> {
        match self {
            Formula::And(a, b) => {
                let mut out = a.conjuncts();
                out.extend(b.conjuncts());
                out
            }
            other => vec![other],
        }
    }

    fn walk<'a>(&'a self, visit: &mut impl FnMut(&'a Formula)) {
        visit(self);
        match self {
            Formula::Feature(_) | Formula::Compare { .. } => {}
            Formula::Not(f) => f.walk(visit),
            Formula::And(a, b) | Formula::Or(a, b) | Formula::Implies(a, b) | Formula::Iff(a, b) => {
                a.walk(visit);
                b.walk(visit);
            }
        }
    }

    /// Renders the formula with each attribute annotated by its value,
    /// e.g. `Samplesize[299] < 100000`.
    pub fn instantiate(&self, attribute: &dyn Fn(&str) -> Option<i64>) -> String {
        let mut out = String::new();
        write_formula(&mut out, self, 0, Some(attribute)).expect("writing to a String");
        out
    }

    fn precedence(&self) -> u8 {
        match self {
            Formula::Iff(..) => 1,
            Formula::Implies(..) => 2,
            Formula::Or(..) => 3,
            Formula::And(..) => 4,
            Formula::Not(_) => 5,
            Formula::Feature(_) | Formula::Compare { .. } => 6,
        }
    }
}

// `and`, `or` and `iff` associate to the left, `implies` to the right.
fn write_formula(
    out: &mut impl fmt::Write,
    f: &Formula,
    min_prec: u8,
    attribute: Option<&dyn Fn(&str) -> Option<i64>>,
) -> fmt::Result {
    let prec = f.precedence();
    let paren = prec < min_prec;
    if paren {
        out.write_char('(')?;
    }
    match f {
        Formula::Feature(name) => out.write_str(name)?,
        Formula::Compare { attribute: name, op, value } => {
            out.write_str(name)?;
            if let Some(v) = attribute.and_then(|lookup| lookup(name)) {
                write!(out, "[{v}]")?;
            }
            write!(out, " {op} {value}")?;
        }
        Formula::Not(inner) => {
            out.write_str("not ")?;
            write_formula(out, inner, prec, attribute)?;
        }
        Formula::And(a, b) | Formula::Or(a, b) | Formula::Iff(a, b) => {
            write_formula(out, a, prec, attribute)?;
            out.write_str(match f {
                Formula::And(..) => " and ",
                Formula::Or(..) => " or ",
                _ => " iff ",
            })?;
            write_formula(out, b, prec + 1, attribute)?;
        }
        Formula::Implies(a, b) => {
            write_formula(out, a, prec + 1, attribute)?;
            out.write_str(" implies ")?;
            write_formula(out, b, prec, attribute)?;
        }
    }
    if paren {
        out.write_char(')')?;
    }
    Ok(())
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_formula(f, self, 0, None)
    }
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;

    use super::*;

    struct Env {
        selected: BTreeSet<&'static str>,
        known: BTreeSet<&'static str>,
        attrs: BTreeMap<&'static str, i64>,
    }

    impl Environment for Env {
        fn is_selected(&self, feature: &str) -> Option<bool> {
            self.known.contains(feature).then(|| self.selected.contains(feature))
        }
        fn attribute(&self, attribute: &str) -> Option<i64> {
            self.attrs.get(attribute).copied()
        }
    }

    fn env(selected: &[&'static str], known: &[&'static str], attrs: &[(&'static str, i64)]) -> Env {
        Env {
            selected: selected.iter().copied().collect(),
            known: known.iter().chain(selected).copied().collect(),
            attrs: attrs.iter().copied().collect(),
        }
    }

    fn lit(name: &str) -> Formula {
        Formula::feature(name)
    }

    #[test]
    fn regression_rule_fires_for_quantity_at_299() {
        // Samplesize > 50 and Predictiontype and Quantity iff Regression
        let rule = Formula::iff(
            Formula::and(
                Formula::and(Formula::compare("Samplesize", CmpOp::Gt, 50), lit("Predictiontype")),
                lit("Quantity"),
            ),
            lit("Regression"),
        );
        let e = env(&["Predictiontype", "Quantity", "Regression"], &[], &[("Samplesize", 299)]);
        assert!(rule.eval(&e).unwrap());
    }

    #[test]
    fn negated_unselected_literal_is_true() {
        let e = env(&[], &["X"], &[]);
        assert!(Formula::not(lit("X")).eval(&e).unwrap());
    }

    #[test]
    fn unvalued_attribute_is_an_error() {
        let e = env(&[], &[], &[]);
        let f = Formula::compare("Samplesize", CmpOp::Lt, 100_000);
        assert_eq!(f.eval(&e), Err(EvalError::MissingAttribute("Samplesize".into())));
    }

    #[test]
    fn missing_attribute_reported_even_behind_a_false_conjunct() {
        let e = env(&[], &["X"], &[]);
        let f = Formula::and(lit("X"), Formula::compare("Samplesize", CmpOp::Lt, 10));
        assert!(matches!(f.eval(&e), Err(EvalError::MissingAttribute(_))));
    }

    #[test]
    fn unknown_feature_is_an_error() {
        let e = env(&[], &[], &[]);
        assert_eq!(lit("Foo").eval(&e), Err(EvalError::UnknownSymbol("Foo".into())));
    }

    #[test]
    fn comparison_operators() {
        assert!(CmpOp::Lt.apply(9999, 10_000));
        assert!(!CmpOp::Lt.apply(10_000, 10_000));
        assert!(CmpOp::Ge.apply(10_000, 10_000));
        assert!(CmpOp::Le.apply(3, 3));
        assert!(CmpOp::Eq.apply(3, 3));
        assert!(!CmpOp::Gt.apply(50, 50));
    }

    #[test]
    fn printing_uses_minimal_parentheses() {
        let f = Formula::iff(lit("Category"), Formula::not(Formula::and(lit("Quantity"), lit("Structure"))));
        assert_eq!(f.to_string(), "Category iff not (Quantity and Structure)");

        let right_nested = Formula::and(lit("a"), Formula::and(lit("b"), lit("c")));
        assert_eq!(right_nested.to_string(), "a and (b and c)");
        let left_nested = Formula::and(Formula::and(lit("a"), lit("b")), lit("c"));
        assert_eq!(left_nested.to_string(), "a and b and c");

        let imp = Formula::implies(lit("a"), Formula::implies(lit("b"), lit("c")));
        assert_eq!(imp.to_string(), "a implies b implies c");
        let imp_left = Formula::implies(Formula::implies(lit("a"), lit("b")), lit("c"));
        assert_eq!(imp_left.to_string(), "(a implies b) implies c");

        let mixed = Formula::or(lit("RidgeRegression"), Formula::and(lit("SVRLinear"), Formula::not(lit("NotWorking"))));
        assert_eq!(mixed.to_string(), "RidgeRegression or SVRLinear and not NotWorking");
    }

    #[test]
    fn instantiate_annotates_attribute_values() {
        let f = Formula::and(lit("Classification"), Formula::compare("Samplesize", CmpOp::Lt, 100_000));
        let text = f.instantiate(&|a| (a == "Samplesize").then_some(299));
        assert_eq!(text, "Classification and Samplesize[299] < 100000");
    }

    #[test]
    fn premise_and_disjuncts() {
        let f = Formula::implies(lit("a"), Formula::or(Formula::or(lit("x"), lit("y")), lit("z")));
        assert_eq!(f.premise(), &lit("a"));
        let names: Vec<String> = f.conclusion().unwrap().disjuncts().iter().map(|d| d.to_string()).collect();
        assert_eq!(names, ["x", "y", "z"]);
    }
}
