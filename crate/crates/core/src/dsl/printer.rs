use std::cmp::Ordering;
use std::fmt::Write;

use crate::model::{ChildItem, FeatureId, FeatureModel, Variation};

/// Canonical text: 2-space indentation, children in declaration order,
/// attributes after the tree, constraints last sorted by label.
pub fn serialize_model(model: &FeatureModel) -> String {
    let mut out = format!("model {}\n\n", model.name());
    write_feature(&mut out, model, model.root(), "root", 0);
    if !model.attributes().is_empty() {
        out.push('\n');
        for a in model.attributes() {
            let _ = writeln!(out, "attribute {} : int", a.name);
        }
    }
    let mut constraints: Vec<_> = model.constraints().iter().collect();
    constraints.sort_by(|a, b| natural_cmp(&a.label, &b.label));
    if !constraints.is_empty() {
        out.push('\n');
        for c in constraints {
            let _ = writeln!(out, "constraint {} : {}", c.label, c.formula);
        }
    }
    out
}

fn keyword(model: &FeatureModel, id: FeatureId) -> &'static str {
    match model.feature(id).variation {
        Variation::Mandatory => "mandatory",
        Variation::Optional => "optional",
    }
}

fn write_feature(out: &mut String, model: &FeatureModel, id: FeatureId, kw: &str, depth: usize) {
    let pad = "  ".repeat(depth);
    let items = model.child_items(id);
    if items.is_empty() {
        let _ = writeln!(out, "{pad}{kw} {}", model.name_of(id));
        return;
    }
    let _ = writeln!(out, "{pad}{kw} {} {{", model.name_of(id));
    for item in items {
        match item {
            ChildItem::Feature(c) => write_feature(out, model, c, keyword(model, c), depth + 1),
            ChildItem::Group(g) => {
                let _ = writeln!(out, "{pad}  {} {{", g.kind.keyword());
                for &m in &g.members {
                    write_feature(out, model, m, keyword(model, m), depth + 2);
                }
                let _ = writeln!(out, "{pad}  }}");
            }
        }
    }
    let _ = writeln!(out, "{pad}}}");
}

/// Orders labels with digit runs compared numerically, so `C2.10` sorts after `C2.2`.
pub fn natural_cmp(a: &str, b: &str) -> Ordering {
    let (mut x, mut y) = (a, b);
    loop {
        match (x.chars().next(), y.chars().next()) {
            (None, None) => return a.cmp(b),
            (None, _) => return Ordering::Less,
            (_, None) => return Ordering::Greater,
            (Some(c), Some(d)) if c.is_ascii_digit() && d.is_ascii_digit() => {
                let i = x.find(|ch: char| !ch.is_ascii_digit()).unwrap_or(x.len());
                let j = y.find(|ch: char| !ch.is_ascii_digit()).unwrap_or(y.len());
                let (nx, ny) = (x[..i].trim_start_matches('0'), y[..j].trim_start_matches('0'));
                let ord = nx.len().cmp(&ny.len()).then_with(|| nx.cmp(ny));
                if ord != Ordering::Equal {
                    return ord;
                }
                x = &x[i..];
                y = &y[j..];
            }
            (Some(c), Some(d)) => {
                if c != d {
                    return c.cmp(&d);
                }
                x = &x[c.len_utf8()..];
                y = &y[d.len_utf8()..];
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::parse_model;

    #[test]
    fn minimal_model_is_canonical() {
        let m = parse_model("model m\nroot R { }").unwrap();
        assert_eq!(serialize_model(&m), "model m\n\nroot R\n");
    }

    #[test]
    fn labels_sort_naturally() {
        let mut labels = vec!["C2.10", "C2.2", "C1.1", "C10.1", "C2.1"];
        labels.sort_by(|a, b| natural_cmp(a, b));
        assert_eq!(labels, ["C1.1", "C2.1", "C2.2", "C2.10", "C10.1"]);
    }

    #[test]
    fn groups_print_at_first_member() {
        let text = "model m\n\nroot R {\n  optional A\n  xor {\n    optional B\n    mandatory C {\n      optional D\n    }\n  }\n  optional E\n}\n\nattribute N : int\n\nconstraint K1 : B implies N < 3\nconstraint K2 : not (A or E) iff D\n";
        let m = parse_model(text).unwrap();
        assert_eq!(serialize_model(&m), text);
    }
}
