use std::fmt::Write;

use thiserror::Error;

use crate::config::{is_valid_configuration, Configuration, ConfigViolation};
use crate::error::EvalError;
use crate::model::{ChildItem, FeatureModel, Variation};

#[derive(Debug, Error)]
pub enum DotError {
    #[error("highlighted configuration is invalid: {}", list(.0))]
    InvalidHighlight(Vec<ConfigViolation>),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

fn list(v: &[ConfigViolation]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

fn quote(s: &str) -> String {
    format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""))
}

/// Renders the model as a DOT digraph. Selected features of `highlight` are filled.
pub fn export_dot(model: &FeatureModel, highlight: Option<&Configuration>) -> Result<String, DotError> {
    if let Some(config) = highlight {
        let verdict = is_valid_configuration(model, config)?;
        if !verdict.is_valid() {
            return Err(DotError::InvalidHighlight(verdict.violations().to_vec()));
        }
    }
    let mut out = String::new();
    let _ = writeln!(out, "digraph {} {{", quote(model.name()));
    out.push_str("  rankdir=TB;\n  node [shape=box, style=rounded];\n");
    for (id, f) in model.features() {
        let name = quote(&f.name);
        if highlight.is_some_and(|c| c.is_selected(id)) {
            let _ = writeln!(out, "  {name} [style=\"rounded,filled\", fillcolor=lightblue];");
        } else {
            let _ = writeln!(out, "  {name};");
        }
    }
    let mut cluster = 0;
    for (id, _) in model.features() {
        let parent = quote(model.name_of(id));
        for item in model.child_items(id) {
            match item {
                ChildItem::Feature(c) => {
                    let head = match model.feature(c).variation {
                        Variation::Mandatory => "dot",
                        Variation::Optional => "odot",
                    };
                    let _ = writeln!(out, "  {parent} -> {} [arrowhead={head}];", quote(model.name_of(c)));
                }
                ChildItem::Group(g) => {
                    let kw = g.kind.keyword();
                    for &m in &g.members {
                        let _ =
                            writeln!(out, "  {parent} -> {} [arrowhead=none, label=\"{kw}\"];", quote(model.name_of(m)));
                    }
                    let members: Vec<String> = g.members.iter().map(|&m| quote(model.name_of(m))).collect();
                    let _ = writeln!(
                        out,
                        "  subgraph \"cluster_{kw}_{cluster}\" {{ label=\"{kw}\"; style=dashed; {}; }}",
                        members.join("; ")
                    );
                    cluster += 1;
                }
            }
        }
    }
    if !model.constraints().is_empty() {
        let lines: String = model
            .constraints()
            .iter()
            .map(|c| format!("{}: {}\\l", c.label, c.formula))
            .collect();
        let _ = writeln!(out, "  \"constraints\" [shape=note, label=\"{}\"];", lines.replace('"', "\\\""));
    }
    out.push_str("}\n");
    Ok(out)
}
