use std::collections::{BTreeMap, BTreeSet};

use super::lexer::{is_keyword, lex, Tok, Token};
use super::{DiagnosticKind, ParseDiagnostic, SourceSpan};
use crate::formula::Formula;
use crate::model::{
    validate_model, AttributeDecl, Feature, FeatureId, FeatureModel, Group, GroupKind, NamedConstraint, Variation,
};

const TOP_LEVEL: &[&str] = &["model", "root", "mandatory", "optional", "attribute", "constraint"];

pub fn parse_model(text: &str) -> Result<FeatureModel, Vec<ParseDiagnostic>> {
    let mut diags = Vec::new();
    let tokens = lex(text, &mut diags);
    let mut p = Parser { tokens, pos: 0, diags, ..Parser::default() };
    p.model();
    p.finish()
}

/// Parses a single formula. Symbols are not resolved against any model.
pub fn parse_formula(text: &str) -> Result<Formula, Vec<ParseDiagnostic>> {
    let mut diags = Vec::new();
    let tokens = lex(text, &mut diags);
    let mut p = Parser { tokens, pos: 0, diags, ..Parser::default() };
    let formula = p.formula();
    if formula.is_some() && p.peek().tok != Tok::Eof {
        p.unexpected("end of formula");
    }
    match formula {
        Some(f) if p.diags.is_empty() => Ok(f),
        _ => Err(p.diags),
    }
}

#[derive(Default)]
struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    diags: Vec<ParseDiagnostic>,
    name: Option<String>,
    header_span: Option<SourceSpan>,
    root: Option<FeatureId>,
    features: Vec<Feature>,
    names: BTreeMap<String, SourceSpan>,
    groups: Vec<Group>,
    attributes: Vec<(AttributeDecl, SourceSpan)>,
    constraints: Vec<NamedConstraint>,
    labels: BTreeSet<String>,
    /// Symbols used in constraints: (name, used in a comparison, span).
    references: Vec<(String, bool, SourceSpan)>,
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.tokens[self.pos]
    }

    fn peek_word(&self) -> Option<&str> {
        match &self.peek().tok {
            Tok::Word(w) => Some(w),
            _ => None,
        }
    }

    fn at_word(&self, w: &str) -> bool {
        self.peek_word() == Some(w)
    }

    fn bump(&mut self) -> Token {
        let t = self.tokens[self.pos].clone();
        if t.tok != Tok::Eof {
            self.pos += 1;
        }
        t
    }

    fn error(&mut self, span: SourceSpan, kind: DiagnosticKind, message: impl Into<String>) {
        self.diags.push(ParseDiagnostic::new(span, kind, message));
    }

    fn describe(tok: &Tok) -> String {
        match tok {
            Tok::Word(w) => format!("`{w}`"),
            Tok::Int(v) => format!("integer {v}"),
            Tok::LBrace => "`{`".into(),
            Tok::RBrace => "`}`".into(),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::Colon => "`:`".into(),
            Tok::Cmp(op) => format!("`{op}`"),
            Tok::Eof => "end of input".into(),
        }
    }

    fn unexpected(&mut self, expected: &str) {
        let t = self.peek().clone();
        let msg = format!("expected {expected}, found {}", Self::describe(&t.tok));
        self.error(t.span, DiagnosticKind::Syntax, msg);
    }

    /// Skips to the next top-level declaration keyword outside any braces.
    fn sync_top_level(&mut self) {
        let mut depth = 0usize;
        loop {
            match &self.peek().tok {
                Tok::Eof => return,
                Tok::LBrace => depth += 1,
                Tok::RBrace => depth = depth.saturating_sub(1),
                Tok::Word(w) if depth == 0 && TOP_LEVEL.contains(&w.as_str()) => return,
                _ => {}
            }
            self.bump();
        }
    }

    /// Skips a balanced `{ ... }` block if one starts here.
    fn skip_block(&mut self) {
        if self.peek().tok != Tok::LBrace {
            return;
        }
        let mut depth = 0usize;
        loop {
            match self.bump().tok {
                Tok::LBrace => depth += 1,
                Tok::RBrace => {
                    depth -= 1;
                    if depth == 0 {
                        return;
                    }
                }
                Tok::Eof => return,
                _ => {}
            }
        }
    }

    /// An identifier; reports keywords and dotted words.
    fn ident(&mut self, what: &str) -> Option<(String, SourceSpan)> {
        let t = self.peek().clone();
        match t.tok {
            Tok::Word(w) if is_keyword(&w) => {
                self.error(t.span, DiagnosticKind::Syntax, format!("expected {what}, found keyword `{w}`"));
                None
            }
            Tok::Word(w) if w.contains('.') => {
                self.bump();
                self.error(t.span, DiagnosticKind::Syntax, format!("`{w}` is not a valid identifier"));
                None
            }
            Tok::Word(w) => {
                self.bump();
                Some((w, t.span))
            }
            _ => {
                self.unexpected(what);
                None
            }
        }
    }

    fn expect(&mut self, tok: Tok, what: &str) -> bool {
        if self.peek().tok == tok {
            self.bump();
            true
        } else {
            self.unexpected(what);
            false
        }
    }

    fn model(&mut self) {
        if self.at_word("model") {
            let kw = self.bump();
            self.header_span = Some(kw.span);
            if let Some((name, _)) = self.ident("model name") {
                self.name = Some(name);
            }
        } else {
            self.unexpected("`model` header");
        }
        loop {
            let t = self.peek().clone();
            match &t.tok {
                Tok::Eof => break,
                Tok::Word(w) => match w.as_str() {
                    "root" => {
                        self.bump();
                        let id = self.feature_tree(None, Variation::Mandatory, t.span);
                        match (self.root, id) {
                            (None, Some(id)) => self.root = Some(id),
                            (Some(_), Some(_)) => {
                                self.error(t.span, DiagnosticKind::Structure, "a model has exactly one root feature")
                            }
                            _ => {}
                        }
                    }
                    "mandatory" | "optional" => {
                        self.bump();
                        self.error(
                            t.span,
                            DiagnosticKind::Structure,
                            format!("`{w}` features must be nested under the root"),
                        );
                        self.ident("feature name");
                        self.skip_block();
                    }
                    "attribute" => {
                        self.bump();
                        self.attribute();
                    }
                    "constraint" => {
                        self.bump();
                        self.constraint();
                    }
                    "model" => {
                        self.bump();
                        self.error(t.span, DiagnosticKind::Syntax, "duplicate `model` header");
                        self.sync_top_level();
                    }
                    other => {
                        let msg = format!("unknown keyword `{other}`");
                        self.error(t.span, DiagnosticKind::UnknownKeyword, msg);
                        self.bump();
                        self.sync_top_level();
                    }
                },
                _ => {
                    self.unexpected("a declaration");
                    self.bump();
                    self.sync_top_level();
                }
            }
        }
    }

    fn add_feature(&mut self, name: String, span: SourceSpan, parent: Option<FeatureId>, variation: Variation) -> FeatureId {
        if self.names.contains_key(&name) {
            self.error(span, DiagnosticKind::DuplicateName, format!("feature `{name}` is declared twice"));
        } else {
            self.names.insert(name.clone(), span);
        }
        let id = FeatureId(self.features.len() as u32);
        self.features.push(Feature { name, parent, variation });
        id
    }

    /// After the `root`/`mandatory`/`optional` keyword.
    fn feature_tree(&mut self, parent: Option<FeatureId>, variation: Variation, _kw: SourceSpan) -> Option<FeatureId> {
        let Some((name, span)) = self.ident("feature name") else {
            self.skip_block();
            return None;
        };
        let id = self.add_feature(name, span, parent, variation);
        if self.peek().tok == Tok::LBrace {
            self.bump();
            self.block(id);
        }
        Some(id)
    }

    /// Children up to and including the closing brace.
    fn block(&mut self, parent: FeatureId) {
        loop {
            let t = self.peek().clone();
            match &t.tok {
                Tok::RBrace => {
                    self.bump();
                    return;
                }
                Tok::Eof => {
                    self.error(t.span, DiagnosticKind::Syntax, "unclosed `{`");
                    return;
                }
                Tok::Word(w) => match w.as_str() {
                    "mandatory" | "optional" | "root" => {
                        self.bump();
                        if w == "root" {
                            self.error(t.span, DiagnosticKind::Structure, "`root` cannot be nested");
                        }
                        let v = if w == "mandatory" { Variation::Mandatory } else { Variation::Optional };
                        self.feature_tree(Some(parent), v, t.span);
                    }
                    "xor" | "or" => {
                        self.bump();
                        let kind = if w == "xor" { GroupKind::Xor } else { GroupKind::Or };
                        self.group(parent, kind, t.span);
                    }
                    other => {
                        let msg = format!("unknown keyword `{other}`");
                        self.error(t.span, DiagnosticKind::UnknownKeyword, msg);
                        self.bump();
                        if matches!(self.peek_word(), Some(w) if !is_keyword(w)) {
                            self.bump();
                        }
                        self.skip_block();
                    }
                },
                _ => {
                    self.unexpected("a feature or group");
                    self.bump();
                }
            }
        }
    }

    fn group(&mut self, parent: FeatureId, kind: GroupKind, kw: SourceSpan) {
        if !self.expect(Tok::LBrace, "`{` after group keyword") {
            return;
        }
        let mut members = Vec::new();
        let end = loop {
            let t = self.peek().clone();
            match &t.tok {
                Tok::RBrace => {
                    self.bump();
                    break t.span;
                }
                Tok::Eof => {
                    self.error(t.span, DiagnosticKind::Syntax, "unclosed group");
                    break t.span;
                }
                Tok::Word(w) if w == "mandatory" || w == "optional" => {
                    self.bump();
                    let v = if w == "mandatory" { Variation::Mandatory } else { Variation::Optional };
                    if let Some(id) = self.feature_tree(Some(parent), v, t.span) {
                        members.push(id);
                    }
                }
                Tok::Word(w) => {
                    let kind = if is_keyword(w) { DiagnosticKind::Syntax } else { DiagnosticKind::UnknownKeyword };
                    let msg = format!("expected `mandatory` or `optional` inside a group, found `{w}`");
                    self.error(t.span, kind, msg);
                    self.bump();
                    if matches!(self.peek_word(), Some(w) if !is_keyword(w)) {
                        self.bump();
                    }
                    self.skip_block();
                }
                _ => {
                    self.unexpected("a group member");
                    self.bump();
                }
            }
        };
        if members.len() < 2 {
            let span = if end.line == kw.line {
                SourceSpan { line: kw.line, column: kw.column, length: end.column + end.length - kw.column }
            } else {
                kw
            };
            let msg = format!("{} group needs at least 2 members, found {}", kind.keyword(), members.len());
            self.error(span, DiagnosticKind::UndersizedGroup, msg);
        }
        self.groups.push(Group { parent, kind, members });
    }

    fn attribute(&mut self) {
        let Some((name, span)) = self.ident("attribute name") else {
            self.sync_top_level();
            return;
        };
        if !self.expect(Tok::Colon, "`:`") {
            self.sync_top_level();
            return;
        }
        match self.peek_word() {
            Some("int") => {
                self.bump();
            }
            Some(other) => {
                let t = self.peek().clone();
                let msg = format!("unknown attribute type `{other}`; only `int` is supported");
                self.error(t.span, DiagnosticKind::UnknownKeyword, msg);
                self.bump();
            }
            None => {
                self.unexpected("`int`");
                self.sync_top_level();
                return;
            }
        }
        if self.attributes.iter().any(|(a, _)| a.name == name) {
            self.error(span, DiagnosticKind::DuplicateName, format!("attribute `{name}` is declared twice"));
        }
        self.attributes.push((AttributeDecl { name }, span));
    }

    fn constraint(&mut self) {
        let t = self.peek().clone();
        let label = match &t.tok {
            Tok::Word(w) if !is_keyword(w) => {
                self.bump();
                w.clone()
            }
            _ => {
                self.unexpected("constraint label");
                self.sync_top_level();
                return;
            }
        };
        if !self.labels.insert(label.clone()) {
            self.error(t.span, DiagnosticKind::DuplicateName, format!("constraint label `{label}` is used twice"));
        }
        if !self.expect(Tok::Colon, "`:`") {
            self.sync_top_level();
            return;
        }
        let refs_before = self.references.len();
        match self.formula() {
            Some(formula) => {
                let at_boundary = match &self.peek().tok {
                    Tok::Eof => true,
                    Tok::Word(w) => TOP_LEVEL.contains(&w.as_str()),
                    _ => false,
                };
                if !at_boundary {
                    self.unexpected("an operator or the next declaration");
                    self.references.truncate(refs_before);
                    self.sync_top_level();
                    return;
                }
                self.constraints.push(NamedConstraint { label, formula });
            }
            None => {
                self.references.truncate(refs_before);
                self.sync_top_level();
            }
        }
    }

    fn formula(&mut self) -> Option<Formula> {
        let mut lhs = self.implication()?;
        while self.at_word("iff") {
            self.bump();
            lhs = Formula::iff(lhs, self.implication()?);
        }
        Some(lhs)
    }

    fn implication(&mut self) -> Option<Formula> {
        let lhs = self.disjunction()?;
        if self.at_word("implies") {
            self.bump();
            return Some(Formula::implies(lhs, self.implication()?));
        }
        Some(lhs)
    }

    fn disjunction(&mut self) -> Option<Formula> {
        let mut lhs = self.conjunction()?;
        while self.at_word("or") {
            self.bump();
            lhs = Formula::or(lhs, self.conjunction()?);
        }
        Some(lhs)
    }

    fn conjunction(&mut self) -> Option<Formula> {
        let mut lhs = self.unary()?;
        while self.at_word("and") {
            self.bump();
            lhs = Formula::and(lhs, self.unary()?);
        }
        Some(lhs)
    }

    fn unary(&mut self) -> Option<Formula> {
        if self.at_word("not") {
            self.bump();
            return Some(Formula::not(self.unary()?));
        }
        self.atom()
    }

    fn atom(&mut self) -> Option<Formula> {
        if self.peek().tok == Tok::LParen {
            self.bump();
            let inner = self.formula()?;
            return self.expect(Tok::RParen, "`)`").then_some(inner);
        }
        let (name, span) = self.ident("a feature, attribute comparison or `(`")?;
        if let Tok::Cmp(op) = self.peek().tok {
            self.bump();
            let t = self.peek().clone();
            let Tok::Int(value) = t.tok else {
                self.unexpected("an integer");
                return None;
            };
            self.bump();
            self.references.push((name.clone(), true, span));
            return Some(Formula::compare(name, op, value));
        }
        self.references.push((name.clone(), false, span));
        Some(Formula::Feature(name))
    }

    fn finish(mut self) -> Result<FeatureModel, Vec<ParseDiagnostic>> {
        for (attr, span) in &self.attributes {
            if self.names.contains_key(&attr.name) {
                self.diags.push(ParseDiagnostic::new(
                    *span,
                    DiagnosticKind::DuplicateName,
                    format!("attribute `{}` has the same name as a feature", attr.name),
                ));
            }
        }
        let refs = std::mem::take(&mut self.references);
        for (name, compared, span) in refs {
            let is_attr = self.attributes.iter().any(|(a, _)| a.name == name);
            let is_feature = self.names.contains_key(&name);
            let message = match (compared, is_attr, is_feature) {
                (true, true, _) | (false, _, true) => continue,
                (true, false, true) => format!("`{name}` is a feature and cannot be compared"),
                (true, false, false) => format!("unknown attribute `{name}`"),
                (false, true, _) => format!("attribute `{name}` must be compared with an integer"),
                (false, false, false) => format!("unknown feature `{name}`"),
            };
            self.diags.push(ParseDiagnostic::new(span, DiagnosticKind::UnknownSymbol, message));
        }
        let eof = self.tokens.last().map(|t| t.span).unwrap_or(SourceSpan { line: 1, column: 1, length: 0 });
        let header = self.header_span.unwrap_or(eof);
        let Some(root) = self.root else {
            if self.diags.is_empty() {
                self.diags.push(ParseDiagnostic::new(header, DiagnosticKind::Structure, "model has no root feature"));
            }
            return Err(self.diags);
        };
        if !self.diags.is_empty() {
            self.diags.sort_by_key(|d| (d.span.line, d.span.column));
            return Err(self.diags);
        }
        let model = FeatureModel::from_parts(
            self.name.unwrap_or_default(),
            root,
            self.features,
            self.groups,
            self.attributes.into_iter().map(|(a, _)| a).collect(),
            self.constraints,
        );
        let report = validate_model(&model);
        if !report.is_well_formed() {
            return Err(report
                .violations
                .iter()
                .map(|v| ParseDiagnostic::new(header, DiagnosticKind::Structure, v.to_string()))
                .collect());
        }
        Ok(model)
    }
}
