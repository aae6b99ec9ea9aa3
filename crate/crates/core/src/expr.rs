//! Symbolic estimands: a small language of sums, products and quotients of
//! conditional-probability terms, evaluated exactly against a [`JointTable`].
//!
//! A lowercase value symbol such as `y` stands for the value of the
//! same-named uppercase variable `Y`; any other pairing is written out as
//! `VAR=value`. Rendering and parsing follow the grammar
//!
//! ```text
//! expr       := factor (('*' | '/') factor)*
//! factor     := 'P(' terms ('|' terms)? ')' | 'sum_{' sym (',' sym)* '}' expr | '(' expr ')' | '1'
//! terms      := assignment (',' assignment)*
//! assignment := sym | VAR '=' VALUE
//! ```
//!
//! A `sum_{..}` body extends as far right as possible.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use itertools::Itertools;
use thiserror::Error;

use crate::graph::is_valid_name;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExprError {
    #[error("parse error at byte {position}: {message}")]
    Parse { position: usize, message: String },
    #[error("bound variable `{0}` is bound twice along one path")]
    DuplicateBound(String),
    #[error("conditioning event {event} has probability zero in {term}")]
    ConditioningOnZero { term: String, event: String },
    #[error("symbol `{0}` is not bound")]
    Unbound(String),
    #[error("variable `{0}` is not in the joint table")]
    UnknownVariable(String),
    #[error("value `{value}` is not in the domain of `{var}`")]
    UnknownValue { var: String, value: String },
    #[error("bound symbol `{0}` must label exactly one variable in its body")]
    BoundSymbolUse(String),
    #[error("invalid joint table: {0}")]
    InvalidTable(String),
}

/// The value slot of an assignment: a symbol (free or summed over) or a
/// literal domain value.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Value {
    Sym(String),
    Lit(String),
}

impl Value {
    pub fn sym(s: impl Into<String>) -> Self {
        Value::Sym(s.into())
    }

    pub fn lit(s: impl Into<String>) -> Self {
        Value::Lit(s.into())
    }

    pub fn as_sym(&self) -> Option<&str> {
        match self {
            Value::Sym(s) => Some(s),
            Value::Lit(_) => None,
        }
    }
}

/// `VAR = value`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Assignment {
    pub var: String,
    pub value: Value,
}

impl Assignment {
    pub fn new(var: impl Into<String>, value: Value) -> Self {
        Assignment {
            var: var.into(),
            value,
        }
    }

    /// `Y = y`: the variable paired with its own default symbol.
    pub fn symbolic(var: &str) -> Self {
        Assignment::new(var, Value::Sym(default_symbol(var)))
    }

    pub fn literal(var: &str, value: &str) -> Self {
        Assignment::new(var, Value::Lit(value.to_string()))
    }
}

/// Lowercased variable name, the symbol that renders bare.
pub fn default_symbol(var: &str) -> String {
    var.to_lowercase()
}

/// The variable a bare symbol refers to: uppercase with primes stripped.
pub fn symbol_variable(sym: &str) -> String {
    sym.trim_end_matches('\'').to_uppercase()
}

pub(crate) fn is_symbol(s: &str) -> bool {
    let core = s.trim_end_matches('\'');
    let mut chars = core.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_lowercase())
        && chars.all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_')
}

fn is_bare_literal(s: &str) -> bool {
    let body = s.strip_prefix('-').unwrap_or(s);
    let mut chars = body.chars();
    let first_ok = match chars.next() {
        Some(c) if c.is_ascii_digit() => true,
        Some(c) if c.is_ascii_uppercase() && !s.starts_with('-') => true,
        _ => false,
    };
    first_ok && chars.all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '.')
}

impl fmt::Display for Assignment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.value {
            Value::Sym(s)
                if is_symbol(s)
                    && !s.ends_with('\'')
                    && symbol_variable(s) == self.var
                    && *s == default_symbol(&self.var) =>
            {
                write!(f, "{s}")
            }
            Value::Sym(s) if is_symbol(s) && s.ends_with('\'') && symbol_variable(s) == self.var => {
                write!(f, "{s}")
            }
            Value::Sym(s) => write!(f, "{}={s}", self.var),
            Value::Lit(l) if is_bare_literal(l) => write!(f, "{}={l}", self.var),
            Value::Lit(l) => write!(
                f,
                "{}=\"{}\"",
                self.var,
                l.replace('\\', "\\\\").replace('"', "\\\"")
            ),
        }
    }
}

/// `P(joint | given)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ProbTerm {
    pub joint: Vec<Assignment>,
    pub given: Vec<Assignment>,
}

impl fmt::Display for ProbTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "P({}", self.joint.iter().join(","))?;
        if !self.given.is_empty() {
            write!(f, "|{}", self.given.iter().join(","))?;
        }
        write!(f, ")")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Estimand {
    Prob(ProbTerm),
    Sum { bound: String, body: Box<Estimand> },
    /// Always holds at least two factors; see [`Estimand::product`].
    Product(Vec<Estimand>),
    Quotient(Box<Estimand>, Box<Estimand>),
    One,
}

impl Estimand {
    pub fn prob(joint: Vec<Assignment>, given: Vec<Assignment>) -> Self {
        Estimand::Prob(ProbTerm { joint, given })
    }

    pub fn sum(bound: impl Into<String>, body: Estimand) -> Self {
        Estimand::Sum {
            bound: bound.into(),
            body: Box::new(body),
        }
    }

    /// Sums over several symbols, outermost first.
    pub fn sum_over<I: IntoIterator<Item = String>>(bound: I, body: Estimand) -> Self
    where
        I::IntoIter: DoubleEndedIterator,
    {
        bound
            .into_iter()
            .rev()
            .fold(body, |acc, b| Estimand::sum(b, acc))
    }

    /// Product that collapses the empty and singleton cases.
    pub fn product(mut factors: Vec<Estimand>) -> Self {
        match factors.len() {
            0 => Estimand::One,
            1 => factors.pop().unwrap(),
            _ => Estimand::Product(factors),
        }
    }

    pub fn quotient(num: Estimand, den: Estimand) -> Self {
        Estimand::Quotient(Box::new(num), Box::new(den))
    }

    /// Symbols not bound by an enclosing sum.
    pub fn free_symbols(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_free(&mut Vec::new(), &mut out);
        out
    }

    fn collect_free(&self, bound: &mut Vec<String>, out: &mut BTreeSet<String>) {
        match self {
            Estimand::Prob(t) => {
                for a in t.joint.iter().chain(&t.given) {
                    if let Value::Sym(s) = &a.value {
                        if !bound.contains(s) {
                            out.insert(s.clone());
                        }
                    }
                }
            }
            Estimand::Sum { bound: b, body } => {
                bound.push(b.clone());
                body.collect_free(bound, out);
                bound.pop();
            }
            Estimand::Product(fs) => fs.iter().for_each(|f| f.collect_free(bound, out)),
            Estimand::Quotient(n, d) => {
                n.collect_free(bound, out);
                d.collect_free(bound, out);
            }
            Estimand::One => {}
        }
    }

    /// Checks that no symbol is bound twice along a root-to-leaf path.
    pub fn validate(&self) -> Result<(), ExprError> {
        fn walk(e: &Estimand, bound: &mut Vec<String>) -> Result<(), ExprError> {
            match e {
                Estimand::Sum { bound: b, body } => {
                    if bound.contains(b) {
                        return Err(ExprError::DuplicateBound(b.clone()));
                    }
                    bound.push(b.clone());
                    walk(body, bound)?;
                    bound.pop();
                    Ok(())
                }
                Estimand::Product(fs) => fs.iter().try_for_each(|f| walk(f, bound)),
                Estimand::Quotient(n, d) => {
                    walk(n, bound)?;
                    walk(d, bound)
                }
                _ => Ok(()),
            }
        }
        walk(self, &mut Vec::new())
    }

    /// Replaces the value of every assignment `var = from` with `to`.
    pub fn rename(&self, var: &str, from: &Value, to: &Value) -> Estimand {
        self.map_assignments(&|a: &Assignment| {
            if a.var == var && a.value == *from {
                Assignment::new(var, to.clone())
            } else {
                a.clone()
            }
        })
    }

    /// Replaces every occurrence of a symbol in an assignment value. Sum
    /// binders are left untouched.
    pub fn substitute_symbol(&self, sym: &str, to: &Value) -> Estimand {
        self.map_assignments(&|a: &Assignment| match &a.value {
            Value::Sym(s) if s == sym => Assignment::new(a.var.clone(), to.clone()),
            _ => a.clone(),
        })
    }

    fn map_assignments(&self, f: &dyn Fn(&Assignment) -> Assignment) -> Estimand {
        match self {
            Estimand::Prob(t) => Estimand::Prob(ProbTerm {
                joint: t.joint.iter().map(f).collect(),
                given: t.given.iter().map(f).collect(),
            }),
            Estimand::Sum { bound, body } => Estimand::Sum {
                bound: bound.clone(),
                body: Box::new(body.map_assignments(f)),
            },
            Estimand::Product(fs) => {
                Estimand::Product(fs.iter().map(|x| x.map_assignments(f)).collect())
            }
            Estimand::Quotient(n, d) => Estimand::quotient(n.map_assignments(f), d.map_assignments(f)),
            Estimand::One => Estimand::One,
        }
    }

    /// Number of assignments whose value is the symbol `sym`.
    fn symbol_uses(&self, sym: &str) -> usize {
        match self {
            Estimand::Prob(t) => t
                .joint
                .iter()
                .chain(&t.given)
                .filter(|a| a.value.as_sym() == Some(sym))
                .count(),
            Estimand::Sum { body, .. } => body.symbol_uses(sym),
            Estimand::Product(fs) => fs.iter().map(|f| f.symbol_uses(sym)).sum(),
            Estimand::Quotient(n, d) => n.symbol_uses(sym) + d.symbol_uses(sym),
            Estimand::One => 0,
        }
    }

    /// Variables labelled by `sym` anywhere in the expression.
    fn symbol_variables(&self, sym: &str, out: &mut BTreeSet<String>) {
        match self {
            Estimand::Prob(t) => {
                for a in t.joint.iter().chain(&t.given) {
                    if a.value.as_sym() == Some(sym) {
                        out.insert(a.var.clone());
                    }
                }
            }
            Estimand::Sum { body, .. } => body.symbol_variables(sym, out),
            Estimand::Product(fs) => fs.iter().for_each(|f| f.symbol_variables(sym, out)),
            Estimand::Quotient(n, d) => {
                n.symbol_variables(sym, out);
                d.symbol_variables(sym, out);
            }
            Estimand::One => {}
        }
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        render_into(self, true, &mut s);
        s
    }
}

impl fmt::Display for Estimand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

impl std::str::FromStr for Estimand {
    type Err = ExprError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_estimand(s)
    }
}

// `tail`: nothing follows this expression inside its enclosing parentheses,
// so a trailing sum may stay unparenthesized.
fn render_into(e: &Estimand, tail: bool, out: &mut String) {
    match e {
        Estimand::Prob(t) => out.push_str(&t.to_string()),
        Estimand::One => out.push('1'),
        Estimand::Sum { .. } => {
            let mut bound = Vec::new();
            let mut cur = e;
            while let Estimand::Sum { bound: b, body } = cur {
                bound.push(b.as_str());
                cur = body;
            }
            if !tail {
                out.push('(');
            }
            out.push_str("sum_{");
            out.push_str(&bound.join(","));
            out.push_str("} ");
            render_into(cur, true, out);
            if !tail {
                out.push(')');
            }
        }
        Estimand::Product(fs) => {
            let last = fs.len() - 1;
            for (i, f) in fs.iter().enumerate() {
                if i > 0 {
                    out.push_str(" * ");
                }
                let bare = match f {
                    Estimand::Prob(_) | Estimand::One => true,
                    Estimand::Quotient(..) => i == 0,
                    Estimand::Sum { .. } => i == last && tail,
                    Estimand::Product(_) => false,
                };
                render_operand(f, bare, i == last && tail, out);
            }
        }
        Estimand::Quotient(n, d) => {
            let num_bare = !matches!(**n, Estimand::Sum { .. });
            render_operand(n, num_bare, false, out);
            out.push_str(" / ");
            let den_bare = match **d {
                Estimand::Prob(_) | Estimand::One => true,
                Estimand::Sum { .. } => tail,
                _ => false,
            };
            render_operand(d, den_bare, tail, out);
        }
    }
}

fn render_operand(e: &Estimand, bare: bool, tail: bool, out: &mut String) {
    if bare {
        render_into(e, tail, out);
    } else {
        out.push('(');
        render_into(e, true, out);
        out.push(')');
    }
}

// ---------------------------------------------------------------------------
// Lexing and parsing

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Tok {
    Ident(String),
    Literal(String),
    Quoted(String),
    LParen,
    RParen,
    LBrace,
    RBrace,
    Bar,
    Comma,
    Eq,
    Star,
    Slash,
}

pub(crate) fn lex(text: &str) -> Result<Vec<(usize, Tok)>, ExprError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    let err = |position: usize, message: String| ExprError::Parse { position, message };
    while i < bytes.len() {
        let c = bytes[i] as char;
        let start = i;
        match c {
            ' ' | '\t' | '\n' | '\r' => {
                i += 1;
                continue;
            }
            '(' => out.push((start, Tok::LParen)),
            ')' => out.push((start, Tok::RParen)),
            '{' => out.push((start, Tok::LBrace)),
            '}' => out.push((start, Tok::RBrace)),
            '|' => out.push((start, Tok::Bar)),
            ',' => out.push((start, Tok::Comma)),
            '=' => out.push((start, Tok::Eq)),
            '*' => out.push((start, Tok::Star)),
            '/' => out.push((start, Tok::Slash)),
            '"' => {
                let mut s = String::new();
                i += 1;
                loop {
                    match bytes.get(i) {
                        None => return Err(err(start, "unterminated string".into())),
                        Some(b'"') => break,
                        Some(b'\\') => {
                            match bytes.get(i + 1) {
                                Some(&b) => s.push(b as char),
                                None => return Err(err(i, "dangling escape".into())),
                            }
                            i += 2;
                        }
                        Some(_) => {
                            let ch = text[i..].chars().next().unwrap();
                            s.push(ch);
                            i += ch.len_utf8();
                        }
                    }
                }
                out.push((start, Tok::Quoted(s)));
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let mut j = i + 1;
                while j < bytes.len() && (bytes[j].is_ascii_alphanumeric() || bytes[j] == b'_') {
                    j += 1;
                }
                while j < bytes.len() && bytes[j] == b'\'' {
                    j += 1;
                }
                out.push((start, Tok::Ident(text[i..j].to_string())));
                i = j;
                continue;
            }
            c if c.is_ascii_digit()
                || (c == '-' && bytes.get(i + 1).is_some_and(|b| b.is_ascii_digit())) =>
            {
                let mut j = i + 1;
                while j < bytes.len()
                    && (bytes[j].is_ascii_alphanumeric() || bytes[j] == b'_' || bytes[j] == b'.')
                {
                    j += 1;
                }
                out.push((start, Tok::Literal(text[i..j].to_string())));
                i = j;
                continue;
            }
            other => return Err(err(start, format!("unexpected character `{other}`"))),
        }
        i += 1;
    }
    Ok(out)
}

pub(crate) struct Parser {
    toks: Vec<(usize, Tok)>,
    pos: usize,
    end: usize,
    bound: Vec<String>,
}

impl Parser {
    pub(crate) fn new(text: &str) -> Result<Self, ExprError> {
        Ok(Parser {
            toks: lex(text)?,
            pos: 0,
            end: text.len(),
            bound: Vec::new(),
        })
    }

    pub(crate) fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(_, t)| t)
    }

    pub(crate) fn peek_at(&self, offset: usize) -> Option<&Tok> {
        self.toks.get(self.pos + offset).map(|(_, t)| t)
    }

    pub(crate) fn offset(&self) -> usize {
        self.toks.get(self.pos).map(|(p, _)| *p).unwrap_or(self.end)
    }

    pub(crate) fn error<T>(&self, message: impl Into<String>) -> Result<T, ExprError> {
        Err(ExprError::Parse {
            position: self.offset(),
            message: message.into(),
        })
    }

    pub(crate) fn next(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).map(|(_, t)| t.clone());
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    pub(crate) fn expect(&mut self, tok: Tok, what: &str) -> Result<(), ExprError> {
        if self.peek() == Some(&tok) {
            self.pos += 1;
            Ok(())
        } else {
            self.error(format!("expected {what}"))
        }
    }

    pub(crate) fn at_end(&self) -> bool {
        self.pos >= self.toks.len()
    }

    fn expr(&mut self) -> Result<Estimand, ExprError> {
        let mut acc = self.factor()?;
        let mut open_product = false;
        loop {
            match self.peek() {
                Some(Tok::Star) => {
                    self.pos += 1;
                    let f = self.factor()?;
                    match (&mut acc, open_product) {
                        (Estimand::Product(fs), true) => fs.push(f),
                        _ => {
                            acc = Estimand::Product(vec![acc, f]);
                            open_product = true;
                        }
                    }
                }
                Some(Tok::Slash) => {
                    self.pos += 1;
                    let f = self.factor()?;
                    acc = Estimand::quotient(acc, f);
                    open_product = false;
                }
                _ => return Ok(acc),
            }
        }
    }

    fn factor(&mut self) -> Result<Estimand, ExprError> {
        match (self.peek().cloned(), self.peek_at(1)) {
            (Some(Tok::Ident(id)), Some(Tok::LParen)) if id == "P" => {
                self.pos += 2;
                let joint = self.assignments()?;
                let given = if self.peek() == Some(&Tok::Bar) {
                    self.pos += 1;
                    self.assignments()?
                } else {
                    Vec::new()
                };
                self.expect(Tok::RParen, "`)` closing the probability term")?;
                Ok(Estimand::prob(joint, given))
            }
            (Some(Tok::Ident(id)), Some(Tok::LBrace)) if id == "sum_" => {
                self.pos += 2;
                let mut syms = Vec::new();
                loop {
                    match self.next() {
                        Some(Tok::Ident(s)) if is_symbol(&s) => {
                            if self.bound.contains(&s) || syms.contains(&s) {
                                self.pos -= 1;
                                return Err(ExprError::DuplicateBound(s));
                            }
                            syms.push(s);
                        }
                        _ => {
                            self.pos = self.pos.saturating_sub(1);
                            return self.error("expected a lowercase bound symbol");
                        }
                    }
                    match self.next() {
                        Some(Tok::Comma) => continue,
                        Some(Tok::RBrace) => break,
                        _ => {
                            self.pos -= 1;
                            return self.error("expected `,` or `}`");
                        }
                    }
                }
                let depth = self.bound.len();
                self.bound.extend(syms.iter().cloned());
                let body = self.expr()?;
                self.bound.truncate(depth);
                Ok(Estimand::sum_over(syms, body))
            }
            (Some(Tok::LParen), _) => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(e)
            }
            (Some(Tok::Literal(l)), _) if l == "1" => {
                self.pos += 1;
                Ok(Estimand::One)
            }
            _ => self.error("expected `P(`, `sum_{`, `(` or `1`"),
        }
    }

    fn assignments(&mut self) -> Result<Vec<Assignment>, ExprError> {
        let mut out = vec![self.assignment()?];
        while self.peek() == Some(&Tok::Comma) {
            self.pos += 1;
            out.push(self.assignment()?);
        }
        Ok(out)
    }

    /// `sym` or `VAR=VALUE`.
    pub(crate) fn assignment(&mut self) -> Result<Assignment, ExprError> {
        let id = match self.peek() {
            Some(Tok::Ident(id)) => id.clone(),
            _ => return self.error("expected an assignment"),
        };
        if self.peek_at(1) == Some(&Tok::Eq) {
            if !is_valid_name(&id) {
                return self.error(format!("invalid variable name `{id}`"));
            }
            self.pos += 2;
            let value = self.value()?;
            return Ok(Assignment::new(id, value));
        }
        if is_symbol(&id) {
            self.pos += 1;
            return Ok(Assignment::new(symbol_variable(&id), Value::Sym(id)));
        }
        self.error(format!("expected `{id}=VALUE` or a lowercase symbol"))
    }

    pub(crate) fn value(&mut self) -> Result<Value, ExprError> {
        match self.next() {
            Some(Tok::Ident(s)) if is_symbol(&s) => Ok(Value::Sym(s)),
            Some(Tok::Ident(s)) if !s.contains('\'') => Ok(Value::Lit(s)),
            Some(Tok::Literal(s)) | Some(Tok::Quoted(s)) => Ok(Value::Lit(s)),
            _ => {
                self.pos = self.pos.saturating_sub(1);
                self.error("expected a value")
            }
        }
    }
}

/// Parses the estimand grammar.
pub fn parse_estimand(text: &str) -> Result<Estimand, ExprError> {
    let mut p = Parser::new(text)?;
    let e = p.expr()?;
    if !p.at_end() {
        return p.error("unexpected trailing input");
    }
    Ok(e)
}

// ---------------------------------------------------------------------------
// Joint distributions

/// An exact distribution over full assignments of finitely many categorical
/// variables, stored densely in mixed radix (first variable most
/// significant).
#[derive(Debug, Clone, PartialEq)]
pub struct JointTable {
    vars: Vec<String>,
    domains: Vec<Vec<String>>,
    strides: Vec<usize>,
    mass: Vec<f64>,
}

/// Normalization tolerance applied at construction.
pub const MASS_TOLERANCE: f64 = 1e-9;

impl JointTable {
    pub fn new(vars: Vec<String>, domains: Vec<Vec<String>>, mass: Vec<f64>) -> Result<Self, ExprError> {
        if vars.len() != domains.len() {
            return Err(ExprError::InvalidTable("one domain per variable required".into()));
        }
        let unique: BTreeSet<&String> = vars.iter().collect();
        if unique.len() != vars.len() {
            return Err(ExprError::InvalidTable("duplicate variable".into()));
        }
        if let Some(i) = domains.iter().position(|d| d.is_empty()) {
            return Err(ExprError::InvalidTable(format!("empty domain for `{}`", vars[i])));
        }
        let size: usize = domains.iter().map(|d| d.len()).product();
        if mass.len() != size {
            return Err(ExprError::InvalidTable(format!(
                "expected {size} cells, got {}",
                mass.len()
            )));
        }
        if let Some(m) = mass.iter().find(|m| !(**m >= 0.0) || !m.is_finite()) {
            return Err(ExprError::InvalidTable(format!("invalid mass {m}")));
        }
        let total: f64 = mass.iter().sum();
        if (total - 1.0).abs() > MASS_TOLERANCE {
            return Err(ExprError::InvalidTable(format!("total mass {total} is not 1")));
        }
        let strides = strides_for(&domains);
        Ok(JointTable {
            vars,
            domains,
            strides,
            mass,
        })
    }

    /// Builds a table from unnormalized non-negative weights.
    pub fn from_weights(vars: Vec<String>, domains: Vec<Vec<String>>, weights: Vec<f64>) -> Result<Self, ExprError> {
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) {
            return Err(ExprError::InvalidTable("weights sum to zero".into()));
        }
        let mass = weights.iter().map(|w| w / total).collect();
        JointTable::new(vars, domains, mass)
    }

    pub fn vars(&self) -> &[String] {
        &self.vars
    }

    pub fn domains(&self) -> &[Vec<String>] {
        &self.domains
    }

    pub fn domain(&self, var: &str) -> Option<&[String]> {
        self.var_index(var).map(|i| self.domains[i].as_slice())
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn var_index(&self, var: &str) -> Option<usize> {
        self.vars.iter().position(|v| v == var)
    }

    pub fn value_index(&self, var: usize, value: &str) -> Option<usize> {
        self.domains[var].iter().position(|v| v == value)
    }

    /// Decodes the value index of `var` in cell `cell`.
    pub fn cell_value(&self, cell: usize, var: usize) -> usize {
        (cell / self.strides[var]) % self.domains[var].len()
    }

    pub fn cell_index(&self, values: &[usize]) -> usize {
        values.iter().zip(&self.strides).map(|(v, s)| v * s).sum()
    }

    /// Probability of a conjunction of `(variable index, value index)`.
    /// Conflicting assignments of one variable give probability zero.
    pub fn probability(&self, event: &[(usize, usize)]) -> f64 {
        if event.is_empty() {
            return self.mass.iter().sum();
        }
        self.mass
            .iter()
            .enumerate()
            .filter(|(cell, _)| event.iter().all(|&(v, x)| self.cell_value(*cell, v) == x))
            .map(|(_, m)| m)
            .sum()
    }

    /// Probability of an event given by names.
    pub fn prob_of(&self, event: &[(&str, &str)]) -> Result<f64, ExprError> {
        let resolved = event
            .iter()
            .map(|(var, value)| self.resolve(var, value))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(self.probability(&resolved))
    }

    fn resolve(&self, var: &str, value: &str) -> Result<(usize, usize), ExprError> {
        let vi = self
            .var_index(var)
            .ok_or_else(|| ExprError::UnknownVariable(var.to_string()))?;
        let xi = self.value_index(vi, value).ok_or_else(|| ExprError::UnknownValue {
            var: var.to_string(),
            value: value.to_string(),
        })?;
        Ok((vi, xi))
    }

    /// Marginal over `keep`, in the given order.
    pub fn marginal(&self, keep: &[&str]) -> Result<JointTable, ExprError> {
        let idx = keep
            .iter()
            .map(|v| self.var_index(v).ok_or_else(|| ExprError::UnknownVariable(v.to_string())))
            .collect::<Result<Vec<_>, _>>()?;
        let domains: Vec<Vec<String>> = idx.iter().map(|&i| self.domains[i].clone()).collect();
        let strides = strides_for(&domains);
        let mut mass = vec![0.0; domains.iter().map(|d| d.len()).product()];
        for (cell, m) in self.mass.iter().enumerate() {
            let target: usize = idx
                .iter()
                .zip(&strides)
                .map(|(&v, s)| self.cell_value(cell, v) * s)
                .sum();
            mass[target] += m;
        }
        Ok(JointTable {
            vars: keep.iter().map(|s| s.to_string()).collect(),
            domains,
            strides,
            mass,
        })
    }

    /// Iterates over `(value indices, mass)` for every cell.
    pub fn cells(&self) -> impl Iterator<Item = (Vec<usize>, f64)> + '_ {
        self.mass.iter().enumerate().map(move |(cell, &m)| {
            let values = (0..self.vars.len()).map(|v| self.cell_value(cell, v)).collect();
            (values, m)
        })
    }

    /// Largest cellwise difference when both tables share variables and domains.
    pub fn max_abs_diff(&self, other: &JointTable) -> Option<f64> {
        if self.vars != other.vars || self.domains != other.domains {
            return None;
        }
        Some(
            self.mass
                .iter()
                .zip(&other.mass)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max),
        )
    }
}

fn strides_for(domains: &[Vec<String>]) -> Vec<usize> {
    let mut strides = vec![1; domains.len()];
    for i in (0..domains.len().saturating_sub(1)).rev() {
        strides[i] = strides[i + 1] * domains[i + 1].len();
    }
    strides
}

// ---------------------------------------------------------------------------
// Evaluation

/// Binding of free symbols to domain values.
pub type Binding = BTreeMap<String, String>;

/// Evaluates `e` exactly on `j`, with free symbols taken from `binding`.
pub fn eval_estimand(e: &Estimand, j: &JointTable, binding: &Binding) -> Result<f64, ExprError> {
    let mut env = binding.clone();
    eval(e, j, &mut env)
}

fn eval(e: &Estimand, j: &JointTable, env: &mut Binding) -> Result<f64, ExprError> {
    match e {
        Estimand::One => Ok(1.0),
        Estimand::Prob(t) => {
            let resolve = |a: &Assignment, env: &Binding| -> Result<(usize, usize), ExprError> {
                let value = match &a.value {
                    Value::Lit(l) => l.as_str(),
                    Value::Sym(s) => env.get(s).ok_or_else(|| ExprError::Unbound(s.clone()))?,
                };
                j.resolve(&a.var, value)
            };
            let given = t
                .given
                .iter()
                .map(|a| resolve(a, env))
                .collect::<Result<Vec<_>, _>>()?;
            let mut event = t
                .joint
                .iter()
                .map(|a| resolve(a, env))
                .collect::<Result<Vec<_>, _>>()?;
            let denominator = if given.is_empty() { 1.0 } else { j.probability(&given) };
            if denominator <= 0.0 {
                let described = t
                    .given
                    .iter()
                    .zip(&given)
                    .map(|(a, &(v, x))| format!("{}={}", a.var, j.domains[v][x]))
                    .join(", ");
                return Err(ExprError::ConditioningOnZero {
                    term: t.to_string(),
                    event: described,
                });
            }
            event.extend(given);
            Ok(j.probability(&event) / denominator)
        }
        Estimand::Sum { bound, body } => {
            let mut vars = BTreeSet::new();
            body.symbol_variables(bound, &mut vars);
            if vars.len() != 1 {
                return Err(ExprError::BoundSymbolUse(bound.clone()));
            }
            let var = vars.into_iter().next().unwrap();
            let vi = j
                .var_index(&var)
                .ok_or_else(|| ExprError::UnknownVariable(var.clone()))?;
            let saved = env.get(bound).cloned();
            let mut total = 0.0;
            for value in &j.domains[vi] {
                env.insert(bound.clone(), value.clone());
                let r = eval(body, j, env);
                if r.is_err() {
                    restore(env, bound, saved);
                    return r;
                }
                total += r.unwrap();
            }
            restore(env, bound, saved);
            Ok(total)
        }
        Estimand::Product(fs) => {
            let mut acc = 1.0;
            for f in fs {
                acc *= eval(f, j, env)?;
            }
            Ok(acc)
        }
        Estimand::Quotient(n, d) => {
            let den = eval(d, j, env)?;
            if den <= 0.0 {
                return Err(ExprError::ConditioningOnZero {
                    term: e.render(),
                    event: format!("denominator {}", d.render()),
                });
            }
            Ok(eval(n, j, env)? / den)
        }
    }
}

fn restore(env: &mut Binding, key: &str, saved: Option<String>) {
    match saved {
        Some(v) => env.insert(key.to_string(), v),
        None => env.remove(key),
    };
}

// ---------------------------------------------------------------------------
// Simplification

/// Conservative rewriting to a fixpoint: product flattening and `1`
/// elimination, quotient cancellation of identical factors, chain-rule
/// merging `P(a|b,C) * P(b|C) -> P(a,b|C)`, and marginalization
/// `sum_{z} P(z,A|C) * rest -> P(A|C) * rest` when `z` occurs nowhere else.
pub fn simplify(e: &Estimand) -> Estimand {
    let mut current = e.clone();
    loop {
        let next = simplify_once(&current);
        if next == current {
            return current;
        }
        current = next;
    }
}

fn simplify_once(e: &Estimand) -> Estimand {
    match e {
        Estimand::Prob(_) | Estimand::One => e.clone(),
        Estimand::Product(fs) => {
            let mut flat = Vec::new();
            for f in fs {
                match simplify_once(f) {
                    Estimand::Product(inner) => flat.extend(inner),
                    Estimand::One => {}
                    other => flat.push(other),
                }
            }
            merge_chain_rule(&mut flat);
            Estimand::product(flat)
        }
        Estimand::Quotient(n, d) => {
            let n = simplify_once(n);
            let d = simplify_once(d);
            if d == Estimand::One {
                return n;
            }
            let mut num = factors_of(n);
            let mut den = factors_of(d);
            let mut i = 0;
            while i < den.len() {
                if let Some(k) = num.iter().position(|f| *f == den[i]) {
                    num.remove(k);
                    den.remove(i);
                } else {
                    i += 1;
                }
            }
            if den.is_empty() {
                Estimand::product(num)
            } else {
                Estimand::quotient(Estimand::product(num), Estimand::product(den))
            }
        }
        Estimand::Sum { bound, body } => {
            let body = simplify_once(body);
            if body.symbol_uses(bound) == 1 {
                let mut fs = factors_of(body.clone());
                let hit = fs.iter().position(|f| match f {
                    Estimand::Prob(t) => t.joint.iter().any(|a| a.value.as_sym() == Some(bound)),
                    _ => false,
                });
                if let Some(k) = hit {
                    if let Estimand::Prob(t) = &fs[k] {
                        let joint: Vec<Assignment> = t
                            .joint
                            .iter()
                            .filter(|a| a.value.as_sym() != Some(bound))
                            .cloned()
                            .collect();
                        fs[k] = if joint.is_empty() {
                            Estimand::One
                        } else {
                            Estimand::prob(joint, t.given.clone())
                        };
                        fs.retain(|f| *f != Estimand::One);
                        return Estimand::product(fs);
                    }
                }
            }
            Estimand::sum(bound.clone(), body)
        }
    }
}

fn factors_of(e: Estimand) -> Vec<Estimand> {
    match e {
        Estimand::Product(fs) => fs,
        Estimand::One => Vec::new(),
        other => vec![other],
    }
}

/// Repeatedly merges `P(A | B, C)` with `P(B | C)` into `P(A, B | C)`.
fn merge_chain_rule(fs: &mut Vec<Estimand>) {
    'outer: loop {
        for i in 0..fs.len() {
            for j in 0..fs.len() {
                if i == j {
                    continue;
                }
                let (Estimand::Prob(a), Estimand::Prob(b)) = (&fs[i], &fs[j]) else {
                    continue;
                };
                if let Some(merged) = chain(a, b) {
                    fs[i] = Estimand::Prob(merged);
                    fs.remove(j);
                    continue 'outer;
                }
            }
        }
        return;
    }
}

fn chain(upper: &ProbTerm, lower: &ProbTerm) -> Option<ProbTerm> {
    let given: BTreeSet<&Assignment> = upper.given.iter().collect();
    let b: BTreeSet<&Assignment> = lower.joint.iter().collect();
    let c: BTreeSet<&Assignment> = lower.given.iter().collect();
    if b.is_empty() || !b.is_disjoint(&c) {
        return None;
    }
    let bc: BTreeSet<&Assignment> = b.union(&c).copied().collect();
    if given != bc || given.len() != upper.given.len() {
        return None;
    }
    let upper_vars: BTreeSet<&str> = upper.joint.iter().map(|a| a.var.as_str()).collect();
    if lower
        .joint
        .iter()
        .chain(&lower.given)
        .any(|a| upper_vars.contains(a.var.as_str()))
    {
        return None;
    }
    let mut joint = upper.joint.clone();
    joint.extend(lower.joint.iter().cloned());
    Some(ProbTerm {
        joint,
        given: lower.given.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(s: &str) -> Estimand {
        parse_estimand(s).unwrap()
    }

    fn table3() -> JointTable {
        // X, Y, Z binary with arbitrary positive weights
        let weights = vec![3.0, 1.0, 2.0, 5.0, 4.0, 1.0, 2.0, 6.0];
        JointTable::from_weights(
            vec!["X".into(), "Y".into(), "Z".into()],
            vec![vec!["0".into(), "1".into()]; 3],
            weights,
        )
        .unwrap()
    }

    fn bind(pairs: &[(&str, &str)]) -> Binding {
        pairs.iter().map(|(a, b)| (a.to_string(), b.to_string())).collect()
    }

    #[test]
    fn renders_the_adjustment_formula() {
        let e = Estimand::sum(
            "z",
            Estimand::product(vec![
                Estimand::prob(
                    vec![Assignment::symbolic("Y")],
                    vec![Assignment::symbolic("X"), Assignment::symbolic("Z")],
                ),
                Estimand::prob(vec![Assignment::symbolic("Z")], vec![]),
            ]),
        );
        assert_eq!(e.render(), "sum_{z} P(y|x,z) * P(z)");
        assert_eq!(p("sum_{z} P(y|x,z) * P(z)"), e);
    }

    #[test]
    fn parses_single_term_and_literals() {
        assert_eq!(
            p("P(y|x)"),
            Estimand::prob(vec![Assignment::symbolic("Y")], vec![Assignment::symbolic("X")])
        );
        let e = p("P(Y=1|X=x2, R_Y=0)");
        assert_eq!(e.render(), "P(Y=1|X=x2,R_Y=0)");
        assert_eq!(p("P(A=\"no way\")").render(), "P(A=\"no way\")");
        assert_eq!(p("P(x')").render(), "P(x')");
    }

    #[test]
    fn rejects_duplicate_bound_and_garbage() {
        assert_eq!(
            parse_estimand("sum_{z} sum_{z} P(z)").unwrap_err(),
            ExprError::DuplicateBound("z".into())
        );
        assert!(matches!(
            parse_estimand("sum_{z,z} P(z)").unwrap_err(),
            ExprError::DuplicateBound(_)
        ));
        assert!(matches!(parse_estimand("P(y").unwrap_err(), ExprError::Parse { .. }));
        assert!(matches!(parse_estimand("P(Y)").unwrap_err(), ExprError::Parse { .. }));
        assert!(matches!(parse_estimand("P(y) P(x)").unwrap_err(), ExprError::Parse { position: 5, .. }));
    }

    #[test]
    fn operator_structure_survives_rendering() {
        for s in [
            "P(a) * P(b) / P(c)",
            "P(a) / P(b) * P(c)",
            "P(a) / P(b) / P(c)",
            "P(a) * (P(b) / P(c))",
            "(sum_{b} P(a,b)) * P(c)",
            "P(c) * sum_{b} P(a,b)",
            "(sum_{b} P(a,b)) / sum_{c} P(c)",
            "P(a) / (P(b) * P(c))",
            "(P(a) * P(b)) * P(c)",
            "sum_{m} P(m|x) * sum_{x2} P(y|m,X=x2) * P(X=x2)",
            "1 / P(x)",
        ] {
            let e = p(s);
            assert_eq!(e.render(), s);
            assert_eq!(p(&e.render()), e);
        }
    }

    #[test]
    fn evaluates_marginals_and_conditionals() {
        let j = table3();
        let b = bind(&[("x", "1")]);
        let direct = j.prob_of(&[("X", "1")]).unwrap();
        assert!((eval_estimand(&p("P(x)"), &j, &b).unwrap() - direct).abs() < 1e-15);
        let err = {
            let zero = JointTable::new(
                vec!["X".into(), "Y".into()],
                vec![vec!["0".into(), "1".into()]; 2],
                vec![0.5, 0.5, 0.0, 0.0],
            )
            .unwrap();
            eval_estimand(&p("P(y|x)"), &zero, &bind(&[("x", "1"), ("y", "0")])).unwrap_err()
        };
        assert!(matches!(err, ExprError::ConditioningOnZero { ref event, .. } if event == "X=1"));
    }

    #[test]
    fn adjustment_formula_matches_hand_summation() {
        let j = table3();
        let e = p("sum_{z} P(y|x,z) * P(z)");
        for x in ["0", "1"] {
            for y in ["0", "1"] {
                let mut expected = 0.0;
                for z in ["0", "1"] {
                    let pxyz = j.prob_of(&[("X", x), ("Y", y), ("Z", z)]).unwrap();
                    let pxz = j.prob_of(&[("X", x), ("Z", z)]).unwrap();
                    let pz = j.prob_of(&[("Z", z)]).unwrap();
                    expected += pxyz / pxz * pz;
                }
                let got = eval_estimand(&e, &j, &bind(&[("x", x), ("y", y)])).unwrap();
                assert!((got - expected).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn unbound_and_unknown_values_are_errors() {
        let j = table3();
        assert_eq!(
            eval_estimand(&p("P(y)"), &j, &Binding::new()).unwrap_err(),
            ExprError::Unbound("y".into())
        );
        assert!(matches!(
            eval_estimand(&p("P(Y=7)"), &j, &Binding::new()).unwrap_err(),
            ExprError::UnknownValue { .. }
        ));
    }

    #[test]
    fn simplification_examples() {
        assert_eq!(simplify(&p("sum_{z} P(x|z) * P(z)")), p("P(x)"));
        let backdoor = p("sum_{z} P(y|x,z) * P(z)");
        assert_eq!(simplify(&backdoor), backdoor);
        assert_eq!(simplify(&p("sum_{z} P(z)")), Estimand::One);
        assert_eq!(simplify(&p("(P(a) * P(b)) / P(b)")), p("P(a)"));
        assert_eq!(simplify(&p("P(a) * 1 * (P(b) * P(c))")), p("P(a) * P(b) * P(c)"));
        assert_eq!(
            simplify(&p("P(y,z) / sum_{y2} P(Y=y2,z)")),
            p("P(y,z) / P(z)")
        );
        let e = p("sum_{m} P(m|x) * sum_{x2} P(y|m,X=x2) * P(X=x2)");
        assert_eq!(simplify(&simplify(&e)), simplify(&e));
    }

    #[test]
    fn joint_table_validation() {
        let v = vec!["X".to_string()];
        let d = vec![vec!["0".to_string(), "1".to_string()]];
        assert!(JointTable::new(v.clone(), d.clone(), vec![0.5, 0.6]).is_err());
        assert!(JointTable::new(v.clone(), d.clone(), vec![-0.5, 1.5]).is_err());
        assert!(JointTable::new(v.clone(), vec![vec![]], vec![]).is_err());
        assert!(JointTable::new(v, d, vec![0.25, 0.75]).is_ok());
    }

    #[test]
    fn marginal_sums_out_the_rest() {
        let j = table3();
        let m = j.marginal(&["Z", "X"]).unwrap();
        let direct = j.prob_of(&[("Z", "1"), ("X", "0")]).unwrap();
        assert!((m.prob_of(&[("Z", "1"), ("X", "0")]).unwrap() - direct).abs() < 1e-15);
        assert!((m.mass().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}
