//! Query classification, back-door search and complete identification of
//! interventional queries.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use itertools::Itertools;
use thiserror::Error;

use crate::expr::{
    default_symbol, is_symbol, simplify, symbol_variable, Assignment, Estimand, ExprError, Parser, Tok,
    Value,
};
use crate::graph::{is_valid_name, Admg, GraphError};

pub mod witness;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IdentifyError {
    #[error("malformed query: {0}")]
    Query(#[from] ExprError),
    #[error("malformed query: {0}")]
    Malformed(String),
    #[error("counterfactual (layer 3) queries cannot be identified from the graph and observational data alone")]
    CounterfactualQuery,
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// A query from the three-layer hierarchy.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CausalQuery {
    pub outcome: Vec<Assignment>,
    pub do_: Vec<Assignment>,
    pub condition: Vec<Assignment>,
    /// Factual evidence of a counterfactual query; its variables may repeat
    /// those of the outcome and intervention.
    pub counterfactual_evidence: Option<Vec<Assignment>>,
}

impl CausalQuery {
    /// Interventional query `P(outcome | do(do_))` with default symbols.
    pub fn interventional(outcome: &[&str], do_: &[&str]) -> Self {
        CausalQuery {
            outcome: outcome.iter().map(|v| Assignment::symbolic(v)).collect(),
            do_: do_.iter().map(|v| Assignment::symbolic(v)).collect(),
            condition: Vec::new(),
            counterfactual_evidence: None,
        }
    }

    pub fn with_condition(mut self, condition: &[&str]) -> Self {
        self.condition = condition.iter().map(|v| Assignment::symbolic(v)).collect();
        self
    }

    pub fn layer(&self) -> u8 {
        query_layer(self)
    }

    pub fn variables(&self) -> BTreeSet<String> {
        self.outcome
            .iter()
            .chain(&self.do_)
            .chain(&self.condition)
            .map(|a| a.var.clone())
            .collect()
    }

    /// Value symbols occurring in the query.
    pub fn symbols(&self) -> BTreeSet<String> {
        self.outcome
            .iter()
            .chain(&self.do_)
            .chain(&self.condition)
            .chain(self.counterfactual_evidence.iter().flatten())
            .filter_map(|a| a.value.as_sym().map(str::to_string))
            .collect()
    }

    fn check(&self) -> Result<(), IdentifyError> {
        if self.outcome.is_empty() {
            return Err(IdentifyError::Malformed("the outcome is empty".into()));
        }
        let mut seen = BTreeSet::new();
        for a in self.outcome.iter().chain(&self.do_).chain(&self.condition) {
            if !seen.insert(a.var.as_str()) {
                return Err(IdentifyError::Malformed(format!(
                    "variable `{}` appears more than once among outcome, intervention and condition",
                    a.var
                )));
            }
        }
        Ok(())
    }
}

impl fmt::Display for CausalQuery {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let list = |v: &[Assignment]| v.iter().map(|a| a.to_string()).join(",");
        if let Some(evidence) = &self.counterfactual_evidence {
            let sub = list(&self.do_);
            let outcome = self
                .outcome
                .iter()
                .map(|a| match &a.value {
                    Value::Sym(s) => format!("{s}_{{{sub}}}"),
                    Value::Lit(l) => format!("{}_{{{sub}}}={l}", a.var),
                })
                .join(",");
            write!(f, "P({outcome}")?;
            if !evidence.is_empty() {
                write!(f, " | {}", list(evidence))?;
            }
            return write!(f, ")");
        }
        write!(f, "P({}", list(&self.outcome))?;
        let mut rhs = Vec::new();
        if !self.do_.is_empty() {
            rhs.push(format!("do({})", list(&self.do_)));
        }
        if !self.condition.is_empty() {
            rhs.push(list(&self.condition));
        }
        if !rhs.is_empty() {
            write!(f, " | {}", rhs.join(", "))?;
        }
        write!(f, ")")
    }
}

impl std::str::FromStr for CausalQuery {
    type Err = IdentifyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_query(s)
    }
}

/// Layer of the causal hierarchy a query belongs to.
pub fn query_layer(q: &CausalQuery) -> u8 {
    match (&q.counterfactual_evidence, q.do_.is_empty()) {
        (Some(_), _) => 3,
        (None, true) => 1,
        (None, false) => 2,
    }
}

/// Parses `P(Y | do(X))`, `P(Y=1 | do(X=0), Z)`, `P(y|x)` and the
/// counterfactual forms `P(y_{x} | x', y')` and `P(Y_{X=1}=1 | X=0, Y=0)`.
/// A bare uppercase variable stands for its lowercase symbol.
pub fn parse_query(text: &str) -> Result<CausalQuery, IdentifyError> {
    let mut p = Parser::new(text)?;
    match (p.next(), p.next()) {
        (Some(Tok::Ident(id)), Some(Tok::LParen)) if id == "P" => {}
        _ => return fail(&p, "expected `P(`"),
    }
    let mut outcome = Vec::new();
    let mut subscript: Option<Vec<Assignment>> = None;
    loop {
        let (a, sub) = query_outcome(&mut p)?;
        if let Some(sub) = sub {
            match &subscript {
                Some(prev) if *prev != sub => {
                    return fail(&p, "all outcomes must share one subscript")
                }
                _ => subscript = Some(sub),
            }
        } else if subscript.is_some() {
            return fail(&p, "all outcomes must share one subscript");
        }
        outcome.push(a);
        if p.peek() == Some(&Tok::Comma) {
            p.next();
        } else {
            break;
        }
    }
    let mut do_ = Vec::new();
    let mut condition = Vec::new();
    if p.peek() == Some(&Tok::Bar) {
        p.next();
        loop {
            let is_do = matches!(p.peek(), Some(Tok::Ident(id)) if id == "do") && p.peek_at(1) == Some(&Tok::LParen);
            if is_do {
                if subscript.is_some() {
                    return fail(&p, "`do(...)` cannot appear in a counterfactual query");
                }
                p.next();
                p.next();
                loop {
                    do_.push(query_assignment(&mut p)?);
                    if p.peek() == Some(&Tok::Comma) {
                        p.next();
                    } else {
                        break;
                    }
                }
                p.expect(Tok::RParen, "`)` closing do(...)")?;
            } else {
                condition.push(query_assignment(&mut p)?);
            }
            if p.peek() == Some(&Tok::Comma) {
                p.next();
            } else {
                break;
            }
        }
    }
    p.expect(Tok::RParen, "`)` closing the query")?;
    if !p.at_end() {
        return fail(&p, "unexpected trailing input");
    }
    let q = match subscript {
        Some(sub) => CausalQuery {
            outcome,
            do_: sub,
            condition: Vec::new(),
            counterfactual_evidence: Some(condition),
        },
        None => CausalQuery {
            outcome,
            do_,
            condition,
            counterfactual_evidence: None,
        },
    };
    q.check()?;
    Ok(q)
}

fn fail<T>(p: &Parser, message: &str) -> Result<T, IdentifyError> {
    Ok(p.error(message)?)
}

fn query_assignment(p: &mut Parser) -> Result<Assignment, IdentifyError> {
    if let (Some(Tok::Ident(id)), next) = (p.peek().cloned(), p.peek_at(1)) {
        if next != Some(&Tok::Eq) && !is_symbol(&id) && is_valid_name(&id) {
            p.next();
            return Ok(Assignment::symbolic(&id));
        }
    }
    Ok(p.assignment()?)
}

/// An outcome item with an optional counterfactual subscript.
fn query_outcome(p: &mut Parser) -> Result<(Assignment, Option<Vec<Assignment>>), IdentifyError> {
    let id = match (p.peek().cloned(), p.peek_at(1)) {
        (Some(Tok::Ident(id)), Some(Tok::LBrace)) if id.ends_with('_') && id.len() > 1 => id,
        _ => return Ok((query_assignment(p)?, None)),
    };
    p.next();
    p.next();
    let mut sub = Vec::new();
    loop {
        sub.push(query_assignment(p)?);
        match p.next() {
            Some(Tok::Comma) => continue,
            Some(Tok::RBrace) => break,
            _ => return fail(p, "expected `,` or `}` in subscript"),
        }
    }
    let head = &id[..id.len() - 1];
    let a = if p.peek() == Some(&Tok::Eq) {
        p.next();
        if !is_valid_name(head) {
            return Err(IdentifyError::Malformed(format!("invalid variable name `{head}`")));
        }
        Assignment::new(head, p.value()?)
    } else if is_symbol(head) {
        Assignment::new(symbol_variable(head), Value::Sym(head.to_string()))
    } else {
        Assignment::symbolic(head)
    };
    Ok((a, Some(sub)))
}

// ---------------------------------------------------------------------------
// Back-door adjustment

/// Minimal back-door admissible sets for the effect of `x` on `y` with at
/// most `max_size` members, sorted by size then lexicographically.
pub fn backdoor_sets(g: &Admg, x: &str, y: &str, max_size: usize) -> Result<Vec<BTreeSet<String>>, GraphError> {
    let xi = g.require(x)?;
    let yi = g.require(y)?;
    if xi == yi {
        return Err(GraphError::OverlappingSets(x.to_string()));
    }
    let desc = g.descendants_idx(&BTreeSet::from([xi]));
    let candidates: Vec<usize> = (0..g.len()).filter(|&v| v != yi && !desc.contains(&v)).collect();
    let cut = g.without_outgoing(&BTreeSet::from([x.to_string()]));
    let (left, right) = (BTreeSet::from([xi]), BTreeSet::from([yi]));
    let mut found: Vec<BTreeSet<usize>> = Vec::new();
    for k in 0..=max_size.min(candidates.len()) {
        for combo in candidates.iter().copied().combinations(k) {
            let z: BTreeSet<usize> = combo.into_iter().collect();
            if !found.iter().any(|f| f.is_subset(&z)) && cut.d_separated_idx(&left, &right, &z) {
                found.push(z);
            }
        }
    }
    let mut out: Vec<BTreeSet<String>> = found.iter().map(|z| g.to_names(z)).collect();
    out.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
    Ok(out)
}

/// `sum_{z} P(y|x,z) * P(z)` for an admissible set `z` (or `P(y|x)` when
/// it is empty).
pub fn adjustment_estimand(x: &str, y: &str, z: &BTreeSet<String>) -> Estimand {
    let mut given = vec![Assignment::symbolic(x)];
    given.extend(z.iter().map(|v| Assignment::symbolic(v)));
    given.sort();
    let outcome = Estimand::prob(vec![Assignment::symbolic(y)], given);
    if z.is_empty() {
        return outcome;
    }
    let weight = Estimand::prob(z.iter().map(|v| Assignment::symbolic(v)).collect(), Vec::new());
    Estimand::sum_over(
        z.iter().map(|v| default_symbol(v)).collect::<Vec<_>>(),
        Estimand::product(vec![outcome, weight]),
    )
}

// ---------------------------------------------------------------------------
// Identification

/// Pair of nested c-forests certifying non-identifiability.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Hedge {
    pub f: BTreeSet<String>,
    pub f_prime: BTreeSet<String>,
}

impl fmt::Display for Hedge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "hedge F = {{{}}}, F' = {{{}}}",
            self.f.iter().join(", "),
            self.f_prime.iter().join(", ")
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum IdentifyResult {
    Identified(Estimand),
    NonIdentifiable(Hedge),
}

impl IdentifyResult {
    pub fn estimand(&self) -> Option<&Estimand> {
        match self {
            IdentifyResult::Identified(e) => Some(e),
            IdentifyResult::NonIdentifiable(_) => None,
        }
    }

    pub fn is_identified(&self) -> bool {
        matches!(self, IdentifyResult::Identified(_))
    }

    /// Display form: the simplified estimand, or `FAILURE` with the hedge.
    pub fn display(&self) -> String {
        match self {
            IdentifyResult::Identified(e) => simplify(e).render(),
            IdentifyResult::NonIdentifiable(h) => format!("FAILURE: non-identifiable ({h})"),
        }
    }
}

/// Identifies `P(outcome | do(do_), condition)` from the observational
/// distribution of any model whose latent projection is `g`. The estimand is
/// returned unsimplified.
pub fn identify(g: &Admg, q: &CausalQuery) -> Result<IdentifyResult, IdentifyError> {
    q.check()?;
    if q.counterfactual_evidence.is_some() {
        return Err(IdentifyError::CounterfactualQuery);
    }
    for v in q.variables() {
        g.require(&v)?;
    }
    if q.do_.is_empty() {
        return Ok(IdentifyResult::Identified(Estimand::prob(
            q.outcome.clone(),
            q.condition.clone(),
        )));
    }

    let mut symbols = Symbols {
        used: q.symbols(),
    };
    // Literal values are carried as placeholder symbols and substituted back.
    let mut placeholders = Vec::new();
    let mut ctx = Ctx::new();
    let mut as_symbol = |a: &Assignment, ctx: &mut Ctx| match &a.value {
        Value::Sym(s) => {
            ctx.insert(a.var.clone(), s.clone());
        }
        Value::Lit(l) => {
            let s = symbols.fresh(&a.var);
            placeholders.push((s.clone(), Value::Lit(l.clone())));
            ctx.insert(a.var.clone(), s);
        }
    };
    for a in q.outcome.iter().chain(&q.do_).chain(&q.condition) {
        as_symbol(a, &mut ctx);
    }
    let y: BTreeSet<String> = q.outcome.iter().map(|a| a.var.clone()).collect();
    let x: BTreeSet<String> = q.do_.iter().map(|a| a.var.clone()).collect();
    let z: BTreeSet<String> = q.condition.iter().map(|a| a.var.clone()).collect();
    let mut engine = Engine {
        order: g.topological_order(),
        symbols,
        placeholders: 0,
    };
    let result = match engine.idc(&y, &x, &z, g, &ctx) {
        Ok(e) => e,
        Err(h) => return Ok(IdentifyResult::NonIdentifiable(h)),
    };
    let result = placeholders
        .iter()
        .fold(result, |e, (s, v)| e.substitute_symbol(s, v));
    Ok(IdentifyResult::Identified(result))
}

/// Current value symbol of each variable in scope.
type Ctx = BTreeMap<String, String>;

struct Symbols {
    used: BTreeSet<String>,
}

impl Symbols {
    /// The variable's default symbol if unused, else `default` + 2, 3, ...
    fn fresh(&mut self, var: &str) -> String {
        let base = default_symbol(var);
        let mut candidate = base.clone();
        let mut k = 2;
        while self.used.contains(&candidate) {
            candidate = format!("{base}{k}");
            k += 1;
        }
        self.used.insert(candidate.clone());
        candidate
    }
}

/// A distribution over `vars` held by the recursion.
#[derive(Debug, Clone)]
enum Dist {
    /// Marginal of the observational distribution.
    Observed(BTreeSet<String>),
    /// A derived expression whose free values for `vars` are `vals`.
    Expr {
        expr: Estimand,
        vals: Ctx,
        vars: BTreeSet<String>,
    },
}

struct Engine {
    order: Vec<String>,
    symbols: Symbols,
    placeholders: usize,
}

impl Engine {
    fn ordered<'a>(&self, set: &'a BTreeSet<String>) -> Vec<&'a String> {
        let mut v: Vec<&String> = set.iter().collect();
        v.sort_by_key(|n| self.order.iter().position(|o| o == *n));
        v
    }

    fn term(vars: &BTreeSet<String>, ctx: &Ctx) -> Vec<Assignment> {
        vars.iter()
            .map(|v| Assignment::new(v.clone(), Value::Sym(ctx[v].clone())))
            .collect()
    }

    /// Binds each variable in `vars` to a fresh summation symbol.
    fn bind(&mut self, vars: &BTreeSet<String>, ctx: &Ctx) -> (Ctx, Vec<String>) {
        let mut inner = ctx.clone();
        let mut binders = Vec::new();
        for v in self.ordered(vars) {
            let s = self.symbols.fresh(v);
            inner.insert(v.clone(), s.clone());
            binders.push(s);
        }
        (inner, binders)
    }

    /// `sum_{vars \ keep} P` as a distribution over `keep`.
    fn marginalize(&mut self, p: &Dist, keep: &BTreeSet<String>) -> Dist {
        match p {
            Dist::Observed(_) => Dist::Observed(keep.clone()),
            Dist::Expr { expr, vals, vars } => {
                let drop: BTreeSet<String> = vars.difference(keep).cloned().collect();
                if drop.is_empty() {
                    return p.clone();
                }
                let (_, binders) = self.bind(&drop, vals);
                let mut body = expr.clone();
                for (v, b) in self.ordered(&drop).into_iter().zip(&binders) {
                    body = body.rename(v, &Value::Sym(vals[v].clone()), &Value::Sym(b.clone()));
                }
                Dist::Expr {
                    expr: Estimand::sum_over(binders, body),
                    vals: keep.iter().map(|v| (v.clone(), vals[v].clone())).collect(),
                    vars: keep.clone(),
                }
            }
        }
    }

    /// The distribution written with the symbols of `ctx`.
    fn materialize(p: &Dist, ctx: &Ctx) -> Estimand {
        match p {
            Dist::Observed(vars) => Estimand::prob(Self::term(vars, ctx), Vec::new()),
            Dist::Expr { expr, vals, vars } => vars.iter().fold(expr.clone(), |e, v| {
                if vals[v] == ctx[v] {
                    e
                } else {
                    e.rename(v, &Value::Sym(vals[v].clone()), &Value::Sym(ctx[v].clone()))
                }
            }),
        }
    }

    /// `P(target | given)` computed from `p`.
    fn conditional(&mut self, p: &Dist, target: &BTreeSet<String>, given: &BTreeSet<String>, ctx: &Ctx) -> Estimand {
        match p {
            Dist::Observed(_) => Estimand::prob(Self::term(target, ctx), Self::term(given, ctx)),
            Dist::Expr { .. } => {
                let all: BTreeSet<String> = target.union(given).cloned().collect();
                let num = self.marginalize(p, &all);
                let num = Self::materialize(&num, ctx);
                if given.is_empty() {
                    return num;
                }
                let den = self.marginalize(p, given);
                Estimand::quotient(num, Self::materialize(&den, ctx))
            }
        }
    }

    fn idc(
        &mut self,
        y: &BTreeSet<String>,
        x: &BTreeSet<String>,
        z: &BTreeSet<String>,
        g: &Admg,
        ctx: &Ctx,
    ) -> Result<Estimand, Hedge> {
        for w in z {
            let cut = g
                .without_incoming(x)
                .without_outgoing(&BTreeSet::from([w.clone()]));
            let rest: Vec<&String> = x.iter().chain(z.iter().filter(|v| *v != w)).collect();
            let ys: Vec<&String> = y.iter().collect();
            if cut.d_separated(&ys, &[w], &rest).expect("query variables are in the graph") {
                let mut x2 = x.clone();
                x2.insert(w.clone());
                let mut z2 = z.clone();
                z2.remove(w);
                return self.idc(y, &x2, &z2, g, ctx);
            }
        }
        let yz: BTreeSet<String> = y.union(z).cloned().collect();
        let joint = self.id(&yz, x, Dist::Observed(g.names().iter().cloned().collect()), g, ctx)?;
        if z.is_empty() {
            return Ok(joint);
        }
        let (_, binders) = self.bind(y, ctx);
        let mut den = joint.clone();
        for (v, b) in self.ordered(y).into_iter().zip(&binders) {
            den = den.rename(v, &Value::Sym(ctx[v].clone()), &Value::Sym(b.clone()));
        }
        Ok(Estimand::quotient(joint, Estimand::sum_over(binders, den)))
    }

    fn id(
        &mut self,
        y: &BTreeSet<String>,
        x: &BTreeSet<String>,
        p: Dist,
        g: &Admg,
        ctx: &Ctx,
    ) -> Result<Estimand, Hedge> {
        let v: BTreeSet<String> = g.names().iter().cloned().collect();

        // 1: no intervention left
        if x.is_empty() {
            let m = self.marginalize(&p, y);
            return Ok(Self::materialize(&m, ctx));
        }

        // 2: restrict to ancestors of the outcome
        let an_y = g.ancestors(y).expect("outcome in graph");
        if an_y != v {
            let p2 = self.marginalize(&p, &an_y);
            let g2 = g.induced(&an_y).expect("ancestral subgraph");
            let x2: BTreeSet<String> = x.intersection(&an_y).cloned().collect();
            return self.id(y, &x2, p2, &g2, ctx);
        }

        // 3: add non-ancestors of y in G_{bar x} to the intervention
        let an_cut = g.without_incoming(x).ancestors(y).expect("outcome in graph");
        let w: BTreeSet<String> = v
            .iter()
            .filter(|n| !x.contains(*n) && !an_cut.contains(*n))
            .cloned()
            .collect();
        if !w.is_empty() {
            // The effect does not depend on w, so any conditional over w
            // averages it out without leaving free symbols behind.
            let (inner, binders) = self.bind(&w, ctx);
            let weight = self.conditional(&p, &w, x, &inner);
            let xw: BTreeSet<String> = x.union(&w).cloned().collect();
            let effect = self.id(y, &xw, p, g, &inner)?;
            return Ok(Estimand::sum_over(binders, Estimand::product(vec![weight, effect])));
        }

        // 4: factorize over c-components of G \ X
        let rest: BTreeSet<String> = v.difference(x).cloned().collect();
        let g_rest = g.induced(&rest).expect("subgraph");
        let components = g_rest.c_components();
        if components.len() > 1 {
            let summed: BTreeSet<String> = rest.difference(y).cloned().collect();
            let (inner, binders) = self.bind(&summed, ctx);
            let mut factors = Vec::new();
            for s in &components {
                let others: BTreeSet<String> = v.difference(s).cloned().collect();
                factors.push(self.id(s, &others, p.clone(), g, &inner)?);
            }
            return Ok(Estimand::sum_over(binders, Estimand::product(factors)));
        }
        let s = components.into_iter().next().expect("nonempty");
        let whole = g.c_components();

        // 5: hedge
        if whole.len() == 1 {
            return Err(Hedge { f: v, f_prime: s });
        }

        // 6: S is a c-component of G
        if whole.contains(&s) {
            let summed: BTreeSet<String> = s.difference(y).cloned().collect();
            let (inner, binders) = self.bind(&summed, ctx);
            let factors = self.chain_factors(&p, &s, &v, &inner);
            return Ok(Estimand::sum_over(binders, Estimand::product(factors)));
        }

        // 7: S lies inside a larger c-component S'
        let s_prime = whole
            .into_iter()
            .find(|c| s.is_subset(c))
            .expect("c-component of G \\ X lies in one of G");
        // Members of S' that are still unbound only name the new
        // distribution's arguments; they are renamed when it is used.
        let mut local = ctx.clone();
        for n in s_prime.iter().filter(|n| !ctx.contains_key(*n)) {
            self.placeholders += 1;
            local.insert(n.clone(), format!("{}#{}", default_symbol(n), self.placeholders));
        }
        let factors = self.chain_factors(&p, &s_prime, &v, &local);
        let p2 = Dist::Expr {
            expr: Estimand::product(factors),
            vals: s_prime.iter().map(|n| (n.clone(), local[n].clone())).collect(),
            vars: s_prime.clone(),
        };
        let g2 = g.induced(&s_prime).expect("subgraph");
        let x2: BTreeSet<String> = x.intersection(&s_prime).cloned().collect();
        self.id(y, &x2, p2, &g2, ctx)
    }

    /// `P(v_i | v_pi^(i-1))` for each `v_i` in `members`, in topological
    /// order, predecessors taken over all of `scope`.
    fn chain_factors(&mut self, p: &Dist, members: &BTreeSet<String>, scope: &BTreeSet<String>, ctx: &Ctx) -> Vec<Estimand> {
        let ordered: Vec<String> = self.ordered(scope).into_iter().cloned().collect();
        let mut out = Vec::new();
        for (i, vi) in ordered.iter().enumerate() {
            if !members.contains(vi) {
                continue;
            }
            let preds: BTreeSet<String> = ordered[..i].iter().cloned().collect();
            out.push(self.conditional(p, &BTreeSet::from([vi.clone()]), &preds, ctx));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{eval_estimand, Binding};
    use crate::scm::random_compatible_scm;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn backdoor() -> Admg {
        Admg::from_edges(&["X", "Y", "Z"], &[("Z", "X"), ("Z", "Y"), ("X", "Y")], &[]).unwrap()
    }

    fn front_door() -> Admg {
        Admg::from_edges(&["M", "X", "Y"], &[("X", "M"), ("M", "Y")], &[("X", "Y")]).unwrap()
    }

    fn layer(s: &str) -> u8 {
        parse_query(s).unwrap().layer()
    }

    #[test]
    fn layers_of_the_hierarchy() {
        assert_eq!(layer("P(y|x)"), 1);
        assert_eq!(layer("P(y|do(x),z)"), 2);
        assert_eq!(layer("P(y_{x}|x',y')"), 3);
        assert_eq!(layer("P(Y_{X=1}=1 | X=0, Y=0)"), 3);
        assert_eq!(layer("P(Y | do(X))"), 2);
    }

    #[test]
    fn query_parsing() {
        let q = parse_query("P(Y=1 | do(X=0), Z)").unwrap();
        assert_eq!(q.outcome, vec![Assignment::literal("Y", "1")]);
        assert_eq!(q.do_, vec![Assignment::literal("X", "0")]);
        assert_eq!(q.condition, vec![Assignment::symbolic("Z")]);
        let q = parse_query("P(y_{x} | x', y')").unwrap();
        assert_eq!(q.do_, vec![Assignment::symbolic("X")]);
        assert_eq!(
            q.counterfactual_evidence.unwrap(),
            vec![
                Assignment::new("X", Value::sym("x'")),
                Assignment::new("Y", Value::sym("y'"))
            ]
        );
        assert!(parse_query("P(Y | do(Y))").is_err());
        assert!(parse_query("P(| do(X))").is_err());
        assert!(parse_query("Q(Y)").is_err());
        assert!(parse_query("P(Y | do(X)").is_err());
    }

    #[test]
    fn backdoor_examples() {
        assert_eq!(backdoor_sets(&backdoor(), "X", "Y", 3).unwrap(), vec![BTreeSet::from(["Z".to_string()])]);
        let simple = Admg::from_edges(&["X", "Y"], &[("X", "Y")], &[]).unwrap();
        assert_eq!(backdoor_sets(&simple, "X", "Y", 3).unwrap(), vec![BTreeSet::new()]);
        let med = Admg::from_edges(&["W", "X", "Y"], &[("X", "W"), ("W", "Y"), ("X", "Y")], &[]).unwrap();
        assert_eq!(backdoor_sets(&med, "X", "Y", 3).unwrap(), vec![BTreeSet::new()]);
        let bow = Admg::from_edges(&["X", "Y"], &[("X", "Y")], &[("X", "Y")]).unwrap();
        assert!(backdoor_sets(&bow, "X", "Y", 3).unwrap().is_empty());
    }

    #[test]
    fn backdoor_estimand() {
        let r = identify(&backdoor(), &parse_query("P(Y | do(X))").unwrap()).unwrap();
        assert_eq!(r.display(), "sum_{z} P(y|x,z) * P(z)");
    }

    #[test]
    fn bow_graph_fails() {
        let bow = Admg::from_edges(&["X", "Y"], &[("X", "Y")], &[("X", "Y")]).unwrap();
        let r = identify(&bow, &parse_query("P(Y | do(X))").unwrap()).unwrap();
        let IdentifyResult::NonIdentifiable(h) = r else { panic!("identified the bow graph") };
        assert_eq!(h.f, BTreeSet::from(["X".to_string(), "Y".to_string()]));
        assert_eq!(h.f_prime, BTreeSet::from(["Y".to_string()]));
    }

    #[test]
    fn front_door_estimand() {
        let r = identify(&front_door(), &parse_query("P(Y | do(X))").unwrap()).unwrap();
        assert_eq!(r.display(), "sum_{m} P(m|x) * sum_{x2} P(X=x2) * P(y|m,X=x2)");
    }

    #[test]
    fn literal_values_are_substituted() {
        let r = identify(&backdoor(), &parse_query("P(Y=1 | do(X=0))").unwrap()).unwrap();
        assert_eq!(r.display(), "sum_{z} P(Y=1|X=0,z) * P(z)");
        assert!(r.estimand().unwrap().free_symbols().is_empty());
    }

    #[test]
    fn layer_three_is_rejected() {
        let q = parse_query("P(y_{x} | x', y')").unwrap();
        assert_eq!(identify(&backdoor(), &q).unwrap_err(), IdentifyError::CounterfactualQuery);
    }

    fn check_sound(g: &Admg, q: &CausalQuery, seed: u64) {
        let r = identify(g, q).unwrap();
        let Some(e) = r.estimand() else { return };
        e.validate().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = random_compatible_scm(g, &mut rng);
        let obs = m.observational_joint().unwrap();
        let vars: Vec<&Assignment> = q.outcome.iter().chain(&q.do_).chain(&q.condition).collect();
        for bits in 0..1usize << vars.len() {
            let val = |k: usize| ((bits >> k) & 1).to_string();
            let mut binding = Binding::new();
            for (k, a) in vars.iter().enumerate() {
                binding.insert(a.value.as_sym().unwrap().to_string(), val(k));
            }
            let got = eval_estimand(e, &obs, &binding).unwrap();
            let n_out = q.outcome.len();
            let n_do = q.do_.len();
            let dov: Vec<(String, String)> =
                (0..n_do).map(|k| (q.do_[k].var.clone(), val(n_out + k))).collect();
            let int = m.interventional_joint(&dov).unwrap();
            let cond: Vec<(String, String)> = (0..q.condition.len())
                .map(|k| (q.condition[k].var.clone(), val(n_out + n_do + k)))
                .collect();
            let mut event: Vec<(String, String)> =
                (0..n_out).map(|k| (q.outcome[k].var.clone(), val(k))).collect();
            event.extend(cond.iter().cloned());
            let want = int.prob_of(&as_refs(&event)).unwrap() / int.prob_of(&as_refs(&cond)).unwrap();
            assert!((got - want).abs() < 1e-9, "{g}\n{q}: {} gave {got}, want {want}", r.display());
        }
    }

    fn as_refs(v: &[(String, String)]) -> Vec<(&str, &str)> {
        v.iter().map(|(a, b)| (a.as_str(), b.as_str())).collect()
    }

    #[test]
    fn known_estimands_are_sound() {
        check_sound(&backdoor(), &CausalQuery::interventional(&["Y"], &["X"]), 1);
        check_sound(&front_door(), &CausalQuery::interventional(&["Y"], &["X"]), 2);
        let chain = Admg::from_edges(&["W", "X", "Y"], &[("W", "X"), ("X", "Y")], &[]).unwrap();
        check_sound(&chain, &CausalQuery::interventional(&["Y"], &["X"]), 3);
        check_sound(&backdoor(), &CausalQuery::interventional(&["Y"], &["X"]).with_condition(&["Z"]), 4);
        // napkin graph
        let napkin = Admg::from_edges(
            &["R", "W", "X", "Y"],
            &[("W", "R"), ("R", "X"), ("X", "Y")],
            &[("W", "X"), ("W", "Y")],
        )
        .unwrap();
        let r = identify(&napkin, &CausalQuery::interventional(&["Y"], &["X"])).unwrap();
        assert!(r.is_identified());
        check_sound(&napkin, &CausalQuery::interventional(&["Y"], &["X"]), 5);
    }

    #[test]
    fn random_graphs_are_sound() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for seed in 0..150 {
            let g = crate::graph::random_admg(5, 0.4, 0.25, &mut rng);
            let q = CausalQuery::interventional(&["V4"], &["V0"]);
            check_sound(&g, &q, seed);
            let q = CausalQuery::interventional(&["V3", "V4"], &["V0", "V1"]);
            check_sound(&g, &q, seed);
            let q = CausalQuery::interventional(&["V4"], &["V0"]).with_condition(&["V2"]);
            check_sound(&g, &q, seed);
        }
    }

    #[test]
    fn backdoor_agrees_with_identify() {
        let g = backdoor();
        let z = &backdoor_sets(&g, "X", "Y", 2).unwrap()[0];
        let adj = adjustment_estimand("X", "Y", z);
        let r = identify(&g, &CausalQuery::interventional(&["Y"], &["X"])).unwrap();
        assert_eq!(simplify(r.estimand().unwrap()), simplify(&adj));
    }
}
