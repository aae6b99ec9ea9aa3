//! Discrete structural causal models.
//!
//! All randomness lives in the exogenous variables; every endogenous
//! variable is a deterministic, total lookup table over its parents. That
//! makes observational, interventional and counterfactual quantities exact
//! sums over exogenous states.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use itertools::Itertools;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::estimate::{sort_domain, Dataset};
use crate::expr::{ExprError, JointTable};
use crate::graph::{is_valid_name, Admg, GraphError};

/// Default cap on enumerated joint states.
pub const DEFAULT_STATE_CAP: usize = 10_000_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScmError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("duplicate variable `{0}`")]
    DuplicateVariable(String),
    #[error("invalid variable name `{0}`")]
    InvalidName(String),
    #[error("value `{value}` is outside the domain of `{var}`")]
    ValueOutsideDomain { var: String, value: String },
    #[error("`{0}` is exogenous; only endogenous variables can be intervened on or observed")]
    NotEndogenous(String),
    #[error("exogenous distribution of `{0}` is invalid")]
    InvalidDistribution(String),
    #[error("structural table of `{var}` is not total: {detail}")]
    IncompleteTable { var: String, detail: String },
    #[error("structural dependencies are cyclic")]
    Cycle,
    #[error("state space of {states} joint states exceeds the cap of {cap}")]
    StateSpaceOverflow { states: usize, cap: usize },
    #[error("evidence has probability zero; the counterfactual is undefined")]
    ZeroEvidence,
    #[error(transparent)]
    Table(#[from] ExprError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExogenousVar {
    pub name: String,
    pub domain: Vec<String>,
    pub probs: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ParentRef {
    Exogenous(usize),
    Endogenous(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct EndogenousVar {
    pub name: String,
    pub domain: Vec<String>,
    pub parents: Vec<ParentRef>,
    /// Output value index per parent configuration, mixed radix with the
    /// first parent most significant.
    pub table: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteScm {
    exogenous: Vec<ExogenousVar>,
    endogenous: Vec<EndogenousVar>,
    order: Vec<usize>,
    state_cap: usize,
}

/// A set of `variable = value` pairs, by name.
pub type Assignments = Vec<(String, String)>;

/// Helper turning `&[(&str, &str)]` into owned [`Assignments`].
pub fn assignments(pairs: &[(&str, &str)]) -> Assignments {
    pairs.iter().map(|(a, b)| (a.to_string(), b.to_string())).collect()
}

impl DiscreteScm {
    pub fn new(exogenous: Vec<ExogenousVar>, endogenous: Vec<EndogenousVar>) -> Result<Self, ScmError> {
        let mut names = BTreeSet::new();
        for name in exogenous.iter().map(|e| &e.name).chain(endogenous.iter().map(|e| &e.name)) {
            if !is_valid_name(name) {
                return Err(ScmError::InvalidName(name.clone()));
            }
            if !names.insert(name.clone()) {
                return Err(ScmError::DuplicateVariable(name.clone()));
            }
        }
        for e in &exogenous {
            let total: f64 = e.probs.iter().sum();
            if e.domain.is_empty()
                || e.domain.len() != e.probs.len()
                || e.probs.iter().any(|p| !(*p >= 0.0))
                || (total - 1.0).abs() > 1e-12
            {
                return Err(ScmError::InvalidDistribution(e.name.clone()));
            }
        }
        for v in &endogenous {
            if v.domain.is_empty() {
                return Err(ScmError::IncompleteTable {
                    var: v.name.clone(),
                    detail: "empty domain".into(),
                });
            }
            let mut expected = 1usize;
            for p in &v.parents {
                let size = match *p {
                    ParentRef::Exogenous(i) => exogenous.get(i).map(|e| e.domain.len()),
                    ParentRef::Endogenous(i) => endogenous.get(i).map(|e| e.domain.len()),
                }
                .ok_or_else(|| ScmError::IncompleteTable {
                    var: v.name.clone(),
                    detail: "parent index out of range".into(),
                })?;
                expected = expected.saturating_mul(size);
            }
            if v.table.len() != expected {
                return Err(ScmError::IncompleteTable {
                    var: v.name.clone(),
                    detail: format!("{} rows for {expected} parent configurations", v.table.len()),
                });
            }
            if v.table.iter().any(|&x| x >= v.domain.len()) {
                return Err(ScmError::IncompleteTable {
                    var: v.name.clone(),
                    detail: "output outside domain".into(),
                });
            }
        }
        let order = endogenous_order(&endogenous).ok_or(ScmError::Cycle)?;
        Ok(DiscreteScm {
            exogenous,
            endogenous,
            order,
            state_cap: DEFAULT_STATE_CAP,
        })
    }

    pub fn with_state_cap(mut self, cap: usize) -> Self {
        self.state_cap = cap;
        self
    }

    pub fn state_cap(&self) -> usize {
        self.state_cap
    }

    pub fn exogenous(&self) -> &[ExogenousVar] {
        &self.exogenous
    }

    pub fn endogenous(&self) -> &[EndogenousVar] {
        &self.endogenous
    }

    /// Endogenous indices in a topological order.
    pub fn order(&self) -> &[usize] {
        &self.order
    }

    pub fn endogenous_names(&self) -> Vec<String> {
        self.endogenous.iter().map(|v| v.name.clone()).collect()
    }

    pub fn endogenous_index(&self, name: &str) -> Option<usize> {
        self.endogenous.iter().position(|v| v.name == name)
    }

    pub fn domain(&self, name: &str) -> Option<&[String]> {
        self.endogenous_index(name)
            .map(|i| self.endogenous[i].domain.as_slice())
    }

    fn require_endogenous(&self, name: &str) -> Result<usize, ScmError> {
        match self.endogenous_index(name) {
            Some(i) => Ok(i),
            None if self.exogenous.iter().any(|e| e.name == name) => {
                Err(ScmError::NotEndogenous(name.to_string()))
            }
            None => Err(ScmError::UnknownVariable(name.to_string())),
        }
    }

    /// Resolves `(name, value)` pairs to `(endogenous index, value index)`.
    pub fn resolve(&self, pairs: &[(String, String)]) -> Result<Vec<(usize, usize)>, ScmError> {
        pairs
            .iter()
            .map(|(var, value)| {
                let i = self.require_endogenous(var)?;
                let x = self.endogenous[i]
                    .domain
                    .iter()
                    .position(|d| d == value)
                    .ok_or_else(|| ScmError::ValueOutsideDomain {
                        var: var.clone(),
                        value: value.clone(),
                    })?;
                Ok((i, x))
            })
            .collect()
    }

    /// Resolved intervention vector (last assignment of a variable wins).
    pub fn do_vector(&self, intervention: &[(String, String)]) -> Result<Vec<Option<usize>>, ScmError> {
        let mut v = vec![None; self.endogenous.len()];
        for (i, x) in self.resolve(intervention)? {
            v[i] = Some(x);
        }
        Ok(v)
    }

    pub fn exogenous_state_count(&self) -> Result<usize, ScmError> {
        let mut states: usize = 1;
        for e in &self.exogenous {
            states = states.saturating_mul(e.domain.len());
        }
        if states > self.state_cap {
            return Err(ScmError::StateSpaceOverflow {
                states,
                cap: self.state_cap,
            });
        }
        Ok(states)
    }

    /// Every exogenous assignment with its probability, in mixed-radix order
    /// (last exogenous variable fastest). Zero-probability states included.
    pub fn exogenous_states(&self) -> Result<Vec<(Vec<usize>, f64)>, ScmError> {
        let count = self.exogenous_state_count()?;
        let mut out = Vec::with_capacity(count);
        let mut state = vec![0usize; self.exogenous.len()];
        for _ in 0..count {
            let p = state
                .iter()
                .zip(&self.exogenous)
                .map(|(&x, e)| e.probs[x])
                .product();
            out.push((state.clone(), p));
            for k in (0..state.len()).rev() {
                state[k] += 1;
                if state[k] < self.exogenous[k].domain.len() {
                    break;
                }
                state[k] = 0;
            }
        }
        Ok(out)
    }

    /// Endogenous values determined by an exogenous state, with
    /// `intervention[i] = Some(x)` overriding variable `i`.
    pub fn solve(&self, exo: &[usize], intervention: &[Option<usize>]) -> Vec<usize> {
        let mut values = vec![0usize; self.endogenous.len()];
        for &i in &self.order {
            if let Some(Some(x)) = intervention.get(i) {
                values[i] = *x;
                continue;
            }
            let v = &self.endogenous[i];
            let mut row = 0;
            for p in &v.parents {
                let (size, value) = match *p {
                    ParentRef::Exogenous(k) => (self.exogenous[k].domain.len(), exo[k]),
                    ParentRef::Endogenous(k) => (self.endogenous[k].domain.len(), values[k]),
                };
                row = row * size + value;
            }
            values[i] = v.table[row];
        }
        values
    }

    fn endogenous_cells(&self) -> Result<usize, ScmError> {
        let mut cells: usize = 1;
        for v in &self.endogenous {
            cells = cells.saturating_mul(v.domain.len());
        }
        if cells > self.state_cap {
            return Err(ScmError::StateSpaceOverflow {
                states: cells,
                cap: self.state_cap,
            });
        }
        Ok(cells)
    }

    fn table_over_endogenous(&self, intervention: &[Option<usize>]) -> Result<JointTable, ScmError> {
        let cells = self.endogenous_cells()?;
        let mut mass = vec![0.0; cells];
        for (u, p) in self.exogenous_states()? {
            if p == 0.0 {
                continue;
            }
            let values = self.solve(&u, intervention);
            let mut cell = 0;
            for (v, x) in self.endogenous.iter().zip(&values) {
                cell = cell * v.domain.len() + x;
            }
            mass[cell] += p;
        }
        Ok(JointTable::new(
            self.endogenous_names(),
            self.endogenous.iter().map(|v| v.domain.clone()).collect(),
            mass,
        )?)
    }

    /// Distribution of the endogenous variables (declaration order).
    pub fn observational_joint(&self) -> Result<JointTable, ScmError> {
        self.table_over_endogenous(&vec![None; self.endogenous.len()])
    }

    /// Distribution of the endogenous variables under `do(intervention)`.
    pub fn interventional_joint(&self, intervention: &[(String, String)]) -> Result<JointTable, ScmError> {
        self.table_over_endogenous(&self.do_vector(intervention)?)
    }

    /// Graph surgery: each intervened variable becomes a parentless
    /// constant. Domains are kept.
    pub fn intervene(&self, intervention: &[(String, String)]) -> Result<DiscreteScm, ScmError> {
        let dv = self.do_vector(intervention)?;
        let mut out = self.clone();
        for (i, x) in dv.iter().enumerate() {
            if let Some(x) = x {
                out.endogenous[i].parents.clear();
                out.endogenous[i].table = vec![*x];
            }
        }
        out.order = endogenous_order(&out.endogenous).expect("surgery cannot add cycles");
        Ok(out)
    }

    /// Abduction: posterior over exogenous states given factual evidence.
    pub fn abduct(&self, evidence: &[(String, String)]) -> Result<Posterior, ScmError> {
        let ev = self.resolve(evidence)?;
        let none = vec![None; self.endogenous.len()];
        let mut states = Vec::new();
        let mut total = 0.0;
        for (u, p) in self.exogenous_states()? {
            if p == 0.0 {
                continue;
            }
            let values = self.solve(&u, &none);
            if ev.iter().all(|&(i, x)| values[i] == x) {
                total += p;
                states.push((u, p));
            }
        }
        if total <= 0.0 {
            return Err(ScmError::ZeroEvidence);
        }
        for s in &mut states {
            s.1 /= total;
        }
        Ok(Posterior {
            states,
            evidence_probability: total,
        })
    }

    /// `P(target_{antecedent} | evidence)` by abduction, action and
    /// prediction.
    pub fn counterfactual_query(&self, q: &CounterfactualQuery) -> Result<f64, ScmError> {
        self.joint_counterfactual(
            &[World {
                antecedent: q.antecedent.clone(),
                target: q.target.clone(),
            }],
            &q.evidence,
        )
    }

    /// Probability that every world's target holds in its own surgered
    /// model, sharing one exogenous posterior.
    pub fn joint_counterfactual(&self, worlds: &[World], evidence: &[(String, String)]) -> Result<f64, ScmError> {
        let posterior = self.abduct(evidence)?;
        let acted = worlds
            .iter()
            .map(|w| Ok((self.intervene(&w.antecedent)?, self.resolve(&w.target)?)))
            .collect::<Result<Vec<_>, ScmError>>()?;
        let none = vec![None; self.endogenous.len()];
        let mut prob = 0.0;
        for (u, w) in &posterior.states {
            let holds = acted.iter().all(|(model, target)| {
                let values = model.solve(u, &none);
                target.iter().all(|&(i, x)| values[i] == x)
            });
            if holds {
                prob += w;
            }
        }
        Ok(prob)
    }

    /// I.i.d. ancestral samples of the endogenous variables. Identical
    /// `(seed, n)` give identical datasets.
    pub fn sample(&self, n: usize, seed: u64) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let none = vec![None; self.endogenous.len()];
        let cumulative: Vec<Vec<f64>> = self
            .exogenous
            .iter()
            .map(|e| {
                e.probs
                    .iter()
                    .scan(0.0, |acc, p| {
                        *acc += p;
                        Some(*acc)
                    })
                    .collect()
            })
            .collect();
        let mut rows = Vec::with_capacity(n);
        let mut u = vec![0usize; self.exogenous.len()];
        for _ in 0..n {
            for (k, cum) in cumulative.iter().enumerate() {
                let r: f64 = rng.gen();
                u[k] = cum.iter().position(|&c| r < c).unwrap_or(cum.len() - 1);
            }
            rows.push(self.solve(&u, &none).into_iter().map(Some).collect());
        }
        Dataset::new(
            self.endogenous_names(),
            self.endogenous.iter().map(|v| v.domain.clone()).collect(),
            rows,
        )
        .expect("samples lie in the model's domains")
    }

    /// Latent projection onto the endogenous variables: directed edges for
    /// endogenous parent links, bidirected edges between endogenous children
    /// of a shared exogenous variable.
    pub fn latent_projection(&self) -> Admg {
        let mut directed = Vec::new();
        let mut exo_children: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); self.exogenous.len()];
        for (i, v) in self.endogenous.iter().enumerate() {
            for p in &v.parents {
                match *p {
                    ParentRef::Endogenous(k) => {
                        directed.push((self.endogenous[k].name.clone(), v.name.clone()))
                    }
                    ParentRef::Exogenous(k) => {
                        exo_children[k].insert(i);
                    }
                }
            }
        }
        let mut bidirected = Vec::new();
        for kids in exo_children.iter().filter(|k| k.len() >= 2) {
            for (a, b) in kids.iter().tuple_combinations() {
                bidirected.push((self.endogenous[*a].name.clone(), self.endogenous[*b].name.clone()));
            }
        }
        Admg::new(self.endogenous.iter().map(|v| &v.name), directed, bidirected)
            .expect("acyclic model projects to an acyclic graph")
    }

    /// Serializes in the line-based model format.
    pub fn to_text(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for DiscreteScm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for e in &self.exogenous {
            let entries = e
                .domain
                .iter()
                .zip(&e.probs)
                .map(|(v, p)| format!("{v}: {p}"))
                .join(", ");
            writeln!(f, "exo {} {{{entries}}}", e.name)?;
        }
        for &i in &self.order {
            let v = &self.endogenous[i];
            let parent_domains: Vec<&[String]> = v.parents.iter().map(|p| self.parent_domain(*p)).collect();
            let parent_names = v.parents.iter().map(|p| self.parent_name(*p)).join(",");
            let rows = parent_domains
                .iter()
                .map(|d| d.iter())
                .multi_cartesian_product()
                .zip(&v.table)
                .map(|(cfg, out)| format!("({}) -> {}", cfg.iter().join(","), v.domain[*out]))
                .collect::<Vec<_>>();
            let rows = if v.parents.is_empty() {
                format!("() -> {}", v.domain[v.table[0]])
            } else {
                rows.join(", ")
            };
            writeln!(f, "endo {} ({parent_names}) {{{rows}}}", v.name)?;
        }
        Ok(())
    }
}

impl DiscreteScm {
    fn parent_domain(&self, p: ParentRef) -> &[String] {
        match p {
            ParentRef::Exogenous(k) => &self.exogenous[k].domain,
            ParentRef::Endogenous(k) => &self.endogenous[k].domain,
        }
    }

    fn parent_name(&self, p: ParentRef) -> &str {
        match p {
            ParentRef::Exogenous(k) => &self.exogenous[k].name,
            ParentRef::Endogenous(k) => &self.endogenous[k].name,
        }
    }
}

fn endogenous_order(endogenous: &[EndogenousVar]) -> Option<Vec<usize>> {
    let n = endogenous.len();
    let mut indegree = vec![0usize; n];
    let mut children: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (i, v) in endogenous.iter().enumerate() {
        for p in &v.parents {
            if let ParentRef::Endogenous(k) = *p {
                if k >= n {
                    return None;
                }
                indegree[i] += 1;
                children[k].push(i);
            }
        }
    }
    let mut ready: BTreeSet<usize> = (0..n).filter(|&i| indegree[i] == 0).collect();
    let mut order = Vec::with_capacity(n);
    while let Some(&i) = ready.iter().next() {
        ready.remove(&i);
        order.push(i);
        for &c in &children[i] {
            indegree[c] -= 1;
            if indegree[c] == 0 {
                ready.insert(c);
            }
        }
    }
    (order.len() == n).then_some(order)
}

/// Exogenous posterior produced by abduction.
#[derive(Debug, Clone, PartialEq)]
pub struct Posterior {
    /// `(exogenous state, posterior weight)` for states consistent with the evidence.
    pub states: Vec<(Vec<usize>, f64)>,
    pub evidence_probability: f64,
}

/// One hypothetical world: targets evaluated under `do(antecedent)`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct World {
    pub antecedent: Assignments,
    pub target: Assignments,
}

/// `P(target_{antecedent} | evidence)`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CounterfactualQuery {
    pub target: Assignments,
    pub antecedent: Assignments,
    pub evidence: Assignments,
}

impl CounterfactualQuery {
    /// Parses `P(Y_{X=1}=1 | X=0, Y=0)`; the subscript may be omitted for an
    /// observational target.
    pub fn parse(text: &str) -> Result<Self, ScmError> {
        let bad = |m: &str| ScmError::Parse {
            line: 1,
            message: m.to_string(),
        };
        let t = text.trim();
        let inner = t
            .strip_prefix("P(")
            .and_then(|s| s.strip_suffix(')'))
            .ok_or_else(|| bad("expected `P( ... )`"))?;
        let (head, evidence) = match split_top_level(inner, '|').as_slice() {
            [h] => (h.to_string(), String::new()),
            [h, e] => (h.to_string(), e.to_string()),
            _ => return Err(bad("more than one `|`")),
        };
        let mut q = CounterfactualQuery::default();
        let mut antecedent: Option<Assignments> = None;
        for item in split_top_level(&head, ',') {
            let item = item.trim();
            let (lhs, value) = item
                .rsplit_once('=')
                .filter(|(l, _)| !l.ends_with('}') || item.contains("}="))
                .ok_or_else(|| bad(&format!("target `{item}` needs a value")))?;
            let (var, sub) = match lhs.split_once("_{") {
                Some((v, rest)) => {
                    let body = rest
                        .strip_suffix('}')
                        .ok_or_else(|| bad(&format!("unterminated subscript in `{item}`")))?;
                    (v.trim(), parse_pairs(body).map_err(|m| bad(&m))?)
                }
                None => (lhs.trim(), Vec::new()),
            };
            match &antecedent {
                None => antecedent = Some(sub),
                Some(prev) if *prev == sub => {}
                Some(_) => return Err(bad("all targets must share one antecedent")),
            }
            q.target.push((var.to_string(), value.trim().to_string()));
        }
        q.antecedent = antecedent.unwrap_or_default();
        if !evidence.trim().is_empty() {
            q.evidence = parse_pairs(&evidence).map_err(|m| bad(&m))?;
        }
        Ok(q)
    }
}

fn split_top_level(s: &str, sep: char) -> Vec<String> {
    let mut out = Vec::new();
    let mut depth = 0i32;
    let mut cur = String::new();
    for c in s.chars() {
        match c {
            '{' | '(' => depth += 1,
            '}' | ')' => depth -= 1,
            _ => {}
        }
        if c == sep && depth == 0 {
            out.push(std::mem::take(&mut cur));
        } else {
            cur.push(c);
        }
    }
    out.push(cur);
    out
}

fn parse_pairs(s: &str) -> Result<Assignments, String> {
    s.split(',')
        .map(|item| {
            let (a, b) = item
                .split_once('=')
                .ok_or_else(|| format!("expected VAR=VALUE, found `{}`", item.trim()))?;
            let (a, b) = (a.trim(), b.trim());
            if !is_valid_name(a) || b.is_empty() {
                return Err(format!("expected VAR=VALUE, found `{}`", item.trim()));
            }
            Ok((a.to_string(), b.to_string()))
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Builder

type TableFn = Box<dyn Fn(&[&str]) -> String>;

struct PendingEndo {
    name: String,
    domain: Vec<String>,
    parents: Vec<String>,
    f: TableFn,
}

/// Incremental construction with closures; parents must be declared before
/// their children.
#[derive(Default)]
pub struct ScmBuilder {
    exogenous: Vec<ExogenousVar>,
    endogenous: Vec<PendingEndo>,
}

impl ScmBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn exogenous(mut self, name: &str, dist: &[(&str, f64)]) -> Self {
        self.exogenous.push(ExogenousVar {
            name: name.to_string(),
            domain: dist.iter().map(|(v, _)| v.to_string()).collect(),
            probs: dist.iter().map(|(_, p)| *p).collect(),
        });
        self
    }

    /// Binary exogenous variable with `P(name = 1) = p`.
    pub fn bernoulli(self, name: &str, p: f64) -> Self {
        self.exogenous(name, &[("0", 1.0 - p), ("1", p)])
    }

    /// Endogenous variable computed by `f` from its parents' values. An
    /// empty `domain` is inferred from the outputs.
    pub fn endogenous<F>(mut self, name: &str, domain: &[&str], parents: &[&str], f: F) -> Self
    where
        F: Fn(&[&str]) -> String + 'static,
    {
        self.endogenous.push(PendingEndo {
            name: name.to_string(),
            domain: domain.iter().map(|s| s.to_string()).collect(),
            parents: parents.iter().map(|s| s.to_string()).collect(),
            f: Box::new(f),
        });
        self
    }

    pub fn build(self) -> Result<DiscreteScm, ScmError> {
        let exo_index: HashMap<String, usize> = self
            .exogenous
            .iter()
            .enumerate()
            .map(|(i, e)| (e.name.clone(), i))
            .collect();
        let mut endo: Vec<EndogenousVar> = Vec::new();
        for pending in self.endogenous {
            let parents = pending
                .parents
                .iter()
                .map(|p| {
                    if let Some(&k) = exo_index.get(p) {
                        Ok(ParentRef::Exogenous(k))
                    } else if let Some(k) = endo.iter().position(|e| &e.name == p) {
                        Ok(ParentRef::Endogenous(k))
                    } else {
                        Err(ScmError::UnknownVariable(p.clone()))
                    }
                })
                .collect::<Result<Vec<_>, _>>()?;
            let domains: Vec<Vec<String>> = parents
                .iter()
                .map(|p| match *p {
                    ParentRef::Exogenous(k) => self.exogenous[k].domain.clone(),
                    ParentRef::Endogenous(k) => endo[k].domain.clone(),
                })
                .collect();
            let outputs: Vec<String> = if domains.is_empty() {
                vec![(pending.f)(&[])]
            } else {
                domains
                    .iter()
                    .map(|d| d.iter())
                    .multi_cartesian_product()
                    .map(|cfg| {
                        let cfg: Vec<&str> = cfg.iter().map(|s| s.as_str()).collect();
                        (pending.f)(&cfg)
                    })
                    .collect()
            };
            let domain = if pending.domain.is_empty() {
                let mut d: Vec<String> = outputs.iter().cloned().collect::<BTreeSet<_>>().into_iter().collect();
                sort_domain(&mut d);
                d
            } else {
                pending.domain.clone()
            };
            let table = outputs
                .iter()
                .map(|o| {
                    domain.iter().position(|d| d == o).ok_or_else(|| ScmError::ValueOutsideDomain {
                        var: pending.name.clone(),
                        value: o.clone(),
                    })
                })
                .collect::<Result<Vec<_>, _>>()?;
            endo.push(EndogenousVar {
                name: pending.name,
                domain,
                parents,
                table,
            });
        }
        DiscreteScm::new(self.exogenous, endo)
    }
}

// ---------------------------------------------------------------------------
// Text format

/// Parses the model format:
///
/// ```text
/// exo U {0: 0.5, 1: 0.5}
/// endo X (U) {(0) -> 0, (1) -> 1}
/// endo C () {() -> 1}
/// ```
///
/// Endogenous domains are the sorted union of a variable's outputs and the
/// values its children's tables mention for it.
pub fn parse_scm(text: &str) -> Result<DiscreteScm, ScmError> {
    struct RawEndo {
        line: usize,
        name: String,
        parents: Vec<String>,
        rows: Vec<(Vec<String>, String)>,
    }
    let mut exogenous = Vec::new();
    let mut raw = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line_no = lineno + 1;
        let content = line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let err = |m: String| ScmError::Parse {
            line: line_no,
            message: m,
        };
        let (kw, rest) = content
            .split_once(char::is_whitespace)
            .ok_or_else(|| err(format!("expected `exo` or `endo`, found `{content}`")))?;
        let rest = rest.trim();
        match kw {
            "exo" => {
                let (name, body) = rest
                    .split_once('{')
                    .ok_or_else(|| err("expected `{` after the exogenous name".into()))?;
                let body = body
                    .trim()
                    .strip_suffix('}')
                    .ok_or_else(|| err("expected closing `}`".into()))?;
                let mut domain = Vec::new();
                let mut probs = Vec::new();
                for entry in body.split(',').filter(|s| !s.trim().is_empty()) {
                    let (v, p) = entry
                        .split_once(':')
                        .ok_or_else(|| err(format!("expected `value: probability`, found `{}`", entry.trim())))?;
                    let p: f64 = p
                        .trim()
                        .parse()
                        .map_err(|_| err(format!("invalid probability `{}`", p.trim())))?;
                    domain.push(v.trim().to_string());
                    probs.push(p);
                }
                exogenous.push(ExogenousVar {
                    name: name.trim().to_string(),
                    domain,
                    probs,
                });
            }
            "endo" => {
                let open = rest.find('(').ok_or_else(|| err("expected `(` parent list".into()))?;
                let close = rest[open..]
                    .find(')')
                    .map(|c| c + open)
                    .ok_or_else(|| err("unterminated parent list".into()))?;
                let name = rest[..open].trim().to_string();
                let parents: Vec<String> = rest[open + 1..close]
                    .split(',')
                    .map(|s| s.trim().to_string())
                    .filter(|s| !s.is_empty())
                    .collect();
                let body = rest[close + 1..].trim();
                let body = body
                    .strip_prefix('{')
                    .and_then(|b| b.strip_suffix('}'))
                    .ok_or_else(|| err("expected `{ rows }` table".into()))?;
                let mut rows = Vec::new();
                let mut remaining = body.trim();
                while !remaining.is_empty() {
                    let r = remaining
                        .strip_prefix('(')
                        .ok_or_else(|| err(format!("expected `(` at `{remaining}`")))?;
                    let end = r.find(')').ok_or_else(|| err("unterminated row".into()))?;
                    let cfg: Vec<String> = r[..end]
                        .split(',')
                        .map(|s| s.trim().to_string())
                        .filter(|s| !s.is_empty())
                        .collect();
                    let after = r[end + 1..].trim_start();
                    let after = after
                        .strip_prefix("->")
                        .ok_or_else(|| err("expected `->` in row".into()))?;
                    let (out, tail) = match after.find(',') {
                        Some(c) => (&after[..c], &after[c + 1..]),
                        None => (after, ""),
                    };
                    if cfg.len() != parents.len() {
                        return Err(err(format!(
                            "row ({}) has {} values for {} parents",
                            cfg.join(","),
                            cfg.len(),
                            parents.len()
                        )));
                    }
                    rows.push((cfg, out.trim().to_string()));
                    remaining = tail.trim();
                }
                raw.push(RawEndo {
                    line: line_no,
                    name,
                    parents,
                    rows,
                });
            }
            other => return Err(err(format!("unknown declaration `{other}`"))),
        }
    }

    let exo_index: HashMap<&str, usize> = exogenous
        .iter()
        .enumerate()
        .map(|(i, e)| (e.name.as_str(), i))
        .collect();
    let endo_index: HashMap<&str, usize> = raw
        .iter()
        .enumerate()
        .map(|(i, e)| (e.name.as_str(), i))
        .collect();
    let mut domains: Vec<BTreeSet<String>> = raw
        .iter()
        .map(|e| e.rows.iter().map(|(_, o)| o.clone()).collect())
        .collect();
    for e in &raw {
        for (k, p) in e.parents.iter().enumerate() {
            if let Some(&pi) = endo_index.get(p.as_str()) {
                for (cfg, _) in &e.rows {
                    domains[pi].insert(cfg[k].clone());
                }
            } else if !exo_index.contains_key(p.as_str()) {
                return Err(ScmError::Parse {
                    line: e.line,
                    message: format!("unknown parent `{p}`"),
                });
            }
        }
    }
    let domains: Vec<Vec<String>> = domains
        .into_iter()
        .map(|d| {
            let mut d: Vec<String> = d.into_iter().collect();
            sort_domain(&mut d);
            d
        })
        .collect();
    let mut endogenous = Vec::new();
    for (i, e) in raw.iter().enumerate() {
        let parents: Vec<ParentRef> = e
            .parents
            .iter()
            .map(|p| match endo_index.get(p.as_str()) {
                Some(&k) => ParentRef::Endogenous(k),
                None => ParentRef::Exogenous(exo_index[p.as_str()]),
            })
            .collect();
        let pdoms: Vec<&[String]> = parents
            .iter()
            .map(|p| match *p {
                ParentRef::Endogenous(k) => domains[k].as_slice(),
                ParentRef::Exogenous(k) => exogenous[k].domain.as_slice(),
            })
            .collect();
        let mut rows: BTreeMap<usize, usize> = BTreeMap::new();
        for (cfg, out) in &e.rows {
            let mut idx = 0;
            for (k, v) in cfg.iter().enumerate() {
                let x = pdoms[k].iter().position(|d| d == v).ok_or_else(|| ScmError::Parse {
                    line: e.line,
                    message: format!("value `{v}` is not in the domain of parent `{}`", e.parents[k]),
                })?;
                idx = idx * pdoms[k].len() + x;
            }
            let o = domains[i].iter().position(|d| d == out).unwrap();
            if rows.insert(idx, o).is_some_and(|prev| prev != o) {
                return Err(ScmError::Parse {
                    line: e.line,
                    message: format!("conflicting rows for ({})", cfg.join(",")),
                });
            }
        }
        let expected: usize = pdoms.iter().map(|d| d.len()).product();
        if rows.len() != expected {
            return Err(ScmError::IncompleteTable {
                var: e.name.clone(),
                detail: format!("{} of {expected} parent configurations covered", rows.len()),
            });
        }
        endogenous.push(EndogenousVar {
            name: e.name.clone(),
            domain: domains[i].clone(),
            parents,
            table: rows.into_values().collect(),
        });
    }
    DiscreteScm::new(exogenous, endogenous)
}

impl std::str::FromStr for DiscreteScm {
    type Err = ScmError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_scm(s)
    }
}

// ---------------------------------------------------------------------------
// Random models

/// Random binary model whose latent projection is exactly `g`: one private
/// noise term per variable, one shared binary exogenous per bidirected edge,
/// and each structural table a random function of the graph parents and
/// shared terms, XORed with the private noise. Every conditional is
/// therefore strictly positive.
pub fn random_compatible_scm<R: Rng + ?Sized>(g: &Admg, rng: &mut R) -> DiscreteScm {
    let bin = || vec!["0".to_string(), "1".to_string()];
    let mut exogenous = Vec::new();
    let n = g.len();
    for i in 0..n {
        let p = rng.gen_range(0.1..0.9);
        exogenous.push(ExogenousVar {
            name: format!("U_{}", g.name(i)),
            domain: bin(),
            probs: vec![1.0 - p, p],
        });
    }
    let mut shared: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (a, b) in g.bidirected_edges() {
        let p = rng.gen_range(0.1..0.9);
        let k = exogenous.len();
        exogenous.push(ExogenousVar {
            name: format!("U_{a}_{b}"),
            domain: bin(),
            probs: vec![1.0 - p, p],
        });
        shared[g.index_of(&a).unwrap()].push(k);
        shared[g.index_of(&b).unwrap()].push(k);
    }
    let endogenous = (0..n)
        .map(|i| {
            let mut parents: Vec<ParentRef> = g
                .parents_of(i)
                .iter()
                .map(|&p| ParentRef::Endogenous(p))
                .collect();
            parents.extend(shared[i].iter().map(|&k| ParentRef::Exogenous(k)));
            parents.push(ParentRef::Exogenous(i));
            let base = 1usize << (parents.len() - 1);
            let f: Vec<usize> = (0..base).map(|_| rng.gen_range(0..2)).collect();
            // private noise is the last (least significant) parent
            let table = (0..base * 2).map(|row| f[row >> 1] ^ (row & 1)).collect();
            EndogenousVar {
                name: g.name(i).to_string(),
                domain: bin(),
                parents,
                table,
            }
        })
        .collect();
    DiscreteScm::new(exogenous, endogenous).expect("random construction is valid")
}

/// Random binary model with `n_endo` endogenous and `n_exo` exogenous
/// variables; each endogenous variable draws random parents among the
/// exogenous variables and earlier endogenous ones, and a random table.
pub fn random_binary_scm<R: Rng + ?Sized>(n_endo: usize, n_exo: usize, rng: &mut R) -> DiscreteScm {
    let exogenous: Vec<ExogenousVar> = (0..n_exo)
        .map(|k| {
            let p = rng.gen_range(0.05..0.95);
            ExogenousVar {
                name: format!("U{k}"),
                domain: vec!["0".into(), "1".into()],
                probs: vec![1.0 - p, p],
            }
        })
        .collect();
    let endogenous = (0..n_endo)
        .map(|i| {
            let mut parents = Vec::new();
            for k in 0..n_exo {
                if rng.gen_bool(0.5) {
                    parents.push(ParentRef::Exogenous(k));
                }
            }
            for k in 0..i {
                if rng.gen_bool(0.5) {
                    parents.push(ParentRef::Endogenous(k));
                }
            }
            if parents.is_empty() && n_exo > 0 {
                parents.push(ParentRef::Exogenous(rng.gen_range(0..n_exo)));
            }
            let rows = 1usize << parents.len();
            EndogenousVar {
                name: format!("V{i}"),
                domain: vec!["0".into(), "1".into()],
                parents,
                table: (0..rows).map(|_| rng.gen_range(0..2)).collect(),
            }
        })
        .collect();
    DiscreteScm::new(exogenous, endogenous).expect("random construction is valid")
}

impl From<GraphError> for ScmError {
    fn from(e: GraphError) -> Self {
        ScmError::Parse {
            line: 0,
            message: e.to_string(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn xor_model() -> DiscreteScm {
        ScmBuilder::new()
            .bernoulli("U1", 0.5)
            .bernoulli("U2", 0.1)
            .endogenous("X", &["0", "1"], &["U1"], |p| p[0].to_string())
            .endogenous("Y", &["0", "1"], &["X", "U2"], |p| {
                ((p[0] != p[1]) as u8).to_string()
            })
            .build()
            .unwrap()
    }

    #[test]
    fn xor_joint_matches_hand_enumeration() {
        // X=1,Y=1 needs U1=1 and U2=0: 0.5 * 0.9
        let j = xor_model().observational_joint().unwrap();
        assert!((j.prob_of(&[("X", "1"), ("Y", "1")]).unwrap() - 0.45).abs() < 1e-15);
        assert!((j.mass().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn constant_model_is_a_point_mass() {
        let m = ScmBuilder::new()
            .exogenous("U", &[("a", 1.0)])
            .endogenous("X", &[], &["U"], |_| "1".into())
            .endogenous("Y", &[], &["X"], |p| format!("{}{}", p[0], p[0]))
            .build()
            .unwrap();
        let j = m.observational_joint().unwrap();
        assert_eq!(j.mass(), &[1.0]);
        let d = m.sample(20, 3);
        assert!(d.rows().iter().all(|r| r == &d.rows()[0]));
    }

    #[test]
    fn intervention_fixes_the_variable() {
        let m = xor_model();
        let j = m.intervene(&assignments(&[("X", "0")])).unwrap().observational_joint().unwrap();
        assert!((j.prob_of(&[("X", "0")]).unwrap() - 1.0).abs() < 1e-15);
        // last write wins
        let twice = m
            .intervene(&assignments(&[("X", "0")]))
            .unwrap()
            .intervene(&assignments(&[("X", "1")]))
            .unwrap();
        let j = twice.observational_joint().unwrap();
        assert!((j.prob_of(&[("X", "1")]).unwrap() - 1.0).abs() < 1e-15);
        // parentless X: do equals conditioning
        let obs = m.observational_joint().unwrap();
        let doj = m.interventional_joint(&assignments(&[("X", "1")])).unwrap();
        let cond = obs.prob_of(&[("X", "1"), ("Y", "1")]).unwrap() / obs.prob_of(&[("X", "1")]).unwrap();
        assert!((doj.prob_of(&[("Y", "1")]).unwrap() - cond).abs() < 1e-12);
    }

    #[test]
    fn intervention_errors() {
        let m = xor_model();
        assert_eq!(
            m.intervene(&assignments(&[("Q", "0")])).unwrap_err(),
            ScmError::UnknownVariable("Q".into())
        );
        assert!(matches!(
            m.intervene(&assignments(&[("X", "5")])).unwrap_err(),
            ScmError::ValueOutsideDomain { .. }
        ));
        assert!(matches!(
            m.intervene(&assignments(&[("U1", "0")])).unwrap_err(),
            ScmError::NotEndogenous(_)
        ));
    }

    #[test]
    fn counterfactual_basics() {
        // Y := X, X := U
        let m = ScmBuilder::new()
            .bernoulli("U", 0.3)
            .endogenous("X", &["0", "1"], &["U"], |p| p[0].to_string())
            .endogenous("Y", &["0", "1"], &["X"], |p| p[0].to_string())
            .build()
            .unwrap();
        let q = CounterfactualQuery::parse("P(Y_{X=1}=1 | X=0, Y=0)").unwrap();
        assert_eq!(q.target, assignments(&[("Y", "1")]));
        assert_eq!(q.antecedent, assignments(&[("X", "1")]));
        assert_eq!(q.evidence, assignments(&[("X", "0"), ("Y", "0")]));
        assert!((m.counterfactual_query(&q).unwrap() - 1.0).abs() < 1e-15);
        // consistency
        let q = CounterfactualQuery::parse("P(Y_{X=1}=1 | X=1, Y=1)").unwrap();
        assert!((m.counterfactual_query(&q).unwrap() - 1.0).abs() < 1e-15);
        let q = CounterfactualQuery::parse("P(Y_{X=1}=1 | X=0, Y=1)").unwrap();
        assert_eq!(m.counterfactual_query(&q).unwrap_err(), ScmError::ZeroEvidence);
    }

    #[test]
    fn query_text_variants() {
        let q = CounterfactualQuery::parse("P(Y=1)").unwrap();
        assert!(q.antecedent.is_empty() && q.evidence.is_empty());
        let q = CounterfactualQuery::parse("P(Y_{X=1,Z=0}=1, W_{X=1,Z=0}=0 | X=0)").unwrap();
        assert_eq!(q.antecedent.len(), 2);
        assert_eq!(q.target.len(), 2);
        assert!(CounterfactualQuery::parse("P(Y_{X=1}=1, W_{X=0}=0)").is_err());
        assert!(CounterfactualQuery::parse("Y=1").is_err());
    }

    #[test]
    fn sampling_is_repeatable() {
        let m = xor_model();
        assert_eq!(m.sample(100, 7), m.sample(100, 7));
        assert_ne!(m.sample(100, 7), m.sample(100, 8));
    }

    #[test]
    fn latent_projection_examples() {
        let private = xor_model().latent_projection();
        assert!(private.bidirected_edges().is_empty());
        assert!(private.has_directed("X", "Y"));

        let bow = ScmBuilder::new()
            .bernoulli("U", 0.5)
            .endogenous("X", &["0", "1"], &["U"], |p| p[0].to_string())
            .endogenous("Y", &["0", "1"], &["X", "U"], |p| p[0].to_string())
            .build()
            .unwrap()
            .latent_projection();
        assert_eq!(bow.bidirected_edges(), vec![("X".to_string(), "Y".to_string())]);
        assert_eq!(bow.directed_edges(), vec![("X".to_string(), "Y".to_string())]);

        let backdoor = ScmBuilder::new()
            .bernoulli("UZ", 0.5)
            .bernoulli("UX", 0.5)
            .bernoulli("UY", 0.5)
            .endogenous("Z", &["0", "1"], &["UZ"], |p| p[0].to_string())
            .endogenous("X", &["0", "1"], &["Z", "UX"], |p| p[1].to_string())
            .endogenous("Y", &["0", "1"], &["X", "Z", "UY"], |p| p[2].to_string())
            .build()
            .unwrap()
            .latent_projection();
        let expected = Admg::from_edges(&["X", "Y", "Z"], &[("Z", "X"), ("Z", "Y"), ("X", "Y")], &[]).unwrap();
        assert_eq!(backdoor, expected);
    }

    #[test]
    fn text_format_round_trip() {
        let text = "exo U {0: 0.25, 1: 0.75}\nendo X (U) {(0) -> 0, (1) -> 1}\nendo Y (X) {(0) -> 1, (1) -> 0}\n";
        let m = parse_scm(text).unwrap();
        assert_eq!(m.to_text(), text);
        assert_eq!(parse_scm(&m.to_text()).unwrap(), m);
    }

    #[test]
    fn text_format_errors() {
        assert!(matches!(
            parse_scm("exo U {0: 0.5, 1: 0.5}\nendo X (U) {(0) -> 0}").unwrap_err(),
            ScmError::IncompleteTable { .. }
        ));
        assert!(matches!(
            parse_scm("exo U {0: 0.5, 1: 0.6}\nendo X (U) {(0) -> 0, (1) -> 1}").unwrap_err(),
            ScmError::InvalidDistribution(_)
        ));
        assert!(matches!(
            parse_scm("exo U {0: 1}\nendo X (Y) {(0) -> 0}\nendo Y (X) {(0) -> 0}").unwrap_err(),
            ScmError::Cycle
        ));
        assert!(matches!(parse_scm("endo X (Q) {() -> 1}").unwrap_err(), ScmError::Parse { .. }));
    }

    #[test]
    fn state_cap_is_enforced() {
        let m = xor_model().with_state_cap(2);
        assert!(matches!(
            m.observational_joint().unwrap_err(),
            ScmError::StateSpaceOverflow { states: 4, cap: 2 }
        ));
    }

    #[test]
    fn random_compatible_models_project_back() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let g = crate::graph::random_admg(5, 0.4, 0.3, &mut rng);
            let m = random_compatible_scm(&g, &mut rng);
            assert_eq!(m.latent_projection(), g);
            let j = m.observational_joint().unwrap();
            assert!(j.mass().iter().all(|&p| p > 0.0));
        }
    }
}
