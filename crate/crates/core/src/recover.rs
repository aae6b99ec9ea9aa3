//! Missing-data recoverability on m-graphs: causal graphs extended with a
//! binary missingness indicator `R_v` for each partially observed variable.
//!
//! Indicators take the value `0` when `v` is observed and `1` when it is
//! missing. A `NotRecoverable` answer only means that none of the
//! implemented sufficient criteria applies.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use itertools::Itertools;
use thiserror::Error;

use crate::estimate::{plug_in, Dataset, Estimate, EstimateError, MISSING_TOKEN};
use crate::expr::{default_symbol, Assignment, Binding, Estimand, ExprError};
use crate::graph::{check_declarations, scan_lines, Admg, GraphError, GraphLine};

/// Indicator value for an observed cell.
pub const OBSERVED: &str = "0";
/// Indicator value for a missing cell.
pub const MISSING: &str = "1";
/// Largest conditioning set tried by the stratified criterion.
pub const MAX_STRATIFIER: usize = 5;
/// Orderings are only searched for targets up to this size.
pub const MAX_ORDERED: usize = 7;

#[derive(Debug, Error)]
pub enum RecoverError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("`{0}` is not a substantive variable of the m-graph")]
    NotSubstantive(String),
    #[error("missingness indicator `{indicator}` cannot be a parent of substantive variable `{child}`")]
    IndicatorAsParent { indicator: String, child: String },
    #[error("`{0}` names an indicator whose variable is not declared `missing`")]
    UnknownIndicator(String),
    #[error("variable name `{0}` clashes with a missingness indicator")]
    IndicatorNameClash(String),
    #[error("indicator `{0}` may only have directed edges")]
    BidirectedIndicator(String),
    #[error("target set is empty")]
    EmptyTarget,
    #[error("not recoverable: {0}")]
    NotRecoverable(String),
    #[error("column `{0}` has missing values but the m-graph does not declare `missing {0}`")]
    UndeclaredMissing(String),
    #[error("explicit indicator column `{0}` is not accepted; indicators are derived from NA cells")]
    ExplicitIndicator(String),
    #[error("`{value}` is not a value of `{var}`")]
    BadValue { var: String, value: String },
    #[error("empty stratum: {0}")]
    EmptyStratum(String),
    #[error(transparent)]
    Data(EstimateError),
}

impl From<EstimateError> for RecoverError {
    fn from(e: EstimateError) -> Self {
        match e {
            EstimateError::Expr(ExprError::ConditioningOnZero { term, event }) => {
                RecoverError::EmptyStratum(format!("{event} never occurs among usable rows ({term})"))
            }
            other => RecoverError::Data(other),
        }
    }
}

pub fn indicator_name(var: &str) -> String {
    format!("R_{var}")
}

/// Causal graph over substantive variables plus missingness indicators.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MGraph {
    combined: Admg,
    substantive: BTreeSet<String>,
    /// Partially observed variable to its indicator.
    indicators: BTreeMap<String, String>,
}

impl MGraph {
    /// `missing` lists the partially observed variables; `indicator_edges`
    /// are directed edges into indicators, from substantive variables or
    /// other indicators.
    pub fn new(base: &Admg, missing: &[&str], indicator_edges: &[(&str, &str)]) -> Result<Self, RecoverError> {
        let substantive: BTreeSet<String> = base.names().iter().cloned().collect();
        let mut indicators = BTreeMap::new();
        for &v in missing {
            if !substantive.contains(v) {
                return Err(RecoverError::NotSubstantive(v.to_string()));
            }
            indicators.insert(v.to_string(), indicator_name(v));
        }
        let r_names: BTreeSet<&String> = indicators.values().collect();
        if let Some(clash) = substantive.iter().find(|v| r_names.contains(v)) {
            return Err(RecoverError::IndicatorNameClash(clash.clone()));
        }
        let mut directed = base.directed_edges();
        for &(a, b) in indicator_edges {
            if !r_names.contains(&b.to_string()) {
                if r_names.contains(&a.to_string()) && substantive.contains(b) {
                    return Err(RecoverError::IndicatorAsParent {
                        indicator: a.into(),
                        child: b.into(),
                    });
                }
                return Err(RecoverError::UnknownIndicator(b.to_string()));
            }
            if !substantive.contains(a) && !r_names.contains(&a.to_string()) {
                return Err(GraphError::UnknownVariable(a.to_string()).into());
            }
            directed.push((a.to_string(), b.to_string()));
        }
        let nodes: Vec<String> = base.names().iter().chain(indicators.values()).cloned().collect();
        let combined = Admg::new(nodes, directed, base.bidirected_edges())?;
        Ok(MGraph {
            combined,
            substantive,
            indicators,
        })
    }

    /// The graph over substantive variables and indicators together.
    pub fn combined(&self) -> &Admg {
        &self.combined
    }

    pub fn substantive(&self) -> &BTreeSet<String> {
        &self.substantive
    }

    pub fn indicators(&self) -> &BTreeMap<String, String> {
        &self.indicators
    }

    pub fn is_partially_observed(&self, v: &str) -> bool {
        self.indicators.contains_key(v)
    }

    /// Substantive graph without the indicators.
    pub fn base(&self) -> Admg {
        self.combined
            .induced(&self.substantive)
            .expect("substantive variables are nodes")
    }

    pub fn to_text(&self) -> String {
        self.to_string()
    }

    fn indep(&self, a: &[String], b: &[String], z: &[String]) -> bool {
        self.combined
            .d_separated(a, b, z)
            .expect("names come from the m-graph")
    }
}

impl fmt::Display for MGraph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for v in self.combined.names().iter().filter(|v| self.substantive.contains(*v)) {
            writeln!(f, "var {v}")?;
        }
        for v in self.indicators.keys() {
            writeln!(f, "missing {v}")?;
        }
        for (a, b) in self.combined.directed_edges() {
            writeln!(f, "{a} -> {b}")?;
        }
        for (a, b) in self.combined.bidirected_edges() {
            writeln!(f, "{a} <-> {b}")?;
        }
        Ok(())
    }
}

/// Parses the graph format extended with `missing V` lines and directed
/// edges into `R_V`.
pub fn parse_mgraph(text: &str) -> Result<MGraph, RecoverError> {
    let lines = scan_lines(text, false, true)?;
    let indicators: BTreeSet<String> = lines
        .iter()
        .filter_map(|l| match &l.item {
            GraphLine::Missing(v) => Some(indicator_name(v)),
            _ => None,
        })
        .collect();
    let declared = check_declarations(&lines, &indicators)?;
    let mut missing = Vec::new();
    let mut directed = Vec::new();
    let mut r_edges = Vec::new();
    let mut bidirected = Vec::new();
    for l in &lines {
        match &l.item {
            GraphLine::Missing(v) => {
                if !declared.contains(v) {
                    return Err(GraphError::Syntax {
                        line: l.line,
                        column: l.columns.0,
                        message: format!("`missing {v}` names an undeclared variable"),
                    }
                    .into());
                }
                missing.push(v.as_str());
            }
            GraphLine::Directed(a, b) => {
                if indicators.contains(a) && !indicators.contains(b) {
                    return Err(GraphError::Syntax {
                        line: l.line,
                        column: l.columns.1,
                        message: format!("indicator `{a}` cannot point into substantive variable `{b}`"),
                    }
                    .into());
                }
                if indicators.contains(b) {
                    r_edges.push((a.as_str(), b.as_str()));
                } else {
                    directed.push((a.clone(), b.clone()));
                }
            }
            GraphLine::Bidirected(a, b) => {
                if let Some(r) = [a, b].into_iter().find(|x| indicators.contains(*x)) {
                    let column = if r == a { l.columns.0 } else { l.columns.1 };
                    return Err(GraphError::Syntax {
                        line: l.line,
                        column,
                        message: format!("indicator `{r}` may only have directed edges"),
                    }
                    .into());
                }
                bidirected.push((a.clone(), b.clone()));
            }
            GraphLine::Var(_) | GraphLine::Undirected(..) => {}
        }
    }
    let base = Admg::new(declared.iter(), directed, bidirected)?;
    MGraph::new(&base, &missing, &r_edges)
}

impl std::str::FromStr for MGraph {
    type Err = RecoverError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_mgraph(s)
    }
}

/// Which sufficient condition licensed the estimand.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Criterion {
    /// The target's indicators are independent of the target.
    Mcar,
    /// Partially observed target variables are independent of their
    /// indicators given the observed target variables and `stratifier`.
    Stratified { stratifier: Vec<String> },
    /// A sequential factorization with each factor recoverable.
    Ordered { order: Vec<String> },
}

impl fmt::Display for Criterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Criterion::Mcar => write!(f, "missing completely at random for the target"),
            Criterion::Stratified { stratifier } if stratifier.is_empty() => {
                write!(f, "missing at random given the observed target variables")
            }
            Criterion::Stratified { stratifier } => {
                write!(f, "missing at random given {}", stratifier.join(", "))
            }
            Criterion::Ordered { order } => write!(f, "sequential factorization in order {}", order.join(", ")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Recoverability {
    Recoverable { criterion: Criterion, estimand: Estimand },
    NotRecoverable(String),
}

impl Recoverability {
    pub fn estimand(&self) -> Option<&Estimand> {
        match self {
            Recoverability::Recoverable { estimand, .. } => Some(estimand),
            Recoverability::NotRecoverable(_) => None,
        }
    }

    pub fn is_recoverable(&self) -> bool {
        self.estimand().is_some()
    }
}

impl fmt::Display for Recoverability {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Recoverability::Recoverable { criterion, estimand } => write!(f, "recoverable ({criterion}): {estimand}"),
            Recoverability::NotRecoverable(reason) => write!(f, "not recoverable: {reason}"),
        }
    }
}

fn sym(v: &str) -> Assignment {
    Assignment::symbolic(v)
}

fn observed(mg: &MGraph, vars: &[String]) -> Vec<Assignment> {
    vars.iter()
        .filter_map(|v| mg.indicators.get(v))
        .map(|r| Assignment::literal(r, OBSERVED))
        .collect()
}

/// Decides whether the joint distribution of `target` can be recovered
/// from the incompletely observed data, returning the recovery estimand.
pub fn recoverability(mg: &MGraph, target: &[&str]) -> Result<Recoverability, RecoverError> {
    if target.is_empty() {
        return Err(RecoverError::EmptyTarget);
    }
    let mut t: Vec<String> = Vec::new();
    for &v in target {
        if !mg.substantive.contains(v) {
            return Err(RecoverError::NotSubstantive(v.to_string()));
        }
        if !t.iter().any(|x| x == v) {
            t.push(v.to_string());
        }
    }
    t.sort();
    let (t_m, t_o): (Vec<String>, Vec<String>) = t.iter().cloned().partition(|v| mg.is_partially_observed(v));
    let r_t: Vec<String> = t_m.iter().map(|v| mg.indicators[v].clone()).collect();
    let joint = |vars: &[String]| vars.iter().map(|v| sym(v)).collect::<Vec<_>>();

    if r_t.is_empty() || mg.indep(&r_t, &t, &[]) {
        return Ok(Recoverability::Recoverable {
            criterion: Criterion::Mcar,
            estimand: Estimand::prob(joint(&t), observed(mg, &t)),
        });
    }

    let candidates: Vec<String> = mg
        .combined
        .names()
        .iter()
        .filter(|v| mg.substantive.contains(*v) && !mg.is_partially_observed(v) && !t.contains(v))
        .cloned()
        .sorted()
        .collect();
    for size in 0..=candidates.len().min(MAX_STRATIFIER) {
        for w in candidates.iter().cloned().combinations(size) {
            let given: Vec<String> = t_o.iter().chain(&w).cloned().collect();
            if !mg.indep(&t_m, &r_t, &given) {
                continue;
            }
            let mut cond = joint(&given);
            cond.extend(observed(mg, &t_m));
            let factor = Estimand::prob(joint(&t_m), cond);
            let estimand = if given.is_empty() {
                factor
            } else {
                let outer = Estimand::prob(joint(&given), vec![]);
                Estimand::sum_over(w.iter().map(|v| default_symbol(v)), Estimand::product(vec![factor, outer]))
            };
            return Ok(Recoverability::Recoverable {
                criterion: Criterion::Stratified { stratifier: w },
                estimand,
            });
        }
    }

    if t.len() <= MAX_ORDERED {
        for order in t.iter().cloned().permutations(t.len()) {
            let mut factors = Vec::new();
            let ok = (0..order.len()).all(|i| {
                let r_upto: Vec<String> = order[..=i]
                    .iter()
                    .filter_map(|v| mg.indicators.get(v).cloned())
                    .collect();
                if !r_upto.is_empty() && !mg.indep(&order[i..=i], &r_upto, &order[..i]) {
                    return false;
                }
                let mut cond = joint(&order[..i]);
                cond.extend(observed(mg, &order[..=i]));
                factors.push(Estimand::prob(joint(&order[i..=i]), cond));
                true
            });
            if ok {
                return Ok(Recoverability::Recoverable {
                    criterion: Criterion::Ordered { order },
                    estimand: Estimand::product(factors),
                });
            }
        }
    }
    Ok(Recoverability::NotRecoverable("no implemented criterion applies".into()))
}

/// Checks `d` against the m-graph and adds an indicator column for every
/// partially observed variable. Missing cells of `v` become the extra
/// domain value `NA`, which only ever occurs together with `R_v = 1`.
pub fn augment(mg: &MGraph, d: &Dataset) -> Result<Dataset, RecoverError> {
    for c in d.columns() {
        if let Some(base) = c.strip_prefix("R_") {
            if mg.indicators.contains_key(base) || d.column_index(base).is_some() {
                return Err(RecoverError::ExplicitIndicator(c.clone()));
            }
        }
    }
    let names: Vec<&str> = mg
        .combined
        .names()
        .iter()
        .filter(|v| mg.substantive.contains(*v))
        .map(|v| v.as_str())
        .collect();
    let sub = d.select(&names)?;
    for (c, name) in sub.columns().iter().enumerate() {
        if sub.column_has_missing(c) && !mg.is_partially_observed(name) {
            return Err(RecoverError::UndeclaredMissing(name.clone()));
        }
    }
    let mut columns = sub.columns().to_vec();
    let mut domains = sub.domains().to_vec();
    let partial: Vec<usize> = (0..columns.len())
        .filter(|&c| mg.is_partially_observed(&columns[c]))
        .collect();
    for &c in &partial {
        domains[c].push(MISSING_TOKEN.to_string());
    }
    for &c in &partial {
        columns.push(mg.indicators[&columns[c]].clone());
        domains.push(vec![OBSERVED.to_string(), MISSING.to_string()]);
    }
    let rows = sub
        .rows()
        .iter()
        .map(|row| {
            let mut out: Vec<Option<usize>> = row
                .iter()
                .enumerate()
                .map(|(c, cell)| Some(cell.unwrap_or(domains[c].len() - 1)))
                .collect();
            out.extend(partial.iter().map(|&c| Some(row[c].is_none() as usize)));
            out
        })
        .collect();
    Ok(Dataset::new(columns, domains, rows)?)
}

/// Evaluates the recovery estimand of `target` on `d` at the values in
/// `values` (variable to value). Each term only uses rows matching its
/// indicator conditions.
pub fn recover_estimate(
    mg: &MGraph,
    d: &Dataset,
    target: &[&str],
    values: &BTreeMap<String, String>,
) -> Result<Estimate, RecoverError> {
    let estimand = match recoverability(mg, target)? {
        Recoverability::Recoverable { estimand, .. } => estimand,
        Recoverability::NotRecoverable(reason) => return Err(RecoverError::NotRecoverable(reason)),
    };
    let data = augment(mg, d)?;
    let binding = bind(&data, target, values)?;
    Ok(plug_in(&estimand, &data, &binding)?)
}

fn bind(data: &Dataset, target: &[&str], values: &BTreeMap<String, String>) -> Result<Binding, RecoverError> {
    let mut binding = Binding::new();
    for &v in target {
        let value = values.get(v).ok_or_else(|| RecoverError::BadValue {
            var: v.to_string(),
            value: "(unset)".into(),
        })?;
        let c = data.require_column(v)?;
        if value == MISSING_TOKEN || !data.domains()[c].contains(value) {
            return Err(RecoverError::BadValue {
                var: v.to_string(),
                value: value.clone(),
            });
        }
        binding.insert(default_symbol(v), value.clone());
    }
    Ok(binding)
}

/// Recovered distribution of `target` over every combination of observed
/// values, in lexicographic order of the (sorted) target variables.
pub fn recover_distribution(
    mg: &MGraph,
    d: &Dataset,
    target: &[&str],
) -> Result<Vec<(Vec<String>, f64)>, RecoverError> {
    let estimand = match recoverability(mg, target)? {
        Recoverability::Recoverable { estimand, .. } => estimand,
        Recoverability::NotRecoverable(reason) => return Err(RecoverError::NotRecoverable(reason)),
    };
    let data = augment(mg, d)?;
    let vars: Vec<&str> = target.iter().copied().sorted().dedup().collect();
    let domains: Vec<Vec<String>> = vars
        .iter()
        .map(|v| {
            let c = data.require_column(v)?;
            Ok(data.domains()[c].iter().filter(|x| *x != MISSING_TOKEN).cloned().collect())
        })
        .collect::<Result<_, RecoverError>>()?;
    let joint = crate::estimate::empirical_joint(&data)?;
    domains
        .iter()
        .map(|d| d.iter())
        .multi_cartesian_product()
        .map(|combo| {
            let values: BTreeMap<String, String> = vars
                .iter()
                .zip(&combo)
                .map(|(v, x)| (v.to_string(), x.to_string()))
                .collect();
            let binding = bind(&data, &vars, &values)?;
            let p = crate::expr::eval_estimand(&estimand, &joint, &binding).map_err(EstimateError::from)?;
            Ok((combo.into_iter().cloned().collect(), p))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::simplify;
    use crate::scm::ScmBuilder;

    fn two() -> Admg {
        Admg::from_edges(&["X", "Y"], &[("X", "Y")], &[]).unwrap()
    }

    fn render(r: &Recoverability) -> String {
        simplify(r.estimand().unwrap()).render()
    }

    #[test]
    fn isolated_indicator_is_mcar() {
        let mg = MGraph::new(&two(), &["Y"], &[]).unwrap();
        let r = recoverability(&mg, &["X", "Y"]).unwrap();
        assert!(matches!(r, Recoverability::Recoverable { criterion: Criterion::Mcar, .. }));
        assert_eq!(render(&r), "P(x,y|R_Y=0)");
    }

    #[test]
    fn self_masking_is_not_recoverable() {
        let mg = MGraph::new(&two(), &["Y"], &[("Y", "R_Y")]).unwrap();
        let r = recoverability(&mg, &["Y"]).unwrap();
        assert_eq!(r, Recoverability::NotRecoverable("no implemented criterion applies".into()));
    }

    #[test]
    fn observed_cause_of_missingness_stratifies() {
        let mg = MGraph::new(&two(), &["Y"], &[("X", "R_Y")]).unwrap();
        let r = recoverability(&mg, &["Y"]).unwrap();
        assert!(matches!(
            &r,
            Recoverability::Recoverable { criterion: Criterion::Stratified { stratifier }, .. } if stratifier == &["X"]
        ));
        assert_eq!(render(&r), "sum_{x} P(y|x,R_Y=0) * P(x)");
    }

    #[test]
    fn ordering_handles_two_partially_observed_variables() {
        let mg = MGraph::new(&two(), &["X", "Y"], &[("X", "R_Y")]).unwrap();
        let r = recoverability(&mg, &["X", "Y"]).unwrap();
        assert!(matches!(&r, Recoverability::Recoverable { criterion: Criterion::Ordered { .. }, .. }));
        assert_eq!(render(&r), "P(x|R_X=0) * P(y|x,R_X=0,R_Y=0)");
    }

    #[test]
    fn parse_round_trip_and_errors() {
        let text = "var X\nvar Y\nX -> Y\nmissing Y\nX -> R_Y\n";
        let mg = parse_mgraph(text).unwrap();
        assert_eq!(parse_mgraph(&mg.to_text()).unwrap(), mg);
        assert!(mg.to_text().contains("missing Y\n"));
        let err = parse_mgraph("var X\nmissing X\nR_X -> X\n").unwrap_err();
        assert!(matches!(err, RecoverError::Graph(GraphError::Syntax { line: 3, column: 8, .. })), "{err}");
        assert!(parse_mgraph("var X\nvar Y\nX -> R_Y\n").is_err());
        assert!(parse_mgraph("var X\nmissing Z\n").is_err());
        assert!(matches!(
            parse_mgraph("var X\nmissing X\nX <-> R_X\n"),
            Err(RecoverError::Graph(GraphError::Syntax { column: 7, .. }))
        ));
        assert!(parse_mgraph("var X\nmissing X\nR_X -> R_X\n").is_err());
    }

    #[test]
    fn target_outside_v_is_an_error() {
        let mg = MGraph::new(&two(), &["Y"], &[]).unwrap();
        assert!(matches!(recoverability(&mg, &["R_Y"]), Err(RecoverError::NotSubstantive(_))));
        assert!(matches!(recoverability(&mg, &[]), Err(RecoverError::EmptyTarget)));
    }

    fn data(rows: &[(&str, &str)]) -> Dataset {
        Dataset::from_records(
            vec!["X".into(), "Y".into()],
            rows.iter()
                .map(|(x, y)| {
                    let cell = |s: &str| (s != "NA").then(|| s.to_string());
                    vec![cell(x), cell(y)]
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn stratified_estimate_matches_hand_computation() {
        let mg = MGraph::new(&two(), &["Y"], &[("X", "R_Y")]).unwrap();
        let d = data(&[("0", "1"), ("0", "0"), ("0", "NA"), ("1", "1"), ("1", "NA"), ("1", "NA")]);
        let values = BTreeMap::from([("Y".to_string(), "1".to_string())]);
        let e = recover_estimate(&mg, &d, &["Y"], &values).unwrap();
        // P(y=1|x=0,obs) = 1/2, P(y=1|x=1,obs) = 1, P(x) = 1/2 each
        assert!((e.value - 0.75).abs() < 1e-12);
        let dist = recover_distribution(&mg, &d, &["Y"]).unwrap();
        assert_eq!(dist.len(), 2);
        assert!((dist[0].1 - 0.25).abs() < 1e-12);
    }

    #[test]
    fn data_checks() {
        let mg = MGraph::new(&two(), &["Y"], &[]).unwrap();
        let d = data(&[("NA", "1"), ("0", "0")]);
        let values = BTreeMap::from([("Y".to_string(), "1".to_string())]);
        assert!(matches!(
            recover_estimate(&mg, &d, &["Y"], &values),
            Err(RecoverError::UndeclaredMissing(c)) if c == "X"
        ));
        let explicit = Dataset::from_records(
            vec!["X".into(), "Y".into(), "R_Y".into()],
            vec![vec![Some("0".into()), Some("1".into()), Some("0".into())]],
        )
        .unwrap();
        assert!(matches!(
            recover_estimate(&mg, &explicit, &["Y"], &values),
            Err(RecoverError::ExplicitIndicator(_))
        ));
        let bad = BTreeMap::from([("Y".to_string(), "NA".to_string())]);
        assert!(matches!(
            recover_estimate(&mg, &data(&[("0", "1")]), &["Y"], &bad),
            Err(RecoverError::BadValue { .. })
        ));
        let selfmask = MGraph::new(&two(), &["Y"], &[("Y", "R_Y")]).unwrap();
        assert!(matches!(
            recover_estimate(&selfmask, &data(&[("0", "1")]), &["Y"], &values),
            Err(RecoverError::NotRecoverable(_))
        ));
    }

    #[test]
    fn empty_stratum_is_reported() {
        let mg = MGraph::new(&two(), &["Y"], &[("X", "R_Y")]).unwrap();
        // Y is never observed when X = 1
        let d = data(&[("0", "1"), ("0", "0"), ("1", "NA")]);
        let values = BTreeMap::from([("Y".to_string(), "1".to_string())]);
        assert!(matches!(
            recover_estimate(&mg, &d, &["Y"], &values),
            Err(RecoverError::EmptyStratum(_))
        ));
    }

    #[test]
    fn complete_data_matches_plug_in() {
        let d = ScmBuilder::new()
            .bernoulli("UX", 0.3)
            .bernoulli("UY", 0.4)
            .endogenous("X", &["0", "1"], &["UX"], |p| p[0].to_string())
            .endogenous("Y", &["0", "1"], &["X", "UY"], |p| ((p[0] != p[1]) as u8).to_string())
            .build()
            .unwrap()
            .sample(500, 4);
        let mg = MGraph::new(&two(), &["Y"], &[("X", "R_Y")]).unwrap();
        let values = BTreeMap::from([("Y".to_string(), "1".to_string())]);
        let rec = recover_estimate(&mg, &d, &["Y"], &values).unwrap();
        let direct = plug_in(
            &Estimand::prob(vec![Assignment::literal("Y", "1")], vec![]),
            &d,
            &Binding::new(),
        )
        .unwrap();
        assert!((rec.value - direct.value).abs() < 1e-12);
        assert_eq!(rec.n, direct.n);
    }
}
