//! Constraint-based structure discovery. The PC procedure (order-independent
//! "stable" variant) learns a skeleton from conditional independence
//! answers, orients colliders and then propagates orientations with three
//! Meek rules. Assumes faithfulness and no latent confounding.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use itertools::Itertools;
use rayon::prelude::*;
use thiserror::Error;

use crate::estimate::{Dataset, EstimateError};
use crate::fitcheck::g_test;
use crate::graph::{check_declarations, scan_lines, Admg, GraphError, GraphLine};

#[derive(Debug, Error)]
pub enum DiscoverError {
    #[error("discovery needs at least two variables")]
    TooFewVariables,
    #[error("variable `{0}` listed twice")]
    DuplicateVariable(String),
    #[error("the oracle does not know variable `{0}`")]
    UnknownVariable(String),
    #[error("independence oracle failed: {0}")]
    Data(#[from] EstimateError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("edge {0} -- {1} is also directed")]
    MixedEdge(String, String),
}

/// Source of conditional independence answers.
#[derive(Debug, Clone, Copy)]
pub enum CiOracle<'a> {
    /// d-separation in a known graph.
    Graph(&'a Admg),
    /// G² test on data: independent when the p-value is at least `alpha`.
    Data { data: &'a Dataset, alpha: f64 },
}

impl CiOracle<'_> {
    pub fn independent(&self, a: &str, b: &str, given: &[&str]) -> Result<bool, DiscoverError> {
        match self {
            CiOracle::Graph(g) => Ok(g.d_separated(&[a], &[b], given)?),
            CiOracle::Data { data, alpha } => Ok(g_test(data, &[a], &[b], given)?.p_value >= *alpha),
        }
    }

    fn covers(&self, v: &str) -> bool {
        match self {
            CiOracle::Graph(g) => g.contains(v),
            CiOracle::Data { data, .. } => data.column_index(v).is_some(),
        }
    }
}

/// Completed partially directed acyclic graph: the compact form of a
/// Markov equivalence class.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Cpdag {
    nodes: Vec<String>,
    directed: BTreeSet<(String, String)>,
    /// Stored with the endpoints in sorted order.
    undirected: BTreeSet<(String, String)>,
}

fn ordered(a: &str, b: &str) -> (String, String) {
    if a <= b {
        (a.to_string(), b.to_string())
    } else {
        (b.to_string(), a.to_string())
    }
}

impl Cpdag {
    pub fn new(
        nodes: &[&str],
        directed: &[(&str, &str)],
        undirected: &[(&str, &str)],
    ) -> Result<Self, DiscoverError> {
        let mut out = Cpdag {
            nodes: nodes.iter().map(|s| s.to_string()).sorted().collect(),
            ..Cpdag::default()
        };
        for (i, n) in out.nodes.iter().enumerate() {
            if out.nodes[..i].contains(n) {
                return Err(DiscoverError::DuplicateVariable(n.clone()));
            }
        }
        for &(a, b) in directed.iter().chain(undirected) {
            for v in [a, b] {
                if !out.nodes.iter().any(|n| n == v) {
                    return Err(DiscoverError::UnknownVariable(v.to_string()));
                }
            }
        }
        out.directed = directed.iter().map(|(a, b)| (a.to_string(), b.to_string())).collect();
        out.undirected = undirected.iter().map(|(a, b)| ordered(a, b)).collect();
        for (a, b) in &out.undirected {
            if out.has_directed(a, b) || out.has_directed(b, a) {
                return Err(DiscoverError::MixedEdge(a.clone(), b.clone()));
            }
        }
        // acyclicity of the directed part
        Admg::new(out.nodes.iter(), out.directed.iter().cloned(), Vec::<(String, String)>::new())?;
        Ok(out)
    }

    pub fn nodes(&self) -> &[String] {
        &self.nodes
    }

    pub fn directed(&self) -> &BTreeSet<(String, String)> {
        &self.directed
    }

    pub fn undirected(&self) -> &BTreeSet<(String, String)> {
        &self.undirected
    }

    pub fn has_directed(&self, from: &str, to: &str) -> bool {
        self.directed.contains(&(from.to_string(), to.to_string()))
    }

    pub fn has_undirected(&self, a: &str, b: &str) -> bool {
        self.undirected.contains(&ordered(a, b))
    }

    pub fn adjacent(&self, a: &str, b: &str) -> bool {
        self.has_directed(a, b) || self.has_directed(b, a) || self.has_undirected(a, b)
    }

    pub fn to_text(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for Cpdag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for n in &self.nodes {
            writeln!(f, "var {n}")?;
        }
        for (a, b) in &self.directed {
            writeln!(f, "{a} -> {b}")?;
        }
        for (a, b) in &self.undirected {
            writeln!(f, "{a} -- {b}")?;
        }
        Ok(())
    }
}

/// Parses discovery output: the graph format with `A -- B` lines and no
/// bidirected edges.
pub fn parse_cpdag(text: &str) -> Result<Cpdag, DiscoverError> {
    let lines = scan_lines(text, true, false)?;
    let declared = check_declarations(&lines, &BTreeSet::new())?;
    let mut directed = Vec::new();
    let mut undirected = Vec::new();
    for l in &lines {
        match &l.item {
            GraphLine::Directed(a, b) => directed.push((a.as_str(), b.as_str())),
            GraphLine::Undirected(a, b) => undirected.push((a.as_str(), b.as_str())),
            GraphLine::Bidirected(..) => {
                return Err(GraphError::Syntax {
                    line: l.line,
                    column: l.columns.0,
                    message: "bidirected edges cannot appear in a CPDAG".into(),
                }
                .into())
            }
            GraphLine::Var(_) | GraphLine::Missing(_) => {}
        }
    }
    let nodes: Vec<&str> = declared.iter().map(|s| s.as_str()).collect();
    Cpdag::new(&nodes, &directed, &undirected)
}

impl std::str::FromStr for Cpdag {
    type Err = DiscoverError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_cpdag(s)
    }
}

/// Edge marks during orientation, indexed by canonical position.
struct Pattern {
    n: usize,
    adj: Vec<Vec<bool>>,
    /// `arrow[a][b]`: the edge a-b has an arrowhead at b.
    arrow: Vec<Vec<bool>>,
}

impl Pattern {
    fn undirected(&self, a: usize, b: usize) -> bool {
        self.adj[a][b] && !self.arrow[a][b] && !self.arrow[b][a]
    }

    fn directed(&self, a: usize, b: usize) -> bool {
        self.adj[a][b] && self.arrow[a][b] && !self.arrow[b][a]
    }

    fn reaches(&self, from: usize, to: usize) -> bool {
        let mut seen = vec![false; self.n];
        let mut stack = vec![from];
        while let Some(v) = stack.pop() {
            if v == to {
                return true;
            }
            if std::mem::replace(&mut seen[v], true) {
                continue;
            }
            stack.extend((0..self.n).filter(|&w| self.directed(v, w)));
        }
        false
    }

    /// Orients a-b as a -> b unless it is not undirected or would close a
    /// directed cycle.
    fn orient(&mut self, a: usize, b: usize) -> bool {
        if !self.undirected(a, b) || self.reaches(b, a) {
            return false;
        }
        self.arrow[a][b] = true;
        true
    }

    fn meek_pass(&mut self) -> bool {
        let n = self.n;
        let mut changed = false;
        for a in 0..n {
            for b in 0..n {
                if !self.undirected(a, b) {
                    continue;
                }
                // R1: c -> a - b with c, b nonadjacent
                let r1 = (0..n).any(|c| c != b && self.directed(c, a) && !self.adj[c][b]);
                // R2: a -> c -> b with a - b
                let r2 = (0..n).any(|c| self.directed(a, c) && self.directed(c, b));
                // R3: a - c -> b and a - d -> b with c, d nonadjacent
                let r3 = (0..n)
                    .filter(|&c| self.undirected(a, c) && self.directed(c, b))
                    .tuple_combinations()
                    .any(|(c, d)| !self.adj[c][d]);
                if (r1 || r2 || r3) && self.orient(a, b) {
                    changed = true;
                }
            }
        }
        changed
    }
}

/// Runs PC on `vars` with answers from `oracle`. The result does not
/// depend on the order of `vars`.
pub fn discover_cpdag(oracle: &CiOracle<'_>, vars: &[&str]) -> Result<Cpdag, DiscoverError> {
    let names: Vec<&str> = vars.iter().copied().sorted().collect();
    if let Some((a, _)) = names.iter().tuple_windows().find(|(a, b)| a == b) {
        return Err(DiscoverError::DuplicateVariable(a.to_string()));
    }
    if names.len() < 2 {
        return Err(DiscoverError::TooFewVariables);
    }
    if let Some(v) = names.iter().find(|v| !oracle.covers(v)) {
        return Err(DiscoverError::UnknownVariable(v.to_string()));
    }
    let n = names.len();
    let mut adj = vec![vec![true; n]; n];
    for (i, row) in adj.iter_mut().enumerate() {
        row[i] = false;
    }
    let mut sepsets: BTreeMap<(usize, usize), Vec<usize>> = BTreeMap::new();
    for level in 0.. {
        let snapshot = adj.clone();
        let neighbours = |v: usize, except: usize| -> Vec<usize> {
            (0..n).filter(|&w| w != except && snapshot[v][w]).collect()
        };
        let pairs: Vec<(usize, usize)> = (0..n)
            .tuple_combinations()
            .filter(|&(i, j)| snapshot[i][j])
            .filter(|&(i, j)| neighbours(i, j).len() >= level || neighbours(j, i).len() >= level)
            .collect();
        if pairs.is_empty() {
            break;
        }
        let found: Vec<Option<Vec<usize>>> = pairs
            .par_iter()
            .map(|&(i, j)| {
                for (from, other) in [(i, j), (j, i)] {
                    for s in neighbours(from, other).into_iter().combinations(level) {
                        let given: Vec<&str> = s.iter().map(|&k| names[k]).collect();
                        if oracle.independent(names[i], names[j], &given)? {
                            return Ok(Some(s));
                        }
                    }
                }
                Ok(None)
            })
            .collect::<Result<_, DiscoverError>>()?;
        for (&(i, j), s) in pairs.iter().zip(found) {
            if let Some(s) = s {
                adj[i][j] = false;
                adj[j][i] = false;
                sepsets.insert((i, j), s);
            }
        }
    }

    let mut p = Pattern {
        n,
        adj,
        arrow: vec![vec![false; n]; n],
    };
    for k in 0..n {
        for (i, j) in (0..n).tuple_combinations() {
            if i == k || j == k || p.adj[i][j] || !p.adj[i][k] || !p.adj[j][k] {
                continue;
            }
            let sep = &sepsets[&(i, j)];
            if !sep.contains(&k) && !p.arrow[k][i] && !p.arrow[k][j] {
                let (ri, rj) = (p.reaches(k, i), p.reaches(k, j));
                if !ri && !rj {
                    p.arrow[i][k] = true;
                    p.arrow[j][k] = true;
                }
            }
        }
    }
    while p.meek_pass() {}

    let mut directed = Vec::new();
    let mut undirected = Vec::new();
    for (a, b) in (0..n).tuple_combinations() {
        if p.directed(a, b) {
            directed.push((names[a], names[b]));
        } else if p.directed(b, a) {
            directed.push((names[b], names[a]));
        } else if p.adj[a][b] {
            undirected.push((names[a], names[b]));
        }
    }
    Cpdag::new(&names, &directed, &undirected)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scm::ScmBuilder;

    fn dag(nodes: &[&str], edges: &[(&str, &str)]) -> Admg {
        Admg::from_edges(nodes, edges, &[]).unwrap()
    }

    #[test]
    fn collider_is_oriented() {
        let g = dag(&["X", "Y", "Z"], &[("X", "Z"), ("Y", "Z")]);
        let c = discover_cpdag(&CiOracle::Graph(&g), &["X", "Y", "Z"]).unwrap();
        assert_eq!(c.to_text(), "var X\nvar Y\nvar Z\nX -> Z\nY -> Z\n");
    }

    #[test]
    fn chain_stays_undirected() {
        let g = dag(&["X", "Y", "Z"], &[("X", "Z"), ("Z", "Y")]);
        let c = discover_cpdag(&CiOracle::Graph(&g), &["Z", "Y", "X"]).unwrap();
        assert!(c.directed().is_empty());
        assert!(c.has_undirected("X", "Z") && c.has_undirected("Z", "Y"));
        assert!(!c.adjacent("X", "Y"));
    }

    #[test]
    fn isolated_pair_is_edgeless() {
        let g = dag(&["A", "B"], &[]);
        let c = discover_cpdag(&CiOracle::Graph(&g), &["A", "B"]).unwrap();
        assert!(c.directed().is_empty() && c.undirected().is_empty());
    }

    #[test]
    fn meek_rule_one_propagates_collider() {
        // A -> C <- B, C -> D: the collider forces C -> D
        let g = dag(&["A", "B", "C", "D"], &[("A", "C"), ("B", "C"), ("C", "D")]);
        let c = discover_cpdag(&CiOracle::Graph(&g), &["A", "B", "C", "D"]).unwrap();
        assert!(c.has_directed("C", "D"));
        assert!(c.undirected().is_empty());
    }

    #[test]
    fn input_errors() {
        let g = dag(&["A", "B"], &[]);
        assert!(matches!(discover_cpdag(&CiOracle::Graph(&g), &["A"]), Err(DiscoverError::TooFewVariables)));
        assert!(matches!(
            discover_cpdag(&CiOracle::Graph(&g), &["A", "A"]),
            Err(DiscoverError::DuplicateVariable(_))
        ));
        assert!(matches!(
            discover_cpdag(&CiOracle::Graph(&g), &["A", "Q"]),
            Err(DiscoverError::UnknownVariable(v)) if v == "Q"
        ));
    }

    #[test]
    fn text_round_trip() {
        let c = Cpdag::new(&["A", "B", "C"], &[("A", "C")], &[("B", "A")]).unwrap();
        assert_eq!(c.to_text(), "var A\nvar B\nvar C\nA -> C\nA -- B\n");
        assert_eq!(parse_cpdag(&c.to_text()).unwrap(), c);
        assert!(parse_cpdag("var A\nvar B\nA <-> B\n").is_err());
        assert!(Cpdag::new(&["A", "B"], &[("A", "B")], &[("A", "B")]).is_err());
        assert!(Cpdag::new(&["A", "B"], &[("A", "B"), ("B", "A")], &[]).is_err());
    }

    #[test]
    fn data_oracle_finds_collider() {
        let d = ScmBuilder::new()
            .bernoulli("UX", 0.5)
            .bernoulli("UY", 0.5)
            .bernoulli("UZ", 0.1)
            .endogenous("X", &["0", "1"], &["UX"], |p| p[0].to_string())
            .endogenous("Y", &["0", "1"], &["UY"], |p| p[0].to_string())
            .endogenous("Z", &["0", "1"], &["X", "Y", "UZ"], |p| {
                let v = (p[0] == "1" && p[1] == "1") != (p[2] == "1");
                (v as u8).to_string()
            })
            .build()
            .unwrap()
            .sample(20_000, 9);
        let c = discover_cpdag(&CiOracle::Data { data: &d, alpha: 0.01 }, &["X", "Y", "Z"]).unwrap();
        assert!(c.has_directed("X", "Z") && c.has_directed("Y", "Z"), "{c}");
    }
}
