//! Acyclic directed mixed graphs (ADMGs).
//!
//! Directed edges encode direct causal influence; bidirected edges stand for
//! an unobserved common cause of their two endpoints. Nodes are indexed by
//! their rank in lexicographic name order, so every traversal that walks
//! indices in ascending order is also deterministic by name.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use itertools::Itertools;
use rand::Rng;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GraphError {
    #[error("line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("cycle detected: {}", .0.join(" -> "))]
    Cycle(Vec<String>),
    #[error("line {line}: endpoint `{name}` is never declared")]
    UndeclaredEndpoint { line: usize, name: String },
    #[error("line {line}: duplicate declaration of `{name}`")]
    DuplicateDeclaration { line: usize, name: String },
    #[error("self-loop on `{0}`")]
    SelfLoop(String),
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("invalid variable name `{0}`")]
    InvalidName(String),
    #[error("variable `{0}` appears in more than one of the argument sets")]
    OverlappingSets(String),
}

/// True when `name` matches `[A-Za-z_][A-Za-z0-9_]*`.
pub fn is_valid_name(name: &str) -> bool {
    let mut chars = name.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Admg {
    names: Vec<String>,
    index: BTreeMap<String, usize>,
    parents: Vec<BTreeSet<usize>>,
    children: Vec<BTreeSet<usize>>,
    spouses: Vec<BTreeSet<usize>>,
}

impl Admg {
    /// Builds a graph from node names and edge lists, checking every invariant.
    pub fn new<N, D, B>(nodes: N, directed: D, bidirected: B) -> Result<Self, GraphError>
    where
        N: IntoIterator,
        N::Item: AsRef<str>,
        D: IntoIterator<Item = (String, String)>,
        B: IntoIterator<Item = (String, String)>,
    {
        let mut names = BTreeSet::new();
        for node in nodes {
            let node = node.as_ref();
            if !is_valid_name(node) {
                return Err(GraphError::InvalidName(node.to_string()));
            }
            if !names.insert(node.to_string()) {
                return Err(GraphError::DuplicateDeclaration {
                    line: 0,
                    name: node.to_string(),
                });
            }
        }
        let names: Vec<String> = names.into_iter().collect();
        let index: BTreeMap<String, usize> = names
            .iter()
            .enumerate()
            .map(|(i, n)| (n.clone(), i))
            .collect();
        let n = names.len();
        let mut graph = Admg {
            names,
            index,
            parents: vec![BTreeSet::new(); n],
            children: vec![BTreeSet::new(); n],
            spouses: vec![BTreeSet::new(); n],
        };
        for (a, b) in directed {
            let (ia, ib) = (graph.require(&a)?, graph.require(&b)?);
            if ia == ib {
                return Err(GraphError::SelfLoop(a));
            }
            graph.parents[ib].insert(ia);
            graph.children[ia].insert(ib);
        }
        for (a, b) in bidirected {
            let (ia, ib) = (graph.require(&a)?, graph.require(&b)?);
            if ia == ib {
                return Err(GraphError::SelfLoop(a));
            }
            graph.spouses[ia].insert(ib);
            graph.spouses[ib].insert(ia);
        }
        if let Some(cycle) = graph.find_cycle() {
            return Err(GraphError::Cycle(
                cycle.into_iter().map(|i| graph.names[i].clone()).collect(),
            ));
        }
        Ok(graph)
    }

    /// Convenience constructor for string-slice edge lists.
    pub fn from_edges(
        nodes: &[&str],
        directed: &[(&str, &str)],
        bidirected: &[(&str, &str)],
    ) -> Result<Self, GraphError> {
        Admg::new(
            nodes.iter().copied(),
            directed.iter().map(|(a, b)| (a.to_string(), b.to_string())),
            bidirected.iter().map(|(a, b)| (a.to_string(), b.to_string())),
        )
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn name(&self, i: usize) -> &str {
        &self.names[i]
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn contains(&self, name: &str) -> bool {
        self.index.contains_key(name)
    }

    pub fn require(&self, name: &str) -> Result<usize, GraphError> {
        self.index_of(name)
            .ok_or_else(|| GraphError::UnknownVariable(name.to_string()))
    }

    pub fn parents_of(&self, i: usize) -> &BTreeSet<usize> {
        &self.parents[i]
    }

    pub fn children_of(&self, i: usize) -> &BTreeSet<usize> {
        &self.children[i]
    }

    pub fn spouses_of(&self, i: usize) -> &BTreeSet<usize> {
        &self.spouses[i]
    }

    /// Parent names of `name`, sorted.
    pub fn parents(&self, name: &str) -> Result<Vec<String>, GraphError> {
        let i = self.require(name)?;
        Ok(self.parents[i].iter().map(|&p| self.names[p].clone()).collect())
    }

    pub fn has_directed(&self, from: &str, to: &str) -> bool {
        match (self.index_of(from), self.index_of(to)) {
            (Some(a), Some(b)) => self.children[a].contains(&b),
            _ => false,
        }
    }

    pub fn has_bidirected(&self, a: &str, b: &str) -> bool {
        match (self.index_of(a), self.index_of(b)) {
            (Some(a), Some(b)) => self.spouses[a].contains(&b),
            _ => false,
        }
    }

    /// Adjacent through any edge.
    pub fn adjacent_idx(&self, a: usize, b: usize) -> bool {
        self.children[a].contains(&b) || self.parents[a].contains(&b) || self.spouses[a].contains(&b)
    }

    /// Directed edges as name pairs, sorted.
    pub fn directed_edges(&self) -> Vec<(String, String)> {
        let mut out = Vec::new();
        for (a, kids) in self.children.iter().enumerate() {
            for &b in kids {
                out.push((self.names[a].clone(), self.names[b].clone()));
            }
        }
        out
    }

    /// Bidirected edges as canonical name pairs (smaller name first), sorted.
    pub fn bidirected_edges(&self) -> Vec<(String, String)> {
        let mut out = Vec::new();
        for (a, sp) in self.spouses.iter().enumerate() {
            for &b in sp.range(a + 1..) {
                out.push((self.names[a].clone(), self.names[b].clone()));
            }
        }
        out
    }

    fn find_cycle(&self) -> Option<Vec<usize>> {
        // 0 = unvisited, 1 = on stack, 2 = done
        let n = self.len();
        let mut state = vec![0u8; n];
        let mut stack: Vec<usize> = Vec::new();
        fn visit(
            g: &Admg,
            v: usize,
            state: &mut [u8],
            stack: &mut Vec<usize>,
        ) -> Option<Vec<usize>> {
            state[v] = 1;
            stack.push(v);
            for &c in &g.children[v] {
                if state[c] == 1 {
                    let start = stack.iter().position(|&s| s == c).unwrap();
                    let mut cycle = stack[start..].to_vec();
                    cycle.push(c);
                    return Some(cycle);
                }
                if state[c] == 0 {
                    if let Some(cycle) = visit(g, c, state, stack) {
                        return Some(cycle);
                    }
                }
            }
            stack.pop();
            state[v] = 2;
            None
        }
        for v in 0..n {
            if state[v] == 0 {
                if let Some(cycle) = visit(self, v, &mut state, &mut stack) {
                    return Some(cycle);
                }
            }
        }
        None
    }

    /// Kahn's algorithm, always releasing the smallest available index first.
    pub fn topological_order_idx(&self) -> Vec<usize> {
        let n = self.len();
        let mut indegree: Vec<usize> = self.parents.iter().map(|p| p.len()).collect();
        let mut ready: BTreeSet<usize> = (0..n).filter(|&i| indegree[i] == 0).collect();
        let mut order = Vec::with_capacity(n);
        while let Some(&v) = ready.iter().next() {
            ready.remove(&v);
            order.push(v);
            for &c in &self.children[v] {
                indegree[c] -= 1;
                if indegree[c] == 0 {
                    ready.insert(c);
                }
            }
        }
        order
    }

    pub fn topological_order(&self) -> Vec<String> {
        self.topological_order_idx()
            .into_iter()
            .map(|i| self.names[i].clone())
            .collect()
    }

    /// Ancestors of `set`, including the set itself.
    pub fn ancestors_idx(&self, set: &BTreeSet<usize>) -> BTreeSet<usize> {
        self.closure(set, |v| &self.parents[v])
    }

    /// Descendants of `set`, including the set itself.
    pub fn descendants_idx(&self, set: &BTreeSet<usize>) -> BTreeSet<usize> {
        self.closure(set, |v| &self.children[v])
    }

    fn closure<'a>(
        &'a self,
        set: &BTreeSet<usize>,
        next: impl Fn(usize) -> &'a BTreeSet<usize>,
    ) -> BTreeSet<usize> {
        let mut seen = set.clone();
        let mut queue: VecDeque<usize> = set.iter().copied().collect();
        while let Some(v) = queue.pop_front() {
            for &w in next(v) {
                if seen.insert(w) {
                    queue.push_back(w);
                }
            }
        }
        seen
    }

    pub fn ancestors(&self, names: &BTreeSet<String>) -> Result<BTreeSet<String>, GraphError> {
        let idx = self.indices(names.iter())?;
        Ok(self.to_names(&self.ancestors_idx(&idx)))
    }

    pub fn descendants(&self, names: &BTreeSet<String>) -> Result<BTreeSet<String>, GraphError> {
        let idx = self.indices(names.iter())?;
        Ok(self.to_names(&self.descendants_idx(&idx)))
    }

    pub fn indices<I, S>(&self, names: I) -> Result<BTreeSet<usize>, GraphError>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        names.into_iter().map(|n| self.require(n.as_ref())).collect()
    }

    pub fn to_names(&self, idx: &BTreeSet<usize>) -> BTreeSet<String> {
        idx.iter().map(|&i| self.names[i].clone()).collect()
    }

    /// The subgraph induced by `keep`.
    pub fn induced(&self, keep: &BTreeSet<String>) -> Result<Admg, GraphError> {
        let idx = self.indices(keep.iter())?;
        let directed = self
            .directed_edges()
            .into_iter()
            .filter(|(a, b)| keep.contains(a) && keep.contains(b));
        let bidirected = self
            .bidirected_edges()
            .into_iter()
            .filter(|(a, b)| keep.contains(a) && keep.contains(b));
        debug_assert_eq!(idx.len(), keep.len());
        Admg::new(keep.iter(), directed, bidirected)
    }

    /// Removes every edge with an arrowhead at a member of `set`: directed
    /// edges into the set and bidirected edges touching it.
    pub fn without_incoming(&self, set: &BTreeSet<String>) -> Admg {
        let directed = self
            .directed_edges()
            .into_iter()
            .filter(|(_, b)| !set.contains(b));
        let bidirected = self
            .bidirected_edges()
            .into_iter()
            .filter(|(a, b)| !set.contains(a) && !set.contains(b));
        Admg::new(self.names.iter(), directed, bidirected).expect("edge removal keeps invariants")
    }

    /// Removes directed edges leaving a member of `set`.
    pub fn without_outgoing(&self, set: &BTreeSet<String>) -> Admg {
        let directed = self
            .directed_edges()
            .into_iter()
            .filter(|(a, _)| !set.contains(a));
        Admg::new(self.names.iter(), directed, self.bidirected_edges())
            .expect("edge removal keeps invariants")
    }

    /// d-separation of `a` and `b` given `z`. Each bidirected edge behaves as
    /// a distinct hidden common cause, so both of its endpoints carry
    /// arrowheads.
    pub fn d_separated<S: AsRef<str>>(&self, a: &[S], b: &[S], z: &[S]) -> Result<bool, GraphError> {
        let ia = self.indices(a.iter())?;
        let ib = self.indices(b.iter())?;
        let iz = self.indices(z.iter())?;
        check_disjoint(self, &ia, &ib, &iz)?;
        Ok(self.d_separated_idx(&ia, &ib, &iz))
    }

    pub fn d_separated_idx(
        &self,
        a: &BTreeSet<usize>,
        b: &BTreeSet<usize>,
        z: &BTreeSet<usize>,
    ) -> bool {
        let reached = self.d_connected_from(a, z);
        !b.iter().any(|&v| reached[v])
    }

    /// Nodes reachable from `sources` along paths that are open given `z`.
    fn d_connected_from(&self, sources: &BTreeSet<usize>, z: &BTreeSet<usize>) -> Vec<bool> {
        let n = self.len();
        let anc_z = self.ancestors_idx(z);
        // visited[v][h]: arrived at v via an edge with (h = 1) or without an arrowhead at v
        let mut visited = vec![[false; 2]; n];
        let mut reached = vec![false; n];
        let mut queue = VecDeque::new();
        for &s in sources {
            visited[s][0] = true;
            queue.push_back((s, false));
        }
        while let Some((v, into)) = queue.pop_front() {
            reached[v] = true;
            let pass_non_collider = !z.contains(&v);
            let pass_collider = into && anc_z.contains(&v);
            // leaving through a tail at v: never a collider
            if pass_non_collider {
                for &c in &self.children[v] {
                    if !visited[c][1] {
                        visited[c][1] = true;
                        queue.push_back((c, true));
                    }
                }
            }
            // leaving through an arrowhead at v: collider iff we arrived on one
            let pass_head = if into { pass_collider } else { pass_non_collider };
            if pass_head {
                for &p in &self.parents[v] {
                    if !visited[p][0] {
                        visited[p][0] = true;
                        queue.push_back((p, false));
                    }
                }
                for &s in &self.spouses[v] {
                    if !visited[s][1] {
                        visited[s][1] = true;
                        queue.push_back((s, true));
                    }
                }
            }
        }
        reached
    }

    /// Connected components of the bidirected part, each sorted, ordered by
    /// smallest member.
    pub fn c_components(&self) -> Vec<BTreeSet<String>> {
        self.c_components_idx()
            .iter()
            .map(|c| self.to_names(c))
            .collect()
    }

    pub fn c_components_idx(&self) -> Vec<BTreeSet<usize>> {
        let n = self.len();
        let mut seen = vec![false; n];
        let mut out = Vec::new();
        for start in 0..n {
            if seen[start] {
                continue;
            }
            let mut comp = BTreeSet::new();
            let mut queue = VecDeque::from([start]);
            seen[start] = true;
            while let Some(v) = queue.pop_front() {
                comp.insert(v);
                for &s in &self.spouses[v] {
                    if !seen[s] {
                        seen[s] = true;
                        queue.push_back(s);
                    }
                }
            }
            out.push(comp);
        }
        out
    }

    /// One conditional independence per non-adjacent pair, using the smallest
    /// separating set among the pair's ancestors (ties broken
    /// lexicographically). Pairs with no such set are skipped.
    pub fn testable_implications(&self) -> Vec<CiStatement> {
        let mut out = Vec::new();
        for u in 0..self.len() {
            for v in u + 1..self.len() {
                if self.adjacent_idx(u, v) {
                    continue;
                }
                let pair: BTreeSet<usize> = [u, v].into();
                let candidates: Vec<usize> = self
                    .ancestors_idx(&pair)
                    .into_iter()
                    .filter(|c| !pair.contains(c))
                    .collect();
                let left = BTreeSet::from([u]);
                let right = BTreeSet::from([v]);
                let found = (0..=candidates.len()).find_map(|k| {
                    candidates.iter().copied().combinations(k).find(|combo| {
                        let z: BTreeSet<usize> = combo.iter().copied().collect();
                        self.d_separated_idx(&left, &right, &z)
                    })
                });
                if let Some(z) = found {
                    out.push(CiStatement {
                        left: BTreeSet::from([self.names[u].clone()]),
                        right: BTreeSet::from([self.names[v].clone()]),
                        given: z.into_iter().map(|i| self.names[i].clone()).collect(),
                    });
                }
            }
        }
        out
    }

    /// Serializes in the line-based graph format.
    pub fn to_text(&self) -> String {
        self.to_string()
    }
}

fn check_disjoint(
    g: &Admg,
    a: &BTreeSet<usize>,
    b: &BTreeSet<usize>,
    z: &BTreeSet<usize>,
) -> Result<(), GraphError> {
    if let Some(&v) = a.intersection(b).chain(a.intersection(z)).chain(b.intersection(z)).next() {
        return Err(GraphError::OverlappingSets(g.names[v].clone()));
    }
    Ok(())
}

impl fmt::Display for Admg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for name in &self.names {
            writeln!(f, "var {name}")?;
        }
        for (a, b) in self.directed_edges() {
            writeln!(f, "{a} -> {b}")?;
        }
        for (a, b) in self.bidirected_edges() {
            writeln!(f, "{a} <-> {b}")?;
        }
        Ok(())
    }
}

impl std::str::FromStr for Admg {
    type Err = GraphError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_graph(s)
    }
}

/// A conditional independence statement `left _||_ right | given`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct CiStatement {
    pub left: BTreeSet<String>,
    pub right: BTreeSet<String>,
    pub given: BTreeSet<String>,
}

impl fmt::Display for CiStatement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let join = |s: &BTreeSet<String>| s.iter().join(",");
        write!(f, "{} _||_ {}", join(&self.left), join(&self.right))?;
        if !self.given.is_empty() {
            write!(f, " | {}", join(&self.given))?;
        }
        Ok(())
    }
}

/// One meaningful line of a graph-format file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) enum GraphLine {
    Var(String),
    Directed(String, String),
    Bidirected(String, String),
    Undirected(String, String),
    Missing(String),
}

/// Name tokens plus their 1-based columns, for error reporting.
#[derive(Debug, Clone)]
pub(crate) struct ParsedLine {
    pub line: usize,
    pub item: GraphLine,
    pub columns: (usize, usize),
}

/// Splits graph-format text into statements. `--` and `missing` lines are
/// only accepted when the corresponding flag is set.
pub(crate) fn scan_lines(
    text: &str,
    allow_undirected: bool,
    allow_missing: bool,
) -> Result<Vec<ParsedLine>, GraphError> {
    let mut out = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = lineno + 1;
        let content = match raw.find('#') {
            Some(p) => &raw[..p],
            None => raw,
        };
        if content.trim().is_empty() {
            continue;
        }
        let lead = content.len() - content.trim_start().len();
        let body = content.trim();
        let syntax = |column: usize, message: String| GraphError::Syntax {
            line,
            column,
            message,
        };
        let keyword = body.split_whitespace().next().unwrap_or("");
        if keyword == "var" || (allow_missing && keyword == "missing") {
            let rest = body[keyword.len()..].trim();
            let col = lead + 1 + body.find(rest).unwrap_or(keyword.len());
            if rest.is_empty() {
                return Err(syntax(lead + keyword.len() + 1, format!("`{keyword}` needs a variable name")));
            }
            if !is_valid_name(rest) {
                return Err(syntax(col, format!("invalid variable name `{rest}`")));
            }
            let item = if keyword == "var" {
                GraphLine::Var(rest.to_string())
            } else {
                GraphLine::Missing(rest.to_string())
            };
            out.push(ParsedLine {
                line,
                item,
                columns: (col, col),
            });
            continue;
        }
        let (pos, op) = if let Some(p) = body.find("<->") {
            (p, "<->")
        } else if let Some(p) = body.find("->") {
            (p, "->")
        } else if let (true, Some(p)) = (allow_undirected, body.find("--")) {
            (p, "--")
        } else {
            return Err(syntax(lead + 1, format!("expected `var NAME` or an edge, found `{body}`")));
        };
        let left = body[..pos].trim();
        let right = body[pos + op.len()..].trim();
        let left_col = lead + 1;
        let right_col = lead + pos + op.len() + 1 + (body[pos + op.len()..].len() - body[pos + op.len()..].trim_start().len());
        if !is_valid_name(left) {
            return Err(syntax(left_col, format!("invalid endpoint `{left}`")));
        }
        if !is_valid_name(right) {
            return Err(syntax(right_col, format!("invalid endpoint `{right}`")));
        }
        let (l, r) = (left.to_string(), right.to_string());
        let item = match op {
            "<->" => GraphLine::Bidirected(l, r),
            "->" => GraphLine::Directed(l, r),
            _ => GraphLine::Undirected(l, r),
        };
        out.push(ParsedLine {
            line,
            item,
            columns: (left_col, right_col),
        });
    }
    Ok(out)
}

/// Collects declared names, rejecting duplicates and undeclared endpoints.
pub(crate) fn check_declarations(
    lines: &[ParsedLine],
    extra_declared: &BTreeSet<String>,
) -> Result<BTreeSet<String>, GraphError> {
    let mut declared = BTreeSet::new();
    for l in lines {
        if let GraphLine::Var(name) = &l.item {
            if extra_declared.contains(name) || !declared.insert(name.clone()) {
                return Err(GraphError::DuplicateDeclaration {
                    line: l.line,
                    name: name.clone(),
                });
            }
        }
    }
    for l in lines {
        let endpoints = match &l.item {
            GraphLine::Directed(a, b) | GraphLine::Bidirected(a, b) | GraphLine::Undirected(a, b) => {
                [a, b]
            }
            _ => continue,
        };
        for name in endpoints {
            if !declared.contains(name) && !extra_declared.contains(name) {
                return Err(GraphError::UndeclaredEndpoint {
                    line: l.line,
                    name: name.clone(),
                });
            }
        }
        if endpoints[0] == endpoints[1] {
            return Err(GraphError::SelfLoop(endpoints[0].clone()));
        }
    }
    Ok(declared)
}

/// Parses the line-based graph format: `var NAME`, `A -> B`, `A <-> B`,
/// with `#` comments.
pub fn parse_graph(text: &str) -> Result<Admg, GraphError> {
    let lines = scan_lines(text, false, false)?;
    let declared = check_declarations(&lines, &BTreeSet::new())?;
    let mut directed = Vec::new();
    let mut bidirected = Vec::new();
    for l in lines {
        match l.item {
            GraphLine::Directed(a, b) => directed.push((a, b)),
            GraphLine::Bidirected(a, b) => bidirected.push((a, b)),
            _ => {}
        }
    }
    Admg::new(declared.iter(), directed, bidirected)
}

/// Random ADMG over nodes `V0..V{n-1}`: directed edges follow a random
/// permutation (so the result is acyclic) and each pair independently gets
/// a bidirected edge.
pub fn random_admg<R: Rng + ?Sized>(n: usize, p_directed: f64, p_bidirected: f64, rng: &mut R) -> Admg {
    let names: Vec<String> = (0..n).map(|i| format!("V{i}")).collect();
    let mut order: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = rng.gen_range(0..=i);
        order.swap(i, j);
    }
    let mut directed = Vec::new();
    let mut bidirected = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.gen_bool(p_directed) {
                directed.push((names[order[i]].clone(), names[order[j]].clone()));
            }
            if rng.gen_bool(p_bidirected) {
                bidirected.push((names[order[i]].clone(), names[order[j]].clone()));
            }
        }
    }
    Admg::new(names.iter(), directed, bidirected).expect("random construction is acyclic")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn backdoor() -> Admg {
        Admg::from_edges(&["X", "Y", "Z"], &[("Z", "X"), ("Z", "Y"), ("X", "Y")], &[]).unwrap()
    }

    #[test]
    fn parses_minimal_graphs() {
        let g = parse_graph("var X\nvar Y\nX -> Y").unwrap();
        assert_eq!(g.len(), 2);
        assert_eq!(g.directed_edges(), vec![("X".into(), "Y".into())]);
        let g = parse_graph("var X\nvar Y\nX <-> Y").unwrap();
        assert_eq!(g.bidirected_edges(), vec![("X".into(), "Y".into())]);
        assert!(g.directed_edges().is_empty());
    }

    #[test]
    fn rejects_cycles() {
        let err = parse_graph("var X\nvar Y\nX -> Y\nY -> X").unwrap_err();
        assert!(matches!(err, GraphError::Cycle(_)), "{err}");
    }

    #[test]
    fn reports_parse_errors_with_positions() {
        match parse_graph("var X\n  X => Y\n").unwrap_err() {
            GraphError::Syntax { line, column, .. } => assert_eq!((line, column), (2, 3)),
            e => panic!("unexpected {e}"),
        }
        match parse_graph("var X\nX -> Y").unwrap_err() {
            GraphError::UndeclaredEndpoint { line, name } => {
                assert_eq!((line, name.as_str()), (2, "Y"))
            }
            e => panic!("unexpected {e}"),
        }
        assert!(matches!(
            parse_graph("var X\nvar X").unwrap_err(),
            GraphError::DuplicateDeclaration { line: 2, .. }
        ));
        assert!(matches!(
            parse_graph("var X\nX -> X").unwrap_err(),
            GraphError::SelfLoop(_)
        ));
    }

    #[test]
    fn tolerates_whitespace_comments_and_order() {
        let g = parse_graph("# header\nZ->X   # edge first\n\tvar Z\nvar   X\n  X<->Z\n").unwrap();
        assert!(g.has_directed("Z", "X"));
        assert!(g.has_bidirected("X", "Z"));
        assert!(g.has_bidirected("Z", "X"));
        assert_eq!(g.bidirected_edges().len(), 1);
    }

    #[test]
    fn serialization_round_trips() {
        let g = parse_graph("var B\nvar A\nvar C\nA -> B\nC <-> A\nB -> C").unwrap();
        let text = g.to_text();
        assert_eq!(text, "var A\nvar B\nvar C\nA -> B\nB -> C\nA <-> C\n");
        assert_eq!(parse_graph(&text).unwrap(), g);
    }

    #[test]
    fn d_separation_basics() {
        let chain = Admg::from_edges(&["X", "Y", "Z"], &[("X", "Z"), ("Z", "Y")], &[]).unwrap();
        assert!(chain.d_separated(&["X"], &["Y"], &["Z"]).unwrap());
        assert!(!chain.d_separated::<&str>(&["X"], &["Y"], &[]).unwrap());

        let collider = Admg::from_edges(&["X", "Y", "Z"], &[("X", "Z"), ("Y", "Z")], &[]).unwrap();
        assert!(collider.d_separated::<&str>(&["X"], &["Y"], &[]).unwrap());
        assert!(!collider.d_separated(&["X"], &["Y"], &["Z"]).unwrap());

        assert!(!backdoor().d_separated::<&str>(&["Z"], &["Y"], &[]).unwrap());
    }

    #[test]
    fn bidirected_endpoints_act_as_colliders() {
        // X <-> Z <-> Y: Z is a collider
        let g = Admg::from_edges(&["X", "Y", "Z"], &[], &[("X", "Z"), ("Z", "Y")]).unwrap();
        assert!(g.d_separated::<&str>(&["X"], &["Y"], &[]).unwrap());
        assert!(!g.d_separated(&["X"], &["Y"], &["Z"]).unwrap());
        // a descendant of the collider opens it too
        let g = Admg::from_edges(&["W", "X", "Y", "Z"], &[("Z", "W")], &[("X", "Z"), ("Z", "Y")]).unwrap();
        assert!(!g.d_separated(&["X"], &["Y"], &["W"]).unwrap());
    }

    #[test]
    fn d_separation_errors() {
        let g = backdoor();
        assert_eq!(
            g.d_separated(&["X"], &["Q"], &["Z"]).unwrap_err(),
            GraphError::UnknownVariable("Q".into())
        );
        assert!(matches!(
            g.d_separated(&["X"], &["Y"], &["X"]).unwrap_err(),
            GraphError::OverlappingSets(_)
        ));
    }

    #[test]
    fn c_components_examples() {
        assert_eq!(backdoor().c_components().len(), 3);
        let bow = Admg::from_edges(&["X", "Y"], &[("X", "Y")], &[("X", "Y")]).unwrap();
        assert_eq!(bow.c_components(), vec![BTreeSet::from(["X".to_string(), "Y".to_string()])]);
        let g = Admg::from_edges(&["X", "Y", "Z", "W"], &[], &[("X", "Y"), ("Y", "Z")]).unwrap();
        let comps = g.c_components();
        assert_eq!(comps.len(), 2);
        assert!(comps.contains(&BTreeSet::from(["X".into(), "Y".into(), "Z".into()])));
    }

    #[test]
    fn testable_implications_examples() {
        assert!(backdoor().testable_implications().is_empty());
        let expected = vec![CiStatement {
            left: BTreeSet::from(["X".into()]),
            right: BTreeSet::from(["Y".into()]),
            given: BTreeSet::from(["Z".into()]),
        }];
        let chain = Admg::from_edges(&["X", "Y", "Z"], &[("X", "Z"), ("Z", "Y")], &[]).unwrap();
        assert_eq!(chain.testable_implications(), expected);
        let fork = Admg::from_edges(&["X", "Y", "Z"], &[("Z", "X"), ("Z", "Y")], &[]).unwrap();
        assert_eq!(fork.testable_implications(), expected);
        assert_eq!(expected[0].to_string(), "X _||_ Y | Z");
    }

    #[test]
    fn separating_sets_prefer_small_then_lexicographic() {
        // A -> C, B -> C, A -> D, B -> D: A and B are marginally independent
        let g = Admg::from_edges(&["A", "B", "C", "D"], &[("A", "C"), ("B", "C"), ("A", "D"), ("B", "D")], &[])
            .unwrap();
        let imps = g.testable_implications();
        assert_eq!(imps[0].to_string(), "A _||_ B");
        assert_eq!(imps[1].to_string(), "C _||_ D | A,B");
    }

    #[test]
    fn topological_order_is_lexicographic_among_ties() {
        let g = Admg::from_edges(&["C", "B", "A"], &[("C", "A")], &[]).unwrap();
        assert_eq!(g.topological_order(), vec!["B", "C", "A"]);
    }
}
