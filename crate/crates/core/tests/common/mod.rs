//! Reference implementations used as oracles. They share no code with the
//! library routines they check: models are evaluated by re-reading the
//! structural tables, d-separation by enumerating paths, and CPDAGs by
//! grouping every DAG into its equivalence class.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use causal_engine::graph::Admg;
use causal_engine::scm::{DiscreteScm, ParentRef};

// ---------------------------------------------------------------------------
// Structural models by table lookup

/// Every exogenous state with its probability, first exogenous variable
/// fastest.
pub fn exo_states(m: &DiscreteScm) -> Vec<(Vec<usize>, f64)> {
    let exo = m.exogenous();
    let mut out = vec![(Vec::new(), 1.0)];
    for e in exo {
        let mut next = Vec::new();
        for (state, p) in &out {
            for (k, q) in e.probs.iter().enumerate() {
                let mut s: Vec<usize> = state.clone();
                s.push(k);
                next.push((s, p * q));
            }
        }
        out = next;
    }
    out
}

/// Endogenous values for exogenous state `u`, with `fixed` overriding
/// variables. Evaluates by repeated sweeps until nothing changes, so no
/// ordering is assumed.
pub fn evaluate(m: &DiscreteScm, u: &[usize], fixed: &BTreeMap<usize, usize>) -> Vec<usize> {
    let endo = m.endogenous();
    let mut values: Vec<Option<usize>> = (0..endo.len()).map(|i| fixed.get(&i).copied()).collect();
    loop {
        let mut progress = false;
        for (i, v) in endo.iter().enumerate() {
            if values[i].is_some() {
                continue;
            }
            let inputs: Option<Vec<(usize, usize)>> = v
                .parents
                .iter()
                .map(|p| match *p {
                    ParentRef::Exogenous(k) => Some((u[k], m.exogenous()[k].domain.len())),
                    ParentRef::Endogenous(k) => values[k].map(|x| (x, endo[k].domain.len())),
                })
                .collect();
            if let Some(inputs) = inputs {
                let row = inputs.iter().fold(0, |acc, &(x, size)| acc * size + x);
                values[i] = Some(v.table[row]);
                progress = true;
            }
        }
        if !progress {
            break;
        }
    }
    values.into_iter().map(|v| v.expect("acyclic model")).collect()
}

pub fn index_of(m: &DiscreteScm, name: &str) -> usize {
    m.endogenous().iter().position(|v| v.name == name).unwrap()
}

pub fn value_of(m: &DiscreteScm, var: usize, value: &str) -> usize {
    m.endogenous()[var].domain.iter().position(|v| v == value).unwrap()
}

/// `P(event | do(fixed))` by the truncated product over exogenous states.
pub fn interventional(m: &DiscreteScm, fixed: &BTreeMap<usize, usize>, event: &[(usize, usize)]) -> f64 {
    exo_states(m)
        .into_iter()
        .filter(|(u, _)| {
            let v = evaluate(m, u, fixed);
            event.iter().all(|&(i, x)| v[i] == x)
        })
        .map(|(_, p)| p)
        .sum()
}

/// `P(target in world do(antecedent) | evidence)` by enumeration, `None`
/// when the evidence is impossible.
pub fn counterfactual(
    m: &DiscreteScm,
    antecedent: &BTreeMap<usize, usize>,
    target: &[(usize, usize)],
    evidence: &[(usize, usize)],
) -> Option<f64> {
    let (mut num, mut den) = (0.0, 0.0);
    for (u, p) in exo_states(m) {
        let factual = evaluate(m, &u, &BTreeMap::new());
        if !evidence.iter().all(|&(i, x)| factual[i] == x) {
            continue;
        }
        den += p;
        let hypo = evaluate(m, &u, antecedent);
        if target.iter().all(|&(i, x)| hypo[i] == x) {
            num += p;
        }
    }
    (den > 0.0).then(|| num / den)
}

/// `E[Y_{x, M_{x'}}]` with outcome values coded by domain position.
pub fn nested_mean(m: &DiscreteScm, x: usize, med: usize, y: usize, xv: usize, x_for_m: usize) -> f64 {
    exo_states(m)
        .into_iter()
        .map(|(u, p)| {
            let mv = evaluate(m, &u, &BTreeMap::from([(x, x_for_m)]))[med];
            p * evaluate(m, &u, &BTreeMap::from([(x, xv), (med, mv)]))[y] as f64
        })
        .sum()
}

// ---------------------------------------------------------------------------
// d-separation by path enumeration

#[derive(Clone, Copy, PartialEq)]
enum Mark {
    Tail,
    Arrow,
}

/// Edges at `v` as `(neighbour, mark at v, mark at neighbour)`.
fn incident(g: &Admg, v: usize) -> Vec<(usize, Mark, Mark)> {
    let mut out = Vec::new();
    for &c in g.children_of(v) {
        out.push((c, Mark::Tail, Mark::Arrow));
    }
    for &p in g.parents_of(v) {
        out.push((p, Mark::Arrow, Mark::Tail));
    }
    for &s in g.spouses_of(v) {
        out.push((s, Mark::Arrow, Mark::Arrow));
    }
    out
}

fn descendants_or_self(g: &Admg, v: usize) -> BTreeSet<usize> {
    let mut seen = BTreeSet::from([v]);
    let mut stack = vec![v];
    while let Some(x) = stack.pop() {
        for &c in g.children_of(x) {
            if seen.insert(c) {
                stack.push(c);
            }
        }
    }
    seen
}

/// True when no simple path between `a` and `b` is active given `z`.
pub fn d_separated_by_paths(g: &Admg, a: &BTreeSet<usize>, b: &BTreeSet<usize>, z: &BTreeSet<usize>) -> bool {
    let active_collider: Vec<bool> = (0..g.len())
        .map(|v| descendants_or_self(g, v).iter().any(|d| z.contains(d)))
        .collect();
    fn walk(
        g: &Admg,
        v: usize,
        arrived: Mark,
        on_path: &mut Vec<bool>,
        b: &BTreeSet<usize>,
        z: &BTreeSet<usize>,
        active_collider: &[bool],
    ) -> bool {
        for (w, here, there) in incident(g, v) {
            if on_path[w] {
                continue;
            }
            let collider = arrived == Mark::Arrow && here == Mark::Arrow;
            let open = if collider { active_collider[v] } else { !z.contains(&v) };
            if !open {
                continue;
            }
            if b.contains(&w) {
                return true;
            }
            on_path[w] = true;
            let found = walk(g, w, there, on_path, b, z, active_collider);
            on_path[w] = false;
            if found {
                return true;
            }
        }
        false
    }
    for &s in a {
        let mut on_path = vec![false; g.len()];
        on_path[s] = true;
        for (w, _, there) in incident(g, s) {
            if b.contains(&w) {
                return false;
            }
            if on_path[w] {
                continue;
            }
            on_path[w] = true;
            if walk(g, w, there, &mut on_path, b, z, &active_collider) {
                return false;
            }
            on_path[w] = false;
        }
    }
    true
}

// ---------------------------------------------------------------------------
// CPDAGs by equivalence-class enumeration

/// Every DAG on `n` labelled nodes as a list of directed edges.
pub fn all_dags(n: usize) -> Vec<Vec<(usize, usize)>> {
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
    let total = 3usize.pow(pairs.len() as u32);
    (0..total)
        .filter_map(|mut code| {
            let mut edges = Vec::new();
            for &(i, j) in &pairs {
                match code % 3 {
                    1 => edges.push((i, j)),
                    2 => edges.push((j, i)),
                    _ => {}
                }
                code /= 3;
            }
            is_acyclic(n, &edges).then_some(edges)
        })
        .collect()
}

fn is_acyclic(n: usize, edges: &[(usize, usize)]) -> bool {
    let mut indeg = vec![0; n];
    for &(_, b) in edges {
        indeg[b] += 1;
    }
    let mut ready: Vec<usize> = (0..n).filter(|&v| indeg[v] == 0).collect();
    let mut seen = 0;
    while let Some(v) = ready.pop() {
        seen += 1;
        for &(a, b) in edges {
            if a == v {
                indeg[b] -= 1;
                if indeg[b] == 0 {
                    ready.push(b);
                }
            }
        }
    }
    seen == n
}

type ClassKey = (BTreeSet<(usize, usize)>, BTreeSet<(usize, usize, usize)>);

/// Skeleton and unshielded colliders: two DAGs are Markov equivalent
/// exactly when these agree.
fn class_key(edges: &[(usize, usize)]) -> ClassKey {
    let skeleton: BTreeSet<(usize, usize)> = edges.iter().map(|&(a, b)| (a.min(b), a.max(b))).collect();
    let mut colliders = BTreeSet::new();
    for &(a, c) in edges {
        for &(b, c2) in edges {
            if c == c2 && a < b && !skeleton.contains(&(a, b)) {
                colliders.insert((a, c, b));
            }
        }
    }
    (skeleton, colliders)
}

/// Directed and undirected edges of the CPDAG of every DAG on `n` nodes,
/// keyed by the DAG's edge list.
pub fn brute_force_cpdags(n: usize) -> Vec<(Vec<(usize, usize)>, BTreeSet<(usize, usize)>, BTreeSet<(usize, usize)>)> {
    let dags = all_dags(n);
    let mut classes: BTreeMap<ClassKey, Vec<usize>> = BTreeMap::new();
    for (k, d) in dags.iter().enumerate() {
        classes.entry(class_key(d)).or_default().push(k);
    }
    let mut out = Vec::new();
    for ((skeleton, _), members) in &classes {
        let mut directed = BTreeSet::new();
        let mut undirected = BTreeSet::new();
        for &(a, b) in skeleton {
            let forward = members.iter().all(|&k| dags[k].contains(&(a, b)));
            let backward = members.iter().all(|&k| dags[k].contains(&(b, a)));
            if forward {
                directed.insert((a, b));
            } else if backward {
                directed.insert((b, a));
            } else {
                undirected.insert((a, b));
            }
        }
        for &k in members {
            out.push((dags[k].clone(), directed.clone(), undirected.clone()));
        }
    }
    out
}
