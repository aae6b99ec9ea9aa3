//! Searches for pairs of models that agree on one layer of the hierarchy and
//! disagree on a higher one.
//!
//! Models agreeing on a layer are grouped by the exact bit patterns of their
//! distributions, which is sound here because every probability involved is
//! a finite sum of products of the (dyadic) exogenous weights.

use std::collections::HashMap;

use itertools::Itertools;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::graph::Admg;
use crate::scm::{CounterfactualQuery, DiscreteScm, EndogenousVar, ExogenousVar, ParentRef};

use super::CausalQuery;

/// Two models that agree on what the lower layer can see and differ on a
/// higher-layer quantity.
#[derive(Debug, Clone)]
pub struct Witness {
    pub first: DiscreteScm,
    pub second: DiscreteScm,
    /// Largest difference on the agreeing layer (0 by construction).
    pub agreement_gap: f64,
    /// Largest difference on the distinguishing quantity.
    pub disagreement_gap: f64,
}

/// Scans `models` for two with identical `agree` signatures whose `differ`
/// signatures are at least `min_gap` apart. Cells that are NaN in either
/// signature (undefined conditionals) are skipped.
pub fn find_pair<A, D>(models: impl IntoIterator<Item = DiscreteScm>, agree: A, differ: D, min_gap: f64) -> Option<Witness>
where
    A: Fn(&DiscreteScm) -> Option<Vec<f64>>,
    D: Fn(&DiscreteScm) -> Option<Vec<f64>>,
{
    let mut groups: HashMap<Vec<u64>, Vec<(DiscreteScm, Vec<f64>)>> = HashMap::new();
    for m in models {
        let (Some(key), Some(sig)) = (agree(&m), differ(&m)) else { continue };
        let key: Vec<u64> = key.iter().map(|p| (p + 0.0).to_bits()).collect();
        let group = groups.entry(key).or_default();
        for (other, other_sig) in group.iter() {
            let gap = signature_gap(&sig, other_sig);
            if gap >= min_gap {
                return Some(Witness {
                    first: other.clone(),
                    second: m,
                    agreement_gap: 0.0,
                    disagreement_gap: gap,
                });
            }
        }
        if !group.iter().any(|(_, s)| signature_gap(s, &sig) == 0.0) {
            group.push((m, sig));
        }
    }
    None
}

fn signature_gap(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .filter(|(x, y)| x.is_finite() && y.is_finite())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Every binary model with the given uniform exogenous variables and
/// endogenous variables (each with its parent list, declared in order),
/// ranging over all structural tables.
pub fn enumerate_binary_scms(exogenous: &[&str], endogenous: &[(&str, &[&str])]) -> Vec<DiscreteScm> {
    let exo: Vec<ExogenousVar> = exogenous
        .iter()
        .map(|n| ExogenousVar {
            name: n.to_string(),
            domain: vec!["0".into(), "1".into()],
            probs: vec![0.5, 0.5],
        })
        .collect();
    let parents: Vec<Vec<ParentRef>> = endogenous
        .iter()
        .map(|(_, ps)| {
            ps.iter()
                .map(|p| match exogenous.iter().position(|e| e == p) {
                    Some(k) => ParentRef::Exogenous(k),
                    None => ParentRef::Endogenous(
                        endogenous
                            .iter()
                            .position(|(n, _)| n == p)
                            .unwrap_or_else(|| panic!("unknown parent `{p}`")),
                    ),
                })
                .collect()
        })
        .collect();
    let tables_per_var: Vec<Vec<Vec<usize>>> = parents
        .iter()
        .map(|ps| {
            let rows = 1usize << ps.len();
            (0..1usize << rows)
                .map(|f| (0..rows).map(|r| (f >> r) & 1).collect())
                .collect()
        })
        .collect();
    tables_per_var
        .iter()
        .map(|t| t.iter())
        .multi_cartesian_product()
        .map(|tables| {
            let endo = endogenous
                .iter()
                .zip(&parents)
                .zip(tables)
                .map(|(((name, _), ps), table)| EndogenousVar {
                    name: name.to_string(),
                    domain: vec!["0".into(), "1".into()],
                    parents: ps.clone(),
                    table: table.clone(),
                })
                .collect();
            DiscreteScm::new(exo.clone(), endo).expect("enumerated model is valid")
        })
        .collect()
}

/// Observational joint as a flat vector.
pub fn observational_signature(m: &DiscreteScm) -> Option<Vec<f64>> {
    m.observational_joint().ok().map(|j| j.mass().to_vec())
}

/// Observational joint followed by the joint under every single-variable
/// intervention.
pub fn interventional_signature(m: &DiscreteScm) -> Option<Vec<f64>> {
    let mut out = observational_signature(m)?;
    for v in m.endogenous() {
        for value in &v.domain {
            let j = m.interventional_joint(&[(v.name.clone(), value.clone())]).ok()?;
            out.extend_from_slice(j.mass());
        }
    }
    Some(out)
}

/// `P(outcome, condition | do(x)) / P(condition | do(x))` for every value
/// combination, NaN where the condition has probability zero.
pub fn query_signature(m: &DiscreteScm, q: &CausalQuery) -> Option<Vec<f64>> {
    let domains = |vars: &[String]| -> Option<Vec<Vec<String>>> {
        vars.iter().map(|v| m.domain(v).map(|d| d.to_vec())).collect()
    };
    let do_vars: Vec<String> = q.do_.iter().map(|a| a.var.clone()).collect();
    let out_vars: Vec<String> = q.outcome.iter().map(|a| a.var.clone()).collect();
    let cond_vars: Vec<String> = q.condition.iter().map(|a| a.var.clone()).collect();
    let (dd, od, cd) = (domains(&do_vars)?, domains(&out_vars)?, domains(&cond_vars)?);
    let mut sig = Vec::new();
    for dv in dd.iter().map(|d| d.iter()).multi_cartesian_product() {
        let intervention: Vec<(String, String)> = do_vars.iter().cloned().zip(dv.into_iter().cloned()).collect();
        let j = m.interventional_joint(&intervention).ok()?;
        for cv in cd.iter().map(|d| d.iter()).multi_cartesian_product() {
            let cond: Vec<(&str, &str)> = cond_vars.iter().map(|s| s.as_str()).zip(cv.iter().map(|s| s.as_str())).collect();
            let den = j.prob_of(&cond).ok()?;
            for ov in od.iter().map(|d| d.iter()).multi_cartesian_product() {
                let mut event = cond.clone();
                event.extend(out_vars.iter().map(|s| s.as_str()).zip(ov.iter().map(|s| s.as_str())));
                sig.push(if den > 0.0 { j.prob_of(&event).ok()? / den } else { f64::NAN });
            }
        }
    }
    Some(sig)
}

/// `P(Y_{X=x}=y | X=x', Y=y')` over all binary values of `x`, `y`, `x'`,
/// `y'`; NaN where the evidence has probability zero.
pub fn counterfactual_signature(m: &DiscreteScm, x: &str, y: &str) -> Option<Vec<f64>> {
    let bits = ["0", "1"];
    let mut sig = Vec::new();
    for (xv, yv, xe, ye) in itertools::iproduct!(bits, bits, bits, bits) {
        let q = CounterfactualQuery {
            target: vec![(y.to_string(), yv.to_string())],
            antecedent: vec![(x.to_string(), xv.to_string())],
            evidence: vec![(x.to_string(), xe.to_string()), (y.to_string(), ye.to_string())],
        };
        sig.push(m.counterfactual_query(&q).unwrap_or(f64::NAN));
    }
    Some(sig)
}

/// Two models over `X`, `Y` and one uniform exogenous `U` (`X := f(U)`,
/// `Y := g(X, U)`) with equal observational joints and different
/// `P(y | do(x))`.
pub fn layer_one_two_pair() -> Option<Witness> {
    let models = enumerate_binary_scms(&["U"], &[("X", &["U"]), ("Y", &["X", "U"])]);
    let q = CausalQuery::interventional(&["Y"], &["X"]);
    find_pair(models, observational_signature, |m| query_signature(m, &q), 1e-3)
}

/// Two models over `X`, `Y` with private uniform noise (`X := f(U1)`,
/// `Y := g(X, U2)`) that agree on the observational and every
/// single-intervention distribution but differ on `P(y_x | x', y')`.
pub fn layer_two_three_pair() -> Option<Witness> {
    let models = enumerate_binary_scms(&["U1", "U2"], &[("X", &["U1"]), ("Y", &["X", "U2"])]);
    find_pair(
        models,
        interventional_signature,
        |m| counterfactual_signature(m, "X", "Y"),
        1e-3,
    )
}

/// Parity models compatible with `g`: one uniform binary exogenous per
/// bidirected edge, one private binary noise term per variable with
/// `P(N = 1) = 1/4`, and each variable the XOR of a subset of its graph
/// parents, incident shared exogenous variables and its own noise. The
/// family is enumerated exhaustively when it has at most `budget` members,
/// otherwise `budget` members are drawn at random with `seed`.
pub fn parity_family(g: &Admg, budget: usize, seed: u64) -> Vec<DiscreteScm> {
    let bidirected = g.bidirected_edges();
    let bit = |name: String, p: f64| ExogenousVar {
        name,
        domain: vec!["0".into(), "1".into()],
        probs: vec![1.0 - p, p],
    };
    let mut exo: Vec<ExogenousVar> = bidirected.iter().map(|(a, b)| bit(format!("U_{a}_{b}"), 0.5)).collect();
    let shared = exo.len();
    exo.extend(g.names().iter().map(|n| bit(format!("N_{n}"), 0.25)));
    let inputs: Vec<Vec<ParentRef>> = (0..g.len())
        .map(|i| {
            let mut v: Vec<ParentRef> = g.parents_of(i).iter().map(|&p| ParentRef::Endogenous(p)).collect();
            for (k, (a, b)) in bidirected.iter().enumerate() {
                if a == g.name(i) || b == g.name(i) {
                    v.push(ParentRef::Exogenous(k));
                }
            }
            v.push(ParentRef::Exogenous(shared + i));
            v
        })
        .collect();
    let total_bits: usize = inputs.iter().map(|v| v.len()).sum();
    let build = |masks: &[u64]| -> DiscreteScm {
        let endo = (0..g.len())
            .map(|i| {
                let parents: Vec<ParentRef> = inputs[i]
                    .iter()
                    .enumerate()
                    .filter(|(k, _)| (masks[i] >> k) & 1 == 1)
                    .map(|(_, p)| *p)
                    .collect();
                let table = (0..1usize << parents.len())
                    .map(|row| (row.count_ones() % 2) as usize)
                    .collect();
                EndogenousVar {
                    name: g.name(i).to_string(),
                    domain: vec!["0".into(), "1".into()],
                    parents,
                    table,
                }
            })
            .collect();
        DiscreteScm::new(exo.clone(), endo).expect("parity model is valid")
    };
    let split = |code: u64| -> Vec<u64> {
        let mut rest = code;
        inputs
            .iter()
            .map(|v| {
                let m = rest & ((1u64 << v.len()) - 1);
                rest >>= v.len();
                m
            })
            .collect()
    };
    if total_bits < 63 && (1u64 << total_bits) <= budget as u64 {
        (0..1u64 << total_bits).map(|c| build(&split(c))).collect()
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..budget)
            .map(|_| {
                let masks: Vec<u64> = inputs.iter().map(|v| rng.gen_range(0..1u64 << v.len())).collect();
                build(&masks)
            })
            .collect()
    }
}

/// Observational joint, provided every cell has positive probability.
pub fn positive_observational_signature(m: &DiscreteScm) -> Option<Vec<f64>> {
    observational_signature(m).filter(|v| v.iter().all(|&p| p > 0.0))
}

/// Searches the parity family of `g` for two models with the same strictly
/// positive observational joint whose answers to `q` differ by at least
/// `min_gap`.
pub fn non_identifiability_witness(g: &Admg, q: &CausalQuery, budget: usize, seed: u64, min_gap: f64) -> Option<Witness> {
    find_pair(
        parity_family(g, budget, seed),
        positive_observational_signature,
        |m| query_signature(m, q),
        min_gap,
    )
}
