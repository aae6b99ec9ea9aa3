//! Probabilities of necessity and sufficiency: exact values from a fully
//! specified model and bounds from observational plus experimental data.

use std::fmt;

use thiserror::Error;

use crate::expr::JointTable;
use crate::scm::{CounterfactualQuery, DiscreteScm, ScmError, World};

/// Slack allowed when checking that inputs are probabilities and mutually
/// consistent.
pub const INPUT_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricsError {
    #[error(transparent)]
    Model(#[from] ScmError),
    #[error("`{0}` must be binary")]
    NotBinary(String),
    #[error("{0} is not a probability")]
    InvalidProbability(String),
    #[error("inputs are inconsistent: {0}")]
    InconsistentInputs(String),
}

/// Treatment and response polarity. The defaults treat `1` as the
/// treatment and response values and `0` as their complements.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Polarity {
    pub treated: String,
    pub untreated: String,
    pub response: String,
    pub no_response: String,
}

impl Default for Polarity {
    fn default() -> Self {
        Polarity {
            treated: "1".into(),
            untreated: "0".into(),
            response: "1".into(),
            no_response: "0".into(),
        }
    }
}

/// A point value, an interval, or a reason the quantity is undefined.
#[derive(Debug, Clone, PartialEq)]
pub enum Quantity {
    Exact(f64),
    Bounds { low: f64, high: f64 },
    Undefined(String),
}

impl Quantity {
    pub fn value(&self) -> Option<f64> {
        match self {
            Quantity::Exact(v) => Some(*v),
            _ => None,
        }
    }

    pub fn bounds(&self) -> Option<(f64, f64)> {
        match self {
            Quantity::Bounds { low, high } => Some((*low, *high)),
            Quantity::Exact(v) => Some((*v, *v)),
            Quantity::Undefined(_) => None,
        }
    }

    /// Whether `v` lies in the interval (or equals the value) within `tol`.
    pub fn contains(&self, v: f64, tol: f64) -> bool {
        self.bounds()
            .is_some_and(|(lo, hi)| v >= lo - tol && v <= hi + tol)
    }
}

impl fmt::Display for Quantity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Quantity::Exact(v) => write!(f, "{v:.6}"),
            Quantity::Bounds { low, high } => write!(f, "[{low:.6}, {high:.6}]"),
            Quantity::Undefined(reason) => write!(f, "undefined ({reason})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PnPsResult {
    pub pn: Quantity,
    pub ps: Quantity,
    pub pns: Quantity,
}

impl fmt::Display for PnPsResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "PN  {}", self.pn)?;
        writeln!(f, "PS  {}", self.ps)?;
        writeln!(f, "PNS {}", self.pns)
    }
}

fn require_binary(m: &DiscreteScm, var: &str, values: [&str; 2]) -> Result<(), MetricsError> {
    let domain = m
        .domain(var)
        .ok_or_else(|| ScmError::UnknownVariable(var.to_string()))?;
    if domain.len() != 2 || !values.iter().all(|v| domain.iter().any(|d| d == v)) {
        return Err(MetricsError::NotBinary(var.to_string()));
    }
    Ok(())
}

fn exact_or_undefined(r: Result<f64, ScmError>) -> Result<Quantity, MetricsError> {
    match r {
        Ok(v) => Ok(Quantity::Exact(v)),
        Err(ScmError::ZeroEvidence) => Ok(Quantity::Undefined("conditioning event has probability zero".into())),
        Err(e) => Err(e.into()),
    }
}

/// Exact PN, PS and PNS of `x` for `y` in `m`:
/// `PN = P(Y_{x'}=y' | x, y)`, `PS = P(Y_x=y | x', y')` and
/// `PNS = P(Y_x=y, Y_{x'}=y')`.
pub fn pn_ps_exact(m: &DiscreteScm, x: &str, y: &str, pol: &Polarity) -> Result<PnPsResult, MetricsError> {
    require_binary(m, x, [&pol.treated, &pol.untreated])?;
    require_binary(m, y, [&pol.response, &pol.no_response])?;
    let set = |v: &str, val: &str| vec![(v.to_string(), val.to_string())];
    let pn = m.counterfactual_query(&CounterfactualQuery {
        target: set(y, &pol.no_response),
        antecedent: set(x, &pol.untreated),
        evidence: vec![(x.into(), pol.treated.clone()), (y.into(), pol.response.clone())],
    });
    let ps = m.counterfactual_query(&CounterfactualQuery {
        target: set(y, &pol.response),
        antecedent: set(x, &pol.treated),
        evidence: vec![(x.into(), pol.untreated.clone()), (y.into(), pol.no_response.clone())],
    });
    let pns = m.joint_counterfactual(
        &[
            World {
                antecedent: set(x, &pol.treated),
                target: set(y, &pol.response),
            },
            World {
                antecedent: set(x, &pol.untreated),
                target: set(y, &pol.no_response),
            },
        ],
        &[],
    );
    Ok(PnPsResult {
        pn: exact_or_undefined(pn)?,
        ps: exact_or_undefined(ps)?,
        pns: exact_or_undefined(pns)?,
    })
}

fn check_probability(name: &str, p: f64) -> Result<(), MetricsError> {
    if p.is_finite() && (-INPUT_TOLERANCE..=1.0 + INPUT_TOLERANCE).contains(&p) {
        Ok(())
    } else {
        Err(MetricsError::InvalidProbability(format!("{name} = {p}")))
    }
}

/// Bounds on PN, PS and PNS from the observational joint of `x` and `y`
/// and the experimental `px1 = P(y | do(x))`, `px0 = P(y | do(x'))`.
///
/// The experimental values must be compatible with the observational
/// table: `P(x, y) <= P(y_x) <= P(x, y) + P(x')` and the analogue for
/// `x'`, otherwise no model produces both and the bounds can cross.
pub fn pnps_bounds(
    obs: &JointTable,
    x: &str,
    y: &str,
    px1: f64,
    px0: f64,
    pol: &Polarity,
) -> Result<PnPsResult, MetricsError> {
    check_probability("px1", px1)?;
    check_probability("px0", px0)?;
    for var in [x, y] {
        if obs.domain(var).map(|d| d.len()) != Some(2) {
            return Err(MetricsError::NotBinary(var.to_string()));
        }
    }
    let p = |xv: &str, yv: &str| -> Result<f64, MetricsError> {
        obs.prob_of(&[(x, xv), (y, yv)])
            .map_err(|e| MetricsError::InconsistentInputs(e.to_string()))
    };
    let (t, u, r, n) = (&pol.treated, &pol.untreated, &pol.response, &pol.no_response);
    let pxy = p(t, r)?;
    let pxy_ = p(t, n)?;
    let px_y = p(u, r)?;
    let px_y_ = p(u, n)?;
    let py = pxy + px_y;
    let (px, px_) = (pxy + pxy_, px_y + px_y_);
    let tol = INPUT_TOLERANCE;
    if px1 < pxy - tol || px1 > pxy + px_ + tol {
        return Err(MetricsError::InconsistentInputs(format!(
            "px1 = {px1} lies outside [P(x,y), P(x,y) + P(x')] = [{pxy}, {}]",
            pxy + px_
        )));
    }
    if px0 < px_y - tol || px0 > px_y + px + tol {
        return Err(MetricsError::InconsistentInputs(format!(
            "px0 = {px0} lies outside [P(x',y), P(x',y) + P(x)] = [{px_y}, {}]",
            px_y + px
        )));
    }

    let clamp = |lo: f64, hi: f64| Quantity::Bounds {
        low: lo.clamp(0.0, 1.0),
        high: hi.clamp(0.0, 1.0),
    };
    let pns = clamp(
        [0.0, px1 - px0, py - px0, px1 - py].into_iter().fold(f64::MIN, f64::max),
        [px1, 1.0 - px0, pxy + px_y_, px1 - px0 + pxy_ + px_y]
            .into_iter()
            .fold(f64::MAX, f64::min),
    );
    let pn = if pxy > 0.0 {
        clamp(
            f64::max(0.0, (py - px0) / pxy),
            f64::min(1.0, (1.0 - px0 - px_y_) / pxy),
        )
    } else {
        Quantity::Undefined("P(x, y) = 0".into())
    };
    let ps = if px_y_ > 0.0 {
        clamp(
            f64::max(0.0, (px1 - py) / px_y_),
            f64::min(1.0, (px1 - pxy) / px_y_),
        )
    } else {
        Quantity::Undefined("P(x', y') = 0".into())
    };
    Ok(PnPsResult { pn, ps, pns })
}

/// Reads a two-line experimental summary: `px1 <value>` and `px0 <value>`
/// (`=` or `:` may separate name and value).
pub fn parse_experiments(text: &str) -> Result<(f64, f64), MetricsError> {
    let mut px1 = None;
    let mut px0 = None;
    for line in text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')) {
        let mut parts = line.splitn(2, |c: char| c == '=' || c == ':' || c.is_whitespace());
        let key = parts.next().unwrap_or("").trim();
        let value = parts.next().unwrap_or("").trim();
        let v: f64 = value
            .parse()
            .map_err(|_| MetricsError::InvalidProbability(format!("`{line}`")))?;
        match key {
            "px1" => px1 = Some(v),
            "px0" => px0 = Some(v),
            _ => return Err(MetricsError::InvalidProbability(format!("unknown entry `{key}`"))),
        }
    }
    match (px1, px0) {
        (Some(a), Some(b)) => Ok((a, b)),
        _ => Err(MetricsError::InvalidProbability("summary needs both px1 and px0".into())),
    }
}

/// Experimental inputs a model itself implies: `P(y | do(x))` and
/// `P(y | do(x'))`.
pub fn experimental_inputs(m: &DiscreteScm, x: &str, y: &str, pol: &Polarity) -> Result<(f64, f64), MetricsError> {
    let effect = |xv: &str| -> Result<f64, MetricsError> {
        let j = m.interventional_joint(&[(x.to_string(), xv.to_string())])?;
        Ok(j.prob_of(&[(y, &pol.response)]).map_err(ScmError::from)?)
    };
    Ok((effect(&pol.treated)?, effect(&pol.untreated)?))
}
