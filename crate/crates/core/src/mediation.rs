//! Natural direct and indirect effects of an exposure X on an outcome Y
//! through a single mediator M, either exactly from a structural model or
//! from data through the mediation formula.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::estimate::{empirical_joint, Dataset, EstimateError};
use crate::expr::{ExprError, JointTable};
use crate::graph::{Admg, GraphError};
use crate::scm::{DiscreteScm, ScmError};

/// |TE| at or below this leaves the mediated fraction undefined.
pub const FRACTION_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum MediationError {
    #[error("mediator `{0}` shares a latent confounder; natural effects are not estimable from data here")]
    ConfoundedMediator(String),
    #[error("exposure `{0}` and outcome `{1}` share a latent confounder")]
    ConfoundedExposure(String, String),
    #[error("only the unconfounded mediation triangle is supported in data mode: {0}")]
    UnsupportedGraph(String),
    #[error("empty stratum: P({0}) = 0 in the data")]
    EmptyStratum(String),
    #[error("exposure, mediator and outcome must be three distinct variables")]
    Roles,
    #[error("no numeric code for outcome value `{0}`")]
    MissingCode(String),
    #[error(transparent)]
    Model(#[from] ScmError),
    #[error(transparent)]
    Data(#[from] EstimateError),
    #[error(transparent)]
    Table(#[from] ExprError),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// Roles, the two exposure levels and an optional numeric coding of Y.
#[derive(Debug, Clone, PartialEq)]
pub struct MediationQuery {
    pub exposure: String,
    pub mediator: String,
    pub outcome: String,
    pub x0: String,
    pub x1: String,
    /// Numeric value of each outcome level; `None` codes a level by its
    /// position in the domain.
    pub coding: Option<BTreeMap<String, f64>>,
}

impl MediationQuery {
    pub fn new(exposure: &str, mediator: &str, outcome: &str, x0: &str, x1: &str) -> Self {
        MediationQuery {
            exposure: exposure.into(),
            mediator: mediator.into(),
            outcome: outcome.into(),
            x0: x0.into(),
            x1: x1.into(),
            coding: None,
        }
    }

    pub fn with_coding(mut self, coding: BTreeMap<String, f64>) -> Self {
        self.coding = Some(coding);
        self
    }

    fn check_roles(&self) -> Result<(), MediationError> {
        let distinct: BTreeSet<&str> = [&self.exposure, &self.mediator, &self.outcome]
            .iter()
            .map(|s| s.as_str())
            .collect();
        if distinct.len() != 3 {
            return Err(MediationError::Roles);
        }
        Ok(())
    }

    fn codes(&self, domain: &[String]) -> Result<Vec<f64>, MediationError> {
        match &self.coding {
            None => Ok((0..domain.len()).map(|i| i as f64).collect()),
            Some(map) => domain
                .iter()
                .map(|v| map.get(v).copied().ok_or_else(|| MediationError::MissingCode(v.clone())))
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Source {
    DataFormula,
    ScmExact,
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Source::DataFormula => "data-formula",
            Source::ScmExact => "scm-exact",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MediationReport {
    pub te: f64,
    pub nde: f64,
    pub nie: f64,
    /// Indirect effect of the reverse transition, x1 to x0.
    pub nie_reversed: f64,
    /// NIE / TE, or `None` when TE is numerically zero.
    pub mediated_fraction: Option<f64>,
    pub source: Source,
}

impl MediationReport {
    fn new(te: f64, nde: f64, nie: f64, nie_reversed: f64, source: Source) -> Self {
        let mediated_fraction = (te.abs() > FRACTION_TOLERANCE).then(|| nie / te);
        MediationReport {
            te,
            nde,
            nie,
            nie_reversed,
            mediated_fraction,
            source,
        }
    }

    /// Tab-separated `name<TAB>value` lines; an undefined fraction is `NA`.
    pub fn porcelain(&self) -> String {
        let fraction = match self.mediated_fraction {
            Some(v) => format!("{v:.6}"),
            None => "NA".to_string(),
        };
        format!(
            "te\t{:.6}\nnde\t{:.6}\nnie\t{:.6}\nnie_reversed\t{:.6}\nmediated_fraction\t{}\nsource\t{}\n",
            self.te, self.nde, self.nie, self.nie_reversed, fraction, self.source
        )
    }
}

impl fmt::Display for MediationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "total effect        {:>10.6}", self.te)?;
        writeln!(f, "natural direct      {:>10.6}", self.nde)?;
        writeln!(f, "natural indirect    {:>10.6}", self.nie)?;
        writeln!(f, "reverse indirect    {:>10.6}", self.nie_reversed)?;
        match self.mediated_fraction {
            Some(v) => writeln!(f, "mediated fraction   {v:>10.6}")?,
            None => writeln!(f, "mediated fraction   undefined (total effect is zero)")?,
        }
        writeln!(f, "source              {}", self.source)
    }
}

/// Where the effects come from.
#[derive(Debug, Clone, Copy)]
pub enum MediationInput<'a> {
    Scm(&'a DiscreteScm),
    Data { graph: &'a Admg, data: &'a Dataset },
}

pub fn mediation_effects(input: MediationInput<'_>, q: &MediationQuery) -> Result<MediationReport, MediationError> {
    match input {
        MediationInput::Scm(m) => mediation_from_scm(m, q),
        MediationInput::Data { graph, data } => mediation_from_data(graph, data, q),
    }
}

/// Exact effects by evaluating the nested counterfactuals on every
/// exogenous state.
pub fn mediation_from_scm(m: &DiscreteScm, q: &MediationQuery) -> Result<MediationReport, MediationError> {
    q.check_roles()?;
    let idx = |name: &str| {
        m.endogenous_index(name)
            .ok_or_else(|| ScmError::UnknownVariable(name.to_string()))
    };
    let (xi, mi, yi) = (idx(&q.exposure)?, idx(&q.mediator)?, idx(&q.outcome)?);
    let level = |value: &str| -> Result<usize, ScmError> {
        m.endogenous()[xi]
            .domain
            .iter()
            .position(|v| v == value)
            .ok_or_else(|| ScmError::ValueOutsideDomain {
                var: q.exposure.clone(),
                value: value.to_string(),
            })
    };
    let (x0, x1) = (level(&q.x0)?, level(&q.x1)?);
    let code = q.codes(&m.endogenous()[yi].domain)?;
    let n = m.endogenous().len();
    let surgery = |x: usize, med: Option<usize>| {
        let mut dv = vec![None; n];
        dv[xi] = Some(x);
        dv[mi] = med;
        dv
    };
    // E[Y_x0], E[Y_x1], E[Y_{x1, M_x0}], E[Y_{x0, M_x1}]
    let mut e = [0.0f64; 4];
    for (u, p) in m.exogenous_states()? {
        if p == 0.0 {
            continue;
        }
        let w0 = m.solve(&u, &surgery(x0, None));
        let w1 = m.solve(&u, &surgery(x1, None));
        let cross01 = m.solve(&u, &surgery(x1, Some(w0[mi])));
        let cross10 = m.solve(&u, &surgery(x0, Some(w1[mi])));
        e[0] += p * code[w0[yi]];
        e[1] += p * code[w1[yi]];
        e[2] += p * code[cross01[yi]];
        e[3] += p * code[cross10[yi]];
    }
    Ok(MediationReport::new(
        e[1] - e[0],
        e[2] - e[0],
        e[3] - e[0],
        e[2] - e[1],
        Source::ScmExact,
    ))
}

/// Refuses graphs outside the unconfounded triangle X -> M -> Y, X -> Y
/// (either of the two X edges may be absent).
pub fn check_mediation_graph(g: &Admg, q: &MediationQuery) -> Result<(), MediationError> {
    q.check_roles()?;
    let (x, m, y) = (q.exposure.as_str(), q.mediator.as_str(), q.outcome.as_str());
    for v in [x, m, y] {
        g.require(v)?;
    }
    for (a, b) in g.bidirected_edges() {
        if a == m || b == m {
            return Err(MediationError::ConfoundedMediator(m.to_string()));
        }
        if (a == x && b == y) || (a == y && b == x) {
            return Err(MediationError::ConfoundedExposure(x.to_string(), y.to_string()));
        }
    }
    let triangle: BTreeSet<String> = [x, m, y].iter().map(|s| s.to_string()).collect();
    let outside: Vec<String> = g.ancestors(&triangle)?.difference(&triangle).cloned().collect();
    if !outside.is_empty() {
        return Err(MediationError::UnsupportedGraph(format!(
            "{} would need adjustment",
            outside.join(", ")
        )));
    }
    let allowed = [(x, m), (m, y), (x, y)];
    for (a, b) in g.directed_edges() {
        if triangle.contains(&a) && triangle.contains(&b) && !allowed.contains(&(a.as_str(), b.as_str())) {
            return Err(MediationError::UnsupportedGraph(format!("edge {a} -> {b}")));
        }
    }
    Ok(())
}

/// Mediation formula on the empirical distribution of `d`.
pub fn mediation_from_data(g: &Admg, d: &Dataset, q: &MediationQuery) -> Result<MediationReport, MediationError> {
    check_mediation_graph(g, q)?;
    let sub = d.select(&[&q.exposure, &q.mediator, &q.outcome])?;
    mediation_from_joint(g, &empirical_joint(&sub)?, q)
}

/// Mediation formula on a joint table containing X, M and Y.
pub fn mediation_from_joint(g: &Admg, j: &JointTable, q: &MediationQuery) -> Result<MediationReport, MediationError> {
    check_mediation_graph(g, q)?;
    let t = j.marginal(&[&q.exposure, &q.mediator, &q.outcome])?;
    let xs = &t.domains()[0];
    let (ms, ys) = (t.domains()[1].len(), t.domains()[2].len());
    let level = |v: &str| {
        xs.iter().position(|s| s == v).ok_or_else(|| ExprError::UnknownValue {
            var: q.exposure.clone(),
            value: v.to_string(),
        })
    };
    let (x0, x1) = (level(&q.x0)?, level(&q.x1)?);
    let code = q.codes(&t.domains()[2])?;
    let p = |x: usize, m: usize, y: usize| t.mass()[t.cell_index(&[x, m, y])];
    let p_xm = |x: usize, m: usize| (0..ys).map(|y| p(x, m, y)).sum::<f64>();
    let p_x = |x: usize| (0..ms).map(|m| p_xm(x, m)).sum::<f64>();
    let empty_x = |x: usize| MediationError::EmptyStratum(format!("{}={}", q.exposure, xs[x]));
    let (px0, px1) = (p_x(x0), p_x(x1));
    if px0 <= 0.0 {
        return Err(empty_x(x0));
    }
    if px1 <= 0.0 {
        return Err(empty_x(x1));
    }
    let m_given = |m: usize, x: usize, px: f64| p_xm(x, m) / px;
    let e_y = |x: usize, m: usize| -> Result<f64, MediationError> {
        let den = p_xm(x, m);
        if den <= 0.0 {
            return Err(MediationError::EmptyStratum(format!(
                "{}={}, {}={}",
                q.exposure,
                xs[x],
                q.mediator,
                t.domains()[1][m]
            )));
        }
        Ok((0..ys).map(|y| code[y] * p(x, m, y)).sum::<f64>() / den)
    };
    let (mut nde, mut nie, mut nie_r) = (0.0, 0.0, 0.0);
    for m in 0..ms {
        let (w0, w1) = (m_given(m, x0, px0), m_given(m, x1, px1));
        if w0 > 0.0 {
            nde += (e_y(x1, m)? - e_y(x0, m)?) * w0;
        }
        if w0 > 0.0 || w1 > 0.0 {
            nie += e_y(x0, m)? * (w1 - w0);
            nie_r += e_y(x1, m)? * (w0 - w1);
        }
    }
    // With no mediator-outcome confounding the empty set is a valid
    // adjustment set, so E(Y | do(x)) = E(Y | x).
    let mean = |x: usize, px: f64| {
        (0..ms)
            .flat_map(|m| (0..ys).map(move |y| (m, y)))
            .map(|(m, y)| code[y] * p(x, m, y))
            .sum::<f64>()
            / px
    };
    let te = mean(x1, px1) - mean(x0, px0);
    Ok(MediationReport::new(te, nde, nie, nie_r, Source::DataFormula))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scm::{random_compatible_scm, ScmBuilder};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn triangle() -> Admg {
        Admg::from_edges(&["X", "M", "Y"], &[("X", "M"), ("M", "Y"), ("X", "Y")], &[]).unwrap()
    }

    fn q() -> MediationQuery {
        MediationQuery::new("X", "M", "Y", "0", "1")
    }

    #[test]
    fn no_direct_edge_means_no_direct_effect() {
        let m = ScmBuilder::new()
            .bernoulli("UX", 0.4)
            .bernoulli("UM", 0.3)
            .bernoulli("UY", 0.2)
            .endogenous("X", &["0", "1"], &["UX"], |p| p[0].to_string())
            .endogenous("M", &["0", "1"], &["X", "UM"], |p| ((p[0] != p[1]) as u8).to_string())
            .endogenous("Y", &["0", "1"], &["M", "UY"], |p| ((p[0] == "1" || p[1] == "1") as u8).to_string())
            .build()
            .unwrap();
        let r = mediation_from_scm(&m, &q()).unwrap();
        assert!(r.nde.abs() < 1e-12);
        assert!(r.te.abs() > 0.1);
        assert!((r.mediated_fraction.unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn outcome_ignoring_mediator_means_no_indirect_effect() {
        let m = ScmBuilder::new()
            .bernoulli("UX", 0.5)
            .bernoulli("UY", 0.25)
            .endogenous("X", &["0", "1"], &["UX"], |p| p[0].to_string())
            .endogenous("M", &["0", "1"], &["X"], |p| p[0].to_string())
            .endogenous("Y", &["0", "1"], &["X", "M", "UY"], |p| ((p[0] == "1" && p[2] == "0") as u8).to_string())
            .build()
            .unwrap();
        let r = mediation_from_scm(&m, &q()).unwrap();
        assert!(r.nie.abs() < 1e-12);
        assert!(r.nie_reversed.abs() < 1e-12);
        assert!((r.nde - 0.75).abs() < 1e-12);
    }

    #[test]
    fn decomposition_identity_and_formula_agree_on_random_models() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let g = triangle();
        for _ in 0..200 {
            let m = random_compatible_scm(&g, &mut rng);
            let exact = mediation_from_scm(&m, &q()).unwrap();
            assert!((exact.te - (exact.nde - exact.nie_reversed)).abs() < 1e-12);
            let formula = mediation_from_joint(&g, &m.observational_joint().unwrap(), &q()).unwrap();
            for (a, b) in [
                (exact.te, formula.te),
                (exact.nde, formula.nde),
                (exact.nie, formula.nie),
                (exact.nie_reversed, formula.nie_reversed),
            ] {
                assert!((a - b).abs() < 1e-9, "{exact:?} vs {formula:?}");
            }
        }
    }

    #[test]
    fn confounded_graphs_are_refused() {
        let g = Admg::from_edges(&["X", "M", "Y"], &[("X", "M"), ("M", "Y")], &[("M", "Y")]).unwrap();
        let j = JointTable::from_weights(
            vec!["X".into(), "M".into(), "Y".into()],
            vec![vec!["0".into(), "1".into()]; 3],
            vec![1.0; 8],
        )
        .unwrap();
        assert!(matches!(
            mediation_from_joint(&g, &j, &q()),
            Err(MediationError::ConfoundedMediator(_))
        ));
        let g = Admg::from_edges(&["X", "M", "Y"], &[("X", "M"), ("M", "Y")], &[("X", "Y")]).unwrap();
        assert!(matches!(
            mediation_from_joint(&g, &j, &q()),
            Err(MediationError::ConfoundedExposure(..))
        ));
        let g = Admg::from_edges(&["C", "X", "M", "Y"], &[("C", "X"), ("C", "Y"), ("X", "M"), ("M", "Y")], &[])
            .unwrap();
        assert!(matches!(
            mediation_from_joint(&g, &j, &q()),
            Err(MediationError::UnsupportedGraph(_))
        ));
    }

    #[test]
    fn empty_stratum_is_reported() {
        // M = X exactly, so P(X=1, M=0) = 0 while P(M=0 | X=0) > 0
        let j = JointTable::from_weights(
            vec!["X".into(), "M".into(), "Y".into()],
            vec![vec!["0".into(), "1".into()]; 3],
            vec![1.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 1.0],
        )
        .unwrap();
        assert!(matches!(
            mediation_from_joint(&triangle(), &j, &q()),
            Err(MediationError::EmptyStratum(_))
        ));
    }

    #[test]
    fn custom_coding_scales_effects() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let m = random_compatible_scm(&triangle(), &mut rng);
        let base = mediation_from_scm(&m, &q()).unwrap();
        let coding = BTreeMap::from([("0".to_string(), 10.0), ("1".to_string(), 13.0)]);
        let scaled = mediation_from_scm(&m, &q().with_coding(coding)).unwrap();
        assert!((scaled.te - 3.0 * base.te).abs() < 1e-12);
        assert!((scaled.nie - 3.0 * base.nie).abs() < 1e-12);
        let partial = BTreeMap::from([("0".to_string(), 1.0)]);
        assert!(matches!(
            mediation_from_scm(&m, &q().with_coding(partial)),
            Err(MediationError::MissingCode(v)) if v == "1"
        ));
    }

    #[test]
    fn porcelain_marks_undefined_fraction() {
        let r = MediationReport::new(0.0, 0.1, 0.1, 0.1, Source::ScmExact);
        assert!(r.porcelain().contains("mediated_fraction\tNA\n"));
        assert!(r.to_string().contains("undefined"));
    }
}
