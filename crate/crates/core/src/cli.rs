//! The `causal` command line: assumptions, a query and data go in; an
//! estimand, an estimate and fit indices come out.
//!
//! Exit codes: 0 success, 1 usage or input error, 2 non-identifiable query,
//! 3 data insufficiency (empty stratum, missing data, degenerate resamples,
//! no recovery criterion).

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::counterfactual_metrics::{experimental_inputs, pn_ps_exact, pnps_bounds, MetricsError, Polarity, PnPsResult};
use crate::discover::{discover_cpdag, CiOracle, DiscoverError};
use crate::estimate::{bootstrap_interval, load_table, plug_in, Dataset, Estimate, EstimateError};
use crate::expr::{default_symbol, simplify, Binding, ExprError, Value};
use crate::fitcheck::{fit_indices, FitReport};
use crate::graph::{parse_graph, Admg, GraphError};
use crate::identify::witness::non_identifiability_witness;
use crate::identify::{identify, parse_query, IdentifyError, IdentifyResult};
use crate::mediation::{mediation_effects, MediationError, MediationInput, MediationQuery};
use crate::recover::{parse_mgraph, recover_distribution, recover_estimate, recoverability, Recoverability, RecoverError};
use crate::scm::{parse_scm, CounterfactualQuery, DiscreteScm, ScmError};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_NON_IDENTIFIABLE: i32 = 2;
pub const EXIT_INSUFFICIENT: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "causal", version, about = "Causal inference over discrete variables")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Derive an estimand for a causal query from a graph.
    Identify(IdentifyArgs),
    /// Identify a query, estimate it from data and report fit indices.
    Estimate(EstimateArgs),
    /// Test every independence the graph implies against data.
    Fit(FitArgs),
    /// Evaluate a counterfactual probability in a structural model.
    Counterfactual(CounterfactualArgs),
    /// Probabilities of necessity and sufficiency, exact or bounded.
    Pnps(PnpsArgs),
    /// Natural direct and indirect effects.
    Mediate(MediateArgs),
    /// Recoverability and recovered estimates under missing data.
    Recover(RecoverArgs),
    /// Learn an equivalence class of graphs from independencies.
    Discover(DiscoverArgs),
}

#[derive(Debug, Args)]
struct Output {
    /// Tab-separated machine-readable output.
    #[arg(long)]
    porcelain: bool,
}

#[derive(Debug, Args)]
struct IdentifyArgs {
    #[arg(long)]
    graph: PathBuf,
    #[arg(long)]
    query: String,
    /// On failure, also search for two models that agree on the data but
    /// disagree on the query.
    #[arg(long)]
    witness: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    output: Output,
}

#[derive(Debug, Args)]
struct EstimateArgs {
    #[arg(long)]
    graph: PathBuf,
    #[arg(long)]
    query: String,
    #[arg(long)]
    data: PathBuf,
    /// Number of bootstrap resamples for a percentile interval.
    #[arg(long = "bootstrap", value_name = "B")]
    bootstrap: Option<usize>,
    #[arg(long, default_value_t = 0.95)]
    level: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Significance level of the fit indices.
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long)]
    bonferroni: bool,
    #[command(flatten)]
    output: Output,
}

#[derive(Debug, Args)]
struct FitArgs {
    #[arg(long)]
    graph: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long)]
    bonferroni: bool,
    #[command(flatten)]
    output: Output,
}

#[derive(Debug, Args)]
struct CounterfactualArgs {
    #[arg(long)]
    scm: PathBuf,
    #[arg(long)]
    query: String,
    #[command(flatten)]
    output: Output,
}

#[derive(Debug, Args)]
struct PnpsArgs {
    /// Exact values from a structural model.
    #[arg(long, conflicts_with_all = ["data", "px1", "px0"])]
    scm: Option<PathBuf>,
    /// Observational data for bounds; needs --px1 and --px0.
    #[arg(long, requires_all = ["px1", "px0"])]
    data: Option<PathBuf>,
    #[arg(long)]
    exposure: String,
    #[arg(long)]
    outcome: String,
    /// Experimental P(y | do(x)).
    #[arg(long)]
    px1: Option<f64>,
    /// Experimental P(y | do(x')).
    #[arg(long)]
    px0: Option<f64>,
    /// Treated exposure value.
    #[arg(long, default_value = "1")]
    x1: String,
    /// Untreated exposure value.
    #[arg(long, default_value = "0")]
    x0: String,
    #[command(flatten)]
    output: Output,
}

#[derive(Debug, Args)]
struct MediateArgs {
    #[arg(long, conflicts_with_all = ["graph", "data"])]
    scm: Option<PathBuf>,
    #[arg(long, requires = "data")]
    graph: Option<PathBuf>,
    #[arg(long, requires = "graph")]
    data: Option<PathBuf>,
    #[arg(long)]
    exposure: String,
    #[arg(long)]
    mediator: String,
    #[arg(long)]
    outcome: String,
    #[arg(long, default_value = "0")]
    x0: String,
    #[arg(long, default_value = "1")]
    x1: String,
    /// Numeric outcome coding such as `low=0,high=10`; defaults to the
    /// position of each value in the sorted domain.
    #[arg(long)]
    coding: Option<String>,
    #[command(flatten)]
    output: Output,
}

#[derive(Debug, Args)]
struct RecoverArgs {
    /// M-graph: the graph format plus `missing V` lines and edges into `R_V`.
    #[arg(long)]
    graph: PathBuf,
    /// Target distribution, `P(Y)` or with fixed values `P(Y=1)`.
    #[arg(long)]
    query: String,
    /// Data with `NA` cells; without it only the decision is printed.
    #[arg(long)]
    data: Option<PathBuf>,
    #[command(flatten)]
    output: Output,
}

#[derive(Debug, Args)]
struct DiscoverArgs {
    /// Answer independence questions by d-separation in this graph.
    #[arg(long, conflicts_with = "data")]
    graph: Option<PathBuf>,
    /// Answer independence questions with G² tests on this data.
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Comma-separated variables; defaults to all.
    #[arg(long, value_delimiter = ',')]
    vars: Vec<String>,
}

/// A failed command: exit code plus the diagnostic.
#[derive(Debug)]
struct Failure {
    code: i32,
    message: String,
}

impl Failure {
    fn usage(m: impl fmt::Display) -> Self {
        Failure {
            code: EXIT_USAGE,
            message: format!("error: {m}"),
        }
    }

    fn insufficient(m: impl fmt::Display) -> Self {
        Failure {
            code: EXIT_INSUFFICIENT,
            message: format!("error: {m}"),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::usage(e)
    }
}

impl From<ExprError> for Failure {
    fn from(e: ExprError) -> Self {
        match e {
            ExprError::ConditioningOnZero { .. } => Failure::insufficient(e),
            _ => Failure::usage(e),
        }
    }
}

impl From<EstimateError> for Failure {
    fn from(e: EstimateError) -> Self {
        match e {
            EstimateError::Expr(inner) => inner.into(),
            EstimateError::MissingDataPresent(_) | EstimateError::TooManyDegenerateResamples { .. } => {
                Failure::insufficient(e)
            }
            _ => Failure::usage(e),
        }
    }
}

impl From<GraphError> for Failure {
    fn from(e: GraphError) -> Self {
        Failure::usage(e)
    }
}

impl From<IdentifyError> for Failure {
    fn from(e: IdentifyError) -> Self {
        Failure::usage(e)
    }
}

impl From<ScmError> for Failure {
    fn from(e: ScmError) -> Self {
        match e {
            ScmError::ZeroEvidence => Failure::insufficient(e),
            _ => Failure::usage(e),
        }
    }
}

impl From<MetricsError> for Failure {
    fn from(e: MetricsError) -> Self {
        match e {
            MetricsError::Model(inner) => inner.into(),
            _ => Failure::usage(e),
        }
    }
}

impl From<MediationError> for Failure {
    fn from(e: MediationError) -> Self {
        match e {
            MediationError::EmptyStratum(_) => Failure::insufficient(e),
            MediationError::Data(inner) => inner.into(),
            MediationError::Model(inner) => inner.into(),
            MediationError::Table(inner) => inner.into(),
            _ => Failure::usage(e),
        }
    }
}

impl From<RecoverError> for Failure {
    fn from(e: RecoverError) -> Self {
        match e {
            RecoverError::EmptyStratum(_) | RecoverError::NotRecoverable(_) => Failure::insufficient(e),
            RecoverError::Data(inner) => inner.into(),
            _ => Failure::usage(e),
        }
    }
}

impl From<DiscoverError> for Failure {
    fn from(e: DiscoverError) -> Self {
        match e {
            DiscoverError::Data(inner) => inner.into(),
            _ => Failure::usage(e),
        }
    }
}

struct Streams<'a> {
    out: &'a mut dyn Write,
    err: &'a mut dyn Write,
}

/// Parses `args` (program name first) and runs the subcommand, writing
/// results to `out` and diagnostics to `err`. Returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = out.write_all(text.as_bytes());
                    EXIT_OK
                }
                _ => {
                    let _ = err.write_all(text.as_bytes());
                    EXIT_USAGE
                }
            };
        }
    };
    let mut s = Streams { out, err };
    let result = match &cli.command {
        Command::Identify(a) => cmd_identify(a, &mut s),
        Command::Estimate(a) => cmd_estimate(a, &mut s),
        Command::Fit(a) => cmd_fit(a, &mut s),
        Command::Counterfactual(a) => cmd_counterfactual(a, &mut s),
        Command::Pnps(a) => cmd_pnps(a, &mut s),
        Command::Mediate(a) => cmd_mediate(a, &mut s),
        Command::Recover(a) => cmd_recover(a, &mut s),
        Command::Discover(a) => cmd_discover(a, &mut s),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(f) => {
            let _ = writeln!(s.err, "{}", f.message);
            f.code
        }
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure::usage(format!("cannot read {}: {e}", path.display())))
}

fn graph(path: &Path) -> Result<Admg, Failure> {
    parse_graph(&read(path)?).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))
}

fn scm(path: &Path) -> Result<DiscreteScm, Failure> {
    parse_scm(&read(path)?).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))
}

fn data(path: &Path) -> Result<Dataset, Failure> {
    load_table(path).map_err(|e| match e {
        EstimateError::Io(io) => Failure::usage(format!("cannot read {}: {io}", path.display())),
        other => Failure::usage(format!("{}: {other}", path.display())),
    })
}

fn non_identifiable(r: &IdentifyResult) -> Failure {
    Failure {
        code: EXIT_NON_IDENTIFIABLE,
        message: r.display(),
    }
}

fn cmd_identify(a: &IdentifyArgs, s: &mut Streams<'_>) -> Result<(), Failure> {
    let g = graph(&a.graph)?;
    let q = parse_query(&a.query)?;
    let r = identify(&g, &q)?;
    if !r.is_identified() {
        if a.witness {
            match non_identifiability_witness(&g, &q, 1 << 14, a.seed, 1e-3) {
                Some(w) => writeln!(
                    s.err,
                    "witness: two models with the same observational distribution give answers {:.6} apart",
                    w.disagreement_gap
                )?,
                None => writeln!(s.err, "witness: none found in the searched model family")?,
            }
        }
        return Err(non_identifiable(&r));
    }
    if a.output.porcelain {
        writeln!(s.out, "estimand\t{}", r.display())?;
    } else {
        writeln!(s.out, "{}", r.display())?;
    }
    Ok(())
}

fn write_estimate(s: &mut Streams<'_>, e: &Estimate, porcelain: bool) -> Result<(), Failure> {
    if porcelain {
        writeln!(s.out, "value\t{:.6}\nn\t{}", e.value, e.n)?;
        if let Some(i) = e.interval {
            writeln!(s.out, "interval\t{:.6}\t{:.6}\t{}", i.low, i.high, i.level)?;
        }
    } else {
        writeln!(s.out, "estimate: {e}")?;
    }
    Ok(())
}

fn write_fit(s: &mut Streams<'_>, report: &FitReport, porcelain: bool, prefix: &str) -> Result<(), Failure> {
    for w in report.warnings() {
        writeln!(s.err, "{w}")?;
    }
    let body = if porcelain {
        report.porcelain()
    } else {
        report.to_string()
    };
    for line in body.lines() {
        writeln!(s.out, "{prefix}{line}")?;
    }
    Ok(())
}

fn cmd_estimate(a: &EstimateArgs, s: &mut Streams<'_>) -> Result<(), Failure> {
    let g = graph(&a.graph)?;
    let q = parse_query(&a.query)?;
    let d = data(&a.data)?;
    let names: Vec<&str> = g.names().iter().map(|n| n.as_str()).collect();
    let d = d.select(&names)?;
    let r = identify(&g, &q)?;
    let estimand = match &r {
        IdentifyResult::Identified(e) => simplify(e),
        IdentifyResult::NonIdentifiable(_) => return Err(non_identifiable(&r)),
    };
    if !estimand.free_symbols().is_empty() {
        return Err(Failure::usage(
            "estimation needs every query value fixed, for example P(Y=1 | do(X=0))",
        ));
    }
    let binding = Binding::new();
    let e = match a.bootstrap {
        Some(b) => bootstrap_interval(&estimand, &d, &binding, b, a.level, a.seed)?,
        None => plug_in(&estimand, &d, &binding)?,
    };
    let report = fit_indices(&g, &d, a.alpha, a.bonferroni)?;
    if a.output.porcelain {
        writeln!(s.out, "estimand\t{}", estimand.render())?;
        write_estimate(s, &e, true)?;
        write_fit(s, &report, true, "fit\t")?;
    } else {
        writeln!(s.out, "estimand: {}", estimand.render())?;
        write_estimate(s, &e, false)?;
        writeln!(s.out, "fit indices:")?;
        write_fit(s, &report, false, "  ")?;
    }
    Ok(())
}

fn cmd_fit(a: &FitArgs, s: &mut Streams<'_>) -> Result<(), Failure> {
    let g = graph(&a.graph)?;
    let d = data(&a.data)?;
    let report = fit_indices(&g, &d, a.alpha, a.bonferroni)?;
    write_fit(s, &report, a.output.porcelain, "")
}

fn cmd_counterfactual(a: &CounterfactualArgs, s: &mut Streams<'_>) -> Result<(), Failure> {
    let m = scm(&a.scm)?;
    let q = CounterfactualQuery::parse(&a.query)?;
    let v = m.counterfactual_query(&q)?;
    if a.output.porcelain {
        writeln!(s.out, "{v:.6}")?;
    } else {
        writeln!(s.out, "{} = {v:.6}", a.query.trim())?;
    }
    Ok(())
}

fn write_pnps(s: &mut Streams<'_>, r: &PnPsResult, porcelain: bool, label: &str) -> Result<(), Failure> {
    if porcelain {
        for (name, q) in [("pn", &r.pn), ("ps", &r.ps), ("pns", &r.pns)] {
            match q.bounds() {
                Some((lo, hi)) => writeln!(s.out, "{label}{name}\t{lo:.6}\t{hi:.6}")?,
                None => writeln!(s.out, "{label}{name}\tNA\tNA")?,
            }
        }
    } else {
        write!(s.out, "{r}")?;
    }
    Ok(())
}

fn cmd_pnps(a: &PnpsArgs, s: &mut Streams<'_>) -> Result<(), Failure> {
    let pol = Polarity {
        treated: a.x1.clone(),
        untreated: a.x0.clone(),
        ..Polarity::default()
    };
    let (x, y) = (a.exposure.as_str(), a.outcome.as_str());
    if let Some(path) = &a.scm {
        let m = scm(path)?;
        let exact = pn_ps_exact(&m, x, y, &pol)?;
        let (px1, px0) = experimental_inputs(&m, x, y, &pol)?;
        let bounds = pnps_bounds(&m.observational_joint()?, x, y, px1, px0, &pol)?;
        if a.output.porcelain {
            write_pnps(s, &exact, true, "exact\t")?;
            write_pnps(s, &bounds, true, "bounds\t")?;
        } else {
            writeln!(s.out, "exact:")?;
            write_pnps(s, &exact, false, "")?;
            writeln!(s.out, "bounds from P(x, y), P(y | do(x)) = {px1:.6}, P(y | do(x')) = {px0:.6}:")?;
            write_pnps(s, &bounds, false, "")?;
        }
        return Ok(());
    }
    let Some(path) = &a.data else {
        return Err(Failure::usage("pnps needs --scm or --data with --px1 and --px0"));
    };
    let d = data(path)?.select(&[x, y])?;
    let obs = crate::estimate::empirical_joint(&d)?;
    let (px1, px0) = (a.px1.expect("required by clap"), a.px0.expect("required by clap"));
    let bounds = pnps_bounds(&obs, x, y, px1, px0, &pol)?;
    write_pnps(s, &bounds, a.output.porcelain, "")
}

fn parse_coding(text: &str) -> Result<BTreeMap<String, f64>, Failure> {
    text.split(',')
        .map(|item| {
            let (k, v) = item
                .split_once('=')
                .ok_or_else(|| Failure::usage(format!("coding entry `{item}` is not VALUE=NUMBER")))?;
            let v: f64 = v
                .trim()
                .parse()
                .map_err(|_| Failure::usage(format!("coding entry `{item}` has no numeric code")))?;
            Ok((k.trim().to_string(), v))
        })
        .collect()
}

fn cmd_mediate(a: &MediateArgs, s: &mut Streams<'_>) -> Result<(), Failure> {
    let mut q = MediationQuery::new(&a.exposure, &a.mediator, &a.outcome, &a.x0, &a.x1);
    if let Some(c) = &a.coding {
        q = q.with_coding(parse_coding(c)?);
    }
    let report = match (&a.scm, &a.graph, &a.data) {
        (Some(path), _, _) => mediation_effects(MediationInput::Scm(&scm(path)?), &q)?,
        (None, Some(gp), Some(dp)) => {
            let (g, d) = (graph(gp)?, data(dp)?);
            mediation_effects(MediationInput::Data { graph: &g, data: &d }, &q)?
        }
        _ => return Err(Failure::usage("mediate needs --scm or both --graph and --data")),
    };
    if a.output.porcelain {
        write!(s.out, "{}", report.porcelain())?;
    } else {
        write!(s.out, "{report}")?;
    }
    Ok(())
}

fn cmd_recover(a: &RecoverArgs, s: &mut Streams<'_>) -> Result<(), Failure> {
    let mg = parse_mgraph(&read(&a.graph)?).map_err(|e| Failure::usage(format!("{}: {e}", a.graph.display())))?;
    let q = parse_query(&a.query)?;
    if !q.do_.is_empty() || !q.condition.is_empty() || q.counterfactual_evidence.is_some() {
        return Err(Failure::usage("recover takes a plain distribution such as P(Y) or P(X, Y=1)"));
    }
    let target: Vec<&str> = q.outcome.iter().map(|x| x.var.as_str()).collect();
    let fixed: BTreeMap<String, String> = q
        .outcome
        .iter()
        .filter_map(|x| match &x.value {
            Value::Lit(v) => Some((x.var.clone(), v.clone())),
            Value::Sym(_) => None,
        })
        .collect();
    if !fixed.is_empty() && fixed.len() != target.len() {
        return Err(Failure::usage("fix either every target value or none"));
    }
    let (criterion, estimand) = match recoverability(&mg, &target)? {
        Recoverability::Recoverable { criterion, estimand } => {
            let shown = fixed.iter().fold(estimand, |e, (var, value)| {
                e.substitute_symbol(&default_symbol(var), &Value::lit(value.as_str()))
            });
            (criterion, simplify(&shown))
        }
        Recoverability::NotRecoverable(reason) => return Err(RecoverError::NotRecoverable(reason).into()),
    };
    let p = a.output.porcelain;
    if p {
        writeln!(s.out, "criterion\t{criterion}\nestimand\t{}", estimand.render())?;
    } else {
        writeln!(s.out, "recoverable: {criterion}\nestimand: {}", estimand.render())?;
    }
    let Some(path) = &a.data else {
        return Ok(());
    };
    let d = data(path)?;
    if fixed.is_empty() {
        let mut vars = target.clone();
        vars.sort_unstable();
        vars.dedup();
        for (values, prob) in recover_distribution(&mg, &d, &target)? {
            let cell = vars.iter().zip(&values).map(|(v, x)| format!("{v}={x}")).collect::<Vec<_>>();
            if p {
                writeln!(s.out, "{}\t{prob:.6}", cell.join("\t"))?;
            } else {
                writeln!(s.out, "P({}) = {prob:.6}", cell.join(", "))?;
            }
        }
    } else {
        let e = recover_estimate(&mg, &d, &target, &fixed)?;
        write_estimate(s, &e, p)?;
    }
    Ok(())
}

fn cmd_discover(a: &DiscoverArgs, s: &mut Streams<'_>) -> Result<(), Failure> {
    let (g, d);
    let (oracle, all): (CiOracle<'_>, Vec<String>) = match (&a.graph, &a.data) {
        (Some(path), _) => {
            g = graph(path)?;
            (CiOracle::Graph(&g), g.names().to_vec())
        }
        (None, Some(path)) => {
            d = data(path)?;
            (
                CiOracle::Data {
                    data: &d,
                    alpha: a.alpha,
                },
                d.columns().to_vec(),
            )
        }
        (None, None) => return Err(Failure::usage("discover needs --graph or --data")),
    };
    let vars: Vec<&str> = if a.vars.is_empty() {
        all.iter().map(|v| v.as_str()).collect()
    } else {
        a.vars.iter().map(|v| v.trim()).collect()
    };
    let c = discover_cpdag(&oracle, &vars)?;
    write!(s.out, "{c}")?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn call(args: &[&str]) -> (i32, String, String) {
        let (mut out, mut err) = (Vec::new(), Vec::new());
        let code = run(std::iter::once("causal").chain(args.iter().copied()), &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn help_goes_to_stdout() {
        let (code, out, err) = call(&["--help"]);
        assert_eq!(code, EXIT_OK);
        assert!(out.contains("identify") && out.contains("discover"));
        assert!(err.is_empty());
    }

    #[test]
    fn usage_errors_exit_one() {
        let (code, out, err) = call(&["identify", "--query", "P(Y|do(X))"]);
        assert_eq!(code, EXIT_USAGE);
        assert!(out.is_empty());
        assert!(err.contains("--graph"));
        let (code, _, err) = call(&["identify", "--graph", "/nonexistent/g.txt", "--query", "P(Y)"]);
        assert_eq!(code, EXIT_USAGE);
        assert!(err.contains("cannot read"));
        let (code, _, _) = call(&["frobnicate"]);
        assert_eq!(code, EXIT_USAGE);
    }

    #[test]
    fn coding_parser() {
        let c = parse_coding("low=0, high=2.5").unwrap();
        assert_eq!(c["high"], 2.5);
        assert!(parse_coding("low").is_err());
        assert!(parse_coding("low=x").is_err());
    }
}
