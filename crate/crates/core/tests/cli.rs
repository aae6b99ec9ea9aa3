//! Golden-file tests for every subcommand. Set `UPDATE_GOLDEN=1` to
//! rewrite the expected outputs after an intended change.

use std::path::PathBuf;
use std::process::Command;

use causal_engine::cli::{run, EXIT_INSUFFICIENT, EXIT_NON_IDENTIFIABLE, EXIT_OK, EXIT_USAGE};

fn data(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/data")
        .join(name)
        .display()
        .to_string()
}

/// Runs the CLI in-process; `@file` arguments resolve to fixtures.
fn call(args: &[&str]) -> (i32, String, String) {
    let argv: Vec<String> = std::iter::once("causal".to_string())
        .chain(args.iter().map(|a| match a.strip_prefix('@') {
            Some(f) => data(f),
            None => a.to_string(),
        }))
        .collect();
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = run(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn golden(name: &str, args: &[&str], code: i32) -> String {
    let (got, out, err) = call(args);
    assert_eq!(got, code, "{name}: exit code; stderr:\n{err}");
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join(format!("tests/golden/{name}.out"));
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::write(&path, &out).unwrap();
    }
    let expected = std::fs::read_to_string(&path).unwrap_or_else(|_| panic!("missing golden file {}", path.display()));
    assert_eq!(out, expected, "{name}: stdout differs from golden file");
    // a second run must be byte-identical
    assert_eq!(call(args).1, out, "{name}: output is not deterministic");
    err
}

#[test]
fn identify_backdoor() {
    golden("identify_backdoor", &["identify", "--graph", "@backdoor.cg", "--query", "P(Y|do(X))"], EXIT_OK);
    let (_, out, _) = call(&["identify", "--graph", "@backdoor.cg", "--query", "P(Y|do(X))"]);
    assert_eq!(out, "sum_{z} P(y|x,z) * P(z)\n");
}

#[test]
fn identify_front_door_porcelain() {
    golden(
        "identify_frontdoor",
        &["identify", "--graph", "@frontdoor.cg", "--query", "P(Y=1|do(X=0))", "--porcelain"],
        EXIT_OK,
    );
}

#[test]
fn identify_bow_fails() {
    let err = golden("identify_bow", &["identify", "--graph", "@bow.cg", "--query", "P(Y|do(X))"], EXIT_NON_IDENTIFIABLE);
    assert!(err.contains("FAILURE") && err.contains("hedge"), "{err}");
}

#[test]
fn identify_counterfactual_query_is_an_input_error() {
    let (code, out, err) = call(&["identify", "--graph", "@backdoor.cg", "--query", "P(Y_{X=1}=1 | X=0, Y=0)"]);
    assert_eq!(code, EXIT_USAGE);
    assert!(out.is_empty());
    assert!(err.contains("counterfactual"));
}

#[test]
fn estimate_with_bootstrap() {
    golden(
        "estimate_backdoor",
        &[
            "estimate", "--graph", "@backdoor.cg", "--query", "P(Y=1|do(X=1))", "--data", "@backdoor.csv", "--bootstrap", "200",
            "--seed", "3",
        ],
        EXIT_OK,
    );
}

#[test]
fn estimate_porcelain_with_fit() {
    golden(
        "estimate_chain",
        &["estimate", "--graph", "@chain.cg", "--query", "P(Y=1|do(X=1))", "--data", "@chain.csv", "--porcelain"],
        EXIT_OK,
    );
}

#[test]
fn estimate_non_identifiable_exits_two() {
    let (code, out, _) = call(&["estimate", "--graph", "@bow.cg", "--query", "P(Y=1|do(X=1))", "--data", "@backdoor.csv"]);
    assert_eq!(code, EXIT_NON_IDENTIFIABLE);
    assert!(out.is_empty());
}

#[test]
fn estimate_with_missing_data_exits_three() {
    let (code, _, err) = call(&["estimate", "--graph", "@missing.mg", "--query", "P(Y=1)", "--data", "@missing.csv"]);
    // the m-graph is not a plain graph file
    assert_eq!(code, EXIT_USAGE, "{err}");
    let (code, _, err) = call(&["fit", "--graph", "@bow.cg", "--data", "@missing.csv"]);
    assert_eq!(code, EXIT_INSUFFICIENT, "{err}");
    let (code, _, err) = call(&["estimate", "--graph", "@bow.cg", "--query", "P(Y=1)", "--data", "@missing.csv"]);
    assert_eq!(code, EXIT_INSUFFICIENT, "{err}");
    assert!(err.contains("missing values"));
}

#[test]
fn estimate_needs_fixed_values() {
    let (code, _, err) = call(&["estimate", "--graph", "@backdoor.cg", "--query", "P(Y|do(X))", "--data", "@backdoor.csv"]);
    assert_eq!(code, EXIT_USAGE);
    assert!(err.contains("fixed"));
}

#[test]
fn fit_null_and_tables() {
    golden("fit_backdoor", &["fit", "--graph", "@backdoor.cg", "--data", "@backdoor.csv"], EXIT_OK);
    let (_, out, _) = call(&["fit", "--graph", "@backdoor.cg", "--data", "@backdoor.csv"]);
    assert_eq!(out, "NULL\n");
    golden("fit_chain", &["fit", "--graph", "@chain.cg", "--data", "@chain.csv"], EXIT_OK);
    golden("fit_chain_rejected", &["fit", "--graph", "@chain.cg", "--data", "@backdoor.csv", "--porcelain"], EXIT_OK);
}

#[test]
fn counterfactual() {
    golden(
        "counterfactual_backdoor",
        &["counterfactual", "--scm", "@backdoor.scm", "--query", "P(Y_{X=1}=1 | X=0, Y=0)"],
        EXIT_OK,
    );
    let (code, _, err) = call(&["counterfactual", "--scm", "@backdoor.scm", "--query", "P(Y_{X=1}=1 | X=7)"]);
    assert_eq!(code, EXIT_USAGE, "{err}");
}

#[test]
fn pnps_exact_and_bounds() {
    golden("pnps_scm", &["pnps", "--scm", "@backdoor.scm", "--exposure", "X", "--outcome", "Y"], EXIT_OK);
    golden(
        "pnps_data",
        &["pnps", "--data", "@backdoor.csv", "--exposure", "X", "--outcome", "Y", "--px1", "0.88", "--px0", "0.44", "--porcelain"],
        EXIT_OK,
    );
    let (code, _, err) = call(&["pnps", "--data", "@backdoor.csv", "--exposure", "X", "--outcome", "Y", "--px1", "0.9"]);
    assert_eq!(code, EXIT_USAGE, "{err}");
}

#[test]
fn mediate_both_modes() {
    golden(
        "mediate_scm",
        &["mediate", "--scm", "@mediation.scm", "--exposure", "X", "--mediator", "M", "--outcome", "Y"],
        EXIT_OK,
    );
    golden(
        "mediate_data",
        &[
            "mediate", "--graph", "@mediation.cg", "--data", "@mediation.csv", "--exposure", "X", "--mediator", "M",
            "--outcome", "Y", "--porcelain",
        ],
        EXIT_OK,
    );
    let (code, _, err) = call(&[
        "mediate", "--graph", "@frontdoor.cg", "--data", "@mediation.csv", "--exposure", "X", "--mediator", "M", "--outcome",
        "Y",
    ]);
    assert_eq!(code, EXIT_USAGE);
    assert!(err.contains("latent confounder"), "{err}");
}

#[test]
fn recover_decisions_and_estimates() {
    golden("recover_distribution", &["recover", "--graph", "@missing.mg", "--query", "P(Y)", "--data", "@missing.csv"], EXIT_OK);
    golden("recover_value", &["recover", "--graph", "@missing.mg", "--query", "P(Y=1)", "--data", "@missing.csv"], EXIT_OK);
    let err = golden("recover_selfmask", &["recover", "--graph", "@selfmask.mg", "--query", "P(Y)"], EXIT_INSUFFICIENT);
    assert!(err.contains("no implemented criterion applies"));
}

#[test]
fn discover_from_data_and_graph() {
    golden("discover_collider", &["discover", "--data", "@collider.csv"], EXIT_OK);
    golden("discover_chain", &["discover", "--graph", "@chain.cg"], EXIT_OK);
    let (_, out, _) = call(&["discover", "--graph", "@chain.cg", "--vars", "Z,Y,X"]);
    assert_eq!(out, call(&["discover", "--graph", "@chain.cg"]).1);
}

#[test]
fn binary_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_causal");
    let status = |args: &[String]| Command::new(bin).args(args).output().unwrap();
    let o = status(&["identify".into(), "--graph".into(), data("backdoor.cg"), "--query".into(), "P(Y|do(X))".into()]);
    assert_eq!(o.status.code(), Some(EXIT_OK));
    assert_eq!(String::from_utf8_lossy(&o.stdout), "sum_{z} P(y|x,z) * P(z)\n");
    let o = status(&["identify".into(), "--graph".into(), data("bow.cg"), "--query".into(), "P(Y|do(X))".into()]);
    assert_eq!(o.status.code(), Some(EXIT_NON_IDENTIFIABLE));
    assert!(o.stdout.is_empty());
    let o = status(&["estimate".into()]);
    assert_eq!(o.status.code(), Some(EXIT_USAGE));
    let o = status(&["--help".into()]);
    assert_eq!(o.status.code(), Some(EXIT_OK));
}
