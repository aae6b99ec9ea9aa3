//! Recovering a distribution when the outcome goes missing more often for
//! treated units, and refusing when the outcome masks itself.

use std::collections::BTreeMap;

use causal_engine::recover::{parse_mgraph, recover_estimate, recoverability};
use causal_engine::scm::parse_scm;

const MODEL: &str = "\
exo UX {0: 0.5, 1: 0.5}
exo UY {0: 0.9, 1: 0.1}
exo UR {0: 0.2, 1: 0.7, 2: 0.1}
endo X (UX) {(0) -> 0, (1) -> 1}
endo Y (X, UY) {(0,0) -> 0, (0,1) -> 1, (1,0) -> 1, (1,1) -> 0}
endo RY (X, UR) {(0,0) -> 0, (0,1) -> 0, (0,2) -> 1, (1,0) -> 0, (1,1) -> 1, (1,2) -> 1}
";

pub fn run() -> String {
    let m = parse_scm(MODEL).unwrap();
    let full = m.sample(50_000, 5);
    let observed = full.mask_by_indicator("Y", "RY", "1").unwrap().select(&["X", "Y"]).unwrap();
    let y = observed.require_column("Y").unwrap();
    let complete: Vec<_> = observed.rows().iter().filter(|r| r[y].is_some()).collect();
    let naive = complete.iter().filter(|r| observed.domains()[y][r[y].unwrap()] == "1").count() as f64 / complete.len() as f64;

    let mg = parse_mgraph("var X\nvar Y\nX -> Y\nmissing Y\nX -> R_Y\n").unwrap();
    let decision = recoverability(&mg, &["Y"]).unwrap();
    let values = BTreeMap::from([("Y".to_string(), "1".to_string())]);
    let est = recover_estimate(&mg, &observed, &["Y"], &values).unwrap();
    let mut out = format!("{} of {} outcomes observed\n", complete.len(), observed.n_rows());
    out += &format!("decision: {decision}\n");
    out += &format!("P(Y=1): true 0.5000, complete cases {naive:.4}, recovered {:.4}\n", est.value);

    let selfmask = parse_mgraph("var X\nvar Y\nX -> Y\nmissing Y\nY -> R_Y\n").unwrap();
    out += &format!("self-masking outcome: {}\n", recoverability(&selfmask, &["Y"]).unwrap());
    out
}

#[allow(dead_code)]
fn main() {
    print!("{}", run());
}
