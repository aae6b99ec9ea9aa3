//! Probabilities of necessity and sufficiency: exact values from a fully
//! specified model next to the bounds available from observational and
//! experimental data alone.

use causal_engine::counterfactual_metrics::{experimental_inputs, pn_ps_exact, pnps_bounds, Polarity};
use causal_engine::scm::parse_scm;

const MODEL: &str = "\
exo UZ {0: 0.6, 1: 0.4}
exo UX {0: 0.7, 1: 0.3}
exo UY {0: 0.8, 1: 0.2}
endo Z (UZ) {(0) -> 0, (1) -> 1}
endo X (Z, UX) {(0,0) -> 0, (0,1) -> 1, (1,0) -> 1, (1,1) -> 0}
endo Y (X, Z, UY) {(0,0,0) -> 0, (0,0,1) -> 1, (0,1,0) -> 1, (0,1,1) -> 0, (1,0,0) -> 1, (1,0,1) -> 0, (1,1,0) -> 1, (1,1,1) -> 1}
";

pub fn run() -> String {
    let m = parse_scm(MODEL).unwrap();
    let pol = Polarity::default();
    let exact = pn_ps_exact(&m, "X", "Y", &pol).unwrap();
    let (px1, px0) = experimental_inputs(&m, "X", "Y", &pol).unwrap();
    let bounds = pnps_bounds(&m.observational_joint().unwrap(), "X", "Y", px1, px0, &pol).unwrap();
    format!("P(y_x) = {px1:.4}, P(y_x') = {px0:.4}\nexact:\n{exact}bounds:\n{bounds}")
}

#[allow(dead_code)]
fn main() {
    print!("{}", run());
}
