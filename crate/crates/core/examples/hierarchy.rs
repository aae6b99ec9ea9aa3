//! Pairs of models that agree on one layer of the causal hierarchy and
//! disagree on the next.

use causal_engine::identify::witness::{layer_one_two_pair, layer_two_three_pair};

pub fn run() -> String {
    let mut out = String::new();
    let w = layer_one_two_pair().unwrap();
    out += &format!(
        "same observational distribution, interventions differ by {:.3}\nfirst:\n{}\nsecond:\n{}\n",
        w.disagreement_gap, w.first, w.second
    );
    let w = layer_two_three_pair().unwrap();
    out += &format!(
        "same interventional distributions, counterfactuals differ by {:.3}\nfirst:\n{}\nsecond:\n{}\n",
        w.disagreement_gap, w.first, w.second
    );
    out
}

#[allow(dead_code)]
fn main() {
    print!("{}", run());
}
