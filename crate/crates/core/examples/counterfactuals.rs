//! Counterfactual queries by abduction, action and prediction, including a
//! joint query across two hypothetical worlds.

use causal_engine::scm::{assignments, CounterfactualQuery, ScmBuilder, World};

pub fn run() -> String {
    // a treatment that helps most patients but harms a few
    let m = ScmBuilder::new()
        .bernoulli("UX", 0.5)
        .exogenous("UY", &[("helped", 0.6), ("harmed", 0.1), ("always", 0.1), ("never", 0.2)])
        .endogenous("X", &["0", "1"], &["UX"], |p| p[0].to_string())
        .endogenous("Y", &["0", "1"], &["X", "UY"], |p| {
            let recover = match p[1] {
                "helped" => p[0] == "1",
                "harmed" => p[0] == "0",
                "always" => true,
                _ => false,
            };
            if recover { "1" } else { "0" }.to_string()
        })
        .build()
        .unwrap();
    let mut out = String::new();
    for text in ["P(Y_{X=1}=1 | X=0, Y=0)", "P(Y_{X=0}=0 | X=1, Y=1)", "P(Y_{X=1}=1 | X=1, Y=1)"] {
        let q = CounterfactualQuery::parse(text).unwrap();
        out += &format!("{text} = {:.4}\n", m.counterfactual_query(&q).unwrap());
    }
    let both = m
        .joint_counterfactual(
            &[
                World { antecedent: assignments(&[("X", "1")]), target: assignments(&[("Y", "1")]) },
                World { antecedent: assignments(&[("X", "0")]), target: assignments(&[("Y", "0")]) },
            ],
            &[],
        )
        .unwrap();
    out += &format!("P(Y_{{X=1}}=1, Y_{{X=0}}=0) = {both:.4}\n");
    out
}

#[allow(dead_code)]
fn main() {
    print!("{}", run());
}
