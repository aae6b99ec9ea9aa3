//! Structure discovery: the pattern of a DAG from its own independences,
//! and from a finite sample of a collider model.

use causal_engine::discover::{discover_cpdag, CiOracle};
use causal_engine::graph::parse_graph;
use causal_engine::scm::ScmBuilder;

pub fn run() -> String {
    let g = parse_graph("var A\nvar B\nvar C\nvar D\nA -> C\nB -> C\nC -> D\n").unwrap();
    let from_graph = discover_cpdag(&CiOracle::Graph(&g), &["A", "B", "C", "D"]).unwrap();

    let m = ScmBuilder::new()
        .bernoulli("UA", 0.5)
        .bernoulli("UB", 0.4)
        .bernoulli("UC", 0.1)
        .endogenous("A", &["0", "1"], &["UA"], |p| p[0].to_string())
        .endogenous("B", &["0", "1"], &["UB"], |p| p[0].to_string())
        .endogenous("C", &["0", "1"], &["A", "B", "UC"], |p| {
            let either = p[0] == "1" || p[1] == "1";
            ((either != (p[2] == "1")) as u8).to_string()
        })
        .build()
        .unwrap();
    let data = m.sample(10_000, 2);
    let from_data = discover_cpdag(&CiOracle::Data { data: &data, alpha: 0.01 }, &["A", "B", "C"]).unwrap();
    format!("from the graph:\n{from_graph}\nfrom 10000 samples:\n{from_data}")
}

#[allow(dead_code)]
fn main() {
    print!("{}", run());
}
