//! Identification beyond adjustment: the front-door graph, a conditional
//! query, and the bow graph where no estimand exists.

use causal_engine::graph::parse_graph;
use causal_engine::identify::{identify, parse_query, IdentifyResult};

pub fn run() -> String {
    let cases = [
        ("front door", "var X\nvar M\nvar Y\nX -> M\nM -> Y\nX <-> Y\n", "P(Y|do(X))"),
        ("napkin", "var W\nvar Z\nvar X\nvar Y\nW -> Z\nZ -> X\nX -> Y\nW <-> X\nW <-> Y\n", "P(Y|do(X))"),
        ("conditional", "var Z\nvar X\nvar W\nvar Y\nZ -> X\nX -> W\nW -> Y\nZ -> Y\n", "P(Y|do(X),W)"),
        ("bow", "var X\nvar Y\nX -> Y\nX <-> Y\n", "P(Y|do(X))"),
    ];
    let mut out = String::new();
    for (name, graph, query) in cases {
        let g = parse_graph(graph).unwrap();
        let q = parse_query(query).unwrap();
        match identify(&g, &q).unwrap() {
            IdentifyResult::Identified(e) => out += &format!("{name}: {q} = {e}\n"),
            IdentifyResult::NonIdentifiable(h) => out += &format!("{name}: {q} is not identifiable ({h})\n"),
        }
    }
    out
}

#[allow(dead_code)]
fn main() {
    print!("{}", run());
}
