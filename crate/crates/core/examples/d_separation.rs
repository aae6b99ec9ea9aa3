//! d-separation queries and the testable implications of a small graph
//! with a latent confounder.

use causal_engine::graph::parse_graph;

pub fn run() -> String {
    let g = parse_graph("var A\nvar B\nvar C\nvar D\nA -> B\nB -> C\nC <-> D\nA -> D\n").unwrap();
    let mut out = String::new();
    for (a, b, z) in [("A", "C", vec![]), ("A", "C", vec!["B"]), ("B", "D", vec![]), ("B", "D", vec!["A"]), ("B", "D", vec!["A", "C"])] {
        let sep = g.d_separated(&[a], &[b], &z).unwrap();
        out += &format!("{a} _||_ {b} | {{{}}}: {sep}\n", z.join(","));
    }
    out += "c-components:";
    for c in g.c_components() {
        out += &format!(" {{{}}}", c.into_iter().collect::<Vec<_>>().join(","));
    }
    out += "\ntestable implications:\n";
    for s in g.testable_implications() {
        out += &format!("  {s}\n");
    }
    out
}

#[allow(dead_code)]
fn main() {
    print!("{}", run());
}
