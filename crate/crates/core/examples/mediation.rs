//! Natural direct and indirect effects, computed exactly from a model and
//! by the mediation formula from a sample of it.

use causal_engine::graph::parse_graph;
use causal_engine::mediation::{mediation_effects, MediationInput, MediationQuery};
use causal_engine::scm::parse_scm;

const MODEL: &str = "\
exo UX {0: 0.5, 1: 0.5}
exo UM {0: 0.7, 1: 0.3}
exo UY {0: 0.6, 1: 0.3, 2: 0.1}
endo X (UX) {(0) -> 0, (1) -> 1}
endo M (X, UM) {(0,0) -> 0, (0,1) -> 1, (1,0) -> 1, (1,1) -> 0}
endo Y (X, M, UY) {(0,0,0) -> 0, (0,0,1) -> 1, (0,0,2) -> 1, (0,1,0) -> 1, (0,1,1) -> 0, (0,1,2) -> 1, (1,0,0) -> 0, (1,0,1) -> 1, (1,0,2) -> 0, (1,1,0) -> 1, (1,1,1) -> 1, (1,1,2) -> 0}
";

pub fn run() -> String {
    let m = parse_scm(MODEL).unwrap();
    let g = parse_graph("var X\nvar M\nvar Y\nX -> M\nM -> Y\nX -> Y\n").unwrap();
    let q = MediationQuery::new("X", "M", "Y", "0", "1");
    let exact = mediation_effects(MediationInput::Scm(&m), &q).unwrap();
    let data = m.sample(20_000, 3);
    let est = mediation_effects(MediationInput::Data { graph: &g, data: &data }, &q).unwrap();
    format!("exact:\n{exact}\nfrom 20000 samples:\n{est}")
}

#[allow(dead_code)]
fn main() {
    print!("{}", run());
}
