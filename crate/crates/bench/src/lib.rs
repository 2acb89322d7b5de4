//! Fixtures shared by the benchmarks in `benches/`.

use psdcopo::{build_problem_spec_with, corpus, Polynomial, ProblemSpec, VarSpace};

/// A named corpus case as `(f, space, spec)`.
pub fn fixture(suite: &str, name: &str) -> (Polynomial, VarSpace, ProblemSpec) {
    let case = corpus::suite(suite)
        .expect("known suite")
        .into_iter()
        .find(|c| c.name == name)
        .expect("known case");
    let f = case.polynomial().expect("corpus cases parse");
    let space = case.space();
    let spec = build_problem_spec_with(&f, space, case.allow_inhomogeneous).expect("corpus cases are valid");
    (f, space, spec)
}
