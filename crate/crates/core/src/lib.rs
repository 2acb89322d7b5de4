//! Copositivity tests for forms over the PSD cone and over products of the
//! PSD cone with a nonnegative orthant, via strengthened moment relaxations.

pub mod conegen;
pub mod copotest;
pub mod corpus;
pub mod moment;
pub mod poly;
pub mod sdp;

pub use conegen::{build_problem_spec, build_problem_spec_with, ConeGenError, ProblemSpec};
pub use copotest::{
    extract_witness, flat_truncation, sample_generic_direction, test_copositivity, Backend, CopoError, TestOptions,
    TestReport, Verdict,
};
pub use corpus::{CorpusCase, CorpusError, FormTag};
pub use moment::{LinearFunctional, LinearMatrixMap, MomentError, MomentIndex};
pub use poly::{Monomial, PolyError, PolyMatrix, Polynomial, VarSpace};
pub use sdp::{
    assemble_auxiliary, assemble_relaxation, export_sdpa, parse_sdpa, solve, ConicProblem, ExternalSolver, SdpError,
    SolveResult, SolveStatus, SolverOptions,
};
