//! The outer copositivity test: relaxation loop, auxiliary witness search,
//! flat-truncation exit and verdicts.

use std::time::{Duration, Instant};

use nalgebra::{DMatrix, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

use crate::conegen::{build_problem_spec_with, ConeGenError, ProblemSpec};
use crate::moment::{moment_matrix, MomentIndex, MonomialBasis};
use crate::poly::{Polynomial, VarSpace};
use crate::sdp::{
    assemble_auxiliary, assemble_relaxation, solve, ConicProblem, ExternalSolver, SdpError, SolveResult, SolveStatus,
    SolverOptions,
};

#[derive(Debug, Error)]
pub enum CopoError {
    #[error("k_start = {k} is below the minimal order {d0}")]
    OrderTooLow { k: u32, d0: u32 },
    #[error("tol_nonneg must be positive")]
    BadTolerance,
    #[error("moment vector normalization is {0}, expected 1")]
    Normalization(f64),
    #[error("moment vector too short for the space")]
    ShortMomentVector,
    #[error(transparent)]
    ConeGen(#[from] ConeGenError),
    #[error(transparent)]
    Sdp(#[from] SdpError),
}

/// Where conic programs are solved.
#[derive(Debug, Clone, PartialEq)]
pub enum Backend {
    Internal(SolverOptions),
    External(ExternalSolver),
}

impl Default for Backend {
    fn default() -> Self {
        Backend::Internal(SolverOptions::default())
    }
}

impl Backend {
    pub fn solve(&self, problem: &ConicProblem) -> Result<SolveResult, String> {
        match self {
            Backend::Internal(o) => Ok(solve(problem, o)),
            Backend::External(e) => e.solve(problem).map_err(|e| e.to_string()),
        }
    }

    /// Same backend with tolerances tightened tenfold and a doubled iteration budget.
    fn tightened(&self) -> Backend {
        match self {
            Backend::Internal(o) => Backend::Internal(SolverOptions {
                eps_feas: o.eps_feas * 0.1,
                eps_gap: o.eps_gap * 0.1,
                max_iter: o.max_iter * 2,
                ..*o
            }),
            other => other.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TestOptions {
    /// Defaults to `d0`.
    pub k_start: Option<u32>,
    /// Defaults to `d0 + 4`.
    pub k_max: Option<u32>,
    pub tol_nonneg: f64,
    pub rank_tol: f64,
    pub seed: u64,
    pub backend: Backend,
    pub allow_inhomogeneous: bool,
    /// Slack added to the relaxation value in the auxiliary program.
    pub bound_slack: f64,
}

impl Default for TestOptions {
    fn default() -> Self {
        Self {
            k_start: None,
            k_max: None,
            tol_nonneg: 1e-5,
            rank_tol: 1e-6,
            seed: 1,
            backend: Backend::default(),
            allow_inhomogeneous: false,
            bound_slack: 1e-7,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict")]
pub enum Verdict {
    Copositive {
        order: u32,
        bound: f64,
        flat_truncated: bool,
    },
    NotCopositive {
        u: Vec<f64>,
        v: Vec<f64>,
        value: f64,
        order: u32,
        /// `relaxation` for a flat-truncation atom, `auxiliary` otherwise.
        source: String,
    },
    Inconclusive {
        k_max: u32,
        best_bound: f64,
    },
    /// A conic solve failed in a way that prevents the loop from continuing.
    SolverFailure {
        order: u32,
        stage: String,
        status: Option<SolveStatus>,
        detail: String,
    },
}

impl Verdict {
    pub fn label(&self) -> &'static str {
        match self {
            Verdict::Copositive { .. } => "Copositive",
            Verdict::NotCopositive { .. } => "NotCopositive",
            Verdict::Inconclusive { .. } => "Inconclusive",
            Verdict::SolverFailure { .. } => "SolverFailure",
        }
    }

    pub fn order(&self) -> Option<u32> {
        match self {
            Verdict::Copositive { order, .. } | Verdict::NotCopositive { order, .. } | Verdict::SolverFailure { order, .. } => {
                Some(*order)
            }
            Verdict::Inconclusive { .. } => None,
        }
    }
}

/// Solver summary for one conic program.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveStats {
    pub status: SolveStatus,
    pub objective: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub gap: f64,
    pub iterations: usize,
    pub time_s: f64,
    pub nz: usize,
    pub eq_rows: usize,
    pub block_sizes: Vec<usize>,
}

impl SolveStats {
    fn new(p: &ConicProblem, r: &SolveResult) -> Self {
        Self {
            status: r.status,
            objective: r.objective_value,
            primal_residual: r.residuals.primal,
            dual_residual: r.residuals.dual,
            gap: r.residuals.gap,
            iterations: r.iterations,
            time_s: r.wall_time.as_secs_f64(),
            nz: p.nz,
            eq_rows: p.eq_rows.len(),
            block_sizes: p.block_sizes(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderRecord {
    pub order: u32,
    pub bound: f64,
    pub relaxation: SolveStats,
    pub flat_truncation: Option<u32>,
    pub auxiliary: Option<SolveStats>,
    /// Value of `f` at the repaired auxiliary witness, if one was tried.
    pub witness_value: Option<f64>,
    pub time_s: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TestReport {
    pub verdict: Verdict,
    pub orders: Vec<OrderRecord>,
    pub seed: u64,
    pub d0: u32,
    pub total_time: Duration,
}

impl TestReport {
    pub fn bound(&self) -> Option<f64> {
        self.orders.last().map(|o| o.bound)
    }

    pub fn bound_at(&self, k: u32) -> Option<f64> {
        self.orders.iter().find(|o| o.order == k).map(|o| o.bound)
    }

    /// JSON report; pass `false` to omit timings (for reproducibility checks).
    pub fn to_json(&self, timings: bool) -> serde_json::Value {
        let mut orders = serde_json::to_value(&self.orders).expect("plain data serializes");
        if !timings {
            strip_times(&mut orders);
        }
        let mut out = json!({
            "verdict": self.verdict.label(),
            "order": self.verdict.order(),
            "bound": self.bound(),
            "d0": self.d0,
            "seed": self.seed,
            "detail": self.verdict,
            "orders": orders,
        });
        if let Verdict::NotCopositive { u, v, value, .. } = &self.verdict {
            out["witness"] = json!({ "u": u, "v": v });
            out["value"] = json!(value);
        }
        if timings {
            out["time_s"] = json!(self.total_time.as_secs_f64());
        }
        out
    }
}

fn strip_times(v: &mut serde_json::Value) {
    match v {
        serde_json::Value::Object(map) => {
            map.remove("time_s");
            map.values_mut().for_each(strip_times);
        }
        serde_json::Value::Array(items) => items.iter_mut().for_each(strip_times),
        _ => {}
    }
}

/// I.i.d. standard normal coefficients for every monomial of degree `<= d`.
pub fn sample_generic_direction(space: VarSpace, d: u32, seed: u64) -> Vec<f64> {
    let len = MonomialBasis::new(space, d).len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..len).map(|_| StandardNormal.sample(&mut rng)).collect()
}

/// Numerical rank: eigenvalues above `rank_tol * max |eigenvalue|`.
pub fn numerical_rank(m: &DMatrix<f64>, rank_tol: f64) -> usize {
    let ev = m.clone().symmetric_eigenvalues();
    let top = ev.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if top == 0.0 {
        return 0;
    }
    ev.iter().filter(|v| v.abs() > rank_tol * top).count()
}

/// Smallest `t` in `[dk, k]` with `rank M_{t-dk}(z) = rank M_t(z)`.
pub fn flat_truncation(z: &[f64], index: &MomentIndex, dk: u32, rank_tol: f64) -> Option<u32> {
    flat_truncation_rank(z, index, dk, rank_tol).map(|(t, _)| t)
}

fn flat_truncation_rank(z: &[f64], index: &MomentIndex, dk: u32, rank_tol: f64) -> Option<(u32, usize)> {
    let k = index.order();
    if dk > k || z.len() != index.len() {
        return None;
    }
    let ranks: Vec<usize> = (0..=k)
        .map(|t| numerical_rank(&moment_matrix(index, t).evaluate(z), rank_tol))
        .collect();
    (dk..=k)
        .find(|&t| ranks[(t - dk) as usize] == ranks[t as usize])
        .map(|t| (t, ranks[t as usize]))
}

/// Degree-one moments `(u, v)` of `w`.
pub fn extract_witness(w: &[f64], space: VarSpace) -> Result<(Vec<f64>, Vec<f64>), CopoError> {
    let nv = space.nvars();
    if w.len() < nv + 1 {
        return Err(CopoError::ShortMomentVector);
    }
    if (w[0] - 1.0).abs() > 1e-6 {
        return Err(CopoError::Normalization(w[0]));
    }
    let u = w[1..1 + space.sigma()].to_vec();
    let v = w[1 + space.sigma()..1 + nv].to_vec();
    Ok((u, v))
}

/// `X(u)` as a dense symmetric matrix.
pub fn matrix_of(u: &[f64], space: VarSpace) -> DMatrix<f64> {
    let n = space.n();
    DMatrix::from_fn(n, n, |i, j| u[space.x_index(i, j)])
}

/// Projects `(u, v)` onto `{X(u) >= 0, v >= 0, tr X + sum v = 1}` by
/// clipping negative eigenvalues and entries and rescaling. Returns `None`
/// if nothing positive is left.
pub fn repair_witness(u: &[f64], v: &[f64], space: VarSpace) -> Option<(Vec<f64>, Vec<f64>)> {
    let eig = SymmetricEigen::new(matrix_of(u, space));
    let clipped = eig.eigenvalues.map(|l| l.max(0.0));
    let x = &eig.eigenvectors * DMatrix::from_diagonal(&clipped) * eig.eigenvectors.transpose();
    let v: Vec<f64> = v.iter().map(|t| t.max(0.0)).collect();
    let total = x.trace() + v.iter().sum::<f64>();
    if !(total > 0.0) || !total.is_finite() {
        return None;
    }
    let n = space.n();
    let mut out = vec![0.0; space.sigma()];
    for i in 0..n {
        for j in i..n {
            out[space.x_index(i, j)] = 0.5 * (x[(i, j)] + x[(j, i)]) / total;
        }
    }
    Some((out, v.iter().map(|t| t / total).collect()))
}

/// Checks the refutation invariants: `X(u) >= -1e-6 I`, `v >= -1e-8`,
/// `tr X(u) + sum v = 1 +- 1e-6` and `f(u, v) < 0`.
pub fn witness_is_valid(f: &Polynomial, u: &[f64], v: &[f64], space: VarSpace) -> bool {
    let lmin = matrix_of(u, space).symmetric_eigenvalues().min();
    let tr: f64 = (0..space.n()).map(|i| u[space.x_index(i, i)]).sum::<f64>() + v.iter().sum::<f64>();
    let point: Vec<f64> = u.iter().chain(v).copied().collect();
    let value = f.evaluate(&point).unwrap_or(f64::NAN);
    lmin >= -1e-6 && v.iter().all(|&t| t >= -1e-8) && (tr - 1.0).abs() <= 1e-6 && value < 0.0
}

/// Repairs the degree-one moments of `w` and returns `(u, v, f(u, v))`.
fn witness_from(w: &[f64], spec: &ProblemSpec) -> Option<(Vec<f64>, Vec<f64>, f64)> {
    let (u, v) = extract_witness(w, spec.space).ok()?;
    let (u, v) = repair_witness(&u, &v, spec.space)?;
    let point: Vec<f64> = u.iter().chain(&v).copied().collect();
    let value = spec.objective.evaluate(&point).ok()?;
    Some((u, v, value))
}

fn solve_with_retry(backend: &Backend, p: &ConicProblem) -> Result<SolveResult, String> {
    let r = backend.solve(p)?;
    if matches!(r.status, SolveStatus::IllPosed | SolveStatus::IterationLimit) {
        let again = backend.tightened().solve(p)?;
        if again.status.is_solved() || again.status == SolveStatus::PrimalInfeasible {
            return Ok(again);
        }
    }
    Ok(r)
}

/// Runs the copositivity test for `f` over `S^n_+ x R^m_+`.
pub fn test_copositivity(f: &Polynomial, space: VarSpace, opts: &TestOptions) -> Result<TestReport, CopoError> {
    let start = Instant::now();
    if !(opts.tol_nonneg > 0.0) {
        return Err(CopoError::BadTolerance);
    }
    let spec = build_problem_spec_with(f, space, opts.allow_inhomogeneous)?;
    let d0 = spec.d0;
    let k_start = opts.k_start.unwrap_or(d0);
    if k_start < d0 {
        return Err(CopoError::OrderTooLow { k: k_start, d0 });
    }
    let k_max = opts.k_max.unwrap_or(d0 + 4).max(k_start);
    let xi = sample_generic_direction(space, spec.degree, opts.seed);

    let mut orders = Vec::new();
    let mut best_bound = f64::NEG_INFINITY;
    let report = |verdict, orders| TestReport {
        verdict,
        orders,
        seed: opts.seed,
        d0,
        total_time: start.elapsed(),
    };

    for k in k_start..=k_max {
        let t_order = Instant::now();
        let relax = assemble_relaxation(&spec, k)?;
        let r = match solve_with_retry(&opts.backend, &relax) {
            Ok(r) => r,
            Err(detail) => {
                let v = Verdict::SolverFailure { order: k, stage: "relaxation".into(), status: None, detail };
                return Ok(report(v, orders));
            }
        };
        let mut record = OrderRecord {
            order: k,
            bound: r.objective_value,
            relaxation: SolveStats::new(&relax, &r),
            flat_truncation: None,
            auxiliary: None,
            witness_value: None,
            time_s: 0.0,
        };
        if !r.status.is_solved() {
            let v = Verdict::SolverFailure {
                order: k,
                stage: "relaxation".into(),
                status: Some(r.status),
                detail: format!("residuals {:?}", r.residuals),
            };
            record.time_s = t_order.elapsed().as_secs_f64();
            orders.push(record);
            return Ok(report(v, orders));
        }
        let bound = r.objective_value;
        best_bound = best_bound.max(bound);

        let index = MomentIndex::new(space, k);
        let flat = flat_truncation_rank(&r.z, &index, d0, opts.rank_tol);
        record.flat_truncation = flat.map(|(t, _)| t);

        if bound >= -opts.tol_nonneg {
            record.time_s = t_order.elapsed().as_secs_f64();
            orders.push(record);
            let v = Verdict::Copositive { order: k, bound, flat_truncated: flat.is_some() };
            return Ok(report(v, orders));
        }

        if let Some((_, 1)) = flat {
            if let Some((u, v, value)) = witness_from(&r.z, &spec) {
                if witness_is_valid(f, &u, &v, space) {
                    record.witness_value = Some(value);
                    record.time_s = t_order.elapsed().as_secs_f64();
                    orders.push(record);
                    let verdict = Verdict::NotCopositive { u, v, value, order: k, source: "relaxation".into() };
                    return Ok(report(verdict, orders));
                }
            }
        }

        let aux = assemble_auxiliary(&spec, &xi, bound + opts.bound_slack, k)?;
        let ra = match solve_with_retry(&opts.backend, &aux) {
            Ok(ra) => ra,
            Err(detail) => {
                record.time_s = t_order.elapsed().as_secs_f64();
                orders.push(record);
                let v = Verdict::SolverFailure { order: k, stage: "auxiliary".into(), status: None, detail };
                return Ok(report(v, orders));
            }
        };
        record.auxiliary = Some(SolveStats::new(&aux, &ra));
        if ra.status != SolveStatus::PrimalInfeasible && !ra.z.is_empty() {
            // the witness is verified directly, so a stalled iterate is still usable
            if let Some((u, v, value)) = witness_from(&ra.z, &spec) {
                record.witness_value = Some(value);
                if witness_is_valid(f, &u, &v, space) {
                    record.time_s = t_order.elapsed().as_secs_f64();
                    orders.push(record);
                    let verdict = Verdict::NotCopositive { u, v, value, order: k, source: "auxiliary".into() };
                    return Ok(report(verdict, orders));
                }
            }
        }
        record.time_s = t_order.elapsed().as_secs_f64();
        orders.push(record);
    }
    Ok(report(Verdict::Inconclusive { k_max, best_bound }, orders))
}
