//! Convergence measurement: the energy function, per-round records, the
//! centralized reference solver and communication accounting.

use std::fmt::Write as _;

use thiserror::Error;

use crate::algorithm::Algorithm;
use crate::linalg::{cholesky, LinalgError, Matrix, Vector};
use crate::problem::{ConsensusProblem, GaussianStream};

/// Column order of the per-round CSV trace.
pub const CSV_HEADER: &str =
    "round,consensus_residual,objective_at_z,energy,dual_sum_norm,floats_up,floats_down,wall_ms";

/// Whether a reference point is the unique optimum or only a local minimizer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReferenceKind {
    Global,
    Local,
}

impl ReferenceKind {
    pub fn name(self) -> &'static str {
        match self {
            ReferenceKind::Global => "global",
            ReferenceKind::Local => "local",
        }
    }
}

/// `(z*, λ*)` with `λ*_i = −∇f_i(z*)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceSolution {
    pub z: Vector,
    pub duals: Vec<Vector>,
    /// `‖Σ_i ∇f_i(z*)‖`
    pub gradient_norm: f64,
    pub kind: ReferenceKind,
}

#[derive(Debug, Error)]
pub enum ReferenceError {
    #[error("centralized Newton did not converge (gradient norm {gradient_norm:e} after {iterations} iterations)")]
    MaxIterExceeded { gradient_norm: f64, iterations: usize },
    #[error("non-finite value in centralized Newton")]
    NonFinite,
    #[error("no multi-start run reached a strict local minimizer")]
    NoLocalMinimizer,
}

/// One row of the per-round trace.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub round: usize,
    /// `Σ_i ‖x_i − z‖`
    pub consensus_residual: f64,
    /// `Σ_i f_i(z)`
    pub objective_at_z: f64,
    pub energy: Option<f64>,
    /// `‖Σ_i λ_i‖`
    pub dual_sum_norm: f64,
    /// `max_i ‖λ_i‖`, the scale for the dual-sum check. Not part of the CSV.
    pub max_dual_norm: f64,
    pub floats_up: u64,
    pub floats_down: u64,
    pub wall_ms: f64,
}

impl IterationRecord {
    pub fn to_csv_row(&self) -> String {
        let energy = self.energy.map(format_float).unwrap_or_default();
        format!(
            "{},{},{},{},{},{},{},{}",
            self.round,
            format_float(self.consensus_residual),
            format_float(self.objective_at_z),
            energy,
            format_float(self.dual_sum_norm),
            self.floats_up,
            self.floats_down,
            format_float(self.wall_ms),
        )
    }
}

/// Shortest decimal that round-trips to the same `f64`; scientific notation
/// outside `[1e-4, 1e16)`.
pub fn format_float(v: f64) -> String {
    let a = v.abs();
    if v == 0.0 || !v.is_finite() || (1e-4..1e16).contains(&a) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

/// Measures of one round's iterate, shared by every algorithm.
#[derive(Debug)]
pub struct RoundSnapshot<'a> {
    pub locals: &'a [&'a Vector],
    pub z: &'a Vector,
    pub duals: &'a [&'a Vector],
}

impl RoundSnapshot<'_> {
    pub fn consensus_residual(&self) -> f64 {
        self.locals.iter().map(|x| x.sub(self.z).norm()).sum()
    }

    pub fn dual_sum(&self) -> Vector {
        let mut sum = Vector::zeros(self.z.len());
        for lambda in self.duals {
            sum.add_assign(lambda);
        }
        sum
    }

    pub fn max_dual_norm(&self) -> f64 {
        self.duals.iter().fold(0.0, |m, l| m.max(l.norm()))
    }
}

/// Energy `Σ_i (‖λ_i − λ*_i‖²_{B_i⁻¹} + ‖z − z*‖²_{B_i})`.
pub fn energy(
    z: &Vector,
    duals: &[&Vector],
    reference: &ReferenceSolution,
    metrics: &[&Matrix],
) -> Result<f64, LinalgError> {
    let dz = z.sub(&reference.z);
    let mut total = 0.0;
    for ((lambda, lambda_ref), b) in duals.iter().zip(&reference.duals).zip(metrics) {
        let factor = cholesky(b)?;
        total += factor.inverse_quad_form(&lambda.sub(lambda_ref))? + b.quad_form(&dz);
    }
    Ok(total)
}

/// Energy with `B_i = ρI` for every agent.
pub fn energy_scaled_identity(
    z: &Vector,
    duals: &[&Vector],
    reference: &ReferenceSolution,
    rho: f64,
) -> f64 {
    let dz = z.sub(&reference.z).norm();
    duals
        .iter()
        .zip(&reference.duals)
        .map(|(lambda, lambda_ref)| {
            let dl = lambda.sub(lambda_ref).norm();
            dl * dl / rho + rho * dz * dz
        })
        .sum()
}

/// Newton on `F(z) = Σ_i f_i(z)` to `‖∇F‖ ≤ tol`, from `start` (zero when
/// absent). The result is labelled [`ReferenceKind::Global`]; convexity is the
/// caller's responsibility.
pub fn centralized_solve(
    problem: &ConsensusProblem,
    tol: f64,
    start: Option<&Vector>,
) -> Result<ReferenceSolution, ReferenceError> {
    let z = centralized_newton(problem, tol, start, 200)?;
    Ok(reference_at(problem, z, ReferenceKind::Global))
}

/// Multi-start centralized Newton for non-convex problems: `starts` seeded
/// starting points drawn from `N(0, start_std²)`. The lowest-objective strict
/// local minimizer (positive definite `∇²F`) is kept and labelled
/// [`ReferenceKind::Local`].
pub fn centralized_multistart(
    problem: &ConsensusProblem,
    tol: f64,
    starts: usize,
    seed: u64,
    start_std: f64,
) -> Result<ReferenceSolution, ReferenceError> {
    let n = problem.dim();
    let mut stream = GaussianStream::new(seed);
    let mut best: Option<(f64, Vector)> = None;
    for _ in 0..starts {
        let start = Vector::from_vec(stream.take(n, start_std));
        let Ok(z) = centralized_newton(problem, tol, Some(&start), 200) else {
            continue;
        };
        if crate::linalg::min_eig_lower_bound(&problem.total_hessian(&z)) <= 0.0 {
            continue;
        }
        let value = problem.total_value(&z);
        if best.as_ref().is_none_or(|(v, _)| value < *v) {
            best = Some((value, z));
        }
    }
    let (_, z) = best.ok_or(ReferenceError::NoLocalMinimizer)?;
    Ok(reference_at(problem, z, ReferenceKind::Local))
}

fn reference_at(problem: &ConsensusProblem, z: Vector, kind: ReferenceKind) -> ReferenceSolution {
    let duals: Vec<Vector> = problem
        .agents()
        .map(|f| f.gradient(&z).scale(-1.0))
        .collect();
    let gradient_norm = problem.total_gradient(&z).norm();
    ReferenceSolution {
        z,
        duals,
        gradient_norm,
        kind,
    }
}

fn centralized_newton(
    problem: &ConsensusProblem,
    tol: f64,
    start: Option<&Vector>,
    max_iter: usize,
) -> Result<Vector, ReferenceError> {
    let mut z = start.cloned().unwrap_or_else(|| Vector::zeros(problem.dim()));
    let mut value = problem.total_value(&z);
    let mut grad = problem.total_gradient(&z);
    for iteration in 0..max_iter {
        if !value.is_finite() || !grad.is_finite() {
            return Err(ReferenceError::NonFinite);
        }
        let grad_norm = grad.norm();
        if grad_norm <= tol {
            return Ok(z);
        }
        let hessian = problem.total_hessian(&z);
        let mut shift = 0.0;
        let factor = loop {
            match cholesky(&hessian.shifted(shift)) {
                Ok(f) => break f,
                Err(_) => shift = if shift == 0.0 { 1e-8 } else { shift * 10.0 },
            }
            if !shift.is_finite() {
                return Err(ReferenceError::NonFinite);
            }
        };
        let step = factor
            .solve(&grad)
            .map_err(|_| ReferenceError::NonFinite)?
            .scale(-1.0);
        let slope = grad.dot(&step);
        let noise = 16.0 * f64::EPSILON * (1.0 + value.abs());
        let mut t = 1.0;
        let mut moved = false;
        for _ in 0..60 {
            let mut trial = z.clone();
            trial.axpy(t, &step);
            let trial_value = problem.total_value(&trial);
            let sufficient = trial_value <= value + 1e-4 * t * slope;
            let flat = t == 1.0 && trial_value <= value + noise;
            if sufficient || flat {
                let trial_grad = problem.total_gradient(&trial);
                if sufficient || trial_grad.norm() < grad_norm {
                    z = trial;
                    value = trial_value;
                    grad = trial_grad;
                    moved = true;
                    break;
                }
            }
            t *= 0.5;
        }
        if !moved {
            return Err(ReferenceError::MaxIterExceeded {
                gradient_norm: grad_norm,
                iterations: iteration,
            });
        }
    }
    if grad.norm() <= tol {
        Ok(z)
    } else {
        Err(ReferenceError::MaxIterExceeded {
            gradient_norm: grad.norm(),
            iterations: max_iter,
        })
    }
}

/// Floats moved per round.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct CommCount {
    pub up: u64,
    pub down: u64,
}

/// Per-round payload of each algorithm with `N` agents in dimension `n`.
///
/// Every scheme uploads `x_i⁺` only (`N·n`). Consensus ALADIN downloads
/// `(λ_i⁺, z⁺)` to every agent (`2·N·n`); ADMM downloads `z⁺` only (`N·n`),
/// since each agent updates its own dual.
pub fn comm_floats(algorithm: Algorithm, agents: usize, n: usize) -> CommCount {
    let per_vector = (agents * n) as u64;
    match algorithm {
        Algorithm::BfgsAladin | Algorithm::ReducedAladin | Algorithm::MatrixProxAladin => {
            CommCount {
                up: per_vector,
                down: 2 * per_vector,
            }
        }
        Algorithm::AdmmDualFirst | Algorithm::AdmmAggregateFirst => CommCount {
            up: per_vector,
            down: per_vector,
        },
    }
}

/// Upload payload if agents transmitted `(x_i⁺, g_i, B_i)` directly:
/// `2Nn + Nn²`. Reported for comparison only.
pub fn direct_qp_upload_floats(agents: usize, n: usize) -> u64 {
    (2 * agents * n + agents * n * n) as u64
}

/// Counts every scalar that crosses the agent/coordinator boundary.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CommLedger {
    up: u64,
    down: u64,
}

impl CommLedger {
    pub fn upload(&mut self, payload: &Vector) {
        self.up += payload.len() as u64;
    }

    pub fn download(&mut self, payload: &Vector) {
        self.down += payload.len() as u64;
    }

    pub fn count(&self) -> CommCount {
        CommCount {
            up: self.up,
            down: self.down,
        }
    }
}

/// Summary footer written after the per-round rows.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub rounds: usize,
    pub final_residual: f64,
    pub floats_up_total: u64,
    pub floats_down_total: u64,
    pub reference: Option<ReferenceKind>,
}

impl RunSummary {
    pub fn from_records(records: &[IterationRecord], reference: Option<ReferenceKind>) -> Self {
        Self {
            rounds: records.len(),
            final_residual: records.last().map_or(f64::NAN, |r| r.consensus_residual),
            floats_up_total: records.iter().map(|r| r.floats_up).sum(),
            floats_down_total: records.iter().map(|r| r.floats_down).sum(),
            reference,
        }
    }

    pub fn to_footer(&self) -> String {
        format!(
            "# summary,rounds={},final_residual={},floats_up_total={},floats_down_total={},reference={}",
            self.rounds,
            format_float(self.final_residual),
            self.floats_up_total,
            self.floats_down_total,
            self.reference.map_or("none", |k| k.name()),
        )
    }
}

/// Full CSV trace: header, one row per record, summary footer.
pub fn trace_csv(records: &[IterationRecord], summary: &RunSummary) -> String {
    let mut out = String::with_capacity(64 * (records.len() + 2));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in records {
        out.push_str(&r.to_csv_row());
        out.push('\n');
    }
    let _ = writeln!(out, "{}", summary.to_footer());
    out
}
