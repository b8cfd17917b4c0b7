//! Consensus ALADIN rounds.
//!
//! One round, for every variant:
//!
//! 1. each agent solves `min f_i(x) + λ_iᵀx + ½‖x − z‖²_P` (warm-started) and
//!    uploads `x_i⁺`;
//! 2. the coordinator recovers `g_i = P(z − x_i⁺) − λ_i`, and for the BFGS
//!    variant `s_i = x_i⁺ − x_i⁻`, `y_i = g_i − g_i⁻` and a damped BFGS update
//!    of `B_i` when the schedule asks for one;
//! 3. `z⁺ = (Σ B_i)⁻¹ Σ (B_i x_i⁺ − g_i)` (BFGS, matrix prox) or
//!    `z⁺ = (1/N) Σ (x_i⁺ − g_i/ρ)` (reduced);
//! 4. `λ_i⁺ = B_i(x_i⁺ − z⁺) − g_i` and `(λ_i⁺, z⁺)` is downloaded to agent `i`.
//!
//! `P = ρI` for the BFGS and reduced variants and `P = B_i` (held constant)
//! for the matrix-prox variant. All reductions run in agent-index order.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::diagnostics::{energy, CommLedger, IterationRecord, ReferenceSolution, RoundSnapshot};
use crate::exec::AgentExecutor;
use crate::linalg::{cholesky, LinalgError, Matrix, Vector};
use crate::local_solver::{solve_subproblem, NewtonOptions, Prox, SubproblemError, SubproblemSpec};
use crate::problem::ConsensusProblem;

/// Damping fires when `sᵀy ≤ DAMPING_RATIO · sᵀBs`.
pub const DAMPING_RATIO: f64 = 0.2;
/// Relative step length below which a BFGS update is skipped.
pub const SKIP_STEP_RATIO: f64 = 1e-12;
const DAMPING_DENOMINATOR_TOL: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    Bfgs,
    Reduced,
    MatrixProx,
}

/// When the BFGS variant refreshes its Hessian approximations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum HessianSchedule {
    #[default]
    EveryRound,
    /// Only at rounds `K, K², K³, …` (`K ≥ 2`).
    Powers(u64),
    Never,
}

impl HessianSchedule {
    /// Whether round `k` (1-based) is an update round.
    pub fn updates_at(&self, round: u64) -> bool {
        match *self {
            HessianSchedule::EveryRound => true,
            HessianSchedule::Never => false,
            HessianSchedule::Powers(base) => {
                if base < 2 || round < base {
                    return false;
                }
                let mut power = base;
                while power < round {
                    match power.checked_mul(base) {
                        Some(p) => power = p,
                        None => return false,
                    }
                }
                power == round
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AladinSettings {
    pub variant: Variant,
    pub rho: f64,
    pub schedule: HessianSchedule,
    pub newton: NewtonOptions,
}

impl AladinSettings {
    pub fn new(variant: Variant, rho: f64) -> Self {
        Self {
            variant,
            rho,
            schedule: HessianSchedule::EveryRound,
            newton: NewtonOptions::default(),
        }
    }
}

/// Coordinator-side record of one agent.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentState {
    pub x: Vector,
    pub x_prev: Vector,
    pub lambda: Vector,
    pub g: Vector,
    /// Gradient of the previous round, once two rounds have run.
    pub g_prev: Option<Vector>,
    pub b: Matrix,
    rounds_seen: u64,
}

impl AgentState {
    /// Zero primal and dual, `B = ρI`.
    pub fn initial(n: usize, rho: f64) -> Self {
        Self::new(Vector::zeros(n), Vector::zeros(n), Matrix::scaled_identity(n, rho))
    }

    pub fn new(x: Vector, lambda: Vector, b: Matrix) -> Self {
        let n = x.len();
        Self {
            x_prev: x.clone(),
            x,
            lambda,
            g: Vector::zeros(n),
            g_prev: None,
            b,
            rounds_seen: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoordinatorState {
    pub z: Vector,
    pub round: u64,
}

impl CoordinatorState {
    pub fn new(z: Vector) -> Self {
        Self { z, round: 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SkippedUpdate {
    /// `‖s‖` at or below the skip threshold.
    ShortStep,
    /// `|sᵀBs − sᵀy|` too small to form the damping weight.
    DegenerateDamping,
    /// The update is SPD in exact arithmetic but failed to factor in floating point.
    LostDefiniteness,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BfgsUpdate {
    pub b: Matrix,
    /// Damping weight `θ`, when damping fired.
    pub theta: Option<f64>,
    /// The (possibly damped) `y` that entered the update.
    pub y: Vector,
}

/// `g = P(z − x⁺) − λ`: the gradient of `f` at an exact subproblem minimizer.
pub fn recover_gradient(prox: Prox<'_>, z: &Vector, x_plus: &Vector, lambda: &Vector) -> Vector {
    prox.apply(&z.sub(x_plus)).sub(lambda)
}

/// `λ⁺ = P(x⁺ − z⁺) − g`
pub fn recover_dual(prox: Prox<'_>, x_plus: &Vector, z_plus: &Vector, g: &Vector) -> Vector {
    prox.apply(&x_plus.sub(z_plus)).sub(g)
}

/// Powell-damped BFGS update of `B` with the pair `(s, y)`.
///
/// If `sᵀy ≤ 0.2·sᵀBs`, `y` is first replaced by `y + θ(Bs − y)` with
/// `θ = (0.2·sᵀBs − sᵀy)/(sᵀBs − sᵀy)`, which makes `sᵀy = 0.2·sᵀBs > 0` and
/// keeps the update positive definite.
pub fn damped_bfgs_update(
    b: &Matrix,
    s: &Vector,
    y: &Vector,
    skip_threshold: f64,
) -> Result<BfgsUpdate, SkippedUpdate> {
    if s.norm() <= skip_threshold {
        return Err(SkippedUpdate::ShortStep);
    }
    let bs = b.mul_vec(s);
    let sbs = s.dot(&bs);
    let sy = s.dot(y);
    let (y, theta) = if sy <= DAMPING_RATIO * sbs {
        let denom = sbs - sy;
        if denom.abs() <= DAMPING_DENOMINATOR_TOL {
            return Err(SkippedUpdate::DegenerateDamping);
        }
        let theta = (DAMPING_RATIO * sbs - sy) / denom;
        let mut damped = y.clone();
        damped.axpy(theta, &bs.sub(y));
        (damped, Some(theta))
    } else {
        (y.clone(), None)
    };
    let sy = s.dot(&y);
    let n = b.dim();
    let mut next = b.clone();
    for i in 0..n {
        for j in 0..n {
            next[(i, j)] += y[i] * y[j] / sy - bs[i] * bs[j] / sbs;
        }
    }
    if cholesky(&next).is_err() {
        return Err(SkippedUpdate::LostDefiniteness);
    }
    Ok(BfgsUpdate { b: next, theta, y })
}

/// `z = (Σ B_i)⁻¹ Σ (B_i x_i − g_i)` over the agents' current `(x, g, B)`.
pub fn update_global_bfgs(states: &[AgentState]) -> Result<Vector, LinalgError> {
    let n = states.first().map_or(0, |s| s.x.len());
    let mut b_sum = Matrix::zeros(n);
    let mut rhs = Vector::zeros(n);
    for s in states {
        b_sum.add_assign(&s.b);
        rhs.add_assign(&s.b.mul_vec(&s.x).sub(&s.g));
    }
    cholesky(&b_sum)?.solve(&rhs)
}

/// `z = (1/N) Σ (x_i − g_i/ρ)`
pub fn update_global_reduced(rho: f64, x_plus: &[Vector], g: &[Vector]) -> Vector {
    let n = x_plus.first().map_or(0, |x| x.len());
    let mut sum = Vector::zeros(n);
    for (x, gi) in x_plus.iter().zip(g) {
        sum.add_assign(x);
        sum.axpy(-1.0 / rho, gi);
    }
    sum.scale(1.0 / x_plus.len() as f64)
}

/// Every block of the coupled QP
/// `min Σ ½Δx_iᵀB_iΔx_i + g_iᵀΔx_i  s.t.  x_i + Δx_i = z | λ_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct KktSolution {
    pub z: Vector,
    pub duals: Vec<Vector>,
    pub steps: Vec<Vector>,
}

#[derive(Debug, Error)]
#[error("KKT system of the consensus QP is singular")]
pub struct SingularKkt;

/// Brute-force solve of the full `(2N+1)n` KKT system by dense LU. Intended
/// as a check on the closed-form coordinator update.
///
/// Unknowns are ordered `[Δx_1 … Δx_N, z, λ_1 … λ_N]`; rows are
/// `B_iΔx_i + λ_i = −g_i`, `−Σλ_i = 0`, `Δx_i − z = −x_i`.
pub fn kkt_oracle(states: &[AgentState]) -> Result<KktSolution, SingularKkt> {
    let agents = states.len();
    let n = states.first().map_or(0, |s| s.x.len());
    let dim = (2 * agents + 1) * n;
    let z_off = agents * n;
    let lam_off = z_off + n;
    let mut k = DMatrix::<f64>::zeros(dim, dim);
    let mut rhs = DVector::<f64>::zeros(dim);
    for (i, s) in states.iter().enumerate() {
        let dx = i * n;
        let lam = lam_off + i * n;
        for r in 0..n {
            for c in 0..n {
                k[(dx + r, dx + c)] = s.b[(r, c)];
            }
            k[(dx + r, lam + r)] = 1.0;
            rhs[dx + r] = -s.g[r];

            k[(z_off + r, lam + r)] = -1.0;

            k[(lam + r, dx + r)] = 1.0;
            k[(lam + r, z_off + r)] = -1.0;
            rhs[lam + r] = -s.x[r];
        }
    }
    let sol = k.lu().solve(&rhs).ok_or(SingularKkt)?;
    let block = |off: usize| Vector::from_vec(sol.rows(off, n).iter().copied().collect());
    Ok(KktSolution {
        z: block(z_off),
        duals: (0..agents).map(|i| block(lam_off + i * n)).collect(),
        steps: (0..agents).map(|i| block(i * n)).collect(),
    })
}

#[derive(Debug, Error)]
pub enum RoundError {
    #[error("agent {agent} failed its local solve in round {round}: {source}")]
    Subproblem {
        agent: usize,
        round: u64,
        #[source]
        source: SubproblemError,
    },
    #[error("coordinator update failed in round {round}: {source}")]
    Coordinator {
        round: u64,
        #[source]
        source: LinalgError,
    },
}

/// What a round produced besides the record.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundOutcome {
    pub record: IterationRecord,
    /// Agents whose scheduled BFGS update was skipped, with the reason.
    pub skipped: Vec<(usize, SkippedUpdate)>,
    /// Agents whose BFGS update ran with damping.
    pub damped: Vec<usize>,
}

/// Executes one Consensus ALADIN round in place.
pub fn run_round(
    problem: &ConsensusProblem,
    settings: &AladinSettings,
    agents: &mut [AgentState],
    coord: &mut CoordinatorState,
    reference: Option<&ReferenceSolution>,
    exec: &AgentExecutor,
) -> Result<RoundOutcome, RoundError> {
    let started = Instant::now();
    let rho = settings.rho;
    let variant = settings.variant;
    coord.round += 1;
    let round = coord.round;
    let count = agents.len();
    let mut ledger = CommLedger::default();

    // 1. local solves
    let z = &coord.z;
    let snapshot: &[AgentState] = agents;
    let solves = exec.map(count, |i| {
        let state = &snapshot[i];
        let prox = match variant {
            Variant::MatrixProx => Prox::Matrix(&state.b),
            Variant::Bfgs | Variant::Reduced => Prox::Scalar(rho),
        };
        let spec = SubproblemSpec {
            oracle: problem.agent(i),
            dual: &state.lambda,
            anchor: z,
            prox,
        };
        solve_subproblem(&spec, &state.x, &settings.newton)
    });
    let mut x_plus = Vec::with_capacity(count);
    for (agent, result) in solves.into_iter().enumerate() {
        let report = result.map_err(|source| RoundError::Subproblem {
            agent,
            round,
            source,
        })?;
        ledger.upload(&report.minimizer);
        x_plus.push(report.minimizer);
    }

    // 2. gradient recovery and Hessian approximation
    let mut skipped = Vec::new();
    let mut damped = Vec::new();
    let update_now = variant == Variant::Bfgs && settings.schedule.updates_at(round);
    for (i, (state, x_new)) in agents.iter_mut().zip(x_plus).enumerate() {
        let g_new = match variant {
            Variant::MatrixProx => recover_gradient(Prox::Matrix(&state.b), &coord.z, &x_new, &state.lambda),
            Variant::Bfgs | Variant::Reduced => {
                recover_gradient(Prox::Scalar(rho), &coord.z, &x_new, &state.lambda)
            }
        };
        state.x_prev = std::mem::replace(&mut state.x, x_new);
        let g_old = std::mem::replace(&mut state.g, g_new);
        state.g_prev = (state.rounds_seen > 0).then_some(g_old);
        state.rounds_seen += 1;

        if update_now {
            if let Some(g_prev) = &state.g_prev {
                let s = state.x.sub(&state.x_prev);
                let y = state.g.sub(g_prev);
                let threshold = SKIP_STEP_RATIO * (1.0 + state.x.norm());
                match damped_bfgs_update(&state.b, &s, &y, threshold) {
                    Ok(update) => {
                        if update.theta.is_some() {
                            damped.push(i);
                        }
                        state.b = update.b;
                    }
                    Err(reason) => skipped.push((i, reason)),
                }
            }
        }
    }

    // 3. global update
    let z_plus = match variant {
        Variant::Bfgs | Variant::MatrixProx => update_global_bfgs(agents)
            .map_err(|source| RoundError::Coordinator { round, source })?,
        Variant::Reduced => {
            let xs: Vec<Vector> = agents.iter().map(|s| s.x.clone()).collect();
            let gs: Vec<Vector> = agents.iter().map(|s| s.g.clone()).collect();
            update_global_reduced(rho, &xs, &gs)
        }
    };

    // 4. dual recovery and download
    for state in agents.iter_mut() {
        state.lambda = match variant {
            Variant::Reduced => recover_dual(Prox::Scalar(rho), &state.x, &z_plus, &state.g),
            Variant::Bfgs | Variant::MatrixProx => {
                recover_dual(Prox::Matrix(&state.b), &state.x, &z_plus, &state.g)
            }
        };
        ledger.download(&state.lambda);
        ledger.download(&z_plus);
    }
    coord.z = z_plus;

    let locals: Vec<&Vector> = agents.iter().map(|s| &s.x).collect();
    let duals: Vec<&Vector> = agents.iter().map(|s| &s.lambda).collect();
    let snap = RoundSnapshot {
        locals: &locals,
        z: &coord.z,
        duals: &duals,
    };
    let energy = match reference {
        Some(r) => {
            let metrics: Vec<&Matrix> = agents.iter().map(|s| &s.b).collect();
            Some(
                energy(&coord.z, &duals, r, &metrics)
                    .map_err(|source| RoundError::Coordinator { round, source })?,
            )
        }
        None => None,
    };
    let comm = ledger.count();
    let record = IterationRecord {
        round: round as usize,
        consensus_residual: snap.consensus_residual(),
        objective_at_z: problem.total_value(&coord.z),
        energy,
        dual_sum_norm: snap.dual_sum().norm(),
        max_dual_norm: snap.max_dual_norm(),
        floats_up: comm.up,
        floats_down: comm.down,
        wall_ms: started.elapsed().as_secs_f64() * 1e3,
    };
    Ok(RoundOutcome {
        record,
        skipped,
        damped,
    })
}
