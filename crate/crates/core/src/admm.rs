//! Consensus ADMM baselines in both update orders.
//!
//! Both share the local step `x_i⁺ = argmin f_i(x) + λ_iᵀx + (ρ/2)‖x − z‖²`.
//!
//! * dual first: `λ_i⁺ = λ_i + ρ(x_i⁺ − z)`, then `z⁺ = (1/N) Σ (x_i⁺ + λ_i⁺/ρ)`;
//! * aggregate first: `z⁺ = (1/N) Σ (x_i⁺ + λ_i/ρ)`, then `λ_i⁺ = λ_i + ρ(x_i⁺ − z⁺)`.
//!
//! Only the aggregate-first order keeps `Σ λ_i = 0` after every round.

use std::time::Instant;

use crate::aladin::RoundError;
use crate::diagnostics::{energy_scaled_identity, CommCount, CommLedger, IterationRecord, ReferenceSolution, RoundSnapshot};
use crate::exec::AgentExecutor;
use crate::linalg::Vector;
use crate::local_solver::{solve_subproblem, NewtonOptions, Prox, SubproblemSpec};
use crate::problem::ConsensusProblem;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AdmmOrder {
    DualFirst,
    AggregateFirst,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdmmAgentState {
    pub x: Vector,
    pub lambda: Vector,
}

impl AdmmAgentState {
    pub fn initial(n: usize) -> Self {
        Self {
            x: Vector::zeros(n),
            lambda: Vector::zeros(n),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdmmSettings {
    pub order: AdmmOrder,
    pub rho: f64,
    pub newton: NewtonOptions,
}

impl AdmmSettings {
    pub fn new(order: AdmmOrder, rho: f64) -> Self {
        Self {
            order,
            rho,
            newton: NewtonOptions::default(),
        }
    }
}

/// One ADMM round, dual update before aggregation.
pub fn admm_round_dual_first(
    problem: &ConsensusProblem,
    states: &mut [AdmmAgentState],
    z: &mut Vector,
    rho: f64,
    newton: &NewtonOptions,
    exec: &AgentExecutor,
) -> Result<CommCount, RoundError> {
    admm_round(problem, states, z, rho, newton, AdmmOrder::DualFirst, exec, 0).map(|l| l.count())
}

/// One ADMM round, aggregation before dual update.
pub fn admm_round_aggregate_first(
    problem: &ConsensusProblem,
    states: &mut [AdmmAgentState],
    z: &mut Vector,
    rho: f64,
    newton: &NewtonOptions,
    exec: &AgentExecutor,
) -> Result<CommCount, RoundError> {
    admm_round(problem, states, z, rho, newton, AdmmOrder::AggregateFirst, exec, 0).map(|l| l.count())
}

#[allow(clippy::too_many_arguments)]
fn admm_round(
    problem: &ConsensusProblem,
    states: &mut [AdmmAgentState],
    z: &mut Vector,
    rho: f64,
    newton: &NewtonOptions,
    order: AdmmOrder,
    exec: &AgentExecutor,
    round: u64,
) -> Result<CommLedger, RoundError> {
    let count = states.len();
    let mut ledger = CommLedger::default();
    let anchor: &Vector = z;
    let snapshot: &[AdmmAgentState] = states;
    let solves = exec.map(count, |i| {
        let spec = SubproblemSpec {
            oracle: problem.agent(i),
            dual: &snapshot[i].lambda,
            anchor,
            prox: Prox::Scalar(rho),
        };
        solve_subproblem(&spec, &snapshot[i].x, newton)
    });
    for (agent, (state, result)) in states.iter_mut().zip(solves).enumerate() {
        let report = result.map_err(|source| RoundError::Subproblem {
            agent,
            round,
            source,
        })?;
        ledger.upload(&report.minimizer);
        state.x = report.minimizer;
    }

    let mean = |states: &[AdmmAgentState]| {
        let mut sum = Vector::zeros(z.len());
        for s in states {
            sum.add_assign(&s.x);
            sum.axpy(1.0 / rho, &s.lambda);
        }
        sum.scale(1.0 / count as f64)
    };
    match order {
        AdmmOrder::DualFirst => {
            for s in states.iter_mut() {
                s.lambda.axpy(rho, &s.x.sub(z));
            }
            *z = mean(states);
        }
        AdmmOrder::AggregateFirst => {
            *z = mean(states);
            for s in states.iter_mut() {
                s.lambda.axpy(rho, &s.x.sub(z));
            }
        }
    }
    for _ in 0..count {
        ledger.download(z);
    }
    Ok(ledger)
}

/// Owns the ADMM iterate across rounds.
#[derive(Debug, Clone)]
pub struct AdmmRun {
    pub settings: AdmmSettings,
    pub states: Vec<AdmmAgentState>,
    pub z: Vector,
    pub round: u64,
}

impl AdmmRun {
    /// Zero-initialized primal, dual and global variables.
    pub fn new(problem: &ConsensusProblem, settings: AdmmSettings) -> Self {
        let n = problem.dim();
        Self {
            settings,
            states: (0..problem.num_agents()).map(|_| AdmmAgentState::initial(n)).collect(),
            z: Vector::zeros(n),
            round: 0,
        }
    }

    pub fn step(
        &mut self,
        problem: &ConsensusProblem,
        reference: Option<&ReferenceSolution>,
        exec: &AgentExecutor,
    ) -> Result<IterationRecord, RoundError> {
        let started = Instant::now();
        self.round += 1;
        let ledger = admm_round(
            problem,
            &mut self.states,
            &mut self.z,
            self.settings.rho,
            &self.settings.newton,
            self.settings.order,
            exec,
            self.round,
        )?;
        let locals: Vec<&Vector> = self.states.iter().map(|s| &s.x).collect();
        let duals: Vec<&Vector> = self.states.iter().map(|s| &s.lambda).collect();
        let snap = RoundSnapshot {
            locals: &locals,
            z: &self.z,
            duals: &duals,
        };
        let comm = ledger.count();
        Ok(IterationRecord {
            round: self.round as usize,
            consensus_residual: snap.consensus_residual(),
            objective_at_z: problem.total_value(&self.z),
            energy: reference.map(|r| energy_scaled_identity(&self.z, &duals, r, self.settings.rho)),
            dual_sum_norm: snap.dual_sum().norm(),
            max_dual_norm: snap.max_dual_norm(),
            floats_up: comm.up,
            floats_down: comm.down,
            wall_ms: started.elapsed().as_secs_f64() * 1e3,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Matrix;
    use crate::problem::{quadratic_from_parts, quadratic_problem};

    fn unit_quadratics(centers: &[&[f64]]) -> ConsensusProblem {
        quadratic_from_parts(
            centers
                .iter()
                .map(|c| (Matrix::identity(c.len()), Vector::from_vec(c.to_vec())))
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn optimum_is_a_fixed_point() {
        let p = unit_quadratics(&[&[1.0, 0.0], &[3.0, -2.0], &[-1.0, 5.0]]);
        let sol = p.known_solution().unwrap();
        let exec = AgentExecutor::sequential();
        for order in [AdmmOrder::DualFirst, AdmmOrder::AggregateFirst] {
            let mut states: Vec<_> = sol
                .duals
                .iter()
                .map(|l| AdmmAgentState {
                    x: sol.z.clone(),
                    lambda: l.clone(),
                })
                .collect();
            let mut z = sol.z.clone();
            let newton = NewtonOptions::default();
            for _ in 0..5 {
                admm_round(&p, &mut states, &mut z, 10.0, &newton, order, &exec, 1).unwrap();
            }
            assert!(z.sub(&sol.z).norm_inf() <= 1e-10);
            for (s, l) in states.iter().zip(&sol.duals) {
                assert!(s.lambda.sub(l).norm_inf() <= 1e-10);
                assert!(s.x.sub(&sol.z).norm_inf() <= 1e-10);
            }
        }
    }

    #[test]
    fn aggregate_first_keeps_dual_sum_zero() {
        let p = quadratic_problem(3, 2, 5).unwrap();
        let mut run = AdmmRun::new(&p, AdmmSettings::new(AdmmOrder::AggregateFirst, 100.0));
        let exec = AgentExecutor::sequential();
        for _ in 0..20 {
            let r = run.step(&p, None, &exec).unwrap();
            assert!(r.dual_sum_norm <= 1e-9 * (1.0 + r.max_dual_norm));
            assert_eq!((r.floats_up, r.floats_down), (6, 6));
        }
    }

    #[test]
    fn two_agent_scalar_problem_converges() {
        let p = quadratic_problem(2, 1, 42).unwrap();
        let z_star = p.known_solution().unwrap().z.clone();
        let exec = AgentExecutor::sequential();
        let mut run = AdmmRun::new(&p, AdmmSettings::new(AdmmOrder::DualFirst, 100.0));
        for _ in 0..100 {
            run.step(&p, None, &exec).unwrap();
        }
        assert!(run.z.sub(&z_star).norm_inf() <= 1e-8, "{:?} vs {:?}", run.z, z_star);
    }
}
