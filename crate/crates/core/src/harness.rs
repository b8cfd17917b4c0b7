//! Experiment driver behind the CLI: builds a problem instance, runs an
//! algorithm for a fixed budget, and renders CSV traces.

use std::fmt::Write as _;

use thiserror::Error;

use crate::admm::{AdmmOrder, AdmmRun, AdmmSettings};
use crate::aladin::{run_round, AgentState, AladinSettings, CoordinatorState, HessianSchedule, RoundError, Variant};
use crate::algorithm::Algorithm;
use crate::diagnostics::{
    centralized_multistart, format_float, trace_csv, IterationRecord, ReferenceError, ReferenceKind,
    ReferenceSolution, RunSummary,
};
use crate::exec::AgentExecutor;
use crate::linalg::Vector;
use crate::local_solver::NewtonOptions;
use crate::problem::{
    pseudo_huber_problem, quadratic_problem, sensor_allocation_problem_with_std, ConsensusProblem,
    ProblemError, ProblemKind, SENSOR_DATA_STD, SENSOR_HALF_DIM,
};

/// Starting points tried by the multi-start reference for non-convex problems.
pub const MULTISTART_STARTS: usize = 20;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error("{algorithm}: {source}")]
    Solver {
        algorithm: Algorithm,
        #[source]
        source: RoundError,
    },
    #[error("reference solution: {0}")]
    Reference(#[from] ReferenceError),
}

impl HarnessError {
    /// 2 for configuration problems, 3 for solver failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) | HarnessError::Problem(_) => 2,
            HarnessError::Solver { .. } | HarnessError::Reference(_) => 3,
        }
    }
}

/// One experiment. Defaults follow the sensor-allocation setup: `N = 20`,
/// `n = 10`, `ρ = 100`, zero initialization, 200 rounds.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub problem: ProblemKind,
    pub agents: usize,
    pub dim: usize,
    pub seed: u64,
    /// Standard deviation of the sensor measurements.
    pub data_std: f64,
    pub algorithm: Algorithm,
    pub rho: f64,
    pub max_iter: usize,
    /// Base `K` of the logarithmic Hessian-update schedule; every round when absent.
    pub hessian_schedule: Option<u64>,
    /// Local subproblem tolerance.
    pub tol: f64,
    /// Stop once the consensus residual is at or below this; 0 runs the full budget.
    pub stop_tol: f64,
    /// Worker threads for the local solves; `None` picks `min(N, cores)`.
    pub threads: Option<usize>,
    /// Write measured wall-clock milliseconds instead of 0.
    pub record_wall_time: bool,
    /// Compute a multi-start local reference (and hence energy) for problems
    /// without a known solution.
    pub multistart_reference: bool,
}

impl RunConfig {
    pub fn new(problem: ProblemKind, algorithm: Algorithm) -> Self {
        Self {
            problem,
            agents: 20,
            dim: 2 * SENSOR_HALF_DIM,
            seed: 42,
            data_std: SENSOR_DATA_STD,
            algorithm,
            rho: 100.0,
            max_iter: 200,
            hessian_schedule: None,
            tol: 1e-10,
            stop_tol: 0.0,
            threads: None,
            record_wall_time: false,
            multistart_reference: false,
        }
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let fail = |msg: String| Err(HarnessError::Config(msg));
        if !(self.rho > 0.0 && self.rho.is_finite()) {
            return fail(format!("--rho must be positive and finite, got {}", self.rho));
        }
        if self.max_iter == 0 {
            return fail("--max-iter must be at least 1".into());
        }
        if self.agents == 0 {
            return fail("--N must be at least 1".into());
        }
        if self.dim == 0 {
            return fail("--n must be at least 1".into());
        }
        if self.problem == ProblemKind::SensorAllocation && self.dim != 2 * SENSOR_HALF_DIM {
            return fail(format!(
                "sensor-allocation has n = {}, got --n {}",
                2 * SENSOR_HALF_DIM,
                self.dim
            ));
        }
        if !(self.tol > 0.0) {
            return fail(format!("--tol must be positive, got {}", self.tol));
        }
        if !(self.stop_tol >= 0.0) {
            return fail(format!("--stop-tol must be non-negative, got {}", self.stop_tol));
        }
        if !(self.data_std > 0.0 && self.data_std.is_finite()) {
            return fail(format!("--data-std must be positive, got {}", self.data_std));
        }
        if let Some(k) = self.hessian_schedule {
            if k < 2 {
                return fail(format!("--hessian-schedule must be at least 2, got {k}"));
            }
            if self.algorithm != Algorithm::BfgsAladin {
                return fail(format!(
                    "--hessian-schedule only applies to bfgs-aladin, not {}",
                    self.algorithm
                ));
            }
        }
        if self.threads == Some(0) {
            return fail("--threads must be at least 1".into());
        }
        Ok(())
    }

    fn threads_or_default(&self) -> usize {
        self.threads.unwrap_or_else(|| {
            let cores = std::thread::available_parallelism().map_or(1, |c| c.get());
            self.agents.min(cores)
        })
    }

    fn newton(&self) -> NewtonOptions {
        NewtonOptions {
            tol: self.tol,
            ..NewtonOptions::default()
        }
    }

    fn same_instance(&self, other: &RunConfig) -> bool {
        self.problem == other.problem
            && self.agents == other.agents
            && self.dim == other.dim
            && self.seed == other.seed
            && self.data_std == other.data_std
    }
}

/// Builds the problem instance a config describes.
pub fn build_problem(config: &RunConfig) -> Result<ConsensusProblem, ProblemError> {
    match config.problem {
        ProblemKind::Quadratic => quadratic_problem(config.agents, config.dim, config.seed),
        ProblemKind::PseudoHuber => pseudo_huber_problem(config.agents, config.dim, config.seed),
        ProblemKind::SensorAllocation => {
            sensor_allocation_problem_with_std(config.agents, config.seed, config.data_std)
        }
    }
}

/// Reference used for the energy column: the problem's known solution, or a
/// multi-start local one when requested.
pub fn reference_for(
    problem: &ConsensusProblem,
    config: &RunConfig,
) -> Result<Option<ReferenceSolution>, HarnessError> {
    if let Some(known) = problem.known_solution() {
        return Ok(Some(known.clone()));
    }
    if config.multistart_reference {
        let r = centralized_multistart(problem, 1e-9, MULTISTART_STARTS, config.seed, config.data_std)?;
        return Ok(Some(r));
    }
    Ok(None)
}

/// Algorithm state carried across rounds.
#[derive(Debug, Clone)]
pub enum SolverState {
    Aladin {
        settings: AladinSettings,
        agents: Vec<AgentState>,
        coord: CoordinatorState,
    },
    Admm(AdmmRun),
}

impl SolverState {
    /// Zero primal and dual initialization, `B_i = ρI`.
    pub fn new(problem: &ConsensusProblem, config: &RunConfig) -> Self {
        let n = problem.dim();
        let aladin = |variant| {
            let mut settings = AladinSettings::new(variant, config.rho);
            settings.newton = config.newton();
            settings.schedule = config
                .hessian_schedule
                .map_or(HessianSchedule::EveryRound, HessianSchedule::Powers);
            SolverState::Aladin {
                settings,
                agents: (0..problem.num_agents())
                    .map(|_| AgentState::initial(n, config.rho))
                    .collect(),
                coord: CoordinatorState::new(Vector::zeros(n)),
            }
        };
        let admm = |order| {
            let mut settings = AdmmSettings::new(order, config.rho);
            settings.newton = config.newton();
            SolverState::Admm(AdmmRun::new(problem, settings))
        };
        match config.algorithm {
            Algorithm::BfgsAladin => aladin(Variant::Bfgs),
            Algorithm::ReducedAladin => aladin(Variant::Reduced),
            Algorithm::MatrixProxAladin => aladin(Variant::MatrixProx),
            Algorithm::AdmmDualFirst => admm(AdmmOrder::DualFirst),
            Algorithm::AdmmAggregateFirst => admm(AdmmOrder::AggregateFirst),
        }
    }

    pub fn step(
        &mut self,
        problem: &ConsensusProblem,
        reference: Option<&ReferenceSolution>,
        exec: &AgentExecutor,
    ) -> Result<IterationRecord, RoundError> {
        match self {
            SolverState::Aladin {
                settings,
                agents,
                coord,
            } => run_round(problem, settings, agents, coord, reference, exec).map(|o| o.record),
            SolverState::Admm(run) => run.step(problem, reference, exec),
        }
    }

    pub fn global(&self) -> &Vector {
        match self {
            SolverState::Aladin { coord, .. } => &coord.z,
            SolverState::Admm(run) => &run.z,
        }
    }

    pub fn duals(&self) -> Vec<&Vector> {
        match self {
            SolverState::Aladin { agents, .. } => agents.iter().map(|a| &a.lambda).collect(),
            SolverState::Admm(run) => run.states.iter().map(|s| &s.lambda).collect(),
        }
    }

    pub fn locals(&self) -> Vec<&Vector> {
        match self {
            SolverState::Aladin { agents, .. } => agents.iter().map(|a| &a.x).collect(),
            SolverState::Admm(run) => run.states.iter().map(|s| &s.x).collect(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub algorithm: Algorithm,
    pub records: Vec<IterationRecord>,
    pub summary: RunSummary,
}

impl RunOutput {
    pub fn to_csv(&self) -> String {
        trace_csv(&self.records, &self.summary)
    }
}

/// Runs `config` on an already built instance.
pub fn run_on(
    problem: &ConsensusProblem,
    reference: Option<&ReferenceSolution>,
    config: &RunConfig,
) -> Result<RunOutput, HarnessError> {
    config.validate()?;
    let exec = AgentExecutor::with_threads(config.threads_or_default())
        .map_err(|e| HarnessError::Config(format!("cannot start thread pool: {e}")))?;
    let mut state = SolverState::new(problem, config);
    let mut records = Vec::with_capacity(config.max_iter);
    for _ in 0..config.max_iter {
        let mut record = state
            .step(problem, reference, &exec)
            .map_err(|source| HarnessError::Solver {
                algorithm: config.algorithm,
                source,
            })?;
        if !config.record_wall_time {
            record.wall_ms = 0.0;
        }
        let done = config.stop_tol > 0.0 && record.consensus_residual <= config.stop_tol;
        records.push(record);
        if done {
            break;
        }
    }
    let summary = RunSummary::from_records(&records, reference.map(|r| r.kind));
    Ok(RunOutput {
        algorithm: config.algorithm,
        records,
        summary,
    })
}

/// Builds the instance and runs one algorithm on it.
pub fn run(config: &RunConfig) -> Result<RunOutput, HarnessError> {
    config.validate()?;
    let problem = build_problem(config)?;
    let reference = reference_for(&problem, config)?;
    run_on(&problem, reference.as_ref(), config)
}

/// Several algorithms on one shared instance.
#[derive(Debug, Clone)]
pub struct CompareOutput {
    pub runs: Vec<RunOutput>,
    pub reference: Option<ReferenceKind>,
}

impl CompareOutput {
    /// Wide CSV: `round` then one consensus-residual column per algorithm,
    /// followed by one summary line per algorithm.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("round");
        for r in &self.runs {
            out.push(',');
            out.push_str(r.algorithm.name());
        }
        out.push('\n');
        let rows = self.runs.iter().map(|r| r.records.len()).max().unwrap_or(0);
        for k in 0..rows {
            let _ = write!(out, "{}", k + 1);
            for r in &self.runs {
                out.push(',');
                if let Some(rec) = r.records.get(k) {
                    out.push_str(&format_float(rec.consensus_residual));
                }
            }
            out.push('\n');
        }
        for r in &self.runs {
            let footer = r.summary.to_footer();
            let _ = writeln!(out, "# {}{}", r.algorithm.name(), &footer[1..]);
        }
        out
    }

    pub fn residuals(&self, algorithm: Algorithm) -> Option<Vec<f64>> {
        self.runs
            .iter()
            .find(|r| r.algorithm == algorithm)
            .map(|r| r.records.iter().map(|rec| rec.consensus_residual).collect())
    }
}

/// Runs every config on the identical problem instance. All configs must
/// name the same problem, size and seed.
pub fn compare(configs: &[RunConfig]) -> Result<CompareOutput, HarnessError> {
    let first = configs
        .first()
        .ok_or_else(|| HarnessError::Config("compare needs at least one algorithm".into()))?;
    for c in configs {
        c.validate()?;
        if !first.same_instance(c) {
            return Err(HarnessError::Config(
                "compared runs must share problem, size, data scale and seed".into(),
            ));
        }
    }
    let problem = build_problem(first)?;
    let reference = reference_for(&problem, first)?;
    let runs = configs
        .iter()
        .map(|c| run_on(&problem, reference.as_ref(), c))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(CompareOutput {
        runs,
        reference: reference.map(|r| r.kind),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quad(algorithm: Algorithm) -> RunConfig {
        RunConfig {
            agents: 3,
            dim: 2,
            seed: 7,
            max_iter: 20,
            ..RunConfig::new(ProblemKind::Quadratic, algorithm)
        }
    }

    #[test]
    fn validation_messages() {
        let mut c = quad(Algorithm::ReducedAladin);
        c.rho = -1.0;
        assert_eq!(c.validate().unwrap_err().exit_code(), 2);
        let mut c = quad(Algorithm::ReducedAladin);
        c.hessian_schedule = Some(3);
        assert!(c.validate().is_err());
        let mut c = quad(Algorithm::BfgsAladin);
        c.hessian_schedule = Some(1);
        assert!(c.validate().is_err());
        let mut c = RunConfig::new(ProblemKind::SensorAllocation, Algorithm::BfgsAladin);
        c.dim = 4;
        assert!(c.validate().is_err());
        let mut c = quad(Algorithm::BfgsAladin);
        c.max_iter = 0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn early_stop() {
        let mut c = quad(Algorithm::BfgsAladin);
        c.max_iter = 200;
        c.stop_tol = 1e-6;
        let out = run(&c).unwrap();
        assert!(out.records.len() < 200);
        assert!(out.records.last().unwrap().consensus_residual <= 1e-6);
    }

    #[test]
    fn compare_rejects_mixed_instances() {
        let a = quad(Algorithm::BfgsAladin);
        let mut b = quad(Algorithm::ReducedAladin);
        b.seed = 8;
        assert!(matches!(compare(&[a, b]), Err(HarnessError::Config(_))));
        assert!(compare(&[]).is_err());
    }

    #[test]
    fn compare_columns_match_runs() {
        let configs = [quad(Algorithm::BfgsAladin), quad(Algorithm::AdmmAggregateFirst)];
        let cmp = compare(&configs).unwrap();
        let csv = cmp.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("round,bfgs-aladin,admm-aggregate-first"));
        let single = run(&configs[1]).unwrap();
        let expected: Vec<String> = single
            .records
            .iter()
            .map(|r| format_float(r.consensus_residual))
            .collect();
        let column: Vec<String> = csv
            .lines()
            .skip(1)
            .filter(|l| !l.starts_with('#'))
            .map(|l| l.split(',').nth(2).unwrap().to_string())
            .collect();
        assert_eq!(column, expected);
    }
}
