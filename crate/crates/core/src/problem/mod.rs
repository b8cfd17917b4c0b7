//! Consensus problems `min Σ_i f_i(x_i)  s.t.  x_i = z`, and the shipped
//! instances: random strongly convex quadratics, pseudo-Huber sums, and the
//! non-convex sensor-allocation problem.

mod objectives;
mod rng;

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

pub use objectives::{
    derivative_check, finite_difference_gradient, finite_difference_hessian, Objective,
    PseudoHuber, Quadratic, SensorAllocation, SensorData,
};
pub use rng::{gaussian_draw, GaussianStream};

use crate::diagnostics::{centralized_solve, ReferenceKind, ReferenceSolution};
use crate::linalg::{cholesky, Matrix, Vector};

/// Standard deviation of the sensor measurements, `N(0, 25)`.
pub const SENSOR_DATA_STD: f64 = 5.0;
/// Coordinates per half (`xᵅ` or `xᵝ`) of a sensor-allocation agent.
pub const SENSOR_HALF_DIM: usize = 5;
/// Standard deviation of the random factors and centers of [`quadratic_problem`].
pub const QUADRATIC_DATA_STD: f64 = 5.0;
/// Standard deviation of the pseudo-Huber centers.
pub const PSEUDO_HUBER_CENTER_STD: f64 = 1.0;

#[derive(Debug, Error)]
pub enum ProblemError {
    #[error("a consensus problem needs at least one agent")]
    NoAgents,
    #[error("agent {agent} has dimension {found}, expected {expected}")]
    DimensionMismatch {
        agent: usize,
        expected: usize,
        found: usize,
    },
    #[error("known solution is inconsistent: {0}")]
    InconsistentSolution(String),
    #[error("unknown problem `{0}` (expected quadratic, pseudo-huber or sensor-allocation)")]
    UnknownProblem(String),
    #[error("failed to compute the reference solution: {0}")]
    Reference(String),
}

/// The shipped problem families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ProblemKind {
    Quadratic,
    PseudoHuber,
    SensorAllocation,
}

impl ProblemKind {
    pub fn name(self) -> &'static str {
        match self {
            ProblemKind::Quadratic => "quadratic",
            ProblemKind::PseudoHuber => "pseudo-huber",
            ProblemKind::SensorAllocation => "sensor-allocation",
        }
    }
}

impl fmt::Display for ProblemKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ProblemKind {
    type Err = ProblemError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "quadratic" => Ok(ProblemKind::Quadratic),
            "pseudo-huber" => Ok(ProblemKind::PseudoHuber),
            "sensor-allocation" => Ok(ProblemKind::SensorAllocation),
            other => Err(ProblemError::UnknownProblem(other.to_string())),
        }
    }
}

/// `N` agents with local objectives over a shared dimension `n`.
#[derive(Debug)]
pub struct ConsensusProblem {
    dim: usize,
    agents: Vec<Box<dyn Objective>>,
    known_solution: Option<ReferenceSolution>,
}

impl ConsensusProblem {
    pub fn new(agents: Vec<Box<dyn Objective>>) -> Result<Self, ProblemError> {
        let dim = agents.first().ok_or(ProblemError::NoAgents)?.dim();
        for (agent, f) in agents.iter().enumerate() {
            if f.dim() != dim {
                return Err(ProblemError::DimensionMismatch {
                    agent,
                    expected: dim,
                    found: f.dim(),
                });
            }
        }
        Ok(Self {
            dim,
            agents,
            known_solution: None,
        })
    }

    /// Attaches `(z*, λ*)` after checking `Σ λ*_i = 0` (1e-8) and
    /// `∇f_i(z*) + λ*_i = 0` (1e-6) for every agent.
    pub fn with_known_solution(mut self, solution: ReferenceSolution) -> Result<Self, ProblemError> {
        if solution.z.len() != self.dim || solution.duals.len() != self.agents.len() {
            return Err(ProblemError::InconsistentSolution(
                "shape does not match the problem".into(),
            ));
        }
        let mut dual_sum = Vector::zeros(self.dim);
        for (f, lambda) in self.agents.iter().zip(&solution.duals) {
            dual_sum.add_assign(lambda);
            let stationarity = f.gradient(&solution.z).add(lambda).norm();
            if stationarity > 1e-6 {
                return Err(ProblemError::InconsistentSolution(format!(
                    "stationarity residual {stationarity:e}"
                )));
            }
        }
        if dual_sum.norm() > 1e-8 {
            return Err(ProblemError::InconsistentSolution(format!(
                "dual sum norm {:e}",
                dual_sum.norm()
            )));
        }
        self.known_solution = Some(solution);
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_agents(&self) -> usize {
        self.agents.len()
    }

    pub fn agent(&self, i: usize) -> &dyn Objective {
        self.agents[i].as_ref()
    }

    pub fn agents(&self) -> impl Iterator<Item = &dyn Objective> + '_ {
        self.agents.iter().map(|f| f.as_ref())
    }

    pub fn known_solution(&self) -> Option<&ReferenceSolution> {
        self.known_solution.as_ref()
    }

    /// `Σ_i f_i(z)`, summed in agent order.
    pub fn total_value(&self, z: &Vector) -> f64 {
        self.agents.iter().map(|f| f.value(z)).sum()
    }

    /// `Σ_i ∇f_i(z)`, summed in agent order.
    pub fn total_gradient(&self, z: &Vector) -> Vector {
        let mut g = Vector::zeros(self.dim);
        for f in &self.agents {
            g.add_assign(&f.gradient(z));
        }
        g
    }

    /// `Σ_i ∇²f_i(z)`, summed in agent order.
    pub fn total_hessian(&self, z: &Vector) -> Matrix {
        let mut h = Matrix::zeros(self.dim);
        for f in &self.agents {
            h.add_assign(&f.hessian(z));
        }
        h
    }
}

/// Quadratic consensus problem from explicit `(Q_i, a_i)` pairs, with the
/// analytic solution `z* = (Σ Q_i)⁻¹ Σ Q_i a_i`, `λ*_i = −Q_i (z* − a_i)`.
pub fn quadratic_from_parts(parts: Vec<(Matrix, Vector)>) -> Result<ConsensusProblem, ProblemError> {
    let n = parts.first().ok_or(ProblemError::NoAgents)?.1.len();
    let mut q_sum = Matrix::zeros(n);
    let mut rhs = Vector::zeros(n);
    for (q, a) in &parts {
        if q.dim() != n || a.len() != n {
            return Err(ProblemError::DimensionMismatch {
                agent: 0,
                expected: n,
                found: a.len(),
            });
        }
        q_sum.add_assign(q);
        rhs.add_assign(&q.mul_vec(a));
    }
    let z = cholesky(&q_sum)
        .and_then(|f| f.solve(&rhs))
        .map_err(|e| ProblemError::Reference(e.to_string()))?;
    let duals: Vec<Vector> = parts
        .iter()
        .map(|(q, a)| q.mul_vec(&z.sub(a)).scale(-1.0))
        .collect();
    let agents: Vec<Box<dyn Objective>> = parts
        .into_iter()
        .map(|(q, a)| Box::new(Quadratic::new(q, a)) as Box<dyn Objective>)
        .collect();
    let problem = ConsensusProblem::new(agents)?;
    let gradient_norm = problem.total_gradient(&z).norm();
    problem.with_known_solution(ReferenceSolution {
        z,
        duals,
        gradient_norm,
        kind: ReferenceKind::Global,
    })
}

/// `N` random strongly convex quadratics `½(x − a_i)ᵀ Q_i (x − a_i)`.
///
/// `Q_i = A_iᵀ A_i + I` with `A_i ∈ R^{2n×n}`; entries of `A_i` and `a_i` are
/// `N(0, 25)`. Draw order per agent: `A_i` row-major, then `a_i`.
pub fn quadratic_problem(agents: usize, n: usize, seed: u64) -> Result<ConsensusProblem, ProblemError> {
    if agents == 0 {
        return Err(ProblemError::NoAgents);
    }
    let mut stream = GaussianStream::new(seed);
    let parts = (0..agents)
        .map(|_| {
            let a = stream.take(2 * n * n, QUADRATIC_DATA_STD);
            let q = Matrix::gram(2 * n, n, &a, 1.0);
            let center = Vector::from_vec(stream.take(n, QUADRATIC_DATA_STD));
            (q, center)
        })
        .collect();
    quadratic_from_parts(parts)
}

/// Pseudo-Huber problem from explicit centers; the reference solution comes
/// from the centralized Newton oracle.
pub fn pseudo_huber_from_centers(centers: Vec<Vector>) -> Result<ConsensusProblem, ProblemError> {
    let agents: Vec<Box<dyn Objective>> = centers
        .into_iter()
        .map(|a| Box::new(PseudoHuber::new(a)) as Box<dyn Objective>)
        .collect();
    let problem = ConsensusProblem::new(agents)?;
    let reference = centralized_solve(&problem, 1e-10, None)
        .map_err(|e| ProblemError::Reference(e.to_string()))?;
    problem.with_known_solution(reference)
}

/// `N` pseudo-Huber agents `Σ_j sqrt(1 + (x_j − a_i[j])²)` with centers drawn
/// from `N(0, 1)`.
pub fn pseudo_huber_problem(agents: usize, n: usize, seed: u64) -> Result<ConsensusProblem, ProblemError> {
    if agents == 0 {
        return Err(ProblemError::NoAgents);
    }
    let mut stream = GaussianStream::new(seed);
    let centers = (0..agents)
        .map(|_| Vector::from_vec(stream.take(n, PSEUDO_HUBER_CENTER_STD)))
        .collect();
    pseudo_huber_from_centers(centers)
}

/// Draws the measurements of `agents` sensor agents: per agent `ζᵅ`, `ζᵝ`, `ζᵠ`
/// in that order, each of length 5, from one stream.
pub fn sensor_data(agents: usize, seed: u64, std: f64) -> Vec<SensorData> {
    let mut stream = GaussianStream::new(seed);
    (0..agents)
        .map(|_| SensorData {
            alpha: Vector::from_vec(stream.take(SENSOR_HALF_DIM, std)),
            beta: Vector::from_vec(stream.take(SENSOR_HALF_DIM, std)),
            sigma: Vector::from_vec(stream.take(SENSOR_HALF_DIM, std)),
        })
        .collect()
}

/// The non-convex sensor-allocation problem (`n = 10`) with `N(0, std²)` data.
pub fn sensor_allocation_problem_with_std(
    agents: usize,
    seed: u64,
    std: f64,
) -> Result<ConsensusProblem, ProblemError> {
    if agents == 0 {
        return Err(ProblemError::NoAgents);
    }
    let objectives = sensor_data(agents, seed, std)
        .into_iter()
        .map(|d| Box::new(SensorAllocation::new(d)) as Box<dyn Objective>)
        .collect();
    ConsensusProblem::new(objectives)
}

/// The non-convex sensor-allocation problem with `N(0, 25)` data.
pub fn sensor_allocation_problem(agents: usize, seed: u64) -> Result<ConsensusProblem, ProblemError> {
    sensor_allocation_problem_with_std(agents, seed, SENSOR_DATA_STD)
}
