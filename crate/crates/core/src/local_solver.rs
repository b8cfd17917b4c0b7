//! Agent-side subproblem solver.
//!
//! Minimizes the augmented objective
//!
//! ```text
//! φ(x) = f(x) + λᵀx + ½ (x − z)ᵀ P (x − z),   P = ρI or P = B ≻ 0
//! ```
//!
//! by Newton's method. The Newton matrix `∇²f(x) + P` is shifted by `τI`
//! (τ = 1e-8, ×10 per failed factorization) until it is SPD, and steps are
//! globalized with Armijo backtracking on `φ`.

use thiserror::Error;

use crate::linalg::{cholesky, Matrix, Vector};
use crate::problem::Objective;

const ARMIJO_C: f64 = 1e-4;
const INITIAL_SHIFT: f64 = 1e-8;
const MAX_HALVINGS: usize = 60;

/// Proximal metric of the augmented term.
#[derive(Debug, Clone, Copy)]
pub enum Prox<'a> {
    Scalar(f64),
    Matrix(&'a Matrix),
}

impl Prox<'_> {
    /// `P d`
    pub fn apply(&self, d: &Vector) -> Vector {
        match self {
            Prox::Scalar(rho) => d.scale(*rho),
            Prox::Matrix(b) => b.mul_vec(d),
        }
    }

    /// `½ dᵀ P d`
    pub fn half_norm_sq(&self, d: &Vector) -> f64 {
        0.5 * d.dot(&self.apply(d))
    }

    /// `H + P`
    pub fn add_to(&self, h: &Matrix) -> Matrix {
        match self {
            Prox::Scalar(rho) => h.shifted(*rho),
            Prox::Matrix(b) => h.add(b),
        }
    }

    pub fn dim_matches(&self, n: usize) -> bool {
        match self {
            Prox::Scalar(_) => true,
            Prox::Matrix(b) => b.dim() == n,
        }
    }
}

/// One agent's subproblem: `argmin f(x) + λᵀx + ½‖x − z‖²_P`.
#[derive(Debug, Clone, Copy)]
pub struct SubproblemSpec<'a> {
    pub oracle: &'a dyn Objective,
    pub dual: &'a Vector,
    pub anchor: &'a Vector,
    pub prox: Prox<'a>,
}

impl SubproblemSpec<'_> {
    /// Augmented objective `φ(x)`.
    pub fn merit(&self, x: &Vector) -> f64 {
        self.oracle.value(x) + self.dual.dot(x) + self.prox.half_norm_sq(&x.sub(self.anchor))
    }

    /// `∇f(x) + λ + P(x − z)`
    pub fn merit_gradient(&self, x: &Vector) -> Vector {
        let mut g = self.oracle.gradient(x);
        g.add_assign(self.dual);
        g.add_assign(&self.prox.apply(&x.sub(self.anchor)));
        g
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NewtonReport {
    pub minimizer: Vector,
    pub gradient_norm: f64,
    pub iterations: usize,
    /// Number of `τI` shifts applied across all iterations.
    pub shifts: usize,
    pub converged: bool,
    /// `φ` at every accepted iterate, starting with the warm start.
    pub merit_trace: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SubproblemError {
    #[error("Newton solver hit the iteration limit (gradient norm {:e})", .0.gradient_norm)]
    MaxIterExceeded(Box<NewtonReport>),
    #[error("line search stalled (gradient norm {:e})", .0.gradient_norm)]
    Stalled(Box<NewtonReport>),
    #[error("non-finite value encountered at Newton iteration {iteration}")]
    NonFinite { iteration: usize },
    #[error("invalid subproblem: {0}")]
    Invalid(&'static str),
}

impl SubproblemError {
    /// Best iterate, when the solver got far enough to have one.
    pub fn report(&self) -> Option<&NewtonReport> {
        match self {
            SubproblemError::MaxIterExceeded(r) | SubproblemError::Stalled(r) => Some(r),
            _ => None,
        }
    }
}

/// Rounding-error scale of `φ(x)`, from the magnitudes of its three terms.
fn merit_noise(spec: &SubproblemSpec<'_>, x: &Vector) -> f64 {
    let terms = spec.oracle.value(x).abs()
        + spec.dual.norm() * x.norm()
        + spec.prox.half_norm_sq(&x.sub(spec.anchor)).abs();
    64.0 * f64::EPSILON * (1.0 + terms)
}

/// Solves the augmented subproblem from `warm_start` until
/// `‖∇f(x) + λ + P(x − z)‖ ≤ tol`.
pub fn solve_subproblem(
    spec: &SubproblemSpec<'_>,
    warm_start: &Vector,
    options: &NewtonOptions,
) -> Result<NewtonReport, SubproblemError> {
    let n = spec.oracle.dim();
    if warm_start.len() != n || spec.dual.len() != n || spec.anchor.len() != n {
        return Err(SubproblemError::Invalid("vector dimensions differ from the oracle"));
    }
    if !spec.prox.dim_matches(n) {
        return Err(SubproblemError::Invalid("prox matrix dimension differs from the oracle"));
    }
    if let Prox::Scalar(rho) = spec.prox {
        if !(rho > 0.0) {
            return Err(SubproblemError::Invalid("scalar prox must be positive"));
        }
    }
    if !(options.tol > 0.0) {
        return Err(SubproblemError::Invalid("tolerance must be positive"));
    }
    if !warm_start.is_finite() {
        return Err(SubproblemError::NonFinite { iteration: 0 });
    }

    let mut x = warm_start.clone();
    let mut merit = spec.merit(&x);
    let mut grad = spec.merit_gradient(&x);
    let mut grad_norm = grad.norm();
    if !merit.is_finite() || !grad.is_finite() {
        return Err(SubproblemError::NonFinite { iteration: 0 });
    }
    let mut report = NewtonReport {
        minimizer: x.clone(),
        gradient_norm: grad_norm,
        iterations: 0,
        shifts: 0,
        converged: false,
        merit_trace: vec![merit],
    };

    for iteration in 0..options.max_iter {
        if grad_norm <= options.tol {
            report.converged = true;
            return Ok(report);
        }

        let hessian = spec.prox.add_to(&spec.oracle.hessian(&x));
        if !hessian.is_finite() {
            return Err(SubproblemError::NonFinite { iteration });
        }
        let factor = match cholesky(&hessian) {
            Ok(f) => f,
            Err(_) => {
                let mut tau = INITIAL_SHIFT;
                loop {
                    report.shifts += 1;
                    if let Ok(f) = cholesky(&hessian.shifted(tau)) {
                        break f;
                    }
                    tau *= 10.0;
                    if !tau.is_finite() {
                        return Err(SubproblemError::NonFinite { iteration });
                    }
                }
            }
        };
        let step = factor
            .solve(&grad)
            .map_err(|_| SubproblemError::Invalid("factor dimension mismatch"))?
            .scale(-1.0);
        let slope = grad.dot(&step);

        // When the predicted decrease is below the rounding error of φ,
        // Armijo is decided by noise; such steps are accepted only if they
        // shrink the gradient.
        let noise = merit_noise(spec, &x);
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..MAX_HALVINGS {
            let mut trial = x.clone();
            trial.axpy(t, &step);
            let trial_merit = spec.merit(&trial);
            if trial_merit.is_finite() {
                if -t * slope > noise {
                    if trial_merit <= merit + ARMIJO_C * t * slope {
                        accepted = Some((trial, trial_merit, None));
                        break;
                    }
                } else if trial_merit <= merit + noise {
                    let trial_grad = spec.merit_gradient(&trial);
                    if trial_grad.norm() < grad_norm {
                        accepted = Some((trial, trial_merit, Some(trial_grad)));
                        break;
                    }
                }
            }
            t *= 0.5;
        }

        let Some((next, next_merit, next_grad)) = accepted else {
            return Err(SubproblemError::Stalled(Box::new(report)));
        };
        x = next;
        merit = next_merit;
        grad = next_grad.unwrap_or_else(|| spec.merit_gradient(&x));
        grad_norm = grad.norm();
        if !grad.is_finite() {
            return Err(SubproblemError::NonFinite { iteration });
        }
        report.minimizer = x.clone();
        report.gradient_norm = grad_norm;
        report.iterations = iteration + 1;
        report.merit_trace.push(merit);
    }

    if grad_norm <= options.tol {
        report.converged = true;
        Ok(report)
    } else {
        Err(SubproblemError::MaxIterExceeded(Box::new(report)))
    }
}
