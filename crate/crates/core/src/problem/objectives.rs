use std::fmt;

use crate::linalg::{Matrix, Vector};

/// A smooth local objective `f_i : Rⁿ → R` with first and second derivatives.
pub trait Objective: Send + Sync + fmt::Debug {
    fn dim(&self) -> usize;
    fn value(&self, x: &Vector) -> f64;
    fn gradient(&self, x: &Vector) -> Vector;
    fn hessian(&self, x: &Vector) -> Matrix;
}

/// `½ (x − a)ᵀ Q (x − a)` with `Q` SPD.
#[derive(Debug, Clone)]
pub struct Quadratic {
    q: Matrix,
    center: Vector,
}

impl Quadratic {
    pub fn new(q: Matrix, center: Vector) -> Self {
        assert_eq!(q.dim(), center.len());
        Self { q, center }
    }

    pub fn curvature(&self) -> &Matrix {
        &self.q
    }

    pub fn center(&self) -> &Vector {
        &self.center
    }
}

impl Objective for Quadratic {
    fn dim(&self) -> usize {
        self.center.len()
    }

    fn value(&self, x: &Vector) -> f64 {
        0.5 * self.q.quad_form(&x.sub(&self.center))
    }

    fn gradient(&self, x: &Vector) -> Vector {
        self.q.mul_vec(&x.sub(&self.center))
    }

    fn hessian(&self, _x: &Vector) -> Matrix {
        self.q.clone()
    }
}

/// Separable pseudo-Huber loss `Σ_j sqrt(1 + (x_j − a_j)²)`.
///
/// Strictly convex but not strongly convex: the curvature
/// `(1 + r²)^{-3/2}` vanishes as the residual grows.
#[derive(Debug, Clone)]
pub struct PseudoHuber {
    center: Vector,
}

impl PseudoHuber {
    pub fn new(center: Vector) -> Self {
        Self { center }
    }

    pub fn center(&self) -> &Vector {
        &self.center
    }
}

impl Objective for PseudoHuber {
    fn dim(&self) -> usize {
        self.center.len()
    }

    fn value(&self, x: &Vector) -> f64 {
        x.iter()
            .zip(self.center.iter())
            .map(|(xi, ai)| (1.0 + (xi - ai).powi(2)).sqrt())
            .sum()
    }

    fn gradient(&self, x: &Vector) -> Vector {
        x.iter()
            .zip(self.center.iter())
            .map(|(xi, ai)| {
                let r = xi - ai;
                r / (1.0 + r * r).sqrt()
            })
            .collect()
    }

    fn hessian(&self, x: &Vector) -> Matrix {
        let diag: Vec<f64> = x
            .iter()
            .zip(self.center.iter())
            .map(|(xi, ai)| {
                let s = 1.0 + (xi - ai).powi(2);
                1.0 / (s * s.sqrt())
            })
            .collect();
        Matrix::from_diag(&diag)
    }
}

/// Measured data of one sensor-allocation agent.
#[derive(Debug, Clone, PartialEq)]
pub struct SensorData {
    pub alpha: Vector,
    pub beta: Vector,
    pub sigma: Vector,
}

/// Non-convex sensor-allocation objective on `x = [xᵅ; xᵝ]`, `xᵅ, xᵝ ∈ Rᵐ`:
///
/// ```text
/// ½(‖xᵅ − ζᵅ‖² + ‖xᵝ − ζᵝ‖²) + ½ Σ_j ((xᵅ_j − xᵝ_j)² − ζᵠ_j)²
/// ```
///
/// where `ζᵠ` is [`SensorData::sigma`] and `j` runs over the `m` coordinates.
#[derive(Debug, Clone)]
pub struct SensorAllocation {
    data: SensorData,
}

impl SensorAllocation {
    pub fn new(data: SensorData) -> Self {
        assert_eq!(data.alpha.len(), data.beta.len());
        assert_eq!(data.alpha.len(), data.sigma.len());
        Self { data }
    }

    pub fn data(&self) -> &SensorData {
        &self.data
    }

    fn half(&self) -> usize {
        self.data.alpha.len()
    }
}

impl Objective for SensorAllocation {
    fn dim(&self) -> usize {
        2 * self.half()
    }

    fn value(&self, x: &Vector) -> f64 {
        let m = self.half();
        let d = &self.data;
        let mut fit = 0.0;
        let mut coupling = 0.0;
        for j in 0..m {
            let (a, b) = (x[j], x[m + j]);
            fit += (a - d.alpha[j]).powi(2) + (b - d.beta[j]).powi(2);
            let delta = a - b;
            coupling += (delta * delta - d.sigma[j]).powi(2);
        }
        0.5 * fit + 0.5 * coupling
    }

    fn gradient(&self, x: &Vector) -> Vector {
        let m = self.half();
        let d = &self.data;
        let mut g = Vector::zeros(2 * m);
        for j in 0..m {
            let (a, b) = (x[j], x[m + j]);
            let delta = a - b;
            let c = 2.0 * (delta * delta - d.sigma[j]) * delta;
            g[j] = a - d.alpha[j] + c;
            g[m + j] = b - d.beta[j] - c;
        }
        g
    }

    fn hessian(&self, x: &Vector) -> Matrix {
        let m = self.half();
        let d = &self.data;
        let mut h = Matrix::identity(2 * m);
        for j in 0..m {
            let delta = x[j] - x[m + j];
            let c = 6.0 * delta * delta - 2.0 * d.sigma[j];
            h[(j, j)] += c;
            h[(m + j, m + j)] += c;
            h[(j, m + j)] -= c;
            h[(m + j, j)] -= c;
        }
        h
    }
}

/// Central-difference gradient with step `h` per coordinate.
pub fn finite_difference_gradient(f: &dyn Objective, x: &Vector, h: f64) -> Vector {
    (0..x.len())
        .map(|k| {
            let mut plus = x.clone();
            let mut minus = x.clone();
            plus[k] += h;
            minus[k] -= h;
            (f.value(&plus) - f.value(&minus)) / (2.0 * h)
        })
        .collect()
}

/// Central-difference Hessian built from analytic gradients.
pub fn finite_difference_hessian(f: &dyn Objective, x: &Vector, h: f64) -> Matrix {
    let n = x.len();
    let mut m = Matrix::zeros(n);
    for k in 0..n {
        let mut plus = x.clone();
        let mut minus = x.clone();
        plus[k] += h;
        minus[k] -= h;
        let col = f.gradient(&plus).sub(&f.gradient(&minus)).scale(0.5 / h);
        for i in 0..n {
            m[(i, k)] = col[i];
        }
    }
    m.symmetrized()
}

/// Relative disagreement between analytic and finite-difference derivatives
/// at `x`, using the step `h = 1e-6 · (1 + ‖x‖)`. Returns
/// `(gradient error, hessian error)`, each measured as
/// `‖analytic − fd‖ / max(1, ‖analytic‖)`.
pub fn derivative_check(f: &dyn Objective, x: &Vector) -> (f64, f64) {
    let h = 1e-6 * (1.0 + x.norm());
    let g = f.gradient(x);
    let g_fd = finite_difference_gradient(f, x, h);
    let grad_err = g.sub(&g_fd).norm() / g.norm().max(1.0);
    let hess = f.hessian(x);
    let hess_fd = finite_difference_hessian(f, x, h);
    let hess_err = hess.sub(&hess_fd).frobenius_norm() / hess.frobenius_norm().max(1.0);
    (grad_err, hess_err)
}
