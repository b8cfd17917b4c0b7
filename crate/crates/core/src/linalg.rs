//! Small dense linear algebra.
//!
//! Every dimension in this crate is desk scale (n ≈ 10, N ≈ 20), so vectors and
//! square matrices are stored densely and factorizations are the textbook ones.

use std::fmt;
use std::ops::{Index, IndexMut};

use thiserror::Error;

/// Relative asymmetry tolerated (and removed by symmetrization) before a
/// Cholesky factorization.
pub const SYMMETRY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinalgError {
    #[error("matrix is not positive definite (pivot {pivot} = {value:e})")]
    NotSpd { pivot: usize, value: f64 },
    #[error("matrix is not symmetric (relative asymmetry {asymmetry:e})")]
    NotSymmetric { asymmetry: f64 },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
}

/// A dense real vector.
#[derive(Clone, PartialEq, Default)]
pub struct Vector {
    data: Vec<f64>,
}

impl Vector {
    pub fn zeros(n: usize) -> Self {
        Self { data: vec![0.0; n] }
    }

    pub fn from_vec(data: Vec<f64>) -> Self {
        Self { data }
    }

    /// Unit vector `e_k` of length `n`.
    pub fn basis(n: usize, k: usize) -> Self {
        let mut v = Self::zeros(n);
        v[k] = 1.0;
        v
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn iter(&self) -> std::slice::Iter<'_, f64> {
        self.data.iter()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn dot(&self, other: &Vector) -> f64 {
        debug_assert_eq!(self.len(), other.len());
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a * b)
            .sum()
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn norm_inf(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn add(&self, other: &Vector) -> Vector {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Vector) -> Vector {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn scale(&self, alpha: f64) -> Vector {
        Vector::from_vec(self.data.iter().map(|v| alpha * v).collect())
    }

    /// `self += alpha * x`
    pub fn axpy(&mut self, alpha: f64, x: &Vector) {
        debug_assert_eq!(self.len(), x.len());
        for (s, v) in self.data.iter_mut().zip(&x.data) {
            *s += alpha * v;
        }
    }

    pub fn add_assign(&mut self, x: &Vector) {
        debug_assert_eq!(self.len(), x.len());
        for (s, v) in self.data.iter_mut().zip(&x.data) {
            *s += v;
        }
    }

    fn zip_map(&self, other: &Vector, f: impl Fn(f64, f64) -> f64) -> Vector {
        debug_assert_eq!(self.len(), other.len());
        Vector::from_vec(
            self.data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        )
    }
}

impl Index<usize> for Vector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.data[i]
    }
}

impl IndexMut<usize> for Vector {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.data[i]
    }
}

impl From<Vec<f64>> for Vector {
    fn from(data: Vec<f64>) -> Self {
        Self { data }
    }
}

impl FromIterator<f64> for Vector {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        Self {
            data: iter.into_iter().collect(),
        }
    }
}

impl fmt::Debug for Vector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(&self.data).finish()
    }
}

/// A dense square matrix, row-major.
#[derive(Clone, PartialEq)]
pub struct Matrix {
    n: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::scaled_identity(n, 1.0)
    }

    pub fn scaled_identity(n: usize, alpha: f64) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m[(i, i)] = alpha;
        }
        m
    }

    pub fn from_diag(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = d;
        }
        m
    }

    /// Builds a matrix from its rows. Panics if the rows do not form a square.
    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let n = rows.len();
        let mut data = Vec::with_capacity(n * n);
        for row in rows {
            assert_eq!(row.len(), n, "matrix must be square");
            data.extend_from_slice(row);
        }
        Self { n, data }
    }

    /// Builds an `n × n` matrix from row-major entries.
    pub fn from_row_major(n: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), n * n, "matrix must be square");
        Self { n, data }
    }

    /// `v vᵀ`
    pub fn outer(v: &Vector) -> Self {
        let n = v.len();
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] = v[i] * v[j];
            }
        }
        m
    }

    /// `Aᵀ A + shift·I` for a (possibly rectangular) row-major `rows × n` factor.
    pub fn gram(rows: usize, n: usize, a: &[f64], shift: f64) -> Self {
        assert_eq!(a.len(), rows * n);
        let mut m = Self::scaled_identity(n, shift);
        for r in 0..rows {
            let row = &a[r * n..(r + 1) * n];
            for i in 0..n {
                for j in 0..n {
                    m[(i, j)] += row[i] * row[j];
                }
            }
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn mul_vec(&self, x: &Vector) -> Vector {
        debug_assert_eq!(self.n, x.len());
        (0..self.n)
            .map(|i| {
                self.data[i * self.n..(i + 1) * self.n]
                    .iter()
                    .zip(x.iter())
                    .map(|(a, b)| a * b)
                    .sum()
            })
            .collect()
    }

    pub fn mul_mat(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.n, other.n);
        let n = self.n;
        let mut m = Matrix::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..n {
                    m[(i, j)] += a * other[(k, j)];
                }
            }
        }
        m
    }

    /// `xᵀ M x`
    pub fn quad_form(&self, x: &Vector) -> f64 {
        x.dot(&self.mul_vec(x))
    }

    pub fn transpose(&self) -> Matrix {
        let n = self.n;
        let mut m = Matrix::zeros(n);
        for i in 0..n {
            for j in 0..n {
                m[(j, i)] = self[(i, j)];
            }
        }
        m
    }

    pub fn add(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.n, other.n);
        Matrix {
            n: self.n,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    pub fn sub(&self, other: &Matrix) -> Matrix {
        self.add(&other.scale(-1.0))
    }

    pub fn add_assign(&mut self, other: &Matrix) {
        assert_eq!(self.n, other.n);
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    pub fn scale(&self, alpha: f64) -> Matrix {
        Matrix {
            n: self.n,
            data: self.data.iter().map(|v| alpha * v).collect(),
        }
    }

    /// `M + shift·I`
    pub fn shifted(&self, shift: f64) -> Matrix {
        let mut m = self.clone();
        for i in 0..self.n {
            m[(i, i)] += shift;
        }
        m
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Largest `|M_ij − M_ji|` relative to the largest entry.
    pub fn relative_asymmetry(&self) -> f64 {
        let scale = self.max_abs();
        if scale == 0.0 {
            return 0.0;
        }
        let mut worst = 0.0f64;
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                worst = worst.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        worst / scale
    }

    /// `(M + Mᵀ)/2`
    pub fn symmetrized(&self) -> Matrix {
        let mut m = self.clone();
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                let avg = 0.5 * (self[(i, j)] + self[(j, i)]);
                m[(i, j)] = avg;
                m[(j, i)] = avg;
            }
        }
        m
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.n + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.n + j]
    }
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rows: Vec<&[f64]> = self.data.chunks(self.n.max(1)).collect();
        f.debug_list().entries(rows).finish()
    }
}

/// Lower-triangular Cholesky factor `L` with `L Lᵀ = M`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpdFactor {
    l: Matrix,
}

impl SpdFactor {
    pub fn lower(&self) -> &Matrix {
        &self.l
    }

    pub fn dim(&self) -> usize {
        self.l.dim()
    }

    /// `L Lᵀ`
    pub fn reconstruct(&self) -> Matrix {
        self.l.mul_mat(&self.l.transpose())
    }

    /// Solves `M x = b` by forward and back substitution.
    pub fn solve(&self, b: &Vector) -> Result<Vector, LinalgError> {
        let n = self.l.dim();
        if b.len() != n {
            return Err(LinalgError::DimensionMismatch {
                expected: n,
                found: b.len(),
            });
        }
        let l = &self.l;
        let mut y = b.clone();
        for i in 0..n {
            let mut acc = y[i];
            for k in 0..i {
                acc -= l[(i, k)] * y[k];
            }
            y[i] = acc / l[(i, i)];
        }
        for i in (0..n).rev() {
            let mut acc = y[i];
            for k in (i + 1)..n {
                acc -= l[(k, i)] * y[k];
            }
            y[i] = acc / l[(i, i)];
        }
        Ok(y)
    }

    /// `bᵀ M⁻¹ b`, computed as `‖L⁻¹ b‖²`.
    pub fn inverse_quad_form(&self, b: &Vector) -> Result<f64, LinalgError> {
        let n = self.l.dim();
        if b.len() != n {
            return Err(LinalgError::DimensionMismatch {
                expected: n,
                found: b.len(),
            });
        }
        let l = &self.l;
        let mut y = b.clone();
        for i in 0..n {
            let mut acc = y[i];
            for k in 0..i {
                acc -= l[(i, k)] * y[k];
            }
            y[i] = acc / l[(i, i)];
        }
        Ok(y.dot(&y))
    }
}

/// Cholesky factorization. Asymmetry up to [`SYMMETRY_TOL`] (relative) is
/// removed by symmetrizing; anything larger is rejected.
pub fn cholesky(m: &Matrix) -> Result<SpdFactor, LinalgError> {
    let asymmetry = m.relative_asymmetry();
    if asymmetry > SYMMETRY_TOL {
        return Err(LinalgError::NotSymmetric { asymmetry });
    }
    let a = if asymmetry > 0.0 {
        m.symmetrized()
    } else {
        m.clone()
    };
    factor_symmetric(&a)
}

fn factor_symmetric(a: &Matrix) -> Result<SpdFactor, LinalgError> {
    let n = a.dim();
    let mut l = Matrix::zeros(n);
    for j in 0..n {
        let mut d = a[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if d.is_nan() || d <= 0.0 {
            return Err(LinalgError::NotSpd { pivot: j, value: d });
        }
        let ljj = d.sqrt();
        l[(j, j)] = ljj;
        for i in (j + 1)..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / ljj;
        }
    }
    Ok(SpdFactor { l })
}

/// Factor-then-solve convenience for `M x = b`.
pub fn spd_solve(factor: &SpdFactor, b: &Vector) -> Result<Vector, LinalgError> {
    factor.solve(b)
}

/// Lower bound on the smallest eigenvalue of a symmetric matrix.
///
/// Bisects on the shift `t` between the Gershgorin bounds: `M − tI` admits a
/// Cholesky factorization iff `t` lies below the smallest eigenvalue. The
/// returned value is always a shift at which factorization succeeded (or the
/// Gershgorin lower bound), so it never exceeds the true minimum beyond
/// factorization rounding. Bisection stops once the bracket is below
/// `1e-10 · max(1, spectral radius bound)`.
pub fn min_eig_lower_bound(m: &Matrix) -> f64 {
    let n = m.dim();
    if n == 0 {
        return f64::INFINITY;
    }
    let a = m.symmetrized();
    let (mut lo, mut hi) = gershgorin_bounds(&a);
    let radius = lo.abs().max(hi.abs()).max(1.0);
    let tol = 1e-10 * radius;
    let succeeds = |t: f64| factor_symmetric(&a.shifted(-t)).is_ok();

    // Pin the sign first so the bound agrees with a plain factorization of `M`.
    if succeeds(0.0) {
        lo = lo.max(0.0);
    } else {
        hi = hi.min(0.0);
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if succeeds(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// Gershgorin interval `[min_i (a_ii − r_i), max_i (a_ii + r_i)]` containing every
/// eigenvalue; widened slightly so the lower end is strictly below.
fn gershgorin_bounds(a: &Matrix) -> (f64, f64) {
    let n = a.dim();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..n {
        let r: f64 = (0..n).filter(|&j| j != i).map(|j| a[(i, j)].abs()).sum();
        lo = lo.min(a[(i, i)] - r);
        hi = hi.max(a[(i, i)] + r);
    }
    let pad = 1e-12 * lo.abs().max(hi.abs()).max(1.0);
    (lo - pad, hi + pad)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cholesky_of_identity_is_identity() {
        let f = cholesky(&Matrix::identity(3)).unwrap();
        assert_eq!(f.lower(), &Matrix::identity(3));
    }

    #[test]
    fn cholesky_of_diagonal() {
        let f = cholesky(&Matrix::from_diag(&[4.0, 9.0])).unwrap();
        assert_eq!(f.lower(), &Matrix::from_diag(&[2.0, 3.0]));
    }

    #[test]
    fn indefinite_matrix_is_rejected() {
        // eigenvalues 3 and -1
        let m = Matrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 1.0]]);
        assert!(matches!(cholesky(&m), Err(LinalgError::NotSpd { .. })));
    }

    #[test]
    fn asymmetry_handling() {
        let tiny = Matrix::from_rows(&[vec![2.0, 1.0], vec![1.0 + 1e-14, 2.0]]);
        assert!(cholesky(&tiny).is_ok());
        let large = Matrix::from_rows(&[vec![2.0, 1.0], vec![1.1, 2.0]]);
        assert!(matches!(
            cholesky(&large),
            Err(LinalgError::NotSymmetric { .. })
        ));
    }

    #[test]
    fn solves() {
        let b = Vector::from_vec(vec![1.0, -2.0, 3.0]);
        let f = cholesky(&Matrix::identity(3)).unwrap();
        assert_eq!(spd_solve(&f, &b).unwrap(), b);

        let f = cholesky(&Matrix::from_diag(&[2.0, 4.0])).unwrap();
        let x = spd_solve(&f, &Vector::from_vec(vec![2.0, 4.0])).unwrap();
        assert!(x.sub(&Vector::from_vec(vec![1.0, 1.0])).norm_inf() <= 1e-15);
    }

    #[test]
    fn solve_rejects_wrong_length() {
        let f = cholesky(&Matrix::identity(2)).unwrap();
        assert_eq!(
            f.solve(&Vector::zeros(3)),
            Err(LinalgError::DimensionMismatch {
                expected: 2,
                found: 3
            })
        );
    }

    #[test]
    fn inverse_quad_form_matches_solve() {
        let m = Matrix::from_rows(&[vec![4.0, 1.0], vec![1.0, 3.0]]);
        let b = Vector::from_vec(vec![1.0, 2.0]);
        let f = cholesky(&m).unwrap();
        let direct = b.dot(&f.solve(&b).unwrap());
        assert!((f.inverse_quad_form(&b).unwrap() - direct).abs() < 1e-14);
    }

    #[test]
    fn min_eig_examples() {
        assert!((min_eig_lower_bound(&Matrix::identity(4)) - 1.0).abs() <= 1e-8);
        assert!((min_eig_lower_bound(&Matrix::from_diag(&[3.0, 0.5])) - 0.5).abs() <= 1e-8);
        let m = Matrix::from_rows(&[vec![2.0, 1.0], vec![1.0, 2.0]]);
        let bound = min_eig_lower_bound(&m);
        assert!((bound - 1.0).abs() <= 1e-8);
        assert!(bound <= 1.0);
        let indefinite = Matrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 1.0]]);
        assert!((min_eig_lower_bound(&indefinite) + 1.0).abs() <= 1e-8);
    }

    #[test]
    fn gram_adds_shift() {
        let g = Matrix::gram(2, 2, &[1.0, 0.0, 0.0, 2.0], 1.0);
        assert_eq!(g, Matrix::from_diag(&[2.0, 5.0]));
    }
}
