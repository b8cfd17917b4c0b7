use consensus_aladin::aladin::{damped_bfgs_update, SkippedUpdate, DAMPING_RATIO};
use consensus_aladin::linalg::{cholesky, min_eig_lower_bound, LinalgError, Matrix, Vector};
use consensus_aladin::problem::{
    derivative_check, pseudo_huber_problem, quadratic_problem, sensor_allocation_problem,
    ConsensusProblem, GaussianStream,
};
use nalgebra::DMatrix;
use proptest::prelude::*;

fn symmetric(n: usize) -> impl Strategy<Value = Matrix> {
    prop::collection::vec(-10.0f64..10.0, n * n).prop_map(move |a| {
        let m = Matrix::from_row_major(n, a);
        m.add(&m.transpose()).scale(0.5)
    })
}

fn spd(n: usize) -> impl Strategy<Value = Matrix> {
    (prop::collection::vec(-3.0f64..3.0, n * n), 0.05f64..2.0)
        .prop_map(move |(a, shift)| Matrix::gram(n, n, &a, shift))
}

fn vector(n: usize) -> impl Strategy<Value = Vector> {
    prop::collection::vec(-5.0f64..5.0, n).prop_map(Vector::from_vec)
}

fn true_min_eig(m: &Matrix) -> f64 {
    let n = m.dim();
    DMatrix::from_fn(n, n, |i, j| m[(i, j)])
        .symmetric_eigen()
        .eigenvalues
        .min()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn cholesky_rejects_exactly_the_non_positive_definite(m in (1usize..=8).prop_flat_map(symmetric)) {
        let bound = min_eig_lower_bound(&m);
        match cholesky(&m) {
            Ok(f) => {
                prop_assert!(bound > 0.0);
                let err = f.reconstruct().sub(&m).max_abs();
                prop_assert!(err <= 1e-12 * m.max_abs().max(1.0));
            }
            Err(LinalgError::NotSpd { .. }) => prop_assert!(bound <= 0.0),
            Err(e) => prop_assert!(false, "unexpected {e}"),
        }
        prop_assert!(bound <= true_min_eig(&m) + 1e-9 * m.max_abs().max(1.0));
    }

    #[test]
    fn damped_bfgs_keeps_positive_definiteness(
        (b, s, y) in (1usize..=6).prop_flat_map(|n| (spd(n), vector(n), vector(n)))
    ) {
        let threshold = 1e-12 * (1.0 + s.norm());
        match damped_bfgs_update(&b, &s, &y, threshold) {
            Ok(update) => {
                prop_assert!(min_eig_lower_bound(&update.b) > 0.0);
                let bs = b.mul_vec(&s);
                let sbs = s.dot(&bs);
                match update.theta {
                    None => {
                        prop_assert_eq!(&update.y, &y);
                        let residual = update.b.mul_vec(&s).sub(&y).norm();
                        prop_assert!(residual <= 1e-10 * y.norm().max(1.0));
                    }
                    Some(theta) => {
                        prop_assert!(s.dot(&y) <= DAMPING_RATIO * sbs);
                        prop_assert!((0.0..=1.0).contains(&theta));
                        let gap = (update.y.dot(&s) - DAMPING_RATIO * sbs).abs();
                        prop_assert!(gap <= 1e-12 * (DAMPING_RATIO * sbs));
                    }
                }
            }
            Err(SkippedUpdate::ShortStep) => prop_assert!(s.norm() <= threshold),
            Err(reason) => prop_assert!(false, "unexpected skip {:?}", reason),
        }
    }
}

fn check_oracles(problem: &ConsensusProblem, seed: u64, scale: f64) {
    let mut stream = GaussianStream::new(seed);
    for i in 0..problem.num_agents() {
        let f = problem.agent(i);
        for _ in 0..20 {
            let x = Vector::from_vec(stream.take(problem.dim(), scale));
            let (g, h) = derivative_check(f, &x);
            assert!(g <= 1e-5, "agent {i}: gradient error {g:e}");
            assert!(h <= 1e-5, "agent {i}: hessian error {h:e}");
        }
    }
}

#[test]
fn every_oracle_passes_finite_difference_checks() {
    check_oracles(&quadratic_problem(4, 5, 11).unwrap(), 1, 5.0);
    check_oracles(&pseudo_huber_problem(4, 5, 12).unwrap(), 2, 3.0);
    check_oracles(&sensor_allocation_problem(20, 42).unwrap(), 3, 5.0);
}
