use consensus_aladin::admm::{AdmmOrder, AdmmRun, AdmmSettings};
use consensus_aladin::aladin::{recover_gradient, run_round, AgentState, AladinSettings, CoordinatorState, Variant};
use consensus_aladin::diagnostics::{centralized_multistart, ReferenceKind};
use consensus_aladin::exec::AgentExecutor;
use consensus_aladin::harness::{run, RunConfig};
use consensus_aladin::linalg::Vector;
use consensus_aladin::local_solver::{solve_subproblem, NewtonOptions, Prox, SubproblemSpec};
use consensus_aladin::problem::{
    derivative_check, quadratic_problem, sensor_allocation_problem, GaussianStream, ProblemKind,
};
use consensus_aladin::Algorithm;

/// Gradient descent with step `1/L`, `L` the Gershgorin bound of the current
/// augmented Hessian.
fn gradient_descent(spec: &SubproblemSpec<'_>, start: &Vector, rho: f64, tol: f64) -> Vector {
    let mut x = start.clone();
    for _ in 0..200_000 {
        let g = spec.merit_gradient(&x);
        if g.norm() <= tol {
            return x;
        }
        let h = spec.oracle.hessian(&x).shifted(rho);
        let n = h.dim();
        let l = (0..n)
            .map(|i| (0..n).map(|j| h[(i, j)].abs()).sum::<f64>())
            .fold(0.0, f64::max);
        x.axpy(-1.0 / l, &g);
    }
    panic!("gradient descent did not reach {tol:e}");
}

#[test]
fn sensor_subproblem_agrees_with_gradient_descent() {
    let p = sensor_allocation_problem(20, 42).unwrap();
    let zero = Vector::zeros(10);
    for i in 0..p.num_agents() {
        let spec = SubproblemSpec {
            oracle: p.agent(i),
            dual: &zero,
            anchor: &zero,
            prox: Prox::Scalar(100.0),
        };
        let newton = solve_subproblem(&spec, &zero, &NewtonOptions::default()).unwrap();
        assert!(newton.gradient_norm <= 1e-10);
        assert!(spec.merit_gradient(&newton.minimizer).norm() <= 1e-10);
        let gd = gradient_descent(&spec, &zero, 100.0, 1e-12);
        assert!(newton.minimizer.sub(&gd).norm() <= 1e-10, "agent {i}");
        for w in newton.merit_trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-12 * w[0].abs().max(1.0));
        }
    }
}

#[test]
fn recovered_gradient_matches_the_analytic_one() {
    let p = sensor_allocation_problem(20, 42).unwrap();
    let mut stream = GaussianStream::new(9);
    for i in 0..p.num_agents() {
        let z = Vector::from_vec(stream.take(10, 2.0));
        let lambda = Vector::from_vec(stream.take(10, 10.0));
        let spec = SubproblemSpec {
            oracle: p.agent(i),
            dual: &lambda,
            anchor: &z,
            prox: Prox::Scalar(100.0),
        };
        let x = solve_subproblem(&spec, &z, &NewtonOptions::default()).unwrap().minimizer;
        let g = recover_gradient(Prox::Scalar(100.0), &z, &x, &lambda);
        assert!(g.sub(&p.agent(i).gradient(&x)).norm() <= 1e-8);
    }
}

#[test]
fn sensor_oracles_pass_finite_differences_at_ten_points() {
    let p = sensor_allocation_problem(20, 42).unwrap();
    let mut stream = GaussianStream::new(10);
    for _ in 0..10 {
        let x = Vector::from_vec(stream.take(10, 5.0));
        for f in p.agents() {
            let (g, h) = derivative_check(f, &x);
            assert!(g <= 1e-5 && h <= 1e-5);
        }
    }
}

#[test]
fn reduced_run_on_small_quadratic_converges() {
    let config = RunConfig {
        agents: 3,
        dim: 2,
        seed: 7,
        ..RunConfig::new(ProblemKind::Quadratic, Algorithm::ReducedAladin)
    };
    let out = run(&config).unwrap();
    assert_eq!(out.records.len(), 200);
    let res: Vec<f64> = out.records.iter().map(|r| r.consensus_residual).collect();
    assert!(res.iter().any(|&r| r <= 1e-8));
    // trending down: every 20-round window ends below where the previous one ended
    let first_hit = res.iter().position(|&r| r <= 1e-8).unwrap();
    for k in (20..first_hit).step_by(20) {
        assert!(res[k] < res[k - 20], "round {k}");
    }
}

#[test]
fn every_aladin_variant_solves_the_quadratic() {
    let p = quadratic_problem(5, 4, 42).unwrap();
    let z_star = p.known_solution().unwrap().z.clone();
    let exec = AgentExecutor::sequential();
    for variant in [Variant::Bfgs, Variant::Reduced, Variant::MatrixProx] {
        let settings = AladinSettings::new(variant, 100.0);
        let mut agents: Vec<_> = (0..5).map(|_| AgentState::initial(4, 100.0)).collect();
        let mut coord = CoordinatorState::new(Vector::zeros(4));
        let mut last = None;
        for _ in 0..200 {
            last = Some(run_round(&p, &settings, &mut agents, &mut coord, None, &exec).unwrap());
        }
        assert!(last.unwrap().record.consensus_residual <= 1e-8, "{variant:?}");
        assert!(coord.z.sub(&z_star).norm() <= 1e-8, "{variant:?}");
    }
}

#[test]
fn admm_orders_reach_the_same_point() {
    let p = quadratic_problem(3, 2, 7).unwrap();
    let z_star = p.known_solution().unwrap().z.clone();
    let exec = AgentExecutor::sequential();
    let mut finals = Vec::new();
    for order in [AdmmOrder::AggregateFirst, AdmmOrder::DualFirst] {
        let mut run = AdmmRun::new(&p, AdmmSettings::new(order, 100.0));
        for _ in 0..500 {
            run.step(&p, None, &exec).unwrap();
        }
        assert!(run.z.sub(&z_star).norm() <= 1e-8, "{order:?}");
        finals.push(run.z);
    }
    assert!(finals[0].sub(&finals[1]).norm() <= 1e-6);
}

#[test]
fn multistart_reference_for_the_sensor_problem_is_local() {
    let p = sensor_allocation_problem(20, 42).unwrap();
    let r = centralized_multistart(&p, 1e-9, 20, 42, 5.0).unwrap();
    assert_eq!(r.kind, ReferenceKind::Local);
    assert!(r.gradient_norm <= 1e-8);
    let sum = r.duals.iter().fold(Vector::zeros(10), |acc, l| acc.add(l));
    assert!(sum.norm() <= 1e-8);
}
