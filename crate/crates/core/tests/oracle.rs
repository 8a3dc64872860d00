use comp_oc::compgraph::library::*;
use comp_oc::compgraph::{GraphBuilder, Profile};
use comp_oc::ocp::fixtures::*;
use comp_oc::ocp::*;
use comp_oc::oracle::{check_quadratic, OracleSolver};
use comp_oc::sampling;
use comp_oc::Error;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn example(a: f64, b: f64, horizon: usize) -> OcpInstance {
    scalar_terminal(a, b, horizon, Omega::Box { lo: vec![-1.0], hi: vec![1.0] }, 64.0).unwrap()
}

#[test]
fn scalar_example_min_norm_solution() {
    let inst = example(1.0, 1.0, 2);
    let u = OracleSolver::lq().solve_lq(&inst, &[1.0]).unwrap();
    assert!((u[0] + 0.5).abs() < 1e-14 && (u[1] + 0.5).abs() < 1e-14, "{u:?}");
    assert!(inst.cost(&[1.0], &u).unwrap().abs() < 1e-28);
}

#[test]
fn pure_control_penalty_has_zero_minimizer() {
    let a = DMatrix::zeros(1, 1);
    let b = DMatrix::from_element(1, 1, 1.0);
    let inst = separable_lq(a, b, 3, &[0.0], &[0.0], &[1.0], Omega::Points(vec![vec![0.0]]), 4.0).unwrap();
    let (h, c) = comp_oc::oracle::quadratic_model(&inst, &[0.0]).unwrap();
    assert_eq!(h, DMatrix::identity(3, 3) * 2.0);
    assert!(c.iter().all(|v| *v == 0.0));
    assert_eq!(OracleSolver::lq().solve_lq(&inst, &[0.0]).unwrap(), vec![0.0; 3]);
}

#[test]
fn local_minimality_probe() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..10 {
        let inst = random_lq(&mut rng, 3, 2, 3, true).unwrap();
        let x: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
        let u = OracleSolver::lq().solve(&inst, &x).unwrap();
        let j = inst.cost(&x, &u).unwrap();
        for k in 0..u.len() {
            for s in [1e-4, -1e-4] {
                let mut p = u.clone();
                p[k] += s;
                assert!(inst.cost(&x, &p).unwrap() >= j);
            }
        }
    }
}

#[test]
fn numeric_solver_agrees_with_closed_form() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    for _ in 0..5 {
        let inst = random_lq(&mut rng, 2, 2, 3, true).unwrap();
        let x: Vec<f64> = (0..2).map(|_| rng.random_range(-1.0..1.0)).collect();
        let lq = OracleSolver::lq().solve(&inst, &x).unwrap();
        let num = OracleSolver::numeric().solve(&inst, &x).unwrap();
        assert!(sampling::dist(&lq, &num) <= 1e-8, "{}", sampling::dist(&lq, &num));
        let ext = extend_system(&inst).unwrap();
        let xe: Vec<f64> = x.iter().copied().chain([0.0]).collect();
        let num_ext = OracleSolver::numeric().solve(&ext, &xe).unwrap();
        assert!(sampling::dist(&lq, &num_ext) <= 1e-8);
        assert!(sampling::dist(&lq, &OracleSolver::lq().solve(&ext, &xe).unwrap()) <= 1e-12);
    }
}

#[test]
fn numeric_solver_returns_immediately_at_optimum() {
    let inst = example(1.0, 1.0, 2);
    let solver = OracleSolver { max_iters: 0, ..OracleSolver::numeric() };
    let u = solver.solve_numeric_from(&inst, &[1.0], &[-0.5, -0.5]).unwrap();
    assert_eq!(u, vec![-0.5, -0.5]);
    assert!(matches!(
        solver.solve_numeric_from(&inst, &[1.0], &[0.0, 0.0]),
        Err(Error::NoConvergence { .. })
    ));
}

#[test]
fn convex_only_value_agreement() {
    for x in [-1.0, -0.3, 0.6, 1.0] {
        let inst = example(0.9, 1.1, 3);
        let lq = OracleSolver::lq().solve(&inst, &[x]).unwrap();
        let num = OracleSolver::numeric().solve_numeric_from(&inst, &[x], &[0.3, -0.2, 0.1]).unwrap();
        let (jl, jn) = (inst.cost(&[x], &lq).unwrap(), inst.cost(&[x], &num).unwrap());
        assert!((jl - jn).abs() <= 1e-9);
    }
}

#[test]
fn min_norm_solution_lies_in_span() {
    for (a, b, horizon) in [(1.0, 1.0, 2), (0.5, 2.0, 3), (1.2, 0.7, 4)] {
        let inst = example(a, b, horizon);
        let v: Vec<f64> = (0..horizon).map(|j| f64::powi(a, (horizon - 1 - j) as i32) * b).collect();
        let u = OracleSolver::lq().solve(&inst, &[0.8]).unwrap();
        let t = u.iter().zip(&v).map(|(p, q)| p * q).sum::<f64>() / v.iter().map(|q| q * q).sum::<f64>();
        let residual: Vec<f64> = u.iter().zip(&v).map(|(p, q)| p - t * q).collect();
        assert!(sampling::norm(&residual) <= 1e-12 * sampling::norm(&u));
    }
}

#[test]
fn oracle_beats_random_controls() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    for _ in 0..50 {
        let n = rng.random_range(1..=3);
        let q = rng.random_range(1..=2);
        let horizon = rng.random_range(1..=4);
        let inst = random_lq(&mut rng, n, q, horizon, true).unwrap();
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let u = OracleSolver::lq().solve(&inst, &x).unwrap();
        let best = inst.cost(&x, &u).unwrap();
        let tol = 1e-12 * best.abs().max(1.0);
        for p in sampling::ball_samples(&inst.domain.u0, 2.0 * inst.domain.gamma, 10_000, rng.random()) {
            assert!(best <= inst.cost(&x, &p).unwrap() + tol);
        }
    }
}

#[test]
fn non_quadratic_costs_are_rejected() {
    let mut gb = GraphBuilder::new();
    let x = gb.input();
    gb.node(smooth(Profile::Softplus, 1.0, 1.0, 4.0), &[x]);
    let g = gb.build(4.0).unwrap();
    let mut inst = example(1.0, 1.0, 2);
    inst.terminal_cost = g;
    assert!(matches!(check_quadratic(&inst), Err(Error::NotQuadratic(_))));
    assert!(matches!(OracleSolver::lq().solve_lq(&inst, &[0.5]), Err(Error::NotQuadratic(_))));

    let mut gb = GraphBuilder::new();
    let x = gb.input();
    let s = gb.node(polynomial(vec![0.0, 0.0, 1.0], 4.0), &[x]);
    gb.node(polynomial(vec![0.0, 0.0, 1.0], 20.0), &[s]);
    inst.terminal_cost = gb.build(4.0).unwrap();
    assert!(matches!(check_quadratic(&inst), Err(Error::NotQuadratic(_))));

    // softplus costs still solve numerically
    let mut gb = GraphBuilder::new();
    let x = gb.input();
    let s = gb.node(polynomial(vec![0.0, 0.0, 1.0], 64.0), &[x]);
    gb.node(smooth(Profile::Softplus, 1.0, 1.0, 8000.0), &[s]);
    inst.terminal_cost = gb.build(64.0).unwrap();
    let u = OracleSolver::auto(&inst).solve(&inst, &[0.5]).unwrap();
    assert!(sampling::norm(&grad_j(&inst, &[0.5], &u).unwrap()) <= 1e-12);
}
