use comp_oc::compgraph::library::*;
use comp_oc::features::compute_features;
use comp_oc::ocp::fixtures::*;
use comp_oc::ocp::*;
use comp_oc::oracle::OracleSolver;
use comp_oc::sampling;
use comp_oc::Error;
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn point(x: &[f64]) -> Omega {
    Omega::Points(vec![x.to_vec()])
}

fn example(n: usize) -> OcpInstance {
    scalar_terminal(1.0, 1.0, n, Omega::Box { lo: vec![-0.1], hi: vec![0.1] }, 8.0).unwrap()
}

#[test]
fn identity_dynamics_keep_state() {
    let i = DMatrix::identity(2, 2);
    let inst = separable_lq(i.clone(), i, 2, &[1.0, 1.0], &[], &[], point(&[1.0, 2.0]), 4.0).unwrap();
    let r = rollout(&inst, &[1.0, 2.0], &[0.0; 4]).unwrap();
    assert!(r.states.iter().all(|s| s == &vec![1.0, 2.0]));
    assert_eq!(r.cost, 5.0);
}

#[test]
fn scalar_example_cost() {
    let inst = example(2);
    let r = rollout(&inst, &[1.0], &[1.0, 1.0]).unwrap();
    assert_eq!(r.states[2], vec![3.0]);
    assert_eq!(r.cost, 9.0);
}

#[test]
fn rollout_matrix_examples() {
    let m = build_rollout_matrices(&DMatrix::from_element(1, 1, 2.0), &DMatrix::from_element(1, 1, 1.0), 3);
    assert_eq!(m.c_blocks[3].as_slice(), &[4.0, 2.0, 1.0]);
    assert!(m.c_blocks[0].iter().all(|v| *v == 0.0));

    let b = DMatrix::from_row_slice(2, 1, &[1.0, -2.0]);
    let m = build_rollout_matrices(&DMatrix::zeros(2, 2), &b, 4);
    for k in 1..=4 {
        for j in 0..4 {
            let blk = m.c_blocks[k].columns(j, 1);
            if j == k - 1 {
                assert_eq!(blk, b);
            } else {
                assert!(blk.iter().all(|v| *v == 0.0));
            }
        }
    }
}

#[test]
fn domain_violation_on_escaping_state() {
    let inst = scalar_terminal(1.0, 1.0, 2, point(&[0.0]), 2.0).unwrap();
    assert!(matches!(rollout(&inst, &[1.5], &[0.4, 0.4]), Err(Error::DomainViolation { .. })));
}

#[test]
fn scalar_example_hessian_is_rank_one() {
    let inst = example(2);
    let h = hess_j(&inst, &[0.0], &[0.0, 0.0]).unwrap();
    assert_eq!(h, DMatrix::from_row_slice(2, 2, &[2.0, 2.0, 2.0, 2.0]));
    assert_eq!(h.determinant(), 0.0);
}

#[test]
fn decoupled_controls_give_stage_hessian() {
    let a = DMatrix::from_row_slice(2, 2, &[0.5, 0.1, 0.0, 0.9]);
    let inst = separable_lq(a, DMatrix::zeros(2, 1), 3, &[1.0, 2.0], &[1.0, 1.0], &[1.5], point(&[0.3, 0.2]), 4.0).unwrap();
    let h = hess_j(&inst, &[0.3, 0.2], &[0.1, -0.2, 0.3]).unwrap();
    assert_eq!(h, DMatrix::identity(3, 3) * 3.0);
}

fn fd_hessian(inst: &OcpInstance, x: &[f64], u: &[f64]) -> DMatrix<f64> {
    let m = u.len();
    let h = 1e-4;
    let mut out = DMatrix::zeros(m, m);
    for j in 0..m {
        let mut up = u.to_vec();
        let mut dn = u.to_vec();
        up[j] += h;
        dn[j] -= h;
        let gp = grad_j(inst, x, &up).unwrap();
        let gm = grad_j(inst, x, &dn).unwrap();
        for i in 0..m {
            out[(i, j)] = (gp[i] - gm[i]) / (2.0 * h);
        }
    }
    out
}

#[test]
fn analytic_hessian_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..10 {
        let n = rng.random_range(1..=4);
        let q = rng.random_range(1..=3);
        let horizon = rng.random_range(1..=5);
        let inst = random_lq(&mut rng, n, q, horizon, true).unwrap();
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let u: Vec<f64> = (0..q * horizon).map(|_| rng.random_range(-1.0..1.0)).collect();
        let h = hess_j(&inst, &x, &u).unwrap();
        let fd = fd_hessian(&inst, &x, &u);
        let rel = (&h - &fd).norm() / h.norm();
        assert!(rel <= 1e-5, "{rel}");
    }
}

fn fd_gradient_check(inst: &OcpInstance, x: &[f64], u: &[f64]) -> f64 {
    let g = grad_j(inst, x, u).unwrap();
    let h = 1e-5;
    let fd: Vec<f64> = (0..u.len())
        .map(|j| {
            let mut up = u.to_vec();
            let mut dn = u.to_vec();
            up[j] += h;
            dn[j] -= h;
            (inst.cost(x, &up).unwrap() - inst.cost(x, &dn).unwrap()) / (2.0 * h)
        })
        .collect();
    let diff: Vec<f64> = g.iter().zip(&fd).map(|(a, b)| a - b).collect();
    sampling::norm(&diff) / sampling::norm(&g).max(1e-12)
}

#[test]
fn gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..10 {
        let inst = random_lq(&mut rng, 3, 2, 4, true).unwrap();
        let ext = extend_system(&inst).unwrap();
        let x: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
        let u: Vec<f64> = (0..8).map(|_| rng.random_range(-1.0..1.0)).collect();
        assert!(fd_gradient_check(&inst, &x, &u) <= 1e-6);
        let xe: Vec<f64> = x.iter().copied().chain([0.0]).collect();
        assert!(fd_gradient_check(&ext, &xe, &u) <= 1e-6);
    }
}

#[test]
fn certificates() {
    let cert = certify_convexity(&example(3), 40);
    assert_eq!(cert.verdict, Verdict::ConvexOnly);
    assert!(cert.min_eig.abs() <= 1e-10);

    let a = DMatrix::from_row_slice(2, 2, &[0.9, 0.2, -0.1, 0.8]);
    let b = DMatrix::from_row_slice(2, 1, &[0.0, 1.0]);
    let inst = separable_lq(a.clone(), b.clone(), 3, &[1.0, 1.0], &[0.0, 0.0], &[1.0], point(&[0.1, 0.1]), 8.0).unwrap();
    let cert = certify_convexity(&inst, 40);
    assert_eq!(cert.verdict, Verdict::StrictlyConvex);
    assert!(cert.min_eig >= 2.0 - 1e-12);

    let concave = separable_lq(a, b, 3, &[-1.0, -1.0], &[], &[], point(&[0.1, 0.1]), 8.0).unwrap();
    assert_eq!(certify_convexity(&concave, 10).verdict, Verdict::NotCertified);
}

#[test]
fn extended_system_matches_original() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..5 {
        let inst = random_lq(&mut rng, 2, 2, 3, true).unwrap();
        let ext = extend_system(&inst).unwrap();
        assert_eq!(ext.n, 3);
        assert!(matches!(ext.stage_cost, StageCost::Zero));
        for _ in 0..20 {
            let x: Vec<f64> = (0..2).map(|_| rng.random_range(-1.0..1.0)).collect();
            let u: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..1.0)).collect();
            let xe: Vec<f64> = x.iter().copied().chain([0.0]).collect();
            let j = inst.cost(&x, &u).unwrap();
            let je = ext.cost(&xe, &u).unwrap();
            assert!((j - je).abs() <= 1e-10 * j.abs().max(1.0), "{j} {je}");
        }
    }
}

#[test]
fn extension_with_zero_stage_cost() {
    let a = DMatrix::from_row_slice(1, 1, &[0.5]);
    let b = DMatrix::from_row_slice(1, 1, &[1.0]);
    let mut inst = separable_lq(a, b, 2, &[1.0], &[1.0], &[1.0], point(&[0.2]), 4.0).unwrap();
    inst.stage_cost = StageCost::Separated {
        l1: zero(1, 4.0).unwrap(),
        l2: zero(1, 4.0).unwrap(),
    };
    let ext = extend_system(&inst).unwrap();
    let u = [0.3, -0.1];
    let r = ext.rollout(&[0.2, 0.0], &u).unwrap();
    let x2 = inst.rollout(&[0.2], &u).unwrap().states[2][0];
    assert_eq!(r.states[2][1], 0.0);
    assert_eq!(r.cost, x2 * x2);
}

#[test]
fn extension_requires_stage_costs() {
    assert!(matches!(extend_system(&example(2)), Err(Error::InvalidInstance(_))));
}

#[test]
fn extended_terminal_features_match() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let inst = random_lq(&mut rng, 2, 1, 2, true).unwrap();
    let ext = extend_system(&inst).unwrap();
    assert_eq!(
        compute_features(&ext.terminal_cost, 512),
        compute_features(&inst.terminal_cost, 512)
    );
}

#[test]
fn calibration_of_stable_scalar_system() {
    let inst = scalar_terminal(0.5, 1.0, 2, Omega::Box { lo: vec![-0.5], hi: vec![0.5] }, 8.0).unwrap();
    let cal = calibrate_domain(&inst, &OracleSolver::lq(), 1.25).unwrap();
    assert!(cal.domain.gamma < 0.5);
    assert!([2.0, 4.0].contains(&cal.domain.radius), "{}", cal.domain.radius);
    assert_eq!(cal.terminal_cost.nodes()[1].func.as_ref().unwrap().radius, cal.domain.radius);
}

#[test]
fn calibration_of_degenerate_point_domain() {
    let inst = scalar_terminal(0.5, 1.0, 2, point(&[0.0]), 8.0).unwrap();
    let cal = calibrate_domain(&inst, &OracleSolver::lq(), 1.25).unwrap();
    assert_eq!(cal.domain.u0, vec![0.0, 0.0]);
    assert_eq!(cal.domain.gamma, 1e-3);
    assert_eq!(cal.domain.radius, 2.0);
}

#[test]
fn calibration_covers_min_norm_solutions() {
    let inst = example(2);
    let oracle = OracleSolver::lq();
    let cal = calibrate_domain(&inst, &oracle, 1.25).unwrap();
    for x in [-0.1, -0.03, 0.0, 0.07, 0.1] {
        let u = oracle.solve(&cal, &[x]).unwrap();
        assert!(sampling::dist(&u, &cal.domain.u0) <= cal.domain.gamma);
    }
    assert!(calibrate_domain(&inst, &oracle, 0.5).is_err());
}

#[test]
fn calibration_rejects_divergent_rollouts() {
    let inst = scalar_terminal(1e3, 1.0, 4, Omega::Box { lo: vec![-1.0], hi: vec![1.0] }, 8.0).unwrap();
    let oracle = OracleSolver::lq();
    assert!(matches!(
        calibrate_domain(&inst, &oracle, 1.25),
        Err(Error::CalibrationFailure(_))
    ));
}

#[test]
fn instance_json_round_trip() {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let inst = random_lq(&mut rng, 2, 1, 3, true).unwrap();
    let back = OcpInstance::from_json(&inst.to_json()).unwrap();
    assert_eq!(back, inst);
    let ext = extend_system(&inst).unwrap();
    let back = OcpInstance::from_json(&ext.to_json()).unwrap();
    assert_eq!(back, ext);
}

#[test]
fn instance_json_requires_horizon() {
    let mut v: serde_json::Value = serde_json::from_str(&example(2).to_json()).unwrap();
    v.as_object_mut().unwrap().remove("horizon");
    let err = OcpInstance::from_json(&v.to_string()).unwrap_err();
    assert!(err.to_string().contains("horizon"), "{err}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn recursive_and_matrix_rollouts_agree(seed in any::<u64>(), n in 1usize..=6, q in 1usize..=6, horizon in 1usize..=8) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let inst = random_lq(&mut rng, n, q, horizon, false).unwrap();
        let Dynamics::Linear { a, b } = &inst.dynamics else { unreachable!() };
        let mats = build_rollout_matrices(a, b, horizon);
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let u: Vec<f64> = (0..q * horizon).map(|_| rng.random_range(-1.0..1.0)).collect();
        let states = inst.states_unchecked(&x, &u);
        for (k, s) in states.iter().enumerate() {
            let closed = mats.state(k, &x, &u);
            for (p, c) in s.iter().zip(&closed) {
                prop_assert!((p - c).abs() <= 1e-12 * (1.0 + p.abs()));
            }
        }
    }

    #[test]
    fn strictly_convex_instances_certify(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.random_range(1..=4);
        let q = rng.random_range(1..=4);
        let horizon = rng.random_range(1..=6);
        let inst = random_lq(&mut rng, n, q, horizon, true).unwrap();
        prop_assert_eq!(certify_convexity(&inst, 8).verdict, Verdict::StrictlyConvex);
    }

    #[test]
    fn scalar_terminal_hessian_rank_one(a in -1.5f64..1.5, b in 0.2f64..2.0, horizon in 2usize..6, x in -0.1f64..0.1) {
        let inst = scalar_terminal(a, b, horizon, Omega::Box { lo: vec![-0.1], hi: vec![0.1] }, 1e3).unwrap();
        let h = hess_j(&inst, &[x], &vec![0.01; horizon]).unwrap();
        let sv = h.clone().singular_values();
        let mut s: Vec<f64> = sv.iter().copied().collect();
        s.sort_by(|p, q| q.total_cmp(p));
        prop_assert!(s[1] <= 1e-10 * s[0]);
        prop_assert!(min_eigenvalue(&h) >= -1e-10 * s[0]);
    }
}
