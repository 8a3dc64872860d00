use comp_oc::compgraph::library::*;
use comp_oc::compgraph::GraphBuilder;
use comp_oc::features::*;
use comp_oc::ocp::{extend_system, fixtures};
use nalgebra::DMatrix;

fn lq3_parts() -> comp_oc::ocp::OcpInstance {
    fixtures::lq3().unwrap()
}

#[test]
fn linear_dynamics_have_linear_features() {
    let inst = lq3_parts();
    assert_eq!(compute_features(&inst.dynamics_graph().unwrap(), 256), FeatureTuple::LINEAR);
}

#[test]
fn squared_norm_in_four_dimensions() {
    let g = squared_norm_graph(4, 1.0, 1.0).unwrap();
    let t = compute_features(&g, DEFAULT_FEATURE_SAMPLES);
    assert_eq!(t.r_max, 2.0);
    assert_eq!(t.v_g, 1);
    // sup|f| = 4, sum of sup|df/dx_i| = 8, sum of second partials = 8.
    let analytic = 1.1 * 20.0;
    assert!((t.lambda - analytic).abs() <= 0.1 * analytic, "{}", t.lambda);
    assert!((t.l_max - 1.1 * 4.0).abs() <= 0.1 * 4.4);
}

#[test]
fn extension_follows_the_parallel_law() {
    let inst = lq3_parts();
    let ext = extend_system(&inst).unwrap();
    let n = DEFAULT_FEATURE_SAMPLES;
    let (l1, l2) = match &inst.stage_cost {
        comp_oc::ocp::StageCost::Separated { l1, l2 } => (l1.clone(), l2.clone()),
        _ => unreachable!(),
    };
    let stage = features_parallel(compute_features(&l1, n), compute_features(&l2, n));
    let parts = features_parallel(compute_features(&inst.dynamics_graph().unwrap(), n), stage);
    let whole = compute_features(&ext.dynamics_graph().unwrap(), n);
    // Affine f contributes the placeholder r_max = 1, which the directly
    // computed tuple never sees.
    assert!(whole.r_max <= parts.r_max);
    assert_eq!(whole.r_max, stage.r_max);
    assert_eq!(whole.v_g, parts.v_g);
    assert!(whole.lambda <= 1.1 * parts.lambda && whole.lambda >= parts.lambda / 1.1);
    assert!(whole.l_max <= 1.1 * parts.l_max && whole.l_max >= parts.l_max / 1.1);

    let g = compute_features(&inst.terminal_cost, n);
    assert_eq!(features_extend_terminal(g), g);
    let bold_g = compute_features(&ext.terminal_cost, n);
    assert_eq!(bold_g.r_max, g.r_max);
    assert_eq!(bold_g.v_g, g.v_g);
    assert!((bold_g.lambda - g.lambda).abs() <= 0.1 * g.lambda);
    assert!((bold_g.l_max - g.l_max).abs() <= 0.1 * g.l_max);
}

#[test]
fn mixed_ratios_and_counts() {
    let mut gb = GraphBuilder::new();
    let x = gb.inputs(4);
    let a = gb.node(squared_norm(3, 1.0, 1.0), &x[..3]);
    let b = gb.node(squared_norm(4, 1.0, 1.0).with_smoothness(1), &x);
    gb.node(weighted_sum(vec![1.0, 1.0], 16.0), &[a, b]);
    let t = compute_features(&gb.build(1.0).unwrap(), 512);
    assert_eq!(t.r_max, 4.0);
    assert_eq!(t.v_g, 2);
}

#[test]
fn lipschitz_of_linear_map_is_its_norm() {
    let a = DMatrix::from_row_slice(2, 2, &[3.0, 0.0, 0.0, 1.0]);
    let b = DMatrix::from_row_slice(2, 1, &[0.0, 4.0]);
    let g = linear_map(&a, &b, 1.0).unwrap();
    let l = graph_lipschitz(&g, 64);
    // spectral norm of [[3,0,0],[0,1,4]] is sqrt(17)
    assert!((l - 1.1 * 17f64.sqrt()).abs() < 1e-9, "{l}");
}

#[test]
fn nonlinear_dynamics_extension_is_exact_in_structure() {
    let inst = comp_oc::ocp::fixtures::tanh_tracking(2.0).unwrap();
    let ext = extend_system(&inst).unwrap();
    let n = DEFAULT_FEATURE_SAMPLES;
    let (l1, l2) = match &inst.stage_cost {
        comp_oc::ocp::StageCost::Separated { l1, l2 } => (l1.clone(), l2.clone()),
        _ => unreachable!(),
    };
    let parts = features_parallel(
        compute_features(&inst.dynamics_graph().unwrap(), n),
        features_parallel(compute_features(&l1, n), compute_features(&l2, n)),
    );
    let whole = compute_features(&ext.dynamics_graph().unwrap(), n);
    assert_eq!(whole.r_max, parts.r_max);
    assert_eq!(whole.v_g, parts.v_g);
    assert!((whole.lambda - parts.lambda).abs() <= 0.1 * parts.lambda);
    assert!((whole.l_max - parts.l_max).abs() <= 0.1 * parts.l_max);
}
