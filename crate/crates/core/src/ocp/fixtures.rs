//! Instance constructors shared by tests, the CLI, and the bundled fixtures.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use super::{ControlSet, Domain, Dynamics, OcpInstance, Omega, StageCost};
use crate::compgraph::library::{affine, polynomial, separable_quadratic, smooth};
use crate::compgraph::{CompGraph, GraphBuilder, NodeFunction, NodeKind, Profile};
use crate::error::Result;

fn scalar(v: f64) -> DMatrix<f64> {
    DMatrix::from_element(1, 1, v)
}

/// `x+ = a x + b u`, terminal cost `psi(x) = x^2`, no stage cost.
pub fn scalar_terminal(a: f64, b: f64, horizon: usize, omega: Omega, radius: f64) -> Result<OcpInstance> {
    let mut gb = GraphBuilder::new();
    let x = gb.input();
    gb.node(polynomial(vec![0.0, 0.0, 1.0], radius), &[x]);
    let g = gb.build(radius)?;
    OcpInstance::new(
        horizon,
        Dynamics::Linear { a: scalar(a), b: scalar(b) },
        StageCost::Zero,
        g,
        Domain {
            omega,
            u0: vec![0.0; horizon],
            gamma: 1.0,
            radius,
            controls: ControlSet::Free,
        },
    )
}

/// Linear dynamics with separable quadratic costs
/// `g(x) = sum g_i x_i^2`, `l1(x) = sum s_i x_i^2`, `l2(u) = sum c_i u_i^2`.
/// Empty `state_weights` and `control_weights` mean no stage cost.
#[allow(clippy::too_many_arguments)]
pub fn separable_lq(
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    horizon: usize,
    terminal_weights: &[f64],
    state_weights: &[f64],
    control_weights: &[f64],
    omega: Omega,
    radius: f64,
) -> Result<OcpInstance> {
    let q = b.ncols();
    let g = separable_quadratic(terminal_weights, radius)?;
    let stage = if state_weights.is_empty() && control_weights.is_empty() {
        StageCost::Zero
    } else {
        StageCost::Separated {
            l1: separable_quadratic(state_weights, radius)?,
            l2: separable_quadratic(control_weights, radius)?,
        }
    };
    OcpInstance::new(
        horizon,
        Dynamics::Linear { a, b },
        stage,
        g,
        Domain {
            omega,
            u0: vec![0.0; q * horizon],
            gamma: 1.0,
            radius,
            controls: ControlSet::Free,
        },
    )
}

/// `z -> z'Qz + b'z` as one node on `[-radius, radius]^d`.
pub fn quadratic_graph(q: DMatrix<f64>, linear: Vec<f64>, radius: f64) -> Result<CompGraph> {
    let d = q.nrows();
    let mut gb = GraphBuilder::new();
    let ins = gb.inputs(d);
    gb.node(
        NodeFunction::new(NodeKind::QuadraticForm { q, linear, constant: 0.0 }, radius),
        &ins,
    );
    gb.build(radius)
}

fn gaussian(rng: &mut impl Rng, r: usize, c: usize, scale: f64) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| scale * rng.sample::<f64, _>(StandardNormal))
}

/// `M'M / d + shift I`
fn random_psd(rng: &mut impl Rng, d: usize, shift: f64) -> DMatrix<f64> {
    let m = gaussian(rng, d, d, 1.0);
    m.transpose() * m / d as f64 + DMatrix::identity(d, d) * shift
}

/// Random linear instance with convex quadratic-form costs: `g`, `l1` PSD,
/// `l2` positive definite when `strict`, absent otherwise. Domains are wide
/// enough that no check trips for states of moderate size.
pub fn random_lq(rng: &mut impl Rng, n: usize, q: usize, horizon: usize, strict: bool) -> Result<OcpInstance> {
    const WIDE: f64 = 1e6;
    let a = gaussian(rng, n, n, 0.6 / (n as f64).sqrt());
    let b = gaussian(rng, n, q, 1.0);
    let lin = |rng: &mut dyn rand::RngCore, d: usize| (0..d).map(|_| rng.sample::<f64, _>(StandardNormal) * 0.3).collect::<Vec<f64>>();
    let g_lin = lin(rng, n);
    let g = quadratic_graph(random_psd(rng, n, 0.0), g_lin, WIDE)?;
    let stage = if strict {
        let l1_lin = lin(rng, n);
        let l1 = quadratic_graph(random_psd(rng, n, 0.0), l1_lin, WIDE)?;
        let shift = 0.2 + rng.random::<f64>();
        let l2_lin = lin(rng, q);
        let l2 = quadratic_graph(random_psd(rng, q, shift), l2_lin, WIDE)?;
        StageCost::Separated { l1, l2 }
    } else {
        StageCost::Zero
    };
    OcpInstance::new(
        horizon,
        Dynamics::Linear { a, b },
        stage,
        g,
        Domain {
            omega: Omega::Box {
                lo: vec![-1.0; n],
                hi: vec![1.0; n],
            },
            u0: vec![0.0; q * horizon],
            gamma: 1.0,
            radius: WIDE,
            controls: ControlSet::Free,
        },
    )
}

/// Nonlinear two-state system `x1+ = 0.5 tanh(x1) + 0.3 x2`,
/// `x2+ = 0.8 x2 + u`, with `g = |x|^2`, `l1 = 0.1 |x|^2`, `l2 = 0.1 u^2`.
pub fn tanh_tracking(radius: f64) -> Result<OcpInstance> {
    let mut gb = GraphBuilder::new();
    let z = gb.inputs(3);
    let t = gb.node(smooth(Profile::Tanh, 1.0, 0.5, radius), &[z[0]]);
    gb.node(affine(vec![1.0, 0.3], 0.0, 2.0 * radius), &[t, z[1]]);
    gb.node(affine(vec![0.8, 1.0], 0.0, radius), &[z[1], z[2]]);
    let f = gb.build(radius)?;
    OcpInstance::new(
        3,
        Dynamics::Graph(f),
        StageCost::Separated {
            l1: separable_quadratic(&[0.1, 0.1], radius)?,
            l2: separable_quadratic(&[0.1], radius)?,
        },
        separable_quadratic(&[1.0, 1.0], radius)?,
        Domain {
            omega: Omega::Box {
                lo: vec![-0.1; 2],
                hi: vec![0.1; 2],
            },
            u0: vec![0.0; 3],
            gamma: 1.0,
            radius,
            controls: ControlSet::Free,
        },
    )
}

/// The convex-only scalar example: `a = b = 1`, `psi(x) = x^2`, `N = 2`,
/// `Omega = [-0.1, 0.1]`, `R = 2`. Matches `fixtures/example2.json`.
pub fn example2() -> Result<OcpInstance> {
    scalar_terminal(
        1.0,
        1.0,
        2,
        Omega::Box {
            lo: vec![-0.1],
            hi: vec![0.1],
        },
        2.0,
    )
}

/// Two states, one control, horizon three, separable quadratic costs.
/// Matches `fixtures/lq3.json`.
pub fn lq3() -> Result<OcpInstance> {
    let a = DMatrix::from_row_slice(2, 2, &[0.9, 0.1, 0.0, 0.8]);
    let b = DMatrix::from_row_slice(2, 1, &[0.0, 1.0]);
    separable_lq(
        a,
        b,
        3,
        &[1.0, 1.0],
        &[0.1, 0.1],
        &[0.1],
        Omega::Box {
            lo: vec![-0.1; 2],
            hi: vec![0.1; 2],
        },
        2.0,
    )
}
