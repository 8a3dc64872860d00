//! Weak controller synthesis: constant estimation, the `(k, h, delta)`
//! schedule, the unrolled finite-difference descent network, and its
//! evaluation against an oracle.

mod controller;

pub use controller::{
    build_controller, build_controller_fixed, evaluate_controller, exact_descent_step, fd_descent_step, CostEvaluator, StateError,
    SurrogateCost, UnrolledController, WeakErrorReport, validation_pairs,
};

use serde::{Deserialize, Serialize};

use crate::compgraph::CompGraph;
use crate::error::{Error, Result};
use crate::features::{self, compute_features, graph_lipschitz, FeatureTuple, SAFETY_FACTOR};
use crate::ocp::{grad_j, hess_j, OcpInstance, StageCost};
use crate::sampling;
use crate::shallow_nn::graph_constant;

/// Default ceiling on the per-node width of a plan.
pub const WIDTH_CEILING: usize = 1_000_000;

/// Lower bound on the sampled constants.
pub const CONSTANT_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstantLedger {
    /// Sup of `|dJ/dU|` over `Omega x B_3gamma(U0)`, inflated.
    pub l1: f64,
    /// Sup of the spectral norm of `d^2J/dU^2` over `Omega x B_2gamma(U0)`, inflated.
    pub l2: f64,
    pub alpha: f64,
    pub gamma: f64,
    pub u0: Vec<f64>,
    pub m: usize,
    pub samples: usize,
}

/// Sampled `L1`, `L2` over initial states (box vertices plus `n_samples`
/// Sobol points) crossed with `n_samples` ball points.
pub fn estimate_constants(inst: &OcpInstance, n_samples: usize) -> Result<ConstantLedger> {
    let d = &inst.domain;
    let xs = d.omega.samples(n_samples, 0x0001_1111);
    let outer = sampling::ball_samples(&d.u0, 3.0 * d.gamma, n_samples, 0x1_1112);
    let inner = sampling::ball_samples(&d.u0, 2.0 * d.gamma, n_samples, 0x1_1113);
    let mut l1 = 0.0f64;
    let mut l2 = 0.0f64;
    for x in &xs {
        for u in &outer {
            l1 = l1.max(sampling::norm(&grad_j(inst, x, u)?));
        }
        for u in &inner {
            l2 = l2.max(features::spectral_norm(&hess_j(inst, x, u)?));
        }
    }
    // Affine costs have no curvature; keep the step well defined.
    let l1 = (SAFETY_FACTOR * l1).max(CONSTANT_FLOOR);
    let l2 = (SAFETY_FACTOR * l2).max(CONSTANT_FLOOR);
    Ok(ConstantLedger {
        l1,
        l2,
        alpha: 1.0 / l2,
        gamma: d.gamma,
        u0: d.u0.clone(),
        m: inst.m(),
        samples: xs.len() * (outer.len() + inner.len()),
    })
}

/// Constants of the surrogate error bound `|J - J^NN| <= C~1 n_w^(-1/r)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurrogateConstants {
    pub features_f: FeatureTuple,
    pub features_g: FeatureTuple,
    /// Sampled Lipschitz constants of the full maps `f` and `g`.
    pub lip_f: f64,
    pub lip_g: f64,
    /// Calibrated per-catalog approximation constants.
    pub c_f: f64,
    pub c_g: f64,
    pub horizon: usize,
    /// `((L^f)^N - 1) / (L^f - 1)`, or `N` when `L^f = 1`.
    pub geom: f64,
    pub c_tilde1: f64,
    pub c_frak: f64,
    /// Max of `r_max` over the graphs that have general nodes (1 if none).
    pub r: f64,
}

impl SurrogateConstants {
    /// `N |V_G^f| + |V_G^g|`
    pub fn general_nodes(&self) -> usize {
        self.horizon * self.features_f.v_g + self.features_g.v_g
    }
}

pub fn geometric_sum(l: f64, n: usize) -> f64 {
    if (l - 1.0).abs() < 1e-12 {
        n as f64
    } else {
        (l.powi(n as i32) - 1.0) / (l - 1.0)
    }
}

fn graphs_of(inst: &OcpInstance) -> Result<(CompGraph, CompGraph)> {
    if !matches!(inst.stage_cost, StageCost::Zero) {
        return Err(Error::InvalidInstance(
            "synthesis needs a terminal-cost-only instance; extend the system first".into(),
        ));
    }
    Ok((inst.dynamics_graph()?, inst.terminal_cost.clone()))
}

pub fn surrogate_constants(inst: &OcpInstance, n_samples: usize) -> Result<SurrogateConstants> {
    let (f, g) = graphs_of(inst)?;
    let ff = compute_features(&f, n_samples);
    let fg = compute_features(&g, n_samples);
    let lip_f = graph_lipschitz(&f, n_samples);
    let lip_g = graph_lipschitz(&g, n_samples);
    let c_f = graph_constant(&f);
    let c_g = graph_constant(&g);
    let geom = geometric_sum(lip_f, inst.horizon);
    let f_term = c_f * ff.l_max * ff.lambda * ff.v_g as f64;
    let g_term = c_g * fg.l_max * fg.lambda * fg.v_g as f64;
    let c_tilde1 = lip_g * geom * f_term + g_term;
    let c_frak = c_tilde1.max(2.0 * geom * f_term);
    let r = [ff, fg]
        .iter()
        .filter(|t| t.v_g > 0)
        .map(|t| t.r_max)
        .fold(None, |a: Option<f64>, v| Some(a.map_or(v, |a| a.max(v))))
        .unwrap_or(1.0);
    Ok(SurrogateConstants {
        features_f: ff,
        features_g: fg,
        lip_f,
        lip_g,
        c_f,
        c_g,
        horizon: inst.horizon,
        geom,
        c_tilde1,
        c_frak,
        r,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthesisPlan {
    pub epsilon: f64,
    pub k_bar: usize,
    pub h_bar: f64,
    pub delta_bar: f64,
    /// Per-node width `n_w(delta_bar) = ceil((C / delta_bar)^r)`.
    pub surrogate_width: usize,
    pub c_frak: f64,
    pub r: f64,
    pub m: usize,
    pub gamma: f64,
    /// Upper bounds actually used by the schedule: `L1_eff >= L1` so that
    /// `eps / (3 L1_eff) <= gamma / 2`, and `L2_eff >= L2` so that
    /// `6 L2_eff gamma^2 / eps` is the integer `k_bar`.
    pub l1_eff: f64,
    pub l2_eff: f64,
    pub alpha: f64,
    /// `k (h sqrt(m) + 2 sqrt(m) delta / (h L2))`, must not exceed `gamma`.
    pub containment: f64,
    /// `L1 k (h sqrt(m) + 2 sqrt(m) delta / (h L2)) + 2 L2 gamma^2 / (k + 4)`.
    pub predicted_bound: f64,
    /// `N |V_G^f| + |V_G^g|`
    pub general_nodes: usize,
    /// `size(J^NN) = general_nodes * n_w`
    pub size_j: usize,
    /// `2 k m size(J^NN)`
    pub total_size: usize,
    pub c1: f64,
    pub c2: f64,
    /// `C1^r C2 (N|V_G^f| + |V_G^g|) (1 + C^r) m^(r+1) / eps^(4r+1)`
    pub size_bound: f64,
}

/// Weak-error bound at `(k, h, delta)` with the given constants.
pub fn weak_bound(l1: f64, l2: f64, gamma: f64, m: usize, k: usize, h: f64, delta: f64) -> f64 {
    let sm = (m as f64).sqrt();
    let kf = k as f64;
    l1 * kf * (h * sm + 2.0 * sm * delta / (h * l2)) + 2.0 * l2 * gamma * gamma / (kf + 4.0)
}

pub fn size_bound(c1: f64, c2: f64, r: f64, general_nodes: usize, c_frak: f64, m: usize, epsilon: f64) -> f64 {
    c1.powf(r) * c2 * general_nodes as f64 * (1.0 + c_frak.powf(r)) * (m as f64).powf(r + 1.0)
        / epsilon.powf(4.0 * r + 1.0)
}

pub fn plan_synthesis(
    ledger: &ConstantLedger,
    consts: &SurrogateConstants,
    epsilon: f64,
    width_ceiling: usize,
) -> Result<SynthesisPlan> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::Config(format!("epsilon must lie in (0, 1), got {epsilon}")));
    }
    let gamma = ledger.gamma;
    let m = ledger.m;
    let sm = (m as f64).sqrt();
    let k_bar = ((6.0 * ledger.l2 * gamma * gamma / epsilon).ceil() as usize).max(1);
    let l2 = k_bar as f64 * epsilon / (6.0 * gamma * gamma);
    let l1 = ledger.l1.max(2.0 * epsilon / (3.0 * gamma));
    let kf = k_bar as f64;
    let min = (epsilon / (3.0 * l1)).min(gamma);
    let h_bar = min / (kf * sm);
    let delta_bar = h_bar * l2 / (2.0 * sm * kf) * min;
    let containment = kf * (h_bar * sm + 2.0 * delta_bar * sm / (h_bar * l2));
    let predicted_bound = weak_bound(l1, l2, gamma, m, k_bar, h_bar, delta_bar);
    if containment > gamma * (1.0 + 1e-12) || predicted_bound > epsilon * (1.0 + 1e-12) {
        return Err(Error::PlanInfeasible(format!(
            "schedule check failed: containment {containment:.3e} vs gamma {gamma:.3e}, bound {predicted_bound:.3e} vs eps {epsilon}"
        )));
    }
    let r = consts.r;
    let width_real = (consts.c_frak / delta_bar).powf(r).ceil();
    if !(width_real <= width_ceiling as f64) {
        return Err(Error::PlanInfeasible(format!(
            "surrogate width {width_real:.3e} exceeds the ceiling {width_ceiling} at eps = {epsilon}"
        )));
    }
    let surrogate_width = width_real as usize;
    let general_nodes = consts.general_nodes();
    let size_j = general_nodes * surrogate_width;
    let total_size = 2 * k_bar * m * size_j;
    let c1 = 216.0 * l1 * l2 * gamma.powi(4) / (1.0 / (3.0 * l1)).min(gamma);
    let c2 = 12.0 * l2 * gamma * gamma;
    Ok(SynthesisPlan {
        epsilon,
        k_bar,
        h_bar,
        delta_bar,
        surrogate_width,
        c_frak: consts.c_frak,
        r,
        m,
        gamma,
        l1_eff: l1,
        l2_eff: l2,
        alpha: 1.0 / l2,
        containment,
        predicted_bound,
        general_nodes,
        size_j,
        total_size,
        c1,
        c2,
        size_bound: size_bound(c1, c2, r, general_nodes, consts.c_frak, m, epsilon),
    })
}

impl SynthesisPlan {
    /// The schedule with a different per-node width, keeping all constants.
    pub fn with_width(&self, width: usize) -> Self {
        let size_j = self.general_nodes * width;
        SynthesisPlan {
            surrogate_width: width,
            size_j,
            total_size: 2 * self.k_bar * self.m * size_j,
            ..self.clone()
        }
    }
}
