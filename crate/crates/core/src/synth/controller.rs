use serde::{Deserialize, Serialize};

use super::{weak_bound, SynthesisPlan};
use crate::error::{Error, Result};
use crate::ocp::{grad_j, OcpInstance, StageCost};
use crate::oracle::OracleSolver;
use crate::sampling;
use crate::shallow_nn::{assemble_surrogate, SurrogateNet};

/// Anything that evaluates a cost `J(x, U)`.
pub trait CostEvaluator {
    fn cost(&self, x: &[f64], u: &[f64]) -> Result<f64>;
}

impl CostEvaluator for OcpInstance {
    fn cost(&self, x: &[f64], u: &[f64]) -> Result<f64> {
        OcpInstance::cost(self, x, u)
    }
}

/// `U - alpha dJ/dU(x, U)`
pub fn exact_descent_step(inst: &OcpInstance, x: &[f64], u: &[f64], alpha: f64) -> Result<Vec<f64>> {
    let g = grad_j(inst, x, u)?;
    Ok(u.iter().zip(&g).map(|(a, b)| a - alpha * b).collect())
}

/// One descent step along forward differences of `cost` with step `h`.
pub fn fd_descent_step(cost: &impl CostEvaluator, x: &[f64], u: &[f64], alpha: f64, h: f64) -> Result<Vec<f64>> {
    let base = cost.cost(x, u)?;
    let mut shifted = u.to_vec();
    let mut out = u.to_vec();
    for j in 0..u.len() {
        shifted[j] = u[j] + h;
        let d = (cost.cost(x, &shifted)? - base) / h;
        shifted[j] = u[j];
        out[j] = u[j] - alpha * d;
    }
    Ok(out)
}

/// `J^NN(x, U) = g^NN((f^NN(x, .))^N (U))`
#[derive(Debug, Clone, PartialEq)]
pub struct SurrogateCost {
    pub f: SurrogateNet,
    pub g: SurrogateNet,
    pub n: usize,
    pub q: usize,
    pub horizon: usize,
    /// States of the surrogate rollout must stay in `[-radius, radius]^n`.
    pub radius: f64,
}

impl SurrogateCost {
    pub fn fit(inst: &OcpInstance, width: usize, seed: u64) -> Result<Self> {
        if !matches!(inst.stage_cost, StageCost::Zero) {
            return Err(Error::InvalidInstance("surrogate cost needs a terminal-cost-only instance".into()));
        }
        let f = assemble_surrogate(&inst.dynamics_graph()?, width, seed)?;
        let g = assemble_surrogate(&inst.terminal_cost, width, seed ^ 0x6767_6767)?;
        Ok(SurrogateCost {
            f,
            g,
            n: inst.n,
            q: inst.q,
            horizon: inst.horizon,
            radius: inst.domain.radius,
        })
    }

    /// `(N |V_G^f| + |V_G^g|) n_w`
    pub fn size(&self) -> usize {
        self.horizon * self.f.total_size + self.g.total_size
    }

    /// Sup of `|J - J^NN|` over the given pairs.
    pub fn sup_error(&self, inst: &OcpInstance, pairs: &[(Vec<f64>, Vec<f64>)]) -> Result<f64> {
        let mut worst = 0.0f64;
        for (x, u) in pairs {
            worst = worst.max((inst.cost(x, u)? - self.cost(x, u)?).abs());
        }
        Ok(worst)
    }
}

impl CostEvaluator for SurrogateCost {
    fn cost(&self, x: &[f64], u: &[f64]) -> Result<f64> {
        let mut s = x.to_vec();
        let mut z = Vec::with_capacity(self.n + self.q);
        for k in 0..self.horizon {
            z.clear();
            z.extend_from_slice(&s);
            z.extend_from_slice(&u[k * self.q..(k + 1) * self.q]);
            s = self.f.eval(&z)?;
            for v in &s {
                if !(v.abs() <= self.radius) {
                    return Err(Error::domain(format!("surrogate state at stage {}", k + 1), *v, self.radius));
                }
            }
        }
        Ok(self.g.eval(&s)?[0])
    }
}

/// `x -> (Psi^NN_{h, delta})^k (x, U0)`
#[derive(Debug, Clone, PartialEq)]
pub struct UnrolledController {
    pub surrogate: SurrogateCost,
    pub steps: usize,
    pub fd_step: f64,
    pub alpha: f64,
    pub u0: Vec<f64>,
    pub gamma: f64,
    pub width: usize,
    /// Sup of `|J - J^NN|` measured on the validation pairs.
    pub measured_delta: f64,
    pub refits: usize,
    /// `2 k m size(J^NN)`
    pub total_size: usize,
    /// True when no node needed a network.
    pub exact_surrogate: bool,
}

impl UnrolledController {
    pub fn eval(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.eval_steps(x, self.steps)
    }

    /// Runs `k` descent steps instead of the planned count.
    pub fn eval_steps(&self, x: &[f64], k: usize) -> Result<Vec<f64>> {
        let mut u = self.u0.clone();
        let limit = 3.0 * self.gamma;
        for _ in 0..k {
            u = fd_descent_step(&self.surrogate, x, &u, self.alpha, self.fd_step)?;
            let distance = sampling::dist(&u, &self.u0);
            if distance > limit {
                return Err(Error::IterateEscaped { distance, limit });
            }
        }
        Ok(u)
    }
}

/// Validation pairs over `Omega x B_2gamma(U0)`.
pub fn validation_pairs(inst: &OcpInstance, n_samples: usize) -> Vec<(Vec<f64>, Vec<f64>)> {
    let xs = inst.domain.omega.samples(n_samples, 0x000d_e17a);
    let us = sampling::ball_samples(&inst.domain.u0, 2.0 * inst.domain.gamma, n_samples, 0xde_17a1);
    xs.iter().flat_map(|x| us.iter().map(move |u| (x.clone(), u.clone()))).collect()
}

fn assemble(
    inst: &OcpInstance,
    plan: &SynthesisPlan,
    surrogate: SurrogateCost,
    width: usize,
    measured_delta: f64,
    refits: usize,
) -> UnrolledController {
    let exact = surrogate.size() == 0;
    UnrolledController {
        total_size: 2 * plan.k_bar * plan.m * surrogate.size(),
        surrogate,
        steps: plan.k_bar,
        fd_step: plan.h_bar,
        alpha: plan.alpha,
        u0: inst.domain.u0.clone(),
        gamma: inst.domain.gamma,
        width: if exact { plan.surrogate_width } else { width },
        measured_delta,
        refits,
        exact_surrogate: exact,
    }
}

/// Fits `J^NN` at the planned width, doubling it up to three times until the
/// measured surrogate error is at most `delta_bar`.
pub fn build_controller(inst: &OcpInstance, plan: &SynthesisPlan, seed: u64) -> Result<UnrolledController> {
    let pairs = validation_pairs(inst, 16);
    let mut width = plan.surrogate_width.max(1);
    let mut refits = 0;
    loop {
        let surrogate = SurrogateCost::fit(inst, width, seed)?;
        let measured = surrogate.sup_error(inst, &pairs)?;
        if measured <= plan.delta_bar {
            return Ok(assemble(inst, plan, surrogate, width, measured, refits));
        }
        if refits == 3 {
            return Err(Error::SurrogateTooCoarse {
                measured,
                target: plan.delta_bar,
            });
        }
        refits += 1;
        width *= 2;
    }
}

/// Fits `J^NN` at exactly the plan's width and records the measured error
/// without gating on it. Used by width sweeps.
pub fn build_controller_fixed(inst: &OcpInstance, plan: &SynthesisPlan, seed: u64) -> Result<UnrolledController> {
    let width = plan.surrogate_width.max(1);
    let surrogate = SurrogateCost::fit(inst, width, seed)?;
    let measured = surrogate.sup_error(inst, &validation_pairs(inst, 16))?;
    Ok(assemble(inst, plan, surrogate, width, measured, 0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateError {
    pub x: Vec<f64>,
    pub cost_controller: f64,
    pub cost_optimal: f64,
    pub weak_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeakErrorReport {
    pub epsilon: f64,
    pub states: Vec<StateError>,
    pub weak_err_max: f64,
    pub weak_err_mean: f64,
    pub measured_delta: f64,
    /// Weak bound at the plan's `(k, h)` with the measured `delta`.
    pub bound_predicted: f64,
    pub bound_holds: bool,
    pub width: usize,
    pub total_size: usize,
    /// `2 k m (N |V_G^f| + |V_G^g|) n_w` recomputed from the plan.
    pub total_size_formula: usize,
    pub size_bound: f64,
    pub size_bound_holds: bool,
    pub exact_surrogate: bool,
}

pub fn evaluate_controller(
    ctrl: &UnrolledController,
    inst: &OcpInstance,
    plan: &SynthesisPlan,
    test_states: &[Vec<f64>],
    oracle: &OracleSolver,
) -> Result<WeakErrorReport> {
    let mut states = Vec::with_capacity(test_states.len());
    for x in test_states {
        let u = ctrl.eval(x)?;
        let u_star = oracle.solve(inst, x)?;
        let cost_controller = inst.cost(x, &u)?;
        let cost_optimal = inst.cost(x, &u_star)?;
        states.push(StateError {
            x: x.clone(),
            cost_controller,
            cost_optimal,
            weak_error: cost_controller - cost_optimal,
        });
    }
    let weak_err_max = states.iter().map(|s| s.weak_error).fold(f64::NEG_INFINITY, f64::max);
    let weak_err_mean = states.iter().map(|s| s.weak_error).sum::<f64>() / states.len().max(1) as f64;
    let bound_predicted = weak_bound(
        plan.l1_eff,
        plan.l2_eff,
        plan.gamma,
        plan.m,
        ctrl.steps,
        ctrl.fd_step,
        ctrl.measured_delta,
    );
    let total_size_formula = 2 * plan.k_bar * plan.m * plan.general_nodes * ctrl.width;
    Ok(WeakErrorReport {
        epsilon: plan.epsilon,
        states,
        weak_err_max,
        weak_err_mean,
        measured_delta: ctrl.measured_delta,
        bound_predicted,
        bound_holds: weak_err_max <= bound_predicted,
        width: ctrl.width,
        total_size: ctrl.total_size,
        total_size_formula,
        size_bound: plan.size_bound,
        size_bound_holds: ctrl.total_size as f64 <= plan.size_bound,
        exact_surrogate: ctrl.exact_surrogate,
    })
}
