//! Extended-state reformulation and domain calibration.

use serde::{Deserialize, Serialize};

use super::{Domain, Dynamics, OcpInstance, StageCost};
use crate::compgraph::library::weighted_sum;
use crate::compgraph::{validate_graph, CompGraph, GraphBuilder};
use crate::error::{Error, Result};
use crate::oracle::OracleSolver;
use crate::sampling;

const RANGE_SAMPLES: usize = 256;

fn sampled_sup(g: &CompGraph, radius: f64) -> f64 {
    let g = g.with_input_radius(radius);
    g.input_samples(RANGE_SAMPLES)
        .iter()
        .map(|x| g.eval_unchecked(x)[0].abs())
        .fold(0.0, f64::max)
}

/// Terminal-cost-only instance on the state `(x, y)`:
/// `f(x, y, u) = (f(x, u), y + l1(x) + l2(u))` and `g(x, y) = g(x) + y`.
///
/// Initial states are lifted to `(x, 0)`; the original instance is kept as
/// the origin.
pub fn extend_system(inst: &OcpInstance) -> Result<OcpInstance> {
    let StageCost::Separated { l1, l2 } = &inst.stage_cost else {
        return Err(Error::InvalidInstance("extend_system needs separated stage costs".into()));
    };
    let (n, q) = (inst.n, inst.q);
    let r = inst.domain.radius;
    let f = inst.dynamics_graph()?;

    let mut gb = GraphBuilder::new();
    let xs = gb.inputs(n);
    let y = gb.input();
    let us = gb.inputs(q);
    let xu: Vec<usize> = xs.iter().chain(&us).copied().collect();
    gb.embed(&f, &xu);
    let a = gb.embed(l1, &xs)[0];
    let b = gb.embed(l2, &us)[0];
    let acc_radius = 1.1 * r.max(sampled_sup(l1, r)).max(sampled_sup(l2, r));
    gb.node(weighted_sum(vec![1.0; 3], acc_radius), &[y, a, b]);
    let dynamics = gb.build(r)?;

    let mut gb = GraphBuilder::new();
    let xs = gb.inputs(n);
    let y = gb.input();
    let g = gb.embed(&inst.terminal_cost, &xs)[0];
    let sum_radius = 1.1 * r.max(sampled_sup(&inst.terminal_cost, r));
    gb.node(weighted_sum(vec![1.0; 2], sum_radius), &[g, y]);
    let terminal = gb.build(r)?;

    let domain = Domain {
        omega: inst.domain.omega.lifted(),
        ..inst.domain.clone()
    };
    let mut ext = OcpInstance::new(inst.horizon, Dynamics::Graph(dynamics), StageCost::Zero, terminal, domain)?;
    ext.origin = Some(Box::new(inst.clone()));
    Ok(ext)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport {
    pub u0: Vec<f64>,
    pub gamma: f64,
    pub radius: f64,
    /// Largest distance of a sampled oracle solution from `U0`.
    pub max_distance: f64,
    /// Largest absolute state or control coordinate over the sample plan.
    pub max_coordinate: f64,
    pub initial_states: usize,
    pub control_samples: usize,
}

pub const GAMMA_FLOOR: f64 = 1e-3;
const DIVERGENCE: f64 = 1e8;

/// Calibrates with 32 Sobol initial states (plus box vertices).
pub fn calibrate_domain(inst: &OcpInstance, oracle: &OracleSolver, margin: f64) -> Result<OcpInstance> {
    calibrate_domain_with(inst, oracle, margin, 32).map(|(i, _)| i)
}

/// Sets `U0` to the mean oracle solution, `gamma` to `margin` times the
/// largest spread (at least [`GAMMA_FLOOR`]), and `R` to the smallest power
/// of two, at least 2, exceeding twice every state and control coordinate
/// seen over `Omega x B_2gamma(U0)`. Node domains of every cost and dynamics
/// graph are widened to match.
pub fn calibrate_domain_with(
    inst: &OcpInstance,
    oracle: &OracleSolver,
    margin: f64,
    n_omega: usize,
) -> Result<(OcpInstance, CalibrationReport)> {
    if !(margin >= 1.0) {
        return Err(Error::Config(format!("calibration margin must be >= 1, got {margin}")));
    }
    let xs = inst.domain.omega.samples(n_omega, 0x00ca_1b00);
    let sols: Vec<Vec<f64>> = xs.iter().map(|x| oracle.solve(inst, x)).collect::<Result<_>>()?;
    let m = inst.m();
    let mut u0 = vec![0.0; m];
    for s in &sols {
        for (a, b) in u0.iter_mut().zip(s) {
            *a += b / sols.len() as f64;
        }
    }
    let max_distance = sols.iter().map(|s| sampling::dist(s, &u0)).fold(0.0, f64::max);
    let gamma = (margin * max_distance).max(GAMMA_FLOOR);

    let us = sampling::ball_samples(&u0, 2.0 * gamma, 64, 0xca_1b01);
    let mut coord = inst.domain.omega.extent();
    for u in &us {
        coord = coord.max(u.iter().fold(0.0, |a, v| a.max(v.abs())));
    }
    for x in &xs {
        for u in &us {
            for s in inst.states_unchecked(x, u) {
                let norm = sampling::norm(&s);
                if !(norm <= DIVERGENCE) {
                    return Err(Error::CalibrationFailure(format!(
                        "rollout diverged (state norm {norm:.3e})"
                    )));
                }
                coord = coord.max(s.iter().fold(0.0, |a, v| a.max(v.abs())));
            }
        }
    }
    let mut radius = 2.0f64;
    while radius <= 2.0 * coord {
        radius *= 2.0;
    }

    let mut out = inst.clone();
    out.domain.u0 = u0.clone();
    out.domain.gamma = gamma;
    out.domain.radius = radius;
    out.terminal_cost = widen(&inst.terminal_cost, radius)?;
    if let StageCost::Separated { l1, l2 } = &inst.stage_cost {
        out.stage_cost = StageCost::Separated {
            l1: widen(l1, radius)?,
            l2: widen(l2, radius)?,
        };
    }
    if let Dynamics::Graph(g) = &inst.dynamics {
        out.dynamics = Dynamics::Graph(widen(g, radius)?);
    }
    if let Some(o) = &inst.origin {
        let mut origin = (**o).clone();
        origin.domain.u0 = u0.clone();
        origin.domain.gamma = gamma;
        origin.domain.radius = radius;
        out.origin = Some(Box::new(origin));
    }

    for x in &xs {
        for u in &us {
            for s in inst.states_unchecked(x, u).iter().skip(1) {
                if s.iter().any(|v| v.abs() > radius / 2.0) {
                    return Err(Error::CalibrationFailure("rollout state outside [-R/2, R/2]^n".into()));
                }
            }
        }
    }
    if u0.iter().any(|v| v.abs() + 3.0 * gamma > radius) {
        return Err(Error::CalibrationFailure("B_3gamma(U0) not inside [-R, R]^qN".into()));
    }
    let report = CalibrationReport {
        u0,
        gamma,
        radius,
        max_distance,
        max_coordinate: coord,
        initial_states: xs.len(),
        control_samples: us.len(),
    };
    Ok((out, report))
}

/// Sets input-fed node radii to `radius`, then widens internal
/// nodes whose sampled input range does not fit until validation passes.
fn widen(g: &CompGraph, radius: f64) -> Result<CompGraph> {
    let mut g = g.with_input_radius(radius);
    let inputs: Vec<usize> = g.input_indices().to_vec();
    for i in 0..g.nodes().len() {
        let fed = g.preds(i).iter().any(|p| inputs.contains(p));
        if let Some(f) = &g.nodes()[i].func {
            if fed && f.radius != radius {
                g = g.with_node_radius(i, radius);
            }
        }
    }
    for _ in 0..64 {
        let report = validate_graph(&g, RANGE_SAMPLES);
        if report.passed {
            return Ok(g);
        }
        let index = |id: usize| g.nodes().iter().position(|n| n.id == id).expect("edge target exists");
        let fixes: Vec<(usize, f64)> = report
            .failures()
            .map(|e| {
                let need = e.min.abs().max(e.max.abs()) / (1.0 - crate::compgraph::CONTAINMENT_MARGIN);
                let mut r = e.target_radius.max(1.0);
                while r <= need {
                    r *= 2.0;
                }
                (index(e.target), r)
            })
            .collect();
        for (i, r) in fixes {
            let current = g.nodes()[i].func.as_ref().map_or(0.0, |f| f.radius);
            if r > current {
                g = g.with_node_radius(i, r);
            }
        }
    }
    Err(Error::CalibrationFailure("node domains did not stabilize".into()))
}
