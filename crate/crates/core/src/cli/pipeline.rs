use rayon::prelude::*;

use super::config::{Config, Stage};
use super::report::{ControllerSummary, FeatureSection, InstanceSummary, Report, SweepPoint};
use crate::error::{Error, Result};
use crate::features::{compute_features, general_node_features, graph_lipschitz};
use crate::ocp::{calibrate_domain_with, certify_convexity, extend_system, OcpInstance, StageCost, Verdict};
use crate::shallow_nn::node_rate;
use crate::synth::{
    build_controller, build_controller_fixed, estimate_constants, evaluate_controller, plan_synthesis,
    surrogate_constants, ConstantLedger, SurrogateConstants,
};

/// How a pipeline run ended, besides hard errors.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Success,
    CertificationFailed,
    PlanInfeasible,
}

impl Outcome {
    pub fn exit_code(self) -> i32 {
        match self {
            Outcome::Success => 0,
            Outcome::CertificationFailed => 2,
            Outcome::PlanInfeasible => 3,
        }
    }
}

fn summary(inst: &OcpInstance, path: Option<String>) -> InstanceSummary {
    InstanceSummary {
        path,
        n: inst.n,
        q: inst.q,
        horizon: inst.horizon,
        m: inst.m(),
        linear: inst.is_linear(),
        terminal_only: matches!(inst.stage_cost, StageCost::Zero),
    }
}

fn now() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map_or(0, |d| d.as_secs())
}

/// Runs the configured stages on an already loaded instance. Later stages
/// pull in the earlier ones they need (evaluation needs a plan, synthesis
/// needs a terminal-only instance).
pub fn run_pipeline(cfg: &Config, inst: OcpInstance) -> Result<(Report, Outcome)> {
    let has = |s: Stage| cfg.stages.contains(&s);
    let synth = has(Stage::Plan) || has(Stage::Build) || has(Stage::Evaluate);
    let mut report = Report {
        tool: "comp-oc".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        timestamp: now(),
        seed: cfg.seed,
        config: cfg.clone(),
        instance: summary(&inst, cfg.instance.as_ref().map(|p| p.display().to_string())),
        certificate: None,
        extended: false,
        calibration: None,
        features: None,
        ledger: None,
        surrogate_constants: None,
        points: Vec::new(),
        fitrate: Vec::new(),
        content_hash: String::new(),
    };
    let mut outcome = Outcome::Success;
    let mut inst = inst;

    if has(Stage::Certify) {
        let cert = certify_convexity(&inst, cfg.samples.certify);
        let failed = cert.verdict == Verdict::NotCertified;
        report.certificate = Some(cert);
        if failed {
            report.seal();
            return Ok((report, Outcome::CertificationFailed));
        }
    }
    if (has(Stage::Extend) || synth) && !matches!(inst.stage_cost, StageCost::Zero) {
        inst = extend_system(&inst)?;
        report.extended = true;
    }
    if has(Stage::Calibrate) || synth {
        let oracle = cfg.oracle.solver(&inst);
        let (calibrated, cal) = calibrate_domain_with(&inst, &oracle, cfg.margin, cfg.samples.calibrate)?;
        inst = calibrated;
        report.calibration = Some(cal);
    }
    if has(Stage::Features) {
        let f = inst.dynamics_graph()?;
        let g = &inst.terminal_cost;
        let n = cfg.samples.features;
        report.features = Some(FeatureSection {
            f: compute_features(&f, n),
            g: compute_features(g, n),
            f_nodes: general_node_features(&f, n),
            g_nodes: general_node_features(g, n),
            lip_f: graph_lipschitz(&f, n),
            lip_g: graph_lipschitz(g, n),
        });
    }
    if synth {
        let ledger = estimate_constants(&inst, cfg.samples.constants)?;
        let consts = surrogate_constants(&inst, cfg.samples.features)?;
        report.points = sweep(cfg, &inst, &ledger, &consts);
        if report.points.iter().any(|p| p.plan.is_none()) {
            outcome = Outcome::PlanInfeasible;
        }
        report.ledger = Some(ledger);
        report.surrogate_constants = Some(consts);
    }
    if has(Stage::Fitrate) {
        report.fitrate = fitrate(cfg, &inst)?;
    }
    report.instance = summary(&inst, report.instance.path.clone());
    report.seal();
    Ok((report, outcome))
}

fn sweep(cfg: &Config, inst: &OcpInstance, ledger: &ConstantLedger, consts: &SurrogateConstants) -> Vec<SweepPoint> {
    let mut jobs: Vec<(f64, Option<usize>)> = cfg.epsilons.iter().map(|&e| (e, None)).collect();
    if let Some(&eps) = cfg.epsilons.first() {
        if !cfg.sweep_widths.is_empty() {
            jobs = cfg.sweep_widths.iter().map(|&w| (eps, Some(w))).collect();
        }
    }
    jobs.par_iter()
        .map(|&(eps, width)| point(cfg, inst, ledger, consts, eps, width))
        .collect()
}

fn point(
    cfg: &Config,
    inst: &OcpInstance,
    ledger: &ConstantLedger,
    consts: &SurrogateConstants,
    epsilon: f64,
    forced_width: Option<usize>,
) -> SweepPoint {
    let mut out = SweepPoint {
        epsilon,
        forced_width,
        plan: None,
        controller: None,
        evaluation: None,
        error: None,
    };
    let plan = match plan_synthesis(ledger, consts, epsilon, cfg.width_ceiling) {
        Ok(p) => forced_width.map_or(p.clone(), |w| p.with_width(w)),
        Err(e) => {
            out.error = Some(e.to_string());
            return out;
        }
    };
    out.plan = Some(plan.clone());
    let has = |s: Stage| cfg.stages.contains(&s);
    if !(has(Stage::Build) || has(Stage::Evaluate)) {
        return out;
    }
    let built = if forced_width.is_some() {
        build_controller_fixed(inst, &plan, cfg.seed)
    } else {
        build_controller(inst, &plan, cfg.seed)
    };
    let ctrl = match built {
        Ok(c) => c,
        Err(e) => {
            out.error = Some(e.to_string());
            return out;
        }
    };
    out.controller = Some(ControllerSummary {
        width: ctrl.width,
        refits: ctrl.refits,
        measured_delta: ctrl.measured_delta,
        total_size: ctrl.total_size,
        exact_surrogate: ctrl.exact_surrogate,
    });
    if has(Stage::Evaluate) {
        let states: Vec<Vec<f64>> = inst
            .domain
            .omega
            .samples(cfg.samples.test_states, 0x7e57)
            .into_iter()
            .take(cfg.samples.test_states)
            .collect();
        let oracle = cfg.oracle.solver(inst);
        match evaluate_controller(&ctrl, inst, &plan, &states, &oracle) {
            Ok(r) => out.evaluation = Some(r),
            Err(e) => out.error = Some(e.to_string()),
        }
    }
    out
}

fn fitrate(cfg: &Config, inst: &OcpInstance) -> Result<Vec<crate::shallow_nn::FitRateRow>> {
    if cfg.widths.len() < 3 || cfg.widths.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Config("field `widths`: need at least three strictly increasing widths".into()));
    }
    let f = inst.dynamics_graph()?;
    let mut rows = Vec::new();
    for graph in [&f, &inst.terminal_cost] {
        for (id, node) in graph.nodes().iter().enumerate() {
            if let (true, Some(func)) = (node.is_general(), node.func.as_ref()) {
                rows.extend(node_rate(id, func, &cfg.widths, cfg.seed)?);
            }
        }
    }
    Ok(rows)
}
