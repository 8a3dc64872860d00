//! The `comp-oc` experiment runner.
//!
//! Exit codes: 0 success, 1 configuration or input error, 2 convexity
//! certification failed, 3 plan infeasible, 4 any other runtime failure.

pub mod config;
pub mod pipeline;
pub mod report;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use config::{Config, OracleChoice, Samples, Stage};
pub use pipeline::{run_pipeline, Outcome};
pub use report::{ControllerSummary, FeatureSection, InstanceSummary, Report, SweepPoint};

use crate::error::{Error, Result};

#[derive(Debug, Parser)]
#[command(name = "comp-oc", version, about = "Neural weak controllers for compositional optimal control problems")]
pub struct Cli {
    /// JSON config; the instance path inside it is relative to the file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true, env = "COMP_OC_SEED")]
    pub seed: Option<u64>,
    /// Worker threads for sweeps and fitting (default: all cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Output directory for report.json and CSV tables.
    #[arg(long, global = true, default_value = "comp-oc-out")]
    pub out: PathBuf,
    /// Print the effective config as JSON and exit.
    #[arg(long, global = true)]
    pub print_config: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Clone, Default)]
pub struct InstanceArg {
    /// Instance file (overrides the config's `instance`).
    pub instance: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the stages listed in the config.
    Run(InstanceArg),
    /// Certify convexity of the cost in the controls.
    Certify(InstanceArg),
    /// Write the terminal-cost-only reformulation.
    Extend(InstanceArg),
    /// Calibrate `U0`, `gamma`, and radii from oracle solutions.
    Calibrate(InstanceArg),
    /// Print compositional features of the dynamics and terminal cost.
    Features(InstanceArg),
    /// Per-node error against width.
    Fitrate {
        #[command(flatten)]
        inst: InstanceArg,
        /// Network widths, comma separated.
        #[arg(long, value_delimiter = ',')]
        widths: Option<Vec<usize>>,
    },
    /// Plan and build the controller.
    Synth {
        #[command(flatten)]
        inst: InstanceArg,
        /// Target accuracies, comma separated.
        #[arg(long, value_delimiter = ',')]
        epsilon: Option<Vec<f64>>,
    },
    /// Plan, build, and evaluate against the oracle.
    Eval {
        #[command(flatten)]
        inst: InstanceArg,
        /// Target accuracies, comma separated.
        #[arg(long, value_delimiter = ',')]
        epsilon: Option<Vec<f64>>,
    },
    /// Evaluate over a list of epsilons, or of widths at the first epsilon.
    Sweep {
        #[command(flatten)]
        inst: InstanceArg,
        /// Target accuracies, comma separated.
        #[arg(long, value_delimiter = ',')]
        epsilon: Option<Vec<f64>>,
        /// Surrogate widths to force; sweeps width instead of epsilon.
        #[arg(long, value_delimiter = ',')]
        widths: Option<Vec<usize>>,
    },
}

fn effective_config(cli: &Cli) -> Result<Config> {
    let mut cfg = match &cli.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    let (inst, stages, eps, widths, sweep_widths): (&InstanceArg, Option<Vec<Stage>>, _, _, _) = match &cli.command {
        Command::Run(i) => (i, None, None, None, None),
        Command::Certify(i) => (i, Some(vec![Stage::Certify]), None, None, None),
        Command::Extend(i) => (i, Some(vec![Stage::Extend]), None, None, None),
        Command::Calibrate(i) => (i, Some(vec![Stage::Calibrate]), None, None, None),
        Command::Features(i) => (i, Some(vec![Stage::Features]), None, None, None),
        Command::Fitrate { inst, widths } => (inst, Some(vec![Stage::Fitrate]), None, widths.clone(), None),
        Command::Synth { inst, epsilon } => (inst, Some(vec![Stage::Plan, Stage::Build]), epsilon.clone(), None, None),
        Command::Eval { inst, epsilon } => (inst, Some(vec![Stage::Plan, Stage::Build, Stage::Evaluate]), epsilon.clone(), None, None),
        Command::Sweep { inst, epsilon, widths } => (
            inst,
            Some(vec![Stage::Plan, Stage::Build, Stage::Evaluate]),
            epsilon.clone(),
            None,
            widths.clone(),
        ),
    };
    if let Some(p) = &inst.instance {
        cfg.instance = Some(p.clone());
    }
    if let Some(s) = stages {
        cfg.stages = s;
    }
    if let Some(e) = eps {
        cfg.epsilons = e;
    }
    if let Some(w) = widths {
        cfg.widths = w;
    }
    if let Some(w) = sweep_widths {
        cfg.sweep_widths = w;
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::Json(_) | Error::InvalidInstance(_) | Error::InvalidGraph(_) => 1,
        Error::PlanInfeasible(_) => 3,
        _ => 4,
    }
}

fn print_summary(cli: &Cli, report: &Report) {
    if let Some(c) = &report.certificate {
        println!("certificate: {:?} (min eigenvalue {:.3e}, {} samples)", c.verdict, c.min_eig, c.samples);
    }
    if report.extended {
        println!("extended to a terminal-cost-only instance (n = {})", report.instance.n);
    }
    if let Some(c) = &report.calibration {
        println!("calibrated: gamma = {}, R = {}", c.gamma, c.radius);
    }
    if let Some(f) = &report.features {
        let t = |t: crate::features::FeatureTuple| format!("({}, {}, {}, {})", t.r_max, t.lambda, t.l_max, t.v_g);
        println!("features f: {}", t(f.f));
        println!("features g: {}", t(f.g));
    }
    for r in &report.fitrate {
        println!("fitrate node {} {} width {}: sup error {:.3e}, bound {:.3e}", r.node, r.kind, r.width, r.sup_error, r.bound);
    }
    for p in &report.points {
        match (&p.plan, &p.evaluation, &p.error) {
            (_, _, Some(e)) => println!("eps {}: {e}", p.epsilon),
            (Some(plan), Some(ev), None) => println!(
                "eps {}: k = {}, n_w = {}, size = {}, weak error max {:.3e} (bound {:.3e})",
                p.epsilon, plan.k_bar, ev.width, ev.total_size, ev.weak_err_max, ev.bound_predicted
            ),
            (Some(plan), None, None) => println!(
                "eps {}: k = {}, h = {:.3e}, delta = {:.3e}, n_w = {}, size = {}",
                p.epsilon, plan.k_bar, plan.h_bar, plan.delta_bar, plan.surrogate_width, plan.total_size
            ),
            _ => {}
        }
    }
    println!("report: {} (hash {})", cli.out.join("report.json").display(), report.content_hash);
}

fn execute(cli: &Cli) -> Result<i32> {
    let cfg = effective_config(cli)?;
    if cli.print_config {
        println!("{}", serde_json::to_string_pretty(&cfg)?);
        return Ok(0);
    }
    let inst = cfg.load_instance()?;
    let (report, outcome) = run_pipeline(&cfg, inst.clone())?;
    report.write(&cli.out)?;
    if matches!(cli.command, Command::Extend(_)) {
        let ext = crate::ocp::extend_system(&inst)?;
        std::fs::write(cli.out.join("extended.json"), ext.to_json())?;
    }
    if matches!(cli.command, Command::Calibrate(_)) {
        let oracle = cfg.oracle.solver(&inst);
        let (cal, _) = crate::ocp::calibrate_domain_with(&inst, &oracle, cfg.margin, cfg.samples.calibrate)?;
        std::fs::write(cli.out.join("calibrated.json"), cal.to_json())?;
    }
    print_summary(cli, &report);
    if outcome == Outcome::CertificationFailed {
        eprintln!("error: convexity certification failed");
    }
    if outcome == Outcome::PlanInfeasible {
        eprintln!("error: at least one plan is infeasible");
    }
    Ok(outcome.exit_code())
}

/// Parses `std::env::args`, runs, and returns the process exit code.
pub fn main() -> i32 {
    let cli = Cli::parse();
    if let Some(j) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(j.max(1)).build_global() {
            eprintln!("warning: {e}");
        }
    }
    match execute(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
