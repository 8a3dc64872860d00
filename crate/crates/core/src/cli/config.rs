use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::oracle::OracleSolver;
use crate::ocp::OcpInstance;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Certify,
    Extend,
    Calibrate,
    Features,
    Plan,
    Build,
    Evaluate,
    Fitrate,
}

impl Stage {
    pub const ALL: [Stage; 8] = [
        Stage::Certify,
        Stage::Extend,
        Stage::Calibrate,
        Stage::Features,
        Stage::Plan,
        Stage::Build,
        Stage::Evaluate,
        Stage::Fitrate,
    ];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum OracleChoice {
    #[default]
    Auto,
    Lq,
    Numeric,
}

impl OracleChoice {
    pub fn solver(self, inst: &OcpInstance) -> OracleSolver {
        match self {
            OracleChoice::Auto => OracleSolver::auto(inst),
            OracleChoice::Lq => OracleSolver::lq(),
            OracleChoice::Numeric => OracleSolver::numeric(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Samples {
    /// Sobol points per factor of the convexity certificate.
    pub certify: usize,
    /// Points per factor of the `L1`, `L2` estimate.
    pub constants: usize,
    /// Multivariate sup-norm points for features.
    pub features: usize,
    /// Initial states used to calibrate `(U0, gamma)`.
    pub calibrate: usize,
    pub test_states: usize,
}

impl Default for Samples {
    fn default() -> Self {
        Samples {
            certify: 64,
            constants: 16,
            features: 4096,
            calibrate: 32,
            test_states: 25,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    /// Instance file, relative to the config file.
    pub instance: Option<PathBuf>,
    pub stages: Vec<Stage>,
    pub seed: u64,
    pub epsilons: Vec<f64>,
    /// Widths for `fitrate`.
    pub widths: Vec<usize>,
    /// Surrogate widths for an `n_w` sweep at the first epsilon; empty means
    /// the planned width.
    pub sweep_widths: Vec<usize>,
    pub margin: f64,
    pub width_ceiling: usize,
    pub oracle: OracleChoice,
    pub samples: Samples,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            instance: None,
            stages: Stage::ALL.to_vec(),
            seed: 7,
            epsilons: vec![0.5, 0.25, 0.1],
            widths: vec![8, 16, 32, 64, 128],
            sweep_widths: Vec::new(),
            margin: 1.25,
            width_ceiling: crate::synth::WIDTH_CEILING,
            oracle: OracleChoice::Auto,
            samples: Samples::default(),
        }
    }
}

impl Config {
    /// Reads a config and resolves its instance path against the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let mut cfg: Config =
            serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        if let (Some(inst), Some(dir)) = (&cfg.instance, path.parent()) {
            if inst.is_relative() {
                cfg.instance = Some(dir.join(inst));
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(e) = self.epsilons.iter().find(|e| !(**e > 0.0 && **e < 1.0)) {
            return Err(Error::Config(format!("field `epsilons`: {e} is outside (0, 1)")));
        }
        if self.widths.contains(&0) || self.sweep_widths.contains(&0) {
            return Err(Error::Config("fields `widths`/`sweep_widths`: widths must be positive".into()));
        }
        if !(self.margin >= 1.0) {
            return Err(Error::Config(format!("field `margin`: {} must be at least 1", self.margin)));
        }
        Ok(())
    }

    pub fn load_instance(&self) -> Result<OcpInstance> {
        let path = self
            .instance
            .as_ref()
            .ok_or_else(|| Error::Config("field `instance`: no instance file given".into()))?;
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        OcpInstance::from_json(&text).map_err(|e| match e {
            Error::Json(j) => Error::Config(format!("{}: {j}", path.display())),
            Error::InvalidInstance(m) | Error::InvalidGraph(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }
}
