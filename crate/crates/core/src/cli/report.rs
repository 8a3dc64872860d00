use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::Result;
use crate::features::{FeatureTuple, NodeFeatures};
use crate::ocp::{CalibrationReport, ConvexityCertificate};
use crate::shallow_nn::FitRateRow;
use crate::synth::{ConstantLedger, SurrogateConstants, SynthesisPlan, WeakErrorReport};

use super::config::Config;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceSummary {
    pub path: Option<String>,
    pub n: usize,
    pub q: usize,
    pub horizon: usize,
    pub m: usize,
    pub linear: bool,
    pub terminal_only: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSection {
    pub f: FeatureTuple,
    pub g: FeatureTuple,
    pub f_nodes: Vec<NodeFeatures>,
    pub g_nodes: Vec<NodeFeatures>,
    pub lip_f: f64,
    pub lip_g: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControllerSummary {
    pub width: usize,
    pub refits: usize,
    pub measured_delta: f64,
    pub total_size: usize,
    pub exact_surrogate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub epsilon: f64,
    /// Forced surrogate width, if this point belongs to a width sweep.
    pub forced_width: Option<usize>,
    pub plan: Option<SynthesisPlan>,
    pub controller: Option<ControllerSummary>,
    pub evaluation: Option<WeakErrorReport>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub tool: String,
    pub version: String,
    /// Seconds since the Unix epoch; excluded from the content hash.
    pub timestamp: u64,
    pub seed: u64,
    pub config: Config,
    pub instance: InstanceSummary,
    pub certificate: Option<ConvexityCertificate>,
    pub extended: bool,
    pub calibration: Option<CalibrationReport>,
    pub features: Option<FeatureSection>,
    pub ledger: Option<ConstantLedger>,
    pub surrogate_constants: Option<SurrogateConstants>,
    pub points: Vec<SweepPoint>,
    pub fitrate: Vec<FitRateRow>,
    pub content_hash: String,
}

impl Report {
    /// SHA-256 over the canonical JSON of every field except `timestamp`
    /// and `content_hash`.
    pub fn compute_hash(&self) -> String {
        let mut v = serde_json::to_value(self).expect("report serializes");
        if let Some(obj) = v.as_object_mut() {
            obj.remove("timestamp");
            obj.remove("content_hash");
        }
        let bytes = serde_json::to_vec(&v).expect("report serializes");
        hex::encode(Sha256::digest(bytes))
    }

    pub fn seal(&mut self) {
        self.content_hash = self.compute_hash();
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("report.json"), serde_json::to_string_pretty(self)?)?;
        self.write_weak_errors(&dir.join("weak_error.csv"))?;
        let mut w = csv::Writer::from_path(dir.join("fitrate.csv"))?;
        for row in &self.fitrate {
            w.serialize(row)?;
        }
        w.flush()?;
        if let Some(f) = &self.features {
            let mut w = csv::Writer::from_path(dir.join("features.csv"))?;
            w.write_record(["graph", "r_max", "lambda", "l_max", "v_g", "lipschitz"])?;
            for (name, t, l) in [("f", f.f, f.lip_f), ("g", f.g, f.lip_g)] {
                w.write_record([
                    name.to_string(),
                    t.r_max.to_string(),
                    t.lambda.to_string(),
                    t.l_max.to_string(),
                    t.v_g.to_string(),
                    l.to_string(),
                ])?;
            }
            w.flush()?;
        }
        if self.ledger.is_some() || self.surrogate_constants.is_some() {
            let mut w = csv::Writer::from_path(dir.join("ledger.csv"))?;
            w.write_record(["quantity", "value"])?;
            for (k, v) in self.ledger_rows() {
                w.write_record([k.to_string(), v.to_string()])?;
            }
            w.flush()?;
        }
        Ok(())
    }

    fn ledger_rows(&self) -> Vec<(&'static str, f64)> {
        let mut rows = Vec::new();
        if let Some(l) = &self.ledger {
            rows.extend([("L1", l.l1), ("L2", l.l2), ("alpha", l.alpha), ("gamma", l.gamma), ("m", l.m as f64)]);
        }
        if let Some(c) = &self.surrogate_constants {
            rows.extend([
                ("lip_f", c.lip_f),
                ("lip_g", c.lip_g),
                ("C_f", c.c_f),
                ("C_g", c.c_g),
                ("geom", c.geom),
                ("C_tilde1", c.c_tilde1),
                ("C_frak", c.c_frak),
                ("r", c.r),
            ]);
        }
        rows
    }

    pub fn write_weak_errors(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record([
            "epsilon",
            "k_bar",
            "h_bar",
            "delta_bar",
            "n_w",
            "size_total",
            "weak_err_max",
            "weak_err_mean",
            "bound_predicted",
        ])?;
        for p in &self.points {
            let Some(plan) = &p.plan else { continue };
            let opt = |v: Option<f64>| v.map(|v| v.to_string()).unwrap_or_default();
            let n_w = p.controller.as_ref().map_or(plan.surrogate_width, |c| c.width);
            let size = p.controller.as_ref().map_or(plan.total_size, |c| c.total_size);
            let e = p.evaluation.as_ref();
            w.write_record([
                p.epsilon.to_string(),
                plan.k_bar.to_string(),
                plan.h_bar.to_string(),
                plan.delta_bar.to_string(),
                n_w.to_string(),
                size.to_string(),
                opt(e.map(|e| e.weak_err_max)),
                opt(e.map(|e| e.weak_err_mean)),
                opt(e.map(|e| e.bound_predicted)),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}
