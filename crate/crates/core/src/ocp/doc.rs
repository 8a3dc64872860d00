//! JSON instance documents.

use serde::{Deserialize, Serialize};

use super::{ControlSet, Domain, Dynamics, OcpInstance, Omega, StageCost};
use crate::compgraph::GraphDoc;
use crate::decimal::{from_decimals, matrix_from_decimals, matrix_to_decimals, to_decimals, Decimal};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceDoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<usize>,
    pub horizon: usize,
    pub dynamics: DynamicsDoc,
    #[serde(default)]
    pub stage_cost: StageCostDoc,
    pub terminal_cost: GraphDoc,
    pub domain: DomainDoc,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub origin: Option<Box<InstanceDoc>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum DynamicsDoc {
    Linear {
        #[serde(rename = "A")]
        a: Vec<Vec<Decimal>>,
        #[serde(rename = "B")]
        b: Vec<Vec<Decimal>>,
    },
    Graph {
        graph: GraphDoc,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum StageCostDoc {
    #[default]
    Zero,
    Separated {
        l1: GraphDoc,
        l2: GraphDoc,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OmegaDoc {
    Box { lo: Vec<Decimal>, hi: Vec<Decimal> },
    Points(Vec<Vec<Decimal>>),
}

fn default_gamma() -> Decimal {
    Decimal(1.0)
}

fn default_radius() -> Decimal {
    Decimal(2.0)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainDoc {
    pub omega: OmegaDoc,
    /// Defaults to the zero sequence.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u0: Option<Vec<Decimal>>,
    #[serde(default = "default_gamma")]
    pub gamma: Decimal,
    #[serde(rename = "R", default = "default_radius")]
    pub radius: Decimal,
    #[serde(default)]
    pub controls: ControlSet,
}

fn matrix(rows: &[Vec<Decimal>], what: &str) -> Result<nalgebra::DMatrix<f64>> {
    let cols = rows.first().map_or(0, Vec::len);
    matrix_from_decimals(rows, cols).ok_or_else(|| Error::InvalidInstance(format!("{what}: ragged matrix")))
}

impl InstanceDoc {
    pub fn from_instance(inst: &OcpInstance) -> Self {
        let d = &inst.domain;
        InstanceDoc {
            n: Some(inst.n),
            q: Some(inst.q),
            horizon: inst.horizon,
            dynamics: match &inst.dynamics {
                Dynamics::Linear { a, b } => DynamicsDoc::Linear {
                    a: matrix_to_decimals(a),
                    b: matrix_to_decimals(b),
                },
                Dynamics::Graph(g) => DynamicsDoc::Graph { graph: g.to_doc() },
            },
            stage_cost: match &inst.stage_cost {
                StageCost::Zero => StageCostDoc::Zero,
                StageCost::Separated { l1, l2 } => StageCostDoc::Separated {
                    l1: l1.to_doc(),
                    l2: l2.to_doc(),
                },
            },
            terminal_cost: inst.terminal_cost.to_doc(),
            domain: DomainDoc {
                omega: match &d.omega {
                    Omega::Box { lo, hi } => OmegaDoc::Box {
                        lo: to_decimals(lo),
                        hi: to_decimals(hi),
                    },
                    Omega::Points(p) => OmegaDoc::Points(p.iter().map(|x| to_decimals(x)).collect()),
                },
                u0: Some(to_decimals(&d.u0)),
                gamma: Decimal(d.gamma),
                radius: Decimal(d.radius),
                controls: d.controls.clone(),
            },
            origin: inst.origin.as_ref().map(|o| Box::new(InstanceDoc::from_instance(o))),
        }
    }

    pub fn into_instance(self) -> Result<OcpInstance> {
        let dynamics = match self.dynamics {
            DynamicsDoc::Linear { a, b } => Dynamics::Linear {
                a: matrix(&a, "A")?,
                b: matrix(&b, "B")?,
            },
            DynamicsDoc::Graph { graph } => Dynamics::Graph(graph.into_graph()?),
        };
        let stage_cost = match self.stage_cost {
            StageCostDoc::Zero => StageCost::Zero,
            StageCostDoc::Separated { l1, l2 } => StageCost::Separated {
                l1: l1.into_graph()?,
                l2: l2.into_graph()?,
            },
        };
        let q = match &dynamics {
            Dynamics::Linear { b, .. } => b.ncols(),
            Dynamics::Graph(g) => g.input_dim().saturating_sub(g.output_dim()),
        };
        let d = self.domain;
        let omega = match d.omega {
            OmegaDoc::Box { lo, hi } => Omega::Box {
                lo: from_decimals(&lo),
                hi: from_decimals(&hi),
            },
            OmegaDoc::Points(p) => Omega::Points(p.iter().map(|x| from_decimals(x)).collect()),
        };
        let domain = Domain {
            omega,
            u0: d.u0.map_or_else(|| vec![0.0; q * self.horizon], |u| from_decimals(&u)),
            gamma: d.gamma.0,
            radius: d.radius.0,
            controls: d.controls,
        };
        let mut inst = OcpInstance::new(self.horizon, dynamics, stage_cost, self.terminal_cost.into_graph()?, domain)?;
        if self.n.is_some_and(|n| n != inst.n) || self.q.is_some_and(|q| q != inst.q) {
            return Err(Error::InvalidInstance(format!(
                "declared dimensions (n, q) = ({:?}, {:?}) disagree with the data ({}, {})",
                self.n, self.q, inst.n, inst.q
            )));
        }
        if let Some(o) = self.origin {
            inst.origin = Some(Box::new(o.into_instance()?));
        }
        Ok(inst)
    }
}

impl OcpInstance {
    pub fn to_doc(&self) -> InstanceDoc {
        InstanceDoc::from_instance(self)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_doc()).expect("instance serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: InstanceDoc = serde_json::from_str(text)?;
        doc.into_instance()
    }
}
