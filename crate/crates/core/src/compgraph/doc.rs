//! JSON document form of a [`CompGraph`].

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{CompGraph, Node, NodeFunction, NodeKind, Profile};
use crate::decimal::{from_decimals, matrix_from_decimals, matrix_to_decimals, to_decimals, Decimal};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Scalar(Decimal),
    Vector(Vec<Decimal>),
    Matrix(Vec<Vec<Decimal>>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeDoc {
    pub id: usize,
    pub layer: usize,
    pub kind: String,
    #[serde(default)]
    pub params: BTreeMap<String, ParamValue>,
    #[serde(rename = "R", default, skip_serializing_if = "Option::is_none")]
    pub radius: Option<Decimal>,
    #[serde(default = "default_m")]
    pub m: u32,
}

fn default_m() -> u32 {
    2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphDoc {
    pub nodes: Vec<NodeDoc>,
    pub edges: Vec<[usize; 2]>,
    pub input_dim: usize,
    pub output_dim: usize,
    /// Half-width of the input box; defaults to the smallest radius among
    /// nodes fed directly by inputs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input_radius: Option<Decimal>,
}

impl GraphDoc {
    pub fn from_graph(g: &CompGraph) -> Self {
        let nodes = g
            .nodes()
            .iter()
            .map(|n| match &n.func {
                None => NodeDoc {
                    id: n.id,
                    layer: n.layer,
                    kind: "input".into(),
                    params: BTreeMap::new(),
                    radius: None,
                    m: default_m(),
                },
                Some(f) => NodeDoc {
                    id: n.id,
                    layer: n.layer,
                    kind: f.kind.tag().into(),
                    params: encode_params(&f.kind),
                    radius: Some(Decimal(f.radius)),
                    m: f.smoothness,
                },
            })
            .collect();
        GraphDoc {
            nodes,
            edges: g.edges().iter().map(|&(s, t)| [s, t]).collect(),
            input_dim: g.input_dim(),
            output_dim: g.output_dim(),
            input_radius: Some(Decimal(g.input_radius())),
        }
    }

    pub fn into_graph(self) -> Result<CompGraph> {
        let mut nodes = Vec::with_capacity(self.nodes.len());
        for nd in &self.nodes {
            let func = if nd.kind == "input" {
                None
            } else {
                let kind = decode_kind(nd)?;
                let radius = nd
                    .radius
                    .ok_or_else(|| Error::InvalidGraph(format!("node {}: missing field `R`", nd.id)))?;
                Some(NodeFunction {
                    kind,
                    radius: radius.0,
                    smoothness: nd.m,
                })
            };
            nodes.push(Node {
                id: nd.id,
                layer: nd.layer,
                func,
            });
        }
        let input_radius = match self.input_radius {
            Some(r) => r.0,
            None => {
                let inputs: Vec<usize> = nodes.iter().filter(|n| n.is_input()).map(|n| n.id).collect();
                let fed = self
                    .edges
                    .iter()
                    .filter(|[s, _]| inputs.contains(s))
                    .filter_map(|[_, t]| nodes.iter().find(|n| n.id == *t))
                    .filter_map(|n| n.func.as_ref().map(|f| f.radius))
                    .fold(f64::INFINITY, f64::min);
                if fed.is_finite() { fed } else { 1.0 }
            }
        };
        let edges = self.edges.iter().map(|[s, t]| (*s, *t)).collect();
        CompGraph::new(nodes, edges, self.input_dim, self.output_dim, input_radius)
    }
}

fn encode_params(kind: &NodeKind) -> BTreeMap<String, ParamValue> {
    let mut p = BTreeMap::new();
    let scalar = |v: f64| ParamValue::Scalar(Decimal(v));
    match kind {
        NodeKind::Affine { weights, bias } => {
            p.insert("weights".into(), ParamValue::Vector(to_decimals(weights)));
            p.insert("bias".into(), scalar(*bias));
        }
        NodeKind::WeightedSum { weights } => {
            p.insert("weights".into(), ParamValue::Vector(to_decimals(weights)));
        }
        NodeKind::QuadraticForm { q, linear, constant } => {
            p.insert("q".into(), ParamValue::Matrix(matrix_to_decimals(q)));
            p.insert("linear".into(), ParamValue::Vector(to_decimals(linear)));
            p.insert("constant".into(), scalar(*constant));
        }
        NodeKind::SquaredNorm { dim, scale } => {
            p.insert("dim".into(), scalar(*dim as f64));
            p.insert("scale".into(), scalar(*scale));
        }
        NodeKind::Smooth { gain, scale, .. } => {
            p.insert("gain".into(), scalar(*gain));
            p.insert("scale".into(), scalar(*scale));
        }
        NodeKind::Polynomial { coeffs } => {
            p.insert("coeffs".into(), ParamValue::Vector(to_decimals(coeffs)));
        }
    }
    p
}

fn decode_kind(nd: &NodeDoc) -> Result<NodeKind> {
    let err = |msg: String| Error::InvalidGraph(format!("node {} ({}): {msg}", nd.id, nd.kind));
    let scalar = |name: &str, default: Option<f64>| -> Result<f64> {
        match nd.params.get(name) {
            Some(ParamValue::Scalar(d)) => Ok(d.0),
            Some(_) => Err(err(format!("param `{name}` must be a scalar"))),
            None => default.ok_or_else(|| err(format!("missing param `{name}`"))),
        }
    };
    let vector = |name: &str| -> Result<Vec<f64>> {
        match nd.params.get(name) {
            Some(ParamValue::Vector(v)) => Ok(from_decimals(v)),
            Some(ParamValue::Matrix(m)) if m.is_empty() => Ok(Vec::new()),
            Some(_) => Err(err(format!("param `{name}` must be a vector"))),
            None => Err(err(format!("missing param `{name}`"))),
        }
    };
    let profile = |p: Profile| -> Result<NodeKind> {
        Ok(NodeKind::Smooth {
            profile: p,
            gain: scalar("gain", Some(1.0))?,
            scale: scalar("scale", Some(1.0))?,
        })
    };
    match nd.kind.as_str() {
        "affine" => Ok(NodeKind::Affine {
            weights: vector("weights")?,
            bias: scalar("bias", Some(0.0))?,
        }),
        "weighted_sum" => Ok(NodeKind::WeightedSum {
            weights: vector("weights")?,
        }),
        "quadratic_form" => {
            let q = match nd.params.get("q") {
                Some(ParamValue::Matrix(rows)) => matrix_from_decimals(rows, 0)
                    .ok_or_else(|| err("param `q` has ragged rows".into()))?,
                _ => return Err(err("param `q` must be a matrix".into())),
            };
            if q.nrows() != q.ncols() {
                return Err(err("param `q` must be square".into()));
            }
            let linear = match nd.params.get("linear") {
                None => vec![0.0; q.nrows()],
                Some(_) => vector("linear")?,
            };
            if linear.len() != q.nrows() {
                return Err(err("param `linear` must match `q`".into()));
            }
            Ok(NodeKind::QuadraticForm {
                q,
                linear,
                constant: scalar("constant", Some(0.0))?,
            })
        }
        "squared_norm" => {
            let dim = scalar("dim", None)?;
            if dim < 1.0 || dim.fract() != 0.0 {
                return Err(err(format!("param `dim` must be a positive integer, got {dim}")));
            }
            Ok(NodeKind::SquaredNorm {
                dim: dim as usize,
                scale: scalar("scale", Some(1.0))?,
            })
        }
        "tanh" => profile(Profile::Tanh),
        "softplus" => profile(Profile::Softplus),
        "exp_neg_sq" => profile(Profile::ExpNegSq),
        "polynomial" => Ok(NodeKind::Polynomial {
            coeffs: vector("coeffs")?,
        }),
        other => Err(err(format!("unknown node kind `{other}`"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::compgraph::library::*;
    use crate::compgraph::GraphBuilder;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn documents_round_trip_bit_exactly(w in prop::collection::vec(-1e3f64..1e3, 3), c in -10.0f64..10.0, r in 0.1f64..10.0) {
            let mut gb = GraphBuilder::new();
            let ins = gb.inputs(3);
            let s = gb.node(affine(w.clone(), c, r), &ins);
            let t = gb.node(smooth(Profile::Tanh, c, w[0], r * 1e3), &[s]);
            gb.node(polynomial(vec![c, w[1], w[2]], 2.0), &[t]);
            let g = gb.build(r).unwrap();
            let back = CompGraph::from_json(&g.to_json()).unwrap();
            prop_assert_eq!(back, g);
        }
    }

    #[test]
    fn reads_hand_written_document() {
        let text = r#"{
            "nodes": [
                {"id": 0, "layer": 0, "kind": "input"},
                {"id": 1, "layer": 0, "kind": "input"},
                {"id": 2, "layer": 1, "kind": "squared_norm", "params": {"dim": "2"}, "R": "5"}
            ],
            "edges": [[0, 2], [1, 2]],
            "input_dim": 2,
            "output_dim": 1
        }"#;
        let g = CompGraph::from_json(text).unwrap();
        assert_eq!(g.input_radius(), 5.0);
        assert_eq!(g.eval(&[3.0, 4.0]).unwrap(), vec![25.0]);
    }

    #[test]
    fn unknown_kind_is_rejected() {
        let text = r#"{"nodes":[{"id":0,"layer":0,"kind":"input"},{"id":1,"layer":1,"kind":"relu","R":"1"}],
                       "edges":[[0,1]],"input_dim":1,"output_dim":1}"#;
        let err = CompGraph::from_json(text).unwrap_err();
        assert!(err.to_string().contains("relu"));
    }
}
