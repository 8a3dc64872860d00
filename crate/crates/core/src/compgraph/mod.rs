//! Compositional functions as layered DAGs of low-dimensional catalog nodes.

mod doc;
mod node;

pub use doc::{GraphDoc, NodeDoc, ParamValue};
pub use node::{NodeFunction, NodeKind, Profile};

use std::collections::HashMap;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sampling;

/// Slack allowed when checking that a value lies in a node's domain box.
pub const DOMAIN_TOL: f64 = 1e-9;
/// Sampled ranges must stay inside `(1 - margin) * R` of the target node.
pub const CONTAINMENT_MARGIN: f64 = 0.01;
const VALIDATION_SEED: u32 = 0x00c0_ffee;

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub id: usize,
    pub layer: usize,
    /// `None` marks an input node.
    pub func: Option<NodeFunction>,
}

impl Node {
    pub fn is_input(&self) -> bool {
        self.func.is_none()
    }

    pub fn is_general(&self) -> bool {
        self.func.as_ref().is_some_and(|f| !f.is_linear())
    }
}

/// A compositional function: nodes, ordered edges, and the declared input box
/// `[-input_radius, input_radius]^input_dim`.
///
/// The order of edges entering a node fixes the argument order of its
/// function. Inputs are the input nodes in node-list order; outputs are the
/// non-input nodes without outgoing edges, also in node-list order.
#[derive(Debug, Clone, PartialEq)]
pub struct CompGraph {
    nodes: Vec<Node>,
    edges: Vec<(usize, usize)>,
    input_dim: usize,
    output_dim: usize,
    input_radius: f64,
    preds: Vec<Vec<usize>>,
    order: Vec<usize>,
    inputs: Vec<usize>,
    outputs: Vec<usize>,
}

impl CompGraph {
    pub fn new(
        nodes: Vec<Node>,
        edges: Vec<(usize, usize)>,
        input_dim: usize,
        output_dim: usize,
        input_radius: f64,
    ) -> Result<Self> {
        let invalid = |msg: String| Err(Error::InvalidGraph(msg));
        let mut index = HashMap::with_capacity(nodes.len());
        for (i, n) in nodes.iter().enumerate() {
            if index.insert(n.id, i).is_some() {
                return invalid(format!("duplicate node id {}", n.id));
            }
        }
        if !(input_radius > 0.0) {
            return invalid(format!("input radius must be positive, got {input_radius}"));
        }
        let mut preds = vec![Vec::new(); nodes.len()];
        let mut out_degree = vec![0usize; nodes.len()];
        for &(s, t) in &edges {
            let (Some(&si), Some(&ti)) = (index.get(&s), index.get(&t)) else {
                return invalid(format!("edge ({s}, {t}) references an unknown node"));
            };
            if nodes[si].layer >= nodes[ti].layer {
                return invalid(format!(
                    "edge ({s}, {t}) does not increase the layer ({} -> {})",
                    nodes[si].layer, nodes[ti].layer
                ));
            }
            preds[ti].push(si);
            out_degree[si] += 1;
        }
        for (i, n) in nodes.iter().enumerate() {
            match &n.func {
                None => {
                    if n.layer != 0 || !preds[i].is_empty() {
                        return invalid(format!("input node {} must sit in layer 0 without inward edges", n.id));
                    }
                }
                Some(f) => {
                    if n.layer == 0 {
                        return invalid(format!("function node {} cannot sit in layer 0", n.id));
                    }
                    if preds[i].len() != f.in_dim() {
                        return invalid(format!(
                            "node {} has fan-in {} but its {} function takes {} inputs",
                            n.id,
                            preds[i].len(),
                            f.kind.tag(),
                            f.in_dim()
                        ));
                    }
                    if !(f.radius > 0.0) {
                        return invalid(format!("node {} needs a positive domain radius", n.id));
                    }
                    if f.smoothness == 0 {
                        return invalid(format!("node {} needs smoothness order >= 1", n.id));
                    }
                }
            }
        }
        let inputs: Vec<usize> = (0..nodes.len()).filter(|&i| nodes[i].is_input()).collect();
        let outputs: Vec<usize> = (0..nodes.len())
            .filter(|&i| !nodes[i].is_input() && out_degree[i] == 0)
            .collect();
        if inputs.len() != input_dim {
            return invalid(format!("declared input_dim {input_dim} but found {} input nodes", inputs.len()));
        }
        if outputs.len() != output_dim || output_dim == 0 {
            return invalid(format!("declared output_dim {output_dim} but found {} output nodes", outputs.len()));
        }
        let mut order: Vec<usize> = (0..nodes.len()).collect();
        order.sort_by_key(|&i| nodes[i].layer);
        Ok(Self {
            nodes,
            edges,
            input_dim,
            output_dim,
            input_radius,
            preds,
            order,
            inputs,
            outputs,
        })
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.output_dim
    }

    pub fn input_radius(&self) -> f64 {
        self.input_radius
    }

    pub fn max_layer(&self) -> usize {
        self.nodes.iter().map(|n| n.layer).max().unwrap_or(0)
    }

    /// Predecessor node indices of node index `i`, in edge order.
    pub fn preds(&self, i: usize) -> &[usize] {
        &self.preds[i]
    }

    pub fn output_indices(&self) -> &[usize] {
        &self.outputs
    }

    pub fn input_indices(&self) -> &[usize] {
        &self.inputs
    }

    /// Node indices in a layer-respecting evaluation order.
    pub fn order(&self) -> &[usize] {
        &self.order
    }

    pub fn general_count(&self) -> usize {
        self.nodes.iter().filter(|n| n.is_general()).count()
    }

    pub fn is_all_linear(&self) -> bool {
        self.general_count() == 0
    }

    pub fn with_input_radius(&self, radius: f64) -> Self {
        let mut g = self.clone();
        g.input_radius = radius;
        g
    }

    /// Returns a copy with node index `i`'s domain radius replaced.
    pub fn with_node_radius(&self, i: usize, radius: f64) -> Self {
        let mut g = self.clone();
        if let Some(f) = g.nodes[i].func.as_mut() {
            f.radius = radius;
        }
        g
    }

    /// Values of every node, evaluating node functions through `node_eval`.
    pub fn forward_with<F>(&self, x: &[f64], check: bool, mut node_eval: F) -> Result<Vec<f64>>
    where
        F: FnMut(usize, &NodeFunction, &[f64]) -> f64,
    {
        if x.len() != self.input_dim {
            return Err(Error::InvalidGraph(format!(
                "expected input of length {}, got {}",
                self.input_dim,
                x.len()
            )));
        }
        let mut values = vec![0.0; self.nodes.len()];
        for (slot, &i) in self.inputs.iter().enumerate() {
            values[i] = x[slot];
        }
        let mut args = Vec::new();
        for &i in &self.order {
            let Some(f) = &self.nodes[i].func else { continue };
            args.clear();
            args.extend(self.preds[i].iter().map(|&p| values[p]));
            if check {
                check_domain(self.nodes[i].id, f, &args)?;
            }
            values[i] = node_eval(i, f, &args);
        }
        Ok(values)
    }

    pub fn eval(&self, x: &[f64]) -> Result<Vec<f64>> {
        let values = self.forward_with(x, true, |_, f, z| f.eval(z))?;
        Ok(self.outputs.iter().map(|&i| values[i]).collect())
    }

    /// Evaluation without domain checks, for range sampling.
    pub fn eval_unchecked(&self, x: &[f64]) -> Vec<f64> {
        let values = self
            .forward_with(x, false, |_, f, z| f.eval(z))
            .expect("input length checked by caller");
        self.outputs.iter().map(|&i| values[i]).collect()
    }

    /// Exact Jacobian (output_dim x input_dim) by forward-mode chain rule.
    pub fn jacobian(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        self.jacobian_impl(x, true)
    }

    pub fn jacobian_unchecked(&self, x: &[f64]) -> DMatrix<f64> {
        self.jacobian_impl(x, false).expect("input length checked by caller")
    }

    fn jacobian_impl(&self, x: &[f64], check: bool) -> Result<DMatrix<f64>> {
        let values = self.forward_with(x, check, |_, f, z| f.eval(z))?;
        let d = self.input_dim;
        let mut grads = vec![vec![0.0; d]; self.nodes.len()];
        for (slot, &i) in self.inputs.iter().enumerate() {
            grads[i][slot] = 1.0;
        }
        let mut args = Vec::new();
        for &i in &self.order {
            let Some(f) = &self.nodes[i].func else { continue };
            args.clear();
            args.extend(self.preds[i].iter().map(|&p| values[p]));
            let local = f.grad(&args);
            let mut g = vec![0.0; d];
            for (&p, w) in self.preds[i].iter().zip(&local) {
                for (gk, pk) in g.iter_mut().zip(&grads[p]) {
                    *gk += w * pk;
                }
            }
            grads[i] = g;
        }
        Ok(DMatrix::from_fn(self.output_dim, d, |r, c| grads[self.outputs[r]][c]))
    }

    /// Hessian of every output with respect to the graph input.
    pub fn hessians(&self, x: &[f64]) -> Result<Vec<DMatrix<f64>>> {
        self.hessians_impl(x, true)
    }

    pub fn hessians_unchecked(&self, x: &[f64]) -> Vec<DMatrix<f64>> {
        self.hessians_impl(x, false).expect("input length checked by caller")
    }

    fn hessians_impl(&self, x: &[f64], check: bool) -> Result<Vec<DMatrix<f64>>> {
        let values = self.forward_with(x, check, |_, f, z| f.eval(z))?;
        let d = self.input_dim;
        let mut grads: Vec<DMatrix<f64>> = vec![DMatrix::zeros(1, d); self.nodes.len()];
        let mut hess: Vec<DMatrix<f64>> = vec![DMatrix::zeros(d, d); self.nodes.len()];
        for (slot, &i) in self.inputs.iter().enumerate() {
            grads[i][(0, slot)] = 1.0;
        }
        let mut args = Vec::new();
        for &i in &self.order {
            let Some(f) = &self.nodes[i].func else { continue };
            args.clear();
            args.extend(self.preds[i].iter().map(|&p| values[p]));
            let local_g = f.grad(&args);
            let local_h = f.hessian(&args);
            let k = self.preds[i].len();
            let jz = DMatrix::from_fn(k, d, |r, c| grads[self.preds[i][r]][(0, c)]);
            let mut h = jz.transpose() * &local_h * &jz;
            let mut g = DMatrix::zeros(1, d);
            for (r, &p) in self.preds[i].iter().enumerate() {
                g += &grads[p] * local_g[r];
                if local_g[r] != 0.0 {
                    h += &hess[p] * local_g[r];
                }
            }
            grads[i] = g;
            hess[i] = h;
        }
        Ok(self.outputs.iter().map(|&i| hess[i].clone()).collect())
    }

    /// Points used to probe the declared input box: box vertices (low
    /// dimensions only) followed by `n` scrambled Sobol points.
    pub fn input_samples(&self, n: usize) -> Vec<Vec<f64>> {
        let r = self.input_radius;
        let lo = vec![-r; self.input_dim];
        let hi = vec![r; self.input_dim];
        let mut pts = sampling::box_vertices(&lo, &hi);
        pts.extend(sampling::sobol_box(self.input_dim, n, r, VALIDATION_SEED));
        pts
    }

    /// Per-node sampled value ranges over the input box.
    pub fn node_ranges(&self, n_samples: usize) -> Vec<(f64, f64)> {
        let mut ranges = vec![(f64::INFINITY, f64::NEG_INFINITY); self.nodes.len()];
        for x in self.input_samples(n_samples) {
            let values = self
                .forward_with(&x, false, |_, f, z| f.eval(z))
                .expect("sample has input length");
            for (r, v) in ranges.iter_mut().zip(values) {
                r.0 = r.0.min(v);
                r.1 = r.1.max(v);
            }
        }
        ranges
    }

    pub fn to_doc(&self) -> GraphDoc {
        GraphDoc::from_graph(self)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_doc()).expect("graph documents always serialize")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: GraphDoc = serde_json::from_str(text)?;
        doc.into_graph()
    }
}

fn check_domain(id: usize, f: &NodeFunction, args: &[f64]) -> Result<()> {
    for &v in args {
        if !(v.abs() <= f.radius + DOMAIN_TOL) {
            return Err(Error::domain(format!("node {id}"), v, f.radius));
        }
    }
    Ok(())
}

/// `f(x)` by layer-ordered forward propagation.
pub fn eval_graph(graph: &CompGraph, x: &[f64]) -> Result<Vec<f64>> {
    graph.eval(x)
}

/// Exact Jacobian of the graph at `x`.
pub fn grad_graph(graph: &CompGraph, x: &[f64]) -> Result<DMatrix<f64>> {
    graph.jacobian(x)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeRange {
    pub source: usize,
    pub target: usize,
    pub min: f64,
    pub max: f64,
    pub target_radius: f64,
    pub from_input: bool,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub samples: usize,
    pub edges: Vec<EdgeRange>,
    pub passed: bool,
}

impl ValidationReport {
    pub fn failures(&self) -> impl Iterator<Item = &EdgeRange> {
        self.edges.iter().filter(|e| !e.pass)
    }
}

/// Range/domain compatibility check over sampled inputs.
///
/// Edges leaving an input node need the input box inside the target box;
/// edges leaving a function node need the sampled range strictly inside the
/// target box with a 1% margin.
pub fn validate_graph(graph: &CompGraph, n_samples: usize) -> ValidationReport {
    let ranges = graph.node_ranges(n_samples.max(1));
    let index: HashMap<usize, usize> = graph.nodes.iter().enumerate().map(|(i, n)| (n.id, i)).collect();
    let edges: Vec<EdgeRange> = graph
        .edges
        .iter()
        .map(|&(s, t)| {
            let (si, ti) = (index[&s], index[&t]);
            let radius = graph.nodes[ti].func.as_ref().map_or(f64::INFINITY, |f| f.radius);
            let from_input = graph.nodes[si].is_input();
            let (min, max) = ranges[si];
            let pass = if from_input {
                graph.input_radius <= radius * (1.0 + 1e-12)
            } else {
                let limit = (1.0 - CONTAINMENT_MARGIN) * radius;
                min > -limit && max < limit
            };
            EdgeRange {
                source: s,
                target: t,
                min,
                max,
                target_radius: radius,
                from_input,
                pass,
            }
        })
        .collect();
    let passed = edges.iter().all(|e| e.pass);
    ValidationReport {
        samples: n_samples,
        edges,
        passed,
    }
}

/// Incremental graph construction; layers default to one past the deepest
/// predecessor.
#[derive(Debug, Default, Clone)]
pub struct GraphBuilder {
    nodes: Vec<Node>,
    edges: Vec<(usize, usize)>,
}

impl GraphBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    fn layer_of(&self, id: usize) -> usize {
        self.nodes[id].layer
    }

    pub fn input(&mut self) -> usize {
        let id = self.nodes.len();
        self.nodes.push(Node { id, layer: 0, func: None });
        id
    }

    pub fn inputs(&mut self, n: usize) -> Vec<usize> {
        (0..n).map(|_| self.input()).collect()
    }

    pub fn node(&mut self, func: NodeFunction, preds: &[usize]) -> usize {
        let layer = preds.iter().map(|&p| self.layer_of(p)).max().unwrap_or(0) + 1;
        self.node_at(layer, func, preds)
    }

    pub fn node_at(&mut self, layer: usize, func: NodeFunction, preds: &[usize]) -> usize {
        let id = self.nodes.len();
        self.nodes.push(Node { id, layer, func: Some(func) });
        self.edges.extend(preds.iter().map(|&p| (p, id)));
        id
    }

    /// Copies the function nodes of `graph`, wiring its inputs to `sources`.
    /// Returns the ids of the embedded outputs.
    pub fn embed(&mut self, graph: &CompGraph, sources: &[usize]) -> Vec<usize> {
        assert_eq!(sources.len(), graph.input_dim(), "one source per graph input");
        let offset = sources.iter().map(|&s| self.layer_of(s)).max().unwrap_or(0);
        let mut map = vec![usize::MAX; graph.nodes.len()];
        for (slot, &i) in graph.inputs.iter().enumerate() {
            map[i] = sources[slot];
        }
        for (i, n) in graph.nodes.iter().enumerate() {
            let Some(f) = &n.func else { continue };
            let id = self.nodes.len();
            self.nodes.push(Node {
                id,
                layer: n.layer + offset,
                func: Some(f.clone()),
            });
            map[i] = id;
        }
        let index: HashMap<usize, usize> =
            graph.nodes.iter().enumerate().map(|(i, n)| (n.id, i)).collect();
        for &(s, t) in &graph.edges {
            self.edges.push((map[index[&s]], map[index[&t]]));
        }
        graph.outputs.iter().map(|&o| map[o]).collect()
    }

    pub fn build(self, input_radius: f64) -> Result<CompGraph> {
        let input_dim = self.nodes.iter().filter(|n| n.is_input()).count();
        let mut has_out = vec![false; self.nodes.len()];
        for &(s, _) in &self.edges {
            has_out[s] = true;
        }
        let output_dim = self
            .nodes
            .iter()
            .filter(|n| !n.is_input() && !has_out[n.id])
            .count();
        CompGraph::new(self.nodes, self.edges, input_dim, output_dim, input_radius)
    }
}

/// Helpers for common graphs.
pub mod library {
    use super::*;

    pub fn affine(weights: Vec<f64>, bias: f64, radius: f64) -> NodeFunction {
        NodeFunction::new(NodeKind::Affine { weights, bias }, radius)
    }

    pub fn weighted_sum(weights: Vec<f64>, radius: f64) -> NodeFunction {
        NodeFunction::new(NodeKind::WeightedSum { weights }, radius)
    }

    pub fn polynomial(coeffs: Vec<f64>, radius: f64) -> NodeFunction {
        NodeFunction::new(NodeKind::Polynomial { coeffs }, radius)
    }

    pub fn smooth(profile: Profile, gain: f64, scale: f64, radius: f64) -> NodeFunction {
        NodeFunction::new(NodeKind::Smooth { profile, gain, scale }, radius)
    }

    pub fn squared_norm(dim: usize, scale: f64, radius: f64) -> NodeFunction {
        NodeFunction::new(NodeKind::SquaredNorm { dim, scale }, radius)
    }

    /// Rows of `[A B]` as affine output nodes over inputs `(x, u)`.
    pub fn linear_map(a: &DMatrix<f64>, b: &DMatrix<f64>, radius: f64) -> Result<CompGraph> {
        let n = a.nrows();
        let q = b.ncols();
        let mut gb = GraphBuilder::new();
        let ins = gb.inputs(n + q);
        for i in 0..n {
            let w: Vec<f64> = (0..n).map(|j| a[(i, j)]).chain((0..q).map(|j| b[(i, j)])).collect();
            gb.node(affine(w, 0.0, radius), &ins);
        }
        gb.build(radius)
    }

    /// `x -> scale * |x|^2` as a single node.
    pub fn squared_norm_graph(dim: usize, scale: f64, radius: f64) -> Result<CompGraph> {
        let mut gb = GraphBuilder::new();
        let ins = gb.inputs(dim);
        gb.node(squared_norm(dim, scale, radius), &ins);
        gb.build(radius)
    }

    /// `x -> sum_i w_i x_i^2` as one univariate square per coordinate feeding
    /// a weighted sum.
    pub fn separable_quadratic(weights: &[f64], radius: f64) -> Result<CompGraph> {
        let mut gb = GraphBuilder::new();
        let ins = gb.inputs(weights.len());
        let squares: Vec<usize> = ins
            .iter()
            .zip(weights)
            .map(|(&i, &w)| gb.node(polynomial(vec![0.0, 0.0, w], radius), &[i]))
            .collect();
        let sum_radius = 2.0 * weights.iter().map(|w| w.abs()).fold(0.0, f64::max) * radius * radius + 1.0;
        gb.node(weighted_sum(vec![1.0; weights.len()], sum_radius), &squares);
        gb.build(radius)
    }

    /// Constant zero on `dim` inputs.
    pub fn zero(dim: usize, radius: f64) -> Result<CompGraph> {
        let mut gb = GraphBuilder::new();
        let ins = gb.inputs(dim);
        gb.node(affine(vec![0.0; dim], 0.0, radius), &ins);
        gb.build(radius)
    }
}

#[cfg(test)]
mod tests {
    use super::library::*;
    use super::*;

    #[test]
    fn identity_pass_through() {
        let mut gb = GraphBuilder::new();
        let x = gb.input();
        gb.node(affine(vec![1.0], 0.0, 1.0), &[x]);
        let g = gb.build(1.0).unwrap();
        assert_eq!(eval_graph(&g, &[0.7]).unwrap(), vec![0.7]);
    }

    #[test]
    fn squared_norm_value_and_gradient() {
        let g = squared_norm_graph(2, 1.0, 5.0).unwrap();
        assert_eq!(eval_graph(&g, &[3.0, 4.0]).unwrap(), vec![25.0]);
        let j = grad_graph(&g, &[3.0, 4.0]).unwrap();
        assert_eq!((j[(0, 0)], j[(0, 1)]), (6.0, 8.0));
    }

    #[test]
    fn affine_jacobian_is_exact() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.3, -0.2, 0.9]);
        let b = DMatrix::from_row_slice(2, 1, &[0.5, 1.0]);
        let g = linear_map(&a, &b, 4.0).unwrap();
        let j = grad_graph(&g, &[0.1, 0.2, -0.3]).unwrap();
        let mut expected = DMatrix::zeros(2, 3);
        expected.view_mut((0, 0), (2, 2)).copy_from(&a);
        expected.view_mut((0, 2), (2, 1)).copy_from(&b);
        assert_eq!(j, expected);
    }

    #[test]
    fn domain_violation_is_reported() {
        let g = squared_norm_graph(2, 1.0, 1.0).unwrap();
        let err = eval_graph(&g, &[1.5, 0.0]).unwrap_err();
        assert!(matches!(err, Error::DomainViolation { .. }));
        assert!(eval_graph(&g, &[1.0 + 0.5e-9, 0.0]).is_ok());
    }

    #[test]
    fn rejects_layer_violations_and_bad_fan_in() {
        let nodes = vec![
            Node { id: 0, layer: 0, func: None },
            Node { id: 1, layer: 1, func: Some(squared_norm(2, 1.0, 1.0)) },
        ];
        let err = CompGraph::new(nodes.clone(), vec![(0, 1)], 1, 1, 1.0).unwrap_err();
        assert!(err.to_string().contains("fan-in"));
        let nodes = vec![
            Node { id: 0, layer: 0, func: None },
            Node { id: 1, layer: 1, func: Some(affine(vec![1.0, 1.0], 0.0, 1.0)) },
            Node { id: 2, layer: 1, func: Some(affine(vec![1.0], 0.0, 1.0)) },
        ];
        let err = CompGraph::new(nodes, vec![(0, 1), (2, 1), (0, 2)], 1, 1, 1.0).unwrap_err();
        assert!(err.to_string().contains("layer"));
    }

    #[test]
    fn validation_flags_tanh_into_small_box() {
        let mut gb = GraphBuilder::new();
        let x = gb.input();
        let t = gb.node(smooth(Profile::Tanh, 3.0, 1.0, 1.0), &[x]);
        gb.node(polynomial(vec![0.0, 0.0, 1.0], 0.5), &[t]);
        let g = gb.build(1.0).unwrap();
        let report = validate_graph(&g, 64);
        assert!(!report.passed);
        assert_eq!(report.failures().count(), 1);
        assert_eq!(report.failures().next().unwrap().source, t);
    }

    #[test]
    fn validation_passes_unit_range_into_wider_box() {
        let mut gb = GraphBuilder::new();
        let x = gb.input();
        let s = gb.node(affine(vec![1.0], 0.0, 1.0), &[x]);
        gb.node(polynomial(vec![0.0, 1.0, 1.0], 2.0), &[s]);
        let g = gb.build(1.0).unwrap();
        let report = validate_graph(&g, 32);
        assert!(report.passed, "{report:?}");
        let edge = report.edges.iter().find(|e| e.source == s).unwrap();
        assert_eq!((edge.min, edge.max), (-1.0, 1.0));
    }

    #[test]
    fn embed_preserves_function() {
        let inner = separable_quadratic(&[1.0, 2.0], 2.0).unwrap();
        let mut gb = GraphBuilder::new();
        let ins = gb.inputs(2);
        let out = gb.embed(&inner, &[ins[1], ins[0]]);
        gb.node(affine(vec![1.0], 1.0, 100.0), &out);
        let g = gb.build(2.0).unwrap();
        let v = g.eval(&[0.5, 1.5]).unwrap()[0];
        assert_eq!(v, 1.5 * 1.5 + 2.0 * 0.25 + 1.0);
    }
}
