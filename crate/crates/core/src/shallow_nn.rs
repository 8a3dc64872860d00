//! Shallow-network approximation of general nodes and of whole compositional
//! functions.
//!
//! Each general node gets a single-hidden-layer network with a random inner
//! layer and a ridge-regressed linear readout. Linear nodes are kept exact.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::compgraph::{CompGraph, GraphDoc, NodeFunction, NodeKind};
use crate::decimal::{from_decimals, matrix_from_decimals, matrix_to_decimals, to_decimals, Decimal};
use crate::error::{Error, Result};
use crate::features;
use crate::sampling;

pub const RIDGE: f64 = 1e-10;
pub const MAX_CONDITION: f64 = 1e14;
/// Inner weights are uniform on `[-INNER_SCALE / R, INNER_SCALE / R]^d`.
pub const INNER_SCALE: f64 = 3.0;
/// Biases are uniform on `[-BIAS_SCALE, BIAS_SCALE]`.
pub const BIAS_SCALE: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    #[default]
    Tanh,
    Sigmoid,
}

impl Activation {
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => z.tanh(),
            Activation::Sigmoid => 1.0 / (1.0 + (-z).exp()),
        }
    }
}

/// `x -> outer . act(inner x + bias)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ShallowNet {
    pub inner_weights: DMatrix<f64>,
    pub inner_bias: DVector<f64>,
    pub outer_weights: DVector<f64>,
    pub activation: Activation,
}

impl ShallowNet {
    pub fn width(&self) -> usize {
        self.outer_weights.len()
    }

    pub fn in_dim(&self) -> usize {
        self.inner_weights.ncols()
    }

    pub fn size(&self) -> usize {
        self.width()
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let mut acc = 0.0;
        for k in 0..self.width() {
            let mut z = self.inner_bias[k];
            for (j, xj) in x.iter().enumerate() {
                z += self.inner_weights[(k, j)] * xj;
            }
            acc += self.outer_weights[k] * self.activation.apply(z);
        }
        acc
    }

    fn features(&self, x: &[f64], row: &mut [f64]) {
        for (k, slot) in row.iter_mut().enumerate() {
            let mut z = self.inner_bias[k];
            for (j, xj) in x.iter().enumerate() {
                z += self.inner_weights[(k, j)] * xj;
            }
            *slot = self.activation.apply(z);
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ShallowNetDoc {
    pub activation: Activation,
    pub width: usize,
    pub in_dim: usize,
    pub inner_weights: Vec<Vec<Decimal>>,
    pub inner_bias: Vec<Decimal>,
    pub outer_weights: Vec<Decimal>,
}

impl ShallowNetDoc {
    pub fn from_net(net: &ShallowNet) -> Self {
        ShallowNetDoc {
            activation: net.activation,
            width: net.width(),
            in_dim: net.in_dim(),
            inner_weights: matrix_to_decimals(&net.inner_weights),
            inner_bias: to_decimals(net.inner_bias.as_slice()),
            outer_weights: to_decimals(net.outer_weights.as_slice()),
        }
    }

    pub fn into_net(self) -> Result<ShallowNet> {
        let bad = |what: &str| Error::InvalidGraph(format!("shallow net document: {what}"));
        let inner = matrix_from_decimals(&self.inner_weights, self.in_dim).ok_or_else(|| bad("inner_weights shape"))?;
        if inner.nrows() != self.width || self.inner_bias.len() != self.width || self.outer_weights.len() != self.width {
            return Err(bad("width mismatch"));
        }
        Ok(ShallowNet {
            inner_weights: inner,
            inner_bias: DVector::from_vec(from_decimals(&self.inner_bias)),
            outer_weights: DVector::from_vec(from_decimals(&self.outer_weights)),
            activation: self.activation,
        })
    }
}

/// Sample plans and solver settings for [`fit_node_with`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub activation: Activation,
    pub ridge: f64,
    /// Tensor-grid points per axis for nodes of dimension up to three.
    pub train_per_axis: usize,
    /// Sobol training points for higher-dimensional nodes; validation uses
    /// the next block of the same sequence.
    pub train_points_high_dim: usize,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            activation: Activation::Tanh,
            ridge: RIDGE,
            train_per_axis: 33,
            train_points_high_dim: 8192,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NodeFit {
    pub net: ShallowNet,
    /// Sup error on the validation plan.
    pub sup_error: f64,
    pub condition: f64,
}

const SOBOL_SEED: u32 = 0x0005_eed5;

fn training_points(f: &NodeFunction, cfg: &FitConfig) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let d = f.in_dim();
    let r = f.radius;
    if d <= 3 {
        let k = cfg.train_per_axis.max(2);
        let train = sampling::tensor_grid(d, &sampling::linspace(r, k));
        let valid = sampling::tensor_grid(d, &sampling::midpoints(r, k - 1));
        (train, valid)
    } else {
        let n = cfg.train_points_high_dim.max(1);
        let mut all = sampling::sobol_box(d, 2 * n, r, SOBOL_SEED);
        let valid = all.split_off(n);
        (all, valid)
    }
}

fn draw_inner(d: usize, width: usize, radius: f64, seed: u64, act: Activation) -> ShallowNet {
    let mut rng = sampling::rng(seed);
    let s = INNER_SCALE / radius;
    let inner = DMatrix::from_fn(width, d, |_, _| rng.random_range(-s..=s));
    let bias = DVector::from_fn(width, |_, _| rng.random_range(-BIAS_SCALE..=BIAS_SCALE));
    ShallowNet {
        inner_weights: inner,
        inner_bias: bias,
        outer_weights: DVector::zeros(width),
        activation: act,
    }
}

/// Ridge solution of `min |Phi w - y|^2 / n + ridge |w|^2`, using whichever
/// Gram matrix is smaller. Returns the weights and the condition number of
/// the regularized normal matrix.
fn ridge_solve(phi: &DMatrix<f64>, y: &DVector<f64>, ridge: f64) -> (DVector<f64>, f64) {
    let (n, w) = phi.shape();
    let nf = n as f64;
    if w <= n {
        let gram = phi.tr_mul(phi) / nf;
        let rhs = phi.tr_mul(y) / nf;
        let eig = SymmetricEigen::new(gram);
        let cond = condition(eig.eigenvalues.as_slice(), ridge, false);
        let proj = eig.eigenvectors.tr_mul(&rhs);
        let scaled = DVector::from_fn(w, |i, _| proj[i] / (eig.eigenvalues[i].max(0.0) + ridge));
        (&eig.eigenvectors * scaled, cond)
    } else {
        // dual form: w = Phi^T (Phi Phi^T / n + ridge I)^-1 y / n
        let kern = phi * phi.transpose() / nf;
        let eig = SymmetricEigen::new(kern);
        let cond = condition(eig.eigenvalues.as_slice(), ridge, true);
        let proj = eig.eigenvectors.tr_mul(y);
        let scaled = DVector::from_fn(n, |i, _| proj[i] / (eig.eigenvalues[i].max(0.0) + ridge));
        (phi.tr_mul(&(&eig.eigenvectors * scaled)) / nf, cond)
    }
}

fn condition(eigs: &[f64], ridge: f64, rank_deficient: bool) -> f64 {
    let hi = eigs.iter().copied().fold(0.0f64, f64::max);
    let lo = if rank_deficient {
        0.0
    } else {
        eigs.iter().copied().fold(f64::INFINITY, f64::min).max(0.0)
    };
    (hi + ridge) / (lo + ridge)
}

/// Fits a general node with the default sample plan.
pub fn fit_node(node: &NodeFunction, width: usize, seed: u64) -> Result<NodeFit> {
    fit_node_with(node, width, seed, &FitConfig::default())
}

pub fn fit_node_with(node: &NodeFunction, width: usize, seed: u64, cfg: &FitConfig) -> Result<NodeFit> {
    if node.is_linear() {
        return Err(Error::AffineNode(usize::MAX));
    }
    if width == 0 {
        return Err(Error::Config("network width must be at least 1".into()));
    }
    let d = node.in_dim();
    let mut net = draw_inner(d, width, node.radius, seed, cfg.activation);
    let (train, valid) = training_points(node, cfg);
    let mut phi = DMatrix::zeros(train.len(), width);
    let mut row = vec![0.0; width];
    for (i, x) in train.iter().enumerate() {
        net.features(x, &mut row);
        for (k, v) in row.iter().enumerate() {
            phi[(i, k)] = *v;
        }
    }
    let y = DVector::from_iterator(train.len(), train.iter().map(|x| node.eval(x)));
    let (weights, cond) = ridge_solve(&phi, &y, cfg.ridge);
    if !(cond <= MAX_CONDITION) {
        return Err(Error::IllConditioned(cond));
    }
    net.outer_weights = weights;
    let sup_error = valid
        .iter()
        .map(|x| (net.eval(x) - node.eval(x)).abs())
        .fold(0.0, f64::max);
    Ok(NodeFit { net, sup_error, condition: cond })
}

/// Seed used for the node at position `index` of a graph.
pub fn node_seed(seed: u64, index: usize) -> u64 {
    seed ^ (index as u64 + 1).wrapping_mul(0x9e37_79b9_7f4a_7c15)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeFitReport {
    pub node: usize,
    pub kind: String,
    pub width: usize,
    pub sup_error: f64,
    pub condition: f64,
}

/// A compositional function with every general node replaced by a
/// [`ShallowNet`].
#[derive(Debug, Clone, PartialEq)]
pub struct SurrogateNet {
    graph: CompGraph,
    /// Indexed by node position; `None` for inputs and linear nodes.
    nets: Vec<Option<ShallowNet>>,
    pub width: usize,
    pub total_size: usize,
    pub fit_report: Vec<NodeFitReport>,
}

impl SurrogateNet {
    pub fn graph(&self) -> &CompGraph {
        &self.graph
    }

    /// Networks keyed by node id.
    pub fn node_nets(&self) -> BTreeMap<usize, &ShallowNet> {
        self.graph
            .nodes()
            .iter()
            .zip(&self.nets)
            .filter_map(|(n, net)| net.as_ref().map(|net| (n.id, net)))
            .collect()
    }

    /// Largest per-node validation error.
    pub fn max_node_error(&self) -> f64 {
        self.fit_report.iter().map(|r| r.sup_error).fold(0.0, f64::max)
    }

    /// Surrogate outputs. Networks are defined everywhere, so no domain
    /// checks are applied.
    pub fn eval(&self, x: &[f64]) -> Result<Vec<f64>> {
        let values = self.graph.forward_with(x, false, |i, f, z| match &self.nets[i] {
            Some(net) => net.eval(z),
            None => f.eval(z),
        })?;
        Ok(self.graph.output_indices().iter().map(|&i| values[i]).collect())
    }

    /// Sup-norm gap between surrogate and exact graph over `points`.
    pub fn sup_error(&self, points: &[Vec<f64>]) -> Result<f64> {
        let mut worst = 0.0f64;
        for x in points {
            let exact = self.graph.eval_unchecked(x);
            let approx = self.eval(x)?;
            for (a, b) in exact.iter().zip(&approx) {
                worst = worst.max((a - b).abs());
            }
        }
        Ok(worst)
    }

    pub fn to_doc(&self) -> SurrogateDoc {
        SurrogateDoc {
            graph: self.graph.to_doc(),
            width: self.width,
            total_size: self.total_size,
            nets: self
                .node_nets()
                .into_iter()
                .map(|(id, net)| (id, ShallowNetDoc::from_net(net)))
                .collect(),
            fit_report: self.fit_report.clone(),
        }
    }

    pub fn from_doc(doc: SurrogateDoc) -> Result<Self> {
        let graph = doc.graph.into_graph()?;
        let mut nets = vec![None; graph.nodes().len()];
        let mut docs = doc.nets;
        for (i, n) in graph.nodes().iter().enumerate() {
            if let Some(d) = docs.remove(&n.id) {
                nets[i] = Some(d.into_net()?);
            }
        }
        if let Some(id) = docs.keys().next() {
            return Err(Error::InvalidGraph(format!("surrogate references unknown node {id}")));
        }
        Ok(SurrogateNet {
            graph,
            nets,
            width: doc.width,
            total_size: doc.total_size,
            fit_report: doc.fit_report,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_doc()).expect("surrogate serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Self::from_doc(serde_json::from_str(text)?)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SurrogateDoc {
    pub graph: GraphDoc,
    pub width: usize,
    pub total_size: usize,
    pub nets: BTreeMap<usize, ShallowNetDoc>,
    pub fit_report: Vec<NodeFitReport>,
}

pub fn assemble_surrogate(graph: &CompGraph, width: usize, seed: u64) -> Result<SurrogateNet> {
    assemble_surrogate_with(graph, width, seed, &FitConfig::default())
}

/// Fits every general node independently (in parallel) and keeps linear
/// nodes exact. `total_size = width * |V_G|`.
pub fn assemble_surrogate_with(graph: &CompGraph, width: usize, seed: u64, cfg: &FitConfig) -> Result<SurrogateNet> {
    let general: Vec<usize> = (0..graph.nodes().len()).filter(|&i| graph.nodes()[i].is_general()).collect();
    let fits: Vec<(usize, NodeFit)> = general
        .par_iter()
        .map(|&i| {
            let f = graph.nodes()[i].func.as_ref().expect("general node has a function");
            fit_node_with(f, width, node_seed(seed, i), cfg).map(|fit| (i, fit))
        })
        .collect::<Result<_>>()?;
    let mut nets = vec![None; graph.nodes().len()];
    let mut fit_report = Vec::with_capacity(fits.len());
    for (i, fit) in fits {
        let node = &graph.nodes()[i];
        fit_report.push(NodeFitReport {
            node: node.id,
            kind: node.func.as_ref().map(|f| f.kind.tag()).unwrap_or("input").to_string(),
            width,
            sup_error: fit.sup_error,
            condition: fit.condition,
        });
        nets[i] = Some(fit.net);
    }
    Ok(SurrogateNet {
        graph: graph.clone(),
        nets,
        width,
        total_size: width * general.len(),
        fit_report,
    })
}

/// Dense points on the graph's input box for sup-error measurements.
pub fn validation_points(graph: &CompGraph) -> Vec<Vec<f64>> {
    let r = graph.input_radius();
    match graph.input_dim() {
        1 => sampling::tensor_grid(1, &sampling::linspace(r, 1001)),
        2 => sampling::tensor_grid(2, &sampling::linspace(r, 65)),
        3 => sampling::tensor_grid(3, &sampling::linspace(r, 21)),
        d => {
            let lo = vec![-r; d];
            let hi = vec![r; d];
            let mut pts = sampling::box_vertices(&lo, &hi);
            pts.extend(sampling::sobol_box(d, 4096, r, 0x0bad_5eed));
            pts
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub widths: Vec<usize>,
    pub errors: Vec<f64>,
    /// Least-squares slope of `log(error)` against `log(width)`; `None` when
    /// the surrogate is exact.
    pub slope: Option<f64>,
    /// `-1 / r_max`
    pub theoretical_slope: f64,
    pub r_max: f64,
    pub exact: bool,
}

pub fn measure_rate(graph: &CompGraph, widths: &[usize], seed: u64) -> Result<RateReport> {
    if widths.len() < 3 || widths.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Config("measure_rate needs at least three strictly increasing widths".into()));
    }
    let r_max = features::compute_features(graph, features::DEFAULT_FEATURE_SAMPLES).r_max;
    let points = validation_points(graph);
    let errors: Vec<f64> = widths
        .iter()
        .map(|&w| assemble_surrogate(graph, w, seed).and_then(|s| s.sup_error(&points)))
        .collect::<Result<_>>()?;
    let exact = errors.iter().all(|&e| e == 0.0);
    let slope = if exact {
        None
    } else {
        let pairs: Vec<(f64, f64)> = widths
            .iter()
            .zip(&errors)
            .filter(|(_, &e)| e > 0.0)
            .map(|(&w, &e)| ((w as f64).ln(), e.ln()))
            .collect();
        fit_slope(&pairs)
    };
    Ok(RateReport {
        widths: widths.to_vec(),
        errors,
        slope,
        theoretical_slope: -1.0 / r_max,
        r_max,
        exact,
    })
}

fn fit_slope(pairs: &[(f64, f64)]) -> Option<f64> {
    if pairs.len() < 2 {
        return None;
    }
    let n = pairs.len() as f64;
    let mx = pairs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pairs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pairs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pairs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Some(sxy / sxx)
}

/// Per-kind constant `C` in `sup error <= C * Lambda * L_max * n_w^(-1/r)`,
/// calibrated once with [`calibrate_constant`] on widths 8..128 and frozen
/// with a safety factor of two.
pub fn catalog_constant(kind: &NodeKind) -> f64 {
    match kind {
        NodeKind::Affine { .. } | NodeKind::WeightedSum { .. } => 0.0,
        NodeKind::QuadraticForm { .. } => CATALOG[0],
        NodeKind::SquaredNorm { .. } => CATALOG[1],
        NodeKind::Polynomial { .. } => CATALOG[2],
        NodeKind::Smooth { profile, .. } => match profile {
            crate::compgraph::Profile::Tanh => CATALOG[3],
            crate::compgraph::Profile::Softplus => CATALOG[4],
            crate::compgraph::Profile::ExpNegSq => CATALOG[5],
        },
    }
}

// quadratic_form, squared_norm, polynomial, tanh, softplus, exp_neg_sq
const CATALOG: [f64; 6] = [0.5, 1.0, 0.15, 0.3, 0.12, 0.45];

/// Largest graph-level constant: the max of [`catalog_constant`] over the
/// general nodes.
pub fn graph_constant(graph: &CompGraph) -> f64 {
    graph
        .nodes()
        .iter()
        .filter(|n| n.is_general())
        .filter_map(|n| n.func.as_ref())
        .map(|f| catalog_constant(&f.kind))
        .fold(0.0, f64::max)
}

/// `max_w err(w) * w^(1/r) / (Lambda * L_max)` for a single node, the
/// quantity frozen in [`catalog_constant`].
pub fn calibrate_constant(node: &NodeFunction, widths: &[usize], seed: u64) -> Result<f64> {
    let nf = features::node_features(0, node, features::DEFAULT_FEATURE_SAMPLES);
    let scale = features::SAFETY_FACTOR.powi(2) * nf.sobolev * nf.lipschitz;
    let mut worst = 0.0f64;
    for &w in widths {
        let fit = fit_node(node, w, seed)?;
        worst = worst.max(fit.sup_error * (w as f64).powf(1.0 / nf.ratio) / scale);
    }
    Ok(worst)
}

/// One row of a per-node rate table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitRateRow {
    pub node: usize,
    pub kind: String,
    pub width: usize,
    pub sup_error: f64,
    /// `C * Lambda * L_max * width^(-1/r)` with the frozen catalog constant.
    pub bound: f64,
    pub r_max: f64,
}

/// Fits `node` at each width and pairs the validation error with the
/// frozen-constant bound.
pub fn node_rate(id: usize, node: &NodeFunction, widths: &[usize], seed: u64) -> Result<Vec<FitRateRow>> {
    let nf = features::node_features(id, node, features::DEFAULT_FEATURE_SAMPLES);
    let scale = catalog_constant(&node.kind) * features::SAFETY_FACTOR.powi(2) * nf.sobolev * nf.lipschitz;
    widths
        .par_iter()
        .map(|&w| {
            let fit = fit_node(node, w, node_seed(seed, id))?;
            Ok(FitRateRow {
                node: id,
                kind: node.kind.tag().to_string(),
                width: w,
                sup_error: fit.sup_error,
                bound: scale * (w as f64).powf(-1.0 / nf.ratio),
                r_max: nf.ratio,
            })
        })
        .collect()
}

/// Representative nodes per catalog kind used to calibrate
/// [`catalog_constant`].
pub fn calibration_nodes() -> Vec<NodeFunction> {
    use crate::compgraph::{library::*, Profile};
    let q = DMatrix::from_row_slice(2, 2, &[1.0, 0.3, 0.3, 2.0]);
    let mut out = vec![
        NodeFunction::new(NodeKind::QuadraticForm { q: q.clone(), linear: vec![0.5, -0.2], constant: 0.1 }, 1.0),
        NodeFunction::new(NodeKind::QuadraticForm { q: q * 0.25, linear: vec![0.0, 0.0], constant: 0.0 }, 2.0),
    ];
    for (d, r) in [(1, 1.0), (2, 1.0), (3, 2.0), (4, 1.0)] {
        out.push(squared_norm(d, 1.0, r));
    }
    out.extend([
        polynomial(vec![0.0, 0.0, 1.0], 1.0),
        polynomial(vec![0.0, 0.0, 1.0], 2.0),
        polynomial(vec![0.1, -1.0, 0.5, 0.3], 1.0),
        smooth(Profile::Tanh, 3.0, 1.0, 1.0),
        smooth(Profile::Tanh, 1.0, 1.0, 2.0),
        smooth(Profile::Softplus, 2.0, 1.0, 1.0),
        smooth(Profile::ExpNegSq, 2.0, 1.0, 1.0),
    ]);
    out
}

/// Per-kind maximum of [`calibrate_constant`] over [`calibration_nodes`]
/// and `seeds`.
pub fn calibrate_catalog(widths: &[usize], seeds: &[u64]) -> Result<BTreeMap<String, f64>> {
    let nodes = calibration_nodes();
    let jobs: Vec<(&NodeFunction, u64)> = nodes.iter().flat_map(|n| seeds.iter().map(move |&s| (n, s))).collect();
    let values: Vec<(String, f64)> = jobs
        .par_iter()
        .map(|(n, s)| calibrate_constant(n, widths, *s).map(|c| (n.kind.tag().to_string(), c)))
        .collect::<Result<_>>()?;
    let mut out = BTreeMap::new();
    for (k, c) in values {
        let e = out.entry(k).or_insert(0.0f64);
        *e = e.max(c);
    }
    Ok(out)
}
