//! Compositional features `(r_max, Lambda, L_max, |V_G|)` of a graph and
//! their algebra under parallelization and state extension.

use serde::{Deserialize, Serialize};

use crate::compgraph::{CompGraph, NodeFunction, NodeKind};
use crate::sampling;

/// Inflation applied to every sampled supremum.
pub const SAFETY_FACTOR: f64 = 1.1;
/// Low-discrepancy sample count for nodes of dimension above three.
pub const DEFAULT_FEATURE_SAMPLES: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureTuple {
    pub r_max: f64,
    pub lambda: f64,
    pub l_max: f64,
    pub v_g: usize,
}

impl FeatureTuple {
    /// Features of a graph without general nodes.
    pub const LINEAR: FeatureTuple = FeatureTuple {
        r_max: 1.0,
        lambda: 0.0,
        l_max: 0.0,
        v_g: 0,
    };

    pub fn as_array(&self) -> [f64; 4] {
        [self.r_max, self.lambda, self.l_max, self.v_g as f64]
    }
}

/// Per-node quantities behind the feature tuple.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeFeatures {
    pub id: usize,
    pub kind: String,
    pub in_dim: usize,
    pub smoothness: u32,
    pub radius: f64,
    /// `d / m`
    pub ratio: f64,
    /// `max{R^m, 1} * sum_{|alpha| <= m} sup |D_alpha f|`, sampled, not inflated.
    pub sobolev: f64,
    /// Sampled sup of the gradient norm, not inflated.
    pub lipschitz: f64,
}

fn sup_points(f: &NodeFunction, n_samples: usize) -> Vec<Vec<f64>> {
    let d = f.in_dim();
    if d <= 3 {
        sampling::tensor_grid(d, &sampling::linspace(f.radius, 17))
    } else {
        sampling::sobol_box(d, n_samples.max(1), f.radius, 17)
    }
}

/// Maximizes `g` on `[a, b]` by golden-section search.
fn golden_max(g: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - phi * (b - a);
    let mut d = a + phi * (b - a);
    let (mut gc, mut gd) = (g(c), g(d));
    for _ in 0..60 {
        if gc >= gd {
            b = d;
            d = c;
            gd = gc;
            c = b - phi * (b - a);
            gc = g(c);
        } else {
            a = c;
            c = d;
            gc = gd;
            d = a + phi * (b - a);
            gd = g(d);
        }
    }
    gc.max(gd)
}

/// Grid supremum of `|g|` refined around the best grid point.
fn refined_sup_1d(g: impl Fn(f64) -> f64, grid: &[f64]) -> f64 {
    let vals: Vec<f64> = grid.iter().map(|&t| g(t).abs()).collect();
    let (best, &top) = vals
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .expect("non-empty grid");
    let lo = grid[best.saturating_sub(1)];
    let hi = grid[(best + 1).min(grid.len() - 1)];
    if hi > lo {
        top.max(golden_max(|t| g(t).abs(), lo, hi))
    } else {
        top
    }
}

pub fn node_features(id: usize, f: &NodeFunction, n_samples: usize) -> NodeFeatures {
    let d = f.in_dim();
    let m = f.smoothness;
    let scale = f.radius.powi(m as i32).max(1.0);
    let univariate = matches!(f.kind, NodeKind::Smooth { .. } | NodeKind::Polynomial { .. });
    let (sum, lipschitz) = if univariate {
        let grid = sampling::linspace(f.radius, 17);
        let sups: Vec<f64> = (0..=m)
            .map(|k| refined_sup_1d(|t| f.derivative_1d(t, k), &grid))
            .collect();
        let lip = sups.get(1).copied().unwrap_or(0.0);
        (sups.iter().sum::<f64>(), lip)
    } else {
        let pts = sup_points(f, n_samples);
        let mut sups: Vec<f64> = Vec::new();
        let mut lip = 0.0f64;
        for z in &pts {
            let table = f.derivative_table(z, m);
            if sups.is_empty() {
                sups = vec![0.0; table.len()];
            }
            for (s, v) in sups.iter_mut().zip(&table) {
                *s = s.max(v.abs());
            }
            lip = lip.max(sampling::norm(&f.grad(z)));
        }
        (sups.iter().sum::<f64>(), lip)
    };
    NodeFeatures {
        id,
        kind: f.kind.tag().to_string(),
        in_dim: d,
        smoothness: m,
        radius: f.radius,
        ratio: d as f64 / m as f64,
        sobolev: scale * sum,
        lipschitz,
    }
}

/// Features of every general node.
pub fn general_node_features(graph: &CompGraph, n_samples: usize) -> Vec<NodeFeatures> {
    graph
        .nodes()
        .iter()
        .filter(|n| n.is_general())
        .map(|n| node_features(n.id, n.func.as_ref().expect("general nodes carry a function"), n_samples))
        .collect()
}

/// `r_max` and `|V_G|` exact from structure; `Lambda` and `L_max` are sampled
/// maxima inflated by [`SAFETY_FACTOR`]. All-linear graphs give `(1, 0, 0, 0)`.
pub fn compute_features(graph: &CompGraph, n_samples: usize) -> FeatureTuple {
    let nodes = general_node_features(graph, n_samples);
    if nodes.is_empty() {
        return FeatureTuple::LINEAR;
    }
    FeatureTuple {
        r_max: nodes.iter().map(|n| n.ratio).fold(0.0, f64::max),
        lambda: SAFETY_FACTOR * nodes.iter().map(|n| n.sobolev).fold(0.0, f64::max),
        l_max: SAFETY_FACTOR * nodes.iter().map(|n| n.lipschitz).fold(0.0, f64::max),
        v_g: nodes.len(),
    }
}

/// Features of two compositional functions evaluated side by side.
pub fn features_parallel(a: FeatureTuple, b: FeatureTuple) -> FeatureTuple {
    FeatureTuple {
        r_max: a.r_max.max(b.r_max),
        lambda: a.lambda.max(b.lambda),
        l_max: a.l_max.max(b.l_max),
        v_g: a.v_g + b.v_g,
    }
}

/// The extended terminal cost `g(x) + y` only adds linear nodes.
pub fn features_extend_terminal(g: FeatureTuple) -> FeatureTuple {
    g
}

/// Sampled Lipschitz constant of the whole map on its input box: the sup of
/// the Jacobian's spectral norm, inflated by [`SAFETY_FACTOR`].
pub fn graph_lipschitz(graph: &CompGraph, n_samples: usize) -> f64 {
    let mut best = 0.0f64;
    for x in graph.input_samples(n_samples) {
        let j = graph.jacobian(&x).expect("samples lie in the input box");
        best = best.max(spectral_norm(&j));
    }
    SAFETY_FACTOR * best
}

pub(crate) fn spectral_norm(m: &nalgebra::DMatrix<f64>) -> f64 {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0.0;
    }
    m.clone().singular_values().max()
}
