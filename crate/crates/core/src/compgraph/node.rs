use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

/// Univariate smooth profiles. Each node applies `scale * profile(gain * z)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Profile {
    Tanh,
    Softplus,
    ExpNegSq,
}

/// Closed catalog of node functions with analytic derivatives.
#[derive(Debug, Clone, PartialEq)]
pub enum NodeKind {
    /// `w . z + b`
    Affine { weights: Vec<f64>, bias: f64 },
    /// `sum_i w_i z_i`
    WeightedSum { weights: Vec<f64> },
    /// `z' Q z + b' z + c`
    QuadraticForm {
        q: DMatrix<f64>,
        linear: Vec<f64>,
        constant: f64,
    },
    /// `scale * |z|^2`
    SquaredNorm { dim: usize, scale: f64 },
    /// `scale * profile(gain * z)`, one input.
    Smooth {
        profile: Profile,
        gain: f64,
        scale: f64,
    },
    /// `sum_k c_k z^k`, one input.
    Polynomial { coeffs: Vec<f64> },
}

impl NodeKind {
    pub fn tag(&self) -> &'static str {
        match self {
            NodeKind::Affine { .. } => "affine",
            NodeKind::WeightedSum { .. } => "weighted_sum",
            NodeKind::QuadraticForm { .. } => "quadratic_form",
            NodeKind::SquaredNorm { .. } => "squared_norm",
            NodeKind::Smooth { profile, .. } => match profile {
                Profile::Tanh => "tanh",
                Profile::Softplus => "softplus",
                Profile::ExpNegSq => "exp_neg_sq",
            },
            NodeKind::Polynomial { .. } => "polynomial",
        }
    }

    pub fn in_dim(&self) -> usize {
        match self {
            NodeKind::Affine { weights, .. } | NodeKind::WeightedSum { weights } => weights.len(),
            NodeKind::QuadraticForm { q, .. } => q.nrows(),
            NodeKind::SquaredNorm { dim, .. } => *dim,
            NodeKind::Smooth { .. } | NodeKind::Polynomial { .. } => 1,
        }
    }

    /// Linear nodes are exact in every surrogate and never count as general.
    pub fn is_linear(&self) -> bool {
        matches!(self, NodeKind::Affine { .. } | NodeKind::WeightedSum { .. })
    }

    /// True when the node is a polynomial of degree at most two.
    pub fn is_quadratic(&self) -> bool {
        match self {
            NodeKind::QuadraticForm { .. } | NodeKind::SquaredNorm { .. } => true,
            NodeKind::Polynomial { coeffs } => {
                coeffs.iter().skip(3).all(|c| *c == 0.0)
            }
            _ => self.is_linear(),
        }
    }
}

/// A catalog function together with its domain box `[-radius, radius]^d`
/// and the smoothness order used for feature accounting.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeFunction {
    pub kind: NodeKind,
    pub radius: f64,
    pub smoothness: u32,
}

impl NodeFunction {
    pub fn new(kind: NodeKind, radius: f64) -> Self {
        Self {
            kind,
            radius,
            smoothness: 2,
        }
    }

    pub fn with_smoothness(mut self, m: u32) -> Self {
        self.smoothness = m;
        self
    }

    pub fn in_dim(&self) -> usize {
        self.kind.in_dim()
    }

    pub fn is_linear(&self) -> bool {
        self.kind.is_linear()
    }

    pub fn eval(&self, z: &[f64]) -> f64 {
        match &self.kind {
            NodeKind::Affine { weights, bias } => dot(weights, z) + bias,
            NodeKind::WeightedSum { weights } => dot(weights, z),
            NodeKind::QuadraticForm { q, linear, constant } => {
                let v = DVector::from_column_slice(z);
                v.dot(&(q * &v)) + dot(linear, z) + constant
            }
            NodeKind::SquaredNorm { scale, .. } => scale * dot(z, z),
            NodeKind::Smooth { .. } | NodeKind::Polynomial { .. } => self.derivative_1d(z[0], 0),
        }
    }

    pub fn grad(&self, z: &[f64]) -> Vec<f64> {
        match &self.kind {
            NodeKind::Affine { weights, .. } | NodeKind::WeightedSum { weights } => weights.clone(),
            NodeKind::QuadraticForm { q, linear, .. } => {
                let v = DVector::from_column_slice(z);
                let g = (q + q.transpose()) * v;
                g.iter().zip(linear).map(|(a, b)| a + b).collect()
            }
            NodeKind::SquaredNorm { scale, .. } => z.iter().map(|v| 2.0 * scale * v).collect(),
            NodeKind::Smooth { .. } | NodeKind::Polynomial { .. } => vec![self.derivative_1d(z[0], 1)],
        }
    }

    pub fn hessian(&self, z: &[f64]) -> DMatrix<f64> {
        let d = self.in_dim();
        match &self.kind {
            NodeKind::Affine { .. } | NodeKind::WeightedSum { .. } => DMatrix::zeros(d, d),
            NodeKind::QuadraticForm { q, .. } => q + q.transpose(),
            NodeKind::SquaredNorm { scale, .. } => DMatrix::identity(d, d) * (2.0 * scale),
            NodeKind::Smooth { .. } | NodeKind::Polynomial { .. } => {
                DMatrix::from_element(1, 1, self.derivative_1d(z[0], 2))
            }
        }
    }

    /// Values of `D_alpha f(z)` for every multi-index with `|alpha| <= m`,
    /// in a fixed order. Orders above two vanish for the multivariate kinds.
    pub fn derivative_table(&self, z: &[f64], m: u32) -> Vec<f64> {
        match &self.kind {
            NodeKind::Smooth { .. } | NodeKind::Polynomial { .. } => {
                (0..=m).map(|k| self.derivative_1d(z[0], k)).collect()
            }
            _ => {
                let mut out = vec![self.eval(z)];
                if m >= 1 {
                    out.extend(self.grad(z));
                }
                if m >= 2 {
                    let h = self.hessian(z);
                    for i in 0..h.nrows() {
                        for j in i..h.ncols() {
                            out.push(h[(i, j)]);
                        }
                    }
                }
                out
            }
        }
    }

    /// k-th derivative of a univariate node.
    pub fn derivative_1d(&self, z: f64, k: u32) -> f64 {
        match &self.kind {
            NodeKind::Polynomial { coeffs } => poly_derivative_eval(coeffs, k, z),
            NodeKind::Smooth {
                profile,
                gain,
                scale,
            } => {
                let t = gain * z;
                let inner = match profile {
                    Profile::Tanh => {
                        let th = t.tanh();
                        poly_eval(&tanh_derivative_poly(k), th)
                    }
                    Profile::Softplus => {
                        if k == 0 {
                            softplus(t)
                        } else {
                            let s = sigmoid(t);
                            poly_eval(&sigmoid_derivative_poly(k - 1), s)
                        }
                    }
                    Profile::ExpNegSq => {
                        // d^k/dt^k exp(-t^2) = H_k(t) exp(-t^2)
                        poly_eval(&gaussian_derivative_poly(k), t) * (-t * t).exp()
                    }
                };
                scale * gain.powi(k as i32) * inner
            }
            _ => panic!("derivative_1d on a multivariate node"),
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn softplus(t: f64) -> f64 {
    if t > 30.0 {
        t + (-t).exp().ln_1p()
    } else {
        t.exp().ln_1p()
    }
}

fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// Horner evaluation, coefficients in increasing degree.
fn poly_eval(c: &[f64], x: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, a| acc * x + a)
}

fn poly_diff(c: &[f64]) -> Vec<f64> {
    c.iter()
        .enumerate()
        .skip(1)
        .map(|(i, a)| a * i as f64)
        .collect()
}

fn poly_mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

fn poly_derivative_eval(c: &[f64], k: u32, x: f64) -> f64 {
    let mut p = c.to_vec();
    for _ in 0..k {
        p = poly_diff(&p);
    }
    poly_eval(&p, x)
}

/// `P_k` with `d^k/dt^k tanh(t) = P_k(tanh t)`.
fn tanh_derivative_poly(k: u32) -> Vec<f64> {
    let mut p = vec![0.0, 1.0];
    for _ in 0..k {
        p = poly_mul(&poly_diff(&p), &[1.0, 0.0, -1.0]);
    }
    p
}

/// `Q_k` with `d^k/dt^k sigmoid(t) = Q_k(sigmoid t)`.
fn sigmoid_derivative_poly(k: u32) -> Vec<f64> {
    let mut p = vec![0.0, 1.0];
    for _ in 0..k {
        p = poly_mul(&poly_diff(&p), &[0.0, 1.0, -1.0]);
    }
    p
}

fn gaussian_derivative_poly(k: u32) -> Vec<f64> {
    let mut p = vec![1.0];
    for _ in 0..k {
        let dp = poly_diff(&p);
        let zp = poly_mul(&p, &[0.0, -2.0]);
        let len = dp.len().max(zp.len());
        p = (0..len)
            .map(|i| dp.get(i).copied().unwrap_or(0.0) + zp.get(i).copied().unwrap_or(0.0))
            .collect();
    }
    p
}

#[cfg(test)]
mod tests {
    use super::*;

    fn catalog() -> Vec<NodeFunction> {
        let q = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, -0.3, 1.0]);
        vec![
            NodeFunction::new(NodeKind::Affine { weights: vec![1.5, -2.0], bias: 0.3 }, 2.0),
            NodeFunction::new(NodeKind::WeightedSum { weights: vec![0.5, 0.25, 1.0] }, 2.0),
            NodeFunction::new(NodeKind::QuadraticForm { q, linear: vec![0.1, -0.2], constant: 1.0 }, 2.0),
            NodeFunction::new(NodeKind::SquaredNorm { dim: 3, scale: 0.7 }, 2.0),
            NodeFunction::new(NodeKind::Smooth { profile: Profile::Tanh, gain: 1.3, scale: 0.8 }, 2.0),
            NodeFunction::new(NodeKind::Smooth { profile: Profile::Softplus, gain: 0.9, scale: 1.1 }, 2.0),
            NodeFunction::new(NodeKind::Smooth { profile: Profile::ExpNegSq, gain: 0.7, scale: 1.0 }, 2.0),
            NodeFunction::new(NodeKind::Polynomial { coeffs: vec![0.5, -1.0, 0.3, 0.2] }, 2.0),
        ]
    }

    fn rel_err(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(1.0)
    }

    #[test]
    fn gradients_and_hessians_match_central_differences() {
        let mut r = crate::sampling::rng(11);
        use rand::Rng;
        for node in catalog() {
            let d = node.in_dim();
            for _ in 0..100 {
                let z: Vec<f64> = (0..d).map(|_| r.random_range(-1.8..1.8)).collect();
                let g = node.grad(&z);
                let h = node.hessian(&z);
                for i in 0..d {
                    let step = 1e-5;
                    let mut zp = z.clone();
                    let mut zm = z.clone();
                    zp[i] += step;
                    zm[i] -= step;
                    let fd = (node.eval(&zp) - node.eval(&zm)) / (2.0 * step);
                    assert!(rel_err(g[i], fd) <= 1e-6, "{} grad {} vs {}", node.kind.tag(), g[i], fd);
                    let hs = 1e-4;
                    let mut zp = z.clone();
                    let mut zm = z.clone();
                    zp[i] += hs;
                    zm[i] -= hs;
                    let gp = node.grad(&zp);
                    let gm = node.grad(&zm);
                    for j in 0..d {
                        let fd = (gp[j] - gm[j]) / (2.0 * hs);
                        assert!(rel_err(h[(j, i)], fd) <= 1e-4, "{} hess", node.kind.tag());
                    }
                }
            }
        }
    }

    #[test]
    fn higher_derivatives_of_univariate_profiles_match_differences() {
        for node in catalog().into_iter().filter(|n| n.in_dim() == 1) {
            for &z in &[-1.2, -0.3, 0.0, 0.4, 1.7] {
                for k in 1..5 {
                    let h = 1e-5;
                    let fd = (node.derivative_1d(z + h, k - 1) - node.derivative_1d(z - h, k - 1)) / (2.0 * h);
                    assert!(rel_err(node.derivative_1d(z, k), fd) < 1e-5, "{} order {k}", node.kind.tag());
                }
            }
        }
    }

    #[test]
    fn linear_classification() {
        let tags: Vec<_> = catalog().iter().filter(|n| n.is_linear()).map(|n| n.kind.tag()).collect();
        assert_eq!(tags, vec!["affine", "weighted_sum"]);
    }

    #[test]
    fn derivative_table_counts_multi_indices() {
        let node = NodeFunction::new(NodeKind::SquaredNorm { dim: 4, scale: 1.0 }, 1.0);
        // 1 + 4 + 10 multi-indices of order <= 2
        assert_eq!(node.derivative_table(&[0.0; 4], 2).len(), 15);
    }
}
