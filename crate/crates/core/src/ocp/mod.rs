//! Discrete-time optimal control instances: rollouts, costs, derivatives in
//! the control sequence, convexity certificates, and the extended-state
//! reformulation.

mod doc;
mod extend;
pub mod fixtures;

pub use doc::{DomainDoc, DynamicsDoc, InstanceDoc, OmegaDoc, StageCostDoc};
pub use extend::{calibrate_domain, calibrate_domain_with, extend_system, CalibrationReport};

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::compgraph::CompGraph;
use crate::error::{Error, Result};
use crate::sampling;

/// Certification threshold on the smallest sampled Hessian eigenvalue.
pub const CERT_THRESHOLD: f64 = 1e-10;
/// Central-difference step for Hessians of general dynamics.
pub const FD_HESSIAN_STEP: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq)]
pub enum Dynamics {
    Linear { a: DMatrix<f64>, b: DMatrix<f64> },
    /// A graph with input `(x, u)` and output `x+`.
    Graph(CompGraph),
}

#[derive(Debug, Clone, PartialEq)]
#[allow(clippy::large_enum_variant)]
pub enum StageCost {
    Zero,
    /// `l(x, u) = l1(x) + l2(u)`
    Separated { l1: CompGraph, l2: CompGraph },
}

/// Initial-state set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Omega {
    Box { lo: Vec<f64>, hi: Vec<f64> },
    Points(Vec<Vec<f64>>),
}

impl Omega {
    pub fn dim(&self) -> usize {
        match self {
            Omega::Box { lo, .. } => lo.len(),
            Omega::Points(p) => p.first().map_or(0, Vec::len),
        }
    }

    /// Vertices plus `n` Sobol points for a box; every point otherwise.
    pub fn samples(&self, n: usize, seed: u32) -> Vec<Vec<f64>> {
        match self {
            Omega::Box { lo, hi } => {
                let mut pts = sampling::box_vertices(lo, hi);
                pts.extend(sampling::sobol_in(lo, hi, n, seed));
                pts
            }
            Omega::Points(p) => p.clone(),
        }
    }

    /// Largest absolute coordinate.
    pub fn extent(&self) -> f64 {
        let coords: Box<dyn Iterator<Item = &f64>> = match self {
            Omega::Box { lo, hi } => Box::new(lo.iter().chain(hi)),
            Omega::Points(p) => Box::new(p.iter().flatten()),
        };
        coords.fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        match self {
            Omega::Box { lo, hi } => x
                .iter()
                .zip(lo.iter().zip(hi))
                .all(|(v, (a, b))| *a - 1e-12 <= *v && *v <= *b + 1e-12),
            Omega::Points(p) => p.iter().any(|q| q.as_slice() == x),
        }
    }

    /// `(x, 0)` for every point.
    pub fn lifted(&self) -> Omega {
        match self {
            Omega::Box { lo, hi } => Omega::Box {
                lo: lo.iter().copied().chain([0.0]).collect(),
                hi: hi.iter().copied().chain([0.0]).collect(),
            },
            Omega::Points(p) => Omega::Points(p.iter().map(|x| x.iter().copied().chain([0.0]).collect()).collect()),
        }
    }
}

/// Admissible control set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ControlSet {
    #[default]
    Free,
    Box { lo: Vec<f64>, hi: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Domain {
    pub omega: Omega,
    pub u0: Vec<f64>,
    pub gamma: f64,
    /// Box radius `R` for states and controls.
    pub radius: f64,
    pub controls: ControlSet,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OcpInstance {
    pub n: usize,
    pub q: usize,
    pub horizon: usize,
    pub dynamics: Dynamics,
    pub stage_cost: StageCost,
    pub terminal_cost: CompGraph,
    pub domain: Domain,
    /// The instance this one was extended from, if any.
    pub origin: Option<Box<OcpInstance>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rollout {
    pub states: Vec<Vec<f64>>,
    pub cost: f64,
}

fn check_scalar_graph(g: &CompGraph, inputs: usize, what: &str) -> Result<()> {
    if g.input_dim() != inputs || g.output_dim() != 1 {
        return Err(Error::InvalidInstance(format!(
            "{what} must map R^{inputs} to R, got R^{} -> R^{}",
            g.input_dim(),
            g.output_dim()
        )));
    }
    Ok(())
}

impl OcpInstance {
    pub fn new(
        horizon: usize,
        dynamics: Dynamics,
        stage_cost: StageCost,
        terminal_cost: CompGraph,
        domain: Domain,
    ) -> Result<Self> {
        let bad = |m: String| Err(Error::InvalidInstance(m));
        let (n, q) = match &dynamics {
            Dynamics::Linear { a, b } => {
                if a.nrows() != a.ncols() || b.nrows() != a.nrows() {
                    return bad(format!(
                        "A must be n x n and B n x q, got {}x{} and {}x{}",
                        a.nrows(),
                        a.ncols(),
                        b.nrows(),
                        b.ncols()
                    ));
                }
                (a.nrows(), b.ncols())
            }
            Dynamics::Graph(g) => {
                let n = g.output_dim();
                if g.input_dim() <= n {
                    return bad("dynamics graph needs inputs (x, u) with at least one control".into());
                }
                (n, g.input_dim() - n)
            }
        };
        if n == 0 || q == 0 {
            return bad("state and control dimensions must be positive".into());
        }
        if horizon == 0 {
            return bad("horizon must be at least 1".into());
        }
        check_scalar_graph(&terminal_cost, n, "terminal cost")?;
        if let StageCost::Separated { l1, l2 } = &stage_cost {
            check_scalar_graph(l1, n, "state stage cost l1")?;
            check_scalar_graph(l2, q, "control stage cost l2")?;
        }
        if domain.omega.dim() != n {
            return bad(format!("Omega has dimension {}, expected {n}", domain.omega.dim()));
        }
        if let Omega::Box { lo, hi } = &domain.omega {
            if hi.len() != lo.len() || lo.iter().zip(hi).any(|(a, b)| a > b) {
                return bad("Omega box needs lo <= hi componentwise".into());
            }
        }
        if let Omega::Points(p) = &domain.omega {
            if p.is_empty() || p.iter().any(|x| x.len() != n) {
                return bad("Omega point list must be non-empty with points in R^n".into());
            }
        }
        if domain.u0.len() != q * horizon {
            return bad(format!("U0 has length {}, expected qN = {}", domain.u0.len(), q * horizon));
        }
        if !(domain.gamma > 0.0) || !(domain.radius > 0.0) {
            return bad("gamma and R must be positive".into());
        }
        Ok(OcpInstance {
            n,
            q,
            horizon,
            dynamics,
            stage_cost,
            terminal_cost,
            domain,
            origin: None,
        })
    }

    /// `m = qN`, the number of decision variables.
    pub fn m(&self) -> usize {
        self.q * self.horizon
    }

    pub fn is_linear(&self) -> bool {
        matches!(self.dynamics, Dynamics::Linear { .. })
    }

    /// The dynamics as a compositional graph (linear maps become one affine
    /// node per state).
    pub fn dynamics_graph(&self) -> Result<CompGraph> {
        match &self.dynamics {
            Dynamics::Linear { a, b } => crate::compgraph::library::linear_map(a, b, self.domain.radius),
            Dynamics::Graph(g) => Ok(g.clone()),
        }
    }

    pub fn control<'a>(&self, u: &'a [f64], k: usize) -> &'a [f64] {
        &u[k * self.q..(k + 1) * self.q]
    }

    fn check_u(&self, u: &[f64]) -> Result<()> {
        if u.len() != self.m() {
            return Err(Error::InvalidInstance(format!("U has length {}, expected {}", u.len(), self.m())));
        }
        let r = self.domain.radius;
        for (j, v) in u.iter().enumerate() {
            if v.abs() > r * (1.0 + crate::compgraph::DOMAIN_TOL) {
                return Err(Error::domain(format!("control coordinate {j}"), *v, r));
            }
        }
        Ok(())
    }

    fn check_state(&self, x: &[f64], k: usize) -> Result<()> {
        let r = self.domain.radius;
        for v in x {
            if !(v.abs() <= r * (1.0 + crate::compgraph::DOMAIN_TOL)) {
                return Err(Error::domain(format!("state at stage {k}"), *v, r));
            }
        }
        Ok(())
    }

    /// One transition, with node-domain checks for graph dynamics when
    /// `check` is set.
    pub fn step(&self, x: &[f64], u: &[f64], check: bool) -> Result<Vec<f64>> {
        match &self.dynamics {
            Dynamics::Linear { a, b } => {
                let next = a * DVector::from_column_slice(x) + b * DVector::from_column_slice(u);
                Ok(next.as_slice().to_vec())
            }
            Dynamics::Graph(g) => {
                let z: Vec<f64> = x.iter().chain(u).copied().collect();
                if check {
                    g.eval(&z)
                } else {
                    Ok(g.eval_unchecked(&z))
                }
            }
        }
    }

    /// Recursive state sequence `x_0 .. x_N` without any domain checks.
    pub fn states_unchecked(&self, x: &[f64], u: &[f64]) -> Vec<Vec<f64>> {
        let mut states = vec![x.to_vec()];
        for k in 0..self.horizon {
            let next = self.step(&states[k], self.control(u, k), false).expect("dimensions validated");
            states.push(next);
        }
        states
    }

    fn states(&self, x: &[f64], u: &[f64], check: bool) -> Result<Vec<Vec<f64>>> {
        if x.len() != self.n {
            return Err(Error::InvalidInstance(format!("x has length {}, expected {}", x.len(), self.n)));
        }
        if check {
            self.check_u(u)?;
            self.check_state(x, 0)?;
        }
        let mut states = vec![x.to_vec()];
        for k in 0..self.horizon {
            let next = self.step(&states[k], self.control(u, k), check)?;
            if check {
                self.check_state(&next, k + 1)?;
            }
            states.push(next);
        }
        Ok(states)
    }

    fn cost_of(&self, states: &[Vec<f64>], u: &[f64], check: bool) -> Result<f64> {
        let ev = |g: &CompGraph, z: &[f64]| -> Result<f64> {
            Ok(if check { g.eval(z)?[0] } else { g.eval_unchecked(z)[0] })
        };
        let mut j = ev(&self.terminal_cost, &states[self.horizon])?;
        if let StageCost::Separated { l1, l2 } = &self.stage_cost {
            for (k, state) in states[..self.horizon].iter().enumerate() {
                j += ev(l1, state)? + ev(l2, self.control(u, k))?;
            }
        }
        Ok(j)
    }

    /// States and cost `J(x, U)`.
    pub fn rollout(&self, x: &[f64], u: &[f64]) -> Result<Rollout> {
        let states = self.states(x, u, true)?;
        let cost = self.cost_of(&states, u, true)?;
        Ok(Rollout { states, cost })
    }

    pub fn cost(&self, x: &[f64], u: &[f64]) -> Result<f64> {
        Ok(self.rollout(x, u)?.cost)
    }

    /// Cost without domain checks, for probes outside the calibrated box.
    pub fn cost_unchecked(&self, x: &[f64], u: &[f64]) -> f64 {
        let states = self.states_unchecked(x, u);
        self.cost_of(&states, u, false).expect("unchecked evaluation cannot fail")
    }

    fn step_jacobian(&self, x: &[f64], u: &[f64], check: bool) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        match &self.dynamics {
            Dynamics::Linear { a, b } => Ok((a.clone(), b.clone())),
            Dynamics::Graph(g) => {
                let z: Vec<f64> = x.iter().chain(u).copied().collect();
                let jac = if check { g.jacobian(&z)? } else { g.jacobian_unchecked(&z) };
                Ok((jac.columns(0, self.n).into_owned(), jac.columns(self.n, self.q).into_owned()))
            }
        }
    }

    fn gradient(&self, x: &[f64], u: &[f64], check: bool) -> Result<Vec<f64>> {
        let states = self.states(x, u, check)?;
        let grad_of = |g: &CompGraph, z: &[f64]| -> Result<Vec<f64>> {
            let j = if check { g.jacobian(z)? } else { g.jacobian_unchecked(z) };
            Ok(j.row(0).iter().copied().collect())
        };
        let mut lambda = DVector::from_vec(grad_of(&self.terminal_cost, &states[self.horizon])?);
        let mut out = vec![0.0; self.m()];
        for k in (0..self.horizon).rev() {
            let uk = self.control(u, k);
            let (ak, bk) = self.step_jacobian(&states[k], uk, check)?;
            let mut gu = bk.tr_mul(&lambda);
            let mut next = ak.tr_mul(&lambda);
            if let StageCost::Separated { l1, l2 } = &self.stage_cost {
                gu += DVector::from_vec(grad_of(l2, uk)?);
                next += DVector::from_vec(grad_of(l1, &states[k])?);
            }
            out[k * self.q..(k + 1) * self.q].copy_from_slice(gu.as_slice());
            lambda = next;
        }
        Ok(out)
    }

    fn hessian(&self, x: &[f64], u: &[f64], check: bool) -> Result<DMatrix<f64>> {
        match &self.dynamics {
            Dynamics::Linear { a, b } => {
                let states = self.states(x, u, check)?;
                let mats = build_rollout_matrices(a, b, self.horizon);
                let hess_of = |g: &CompGraph, z: &[f64]| -> Result<DMatrix<f64>> {
                    if check {
                        Ok(g.hessians(z)?.swap_remove(0))
                    } else {
                        Ok(g.hessians_unchecked(z).swap_remove(0))
                    }
                };
                let m = self.m();
                let cn = &mats.c_blocks[self.horizon];
                let mut h = cn.transpose() * hess_of(&self.terminal_cost, &states[self.horizon])? * cn;
                if let StageCost::Separated { l1, l2 } = &self.stage_cost {
                    #[allow(clippy::needless_range_loop)]
                    for k in 0..self.horizon {
                        let d2 = hess_of(l2, self.control(u, k))?;
                        let mut blk = h.view_mut((k * self.q, k * self.q), (self.q, self.q));
                        blk += d2;
                        if k > 0 {
                            let ck = &mats.c_blocks[k];
                            h += ck.transpose() * hess_of(l1, &states[k])? * ck;
                        }
                    }
                }
                debug_assert_eq!(h.shape(), (m, m));
                Ok(h)
            }
            Dynamics::Graph(_) => {
                let m = self.m();
                let mut h = DMatrix::zeros(m, m);
                let mut up = u.to_vec();
                let mut dn = u.to_vec();
                for j in 0..m {
                    up[j] = u[j] + FD_HESSIAN_STEP;
                    dn[j] = u[j] - FD_HESSIAN_STEP;
                    let gp = self.gradient(x, &up, check)?;
                    let gm = self.gradient(x, &dn, check)?;
                    for i in 0..m {
                        h[(i, j)] = (gp[i] - gm[i]) / (2.0 * FD_HESSIAN_STEP);
                    }
                    up[j] = u[j];
                    dn[j] = u[j];
                }
                Ok((&h + h.transpose()) * 0.5)
            }
        }
    }
}

/// `A^k` and `C^(k)` for `k = 0..=N`.
#[derive(Debug, Clone, PartialEq)]
pub struct RolloutMatrices {
    pub a_powers: Vec<DMatrix<f64>>,
    /// `C^(k)` is `n x qN`; block `j < k` holds `A^(k-1-j) B`.
    pub c_blocks: Vec<DMatrix<f64>>,
}

impl RolloutMatrices {
    /// `A^k x + C^(k) U`
    pub fn state(&self, k: usize, x: &[f64], u: &[f64]) -> Vec<f64> {
        let s = &self.a_powers[k] * DVector::from_column_slice(x) + &self.c_blocks[k] * DVector::from_column_slice(u);
        s.as_slice().to_vec()
    }
}

pub fn build_rollout_matrices(a: &DMatrix<f64>, b: &DMatrix<f64>, horizon: usize) -> RolloutMatrices {
    let n = a.nrows();
    let q = b.ncols();
    let mut a_powers = vec![DMatrix::identity(n, n)];
    for k in 1..=horizon {
        a_powers.push(a * &a_powers[k - 1]);
    }
    let mut c_blocks = Vec::with_capacity(horizon + 1);
    for k in 0..=horizon {
        let mut c = DMatrix::zeros(n, q * horizon);
        for j in 0..k {
            c.view_mut((0, j * q), (n, q)).copy_from(&(&a_powers[k - 1 - j] * b));
        }
        c_blocks.push(c);
    }
    RolloutMatrices { a_powers, c_blocks }
}

pub fn rollout(inst: &OcpInstance, x: &[f64], u: &[f64]) -> Result<Rollout> {
    inst.rollout(x, u)
}

/// `dJ/dU` by the adjoint recursion.
pub fn grad_j(inst: &OcpInstance, x: &[f64], u: &[f64]) -> Result<Vec<f64>> {
    inst.gradient(x, u, true)
}

/// Gradient without domain checks.
pub fn grad_j_unchecked(inst: &OcpInstance, x: &[f64], u: &[f64]) -> Vec<f64> {
    inst.gradient(x, u, false).expect("unchecked gradient cannot fail")
}

/// `d^2J/dU^2`: analytic assembly for linear dynamics, central differences of
/// the gradient otherwise.
pub fn hess_j(inst: &OcpInstance, x: &[f64], u: &[f64]) -> Result<DMatrix<f64>> {
    inst.hessian(x, u, true)
}

pub fn hess_j_unchecked(inst: &OcpInstance, x: &[f64], u: &[f64]) -> DMatrix<f64> {
    inst.hessian(x, u, false).expect("unchecked Hessian cannot fail")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    StrictlyConvex,
    ConvexOnly,
    NotCertified,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvexityCertificate {
    pub verdict: Verdict,
    pub min_eig: f64,
    pub samples: usize,
    pub witness_x: Vec<f64>,
    pub witness_u: Vec<f64>,
    pub scope: String,
}

pub fn min_eigenvalue(h: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new((h + h.transpose()) * 0.5).eigenvalues.min()
}

/// Samples `(x, U)` over `Omega x B_2gamma(U0)` and classifies the smallest
/// Hessian eigenvalue.
pub fn certify_convexity(inst: &OcpInstance, n_samples: usize) -> ConvexityCertificate {
    let n_samples = n_samples.max(1);
    let xs = inst.domain.omega.samples(n_samples, 0x00ce_0001);
    let us = sampling::ball_samples(&inst.domain.u0, 2.0 * inst.domain.gamma, n_samples, 0xce_0002);
    let mut min_eig = f64::INFINITY;
    let mut witness = (xs[0].clone(), us[0].clone());
    let mut count = 0;
    for i in 0..n_samples {
        let x = &xs[i % xs.len()];
        let u = &us[i % us.len()];
        let Ok(h) = hess_j(inst, x, u) else { continue };
        count += 1;
        let e = min_eigenvalue(&h);
        if e < min_eig {
            min_eig = e;
            witness = (x.clone(), u.clone());
        }
    }
    let verdict = if count == 0 {
        Verdict::NotCertified
    } else if min_eig > CERT_THRESHOLD {
        Verdict::StrictlyConvex
    } else if min_eig > -CERT_THRESHOLD {
        Verdict::ConvexOnly
    } else {
        Verdict::NotCertified
    };
    ConvexityCertificate {
        verdict,
        min_eig: if count == 0 { f64::NAN } else { min_eig },
        samples: count,
        witness_x: witness.0,
        witness_u: witness.1,
        scope: format!("sampled over Omega x B_2gamma(U0) at {count} points; a numeric check, not a proof"),
    }
}
