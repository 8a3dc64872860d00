//! Ground-truth minimizers `U*(x)`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::compgraph::CompGraph;
use crate::error::{Error, Result};
use crate::ocp::{grad_j_unchecked, hess_j_unchecked, Dynamics, OcpInstance, StageCost};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OracleMode {
    ClosedFormLq,
    NumericConvex,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleSolver {
    pub mode: OracleMode,
    /// Gradient-norm stopping threshold for the numeric solver.
    pub tolerance: f64,
    pub max_iters: usize,
    /// Pick the minimum-norm minimizer when several exist.
    pub min_norm: bool,
}

impl Default for OracleSolver {
    fn default() -> Self {
        Self::lq()
    }
}

/// Residual allowed in the normal equations of the closed form.
pub const LQ_RESIDUAL: f64 = 1e-10;

impl OracleSolver {
    pub fn lq() -> Self {
        OracleSolver {
            mode: OracleMode::ClosedFormLq,
            tolerance: 1e-12,
            max_iters: 1_000_000,
            min_norm: true,
        }
    }

    pub fn numeric() -> Self {
        OracleSolver {
            mode: OracleMode::NumericConvex,
            ..Self::lq()
        }
    }

    /// Closed form when the instance is linear-quadratic, numeric otherwise.
    pub fn auto(inst: &OcpInstance) -> Self {
        if check_quadratic(inst).is_ok() {
            Self::lq()
        } else {
            Self::numeric()
        }
    }

    pub fn solve(&self, inst: &OcpInstance, x: &[f64]) -> Result<Vec<f64>> {
        match self.mode {
            OracleMode::ClosedFormLq => self.solve_lq(inst, x),
            OracleMode::NumericConvex => self.solve_numeric(inst, x),
        }
    }

    /// Minimizes `J(x, U) = U'HU/2 + c'U + const` through the pseudo-inverse
    /// of `H`. Extended instances are solved through their origin.
    pub fn solve_lq(&self, inst: &OcpInstance, x: &[f64]) -> Result<Vec<f64>> {
        if let Some(origin) = &inst.origin {
            return self.solve_lq(origin, &x[..origin.n]);
        }
        check_quadratic(inst)?;
        let m = inst.m();
        let zero = vec![0.0; m];
        let h = hess_j_unchecked(inst, x, &zero);
        let c = DVector::from_vec(grad_j_unchecked(inst, x, &zero));
        let h = (&h + h.transpose()) * 0.5;
        let svd = h.clone().svd(true, true);
        let smax = svd.singular_values.max();
        let eps = if self.min_norm { 1e-12 * smax.max(f64::MIN_POSITIVE) } else { 0.0 };
        let u = svd
            .solve(&(-&c), eps)
            .map_err(|e| Error::NotQuadratic(format!("pseudo-inverse failed: {e}")))?;
        let residual = (&h * &u + &c).norm();
        let scale = 1.0 + c.norm() + smax * u.norm();
        if residual > LQ_RESIDUAL * scale {
            return Err(Error::NotQuadratic(format!(
                "normal equations inconsistent (residual {residual:.3e}); cost is unbounded below"
            )));
        }
        Ok(u.as_slice().to_vec())
    }

    pub fn solve_numeric(&self, inst: &OcpInstance, x: &[f64]) -> Result<Vec<f64>> {
        self.solve_numeric_from(inst, x, &inst.domain.u0)
    }

    /// Gradient descent with step `1 / L`, `L` the spectral norm of the
    /// Hessian at the start (halved on any cost increase).
    pub fn solve_numeric_from(&self, inst: &OcpInstance, x: &[f64], start: &[f64]) -> Result<Vec<f64>> {
        let mut u = start.to_vec();
        let mut g = grad_j_unchecked(inst, x, &u);
        let mut gnorm = crate::sampling::norm(&g);
        if gnorm <= self.tolerance {
            return Ok(u);
        }
        let l = crate::features::spectral_norm(&hess_j_unchecked(inst, x, &u)).max(1e-12);
        let mut step = 1.0 / l;
        let mut cost = inst.cost_unchecked(x, &u);
        for _ in 0..self.max_iters {
            let trial: Vec<f64> = u.iter().zip(&g).map(|(a, b)| a - step * b).collect();
            let trial_cost = inst.cost_unchecked(x, &trial);
            if trial_cost > cost + 1e-14 * cost.abs().max(1.0) {
                step *= 0.5;
                if step < 1e-30 {
                    break;
                }
                continue;
            }
            u = trial;
            cost = trial_cost;
            g = grad_j_unchecked(inst, x, &u);
            gnorm = crate::sampling::norm(&g);
            if gnorm <= self.tolerance {
                return Ok(u);
            }
        }
        Err(Error::NoConvergence {
            iters: self.max_iters,
            grad_norm: gnorm,
        })
    }
}

/// Degree of every node's output as a polynomial in the graph input, capped
/// at 3; `None` when some node is not polynomial.
fn max_degree(g: &CompGraph) -> Option<u32> {
    let mut deg = vec![0u32; g.nodes().len()];
    for &i in g.input_indices() {
        deg[i] = 1;
    }
    let mut worst = 0;
    for &i in g.order() {
        let Some(f) = &g.nodes()[i].func else { continue };
        let inner = g.preds(i).iter().map(|&p| deg[p]).max().unwrap_or(0);
        deg[i] = if f.is_linear() {
            inner
        } else if f.kind.is_quadratic() {
            (2 * inner).min(3)
        } else {
            return None;
        };
        worst = worst.max(deg[i]);
    }
    Some(worst)
}

/// Linear dynamics and costs of degree at most two.
pub fn check_quadratic(inst: &OcpInstance) -> Result<()> {
    if let Some(o) = &inst.origin {
        return check_quadratic(o);
    }
    if !matches!(inst.dynamics, Dynamics::Linear { .. }) {
        return Err(Error::NotQuadratic("dynamics are not linear".into()));
    }
    let mut graphs = vec![("terminal cost", &inst.terminal_cost)];
    if let StageCost::Separated { l1, l2 } = &inst.stage_cost {
        graphs.push(("l1", l1));
        graphs.push(("l2", l2));
    }
    for (name, g) in graphs {
        match max_degree(g) {
            Some(d) if d <= 2 => {}
            Some(_) => return Err(Error::NotQuadratic(format!("{name} composes quadratic nodes"))),
            None => return Err(Error::NotQuadratic(format!("{name} has a non-quadratic node"))),
        }
    }
    Ok(())
}

/// `H` and `c` of `J(x, U) = U'HU/2 + c'U + const` for a quadratic instance.
pub fn quadratic_model(inst: &OcpInstance, x: &[f64]) -> Result<(DMatrix<f64>, DVector<f64>)> {
    check_quadratic(inst)?;
    let zero = vec![0.0; inst.m()];
    Ok((hess_j_unchecked(inst, x, &zero), DVector::from_vec(grad_j_unchecked(inst, x, &zero))))
}
