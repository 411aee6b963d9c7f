//! Barrier Newton method for `min −log det P(v)  s.t.  G v ≤ h`, where the
//! symmetric matrix `P(v) = Σ_k v_k B_k` depends linearly on the leading
//! variables.

use nalgebra::{DMatrix, DVector};

use super::{SolveReport, SolveStatus};
use crate::error::{check_dim, Error, Result};

#[derive(Clone, Debug)]
pub struct MaxDetProblem {
    /// Size of `P`.
    pub dim: usize,
    /// `B_k` for the first `shape_basis.len()` variables.
    pub shape_basis: Vec<DMatrix<f64>>,
    pub n_vars: usize,
    pub g: DMatrix<f64>,
    pub h: DVector<f64>,
}

#[derive(Clone, Debug)]
pub struct MaxDetSolution {
    pub report: SolveReport,
    pub shape: DMatrix<f64>,
    pub vars: DVector<f64>,
}

const BARRIER_GROWTH: f64 = 20.0;
const MAX_NEWTON: usize = 2_000;
/// Inner loop stops once half the squared Newton decrement drops below this.
const DECREMENT_TOL: f64 = 1e-12;
/// Newton steps per centering before the point is accepted as centered.
const MAX_CENTERING: usize = 100;

impl MaxDetProblem {
    fn validate(&self) -> Result<()> {
        if self.shape_basis.len() > self.n_vars {
            return Err(Error::InvalidParameter("more shape variables than variables".into()));
        }
        for b in &self.shape_basis {
            check_dim(self.dim, b.nrows())?;
            check_dim(self.dim, b.ncols())?;
        }
        check_dim(self.n_vars, self.g.ncols())?;
        check_dim(self.g.nrows(), self.h.len())?;
        Ok(())
    }

    pub fn shape_at(&self, v: &DVector<f64>) -> DMatrix<f64> {
        let mut p = DMatrix::zeros(self.dim, self.dim);
        for (k, b) in self.shape_basis.iter().enumerate() {
            p += b * v[k];
        }
        p
    }

    fn slacks(&self, v: &DVector<f64>) -> DVector<f64> {
        &self.h - &self.g * v
    }
}

/// Barrier value `t·(−log det P) − Σ log s`, or `None` outside the domain.
fn barrier(problem: &MaxDetProblem, v: &DVector<f64>, t: f64) -> Option<f64> {
    let s = problem.slacks(v);
    if s.iter().any(|x| *x <= 0.0) {
        return None;
    }
    let chol = problem.shape_at(v).cholesky()?;
    let logdet: f64 = 2.0 * chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>();
    Some(-t * logdet - s.iter().map(|x| x.ln()).sum::<f64>())
}

/// Solves the problem from a strictly feasible `start`. The returned
/// duality gap is `m/t` for the final barrier weight `t`.
pub fn solve_maxdet(problem: &MaxDetProblem, start: &DVector<f64>, tol: f64) -> Result<MaxDetSolution> {
    problem.validate()?;
    check_dim(problem.n_vars, start.len())?;
    if barrier(problem, start, 1.0).is_none() {
        return Err(Error::InvalidParameter("maxdet start point is not strictly feasible".into()));
    }
    let m = problem.g.nrows().max(1) as f64;
    let nv = problem.n_vars;
    let ns = problem.shape_basis.len();
    let mut v = start.clone();
    let mut t = 1.0;
    let mut newton_steps = 0;
    let mut failed = false;
    // barrier weight of the last completed centering
    let mut centered_t = 0.0;
    loop {
        // centering
        let mut inner = 0;
        loop {
            if newton_steps >= MAX_NEWTON {
                failed = true;
                break;
            }
            let p = problem.shape_at(&v);
            let pinv = p.cholesky().expect("feasible iterate").inverse();
            let s = problem.slacks(&v);
            let inv_s = s.map(|x| 1.0 / x);
            let mut grad = problem.g.transpose() * &inv_s;
            let scaled = DMatrix::from_fn(problem.g.nrows(), nv, |i, j| problem.g[(i, j)] * inv_s[i]);
            let mut hess = scaled.transpose() * &scaled;
            let pb: Vec<DMatrix<f64>> = problem.shape_basis.iter().map(|b| &pinv * b).collect();
            for k in 0..ns {
                grad[k] -= t * pb[k].trace();
                for l in k..ns {
                    let v_kl = t * pb[k].component_mul(&pb[l].transpose()).sum();
                    hess[(k, l)] += v_kl;
                    if l != k {
                        hess[(l, k)] += v_kl;
                    }
                }
            }
            let ridge = 1e-13 * hess.diagonal().amax();
            let regularized = &hess + DMatrix::identity(nv, nv) * ridge;
            let step = match hess.clone().cholesky().or_else(|| regularized.cholesky()) {
                Some(c) => c.solve(&(-&grad)),
                None => match hess.lu().solve(&(-&grad)) {
                    Some(x) => x,
                    None => {
                        failed = true;
                        break;
                    }
                },
            };
            let decrement = -grad.dot(&step);
            if decrement / 2.0 <= DECREMENT_TOL || inner >= MAX_CENTERING {
                break;
            }
            inner += 1;
            let f0 = barrier(problem, &v, t).expect("feasible iterate");
            let mut alpha = 1.0;
            let mut moved = false;
            while alpha > 1e-12 {
                let cand = &v + &step * alpha;
                if let Some(f) = barrier(problem, &cand, t) {
                    if f <= f0 - 0.01 * alpha * decrement {
                        // rounding-level progress means the point is centered
                        moved = f0 - f > 1e-14 * f0.abs().max(1.0);
                        v = cand;
                        break;
                    }
                }
                alpha *= 0.5;
            }
            newton_steps += 1;
            if !moved {
                break;
            }
        }
        if failed {
            break;
        }
        centered_t = t;
        if m / t <= tol {
            break;
        }
        t *= BARRIER_GROWTH;
    }
    let shape = problem.shape_at(&v);
    let shape = (&shape + shape.transpose()) * 0.5;
    let logdet = shape
        .clone()
        .cholesky()
        .map(|c| 2.0 * c.l().diagonal().iter().map(|d| d.ln()).sum::<f64>())
        .unwrap_or(f64::NEG_INFINITY);
    let s = problem.slacks(&v);
    let residual = s.iter().map(|x| (-x).max(0.0)).fold(0.0, f64::max);
    let gap = if centered_t > 0.0 { m / centered_t } else { f64::INFINITY };
    let status = if !logdet.is_finite() || (failed && gap > tol) {
        SolveStatus::NumericalFailure
    } else if gap > tol {
        SolveStatus::MaxIterations
    } else {
        SolveStatus::Optimal
    };
    Ok(MaxDetSolution {
        report: SolveReport {
            status,
            objective: -logdet,
            solution: v.iter().copied().collect(),
            residual,
            gap,
            iterations: newton_steps,
        },
        shape,
        vars: v,
    })
}

/// Symmetric unit matrices for the upper triangle of an `n × n` matrix, in
/// row-major order.
pub fn symmetric_basis(n: usize) -> Vec<DMatrix<f64>> {
    let mut out = Vec::with_capacity(n * (n + 1) / 2);
    for k in 0..n {
        for l in k..n {
            let mut b = DMatrix::zeros(n, n);
            b[(k, l)] = 1.0;
            b[(l, k)] = 1.0;
            out.push(b);
        }
    }
    out
}
