//! Two-phase dense tableau simplex for `min cᵀx  s.t.  A x ≤ b,  E x = f`
//! with free variables.

use nalgebra::{DMatrix, DVector};

use super::{SolveReport, SolveStatus};
use crate::error::{check_dim, Error, Result};

#[derive(Clone, Debug)]
pub struct LinearProgram {
    pub objective: DVector<f64>,
    pub a_ub: DMatrix<f64>,
    pub b_ub: DVector<f64>,
    pub a_eq: DMatrix<f64>,
    pub b_eq: DVector<f64>,
}

impl LinearProgram {
    pub fn new(objective: DVector<f64>, a_ub: DMatrix<f64>, b_ub: DVector<f64>) -> Self {
        let n = objective.len();
        Self {
            objective,
            a_ub,
            b_ub,
            a_eq: DMatrix::zeros(0, n),
            b_eq: DVector::zeros(0),
        }
    }

    pub fn with_equalities(mut self, a_eq: DMatrix<f64>, b_eq: DVector<f64>) -> Self {
        self.a_eq = a_eq;
        self.b_eq = b_eq;
        self
    }

    pub fn nvars(&self) -> usize {
        self.objective.len()
    }

    fn validate(&self) -> Result<()> {
        let n = self.nvars();
        check_dim(n, self.a_ub.ncols())?;
        check_dim(self.a_ub.nrows(), self.b_ub.len())?;
        check_dim(n, self.a_eq.ncols())?;
        check_dim(self.a_eq.nrows(), self.b_eq.len())?;
        let finite = self
            .objective
            .iter()
            .chain(self.a_ub.iter())
            .chain(self.b_ub.iter())
            .chain(self.a_eq.iter())
            .chain(self.b_eq.iter())
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidParameter("non-finite LP data".into()));
        }
        Ok(())
    }

    /// Largest scaled violation of the constraints at `x`.
    pub fn residual(&self, x: &DVector<f64>) -> f64 {
        let ub = (&self.a_ub * x - &self.b_ub)
            .iter()
            .zip(self.b_ub.iter())
            .map(|(r, b)| r.max(0.0) / (1.0 + b.abs()))
            .fold(0.0, f64::max);
        let eq = (&self.a_eq * x - &self.b_eq)
            .iter()
            .zip(self.b_eq.iter())
            .map(|(r, b)| r.abs() / (1.0 + b.abs()))
            .fold(0.0, f64::max);
        ub.max(eq)
    }
}

const PIVOT_TOL: f64 = 1e-11;
const MAX_PIVOTS: usize = 50_000;
/// Switch from Dantzig's rule to Bland's rule after this many pivots.
const BLAND_AFTER: usize = 5_000;

struct Tableau {
    t: DMatrix<f64>,
    basis: Vec<usize>,
    rows: usize,
    rhs: usize,
}

enum Outcome {
    Optimal,
    Unbounded,
    IterationLimit,
}

impl Tableau {
    fn pivot(&mut self, r: usize, c: usize) {
        let p = self.t[(r, c)];
        let cols = self.t.ncols();
        for j in 0..cols {
            self.t[(r, j)] /= p;
        }
        for i in 0..self.t.nrows() {
            if i == r {
                continue;
            }
            let f = self.t[(i, c)];
            if f != 0.0 {
                for j in 0..cols {
                    let v = self.t[(r, j)];
                    self.t[(i, j)] -= f * v;
                }
            }
        }
        self.basis[r] = c;
    }

    /// Minimises the objective row (last row); `allowed(j)` gates entering
    /// columns.
    fn run(&mut self, allowed: &dyn Fn(usize) -> bool, pivots: &mut usize, tol: f64) -> Outcome {
        let obj = self.rows;
        loop {
            if *pivots >= MAX_PIVOTS {
                return Outcome::IterationLimit;
            }
            let bland = *pivots >= BLAND_AFTER;
            let mut enter = None;
            let mut best = -tol;
            for j in 0..self.rhs {
                if !allowed(j) {
                    continue;
                }
                let rc = self.t[(obj, j)];
                if rc < best {
                    enter = Some(j);
                    if bland {
                        break;
                    }
                    best = rc;
                }
            }
            let Some(c) = enter else {
                return Outcome::Optimal;
            };
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..self.rows {
                let a = self.t[(i, c)];
                if a > PIVOT_TOL {
                    let ratio = self.t[(i, self.rhs)] / a;
                    match leave {
                        None => leave = Some((i, ratio)),
                        Some((li, lr)) => {
                            if ratio < lr - 1e-14
                                || (ratio <= lr + 1e-14 && self.basis[i] < self.basis[li])
                            {
                                leave = Some((i, ratio));
                            }
                        }
                    }
                }
            }
            let Some((r, _)) = leave else {
                return Outcome::Unbounded;
            };
            self.pivot(r, c);
            *pivots += 1;
        }
    }
}

/// Solves the program by the two-phase simplex method. Infeasible and
/// unbounded programs are reported through the status, not as errors.
pub fn solve_lp(lp: &LinearProgram, tol: f64) -> Result<SolveReport> {
    lp.validate()?;
    let n = lp.nvars();
    let m_ub = lp.a_ub.nrows();
    let m_eq = lp.a_eq.nrows();
    let m = m_ub + m_eq;
    // columns: x⁺ (n) | x⁻ (n) | slack (m_ub) | artificial (m) | rhs
    let art0 = 2 * n + m_ub;
    let rhs = art0 + m;
    let mut t = DMatrix::zeros(m + 1, rhs + 1);
    let mut flipped = vec![false; m];
    for i in 0..m {
        let (row, b) = if i < m_ub {
            (lp.a_ub.row(i), lp.b_ub[i])
        } else {
            (lp.a_eq.row(i - m_ub), lp.b_eq[i - m_ub])
        };
        let s = if b < 0.0 { -1.0 } else { 1.0 };
        flipped[i] = b < 0.0;
        for j in 0..n {
            t[(i, j)] = s * row[j];
            t[(i, n + j)] = -s * row[j];
        }
        if i < m_ub {
            t[(i, 2 * n + i)] = s;
        }
        t[(i, art0 + i)] = 1.0;
        t[(i, rhs)] = s * b;
    }
    // phase 1 objective: Σ artificials, priced out against the initial basis
    for i in 0..m {
        for j in 0..=rhs {
            if j < art0 || j == rhs {
                t[(m, j)] -= t[(i, j)];
            }
        }
    }
    let mut tab = Tableau {
        t,
        basis: (art0..art0 + m).collect(),
        rows: m,
        rhs,
    };
    let mut pivots = 0;
    let scale = 1.0 + lp.b_ub.amax().max(lp.b_eq.amax());
    let report = |status, pivots| SolveReport {
        status,
        objective: f64::NAN,
        solution: Vec::new(),
        residual: f64::NAN,
        gap: f64::NAN,
        iterations: pivots,
    };
    match tab.run(&|j| j < art0, &mut pivots, 1e-12) {
        Outcome::IterationLimit => return Ok(report(SolveStatus::MaxIterations, pivots)),
        Outcome::Unbounded => return Ok(report(SolveStatus::NumericalFailure, pivots)),
        Outcome::Optimal => {}
    }
    if -tab.t[(m, rhs)] > tol.max(1e-9) * scale {
        return Ok(report(SolveStatus::Infeasible, pivots));
    }
    // drive zero-level artificials out of the basis where possible
    for i in 0..m {
        if tab.basis[i] >= art0 {
            if let Some(c) = (0..art0).find(|&j| tab.t[(i, j)].abs() > 1e-9) {
                tab.pivot(i, c);
                pivots += 1;
            }
        }
    }
    // phase 2 objective row
    let cost = |j: usize| -> f64 {
        if j < n {
            lp.objective[j]
        } else if j < 2 * n {
            -lp.objective[j - n]
        } else {
            0.0
        }
    };
    for j in 0..=rhs {
        tab.t[(m, j)] = if j == rhs { 0.0 } else { cost(j) };
    }
    for i in 0..m {
        let cb = if tab.basis[i] < rhs { cost(tab.basis[i]) } else { 0.0 };
        if cb != 0.0 {
            for j in 0..=rhs {
                let v = tab.t[(i, j)];
                tab.t[(m, j)] -= cb * v;
            }
        }
    }
    let rc_tol = 1e-10 * (1.0 + lp.objective.amax());
    match tab.run(&|j| j < art0, &mut pivots, rc_tol) {
        Outcome::IterationLimit => return Ok(report(SolveStatus::MaxIterations, pivots)),
        Outcome::Unbounded => return Ok(report(SolveStatus::Unbounded, pivots)),
        Outcome::Optimal => {}
    }
    let mut x = DVector::zeros(n);
    for (i, &b) in tab.basis.iter().enumerate() {
        let v = tab.t[(i, rhs)];
        if b < n {
            x[b] += v;
        } else if b < 2 * n {
            x[b - n] -= v;
        }
    }
    let objective = lp.objective.dot(&x);
    // duals from the reduced costs of the artificial columns
    let mut dual_obj = 0.0;
    for i in 0..m {
        let y = -tab.t[(m, art0 + i)];
        let y = if flipped[i] { -y } else { y };
        let b = if i < m_ub { lp.b_ub[i] } else { lp.b_eq[i - m_ub] };
        dual_obj += y * b;
    }
    let gap = (objective - dual_obj).abs() / (1.0 + objective.abs());
    let residual = lp.residual(&x);
    let status = if gap <= tol.max(1e-9) && residual <= 1e-7 {
        SolveStatus::Optimal
    } else {
        SolveStatus::NumericalFailure
    };
    Ok(SolveReport {
        status,
        objective,
        solution: x.iter().copied().collect(),
        residual,
        gap,
        iterations: pivots,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn one_dimensional_lower_bound() {
        // min x s.t. x ≥ 3
        let lp = LinearProgram::new(
            DVector::from_vec(vec![1.0]),
            DMatrix::from_row_slice(1, 1, &[-1.0]),
            DVector::from_vec(vec![-3.0]),
        );
        let r = solve_lp(&lp, 1e-9).unwrap();
        assert_eq!(r.status, SolveStatus::Optimal);
        assert!((r.solution[0] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn simplex_facet() {
        let lp = LinearProgram::new(
            DVector::from_vec(vec![-1.0, -1.0]),
            DMatrix::from_row_slice(3, 2, &[-1.0, 0.0, 0.0, -1.0, 1.0, 1.0]),
            DVector::from_vec(vec![0.0, 0.0, 1.0]),
        );
        let r = solve_lp(&lp, 1e-9).unwrap();
        assert_eq!(r.status, SolveStatus::Optimal);
        assert!((r.objective + 1.0).abs() < 1e-12);
        assert!((r.solution[0] + r.solution[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn infeasible_and_unbounded() {
        // x ≤ 1, x ≥ 2
        let lp = LinearProgram::new(
            DVector::from_vec(vec![1.0]),
            DMatrix::from_row_slice(2, 1, &[1.0, -1.0]),
            DVector::from_vec(vec![1.0, -2.0]),
        );
        assert_eq!(solve_lp(&lp, 1e-9).unwrap().status, SolveStatus::Infeasible);
        // min -x s.t. x ≥ 0
        let lp = LinearProgram::new(
            DVector::from_vec(vec![-1.0]),
            DMatrix::from_row_slice(1, 1, &[-1.0]),
            DVector::from_vec(vec![0.0]),
        );
        assert_eq!(solve_lp(&lp, 1e-9).unwrap().status, SolveStatus::Unbounded);
    }

    #[test]
    fn equality_constraints() {
        // min x + 2y s.t. x + y = 1, x ≤ 0.25
        let lp = LinearProgram::new(
            DVector::from_vec(vec![1.0, 2.0]),
            DMatrix::from_row_slice(1, 2, &[1.0, 0.0]),
            DVector::from_vec(vec![0.25]),
        )
        .with_equalities(
            DMatrix::from_row_slice(1, 2, &[1.0, 1.0]),
            DVector::from_vec(vec![1.0]),
        );
        let r = solve_lp(&lp, 1e-9).unwrap();
        assert!(r.is_optimal());
        assert!((r.objective - 1.75).abs() < 1e-12);
    }

    /// Minimum over all feasible vertices, by enumerating every choice of
    /// `n` active constraints.
    fn vertex_enumeration(a: &DMatrix<f64>, b: &DVector<f64>, c: &DVector<f64>) -> f64 {
        let (m, n) = a.shape();
        let mut best = f64::INFINITY;
        let mut idx: Vec<usize> = (0..n).collect();
        loop {
            let sub = DMatrix::from_fn(n, n, |i, j| a[(idx[i], j)]);
            let rhs = DVector::from_fn(n, |i, _| b[idx[i]]);
            if let Some(x) = sub.lu().solve(&rhs) {
                if (a * &x - b).iter().all(|r| *r <= 1e-9) {
                    best = best.min(c.dot(&x));
                }
            }
            // next combination
            let mut k = n;
            while k > 0 && idx[k - 1] == m - n + k - 1 {
                k -= 1;
            }
            if k == 0 {
                break;
            }
            idx[k - 1] += 1;
            for j in k..n {
                idx[j] = idx[j - 1] + 1;
            }
        }
        best
    }

    #[test]
    fn random_programs_match_vertex_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let n = 5;
            let mut rows = Vec::new();
            let mut rhs = Vec::new();
            for _ in 0..12 {
                for _ in 0..n {
                    rows.push(rng.gen_range(-1.0..1.0));
                }
                rhs.push(rng.gen_range(0.1..2.0));
            }
            // box rows keep the program bounded
            for j in 0..n {
                for s in [1.0, -1.0] {
                    for k in 0..n {
                        rows.push(if k == j { s } else { 0.0 });
                    }
                    rhs.push(10.0);
                }
            }
            let m = rhs.len();
            let a = DMatrix::from_row_slice(m, n, &rows);
            let b = DVector::from_vec(rhs);
            let c = DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));
            let want = vertex_enumeration(&a, &b, &c);
            let r = solve_lp(&LinearProgram::new(c, a, b), 1e-10).unwrap();
            assert!(r.is_optimal());
            assert!((r.objective - want).abs() < 1e-8, "{} vs {}", r.objective, want);
        }
    }
}
