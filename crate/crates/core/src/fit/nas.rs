//! Minimum-volume norm-based sets enclosing a point cloud.

use std::f64::consts::FRAC_PI_2;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::floor_width;
use crate::convex::maxdet::symmetric_basis;
use crate::convex::mvee::{mvee, DEFAULT_TOL as MVEE_TOL};
use crate::convex::{solve_lp, solve_maxdet, LinearProgram, MaxDetProblem};
use crate::error::{check_dim, Error, Result};
use crate::geometry::{NasSet, Norm};

/// How the parallelotope fit chooses its orientation.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Orientation {
    /// Search over rotations `U` for `P = S·U` with `S` symmetric positive
    /// definite, so any invertible shape is reachable.
    #[default]
    Search,
    /// Symmetric `P` only, in the input coordinates.
    Symmetric,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NasOptions {
    /// MVEE stopping tolerance.
    pub tol: f64,
    pub orientation: Orientation,
}

impl Default for NasOptions {
    fn default() -> Self {
        Self {
            tol: MVEE_TOL,
            orientation: Orientation::Search,
        }
    }
}

/// Duality-gap target of the barrier solves.
const MAXDET_GAP: f64 = 1e-9;
/// Directions thinner than this fraction of the widest are treated as flat.
const FLAT_RATIO: f64 = 1e-7;

fn check_points(points: &[DVector<f64>]) -> Result<usize> {
    let first = points
        .first()
        .ok_or_else(|| Error::InvalidParameter("no points".into()))?;
    let n = first.len();
    if n == 0 {
        return Err(Error::InvalidParameter("points must have at least one coordinate".into()));
    }
    for p in points {
        check_dim(n, p.len())?;
        if p.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("non-finite point".into()));
        }
    }
    Ok(n)
}

fn magnitude(points: &[DVector<f64>]) -> f64 {
    points.iter().map(|p| p.amax()).fold(0.0, f64::max)
}

/// Whitened coordinates `z = A(x − m)` of the non-flat directions, with the
/// flat directions kept aside at a floor width.
struct Frame {
    mean: DVector<f64>,
    /// `k × n`.
    active: DMatrix<f64>,
    /// `n × k`, a right inverse of `active`.
    lift: DMatrix<f64>,
    /// Unit flat directions with their half-widths and midpoints.
    flat: Vec<(DVector<f64>, f64, f64)>,
}

impl Frame {
    fn new(points: &[DVector<f64>], n: usize) -> Frame {
        let npts = points.len() as f64;
        let mut mean = DVector::zeros(n);
        for p in points {
            mean += p;
        }
        mean /= npts;
        let mut cov = DMatrix::zeros(n, n);
        for p in points {
            let d = p - &mean;
            cov.ger(1.0 / npts, &d, &d, 1.0);
        }
        let eig = cov.symmetric_eigen();
        let ranges: Vec<(f64, f64)> = (0..n)
            .map(|j| {
                let v = eig.eigenvectors.column(j);
                points.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
                    let s = v.dot(&(p - &mean));
                    (lo.min(s), hi.max(s))
                })
            })
            .collect();
        let half: Vec<f64> = ranges.iter().map(|(lo, hi)| 0.5 * (hi - lo)).collect();
        let widest = half.iter().copied().fold(0.0, f64::max);
        let floor = 0.5 * floor_width(magnitude(points));
        let threshold = floor.max(FLAT_RATIO * widest);
        let mut rows = Vec::new();
        let mut cols = Vec::new();
        let mut flat = Vec::new();
        for j in 0..n {
            let v = eig.eigenvectors.column(j).into_owned();
            let lam = eig.eigenvalues[j];
            if half[j] >= threshold && lam > 0.0 {
                let s = lam.sqrt();
                rows.push((&v / s).transpose());
                cols.push(&v * s);
            } else {
                let mid = 0.5 * (ranges[j].0 + ranges[j].1);
                flat.push((v, floor.max(2.0 * half[j]), mid));
            }
        }
        let active = if rows.is_empty() {
            DMatrix::zeros(0, n)
        } else {
            DMatrix::from_rows(&rows)
        };
        let lift = if cols.is_empty() {
            DMatrix::zeros(n, 0)
        } else {
            DMatrix::from_columns(&cols)
        };
        Frame {
            mean,
            active,
            lift,
            flat,
        }
    }

    fn rank(&self) -> usize {
        self.active.nrows()
    }

    fn local(&self, points: &[DVector<f64>]) -> Vec<DVector<f64>> {
        points.iter().map(|p| &self.active * (p - &self.mean)).collect()
    }

    /// Maps `{z : ‖P_z(z − c_z)‖ ≤ 1}` back, closing the flat directions at
    /// their floor widths, and rescales so every point is enclosed.
    fn assemble(
        &self,
        points: &[DVector<f64>],
        pz: &DMatrix<f64>,
        cz: &DVector<f64>,
        norm: Norm,
    ) -> Result<NasSet> {
        let n = self.mean.len();
        let k = self.rank();
        let mut g = DMatrix::zeros(n, n);
        if k > 0 {
            g.view_mut((0, 0), (k, n)).copy_from(&(pz * &self.active));
        }
        let mut center = &self.mean + &self.lift * cz;
        for (r, (v, w, mid)) in self.flat.iter().enumerate() {
            g.row_mut(k + r).copy_from(&(v.transpose() / *w));
            center += v * *mid;
        }
        let shape = match norm {
            Norm::L2 => {
                // √(GᵀG) = V Σ Vᵀ, without squaring the condition number
                let svd = g.svd(false, true);
                let vt = svd.v_t.expect("requested");
                vt.transpose() * DMatrix::from_diagonal(&svd.singular_values) * vt
            }
            Norm::Inf | Norm::L1 => g,
        };
        enclose(points, center, shape, norm)
    }
}

/// Builds the set and, if any point has gauge above one, shrinks `P` so
/// that all of them are inside.
fn enclose(points: &[DVector<f64>], center: DVector<f64>, shape: DMatrix<f64>, norm: Norm) -> Result<NasSet> {
    let set = NasSet::new(center.clone(), shape.clone(), norm)?;
    let worst = points.iter().map(|p| set.gauge(p.as_slice())).fold(0.0, f64::max);
    if worst > 1.0 {
        NasSet::new(center, shape / worst, norm)
    } else {
        Ok(set)
    }
}

/// Minimum-volume enclosing ellipsoid.
pub fn fit_ellipsoid(points: &[DVector<f64>], tol: f64) -> Result<NasSet> {
    let n = check_points(points)?;
    let frame = Frame::new(points, n);
    let k = frame.rank();
    if k == 0 {
        return frame.assemble(points, &DMatrix::zeros(0, 0), &DVector::zeros(0), Norm::L2);
    }
    let e = mvee(&frame.local(points), tol)?;
    frame.assemble(points, &e.shape, &e.center, Norm::L2)
}

/// Bounding box as a diagonal `p = ∞` set; zero-width coordinates get the
/// floor width.
pub fn fit_hyperrectangle(points: &[DVector<f64>]) -> Result<NasSet> {
    let n = check_points(points)?;
    let floor = floor_width(magnitude(points));
    let mut center = DVector::zeros(n);
    let mut diag = DVector::zeros(n);
    for j in 0..n {
        let (lo, hi) = points
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p[j]), hi.max(p[j])));
        center[j] = 0.5 * (lo + hi);
        diag[j] = 2.0 / (hi - lo).max(floor);
    }
    let set = NasSet::new(center, DMatrix::from_diagonal(&diag), Norm::Inf)?;
    Ok(set)
}

/// Symmetric maxdet over `−1 ≤ (S y_i − c̃)_j ≤ 1`. Returns `(log det S, S,
/// c)` with `c = S⁻¹c̃`.
fn symmetric_parallelotope(points: &[DVector<f64>]) -> Result<(f64, DMatrix<f64>, DVector<f64>)> {
    let k = points[0].len();
    let basis = symmetric_basis(k);
    let ns = basis.len();
    let nv = ns + k;
    let mut rows = Vec::with_capacity(points.len() * 2 * k * nv);
    for y in points {
        for j in 0..k {
            // (S y)_j as a linear form in the upper-triangle variables
            let mut r = vec![0.0; nv];
            for (idx, b) in basis.iter().enumerate() {
                r[idx] = (b.row(j) * y)[0];
            }
            r[ns + j] = -1.0;
            rows.extend(r.iter().copied());
            rows.extend(r.iter().map(|v| -v));
        }
    }
    let m = rows.len() / nv;
    let problem = MaxDetProblem {
        dim: k,
        shape_basis: basis,
        n_vars: nv,
        g: DMatrix::from_row_slice(m, nv, &rows),
        h: DVector::from_element(m, 1.0),
    };
    let (lo, hi) = bounds(points);
    let mid = (&lo + &hi) * 0.5;
    let r = 1.1 * points.iter().map(|p| (p - &mid).amax()).fold(0.0, f64::max);
    if r <= 0.0 {
        return Err(Error::Degenerate("parallelotope cloud has no extent".into()));
    }
    let mut start = DVector::zeros(nv);
    let mut idx = 0;
    for a in 0..k {
        for b in a..k {
            if a == b {
                start[idx] = 1.0 / r;
            }
            idx += 1;
        }
    }
    start.rows_mut(ns, k).copy_from(&(&mid / r));
    let sol = solve_maxdet(&problem, &start, MAXDET_GAP)?;
    if !sol.report.is_optimal() {
        return Err(Error::Solver(Box::new(sol.report)));
    }
    let ct = sol.vars.rows(ns, k).into_owned();
    let c = sol
        .shape
        .clone()
        .lu()
        .solve(&ct)
        .ok_or_else(|| Error::Degenerate("singular parallelotope shape".into()))?;
    Ok((-sol.report.objective, sol.shape, c))
}

fn bounds(points: &[DVector<f64>]) -> (DVector<f64>, DVector<f64>) {
    let k = points[0].len();
    let mut lo = DVector::from_element(k, f64::INFINITY);
    let mut hi = DVector::from_element(k, f64::NEG_INFINITY);
    for p in points {
        lo = lo.inf(p);
        hi = hi.sup(p);
    }
    (lo, hi)
}

fn rotation_2d(theta: f64) -> DMatrix<f64> {
    let (s, c) = theta.sin_cos();
    DMatrix::from_row_slice(2, 2, &[c, -s, s, c])
}

/// Cayley map of the skew matrix with the given upper-triangle entries.
fn cayley(k: usize, params: &[f64]) -> DMatrix<f64> {
    let mut skew = DMatrix::zeros(k, k);
    let mut idx = 0;
    for a in 0..k {
        for b in a + 1..k {
            skew[(a, b)] = params[idx];
            skew[(b, a)] = -params[idx];
            idx += 1;
        }
    }
    let id = DMatrix::identity(k, k);
    (&id - &skew).lu().solve(&(&id + &skew)).expect("I − K is invertible for skew K")
}

struct Oriented {
    logdet: f64,
    s: DMatrix<f64>,
    c: DVector<f64>,
    u: DMatrix<f64>,
}

fn oriented(points: &[DVector<f64>], u: DMatrix<f64>) -> Result<Oriented> {
    let rotated: Vec<DVector<f64>> = points.iter().map(|p| &u * p).collect();
    let (logdet, s, c) = symmetric_parallelotope(&rotated)?;
    Ok(Oriented { logdet, s, c, u })
}

fn better(a: Option<Oriented>, b: Oriented) -> Option<Oriented> {
    match a {
        Some(a) if a.logdet >= b.logdet => Some(a),
        _ => Some(b),
    }
}

/// Best orientation by grid plus golden-section refinement (two
/// dimensions) or Nelder–Mead over Cayley parameters (three and more).
fn search_orientation(points: &[DVector<f64>]) -> Result<Oriented> {
    let k = points[0].len();
    match k {
        1 => oriented(points, DMatrix::identity(1, 1)),
        2 => {
            const GRID: usize = 36;
            let step = FRAC_PI_2 / GRID as f64;
            let mut best: Option<(f64, Oriented)> = None;
            for i in 0..GRID {
                let theta = i as f64 * step;
                let o = oriented(points, rotation_2d(theta))?;
                if best.as_ref().map_or(true, |(_, b)| o.logdet > b.logdet) {
                    best = Some((theta, o));
                }
            }
            let (theta0, mut best_o) = best.expect("grid is non-empty");
            // golden-section search for the maximum of log det on the bracket
            let g = (5f64.sqrt() - 1.0) / 2.0;
            let (mut a, mut b) = (theta0 - step, theta0 + step);
            let mut x1 = b - g * (b - a);
            let mut x2 = a + g * (b - a);
            let mut f1 = oriented(points, rotation_2d(x1))?;
            let mut f2 = oriented(points, rotation_2d(x2))?;
            while b - a > 1e-9 {
                if f1.logdet >= f2.logdet {
                    b = x2;
                    x2 = x1;
                    f2 = f1;
                    x1 = b - g * (b - a);
                    f1 = oriented(points, rotation_2d(x1))?;
                } else {
                    a = x1;
                    x1 = x2;
                    f1 = f2;
                    x2 = a + g * (b - a);
                    f2 = oriented(points, rotation_2d(x2))?;
                }
            }
            for o in [f1, f2] {
                if o.logdet > best_o.logdet {
                    best_o = o;
                }
            }
            Ok(best_o)
        }
        _ => {
            let dim = k * (k - 1) / 2;
            let mut rng = ChaCha8Rng::seed_from_u64(0x5EED_0F_0A1E);
            let mut best: Option<Oriented> = None;
            for start in 0..5 {
                let x0: Vec<f64> = if start == 0 {
                    vec![0.0; dim]
                } else {
                    (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect()
                };
                let mut eval = |x: &[f64]| -> f64 {
                    oriented(points, cayley(k, x)).map_or(f64::INFINITY, |o| -o.logdet)
                };
                let x = nelder_mead(&mut eval, &x0, 0.3, 400, 1e-10);
                best = better(best, oriented(points, cayley(k, &x))?);
            }
            Ok(best.expect("at least one start"))
        }
    }
}

/// Minimises `f` from `x0` with an initial simplex of edge `scale`.
fn nelder_mead(f: &mut impl FnMut(&[f64]) -> f64, x0: &[f64], scale: f64, max_evals: usize, ftol: f64) -> Vec<f64> {
    let d = x0.len();
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(d + 1);
    simplex.push((x0.to_vec(), f(x0)));
    for i in 0..d {
        let mut x = x0.to_vec();
        x[i] += scale;
        let v = f(&x);
        simplex.push((x, v));
    }
    let mut evals = d + 1;
    while evals < max_evals {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        if (simplex[d].1 - simplex[0].1).abs() <= ftol * (1.0 + simplex[0].1.abs()) {
            break;
        }
        let centroid: Vec<f64> = (0..d)
            .map(|j| simplex[..d].iter().map(|(x, _)| x[j]).sum::<f64>() / d as f64)
            .collect();
        let along = |t: f64, worst: &[f64]| -> Vec<f64> {
            centroid.iter().zip(worst).map(|(c, w)| c + t * (w - c)).collect()
        };
        let worst = simplex[d].0.clone();
        let xr = along(-1.0, &worst);
        let fr = f(&xr);
        evals += 1;
        if fr < simplex[0].1 {
            let xe = along(-2.0, &worst);
            let fe = f(&xe);
            evals += 1;
            simplex[d] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < simplex[d - 1].1 {
            simplex[d] = (xr, fr);
        } else {
            let xc = if fr < simplex[d].1 { along(-0.5, &worst) } else { along(0.5, &worst) };
            let fc = f(&xc);
            evals += 1;
            if fc < fr.min(simplex[d].1) {
                simplex[d] = (xc, fc);
            } else {
                let best = simplex[0].0.clone();
                for (x, v) in simplex.iter_mut().skip(1) {
                    for (xi, bi) in x.iter_mut().zip(&best) {
                        *xi = bi + 0.5 * (*xi - bi);
                    }
                    *v = f(x);
                    evals += 1;
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    simplex.swap_remove(0).0
}

/// Minimum-volume enclosing parallelotope `{x : ‖P(x−c)‖_∞ ≤ 1}`.
pub fn fit_parallelotope(points: &[DVector<f64>], orientation: Orientation) -> Result<NasSet> {
    let n = check_points(points)?;
    if orientation == Orientation::Symmetric {
        let frame = Frame::new(points, n);
        if frame.rank() < n {
            return Err(Error::Degenerate(
                "symmetric parallelotope fit needs a full-dimensional cloud".into(),
            ));
        }
        let (_, s, c) = symmetric_parallelotope(points)?;
        return enclose(points, c, s, Norm::Inf);
    }
    let frame = Frame::new(points, n);
    let k = frame.rank();
    if k == 0 {
        return frame.assemble(points, &DMatrix::zeros(0, 0), &DVector::zeros(0), Norm::Inf);
    }
    let o = search_orientation(&frame.local(points))?;
    let pz = &o.s * &o.u;
    let cz = o.u.transpose() * &o.c;
    frame.assemble(points, &pz, &cz, Norm::Inf)
}

/// Largest number of LP rows used for the feasibility start of the `p = 1`
/// fit; bigger instances start from a scaled bounding box instead.
const L1_LP_ROWS: usize = 4_000;

/// Minimum-volume enclosing axis-aligned cross-polytope
/// `{x : Σ_j p_j |x_j − c_j| ≤ 1}`.
pub fn fit_l1_diag(points: &[DVector<f64>]) -> Result<NasSet> {
    let n = check_points(points)?;
    let floor = floor_width(magnitude(points));
    let mut active = Vec::new();
    let mut center = DVector::zeros(n);
    let mut diag = DVector::zeros(n);
    for j in 0..n {
        let (lo, hi) = points
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p[j]), hi.max(p[j])));
        center[j] = 0.5 * (lo + hi);
        if hi - lo < floor {
            diag[j] = 2.0 / floor;
        } else {
            active.push((j, 0.5 * (hi - lo)));
        }
    }
    let k = active.len();
    if k > 0 {
        if k > 16 {
            return Err(Error::InvalidParameter("cross-polytope fit supports up to 16 axes".into()));
        }
        let local: Vec<Vec<f64>> = points
            .iter()
            .map(|p| active.iter().map(|(j, _)| p[*j]).collect())
            .collect();
        let signs: Vec<Vec<f64>> = (0..1usize << k)
            .map(|mask| (0..k).map(|j| if mask >> j & 1 == 1 { -1.0 } else { 1.0 }).collect())
            .collect();
        // rows: Σ_j s_j (p_j x_j − c̃_j) ≤ 1 over variables (p, c̃)
        let nv = 2 * k;
        let mut rows = Vec::with_capacity(local.len() * signs.len() * nv);
        for x in &local {
            for s in &signs {
                for j in 0..k {
                    rows.push(s[j] * x[j]);
                }
                for j in 0..k {
                    rows.push(-s[j]);
                }
            }
        }
        let m = rows.len() / nv;
        let g = DMatrix::from_row_slice(m, nv, &rows);
        let start = l1_start(&g, &local, &active)?;
        let problem = MaxDetProblem {
            dim: k,
            shape_basis: (0..k)
                .map(|j| {
                    let mut b = DMatrix::zeros(k, k);
                    b[(j, j)] = 1.0;
                    b
                })
                .collect(),
            n_vars: nv,
            g,
            h: DVector::from_element(m, 1.0),
        };
        let sol = solve_maxdet(&problem, &start, MAXDET_GAP)?;
        if !sol.report.is_optimal() {
            return Err(Error::Solver(Box::new(sol.report)));
        }
        for (i, (j, _)) in active.iter().enumerate() {
            let p = sol.vars[i];
            diag[*j] = p;
            center[*j] = sol.vars[k + i] / p;
        }
    }
    enclose(points, center, DMatrix::from_diagonal(&diag), Norm::L1)
}

/// Strictly feasible `(p, c̃)` maximising the common slack of the sign
/// constraints by LP, or the scaled bounding box when the LP is too large.
fn l1_start(g: &DMatrix<f64>, local: &[Vec<f64>], active: &[(usize, f64)]) -> Result<DVector<f64>> {
    let k = active.len();
    let nv = 2 * k;
    if g.nrows() + k + 1 <= L1_LP_ROWS {
        // variables (p, c̃, s): maximise s
        let m = g.nrows();
        let rows = m + k + 1;
        let mut a = DMatrix::zeros(rows, nv + 1);
        a.view_mut((0, 0), (m, nv)).copy_from(g);
        for i in 0..m {
            a[(i, nv)] = 1.0;
        }
        for j in 0..k {
            a[(m + j, j)] = -1.0;
            a[(m + j, nv)] = 1.0;
        }
        a[(m + k, nv)] = 1.0;
        let mut b = DVector::zeros(rows);
        b.rows_mut(0, m).fill(1.0);
        b[m + k] = 1.0;
        let mut c = DVector::zeros(nv + 1);
        c[nv] = -1.0;
        let report = solve_lp(&LinearProgram::new(c, a, b), 1e-9)?;
        if report.is_optimal() && report.solution[nv] > 1e-9 {
            return Ok(DVector::from_column_slice(&report.solution[..nv]));
        }
    }
    let mut start = DVector::zeros(nv);
    for (i, (_, half)) in active.iter().enumerate() {
        let mid = local.iter().map(|x| x[i]).fold(f64::INFINITY, f64::min) + half;
        let p = 1.0 / (1.1 * k as f64 * half);
        start[i] = p;
        start[k + i] = p * mid;
    }
    Ok(start)
}
