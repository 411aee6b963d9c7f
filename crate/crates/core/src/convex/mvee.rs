//! Minimum-volume enclosing ellipsoid by Khachiyan's first-order weight
//! updates with Todd–Yildirim away steps.

use nalgebra::{DMatrix, DVector};

use super::linalg::sym_sqrt;
use crate::error::{check_dim, Error, Result};

/// `{x : (x−c)ᵀ M (x−c) ≤ 1}` with `shape = M^{1/2}`.
#[derive(Clone, Debug)]
pub struct Mvee {
    pub center: DVector<f64>,
    pub quad: DMatrix<f64>,
    pub shape: DMatrix<f64>,
    pub iterations: usize,
    /// Final weight of every input point; the support points carry the
    /// positive weights.
    pub weights: Vec<f64>,
}

pub const DEFAULT_TOL: f64 = 1e-7;
const MAX_ITERATIONS: usize = 1_000_000;

/// Computes the MVEE of `points`, stopping once the weights are
/// `tol`-approximately optimal, then scaling the ellipsoid so every point
/// is enclosed exactly.
pub fn mvee(points: &[DVector<f64>], tol: f64) -> Result<Mvee> {
    let Some(first) = points.first() else {
        return Err(Error::InvalidParameter("no points".into()));
    };
    let n = first.len();
    for p in points {
        check_dim(n, p.len())?;
        if p.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("non-finite point".into()));
        }
    }
    let npts = points.len();
    if npts < n + 1 {
        return Err(Error::Degenerate(format!(
            "{npts} points cannot span a {n}-dimensional ellipsoid"
        )));
    }
    let d = (n + 1) as f64;
    let lifted: Vec<DVector<f64>> = points.iter().map(|p| p.clone().insert_row(n, 1.0)).collect();
    let mut u = vec![1.0 / npts as f64; npts];
    let mut gram = DMatrix::zeros(n + 1, n + 1);
    for (q, w) in lifted.iter().zip(&u) {
        gram.ger(*w, q, q, 1.0);
    }
    let mut iterations = 0;
    let mut since_refresh = 0;
    let mut inv = invert(&gram)?;
    let mut m = vec![0.0; npts];
    loop {
        for (mi, q) in m.iter_mut().zip(&lifted) {
            *mi = q.dot(&(&inv * q));
        }
        let (j_up, m_up) = argmax(&m);
        let (j_down, m_down) = m
            .iter()
            .enumerate()
            .filter(|(i, _)| u[*i] > 0.0)
            .fold((0, f64::INFINITY), |acc, (i, &v)| if v < acc.1 { (i, v) } else { acc });
        let eps_plus = m_up / d - 1.0;
        let eps_minus = 1.0 - m_down / d;
        if eps_plus.max(eps_minus) <= tol || iterations >= MAX_ITERATIONS {
            break;
        }
        iterations += 1;
        let mut drop = false;
        let (j, alpha) = if eps_plus >= eps_minus {
            (j_up, (m_up - d) / (d * (m_up - 1.0)))
        } else {
            let uj = u[j_down];
            let full = (d - m_down) / (d * (m_down - 1.0));
            let cap = uj / (1.0 - uj);
            drop = full >= cap;
            (j_down, -full.min(cap))
        };
        // u ← (1−α)u + α e_j, α < 0 for away steps
        for w in u.iter_mut() {
            *w *= 1.0 - alpha;
        }
        u[j] += alpha;
        if drop {
            u[j] = 0.0;
        }
        since_refresh += 1;
        if since_refresh >= 500 {
            gram.fill(0.0);
            for (q, w) in lifted.iter().zip(&u) {
                gram.ger(*w, q, q, 1.0);
            }
            inv = invert(&gram)?;
            since_refresh = 0;
        } else {
            // Sherman–Morrison on (1−α)G + α q qᵀ
            let q = &lifted[j];
            let scaled = &inv / (1.0 - alpha);
            let iq = &scaled * q;
            let denom = 1.0 + alpha * q.dot(&iq);
            if denom.abs() < 1e-14 {
                return Err(Error::Degenerate("weight update lost rank".into()));
            }
            inv = scaled - (&iq * iq.transpose()) * (alpha / denom);
        }
    }
    let mut center = DVector::zeros(n);
    for (p, w) in points.iter().zip(&u) {
        center.axpy(*w, p, 1.0);
    }
    let mut scatter = DMatrix::zeros(n, n);
    for (p, w) in points.iter().zip(&u) {
        let dv = p - &center;
        scatter.ger(*w, &dv, &dv, 1.0);
    }
    let mut quad = invert(&scatter)? / n as f64;
    let worst = points
        .iter()
        .map(|p| {
            let dv = p - &center;
            dv.dot(&(&quad * &dv))
        })
        .fold(0.0, f64::max);
    if worst > 1.0 {
        quad /= worst;
    }
    quad = (&quad + quad.transpose()) * 0.5;
    let shape = sym_sqrt(&quad);
    Ok(Mvee {
        center,
        quad,
        shape,
        iterations,
        weights: u,
    })
}

fn argmax(v: &[f64]) -> (usize, f64) {
    v.iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (i, &x)| if x > acc.1 { (i, x) } else { acc })
}

fn invert(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let sym = (m + m.transpose()) * 0.5;
    sym.cholesky()
        .map(|c| c.inverse())
        .ok_or_else(|| Error::Degenerate("points are affinely dependent".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn pts(raw: &[[f64; 2]]) -> Vec<DVector<f64>> {
        raw.iter().map(|p| DVector::from_row_slice(p)).collect()
    }

    fn area(e: &Mvee) -> f64 {
        std::f64::consts::PI / e.quad.determinant().sqrt()
    }

    #[test]
    fn diamond_gives_unit_disc() {
        let e = mvee(&pts(&[[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]]), 1e-10).unwrap();
        assert!(e.center.amax() < 1e-9);
        assert!((e.shape.clone() - DMatrix::identity(2, 2)).amax() < 1e-6);
    }

    #[test]
    fn square_corners_give_circumscribed_disc() {
        let e = mvee(&pts(&[[1.0, 1.0], [-1.0, 1.0], [1.0, -1.0], [-1.0, -1.0]]), 1e-10).unwrap();
        let want = DMatrix::identity(2, 2) / 2f64.sqrt();
        assert!((e.shape.clone() - want).amax() < 1e-6);
        assert!((area(&e) - 2.0 * std::f64::consts::PI).abs() < 1e-5);
    }

    fn cloud(rng: &mut ChaCha8Rng, n: usize, count: usize) -> Vec<DVector<f64>> {
        (0..count)
            .map(|_| DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0) * (1.0 + rng.gen::<f64>())))
            .collect()
    }

    #[test]
    fn containment_and_support_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for n in [2, 3] {
            let p = cloud(&mut rng, n, 80);
            let e = mvee(&p, 1e-9).unwrap();
            let gauges: Vec<f64> = p
                .iter()
                .map(|x| {
                    let dv = x - &e.center;
                    dv.dot(&(&e.quad * &dv))
                })
                .collect();
            assert!(gauges.iter().all(|g| *g <= 1.0 + 1e-6));
            let on_boundary = gauges.iter().filter(|g| **g >= 1.0 - 1e-4).count();
            assert!(on_boundary >= n + 1);
            let support = e.weights.iter().filter(|w| **w > 1e-6).count();
            assert!(support <= n * (n + 3) / 2, "{support} support points");
        }
    }

    #[test]
    fn adding_a_point_never_shrinks() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10 {
            let mut p = cloud(&mut rng, 2, 30);
            let before = area(&mvee(&p, 1e-10).unwrap());
            p.push(DVector::from_fn(2, |_, _| rng.gen_range(-3.0..3.0)));
            let after = area(&mvee(&p, 1e-10).unwrap());
            assert!(after >= before * (1.0 - 1e-8));
        }
    }

    #[test]
    fn approximation_guarantee_against_long_run() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for n in [2usize, 3] {
            let p = cloud(&mut rng, n, 60);
            let tol = 1e-4;
            let coarse = mvee(&p, tol).unwrap();
            let fine = mvee(&p, 1e-10).unwrap();
            let vol = |e: &Mvee| 1.0 / e.quad.determinant().sqrt();
            assert!(vol(&coarse) <= (1.0 + tol).powi(n as i32 + 1) * vol(&fine));
            assert!(vol(&coarse) >= vol(&fine) * (1.0 - 1e-8));
        }
    }

    #[test]
    fn too_few_points_are_degenerate() {
        assert!(matches!(
            mvee(&pts(&[[0.0, 0.0], [1.0, 1.0]]), 1e-7),
            Err(Error::Degenerate(_))
        ));
    }
}
