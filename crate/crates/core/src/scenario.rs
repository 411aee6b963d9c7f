//! Sample-complexity arithmetic for scenario programs.
//!
//! A scenario program with `d` decision variables fitted to `N` i.i.d.
//! samples has violation probability above `ε` with probability at most
//! `Φ(ε, N, d) = Σ_{j<d} C(N,j) ε^j (1−ε)^{N−j}`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::poly::binomial;

/// Approximating-set families.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Ellipsoid,
    Parallelotope,
    #[serde(alias = "box")]
    Hyperrectangle,
    /// Axis-aligned cross-polytope (`p = 1`, diagonal shape).
    #[serde(alias = "l1")]
    CrossPolytope,
    Pas,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::Ellipsoid => "ellipsoid",
            Family::Parallelotope => "parallelotope",
            Family::Hyperrectangle => "box",
            Family::CrossPolytope => "l1",
            Family::Pas => "pas",
        }
    }
}

impl std::str::FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ellipsoid" => Ok(Family::Ellipsoid),
            "parallelotope" => Ok(Family::Parallelotope),
            "box" | "hyperrectangle" => Ok(Family::Hyperrectangle),
            "l1" | "cross-polytope" => Ok(Family::CrossPolytope),
            "pas" => Ok(Family::Pas),
            other => Err(Error::InvalidParameter(format!("unknown family '{other}'"))),
        }
    }
}

/// Number of free variables of the scenario program for a family.
///
/// Polynomial sets count the coefficients of `q`, `C(n+σ, n)`.
pub fn design_dimension(family: Family, n: usize, degree: Option<usize>) -> Result<usize> {
    if n == 0 {
        return Err(Error::InvalidParameter("dimension must be at least 1".into()));
    }
    Ok(match family {
        Family::Ellipsoid | Family::Parallelotope => n * (n + 1) / 2 + n,
        Family::Hyperrectangle | Family::CrossPolytope => 2 * n,
        Family::Pas => {
            let s = degree.ok_or_else(|| {
                Error::InvalidParameter("polynomial family needs a degree".into())
            })?;
            binomial(n + s, n)
        }
    })
}

fn check_unit_open(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} must lie in (0, 1), got {v}")))
    }
}

/// `Φ(ε, N, d)`, evaluated term by term in log space and clamped to `[0, 1]`.
pub fn violation_tail(eps: f64, n: u64, d: u64) -> Result<f64> {
    if !(0.0..=1.0).contains(&eps) {
        return Err(Error::InvalidParameter(format!("epsilon must lie in [0, 1], got {eps}")));
    }
    if n == 0 || d == 0 {
        return Err(Error::InvalidParameter("N and d must be at least 1".into()));
    }
    Ok(tail(eps, n, d))
}

fn tail(eps: f64, n: u64, d: u64) -> f64 {
    let top = (d - 1).min(n);
    if eps == 0.0 {
        return 1.0;
    }
    if eps == 1.0 {
        return if top == n { 1.0 } else { 0.0 };
    }
    if top == n {
        return 1.0;
    }
    let le = eps.ln();
    let l1e = (-eps).ln_1p();
    let mut log_binom = 0.0;
    let mut logs = Vec::with_capacity(top as usize + 1);
    for j in 0..=top {
        if j > 0 {
            log_binom += ((n - j + 1) as f64).ln() - (j as f64).ln();
        }
        logs.push(log_binom + j as f64 * le + (n - j) as f64 * l1e);
    }
    let max = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = logs.iter().map(|l| (l - max).exp()).sum();
    (max + sum.ln()).exp().clamp(0.0, 1.0)
}

/// Smallest `N ≥ e/(e−1) · (d + ln 1/δ) / ε`.
pub fn required_samples_explicit(eps: f64, delta: f64, d: u64) -> Result<u64> {
    check_unit_open("epsilon", eps)?;
    check_unit_open("delta", delta)?;
    if d == 0 {
        return Err(Error::InvalidParameter("d must be at least 1".into()));
    }
    let e = std::f64::consts::E;
    let rhs = e / (e - 1.0) / eps * (d as f64 + (1.0 / delta).ln());
    Ok(rhs.ceil().max(1.0) as u64)
}

/// Minimal `N` with `Φ(ε, N, d) ≤ δ`.
pub fn required_samples_exact(eps: f64, delta: f64, d: u64) -> Result<u64> {
    check_unit_open("epsilon", eps)?;
    check_unit_open("delta", delta)?;
    if d == 0 {
        return Err(Error::InvalidParameter("d must be at least 1".into()));
    }
    // Φ = 1 for N < d, so the answer is at least d.
    let mut lo = d.max(1) - 1; // Φ(lo) > δ (or lo = 0)
    let mut hi = d.max(1);
    while tail(eps, hi, d) > delta {
        lo = hi;
        hi = hi.checked_mul(2).ok_or_else(|| {
            Error::InvalidParameter("sample size overflow".into())
        })?;
    }
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if tail(eps, mid, d) <= delta {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// Smallest `ε` (to 1e-12) with `Φ(ε, N, d) ≤ δ`.
pub fn implied_epsilon(n: u64, delta: f64, d: u64) -> Result<f64> {
    check_unit_open("delta", delta)?;
    if n == 0 || d == 0 {
        return Err(Error::InvalidParameter("N and d must be at least 1".into()));
    }
    if d > n {
        return Ok(1.0);
    }
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    while hi - lo > 1e-12 {
        let mid = 0.5 * (lo + hi);
        if tail(mid, n, d) <= delta {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundMethod {
    ExplicitBound,
    TailInversion,
}

/// `(ε, δ, d, N)` with `Φ(ε, N, d) ≤ δ` checked on construction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioCertificate {
    pub epsilon: f64,
    pub delta: f64,
    pub d: u64,
    pub n: u64,
    pub method: BoundMethod,
    /// `Φ(ε, N, d)`.
    pub tail: f64,
}

impl ScenarioCertificate {
    pub fn new(epsilon: f64, delta: f64, d: u64, n: u64, method: BoundMethod) -> Result<Self> {
        check_unit_open("delta", delta)?;
        let tail = violation_tail(epsilon, n, d)?;
        if tail > delta * (1.0 + 1e-12) {
            return Err(Error::InvalidParameter(format!(
                "Φ({epsilon}, {n}, {d}) = {tail:.6e} exceeds δ = {delta}"
            )));
        }
        Ok(Self {
            epsilon,
            delta,
            d,
            n,
            method,
            tail,
        })
    }

    /// Sample size from the exact tail inversion.
    pub fn for_risk(epsilon: f64, delta: f64, d: u64) -> Result<Self> {
        let n = required_samples_exact(epsilon, delta, d)?;
        Self::new(epsilon, delta, d, n, BoundMethod::TailInversion)
    }

    /// Sample size from the explicit closed-form bound.
    pub fn explicit(epsilon: f64, delta: f64, d: u64) -> Result<Self> {
        let n = required_samples_explicit(epsilon, delta, d)?;
        Self::new(epsilon, delta, d, n, BoundMethod::ExplicitBound)
    }

    /// Certificate for a fixed sample size: reports the implied `ε`.
    /// With fewer samples than design variables `d` is capped at `N`.
    pub fn for_fixed_samples(n: u64, delta: f64, d: u64) -> Result<Self> {
        if n < d {
            log::warn!("only {n} samples for {d} design variables; capping d at N");
            let eps = implied_epsilon(n, delta, n)?;
            return Self::new(eps, delta, n, n, BoundMethod::ExplicitBound);
        }
        let eps = implied_epsilon(n, delta, d)?;
        Self::new(eps, delta, d, n, BoundMethod::TailInversion)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_bigint::BigInt;
    use num_rational::BigRational;
    use num_traits::{FromPrimitive, One, ToPrimitive, Zero};

    fn exact_tail(eps: f64, n: u64, d: u64) -> f64 {
        let e = BigRational::from_f64(eps).unwrap();
        let one_minus = BigRational::one() - &e;
        let mut sum = BigRational::zero();
        let mut binom = BigInt::one();
        for j in 0..d.min(n + 1) {
            if j > 0 {
                binom = binom * BigInt::from(n - j + 1) / BigInt::from(j);
            }
            let mut term = BigRational::from_integer(binom.clone());
            for _ in 0..j {
                term *= &e;
            }
            for _ in 0..(n - j) {
                term *= &one_minus;
            }
            sum += term;
        }
        sum.to_f64().unwrap()
    }

    #[test]
    fn tail_examples() {
        assert!((violation_tail(0.1, 10, 1).unwrap() - 0.348_678_440_1).abs() < 1e-10);
        assert_eq!(violation_tail(0.0, 50, 3).unwrap(), 1.0);
        assert_eq!(violation_tail(0.5, 4, 5).unwrap(), 1.0);
        assert!(violation_tail(1.5, 4, 1).is_err());
        assert!(violation_tail(0.5, 0, 1).is_err());
    }

    #[test]
    fn tail_matches_rational_arithmetic() {
        for &eps in &[0.01, 0.05, 0.1, 0.3, 0.77] {
            for n in [1u64, 5, 17, 40, 100] {
                for d in [1u64, 2, 5, 15, 20] {
                    let want = exact_tail(eps, n, d);
                    let got = violation_tail(eps, n, d).unwrap();
                    assert!(
                        (got - want).abs() <= 1e-12 * want.max(1e-300),
                        "ε={eps} N={n} d={d}: {got} vs {want}"
                    );
                }
            }
        }
    }

    #[test]
    fn explicit_examples() {
        assert_eq!(required_samples_explicit(0.1, 0.01, 5).unwrap(), 152);
        assert_eq!(required_samples_explicit(0.5, 0.5, 1).unwrap(), 6);
        let e = std::f64::consts::E;
        let near_one = required_samples_explicit(0.1, 1.0 - 1e-12, 1).unwrap();
        assert_eq!(near_one, (e / (e - 1.0) / 0.1).ceil() as u64);
        assert!(required_samples_explicit(0.0, 0.5, 1).is_err());
    }

    #[test]
    fn exact_examples() {
        assert_eq!(required_samples_exact(0.1, 0.01, 1).unwrap(), 44);
        assert!((0.9f64.powi(44) - 0.009_697_737).abs() < 1e-8);
    }

    #[test]
    fn exact_is_minimal_and_below_explicit() {
        for &eps in &[0.05, 0.1, 0.2] {
            for &delta in &[1e-2, 1e-6] {
                for d in [2u64, 5, 15] {
                    let n = required_samples_exact(eps, delta, d).unwrap();
                    assert!(n <= required_samples_explicit(eps, delta, d).unwrap());
                    assert!(violation_tail(eps, n, d).unwrap() <= delta);
                    assert!(violation_tail(eps, n - 1, d).unwrap() > delta);
                }
            }
        }
    }

    #[test]
    fn tail_monotonicity_grid() {
        for &eps in &[0.01, 0.05, 0.1, 0.3] {
            for d in 1u64..=20 {
                let mut prev = f64::INFINITY;
                for n in (10u64..=1000).step_by(10) {
                    let v = violation_tail(eps, n, d).unwrap();
                    assert!(v <= prev + 1e-15, "N-monotonicity ε={eps} d={d} N={n}");
                    prev = v;
                    if d > 1 {
                        assert!(violation_tail(eps, n, d - 1).unwrap() <= v + 1e-15);
                    }
                }
            }
        }
        for n in (10u64..=1000).step_by(30) {
            for d in 1u64..=20 {
                let mut prev = f64::INFINITY;
                for &eps in &[0.01, 0.05, 0.1, 0.3] {
                    let v = violation_tail(eps, n, d).unwrap();
                    assert!(v <= prev + 1e-15);
                    prev = v;
                }
            }
        }
    }

    #[test]
    fn design_dimensions() {
        assert_eq!(design_dimension(Family::Ellipsoid, 2, None).unwrap(), 5);
        assert_eq!(design_dimension(Family::Parallelotope, 3, None).unwrap(), 9);
        assert_eq!(design_dimension(Family::Hyperrectangle, 3, None).unwrap(), 6);
        assert_eq!(design_dimension(Family::Pas, 2, Some(4)).unwrap(), 15);
        assert!(design_dimension(Family::Pas, 2, None).is_err());
    }

    #[test]
    fn certificates() {
        let c = ScenarioCertificate::for_risk(0.1, 0.01, 5).unwrap();
        assert_eq!(c.method, BoundMethod::TailInversion);
        assert!(c.tail <= 0.01);
        let x = ScenarioCertificate::explicit(0.1, 0.01, 5).unwrap();
        assert_eq!(x.n, 152);
        assert!(ScenarioCertificate::new(0.1, 0.01, 5, 20, BoundMethod::TailInversion).is_err());

        let fixed = ScenarioCertificate::for_fixed_samples(200, 0.01, 5).unwrap();
        assert!(violation_tail(fixed.epsilon, 200, 5).unwrap() <= 0.01);
        assert!(violation_tail(fixed.epsilon - 1e-9, 200, 5).unwrap() > 0.01);

        let short = ScenarioCertificate::for_fixed_samples(3, 0.01, 5).unwrap();
        assert_eq!(short.d, 3);
        assert_eq!(short.method, BoundMethod::ExplicitBound);
    }
}
