//! Randomized image-set approximation: sample the inputs, map them through
//! the dynamics, fit a minimum-volume set to the images, and attach a
//! scenario certificate.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::convex::SolveReport;
use crate::error::{Error, Result};
use crate::fit::{fit_family, FitOptions};
use crate::geometry::FittedSet;
use crate::model::{DomainError, Model};
use crate::par;
use crate::sampling::{Purpose, Seed, SetSampler};
use crate::scenario::{design_dimension, Family, ScenarioCertificate};

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct ApproxOptions {
    /// Fixed sample count instead of the tail inversion; the certificate
    /// then reports the implied `ε`.
    pub samples: Option<usize>,
    pub fit: FitOptions,
    /// Fresh samples for a Monte Carlo violation estimate.
    pub validate: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ViolationEstimate {
    pub fraction: f64,
    /// `√(p̂(1−p̂)/M)`.
    pub std_error: f64,
    pub samples: usize,
    /// Samples whose dynamics failed to evaluate, counted as violations.
    pub domain_errors: usize,
}

/// Wall-clock seconds; excluded from serialized output so results stay
/// reproducible byte for byte.
#[derive(Clone, Copy, Debug, Default)]
pub struct Timings {
    pub sampling: f64,
    pub fit: f64,
    pub validation: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ApproximationResult {
    pub family: Family,
    pub set: FittedSet,
    pub certificate: ScenarioCertificate,
    /// Mapped points `f(x⁽ⁱ⁾, w⁽ⁱ⁾)` in sample order.
    #[serde(skip)]
    pub cloud: Vec<DVector<f64>>,
    pub empirical_violation: Option<ViolationEstimate>,
    /// Interior-point report of polynomial fits.
    pub solver: Option<SolveReport>,
    #[serde(skip)]
    pub timings: Timings,
}

/// Maps `count` input pairs, pair `i` drawn from its own streams
/// `(epoch, i, State)` and `(epoch, i, Noise)`.
pub fn map_samples(
    model: &Model,
    states: &dyn SetSampler,
    seed: Seed,
    epoch: u64,
    count: usize,
) -> Vec<std::result::Result<DVector<f64>, (usize, DomainError)>> {
    par::map_range(count, |i| map_one(model, states, seed, epoch, i as u64).map_err(|e| (i, e)))
}

pub(crate) fn map_one(
    model: &Model,
    states: &dyn SetSampler,
    seed: Seed,
    epoch: u64,
    index: u64,
) -> std::result::Result<DVector<f64>, DomainError> {
    let mut x = vec![0.0; model.n()];
    let mut w = vec![0.0; model.n_w()];
    let mut out = DVector::zeros(model.n());
    draw_pair(model, states, seed, epoch, index, &mut x, &mut w)?;
    model.eval_dynamics_into(&x, &w, out.as_mut_slice())?;
    Ok(out)
}

pub(crate) fn draw_pair(
    model: &Model,
    states: &dyn SetSampler,
    seed: Seed,
    epoch: u64,
    index: u64,
    x: &mut [f64],
    w: &mut [f64],
) -> std::result::Result<(), DomainError> {
    let sampler_failure = |e: Error| DomainError {
        component: "state sampler".into(),
        subexpression: String::new(),
        message: e.to_string(),
    };
    states
        .draw_into(&mut seed.stream(epoch, index, Purpose::State).rng(), x)
        .map_err(sampler_failure)?;
    model
        .noise_set()
        .draw_into(&mut seed.stream(epoch, index, Purpose::Noise).rng(), w)
        .map_err(sampler_failure)
}

/// Approximates the image of `X0 × W` under the model dynamics.
///
/// Without a sample override `N` is the smallest count with
/// `Φ(ε, N, d) ≤ δ`; with one, `ε` is ignored and the certificate holds the
/// `ε` implied by `N`.
pub fn approximate_image_set(
    model: &Model,
    family: Family,
    epsilon: f64,
    delta: f64,
    seed: Seed,
    options: &ApproxOptions,
) -> Result<ApproximationResult> {
    let degree = (family == Family::Pas).then_some(options.fit.degree);
    let d = design_dimension(family, model.n(), degree)? as u64;
    let certificate = match options.samples {
        Some(0) => return Err(Error::InvalidParameter("sample count must be at least 1".into())),
        Some(n) => ScenarioCertificate::for_fixed_samples(n as u64, delta, d)?,
        None => ScenarioCertificate::for_risk(epsilon, delta, d)?,
    };
    let n = certificate.n as usize;
    if (n as u64) < d {
        log::warn!("{n} samples for {d} design variables");
    }

    let t0 = par::Stopwatch::start();
    let mapped = map_samples(model, model.initial_set(), seed, 0, n);
    let mut cloud = Vec::with_capacity(n);
    for r in mapped {
        match r {
            Ok(p) => cloud.push(p),
            Err((index, source)) => return Err(Error::SampleDomain { index, source }),
        }
    }
    let sampling = t0.seconds();

    let t1 = par::Stopwatch::start();
    let (set, solver) = fit_family(&cloud, family, &options.fit)?;
    let fit = t1.seconds();

    let t2 = par::Stopwatch::start();
    let empirical_violation = match options.validate {
        Some(m) => Some(estimate_violation(&set, model, m, seed.derive(1))?),
        None => None,
    };
    let validation = t2.seconds();

    Ok(ApproximationResult {
        family,
        set,
        certificate,
        cloud,
        empirical_violation,
        solver,
        timings: Timings {
            sampling,
            fit,
            validation,
        },
    })
}

const VALIDATION_CHUNK: usize = 4096;

/// Fraction of `m` fresh input pairs whose image falls outside `set`.
/// Pairs are drawn in fixed chunks of 4096 per stream, so the estimate does
/// not depend on the worker count.
pub fn estimate_violation(set: &FittedSet, model: &Model, m: usize, seed: Seed) -> Result<ViolationEstimate> {
    if m == 0 {
        return Err(Error::InvalidParameter("validation sample count must be at least 1".into()));
    }
    crate::error::check_dim(model.n(), set.dim())?;
    let chunks = m.div_ceil(VALIDATION_CHUNK);
    let counts = par::map_range(chunks, |c| -> Result<(usize, usize)> {
        let mut rng = seed.stream(0, c as u64, Purpose::Validation).rng();
        let len = VALIDATION_CHUNK.min(m - c * VALIDATION_CHUNK);
        let mut x = vec![0.0; model.n()];
        let mut w = vec![0.0; model.n_w()];
        let mut y = vec![0.0; model.n()];
        let (mut outside, mut errors) = (0, 0);
        for _ in 0..len {
            model.initial_set().draw_into(&mut rng, &mut x)?;
            model.noise_set().draw_into(&mut rng, &mut w)?;
            match model.eval_dynamics_into(&x, &w, &mut y) {
                Ok(()) => {
                    if !set.contains(&y, 0.0) {
                        outside += 1;
                    }
                }
                Err(_) => errors += 1,
            }
        }
        Ok((outside, errors))
    });
    let (mut outside, mut errors) = (0, 0);
    for c in counts {
        let (o, e) = c?;
        outside += o;
        errors += e;
    }
    let p = (outside + errors) as f64 / m as f64;
    Ok(ViolationEstimate {
        fraction: p,
        std_error: (p * (1.0 - p) / m as f64).sqrt(),
        samples: m,
        domain_errors: errors,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{AxisBox, NasSet, Norm};

    fn identity(w: AxisBox) -> Model {
        Model::new(
            "identity",
            (2, 2, 0),
            &["x1", "x2"],
            &[],
            AxisBox::cube(2, 0.0, 1.0).unwrap(),
            w,
            None,
        )
        .unwrap()
    }

    fn shifted(w: AxisBox) -> Model {
        Model::new(
            "shift",
            (2, 2, 0),
            &["x1 + w1", "x2 + w2"],
            &[],
            AxisBox::cube(2, 0.0, 1.0).unwrap(),
            w,
            None,
        )
        .unwrap()
    }

    #[test]
    fn identity_box_is_certified() {
        let m = identity(AxisBox::cube(2, 0.0, 0.0).unwrap());
        let r = approximate_image_set(&m, Family::Hyperrectangle, 0.1, 1e-3, Seed(3), &ApproxOptions::default()).unwrap();
        let a = r.set.as_nas().unwrap();
        for j in 0..2 {
            let (lo, hi) = a.axis_extent(j);
            let cmin = r.cloud.iter().map(|p| p[j]).fold(f64::INFINITY, f64::min);
            let cmax = r.cloud.iter().map(|p| p[j]).fold(f64::NEG_INFINITY, f64::max);
            assert!((lo - cmin).abs() < 1e-12 && (hi - cmax).abs() < 1e-12);
            assert!(lo >= 0.0 && hi <= 1.0);
        }
        let v = estimate_violation(&r.set, &m, 100_000, Seed(99)).unwrap();
        assert!(v.fraction <= 0.1, "{v:?}");
        assert_eq!(r.cloud.len() as u64, r.certificate.n);
    }

    #[test]
    fn point_mass_noise_matches_identity() {
        let z = AxisBox::cube(2, 0.0, 0.0).unwrap();
        let opts = ApproxOptions::default();
        let a = approximate_image_set(&identity(z.clone()), Family::Ellipsoid, 0.1, 1e-3, Seed(5), &opts).unwrap();
        let b = approximate_image_set(&shifted(z), Family::Ellipsoid, 0.1, 1e-3, Seed(5), &opts).unwrap();
        assert_eq!(a.cloud, b.cloud);
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    }

    #[test]
    fn fixed_sample_count_reports_implied_epsilon() {
        let m = Model::builtin("sysF").unwrap();
        let opts = ApproxOptions {
            samples: Some(200),
            ..Default::default()
        };
        let r = approximate_image_set(&m, Family::Ellipsoid, 0.5, 0.01, Seed(7), &opts).unwrap();
        assert_eq!(r.cloud.len(), 200);
        assert!(r.cloud.iter().all(|p| r.set.contains(p.as_slice(), 1e-6)));
        assert!(r.certificate.epsilon > 0.0 && r.certificate.epsilon < 0.2);
    }

    #[test]
    fn violation_extremes_and_determinism() {
        let m = identity(AxisBox::cube(2, -0.1, 0.1).unwrap());
        let all = FittedSet::Nas(NasSet::from_box(&AxisBox::cube(2, -1e3, 1e3).unwrap()).unwrap());
        assert_eq!(estimate_violation(&all, &m, 5000, Seed(1)).unwrap().fraction, 0.0);
        let thin = FittedSet::Nas(NasSet::ball(DVector::from_vec(vec![0.5, 0.5]), 1e-9, Norm::L2).unwrap());
        assert!(estimate_violation(&thin, &m, 5000, Seed(1)).unwrap().fraction > 0.999);
        let unit = FittedSet::Nas(NasSet::ball(DVector::from_vec(vec![0.5, 0.5]), 0.5, Norm::L2).unwrap());
        let a = estimate_violation(&unit, &m, 10_000, Seed(2)).unwrap();
        let b = estimate_violation(&unit, &m, 10_000, Seed(2)).unwrap();
        assert_eq!(a, b);
        assert!(a.fraction > 0.0 && a.fraction < 1.0);
    }

    #[test]
    fn domain_errors_abort_construction_and_count_in_validation() {
        let m = Model::new(
            "log",
            (1, 1, 0),
            &["log(x1)"],
            &[],
            AxisBox::cube(1, -1.0, 1.0).unwrap(),
            AxisBox::cube(1, 0.0, 0.0).unwrap(),
            None,
        );
        // The center of X0 is already outside the domain of log.
        assert!(matches!(m, Err(Error::Domain(_))));
        let m = Model::new(
            "log",
            (1, 1, 0),
            &["log(x1)"],
            &[],
            AxisBox::cube(1, -1.0, 3.0).unwrap(),
            AxisBox::cube(1, 0.0, 0.0).unwrap(),
            None,
        )
        .unwrap();
        let r = approximate_image_set(&m, Family::Hyperrectangle, 0.1, 1e-3, Seed(1), &ApproxOptions::default());
        assert!(matches!(r, Err(Error::SampleDomain { .. })));
        let big = FittedSet::Nas(NasSet::from_box(&AxisBox::cube(1, -1e3, 1e3).unwrap()).unwrap());
        let v = estimate_violation(&big, &m, 20_000, Seed(3)).unwrap();
        assert!((v.fraction - 0.25).abs() < 0.02 && v.domain_errors > 0);
    }
}
