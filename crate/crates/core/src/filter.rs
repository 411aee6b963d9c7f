//! Randomized prediction and prediction-correction filters.
//!
//! Each step draws states uniformly from the current set `A_k`, pushes them
//! through the dynamics with fresh noise, discards the images whose
//! measurement residual `y − g(x)` leaves the noise box `V`, and fits a new
//! minimum-volume set to what is left. No weights are carried between steps:
//! the next step again samples uniformly from the fitted set.
//!
//! Sample `i` of step `k` uses the streams `(k, i, State)` and
//! `(k, i, Noise)`; re-drawn samples continue the index range after `N`. The
//! trace is therefore a pure function of its inputs and the seed.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fit::{fit_family, pas_volume_estimate, FitOptions};
use crate::geometry::{AxisBox, FittedSet};
use crate::model::{DomainError, Model};
use crate::par;
use crate::sampling::{Purpose, Seed, SetSampler};
use crate::scenario::{design_dimension, required_samples_exact, Family};

/// How many samples each step propagates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "policy")]
pub enum SamplePolicy {
    /// Smallest `N` with `Φ(ε, N, d) ≤ δ` for the configured family.
    FromBounds { epsilon: f64, delta: f64 },
    Fixed { n: usize },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct FilterConfig {
    pub family: Family,
    pub samples: SamplePolicy,
    /// Slack on the measurement-noise box test.
    pub tolerance: f64,
    /// Redraw from `A_k` until `N` samples pass the measurement test.
    pub resample: bool,
    /// Start the next step from the surviving samples and draw only the
    /// missing ones afresh.
    pub reuse: bool,
    /// Re-draw rounds per step before giving up.
    pub max_attempts: usize,
    /// Number of steps; defaults to the number of measurements.
    pub horizon: Option<usize>,
    /// Per-step measurement-noise boxes overriding the model's `V`.
    pub v_schedule: Option<Vec<AxisBox>>,
    /// Fall back to the uncorrected prediction when every sample is
    /// rejected, instead of stopping.
    pub continue_on_inconsistent: bool,
    pub fit: FitOptions,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            family: Family::Ellipsoid,
            samples: SamplePolicy::FromBounds {
                epsilon: 0.1,
                delta: 1e-3,
            },
            tolerance: 0.0,
            resample: true,
            reuse: false,
            max_attempts: 50,
            horizon: None,
            v_schedule: None,
            continue_on_inconsistent: false,
            fit: FitOptions::default(),
        }
    }
}

impl FilterConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_attempts == 0 {
            return Err(Error::InvalidParameter("max_attempts must be at least 1".into()));
        }
        if !(self.tolerance >= 0.0) {
            return Err(Error::InvalidParameter("tolerance must be non-negative".into()));
        }
        if let SamplePolicy::Fixed { n: 0 } = self.samples {
            return Err(Error::InvalidParameter("fixed sample count must be at least 1".into()));
        }
        Ok(())
    }

    /// Samples per step for an `n`-dimensional state.
    pub fn sample_count(&self, n: usize) -> Result<usize> {
        match self.samples {
            SamplePolicy::Fixed { n } => Ok(n),
            SamplePolicy::FromBounds { epsilon, delta } => {
                let degree = (self.family == Family::Pas).then_some(self.fit.degree);
                let d = design_dimension(self.family, n, degree)?;
                Ok(required_samples_exact(epsilon, delta, d as u64)? as usize)
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StepStatus {
    /// Fitted to the samples that passed the measurement test.
    Corrected,
    /// No measurement was applied.
    Predicted,
    /// Every sample was rejected; the set is the uncorrected prediction.
    Inconsistent,
}

#[derive(Clone, Debug, Serialize)]
pub struct StepRecord {
    /// Index of the fitted set `A_k`, starting at 1.
    pub k: usize,
    pub status: StepStatus,
    pub set: FittedSet,
    /// First-round samples; equals `N`.
    pub n_drawn: usize,
    /// First-round samples that failed the measurement test or the
    /// dynamics evaluation.
    pub n_rejected: usize,
    /// Re-drawn samples that passed and were added.
    pub n_resampled: usize,
    /// Samples in the fit: `n_drawn − n_rejected + n_resampled`.
    pub n_used: usize,
    /// Samples rejected because `f` or `g` could not be evaluated.
    pub n_domain_errors: usize,
    /// Total extra draws made by re-sampling.
    pub n_redrawn: usize,
    /// First-round states carried over from the previous step.
    pub n_reused: usize,
    /// First-round states drawn afresh from `A_{k−1}`.
    pub n_fresh: usize,
    pub volume: f64,
    pub log_volume: f64,
    /// `(min, max)` of the set along each axis.
    pub spans: Vec<(f64, f64)>,
    #[serde(skip)]
    pub wall_time: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct StopReason {
    pub step: usize,
    pub message: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct FilterTrace {
    pub samples_per_step: usize,
    pub steps: Vec<StepRecord>,
    /// Set when a step failed; `steps` then holds the records before it.
    pub stopped: Option<StopReason>,
}

impl FilterTrace {
    pub fn final_set(&self) -> Option<&FittedSet> {
        self.steps.last().map(|s| &s.set)
    }

    /// Fraction of steps `k = 1..` whose set contains `states[k]`.
    pub fn containment_frequency(&self, states: &[DVector<f64>], tol: f64) -> f64 {
        let hits = self
            .steps
            .iter()
            .filter(|s| states.get(s.k).is_some_and(|x| s.set.contains(x.as_slice(), tol)))
            .count();
        hits as f64 / self.steps.len().max(1) as f64
    }

    /// Fraction of steps whose span along `axis` contains `states[k][axis]`.
    pub fn span_containment(&self, states: &[DVector<f64>], axis: usize) -> f64 {
        let hits = self
            .steps
            .iter()
            .filter(|s| {
                states.get(s.k).is_some_and(|x| {
                    let (lo, hi) = s.spans[axis];
                    x[axis] >= lo && x[axis] <= hi
                })
            })
            .count();
        hits as f64 / self.steps.len().max(1) as f64
    }
}

/// Propagated samples of one round, in index order.
type Propagated = Vec<std::result::Result<DVector<f64>, DomainError>>;

/// Maps sample indices `range` of step `epoch`. Index `i < carried.len()`
/// starts from `carried[i]`; the rest start from a uniform draw of `states`.
fn propagate(
    model: &Model,
    states: &dyn SetSampler,
    carried: &[DVector<f64>],
    seed: Seed,
    epoch: u64,
    start: usize,
    count: usize,
) -> Result<Propagated> {
    let out = par::map_range(count, |j| -> Result<std::result::Result<DVector<f64>, DomainError>> {
        let i = start + j;
        let mut x = vec![0.0; model.n()];
        match carried.get(i) {
            Some(c) => x.copy_from_slice(c.as_slice()),
            None => states.draw_into(&mut seed.stream(epoch, i as u64, Purpose::State).rng(), &mut x)?,
        }
        let mut w = vec![0.0; model.n_w()];
        model
            .noise_set()
            .draw_into(&mut seed.stream(epoch, i as u64, Purpose::Noise).rng(), &mut w)?;
        let mut y = DVector::zeros(model.n());
        Ok(model.eval_dynamics_into(&x, &w, y.as_mut_slice()).map(|()| y))
    });
    out.into_iter().collect()
}

fn set_volume(set: &FittedSet, seed: Seed, epoch: u64) -> Result<(f64, f64)> {
    match set {
        FittedSet::Nas(a) => Ok((a.volume(), a.log_volume())),
        FittedSet::Pas(u) => {
            let (v, _) = pas_volume_estimate(u, &seed.stream(epoch, 0, Purpose::Generic), 100_000)?;
            Ok((v, v.ln()))
        }
    }
}

fn set_spans(set: &FittedSet) -> Vec<(f64, f64)> {
    match set {
        FittedSet::Nas(a) => a.spans(),
        FittedSet::Pas(u) => u.domain().lower().iter().copied().zip(u.domain().upper().iter().copied()).collect(),
    }
}

/// One prediction: `N` uniform states of `a_k`, one noise draw each, one fit.
/// Samples whose dynamics fail are dropped; the count is returned.
pub fn predict(
    a_k: &FittedSet,
    model: &Model,
    n: usize,
    seed: Seed,
    epoch: u64,
    family: Family,
    fit: &FitOptions,
) -> Result<(FittedSet, usize)> {
    predict_m_steps(a_k, model, n, 1, seed, epoch, family, fit)
}

/// Pushes each of `n` states of `a_k` through `m_steps` noisy transitions
/// and fits once at the end (`m·N` noise draws, no intermediate fits).
/// Noise draw `j` of sample `i` uses index `i + j·N`, so one step coincides
/// with [`predict`].
#[allow(clippy::too_many_arguments)]
pub fn predict_m_steps(
    a_k: &FittedSet,
    model: &Model,
    n: usize,
    m_steps: usize,
    seed: Seed,
    epoch: u64,
    family: Family,
    fit: &FitOptions,
) -> Result<(FittedSet, usize)> {
    if n == 0 || m_steps == 0 {
        return Err(Error::InvalidParameter("sample count and step count must be at least 1".into()));
    }
    crate::error::check_dim(model.n(), a_k.dim())?;
    let mapped = par::map_range(n, |i| -> Result<Option<DVector<f64>>> {
        let mut x = vec![0.0; model.n()];
        a_k.draw_into(&mut seed.stream(epoch, i as u64, Purpose::State).rng(), &mut x)?;
        let mut w = vec![0.0; model.n_w()];
        let mut y = vec![0.0; model.n()];
        for j in 0..m_steps {
            let index = (i + j * n) as u64;
            model
                .noise_set()
                .draw_into(&mut seed.stream(epoch, index, Purpose::Noise).rng(), &mut w)?;
            if model.eval_dynamics_into(&x, &w, &mut y).is_err() {
                return Ok(None);
            }
            std::mem::swap(&mut x, &mut y);
        }
        Ok(Some(DVector::from_vec(x)))
    });
    let mut points = Vec::with_capacity(n);
    for r in mapped {
        if let Some(p) = r? {
            points.push(p);
        }
    }
    let dropped = n - points.len();
    if dropped > 0 {
        log::warn!("{dropped} of {n} samples left the domain of the dynamics");
    }
    if points.is_empty() {
        return Err(Error::Degenerate("every propagated sample failed to evaluate".into()));
    }
    let (set, _) = fit_family(&points, family, fit)?;
    Ok((set, dropped))
}

/// Result of one prediction-correction step.
#[derive(Clone, Debug)]
pub struct StepOutcome {
    pub record: StepRecord,
    /// Samples used in the fit, in index order; all lie in the new set.
    pub survivors: Vec<DVector<f64>>,
}

fn passes(model: &Model, x: &[f64], y: &[f64], v: &AxisBox, tol: f64, z: &mut [f64]) -> std::result::Result<bool, DomainError> {
    model.eval_measurement_into(x, z)?;
    for (zi, yi) in z.iter_mut().zip(y) {
        *zi = yi - *zi;
    }
    Ok(v.contains(z, tol))
}

/// One step of the prediction-correction filter from `a_k` to `A_{k+1}`.
///
/// `measurement` is `(y_{k+1}, V)`; with `None` the step is a plain
/// prediction. `carried` holds the previous step's survivors, used only when
/// re-use is on. Total rejection yields an `Inconsistent` record fitted to
/// the uncorrected prediction; the caller decides whether to go on.
pub fn rpcf_step(
    a_k: &FittedSet,
    carried: &[DVector<f64>],
    measurement: Option<(&[f64], &AxisBox)>,
    model: &Model,
    cfg: &FilterConfig,
    seed: Seed,
    k: usize,
) -> Result<StepOutcome> {
    cfg.validate()?;
    let started = par::Stopwatch::start();
    crate::error::check_dim(model.n(), a_k.dim())?;
    if let Some((y, v)) = measurement {
        crate::error::check_dim(model.n_y(), y.len())?;
        crate::error::check_dim(model.n_y(), v.dim())?;
    }
    let n = cfg.sample_count(model.n())?;
    let epoch = k as u64;
    let reused: &[DVector<f64>] = if cfg.reuse { &carried[..carried.len().min(n)] } else { &[] };

    let first = propagate(model, a_k, reused, seed, epoch, 0, n)?;
    let mut z = vec![0.0; model.n_y()];
    let mut domain_errors = 0;
    let mut good = Vec::with_capacity(n);
    let mut keep = |p: &std::result::Result<DVector<f64>, DomainError>, good: &mut Vec<DVector<f64>>, errs: &mut usize| {
        match p {
            Err(_) => *errs += 1,
            Ok(x) => match measurement {
                None => good.push(x.clone()),
                Some((y, v)) => match passes(model, x.as_slice(), y, v, cfg.tolerance, &mut z) {
                    Ok(true) => good.push(x.clone()),
                    Ok(false) => {}
                    Err(_) => *errs += 1,
                },
            },
        }
    };
    for p in &first {
        keep(p, &mut good, &mut domain_errors);
    }
    let n_rejected = n - good.len();

    let mut redrawn = 0;
    let mut resampled = 0;
    if cfg.resample && good.len() < n {
        let mut total_good = good.len();
        let mut total_drawn = n;
        for round in 0..cfg.max_attempts {
            let missing = n - good.len();
            let batch = if total_good == 0 {
                n.saturating_mul(1 << round.min(10))
            } else {
                let rate = total_good as f64 / total_drawn as f64;
                ((missing as f64 / rate) * 1.25).ceil() as usize
            }
            .clamp(missing, 1024 * n);
            let round_samples = propagate(model, a_k, &[], seed, epoch, n + redrawn, batch)?;
            redrawn += batch;
            total_drawn += batch;
            let mut fresh = Vec::new();
            for p in &round_samples {
                keep(p, &mut fresh, &mut domain_errors);
            }
            total_good += fresh.len();
            let take = fresh.len().min(missing);
            resampled += take;
            good.extend(fresh.into_iter().take(take));
            if good.len() == n {
                break;
            }
        }
    }

    let (status, fit_points) = if good.is_empty() {
        let prediction: Vec<DVector<f64>> = first.into_iter().filter_map(|p| p.ok()).collect();
        if prediction.is_empty() {
            return Err(Error::Degenerate("every propagated sample failed to evaluate".into()));
        }
        (StepStatus::Inconsistent, prediction)
    } else if measurement.is_some() {
        (StepStatus::Corrected, good.clone())
    } else {
        (StepStatus::Predicted, good.clone())
    };
    let (set, _) = fit_family(&fit_points, cfg.family, &cfg.fit)?;
    let (volume, log_volume) = set_volume(&set, seed, epoch)?;
    let record = StepRecord {
        k: k + 1,
        status,
        spans: set_spans(&set),
        set,
        n_drawn: n,
        n_rejected,
        n_resampled: resampled,
        n_used: n - n_rejected + resampled,
        n_domain_errors: domain_errors,
        n_redrawn: redrawn,
        n_reused: reused.len(),
        n_fresh: n - reused.len(),
        volume,
        log_volume,
        wall_time: started.seconds(),
    };
    Ok(StepOutcome { record, survivors: good })
}

/// Runs the filter from `a0` over `measurements[k]` (the measurement of
/// `x_{k+1}`). Models without outputs run `cfg.horizon` prediction steps.
/// A failing step ends the run; the trace keeps the completed steps.
pub fn run_filter(
    model: &Model,
    a0: &FittedSet,
    measurements: &[Vec<f64>],
    cfg: &FilterConfig,
    seed: Seed,
) -> Result<FilterTrace> {
    run_filter_observed(model, a0, measurements, cfg, seed, &mut |_| {})
}

/// As [`run_filter`], handing every completed step to `observe`.
pub fn run_filter_observed(
    model: &Model,
    a0: &FittedSet,
    measurements: &[Vec<f64>],
    cfg: &FilterConfig,
    seed: Seed,
    observe: &mut dyn FnMut(&StepOutcome),
) -> Result<FilterTrace> {
    cfg.validate()?;
    crate::error::check_dim(model.n(), a0.dim())?;
    let horizon = match (cfg.horizon, model.n_y()) {
        (Some(h), 0) => h,
        (None, 0) => return Err(Error::InvalidParameter("a horizon is required for a model without outputs".into())),
        (h, _) => {
            let h = h.unwrap_or(measurements.len());
            if measurements.len() < h {
                return Err(Error::InvalidParameter(format!(
                    "{} measurements for a horizon of {h}",
                    measurements.len()
                )));
            }
            h
        }
    };
    if horizon == 0 {
        return Err(Error::InvalidParameter("horizon must be at least 1".into()));
    }
    if let Some(s) = &cfg.v_schedule {
        if s.len() < horizon {
            return Err(Error::InvalidParameter(format!("V schedule has {} entries for {horizon} steps", s.len())));
        }
    }
    let mut trace = FilterTrace {
        samples_per_step: cfg.sample_count(model.n())?,
        steps: Vec::with_capacity(horizon),
        stopped: None,
    };
    let mut current = a0.clone();
    let mut carried = Vec::new();
    for k in 0..horizon {
        let v = match &cfg.v_schedule {
            Some(s) => Some(&s[k]),
            None => model.measurement_noise_set(),
        };
        let measurement = match (model.n_y(), v) {
            (0, _) => None,
            (_, Some(v)) => Some((measurements[k].as_slice(), v)),
            (_, None) => return Err(Error::InvalidParameter("model has outputs but no measurement-noise box".into())),
        };
        match rpcf_step(&current, &carried, measurement, model, cfg, seed, k) {
            Ok(out) => {
                observe(&out);
                let inconsistent = out.record.status == StepStatus::Inconsistent;
                current = out.record.set.clone();
                carried = out.survivors;
                trace.steps.push(out.record);
                if inconsistent && !cfg.continue_on_inconsistent {
                    trace.stopped = Some(StopReason {
                        step: k + 1,
                        message: "measurement inconsistent: every sample was rejected".into(),
                    });
                    break;
                }
            }
            Err(e) => {
                trace.stopped = Some(StopReason {
                    step: k + 1,
                    message: e.to_string(),
                });
                break;
            }
        }
    }
    Ok(trace)
}

/// A realized trajectory `x_0..x_K` and its measurements `y_1..y_K`.
#[derive(Clone, Debug)]
pub struct Truth {
    pub states: Vec<DVector<f64>>,
    pub measurements: Vec<Vec<f64>>,
}

/// Simulates the model from `x0` with uniform process and measurement noise.
pub fn simulate_truth(model: &Model, x0: &[f64], steps: usize, seed: Seed) -> Result<Truth> {
    crate::error::check_dim(model.n(), x0.len())?;
    let mut states = vec![DVector::from_column_slice(x0)];
    let mut measurements = Vec::with_capacity(steps);
    let mut w = vec![0.0; model.n_w()];
    let mut v = vec![0.0; model.n_y()];
    for k in 0..steps {
        let epoch = k as u64;
        model
            .noise_set()
            .draw_into(&mut seed.stream(epoch, 0, Purpose::Truth).rng(), &mut w)?;
        let x = model
            .eval_dynamics(states[k].as_slice(), &w)
            .map_err(|e| step_error(e, k + 1))?;
        let mut y = model.eval_measurement(&x).map_err(|e| step_error(e, k + 1))?;
        if let Some(vb) = model.measurement_noise_set() {
            vb.draw_into(&mut seed.stream(epoch, 1, Purpose::Truth).rng(), &mut v)?;
            for (yi, vi) in y.iter_mut().zip(&v) {
                *yi += vi;
            }
        }
        states.push(DVector::from_vec(x));
        measurements.push(y);
    }
    Ok(Truth { states, measurements })
}

fn step_error(e: Error, step: usize) -> Error {
    match e {
        Error::Domain(source) => Error::SampleDomain { index: step, source },
        other => other,
    }
}

/// Disc of radius `radius` about `center`, the usual initial set.
pub fn initial_disc(center: &[f64], radius: f64) -> Result<FittedSet> {
    Ok(FittedSet::Nas(crate::geometry::NasSet::ball(
        DVector::from_column_slice(center),
        radius,
        crate::geometry::Norm::L2,
    )?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::approx::estimate_violation;
    use crate::geometry::NasSet;
    use crate::sampling::sample_nas;

    fn linear(dynamics: [&str; 2], w: f64) -> Model {
        Model::new(
            "lin",
            (2, 2, 1),
            &dynamics,
            &["x1"],
            AxisBox::cube(2, -1.0, 1.0).unwrap(),
            AxisBox::cube(2, -w, w).unwrap(),
            Some(AxisBox::cube(1, -1e9, 1e9).unwrap()),
        )
        .unwrap()
    }

    fn unit_disc() -> FittedSet {
        initial_disc(&[0.0, 0.0], 1.0).unwrap()
    }

    fn fixed(n: usize) -> FilterConfig {
        FilterConfig {
            samples: SamplePolicy::Fixed { n },
            ..Default::default()
        }
    }

    #[test]
    fn identity_prediction_covers_the_previous_set() {
        let m = linear(["x1", "x2"], 0.0);
        let (a1, dropped) = predict(&unit_disc(), &m, 600, Seed(1), 0, Family::Ellipsoid, &FitOptions::default()).unwrap();
        assert_eq!(dropped, 0);
        let a0 = unit_disc().as_nas().unwrap().clone();
        let pts = sample_nas(&a0, &Seed(2).stream(0, 0, Purpose::Validation), 100_000).unwrap();
        let inside = pts.iter().filter(|p| a1.contains(p.as_slice(), 0.0)).count();
        assert!(inside as f64 >= 0.9 * 100_000.0, "{inside}");
    }

    #[test]
    fn doubling_map_scales_volume() {
        let id = linear(["x1", "x2"], 0.0);
        let dbl = linear(["2*x1", "2*x2"], 0.0);
        let opts = FitOptions::default();
        let (a, _) = predict(&unit_disc(), &id, 800, Seed(4), 0, Family::Ellipsoid, &opts).unwrap();
        let (b, _) = predict(&unit_disc(), &dbl, 800, Seed(4), 0, Family::Ellipsoid, &opts).unwrap();
        let ratio = b.as_nas().unwrap().volume() / a.as_nas().unwrap().volume();
        assert!((ratio - 4.0).abs() < 0.4, "{ratio}");
    }

    #[test]
    fn one_step_ahead_equals_predict() {
        let m = linear(["x2 + w1", "0.5*x1 + w2"], 0.1);
        let opts = FitOptions::default();
        let (a, _) = predict(&unit_disc(), &m, 300, Seed(9), 3, Family::Ellipsoid, &opts).unwrap();
        let (b, _) = predict_m_steps(&unit_disc(), &m, 300, 1, Seed(9), 3, Family::Ellipsoid, &opts).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    }

    #[test]
    fn random_walk_box_grows_linearly() {
        let m = linear(["x1 + w1", "x2 + w2"], 0.1);
        let start = FittedSet::Nas(NasSet::from_box(&AxisBox::cube(2, -1e-3, 1e-3).unwrap()).unwrap());
        let opts = FitOptions::default();
        let widths: Vec<f64> = [1usize, 2, 3]
            .iter()
            .map(|&steps| {
                let (a, _) = predict_m_steps(&start, &m, 20_000, steps, Seed(11), 0, Family::Hyperrectangle, &opts).unwrap();
                let (lo, hi) = a.as_nas().unwrap().axis_extent(0);
                hi - lo
            })
            .collect();
        // each step adds at most 0.2 to the support width
        for pair in widths.windows(2) {
            let slope = pair[1] - pair[0];
            assert!((slope / 0.2 - 1.0).abs() < 0.25, "{widths:?}");
        }
    }

    #[test]
    fn vacuous_measurement_equals_prediction() {
        let m = linear(["x2 + w1", "0.5*x1 + w2"], 0.1);
        let cfg = fixed(300);
        let out = rpcf_step(&unit_disc(), &[], Some((&[0.0], &AxisBox::cube(1, -1e9, 1e9).unwrap())), &m, &cfg, Seed(9), 3).unwrap();
        assert_eq!(out.record.n_rejected, 0);
        assert_eq!(out.record.n_used, 300);
        let (p, _) = predict(&unit_disc(), &m, 300, Seed(9), 3, Family::Ellipsoid, &cfg.fit).unwrap();
        assert_eq!(serde_json::to_string(&p).unwrap(), serde_json::to_string(&out.record.set).unwrap());
    }

    #[test]
    fn survivors_lie_in_the_slab_and_bookkeeping_holds() {
        let m = Model::builtin("abrc08").unwrap();
        let a0 = initial_disc(&[0.6, 0.07], 6.8).unwrap();
        let v = AxisBox::cube(1, -0.2, 0.2).unwrap();
        let y = [0.7];
        let cfg = fixed(200);
        let out = rpcf_step(&a0, &[], Some((&y, &v)), &m, &cfg, Seed(1), 0).unwrap();
        let r = &out.record;
        assert_eq!(r.status, StepStatus::Corrected);
        assert_eq!(r.n_used, r.n_drawn - r.n_rejected + r.n_resampled);
        assert_eq!(r.n_used, 200);
        assert_eq!(out.survivors.len(), 200);
        for s in &out.survivors {
            assert!((y[0] - s[0] - s[1]).abs() <= 0.2 + 1e-9);
            assert!(r.set.contains(s.as_slice(), 1e-6));
        }
    }

    #[test]
    fn reuse_draws_only_the_missing_states() {
        let m = Model::builtin("abrc08").unwrap();
        let a0 = initial_disc(&[0.6, 0.07], 6.8).unwrap();
        let v = AxisBox::cube(1, -0.2, 0.2).unwrap();
        let cfg = FilterConfig {
            reuse: true,
            resample: false,
            ..fixed(300)
        };
        let first = rpcf_step(&a0, &[], Some((&[0.7], &v)), &m, &cfg, Seed(2), 0).unwrap();
        let good = first.survivors.len();
        assert!(good > 0 && good < 300);
        let second = rpcf_step(&first.record.set, &first.survivors, Some((&[0.5], &v)), &m, &cfg, Seed(2), 1).unwrap();
        assert_eq!(second.record.n_reused, good);
        assert_eq!(second.record.n_fresh, 300 - good);
    }

    #[test]
    fn impossible_measurement_is_reported() {
        let m = Model::builtin("abrc08").unwrap();
        let a0 = initial_disc(&[0.6, 0.07], 6.8).unwrap();
        let v = AxisBox::cube(1, -0.2, 0.2).unwrap();
        let cfg = FilterConfig {
            max_attempts: 2,
            ..fixed(100)
        };
        let out = rpcf_step(&a0, &[], Some((&[1e6], &v)), &m, &cfg, Seed(3), 0).unwrap();
        assert_eq!(out.record.status, StepStatus::Inconsistent);
        let trace = run_filter(&m, &a0, &[vec![1e6], vec![0.0]], &cfg, Seed(3)).unwrap();
        assert_eq!(trace.steps.len(), 1);
        assert!(trace.stopped.is_some());
    }

    #[test]
    fn exact_measurements_shrink_the_set() {
        let m = Model::new(
            "rot",
            (2, 2, 1),
            &["0.9*x2 + w1", "-0.9*x1 + w2"],
            &["x1"],
            AxisBox::cube(2, -1.0, 1.0).unwrap(),
            AxisBox::cube(2, 0.0, 0.0).unwrap(),
            Some(AxisBox::cube(1, -0.05, 0.05).unwrap()),
        )
        .unwrap();
        let truth = simulate_truth(&m, &[0.3, -0.2], 10, Seed(5)).unwrap();
        let a0 = initial_disc(&[0.0, 0.0], 1.5).unwrap();
        let trace = run_filter(&m, &a0, &truth.measurements, &fixed(300), Seed(5)).unwrap();
        assert!(trace.stopped.is_none());
        assert_eq!(trace.steps.len(), 10);
        let first = trace.steps[0].spans[0];
        let last = trace.steps[9].spans[0];
        assert!(last.1 - last.0 < 3.0 && last.1 - last.0 < first.1 - first.0 + 1e-12);
        assert!(trace.steps.iter().all(|s| s.n_used == s.n_drawn - s.n_rejected + s.n_resampled));
    }

    #[test]
    fn truth_simulation() {
        let m = Model::builtin("abrc08").unwrap();
        let zero = m
            .clone()
            .with_sets(
                m.initial_set().clone(),
                AxisBox::cube(2, 0.0, 0.0).unwrap(),
                Some(AxisBox::cube(1, 0.0, 0.0).unwrap()),
            )
            .unwrap();
        let t = simulate_truth(&zero, &[0.6, 0.07], 1, Seed(1)).unwrap();
        assert!((t.states[1][0] - 0.137_901_880_039_050_9).abs() < 1e-14);
        assert!((t.states[1][1] - 0.6424).abs() < 1e-14);
        assert_eq!(t.measurements[0][0], t.states[1][0] + t.states[1][1]);
        let a = simulate_truth(&m, &[0.6, 0.07], 20, Seed(8)).unwrap();
        let b = simulate_truth(&m, &[0.6, 0.07], 20, Seed(8)).unwrap();
        assert_eq!(a.states, b.states);
        assert_eq!(a.measurements, b.measurements);
    }

    #[test]
    fn prediction_only_run_needs_a_horizon() {
        let m = Model::builtin("sysF").unwrap();
        let a0 = FittedSet::Nas(NasSet::from_box(m.initial_set()).unwrap());
        assert!(run_filter(&m, &a0, &[], &fixed(100), Seed(1)).is_err());
        let cfg = FilterConfig {
            horizon: Some(1),
            ..fixed(100)
        };
        let trace = run_filter(&m, &a0, &[], &cfg, Seed(1)).unwrap();
        assert_eq!(trace.steps[0].status, StepStatus::Predicted);
        let v = estimate_violation(&trace.steps[0].set, &m, 1000, Seed(2)).unwrap();
        assert!(v.fraction < 0.5);
    }
}
