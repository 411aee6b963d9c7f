//! Browser bindings for the demo page in `www/`. Every export takes and
//! returns JSON strings; the `*_json` functions hold the logic and run on
//! any target.

use imageset::filter::{initial_disc, run_filter, simulate_truth, FilterConfig, SamplePolicy};
use imageset::fit::{fit_family, FitOptions};
use imageset::geometry::{FittedSet, NasSet};
use imageset::scenario::{design_dimension, implied_epsilon, required_samples_exact, required_samples_explicit};
use imageset::{Family, Model, Norm, Seed};
use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use wasm_bindgen::prelude::*;

const OUTLINE_POINTS: usize = 128;
const MASK_SIZE: usize = 96;

/// Drawable form of a planar set.
#[derive(Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Shape {
    /// Closed boundary polygon.
    Outline { points: Vec<[f64; 2]> },
    /// Row-major membership grid over `[lower, upper]`, row 0 at the bottom.
    Mask {
        lower: [f64; 2],
        upper: [f64; 2],
        size: usize,
        cells: Vec<u8>,
    },
}

#[derive(Serialize)]
pub struct FitReport {
    pub family: Family,
    pub points: usize,
    pub design_dimension: usize,
    pub volume: f64,
    pub shape: Shape,
    pub set: FittedSet,
}

#[derive(Deserialize)]
struct FitRequest {
    points: Vec<[f64; 2]>,
    family: Family,
    #[serde(default = "default_degree")]
    degree: usize,
}

fn default_degree() -> usize {
    4
}

fn unit_boundary(norm: Norm, t: f64) -> [f64; 2] {
    let (s, c) = t.sin_cos();
    let scale = match norm {
        Norm::L2 => 1.0,
        Norm::Inf => 1.0 / c.abs().max(s.abs()),
        Norm::L1 => 1.0 / (c.abs() + s.abs()),
    };
    [c * scale, s * scale]
}

fn outline(a: &NasSet) -> Shape {
    let points = (0..OUTLINE_POINTS)
        .map(|i| {
            let t = std::f64::consts::TAU * i as f64 / OUTLINE_POINTS as f64;
            let p = a.map_from_unit(&unit_boundary(a.norm(), t));
            [p[0], p[1]]
        })
        .collect();
    Shape::Outline { points }
}

fn shape_of(set: &FittedSet) -> Shape {
    match set {
        FittedSet::Nas(a) => outline(a),
        FittedSet::Pas(u) => {
            let (lo, hi) = (u.domain().lower(), u.domain().upper());
            let mut cells = Vec::with_capacity(MASK_SIZE * MASK_SIZE);
            for r in 0..MASK_SIZE {
                for c in 0..MASK_SIZE {
                    let x = lo[0] + (hi[0] - lo[0]) * (c as f64 + 0.5) / MASK_SIZE as f64;
                    let y = lo[1] + (hi[1] - lo[1]) * (r as f64 + 0.5) / MASK_SIZE as f64;
                    cells.push(u.contains(&[x, y], 0.0) as u8);
                }
            }
            Shape::Mask {
                lower: [lo[0], lo[1]],
                upper: [hi[0], hi[1]],
                size: MASK_SIZE,
                cells,
            }
        }
    }
}

fn volume_of(set: &FittedSet) -> f64 {
    match set {
        FittedSet::Nas(a) => a.volume(),
        FittedSet::Pas(u) => u.integral(),
    }
}

/// Fits a minimum-volume set of the requested family to planar points.
/// Request: `{"points": [[x, y], ...], "family": "ellipsoid", "degree": 4}`.
pub fn fit_points_json(request: &str) -> Result<String, String> {
    let req: FitRequest = serde_json::from_str(request).map_err(|e| e.to_string())?;
    let points: Vec<DVector<f64>> = req.points.iter().map(|p| DVector::from_column_slice(p)).collect();
    let options = FitOptions {
        degree: req.degree,
        ..FitOptions::default()
    };
    let degree = (req.family == Family::Pas).then_some(req.degree);
    let d = design_dimension(req.family, 2, degree).map_err(|e| e.to_string())?;
    let (set, _) = fit_family(&points, req.family, &options).map_err(|e| e.to_string())?;
    let report = FitReport {
        family: req.family,
        points: points.len(),
        design_dimension: d,
        volume: volume_of(&set),
        shape: shape_of(&set),
        set,
    };
    serde_json::to_string(&report).map_err(|e| e.to_string())
}

#[derive(Serialize)]
struct Bounds {
    design_dimension: usize,
    n_exact: u64,
    n_explicit: u64,
    /// `ε` certified by the exact count at the same `δ`.
    implied_epsilon: f64,
}

/// Sample sizes for an `n`-dimensional fit of `family` at risk `(ε, δ)`.
pub fn sample_bounds_json(epsilon: f64, delta: f64, family: &str, n: usize, degree: usize) -> Result<String, String> {
    let family: Family = family.parse().map_err(|e: imageset::Error| e.to_string())?;
    let degree = (family == Family::Pas).then_some(degree);
    let run = || -> imageset::Result<Bounds> {
        let d = design_dimension(family, n, degree)?;
        let n_exact = required_samples_exact(epsilon, delta, d as u64)?;
        Ok(Bounds {
            design_dimension: d,
            n_exact,
            n_explicit: required_samples_explicit(epsilon, delta, d as u64)?,
            implied_epsilon: implied_epsilon(n_exact, delta, d as u64)?,
        })
    };
    let b = run().map_err(|e| e.to_string())?;
    serde_json::to_string(&b).map_err(|e| e.to_string())
}

#[derive(Serialize)]
struct FilterStep {
    k: usize,
    status: imageset::filter::StepStatus,
    truth: [f64; 2],
    measurement: f64,
    log_volume: f64,
    contains_truth: bool,
    shape: Shape,
}

#[derive(Serialize)]
struct FilterRun {
    samples_per_step: usize,
    start: [f64; 2],
    initial: Shape,
    steps: Vec<FilterStep>,
    stopped: Option<String>,
}

/// Runs the filter on the built-in two-state example with a simulated
/// trajectory started at `(0.6, 0.07)` and an initial disc of radius 6.8.
pub fn filter_demo_json(seed: u64, steps: usize, family: &str) -> Result<String, String> {
    let family: Family = family.parse().map_err(|e: imageset::Error| e.to_string())?;
    let run = || -> imageset::Result<FilterRun> {
        let model = Model::builtin("abrc08")?;
        let x0 = [0.6, 0.07];
        let truth = simulate_truth(&model, &x0, steps, Seed(seed).derive(2))?;
        let a0 = initial_disc(&x0, 6.8)?;
        let cfg = FilterConfig {
            family,
            samples: SamplePolicy::FromBounds {
                epsilon: 0.1,
                delta: 1e-3,
            },
            horizon: Some(steps),
            ..FilterConfig::default()
        };
        let trace = run_filter(&model, &a0, &truth.measurements, &cfg, Seed(seed))?;
        let steps = trace
            .steps
            .iter()
            .map(|r| {
                let x = &truth.states[r.k];
                FilterStep {
                    k: r.k,
                    status: r.status,
                    truth: [x[0], x[1]],
                    measurement: truth.measurements[r.k - 1][0],
                    log_volume: r.log_volume,
                    contains_truth: r.set.contains(x.as_slice(), 0.0),
                    shape: shape_of(&r.set),
                }
            })
            .collect();
        Ok(FilterRun {
            samples_per_step: trace.samples_per_step,
            start: x0,
            initial: shape_of(&a0),
            steps,
            stopped: trace.stopped.map(|s| format!("step {}: {}", s.step, s.message)),
        })
    };
    let out = run().map_err(|e| e.to_string())?;
    serde_json::to_string(&out).map_err(|e| e.to_string())
}

#[wasm_bindgen]
pub fn fit_points(request: &str) -> Result<String, JsError> {
    fit_points_json(request).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn sample_bounds(epsilon: f64, delta: f64, family: &str, n: usize, degree: usize) -> Result<String, JsError> {
    sample_bounds_json(epsilon, delta, family, n, degree).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn filter_demo(seed: u64, steps: usize, family: &str) -> Result<String, JsError> {
    filter_demo_json(seed, steps, family).map_err(|e| JsError::new(&e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ellipsoid_outline_passes_through_the_cross() {
        let out = fit_points_json(r#"{"points": [[1,0],[-1,0],[0,1],[0,-1]], "family": "ellipsoid"}"#).unwrap();
        let v: serde_json::Value = serde_json::from_str(&out).unwrap();
        assert!((v["volume"].as_f64().unwrap() - std::f64::consts::PI).abs() < 1e-5);
        let pts = v["shape"]["points"].as_array().unwrap();
        assert_eq!(pts.len(), OUTLINE_POINTS);
        for p in pts {
            let (x, y) = (p[0].as_f64().unwrap(), p[1].as_f64().unwrap());
            assert!((x.hypot(y) - 1.0).abs() < 1e-5);
        }
    }

    #[test]
    fn box_outline_is_a_square() {
        let out = fit_points_json(r#"{"points": [[0,0],[2,1]], "family": "box"}"#).unwrap();
        let v: serde_json::Value = serde_json::from_str(&out).unwrap();
        assert!((v["volume"].as_f64().unwrap() - 2.0).abs() < 1e-9);
        for p in v["shape"]["points"].as_array().unwrap() {
            let (x, y) = (p[0].as_f64().unwrap(), p[1].as_f64().unwrap());
            assert!((-1e-9..=2.0 + 1e-9).contains(&x) && (-1e-9..=1.0 + 1e-9).contains(&y));
        }
    }

    #[test]
    fn polynomial_fit_returns_a_mask_covering_the_points() {
        let out = fit_points_json(r#"{"points": [[0,0],[1,0.2],[0.4,1],[0.6,0.5]], "family": "pas", "degree": 2}"#).unwrap();
        let v: serde_json::Value = serde_json::from_str(&out).unwrap();
        assert_eq!(v["shape"]["kind"], "mask");
        let cells = v["shape"]["cells"].as_array().unwrap();
        assert_eq!(cells.len(), MASK_SIZE * MASK_SIZE);
        assert!(cells.iter().any(|c| c == 1));
    }

    #[test]
    fn bounds_and_errors() {
        let v: serde_json::Value = serde_json::from_str(&sample_bounds_json(0.1, 0.01, "ellipsoid", 2, 4).unwrap()).unwrap();
        assert_eq!(v["design_dimension"], 5);
        assert_eq!(v["n_explicit"], 152);
        assert!(sample_bounds_json(0.1, 0.01, "blob", 2, 4).is_err());
        assert!(fit_points_json(r#"{"points": [], "family": "box"}"#).is_err());
    }

    #[test]
    fn filter_demo_tracks_the_truth() {
        let v: serde_json::Value = serde_json::from_str(&filter_demo_json(1, 8, "ellipsoid").unwrap()).unwrap();
        let steps = v["steps"].as_array().unwrap();
        assert_eq!(steps.len(), 8);
        let hits = steps.iter().filter(|s| s["contains_truth"] == true).count();
        assert!(hits >= 6, "{hits}");
        assert!(v["stopped"].is_null());
    }
}
