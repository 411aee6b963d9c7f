use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use imageset::filter::{initial_disc, run_filter, simulate_truth, FilterConfig, FilterTrace, StepRecord, StepStatus, StopReason};
use imageset::geometry::FittedSet;
use imageset::model::ModelSpec;
use imageset::{Model, Seed};
use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::manifest::{self, Recorder};
use crate::output::{self, Csv};
use crate::Failure;

#[derive(clap::Args)]
pub struct Args {
    /// Model JSON file, or a builtin model name.
    #[arg(long)]
    model: String,
    /// Filter configuration JSON.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, env = "IMAGESET_SEED", default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "trace.csv")]
    out: PathBuf,
    #[arg(long)]
    summary: Option<PathBuf>,
    /// Simulate a trajectory from `--x0` and filter its measurements.
    #[arg(long)]
    simulate: bool,
    /// True initial state for `--simulate`; defaults to the centre of X0.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    x0: Option<Vec<f64>>,
    /// Number of steps.
    #[arg(long = "K")]
    steps: Option<usize>,
    /// Measurements CSV (header row, one row per step).
    #[arg(long)]
    measurements: Option<PathBuf>,
    /// Write the simulated states as CSV.
    #[arg(long)]
    truth: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    initial_center: Option<Vec<f64>>,
    #[arg(long)]
    initial_radius: Option<f64>,
    #[arg(long)]
    continue_on_inconsistent: bool,
    /// Manifest path; defaults to `<out>.manifest.json`.
    #[arg(long)]
    manifest: Option<PathBuf>,
}

/// Initial disc `A_0`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Initial {
    pub center: Vec<f64>,
    pub radius: f64,
}

#[derive(Debug, Default, Serialize, Deserialize)]
struct ConfigFile {
    #[serde(flatten)]
    filter: FilterConfig,
    initial: Option<Initial>,
}

#[derive(Serialize)]
struct Resolved<'a> {
    model: &'a ModelSpec,
    filter: &'a FilterConfig,
    initial: &'a Initial,
    seed: u64,
    simulate: bool,
    x0: Option<&'a [f64]>,
    steps: Option<usize>,
}

#[derive(Serialize)]
struct Summary<'a> {
    model: &'a str,
    seed: u64,
    samples_per_step: usize,
    steps: &'a [StepRecord],
    stopped: &'a Option<StopReason>,
    containment: Option<f64>,
}

/// Disc about the centre of X0 that circumscribes X0.
fn default_initial(model: &Model) -> Initial {
    let b = model.initial_set();
    let radius = b.widths().iter().map(|w| 0.25 * w * w).sum::<f64>().sqrt();
    Initial {
        center: b.center(),
        radius,
    }
}

fn trace_header(n: usize) -> Vec<String> {
    let mut h = vec!["k".to_string()];
    h.extend((1..=n).map(|j| format!("c{j}")));
    for i in 1..=n {
        h.extend((1..=n).map(|j| format!("P{i}{j}")));
    }
    h.push("logvol".into());
    for j in 1..=n {
        h.push(format!("lo{j}"));
        h.push(format!("hi{j}"));
    }
    h.extend(["N_drawn", "N_rejected", "N_resampled", "status"].map(String::from));
    h
}

fn trace_row(r: &StepRecord, n: usize) -> Vec<String> {
    let mut row = vec![r.k.to_string()];
    match &r.set {
        FittedSet::Nas(a) => {
            row.extend(a.center().iter().map(|v| output::num(*v)));
            for i in 0..n {
                row.extend((0..n).map(|j| output::num(a.shape()[(i, j)])));
            }
        }
        FittedSet::Pas(_) => row.extend(std::iter::repeat_n(String::new(), n + n * n)),
    }
    row.push(output::num(r.log_volume));
    for (lo, hi) in &r.spans {
        row.push(output::num(*lo));
        row.push(output::num(*hi));
    }
    row.push(r.n_drawn.to_string());
    row.push(r.n_rejected.to_string());
    row.push(r.n_resampled.to_string());
    row.push(
        match r.status {
            StepStatus::Corrected => "corrected",
            StepStatus::Predicted => "predicted",
            StepStatus::Inconsistent => "inconsistent",
        }
        .to_string(),
    );
    row
}

fn write_trace(path: &std::path::Path, trace: &FilterTrace, n: usize) -> Result<()> {
    let mut csv = Csv::create(path, &trace_header(n))?;
    for r in &trace.steps {
        csv.row(&trace_row(r, n))?;
    }
    csv.finish()
}

pub fn run(a: Args) -> Result<()> {
    let (model, model_path) = crate::load_model(&a.model)?;
    let mut file = match &a.config {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            serde_json::from_str::<ConfigFile>(&text).with_context(|| format!("parsing {}", p.display()))?
        }
        None => ConfigFile::default(),
    };
    if a.continue_on_inconsistent {
        file.filter.continue_on_inconsistent = true;
    }
    if let Some(k) = a.steps {
        file.filter.horizon = Some(k);
    }
    let mut initial = file.initial.clone().unwrap_or_else(|| default_initial(&model));
    if let Some(c) = &a.initial_center {
        initial.center = c.clone();
    }
    if let Some(r) = a.initial_radius {
        initial.radius = r;
    }
    if initial.center.len() != model.n() {
        bail!("initial centre has {} entries for a {}-dimensional state", initial.center.len(), model.n());
    }
    file.filter.validate()?;
    let cfg = file.filter;

    let spec = model.spec();
    let resolved = serde_json::to_value(Resolved {
        model: &spec,
        filter: &cfg,
        initial: &initial,
        seed: a.seed,
        simulate: a.simulate,
        x0: a.x0.as_deref(),
        steps: a.steps,
    })?;
    let mut recorder = Recorder::new(a.seed, resolved);
    recorder.default_arg("--out", &a.out);
    for p in [model_path.as_ref(), a.config.as_ref(), a.measurements.as_ref()].into_iter().flatten() {
        recorder.input(p);
    }

    let seed = Seed(a.seed);
    let mut truth_states: Option<Vec<DVector<f64>>> = None;
    let measurements = match (&a.measurements, a.simulate) {
        (Some(_), true) => bail!("--measurements and --simulate are mutually exclusive"),
        (Some(p), false) => output::read_rows(p)?,
        (None, true) => {
            let k = cfg.horizon.context("--simulate needs --K or a horizon in the configuration")?;
            let x0 = a.x0.clone().unwrap_or_else(|| model.initial_set().center());
            let truth = simulate_truth(&model, &x0, k, seed.derive(2))?;
            truth_states = Some(truth.states);
            truth.measurements
        }
        (None, false) if model.n_y() == 0 => Vec::new(),
        (None, false) => bail!("the model has outputs: pass --measurements or --simulate"),
    };
    if let Some(bad) = measurements.iter().position(|y| y.len() != model.n_y()) {
        bail!("measurement {} has {} entries, expected {}", bad + 1, measurements[bad].len(), model.n_y());
    }

    let a0 = initial_disc(&initial.center, initial.radius)?;
    let trace = run_filter(&model, &a0, &measurements, &cfg, seed)?;

    write_trace(&a.out, &trace, model.n())?;
    recorder.output(&a.out);
    if let (Some(path), Some(states)) = (&a.truth, &truth_states) {
        let header: Vec<String> = std::iter::once("k".to_string())
            .chain((1..=model.n()).map(|j| format!("x{j}")))
            .collect();
        let mut csv = Csv::create(path, &header)?;
        for (k, x) in states.iter().enumerate() {
            let mut row = vec![k.to_string()];
            row.extend(x.iter().map(|v| output::num(*v)));
            csv.row(&row)?;
        }
        csv.finish()?;
        recorder.output(path);
    }
    if let Some(path) = &a.summary {
        let containment = truth_states.as_ref().map(|s| trace.containment_frequency(s, 0.0));
        output::write_json(
            path,
            &Summary {
                model: model.name(),
                seed: a.seed,
                samples_per_step: trace.samples_per_step,
                steps: &trace.steps,
                stopped: &trace.stopped,
                containment,
            },
        )?;
        recorder.output(path);
    }
    let manifest_path = manifest::default_path(&a.out, a.manifest.as_deref());
    recorder.write(&manifest_path).context("writing the run manifest")?;

    if let Some(stop) = &trace.stopped {
        return Err(Failure(format!("filter stopped at step {}: {}", stop.step, stop.message)).into());
    }
    Ok(())
}
