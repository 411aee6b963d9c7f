use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use imageset::approx::{approximate_image_set, ApproxOptions, ViolationEstimate};
use imageset::convex::SolveReport;
use imageset::fit::{pas_volume_estimate, DomainChoice, FitOptions, MultiplierDegree};
use imageset::geometry::FittedSet;
use imageset::model::ModelSpec;
use imageset::{AxisBox, Family, Purpose, ScenarioCertificate, Seed};
use serde::Serialize;

use crate::manifest::{self, Recorder};
use crate::output::{self, Csv};

const PAS_VOLUME_DRAWS: usize = 100_000;

#[derive(clap::Args)]
pub struct Args {
    /// Model JSON file, or a builtin model name.
    #[arg(long)]
    model: String,
    #[arg(long, default_value = "ellipsoid")]
    family: Family,
    #[arg(long, default_value_t = 0.1)]
    eps: f64,
    #[arg(long, default_value_t = 1e-3)]
    delta: f64,
    /// Polynomial degree of the pas family.
    #[arg(long, default_value_t = 4)]
    degree: usize,
    /// Fixed sample count; the certificate then reports the implied ε.
    #[arg(long = "N")]
    samples: Option<usize>,
    #[arg(long, env = "IMAGESET_SEED", default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "result.json")]
    out: PathBuf,
    /// Write the mapped sample cloud as CSV.
    #[arg(long)]
    cloud: Option<PathBuf>,
    /// Fresh samples for a Monte Carlo violation estimate.
    #[arg(long)]
    validate: Option<usize>,
    /// Domain box of the pas family: `auto`, or `lo1,hi1,lo2,hi2,...`.
    #[arg(long = "box", default_value = "auto")]
    domain: String,
    /// Multiplier degrees of the pas certificate (full or truncated).
    #[arg(long, default_value = "full")]
    multipliers: String,
    /// Manifest path; defaults to `<out>.manifest.json`.
    #[arg(long)]
    manifest: Option<PathBuf>,
}

#[derive(Serialize)]
struct Config<'a> {
    model: &'a ModelSpec,
    family: Family,
    epsilon: f64,
    delta: f64,
    seed: u64,
    options: &'a ApproxOptions,
}

#[derive(Serialize)]
struct Output<'a> {
    model: &'a str,
    family: Family,
    seed: u64,
    certificate: &'a ScenarioCertificate,
    set: &'a FittedSet,
    /// Monte Carlo estimate for the pas family.
    volume: Option<f64>,
    log_volume: Option<f64>,
    spans: Vec<(f64, f64)>,
    empirical_violation: Option<ViolationEstimate>,
    solver: Option<&'a SolveReport>,
    gram_min_eigenvalues: Option<Vec<f64>>,
}

fn parse_domain(s: &str, n: usize) -> Result<DomainChoice> {
    if s == "auto" {
        return Ok(DomainChoice::Auto);
    }
    let v = crate::parse_list(s).map_err(|e| anyhow::anyhow!("--box: {e}"))?;
    if v.len() != 2 * n {
        bail!("--box needs {} numbers (lower and upper per axis), got {}", 2 * n, v.len());
    }
    let lower = v.iter().step_by(2).copied().collect();
    let upper = v.iter().skip(1).step_by(2).copied().collect();
    Ok(DomainChoice::Fixed(AxisBox::new(lower, upper)?))
}

fn parse_multipliers(s: &str) -> Result<MultiplierDegree> {
    match s {
        "full" => Ok(MultiplierDegree::Full),
        "truncated" => Ok(MultiplierDegree::Truncated),
        other => bail!("unknown multiplier degree '{other}' (full or truncated)"),
    }
}

pub fn run(a: Args) -> Result<()> {
    let (model, model_path) = crate::load_model(&a.model)?;
    let mut fit = FitOptions {
        degree: a.degree,
        domain: parse_domain(&a.domain, model.n())?,
        ..FitOptions::default()
    };
    fit.pas.multiplier_degree = parse_multipliers(&a.multipliers)?;
    let options = ApproxOptions {
        samples: a.samples,
        fit,
        validate: a.validate,
    };
    let spec = model.spec();
    let config = serde_json::to_value(Config {
        model: &spec,
        family: a.family,
        epsilon: a.eps,
        delta: a.delta,
        seed: a.seed,
        options: &options,
    })?;
    let mut recorder = Recorder::new(a.seed, config);
    recorder.default_arg("--out", &a.out);
    if let Some(p) = &model_path {
        recorder.input(p);
    }

    let result = approximate_image_set(&model, a.family, a.eps, a.delta, Seed(a.seed), &options)?;
    log::info!(
        "N = {}, sampling {:.3}s, fit {:.3}s, validation {:.3}s",
        result.certificate.n,
        result.timings.sampling,
        result.timings.fit,
        result.timings.validation
    );

    let (volume, log_volume, spans) = match &result.set {
        FittedSet::Nas(s) => (Some(s.volume()), Some(s.log_volume()), s.spans()),
        FittedSet::Pas(u) => {
            let stream = Seed(a.seed).derive(3).stream(0, 0, Purpose::Generic);
            let (v, _) = pas_volume_estimate(u, &stream, PAS_VOLUME_DRAWS)?;
            let d = u.domain();
            (Some(v), Some(v.ln()), d.lower().iter().copied().zip(d.upper().iter().copied()).collect())
        }
    };
    let gram_min_eigenvalues = result
        .set
        .as_pas()
        .map(|u| u.certificate().iter().map(|g| g.min_eigenvalue()).collect());
    let out = Output {
        model: model.name(),
        family: result.family,
        seed: a.seed,
        certificate: &result.certificate,
        set: &result.set,
        volume,
        log_volume,
        spans,
        empirical_violation: result.empirical_violation,
        solver: result.solver.as_ref(),
        gram_min_eigenvalues,
    };
    output::write_json(&a.out, &out)?;
    recorder.output(&a.out);

    if let Some(path) = &a.cloud {
        let header: Vec<String> = (1..=model.n()).map(|j| format!("y{j}")).collect();
        let mut csv = Csv::create(path, &header)?;
        for p in &result.cloud {
            csv.row(&p.iter().map(|v| output::num(*v)).collect::<Vec<_>>())?;
        }
        csv.finish()?;
        recorder.output(path);
    }

    let manifest_path = manifest::default_path(&a.out, a.manifest.as_deref());
    recorder.write(&manifest_path).context("writing the run manifest")?;
    Ok(())
}
