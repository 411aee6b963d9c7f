use anyhow::Result;
use imageset::scenario::{
    design_dimension, implied_epsilon, required_samples_exact, required_samples_explicit, violation_tail, Family,
};
use serde::Serialize;

#[derive(clap::Args)]
pub struct Args {
    #[arg(long)]
    eps: f64,
    #[arg(long)]
    delta: f64,
    #[arg(long)]
    family: Family,
    /// State dimension.
    #[arg(long)]
    n: usize,
    /// Polynomial degree (polynomial family only).
    #[arg(long)]
    degree: Option<usize>,
    /// Also report the ε implied by this sample count.
    #[arg(long = "N")]
    samples: Option<u64>,
}

#[derive(Serialize)]
struct Report {
    family: Family,
    n: usize,
    degree: Option<usize>,
    d: usize,
    epsilon: f64,
    delta: f64,
    n_explicit: u64,
    n_exact: u64,
    tail_explicit: f64,
    tail_exact: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    implied: Option<Implied>,
}

#[derive(Serialize)]
struct Implied {
    samples: u64,
    epsilon: f64,
}

pub fn run(a: Args) -> Result<()> {
    let degree = if a.family == Family::Pas { Some(a.degree.unwrap_or(4)) } else { None };
    let d = design_dimension(a.family, a.n, degree)?;
    let n_explicit = required_samples_explicit(a.eps, a.delta, d as u64)?;
    let n_exact = required_samples_exact(a.eps, a.delta, d as u64)?;
    let implied = match a.samples {
        Some(n) => Some(Implied {
            samples: n,
            epsilon: implied_epsilon(n, a.delta, d as u64)?,
        }),
        None => None,
    };
    let report = Report {
        family: a.family,
        n: a.n,
        degree,
        d,
        epsilon: a.eps,
        delta: a.delta,
        n_explicit,
        n_exact,
        tail_explicit: violation_tail(a.eps, n_explicit, d as u64)?,
        tail_exact: violation_tail(a.eps, n_exact, d as u64)?,
        implied,
    };
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(())
}
