#![allow(dead_code)]

pub mod grammar;

use imageset::model::{parse_expression, Compiled, Model};
use imageset::{Purpose, Seed};
use rand::Rng;

/// Runs the grammar cases; returns the failures.
pub fn grammar_failures() -> Vec<String> {
    let mut failures = Vec::new();
    for (src, expect) in grammar::cases() {
        let parsed = parse_expression(src);
        match (expect, parsed) {
            (grammar::Expect::Value(v), Ok(e)) => match Compiled::new(e).eval(&grammar::X, &grammar::W, "case") {
                Ok(got) if (got - v).abs() <= 1e-12 * v.abs().max(1.0) => {}
                other => failures.push(format!("{src:?}: expected {v}, got {other:?}")),
            },
            (grammar::Expect::Domain, Ok(e)) => {
                if Compiled::new(e).eval(&grammar::X, &grammar::W, "case").is_ok() {
                    failures.push(format!("{src:?}: expected a domain error"));
                }
            }
            (grammar::Expect::Error(line, col), Err(err)) => {
                if (err.line, err.column) != (line, col) {
                    failures.push(format!("{src:?}: error at {}:{}, expected {line}:{col}", err.line, err.column));
                }
            }
            (_, Ok(_)) => failures.push(format!("{src:?}: expected a syntax error")),
            (_, Err(err)) => failures.push(format!("{src:?}: unexpected syntax error {err}")),
        }
    }
    failures
}

pub fn sys_f_closed(x: &[f64], w: &[f64]) -> [f64; 2] {
    [
        x[1].sin() + 3.0 * x[1].cos() + w[0],
        3.0 * x[0] - 20.0 * (1.0 + x[1]).ln() + w[1],
    ]
}

pub fn abrc08_closed(x: &[f64], w: &[f64]) -> [f64; 2] {
    let (a, b) = (x[0], x[1]);
    [
        -0.7 * b + 0.1 * b * b + 0.1 * a * b + 0.1 * a.exp() + w[0],
        a + b - 0.1 * a * a + 0.2 * a * b + w[1],
    ]
}

/// Largest relative mismatch between the builtins and their closed forms
/// at 20 random points each.
pub fn builtin_mismatch(seed: u64) -> f64 {
    let mut worst: f64 = 0.0;
    let mut rng = Seed(seed).stream(0, 0, Purpose::Generic).rng();
    let f = Model::builtin("sysF").unwrap();
    let a = Model::builtin("abrc08").unwrap();
    for _ in 0..20 {
        let x = [rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)];
        let w = [rng.gen_range(-0.2..0.2), rng.gen_range(-0.2..0.2)];
        let got = f.eval_dynamics(&x, &w).unwrap();
        for (g, e) in got.iter().zip(sys_f_closed(&x, &w)) {
            worst = worst.max((g - e).abs() / e.abs().max(1.0));
        }
        let x = [rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0)];
        let w = [rng.gen_range(-0.1..0.1), rng.gen_range(-0.1..0.1)];
        let got = a.eval_dynamics(&x, &w).unwrap();
        for (g, e) in got.iter().zip(abrc08_closed(&x, &w)) {
            worst = worst.max((g - e).abs() / e.abs().max(1.0));
        }
        let y = a.eval_measurement(&x).unwrap();
        worst = worst.max((y[0] - (x[0] + x[1])).abs());
    }
    worst
}
