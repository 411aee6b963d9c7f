//! Expression cases with hand-written closed forms, evaluated at
//! `x = (0.7, -1.3, 2.5)`, `w = (0.25, -0.5)`.

use std::f64::consts::PI;

pub const X: [f64; 3] = [0.7, -1.3, 2.5];
pub const W: [f64; 2] = [0.25, -0.5];

pub enum Expect {
    Value(f64),
    /// Syntax or identifier error at `(line, column)`.
    Error(usize, usize),
    /// Parses, but evaluation hits a domain error.
    Domain,
}

pub fn cases() -> Vec<(&'static str, Expect)> {
    let [x1, x2, x3] = X;
    let [w1, w2] = W;
    use Expect::*;
    vec![
        // literals and constants
        ("1", Value(1.0)),
        ("2.5", Value(2.5)),
        (".5", Value(0.5)),
        ("1e3", Value(1000.0)),
        ("1.5E-2", Value(0.015)),
        ("2e+1", Value(20.0)),
        ("pi", Value(PI)),
        ("  42  ", Value(42.0)),
        // variables
        ("x1", Value(x1)),
        ("x(2)", Value(x2)),
        ("x3", Value(x3)),
        ("w1", Value(w1)),
        ("w(2)", Value(w2)),
        // additive and multiplicative precedence
        ("1 + 2 * 3", Value(7.0)),
        ("(1 + 2) * 3", Value(9.0)),
        ("1 - 2 - 3", Value(-4.0)),
        ("1 - (2 - 3)", Value(2.0)),
        ("8 / 4 / 2", Value(1.0)),
        ("8 / (4 / 2)", Value(4.0)),
        ("2 * 3 / 4", Value(1.5)),
        ("2 / 4 * 3", Value(1.5)),
        ("1 + 2 - 3 + 4", Value(4.0)),
        ("x1 + x2 * x3", Value(x1 + x2 * x3)),
        ("x1 * x2 + x3", Value(x1 * x2 + x3)),
        ("x1 - x2 / x3", Value(x1 - x2 / x3)),
        ("(x1 - x2) / x3", Value((x1 - x2) / x3)),
        ("x1*x2*x3", Value(x1 * x2 * x3)),
        ("x1/x2/x3", Value(x1 / x2 / x3)),
        ("((((x1))))", Value(x1)),
        ("x1 + w1 - w2", Value(x1 + w1 - w2)),
        // unary signs
        ("-3", Value(-3.0)),
        ("--3", Value(3.0)),
        ("+3", Value(3.0)),
        ("-+-3", Value(3.0)),
        ("2 * -3", Value(-6.0)),
        ("2 - -3", Value(5.0)),
        ("-x1 * x2", Value(-x1 * x2)),
        ("-(x1 + x2)", Value(-(x1 + x2))),
        ("3 - -x2", Value(3.0 + x2)),
        // powers
        ("2^3", Value(8.0)),
        ("2^3^2", Value(512.0)),
        ("(2^3)^2", Value(64.0)),
        ("-2^2", Value(-4.0)),
        ("(-2)^2", Value(4.0)),
        ("2^-2", Value(0.25)),
        ("2^-1^2", Value(0.5)),
        ("x1^2", Value(x1 * x1)),
        ("x2^3", Value(x2 * x2 * x2)),
        ("x3^0.5", Value(x3.sqrt())),
        ("x3^x1", Value(x3.powf(x1))),
        ("2*x1^2", Value(2.0 * x1 * x1)),
        ("x1^2*2", Value(2.0 * x1 * x1)),
        ("x2^2^2", Value(x2.powi(4))),
        ("(-8)^(1/3)", Domain),
        ("0^-1", Domain),
        ("(x1 + x2)^2", Value((x1 + x2) * (x1 + x2))),
        ("x3^-2", Value(1.0 / (x3 * x3))),
        // functions
        ("sin(x1)", Value(x1.sin())),
        ("cos(x2)", Value(x2.cos())),
        ("tan(x1)", Value(x1.tan())),
        ("exp(x1)", Value(x1.exp())),
        ("log(x3)", Value(x3.ln())),
        ("log10(100)", Value(2.0)),
        ("abs(x2)", Value(x2.abs())),
        ("sqrt(x3)", Value(x3.sqrt())),
        ("sin(pi/2)", Value(1.0)),
        ("exp(log(x3))", Value(x3.ln().exp())),
        ("sin(x1)^2 + cos(x1)^2", Value(x1.sin().powi(2) + x1.cos().powi(2))),
        ("-sin(x1)", Value(-x1.sin())),
        ("2*cos(x2)*3", Value(6.0 * x2.cos())),
        ("abs(-x1 - x3)", Value((x1 + x3).abs())),
        ("sqrt(abs(x2))", Value(x2.abs().sqrt())),
        ("exp(-x1^2/2)", Value((-x1 * x1 / 2.0).exp())),
        ("log(1 + x3) - 20*log(1 + x1)", Value((1.0 + x3).ln() - 20.0 * (1.0 + x1).ln())),
        ("sin(x2) + 3*cos(x2) + w1", Value(x2.sin() + 3.0 * x2.cos() + w1)),
        ("3*x1 - 20*log(1+x3) + w2", Value(3.0 * x1 - 20.0 * (1.0 + x3).ln() + w2)),
        ("cos(sin(cos(x1)))", Value(x1.cos().sin().cos())),
        ("exp(x1)^2", Value(x1.exp().powi(2))),
        ("2^sin(x1)", Value(2f64.powf(x1.sin()))),
        // domain errors
        ("log(x2)", Domain),
        ("log(0)", Domain),
        ("log10(-1)", Domain),
        ("sqrt(x2)", Domain),
        ("1/(x1 - 0.7)", Domain),
        ("exp(1000)", Domain),
        // syntax errors at (line, column)
        ("1+*2", Error(1, 3)),
        ("", Error(1, 1)),
        ("(1 + 2", Error(1, 7)),
        ("1 + 2)", Error(1, 6)),
        ("sin x1", Error(1, 5)),
        ("sin()", Error(1, 5)),
        ("sin(1, 2)", Error(1, 6)),
        ("foo(1)", Error(1, 1)),
        ("y1 + 1", Error(1, 1)),
        ("x0", Error(1, 1)),
        ("x(0)", Error(1, 3)),
        ("1 $ 2", Error(1, 3)),
        ("2 ^", Error(1, 4)),
        ("1 +\n  * 2", Error(2, 3)),
        ("x1 x2", Error(1, 4)),
    ]
}
