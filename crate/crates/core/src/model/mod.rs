//! Nonlinear systems `x₊ = f(x, w)`, `y = g(x) + v` given as expression
//! text, either built in or loaded from JSON.
//!
//! ```json
//! {"n": 2, "n_w": 2, "n_y": 1,
//!  "dynamics": ["x2 + w1", "0.5*x1 + w2"],
//!  "measurement": ["x1 + x2"],
//!  "X0": {"lower": [-1, -1], "upper": [1, 1]},
//!  "W":  {"lower": [-0.1, -0.1], "upper": [0.1, 0.1]},
//!  "V":  {"lower": [-0.2], "upper": [0.2]}}
//! ```
//!
//! or `{"builtin": "sysF"}` / `{"builtin": "abrc08"}`.

mod expr;

use std::path::Path;

use serde::{Deserialize, Serialize};

pub use expr::{parse_expression, BinOp, Compiled, DomainError, Expr, Func, ParseError, VarKind, VarRef};

use crate::error::{Error, Result};
use crate::geometry::AxisBox;

/// Text form of a model, as read from and written to JSON.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ModelSpec {
    Builtin {
        builtin: String,
    },
    Custom {
        #[serde(default)]
        name: Option<String>,
        n: usize,
        n_w: usize,
        #[serde(default)]
        n_y: usize,
        dynamics: Vec<String>,
        #[serde(default)]
        measurement: Vec<String>,
        #[serde(rename = "X0")]
        x0: AxisBox,
        #[serde(rename = "W")]
        w: AxisBox,
        #[serde(rename = "V", default)]
        v: Option<AxisBox>,
    },
}

/// A compiled system. Immutable and safe to evaluate from many threads.
#[derive(Clone, Debug)]
pub struct Model {
    name: String,
    n: usize,
    n_w: usize,
    n_y: usize,
    dynamics: Vec<Compiled>,
    measurement: Vec<Compiled>,
    dynamics_labels: Vec<String>,
    measurement_labels: Vec<String>,
    x0: AxisBox,
    w: AxisBox,
    v: Option<AxisBox>,
    spec: ModelSpec,
}

pub const BUILTINS: [&str; 2] = ["sysF", "abrc08"];

fn invalid(msg: String) -> Error {
    Error::InvalidParameter(msg)
}

impl Model {
    pub fn from_spec(spec: &ModelSpec) -> Result<Model> {
        match spec {
            ModelSpec::Builtin { builtin } => Model::builtin(builtin),
            ModelSpec::Custom {
                name,
                n,
                n_w,
                n_y,
                dynamics,
                measurement,
                x0,
                w,
                v,
            } => {
                let dyn_refs: Vec<&str> = dynamics.iter().map(String::as_str).collect();
                let meas_refs: Vec<&str> = measurement.iter().map(String::as_str).collect();
                let mut m = Model::new(
                    name.as_deref().unwrap_or("custom"),
                    (*n, *n_w, *n_y),
                    &dyn_refs,
                    &meas_refs,
                    x0.clone(),
                    w.clone(),
                    v.clone(),
                )?;
                m.spec = spec.clone();
                Ok(m)
            }
        }
    }

    /// Builds a model from expression text. `dims` is `(n, n_w, n_y)`; the
    /// measurement-noise box is required when `n_y > 0`.
    pub fn new(
        name: &str,
        dims: (usize, usize, usize),
        dynamics: &[&str],
        measurement: &[&str],
        x0: AxisBox,
        w: AxisBox,
        v: Option<AxisBox>,
    ) -> Result<Model> {
        let (n, n_w, n_y) = dims;
        if n == 0 {
            return Err(invalid("state dimension must be at least 1".into()));
        }
        if dynamics.len() != n {
            return Err(invalid(format!("{} dynamics expressions for n = {n}", dynamics.len())));
        }
        if measurement.len() != n_y {
            return Err(invalid(format!("{} measurement expressions for n_y = {n_y}", measurement.len())));
        }
        if x0.dim() != n {
            return Err(invalid(format!("X0 has dimension {}, expected {n}", x0.dim())));
        }
        if w.dim() != n_w {
            return Err(invalid(format!("W has dimension {}, expected {n_w}", w.dim())));
        }
        match (&v, n_y) {
            (None, 0) => {}
            (None, _) => return Err(invalid("a measurement-noise box V is required when n_y > 0".into())),
            (Some(b), _) if b.dim() != n_y => {
                return Err(invalid(format!("V has dimension {}, expected {n_y}", b.dim())));
            }
            _ => {}
        }
        let compile = |src: &str, label: &str, allow_noise: bool| -> Result<Compiled> {
            let e = parse_expression(src)?;
            let (ax, aw) = e.arity();
            if ax > n {
                return Err(invalid(format!("{label} references x{ax} but n = {n}")));
            }
            if aw > 0 && !allow_noise {
                return Err(invalid(format!("{label} references w{aw}; measurements depend on x only")));
            }
            if aw > n_w {
                return Err(invalid(format!("{label} references w{aw} but n_w = {n_w}")));
            }
            Ok(Compiled::new(e))
        };
        let dynamics_labels: Vec<String> = (1..=n).map(|i| format!("dynamics[{i}]")).collect();
        let measurement_labels: Vec<String> = (1..=n_y).map(|i| format!("measurement[{i}]")).collect();
        let dyn_c = dynamics
            .iter()
            .zip(&dynamics_labels)
            .map(|(s, l)| compile(s, l, true))
            .collect::<Result<Vec<_>>>()?;
        let meas_c = measurement
            .iter()
            .zip(&measurement_labels)
            .map(|(s, l)| compile(s, l, false))
            .collect::<Result<Vec<_>>>()?;
        let model = Model {
            name: name.to_string(),
            n,
            n_w,
            n_y,
            dynamics: dyn_c,
            measurement: meas_c,
            dynamics_labels,
            measurement_labels,
            spec: ModelSpec::Custom {
                name: Some(name.to_string()),
                n,
                n_w,
                n_y,
                dynamics: dynamics.iter().map(|s| s.to_string()).collect(),
                measurement: measurement.iter().map(|s| s.to_string()).collect(),
                x0: x0.clone(),
                w: w.clone(),
                v: v.clone(),
            },
            x0,
            w,
            v,
        };
        let xc = model.x0.center();
        let wc = model.w.center();
        model.eval_dynamics(&xc, &wc)?;
        model.eval_measurement(&xc)?;
        Ok(model)
    }

    /// `"sysF"` (two states, no measurement) or `"abrc08"` (two states,
    /// scalar measurement `x1 + x2`).
    pub fn builtin(name: &str) -> Result<Model> {
        let mut m = match name {
            "sysF" => Model::new(
                "sysF",
                (2, 2, 0),
                &["sin(x2) + 3*cos(x2) + w1", "3*x1 - 20*log(1 + x2) + w2"],
                &[],
                AxisBox::cube(2, 0.0, 1.0)?,
                AxisBox::cube(2, -0.2, 0.2)?,
                None,
            )?,
            "abrc08" => Model::new(
                "abrc08",
                (2, 2, 1),
                &[
                    "-0.7*x2 + 0.1*x2^2 + 0.1*x1*x2 + 0.1*exp(x1) + w1",
                    "x1 + x2 - 0.1*x1^2 + 0.2*x1*x2 + w2",
                ],
                &["x1 + x2"],
                AxisBox::cube(2, -3.0, 3.0)?,
                AxisBox::cube(2, -0.1, 0.1)?,
                Some(AxisBox::cube(1, -0.2, 0.2)?),
            )?,
            other => {
                return Err(invalid(format!(
                    "unknown builtin model '{other}' (available: {})",
                    BUILTINS.join(", ")
                )))
            }
        };
        m.spec = ModelSpec::Builtin {
            builtin: name.to_string(),
        };
        Ok(m)
    }

    pub fn from_json(text: &str) -> Result<Model> {
        let spec: ModelSpec = serde_json::from_str(text)?;
        Model::from_spec(&spec)
    }

    pub fn from_file(path: &Path) -> Result<Model> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| invalid(format!("cannot read model file {}: {e}", path.display())))?;
        Model::from_json(&text)
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn n_w(&self) -> usize {
        self.n_w
    }

    pub fn n_y(&self) -> usize {
        self.n_y
    }

    pub fn initial_set(&self) -> &AxisBox {
        &self.x0
    }

    pub fn noise_set(&self) -> &AxisBox {
        &self.w
    }

    pub fn measurement_noise_set(&self) -> Option<&AxisBox> {
        self.v.as_ref()
    }

    /// Same model with other domain boxes.
    pub fn with_sets(mut self, x0: AxisBox, w: AxisBox, v: Option<AxisBox>) -> Result<Model> {
        crate::error::check_dim(self.n, x0.dim())?;
        crate::error::check_dim(self.n_w, w.dim())?;
        if let Some(b) = &v {
            crate::error::check_dim(self.n_y, b.dim())?;
        }
        if let ModelSpec::Custom {
            x0: sx,
            w: sw,
            v: sv,
            ..
        } = &mut self.spec
        {
            *sx = x0.clone();
            *sw = w.clone();
            *sv = v.clone();
        }
        self.x0 = x0;
        self.w = w;
        self.v = v;
        Ok(self)
    }

    pub fn eval_dynamics_into(&self, x: &[f64], w: &[f64], out: &mut [f64]) -> std::result::Result<(), DomainError> {
        debug_assert_eq!(x.len(), self.n);
        debug_assert_eq!(w.len(), self.n_w);
        for ((c, label), o) in self.dynamics.iter().zip(&self.dynamics_labels).zip(out.iter_mut()) {
            *o = c.eval(x, w, label)?;
        }
        Ok(())
    }

    pub fn eval_dynamics(&self, x: &[f64], w: &[f64]) -> Result<Vec<f64>> {
        crate::error::check_dim(self.n, x.len())?;
        crate::error::check_dim(self.n_w, w.len())?;
        let mut out = vec![0.0; self.n];
        self.eval_dynamics_into(x, w, &mut out)?;
        Ok(out)
    }

    /// Noise-free part `g(x)`.
    pub fn eval_measurement(&self, x: &[f64]) -> Result<Vec<f64>> {
        crate::error::check_dim(self.n, x.len())?;
        let mut out = vec![0.0; self.n_y];
        self.eval_measurement_into(x, &mut out)?;
        Ok(out)
    }

    pub fn eval_measurement_into(&self, x: &[f64], out: &mut [f64]) -> std::result::Result<(), DomainError> {
        for ((c, label), o) in self.measurement.iter().zip(&self.measurement_labels).zip(out.iter_mut()) {
            *o = c.eval(x, &[], label)?;
        }
        Ok(())
    }

    pub fn dynamics_expressions(&self) -> impl Iterator<Item = &Expr> {
        self.dynamics.iter().map(Compiled::expr)
    }

    pub fn measurement_expressions(&self) -> impl Iterator<Item = &Expr> {
        self.measurement.iter().map(Compiled::expr)
    }
}

impl Serialize for Model {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.spec.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Model {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let spec = ModelSpec::deserialize(d)?;
        Model::from_spec(&spec).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtins_at_origin() {
        let f = Model::builtin("sysF").unwrap();
        assert_eq!(f.eval_dynamics(&[0.0, 0.0], &[0.0, 0.0]).unwrap(), vec![3.0, 0.0]);
        let a = Model::builtin("abrc08").unwrap();
        let x1 = a.eval_dynamics(&[0.0, 0.0], &[0.0, 0.0]).unwrap();
        assert!((x1[0] - 0.1).abs() < 1e-15 && x1[1] == 0.0);
        assert_eq!(a.eval_measurement(&[1.0, 2.0]).unwrap(), vec![3.0]);
        assert_eq!(a.eval_measurement(&[0.0, 0.0]).unwrap(), vec![0.0]);
    }

    #[test]
    fn abrc08_first_step_from_the_initial_center() {
        let a = Model::builtin("abrc08").unwrap();
        let x = a.eval_dynamics(&[0.6, 0.07], &[0.0, 0.0]).unwrap();
        let e06 = 1.822_118_800_390_508_9;
        let want0 = -0.7 * 0.07 + 0.1 * 0.0049 + 0.1 * 0.6 * 0.07 + 0.1 * e06;
        assert!((x[0] - want0).abs() < 1e-15);
        assert!((x[0] - 0.137_901_880_039_050_9).abs() < 1e-14);
        assert!((x[1] - 0.6424).abs() < 1e-14);
    }

    #[test]
    fn sys_f_log_singularity_is_reported() {
        let f = Model::builtin("sysF").unwrap();
        match f.eval_dynamics(&[0.0, -1.0], &[0.0, 0.0]) {
            Err(Error::Domain(e)) => {
                assert_eq!(e.component, "dynamics[2]");
                assert!(e.subexpression.contains("log"));
            }
            other => panic!("expected a domain error, got {other:?}"),
        }
    }

    #[test]
    fn custom_measurement() {
        let m = Model::new(
            "sq",
            (1, 1, 1),
            &["x1"],
            &["x1^2"],
            AxisBox::cube(1, -5.0, 5.0).unwrap(),
            AxisBox::cube(1, 0.0, 0.0).unwrap(),
            Some(AxisBox::cube(1, -1.0, 1.0).unwrap()),
        )
        .unwrap();
        assert_eq!(m.eval_measurement(&[3.0]).unwrap(), vec![9.0]);
    }

    #[test]
    fn arity_is_checked() {
        let b = AxisBox::cube(1, 0.0, 1.0).unwrap();
        assert!(Model::new("m", (1, 1, 0), &["x2"], &[], b.clone(), b.clone(), None).is_err());
        assert!(Model::new("m", (1, 1, 0), &["w2"], &[], b.clone(), b.clone(), None).is_err());
        assert!(Model::new("m", (1, 1, 1), &["x1"], &["w1"], b.clone(), b.clone(), Some(b.clone())).is_err());
        assert!(Model::new("m", (1, 1, 1), &["x1"], &["x1"], b.clone(), b.clone(), None).is_err());
    }

    #[test]
    fn json_round_trip() {
        let text = r#"{"n": 1, "n_w": 1, "n_y": 1, "dynamics": ["0.5*x1 + w1"], "measurement": ["x1"],
            "X0": {"lower": [-1], "upper": [1]}, "W": {"lower": [-0.1], "upper": [0.1]},
            "V": {"lower": [-0.2], "upper": [0.2]}}"#;
        let m = Model::from_json(text).unwrap();
        assert_eq!(m.eval_dynamics(&[1.0], &[0.25]).unwrap(), vec![0.75]);
        let back: Model = serde_json::from_str(&serde_json::to_string(&m).unwrap()).unwrap();
        assert_eq!(back.spec(), m.spec());
        let b: Model = serde_json::from_str(r#"{"builtin": "abrc08"}"#).unwrap();
        assert_eq!(b.n_y(), 1);
        assert!(Model::from_json(r#"{"builtin": "nope"}"#).is_err());
    }
}
