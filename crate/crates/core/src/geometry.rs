//! Approximating-set families: norm-based sets, axis boxes and polynomial
//! superlevel sets.
//!
//! All sets are closed: boundary points are members.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{check_dim, Error, Result};
use crate::fit::pas::{reconstruct_coefficients, GramBlock};
use crate::poly::{add_affine_monomial, MonomialBasis};

/// Default absolute tolerance for membership tests.
pub const MEMBERSHIP_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Norm {
    L1,
    L2,
    Inf,
}

impl Norm {
    pub fn eval(self, z: &[f64]) -> f64 {
        match self {
            Norm::L1 => z.iter().map(|v| v.abs()).sum(),
            Norm::L2 => z.iter().map(|v| v * v).sum::<f64>().sqrt(),
            Norm::Inf => z.iter().fold(0.0, |m, v| m.max(v.abs())),
        }
    }

    pub fn dual(self) -> Norm {
        match self {
            Norm::L1 => Norm::Inf,
            Norm::L2 => Norm::L2,
            Norm::Inf => Norm::L1,
        }
    }

    /// Lebesgue measure of the unit ball `{z : ‖z‖_p ≤ 1}` in `n` dimensions.
    pub fn unit_ball_volume(self, n: usize) -> f64 {
        match self {
            Norm::Inf => 2f64.powi(n as i32),
            Norm::L1 => 2f64.powi(n as i32) / factorial(n),
            Norm::L2 => {
                // V_n = 2π/n · V_{n-2}, V_0 = 1, V_1 = 2
                let mut v = if n % 2 == 0 { 1.0 } else { 2.0 };
                let mut k = if n % 2 == 0 { 2 } else { 3 };
                while k <= n {
                    v *= 2.0 * std::f64::consts::PI / k as f64;
                    k += 2;
                }
                v
            }
        }
    }
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

impl Serialize for Norm {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Norm::L1 => s.serialize_u8(1),
            Norm::L2 => s.serialize_u8(2),
            Norm::Inf => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Norm {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) if v == 1.0 => Ok(Norm::L1),
            Raw::Num(v) if v == 2.0 => Ok(Norm::L2),
            Raw::Text(t) if matches!(t.as_str(), "inf" | "Inf" | "infinity") => Ok(Norm::Inf),
            _ => Err(serde::de::Error::custom("norm must be 1, 2 or \"inf\"")),
        }
    }
}

/// Norm-based approximating set `{x : ‖P(x−c)‖_p ≤ 1} = {c + P⁻¹z : ‖z‖_p ≤ 1}`.
///
/// For `p = 2` the shape matrix is kept symmetric positive definite. For
/// `p ∈ {1, ∞}` any invertible shape is accepted, which is what a general
/// (non-axis-aligned) parallelotope needs.
#[derive(Clone, Debug, PartialEq)]
pub struct NasSet {
    center: DVector<f64>,
    shape: DMatrix<f64>,
    inverse: DMatrix<f64>,
    norm: Norm,
}

impl NasSet {
    pub fn new(center: DVector<f64>, shape: DMatrix<f64>, norm: Norm) -> Result<Self> {
        let n = center.len();
        if n == 0 {
            return Err(Error::InvalidParameter("empty center".into()));
        }
        if shape.nrows() != n || shape.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: shape.nrows(),
            });
        }
        if center.iter().chain(shape.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("non-finite center or shape".into()));
        }
        let shape = if norm == Norm::L2 {
            let scale = shape.amax().max(f64::MIN_POSITIVE);
            let asym = (&shape - shape.transpose()).amax() / scale;
            if asym > 1e-12 {
                return Err(Error::InvalidParameter(format!(
                    "ellipsoid shape matrix is not symmetric (relative asymmetry {asym:.3e})"
                )));
            }
            let sym = (&shape + shape.transpose()) * 0.5;
            let min_eig = sym.clone().symmetric_eigen().eigenvalues.min();
            if min_eig <= 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "ellipsoid shape matrix is not positive definite (min eigenvalue {min_eig:.3e})"
                )));
            }
            sym
        } else {
            shape
        };
        let inverse = shape
            .clone()
            .try_inverse()
            .filter(|m| m.iter().all(|v| v.is_finite()))
            .ok_or_else(|| Error::InvalidParameter("shape matrix is singular".into()))?;
        Ok(Self {
            center,
            shape,
            inverse,
            norm,
        })
    }

    /// Ball `{x : ‖x − c‖_p ≤ r}`.
    pub fn ball(center: DVector<f64>, radius: f64, norm: Norm) -> Result<Self> {
        if !(radius > 0.0) {
            return Err(Error::InvalidParameter("radius must be positive".into()));
        }
        let n = center.len();
        Self::new(center, DMatrix::identity(n, n) / radius, norm)
    }

    /// The box `B` as `{x : ‖P(x−c)‖_∞ ≤ 1}` with diagonal `P`.
    pub fn from_box(b: &AxisBox) -> Result<Self> {
        let c = DVector::from_vec(b.center());
        let diag: Vec<f64> = b.widths().iter().map(|w| 2.0 / w).collect();
        Self::new(c, DMatrix::from_diagonal(&DVector::from_vec(diag)), Norm::Inf)
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn center(&self) -> &DVector<f64> {
        &self.center
    }

    pub fn shape(&self) -> &DMatrix<f64> {
        &self.shape
    }

    /// `P⁻¹`, the map from the unit ball onto the set (about the center).
    pub fn inverse_shape(&self) -> &DMatrix<f64> {
        &self.inverse
    }

    pub fn norm(&self) -> Norm {
        self.norm
    }

    /// `‖P(x−c)‖_p` without a dimension check.
    #[inline]
    pub fn gauge(&self, x: &[f64]) -> f64 {
        let n = self.dim();
        let mut buf = [0.0f64; 16];
        let mut heap;
        let z: &mut [f64] = if n <= 16 {
            &mut buf[..n]
        } else {
            heap = vec![0.0; n];
            &mut heap
        };
        for (i, zi) in z.iter_mut().enumerate() {
            let mut acc = 0.0;
            for j in 0..n {
                acc += self.shape[(i, j)] * (x[j] - self.center[j]);
            }
            *zi = acc;
        }
        self.norm.eval(z)
    }

    /// `true` iff `‖P(x−c)‖_p ≤ 1 + tol`.
    pub fn membership(&self, x: &[f64], tol: f64) -> Result<bool> {
        check_dim(self.dim(), x.len())?;
        if tol < 0.0 {
            return Err(Error::InvalidParameter("tolerance must be non-negative".into()));
        }
        Ok(self.contains(x, tol))
    }

    /// Membership without a dimension check.
    #[inline]
    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        self.gauge(x) <= 1.0 + tol
    }

    /// `c + P⁻¹z`.
    pub fn map_from_unit(&self, z: &[f64]) -> DVector<f64> {
        &self.center + &self.inverse * DVector::from_column_slice(z)
    }

    pub fn volume(&self) -> f64 {
        self.log_volume().exp()
    }

    /// `ln vol(𝓑_p) − ln |det P|`.
    pub fn log_volume(&self) -> f64 {
        let n = self.dim();
        let det = self.shape.clone().lu().determinant().abs();
        self.norm.unit_ball_volume(n).ln() - det.ln()
    }

    /// Exact extent of the set along coordinate `j`: `c_j ± h(P⁻ᵀe_j)` where
    /// `h` is the dual norm of the row of `P⁻¹`.
    pub fn axis_extent(&self, j: usize) -> (f64, f64) {
        let row: Vec<f64> = self.inverse.row(j).iter().copied().collect();
        let h = self.norm.dual().eval(&row);
        (self.center[j] - h, self.center[j] + h)
    }

    pub fn spans(&self) -> Vec<(f64, f64)> {
        (0..self.dim()).map(|j| self.axis_extent(j)).collect()
    }
}

#[derive(Serialize, Deserialize)]
struct NasRepr {
    center: Vec<f64>,
    shape: Vec<f64>,
    p: Norm,
}

impl Serialize for NasSet {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let n = self.dim();
        let mut shape = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                shape.push(self.shape[(i, j)]);
            }
        }
        NasRepr {
            center: self.center.iter().copied().collect(),
            shape,
            p: self.norm,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for NasSet {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let r = NasRepr::deserialize(d)?;
        let n = r.center.len();
        if r.shape.len() != n * n {
            return Err(serde::de::Error::custom("shape must hold n² entries"));
        }
        NasSet::new(
            DVector::from_vec(r.center),
            DMatrix::from_row_slice(n, n, &r.shape),
            r.p,
        )
        .map_err(serde::de::Error::custom)
    }
}

/// Axis-aligned box `[l_1,u_1] × … × [l_n,u_n]` with `l ≤ u`.
///
/// Degenerate intervals (`l_j = u_j`) are allowed so that a noise box can be a
/// point mass; operations needing positive volume check for it.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AxisBox {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl AxisBox {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        check_dim(lower.len(), upper.len())?;
        if lower.is_empty() {
            return Err(Error::InvalidParameter("box must have at least one axis".into()));
        }
        for (j, (l, u)) in lower.iter().zip(&upper).enumerate() {
            if !l.is_finite() || !u.is_finite() {
                return Err(Error::InvalidParameter(format!("axis {j}: non-finite bound")));
            }
            if l > u {
                return Err(Error::InvalidParameter(format!("axis {j}: empty interval [{l}, {u}]")));
            }
        }
        Ok(Self { lower, upper })
    }

    /// `[lo, hi]^n`.
    pub fn cube(n: usize, lo: f64, hi: f64) -> Result<Self> {
        Self::new(vec![lo; n], vec![hi; n])
    }

    /// Smallest box holding every point.
    pub fn bounding(points: &[DVector<f64>]) -> Result<Self> {
        let first = points
            .first()
            .ok_or_else(|| Error::InvalidParameter("no points".into()))?;
        let n = first.len();
        let mut lower = vec![f64::INFINITY; n];
        let mut upper = vec![f64::NEG_INFINITY; n];
        for p in points {
            check_dim(n, p.len())?;
            for j in 0..n {
                lower[j] = lower[j].min(p[j]);
                upper[j] = upper[j].max(p[j]);
            }
        }
        Self::new(lower, upper)
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn center(&self) -> Vec<f64> {
        self.lower.iter().zip(&self.upper).map(|(l, u)| 0.5 * (l + u)).collect()
    }

    pub fn widths(&self) -> Vec<f64> {
        self.lower.iter().zip(&self.upper).map(|(l, u)| u - l).collect()
    }

    pub fn volume(&self) -> f64 {
        self.widths().iter().product()
    }

    pub fn has_interior(&self) -> bool {
        self.lower.iter().zip(&self.upper).all(|(l, u)| u > l)
    }

    pub fn membership(&self, x: &[f64], tol: f64) -> Result<bool> {
        check_dim(self.dim(), x.len())?;
        if tol < 0.0 {
            return Err(Error::InvalidParameter("tolerance must be non-negative".into()));
        }
        Ok(self.contains(x, tol))
    }

    #[inline]
    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        x.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .all(|(v, (l, u))| *v >= l - tol && *v <= u + tol)
    }

    /// Scales every side about the center by `factor`.
    pub fn inflate(&self, factor: f64) -> Self {
        let c = self.center();
        let (lower, upper) = c
            .iter()
            .zip(self.widths())
            .map(|(c, w)| (c - 0.5 * factor * w, c + 0.5 * factor * w))
            .unzip();
        Self { lower, upper }
    }

    /// Affine map to `[-1,1]^n`: `t = (2x − (l+u)) / (u − l)`.
    pub fn to_unit(&self, x: &[f64], t: &mut [f64]) {
        for j in 0..self.dim() {
            t[j] = (2.0 * x[j] - (self.lower[j] + self.upper[j])) / (self.upper[j] - self.lower[j]);
        }
    }
}

impl<'de> Deserialize<'de> for AxisBox {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            lower: Vec<f64>,
            upper: Vec<f64>,
        }
        let r = Raw::deserialize(d)?;
        AxisBox::new(r.lower, r.upper).map_err(serde::de::Error::custom)
    }
}

/// Polynomial superlevel set `{x ∈ S : q(x) ≥ 1}` on a box `S`.
///
/// `q` is stored in the unit coordinates `t ∈ [-1,1]^n` of `S` (see
/// [`AxisBox::to_unit`]), as graded-lexicographic coefficients. The optional
/// certificate holds one Gram matrix per Putinar multiplier; when present it
/// reproduces the coefficients exactly.
#[derive(Clone, Debug)]
pub struct PasSet {
    domain: AxisBox,
    degree: usize,
    coefficients: Vec<f64>,
    certificate: Vec<GramBlock>,
    basis: MonomialBasis,
}

/// Gram blocks may dip this far (relative to `1 + trace`) below zero.
pub const GRAM_EIG_TOL: f64 = 1e-8;
const RECONSTRUCTION_TOL: f64 = 1e-8;

impl PasSet {
    pub fn new(
        domain: AxisBox,
        degree: usize,
        coefficients: Vec<f64>,
        certificate: Vec<GramBlock>,
    ) -> Result<Self> {
        if !domain.has_interior() {
            return Err(Error::InvalidParameter("polynomial domain box needs an interior".into()));
        }
        let basis = MonomialBasis::new(domain.dim(), degree);
        check_dim(basis.len(), coefficients.len())?;
        if coefficients.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidParameter("non-finite polynomial coefficient".into()));
        }
        for (i, g) in certificate.iter().enumerate() {
            let min = g.min_eigenvalue();
            if min < -GRAM_EIG_TOL * (1.0 + g.matrix.trace().abs()) {
                return Err(Error::InvalidParameter(format!(
                    "Gram block {i} is not positive semidefinite (min eigenvalue {min:.3e})"
                )));
            }
        }
        if !certificate.is_empty() {
            let rebuilt = reconstruct_coefficients(domain.dim(), &certificate);
            for (i, &c) in coefficients.iter().enumerate() {
                let r = rebuilt.get(i).copied().unwrap_or(0.0);
                if (r - c).abs() > RECONSTRUCTION_TOL * (1.0 + c.abs()) {
                    return Err(Error::InvalidParameter(format!(
                        "certificate does not reproduce coefficient {i}: {r} vs {c}"
                    )));
                }
            }
            if let Some(extra) = rebuilt[coefficients.len().min(rebuilt.len())..]
                .iter()
                .find(|v| v.abs() > RECONSTRUCTION_TOL)
            {
                return Err(Error::InvalidParameter(format!(
                    "certificate has a non-vanishing coefficient above the degree ({extra:.3e})"
                )));
            }
        }
        Ok(Self {
            domain,
            degree,
            coefficients,
            certificate,
            basis,
        })
    }

    /// Builds an (uncertified) set from coefficients of `q` in the original
    /// coordinates `x`.
    pub fn from_polynomial_in_x(domain: AxisBox, degree: usize, coeffs_x: &[f64]) -> Result<Self> {
        let basis = MonomialBasis::new(domain.dim(), degree);
        check_dim(basis.len(), coeffs_x.len())?;
        // x_j = h_j t_j + m_j
        let scale: Vec<f64> = domain.widths().iter().map(|w| 0.5 * w).collect();
        let offset = domain.center();
        let mut coeffs_t = vec![0.0; basis.len()];
        for (i, &c) in coeffs_x.iter().enumerate() {
            if c != 0.0 {
                add_affine_monomial(&basis, basis.exponents(i), &scale, &offset, c, &mut coeffs_t);
            }
        }
        Self::new(domain, degree, coeffs_t, Vec::new())
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn domain(&self) -> &AxisBox {
        &self.domain
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    /// Coefficients in unit coordinates of the domain.
    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn certificate(&self) -> &[GramBlock] {
        &self.certificate
    }

    pub fn basis(&self) -> &MonomialBasis {
        &self.basis
    }

    /// `q(x)` without a dimension check.
    #[inline]
    pub fn eval(&self, x: &[f64]) -> f64 {
        let mut t = [0.0f64; crate::poly::MAX_VARS];
        let n = self.dim();
        self.domain.to_unit(x, &mut t[..n]);
        self.basis.eval_poly(&self.coefficients, &t[..n])
    }

    /// `q(x)` evaluated through the Gram certificate instead of the
    /// coefficient vector.
    pub fn eval_via_certificate(&self, x: &[f64]) -> Option<f64> {
        if self.certificate.is_empty() {
            return None;
        }
        let n = self.dim();
        let mut t = vec![0.0; n];
        self.domain.to_unit(x, &mut t);
        Some(self.certificate.iter().map(|g| g.eval(&t)).sum())
    }

    pub fn membership(&self, x: &[f64], tol: f64) -> Result<bool> {
        check_dim(self.dim(), x.len())?;
        if tol < 0.0 {
            return Err(Error::InvalidParameter("tolerance must be non-negative".into()));
        }
        Ok(self.contains(x, tol))
    }

    #[inline]
    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        self.domain.contains(x, tol) && self.eval(x) >= 1.0 - tol
    }

    /// `∫_S q(x) dx`, the volume surrogate minimised by the fit.
    pub fn integral(&self) -> f64 {
        let unit = AxisBox::cube(self.dim(), -1.0, 1.0).expect("unit cube");
        let moments = crate::fit::pas::box_moments(&unit, self.degree);
        let jac = self.domain.volume() / 2f64.powi(self.dim() as i32);
        jac * moments.dot(&self.coefficients)
    }
}

#[derive(Serialize, Deserialize)]
struct PasRepr {
    #[serde(rename = "box")]
    domain: AxisBox,
    degree: usize,
    coordinates: String,
    coefficients: Vec<f64>,
    gram: Vec<GramBlock>,
}

const UNIT_COORDINATES: &str = "unit-box";

impl Serialize for PasSet {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        PasRepr {
            domain: self.domain.clone(),
            degree: self.degree,
            coordinates: UNIT_COORDINATES.into(),
            coefficients: self.coefficients.clone(),
            gram: self.certificate.clone(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for PasSet {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let r = PasRepr::deserialize(d)?;
        if r.coordinates != UNIT_COORDINATES {
            return Err(serde::de::Error::custom("unsupported coefficient coordinates"));
        }
        PasSet::new(r.domain, r.degree, r.coefficients, r.gram).map_err(serde::de::Error::custom)
    }
}

/// Either family, for code that handles fitted sets generically.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum FittedSet {
    Nas(NasSet),
    Pas(PasSet),
}

impl FittedSet {
    pub fn dim(&self) -> usize {
        match self {
            FittedSet::Nas(a) => a.dim(),
            FittedSet::Pas(u) => u.dim(),
        }
    }

    #[inline]
    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        match self {
            FittedSet::Nas(a) => a.contains(x, tol),
            FittedSet::Pas(u) => u.contains(x, tol),
        }
    }

    pub fn as_nas(&self) -> Option<&NasSet> {
        match self {
            FittedSet::Nas(a) => Some(a),
            FittedSet::Pas(_) => None,
        }
    }

    pub fn as_pas(&self) -> Option<&PasSet> {
        match self {
            FittedSet::Pas(u) => Some(u),
            FittedSet::Nas(_) => None,
        }
    }
}
