//! Polynomial superlevel-set fit: the minimum-integral polynomial that is
//! nonnegative on the box by a Putinar certificate and at least one at every
//! sample.
//!
//! Everything is assembled in the unit coordinates `t ∈ [-1,1]^n` of the
//! domain box, whose faces are `1 − t_j ≥ 0` and `1 + t_j ≥ 0`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::convex::sdp::{solve_standard, Block, BlockKind, StandardSdp};
use crate::convex::{min_eigenvalue, SolveReport};
use crate::error::{check_dim, Error, Result};
use crate::geometry::{AxisBox, PasSet};
use crate::par;
use crate::poly::MonomialBasis;
use crate::sampling::{SampleStream, SetSampler};

/// Which nonnegative factor a Gram block multiplies.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum Multiplier {
    /// The free sum-of-squares term.
    Sos,
    /// `1 − t_axis` when `upper`, else `1 + t_axis`.
    Face { axis: usize, upper: bool },
}

impl Multiplier {
    fn value(self, t: &[f64]) -> f64 {
        match self {
            Multiplier::Sos => 1.0,
            Multiplier::Face { axis, upper: true } => 1.0 - t[axis],
            Multiplier::Face { axis, upper: false } => 1.0 + t[axis],
        }
    }

    fn extra_degree(self) -> usize {
        match self {
            Multiplier::Sos => 0,
            Multiplier::Face { .. } => 1,
        }
    }
}

/// `m(t)·v(t)ᵀ G v(t)` with `v` the monomials up to `basis_degree`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(into = "GramRepr", try_from = "GramRepr")]
pub struct GramBlock {
    pub multiplier: Multiplier,
    pub basis_degree: usize,
    pub matrix: DMatrix<f64>,
}

#[derive(Serialize, Deserialize)]
struct GramRepr {
    multiplier: Multiplier,
    basis_degree: usize,
    matrix: Vec<Vec<f64>>,
}

impl From<GramBlock> for GramRepr {
    fn from(g: GramBlock) -> Self {
        GramRepr {
            multiplier: g.multiplier,
            basis_degree: g.basis_degree,
            matrix: g.matrix.row_iter().map(|r| r.iter().copied().collect()).collect(),
        }
    }
}

impl TryFrom<GramRepr> for GramBlock {
    type Error = String;

    fn try_from(r: GramRepr) -> std::result::Result<Self, String> {
        let s = r.matrix.len();
        if r.matrix.iter().any(|row| row.len() != s) {
            return Err("Gram matrix must be square".into());
        }
        let flat: Vec<f64> = r.matrix.into_iter().flatten().collect();
        Ok(GramBlock {
            multiplier: r.multiplier,
            basis_degree: r.basis_degree,
            matrix: DMatrix::from_row_slice(s, s, &flat),
        })
    }
}

impl GramBlock {
    pub fn min_eigenvalue(&self) -> f64 {
        min_eigenvalue(&self.matrix)
    }

    pub fn eval(&self, t: &[f64]) -> f64 {
        let v = DVector::from_vec(MonomialBasis::new(t.len(), self.basis_degree).evaluate(t));
        self.multiplier.value(t) * v.dot(&(&self.matrix * &v))
    }

    fn degree(&self) -> usize {
        2 * self.basis_degree + self.multiplier.extra_degree()
    }
}

/// Coefficients of `Σ_blocks m·vᵀGv` in the graded-lexicographic basis of the
/// highest degree any block reaches.
pub fn reconstruct_coefficients(n: usize, blocks: &[GramBlock]) -> Vec<f64> {
    let degree = blocks.iter().map(GramBlock::degree).max().unwrap_or(0);
    let full = MonomialBasis::new(n, degree);
    let mut out = vec![0.0; full.len()];
    for g in blocks {
        let spec = BlockSpec {
            multiplier: g.multiplier,
            basis_degree: g.basis_degree,
        };
        spec.for_each_term(n, &full, |k, l, idx, w| out[idx] += w * g.matrix[(k, l)]);
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct BlockSpec {
    multiplier: Multiplier,
    basis_degree: usize,
}

impl BlockSpec {
    /// Calls `f(k, l, monomial, weight)` for every monomial that entry
    /// `(k,l)` of the Gram matrix contributes to.
    fn for_each_term(&self, n: usize, full: &MonomialBasis, mut f: impl FnMut(usize, usize, usize, f64)) {
        let basis = MonomialBasis::new(n, self.basis_degree);
        let mut e = vec![0u32; n];
        for k in 0..basis.len() {
            for l in 0..basis.len() {
                for (j, ej) in e.iter_mut().enumerate() {
                    *ej = basis.exponents(k)[j] + basis.exponents(l)[j];
                }
                f(k, l, full.index_of(&e).expect("term within degree"), 1.0);
                if let Multiplier::Face { axis, upper } = self.multiplier {
                    e[axis] += 1;
                    let w = if upper { -1.0 } else { 1.0 };
                    f(k, l, full.index_of(&e).expect("term within degree"), w);
                }
            }
        }
    }

    fn size(&self, n: usize) -> usize {
        crate::poly::binomial(n + self.basis_degree, n)
    }

    /// Symmetric `M` with `⟨M, G⟩ = Σ_α w_α coef_α(m·vᵀGv)`.
    fn functional(&self, n: usize, full: &MonomialBasis, w: &[f64]) -> DMatrix<f64> {
        let s = self.size(n);
        let mut m = DMatrix::zeros(s, s);
        self.for_each_term(n, full, |k, l, idx, sign| m[(k, l)] += sign * w[idx]);
        m
    }
}

/// Degrees of the Putinar multipliers.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MultiplierDegree {
    /// Every multiplier is a full degree-`2⌈σ/2⌉` square; coefficients of
    /// the certificate above `σ` are constrained to vanish.
    #[default]
    Full,
    /// Each product `r_i b_i` is kept within degree `σ` on its own.
    Truncated,
}

/// Block layout and identification constraints of a Putinar certificate
/// for degree-`σ` polynomials on the unit box.
#[derive(Clone, Debug)]
pub struct PutinarTemplate {
    n: usize,
    degree: usize,
    blocks: Vec<BlockSpec>,
    full: MonomialBasis,
}

impl PutinarTemplate {
    pub fn nvars(&self) -> usize {
        self.n
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    /// `(multiplier, Gram size)` of every block.
    pub fn blocks(&self) -> Vec<(Multiplier, usize)> {
        self.blocks.iter().map(|b| (b.multiplier, b.size(self.n))).collect()
    }

    /// Monomials whose certificate coefficient must vanish.
    pub fn vanishing(&self) -> std::ops::Range<usize> {
        self.full.prefix_len(self.degree)..self.full.len()
    }

    /// Coefficients (up to degree `σ`) of the polynomial a certificate
    /// represents.
    pub fn polynomial(&self, grams: &[DMatrix<f64>]) -> Vec<f64> {
        let mut c = reconstruct_coefficients(self.n, &self.gram_blocks(grams));
        c.resize(self.full.len(), 0.0);
        c.truncate(self.full.prefix_len(self.degree));
        c
    }

    fn gram_blocks(&self, grams: &[DMatrix<f64>]) -> Vec<GramBlock> {
        self.blocks
            .iter()
            .zip(grams)
            .map(|(b, g)| GramBlock {
                multiplier: b.multiplier,
                basis_degree: b.basis_degree,
                matrix: g.clone(),
            })
            .collect()
    }
}

pub fn assemble_putinar(n: usize, degree: usize, mode: MultiplierDegree) -> Result<PutinarTemplate> {
    if n == 0 || n > crate::poly::MAX_VARS {
        return Err(Error::InvalidParameter(format!(
            "polynomial fits support 1..={} variables",
            crate::poly::MAX_VARS
        )));
    }
    let (sos_deg, face_deg) = match mode {
        MultiplierDegree::Full => (degree.div_ceil(2), Some(degree.div_ceil(2))),
        MultiplierDegree::Truncated => (degree / 2, degree.checked_sub(1).map(|d| d / 2)),
    };
    let mut blocks = vec![BlockSpec {
        multiplier: Multiplier::Sos,
        basis_degree: sos_deg,
    }];
    if let Some(fd) = face_deg {
        for axis in 0..n {
            for upper in [true, false] {
                blocks.push(BlockSpec {
                    multiplier: Multiplier::Face { axis, upper },
                    basis_degree: fd,
                });
            }
        }
    }
    let top = blocks
        .iter()
        .map(|b| 2 * b.basis_degree + b.multiplier.extra_degree())
        .max()
        .unwrap_or(0)
        .max(degree);
    if top > crate::poly::MAX_DEGREE {
        return Err(Error::InvalidParameter(format!("degree {degree} is too large")));
    }
    Ok(PutinarTemplate {
        n,
        degree,
        blocks,
        full: MonomialBasis::new(n, top),
    })
}

/// Per-monomial integrals `∫_S x^α dx` in graded-lexicographic order.
#[derive(Clone, Debug, PartialEq)]
pub struct MomentVector {
    values: Vec<f64>,
}

impl MomentVector {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `Σ moments_α c_α`; shorter coefficient vectors are zero-padded.
    pub fn dot(&self, coeffs: &[f64]) -> f64 {
        self.values.iter().zip(coeffs).map(|(m, c)| m * c).sum()
    }
}

pub fn box_moments(domain: &AxisBox, degree: usize) -> MomentVector {
    let basis = MonomialBasis::new(domain.dim(), degree);
    let values = basis
        .iter()
        .map(|e| {
            e.iter()
                .enumerate()
                .map(|(j, &k)| {
                    let k = k as i32;
                    (domain.upper()[j].powi(k + 1) - domain.lower()[j].powi(k + 1)) / (k + 1) as f64
                })
                .product()
        })
        .collect();
    MomentVector { values }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PasOptions {
    pub multiplier_degree: MultiplierDegree,
    /// Interior-point feasibility and gap tolerance.
    pub tol: f64,
}

impl Default for PasOptions {
    fn default() -> Self {
        Self {
            multiplier_degree: MultiplierDegree::Full,
            tol: 1e-8,
        }
    }
}

#[derive(Clone, Debug)]
pub struct PasFit {
    pub set: PasSet,
    /// `∫_S q(x) dx`.
    pub objective: f64,
    pub report: SolveReport,
}

/// Domain used when the caller does not fix one: the bounding box of the
/// points grown by 10% per side, with zero-width sides given a small width.
pub fn auto_domain(points: &[DVector<f64>]) -> Result<AxisBox> {
    let b = AxisBox::bounding(points)?.inflate(1.1);
    let mag = points.iter().map(|p| p.amax()).fold(1.0, f64::max);
    let floor = super::floor_width(mag);
    let (lower, upper) = b
        .lower()
        .iter()
        .zip(b.upper())
        .map(|(l, u)| {
            if u - l < floor {
                let c = 0.5 * (l + u);
                (c - 0.5 * floor, c + 0.5 * floor)
            } else {
                (*l, *u)
            }
        })
        .unzip();
    AxisBox::new(lower, upper)
}

/// Solves the polynomial scenario program on `domain`.
pub fn fit_pas(points: &[DVector<f64>], domain: &AxisBox, degree: usize, options: &PasOptions) -> Result<PasFit> {
    if points.is_empty() {
        return Err(Error::InvalidParameter("no points".into()));
    }
    let n = domain.dim();
    for p in points {
        check_dim(n, p.len())?;
    }
    if !domain.has_interior() {
        return Err(Error::InvalidParameter("polynomial domain box needs an interior".into()));
    }
    let outside: Vec<usize> = points
        .iter()
        .enumerate()
        .filter(|(_, p)| !domain.contains(p.as_slice(), 0.0))
        .map(|(i, _)| i)
        .collect();
    if !outside.is_empty() {
        return Err(Error::PointsOutsideDomain {
            count: outside.len(),
            indices: outside.into_iter().take(10).collect(),
        });
    }
    let template = assemble_putinar(n, degree, options.multiplier_degree)?;
    let full = &template.full;
    let npts = points.len();

    let mut kinds: Vec<BlockKind> = template.blocks.iter().map(|b| BlockKind::Psd(b.size(n))).collect();
    let slack = kinds.len();
    kinds.push(BlockKind::Diag(npts));

    // objective: ∫ over the unit cube, truncated at degree σ
    let unit = AxisBox::cube(n, -1.0, 1.0)?;
    let mut w = box_moments(&unit, full.degree()).values;
    for v in w.iter_mut().skip(full.prefix_len(degree)) {
        *v = 0.0;
    }
    let mut c: Vec<Block> = template.blocks.iter().map(|b| Block::Psd(b.functional(n, full, &w))).collect();
    c.push(Block::Diag(DVector::zeros(npts)));

    let mut constraints = Vec::new();
    let mut rhs = Vec::new();
    let mut vanishing = Vec::new();
    for idx in template.vanishing() {
        let mut e = vec![0.0; full.len()];
        e[idx] = 1.0;
        let parts: Vec<(usize, Block)> = template
            .blocks
            .iter()
            .enumerate()
            .map(|(bi, b)| (bi, b.functional(n, full, &e)))
            .filter(|(_, m)| m.amax() > 0.0)
            .map(|(bi, m)| (bi, Block::Psd(m)))
            .collect();
        vanishing.push(parts.clone());
        constraints.push(parts);
        rhs.push(0.0);
    }
    let mut t = vec![0.0; n];
    for (i, p) in points.iter().enumerate() {
        domain.to_unit(p.as_slice(), &mut t);
        let mut parts = Vec::with_capacity(template.blocks.len() + 1);
        for (bi, b) in template.blocks.iter().enumerate() {
            let v = DVector::from_vec(MonomialBasis::new(n, b.basis_degree).evaluate(&t));
            parts.push((bi, Block::Psd(&v * v.transpose() * b.multiplier.value(&t))));
        }
        let mut e = DVector::zeros(npts);
        e[i] = -1.0;
        parts.push((slack, Block::Diag(e)));
        constraints.push(parts);
        rhs.push(1.0);
    }
    let problem = StandardSdp {
        blocks: kinds,
        c,
        constraints,
        b: DVector::from_vec(rhs),
    };
    let sol = solve_standard(&problem, options.tol)?;
    if !sol.report.is_optimal() {
        return Err(Error::Solver(Box::new(sol.report)));
    }
    let mut grams: Vec<DMatrix<f64>> = sol.x[..slack]
        .iter()
        .map(|b| match b {
            Block::Psd(m) => m.clone(),
            Block::Diag(_) => unreachable!(),
        })
        .collect();
    project_vanishing(&mut grams, &vanishing);
    let coefficients = template.polynomial(&grams);
    let set = PasSet::new(domain.clone(), degree, coefficients, template.gram_blocks(&grams))?;
    let objective = set.integral();
    Ok(PasFit {
        set,
        objective,
        report: sol.report,
    })
}

/// Smallest Frobenius-norm correction making the vanishing constraints hold
/// exactly.
fn project_vanishing(grams: &mut [DMatrix<f64>], constraints: &[Vec<(usize, Block)>]) {
    let m = constraints.len();
    if m == 0 {
        return;
    }
    let value = |parts: &[(usize, Block)], g: &[DMatrix<f64>]| -> f64 {
        parts
            .iter()
            .map(|(bi, a)| match a {
                Block::Psd(a) => a.dot(&g[*bi]),
                Block::Diag(_) => 0.0,
            })
            .sum()
    };
    let r = DVector::from_fn(m, |i, _| -value(&constraints[i], grams));
    let mut k = DMatrix::zeros(m, m);
    for i in 0..m {
        for j in 0..m {
            let mut acc = 0.0;
            for (bi, a) in &constraints[i] {
                for (bj, b) in &constraints[j] {
                    if bi == bj {
                        acc += a.inner(b);
                    }
                }
            }
            k[(i, j)] = acc;
        }
    }
    let Some(lambda) = k.lu().solve(&r) else {
        return;
    };
    for (i, parts) in constraints.iter().enumerate() {
        for (bi, a) in parts {
            if let Block::Psd(a) = a {
                grams[*bi] += a * lambda[i];
            }
        }
    }
}

/// Monte Carlo estimate of `vol({x ∈ S : q(x) ≥ 1})` from `m` uniform draws
/// of `S`, with its standard error.
pub fn pas_volume_estimate(u: &PasSet, stream: &SampleStream, m: usize) -> Result<(f64, f64)> {
    if m == 0 {
        return Err(Error::InvalidParameter("sample count must be at least 1".into()));
    }
    const CHUNK: usize = 4096;
    let chunks = m.div_ceil(CHUNK);
    let counts = par::map_range(chunks, |c| -> Result<usize> {
        let mut rng = stream.at(stream.index().wrapping_add(c as u64)).rng();
        let len = CHUNK.min(m - c * CHUNK);
        let mut x = vec![0.0; u.dim()];
        let mut hits = 0;
        for _ in 0..len {
            u.domain().draw_into(&mut rng, &mut x)?;
            if u.eval(&x) >= 1.0 {
                hits += 1;
            }
        }
        Ok(hits)
    });
    let mut hits = 0;
    for c in counts {
        hits += c?;
    }
    let frac = hits as f64 / m as f64;
    let vol = u.domain().volume();
    Ok((vol * frac, vol * (frac * (1.0 - frac) / m as f64).sqrt()))
}
