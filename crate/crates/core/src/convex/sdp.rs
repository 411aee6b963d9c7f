//! Primal-dual interior-point method for block-diagonal semidefinite
//! programs.
//!
//! The core solver works on the standard pair
//!
//! ```text
//! primal:  min ⟨C, X⟩   s.t.  ⟨A_i, X⟩ = b_i,  X ⪰ 0
//! dual:    max bᵀy      s.t.  Σ y_i A_i + Z = C,  Z ⪰ 0
//! ```
//!
//! where `X`, `Z` and every `A_i` are block diagonal with semidefinite and
//! nonnegative-diagonal blocks. It uses the HKM search direction with
//! Mehrotra's predictor-corrector. [`SdpProblem`] states a program in
//! linear-matrix-inequality form and is solved as the dual side.

use nalgebra::{DMatrix, DVector};

use super::linalg::{max_psd_step, min_eigenvalue};
use super::{SolveReport, SolveStatus};
use crate::error::{check_dim, Error, Result};

pub const DEFAULT_TOL: f64 = 1e-7;
const MAX_ITERATIONS: usize = 200;
const STEP_FRACTION: f64 = 0.95;
const DIVERGENCE: f64 = 1e10;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BlockKind {
    Psd(usize),
    Diag(usize),
}

impl BlockKind {
    pub fn size(self) -> usize {
        match self {
            BlockKind::Psd(s) | BlockKind::Diag(s) => s,
        }
    }
}

/// One diagonal block of a block-diagonal matrix.
#[derive(Clone, Debug, PartialEq)]
pub enum Block {
    Psd(DMatrix<f64>),
    Diag(DVector<f64>),
}

impl Block {
    pub fn zeros(kind: BlockKind) -> Block {
        match kind {
            BlockKind::Psd(s) => Block::Psd(DMatrix::zeros(s, s)),
            BlockKind::Diag(s) => Block::Diag(DVector::zeros(s)),
        }
    }

    fn identity(kind: BlockKind, scale: f64) -> Block {
        match kind {
            BlockKind::Psd(s) => Block::Psd(DMatrix::identity(s, s) * scale),
            BlockKind::Diag(s) => Block::Diag(DVector::from_element(s, scale)),
        }
    }

    fn kind(&self) -> BlockKind {
        match self {
            Block::Psd(m) => BlockKind::Psd(m.nrows()),
            Block::Diag(v) => BlockKind::Diag(v.len()),
        }
    }

    /// Frobenius inner product; the left operand may be unsymmetric.
    pub fn inner(&self, other: &Block) -> f64 {
        match (self, other) {
            (Block::Psd(a), Block::Psd(b)) => a.dot(b),
            (Block::Diag(a), Block::Diag(b)) => a.dot(b),
            _ => panic!("block kinds differ"),
        }
    }

    fn norm(&self) -> f64 {
        match self {
            Block::Psd(m) => m.norm(),
            Block::Diag(v) => v.norm(),
        }
    }

    fn axpy(&mut self, a: f64, x: &Block) {
        match (self, x) {
            (Block::Psd(s), Block::Psd(x)) => *s += x * a,
            (Block::Diag(s), Block::Diag(x)) => *s += x * a,
            _ => panic!("block kinds differ"),
        }
    }

    pub fn min_eigenvalue(&self) -> f64 {
        match self {
            Block::Psd(m) => min_eigenvalue(m),
            Block::Diag(v) => v.min(),
        }
    }

    pub fn trace(&self) -> f64 {
        match self {
            Block::Psd(m) => m.trace(),
            Block::Diag(v) => v.sum(),
        }
    }
}

/// A standard-form program; constraint `i` lists its nonzero blocks.
#[derive(Clone, Debug)]
pub struct StandardSdp {
    pub blocks: Vec<BlockKind>,
    pub c: Vec<Block>,
    pub constraints: Vec<Vec<(usize, Block)>>,
    pub b: DVector<f64>,
}

#[derive(Clone, Debug)]
pub struct StandardSolution {
    pub report: SolveReport,
    pub x: Vec<Block>,
    pub y: DVector<f64>,
    pub z: Vec<Block>,
}

impl StandardSdp {
    fn validate(&self) -> Result<()> {
        check_dim(self.blocks.len(), self.c.len())?;
        check_dim(self.constraints.len(), self.b.len())?;
        let check = |kind: BlockKind, blk: &Block| -> Result<()> {
            if blk.kind() != kind {
                return Err(Error::InvalidParameter("block shape mismatch".into()));
            }
            if let Block::Psd(m) = blk {
                if m.ncols() != m.nrows() || (m - m.transpose()).amax() > 1e-12 * (1.0 + m.amax()) {
                    return Err(Error::InvalidParameter("block is not symmetric".into()));
                }
            }
            Ok(())
        };
        for (kind, blk) in self.blocks.iter().zip(&self.c) {
            check(*kind, blk)?;
        }
        for parts in &self.constraints {
            for (bi, blk) in parts {
                let kind = *self
                    .blocks
                    .get(*bi)
                    .ok_or_else(|| Error::InvalidParameter(format!("constraint block {bi} out of range")))?;
                check(kind, blk)?;
            }
        }
        let finite = self.b.iter().all(|v| v.is_finite())
            && self.c.iter().all(|blk| blk.norm().is_finite())
            && self.constraints.iter().flatten().all(|(_, blk)| blk.norm().is_finite());
        if !finite {
            return Err(Error::InvalidParameter("non-finite SDP data".into()));
        }
        Ok(())
    }

    /// `A(X)`, accepting unsymmetric blocks.
    pub fn apply(&self, x: &[Block]) -> DVector<f64> {
        DVector::from_iterator(
            self.constraints.len(),
            self.constraints
                .iter()
                .map(|parts| parts.iter().map(|(bi, a)| a.inner(&x[*bi])).sum::<f64>()),
        )
    }

    /// `Σ y_i A_i`.
    pub fn adjoint(&self, y: &DVector<f64>) -> Vec<Block> {
        let mut out: Vec<Block> = self.blocks.iter().map(|k| Block::zeros(*k)).collect();
        for (parts, &yi) in self.constraints.iter().zip(y.iter()) {
            if yi != 0.0 {
                for (bi, a) in parts {
                    out[*bi].axpy(yi, a);
                }
            }
        }
        out
    }

    /// Per-block lists of the constraints touching each block.
    fn by_block(&self) -> Vec<Vec<(usize, &Block)>> {
        let mut out = vec![Vec::new(); self.blocks.len()];
        for (i, parts) in self.constraints.iter().enumerate() {
            for (bi, a) in parts {
                out[*bi].push((i, a));
            }
        }
        out
    }
}

fn total_inner(a: &[Block], b: &[Block]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.inner(y)).sum()
}

fn total_norm(a: &[Block]) -> f64 {
    a.iter().map(|x| x.norm().powi(2)).sum::<f64>().sqrt()
}

fn max_abs(a: &[Block]) -> f64 {
    a.iter()
        .map(|x| match x {
            Block::Psd(m) => m.amax(),
            Block::Diag(v) => v.amax(),
        })
        .fold(0.0, f64::max)
}

/// Largest step keeping `x + α·dx` in the cone, capped at `cap`.
fn cone_step(x: &Block, dx: &Block, cap: f64) -> Option<f64> {
    match (x, dx) {
        (Block::Psd(x), Block::Psd(dx)) => {
            if x.nrows() == 0 {
                return Some(cap);
            }
            let chol = x.clone().cholesky()?;
            Some(max_psd_step(&chol.l(), dx).min(cap))
        }
        (Block::Diag(x), Block::Diag(dx)) => Some(
            x.iter()
                .zip(dx.iter())
                .filter(|(_, d)| **d < 0.0)
                .map(|(v, d)| -v / d)
                .fold(cap, f64::min),
        ),
        _ => None,
    }
}

struct Scaling {
    /// `Z⁻¹` per block (diagonal blocks hold the reciprocals).
    zinv: Vec<Block>,
}

impl Scaling {
    fn new(z: &[Block]) -> Option<Self> {
        let zinv = z
            .iter()
            .map(|blk| match blk {
                Block::Psd(m) => {
                    if m.nrows() == 0 {
                        return Some(Block::Psd(m.clone()));
                    }
                    let inv = m.clone().cholesky()?.inverse();
                    Some(Block::Psd((&inv + inv.transpose()) * 0.5))
                }
                Block::Diag(v) => {
                    if v.iter().any(|x| *x <= 0.0) {
                        None
                    } else {
                        Some(Block::Diag(v.map(|x| 1.0 / x)))
                    }
                }
            })
            .collect::<Option<Vec<_>>>()?;
        Some(Self { zinv })
    }
}

/// `X·K·Z⁻¹` per block (elementwise for diagonal blocks).
fn x_k_zinv(x: &[Block], k: &[Block], s: &Scaling) -> Vec<Block> {
    x.iter()
        .zip(k)
        .zip(&s.zinv)
        .map(|((x, k), zi)| match (x, k, zi) {
            (Block::Psd(x), Block::Psd(k), Block::Psd(zi)) => Block::Psd(x * k * zi),
            (Block::Diag(x), Block::Diag(k), Block::Diag(zi)) => {
                Block::Diag(x.component_mul(k).component_mul(zi))
            }
            _ => panic!("block kinds differ"),
        })
        .collect()
}

fn schur_complement(p: &StandardSdp, by_block: &[Vec<(usize, &Block)>], x: &[Block], s: &Scaling) -> DMatrix<f64> {
    let m = p.constraints.len();
    let mut schur = DMatrix::zeros(m, m);
    for (bi, list) in by_block.iter().enumerate() {
        match (&x[bi], &s.zinv[bi]) {
            (Block::Psd(xb), Block::Psd(zi)) => {
                let g: Vec<DMatrix<f64>> = list
                    .iter()
                    .map(|(_, a)| match a {
                        Block::Psd(a) => xb * a * zi,
                        Block::Diag(_) => unreachable!(),
                    })
                    .collect();
                for (p_i, (i, _)) in list.iter().enumerate() {
                    for (p_j, (j, aj)) in list.iter().enumerate().skip(p_i) {
                        let Block::Psd(aj) = aj else { unreachable!() };
                        let v = aj.dot(&g[p_i]);
                        schur[(*i, *j)] += v;
                        if p_j != p_i {
                            schur[(*j, *i)] += v;
                        }
                    }
                }
            }
            (Block::Diag(xb), Block::Diag(zi)) => {
                let w = xb.component_mul(zi).map(f64::sqrt);
                let rows = DMatrix::from_fn(list.len(), w.len(), |r, k| match list[r].1 {
                    Block::Diag(a) => a[k] * w[k],
                    Block::Psd(_) => unreachable!(),
                });
                let prod = &rows * rows.transpose();
                for (r1, (i, _)) in list.iter().enumerate() {
                    for (r2, (j, _)) in list.iter().enumerate() {
                        schur[(*i, *j)] += prod[(r1, r2)];
                    }
                }
            }
            _ => panic!("block kinds differ"),
        }
    }
    (&schur + schur.transpose()) * 0.5
}

enum Factor {
    Chol(nalgebra::Cholesky<f64, nalgebra::Dyn>),
    Lu(nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>),
}

impl Factor {
    fn new(m: DMatrix<f64>) -> Option<Factor> {
        if let Some(c) = m.clone().cholesky() {
            return Some(Factor::Chol(c));
        }
        let ridge = 1e-13 * m.diagonal().amax().max(1e-300);
        let mut reg = m.clone();
        for i in 0..reg.nrows() {
            reg[(i, i)] += ridge;
        }
        if let Some(c) = reg.cholesky() {
            return Some(Factor::Chol(c));
        }
        let lu = m.lu();
        if lu.is_invertible() {
            Some(Factor::Lu(lu))
        } else {
            None
        }
    }

    fn solve(&self, b: &DVector<f64>) -> Option<DVector<f64>> {
        match self {
            Factor::Chol(c) => Some(c.solve(b)),
            Factor::Lu(l) => l.solve(b),
        }
    }
}

struct Direction {
    dx: Vec<Block>,
    dy: DVector<f64>,
    dz: Vec<Block>,
}

/// Solves the Newton system for the complementarity target whose
/// `R_c Z⁻¹` part is `h`.
fn direction(
    p: &StandardSdp,
    factor: &Factor,
    x: &[Block],
    s: &Scaling,
    rp: &DVector<f64>,
    rd: &[Block],
    x_rd_zinv: &[Block],
    h: &[Block],
) -> Option<Direction> {
    let rhs = rp - p.apply(h) + p.apply(x_rd_zinv);
    let dy = factor.solve(&rhs)?;
    let aty = p.adjoint(&dy);
    let dz: Vec<Block> = rd
        .iter()
        .zip(&aty)
        .map(|(r, a)| {
            let mut d = r.clone();
            d.axpy(-1.0, a);
            d
        })
        .collect();
    let x_dz_zinv = x_k_zinv(x, &dz, s);
    let dx = h
        .iter()
        .zip(&x_dz_zinv)
        .map(|(h, t)| match (h, t) {
            (Block::Psd(h), Block::Psd(t)) => {
                let d = h - t;
                Block::Psd((&d + d.transpose()) * 0.5)
            }
            (Block::Diag(h), Block::Diag(t)) => Block::Diag(h - t),
            _ => panic!("block kinds differ"),
        })
        .collect();
    Some(Direction { dx, dy, dz })
}

fn step_length(v: &[Block], dv: &[Block]) -> Option<f64> {
    let mut a = f64::INFINITY;
    for (x, d) in v.iter().zip(dv) {
        a = a.min(cone_step(x, d, f64::INFINITY)?);
    }
    Some(a)
}

fn initial_point(p: &StandardSdp, by_block: &[Vec<(usize, &Block)>]) -> (Vec<Block>, Vec<Block>) {
    let mut x = Vec::new();
    let mut z = Vec::new();
    for (bi, kind) in p.blocks.iter().enumerate() {
        let s = kind.size().max(1) as f64;
        let mut xi = 10f64.max(s.sqrt());
        let mut eta = 10f64.max(s.sqrt()).max(p.c[bi].norm());
        for (i, a) in &by_block[bi] {
            let na = a.norm();
            xi = xi.max(s * (1.0 + p.b[*i].abs()) / (1.0 + na));
            eta = eta.max(na);
        }
        x.push(Block::identity(*kind, xi));
        z.push(Block::identity(*kind, eta));
    }
    (x, z)
}

/// Solves a standard-form program. Divergence of the dual iterates is
/// reported as primal infeasibility and divergence of the primal iterates
/// as unboundedness.
pub fn solve_standard(p: &StandardSdp, tol: f64) -> Result<StandardSolution> {
    p.validate()?;
    let by_block = p.by_block();
    let nu: f64 = p.blocks.iter().map(|k| k.size() as f64).sum::<f64>().max(1.0);
    let (mut x, mut z) = initial_point(p, &by_block);
    let mut y = DVector::zeros(p.constraints.len());
    let b_norm = p.b.norm();
    let c_norm = total_norm(&p.c);
    let mut status = SolveStatus::MaxIterations;
    let mut iterations = 0;
    let mut measures = (f64::INFINITY, f64::INFINITY, f64::INFINITY);
    let mut stalls = 0;
    for it in 0..=MAX_ITERATIONS {
        iterations = it;
        let rp = &p.b - p.apply(&x);
        let aty = p.adjoint(&y);
        let rd: Vec<Block> = p
            .c
            .iter()
            .zip(&z)
            .zip(&aty)
            .map(|((c, z), a)| {
                let mut r = c.clone();
                r.axpy(-1.0, z);
                r.axpy(-1.0, a);
                r
            })
            .collect();
        let pobj = total_inner(&p.c, &x);
        let dobj = p.b.dot(&y);
        let xz = total_inner(&x, &z);
        let mu = xz / nu;
        let rel_p = rp.norm() / (1.0 + b_norm);
        let rel_d = total_norm(&rd) / (1.0 + c_norm);
        let rel_gap = xz.abs().max((pobj - dobj).abs()) / (1.0 + pobj.abs() + dobj.abs());
        measures = (rel_p, rel_d, rel_gap);
        if rel_p <= tol && rel_d <= tol && rel_gap <= tol {
            status = SolveStatus::Optimal;
            break;
        }
        if y.amax() > DIVERGENCE * (1.0 + c_norm) && dobj > 0.0 {
            status = SolveStatus::Infeasible;
            break;
        }
        if max_abs(&x) > DIVERGENCE * (1.0 + b_norm) && pobj < 0.0 {
            status = SolveStatus::Unbounded;
            break;
        }
        if it == MAX_ITERATIONS || stalls >= 5 {
            status = if stalls >= 5 {
                SolveStatus::NumericalFailure
            } else {
                SolveStatus::MaxIterations
            };
            break;
        }
        let Some(scaling) = Scaling::new(&z) else {
            status = SolveStatus::NumericalFailure;
            break;
        };
        let Some(factor) = Factor::new(schur_complement(p, &by_block, &x, &scaling)) else {
            status = SolveStatus::NumericalFailure;
            break;
        };
        let x_rd_zinv = x_k_zinv(&x, &rd, &scaling);
        // predictor: R_c Z⁻¹ = −X
        let h_aff: Vec<Block> = x
            .iter()
            .map(|b| {
                let mut n = b.clone();
                n.axpy(-2.0, b);
                n
            })
            .collect();
        let Some(aff) = direction(p, &factor, &x, &scaling, &rp, &rd, &x_rd_zinv, &h_aff) else {
            status = SolveStatus::NumericalFailure;
            break;
        };
        let (Some(ap), Some(ad)) = (step_length(&x, &aff.dx), step_length(&z, &aff.dz)) else {
            status = SolveStatus::NumericalFailure;
            break;
        };
        let (ap, ad) = (ap.min(1.0), ad.min(1.0));
        let mut xa = x.clone();
        let mut za = z.clone();
        for (v, d) in xa.iter_mut().zip(&aff.dx) {
            v.axpy(ap, d);
        }
        for (v, d) in za.iter_mut().zip(&aff.dz) {
            v.axpy(ad, d);
        }
        let mu_aff = total_inner(&xa, &za) / nu;
        let sigma = (mu_aff / mu).clamp(0.0, 1.0).powi(3);
        // corrector: R_c Z⁻¹ = σμZ⁻¹ − X − dX_a dZ_a Z⁻¹
        let mut h = Vec::with_capacity(x.len());
        for bi in 0..x.len() {
            let blk = match (&x[bi], &scaling.zinv[bi], &aff.dx[bi], &aff.dz[bi]) {
                (Block::Psd(xb), Block::Psd(zi), Block::Psd(dxa), Block::Psd(dza)) => {
                    Block::Psd(zi * (sigma * mu) - xb - dxa * dza * zi)
                }
                (Block::Diag(xb), Block::Diag(zi), Block::Diag(dxa), Block::Diag(dza)) => Block::Diag(
                    zi * (sigma * mu) - xb - dxa.component_mul(dza).component_mul(zi),
                ),
                _ => panic!("block kinds differ"),
            };
            h.push(blk);
        }
        let Some(dir) = direction(p, &factor, &x, &scaling, &rp, &rd, &x_rd_zinv, &h) else {
            status = SolveStatus::NumericalFailure;
            break;
        };
        let (Some(ap), Some(ad)) = (step_length(&x, &dir.dx), step_length(&z, &dir.dz)) else {
            status = SolveStatus::NumericalFailure;
            break;
        };
        let ap = (STEP_FRACTION * ap).min(1.0);
        let ad = (STEP_FRACTION * ad).min(1.0);
        if ap < 1e-10 && ad < 1e-10 {
            stalls += 1;
        } else {
            stalls = 0;
        }
        for (v, d) in x.iter_mut().zip(&dir.dx) {
            v.axpy(ap, d);
        }
        y.axpy(ad, &dir.dy, 1.0);
        for (v, d) in z.iter_mut().zip(&dir.dz) {
            v.axpy(ad, d);
        }
    }
    let (rel_p, rel_d, rel_gap) = measures;
    Ok(StandardSolution {
        report: SolveReport {
            status,
            objective: total_inner(&p.c, &x),
            solution: y.iter().copied().collect(),
            residual: rel_p.max(rel_d),
            gap: rel_gap,
            iterations,
        },
        x,
        y,
        z,
    })
}

/// `F0 + Σ y_i F_i ⪰ 0`.
#[derive(Clone, Debug)]
pub struct LmiBlock {
    pub constant: DMatrix<f64>,
    pub coefficients: Vec<DMatrix<f64>>,
}

impl LmiBlock {
    pub fn value(&self, y: &DVector<f64>) -> DMatrix<f64> {
        let mut f = self.constant.clone();
        for (fi, yi) in self.coefficients.iter().zip(y.iter()) {
            f += fi * *yi;
        }
        f
    }
}

/// `min cᵀy  s.t.  F_j(y) ⪰ 0,  G y ≤ h,  E y = f`.
#[derive(Clone, Debug)]
pub struct SdpProblem {
    pub objective: DVector<f64>,
    pub blocks: Vec<LmiBlock>,
    pub ineq_matrix: DMatrix<f64>,
    pub ineq_rhs: DVector<f64>,
    pub eq_matrix: DMatrix<f64>,
    pub eq_rhs: DVector<f64>,
}

#[derive(Clone, Debug)]
pub struct SdpSolution {
    pub report: SolveReport,
    pub y: DVector<f64>,
    /// `F_j(y)` for every block.
    pub block_values: Vec<DMatrix<f64>>,
}

impl SdpProblem {
    pub fn new(objective: DVector<f64>) -> Self {
        let n = objective.len();
        Self {
            objective,
            blocks: Vec::new(),
            ineq_matrix: DMatrix::zeros(0, n),
            ineq_rhs: DVector::zeros(0),
            eq_matrix: DMatrix::zeros(0, n),
            eq_rhs: DVector::zeros(0),
        }
    }

    pub fn with_block(mut self, block: LmiBlock) -> Self {
        self.blocks.push(block);
        self
    }

    pub fn with_inequalities(mut self, g: DMatrix<f64>, h: DVector<f64>) -> Self {
        self.ineq_matrix = g;
        self.ineq_rhs = h;
        self
    }

    pub fn with_equalities(mut self, e: DMatrix<f64>, f: DVector<f64>) -> Self {
        self.eq_matrix = e;
        self.eq_rhs = f;
        self
    }

    pub fn nvars(&self) -> usize {
        self.objective.len()
    }

    fn validate(&self) -> Result<()> {
        let n = self.nvars();
        for b in &self.blocks {
            check_dim(n, b.coefficients.len())?;
            let s = b.constant.nrows();
            for m in std::iter::once(&b.constant).chain(&b.coefficients) {
                check_dim(s, m.nrows())?;
                check_dim(s, m.ncols())?;
                if (m - m.transpose()).amax() > 1e-12 * (1.0 + m.amax()) {
                    return Err(Error::InvalidParameter("LMI coefficient is not symmetric".into()));
                }
            }
        }
        check_dim(n, self.ineq_matrix.ncols())?;
        check_dim(self.ineq_matrix.nrows(), self.ineq_rhs.len())?;
        check_dim(n, self.eq_matrix.ncols())?;
        check_dim(self.eq_matrix.nrows(), self.eq_rhs.len())?;
        Ok(())
    }

    /// Largest scaled violation of the constraints at `y`.
    pub fn residual(&self, y: &DVector<f64>) -> f64 {
        let mut r: f64 = 0.0;
        for b in &self.blocks {
            let f = b.value(y);
            if f.nrows() > 0 {
                r = r.max((-min_eigenvalue(&f)).max(0.0) / (1.0 + f.trace().abs()));
            }
        }
        for (v, h) in (&self.ineq_matrix * y).iter().zip(self.ineq_rhs.iter()) {
            r = r.max((v - h).max(0.0) / (1.0 + h.abs()));
        }
        for (v, f) in (&self.eq_matrix * y).iter().zip(self.eq_rhs.iter()) {
            r = r.max((v - f).abs() / (1.0 + f.abs()));
        }
        r
    }
}

/// Particular solution and null-space basis of `E y = f`.
fn eliminate(e: &DMatrix<f64>, f: &DVector<f64>) -> Option<(DVector<f64>, DMatrix<f64>)> {
    let n = e.ncols();
    if e.nrows() == 0 {
        return Some((DVector::zeros(n), DMatrix::identity(n, n)));
    }
    let svd = e.clone().svd(true, true);
    let y0 = svd.solve(f, 1e-12 * svd.singular_values.max().max(1e-300)).ok()?;
    if (e * &y0 - f).amax() > 1e-9 * (1.0 + f.amax()) {
        return None;
    }
    let ete = e.transpose() * e;
    let eig = ete.symmetric_eigen();
    let scale = eig.eigenvalues.amax().max(1e-300);
    let cols: Vec<DVector<f64>> = (0..n)
        .filter(|&k| eig.eigenvalues[k] <= 1e-12 * scale)
        .map(|k| eig.eigenvectors.column(k).into_owned())
        .collect();
    let null = if cols.is_empty() {
        DMatrix::zeros(n, 0)
    } else {
        DMatrix::from_columns(&cols)
    };
    Some((y0, null))
}

/// Solves the LMI-form program as the dual side of a standard-form pair.
pub fn solve_sdp(problem: &SdpProblem, tol: f64) -> Result<SdpSolution> {
    problem.validate()?;
    let n = problem.nvars();
    let infeasible = |iterations| SdpSolution {
        report: SolveReport {
            status: SolveStatus::Infeasible,
            objective: f64::NAN,
            solution: Vec::new(),
            residual: f64::NAN,
            gap: f64::NAN,
            iterations,
        },
        y: DVector::zeros(n),
        block_values: Vec::new(),
    };
    let Some((y0, null)) = eliminate(&problem.eq_matrix, &problem.eq_rhs) else {
        return Ok(infeasible(0));
    };
    let k = null.ncols();
    let mut kinds = Vec::new();
    let mut c = Vec::new();
    let mut constraints: Vec<Vec<(usize, Block)>> = vec![Vec::new(); k];
    for blk in &problem.blocks {
        let bi = kinds.len();
        let s = blk.constant.nrows();
        kinds.push(BlockKind::Psd(s));
        c.push(Block::Psd(blk.value(&y0)));
        for (col, parts) in constraints.iter_mut().enumerate() {
            let mut a = DMatrix::zeros(s, s);
            for (i, fi) in blk.coefficients.iter().enumerate() {
                let w = null[(i, col)];
                if w != 0.0 {
                    a -= fi * w;
                }
            }
            parts.push((bi, Block::Psd(a)));
        }
    }
    if problem.ineq_matrix.nrows() > 0 {
        let bi = kinds.len();
        kinds.push(BlockKind::Diag(problem.ineq_matrix.nrows()));
        c.push(Block::Diag(&problem.ineq_rhs - &problem.ineq_matrix * &y0));
        let gn = &problem.ineq_matrix * &null;
        for (col, parts) in constraints.iter_mut().enumerate() {
            parts.push((bi, Block::Diag(gn.column(col).into_owned())));
        }
    }
    let b = -(null.transpose() * &problem.objective);
    let standard = StandardSdp {
        blocks: kinds,
        c,
        constraints,
        b,
    };
    let sol = solve_standard(&standard, tol)?;
    let y = &y0 + &null * &sol.y;
    let status = match sol.report.status {
        SolveStatus::Infeasible => SolveStatus::Unbounded,
        SolveStatus::Unbounded => SolveStatus::Infeasible,
        s => s,
    };
    let residual = problem.residual(&y);
    let status = if status == SolveStatus::Optimal && residual > 1e-7 {
        SolveStatus::NumericalFailure
    } else {
        status
    };
    let block_values = problem.blocks.iter().map(|b| b.value(&y)).collect();
    Ok(SdpSolution {
        report: SolveReport {
            status,
            objective: problem.objective.dot(&y),
            solution: y.iter().copied().collect(),
            residual,
            gap: sol.report.gap,
            iterations: sol.report.iterations,
        },
        y,
        block_values,
    })
}
