//! Monomial bases in graded-lexicographic order and fast polynomial
//! evaluation.

use std::collections::HashMap;

/// Largest number of variables supported by the stack-allocated evaluator.
pub const MAX_VARS: usize = 8;
/// Largest total degree supported by the stack-allocated evaluator.
pub const MAX_DEGREE: usize = 24;

/// All monomials in `n` variables of total degree `≤ degree`, ordered by
/// total degree and then lexicographically with the first variable's exponent
/// descending (`1, x1, x2, x1², x1x2, x2², …`).
#[derive(Clone, Debug)]
pub struct MonomialBasis {
    n: usize,
    degree: usize,
    exponents: Vec<Vec<u32>>,
    index: HashMap<Vec<u32>, usize>,
}

impl MonomialBasis {
    pub fn new(n: usize, degree: usize) -> Self {
        assert!(n >= 1 && n <= MAX_VARS, "monomial basis supports 1..={MAX_VARS} variables");
        assert!(degree <= MAX_DEGREE, "monomial basis supports degree ≤ {MAX_DEGREE}");
        let mut exponents = Vec::with_capacity(binomial(n + degree, n));
        for d in 0..=degree {
            let mut current = vec![0u32; n];
            compositions(d as u32, 0, &mut current, &mut exponents);
        }
        let index = exponents
            .iter()
            .enumerate()
            .map(|(i, e)| (e.clone(), i))
            .collect();
        Self {
            n,
            degree,
            exponents,
            index,
        }
    }

    pub fn nvars(&self) -> usize {
        self.n
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn len(&self) -> usize {
        self.exponents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exponents.is_empty()
    }

    pub fn exponents(&self, i: usize) -> &[u32] {
        &self.exponents[i]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[u32]> {
        self.exponents.iter().map(|e| e.as_slice())
    }

    pub fn index_of(&self, exps: &[u32]) -> Option<usize> {
        self.index.get(exps).copied()
    }

    /// Number of monomials of degree exactly `d` or less, i.e. the length of
    /// the prefix of this basis holding degree `≤ d`.
    pub fn prefix_len(&self, d: usize) -> usize {
        binomial(self.n + d.min(self.degree), self.n)
    }

    /// Writes the basis values at `t` into `out`.
    pub fn evaluate_into(&self, t: &[f64], out: &mut [f64]) {
        let powers = PowerTable::new(t, self.degree);
        for (o, e) in out.iter_mut().zip(&self.exponents) {
            *o = powers.monomial(e);
        }
    }

    pub fn evaluate(&self, t: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.len()];
        self.evaluate_into(t, &mut out);
        out
    }

    /// Evaluates `Σ coeffs[i]·π_i(t)`; `coeffs` may be shorter than the basis
    /// (a lower-degree polynomial in the same ordering).
    pub fn eval_poly(&self, coeffs: &[f64], t: &[f64]) -> f64 {
        let powers = PowerTable::new(t, self.degree);
        coeffs
            .iter()
            .zip(&self.exponents)
            .map(|(c, e)| c * powers.monomial(e))
            .sum()
    }
}

fn compositions(remaining: u32, pos: usize, current: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
    let n = current.len();
    if pos == n - 1 {
        current[pos] = remaining;
        out.push(current.clone());
        return;
    }
    for k in (0..=remaining).rev() {
        current[pos] = k;
        compositions(remaining - k, pos + 1, current, out);
    }
    current[pos] = 0;
}

struct PowerTable {
    table: [[f64; MAX_DEGREE + 1]; MAX_VARS],
}

impl PowerTable {
    fn new(t: &[f64], degree: usize) -> Self {
        let mut table = [[0.0; MAX_DEGREE + 1]; MAX_VARS];
        for (row, &v) in table.iter_mut().zip(t) {
            row[0] = 1.0;
            for k in 1..=degree {
                row[k] = row[k - 1] * v;
            }
        }
        Self { table }
    }

    #[inline]
    fn monomial(&self, e: &[u32]) -> f64 {
        e.iter()
            .enumerate()
            .map(|(j, &k)| self.table[j][k as usize])
            .product()
    }
}

pub fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc as usize
}

/// Coefficients (in `basis` order) of `Π_j (scale_j·t_j + offset_j)^{e_j}`
/// expanded in `t`, accumulated with weight `w` into `out`.
pub(crate) fn add_affine_monomial(
    basis: &MonomialBasis,
    exps: &[u32],
    scale: &[f64],
    offset: &[f64],
    w: f64,
    out: &mut [f64],
) {
    // per-variable expansions: coefficient of t_j^k
    let per_var: Vec<Vec<f64>> = exps
        .iter()
        .enumerate()
        .map(|(j, &e)| {
            (0..=e)
                .map(|k| {
                    binomial(e as usize, k as usize) as f64
                        * scale[j].powi(k as i32)
                        * offset[j].powi((e - k) as i32)
                })
                .collect()
        })
        .collect();
    let mut current = vec![0u32; exps.len()];
    expand(&per_var, 0, w, &mut current, basis, out);
}

fn expand(
    per_var: &[Vec<f64>],
    j: usize,
    acc: f64,
    current: &mut Vec<u32>,
    basis: &MonomialBasis,
    out: &mut [f64],
) {
    if j == per_var.len() {
        let i = basis
            .index_of(current)
            .expect("expanded monomial within basis degree");
        out[i] += acc;
        return;
    }
    for (k, c) in per_var[j].iter().enumerate() {
        if *c == 0.0 {
            continue;
        }
        current[j] = k as u32;
        expand(per_var, j + 1, acc * c, current, basis, out);
    }
    current[j] = 0;
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn graded_lex_order_two_variables() {
        let b = MonomialBasis::new(2, 2);
        let got: Vec<&[u32]> = b.iter().collect();
        let want: Vec<&[u32]> = vec![&[0, 0], &[1, 0], &[0, 1], &[2, 0], &[1, 1], &[0, 2]];
        assert_eq!(got, want);
    }

    #[test]
    fn basis_length_is_binomial() {
        for n in 1..=4 {
            for d in 0..=8 {
                let b = MonomialBasis::new(n, d);
                assert_eq!(b.len(), binomial(n + d, n));
                assert_eq!(b.exponents(0), vec![0; n].as_slice());
                assert_eq!(b.prefix_len(d.saturating_sub(1)), binomial(n + d.saturating_sub(1), n).min(b.len()));
            }
        }
        assert_eq!(MonomialBasis::new(2, 4).len(), 15);
    }

    #[test]
    fn evaluation_matches_direct_products() {
        let b = MonomialBasis::new(3, 3);
        let t = [0.3, -1.2, 2.0];
        let vals = b.evaluate(&t);
        for (i, e) in b.iter().enumerate() {
            let direct: f64 = e.iter().zip(&t).map(|(&k, &v)| v.powi(k as i32)).product();
            assert!((vals[i] - direct).abs() < 1e-14);
        }
    }

    #[test]
    fn affine_substitution_expands_binomially() {
        // (2t + 1)^2 = 4t² + 4t + 1
        let b = MonomialBasis::new(1, 2);
        let mut out = vec![0.0; 3];
        add_affine_monomial(&b, &[2], &[2.0], &[1.0], 1.0, &mut out);
        assert_eq!(out, vec![1.0, 4.0, 4.0]);
    }
}
