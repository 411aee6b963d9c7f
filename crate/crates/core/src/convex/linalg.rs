use nalgebra::DMatrix;

pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    let sym = (m + m.transpose()) * 0.5;
    sym.symmetric_eigen().eigenvalues.min()
}

/// Symmetric square root of a symmetric positive semidefinite matrix.
pub fn sym_sqrt(m: &DMatrix<f64>) -> DMatrix<f64> {
    let sym = (m + m.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    let d = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
    let v = &eig.eigenvectors;
    let r = v * DMatrix::from_diagonal(&d) * v.transpose();
    (&r + r.transpose()) * 0.5
}

/// Largest `α ≥ 0` with `X + α·D ⪰ 0`, given the Cholesky factor `L` of `X`
/// (infinite when `D` is PSD in the metric of `X`).
pub(crate) fn max_psd_step(l: &DMatrix<f64>, d: &DMatrix<f64>) -> f64 {
    let linv = l
        .clone()
        .solve_lower_triangular(&DMatrix::identity(l.nrows(), l.nrows()))
        .expect("triangular solve");
    let w = &linv * d * linv.transpose();
    let lam = min_eigenvalue(&w);
    if lam >= 0.0 {
        f64::INFINITY
    } else {
        -1.0 / lam
    }
}
