//! Small dense helpers shared by the geometric modules.

use nalgebra::DMatrix;

/// Orthonormal basis of `R^D` whose first `cols.ncols()` columns span the
/// columns of `cols` (assumed full rank). Returned sorted so the span
/// comes first.
pub(crate) fn complete_basis(cols: &DMatrix<f64>) -> DMatrix<f64> {
    let (dim, d) = cols.shape();
    let mut padded = DMatrix::zeros(dim, dim.max(d));
    padded.columns_mut(0, d).copy_from(cols);
    let svd = padded.svd(true, false);
    svd.u.expect("u requested")
}

/// Largest singular value.
pub(crate) fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    if m.ncols() == 1 {
        return m.norm();
    }
    m.clone().singular_values().iter().fold(0.0f64, |a, &b| a.max(b))
}

/// Least squares `min ||A X - B||_F` via Householder QR. Returns the
/// solution and the reciprocal condition estimate `min|R_jj| / max|R_jj|`.
pub(crate) fn lstsq_qr(a: DMatrix<f64>, b: &DMatrix<f64>) -> (DMatrix<f64>, f64) {
    let ncols = a.ncols();
    let qr = a.qr();
    let mut rhs = b.clone();
    qr.q_tr_mul(&mut rhs);
    let r = qr.r();
    let diag: Vec<f64> = (0..ncols).map(|j| r[(j, j)].abs()).collect();
    let max = diag.iter().fold(0.0f64, |a, &b| a.max(b));
    let min = diag.iter().fold(f64::INFINITY, |a, &b| a.min(b));
    let rcond = if max == 0.0 { 0.0 } else { min / max };
    let top = rhs.rows(0, ncols).into_owned();
    let x = if rcond > 0.0 {
        r.solve_upper_triangular(&top)
            .unwrap_or_else(|| DMatrix::zeros(ncols, b.ncols()))
    } else {
        DMatrix::zeros(ncols, b.ncols())
    };
    (x, rcond)
}
