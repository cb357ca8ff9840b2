//! Exact invariance system on analytic jet data.

use liesym::ansatz::{evaluate_prolonged, monomial_ansatz, prolong_ansatz};
use liesym::jetspace::JetLayout;
use liesym::pointcloud::{sample, ColumnRole, FamilySpec};
use liesym::Result;
use nalgebra::DMatrix;

use crate::analytic::observable_point;

#[derive(Clone, Debug)]
pub struct ResidualNullspace {
    /// Descending, divided by the largest.
    pub relative: Vec<f64>,
    /// Right singular vectors, column `j` paired with `relative[j]`.
    pub vectors: DMatrix<f64>,
    pub nullity: usize,
}

impl ResidualNullspace {
    pub fn basis(&self) -> DMatrix<f64> {
        let k = self.vectors.ncols();
        self.vectors.columns(k - self.nullity, self.nullity).into_owned()
    }
}

/// Orthonormal complement of the columns of `t`.
pub fn complement(t: &DMatrix<f64>) -> DMatrix<f64> {
    let (dim, d) = t.shape();
    let mut padded = DMatrix::zeros(dim, dim);
    padded.columns_mut(0, d).copy_from(t);
    let svd = padded.svd(true, false);
    let u = svd.u.expect("u requested");
    u.columns(d, dim - d).into_owned()
}

/// Stacks `L^T S` over every row of `spec` using exact jets and exact
/// normals, then counts singular values below `rel_tol`.
pub fn residual_nullspace_oracle(
    spec: &FamilySpec,
    p: usize,
    degree: usize,
    rel_tol: f64,
) -> Result<ResidualNullspace> {
    let cloud = sample(spec)?;
    let d = cloud.layout().d();
    let independent: Vec<usize> = cloud.roles()[..d]
        .iter()
        .enumerate()
        .filter(|(_, r)| matches!(r, ColumnRole::Independent(_)))
        .map(|(i, _)| i)
        .collect();
    let basis = monomial_ansatz(&JetLayout::new(independent.len(), cloud.layout().m(), 0)?, degree);
    let ansatz = prolong_ansatz(&basis, p)?;
    let mut blocks = Vec::with_capacity(cloud.n_points());
    for i in 0..cloud.n_points() {
        let sampled: Vec<f64> = (0..d).map(|j| cloud.data()[(i, j)]).collect();
        let (z, t) = observable_point(spec, &independent, &sampled, p)?;
        let l = evaluate_prolonged(&ansatz, &z)?;
        blocks.push(l.transpose() * complement(&t));
    }
    let k = basis.size();
    let cols: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut pt = DMatrix::zeros(cols.max(k), k);
    let mut row = 0;
    for b in &blocks {
        pt.rows_mut(row, b.ncols()).copy_from(&b.transpose());
        row += b.ncols();
    }
    let svd = pt.svd(false, true);
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let vt = svd.v_t.expect("v requested");
    let top = svd.singular_values[order[0]];
    let relative: Vec<f64> = order.iter().map(|&j| svd.singular_values[j] / top).collect();
    let vectors = DMatrix::from_fn(k, k, |r, c| vt[(order[c], r)]);
    let nullity = relative.iter().filter(|&&s| s < rel_tol).count();
    Ok(ResidualNullspace {
        relative,
        vectors,
        nullity,
    })
}
