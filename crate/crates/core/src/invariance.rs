//! Discretized invariance system: normals of the prolonged solution
//! manifold, pointwise blocks `L_i^T S_i`, the stacked matrix `P`, its
//! numerical nullspace, and principal-angle error metrics.

use std::fmt::Write as _;

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;

use crate::ansatz::ProlongedAnsatz;
use crate::error::{Error, Result};
use crate::jetspace::{Coordinate, JetLayout, MultiIndex};
use crate::neighbors::knn;
use crate::pointcloud::{format_float, ColumnRole, PointCloud};
use crate::tangent::{coordinate_rcond, gmls_refine, GmlsParams};

/// Relative singular-value threshold used to detect symmetries.
pub const DEFAULT_THRESHOLD: f64 = 1e-5;

/// Jet data restricted to coordinates that do not involve free constants,
/// laid out as `JetLayout(n, m, p)`.
#[derive(Clone, Debug)]
pub struct ObservableJets {
    pub data: DMatrix<f64>,
    pub layout: JetLayout,
    /// Dimension of the solution manifold (independent variables plus free constants).
    pub manifold_dim: usize,
}

/// Drops free-constant columns and every derivative taken with respect to a
/// free constant. The remaining coordinates are those the ansatz acts on.
pub fn observable_jets(cloud: &PointCloud) -> Result<ObservableJets> {
    let full = cloud.layout();
    let level = cloud.level();
    let d_full = full.d();
    let roles = cloud.roles();
    let mut independent_axes = Vec::new();
    for (axis, role) in roles.iter().take(d_full).enumerate() {
        match role {
            ColumnRole::Independent(_) => independent_axes.push(axis),
            ColumnRole::FreeConstant(_) => {}
            other => {
                return Err(Error::InvalidLayout(format!(
                    "column {axis} has role {other} inside the independent block"
                )))
            }
        }
    }
    let n = independent_axes.len();
    if n == 0 {
        return Err(Error::InvalidLayout("no independent variables".into()));
    }
    let layout = JetLayout::new(n, full.m(), level)?;
    let mut columns = Vec::with_capacity(layout.ambient_dim());
    for c in layout.coordinates(level)? {
        let col = match c {
            Coordinate::Independent(i) => independent_axes[i],
            Coordinate::Dependent { index, derivative } => {
                let mut embedded = vec![0u32; d_full];
                for (k, &axis) in independent_axes.iter().enumerate() {
                    embedded[axis] = derivative.entries()[k];
                }
                full.offset(index, &MultiIndex::new(embedded))?
            }
        };
        columns.push(col);
    }
    let data = cloud.data().select_columns(&columns);
    Ok(ObservableJets {
        data,
        layout,
        manifold_dim: d_full,
    })
}

/// Per-point orthonormal normal frames of the jet manifold.
#[derive(Clone, Debug)]
pub struct NormalBundle {
    pub normals: Vec<DMatrix<f64>>,
    /// Row index of each kept point.
    pub points: Vec<usize>,
    pub dropped: Vec<usize>,
}

/// Re-runs frame estimation on the jet data and returns the normal spaces.
/// Points whose stencil fails are dropped, up to `max_dropped_fraction`.
/// When the manifold is a graph over its first `manifold_dim` coordinates,
/// `unisolvence_limit` also drops stencils that do not determine a chart there.
pub fn normals(
    data: &DMatrix<f64>,
    manifold_dim: usize,
    params: &GmlsParams,
    max_dropped_fraction: f64,
    unisolvence_limit: Option<f64>,
) -> Result<NormalBundle> {
    let (n, dim) = data.shape();
    if n == 0 {
        return Err(Error::EmptyCloud);
    }
    if manifold_dim >= dim {
        return Err(Error::EmptyNormalSpace { dim: manifold_dim });
    }
    params.validate(manifold_dim)?;
    let table = knn(data, params.k)?;
    let frames: Vec<Result<DMatrix<f64>>> = (0..n)
        .into_par_iter()
        .map(|i| {
            if let Some(limit) = unisolvence_limit {
                let rcond = coordinate_rcond(data, &table, i, manifold_dim, params.degree);
                if !(rcond >= limit) {
                    return Err(Error::RankDeficient { index: i, rcond });
                }
            }
            gmls_refine(data, &table, i, manifold_dim, params).map(|r| r.frame.normal)
        })
        .collect();
    let mut bundle = NormalBundle {
        normals: Vec::with_capacity(n),
        points: Vec::with_capacity(n),
        dropped: Vec::new(),
    };
    for (i, f) in frames.into_iter().enumerate() {
        match f {
            Ok(s) => {
                bundle.normals.push(s);
                bundle.points.push(i);
            }
            Err(_) => bundle.dropped.push(i),
        }
    }
    if bundle.dropped.len() as f64 > max_dropped_fraction * n as f64 {
        return Err(Error::TooManyDegenerate {
            dropped: bundle.dropped.len(),
            total: n,
            limit: max_dropped_fraction,
        });
    }
    Ok(bundle)
}

/// `p_i = L_i^T S_i`.
pub fn pointwise_block(li: &DMatrix<f64>, si: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if li.nrows() != si.nrows() {
        return Err(Error::DimensionMismatch {
            what: "pointwise block",
            expected: li.nrows(),
            found: si.nrows(),
        });
    }
    Ok(li.tr_mul(si))
}

/// Scales every column of a block to unit norm (zero columns are kept).
pub fn normalize_columns(block: &mut DMatrix<f64>) {
    for mut col in block.column_iter_mut() {
        let n = col.norm();
        if n > 0.0 {
            col /= n;
        }
    }
}

/// The stacked matrix `P = [p_1 ... p_N]` with per-block column offsets.
#[derive(Clone, Debug)]
pub struct StackedSystem {
    pub matrix: DMatrix<f64>,
    pub offsets: Vec<usize>,
}

impl StackedSystem {
    pub fn k(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn n_blocks(&self) -> usize {
        self.offsets.len()
    }
}

pub fn assemble(blocks: &[DMatrix<f64>]) -> Result<StackedSystem> {
    let k = blocks.first().map_or(0, |b| b.nrows());
    let mut offsets = Vec::with_capacity(blocks.len());
    let mut cols = 0;
    for b in blocks {
        if b.nrows() != k {
            return Err(Error::DimensionMismatch {
                what: "stacked block rows",
                expected: k,
                found: b.nrows(),
            });
        }
        offsets.push(cols);
        cols += b.ncols();
    }
    let mut matrix = DMatrix::zeros(k, cols);
    for (b, &off) in blocks.iter().zip(&offsets) {
        matrix.columns_mut(off, b.ncols()).copy_from(b);
    }
    Ok(StackedSystem { matrix, offsets })
}

/// Normals, ansatz evaluation and blocks for every point of `jets`.
pub fn build_system(
    jets: &ObservableJets,
    ansatz: &ProlongedAnsatz,
    params: &GmlsParams,
    max_dropped_fraction: f64,
    unisolvence_limit: f64,
    normalize: bool,
) -> Result<(StackedSystem, NormalBundle)> {
    if ansatz.layout != jets.layout {
        return Err(Error::DimensionMismatch {
            what: "ansatz layout",
            expected: jets.layout.ambient_dim(),
            found: ansatz.layout.ambient_dim(),
        });
    }
    // Without free constants the observable jets are a graph over x.
    let graph = (jets.layout.d() == jets.manifold_dim).then_some(unisolvence_limit);
    let bundle = normals(&jets.data, jets.manifold_dim, params, max_dropped_fraction, graph)?;
    let blocks: Vec<DMatrix<f64>> = bundle
        .points
        .par_iter()
        .zip(bundle.normals.par_iter())
        .map(|(&i, s)| {
            let z: Vec<f64> = jets.data.row(i).iter().copied().collect();
            let mut li = DMatrix::zeros(ansatz.rows(), ansatz.cols());
            ansatz.evaluate_into(&z, &mut li);
            let mut b = li.tr_mul(s);
            if normalize {
                normalize_columns(&mut b);
            }
            b
        })
        .collect();
    Ok((assemble(&blocks)?, bundle))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum NullityPolicy {
    /// Count of `sigma_i < theta * sigma_1`.
    Threshold(f64),
    /// Largest consecutive log-gap whose lower side lies below `floor * sigma_1`.
    Gap {
        floor: f64,
    },
    Fixed(usize),
}

impl Default for NullityPolicy {
    fn default() -> Self {
        Self::Threshold(DEFAULT_THRESHOLD)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum NullspaceMethod {
    /// Householder QR of `P^T` followed by an SVD of the `K x K` factor.
    #[default]
    Direct,
    /// Eigen-decomposition of the Gram matrix `P P^T`.
    Gram,
}

#[derive(Clone, Debug)]
pub struct SpectralReport {
    /// Descending.
    pub singular_values: Vec<f64>,
    /// Right singular vectors of `P`, column `j` paired with `singular_values[j]`.
    pub vectors: DMatrix<f64>,
    pub nullity: usize,
    pub policy: NullityPolicy,
    /// `sigma_{K-r} / sigma_{K-r+1}` (1-based); `None` when `r` is `0` or `K`.
    pub gap_ratio: Option<f64>,
}

impl SpectralReport {
    pub fn k(&self) -> usize {
        self.singular_values.len()
    }

    /// Orthonormal `K x r` basis of the detected nullspace.
    pub fn basis(&self) -> DMatrix<f64> {
        self.smallest(self.nullity)
    }

    /// The `r` right singular vectors with the smallest singular values.
    pub fn smallest(&self, r: usize) -> DMatrix<f64> {
        let k = self.k();
        self.vectors.columns(k - r.min(k), r.min(k)).into_owned()
    }

    pub fn relative(&self) -> Vec<f64> {
        let s1 = self.singular_values[0];
        self.singular_values.iter().map(|s| s / s1).collect()
    }

    /// `index,sigma,relative,null` with one row per singular value.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("index,sigma,relative,null\n");
        let k = self.k();
        for (i, (s, r)) in self.singular_values.iter().zip(self.relative()).enumerate() {
            let null = i >= k - self.nullity;
            writeln!(out, "{i},{},{},{}", format_float(*s), format_float(r), u8::from(null)).unwrap();
        }
        out
    }
}

fn detect_nullity(sv: &[f64], policy: NullityPolicy) -> usize {
    let k = sv.len();
    let s1 = sv[0];
    match policy {
        NullityPolicy::Threshold(theta) => sv.iter().filter(|&&s| s < theta * s1).count(),
        NullityPolicy::Gap { floor } => {
            let mut best: Option<(f64, usize)> = None;
            for i in 0..k - 1 {
                if sv[i + 1] >= floor * s1 {
                    continue;
                }
                let gap = if sv[i + 1] > 0.0 {
                    (sv[i] / sv[i + 1]).ln()
                } else {
                    f64::INFINITY
                };
                if best.is_none_or(|(g, _)| gap > g) {
                    best = Some((gap, k - 1 - i));
                }
            }
            best.map_or(0, |(_, r)| r)
        }
        NullityPolicy::Fixed(r) => r.min(k),
    }
}

fn direct_spectrum(p: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let k = p.nrows();
    let cols = p.ncols();
    let mut pt = DMatrix::zeros(cols.max(k), k);
    pt.rows_mut(0, cols).copy_from(&p.transpose());
    let r = pt.qr().r();
    let svd = r.svd(false, true);
    let vt = svd.v_t.expect("v requested");
    (svd.singular_values.iter().copied().collect(), vt.transpose())
}

const GRAM_CHUNK: usize = 4096;

fn gram_spectrum(p: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let k = p.nrows();
    let cols = p.ncols();
    let partial: Vec<DMatrix<f64>> = (0..cols.div_ceil(GRAM_CHUNK))
        .into_par_iter()
        .map(|c| {
            let start = c * GRAM_CHUNK;
            let block = p.columns(start, GRAM_CHUNK.min(cols - start));
            block * block.transpose()
        })
        .collect();
    let gram = partial.into_iter().fold(DMatrix::zeros(k, k), |acc, g| acc + g);
    let eig = SymmetricEigen::new(gram);
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let sv = order.iter().map(|&j| eig.eigenvalues[j].max(0.0).sqrt()).collect();
    let vectors = DMatrix::from_fn(k, k, |r, c| eig.eigenvectors[(r, order[c])]);
    (sv, vectors)
}

pub fn nullspace(system: &StackedSystem, policy: NullityPolicy, method: NullspaceMethod) -> Result<SpectralReport> {
    let p = &system.matrix;
    if p.nrows() == 0 {
        return Err(Error::InvalidParameter("empty ansatz".into()));
    }
    let (singular_values, vectors) = match method {
        NullspaceMethod::Direct => direct_spectrum(p),
        NullspaceMethod::Gram => gram_spectrum(p),
    };
    if !(singular_values[0] > 0.0) {
        return Err(Error::ZeroSystem);
    }
    let k = singular_values.len();
    let nullity = detect_nullity(&singular_values, policy);
    let gap_ratio =
        (nullity > 0 && nullity < k).then(|| singular_values[k - nullity - 1] / singular_values[k - nullity]);
    Ok(SpectralReport {
        singular_values,
        vectors,
        nullity,
        policy,
        gap_ratio,
    })
}

/// Sines of the principal angles between two subspaces, non-decreasing.
#[derive(Clone, Debug, PartialEq)]
pub struct SubspaceAngle {
    pub sines: Vec<f64>,
}

impl SubspaceAngle {
    /// `||sin Theta||_2`.
    pub fn max_sine(&self) -> f64 {
        self.sines.last().copied().unwrap_or(0.0)
    }
}

/// Sines are the singular values of `(I - U U^T) V`, which keeps full
/// relative accuracy for small angles.
pub fn principal_angles(u: &DMatrix<f64>, v: &DMatrix<f64>) -> Result<SubspaceAngle> {
    if u.nrows() != v.nrows() {
        return Err(Error::DimensionMismatch {
            what: "subspace ambient dimension",
            expected: u.nrows(),
            found: v.nrows(),
        });
    }
    if u.ncols() != v.ncols() {
        return Err(Error::RankMismatch(u.ncols(), v.ncols()));
    }
    if u.ncols() == 0 {
        return Ok(SubspaceAngle { sines: Vec::new() });
    }
    let residual = v - u * u.tr_mul(v);
    let mut sines: Vec<f64> = residual.singular_values().iter().map(|s| s.clamp(0.0, 1.0)).collect();
    sines.sort_by(f64::total_cmp);
    Ok(SubspaceAngle { sines })
}

/// `N (log N / N)^(l / d)`.
pub fn theoretical_rate(n: f64, degree: usize, dim: usize) -> f64 {
    n * (n.ln() / n).powf(degree as f64 / dim as f64)
}

/// Reduced row echelon form of the span of `basis` columns, one unit-norm
/// vector per row. Used for display: sparse generators come out separated.
pub fn display_basis(basis: &DMatrix<f64>, tol: f64) -> Vec<Vec<f64>> {
    let (k, r) = basis.shape();
    let mut m = basis.transpose();
    let mut row = 0;
    for col in 0..k {
        if row == r {
            break;
        }
        let (pivot, value) = (row..r)
            .map(|i| (i, m[(i, col)].abs()))
            .fold((row, -1.0), |a, b| if b.1 > a.1 { b } else { a });
        if value <= tol {
            continue;
        }
        m.swap_rows(row, pivot);
        let lead = m[(row, col)];
        for j in 0..k {
            m[(row, j)] /= lead;
        }
        for i in 0..r {
            if i != row {
                let f = m[(i, col)];
                if f != 0.0 {
                    for j in 0..k {
                        m[(i, j)] -= f * m[(row, j)];
                    }
                }
            }
        }
        row += 1;
    }
    (0..row)
        .map(|i| {
            let v: Vec<f64> = m.row(i).iter().map(|&x| if x.abs() <= tol { 0.0 } else { x }).collect();
            let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            v.into_iter().map(|x| x / n).collect()
        })
        .collect()
}

/// Orthonormal basis for the span of the given columns.
pub fn orthonormalize(m: &DMatrix<f64>) -> DMatrix<f64> {
    m.clone().qr().q()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ansatz::{monomial_ansatz, prolong_ansatz};
    use crate::pointcloud::{sample, FamilySpec};

    fn e(k: usize, i: usize) -> DMatrix<f64> {
        let mut v = DMatrix::zeros(k, 1);
        v[(i, 0)] = 1.0;
        v
    }

    #[test]
    fn threshold_policy() {
        let sv = [5.0, 4.0, 3.0, 1e-9, 1e-10];
        assert_eq!(detect_nullity(&sv, NullityPolicy::Threshold(1e-5)), 2);
        assert_eq!(detect_nullity(&sv, NullityPolicy::Gap { floor: 1e-3 }), 2);
        assert_eq!(detect_nullity(&sv, NullityPolicy::Fixed(1)), 1);
        assert_eq!(detect_nullity(&[1.0, 0.5], NullityPolicy::Gap { floor: 1e-3 }), 0);
    }

    #[test]
    fn principal_angle_examples() {
        let a = principal_angles(&e(3, 0), &e(3, 0)).unwrap();
        assert_eq!(a.max_sine(), 0.0);
        assert!((principal_angles(&e(3, 0), &e(3, 1)).unwrap().max_sine() - 1.0).abs() < 1e-15);
        let diag = (e(3, 0) + e(3, 1)) / 2f64.sqrt();
        let s = principal_angles(&e(3, 0), &diag).unwrap().max_sine();
        assert!((s - 0.5f64.sqrt()).abs() < 1e-15);
        let two = DMatrix::from_columns(&[e(3, 0).column(0), e(3, 1).column(0)]);
        assert!(matches!(
            principal_angles(&e(3, 0), &two),
            Err(Error::RankMismatch(1, 2))
        ));
    }

    #[test]
    fn rate_examples() {
        assert!((theoretical_rate(std::f64::consts::E, 2, 2) - 1.0).abs() < 1e-15);
        assert!((theoretical_rate(100.0, 3, 1) - 9.7666e-3).abs() < 1e-6);
        assert!(theoretical_rate(2000.0, 3, 1) < theoretical_rate(1000.0, 3, 1));
    }

    #[test]
    fn assemble_shapes() {
        let blocks = vec![DMatrix::from_element(4, 2, 1.0); 3];
        let s = assemble(&blocks).unwrap();
        assert_eq!(s.matrix.shape(), (4, 6));
        assert_eq!(s.offsets, vec![0, 2, 4]);
        let bad = vec![DMatrix::zeros(4, 2), DMatrix::zeros(3, 2)];
        assert!(assemble(&bad).is_err());
        let zero = assemble(&[DMatrix::zeros(2, 2), DMatrix::zeros(2, 2)]).unwrap();
        assert!(matches!(
            nullspace(&zero, NullityPolicy::default(), NullspaceMethod::Direct),
            Err(Error::ZeroSystem)
        ));
    }

    #[test]
    fn pointwise_block_selects_columns() {
        let li = DMatrix::from_fn(3, 4, |r, c| (r * 4 + c) as f64);
        let b = pointwise_block(&li, &e(3, 0)).unwrap();
        assert_eq!(
            b.column(0).iter().copied().collect::<Vec<_>>(),
            vec![0.0, 1.0, 2.0, 3.0]
        );
        assert!(pointwise_block(&li, &e(2, 0)).is_err());
    }

    #[test]
    fn spectrum_and_nullspace() {
        // P has rows spanning everything except e_1 and e_3.
        let p = DMatrix::from_row_slice(4, 3, &[1.0, 2.0, 0.0, 0.0, 0.0, 0.0, 0.5, 0.0, 3.0, 0.0, 0.0, 0.0]);
        let sys = StackedSystem {
            matrix: p,
            offsets: vec![0],
        };
        for method in [NullspaceMethod::Direct, NullspaceMethod::Gram] {
            let rep = nullspace(&sys, NullityPolicy::default(), method).unwrap();
            assert_eq!(rep.nullity, 2);
            let want = DMatrix::from_columns(&[e(4, 1).column(0), e(4, 3).column(0)]);
            assert!(principal_angles(&want, &rep.basis()).unwrap().max_sine() < 1e-12);
            assert!(rep.gap_ratio.unwrap() > 1e10);
        }
    }

    #[test]
    fn rref_display() {
        let b = orthonormalize(&DMatrix::from_row_slice(3, 2, &[1.0, 1.0, 0.0, 0.0, 1.0, -1.0]));
        let rows = display_basis(&b, 1e-10);
        assert_eq!(rows.len(), 2);
        assert!((rows[0][0] - 1.0).abs() < 1e-12 && rows[0][2].abs() < 1e-12);
        assert!((rows[1][2] - 1.0).abs() < 1e-12 && rows[1][0].abs() < 1e-12);
    }

    #[test]
    fn observable_projection_drops_constant_derivatives() {
        let cloud = sample(&FamilySpec::linear_ode(12, 12, 3)).unwrap();
        let wide = cloud.with_layout_order(1).unwrap();
        let mut data = DMatrix::zeros(wide.n_points(), 5);
        data.columns_mut(0, 3).copy_from(wide.data());
        for i in 0..wide.n_points() {
            data[(i, 3)] = 10.0 + i as f64;
            data[(i, 4)] = -1.0;
        }
        let lifted = PointCloud::with_level(data, &wide, 1).unwrap();
        let obs = observable_jets(&lifted).unwrap();
        assert_eq!(obs.layout, JetLayout::new(1, 1, 1).unwrap());
        assert_eq!(obs.manifold_dim, 2);
        assert_eq!(obs.data.ncols(), 3);
        assert_eq!(obs.data[(0, 0)], cloud.data()[(0, 0)]);
        assert_eq!(obs.data[(0, 1)], cloud.data()[(0, 2)]);
        assert_eq!(obs.data[(5, 2)], 15.0);
    }

    #[test]
    fn normals_of_lifted_exponential() {
        let n = 200;
        let data = DMatrix::from_fn(n, 3, |i, c| {
            let x = -1.0 + 2.0 * i as f64 / (n - 1) as f64;
            if c == 0 {
                x
            } else {
                x.exp()
            }
        });
        let b = normals(&data, 1, &GmlsParams::new(10, 3), 0.0, None).unwrap();
        let mut worst = 0.0f64;
        for (&i, s) in b.points.iter().zip(&b.normals) {
            assert_eq!(s.shape(), (3, 2));
            let ex = data[(i, 1)];
            let t = DMatrix::from_column_slice(3, 1, &[1.0, ex, ex]);
            worst = worst.max(s.tr_mul(&t).norm() / t.norm());
            assert!((s.tr_mul(s) - DMatrix::identity(2, 2)).norm() < 1e-12);
        }
        assert!(worst < 1e-5, "{worst:e}");
        assert!(matches!(
            normals(&data.columns(0, 1).into_owned(), 1, &GmlsParams::new(10, 3), 0.0, None),
            Err(Error::EmptyNormalSpace { .. })
        ));
    }

    #[test]
    fn exact_symmetry_has_zero_block() {
        // u = e^x, exact jets; X = d/dx + u d/du is tangent.
        let basis = monomial_ansatz(&JetLayout::new(1, 1, 0).unwrap(), 1);
        let pa = prolong_ansatz(&basis, 1).unwrap();
        let x = 0.4f64;
        let z = [x, x.exp(), x.exp()];
        let li = crate::ansatz::evaluate_prolonged(&pa, &z).unwrap();
        let t = nalgebra::DVector::from_column_slice(&[1.0, x.exp(), x.exp()]).normalize();
        let s = crate::linalg::complete_basis(&DMatrix::from_column_slice(3, 1, t.as_slice()))
            .columns(1, 2)
            .into_owned();
        let p = pointwise_block(&li, &s).unwrap();
        let c = (e(6, 0) + e(6, 5)) / 2f64.sqrt();
        assert!(p.tr_mul(&c).norm() < 1e-14);
    }
}
