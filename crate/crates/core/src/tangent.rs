//! Tangent and normal frames at each sample: a first-order SVD estimate
//! refined by iterated local polynomial (GMLS) charts.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::jetspace::{binomial, multi_indices_up_to, MultiIndex};
use crate::linalg::{complete_basis, lstsq_qr, spectral_norm};
use crate::neighbors::NeighborTable;

/// Vandermonde matrices with a smaller reciprocal condition estimate are rejected.
pub const RCOND_LIMIT: f64 = 1e-10;

/// Default lower bound for [`coordinate_rcond`].
pub const UNISOLVENCE_LIMIT: f64 = 1e-4;

#[derive(Clone, Debug)]
pub struct TangentFrame {
    /// `D x d`, orthonormal columns.
    pub tangent: DMatrix<f64>,
    /// `D x (D - d)`, orthonormal columns.
    pub normal: DMatrix<f64>,
    pub base_index: usize,
    /// Singular values of the stencil displacement matrix (SVD frames only).
    pub singular_values: Vec<f64>,
}

impl TangentFrame {
    pub fn dim(&self) -> usize {
        self.tangent.ncols()
    }

    fn from_basis(basis: DMatrix<f64>, d: usize, base_index: usize, singular_values: Vec<f64>) -> Self {
        let ambient = basis.nrows();
        Self {
            tangent: basis.columns(0, d).into_owned(),
            normal: basis.columns(d, ambient - d).into_owned(),
            base_index,
            singular_values,
        }
    }
}

/// Polynomial graph `s = pi(tau)` of the manifold over a tangent frame.
#[derive(Clone, Debug)]
pub struct LocalChart {
    /// `Y x (D - d)`, one row per basis monomial.
    pub coeffs: DMatrix<f64>,
    pub degree: usize,
    pub basis: Vec<MultiIndex>,
    /// Root of the summed squared fit residual over the stencil.
    pub residual: f64,
    /// Reciprocal condition estimate of the scaled Vandermonde matrix.
    pub rcond: f64,
}

impl LocalChart {
    pub fn value(&self, tau: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.coeffs.ncols()];
        for (row, g) in self.basis.iter().enumerate() {
            let phi = monomial(g, tau);
            for (c, o) in out.iter_mut().enumerate() {
                *o += self.coeffs[(row, c)] * phi;
            }
        }
        out
    }

    /// `(D - d) x d` Jacobian of the chart at `tau`.
    pub fn jacobian(&self, tau: &[f64]) -> DMatrix<f64> {
        let d = tau.len();
        let mut jac = DMatrix::zeros(self.coeffs.ncols(), d);
        for (row, g) in self.basis.iter().enumerate() {
            for a in 0..d {
                let Some(lower) = g.minus_unit(a) else { continue };
                let factor = g.entries()[a] as f64 * monomial(&lower, tau);
                for c in 0..self.coeffs.ncols() {
                    jac[(c, a)] += factor * self.coeffs[(row, c)];
                }
            }
        }
        jac
    }
}

pub fn chart_jacobian(chart: &LocalChart, tau: &[f64]) -> DMatrix<f64> {
    chart.jacobian(tau)
}

fn monomial(g: &MultiIndex, tau: &[f64]) -> f64 {
    g.entries().iter().zip(tau).map(|(&e, &t)| t.powi(e as i32)).product()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GmlsParams {
    pub k: usize,
    pub degree: usize,
    pub stop_tol: f64,
    pub max_iter: usize,
}

impl GmlsParams {
    pub fn new(k: usize, degree: usize) -> Self {
        Self {
            k,
            degree,
            stop_tol: 1e-12,
            max_iter: 20,
        }
    }

    /// Number of monomials of degree at most `degree` in `d` variables.
    pub fn basis_size(&self, d: usize) -> usize {
        binomial(self.degree + d, d)
    }

    pub fn validate(&self, d: usize) -> Result<()> {
        let required = self.basis_size(d);
        if self.k < required {
            return Err(Error::StencilTooSmall {
                k: self.k,
                required,
                degree: self.degree,
                dim: d,
            });
        }
        if self.degree < 2 {
            return Err(Error::InvalidParameter(format!(
                "chart degree must be at least 2, got {}",
                self.degree
            )));
        }
        if self.max_iter == 0 || !(self.stop_tol >= 0.0) {
            return Err(Error::InvalidParameter(
                "max_iter >= 1 and stop_tol >= 0 required".into(),
            ));
        }
        Ok(())
    }
}

/// `D x K` displacements `y_{i_j} - y_i` over the stencil of row `i`.
fn displacements(data: &DMatrix<f64>, table: &NeighborTable, i: usize) -> DMatrix<f64> {
    let nbrs = table.row(i);
    let dim = data.ncols();
    DMatrix::from_fn(dim, nbrs.len(), |r, c| data[(nbrs[c], r)] - data[(i, r)])
}

pub fn svd_frame(data: &DMatrix<f64>, table: &NeighborTable, i: usize, d: usize) -> Result<TangentFrame> {
    let dim = data.ncols();
    if d == 0 || d > dim {
        return Err(Error::InvalidParameter(format!(
            "manifold dimension {d} not in 1..={dim}"
        )));
    }
    if table.k() <= d {
        return Err(Error::InvalidParameter(format!(
            "stencil of {} points cannot span {d} dimensions",
            table.k()
        )));
    }
    let disp = displacements(data, table, i);
    let k = disp.ncols();
    let mut padded = DMatrix::zeros(dim, k.max(dim));
    padded.columns_mut(0, k).copy_from(&disp);
    let svd = padded.svd(true, false);
    let sv: Vec<f64> = svd.singular_values.iter().copied().collect();
    if sv[0] == 0.0 || sv[d - 1] <= 1e-12 * sv[0] {
        return Err(Error::DegenerateStencil { index: i, dim: d });
    }
    Ok(TangentFrame::from_basis(svd.u.expect("u requested"), d, i, sv))
}

pub fn fit_chart(
    frame: &TangentFrame,
    data: &DMatrix<f64>,
    table: &NeighborTable,
    i: usize,
    params: &GmlsParams,
) -> Result<LocalChart> {
    let d = frame.dim();
    let basis = multi_indices_up_to(d, params.degree);
    let disp = displacements(data, table, i);
    let k = disp.ncols();
    if k < basis.len() {
        return Err(Error::StencilTooSmall {
            k,
            required: basis.len(),
            degree: params.degree,
            dim: d,
        });
    }
    let tau = frame.tangent.transpose() * &disp;
    let s = (frame.normal.transpose() * &disp).transpose();
    let radius = (0..k).map(|w| tau.column(w).norm()).fold(0.0f64, f64::max);
    if radius == 0.0 {
        return Err(Error::DegenerateStencil { index: i, dim: d });
    }
    let mut scaled = vec![0.0; d];
    let vander = DMatrix::from_fn(k, basis.len(), |w, col| {
        for a in 0..d {
            scaled[a] = tau[(a, w)] / radius;
        }
        monomial(&basis[col], &scaled)
    });
    let (mut coeffs, rcond) = lstsq_qr(vander.clone(), &s);
    if !(rcond > RCOND_LIMIT) {
        return Err(Error::RankDeficient { index: i, rcond });
    }
    let fitted = &vander * &coeffs;
    let residual = (&s - fitted).norm();
    for (row, g) in basis.iter().enumerate() {
        let scale = radius.powi(g.order() as i32);
        coeffs.row_mut(row).unscale_mut(scale);
    }
    Ok(LocalChart {
        coeffs,
        degree: params.degree,
        basis,
        residual,
        rcond,
    })
}

/// Reciprocal condition (`sigma_min / sigma_max`) of the degree-`degree`
/// Vandermonde matrix over the first `d` coordinates of the stencil of row
/// `i`, scaled to the unit ball.
///
/// On a graph over those coordinates this measures whether the stencil is
/// unisolvent. Tensor-grid samples often put a whole stencil on two or three
/// grid lines; the chart fit then succeeds in a tilted frame and returns a
/// confidently wrong tangent, so this has to be checked in the graph
/// coordinates rather than the frame coordinates.
pub fn coordinate_rcond(data: &DMatrix<f64>, table: &NeighborTable, i: usize, d: usize, degree: usize) -> f64 {
    let nbrs = table.row(i);
    let radius = nbrs
        .iter()
        .map(|&j| {
            (0..d)
                .map(|a| (data[(j, a)] - data[(i, a)]).powi(2))
                .sum::<f64>()
                .sqrt()
        })
        .fold(0.0f64, f64::max);
    if radius == 0.0 {
        return 0.0;
    }
    let basis = multi_indices_up_to(d, degree);
    let vander: DMatrix<f64> = DMatrix::from_fn(nbrs.len(), basis.len(), |w, col| {
        basis[col]
            .entries()
            .iter()
            .enumerate()
            .map(|(a, &e)| ((data[(nbrs[w], a)] - data[(i, a)]) / radius).powi(e as i32))
            .product::<f64>()
    });
    let sv = vander.singular_values();
    if nbrs.len() < basis.len() || sv.max() == 0.0 {
        return 0.0;
    }
    sv.min() / sv.max()
}

#[derive(Clone, Debug)]
pub struct Refinement {
    pub frame: TangentFrame,
    pub chart: LocalChart,
    /// Number of chart fits performed.
    pub iterations: usize,
    pub converged: bool,
    /// `||D pi(0)||_2` of the returned chart.
    pub step: f64,
}

pub fn gmls_refine(
    data: &DMatrix<f64>,
    table: &NeighborTable,
    i: usize,
    d: usize,
    params: &GmlsParams,
) -> Result<Refinement> {
    params.validate(d)?;
    let mut frame = svd_frame(data, table, i, d)?;
    let origin = vec![0.0; d];
    let mut best: Option<Refinement> = None;
    for it in 1..=params.max_iter {
        let chart = fit_chart(&frame, data, table, i, params)?;
        let grad = chart.jacobian(&origin);
        let step = spectral_norm(&grad);
        let done = step <= params.stop_tol;
        let next_tangent = &frame.tangent + &frame.normal * &grad;
        if best.as_ref().is_none_or(|b| step < b.step) {
            best = Some(Refinement {
                frame: frame.clone(),
                chart,
                iterations: it,
                converged: done,
                step,
            });
        }
        if done {
            break;
        }
        let basis = complete_basis(&next_tangent);
        frame = TangentFrame::from_basis(basis, d, i, Vec::new());
    }
    let mut out = best.expect("at least one iteration");
    out.iterations = out.iterations.max(1);
    if !out.converged {
        out.iterations = params.max_iter;
    }
    Ok(out)
}
