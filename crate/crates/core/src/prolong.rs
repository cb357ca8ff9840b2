//! Lifting a sampled solution manifold through jet levels.
//!
//! At each level the tangent frame of every point is estimated and the new
//! top-order derivatives follow from the chain rule `A X = B`, where `A`
//! holds the frame rows of the (augmented) independent variables and `B`
//! the rows of the current top-order coordinates.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::jetspace::{Coordinate, JetLayout};
use crate::neighbors::knn;
use crate::pointcloud::PointCloud;
use crate::tangent::{coordinate_rcond, gmls_refine, GmlsParams, TangentFrame, UNISOLVENCE_LIMIT};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProlongParams {
    pub gmls: GmlsParams,
    /// Points whose chain-rule matrix exceeds this condition number are degenerate.
    pub condition_limit: f64,
    /// Fraction of degenerate points tolerated per level before failing.
    pub max_degenerate_fraction: f64,
    /// Stencils whose Vandermonde matrix over the independent coordinates has
    /// a smaller reciprocal condition are degenerate.
    pub unisolvence_limit: f64,
}

impl ProlongParams {
    pub fn new(gmls: GmlsParams) -> Self {
        Self {
            gmls,
            condition_limit: 1e8,
            max_degenerate_fraction: 0.01,
            unisolvence_limit: UNISOLVENCE_LIMIT,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChainRuleSolution {
    /// New coordinates of order `level + 1`, in layout order.
    pub values: Vec<f64>,
    pub condition: f64,
}

/// Solves the chain-rule system at one point and assembles the order
/// `level + 1` coordinates, averaging every route into a mixed partial.
pub fn derivatives_at_point(
    frame: &TangentFrame,
    layout: &JetLayout,
    level: usize,
    condition_limit: f64,
) -> Result<ChainRuleSolution> {
    if level >= layout.p() {
        return Err(Error::LevelExhausted(level));
    }
    let d = layout.d();
    let dim = layout.dimension(level)?;
    if frame.tangent.nrows() != dim || frame.tangent.ncols() != d {
        return Err(Error::DimensionMismatch {
            what: "tangent frame",
            expected: dim,
            found: frame.tangent.nrows(),
        });
    }
    let a = frame.tangent.rows(0, d).transpose();
    // The frame is orthonormal, so relative to it the conditioning of `A`
    // is `1 / sigma_min(A)`; a scale-free cond(A) would miss steep slopes when d = 1.
    let sigma_min = a.clone().singular_values().min();
    let condition = if sigma_min > 0.0 {
        1.0 / sigma_min
    } else {
        f64::INFINITY
    };
    if !(condition <= condition_limit) {
        return Err(Error::IllConditioned {
            index: frame.base_index,
            condition,
        });
    }
    let start = layout.block_start(level);
    let b = frame.tangent.rows(start, dim - start).transpose();
    let x = a.lu().solve(&b).ok_or(Error::IllConditioned {
        index: frame.base_index,
        condition: f64::INFINITY,
    })?;
    let next = layout.indices_of_order(level + 1);
    let mut values = Vec::with_capacity(next.len() * layout.m());
    for dep in 0..layout.m() {
        for target in next {
            let mut sum = 0.0;
            let mut count = 0usize;
            for axis in 0..d {
                if let Some(src) = target.minus_unit(axis) {
                    let col = layout.offset(dep, &src)? - start;
                    sum += x[(axis, col)];
                    count += 1;
                }
            }
            values.push(sum / count as f64);
        }
    }
    Ok(ChainRuleSolution { values, condition })
}

#[derive(Clone, Debug, PartialEq)]
pub struct PointDiagnostics {
    pub condition: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LevelDiagnostics {
    /// Level the cloud was lifted from.
    pub from_level: usize,
    /// One entry per kept point, in output row order.
    pub points: Vec<PointDiagnostics>,
    /// Input row indices that were dropped as degenerate.
    pub dropped: Vec<usize>,
}

impl LevelDiagnostics {
    pub fn max_condition(&self) -> f64 {
        self.points.iter().map(|p| p.condition).fold(0.0, f64::max)
    }

    pub fn unconverged(&self) -> usize {
        self.points.iter().filter(|p| !p.converged).count()
    }
}

#[derive(Clone, Debug)]
pub struct ProlongedCloud {
    pub cloud: PointCloud,
    pub diagnostics: Vec<LevelDiagnostics>,
}

impl ProlongedCloud {
    /// Indices into the original (level-0) rows of the surviving points.
    pub fn surviving_rows(&self, original: usize) -> Vec<usize> {
        let mut rows: Vec<usize> = (0..original).collect();
        for level in &self.diagnostics {
            let dropped: std::collections::HashSet<usize> = level.dropped.iter().copied().collect();
            rows = rows
                .into_iter()
                .enumerate()
                .filter(|(i, _)| !dropped.contains(i))
                .map(|(_, r)| r)
                .collect();
        }
        rows
    }
}

pub fn prolongate_once(cloud: &PointCloud, params: &ProlongParams) -> Result<ProlongedCloud> {
    let layout = cloud.layout();
    let level = cloud.level();
    if level >= layout.p() {
        return Err(Error::LevelExhausted(level));
    }
    let d = layout.d();
    params.gmls.validate(d)?;
    let data = cloud.data();
    let n = cloud.n_points();
    let table = knn(data, params.gmls.k)?;
    let per_point: Vec<Result<(Vec<f64>, PointDiagnostics)>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let rcond = coordinate_rcond(data, &table, i, d, params.gmls.degree);
            if !(rcond >= params.unisolvence_limit) {
                return Err(Error::RankDeficient { index: i, rcond });
            }
            let refined = gmls_refine(data, &table, i, d, &params.gmls)?;
            let sol = derivatives_at_point(&refined.frame, layout, level, params.condition_limit)?;
            Ok((
                sol.values,
                PointDiagnostics {
                    condition: sol.condition,
                    iterations: refined.iterations,
                    converged: refined.converged,
                },
            ))
        })
        .collect();

    let dropped: Vec<usize> = per_point
        .iter()
        .enumerate()
        .filter(|(_, r)| r.is_err())
        .map(|(i, _)| i)
        .collect();
    if dropped.len() as f64 > params.max_degenerate_fraction * n as f64 {
        return Err(Error::TooManyDegenerate {
            dropped: dropped.len(),
            total: n,
            limit: params.max_degenerate_fraction,
        });
    }
    let new_dim = layout.dimension(level + 1)?;
    let old_dim = cloud.dim();
    let kept = n - dropped.len();
    let mut out = DMatrix::zeros(kept, new_dim);
    let mut points = Vec::with_capacity(kept);
    let mut row = 0;
    for (i, r) in per_point.into_iter().enumerate() {
        let Ok((values, diag)) = r else { continue };
        for j in 0..old_dim {
            out[(row, j)] = data[(i, j)];
        }
        for (j, v) in values.into_iter().enumerate() {
            out[(row, old_dim + j)] = v;
        }
        points.push(diag);
        row += 1;
    }
    Ok(ProlongedCloud {
        cloud: PointCloud::with_level(out, cloud, level + 1)?,
        diagnostics: vec![LevelDiagnostics {
            from_level: level,
            points,
            dropped,
        }],
    })
}

/// Lifts `cloud` to jet level `p`, widening its layout if needed.
pub fn prolongate(cloud: &PointCloud, p: usize, params: &ProlongParams) -> Result<ProlongedCloud> {
    if p < cloud.level() {
        return Err(Error::InvalidParameter(format!(
            "cannot lower a level-{} cloud to level {p}",
            cloud.level()
        )));
    }
    let mut current = if p > cloud.layout().p() {
        cloud.with_layout_order(p)?
    } else {
        cloud.clone()
    };
    let mut diagnostics = Vec::new();
    while current.level() < p {
        let step = prolongate_once(&current, params)?;
        diagnostics.extend(step.diagnostics);
        current = step.cloud;
    }
    Ok(ProlongedCloud {
        cloud: current,
        diagnostics,
    })
}

/// Names of the coordinates appended at `level`, for reporting.
pub fn new_coordinates(layout: &JetLayout, level: usize) -> Vec<Coordinate> {
    let start = layout.dimension(level).unwrap_or(0);
    let end = layout.dimension(level + 1).unwrap_or(start);
    (start..end).filter_map(|o| layout.coordinate(o).ok()).collect()
}
