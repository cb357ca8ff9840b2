//! Exact jets of the closed-form benchmark solutions.

use std::f64::consts::PI;
use std::sync::Arc;

use liesym::jetspace::{Coordinate, JetLayout, MultiIndex};
use liesym::pointcloud::{roles_for_level, FamilySpec, PointCloud, System};
use liesym::{Error, Result};
use nalgebra::DMatrix;

use crate::taylor::{Taylor, TaylorSpace};

/// Dependent variables of `system` as Taylor series in its axis values
/// (`x, C` / `t, C1, C2` / `t, x`).
pub fn closed_form(system: System, args: &[Taylor]) -> Result<Vec<Taylor>> {
    match system {
        System::LinearOde => Ok(vec![&args[1] * &args[0].exp()]),
        System::StuartLandau => {
            let (t, c1, c2) = (&args[0], &args[1], &args[2]);
            if c2.value() == 0.0 {
                return Err(Error::InvalidSpec("C2 = 0".into()));
            }
            let inv_c2_sq = (c2 * c2).recip();
            let decay = t.scale(-2.0).exp();
            let radicand = &Taylor::constant(t.space(), 1.0) - &(&inv_c2_sq.scale(-1.0).add_scalar(1.0) * &decay);
            if radicand.value() <= 0.0 {
                return Err(Error::InvalidSpec("non-positive radicand".into()));
            }
            let rinv = radicand.powf(-0.5);
            let phase = c1 - t;
            Ok(vec![&phase.cos() * &rinv, &phase.sin() * &rinv])
        }
        System::Transport => Ok(vec![(&args[0] + &args[1]).sin()]),
        System::Heat => {
            let (t, x) = (&args[0], &args[1]);
            if t.value() <= 0.0 {
                return Err(Error::InvalidSpec("heat kernel needs t > 0".into()));
            }
            let pref = t.scale(4.0 * PI).powf(-0.5);
            let expo = (&(x * x) * &t.recip()).scale(-0.25).exp();
            Ok(vec![&pref * &expo])
        }
    }
}

/// Taylor arguments for one sampled row: sampled axes become variables
/// (in cloud column order), fixed axes constants.
fn arguments(spec: &FamilySpec, sampled: &[f64], space: &Arc<TaylorSpace>) -> Vec<Taylor> {
    let mut k = 0;
    spec.axes
        .iter()
        .map(|axis| match axis.fixed {
            Some(v) => Taylor::constant(space, v),
            None => {
                let t = Taylor::variable(space, k, sampled[k]);
                k += 1;
                t
            }
        })
        .collect()
}

fn dependent_count(system: System) -> usize {
    match system {
        System::StuartLandau => 2,
        _ => 1,
    }
}

/// Level-`p` cloud with exact jet coordinates for every row of a level-0
/// cloud drawn from `spec`.
pub fn analytic_jet(cloud: &PointCloud, spec: &FamilySpec, p: usize) -> Result<PointCloud> {
    let d = cloud.layout().d();
    let m = dependent_count(spec.system);
    let layout = JetLayout::new(d, m, p)?;
    let space = TaylorSpace::new(d, p);
    let coords = layout.coordinates(p)?;
    let mut data = DMatrix::zeros(cloud.n_points(), coords.len());
    for i in 0..cloud.n_points() {
        let sampled: Vec<f64> = (0..d).map(|j| cloud.data()[(i, j)]).collect();
        let u = closed_form(spec.system, &arguments(spec, &sampled, &space))?;
        for (col, c) in coords.iter().enumerate() {
            data[(i, col)] = match c {
                Coordinate::Independent(a) => sampled[*a],
                Coordinate::Dependent { index, derivative } => u[*index].derivative(derivative),
            };
        }
    }
    let roles = roles_for_level(&layout, p, &cloud.roles()[..d])?;
    PointCloud::new(data, roles, layout, p)
}

/// Observable jet point and exact tangent frame (`D x d`, columns are the
/// parameter derivatives) at one sampled row.
pub fn observable_point(
    spec: &FamilySpec,
    independent: &[usize],
    sampled: &[f64],
    p: usize,
) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let d = sampled.len();
    let n = independent.len();
    let m = dependent_count(spec.system);
    let layout = JetLayout::new(n, m, p)?;
    let space = TaylorSpace::new(d, p + 1);
    let u = closed_form(spec.system, &arguments(spec, sampled, &space))?;
    let coords = layout.coordinates(p)?;
    let mut z = Vec::with_capacity(coords.len());
    let mut tangent = DMatrix::zeros(coords.len(), d);
    for (row, c) in coords.iter().enumerate() {
        match c {
            Coordinate::Independent(a) => {
                z.push(sampled[independent[*a]]);
                tangent[(row, independent[*a])] = 1.0;
            }
            Coordinate::Dependent { index, derivative } => {
                let mut embedded = vec![0u32; d];
                for (k, &axis) in independent.iter().enumerate() {
                    embedded[axis] = derivative.entries()[k];
                }
                let j = MultiIndex::new(embedded);
                z.push(u[*index].derivative(&j));
                for k in 0..d {
                    tangent[(row, k)] = u[*index].derivative(&j.plus_unit(k));
                }
            }
        }
    }
    Ok((z, tangent))
}
