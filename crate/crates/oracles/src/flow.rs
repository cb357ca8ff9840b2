//! Prolonged vector fields by brute force: flow a solution graph along the
//! generator, re-differentiate the transformed graph with finite
//! differences, and differentiate the result in the flow parameter.

use liesym::ansatz::AnsatzBasis;
use liesym::jetspace::{Coordinate, JetLayout};
use liesym::{Error, Result};

#[derive(Clone, Copy, Debug)]
pub struct FlowParams {
    /// Flow parameter step for the central difference in `s`.
    pub s: f64,
    /// Spatial step of the finite-difference stencils.
    pub h: f64,
    pub rk_steps: usize,
    /// Largest accepted disagreement between the `s` and `s / 2` estimates,
    /// relative to the magnitude of the result.
    pub richardson_tol: f64,
}

impl Default for FlowParams {
    fn default() -> Self {
        Self {
            s: 1e-2,
            h: 1e-2,
            rk_steps: 16,
            richardson_tol: 1e-2,
        }
    }
}

/// Components of `X = sum_slot (sum_j c_{slot,j} psi_j) d_slot` at `y = (x, u)`.
pub fn vector_field(basis: &AnsatzBasis, c: &[f64], y: &[f64]) -> Vec<f64> {
    let psi: Vec<f64> = basis
        .monomials
        .iter()
        .map(|g| g.entries().iter().zip(y).map(|(&e, &v)| v.powi(e as i32)).product())
        .collect();
    (0..basis.n + basis.m)
        .map(|slot| (0..basis.kappa()).map(|j| c[basis.column(slot, j)] * psi[j]).sum())
        .collect()
}

/// RK4 flow of the vector field for parameter `s`.
pub fn flow(basis: &AnsatzBasis, c: &[f64], y0: &[f64], s: f64, steps: usize) -> Vec<f64> {
    let dt = s / steps as f64;
    let mut y = y0.to_vec();
    let axpy = |y: &[f64], k: &[f64], a: f64| -> Vec<f64> { y.iter().zip(k).map(|(u, v)| u + a * v).collect() };
    for _ in 0..steps {
        let k1 = vector_field(basis, c, &y);
        let k2 = vector_field(basis, c, &axpy(&y, &k1, dt / 2.0));
        let k3 = vector_field(basis, c, &axpy(&y, &k2, dt / 2.0));
        let k4 = vector_field(basis, c, &axpy(&y, &k3, dt));
        for i in 0..y.len() {
            y[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }
    y
}

/// The transformed graph `u_s(x_target)`: solve `flow(x, f(x))_x = x_target`
/// by fixed-point iteration, which contracts for small `s`.
fn transformed_value(
    basis: &AnsatzBasis,
    c: &[f64],
    graph: &dyn Fn(&[f64]) -> Vec<f64>,
    target: &[f64],
    s: f64,
    steps: usize,
) -> Result<Vec<f64>> {
    let n = basis.n;
    let mut x = target.to_vec();
    for _ in 0..100 {
        let mut y = x.clone();
        y.extend(graph(&x));
        let moved = flow(basis, c, &y, s, steps);
        let mut change = 0.0f64;
        for i in 0..n {
            let r = moved[i] - target[i];
            x[i] -= r;
            change = change.max(r.abs());
        }
        if change < 1e-15 {
            return Ok(moved[n..].to_vec());
        }
    }
    Err(Error::InvalidParameter(
        "flow oracle: transformed graph solve did not converge".into(),
    ))
}

const OFFSETS: [f64; 5] = [-2.0, -1.0, 0.0, 1.0, 2.0];

fn stencil(order: u32, h: f64) -> Result<[f64; 5]> {
    Ok(match order {
        0 => [0.0, 0.0, 1.0, 0.0, 0.0],
        1 => [1.0, -8.0, 0.0, 8.0, -1.0].map(|w| w / (12.0 * h)),
        2 => [-1.0, 16.0, -30.0, 16.0, -1.0].map(|w| w / (12.0 * h * h)),
        _ => {
            return Err(Error::InvalidParameter(
                "flow oracle supports per-axis order <= 2".into(),
            ))
        }
    })
}

/// All jet coordinates of the graph transported by parameter `s`.
fn transported_jet(
    basis: &AnsatzBasis,
    c: &[f64],
    graph: &dyn Fn(&[f64]) -> Vec<f64>,
    x0: &[f64],
    layout: &JetLayout,
    s: f64,
    params: &FlowParams,
) -> Result<Vec<f64>> {
    let n = basis.n;
    let mut y0 = x0.to_vec();
    y0.extend(graph(x0));
    let moved = flow(basis, c, &y0, s, params.rk_steps);
    let centre = &moved[..n];
    // Values of the transformed graph on the 5^n tensor grid around the centre.
    let total = 5usize.pow(n as u32);
    let mut grid = Vec::with_capacity(total);
    for flat in 0..total {
        let mut target = centre.to_vec();
        let mut rest = flat;
        for t in target.iter_mut() {
            *t += OFFSETS[rest % 5] * params.h;
            rest /= 5;
        }
        grid.push(transformed_value(basis, c, graph, &target, s, params.rk_steps)?);
    }
    let mut out = Vec::with_capacity(layout.ambient_dim());
    for coord in layout.coordinates(layout.p())? {
        match coord {
            Coordinate::Independent(i) => out.push(centre[i]),
            Coordinate::Dependent { index, derivative } => {
                if derivative.order() == 0 {
                    out.push(moved[n + index]);
                    continue;
                }
                let weights: Vec<[f64; 5]> = derivative
                    .entries()
                    .iter()
                    .map(|&o| stencil(o, params.h))
                    .collect::<Result<_>>()?;
                let mut acc = 0.0;
                for (flat, value) in grid.iter().enumerate() {
                    let mut w = 1.0;
                    let mut rest = flat;
                    for axis_w in &weights {
                        w *= axis_w[rest % 5];
                        rest /= 5;
                    }
                    if w != 0.0 {
                        acc += w * value[index];
                    }
                }
                out.push(acc);
            }
        }
    }
    Ok(out)
}

/// Numerical `X^(p)` at the jet of `graph` over `x0`, in `JetLayout(n, m, p)` order.
pub fn flow_prolongation_oracle(
    basis: &AnsatzBasis,
    c: &[f64],
    graph: &dyn Fn(&[f64]) -> Vec<f64>,
    x0: &[f64],
    p: usize,
    params: &FlowParams,
) -> Result<Vec<f64>> {
    let layout = JetLayout::new(basis.n, basis.m, p)?;
    let central = |s: f64| -> Result<Vec<f64>> {
        let plus = transported_jet(basis, c, graph, x0, &layout, s, params)?;
        let minus = transported_jet(basis, c, graph, x0, &layout, -s, params)?;
        Ok(plus.iter().zip(&minus).map(|(a, b)| (a - b) / (2.0 * s)).collect())
    };
    let coarse = central(params.s)?;
    let fine = central(params.s / 2.0)?;
    let extrapolated: Vec<f64> = coarse.iter().zip(&fine).map(|(a, b)| (4.0 * b - a) / 3.0).collect();
    let scale = extrapolated.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let spread = coarse.iter().zip(&fine).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    if spread > params.richardson_tol * scale {
        return Err(Error::InvalidParameter(format!(
            "flow oracle: step s = {} too large (Richardson spread {spread:.3e})",
            params.s
        )));
    }
    Ok(extrapolated)
}

#[cfg(test)]
mod tests {
    use super::*;
    use liesym::ansatz::{evaluate_prolonged, monomial_ansatz, prolong_ansatz};
    use nalgebra::DVector;

    #[test]
    fn scaling_on_exponential() {
        let basis = monomial_ansatz(&JetLayout::new(1, 1, 0).unwrap(), 1);
        let mut c = vec![0.0; 6];
        c[5] = 1.0;
        let graph = |x: &[f64]| vec![1.3 * x[0].exp()];
        let x0 = 0.2f64;
        let got = flow_prolongation_oracle(&basis, &c, &graph, &[x0], 1, &FlowParams::default()).unwrap();
        let ux = 1.3 * x0.exp();
        assert!(got[0].abs() < 1e-9);
        assert!((got[1] - ux).abs() < 1e-7);
        assert!((got[2] - ux).abs() < 1e-7);
    }

    #[test]
    fn matches_symbolic_rotation() {
        let basis = monomial_ansatz(&JetLayout::new(1, 1, 0).unwrap(), 1);
        let c = [0.0, 0.0, -1.0, 0.0, 1.0, 0.0];
        let graph = |x: &[f64]| vec![(1.0 - x[0] * x[0]).sqrt()];
        let x0 = 0.3f64;
        let u = (1.0 - x0 * x0).sqrt();
        let (ux, uxx) = (-x0 / u, -1.0 / u.powi(3));
        let got = flow_prolongation_oracle(&basis, &c, &graph, &[x0], 2, &FlowParams::default()).unwrap();
        let pa = prolong_ansatz(&basis, 2).unwrap();
        let l = evaluate_prolonged(&pa, &[x0, u, ux, uxx]).unwrap();
        let want = &l * DVector::from_column_slice(&c);
        for (g, w) in got.iter().zip(want.iter()) {
            assert!((g - w).abs() < 1e-6, "{got:?} vs {want}");
        }
    }
}
