//! Checks shared by the focused test targets and the acceptance report.

#![allow(dead_code)]

use liesym::ansatz::{evaluate_prolonged, monomial_ansatz, prolong_ansatz, JetPolynomial, ProlongedAnsatz};
use liesym::experiments::loglog_slope;
use liesym::invariance::{assemble, nullspace, principal_angles, NullityPolicy, NullspaceMethod};
use liesym::jetspace::{JetLayout, MultiIndex};
use liesym::neighbors::{knn, knn_bruteforce};
use liesym::pointcloud::{
    heat_solution, linear_ode_solution, roles_for_level, stuart_landau_solution, transport_solution, uniform,
    ColumnRole, FamilySpec, PointCloud, System,
};
use liesym::prolong::{prolongate, ProlongParams};
use liesym::tangent::GmlsParams;
use liesym_oracles::{flow_prolongation_oracle, observable_point, FlowParams};
use nalgebra::{DMatrix, DVector};
use num_rational::Rational64;

pub fn rat(v: i64) -> Rational64 {
    Rational64::from_integer(v)
}

/// Jet variable `offset` raised to `power`, times `coeff`.
fn term(coeff: i64, factors: &[(usize, u32)]) -> JetPolynomial {
    let mut p = JetPolynomial::constant(rat(coeff));
    for &(v, e) in factors {
        for _ in 0..e {
            p = p.mul(&JetPolynomial::var(v));
        }
    }
    p
}

/// `eta = sum_k c_k * expected[k]`: compares the symbolic row against the
/// hand derivation one coefficient at a time, with exact rationals.
fn row_matches(pa: &ProlongedAnsatz, row: usize, expected: &[(usize, JetPolynomial)]) -> bool {
    (0..pa.cols()).all(|k| {
        let mut e = vec![rat(0); pa.cols()];
        e[k] = rat(1);
        let want = expected
            .iter()
            .find(|(c, _)| *c == k)
            .map(|(_, p)| p.clone())
            .unwrap_or_else(JetPolynomial::zero);
        pa.combine(row, &e) == want
    })
}

/// Hand-derived prolongation coefficients of three worked examples, each
/// compared term by term. Returns `(name, exact match)`.
pub fn eta_reproductions() -> Vec<(&'static str, bool)> {
    let mut out = Vec::new();

    // Scalar ODE in (x, u): eta_{1,1} = c4 + c5 u_x - c1 u_x - c2 u_x^2.
    let pa = prolong_ansatz(&monomial_ansatz(&JetLayout::new(1, 1, 0).unwrap(), 1), 1).unwrap();
    let layout = JetLayout::new(1, 1, 1).unwrap();
    let ux = layout.offset(0, &MultiIndex::unit(1, 0)).unwrap();
    let row = pa.row_of(0, &MultiIndex::unit(1, 0)).unwrap();
    let expected = vec![
        (4, term(1, &[])),
        (5, term(1, &[(ux, 1)])),
        (1, term(-1, &[(ux, 1)])),
        (2, term(-1, &[(ux, 2)])),
    ];
    out.push(("scalar ODE eta_{1,1}", row_matches(&pa, row, &expected)));

    // Planar system in (t; x, y).
    let pa = prolong_ansatz(&monomial_ansatz(&JetLayout::new(1, 2, 0).unwrap(), 1), 1).unwrap();
    let layout = JetLayout::new(1, 2, 1).unwrap();
    let t1 = MultiIndex::unit(1, 0);
    let (xt, yt) = (layout.offset(0, &t1).unwrap(), layout.offset(1, &t1).unwrap());
    let eta11 = vec![
        (5, term(1, &[])),
        (6, term(1, &[(xt, 1)])),
        (7, term(1, &[(yt, 1)])),
        (1, term(-1, &[(xt, 1)])),
        (2, term(-1, &[(xt, 2)])),
        (3, term(-1, &[(xt, 1), (yt, 1)])),
    ];
    let eta21 = vec![
        (9, term(1, &[])),
        (10, term(1, &[(xt, 1)])),
        (11, term(1, &[(yt, 1)])),
        (1, term(-1, &[(yt, 1)])),
        (3, term(-1, &[(yt, 2)])),
        (2, term(-1, &[(xt, 1), (yt, 1)])),
    ];
    out.push((
        "planar system eta_{1,1}",
        row_matches(&pa, pa.row_of(0, &t1).unwrap(), &eta11),
    ));
    out.push((
        "planar system eta_{2,1}",
        row_matches(&pa, pa.row_of(1, &t1).unwrap(), &eta21),
    ));

    // Scalar PDE in (t, x; u).
    let pa = prolong_ansatz(&monomial_ansatz(&JetLayout::new(2, 1, 0).unwrap(), 1), 1).unwrap();
    let layout = JetLayout::new(2, 1, 1).unwrap();
    let (dt, dx) = (MultiIndex::unit(2, 0), MultiIndex::unit(2, 1));
    let (ut, ux) = (layout.offset(0, &dt).unwrap(), layout.offset(0, &dx).unwrap());
    let eta11 = vec![
        (9, term(1, &[])),
        (11, term(1, &[(ut, 1)])),
        (1, term(-1, &[(ut, 1)])),
        (3, term(-1, &[(ut, 2)])),
        (5, term(-1, &[(ux, 1)])),
        (7, term(-1, &[(ux, 1), (ut, 1)])),
    ];
    let eta12 = vec![
        (10, term(1, &[])),
        (11, term(1, &[(ux, 1)])),
        (6, term(-1, &[(ux, 1)])),
        (2, term(-1, &[(ut, 1)])),
        (7, term(-1, &[(ux, 2)])),
        (3, term(-1, &[(ux, 1), (ut, 1)])),
    ];
    out.push((
        "scalar PDE eta_{1,1}",
        row_matches(&pa, pa.row_of(0, &dt).unwrap(), &eta11),
    ));
    out.push((
        "scalar PDE eta_{1,2}",
        row_matches(&pa, pa.row_of(0, &dx).unwrap(), &eta12),
    ));
    out
}

/// Worst relative disagreement between the symbolic prolongation and the
/// flow oracle over `cases` random points and coefficient vectors of one family.
pub fn flow_vs_symbolic(spec: &FamilySpec, p: usize, cases: usize, seed: u64) -> f64 {
    let independent: Vec<usize> = spec
        .axes
        .iter()
        .enumerate()
        .filter(|(_, a)| a.fixed.is_none() && !a.free_constant)
        .map(|(i, _)| i)
        .collect();
    let n = independent.len();
    let m = match spec.system {
        System::StuartLandau => 2,
        _ => 1,
    };
    let basis = monomial_ansatz(&JetLayout::new(n, m, 0).unwrap(), 1);
    let pa = prolong_ansatz(&basis, p).unwrap();
    let draw = |axis: u64, case: usize| uniform(seed, axis, case as u64);
    let mut worst = 0.0f64;
    for case in 0..cases {
        // Stay a flow step away from the domain edges.
        let params: Vec<f64> = spec
            .axes
            .iter()
            .enumerate()
            .map(|(a, ax)| match ax.fixed {
                Some(v) => v,
                None => {
                    let margin = 0.1 * (ax.hi - ax.lo);
                    ax.lo + margin + (ax.hi - ax.lo - 2.0 * margin) * draw(a as u64, case)
                }
            })
            .collect();
        let c: Vec<f64> = (0..basis.size())
            .map(|k| 2.0 * draw(10 + k as u64, case) - 1.0)
            .collect();
        let sampled: Vec<usize> = (0..spec.axes.len()).filter(|&a| spec.axes[a].fixed.is_none()).collect();
        let values: Vec<f64> = sampled.iter().map(|&a| params[a]).collect();
        let indep_in_sampled: Vec<usize> = sampled
            .iter()
            .enumerate()
            .filter(|(_, &a)| independent.contains(&a))
            .map(|(i, _)| i)
            .collect();
        let (z, _) = observable_point(spec, &indep_in_sampled, &values, p).unwrap();
        let l = evaluate_prolonged(&pa, &z).unwrap();
        let want = &l * DVector::from_column_slice(&c);
        let fixed = params.clone();
        let system = spec.system;
        let axes = independent.clone();
        let graph = move |x: &[f64]| -> Vec<f64> {
            let mut full = fixed.clone();
            for (k, &a) in axes.iter().enumerate() {
                full[a] = x[k];
            }
            match system {
                System::LinearOde => vec![linear_ode_solution(full[0], full[1])],
                System::StuartLandau => {
                    let (a, b) = stuart_landau_solution(full[0], full[1], full[2]).unwrap();
                    vec![a, b]
                }
                System::Transport => vec![transport_solution(full[0], full[1])],
                System::Heat => vec![heat_solution(full[0], full[1]).unwrap()],
            }
        };
        let x0: Vec<f64> = z[..n].to_vec();
        let got = flow_prolongation_oracle(&basis, &c, &graph, &x0, p, &FlowParams::default()).unwrap();
        let scale = want.iter().fold(1.0f64, |s, v| s.max(v.abs()));
        let err = got
            .iter()
            .zip(want.iter())
            .fold(0.0f64, |e, (g, w)| e.max((g - w).abs()));
        worst = worst.max(err / scale);
    }
    worst
}

/// Number of random clouds on which the kd-tree and brute-force tables differ.
pub fn knn_mismatches(clouds: usize, seed: u64) -> usize {
    let mut bad = 0;
    for c in 0..clouds {
        let u = |axis: u64, i: u64| uniform(seed.wrapping_add(c as u64), axis, i);
        let n = 20 + (u(0, 0) * 380.0) as usize;
        let dim = 1 + (u(0, 1) * 6.0) as usize;
        let k = 1 + (u(0, 2) * 19.0) as usize;
        let data = if c % 4 == 3 {
            // Integer lattice coordinates: many exact distance ties.
            let side = (n as f64).powf(1.0 / dim as f64).ceil() as usize + 1;
            let mut rows = Vec::new();
            for i in 0..n {
                let mut rest = i;
                for _ in 0..dim {
                    rows.push((rest % side) as f64);
                    rest /= side;
                }
            }
            DMatrix::from_row_slice(n, dim, &rows)
        } else {
            DMatrix::from_fn(n, dim, |i, j| u(1 + j as u64, i as u64))
        };
        let fast = knn(&data, k).unwrap();
        let slow = knn_bruteforce(&data, k).unwrap();
        if (0..n).any(|i| fast.row(i) != slow.row(i)) {
            bad += 1;
        }
    }
    bad
}

/// Max error of the GMLS first derivative of `y = sin x` on `[0, pi]`.
pub fn sin_derivative_error(n: usize, seed: u64, params: GmlsParams) -> f64 {
    let xs: Vec<f64> = (0..n)
        .map(|i| std::f64::consts::PI * uniform(seed, 0, i as u64))
        .collect();
    let data = DMatrix::from_fn(n, 2, |i, j| if j == 0 { xs[i] } else { xs[i].sin() });
    let layout = JetLayout::new(1, 1, 0).unwrap();
    let roles = roles_for_level(&layout, 0, &[ColumnRole::Independent(0)]).unwrap();
    let cloud = PointCloud::new(data, roles, layout, 0).unwrap();
    let lifted = prolongate(&cloud, 1, &ProlongParams::new(params)).unwrap().cloud;
    let d = lifted.data();
    (0..d.nrows()).fold(0.0f64, |e, i| e.max((d[(i, 2)] - d[(i, 0)].cos()).abs()))
}

/// Mean (over seeds) max derivative error per size, and the fitted log-log slope.
pub fn sin_convergence(sizes: &[usize], seeds: u64, params: GmlsParams) -> (Vec<f64>, Option<f64>) {
    let means: Vec<f64> = sizes
        .iter()
        .map(|&n| (0..seeds).map(|s| sin_derivative_error(n, s, params)).sum::<f64>() / seeds as f64)
        .collect();
    let pts: Vec<(f64, f64)> = sizes.iter().map(|&n| n as f64).zip(means.iter().copied()).collect();
    (means, loglog_slope(&pts))
}

/// Random `K x cols` system with an exactly planted `r`-dimensional left nullspace.
pub fn planted_system(k: usize, r: usize, blocks: usize, seed: u64) -> (Vec<DMatrix<f64>>, DMatrix<f64>) {
    let raw = DMatrix::from_fn(k, k, |i, j| uniform(seed, 0, (i * k + j) as u64) - 0.5);
    let q = raw.qr().q();
    let null = q.columns(0, r).into_owned();
    let range = q.columns(r, k - r).into_owned();
    let out = (0..blocks)
        .map(|b| {
            let w = DMatrix::from_fn(k - r, 3, |i, j| uniform(seed, 1 + b as u64, (i * 3 + j) as u64) - 0.5);
            &range * w
        })
        .collect();
    (out, null)
}

/// Largest principal-angle sine between the Gram and direct nullspaces.
pub fn gram_vs_direct(blocks: &[DMatrix<f64>], r: usize) -> f64 {
    let system = assemble(blocks).unwrap();
    let a = nullspace(&system, NullityPolicy::Fixed(r), NullspaceMethod::Direct).unwrap();
    let b = nullspace(&system, NullityPolicy::Fixed(r), NullspaceMethod::Gram).unwrap();
    principal_angles(&a.basis(), &b.basis()).unwrap().max_sine()
}
