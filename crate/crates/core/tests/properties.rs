use liesym::ansatz::{total_derivative, JetPolynomial};
use liesym::cli::RunConfig;
use liesym::experiments::BenchmarkKind;
use liesym::invariance::{display_basis, orthonormalize, pointwise_block, principal_angles, NullityPolicy};
use liesym::jetspace::{binomial, Coordinate, JetLayout, MultiIndex};
use liesym::pointcloud::{format_float, roles_for_level, ColumnRole, PointCloud};
use nalgebra::DMatrix;
use num_rational::Rational64;
use proptest::prelude::*;

fn matrix(rows: usize, cols: usize) -> impl Strategy<Value = DMatrix<f64>> {
    prop::collection::vec(-1.0f64..1.0, rows * cols).prop_map(move |v| DMatrix::from_vec(rows, cols, v))
}

/// Random polynomial in `x`, `u`, `u_x` of a `(1, 1, 2)` ring.
fn polynomial() -> impl Strategy<Value = JetPolynomial> {
    prop::collection::vec((-5i64..5, 0usize..3, 0u32..3), 0..5).prop_map(|terms| {
        terms.into_iter().fold(JetPolynomial::zero(), |acc, (c, v, e)| {
            let mut t = JetPolynomial::constant(Rational64::from_integer(c));
            for _ in 0..e {
                t = t.mul(&JetPolynomial::var(v));
            }
            acc.add(&t)
        })
    })
}

proptest! {
    #[test]
    fn jet_dimension_matches_closed_form(d in 1usize..4, m in 1usize..3, p in 0usize..4) {
        let layout = JetLayout::new(d, m, p).unwrap();
        // Multisets of size <= p over d axes: C(d + p, d), one of them the value itself.
        prop_assert_eq!(layout.ambient_dim(), d + m * binomial(d + p, d));
    }

    #[test]
    fn offsets_and_coordinates_are_inverse(d in 1usize..4, m in 1usize..3, p in 0usize..4) {
        let layout = JetLayout::new(d, m, p).unwrap();
        for o in 0..layout.ambient_dim() {
            match layout.coordinate(o).unwrap() {
                Coordinate::Independent(a) => prop_assert_eq!(layout.independent_offset(a).unwrap(), o),
                Coordinate::Dependent { index, derivative } => {
                    prop_assert_eq!(layout.offset(index, &derivative).unwrap(), o)
                }
            }
        }
        prop_assert!(layout.coordinate(layout.ambient_dim()).is_err());
    }

    #[test]
    fn total_derivative_is_a_derivation(f in polynomial(), g in polynomial()) {
        let ring = JetLayout::new(1, 1, 2).unwrap();
        let d = |h: &JetPolynomial| total_derivative(h, 0, &ring).unwrap();
        prop_assert_eq!(d(&f.add(&g)), d(&f).add(&d(&g)));
        prop_assert_eq!(d(&f.mul(&g)), d(&f).mul(&g).add(&f.mul(&d(&g))));
    }

    #[test]
    fn floats_round_trip_through_text(v in any::<f64>().prop_filter("finite", |v| v.is_finite())) {
        prop_assert_eq!(format_float(v).parse::<f64>().unwrap().to_bits(), v.to_bits());
    }

    #[test]
    fn csv_round_trip(rows in prop::collection::vec((-1e3f64..1e3, -1e3f64..1e3), 1..30)) {
        let layout = JetLayout::new(1, 1, 0).unwrap();
        let roles = roles_for_level(&layout, 0, &[ColumnRole::Independent(0)]).unwrap();
        let data = DMatrix::from_fn(rows.len(), 2, |i, j| if j == 0 { rows[i].0 } else { rows[i].1 });
        // Duplicate rows are rejected on construction; skip those draws.
        let Ok(cloud) = PointCloud::new(data, roles, layout, 0) else { return Ok(()) };
        let mut buf = Vec::new();
        cloud.write_csv(&mut buf).unwrap();
        let back = PointCloud::parse_csv(std::str::from_utf8(&buf).unwrap()).unwrap();
        prop_assert_eq!(back.data(), cloud.data());
        prop_assert_eq!(back.roles(), cloud.roles());
    }

    #[test]
    fn principal_angle_sines_are_sorted_unit_values(a in matrix(7, 3), b in matrix(7, 3)) {
        let (u, v) = (orthonormalize(&a), orthonormalize(&b));
        let angle = principal_angles(&u, &v).unwrap();
        prop_assert!(angle.sines.iter().all(|s| (0.0..=1.0).contains(s)));
        prop_assert!(angle.sines.windows(2).all(|w| w[0] <= w[1]));
        prop_assert!(principal_angles(&u, &u).unwrap().max_sine() < 1e-7);
        // Symmetric in its arguments.
        let back = principal_angles(&v, &u).unwrap();
        prop_assert!((back.max_sine() - angle.max_sine()).abs() < 1e-10);
    }

    #[test]
    fn angles_ignore_the_choice_of_basis(a in matrix(6, 2), mix in matrix(2, 2)) {
        prop_assume!(mix.determinant().abs() > 0.1);
        let u = orthonormalize(&a);
        prop_assume!(a.singular_values().min() > 0.1);
        let v = orthonormalize(&(&a * mix));
        prop_assert!(principal_angles(&u, &v).unwrap().max_sine() < 1e-7);
    }

    #[test]
    fn display_basis_spans_the_same_space(a in matrix(8, 3)) {
        prop_assume!(a.singular_values().min() > 0.1);
        let u = orthonormalize(&a);
        let rows = display_basis(&u, 1e-12);
        prop_assert_eq!(rows.len(), 3);
        let shown = DMatrix::from_fn(8, 3, |i, j| rows[j][i]);
        prop_assert!(principal_angles(&u, &orthonormalize(&shown)).unwrap().max_sine() < 1e-7);
    }

    #[test]
    fn pointwise_block_is_the_transposed_product(l in matrix(5, 4), s in matrix(5, 2)) {
        prop_assert_eq!(pointwise_block(&l, &s).unwrap(), l.transpose() * &s);
    }

    #[test]
    fn run_config_round_trips(
        kind in prop::sample::select(BenchmarkKind::ALL.to_vec()),
        seed in any::<u64>(),
        k in 1usize..100,
        tol in 1e-12f64..1.0,
        fraction in 0.0f64..1.0,
        fixed in 1usize..5,
        sizes in prop::collection::vec(1usize..500, 1..4),
        timings in any::<bool>(),
    ) {
        let mut cfg = RunConfig::for_benchmark(Some(kind));
        cfg.seed = seed;
        cfg.pipeline.normal.k = k;
        cfg.pipeline.prolong.stop_tol = tol;
        cfg.pipeline.max_degenerate_fraction = fraction;
        cfg.pipeline.policy = if timings { NullityPolicy::Fixed(fixed) } else { NullityPolicy::Threshold(tol) };
        cfg.sweep = Some(vec![sizes.clone(), sizes.clone()]);
        cfg.sizes = Some(sizes);
        cfg.timings = timings;
        prop_assert_eq!(RunConfig::from_text(&cfg.to_text(), None).unwrap(), cfg);
    }
}

#[test]
fn multi_index_order_is_graded() {
    let layout = JetLayout::new(2, 1, 3).unwrap();
    let mut last = 0;
    for o in 2..layout.ambient_dim() {
        if let Coordinate::Dependent { derivative, .. } = layout.coordinate(o).unwrap() {
            assert!(derivative.order() >= last);
            last = derivative.order();
        }
    }
    assert_eq!(layout.offset(0, &MultiIndex::new(vec![1, 1])).unwrap(), 6);
}
