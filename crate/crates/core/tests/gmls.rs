mod common;

use liesym::tangent::GmlsParams;

#[test]
fn derivative_of_sine_converges_at_chart_order() {
    let sizes = [160, 320, 640, 1280, 2560];
    let (errors, slope) = common::sin_convergence(&sizes, 5, GmlsParams::new(10, 3));
    let slope = slope.expect("finite errors");
    assert!(slope <= -2.5, "slope {slope:.3}, errors {errors:?}");
    assert!(errors.windows(2).all(|w| w[1] < w[0]), "{errors:?}");
}

#[test]
fn quadratic_chart_converges_more_slowly() {
    let sizes = [160, 640, 2560];
    let (_, cubic) = common::sin_convergence(&sizes, 3, GmlsParams::new(10, 3));
    let (_, quadratic) = common::sin_convergence(&sizes, 3, GmlsParams::new(10, 2));
    let (cubic, quadratic) = (cubic.unwrap(), quadratic.unwrap());
    assert!(quadratic > cubic, "quadratic {quadratic:.3} vs cubic {cubic:.3}");
    assert!(quadratic < -1.5, "quadratic slope {quadratic:.3}");
}
