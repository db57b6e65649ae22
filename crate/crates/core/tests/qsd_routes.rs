//! The quasi-stationary eigenpair must come out the same along two
//! independent numeric routes (power iteration and a determinant scan) and
//! satisfy the geometric alarm-time identity on every model.

use std::sync::Arc;

use srdetect::fredholm::arl_false_alarm;
use srdetect::grid::QuadratureGrid;
use srdetect::model::{ChangeModel, ExponentialModel, GaussianMeanShiftModel};
use srdetect::quasi_stationary::{dense_operator, leading_eigenvalue_by_determinant, solve_qsd};

fn gl_grid(nodes: usize, upper: f64) -> Arc<QuadratureGrid<f64>> {
    Arc::new(QuadratureGrid::gauss_legendre(nodes, upper).unwrap())
}

fn check_routes(model: &dyn ChangeModel<f64>, threshold: f64, nodes: usize, tol: f64) {
    let grid = gl_grid(nodes, threshold);
    let qsd = solve_qsd(model, &grid).unwrap();
    let operator = dense_operator(model, &grid).unwrap();
    let by_determinant = leading_eigenvalue_by_determinant(&operator).unwrap();
    assert!(
        (qsd.lambda() - by_determinant).abs() <= tol,
        "eigenvalue routes disagree at threshold {threshold}: power {} vs determinant {}",
        qsd.lambda(),
        by_determinant
    );

    // With the eigen-density start, the alarm time is geometric, so its
    // expectation must equal the eigen-average of the fixed-start
    // expectations computed by the integral-equation solver.
    let phi = arl_false_alarm(model, &grid).unwrap();
    let weighted: Vec<f64> = phi
        .function
        .values()
        .iter()
        .zip(qsd.density().values())
        .map(|(&p, &q)| p * q)
        .collect();
    let averaged = grid.integrate(&weighted).unwrap();
    assert!(
        (averaged - qsd.expected_alarm_time()).abs() <= tol,
        "geometric identity failed at threshold {threshold}: averaged {averaged} vs {}",
        qsd.expected_alarm_time()
    );

    let invariance = qsd.verify_invariance(model).unwrap();
    assert!(invariance <= 1e-9, "eigen-residual {invariance:e} at threshold {threshold}");
}

#[test]
fn routes_agree_for_the_doubled_rate_exponential() {
    let model = ExponentialModel::new(2.0).unwrap();
    check_routes(&model, std::f64::consts::E - 1.0, 128, 1e-10);
    check_routes(&model, 0.75, 128, 1e-10);
}

#[test]
fn routes_agree_for_a_tripled_rate_exponential() {
    let model = ExponentialModel::new(3.0).unwrap();
    check_routes(&model, 1.2, 128, 1e-9);
}

#[test]
fn routes_agree_for_the_gaussian_mean_shift() {
    let model = GaussianMeanShiftModel::new(1.0).unwrap();
    check_routes(&model, 2.0, 96, 1e-8);
}

#[test]
fn eigenvalue_grows_with_the_threshold() {
    let model = ExponentialModel::new(2.0).unwrap();
    let mut previous = 0.0;
    for b in [0.25, 0.75, 1.5, 2.5] {
        let qsd = solve_qsd(&model, &gl_grid(96, b)).unwrap();
        assert!(
            qsd.lambda() > previous,
            "repeat probability must grow with the threshold: {} at {b}",
            qsd.lambda()
        );
        previous = qsd.lambda();
    }
}
