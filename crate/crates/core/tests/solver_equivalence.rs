//! Cross-checks the integral-equation solver against the closed forms of
//! the doubled-rate exponential model and against itself under grid
//! refinement for models without closed forms.

use std::sync::Arc;

use srdetect::exact_exp;
use srdetect::fredholm::{operating_characteristics, NuPolicy, TruncationRule, DEFAULT_NODES};
use srdetect::grid::{QuadratureGrid, Scheme};
use srdetect::model::{ExponentialModel, GaussianMeanShiftModel};
use srdetect::quasi_stationary::solve_qsd;

fn doubled_rate() -> ExponentialModel<f64> {
    ExponentialModel::new(2.0).unwrap()
}

fn gl_grid(nodes: usize, upper: f64) -> Arc<QuadratureGrid<f64>> {
    Arc::new(QuadratureGrid::gauss_legendre(nodes, upper).unwrap())
}

/// Worst disagreement between solver values and a closed form over the
/// grid nodes plus a handful of off-node states.
fn sup_disagreement(
    grid: &Arc<QuadratureGrid<f64>>,
    solver: impl Fn(f64) -> f64,
    exact: impl Fn(f64) -> f64,
) -> f64 {
    let mut worst: f64 = 0.0;
    for &r in grid.nodes() {
        worst = worst.max((solver(r) - exact(r)).abs());
    }
    for k in 0..17 {
        let r = grid.upper() * (k as f64) / 17.5;
        worst = worst.max((solver(r) - exact(r)).abs());
    }
    worst
}

#[test]
fn solver_matches_closed_forms_across_thresholds() {
    let model = doubled_rate();
    for a in [0.5, 1.0, 1.664_845_645_920_049_7] {
        let grid = gl_grid(DEFAULT_NODES, a);
        let oc =
            operating_characteristics(&model, &grid, NuPolicy::Auto(TruncationRule::default()))
                .unwrap();

        let arl_gap = sup_disagreement(
            &grid,
            |r| oc.arl_at(&model, r).unwrap(),
            |r| exact_exp::sr_arl(r, a).unwrap(),
        );
        assert!(arl_gap <= 1e-8, "alarm-time disagreement {arl_gap:e} at threshold {a}");

        let delay_gap = sup_disagreement(
            &grid,
            |r| oc.delay_zero_at(&model, r).unwrap(),
            |r| exact_exp::sr_delay_at_zero(r, a).unwrap(),
        );
        assert!(delay_gap <= 1e-8, "delay disagreement {delay_gap:e} at threshold {a}");

        let cumulative_gap = sup_disagreement(
            &grid,
            |r| oc.cumulative_at(&model, r).unwrap(),
            |r| exact_exp::sr_cumulative_delay(r, a).unwrap(),
        );
        assert!(
            cumulative_gap <= 1e-8,
            "cumulative-delay disagreement {cumulative_gap:e} at threshold {a}"
        );
    }
}

#[test]
fn quasi_stationary_averages_match_closed_forms_across_thresholds() {
    let model = doubled_rate();
    for b in [0.5, 1.0, 1.664_845_645_920_049_7] {
        let grid = gl_grid(DEFAULT_NODES, b);
        let qsd = solve_qsd(&model, &grid).unwrap();
        let arl = qsd.expected_alarm_time();
        let exact_arl = exact_exp::srp_arl(b).unwrap();
        assert!(
            (arl - exact_arl).abs() <= 1e-8,
            "averaged alarm time {arl} vs {exact_arl} at threshold {b}"
        );
    }
}

#[test]
fn lower_bound_is_attained_at_the_equalizer_start() {
    let model = doubled_rate();
    let a = 1.664_845_645_920_049_7;
    let r = 0.632_435_495_178_921_2;
    let grid = gl_grid(DEFAULT_NODES, a);
    let oc = operating_characteristics(&model, &grid, NuPolicy::Auto(TruncationRule::default()))
        .unwrap();
    let bound = oc.lower_bound_at(&model, r).unwrap();
    let sup = oc.supremum_add_at(&model, r).unwrap();
    assert!(
        (bound - sup).abs() <= 1e-8,
        "bound {bound} vs supremum delay {sup} at the equalizer"
    );
    let exact = exact_exp::sr_average_delay(a).unwrap();
    assert!((bound - exact).abs() <= 1e-8, "bound {bound} vs closed form {exact}");
}

#[test]
fn gaussian_solutions_stabilize_under_grid_refinement() {
    let model = GaussianMeanShiftModel::new(1.0).unwrap();
    let threshold = 3.0;
    let probes: Vec<f64> = (0..12).map(|k| threshold * (k as f64) / 12.5).collect();

    let solve = |nodes: usize| {
        let grid = gl_grid(nodes, threshold);
        let oc =
            operating_characteristics(&model, &grid, NuPolicy::Auto(TruncationRule::default()))
                .unwrap();
        let phi: Vec<f64> = probes.iter().map(|&r| oc.arl_at(&model, r).unwrap()).collect();
        let delta: Vec<f64> =
            probes.iter().map(|&r| oc.delay_zero_at(&model, r).unwrap()).collect();
        (phi, delta)
    };

    let (phi_coarse, delta_coarse) = solve(96);
    let (phi_mid, delta_mid) = solve(160);
    let (phi_fine, delta_fine) = solve(256);

    let gap = |a: &[f64], b: &[f64]| -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
    };
    let coarse_step = gap(&phi_coarse, &phi_mid).max(gap(&delta_coarse, &delta_mid));
    let fine_step = gap(&phi_mid, &phi_fine).max(gap(&delta_mid, &delta_fine));
    assert!(
        fine_step <= coarse_step.max(1e-12),
        "refinement must not drift: coarse step {coarse_step:e}, fine step {fine_step:e}"
    );
    assert!(fine_step <= 1e-7, "solutions still moving at 256 nodes: {fine_step:e}");
}

#[test]
fn gaussian_quadrature_schemes_agree_on_the_same_problem() {
    let model = GaussianMeanShiftModel::new(1.0).unwrap();
    let threshold = 2.0;
    let gauss = gl_grid(192, threshold);
    let trapezoid = Arc::new(QuadratureGrid::new(Scheme::Trapezoid, 1201, threshold).unwrap());
    let oc_gauss =
        operating_characteristics(&model, &gauss, NuPolicy::Auto(TruncationRule::default()))
            .unwrap();
    let trap_arl = srdetect::fredholm::arl_false_alarm(&model, &trapezoid).unwrap();
    for (k, &r) in trapezoid.nodes().iter().enumerate().step_by(120) {
        if r >= threshold {
            continue;
        }
        let g = oc_gauss.arl_at(&model, r).unwrap();
        let t = trap_arl.function.values()[k];
        assert!(
            (g - t).abs() <= 1e-5,
            "schemes disagree at state {r}: gauss {g} vs trapezoid {t}"
        );
    }
}
