//! Threshold calibration to a target false-alarm level and the equalizer
//! head-start search, for arbitrary models via the integral-equation
//! solver.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::fredholm::{
    arl_false_alarm, delay_at_change_zero, operating_characteristics, NuPolicy, TruncationRule,
    DEFAULT_NODES,
};
use crate::grid::{QuadratureGrid, Scheme};
use crate::model::ChangeModel;
use crate::quasi_stationary::solve_qsd;
use crate::roots::golden_section_min;
use crate::scalar::{real, Real};

/// Largest threshold the bracketing stage will consider.
pub const THRESHOLD_CAP: f64 = 1e9;

/// Default relative tolerance on the achieved false-alarm level.
pub const DEFAULT_CALIBRATION_TOL: f64 = 1e-9;

/// Bisection iteration budget.
const MAX_BISECTION_ITER: usize = 400;

/// Points in the initial equalizer scan.
const SCAN_POINTS: usize = 64;

/// Interior tolerance of the golden-section refinement, relative to the
/// threshold.
const EQUALIZER_X_TOL: f64 = 1e-12;

/// Quadrature recipe for the solves a calibration performs at varying
/// thresholds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridSpec {
    /// Number of quadrature nodes.
    pub nodes: usize,
    /// Quadrature scheme.
    pub scheme: Scheme,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self { nodes: DEFAULT_NODES, scheme: Scheme::GaussLegendre }
    }
}

impl GridSpec {
    /// Builds a grid on `[0, upper]` following the recipe.
    ///
    /// # Errors
    ///
    /// Returns [`Error::InvalidInput`] for an invalid node count or upper
    /// limit.
    pub fn build<T: Real>(&self, upper: T) -> Result<Arc<QuadratureGrid<T>>> {
        Ok(Arc::new(QuadratureGrid::new(self.scheme, self.nodes, upper)?))
    }
}

/// Which detection procedure a threshold is calibrated for.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Procedure<T> {
    /// Fixed deterministic head start.
    SrR {
        /// Starting value of the detection statistic.
        head_start: T,
    },
    /// Quasi-stationary randomized head start.
    Srp,
}

/// Expected alarm time of the fixed-start procedure under no change, by a
/// dedicated solve at the candidate threshold.
fn sr_arl<T: Real>(
    model: &dyn ChangeModel<T>,
    head_start: T,
    threshold: T,
    spec: &GridSpec,
) -> Result<T> {
    let grid = spec.build(threshold)?;
    let solution = arl_false_alarm(model, &grid)?;
    // Natural interpolant of the solved node values at the head start.
    let mut acc = T::one();
    let nodes = grid.nodes();
    let weights = grid.weights();
    let values = solution.function.values();
    for i in 0..grid.len() {
        acc += weights[i] * model.kernel_pre(nodes[i], head_start)? * values[i];
    }
    Ok(acc)
}

/// Expected alarm time of the quasi-stationary procedure under no change:
/// the eigen-density average of the fixed-start expectations, on one shared
/// grid.
fn srp_arl<T: Real>(model: &dyn ChangeModel<T>, threshold: T, spec: &GridSpec) -> Result<T> {
    let grid = spec.build(threshold)?;
    let qsd = solve_qsd(model, &grid)?;
    let phi = arl_false_alarm(model, &grid)?;
    let weighted: Vec<T> = phi
        .function
        .values()
        .iter()
        .zip(qsd.density().values())
        .map(|(&p, &q)| p * q)
        .collect();
    grid.integrate(&weighted)
}

/// Outcome of one false-alarm evaluation at a candidate threshold.
enum Level<T> {
    /// Finite value below, at, or above the target.
    Value(T),
    /// The solver gave up, which a diverging expected alarm time does to
    /// it; treated as lying above any finite target.
    Diverged,
}

fn classify<T: Real>(result: Result<T>) -> Result<Level<T>> {
    match result {
        Ok(value) => Ok(Level::Value(value)),
        Err(Error::Numeric(_)) => Ok(Level::Diverged),
        Err(err) => Err(err),
    }
}

/// Monotone bisection of `eval` (the false-alarm level as a function of
/// the threshold) to the target `gamma`, with thresholds confined to
/// `(floor, cap]`.
fn bisect_threshold<T: Real>(
    eval: impl Fn(T) -> Result<T>,
    floor: T,
    gamma: T,
    tol: T,
) -> Result<T> {
    let tiny = real::<T>(1e-9);
    let cap = real::<T>(THRESHOLD_CAP);
    let mut lo = floor + tiny * (T::one() + floor);
    match classify(eval(lo))? {
        Level::Value(value) if value > gamma => {
            return Err(Error::invalid(format!(
                "target false-alarm level {gamma} is below the smallest attainable \
                 level {value}"
            )));
        }
        Level::Value(_) => {}
        Level::Diverged => {
            return Err(Error::numeric(format!(
                "false-alarm solve failed already at the smallest threshold {lo}"
            )));
        }
    }

    // Doubling gap above the floor until the target is bracketed, checking
    // that sampled levels do not decrease along the way.
    let mut gap = T::one();
    let mut hi;
    let mut last_seen: Option<(T, T)> = None;
    loop {
        hi = floor + gap;
        if hi > cap {
            return Err(Error::invalid(format!(
                "target false-alarm level {gamma} not attained below the threshold \
                 cap {cap}"
            )));
        }
        match classify(eval(hi))? {
            Level::Value(value) => {
                if let Some((prev_threshold, prev_value)) = last_seen {
                    if value < prev_value - tiny * (T::one() + prev_value.abs()) {
                        return Err(Error::numeric(format!(
                            "false-alarm level fell from {prev_value} at threshold \
                             {prev_threshold} to {value} at {hi}; expected it to grow \
                             with the threshold"
                        )));
                    }
                }
                if value >= gamma {
                    break;
                }
                last_seen = Some((hi, value));
                lo = hi;
            }
            Level::Diverged => break,
        }
        gap += gap;
    }

    let mut mid = (lo + hi) / real::<T>(2.0);
    for _ in 0..MAX_BISECTION_ITER {
        mid = (lo + hi) / real::<T>(2.0);
        match classify(eval(mid))? {
            Level::Value(value) => {
                if (value - gamma).abs() <= tol * gamma {
                    return Ok(mid);
                }
                if value < gamma {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            Level::Diverged => hi = mid,
        }
        if hi - lo <= T::epsilon() * (T::one() + mid.abs()) {
            break;
        }
    }
    Err(Error::numeric(format!(
        "threshold bisection stalled near {mid} without reaching the target \
         false-alarm level {gamma} to relative tolerance {tol}"
    )))
}

/// Calibrates the procedure's threshold so that its solver-computed
/// expected alarm time under no change equals `gamma` to the relative
/// tolerance `tol`.
///
/// # Errors
///
/// Returns [`Error::InvalidInput`] when `gamma` is not above 1, when the
/// tolerance or head start is invalid, or when the target is unattainable
/// below the threshold cap, and [`Error::Numeric`] when the level fails to
/// grow with the threshold or the bisection stalls.
pub fn calibrate_threshold<T: Real>(
    model: &dyn ChangeModel<T>,
    procedure: Procedure<T>,
    gamma: T,
    spec: &GridSpec,
    tol: T,
) -> Result<T> {
    if !gamma.is_finite() || gamma <= T::one() {
        return Err(Error::invalid(format!(
            "target false-alarm level must be a finite value above 1, got {gamma}"
        )));
    }
    if !tol.is_finite() || tol <= T::zero() {
        return Err(Error::invalid(format!("tolerance must be positive, got {tol}")));
    }
    match procedure {
        Procedure::SrR { head_start } => {
            if !head_start.is_finite() || head_start < T::zero() {
                return Err(Error::invalid(format!(
                    "head start must be finite nonnegative, got {head_start}"
                )));
            }
            bisect_threshold(|a| sr_arl(model, head_start, a, spec), head_start, gamma, tol)
        }
        Procedure::Srp => bisect_threshold(|b| srp_arl(model, b, spec), T::zero(), gamma, tol),
    }
}

/// Result of the equalizer head-start search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EqualizerSearch<T> {
    /// Head start minimizing the spread of the conditional delays.
    pub head_start: T,
    /// Achieved spread (largest minus smallest conditional delay).
    pub spread: T,
    /// Whether the initial scan saw a single descent-ascent pattern; when
    /// false, the refinement still ran around the best scanned point.
    pub unimodal: bool,
}

/// Searches for the head start that makes the fixed-start procedure an
/// equalizer at the given threshold: the minimizer of
/// `max_v cadd_v - min_v cadd_v` over the solver's truncated range of
/// change points. A 64-point scan brackets the minimum and golden-section
/// refines it; a scan profile with several local minima is reported via
/// [`EqualizerSearch::unimodal`] and refined around the best scanned point.
///
/// # Errors
///
/// Returns [`Error::InvalidInput`] for an invalid threshold or tolerance
/// and [`Error::Numeric`] on solver failures.
pub fn find_equalizer_headstart<T: Real>(
    model: &dyn ChangeModel<T>,
    threshold: T,
    spec: &GridSpec,
    tol: T,
) -> Result<EqualizerSearch<T>> {
    if !threshold.is_finite() || threshold <= T::zero() {
        return Err(Error::invalid(format!(
            "threshold must be finite positive, got {threshold}"
        )));
    }
    if !tol.is_finite() || tol <= T::zero() {
        return Err(Error::invalid(format!("tolerance must be positive, got {tol}")));
    }
    let grid = spec.build(threshold)?;
    let oc = operating_characteristics(model, &grid, NuPolicy::Auto(TruncationRule::default()))?;
    // Spread of the conditional delays over the tabulated change points,
    // cut at the first change point this head start cannot survive to.
    let spread = |r: T| -> Result<T> {
        let mut lowest = oc.cadd_at(model, r, 0)?;
        let mut highest = lowest;
        for v in 1..oc.sequences().len() {
            match oc.cadd_at(model, r, v) {
                Ok(value) => {
                    lowest = lowest.min(value);
                    highest = highest.max(value);
                }
                Err(Error::Numeric(_)) => break,
                Err(err) => return Err(err),
            }
        }
        Ok(highest - lowest)
    };

    // Scan head starts across [0, threshold), endpoints included up to a
    // relative margin below the threshold.
    let margin = T::one() - real::<T>(1e-9);
    let mut scan_r = Vec::with_capacity(SCAN_POINTS);
    let mut scan_s = Vec::with_capacity(SCAN_POINTS);
    for k in 0..SCAN_POINTS {
        let fraction = real::<T>(k as f64) / real::<T>((SCAN_POINTS - 1) as f64);
        let r = threshold * fraction * margin;
        scan_r.push(r);
        scan_s.push(spread(r)?);
    }
    let mut best = 0;
    for k in 1..SCAN_POINTS {
        if scan_s[k] < scan_s[best] {
            best = k;
        }
    }

    // A unimodal profile descends to its minimum and ascends after it, up
    // to numeric noise on flat stretches.
    let slack = real::<T>(1e-12) * (T::one() + scan_s[best].abs());
    let mut descents_after_ascent = 0;
    let mut ascending = false;
    for k in 1..SCAN_POINTS {
        if scan_s[k] > scan_s[k - 1] + slack {
            ascending = true;
        } else if scan_s[k] < scan_s[k - 1] - slack && ascending {
            descents_after_ascent += 1;
            ascending = false;
        }
    }
    let unimodal = descents_after_ascent == 0;

    let lo = if best == 0 { scan_r[0] } else { scan_r[best - 1] };
    let hi = if best == SCAN_POINTS - 1 { scan_r[best] } else { scan_r[best + 1] };
    let x_tol = tol.min(real::<T>(EQUALIZER_X_TOL) * threshold).max(T::epsilon() * threshold);
    let (head_start, achieved) = golden_section_min(spread, lo, hi, x_tol, 400)?;
    Ok(EqualizerSearch { head_start, spread: achieved, unimodal })
}

/// Jointly calibrates the equalizer: the threshold at which the
/// equalizing head start meets the target false-alarm level `gamma`.
///
/// # Errors
///
/// Propagates the errors of [`calibrate_threshold`] and
/// [`find_equalizer_headstart`].
pub fn calibrate_equalizer<T: Real>(
    model: &dyn ChangeModel<T>,
    gamma: T,
    spec: &GridSpec,
    tol: T,
) -> Result<(T, EqualizerSearch<T>)> {
    if !gamma.is_finite() || gamma <= T::one() {
        return Err(Error::invalid(format!(
            "target false-alarm level must be a finite value above 1, got {gamma}"
        )));
    }
    if !tol.is_finite() || tol <= T::zero() {
        return Err(Error::invalid(format!("tolerance must be positive, got {tol}")));
    }
    let eval = |a: T| -> Result<T> {
        let search = find_equalizer_headstart(model, a, spec, tol)?;
        sr_arl(model, search.head_start, a, spec)
    };
    let threshold = bisect_threshold(eval, T::zero(), gamma, tol)?;
    let search = find_equalizer_headstart(model, threshold, spec, tol)?;
    Ok((threshold, search))
}

/// Quasi-stationary averages of the false-alarm and immediate-delay
/// expectations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SrpCharacteristics<T> {
    /// Expected alarm time under no change.
    pub arl: T,
    /// Expected detection delay under a change in effect from the start.
    pub average_delay: T,
}

/// Computes the quasi-stationary procedure's operating characteristics at
/// a fixed threshold: the eigen-density averages of the fixed-start
/// expectations, everything on one shared grid.
///
/// # Errors
///
/// Returns [`Error::InvalidInput`] for an invalid threshold and
/// [`Error::Numeric`] on solver failures.
pub fn srp_characteristics<T: Real>(
    model: &dyn ChangeModel<T>,
    threshold: T,
    spec: &GridSpec,
) -> Result<SrpCharacteristics<T>> {
    if !threshold.is_finite() || threshold <= T::zero() {
        return Err(Error::invalid(format!(
            "threshold must be finite positive, got {threshold}"
        )));
    }
    let grid = spec.build(threshold)?;
    let qsd = solve_qsd(model, &grid)?;
    let phi = arl_false_alarm(model, &grid)?;
    let delta0 = delay_at_change_zero(model, &grid)?;
    let average = |values: &[T]| -> Result<T> {
        let weighted: Vec<T> = values
            .iter()
            .zip(qsd.density().values())
            .map(|(&v, &q)| v * q)
            .collect();
        grid.integrate(&weighted)
    };
    Ok(SrpCharacteristics {
        arl: average(phi.function.values())?,
        average_delay: average(delta0.function.values())?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact_exp;
    use crate::model::{ExponentialModel, GaussianMeanShiftModel};
    use crate::montecarlo::{estimate_arl, McConfig};
    use crate::procedures::HeadStart;

    fn doubled_rate() -> ExponentialModel<f64> {
        ExponentialModel::new(2.0).unwrap()
    }

    fn fast_spec() -> GridSpec {
        GridSpec { nodes: 64, scheme: Scheme::GaussLegendre }
    }

    #[test]
    fn fixed_start_threshold_matches_the_closed_form() {
        let model = doubled_rate();
        let a = calibrate_threshold(
            &model,
            Procedure::SrR { head_start: 0.0 },
            2.0,
            &fast_spec(),
            1e-12,
        )
        .unwrap();
        let exact = 1.207_940_031_569_323;
        assert!(
            (a - exact).abs() <= 1e-9,
            "calibrated threshold {a} vs closed form {exact}"
        );
    }

    #[test]
    fn quasi_stationary_threshold_matches_the_closed_form() {
        let model = doubled_rate();
        let b = calibrate_threshold(&model, Procedure::Srp, 2.0, &fast_spec(), 1e-12).unwrap();
        let exact = std::f64::consts::E - 1.0;
        assert!(
            (b - exact).abs() <= 1e-9,
            "calibrated threshold {b} vs closed form {exact}"
        );
    }

    #[test]
    fn calibrated_thresholds_increase_with_the_target_level() {
        let model = doubled_rate();
        let spec = fast_spec();
        let mut previous = 0.0;
        for gamma in [1.25, 1.5, 2.0, 2.1] {
            let a = calibrate_threshold(
                &model,
                Procedure::SrR { head_start: 0.0 },
                gamma,
                &spec,
                1e-10,
            )
            .unwrap();
            assert!(
                a > previous,
                "threshold {a} at level {gamma} not above {previous}"
            );
            previous = a;
        }
    }

    #[test]
    fn tiny_excess_level_gives_a_tiny_threshold() {
        let model = doubled_rate();
        let a = calibrate_threshold(
            &model,
            Procedure::SrR { head_start: 0.0 },
            1.000_001,
            &fast_spec(),
            1e-9,
        )
        .unwrap();
        assert!(a < 1e-4, "threshold {a} should collapse with the excess level");
    }

    #[test]
    fn equalizer_search_matches_the_closed_form_across_thresholds() {
        let model = doubled_rate();
        let spec = fast_spec();
        for a in [0.5, 1.0, 1.5, 1.664_845_645_920_049_7] {
            let search = find_equalizer_headstart(&model, a, &spec, 1e-10).unwrap();
            let exact = exact_exp::equalizer_head_start(a).unwrap();
            assert!(
                (search.head_start - exact).abs() <= 1e-6,
                "equalizer at threshold {a}: {} vs closed form {exact}",
                search.head_start
            );
            assert!(search.spread <= 1e-8, "achieved spread {}", search.spread);
            assert!(search.unimodal, "spread profile at threshold {a} looked multimodal");
        }
    }

    #[test]
    fn equalizer_head_start_vanishes_with_the_threshold() {
        let model = doubled_rate();
        let search = find_equalizer_headstart(&model, 0.01, &fast_spec(), 1e-10).unwrap();
        let exact = exact_exp::equalizer_head_start(0.01).unwrap();
        assert!(search.head_start < 0.01);
        assert!(
            (search.head_start - exact).abs() <= 1e-6,
            "tiny-threshold equalizer {} vs closed form {exact}",
            search.head_start
        );
    }

    #[test]
    fn joint_equalizer_calibration_matches_the_closed_forms() {
        let model = doubled_rate();
        let (a, search) = calibrate_equalizer(&model, 2.0, &fast_spec(), 1e-10).unwrap();
        let exact_a = 1.664_845_645_920_049_7;
        let exact_r = 0.632_435_495_178_921_2;
        assert!(
            (a - exact_a).abs() <= 1e-6,
            "equalizer threshold {a} vs closed form {exact_a}"
        );
        assert!(
            (search.head_start - exact_r).abs() <= 1e-6,
            "equalizer head start {} vs closed form {exact_r}",
            search.head_start
        );
    }

    #[test]
    fn quasi_stationary_characteristics_match_the_closed_forms() {
        let model = doubled_rate();
        let spec = fast_spec();
        let at_paper_level = srp_characteristics(&model, std::f64::consts::E - 1.0, &spec).unwrap();
        assert!(
            (at_paper_level.arl - 2.0).abs() <= 1e-10,
            "averaged alarm time {}",
            at_paper_level.arl
        );
        let exact_delay = exact_exp::sr_average_delay(std::f64::consts::E - 1.0).unwrap();
        assert!(
            (at_paper_level.average_delay - exact_delay).abs() <= 1e-10,
            "averaged delay {} vs {exact_delay}",
            at_paper_level.average_delay
        );

        let at_unit = srp_characteristics(&model, 1.0, &spec).unwrap();
        let exact_arl = exact_exp::srp_arl(1.0).unwrap();
        let exact_add = exact_exp::sr_average_delay(1.0).unwrap();
        assert!((at_unit.arl - exact_arl).abs() <= 1e-8);
        assert!((at_unit.average_delay - exact_add).abs() <= 1e-8);
    }

    #[test]
    fn quasi_stationary_characteristics_collapse_with_the_threshold() {
        let model = doubled_rate();
        let small = srp_characteristics(&model, 1e-4, &fast_spec()).unwrap();
        assert!((small.arl - 1.0).abs() <= 1e-3, "alarm time {} should be near 1", small.arl);
        assert!(
            (small.average_delay - 1.0).abs() <= 1e-3,
            "delay {} should be near 1",
            small.average_delay
        );
    }

    #[test]
    fn gaussian_calibration_is_confirmed_by_simulation() {
        let model = GaussianMeanShiftModel::new(1.0f64).unwrap();
        let spec = GridSpec { nodes: 128, scheme: Scheme::GaussLegendre };
        let a = calibrate_threshold(
            &model,
            Procedure::SrR { head_start: 0.0 },
            5.0,
            &spec,
            1e-9,
        )
        .unwrap();
        let config = McConfig { runs: 40_000, seed: 5, step_cap: 1_000_000 };
        let est = estimate_arl(&model, &HeadStart::classical(), a, &config).unwrap();
        let allowance = 4.0 * est.std_error;
        assert!(
            (est.mean - 5.0).abs() <= allowance,
            "simulated alarm time {} vs calibrated target 5.0, allowance {allowance}",
            est.mean
        );
    }

    #[test]
    fn unattainable_and_invalid_targets_are_rejected() {
        let model = doubled_rate();
        let spec = fast_spec();
        assert!(calibrate_threshold(
            &model,
            Procedure::SrR { head_start: 0.0 },
            1.0,
            &spec,
            1e-9
        )
        .is_err());
        assert!(calibrate_threshold(
            &model,
            Procedure::SrR { head_start: -0.5 },
            2.0,
            &spec,
            1e-9
        )
        .is_err());
        assert!(calibrate_threshold(
            &model,
            Procedure::SrR { head_start: 0.0 },
            2.0,
            &spec,
            0.0
        )
        .is_err());
        assert!(find_equalizer_headstart(&model, 0.0, &spec, 1e-9).is_err());
        assert!(srp_characteristics(&model, -1.0, &spec).is_err());
    }

    #[test]
    fn large_head_starts_make_small_targets_unattainable() {
        let model = doubled_rate();
        let err = calibrate_threshold(
            &model,
            Procedure::SrR { head_start: 5.0 },
            1.000_000_1,
            &fast_spec(),
            1e-9,
        )
        .unwrap_err();
        let text = err.to_string();
        assert!(
            text.contains("smallest attainable"),
            "unexpected error text: {text}"
        );
    }
}
