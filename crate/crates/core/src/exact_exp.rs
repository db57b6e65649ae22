//! Closed-form operating characteristics for the exponential model with
//! unit pre-change rate and doubled post-change rate, valid for thresholds
//! in `(0, 2)`.
//!
//! In that window the likelihood ratio is `2 exp(-x)` with a uniform
//! pre-change law on `(0, 2]`, so the statistic's pre-change transition
//! kernel is constant in its first argument. Every integral equation then
//! collapses to elementary functions, the quasi-stationary density is
//! exactly uniform, and the conditional average detection delay of the
//! head-started procedure is the same for every change point at or past 1.
//! These formulas are the analytic yardstick against which the Nystrom
//! solver, the eigensolver, and the Monte Carlo harness are validated.

use crate::error::{Error, Result};
use crate::roots::find_root_bracketed;
use crate::scalar::{real, Real};

/// Validates a threshold for the closed forms, which require `(0, 2)`.
fn check_threshold<T: Real>(threshold: T) -> Result<()> {
    if !threshold.is_finite() || threshold <= T::zero() || threshold >= real::<T>(2.0) {
        return Err(Error::invalid(format!(
            "closed forms require a threshold in (0, 2), got {threshold}"
        )));
    }
    Ok(())
}

/// Validates a deterministic head start against its threshold.
fn check_head_start<T: Real>(head_start: T, threshold: T) -> Result<()> {
    if !head_start.is_finite() || head_start < T::zero() || head_start >= threshold {
        return Err(Error::invalid(format!(
            "head start must lie in [0, threshold), got {head_start} with threshold {threshold}"
        )));
    }
    Ok(())
}

/// Validates a false-alarm constraint level for the calibration formulas.
fn check_gamma<T: Real>(gamma: T) -> Result<()> {
    let limit = gamma_upper_limit::<T>();
    if !gamma.is_finite() || gamma <= T::one() || gamma >= limit {
        return Err(Error::invalid(format!(
            "false-alarm level must lie in (1, {limit}), got {gamma}"
        )));
    }
    Ok(())
}

/// Upper end of the false-alarm levels covered by the closed forms,
/// `1 / (1 - log(3)/2)`, where the calibrated thresholds reach 2.
pub fn gamma_upper_limit<T: Real>() -> T {
    let half = real::<T>(0.5);
    T::one() / (T::one() - half * real::<T>(3.0).ln())
}

/// Leading eigenvalue of the pre-change restriction of the statistic's
/// kernel to `[0, threshold]`: `log(1 + threshold) / 2`.
///
/// # Errors
///
/// Returns [`Error::InvalidInput`] when the threshold is outside `(0, 2)`.
pub fn qsd_lambda<T: Real>(threshold: T) -> Result<T> {
    check_threshold(threshold)?;
    Ok(real::<T>(0.5) * threshold.ln_1p())
}

/// Quasi-stationary density of the statistic below the threshold, which is
/// uniform: `1 / threshold` for states in `[0, threshold)`.
///
/// # Errors
///
/// Returns [`Error::InvalidInput`] when the threshold is outside `(0, 2)`
/// or the state is outside `[0, threshold)`.
pub fn qsd_density<T: Real>(state: T, threshold: T) -> Result<T> {
    check_threshold(threshold)?;
    if !state.is_finite() || state < T::zero() || state >= threshold {
        return Err(Error::invalid(format!(
            "state must lie in [0, threshold), got {state} with threshold {threshold}"
        )));
    }
    Ok(T::one() / threshold)
}

/// Expected time to a false alarm for the deterministic head start `r`:
/// `1 + (threshold / (2 (1 + r))) / (1 - lambda)` with
/// `lambda = log(1 + threshold) / 2`.
///
/// # Errors
///
/// Returns [`Error::InvalidInput`] on domain violations; see
/// [`check_threshold`] semantics.
pub fn sr_arl<T: Real>(head_start: T, threshold: T) -> Result<T> {
    check_threshold(threshold)?;
    check_head_start(head_start, threshold)?;
    let half = real::<T>(0.5);
    let lambda = half * threshold.ln_1p();
    Ok(T::one() + half * threshold / (T::one() + head_start) / (T::one() - lambda))
}

/// Expected detection delay when the change is in effect from the first
/// observation on, started from `r`:
/// `1 + (threshold^2 / (2 (1 + r)^2)) / d` with
/// `d = threshold / (1 + threshold) + 2 (1 - lambda)`.
///
/// # Errors
///
/// Returns [`Error::InvalidInput`] on domain violations.
pub fn sr_delay_at_zero<T: Real>(head_start: T, threshold: T) -> Result<T> {
    check_threshold(threshold)?;
    check_head_start(head_start, threshold)?;
    let scale = T::one() + head_start;
    Ok(T::one() + delay_numerator(threshold) / (scale * scale))
}

/// Expected detection delay from a change at time zero, averaged over the
/// quasi-stationary law of the head start. This also equals the conditional
/// average delay of the deterministic-start procedure for every change
/// point at or past 1.
///
/// # Errors
///
/// Returns [`Error::InvalidInput`] when the threshold is outside `(0, 2)`.
pub fn sr_average_delay<T: Real>(threshold: T) -> Result<T> {
    check_threshold(threshold)?;
    Ok(T::one() + delay_numerator(threshold) / (T::one() + threshold))
}

/// Shared factor `(threshold^2 / 2) / (threshold / (1 + threshold) +
/// 2 (1 - lambda))` of the delay formulas.
fn delay_numerator<T: Real>(threshold: T) -> T {
    let half = real::<T>(0.5);
    let lambda = half * threshold.ln_1p();
    let denom = threshold / (T::one() + threshold)
        + real::<T>(2.0) * (T::one() - lambda);
    half * threshold * threshold / denom
}

/// Sum over all change points of the expected residual delay mass,
/// `psi(r) = delta0(r) + dbar * (threshold / (2 (1 + r))) / (1 - lambda)`,
/// where `delta0` is [`sr_delay_at_zero`] and `dbar` is
/// [`sr_average_delay`].
///
/// # Errors
///
/// Returns [`Error::InvalidInput`] on domain violations.
pub fn sr_cumulative_delay<T: Real>(head_start: T, threshold: T) -> Result<T> {
    let half = real::<T>(0.5);
    let lambda = half * threshold.ln_1p();
    let geometric = half * threshold / (T::one() + head_start) / (T::one() - lambda);
    Ok(sr_delay_at_zero(head_start, threshold)? + sr_average_delay(threshold)? * geometric)
}

/// Lower bound on the supremum delay through the relative integral delay
/// measure weighted by `r`:
/// `(r * delta0(r) + psi(r)) / (r + arl(r))`.
///
/// # Errors
///
/// Returns [`Error::InvalidInput`] on domain violations.
pub fn integral_add_bound<T: Real>(head_start: T, threshold: T) -> Result<T> {
    let numerator = head_start * sr_delay_at_zero(head_start, threshold)?
        + sr_cumulative_delay(head_start, threshold)?;
    let denominator = head_start + sr_arl(head_start, threshold)?;
    Ok(numerator / denominator)
}

/// Supremum over change points of the conditional average detection delay
/// for the deterministic head start `r`: the larger of the delay from an
/// immediate change and the common delay from any later change point.
///
/// # Errors
///
/// Returns [`Error::InvalidInput`] on domain violations.
pub fn sr_supremum_add<T: Real>(head_start: T, threshold: T) -> Result<T> {
    Ok(sr_delay_at_zero(head_start, threshold)?.max(sr_average_delay(threshold)?))
}

/// Expected time to a false alarm for the quasi-stationary head start:
/// `1 / (1 - lambda)`.
///
/// # Errors
///
/// Returns [`Error::InvalidInput`] when the threshold is outside `(0, 2)`.
pub fn srp_arl<T: Real>(threshold: T) -> Result<T> {
    let lambda = qsd_lambda(threshold)?;
    Ok(T::one() / (T::one() - lambda))
}

/// Detection delay of the quasi-stationary head start, which is the same
/// for every change point: it equals [`sr_average_delay`] at the same
/// threshold.
///
/// # Errors
///
/// Returns [`Error::InvalidInput`] when the threshold is outside `(0, 2)`.
pub fn srp_delay<T: Real>(threshold: T) -> Result<T> {
    sr_average_delay(threshold)
}

/// Threshold at which the quasi-stationary head start meets the
/// false-alarm level `gamma`: `exp(2 (gamma - 1) / gamma) - 1`.
///
/// # Errors
///
/// Returns [`Error::InvalidInput`] when `gamma` is outside
/// `(1, gamma_upper_limit)`.
pub fn srp_threshold<T: Real>(gamma: T) -> Result<T> {
    check_gamma(gamma)?;
    let exponent = real::<T>(2.0) * (gamma - T::one()) / gamma;
    Ok(exponent.exp_m1())
}

/// Threshold at which the equalizing deterministic head start meets the
/// false-alarm level `gamma`, found as the root in `(0, 2)` of
/// `a + (gamma - 1) sqrt(1 + a) (log(1 + a) - 2)`.
///
/// # Errors
///
/// Returns [`Error::InvalidInput`] when `gamma` is outside
/// `(1, gamma_upper_limit)` and [`Error::Numeric`] if the root search
/// fails.
pub fn srr_threshold<T: Real>(gamma: T) -> Result<T> {
    check_gamma(gamma)?;
    let two = real::<T>(2.0);
    let objective = |a: T| -> Result<T> {
        Ok(a + (gamma - T::one()) * (T::one() + a).sqrt() * (a.ln_1p() - two))
    };
    find_root_bracketed(
        objective,
        real::<T>(1e-12),
        two - real::<T>(1e-12),
        real::<T>(1e-15),
        real::<T>(1e-13),
        200,
    )
}

/// Head start that equalizes the delay over change points at the given
/// threshold: `sqrt(1 + threshold) - 1`.
///
/// # Errors
///
/// Returns [`Error::InvalidInput`] when the threshold is outside `(0, 2)`.
pub fn equalizer_head_start<T: Real>(threshold: T) -> Result<T> {
    check_threshold(threshold)?;
    Ok(threshold / ((T::one() + threshold).sqrt() + T::one()))
}

/// Margin `a / sqrt(1 + a) - log(1 + a)`, positive on all of `(0, 2)`.
///
/// Its positivity is what makes the quasi-stationary head start strictly
/// worse in supremum delay than the equalizing deterministic head start at
/// every shared false-alarm level covered by the closed forms.
///
/// # Errors
///
/// Returns [`Error::InvalidInput`] when the threshold is outside `(0, 2)`.
pub fn dominance_margin<T: Real>(threshold: T) -> Result<T> {
    check_threshold(threshold)?;
    Ok(threshold / (T::one() + threshold).sqrt() - threshold.ln_1p())
}

/// Both procedures calibrated to the same false-alarm level, with their
/// supremum delays and the (positive) gap between them.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SuboptimalityGap<T> {
    /// Shared expected time to a false alarm.
    pub gamma: T,
    /// Calibrated threshold of the quasi-stationary head start.
    pub srp_threshold: T,
    /// Supremum delay of the quasi-stationary head start, which is also
    /// its expected delay from an immediate change.
    pub srp_supremum_add: T,
    /// Calibrated threshold of the equalizing deterministic head start.
    pub srr_threshold: T,
    /// The equalizing head start at that threshold.
    pub srr_head_start: T,
    /// Supremum delay of the equalized deterministic head start.
    pub srr_supremum_add: T,
    /// `srp_supremum_add - srr_supremum_add`, strictly positive.
    pub gap: T,
}

/// Calibrates both head-start rules to the false-alarm level `gamma` and
/// reports their supremum delays side by side.
///
/// # Errors
///
/// Returns [`Error::InvalidInput`] when `gamma` is outside
/// `(1, gamma_upper_limit)` and [`Error::Numeric`] if the threshold
/// search fails.
pub fn suboptimality_gap<T: Real>(gamma: T) -> Result<SuboptimalityGap<T>> {
    let srp_b = srp_threshold(gamma)?;
    let srp_jp = srp_delay(srp_b)?;
    let srr_a = srr_threshold(gamma)?;
    let srr_r = equalizer_head_start(srr_a)?;
    let srr_jp = sr_supremum_add(srr_r, srr_a)?;
    Ok(SuboptimalityGap {
        gamma,
        srp_threshold: srp_b,
        srp_supremum_add: srp_jp,
        srr_threshold: srr_a,
        srr_head_start: srr_r,
        srr_supremum_add: srr_jp,
        gap: srp_jp - srr_jp,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn assert_close(actual: f64, expected: f64, tol: f64, what: &str) {
        let delta = (actual - expected).abs();
        assert!(
            delta <= tol,
            "{what}: expected {expected}, got {actual} (delta={delta:e}, tol={tol:e})"
        );
    }

    const A2: f64 = 1.664_845_645_920_049_7;
    const R2: f64 = 0.632_435_495_178_921_2;

    #[test]
    fn upper_false_alarm_limit_matches_reference() {
        assert_close(gamma_upper_limit::<f64>(), 2.218_801_049_600_288_4, 1e-15, "gamma limit");
    }

    #[test]
    fn eigenvalue_closed_form_matches_references() {
        assert_close(
            qsd_lambda(std::f64::consts::E - 1.0).unwrap(),
            0.5,
            1e-15,
            "lambda at e - 1",
        );
        assert_close(qsd_lambda(0.5f64).unwrap(), 0.202_732_554_054_082_2, 1e-15, "lambda at 0.5");
        assert_close(qsd_lambda(1.0f64).unwrap(), 0.346_573_590_279_972_65, 1e-15, "lambda at 1");
        assert_close(qsd_lambda(1.5f64).unwrap(), 0.458_145_365_937_077_5, 1e-15, "lambda at 1.5");
    }

    #[test]
    fn quasi_stationary_density_is_uniform() {
        let b = 1.2f64;
        for &x in &[0.0, 0.3, 0.9, 1.199] {
            assert_close(qsd_density(x, b).unwrap(), 1.0 / 1.2, 1e-15, "uniform density");
        }
        assert!(qsd_density(1.2, b).is_err());
        assert!(qsd_density(-0.1, b).is_err());
    }

    #[test]
    fn false_alarm_times_match_references() {
        assert_close(
            srp_arl(std::f64::consts::E - 1.0).unwrap(),
            2.0,
            1e-14,
            "quasi-stationary start at e - 1",
        );
        assert_close(srp_arl(1.0f64).unwrap(), 1.530_394_219_034_502_3, 1e-15, "quasi-stationary start at 1");
        assert_close(sr_arl(0.0, A2).unwrap(), 2.632_435_495_178_921_2, 1e-12, "zero start");
        assert_close(sr_arl(R2, A2).unwrap(), 2.0, 1e-12, "equalizing start");
        assert_close(sr_arl(0.0, 1.0).unwrap(), 1.765_197_109_517_251_2, 1e-15, "zero start at 1");
    }

    #[test]
    fn delays_match_references() {
        assert_close(
            sr_delay_at_zero(0.0, A2).unwrap(),
            1.842_671_487_826_419_4,
            1e-12,
            "immediate-change delay from zero",
        );
        assert_close(
            sr_average_delay(A2).unwrap(),
            1.316_217_747_589_460_6,
            1e-12,
            "averaged delay",
        );
        assert_close(
            srp_delay(std::f64::consts::E - 1.0).unwrap(),
            1.332_745_416_309_831_8,
            1e-14,
            "quasi-stationary delay at e - 1",
        );
        assert_close(
            srp_delay(1.0f64).unwrap(),
            1.138_362_127_401_984_6,
            1e-15,
            "quasi-stationary delay at 1",
        );
        assert_close(
            sr_delay_at_zero(0.0, 1.0).unwrap(),
            1.276_724_254_803_969_3,
            1e-15,
            "immediate-change delay from zero at 1",
        );
    }

    #[test]
    fn cumulative_delay_matches_references() {
        assert_close(
            sr_cumulative_delay(0.0, A2).unwrap(),
            3.991_312_058_375_905,
            1e-12,
            "cumulative delay from zero",
        );
        assert_close(
            sr_cumulative_delay(R2, A2).unwrap(),
            2.632_435_495_178_921_2,
            1e-12,
            "cumulative delay from the equalizer",
        );
        assert_close(
            sr_cumulative_delay(0.0, 1.0).unwrap(),
            2.147_795_664_275_876_6,
            1e-14,
            "cumulative delay from zero at 1",
        );
    }

    #[test]
    fn integral_bound_is_attained_at_the_equalizer() {
        let bound = integral_add_bound(R2, A2).unwrap();
        let sup = sr_supremum_add(R2, A2).unwrap();
        assert_close(bound, sup, 1e-13, "bound attainment at the equalizer");
        assert_close(
            integral_add_bound(0.0, A2).unwrap(),
            1.516_205_075_370_564_2,
            1e-12,
            "bound at the zero start",
        );
    }

    #[test]
    fn calibrated_thresholds_match_references() {
        assert_close(
            srp_threshold(2.0f64).unwrap(),
            std::f64::consts::E - 1.0,
            1e-15,
            "quasi-stationary threshold at level 2",
        );
        assert_close(srr_threshold(2.0f64).unwrap(), A2, 5e-12, "equalized threshold at level 2");
        assert_close(equalizer_head_start(A2).unwrap(), R2, 1e-12, "equalizing head start");

        assert_close(
            srp_threshold(1.5f64).unwrap(),
            0.947_734_041_054_675_9,
            1e-15,
            "quasi-stationary threshold at level 1.5",
        );
        assert_close(
            srr_threshold(1.5f64).unwrap(),
            0.932_250_020_189_875_4,
            5e-12,
            "equalized threshold at level 1.5",
        );
        assert_close(
            srp_threshold(2.2f64).unwrap(),
            1.976_979_187_494_970_8,
            1e-14,
            "quasi-stationary threshold at level 2.2",
        );
        assert_close(
            srr_threshold(2.2f64).unwrap(),
            1.908_207_473_495_911_3,
            5e-12,
            "equalized threshold at level 2.2",
        );
        assert_close(
            srp_threshold(1.01f64).unwrap(),
            0.019_999_339_960_090_446,
            1e-16,
            "quasi-stationary threshold near level 1",
        );
        assert_close(
            srr_threshold(1.01f64).unwrap(),
            0.019_999_013_241_290_974,
            1e-13,
            "equalized threshold near level 1",
        );
    }

    #[test]
    fn calibration_and_evaluation_are_mutually_inverse() {
        let mut gamma = 1.05f64;
        while gamma < 2.2 {
            let b = srp_threshold(gamma).unwrap();
            assert_close(srp_arl(b).unwrap(), gamma, 1e-10, "quasi-stationary round trip");
            let a = srr_threshold(gamma).unwrap();
            let r = equalizer_head_start(a).unwrap();
            assert_close(sr_arl(r, a).unwrap(), gamma, 1e-10, "equalized round trip");
            gamma += 0.05;
        }
    }

    #[test]
    fn calibrated_thresholds_increase_with_the_false_alarm_level() {
        let mut prev_b = 0.0f64;
        let mut prev_a = 0.0f64;
        let mut gamma = 1.02f64;
        while gamma < 2.21 {
            let b = srp_threshold(gamma).unwrap();
            let a = srr_threshold(gamma).unwrap();
            assert!(b > prev_b, "threshold must grow: {b} after {prev_b} at level {gamma}");
            assert!(a > prev_a, "threshold must grow: {a} after {prev_a} at level {gamma}");
            prev_b = b;
            prev_a = a;
            gamma += 0.02;
        }
    }

    #[test]
    fn equalizer_balances_immediate_and_late_changes() {
        for &a in &[0.5f64, 1.0, 1.5] {
            let r = equalizer_head_start(a).unwrap();
            let immediate = sr_delay_at_zero(r, a).unwrap();
            let late = sr_average_delay(a).unwrap();
            assert_close(immediate, late, 1e-12, "equalizer balance");
        }
    }

    #[test]
    fn tiny_thresholds_give_almost_immediate_alarms() {
        let a = 1e-9f64;
        assert_close(sr_arl(0.0, a).unwrap(), 1.0, 1e-9, "vanishing threshold alarm time");
        assert_close(sr_delay_at_zero(0.0, a).unwrap(), 1.0, 1e-9, "vanishing threshold delay");
        assert_close(srp_arl(a).unwrap(), 1.0, 1e-9, "vanishing threshold quasi-stationary");
    }

    #[test]
    fn dominance_margin_is_positive_across_the_window() {
        for k in 1..200 {
            let a = 2.0 * f64::from(k) / 200.0;
            let margin = dominance_margin(a).unwrap();
            assert!(margin > 0.0, "margin must be positive at {a}, got {margin}");
        }
    }

    #[test]
    fn suboptimality_gap_at_level_two_matches_references() {
        let gap = suboptimality_gap(2.0f64).unwrap();
        assert_close(gap.srp_threshold, 1.718_281_828_459_045_2, 1e-14, "threshold");
        assert_close(gap.srp_supremum_add, 1.332_745_416_309_831_8, 1e-13, "srp supremum delay");
        assert_close(gap.srr_threshold, A2, 5e-12, "equalized threshold");
        assert_close(gap.srr_head_start, R2, 5e-12, "equalizing head start");
        assert_close(gap.srr_supremum_add, 1.316_217_747_589_460_6, 1e-12, "srr supremum delay");
        assert!(gap.gap > 0.016 && gap.gap < 0.017, "gap {} outside expected window", gap.gap);
    }

    #[test]
    fn suboptimality_gap_is_positive_across_levels() {
        for &gamma in &[1.05f64, 1.2, 1.5, 1.8, 2.0, 2.1, 2.2] {
            let gap = suboptimality_gap(gamma).unwrap();
            assert!(
                gap.gap > 0.0,
                "quasi-stationary start must lose at level {gamma}, gap {}",
                gap.gap
            );
        }
    }

    #[test]
    fn domains_are_enforced() {
        assert!(sr_arl(0.0, 2.0f64).is_err());
        assert!(sr_arl(0.0, 0.0f64).is_err());
        assert!(sr_arl(1.0, 0.5f64).is_err());
        assert!(sr_arl(-0.1, 1.0f64).is_err());
        assert!(srp_arl(2.0f64).is_err());
        assert!(srp_threshold(1.0f64).is_err());
        assert!(srp_threshold(2.3f64).is_err());
        assert!(srr_threshold(gamma_upper_limit::<f64>()).is_err());
        assert!(qsd_lambda(f64::NAN).is_err());
        assert!(dominance_margin(2.0f64).is_err());
    }

    #[test]
    fn reference_triple_of_zero_and_fixed_starts_calibrates_to_level_two() {
        assert_close(sr_arl(0.0, 1.207_940_031_569_323).unwrap(), 2.0, 1e-12, "zero start");
        assert_close(sr_arl(0.3, 1.440_262_630_400_343_9).unwrap(), 2.0, 1e-12, "start 0.3");
        assert_close(sr_arl(1.0, 1.882_608_661_305_167_8).unwrap(), 2.0, 1e-12, "start 1.0");
        assert_close(
            sr_delay_at_zero(0.0, 1.207_940_031_569_323).unwrap(),
            1.415_696_541_267_995,
            1e-12,
            "zero-start delay",
        );
        assert_close(
            sr_average_delay(1.207_940_031_569_323).unwrap(),
            1.188_273_474_516_666_6,
            1e-12,
            "zero-start averaged delay",
        );
        assert_close(
            sr_delay_at_zero(0.3, 1.440_262_630_400_343_9).unwrap(),
            1.361_412_205_734_690_5,
            1e-12,
            "start-0.3 delay",
        );
        assert_close(
            sr_delay_at_zero(1.0, 1.882_608_661_305_167_8).unwrap(),
            1.277_864_990_283_481_1,
            1e-12,
            "start-1.0 delay",
        );
        assert_close(
            sr_average_delay(1.882_608_661_305_167_8).unwrap(),
            1.385_574_350_085_621_8,
            1e-12,
            "start-1.0 averaged delay",
        );
    }
}
