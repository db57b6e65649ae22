//! Performance reports: supremum delays, the integral-delay lower bound,
//! and side-by-side procedure comparisons at a matched false-alarm level.

use crate::calibrate::{calibrate_equalizer, calibrate_threshold, GridSpec, Procedure};
use crate::error::{Error, Result};
use crate::exact_exp;
use crate::fredholm::{operating_characteristics, NuPolicy, OperatingCharacteristics, TruncationRule};
use crate::model::ChangeModel;
use crate::montecarlo::{estimate_cadd, McConfig, McEstimate};
use crate::procedures::HeadStart;
use crate::quasi_stationary::{solve_qsd, QuasiStationary};
use crate::scalar::{real, Real};

/// Change points per report when the profile is known to be flat.
const REPORT_CHANGE_POINTS: usize = 11;

/// How a report's numbers were produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    /// Closed forms for the exponential model.
    Analytic,
    /// Integral-equation solver.
    Nystrom,
    /// Monte Carlo simulation.
    MonteCarlo,
}

impl std::fmt::Display for Provenance {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            Provenance::Analytic => "analytic",
            Provenance::Nystrom => "nystrom",
            Provenance::MonteCarlo => "monte-carlo",
        };
        f.write_str(name)
    }
}

/// Operating characteristics of one procedure at one threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct PerformanceReport<T> {
    /// Short procedure label, `"sr-r"` or `"srp"`.
    pub procedure: String,
    /// Alarm threshold.
    pub threshold: T,
    /// Deterministic head start; `None` for the quasi-stationary start.
    pub head_start: Option<T>,
    /// How the numbers were produced.
    pub provenance: Provenance,
    /// Expected alarm time under no change.
    pub arl: T,
    /// Conditional average delays by change point, from zero up.
    pub cadd_by_nu: Vec<T>,
    /// Supremum of the conditional delays over change points.
    pub supremum_add: T,
    /// Best integral-delay lower bound at the matched false-alarm level.
    pub lower_bound: T,
}

/// Largest entry of a conditional-delay profile.
///
/// # Errors
///
/// Returns [`Error::InvalidInput`] when the profile is empty or contains a
/// non-finite entry.
pub fn sup_add<T: Real>(cadd_by_nu: &[T]) -> Result<T> {
    if cadd_by_nu.is_empty() {
        return Err(Error::invalid("conditional-delay profile is empty"));
    }
    let mut highest = T::neg_infinity();
    for &value in cadd_by_nu {
        if !value.is_finite() {
            return Err(Error::invalid(format!(
                "conditional-delay profile contains the non-finite entry {value}"
            )));
        }
        highest = highest.max(value);
    }
    Ok(highest)
}

/// Assembles the integral-delay lower bound with weight `r` from solver
/// outputs evaluated at the same state: `(r d0 + psi) / (r + phi)`.
///
/// # Errors
///
/// Returns [`Error::InvalidInput`] for a negative weight or non-finite
/// inputs.
pub fn integral_add_lower_bound<T: Real>(r: T, delta0_r: T, psi_r: T, phi_r: T) -> Result<T> {
    if !r.is_finite() || r < T::zero() {
        return Err(Error::invalid(format!(
            "bound weight must be finite nonnegative, got {r}"
        )));
    }
    for (name, value) in [("delay", delta0_r), ("cumulative delay", psi_r), ("alarm time", phi_r)]
    {
        if !value.is_finite() {
            return Err(Error::invalid(format!("{name} input {value} is not finite")));
        }
    }
    if phi_r < T::one() {
        return Err(Error::invalid(format!(
            "alarm time input {phi_r} cannot be below 1"
        )));
    }
    Ok((r * delta0_r + psi_r) / (r + phi_r))
}

/// Conditional average delays of the quasi-stationary procedure by change
/// point: the ratios of eigen-density-averaged delays to
/// eigen-density-averaged survivals, on the shared grid.
///
/// # Errors
///
/// Returns [`Error::InvalidInput`] when the distribution's grid differs
/// from the solver's, and [`Error::Numeric`] when an averaged survival
/// falls below the solver's floor.
pub fn srp_cadd_by_nu<T: Real>(
    oc: &OperatingCharacteristics<T>,
    qsd: &QuasiStationary<T>,
) -> Result<Vec<T>> {
    if !oc.grid().same_rule(qsd.density().grid()) {
        return Err(Error::invalid(
            "quasi-stationary density and solver tables live on different grids",
        ));
    }
    let average = |values: &[T]| -> Result<T> {
        let weighted: Vec<T> = values
            .iter()
            .zip(qsd.density().values())
            .map(|(&v, &q)| v * q)
            .collect();
        oc.grid().integrate(&weighted)
    };
    let floor = real::<T>(crate::fredholm::SURVIVAL_FLOOR);
    let sequences = oc.sequences();
    let mut profile = Vec::with_capacity(sequences.len());
    for v in 0..sequences.len() {
        let delay = average(sequences.delay(v).expect("v in range").values())?;
        let survival = average(sequences.survival(v).expect("v in range").values())?;
        if survival < floor {
            return Err(Error::numeric(format!(
                "averaged survival {survival:e} past change point {v} is below the floor"
            )));
        }
        profile.push(delay / survival);
    }
    Ok(profile)
}

/// Closed-form comparison of the two randomized-start procedures at the
/// false-alarm level `gamma` for the exponential model with doubled rate:
/// returns the quasi-stationary report and the equalized fixed-start
/// report, in that order.
///
/// # Errors
///
/// Returns [`Error::InvalidInput`] when `gamma` is outside the closed
/// forms' range.
pub fn compare_analytic<T: Real>(gamma: T) -> Result<(PerformanceReport<T>, PerformanceReport<T>)> {
    let gap = exact_exp::suboptimality_gap(gamma)?;
    let lower_bound = exact_exp::integral_add_bound(gap.srr_head_start, gap.srr_threshold)?;
    let srp = PerformanceReport {
        procedure: "srp".to_string(),
        threshold: gap.srp_threshold,
        head_start: None,
        provenance: Provenance::Analytic,
        arl: gamma,
        cadd_by_nu: vec![gap.srp_supremum_add; REPORT_CHANGE_POINTS],
        supremum_add: gap.srp_supremum_add,
        lower_bound,
    };
    let srr = PerformanceReport {
        procedure: "sr-r".to_string(),
        threshold: gap.srr_threshold,
        head_start: Some(gap.srr_head_start),
        provenance: Provenance::Analytic,
        arl: gamma,
        cadd_by_nu: vec![gap.srr_supremum_add; REPORT_CHANGE_POINTS],
        supremum_add: gap.srr_supremum_add,
        lower_bound,
    };
    Ok((srp, srr))
}

/// Solver-based comparison of the two randomized-start procedures at the
/// false-alarm level `gamma`, for any model: calibrates each threshold,
/// equalizes the fixed start, and reads every measure off the
/// integral-equation tables. Returns the quasi-stationary report and the
/// equalized fixed-start report, in that order.
///
/// # Errors
///
/// Propagates calibration and solver errors.
pub fn compare_nystrom<T: Real>(
    model: &dyn ChangeModel<T>,
    gamma: T,
    spec: &GridSpec,
    tol: T,
) -> Result<(PerformanceReport<T>, PerformanceReport<T>)> {
    let b = calibrate_threshold(model, Procedure::Srp, gamma, spec, tol)?;
    let srp_grid = spec.build(b)?;
    let srp_oc =
        operating_characteristics(model, &srp_grid, NuPolicy::Auto(TruncationRule::default()))?;
    let qsd = solve_qsd(model, &srp_grid)?;
    let srp_profile = srp_cadd_by_nu(&srp_oc, &qsd)?;
    let srp_sup = sup_add(&srp_profile)?;

    let (a, search) = calibrate_equalizer(model, gamma, spec, tol)?;
    let srr_grid = spec.build(a)?;
    let srr_oc =
        operating_characteristics(model, &srr_grid, NuPolicy::Auto(TruncationRule::default()))?;
    let srr_profile = srr_oc.cadd_profile_at(model, search.head_start)?;
    let srr_sup = sup_add(&srr_profile)?;
    let lower_bound = srr_oc.lower_bound_at(model, search.head_start)?;

    let srp = PerformanceReport {
        procedure: "srp".to_string(),
        threshold: b,
        head_start: None,
        provenance: Provenance::Nystrom,
        arl: gamma,
        cadd_by_nu: srp_profile,
        supremum_add: srp_sup,
        lower_bound,
    };
    let srr = PerformanceReport {
        procedure: "sr-r".to_string(),
        threshold: a,
        head_start: Some(search.head_start),
        provenance: Provenance::Nystrom,
        arl: gamma,
        cadd_by_nu: srr_profile,
        supremum_add: srr_sup,
        lower_bound,
    };
    Ok((srp, srr))
}

/// One matched-level point of the delay-versus-false-alarm comparison.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Figure1Row<T> {
    /// Shared expected alarm time under no change.
    pub arl: T,
    /// Equalized fixed-start threshold at this level.
    pub srr_threshold: T,
    /// Equalizing head start at this level.
    pub srr_head_start: T,
    /// Supremum delay of the equalized fixed-start procedure.
    pub srr_supremum_add: T,
    /// Quasi-stationary threshold at this level.
    pub srp_threshold: T,
    /// Supremum delay of the quasi-stationary procedure.
    pub srp_supremum_add: T,
}

/// Tabulates the closed-form supremum delays of both procedures across
/// the attainable false-alarm range for the doubled-rate exponential
/// model, on a cell-centered level grid of the requested size.
///
/// # Errors
///
/// Returns [`Error::InvalidInput`] when fewer than two points are
/// requested.
pub fn figure1_curve<T: Real>(points: usize) -> Result<Vec<Figure1Row<T>>> {
    if points < 2 {
        return Err(Error::invalid(format!(
            "the comparison curve needs at least 2 points, got {points}"
        )));
    }
    let upper = exact_exp::gamma_upper_limit::<T>();
    let width = (upper - T::one()) / real::<T>(points as f64);
    let mut rows = Vec::with_capacity(points);
    for k in 0..points {
        let gamma = T::one() + width * (real::<T>(k as f64) + real::<T>(0.5));
        let gap = exact_exp::suboptimality_gap(gamma)?;
        rows.push(Figure1Row {
            arl: gamma,
            srr_threshold: gap.srr_threshold,
            srr_head_start: gap.srr_head_start,
            srr_supremum_add: gap.srr_supremum_add,
            srp_threshold: gap.srp_threshold,
            srp_supremum_add: gap.srp_supremum_add,
        });
    }
    Ok(rows)
}

/// A simulated supremum delay: the largest conditional-delay estimate over
/// a range of change points.
#[derive(Debug, Clone, PartialEq)]
pub struct McSupremumAdd<T> {
    /// Largest conditional-delay estimate.
    pub supremum: T,
    /// Standard error of the estimate at the attaining change point.
    pub std_error: T,
    /// Change point attaining the largest estimate.
    pub at_change_point: u64,
    /// The per-change-point estimates, from change point zero up.
    pub estimates: Vec<McEstimate<T>>,
}

/// Estimates the supremum delay by simulating the conditional delay at
/// every change point up to `v_max` and taking the largest estimate. Each
/// change point uses an independently seeded family of runs.
///
/// # Errors
///
/// Propagates simulation errors.
pub fn mc_supremum_add<T: Real>(
    model: &dyn ChangeModel<T>,
    head_start: &HeadStart<T>,
    threshold: T,
    v_max: u64,
    config: &McConfig,
) -> Result<McSupremumAdd<T>> {
    let mut estimates = Vec::with_capacity(v_max as usize + 1);
    for v in 0..=v_max {
        let per_point = McConfig { seed: config.seed.wrapping_add(v), ..*config };
        estimates.push(estimate_cadd(model, head_start, threshold, v, &per_point)?);
    }
    let mut best = 0usize;
    for (v, estimate) in estimates.iter().enumerate() {
        if estimate.mean > estimates[best].mean {
            best = v;
        }
    }
    Ok(McSupremumAdd {
        supremum: estimates[best].mean,
        std_error: estimates[best].std_error,
        at_change_point: best as u64,
        estimates,
    })
}
