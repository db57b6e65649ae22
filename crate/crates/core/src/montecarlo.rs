//! Deterministic parallel Monte Carlo estimation of the procedures'
//! operating characteristics.
//!
//! Reproducibility contract: run `i` of a family draws from the
//! counter-based substream `i` of the base seed, runs are mapped over a
//! thread pool with their indices attached, results are collected back in
//! index order, and every reduction is sequential. Estimates are therefore
//! bitwise identical for a given seed regardless of thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::ChangeModel;
use crate::procedures::{run_to_alarm, ChangePoint, HeadStart};
use crate::scalar::{real, Real};
use crate::stats::summarize;

/// Default per-run step cap.
pub const DEFAULT_STEP_CAP: u64 = 10_000_000;

/// Censored fraction above which an estimate is flagged unreliable.
pub const CENSORING_RELIABILITY_LIMIT: f64 = 1e-3;

/// Tail probability past the change-point cutoff above which the integral
/// delay estimate refuses to report.
const TAIL_PROBABILITY_LIMIT: f64 = 1e-3;

/// Size, seeding, and censoring configuration of a Monte Carlo family.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct McConfig {
    /// Number of independent runs.
    pub runs: u64,
    /// Base seed; each run uses its own substream of it.
    pub seed: u64,
    /// Per-run step cap after which a run is censored.
    pub step_cap: u64,
}

impl Default for McConfig {
    fn default() -> Self {
        Self { runs: 100_000, seed: 1, step_cap: DEFAULT_STEP_CAP }
    }
}

impl McConfig {
    fn validate(&self) -> Result<()> {
        if self.runs == 0 {
            return Err(Error::invalid("Monte Carlo needs at least one run"));
        }
        if self.step_cap == 0 {
            return Err(Error::invalid("step cap must be at least 1"));
        }
        Ok(())
    }
}

/// A Monte Carlo estimate with its sampling diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate<T> {
    /// Point estimate.
    pub mean: T,
    /// Standard error of the point estimate.
    pub std_error: T,
    /// Number of runs that entered the estimate.
    pub n_runs: u64,
    /// Number of those runs that were cut off by the step cap.
    pub n_censored: u64,
    /// Number of runs discarded by conditioning before estimation.
    pub n_discarded: u64,
    /// Base seed of the substream family that produced the estimate.
    pub seed: u64,
}

impl<T: Real> McEstimate<T> {
    /// Fraction of contributing runs that hit the step cap.
    pub fn censored_fraction(&self) -> T {
        if self.n_runs == 0 {
            T::zero()
        } else {
            real::<T>(self.n_censored as f64) / real::<T>(self.n_runs as f64)
        }
    }

    /// False when censoring exceeded the reliability limit.
    pub fn is_reliable(&self) -> bool {
        self.censored_fraction() <= real::<T>(CENSORING_RELIABILITY_LIMIT)
    }
}

/// Substream `index` of the base seed.
fn substream_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Runs `f` over run indices in parallel and returns results in index
/// order.
fn parallel_runs<R: Send>(
    runs: u64,
    f: impl Fn(u64) -> Result<R> + Send + Sync,
) -> Result<Vec<R>> {
    (0..runs).into_par_iter().map(f).collect()
}

/// Simulates the full family of stopping times under one change point.
///
/// Returns `(stopping_time, censored)` per run, in run order. Run `i`
/// draws from substream `i` of `config.seed`.
///
/// # Errors
///
/// Returns [`Error::InvalidInput`] on configuration errors.
pub fn collect_stopping_times<T: Real>(
    model: &dyn ChangeModel<T>,
    head_start: &HeadStart<T>,
    threshold: T,
    change_point: ChangePoint,
    config: &McConfig,
) -> Result<Vec<(u64, bool)>> {
    config.validate()?;
    parallel_runs(config.runs, |i| {
        let mut rng = substream_rng(config.seed, i);
        let outcome = run_to_alarm(
            model,
            head_start,
            threshold,
            change_point,
            config.step_cap,
            false,
            &mut rng,
        )?;
        Ok((outcome.stopping_time, outcome.censored))
    })
}

/// Estimates the expected alarm time under no change.
///
/// Censored runs contribute the step cap itself, biasing the estimate low;
/// the censored count is reported so callers can check
/// [`McEstimate::is_reliable`].
///
/// # Errors
///
/// Returns [`Error::InvalidInput`] on configuration errors.
pub fn estimate_arl<T: Real>(
    model: &dyn ChangeModel<T>,
    head_start: &HeadStart<T>,
    threshold: T,
    config: &McConfig,
) -> Result<McEstimate<T>> {
    let times = collect_stopping_times(model, head_start, threshold, ChangePoint::Never, config)?;
    let n_censored = times.iter().filter(|(_, censored)| *censored).count() as u64;
    let summary = summarize(times.iter().map(|&(t, _)| real::<T>(t as f64)))?;
    Ok(McEstimate {
        mean: summary.mean,
        std_error: summary.std_error,
        n_runs: summary.n,
        n_censored,
        n_discarded: 0,
        seed: config.seed,
    })
}

/// Estimates the conditional average detection delay at change point `v`:
/// the mean of `T - v` over runs with `T > v`, with the change in effect
/// from observation `v + 1` on. Runs alarming at or before `v` are
/// discarded (conditioning by rejection).
///
/// # Errors
///
/// Returns [`Error::InvalidInput`] when the step cap does not exceed `v`
/// and [`Error::Numeric`] when no run survives past `v`.
pub fn estimate_cadd<T: Real>(
    model: &dyn ChangeModel<T>,
    head_start: &HeadStart<T>,
    threshold: T,
    v: u64,
    config: &McConfig,
) -> Result<McEstimate<T>> {
    config.validate()?;
    if config.step_cap <= v {
        return Err(Error::invalid(format!(
            "step cap {} must exceed the change point {v} for conditioning",
            config.step_cap
        )));
    }
    let times =
        collect_stopping_times(model, head_start, threshold, ChangePoint::At(v), config)?;
    let mut delays = Vec::new();
    let mut n_censored = 0u64;
    let mut n_discarded = 0u64;
    for &(t, censored) in &times {
        if t > v {
            if censored {
                n_censored += 1;
            }
            delays.push(real::<T>((t - v) as f64));
        } else {
            n_discarded += 1;
        }
    }
    if delays.is_empty() {
        return Err(Error::numeric(format!(
            "no run survived past change point {v}; conditioning impossible"
        )));
    }
    let summary = summarize(delays)?;
    Ok(McEstimate {
        mean: summary.mean,
        std_error: summary.std_error,
        n_runs: summary.n,
        n_censored,
        n_discarded,
        seed: config.seed,
    })
}

/// The integral-delay estimate together with its truncation diagnostic.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegralAddEstimate<T> {
    /// The weighted integral delay measure.
    pub estimate: McEstimate<T>,
    /// Estimated probability of surviving past the change-point cutoff.
    pub tail_probability: T,
}

/// Estimates the integral average detection delay with weight `weight` on
/// an immediate change:
/// the ratio of `weight * E(T) + sum over v of E(T - v)^+` (the sum cut at
/// `v_max`) to `weight + E(T)`, all expectations under no change except
/// that term `v` puts the change at `v`.
///
/// Each term of the sum and the denominator use their own block of
/// substreams, so the standard error combines independent pieces by the
/// delta method.
///
/// # Errors
///
/// Returns [`Error::InvalidInput`] for a negative or non-finite weight or
/// configuration errors, and [`Error::Numeric`] when the survival tail past
/// `v_max` is too heavy for the truncation to be trustworthy.
pub fn estimate_integral_add<T: Real>(
    model: &dyn ChangeModel<T>,
    head_start: &HeadStart<T>,
    threshold: T,
    weight: T,
    v_max: u64,
    config: &McConfig,
) -> Result<IntegralAddEstimate<T>> {
    config.validate()?;
    if !weight.is_finite() || weight < T::zero() {
        return Err(Error::invalid(format!(
            "integral delay weight must be finite nonnegative, got {weight}"
        )));
    }
    // Block b of substreams: indices b * runs .. (b + 1) * runs. Block 0
    // drives the no-change denominator; block v + 1 drives term v.
    let block = |b: u64| -> Result<Vec<(u64, bool)>> {
        let change_point = if b == 0 { ChangePoint::Never } else { ChangePoint::At(b - 1) };
        parallel_runs(config.runs, |i| {
            let mut rng = substream_rng(config.seed, b * config.runs + i);
            let outcome = run_to_alarm(
                model,
                head_start,
                threshold,
                change_point,
                config.step_cap,
                false,
                &mut rng,
            )?;
            Ok((outcome.stopping_time, outcome.censored))
        })
    };

    let mut n_censored = 0u64;
    let arl_times = block(0)?;
    n_censored += arl_times.iter().filter(|(_, c)| *c).count() as u64;
    let tail_count = arl_times.iter().filter(|&&(t, _)| t > v_max).count();
    let tail_probability = real::<T>(tail_count as f64) / real::<T>(config.runs as f64);
    if tail_probability > real::<T>(TAIL_PROBABILITY_LIMIT) {
        return Err(Error::numeric(format!(
            "survival past the cutoff {v_max} has estimated probability {tail_probability}; \
             raise the cutoff for a trustworthy truncation"
        )));
    }
    let arl = summarize(arl_times.iter().map(|&(t, _)| real::<T>(t as f64)))?;

    let mut numerator_mean = T::zero();
    let mut numerator_var = T::zero();
    for v in 0..=v_max {
        let times = block(v + 1)?;
        n_censored += times.iter().filter(|(_, c)| *c).count() as u64;
        let excess =
            summarize(times.iter().map(|&(t, _)| real::<T>(t.saturating_sub(v) as f64)))?;
        let coefficient = if v == 0 { weight + T::one() } else { T::one() };
        numerator_mean += coefficient * excess.mean;
        numerator_var += coefficient * coefficient * excess.std_error * excess.std_error;
    }

    let denominator = weight + arl.mean;
    let mean = numerator_mean / denominator;
    let denominator_var = arl.std_error * arl.std_error;
    let variance = numerator_var / (denominator * denominator)
        + numerator_mean * numerator_mean * denominator_var
            / (denominator * denominator * denominator * denominator);
    let estimate = McEstimate {
        mean,
        std_error: variance.sqrt(),
        n_runs: config.runs * (v_max + 2),
        n_censored,
        n_discarded: 0,
        seed: config.seed,
    };
    Ok(IntegralAddEstimate { estimate, tail_probability })
}
