//! The detection procedures themselves: the shared statistic recursion,
//! head-start rules, and single-run simulation.
//!
//! All members of the family update `R_n = (1 + R_{n-1}) * lr(X_n)` and
//! alarm the first time `R_n` reaches the threshold. The classical rule
//! starts at zero, the head-started rule at a deterministic `r`, and the
//! quasi-stationary rule at a draw from the statistic's quasi-stationary
//! law below the threshold.

use std::sync::Arc;

use rand::RngCore;

use crate::error::{Error, Result};
use crate::model::{ChangeModel, Hypothesis};
use crate::quasi_stationary::QuasiStationary;
use crate::scalar::Real;

/// When the observations switch from the pre-change to the post-change law.
///
/// `At(v)` means observations `1..=v` are pre-change and observations from
/// `v + 1` on are post-change, so `At(0)` puts the change in effect from
/// the very first observation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChangePoint {
    /// The change takes effect after this many observations.
    At(u64),
    /// No change ever occurs.
    Never,
}

impl ChangePoint {
    /// Regime of observation number `n` (1-based).
    pub fn regime(self, n: u64) -> Hypothesis {
        match self {
            ChangePoint::At(v) if n > v => Hypothesis::PostChange,
            _ => Hypothesis::PreChange,
        }
    }
}

/// How the statistic is initialized.
#[derive(Debug, Clone)]
pub enum HeadStart<T> {
    /// Deterministic initial value in `[0, threshold)`.
    Deterministic(T),
    /// Initial value drawn once per run from the quasi-stationary law.
    QuasiStationary(Arc<QuasiStationary<T>>),
}

impl<T: Real> HeadStart<T> {
    /// The classical rule's zero start.
    pub fn classical() -> Self {
        HeadStart::Deterministic(T::zero())
    }

    /// Draws the initial statistic value.
    pub fn draw(&self, rng: &mut dyn RngCore) -> T {
        match self {
            HeadStart::Deterministic(r) => *r,
            HeadStart::QuasiStationary(qsd) => qsd.sample(rng),
        }
    }

    /// Validates the rule against an alarm threshold.
    fn check_against(&self, threshold: T) -> Result<()> {
        match self {
            HeadStart::Deterministic(r) => {
                if !r.is_finite() || *r < T::zero() || *r >= threshold {
                    return Err(Error::invalid(format!(
                        "head start must lie in [0, threshold), got {r} with threshold {threshold}"
                    )));
                }
            }
            HeadStart::QuasiStationary(qsd) => {
                if qsd.threshold() > threshold {
                    return Err(Error::invalid(format!(
                        "quasi-stationary law solved at threshold {} cannot start a run with \
                         threshold {threshold}",
                        qsd.threshold()
                    )));
                }
            }
        }
        Ok(())
    }
}

/// A running detector: the current statistic, its alarm threshold, and the
/// number of observations consumed.
#[derive(Debug, Clone)]
pub struct Detector<T> {
    statistic: T,
    threshold: T,
    steps: u64,
    stopped: bool,
}

impl<T: Real> Detector<T> {
    /// Initializes a detector, drawing the head start if it is random.
    ///
    /// # Errors
    ///
    /// Returns [`Error::InvalidInput`] for a nonpositive or non-finite
    /// threshold, or a head start incompatible with it.
    pub fn new(head_start: &HeadStart<T>, threshold: T, rng: &mut dyn RngCore) -> Result<Self> {
        if !threshold.is_finite() || threshold <= T::zero() {
            return Err(Error::invalid(format!(
                "alarm threshold must be finite positive, got {threshold}"
            )));
        }
        head_start.check_against(threshold)?;
        Ok(Self { statistic: head_start.draw(rng), threshold, steps: 0, stopped: false })
    }

    /// Current statistic value.
    pub fn statistic(&self) -> T {
        self.statistic
    }

    /// Alarm threshold.
    pub fn threshold(&self) -> T {
        self.threshold
    }

    /// Observations consumed so far.
    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// Whether the alarm has been raised.
    pub fn is_stopped(&self) -> bool {
        self.stopped
    }

    /// Consumes one observation and reports whether the alarm fired.
    ///
    /// An overflowing statistic compares above any finite threshold, so the
    /// alarm decision stays exact even if the recursion saturates.
    ///
    /// # Errors
    ///
    /// Returns [`Error::InvalidInput`] if the detector already stopped or
    /// the observation is outside the model's support.
    pub fn step(&mut self, observation: T, model: &dyn ChangeModel<T>) -> Result<bool> {
        if self.stopped {
            return Err(Error::invalid("detector has already raised its alarm"));
        }
        let lr = model.likelihood_ratio(observation)?;
        self.statistic = (T::one() + self.statistic) * lr;
        self.steps += 1;
        self.stopped = self.statistic >= self.threshold;
        Ok(self.stopped)
    }
}

/// Outcome of a single simulated run.
#[derive(Debug, Clone)]
pub struct RunOutcome<T> {
    /// Alarm time, or the step cap if the run was censored.
    pub stopping_time: u64,
    /// Whether the step cap cut the run off before an alarm.
    pub censored: bool,
    /// The change point the run was driven with.
    pub change_point: ChangePoint,
    /// Statistic trajectory `R_1, R_2, ...` when recording was requested.
    pub trajectory: Option<Vec<T>>,
}

/// Drives one run to its alarm (or to the step cap).
///
/// # Errors
///
/// Returns [`Error::InvalidInput`] for a zero step cap or an invalid
/// detector configuration.
pub fn run_to_alarm<T: Real>(
    model: &dyn ChangeModel<T>,
    head_start: &HeadStart<T>,
    threshold: T,
    change_point: ChangePoint,
    step_cap: u64,
    record_trajectory: bool,
    rng: &mut dyn RngCore,
) -> Result<RunOutcome<T>> {
    if step_cap == 0 {
        return Err(Error::invalid("step cap must be at least 1"));
    }
    let mut detector = Detector::new(head_start, threshold, rng)?;
    let mut trajectory = record_trajectory.then(Vec::new);
    loop {
        let n = detector.steps() + 1;
        let observation = model.sample(change_point.regime(n), rng);
        let stopped = detector.step(observation, model)?;
        if let Some(t) = trajectory.as_mut() {
            t.push(detector.statistic());
        }
        if stopped {
            return Ok(RunOutcome { stopping_time: n, censored: false, change_point, trajectory });
        }
        if n >= step_cap {
            return Ok(RunOutcome {
                stopping_time: step_cap,
                censored: true,
                change_point,
                trajectory,
            });
        }
    }
}
