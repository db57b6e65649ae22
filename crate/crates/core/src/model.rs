//! Observation models: densities, the likelihood ratio with its
//! distribution functions under both regimes, samplers, and the transition
//! kernels of the detection statistic.
//!
//! With `R_n = (1 + R_{n-1}) * lr(X_n)` and a continuous likelihood ratio,
//! the transition density of the statistic out of state `r` is obtained by
//! differentiating the likelihood-ratio CDF: `K(x, r) = d/dx F(x / (1+r))`,
//! with `F` taken under the pre-change or post-change regime. These two
//! kernels drive every integral-equation solver in the crate. Models with
//! closed-form kernels override the numeric default.

use rand::RngCore;

use crate::error::{Error, Result};
use crate::scalar::{real, Real};
use crate::special::normal_cdf;

/// Which regime an observation is drawn from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Hypothesis {
    /// The in-control regime, before the change point.
    PreChange,
    /// The out-of-control regime, after the change point.
    PostChange,
}

/// A pre-change/post-change observation model.
///
/// Implementations must describe a continuous likelihood ratio: both CDFs
/// returned by [`ChangeModel::lr_cdf_pre`] and [`ChangeModel::lr_cdf_post`]
/// have to be absolutely continuous with support `[0, lr_support_max]`.
pub trait ChangeModel<T: Real>: Send + Sync {
    /// Short stable identifier, e.g. for output headers.
    fn name(&self) -> &str;

    /// Pre-change observation density at `x`.
    fn pre_density(&self, x: T) -> T;

    /// Post-change observation density at `x`.
    fn post_density(&self, x: T) -> T;

    /// Likelihood ratio of post-change to pre-change density at `x`.
    ///
    /// # Errors
    ///
    /// Returns [`Error::InvalidInput`] when `x` lies outside the
    /// observation support.
    fn likelihood_ratio(&self, x: T) -> Result<T>;

    /// CDF of the likelihood ratio under the pre-change regime.
    fn lr_cdf_pre(&self, y: T) -> T;

    /// CDF of the likelihood ratio under the post-change regime.
    fn lr_cdf_post(&self, y: T) -> T;

    /// Upper end of the likelihood ratio's support (may be infinite).
    fn lr_support_max(&self) -> T;

    /// Draws one pre-change observation.
    fn sample_pre(&self, rng: &mut dyn RngCore) -> T;

    /// Draws one post-change observation.
    fn sample_post(&self, rng: &mut dyn RngCore) -> T;

    /// Pre-change transition kernel `K(x, r)` of the statistic: the density
    /// at `x` of `(1 + r) * lr(X)` with `X` drawn from the pre-change law.
    ///
    /// The default differentiates [`ChangeModel::lr_cdf_pre`] with a central
    /// difference, switching to a one-sided difference at the support edges.
    ///
    /// # Errors
    ///
    /// Returns [`Error::InvalidInput`] when `x` or `r` is negative or not
    /// finite.
    fn kernel_pre(&self, x: T, r: T) -> Result<T> {
        differenced_kernel(|y| self.lr_cdf_pre(y), self.lr_support_max(), x, r)
    }

    /// Post-change transition kernel of the statistic; see
    /// [`ChangeModel::kernel_pre`].
    ///
    /// # Errors
    ///
    /// Returns [`Error::InvalidInput`] when `x` or `r` is negative or not
    /// finite.
    fn kernel_post(&self, x: T, r: T) -> Result<T> {
        differenced_kernel(|y| self.lr_cdf_post(y), self.lr_support_max(), x, r)
    }

    /// Density of the observation under the given regime.
    fn density(&self, hypothesis: Hypothesis, x: T) -> T {
        match hypothesis {
            Hypothesis::PreChange => self.pre_density(x),
            Hypothesis::PostChange => self.post_density(x),
        }
    }

    /// Draws one observation under the given regime.
    fn sample(&self, hypothesis: Hypothesis, rng: &mut dyn RngCore) -> T {
        match hypothesis {
            Hypothesis::PreChange => self.sample_pre(rng),
            Hypothesis::PostChange => self.sample_post(rng),
        }
    }
}

/// Draws one observation from `model` under the given regime.
pub fn sample_observation<T: Real>(
    model: &dyn ChangeModel<T>,
    hypothesis: Hypothesis,
    rng: &mut dyn RngCore,
) -> T {
    model.sample(hypothesis, rng)
}

/// Relative step used by the finite-difference kernel fallback.
const KERNEL_STEP_SCALE: f64 = 1e-6;

/// Differentiates `cdf(x / (1 + r))` in `x` by a central difference,
/// degrading to a one-sided difference at the edges of the scaled support.
fn differenced_kernel<T: Real>(
    cdf: impl Fn(T) -> T,
    support_max: T,
    x: T,
    r: T,
) -> Result<T> {
    if !x.is_finite() || !r.is_finite() || x < T::zero() || r < T::zero() {
        return Err(Error::invalid(format!(
            "kernel arguments must be finite and nonnegative, got x={x}, r={r}"
        )));
    }
    let scale = T::one() + r;
    let h = real::<T>(KERNEL_STEP_SCALE) * (T::one() + x);
    let edge = support_max * scale;
    let (lo, hi) = if x < h {
        (x, x + h + h)
    } else if x + h > edge {
        (x - h - h, x)
    } else {
        (x - h, x + h)
    };
    let slope = (cdf(hi / scale) - cdf(lo / scale)) / (hi - lo);
    Ok(slope.max(T::zero()))
}

/// Exponential model: pre-change observations are exponential with unit
/// rate, post-change observations are exponential with rate `theta > 1`.
///
/// The likelihood ratio is `theta * exp(-(theta - 1) x)`, supported on
/// `(0, theta]`, with closed-form CDFs and transition kernels:
/// `F_pre(y) = (y / theta)^{1/(theta-1)}` and
/// `F_post(y) = (y / theta)^{theta/(theta-1)}` for `y` in `[0, theta]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExponentialModel<T> {
    theta: T,
}

impl<T: Real> ExponentialModel<T> {
    /// Builds the model with post-change rate `theta`.
    ///
    /// # Errors
    ///
    /// Returns [`Error::InvalidInput`] unless `theta` is finite and
    /// exceeds 1.
    pub fn new(theta: T) -> Result<Self> {
        if !theta.is_finite() || theta <= T::one() {
            return Err(Error::invalid(format!(
                "exponential model needs a finite post-change rate above 1, got {theta}"
            )));
        }
        Ok(Self { theta })
    }

    /// Post-change rate.
    pub fn theta(&self) -> T {
        self.theta
    }
}

impl<T: Real> ChangeModel<T> for ExponentialModel<T> {
    fn name(&self) -> &str {
        "exponential"
    }

    fn pre_density(&self, x: T) -> T {
        if x < T::zero() {
            T::zero()
        } else {
            (-x).exp()
        }
    }

    fn post_density(&self, x: T) -> T {
        if x < T::zero() {
            T::zero()
        } else {
            self.theta * (-self.theta * x).exp()
        }
    }

    fn likelihood_ratio(&self, x: T) -> Result<T> {
        if !(x >= T::zero()) || !x.is_finite() {
            return Err(Error::invalid(format!(
                "exponential observation must be finite and nonnegative, got {x}"
            )));
        }
        Ok(self.theta * (-(self.theta - T::one()) * x).exp())
    }

    fn lr_cdf_pre(&self, y: T) -> T {
        lr_power_cdf(y, self.theta, T::one() / (self.theta - T::one()))
    }

    fn lr_cdf_post(&self, y: T) -> T {
        lr_power_cdf(y, self.theta, self.theta / (self.theta - T::one()))
    }

    fn lr_support_max(&self) -> T {
        self.theta
    }

    fn sample_pre(&self, rng: &mut dyn RngCore) -> T {
        let u = T::sample_unit(rng);
        -(-u).ln_1p()
    }

    fn sample_post(&self, rng: &mut dyn RngCore) -> T {
        let u = T::sample_unit(rng);
        -(-u).ln_1p() / self.theta
    }

    fn kernel_pre(&self, x: T, r: T) -> Result<T> {
        self.power_kernel(x, r, (real::<T>(2.0) - self.theta) / (self.theta - T::one()), self.theta)
    }

    fn kernel_post(&self, x: T, r: T) -> Result<T> {
        self.power_kernel(x, r, T::one() / (self.theta - T::one()), T::one())
    }
}

impl<T: Real> ExponentialModel<T> {
    /// Shared closed form of both transition kernels:
    /// `(u / theta)^exponent / ((theta - 1) * extra * (1 + r))` with
    /// `u = x / (1 + r)`, zero once `u` leaves the support.
    fn power_kernel(&self, x: T, r: T, exponent: T, extra: T) -> Result<T> {
        if !x.is_finite() || !r.is_finite() || x < T::zero() || r < T::zero() {
            return Err(Error::invalid(format!(
                "kernel arguments must be finite and nonnegative, got x={x}, r={r}"
            )));
        }
        let scale = T::one() + r;
        let u = x / scale;
        if u >= self.theta {
            return Ok(T::zero());
        }
        Ok((u / self.theta).powf(exponent) / ((self.theta - T::one()) * extra * scale))
    }
}

/// Power-law CDF `(y / theta)^exponent` clamped to `[0, 1]`.
fn lr_power_cdf<T: Real>(y: T, theta: T, exponent: T) -> T {
    if y <= T::zero() {
        T::zero()
    } else if y >= theta {
        T::one()
    } else {
        (y / theta).powf(exponent)
    }
}

/// Gaussian mean-shift model: pre-change observations are standard normal,
/// post-change observations are normal with mean `mu > 0` and unit
/// variance.
///
/// The likelihood ratio is `exp(mu x - mu^2/2)`, log-normally distributed
/// under both regimes, so its CDFs are `Phi(ln(y)/mu + mu/2)` pre-change
/// and `Phi(ln(y)/mu - mu/2)` post-change with unbounded support. The
/// transition kernels use the numeric finite-difference default.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianMeanShiftModel<T> {
    mu: T,
}

impl<T: Real> GaussianMeanShiftModel<T> {
    /// Builds the model with post-change mean `mu`.
    ///
    /// # Errors
    ///
    /// Returns [`Error::InvalidInput`] unless `mu` is finite and positive.
    pub fn new(mu: T) -> Result<Self> {
        if !mu.is_finite() || mu <= T::zero() {
            return Err(Error::invalid(format!(
                "Gaussian mean-shift model needs a finite positive shift, got {mu}"
            )));
        }
        Ok(Self { mu })
    }

    /// Post-change mean.
    pub fn mu(&self) -> T {
        self.mu
    }
}

impl<T: Real> ChangeModel<T> for GaussianMeanShiftModel<T> {
    fn name(&self) -> &str {
        "gaussian"
    }

    fn pre_density(&self, x: T) -> T {
        standard_normal_density(x)
    }

    fn post_density(&self, x: T) -> T {
        standard_normal_density(x - self.mu)
    }

    fn likelihood_ratio(&self, x: T) -> Result<T> {
        if !x.is_finite() {
            return Err(Error::invalid(format!(
                "Gaussian observation must be finite, got {x}"
            )));
        }
        let half = real::<T>(0.5);
        Ok((self.mu * x - half * self.mu * self.mu).exp())
    }

    fn lr_cdf_pre(&self, y: T) -> T {
        let half = real::<T>(0.5);
        if y <= T::zero() {
            T::zero()
        } else {
            normal_cdf(y.ln() / self.mu + half * self.mu)
        }
    }

    fn lr_cdf_post(&self, y: T) -> T {
        let half = real::<T>(0.5);
        if y <= T::zero() {
            T::zero()
        } else {
            normal_cdf(y.ln() / self.mu - half * self.mu)
        }
    }

    fn lr_support_max(&self) -> T {
        T::infinity()
    }

    fn sample_pre(&self, rng: &mut dyn RngCore) -> T {
        T::sample_std_normal(rng)
    }

    fn sample_post(&self, rng: &mut dyn RngCore) -> T {
        T::sample_std_normal(rng) + self.mu
    }
}

fn standard_normal_density<T: Real>(x: T) -> T {
    let half = real::<T>(0.5);
    let two_pi = real::<T>(std::f64::consts::TAU);
    (-half * x * x).exp() / two_pi.sqrt()
}
