//! Sample statistics used by the Monte Carlo harness and its validation
//! tests: running moments, the Kolmogorov-Smirnov distance, and a
//! chi-square goodness-of-fit test against a geometric law.

use crate::error::{Error, Result};
use crate::scalar::{real, Real};
use crate::special::chi_square_sf;

/// Moments of a sample, accumulated stably.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary<T> {
    /// Sample size.
    pub n: u64,
    /// Sample mean.
    pub mean: T,
    /// Unbiased sample variance (zero for a single observation).
    pub variance: T,
    /// Standard error of the mean.
    pub std_error: T,
}

/// Summarizes a sample with Welford's running-moment updates.
///
/// # Errors
///
/// Returns [`Error::InvalidInput`] for an empty sample or non-finite values.
pub fn summarize<T: Real>(values: impl IntoIterator<Item = T>) -> Result<Summary<T>> {
    let mut n = 0u64;
    let mut mean = T::zero();
    let mut m2 = T::zero();
    for x in values {
        if !x.is_finite() {
            return Err(Error::invalid(format!("sample value {x} is not finite")));
        }
        n += 1;
        let delta = x - mean;
        mean += delta / real::<T>(n as f64);
        m2 += delta * (x - mean);
    }
    if n == 0 {
        return Err(Error::invalid("cannot summarize an empty sample"));
    }
    let variance = if n > 1 { m2 / real::<T>((n - 1) as f64) } else { T::zero() };
    let std_error = (variance / real::<T>(n as f64)).sqrt();
    Ok(Summary { n, mean, variance, std_error })
}

/// Kolmogorov-Smirnov distance between a sample and a reference CDF.
///
/// # Errors
///
/// Returns [`Error::InvalidInput`] for an empty sample or non-finite values.
pub fn ks_distance<T: Real>(samples: &[T], cdf: impl Fn(T) -> T) -> Result<T> {
    if samples.is_empty() {
        return Err(Error::invalid("cannot compute a KS distance on an empty sample"));
    }
    if let Some(bad) = samples.iter().find(|v| !v.is_finite()) {
        return Err(Error::invalid(format!("sample value {bad} is not finite")));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite values compare totally"));
    let n = real::<T>(sorted.len() as f64);
    let mut best = T::zero();
    for (i, &x) in sorted.iter().enumerate() {
        let f = cdf(x);
        let below = real::<T>(i as f64) / n;
        let above = real::<T>((i + 1) as f64) / n;
        best = best.max((f - below).abs()).max((above - f).abs());
    }
    Ok(best)
}

/// Outcome of a chi-square goodness-of-fit test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChiSquareGof<T> {
    /// Chi-square statistic over the binned counts.
    pub statistic: T,
    /// Degrees of freedom (bin count minus one; no parameter is estimated).
    pub degrees_of_freedom: usize,
    /// Survival-function p-value of the statistic.
    pub p_value: T,
    /// Number of bins after merging to an expected count of at least five.
    pub bins: usize,
}

impl<T: Real> ChiSquareGof<T> {
    /// True when the fit is not rejected at the given significance level.
    pub fn passes(&self, significance: T) -> bool {
        self.p_value >= significance
    }
}

/// Minimum expected count per chi-square bin.
const MIN_EXPECTED_PER_BIN: f64 = 5.0;

/// Tests whether positive integer stopping times follow the geometric law
/// with success probability `p` on `{1, 2, ...}`.
///
/// Consecutive values of the support are merged into bins until each bin's
/// expected count reaches five, with the the geometric tail folded into the
/// last bin.
///
/// # Errors
///
/// Returns [`Error::InvalidInput`] when `p` is outside `(0, 1)`, the sample
/// is empty or contains zeros, or the sample is too small to form two bins.
pub fn geometric_chi_square<T: Real>(times: &[u64], p: T) -> Result<ChiSquareGof<T>> {
    if !p.is_finite() || p <= T::zero() || p >= T::one() {
        return Err(Error::invalid(format!(
            "geometric success probability must lie in (0, 1), got {p}"
        )));
    }
    if times.is_empty() {
        return Err(Error::invalid("cannot test an empty sample"));
    }
    if times.contains(&0) {
        return Err(Error::invalid("geometric stopping times start at 1, got 0"));
    }
    let n = real::<T>(times.len() as f64);
    let min_expected = real::<T>(MIN_EXPECTED_PER_BIN);
    let q = T::one() - p;

    // Bin edges over the support: bins[b] covers {edges[b], ..., edges[b+1]-1},
    // with the final bin extended over the whole tail.
    let mut edges = vec![1u64];
    let mut expected = Vec::new();
    let mut tail_mass = T::one();
    let mut k = 1u64;
    let mut acc = T::zero();
    loop {
        let pk = p * q.powi((k - 1) as i32);
        acc += pk;
        tail_mass -= pk;
        if acc * n >= min_expected {
            if tail_mass * n < min_expected {
                // Remaining tail is too thin for a bin of its own.
                expected.push((acc + tail_mass) * n);
                break;
            }
            expected.push(acc * n);
            edges.push(k + 1);
            acc = T::zero();
        }
        if tail_mass * n < T::epsilon() * n && acc * n < min_expected {
            // Support exhausted mid-bin: fold the partial bin backward.
            match expected.last_mut() {
                Some(last) => *last += (acc + tail_mass) * n,
                None => return Err(Error::invalid("sample too small to form a chi-square bin")),
            }
            edges.pop();
            break;
        }
        k += 1;
    }
    let bins = expected.len();
    if bins < 2 {
        return Err(Error::invalid(format!(
            "sample of {} is too small to form two chi-square bins",
            times.len()
        )));
    }

    let mut observed = vec![0u64; bins];
    for &t in times {
        let b = edges.partition_point(|&e| e <= t) - 1;
        observed[b] += 1;
    }

    let mut statistic = T::zero();
    for (o, e) in observed.iter().zip(&expected) {
        let diff = real::<T>(*o as f64) - *e;
        statistic += diff * diff / *e;
    }
    let degrees_of_freedom = bins - 1;
    let p_value = chi_square_sf(statistic, degrees_of_freedom)?;
    Ok(ChiSquareGof { statistic, degrees_of_freedom, p_value, bins })
}
