//! Quasi-stationary law of the detection statistic below its threshold.
//!
//! Restricted to states in `[0, B)`, the statistic's pre-change transition
//! kernel is strictly substochastic. Its leading eigenpair `(lambda, q)`
//! solves `lambda q(x) = integral over r of K_pre(x, r) q(r) dr` with `q` a
//! probability density: conditioned on no alarm so far, the statistic's law
//! converges to `q`, and a run whose head start is drawn from `q` alarms
//! after a geometric number of steps with success probability `1 - lambda`.
//!
//! Two independent routes to the eigenvalue are provided: power iteration
//! on the discretized operator (production) and a bisection on the sign of
//! the characteristic determinant (verification).
//!
//! Orientation of the discretization: the operator matrix is
//! `M[i][j] = w_j K(x_i, x_j)`, so the row index is the destination state
//! (the kernel's first argument) and the column index the source state.
//! This is the transpose of the orientation used for the right-hand-side
//! function equations of the Fredholm module; mixing the two up produces
//! an operator with the wrong invariant density, so both modules spell it
//! out explicitly.

use std::sync::Arc;

use rand::RngCore;

use crate::error::{Error, Result};
use crate::grid::{GridFunction, QuadratureGrid};
use crate::linalg::SquareMatrix;
use crate::model::ChangeModel;
use crate::scalar::{real, Real};

/// Default absolute tolerance on the eigen-residual `sup |M q - lambda q|`.
pub const DEFAULT_POWER_TOL: f64 = 1e-12;

/// Default iteration budget of the power method.
pub const DEFAULT_MAX_ITER: u64 = 100_000;

/// Intervals of the fine uniform mesh carrying the distribution function.
const CDF_RESOLUTION: usize = 2048;

/// Leading eigenpair of the statistic's kernel below a threshold, with the
/// distribution function of the quasi-stationary density.
#[derive(Debug, Clone)]
pub struct QuasiStationary<T> {
    threshold: T,
    lambda: T,
    density: GridFunction<T>,
    cdf_abscissas: Vec<T>,
    cdf_values: Vec<T>,
    iterations: u64,
    residual: T,
}

/// Discretizes the kernel restriction as `M[i][j] = w_j K_pre(x_i, x_j)`
/// (destination in the row index; see the module notes on orientation).
///
/// # Errors
///
/// Passes kernel errors through.
pub fn dense_operator<T: Real>(
    model: &dyn ChangeModel<T>,
    grid: &QuadratureGrid<T>,
) -> Result<SquareMatrix<T>> {
    let n = grid.len();
    let nodes = grid.nodes();
    let weights = grid.weights();
    let mut m = SquareMatrix::zeros(n)?;
    for i in 0..n {
        for j in 0..n {
            m.set(i, j, weights[j] * model.kernel_pre(nodes[i], nodes[j])?);
        }
    }
    Ok(m)
}

/// Solves the quasi-stationary eigenproblem with default settings.
///
/// # Errors
///
/// See [`solve_qsd_with`].
pub fn solve_qsd<T: Real>(
    model: &dyn ChangeModel<T>,
    grid: &Arc<QuadratureGrid<T>>,
) -> Result<QuasiStationary<T>> {
    solve_qsd_with(model, grid, real::<T>(DEFAULT_POWER_TOL), DEFAULT_MAX_ITER)
}

/// Solves the quasi-stationary eigenproblem by power iteration from a
/// uniform start, stopping once the eigen-residual `sup |M q - lambda q|`
/// drops to `tol`.
///
/// # Errors
///
/// Returns [`Error::InvalidInput`] for a nonpositive tolerance or an empty
/// iteration budget, and [`Error::Numeric`] when the iteration fails to
/// converge, the eigenvalue leaves `(0, 1)`, or the accumulated
/// distribution function is inconsistent.
pub fn solve_qsd_with<T: Real>(
    model: &dyn ChangeModel<T>,
    grid: &Arc<QuadratureGrid<T>>,
    tol: T,
    max_iter: u64,
) -> Result<QuasiStationary<T>> {
    if !tol.is_finite() || tol <= T::zero() {
        return Err(Error::invalid(format!("power-iteration tolerance must be positive, got {tol}")));
    }
    if max_iter == 0 {
        return Err(Error::invalid("power iteration needs at least one iteration"));
    }
    let threshold = grid.upper();
    let operator = dense_operator(model, grid)?;
    let mut q = vec![T::one() / threshold; grid.len()];
    let mut lambda = T::zero();
    let mut converged_at = None;
    let mut residual = T::infinity();
    for iter in 1..=max_iter {
        let image = operator.matvec(&q)?;
        lambda = grid.integrate(&image)?;
        if !lambda.is_finite() || lambda <= T::zero() {
            return Err(Error::numeric(format!(
                "power iteration produced a nonpositive eigenvalue iterate {lambda}"
            )));
        }
        residual = image
            .iter()
            .zip(&q)
            .map(|(&p, &v)| (p - lambda * v).abs())
            .fold(T::zero(), T::max);
        if residual <= tol {
            converged_at = Some(iter);
            break;
        }
        for (v, &p) in q.iter_mut().zip(&image) {
            *v = p / lambda;
        }
    }
    let iterations = converged_at.ok_or_else(|| {
        Error::numeric(format!(
            "power iteration did not converge in {max_iter} iterations; last residual {residual:e}"
        ))
    })?;
    if lambda >= T::one() {
        return Err(Error::numeric(format!(
            "leading eigenvalue {lambda} is not below 1; the kernel is not substochastic here"
        )));
    }
    // Exact renormalization, then the distribution function on a fine mesh
    // through the eigen-interpolated density.
    let norm = grid.integrate(&q)?;
    for v in q.iter_mut() {
        *v /= norm;
    }
    let density = GridFunction::new(Arc::clone(grid), q)?;
    let (cdf_abscissas, cdf_values) = accumulate_cdf(model, grid, &density, lambda, threshold)?;
    Ok(QuasiStationary {
        threshold,
        lambda,
        density,
        cdf_abscissas,
        cdf_values,
        iterations,
        residual,
    })
}

/// Distribution function of the eigen-density on a fine uniform mesh, by
/// analytic integration of the interpolated density: the kernel's
/// primitive in its destination argument is the pre-change ratio
/// distribution function, so `Q(y) = (1/lambda) sum_i w_i F(y / (1 + x_i))
/// q_i` exactly. Integrating analytically also sidesteps kernels with an
/// integrable singularity at the origin, where the density itself cannot
/// be evaluated.
fn accumulate_cdf<T: Real>(
    model: &dyn ChangeModel<T>,
    grid: &QuadratureGrid<T>,
    density: &GridFunction<T>,
    lambda: T,
    threshold: T,
) -> Result<(Vec<T>, Vec<T>)> {
    let nodes = grid.nodes();
    let weights = grid.weights();
    let m = CDF_RESOLUTION;
    let h = threshold / real::<T>(m as f64);
    let mut abscissas = Vec::with_capacity(m + 1);
    let mut cdf = Vec::with_capacity(m + 1);
    for k in 0..=m {
        let y = if k == m { threshold } else { h * real::<T>(k as f64) };
        let mut acc = T::zero();
        for i in 0..grid.len() {
            let reach = y / (T::one() + nodes[i]);
            acc += weights[i] * model.lr_cdf_pre(reach) * density.values()[i];
        }
        abscissas.push(y);
        cdf.push((acc / lambda).max(T::zero()));
    }
    // Guard monotonicity against rounding, then normalize to end at 1.
    for k in 1..=m {
        if cdf[k] < cdf[k - 1] {
            cdf[k] = cdf[k - 1];
        }
    }
    let total = cdf[m];
    if !total.is_finite() || (total - T::one()).abs() > real::<T>(1e-2) {
        return Err(Error::numeric(format!(
            "quasi-stationary mass accumulated to {total}, far from 1"
        )));
    }
    for v in cdf.iter_mut() {
        *v /= total;
    }
    Ok((abscissas, cdf))
}

impl<T: Real> QuasiStationary<T> {
    /// Threshold the restriction was solved under.
    pub fn threshold(&self) -> T {
        self.threshold
    }

    /// Leading eigenvalue, in `(0, 1)`.
    pub fn lambda(&self) -> T {
        self.lambda
    }

    /// Per-step alarm probability of a quasi-stationary run, `1 - lambda`.
    pub fn alarm_probability(&self) -> T {
        T::one() - self.lambda
    }

    /// Expected alarm time of a quasi-stationary run, `1 / (1 - lambda)`.
    pub fn expected_alarm_time(&self) -> T {
        T::one() / (T::one() - self.lambda)
    }

    /// Quasi-stationary density tabulated on the solve grid.
    pub fn density(&self) -> &GridFunction<T> {
        &self.density
    }

    /// Power-iteration count at convergence.
    pub fn iterations(&self) -> u64 {
        self.iterations
    }

    /// Final eigen-residual `sup |M q - lambda q|`.
    pub fn residual(&self) -> T {
        self.residual
    }

    /// Distribution function at `x` in `[0, threshold]`.
    ///
    /// # Errors
    ///
    /// Returns [`Error::InvalidInput`] when `x` is outside the range.
    pub fn cdf_at(&self, x: T) -> Result<T> {
        if !x.is_finite() || x < T::zero() || x > self.threshold {
            return Err(Error::invalid(format!(
                "distribution function argument {x} outside [0, {}]",
                self.threshold
            )));
        }
        let idx = self.cdf_abscissas.partition_point(|&a| a <= x);
        if idx == 0 {
            return Ok(T::zero());
        }
        if idx == self.cdf_abscissas.len() {
            return Ok(T::one());
        }
        let (x0, x1) = (self.cdf_abscissas[idx - 1], self.cdf_abscissas[idx]);
        let (c0, c1) = (self.cdf_values[idx - 1], self.cdf_values[idx]);
        Ok(c0 + (x - x0) * (c1 - c0) / (x1 - x0))
    }

    /// Quantile of the quasi-stationary law at probability `u` in `[0, 1)`.
    ///
    /// # Errors
    ///
    /// Returns [`Error::InvalidInput`] when `u` is outside `[0, 1)`.
    pub fn quantile(&self, u: T) -> Result<T> {
        if !u.is_finite() || u < T::zero() || u >= T::one() {
            return Err(Error::invalid(format!("quantile level {u} outside [0, 1)")));
        }
        let idx = self.cdf_values.partition_point(|&c| c < u);
        if idx == 0 {
            return Ok(self.cdf_abscissas[0]);
        }
        let (c0, c1) = (self.cdf_values[idx - 1], self.cdf_values[idx]);
        let (x0, x1) = (self.cdf_abscissas[idx - 1], self.cdf_abscissas[idx]);
        let x = if c1 > c0 { x0 + (u - c0) * (x1 - x0) / (c1 - c0) } else { x0 };
        // Draws must stay strictly below the threshold.
        let cap = self.threshold * (T::one() - T::epsilon());
        Ok(x.min(cap))
    }

    /// Draws one head start from the quasi-stationary law.
    pub fn sample(&self, rng: &mut dyn RngCore) -> T {
        let u = T::sample_unit(rng);
        self.quantile(u).expect("uniform draw lies in [0, 1)")
    }

    /// Recomputes the eigen-residual from scratch against the given model,
    /// as an independent consistency check.
    ///
    /// # Errors
    ///
    /// Passes kernel errors through.
    pub fn verify_invariance(&self, model: &dyn ChangeModel<T>) -> Result<T> {
        let grid = self.density.grid();
        let operator = dense_operator(model, grid)?;
        let image = operator.matvec(self.density.values())?;
        Ok(image
            .iter()
            .zip(self.density.values())
            .map(|(&p, &v)| (p - self.lambda * v).abs())
            .fold(T::zero(), T::max))
    }
}

/// Floor below which the determinant scan gives up.
const DETERMINANT_SCAN_FLOOR: f64 = 1e-6;

/// Leading eigenvalue of the discretized operator by an independent route:
/// scan downward from 1 for the first sign change of
/// `det(s I - M)` and bisect it to machine width.
///
/// The largest eigenvalue of this positive operator is real and simple, so
/// the determinant is positive for every `s` above it and the first sign
/// change met when scanning downward brackets exactly the leading
/// eigenvalue.
///
/// # Errors
///
/// Returns [`Error::Numeric`] when no sign change is found above the scan
/// floor or the determinant is positive nowhere.
pub fn leading_eigenvalue_by_determinant<T: Real>(operator: &SquareMatrix<T>) -> Result<T> {
    let n = operator.dim();
    let sign_at = |s: T| -> Result<i8> {
        let mut shifted = SquareMatrix::zeros(n)?;
        for i in 0..n {
            for j in 0..n {
                let mut v = -operator.at(i, j);
                if i == j {
                    v += s;
                }
                shifted.set(i, j, v);
            }
        }
        match shifted.lu() {
            Ok(lu) => Ok(lu.determinant_sign()),
            // An exactly singular shift sits on the eigenvalue itself.
            Err(Error::Numeric(_)) => Ok(0),
            Err(e) => Err(e),
        }
    };
    let mut hi = T::one();
    if sign_at(hi)? <= 0 {
        return Err(Error::numeric(
            "characteristic determinant is not positive at 1; operator is not substochastic",
        ));
    }
    let step = real::<T>(1.0 / 64.0);
    let floor = real::<T>(DETERMINANT_SCAN_FLOOR);
    let mut lo = hi - step;
    loop {
        if lo <= floor {
            return Err(Error::numeric(
                "no sign change of the characteristic determinant above the scan floor",
            ));
        }
        match sign_at(lo)? {
            0 => return Ok(lo),
            s if s < 0 => break,
            _ => {
                hi = lo;
                lo -= step;
            }
        }
    }
    let width_tol = real::<T>(1e-14).max(T::epsilon() * real::<T>(8.0));
    while hi - lo > width_tol {
        let mid = lo + (hi - lo) * real::<T>(0.5);
        match sign_at(mid)? {
            0 => return Ok(mid),
            s if s < 0 => lo = mid,
            _ => hi = mid,
        }
    }
    Ok(lo + (hi - lo) * real::<T>(0.5))
}
