//! Quadrature grids on the statistic's range `[0, upper]` and function
//! tables attached to them.
//!
//! The Nystrom solver, the quasi-stationary eigenproblem, and the
//! calibration searches all share these types. Gauss-Legendre is the
//! production scheme; the trapezoid scheme exists as an independent
//! diagnostic with a known, much slower convergence rate.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::scalar::{real, Real};

/// Smallest accepted node count.
pub const MIN_NODES: usize = 8;
/// Largest accepted node count, protecting against accidental huge solves.
pub const MAX_NODES: usize = 65_536;

/// Quadrature rule family.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    /// Gauss-Legendre nodes and weights, exponentially convergent for the
    /// smooth kernels used here.
    GaussLegendre,
    /// Uniform nodes with trapezoid weights, used as a cross-check.
    Trapezoid,
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Scheme::GaussLegendre => f.write_str("gauss-legendre"),
            Scheme::Trapezoid => f.write_str("trapezoid"),
        }
    }
}

impl std::str::FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gauss-legendre" => Ok(Scheme::GaussLegendre),
            "trapezoid" => Ok(Scheme::Trapezoid),
            other => Err(Error::invalid(format!(
                "unknown quadrature scheme '{other}' (expected 'gauss-legendre' or 'trapezoid')"
            ))),
        }
    }
}

/// Nodes and weights of a quadrature rule on `[0, upper]`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureGrid<T> {
    scheme: Scheme,
    upper: T,
    nodes: Vec<T>,
    weights: Vec<T>,
}

impl<T: Real> QuadratureGrid<T> {
    /// Builds a grid of `n` nodes on `[0, upper]` for the given scheme.
    ///
    /// # Errors
    ///
    /// Returns [`Error::InvalidInput`] when `n` is outside
    /// `[MIN_NODES, MAX_NODES]` or `upper` is not finite positive, and
    /// [`Error::Numeric`] if node computation fails to converge.
    pub fn new(scheme: Scheme, n: usize, upper: T) -> Result<Self> {
        if !(MIN_NODES..=MAX_NODES).contains(&n) {
            return Err(Error::invalid(format!(
                "node count {n} outside supported range [{MIN_NODES}, {MAX_NODES}]"
            )));
        }
        if !upper.is_finite() || upper <= T::zero() {
            return Err(Error::invalid(format!(
                "grid upper endpoint must be finite positive, got {upper}"
            )));
        }
        let (nodes, weights) = match scheme {
            Scheme::GaussLegendre => gauss_legendre_rule(n, upper)?,
            Scheme::Trapezoid => trapezoid_rule(n, upper),
        };
        Ok(Self { scheme, upper, nodes, weights })
    }

    /// Builds a Gauss-Legendre grid, the production default.
    pub fn gauss_legendre(n: usize, upper: T) -> Result<Self> {
        Self::new(Scheme::GaussLegendre, n, upper)
    }

    /// Builds a trapezoid grid, used as an independent diagnostic.
    pub fn trapezoid(n: usize, upper: T) -> Result<Self> {
        Self::new(Scheme::Trapezoid, n, upper)
    }

    /// Scheme this grid was built with.
    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    /// Number of nodes.
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    /// Always false; grids carry at least [`MIN_NODES`] nodes.
    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Upper endpoint of the integration range.
    pub fn upper(&self) -> T {
        self.upper
    }

    /// Quadrature nodes in ascending order.
    pub fn nodes(&self) -> &[T] {
        &self.nodes
    }

    /// Quadrature weights matching [`QuadratureGrid::nodes`].
    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    /// Applies the rule to a table of function values at the nodes.
    ///
    /// # Errors
    ///
    /// Returns [`Error::InvalidInput`] when the value count differs from the
    /// node count.
    pub fn integrate(&self, values: &[T]) -> Result<T> {
        if values.len() != self.nodes.len() {
            return Err(Error::invalid(format!(
                "integrate got {} values for {} nodes",
                values.len(),
                self.nodes.len()
            )));
        }
        Ok(self.weights.iter().zip(values).map(|(&w, &v)| w * v).sum())
    }

    /// True when the two grids carry identical nodes and weights.
    pub fn same_rule(&self, other: &Self) -> bool {
        self.scheme == other.scheme && self.upper == other.upper && self.nodes == other.nodes
    }
}

/// Gauss-Legendre nodes and weights on `[0, upper]` via Newton iteration on
/// the Legendre recurrence.
fn gauss_legendre_rule<T: Real>(n: usize, upper: T) -> Result<(Vec<T>, Vec<T>)> {
    let tol = real::<T>(1e-14).max(T::epsilon() * real::<T>(8.0));
    let half_width = upper * real::<T>(0.5);
    let mut nodes = vec![T::zero(); n];
    let mut weights = vec![T::zero(); n];
    let fn_ = real::<T>(n as f64);
    let m = n.div_ceil(2);
    for i in 0..m {
        // Tricomi-style initial guess for the i-th largest root.
        let angle = T::PI() * (real::<T>(i as f64) + real::<T>(0.75)) / (fn_ + real::<T>(0.5));
        let mut z = angle.cos();
        let mut converged = false;
        for _ in 0..200 {
            let (p, dp) = legendre_with_derivative(n, z);
            let step = p / dp;
            z -= step;
            if step.abs() <= tol {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::numeric(format!(
                "Gauss-Legendre node {i} of {n} did not converge"
            )));
        }
        // One polishing step so nodes and weights agree with the final z.
        let (p, dp) = legendre_with_derivative(n, z);
        z -= p / dp;
        let derivative = legendre_with_derivative(n, z).1;
        let w = real::<T>(2.0) * half_width
            / ((T::one() - z * z) * derivative * derivative);
        nodes[i] = half_width - half_width * z;
        nodes[n - 1 - i] = half_width + half_width * z;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    Ok((nodes, weights))
}

/// Legendre polynomial of degree `n` and its derivative at `z`, by the
/// three-term recurrence.
fn legendre_with_derivative<T: Real>(n: usize, z: T) -> (T, T) {
    let mut p_prev = T::zero();
    let mut p = T::one();
    for j in 0..n {
        let fj = real::<T>(j as f64);
        let next = ((real::<T>(2.0) * fj + T::one()) * z * p - fj * p_prev) / (fj + T::one());
        p_prev = p;
        p = next;
    }
    let dp = real::<T>(n as f64) * (z * p - p_prev) / (z * z - T::one());
    (p, dp)
}

/// Uniform nodes with trapezoid weights on `[0, upper]`.
fn trapezoid_rule<T: Real>(n: usize, upper: T) -> (Vec<T>, Vec<T>) {
    let h = upper / real::<T>((n - 1) as f64);
    let half = real::<T>(0.5);
    let nodes: Vec<T> = (0..n).map(|i| h * real::<T>(i as f64)).collect();
    let weights: Vec<T> = (0..n)
        .map(|i| if i == 0 || i == n - 1 { h * half } else { h })
        .collect();
    (nodes, weights)
}

/// A function represented by its values at the nodes of a quadrature grid.
///
/// Between nodes the table evaluates by linear interpolation; outside the
/// node range but inside `[0, upper]` it extrapolates linearly from the
/// nearest node pair. Solvers that can do better (the Nystrom interpolant)
/// bypass this and evaluate through the integral equation instead.
#[derive(Debug, Clone)]
pub struct GridFunction<T> {
    grid: Arc<QuadratureGrid<T>>,
    values: Vec<T>,
}

impl<T: Real> GridFunction<T> {
    /// Wraps a table of node values.
    ///
    /// # Errors
    ///
    /// Returns [`Error::InvalidInput`] when the value count differs from the
    /// node count or a value is not finite.
    pub fn new(grid: Arc<QuadratureGrid<T>>, values: Vec<T>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::invalid(format!(
                "grid function got {} values for {} nodes",
                values.len(),
                grid.len()
            )));
        }
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("grid function value {bad} is not finite")));
        }
        Ok(Self { grid, values })
    }

    /// Builds the constant function `c`.
    pub fn constant(grid: Arc<QuadratureGrid<T>>, c: T) -> Result<Self> {
        let n = grid.len();
        Self::new(grid, vec![c; n])
    }

    /// Tabulates `f` at the grid nodes.
    pub fn from_fn(grid: Arc<QuadratureGrid<T>>, f: impl Fn(T) -> T) -> Result<Self> {
        let values: Vec<T> = grid.nodes().iter().map(|&x| f(x)).collect();
        Self::new(grid, values)
    }

    /// Grid the values are attached to.
    pub fn grid(&self) -> &Arc<QuadratureGrid<T>> {
        &self.grid
    }

    /// Node values.
    pub fn values(&self) -> &[T] {
        &self.values
    }

    /// Integral of the function under the grid's quadrature rule.
    pub fn integral(&self) -> T {
        self.grid
            .integrate(&self.values)
            .expect("value count matches node count by construction")
    }

    /// Largest node value.
    pub fn max_value(&self) -> T {
        self.values.iter().copied().fold(T::neg_infinity(), T::max)
    }

    /// Smallest node value.
    pub fn min_value(&self) -> T {
        self.values.iter().copied().fold(T::infinity(), T::min)
    }

    /// Evaluates by linear interpolation at `r` in `[0, upper]`.
    ///
    /// # Errors
    ///
    /// Returns [`Error::InvalidInput`] when `r` lies outside `[0, upper]`.
    pub fn eval(&self, r: T) -> Result<T> {
        if !r.is_finite() || r < T::zero() || r > self.grid.upper() {
            return Err(Error::invalid(format!(
                "evaluation point {r} outside [0, {}]",
                self.grid.upper()
            )));
        }
        let nodes = self.grid.nodes();
        let n = nodes.len();
        let idx = nodes.partition_point(|&x| x <= r);
        let (lo, hi) = if idx == 0 {
            (0, 1)
        } else if idx == n {
            (n - 2, n - 1)
        } else {
            (idx - 1, idx)
        };
        let x0 = nodes[lo];
        let x1 = nodes[hi];
        let v0 = self.values[lo];
        let v1 = self.values[hi];
        Ok(v0 + (r - x0) * (v1 - v0) / (x1 - x0))
    }

    /// True when `other` shares this table's quadrature rule.
    pub fn same_grid(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.grid, &other.grid) || self.grid.same_rule(&other.grid)
    }

    /// Combines two tables on the same grid pointwise.
    ///
    /// # Errors
    ///
    /// Returns [`Error::InvalidInput`] when the grids differ or `f` produces
    /// a non-finite value.
    pub fn zip_with(&self, other: &Self, f: impl Fn(T, T) -> T) -> Result<Self> {
        if !self.same_grid(other) {
            return Err(Error::invalid("grid functions live on different grids"));
        }
        let values: Vec<T> =
            self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect();
        Self::new(Arc::clone(&self.grid), values)
    }

    /// Sup-norm distance between two tables on the same grid.
    ///
    /// # Errors
    ///
    /// Returns [`Error::InvalidInput`] when the grids differ.
    pub fn sup_distance(&self, other: &Self) -> Result<T> {
        if !self.same_grid(other) {
            return Err(Error::invalid("grid functions live on different grids"));
        }
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| (a - b).abs())
            .fold(T::zero(), T::max))
    }
}
