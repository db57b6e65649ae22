//! Nystrom solution of the second-kind Fredholm integral equations behind
//! the exact operating characteristics of a head-started detection
//! procedure.
//!
//! All unknowns are functions of the head start `r` on `[0, A)`, `A` the
//! alarm threshold, and `(K u)(r)` below means the integral over `x` of
//! `u(x) K(x, r)` with `K` one of the statistic's transition kernels:
//!
//! * expected alarm time under no change: `phi = 1 + K_pre phi`;
//! * expected alarm time with the change in effect from the start:
//!   `delta_0 = 1 + K_post delta_0`;
//! * residual delay mass past change point `v`:
//!   `delta_v = K_pre delta_{v-1}`;
//! * survival probability past `v`: `rho_v = K_pre rho_{v-1}`, `rho_0 = 1`;
//! * cumulative residual delay mass: `psi = delta_0 + K_pre psi`.
//!
//! A quadrature rule turns each equation into a dense linear system over
//! the node values. The solved table evaluates off the nodes through the
//! equation itself (the natural interpolant), which preserves the
//! quadrature's accuracy everywhere on the interval.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::{GridFunction, QuadratureGrid};
use crate::linalg::SquareMatrix;
use crate::model::ChangeModel;
use crate::scalar::{real, Real};

/// Production node count; enough for sup-norm accuracy near machine
/// precision on the smooth kernels used here.
pub const DEFAULT_NODES: usize = 256;

/// Relative residual a discrete solve must reach.
const RESIDUAL_TOL: f64 = 1e-12;

/// Condition-number ceiling beyond which a solve is rejected as unreliable.
const CONDITION_LIMIT: f64 = 1e12;

/// Survival probability below which conditional delays are refused.
pub const SURVIVAL_FLOOR: f64 = 1e-12;

/// Residual tolerance adjusted to the working precision.
fn residual_tolerance<T: Real>() -> T {
    real::<T>(RESIDUAL_TOL).max(T::epsilon() * real::<T>(100.0))
}

/// A solved integral equation: node values plus solve diagnostics.
#[derive(Debug, Clone)]
pub struct NystromSolution<T> {
    /// Node values of the solution.
    pub function: GridFunction<T>,
    /// Relative sup-norm residual of the discrete system.
    pub residual: T,
    /// One-norm condition estimate of the system matrix.
    pub condition: T,
}

/// Solves `u = g + K u` on the grid carried by `g`.
///
/// # Errors
///
/// Returns [`Error::Numeric`] when the discrete system is singular, its
/// condition estimate exceeds the reliability ceiling, or the back-checked
/// residual misses the accuracy contract. Kernel errors are passed through.
pub fn solve_second_kind<T: Real>(
    kernel: impl Fn(T, T) -> Result<T>,
    inhomogeneity: &GridFunction<T>,
) -> Result<NystromSolution<T>> {
    let grid = inhomogeneity.grid();
    let nodes = grid.nodes();
    let weights = grid.weights();
    let n = grid.len();
    // Row j states the equation at node x_j:
    // u(x_j) - sum_i w_i K(x_i, x_j) u(x_i) = g(x_j).
    let mut system = SquareMatrix::zeros(n)?;
    for j in 0..n {
        for i in 0..n {
            let k = kernel(nodes[i], nodes[j])?;
            let mut entry = -weights[i] * k;
            if i == j {
                entry += T::one();
            }
            system.set(j, i, entry);
        }
    }
    let lu = system.lu()?;
    let condition = lu.condition_one_norm(system.norm_one());
    if condition > real::<T>(CONDITION_LIMIT) {
        return Err(Error::numeric(format!(
            "system condition estimate {condition:e} exceeds the reliability ceiling"
        )));
    }
    let solution = lu.solve(inhomogeneity.values())?;
    let back = system.matvec(&solution)?;
    let scale = inhomogeneity
        .values()
        .iter()
        .map(|v| v.abs())
        .fold(T::one(), T::max);
    let residual = back
        .iter()
        .zip(inhomogeneity.values())
        .map(|(&a, &b)| (a - b).abs())
        .fold(T::zero(), T::max)
        / scale;
    if residual > residual_tolerance::<T>() {
        return Err(Error::numeric(format!(
            "solve residual {residual:e} misses the accuracy contract"
        )));
    }
    let function = GridFunction::new(Arc::clone(grid), solution)?;
    Ok(NystromSolution { function, residual, condition })
}

/// Expected time to a false alarm as a function of the head start:
/// solves `phi = 1 + K_pre phi` on `[0, A)`.
///
/// # Errors
///
/// Returns [`Error::Numeric`] on solver failures or if the solution dips
/// below 1, which a mean stopping time cannot do.
pub fn arl_false_alarm<T: Real>(
    model: &dyn ChangeModel<T>,
    grid: &Arc<QuadratureGrid<T>>,
) -> Result<NystromSolution<T>> {
    let one = GridFunction::constant(Arc::clone(grid), T::one())?;
    let sol = solve_second_kind(|x, r| model.kernel_pre(x, r), &one)?;
    if sol.function.min_value() < T::one() - real::<T>(1e-9) {
        return Err(Error::numeric(format!(
            "alarm-time solution dipped to {}, below its lower bound of 1",
            sol.function.min_value()
        )));
    }
    Ok(sol)
}

/// Expected detection delay with the change in effect from the start, as a
/// function of the head start: solves `delta_0 = 1 + K_post delta_0`.
///
/// # Errors
///
/// Returns [`Error::Numeric`] on solver failures or a solution below 1.
pub fn delay_at_change_zero<T: Real>(
    model: &dyn ChangeModel<T>,
    grid: &Arc<QuadratureGrid<T>>,
) -> Result<NystromSolution<T>> {
    let one = GridFunction::constant(Arc::clone(grid), T::one())?;
    let sol = solve_second_kind(|x, r| model.kernel_post(x, r), &one)?;
    if sol.function.min_value() < T::one() - real::<T>(1e-9) {
        return Err(Error::numeric(format!(
            "delay solution dipped to {}, below its lower bound of 1",
            sol.function.min_value()
        )));
    }
    Ok(sol)
}

/// Cumulative residual delay mass over all change points: solves
/// `psi = delta_0 + K_pre psi`, with `delta_0` as already solved by
/// [`delay_at_change_zero`].
///
/// # Errors
///
/// Returns [`Error::Numeric`] on solver failures.
pub fn cumulative_delay<T: Real>(
    model: &dyn ChangeModel<T>,
    delay_zero: &GridFunction<T>,
) -> Result<NystromSolution<T>> {
    solve_second_kind(|x, r| model.kernel_pre(x, r), delay_zero)
}

/// How far to carry the change-point recursions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NuPolicy<T> {
    /// Carry them to exactly this change point.
    Fixed(usize),
    /// Carry them until the conditional delays stabilize.
    Auto(TruncationRule<T>),
}

/// Stabilization rule for [`NuPolicy::Auto`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncationRule<T> {
    /// Sup-norm tolerance on successive conditional delays.
    pub tol: T,
    /// How many consecutive stable steps count as converged.
    pub consecutive: usize,
    /// Hard cap on the number of change points.
    pub cap: usize,
}

impl<T: Real> Default for TruncationRule<T> {
    fn default() -> Self {
        Self { tol: real::<T>(1e-10), consecutive: 5, cap: 10_000 }
    }
}

/// The recursions `delta_v` and `rho_v` tabulated on a grid, for
/// `v = 0, ..., len - 1`.
#[derive(Debug, Clone)]
pub struct DelaySequences<T> {
    delays: Vec<GridFunction<T>>,
    survivals: Vec<GridFunction<T>>,
    converged: bool,
    degenerate: bool,
}

impl<T: Real> DelaySequences<T> {
    /// Number of tabulated change points.
    pub fn len(&self) -> usize {
        self.delays.len()
    }

    /// Always false: index 0 is tabulated unconditionally.
    pub fn is_empty(&self) -> bool {
        self.delays.is_empty()
    }

    /// Residual delay mass past change point `v`.
    pub fn delay(&self, v: usize) -> Option<&GridFunction<T>> {
        self.delays.get(v)
    }

    /// Survival probability past change point `v`.
    pub fn survival(&self, v: usize) -> Option<&GridFunction<T>> {
        self.survivals.get(v)
    }

    /// Whether an adaptive run stabilized before its cap.
    pub fn converged(&self) -> bool {
        self.converged
    }

    /// Whether the recursion stopped because survival mass ran out.
    pub fn degenerate(&self) -> bool {
        self.degenerate
    }
}

/// Carries the delay and survival recursions forward from `delta_0`.
///
/// # Errors
///
/// Returns [`Error::Numeric`] when a fixed-policy run exhausts its survival
/// mass (conditional delays would be meaningless) and passes kernel errors
/// through.
pub fn delay_and_survival_sequences<T: Real>(
    model: &dyn ChangeModel<T>,
    delay_zero: &GridFunction<T>,
    policy: NuPolicy<T>,
) -> Result<DelaySequences<T>> {
    let grid = delay_zero.grid();
    let floor = real::<T>(SURVIVAL_FLOOR);
    let mut delays = vec![delay_zero.clone()];
    let mut survivals = vec![GridFunction::constant(Arc::clone(grid), T::one())?];
    let mut converged = false;
    let mut degenerate = false;
    let (cap, rule) = match policy {
        NuPolicy::Fixed(v_max) => (v_max, None),
        NuPolicy::Auto(rule) => (rule.cap, Some(rule)),
    };
    let mut stable_steps = 0usize;
    let mut prev_cadd: Option<GridFunction<T>> = None;
    for v in 1..=cap {
        let delay = apply_pre_kernel(model, delays.last().expect("nonempty by construction"))?;
        let survival =
            apply_pre_kernel(model, survivals.last().expect("nonempty by construction"))?;
        if survival.max_value() < floor {
            degenerate = true;
            if rule.is_none() {
                return Err(Error::numeric(format!(
                    "survival mass fell below {floor:e} at change point {v}; \
                     conditional delays past this point are not resolvable"
                )));
            }
            break;
        }
        delays.push(delay);
        survivals.push(survival);
        if let Some(rule) = rule {
            let cadd_v = conditional_delay_table(
                delays.last().expect("just pushed"),
                survivals.last().expect("just pushed"),
            )?;
            if let Some(prev) = &prev_cadd {
                if cadd_v.sup_distance(prev)? <= rule.tol {
                    stable_steps += 1;
                } else {
                    stable_steps = 0;
                }
            }
            prev_cadd = Some(cadd_v);
            if stable_steps >= rule.consecutive {
                converged = true;
                break;
            }
        }
    }
    if rule.is_none() {
        converged = true;
    }
    Ok(DelaySequences { delays, survivals, converged, degenerate })
}

/// Pointwise conditional delay table `delta_v / rho_v`.
///
/// # Errors
///
/// Returns [`Error::Numeric`] when any survival value sits below the floor.
pub fn conditional_delay_table<T: Real>(
    delay: &GridFunction<T>,
    survival: &GridFunction<T>,
) -> Result<GridFunction<T>> {
    if survival.min_value() < real::<T>(SURVIVAL_FLOOR) {
        return Err(Error::numeric(format!(
            "survival value {} is below the floor; conditional delay undefined",
            survival.min_value()
        )));
    }
    delay.zip_with(survival, |d, s| d / s)
}

/// One application of the pre-change kernel to a tabulated function:
/// `out(r_j) = sum_i w_i K_pre(x_i, r_j) f(x_i)`.
fn apply_pre_kernel<T: Real>(
    model: &dyn ChangeModel<T>,
    f: &GridFunction<T>,
) -> Result<GridFunction<T>> {
    let grid = f.grid();
    let nodes = grid.nodes();
    let weights = grid.weights();
    let mut out = vec![T::zero(); grid.len()];
    for (j, o) in out.iter_mut().enumerate() {
        let mut acc = T::zero();
        for i in 0..grid.len() {
            acc += weights[i] * model.kernel_pre(nodes[i], nodes[j])? * f.values()[i];
        }
        *o = acc;
    }
    GridFunction::new(Arc::clone(grid), out)
}

/// Every operating characteristic of the deterministic head-start family at
/// one threshold, solved on one grid.
#[derive(Debug, Clone)]
pub struct OperatingCharacteristics<T> {
    grid: Arc<QuadratureGrid<T>>,
    arl: NystromSolution<T>,
    delay_zero: NystromSolution<T>,
    cumulative: NystromSolution<T>,
    sequences: DelaySequences<T>,
}

/// Solves all five equations on the given grid.
///
/// # Errors
///
/// Passes through solver failures; see [`solve_second_kind`] and
/// [`delay_and_survival_sequences`].
pub fn operating_characteristics<T: Real>(
    model: &dyn ChangeModel<T>,
    grid: &Arc<QuadratureGrid<T>>,
    policy: NuPolicy<T>,
) -> Result<OperatingCharacteristics<T>> {
    let arl = arl_false_alarm(model, grid)?;
    let delay_zero = delay_at_change_zero(model, grid)?;
    let cumulative = cumulative_delay(model, &delay_zero.function)?;
    let sequences = delay_and_survival_sequences(model, &delay_zero.function, policy)?;
    Ok(OperatingCharacteristics {
        grid: Arc::clone(grid),
        arl,
        delay_zero,
        cumulative,
        sequences,
    })
}

impl<T: Real> OperatingCharacteristics<T> {
    /// Grid everything is solved on.
    pub fn grid(&self) -> &Arc<QuadratureGrid<T>> {
        &self.grid
    }

    /// Alarm threshold (the grid's upper endpoint).
    pub fn threshold(&self) -> T {
        self.grid.upper()
    }

    /// Solved expected alarm time under no change.
    pub fn arl(&self) -> &NystromSolution<T> {
        &self.arl
    }

    /// Solved expected delay with the change in effect from the start.
    pub fn delay_zero(&self) -> &NystromSolution<T> {
        &self.delay_zero
    }

    /// Solved cumulative residual delay mass.
    pub fn cumulative(&self) -> &NystromSolution<T> {
        &self.cumulative
    }

    /// Tabulated delay and survival recursions.
    pub fn sequences(&self) -> &DelaySequences<T> {
        &self.sequences
    }

    /// Validates an evaluation point in `[0, threshold)`.
    fn check_state(&self, r: T) -> Result<()> {
        if !r.is_finite() || r < T::zero() || r >= self.grid.upper() {
            return Err(Error::invalid(format!(
                "head start {r} outside [0, {})",
                self.grid.upper()
            )));
        }
        Ok(())
    }

    /// Natural-interpolant evaluation `g_r + sum_i w_i kernel(x_i, r) u_i`.
    fn nystrom_eval(
        &self,
        kernel: impl Fn(T, T) -> Result<T>,
        g_r: T,
        table: &GridFunction<T>,
        r: T,
    ) -> Result<T> {
        let mut acc = g_r;
        let nodes = self.grid.nodes();
        let weights = self.grid.weights();
        for i in 0..self.grid.len() {
            acc += weights[i] * kernel(nodes[i], r)? * table.values()[i];
        }
        Ok(acc)
    }

    /// Expected alarm time under no change, started from `r`.
    ///
    /// # Errors
    ///
    /// Returns [`Error::InvalidInput`] when `r` is outside `[0, threshold)`.
    pub fn arl_at(&self, model: &dyn ChangeModel<T>, r: T) -> Result<T> {
        self.check_state(r)?;
        self.nystrom_eval(|x, s| model.kernel_pre(x, s), T::one(), &self.arl.function, r)
    }

    /// Expected delay with the change in effect from the start, from `r`.
    ///
    /// # Errors
    ///
    /// Returns [`Error::InvalidInput`] when `r` is outside `[0, threshold)`.
    pub fn delay_zero_at(&self, model: &dyn ChangeModel<T>, r: T) -> Result<T> {
        self.check_state(r)?;
        self.nystrom_eval(|x, s| model.kernel_post(x, s), T::one(), &self.delay_zero.function, r)
    }

    /// Cumulative residual delay mass, started from `r`.
    ///
    /// # Errors
    ///
    /// Returns [`Error::InvalidInput`] when `r` is outside `[0, threshold)`.
    pub fn cumulative_at(&self, model: &dyn ChangeModel<T>, r: T) -> Result<T> {
        self.check_state(r)?;
        let g_r = self.delay_zero_at(model, r)?;
        self.nystrom_eval(|x, s| model.kernel_pre(x, s), g_r, &self.cumulative.function, r)
    }

    /// Residual delay mass past change point `v`, started from `r`.
    ///
    /// # Errors
    ///
    /// Returns [`Error::InvalidInput`] for a state outside `[0, threshold)`
    /// or a change point beyond the tabulated range.
    pub fn delay_at(&self, model: &dyn ChangeModel<T>, r: T, v: usize) -> Result<T> {
        self.check_state(r)?;
        if v == 0 {
            return self.delay_zero_at(model, r);
        }
        let prev = self
            .sequences
            .delay(v - 1)
            .ok_or_else(|| Error::invalid(format!("change point {v} beyond the tabulated range")))?;
        self.nystrom_eval(|x, s| model.kernel_pre(x, s), T::zero(), prev, r)
    }

    /// Survival probability past change point `v`, started from `r`.
    ///
    /// # Errors
    ///
    /// Returns [`Error::InvalidInput`] for a state outside `[0, threshold)`
    /// or a change point beyond the tabulated range.
    pub fn survival_at(&self, model: &dyn ChangeModel<T>, r: T, v: usize) -> Result<T> {
        self.check_state(r)?;
        if v == 0 {
            return Ok(T::one());
        }
        let prev = self
            .sequences
            .survival(v - 1)
            .ok_or_else(|| Error::invalid(format!("change point {v} beyond the tabulated range")))?;
        self.nystrom_eval(|x, s| model.kernel_pre(x, s), T::zero(), prev, r)
    }

    /// Conditional average delay at change point `v`, started from `r`.
    ///
    /// # Errors
    ///
    /// Returns input errors as above and [`Error::Numeric`] when the
    /// survival probability sits below the floor.
    pub fn cadd_at(&self, model: &dyn ChangeModel<T>, r: T, v: usize) -> Result<T> {
        let delay = self.delay_at(model, r, v)?;
        let survival = self.survival_at(model, r, v)?;
        if survival < real::<T>(SURVIVAL_FLOOR) {
            return Err(Error::numeric(format!(
                "survival probability {survival:e} past change point {v} is below the floor"
            )));
        }
        Ok(delay / survival)
    }

    /// Conditional average delays for every tabulated change point.
    ///
    /// # Errors
    ///
    /// See [`OperatingCharacteristics::cadd_at`].
    pub fn cadd_profile_at(&self, model: &dyn ChangeModel<T>, r: T) -> Result<Vec<T>> {
        (0..self.sequences.len()).map(|v| self.cadd_at(model, r, v)).collect()
    }

    /// Supremum over change points of the conditional average delay,
    /// started from `r`.
    ///
    /// # Errors
    ///
    /// Returns [`Error::Numeric`] when the tabulated recursions neither
    /// stabilized nor exhausted their survival mass, since the supremum is
    /// then not certified.
    pub fn supremum_add_at(&self, model: &dyn ChangeModel<T>, r: T) -> Result<T> {
        if !self.sequences.converged() && !self.sequences.degenerate() {
            return Err(Error::numeric(
                "conditional delays did not stabilize within the change-point cap",
            ));
        }
        let profile = self.cadd_profile_at(model, r)?;
        Ok(profile.into_iter().fold(T::neg_infinity(), T::max))
    }

    /// Lower bound on the supremum delay through the integral delay measure
    /// weighted by `r`: `(r delta_0(r) + psi(r)) / (r + phi(r))`.
    ///
    /// # Errors
    ///
    /// Returns [`Error::InvalidInput`] when `r` is outside `[0, threshold)`.
    pub fn lower_bound_at(&self, model: &dyn ChangeModel<T>, r: T) -> Result<T> {
        self.check_state(r)?;
        let numerator = r * self.delay_zero_at(model, r)? + self.cumulative_at(model, r)?;
        let denominator = r + self.arl_at(model, r)?;
        Ok(numerator / denominator)
    }

    /// Node values of the conditional delay at change point `v`, for
    /// tabular output.
    ///
    /// # Errors
    ///
    /// Returns [`Error::InvalidInput`] for a change point beyond the
    /// tabulated range and [`Error::Numeric`] on a survival floor breach.
    pub fn cadd_node_values(&self, v: usize) -> Result<Vec<T>> {
        let delay = self
            .sequences
            .delay(v)
            .ok_or_else(|| Error::invalid(format!("change point {v} beyond the tabulated range")))?;
        let survival = self
            .sequences
            .survival(v)
            .ok_or_else(|| Error::invalid(format!("change point {v} beyond the tabulated range")))?;
        Ok(conditional_delay_table(delay, survival)?.values().to_vec())
    }
}
