//! Scalar abstraction so the numeric core can run in `f32` or `f64`.

use rand::distributions::Distribution;
use rand::RngCore;
use rand_distr::StandardNormal;

/// Floating-point scalar the solvers, models, and samplers are generic over.
///
/// Implemented for `f32` and `f64`. Every documented tolerance in the crate
/// (sup-norm agreement at 1e-8, eigenvalue agreement at 1e-10, and so on) is
/// calibrated for `f64`; the `f32` instantiation compiles and runs but must
/// be paired with correspondingly looser expectations.
pub trait Real:
    num_traits::Float
    + num_traits::FloatConst
    + num_traits::FromPrimitive
    + num_traits::ToPrimitive
    + num_traits::NumAssign
    + std::iter::Sum
    + std::fmt::Debug
    + std::fmt::Display
    + std::fmt::LowerExp
    + Send
    + Sync
    + 'static
{
    /// Draws a uniform variate in `[0, 1)`.
    fn sample_unit(rng: &mut dyn RngCore) -> Self;

    /// Draws a standard normal variate.
    fn sample_std_normal(rng: &mut dyn RngCore) -> Self;
}

impl Real for f64 {
    fn sample_unit(rng: &mut dyn RngCore) -> Self {
        rand::distributions::Standard.sample(rng)
    }

    fn sample_std_normal(rng: &mut dyn RngCore) -> Self {
        StandardNormal.sample(rng)
    }
}

impl Real for f32 {
    fn sample_unit(rng: &mut dyn RngCore) -> Self {
        rand::distributions::Standard.sample(rng)
    }

    fn sample_std_normal(rng: &mut dyn RngCore) -> Self {
        StandardNormal.sample(rng)
    }
}

/// Converts an `f64` constant into the working scalar type.
///
/// Conversions of finite constants into `f32`/`f64` cannot fail, so this is
/// a plain convenience wrapper around `FromPrimitive`.
pub fn real<T: Real>(x: f64) -> T {
    T::from_f64(x).expect("finite f64 constant converts into any Real type")
}
