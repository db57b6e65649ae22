//! The samplers and the likelihood-ratio distribution functions of each
//! model must describe the same law: transformed draws are tested against
//! the claimed distribution functions.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use srdetect::model::{ChangeModel, ExponentialModel, GaussianMeanShiftModel, Hypothesis};
use srdetect::stats::ks_distance;

const SAMPLE_SIZE: usize = 200_000;

/// Roughly the 1% critical value of the two-sided test at this size.
fn ks_limit() -> f64 {
    1.7 / (SAMPLE_SIZE as f64).sqrt()
}

fn check_sampler_against_cdf(model: &dyn ChangeModel<f64>, hypothesis: Hypothesis, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ratios: Vec<f64> = (0..SAMPLE_SIZE)
        .map(|_| {
            let x = model.sample(hypothesis, &mut rng);
            model.likelihood_ratio(x).unwrap()
        })
        .collect();
    let cdf = |y: f64| match hypothesis {
        Hypothesis::PreChange => model.lr_cdf_pre(y),
        Hypothesis::PostChange => model.lr_cdf_post(y),
    };
    let distance = ks_distance(&ratios, cdf).unwrap();
    assert!(
        distance <= ks_limit(),
        "{} under {hypothesis:?}: sampler strays from the distribution function by \
         {distance} (limit {})",
        model.name(),
        ks_limit()
    );
}

#[test]
fn doubled_rate_exponential_sampler_matches_its_distribution_functions() {
    let model = ExponentialModel::new(2.0).unwrap();
    check_sampler_against_cdf(&model, Hypothesis::PreChange, 41);
    check_sampler_against_cdf(&model, Hypothesis::PostChange, 42);
}

#[test]
fn tripled_rate_exponential_sampler_matches_its_distribution_functions() {
    let model = ExponentialModel::new(3.0).unwrap();
    check_sampler_against_cdf(&model, Hypothesis::PreChange, 43);
    check_sampler_against_cdf(&model, Hypothesis::PostChange, 44);
}

#[test]
fn gaussian_sampler_matches_its_distribution_functions() {
    let model = GaussianMeanShiftModel::new(1.0).unwrap();
    check_sampler_against_cdf(&model, Hypothesis::PreChange, 45);
    check_sampler_against_cdf(&model, Hypothesis::PostChange, 46);
}

#[test]
fn post_change_ratios_are_stochastically_larger() {
    let model = ExponentialModel::new(2.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(47);
    let mut pre_sum = 0.0;
    let mut post_sum = 0.0;
    for _ in 0..SAMPLE_SIZE {
        pre_sum += model.likelihood_ratio(model.sample_pre(&mut rng)).unwrap();
        post_sum += model.likelihood_ratio(model.sample_post(&mut rng)).unwrap();
    }
    assert!(
        post_sum > pre_sum,
        "post-change draws must inflate the ratio: {post_sum} vs {pre_sum}"
    );
}
