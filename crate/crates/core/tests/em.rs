mod common;

use common::*;
use npmix_core::em::{fit, loglik, EmConfig, FitResult};
use npmix_core::linkage::{group, Assignment};
use npmix_core::mixture::{GaussianComponent, GaussianMixture, LabeledSample};
use npmix_core::quadrature::QuadratureSpec;
use npmix_core::wasserstein;
use proptest::prelude::*;

fn exact_config(l: usize, seed: u64) -> EmConfig {
    EmConfig {
        cov_ridge: Some(0.0),
        weight_floor: Some(0.0),
        ..EmConfig::new(l, seed)
    }
}

fn three_blobs() -> GaussianMixture {
    GaussianMixture::new(
        vec![0.3, 0.3, 0.4],
        vec![
            GaussianComponent::isotropic(vec![-4.0, 0.0], 0.5).unwrap(),
            GaussianComponent::new(vec![4.0, 0.0], vec![0.8, 0.3, 0.3, 0.6]).unwrap(),
            GaussianComponent::isotropic(vec![0.0, 5.0], 1.0).unwrap(),
        ],
    )
    .unwrap()
}

#[test]
fn one_component_is_the_sample_moments() {
    let data = random_mixture(&mut rng(1), 2, 3).sample(3000, 2);
    let f = fit(&data, &exact_config(1, 0)).unwrap();
    let n = data.len() as f64;
    let mean: Vec<f64> = (0..2).map(|a| data.points().map(|x| x[a]).sum::<f64>() / n).collect();
    let c = &f.mixture.components()[0];
    for a in 0..2 {
        assert!((c.mean()[a] - mean[a]).abs() < 1e-9);
        for b in 0..2 {
            let s = data.points().map(|x| (x[a] - mean[a]) * (x[b] - mean[b])).sum::<f64>() / n;
            assert!((c.covariance()[a * 2 + b] - s).abs() < 1e-9);
        }
    }
    assert_eq!(f.mixture.weights(), &[1.0]);
}

#[test]
fn two_separated_components_are_located() {
    let truth = GaussianMixture::new(
        vec![0.5, 0.5],
        vec![GaussianComponent::univariate(-5.0, 1.0).unwrap(), GaussianComponent::univariate(5.0, 1.0).unwrap()],
    )
    .unwrap();
    let f = fit(&truth.sample(4000, 3), &EmConfig::new(2, 1)).unwrap();
    let mut means: Vec<f64> = f.mixture.components().iter().map(|c| c.mean()[0]).collect();
    means.sort_by(f64::total_cmp);
    assert!((means[0] + 5.0).abs() < 0.1 && (means[1] - 5.0).abs() < 0.1, "{means:?}");
    assert!(f.iterations > 0);
}

#[test]
fn fits_are_bit_identical_across_runs_and_thread_counts() {
    let data = three_blobs().sample(2000, 4);
    let cfg = EmConfig::new(6, 11);
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| fit(&data, &cfg).unwrap())
    };
    let a = run(1);
    assert_eq!(a, run(1));
    assert_eq!(a, run(4));
    assert_ne!(a, fit(&data, &EmConfig::new(6, 12)).unwrap());
}

#[test]
fn loglik_matches_explicit_sum() {
    let data = LabeledSample::from_rows(&[vec![0.0]], None).unwrap();
    let std_normal = GaussianMixture::single(GaussianComponent::univariate(0.0, 1.0).unwrap());
    assert!((loglik(&std_normal, &data).unwrap() + 0.5 * (2.0 * std::f64::consts::PI).ln()).abs() < 1e-14);

    let q = three_blobs();
    let data = q.sample(1000, 5);
    let want: f64 = data.points().map(|x| mix_pdf(&q, x).ln()).sum();
    assert!((loglik(&q, &data).unwrap() - want).abs() < 1e-9 * want.abs());
    assert!(loglik(&std_normal, &data).is_err());
}

#[test]
fn unregularized_trace_is_nondecreasing() {
    let data = three_blobs().sample(1500, 6);
    for seed in 0..3 {
        let f = fit(&data, &EmConfig { restarts: 1, ..exact_config(5, seed) }).unwrap();
        for w in f.trace.windows(2) {
            assert!(w[1] >= w[0] - 1e-8 * w[0].abs(), "seed {seed}: {} -> {}", w[0], w[1]);
        }
        assert!((f.trace.last().unwrap() - f.log_likelihood).abs() <= 1e-9 * f.log_likelihood.abs());
    }
}

#[test]
fn floor_and_ridge_are_respected() {
    let data = three_blobs().sample(1000, 7);
    let cfg = EmConfig {
        weight_floor: Some(0.05),
        cov_ridge: Some(0.2),
        ..EmConfig::new(12, 3)
    };
    let f = fit(&data, &cfg).unwrap();
    assert!(f.mixture.weights().iter().all(|&w| w >= 0.05 - 1e-12));
    assert!(f.mixture.components().iter().all(|c| c.min_eigenvalue() >= 0.2 - 1e-10));
    assert_eq!(f.config.weight_floor, Some(0.05));
}

#[test]
fn defaults_are_resolved_into_the_result() {
    let f = fit(&three_blobs().sample(500, 8), &EmConfig::new(4, 0)).unwrap();
    assert_eq!(f.config.weight_floor, Some(1.0 / 40.0));
    assert!(f.config.cov_ridge.unwrap() > 0.0);
}

#[test]
fn well_specified_fit_approaches_the_truth() {
    let truth = three_blobs();
    let atoms = group(&truth, &Assignment::identity(3)).unwrap();
    let quad = QuadratureSpec::default();
    let mean_w = |n: usize| {
        (0..3u64)
            .map(|s| {
                let f = fit(&truth.sample(n, 100 + s), &EmConfig::new(3, s)).unwrap();
                let est = group(&f.mixture, &Assignment::identity(3)).unwrap();
                wasserstein(&est, &atoms, 1.0, &quad).unwrap()
            })
            .sum::<f64>()
            / 3.0
    };
    let w: Vec<f64> = [500, 2000, 8000].iter().map(|&n| mean_w(n)).collect();
    assert!(w[0] > w[1] && w[1] > w[2], "{w:?}");
    assert!(w[2] < 0.05, "{w:?}");
}

#[test]
fn fit_result_json_round_trip() {
    let f = fit(&three_blobs().sample(300, 9), &EmConfig::new(3, 2)).unwrap();
    let text = serde_json::to_string(&f).unwrap();
    let value: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert!(value.get("weights").is_some() && value.get("fit_meta").is_some());
    let back: FitResult = serde_json::from_str(&text).unwrap();
    assert_eq!(back, f);
}

#[test]
fn invalid_requests_fail() {
    let data = three_blobs().sample(5, 1);
    assert!(fit(&data, &EmConfig::new(6, 0)).is_err());
    assert!(fit(&data, &EmConfig::new(0, 0)).is_err());
    assert!(fit(&data, &EmConfig { restarts: 0, ..EmConfig::new(2, 0) }).is_err());
    assert!(fit(&data, &EmConfig { weight_floor: Some(0.6), ..EmConfig::new(2, 0) }).is_err());
    assert!(fit(&data, &EmConfig { tol: 0.0, ..EmConfig::new(2, 0) }).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn fitted_weights_form_a_floored_simplex(seed in any::<u64>(), l in 1usize..=8, d in 1usize..=2) {
        let data = random_mixture(&mut rng(seed), d, 3).sample(400, seed);
        let f = fit(&data, &EmConfig { restarts: 2, max_iters: 50, ..EmConfig::new(l, seed) }).unwrap();
        let floor = f.config.weight_floor.unwrap();
        prop_assert_eq!(f.mixture.len(), l);
        prop_assert!((f.mixture.weights().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(f.mixture.weights().iter().all(|&w| w >= floor - 1e-12));
        prop_assert!(f.log_likelihood.is_finite());
    }
}
