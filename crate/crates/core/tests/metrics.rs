mod common;

use common::*;
use npmix_core::datasets::make_mog;
use npmix_core::metrics::{
    distance_matrix, eta, hellinger_diameter, hellinger_gaussian, hellinger_mixture, EtaOptions, SeparationReport,
};
use npmix_core::mixture::{GaussianComponent, GaussianMixture, MixingMeasure};
use npmix_core::quadrature::QuadratureSpec;
use npmix_core::Assignment;
use proptest::prelude::*;
use rand::Rng;
use rand_distr::StandardNormal;

fn n1(m: f64, v: f64) -> GaussianComponent {
    GaussianComponent::univariate(m, v).unwrap()
}

fn mix(parts: &[(f64, f64, f64)]) -> GaussianMixture {
    GaussianMixture::new(parts.iter().map(|p| p.0).collect(), parts.iter().map(|p| n1(p.1, p.2)).collect()).unwrap()
}

#[test]
fn identical_and_distant_gaussians() {
    assert_eq!(hellinger_gaussian(&n1(0.0, 1.0), &n1(0.0, 1.0)).unwrap(), 0.0);
    assert!(hellinger_gaussian(&n1(0.0, 1.0), &n1(20.0, 1.0)).unwrap() >= 0.999);
}

#[test]
fn unequal_variance_pair_matches_quadrature() {
    let (a, b) = (n1(0.0, 1.0), n1(1.0, 2.0));
    let bc = trapz_1d(|x| (pdf(&a, &[x]) * pdf(&b, &[x])).sqrt(), -20.0, 20.0, 40_001);
    let oracle = (1.0 - bc).sqrt();
    assert!((hellinger_gaussian(&a, &b).unwrap() - oracle).abs() < 1e-6);
}

#[test]
fn dimension_mismatch_is_an_error() {
    let b = GaussianComponent::isotropic(vec![0.0, 0.0], 1.0).unwrap();
    assert!(hellinger_gaussian(&n1(0.0, 1.0), &b).is_err());
}

#[test]
fn closed_form_agrees_with_quadrature_oracle_in_one_and_two_dims() {
    let mut r = rng(21);
    for i in 0..40 {
        let d = 1 + i % 2;
        let (a, b) = (random_component(&mut r, d), random_component(&mut r, d));
        let oracle = hellinger_oracle(&GaussianMixture::single(a.clone()), &GaussianMixture::single(b.clone()), if d == 1 { 20_001 } else { 801 });
        let h = hellinger_gaussian(&a, &b).unwrap();
        assert!((h - oracle).abs() < 1e-6, "pair {i}: {h} vs {oracle}");
    }
}

#[test]
fn mixture_distance_to_itself_is_zero() {
    let quad = QuadratureSpec::default();
    let p = random_mixture(&mut rng(5), 2, 3);
    assert!(hellinger_mixture(&p, &p, &quad).unwrap().value <= 1e-7);
}

#[test]
fn single_component_mixtures_agree_with_closed_form() {
    let quad = QuadratureSpec::default();
    let mut r = rng(8);
    for d in 1..=2 {
        for _ in 0..5 {
            let (a, b) = (random_component(&mut r, d), random_component(&mut r, d));
            let h = hellinger_mixture(&GaussianMixture::single(a.clone()), &GaussianMixture::single(b.clone()), &quad).unwrap();
            assert!((h.value - hellinger_gaussian(&a, &b).unwrap()).abs() < 1e-6);
        }
    }
}

#[test]
fn bimodal_versus_central_matches_importance_sampling() {
    let p = mix(&[(0.5, -5.0, 1.0), (0.5, 5.0, 1.0)]);
    let q = mix(&[(1.0, 0.0, 1.0)]);
    let h = hellinger_mixture(&p, &q, &QuadratureSpec::default()).unwrap().value;

    // BC = E_m[sqrt(p q) / m] with m = (p + q) / 2.
    let mut r = rng(99);
    let n = 1_000_000;
    let (mut s, mut s2) = (0.0, 0.0);
    for _ in 0..n {
        let z: f64 = r.sample(StandardNormal);
        let x = if r.random_bool(0.5) {
            if r.random_bool(0.5) { -5.0 + z } else { 5.0 + z }
        } else {
            z
        };
        let (fp, fq) = (mix_pdf(&p, &[x]), mix_pdf(&q, &[x]));
        let v = (fp * fq).sqrt() / (0.5 * (fp + fq));
        s += v;
        s2 += v * v;
    }
    let bc = s / n as f64;
    let se_bc = ((s2 / n as f64 - bc * bc) / n as f64).sqrt();
    let h_mc = (1.0 - bc).sqrt();
    let se_h = se_bc / (2.0 * h_mc);
    assert!((h - h_mc).abs() <= 3.0 * se_h, "quadrature {h}, Monte Carlo {h_mc} +- {se_h}");
}

#[test]
fn distance_matrix_examples() {
    let one = distance_matrix(&GaussianMixture::single(n1(0.0, 1.0))).unwrap();
    assert_eq!((one.len(), one.get(0, 0)), (1, 0.0));

    let c = GaussianComponent::isotropic(vec![1.0, 1.0], 0.5).unwrap();
    let dup = GaussianMixture::uniform(vec![c.clone(), n1_2d(4.0), c]).unwrap();
    let dm = distance_matrix(&dup).unwrap();
    assert_eq!(dm.get(0, 2), 0.0);
    assert_eq!(dm.get(2, 0), 0.0);

    let q = random_mixture(&mut rng(12), 2, 3);
    let dm = distance_matrix(&q).unwrap();
    for i in 0..3 {
        assert_eq!(dm.get(i, i), 0.0);
        for j in 0..3 {
            let want = hellinger_gaussian(&q.components()[i], &q.components()[j]).unwrap();
            assert_eq!(dm.get(i, j), want);
            assert_eq!(dm.get(i, j), dm.get(j, i));
        }
    }
}

fn n1_2d(m: f64) -> GaussianComponent {
    GaussianComponent::isotropic(vec![m, 0.0], 1.0).unwrap()
}

#[test]
fn distance_matrix_csv_has_one_row_per_component() {
    let dm = distance_matrix(&random_mixture(&mut rng(1), 1, 4)).unwrap();
    let mut buf = Vec::new();
    dm.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let rows: Vec<&str> = text.lines().collect();
    assert!(rows.len() >= 4);
    assert!(rows.iter().rev().take(4).all(|r| r.split(',').count() >= 4));
}

#[test]
fn diameter_of_singletons_and_pairs() {
    let quad = QuadratureSpec::default();
    assert_eq!(hellinger_diameter(&GaussianMixture::single(n1(0.0, 1.0)), 16, 0, &quad).unwrap(), 0.0);
    let (a, b) = (n1(0.0, 1.0), n1(1.5, 0.7));
    let pair = GaussianMixture::uniform(vec![a.clone(), b.clone()]).unwrap();
    assert!(hellinger_diameter(&pair, 16, 0, &quad).unwrap() >= hellinger_gaussian(&a, &b).unwrap());
}

#[test]
fn diameter_matches_simplex_grid_search() {
    let comps = vec![n1(-4.0, 1.0), n1(0.0, 0.5), n1(4.0, 1.5)];
    let omega = GaussianMixture::uniform(comps.clone()).unwrap();
    let est = hellinger_diameter(&omega, 64, 3, &QuadratureSpec::default()).unwrap();

    let steps = 20;
    let mut simplex = Vec::new();
    for i in 0..=steps {
        for j in 0..=(steps - i) {
            simplex.push([i as f64 / steps as f64, j as f64 / steps as f64, (steps - i - j) as f64 / steps as f64]);
        }
    }
    let xs: Vec<f64> = (0..4001).map(|t| -20.0 + 40.0 * t as f64 / 4000.0).collect();
    let dens: Vec<[f64; 3]> = xs.iter().map(|&x| [pdf(&comps[0], &[x]), pdf(&comps[1], &[x]), pdf(&comps[2], &[x])]).collect();
    let h = 40.0 / 4000.0;
    let mut best = 0.0_f64;
    for (s, u) in simplex.iter().enumerate() {
        for v in &simplex[s + 1..] {
            let bc: f64 = dens
                .iter()
                .enumerate()
                .map(|(t, f)| {
                    let p = u[0] * f[0] + u[1] * f[1] + u[2] * f[2];
                    let q = v[0] * f[0] + v[1] * f[1] + v[2] * f[2];
                    let w = if t == 0 || t == xs.len() - 1 { 0.5 } else { 1.0 };
                    w * (p * q).sqrt()
                })
                .sum::<f64>()
                * h;
            best = best.max((1.0 - bc).max(0.0).sqrt());
        }
    }
    assert!((est - best).abs() < 0.02, "estimate {est}, grid search {best}");
}

#[test]
fn exact_aggregates_have_no_approximation_error() {
    let lambda = make_mog(3, &[2, 3, 2], 20.0, 1.0, 2, 4).unwrap();
    let (fitted, alpha) = lambda.flatten();
    let opts = EtaOptions { n_dirichlet: 32, ..EtaOptions::default() };
    let rep = eta(&lambda, &fitted, &alpha, &opts).unwrap();
    assert_eq!(rep.approximation_term, 0.0);
    assert_eq!(rep.eta, rep.diameter_term);
}

#[test]
fn single_group_is_vacuously_separated() {
    let lambda = MixingMeasure::new(vec![1.0], vec![mix(&[(0.3, -1.0, 1.0), (0.7, 1.0, 0.5)])]).unwrap();
    let (fitted, alpha) = lambda.flatten();
    let rep = eta(&lambda, &fitted, &alpha, &EtaOptions { n_dirichlet: 16, ..Default::default() }).unwrap();
    assert!(rep.satisfied);
    assert_eq!(rep.min_between, f64::INFINITY);
    assert_eq!(rep.xi_margin, f64::INFINITY);
    let json = serde_json::to_value(&rep).unwrap();
    assert!(json["xi_margin"].is_null());
    let back: SeparationReport = serde_json::from_value(json).unwrap();
    assert_eq!(back, rep);
}

#[test]
fn well_separated_three_group_generator_is_clusterable() {
    let lambda = make_mog(3, &[3, 3, 3], 20.0, 1.0, 2, 0).unwrap();
    let (fitted, alpha) = lambda.flatten();
    let rep = eta(&lambda, &fitted, &alpha, &EtaOptions { n_dirichlet: 64, ..Default::default() }).unwrap();
    assert!(rep.satisfied, "{rep:?}");
    assert!(rep.xi_margin >= 0.5);
}

#[test]
fn mismatched_assignment_is_rejected() {
    let lambda = make_mog(2, &[2, 2], 20.0, 1.0, 1, 0).unwrap();
    let (fitted, _) = lambda.flatten();
    let opts = EtaOptions { n_dirichlet: 4, ..Default::default() };
    assert!(eta(&lambda, &fitted, &Assignment::constant(4), &opts).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn hellinger_is_a_metric(seed in any::<u64>(), d in 1usize..=3) {
        let mut r = rng(seed);
        let (a, b, c) = (random_component(&mut r, d), random_component(&mut r, d), random_component(&mut r, d));
        let ab = hellinger_gaussian(&a, &b).unwrap();
        prop_assert_eq!(ab, hellinger_gaussian(&b, &a).unwrap());
        prop_assert!((0.0..=1.0).contains(&ab));
        let ac = hellinger_gaussian(&a, &c).unwrap();
        let bc = hellinger_gaussian(&b, &c).unwrap();
        prop_assert!(ac <= ab + bc + 1e-9);
        prop_assert_eq!(hellinger_gaussian(&a, &a).unwrap(), 0.0);
    }

    #[test]
    fn distinct_parameters_have_positive_distance(seed in any::<u64>(), d in 1usize..=3, eps in 1e-4f64..1e-2) {
        let a = random_component(&mut rng(seed), d);
        let mut mean = a.mean().to_vec();
        mean[0] += eps;
        let b = GaussianComponent::new(mean, a.covariance().to_vec()).unwrap();
        prop_assert!(hellinger_gaussian(&a, &b).unwrap() > 0.0);
    }

    #[test]
    fn diameter_bounds_every_atom_pair(seed in any::<u64>(), m in 2usize..=4) {
        let omega = random_mixture(&mut rng(seed), 1, m);
        let est = hellinger_diameter(&omega, 8, seed, &QuadratureSpec::default()).unwrap();
        for a in omega.components() {
            for b in omega.components() {
                prop_assert!(est >= hellinger_gaussian(a, b).unwrap());
            }
        }
    }
}
