mod common;

use common::*;
use npmix_core::datasets::{generate, generate_seeded, make_mog, sample_group, target_mixing, DatasetName, DatasetSpec};
use npmix_core::metrics::{eta, EtaOptions};
use proptest::prelude::*;
use rand::Rng;

fn label_counts(labels: &[usize], k: usize) -> Vec<usize> {
    let mut c = vec![0; k];
    for &l in labels {
        c[l] += 1;
    }
    c
}

/// Two-sample Kolmogorov-Smirnov statistic.
fn ks_statistic(mut a: Vec<f64>, mut b: Vec<f64>) -> f64 {
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / a.len() as f64 - j as f64 / b.len() as f64).abs());
    }
    d
}

#[test]
fn every_name_parses_and_reports_its_shape() {
    let shapes = [(4, 1), (3, 1), (2, 1), (3, 1), (2, 2), (2, 2), (6, 2), (3, 2)];
    for (name, (k, d)) in DatasetName::ALL.into_iter().zip(shapes) {
        assert_eq!(name.as_str().parse::<DatasetName>().unwrap(), name);
        let spec = DatasetSpec::new(name, 0);
        assert_eq!((spec.k().unwrap(), spec.dim().unwrap()), (k, d), "{name}");
        let s = generate(&spec, 50).unwrap();
        assert_eq!((s.len(), s.dim()), (50, d));
        assert!(s.labels().unwrap().iter().all(|&l| l < k));
    }
    assert!("moons".parse::<DatasetName>().is_err());
}

#[test]
fn balanced_moons_frequencies() {
    let s = generate(&DatasetSpec::new(DatasetName::MoonsBalanced, 1), 10_000).unwrap();
    let c = label_counts(s.labels().unwrap(), 2);
    assert!((c[0] as f64 / 1e4 - 0.5).abs() <= 0.02, "{c:?}");
    let s = generate(&DatasetSpec::new(DatasetName::MoonsUnbalanced, 1), 10_000).unwrap();
    let c = label_counts(s.labels().unwrap(), 2);
    assert!((c[0] as f64 / 1e4 - 0.85).abs() <= 0.02, "{c:?}");
}

#[test]
fn poly_supports_are_disjoint() {
    let s = generate(&DatasetSpec::new(DatasetName::Poly, 2), 10_000).unwrap();
    let labels = s.labels().unwrap();
    let xs = |k| s.points().zip(labels).filter(move |(_, &l)| l == k).map(|(x, _)| x[0]);
    let max0 = xs(0).fold(f64::NEG_INFINITY, f64::max);
    let min1 = xs(1).fold(f64::INFINITY, f64::min);
    assert!(min1 > max0, "{max0} vs {min1}");
    assert!(xs(0).all(|x| (-2.2..=-0.2).contains(&x)));
    assert!(xs(1).all(|x| (0.2..=1.2).contains(&x)));
}

#[test]
fn gamma_group_mean() {
    let s = generate(&DatasetSpec::new(DatasetName::GaussGamma, 3), 100_000).unwrap();
    let labels = s.labels().unwrap();
    let v: Vec<f64> = s.points().zip(labels).filter(|(_, &l)| l == 2).map(|(x, _)| x[0]).collect();
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    // shape 3 times scale 1, shifted by 4
    assert!((mean - 7.0).abs() <= 0.07, "{mean}");
}

#[test]
fn seeds_determine_samples() {
    for name in DatasetName::ALL {
        let spec = DatasetSpec::new(name, 5);
        assert_eq!(generate(&spec, 200).unwrap(), generate(&spec, 200).unwrap(), "{name}");
        assert_eq!(generate(&spec, 200).unwrap(), generate_seeded(&spec, 200, 5).unwrap());
        assert_ne!(generate(&spec, 200).unwrap(), generate_seeded(&spec, 200, 6).unwrap(), "{name}");
    }
}

/// Every (dataset, label, axis) marginal is tested; the 5% level applies to
/// the whole family through a Bonferroni split.
#[test]
fn labels_follow_their_group_sampler() {
    let n = 10_000;
    let tests: usize = DatasetName::ALL
        .iter()
        .map(|&name| {
            let spec = DatasetSpec::new(name, 8);
            spec.k().unwrap() * spec.dim().unwrap()
        })
        .sum();
    let alpha = 0.05 / tests as f64;
    let c_alpha = (-(alpha / 2.0).ln() / 2.0).sqrt();
    for name in DatasetName::ALL {
        let spec = DatasetSpec::new(name, 8);
        let k = spec.k().unwrap();
        let d = spec.dim().unwrap();
        let s = generate(&spec, n * k).unwrap();
        let labels = s.labels().unwrap();
        for label in 0..k {
            let reference = sample_group(&spec, label, n, 1000 + label as u64).unwrap();
            for axis in 0..d {
                let a: Vec<f64> = s.points().zip(labels).filter(|(_, &l)| l == label).map(|(x, _)| x[axis]).collect();
                let b: Vec<f64> = reference.points().map(|x| x[axis]).collect();
                let (na, nb) = (a.len() as f64, b.len() as f64);
                let critical = c_alpha * ((na + nb) / (na * nb)).sqrt();
                let stat = ks_statistic(a, b);
                assert!(stat < critical, "{name} label {label} axis {axis}: D = {stat}, critical {critical}");
            }
        }
    }
}

#[test]
fn target_has_six_groups_and_143_components() {
    let m = target_mixing();
    assert_eq!(m.len(), 6);
    assert_eq!(m.atoms().iter().map(|a| a.len()).sum::<usize>(), 143);
    let spec = DatasetSpec::new(DatasetName::Target, 0);
    assert_eq!(spec.mixing_measure().unwrap().unwrap(), m);
    let s = generate(&spec, 20_000).unwrap();
    assert!(label_counts(s.labels().unwrap(), 6).iter().all(|&c| c > 0));
}

#[test]
fn single_group_family() {
    let m = make_mog(1, &[4], 10.0, 1.0, 2, 0).unwrap();
    assert_eq!(m.len(), 1);
    assert_eq!(m.atoms()[0].len(), 4);
}

#[test]
fn wide_gap_is_separated_and_narrow_gap_is_not() {
    let opts = EtaOptions {
        n_dirichlet: 64,
        ..Default::default()
    };
    let wide = make_mog(3, &[3, 3, 3], 20.0, 1.0, 2, 0).unwrap();
    let (q, alpha) = wide.flatten();
    let rep = eta(&wide, &q, &alpha, &opts).unwrap();
    assert!(rep.satisfied && rep.xi_margin >= 0.5, "{rep:?}");

    let narrow = make_mog(2, &[3, 3], 0.5, 1.0, 2, 0).unwrap();
    let (q, alpha) = narrow.flatten();
    assert!(!eta(&narrow, &q, &alpha, &opts).unwrap().satisfied);
}

#[test]
fn invalid_specs_are_rejected() {
    assert!(make_mog(0, &[], 1.0, 1.0, 1, 0).is_err());
    assert!(make_mog(2, &[1], 1.0, 1.0, 1, 0).is_err());
    assert!(make_mog(2, &[1, 0], 1.0, 1.0, 1, 0).is_err());
    assert!(make_mog(2, &[1, 1], 0.0, 1.0, 1, 0).is_err());
    let moons = DatasetSpec::new(DatasetName::MoonsBalanced, 0);
    assert!(moons.clone().with_param("gap", 1.0).validate().is_err());
    assert!(moons.clone().with_param("noise", -1.0).validate().is_err());
    assert!(generate(&moons, 1).is_err());
    let mog = DatasetSpec::new(DatasetName::MogFamily, 0);
    assert!(mog.clone().with_param("k", 2.5).validate().is_err());
    assert!(mog.clone().with_param("family_seed", -1.0).validate().is_err());
    assert!(sample_group(&moons, 2, 10, 0).is_err());
    let json = r#"{"name":"mog_family","params":{"k":2,"d":1},"seed":4}"#;
    let spec: DatasetSpec = serde_json::from_str(json).unwrap();
    assert_eq!((spec.k().unwrap(), spec.dim().unwrap(), spec.seed), (2, 1, 4));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn families_keep_groups_apart(seed in any::<u64>(), d in 1usize..=3, gap in 1.0f64..40.0, scale in 0.2f64..3.0) {
        let mut r = rng(seed);
        let k = r.random_range(1..=5);
        let atoms: Vec<usize> = (0..k).map(|_| r.random_range(1..=4)).collect();
        let m = make_mog(k, &atoms, gap, scale, d, seed).unwrap();
        prop_assert_eq!(m.len(), k);
        prop_assert!((m.weights().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        for (a, &count) in m.atoms().iter().zip(&atoms) {
            prop_assert_eq!(a.len(), count);
            prop_assert_eq!(a.dim(), d);
        }
        for i in 0..k {
            for j in 0..i {
                for ci in m.atoms()[i].components() {
                    prop_assert!(!m.atoms()[j].components().contains(ci));
                }
            }
        }
    }
}
