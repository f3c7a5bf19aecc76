//! Generated scenarios against their ground truth.

use credal_core::datagen::{generate, gp_sample, random_scaled_polynomials, Case, GpSampler, ScenarioSpec};
use credal_core::estimators::ce2_kde;
use credal_core::simplex::{combine_dataset, point_in_hull};
use credal_core::{CredalDataset, RngStream};

fn scenarios(case: Case, n: usize, seed: u64) -> [ScenarioSpec; 2] {
    [ScenarioSpec::binary(case, n, seed), ScenarioSpec::multiclass(case, n, 5, 4, seed)]
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn hull_of(data: &CredalDataset, i: usize) -> Vec<&[f64]> {
    (0..data.m()).map(|m| data.prediction(i, m)).collect()
}

#[test]
fn null_truth_is_the_weighted_combination() {
    for case in [Case::H01, Case::H02] {
        for spec in scenarios(case, 300, 4) {
            let (data, truth) = generate(&spec).unwrap();
            let lambda = truth.lambda_star.as_ref().expect("null cases carry weights");
            let combined = combine_dataset(&data, lambda).unwrap();
            for (a, b) in combined.as_slice().iter().zip(truth.f_star.as_slice()) {
                assert!((a - b).abs() <= 1e-9);
            }
            if case == Case::H01 {
                let first = lambda.row(0);
                assert!((0..data.n()).all(|i| lambda.row(i) == first));
            }
        }
    }
}

#[test]
fn oracle_combination_is_calibrated() {
    // Binary only: in four or more classes the KDE bias alone exceeds 0.05 at this N.
    for case in [Case::H01, Case::H02] {
        for seed in [9, 10] {
            let spec = ScenarioSpec::binary(case, 2000, seed);
            let (data, truth) = generate(&spec).unwrap();
            let ce = ce2_kde(&truth.f_star, data.labels().unwrap(), 0.01, false).unwrap().value;
            assert!(ce <= 0.05, "{case:?} seed {seed}: ce2 {ce}");
        }
    }
}

#[test]
fn alternatives_lie_outside_the_hull() {
    for case in [Case::H11, Case::H12, Case::H13] {
        for spec in scenarios(case, 300, 2) {
            let (data, truth) = generate(&spec).unwrap();
            assert!(truth.lambda_star.is_none());
            for i in 0..data.n() {
                let proj = point_in_hull(truth.f_star.row(i), &hull_of(&data, i), 1e-12).unwrap();
                assert!(!proj.inside, "{case:?} {:?} row {i}", spec.family);
            }
        }
    }
}

#[test]
fn small_violation_is_bounded() {
    let spec = ScenarioSpec::binary(Case::H11, 500, 6);
    let (data, truth) = generate(&spec).unwrap();
    // a shift of e in P(class 1) moves the point e * sqrt(2) in the plane
    for d in truth.hull_distances(&data).unwrap() {
        let shift = d / 2f64.sqrt();
        assert!(shift > 0.0 && shift <= spec.epsilon_max + 1e-12, "{shift}");
    }
    let spec = ScenarioSpec::multiclass(Case::H11, 500, 5, 4, 6);
    let (data, truth) = generate(&spec).unwrap();
    for d in truth.hull_distances(&data).unwrap() {
        assert!(d > 0.0 && d <= spec.delta() * 2f64.sqrt(), "{d}");
    }
}

#[test]
fn strong_violation_is_farther_than_small() {
    for seed in 0..3 {
        for (weak, strong) in scenarios(Case::H11, 500, seed).into_iter().zip(scenarios(Case::H13, 500, seed)) {
            let (d1, t1) = generate(&weak).unwrap();
            let (d3, t3) = generate(&strong).unwrap();
            let a = mean(&t1.hull_distances(&d1).unwrap());
            let b = mean(&t3.hull_distances(&d3).unwrap());
            assert!(b > a, "{:?} seed {seed}: {b} vs {a}", weak.family);
        }
    }
}

/// Pools `chunks` datasets so the total reaches 1e5 instances; the GP
/// family is quadratic in N and cannot draw them in one go.
fn check_label_frequencies(spec: &ScenarioSpec, chunks: u64) {
    let k = spec.k;
    let (mut counts, mut expected, mut total) = (vec![0.0; k], vec![0.0; k], 0.0);
    for chunk in 0..chunks {
        let mut s = *spec;
        s.seed = spec.seed + chunk;
        let (data, truth) = generate(&s).unwrap();
        data.labels().unwrap().iter().for_each(|&y| counts[y] += 1.0);
        for row in truth.f_star.iter_rows() {
            expected.iter_mut().zip(row).for_each(|(e, p)| *e += p);
        }
        total += data.n() as f64;
    }
    assert_eq!(total, 100_000.0);
    for c in 0..k {
        let (o, e) = (counts[c] / total, expected[c] / total);
        assert!((o - e).abs() <= 0.01, "{:?} class {c}: {o} vs {e}", spec.family);
    }
}

#[test]
fn label_frequencies_follow_truth() {
    check_label_frequencies(&ScenarioSpec::multiclass(Case::H12, 100_000, 5, 4, 1), 1);
    check_label_frequencies(&ScenarioSpec::binary(Case::H12, 500, 1), 200);
}

#[test]
fn member_spread_grows_with_u() {
    let spread = |u: f64| {
        let mut spec = ScenarioSpec::multiclass(Case::H01, 400, 5, 4, 3);
        spec.u = u;
        let (data, _) = generate(&spec).unwrap();
        let mut total = 0.0;
        let mut pairs = 0.0;
        for i in 0..data.n() {
            let hull = hull_of(&data, i);
            for a in 0..hull.len() {
                for b in a + 1..hull.len() {
                    total += hull[a].iter().zip(hull[b]).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
                    pairs += 1.0;
                }
            }
        }
        total / pairs
    };
    let s: Vec<f64> = [0.1, 0.5, 2.0].into_iter().map(spread).collect();
    assert!(s[0] < s[1] && s[1] < s[2], "{s:?}");
}

#[test]
fn quadratic_weights_vary_across_inputs() {
    let xs: Vec<f64> = (0..50).map(|i| i as f64 / 10.0).collect();
    let varying = (0..100)
        .filter(|&seed| {
            let w = random_scaled_polynomials(2, 2, &xs, &mut RngStream::from_seed(seed).rng()).unwrap();
            let col: Vec<f64> = (0..xs.len()).map(|i| w.row(i)[0]).collect();
            col.iter().any(|&v| (v - col[0]).abs() > 1e-9)
        })
        .count();
    assert!(varying >= 99, "{varying}/100");
}

#[test]
fn gp_paths_are_min_max_scaled() {
    let xs: Vec<f64> = (0..80).map(|i| i as f64 * 5.0 / 80.0).collect();
    for seed in 0..10 {
        let path = gp_sample(&xs, 1.0, RngStream::from_seed(seed)).unwrap();
        let lo = path.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = path.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        assert_eq!((lo, hi), (0.0, 1.0));
        assert_eq!(path, gp_sample(&xs, 1.0, RngStream::from_seed(seed)).unwrap());
    }
}

#[test]
fn huge_length_scale_gives_flat_paths() {
    let xs: Vec<f64> = (0..60).map(|i| i as f64 / 12.0).collect();
    let sampler = GpSampler::new(&xs, 1e6).unwrap();
    let raw = sampler.sample_raw(&mut RngStream::from_seed(8).rng());
    let m = mean(&raw);
    let sd = (raw.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (raw.len() - 1) as f64).sqrt();
    assert!(sd < 1e-2, "sd {sd}");
}

#[test]
fn generation_is_seed_deterministic() {
    for spec in scenarios(Case::H13, 200, 12) {
        assert_eq!(generate(&spec).unwrap(), generate(&spec).unwrap());
    }
}
