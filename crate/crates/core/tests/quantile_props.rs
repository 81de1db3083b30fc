use proptest::prelude::*;
use quantlet_core::quantile::{empirical_quantiles, PixelSample, ProbabilityGrid, Region};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

// Quantile at p by position (m+1)p, written from the definition with
// explicit clamping to the extreme order statistics.
fn oracle(values: &[f64], p: f64) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let m = sorted.len();
    let h = (m as f64 + 1.0) * p;
    if h <= 1.0 {
        return sorted[0];
    }
    if h >= m as f64 {
        return sorted[m - 1];
    }
    let lo = h.floor();
    let frac = h - lo;
    let k = lo as usize;
    sorted[k - 1] + frac * (sorted[k] - sorted[k - 1])
}

#[test]
fn matches_sort_and_interpolate_oracle_on_random_samples() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst: f64 = 0.0;
    for i in 0..100 {
        let m = rng.random_range(20..3000);
        let values: Vec<f64> = (0..m).map(|_| rng.random::<f64>() * 200.0 - 50.0).collect();
        let g = [8usize, 16, 64, 128][i % 4];
        let grid = ProbabilityGrid::standard(&[m], g).unwrap();
        let s = PixelSample::new(format!("r{i}"), Region::Lesion, values.clone()).unwrap();
        let q = empirical_quantiles(&s, &grid).unwrap();
        for (&p, &v) in grid.points().iter().zip(&q.values) {
            worst = worst.max((v - oracle(&values, p)).abs());
        }
    }
    assert!(worst <= 1e-12, "max deviation {worst}");
}

#[test]
fn sizes_from_twenty_to_five_thousand_share_one_grid() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let samples: Vec<PixelSample> = [20usize, 21, 350, 4999, 5000]
        .iter()
        .map(|&m| {
            let v = (0..m).map(|_| StandardNormal.sample(&mut rng)).collect();
            PixelSample::new(format!("m{m}"), Region::Peri, v).unwrap()
        })
        .collect();
    let sizes: Vec<usize> = samples.iter().map(|s| s.len()).collect();
    let grid = ProbabilityGrid::standard(&sizes, 128).unwrap();
    // the smallest sample sets the trim
    assert!((grid.delta() - 1.0 / 21.0).abs() < 1e-15);
    for s in &samples {
        let q = empirical_quantiles(s, &grid).unwrap();
        assert!(q.values.windows(2).all(|w| w[0] <= w[1]));
    }
}

#[test]
fn half_samples_stay_within_kolmogorov_band() {
    // Sampling half of m without replacement: the half-sample ECDF deviates
    // from the full ECDF like a KS statistic with effective size
    // n (m - 1) / (m - n). 1.628 is the 99% Kolmogorov critical value.
    let g = 128;
    let m = 10 * g * 2;
    let n = m / 2;
    let n_eff = n as f64 * (m as f64 - 1.0) / (m - n) as f64;
    let bound = 1.628 / n_eff.sqrt();
    let mut failures = 0;
    for seed in 0..50u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let values: Vec<f64> = (0..m).map(|_| StandardNormal.sample(&mut rng)).collect();
        let mut half = values.clone();
        half.shuffle(&mut rng);
        half.truncate(n);
        let grid = ProbabilityGrid::standard(&[m, n], g).unwrap();
        let full = empirical_quantiles(&PixelSample::new("f", Region::Liver, values.clone()).unwrap(), &grid).unwrap();
        let sub = empirical_quantiles(&PixelSample::new("h", Region::Liver, half.clone()).unwrap(), &grid).unwrap();
        let ecdf = |data: &[f64], x: f64| data.iter().filter(|&&v| v <= x).count() as f64 / data.len() as f64;
        let stat = full
            .values
            .iter()
            .zip(&sub.values)
            .map(|(&a, &b)| (ecdf(&values, a) - ecdf(&values, b)).abs())
            .fold(0.0, f64::max);
        if stat > bound {
            failures += 1;
        }
    }
    // at most 2 exceedances in 50 has probability about 0.99 under the 1% rate
    assert!(failures <= 2, "{failures} of 50 seeds outside the band");
}

fn sample_strategy() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1e3f64..1e3, 20..400)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn monotone_and_affine_equivariant(values in sample_strategy(), a in 0.01f64..50.0, b in -100.0f64..100.0) {
        let m = values.len();
        let grid = ProbabilityGrid::standard(&[m], 16).unwrap();
        let q = empirical_quantiles(&PixelSample::new("x", Region::Lesion, values.clone()).unwrap(), &grid).unwrap();
        prop_assert!(q.values.windows(2).all(|w| w[0] <= w[1]));

        let moved: Vec<f64> = values.iter().map(|v| a * v + b).collect();
        let qm = empirical_quantiles(&PixelSample::new("x", Region::Lesion, moved).unwrap(), &grid).unwrap();
        let scale = a * 1e3 + b.abs();
        for (u, v) in q.values.iter().zip(&qm.values) {
            prop_assert!((a * u + b - v).abs() <= 1e-12 * scale);
        }

        // power-of-two scaling is exact in floating point
        let doubled: Vec<f64> = values.iter().map(|v| 4.0 * v).collect();
        let qd = empirical_quantiles(&PixelSample::new("x", Region::Lesion, doubled).unwrap(), &grid).unwrap();
        for (u, v) in q.values.iter().zip(&qd.values) {
            prop_assert_eq!(4.0 * u, *v);
        }
    }

    #[test]
    fn input_order_is_irrelevant(values in sample_strategy(), seed in any::<u64>()) {
        let grid = ProbabilityGrid::standard(&[values.len()], 8).unwrap();
        let mut shuffled = values.clone();
        shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let a = empirical_quantiles(&PixelSample::new("x", Region::Peri, values).unwrap(), &grid).unwrap();
        let b = empirical_quantiles(&PixelSample::new("x", Region::Peri, shuffled).unwrap(), &grid).unwrap();
        prop_assert_eq!(a.values, b.values);
    }
}
