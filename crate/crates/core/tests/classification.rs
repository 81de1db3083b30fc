mod common;

use common::equal_mean_spec;
use quantlet_core::classifier::*;
use quantlet_core::evaluation::*;
use quantlet_core::l1solver::{cv_select_lambda, CvOptions, DesignMatrix};
use quantlet_core::pipeline::*;
use quantlet_core::quantile::Region;
use quantlet_core::quantlet::QuantletConfig;
use quantlet_core::synth::generate_cohort;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn single_feature(values: &[f64], labels: &[f64]) -> Features {
    let rows: Vec<Vec<f64>> = values.iter().map(|&v| vec![v]).collect();
    Features {
        design: DesignMatrix::from_rows_unnamed(&rows).unwrap(),
        labels: labels.to_vec(),
        sample_ids: (0..values.len()).map(|i| format!("s{i}")).collect(),
        layout: FeatureLayout {
            blocks: vec![BlockRange { block: Block::Radiomics, start: 0, len: 1 }],
            names: vec!["x".into()],
        },
    }
}

/// Balanced cohort whose feature is `shift·label + N(0, 1)`.
fn shifted_feature(n: usize, shift: f64, seed: u64) -> (Vec<f64>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let labels: Vec<f64> = (0..n).map(|i| (i % 2) as f64).collect();
    let x = labels
        .iter()
        .map(|&l| {
            let z: f64 = StandardNormal.sample(&mut rng);
            shift * l + z
        })
        .collect();
    (x, labels)
}

fn quantlet_records(n_per_class: usize, seed: u64) -> (Vec<SubjectRecord>, RegionOutput) {
    let cohort = generate_cohort(&equal_mean_spec(n_per_class, [100, 2000], seed)).unwrap();
    let mut records = cohort.records.clone();
    let mut out = learn_and_attach(
        &cohort.samples,
        &mut records,
        |_| 128,
        &DictionaryConfig::default(),
        &QuantletConfig::default(),
    )
    .unwrap();
    (records, out.remove(&Region::Lesion).unwrap())
}

#[test]
fn shape_only_signal_is_recovered() {
    let mut hits = 0;
    for seed in 0..20u64 {
        let (records, region) = quantlet_records(40, 100 + seed);
        let k = region.model.learned.basis.k().min(10);
        let f = assemble_features(
            &records,
            &FeatureConfig { blocks: vec![Block::Lesional], k_use: k, missing: MissingPolicy::Error },
        )
        .unwrap();
        let cv = cv_select_lambda(&f.design, &f.labels, &CvOptions { seed, ..Default::default() }).unwrap();
        let model = fit_model(&f, cv.lambda_star).unwrap();
        if model.fit.coefficients.iter().any(|&c| c != 0.0) {
            hits += 1;
        }
    }
    assert!(hits >= 18, "signal found on {hits} of 20 seeds");
}

#[test]
fn functional_effect_projects_back_to_coefficients() {
    let (records, region) = quantlet_records(30, 7);
    let basis = &region.model.learned.basis;
    let k = basis.k().min(10);
    let f = assemble_features(
        &records,
        &FeatureConfig { blocks: vec![Block::Lesional], k_use: k, missing: MissingPolicy::Error },
    )
    .unwrap();
    let cv = cv_select_lambda(&f.design, &f.labels, &CvOptions::default()).unwrap();
    let model = fit_model(&f, cv.lambda_star).unwrap();
    let beta = model.functional_effect(Block::Lesional, basis).unwrap();
    for (kk, row) in basis.psi.iter().enumerate().take(k) {
        let eta = basis.grid.inner(&beta, row);
        assert!((eta - model.fit.coefficients[kk]).abs() <= 1e-8, "k={kk}");
    }
}

#[test]
fn heavy_penalty_predicts_the_base_rate() {
    let (x, mut y) = shifted_feature(50, 2.0, 3);
    y[0] = 1.0; // 26 positives of 50
    let f = single_feature(&x, &y);
    let model = fit_model(&f, 1e6).unwrap();
    let rate = y.iter().sum::<f64>() / y.len() as f64;
    for row in f.design.rows() {
        let p = model.predict(row).unwrap().probability;
        assert!((p - rate).abs() < 1e-12, "{p} vs {rate}");
    }
}

#[test]
fn rescaling_a_column_leaves_classes_unchanged() {
    let (x, y) = shifted_feature(60, 1.5, 11);
    let f = single_feature(&x, &y);
    let scaled: Vec<f64> = x.iter().map(|v| 37.5 * v).collect();
    let g = single_feature(&scaled, &y);
    let opts = CvOptions { seed: 4, ..Default::default() };
    let a = fit_model(&f, cv_select_lambda(&f.design, &f.labels, &opts).unwrap().lambda_star).unwrap();
    let b = fit_model(&g, cv_select_lambda(&g.design, &g.labels, &opts).unwrap().lambda_star).unwrap();
    for (r, s) in f.design.rows().zip(g.design.rows()) {
        let (pa, pb) = (a.predict(r).unwrap(), b.predict(s).unwrap());
        assert_eq!(pa.class, pb.class);
        assert!((pa.probability - pb.probability).abs() < 1e-9);
    }
}

#[test]
fn separable_cohort_scores_high() {
    let (x, y) = shifted_feature(60, 8.0, 1);
    let r = loocv_evaluate(&single_feature(&x, &y), &LoocvOptions::default()).unwrap();
    assert_eq!(r.predictions.len(), 60);
    assert!(r.metrics.accuracy >= 0.95, "{}", r.metrics.accuracy);
}

#[test]
fn shuffled_labels_score_near_chance() {
    let mut inside = 0;
    for seed in 0..20u64 {
        let (x, mut y) = shifted_feature(60, 3.0, seed);
        y.shuffle(&mut ChaCha8Rng::seed_from_u64(1000 + seed));
        let opts = LoocvOptions { cv: CvOptions { seed, ..Default::default() }, ..Default::default() };
        let acc = loocv_evaluate(&single_feature(&x, &y), &opts).unwrap().metrics.accuracy;
        if (0.35..=0.65).contains(&acc) {
            inside += 1;
        }
    }
    assert!(inside >= 18, "{inside} of 20 seeds within [0.35, 0.65]");
}

#[test]
fn intercept_only_folds_misclassify_everything_under_the_literal_protocol() {
    // Removing a positive drops the training rate below 0.5, so an
    // intercept-only model calls it negative, and vice versa.
    let (x, y) = shifted_feature(20, 0.0, 2);
    let f = single_feature(&x, &y);
    let literal = LoocvOptions {
        lambda: Some(1e6),
        transfer: LambdaTransfer::Absolute,
        threshold: DecisionThreshold::Fixed(0.5),
        ..Default::default()
    };
    assert_eq!(loocv_evaluate(&f, &literal).unwrap().metrics.accuracy, 0.0);
    let default = LoocvOptions { lambda: Some(1e6), ..Default::default() };
    assert_eq!(loocv_evaluate(&f, &default).unwrap().metrics.accuracy, 0.5);
}

#[test]
fn three_samples_give_three_predictions() {
    let f = single_feature(&[0.1, 2.0, 0.4], &[0.0, 1.0, 0.0]);
    let r = loocv_evaluate(&f, &LoocvOptions { lambda: Some(0.01), ..Default::default() }).unwrap();
    assert_eq!(r.predictions.len(), 3);
    assert_eq!(r.predictions.iter().map(|p| p.sample_id.as_str()).collect::<Vec<_>>(), ["s0", "s1", "s2"]);
    // the lone positive leaves a single-class training set
    assert_eq!(r.predictions[1].probability, 0.0);
}

#[test]
fn fold_internal_bases_still_separate_shapes() {
    let cohort = generate_cohort(&equal_mean_spec(15, [100, 1000], 21)).unwrap();
    let features = FeatureConfig { blocks: vec![Block::Lesional], k_use: 6, missing: MissingPolicy::Error };
    let dictionary = DictionaryConfig { k0: 150, ..Default::default() };
    let r = fold_internal_loocv(
        &cohort.samples,
        &cohort.records,
        |_| 64,
        &dictionary,
        &QuantletConfig::default(),
        &features,
        &LoocvOptions::default(),
    )
    .unwrap();
    assert_eq!(r.predictions.len(), 30);
    assert!(r.metrics.accuracy >= 0.8, "{}", r.metrics.accuracy);
}
