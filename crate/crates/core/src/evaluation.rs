//! Fixed-λ leave-one-out evaluation and confusion-matrix metrics.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::classifier::{Features, DEFAULT_THRESHOLD};
use crate::error::{Error, Result};
use crate::l1solver::{cv_select_lambda, sigmoid, CvOptions, CvPath, DesignMatrix, LogisticOptions, LogisticSolver};
use crate::par;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

impl ConfusionCounts {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn from_labels(y_true: &[u8], y_pred: &[u8]) -> Result<Self> {
        if y_true.len() != y_pred.len() {
            return Err(Error::schema(format!("{} truths vs {} predictions", y_true.len(), y_pred.len())));
        }
        let mut c = ConfusionCounts::default();
        for (&t, &p) in y_true.iter().zip(y_pred) {
            match (t, p) {
                (1, 1) => c.tp += 1,
                (0, 1) => c.fp += 1,
                (0, 0) => c.tn += 1,
                (1, 0) => c.fn_ += 1,
                _ => return Err(Error::schema(format!("non-binary label pair ({t}, {p})"))),
            }
        }
        Ok(c)
    }
}

/// Which quantity the F1 column reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum F1Mode {
    /// Harmonic mean of precision and sensitivity.
    #[default]
    PrecisionRecall,
    /// Harmonic mean of sensitivity and specificity.
    SensSpecHarmonic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub features: String,
    pub k_use: usize,
    /// Missing when the truth has no positives.
    pub sensitivity: Option<f64>,
    /// Missing when the truth has no negatives.
    pub specificity: Option<f64>,
    pub f1: f64,
    pub accuracy: f64,
    pub counts: ConfusionCounts,
}

fn ratio(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

fn harmonic(a: f64, b: f64) -> f64 {
    if a + b > 0.0 {
        2.0 * a * b / (a + b)
    } else {
        0.0
    }
}

impl MetricsRow {
    pub fn from_counts(c: ConfusionCounts, mode: F1Mode) -> Self {
        let sensitivity = ratio(c.tp, c.tp + c.fn_);
        let specificity = ratio(c.tn, c.tn + c.fp);
        let f1 = match mode {
            F1Mode::PrecisionRecall => harmonic(ratio(c.tp, c.tp + c.fp).unwrap_or(0.0), sensitivity.unwrap_or(0.0)),
            F1Mode::SensSpecHarmonic => harmonic(sensitivity.unwrap_or(0.0), specificity.unwrap_or(0.0)),
        };
        let accuracy = ratio(c.tp + c.tn, c.total()).unwrap_or(0.0);
        MetricsRow { features: String::new(), k_use: 0, sensitivity, specificity, f1, accuracy, counts: c }
    }

    pub fn labeled(mut self, features: impl Into<String>, k_use: usize) -> Self {
        self.features = features.into();
        self.k_use = k_use;
        self
    }
}

pub fn confusion_metrics(y_true: &[u8], y_pred: &[u8], mode: F1Mode) -> Result<MetricsRow> {
    Ok(MetricsRow::from_counts(ConfusionCounts::from_labels(y_true, y_pred)?, mode))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplePrediction {
    pub sample_id: String,
    pub y_true: u8,
    pub probability: f64,
    pub y_pred: u8,
}

/// Probability cut-off for calling a held-out sample positive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DecisionThreshold {
    Fixed(f64),
    /// The positive fraction of the training labels (written `"prevalence"`).
    Prevalence(PrevalenceTag),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PrevalenceTag {
    Prevalence,
}

impl DecisionThreshold {
    pub const PREVALENCE: DecisionThreshold = DecisionThreshold::Prevalence(PrevalenceTag::Prevalence);

    /// Cut-off for a model trained on labels with positive fraction `rate`.
    pub fn value(&self, rate: f64) -> f64 {
        match *self {
            DecisionThreshold::Fixed(t) => t,
            DecisionThreshold::Prevalence(_) if rate > 0.0 && rate < 1.0 => rate,
            DecisionThreshold::Prevalence(_) => DEFAULT_THRESHOLD,
        }
    }

    /// Class call for `probability`. Under the prevalence rule an
    /// intercept-only model predicts the training rate itself, so values
    /// within rounding of the cut-off count as positive.
    pub fn classify(&self, probability: f64, rate: f64) -> u8 {
        let cut = self.value(rate);
        let slack = match self {
            DecisionThreshold::Fixed(_) => 0.0,
            DecisionThreshold::Prevalence(_) => 1e-12,
        };
        u8::from(probability >= cut - slack)
    }
}

impl Default for DecisionThreshold {
    fn default() -> Self {
        DecisionThreshold::PREVALENCE
    }
}

/// How the full-cohort penalty is carried into each leave-one-out fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LambdaTransfer {
    /// Every fold is fitted at the same λ.
    Absolute,
    /// Every fold is fitted at the same fraction of its own λ_max.
    #[default]
    Relative,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
#[derive(Default)]
pub struct LoocvOptions {
    pub cv: CvOptions,
    /// Skip cross-validation and use this penalty.
    pub lambda: Option<f64>,
    pub transfer: LambdaTransfer,
    pub threshold: DecisionThreshold,
    pub f1_mode: F1Mode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoocvResult {
    pub lambda: f64,
    pub cv: Option<CvPath>,
    pub predictions: Vec<SamplePrediction>,
    pub metrics: MetricsRow,
}

/// Penalty applied to every leave-one-out fit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum FoldPenalty {
    Absolute(f64),
    /// Fraction of the fold's own λ_max.
    Fraction(f64),
}

/// λ* for the full cohort and the matching per-fold penalty.
pub(crate) fn select_penalty(
    features: &Features,
    options: &LoocvOptions,
) -> Result<(f64, Option<CvPath>, FoldPenalty)> {
    let n = features.design.nrows();
    if n < 3 {
        return Err(Error::precondition(format!("leave-one-out evaluation needs n >= 3, got {n}")));
    }
    let (lambda, cv) = match options.lambda {
        Some(l) => (l, None),
        None => {
            let path = cv_select_lambda(&features.design, &features.labels, &options.cv)?;
            (path.lambda_star, Some(path))
        }
    };
    // validates labels, including the both-classes requirement
    let full = LogisticSolver::with_options(&features.design, &features.labels, options.cv.solver)?;
    let penalty = match options.transfer {
        LambdaTransfer::Absolute => FoldPenalty::Absolute(lambda),
        LambdaTransfer::Relative => {
            let max = full.lambda_max()?;
            FoldPenalty::Fraction(if max > 0.0 { (lambda / max).min(1.0) } else { 1.0 })
        }
    };
    Ok((lambda, cv, penalty))
}

/// Probability for `row` from a model fitted on the training rows, paired
/// with the training positive rate. A single-class training set yields its
/// base rate.
pub(crate) fn held_out_probability(
    x: &DesignMatrix,
    y: &[f64],
    row: &[f64],
    penalty: FoldPenalty,
    solver: LogisticOptions,
) -> Result<(f64, f64)> {
    let ones = y.iter().filter(|&&v| v == 1.0).count();
    let rate = ones as f64 / y.len() as f64;
    if ones == 0 || ones == y.len() {
        return Ok((rate, rate));
    }
    let solver = LogisticSolver::with_options(x, y, solver)?;
    let lambda = match penalty {
        FoldPenalty::Absolute(l) => l,
        FoldPenalty::Fraction(r) => r * solver.lambda_max()?,
    };
    let fit = solver.fit(lambda, None)?;
    Ok((sigmoid(fit.linear_predictor(row)), rate))
}

pub(crate) fn collect_predictions(
    features: &Features,
    probs: Vec<Result<(f64, f64)>>,
    options: &LoocvOptions,
) -> Result<(Vec<SamplePrediction>, MetricsRow)> {
    let mut predictions = Vec::with_capacity(probs.len());
    for (i, p) in probs.into_iter().enumerate() {
        let (probability, rate) = p?;
        predictions.push(SamplePrediction {
            sample_id: features.sample_ids[i].clone(),
            y_true: features.labels[i] as u8,
            probability,
            y_pred: options.threshold.classify(probability, rate),
        });
    }
    let truth: Vec<u8> = predictions.iter().map(|p| p.y_true).collect();
    let pred: Vec<u8> = predictions.iter().map(|p| p.y_pred).collect();
    let metrics = confusion_metrics(&truth, &pred, options.f1_mode)?;
    Ok((predictions, metrics))
}

/// Leave-one-out evaluation at a single λ chosen once on the full cohort.
///
/// With [`LambdaTransfer::Relative`] each fold is fitted at the same
/// fraction of its own λ_max as λ* is of the full cohort's. If removing a
/// sample leaves a single-class training set, the held-out sample gets the
/// training base rate (0 or 1) as its probability.
pub fn loocv_evaluate(features: &Features, options: &LoocvOptions) -> Result<LoocvResult> {
    let (lambda, cv, penalty) = select_penalty(features, options)?;
    let n = features.design.nrows();
    let probs = par::map_range(n, |i| {
        let train: Vec<usize> = (0..n).filter(|&j| j != i).collect();
        let y: Vec<f64> = train.iter().map(|&j| features.labels[j]).collect();
        let x = features.design.select_rows(&train);
        held_out_probability(&x, &y, features.design.row(i), penalty, options.cv.solver)
    });
    let (predictions, metrics) = collect_predictions(features, probs, options)?;
    Ok(LoocvResult { lambda, cv, predictions, metrics })
}
