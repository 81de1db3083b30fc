//! Scalar-on-quantile logistic classification: design assembly from
//! covariate and quantlet-coefficient blocks, penalized fitting, and
//! prediction.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::l1solver::{logistic_l1_fit, DesignMatrix, FitResult, LogisticSolver};
use crate::quantlet::QuantletBasis;

pub const DEFAULT_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Block {
    Demographics,
    Radiomics,
    /// Mean pixel value of the sample's primary region.
    Mean,
    /// Median pixel value of the sample's primary region.
    Median,
    Lesional,
    Peri,
    Whole,
}

impl Block {
    pub fn prefix(self) -> &'static str {
        match self {
            Block::Demographics => "demo",
            Block::Radiomics => "rad",
            Block::Mean => "mean",
            Block::Median => "median",
            Block::Lesional => "q_lesion",
            Block::Peri => "q_peri",
            Block::Whole => "q_whole",
        }
    }

    pub fn is_quantlet(self) -> bool {
        matches!(self, Block::Lesional | Block::Peri | Block::Whole)
    }
}

/// What to do when a record lacks a requested optional block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum MissingPolicy {
    #[default]
    Error,
    /// Fill with zeros (e.g. controls without a lesion in the peri block).
    ZeroFill,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectRecord {
    pub sample_id: String,
    pub label: u8,
    #[serde(default)]
    pub demographics: Vec<f64>,
    #[serde(default)]
    pub radiomics: Vec<f64>,
    #[serde(default)]
    pub mean: Option<f64>,
    #[serde(default)]
    pub median: Option<f64>,
    #[serde(default)]
    pub lesional: Option<Vec<f64>>,
    #[serde(default)]
    pub peri: Option<Vec<f64>>,
    #[serde(default)]
    pub whole: Option<Vec<f64>>,
}

impl SubjectRecord {
    pub fn new(sample_id: impl Into<String>, label: u8) -> Self {
        SubjectRecord {
            sample_id: sample_id.into(),
            label,
            demographics: Vec::new(),
            radiomics: Vec::new(),
            mean: None,
            median: None,
            lesional: None,
            peri: None,
            whole: None,
        }
    }

    fn block(&self, block: Block) -> Option<Vec<f64>> {
        match block {
            Block::Demographics => (!self.demographics.is_empty()).then(|| self.demographics.clone()),
            Block::Radiomics => (!self.radiomics.is_empty()).then(|| self.radiomics.clone()),
            Block::Mean => self.mean.map(|v| vec![v]),
            Block::Median => self.median.map(|v| vec![v]),
            Block::Lesional => self.lesional.clone(),
            Block::Peri => self.peri.clone(),
            Block::Whole => self.whole.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureConfig {
    pub blocks: Vec<Block>,
    /// Leading quantlet coefficients used from each coefficient block.
    pub k_use: usize,
    #[serde(default)]
    pub missing: MissingPolicy,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockRange {
    pub block: Block,
    pub start: usize,
    pub len: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureLayout {
    pub blocks: Vec<BlockRange>,
    pub names: Vec<String>,
}

impl FeatureLayout {
    pub fn ncols(&self) -> usize {
        self.names.len()
    }

    pub fn range(&self, block: Block) -> Option<&BlockRange> {
        self.blocks.iter().find(|r| r.block == block)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Features {
    pub design: DesignMatrix,
    pub labels: Vec<f64>,
    pub sample_ids: Vec<String>,
    pub layout: FeatureLayout,
}

fn block_width(records: &[SubjectRecord], block: Block, k_use: usize, missing: MissingPolicy) -> Result<usize> {
    let mut width: Option<usize> = None;
    for r in records {
        match r.block(block) {
            Some(v) => match width {
                None => width = Some(v.len()),
                Some(w) if w != v.len() => {
                    return Err(Error::schema(format!(
                        "block `{}` has {} values for `{}` but {w} elsewhere",
                        block.prefix(),
                        v.len(),
                        r.sample_id
                    )))
                }
                _ => {}
            },
            None if missing == MissingPolicy::Error => {
                return Err(Error::schema(format!("record `{}` lacks block `{}`", r.sample_id, block.prefix())))
            }
            None => {}
        }
    }
    let width = width.ok_or_else(|| Error::schema(format!("no record provides block `{}`", block.prefix())))?;
    if block.is_quantlet() {
        if k_use > width {
            return Err(Error::precondition(format!(
                "K_use = {k_use} exceeds the {width} coefficients of block `{}`",
                block.prefix()
            )));
        }
        Ok(k_use)
    } else {
        Ok(width)
    }
}

/// Stacks the requested blocks, in the order given, into a design matrix.
/// Quantlet blocks contribute their first `k_use` coefficients.
pub fn assemble_features(records: &[SubjectRecord], config: &FeatureConfig) -> Result<Features> {
    if records.is_empty() {
        return Err(Error::schema("no records"));
    }
    if config.blocks.is_empty() {
        return Err(Error::config("no feature blocks requested"));
    }
    if let Some(r) = records.iter().find(|r| r.label > 1) {
        return Err(Error::schema(format!("record `{}` has label {} (expected 0 or 1)", r.sample_id, r.label)));
    }
    let mut ranges = Vec::new();
    let mut names = Vec::new();
    let mut start = 0;
    for (pos, &block) in config.blocks.iter().enumerate() {
        if config.blocks[..pos].contains(&block) {
            return Err(Error::config(format!("block `{}` requested twice", block.prefix())));
        }
        let len = block_width(records, block, config.k_use, config.missing)?;
        match block {
            Block::Mean | Block::Median => names.push(block.prefix().to_string()),
            _ => names.extend((1..=len).map(|k| format!("{}_{k}", block.prefix()))),
        }
        ranges.push(BlockRange { block, start, len });
        start += len;
    }
    let d = start;
    let mut values = Vec::with_capacity(records.len() * d);
    for r in records {
        for range in &ranges {
            match r.block(range.block) {
                Some(v) => values.extend_from_slice(&v[..range.len]),
                None => values.extend(core::iter::repeat_n(0.0, range.len)),
            }
        }
    }
    let design = DesignMatrix::new(records.len(), d, values, names.clone())?;
    Ok(Features {
        design,
        labels: records.iter().map(|r| f64::from(r.label)).collect(),
        sample_ids: records.iter().map(|r| r.sample_id.clone()).collect(),
        layout: FeatureLayout { blocks: ranges, names },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierFit {
    pub fit: FitResult,
    pub layout: FeatureLayout,
    pub threshold: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub probability: f64,
    pub class: u8,
}

pub fn fit_model(features: &Features, lambda: f64) -> Result<ClassifierFit> {
    let fit = logistic_l1_fit(&features.design, &features.labels, lambda)?;
    Ok(ClassifierFit { fit, layout: features.layout.clone(), threshold: DEFAULT_THRESHOLD })
}

/// As [`fit_model`] with an already-built solver (shares standardization
/// work across repeated fits on one design).
pub fn fit_model_with(solver: &LogisticSolver, layout: &FeatureLayout, lambda: f64) -> Result<ClassifierFit> {
    Ok(ClassifierFit { fit: solver.fit(lambda, None)?, layout: layout.clone(), threshold: DEFAULT_THRESHOLD })
}

fn inverse_logit(t: f64) -> f64 {
    crate::l1solver::sigmoid(t)
}

impl ClassifierFit {
    pub fn predict(&self, row: &[f64]) -> Result<Prediction> {
        if row.len() != self.layout.ncols() {
            return Err(Error::schema(format!(
                "feature row has {} values, model expects {}",
                row.len(),
                self.layout.ncols()
            )));
        }
        let probability = inverse_logit(self.fit.linear_predictor(row));
        Ok(Prediction { probability, class: u8::from(probability >= self.threshold) })
    }

    /// Probability computed through the standardized representation.
    pub fn probability_standardized(&self, row: &[f64]) -> f64 {
        inverse_logit(self.fit.linear_predictor_standardized(row))
    }

    /// Functional effect `β̂(p) = Σ_k η̂_k ψ_k(p)` of a quantlet block.
    pub fn functional_effect(&self, block: Block, basis: &QuantletBasis) -> Result<Vec<f64>> {
        let range = self
            .layout
            .range(block)
            .filter(|r| r.block.is_quantlet())
            .ok_or_else(|| Error::schema(format!("model has no quantlet block `{}`", block.prefix())))?;
        if range.len > basis.k() {
            return Err(Error::precondition("basis has fewer rows than the block uses"));
        }
        Ok(basis.reconstruct(&self.fit.coefficients[range.start..range.start + range.len]))
    }
}
