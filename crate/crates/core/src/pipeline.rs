//! Glue between the stages: grouping samples by region, learning one basis
//! per region, and turning coefficients into classifier records.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::classifier::{assemble_features, Block, FeatureConfig, SubjectRecord};
use crate::dictionary::{build_dictionary, OvercompleteDictionary, DEFAULT_J, DEFAULT_K0};
use crate::error::{Error, Result};
use crate::evaluation::{collect_predictions, held_out_probability, select_penalty, LoocvOptions, LoocvResult};
use crate::par;
use crate::quantile::{empirical_quantiles, PixelSample, ProbabilityGrid, QuantileFunction, Region};
use crate::quantlet::{learn_basis, project_coefficients, LearnedBasis, QuantletCoefficients, QuantletConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DictionaryConfig {
    pub k0: usize,
    pub j: f64,
    pub seed: u64,
}

impl Default for DictionaryConfig {
    fn default() -> Self {
        DictionaryConfig { k0: DEFAULT_K0, j: DEFAULT_J, seed: 0 }
    }
}

impl Block {
    /// Coefficient block fed by samples from `region`.
    pub fn for_region(region: Region) -> Block {
        match region {
            Region::Lesion => Block::Lesional,
            Region::Peri => Block::Peri,
            Region::Liver => Block::Whole,
        }
    }
}

/// Quantile functions of same-region samples on their standardized grid.
pub fn quantile_functions(
    samples: &[&PixelSample],
    grid_size: usize,
) -> Result<(ProbabilityGrid, Vec<QuantileFunction>)> {
    if let Some(s) = samples.iter().find(|s| s.region != samples[0].region) {
        return Err(Error::schema(format!(
            "sample `{}` is {} but the batch is {}",
            s.sample_id, s.region, samples[0].region
        )));
    }
    let sizes: Vec<usize> = samples.iter().map(|s| s.values.len()).collect();
    let grid = ProbabilityGrid::standard(&sizes, grid_size)?;
    let qs = par::map(samples, |s| empirical_quantiles(s, &grid)).into_iter().collect::<Result<Vec<_>>>()?;
    Ok((grid, qs))
}

/// Samples grouped by region, each group in input order.
pub fn group_by_region(samples: &[PixelSample]) -> BTreeMap<Region, Vec<&PixelSample>> {
    let mut groups: BTreeMap<Region, Vec<&PixelSample>> = BTreeMap::new();
    for s in samples {
        groups.entry(s.region).or_default().push(s);
    }
    groups
}

/// A learned basis together with the grid and dictionary behind it.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionModel {
    pub region: Region,
    pub dictionary: OvercompleteDictionary,
    pub learned: LearnedBasis,
}

pub fn learn_region_model(
    region: Region,
    grid: &ProbabilityGrid,
    qs: &[QuantileFunction],
    dictionary: &DictionaryConfig,
    quantlet: &QuantletConfig,
) -> Result<RegionModel> {
    let dict = build_dictionary(grid, dictionary.k0, dictionary.j, dictionary.seed)?;
    let learned = learn_basis(qs, &dict, quantlet)?;
    Ok(RegionModel { region, dictionary: dict, learned })
}

pub fn project_all(qs: &[QuantileFunction], model: &RegionModel) -> Result<Vec<QuantletCoefficients>> {
    qs.iter().map(|q| project_coefficients(q, &model.learned.basis)).collect()
}

/// Stores each coefficient vector in the matching record's block. Records
/// without coefficients are left untouched.
pub fn attach_coefficients(records: &mut [SubjectRecord], coefs: &[QuantletCoefficients]) -> Result<()> {
    let index: BTreeMap<String, usize> = records.iter().enumerate().map(|(i, r)| (r.sample_id.clone(), i)).collect();
    for c in coefs {
        let i = *index
            .get(&c.sample_id)
            .ok_or_else(|| Error::schema(format!("coefficients for unknown sample `{}`", c.sample_id)))?;
        let slot = match Block::for_region(c.region) {
            Block::Lesional => &mut records[i].lesional,
            Block::Peri => &mut records[i].peri,
            _ => &mut records[i].whole,
        };
        if slot.is_some() {
            return Err(Error::schema(format!("duplicate {} coefficients for `{}`", c.region, c.sample_id)));
        }
        *slot = Some(c.coefficients.clone());
    }
    Ok(())
}

/// Per-region outcome of [`learn_and_attach`].
#[derive(Debug, Clone, PartialEq)]
pub struct RegionOutput {
    pub grid: ProbabilityGrid,
    pub quantiles: Vec<QuantileFunction>,
    pub model: RegionModel,
    pub coefficients: Vec<QuantletCoefficients>,
}

/// Learns one basis per region present in `samples` on all of them, and
/// attaches the projected coefficients to `records`.
pub fn learn_and_attach(
    samples: &[PixelSample],
    records: &mut [SubjectRecord],
    grid_size: impl Fn(Region) -> usize,
    dictionary: &DictionaryConfig,
    quantlet: &QuantletConfig,
) -> Result<BTreeMap<Region, RegionOutput>> {
    let mut out = BTreeMap::new();
    for (region, group) in group_by_region(samples) {
        let (grid, quantiles) = quantile_functions(&group, grid_size(region))?;
        let model = learn_region_model(region, &grid, &quantiles, dictionary, quantlet)?;
        let coefficients = project_all(&quantiles, &model)?;
        attach_coefficients(records, &coefficients)?;
        out.insert(region, RegionOutput { grid, quantiles, model, coefficients });
    }
    Ok(out)
}

/// Sample ids in `records` that have no coefficients for `block`.
pub fn missing_block(records: &[SubjectRecord], block: Block) -> Vec<String> {
    records
        .iter()
        .filter(|r| match block {
            Block::Lesional => r.lesional.is_none(),
            Block::Peri => r.peri.is_none(),
            Block::Whole => r.whole.is_none(),
            _ => false,
        })
        .map(|r| r.sample_id.clone())
        .collect()
}

/// Leave-one-out evaluation in which every fold learns its own bases from
/// the training samples alone, so the held-out subject never influences the
/// quantlets it is scored on.
///
/// λ* is chosen as in [`crate::evaluation::loocv_evaluate`] on features from
/// full-cohort bases. A fold basis shorter than `features.k_use` is padded
/// with zero coefficients. Quantlet blocks already present in `records` are
/// replaced.
pub fn fold_internal_loocv(
    samples: &[PixelSample],
    records: &[SubjectRecord],
    grid_size: impl Fn(Region) -> usize,
    dictionary: &DictionaryConfig,
    quantlet: &QuantletConfig,
    features: &FeatureConfig,
    options: &LoocvOptions,
) -> Result<LoocvResult> {
    let mut base: Vec<SubjectRecord> = records.to_vec();
    for r in &mut base {
        r.lesional = None;
        r.peri = None;
        r.whole = None;
    }
    let mut regions = Vec::new();
    for (region, group) in group_by_region(samples) {
        let (grid, qs) = quantile_functions(&group, grid_size(region))?;
        let dict = build_dictionary(&grid, dictionary.k0, dictionary.j, dictionary.seed)?;
        regions.push((region, qs, dict));
    }

    let mut full = base.clone();
    for (region, qs, dict) in &regions {
        let learned = learn_basis(qs, dict, quantlet)?;
        let model = RegionModel { region: *region, dictionary: dict.clone(), learned };
        attach_coefficients(&mut full, &project_all(qs, &model)?)?;
    }
    let full_features = assemble_features(&full, features)?;
    let (lambda, cv, penalty) = select_penalty(&full_features, options)?;

    let n = base.len();
    let probs = par::map_range(n, |i| {
        let held_out = &base[i].sample_id;
        let mut fold = base.clone();
        for (_, qs, dict) in &regions {
            let train: Vec<QuantileFunction> = qs.iter().filter(|q| &q.sample_id != held_out).cloned().collect();
            let basis = learn_basis(&train, dict, quantlet)?.basis;
            let mut coefs = qs.iter().map(|q| project_coefficients(q, &basis)).collect::<Result<Vec<_>>>()?;
            for c in &mut coefs {
                if c.coefficients.len() < features.k_use {
                    c.coefficients.resize(features.k_use, 0.0);
                }
            }
            attach_coefficients(&mut fold, &coefs)?;
        }
        let f = assemble_features(&fold, features)?;
        let train: Vec<usize> = (0..n).filter(|&j| j != i).collect();
        let y: Vec<f64> = train.iter().map(|&j| f.labels[j]).collect();
        held_out_probability(&f.design.select_rows(&train), &y, f.design.row(i), penalty, options.cv.solver)
    });
    let (predictions, metrics) = collect_predictions(&full_features, probs, options)?;
    Ok(LoocvResult { lambda, cv, predictions, metrics })
}
