//! Seeded synthetic cohorts with known class-conditional pixel
//! distributions, used as ground truth for end-to-end checks.

use alloc::format;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::classifier::SubjectRecord;
use crate::error::{Error, Result};
use crate::par;
use crate::quantile::{PixelSample, Region};

/// Pixel-value distribution families.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Family {
    Normal {
        mean: f64,
        sd: f64,
    },
    /// `shift + exp(N(mu, sigma²))`.
    LogNormal {
        mu: f64,
        sigma: f64,
        #[serde(default)]
        shift: f64,
    },
    /// `weight·N(mean1, sd1²) + (1 - weight)·N(mean2, sd2²)`.
    Mixture {
        weight: f64,
        mean1: f64,
        sd1: f64,
        mean2: f64,
        sd2: f64,
    },
    /// `shift + Gamma(shape, scale)`.
    ShiftedGamma {
        shape: f64,
        scale: f64,
        shift: f64,
    },
}

fn finite(vals: &[f64]) -> bool {
    vals.iter().all(|v| v.is_finite())
}

impl Family {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            Family::Normal { mean, sd } => finite(&[mean, sd]) && sd > 0.0,
            Family::LogNormal { mu, sigma, shift } => finite(&[mu, sigma, shift]) && sigma > 0.0,
            Family::Mixture { weight, mean1, sd1, mean2, sd2 } => {
                finite(&[weight, mean1, sd1, mean2, sd2]) && weight > 0.0 && weight < 1.0 && sd1 > 0.0 && sd2 > 0.0
            }
            Family::ShiftedGamma { shape, scale, shift } => {
                finite(&[shape, scale, shift]) && shape > 0.0 && scale > 0.0
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::config(format!("invalid distribution parameters: {self:?}")))
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            Family::Normal { mean, .. } => mean,
            Family::LogNormal { mu, sigma, shift } => shift + libm::exp(mu + 0.5 * sigma * sigma),
            Family::Mixture { weight, mean1, mean2, .. } => weight * mean1 + (1.0 - weight) * mean2,
            Family::ShiftedGamma { shape, scale, shift } => shift + shape * scale,
        }
    }

    pub fn variance(&self) -> f64 {
        match *self {
            Family::Normal { sd, .. } => sd * sd,
            Family::LogNormal { mu, sigma, .. } => {
                let s2 = sigma * sigma;
                libm::expm1(s2) * libm::exp(2.0 * mu + s2)
            }
            Family::Mixture { weight, mean1, sd1, mean2, sd2 } => {
                let m = self.mean();
                weight * (sd1 * sd1 + (mean1 - m) * (mean1 - m))
                    + (1.0 - weight) * (sd2 * sd2 + (mean2 - m) * (mean2 - m))
            }
            Family::ShiftedGamma { shape, scale, .. } => shape * scale * scale,
        }
    }

    /// The same family translated by `d`.
    pub fn shifted(&self, d: f64) -> Family {
        match *self {
            Family::Normal { mean, sd } => Family::Normal { mean: mean + d, sd },
            Family::LogNormal { mu, sigma, shift } => Family::LogNormal { mu, sigma, shift: shift + d },
            Family::Mixture { weight, mean1, sd1, mean2, sd2 } => {
                Family::Mixture { weight, mean1: mean1 + d, sd1, mean2: mean2 + d, sd2 }
            }
            Family::ShiftedGamma { shape, scale, shift } => Family::ShiftedGamma { shape, scale, shift: shift + d },
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            Family::Normal { mean, sd } => mean + sd * rng.sample::<f64, _>(StandardNormal),
            Family::LogNormal { mu, sigma, shift } => {
                shift + libm::exp(mu + sigma * rng.sample::<f64, _>(StandardNormal))
            }
            Family::Mixture { weight, mean1, sd1, mean2, sd2 } => {
                let first = rng.random::<f64>() < weight;
                let z: f64 = rng.sample(StandardNormal);
                if first {
                    mean1 + sd1 * z
                } else {
                    mean2 + sd2 * z
                }
            }
            Family::ShiftedGamma { shape, scale, shift } => {
                shift + Gamma::new(shape, scale).expect("validated parameters").sample(rng)
            }
        }
    }
}

/// Independent Gaussian covariates whose mean in class 1 is shifted by the
/// per-column effect (class 0 has mean zero, all columns unit variance).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct CovariateModel {
    pub effects: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortSpec {
    /// Subjects per class, `[controls, cases]`.
    pub n_per_class: [usize; 2],
    /// Pixel counts are uniform on `[min, max]`.
    pub pixels: [usize; 2],
    /// Pixel-value family per class, applied to every region.
    pub families: [Family; 2],
    #[serde(default = "default_regions")]
    pub regions: Vec<Region>,
    #[serde(default)]
    pub demographics: CovariateModel,
    #[serde(default)]
    pub radiomics: CovariateModel,
    /// Translate the case family so both classes share the control mean.
    #[serde(default)]
    pub equal_mean: bool,
    pub seed: u64,
}

fn default_regions() -> Vec<Region> {
    alloc::vec![Region::Lesion]
}

pub const MIN_PIXELS: usize = 20;

impl CohortSpec {
    pub fn validate(&self) -> Result<()> {
        let [lo, hi] = self.pixels;
        if lo < MIN_PIXELS || hi < lo {
            return Err(Error::config(format!("pixel range [{lo}, {hi}] must satisfy {MIN_PIXELS} <= min <= max")));
        }
        if self.n_per_class.contains(&0) {
            return Err(Error::config("each class needs at least one subject"));
        }
        if self.regions.is_empty() {
            return Err(Error::config("at least one region is required"));
        }
        for f in &self.families {
            f.validate()?;
        }
        if !finite(&self.demographics.effects) || !finite(&self.radiomics.effects) {
            return Err(Error::config("covariate effects must be finite"));
        }
        Ok(())
    }

    /// Class families after the equal-mean adjustment.
    pub fn effective_families(&self) -> Result<[Family; 2]> {
        let [f0, f1] = self.families;
        if !self.equal_mean {
            return Ok([f0, f1]);
        }
        let adjusted = f1.shifted(f0.mean() - f1.mean());
        let gap = (adjusted.mean() - f0.mean()).abs();
        if gap > 1e-12 * (1.0 + f0.mean().abs()) {
            return Err(Error::config(format!("equal-mean adjustment left a mean gap of {gap:e}")));
        }
        Ok([f0, adjusted])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cohort {
    /// Pixel samples, subject-major, regions in spec order.
    pub samples: Vec<PixelSample>,
    /// One record per subject with label, covariates and the mean/median of
    /// the first region; coefficient blocks are left empty.
    pub records: Vec<SubjectRecord>,
}

impl Cohort {
    pub fn labels(&self) -> Vec<u8> {
        self.records.iter().map(|r| r.label).collect()
    }

    pub fn region_samples(&self, region: Region) -> Vec<&PixelSample> {
        self.samples.iter().filter(|s| s.region == region).collect()
    }
}

/// Subject `i` draws everything from its own ChaCha8 stream `i` of the
/// cohort seed, so generation order does not matter.
pub fn generate_cohort(spec: &CohortSpec) -> Result<Cohort> {
    spec.validate()?;
    let families = spec.effective_families()?;
    let [n0, n1] = spec.n_per_class;
    let n = n0 + n1;
    let width = n.ilog10() as usize + 1;
    let subjects = par::map_range(n, |i| {
        let label = u8::from(i >= n0);
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        rng.set_stream(i as u64);
        let id = format!("s{:0width$}", i + 1, width = width.max(3));
        let family = families[usize::from(label)];
        let mut samples = Vec::with_capacity(spec.regions.len());
        for &region in &spec.regions {
            let m = rng.random_range(spec.pixels[0]..=spec.pixels[1]);
            let values = (0..m).map(|_| family.sample(&mut rng)).collect();
            samples.push(PixelSample { sample_id: id.clone(), region, values });
        }
        let y = f64::from(label);
        let mut covariates = |model: &CovariateModel| -> Vec<f64> {
            model.effects.iter().map(|e| e * y + rng.sample::<f64, _>(StandardNormal)).collect()
        };
        let mut record = SubjectRecord::new(id, label);
        record.demographics = covariates(&spec.demographics);
        record.radiomics = covariates(&spec.radiomics);
        let (mean, median) = samples[0].summary();
        record.mean = Some(mean);
        record.median = Some(median);
        (samples, record)
    });
    let mut samples = Vec::with_capacity(n * spec.regions.len());
    let mut records = Vec::with_capacity(n);
    for (s, r) in subjects {
        samples.extend(s);
        records.push(r);
    }
    Ok(Cohort { samples, records })
}

/// `n` single-region samples cycling through `families`, with pixel counts
/// uniform on `pixels` and sample `i` drawn from ChaCha8 stream `i`.
pub fn generate_family_mix(
    families: &[Family],
    n: usize,
    pixels: [usize; 2],
    region: Region,
    seed: u64,
) -> Result<Vec<PixelSample>> {
    if families.is_empty() {
        return Err(Error::config("at least one family is required"));
    }
    for f in families {
        f.validate()?;
    }
    if pixels[0] < MIN_PIXELS || pixels[1] < pixels[0] {
        return Err(Error::config(format!("pixel range {pixels:?} must satisfy {MIN_PIXELS} <= min <= max")));
    }
    let width = n.max(1).ilog10() as usize + 1;
    Ok(par::map_range(n, |i| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(i as u64);
        let family = families[i % families.len()];
        let m = rng.random_range(pixels[0]..=pixels[1]);
        let values = (0..m).map(|_| family.sample(&mut rng)).collect();
        PixelSample { sample_id: format!("m{:0width$}", i + 1, width = width.max(3)), region, values }
    }))
}
