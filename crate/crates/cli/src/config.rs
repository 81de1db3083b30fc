//! JSON pipeline configuration and `--set key=value` overrides.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use quantlet_core::classifier::{Block, MissingPolicy};
use quantlet_core::evaluation::{DecisionThreshold, F1Mode, LambdaTransfer, LoocvOptions};
use quantlet_core::l1solver::CvOptions;
use quantlet_core::pipeline::DictionaryConfig;
use quantlet_core::quantile::Region;
use quantlet_core::quantlet::QuantletConfig;
use quantlet_core::synth::CohortSpec;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    /// Directory receiving every artifact.
    pub out_dir: PathBuf,
    /// Phase-series CSV files, one per subject, for the `epm` stage.
    pub volumes: Vec<PathBuf>,
    /// Pixel CSV; defaults to `<out_dir>/pixels.csv`.
    pub pixels: Option<PathBuf>,
    /// Subject covariate CSV; defaults to `<out_dir>/covariates.csv`.
    pub covariates: Option<PathBuf>,
}

impl Default for Paths {
    fn default() -> Self {
        Paths { out_dir: PathBuf::from("out"), volumes: Vec::new(), pixels: None, covariates: None }
    }
}

/// Quantile grid size per region.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSizes {
    pub lesion: usize,
    pub peri: usize,
    pub liver: usize,
}

impl Default for GridSizes {
    fn default() -> Self {
        GridSizes {
            lesion: Region::Lesion.default_grid_size(),
            peri: Region::Peri.default_grid_size(),
            liver: Region::Liver.default_grid_size(),
        }
    }
}

impl GridSizes {
    pub fn get(&self, region: Region) -> usize {
        match region {
            Region::Lesion => self.lesion,
            Region::Peri => self.peri,
            Region::Liver => self.liver,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct EpmConfig {
    /// Fit one normal-tissue curve on the ROI voxels of all volumes.
    pub pooled: bool,
    /// Phase times used when a volume file does not declare its own.
    pub phase_times: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeatureSet {
    /// Row label. `{K}` is replaced by the number of quantlets used; sets
    /// with quantlet blocks and no placeholder get `(K)` appended.
    pub name: String,
    pub blocks: Vec<Block>,
}

impl FeatureSet {
    pub fn uses_quantlets(&self) -> bool {
        self.blocks.iter().any(|b| b.is_quantlet())
    }

    pub fn label(&self, k: usize) -> String {
        if !self.uses_quantlets() {
            self.name.clone()
        } else if self.name.contains("{K}") {
            self.name.replace("{K}", &k.to_string())
        } else {
            format!("{}({k})", self.name)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitConfig {
    pub blocks: Vec<Block>,
    pub k_use: usize,
    /// Penalty for the final model; cross-validated when absent.
    pub lambda: Option<f64>,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig { blocks: vec![Block::Lesional], k_use: 10, lambda: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub feature_sets: Vec<FeatureSet>,
    /// Quantlet counts swept by `evaluate`.
    pub k_use: Vec<usize>,
    pub missing: MissingPolicy,
    /// Region whose pixel mean and median fill the summary blocks when the
    /// covariate file lacks them.
    pub summary_region: Region,
    pub fit: FitConfig,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            feature_sets: vec![
                FeatureSet { name: "Mean".into(), blocks: vec![Block::Mean] },
                FeatureSet { name: "Median".into(), blocks: vec![Block::Median] },
                FeatureSet { name: "Q({K})".into(), blocks: vec![Block::Lesional] },
            ],
            k_use: vec![10, 20, 30],
            missing: MissingPolicy::Error,
            summary_region: Region::Lesion,
            fit: FitConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub folds: usize,
    pub seed: u64,
    pub f1_mode: F1Mode,
    /// Skip cross-validation and use this penalty.
    pub lambda: Option<f64>,
    pub transfer: LambdaTransfer,
    pub threshold: DecisionThreshold,
    /// Learn the quantlet basis inside every leave-one-out fold.
    pub fold_internal_basis: bool,
}

impl Default for EvalConfig {
    fn default() -> Self {
        let loocv = LoocvOptions::default();
        EvalConfig {
            folds: loocv.cv.folds,
            seed: 0,
            f1_mode: loocv.f1_mode,
            lambda: None,
            transfer: loocv.transfer,
            threshold: loocv.threshold,
            fold_internal_basis: false,
        }
    }
}

impl EvalConfig {
    pub fn cv_options(&self) -> CvOptions {
        CvOptions { folds: self.folds, seed: self.seed, ..Default::default() }
    }

    pub fn loocv_options(&self) -> LoocvOptions {
        LoocvOptions {
            cv: self.cv_options(),
            lambda: self.lambda,
            transfer: self.transfer,
            threshold: self.threshold,
            f1_mode: self.f1_mode,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Outputs {
    /// Also write the overcomplete dictionary of each region.
    pub dictionary: bool,
}

impl Default for Outputs {
    fn default() -> Self {
        Outputs { dictionary: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub paths: Paths,
    pub grid: GridSizes,
    pub epm: EpmConfig,
    pub dictionary: DictionaryConfig,
    pub quantlet: QuantletConfig,
    pub model: ModelConfig,
    pub eval: EvalConfig,
    pub outputs: Outputs,
    /// Synthetic cohort generated by `synth` (and first by `all`).
    pub synth: Option<CohortSpec>,
}

/// A validated configuration plus the canonical JSON it was built from.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: PipelineConfig,
    /// Canonical serialization after overrides, before path resolution.
    pub canonical: String,
}

impl PipelineConfig {
    /// Reads `path` (or starts from defaults), applies `overrides`, resolves
    /// relative paths against the config file's directory and validates.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> CliResult<LoadedConfig> {
        let (parsed, base) = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| CliError::io(p, e))?;
                let cfg: PipelineConfig =
                    serde_json::from_str(&text).map_err(|e| CliError::config(format!("{}: {e}", p.display())))?;
                (cfg, p.parent().map(Path::to_path_buf).unwrap_or_default())
            }
            None => (PipelineConfig::default(), PathBuf::new()),
        };
        let mut value = serde_json::to_value(&parsed).map_err(|e| CliError::config(e.to_string()))?;
        for o in overrides {
            apply_override(&mut value, o)?;
        }
        let mut config: PipelineConfig =
            serde_json::from_value(value).map_err(|e| CliError::config(format!("after overrides: {e}")))?;
        let canonical = serde_json::to_string_pretty(&config).map_err(|e| CliError::config(e.to_string()))?;
        config.resolve_paths(&base);
        config.validate()?;
        Ok(LoadedConfig { config, canonical })
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.paths.out_dir);
        self.paths.volumes.iter_mut().for_each(fix);
        self.paths.pixels.iter_mut().for_each(fix);
        self.paths.covariates.iter_mut().for_each(fix);
    }

    pub fn validate(&self) -> CliResult<()> {
        for region in Region::ALL {
            let g = self.grid.get(region);
            if !g.is_power_of_two() || g < 16 {
                return Err(CliError::config(format!("grid.{region} = {g} must be a power of two >= 16")));
            }
        }
        if !(self.dictionary.j > 0.0 && self.dictionary.j.is_finite()) {
            return Err(CliError::config("dictionary.j must be positive"));
        }
        if !(0.0..=1.0).contains(&self.quantlet.rho_threshold) {
            return Err(CliError::config("quantlet.rho_threshold must lie in [0, 1]"));
        }
        let m = &self.model;
        if m.feature_sets.is_empty() {
            return Err(CliError::config("model.feature_sets is empty"));
        }
        let mut names = BTreeSet::new();
        for set in &m.feature_sets {
            if set.blocks.is_empty() {
                return Err(CliError::config(format!("feature set `{}` has no blocks", set.name)));
            }
            if !names.insert(set.name.as_str()) {
                return Err(CliError::config(format!("feature set `{}` is listed twice", set.name)));
            }
        }
        if m.feature_sets.iter().any(FeatureSet::uses_quantlets) && (m.k_use.is_empty() || m.k_use.contains(&0)) {
            return Err(CliError::config("model.k_use must list positive quantlet counts"));
        }
        if m.fit.blocks.is_empty() {
            return Err(CliError::config("model.fit.blocks is empty"));
        }
        for lambda in [m.fit.lambda, self.eval.lambda].into_iter().flatten() {
            if !(lambda >= 0.0 && lambda.is_finite()) {
                return Err(CliError::config(format!("penalty {lambda} must be finite and non-negative")));
            }
        }
        if self.eval.folds < 2 {
            return Err(CliError::config("eval.folds must be at least 2"));
        }
        if let DecisionThreshold::Fixed(t) = self.eval.threshold {
            if !(t > 0.0 && t < 1.0) {
                return Err(CliError::config(format!("eval.threshold {t} must lie in (0, 1)")));
            }
        }
        if let Some(times) = &self.epm.phase_times {
            if times.len() < 3 {
                return Err(CliError::config("epm.phase_times needs at least 3 entries"));
            }
        }
        if let Some(spec) = &self.synth {
            spec.validate().map_err(|e| CliError::config(format!("synth: {e}")))?;
            spec.effective_families().map_err(|e| CliError::config(format!("synth: {e}")))?;
        }
        Ok(())
    }

    pub fn pixels_path(&self) -> PathBuf {
        self.paths.pixels.clone().unwrap_or_else(|| self.paths.out_dir.join("pixels.csv"))
    }

    pub fn covariates_path(&self) -> PathBuf {
        self.paths.covariates.clone().unwrap_or_else(|| self.paths.out_dir.join("covariates.csv"))
    }
}

/// Sets the scalar at dotted `key` from `key=value`. The value is read as
/// JSON when possible and as a plain string otherwise.
pub fn apply_override(root: &mut Value, assignment: &str) -> CliResult<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| CliError::config(format!("override `{assignment}` is not of the form key=value")))?;
    let new: Value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    if new.is_object() || new.is_array() {
        return Err(CliError::config(format!("override `{key}` must be a scalar; edit the config file instead")));
    }
    let mut slot = root;
    for part in key.split('.') {
        slot = match slot {
            Value::Object(map) => map.get_mut(part),
            Value::Array(items) => part.parse::<usize>().ok().and_then(|i| items.get_mut(i)),
            _ => None,
        }
        .ok_or_else(|| CliError::config(format!("unknown config key `{key}`")))?;
    }
    if slot.is_object() || slot.is_array() {
        return Err(CliError::config(format!("`{key}` is not a scalar setting")));
    }
    *slot = new;
    Ok(())
}
