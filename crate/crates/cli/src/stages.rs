//! One function per subcommand. Each reads its inputs through
//! [`Artifacts`], so every file touched ends up in the run manifest.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use quantlet_core::classifier::{assemble_features, fit_model, Block, FeatureConfig, SubjectRecord};
use quantlet_core::epm::{compute_epm, fit_normal_curve, fit_pooled_curve, PhaseSeriesVolume, VoxelRegion};
use quantlet_core::evaluation::loocv_evaluate;
use quantlet_core::l1solver::cv_select_lambda;
use quantlet_core::pipeline::{
    attach_coefficients, fold_internal_loocv, group_by_region, learn_region_model, quantile_functions,
};
use quantlet_core::quantile::{PixelSample, ProbabilityGrid, QuantileFunction, Region};
use quantlet_core::quantlet::{concordance, loo_concordance, project_coefficients, QuantletCoefficients};
use quantlet_core::synth::generate_cohort;
use serde::Serialize;

use crate::artifacts::Artifacts;
use crate::config::PipelineConfig;
use crate::error::{CliError, CliResult};
use crate::formats::{self, BasisFile, BasisRef, DictionaryFile, GridFile, MetricsLine, ModelFile};

pub const PIXELS: &str = "pixels.csv";
pub const COVARIATES: &str = "covariates.csv";
pub const SUMMARY: &str = "summary.csv";
pub const FEATURES: &str = "features.csv";
pub const MODEL: &str = "model.json";
pub const METRICS: &str = "metrics.csv";
pub const PREDICTIONS: &str = "predictions.csv";

pub fn quantiles_file(region: Region) -> String {
    format!("quantiles_{region}.csv")
}

pub fn grid_file(region: Region) -> String {
    format!("quantiles_{region}.grid.json")
}

pub fn basis_file(region: Region) -> String {
    format!("basis_{region}.json")
}

fn region_of_block(block: Block) -> Option<Region> {
    match block {
        Block::Lesional => Some(Region::Lesion),
        Block::Peri => Some(Region::Peri),
        Block::Whole => Some(Region::Liver),
        _ => None,
    }
}

/// State shared by the stages of one invocation.
pub struct Run<'a> {
    pub cfg: &'a PipelineConfig,
    pub art: Artifacts,
    pub pixels: PathBuf,
    pub covariates: PathBuf,
    pub quiet: bool,
}

impl<'a> Run<'a> {
    pub fn new(cfg: &'a PipelineConfig, art: Artifacts, quiet: bool) -> Self {
        Run { pixels: cfg.pixels_path(), covariates: cfg.covariates_path(), cfg, art, quiet }
    }

    fn log(&self, stage: &str, msg: impl AsRef<str>) {
        if !self.quiet {
            eprintln!("[{stage}] {}", msg.as_ref());
        }
    }

    fn output_exists(&self, rel: &str) -> bool {
        self.art.path(rel).is_file()
    }

    fn read_output(&mut self, rel: &str) -> CliResult<(PathBuf, Vec<u8>)> {
        let path = self.art.path(rel);
        let bytes = self.art.read(&path)?;
        Ok((path, bytes))
    }

    fn load_pixels(&mut self) -> CliResult<Vec<PixelSample>> {
        let path = self.pixels.clone();
        let bytes = self.art.read(&path)?;
        formats::read_pixels(&path, &bytes)
    }

    fn load_records(&mut self, path: &Path) -> CliResult<Vec<SubjectRecord>> {
        let bytes = self.art.read(path)?;
        formats::read_records(path, &bytes)
    }

    fn load_quantiles(&mut self, region: Region) -> CliResult<(ProbabilityGrid, Vec<QuantileFunction>)> {
        let (gpath, gbytes) = self.read_output(&grid_file(region))?;
        let grid = formats::from_json::<GridFile>(&gpath, &gbytes)?.to_grid(&gpath)?;
        let (qpath, qbytes) = self.read_output(&quantiles_file(region))?;
        let qs = formats::read_quantiles(&qpath, &qbytes, region, grid.len())?;
        Ok((grid, qs))
    }
}

/// Synthetic cohort: `pixels.csv` and `covariates.csv`.
pub fn synth(run: &mut Run) -> CliResult<()> {
    let spec =
        run.cfg.synth.as_ref().ok_or_else(|| CliError::config("`synth` needs a `synth` section in the config"))?;
    let cohort = generate_cohort(spec)?;
    run.pixels = run.art.write(PIXELS, &formats::write_pixels(&cohort.samples))?;
    run.covariates = run.art.write(COVARIATES, &formats::write_records(&cohort.records))?;
    run.log("synth", format!("{} subjects, {} pixel samples", cohort.records.len(), cohort.samples.len()));
    Ok(())
}

fn pixel_region(region: VoxelRegion) -> Option<Region> {
    match region {
        VoxelRegion::Lesion => Some(Region::Lesion),
        VoxelRegion::Peri => Some(Region::Peri),
        VoxelRegion::Liver => Some(Region::Liver),
        VoxelRegion::NormalRoi | VoxelRegion::Background => None,
    }
}

/// EPM maps per volume plus the pixel table of their lesion, peri-lesional
/// and whole-liver values. The whole-liver sample pools every non-background
/// voxel and exists only for volumes with voxels labeled `liver`.
pub fn epm(run: &mut Run) -> CliResult<()> {
    let cfg = run.cfg;
    if cfg.paths.volumes.is_empty() {
        return Err(CliError::config("`epm` needs `paths.volumes`"));
    }
    let mut stems = BTreeMap::new();
    let mut volumes = Vec::new();
    for path in &cfg.paths.volumes {
        let stem = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .ok_or_else(|| CliError::config(format!("volume path `{}` has no file name", path.display())))?;
        if let Some(other) = stems.insert(stem.clone(), path.clone()) {
            return Err(CliError::config(format!(
                "volumes `{}` and `{}` share the sample id `{stem}`",
                other.display(),
                path.display()
            )));
        }
        let bytes = run.art.read(path)?;
        volumes.push((stem, formats::read_volume(path, &bytes, cfg.epm.phase_times.as_deref())?));
    }

    let pooled = if cfg.epm.pooled {
        let vs: Vec<PhaseSeriesVolume> = volumes.iter().map(|(_, v)| v.clone()).collect();
        Some(fit_pooled_curve(&vs)?)
    } else {
        None
    };
    let mut samples = Vec::new();
    for (stem, volume) in &volumes {
        let curve = match &pooled {
            Some(c) => c.clone(),
            None => fit_normal_curve(volume)?,
        };
        let map = compute_epm(volume, &curve)?;
        run.art.write(&format!("epm/{stem}.csv"), &formats::write_epm(&map))?;
        run.art.write(&format!("epm/{stem}.curve.json"), &formats::to_json(&curve))?;

        let mut by_region: BTreeMap<Region, Vec<f64>> = BTreeMap::new();
        let has_liver = volume.voxels().iter().any(|v| v.region == VoxelRegion::Liver);
        for v in volume.voxels() {
            let Some(value) = map.get(v.id) else { continue };
            if let Some(r) = pixel_region(v.region) {
                if r != Region::Liver {
                    by_region.entry(r).or_default().push(value);
                }
            }
            if has_liver && v.region != VoxelRegion::Background {
                by_region.entry(Region::Liver).or_default().push(value);
            }
        }
        for (region, values) in by_region {
            samples.push(PixelSample { sample_id: stem.clone(), region, values });
        }
        run.log("epm", format!("{stem}: {} voxels", map.len()));
    }
    run.pixels = run.art.write(PIXELS, &formats::write_pixels(&samples))?;
    Ok(())
}

/// Quantile functions per region on the standardized grid, plus per-sample
/// means and medians.
pub fn quantiles(run: &mut Run) -> CliResult<()> {
    let samples = run.load_pixels()?;
    for (region, group) in group_by_region(&samples) {
        let (grid, qs) = quantile_functions(&group, run.cfg.grid.get(region))?;
        run.art.write(&quantiles_file(region), &formats::write_quantiles(&qs, grid.len()))?;
        run.art.write(&grid_file(region), &formats::to_json(&GridFile::from_grid(&grid)))?;
        run.log("quantiles", format!("{region}: {} samples, G = {}, delta = {:e}", qs.len(), grid.len(), grid.delta()));
    }
    run.art.write(SUMMARY, &formats::write_summary(&samples))?;
    Ok(())
}

#[derive(Serialize)]
struct SampleConcordance {
    sample_id: String,
    /// Leave-one-out concordance from the selected dictionary elements.
    selected: f64,
    /// Concordance of the projection onto the final basis.
    basis: f64,
}

#[derive(Serialize)]
struct ConcordanceFile {
    region: Region,
    rho_threshold: f64,
    reached: bool,
    #[serde(rename = "K")]
    k: usize,
    union_size: usize,
    order: Vec<usize>,
    rho_trace: Vec<f64>,
    rho0: f64,
    min_basis: f64,
    per_sample: Vec<SampleConcordance>,
}

fn present_regions(run: &Run, file: fn(Region) -> String) -> Vec<Region> {
    Region::ALL.into_iter().filter(|&r| run.output_exists(&file(r))).collect()
}

/// Dictionary, quantlet basis and concordance report for each region with
/// quantile functions.
pub fn basis(run: &mut Run) -> CliResult<()> {
    let regions = present_regions(run, quantiles_file);
    if regions.is_empty() {
        return Err(CliError::schema(format!(
            "no quantile files in {}; run `quantiles` first",
            run.art.root().display()
        )));
    }
    for region in regions {
        let (grid, qs) = run.load_quantiles(region)?;
        let model = learn_region_model(region, &grid, &qs, &run.cfg.dictionary, &run.cfg.quantlet)?;
        let learned = &model.learned;
        let b = &learned.basis;
        if run.cfg.outputs.dictionary {
            run.art.write(
                &format!("dictionary_{region}.json"),
                &formats::to_json(&DictionaryFile::from_dictionary(&model.dictionary)),
            )?;
        }
        run.art.write(&basis_file(region), &formats::to_json(&BasisFile::from_basis(region, b)))?;

        let loo = loo_concordance(&qs, &model.dictionary, &learned.selection.sets(), &learned.ranking.order)?;
        let per_sample: Vec<SampleConcordance> = qs
            .iter()
            .zip(&loo.per_sample)
            .map(|(q, &selected)| {
                let c = project_coefficients(q, b)?.coefficients;
                let basis = concordance(&q.values, &b.reconstruct(&c), &grid);
                Ok(SampleConcordance { sample_id: q.sample_id.clone(), selected, basis })
            })
            .collect::<CliResult<_>>()?;
        let report = ConcordanceFile {
            region,
            rho_threshold: run.cfg.quantlet.rho_threshold,
            reached: learned.ranking.reached,
            k: b.k(),
            union_size: learned.selection.union.len(),
            order: learned.ranking.order.clone(),
            rho_trace: learned.ranking.rho_trace.clone(),
            rho0: learned.ranking.rho0(),
            min_basis: per_sample.iter().map(|s| s.basis).fold(f64::INFINITY, f64::min),
            per_sample,
        };
        run.art.write(&format!("concordance_{region}.json"), &formats::to_json(&report))?;
        run.log(
            "basis",
            format!("{region}: union {} -> K = {}, rho0 = {:.6}", report.union_size, report.k, report.rho0),
        );
    }
    Ok(())
}

/// Projects every region's quantile functions on its basis and joins the
/// coefficients to the covariate table.
pub fn features(run: &mut Run) -> CliResult<()> {
    let covariates = run.covariates.clone();
    let mut records = run.load_records(&covariates)?;

    if run.output_exists(SUMMARY) {
        let (path, bytes) = run.read_output(SUMMARY)?;
        let summary = formats::read_summary(&path, &bytes)?;
        let region = run.cfg.model.summary_region;
        for r in &mut records {
            if let Some(&(mean, median)) = summary.get(&(r.sample_id.clone(), region)) {
                r.mean = r.mean.or(Some(mean));
                r.median = r.median.or(Some(median));
            }
        }
    }

    let regions = present_regions(run, basis_file);
    if regions.is_empty() {
        run.log("features", "no basis files; writing covariates only");
    }
    for region in regions {
        let (bpath, bbytes) = run.read_output(&basis_file(region))?;
        let file: BasisFile = formats::from_json(&bpath, &bbytes)?;
        if file.region != region {
            return Err(CliError::schema(format!("{} holds the {} basis", bpath.display(), file.region)));
        }
        let basis = file.to_basis(&bpath)?;
        let (grid, qs) = run.load_quantiles(region)?;
        if !grid.same_as(&basis.grid) {
            return Err(CliError::schema(format!(
                "the {region} quantile grid differs from the one the basis was learned on; rerun `basis`"
            )));
        }
        let coefs: Vec<QuantletCoefficients> =
            qs.iter().map(|q| project_coefficients(q, &basis)).collect::<Result<_, _>>()?;
        run.art.write(&format!("coefficients_{region}.csv"), &formats::write_coefficients(&coefs, basis.k()))?;
        for r in &mut records {
            match Block::for_region(region) {
                Block::Lesional => r.lesional = None,
                Block::Peri => r.peri = None,
                _ => r.whole = None,
            }
        }
        attach_coefficients(&mut records, &coefs)?;
        run.log("features", format!("{region}: {} samples x {} coefficients", coefs.len(), basis.k()));
    }
    run.art.write(FEATURES, &formats::write_records(&records))?;
    Ok(())
}

fn load_features(run: &mut Run) -> CliResult<Vec<SubjectRecord>> {
    let path = run.art.path(FEATURES);
    run.load_records(&path)
}

/// Final model on the whole cohort.
pub fn fit(run: &mut Run) -> CliResult<()> {
    let records = load_features(run)?;
    let m = &run.cfg.model;
    let fc = FeatureConfig { blocks: m.fit.blocks.clone(), k_use: m.fit.k_use, missing: m.missing };
    let features = assemble_features(&records, &fc)?;
    let lambda = match m.fit.lambda {
        Some(l) => l,
        None => cv_select_lambda(&features.design, &features.labels, &run.cfg.eval.cv_options())?.lambda_star,
    };
    let model = fit_model(&features, lambda)?;
    let rate = features.labels.iter().sum::<f64>() / features.labels.len() as f64;
    let threshold = run.cfg.eval.threshold.value(rate);

    let mut refs = Vec::new();
    for region in fc.blocks.iter().filter_map(|&b| region_of_block(b)) {
        let path = run.art.path(&basis_file(region));
        let sha256 = match run.art.hash_of(&path) {
            Some(h) => h.to_string(),
            None => crate::artifacts::sha256_hex(&run.art.read(&path)?),
        };
        refs.push(BasisRef { region, path: basis_file(region), sha256 });
    }
    let file = ModelFile::new(&model, threshold, refs);
    run.art.write(MODEL, &formats::to_json(&file))?;
    run.log(
        "fit",
        format!("lambda = {lambda:e}, {} of {} coefficients nonzero", model.fit.nonzero_count(), file.theta.len()),
    );
    Ok(())
}

/// Leave-one-out metrics for every feature set, sweeping the quantlet
/// count for sets that use quantlets.
pub fn evaluate(run: &mut Run) -> CliResult<()> {
    let records = load_features(run)?;
    let cfg = run.cfg;
    let options = cfg.eval.loocv_options();
    let pixels = if cfg.eval.fold_internal_basis && cfg.model.feature_sets.iter().any(|s| s.uses_quantlets()) {
        Some(run.load_pixels()?)
    } else {
        None
    };

    let mut lines = Vec::new();
    let mut predictions = Vec::new();
    for set in &cfg.model.feature_sets {
        let ks: Vec<Option<usize>> =
            if set.uses_quantlets() { cfg.model.k_use.iter().map(|&k| Some(k)).collect() } else { vec![None] };
        for k in ks {
            let label = set.label(k.unwrap_or(0));
            let fc = FeatureConfig { blocks: set.blocks.clone(), k_use: k.unwrap_or(0), missing: cfg.model.missing };
            let result = match (&pixels, k) {
                (Some(samples), Some(_)) => fold_internal_loocv(
                    samples,
                    &records,
                    |r| cfg.grid.get(r),
                    &cfg.dictionary,
                    &cfg.quantlet,
                    &fc,
                    &options,
                ),
                _ => assemble_features(&records, &fc).and_then(|f| loocv_evaluate(&f, &options)),
            }
            .map_err(|e| match e {
                quantlet_core::Error::Precondition(msg) | quantlet_core::Error::Config(msg) => {
                    CliError::config(format!("feature set `{label}`: {msg}"))
                }
                other => CliError::from(other),
            })?;
            run.log("evaluate", format!("{label}: acc {:.3}, lambda {:e}", result.metrics.accuracy, result.lambda));
            lines.push(MetricsLine { row: result.metrics.labeled(label.clone(), k.unwrap_or(0)), k });
            predictions.push((label, k, result.predictions));
        }
    }
    let table = formats::write_metrics(&lines);
    run.art.write(METRICS, &table)?;
    run.art.write(PREDICTIONS, &formats::write_predictions(&predictions))?;
    if !run.quiet {
        print!("{}", String::from_utf8_lossy(&table));
    }
    Ok(())
}

/// Synthesis (or EPM) followed by every downstream stage.
pub fn all(run: &mut Run) -> CliResult<()> {
    if run.cfg.synth.is_some() {
        synth(run)?;
    } else if !run.cfg.paths.volumes.is_empty() {
        epm(run)?;
    }
    quantiles(run)?;
    basis(run)?;
    features(run)?;
    fit(run)?;
    evaluate(run)
}
