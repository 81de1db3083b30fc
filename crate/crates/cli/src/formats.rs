//! Readers and writers for every file the pipeline exchanges.
//!
//! Floats are written in Rust's shortest round-trip form, so reading a file
//! back reproduces the values bit for bit.

use std::collections::HashMap;
use std::path::Path;

use quantlet_core::classifier::{Block, ClassifierFit, FeatureLayout, SubjectRecord};
use quantlet_core::dictionary::{DictionaryElement, ElementKind, OvercompleteDictionary};
use quantlet_core::epm::{EpmMap, PhaseSeriesVolume, Voxel, VoxelRegion};
use quantlet_core::evaluation::{MetricsRow, SamplePrediction};
use quantlet_core::quantile::{PixelSample, ProbabilityGrid, QuantileFunction, Region};
use quantlet_core::quantlet::{DenoiseInfo, QuantletBasis, QuantletCoefficients};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

pub fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

fn parse_f64(path: &Path, line: u64, field: &str, what: &str) -> CliResult<f64> {
    field
        .trim()
        .parse::<f64>()
        .map_err(|_| CliError::schema(format!("{}:{line}: {what} `{field}` is not a number", path.display())))
}

fn parse_u64(path: &Path, line: u64, field: &str, what: &str) -> CliResult<u64> {
    field.trim().parse::<u64>().map_err(|_| {
        CliError::schema(format!("{}:{line}: {what} `{field}` is not a non-negative integer", path.display()))
    })
}

fn reader(bytes: &[u8]) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_reader(bytes)
}

fn headers(path: &Path, rdr: &mut csv::Reader<&[u8]>) -> CliResult<Vec<String>> {
    Ok(rdr.headers().map_err(|e| CliError::csv(path, e))?.iter().map(str::to_string).collect())
}

fn expect_prefix(path: &Path, header: &[String], expected: &[&str]) -> CliResult<()> {
    if header.len() < expected.len() || header.iter().zip(expected).any(|(h, e)| h != e) {
        return Err(CliError::schema(format!(
            "{}: header must start with `{}`, found `{}`",
            path.display(),
            expected.join(","),
            header.join(",")
        )));
    }
    Ok(())
}

/// Checks that `columns` reads `{prefix}1, {prefix}2, ...` and returns the count.
fn numbered(path: &Path, columns: &[String], prefix: &str) -> CliResult<usize> {
    for (i, c) in columns.iter().enumerate() {
        if *c != format!("{prefix}{}", i + 1) {
            return Err(CliError::schema(format!(
                "{}: column `{c}` found where `{prefix}{}` was expected",
                path.display(),
                i + 1
            )));
        }
    }
    Ok(columns.len())
}

fn line_of(record: &csv::StringRecord) -> u64 {
    record.position().map_or(0, |p| p.line())
}

fn finish(w: csv::Writer<Vec<u8>>) -> Vec<u8> {
    w.into_inner().expect("writing to memory cannot fail")
}

fn writer() -> csv::Writer<Vec<u8>> {
    csv::WriterBuilder::new().flexible(false).from_writer(Vec::new())
}

fn write_row(w: &mut csv::Writer<Vec<u8>>, row: impl IntoIterator<Item = impl AsRef<[u8]>>) {
    w.write_record(row).expect("writing to memory cannot fail");
}

fn region_of(path: &Path, line: u64, s: &str) -> CliResult<Region> {
    s.parse::<Region>().map_err(|_| {
        CliError::schema(format!("{}:{line}: unknown region `{s}` (expected lesion, peri or liver)", path.display()))
    })
}

// ---------------------------------------------------------------- volumes

/// Parses a phase-series CSV. A leading comment `# phase_times: t0,t1,...`
/// declares the acquisition times; `fallback_times` applies otherwise.
pub fn read_volume(path: &Path, bytes: &[u8], fallback_times: Option<&[f64]>) -> CliResult<PhaseSeriesVolume> {
    let text = std::str::from_utf8(bytes).map_err(|_| CliError::schema(format!("{}: not UTF-8", path.display())))?;
    let mut declared = None;
    for line in text.lines().take_while(|l| l.trim_start().starts_with('#')) {
        if let Some(rest) = line.trim_start().trim_start_matches('#').trim().strip_prefix("phase_times:") {
            let times =
                rest.split(',').map(|t| parse_f64(path, 1, t, "phase time")).collect::<CliResult<Vec<f64>>>()?;
            declared = Some(times);
        }
    }
    let times = declared.or_else(|| fallback_times.map(<[f64]>::to_vec));

    let mut rdr = reader(bytes);
    let header = headers(path, &mut rdr)?;
    expect_prefix(path, &header, &["voxel_id", "x", "y", "z", "region"])?;
    let phases = numbered_from_zero(path, &header[5..], "phase_")?;
    let mut voxels = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| CliError::csv(path, e))?;
        let line = line_of(&rec);
        let coord = |i: usize| -> CliResult<i64> {
            rec[i].parse::<i64>().map_err(|_| {
                CliError::schema(format!("{}:{line}: coordinate `{}` is not an integer", path.display(), &rec[i]))
            })
        };
        let region: VoxelRegion = rec[4]
            .parse()
            .map_err(|e: quantlet_core::Error| CliError::schema(format!("{}:{line}: {e}", path.display())))?;
        let intensities =
            (0..phases).map(|p| parse_f64(path, line, &rec[5 + p], "intensity")).collect::<CliResult<Vec<f64>>>()?;
        voxels.push(Voxel {
            id: parse_u64(path, line, &rec[0], "voxel_id")?,
            coords: [coord(1)?, coord(2)?, coord(3)?],
            intensities,
            region,
        });
    }
    PhaseSeriesVolume::new(voxels, times).map_err(|e| CliError::schema(format!("{}: {e}", path.display())))
}

fn numbered_from_zero(path: &Path, columns: &[String], prefix: &str) -> CliResult<usize> {
    for (i, c) in columns.iter().enumerate() {
        if *c != format!("{prefix}{i}") {
            return Err(CliError::schema(format!(
                "{}: phase columns must be named {prefix}0..{prefix}{{P-1}}, found `{c}`",
                path.display()
            )));
        }
    }
    Ok(columns.len())
}

pub fn write_volume(volume: &PhaseSeriesVolume) -> Vec<u8> {
    let mut out =
        format!("# phase_times: {}\n", volume.phase_times().iter().map(|t| fmt_f64(*t)).collect::<Vec<_>>().join(","))
            .into_bytes();
    let mut w = writer();
    let mut header: Vec<String> = ["voxel_id", "x", "y", "z", "region"].map(String::from).to_vec();
    header.extend((0..volume.phases()).map(|p| format!("phase_{p}")));
    write_row(&mut w, &header);
    for v in volume.voxels() {
        let mut row = vec![v.id.to_string()];
        row.extend(v.coords.iter().map(i64::to_string));
        row.push(v.region.to_string());
        row.extend(v.intensities.iter().map(|x| fmt_f64(*x)));
        write_row(&mut w, &row);
    }
    out.extend(finish(w));
    out
}

pub fn write_epm(map: &EpmMap) -> Vec<u8> {
    let mut w = writer();
    write_row(&mut w, ["voxel_id", "epm"]);
    for (id, v) in &map.values {
        write_row(&mut w, [id.to_string(), fmt_f64(*v)]);
    }
    finish(w)
}

pub fn read_epm(path: &Path, bytes: &[u8]) -> CliResult<EpmMap> {
    let mut rdr = reader(bytes);
    let header = headers(path, &mut rdr)?;
    expect_prefix(path, &header, &["voxel_id", "epm"])?;
    let mut map = EpmMap::default();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| CliError::csv(path, e))?;
        let line = line_of(&rec);
        map.values.insert(parse_u64(path, line, &rec[0], "voxel_id")?, parse_f64(path, line, &rec[1], "epm")?);
    }
    Ok(map)
}

// ----------------------------------------------------------------- pixels

/// Long-format pixel table, grouped by `(sample_id, region)` in order of
/// first appearance.
pub fn read_pixels(path: &Path, bytes: &[u8]) -> CliResult<Vec<PixelSample>> {
    let mut rdr = reader(bytes);
    let header = headers(path, &mut rdr)?;
    if header != ["sample_id", "region", "value"] {
        return Err(CliError::schema(format!(
            "{}: header must be `sample_id,region,value`, found `{}`",
            path.display(),
            header.join(",")
        )));
    }
    let mut index: HashMap<(String, Region), usize> = HashMap::new();
    let mut samples: Vec<PixelSample> = Vec::new();
    let mut rec = csv::StringRecord::new();
    while rdr.read_record(&mut rec).map_err(|e| CliError::csv(path, e))? {
        let line = line_of(&rec);
        let region = region_of(path, line, &rec[1])?;
        let value = parse_f64(path, line, &rec[2], "pixel value")?;
        if !value.is_finite() {
            return Err(CliError::schema(format!("{}:{line}: pixel value must be finite", path.display())));
        }
        let key = (rec[0].to_string(), region);
        let i = *index.entry(key).or_insert_with(|| {
            samples.push(PixelSample { sample_id: rec[0].to_string(), region, values: Vec::new() });
            samples.len() - 1
        });
        samples[i].values.push(value);
    }
    if samples.is_empty() {
        return Err(CliError::schema(format!("{}: no pixels", path.display())));
    }
    Ok(samples)
}

pub fn write_pixels(samples: &[PixelSample]) -> Vec<u8> {
    let mut w = writer();
    write_row(&mut w, ["sample_id", "region", "value"]);
    for s in samples {
        for v in &s.values {
            write_row(&mut w, [s.sample_id.as_str(), s.region.as_str(), &fmt_f64(*v)]);
        }
    }
    finish(w)
}

pub fn write_summary(samples: &[PixelSample]) -> Vec<u8> {
    let mut w = writer();
    write_row(&mut w, ["sample_id", "region", "mean", "median"]);
    for s in samples {
        let (mean, median) = s.summary();
        write_row(&mut w, [s.sample_id.clone(), s.region.to_string(), fmt_f64(mean), fmt_f64(median)]);
    }
    finish(w)
}

/// `(sample_id, region) -> (mean, median)`.
pub fn read_summary(path: &Path, bytes: &[u8]) -> CliResult<HashMap<(String, Region), (f64, f64)>> {
    let mut rdr = reader(bytes);
    let header = headers(path, &mut rdr)?;
    expect_prefix(path, &header, &["sample_id", "region", "mean", "median"])?;
    let mut out = HashMap::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| CliError::csv(path, e))?;
        let line = line_of(&rec);
        let region = region_of(path, line, &rec[1])?;
        let stats = (parse_f64(path, line, &rec[2], "mean")?, parse_f64(path, line, &rec[3], "median")?);
        out.insert((rec[0].to_string(), region), stats);
    }
    Ok(out)
}

// -------------------------------------------------------------- quantiles

/// Grid sidecar `{G, delta, points}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridFile {
    #[serde(rename = "G")]
    pub g: usize,
    pub delta: f64,
    pub points: Vec<f64>,
}

impl GridFile {
    pub fn from_grid(grid: &ProbabilityGrid) -> Self {
        GridFile { g: grid.len(), delta: grid.delta(), points: grid.points().to_vec() }
    }

    /// Rebuilds the grid and checks it against the stored points.
    pub fn to_grid(&self, path: &Path) -> CliResult<ProbabilityGrid> {
        let grid = ProbabilityGrid::with_delta(self.g, self.delta)
            .map_err(|e| CliError::schema(format!("{}: {e}", path.display())))?;
        if grid.points() != self.points.as_slice() {
            return Err(CliError::schema(format!("{}: grid points do not match G and delta", path.display())));
        }
        Ok(grid)
    }
}

pub fn to_json<T: Serialize>(value: &T) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(value).expect("artifact types serialize");
    out.push(b'\n');
    out
}

pub fn from_json<T: for<'de> Deserialize<'de>>(path: &Path, bytes: &[u8]) -> CliResult<T> {
    serde_json::from_slice(bytes).map_err(|e| CliError::json(path, e))
}

pub fn write_quantiles(qs: &[QuantileFunction], g: usize) -> Vec<u8> {
    let mut w = writer();
    let mut header: Vec<String> = vec!["sample_id".into(), "region".into()];
    header.extend((1..=g).map(|j| format!("p_{j}")));
    write_row(&mut w, &header);
    for q in qs {
        let mut row = vec![q.sample_id.clone(), q.region.to_string()];
        row.extend(q.values.iter().map(|v| fmt_f64(*v)));
        write_row(&mut w, &row);
    }
    finish(w)
}

pub fn read_quantiles(path: &Path, bytes: &[u8], region: Region, g: usize) -> CliResult<Vec<QuantileFunction>> {
    let mut rdr = reader(bytes);
    let header = headers(path, &mut rdr)?;
    expect_prefix(path, &header, &["sample_id", "region"])?;
    let width = numbered(path, &header[2..], "p_")?;
    if width != g {
        return Err(CliError::schema(format!("{}: {width} quantile columns but the grid has {g}", path.display())));
    }
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| CliError::csv(path, e))?;
        let line = line_of(&rec);
        let r = region_of(path, line, &rec[1])?;
        if r != region {
            return Err(CliError::schema(format!("{}:{line}: region `{r}` in the {region} file", path.display())));
        }
        let values = (0..g).map(|j| parse_f64(path, line, &rec[2 + j], "quantile")).collect::<CliResult<Vec<_>>>()?;
        out.push(QuantileFunction { sample_id: rec[0].to_string(), region, values });
    }
    if out.is_empty() {
        return Err(CliError::schema(format!("{}: no quantile functions", path.display())));
    }
    Ok(out)
}

// ------------------------------------------------------------- dictionary

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElementFile {
    pub kind: ElementKind,
    pub a: Option<f64>,
    pub b: Option<f64>,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DictionaryFile {
    pub grid: GridFile,
    #[serde(rename = "J")]
    pub j: f64,
    #[serde(rename = "K0")]
    pub k0: usize,
    pub seed: u64,
    pub elements: Vec<ElementFile>,
}

impl DictionaryFile {
    pub fn from_dictionary(dict: &OvercompleteDictionary) -> Self {
        DictionaryFile {
            grid: GridFile::from_grid(&dict.grid),
            j: dict.j_bound,
            k0: dict.k0,
            seed: dict.seed,
            elements: dict
                .elements
                .iter()
                .map(|e| ElementFile {
                    kind: e.kind,
                    a: e.theta.map(|t| t.0),
                    b: e.theta.map(|t| t.1),
                    values: e.values.clone(),
                })
                .collect(),
        }
    }

    pub fn to_dictionary(&self, path: &Path) -> CliResult<OvercompleteDictionary> {
        let grid = self.grid.to_grid(path)?;
        let elements = self
            .elements
            .iter()
            .map(|e| {
                if e.values.len() != grid.len() {
                    return Err(CliError::schema(format!("{}: element length differs from G", path.display())));
                }
                let theta = match (e.a, e.b) {
                    (Some(a), Some(b)) => Some((a, b)),
                    (None, None) => None,
                    _ => return Err(CliError::schema(format!("{}: element has only one shape", path.display()))),
                };
                Ok(DictionaryElement { kind: e.kind, theta, values: e.values.clone() })
            })
            .collect::<CliResult<Vec<_>>>()?;
        Ok(OvercompleteDictionary { grid, elements, j_bound: self.j, k0: self.k0, seed: self.seed })
    }
}

// ------------------------------------------------------------------ basis

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenoiseFile {
    pub family: String,
    pub levels: usize,
    pub threshold: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasisFile {
    pub region: Region,
    pub grid: GridFile,
    #[serde(rename = "K")]
    pub k: usize,
    /// Dictionary index behind each row.
    pub importance_order: Vec<usize>,
    pub psi: Vec<Vec<f64>>,
    pub denoise: Option<DenoiseFile>,
    #[serde(default)]
    pub dropped: Vec<usize>,
}

impl BasisFile {
    pub fn from_basis(region: Region, basis: &QuantletBasis) -> Self {
        BasisFile {
            region,
            grid: GridFile::from_grid(&basis.grid),
            k: basis.k(),
            importance_order: basis.provenance.clone(),
            psi: basis.psi.clone(),
            denoise: basis.denoise.as_ref().map(|d| DenoiseFile {
                family: d.family.clone(),
                levels: d.levels,
                threshold: d.thresholds.clone(),
            }),
            dropped: basis.dropped.clone(),
        }
    }

    pub fn to_basis(&self, path: &Path) -> CliResult<QuantletBasis> {
        let grid = self.grid.to_grid(path)?;
        if self.psi.len() != self.k || self.importance_order.len() != self.k {
            return Err(CliError::schema(format!("{}: K = {} disagrees with the rows", path.display(), self.k)));
        }
        if self.psi.iter().any(|r| r.len() != grid.len()) {
            return Err(CliError::schema(format!("{}: basis rows must have G values", path.display())));
        }
        Ok(QuantletBasis {
            grid,
            psi: self.psi.clone(),
            provenance: self.importance_order.clone(),
            dropped: self.dropped.clone(),
            denoise: self.denoise.as_ref().map(|d| DenoiseInfo {
                family: d.family.clone(),
                levels: d.levels,
                thresholds: d.threshold.clone(),
            }),
        })
    }
}

pub fn write_coefficients(coefs: &[QuantletCoefficients], k: usize) -> Vec<u8> {
    let mut w = writer();
    let mut header: Vec<String> = vec!["sample_id".into(), "region".into()];
    header.extend((1..=k).map(|j| format!("q_{j}")));
    write_row(&mut w, &header);
    for c in coefs {
        let mut row = vec![c.sample_id.clone(), c.region.to_string()];
        row.extend(c.coefficients.iter().map(|v| fmt_f64(*v)));
        write_row(&mut w, &row);
    }
    finish(w)
}

pub fn read_coefficients(path: &Path, bytes: &[u8]) -> CliResult<Vec<QuantletCoefficients>> {
    let mut rdr = reader(bytes);
    let header = headers(path, &mut rdr)?;
    expect_prefix(path, &header, &["sample_id", "region"])?;
    let k = numbered(path, &header[2..], "q_")?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| CliError::csv(path, e))?;
        let line = line_of(&rec);
        out.push(QuantletCoefficients {
            sample_id: rec[0].to_string(),
            region: region_of(path, line, &rec[1])?,
            coefficients: (0..k)
                .map(|j| parse_f64(path, line, &rec[2 + j], "coefficient"))
                .collect::<CliResult<_>>()?,
        });
    }
    Ok(out)
}

// ---------------------------------------------------------------- records

const VECTOR_BLOCKS: [Block; 5] = [Block::Demographics, Block::Radiomics, Block::Lesional, Block::Peri, Block::Whole];

fn vector_block(r: &SubjectRecord, block: Block) -> Option<&Vec<f64>> {
    match block {
        Block::Demographics => (!r.demographics.is_empty()).then_some(&r.demographics),
        Block::Radiomics => (!r.radiomics.is_empty()).then_some(&r.radiomics),
        Block::Lesional => r.lesional.as_ref(),
        Block::Peri => r.peri.as_ref(),
        Block::Whole => r.whole.as_ref(),
        Block::Mean | Block::Median => None,
    }
}

/// Subject table `sample_id,label,demo_*,rad_*,mean,median,q_lesion_*,...`.
/// Blocks no record carries are omitted; a record lacking a present block
/// leaves its cells empty.
pub fn write_records(records: &[SubjectRecord]) -> Vec<u8> {
    let width = |b: Block| records.iter().filter_map(|r| vector_block(r, b)).map(Vec::len).max().unwrap_or(0);
    let has_mean = records.iter().any(|r| r.mean.is_some());
    let has_median = records.iter().any(|r| r.median.is_some());
    let widths: Vec<(Block, usize)> = VECTOR_BLOCKS.iter().map(|&b| (b, width(b))).collect();

    let mut header: Vec<String> = vec!["sample_id".into(), "label".into()];
    let push_block = |header: &mut Vec<String>, b: Block, w: usize| {
        header.extend((1..=w).map(|k| format!("{}_{k}", b.prefix())));
    };
    push_block(&mut header, Block::Demographics, widths[0].1);
    push_block(&mut header, Block::Radiomics, widths[1].1);
    if has_mean {
        header.push("mean".into());
    }
    if has_median {
        header.push("median".into());
    }
    for &(b, w) in &widths[2..] {
        push_block(&mut header, b, w);
    }

    let mut w = writer();
    write_row(&mut w, &header);
    for r in records {
        let mut row = vec![r.sample_id.clone(), r.label.to_string()];
        let cells = |row: &mut Vec<String>, b: Block, width: usize| {
            let v = vector_block(r, b);
            row.extend((0..width).map(|k| v.and_then(|v| v.get(k)).map(|x| fmt_f64(*x)).unwrap_or_default()));
        };
        cells(&mut row, Block::Demographics, widths[0].1);
        cells(&mut row, Block::Radiomics, widths[1].1);
        if has_mean {
            row.push(r.mean.map(fmt_f64).unwrap_or_default());
        }
        if has_median {
            row.push(r.median.map(fmt_f64).unwrap_or_default());
        }
        for &(b, width) in &widths[2..] {
            cells(&mut row, b, width);
        }
        write_row(&mut w, &row);
    }
    finish(w)
}

enum Column {
    Vector(Block),
    Mean,
    Median,
}

pub fn read_records(path: &Path, bytes: &[u8]) -> CliResult<Vec<SubjectRecord>> {
    let mut rdr = reader(bytes);
    let header = headers(path, &mut rdr)?;
    expect_prefix(path, &header, &["sample_id", "label"])?;
    let mut columns = Vec::new();
    let mut counts: HashMap<Block, usize> = HashMap::new();
    for name in &header[2..] {
        let col = match name.as_str() {
            "mean" => Column::Mean,
            "median" => Column::Median,
            other => {
                let (prefix, idx) = other
                    .rsplit_once('_')
                    .and_then(|(p, i)| Some((p, i.parse::<usize>().ok()?)))
                    .ok_or_else(|| CliError::schema(format!("{}: unknown column `{other}`", path.display())))?;
                let block = VECTOR_BLOCKS
                    .into_iter()
                    .find(|b| b.prefix() == prefix)
                    .ok_or_else(|| CliError::schema(format!("{}: unknown column `{other}`", path.display())))?;
                let seen = counts.entry(block).or_default();
                *seen += 1;
                if idx != *seen {
                    return Err(CliError::schema(format!(
                        "{}: column `{other}` out of order, expected `{}_{seen}`",
                        path.display(),
                        prefix
                    )));
                }
                Column::Vector(block)
            }
        };
        columns.push(col);
    }

    let mut records = Vec::new();
    let mut seen_ids = std::collections::HashSet::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| CliError::csv(path, e))?;
        let line = line_of(&rec);
        let label = match &rec[1] {
            "0" => 0,
            "1" => 1,
            other => {
                return Err(CliError::schema(format!("{}:{line}: label `{other}` must be 0 or 1", path.display())))
            }
        };
        let mut r = SubjectRecord::new(&rec[0], label);
        if !seen_ids.insert(r.sample_id.clone()) {
            return Err(CliError::schema(format!("{}:{line}: duplicate sample `{}`", path.display(), r.sample_id)));
        }
        let mut blocks: HashMap<Block, Vec<Option<f64>>> = HashMap::new();
        for (col, field) in columns.iter().zip(rec.iter().skip(2)) {
            let value = if field.is_empty() { None } else { Some(parse_f64(path, line, field, "value")?) };
            match col {
                Column::Mean => r.mean = value,
                Column::Median => r.median = value,
                Column::Vector(b) => blocks.entry(*b).or_default().push(value),
            }
        }
        for (block, cells) in blocks {
            let filled = cells.iter().filter(|c| c.is_some()).count();
            if filled == 0 {
                continue;
            }
            if filled != cells.len() {
                return Err(CliError::schema(format!(
                    "{}:{line}: block `{}` is partly empty",
                    path.display(),
                    block.prefix()
                )));
            }
            let v: Vec<f64> = cells.into_iter().flatten().collect();
            match block {
                Block::Demographics => r.demographics = v,
                Block::Radiomics => r.radiomics = v,
                Block::Lesional => r.lesional = Some(v),
                Block::Peri => r.peri = Some(v),
                _ => r.whole = Some(v),
            }
        }
        records.push(r);
    }
    if records.is_empty() {
        return Err(CliError::schema(format!("{}: no subjects", path.display())));
    }
    Ok(records)
}

// ---------------------------------------------------------- model, metrics

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasisRef {
    pub region: Region,
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub alpha: f64,
    pub theta: Vec<f64>,
    pub layout: FeatureLayout,
    pub lambda: f64,
    /// Probability cut-off for a positive call.
    pub threshold: f64,
    pub basis_ref: Vec<BasisRef>,
    pub converged: bool,
    pub capped: bool,
}

impl ModelFile {
    pub fn new(model: &ClassifierFit, threshold: f64, basis_ref: Vec<BasisRef>) -> Self {
        ModelFile {
            alpha: model.fit.intercept,
            theta: model.fit.coefficients.clone(),
            layout: model.layout.clone(),
            lambda: model.fit.lambda,
            threshold,
            basis_ref,
            converged: model.fit.converged,
            capped: model.fit.capped,
        }
    }

    /// Probability for one feature row laid out as in `layout`.
    pub fn probability(&self, row: &[f64]) -> f64 {
        let eta = self.alpha + self.theta.iter().zip(row).map(|(t, x)| t * x).sum::<f64>();
        1.0 / (1.0 + (-eta).exp())
    }
}

/// A metrics row whose `K` column is empty for sets without quantlets.
pub struct MetricsLine {
    pub row: MetricsRow,
    pub k: Option<usize>,
}

pub fn write_metrics(lines: &[MetricsLine]) -> Vec<u8> {
    let opt = |v: Option<f64>| v.map(fmt_f64).unwrap_or_default();
    let mut w = writer();
    write_row(&mut w, ["features", "K", "sens", "spec", "f1", "acc"]);
    for l in lines {
        let r = &l.row;
        write_row(
            &mut w,
            [
                r.features.clone(),
                l.k.map(|k| k.to_string()).unwrap_or_default(),
                opt(r.sensitivity),
                opt(r.specificity),
                fmt_f64(r.f1),
                fmt_f64(r.accuracy),
            ],
        );
    }
    finish(w)
}

/// One parsed row of a metrics file.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRecord {
    pub features: String,
    pub k: Option<usize>,
    pub sens: Option<f64>,
    pub spec: Option<f64>,
    pub f1: f64,
    pub acc: f64,
}

pub fn read_metrics(path: &Path, bytes: &[u8]) -> CliResult<Vec<MetricsRecord>> {
    let mut rdr = reader(bytes);
    let header = headers(path, &mut rdr)?;
    expect_prefix(path, &header, &["features", "K", "sens", "spec", "f1", "acc"])?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| CliError::csv(path, e))?;
        let line = line_of(&rec);
        let opt = |i: usize, what: &str| -> CliResult<Option<f64>> {
            if rec[i].is_empty() {
                Ok(None)
            } else {
                parse_f64(path, line, &rec[i], what).map(Some)
            }
        };
        out.push(MetricsRecord {
            features: rec[0].to_string(),
            k: if rec[1].is_empty() { None } else { Some(parse_u64(path, line, &rec[1], "K")? as usize) },
            sens: opt(2, "sens")?,
            spec: opt(3, "spec")?,
            f1: parse_f64(path, line, &rec[4], "f1")?,
            acc: parse_f64(path, line, &rec[5], "acc")?,
        });
    }
    Ok(out)
}

pub fn write_predictions(blocks: &[(String, Option<usize>, Vec<SamplePrediction>)]) -> Vec<u8> {
    let mut w = writer();
    write_row(&mut w, ["features", "K", "sample_id", "y_true", "prob", "y_pred"]);
    for (features, k, preds) in blocks {
        for p in preds {
            write_row(
                &mut w,
                [
                    features.clone(),
                    k.map(|k| k.to_string()).unwrap_or_default(),
                    p.sample_id.clone(),
                    p.y_true.to_string(),
                    fmt_f64(p.probability),
                    p.y_pred.to_string(),
                ],
            );
        }
    }
    finish(w)
}
