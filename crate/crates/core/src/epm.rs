//! Enhancement pattern mapping: per-voxel RMSD between a voxel's
//! multi-phase intensity series and a fitted normal-tissue enhancement
//! curve.
//!
//! The normal curve is two quadratic pieces joined continuously at a knot.
//! The knot is picked by exhaustive search over the interior phase times,
//! minimizing the residual sum of squares over all normal-ROI samples.

use alloc::collections::BTreeMap;
use alloc::collections::BTreeSet;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;

/// Minimum number of normal-ROI voxels needed to fit the enhancement curve.
pub const MIN_ROI_VOXELS: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VoxelRegion {
    NormalRoi,
    Lesion,
    Peri,
    Liver,
    Background,
}

impl VoxelRegion {
    pub fn as_str(self) -> &'static str {
        match self {
            VoxelRegion::NormalRoi => "normal_roi",
            VoxelRegion::Lesion => "lesion",
            VoxelRegion::Peri => "peri",
            VoxelRegion::Liver => "liver",
            VoxelRegion::Background => "background",
        }
    }
}

impl fmt::Display for VoxelRegion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for VoxelRegion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "normal_roi" => VoxelRegion::NormalRoi,
            "lesion" => VoxelRegion::Lesion,
            "peri" => VoxelRegion::Peri,
            "liver" => VoxelRegion::Liver,
            "background" => VoxelRegion::Background,
            other => return Err(Error::schema(format!("unknown voxel region `{other}`"))),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Voxel {
    pub id: u64,
    pub coords: [i64; 3],
    pub intensities: Vec<f64>,
    pub region: VoxelRegion,
}

/// Registered multi-phase intensity series for one volume.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseSeriesVolume {
    phase_times: Vec<f64>,
    voxels: Vec<Voxel>,
}

impl PhaseSeriesVolume {
    /// Builds a volume, using ordinal phase times `0..P-1` unless explicit
    /// times are given.
    pub fn new(voxels: Vec<Voxel>, phase_times: Option<Vec<f64>>) -> Result<Self> {
        let phases = match (&phase_times, voxels.first()) {
            (Some(t), _) => t.len(),
            (None, Some(v)) => v.intensities.len(),
            (None, None) => return Err(Error::schema("volume has no voxels and no phase times")),
        };
        if phases < 3 {
            return Err(Error::schema(format!("{phases} phases, at least 3 required")));
        }
        let phase_times = phase_times.unwrap_or_else(|| (0..phases).map(|t| t as f64).collect());
        if phase_times.windows(2).any(|w| !(w[1] > w[0])) || phase_times.iter().any(|t| !t.is_finite()) {
            return Err(Error::schema("phase times must be finite and strictly increasing"));
        }
        let mut seen = BTreeSet::new();
        for v in &voxels {
            if v.intensities.len() != phases {
                return Err(Error::schema(format!(
                    "voxel {} has {} intensities, expected {phases}",
                    v.id,
                    v.intensities.len()
                )));
            }
            if v.intensities.iter().any(|x| !x.is_finite()) {
                return Err(Error::schema(format!("voxel {} has a non-finite intensity", v.id)));
            }
            if !seen.insert(v.id) {
                return Err(Error::schema(format!("duplicate voxel id {}", v.id)));
            }
        }
        Ok(PhaseSeriesVolume { phase_times, voxels })
    }

    pub fn phases(&self) -> usize {
        self.phase_times.len()
    }

    pub fn phase_times(&self) -> &[f64] {
        &self.phase_times
    }

    pub fn voxels(&self) -> &[Voxel] {
        &self.voxels
    }

    fn roi_series(&self) -> impl Iterator<Item = &[f64]> {
        self.voxels.iter().filter(|v| v.region == VoxelRegion::NormalRoi).map(|v| v.intensities.as_slice())
    }
}

/// Two quadratics joined at `knot`; the left piece covers `t <= knot`.
///
/// Coefficients are in ascending powers of `t`: `c[0] + c[1] t + c[2] t²`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalEnhancementCurve {
    pub knot: f64,
    pub left: [f64; 3],
    pub right: [f64; 3],
    pub phase_times: Vec<f64>,
    /// Residual sum of squares of the fit over the ROI samples.
    pub rss: f64,
}

impl NormalEnhancementCurve {
    pub fn constant(value: f64, phase_times: Vec<f64>) -> Self {
        let knot = phase_times[phase_times.len() / 2];
        NormalEnhancementCurve { knot, left: [value, 0.0, 0.0], right: [value, 0.0, 0.0], phase_times, rss: 0.0 }
    }

    pub fn eval(&self, t: f64) -> f64 {
        let c = if t <= self.knot { &self.left } else { &self.right };
        c[0] + t * (c[1] + t * c[2])
    }

    /// Curve values at every phase time.
    pub fn values(&self) -> Vec<f64> {
        self.phase_times.iter().map(|&t| self.eval(t)).collect()
    }

    /// Gap between the two pieces at the knot.
    pub fn continuity_gap(&self) -> f64 {
        let k = self.knot;
        let l = self.left[0] + k * (self.left[1] + k * self.left[2]);
        let r = self.right[0] + k * (self.right[1] + k * self.right[2]);
        (l - r).abs()
    }

    /// Multiplies the curve by `c`.
    pub fn scaled(&self, c: f64) -> Self {
        let mut out = self.clone();
        out.left.iter_mut().chain(out.right.iter_mut()).for_each(|x| *x *= c);
        out.rss *= c * c;
        out
    }
}

/// Patient-specific fit from the volume's own normal-ROI voxels.
pub fn fit_normal_curve(volume: &PhaseSeriesVolume) -> Result<NormalEnhancementCurve> {
    let series: Vec<&[f64]> = volume.roi_series().collect();
    fit_series(&series, volume.phase_times())
}

/// Population fit pooling normal-ROI voxels across volumes that share phase
/// times.
pub fn fit_pooled_curve(volumes: &[PhaseSeriesVolume]) -> Result<NormalEnhancementCurve> {
    let first = volumes.first().ok_or_else(|| Error::schema("no volumes supplied"))?;
    for v in volumes {
        if v.phase_times() != first.phase_times() {
            return Err(Error::schema("pooled volumes must share phase times"));
        }
    }
    let series: Vec<&[f64]> = volumes.iter().flat_map(|v| v.roi_series()).collect();
    fit_series(&series, first.phase_times())
}

fn fit_series(series: &[&[f64]], times: &[f64]) -> Result<NormalEnhancementCurve> {
    if series.len() < MIN_ROI_VOXELS {
        return Err(Error::InsufficientRoi { found: series.len(), required: MIN_ROI_VOXELS });
    }
    let first = series[0][0];
    if series.iter().all(|s| s.iter().all(|&y| y == first)) {
        return Ok(NormalEnhancementCurve::constant(first, times.to_vec()));
    }

    let y: Vec<f64> = series.iter().flat_map(|s| s.iter().copied()).collect();
    let t_all: Vec<f64> = series.iter().flat_map(|_| times.iter().copied()).collect();

    // Knots whose pieces both support a full quadratic go first, so that
    // exact ties (e.g. data lying on one parabola) resolve to them.
    let mut knots: Vec<f64> = times[1..times.len() - 1].to_vec();
    knots.sort_by_key(|&k| {
        let (l, r) = piece_degrees(times, k);
        4 - l - r
    });
    let tol = 1e-12 * y.iter().map(|v| v * v).sum::<f64>();
    let mut best: Option<NormalEnhancementCurve> = None;
    for knot in knots {
        let Some(curve) = fit_with_knot(&t_all, &y, times, knot) else { continue };
        if best.as_ref().is_none_or(|b| curve.rss < b.rss - tol) {
            best = Some(curve);
        }
    }
    best.ok_or_else(|| Error::domain("enhancement curve design is rank deficient for every knot"))
}

/// Polynomial degree each piece can support: one less than the number of
/// distinct phase times it covers (knot included), capped at 2.
pub fn piece_degrees(times: &[f64], knot: f64) -> (usize, usize) {
    let left = times.iter().filter(|&&t| t <= knot).count();
    let right = times.iter().filter(|&&t| t >= knot).count();
    ((left - 1).min(2), (right - 1).min(2))
}

fn fit_with_knot(t_all: &[f64], y: &[f64], times: &[f64], knot: f64) -> Option<NormalEnhancementCurve> {
    let (deg_l, deg_r) = piece_degrees(times, knot);
    // Shared value at the knot plus per-side powers of (t - knot); continuity
    // holds by construction.
    let n = y.len();
    let mut columns = vec![vec![1.0; n]];
    for d in 1..=deg_l {
        columns.push(t_all.iter().map(|&t| if t <= knot { powi(t - knot, d) } else { 0.0 }).collect());
    }
    for d in 1..=deg_r {
        columns.push(t_all.iter().map(|&t| if t > knot { powi(t - knot, d) } else { 0.0 }).collect());
    }
    let beta = linalg::least_squares(&columns, y)?;

    let c0 = beta[0];
    let mut lc = [c0, 0.0, 0.0];
    let mut rc = [c0, 0.0, 0.0];
    lc[1..=deg_l].copy_from_slice(&beta[1..=deg_l]);
    rc[1..=deg_r].copy_from_slice(&beta[1 + deg_l..]);

    let rss = columns_rss(&columns, &beta, y);
    Some(NormalEnhancementCurve {
        knot,
        left: shift_to_origin(lc, knot),
        right: shift_to_origin(rc, knot),
        phase_times: times.to_vec(),
        rss,
    })
}

fn powi(x: f64, d: usize) -> f64 {
    (0..d).fold(1.0, |acc, _| acc * x)
}

fn columns_rss(columns: &[Vec<f64>], beta: &[f64], y: &[f64]) -> f64 {
    (0..y.len())
        .map(|i| {
            let fit: f64 = columns.iter().zip(beta).map(|(c, b)| c[i] * b).sum();
            (y[i] - fit) * (y[i] - fit)
        })
        .sum()
}

// c0 + c1 (t-k) + c2 (t-k)²  ->  ascending powers of t
fn shift_to_origin(c: [f64; 3], k: f64) -> [f64; 3] {
    [c[0] - c[1] * k + c[2] * k * k, c[1] - 2.0 * c[2] * k, c[2]]
}

/// Voxel id → EPM value, ordered by id.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EpmMap {
    pub values: BTreeMap<u64, f64>,
}

impl EpmMap {
    pub fn get(&self, id: u64) -> Option<f64> {
        self.values.get(&id).copied()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Root-mean-square deviation between a curve and an intensity series.
pub fn rmsd(curve_values: &[f64], intensities: &[f64]) -> f64 {
    debug_assert_eq!(curve_values.len(), intensities.len());
    let ss: f64 = curve_values.iter().zip(intensities).map(|(c, x)| (c - x) * (c - x)).sum();
    libm::sqrt(ss / intensities.len() as f64)
}

/// EPM value for every non-background voxel.
pub fn compute_epm(volume: &PhaseSeriesVolume, curve: &NormalEnhancementCurve) -> Result<EpmMap> {
    if curve.phase_times.len() != volume.phases() {
        return Err(Error::schema(format!(
            "curve has {} phase times, volume has {}",
            curve.phase_times.len(),
            volume.phases()
        )));
    }
    let reference: Vec<f64> = volume.phase_times().iter().map(|&t| curve.eval(t)).collect();
    let kept: Vec<&Voxel> = volume.voxels.iter().filter(|v| v.region != VoxelRegion::Background).collect();
    let epm = crate::par::map(&kept, |v| (v.id, rmsd(&reference, &v.intensities)));
    Ok(EpmMap { values: epm.into_iter().collect() })
}
