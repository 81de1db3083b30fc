//! Periodic orthogonal discrete wavelet transform (Symlet 4) and
//! universal-threshold soft shrinkage.

use alloc::vec;
use alloc::vec::Vec;

/// Symlet-4 decomposition lowpass filter.
pub const SYM4_LOWPASS: [f64; 8] = [
    -0.075_765_714_789_502_21,
    -0.029635527646002492,
    0.497_618_667_632_775,
    0.803_738_751_805_132_1,
    0.29785779560530605,
    -0.099_219_543_576_633_54,
    -0.012603967262031304,
    0.032223100604051468,
];

/// Quadrature-mirror highpass: `g[n] = (-1)^n h[L-1-n]`.
pub fn sym4_highpass() -> [f64; 8] {
    let mut g = [0.0; 8];
    for (n, gn) in g.iter_mut().enumerate() {
        let v = SYM4_LOWPASS[7 - n];
        *gn = if n % 2 == 0 { v } else { -v };
    }
    g
}

/// Deepest level such that the coarsest approximation still spans the
/// filter: `floor(log2(n / (L - 1)))`, at least 1.
pub fn max_level(n: usize) -> usize {
    let ratio = n / (SYM4_LOWPASS.len() - 1);
    if ratio < 2 {
        1
    } else {
        (usize::BITS - 1 - ratio.leading_zeros()) as usize
    }
}

fn analysis_step(x: &[f64], h: &[f64; 8], g: &[f64; 8]) -> (Vec<f64>, Vec<f64>) {
    let n = x.len();
    let half = n / 2;
    let mut a = vec![0.0; half];
    let mut d = vec![0.0; half];
    for k in 0..half {
        let mut sa = 0.0;
        let mut sd = 0.0;
        for t in 0..8 {
            let v = x[(2 * k + t) % n];
            sa += h[t] * v;
            sd += g[t] * v;
        }
        a[k] = sa;
        d[k] = sd;
    }
    (a, d)
}

fn synthesis_step(a: &[f64], d: &[f64], h: &[f64; 8], g: &[f64; 8]) -> Vec<f64> {
    let n = 2 * a.len();
    let mut x = vec![0.0; n];
    for k in 0..a.len() {
        for t in 0..8 {
            x[(2 * k + t) % n] += h[t] * a[k] + g[t] * d[k];
        }
    }
    x
}

/// Multilevel decomposition. Returns the coarsest approximation and the
/// detail bands ordered finest first. `x.len()` must be divisible by
/// `2^levels`.
pub fn dwt(x: &[f64], levels: usize) -> (Vec<f64>, Vec<Vec<f64>>) {
    let g = sym4_highpass();
    let mut approx = x.to_vec();
    let mut details = Vec::with_capacity(levels);
    for _ in 0..levels {
        let (a, d) = analysis_step(&approx, &SYM4_LOWPASS, &g);
        details.push(d);
        approx = a;
    }
    (approx, details)
}

/// Inverse of [`dwt`].
pub fn idwt(approx: &[f64], details: &[Vec<f64>]) -> Vec<f64> {
    let g = sym4_highpass();
    let mut x = approx.to_vec();
    for d in details.iter().rev() {
        x = synthesis_step(&x, d, &SYM4_LOWPASS, &g);
    }
    x
}

pub fn soft(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Noise scale from the finest detail band: `median(|d|) / 0.6745`.
pub fn mad_sigma(finest: &[f64]) -> f64 {
    median(finest.iter().map(|v| v.abs()).collect()) / 0.6745
}

/// Result of [`denoise`].
#[derive(Debug, Clone, PartialEq)]
pub struct Denoised {
    pub values: Vec<f64>,
    pub sigma: f64,
    pub threshold: f64,
}

/// Soft-thresholds every detail band at `σ̂·sqrt(2 ln n)` and inverts.
pub fn denoise(x: &[f64], levels: usize) -> Denoised {
    let (approx, mut details) = dwt(x, levels);
    let sigma = mad_sigma(&details[0]);
    let threshold = sigma * libm::sqrt(2.0 * libm::log(x.len() as f64));
    for band in &mut details {
        for v in band.iter_mut() {
            *v = soft(*v, threshold);
        }
    }
    Denoised { values: idwt(&approx, &details), sigma, threshold }
}
