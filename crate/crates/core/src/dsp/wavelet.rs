//! Multilevel db8 discrete wavelet transform and its inverse.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// db8 decomposition low-pass filter (16 taps).
pub const DB8_LO: [f64; 16] = [
    -0.00011747678412476953,
    0.0006754494064505693,
    -0.00039174037337694705,
    -0.004870352993451574,
    0.008746094047405777,
    0.013981027917398282,
    -0.044088253930794755,
    -0.017369301001807547,
    0.12874742662047847,
    0.0004724845739132828,
    -0.2840155429615469,
    -0.015829105256349306,
    0.5853546836542067,
    0.6756307362972898,
    0.31287159091429995,
    0.05441584224310401,
];

pub const FILTER_LEN: usize = DB8_LO.len();

/// Quadrature-mirror high-pass: `hi[k] = (-1)^(k+1) lo[L-1-k]`.
pub fn db8_hi() -> [f64; 16] {
    let mut hi = [0.0; 16];
    for (k, h) in hi.iter_mut().enumerate() {
        let sign = if k % 2 == 0 { -1.0 } else { 1.0 };
        *h = sign * DB8_LO[FILTER_LEN - 1 - k];
    }
    hi
}

/// Boundary handling for the analysis filters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Extension {
    /// Half-sample symmetric reflection; output length `floor((N + 15) / 2)`.
    #[default]
    Symmetric,
    /// Periodization; output length `N / 2`, orthonormal.
    Periodic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaveletDecomposition {
    /// `details[d - 1]` holds level-`d` detail coefficients.
    pub details: Vec<Vec<f64>>,
    /// Approximation coefficients at the deepest level.
    pub approximation: Vec<f64>,
    /// Input length at each level, `lengths[0]` being the signal length.
    pub lengths: Vec<usize>,
    pub extension: Extension,
}

impl WaveletDecomposition {
    pub fn levels(&self) -> usize {
        self.details.len()
    }

    /// Detail coefficients at level `d` (1-based).
    pub fn detail(&self, level: usize) -> &[f64] {
        &self.details[level - 1]
    }

    pub fn coefficient_count(&self) -> usize {
        self.details.iter().map(Vec::len).sum::<usize>() + self.approximation.len()
    }

    pub fn energy(&self) -> f64 {
        self.details
            .iter()
            .flatten()
            .chain(&self.approximation)
            .map(|c| c * c)
            .sum()
    }
}

/// Nominal frequency range of detail level `d` at rate `fs`.
pub fn detail_band(level: usize, fs: f64) -> (f64, f64) {
    let hi = fs / 2f64.powi(level as i32);
    (hi / 2.0, hi)
}

/// Deepest useful level, `floor(log2(len / (L - 1)))`.
pub fn max_level(len: usize) -> usize {
    if len < FILTER_LEN {
        return 0;
    }
    let mut level = 0;
    while (len >> (level + 1)) >= FILTER_LEN - 1 {
        level += 1;
    }
    level
}

/// Periodization offset matching the common `L/2 - 1` alignment.
const PERIODIC_SHIFT: isize = FILTER_LEN as isize / 2 - 1;

fn reflect(i: isize, n: usize) -> usize {
    let n = n as isize;
    let m = i.rem_euclid(2 * n);
    (if m < n { m } else { 2 * n - 1 - m }) as usize
}

fn analysis_step(x: &[f64], ext: Extension, lo: &[f64], hi: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = x.len();
    let out_len = match ext {
        Extension::Symmetric => (n + FILTER_LEN - 1) / 2,
        Extension::Periodic => n / 2,
    };
    let mut a = vec![0.0; out_len];
    let mut d = vec![0.0; out_len];
    for o in 0..out_len {
        let mut sa = 0.0;
        let mut sd = 0.0;
        for j in 0..FILTER_LEN {
            let idx = 2 * o as isize + 1 - j as isize;
            let v = match ext {
                Extension::Symmetric => x[reflect(idx, n)],
                Extension::Periodic => x[(idx + PERIODIC_SHIFT).rem_euclid(n as isize) as usize],
            };
            sa += lo[j] * v;
            sd += hi[j] * v;
        }
        a[o] = sa;
        d[o] = sd;
    }
    (a, d)
}

fn synthesis_step(a: &[f64], d: &[f64], n: usize, ext: Extension, lo: &[f64], hi: &[f64]) -> Vec<f64> {
    let mut x = vec![0.0; n];
    for o in 0..a.len() {
        for j in 0..FILTER_LEN {
            let idx = 2 * o as isize + 1 - j as isize;
            let target = match ext {
                Extension::Symmetric => {
                    if idx < 0 || idx >= n as isize {
                        continue;
                    }
                    idx as usize
                }
                Extension::Periodic => (idx + PERIODIC_SHIFT).rem_euclid(n as isize) as usize,
            };
            x[target] += a[o] * lo[j] + d[o] * hi[j];
        }
    }
    x
}

/// Decomposes `signal` to `levels` levels with db8 analysis filters.
pub fn dwt_db8(signal: &[f64], levels: usize, extension: Extension) -> Result<WaveletDecomposition> {
    if signal.len() < FILTER_LEN {
        return Err(Error::Parameter(format!(
            "signal of {} samples shorter than the {FILTER_LEN}-tap filter",
            signal.len()
        )));
    }
    let max = max_level(signal.len());
    if levels == 0 || levels > max {
        return Err(Error::LevelTooDeep {
            requested: levels,
            max,
            len: signal.len(),
        });
    }
    if extension == Extension::Periodic && !signal.len().is_multiple_of(1 << levels) {
        return Err(Error::Parameter(format!(
            "periodic mode needs a length divisible by 2^{levels}"
        )));
    }
    let hi = db8_hi();
    let mut approx = signal.to_vec();
    let mut details = Vec::with_capacity(levels);
    let mut lengths = Vec::with_capacity(levels);
    for _ in 0..levels {
        lengths.push(approx.len());
        let (a, d) = analysis_step(&approx, extension, &DB8_LO, &hi);
        details.push(d);
        approx = a;
    }
    Ok(WaveletDecomposition {
        details,
        approximation: approx,
        lengths,
        extension,
    })
}

/// Reconstructs the signal from a decomposition.
pub fn idwt_db8(dec: &WaveletDecomposition) -> Vec<f64> {
    let hi = db8_hi();
    let mut approx = dec.approximation.clone();
    for level in (0..dec.levels()).rev() {
        approx = synthesis_step(
            &approx,
            &dec.details[level],
            dec.lengths[level],
            dec.extension,
            &DB8_LO,
            &hi,
        );
    }
    approx
}
