//! 39-dimensional MFCC + delta + delta-delta feature extraction for
//! non-silent slices.

use serde::{Deserialize, Serialize};

use crate::dsp;
use crate::error::{Error, Result};
use crate::segment::NonSilentSlice;

pub const N_STATIC: usize = 13;
pub const N_FEATURES: usize = 39;

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct MfccParams {
    /// Analysis frame length in seconds.
    pub frame_len: f64,
    /// Frame hop in seconds.
    pub hop: f64,
    /// Pre-emphasis coefficient.
    pub pre_emphasis: f64,
    /// Number of triangular mel filters spanning 0..sample_rate/2.
    pub n_filters: usize,
    /// Regression half-width, in frames, of the delta computation.
    pub delta_window: usize,
    /// Floor applied before taking logs of filterbank energies.
    pub log_floor: f64,
}

impl Default for MfccParams {
    fn default() -> Self {
        MfccParams {
            frame_len: 0.025,
            hop: 0.010,
            pre_emphasis: 0.97,
            n_filters: 26,
            delta_window: 2,
            log_floor: 1e-10,
        }
    }
}

/// 13 MFCC, 13 delta and 13 delta-delta coefficients, in that order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector(pub Vec<f64>);

impl FeatureVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// The per-frame feature stream of one slice.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FeatureSequence {
    pub vectors: Vec<FeatureVector>,
    pub slice: Option<NonSilentSlice>,
}

impl FeatureSequence {
    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }
}

/// Extract the 39-dim MFCC feature stream of a slice of audio.
pub fn mfcc(samples: &[f64], sample_rate: u32, params: &MfccParams) -> Result<FeatureSequence> {
    let rate = sample_rate as f64;
    let frame_n = (params.frame_len * rate).round() as usize;
    let hop_n = (params.hop * rate).round() as usize;
    if samples.len() < frame_n || frame_n == 0 || hop_n == 0 {
        return Err(Error::SliceTooShort(samples.len()));
    }

    // Pre-emphasis over the whole slice.
    let mut emphasized = Vec::with_capacity(samples.len());
    emphasized.push(samples[0]);
    for i in 1..samples.len() {
        emphasized.push(samples[i] - params.pre_emphasis * samples[i - 1]);
    }

    let window = hamming(frame_n);
    let filterbank = mel_filterbank(params.n_filters, frame_n, rate);
    let n_frames = (samples.len() - frame_n) / hop_n + 1;

    let mut statics: Vec<Vec<f64>> = Vec::with_capacity(n_frames);
    let mut windowed = vec![0.0; frame_n];
    for f in 0..n_frames {
        let start = f * hop_n;
        for (i, w) in window.iter().enumerate() {
            windowed[i] = emphasized[start + i] * w;
        }
        let mags = dsp::magnitude_spectrum(&windowed);
        let log_energies: Vec<f64> = filterbank
            .iter()
            .map(|filter| {
                let e: f64 = filter.iter().map(|&(bin, w)| mags[bin] * w).sum();
                e.max(params.log_floor).ln()
            })
            .collect();
        statics.push(dct_ii(&log_energies, N_STATIC));
    }

    let deltas = regression_deltas(&statics, params.delta_window);
    let delta_deltas = regression_deltas(&deltas, params.delta_window);

    let vectors = statics
        .into_iter()
        .zip(deltas)
        .zip(delta_deltas)
        .map(|((s, d), dd)| {
            let mut v = Vec::with_capacity(N_FEATURES);
            v.extend(s);
            v.extend(d);
            v.extend(dd);
            FeatureVector(v)
        })
        .collect();

    Ok(FeatureSequence {
        vectors,
        slice: None,
    })
}

fn hamming(n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![1.0];
    }
    (0..n)
        .map(|i| 0.54 - 0.46 * (2.0 * std::f64::consts::PI * i as f64 / (n - 1) as f64).cos())
        .collect()
}

fn hz_to_mel(f: f64) -> f64 {
    2595.0 * (1.0 + f / 700.0).log10()
}

fn mel_to_hz(m: f64) -> f64 {
    700.0 * (10f64.powf(m / 2595.0) - 1.0)
}

/// Sparse triangular filters as (bin, weight) lists over the one-sided
/// magnitude spectrum.
fn mel_filterbank(n_filters: usize, frame_n: usize, rate: f64) -> Vec<Vec<(usize, f64)>> {
    let nyquist = rate / 2.0;
    let max_mel = hz_to_mel(nyquist);
    let points: Vec<f64> = (0..n_filters + 2)
        .map(|i| mel_to_hz(max_mel * i as f64 / (n_filters + 1) as f64))
        .collect();
    let bin_hz = rate / frame_n as f64;
    let n_bins = frame_n / 2 + 1;

    (0..n_filters)
        .map(|f| {
            let (lo, mid, hi) = (points[f], points[f + 1], points[f + 2]);
            let mut taps = Vec::new();
            for bin in 0..n_bins {
                let freq = bin as f64 * bin_hz;
                let w = if freq >= lo && freq <= mid && mid > lo {
                    (freq - lo) / (mid - lo)
                } else if freq > mid && freq <= hi && hi > mid {
                    (hi - freq) / (hi - mid)
                } else {
                    0.0
                };
                if w > 0.0 {
                    taps.push((bin, w));
                }
            }
            taps
        })
        .collect()
}

/// Orthonormal DCT-II keeping the first `keep` coefficients.
fn dct_ii(input: &[f64], keep: usize) -> Vec<f64> {
    let m = input.len();
    let scale0 = (1.0 / m as f64).sqrt();
    let scale = (2.0 / m as f64).sqrt();
    (0..keep)
        .map(|k| {
            let sum: f64 = input
                .iter()
                .enumerate()
                .map(|(i, &x)| {
                    x * (std::f64::consts::PI * k as f64 * (2.0 * i as f64 + 1.0)
                        / (2.0 * m as f64))
                        .cos()
                })
                .sum();
            if k == 0 {
                scale0 * sum
            } else {
                scale * sum
            }
        })
        .collect()
}

/// Normalized regression over +-width frames with edge replication.
fn regression_deltas(frames: &[Vec<f64>], width: usize) -> Vec<Vec<f64>> {
    if frames.is_empty() {
        return Vec::new();
    }
    let dims = frames[0].len();
    let norm: f64 = 2.0 * (1..=width).map(|k| (k * k) as f64).sum::<f64>();
    let clamp = |i: isize| -> &Vec<f64> {
        let idx = i.clamp(0, frames.len() as isize - 1) as usize;
        &frames[idx]
    };
    (0..frames.len() as isize)
        .map(|t| {
            (0..dims)
                .map(|d| {
                    let mut acc = 0.0;
                    for k in 1..=width as isize {
                        acc += k as f64 * (clamp(t + k)[d] - clamp(t - k)[d]);
                    }
                    acc / norm
                })
                .collect()
        })
        .collect()
}
