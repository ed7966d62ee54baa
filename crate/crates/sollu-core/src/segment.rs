//! Silence detection by dual-feature histogram thresholding and emission of
//! the non-silent slices that carry bols and stick-beats.

use serde::{Deserialize, Serialize};

use crate::audio::{self, AudioSignal};
use crate::dsp;
use crate::error::Result;

/// Default analysis window in seconds.
pub const DEFAULT_WIN: f64 = 0.090;
/// Default window advance in seconds.
pub const DEFAULT_STEP: f64 = 0.010;
/// Default histogram weight; zero puts the threshold at the second maximum.
pub const DEFAULT_WEIGHT: f64 = 0.0;
/// Slices shorter than this are treated as click artifacts and dropped.
pub const DEFAULT_MIN_SLICE: f64 = 0.05;

const HISTOGRAM_BINS: usize = 100;

/// A maximal run of non-silent frames, as a time interval plus the covered
/// sample range of the parent signal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NonSilentSlice {
    pub start: f64,
    pub end: f64,
    pub sample_start: usize,
    pub sample_end: usize,
}

impl NonSilentSlice {
    pub fn duration(&self) -> f64 {
        self.end - self.start
    }

    pub fn samples<'a>(&self, sig: &'a AudioSignal) -> &'a [f64] {
        &sig.samples()[self.sample_start..self.sample_end.min(sig.len())]
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SegmentParams {
    pub win: f64,
    pub step: f64,
    pub weight: f64,
    pub min_slice: f64,
}

impl Default for SegmentParams {
    fn default() -> Self {
        SegmentParams {
            win: DEFAULT_WIN,
            step: DEFAULT_STEP,
            weight: DEFAULT_WEIGHT,
            min_slice: DEFAULT_MIN_SLICE,
        }
    }
}

/// Threshold a feature sequence from its histogram: T = (W*M1 + M2)/(W+1)
/// where M1, M2 are the values at the two lowest-position local maxima of
/// the smoothed 100-bin histogram. Falls back to the midpoint of the value
/// range when fewer than two local maxima exist.
pub fn histogram_threshold(values: &[f64], weight: f64) -> f64 {
    let (min, max) = value_range(values);
    if !(max > min) {
        return min;
    }
    let width = (max - min) / HISTOGRAM_BINS as f64;
    let mut hist = [0.0f64; HISTOGRAM_BINS];
    for &v in values {
        let idx = (((v - min) / width) as usize).min(HISTOGRAM_BINS - 1);
        hist[idx] += 1.0;
    }
    // 3-bin moving average stabilizes maxima on small samples.
    let smoothed: Vec<f64> = (0..HISTOGRAM_BINS)
        .map(|i| {
            let left = if i > 0 { hist[i - 1] } else { 0.0 };
            let right = if i + 1 < HISTOGRAM_BINS { hist[i + 1] } else { 0.0 };
            (left + hist[i] + right) / 3.0
        })
        .collect();

    // Local maxima of the smoothed histogram. Smoothing turns isolated
    // spikes into short plateaus, so maxima are plateau runs strictly above
    // their neighbors; the reported bin is the tallest raw bin of the run.
    let mut maxima = Vec::new();
    let mut i = 0;
    while i < HISTOGRAM_BINS && maxima.len() < 2 {
        let mut j = i;
        while j + 1 < HISTOGRAM_BINS && smoothed[j + 1] == smoothed[i] {
            j += 1;
        }
        let left = if i > 0 { smoothed[i - 1] } else { f64::NEG_INFINITY };
        let right = if j + 1 < HISTOGRAM_BINS {
            smoothed[j + 1]
        } else {
            f64::NEG_INFINITY
        };
        if smoothed[i] > 0.0 && smoothed[i] > left && smoothed[i] > right {
            let mut peak_bin = i;
            for k in i..=j {
                if hist[k] > hist[peak_bin] {
                    peak_bin = k;
                }
            }
            maxima.push(peak_bin);
        }
        i = j + 1;
    }

    if maxima.len() < 2 {
        return (min + max) / 2.0;
    }
    let center = |i: usize| min + (i as f64 + 0.5) * width;
    let m1 = center(maxima[0]);
    let m2 = center(maxima[1]);
    (weight * m1 + m2) / (weight + 1.0)
}

fn value_range(values: &[f64]) -> (f64, f64) {
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    for &v in values {
        min = min.min(v);
        max = max.max(v);
    }
    if !min.is_finite() {
        (0.0, 0.0)
    } else {
        (min, max)
    }
}

/// Segment a signal into non-silent slices. A frame is silent when its
/// energy falls below the energy threshold or its spectral centroid falls
/// below the centroid threshold; maximal runs of surviving frames become
/// slices spanning first frame start to last frame end.
pub fn segment_by_silence(
    sig: &AudioSignal,
    win: f64,
    step: f64,
    weight: f64,
) -> Result<Vec<NonSilentSlice>> {
    segment_with(
        sig,
        &SegmentParams {
            win,
            step,
            weight,
            min_slice: DEFAULT_MIN_SLICE,
        },
    )
}

pub fn segment_with(sig: &AudioSignal, params: &SegmentParams) -> Result<Vec<NonSilentSlice>> {
    let frames = audio::frame_signal(sig, params.win, params.step)?;
    if frames.is_empty() {
        return Ok(Vec::new());
    }

    let energies: Vec<f64> = frames.iter().map(|f| audio::frame_energy(f.samples)).collect();
    let centroids: Vec<f64> = frames
        .iter()
        .map(|f| {
            let mags = dsp::magnitude_spectrum(f.samples);
            audio::centroid_of_magnitudes(&mags)
        })
        .collect();

    let t_energy = histogram_threshold(&energies, params.weight);
    let t_centroid = histogram_threshold(&centroids, params.weight);

    // Frames at the digital-zero floor are silent regardless of thresholds;
    // without this a fully silent file degenerates into one giant slice.
    const SILENCE_FLOOR: f64 = 1e-12;
    let silent: Vec<bool> = energies
        .iter()
        .zip(&centroids)
        .map(|(&e, &c)| e < t_energy || c < t_centroid || e < SILENCE_FLOOR)
        .collect();

    let rate = sig.sample_rate() as f64;
    let n = (params.win * rate).round() as usize;
    let hop = (params.step * rate).round() as usize;

    let mut slices: Vec<NonSilentSlice> = Vec::new();
    let mut run_start: Option<usize> = None;
    for i in 0..=silent.len() {
        let is_sound = i < silent.len() && !silent[i];
        match (run_start, is_sound) {
            (None, true) => run_start = Some(i),
            (Some(a), false) => {
                let b = i - 1;
                let slice = NonSilentSlice {
                    start: frames[a].start_time,
                    end: frames[b].start_time + params.win,
                    sample_start: a * hop,
                    sample_end: (b * hop + n).min(sig.len()),
                };
                // Runs separated by fewer silent frames than the window
                // spans share samples; merge them so slices stay disjoint.
                match slices.last_mut() {
                    Some(prev) if slice.start <= prev.end => {
                        prev.end = slice.end;
                        prev.sample_end = slice.sample_end;
                    }
                    _ => slices.push(slice),
                }
                run_start = None;
            }
            _ => {}
        }
    }
    slices.retain(|s| s.end - s.start >= params.min_slice);
    Ok(slices)
}
