//! Tempo-period estimation: the comb-filter pipeline over the raw signal and
//! the signature-matching estimator built on the longest common substring.

use serde::{Deserialize, Serialize};

use crate::audio::AudioSignal;
use crate::beatmark::DetectedBeats;
use crate::dsp;
use crate::error::{Error, Result};
use crate::signatures::{longest_common_substring, BeatType, SignalSignature, SollukattuSignature};

pub const BPM_MIN: u32 = 33;
pub const BPM_MAX: u32 = 75;

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TempoParams {
    pub bpm_min: u32,
    pub bpm_max: u32,
    /// Band split points in Hz: vocal below the first, instrumental beating
    /// between the two, harmonics above the second.
    pub band_split: [f64; 2],
    /// Length in seconds of the right-half Hanning smoothing window.
    pub hann_len: f64,
    /// Envelope rate in Hz the rectified signal is decimated to.
    pub envelope_rate: f64,
    /// Number of impulses in each resonator train.
    pub train_impulses: usize,
}

impl Default for TempoParams {
    fn default() -> Self {
        TempoParams {
            bpm_min: BPM_MIN,
            bpm_max: BPM_MAX,
            band_split: [900.0, 2600.0],
            hann_len: 0.4,
            envelope_rate: 200.0,
            train_impulses: 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TempoMethod {
    Comb,
    Lcs,
}

/// A tempo-period estimate with the per-method evidence attached.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TempoEstimate {
    pub period: f64,
    pub method: TempoMethod,
    /// Fundamental bpm (comb only).
    pub bpm: Option<u32>,
    /// Individual beat-to-beat gap estimates (LCS only).
    pub per_gap_estimates: Vec<f64>,
    /// Summed band energy per candidate bpm (comb only).
    pub band_energies: Vec<(u32, f64)>,
}

/// Comb-filter tempo estimation over the raw signal.
pub fn comb_tempo(sig: &AudioSignal) -> Result<TempoEstimate> {
    comb_tempo_with(sig, &TempoParams::default())
}

pub fn comb_tempo_with(sig: &AudioSignal, params: &TempoParams) -> Result<TempoEstimate> {
    let max_period = 60.0 / params.bpm_min as f64;
    let need = 2.0 * max_period;
    if sig.duration() < need {
        return Err(Error::SignalTooShort {
            got: sig.duration(),
            need,
        });
    }
    let flat = {
        let first = sig.samples()[0];
        sig.samples().iter().all(|x| (x - first).abs() < 1e-12)
    };
    if flat {
        return Err(Error::NoPeriodicity);
    }
    let fs = sig.sample_rate() as f64;
    let [lo, hi] = params.band_split;

    // Stage 1: frequency filter-bank.
    let bands: [Vec<f64>; 3] = [
        dsp::apply_cascade(&dsp::butter4_lowpass(lo, fs), sig.samples()),
        {
            let mid = dsp::apply_cascade(&dsp::butter4_highpass(lo, fs), sig.samples());
            dsp::apply_cascade(&dsp::butter4_lowpass(hi, fs), &mid)
        },
        dsp::apply_cascade(&dsp::butter4_highpass(hi, fs), sig.samples()),
    ];

    // Stages 2-4 per band: envelope, differentiate, half-wave rectify.
    let decim = ((fs / params.envelope_rate).round() as usize).max(1);
    let fs_env = fs / decim as f64;
    let hann = dsp::half_hanning((params.hann_len * fs_env).round() as usize);
    let impulses: Vec<Vec<f64>> = bands
        .iter()
        .map(|band| {
            let rectified: Vec<f64> = band.iter().map(|x| x.abs()).collect();
            let env = dsp::fft_convolve(&dsp::decimate_mean(&rectified, decim), &hann);
            let mut diff = vec![0.0; env.len()];
            for i in 1..env.len() {
                diff[i] = (env[i] - env[i - 1]).max(0.0);
            }
            diff
        })
        .collect();

    // Stage 5: resonate against impulse trains at each candidate bpm.
    let mut band_energies = Vec::new();
    let mut best: Option<(u32, f64)> = None;
    for bpm in params.bpm_min..=params.bpm_max {
        let period = 60.0 / bpm as f64;
        let train_len = ((params.train_impulses - 1) as f64 * period * fs_env).round() as usize + 1;
        let mut train = vec![0.0; train_len];
        for m in 0..params.train_impulses {
            let at = (m as f64 * period * fs_env).round() as usize;
            if at < train_len {
                train[at] = 1.0;
            }
        }
        let energy: f64 = impulses
            .iter()
            .map(|imp| {
                dsp::fft_convolve(imp, &train)
                    .iter()
                    .map(|y| y * y)
                    .sum::<f64>()
            })
            .sum();
        band_energies.push((bpm, energy));
        match best {
            Some((_, e)) if energy <= e => {}
            _ => best = Some((bpm, energy)),
        }
    }

    let (bpm, peak) = best.expect("non-empty bpm range");
    if peak <= 0.0 {
        return Err(Error::NoPeriodicity);
    }
    Ok(TempoEstimate {
        period: 60.0 / bpm as f64,
        method: TempoMethod::Comb,
        bpm: Some(bpm),
        per_gap_estimates: Vec::new(),
        band_energies,
    })
}

/// Tempo from the longest common substring between the signal signature and
/// a recognized Sollukattu signature: gaps between consecutive matched
/// 1-beats, median-combined.
pub fn lcs_tempo(sig: &SignalSignature, zeta: &SollukattuSignature) -> Result<TempoEstimate> {
    let string_events = sig.string_events();
    let gamma: Vec<_> = string_events.iter().map(|(_, b)| *b).collect();
    let bols = zeta.bols();
    let types = zeta.bol_beat_types();

    let (len, matches) = longest_common_substring(&gamma, &bols);
    if len == 0 {
        return Err(Error::LcsTooShort(0));
    }
    // Earliest maximal match in the signal, then in the signature.
    let &(a_start, b_start) = matches
        .iter()
        .min_by_key(|&&(a, b)| (a, b))
        .expect("non-empty match set");

    let mut beat_times = Vec::new();
    for offset in 0..len {
        if types[b_start + offset] == BeatType::Full {
            let event_idx = string_events[a_start + offset].0;
            beat_times.push(sig.events[event_idx].start);
        }
    }
    if beat_times.len() < 2 {
        return Err(Error::LcsTooShort(beat_times.len()));
    }
    let gaps: Vec<f64> = beat_times.windows(2).map(|w| w[1] - w[0]).collect();
    Ok(TempoEstimate {
        period: median(&gaps),
        method: TempoMethod::Lcs,
        bpm: None,
        per_gap_estimates: gaps,
        band_energies: Vec::new(),
    })
}

fn median(values: &[f64]) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    }
}

/// Fallback 1-beat detector for runs without an external timestamps file:
/// onset envelope of the instrumental band, local maxima above an adaptive
/// threshold, nearby peaks merged.
pub fn detect_onsets(sig: &AudioSignal) -> Result<DetectedBeats> {
    let params = TempoParams::default();
    let fs = sig.sample_rate() as f64;
    let [lo, hi] = params.band_split;
    let mid = dsp::apply_cascade(&dsp::butter4_highpass(lo, fs), sig.samples());
    let band = dsp::apply_cascade(&dsp::butter4_lowpass(hi, fs), &mid);

    let decim = ((fs / params.envelope_rate).round() as usize).max(1);
    let fs_env = fs / decim as f64;
    let rectified: Vec<f64> = band.iter().map(|x| x.abs()).collect();
    let hann = dsp::half_hanning((params.hann_len * fs_env).round() as usize);
    let env = dsp::fft_convolve(&dsp::decimate_mean(&rectified, decim), &hann);
    let mut onset = vec![0.0; env.len()];
    for i in 1..env.len() {
        onset[i] = (env[i] - env[i - 1]).max(0.0);
    }

    let peak = onset.iter().cloned().fold(0.0f64, f64::max);
    if peak <= 0.0 {
        return Ok(DetectedBeats::default());
    }
    let threshold = 0.3 * peak;
    let min_sep = (0.4 * fs_env) as usize;
    let mut beats: Vec<(usize, f64)> = Vec::new();
    for i in 1..onset.len().saturating_sub(1) {
        if onset[i] >= threshold && onset[i] > onset[i - 1] && onset[i] >= onset[i + 1] {
            match beats.last() {
                Some(&(j, v)) if i - j < min_sep => {
                    if onset[i] > v {
                        *beats.last_mut().unwrap() = (i, onset[i]);
                    }
                }
                _ => beats.push((i, onset[i])),
            }
        }
    }
    DetectedBeats::new(beats.into_iter().map(|(i, _)| i as f64 / fs_env).collect())
}

/// The chosen estimate plus an optional half/double-period diagnostic.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TempoSelection {
    pub chosen: TempoEstimate,
    pub warning: Option<String>,
}

/// Prefer the LCS estimate; fall back to the comb estimate when the LCS
/// method failed. Flags a half/double-period disagreement.
pub fn select_tempo(comb: TempoEstimate, lcs: Result<TempoEstimate>) -> TempoSelection {
    match lcs {
        Ok(lcs) => {
            let ratio = {
                let r = comb.period / lcs.period;
                r.max(1.0 / r)
            };
            let warning = (ratio > 2.0).then(|| {
                format!(
                    "comb period {:.3} s and LCS period {:.3} s diverge by more than 2x; \
                     possible half/double-period lock",
                    comb.period, lcs.period
                )
            });
            TempoSelection {
                chosen: lcs,
                warning,
            }
        }
        Err(_) => TempoSelection {
            chosen: comb,
            warning: None,
        },
    }
}
