//! Synthetic Sollukattu rendering with exact ground truth: each pattern
//! position becomes a strike burst (900-2600 Hz) plus, for bol positions, a
//! class-distinct harmonic vowel (0-900 Hz). Emits the signal, the
//! ground-truth annotation and the true 1-beat timestamps.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::audio::AudioSignal;
use crate::beatmark::{BeatEvent, DetectedBeats, MarkedBeat, MarkedBol};
use crate::bol::BolClass;
use crate::error::{Error, Result};
use crate::signatures::{BeatType, SollukattuSignature};

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SynthParams {
    pub sample_rate: u32,
    /// Silence before the first beat.
    pub lead_in: f64,
    /// Silence after the trailing hum block.
    pub tail: f64,
    /// Strike amplitude on 1-beats.
    pub strike_amp: f64,
    /// Strike amplitude on 1/2-beats; the beating is weak there even though
    /// the vocalization keeps full loudness.
    pub half_strike_amp: f64,
    /// Strike amplitude on stick-beats.
    pub stick_amp: f64,
    /// Vowel amplitude, shared by 1- and 1/2-beats.
    pub vowel_amp: f64,
    pub strike_len: f64,
    pub vowel_len: f64,
    pub stick_len: f64,
}

impl Default for SynthParams {
    fn default() -> Self {
        SynthParams {
            sample_rate: 44100,
            lead_in: 1.0,
            tail: 0.5,
            strike_amp: 0.72,
            half_strike_amp: 0.15,
            stick_amp: 0.33,
            vowel_amp: 0.20,
            strike_len: 0.10,
            vowel_len: 0.27,
            stick_len: 0.12,
        }
    }
}

/// What to render: a pattern, a tempo period, a repetition count and the
/// fractional timing noise.
#[derive(Debug, Clone)]
pub struct SynthSpec {
    pub pattern: SollukattuSignature,
    /// Tempo period in seconds, within the comb search range [0.8, 1.8].
    pub tempo: f64,
    /// Number of pattern repetitions (bars, for single-bar patterns).
    pub bars: u32,
    /// Fractional timing noise, below 0.1.
    pub jitter: f64,
    pub params: SynthParams,
}

/// A rendered recording with its exact ground truth.
#[derive(Debug, Clone)]
pub struct SynthOutput {
    pub signal: AudioSignal,
    pub annotation: Vec<MarkedBeat>,
    pub detected_beats: DetectedBeats,
}

pub fn synthesize(spec: &SynthSpec, seed: u64) -> Result<SynthOutput> {
    if !(0.8..=1.8).contains(&spec.tempo) {
        return Err(Error::Synth(format!(
            "tempo period {} outside [0.8, 1.8]",
            spec.tempo
        )));
    }
    if spec.jitter >= 0.1 || spec.jitter < 0.0 {
        return Err(Error::Synth(format!("jitter {} outside [0, 0.1)", spec.jitter)));
    }
    if spec.bars == 0 {
        return Err(Error::Synth("need at least one bar".into()));
    }
    if spec.pattern.pattern.iter().any(|(_, t)| *t == BeatType::Quarter) {
        return Err(Error::Synth("quarter-beat patterns are not rendered".into()));
    }

    let p = &spec.params;
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let one_beats = spec.pattern.one_beat_count();
    if one_beats == 0 {
        return Err(Error::Synth("pattern has no 1-beat positions".into()));
    }

    // Event schedule: (time, bol, beat type, rendered length).
    let mut schedule: Vec<(f64, Option<BolClass>, BeatType, f64)> = Vec::new();
    for bar in 0..spec.bars {
        let mut slot: i64 = -1;
        for &(bol, beat) in &spec.pattern.pattern {
            let slot_pos = match beat {
                BeatType::Full | BeatType::Stick => {
                    slot += 1;
                    slot as f64
                }
                BeatType::Half => slot as f64 + 0.5,
                BeatType::Quarter => unreachable!(),
            };
            let base = p.lead_in + ((bar as usize * one_beats) as f64 + slot_pos) * spec.tempo;
            let jitter = if spec.jitter > 0.0 {
                rng.gen_range(-spec.jitter..spec.jitter) * spec.tempo
            } else {
                0.0
            };
            let len = if beat == BeatType::Stick {
                p.stick_len
            } else {
                p.vowel_len
            };
            schedule.push((base + jitter, bol, beat, len));
        }
    }
    for pair in schedule.windows(2) {
        if pair[0].0 + pair[0].3 + 0.02 > pair[1].0 {
            return Err(Error::Synth(format!(
                "events at {:.3} and {:.3} overlap; tempo too small for burst length",
                pair[0].0, pair[1].0
            )));
        }
    }

    let rate = p.sample_rate as f64;
    let span = spec.bars as f64 * one_beats as f64 * spec.tempo;
    let hum_start = p.lead_in + span + 0.3;
    let total = hum_start + 1.6 + p.tail;
    // Ambient dither floor (about -80 dBFS): recordings are never
    // digitally silent, and degenerate constant frames would otherwise
    // collapse mixture variances onto the floor.
    let mut samples: Vec<f64> = (0..(total * rate).round() as usize)
        .map(|_| 1e-4 * rng.gen_range(-1.0..1.0))
        .collect();

    let mut annotation = Vec::with_capacity(schedule.len());
    let mut beats = Vec::new();
    for &(t, bol, beat, len) in &schedule {
        let strike_amp = match beat {
            BeatType::Full => p.strike_amp,
            BeatType::Half => p.half_strike_amp,
            BeatType::Stick => p.stick_amp,
            BeatType::Quarter => unreachable!(),
        };
        add_into(
            &mut samples,
            (t * rate) as usize,
            &render_strike(strike_amp, p.strike_len.min(len), rate, &mut rng),
        );
        if let Some(b) = bol {
            if !b.is_stick() {
                add_into(
                    &mut samples,
                    (t * rate) as usize,
                    &render_vowel(b, p.vowel_amp, len, rate, &mut rng),
                );
            }
        }
        let (marked_bol, event) = match beat {
            BeatType::Full => (
                bol.map(MarkedBol::Bol).unwrap_or(MarkedBol::None),
                BeatEvent::FullBeat,
            ),
            BeatType::Half => (
                bol.map(MarkedBol::Bol).unwrap_or(MarkedBol::None),
                BeatEvent::HalfBeat,
            ),
            BeatType::Stick => (MarkedBol::None, BeatEvent::StickBeat),
            BeatType::Quarter => unreachable!(),
        };
        annotation.push(MarkedBeat {
            bol: marked_bol,
            start: t,
            end: t + len,
            event,
        });
        if matches!(beat, BeatType::Full | BeatType::Stick) {
            beats.push(t);
        }
    }

    // Two quiet hum blocks after the events. The first pins the low
    // (second) mode of both feature histograms so the silence thresholds
    // land well below every event's level; the louder second block always
    // survives segmentation and anchors the low energy cluster.
    add_into(
        &mut samples,
        (hum_start * rate) as usize,
        &render_hum(0.8, 0.075, rate),
    );
    add_into(
        &mut samples,
        ((hum_start + 1.1) * rate) as usize,
        &render_hum(0.5, 0.13, rate),
    );

    let peak = samples.iter().fold(0.0f64, |a, &x| a.max(x.abs()));
    if peak > 1.0 {
        for x in samples.iter_mut() {
            *x /= peak;
        }
    }

    Ok(SynthOutput {
        signal: AudioSignal::new(samples, p.sample_rate)?,
        annotation,
        detected_beats: DetectedBeats::new(beats)?,
    })
}

fn add_into(samples: &mut [f64], at: usize, burst: &[f64]) {
    for (i, &x) in burst.iter().enumerate() {
        if let Some(s) = samples.get_mut(at + i) {
            *s += x;
        }
    }
}

/// Wood-block strike: two detuned partials in the instrumental band with a
/// fast attack and exponential decay.
fn render_strike(amp: f64, len: f64, rate: f64, rng: &mut ChaCha20Rng) -> Vec<f64> {
    let n = (len * rate) as usize;
    let detune = rng.gen_range(0.98..1.02);
    let phase1 = rng.gen_range(0.0..std::f64::consts::TAU);
    let phase2 = rng.gen_range(0.0..std::f64::consts::TAU);
    let f1 = 1150.0 * detune;
    let f2 = 1730.0 * detune;
    let attack = (0.005 * rate) as usize;
    (0..n)
        .map(|i| {
            let t = i as f64 / rate;
            let env = if i < attack {
                i as f64 / attack.max(1) as f64
            } else {
                (-(t - 0.005) / 0.050).exp()
            };
            amp * env
                * (0.65 * (std::f64::consts::TAU * f1 * t + phase1).sin()
                    + 0.35 * (std::f64::consts::TAU * f2 * t + phase2).sin())
        })
        .collect()
}

/// Per-class vowel: harmonics of a class-specific fundamental shaped by a
/// class-specific banded spectral envelope, all below 900 Hz.
fn render_vowel(
    bol: BolClass,
    amp: f64,
    len: f64,
    rate: f64,
    rng: &mut ChaCha20Rng,
) -> Vec<f64> {
    // A low fundamental keeps many harmonics under the band edge, so the
    // formant envelope is densely sampled whatever the code. The two
    // formant centers live on a mod-5 x mod-7 grid: any two distinct codes
    // up to 35 differ by at least a full grid step in one formant.
    let code = bol.code() as f64;
    let f0 = (70.0 + 2.0 * code) * rng.gen_range(0.99..1.01);
    let f1 = 140.0 + 150.0 * (bol.code() % 5) as f64;
    let f2 = 180.0 + 100.0 * (bol.code() % 7) as f64;
    let level = amp * rng.gen_range(0.95..1.05);

    let mut harmonics = Vec::new();
    let mut h = 1.0;
    while h * f0 < 880.0 {
        let f = h * f0;
        let w = (-((f - f1) / 60.0).powi(2)).exp()
            + 0.8 * (-((f - f2) / 80.0).powi(2)).exp()
            + 0.03;
        harmonics.push((f, w, rng.gen_range(0.0..std::f64::consts::TAU)));
        h += 1.0;
    }
    let norm: f64 = harmonics.iter().map(|(_, w, _)| w).sum();

    let n = (len * rate) as usize;
    let attack = (0.03 * rate) as usize;
    let release = (0.06 * rate) as usize;
    (0..n)
        .map(|i| {
            let t = i as f64 / rate;
            let env = if i < attack {
                0.5 - 0.5 * (std::f64::consts::PI * i as f64 / attack as f64).cos()
            } else if i + release >= n {
                let k = (n - i) as f64 / release as f64;
                0.5 - 0.5 * (std::f64::consts::PI * k).cos()
            } else {
                1.0
            };
            let mut v = 0.0;
            for &(f, w, phase) in &harmonics {
                v += w * (std::f64::consts::TAU * f * t + phase).sin();
            }
            level * env * v / norm
        })
        .collect()
}

/// Low constant hum with a slight offset; anchors the low histogram modes
/// of the energy and centroid features.
fn render_hum(len: f64, amp: f64, rate: f64) -> Vec<f64> {
    let n = (len * rate) as usize;
    let edge = (0.1 * rate) as usize;
    (0..n)
        .map(|i| {
            let t = i as f64 / rate;
            let env = if i < edge {
                i as f64 / edge as f64
            } else if i + edge >= n {
                (n - i) as f64 / edge as f64
            } else {
                1.0
            };
            env * (amp * (std::f64::consts::TAU * 160.0 * t).sin() + 0.15 * amp)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signatures::builtin_dictionary;

    fn natta_spec(tempo: f64, bars: u32, jitter: f64) -> SynthSpec {
        let pattern = builtin_dictionary()
            .into_iter()
            .find(|e| e.name == "Natta")
            .unwrap();
        SynthSpec {
            pattern,
            tempo,
            bars,
            jitter,
            params: SynthParams::default(),
        }
    }

    #[test]
    fn natta_two_bars_has_28_events_and_expected_span() {
        let out = synthesize(&natta_spec(1.39, 2, 0.0), 1).unwrap();
        assert_eq!(out.annotation.len(), 28);
        // Rhythmic span is 2 * 8 * 1.39 s plus fixed lead-in/hum overheads.
        let span = 2.0 * 8.0 * 1.39;
        let dur = out.signal.duration();
        assert!(dur >= span, "duration {dur} < span {span}");
        assert!(dur <= span + 4.5, "duration {dur} too long for span {span}");
        // 8 one-beats per bar, all B (Natta has no sticks).
        assert_eq!(out.detected_beats.timestamps().len(), 16);
    }

    #[test]
    fn zero_jitter_lands_events_on_the_tempo_grid() {
        let out = synthesize(&natta_spec(1.2, 2, 0.0), 5).unwrap();
        let lead = SynthParams::default().lead_in;
        for (k, &t) in out.detected_beats.timestamps().iter().enumerate() {
            let expected = lead + k as f64 * 1.2;
            assert!((t - expected).abs() < 1e-9, "beat {k}: {t} vs {expected}");
        }
        for row in &out.annotation {
            let offset = (row.start - lead) / (1.2 / 2.0);
            assert!(
                (offset - offset.round()).abs() < 1e-9,
                "event at {} off the half-beat grid",
                row.start
            );
        }
    }

    #[test]
    fn same_seed_renders_identical_audio() {
        let a = synthesize(&natta_spec(1.39, 1, 0.02), 9).unwrap();
        let b = synthesize(&natta_spec(1.39, 1, 0.02), 9).unwrap();
        assert_eq!(a.signal.samples(), b.signal.samples());
        let c = synthesize(&natta_spec(1.39, 1, 0.02), 10).unwrap();
        assert_ne!(a.signal.samples(), c.signal.samples());
    }

    #[test]
    fn samples_stay_within_unit_range() {
        let out = synthesize(&natta_spec(0.9, 2, 0.05), 3).unwrap();
        assert!(out.signal.samples().iter().all(|x| x.abs() <= 1.0));
    }

    #[test]
    fn out_of_range_tempo_and_jitter_are_rejected() {
        assert!(synthesize(&natta_spec(0.5, 1, 0.0), 1).is_err());
        assert!(synthesize(&natta_spec(2.5, 1, 0.0), 1).is_err());
        assert!(synthesize(&natta_spec(1.2, 1, 0.2), 1).is_err());
        assert!(synthesize(&natta_spec(1.2, 0, 0.0), 1).is_err());
    }

    #[test]
    fn stick_patterns_emit_stick_annotations_and_beats() {
        let pattern = builtin_dictionary()
            .into_iter()
            .find(|e| e.name == "Joining A")
            .unwrap();
        let out = synthesize(
            &SynthSpec {
                pattern,
                tempo: 1.2,
                bars: 1,
                jitter: 0.0,
                params: SynthParams::default(),
            },
            4,
        )
        .unwrap();
        // [tat] [dhit] [ta] [-] twice: 8 one-beats, 2 sticks.
        assert_eq!(out.detected_beats.timestamps().len(), 8);
        let sticks: Vec<_> = out
            .annotation
            .iter()
            .filter(|r| r.event == BeatEvent::StickBeat)
            .collect();
        assert_eq!(sticks.len(), 2);
        assert!(sticks.iter().all(|r| r.bol == MarkedBol::None));
    }
}
