//! WAV ingestion, frame decomposition and the spectral primitives shared by
//! the rest of the pipeline: per-frame signal energy and spectral centroid.

use std::path::Path;

use crate::dsp;
use crate::error::{Error, Result};

/// A sampled, quantized mono signal with samples normalized to [-1, +1].
#[derive(Debug, Clone)]
pub struct AudioSignal {
    samples: Vec<f64>,
    sample_rate: u32,
}

impl AudioSignal {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::ZeroLengthAudio);
        }
        if sample_rate == 0 {
            return Err(Error::UnsupportedWav("zero sample rate".into()));
        }
        Ok(AudioSignal {
            samples,
            sample_rate,
        })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Duration in seconds, consistent with the sample count.
    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }
}

/// One analysis window of consecutive signal samples.
#[derive(Debug, Clone, Copy)]
pub struct Frame<'a> {
    pub samples: &'a [f64],
    pub start_time: f64,
    pub win_len: f64,
    pub index: usize,
}

/// Load a PCM WAV file (mono or stereo; 16-bit int, 24-bit int or 32-bit
/// float). Stereo is averaged to mono; samples come out in [-1, +1].
pub fn load_wav(path: impl AsRef<Path>) -> Result<AudioSignal> {
    let path = path.as_ref();
    let mut reader = hound::WavReader::open(path).map_err(|source| Error::Wav {
        path: path.to_path_buf(),
        source,
    })?;
    let spec = reader.spec();
    let channels = spec.channels as usize;
    if channels == 0 {
        return Err(Error::UnsupportedWav("zero channels".into()));
    }

    let interleaved: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
        (hound::SampleFormat::Int, 16) => reader
            .samples::<i16>()
            .map(|s| s.map(|v| v as f64 / 32768.0))
            .collect::<std::result::Result<_, _>>(),
        (hound::SampleFormat::Int, 24) => reader
            .samples::<i32>()
            .map(|s| s.map(|v| v as f64 / 8_388_608.0))
            .collect::<std::result::Result<_, _>>(),
        (hound::SampleFormat::Float, 32) => reader
            .samples::<f32>()
            .map(|s| s.map(|v| (v as f64).clamp(-1.0, 1.0)))
            .collect::<std::result::Result<_, _>>(),
        (fmt, bits) => {
            return Err(Error::UnsupportedWav(format!(
                "{fmt:?} {bits}-bit (expected 16/24-bit int or 32-bit float)"
            )))
        }
    }
    .map_err(|source| Error::Wav {
        path: path.to_path_buf(),
        source,
    })?;

    if interleaved.is_empty() {
        return Err(Error::ZeroLengthAudio);
    }

    let samples = if channels == 1 {
        interleaved
    } else {
        interleaved
            .chunks_exact(channels)
            .map(|frame| frame.iter().sum::<f64>() / channels as f64)
            .collect()
    };
    if samples.is_empty() {
        return Err(Error::ZeroLengthAudio);
    }

    AudioSignal::new(samples, spec.sample_rate)
}

/// Write a signal as 16-bit PCM WAV.
pub fn write_wav(path: impl AsRef<Path>, sig: &AudioSignal) -> Result<()> {
    let path = path.as_ref();
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: sig.sample_rate(),
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut writer = hound::WavWriter::create(path, spec).map_err(|source| Error::Wav {
        path: path.to_path_buf(),
        source,
    })?;
    for &x in sig.samples() {
        let q = (x * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
        writer.write_sample(q).map_err(|source| Error::Wav {
            path: path.to_path_buf(),
            source,
        })?;
    }
    writer.finalize().map_err(|source| Error::Wav {
        path: path.to_path_buf(),
        source,
    })
}

/// Cut the signal into overlapping frames of `win` seconds advancing by
/// `step` seconds. The last partial frame is dropped; a window longer than
/// the signal yields no frames.
pub fn frame_signal(sig: &AudioSignal, win: f64, step: f64) -> Result<Vec<Frame<'_>>> {
    if !(step > 0.0 && step <= win) {
        return Err(Error::InvalidFraming(format!(
            "need 0 < step <= win, got step={step}, win={win}"
        )));
    }
    let rate = sig.sample_rate() as f64;
    let n = (win * rate).round() as usize;
    let hop = (step * rate).round() as usize;
    if n == 0 || hop == 0 {
        return Err(Error::InvalidFraming("window shorter than one sample".into()));
    }
    let total = sig.len();
    if total < n {
        return Ok(Vec::new());
    }
    let count = (total - n) / hop + 1;
    let mut frames = Vec::with_capacity(count);
    for i in 0..count {
        let start = i * hop;
        frames.push(Frame {
            samples: &sig.samples()[start..start + n],
            start_time: start as f64 / rate,
            win_len: win,
            index: i,
        });
    }
    Ok(frames)
}

/// Mean power of a frame: sum of squared samples over the sample count.
pub fn frame_energy(samples: &[f64]) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    samples.iter().map(|x| x * x).sum::<f64>() / samples.len() as f64
}

/// Spectral centroid in bin units: the mass-weighted mean of (n + 1) over
/// the N DFT magnitude coefficients X_1..X_N. An all-zero frame maps to 0 so
/// it always falls below any positive threshold.
pub fn spectral_centroid(samples: &[f64]) -> f64 {
    let mags = dsp::magnitude_spectrum(samples);
    centroid_of_magnitudes(&mags)
}

pub(crate) fn centroid_of_magnitudes(mags: &[f64]) -> f64 {
    let total: f64 = mags.iter().sum();
    if total <= f64::MIN_POSITIVE {
        return 0.0;
    }
    let weighted: f64 = mags
        .iter()
        .enumerate()
        .map(|(m, x)| (m + 2) as f64 * x)
        .sum();
    weighted / total
}
