//! Shared DSP utilities: cached FFTs, frequency-domain convolution,
//! Butterworth band filters and envelope helpers.

use std::cell::RefCell;
use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

thread_local! {
    static PLANNER: RefCell<(FftPlanner<f64>, HashMap<(usize, bool), Arc<dyn Fft<f64>>>)> =
        RefCell::new((FftPlanner::new(), HashMap::new()));
}

fn plan(len: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|cell| {
        let (planner, cache) = &mut *cell.borrow_mut();
        cache
            .entry((len, inverse))
            .or_insert_with(|| {
                if inverse {
                    planner.plan_fft_inverse(len)
                } else {
                    planner.plan_fft_forward(len)
                }
            })
            .clone()
    })
}

/// Magnitudes of all N DFT coefficients of the input.
pub fn magnitude_spectrum(samples: &[f64]) -> Vec<f64> {
    if samples.is_empty() {
        return Vec::new();
    }
    let fft = plan(samples.len(), false);
    let mut buf: Vec<Complex<f64>> = samples.iter().map(|&x| Complex::new(x, 0.0)).collect();
    fft.process(&mut buf);
    buf.iter().map(|c| c.norm()).collect()
}

/// Full linear convolution of `a` and `b` computed in the frequency domain.
pub fn fft_convolve(a: &[f64], b: &[f64]) -> Vec<f64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let out_len = a.len() + b.len() - 1;
    let n = out_len.next_power_of_two();
    let fwd = plan(n, false);
    let inv = plan(n, true);

    let mut fa = vec![Complex::new(0.0, 0.0); n];
    for (dst, &x) in fa.iter_mut().zip(a) {
        dst.re = x;
    }
    let mut fb = vec![Complex::new(0.0, 0.0); n];
    for (dst, &x) in fb.iter_mut().zip(b) {
        dst.re = x;
    }
    fwd.process(&mut fa);
    fwd.process(&mut fb);
    for (x, y) in fa.iter_mut().zip(&fb) {
        *x *= y;
    }
    inv.process(&mut fa);
    let scale = 1.0 / n as f64;
    fa.truncate(out_len);
    fa.iter().map(|c| c.re * scale).collect()
}

/// Direct-form biquad section.
#[derive(Debug, Clone, Copy)]
pub struct Biquad {
    b0: f64,
    b1: f64,
    b2: f64,
    a1: f64,
    a2: f64,
}

impl Biquad {
    /// Low-pass section at cutoff `fc` with quality factor `q`.
    pub fn lowpass(fc: f64, fs: f64, q: f64) -> Biquad {
        let w0 = 2.0 * PI * fc / fs;
        let (sw, cw) = (w0.sin(), w0.cos());
        let alpha = sw / (2.0 * q);
        let a0 = 1.0 + alpha;
        Biquad {
            b0: (1.0 - cw) / 2.0 / a0,
            b1: (1.0 - cw) / a0,
            b2: (1.0 - cw) / 2.0 / a0,
            a1: -2.0 * cw / a0,
            a2: (1.0 - alpha) / a0,
        }
    }

    /// High-pass section at cutoff `fc` with quality factor `q`.
    pub fn highpass(fc: f64, fs: f64, q: f64) -> Biquad {
        let w0 = 2.0 * PI * fc / fs;
        let (sw, cw) = (w0.sin(), w0.cos());
        let alpha = sw / (2.0 * q);
        let a0 = 1.0 + alpha;
        Biquad {
            b0: (1.0 + cw) / 2.0 / a0,
            b1: -(1.0 + cw) / a0,
            b2: (1.0 + cw) / 2.0 / a0,
            a1: -2.0 * cw / a0,
            a2: (1.0 - alpha) / a0,
        }
    }

    pub fn apply(&self, input: &[f64]) -> Vec<f64> {
        let mut out = Vec::with_capacity(input.len());
        let (mut x1, mut x2, mut y1, mut y2) = (0.0, 0.0, 0.0, 0.0);
        for &x in input {
            let y = self.b0 * x + self.b1 * x1 + self.b2 * x2 - self.a1 * y1 - self.a2 * y2;
            x2 = x1;
            x1 = x;
            y2 = y1;
            y1 = y;
            out.push(y);
        }
        out
    }
}

// Q factors of the two cascaded sections of a 4th-order Butterworth filter:
// 1 / (2 cos(pi/8)) and 1 / (2 cos(3 pi/8)).
const BUTTER4_Q: [f64; 2] = [0.5411961001461969, 1.3065629648763766];

fn clamp_cutoff(fc: f64, fs: f64) -> f64 {
    fc.min(0.45 * fs).max(1.0)
}

/// 4th-order Butterworth low-pass as two biquad sections.
pub fn butter4_lowpass(fc: f64, fs: f64) -> Vec<Biquad> {
    let fc = clamp_cutoff(fc, fs);
    BUTTER4_Q.iter().map(|&q| Biquad::lowpass(fc, fs, q)).collect()
}

/// 4th-order Butterworth high-pass as two biquad sections.
pub fn butter4_highpass(fc: f64, fs: f64) -> Vec<Biquad> {
    let fc = clamp_cutoff(fc, fs);
    BUTTER4_Q.iter().map(|&q| Biquad::highpass(fc, fs, q)).collect()
}

pub fn apply_cascade(sections: &[Biquad], input: &[f64]) -> Vec<f64> {
    let mut cur = input.to_vec();
    for s in sections {
        cur = s.apply(&cur);
    }
    cur
}

/// Decimate by block-averaging `factor` consecutive samples.
pub fn decimate_mean(input: &[f64], factor: usize) -> Vec<f64> {
    if factor <= 1 {
        return input.to_vec();
    }
    input
        .chunks(factor)
        .map(|c| c.iter().sum::<f64>() / c.len() as f64)
        .collect()
}

/// Right half of a Hanning window: 1 at index 0 decaying to 0 at the end.
pub fn half_hanning(len: usize) -> Vec<f64> {
    if len <= 1 {
        return vec![1.0; len.max(1)];
    }
    (0..len)
        .map(|k| 0.5 * (1.0 + (PI * k as f64 / (len - 1) as f64).cos()))
        .collect()
}
