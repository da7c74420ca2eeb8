//! Mono waveform container and Fourier utilities.

use std::cell::RefCell;
use std::f64::consts::PI;

use num_complex::Complex64;
use realfft::RealFftPlanner;

use crate::error::{invalid, Error, Result};

/// A mono waveform. Samples are finite and the signal is never empty.
#[derive(Debug, Clone, PartialEq)]
pub struct Signal {
    samples: Vec<f64>,
    sample_rate: u32,
}

impl Signal {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InvalidSignal("signal has zero length".into()));
        }
        if sample_rate == 0 {
            return Err(Error::InvalidSignal("sample rate must be positive".into()));
        }
        if let Some(pos) = samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidSignal(format!(
                "non-finite sample at index {pos}"
            )));
        }
        Ok(Self {
            samples,
            sample_rate,
        })
    }

    pub fn zeros(len: usize, sample_rate: u32) -> Result<Self> {
        Self::new(vec![0.0; len], sample_rate)
    }

    /// Builds a signal with the same sample rate as `self`.
    pub fn with_samples(&self, samples: Vec<f64>) -> Result<Self> {
        Self::new(samples, self.sample_rate)
    }

    /// Skips the finiteness scan. Callers that may produce non-finite values
    /// must check with [`Signal::is_finite`] themselves.
    pub(crate) fn from_parts(samples: Vec<f64>, sample_rate: u32) -> Self {
        debug_assert!(!samples.is_empty() && sample_rate > 0);
        Self {
            samples,
            sample_rate,
        }
    }

    pub(crate) fn map_samples(&self, f: impl Fn(f64) -> f64) -> Self {
        Self::from_parts(self.samples.iter().map(|&v| f(v)).collect(), self.sample_rate)
    }

    pub(crate) fn zip_map(&self, other: &Signal, f: impl Fn(f64, f64) -> f64) -> Self {
        debug_assert_eq!(self.len(), other.len());
        Self::from_parts(
            self.samples
                .iter()
                .zip(&other.samples)
                .map(|(&a, &b)| f(a, b))
                .collect(),
            self.sample_rate,
        )
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    /// Always false; signals are non-empty by construction.
    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn nyquist(&self) -> f64 {
        f64::from(self.sample_rate) / 2.0
    }

    pub fn is_finite(&self) -> bool {
        self.samples.iter().all(|v| v.is_finite())
    }

    pub fn dot(&self, other: &Signal) -> f64 {
        self.samples
            .iter()
            .zip(&other.samples)
            .map(|(a, b)| a * b)
            .sum()
    }

    pub fn norm_sq(&self) -> f64 {
        self.samples.iter().map(|v| v * v).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.samples.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn add(&self, other: &Signal) -> Signal {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Signal) -> Signal {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn scale(&self, k: f64) -> Signal {
        self.map_samples(|v| v * k)
    }

    /// `self + k * other`
    pub fn axpy(&self, k: f64, other: &Signal) -> Signal {
        self.zip_map(other, |a, b| a + k * b)
    }

    pub(crate) fn check_same_len(&self, other: &Signal) -> Result<()> {
        if self.len() != other.len() {
            return Err(Error::LengthMismatch {
                expected: self.len(),
                actual: other.len(),
            });
        }
        Ok(())
    }
}

/// Half spectrum of a real signal: bins `0..=L/2` of the unnormalized DFT.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub bins: Vec<Complex64>,
    /// Frequency spacing between bins in Hz.
    pub bin_hz: f64,
    pub sample_rate: u32,
}

impl Spectrum {
    /// Center frequency of bin `k` in Hz.
    pub fn frequency(&self, k: usize) -> f64 {
        k as f64 * self.bin_hz
    }

    /// Number of half-spectrum bins for a real signal of length `len`.
    pub fn bins_for(len: usize) -> usize {
        len / 2 + 1
    }
}

thread_local! {
    static PLANNER: RefCell<RealFftPlanner<f64>> = RefCell::new(RealFftPlanner::new());
}

pub fn rfft(signal: &Signal) -> Spectrum {
    rfft_slice(signal.samples(), signal.sample_rate())
}

pub(crate) fn rfft_slice(samples: &[f64], sample_rate: u32) -> Spectrum {
    let len = samples.len();
    let plan = PLANNER.with(|p| p.borrow_mut().plan_fft_forward(len));
    let mut input = samples.to_vec();
    let mut bins = plan.make_output_vec();
    plan.process(&mut input, &mut bins)
        .expect("buffer sizes come from the plan");
    Spectrum {
        bins,
        bin_hz: f64::from(sample_rate) / len as f64,
        sample_rate,
    }
}

/// Inverse of [`rfft`]. The imaginary parts of the DC and (even-length)
/// Nyquist bins are ignored.
pub fn irfft(spec: &Spectrum, len: usize) -> Result<Signal> {
    if len == 0 {
        return Err(invalid("len", "output length must be positive"));
    }
    if spec.bins.len() != Spectrum::bins_for(len) {
        return Err(Error::LengthMismatch {
            expected: Spectrum::bins_for(len),
            actual: spec.bins.len(),
        });
    }
    Ok(Signal::from_parts(
        irfft_raw(spec.bins.clone(), len),
        spec.sample_rate,
    ))
}

fn irfft_raw(mut bins: Vec<Complex64>, len: usize) -> Vec<f64> {
    bins[0].im = 0.0;
    if len.is_multiple_of(2) {
        bins[len / 2].im = 0.0;
    }
    let plan = PLANNER.with(|p| p.borrow_mut().plan_fft_inverse(len));
    let mut out = plan.make_output_vec();
    plan.process(&mut bins, &mut out)
        .expect("buffer sizes come from the plan");
    let inv = 1.0 / len as f64;
    for v in &mut out {
        *v *= inv;
    }
    out
}

/// Multiplies every half-spectrum bin by a real gain and transforms back.
/// `gain(k, freq_hz)` is evaluated once per bin.
pub(crate) fn apply_real_gain(signal: &Signal, gain: impl Fn(usize, f64) -> f64) -> Signal {
    let mut spec = rfft(signal);
    let bin_hz = spec.bin_hz;
    for (k, b) in spec.bins.iter_mut().enumerate() {
        *b *= gain(k, k as f64 * bin_hz);
    }
    Signal::from_parts(irfft_raw(spec.bins, signal.len()), signal.sample_rate())
}

/// Periodic Hann window of length `n`.
pub fn hann(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos())
        .collect()
}

/// Number of STFT frames covering `len` samples, padding the tail with zeros.
pub fn stft_frame_count(len: usize, window: usize, hop: usize) -> usize {
    if len <= window {
        1
    } else {
        (len - window).div_ceil(hop) + 1
    }
}

/// Hann-windowed short-time Fourier transform.
pub fn stft(signal: &Signal, window: usize, hop: usize) -> Result<Vec<Spectrum>> {
    if hop == 0 || window < hop {
        return Err(invalid("window", format!("need window >= hop >= 1, got window={window} hop={hop}")));
    }
    if window > signal.len() {
        return Err(invalid(
            "window",
            format!("window {window} is longer than the signal ({} samples)", signal.len()),
        ));
    }
    let frames = stft_frame_count(signal.len(), window, hop);
    let padded_len = (frames - 1) * hop + window;
    let mut padded = signal.samples().to_vec();
    padded.resize(padded_len, 0.0);
    let win = hann(window);
    let mut frame = vec![0.0; window];
    Ok((0..frames)
        .map(|f| {
            let start = f * hop;
            for (i, slot) in frame.iter_mut().enumerate() {
                *slot = padded[start + i] * win[i];
            }
            rfft_slice(&frame, signal.sample_rate())
        })
        .collect())
}
