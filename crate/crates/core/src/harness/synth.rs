//! Synthetic singing-like corpus: harmonic tones with glides, vibrato,
//! amplitude envelopes and a low breath-noise floor.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::mix_seed;
use crate::error::{invalid, Result};
use crate::signal::Signal;

/// 65536 samples at 22.05 kHz, about 2.97 s.
pub const DEFAULT_SEGMENT_LEN: usize = 65536;

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticVoiceSpec {
    pub n_items: usize,
    /// Samples per item.
    pub len: usize,
    pub sample_rate: u32,
    /// Base fundamental range in Hz.
    pub f0_range: (f64, f64),
    pub n_harmonics: usize,
    /// Maximum relative f0 change over an item.
    pub max_glide: f64,
    /// Vibrato rate range in Hz.
    pub vibrato_rate: (f64, f64),
    /// Maximum relative vibrato depth.
    pub max_vibrato_depth: f64,
    /// Range of the per-harmonic amplitude decay exponent.
    pub decay_range: (f64, f64),
    /// Maximum tremolo depth of the amplitude envelope.
    pub max_tremolo: f64,
    /// Range of the breath-noise level relative to the harmonic RMS.
    pub breath_range: (f64, f64),
}

impl Default for SyntheticVoiceSpec {
    fn default() -> Self {
        Self {
            n_items: 20,
            len: DEFAULT_SEGMENT_LEN,
            sample_rate: 22050,
            f0_range: (110.0, 440.0),
            n_harmonics: 20,
            max_glide: 0.1,
            vibrato_rate: (4.0, 7.0),
            max_vibrato_depth: 0.015,
            decay_range: (0.8, 1.6),
            max_tremolo: 0.25,
            breath_range: (0.005, 0.02),
        }
    }
}

impl SyntheticVoiceSpec {
    pub fn with_items(n_items: usize) -> Self {
        Self {
            n_items,
            ..Self::default()
        }
    }

    pub fn duration_s(&self) -> f64 {
        self.len as f64 / f64::from(self.sample_rate)
    }

    /// Highest instantaneous frequency any harmonic can reach.
    pub fn max_frequency(&self) -> f64 {
        self.f0_range.1 * (1.0 + self.max_vibrato_depth) * self.n_harmonics as f64
    }

    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.f0_range;
        if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
            return Err(invalid("f0_range", format!("need 0 < min <= max, got {lo}..{hi}")));
        }
        if self.len == 0 || self.sample_rate == 0 || self.n_harmonics == 0 {
            return Err(invalid("len", "length, sample rate and harmonic count must be positive"));
        }
        let nyquist = f64::from(self.sample_rate) / 2.0;
        if self.max_frequency() >= nyquist {
            return Err(invalid(
                "n_harmonics",
                format!(
                    "harmonics reach {:.0} Hz, above Nyquist ({nyquist} Hz)",
                    self.max_frequency()
                ),
            ));
        }
        let unit = |v: f64| (0.0..1.0).contains(&v);
        if !(unit(self.max_glide) && unit(self.max_vibrato_depth) && unit(self.max_tremolo)) {
            return Err(invalid("max_glide", "glide, vibrato and tremolo depths must lie in [0, 1)"));
        }
        if !(self.vibrato_rate.0 >= 0.0 && self.vibrato_rate.0 <= self.vibrato_rate.1) {
            return Err(invalid("vibrato_rate", "need 0 <= min <= max"));
        }
        if !(self.decay_range.0 >= 0.0 && self.decay_range.0 <= self.decay_range.1) {
            return Err(invalid("decay_range", "need 0 <= min <= max"));
        }
        let (b0, b1) = self.breath_range;
        if !(0.0 <= b0 && b0 <= b1 && b1 < 1.0) {
            return Err(invalid("breath_range", "need 0 <= min <= max < 1"));
        }
        Ok(())
    }
}

/// Parameters drawn for one item.
#[derive(Debug, Clone, PartialEq)]
pub struct VoiceParams {
    pub f0_start: f64,
    pub f0_end: f64,
    pub vibrato_rate: f64,
    pub vibrato_depth: f64,
    pub decay: f64,
    pub breath: f64,
}

fn uniform(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    if hi > lo {
        rng.random_range(lo..hi)
    } else {
        lo
    }
}

/// Generates item `index` of the corpus defined by `(spec, seed)`.
pub fn synth_item(spec: &SyntheticVoiceSpec, seed: u64, index: usize) -> Result<(Signal, VoiceParams)> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, &[index as u64]));
    let f0_start = uniform(&mut rng, spec.f0_range);
    let glide = uniform(&mut rng, (-spec.max_glide, spec.max_glide));
    let f0_end = (f0_start * (1.0 + glide)).clamp(spec.f0_range.0, spec.f0_range.1);
    let params = VoiceParams {
        f0_start,
        f0_end,
        vibrato_rate: uniform(&mut rng, spec.vibrato_rate),
        vibrato_depth: uniform(&mut rng, (0.0, spec.max_vibrato_depth)),
        decay: uniform(&mut rng, spec.decay_range),
        breath: uniform(&mut rng, spec.breath_range),
    };
    let vib_phase = uniform(&mut rng, (0.0, 2.0 * PI));
    let harmonic_phase: Vec<f64> = (0..spec.n_harmonics)
        .map(|_| uniform(&mut rng, (0.0, 2.0 * PI)))
        .collect();
    let harmonic_amp: Vec<f64> = (1..=spec.n_harmonics)
        .map(|h| (h as f64).powf(-params.decay) * uniform(&mut rng, (0.6, 1.0)))
        .collect();
    let sr = f64::from(spec.sample_rate);
    let dur = spec.duration_s();
    let attack = uniform(&mut rng, (0.02, 0.1)).min(dur / 4.0);
    let release = uniform(&mut rng, (0.05, 0.2)).min(dur / 4.0);
    let tremolo = uniform(&mut rng, (0.0, spec.max_tremolo));
    let tremolo_rate = uniform(&mut rng, (0.5, 3.0));

    let mut phase = 0.0;
    let mut out = Vec::with_capacity(spec.len);
    let mut envelope = Vec::with_capacity(spec.len);
    for n in 0..spec.len {
        let t = n as f64 / sr;
        let frac = n as f64 / spec.len as f64;
        let f0 = (params.f0_start + frac * (params.f0_end - params.f0_start))
            * (1.0 + params.vibrato_depth * (2.0 * PI * params.vibrato_rate * t + vib_phase).sin());
        let env = (t / attack).min(1.0)
            * ((dur - t) / release).clamp(0.0, 1.0)
            * (1.0 - tremolo * 0.5 * (1.0 - (2.0 * PI * tremolo_rate * t).cos()));
        let v: f64 = harmonic_amp
            .iter()
            .zip(&harmonic_phase)
            .enumerate()
            .map(|(h, (a, p))| a * ((h + 1) as f64 * phase + p).sin())
            .sum();
        out.push(env * v);
        envelope.push(env);
        phase = (phase + 2.0 * PI * f0 / sr) % (2.0 * PI);
    }
    // breath noise follows the envelope, scaled to the harmonic RMS
    let rms = (out.iter().map(|v| v * v).sum::<f64>() / spec.len as f64).sqrt();
    for (v, env) in out.iter_mut().zip(&envelope) {
        *v += params.breath * rms * env * rng.sample::<f64, _>(StandardNormal);
    }
    let peak = out.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    if peak > 0.0 {
        let k = 0.9 / peak;
        out.iter_mut().for_each(|v| *v *= k);
    }
    Ok((Signal::new(out, spec.sample_rate)?, params))
}

/// Deterministic corpus of `spec.n_items` peak-normalized (0.9) items.
pub fn synth_corpus(spec: &SyntheticVoiceSpec, seed: u64) -> Result<Vec<Signal>> {
    spec.validate()?;
    (0..spec.n_items)
        .map(|i| synth_item(spec, seed, i).map(|(s, _)| s))
        .collect()
}
