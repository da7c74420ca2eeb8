use std::io::{Read, Write};
use std::path::Path;

use super::{check_sigma, Denoiser};
use crate::error::{invalid, Error, Result};
use crate::schedule::NoiseSchedule;
use crate::signal::{apply_real_gain, rfft, Signal};

const MAGIC: &[u8; 5] = b"DPSD1";

/// How to split `[0, Nyquist]` into shrinkage bands.
#[derive(Debug, Clone, PartialEq)]
pub enum BandSpec {
    /// `n` equal-width bands.
    Uniform(usize),
    /// Explicit ascending edges in Hz; the last band is closed at Nyquist.
    Edges(Vec<f64>),
}

impl BandSpec {
    fn edges(&self, nyquist: f64) -> Result<Vec<f64>> {
        let edges = match self {
            BandSpec::Uniform(n) => {
                if *n == 0 {
                    return Err(invalid("bands", "need at least one band"));
                }
                (0..=*n).map(|b| nyquist * b as f64 / *n as f64).collect()
            }
            BandSpec::Edges(e) => e.clone(),
        };
        validate_edges(&edges)?;
        Ok(edges)
    }
}

fn validate_edges(edges: &[f64]) -> Result<()> {
    if edges.len() < 2 {
        return Err(invalid("bands", "need at least two band edges"));
    }
    if edges.iter().any(|e| !e.is_finite() || *e < 0.0) {
        return Err(invalid("bands", "band edges must be finite and >= 0"));
    }
    if let Some(b) = edges.windows(2).position(|w| w[1] <= w[0]) {
        return Err(invalid("bands", format!("band {b} has zero length")));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShrinkageConfig {
    pub bands: BandSpec,
    /// Number of log-spaced noise levels at which gains are tabulated.
    pub sigma_bins: usize,
}

impl Default for ShrinkageConfig {
    fn default() -> Self {
        Self {
            bands: BandSpec::Uniform(256),
            sigma_bins: 48,
        }
    }
}

/// Per-band Wiener shrinkage, tabulated on a noise-level grid and
/// interpolated linearly in `log sigma`.
#[derive(Debug, Clone, PartialEq)]
pub struct ShrinkageDenoiser {
    band_edges: Vec<f64>,
    sigma_bins: Vec<f64>,
    /// Band-major: `gains[b * sigma_bins.len() + s]`.
    gains: Vec<f64>,
}

impl ShrinkageDenoiser {
    pub fn new(band_edges: Vec<f64>, sigma_bins: Vec<f64>, gains: Vec<f64>) -> Result<Self> {
        validate_edges(&band_edges)?;
        if sigma_bins.is_empty()
            || sigma_bins.iter().any(|s| !(s.is_finite() && *s > 0.0))
            || sigma_bins.windows(2).any(|w| w[1] <= w[0])
        {
            return Err(invalid("sigma_bins", "must be positive and strictly increasing"));
        }
        let expected = (band_edges.len() - 1) * sigma_bins.len();
        if gains.len() != expected {
            return Err(Error::LengthMismatch {
                expected,
                actual: gains.len(),
            });
        }
        if gains.iter().any(|g| !(0.0..=1.0).contains(g)) {
            return Err(invalid("gains", "shrinkage gains must lie in [0, 1]"));
        }
        Ok(Self {
            band_edges,
            sigma_bins,
            gains,
        })
    }

    pub fn band_edges(&self) -> &[f64] {
        &self.band_edges
    }

    pub fn sigma_bins(&self) -> &[f64] {
        &self.sigma_bins
    }

    pub fn n_bands(&self) -> usize {
        self.band_edges.len() - 1
    }

    pub fn gain(&self, band: usize, sigma_bin: usize) -> f64 {
        self.gains[band * self.sigma_bins.len() + sigma_bin]
    }

    /// Band containing `freq_hz`. Frequencies past the last edge fall in the
    /// last band.
    pub fn band_of(&self, freq_hz: f64) -> usize {
        let upper = &self.band_edges[1..];
        upper.partition_point(|&e| e <= freq_hz).min(self.n_bands() - 1)
    }

    /// Gain of `band` at an arbitrary noise level.
    pub fn gain_at(&self, band: usize, sigma: f64) -> f64 {
        let n = self.sigma_bins.len();
        let row = &self.gains[band * n..(band + 1) * n];
        if n == 1 || sigma <= self.sigma_bins[0] {
            return row[0];
        }
        if sigma >= self.sigma_bins[n - 1] {
            return row[n - 1];
        }
        let j = self.sigma_bins.partition_point(|&s| s <= sigma) - 1;
        let (lo, hi) = (self.sigma_bins[j].ln(), self.sigma_bins[j + 1].ln());
        let t = (sigma.ln() - lo) / (hi - lo);
        row[j] + t * (row[j + 1] - row[j])
    }

    fn band_gains(&self, sigma: f64) -> Vec<f64> {
        (0..self.n_bands()).map(|b| self.gain_at(b, sigma)).collect()
    }

    fn filter(&self, x: &Signal, sigma: f64) -> Signal {
        let g = self.band_gains(sigma);
        apply_real_gain(x, |_, f| g[self.band_of(f)])
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(13 + 8 * (self.band_edges.len() + self.sigma_bins.len() + self.gains.len()));
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(self.band_edges.len() as u32).to_le_bytes());
        out.extend_from_slice(&(self.sigma_bins.len() as u32).to_le_bytes());
        for v in self.band_edges.iter().chain(&self.sigma_bins).chain(&self.gains) {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |m: &str| Error::DenoiserFormat(m.to_string());
        if bytes.len() < 13 || &bytes[..5] != MAGIC {
            return Err(bad("missing DPSD1 header"));
        }
        let n_edges = u32::from_le_bytes(bytes[5..9].try_into().unwrap()) as usize;
        let n_sigmas = u32::from_le_bytes(bytes[9..13].try_into().unwrap()) as usize;
        if n_edges < 2 || n_sigmas == 0 {
            return Err(bad("empty band or noise-level table"));
        }
        let n_gains = (n_edges - 1)
            .checked_mul(n_sigmas)
            .ok_or_else(|| bad("table size overflow"))?;
        let total = n_edges + n_sigmas + n_gains;
        let body = &bytes[13..];
        if body.len() != total * 8 {
            return Err(bad(&format!(
                "expected {} payload bytes, found {}",
                total * 8,
                body.len()
            )));
        }
        let values: Vec<f64> = body
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let (edges, rest) = values.split_at(n_edges);
        let (sigmas, gains) = rest.split_at(n_sigmas);
        Self::new(edges.to_vec(), sigmas.to_vec(), gains.to_vec())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let io = |source| Error::Io {
            path: path.to_path_buf(),
            source,
        };
        let mut f = std::fs::File::create(path).map_err(io)?;
        f.write_all(&self.to_bytes()).map_err(io)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let io = |source| Error::Io {
            path: path.to_path_buf(),
            source,
        };
        let mut bytes = Vec::new();
        std::fs::File::open(path)
            .map_err(io)?
            .read_to_end(&mut bytes)
            .map_err(io)?;
        Self::from_bytes(&bytes)
    }
}

impl Denoiser for ShrinkageDenoiser {
    fn denoise(&self, x: &Signal, sigma: f64) -> Result<Signal> {
        check_sigma(sigma)?;
        Ok(self.filter(x, sigma))
    }

    fn vjp(&self, x: &Signal, sigma: f64, v: &Signal) -> Result<Signal> {
        check_sigma(sigma)?;
        x.check_same_len(v)?;
        Ok(self.filter(v, sigma))
    }
}

/// Fits per-band Wiener gains `S_b / (S_b + sigma^2)`, the closed-form
/// minimizer of the L2 denoising objective for a per-band scalar gain, where
/// `S_b` is the mean per-bin signal power `|X_k|^2 / L` over the band and
/// the dataset.
pub fn train_shrinkage(
    dataset: &[Signal],
    schedule: &NoiseSchedule,
    config: &ShrinkageConfig,
) -> Result<ShrinkageDenoiser> {
    let first = dataset.first().ok_or(Error::EmptyDataset)?;
    let len = first.len();
    let sample_rate = first.sample_rate();
    if let Some(bad) = dataset
        .iter()
        .find(|s| s.len() != len || s.sample_rate() != sample_rate)
    {
        return Err(Error::LengthMismatch {
            expected: len,
            actual: bad.len(),
        });
    }
    if config.sigma_bins == 0 {
        return Err(invalid("sigma_bins", "need at least one noise-level bin"));
    }
    let nyquist = f64::from(sample_rate) / 2.0;
    let edges = config.bands.edges(nyquist)?;
    let n_bands = edges.len() - 1;

    let proto = ShrinkageDenoiser {
        band_edges: edges.clone(),
        sigma_bins: vec![1.0],
        gains: vec![1.0; n_bands],
    };
    let mut power = vec![0.0; n_bands];
    let mut count = vec![0usize; n_bands];
    for x in dataset {
        let spec = rfft(x);
        for (k, b) in spec.bins.iter().enumerate() {
            let band = proto.band_of(spec.frequency(k));
            power[band] += b.norm_sqr() / len as f64;
            count[band] += 1;
        }
    }
    if let Some(b) = count.iter().position(|&c| c == 0) {
        return Err(invalid(
            "bands",
            format!(
                "band {b} ({:.1}-{:.1} Hz) contains no frequency bins at length {len}",
                edges[b],
                edges[b + 1]
            ),
        ));
    }
    let band_power: Vec<f64> = power
        .iter()
        .zip(&count)
        .map(|(p, &c)| p / c as f64)
        .collect();

    // cover churned levels above sigma_max as well
    let lo = schedule.sigma_min();
    let hi = schedule.sigma_max() * std::f64::consts::SQRT_2;
    let n = config.sigma_bins;
    let sigma_bins: Vec<f64> = if n == 1 {
        vec![lo]
    } else {
        (0..n)
            .map(|j| (lo.ln() + (hi.ln() - lo.ln()) * j as f64 / (n - 1) as f64).exp())
            .collect()
    };
    let mut gains = Vec::with_capacity(n_bands * n);
    for &s in &band_power {
        for &sigma in &sigma_bins {
            let g = s / (s + sigma * sigma);
            gains.push(if g.is_finite() { g } else { 0.0 });
        }
    }
    ShrinkageDenoiser::new(edges, sigma_bins, gains)
}
