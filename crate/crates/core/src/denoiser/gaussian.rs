use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use super::{check_sigma, Denoiser};
use crate::error::{invalid, Error, Result};
use crate::signal::{apply_real_gain, irfft, rfft, Signal, Spectrum};

/// Exact posterior-mean denoiser for a stationary Gaussian prior
/// `x0 ~ N(mean, C)` where `C` is circulant with eigenvalues `cov_spectrum`
/// (one per half-spectrum bin, unitary DFT convention: `E|X_k|^2 / L`).
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianPriorDenoiser {
    mean: Signal,
    cov_spectrum: Vec<f64>,
}

impl GaussianPriorDenoiser {
    pub fn new(mean: Signal, cov_spectrum: Vec<f64>) -> Result<Self> {
        let bins = Spectrum::bins_for(mean.len());
        if cov_spectrum.len() != bins {
            return Err(Error::LengthMismatch {
                expected: bins,
                actual: cov_spectrum.len(),
            });
        }
        if cov_spectrum.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(invalid("cov_spectrum", "prior variances must be finite and >= 0"));
        }
        Ok(Self { mean, cov_spectrum })
    }

    /// Zero-mean white prior with per-sample variance `variance`.
    pub fn flat(len: usize, sample_rate: u32, variance: f64) -> Result<Self> {
        let mean = Signal::zeros(len, sample_rate)?;
        Self::new(mean, vec![variance; Spectrum::bins_for(len)])
    }

    /// Zero-mean prior with a 1/f power spectrum scaled to the given
    /// per-sample variance. DC shares the first bin's variance.
    pub fn pink(len: usize, sample_rate: u32, variance: f64) -> Result<Self> {
        let mean = Signal::zeros(len, sample_rate)?;
        Self::with_pink_spectrum(mean, variance)
    }

    /// Pink spectrum around an arbitrary mean signal.
    pub fn with_pink_spectrum(mean: Signal, variance: f64) -> Result<Self> {
        if !(variance.is_finite() && variance >= 0.0) {
            return Err(invalid("variance", format!("must be finite and >= 0, got {variance}")));
        }
        let len = mean.len();
        let shape: Vec<f64> = (0..Spectrum::bins_for(len))
            .map(|k| 1.0 / k.max(1) as f64)
            .collect();
        let per_sample = full_spectrum_sum(&shape, len) / len as f64;
        let cov = shape.iter().map(|s| s * variance / per_sample).collect();
        Self::new(mean, cov)
    }

    pub fn mean(&self) -> &Signal {
        &self.mean
    }

    pub fn cov_spectrum(&self) -> &[f64] {
        &self.cov_spectrum
    }

    /// Average per-sample prior variance, `tr(C) / L`.
    pub fn per_sample_variance(&self) -> f64 {
        full_spectrum_sum(&self.cov_spectrum, self.mean.len()) / self.mean.len() as f64
    }

    /// Diagonal posterior-mean gains `lambda_k / (lambda_k + sigma^2)`.
    pub fn gains(&self, sigma: f64) -> Vec<f64> {
        let s2 = sigma * sigma;
        self.cov_spectrum
            .iter()
            .map(|&l| if l + s2 == 0.0 { 1.0 } else { l / (l + s2) })
            .collect()
    }

    /// Draws `x0` from the prior.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Signal {
        let len = self.mean.len();
        let white: Vec<f64> = (0..len).map(|_| rng.sample(StandardNormal)).collect();
        let white = Signal::from_parts(white, self.mean.sample_rate());
        let shaped = apply_real_gain(&white, |k, _| self.cov_spectrum[k].sqrt());
        shaped.add(&self.mean)
    }

    /// Gradient of `log N(x; mean, C + sigma^2 I)`.
    pub fn log_density_grad(&self, x: &Signal, sigma: f64) -> Result<Signal> {
        self.check_len(x)?;
        let s2 = sigma * sigma;
        let centered = x.sub(&self.mean);
        let mut spec = rfft(&centered);
        for (b, &l) in spec.bins.iter_mut().zip(&self.cov_spectrum) {
            *b *= -1.0 / (l + s2);
        }
        irfft(&spec, x.len())
    }

    /// Exact posterior mean of `x0` given `y = M x0 + eps`, where `M` keeps
    /// the bins with `keep(freq_hz)` true and `eps` is white with std
    /// `sigma_y`.
    pub fn masked_posterior_mean(
        &self,
        y: &Signal,
        sigma_y: f64,
        keep: impl Fn(f64) -> bool,
    ) -> Result<Signal> {
        self.check_len(y)?;
        let s2 = sigma_y * sigma_y;
        let ys = rfft(y);
        let ms = rfft(&self.mean);
        let bins: Vec<Complex64> = ys
            .bins
            .iter()
            .zip(&ms.bins)
            .zip(&self.cov_spectrum)
            .enumerate()
            .map(|(k, ((&yk, &mk), &l))| {
                if keep(ys.frequency(k)) {
                    let g = if l + s2 == 0.0 { 1.0 } else { l / (l + s2) };
                    mk + (yk - mk) * g
                } else {
                    mk
                }
            })
            .collect();
        irfft(
            &Spectrum {
                bins,
                ..ys
            },
            y.len(),
        )
    }

    fn check_len(&self, x: &Signal) -> Result<()> {
        self.mean.check_same_len(x)
    }
}

fn full_spectrum_sum(half: &[f64], len: usize) -> f64 {
    half.iter()
        .enumerate()
        .map(|(k, v)| if k == 0 || 2 * k == len { *v } else { 2.0 * v })
        .sum()
}

impl Denoiser for GaussianPriorDenoiser {
    /// Posterior mean `mean_k + lambda_k / (lambda_k + sigma^2) (x_k - mean_k)`.
    fn denoise(&self, x: &Signal, sigma: f64) -> Result<Signal> {
        self.check_len(x)?;
        if !(sigma.is_finite() && sigma >= 0.0) {
            return Err(invalid("sigma", format!("must be finite and >= 0, got {sigma}")));
        }
        if sigma == 0.0 {
            return Ok(x.clone());
        }
        let g = self.gains(sigma);
        let centered = x.sub(&self.mean);
        Ok(apply_real_gain(&centered, |k, _| g[k]).add(&self.mean))
    }

    fn vjp(&self, x: &Signal, sigma: f64, v: &Signal) -> Result<Signal> {
        check_sigma(sigma)?;
        self.check_len(x)?;
        x.check_same_len(v)?;
        let g = self.gains(sigma);
        Ok(apply_real_gain(v, |k, _| g[k]))
    }
}
