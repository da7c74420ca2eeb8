//! The denoiser abstraction `D(x; sigma)` and the score it induces.
//!
//! Every denoiser exposes its value and a vector-Jacobian product; the
//! guidance terms only ever need those two.

mod gaussian;
mod shrinkage;

pub use gaussian::GaussianPriorDenoiser;
pub use shrinkage::{train_shrinkage, BandSpec, ShrinkageConfig, ShrinkageDenoiser};

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{invalid, Result};
use crate::signal::Signal;

/// Estimator of `E[x0 | x_t = x]` at noise level `sigma`.
pub trait Denoiser: Send + Sync {
    fn denoise(&self, x: &Signal, sigma: f64) -> Result<Signal>;

    /// `v^T * dD/dx` evaluated at `x`, returned as a signal.
    fn vjp(&self, x: &Signal, sigma: f64, v: &Signal) -> Result<Signal>;
}

impl<D: Denoiser + ?Sized> Denoiser for &D {
    fn denoise(&self, x: &Signal, sigma: f64) -> Result<Signal> {
        (**self).denoise(x, sigma)
    }
    fn vjp(&self, x: &Signal, sigma: f64, v: &Signal) -> Result<Signal> {
        (**self).vjp(x, sigma, v)
    }
}

impl<D: Denoiser + ?Sized> Denoiser for Box<D> {
    fn denoise(&self, x: &Signal, sigma: f64) -> Result<Signal> {
        (**self).denoise(x, sigma)
    }
    fn vjp(&self, x: &Signal, sigma: f64, v: &Signal) -> Result<Signal> {
        (**self).vjp(x, sigma, v)
    }
}

/// `D(x; sigma) = x`.
#[derive(Debug, Clone, Copy, Default)]
pub struct IdentityDenoiser;

impl Denoiser for IdentityDenoiser {
    fn denoise(&self, x: &Signal, _sigma: f64) -> Result<Signal> {
        Ok(x.clone())
    }

    fn vjp(&self, x: &Signal, _sigma: f64, v: &Signal) -> Result<Signal> {
        x.check_same_len(v)?;
        Ok(v.clone())
    }
}

pub(crate) fn check_sigma(sigma: f64) -> Result<()> {
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(invalid("sigma", format!("must be positive and finite, got {sigma}")));
    }
    Ok(())
}

/// Score estimate `(D(x; sigma) - x) / sigma^2`.
pub fn score(denoiser: &dyn Denoiser, x: &Signal, sigma: f64) -> Result<Signal> {
    check_sigma(sigma)?;
    let d = denoiser.denoise(x, sigma)?;
    let inv = 1.0 / (sigma * sigma);
    Ok(d.zip_map(x, |a, b| (a - b) * inv))
}

/// Central finite-difference VJP. Costs `2 L` denoiser evaluations, so it is
/// only suitable for checking analytic Jacobians on short signals.
pub fn finite_difference_vjp(
    denoiser: &dyn Denoiser,
    x: &Signal,
    sigma: f64,
    v: &Signal,
) -> Result<Signal> {
    check_sigma(sigma)?;
    x.check_same_len(v)?;
    let h = 1e-4 * (1.0 + x.max_abs());
    let mut probe = x.samples().to_vec();
    let mut out = Vec::with_capacity(x.len());
    for j in 0..x.len() {
        let orig = probe[j];
        probe[j] = orig + h;
        let plus = v.dot(&denoiser.denoise(&x.with_samples(probe.clone())?, sigma)?);
        probe[j] = orig - h;
        let minus = v.dot(&denoiser.denoise(&x.with_samples(probe.clone())?, sigma)?);
        probe[j] = orig;
        out.push((plus - minus) / (2.0 * h));
    }
    x.with_samples(out)
}

/// Monte-Carlo estimate of the L2 denoising objective
/// `E ||D(x + n; sigma) - x||^2` with `n ~ N(0, sigma^2 I)`, averaged over
/// `draws` noise draws per item.
pub fn denoising_loss<R: Rng + ?Sized>(
    denoiser: &dyn Denoiser,
    dataset: &[Signal],
    sigma: f64,
    draws: usize,
    rng: &mut R,
) -> Result<f64> {
    check_sigma(sigma)?;
    let mut total = 0.0;
    let mut count = 0usize;
    for x in dataset {
        for _ in 0..draws {
            let noisy: Vec<f64> = x
                .samples()
                .iter()
                .map(|&v| v + sigma * rng.sample::<f64, _>(StandardNormal))
                .collect();
            let d = denoiser.denoise(&x.with_samples(noisy)?, sigma)?;
            total += d.sub(x).norm_sq();
            count += 1;
        }
    }
    Ok(total / count.max(1) as f64)
}
