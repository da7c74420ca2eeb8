//! Likelihood terms that steer sampling toward the measurement:
//! reconstruction guidance (RG) with its time-dependent scaling, and
//! pseudo-inverse guidance.

use std::fmt;
use std::str::FromStr;

use crate::degradation::{Degradation, Measurement};
use crate::denoiser::{check_sigma, Denoiser};
use crate::error::{invalid, Error, Result};
use crate::schedule::NoiseSchedule;
use crate::signal::Signal;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GuidanceKind {
    None,
    Rg,
    Pigdm,
}

/// What the `t` in `rho' sqrt(L) / (t ||G||^p)` stands for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RhoTimeConvention {
    /// Divide by the schedule noise level `sigma_i`.
    NoiseLevel,
    /// Divide by the remaining step count `T - i`.
    CountdownIndex,
}

macro_rules! keyword_enum {
    ($ty:ty, $param:literal, { $($name:literal => $variant:expr),+ $(,)? }) => {
        impl FromStr for $ty {
            type Err = Error;
            fn from_str(s: &str) -> Result<Self> {
                match s {
                    $($name => Ok($variant),)+
                    other => Err(invalid($param, format!("unknown value `{other}`"))),
                }
            }
        }

        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                let name = match self {
                    $(v if *v == $variant => $name,)+
                    _ => unreachable!(),
                };
                f.write_str(name)
            }
        }
    };
}

keyword_enum!(GuidanceKind, "guidance", {
    "none" => GuidanceKind::None,
    "rg" => GuidanceKind::Rg,
    "pigdm" => GuidanceKind::Pigdm,
});

keyword_enum!(RhoTimeConvention, "rho_time_convention", {
    "noise-level" => RhoTimeConvention::NoiseLevel,
    "countdown-index" => RhoTimeConvention::CountdownIndex,
});

#[derive(Debug, Clone, PartialEq)]
pub struct GuidanceConfig {
    pub kind: GuidanceKind,
    /// Base RG scale `rho'`.
    pub rho_prime: f64,
    /// Multiply the RG scale by the linear ramp `delta_rho`.
    pub delta_rho: bool,
    pub delta_rho_divisor: f64,
    pub rho_time_convention: RhoTimeConvention,
    /// Exponent `p` on `||G||` in the RG normalization (1 or 2).
    pub grad_norm_power: u8,
}

impl Default for GuidanceConfig {
    fn default() -> Self {
        Self {
            kind: GuidanceKind::None,
            rho_prime: 1.0,
            delta_rho: false,
            delta_rho_divisor: 75.0,
            rho_time_convention: RhoTimeConvention::NoiseLevel,
            grad_norm_power: 2,
        }
    }
}

impl GuidanceConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rho_prime.is_finite() && self.rho_prime > 0.0) {
            return Err(invalid("rho_prime", format!("must be positive, got {}", self.rho_prime)));
        }
        if !(self.delta_rho_divisor.is_finite() && self.delta_rho_divisor > 0.0) {
            return Err(invalid(
                "delta_rho_divisor",
                format!("must be positive, got {}", self.delta_rho_divisor),
            ));
        }
        if !matches!(self.grad_norm_power, 1 | 2) {
            return Err(invalid(
                "grad_norm_power",
                format!("must be 1 or 2, got {}", self.grad_norm_power),
            ));
        }
        Ok(())
    }
}

/// The additive likelihood term for the conditional score.
#[derive(Debug, Clone, PartialEq)]
pub struct GuidanceResult {
    pub direction: Signal,
    /// `||y - A(x0_hat)||`
    pub residual_norm: f64,
}

fn finite_or_blowup(s: Signal, step: usize, residual_norm: f64, what: &str) -> Result<Signal> {
    if s.is_finite() {
        Ok(s)
    } else {
        Err(Error::GuidanceBlowUp {
            step,
            residual_norm,
            what: what.to_string(),
        })
    }
}

/// `G = grad_x ||y - A(D(x; sigma))||^2` through the chain
/// `r = 2 (A(x0) - y)`, `s = A'(x0)^T r`, `G = (dD/dx)^T s`.
pub fn rg_gradient(
    denoiser: &dyn Denoiser,
    meas: &Measurement,
    x_t: &Signal,
    sigma: f64,
) -> Result<Signal> {
    check_sigma(sigma)?;
    let x0 = denoiser.denoise(x_t, sigma)?;
    meas.y.check_same_len(&x0)?;
    let ax0 = meas.op.apply(&x0)?;
    let (g, _) = rg_gradient_at(denoiser, meas, x_t, sigma, &x0, &ax0)?;
    if g.is_finite() {
        Ok(g)
    } else {
        Err(Error::NonFinite("reconstruction-guidance gradient"))
    }
}

fn rg_gradient_at(
    denoiser: &dyn Denoiser,
    meas: &Measurement,
    x_t: &Signal,
    sigma: f64,
    x0: &Signal,
    ax0: &Signal,
) -> Result<(Signal, f64)> {
    let diff = ax0.sub(&meas.y);
    let residual = diff.norm();
    let s = meas.op.adjoint_at(x0, &diff.scale(2.0))?;
    Ok((denoiser.vjp(x_t, sigma, &s)?, residual))
}

/// Linear ramp from 0 at the first iteration to `T / divisor` at the last.
pub fn delta_rho(schedule: &NoiseSchedule, divisor: f64, i: usize) -> f64 {
    let steps = schedule.steps() as f64;
    (steps / divisor) * schedule.progress(i).value()
}

/// RG scale `rho' sqrt(L) / (tau ||G||^p)`, optionally times `delta_rho`.
/// Zero when `G` vanishes.
pub fn rg_scale(
    cfg: &GuidanceConfig,
    schedule: &NoiseSchedule,
    i: usize,
    len: usize,
    grad: &Signal,
) -> f64 {
    let norm = grad.norm();
    if norm == 0.0 {
        return 0.0;
    }
    let tau = match cfg.rho_time_convention {
        RhoTimeConvention::NoiseLevel => schedule.sigma(i),
        RhoTimeConvention::CountdownIndex => (schedule.steps() - i) as f64,
    }
    .max(schedule.sigma_min());
    let base = cfg.rho_prime * (len as f64).sqrt() / (tau * norm.powi(i32::from(cfg.grad_norm_power)));
    if cfg.delta_rho {
        base * delta_rho(schedule, cfg.delta_rho_divisor, i)
    } else {
        base
    }
}

/// `(dD/dx)^T (h+(y) - h+(h(x0_hat)))` with `h+ = A`.
pub fn pigdm_direction(
    denoiser: &dyn Denoiser,
    meas: &Measurement,
    x_t: &Signal,
    sigma: f64,
) -> Result<Signal> {
    check_sigma(sigma)?;
    let x0 = denoiser.denoise(x_t, sigma)?;
    meas.y.check_same_len(&x0)?;
    let d = pigdm_direction_at(denoiser, meas, x_t, sigma, &meas.op.apply(&x0)?)?;
    if d.is_finite() {
        Ok(d)
    } else {
        Err(Error::NonFinite("pseudo-inverse guidance direction"))
    }
}

fn pigdm_direction_at(
    denoiser: &dyn Denoiser,
    meas: &Measurement,
    x_t: &Signal,
    sigma: f64,
    ax0: &Signal,
) -> Result<Signal> {
    let op = &meas.op;
    let target = op.pseudo_inverse(&meas.y)?;
    let current = op.pseudo_inverse(ax0)?;
    denoiser.vjp(x_t, sigma, &target.sub(&current))
}

/// Everything one sampler step needs from a single denoiser evaluation.
#[derive(Debug, Clone)]
pub(crate) struct GuidedEval {
    pub denoised: Signal,
    pub guidance: GuidanceResult,
}

/// Evaluates the denoiser and the configured guidance term at `(x, sigma)`,
/// scaling with schedule index `i`. The pseudo-inverse term is divided by
/// `sigma^2` so that it lives in score units.
pub(crate) fn guided_eval(
    denoiser: &dyn Denoiser,
    meas: &Measurement,
    cfg: &GuidanceConfig,
    schedule: &NoiseSchedule,
    i: usize,
    x: &Signal,
    sigma: f64,
) -> Result<GuidedEval> {
    check_sigma(sigma)?;
    let denoised = denoiser.denoise(x, sigma)?;
    if !denoised.is_finite() {
        return Err(Error::GuidanceBlowUp {
            step: i,
            residual_norm: f64::NAN,
            what: "denoiser output".into(),
        });
    }
    meas.y.check_same_len(&denoised)?;
    let ax0 = meas.op.apply(&denoised)?;
    let (direction, residual_norm) = match cfg.kind {
        GuidanceKind::None => {
            let r = ax0.sub(&meas.y).norm();
            (Signal::from_parts(vec![0.0; x.len()], x.sample_rate()), r)
        }
        GuidanceKind::Rg => {
            let (g, r) = rg_gradient_at(denoiser, meas, x, sigma, &denoised, &ax0)?;
            let g = finite_or_blowup(g, i, r, "reconstruction-guidance gradient")?;
            let scale = rg_scale(cfg, schedule, i, x.len(), &g);
            (g.scale(-scale), r)
        }
        GuidanceKind::Pigdm => {
            let r = ax0.sub(&meas.y).norm();
            let d = pigdm_direction_at(denoiser, meas, x, sigma, &ax0)?;
            (d.scale(1.0 / (sigma * sigma)), r)
        }
    };
    let direction = finite_or_blowup(direction, i, residual_norm, "guidance direction")?;
    Ok(GuidedEval {
        denoised,
        guidance: GuidanceResult {
            direction,
            residual_norm,
        },
    })
}

/// Unconditional score at `sigma_i` plus the configured likelihood term.
pub fn conditional_score(
    denoiser: &dyn Denoiser,
    meas: &Measurement,
    cfg: &GuidanceConfig,
    schedule: &NoiseSchedule,
    i: usize,
    x_t: &Signal,
) -> Result<Signal> {
    if i >= schedule.steps() {
        return Err(invalid("i", format!("index {i} out of range for {} steps", schedule.steps())));
    }
    let sigma = schedule.sigma(i);
    let eval = guided_eval(denoiser, meas, cfg, schedule, i, x_t, sigma)?;
    let inv = 1.0 / (sigma * sigma);
    let score = eval.denoised.zip_map(x_t, |d, x| (d - x) * inv);
    Ok(score.add(&eval.guidance.direction))
}
