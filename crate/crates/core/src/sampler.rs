//! Reverse-diffusion sampler: churned Euler/Heun steps over the noise
//! ladder, data consistency, and windowed RePaint resampling.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::degradation::{Degradation, Measurement};
use crate::denoiser::Denoiser;
use crate::error::{invalid, Error, Result};
use crate::guidance::{guided_eval, GuidanceConfig};
use crate::schedule::NoiseSchedule;
use crate::signal::Signal;

/// RePaint cycles: `u` extra passes per step for iterations inside
/// `[phi1 T / 3, phi2 T / 3]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RepaintConfig {
    pub enabled: bool,
    pub u: usize,
    pub phi1: f64,
    pub phi2: f64,
}

impl Default for RepaintConfig {
    fn default() -> Self {
        Self {
            enabled: false,
            u: 0,
            phi1: 0.0,
            phi2: 0.0,
        }
    }
}

impl RepaintConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.phi1.is_finite()
            && self.phi2.is_finite()
            && 0.0 <= self.phi1
            && self.phi1 <= self.phi2
            && self.phi2 <= 3.0;
        if !ok {
            return Err(invalid(
                "phi1",
                format!("need 0 <= phi1 <= phi2 <= 3, got {} and {}", self.phi1, self.phi2),
            ));
        }
        Ok(())
    }
}

/// Number of RePaint cycles at iteration `i` of a `steps`-step run.
pub fn rp_window(rp: &RepaintConfig, steps: usize, i: usize) -> usize {
    if !rp.enabled || rp.u == 0 {
        return 0;
    }
    // tolerate round-off in phi * T / 3 (e.g. 2.8 * 300 / 3)
    const SLACK: f64 = 1e-9;
    let lo = rp.phi1 * steps as f64 / 3.0;
    let hi = rp.phi2 * steps as f64 / 3.0;
    let t = i as f64;
    if t + SLACK >= lo && t - SLACK <= hi {
        rp.u
    } else {
        0
    }
}

/// Where the data-consistency substitution sits relative to the guidance
/// term.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DcOrder {
    /// Substitute into the raw denoiser prediction, then add guidance.
    Pre,
    /// Fold the guidance term into the prediction, then substitute.
    Post,
}

impl FromStr for DcOrder {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pre" => Ok(Self::Pre),
            "post" => Ok(Self::Post),
            other => Err(invalid("dc_order", format!("unknown value `{other}`"))),
        }
    }
}

impl fmt::Display for DcOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Pre => "pre",
            Self::Post => "post",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SamplerConfig {
    pub guidance: GuidanceConfig,
    pub dc_enabled: bool,
    pub dc_order: DcOrder,
    pub rp: RepaintConfig,
    /// 1 = Euler, 2 = Heun.
    pub order: u8,
    pub seed: u64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            guidance: GuidanceConfig::default(),
            dc_enabled: false,
            dc_order: DcOrder::Pre,
            rp: RepaintConfig::default(),
            order: 1,
            seed: 0,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if !matches!(self.order, 1 | 2) {
            return Err(invalid("order", format!("must be 1 or 2, got {}", self.order)));
        }
        self.guidance.validate()?;
        self.rp.validate()
    }
}

/// One sampler iteration as recorded in the trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRecord {
    /// Running iteration counter, RePaint repeats included.
    pub iter: usize,
    /// Schedule index.
    pub step: usize,
    pub sigma: f64,
    pub residual: f64,
    /// 0 for the regular pass, `1..=U` for RePaint repeats.
    pub rp_cycle: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trace {
    pub records: Vec<TraceRecord>,
    pub final_estimate: Option<Signal>,
}

impl Trace {
    pub const CSV_HEADER: &'static str = "iter,sigma,residual,rp_cycle";

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{}", Self::CSV_HEADER)?;
        for r in &self.records {
            writeln!(w, "{},{:e},{:e},{}", r.iter, r.sigma, r.residual, r.rp_cycle)?;
        }
        Ok(())
    }

    fn push(&mut self, step: usize, sigma: f64, residual: f64, rp_cycle: usize) {
        let iter = self.records.len();
        self.records.push(TraceRecord {
            iter,
            step,
            sigma,
            residual,
            rp_cycle,
        });
    }
}

fn gaussian_like<R: Rng + ?Sized>(like: &Signal, scale: f64, rng: &mut R) -> Signal {
    let v = (0..like.len())
        .map(|_| scale * rng.sample::<f64, _>(StandardNormal))
        .collect();
    Signal::from_parts(v, like.sample_rate())
}

/// Re-noises a sample from `sigma_lo` back up to `sigma_hi`.
pub fn rp_rediffuse<R: Rng + ?Sized>(
    x_prev: &Signal,
    sigma_hi: f64,
    sigma_lo: f64,
    rng: &mut R,
) -> Result<Signal> {
    if !(sigma_lo >= 0.0 && sigma_hi > sigma_lo && sigma_hi.is_finite()) {
        return Err(invalid(
            "sigma_hi",
            format!("need sigma_hi > sigma_lo >= 0, got {sigma_hi} and {sigma_lo}"),
        ));
    }
    let std = (sigma_hi * sigma_hi - sigma_lo * sigma_lo).sqrt();
    Ok(x_prev.add(&gaussian_like(x_prev, std, rng)))
}

/// Result of one [`sample_step`].
#[derive(Debug, Clone)]
pub struct StepOutput {
    /// Sample at `sigma_{i+1}`.
    pub x: Signal,
    pub residual_norm: f64,
}

#[allow(clippy::too_many_arguments)]
fn slope(
    x: &Signal,
    sigma: f64,
    i: usize,
    denoiser: &dyn Denoiser,
    meas: &Measurement,
    cfg: &SamplerConfig,
    schedule: &NoiseSchedule,
) -> Result<(Signal, f64)> {
    let eval = guided_eval(denoiser, meas, &cfg.guidance, schedule, i, x, sigma)?;
    let g = &eval.guidance.direction;
    let s2 = sigma * sigma;
    let (x0, extra) = match (cfg.dc_enabled, cfg.dc_order) {
        (false, _) => (eval.denoised, Some(g)),
        (true, DcOrder::Pre) => (meas.op.dc_project(&eval.denoised, &meas.y)?, Some(g)),
        (true, DcOrder::Post) => (
            meas.op.dc_project(&eval.denoised.axpy(s2, g), &meas.y)?,
            None,
        ),
    };
    // d = -sigma * (score + guidance) = (x - x0) / sigma - sigma * guidance
    let mut d = x.zip_map(&x0, |a, b| (a - b) / sigma);
    if let Some(g) = extra {
        d = d.axpy(-sigma, g);
    }
    if !d.is_finite() {
        return Err(Error::GuidanceBlowUp {
            step: i,
            residual_norm: eval.guidance.residual_norm,
            what: "step direction".into(),
        });
    }
    Ok((d, eval.guidance.residual_norm))
}

/// Advances `x` from `sigma_i` to `sigma_{i+1}`.
#[allow(clippy::too_many_arguments)]
pub fn sample_step<R: Rng + ?Sized>(
    x: &Signal,
    i: usize,
    denoiser: &dyn Denoiser,
    meas: &Measurement,
    cfg: &SamplerConfig,
    schedule: &NoiseSchedule,
    rng: &mut R,
) -> Result<StepOutput> {
    if i + 1 >= schedule.steps() {
        return Err(invalid(
            "i",
            format!("step index {i} has no successor in a {}-step schedule", schedule.steps()),
        ));
    }
    let sigma = schedule.sigma(i);
    let sigma_hat = schedule.churned_sigma(i);
    let sigma_next = schedule.sigma(i + 1);
    let x_hat = if sigma_hat > sigma {
        let std = (sigma_hat * sigma_hat - sigma * sigma).sqrt() * schedule.params().s_noise;
        x.add(&gaussian_like(x, std, rng))
    } else {
        x.clone()
    };
    let (d, residual_norm) = slope(&x_hat, sigma_hat, i, denoiser, meas, cfg, schedule)?;
    let h = sigma_next - sigma_hat;
    let mut x_next = x_hat.axpy(h, &d);
    if cfg.order == 2 && sigma_next > 0.0 {
        let (d2, _) = slope(&x_next, sigma_next, i + 1, denoiser, meas, cfg, schedule)?;
        x_next = x_hat.zip_map(&d.add(&d2), |a, s| a + 0.5 * h * s);
    }
    if !x_next.is_finite() {
        return Err(Error::GuidanceBlowUp {
            step: i,
            residual_norm,
            what: "sample".into(),
        });
    }
    Ok(StepOutput {
        x: x_next,
        residual_norm,
    })
}

/// Total number of trace records a run produces: one per step, one per
/// RePaint repeat, and one for the final denoising.
pub fn expected_trace_len(rp: &RepaintConfig, steps: usize) -> usize {
    steps + (0..steps - 1).map(|i| rp_window(rp, steps, i)).sum::<usize>()
}

/// Like [`restore`], but records into a caller-owned trace so that the
/// iterations before a failure remain available.
pub fn restore_into(
    meas: &Measurement,
    denoiser: &dyn Denoiser,
    cfg: &SamplerConfig,
    schedule: &NoiseSchedule,
    trace: &mut Trace,
) -> Result<Signal> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let steps = schedule.steps();
    let mut x = gaussian_like(&meas.y, schedule.sigma_max(), &mut rng);
    for i in 0..steps - 1 {
        let cycles = rp_window(&cfg.rp, steps, i);
        for cycle in 0..=cycles {
            let out = sample_step(&x, i, denoiser, meas, cfg, schedule, &mut rng)?;
            trace.push(i, schedule.sigma(i), out.residual_norm, cycle);
            x = if cycle < cycles {
                rp_rediffuse(&out.x, schedule.sigma(i), schedule.sigma(i + 1), &mut rng)?
            } else {
                out.x
            };
        }
    }
    let last = steps - 1;
    let mut x0 = denoiser.denoise(&x, schedule.sigma(last))?;
    let residual = meas.op.apply(&x0)?.sub(&meas.y).norm();
    if cfg.dc_enabled {
        x0 = meas.op.dc_project(&x0, &meas.y)?;
    }
    trace.push(last, schedule.sigma(last), residual, 0);
    if !x0.is_finite() {
        return Err(Error::GuidanceBlowUp {
            step: last,
            residual_norm: residual,
            what: "final estimate".into(),
        });
    }
    trace.final_estimate = Some(x0.clone());
    Ok(x0)
}

/// Draws a restoration of `meas.y` from `x ~ N(0, sigma_max^2 I)`.
pub fn restore(
    meas: &Measurement,
    denoiser: &dyn Denoiser,
    cfg: &SamplerConfig,
    schedule: &NoiseSchedule,
) -> Result<(Signal, Trace)> {
    let mut trace = Trace::default();
    let x = restore_into(meas, denoiser, cfg, schedule, &mut trace)?;
    Ok((x, trace))
}
