//! Discrete noise-level ladder and stochastic churn parameters.

use crate::error::{invalid, Result};

/// Position of an iteration along the sampling trajectory:
/// 0 at the noisiest iteration, 1 at the final one.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Progress(pub f64);

impl Progress {
    pub fn value(self) -> f64 {
        self.0
    }
}

/// Parameters for [`NoiseSchedule::build`].
#[derive(Debug, Clone, PartialEq)]
pub struct ScheduleParams {
    pub steps: usize,
    pub nu: f64,
    pub sigma_min: f64,
    pub sigma_max: f64,
    pub s_churn: f64,
    pub s_noise: f64,
    pub s_tmin: f64,
    pub s_tmax: f64,
}

impl Default for ScheduleParams {
    fn default() -> Self {
        Self {
            steps: 300,
            nu: 13.0,
            sigma_min: 1e-4,
            sigma_max: 1.0,
            s_churn: 5.0,
            s_noise: 1.0,
            s_tmin: 0.0,
            s_tmax: f64::INFINITY,
        }
    }
}

/// Noise levels `sigmas[i]` for iterations `i = 0..T`, strictly decreasing
/// from `sigma_max` to `sigma_min`.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSchedule {
    sigmas: Vec<f64>,
    params: ScheduleParams,
}

impl NoiseSchedule {
    /// `sigma_i = (smax^(1/nu) + i/(T-1) * (smin^(1/nu) - smax^(1/nu)))^nu`
    pub fn build(params: ScheduleParams) -> Result<Self> {
        let ScheduleParams {
            steps,
            nu,
            sigma_min,
            sigma_max,
            s_churn,
            s_noise,
            s_tmin,
            s_tmax,
        } = params;
        if steps < 2 {
            return Err(invalid("steps", format!("need at least 2 steps, got {steps}")));
        }
        if !(nu.is_finite() && nu > 0.0) {
            return Err(invalid("nu", format!("must be positive and finite, got {nu}")));
        }
        if !(sigma_min.is_finite() && sigma_max.is_finite() && 0.0 < sigma_min && sigma_min < sigma_max) {
            return Err(invalid(
                "sigma_min",
                format!("need 0 < sigma_min < sigma_max, got {sigma_min} and {sigma_max}"),
            ));
        }
        if !(s_churn.is_finite() && s_churn >= 0.0) {
            return Err(invalid("s_churn", format!("must be finite and >= 0, got {s_churn}")));
        }
        if !(s_noise.is_finite() && s_noise >= 0.0) {
            return Err(invalid("s_noise", format!("must be finite and >= 0, got {s_noise}")));
        }
        if s_tmin.is_nan() || s_tmax.is_nan() || s_tmin > s_tmax {
            return Err(invalid("s_tmin", "churn band must satisfy s_tmin <= s_tmax"));
        }

        let hi = sigma_max.powf(1.0 / nu);
        let lo = sigma_min.powf(1.0 / nu);
        let last = (steps - 1) as f64;
        let mut sigmas: Vec<f64> = (0..steps)
            .map(|i| (hi + (i as f64 / last) * (lo - hi)).powf(nu))
            .collect();
        // pin the endpoints against powf round-off
        sigmas[0] = sigma_max;
        sigmas[steps - 1] = sigma_min;
        if sigmas.windows(2).any(|w| w[1] >= w[0]) {
            return Err(invalid(
                "steps",
                "schedule is not strictly decreasing at this precision",
            ));
        }
        Ok(Self { sigmas, params })
    }

    /// The default ladder with the given step count.
    pub fn with_steps(steps: usize) -> Result<Self> {
        Self::build(ScheduleParams {
            steps,
            ..ScheduleParams::default()
        })
    }

    pub fn sigmas(&self) -> &[f64] {
        &self.sigmas
    }

    pub fn sigma(&self, i: usize) -> f64 {
        self.sigmas[i]
    }

    pub fn steps(&self) -> usize {
        self.sigmas.len()
    }

    pub fn params(&self) -> &ScheduleParams {
        &self.params
    }

    pub fn sigma_min(&self) -> f64 {
        self.params.sigma_min
    }

    pub fn sigma_max(&self) -> f64 {
        self.params.sigma_max
    }

    /// Churn factor `gamma_i = min(S_churn / T, sqrt(2) - 1)` inside the
    /// activity band `[s_tmin, s_tmax]`, zero outside.
    pub fn churn_gamma(&self, i: usize) -> f64 {
        let sigma = self.sigmas[i];
        if sigma < self.params.s_tmin || sigma > self.params.s_tmax {
            return 0.0;
        }
        (self.params.s_churn / self.steps() as f64).min(std::f64::consts::SQRT_2 - 1.0)
    }

    /// Inflated noise level `(1 + gamma_i) * sigma_i`.
    pub fn churned_sigma(&self, i: usize) -> f64 {
        (1.0 + self.churn_gamma(i)) * self.sigmas[i]
    }

    pub fn progress(&self, i: usize) -> Progress {
        Progress(i as f64 / (self.steps() - 1) as f64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(steps: usize, nu: f64, lo: f64, hi: f64, churn: f64) -> ScheduleParams {
        ScheduleParams {
            steps,
            nu,
            sigma_min: lo,
            sigma_max: hi,
            s_churn: churn,
            ..ScheduleParams::default()
        }
    }

    #[test]
    fn default_endpoints() {
        let s = NoiseSchedule::with_steps(300).unwrap();
        assert_eq!(s.sigma(0), 1.0);
        assert_eq!(s.sigma(299), 1e-4);
    }

    #[test]
    fn linear_when_nu_is_one() {
        let s = NoiseSchedule::build(params(3, 1.0, 0.1, 1.0, 0.0)).unwrap();
        let expect = [1.0, 0.55, 0.1];
        for (a, b) in s.sigmas().iter().zip(expect) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_bad_bounds() {
        assert!(NoiseSchedule::build(params(1, 13.0, 1e-4, 1.0, 0.0)).is_err());
        assert!(NoiseSchedule::build(params(10, 13.0, 1.0, 1e-4, 0.0)).is_err());
        assert!(NoiseSchedule::build(params(10, 13.0, 0.0, 1.0, 0.0)).is_err());
        assert!(NoiseSchedule::build(params(10, 13.0, f64::NAN, 1.0, 0.0)).is_err());
        assert!(NoiseSchedule::build(params(10, 0.0, 1e-4, 1.0, 0.0)).is_err());
        assert!(NoiseSchedule::build(params(10, 13.0, 1e-4, f64::INFINITY, 0.0)).is_err());
    }

    #[test]
    fn churn_gamma_rules() {
        let s = NoiseSchedule::with_steps(300).unwrap();
        assert!((s.churn_gamma(10) - 1.0 / 60.0).abs() < 1e-15);
        let off = NoiseSchedule::build(params(300, 13.0, 1e-4, 1.0, 0.0)).unwrap();
        assert_eq!(off.churn_gamma(5), 0.0);
        assert_eq!(off.churned_sigma(5), off.sigma(5));
        let capped = NoiseSchedule::build(params(300, 13.0, 1e-4, 1.0, 1000.0)).unwrap();
        assert!((capped.churn_gamma(0) - (2f64.sqrt() - 1.0)).abs() < 1e-15);
    }

    #[test]
    fn churn_band_limits_activity() {
        let s = NoiseSchedule::build(ScheduleParams {
            s_tmin: 0.01,
            s_tmax: 0.5,
            ..ScheduleParams::default()
        })
        .unwrap();
        assert_eq!(s.churn_gamma(0), 0.0);
        assert_eq!(s.churn_gamma(299), 0.0);
        let mid = s.sigmas().iter().position(|&v| v < 0.5).unwrap();
        assert!(s.churn_gamma(mid) > 0.0);
    }

    #[test]
    fn progress_values() {
        let s = NoiseSchedule::with_steps(300).unwrap();
        assert_eq!(s.progress(0).value(), 0.0);
        assert_eq!(s.progress(299).value(), 1.0);
        assert!((s.progress(150).value() - 150.0 / 299.0).abs() < 1e-15);
    }
}
