//! Forward degradation operators, their pseudo-inverses, adjoint actions,
//! and measurement-consistency projections.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{invalid, Error, Result};
use crate::metrics;
use crate::signal::{apply_real_gain, Signal};

/// The operations every degradation exposes to the guidance machinery.
pub trait Degradation {
    /// Forward operator `A`.
    fn apply(&self, x: &Signal) -> Result<Signal>;

    /// `h^dagger`. Both shipped operators use `h^dagger = A`, which satisfies
    /// `A(h^dagger(A(x))) = A(x)` because each is idempotent.
    fn pseudo_inverse(&self, y: &Signal) -> Result<Signal> {
        self.apply(y)
    }

    /// `v^T dA/dx` at `x` (a subgradient where `A` is not smooth).
    fn adjoint_at(&self, x: &Signal, v: &Signal) -> Result<Signal>;

    /// Replaces the parts of `x_hat` that the measurement `y` determines.
    fn dc_project(&self, x_hat: &Signal, y: &Signal) -> Result<Signal>;
}

/// Symmetric hard clipping at `+-c`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HardClip {
    c: f64,
}

impl HardClip {
    pub fn new(c: f64) -> Result<Self> {
        if !(c.is_finite() && c > 0.0) {
            return Err(invalid("clip", format!("threshold must be positive and finite, got {c}")));
        }
        Ok(Self { c })
    }

    pub fn threshold(&self) -> f64 {
        self.c
    }

    fn reliable(&self, v: f64) -> bool {
        v.abs() < self.c
    }
}

impl Degradation for HardClip {
    /// `(|x + c| - |x - c|) / 2`, evaluated as the equivalent clamp so the
    /// result is exact.
    fn apply(&self, x: &Signal) -> Result<Signal> {
        let c = self.c;
        Ok(x.map_samples(|v| v.clamp(-c, c)))
    }

    /// Indicator of the unclipped region; samples with `|x| >= c` get zero.
    fn adjoint_at(&self, x: &Signal, v: &Signal) -> Result<Signal> {
        x.check_same_len(v)?;
        Ok(x.zip_map(v, |xi, vi| if self.reliable(xi) { vi } else { 0.0 }))
    }

    /// Keeps `y` where it is unclipped (`|y| < c`), `x_hat` elsewhere.
    fn dc_project(&self, x_hat: &Signal, y: &Signal) -> Result<Signal> {
        x_hat.check_same_len(y)?;
        Ok(x_hat.zip_map(y, |xh, yi| if self.reliable(yi) { yi } else { xh }))
    }
}

/// Ideal low-pass: Fourier bins with center frequency above `fc` are zeroed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BrickwallLpf {
    fc: f64,
}

impl BrickwallLpf {
    pub fn new(fc: f64) -> Result<Self> {
        if !(fc.is_finite() && fc > 0.0) {
            return Err(invalid("fc", format!("cutoff must be positive and finite, got {fc}")));
        }
        Ok(Self { fc })
    }

    pub fn cutoff(&self) -> f64 {
        self.fc
    }

    pub fn passes(&self, freq_hz: f64) -> bool {
        freq_hz <= self.fc
    }

    fn mask(&self, x: &Signal) -> Result<Signal> {
        if self.fc >= x.nyquist() {
            return Err(invalid(
                "fc",
                format!(
                    "cutoff {} Hz must lie below Nyquist ({} Hz)",
                    self.fc,
                    x.nyquist()
                ),
            ));
        }
        let fc = self.fc;
        Ok(apply_real_gain(x, |_, f| if f <= fc { 1.0 } else { 0.0 }))
    }
}

impl Degradation for BrickwallLpf {
    fn apply(&self, x: &Signal) -> Result<Signal> {
        self.mask(x)
    }

    /// The mask is self-adjoint.
    fn adjoint_at(&self, x: &Signal, v: &Signal) -> Result<Signal> {
        x.check_same_len(v)?;
        self.mask(v)
    }

    /// `y + (x_hat - LPF(x_hat))`: measured band below `fc`, predicted above.
    fn dc_project(&self, x_hat: &Signal, y: &Signal) -> Result<Signal> {
        x_hat.check_same_len(y)?;
        let high = x_hat.sub(&self.mask(x_hat)?);
        Ok(y.add(&high))
    }
}

/// One of the shipped degradations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DegradationOp {
    Clip(HardClip),
    Lpf(BrickwallLpf),
}

impl DegradationOp {
    pub fn task_name(&self) -> &'static str {
        match self {
            DegradationOp::Clip(_) => "declip",
            DegradationOp::Lpf(_) => "bwe",
        }
    }

    fn inner(&self) -> &dyn Degradation {
        match self {
            DegradationOp::Clip(op) => op,
            DegradationOp::Lpf(op) => op,
        }
    }
}

impl From<HardClip> for DegradationOp {
    fn from(op: HardClip) -> Self {
        DegradationOp::Clip(op)
    }
}

impl From<BrickwallLpf> for DegradationOp {
    fn from(op: BrickwallLpf) -> Self {
        DegradationOp::Lpf(op)
    }
}

impl Degradation for DegradationOp {
    fn apply(&self, x: &Signal) -> Result<Signal> {
        self.inner().apply(x)
    }
    fn pseudo_inverse(&self, y: &Signal) -> Result<Signal> {
        self.inner().pseudo_inverse(y)
    }
    fn adjoint_at(&self, x: &Signal, v: &Signal) -> Result<Signal> {
        self.inner().adjoint_at(x, v)
    }
    fn dc_project(&self, x_hat: &Signal, y: &Signal) -> Result<Signal> {
        self.inner().dc_project(x_hat, y)
    }
}

/// Observation `y = A(x0) + eps`, `eps ~ N(0, sigma_y^2 I)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Measurement {
    pub y: Signal,
    pub op: DegradationOp,
    pub sigma_y: f64,
}

impl Measurement {
    pub fn new(y: Signal, op: DegradationOp, sigma_y: f64) -> Result<Self> {
        if !(sigma_y.is_finite() && sigma_y >= 0.0) {
            return Err(invalid("sigma_y", format!("must be finite and >= 0, got {sigma_y}")));
        }
        Ok(Self { y, op, sigma_y })
    }
}

/// Applies `op` and adds seeded white measurement noise.
pub fn degrade(op: DegradationOp, x: &Signal, sigma_y: f64, seed: u64) -> Result<Measurement> {
    let clean = op.apply(x)?;
    let y = if sigma_y > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noisy = clean
            .samples()
            .iter()
            .map(|&v| v + sigma_y * rng.sample::<f64, _>(StandardNormal))
            .collect();
        clean.with_samples(noisy)?
    } else {
        clean
    };
    Measurement::new(y, op, sigma_y)
}

/// Finds the clip threshold whose output has the requested SDR against `x`
/// (within 0.01 dB) by bisection.
pub fn clip_for_sdr(x: &Signal, target_db: f64) -> Result<(HardClip, Signal)> {
    const MAX_STEPS: usize = 200;
    const TOL_DB: f64 = 0.01;
    let peak = x.max_abs();
    if peak == 0.0 {
        return Err(Error::InvalidSignal("cannot calibrate clipping on a silent signal".into()));
    }
    if !target_db.is_finite() || target_db <= 0.0 {
        return Err(Error::Unachievable {
            target_db,
            reason: "clipping SDR approaches 0 dB as the threshold vanishes".into(),
        });
    }
    if target_db >= metrics::DB_CAP {
        return Err(Error::Unachievable {
            target_db,
            reason: format!("exceeds the {} dB reporting cap", metrics::DB_CAP),
        });
    }
    let sdr_at = |c: f64| -> Result<(HardClip, Signal, f64)> {
        let op = HardClip::new(c)?;
        let y = op.apply(x)?;
        let s = metrics::sdr(x, &y)?;
        Ok((op, y, s))
    };
    let (mut lo, mut hi) = (0.0, peak);
    let mut best: Option<(HardClip, Signal, f64)> = None;
    for _ in 0..MAX_STEPS {
        let mid = 0.5 * (lo + hi);
        if mid <= 0.0 || mid == lo || mid == hi {
            break;
        }
        let (op, y, s) = sdr_at(mid)?;
        let err = s - target_db;
        let better = best.as_ref().is_none_or(|b| err.abs() < (b.2 - target_db).abs());
        if better {
            best = Some((op, y, s));
        }
        if err.abs() <= TOL_DB / 10.0 {
            break;
        }
        if err < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    match best {
        Some((op, y, s)) if (s - target_db).abs() <= TOL_DB => Ok((op, y)),
        Some((_, _, s)) => Err(Error::Unachievable {
            target_db,
            reason: format!("bisection stalled at {s:.4} dB"),
        }),
        None => Err(Error::Unachievable {
            target_db,
            reason: "no admissible threshold".into(),
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn sig(v: &[f64]) -> Signal {
        Signal::new(v.to_vec(), 22050).unwrap()
    }

    fn tone(freq: f64, len: usize) -> Signal {
        Signal::new(
            (0..len)
                .map(|n| (2.0 * PI * freq * n as f64 / 22050.0).sin())
                .collect(),
            22050,
        )
        .unwrap()
    }

    #[test]
    fn clip_examples() {
        let op = HardClip::new(0.6).unwrap();
        let x = sig(&[0.5, -0.9, 0.2]);
        assert_eq!(op.apply(&x).unwrap().samples(), &[0.5, -0.6, 0.2]);
        let wide = HardClip::new(1.0).unwrap();
        assert_eq!(wide.apply(&x).unwrap(), x);
        let neg = x.scale(-1.0);
        assert_eq!(op.apply(&neg).unwrap(), op.apply(&x).unwrap().scale(-1.0));
        assert!(HardClip::new(0.0).is_err());
        assert!(HardClip::new(-1.0).is_err());
    }

    #[test]
    fn clip_adjoint_indicator() {
        let op = HardClip::new(0.6).unwrap();
        let g = op
            .adjoint_at(&sig(&[0.5, -0.9]), &sig(&[1.0, 1.0]))
            .unwrap();
        assert_eq!(g.samples(), &[1.0, 0.0]);
        // boundary counts as clipped
        let b = op.adjoint_at(&sig(&[0.6]), &sig(&[1.0])).unwrap();
        assert_eq!(b.samples(), &[0.0]);
        let wide = HardClip::new(2.0).unwrap();
        let v = sig(&[0.3, -0.7]);
        assert_eq!(wide.adjoint_at(&sig(&[0.5, -0.9]), &v).unwrap(), v);
    }

    #[test]
    fn clip_dc_keeps_reliable_samples() {
        let op = HardClip::new(0.6).unwrap();
        let x = sig(&[0.5, -0.9, 0.2, 0.7]);
        let y = op.apply(&x).unwrap();
        let out = op.dc_project(&x, &y).unwrap();
        assert_eq!(out, x);
        let guess = sig(&[0.0, -0.8, 0.0, 0.65]);
        let out = op.dc_project(&guess, &y).unwrap();
        assert_eq!(out.samples(), &[0.5, -0.8, 0.2, 0.65]);
    }

    #[test]
    fn lpf_passband_and_stopband() {
        let op = BrickwallLpf::new(3000.0).unwrap();
        // whole number of periods so the tone sits on one bin
        let low = tone(22050.0 * 10.0 / 2205.0, 2205);
        assert!(op.apply(&low).unwrap().sub(&low).norm() < 1e-9 * low.norm());
        let op5 = BrickwallLpf::new(5000.0).unwrap();
        let high = tone(7000.0, 2205);
        assert!(op5.apply(&high).unwrap().norm_sq() < 1e-12 * high.norm_sq());
    }

    #[test]
    fn lpf_range_checked() {
        let op = BrickwallLpf::new(12000.0).unwrap();
        assert!(op.apply(&tone(100.0, 64)).is_err());
        assert!(BrickwallLpf::new(0.0).is_err());
    }

    #[test]
    fn lpf_dc_with_zero_prediction_returns_y() {
        let op = BrickwallLpf::new(5000.0).unwrap();
        let y = op.apply(&tone(1000.0, 512).add(&tone(8000.0, 512))).unwrap();
        let zero = Signal::zeros(512, 22050).unwrap();
        assert!(op.dc_project(&zero, &y).unwrap().sub(&y).norm() < 1e-12);
    }

    #[test]
    fn degrade_noise_free_and_seeded() {
        let x = tone(440.0, 1000);
        let op = DegradationOp::Clip(HardClip::new(0.5).unwrap());
        let m = degrade(op, &x, 0.0, 1).unwrap();
        assert_eq!(m.y, op.apply(&x).unwrap());
        let a = degrade(op, &x, 0.1, 7).unwrap();
        let b = degrade(op, &x, 0.1, 7).unwrap();
        assert_eq!(a, b);
        assert!(degrade(op, &x, -0.1, 7).is_err());
    }

    #[test]
    fn clip_for_sdr_hits_target() {
        let x = tone(440.0, 4096);
        for target in [5.0, 10.0] {
            let (op, y) = clip_for_sdr(&x, target).unwrap();
            let s = metrics::sdr(&x, &y).unwrap();
            assert!((s - target).abs() <= 0.01, "{s}");
            assert_eq!(y, op.apply(&x).unwrap());
        }
    }

    #[test]
    fn clip_for_sdr_rejects_infeasible() {
        let x = tone(440.0, 512);
        assert!(matches!(clip_for_sdr(&x, 150.0), Err(Error::Unachievable { .. })));
        assert!(matches!(clip_for_sdr(&x, -3.0), Err(Error::Unachievable { .. })));
        let silent = Signal::zeros(64, 22050).unwrap();
        assert!(clip_for_sdr(&silent, 5.0).is_err());
    }
}
