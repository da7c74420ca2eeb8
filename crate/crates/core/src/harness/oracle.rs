//! Acceptance criteria checked against closed-form oracles.
//!
//! Each function runs one criterion and reports every measured quantity
//! next to its tolerance. `dps oracle-check` and the acceptance test target
//! both call these.

use std::f64::consts::PI;
use std::fmt;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::experiment::{
    build_denoiser, load_dataset, run_matrix, DatasetSpec, DenoiserSource, ExperimentSpec, MatrixResult,
    DEFAULT_TRAIN_ITEMS,
};
use super::mix_seed;
use super::presets::{Preset, Task};
use super::synth::{synth_corpus, SyntheticVoiceSpec, DEFAULT_SEGMENT_LEN};
use crate::degradation::{degrade, BrickwallLpf, Degradation, DegradationOp, HardClip, Measurement};
use crate::denoiser::{train_shrinkage, BandSpec, Denoiser, GaussianPriorDenoiser, ShrinkageConfig};
use crate::error::Result;
use crate::guidance::{delta_rho, rg_gradient};
use crate::metrics::sdr;
use crate::sampler::{restore, rp_window, RepaintConfig, SamplerConfig};
use crate::schedule::{NoiseSchedule, ScheduleParams};
use crate::signal::{rfft, Signal};

/// How a measured value is compared with its tolerance.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    /// `measured < tolerance`
    Below,
    /// `measured <= tolerance`
    AtMost,
    /// `measured >= tolerance`
    AtLeast,
    /// `measured > tolerance`
    Above,
}

impl Relation {
    fn holds(self, measured: f64, tolerance: f64) -> bool {
        match self {
            Relation::Below => measured < tolerance,
            Relation::AtMost => measured <= tolerance,
            Relation::AtLeast => measured >= tolerance,
            Relation::Above => measured > tolerance,
        }
    }

    fn symbol(self) -> &'static str {
        match self {
            Relation::Below => "<",
            Relation::AtMost => "<=",
            Relation::AtLeast => ">=",
            Relation::Above => ">",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub label: String,
    pub measured: f64,
    pub relation: Relation,
    pub tolerance: f64,
    pub passed: bool,
}

impl Check {
    pub fn new(label: impl Into<String>, measured: f64, relation: Relation, tolerance: f64) -> Self {
        Self {
            label: label.into(),
            measured,
            relation,
            tolerance,
            passed: relation.holds(measured, tolerance),
        }
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "[{}] {}: {:.6e} {} {:.6e}",
            if self.passed { "ok" } else { "FAIL" },
            self.label,
            self.measured,
            self.relation.symbol(),
            self.tolerance
        )
    }
}

/// Outcome of one acceptance criterion.
#[derive(Debug, Clone, PartialEq)]
pub struct CriterionReport {
    pub name: &'static str,
    pub checks: Vec<Check>,
    pub elapsed: Duration,
}

impl CriterionReport {
    pub fn passed(&self) -> bool {
        !self.checks.is_empty() && self.checks.iter().all(|c| c.passed)
    }

    /// `PASS <name> (<n> checks, <secs>s)` or `FAIL ...` with the first
    /// failing check.
    pub fn summary_line(&self) -> String {
        let secs = self.elapsed.as_secs_f64();
        match self.checks.iter().find(|c| !c.passed) {
            None => format!("PASS {} ({} checks, {secs:.1}s)", self.name, self.checks.len()),
            Some(c) => format!("FAIL {} ({secs:.1}s): {c}", self.name),
        }
    }
}

impl fmt::Display for CriterionReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{}", self.summary_line())?;
        for c in &self.checks {
            writeln!(f, "    {c}")?;
        }
        Ok(())
    }
}

fn timed(name: &'static str, run: impl FnOnce() -> Result<Vec<Check>>) -> Result<CriterionReport> {
    let start = Instant::now();
    let checks = run()?;
    let elapsed = start.elapsed();
    Ok(CriterionReport { name, checks, elapsed })
}

fn runtime_check(start: Instant, limit_s: f64) -> Check {
    Check::new("runtime (s)", start.elapsed().as_secs_f64(), Relation::Below, limit_s)
}

const ORACLE_LEN: usize = 256;
const ORACLE_RATE: u32 = 22050;
const ORACLE_VARIANCE: f64 = 1e-3;

/// Deterministic prior mean for the posterior oracle: bin-centred tones on
/// both sides of the cutoff.
pub fn oracle_prior_mean() -> Result<Signal> {
    const TONES: [(usize, f64, f64); 6] = [
        (5, 0.30, 0.4),
        (12, 0.20, 1.9),
        (20, 0.15, -0.7),
        (40, 0.10, 2.5),
        (60, 0.08, -2.0),
        (90, 0.05, 0.1),
    ];
    let len = ORACLE_LEN as f64;
    let samples = (0..ORACLE_LEN)
        .map(|n| {
            TONES
                .iter()
                .map(|&(k, a, p)| a * (2.0 * PI * k as f64 * n as f64 / len + p).cos())
                .sum()
        })
        .collect();
    Signal::new(samples, ORACLE_RATE)
}

/// Posterior-mean oracle: pink Gaussian prior, brick-wall LPF at a quarter
/// of Nyquist, noiseless measurement, pseudo-inverse guidance with data
/// consistency averaged over `seeds` runs.
pub fn gaussian_posterior(seeds: usize) -> Result<CriterionReport> {
    timed("gaussian posterior oracle", || {
        let start = Instant::now();
        let prior = GaussianPriorDenoiser::with_pink_spectrum(oracle_prior_mean()?, ORACLE_VARIANCE)?;
        let truth = prior.sample(&mut ChaCha8Rng::seed_from_u64(0x0_5eed));
        let lpf = BrickwallLpf::new(f64::from(ORACLE_RATE) / 8.0)?;
        let meas = degrade(lpf.into(), &truth, 0.0, 0)?;
        let analytic = prior.masked_posterior_mean(&meas.y, 0.0, |f| lpf.passes(f))?;
        let schedule = NoiseSchedule::build(ScheduleParams::default())?;
        let task = Task::Bwe { fc_hz: lpf.cutoff() };

        let mut sum = vec![0.0; ORACLE_LEN];
        let mut worst_passband: f64 = 0.0;
        let y_norm = meas.y.norm();
        for seed in 0..seeds as u64 {
            let cfg = Preset::PigdmDc.config(&task, seed);
            let (x, _) = restore(&meas, &prior, &cfg, &schedule)?;
            let pass = lpf.apply(&x)?;
            worst_passband = worst_passband.max(pass.sub(&meas.y).norm() / y_norm);
            sum.iter_mut().zip(x.samples()).for_each(|(s, v)| *s += v);
        }
        let mean = analytic.with_samples(sum.iter().map(|s| s / seeds as f64).collect())?;
        let rel = mean.sub(&analytic).norm() / analytic.norm();
        Ok(vec![
            Check::new("seeds", seeds as f64, Relation::AtLeast, 50.0),
            Check::new("relative L2 of mean vs analytic posterior mean", rel, Relation::Below, 0.05),
            Check::new("worst relative passband deviation from y", worst_passband, Relation::AtMost, 1e-6),
            runtime_check(start, 120.0),
        ])
    })
}

const GRAD_LEN: usize = 128;

fn grad_loss(den: &dyn Denoiser, meas: &Measurement, x: &Signal, sigma: f64) -> Result<f64> {
    Ok(meas.op.apply(&den.denoise(x, sigma)?)?.sub(&meas.y).norm_sq())
}

/// Full-gradient central differences of `||y - A(D(x; sigma))||^2`.
pub fn finite_difference_rg(den: &dyn Denoiser, meas: &Measurement, x: &Signal, sigma: f64, h: f64) -> Result<Signal> {
    let mut probe = x.samples().to_vec();
    let mut out = Vec::with_capacity(x.len());
    for j in 0..x.len() {
        let orig = probe[j];
        probe[j] = orig + h;
        let plus = grad_loss(den, meas, &x.with_samples(probe.clone())?, sigma)?;
        probe[j] = orig - h;
        let minus = grad_loss(den, meas, &x.with_samples(probe.clone())?, sigma)?;
        probe[j] = orig;
        out.push((plus - minus) / (2.0 * h));
    }
    x.with_samples(out)
}

fn normal_signal(rng: &mut ChaCha8Rng, len: usize, std: f64) -> Result<Signal> {
    Signal::new(
        (0..len).map(|_| std * rng.sample::<f64, _>(StandardNormal)).collect(),
        ORACLE_RATE,
    )
}

/// Worst relative error `||G_fd - G|| / ||G||` over `probes` random
/// probes for one denoiser/operator pair.
fn gradient_probe_error(den: &dyn Denoiser, op: DegradationOp, probes: usize, seed: u64) -> Result<(f64, usize)> {
    const H: f64 = 1e-5;
    const KINK_MARGIN: f64 = 1e-3;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    let mut done = 0;
    let mut attempts = 0;
    while done < probes && attempts < 50 * probes {
        attempts += 1;
        let truth = normal_signal(&mut rng, GRAD_LEN, 0.4)?;
        let meas = Measurement::new(op.apply(&truth)?, op, 0.0)?;
        let sigma = (rng.random_range(1e-3_f64.ln()..0.0)).exp();
        let x = truth.add(&normal_signal(&mut rng, GRAD_LEN, sigma)?);
        if let DegradationOp::Clip(c) = op {
            let x0 = den.denoise(&x, sigma)?;
            let near_kink = x0
                .samples()
                .iter()
                .any(|v| (v.abs() - c.threshold()).abs() < KINK_MARGIN);
            if near_kink {
                continue;
            }
        }
        let g = rg_gradient(den, &meas, &x, sigma)?;
        let fd = finite_difference_rg(den, &meas, &x, sigma, H)?;
        let norm = g.norm();
        if norm == 0.0 {
            continue;
        }
        worst = worst.max(fd.sub(&g).norm() / norm);
        done += 1;
    }
    Ok((worst, done))
}

/// Analytic reconstruction-guidance gradients against central finite
/// differences for both denoiser families and both degradations.
pub fn gradient_checks(probes: usize) -> Result<CriterionReport> {
    timed("guidance gradient checks", || {
        let start = Instant::now();
        let gaussian = GaussianPriorDenoiser::pink(GRAD_LEN, ORACLE_RATE, 0.05)?;
        let voice = SyntheticVoiceSpec {
            n_items: 8,
            len: GRAD_LEN,
            n_harmonics: 8,
            ..SyntheticVoiceSpec::default()
        };
        let shrink = train_shrinkage(
            &synth_corpus(&voice, 3)?,
            &NoiseSchedule::build(ScheduleParams::default())?,
            &ShrinkageConfig {
                bands: BandSpec::Uniform(16),
                ..ShrinkageConfig::default()
            },
        )?;
        let ops = [
            ("clip", DegradationOp::Clip(HardClip::new(0.3)?)),
            ("lpf", DegradationOp::Lpf(BrickwallLpf::new(4000.0)?)),
        ];
        let dens: [(&str, &dyn Denoiser); 2] = [("gaussian", &gaussian), ("shrinkage", &shrink)];
        let mut checks = Vec::new();
        for (di, (dname, den)) in dens.iter().enumerate() {
            for (oi, (oname, op)) in ops.iter().enumerate() {
                let (worst, done) = gradient_probe_error(*den, *op, probes, mix_seed(11, &[di as u64, oi as u64]))?;
                checks.push(Check::new(format!("{dname} x {oname}: probes"), done as f64, Relation::AtLeast, 20.0));
                checks.push(Check::new(
                    format!("{dname} x {oname}: worst relative error"),
                    worst,
                    Relation::Below,
                    1e-4,
                ));
            }
        }
        checks.push(runtime_check(start, 60.0));
        Ok(checks)
    })
}

/// Operator identities on `n` random signals.
pub fn operator_contracts(n: usize) -> Result<CriterionReport> {
    timed("operator contracts", || {
        const LEN: usize = 512;
        let clip = HardClip::new(0.4)?;
        let lpf = BrickwallLpf::new(4000.0)?;
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let mut hh_clip: f64 = 0.0;
        let mut hh_lpf: f64 = 0.0;
        let mut idem: f64 = 0.0;
        let mut adj: f64 = 0.0;
        let mut adj_mask: f64 = 0.0;
        let mut formula_mismatch = 0usize;
        for _ in 0..n {
            let x = normal_signal(&mut rng, LEN, 0.5)?;
            let v = normal_signal(&mut rng, LEN, 1.0)?;
            let hx = clip.apply(&x)?;
            hh_clip = hh_clip.max(clip.apply(&clip.pseudo_inverse(&hx)?)?.sub(&hx).max_abs());
            let lx = lpf.apply(&x)?;
            hh_lpf = hh_lpf.max(lpf.apply(&lpf.pseudo_inverse(&lx)?)?.sub(&lx).max_abs());
            idem = idem.max(lpf.apply(&lx)?.sub(&lx).max_abs());
            let lv = lpf.apply(&v)?;
            adj = adj.max((lx.dot(&v) - x.dot(&lv)).abs() / (x.norm() * v.norm()));
            adj_mask = adj_mask.max(lpf.adjoint_at(&x, &v)?.sub(&lv).max_abs());

            // dyadic grid: every step of the closed form is exact
            let c = f64::from(rng.random_range(1u32..1024)) / 1024.0;
            let op = HardClip::new(c)?;
            let grid = Signal::new(
                (0..LEN)
                    .map(|_| f64::from(rng.random_range(-(1i32 << 21)..=(1 << 21))) / f64::from(1u32 << 20))
                    .collect(),
                ORACLE_RATE,
            )?;
            let clamped = op.apply(&grid)?;
            formula_mismatch += grid
                .samples()
                .iter()
                .zip(clamped.samples())
                .filter(|(&v, &got)| ((v + c).abs() - (v - c).abs()) / 2.0 != got)
                .count();
        }
        Ok(vec![
            Check::new("signals", n as f64, Relation::AtLeast, 100.0),
            Check::new("clip h(h+(h(x))) - h(x)", hh_clip, Relation::AtMost, 1e-9),
            Check::new("lpf h(h+(h(x))) - h(x)", hh_lpf, Relation::AtMost, 1e-9),
            Check::new("lpf idempotence", idem, Relation::AtMost, 1e-9),
            Check::new("lpf adjoint identity (relative)", adj, Relation::AtMost, 1e-9),
            Check::new("lpf adjoint_at equals mask", adj_mask, Relation::AtMost, 1e-9),
            Check::new("clip closed form vs clamp mismatches", formula_mismatch as f64, Relation::AtMost, 0.0),
        ])
    })
}

/// Noise-level endpoints, RePaint window, and `delta_rho` endpoints.
pub fn schedule_window() -> Result<CriterionReport> {
    timed("schedule and window arithmetic", || {
        let schedule = NoiseSchedule::build(ScheduleParams::default())?;
        let last = schedule.steps() - 1;
        let rp = RepaintConfig {
            enabled: true,
            u: 10,
            phi1: 1.5,
            phi2: 2.8,
        };
        let wrong = (0..schedule.steps())
            .filter(|&i| {
                let want = if (150..=280).contains(&i) { 10 } else { 0 };
                rp_window(&rp, schedule.steps(), i) != want
            })
            .count();
        Ok(vec![
            Check::new("steps", schedule.steps() as f64, Relation::AtLeast, 300.0),
            Check::new("|sigma_0 - 1|", (schedule.sigma(0) - 1.0).abs(), Relation::AtMost, 1e-12),
            Check::new("|sigma_299 - 1e-4|", (schedule.sigma(last) - 1e-4).abs(), Relation::AtMost, 1e-12),
            Check::new("window mismatches over 0..300", wrong as f64, Relation::AtMost, 0.0),
            Check::new("|delta_rho(0)|", delta_rho(&schedule, 75.0, 0).abs(), Relation::AtMost, 1e-12),
            Check::new(
                "|delta_rho(299) - 4|",
                (delta_rho(&schedule, 75.0, last) - 4.0).abs(),
                Relation::AtMost,
                1e-12,
            ),
        ])
    })
}

/// SDR calibration of the clipping threshold on the synthetic corpus.
pub fn clipping_calibration(items: usize) -> Result<CriterionReport> {
    timed("clipping calibration", || {
        let corpus = synth_corpus(&SyntheticVoiceSpec::with_items(items), 0)?;
        let mut checks = vec![Check::new("items", corpus.len() as f64, Relation::AtLeast, 20.0)];
        for target in [5.0, 10.0] {
            let task = Task::Declip { sdr_db: target };
            let mut worst: f64 = 0.0;
            for x in &corpus {
                let (_, y) = task.degrade(x)?;
                worst = worst.max((sdr(x, &y)? - target).abs());
            }
            checks.push(Check::new(format!("worst |SDR - {target}| dB"), worst, Relation::AtMost, 0.01));
        }
        Ok(checks)
    })
}

/// Unguided sampling from a pink Gaussian prior reproduces the prior's
/// per-band power.
pub fn unconditional_sanity(samples: usize) -> Result<CriterionReport> {
    timed("unconditional sampling sanity", || {
        const BANDS: usize = 8;
        let prior = GaussianPriorDenoiser::pink(ORACLE_LEN, ORACLE_RATE, ORACLE_VARIANCE)?;
        let schedule = NoiseSchedule::build(ScheduleParams::default())?;
        let zeros = Signal::zeros(ORACLE_LEN, ORACLE_RATE)?;
        let meas = Measurement::new(zeros, BrickwallLpf::new(1000.0)?.into(), 0.0)?;
        let bins = ORACLE_LEN / 2 + 1;
        let mut power = vec![0.0; bins];
        for seed in 0..samples as u64 {
            let cfg = SamplerConfig {
                seed,
                ..SamplerConfig::default()
            };
            let (x, _) = restore(&meas, &prior, &cfg, &schedule)?;
            for (p, b) in power.iter_mut().zip(&rfft(&x).bins) {
                *p += b.norm_sqr() / ORACLE_LEN as f64;
            }
        }
        let per_band = bins.div_ceil(BANDS);
        let lambda = prior.cov_spectrum();
        let mut worst: f64 = 0.0;
        for b in 0..BANDS {
            let range = b * per_band..((b + 1) * per_band).min(bins);
            let emp: f64 = power[range.clone()].iter().sum::<f64>() / samples as f64;
            let want: f64 = lambda[range].iter().sum();
            worst = worst.max((emp / want - 1.0).abs());
        }
        Ok(vec![
            Check::new("samples", samples as f64, Relation::AtLeast, 500.0),
            Check::new("worst per-band relative variance error", worst, Relation::Below, 0.10),
        ])
    })
}

/// Items for the end-to-end criterion.
pub const E2E_ITEMS: usize = 20;

fn pass_rate(res: &MatrixResult, task: &Task, method: &str, better: impl Fn(f64, f64) -> bool, metric: fn(&crate::metrics::MetricReport) -> f64) -> (f64, f64, f64) {
    let sel = |m: &str| -> Vec<_> {
        res.rows
            .iter()
            .filter(|r| r.task == task.name() && r.severity == task.severity() && r.method == m)
            .collect()
    };
    let base = sel(task.baseline_label());
    let ours = sel(method);
    let wins = ours
        .iter()
        .filter(|o| base.iter().find(|b| b.file == o.file).is_some_and(|b| better(metric(o), metric(b))))
        .count();
    let mean = |v: &[&crate::metrics::MetricReport]| v.iter().map(|r| metric(r)).sum::<f64>() / v.len().max(1) as f64;
    (mean(&base), mean(&ours), wins as f64 / base.len().max(1) as f64)
}

/// Guided restoration beats the degraded input on the synthetic corpus with
/// a trained shrinkage denoiser.
pub fn end_to_end(items: usize, seed: u64) -> Result<CriterionReport> {
    timed("end-to-end improvement", || {
        let start = Instant::now();
        let schedule = NoiseSchedule::build(ScheduleParams::default())?;
        let dataset = DatasetSpec::Synthetic(items);
        let data = load_dataset(&dataset, DEFAULT_SEGMENT_LEN, seed)?;
        let den = build_denoiser(
            &DenoiserSource::TrainSynthetic(DEFAULT_TRAIN_ITEMS),
            &[],
            DEFAULT_SEGMENT_LEN,
            22050,
            &schedule,
            seed,
        )?;
        let mut checks = vec![Check::new("items", data.len() as f64, Relation::AtLeast, 20.0)];
        let runs = [
            (Preset::RgDrhoDcRp, vec![Task::Declip { sdr_db: 5.0 }, Task::Declip { sdr_db: 10.0 }]),
            (Preset::PigdmDc, vec![Task::Bwe { fc_hz: 3000.0 }, Task::Bwe { fc_hz: 5000.0 }]),
        ];
        for (method, tasks) in runs {
            let spec = ExperimentSpec {
                tasks: tasks.clone(),
                methods: vec![method],
                dataset: dataset.clone(),
                seed,
                ..ExperimentSpec::default()
            };
            let res = run_matrix(&spec, &data, den.as_ref())?;
            checks.push(Check::new(format!("{method}: failed jobs"), res.failures.len() as f64, Relation::AtMost, 0.0));
            for task in &tasks {
                let (base, ours, rate) = match task {
                    Task::Declip { .. } => pass_rate(&res, task, method.name(), |a, b| a > b, |r| r.si_sdr_db),
                    Task::Bwe { .. } => pass_rate(&res, task, method.name(), |a, b| a < b, |r| r.lsd),
                };
                let (metric, margin, rel) = match task {
                    Task::Declip { .. } => ("SI-SDR gain dB", ours - base, Relation::Above),
                    Task::Bwe { .. } => ("LSD reduction", base - ours, Relation::Above),
                };
                checks.push(Check::new(format!("{method} {task}: mean {metric}"), margin, rel, 0.0));
                checks.push(Check::new(format!("{method} {task}: per-item pass rate"), rate, Relation::AtLeast, 0.8));
            }
        }
        checks.push(runtime_check(start, 900.0));
        Ok(checks)
    })
}

/// Library-level reruns with fixed seeds are bit-identical.
pub fn determinism() -> Result<CriterionReport> {
    timed("determinism", || {
        let prior = GaussianPriorDenoiser::pink(ORACLE_LEN, ORACLE_RATE, ORACLE_VARIANCE)?;
        let truth = prior.sample(&mut ChaCha8Rng::seed_from_u64(5));
        let schedule = NoiseSchedule::build(ScheduleParams {
            steps: 60,
            ..ScheduleParams::default()
        })?;
        let mut differing = 0usize;
        let mut compare = |a: &[f64], b: &[f64]| {
            if a.len() != b.len() || a.iter().zip(b).any(|(p, q)| p.to_bits() != q.to_bits()) {
                differing += 1;
            }
        };
        let task = Task::Declip { sdr_db: 5.0 };
        let (op, _) = task.degrade(&truth)?;
        let m1 = degrade(op, &truth, 0.01, 3)?;
        let m2 = degrade(op, &truth, 0.01, 3)?;
        compare(m1.y.samples(), m2.y.samples());
        for preset in Preset::ALL {
            let cfg = preset.config(&task, 17);
            let (a, ta) = restore(&m1, &prior, &cfg, &schedule)?;
            let (b, tb) = restore(&m1, &prior, &cfg, &schedule)?;
            compare(a.samples(), b.samples());
            let res_a: Vec<f64> = ta.records.iter().map(|r| r.residual).collect();
            let res_b: Vec<f64> = tb.records.iter().map(|r| r.residual).collect();
            compare(&res_a, &res_b);
        }
        let voice = SyntheticVoiceSpec {
            n_items: 4,
            len: 2048,
            ..SyntheticVoiceSpec::default()
        };
        let t1 = train_shrinkage(&synth_corpus(&voice, 8)?, &schedule, &ShrinkageConfig::default())?;
        let t2 = train_shrinkage(&synth_corpus(&voice, 8)?, &schedule, &ShrinkageConfig::default())?;
        if t1.to_bytes() != t2.to_bytes() {
            differing += 1;
        }
        let spec = ExperimentSpec {
            tasks: vec![task, Task::Bwe { fc_hz: 3000.0 }],
            methods: Preset::TABLE.to_vec(),
            dataset: DatasetSpec::Synthetic(2),
            seed: 4,
            schedule: schedule.params().clone(),
            segment_len: 2048,
            ..ExperimentSpec::default()
        };
        let data = load_dataset(&spec.dataset, spec.segment_len, spec.seed)?;
        let r1 = run_matrix(&spec, &data, &t1)?.to_csv();
        let r2 = run_matrix(&spec, &data, &t1)?.to_csv();
        if r1 != r2 {
            differing += 1;
        }
        Ok(vec![Check::new("differing reruns", differing as f64, Relation::AtMost, 0.0)])
    })
}

/// Options for [`run_all`].
#[derive(Debug, Clone, PartialEq)]
pub struct OracleOptions {
    pub posterior_seeds: usize,
    pub gradient_probes: usize,
    pub contract_signals: usize,
    pub calibration_items: usize,
    pub unconditional_samples: usize,
    /// Skip the end-to-end criterion (several minutes on one core).
    pub skip_end_to_end: bool,
    pub e2e_items: usize,
    pub seed: u64,
}

impl Default for OracleOptions {
    fn default() -> Self {
        Self {
            posterior_seeds: 50,
            gradient_probes: 20,
            contract_signals: 100,
            calibration_items: 20,
            unconditional_samples: 500,
            skip_end_to_end: false,
            e2e_items: E2E_ITEMS,
            seed: 0,
        }
    }
}

/// Runs every criterion in order.
pub fn run_all(opts: &OracleOptions) -> Result<Vec<CriterionReport>> {
    let mut out = vec![
        gaussian_posterior(opts.posterior_seeds)?,
        gradient_checks(opts.gradient_probes)?,
        operator_contracts(opts.contract_signals)?,
        schedule_window()?,
        clipping_calibration(opts.calibration_items)?,
        unconditional_sanity(opts.unconditional_samples)?,
    ];
    if !opts.skip_end_to_end {
        out.push(end_to_end(opts.e2e_items, opts.seed)?);
    }
    out.push(determinism()?);
    Ok(out)
}
