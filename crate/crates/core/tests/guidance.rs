use dps_core::guidance::{conditional_score, pigdm_direction, rg_gradient, rg_scale};
use dps_core::harness::synth::{synth_corpus, SyntheticVoiceSpec};
use dps_core::{
    score, train_shrinkage, BandSpec, BrickwallLpf, Degradation, DegradationOp, Denoiser, GaussianPriorDenoiser,
    GuidanceConfig, GuidanceKind, HardClip, IdentityDenoiser, Measurement, NoiseSchedule, RhoTimeConvention,
    ScheduleParams, ShrinkageConfig, Signal,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

const RATE: u32 = 22050;
const LEN: usize = 128;

fn noise(len: usize, scale: f64, rng: &mut impl Rng) -> Signal {
    Signal::new((0..len).map(|_| scale * rng.sample::<f64, _>(StandardNormal)).collect(), RATE).unwrap()
}

fn loss(den: &dyn Denoiser, meas: &Measurement, x: &Signal, sigma: f64) -> f64 {
    let x0 = den.denoise(x, sigma).unwrap();
    meas.y.sub(&meas.op.apply(&x0).unwrap()).norm_sq()
}

fn fd_gradient(den: &dyn Denoiser, meas: &Measurement, x: &Signal, sigma: f64) -> Signal {
    let h = 1e-5;
    let out = (0..x.len())
        .map(|j| {
            let mut p = x.samples().to_vec();
            p[j] += h;
            let plus = loss(den, meas, &x.with_samples(p.clone()).unwrap(), sigma);
            p[j] -= 2.0 * h;
            let minus = loss(den, meas, &x.with_samples(p).unwrap(), sigma);
            (plus - minus) / (2.0 * h)
        })
        .collect();
    x.with_samples(out).unwrap()
}

fn trained() -> Box<dyn Denoiser> {
    let spec = SyntheticVoiceSpec {
        n_items: 8,
        len: LEN,
        n_harmonics: 4,
        ..SyntheticVoiceSpec::default()
    };
    let schedule = NoiseSchedule::build(ScheduleParams::default()).unwrap();
    let cfg = ShrinkageConfig {
        bands: BandSpec::Uniform(16),
        sigma_bins: 12,
    };
    Box::new(train_shrinkage(&synth_corpus(&spec, 1).unwrap(), &schedule, &cfg).unwrap())
}

#[test]
fn rg_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let dens: Vec<Box<dyn Denoiser>> = vec![Box::new(GaussianPriorDenoiser::pink(LEN, RATE, 0.05).unwrap()), trained()];
    let ops: [DegradationOp; 2] = [HardClip::new(0.3).unwrap().into(), BrickwallLpf::new(4000.0).unwrap().into()];
    for den in &dens {
        for op in ops {
            let mut probes = 0;
            while probes < 20 {
                let truth = noise(LEN, 0.3, &mut rng);
                let meas = Measurement::new(op.apply(&truth).unwrap(), op, 0.0).unwrap();
                let sigma = 10f64.powf(rng.random_range(-2.0..0.0));
                let x = truth.add(&noise(LEN, sigma, &mut rng));
                if let DegradationOp::Clip(c) = op {
                    // central differences straddling a clip kink are meaningless
                    let x0 = den.denoise(&x, sigma).unwrap();
                    if x0.samples().iter().any(|v| (v.abs() - c.threshold()).abs() < 1e-3) {
                        continue;
                    }
                }
                let g = rg_gradient(den.as_ref(), &meas, &x, sigma).unwrap();
                let fd = fd_gradient(den.as_ref(), &meas, &x, sigma);
                let rel = g.sub(&fd).norm() / fd.norm().max(1e-300);
                assert!(rel < 1e-4, "{op:?}: relative error {rel:e}");
                probes += 1;
            }
        }
    }
}

#[test]
fn pigdm_equals_jacobian_times_exact_gaussian_correction() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mean = noise(LEN, 0.1, &mut rng);
    let prior = GaussianPriorDenoiser::with_pink_spectrum(mean, 0.05).unwrap();
    let lpf = BrickwallLpf::new(4000.0).unwrap();
    for _ in 0..20 {
        let truth = prior.sample(&mut rng);
        let meas = Measurement::new(lpf.apply(&truth).unwrap(), lpf.into(), 0.0).unwrap();
        let sigma = 10f64.powf(rng.random_range(-2.0..0.0));
        let x = truth.add(&noise(LEN, sigma, &mut rng));

        // x_t | y is Gaussian around the measurement-conditioned prior
        let cond_mean = prior.masked_posterior_mean(&meas.y, 0.0, |f| lpf.passes(f)).unwrap();
        let duration = meas.y.len() as f64 / f64::from(RATE);
        let cond_cov: Vec<f64> = prior
            .cov_spectrum()
            .iter()
            .enumerate()
            .map(|(k, &l)| if lpf.passes(k as f64 / duration) { 0.0 } else { l })
            .collect();
        let conditional = GaussianPriorDenoiser::new(cond_mean, cond_cov).unwrap();
        let correction = conditional
            .log_density_grad(&x, sigma)
            .unwrap()
            .sub(&prior.log_density_grad(&x, sigma).unwrap());
        let expect = prior.vjp(&x, sigma, &correction).unwrap();

        let got = pigdm_direction(&prior, &meas, &x, sigma).unwrap().scale(1.0 / (sigma * sigma));
        let rel = got.sub(&expect).norm() / expect.norm();
        assert!(rel < 1e-9, "relative error {rel:e}");
    }
}

#[test]
fn no_guidance_is_the_plain_score() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let prior = GaussianPriorDenoiser::pink(LEN, RATE, 0.05).unwrap();
    let schedule = NoiseSchedule::with_steps(50).unwrap();
    let op: DegradationOp = HardClip::new(0.2).unwrap().into();
    let truth = prior.sample(&mut rng);
    let meas = Measurement::new(op.apply(&truth).unwrap(), op, 0.0).unwrap();
    let x = truth.add(&noise(LEN, schedule.sigma(20), &mut rng));
    let got = conditional_score(&prior, &meas, &GuidanceConfig::default(), &schedule, 20, &x).unwrap();
    let plain = score(&prior, &x, schedule.sigma(20)).unwrap();
    assert_eq!(got.samples(), plain.samples());
}

fn ops() -> impl Strategy<Value = DegradationOp> {
    prop_oneof![
        (0.05f64..1.0).prop_map(|c| HardClip::new(c).unwrap().into()),
        (100.0f64..11000.0).prop_map(|f| BrickwallLpf::new(f).unwrap().into()),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn zero_residual_is_a_fixpoint(op in ops(), seed in any::<u64>(), i in 0usize..49, kind in prop_oneof![Just(GuidanceKind::Rg), Just(GuidanceKind::Pigdm)]) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = noise(64, 0.5, &mut rng);
        let schedule = NoiseSchedule::with_steps(50).unwrap();
        // the identity denoiser makes x its own prediction
        let meas = Measurement::new(op.apply(&x).unwrap(), op, 0.0).unwrap();
        let cfg = GuidanceConfig { kind, rho_prime: 3.0, delta_rho: true, ..GuidanceConfig::default() };
        let got = conditional_score(&IdentityDenoiser, &meas, &cfg, &schedule, i, &x).unwrap();
        prop_assert!(got.samples().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn rg_scale_is_non_decreasing_with_delta_rho(steps in 3usize..400, rho in 0.1f64..100.0, power in 1u8..=2, norm in 1e-3f64..1e3) {
        let schedule = NoiseSchedule::with_steps(steps).unwrap();
        let cfg = GuidanceConfig {
            kind: GuidanceKind::Rg,
            rho_prime: rho,
            delta_rho: true,
            rho_time_convention: RhoTimeConvention::NoiseLevel,
            grad_norm_power: power,
            ..GuidanceConfig::default()
        };
        let g = Signal::new(vec![norm / 4.0; 16], RATE).unwrap();
        let scales: Vec<f64> = (0..steps).map(|i| rg_scale(&cfg, &schedule, i, 16, &g)).collect();
        prop_assert_eq!(scales[0], 0.0);
        prop_assert!(scales.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn rg_scale_without_ramp_matches_formula(steps in 3usize..400, rho in 0.1f64..100.0, power in 1u8..=2, frac in 0.0f64..1.0, countdown in any::<bool>()) {
        let schedule = NoiseSchedule::with_steps(steps).unwrap();
        let i = ((steps - 1) as f64 * frac) as usize;
        let convention = if countdown { RhoTimeConvention::CountdownIndex } else { RhoTimeConvention::NoiseLevel };
        let cfg = GuidanceConfig { kind: GuidanceKind::Rg, rho_prime: rho, grad_norm_power: power, rho_time_convention: convention, ..GuidanceConfig::default() };
        let g = Signal::new(vec![0.5; 25], RATE).unwrap();
        let tau = if countdown { (steps - i) as f64 } else { schedule.sigma(i) };
        let expect = rho * 5.0 / (tau * 2.5f64.powi(i32::from(power)));
        let got = rg_scale(&cfg, &schedule, i, 25, &g);
        prop_assert!((got - expect).abs() <= 1e-12 * expect);
    }

    #[test]
    fn pigdm_is_band_replacement_for_lpf(fc in 100.0f64..11000.0, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let lpf = BrickwallLpf::new(fc).unwrap();
        let truth = noise(100, 0.5, &mut rng);
        let x0 = noise(100, 0.5, &mut rng);
        let meas = Measurement::new(lpf.apply(&truth).unwrap(), lpf.into(), 0.0).unwrap();
        let d = pigdm_direction(&IdentityDenoiser, &meas, &x0, 0.3).unwrap();
        let replaced = lpf.apply(&lpf.dc_project(&x0, &meas.y).unwrap().sub(&x0)).unwrap();
        prop_assert!(d.sub(&replaced).norm() <= 1e-9 * (1.0 + replaced.norm()));
    }
}
