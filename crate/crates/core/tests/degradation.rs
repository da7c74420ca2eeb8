use std::f64::consts::PI;

use dps_core::{
    clip_for_sdr, degrade, BrickwallLpf, Degradation, DegradationOp, HardClip, Signal,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

const RATE: u32 = 22050;

fn sig(v: Vec<f64>) -> Signal {
    Signal::new(v, RATE).unwrap()
}

fn white(len: usize, seed: u64) -> Signal {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sig((0..len).map(|_| rng.sample(StandardNormal)).collect())
}

fn sdr_direct(x: &[f64], y: &[f64]) -> f64 {
    let num: f64 = x.iter().map(|v| v * v).sum();
    let den: f64 = x.iter().zip(y).map(|(a, b)| (a - b).powi(2)).sum();
    10.0 * (num / den).log10()
}

#[test]
fn clip_calibration_matches_grid_search_on_a_sine() {
    let x: Vec<f64> = (0..2205).map(|n| (2.0 * PI * 100.0 * n as f64 / f64::from(RATE)).sin()).collect();
    let (op, y) = clip_for_sdr(&sig(x.clone()), 10.0).unwrap();
    let got = sdr_direct(&x, y.samples());
    assert!((got - 10.0).abs() <= 0.01, "{got}");

    let (best_c, best_sdr) = (1..10_000)
        .map(|k| {
            let c = k as f64 * 1e-4;
            let clipped: Vec<f64> = x.iter().map(|v| v.clamp(-c, c)).collect();
            (c, sdr_direct(&x, &clipped))
        })
        .min_by(|a, b| (a.1 - 10.0).abs().total_cmp(&(b.1 - 10.0).abs()))
        .unwrap();
    assert!((got - best_sdr).abs() <= 0.01, "calibrated {got} dB vs grid {best_sdr} dB");
    assert!((op.threshold() - best_c).abs() < 2e-3, "c {} vs grid {best_c}", op.threshold());
}

#[test]
fn lpf_keeps_expected_fraction_of_white_noise() {
    let x = white(1 << 17, 1);
    let y = BrickwallLpf::new(5000.0).unwrap().apply(&x).unwrap();
    let ratio = y.norm_sq() / x.norm_sq();
    let expect = 5000.0 / 11025.0;
    assert!((ratio / expect - 1.0).abs() < 0.02, "{ratio} vs {expect}");
}

#[test]
fn measurement_noise_has_requested_std() {
    let x = white(100_000, 2).scale(0.3);
    let op: DegradationOp = HardClip::new(0.4).unwrap().into();
    let m = degrade(op, &x, 0.01, 9).unwrap();
    let e = m.y.sub(&op.apply(&x).unwrap());
    let mean = e.samples().iter().sum::<f64>() / e.len() as f64;
    let std = (e.samples().iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (e.len() - 1) as f64).sqrt();
    assert!((0.0099..=0.0101).contains(&std), "{std}");
}

#[test]
fn tones_in_pass_and_stop_bands() {
    let tone = |f: f64| sig((0..4410).map(|n| (2.0 * PI * f * n as f64 / f64::from(RATE)).sin()).collect());
    let pass = tone(1000.0);
    let out = BrickwallLpf::new(3000.0).unwrap().apply(&pass).unwrap();
    assert!(out.sub(&pass).norm() / pass.norm() < 1e-9);
    let stop = tone(7000.0);
    let out = BrickwallLpf::new(5000.0).unwrap().apply(&stop).unwrap();
    assert!(out.norm_sq() / stop.norm_sq() < 1e-12);
}

fn ops() -> impl Strategy<Value = DegradationOp> {
    prop_oneof![
        (0.01f64..2.0).prop_map(|c| HardClip::new(c).unwrap().into()),
        (10.0f64..11000.0).prop_map(|f| BrickwallLpf::new(f).unwrap().into()),
    ]
}

fn signal_pair() -> impl Strategy<Value = (Signal, Signal)> {
    (2usize..400).prop_flat_map(|n| {
        (prop::collection::vec(-2.0f64..2.0, n), prop::collection::vec(-2.0f64..2.0, n))
            .prop_map(|(a, b)| (sig(a), sig(b)))
    })
}

proptest! {
    #[test]
    fn h_pinv_h_is_h(op in ops(), (x, _) in signal_pair()) {
        let hx = op.apply(&x).unwrap();
        let round = op.apply(&op.pseudo_inverse(&hx).unwrap()).unwrap();
        prop_assert!(round.sub(&hx).norm() <= 1e-9 * (1.0 + hx.norm()));
    }

    #[test]
    fn operators_are_idempotent(op in ops(), (x, _) in signal_pair()) {
        let once = op.apply(&x).unwrap();
        let twice = op.apply(&once).unwrap();
        prop_assert!(twice.sub(&once).norm() <= 1e-9 * (1.0 + once.norm()));
    }

    #[test]
    fn clip_is_a_clamp_and_odd(c in 0.01f64..2.0, (x, _) in signal_pair()) {
        let op = HardClip::new(c).unwrap();
        let y = op.apply(&x).unwrap();
        for (a, b) in x.samples().iter().zip(y.samples()) {
            prop_assert_eq!(*b, a.clamp(-c, c));
        }
        let neg = op.apply(&x.scale(-1.0)).unwrap();
        let flipped = y.scale(-1.0);
        prop_assert_eq!(neg.samples(), flipped.samples());
    }

    #[test]
    fn clip_is_non_expansive(c in 0.01f64..2.0, (x, z) in signal_pair()) {
        let op = HardClip::new(c).unwrap();
        let gap = op.apply(&x).unwrap().sub(&op.apply(&z).unwrap()).norm();
        prop_assert!(gap <= x.sub(&z).norm() + 1e-15);
    }

    #[test]
    fn lpf_adjoint_identity(fc in 10.0f64..11000.0, (u, v) in signal_pair()) {
        let op = BrickwallLpf::new(fc).unwrap();
        let lhs = op.apply(&u).unwrap().dot(&v);
        let rhs = u.dot(&op.adjoint_at(&u, &v).unwrap());
        prop_assert!((lhs - rhs).abs() <= 1e-9 * (1.0 + u.norm() * v.norm()));
    }

    #[test]
    fn lpf_dc_projection_is_consistent(fc in 10.0f64..11000.0, (x, xhat) in signal_pair()) {
        let op = BrickwallLpf::new(fc).unwrap();
        let y = op.apply(&x).unwrap();
        let out = op.dc_project(&xhat, &y).unwrap();
        let back = op.apply(&out).unwrap();
        prop_assert!(back.sub(&y).norm() <= 1e-9 * (1.0 + y.norm()));
    }

    #[test]
    fn clip_dc_projection_keeps_reliable_samples(c in 0.01f64..2.0, (x, xhat) in signal_pair()) {
        let op = HardClip::new(c).unwrap();
        let y = op.apply(&x).unwrap();
        let out = op.dc_project(&xhat, &y).unwrap();
        for ((&o, &yy), &h) in out.samples().iter().zip(y.samples()).zip(xhat.samples()) {
            if yy.abs() < c {
                prop_assert_eq!(o, yy);
            } else {
                prop_assert_eq!(o, h);
            }
        }
    }

    #[test]
    fn clip_adjoint_masks_saturated_samples(c in 0.01f64..2.0, (x, v) in signal_pair()) {
        let op = HardClip::new(c).unwrap();
        let a = op.adjoint_at(&x, &v).unwrap();
        for ((&xa, &va), &out) in x.samples().iter().zip(v.samples()).zip(a.samples()) {
            prop_assert_eq!(out, if xa.abs() < c { va } else { 0.0 });
        }
    }

    #[test]
    fn degrade_is_seeded(seed in any::<u64>(), sigma in 0.0f64..0.1) {
        let x = white(257, 4);
        let op: DegradationOp = BrickwallLpf::new(4000.0).unwrap().into();
        let a = degrade(op, &x, sigma, seed).unwrap();
        let b = degrade(op, &x, sigma, seed).unwrap();
        prop_assert_eq!(a.y.samples(), b.y.samples());
        if sigma == 0.0 {
            let clean = op.apply(&x).unwrap();
            prop_assert_eq!(a.y.samples(), clean.samples());
        }
    }
}

#[test]
fn noise_draws_differ_across_seeds() {
    let x = white(64, 5);
    let op: DegradationOp = HardClip::new(0.5).unwrap().into();
    let a = degrade(op, &x, 0.05, 1).unwrap();
    let b = degrade(op, &x, 0.05, 2).unwrap();
    assert_ne!(a.y.samples(), b.y.samples());
}
