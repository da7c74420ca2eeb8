use std::f64::consts::PI;

use dps_core::signal::stft_frame_count;
use dps_core::{irfft, rfft, stft, Signal};
use num_complex::Complex64;
use proptest::prelude::*;

/// Direct O(L^2) evaluation of the half-spectrum DFT.
fn direct_dft(x: &[f64]) -> Vec<Complex64> {
    let n = x.len();
    (0..=n / 2)
        .map(|k| {
            x.iter()
                .enumerate()
                .map(|(j, &v)| Complex64::from_polar(v, -2.0 * PI * (k * j) as f64 / n as f64))
                .sum()
        })
        .collect()
}

fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(p, q)| (p - q).powi(2)).sum();
    let den: f64 = b.iter().map(|q| q * q).sum();
    (num / den.max(f64::MIN_POSITIVE)).sqrt()
}

fn samples(len: impl Into<prop::collection::SizeRange>) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0f64..1.0, len)
}

#[test]
fn matches_direct_dft_up_to_64() {
    for n in 1..=64usize {
        let x: Vec<f64> = (0..n).map(|j| ((j * 7 + 3) % 11) as f64 / 11.0 - 0.4).collect();
        let fast = rfft(&Signal::new(x.clone(), 8000).unwrap());
        let slow = direct_dft(&x);
        assert_eq!(fast.bins.len(), slow.len());
        for (a, b) in fast.bins.iter().zip(&slow) {
            assert!((a - b).norm() < 1e-12, "n={n}: {a} vs {b}");
        }
    }
}

#[test]
fn round_trip_at_1024() {
    let x: Vec<f64> = (0..1024).map(|j| ((j as f64) * 0.37).sin() * 0.5 + ((j * j) % 17) as f64 / 40.0).collect();
    let s = Signal::new(x.clone(), 22050).unwrap();
    let back = irfft(&rfft(&s), 1024).unwrap();
    assert!(rel_err(back.samples(), &x) < 1e-9);
}

proptest! {
    #[test]
    fn fft_round_trip(x in samples(1..600usize)) {
        prop_assume!(x.iter().any(|v| *v != 0.0));
        let s = Signal::new(x.clone(), 16000).unwrap();
        let back = irfft(&rfft(&s), x.len()).unwrap();
        prop_assert!(rel_err(back.samples(), &x) < 1e-9);
    }

    #[test]
    fn fft_is_linear(pair in (1..300usize).prop_flat_map(|n| (samples(n), samples(n))), a in -3.0f64..3.0, b in -3.0f64..3.0) {
        let (x, y) = pair;
        let combo: Vec<f64> = x.iter().zip(&y).map(|(p, q)| a * p + b * q).collect();
        let fx = rfft(&Signal::new(x, 8000).unwrap());
        let fy = rfft(&Signal::new(y, 8000).unwrap());
        let fc = rfft(&Signal::new(combo, 8000).unwrap());
        let expect: Vec<Complex64> = fx.bins.iter().zip(&fy.bins).map(|(p, q)| p * a + q * b).collect();
        let num: f64 = fc.bins.iter().zip(&expect).map(|(p, q)| (p - q).norm_sqr()).sum();
        let den: f64 = expect.iter().map(|q| q.norm_sqr()).sum();
        prop_assert!(num.sqrt() <= 1e-9 * den.sqrt().max(1e-12));
    }

    #[test]
    fn parseval(x in samples(1..600usize)) {
        prop_assume!(x.iter().any(|v| *v != 0.0));
        let n = x.len();
        let spec = rfft(&Signal::new(x.clone(), 8000).unwrap());
        // interior bins stand in for their conjugate mirror
        let full: f64 = spec.bins.iter().enumerate().map(|(k, b)| {
            let twice = k != 0 && !(n % 2 == 0 && k == n / 2);
            b.norm_sqr() * if twice { 2.0 } else { 1.0 }
        }).sum::<f64>() / n as f64;
        let time: f64 = x.iter().map(|v| v * v).sum();
        prop_assert!((full - time).abs() <= 1e-9 * time);
    }

    #[test]
    fn stft_frames_follow_ceiling_rule(len in 1..5000usize, window in 1..1100usize, hop_frac in 0.01f64..1.0) {
        let hop = ((window as f64 * hop_frac) as usize).max(1);
        prop_assume!(window <= len);
        let s = Signal::new(vec![0.1; len], 22050).unwrap();
        let frames = stft(&s, window, hop).unwrap();
        let expect = (len - window).div_ceil(hop) + 1;
        prop_assert_eq!(frames.len(), expect);
        prop_assert_eq!(stft_frame_count(len, window, hop), expect);
        for f in &frames {
            prop_assert_eq!(f.bins.len(), window / 2 + 1);
        }
    }
}
