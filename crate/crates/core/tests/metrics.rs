use std::f64::consts::PI;

use dps_core::metrics::{LSD_HOP, LSD_WINDOW};
use dps_core::{lsd, si_sdr, Signal};
use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

const RATE: u32 = 22050;

fn sig(v: Vec<f64>) -> Signal {
    Signal::new(v, RATE).unwrap()
}

#[test]
fn orthogonal_noise_at_one_tenth_power_is_ten_db() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let x = sig((0..4096).map(|_| rng.sample(StandardNormal)).collect());
    let raw = sig((0..4096).map(|_| rng.sample(StandardNormal)).collect());
    // Gram-Schmidt against the reference, then rescale
    let orth = raw.axpy(-raw.dot(&x) / x.norm_sq(), &x);
    let noise = orth.scale((x.norm_sq() / 10.0).sqrt() / orth.norm());
    let got = si_sdr(&x, &x.add(&noise)).unwrap();
    assert!((got - 10.0).abs() < 1e-9, "{got}");
}

/// Sum of one cosine per interior bin with the given amplitudes and phases.
fn cosines(amps: &[f64], phases: &[f64], len: usize) -> Vec<f64> {
    let mut out = vec![0.0; len];
    for k in 1..len / 2 {
        for (n, v) in out.iter_mut().enumerate() {
            *v += amps[k] * (2.0 * PI * (k * n) as f64 / len as f64 + phases[k]).cos();
        }
    }
    out
}

/// Hann-windowed half spectrum of [`cosines`], from the closed-form DFT
/// coefficients and the window's three-tap kernel.
fn windowed_bins(amps: &[f64], phases: &[f64], len: usize) -> Vec<Complex64> {
    let half = len / 2;
    let coef = |j: isize| -> Complex64 {
        let j = j.rem_euclid(len as isize) as usize;
        let (k, conj) = if j <= half { (j, false) } else { (len - j, true) };
        if k == 0 || k == half {
            return Complex64::new(0.0, 0.0);
        }
        let c = Complex64::from_polar(amps[k] * len as f64 / 2.0, phases[k]);
        if conj { c.conj() } else { c }
    };
    (0..=half as isize)
        .map(|k| coef(k) * 0.5 - coef(k - 1) * 0.25 - coef(k + 1) * 0.25)
        .collect()
}

#[test]
fn band_limited_estimate_matches_closed_form() {
    let len = LSD_WINDOW;
    let cut = 200;
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let phases: Vec<f64> = (0..len / 2).map(|_| rng.random_range(0.0..2.0 * PI)).collect();
    let full = vec![1.0; len / 2];
    let limited: Vec<f64> = (0..len / 2).map(|k| if k < cut { 1.0 } else { 0.1 }).collect();
    let got = lsd(&sig(cosines(&full, &phases, len)), &sig(cosines(&limited, &phases, len)), len, LSD_HOP).unwrap();

    let a = windowed_bins(&full, &phases, len);
    let b = windowed_bins(&limited, &phases, len);
    let terms: Vec<f64> = a
        .iter()
        .zip(&b)
        .map(|(x, y)| 10.0 * ((x.norm_sqr() + 1e-10) / (y.norm_sqr() + 1e-10)).log10())
        .collect();
    let expect = (terms.iter().map(|d| d * d).sum::<f64>() / terms.len() as f64).sqrt();
    assert!((got - expect).abs() < 1e-9, "{got} vs {expect}");

    // away from the cut the two bands sit at exactly 0 and 20 dB
    assert!(terms[2..cut - 1].iter().all(|d| d.abs() < 1e-9));
    assert!(terms[cut + 1..].iter().all(|d| (d - 20.0).abs() < 1e-9));
}

fn pair() -> impl Strategy<Value = (Signal, Signal)> {
    (1100usize..3000).prop_flat_map(|n| {
        (prop::collection::vec(-1.0f64..1.0, n), prop::collection::vec(-1.0f64..1.0, n))
            .prop_map(|(a, b)| (sig(a), sig(b)))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn si_sdr_is_scale_invariant((x, y) in pair(), alpha in 1e-3f64..1e3) {
        let a = si_sdr(&x, &y).unwrap();
        let b = si_sdr(&x, &y.scale(alpha)).unwrap();
        prop_assert!((a - b).abs() < 1e-9);
        prop_assert!(a <= 100.0);
    }

    #[test]
    fn lsd_is_symmetric_and_non_negative((x, y) in pair()) {
        let ab = lsd(&x, &y, LSD_WINDOW, LSD_HOP).unwrap();
        let ba = lsd(&y, &x, LSD_WINDOW, LSD_HOP).unwrap();
        prop_assert!(ab >= 0.0);
        prop_assert!((ab - ba).abs() <= 1e-12 * (1.0 + ab));
    }
}
