//! Objective quality metrics: SI-SDR, SDR and log-spectral distance.

use crate::error::{Error, Result};
use crate::signal::{stft, Signal};

/// Ratios whose distortion term vanishes are reported as this many dB.
pub const DB_CAP: f64 = 100.0;

/// Default LSD analysis window (samples).
pub const LSD_WINDOW: usize = 1024;
/// Default LSD hop (samples).
pub const LSD_HOP: usize = 256;

const LSD_EPS: f64 = 1e-10;

fn check_pair(reference: &Signal, estimate: &Signal) -> Result<f64> {
    reference.check_same_len(estimate)?;
    let energy = reference.norm_sq();
    if energy == 0.0 {
        return Err(Error::InvalidSignal("reference signal is silent".into()));
    }
    Ok(energy)
}

fn ratio_db(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        return DB_CAP;
    }
    if num == 0.0 {
        return -DB_CAP;
    }
    (10.0 * (num / den).log10()).min(DB_CAP)
}

/// Scale-invariant SDR in dB.
pub fn si_sdr(reference: &Signal, estimate: &Signal) -> Result<f64> {
    let energy = check_pair(reference, estimate)?;
    let alpha = estimate.dot(reference) / energy;
    let target = reference.scale(alpha);
    let noise = target.sub(estimate).norm_sq();
    Ok(ratio_db(target.norm_sq(), noise))
}

/// Plain SDR in dB (no gain fitting).
pub fn sdr(reference: &Signal, estimate: &Signal) -> Result<f64> {
    let energy = check_pair(reference, estimate)?;
    Ok(ratio_db(energy, reference.sub(estimate).norm_sq()))
}

/// Log-spectral distance (dB) over Hann-windowed STFT power spectra.
///
/// Signals shorter than `window` are analysed with a single frame spanning
/// the whole signal.
pub fn lsd(reference: &Signal, estimate: &Signal, window: usize, hop: usize) -> Result<f64> {
    reference.check_same_len(estimate)?;
    let window = window.min(reference.len());
    let hop = hop.clamp(1, window);
    let a = stft(reference, window, hop)?;
    let b = stft(estimate, window, hop)?;
    let total: f64 = a
        .iter()
        .zip(&b)
        .map(|(fa, fb)| {
            let mean_sq = fa
                .bins
                .iter()
                .zip(&fb.bins)
                .map(|(x, y)| {
                    let d = 10.0 * ((x.norm_sqr() + LSD_EPS) / (y.norm_sqr() + LSD_EPS)).log10();
                    d * d
                })
                .sum::<f64>()
                / fa.bins.len() as f64;
            mean_sq.sqrt()
        })
        .sum();
    Ok(total / a.len() as f64)
}

/// One evaluated (reference, estimate) pair.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricReport {
    pub file: String,
    pub task: String,
    pub severity: String,
    pub method: String,
    pub si_sdr_db: f64,
    pub sdr_db: f64,
    pub lsd: f64,
}

impl MetricReport {
    pub fn evaluate(
        reference: &Signal,
        estimate: &Signal,
        file: impl Into<String>,
        task: impl Into<String>,
        severity: impl Into<String>,
        method: impl Into<String>,
    ) -> Result<Self> {
        Ok(Self {
            file: file.into(),
            task: task.into(),
            severity: severity.into(),
            method: method.into(),
            si_sdr_db: si_sdr(reference, estimate)?,
            sdr_db: sdr(reference, estimate)?,
            lsd: lsd(reference, estimate, LSD_WINDOW, LSD_HOP)?,
        })
    }

    pub const CSV_HEADER: &'static str = "file,task,severity,method,si_sdr,sdr,lsd";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{:.6},{:.6},{:.6}",
            self.file, self.task, self.severity, self.method, self.si_sdr_db, self.sdr_db, self.lsd
        )
    }
}
