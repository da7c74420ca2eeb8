//! Diffusion posterior sampling for audio inverse problems.
//!
//! The crate restores clipped or low-passed mono audio by running a
//! reverse diffusion sampler whose score is steered by a likelihood term.
//! Four mechanisms compose freely through [`SamplerConfig`]:
//!
//! * reconstruction guidance with an optional linear `delta_rho` ramp,
//! * pseudo-inverse guidance (`h+ = A`),
//! * data consistency (measurement substitution into the prediction),
//! * windowed RePaint resampling.
//!
//! Two reference denoisers are provided: an exact Gaussian-prior posterior
//! mean, useful as an analytic oracle, and a per-band Wiener shrinkage
//! denoiser trained from example audio.

pub mod degradation;
pub mod denoiser;
pub mod error;
pub mod guidance;
pub mod harness;
pub mod metrics;
pub mod sampler;
pub mod schedule;
pub mod signal;
pub mod wav;

pub use degradation::{
    clip_for_sdr, degrade, BrickwallLpf, Degradation, DegradationOp, HardClip, Measurement,
};
pub use denoiser::{
    score, train_shrinkage, BandSpec, Denoiser, GaussianPriorDenoiser, IdentityDenoiser,
    ShrinkageConfig, ShrinkageDenoiser,
};
pub use error::{Error, Result};
pub use guidance::{GuidanceConfig, GuidanceKind, GuidanceResult, RhoTimeConvention};
pub use metrics::{lsd, sdr, si_sdr, MetricReport};
pub use sampler::{restore, DcOrder, RepaintConfig, SamplerConfig, Trace};
pub use schedule::{NoiseSchedule, Progress, ScheduleParams};
pub use signal::{irfft, rfft, stft, Signal, Spectrum};
pub use wav::{load_wav, save_wav, WavEncoding};
