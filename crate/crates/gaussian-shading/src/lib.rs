//! Gaussian-shading watermarks for latent diffusion pipelines.
//!
//! The watermark lives in the initial Gaussian noise: a message is replicated
//! to the latent capacity, randomized with ChaCha20 so every bit is a fair
//! coin, and mapped to standard-normal coordinates through the normal
//! quantile function. Because the encrypted bits are uniform, the embedded
//! latent is exactly N(0,1)-distributed and generation quality is untouched.
//! Detection inverts the map, measures the Hamming distance to a re-derived
//! reference ciphertext, and calibrates thresholds and p-values on the exact
//! Binomial(n, 1/2) null distribution.
//!
//! The crate also ships a deterministic toy DDIM sampler/inverse with
//! pluggable denoisers, degradation channels that emulate lossy decode
//! pipelines at the bit or latent level, and a config-driven benchmark
//! harness for detection-rate curves, ROC/AUC, channel profile tables, and
//! key-reuse uniqueness experiments. See the `examples/` directory for one
//! runnable example per capability, and the `gshade` binary for the CLI.

pub mod bench;
pub mod cipher;
pub mod cli;
pub mod codec;
pub mod detector;
pub mod diffusion;
pub mod error;
pub mod files;
pub mod sampler;

pub use cipher::{decrypt_bits, encrypt_bits, keygen, Ciphertext, KeyMaterial};
pub use codec::{aggregate, expand, BitString, CapacityLayout, WatermarkMessage};
pub use detector::{
    binomial_cdf, detect, detect_bits, extract, extract_bits, extract_scored, p_value,
    threshold_for_tfpr, DetectionReport, ExtractionResult,
};
pub use diffusion::{
    apply_channel_bits, apply_channel_latent, ddim_inverse, ddim_sample, ChannelKind, ChannelSpec,
    Denoiser, DiffusionSchedule, LinearDenoiser, SamplerMode, SchedulePolicy, ScheduleParams,
    ZeroDenoiser,
};
pub use error::{Error, Result};
pub use files::{KeyFile, LatentFile, LatentManifest};
pub use sampler::{
    normal_cdf, normal_ppf, reverse_sample, sample_latent, LatentVector, UniformSource,
    WindowConfig,
};
