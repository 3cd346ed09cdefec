//! Config-driven experiment harness: embeds, degrades, detects, and extracts
//! over many trials, then aggregates detection-rate curves, ROC/AUC, channel
//! profile tables, and the key/nonce uniqueness experiment.
//!
//! Every trial derives its random streams from (master seed, trial id), so
//! runs are reproducible and trial order is irrelevant.

use std::collections::HashSet;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::cipher::{encrypt_bits, keygen, Ciphertext, KeyMaterial, NONCE_LEN};
use crate::codec::{aggregate, expand, WatermarkMessage};
use crate::detector::{p_value, threshold_for_tfpr};
use crate::diffusion::{
    apply_channel_bits, apply_channel_latent, ddim_inverse, ddim_sample, ChannelKind, ChannelSpec,
    Denoiser, DiffusionSchedule, LinearDenoiser, SamplerMode, SchedulePolicy, ScheduleParams,
    ZeroDenoiser,
};
use crate::error::{Error, Result};
use crate::sampler::{reverse_sample, sample_latent, LatentVector, UniformSource, WindowConfig};

/// Stream id reserved for config-level derivations (base key, fixed uniform
/// seed); trial streams use the trial index, clean-cohort streams the same
/// index with the top bit set.
const CONFIG_STREAM: u64 = u64::MAX;
const CLEAN_STREAM_BASE: u64 = 1 << 63;

fn stream_rng(seed: u64, stream: u64) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// How per-trial key material is derived.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KeyPolicy {
    /// One key and nonce shared by every trial.
    #[default]
    Fixed,
    /// Shared key, fresh nonce per trial.
    PerSampleNonce,
    /// Fresh key and nonce per trial.
    PerSampleKey,
}

/// How the per-dimension uniform stream is seeded.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UniformPolicy {
    Fixed,
    PerSample,
}

/// Watermark message given either as text or as hex bytes (optionally
/// truncated to a bit count).
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MessageSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hex: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bits: Option<usize>,
}

impl MessageSpec {
    pub fn text(text: &str) -> Self {
        Self {
            text: Some(text.to_string()),
            ..Default::default()
        }
    }

    pub fn build(&self) -> Result<WatermarkMessage> {
        let message = match (&self.text, &self.hex) {
            (Some(t), None) => WatermarkMessage::from_text(t)?,
            (None, Some(h)) => {
                let bytes = hex::decode(h).map_err(|e| Error::InvalidHex {
                    field: "message.hex",
                    reason: e.to_string(),
                })?;
                WatermarkMessage::from_bytes(&bytes)?
            }
            _ => {
                return Err(Error::InvalidConfig(
                    "message needs exactly one of `text` or `hex`".into(),
                ))
            }
        };
        match self.bits {
            None => Ok(message),
            Some(bits) if bits >= 1 && bits <= message.m_bits() => {
                let mut payload = message.payload().clone();
                payload.truncate(bits);
                WatermarkMessage::from_bits(payload)
            }
            Some(bits) => Err(Error::InvalidConfig(format!(
                "bits = {bits} outside 1..={}",
                message.m_bits()
            ))),
        }
    }
}

/// Denoiser selection for configs and the CLI.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DenoiserSpec {
    Zero,
    Linear { coeff: f64 },
}

impl DenoiserSpec {
    pub fn build(&self) -> Box<dyn Denoiser> {
        match self {
            Self::Zero => Box::new(ZeroDenoiser),
            Self::Linear { coeff } => Box::new(LinearDenoiser::constant(*coeff)),
        }
    }
}

impl std::str::FromStr for DenoiserSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.split_once(':') {
            None if s == "zero" => Ok(Self::Zero),
            Some(("linear", c)) => Ok(Self::Linear {
                coeff: c.parse::<f64>().map_err(|e| {
                    Error::InvalidConfig(format!("bad denoiser coefficient '{c}': {e}"))
                })?,
            }),
            _ => Err(Error::InvalidConfig(format!(
                "unknown denoiser '{s}' (expected zero | linear:COEFF)"
            ))),
        }
    }
}

/// DDIM stage of a benchmark pipeline.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiffusionConfig {
    #[serde(default = "default_policy")]
    pub policy: SchedulePolicy,
    /// Schedule length T.
    #[serde(default = "default_train_steps")]
    pub steps: usize,
    #[serde(default = "ScheduleParams::default")]
    pub params: ScheduleParams,
    #[serde(default = "default_sampling_steps")]
    pub sampling_steps: usize,
    #[serde(default = "default_denoiser")]
    pub denoiser: DenoiserSpec,
    #[serde(default = "default_mode")]
    pub mode: SamplerMode,
}

fn default_policy() -> SchedulePolicy {
    SchedulePolicy::Linear
}
fn default_train_steps() -> usize {
    1000
}
fn default_sampling_steps() -> usize {
    500
}
fn default_denoiser() -> DenoiserSpec {
    DenoiserSpec::Zero
}
fn default_mode() -> SamplerMode {
    SamplerMode::Standard
}

impl Default for DiffusionConfig {
    fn default() -> Self {
        Self {
            policy: default_policy(),
            steps: default_train_steps(),
            params: ScheduleParams::default(),
            sampling_steps: default_sampling_steps(),
            denoiser: default_denoiser(),
            mode: default_mode(),
        }
    }
}

/// Which artifacts a bench run writes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputKind {
    Records,
    Curve,
    Roc,
    Profiles,
    Uniqueness,
}

fn default_outputs() -> Vec<OutputKind> {
    vec![OutputKind::Records, OutputKind::Curve, OutputKind::Roc]
}

fn default_n_dims() -> usize {
    500
}
fn default_window() -> u8 {
    1
}
fn default_tfpr_grid() -> Vec<f64> {
    vec![0.01, 0.05]
}
fn default_folds() -> usize {
    6
}
fn default_trials() -> usize {
    200
}

/// Full experiment description; serialized as JSON for the `bench` command.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchConfig {
    #[serde(default = "default_trials")]
    pub trials: usize,
    pub message: MessageSpec,
    #[serde(default = "default_n_dims")]
    pub n_dims: usize,
    #[serde(default = "default_window")]
    pub window_l: u8,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub channel: Option<ChannelSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diffusion: Option<DiffusionConfig>,
    #[serde(default = "default_tfpr_grid")]
    pub tfpr_grid: Vec<f64>,
    #[serde(default)]
    pub key_policy: KeyPolicy,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub uniform_policy: Option<UniformPolicy>,
    #[serde(default = "default_folds")]
    pub folds: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_outputs")]
    pub outputs: Vec<OutputKind>,
}

impl BenchConfig {
    /// Defaults: 500 dims, window 1, no channel or diffusion stage, TFPR
    /// grid {1%, 5%}, fixed key policy, 6 folds, seed 0.
    pub fn new(message: MessageSpec) -> Self {
        Self {
            trials: default_trials(),
            message,
            n_dims: default_n_dims(),
            window_l: default_window(),
            channel: None,
            diffusion: None,
            tfpr_grid: default_tfpr_grid(),
            key_policy: KeyPolicy::default(),
            uniform_policy: None,
            folds: default_folds(),
            seed: 0,
            outputs: default_outputs(),
        }
    }

    pub fn from_json(bytes: &[u8]) -> Result<Self> {
        let config: Self = serde_json::from_slice(bytes)?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials < 1 {
            return Err(Error::InvalidConfig("trials must be >= 1".into()));
        }
        if self.folds < 1 {
            return Err(Error::InvalidConfig("folds must be >= 1".into()));
        }
        if self.tfpr_grid.is_empty() {
            return Err(Error::InvalidConfig("tfpr_grid must not be empty".into()));
        }
        for pair in self.tfpr_grid.windows(2) {
            if pair[0] >= pair[1] {
                return Err(Error::InvalidConfig(
                    "tfpr_grid must be strictly ascending".into(),
                ));
            }
        }
        for &t in &self.tfpr_grid {
            if !(t > 0.0 && t < 1.0) {
                return Err(Error::InvalidConfig(format!(
                    "tfpr {t} outside the open interval (0, 1)"
                )));
            }
        }
        self.message.build()?;
        WindowConfig::new(self.window_l)?;
        if let Some(channel) = &self.channel {
            channel.validate()?;
        }
        Ok(())
    }

    /// Uniform-seed policy: explicit setting, else fixed exactly when the key
    /// policy is fixed.
    pub fn effective_uniform_policy(&self) -> UniformPolicy {
        self.uniform_policy.unwrap_or(match self.key_policy {
            KeyPolicy::Fixed => UniformPolicy::Fixed,
            _ => UniformPolicy::PerSample,
        })
    }
}

/// Everything one trial produces.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub n_bits: u64,
    pub hamming: u64,
    pub p_value: f64,
    /// Aligned with the config's `tfpr_grid`.
    pub detected: Vec<bool>,
    pub bit_accuracy: f64,
    pub exact_match: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub roundtrip_mse: Option<f64>,
    /// SHA-256 of the embedded latent body, for uniqueness accounting.
    pub fingerprint: String,
}

/// SHA-256 over the little-endian byte image of the latent.
pub fn latent_fingerprint(latent: &LatentVector) -> String {
    let mut hasher = Sha256::new();
    for v in latent.values() {
        hasher.update(v.to_le_bytes());
    }
    hex::encode(hasher.finalize())
}

struct TrialContext {
    message: WatermarkMessage,
    window: WindowConfig,
    n_bits: usize,
    base_key: KeyMaterial,
    fixed_uniform_seed: u64,
    thresholds: Vec<u64>,
    schedule: Option<(DiffusionSchedule, Box<dyn Denoiser>, SamplerMode, usize)>,
}

impl TrialContext {
    fn build(config: &BenchConfig) -> Result<Self> {
        config.validate()?;
        let message = config.message.build()?;
        let window = WindowConfig::new(config.window_l)?;
        let n_bits = config.n_dims * window.bits_per_dim();
        // config-level material comes from a reserved stream
        let mut rng = stream_rng(config.seed, CONFIG_STREAM);
        let base_key = keygen(Some(rng.random()))?;
        let fixed_uniform_seed = rng.random();
        let thresholds = config
            .tfpr_grid
            .iter()
            .map(|&t| threshold_for_tfpr(n_bits as u64, t))
            .collect::<Result<Vec<_>>>()?;
        let schedule = match &config.diffusion {
            Some(d) => Some((
                DiffusionSchedule::build(d.policy, d.steps, d.params)?,
                d.denoiser.build(),
                d.mode,
                d.sampling_steps,
            )),
            None => None,
        };
        Ok(Self {
            message,
            window,
            n_bits,
            base_key,
            fixed_uniform_seed,
            thresholds,
            schedule,
        })
    }

    fn trial_key(&self, config: &BenchConfig, rng: &mut ChaCha12Rng) -> Result<KeyMaterial> {
        Ok(match config.key_policy {
            KeyPolicy::Fixed => self.base_key.clone(),
            KeyPolicy::PerSampleNonce => {
                let mut nonce = [0u8; NONCE_LEN];
                rng.fill(&mut nonce);
                self.base_key.with_nonce(nonce)
            }
            KeyPolicy::PerSampleKey => keygen(Some(rng.random()))?,
        })
    }

    fn score(
        &self,
        trial: usize,
        key: &KeyMaterial,
        recovered: &Ciphertext,
        roundtrip_mse: Option<f64>,
        fingerprint: String,
    ) -> Result<TrialRecord> {
        let reference = encrypt_bits(&expand(&self.message, self.n_bits)?, key);
        let hamming = recovered.bits.hamming(&reference.bits)?;
        let detected = self.thresholds.iter().map(|&t| hamming <= t).collect();
        let plain = crate::cipher::decrypt_bits(recovered, key);
        let extracted = aggregate(&plain, self.message.m_bits())?;
        Ok(TrialRecord {
            trial,
            n_bits: self.n_bits as u64,
            hamming,
            p_value: p_value(hamming, self.n_bits as u64)?,
            detected,
            bit_accuracy: 1.0 - hamming as f64 / self.n_bits as f64,
            exact_match: &extracted == self.message.payload(),
            roundtrip_mse,
            fingerprint,
        })
    }

    fn run_watermarked(&self, config: &BenchConfig, trial: usize) -> Result<TrialRecord> {
        let mut rng = stream_rng(config.seed, trial as u64);
        let key = self.trial_key(config, &mut rng)?;
        let uniform_seed = match self.effective_uniform(config) {
            UniformPolicy::Fixed => self.fixed_uniform_seed,
            UniformPolicy::PerSample => rng.random(),
        };
        let channel_seed: u64 = rng.random();

        // embed
        let cipher = encrypt_bits(&expand(&self.message, self.n_bits)?, &key);
        let mut u_source = UniformSource::new(uniform_seed);
        let embedded = sample_latent(&cipher, self.window, &mut u_source)?;
        let fingerprint = latent_fingerprint(&embedded);

        // optional diffusion roundtrip
        let (carrier, roundtrip_mse) = match &self.schedule {
            Some((schedule, denoiser, mode, sampling_steps)) => {
                let z_0 = ddim_sample(&embedded, schedule, denoiser.as_ref(), *mode, *sampling_steps)?;
                let back = ddim_inverse(&z_0, schedule, denoiser.as_ref(), *mode, *sampling_steps)?;
                let mse = back.mse(&embedded)?;
                (back, Some(mse))
            }
            None => (embedded, None),
        };

        // degradation channel, on the carrier type it applies to
        let recovered = match &config.channel {
            None => reverse_sample(&carrier, self.window),
            Some(spec) => {
                let trial_spec = spec.with_seed(spec.seed ^ channel_seed);
                match trial_spec.kind {
                    ChannelKind::BitFlip { .. } => {
                        apply_channel_bits(&reverse_sample(&carrier, self.window), &trial_spec)?
                    }
                    _ => reverse_sample(
                        &apply_channel_latent(&carrier, &trial_spec)?,
                        self.window,
                    ),
                }
            }
        };

        self.score(trial, &key, &recovered, roundtrip_mse, fingerprint)
    }

    fn run_clean(&self, config: &BenchConfig, trial: usize) -> Result<TrialRecord> {
        let mut rng = stream_rng(config.seed, CLEAN_STREAM_BASE | trial as u64);
        let values: Vec<f64> = (0..config.n_dims).map(|_| rng.sample(StandardNormal)).collect();
        let latent = LatentVector::new(values)?;
        let fingerprint = latent_fingerprint(&latent);
        let recovered = reverse_sample(&latent, self.window);
        self.score(trial, &self.base_key, &recovered, None, fingerprint)
    }

    fn effective_uniform(&self, config: &BenchConfig) -> UniformPolicy {
        config.effective_uniform_policy()
    }
}

/// Run one watermarked trial in isolation; identical to the record produced
/// by [`run_trials`] at the same index.
pub fn run_trial(config: &BenchConfig, trial: usize) -> Result<TrialRecord> {
    TrialContext::build(config)?.run_watermarked(config, trial)
}

/// Run the watermarked cohort.
pub fn run_trials(config: &BenchConfig) -> Result<Vec<TrialRecord>> {
    let ctx = TrialContext::build(config)?;
    (0..config.trials)
        .map(|trial| ctx.run_watermarked(config, trial))
        .collect()
}

/// Run the unwatermarked control cohort: N(0,1) latents detected against the
/// config's message and base key.
pub fn run_clean_trials(config: &BenchConfig) -> Result<Vec<TrialRecord>> {
    let ctx = TrialContext::build(config)?;
    (0..config.trials)
        .map(|trial| ctx.run_clean(config, trial))
        .collect()
}

/// One point of the detection-rate-vs-TFPR curve with fold statistics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub tfpr: f64,
    pub watermarked_mean: f64,
    pub watermarked_std: f64,
    pub clean_mean: f64,
    pub clean_std: f64,
}

fn fold_stats(records: &[TrialRecord], tfpr_index: usize, folds: usize) -> (f64, f64) {
    let fold_count = folds.min(records.len()).max(1);
    let rates: Vec<f64> = (0..fold_count)
        .map(|f| {
            let chunk: Vec<&TrialRecord> = records
                .iter()
                .enumerate()
                .filter(|(i, _)| i % fold_count == f)
                .map(|(_, r)| r)
                .collect();
            let hits = chunk.iter().filter(|r| r.detected[tfpr_index]).count();
            hits as f64 / chunk.len() as f64
        })
        .collect();
    let mean = rates.iter().sum::<f64>() / rates.len() as f64;
    let var = rates.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / rates.len() as f64;
    (mean, var.sqrt())
}

/// Per-TFPR detection rates with mean and standard deviation over k folds,
/// for the watermarked cohort and the clean control cohort.
pub fn detection_curve(
    watermarked: &[TrialRecord],
    clean: &[TrialRecord],
    tfpr_grid: &[f64],
    folds: usize,
) -> Result<Vec<CurvePoint>> {
    if watermarked.is_empty() || clean.is_empty() {
        return Err(Error::InvalidConfig(
            "detection_curve needs non-empty cohorts".into(),
        ));
    }
    tfpr_grid
        .iter()
        .enumerate()
        .map(|(i, &tfpr)| {
            if watermarked[0].detected.len() <= i || clean[0].detected.len() <= i {
                return Err(Error::InvalidConfig(
                    "records carry fewer tfpr columns than the grid".into(),
                ));
            }
            let (wm_mean, wm_std) = fold_stats(watermarked, i, folds);
            let (cl_mean, cl_std) = fold_stats(clean, i, folds);
            Ok(CurvePoint {
                tfpr,
                watermarked_mean: wm_mean,
                watermarked_std: wm_std,
                clean_mean: cl_mean,
                clean_std: cl_std,
            })
        })
        .collect()
}

/// ROC curve swept over the Hamming threshold, plus its trapezoid AUC.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    /// (fpr, tpr) pairs from sweeping the threshold over 0..=n_bits, with the
    /// implicit detect-nothing origin prepended.
    pub points: Vec<(f64, f64)>,
    pub auc: f64,
}

/// Build the ROC from raw Hamming scores (lower = more watermarked). Ties sit
/// on shared sweep points, which credits them at half weight in the AUC.
pub fn roc(watermarked: &[TrialRecord], clean: &[TrialRecord]) -> Result<RocCurve> {
    if watermarked.is_empty() || clean.is_empty() {
        return Err(Error::InvalidConfig("roc needs non-empty cohorts".into()));
    }
    let n_bits = watermarked[0].n_bits as usize;
    let mut wm_hist = vec![0u64; n_bits + 1];
    for r in watermarked {
        wm_hist[(r.hamming as usize).min(n_bits)] += 1;
    }
    let mut cl_hist = vec![0u64; n_bits + 1];
    for r in clean {
        cl_hist[(r.hamming as usize).min(n_bits)] += 1;
    }
    let mut points = Vec::with_capacity(n_bits + 2);
    points.push((0.0, 0.0));
    let (mut wm_cum, mut cl_cum) = (0u64, 0u64);
    let mut auc = 0.0;
    let (mut prev_fpr, mut prev_tpr) = (0.0f64, 0.0f64);
    for tau in 0..=n_bits {
        wm_cum += wm_hist[tau];
        cl_cum += cl_hist[tau];
        let tpr = wm_cum as f64 / watermarked.len() as f64;
        let fpr = cl_cum as f64 / clean.len() as f64;
        auc += (fpr - prev_fpr) * (tpr + prev_tpr) / 2.0;
        points.push((fpr, tpr));
        prev_fpr = fpr;
        prev_tpr = tpr;
    }
    Ok(RocCurve { points, auc })
}

/// One row of the channel-profile table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProfileRow {
    pub profile: String,
    pub tpr_at_fpr_001: f64,
    pub tpr_at_fpr_005: f64,
    pub extraction_rate: f64,
    pub bit_accuracy: f64,
}

fn summarize_profile(name: &str, records: &[TrialRecord]) -> ProfileRow {
    let n = records.len() as f64;
    ProfileRow {
        profile: name.to_string(),
        tpr_at_fpr_001: records.iter().filter(|r| r.detected[0]).count() as f64 / n,
        tpr_at_fpr_005: records.iter().filter(|r| r.detected[1]).count() as f64 / n,
        extraction_rate: records.iter().filter(|r| r.exact_match).count() as f64 / n,
        bit_accuracy: records.iter().map(|r| r.bit_accuracy).sum::<f64>() / n,
    }
}

/// Run the four standard degradation profiles at TFPR 1% and 5%: a clean
/// diffusion roundtrip, then bit-flip channels calibrated to the bit
/// accuracies of progressively lossier decode pipelines.
pub fn channel_profile_report(base: &BenchConfig) -> Result<Vec<ProfileRow>> {
    let mut config = base.clone();
    config.tfpr_grid = vec![0.01, 0.05];
    let mut rows = Vec::with_capacity(4);

    let mut roundtrip = config.clone();
    roundtrip.channel = None;
    roundtrip.diffusion = Some(base.diffusion.clone().unwrap_or_default());
    rows.push(summarize_profile(
        "diffusion_roundtrip",
        &run_trials(&roundtrip)?,
    ));

    for p_flip in [0.056, 0.307, 0.506] {
        let mut flipped = config.clone();
        flipped.diffusion = None;
        flipped.channel = Some(ChannelSpec {
            kind: ChannelKind::BitFlip { p_flip },
            seed: base.seed,
        });
        rows.push(summarize_profile(
            &format!("bit_flip_{p_flip}"),
            &run_trials(&flipped)?,
        ));
    }
    Ok(rows)
}

/// One uniqueness-experiment outcome.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UniquenessRow {
    pub key_policy: KeyPolicy,
    pub uniform_policy: UniformPolicy,
    pub trials: usize,
    pub distinct_latents: usize,
    pub distinct_fraction: f64,
    pub distinct_ciphertexts: usize,
}

/// Measure how many distinct latents (and distinct recovered ciphertexts) a
/// batch of embeddings produces under each key/uniform policy. Reusing key,
/// nonce, and uniform seed collapses the batch to a single latent; a fresh
/// nonce per sample restores full diversity.
pub fn uniqueness_experiment(base: &BenchConfig, trials: usize) -> Result<Vec<UniquenessRow>> {
    if trials < 2 {
        return Err(Error::InvalidConfig(
            "uniqueness experiment needs at least 2 trials".into(),
        ));
    }
    let combos = [
        (KeyPolicy::Fixed, UniformPolicy::Fixed),
        (KeyPolicy::Fixed, UniformPolicy::PerSample),
        (KeyPolicy::PerSampleNonce, UniformPolicy::PerSample),
    ];
    let mut rows = Vec::with_capacity(combos.len());
    for (key_policy, uniform_policy) in combos {
        let mut config = base.clone();
        config.trials = trials;
        config.key_policy = key_policy;
        config.uniform_policy = Some(uniform_policy);
        config.channel = None;
        config.diffusion = None;

        let ctx = TrialContext::build(&config)?;
        let mut latents = HashSet::new();
        let mut ciphers = HashSet::new();
        for trial in 0..trials {
            let mut rng = stream_rng(config.seed, trial as u64);
            let key = ctx.trial_key(&config, &mut rng)?;
            let uniform_seed = match config.effective_uniform_policy() {
                UniformPolicy::Fixed => ctx.fixed_uniform_seed,
                UniformPolicy::PerSample => rng.random(),
            };
            let cipher = encrypt_bits(&expand(&ctx.message, ctx.n_bits)?, &key);
            let mut u_source = UniformSource::new(uniform_seed);
            let latent = sample_latent(&cipher, ctx.window, &mut u_source)?;
            latents.insert(latent_fingerprint(&latent));
            ciphers.insert(reverse_sample(&latent, ctx.window).bits.pack());
        }
        rows.push(UniquenessRow {
            key_policy,
            uniform_policy,
            trials,
            distinct_latents: latents.len(),
            distinct_fraction: latents.len() as f64 / trials as f64,
            distinct_ciphertexts: ciphers.len(),
        });
    }
    Ok(rows)
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    fs::write(path, bytes)?;
    Ok(())
}

fn to_json_line_delimited<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    Ok(bytes)
}

pub fn export_records_json(records: &[TrialRecord], path: &Path) -> Result<()> {
    write_atomic(path, &to_json_line_delimited(&records)?)
}

/// Plot-ready CSV: one row per TFPR with (x, y, sigma) columns per cohort.
pub fn export_curve_csv(curve: &[CurvePoint], path: &Path) -> Result<()> {
    let mut out = String::from("tfpr,watermarked_mean,watermarked_std,clean_mean,clean_std\n");
    for p in curve {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            p.tfpr, p.watermarked_mean, p.watermarked_std, p.clean_mean, p.clean_std
        ));
    }
    write_atomic(path, out.as_bytes())
}

pub fn export_roc_json(curve: &RocCurve, path: &Path) -> Result<()> {
    write_atomic(path, &to_json_line_delimited(curve)?)
}

pub fn export_profile_csv(rows: &[ProfileRow], path: &Path) -> Result<()> {
    let mut out =
        String::from("profile,tpr_at_fpr_0.01,tpr_at_fpr_0.05,extraction_rate,bit_accuracy\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.profile, r.tpr_at_fpr_001, r.tpr_at_fpr_005, r.extraction_rate, r.bit_accuracy
        ));
    }
    write_atomic(path, out.as_bytes())
}

pub fn export_uniqueness_json(rows: &[UniquenessRow], path: &Path) -> Result<()> {
    write_atomic(path, &to_json_line_delimited(&rows)?)
}
