//! Command-line front end: keygen / embed / detect / extract / simulate /
//! bench over the documented file formats. Machine-readable JSON goes to
//! stdout, human-readable summaries to stderr.
//!
//! Exit codes: `detect` returns 0 when the watermark is found, 1 when it is
//! not, and 2 on any error; every other command returns 0 or 2.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use rand::TryRngCore;
use serde_json::json;

use crate::bench::{
    channel_profile_report, detection_curve, export_curve_csv, export_profile_csv,
    export_records_json, export_roc_json, export_uniqueness_json, roc, run_clean_trials,
    run_trials, uniqueness_experiment, BenchConfig, DenoiserSpec, OutputKind,
};
use crate::cipher::{encrypt_bits, keygen};
use crate::codec::{expand, WatermarkMessage};
use crate::detector::{detect, extract};
use crate::diffusion::{
    apply_channel_bits, apply_channel_latent, ddim_inverse, ddim_sample, ChannelKind, ChannelSpec,
    DiffusionSchedule, SamplerMode, SchedulePolicy, ScheduleParams,
};
use crate::error::{Error, Result};
use crate::files::{KeyFile, LatentFile, LatentManifest};
use crate::sampler::{
    reverse_sample, sample_latent, sample_region_coordinate, LatentVector, UniformSource,
    WindowConfig,
};

#[derive(Parser)]
#[command(
    name = "gshade",
    version,
    about = "Gaussian-shading watermarks for diffusion latents: embed, detect, extract, simulate, benchmark"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct MessageArgs {
    /// Watermark message as text (UTF-8, expanded MSB-first per byte)
    #[arg(long, group = "msg")]
    message: Option<String>,
    /// Watermark message as hex bytes
    #[arg(long = "message-hex", group = "msg")]
    message_hex: Option<String>,
}

impl MessageArgs {
    fn build(&self) -> Result<WatermarkMessage> {
        match (&self.message, &self.message_hex) {
            (Some(text), None) => WatermarkMessage::from_text(text),
            (None, Some(h)) => {
                let bytes = hex::decode(h).map_err(|e| Error::InvalidHex {
                    field: "message-hex",
                    reason: e.to_string(),
                })?;
                WatermarkMessage::from_bytes(&bytes)
            }
            _ => Err(Error::InvalidConfig(
                "pass exactly one of --message or --message-hex".into(),
            )),
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate a key file (32-byte key + 12-byte nonce, lowercase hex JSON)
    Keygen {
        /// Output key file path
        #[arg(long)]
        out: PathBuf,
        /// Deterministic seed; omit to draw from the OS entropy source
        #[arg(long)]
        seed: Option<u64>,
        /// Optional label stored in the key file
        #[arg(long)]
        label: Option<String>,
        /// Overwrite an existing file
        #[arg(long)]
        force: bool,
    },
    /// Embed a message into a fresh watermarked latent
    Embed {
        #[command(flatten)]
        message: MessageArgs,
        /// Key file produced by `keygen`
        #[arg(long)]
        key: PathBuf,
        /// Latent dimensionality
        #[arg(long = "n-dims", default_value_t = 500)]
        n_dims: usize,
        /// Bits encoded per latent dimension
        #[arg(long, default_value_t = 1)]
        window: u8,
        /// Seed of the per-dimension uniform stream; omit for a random one
        #[arg(long)]
        seed: Option<u64>,
        /// Output latent path (.json selects the JSON format)
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        force: bool,
    },
    /// Test a latent for a watermark; prints a detection report as JSON
    Detect {
        /// Latent file to test
        #[arg(long)]
        latent: PathBuf,
        #[arg(long)]
        key: PathBuf,
        #[command(flatten)]
        message: MessageArgs,
        /// Theoretical false-positive rate for the threshold
        #[arg(long, default_value_t = 0.01)]
        tfpr: f64,
    },
    /// Extract a message of known length from a latent
    Extract {
        #[arg(long)]
        latent: PathBuf,
        #[arg(long)]
        key: PathBuf,
        /// Message length in bits
        #[arg(long = "message-bits")]
        message_bits: usize,
    },
    /// Run a latent through the DDIM simulator and/or a degradation channel
    Simulate {
        /// Input latent
        #[arg(long = "latent-in")]
        latent_in: PathBuf,
        /// Channel spec: identity | additive_gaussian:SIGMA | bit_flip:P |
        /// segment_resample:START..END
        #[arg(long)]
        channel: Option<String>,
        /// Seed for the channel's random stream
        #[arg(long = "channel-seed", default_value_t = 0)]
        channel_seed: u64,
        /// Schedule policy: linear | cosine | quadratic | exponential
        #[arg(long)]
        schedule: Option<String>,
        /// Number of sampling steps
        #[arg(long, default_value_t = 500)]
        steps: usize,
        /// Schedule length T; defaults to `steps` (stride 1)
        #[arg(long = "train-steps")]
        train_steps: Option<usize>,
        /// Denoiser: zero | linear:COEFF
        #[arg(long)]
        denoiser: Option<String>,
        /// Update rule: standard | paper_literal
        #[arg(long, default_value = "standard")]
        mode: String,
        /// DDIM direction: sample | inverse | roundtrip
        #[arg(long, default_value = "roundtrip")]
        ddim: String,
        #[arg(long = "beta-start", default_value_t = 1e-4)]
        beta_start: f64,
        #[arg(long = "beta-end", default_value_t = 0.02)]
        beta_end: f64,
        /// Output latent path
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        force: bool,
    },
    /// Run a benchmark config and write report files into a directory
    Bench {
        /// JSON benchmark configuration
        #[arg(long)]
        config: PathBuf,
        /// Directory for the report files
        #[arg(long = "out-dir")]
        out_dir: PathBuf,
    },
}

/// Parse arguments from the process environment and run. Returns the exit
/// code for the process.
pub fn run() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => e.exit(), // clap prints; usage errors exit with code 2
    };
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}

fn guard_overwrite(path: &Path, force: bool) -> Result<()> {
    if path.exists() && !force {
        return Err(Error::FileExists(path.display().to_string()));
    }
    Ok(())
}

fn random_seed() -> Result<u64> {
    let mut bytes = [0u8; 8];
    rand::rngs::OsRng
        .try_fill_bytes(&mut bytes)
        .map_err(|e| Error::EntropyFailure(e.to_string()))?;
    Ok(u64::from_le_bytes(bytes))
}

fn dispatch(command: Command) -> Result<i32> {
    match command {
        Command::Keygen {
            out,
            seed,
            label,
            force,
        } => {
            guard_overwrite(&out, force)?;
            let material = keygen(seed)?;
            KeyFile::new(material, label).write(&out)?;
            eprintln!("wrote key file {}", out.display());
            Ok(0)
        }

        Command::Embed {
            message,
            key,
            n_dims,
            window,
            seed,
            out,
            force,
        } => {
            guard_overwrite(&out, force)?;
            let message = message.build()?;
            let key = KeyFile::read(&key)?.material;
            let window = WindowConfig::new(window)?;
            let n_bits = n_dims * window.bits_per_dim();
            let uniform_seed = match seed {
                Some(s) => s,
                None => random_seed()?,
            };
            let cipher = encrypt_bits(&expand(&message, n_bits)?, &key);
            let mut u_source = UniformSource::new(uniform_seed);
            let latent = sample_latent(&cipher, window, &mut u_source)?;
            let file = LatentFile::new(
                latent,
                window,
                Some(LatentManifest {
                    uniform_seed: Some(uniform_seed),
                    schedule: None,
                }),
            );
            file.write(&out)?;
            eprintln!(
                "embedded {} message bits into {} dims (seed {uniform_seed}) -> {}",
                message.m_bits(),
                n_dims,
                out.display()
            );
            Ok(0)
        }

        Command::Detect {
            latent,
            key,
            message,
            tfpr,
        } => {
            let message = message.build()?;
            let key = KeyFile::read(&key)?.material;
            let file = LatentFile::read(&latent)?;
            let report = detect(&file.latent, &key, &message, file.window, tfpr)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
            eprintln!(
                "hamming {} / threshold {} over {} bits -> {}",
                report.hamming,
                report.threshold,
                report.n_bits,
                if report.detected { "detected" } else { "not detected" }
            );
            Ok(if report.detected { 0 } else { 1 })
        }

        Command::Extract {
            latent,
            key,
            message_bits,
        } => {
            let key = KeyFile::read(&key)?.material;
            let file = LatentFile::read(&latent)?;
            let result = extract(&file.latent, &key, message_bits, file.window)?;
            let text = WatermarkMessage::from_bits(result.message.clone())
                .ok()
                .and_then(|m| m.decode_text());
            println!(
                "{}",
                serde_json::to_string_pretty(&json!({
                    "bits": result.message.to_string(),
                    "text": text,
                }))?
            );
            Ok(0)
        }

        Command::Simulate {
            latent_in,
            channel,
            channel_seed,
            schedule,
            steps,
            train_steps,
            denoiser,
            mode,
            ddim,
            beta_start,
            beta_end,
            out,
            force,
        } => {
            guard_overwrite(&out, force)?;
            let file = LatentFile::read(&latent_in)?;
            let mut latent = file.latent.clone();
            let mut stage_notes: Vec<String> = Vec::new();

            if schedule.is_some() || denoiser.is_some() {
                let policy = match &schedule {
                    Some(s) => SchedulePolicy::from_str(s)?,
                    None => SchedulePolicy::Linear,
                };
                let denoiser_spec = match &denoiser {
                    Some(d) => DenoiserSpec::from_str(d)?,
                    None => DenoiserSpec::Zero,
                };
                let mode = SamplerMode::from_str(&mode)?;
                let t = train_steps.unwrap_or(steps);
                let built = DiffusionSchedule::build(
                    policy,
                    t,
                    ScheduleParams {
                        beta_start,
                        beta_end,
                    },
                )?;
                let den = denoiser_spec.build();
                latent = match ddim.as_str() {
                    "sample" => ddim_sample(&latent, &built, den.as_ref(), mode, steps)?,
                    "inverse" => ddim_inverse(&latent, &built, den.as_ref(), mode, steps)?,
                    "roundtrip" => {
                        let z0 = ddim_sample(&latent, &built, den.as_ref(), mode, steps)?;
                        ddim_inverse(&z0, &built, den.as_ref(), mode, steps)?
                    }
                    other => {
                        return Err(Error::InvalidConfig(format!(
                            "unknown --ddim '{other}' (expected sample|inverse|roundtrip)"
                        )))
                    }
                };
                stage_notes.push(format!(
                    "ddim={ddim} policy={policy} T={t} steps={steps} denoiser={denoiser_spec:?}"
                ));
            }

            if let Some(channel) = &channel {
                let kind = ChannelKind::from_str(channel)?;
                let spec = ChannelSpec::new(kind.clone(), channel_seed)?;
                latent = match kind {
                    ChannelKind::BitFlip { .. } => {
                        bit_channel_on_latent(&latent, file.window, &spec)?
                    }
                    _ => apply_channel_latent(&latent, &spec)?,
                };
                stage_notes.push(format!("channel={channel} seed={channel_seed}"));
            }

            let mut manifest = file.manifest.clone().unwrap_or_default();
            if !stage_notes.is_empty() {
                manifest.schedule = Some(stage_notes.join("; "));
            }
            LatentFile::new(latent, file.window, Some(manifest)).write(&out)?;
            eprintln!("simulated -> {}", out.display());
            Ok(0)
        }

        Command::Bench { config, out_dir } => {
            let bytes = std::fs::read(&config)?;
            let config = BenchConfig::from_json(&bytes)?;
            std::fs::create_dir_all(&out_dir)?;
            let mut written: Vec<String> = Vec::new();

            let wants = |k: OutputKind| config.outputs.contains(&k);
            let needs_clean = wants(OutputKind::Curve) || wants(OutputKind::Roc);

            let records = run_trials(&config)?;
            let clean = if needs_clean {
                Some(run_clean_trials(&config)?)
            } else {
                None
            };

            if wants(OutputKind::Records) {
                let path = out_dir.join("records.json");
                export_records_json(&records, &path)?;
                written.push(path.display().to_string());
                if let Some(clean) = &clean {
                    let path = out_dir.join("clean_records.json");
                    export_records_json(clean, &path)?;
                    written.push(path.display().to_string());
                }
            }
            if wants(OutputKind::Curve) {
                let curve = detection_curve(
                    &records,
                    clean.as_ref().unwrap(),
                    &config.tfpr_grid,
                    config.folds,
                )?;
                let path = out_dir.join("detection_curve.csv");
                export_curve_csv(&curve, &path)?;
                written.push(path.display().to_string());
            }
            if wants(OutputKind::Roc) {
                let curve = roc(&records, clean.as_ref().unwrap())?;
                eprintln!("roc auc = {:.6}", curve.auc);
                let path = out_dir.join("roc.json");
                export_roc_json(&curve, &path)?;
                written.push(path.display().to_string());
            }
            if wants(OutputKind::Profiles) {
                let rows = channel_profile_report(&config)?;
                let path = out_dir.join("channel_profiles.csv");
                export_profile_csv(&rows, &path)?;
                written.push(path.display().to_string());
            }
            if wants(OutputKind::Uniqueness) {
                let rows = uniqueness_experiment(&config, config.trials)?;
                let path = out_dir.join("uniqueness.json");
                export_uniqueness_json(&rows, &path)?;
                written.push(path.display().to_string());
            }

            println!(
                "{}",
                serde_json::to_string_pretty(&json!({
                    "out_dir": out_dir.display().to_string(),
                    "files": written,
                }))?
            );
            Ok(0)
        }
    }
}

/// Apply a bit-carrier channel to a latent: recover the bits, run the
/// channel, and redraw only the dimensions whose bits changed (fresh uniforms
/// come from the channel seed). Untouched dimensions keep their coordinates.
fn bit_channel_on_latent(
    latent: &LatentVector,
    window: WindowConfig,
    spec: &ChannelSpec,
) -> Result<LatentVector> {
    let l = window.bits_per_dim();
    let before = reverse_sample(latent, window);
    let after = apply_channel_bits(&before, spec)?;
    let mut u_source = UniformSource::new(spec.seed ^ 0x5e_ed);
    let mut values = latent.values().to_vec();
    for (d, value) in values.iter_mut().enumerate() {
        let dim_changed = (0..l).any(|j| before.bits.get(d * l + j) != after.bits.get(d * l + j));
        if dim_changed {
            let mut y: u32 = 0;
            for j in 0..l {
                y = (y << 1) | after.bits.get(d * l + j).unwrap_or(0) as u32;
            }
            *value = sample_region_coordinate(y, window, &mut u_source)?;
        }
    }
    LatentVector::new(values)
}
