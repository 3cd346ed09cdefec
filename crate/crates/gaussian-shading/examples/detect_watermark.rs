//! Detection reports and p-values for four kinds of latents: freshly
//! watermarked, degraded, inspected with the wrong key, and plain noise.
//!
//! ```bash
//! cargo run --example detect_watermark
//! ```

use gaussian_shading::{
    apply_channel_bits, detect, detect_bits, encrypt_bits, expand, keygen, reverse_sample,
    sample_latent, ChannelKind, ChannelSpec, DetectionReport, LatentVector, UniformSource,
    WatermarkMessage, WindowConfig,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;

fn show(name: &str, report: &DetectionReport) {
    println!(
        "{name:<18} hamming {:>3} / tau {} -> detected = {:<5} (p = {:.3e})",
        report.hamming, report.threshold, report.detected, report.p_value
    );
}

fn main() -> gaussian_shading::Result<()> {
    let message = WatermarkMessage::from_text("X")?;
    let window = WindowConfig::new(1)?;
    let key = keygen(Some(21))?;
    let tfpr = 0.01;

    let cipher = encrypt_bits(&expand(&message, 500)?, &key);
    let mut uniforms = UniformSource::new(9);
    let latent = sample_latent(&cipher, window, &mut uniforms)?;

    // pristine latent: Hamming distance is exactly zero
    show("watermarked", &detect(&latent, &key, &message, window, tfpr)?);

    // the same latent after 5.6% of its bits flip in a lossy pipeline
    let degraded = apply_channel_bits(
        &reverse_sample(&latent, window),
        &ChannelSpec::new(ChannelKind::BitFlip { p_flip: 0.056 }, 3)?,
    )?;
    show("degraded 5.6%", &detect_bits(&degraded, &key, &message, tfpr)?);

    // wrong key: the keystream decorrelates and the distance sits near n/2
    let wrong = keygen(Some(22))?;
    show("wrong key", &detect(&latent, &wrong, &message, window, tfpr)?);

    // unwatermarked noise
    let mut rng = ChaCha12Rng::seed_from_u64(5);
    let noise = LatentVector::new((0..500).map(|_| rng.sample(StandardNormal)).collect())?;
    show("plain noise", &detect(&noise, &key, &message, window, tfpr)?);

    Ok(())
}
