//! Each degradation channel applied to one watermarked latent, with the bit
//! accuracy and detection verdict it leaves behind.
//!
//! ```bash
//! cargo run --example degradation_channels
//! ```

use gaussian_shading::{
    apply_channel_bits, apply_channel_latent, detect_bits, encrypt_bits, expand, keygen,
    reverse_sample, sample_latent, ChannelKind, ChannelSpec, Ciphertext, UniformSource,
    WatermarkMessage, WindowConfig,
};

fn main() -> gaussian_shading::Result<()> {
    let message = WatermarkMessage::from_text("X")?;
    let window = WindowConfig::new(1)?;
    let key = keygen(Some(14))?;
    let cipher = encrypt_bits(&expand(&message, 500)?, &key);
    let mut uniforms = UniformSource::new(20);
    let latent = sample_latent(&cipher, window, &mut uniforms)?;

    let report = |name: &str, recovered: &Ciphertext| -> gaussian_shading::Result<()> {
        let r = detect_bits(recovered, &key, &message, 0.01)?;
        println!(
            "{name:<28} bit accuracy {:.3}, hamming {:>3} -> detected = {}",
            1.0 - r.hamming as f64 / r.n_bits as f64,
            r.hamming,
            r.detected
        );
        Ok(())
    };

    // latent-carrier channels
    for (name, kind) in [
        ("identity", ChannelKind::Identity),
        ("additive_gaussian(0.3)", ChannelKind::AdditiveGaussian { sigma: 0.3 }),
        (
            "segment_resample[250..500)",
            ChannelKind::SegmentResample { start: 250, end: 500 },
        ),
    ] {
        let spec = ChannelSpec::new(kind, 5)?;
        let degraded = apply_channel_latent(&latent, &spec)?;
        report(name, &reverse_sample(&degraded, window))?;
    }

    // bit-carrier channels, calibrated to representative decode pipelines:
    // flip rate = 1 - bit accuracy of the pipeline being emulated
    for p_flip in [0.056, 0.307, 0.506] {
        let spec = ChannelSpec::new(ChannelKind::BitFlip { p_flip }, 5)?;
        let degraded = apply_channel_bits(&reverse_sample(&latent, window), &spec)?;
        report(&format!("bit_flip({p_flip})"), &degraded)?;
    }

    Ok(())
}
