//! The core pipeline end to end: turn a text message into a watermarked
//! Gaussian latent, then recover the message from the latent alone.
//!
//! ```bash
//! cargo run --example embed_and_extract
//! ```

use gaussian_shading::{
    aggregate, decrypt_bits, encrypt_bits, expand, extract_scored, keygen, reverse_sample,
    sample_latent, CapacityLayout, UniformSource, WatermarkMessage, WindowConfig,
};

fn main() -> gaussian_shading::Result<()> {
    let message = WatermarkMessage::from_text("watermark")?;
    let n_dims = 500;
    let window = WindowConfig::new(1)?;
    let n_bits = n_dims * window.bits_per_dim();

    let layout = CapacityLayout::new(n_bits, message.m_bits())?;
    println!(
        "message: {:?} ({} bits) -> {} replicas + {} pad bits in a {}-bit capacity",
        message.origin_text().unwrap(),
        layout.m_bits,
        layout.replicas,
        layout.pad_bits,
        layout.n_bits
    );

    // embed: replicate -> encrypt -> map bits to Gaussian quantile regions
    let key = keygen(Some(7))?;
    let plain = expand(&message, n_bits)?;
    let cipher = encrypt_bits(&plain, &key);
    let mut uniforms = UniformSource::new(1234);
    let latent = sample_latent(&cipher, window, &mut uniforms)?;
    println!(
        "embedded latent: {} dims, first five coordinates {:?}",
        latent.len(),
        &latent.values()[..5]
    );

    // extract: invert the map, decrypt, majority-vote
    let recovered_cipher = reverse_sample(&latent, window);
    assert_eq!(recovered_cipher.bits, cipher.bits, "inversion is exact");
    let recovered_plain = decrypt_bits(&recovered_cipher, &key);
    let recovered = aggregate(&recovered_plain, message.m_bits())?;
    let text = WatermarkMessage::from_bits(recovered.clone())?
        .decode_text()
        .unwrap();
    println!("recovered message bits: {recovered}");
    println!("recovered text: {text:?}");

    // the same thing through the high-level API, with scoring
    let scored = extract_scored(&latent, &key, &message, window)?;
    println!(
        "high-level extraction: exact_match = {:?}, bit_accuracy = {:?}",
        scored.exact_match, scored.bit_accuracy
    );
    Ok(())
}
