//! ROC curves from raw Hamming scores: an intact watermark against clean
//! noise separates almost perfectly; a chance-level channel does not.
//!
//! ```bash
//! cargo run --release --example roc_curve
//! ```

use gaussian_shading::bench::{roc, run_clean_trials, run_trials, BenchConfig, MessageSpec};
use gaussian_shading::{ChannelKind, ChannelSpec};

fn main() -> gaussian_shading::Result<()> {
    let base = BenchConfig {
        trials: 800,
        seed: 42,
        ..BenchConfig::new(MessageSpec::text("watermark"))
    };
    let clean = run_clean_trials(&base)?;

    for (name, channel) in [
        ("intact watermark", None),
        (
            "bit_flip(0.307)",
            Some(ChannelSpec::new(ChannelKind::BitFlip { p_flip: 0.307 }, 1)?),
        ),
        (
            "bit_flip(0.506) (chance)",
            Some(ChannelSpec::new(ChannelKind::BitFlip { p_flip: 0.506 }, 1)?),
        ),
    ] {
        let config = BenchConfig {
            channel,
            ..base.clone()
        };
        let watermarked = run_trials(&config)?;
        let curve = roc(&watermarked, &clean)?;
        // a few interior operating points
        let sampled: Vec<(f64, f64)> = curve
            .points
            .iter()
            .filter(|(fpr, _)| (0.005..0.4).contains(fpr))
            .step_by(6)
            .take(4)
            .copied()
            .collect();
        println!("{name:<26} AUC = {:.4}   operating points {sampled:?}", curve.auc);
    }
    Ok(())
}
