//! Watermark detection and extraction.
//!
//! Detection re-derives the reference ciphertext from the claimed message and
//! key, measures the Hamming distance to the ciphertext recovered from the
//! latent, and compares it against a binomially calibrated threshold. Under
//! the null hypothesis (no watermark) every recovered bit is a fair coin, so
//! the distance follows Binomial(n, 1/2) and both p-values and thresholds
//! come from its exact CDF.

use serde::{Deserialize, Serialize};

use crate::cipher::{decrypt_bits, encrypt_bits, Ciphertext, KeyMaterial};
use crate::codec::{aggregate, expand, BitString, WatermarkMessage};
use crate::error::{Error, Result};
use crate::sampler::{reverse_sample, LatentVector, WindowConfig};

/// Multiply by 2^e with intermediate chunking so the scale factor itself
/// never overflows or underflows.
fn scale_pow2(mut x: f64, mut e: i64) -> f64 {
    while e > 1000 {
        x *= 2f64.powi(1000);
        e -= 1000;
        if !x.is_finite() {
            return x;
        }
    }
    while e < -1000 {
        x *= 2f64.powi(-1000);
        e += 1000;
        if x == 0.0 {
            return 0.0;
        }
    }
    x * 2f64.powi(e as i32)
}

fn half_binomial_cdf(k: i64, n: u64) -> f64 {
    if k < 0 {
        return 0.0;
    }
    let k = k as u64;
    if k >= n {
        return 1.0;
    }
    if 2 * k + 1 > n {
        // upper half by symmetry: P(X <= k) = 1 - P(X <= n-k-1)
        return 1.0 - half_binomial_cdf((n - k - 1) as i64, n);
    }
    // pmf(k) = C(n,k) * 2^-n, the binomial coefficient kept in range by
    // explicit power-of-two scaling so the 2^-n factor stays exact.
    let mut m = 1.0f64;
    let mut e2 = -(n as i64);
    for i in 1..=k {
        m *= (n - k + i) as f64 / i as f64;
        while m > 1e150 {
            m *= 2f64.powi(-300);
            e2 += 300;
        }
    }
    // tail sum downward from the largest term: pmf(i-1)/pmf(i) = i/(n-i+1)
    let mut s = 1.0f64;
    let mut r = 1.0f64;
    let mut i = k;
    while i >= 1 {
        r *= i as f64 / (n - i + 1) as f64;
        s += r;
        if r < 1e-20 * s {
            break;
        }
        i -= 1;
    }
    scale_pow2(m * s, e2)
}

/// Exact CDF of Binomial(n, 1/2) at k: `P(X <= k)`. No normal approximation;
/// absolute error stays below 1e-12 for n up to 10^4.
pub fn binomial_cdf(k: u64, n: u64) -> Result<f64> {
    if n == 0 || k > n {
        return Err(Error::BinomialDomain { k, n });
    }
    Ok(half_binomial_cdf(k as i64, n))
}

/// Left-tail probability of observing a Hamming distance as small as the one
/// measured: `P(Binomial(n, 1/2) <= hamming)`.
pub fn p_value(hamming: u64, n_bits: u64) -> Result<f64> {
    binomial_cdf(hamming, n_bits)
}

/// Smallest threshold k with `P(Binomial(n, 1/2) <= k) >= tfpr` (standard
/// quantile semantics). For tfpr above 1/2 the test runs on the complementary
/// tail, which keeps the comparison accurate where the CDF is close to 1.
pub fn threshold_for_tfpr(n_bits: u64, tfpr: f64) -> Result<u64> {
    if n_bits == 0 {
        return Err(Error::BinomialDomain { k: 0, n: 0 });
    }
    if !(tfpr > 0.0 && tfpr < 1.0) {
        return Err(Error::ProbabilityDomain {
            value: tfpr,
            domain: "(0, 1)",
        });
    }
    let meets = |k: u64| -> bool {
        if tfpr <= 0.5 {
            half_binomial_cdf(k as i64, n_bits) >= tfpr
        } else {
            // cdf(k) >= tfpr  <=>  P(X > k) <= 1 - tfpr, and 1 - tfpr is
            // exact for tfpr >= 1/2
            half_binomial_cdf(n_bits as i64 - k as i64 - 1, n_bits) <= 1.0 - tfpr
        }
    };
    let (mut lo, mut hi) = (0u64, n_bits);
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        if meets(mid) {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    Ok(lo)
}

/// Outcome of one detection: the measured distance, the calibrated threshold,
/// and the verdict.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectionReport {
    pub hamming: u64,
    pub threshold: u64,
    pub tfpr: f64,
    pub p_value: f64,
    pub detected: bool,
    pub n_bits: u64,
}

/// Detect directly on a recovered ciphertext. The reference ciphertext is
/// re-derived from the message and key exactly as during embedding.
pub fn detect_bits(
    recovered: &Ciphertext,
    key: &KeyMaterial,
    message: &WatermarkMessage,
    tfpr: f64,
) -> Result<DetectionReport> {
    let n_bits = recovered.len();
    let reference = encrypt_bits(&expand(message, n_bits)?, key);
    let hamming = recovered.bits.hamming(&reference.bits)?;
    let threshold = threshold_for_tfpr(n_bits as u64, tfpr)?;
    Ok(DetectionReport {
        hamming,
        threshold,
        tfpr,
        p_value: p_value(hamming, n_bits as u64)?,
        detected: hamming <= threshold,
        n_bits: n_bits as u64,
    })
}

/// Detect a watermark in a latent vector: reverse-sample to bits, then run
/// the Hamming test. Deterministic; no randomness is consumed.
pub fn detect(
    latent: &LatentVector,
    key: &KeyMaterial,
    message: &WatermarkMessage,
    window: WindowConfig,
    tfpr: f64,
) -> Result<DetectionReport> {
    let recovered = reverse_sample(latent, window);
    detect_bits(&recovered, key, message, tfpr)
}

/// Result of message extraction. `bit_accuracy` and `exact_match` are filled
/// only when a ground-truth message was supplied for scoring.
#[derive(Clone, Debug, PartialEq)]
pub struct ExtractionResult {
    pub message: BitString,
    pub bit_accuracy: Option<f64>,
    pub exact_match: Option<bool>,
}

/// Extract an `m_bits` message from a recovered ciphertext: decrypt, then
/// majority-vote across the replicas.
pub fn extract_bits(
    recovered: &Ciphertext,
    key: &KeyMaterial,
    m_bits: usize,
) -> Result<ExtractionResult> {
    let plain = decrypt_bits(recovered, key);
    Ok(ExtractionResult {
        message: aggregate(&plain, m_bits)?,
        bit_accuracy: None,
        exact_match: None,
    })
}

/// Extract an `m_bits` message from a latent vector.
pub fn extract(
    latent: &LatentVector,
    key: &KeyMaterial,
    m_bits: usize,
    window: WindowConfig,
) -> Result<ExtractionResult> {
    extract_bits(&reverse_sample(latent, window), key, m_bits)
}

/// Extract and score against a known ground-truth message: ciphertext bit
/// accuracy plus whether the recovered message matches exactly.
pub fn extract_scored(
    latent: &LatentVector,
    key: &KeyMaterial,
    expected: &WatermarkMessage,
    window: WindowConfig,
) -> Result<ExtractionResult> {
    let recovered = reverse_sample(latent, window);
    extract_bits_scored(&recovered, key, expected)
}

/// Bit-level variant of [`extract_scored`].
pub fn extract_bits_scored(
    recovered: &Ciphertext,
    key: &KeyMaterial,
    expected: &WatermarkMessage,
) -> Result<ExtractionResult> {
    let n_bits = recovered.len();
    let reference = encrypt_bits(&expand(expected, n_bits)?, key);
    let hamming = recovered.bits.hamming(&reference.bits)?;
    let mut result = extract_bits(recovered, key, expected.m_bits())?;
    result.bit_accuracy = Some(1.0 - hamming as f64 / n_bits as f64);
    result.exact_match = Some(&result.message == expected.payload());
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cipher::keygen;
    use crate::sampler::{sample_latent, UniformSource};
    use num_bigint::BigInt;
    use num_rational::Ratio;
    use num_traits::ToPrimitive;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;
    use rand_distr::StandardNormal;

    /// Exact rational oracle: sum of C(n, 0..=k) over 2^n, evaluated with
    /// big-integer arithmetic, independent of the float implementation.
    fn oracle_cdf(k: u64, n: u64) -> f64 {
        let mut c = BigInt::from(1u8);
        let mut total = BigInt::from(1u8);
        for i in 0..k {
            c = c * BigInt::from(n - i) / BigInt::from(i + 1);
            total += &c;
        }
        Ratio::new(total, BigInt::from(1u8) << n).to_f64().unwrap()
    }

    #[test]
    fn binomial_cdf_fixed_points() {
        assert_eq!(binomial_cdf(500, 500).unwrap(), 1.0);
        assert!((binomial_cdf(250, 500).unwrap() - 0.5178323227766746).abs() < 1e-12);
        assert!((binomial_cdf(224, 500).unwrap() - 0.011233102459995852).abs() < 1e-12);
        assert_eq!(binomial_cdf(0, 500).unwrap(), 2f64.powi(-500));
    }

    #[test]
    fn binomial_cdf_matches_exact_oracle() {
        let mut rng = ChaCha12Rng::seed_from_u64(20);
        for _ in 0..20 {
            let n = rng.random_range(1..=10_000u64);
            let k = rng.random_range(0..=n);
            let got = binomial_cdf(k, n).unwrap();
            let want = oracle_cdf(k, n);
            assert!(
                (got - want).abs() <= 1e-12,
                "cdf({k}, {n}) = {got}, oracle {want}"
            );
        }
    }

    #[test]
    fn binomial_cdf_domain_errors() {
        assert!(binomial_cdf(1, 0).is_err());
        assert!(binomial_cdf(6, 5).is_err());
    }

    #[test]
    fn threshold_fixed_points() {
        assert_eq!(threshold_for_tfpr(500, 0.01).unwrap(), 224);
        assert_eq!(threshold_for_tfpr(500, 0.05).unwrap(), 232);
        assert_eq!(threshold_for_tfpr(500, 0.5).unwrap(), 250);
        // close to 1 the threshold saturates at n once the remaining tail is
        // wider than 1 - tfpr
        assert_eq!(threshold_for_tfpr(10, 1.0 - 1e-4).unwrap(), 10);
        assert!(threshold_for_tfpr(500, 0.0).is_err());
        assert!(threshold_for_tfpr(500, 1.0).is_err());
    }

    #[test]
    fn threshold_quantile_brackets_tfpr() {
        for tfpr in [0.001, 0.01, 0.05, 0.25, 0.5, 0.9] {
            let tau = threshold_for_tfpr(500, tfpr).unwrap();
            assert!(p_value(tau, 500).unwrap() >= tfpr);
            if tau > 0 {
                assert!(p_value(tau - 1, 500).unwrap() < tfpr);
            }
        }
    }

    #[test]
    fn p_value_monotone() {
        let mut prev = 0.0;
        for eta in 0..=500 {
            let p = p_value(eta, 500).unwrap();
            assert!(p >= prev);
            prev = p;
        }
    }

    fn embed(key: &KeyMaterial, message: &WatermarkMessage, seed: u64) -> LatentVector {
        let cipher = encrypt_bits(&expand(message, 500).unwrap(), key);
        let mut u = UniformSource::new(seed);
        sample_latent(&cipher, WindowConfig::default(), &mut u).unwrap()
    }

    #[test]
    fn fresh_embedding_detects_with_zero_distance() {
        let key = keygen(Some(8)).unwrap();
        let msg = WatermarkMessage::from_text("watermark").unwrap();
        let latent = embed(&key, &msg, 123);
        let report = detect(&latent, &key, &msg, WindowConfig::default(), 0.01).unwrap();
        assert_eq!(report.hamming, 0);
        assert!(report.detected);
        assert_eq!(report.threshold, 224);
        assert_eq!(report.p_value, 2f64.powi(-500));
    }

    #[test]
    fn wrong_key_looks_like_chance() {
        let key = keygen(Some(8)).unwrap();
        let other = keygen(Some(9)).unwrap();
        let msg = WatermarkMessage::from_text("watermark").unwrap();
        let latent = embed(&key, &msg, 123);
        let report = detect(&latent, &other, &msg, WindowConfig::default(), 0.01).unwrap();
        assert!(!report.detected);
        assert!((report.hamming as i64 - 250).abs() < 80);
        let scored = extract_scored(&latent, &other, &msg, WindowConfig::default()).unwrap();
        let acc = scored.bit_accuracy.unwrap();
        assert!((acc - 0.5).abs() < 0.12, "bit accuracy {acc}");
    }

    #[test]
    fn extraction_roundtrip_is_exact() {
        let key = keygen(Some(4)).unwrap();
        for text in ["X", "watermark", "hello world"] {
            let msg = WatermarkMessage::from_text(text).unwrap();
            let latent = embed(&key, &msg, 77);
            let out = extract_scored(&latent, &key, &msg, WindowConfig::default()).unwrap();
            assert_eq!(&out.message, msg.payload());
            assert_eq!(out.bit_accuracy, Some(1.0));
            assert_eq!(out.exact_match, Some(true));
        }
    }

    #[test]
    fn hamming_is_cipher_invariant() {
        // Hamming(c, c') == Hamming(decrypt(c), decrypt(c')) under one key.
        let key = keygen(Some(5)).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(6);
        let a = Ciphertext {
            bits: BitString::from_bits((0..500).map(|_| rng.random_range(0..=1)).collect())
                .unwrap(),
        };
        let b = Ciphertext {
            bits: BitString::from_bits((0..500).map(|_| rng.random_range(0..=1)).collect())
                .unwrap(),
        };
        let da = decrypt_bits(&a, &key);
        let db = decrypt_bits(&b, &key);
        assert_eq!(
            a.bits.hamming(&b.bits).unwrap(),
            da.hamming(&db).unwrap()
        );
    }

    #[test]
    fn unwatermarked_fpr_tracks_threshold_mass() {
        // 2000 random latents; empirical FPR within 3 sigma of the exact
        // detection mass cdf(tau) at both grid points.
        let key = keygen(Some(13)).unwrap();
        let msg = WatermarkMessage::from_text("X").unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(14);
        let trials = 2000;
        let mut hits = [0u32; 2];
        for _ in 0..trials {
            let z: Vec<f64> = (0..500).map(|_| rng.sample(StandardNormal)).collect();
            let latent = LatentVector::new(z).unwrap();
            for (i, tfpr) in [0.01, 0.05].iter().enumerate() {
                if detect(&latent, &key, &msg, WindowConfig::default(), *tfpr)
                    .unwrap()
                    .detected
                {
                    hits[i] += 1;
                }
            }
        }
        for (i, tfpr) in [0.01, 0.05].iter().enumerate() {
            let tau = threshold_for_tfpr(500, *tfpr).unwrap();
            let exact = binomial_cdf(tau, 500).unwrap();
            let efpr = hits[i] as f64 / trials as f64;
            let sigma = (exact * (1.0 - exact) / trials as f64).sqrt();
            assert!(
                (efpr - exact).abs() <= 3.0 * sigma,
                "tfpr {tfpr}: efpr {efpr} vs exact {exact}"
            );
        }
    }
}
