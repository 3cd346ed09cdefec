//! Mapping between ciphertext bits and standard-normal latent coordinates.
//!
//! Each latent dimension encodes `l` bits as an integer `y` selecting one of
//! `2^l` quantile regions; a uniform draw `u` places the coordinate inside the
//! region via `z = ppf((y + u) / 2^l)`. Reversal is `y = floor(2^l * cdf(z))`
//! and needs no knowledge of `u`. With uniformly random bits the construction
//! reproduces N(0,1) exactly, so embedding is distribution-lossless.

use rand::distr::Open01;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::cipher::Ciphertext;
use crate::codec::BitString;
use crate::error::{Error, Result};

const SQRT_2: f64 = std::f64::consts::SQRT_2;
const INV_SQRT_PI: f64 = 0.5641895835477563; // 1/sqrt(pi)
const INV_SQRT_2PI: f64 = 0.3989422804014327; // 1/sqrt(2*pi)

/// Complementary error function, accurate to ~1e-14 relative over the range
/// the sampler can reach. Maclaurin series below 1, Lentz-evaluated Laplace
/// continued fraction above, reflection for negative arguments.
pub fn erfc(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x < 0.0 {
        return 2.0 - erfc(-x);
    }
    if x < 1.0 {
        // erf(x) = 2/sqrt(pi) * sum (-1)^n x^(2n+1) / (n! (2n+1))
        let x2 = x * x;
        let mut term = x;
        let mut sum = x;
        let mut n = 0.0;
        loop {
            n += 1.0;
            term *= -x2 / n;
            let contrib = term / (2.0 * n + 1.0);
            sum += contrib;
            if contrib.abs() <= 1e-18 * sum.abs() {
                break;
            }
        }
        return 1.0 - 2.0 * INV_SQRT_PI * sum;
    }
    if x > 27.0 {
        return 0.0; // below the smallest positive subnormal
    }
    // erfc(x) = exp(-x^2)/sqrt(pi) * 1/(x + (1/2)/(x + 1/(x + (3/2)/(x + ...))))
    let mut f = x;
    let mut c = x;
    let mut d = 0.0f64;
    for k in 1..300 {
        let a = k as f64 / 2.0;
        d = x + a * d;
        if d == 0.0 {
            d = 1e-300;
        }
        c = x + a / c;
        if c == 0.0 {
            c = 1e-300;
        }
        d = 1.0 / d;
        let delta = c * d;
        f *= delta;
        if (delta - 1.0).abs() < 1e-17 {
            break;
        }
    }
    (-x * x).exp() * INV_SQRT_PI / f
}

/// Standard-normal cumulative distribution function.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / SQRT_2)
}

/// Standard-normal density.
fn normal_pdf(x: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * x * x).exp()
}

// Acklam's rational approximation to the normal quantile (relative error
// below 1.15e-9 on its own); one Halley step against the erfc-based CDF
// brings it to full double precision.
const PPF_A: [f64; 6] = [
    -39.696_830_286_653_8,
    220.946_098_424_521,
    -275.928_510_446_969,
    138.357_751_867_269,
    -30.664_798_066_147_2,
    2.506_628_277_459_24,
];
const PPF_B: [f64; 5] = [
    -54.476_098_798_224_1,
    161.585_836_858_041,
    -155.698_979_859_887,
    66.801_311_887_719_7,
    -13.280_681_552_885_7,
];
const PPF_C: [f64; 6] = [
    -7.784_894_002_430_29e-3,
    -0.322_396_458_041_136,
    -2.400_758_277_161_84,
    -2.549_732_539_343_73,
    4.374_664_141_464_97,
    2.938_163_982_698_78,
];
const PPF_D: [f64; 4] = [
    7.784_695_709_041_46e-3,
    0.322_467_129_070_04,
    2.445_134_137_143,
    3.754_408_661_907_42,
];

fn ppf_estimate(p: f64) -> f64 {
    if p < 0.02425 {
        let q = (-2.0 * p.ln()).sqrt();
        (((((PPF_C[0] * q + PPF_C[1]) * q + PPF_C[2]) * q + PPF_C[3]) * q + PPF_C[4]) * q
            + PPF_C[5])
            / ((((PPF_D[0] * q + PPF_D[1]) * q + PPF_D[2]) * q + PPF_D[3]) * q + 1.0)
    } else {
        let q = p - 0.5;
        let r = q * q;
        (((((PPF_A[0] * r + PPF_A[1]) * r + PPF_A[2]) * r + PPF_A[3]) * r + PPF_A[4]) * r
            + PPF_A[5])
            * q
            / (((((PPF_B[0] * r + PPF_B[1]) * r + PPF_B[2]) * r + PPF_B[3]) * r + PPF_B[4]) * r
                + 1.0)
    }
}

/// Standard-normal quantile function on the open interval (0, 1).
///
/// For p > 1/2 the symmetric reflection keeps the refinement in the lower
/// tail, where the erfc-based CDF retains full relative precision; without it
/// the correction step loses accuracy to cancellation near 1.
pub fn normal_ppf(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::ProbabilityDomain {
            value: p,
            domain: "(0, 1)",
        });
    }
    if p > 0.5 {
        return Ok(-normal_ppf(1.0 - p)?);
    }
    let mut x = ppf_estimate(p);
    // Halley refinement: x <- x - u / (1 + x*u/2), u = (cdf(x) - p) / pdf(x)
    let e = normal_cdf(x) - p;
    let u = e / normal_pdf(x);
    x -= u / (1.0 + 0.5 * x * u);
    Ok(x)
}

/// Number of ciphertext bits carried per latent dimension.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct WindowConfig {
    l: u8,
}

impl WindowConfig {
    pub fn new(l: u8) -> Result<Self> {
        if !(1..=16).contains(&l) {
            return Err(Error::InvalidWindow(l));
        }
        Ok(Self { l })
    }

    pub fn bits_per_dim(&self) -> usize {
        self.l as usize
    }

    pub fn regions(&self) -> u32 {
        1 << self.l
    }
}

impl Default for WindowConfig {
    fn default() -> Self {
        Self { l: 1 }
    }
}

/// Finite real vector: the diffusion model's initial noise or a recovered
/// version of it.
#[derive(Clone, Debug, PartialEq)]
pub struct LatentVector {
    values: Vec<f64>,
}

impl LatentVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptyLatent);
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteLatent { index });
        }
        Ok(Self { values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Mean squared difference to another latent of the same length.
    pub fn mse(&self, other: &LatentVector) -> Result<f64> {
        if self.len() != other.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} vs {} dims",
                self.len(),
                other.len()
            )));
        }
        let sum: f64 = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        Ok(sum / self.len() as f64)
    }
}

/// Deterministic stream of uniforms strictly inside (0, 1); the seed is
/// recorded in sample manifests so embeddings replay exactly.
pub struct UniformSource {
    rng: ChaCha12Rng,
    seed: u64,
}

impl UniformSource {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha12Rng::seed_from_u64(seed),
            seed,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn next_open01(&mut self) -> f64 {
        self.rng.sample(Open01)
    }
}

fn region_index(z: f64, regions: u32) -> u32 {
    let y = (regions as f64 * normal_cdf(z)).floor();
    // cdf can round to exactly 1.0 at extreme z; clamp into the top region
    (y as i64).clamp(0, regions as i64 - 1) as u32
}

/// Draw one coordinate inside region `y`, consuming exactly one uniform.
/// Rounding at a region boundary could land the coordinate one region off;
/// nudging `u` toward the region center restores exact reversal without
/// consuming further randomness.
pub fn sample_region_coordinate(
    y: u32,
    window: WindowConfig,
    u_source: &mut UniformSource,
) -> Result<f64> {
    let regions = window.regions() as f64;
    let mut u = u_source.next_open01();
    let mut z = normal_ppf((y as f64 + u) / regions)?;
    let mut guard = 0;
    while region_index(z, window.regions()) != y {
        u = 0.5 * (u + 0.5);
        z = normal_ppf((y as f64 + u) / regions)?;
        guard += 1;
        assert!(guard <= 60, "region nudge failed to converge");
    }
    Ok(z)
}

/// Map ciphertext bits to latent coordinates, `l` bits per dimension
/// (MSB-first), consuming one uniform per dimension. Ciphertexts whose length
/// is not a multiple of `l` are zero-padded up to the next whole dimension;
/// the true bit length must be kept by the caller for truncation on reversal.
pub fn sample_latent(
    cipher: &Ciphertext,
    window: WindowConfig,
    u_source: &mut UniformSource,
) -> Result<LatentVector> {
    if cipher.is_empty() {
        return Err(Error::EmptyMessage);
    }
    let l = window.bits_per_dim();
    let n_dims = cipher.len().div_ceil(l);
    let mut values = Vec::with_capacity(n_dims);
    for d in 0..n_dims {
        let mut y: u32 = 0;
        for j in 0..l {
            let bit = cipher.bits.get(d * l + j).unwrap_or(0);
            y = (y << 1) | bit as u32;
        }
        values.push(sample_region_coordinate(y, window, u_source)?);
    }
    LatentVector::new(values)
}

/// Recover the ciphertext from a latent: per dimension the region index
/// `floor(2^l * cdf(z))`, clamped into range and emitted as `l` bits
/// MSB-first. Output length is always `n_dims * l`.
pub fn reverse_sample(latent: &LatentVector, window: WindowConfig) -> Ciphertext {
    let l = window.bits_per_dim();
    let mut bits = Vec::with_capacity(latent.len() * l);
    for &z in latent.values() {
        let y = region_index(z, window.regions());
        for j in (0..l).rev() {
            bits.push(((y >> j) & 1) as u8);
        }
    }
    Ciphertext {
        bits: BitString::from_bits(bits).expect("bits are 0/1"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cipher::{encrypt_bits, keygen};
    use proptest::prelude::*;

    // Reference values computed with a 50-digit arbitrary-precision evaluation
    // of the normal quantile/CDF.
    const PPF_CASES: [(f64, f64); 8] = [
        (0.25, -0.6744897501960817),
        (0.65, 0.3853204664075676),
        (0.875, 1.150349380376008),
        (0.975, 1.9599639845400542),
        (0.01, -2.326347874040841),
        (1e-12, -7.034483825301132),
        (1e-6, -4.753424308822899),
        (0.001, -3.0902323061678136),
    ];
    const CDF_CASES: [(f64, f64); 5] = [
        (1.0, 0.8413447460685429),
        (1.959964, 0.9750000009035576),
        (2.0, 0.9772498680518208),
        (-3.0, 0.0013498980316300945),
        (7.0, 0.9999999999987202),
    ];

    #[test]
    fn ppf_matches_reference_within_1e9() {
        for (p, want) in PPF_CASES {
            let got = normal_ppf(p).unwrap();
            assert!(
                (got - want).abs() <= 1e-9,
                "ppf({p}) = {got}, want {want}"
            );
        }
        assert_eq!(normal_ppf(0.5).unwrap(), 0.0);
    }

    #[test]
    fn cdf_matches_reference_within_1e12() {
        for (x, want) in CDF_CASES {
            let got = normal_cdf(x);
            assert!(
                (got - want).abs() <= 1e-12,
                "cdf({x}) = {got}, want {want}"
            );
        }
        assert_eq!(normal_cdf(0.0), 0.5);
    }

    #[test]
    fn ppf_rejects_closed_endpoints() {
        assert!(normal_ppf(0.0).is_err());
        assert!(normal_ppf(1.0).is_err());
        assert!(normal_ppf(-0.5).is_err());
        assert!(normal_ppf(f64::NAN).is_err());
    }

    #[test]
    fn ppf_symmetry() {
        // dyadic p: 1-p is exactly representable, so the reflection is exact
        for p in [0.25, 0.125, 0.0625, 2f64.powi(-20), 2f64.powi(-40)] {
            assert_eq!(normal_ppf(p).unwrap(), -normal_ppf(1.0 - p).unwrap());
        }
        // non-dyadic central p: limited only by rounding of the complement
        for p in [0.3, 0.45, 0.49] {
            let lo = normal_ppf(p).unwrap();
            let hi = normal_ppf(1.0 - p).unwrap();
            assert!((lo + hi).abs() < 1e-13, "asymmetry at p={p}");
        }
    }

    #[test]
    fn cdf_ppf_inverse_pair() {
        for i in 1..100 {
            let p = i as f64 / 100.0;
            let back = normal_cdf(normal_ppf(p).unwrap());
            assert!((back - p).abs() <= 1e-8, "cdf(ppf({p})) = {back}");
        }
    }

    #[test]
    fn sign_rule_at_window_one() {
        let w = WindowConfig::new(1).unwrap();
        let lat = LatentVector::new(vec![-0.1, 0.1]).unwrap();
        let c = reverse_sample(&lat, w);
        assert_eq!(c.bits.as_slice(), &[0, 1]);
    }

    #[test]
    fn spec_sampling_examples() {
        // l=1, bit 1, u=0.3 -> ppf(0.65); l=2, bits 11, u=0.5 -> ppf(0.875)
        let z = normal_ppf((1.0 + 0.3) / 2.0).unwrap();
        assert!((z - 0.38532).abs() < 1e-5);
        let z = normal_ppf((3.0 + 0.5) / 4.0).unwrap();
        assert!((z - 1.15035).abs() < 1e-5);
    }

    #[test]
    fn bit_value_fixes_sign() {
        let w = WindowConfig::new(1).unwrap();
        let mut u = UniformSource::new(5);
        let zeros = Ciphertext {
            bits: BitString::zeros(64),
        };
        let lat = sample_latent(&zeros, w, &mut u).unwrap();
        assert!(lat.values().iter().all(|&z| z < 0.0));
        let ones = Ciphertext {
            bits: BitString::from_bits(vec![1; 64]).unwrap(),
        };
        let lat = sample_latent(&ones, w, &mut u).unwrap();
        assert!(lat.values().iter().all(|&z| z > 0.0));
    }

    #[test]
    fn latents_are_always_finite() {
        let mut u = UniformSource::new(99);
        let w = WindowConfig::new(16).unwrap();
        let c = Ciphertext {
            bits: BitString::from_bits(vec![1; 16 * 32]).unwrap(),
        };
        let lat = sample_latent(&c, w, &mut u).unwrap();
        assert!(lat.values().iter().all(|v| v.is_finite()));
    }

    #[test]
    fn odd_length_is_zero_padded() {
        let w = WindowConfig::new(4).unwrap();
        let mut u = UniformSource::new(1);
        let c = Ciphertext {
            bits: BitString::from_bits(vec![1, 0, 1, 1, 1, 1]).unwrap(),
        };
        let lat = sample_latent(&c, w, &mut u).unwrap();
        assert_eq!(lat.len(), 2);
        let mut back = reverse_sample(&lat, w);
        assert_eq!(back.len(), 8);
        back.bits.truncate(6);
        assert_eq!(back.bits, c.bits);
    }

    #[test]
    fn monotone_in_region_and_offset() {
        let mut prev = f64::NEG_INFINITY;
        for y in 0..4 {
            for u in [0.1, 0.5, 0.9] {
                let z = normal_ppf((y as f64 + u) / 4.0).unwrap();
                assert!(z > prev);
                prev = z;
            }
        }
    }

    proptest! {
        #[test]
        fn exact_inversion(seed in any::<u64>(), key_seed in any::<u64>(), l in 1u8..=4) {
            let w = WindowConfig::new(l).unwrap();
            let key = keygen(Some(key_seed)).unwrap();
            let n_bits = 120usize;
            let plain = BitString::zeros(n_bits);
            let cipher = encrypt_bits(&plain, &key);
            let mut u = UniformSource::new(seed);
            let lat = sample_latent(&cipher, w, &mut u).unwrap();
            let back = reverse_sample(&lat, w);
            prop_assert_eq!(back.bits, cipher.bits);
        }
    }
}
