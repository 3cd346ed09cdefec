//! Bitstream randomization with the ChaCha20 stream cipher (RFC 8439: 256-bit
//! key, 96-bit nonce, 32-bit block counter). Encryption and decryption are the
//! same XOR against the keystream, so the layer is exactly invertible and
//! Hamming distances survive it unchanged.

use rand::{RngCore, SeedableRng, TryRngCore};
use rand_chacha::ChaCha12Rng;

use crate::codec::BitString;
use crate::error::{Error, Result};

pub const KEY_LEN: usize = 32;
pub const NONCE_LEN: usize = 12;

/// "expand 32-byte k"
const SIGMA: [u32; 4] = [0x6170_7865, 0x3320_646e, 0x7962_2d32, 0x6b20_6574];

/// Cipher key plus the per-sample nonce identifying one watermarked latent.
#[derive(Clone, PartialEq, Eq)]
pub struct KeyMaterial {
    pub key: [u8; KEY_LEN],
    pub nonce: [u8; NONCE_LEN],
}

impl std::fmt::Debug for KeyMaterial {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        // avoid leaking the key through debug logs
        write!(f, "KeyMaterial(nonce={})", hex::encode(self.nonce))
    }
}

impl KeyMaterial {
    pub fn new(key: [u8; KEY_LEN], nonce: [u8; NONCE_LEN]) -> Self {
        Self { key, nonce }
    }

    pub fn from_hex(key_hex: &str, nonce_hex: &str) -> Result<Self> {
        let key_bytes = hex::decode(key_hex).map_err(|e| Error::InvalidHex {
            field: "key",
            reason: e.to_string(),
        })?;
        let nonce_bytes = hex::decode(nonce_hex).map_err(|e| Error::InvalidHex {
            field: "nonce",
            reason: e.to_string(),
        })?;
        let key: [u8; KEY_LEN] = key_bytes.try_into().map_err(|_| Error::InvalidHex {
            field: "key",
            reason: format!("expected {} hex chars", KEY_LEN * 2),
        })?;
        let nonce: [u8; NONCE_LEN] = nonce_bytes.try_into().map_err(|_| Error::InvalidHex {
            field: "nonce",
            reason: format!("expected {} hex chars", NONCE_LEN * 2),
        })?;
        Ok(Self { key, nonce })
    }

    pub fn key_hex(&self) -> String {
        hex::encode(self.key)
    }

    pub fn nonce_hex(&self) -> String {
        hex::encode(self.nonce)
    }

    /// Same key, different nonce.
    pub fn with_nonce(&self, nonce: [u8; NONCE_LEN]) -> Self {
        Self {
            key: self.key,
            nonce,
        }
    }
}

/// Generate key material. With a seed the output is reproducible; without,
/// bytes come from the operating system entropy source.
pub fn keygen(seed: Option<u64>) -> Result<KeyMaterial> {
    let mut key = [0u8; KEY_LEN];
    let mut nonce = [0u8; NONCE_LEN];
    match seed {
        Some(seed) => {
            let mut rng = ChaCha12Rng::seed_from_u64(seed);
            rng.fill_bytes(&mut key);
            rng.fill_bytes(&mut nonce);
        }
        None => {
            let mut os = rand::rngs::OsRng;
            os.try_fill_bytes(&mut key)
                .map_err(|e| Error::EntropyFailure(e.to_string()))?;
            os.try_fill_bytes(&mut nonce)
                .map_err(|e| Error::EntropyFailure(e.to_string()))?;
        }
    }
    Ok(KeyMaterial::new(key, nonce))
}

/// Encrypted bitstream; same length as the plaintext it came from.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Ciphertext {
    pub bits: BitString,
}

impl Ciphertext {
    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }
}

fn quarter_round(state: &mut [u32; 16], a: usize, b: usize, c: usize, d: usize) {
    state[a] = state[a].wrapping_add(state[b]);
    state[d] = (state[d] ^ state[a]).rotate_left(16);
    state[c] = state[c].wrapping_add(state[d]);
    state[b] = (state[b] ^ state[c]).rotate_left(12);
    state[a] = state[a].wrapping_add(state[b]);
    state[d] = (state[d] ^ state[a]).rotate_left(8);
    state[c] = state[c].wrapping_add(state[d]);
    state[b] = (state[b] ^ state[c]).rotate_left(7);
}

/// One 64-byte ChaCha20 block for the given key, nonce, and block counter.
pub fn chacha20_block(key: &[u8; KEY_LEN], nonce: &[u8; NONCE_LEN], counter: u32) -> [u8; 64] {
    let mut state = [0u32; 16];
    state[..4].copy_from_slice(&SIGMA);
    for (v, chunk) in state[4..12].iter_mut().zip(key.chunks_exact(4)) {
        *v = u32::from_le_bytes(chunk.try_into().unwrap());
    }
    state[12] = counter;
    for (v, chunk) in state[13..16].iter_mut().zip(nonce.chunks_exact(4)) {
        *v = u32::from_le_bytes(chunk.try_into().unwrap());
    }

    let mut working = state;
    for _ in 0..10 {
        quarter_round(&mut working, 0, 4, 8, 12);
        quarter_round(&mut working, 1, 5, 9, 13);
        quarter_round(&mut working, 2, 6, 10, 14);
        quarter_round(&mut working, 3, 7, 11, 15);
        quarter_round(&mut working, 0, 5, 10, 15);
        quarter_round(&mut working, 1, 6, 11, 12);
        quarter_round(&mut working, 2, 7, 8, 13);
        quarter_round(&mut working, 3, 4, 9, 14);
    }

    let mut out = [0u8; 64];
    for (i, (w, s)) in working.iter().zip(state.iter()).enumerate() {
        out[i * 4..i * 4 + 4].copy_from_slice(&w.wrapping_add(*s).to_le_bytes());
    }
    out
}

/// `len` keystream bytes starting at `initial_counter`. The counter wraps per
/// RFC semantics; at 500-bit capacities only a single block is ever consumed.
pub fn keystream_bytes(
    key: &KeyMaterial,
    initial_counter: u32,
    len: usize,
) -> Vec<u8> {
    let mut out = Vec::with_capacity(len);
    let mut counter = initial_counter;
    while out.len() < len {
        let block = chacha20_block(&key.key, &key.nonce, counter);
        let take = (len - out.len()).min(64);
        out.extend_from_slice(&block[..take]);
        counter = counter.wrapping_add(1);
    }
    out
}

/// XOR the bitstream against the keystream (block counter 0, keystream bytes
/// expanded MSB-first). Capacities that are not whole bytes consume
/// `ceil(n/8)` keystream bytes and use the first `n` bits.
pub fn encrypt_bits(plain: &BitString, key: &KeyMaterial) -> Ciphertext {
    let ks = keystream_bytes(key, 0, plain.len().div_ceil(8));
    let ks_bits = BitString::unpack(&ks, plain.len()).expect("keystream long enough");
    Ciphertext {
        bits: plain.xor(&ks_bits).expect("equal lengths"),
    }
}

/// Inverse of [`encrypt_bits`]; the identical XOR operation.
pub fn decrypt_bits(cipher: &Ciphertext, key: &KeyMaterial) -> BitString {
    encrypt_bits(&cipher.bits, key).bits
}
