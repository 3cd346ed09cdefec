//! Message codec: replication + zero padding on the way in, per-bit majority
//! voting on the way out, plus the MSB-first bit/byte packing convention used
//! throughout the crate.

use crate::error::{Error, Result};

/// Ordered finite sequence of bits. The unit that flows through the codec,
/// the cipher layer, and the Gaussian sampler.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct BitString {
    bits: Vec<u8>,
}

impl std::fmt::Debug for BitString {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "BitString(\"")?;
        for b in &self.bits {
            write!(f, "{b}")?;
        }
        write!(f, "\")")
    }
}

impl std::fmt::Display for BitString {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for b in &self.bits {
            write!(f, "{b}")?;
        }
        Ok(())
    }
}

impl BitString {
    /// Build from raw 0/1 values, rejecting anything else.
    pub fn from_bits(bits: Vec<u8>) -> Result<Self> {
        for (index, &value) in bits.iter().enumerate() {
            if value > 1 {
                return Err(Error::InvalidBit { index, value });
            }
        }
        Ok(Self { bits })
    }

    pub fn zeros(len: usize) -> Self {
        Self { bits: vec![0; len] }
    }

    /// Parse a string of '0'/'1' characters.
    pub fn parse_binary(s: &str) -> Result<Self> {
        let mut bits = Vec::with_capacity(s.len());
        for (index, ch) in s.chars().enumerate() {
            match ch {
                '0' => bits.push(0),
                '1' => bits.push(1),
                _ => return Err(Error::InvalidBit { index, value: 255 }),
            }
        }
        Ok(Self { bits })
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn as_slice(&self) -> &[u8] {
        &self.bits
    }

    pub fn iter(&self) -> std::slice::Iter<'_, u8> {
        self.bits.iter()
    }

    pub fn get(&self, i: usize) -> Option<u8> {
        self.bits.get(i).copied()
    }

    pub(crate) fn truncate(&mut self, len: usize) {
        self.bits.truncate(len);
    }

    /// Bitwise XOR of two equal-length strings.
    pub fn xor(&self, other: &BitString) -> Result<BitString> {
        if self.len() != other.len() {
            return Err(Error::LengthMismatch {
                expected: self.len(),
                actual: other.len(),
            });
        }
        let bits = self
            .bits
            .iter()
            .zip(&other.bits)
            .map(|(a, b)| a ^ b)
            .collect();
        Ok(BitString { bits })
    }

    /// Number of positions at which the two strings differ.
    pub fn hamming(&self, other: &BitString) -> Result<u64> {
        if self.len() != other.len() {
            return Err(Error::LengthMismatch {
                expected: self.len(),
                actual: other.len(),
            });
        }
        Ok(self
            .bits
            .iter()
            .zip(&other.bits)
            .filter(|(a, b)| a != b)
            .count() as u64)
    }

    /// Pack into bytes, MSB-first within each byte; the final byte is padded
    /// with trailing zero bits.
    pub fn pack(&self) -> Vec<u8> {
        let mut bytes = vec![0u8; self.bits.len().div_ceil(8)];
        for (i, &b) in self.bits.iter().enumerate() {
            if b == 1 {
                bytes[i / 8] |= 0x80 >> (i % 8);
            }
        }
        bytes
    }

    /// Inverse of [`pack`](Self::pack): take `n_bits` bits MSB-first from
    /// `bytes`. Errors if `bytes` is too short.
    pub fn unpack(bytes: &[u8], n_bits: usize) -> Result<Self> {
        if bytes.len() < n_bits.div_ceil(8) {
            return Err(Error::LengthMismatch {
                expected: n_bits.div_ceil(8),
                actual: bytes.len(),
            });
        }
        let bits = (0..n_bits)
            .map(|i| (bytes[i / 8] >> (7 - i % 8)) & 1)
            .collect();
        Ok(Self { bits })
    }
}

/// A user message together with its bit payload. When built from text, the
/// payload is the UTF-8 byte expansion, MSB-first per byte.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WatermarkMessage {
    payload: BitString,
    origin_text: Option<String>,
}

impl WatermarkMessage {
    pub fn from_text(text: &str) -> Result<Self> {
        if text.is_empty() {
            return Err(Error::EmptyMessage);
        }
        let bytes = text.as_bytes();
        let payload = BitString::unpack(bytes, bytes.len() * 8).expect("exact byte expansion");
        Ok(Self {
            payload,
            origin_text: Some(text.to_string()),
        })
    }

    pub fn from_bits(payload: BitString) -> Result<Self> {
        if payload.is_empty() {
            return Err(Error::EmptyMessage);
        }
        Ok(Self {
            payload,
            origin_text: None,
        })
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.is_empty() {
            return Err(Error::EmptyMessage);
        }
        Self::from_bits(BitString::unpack(bytes, bytes.len() * 8)?)
    }

    pub fn payload(&self) -> &BitString {
        &self.payload
    }

    pub fn m_bits(&self) -> usize {
        self.payload.len()
    }

    pub fn origin_text(&self) -> Option<&str> {
        self.origin_text.as_deref()
    }

    /// Decode the payload back to text, if it is whole bytes of valid UTF-8.
    pub fn decode_text(&self) -> Option<String> {
        if !self.payload.len().is_multiple_of(8) {
            return None;
        }
        String::from_utf8(self.payload.pack()).ok()
    }
}

/// How an `m`-bit message maps onto an `n`-bit capacity: whole replicas
/// followed by zero padding.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CapacityLayout {
    pub n_bits: usize,
    pub m_bits: usize,
    pub replicas: usize,
    pub pad_bits: usize,
}

impl CapacityLayout {
    pub fn new(n_bits: usize, m_bits: usize) -> Result<Self> {
        if m_bits == 0 || n_bits < m_bits {
            return Err(Error::CapacityTooSmall { n_bits, m_bits });
        }
        Ok(Self {
            n_bits,
            m_bits,
            replicas: n_bits / m_bits,
            pad_bits: n_bits % m_bits,
        })
    }
}

/// Repeat `message` `floor(n/m)` times and pad with zeros to exactly
/// `n_bits`.
pub fn expand(message: &WatermarkMessage, n_bits: usize) -> Result<BitString> {
    let layout = CapacityLayout::new(n_bits, message.m_bits())?;
    let mut bits = Vec::with_capacity(n_bits);
    for _ in 0..layout.replicas {
        bits.extend_from_slice(message.payload().as_slice());
    }
    bits.resize(n_bits, 0);
    BitString::from_bits(bits)
}

/// Recover an `m_bits` message from an expanded plaintext by strict majority
/// vote over each bit's replicas. An exact tie votes 0; pad bits carry no
/// votes.
pub fn aggregate(plain: &BitString, m_bits: usize) -> Result<BitString> {
    let layout = CapacityLayout::new(plain.len(), m_bits)?;
    let mut out = Vec::with_capacity(m_bits);
    for i in 0..m_bits {
        let ones: usize = (0..layout.replicas)
            .map(|j| plain.get(j * m_bits + i).unwrap() as usize)
            .sum();
        out.push(u8::from(2 * ones > layout.replicas));
    }
    BitString::from_bits(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn bs(s: &str) -> BitString {
        BitString::parse_binary(s).unwrap()
    }

    #[test]
    fn expand_replicates_and_pads() {
        let m = WatermarkMessage::from_bits(bs("10110011")).unwrap();
        let p = expand(&m, 20).unwrap();
        assert_eq!(p, bs("10110011101100110000"));
    }

    #[test]
    fn expand_500_bit_capacity_layout() {
        let layout = CapacityLayout::new(500, 8).unwrap();
        assert_eq!(layout.replicas, 62);
        assert_eq!(layout.pad_bits, 4);
        let m = WatermarkMessage::from_text("X").unwrap();
        let p = expand(&m, 500).unwrap();
        assert_eq!(p.len(), 500);
        // pad region is all zeros
        assert!(p.as_slice()[496..].iter().all(|&b| b == 0));
    }

    #[test]
    fn expand_single_bit_no_pad() {
        let m = WatermarkMessage::from_bits(bs("1")).unwrap();
        assert_eq!(expand(&m, 3).unwrap(), bs("111"));
    }

    #[test]
    fn expand_rejects_small_capacity() {
        let m = WatermarkMessage::from_text("X").unwrap();
        assert!(matches!(
            expand(&m, 7),
            Err(Error::CapacityTooSmall { .. })
        ));
    }

    #[test]
    fn aggregate_unanimous() {
        let p = bs("10110011101100110000");
        assert_eq!(aggregate(&p, 8).unwrap(), bs("10110011"));
    }

    #[test]
    fn aggregate_tie_votes_zero() {
        // n=7, m=3: replicas per bit {1,0},{1,1},{1,1}, one pad bit
        let p = bs("1110110");
        assert_eq!(aggregate(&p, 3).unwrap(), bs("011"));
    }

    #[test]
    fn aggregate_ignores_pad_bits() {
        // Flip the pad bit; the vote must not change.
        let p = bs("1110111");
        assert_eq!(aggregate(&p, 3).unwrap(), bs("011"));
    }

    #[test]
    fn pack_msb_first() {
        assert_eq!(bs("10000000").pack(), vec![0x80]);
        assert_eq!(bs("1").pack(), vec![0x80]);
        assert_eq!(bs("0000000011111111").pack(), vec![0x00, 0xFF]);
        assert_eq!(BitString::unpack(&[0x80], 1).unwrap(), bs("1"));
    }

    #[test]
    fn unpack_rejects_short_buffer() {
        assert!(BitString::unpack(&[0x00], 9).is_err());
    }

    #[test]
    fn message_from_text() {
        let m = WatermarkMessage::from_text("X").unwrap();
        assert_eq!(m.payload(), &bs("01011000")); // ASCII 0x58
        assert_eq!(m.decode_text().as_deref(), Some("X"));

        let w = WatermarkMessage::from_text("watermark").unwrap();
        assert_eq!(w.m_bits(), 72);
        let layout = CapacityLayout::new(500, 72).unwrap();
        assert_eq!((layout.replicas, layout.pad_bits), (6, 68));

        assert!(matches!(
            WatermarkMessage::from_text(""),
            Err(Error::EmptyMessage)
        ));
    }

    #[test]
    fn hamming_counts_differences() {
        assert_eq!(bs("1010").hamming(&bs("1010")).unwrap(), 0);
        assert_eq!(bs("1010").hamming(&bs("0101")).unwrap(), 4);
        assert!(bs("10").hamming(&bs("100")).is_err());
    }

    proptest! {
        #[test]
        fn noiseless_roundtrip(payload in proptest::collection::vec(0u8..=1, 1..40),
                               extra in 0usize..200) {
            let m = WatermarkMessage::from_bits(BitString::from_bits(payload).unwrap()).unwrap();
            let n = m.m_bits() + extra;
            let p = expand(&m, n).unwrap();
            prop_assert_eq!(p.len(), n);
            prop_assert_eq!(&aggregate(&p, m.m_bits()).unwrap(), m.payload());
        }

        #[test]
        fn pack_unpack_identity(payload in proptest::collection::vec(0u8..=1, 1..=64)) {
            let b = BitString::from_bits(payload).unwrap();
            let packed = b.pack();
            prop_assert_eq!(BitString::unpack(&packed, b.len()).unwrap(), b);
        }
    }
}
