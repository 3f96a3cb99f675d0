use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BitsError {
    #[error("length mismatch: {left} vs {right} bits")]
    LengthMismatch { left: usize, right: usize },
    #[error("invalid bit character {0:?}")]
    InvalidChar(char),
    #[error("truncated serialization")]
    Truncated,
}

/// Ordered sequence of classical bits.
#[derive(Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Bitstring(Vec<bool>);

impl Bitstring {
    pub fn new() -> Self {
        Self(Vec::new())
    }

    pub fn zeros(len: usize) -> Self {
        Self(vec![false; len])
    }

    pub fn ones(len: usize) -> Self {
        Self(vec![true; len])
    }

    pub fn from_bits(bits: Vec<bool>) -> Self {
        Self(bits)
    }

    pub fn random<R: Rng + ?Sized>(len: usize, rng: &mut R) -> Self {
        Self((0..len).map(|_| rng.random::<bool>()).collect())
    }

    /// Big-endian `width`-bit encoding of `value`.
    pub fn from_u64(value: u64, width: usize) -> Self {
        Self(
            (0..width)
                .rev()
                .map(|i| i < 64 && value >> i & 1 == 1)
                .collect(),
        )
    }

    pub fn to_u64(&self) -> u64 {
        self.0
            .iter()
            .fold(0u64, |acc, &b| (acc << 1) | u64::from(b))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn bits(&self) -> &[bool] {
        &self.0
    }

    pub fn get(&self, i: usize) -> Option<bool> {
        self.0.get(i).copied()
    }

    pub fn set(&mut self, i: usize, bit: bool) {
        self.0[i] = bit;
    }

    pub fn flip(&mut self, i: usize) {
        self.0[i] = !self.0[i];
    }

    pub fn count_ones(&self) -> usize {
        self.0.iter().filter(|&&b| b).count()
    }

    pub fn xor(&self, other: &Bitstring) -> Result<Bitstring, BitsError> {
        if self.len() != other.len() {
            return Err(BitsError::LengthMismatch {
                left: self.len(),
                right: other.len(),
            });
        }
        Ok(Self(
            self.0.iter().zip(&other.0).map(|(a, b)| a ^ b).collect(),
        ))
    }

    /// `self ‖ other`.
    pub fn concat(&self, other: &Bitstring) -> Bitstring {
        let mut v = self.0.clone();
        v.extend_from_slice(&other.0);
        Self(v)
    }

    pub fn slice(&self, range: Range<usize>) -> Bitstring {
        Self(self.0[range].to_vec())
    }

    /// Splits into consecutive chunks of `size` bits; the last may be short.
    pub fn chunks(&self, size: usize) -> impl Iterator<Item = &[bool]> {
        self.0.chunks(size)
    }

    pub fn hamming_distance(&self, other: &Bitstring) -> Result<usize, BitsError> {
        Ok(self.xor(other)?.count_ones())
    }

    /// Packed bytes, most significant bit first, zero-padded at the end.
    pub fn to_bytes(&self) -> Vec<u8> {
        self.0
            .chunks(8)
            .map(|chunk| {
                chunk
                    .iter()
                    .enumerate()
                    .fold(0u8, |acc, (i, &b)| acc | (u8::from(b) << (7 - i)))
            })
            .collect()
    }

    /// Wire form: 8-byte big-endian bit count followed by the packed bytes.
    pub fn serialize(&self) -> Vec<u8> {
        let mut out = (self.len() as u64).to_be_bytes().to_vec();
        out.extend(self.to_bytes());
        out
    }

    pub fn deserialize(data: &[u8]) -> Result<Bitstring, BitsError> {
        let header: [u8; 8] = data
            .get(..8)
            .ok_or(BitsError::Truncated)?
            .try_into()
            .expect("8 bytes");
        let len = u64::from_be_bytes(header) as usize;
        let body = &data[8..];
        if body.len() != len.div_ceil(8) {
            return Err(BitsError::Truncated);
        }
        Ok(Self(
            (0..len)
                .map(|i| body[i / 8] >> (7 - i % 8) & 1 == 1)
                .collect(),
        ))
    }
}

impl fmt::Display for Bitstring {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.0 {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl fmt::Debug for Bitstring {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Bitstring({self})")
    }
}

impl FromStr for Bitstring {
    type Err = BitsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(BitsError::InvalidChar(other)),
            })
            .collect::<Result<Vec<_>, _>>()
            .map(Self)
    }
}

impl FromIterator<bool> for Bitstring {
    fn from_iter<I: IntoIterator<Item = bool>>(iter: I) -> Self {
        Self(iter.into_iter().collect())
    }
}

impl Serialize for Bitstring {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Bitstring {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}
