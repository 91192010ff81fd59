//! Classical register states.
//!
//! Qubits are numbered `0..n` and qubit 0 is the most significant bit of the
//! integer index, so `BitString::parse("1000")` has index 8 and prints in the
//! same `x_1 ... x_n` order used for matrix labels.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Largest register the index type supports. Dense matrices stop being
/// practical long before this.
pub const MAX_QUBITS: usize = 30;

#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BitString {
    n: usize,
    index: usize,
}

impl BitString {
    pub fn new(n: usize, index: usize) -> Result<Self> {
        if n == 0 || n > MAX_QUBITS {
            return Err(Error::InvalidArgument(format!(
                "register size {n} outside 1..={MAX_QUBITS}"
            )));
        }
        if index >= 1 << n {
            return Err(Error::InvalidArgument(format!(
                "index {index} out of range for {n} qubits"
            )));
        }
        Ok(Self { n, index })
    }

    /// Caller guarantees `index < 2^n`.
    pub(crate) fn from_index(n: usize, index: usize) -> Self {
        debug_assert!(index < 1 << n);
        Self { n, index }
    }

    pub fn zeros(n: usize) -> Self {
        Self::from_index(n, 0)
    }

    pub fn from_bits(bits: &[u8]) -> Result<Self> {
        let mut index = 0usize;
        for &b in bits {
            if b > 1 {
                return Err(Error::InvalidBitString(format!("{bits:?}")));
            }
            index = (index << 1) | b as usize;
        }
        Self::new(bits.len(), index)
    }

    pub fn parse(s: &str) -> Result<Self> {
        let bits = s
            .chars()
            .map(|c| match c {
                '0' => Ok(0u8),
                '1' => Ok(1u8),
                _ => Err(Error::InvalidBitString(s.to_string())),
            })
            .collect::<Result<Vec<_>>>()?;
        if bits.is_empty() {
            return Err(Error::InvalidBitString(s.to_string()));
        }
        Self::from_bits(&bits)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn index(&self) -> usize {
        self.index
    }

    /// Bit mask selecting qubit `q` within the index.
    #[inline]
    pub fn mask_of(n: usize, q: usize) -> usize {
        1 << (n - 1 - q)
    }

    #[inline]
    pub fn bit(&self, q: usize) -> u8 {
        ((self.index >> (self.n - 1 - q)) & 1) as u8
    }

    pub fn bits(&self) -> Vec<u8> {
        (0..self.n).map(|q| self.bit(q)).collect()
    }

    pub fn flipped(&self, q: usize) -> Self {
        Self::from_index(self.n, self.index ^ Self::mask_of(self.n, q))
    }

    pub fn with_bit(&self, q: usize, value: u8) -> Self {
        let m = Self::mask_of(self.n, q);
        let index = if value == 0 { self.index & !m } else { self.index | m };
        Self::from_index(self.n, index)
    }

    /// Keep only the bits selected by `mask`, zeroing the rest.
    pub fn masked(&self, mask: usize) -> Self {
        Self::from_index(self.n, self.index & mask)
    }

    pub fn weight(&self) -> u32 {
        self.index.count_ones()
    }

    /// All `2^n` states in index order.
    pub fn all(n: usize) -> impl Iterator<Item = BitString> {
        (0..1usize << n).map(move |i| BitString::from_index(n, i))
    }
}

impl fmt::Display for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for q in 0..self.n {
            f.write_str(if self.bit(q) == 1 { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl fmt::Debug for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BitString({self})")
    }
}

impl FromStr for BitString {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::parse(s)
    }
}

impl Serialize for BitString {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for BitString {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        BitString::parse(&s).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn msb_first_convention() {
        let x = BitString::parse("1000").unwrap();
        assert_eq!(x.index(), 8);
        assert_eq!(x.bit(0), 1);
        assert_eq!(x.bits(), vec![1, 0, 0, 0]);
        assert_eq!(BitString::parse("0001").unwrap().index(), 1);
    }

    #[test]
    fn rejects_bad_strings() {
        assert!(BitString::parse("").is_err());
        assert!(BitString::parse("01a1").is_err());
        assert!(BitString::new(3, 8).is_err());
    }

    #[test]
    fn flip_and_set() {
        let x = BitString::zeros(4).flipped(2);
        assert_eq!(x.to_string(), "0010");
        assert_eq!(x.with_bit(2, 0), BitString::zeros(4));
        assert_eq!(x.with_bit(0, 1).to_string(), "1010");
    }

    proptest! {
        #[test]
        fn index_and_text_round_trip(n in 1usize..=12, seed in any::<usize>()) {
            let x = BitString::new(n, seed % (1 << n)).unwrap();
            let parsed = BitString::parse(&x.to_string()).unwrap();
            prop_assert_eq!(parsed, x);
            prop_assert_eq!(BitString::from_bits(&x.bits()).unwrap(), x);
        }
    }
}
