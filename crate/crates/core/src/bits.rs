//! Fixed-length packed bit arrays.
//!
//! Bits are stored least-significant-first in 64-bit words. The text form is
//! an ASCII `0`/`1` string with index 0 first; the binary form is an 8-byte
//! little-endian length header followed by the packed bytes (bit `i` lives in
//! byte `i / 8` at bit position `i % 8`).

use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use base64::engine::general_purpose::STANDARD;
use base64::Engine as _;

use crate::error::{Error, Result};

const WORD_BITS: usize = 64;

#[derive(Clone, Default, PartialEq, Eq, Hash)]
pub struct BitArray {
    words: Vec<u64>,
    len: usize,
}

impl BitArray {
    pub fn zeros(len: usize) -> Self {
        BitArray {
            words: vec![0; len.div_ceil(WORD_BITS)],
            len,
        }
    }

    pub fn from_bools<I: IntoIterator<Item = bool>>(bits: I) -> Self {
        let mut out = BitArray::default();
        for b in bits {
            out.push(b);
        }
        out
    }

    /// Builds `count` back-to-back copies of `unit` (an ASCII 0/1 string).
    ///
    /// Panics if `unit` contains anything other than `0` and `1`.
    pub fn repeat(unit: &str, count: usize) -> Self {
        let unit: BitArray = unit.parse().expect("repeat unit must be a 0/1 string");
        let mut out = BitArray::default();
        for _ in 0..count {
            out.extend_from(&unit);
        }
        out
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.len
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn get(&self, i: usize) -> bool {
        assert!(
            i < self.len,
            "bit index {i} out of range for length {}",
            self.len
        );
        (self.words[i / WORD_BITS] >> (i % WORD_BITS)) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, i: usize, value: bool) {
        assert!(
            i < self.len,
            "bit index {i} out of range for length {}",
            self.len
        );
        let mask = 1u64 << (i % WORD_BITS);
        if value {
            self.words[i / WORD_BITS] |= mask;
        } else {
            self.words[i / WORD_BITS] &= !mask;
        }
    }

    pub fn push(&mut self, value: bool) {
        if self.len.is_multiple_of(WORD_BITS) {
            self.words.push(0);
        }
        self.len += 1;
        self.set(self.len - 1, value);
    }

    pub fn extend_from(&mut self, other: &BitArray) {
        for b in other.iter() {
            self.push(b);
        }
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = bool> + '_ {
        (0..self.len).map(move |i| self.get(i))
    }

    /// Copies out `range` as a new array.
    pub fn slice(&self, range: Range<usize>) -> BitArray {
        assert!(
            range.start <= range.end && range.end <= self.len,
            "slice {range:?} out of range for length {}",
            self.len
        );
        let mut out = BitArray::zeros(range.end - range.start);
        for (dst, src) in range.enumerate() {
            if self.get(src) {
                out.set(dst, true);
            }
        }
        out
    }

    /// Overwrites `self[offset..offset + src.len()]` with `src`.
    pub fn write_at(&mut self, offset: usize, src: &BitArray) {
        assert!(offset + src.len() <= self.len, "write_at past end");
        for (i, b) in src.iter().enumerate() {
            self.set(offset + i, b);
        }
    }

    /// Ascending positions holding `value`.
    pub fn positions(&self, value: bool) -> Vec<usize> {
        (0..self.len).filter(|&i| self.get(i) == value).collect()
    }

    pub(crate) fn words(&self) -> &[u64] {
        &self.words
    }

    /// Drops the first bit and appends `value`, keeping the length fixed.
    pub(crate) fn shift_in(&mut self, value: bool) {
        if self.len == 0 {
            return;
        }
        let n = self.words.len();
        for w in 0..n {
            let carry = if w + 1 < n { self.words[w + 1] & 1 } else { 0 };
            self.words[w] = (self.words[w] >> 1) | (carry << (WORD_BITS - 1));
        }
        // Clear whatever the carry chain dragged past the logical end.
        let tail = self.len % WORD_BITS;
        if tail != 0 {
            self.words[n - 1] &= (1u64 << tail) - 1;
        }
        self.set(self.len - 1, value);
    }

    pub fn to_packed_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(8 + self.len.div_ceil(8));
        out.extend_from_slice(&(self.len as u64).to_le_bytes());
        let body = self
            .words
            .iter()
            .flat_map(|w| w.to_le_bytes())
            .take(self.len.div_ceil(8));
        out.extend(body);
        out
    }

    pub fn from_packed_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 8 {
            return Err(Error::invalid(
                "packed bit array shorter than its length header",
            ));
        }
        let (header, body) = bytes.split_at(8);
        let len = u64::from_le_bytes(header.try_into().expect("8-byte header"));
        let len = usize::try_from(len).map_err(|_| Error::invalid("bit length exceeds usize"))?;
        if body.len() != len.div_ceil(8) {
            return Err(Error::invalid(format!(
                "packed body has {} bytes, length {len} needs {}",
                body.len(),
                len.div_ceil(8)
            )));
        }
        let mut out = BitArray::zeros(len);
        for (i, chunk) in body.chunks(8).enumerate() {
            let mut word = [0u8; 8];
            word[..chunk.len()].copy_from_slice(chunk);
            out.words[i] = u64::from_le_bytes(word);
        }
        let tail = len % WORD_BITS;
        if tail != 0 && out.words[out.words.len() - 1] >> tail != 0 {
            return Err(Error::invalid(
                "packed bit array has bits set past its length",
            ));
        }
        Ok(out)
    }

    pub fn to_base64(&self) -> String {
        STANDARD.encode(self.to_packed_bytes())
    }

    pub fn from_base64(text: &str) -> Result<Self> {
        let bytes = STANDARD
            .decode(text)
            .map_err(|e| Error::invalid(format!("bad base64: {e}")))?;
        Self::from_packed_bytes(&bytes)
    }
}

impl FromStr for BitArray {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut out = BitArray::default();
        for (i, c) in s.chars().enumerate() {
            match c {
                '0' => out.push(false),
                '1' => out.push(true),
                other => {
                    return Err(Error::invalid(format!(
                        "character {other:?} at position {i} is not 0 or 1"
                    )))
                }
            }
        }
        Ok(out)
    }
}

impl fmt::Display for BitArray {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in self.iter() {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl fmt::Debug for BitArray {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BitArray({self})")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn parse_and_display() {
        let b: BitArray = "0110".parse().unwrap();
        assert_eq!(b.len(), 4);
        assert!(!b.get(0) && b.get(1) && b.get(2) && !b.get(3));
        assert_eq!(b.to_string(), "0110");
        assert!("01x".parse::<BitArray>().is_err());
    }

    #[test]
    fn shift_in_across_word_boundary() {
        let mut b = BitArray::zeros(130);
        b.set(64, true);
        b.set(0, true);
        b.shift_in(true);
        assert_eq!(b.len(), 130);
        assert!(b.get(63));
        assert!(b.get(129));
        assert_eq!(b.count_ones(), 2);
    }

    #[test]
    fn packed_rejects_stray_high_bits() {
        let mut bytes = BitArray::zeros(3).to_packed_bytes();
        bytes[8] = 0b1000;
        assert!(BitArray::from_packed_bytes(&bytes).is_err());
    }

    #[test]
    fn packed_layout_is_lsb_first() {
        let b: BitArray = "100000001".parse().unwrap();
        let bytes = b.to_packed_bytes();
        assert_eq!(&bytes[..8], &9u64.to_le_bytes());
        assert_eq!(&bytes[8..], &[0b1, 0b1]);
    }

    proptest! {
        #[test]
        fn base64_round_trip(bits in proptest::collection::vec(any::<bool>(), 0..300)) {
            let b = BitArray::from_bools(bits.iter().copied());
            let back = BitArray::from_base64(&b.to_base64()).unwrap();
            prop_assert_eq!(back, b);
        }

        #[test]
        fn shift_in_matches_vec_model(bits in proptest::collection::vec(any::<bool>(), 1..200), x: bool) {
            let mut b = BitArray::from_bools(bits.iter().copied());
            b.shift_in(x);
            let mut model = bits[1..].to_vec();
            model.push(x);
            prop_assert_eq!(b, BitArray::from_bools(model));
        }
    }
}
