//! Inner product and L2-rearrangement distance on bit arrays, and their
//! sliding-window forms.
//!
//! The L2-rearrangement distance between equal-length strings `a` and `b` is
//! the minimum of `sum_j (j - pi(j))^2` over permutations `pi` with
//! `a[pi(j)] = b[j]` for all `j`, and is infinite when no such `pi` exists.
//! The optimum pairs the k-th one of `b` with the k-th one of `a` (and the
//! same for zeros), which is what [`l2_rearrangement`] evaluates. The
//! definitional minimisation lives in [`l2_bruteforce`] for cross-checking.

use std::fmt;

use serde::{Serialize, Serializer};

use crate::bits::BitArray;
use crate::error::{Error, Result};
use crate::geometry::floor_lg;

/// A rearrangement cost, or infinity when the strings cannot be rearranged
/// into each other.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Distance {
    Finite(u64),
    Infinite,
}

impl Distance {
    pub fn is_finite(self) -> bool {
        matches!(self, Distance::Finite(_))
    }

    pub fn finite(self) -> Option<u64> {
        match self {
            Distance::Finite(v) => Some(v),
            Distance::Infinite => None,
        }
    }
}

impl fmt::Display for Distance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Distance::Finite(v) => write!(f, "{v}"),
            Distance::Infinite => f.write_str("inf"),
        }
    }
}

/// Finite values serialise as JSON numbers, infinity as the string `"inf"`.
impl Serialize for Distance {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Distance::Finite(v) => s.serialize_u64(*v),
            Distance::Infinite => s.serialize_str("inf"),
        }
    }
}

fn check_equal_len(a: &BitArray, b: &BitArray) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::invalid(format!(
            "length mismatch: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    Ok(())
}

pub fn inner_product(a: &BitArray, b: &BitArray) -> Result<u64> {
    check_equal_len(a, b)?;
    Ok(a.words()
        .iter()
        .zip(b.words())
        .map(|(x, y)| u64::from((x & y).count_ones()))
        .sum())
}

/// `out[i] = sum_j haystack[i + j] * needle[j]` for every full placement of
/// `needle` inside `haystack`.
pub fn sliding_dot(haystack: &[i64], needle: &[i64]) -> Result<Vec<i64>> {
    if needle.len() > haystack.len() {
        return Err(Error::invalid(format!(
            "needle of length {} longer than haystack of length {}",
            needle.len(),
            haystack.len()
        )));
    }
    (0..=haystack.len() - needle.len())
        .map(|i| {
            haystack[i..i + needle.len()]
                .iter()
                .zip(needle)
                .try_fold(0i64, |acc, (h, n)| {
                    h.checked_mul(*n)
                        .and_then(|p| acc.checked_add(p))
                        .ok_or(Error::Overflow("sliding_dot"))
                })
        })
        .collect()
}

fn to_ints(bits: &BitArray) -> Vec<i64> {
    bits.iter().map(i64::from).collect()
}

/// The sliding inner product of `needle` against every window of `pattern`.
pub fn slide_conv(pattern: &BitArray, needle: &BitArray) -> Result<Vec<u64>> {
    let raw = sliding_dot(&to_ints(pattern), &to_ints(needle))?;
    Ok(raw.into_iter().map(|v| v as u64).collect())
}

/// Ascending positions of zeros and ones, indexed by the bit value.
fn split_positions(bits: &BitArray) -> [Vec<usize>; 2] {
    let mut out = [Vec::new(), Vec::new()];
    for (i, b) in bits.iter().enumerate() {
        out[usize::from(b)].push(i);
    }
    out
}

fn squared_gap(x: usize, y: usize) -> Result<u128> {
    let d = x.abs_diff(y) as u128;
    d.checked_mul(d).ok_or(Error::Overflow("l2 displacement"))
}

pub fn l2_rearrangement(a: &BitArray, b: &BitArray) -> Result<Distance> {
    check_equal_len(a, b)?;
    if a.count_ones() != b.count_ones() {
        return Ok(Distance::Infinite);
    }
    let pa = split_positions(a);
    let pb = split_positions(b);
    let mut total: u128 = 0;
    for sym in 0..2 {
        for (&x, &y) in pa[sym].iter().zip(&pb[sym]) {
            total = total
                .checked_add(squared_gap(x, y)?)
                .ok_or(Error::Overflow("l2 sum"))?;
        }
    }
    u64::try_from(total)
        .map(Distance::Finite)
        .map_err(|_| Error::Overflow("l2 sum"))
}

pub const BRUTEFORCE_MAX_LEN: usize = 10;

/// Minimises over every permutation that carries `a` onto `b`, by depth-first
/// assignment of `pi(0), pi(1), ...` restricted to matching symbols.
pub fn l2_bruteforce(a: &BitArray, b: &BitArray) -> Result<Distance> {
    check_equal_len(a, b)?;
    if a.len() > BRUTEFORCE_MAX_LEN {
        return Err(Error::OracleScaleExceeded {
            len: a.len(),
            limit: BRUTEFORCE_MAX_LEN,
        });
    }
    let a: Vec<bool> = a.iter().collect();
    let b: Vec<bool> = b.iter().collect();

    fn search(j: usize, a: &[bool], b: &[bool], used: u32, cost: u64, best: &mut Option<u64>) {
        if j == b.len() {
            *best = Some(best.map_or(cost, |v| v.min(cost)));
            return;
        }
        for (src, &sym) in a.iter().enumerate() {
            if used & (1 << src) == 0 && sym == b[j] {
                let d = j.abs_diff(src) as u64;
                search(j + 1, a, b, used | (1 << src), cost + d * d, best);
            }
        }
    }

    let mut best = None;
    search(0, &a, &b, 0, 0, &mut best);
    Ok(best.map_or(Distance::Infinite, Distance::Finite))
}

/// Squared displacement of each position of `b` under the optimal
/// rearrangement onto `a`: the k-th one (zero) of `b` is moved to the k-th
/// one (zero) of `a`. The profile sums to [`l2_rearrangement`].
pub fn contribution_profile(a: &BitArray, b: &BitArray) -> Result<Vec<u64>> {
    check_equal_len(a, b)?;
    if a.count_ones() != b.count_ones() {
        return Err(Error::NoValidPermutation);
    }
    let targets = split_positions(a);
    let mut rank = [0usize; 2];
    b.iter()
        .enumerate()
        .map(|(i, sym)| {
            let s = usize::from(sym);
            let dest = targets[s][rank[s]];
            rank[s] += 1;
            squared_gap(i, dest)
                .and_then(|v| u64::try_from(v).map_err(|_| Error::Overflow("contribution")))
        })
        .collect()
}

/// L2 distances of `needle` against every fourth window of `pattern`.
///
/// `pattern` must be `ell` longer than `needle`, `needle` must have length
/// `ell * floor(lg ell)`, and `ell` must be a positive multiple of four. The
/// result has `ell / 4` entries; entry `i` compares `pattern[4i ..]`.
pub fn slide_l2(pattern: &BitArray, needle: &BitArray) -> Result<Vec<Distance>> {
    let ell = pattern
        .len()
        .checked_sub(needle.len())
        .filter(|&e| e > 0)
        .ok_or_else(|| Error::invalid("pattern must be longer than the needle"))?;
    if ell % 4 != 0 {
        return Err(Error::invalid(format!(
            "ell = {ell} is not a multiple of 4"
        )));
    }
    let expected = ell * floor_lg(ell as u128) as usize;
    if needle.len() != expected {
        return Err(Error::invalid(format!(
            "needle has length {}, expected ell * lg ell = {expected}",
            needle.len()
        )));
    }
    (0..ell / 4)
        .map(|i| l2_rearrangement(&pattern.slice(4 * i..4 * i + needle.len()), needle))
        .collect()
}
