//! Interval and gap arithmetic for the information-transfer configurations.
//!
//! Every length is derived from the stream length `n`, which must be a power
//! of two between 2^16 and 2^64. Non-integer quantities are floored at the
//! point they are produced:
//!
//! * `n^{1/4} (lg n)^{2i}` is floored as a whole (exact integer fourth root);
//! * the largest exponent `i` is `floor(lg n / (4 lg lg n))`, evaluated
//!   exactly as the largest `i` with `(lg n)^{4i} <= n`;
//! * `lg ell` is `floor(log2 ell)`;
//! * the gap length `4 ell / lg n` and the offset count `lg n / 4` are floored.
//!
//! All arithmetic is in `u128`, so `n = 2^64` is representable.

use num_bigint::BigUint;
use serde::Serialize;

use crate::error::{Error, Result};

pub const MIN_LOG_N: u32 = 16;
pub const MAX_LOG_N: u32 = 64;

/// `floor(log2 x)` for `x > 0`.
pub fn floor_lg(x: u128) -> u32 {
    assert!(x > 0, "floor_lg(0)");
    127 - x.leading_zeros()
}

/// Returns `lg n` after checking that `n` is a supported power of two.
pub fn log_n(n: u128) -> Result<u32> {
    if n == 0 || !n.is_power_of_two() {
        return Err(Error::invalid(format!("n = {n} is not a power of two")));
    }
    let k = n.trailing_zeros();
    if !(MIN_LOG_N..=MAX_LOG_N).contains(&k) {
        return Err(Error::invalid(format!(
            "n = 2^{k} outside the supported range 2^{MIN_LOG_N}..=2^{MAX_LOG_N}"
        )));
    }
    Ok(k)
}

/// The set of interval lengths for one stream length.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LengthSet {
    pub n: u128,
    pub lengths: Vec<u128>,
}

impl LengthSet {
    pub fn contains(&self, ell: u128) -> bool {
        self.lengths.binary_search(&ell).is_ok()
    }

    /// The next larger length, if any.
    pub fn successor(&self, ell: u128) -> Option<u128> {
        let idx = self.lengths.binary_search(&ell).ok()?;
        self.lengths.get(idx + 1).copied()
    }
}

/// Largest `i` with `(lg n)^{4i} <= n`, i.e. `floor(lg n / (4 lg lg n))`.
fn max_exponent(lg_n: u32) -> u32 {
    let n = BigUint::from(1u8) << lg_n as usize;
    let step = BigUint::from(lg_n).pow(4);
    let mut power = BigUint::from(1u8);
    let mut i = 0;
    loop {
        let next = &power * &step;
        if next > n {
            return i;
        }
        power = next;
        i += 1;
    }
}

pub fn lengths_set(n: u128) -> Result<LengthSet> {
    let lg_n = log_n(n)?;
    let big_n = BigUint::from(n);
    let lengths = (0..=max_exponent(lg_n))
        .map(|i| {
            // floor(n^{1/4} * m) = floor((n * m^4)^{1/4}), m = (lg n)^{2i}
            let m = BigUint::from(lg_n).pow(2 * i);
            let value = (&big_n * m.pow(4)).nth_root(4);
            u128::try_from(value).expect("lengths are below n")
        })
        .collect();
    Ok(LengthSet { n, lengths })
}

/// `floor(4 ell / lg n)`.
pub fn gap_len(n: u128, ell: u128) -> Result<u128> {
    let lg_n = u128::from(log_n(n)?);
    Ok(4 * ell / lg_n)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct IntervalSpec {
    pub ell: u128,
    pub t: u128,
    pub t0: u128,
    pub t1: u128,
    pub t2: u128,
    pub t3: u128,
    pub gap_len: u128,
}

impl IntervalSpec {
    pub fn first_interval(&self) -> (u128, u128) {
        (self.t0, self.t1)
    }

    pub fn gap(&self) -> (u128, u128) {
        (self.t1 + 1, self.t2 - 1)
    }

    pub fn second_interval(&self) -> (u128, u128) {
        (self.t2, self.t3)
    }

    /// `t3 - t0 + 1`, the number of arrivals the configuration spans.
    pub fn span(&self) -> u128 {
        self.t3 - self.t0 + 1
    }
}

pub fn interval_spec(n: u128, ell: u128, t: u128) -> Result<IntervalSpec> {
    let set = lengths_set(n)?;
    if !set.contains(ell) {
        return Err(Error::invalid(format!(
            "ell = {ell} is not in L for n = {n}"
        )));
    }
    if t >= n / 2 {
        return Err(Error::invalid(format!(
            "t = {t} must be below n/2 = {}",
            n / 2
        )));
    }
    let gap = gap_len(n, ell)?;
    let t0 = t;
    let t1 = t0 + ell * u128::from(floor_lg(ell)) - 1;
    let t2 = t1 + gap + 1;
    let t3 = t2 + ell - 1;
    if t3 >= n {
        return Err(Error::GeometryOverflow { n, ell, t, t3 });
    }
    Ok(IntervalSpec {
        ell,
        t,
        t0,
        t1,
        t2,
        t3,
        gap_len: gap,
    })
}

/// The offsets `{ i * gap_len : i < lg n / 4 }`.
pub fn offset_set(n: u128, ell: u128) -> Result<Vec<u128>> {
    let set = lengths_set(n)?;
    if !set.contains(ell) {
        return Err(Error::invalid(format!(
            "ell = {ell} is not in L for n = {n}"
        )));
    }
    let gap = gap_len(n, ell)?;
    let count = u128::from(log_n(n)?) / 4;
    Ok((0..count).map(|i| i * gap).collect())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct OffsetGrid {
    pub ell: u128,
    pub f: u128,
    pub arrivals: Vec<u128>,
}

/// Arrivals `f, f + ell, f + 2 ell, ...` below `n/2`.
pub fn offset_grid(n: u128, ell: u128, f: u128) -> Result<OffsetGrid> {
    log_n(n)?;
    if f >= ell {
        return Err(Error::invalid(format!(
            "offset {f} must be below ell = {ell}"
        )));
    }
    let half = n / 2;
    let count = if f < half {
        (half - 1 - f) / ell + 1
    } else {
        0
    };
    let count = usize::try_from(count)
        .map_err(|_| Error::invalid(format!("offset grid for ell = {ell} too large to list")))?;
    let arrivals = (0..count as u128).map(|a| f + a * ell).collect();
    Ok(OffsetGrid { ell, f, arrivals })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct NestingPair {
    pub ell: u128,
    pub next_ell: u128,
    pub span: u128,
    pub next_gap_len: u128,
    /// `next_gap_len - span`; negative means the inequality fails.
    pub margin: i128,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct NestingReport {
    pub n: u128,
    pub pairs: Vec<NestingPair>,
    pub violations: Vec<NestingPair>,
}

impl NestingReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks that each gap is wide enough to hold the whole configuration of the
/// next smaller length. Violations are reported, not raised.
pub fn validate_nesting(n: u128) -> Result<NestingReport> {
    let set = lengths_set(n)?;
    let mut pairs = Vec::new();
    for w in set.lengths.windows(2) {
        let (ell, next_ell) = (w[0], w[1]);
        let span = ell * u128::from(floor_lg(ell)) + gap_len(n, ell)? + ell;
        let next_gap_len = gap_len(n, next_ell)?;
        let margin =
            i128::try_from(next_gap_len).expect("fits") - i128::try_from(span).expect("fits");
        pairs.push(NestingPair {
            ell,
            next_ell,
            span,
            next_gap_len,
            margin,
        });
    }
    let violations = pairs.iter().filter(|p| p.margin < 0).cloned().collect();
    Ok(NestingReport {
        n,
        pairs,
        violations,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RangeCheck {
    pub ell: u128,
    /// Largest `t` whose configuration still fits, if any does.
    pub max_valid_t: Option<u128>,
    pub all_in_range: bool,
}

/// For each length, whether every `t < n/2` yields a configuration inside
/// `[0, n-1]`. `t3` grows by one per unit of `t`, so the check is exact.
pub fn check_interval_ranges(n: u128) -> Result<Vec<RangeCheck>> {
    let set = lengths_set(n)?;
    let half = n / 2;
    set.lengths
        .iter()
        .map(|&ell| {
            let fixed = ell * u128::from(floor_lg(ell)) + gap_len(n, ell)? + ell - 1;
            let max_valid_t = (n - 1).checked_sub(fixed).map(|t| t.min(half - 1));
            Ok(RangeCheck {
                ell,
                max_valid_t,
                all_in_range: max_valid_t == Some(half - 1),
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct GapDisjointness {
    pub ell: u128,
    pub windows: usize,
    /// First pair of overlapping gap windows, as `(t, t')`.
    pub first_overlap: Option<(u128, u128)>,
}

/// Gap windows `[t1+1, t2-1]` for every `t` in every offset grid of `ell`,
/// checked for pairwise disjointness by sorting and scanning neighbours.
///
/// The windows depend only on `t`, so `t` need not satisfy the `t3 < n` bound.
pub fn check_gap_disjointness(n: u128, ell: u128) -> Result<GapDisjointness> {
    let gap = gap_len(n, ell)?;
    if gap == 0 {
        return Err(Error::invalid(format!(
            "gap length is zero for ell = {ell}"
        )));
    }
    let lead = ell * u128::from(floor_lg(ell));
    let mut windows: Vec<(u128, u128, u128)> = Vec::new();
    for f in offset_set(n, ell)? {
        for t in offset_grid(n, ell, f)?.arrivals {
            let lo = t + lead;
            windows.push((lo, lo + gap - 1, t));
        }
    }
    windows.sort_unstable();
    let first_overlap = windows
        .windows(2)
        .find(|w| w[1].0 <= w[0].1)
        .map(|w| (w[0].2, w[1].2));
    Ok(GapDisjointness {
        ell,
        windows: windows.len(),
        first_overlap,
    })
}

/// Start index of the fixed-pattern region for `ell` in a length-`n` pattern.
///
/// The region of length `ell lg ell + ell` ends `gap_len` positions before
/// the end of the pattern, so that the `ell/4` L2 windows are met during the
/// second interval (window `i` at arrival `t3 - 4i`). The start is rounded
/// down to a multiple of four to keep 4-frames aligned; the rounding is zero
/// whenever `gap_len` is a multiple of four.
pub fn pattern_region_start(n: u128, ell: u128) -> Result<u128> {
    let gap = gap_len(n, ell)?;
    let len = ell * u128::from(floor_lg(ell)) + ell;
    let end = n.checked_sub(gap + len).ok_or_else(|| {
        Error::ConstructionInfeasible(format!("region for ell = {ell} exceeds n = {n}"))
    })?;
    Ok(end & !3)
}
