//! The fixed pattern and update distribution for the L2-rearrangement
//! problem.
//!
//! For each length `ell` the pattern carries a region `F_ell` of length
//! `ell lg ell + ell`, made of `floor(lg ell / 2)` gadget blocks separated by
//! runs of `1001`. Everything outside the regions is `01` repeated. Updates
//! are drawn from `{0101, 1010}^{n/4}`.
//!
//! Gadget block `j` is `1 0^{2^j+2} 1^{ell/2-1} 0^{ell/2-2-2^j}`: its first one
//! sits at local position 0, its first two zeros at 1 and 2, and its second
//! one at `3 + 2^j`, with `ell/2` ones in total.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bits::BitArray;
use crate::error::{Error, Result};
use crate::geometry::{floor_lg, lengths_set, log_n, pattern_region_start};
use crate::rng::{rng_for, Purpose};

/// Largest stream length for which whole instances are materialised.
pub const MAX_INSTANCE_LOG_N: u32 = 26;

/// Zeros between the first two ones of block `j` exceed `2^j` by this much.
pub const ZERO_RUN_EXCESS: usize = 2;

pub(crate) fn lg(ell: usize) -> usize {
    floor_lg(ell as u128) as usize
}

/// Number of gadget blocks in `F_ell`.
pub fn block_count(ell: usize) -> usize {
    lg(ell) / 2
}

fn check_ell(ell: usize) -> Result<()> {
    if ell < 16 || !ell.is_multiple_of(4) {
        return Err(Error::invalid(format!(
            "ell = {ell} must be a multiple of 4 and at least 16"
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockSpec {
    pub ell: usize,
    pub j: usize,
    pub zero_run: usize,
}

impl BlockSpec {
    pub fn new(ell: usize, j: usize) -> Result<Self> {
        check_ell(ell)?;
        if j >= block_count(ell) {
            return Err(Error::invalid(format!(
                "block index {j} out of range 0..{} for ell = {ell}",
                block_count(ell)
            )));
        }
        let zero_run = (1usize << j) + ZERO_RUN_EXCESS;
        if zero_run + 2 > ell / 2 {
            return Err(Error::invalid(format!(
                "block {j} needs {zero_run} leading zeros, more than ell/2 - 2"
            )));
        }
        Ok(BlockSpec { ell, j, zero_run })
    }

    /// Local position of the second one.
    pub fn second_one(&self) -> usize {
        1 + self.zero_run
    }

    pub fn render(&self) -> BitArray {
        let half = self.ell / 2;
        let mut out = BitArray::default();
        out.push(true);
        (0..self.zero_run).for_each(|_| out.push(false));
        (0..half - 1).for_each(|_| out.push(true));
        (0..half - self.zero_run).for_each(|_| out.push(false));
        debug_assert_eq!(out.len(), self.ell);
        out
    }
}

pub fn build_block(ell: usize, j: usize) -> Result<BitArray> {
    Ok(BlockSpec::new(ell, j)?.render())
}

/// Where the pieces of `F_ell` sit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FellLayout {
    pub ell: usize,
    pub block_starts: Vec<usize>,
    pub len: usize,
}

pub fn f_ell_layout(ell: usize) -> Result<FellLayout> {
    check_ell(ell)?;
    let q = ell / 4;
    let blocks = block_count(ell);
    let block_starts = (0..blocks).map(|j| 4 * (q - 1) + j * 2 * ell).collect();
    Ok(FellLayout {
        ell,
        block_starts,
        len: ell * lg(ell) + ell,
    })
}

pub fn build_f_ell(ell: usize) -> Result<BitArray> {
    let layout = f_ell_layout(ell)?;
    let q = ell / 4;
    let blocks = block_count(ell);
    let mut out = BitArray::repeat("1001", q - 1);
    for j in 0..blocks {
        out.extend_from(&build_block(ell, j)?);
        if j + 1 < blocks {
            out.extend_from(&BitArray::repeat("1001", q));
        }
    }
    out.extend_from(&BitArray::repeat("1001", q + 1));
    // Odd lg ell leaves one block's worth of length; it joins the tail run.
    let residual = layout
        .len
        .checked_sub(out.len())
        .filter(|r| r % 4 == 0)
        .ok_or_else(|| {
            Error::ConstructionInfeasible(format!(
                "F_ell for ell = {ell} has length {}, target {}",
                out.len(),
                layout.len
            ))
        })?;
    out.extend_from(&BitArray::repeat("1001", residual / 4));
    debug_assert_eq!(out.len(), layout.len);
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Region {
    pub ell: usize,
    pub start: usize,
    pub len: usize,
}

/// The fixed pattern `F` for the L2 problem.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HardPattern {
    pub n: usize,
    pub f: BitArray,
    /// One region per length, in increasing `ell`.
    pub layout: Vec<Region>,
}

impl HardPattern {
    pub fn region(&self, ell: usize) -> Option<Region> {
        self.layout.iter().copied().find(|r| r.ell == ell)
    }
}

pub(crate) fn instance_n(n: u128) -> Result<usize> {
    let k = log_n(n)?;
    if k > MAX_INSTANCE_LOG_N {
        return Err(Error::invalid(format!(
            "instances are materialised only up to n = 2^{MAX_INSTANCE_LOG_N}"
        )));
    }
    Ok(n as usize)
}

/// Region placement shared by both problems: one `(ell, start)` per length.
pub(crate) fn region_starts(n: usize) -> Result<Vec<(usize, usize)>> {
    let set = lengths_set(n as u128)?;
    set.lengths
        .iter()
        .map(|&ell| Ok((ell as usize, pattern_region_start(n as u128, ell)? as usize)))
        .collect()
}

/// Verifies the regions are disjoint and returns them sorted by start.
pub(crate) fn check_disjoint(mut regions: Vec<Region>) -> Result<Vec<Region>> {
    regions.sort_by_key(|r| r.start);
    for w in regions.windows(2) {
        if w[0].start + w[0].len > w[1].start {
            return Err(Error::ConstructionInfeasible(format!(
                "regions for ell = {} and ell = {} overlap",
                w[0].ell, w[1].ell
            )));
        }
    }
    regions.sort_by_key(|r| r.ell);
    Ok(regions)
}

pub fn build_f(n: u128) -> Result<HardPattern> {
    let n = instance_n(n)?;
    let mut regions = Vec::new();
    for (ell, start) in region_starts(n)? {
        check_ell(ell)?;
        regions.push(Region {
            ell,
            start,
            len: ell * lg(ell) + ell,
        });
    }
    let layout = check_disjoint(regions)?;

    let mut f = BitArray::from_bools((0..n).map(|p| p % 2 == 1));
    for r in &layout {
        f.write_at(r.start, &build_f_ell(r.ell)?);
    }
    let pattern = HardPattern { n, f, layout };
    verify_pattern(&pattern)?;
    Ok(pattern)
}

/// Checks the balance and framing invariants the decoder relies on.
pub fn verify_pattern(p: &HardPattern) -> Result<()> {
    let fail = |msg: String| Err(Error::ConstructionInfeasible(msg));
    if p.f.len() != p.n {
        return fail(format!(
            "pattern length {} differs from n = {}",
            p.f.len(),
            p.n
        ));
    }
    if p.f.count_ones() * 2 != p.n {
        return fail("pattern is not balanced".into());
    }
    for r in &p.layout {
        if r.start % 4 != 0 {
            return fail(format!("region for ell = {} is not 4-aligned", r.ell));
        }
        if p.f.slice(0..r.start).count_ones() * 2 != r.start {
            return fail(format!("prefix before ell = {} is not balanced", r.ell));
        }
        if p.f.slice(r.start..r.start + r.len).count_ones() * 2 != r.len {
            return fail(format!("region for ell = {} is not balanced", r.ell));
        }
    }
    for frame in 0..p.n / 4 {
        let lo = 4 * frame;
        let inside = p
            .layout
            .iter()
            .any(|r| lo >= r.start && lo < r.start + r.len);
        if !inside && p.f.slice(lo..lo + 4).to_string() != "0101" {
            return fail(format!("filler frame at {lo} is not 0101"));
        }
    }
    Ok(())
}

pub const FRAME_0101: &str = "0101";
pub const FRAME_1010: &str = "1010";

/// Appends `frames` frames drawn uniformly from `{0101, 1010}`.
pub(crate) fn push_random_frames<R: Rng>(rng: &mut R, frames: usize, out: &mut BitArray) {
    for _ in 0..frames {
        let high = rng.random::<bool>();
        out.push(high);
        out.push(!high);
        out.push(high);
        out.push(!high);
    }
}

pub fn sample_u_with<R: Rng>(rng: &mut R, n: usize) -> Result<BitArray> {
    if !n.is_multiple_of(4) {
        return Err(Error::invalid(format!("n = {n} is not divisible by 4")));
    }
    let mut out = BitArray::default();
    push_random_frames(rng, n / 4, &mut out);
    Ok(out)
}

pub fn sample_u(n: usize, seed: u64) -> Result<BitArray> {
    sample_u_with(&mut rng_for(seed, Purpose::Update, 0), n)
}

/// Whether every aligned 4-frame is `0101` or `1010`.
pub fn is_frame_string(bits: &BitArray) -> bool {
    bits.len().is_multiple_of(4)
        && (0..bits.len() / 4).all(|i| {
            let a = bits.get(4 * i);
            bits.get(4 * i + 1) == !a && bits.get(4 * i + 2) == a && bits.get(4 * i + 3) == !a
        })
}

/// A full L2 hard instance: pattern plus one sampled update array.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HardInstanceL2 {
    pub pattern: HardPattern,
    pub u: BitArray,
    pub seed: u64,
}

impl HardInstanceL2 {
    pub fn generate(n: u128, seed: u64) -> Result<Self> {
        let pattern = build_f(n)?;
        let u = sample_u(pattern.n, seed)?;
        Ok(HardInstanceL2 { pattern, u, seed })
    }

    /// The bits streamed before `U` so that the window is full (and balanced)
    /// when `U` starts arriving. Drawn from the same distribution as `U`.
    pub fn warmup_prefix(&self) -> BitArray {
        sample_u_with(&mut rng_for(self.seed, Purpose::Warmup, 0), self.pattern.n)
            .expect("n is a multiple of 4")
    }

    pub fn to_json(&self) -> InstanceJson {
        InstanceJson {
            n: self.pattern.n as u64,
            seed: self.seed,
            ells: self.pattern.layout.iter().map(|r| r.ell as u64).collect(),
            f: self.pattern.f.to_base64(),
            u: self.u.to_base64(),
            layout: self.pattern.layout.clone(),
        }
    }

    pub fn from_json(json: &InstanceJson) -> Result<Self> {
        let n = usize::try_from(json.n).map_err(|_| Error::invalid("n does not fit usize"))?;
        let pattern = HardPattern {
            n,
            f: BitArray::from_base64(&json.f)?,
            layout: json.layout.clone(),
        };
        verify_pattern(&pattern)?;
        let u = BitArray::from_base64(&json.u)?;
        if u.len() != n || !is_frame_string(&u) {
            return Err(Error::invalid("U must be n bits of 0101/1010 frames"));
        }
        Ok(HardInstanceL2 {
            pattern,
            u,
            seed: json.seed,
        })
    }
}

/// On-disk instance format.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstanceJson {
    pub n: u64,
    pub seed: u64,
    pub ells: Vec<u64>,
    #[serde(rename = "F")]
    pub f: String,
    #[serde(rename = "U")]
    pub u: String,
    pub layout: Vec<Region>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distance::{l2_rearrangement, Distance};

    #[test]
    fn block_second_one_positions() {
        let b0 = build_block(16, 0).unwrap();
        assert_eq!(b0.positions(true)[..2], [0, 4]);
        let b1 = build_block(16, 1).unwrap();
        assert_eq!(b1.positions(true)[..2], [0, 5]);
        assert!(!b1.get(1) && !b1.get(2));
    }

    #[test]
    fn block_balance() {
        for (ell, j) in [(16, 0), (16, 1), (64, 0), (64, 1), (64, 2)] {
            let b = build_block(ell, j).unwrap();
            assert_eq!(b.len(), ell);
            assert_eq!(b.count_ones() * 2, ell, "ell={ell} j={j}");
        }
    }

    #[test]
    fn block_zero_run_increases() {
        let runs: Vec<_> = (0..block_count(256))
            .map(|j| BlockSpec::new(256, j).unwrap().zero_run)
            .collect();
        assert!(runs.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn block_rejects_out_of_range() {
        assert!(build_block(16, 2).is_err());
        assert!(build_block(12, 0).is_err());
        assert!(build_block(18, 0).is_err());
    }

    #[test]
    fn f_ell_lengths_and_balance() {
        for ell in [16, 32, 64, 128, 256] {
            let f = build_f_ell(ell).unwrap();
            assert_eq!(f.len(), ell * lg(ell) + ell);
            assert_eq!(f.count_ones() * 2, f.len());
        }
        assert_eq!(build_f_ell(16).unwrap().len(), 80);
    }

    #[test]
    fn f_ell_gadget_positions() {
        // Leftmost one of block j sits at (2j+1) ell - 4.
        for ell in [16, 64] {
            let f = build_f_ell(ell).unwrap();
            let layout = f_ell_layout(ell).unwrap();
            for (j, &start) in layout.block_starts.iter().enumerate() {
                assert_eq!(start, (2 * j + 1) * ell - 4);
                assert_eq!(f.slice(start..start + ell), build_block(ell, j).unwrap());
            }
        }
    }

    #[test]
    fn build_f_2_16() {
        let p = build_f(1 << 16).unwrap();
        assert_eq!(p.layout.len(), 2);
        assert_eq!(p.f.count_ones(), 1 << 15);
        let r16 = p.region(16).unwrap();
        // Last region index is n - 5 = n - (4 ell / lg n + 1).
        assert_eq!(p.n - (r16.start + r16.len - 1), 5);
        let r4096 = p.region(4096).unwrap();
        assert!(r4096.start + r4096.len <= r16.start);
    }

    #[test]
    fn build_f_2_20() {
        let p = build_f(1 << 20).unwrap();
        assert_eq!(
            p.layout.iter().map(|r| r.ell).collect::<Vec<_>>(),
            vec![32, 12800]
        );
    }

    #[test]
    fn sample_u_frames_and_determinism() {
        let u = sample_u(1024, 9).unwrap();
        assert!(is_frame_string(&u));
        assert_eq!(u, sample_u(1024, 9).unwrap());
        assert_ne!(u, sample_u(1024, 10).unwrap());
        assert!(sample_u(10, 1).is_err());
    }

    #[test]
    fn padding_frames_cost_two() {
        let pad: BitArray = "1001".parse().unwrap();
        for alt in [FRAME_0101, FRAME_1010] {
            let alt: BitArray = alt.parse().unwrap();
            assert_eq!(l2_rearrangement(&pad, &alt).unwrap(), Distance::Finite(2));
        }
    }

    #[test]
    fn instance_json_round_trip() {
        let inst = HardInstanceL2::generate(1 << 16, 3).unwrap();
        let json = serde_json::to_string(&inst.to_json()).unwrap();
        let back: InstanceJson = serde_json::from_str(&json).unwrap();
        assert_eq!(HardInstanceL2::from_json(&back).unwrap(), inst);
        assert!(json.contains("\"F\"") && json.contains("\"layout\""));
    }
}
