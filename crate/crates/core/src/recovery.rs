//! Output-only decoding for the L2 hard instance.
//!
//! Given `F_ell`, the `ell/4` sliding L2 outputs and the odd-indexed
//! `ell`-blocks of `U_ell`, the decoder reconstructs every even-indexed block
//! that has a gadget in `F_ell`. It works one 4-frame per even block at a
//! time, from the last frame backwards; output `k` exposes frame
//! `ell/4 - 1 - k` of each even block.
//!
//! Every update frame holds two ones and two zeros, so the rank of each
//! symbol (and hence its destination under the optimal rearrangement) is
//! known even when the frame's content is not. Known frames are charged
//! exactly; unknown frames whose cost is the same for both alternatives are
//! charged that cost; what remains is `D*`, the summed cost of the frontier
//! frames, whose binary digits are the frontier bits.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::bits::BitArray;
use crate::distance::{contribution_profile, slide_l2, Distance};
use crate::error::{Error, Result};
use crate::hard_instance::{
    block_count, build_f_ell, is_frame_string, lg, push_random_frames, HardPattern, FRAME_0101,
    FRAME_1010,
};
use crate::rng::{rng_for, Purpose};

/// Everything the decoder may look at.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RecoveryInstance {
    pub ell: usize,
    pub f_ell: BitArray,
    pub outputs: Vec<Distance>,
    pub odd_blocks: Vec<BitArray>,
}

impl RecoveryInstance {
    pub fn new(
        ell: usize,
        f_ell: BitArray,
        outputs: Vec<Distance>,
        odd_blocks: Vec<BitArray>,
    ) -> Result<Self> {
        if ell < 16 || !ell.is_multiple_of(4) {
            return Err(Error::invalid(format!(
                "ell = {ell} must be a multiple of 4, at least 16"
            )));
        }
        let m = ell * lg(ell);
        if f_ell.len() != m + ell {
            return Err(Error::invalid(format!(
                "F_ell has length {}, expected {}",
                f_ell.len(),
                m + ell
            )));
        }
        if outputs.len() != ell / 4 {
            return Err(Error::invalid(format!(
                "expected {} outputs, got {}",
                ell / 4,
                outputs.len()
            )));
        }
        if let Some(k) = outputs.iter().position(|d| !d.is_finite()) {
            return Err(Error::invalid(format!("output {k} is infinite")));
        }
        if odd_blocks.len() != block_count(ell) {
            return Err(Error::invalid(format!(
                "expected {} odd blocks, got {}",
                block_count(ell),
                odd_blocks.len()
            )));
        }
        for (j, b) in odd_blocks.iter().enumerate() {
            if b.len() != ell || !is_frame_string(b) {
                return Err(Error::invalid(format!(
                    "odd block {j} is not {ell} bits of 0101/1010 frames"
                )));
            }
        }
        Ok(RecoveryInstance {
            ell,
            f_ell,
            outputs,
            odd_blocks,
        })
    }

    /// Builds the instance a decoder would see for a known `U_ell`, using
    /// the standard `F_ell`.
    pub fn from_update(ell: usize, u_ell: &BitArray) -> Result<Self> {
        let f_ell = build_f_ell(ell)?;
        let outputs = slide_l2(&f_ell, u_ell)?;
        let odd_blocks = (0..block_count(ell))
            .map(|j| u_block(u_ell, ell, 2 * j + 1))
            .collect();
        Self::new(ell, f_ell, outputs, odd_blocks)
    }

    pub fn block_count(&self) -> usize {
        block_count(self.ell)
    }
}

/// The `index`-th `ell`-length block of `u_ell`.
pub fn u_block(u_ell: &BitArray, ell: usize, index: usize) -> BitArray {
    u_ell.slice(index * ell..(index + 1) * ell)
}

/// Indices of even blocks that have no gadget and are therefore not
/// recovered (present only when `lg ell` is odd).
pub fn unrecovered_even_blocks(ell: usize) -> Vec<usize> {
    let blocks = lg(ell);
    (2 * block_count(ell)..blocks).step_by(2).collect()
}

/// Interleaves even and odd blocks into `U_ell`; trailing even blocks beyond
/// the gadget count (odd `lg ell`) are passed in `extra`.
pub fn assemble_update(
    ell: usize,
    even: &[BitArray],
    odd: &[BitArray],
    extra: &[BitArray],
) -> BitArray {
    let mut out = BitArray::default();
    for (e, o) in even.iter().zip(odd) {
        out.extend_from(e);
        out.extend_from(o);
    }
    for e in extra {
        out.extend_from(e);
    }
    debug_assert_eq!(out.len(), ell * lg(ell));
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct DStar {
    pub k: usize,
    /// Summed cost of the frontier frames.
    pub value: u64,
    /// `value - sum_j (2^{2j} + 2)`.
    pub reduced: u64,
}

/// Base cost of block `j`'s frontier frame when it reads `0101`.
pub fn frontier_base(j: usize) -> u64 {
    (1u64 << (2 * j)) + 2
}

enum FrameState<'a> {
    Known(&'a BitArray, usize),
    Unknown,
    Frontier,
}

struct Matching {
    targets: [Vec<usize>; 2],
}

impl Matching {
    fn new(window: &BitArray) -> Self {
        let mut targets = [Vec::new(), Vec::new()];
        for (i, b) in window.iter().enumerate() {
            targets[usize::from(b)].push(i);
        }
        Matching { targets }
    }

    /// Cost of frame `q` holding `bits` (4 symbols, two of each).
    fn frame_cost(&self, q: usize, bits: impl Iterator<Item = bool>) -> u64 {
        let mut seen = [0usize; 2];
        bits.enumerate()
            .map(|(o, b)| {
                let s = usize::from(b);
                let dest = self.targets[s][2 * q + seen[s]];
                seen[s] += 1;
                let d = (4 * q + o).abs_diff(dest) as u64;
                d * d
            })
            .sum()
    }
}

fn frame_bits(s: &str) -> impl Iterator<Item = bool> + '_ {
    s.bytes().map(|c| c == b'1')
}

/// Computes `D*` for output offset `k`, given the already-recovered last
/// `4k` symbols of every gadget-indexed even block.
pub fn compute_dstar(inst: &RecoveryInstance, k: usize, recovered: &[BitArray]) -> Result<DStar> {
    let ell = inst.ell;
    let frames_per_block = ell / 4;
    let blocks = inst.block_count();
    if k >= frames_per_block {
        return Err(Error::invalid(format!(
            "offset {k} beyond {}",
            frames_per_block - 1
        )));
    }
    if recovered.len() != blocks || recovered.iter().any(|r| r.len() != 4 * k) {
        return Err(Error::invalid(format!(
            "need {blocks} recovered suffixes of length {}",
            4 * k
        )));
    }
    let m = ell * lg(ell);
    let matching = Matching::new(&inst.f_ell.slice(4 * k..4 * k + m));
    let frontier = frames_per_block - 1 - k;

    let mut charged: u64 = 0;
    for q in 0..m / 4 {
        let block = q / frames_per_block;
        let fi = q % frames_per_block;
        let state = if block % 2 == 1 {
            FrameState::Known(&inst.odd_blocks[block / 2], 4 * fi)
        } else if block / 2 < blocks {
            match fi.cmp(&frontier) {
                std::cmp::Ordering::Less => FrameState::Unknown,
                std::cmp::Ordering::Equal => FrameState::Frontier,
                std::cmp::Ordering::Greater => {
                    FrameState::Known(&recovered[block / 2], 4 * (fi - frontier - 1))
                }
            }
        } else {
            FrameState::Unknown
        };
        let cost = match state {
            FrameState::Known(src, at) => matching.frame_cost(q, (at..at + 4).map(|i| src.get(i))),
            FrameState::Unknown => {
                let a = matching.frame_cost(q, frame_bits(FRAME_0101));
                let b = matching.frame_cost(q, frame_bits(FRAME_1010));
                if a != b {
                    return Err(Error::CorruptInstance {
                        k,
                        detail: format!("unknown frame {q} costs {a} or {b} depending on content"),
                    });
                }
                a
            }
            FrameState::Frontier => 0,
        };
        charged = charged.checked_add(cost).ok_or(Error::Overflow("dstar"))?;
    }

    let output = inst.outputs[k].finite().expect("validated finite");
    let value = output
        .checked_sub(charged)
        .ok_or_else(|| Error::CorruptInstance {
            k,
            detail: format!("output {output} is below the known contribution {charged}"),
        })?;
    let base: u64 = (0..blocks).map(frontier_base).sum();
    let reduced = value
        .checked_sub(base)
        .ok_or_else(|| Error::CorruptInstance {
            k,
            detail: format!("D* = {value} is below the frontier base {base}"),
        })?;
    Ok(DStar { k, value, reduced })
}

/// Reads `v_j` from bit `j + 1` of `d.reduced`. Any other set bit is a
/// decode failure.
pub fn extract_vbits(d: DStar, blocks: usize) -> Result<Vec<bool>> {
    let v: Vec<bool> = (0..blocks)
        .map(|j| j + 1 < 64 && (d.reduced >> (j + 1)) & 1 == 1)
        .collect();
    let rebuilt: u64 = v
        .iter()
        .enumerate()
        .filter(|(_, &b)| b)
        .map(|(j, _)| 1u64 << (j + 1))
        .sum();
    let residual = d.reduced ^ rebuilt;
    if residual != 0 {
        let bit = 63 - residual.leading_zeros() as usize;
        return Err(Error::DecodeFailure {
            k: d.k,
            j: bit.saturating_sub(1),
            detail: format!(
                "reduced D* = {} leaves residual {residual} after extracting {blocks} bits",
                d.reduced
            ),
        });
    }
    Ok(v)
}

/// Recovers every gadget-indexed even block `U_ell^{(2j)}`.
pub fn recover_even_blocks(inst: &RecoveryInstance) -> Result<Vec<BitArray>> {
    let blocks = inst.block_count();
    let frame_1010: BitArray = FRAME_1010.parse().expect("literal");
    let frame_0101: BitArray = FRAME_0101.parse().expect("literal");
    let mut suffixes = vec![BitArray::default(); blocks];
    for k in 0..inst.ell / 4 {
        let d = compute_dstar(inst, k, &suffixes)?;
        let v = extract_vbits(d, blocks)?;
        for (suffix, bit) in suffixes.iter_mut().zip(v) {
            let mut next = if bit {
                frame_1010.clone()
            } else {
                frame_0101.clone()
            };
            next.extend_from(suffix);
            *suffix = next;
        }
    }
    Ok(suffixes)
}

/// Converts a streamed output into the sliding L2 output it contains.
///
/// `window` is the stream window at the arrival in question with the span
/// of `U_ell` replaced by anything (the span is overwritten with `0101`
/// frames before use). The cost of every symbol outside the span is
/// subtracted from `streamed`.
pub fn streamed_to_slide(
    pattern: &BitArray,
    window: &BitArray,
    span: std::ops::Range<usize>,
    streamed: Distance,
) -> Result<Distance> {
    if !span.len().is_multiple_of(4) || span.end > window.len() {
        return Err(Error::invalid(
            "span must be whole frames inside the window",
        ));
    }
    let total = streamed
        .finite()
        .ok_or_else(|| Error::invalid("streamed output is infinite"))?;
    let mut masked = window.clone();
    masked.write_at(span.start, &BitArray::repeat(FRAME_0101, span.len() / 4));
    if masked.slice(0..span.start).count_ones() != pattern.slice(0..span.start).count_ones() {
        return Err(Error::CorruptInstance {
            k: 0,
            detail: "window prefix before U_ell is not balanced against the pattern".into(),
        });
    }
    let profile = contribution_profile(pattern, &masked)?;
    let outside: u64 = profile[..span.start]
        .iter()
        .chain(&profile[span.end..])
        .sum();
    total
        .checked_sub(outside)
        .map(Distance::Finite)
        .ok_or_else(|| Error::CorruptInstance {
            k: 0,
            detail: format!("streamed output {total} below outside cost {outside}"),
        })
}

/// When each sliding output appears in the stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ScheduledOutput {
    pub i: usize,
    /// Index into `U` of the arrival whose output contains entry `i`.
    pub arrival: usize,
    /// Where `U_ell` sits in the window at that arrival.
    pub span_start: usize,
}

/// For `U_ell = U[t .. t + ell lg ell]` (`t` a multiple of 4), lists the
/// arrival and window position of each sliding output, assuming a full
/// `n`-bit window precedes `U`.
pub fn stream_schedule(
    pattern: &HardPattern,
    ell: usize,
    t: usize,
) -> Result<Vec<ScheduledOutput>> {
    if !t.is_multiple_of(4) {
        return Err(Error::invalid(format!("t = {t} is not a multiple of 4")));
    }
    let region = pattern
        .region(ell)
        .ok_or_else(|| Error::invalid(format!("no region for ell = {ell}")))?;
    let n = pattern.n;
    (0..ell / 4)
        .map(|i| {
            let span_start = region.start + 4 * i;
            // U[t] sits at window index n + t - 1 - arrival.
            let arrival = (n + t - 1)
                .checked_sub(span_start)
                .filter(|&a| a < n)
                .ok_or_else(|| Error::invalid(format!("output {i} falls outside the stream")))?;
            Ok(ScheduledOutput {
                i,
                arrival,
                span_start,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TrialFailure {
    pub trial: usize,
    pub k: usize,
    pub j: usize,
    pub detail: String,
}

impl TrialFailure {
    fn from_error(trial: usize, e: Error) -> Self {
        let (k, j) = match &e {
            Error::DecodeFailure { k, j, .. } => (*k, *j),
            Error::CorruptInstance { k, .. } => (*k, 0),
            _ => (0, 0),
        };
        TrialFailure {
            trial,
            k,
            j,
            detail: e.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RecoveryReport {
    pub ell: usize,
    pub trials: usize,
    pub successes: usize,
    pub certified_bits: u32,
    pub failures: Vec<TrialFailure>,
}

fn even_block_frames(ell: usize) -> usize {
    block_count(ell) * ell / 4
}

/// Decodes `u_ell` from its own outputs and compares with the truth.
fn round_trip(
    ell: usize,
    u_ell: &BitArray,
    trial: usize,
) -> std::result::Result<Vec<BitArray>, TrialFailure> {
    let inst = RecoveryInstance::from_update(ell, u_ell)
        .map_err(|e| TrialFailure::from_error(trial, e))?;
    let got = recover_even_blocks(&inst).map_err(|e| TrialFailure::from_error(trial, e))?;
    for (j, block) in got.iter().enumerate() {
        if *block != u_block(u_ell, ell, 2 * j) {
            return Err(TrialFailure {
                trial,
                k: 0,
                j,
                detail: format!(
                    "recovered {block} but truth is {}",
                    u_block(u_ell, ell, 2 * j)
                ),
            });
        }
    }
    Ok(got)
}

/// Independent round trips with a fresh random `U_ell` per trial.
pub fn run_round_trips(ell: usize, trials: usize, seed: u64) -> Result<RecoveryReport> {
    if trials == 0 {
        return Err(Error::invalid("trials must be at least 1"));
    }
    let m = ell * lg(ell);
    build_f_ell(ell)?;
    let results: Vec<_> = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let mut rng = rng_for(seed, Purpose::Trial, trial as u32);
            let mut u = BitArray::default();
            push_random_frames(&mut rng, m / 4, &mut u);
            round_trip(ell, &u, trial)
        })
        .collect();
    let failures: Vec<_> = results.into_iter().filter_map(|r| r.err()).collect();
    Ok(RecoveryReport {
        ell,
        trials,
        successes: trials - failures.len(),
        certified_bits: entropy_certificate(ell, trials, seed)?.certified_bits,
        failures,
    })
}

/// Exhaustive enumeration is used when the even blocks have at most this
/// many free frames and the trial budget covers them all.
pub const EXHAUSTIVE_FRAME_CAP: usize = 20;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CertificateReport {
    pub ell: usize,
    pub trials: usize,
    pub exhaustive: bool,
    /// Distinct even-block configurations that were decoded exactly and whose
    /// outputs were pairwise distinct.
    pub distinct_configurations: u64,
    pub certified_bits: u32,
    /// Upper limit: one bit per frame of every gadget-indexed even block.
    pub max_bits: usize,
    pub failures: Vec<TrialFailure>,
}

/// Lower-bounds the entropy of the outputs given the odd blocks by exhibiting
/// distinct even-block configurations that decode exactly. Odd blocks (and
/// any block without a gadget) are pinned from the seed.
pub fn entropy_certificate(ell: usize, trials: usize, seed: u64) -> Result<CertificateReport> {
    if trials == 0 {
        return Err(Error::invalid("trials must be at least 1"));
    }
    let blocks = block_count(ell);
    let frames_per_block = ell / 4;
    let free = even_block_frames(ell);
    build_f_ell(ell)?;

    let mut pinned = rng_for(seed, Purpose::PinnedOdd, 0);
    let odd: Vec<BitArray> = (0..blocks)
        .map(|_| {
            let mut b = BitArray::default();
            push_random_frames(&mut pinned, frames_per_block, &mut b);
            b
        })
        .collect();
    let extra: Vec<BitArray> = unrecovered_even_blocks(ell)
        .iter()
        .map(|_| {
            let mut b = BitArray::default();
            push_random_frames(&mut pinned, frames_per_block, &mut b);
            b
        })
        .collect();

    let exhaustive = free <= EXHAUSTIVE_FRAME_CAP && trials as u128 >= 1u128 << free;
    let configs: Vec<Vec<bool>> = if exhaustive {
        (0..1u64 << free)
            .map(|code| (0..free).map(|b| (code >> b) & 1 == 1).collect())
            .collect()
    } else {
        (0..trials)
            .map(|trial| {
                use rand::Rng;
                let mut rng = rng_for(seed, Purpose::Trial, trial as u32);
                (0..free).map(|_| rng.random::<bool>()).collect()
            })
            .collect()
    };

    let frames_to_block = |frames: &[bool]| {
        let mut b = BitArray::default();
        for &f in frames {
            b.extend_from(
                &(if f { FRAME_1010 } else { FRAME_0101 })
                    .parse()
                    .expect("literal"),
            );
        }
        b
    };

    let results: Vec<_> = configs
        .par_iter()
        .enumerate()
        .map(|(trial, frames)| {
            let even: Vec<BitArray> = frames
                .chunks(frames_per_block)
                .map(frames_to_block)
                .collect();
            let u = assemble_update(ell, &even, &odd, &extra);
            let outputs = slide_l2(&build_f_ell(ell).expect("checked"), &u).expect("valid shapes");
            round_trip(ell, &u, trial).map(|_| (outputs, frames.clone()))
        })
        .collect();

    let mut failures = Vec::new();
    let mut seen: HashMap<Vec<Distance>, Vec<bool>> = HashMap::new();
    for (trial, r) in results.into_iter().enumerate() {
        match r {
            Ok((outputs, frames)) => {
                if let Some(prev) = seen.get(&outputs) {
                    if *prev != frames {
                        failures.push(TrialFailure {
                            trial,
                            k: 0,
                            j: 0,
                            detail: "two configurations produced identical outputs".into(),
                        });
                    }
                } else {
                    seen.insert(outputs, frames);
                }
            }
            Err(f) => failures.push(f),
        }
    }
    let distinct = seen.len() as u64;
    let certified_bits = if distinct == 0 {
        0
    } else {
        63 - distinct.leading_zeros()
    };
    Ok(CertificateReport {
        ell,
        trials: configs.len(),
        exhaustive,
        distinct_configurations: distinct,
        certified_bits,
        max_bits: free,
        failures,
    })
}
