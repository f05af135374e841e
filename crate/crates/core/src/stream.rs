//! The online engine: a fixed pattern, a sliding window of the most recent
//! `n` arrivals, and one output per arrival.
//!
//! The window starts as all zeros. Until `n` bits have arrived the window
//! still holds some of that initial fill; those arrivals are warm-up.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::bits::BitArray;
use crate::distance::{inner_product, l2_rearrangement, Distance};
use crate::error::{Error, Result};

/// Longest pattern the engine accepts; keeps `n * (n-1)^2` below `2^63`, so
/// the per-arrival L2 sum cannot overflow.
pub const MAX_PATTERN_LEN: usize = 1 << 21;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Conv,
    L2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(untagged)]
pub enum Output {
    InnerProduct(u64),
    L2(Distance),
}

#[derive(Debug, Clone)]
pub struct StreamState {
    pattern: BitArray,
    window: BitArray,
    mode: Mode,
    arrivals_seen: u64,
    tracker: Option<RankTracker>,
}

/// Positions of each symbol, as ranks-to-index tables. Pattern positions are
/// window-relative; window positions are absolute stream indices (the initial
/// fill occupies `-n .. 0`).
#[derive(Debug, Clone)]
struct RankTracker {
    pattern_pos: [Vec<i64>; 2],
    window_pos: [VecDeque<i64>; 2],
}

impl RankTracker {
    fn new(pattern: &BitArray) -> Self {
        let n = pattern.len() as i64;
        let mut pattern_pos = [Vec::new(), Vec::new()];
        for (i, b) in pattern.iter().enumerate() {
            pattern_pos[usize::from(b)].push(i as i64);
        }
        let window_pos = [(-n..0).collect(), VecDeque::new()];
        RankTracker {
            pattern_pos,
            window_pos,
        }
    }

    fn shift(&mut self, leaving: bool, entering: bool, index: i64) {
        self.window_pos[usize::from(leaving)].pop_front();
        self.window_pos[usize::from(entering)].push_back(index);
    }

    fn distance(&self, window_start: i64) -> Distance {
        if self.window_pos[1].len() != self.pattern_pos[1].len() {
            return Distance::Infinite;
        }
        let mut total = 0u64;
        for sym in 0..2 {
            let (front, back) = self.window_pos[sym].as_slices();
            let pat = &self.pattern_pos[sym];
            let (pat_front, pat_back) = pat.split_at(front.len());
            total += sum_sq(pat_front, front, window_start) + sum_sq(pat_back, back, window_start);
        }
        Distance::Finite(total)
    }
}

#[inline]
fn sum_sq(pattern: &[i64], window: &[i64], window_start: i64) -> u64 {
    pattern
        .iter()
        .zip(window)
        .map(|(&p, &w)| {
            let d = p - (w - window_start);
            (d * d) as u64
        })
        .sum()
}

impl StreamState {
    pub fn new(pattern: BitArray, mode: Mode) -> Result<Self> {
        if pattern.is_empty() {
            return Err(Error::invalid("pattern must be non-empty"));
        }
        if pattern.len() > MAX_PATTERN_LEN {
            return Err(Error::invalid(format!(
                "pattern length {} exceeds {MAX_PATTERN_LEN}",
                pattern.len()
            )));
        }
        let window = BitArray::zeros(pattern.len());
        let tracker = (mode == Mode::L2).then(|| RankTracker::new(&pattern));
        Ok(StreamState {
            pattern,
            window,
            mode,
            arrivals_seen: 0,
            tracker,
        })
    }

    pub fn pattern(&self) -> &BitArray {
        &self.pattern
    }

    pub fn window(&self) -> &BitArray {
        &self.window
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn arrivals_seen(&self) -> u64 {
        self.arrivals_seen
    }

    /// True while the window still contains initial fill.
    pub fn in_warmup(&self) -> bool {
        self.arrivals_seen < self.pattern.len() as u64
    }

    /// Appends `x` and drops the oldest bit without producing an output.
    pub fn advance(&mut self, x: bool) {
        let leaving = self.window.get(0);
        self.window.shift_in(x);
        if let Some(tracker) = self.tracker.as_mut() {
            tracker.shift(leaving, x, self.arrivals_seen as i64);
        }
        self.arrivals_seen += 1;
    }

    /// Appends `x`, drops the oldest bit, and returns the new output.
    pub fn push(&mut self, x: bool) -> Output {
        self.advance(x);
        self.current()
    }

    /// The output for the current window, from the incremental state.
    pub fn current(&self) -> Output {
        match self.mode {
            Mode::Conv => Output::InnerProduct(
                inner_product(&self.pattern, &self.window)
                    .expect("window length equals pattern length"),
            ),
            Mode::L2 => {
                let tracker = self.tracker.as_ref().expect("L2 mode keeps a tracker");
                let window_start = self.arrivals_seen as i64 - self.pattern.len() as i64;
                Output::L2(tracker.distance(window_start))
            }
        }
    }

    /// Recomputes the current output from the window alone.
    pub fn evaluate(&self) -> Output {
        match self.mode {
            Mode::Conv => Output::InnerProduct(
                inner_product(&self.pattern, &self.window).expect("equal lengths"),
            ),
            Mode::L2 => Output::L2(
                l2_rearrangement(&self.pattern, &self.window).expect("bounded pattern length"),
            ),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn bits(s: &str) -> BitArray {
        s.parse().unwrap()
    }

    #[test]
    fn conv_example() {
        let mut s = StreamState::new(bits("101"), Mode::Conv).unwrap();
        s.push(false);
        s.push(true);
        assert_eq!(s.push(true), Output::InnerProduct(1));
        assert_eq!(s.window(), &bits("011"));
        assert_eq!(s.push(true), Output::InnerProduct(2));
        assert_eq!(s.window(), &bits("111"));
    }

    #[test]
    fn l2_self_match_is_zero() {
        let f = bits("0110100110");
        let mut s = StreamState::new(f.clone(), Mode::L2).unwrap();
        let mut last = None;
        for b in f.iter() {
            last = Some(s.push(b));
        }
        assert!(!s.in_warmup());
        assert_eq!(last, Some(Output::L2(Distance::Finite(0))));
    }

    #[test]
    fn warmup_flag() {
        let mut s = StreamState::new(bits("0101"), Mode::L2).unwrap();
        for _ in 0..3 {
            s.push(true);
            assert!(s.in_warmup());
        }
        s.push(true);
        assert!(!s.in_warmup());
    }

    #[test]
    fn rejects_empty_pattern() {
        assert!(StreamState::new(BitArray::default(), Mode::Conv).is_err());
    }

    proptest! {
        #[test]
        fn push_matches_offline(
            pattern in proptest::collection::vec(any::<bool>(), 1..70),
            arrivals in proptest::collection::vec(any::<bool>(), 0..200),
        ) {
            for mode in [Mode::Conv, Mode::L2] {
                let mut s = StreamState::new(BitArray::from_bools(pattern.iter().copied()), mode).unwrap();
                for &x in &arrivals {
                    let out = s.push(x);
                    prop_assert_eq!(out, s.evaluate());
                }
            }
        }
    }
}
