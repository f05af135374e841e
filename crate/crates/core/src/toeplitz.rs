//! (0,1)-Toeplitz matrices: products, exact output entropy, witness search,
//! and embedding into a sliding-convolution pattern.
//!
//! Index convention for the embedding: a matrix `M` of height `ell` and width
//! `W = ell * floor(lg ell)` is stored as a pattern `F` of length
//! `ell + W - 1` with `F[ell - 1 + (c - r)] = M[r][c]`. Then
//! `(F ⊗ v)[ell - 1 - r] = (M v)[r]`: sliding output `i` is matrix row
//! `ell - 1 - i`.

use std::collections::HashMap;
use std::fmt::Write as _;

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::bits::BitArray;
use crate::error::{Error, Result};
use crate::geometry::floor_lg;
use crate::hard_instance::{check_disjoint, instance_n, region_starts, Region};
use crate::rng::{rng_for, Purpose};

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ToeplitzSpec {
    first_row: BitArray,
    first_col: BitArray,
}

impl ToeplitzSpec {
    pub fn new(first_row: BitArray, first_col: BitArray) -> Result<Self> {
        if first_row.is_empty() || first_col.is_empty() {
            return Err(Error::invalid("Toeplitz matrix must be at least 1x1"));
        }
        if first_row.get(0) != first_col.get(0) {
            return Err(Error::invalid(
                "first row and first column disagree at (0, 0)",
            ));
        }
        Ok(ToeplitzSpec {
            first_row,
            first_col,
        })
    }

    pub fn zeros(height: usize, width: usize) -> Self {
        ToeplitzSpec {
            first_row: BitArray::zeros(width),
            first_col: BitArray::zeros(height),
        }
    }

    /// Ones on the main diagonal only.
    pub fn identity(height: usize, width: usize) -> Self {
        let mut m = Self::zeros(height, width);
        m.first_row.set(0, true);
        m.first_col.set(0, true);
        m
    }

    /// The `height + width - 1` defining bits: the first column top to
    /// bottom, then the first row without its first element.
    pub fn diagonal_string(&self) -> BitArray {
        let mut out = self.first_col.clone();
        out.extend_from(&self.first_row.slice(1..self.width()));
        out
    }

    pub fn from_diagonal_string(height: usize, width: usize, diag: &BitArray) -> Result<Self> {
        if height == 0 || width == 0 || diag.len() != height + width - 1 {
            return Err(Error::invalid(format!(
                "diagonal string of length {} does not fit {height}x{width}",
                diag.len()
            )));
        }
        let first_col = diag.slice(0..height);
        let mut first_row = BitArray::default();
        first_row.push(diag.get(0));
        first_row.extend_from(&diag.slice(height..diag.len()));
        Self::new(first_row, first_col)
    }

    pub fn height(&self) -> usize {
        self.first_col.len()
    }

    pub fn width(&self) -> usize {
        self.first_row.len()
    }

    pub fn first_row(&self) -> &BitArray {
        &self.first_row
    }

    pub fn first_col(&self) -> &BitArray {
        &self.first_col
    }

    /// Value on diagonal `c - r`.
    pub fn diagonal(&self, offset: isize) -> bool {
        if offset >= 0 {
            self.first_row.get(offset as usize)
        } else {
            self.first_col.get(offset.unsigned_abs())
        }
    }

    pub fn entry(&self, r: usize, c: usize) -> bool {
        self.diagonal(c as isize - r as isize)
    }

    /// Row `r` as a bitmask over columns (width at most 64).
    fn row_mask(&self, r: usize) -> u64 {
        (0..self.width())
            .filter(|&c| self.entry(r, c))
            .fold(0u64, |acc, c| acc | (1 << c))
    }
}

pub fn toeplitz_apply(m: &ToeplitzSpec, v: &BitArray) -> Result<Vec<u64>> {
    if v.len() != m.width() {
        return Err(Error::invalid(format!(
            "vector length {} does not match width {}",
            v.len(),
            m.width()
        )));
    }
    Ok((0..m.height())
        .map(|r| {
            (0..m.width())
                .filter(|&c| m.entry(r, c) && v.get(c))
                .count() as u64
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum EntropyMethod {
    Exhaustive,
    Sampled,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EntropyResult {
    #[serde(skip)]
    pub matrix: ToeplitzSpec,
    pub height: usize,
    pub width: usize,
    pub diagonal_string_hex: String,
    pub entropy_bits: f64,
    pub distinct_outputs: u64,
    pub method: EntropyMethod,
    pub sample_size: Option<u64>,
}

/// Widest matrix whose input space is enumerated in full.
pub const EXHAUSTIVE_WIDTH_CAP: usize = 24;

/// Fewest samples accepted by the plug-in estimator.
pub const MIN_SAMPLES: u64 = 1 << 20;

/// Shannon entropy (bits) of a distribution given by its counts.
///
/// Counts are summed in sorted order so equal multisets give identical
/// floating-point results.
pub fn entropy_from_counts(counts: &mut [u64]) -> f64 {
    counts.sort_unstable();
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return 0.0;
    }
    let t = total as f64;
    let weighted: f64 = counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| c as f64 * (c as f64).log2())
        .sum();
    (t.log2() - weighted / t).max(0.0)
}

fn product_key(masks: &[u64], v: u64) -> Vec<u8> {
    masks.iter().map(|m| (m & v).count_ones() as u8).collect()
}

fn tally<I: ParallelIterator<Item = u64>>(masks: &[u64], inputs: I) -> HashMap<Vec<u8>, u64> {
    inputs
        .fold(HashMap::new, |mut acc, v| {
            *acc.entry(product_key(masks, v)).or_insert(0) += 1;
            acc
        })
        .reduce(HashMap::new, |mut a, b| {
            for (k, c) in b {
                *a.entry(k).or_insert(0) += c;
            }
            a
        })
}

pub fn diagonal_hex(m: &ToeplitzSpec) -> String {
    let bits: Vec<bool> = m.diagonal_string().iter().collect();
    let mut out = String::new();
    for chunk in bits.chunks(4) {
        let nibble = chunk
            .iter()
            .chain(std::iter::repeat(&false))
            .take(4)
            .fold(0u8, |acc, &b| (acc << 1) | u8::from(b));
        write!(out, "{nibble:x}").expect("writing to a String");
    }
    out
}

/// Entropy of `M v` for `v` uniform on `{0,1}^width`, by full enumeration.
pub fn exact_entropy(m: &ToeplitzSpec) -> Result<EntropyResult> {
    if m.width() > EXHAUSTIVE_WIDTH_CAP {
        return Err(Error::WidthOverCap {
            width: m.width(),
            cap: EXHAUSTIVE_WIDTH_CAP,
        });
    }
    let masks: Vec<u64> = (0..m.height()).map(|r| m.row_mask(r)).collect();
    let counts = tally(&masks, (0..1u64 << m.width()).into_par_iter());
    let mut counts: Vec<u64> = counts.into_values().collect();
    Ok(EntropyResult {
        matrix: m.clone(),
        height: m.height(),
        width: m.width(),
        diagonal_string_hex: diagonal_hex(m),
        distinct_outputs: counts.len() as u64,
        entropy_bits: entropy_from_counts(&mut counts),
        method: EntropyMethod::Exhaustive,
        sample_size: None,
    })
}

/// Plug-in estimate from `samples` uniform inputs. Biased low when the
/// number of distinct outputs is comparable to `samples`.
pub fn sampled_entropy(m: &ToeplitzSpec, samples: u64, seed: u64) -> Result<EntropyResult> {
    if samples < MIN_SAMPLES {
        return Err(Error::invalid(format!(
            "sampled entropy needs at least {MIN_SAMPLES} samples"
        )));
    }
    if m.width() > 64 {
        return Err(Error::invalid("sampled entropy supports width up to 64"));
    }
    let masks: Vec<u64> = (0..m.height()).map(|r| m.row_mask(r)).collect();
    let mut rng = rng_for(seed, Purpose::Vectors, 0);
    let width_mask = if m.width() == 64 {
        u64::MAX
    } else {
        (1u64 << m.width()) - 1
    };
    let inputs: Vec<u64> = (0..samples)
        .map(|_| rng.random::<u64>() & width_mask)
        .collect();
    let counts = tally(&masks, inputs.into_par_iter());
    let mut counts: Vec<u64> = counts.into_values().collect();
    Ok(EntropyResult {
        matrix: m.clone(),
        height: m.height(),
        width: m.width(),
        diagonal_string_hex: diagonal_hex(m),
        distinct_outputs: counts.len() as u64,
        entropy_bits: entropy_from_counts(&mut counts),
        method: EntropyMethod::Sampled,
        sample_size: Some(samples),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Exhaustive,
    Random,
    Greedy,
}

impl Strategy {
    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::Exhaustive => "exhaustive",
            Strategy::Random => "random",
            Strategy::Greedy => "greedy",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SearchResult {
    pub height: usize,
    pub width: usize,
    pub strategy: Strategy,
    pub seed: u64,
    pub budget: u64,
    pub evaluated: u64,
    pub best: Option<EntropyResult>,
    /// `entropy / (h lg h)` of the best matrix.
    pub gamma: Option<f64>,
    /// `width / (h lg h)`.
    pub alpha: f64,
    /// True unless every candidate was examined.
    pub partial: bool,
}

fn h_lg_h(h: usize) -> f64 {
    let h = h as f64;
    h * h.log2()
}

/// Diagonal strings are compared index 0 first; a code's most significant
/// bit is index 0, so numeric order on codes is lexicographic order.
fn code_to_diag(code: u64, len: usize) -> BitArray {
    BitArray::from_bools((0..len).map(|i| (code >> (len - 1 - i)) & 1 == 1))
}

/// Higher entropy wins; equal entropy goes to the smaller code.
fn better(a: &(f64, u64), b: &(f64, u64)) -> bool {
    a.0 > b.0 || (a.0 == b.0 && a.1 < b.1)
}

/// Searches Toeplitz matrices of the given shape for high output entropy.
pub fn search_witnesses(
    height: usize,
    width: usize,
    budget: u64,
    seed: u64,
    strategy: Strategy,
) -> Result<SearchResult> {
    if height < 2 || width == 0 {
        return Err(Error::invalid("search needs height >= 2 and width >= 1"));
    }
    if width > EXHAUSTIVE_WIDTH_CAP {
        return Err(Error::WidthOverCap {
            width,
            cap: EXHAUSTIVE_WIDTH_CAP,
        });
    }
    let diag_len = height + width - 1;
    if diag_len > 63 {
        return Err(Error::invalid("height + width - 1 must be at most 63"));
    }
    let eval = |code: u64| -> f64 {
        let m = ToeplitzSpec::from_diagonal_string(height, width, &code_to_diag(code, diag_len))
            .expect("shape checked");
        exact_entropy(&m).expect("width checked").entropy_bits
    };

    let (best, evaluated, partial) = match strategy {
        Strategy::Exhaustive => {
            if diag_len > EXHAUSTIVE_WIDTH_CAP {
                return Err(Error::invalid(format!(
                    "exhaustive search over {diag_len} diagonals exceeds {EXHAUSTIVE_WIDTH_CAP}"
                )));
            }
            let space = 1u64 << diag_len;
            let count = budget.min(space);
            let best = (0..count)
                .into_par_iter()
                .map(|code| (eval(code), code))
                .reduce_with(|a, b| if better(&b, &a) { b } else { a });
            (best, count, count < space)
        }
        Strategy::Random => {
            let mut rng = rng_for(seed, Purpose::Search, 0);
            let mut best: Option<(f64, u64)> = None;
            for _ in 0..budget {
                let code = rng.random::<u64>() >> (64 - diag_len);
                let cand = (eval(code), code);
                if best.is_none_or(|b| better(&cand, &b)) {
                    best = Some(cand);
                }
            }
            (best, budget, true)
        }
        Strategy::Greedy => {
            let mut rng = rng_for(seed, Purpose::Search, 1);
            let mut best: Option<(f64, u64)> = None;
            let mut spent = 0u64;
            'restarts: while spent < budget {
                let mut current = {
                    let code = rng.random::<u64>() >> (64 - diag_len);
                    spent += 1;
                    (eval(code), code)
                };
                if best.is_none_or(|b| better(&current, &b)) {
                    best = Some(current);
                }
                loop {
                    let mut step: Option<(f64, u64)> = None;
                    for bit in 0..diag_len {
                        if spent >= budget {
                            break 'restarts;
                        }
                        let code = current.1 ^ (1 << bit);
                        spent += 1;
                        let cand = (eval(code), code);
                        if best.is_none_or(|b| better(&cand, &b)) {
                            best = Some(cand);
                        }
                        if better(&cand, &current) && step.is_none_or(|s| better(&cand, &s)) {
                            step = Some(cand);
                        }
                    }
                    match step {
                        Some(s) if s.0 > current.0 => current = s,
                        _ => break,
                    }
                }
            }
            (best, spent, true)
        }
    };

    let norm = h_lg_h(height);
    let best = best.map(|(_, code)| {
        let m = ToeplitzSpec::from_diagonal_string(height, width, &code_to_diag(code, diag_len))
            .expect("shape checked");
        exact_entropy(&m).expect("width checked")
    });
    Ok(SearchResult {
        height,
        width,
        strategy,
        seed,
        budget,
        evaluated,
        gamma: best.as_ref().map(|b| b.entropy_bits / norm),
        best,
        alpha: width as f64 / norm,
        partial,
    })
}

pub const CSV_HEADER: &str =
    "h,width,strategy,seed,budget,entropy_bits,gamma,alpha,diagonal_string_hex";

impl SearchResult {
    /// One CSV row under [`CSV_HEADER`]. Floats use 12 decimal places.
    pub fn csv_row(&self) -> String {
        let (entropy, gamma, hex) = match (&self.best, self.gamma) {
            (Some(b), Some(g)) => (
                format!("{:.12}", b.entropy_bits),
                format!("{g:.12}"),
                b.diagonal_string_hex.clone(),
            ),
            _ => (String::new(), String::new(), String::new()),
        };
        format!(
            "{},{},{},{},{},{},{},{:.12},{}",
            self.height,
            self.width,
            self.strategy.as_str(),
            self.seed,
            self.budget,
            entropy,
            gamma,
            self.alpha,
            hex
        )
    }
}

/// Target width `ell * floor(lg ell)` for an embedded matrix of height `ell`.
pub fn embedded_width(ell: usize) -> usize {
    ell * floor_lg(ell as u128) as usize
}

/// Stores `m` (height `ell`, width at least `ell`, extended with zero
/// diagonals to width
/// `ell * lg ell`) as a sliding pattern of length `ell + ell lg ell - 1`.
pub fn embed_conv_pattern(m: &ToeplitzSpec, ell: usize) -> Result<BitArray> {
    if ell < 2 || m.height() != ell {
        return Err(Error::invalid(format!(
            "matrix height {} must equal ell = {ell} >= 2",
            m.height()
        )));
    }
    let width = embedded_width(ell);
    if m.width() < ell || m.width() > width {
        return Err(Error::invalid(format!(
            "matrix width {} must lie between ell = {ell} and ell lg ell = {width}",
            m.width()
        )));
    }
    let len = ell + width - 1;
    Ok(BitArray::from_bools((0..len).map(|p| {
        let offset = p as isize - (ell as isize - 1);
        offset < m.width() as isize && m.diagonal(offset)
    })))
}

/// The matrix an embedded pattern stands for, at full width `ell lg ell`.
pub fn extended_matrix(m: &ToeplitzSpec, ell: usize) -> Result<ToeplitzSpec> {
    let mut first_row = BitArray::zeros(embedded_width(ell));
    for c in 0..m.width().min(first_row.len()) {
        first_row.set(c, m.first_row().get(c));
    }
    ToeplitzSpec::new(first_row, m.first_col().clone())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConvPattern {
    pub n: usize,
    pub f: BitArray,
    pub layout: Vec<Region>,
}

/// Places each embedded matrix at the shared region start; everything else
/// is zero.
pub fn build_conv_f(n: u128, matrices: &[(usize, ToeplitzSpec)]) -> Result<ConvPattern> {
    let n = instance_n(n)?;
    let mut regions = Vec::new();
    let mut patterns = Vec::new();
    for (ell, start) in region_starts(n)? {
        let m = matrices
            .iter()
            .find(|(e, _)| *e == ell)
            .map(|(_, m)| m)
            .ok_or_else(|| Error::invalid(format!("no matrix supplied for ell = {ell}")))?;
        let f_ell = embed_conv_pattern(m, ell)?;
        regions.push(Region {
            ell,
            start,
            len: f_ell.len(),
        });
        patterns.push((start, f_ell));
    }
    let layout = check_disjoint(regions)?;
    let mut f = BitArray::zeros(n);
    for (start, f_ell) in &patterns {
        f.write_at(*start, f_ell);
    }
    Ok(ConvPattern { n, f, layout })
}

/// A conv pattern whose embedded matrices have uniformly random diagonals,
/// drawn from `seed`.
pub fn random_conv_f(n: u128, seed: u64) -> Result<ConvPattern> {
    let n_usize = instance_n(n)?;
    let mut matrices = Vec::new();
    for (index, (ell, _)) in region_starts(n_usize)?.into_iter().enumerate() {
        let mut rng = rng_for(seed, Purpose::Vectors, index as u32 + 1);
        let width = embedded_width(ell);
        let diag = BitArray::from_bools((0..ell + width - 1).map(|_| rng.random::<bool>()));
        matrices.push((ell, ToeplitzSpec::from_diagonal_string(ell, width, &diag)?));
    }
    build_conv_f(n, &matrices)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distance::slide_conv;

    fn bits(s: &str) -> BitArray {
        s.parse().unwrap()
    }

    #[test]
    fn apply_examples() {
        let id = ToeplitzSpec::identity(3, 3);
        assert_eq!(toeplitz_apply(&id, &bits("101")).unwrap(), vec![1, 0, 1]);
        let z = ToeplitzSpec::zeros(3, 4);
        assert_eq!(toeplitz_apply(&z, &bits("1111")).unwrap(), vec![0; 3]);
        let m = ToeplitzSpec::new(bits("10"), bits("11")).unwrap();
        assert_eq!(toeplitz_apply(&m, &bits("11")).unwrap(), vec![1, 2]);
        assert!(toeplitz_apply(&m, &bits("1")).is_err());
    }

    #[test]
    fn spec_rejects_corner_mismatch() {
        assert!(ToeplitzSpec::new(bits("10"), bits("01")).is_err());
    }

    #[test]
    fn entropy_examples() {
        for h in 1..=6 {
            assert_eq!(
                exact_entropy(&ToeplitzSpec::identity(h, h))
                    .unwrap()
                    .entropy_bits,
                h as f64
            );
        }
        assert_eq!(
            exact_entropy(&ToeplitzSpec::zeros(3, 5))
                .unwrap()
                .entropy_bits,
            0.0
        );
        let m = ToeplitzSpec::new(bits("10"), bits("11")).unwrap();
        let r = exact_entropy(&m).unwrap();
        assert_eq!(r.entropy_bits, 2.0);
        assert_eq!(r.distinct_outputs, 4);
    }

    #[test]
    fn entropy_refuses_wide() {
        let m = ToeplitzSpec::zeros(2, 25);
        assert!(matches!(exact_entropy(&m), Err(Error::WidthOverCap { .. })));
    }

    #[test]
    fn sampled_uniform_close() {
        let r = sampled_entropy(&ToeplitzSpec::identity(4, 4), MIN_SAMPLES, 1).unwrap();
        assert_eq!(r.method, EntropyMethod::Sampled);
        assert!((r.entropy_bits - 4.0).abs() < 1e-3);
        assert!(sampled_entropy(&ToeplitzSpec::identity(4, 4), 10, 1).is_err());
    }

    #[test]
    fn diagonal_round_trip() {
        let d = bits("1101001");
        let m = ToeplitzSpec::from_diagonal_string(3, 5, &d).unwrap();
        assert_eq!(m.diagonal_string(), d);
        assert_eq!(m.first_col(), &bits("110"));
        assert_eq!(m.first_row(), &bits("11001"));
        assert_eq!(diagonal_hex(&m), "d2");
    }

    #[test]
    fn search_budget_zero() {
        let r = search_witnesses(4, 8, 0, 1, Strategy::Random).unwrap();
        assert!(r.best.is_none() && r.partial && r.gamma.is_none());
        let r = search_witnesses(4, 8, 0, 1, Strategy::Exhaustive).unwrap();
        assert!(r.best.is_none() && r.partial);
    }

    #[test]
    fn random_search_monotone_in_budget() {
        let gammas: Vec<f64> = [1, 4, 16, 64]
            .iter()
            .map(|&b| {
                search_witnesses(4, 6, b, 11, Strategy::Random)
                    .unwrap()
                    .gamma
                    .unwrap()
            })
            .collect();
        assert!(gammas.windows(2).all(|w| w[0] <= w[1]), "{gammas:?}");
    }

    #[test]
    fn greedy_respects_budget() {
        let r = search_witnesses(4, 6, 40, 2, Strategy::Greedy).unwrap();
        assert_eq!(r.evaluated, 40);
        assert!(r.best.is_some());
    }

    #[test]
    fn embed_identity_reproduces_windows() {
        // ell = 4, width 8: only M[r][r] = 1, so (M v)[r] = v[r] and
        // sliding output i = v[3 - i].
        let ell = 4;
        let m = ToeplitzSpec::identity(ell, 8);
        let f = embed_conv_pattern(&m, ell).unwrap();
        assert_eq!(f.len(), 11);
        assert_eq!(f, bits("00010000000"));
        let v = bits("10110010");
        let out = slide_conv(&f, &v).unwrap();
        assert_eq!(out, vec![1, 1, 0, 1]);
    }

    #[test]
    fn embed_zero() {
        let f = embed_conv_pattern(&ToeplitzSpec::zeros(4, 5), 4).unwrap();
        assert!(embed_conv_pattern(&ToeplitzSpec::zeros(4, 3), 4).is_err());
        assert_eq!(f.count_ones(), 0);
        assert_eq!(slide_conv(&f, &bits("11111111")).unwrap(), vec![0; 4]);
    }

    #[test]
    fn conv_pattern_layout_matches_l2() {
        let n = 1u128 << 16;
        let mats = vec![
            (16, ToeplitzSpec::identity(16, 16)),
            (4096, ToeplitzSpec::identity(4096, 4096)),
        ];
        let p = build_conv_f(n, &mats).unwrap();
        let l2 = crate::hard_instance::build_f(n).unwrap();
        for (c, l) in p.layout.iter().zip(&l2.layout) {
            assert_eq!((c.ell, c.start), (l.ell, l.start));
            assert_eq!(c.len + 1, l.len);
        }
        assert_eq!(p.f.count_ones(), 2);
        assert!(build_conv_f(n, &mats[..1]).is_err());
    }
}
