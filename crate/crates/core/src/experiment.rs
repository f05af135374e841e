//! Reproducible drivers behind the command line. Each command builds a
//! [`Report`] holding the configuration, the crate version, one pass/fail
//! line per asserted check, and a command-specific result.

use std::collections::BTreeMap;
use std::path::PathBuf;

use clap::{Parser, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use crate::bits::BitArray;
use crate::distance::{slide_l2, Distance};
use crate::error::{Error, Result};
use crate::geometry::{
    check_gap_disjointness, check_interval_ranges, lengths_set, log_n, validate_nesting,
};
use crate::hard_instance::{block_count, is_frame_string, lg, verify_pattern, HardInstanceL2};
use crate::recovery::{
    entropy_certificate, recover_even_blocks, run_round_trips, stream_schedule, streamed_to_slide,
    u_block, unrecovered_even_blocks, RecoveryInstance,
};
use crate::stream::{Mode, Output, StreamState};
use crate::toeplitz::{random_conv_f, search_witnesses, Strategy, CSV_HEADER};

/// Largest `n` for which gap windows are listed one by one.
pub const GAP_CHECK_MAX_LOG_N: u32 = 28;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Build the L2 hard instance and write it as JSON.
    GenInstance,
    /// Stream a hard instance and compare online outputs with recomputation.
    Stream,
    /// Round-trip random updates through the decoder.
    Recover,
    /// Stream, convert outputs, and decode every length end to end.
    Verify,
    /// Search Toeplitz matrices for high output entropy.
    ToeplitzSearch,
    /// Check interval arithmetic, nesting and gap disjointness.
    GeometryCheck,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, PartialEq, Eq, Parser, Serialize)]
#[command(
    name = "bitstream-lab",
    version,
    about = "Streaming distance lower-bound experiments"
)]
pub struct ExperimentConfig {
    #[arg(value_enum)]
    pub command: Command,
    /// Stream length; a power of two.
    #[arg(long, default_value_t = 1 << 16)]
    pub n: u128,
    #[arg(long)]
    pub ell: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1)]
    pub trials: usize,
    #[arg(long, value_enum, default_value_t = Mode::L2)]
    pub mode: Mode,
    /// Report path; standard output when absent.
    #[arg(long = "out")]
    pub output_path: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Matrix height for toeplitz-search.
    #[arg(long, default_value_t = 4)]
    pub h: usize,
    /// Matrix width for toeplitz-search.
    #[arg(long, default_value_t = 8)]
    pub width: usize,
    #[arg(long, value_enum, default_value_t = Strategy::Exhaustive)]
    pub strategy: Strategy,
    /// Candidate matrices examined by toeplitz-search.
    #[arg(long, default_value_t = 1 << 20)]
    pub budget: u64,
}

impl ExperimentConfig {
    pub fn new(command: Command) -> Self {
        ExperimentConfig::parse_from([
            "bitstream-lab",
            command
                .to_possible_value()
                .expect("no skipped variants")
                .get_name(),
        ])
    }

    fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::invalid("--trials must be at least 1"));
        }
        log_n(self.n)?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Check {
            name: name.into(),
            passed,
            detail: detail.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub version: &'static str,
    pub config: ExperimentConfig,
    pub passed: bool,
    pub checks: Vec<Check>,
    pub result: Value,
    #[serde(skip)]
    csv: Option<String>,
}

impl Report {
    fn new(config: &ExperimentConfig, checks: Vec<Check>, result: Value) -> Self {
        Report {
            version: crate::VERSION,
            config: config.clone(),
            passed: checks.iter().all(|c| c.passed),
            checks,
            result,
            csv: None,
        }
    }

    pub fn failures(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| !c.passed).collect()
    }

    /// 0 when every check passed, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        if self.passed {
            0
        } else {
            1
        }
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Json => {
                let mut s = serde_json::to_string_pretty(self).expect("reports serialize");
                s.push('\n');
                s
            }
            Format::Csv => self.csv.clone().unwrap_or_else(|| {
                let mut s = String::from("check,passed,detail\n");
                for c in &self.checks {
                    s.push_str(&format!(
                        "{},{},{}\n",
                        c.name,
                        c.passed,
                        csv_quote(&c.detail)
                    ));
                }
                s
            }),
        }
    }
}

fn csv_quote(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("report values serialize")
}

/// Runs one command. Errors are configuration problems (exit 2); failed
/// checks are reported inside the returned report.
pub fn run(config: &ExperimentConfig) -> Result<Report> {
    config.validate()?;
    match config.command {
        Command::GenInstance => gen_instance(config),
        Command::Stream => stream(config),
        Command::Recover => recover(config),
        Command::Verify => verify(config),
        Command::ToeplitzSearch => toeplitz_search(config),
        Command::GeometryCheck => geometry_check(config),
    }
}

fn gen_instance(config: &ExperimentConfig) -> Result<Report> {
    let inst = HardInstanceL2::generate(config.n, config.seed)?;
    let json = inst.to_json();
    let structure = verify_pattern(&inst.pattern);
    let round_trip = HardInstanceL2::from_json(&json).map(|back| back == inst);
    let checks = vec![
        Check::new(
            "pattern_structure",
            structure.is_ok(),
            structure.err().map(|e| e.to_string()).unwrap_or_default(),
        ),
        Check::new(
            "update_frames",
            is_frame_string(&inst.u),
            "U is a string of 0101/1010 frames",
        ),
        Check::new(
            "json_round_trip",
            matches!(round_trip, Ok(true)),
            match round_trip {
                Err(e) => e.to_string(),
                Ok(false) => "decoded instance differs".into(),
                Ok(true) => String::new(),
            },
        ),
    ];
    Ok(Report::new(config, checks, to_value(&json)))
}

#[derive(Debug, Clone, Serialize)]
struct StreamRecord {
    arrival: u64,
    warmup: bool,
    output: Output,
}

/// Streams `warm-up ++ U` and checks, at every arrival that completes a
/// 4-frame past warm-up, that the incremental output equals recomputation.
pub fn stream_instance(n: u128, seed: u64, mode: Mode) -> Result<(Vec<Check>, Value)> {
    let inst = HardInstanceL2::generate(n, seed)?;
    let pattern = match mode {
        Mode::L2 => inst.pattern.f.clone(),
        Mode::Conv => random_conv_f(n, seed)?.f,
    };
    let mut state = StreamState::new(pattern, mode)?;
    let mut records = Vec::new();
    let mut compared = 0u64;
    let mut mismatches = Vec::new();
    for x in inst.warmup_prefix().iter().chain(inst.u.iter()) {
        state.advance(x);
        if state.arrivals_seen() % 4 != 0 {
            continue;
        }
        let warmup = state.in_warmup();
        let output = state.current();
        if !warmup {
            compared += 1;
            let offline = state.evaluate();
            if offline != output && mismatches.len() < 16 {
                mismatches.push(json!({
                    "arrival": state.arrivals_seen() - 1,
                    "online": output,
                    "offline": offline,
                }));
            }
        }
        records.push(StreamRecord {
            arrival: state.arrivals_seen() - 1,
            warmup,
            output,
        });
    }
    let checks = vec![Check::new(
        "online_matches_offline",
        mismatches.is_empty() && compared > 0,
        format!(
            "{compared} frame-aligned outputs compared, {} mismatched",
            mismatches.len()
        ),
    )];
    let result = json!({
        "mode": mode,
        "compared": compared,
        "mismatches": mismatches,
        "outputs": records,
    });
    Ok((checks, result))
}

fn stream(config: &ExperimentConfig) -> Result<Report> {
    let (checks, result) = stream_instance(config.n, config.seed, config.mode)?;
    Ok(Report::new(config, checks, result))
}

fn recover(config: &ExperimentConfig) -> Result<Report> {
    let ell = config
        .ell
        .ok_or_else(|| Error::invalid("recover needs --ell"))?;
    let report = run_round_trips(ell, config.trials, config.seed)?;
    let cert = entropy_certificate(ell, config.trials, config.seed)?;
    let checks = vec![
        Check::new(
            "round_trips",
            report.successes == report.trials,
            format!(
                "{}/{} trials recovered every even block",
                report.successes, report.trials
            ),
        ),
        Check::new(
            "entropy_certificate",
            cert.failures.is_empty(),
            format!(
                "{} distinct configurations decoded ({} bits of at most {})",
                cert.distinct_configurations, cert.certified_bits, cert.max_bits
            ),
        ),
    ];
    let result = json!({
        "round_trips": report,
        "certificate": cert,
        "unrecovered_even_blocks": unrecovered_even_blocks(ell),
    });
    Ok(Report::new(config, checks, result))
}

/// Streams the L2 hard instance once and, for every length, converts the
/// streamed outputs into sliding outputs, then decodes `U_ell = U[0..]`.
pub fn verify_end_to_end(n: u128, seed: u64) -> Result<(Vec<Check>, Value)> {
    let inst = HardInstanceL2::generate(n, seed)?;
    let pattern = &inst.pattern;
    let mut checks = vec![{
        let r = verify_pattern(pattern);
        Check::new(
            "pattern_structure",
            r.is_ok(),
            r.err().map(|e| e.to_string()).unwrap_or_default(),
        )
    }];

    let t = 0usize;
    let mut schedules = BTreeMap::new();
    let mut wanted = BTreeMap::new();
    for region in &pattern.layout {
        let sched = stream_schedule(pattern, region.ell, t)?;
        for s in &sched {
            wanted.insert(s.arrival, None::<(Distance, BitArray)>);
        }
        schedules.insert(region.ell, sched);
    }

    let mut state = StreamState::new(pattern.f.clone(), Mode::L2)?;
    for x in inst.warmup_prefix().iter() {
        state.advance(x);
    }
    for (a, x) in inst.u.iter().enumerate() {
        state.advance(x);
        if let Some(slot) = wanted.get_mut(&a) {
            let Output::L2(d) = state.current() else {
                unreachable!("L2 stream")
            };
            *slot = Some((d, state.window().clone()));
        }
    }

    let mut per_ell = Vec::new();
    for region in &pattern.layout {
        let ell = region.ell;
        let m = ell * lg(ell);
        let u_ell = inst.u.slice(t..t + m);
        let f_ell = pattern.f.slice(region.start..region.start + region.len);
        let offline = slide_l2(&f_ell, &u_ell)?;
        let mut converted = Vec::new();
        let mut adapter_errors = Vec::new();
        for s in &schedules[&ell] {
            let (d, window) = wanted[&s.arrival]
                .clone()
                .expect("every scheduled arrival is streamed");
            match streamed_to_slide(&pattern.f, &window, s.span_start..s.span_start + m, d) {
                Ok(v) => {
                    if v != offline[s.i] {
                        adapter_errors.push(format!(
                            "output {}: streamed {v}, offline {}",
                            s.i, offline[s.i]
                        ));
                    }
                    converted.push(v);
                }
                Err(e) => adapter_errors.push(format!("output {}: {e}", s.i)),
            }
        }
        checks.push(Check::new(
            format!("adapter_ell_{ell}"),
            adapter_errors.is_empty(),
            adapter_errors
                .first()
                .cloned()
                .unwrap_or_else(|| format!("{} outputs converted", converted.len())),
        ));

        let odd = (0..block_count(ell))
            .map(|j| u_block(&u_ell, ell, 2 * j + 1))
            .collect();
        let decoded = if adapter_errors.is_empty() {
            RecoveryInstance::new(ell, f_ell, converted, odd)
                .and_then(|ri| recover_even_blocks(&ri))
        } else {
            Err(Error::invalid("skipped: adapter failed"))
        };
        let (ok, detail) = match &decoded {
            Ok(blocks) => {
                let wrong: Vec<usize> = blocks
                    .iter()
                    .enumerate()
                    .filter(|(j, b)| **b != u_block(&u_ell, ell, 2 * j))
                    .map(|(j, _)| j)
                    .collect();
                (
                    wrong.is_empty(),
                    if wrong.is_empty() {
                        format!("{} even blocks recovered", blocks.len())
                    } else {
                        format!("blocks {wrong:?} decoded wrongly")
                    },
                )
            }
            Err(e) => (false, e.to_string()),
        };
        checks.push(Check::new(format!("recovery_ell_{ell}"), ok, detail));
        per_ell.push(json!({
            "ell": ell,
            "t": t,
            "first_arrival": schedules[&ell].last().map(|s| s.arrival),
            "last_arrival": schedules[&ell].first().map(|s| s.arrival),
            "outputs": schedules[&ell].len(),
            "unrecovered_even_blocks": unrecovered_even_blocks(ell),
        }));
    }
    Ok((checks, json!({ "lengths": per_ell })))
}

fn verify(config: &ExperimentConfig) -> Result<Report> {
    let (checks, result) = verify_end_to_end(config.n, config.seed)?;
    Ok(Report::new(config, checks, result))
}

fn toeplitz_search(config: &ExperimentConfig) -> Result<Report> {
    let r = search_witnesses(
        config.h,
        config.width,
        config.budget,
        config.seed,
        config.strategy,
    )?;
    let bound = config.width as f64;
    let checks = vec![Check::new(
        "entropy_bounds",
        r.best
            .as_ref()
            .is_none_or(|b| b.entropy_bits >= 0.0 && b.entropy_bits <= bound),
        format!("0 <= entropy <= width = {}", config.width),
    )];
    let mut report = Report::new(config, checks, to_value(&r));
    report.csv = Some(format!("{CSV_HEADER}\n{}\n", r.csv_row()));
    Ok(report)
}

fn geometry_check(config: &ExperimentConfig) -> Result<Report> {
    let n = config.n;
    let set = lengths_set(n)?;
    let nesting = validate_nesting(n)?;
    let ranges = check_interval_ranges(n)?;
    let mut checks = vec![
        Check::new(
            "nesting",
            nesting.passed(),
            format!(
                "margins {:?}",
                nesting.pairs.iter().map(|p| p.margin).collect::<Vec<_>>()
            ),
        ),
        Check::new(
            "interval_ranges",
            ranges.iter().all(|r| r.all_in_range),
            ranges
                .iter()
                .filter(|r| !r.all_in_range)
                .map(|r| match r.max_valid_t {
                    Some(t) => format!("ell = {}: t3 exceeds n - 1 for t > {t}", r.ell),
                    None => format!("ell = {}: no t fits", r.ell),
                })
                .collect::<Vec<_>>()
                .join("; "),
        ),
    ];
    let mut gaps = Vec::new();
    if log_n(n)? <= GAP_CHECK_MAX_LOG_N {
        for &ell in &set.lengths {
            let g = check_gap_disjointness(n, ell)?;
            checks.push(Check::new(
                format!("gap_disjointness_ell_{ell}"),
                g.first_overlap.is_none(),
                match g.first_overlap {
                    None => format!("{} windows pairwise disjoint", g.windows),
                    Some((a, b)) => format!("windows for t = {a} and t = {b} overlap"),
                },
            ));
            gaps.push(g);
        }
    }
    let result = json!({
        "lengths": set.lengths,
        "nesting": nesting,
        "ranges": ranges,
        "gap_disjointness": gaps,
        "gap_disjointness_listed": log_n(n)? <= GAP_CHECK_MAX_LOG_N,
    });
    Ok(Report::new(config, checks, result))
}
