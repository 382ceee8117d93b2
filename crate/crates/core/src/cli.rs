//! Command-line front end.
//!
//! Exit codes: 0 on success, 1 on a domain error, 2 on a usage error.
//! Every floating-point value is printed with at most 12 significant digits.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::Value;

use crate::bounds::{self, LOG_BASE};
use crate::builders;
use crate::chain;
use crate::model::{Hypothesis, HypothesisPair, Machine};
use crate::{search, sim, Error, Result};

#[derive(Debug, Parser)]
#[command(name = "detmem", version, about = "Finite-memory hypothesis testing with deterministic machines")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Converse and achievability bounds for a range of state counts.
    Bounds(BoundsArgs),
    /// Emit a machine in JSON form.
    #[command(subcommand)]
    Build(BuildCommand),
    /// Exact long-run error of a machine.
    Analyze(AnalyzeArgs),
    /// Total distance and occupancy for two-absorber machines.
    Diagnose(MachineArgs),
    /// Best deterministic machine by exhaustive search.
    Search(SearchArgs),
    /// Monte Carlo estimate of the time-average error.
    Simulate(SimulateArgs),
    /// Plot-ready tables over state counts or exponent limits.
    Sweep(SweepArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Debug, Args)]
struct PairArgs {
    #[arg(long)]
    p: f64,
    #[arg(long)]
    q: f64,
}

impl PairArgs {
    fn pair(&self) -> Result<HypothesisPair> {
        HypothesisPair::new(self.p, self.q)
    }
}

#[derive(Debug, Args)]
struct BoundsArgs {
    #[command(flatten)]
    pair: PairArgs,
    #[arg(long, default_value_t = 1)]
    s_min: usize,
    #[arg(long)]
    s_max: usize,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Debug, Subcommand)]
enum BuildCommand {
    /// Race between consecutive ones and consecutive zeros.
    RunMachine {
        #[arg(long)]
        states: usize,
        /// 1-indexed starting label, or `auto` for the balanced choice.
        #[arg(long, default_value = "auto")]
        init: String,
        #[arg(long)]
        p: Option<f64>,
        #[arg(long)]
        q: Option<f64>,
    },
    /// Accept when at least t*k - 1 of the first k bits are ones.
    CountOnes {
        #[arg(long)]
        k: usize,
        #[arg(long)]
        t: f64,
    },
    /// Store the first k bits and decide by likelihood ratio.
    StoreBits {
        #[arg(long)]
        k: usize,
        #[command(flatten)]
        pair: PairArgs,
    },
    /// Two states remembering the latest bit.
    LastBit,
}

#[derive(Debug, Args)]
struct MachineArgs {
    #[arg(long)]
    machine: PathBuf,
    #[command(flatten)]
    pair: PairArgs,
}

#[derive(Debug, Args)]
struct AnalyzeArgs {
    #[command(flatten)]
    inner: MachineArgs,
    /// Replace the decision table with the optimal one before evaluating.
    #[arg(long)]
    optimal_decision: bool,
}

#[derive(Debug, Args)]
struct SearchArgs {
    #[arg(long)]
    states: usize,
    #[command(flatten)]
    pair: PairArgs,
    #[arg(long, default_value_t = 1)]
    workers: usize,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Truth {
    H0,
    H1,
    Bayes,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[command(flatten)]
    inner: MachineArgs,
    #[arg(long)]
    steps: u64,
    #[arg(long)]
    trials: u64,
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    #[arg(long, value_enum, default_value_t = Truth::Bayes)]
    hypothesis: Truth,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SweepKind {
    /// One row per state count.
    States,
    /// Exponents along p -> 1 and q -> 0.
    Exponents,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[arg(long, value_enum, default_value_t = SweepKind::States)]
    kind: SweepKind,
    #[arg(long)]
    p: Option<f64>,
    #[arg(long)]
    q: Option<f64>,
    #[arg(long, default_value_t = 1)]
    s_min: usize,
    #[arg(long, default_value_t = 20)]
    s_max: usize,
    /// Largest state count solved by exhaustive search (0 disables it).
    #[arg(long, default_value_t = 4)]
    search_max: usize,
    /// Fixed parameter for the exponent sweep.
    #[arg(long, default_value_t = 0.3)]
    fixed: f64,
    #[arg(long, default_value_t = 6)]
    j_max: u32,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

/// Parse `args` (program name first), run the command and return the exit
/// code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{}", e.render());
                    return 0;
                }
                _ => 2,
            };
            let _ = write!(err, "{}", e.render());
            return code;
        }
    };
    match dispatch(cli.command, out) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            1
        }
    }
}

fn dispatch(command: Command, out: &mut dyn Write) -> Result<()> {
    match command {
        Command::Bounds(a) => cmd_bounds(a, out),
        Command::Build(b) => cmd_build(b, out),
        Command::Analyze(a) => cmd_analyze(a, out),
        Command::Diagnose(a) => {
            let (m, pair) = load(&a)?;
            emit_json(out, &chain::structural_diagnostics(&m, &pair)?)
        }
        Command::Search(a) => {
            let pair = a.pair.pair()?;
            emit_json(out, &search::optimal_error(a.states, &pair, a.workers)?)
        }
        Command::Simulate(a) => cmd_simulate(a, out),
        Command::Sweep(a) => cmd_sweep(a, out),
    }
}

fn load(a: &MachineArgs) -> Result<(Machine, HypothesisPair)> {
    let pair = a.pair.pair()?;
    Ok((read_machine(&a.machine)?, pair))
}

pub fn read_machine(path: &Path) -> Result<Machine> {
    let text = std::fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

fn state_range(s_min: usize, s_max: usize) -> Result<std::ops::RangeInclusive<usize>> {
    if s_min == 0 || s_min > s_max {
        return Err(Error::invalid(format!("need 1 <= s-min <= s-max, got {s_min}..{s_max}")));
    }
    Ok(s_min..=s_max)
}

fn cmd_bounds(a: BoundsArgs, out: &mut dyn Write) -> Result<()> {
    let pair = a.pair.pair()?;
    let rows = state_range(a.s_min, a.s_max)?.map(|s| bounds::bound_report(s, &pair)).collect::<Result<Vec<_>>>()?;
    match a.format {
        Format::Json => emit_json(out, &rows),
        Format::Csv => {
            writeln!(out, "S,p,q,randomized_lb,ergodic_lb,run_pe_exact,theorem2_ub,d_exp,r_exp,s_star")?;
            for r in &rows {
                let cells = [
                    r.states.to_string(),
                    num(r.p),
                    num(r.q),
                    num(r.randomized_lb),
                    num(r.ergodic_lb),
                    opt_num(r.run_ub_exact),
                    opt_num(r.theorem2_ub),
                    num(r.d_exp),
                    num(r.r_exp),
                    r.s_star.map(|s| s.to_string()).unwrap_or_default(),
                ];
                writeln!(out, "{}", cells.join(","))?;
            }
            Ok(())
        }
    }
}

fn cmd_build(b: BuildCommand, out: &mut dyn Write) -> Result<()> {
    let machine = match b {
        BuildCommand::RunMachine { states, init, p, q } => {
            let s = if init == "auto" {
                let (p, q) = p.zip(q).ok_or_else(|| Error::invalid("--init auto needs --p and --q"))?;
                builders::s_star(states, &HypothesisPair::new(p, q)?)?
            } else {
                init.parse::<usize>()
                    .map_err(|_| Error::invalid(format!("--init must be `auto` or a state label, got {init:?}")))?
            };
            builders::run_machine(states, s)?
        }
        BuildCommand::CountOnes { k, t } => builders::count_ones_machine(k, t)?.machine,
        BuildCommand::StoreBits { k, pair } => builders::store_bits_machine(k, &pair.pair()?)?,
        BuildCommand::LastBit => builders::last_bit_machine(),
    };
    emit_json(out, &machine)
}

#[derive(Serialize)]
struct AnalyzeOutput {
    p: f64,
    q: f64,
    machine: Machine,
    #[serde(flatten)]
    report: chain::ErrorReport,
}

fn cmd_analyze(a: AnalyzeArgs, out: &mut dyn Write) -> Result<()> {
    let (m, pair) = load(&a.inner)?;
    let (machine, report) = if a.optimal_decision {
        chain::optimize(&m, &pair)?
    } else {
        let r = chain::error_probability(&m, &pair)?;
        (m, r)
    };
    emit_json(out, &AnalyzeOutput { p: pair.p(), q: pair.q(), machine, report })
}

fn cmd_simulate(a: SimulateArgs, out: &mut dyn Write) -> Result<()> {
    let (m, pair) = load(&a.inner)?;
    let conditional =
        |h: Hypothesis| sim::simulate_time_average(&m, pair.theta(h), h, a.steps, a.trials, a.seed, a.workers);
    match a.hypothesis {
        Truth::H0 => emit_json(out, &conditional(Hypothesis::H0)?),
        Truth::H1 => emit_json(out, &conditional(Hypothesis::H1)?),
        Truth::Bayes => emit_json(out, &sim::simulate_bayes(&m, &pair, a.steps, a.trials, a.seed, a.workers)?),
    }
}

#[derive(Serialize)]
struct StateRow {
    #[serde(rename = "S")]
    states: usize,
    randomized_lb: f64,
    ergodic_lb: f64,
    pstar: Option<f64>,
    run_best_pe: Option<f64>,
    run_best_s: Option<usize>,
    run_pe_s_star: Option<f64>,
    s_star: Option<usize>,
    theorem2_ub: Option<f64>,
}

#[derive(Serialize)]
struct ExponentRow {
    series: &'static str,
    j: u32,
    p: f64,
    q: f64,
    d_exp: f64,
    r_exp: f64,
    target: f64,
}

fn cmd_sweep(a: SweepArgs, out: &mut dyn Write) -> Result<()> {
    match a.kind {
        SweepKind::States => {
            let (p, q) = a.p.zip(a.q).ok_or_else(|| Error::invalid("the states sweep needs --p and --q"))?;
            let pair = HypothesisPair::new(p, q)?;
            let mut rows = Vec::new();
            for s in state_range(a.s_min, a.s_max)? {
                let pstar =
                    if s <= a.search_max { Some(search::optimal_error(s, &pair, a.workers)?.pstar) } else { None };
                let report = bounds::bound_report(s, &pair)?;
                let best = if s >= 3 {
                    let mut best: Option<(f64, usize)> = None;
                    for start in 2..s {
                        let pe = bounds::run_machine_closed_form(s, start, &pair)?.pe;
                        if best.is_none_or(|(b, _)| pe < b) {
                            best = Some((pe, start));
                        }
                    }
                    best
                } else {
                    None
                };
                rows.push(StateRow {
                    states: s,
                    randomized_lb: report.randomized_lb,
                    ergodic_lb: report.ergodic_lb,
                    pstar,
                    run_best_pe: best.map(|b| b.0),
                    run_best_s: best.map(|b| b.1),
                    run_pe_s_star: report.run_ub_exact,
                    s_star: report.s_star,
                    theorem2_ub: report.theorem2_ub,
                });
            }
            match a.format {
                Format::Json => emit_json(out, &rows),
                Format::Csv => {
                    writeln!(
                        out,
                        "S,randomized_lb,ergodic_lb,pstar,run_best_pe,run_best_s,run_pe_s_star,s_star,theorem2_ub"
                    )?;
                    for r in &rows {
                        let cells = [
                            r.states.to_string(),
                            num(r.randomized_lb),
                            num(r.ergodic_lb),
                            opt_num(r.pstar),
                            opt_num(r.run_best_pe),
                            r.run_best_s.map(|s| s.to_string()).unwrap_or_default(),
                            opt_num(r.run_pe_s_star),
                            r.s_star.map(|s| s.to_string()).unwrap_or_default(),
                            opt_num(r.theorem2_ub),
                        ];
                        writeln!(out, "{}", cells.join(","))?;
                    }
                    Ok(())
                }
            }
        }
        SweepKind::Exponents => {
            let js: Vec<u32> = (1..=a.j_max).collect();
            let small: Vec<f64> = js.iter().map(|&j| 10f64.powi(-(j as i32))).collect();
            let ps: Vec<f64> = small.iter().map(|e| 1.0 - e).collect();
            let fixed = a.fixed;
            let gap = bounds::corollary_gap(fixed, &ps)?;
            let mirrored = bounds::corollary_gap_mirrored(1.0 - fixed, &small)?;
            let rows: Vec<ExponentRow> = gap
                .iter()
                .map(|r| ("p_to_one", r))
                .chain(mirrored.iter().map(|r| ("q_to_zero", r)))
                .zip(js.iter().chain(js.iter()))
                .map(|((series, r), &j)| ExponentRow {
                    series,
                    j,
                    p: r.p,
                    q: r.q,
                    d_exp: r.d_exp,
                    r_exp: r.r_exp,
                    target: r.target,
                })
                .collect();
            match a.format {
                Format::Json => emit_json(out, &rows),
                Format::Csv => {
                    writeln!(out, "series,j,p,q,d_exp,r_exp,target")?;
                    for r in &rows {
                        writeln!(
                            out,
                            "{},{},{},{},{},{},{}",
                            r.series,
                            r.j,
                            num(r.p),
                            num(r.q),
                            num(r.d_exp),
                            num(r.r_exp),
                            num(r.target)
                        )?;
                    }
                    Ok(())
                }
            }
        }
    }
}

/// `x` rounded to 12 significant digits.
pub fn round_sig(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{x:.11e}").parse().unwrap_or(x)
}

/// CSV rendering of `x` with 12 significant digits.
pub fn num(x: f64) -> String {
    let r = round_sig(x);
    let a = r.abs();
    if r == 0.0 || (1e-4..1e15).contains(&a) || !r.is_finite() {
        format!("{r}")
    } else {
        format!("{r:e}")
    }
}

fn opt_num(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

fn round_value(v: &mut Value) {
    match v {
        Value::Number(n) if !(n.is_u64() || n.is_i64()) => {
            if let Some(r) = n.as_f64().and_then(|x| serde_json::Number::from_f64(round_sig(x))) {
                *n = r;
            }
        }
        Value::Array(items) => items.iter_mut().for_each(round_value),
        Value::Object(map) => map.values_mut().for_each(round_value),
        _ => {}
    }
}

fn emit_json<T: Serialize>(out: &mut dyn Write, value: &T) -> Result<()> {
    let mut v = serde_json::to_value(value)?;
    if let Value::Object(map) = &mut v {
        // exponents and log-domain quantities are in bits
        if map.contains_key("d_exp") || map.contains_key("log2_pe") {
            map.entry("log_base").or_insert(Value::from(LOG_BASE));
        }
    }
    round_value(&mut v);
    serde_json::to_writer_pretty(&mut *out, &v)?;
    writeln!(out)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn call(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let argv = std::iter::once("detmem").chain(args.iter().copied());
        let code = run(argv, &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn rounding() {
        assert_eq!(round_sig(0.1), 0.1);
        assert_eq!(round_sig(1.0 / 3.0), 0.333333333333);
        assert_eq!(num(1.0 / 3.0), "0.333333333333");
        assert_eq!(num(1.5e-20), "1.5e-20");
        assert_eq!(num(0.0), "0");
    }

    #[test]
    fn exit_codes() {
        assert_eq!(call(&[]).0, 2);
        assert_eq!(call(&["frobnicate"]).0, 2);
        assert_eq!(call(&["bounds", "--p", "0.9"]).0, 2);
        assert_eq!(call(&["--help"]).0, 0);
        let (code, _, err) = call(&["bounds", "--p", "0.1", "--q", "0.9", "--s-max", "3"]);
        assert_eq!(code, 1);
        assert!(err.starts_with("error:"));
    }

    #[test]
    fn build_last_bit() {
        let (code, out, _) = call(&["build", "last-bit"]);
        assert_eq!(code, 0);
        let m: Machine = serde_json::from_str(&out).unwrap();
        assert_eq!(m, builders::last_bit_machine());
    }

    #[test]
    fn bounds_csv_shape() {
        let (code, out, _) = call(&["bounds", "--p", "0.9", "--q", "0.1", "--s-max", "20", "--format", "csv"]);
        assert_eq!(code, 0);
        let lines: Vec<&str> = out.lines().collect();
        assert_eq!(lines.len(), 21);
        assert!(lines[1..].iter().all(|l| l.split(',').count() == 10));
    }
}
