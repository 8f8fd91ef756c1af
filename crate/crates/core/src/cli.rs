//! Command-line front end.
//!
//! Exit codes: 0 success, 1 decode or check mismatch (including a partial
//! decode), 2 usage or configuration error.
//!
//! Scenario parameters come from an optional `key=value` config file
//! (`#` starts a comment) and are overridden by flags.

use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::channel::{parse_trace, superpose, trace_to_string, NodeId, Transmission};
use crate::chirp::{encode_frame, symbols, Frame, RadioConfig, SymbolValue};
use crate::desync::{
    decode_n, decode_two, detect_frontiers, find_indistinguishable, DecodeReport, LedgerStep,
    LengthHint,
};
use crate::netsim::{
    decode_rate_vs_collision_size, run_scenario, sweep, threads_from_env, with_threads, Metrics,
    Mode, OffsetLayout, Scenario, SweepParam, SweepResult,
};
use crate::sync::{eliminate, record_collision};

pub const EXIT_OK: i32 = 0;
pub const EXIT_MISMATCH: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Parser, Debug)]
#[command(name = "chirp-collide", version, about = "Symbolic LoRa collision lab")]
struct Cli {
    /// Worker threads (overrides CHIRP_COLLIDE_THREADS).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Decode the two-node worked example and print the frontier ledger.
    DemoFig3 {
        /// Also write the receiver trace here.
        #[arg(long)]
        trace_out: Option<PathBuf>,
        /// Replay the same frames aligned and resolve them by elimination.
        #[arg(long)]
        sync: bool,
    },
    /// Run one network scenario and print a CSV row.
    Simulate {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a parameter sweep or a figure preset.
    Sweep {
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// Figure preset: 4, 5, 6, 7 or 8.
        #[arg(long, conflicts_with_all = ["param", "values"])]
        figure: Option<u8>,
        /// sf, duty_cycle or collision_size.
        #[arg(long, requires = "values")]
        param: Option<String>,
        /// Comma-separated values.
        #[arg(long, requires = "param")]
        values: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Decode a trace file.
    DecodeTrace {
        path: PathBuf,
        /// desync or sync.
        #[arg(long, default_value = "desync")]
        mode: String,
        /// Number of colliding frames.
        #[arg(long, default_value_t = 2)]
        n: usize,
        #[arg(long, default_value_t = 7)]
        sf: u8,
        #[arg(long, default_value_t = 125_000)]
        bw: u32,
        #[arg(long, default_value_t = 8)]
        preamble: usize,
        #[arg(long)]
        delta_ticks: Option<u64>,
        /// Comma-separated data lengths in start order.
        #[arg(long, conflicts_with = "header")]
        lengths: Option<String>,
        /// Frames carry a two-symbol length header.
        #[arg(long)]
        header: bool,
    },
    /// Search for distinct inputs producing the same trace.
    FindIndistinguishable {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 2)]
        sf: u8,
        /// Data symbols per frame.
        #[arg(long, default_value_t = 3)]
        len: usize,
        #[arg(long, default_value_t = 2)]
        preamble: usize,
        /// Largest domain enumerated exhaustively, and sample count beyond it.
        #[arg(long, default_value_t = 1_000_000)]
        budget: u64,
        /// Write the trace of the first group here.
        #[arg(long)]
        trace_out: Option<PathBuf>,
    },
}

#[derive(Args, Debug, Default)]
struct ScenarioArgs {
    /// key=value config file; flags override its entries.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    mode: Option<String>,
    #[arg(long)]
    sf: Option<String>,
    #[arg(long)]
    bw: Option<String>,
    #[arg(long)]
    preamble: Option<String>,
    #[arg(long)]
    delta_ticks: Option<String>,
    #[arg(long)]
    eds: Option<String>,
    #[arg(long)]
    p: Option<String>,
    /// Same as --p.
    #[arg(long)]
    duty_cycle: Option<String>,
    #[arg(long)]
    slots: Option<String>,
    #[arg(long)]
    payload_bytes: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    duty_silence_factor: Option<String>,
    #[arg(long)]
    trials: Option<String>,
    #[arg(long)]
    replications: Option<String>,
    #[arg(long)]
    offset_layout: Option<String>,
    #[arg(long)]
    retransmission_silence: Option<String>,
}

/// A usage or configuration problem (exit 2).
#[derive(Debug)]
struct UsageError(String);

impl<E: std::fmt::Display> From<E> for UsageError {
    fn from(e: E) -> Self {
        UsageError(e.to_string())
    }
}

const KEYS: &[&str] = &[
    "mode",
    "sf",
    "bw",
    "preamble",
    "delta_ticks",
    "eds",
    "p",
    "duty_cycle",
    "slots",
    "payload_bytes",
    "seed",
    "duty_silence_factor",
    "trials",
    "replications",
    "offset_layout",
    "retransmission_silence",
];

/// A setting and where it came from, for diagnostics.
struct Setting {
    key: String,
    value: String,
    origin: String,
}

fn read_config(path: &Path) -> Result<Vec<Setting>, UsageError> {
    let text = fs::read_to_string(path)
        .map_err(|e| UsageError(format!("cannot read config {}: {e}", path.display())))?;
    let mut out = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let origin = format!("{} line {}", path.display(), n + 1);
        let Some((k, v)) = line.split_once('=') else {
            return Err(UsageError(format!("{origin}: expected key=value, got {line:?}")));
        };
        let key = k.trim().to_string();
        if !KEYS.contains(&key.as_str()) {
            return Err(UsageError(format!("{origin}: unknown key {key:?}")));
        }
        out.push(Setting {
            key,
            value: v.trim().to_string(),
            origin,
        });
    }
    Ok(out)
}

impl ScenarioArgs {
    fn settings(&self) -> Result<Vec<Setting>, UsageError> {
        let mut all = match &self.config {
            Some(path) => read_config(path)?,
            None => Vec::new(),
        };
        let flags = [
            ("mode", &self.mode),
            ("sf", &self.sf),
            ("bw", &self.bw),
            ("preamble", &self.preamble),
            ("delta_ticks", &self.delta_ticks),
            ("eds", &self.eds),
            ("p", &self.p),
            ("duty_cycle", &self.duty_cycle),
            ("slots", &self.slots),
            ("payload_bytes", &self.payload_bytes),
            ("seed", &self.seed),
            ("duty_silence_factor", &self.duty_silence_factor),
            ("trials", &self.trials),
            ("replications", &self.replications),
            ("offset_layout", &self.offset_layout),
            ("retransmission_silence", &self.retransmission_silence),
        ];
        for (key, value) in flags {
            if let Some(v) = value {
                all.push(Setting {
                    key: key.to_string(),
                    value: v.clone(),
                    origin: format!("--{}", key.replace('_', "-")),
                });
            }
        }
        Ok(all)
    }

    /// Builds the scenario; later settings win, so flags beat the config file.
    fn scenario(&self) -> Result<Scenario, UsageError> {
        let settings = self.settings()?;
        let get = |key: &str| settings.iter().rev().find(|s| s.key == key);
        fn parse<T: std::str::FromStr>(s: &Setting) -> Result<T, UsageError>
        where
            T::Err: std::fmt::Display,
        {
            s.value
                .parse()
                .map_err(|e| UsageError(format!("{}: invalid {} {:?}: {e}", s.origin, s.key, s.value)))
        }

        let sf = get("sf").map(parse).transpose()?.unwrap_or(7);
        let bw = get("bw").map(parse).transpose()?.unwrap_or(125_000);
        let preamble = get("preamble").map(parse).transpose()?.unwrap_or(8);
        let mut cfg = RadioConfig::new(sf, bw, preamble)?;
        if let Some(d) = get("delta_ticks") {
            cfg = cfg.with_delta(parse(d)?)?;
        }
        let mode = match get("mode") {
            Some(s) => Mode::parse(&s.value)
                .ok_or_else(|| UsageError(format!("{}: unknown mode {:?}", s.origin, s.value)))?,
            None => Mode::Desync,
        };
        let seed = get("seed")
            .ok_or_else(|| UsageError("a seed is required (--seed or seed= in the config)".into()))?;
        let mut s = Scenario::new(mode, cfg, parse(seed)?);
        // duty_cycle and p name the same knob; whichever comes last wins.
        if let Some(p) = settings.iter().rev().find(|s| s.key == "p" || s.key == "duty_cycle") {
            s.p = parse(p)?;
        }
        if let Some(v) = get("eds") {
            s.num_eds = parse(v)?;
        }
        if let Some(v) = get("slots") {
            s.slots = parse(v)?;
        }
        if let Some(v) = get("payload_bytes") {
            s.payload_bytes = parse(v)?;
        }
        if let Some(v) = get("duty_silence_factor") {
            s.duty_silence_factor = parse(v)?;
        }
        if let Some(v) = get("trials") {
            s.trials = parse(v)?;
        }
        if let Some(v) = get("replications") {
            s.replications = parse(v)?;
        }
        if let Some(v) = get("offset_layout") {
            s.offset_layout = OffsetLayout::parse(&v.value)
                .ok_or_else(|| UsageError(format!("{}: unknown offset layout {:?}", v.origin, v.value)))?;
        }
        if let Some(v) = get("retransmission_silence") {
            s.retransmission_silence = parse(v)?;
        }
        s.validate()?;
        Ok(s)
    }
}

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() {
                err.write_all(text.as_bytes())
            } else {
                out.write_all(text.as_bytes())
            };
            return code;
        }
    };
    let threads = cli.threads.or_else(threads_from_env);
    let result = with_threads(threads, || dispatch(cli.command));
    match result {
        Ok(Outcome { stdout, stderr, code }) => {
            let _ = out.write_all(stdout.as_bytes());
            let _ = err.write_all(stderr.as_bytes());
            code
        }
        Err(UsageError(msg)) => {
            let _ = writeln!(err, "error: {msg}");
            EXIT_USAGE
        }
    }
}

/// Runs with the process arguments and standard streams.
pub fn main_exit_code() -> i32 {
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run(std::env::args_os(), &mut stdout.lock(), &mut stderr.lock())
}

struct Outcome {
    stdout: String,
    stderr: String,
    code: i32,
}

impl Outcome {
    fn ok(stdout: String) -> Self {
        Outcome {
            stdout,
            stderr: String::new(),
            code: EXIT_OK,
        }
    }
}

fn dispatch(cmd: Command) -> Result<Outcome, UsageError> {
    match cmd {
        Command::DemoFig3 { trace_out, sync } => demo_fig3(trace_out.as_deref(), sync),
        Command::Simulate { scenario, out } => simulate(&scenario, out.as_deref()),
        Command::Sweep {
            scenario,
            figure,
            param,
            values,
            out,
        } => run_sweep(&scenario, figure, param, values, out.as_deref()),
        Command::DecodeTrace {
            path,
            mode,
            n,
            sf,
            bw,
            preamble,
            delta_ticks,
            lengths,
            header,
        } => {
            let mut cfg = RadioConfig::new(sf, bw, preamble)?;
            if let Some(d) = delta_ticks {
                cfg = cfg.with_delta(d)?;
            }
            let hint = match (lengths, header) {
                (Some(l), _) => LengthHint::Declared(parse_list(&l, "lengths")?),
                (None, true) => LengthHint::Header,
                (None, false) => LengthHint::UntilSilence,
            };
            decode_trace(&path, &mode, n, &cfg, &hint)
        }
        Command::FindIndistinguishable {
            n,
            sf,
            len,
            preamble,
            budget,
            trace_out,
        } => find(n, sf, len, preamble, budget, trace_out.as_deref()),
    }
}

fn parse_list<T: std::str::FromStr>(s: &str, what: &str) -> Result<Vec<T>, UsageError>
where
    T::Err: std::fmt::Display,
{
    s.split(',')
        .map(|v| {
            v.trim()
                .parse()
                .map_err(|e| UsageError(format!("invalid {what} entry {v:?}: {e}")))
        })
        .collect()
}

fn write_output(path: Option<&Path>, text: String) -> Result<Outcome, UsageError> {
    match path {
        Some(p) => {
            fs::write(p, &text).map_err(|e| UsageError(format!("cannot write {}: {e}", p.display())))?;
            Ok(Outcome::ok(String::new()))
        }
        None => Ok(Outcome::ok(text)),
    }
}

// ---------------------------------------------------------------------------
// demo-fig3
// ---------------------------------------------------------------------------

pub const DEMO_FRAMES: [[u16; 5]; 2] = [[1, 1, 3, 2, 2], [3, 0, 2, 3, 1]];
pub const DEMO_SUMMARY: &str = "n1=(1,1,3,2,2) n2=(3,0,2,3,1)";

/// Radio settings of the worked example: sf 2, two preamble chirps, one-tick δ.
pub fn demo_config() -> RadioConfig {
    RadioConfig::new(2, 125_000, 2)
        .and_then(|c| c.with_delta(1))
        .expect("valid demo config")
}

fn demo_transmissions(starts: [u64; 2], cfg: &RadioConfig) -> Vec<Transmission> {
    DEMO_FRAMES
        .iter()
        .zip(starts)
        .enumerate()
        .map(|(i, (f, s))| Transmission {
            node_id: NodeId(i as u32),
            start_tick: s,
            schedule: encode_frame(&Frame::known(f, cfg).expect("valid frame"), cfg).expect("encodable"),
        })
        .collect()
}

/// Ledger lines followed by the summary line.
pub fn transcript(report: &DecodeReport) -> String {
    let mut s = String::new();
    for e in &report.ledger {
        let _ = writeln!(s, "{e}");
    }
    let _ = writeln!(s, "{}", report.summary());
    s
}

fn demo_fig3(trace_out: Option<&Path>, sync: bool) -> Result<Outcome, UsageError> {
    let cfg = demo_config();
    if sync {
        return demo_sync(&cfg);
    }
    let trace = superpose(&demo_transmissions([0, 1], &cfg), &cfg);
    if let Some(p) = trace_out {
        fs::write(p, trace_to_string(&trace))
            .map_err(|e| UsageError(format!("cannot write {}: {e}", p.display())))?;
    }
    let decoded = detect_frontiers(&trace, &cfg, 2)
        .and_then(|info| decode_two(&trace, &info, &cfg, &LengthHint::UntilSilence));
    let report = match decoded {
        Ok(r) => r,
        Err(e) => {
            return Ok(Outcome {
                stdout: String::new(),
                stderr: format!("error: {e}\n"),
                code: EXIT_MISMATCH,
            })
        }
    };
    let stdout = transcript(&report);
    if report.summary() == DEMO_SUMMARY {
        Ok(Outcome::ok(stdout))
    } else {
        Ok(Outcome {
            stdout,
            stderr: format!("mismatch:\n  expected {DEMO_SUMMARY}\n  got      {}\n", report.summary()),
            code: EXIT_MISMATCH,
        })
    }
}

fn demo_sync(cfg: &RadioConfig) -> Result<Outcome, UsageError> {
    let trace = superpose(&demo_transmissions([0, 0], cfg), cfg);
    let info = detect_frontiers(&trace, cfg, 1)?;
    let record = record_collision(&trace, &info, cfg, 2)?;
    let mut s = String::from("collision record:\n");
    s.push_str(&record.to_text());
    let mut code = EXIT_OK;
    for (sent, other) in [(0, 1), (1, 0)] {
        let resent = symbols(&DEMO_FRAMES[sent]);
        let result = eliminate(&record, &resent)?;
        let _ = writeln!(
            s,
            "n{} retransmits ({}) -> n{}=({})",
            sent + 1,
            join(&resent),
            other + 1,
            join(&result.frame)
        );
        if result.frame != symbols(&DEMO_FRAMES[other]) {
            code = EXIT_MISMATCH;
        }
    }
    Ok(Outcome {
        stdout: s,
        stderr: String::new(),
        code,
    })
}

fn join(v: &[SymbolValue]) -> String {
    v.iter().map(|s| s.to_string()).collect::<Vec<_>>().join(",")
}

// ---------------------------------------------------------------------------
// simulate / sweep
// ---------------------------------------------------------------------------

pub const SIMULATE_HEADER: &str = "mode,sf,p,duty_cycle,slots,seed,frames_offered,frames_delivered,retransmissions,throughput_bps,decode_rate_n2,decode_rate_n3";

fn rate(r: Option<f64>) -> String {
    r.map(|v| format!("{v:.6}")).unwrap_or_default()
}

/// `duty_cycle` is the nominal cap set by `p` (one slot per frame airtime).
fn simulate_row(s: &Scenario, m: &Metrics) -> String {
    format!(
        "{},{},{},{},{},{},{},{},{},{:.3},{},{}",
        s.mode,
        s.cfg.sf,
        s.p,
        s.p,
        s.slots,
        s.seed,
        m.frames_offered,
        m.frames_delivered,
        m.retransmissions,
        m.throughput_bps,
        rate(m.decode_rate(2)),
        rate(m.decode_rate(3)),
    )
}

fn simulate(args: &ScenarioArgs, out: Option<&Path>) -> Result<Outcome, UsageError> {
    let s = args.scenario()?;
    let m = run_scenario(&s)?;
    let csv = format!("{SIMULATE_HEADER}\n{}\n", simulate_row(&s, &m));
    let summary = format!(
        "{}: {} of {} frames delivered, {:.3} bps\n",
        s.mode, m.frames_delivered, m.frames_offered, m.throughput_bps
    );
    let mut o = write_output(out, csv)?;
    o.stderr = summary;
    Ok(o)
}

const DECODE_HEADER: &str = "figure,mode,sf,collision_size,trials,frames,decoded,decode_rate,feasible";
const THROUGHPUT_HEADER: &str = "figure,mode,sf,duty_cycle,slots,seed,frames_offered,frames_delivered,retransmissions,throughput_bps,gain_pct";

fn decode_rows(
    figure: u8,
    base: &Scenario,
    modes: &[Mode],
    sfs: &[u8],
    sizes: &[usize],
) -> Result<String, UsageError> {
    let mut csv = format!("{DECODE_HEADER}\n");
    for &sf in sfs {
        for &mode in modes {
            let mut s = base.clone();
            s.mode = mode;
            s.cfg = RadioConfig::new(sf, base.cfg.bw, base.cfg.preamble_len)?;
            for row in decode_rate_vs_collision_size(&s, sizes)? {
                let _ = writeln!(
                    csv,
                    "{figure},{mode},{sf},{},{},{},{},{:.6},{}",
                    row.size,
                    s.trials,
                    row.frames,
                    row.decoded,
                    row.rate(),
                    row.feasible
                );
            }
        }
    }
    Ok(csv)
}

const DUTY_CYCLES: [f64; 10] = [0.001, 0.002, 0.003, 0.004, 0.005, 0.006, 0.007, 0.008, 0.009, 0.01];

fn throughput_rows(figure: u8, base: &Scenario, modes: &[Mode]) -> Result<String, UsageError> {
    let mut per_mode = Vec::new();
    for &mode in modes {
        let mut s = base.clone();
        s.mode = mode;
        let rows = sweep(&s, SweepParam::DutyCycle, &DUTY_CYCLES)?;
        per_mode.push(rows);
    }
    let mut csv = format!("{THROUGHPUT_HEADER}\n");
    let baseline = &per_mode[0];
    for rows in &per_mode {
        for (row, base_row) in rows.iter().zip(baseline) {
            let (SweepResult::Metrics(m), SweepResult::Metrics(b)) = (&row.result, &base_row.result) else {
                continue;
            };
            let s = &row.scenario;
            let gain = 100.0 * (m.throughput_bps / b.throughput_bps - 1.0);
            let _ = writeln!(
                csv,
                "{figure},{},{},{},{},{},{},{},{},{:.3},{:.3}",
                s.mode,
                s.cfg.sf,
                s.p,
                s.slots,
                s.seed,
                m.frames_offered,
                m.frames_delivered,
                m.retransmissions,
                m.throughput_bps,
                gain
            );
        }
    }
    Ok(csv)
}

fn figure_csv(figure: u8, base: &Scenario) -> Result<String, UsageError> {
    use Mode::*;
    match figure {
        4 => decode_rows(4, base, &[BaselineLoRa, Desync], &[base.cfg.sf], &[1, 2, 3, 4, 5]),
        5 => decode_rows(5, base, &[BaselineLoRa, Desync], &[7, 8, 9, 10, 11, 12], &[2, 3]),
        6 => throughput_rows(6, base, &[BaselineLoRa, Desync]),
        7 => decode_rows(7, base, &[BaselineLoRa, Sync], &[base.cfg.sf], &[1, 2, 3, 4, 5]),
        8 => throughput_rows(8, base, &[BaselineLoRa, Sync]),
        other => Err(UsageError(format!("unknown figure preset {other} (expected 4 to 8)"))),
    }
}

fn run_sweep(
    args: &ScenarioArgs,
    figure: Option<u8>,
    param: Option<String>,
    values: Option<String>,
    out: Option<&Path>,
) -> Result<Outcome, UsageError> {
    let base = args.scenario()?;
    let csv = match (figure, param, values) {
        (Some(f), _, _) => figure_csv(f, &base)?,
        (None, Some(p), Some(v)) => {
            let param = SweepParam::parse(&p)
                .ok_or_else(|| UsageError(format!("unknown sweep parameter {p:?}")))?;
            let values: Vec<f64> = parse_list(&v, "values")?;
            let rows = sweep(&base, param, &values)?;
            let mut csv = String::new();
            match param {
                SweepParam::CollisionSize => {
                    let _ = writeln!(csv, "param,value,mode,sf,trials,frames,decoded,decode_rate,feasible");
                }
                _ => {
                    let _ = writeln!(csv, "param,value,{SIMULATE_HEADER}");
                }
            }
            for row in rows {
                let s = &row.scenario;
                match &row.result {
                    SweepResult::Metrics(m) => {
                        let _ = writeln!(csv, "{},{},{}", param.name(), row.value, simulate_row(s, m));
                    }
                    SweepResult::DecodeRate(d) => {
                        let _ = writeln!(
                            csv,
                            "{},{},{},{},{},{},{},{:.6},{}",
                            param.name(),
                            row.value,
                            s.mode,
                            s.cfg.sf,
                            s.trials,
                            d.frames,
                            d.decoded,
                            d.rate(),
                            d.feasible
                        );
                    }
                }
            }
            csv
        }
        _ => return Err(UsageError("sweep needs --figure or --param with --values".into())),
    };
    write_output(out, csv)
}

// ---------------------------------------------------------------------------
// decode-trace / find-indistinguishable
// ---------------------------------------------------------------------------

fn decode_trace(
    path: &Path,
    mode: &str,
    n: usize,
    cfg: &RadioConfig,
    hint: &LengthHint,
) -> Result<Outcome, UsageError> {
    let text = fs::read_to_string(path)
        .map_err(|e| UsageError(format!("cannot read {}: {e}", path.display())))?;
    let trace = parse_trace(&text, cfg)?;
    if trace.is_silent() {
        return Ok(Outcome::ok("no transmissions detected\n".into()));
    }
    let failed = |e: &dyn std::fmt::Display| Outcome {
        stdout: String::new(),
        stderr: format!("error: {e}\n"),
        code: EXIT_MISMATCH,
    };
    match mode {
        "sync" => {
            let record = detect_frontiers(&trace, cfg, 1)
                .and_then(|info| record_collision(&trace, &info, cfg, n));
            Ok(match record {
                Ok(r) => Outcome::ok(r.to_text()),
                Err(e) => failed(&e),
            })
        }
        "desync" => {
            if n < 2 {
                return Err(UsageError("desync decoding needs --n of at least 2".into()));
            }
            let report = detect_frontiers(&trace, cfg, n).and_then(|info| {
                if n == 2 {
                    decode_two(&trace, &info, cfg, hint)
                } else {
                    decode_n(&trace, &info, cfg, hint)
                }
            });
            let report = match report {
                Ok(r) => r,
                Err(e) => return Ok(failed(&e)),
            };
            let stdout = if n == 2 {
                transcript(&report)
            } else {
                format!("{}{}\n", report.to_text(), report.summary())
            };
            Ok(Outcome {
                stdout,
                stderr: String::new(),
                code: if report.fully_decoded { EXIT_OK } else { EXIT_MISMATCH },
            })
        }
        other => Err(UsageError(format!("unknown decode mode {other:?} (desync or sync)"))),
    }
}

fn find(
    n: usize,
    sf: u8,
    len: usize,
    preamble: usize,
    budget: u64,
    trace_out: Option<&Path>,
) -> Result<Outcome, UsageError> {
    if n < 2 {
        return Err(UsageError("--n must be at least 2".into()));
    }
    let cfg = RadioConfig::new(sf, 125_000, preamble)?;
    let groups = find_indistinguishable(n, len, &cfg, budget);
    let mut s = format!("{} group(s) of inputs sharing a trace\n", groups.len());
    for (i, g) in groups.iter().enumerate() {
        let _ = writeln!(s, "group {}: {} inputs", i + 1, g.instances.len());
        for inst in &g.instances {
            let frames: Vec<String> = inst
                .frames
                .iter()
                .enumerate()
                .map(|(k, f)| format!("n{}=({})", k + 1, join(f)))
                .collect();
            let _ = writeln!(s, "  {}", frames.join(" "));
        }
    }
    if let (Some(p), Some(g)) = (trace_out, groups.first()) {
        fs::write(p, trace_to_string(&g.trace))
            .map_err(|e| UsageError(format!("cannot write {}: {e}", p.display())))?;
    }
    Ok(Outcome::ok(s))
}

/// `F_lim` checkpoints of the worked example: t2 `F_lim-`, t3 `F_lim+`, t4 `F_lim-`.
pub fn demo_checkpoints(report: &DecodeReport) -> Option<[String; 3]> {
    let step = |label: usize| report.ledger.iter().find(|e| e.label == label).map(|e| &e.step);
    let t2 = match step(2)? {
        LedgerStep::Recorded { f_minus } => f_minus.to_string(),
        _ => return None,
    };
    let (t3, t4) = match (step(3)?, step(4)?) {
        (LedgerStep::Compared { f_plus, .. }, LedgerStep::Compared { f_minus, .. }) => {
            (f_plus.to_string(), f_minus.to_string())
        }
        _ => return None,
    };
    Some([t2, t3, t4])
}
