use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use cct_core::analytic::{self, AnalyticCct, InterTxInputs};
use cct_core::experiment::{self, Execution, SweepAxis, SweepProtocol, SweepSpec};
use cct_core::report::TraceAnalysis;
use cct_core::sim::{self, Protocol, SimConfig};
use cct_core::{trace_io, AlohaParams, CsmaMode, CsmaParams, SlotClock, Tick};

mod units;

use units::{Duration, Range};

/// Relative output paths are resolved against this directory when set.
const OUT_DIR_ENV: &str = "CCT_OUT_DIR";

#[derive(Parser)]
#[command(name = "cct", version, about = "Channel cycle time: simulate, analyze, evaluate, sweep")]
struct Cli {
    /// Microseconds per slot for `us`-suffixed durations and microsecond output.
    #[arg(long, global = true, default_value_t = SlotClock::DEFAULT_MICROS_PER_SLOT)]
    micros_per_slot: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a protocol, write the trace and print its metrics.
    Simulate(SimulateArgs),
    /// Compute metrics of a trace file.
    Analyze(AnalyzeArgs),
    /// Evaluate closed-form channel cycle times.
    #[command(subcommand)]
    Analytic(AnalyticCommand),
    /// Sweep one parameter and emit CSV.
    Sweep(SweepArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum ProtocolArg {
    Aloha,
    CsmaRtscts,
    CsmaBasic,
    Tdma,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Rtscts,
    Basic,
}

impl From<ModeArg> for CsmaMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Rtscts => CsmaMode::RtsCts,
            ModeArg::Basic => CsmaMode::Basic,
        }
    }
}

#[derive(Args, Clone)]
struct CsmaArgs {
    #[arg(long, default_value_t = 32)]
    cw_min: u32,
    #[arg(long, default_value_t = 5)]
    beta: u32,
    #[arg(long, default_value = "4")]
    difs: Duration,
    #[arg(long, default_value = "30")]
    pkt: Duration,
    #[arg(long, default_value = "1")]
    ack: Duration,
    #[arg(long, default_value = "1")]
    rts: Duration,
    #[arg(long, default_value = "1")]
    cts: Duration,
}

impl CsmaArgs {
    fn params(&self, clock: &SlotClock) -> Result<CsmaParams, Failure> {
        Ok(CsmaParams::new(
            self.cw_min,
            self.beta,
            self.difs.to_slots(clock)?,
            self.pkt.to_slots(clock)?,
            self.ack.to_slots(clock)?,
            self.rts.to_slots(clock)?,
            self.cts.to_slots(clock)?,
        )?)
    }
}

#[derive(Args, Clone)]
struct InterTxArgs {
    /// Probability of no intervening transmission.
    #[arg(long, default_value_t = analytic::DEFAULT_P_NI0)]
    p_ni0: f64,
    /// Mean number of intervening transmissions.
    #[arg(long, default_value_t = analytic::DEFAULT_E_NI)]
    e_ni: f64,
}

impl From<&InterTxArgs> for InterTxInputs {
    fn from(a: &InterTxArgs) -> Self {
        InterTxInputs {
            p_ni0: a.p_ni0,
            e_ni: a.e_ni,
        }
    }
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long, value_enum)]
    protocol: ProtocolArg,
    /// Horizon.
    #[arg(long)]
    slots: Duration,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.5)]
    pa: f64,
    #[arg(long, default_value_t = 0.5)]
    pb: f64,
    /// Aloha slot length.
    #[arg(long, default_value = "1")]
    slot: Duration,
    /// TDMA packet lengths, one per user.
    #[arg(long, value_delimiter = ',', default_value = "30,30")]
    lengths: Vec<Duration>,
    #[command(flatten)]
    csma: CsmaArgs,
    /// Trace output path.
    #[arg(long)]
    out: Option<PathBuf>,
    /// CSMA/CA contention audit log path.
    #[arg(long)]
    audit: Option<PathBuf>,
    /// Events before this time are left out of the printed metrics.
    #[arg(long, default_value = "0")]
    warmup: Duration,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct AnalyzeArgs {
    trace: PathBuf,
    #[arg(long)]
    json: bool,
    /// Include refresh moments and cycle times per user.
    #[arg(long)]
    detail: bool,
    #[arg(long, default_value = "0")]
    warmup: Duration,
}

#[derive(Subcommand)]
enum AnalyticCommand {
    /// Two-user slotted Aloha.
    Aloha {
        #[arg(long)]
        pa: f64,
        #[arg(long)]
        pb: f64,
        #[arg(long, default_value = "1")]
        slot: Duration,
    },
    /// Two-user CSMA/CA.
    Csma {
        #[arg(long, value_enum, default_value = "rtscts")]
        mode: ModeArg,
        #[command(flatten)]
        csma: CsmaArgs,
        #[command(flatten)]
        inter_tx: InterTxArgs,
        /// Use this collision probability instead of solving for it.
        #[arg(long)]
        p_c: Option<f64>,
    },
    /// Round-robin TDMA.
    Tdma {
        #[arg(long, value_delimiter = ',', required = true)]
        lengths: Vec<Duration>,
    },
    /// Packet length where RTS/CTS and basic access break even.
    Inflection {
        #[arg(long, default_value_t = 32)]
        cw_min: u32,
        #[arg(long, default_value_t = 5)]
        beta: u32,
        #[arg(long, default_value = "1")]
        rts: Duration,
        #[arg(long, default_value = "1")]
        cts: Duration,
        #[arg(long)]
        p_c: Option<f64>,
    },
    /// Contention window minimising the fixed-window RTS/CTS cycle time.
    CwOpt {
        #[arg(long, default_value = "4")]
        difs: Duration,
        #[arg(long, default_value = "1")]
        rts: Duration,
        #[arg(long, default_value = "1")]
        cts: Duration,
    },
}

#[derive(Args)]
#[command(group(clap::ArgGroup::new("axis").required(true).args(["pkt_range", "p_range", "cw_range"])))]
struct SweepArgs {
    /// Packet lengths in slots, `start:end:step` or a list.
    #[arg(long)]
    pkt_range: Option<Range>,
    /// Aloha transmit probabilities.
    #[arg(long)]
    p_range: Option<Range>,
    /// With `--p-range`, sweep every `(p_a, p_b)` pair.
    #[arg(long)]
    grid: bool,
    /// Minimum contention windows.
    #[arg(long)]
    cw_range: Option<Range>,
    /// Comma-separated subset of aloha, csma-rtscts, csma-basic, tdma.
    #[arg(long, value_delimiter = ',')]
    protocols: Vec<String>,
    #[arg(long, default_value_t = 10)]
    repetitions: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Simulated horizon per run.
    #[arg(long, default_value = "1000000")]
    slots: Duration,
    /// Aloha transmit probability on the packet-length axis.
    #[arg(long, default_value_t = 0.5)]
    aloha_p: f64,
    #[command(flatten)]
    csma: CsmaArgs,
    #[command(flatten)]
    inter_tx: InterTxArgs,
    /// Run replications one after another.
    #[arg(long)]
    sequential: bool,
    /// CSV output path; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug)]
struct Failure(String);

impl<E: std::fmt::Display> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure(e.to_string())
    }
}

type CmdResult = Result<(), Failure>;

fn output_path(p: &Path) -> PathBuf {
    match std::env::var_os(OUT_DIR_ENV) {
        Some(dir) if p.is_relative() => Path::new(&dir).join(p),
        _ => p.to_path_buf(),
    }
}

fn create(p: &Path) -> Result<BufWriter<File>, Failure> {
    let path = output_path(p);
    File::create(&path)
        .map(BufWriter::new)
        .map_err(|e| Failure(format!("{}: {e}", path.display())))
}

fn print_analysis(trace: &cct_core::ChannelTrace, json: bool, detail: bool) -> CmdResult {
    let report = TraceAnalysis::from_trace(trace, detail)?;
    let text = if json {
        report.to_json() + "\n"
    } else {
        report.to_kv()
    };
    io::stdout().lock().write_all(text.as_bytes())?;
    Ok(())
}

fn cmd_simulate(args: &SimulateArgs, clock: &SlotClock) -> CmdResult {
    let protocol = match args.protocol {
        ProtocolArg::Aloha => {
            Protocol::Aloha(AlohaParams::new(args.pa, args.pb, args.slot.to_slots(clock)?)?)
        }
        ProtocolArg::CsmaRtscts => Protocol::Csma {
            params: args.csma.params(clock)?,
            mode: CsmaMode::RtsCts,
        },
        ProtocolArg::CsmaBasic => Protocol::Csma {
            params: args.csma.params(clock)?,
            mode: CsmaMode::Basic,
        },
        ProtocolArg::Tdma => Protocol::Tdma {
            packet_lengths: args
                .lengths
                .iter()
                .map(|d| d.to_slots(clock))
                .collect::<cct_core::Result<_>>()?,
        },
    };
    let config = SimConfig::new(args.seed, args.slots.to_slots(clock)?, protocol);
    config.validate()?;
    let warmup = args.warmup.to_slots(clock)?;
    if args.audit.is_some() && !matches!(config.protocol, Protocol::Csma { .. }) {
        return Err(Failure("--audit applies only to CSMA/CA protocols".into()));
    }
    let mut audit_out = args.audit.as_deref().map(create).transpose()?;
    let mut trace_out = args.out.as_deref().map(create).transpose()?;
    let trace = if let Some(out) = audit_out.as_mut() {
        let (trace, audit) = sim::simulate_csma_audited(&config)?;
        sim::write_audit(&audit, trace.users(), &mut *out)?;
        out.flush()?;
        trace
    } else {
        sim::simulate(&config)?
    };
    if let Some(out) = trace_out.as_mut() {
        trace_io::write_trace(&trace, &mut *out)?;
        out.flush()?;
    }
    print_analysis(&trace.since(warmup), args.json, false)
}

fn cmd_analyze(args: &AnalyzeArgs, clock: &SlotClock) -> CmdResult {
    let file =
        File::open(&args.trace).map_err(|e| Failure(format!("{}: {e}", args.trace.display())))?;
    let trace = trace_io::read_trace(BufReader::new(file))
        .map_err(|e| Failure(format!("{}: {e}", args.trace.display())))?;
    let trace = trace.since(args.warmup.to_slots(clock)?);
    print_analysis(&trace, args.json, args.detail)
}

fn print_cct(cct: &AnalyticCct, clock: &SlotClock, slot: f64) -> CmdResult {
    let mut out = io::stdout().lock();
    let us = |slots: f64| clock.slots_to_micros_f64(slots);
    if let Some(c) = &cct.components {
        writeln!(out, "p_c={}", c.p_c)?;
        writeln!(out, "mu_slots={}", c.mu)?;
        writeln!(out, "p_ni0={}", c.p_ni0)?;
        writeln!(out, "e_ni={}", c.e_ni)?;
        writeln!(out, "part1_slots={}", c.part1_mean)?;
        writeln!(out, "part1_us={}", us(c.part1_mean))?;
        writeln!(out, "part2_slots={}", c.part2_mean)?;
        writeln!(out, "part2_us={}", us(c.part2_mean))?;
    }
    // Aloha results come in units of its own slot
    let psi = cct.psi_slots * slot;
    writeln!(out, "psi_slots={psi}")?;
    writeln!(out, "psi_us={}", us(psi))?;
    writeln!(out, "psi_ms={}", us(psi) / 1000.0)?;
    Ok(())
}

fn cmd_analytic(cmd: &AnalyticCommand, clock: &SlotClock) -> CmdResult {
    match cmd {
        AnalyticCommand::Aloha { pa, pb, slot } => {
            let slot = slot.to_slots(clock)?;
            let params = AlohaParams::new(*pa, *pb, Tick(1))?;
            let cct = analytic::aloha_cct(&params)?;
            println!("offered_load={}", analytic::aloha_offered_load(*pa, *pb));
            print_cct(&cct, clock, slot.as_f64())
        }
        AnalyticCommand::Csma {
            mode,
            csma,
            inter_tx,
            p_c,
        } => {
            let params = csma.params(clock)?;
            let inputs = InterTxInputs::from(inter_tx);
            let cct = match p_c {
                Some(p) => analytic::csma_cct_with_pc(&params, (*mode).into(), *p, inputs)?,
                None => analytic::csma_cct(&params, (*mode).into(), inputs)?,
            };
            print_cct(&cct, clock, 1.0)
        }
        AnalyticCommand::Tdma { lengths } => {
            let lengths = lengths
                .iter()
                .map(|d| d.to_slots(clock))
                .collect::<cct_core::Result<Vec<_>>>()?;
            print_cct(&analytic::tdma_cct(&lengths)?, clock, 1.0)
        }
        AnalyticCommand::Inflection {
            cw_min,
            beta,
            rts,
            cts,
            p_c,
        } => {
            let p_c = match p_c {
                Some(p) => *p,
                None => analytic::solve_collision_probability(*cw_min, *beta)?.p_c,
            };
            let l_rcts = rts.to_slots(clock)? + cts.to_slots(clock)?;
            let l_tran = analytic::rtscts_basic_inflection(p_c, l_rcts)?;
            println!("p_c={p_c}");
            println!("l_tran_slots={l_tran}");
            println!("l_tran_us={}", clock.slots_to_micros_f64(l_tran));
            Ok(())
        }
        AnalyticCommand::CwOpt { difs, rts, cts } => {
            let l_rcts = rts.to_slots(clock)? + cts.to_slots(clock)?;
            let opt = analytic::cw_min_optimal(difs.to_slots(clock)?, l_rcts)?;
            println!("cw_min_continuous={}", opt.continuous);
            println!("cw_min={}", opt.integer);
            Ok(())
        }
    }
}

fn cmd_sweep(args: &SweepArgs, clock: &SlotClock) -> CmdResult {
    let axis = if let Some(r) = &args.pkt_range {
        SweepAxis::PacketLength(r.as_u64("packet length")?.into_iter().map(Tick).collect())
    } else if let Some(r) = &args.p_range {
        SweepAxis::TransmitProbability {
            values: r.0.clone(),
            grid: args.grid,
        }
    } else if let Some(r) = &args.cw_range {
        SweepAxis::ContentionWindow(
            r.as_u64("contention window")?
                .into_iter()
                .map(|v| u32::try_from(v).map_err(|_| Failure(format!("window {v} too large"))))
                .collect::<Result<_, _>>()?,
        )
    } else {
        unreachable!("clap requires one axis")
    };
    if args.grid && args.p_range.is_none() {
        return Err(Failure("--grid needs --p-range".into()));
    }
    let protocols = if args.protocols.is_empty() {
        match axis {
            SweepAxis::PacketLength(_) => SweepProtocol::ALL.to_vec(),
            SweepAxis::TransmitProbability { .. } => vec![SweepProtocol::Aloha],
            SweepAxis::ContentionWindow(_) => {
                vec![SweepProtocol::CsmaRtsCts, SweepProtocol::CsmaBasic]
            }
        }
    } else {
        args.protocols
            .iter()
            .map(|p| {
                SweepProtocol::parse(p.trim()).ok_or_else(|| Failure(format!("unknown protocol `{p}`")))
            })
            .collect::<Result<_, _>>()?
    };
    let spec = SweepSpec {
        axis,
        protocols,
        csma: args.csma.params(clock)?,
        aloha_p: args.aloha_p,
        inputs: InterTxInputs::from(&args.inter_tx),
        horizon: args.slots.to_slots(clock)?,
        base_seed: args.seed,
        repetitions: args.repetitions,
    };
    let exec = if args.sequential {
        Execution::Sequential
    } else {
        Execution::Parallel
    };
    // open the output before the (possibly long) run so bad paths fail fast
    let sink: Box<dyn Write> = match &args.out {
        Some(p) => Box::new(create(p)?),
        None => Box::new(io::stdout().lock()),
    };
    let rows = experiment::sweep(&spec, exec)?;
    let mut w = csv::Writer::from_writer(sink);
    for row in &rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = SlotClock::new(cli.micros_per_slot)
        .map_err(Failure::from)
        .and_then(|clock| match &cli.command {
            Command::Simulate(a) => cmd_simulate(a, &clock),
            Command::Analyze(a) => cmd_analyze(a, &clock),
            Command::Analytic(c) => cmd_analytic(c, &clock),
            Command::Sweep(a) => cmd_sweep(a, &clock),
        });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
