//! Command-line front end: assemble, disassemble, run and script firmware.
//!
//! Exit codes: 0 success, 1 usage/I/O/configuration, 2 assembly or image
//! format errors, 3 runtime fault, 4 cycle budget exhausted.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use biorv::asm::{assemble, disassemble, SourceProgram};
use biorv::cpu::HaltPolicy;
use biorv::harness::{BringUpScript, PeripheralMap, ScriptEvent, SimConfig, Simulator};
use biorv::image::MemoryImage;
use biorv::metrics::{ClockPolicy, EnergyModel, HaltReason, Summary, DEFAULT_FREQ_HZ, DEFAULT_PJ_PER_CYCLE};
use biorv::selftest;

#[derive(Parser)]
#[command(name = "biorv", version, about = "Multi-cycle RV32I controller core simulator")]
struct Cli {
    #[command(flatten)]
    config: ConfigArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// Unified memory size in bytes.
    #[arg(long, global = true, default_value_t = 4096)]
    mem_size: u32,
    /// Energy per clock cycle in picojoules.
    #[arg(long, global = true, default_value_t = DEFAULT_PJ_PER_CYCLE)]
    pj_per_cycle: f64,
    /// Clock frequency in hertz.
    #[arg(long, global = true, default_value_t = DEFAULT_FREQ_HZ)]
    freq_hz: f64,
    /// Executing-cycle budget per run.
    #[arg(long, global = true, default_value_t = 1_000_000)]
    max_cycles: u64,
    /// Print one CSV line per clock cycle.
    #[arg(long, global = true)]
    trace: bool,
    /// Charge held (non-executing) cycles in the energy estimate.
    #[arg(long, global = true)]
    always_on_clock: bool,
    /// Peripheral layout file (`name base span` per line).
    #[arg(long, global = true)]
    peripheral_map: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Assemble a source file into a hex image.
    Asm {
        input: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        /// Placement address of the first word.
        #[arg(long, default_value = "0", value_parser = parse_addr)]
        base: u32,
    },
    /// Disassemble a hex image.
    Dis { input: PathBuf },
    /// Load, reset and start an image, run it and report.
    Run {
        input: PathBuf,
        /// Write the final memory contents as a hex image.
        #[arg(long)]
        dump_mem: Option<PathBuf>,
        /// Write the report as key=value lines.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Execute a bring-up script.
    Script { input: PathBuf },
    /// Check golden encodings and oracle equivalence on bundled programs.
    Selftest,
}

fn parse_addr(text: &str) -> Result<u32, String> {
    let parsed = match text.strip_prefix("0x") {
        Some(hex) => u32::from_str_radix(hex, 16),
        None => text.parse(),
    };
    parsed.map_err(|e| e.to_string())
}

struct Failure {
    code: u8,
    tag: &'static str,
    message: String,
}

fn fail(code: u8, tag: &'static str, message: impl Into<String>) -> Failure {
    Failure { code, tag, message: message.into() }
}

fn io(path: &Path, e: std::io::Error) -> Failure {
    fail(1, "io", format!("{}: {e}", path.display()))
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| io(path, e))
}

fn write(path: &Path, contents: &str) -> Result<(), Failure> {
    fs::write(path, contents).map_err(|e| io(path, e))
}

fn read_image(path: &Path) -> Result<MemoryImage, Failure> {
    MemoryImage::from_hex(&read(path)?).map_err(|e| fail(2, "hex", format!("{}:{}", path.display(), e)))
}

struct Settings {
    sim: SimConfig,
    model: EnergyModel,
    clock: ClockPolicy,
    max_cycles: u64,
    trace: bool,
}

impl Settings {
    fn from_args(args: &ConfigArgs) -> Result<Settings, Failure> {
        let config = |m: String| fail(1, "config", m);
        if args.mem_size == 0 || !args.mem_size.is_multiple_of(4) {
            return Err(config(format!("--mem-size {} is not a positive multiple of 4", args.mem_size)));
        }
        if args.max_cycles == 0 {
            return Err(config("--max-cycles must be positive".into()));
        }
        let model = EnergyModel::new(args.pj_per_cycle, args.freq_hz).map_err(|e| config(e.to_string()))?;
        let peripherals = match &args.peripheral_map {
            Some(path) => Some(
                PeripheralMap::parse(&read(path)?).map_err(|e| config(format!("{}: {e}", path.display())))?,
            ),
            None => None,
        };
        Ok(Settings {
            sim: SimConfig { mem_size_bytes: args.mem_size, peripherals },
            model,
            clock: if args.always_on_clock { ClockPolicy::AlwaysOn } else { ClockPolicy::ExecutingOnly },
            max_cycles: args.max_cycles,
            trace: args.trace,
        })
    }

    fn simulator(&self) -> Result<Simulator, Failure> {
        Simulator::new(self.sim.clone()).map_err(|e| fail(1, "config", e.to_string()))
    }
}

fn cmd_asm(input: &Path, output: &Path, base: u32) -> Result<(), Failure> {
    let asm_err = |e: biorv::asm::AsmError| fail(2, "asm", format!("{}:{}: {}", input.display(), e.line, e.kind));
    let source = SourceProgram::parse(&read(input)?).map_err(asm_err)?;
    let image = assemble(&source, base).map_err(asm_err)?;
    write(output, &image.to_hex())
}

fn cmd_run(settings: &Settings, input: &Path, dump_mem: Option<&Path>, report_path: Option<&Path>) -> Result<(), Failure> {
    let image = read_image(input)?;
    let mut sim = settings.simulator()?;
    sim.program_and_start(&image).map_err(|e| fail(3, "load", e.to_string()))?;

    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    let report = if settings.trace {
        sim.run_traced(settings.max_cycles, HaltPolicy::SelfLoop, |r| {
            let _ = writeln!(out, "{}", r.to_csv());
        })
    } else {
        sim.run(settings.max_cycles, HaltPolicy::SelfLoop)
    }
    .map_err(|e| fail(3, "fault", e.to_string()))?;

    let summary = Summary::new(&report, settings.model, settings.clock);
    let _ = write!(out, "{summary}");
    drop(out);
    if let Some(path) = dump_mem {
        let size = sim.memory().size_bytes();
        let dump = sim.memory().dump(0, size).expect("whole memory is in range");
        write(path, &dump.to_hex())?;
    }
    if let Some(path) = report_path {
        write(path, &summary.to_key_values())?;
    }
    match report.halt_reason {
        HaltReason::SelfLoop { .. } => Ok(()),
        HaltReason::Fault(f) => Err(fail(3, "fault", f.to_string())),
        HaltReason::BudgetExhausted => Err(fail(
            4,
            "budget",
            format!("{} cycles used without halting (pc=0x{:08X})", report.total_cycles, report.final_state.pc),
        )),
    }
}

fn cmd_script(settings: &Settings, input: &Path) -> Result<(), Failure> {
    let dir = input.parent().map(Path::to_path_buf).unwrap_or_default();
    let text = read(input)?;
    let script = BringUpScript::parse(&text, |name| {
        let path = dir.join(name);
        let text = fs::read_to_string(&path).map_err(|e| format!("{}: {e}", path.display()))?;
        MemoryImage::from_hex(&text).map_err(|e| format!("{}:{e}", path.display()))
    })
    .map_err(|e| fail(2, "script", format!("{}:{}: {}", input.display(), e.line, e.message)))?;

    let mut sim = settings.simulator()?;
    let trace = settings.trace;
    let events = sim
        .execute_script(&script, |r| {
            if trace {
                println!("{}", r.to_csv());
            }
        })
        .map_err(|e| fail(3, "script", e.to_string()))?;

    let mut fault = None;
    for event in &events {
        match event {
            ScriptEvent::Loaded { words } => println!("# loaded {words} words"),
            ScriptEvent::Held { cycles, mode } => println!("# held {cycles} cycles in {mode} mode"),
            ScriptEvent::Observed(obs) => {
                if obs.stopped_core {
                    println!("# observe stopped the core");
                }
                print!("{}", obs.image.to_hex());
            }
            ScriptEvent::Ran(report) => {
                print!("{}", Summary::new(report, settings.model, settings.clock));
                if let HaltReason::Fault(f) = report.halt_reason {
                    fault = Some(f);
                }
            }
        }
    }
    match fault {
        Some(f) => Err(fail(3, "fault", f.to_string())),
        None => Ok(()),
    }
}

fn dispatch(cli: Cli) -> Result<(), Failure> {
    match &cli.command {
        Command::Asm { input, output, base } => cmd_asm(input, output, *base),
        Command::Dis { input } => {
            print!("{}", disassemble(&read_image(input)?));
            Ok(())
        }
        Command::Run { input, dump_mem, report } => {
            cmd_run(&Settings::from_args(&cli.config)?, input, dump_mem.as_deref(), report.as_deref())
        }
        Command::Script { input } => cmd_script(&Settings::from_args(&cli.config)?, input),
        Command::Selftest => {
            let report = selftest::run();
            print!("{report}");
            if report.passed() {
                Ok(())
            } else {
                Err(fail(1, "selftest", "one or more checks failed"))
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let first = e.to_string().lines().next().unwrap_or_default().trim_start_matches("error: ").to_string();
            eprintln!("biorv: error[usage]: {first}");
            return ExitCode::from(1);
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure { code, tag, message }) => {
            eprintln!("biorv: error[{tag}]: {message}");
            ExitCode::from(code)
        }
    }
}
