use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use vtqw_cli::{run_scenario, run_suite, to_json, CliResult, RunConfig, ScenarioKind};
use vtqw_core::phase_estimation::Mode;
use vtqw_core::subroutine::AlphaSchedule;

#[derive(Parser)]
#[command(name = "vtqw", version, about = "Run variable-time quantum walk scenarios")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    opts: Options,
}

#[derive(Args)]
struct Options {
    /// Seed for circuit-mode sampling and Monte Carlo estimates.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Construction tolerance.
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Phase-resolution constant: Δ = κ/√C₋.
    #[arg(long, global = true)]
    kappa: Option<f64>,
    /// Acceptance threshold on the phase-zero weight.
    #[arg(long, global = true)]
    tau_accept: Option<f64>,
    /// Constant in the composition error condition.
    #[arg(long, global = true)]
    eta: Option<f64>,
    /// History weighting for walk scenarios.
    #[arg(long, global = true, value_enum)]
    alpha: Option<AlphaArg>,
    /// Decision mode.
    #[arg(long, global = true, value_enum, default_value_t = ModeArg::Spectral)]
    mode: ModeArg,
    /// Write the report here instead of standard output.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum AlphaArg {
    Const,
    Linear,
    Inverse,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Spectral,
    Circuit,
}

#[derive(Subcommand)]
enum Command {
    /// Network statistics.
    Net {
        #[command(subcommand)]
        action: NetAction,
    },
    /// Phase-estimation decision on an explicit instance.
    Pe {
        #[command(subcommand)]
        action: PeAction,
    },
    /// Variable-time quantum walk.
    Walk {
        #[command(subcommand)]
        action: WalkAction,
    },
    /// Search cost comparison.
    Search {
        #[command(subcommand)]
        action: SearchAction,
    },
    /// Absorbing-walk reduction.
    Mnrs {
        #[command(subcommand)]
        action: MnrsAction,
    },
    /// Composition of an outer algorithm with a variable-time subroutine.
    Compose {
        #[command(subcommand)]
        action: ComposeAction,
    },
    /// Scenario manifests.
    Suite {
        #[command(subcommand)]
        action: SuiteAction,
    },
}

#[derive(Subcommand)]
enum NetAction {
    Stats { file: PathBuf },
}

#[derive(Subcommand)]
enum PeAction {
    Decide { file: PathBuf },
}

#[derive(Subcommand)]
enum WalkAction {
    Run { file: PathBuf },
}

#[derive(Subcommand)]
enum SearchAction {
    /// Emits CSV.
    Compare { file: PathBuf },
}

#[derive(Subcommand)]
enum MnrsAction {
    Verify { file: PathBuf },
}

#[derive(Subcommand)]
enum ComposeAction {
    Decide { file: PathBuf },
}

#[derive(Subcommand)]
enum SuiteAction {
    Run { manifest: PathBuf },
}

fn config(opts: &Options) -> RunConfig {
    let mut c = RunConfig { seed: opts.seed, ..RunConfig::default() };
    if let Some(t) = opts.tol {
        c.tolerances.construction = t;
    }
    if let Some(k) = opts.kappa {
        c.kappa = k;
    }
    if let Some(t) = opts.tau_accept {
        c.tau_accept = t;
    }
    if let Some(e) = opts.eta {
        c.eta = e;
    }
    c.alpha = opts.alpha.map(|a| match a {
        AlphaArg::Const => AlphaSchedule::Const,
        AlphaArg::Linear => AlphaSchedule::Linear,
        AlphaArg::Inverse => AlphaSchedule::Inverse,
    });
    c.mode = match opts.mode {
        ModeArg::Spectral => Mode::Spectral,
        ModeArg::Circuit => Mode::Circuit,
    };
    c
}

fn emit(text: &str, out: Option<&PathBuf>) -> CliResult<()> {
    match out {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| vtqw_cli::CliError::Io { path: path.clone(), message: e.to_string() }),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn run(cli: &Cli) -> CliResult<bool> {
    let config = config(&cli.opts);
    let out = cli.opts.out.as_ref();
    let (kind, file) = match &cli.command {
        Command::Net { action: NetAction::Stats { file } } => (ScenarioKind::NetStats, file),
        Command::Pe { action: PeAction::Decide { file } } => (ScenarioKind::Pe, file),
        Command::Walk { action: WalkAction::Run { file } } => (ScenarioKind::Walk, file),
        Command::Search { action: SearchAction::Compare { file } } => (ScenarioKind::Search, file),
        Command::Mnrs { action: MnrsAction::Verify { file } } => (ScenarioKind::Mnrs, file),
        Command::Compose { action: ComposeAction::Decide { file } } => (ScenarioKind::Compose, file),
        Command::Suite { action: SuiteAction::Run { manifest } } => {
            let report = run_suite(manifest, &config)?;
            for w in &report.warnings {
                eprintln!("warning: {w}");
            }
            for r in report.results.iter().filter(|r| !r.passed) {
                eprintln!("FAIL {}: {}", r.name, r.failures.join("; "));
            }
            emit(&to_json(&report), out)?;
            return Ok(report.all_passed());
        }
    };
    let report = run_scenario(kind, file, &config)?;
    match &report.table {
        Some(table) => emit(table, out)?,
        None => emit(&to_json(&report), out)?,
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
