//! `wtbridge`: validate configurations, run realisation batches, analyse
//! their histories and run the closed-form self-checks.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use wtbridge_core::analysis::{analyze, load_run};
use wtbridge_core::campaign::run_campaign;
use wtbridge_core::config::SimulationConfig;
use wtbridge_core::{oracle, Error, Scenario, WindCase};

const EXIT_CHECKS_FAILED: u8 = 1;
const EXIT_CONFIG: u8 = 3;
const EXIT_RUNTIME: u8 = 4;
const EXIT_ANALYSIS: u8 = 5;

#[derive(Parser)]
#[command(
    name = "wtbridge",
    version,
    about = "Coupled wind-traffic-bridge time-domain simulation",
    after_help = "Exit codes: 0 success, 1 self-check failure, 2 usage, 3 configuration, 4 runtime, 5 analysis."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a configuration and print it with all defaults resolved.
    Validate {
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Run the scenario x realisation matrix and write histories and a manifest.
    Run {
        #[command(flatten)]
        config: ConfigArgs,
        /// Output directory (default: <output root>/case<k>).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Output root used when --out is not given.
        #[arg(long, env = "WTBRIDGE_OUTPUT", default_value = "output")]
        output_root: PathBuf,
        /// Worker threads (default: available parallelism).
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Envelopes, spectra, scenario comparison and case study from run manifests.
    Analyze {
        /// Manifest files or run directories (one per wind case).
        #[arg(required = true)]
        manifests: Vec<PathBuf>,
        /// Output directory (default: <output root>/analysis).
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, env = "WTBRIDGE_OUTPUT", default_value = "output")]
        output_root: PathBuf,
        /// Deck coordinate used as midspan [m] (default: middle of the stations).
        #[arg(long)]
        midspan: Option<f64>,
    },
    /// Run the closed-form self-checks and print one pass/fail line each.
    Oracle {
        #[command(flatten)]
        config: ConfigArgs,
    },
}

#[derive(Args)]
struct ConfigArgs {
    /// TOML configuration; built-in defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Scenarios to run (W, T, WT); repeat or comma-separate.
    #[arg(long, value_delimiter = ',')]
    scenario: Vec<Scenario>,
    /// Wind case 1, 2 or 3.
    #[arg(long, value_parser = parse_case)]
    case: Option<WindCase>,
    /// Realisations per scenario.
    #[arg(long)]
    realisations: Option<usize>,
    /// Scale factor on all turbulence intensities (0 gives steady wind).
    #[arg(long)]
    turbulence: Option<f64>,
    /// Mean wind speed [m/s].
    #[arg(long)]
    mean_speed: Option<f64>,
    /// Recorded duration after run-up [s].
    #[arg(long)]
    duration: Option<f64>,
    /// Master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Disable deck-motion feedback into wind and tyre forces.
    #[arg(long)]
    no_feedback: bool,
}

fn parse_case(s: &str) -> Result<WindCase, String> {
    s.parse::<u8>()
        .map_err(|_| format!("`{s}` is not a wind case number"))
        .and_then(WindCase::try_from)
}

impl ConfigArgs {
    fn load(&self) -> wtbridge_core::Result<SimulationConfig> {
        let mut cfg = match &self.config {
            Some(p) => SimulationConfig::load(p)?,
            None => SimulationConfig::default(),
        };
        let s = &mut cfg.simulation;
        if !self.scenario.is_empty() {
            s.scenarios = self.scenario.clone();
            s.scenarios.sort();
            s.scenarios.dedup();
        }
        if let Some(c) = self.case {
            s.case = c;
        }
        if let Some(n) = self.realisations {
            s.realisations = n;
        }
        if let Some(d) = self.duration {
            s.duration = d;
        }
        if let Some(seed) = self.seed {
            s.master_seed = seed;
        }
        if self.no_feedback {
            s.feedback = false;
        }
        if let Some(u) = self.mean_speed {
            cfg.wind.mean_speed = Some(u);
        }
        if let Some(k) = self.turbulence {
            for i in &mut cfg.wind.intensity {
                *i *= k;
            }
        }
        Ok(cfg)
    }
}

fn fail(code: u8, e: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(code)
}

fn config_or_runtime(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::Parse { .. } => EXIT_CONFIG,
        _ => EXIT_RUNTIME,
    }
}

fn validate(args: &ConfigArgs) -> ExitCode {
    let cfg = match args.load() {
        Ok(c) => c,
        Err(e) => return fail(EXIT_CONFIG, e),
    };
    let bad = cfg.violations();
    println!("{} violations", bad.len());
    for v in &bad {
        println!("  - {v}");
    }
    if bad.is_empty() {
        // Loading the referenced inputs can still fail.
        if let Err(e) = cfg.clone().resolve() {
            return fail(EXIT_CONFIG, e);
        }
    }
    println!();
    print!("{}", cfg.to_toml());
    if bad.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_CONFIG)
    }
}

fn run(args: &ConfigArgs, out: Option<PathBuf>, root: &Path, threads: Option<usize>) -> ExitCode {
    let res = match args.load().and_then(SimulationConfig::resolve) {
        Ok(r) => r,
        Err(e) => return fail(config_or_runtime(&e), e),
    };
    let case = res.config.simulation.case;
    let out = out.unwrap_or_else(|| root.join(format!("case{}", case.number())));
    let threads = threads
        .or_else(|| std::thread::available_parallelism().ok().map(|n| n.get()))
        .unwrap_or(1);
    let s = &res.config.simulation;
    eprintln!(
        "running case {} ({} scenario(s) x {} realisation(s), {} s each) into {}",
        case.number(),
        s.scenarios.len(),
        s.realisations,
        s.run_up + s.duration,
        out.display()
    );
    match run_campaign(&res, &out, threads) {
        Ok(m) => {
            println!("{} histories written; manifest {}", m.entries.len(), out.join("manifest.json").display());
            ExitCode::SUCCESS
        }
        Err(e) => fail(config_or_runtime(&e), e),
    }
}

fn analyze_cmd(manifests: &[PathBuf], out: Option<PathBuf>, root: &Path, midspan: Option<f64>) -> ExitCode {
    let out = out.unwrap_or_else(|| root.join("analysis"));
    // Every manifest is checked before any output is written.
    let mut runs = Vec::new();
    let mut errors = Vec::new();
    for m in manifests {
        match load_run(m) {
            Ok(r) => runs.push(r),
            Err(e) => errors.push(e.to_string()),
        }
    }
    if !errors.is_empty() {
        for e in &errors {
            eprintln!("error: {e}");
        }
        return ExitCode::from(EXIT_ANALYSIS);
    }
    match analyze(&runs, &out, midspan) {
        Ok(files) => {
            for f in &files {
                println!("{}", out.join(f).display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => fail(EXIT_ANALYSIS, e),
    }
}

fn oracle_cmd(args: &ConfigArgs) -> ExitCode {
    let res = match args.load().and_then(SimulationConfig::resolve) {
        Ok(r) => r,
        Err(e) => return fail(config_or_runtime(&e), e),
    };
    match oracle::suite(&res.bridge, &res.catalog) {
        Ok(checks) => {
            for c in &checks {
                println!("{c}");
            }
            let failed = checks.iter().filter(|c| !c.passed()).count();
            println!("{} of {} checks passed", checks.len() - failed, checks.len());
            if failed == 0 {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(EXIT_CHECKS_FAILED)
            }
        }
        Err(e) => fail(EXIT_RUNTIME, e),
    }
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Validate { config } => validate(&config),
        Command::Run {
            config,
            out,
            output_root,
            threads,
        } => run(&config, out, &output_root, threads),
        Command::Analyze {
            manifests,
            out,
            output_root,
            midspan,
        } => analyze_cmd(&manifests, out, &output_root, midspan),
        Command::Oracle { config } => oracle_cmd(&config),
    }
}
