use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use vbs_edt::harness::config::{parse_quantity, Quantity};
use vbs_edt::harness::rows::{write_comparisons, write_results};
use vbs_edt::harness::{
    cmd_compare, cmd_optimize, cmd_power, cmd_simulate, cmd_sweep, ConfigError, DelayPolicy, HarnessError,
    ResolvedConfig, ScenarioFile, SweepOptions, SweepSpec, SweepTarget,
};
use vbs_edt::optimizer::joint_optimize;
use vbs_edt::Execution;

const EXIT_USAGE: u8 = 2;
const EXIT_INFEASIBLE: u8 = 3;
const EXIT_VALIDATION: u8 = 4;

/// Energy-delay tradeoffs of a virtual base station.
#[derive(Parser, Debug)]
#[command(name = "vbs-edt", version, about)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Global {
    /// Scenario file (`[section]` headers, `key = value [unit]` lines).
    #[arg(long, global = true, env = "VBS_EDT_CONFIG")]
    config: Option<PathBuf>,
    /// Delay weight in W per queued flow.
    #[arg(long, global = true)]
    alpha: Option<String>,
    /// Flow arrival rate, e.g. `0.5` or `30/min`.
    #[arg(long, global = true)]
    lambda: Option<String>,
    /// Mean flow size, e.g. `2MB` or `1.6e7bit`.
    #[arg(long, global = true)]
    file_size: Option<String>,
    /// Number of CPU cores.
    #[arg(long, global = true)]
    cores: Option<u32>,
    /// Upper bound on cores for automatic selection.
    #[arg(long, global = true)]
    cores_max: Option<u32>,
    /// Data rate, e.g. `77.6Mbps`.
    #[arg(long, global = true)]
    rate: Option<String>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Total simulated arrivals, warmup included.
    #[arg(long, global = true)]
    arrivals: Option<u64>,
    /// CSV destination; stdout when absent.
    #[arg(long, short, global = true)]
    output: Option<PathBuf>,
    /// Run batch work on one thread.
    #[arg(long, global = true)]
    sequential: bool,
    #[arg(long, short, global = true)]
    verbose: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Evaluate one operating point (needs --rate).
    Power,
    /// Joint rate and core optimization.
    Optimize,
    /// Sweep one parameter: `name=start:stop:steps[:log]`.
    Sweep {
        spec: String,
        /// What to evaluate at each point; `rate` uses --rate.
        #[arg(long, value_enum, default_value_t = Target::Optimize)]
        target: Target,
        /// Delay for `--target delay`.
        #[arg(long)]
        delay: Option<String>,
        /// Keep lambda * L fixed while sweeping lambda or file_size.
        #[arg(long)]
        hold_offered_load: bool,
    },
    /// Power savings over a conventional base station.
    Compare {
        #[arg(long, value_enum, default_value_t = Policy::Grid)]
        policy: Policy,
    },
    /// Discrete-event simulation checked against the analytic model.
    Simulate {
        /// Per-event CSV trace.
        #[arg(long)]
        trace: Option<PathBuf>,
        /// exponential, deterministic or bounded-pareto.
        #[arg(long)]
        sizes: Option<String>,
    },
    /// Print the resolved configuration.
    ConfigShow,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Target {
    Rate,
    Delay,
    Optimize,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Policy {
    Grid,
    CbsOptimal,
    MinPower,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &HarnessError) -> u8 {
    match e {
        HarnessError::Usage(_) | HarnessError::Config(ConfigError::Model(_)) => EXIT_USAGE,
        HarnessError::Config(_) => EXIT_USAGE,
        HarnessError::Model(m) if m.is_infeasibility() => EXIT_INFEASIBLE,
        HarnessError::Model(_) => EXIT_USAGE,
        HarnessError::Validation(_) => EXIT_VALIDATION,
        HarnessError::Output(_) => 1,
    }
}

fn scenario_file(g: &Global) -> Result<ScenarioFile, HarnessError> {
    let mut file = match &g.config {
        Some(p) => ScenarioFile::load(p)?,
        None => ScenarioFile::default(),
    };
    let overrides = [
        ("run", "alpha", g.alpha.clone()),
        ("traffic", "lambda", g.lambda.clone()),
        ("traffic", "file_size", g.file_size.clone()),
        ("compute", "cores", g.cores.map(|n| n.to_string())),
        ("run", "cores_max", g.cores_max.map(|n| n.to_string())),
        ("run", "seed", g.seed.map(|n| n.to_string())),
        ("run", "arrivals", g.arrivals.map(|n| n.to_string())),
    ];
    for (section, key, value) in overrides {
        if let Some(v) = value {
            file.set(section, key, &v)?;
        }
    }
    Ok(file)
}

fn rate(g: &Global) -> Result<Option<f64>, HarnessError> {
    g.rate
        .as_deref()
        .map(|r| parse_quantity(r, Quantity::DataRate).map_err(|m| HarnessError::Usage(format!("--rate: {m}"))))
        .transpose()
}

fn require_rate(g: &Global) -> Result<f64, HarnessError> {
    rate(g)?.ok_or_else(|| HarnessError::Usage("--rate is required".into()))
}

fn output(g: &Global) -> Result<Box<dyn Write>, HarnessError> {
    Ok(match &g.output {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn run(cli: Cli) -> Result<ExitCode, HarnessError> {
    let g = &cli.global;
    let mut file = scenario_file(g)?;
    if let Command::Simulate { sizes: Some(s), .. } = &cli.command {
        file.set("run", "size_distribution", s)?;
    }
    if let Command::ConfigShow = cli.command {
        file.resolve()?;
        write!(output(g)?, "{file}")?;
        return Ok(ExitCode::SUCCESS);
    }
    let cfg = file.resolve()?;
    let exec = if g.sequential {
        Execution::Sequential
    } else {
        Execution::default()
    };
    let n_cores = cfg.scenario.compute.n_cores;

    match cli.command {
        Command::Power => {
            let row = cmd_power(&cfg, require_rate(g)?, n_cores)?;
            write_results(output(g)?, &[row])?;
        }
        Command::Optimize => {
            let mut rows = cmd_optimize(&cfg, cfg.run.cores_max)?;
            if !g.verbose {
                rows.truncate(1);
            }
            write_results(output(g)?, &rows)?;
        }
        Command::Sweep {
            spec,
            target,
            delay,
            hold_offered_load,
        } => {
            let spec = SweepSpec::parse(&spec)?;
            let target = match target {
                Target::Rate => SweepTarget::Rate(require_rate(g)?),
                Target::Delay => {
                    let d = delay.ok_or_else(|| HarnessError::Usage("--target delay needs --delay".into()))?;
                    let d = parse_quantity(&d, Quantity::Duration)
                        .map_err(|m| HarnessError::Usage(format!("--delay: {m}")))?;
                    SweepTarget::Delay(d)
                }
                Target::Optimize => SweepTarget::Optimize,
            };
            let opts = SweepOptions {
                target,
                cores: g.cores,
                hold_offered_load,
            };
            let rows = cmd_sweep(&cfg, &spec, &opts, exec)?;
            if g.verbose {
                let bad = rows.iter().filter(|r| !r.is_ok()).count();
                eprintln!("{} points, {bad} infeasible", rows.len());
            }
            write_results(output(g)?, &rows)?;
        }
        Command::Compare { policy } => {
            let policy = match policy {
                Policy::Grid => DelayPolicy::Grid,
                Policy::CbsOptimal => DelayPolicy::CbsOptimal,
                Policy::MinPower => DelayPolicy::MinPower,
            };
            let rows = cmd_compare(&cfg, policy, exec)?;
            write_comparisons(output(g)?, &rows)?;
        }
        Command::Simulate { trace, .. } => return simulate(g, &cfg, trace),
        Command::ConfigShow => unreachable!(),
    }
    Ok(ExitCode::SUCCESS)
}

fn simulate(g: &Global, cfg: &ResolvedConfig, trace: Option<PathBuf>) -> Result<ExitCode, HarnessError> {
    let (r, n) = match rate(g)? {
        Some(r) => (r, cfg.scenario.compute.n_cores),
        None => {
            let best = joint_optimize(&cfg.scenario, cfg.run.cores_max)?.best;
            (best.rate, best.n_cores)
        }
    };
    let mut trace_out = trace.map(|p| File::create(p).map(BufWriter::new)).transpose()?;
    let (row, report) = cmd_simulate(cfg, r, n, trace_out.as_mut().map(|w| w as &mut dyn Write))?;
    if let Some(mut w) = trace_out {
        w.flush()?;
    }
    write_results(output(g)?, &[row])?;
    if g.verbose || !report.passed() {
        eprint!("{report}");
    }
    if !report.passed() {
        return Err(HarnessError::Validation(Box::new(report)));
    }
    Ok(ExitCode::SUCCESS)
}
