use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::{debug, info};
use sis_core::artifacts::{
    write_jsa_artifacts, write_oracle_report, write_scenario_artifacts, write_sweep_artifacts,
    Formats,
};
use sis_core::scenario::{parse_overrides, ScenarioResult};
use sis_core::{
    build_jsa, load_scenario, load_sweep, phase_sweep, run_scenario, verify_oracle, Interference,
    RunOptions, SisError,
};

/// Maximum oracle deviation for `sis verify` to succeed.
const VERIFY_THRESHOLD: f64 = 1e-9;

#[derive(Parser)]
#[command(
    name = "sis",
    version,
    about = "Spectral-domain multi-photon interference simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build the joint spectral amplitude and write it out.
    Jsa(Common),
    /// Exact coincidence predictions and expected detected counts.
    Predict(Common),
    /// Monte Carlo sampling of detection events.
    Sample(Common),
    /// Phase sweep of one pump component.
    Sweep(Common),
    /// Check the permanent formula against the Fock-basis expansion.
    Verify(Common),
    /// Full run with a summary table on stdout.
    Report(Common),
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
    Svg,
    All,
}

#[derive(Args)]
struct Common {
    /// JSON scenario (or sweep) configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory.
    #[arg(long, default_value = "./out")]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    shots: Option<u64>,
    /// Skip sampling; exact predictions only.
    #[arg(long)]
    exact: bool,
    #[arg(long, value_enum, default_value = "all")]
    format: Format,
    /// Config overrides as dotted `key=value` pairs, e.g. `gain=0.05`.
    #[arg(value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

impl Common {
    fn formats(&self) -> Formats {
        let name = match self.format {
            Format::Csv => "csv",
            Format::Json => "json",
            Format::Svg => "svg",
            Format::All => "all",
        };
        name.parse().expect("format names are fixed")
    }

    /// Overrides with `--seed` and `--shots` folded in under `prefix`.
    fn overrides(&self, prefix: &str) -> Result<Vec<(String, String)>, SisError> {
        let mut out = parse_overrides(&self.overrides)?;
        if let Some(seed) = self.seed {
            out.push((format!("{prefix}seed"), seed.to_string()));
        }
        if let Some(shots) = self.shots {
            out.push((format!("{prefix}shots"), shots.to_string()));
        }
        Ok(out)
    }
}

enum Failure {
    Validation(String),
    Numerical(String),
}

impl From<SisError> for Failure {
    fn from(e: SisError) -> Self {
        if e.is_numerical() {
            Failure::Numerical(e.to_string())
        } else {
            Failure::Validation(e.to_string())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("SIS_LOG_LEVEL", "warn")).init();
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Validation(msg)) => {
            eprintln!("error: {}", one_line(&msg));
            ExitCode::from(1)
        }
        Err(Failure::Numerical(msg)) => {
            eprintln!("error: {}", one_line(&msg));
            ExitCode::from(2)
        }
    }
}

fn one_line(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn run(command: Command) -> Result<(), Failure> {
    match command {
        Command::Jsa(c) => {
            let cfg = load_scenario(&c.config, &c.overrides("")?)?;
            let jsa = build_jsa(&cfg.pump_spectrum(), &cfg.grid)?;
            let formats = c.formats();
            publish(&c.out, |dir| write_jsa_artifacts(dir, &cfg, &jsa, formats))?;
            print!("{}", jsa.to_csv());
        }
        Command::Predict(c) => {
            let cfg = load_scenario(&c.config, &c.overrides("")?)?;
            let result = run_scenario(&cfg, RunOptions { sample: false })?;
            let formats = c.formats();
            publish(&c.out, |dir| {
                write_scenario_artifacts(dir, &result, formats)
            })?;
        }
        Command::Sample(c) => {
            let cfg = load_scenario(&c.config, &c.overrides("")?)?;
            let result = run_scenario(&cfg, RunOptions { sample: !c.exact })?;
            let formats = c.formats();
            publish(&c.out, |dir| {
                write_scenario_artifacts(dir, &result, formats)
            })?;
        }
        Command::Report(c) => {
            let cfg = load_scenario(&c.config, &c.overrides("")?)?;
            let result = run_scenario(&cfg, RunOptions { sample: !c.exact })?;
            let formats = c.formats();
            publish(&c.out, |dir| {
                write_scenario_artifacts(dir, &result, formats)
            })?;
            print_summary(&result);
        }
        Command::Sweep(c) => {
            let mut spec = load_sweep(&c.config, &c.overrides("base.")?)?;
            if c.exact {
                spec.sampled = false;
            }
            let sweep = phase_sweep(&spec)?;
            let formats = c.formats();
            publish(&c.out, |dir| write_sweep_artifacts(dir, &sweep, formats))?;
        }
        Command::Verify(c) => {
            let cfg = load_scenario(&c.config, &c.overrides("")?)?;
            let report = verify_oracle(&cfg)?;
            publish(&c.out, |dir| write_oracle_report(dir, &cfg, &report))?;
            for (n, dev) in &report.max_deviation_by_order {
                println!("N={n} max relative deviation {dev:e}");
            }
            println!(
                "{} patterns checked, max deviation {:e}",
                report.patterns_checked, report.max_relative_deviation
            );
            if report.max_relative_deviation.is_nan()
                || report.max_relative_deviation >= VERIFY_THRESHOLD
            {
                return Err(Failure::Numerical(format!(
                    "oracle deviation {:e} exceeds {VERIFY_THRESHOLD:e}",
                    report.max_relative_deviation
                )));
            }
        }
    }
    Ok(())
}

/// Writes into a fresh sibling directory, then moves the result into `out`
/// so readers never see a half-written set of files.
fn publish(
    out: &Path,
    write: impl FnOnce(&Path) -> sis_core::Result<Vec<PathBuf>>,
) -> Result<(), Failure> {
    let io =
        |e: std::io::Error, what: &Path| Failure::Validation(format!("{}: {e}", what.display()));
    let parent = match out.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    fs::create_dir_all(&parent).map_err(|e| io(e, &parent))?;
    let staging = tempfile::Builder::new()
        .prefix(".sis-staging-")
        .tempdir_in(&parent)
        .map_err(|e| io(e, &parent))?;
    let written = write(staging.path())?;
    debug!(
        "staged {} files in {}",
        written.len(),
        staging.path().display()
    );
    if !out.exists() {
        let staged = staging.keep();
        fs::rename(&staged, out).map_err(|e| io(e, out))?;
    } else {
        for file in &written {
            let target = out.join(file.file_name().expect("artifact has a file name"));
            fs::rename(file, &target).map_err(|e| io(e, &target))?;
        }
    }
    info!("wrote {} files to {}", written.len(), out.display());
    Ok(())
}

fn print_summary(result: &ScenarioResult) {
    let cfg = &result.config;
    println!(
        "scenario {:?}  seed={}  config_sha256={}",
        cfg.name, cfg.seed, result.config_hash
    );
    println!(
        "schmidt values {:?}  C={}  norm deficit {:e}",
        result.schmidt_values, result.norm_constant, result.norm_deficit
    );
    let sampled = result.sampled.as_ref().map(|s| &s.contrast);
    println!(
        "{:<16} {:>14} {:>14} {:>10} {:>14}",
        "pattern", "quantum", "classical", "ratio", "interference"
    );
    for (p, row) in &result.exact.contrast.rows {
        let ratio = match row.ratio {
            sis_core::Ratio::Finite(x) => format!("{x:.4}"),
            sis_core::Ratio::Infinite => "inf".into(),
            sis_core::Ratio::Undefined => "-".into(),
        };
        let kind = match row.interference {
            Interference::Constructive => "constructive",
            Interference::Destructive => "destructive",
            Interference::None => "none",
            Interference::Reference => "reference",
        };
        println!(
            "{:<16} {:>14.6e} {:>14.6e} {:>10} {:>14}",
            p.to_string(),
            row.quantum,
            row.classical,
            ratio,
            kind
        );
    }
    if let Some(c) = sampled {
        println!(
            "sampled: mean constructive ratio {}  mean destructive ratio {}",
            c.mean_constructive_ratio
                .map_or("-".into(), |x| format!("{x:.4}")),
            c.mean_destructive_ratio
                .map_or("-".into(), |x| format!("{x:.4}"))
        );
    }
}
