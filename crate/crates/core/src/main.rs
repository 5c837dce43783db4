use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use fronthaul_mq::accounting::{flops_du, flops_ru, overhead_summary, FlopConfig, OverheadConfig};
use fronthaul_mq::harness::{run_scenario, train_and_save, write_report, Scenario};
use fronthaul_mq::{Error, Result};

/// Fronthaul quantization experiments for cell-free massive MIMO.
#[derive(Parser, Debug)]
#[command(name = "fhq", version)]
struct Cli {
    /// Overrides the scenario seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory (default: the scenario's `out_dir`, else `out`).
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train, evaluate and write results for a scenario.
    Run { scenario: PathBuf },
    /// Train the scenario's codebooks and save them.
    Train { scenario: PathBuf },
    /// Print the DU and RU flop tables; `reference` selects the built-in configuration.
    Flops { config: String },
    /// Print fronthaul overhead and bit rates for a TOML configuration.
    Overhead { config: PathBuf },
}

fn read_toml<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)?;
    toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

fn load_scenario(cli: &Cli, path: &Path) -> Result<(Scenario, PathBuf)> {
    let mut sc = Scenario::load(path).map_err(|e| match e {
        Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
        other => other,
    })?;
    if let Some(seed) = cli.seed {
        sc.seed = seed;
    }
    let dir = cli.out_dir.clone().or_else(|| sc.out_dir.clone()).unwrap_or_else(|| PathBuf::from("out"));
    Ok((sc, dir))
}

fn execute(cli: &Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    }
    match &cli.command {
        Command::Run { scenario } => {
            let (sc, dir) = load_scenario(cli, scenario)?;
            let report = run_scenario(&sc)?;
            let mut out = std::io::stdout().lock();
            for p in write_report(&report, &dir)? {
                writeln!(out, "{}", p.display())?;
            }
        }
        Command::Train { scenario } => {
            let (sc, dir) = load_scenario(cli, scenario)?;
            let mut out = std::io::stdout().lock();
            for p in train_and_save(&sc, &dir)? {
                writeln!(out, "{}", p.display())?;
            }
        }
        Command::Flops { config } => {
            let cfg: FlopConfig =
                if config == "reference" { FlopConfig::reference() } else { read_toml(Path::new(config))? };
            let mut out = std::io::stdout().lock();
            for (side, report) in [("du", flops_du(&cfg)), ("ru", flops_ru(&cfg))] {
                writeln!(out, "# {side}")?;
                report.write_csv(&mut out)?;
                if let Some(dir) = &cli.out_dir {
                    std::fs::create_dir_all(dir)?;
                    report.write_csv(std::fs::File::create(dir.join(format!("flops_{side}.csv")))?)?;
                }
            }
        }
        Command::Overhead { config } => {
            let cfg: OverheadConfig = read_toml(config)?;
            let summary = overhead_summary(&cfg)?;
            let text = serde_json::to_string_pretty(&summary).map_err(|e| Error::Format(e.to_string()))?;
            writeln!(std::io::stdout(), "{text}")?;
            if let Some(dir) = &cli.out_dir {
                std::fs::create_dir_all(dir)?;
                std::fs::write(dir.join("overhead.json"), &text)?;
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Error::Io(e)) if e.kind() == std::io::ErrorKind::BrokenPipe => ExitCode::SUCCESS,
        Err(e @ Error::Config(_)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
