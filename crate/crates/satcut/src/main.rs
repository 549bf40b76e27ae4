use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use satcut::error::{Error, Result};
use satcut::harness::{self, BenchConfig, GeneratorConfig, Scenario};
use satcut::netsim::RunConfig;
use satcut::signal::PLTrace;

#[derive(Parser)]
#[command(
    name = "satcut",
    about = "Detect all satisfying consistent cuts of a conjunctive predicate \
             over partially synchronous continuous-time signals"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate synthetic traces at a target root rate.
    Generate {
        #[arg(long, default_value_t = 2)]
        n: usize,
        #[arg(long, default_value_t = 5.0)]
        duration: f64,
        #[arg(long, default_value_t = 10.0)]
        rate: f64,
        #[arg(long, default_value_t = 1.0)]
        amplitude: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = satcut::signal::DEFAULT_TICK_HZ)]
        tick_hz: i64,
        /// Output directory for per-agent CSV files.
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the decentralized detector over CSV traces.
    Detect {
        #[arg(long)]
        config: PathBuf,
        /// Directory of trace CSVs, or a single CSV file.
        #[arg(long)]
        traces: PathBuf,
        /// Full run report (JSON).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Extremal interval records (JSON lines).
        #[arg(long)]
        satcuts: Option<PathBuf>,
    },
    /// Run detector and oracle on the same input and diff their extremal
    /// intervals; exits nonzero on mismatch.
    Verify {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        traces: PathBuf,
    },
    /// Run a (agents x root-rate) scaling sweep.
    Bench {
        #[arg(long)]
        sweep: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Replay a built-in scenario and diff against its embedded expected
    /// output; exits nonzero on mismatch.
    Golden {
        #[arg(long)]
        scenario: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load_config(path: &PathBuf) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

fn load_traces(cfg: &RunConfig, traces: &PathBuf) -> Result<Vec<PLTrace>> {
    let paths: Vec<PathBuf> = if traces.is_dir() {
        let mut entries: Vec<PathBuf> = std::fs::read_dir(traces)?
            .filter_map(|e| e.ok())
            .map(|e| e.path())
            .filter(|p| p.extension().map_or(false, |x| x == "csv"))
            .collect();
        entries.sort();
        entries
    } else {
        vec![traces.clone()]
    };
    if paths.is_empty() {
        return Err(Error::Ingest {
            location: traces.display().to_string(),
            detail: "no CSV files found".into(),
        });
    }
    let atoms = cfg.atoms.clone().unwrap_or_default();
    harness::ingest(&paths, &atoms, cfg.tick_hz, Some(cfg.n_agents))
}

fn run() -> Result<bool> {
    let cli = Cli::parse();
    match cli.command {
        Command::Generate {
            n,
            duration,
            rate,
            amplitude,
            seed,
            tick_hz,
            out,
        } => {
            let traces = harness::generate(&GeneratorConfig {
                n_agents: n,
                duration_s: duration,
                root_rate: rate,
                amplitude,
                seed,
                tick_hz,
            })?;
            let paths = harness::write_traces_csv(&out, &traces, tick_hz)?;
            for p in paths {
                println!("wrote {}", p.display());
            }
            Ok(true)
        }
        Command::Detect {
            config,
            traces,
            out,
            satcuts,
        } => {
            let cfg = load_config(&config)?;
            // Ingestion already applies the predicate atoms.
            let raw = load_traces(&cfg, &traces)?;
            let mut run_cfg = cfg.clone();
            run_cfg.atoms = None;
            let outcome = harness::detect(&run_cfg, &raw)?;
            let records = harness::interval_records(&outcome.intervals, cfg.tick_hz);
            for rec in &records {
                println!("{}", serde_json::to_string(rec)?);
            }
            println!(
                "metrics: {}",
                serde_json::to_string(&outcome.report.metrics)?
            );
            if let Some(path) = out {
                std::fs::write(&path, serde_json::to_vec_pretty(&outcome.report)?)?;
                println!("report written to {}", path.display());
            }
            if let Some(path) = satcuts {
                let mut lines = String::new();
                for rec in &records {
                    lines.push_str(&serde_json::to_string(rec)?);
                    lines.push('\n');
                }
                std::fs::write(&path, lines)?;
            }
            Ok(true)
        }
        Command::Verify { config, traces } => {
            let cfg = load_config(&config)?;
            let raw = load_traces(&cfg, &traces)?;
            let mut run_cfg = cfg.clone();
            run_cfg.atoms = None;
            let outcome = harness::verify(&run_cfg, &raw)?;
            println!("{}", serde_json::to_string_pretty(&outcome)?);
            if outcome.matches {
                println!("verify: detector and oracle agree");
            } else {
                eprintln!("verify: MISMATCH between detector and oracle");
            }
            Ok(outcome.matches)
        }
        Command::Bench { sweep, out } => {
            let text = std::fs::read_to_string(&sweep)?;
            let cfg: BenchConfig = serde_json::from_str(&text)?;
            let rows = harness::bench(&cfg)?;
            harness::write_bench_csv(&out, &rows)?;
            for row in &rows {
                println!(
                    "N={} rate={} tokens/run={:.1} wall={:.2}ms ± {:.2}ms",
                    row.n_agents,
                    row.root_rate,
                    row.token_msgs_mean,
                    row.wall_ms_mean,
                    row.wall_ms_ci95
                );
            }
            println!("table written to {}", out.display());
            Ok(true)
        }
        Command::Golden { scenario, out } => {
            let scenario: Scenario = scenario.parse()?;
            let outcome = harness::run_golden(scenario)?;
            let records =
                harness::interval_records(&outcome.intervals, outcome.report.config.tick_hz);
            for rec in &records {
                println!("{}", serde_json::to_string(rec)?);
            }
            if let Some(path) = out {
                std::fs::write(&path, serde_json::to_vec_pretty(&outcome.report)?)?;
            }
            if outcome.passed() {
                println!("golden: output matches the embedded expectation");
            } else {
                for f in &outcome.failures {
                    eprintln!("golden mismatch: {}", f);
                }
            }
            Ok(outcome.passed())
        }
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
