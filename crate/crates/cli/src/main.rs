use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use vfl_core::scenario::{self, RunReport, Scenario};

#[derive(Parser)]
#[command(name = "vfl", version, about = "Verifiable federated linear regression simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write client_1.csv .. client_C.csv and test.csv.
    GenData {
        #[arg(long)]
        k: usize,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        clients: usize,
        /// Defaults to ceil(0.1 n).
        #[arg(long)]
        n_test: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Execute a scenario and write its JSON report.
    Run {
        #[arg(long)]
        scenario: PathBuf,
        /// Overrides the scenario seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Report path; stdout if omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare constraint counts and timings across reports.
    Report {
        #[arg(required = true)]
        paths: Vec<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn load_scenario(path: &Path) -> Result<Scenario> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut sc: Scenario = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    // Relative dataset paths resolve against the scenario file.
    if let Some(ds) = &sc.dataset_path {
        if ds.is_relative() {
            if let Some(dir) = path.parent() {
                sc.dataset_path = Some(dir.join(ds));
            }
        }
    }
    Ok(sc)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GenData {
            k,
            n,
            clients,
            n_test,
            seed,
            out,
        } => {
            let n_test = n_test.unwrap_or_else(|| n.div_ceil(10));
            let data = scenario::gen_data(k, n, n_test, clients, seed)?;
            scenario::write_dataset_dir(&out, &data)?;
            eprintln!("wrote {} client files and test.csv to {}", clients, out.display());
        }
        Command::Run { scenario, seed, out } => {
            let mut sc = load_scenario(&scenario)?;
            if let Some(s) = seed {
                sc.seed = s;
            }
            let report = scenario::run(&sc)?;
            let passed = report.clients.iter().filter(|c| c.weight.is_pass() && c.cost.is_pass()).count();
            eprintln!(
                "{} of {} clients passed both proofs; {} transactions",
                passed,
                report.clients.len(),
                report.transactions
            );
            emit(out.as_deref(), &report.to_json())?;
        }
        Command::Report { paths, out } => {
            let mut reports = Vec::with_capacity(paths.len());
            for p in &paths {
                let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
                let r: RunReport = serde_json::from_str(&text).with_context(|| format!("malformed report {}", p.display()))?;
                reports.push(r);
            }
            if reports.is_empty() {
                bail!("no reports given");
            }
            let summary = scenario::summarize(&reports);
            emit(out.as_deref(), &serde_json::to_string_pretty(&summary)?)?;
        }
    }
    Ok(())
}

fn main() {
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e:#}");
        std::process::exit(2);
    }
}
