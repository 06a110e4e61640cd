use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use num_bigint::BigUint;
use serde::Serialize;

use taskseq::emulator::{CorrelationKind, ModelKind};
use taskseq::harness::{
    diagnostics_export, load_scenario, run_pipeline, simulate_grid, with_workers, CandidateSource, RunConfig,
    SimulationConfig, Split, UtilityTable,
};
use taskseq::theory::{probability_table, tau_from_delta};
use taskseq::utility::{Evaluator, ExpectedUtility, StagePlan};
use taskseq::{Error, Permutation, Result, FORMAT_VERSION};

#[derive(Parser)]
#[command(name = "taskseq", version, about = "Surrogate-assisted sequencing of reliability growth tasks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Expected utility and stage plan of one ordering.
    Evaluate {
        scenario: PathBuf,
        /// Task ids separated by commas, dashes or spaces.
        sequence: String,
    },
    /// Rank every ordering by expected utility (CSV).
    Exhaustive {
        scenario: PathBuf,
        /// Only print the best K rows.
        #[arg(long)]
        top: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Train, fit, propose and evaluate within a budget of B utility evaluations.
    Optimize(OptimizeArgs),
    /// Run a simulation grid described by a JSON config (CSV summary).
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Probability the optimum is in the surrogate's top M, for M = 1..Mmax (CSV).
    Theory {
        #[arg(long = "R")]
        r: usize,
        #[arg(long)]
        delta: u64,
        #[arg(long = "Mmax")]
        m_max: usize,
    },
}

#[derive(Args)]
struct OptimizeArgs {
    scenario: PathBuf,
    #[arg(long)]
    budget: usize,
    /// Explicit split as N,M.
    #[arg(long, conflicts_with = "half")]
    split: Option<String>,
    /// N = B/2 (the default).
    #[arg(long)]
    half: bool,
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value = "benter")]
    model: String,
    #[arg(long, default_value = "pearson")]
    corr: String,
    /// Propose candidates from COUNT model samples instead of all J! orderings.
    #[arg(long, value_name = "COUNT")]
    sampled: Option<usize>,
    #[arg(long, default_value_t = 5)]
    starts: usize,
    #[arg(long)]
    workers: Option<usize>,
    /// Report JSON path; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Diagnostics CSV path.
    #[arg(long)]
    diagnostics: Option<PathBuf>,
}

#[derive(Serialize)]
struct EvaluateOutput {
    format_version: u32,
    sequence: Permutation,
    utility: ExpectedUtility,
    stage_plan: StagePlan,
    warnings: Vec<String>,
}

fn parse_split(s: &str) -> Result<Split> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let [n, m] = parts.as_slice() else {
        return Err(Error::InvalidArgument(format!("split '{s}' must look like N,M")));
    };
    let n = n.parse().map_err(|_| Error::InvalidArgument(format!("bad N in '{s}'")))?;
    let m = m.parse().map_err(|_| Error::InvalidArgument(format!("bad M in '{s}'")))?;
    Ok(Split::Explicit { n, m })
}

fn pooled<T: Send>(workers: Option<usize>, f: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    match workers {
        Some(w) => with_workers(w, f)?,
        None => f(),
    }
}

fn write_output(path: Option<&PathBuf>, text: &str) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, text)?,
        None => io::stdout().lock().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Evaluate { scenario, sequence } => {
            let loaded = load_scenario(&scenario)?;
            let x: Permutation = sequence.parse()?;
            let (stage_plan, utility) = Evaluator::new(&loaded.scenario)?.stage_plan(&x)?;
            let out = EvaluateOutput { format_version: FORMAT_VERSION, sequence: x, utility, stage_plan, warnings: loaded.warnings };
            write_output(None, &(serde_json::to_string_pretty(&out)? + "\n"))?;
        }
        Command::Exhaustive { scenario, top, out, workers } => {
            let loaded = load_scenario(&scenario)?;
            let table = pooled(workers, || UtilityTable::build(&Evaluator::new(&loaded.scenario)?))?;
            let rows = match top {
                Some(k) => table.top(k),
                None => table.ranked(),
            };
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(["rank", "sequence", "u", "logit_u", "format_version"])?;
            for (i, (x, u)) in rows.iter().enumerate() {
                let eu = ExpectedUtility::new(*u);
                w.write_record([
                    (i + 1).to_string(),
                    x.to_string(),
                    eu.value.to_string(),
                    eu.logit.to_string(),
                    FORMAT_VERSION.to_string(),
                ])?;
            }
            let bytes = w.into_inner().map_err(|e| Error::InvalidArgument(e.to_string()))?;
            write_output(out.as_ref(), &String::from_utf8_lossy(&bytes))?;
        }
        Command::Optimize(args) => {
            let loaded = load_scenario(&args.scenario)?;
            for w in &loaded.warnings {
                eprintln!("warning: {w}");
            }
            let split = match &args.split {
                Some(s) => parse_split(s)?,
                None => Split::Half,
            };
            let mut config = RunConfig::new(args.budget, split, args.seed);
            config.model = args.model.parse::<ModelKind>()?;
            config.correlation = args.corr.parse::<CorrelationKind>()?;
            config.starts = args.starts;
            if let Some(count) = args.sampled {
                config.candidates = CandidateSource::Sampled { count };
            }
            let report = pooled(args.workers, || run_pipeline(&loaded.scenario, &config))?;
            let mut text = report.to_json()?;
            text.push('\n');
            write_output(args.out.as_ref(), &text)?;
            if let Some(path) = &args.diagnostics {
                diagnostics_export(&report, path)?;
            }
        }
        Command::Simulate { config, out, workers } => {
            let text = std::fs::read_to_string(&config)?;
            let cfg = SimulationConfig::from_json(&text)?;
            let summary = pooled(workers, || simulate_grid(&cfg))?;
            write_output(out.as_ref(), &summary.to_csv_string()?)?;
        }
        Command::Theory { r, delta, m_max } => {
            let rows = probability_table(r, delta, m_max)?;
            let t = BigUint::from(r as u64) * BigUint::from(r as u64 - 1) / BigUint::from(2u32);
            let tau = tau_from_delta(&t, &BigUint::from(delta))?;
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(["R", "delta", "tau", "M", "probability", "format_version"])?;
            for (m, p) in rows {
                w.write_record([
                    r.to_string(),
                    delta.to_string(),
                    tau.to_string(),
                    m.to_string(),
                    p.to_string(),
                    FORMAT_VERSION.to_string(),
                ])?;
            }
            let bytes = w.into_inner().map_err(|e| Error::InvalidArgument(e.to_string()))?;
            write_output(None, &String::from_utf8_lossy(&bytes))?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
