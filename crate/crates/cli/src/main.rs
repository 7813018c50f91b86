//! `floodcast` command-line driver.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use floodcast::benchmark::{benchmark_compare, read_skill_csv, write_benchmark_csv};
use floodcast::hydrodata::io::write_json;
use floodcast::pipeline::{default_network, run_stages, write_synthetic_dataset, RunManifest, RunOutcome, Stage};
use floodcast::Error;

#[derive(Parser, Debug)]
#[command(name = "floodcast", version, about = "Streamflow forecasting pipeline")]
struct Cli {
    /// Run manifest (TOML or JSON).
    #[arg(long, global = true)]
    manifest: Option<PathBuf>,
    /// Overrides the manifest seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Artifact directory.
    #[arg(long, global = true, default_value = "floodcast-out")]
    out_dir: PathBuf,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Overlap/duplicate resolution and quality control.
    Curate,
    /// Pre-training on reanalysis forcing (fits the scaler first).
    Train,
    /// Fine-tuning on lead-time-1 forecast forcing.
    Finetune,
    /// Test-period predictions for every model and lead time.
    Predict,
    /// Per-station skill tables.
    Evaluate,
    /// Wasserstein distance between reanalysis and forecast precipitation.
    ForcingShift,
    /// Return-period thresholds from observed and simulated references.
    Thresholds,
    /// Flood-event hits, misses and false alarms.
    VerifyEvents,
    /// Per-station comparison of two skill tables.
    Benchmark(BenchmarkArgs),
    /// Writes a synthetic dataset and its manifest.
    Synth(SynthArgs),
    /// Every stage.
    Run,
}

#[derive(Args, Debug)]
struct BenchmarkArgs {
    /// Skill CSV of model A; with `--b`, compares the two files without a manifest.
    #[arg(long, requires = "b")]
    a: Option<PathBuf>,
    #[arg(long, requires = "a")]
    b: Option<PathBuf>,
    #[arg(long, default_value = "kge_prime")]
    metric: String,
}

#[derive(Args, Debug)]
struct SynthArgs {
    /// Output directory for the dataset.
    #[arg(long)]
    dir: PathBuf,
    #[arg(long, default_value_t = 8)]
    basins: usize,
    #[arg(long, value_delimiter = ',', default_value = "1")]
    lead_times: Vec<u32>,
    /// Skip the duplicate and flatlined gauges.
    #[arg(long)]
    no_defects: bool,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: thread pool: {e}");
            return ExitCode::from(2);
        }
    }
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    if e.is_validation() {
        2
    } else {
        3
    }
}

fn load_manifest(cli: &Cli) -> Result<RunManifest, Error> {
    let path = cli.manifest.as_deref().ok_or_else(|| Error::domain("--manifest is required"))?;
    if !path.exists() {
        return Err(Error::parse(path, "manifest not found"));
    }
    let mut m = RunManifest::load(path)?;
    if let Some(s) = cli.seed {
        m.seed = s;
    }
    Ok(m)
}

fn stages(cli: &Cli, targets: &[Stage]) -> Result<(), Error> {
    let m = load_manifest(cli)?;
    let outcome = run_stages(&m, &cli.out_dir, targets)?;
    print_outcome(&outcome)
}

fn print_outcome(o: &RunOutcome) -> Result<(), Error> {
    println!("{}", serde_json::to_string_pretty(o)?);
    Ok(())
}

fn dispatch(cli: &Cli) -> Result<(), Error> {
    match &cli.command {
        Command::Curate => stages(cli, &[Stage::Curate]),
        Command::Train => stages(cli, &[Stage::Pretrain]),
        Command::Finetune => stages(cli, &[Stage::Finetune]),
        Command::Predict => stages(cli, &[Stage::Predict]),
        Command::Evaluate => stages(cli, &[Stage::Evaluate]),
        Command::ForcingShift => stages(cli, &[Stage::ForcingShift]),
        Command::Thresholds => stages(cli, &[Stage::Thresholds]),
        Command::VerifyEvents => stages(cli, &[Stage::VerifyEvents]),
        Command::Run => stages(cli, &[Stage::Report]),
        Command::Benchmark(args) => match (&args.a, &args.b) {
            (Some(a), Some(b)) => standalone_benchmark(a, b, &args.metric, &cli.out_dir),
            _ => stages(cli, &[Stage::Benchmark]),
        },
        Command::Synth(args) => {
            let mut spec = default_network(args.basins);
            spec.with_defects = !args.no_defects;
            if args.lead_times.is_empty() || args.lead_times.contains(&0) {
                return Err(Error::domain("lead times must be positive"));
            }
            let ds = write_synthetic_dataset(&args.dir, &spec, &args.lead_times, cli.seed.unwrap_or(0))?;
            println!("{}", ds.manifest_path.display());
            Ok(())
        }
    }
}

fn standalone_benchmark(a: &Path, b: &Path, metric: &str, out: &Path) -> Result<(), Error> {
    let r = benchmark_compare(&read_skill_csv(a)?, &read_skill_csv(b)?, metric)?;
    write_benchmark_csv(&out.join("rows.csv"), &r.rows)?;
    write_json(&out.join("summary.json"), &r.summary)?;
    println!("{}", serde_json::to_string_pretty(&r.summary)?);
    Ok(())
}
