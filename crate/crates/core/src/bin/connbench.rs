use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use connbench::bench::{
    build_cohort, cohort_csv, parse_grid, run_benchmark, sweep_csv, threshold_sweep, with_pool, write_atomic, write_outputs,
    ExperimentConfig, Threads,
};
use connbench::bench::plot::{plot, Figure};
use connbench::psdgen::{feasibility_csv, feasibility_map};
use connbench::{Error, Result};

#[derive(Parser)]
#[command(name = "connbench", version, about = "Ground-truth benchmark for connectivity graph inference")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build and serialize the matrix cohort.
    Generate {
        #[arg(long)]
        config: PathBuf,
        /// Defaults to the config's output_dir.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Count feasible draws over a (b, d) grid.
    Feasibility {
        #[arg(long)]
        p: usize,
        /// a:b:step
        #[arg(long)]
        b_grid: String,
        /// a:b:step
        #[arg(long)]
        d_grid: String,
        #[arg(long)]
        seeds: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "auto")]
        threads: String,
    },
    /// Run the full estimator × method × T sweep.
    Bench {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        threads: Option<String>,
    },
    /// Accuracy of a fixed threshold over a grid of tau.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "0:1:0.01")]
        grid: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Render a figure from a CSV produced by this tool.
    Plot {
        #[arg(long)]
        figure: String,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

const EXIT_CONFIG: u8 = 2;
const EXIT_COHORT: u8 = 3;
const EXIT_PARTIAL: u8 = 4;

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::Parse(_) | Error::InvalidArgument(_) => EXIT_CONFIG,
        Error::CohortInfeasible { .. } => EXIT_COHORT,
        _ => 1,
    }
}

fn generate(config: &Path, out: Option<PathBuf>) -> Result<u8> {
    let cfg = ExperimentConfig::load(config)?;
    let dir = out.unwrap_or_else(|| cfg.output_dir.clone());
    let cohort = with_pool(&cfg, || build_cohort(&cfg))??;
    let matrices = dir.join("matrices");
    fs::create_dir_all(&matrices)?;
    for m in &cohort {
        write_atomic(&matrices.join(format!("matrix_{:04}.txt", m.id)), m.matrix_text(&cfg).as_bytes())?;
        write_atomic(&matrices.join(format!("matrix_{:04}.edges", m.id)), m.support.to_edge_list().as_bytes())?;
    }
    write_atomic(&dir.join("cohort.csv"), cohort_csv(&cohort).as_bytes())?;
    eprintln!("{} matrices written to {}", cohort.len(), dir.display());
    Ok(0)
}

fn feasibility(p: usize, b_grid: &str, d_grid: &str, seeds: usize, out: &Path, seed: u64, threads: &str) -> Result<u8> {
    let b = parse_grid(b_grid)?;
    let d = parse_grid(d_grid)?;
    if seeds == 0 {
        return Err(Error::Config("--seeds must be positive".into()));
    }
    let cfg = ExperimentConfig { threads: threads.parse().map_err(|e: Error| Error::Config(e.to_string()))?, ..Default::default() };
    let cells = with_pool(&cfg, || feasibility_map(p, &b, &d, seeds, seed))??;
    write_atomic(out, feasibility_csv(&cells).as_bytes())?;
    Ok(0)
}

fn bench(config: &Path, out: &Path, threads: Option<String>) -> Result<u8> {
    let mut cfg = ExperimentConfig::load(config)?;
    if let Some(t) = threads {
        cfg.threads = t.parse::<Threads>().map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
    }
    let result = run_benchmark(&cfg)?;
    write_outputs(out, &cfg, &result)?;
    let failures = result.failures();
    eprintln!("{} records, {} failed, written to {}", result.records.len(), failures, out.display());
    Ok(if failures > 0 { EXIT_PARTIAL } else { 0 })
}

fn sweep(config: &Path, grid: &str, out: &Path) -> Result<u8> {
    let cfg = ExperimentConfig::load(config)?;
    let grid = parse_grid(grid)?;
    let rows = threshold_sweep(&cfg, &grid)?;
    write_atomic(out, sweep_csv(&rows).as_bytes())?;
    Ok(0)
}

fn render(figure: &str, input: &Path, out: &Path) -> Result<u8> {
    let figure: Figure = figure.parse()?;
    let text = fs::read_to_string(input)?;
    write_atomic(out, plot(figure, &text)?.as_bytes())?;
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Generate { config, out } => generate(&config, out),
        Command::Feasibility { p, b_grid, d_grid, seeds, out, seed, threads } => {
            feasibility(p, &b_grid, &d_grid, seeds, &out, seed, &threads)
        }
        Command::Bench { config, out, threads } => bench(&config, &out, threads),
        Command::Sweep { config, grid, out } => sweep(&config, &grid, &out),
        Command::Plot { figure, input, out } => render(&figure, &input, &out),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
