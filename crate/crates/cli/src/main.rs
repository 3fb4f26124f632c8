mod grid_spec;
mod ops;
mod output;
mod suite;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use onesided::grid::{sample_function, FunctionSpec};
use onesided::weights::{cp_plus_scan, ScanGenerator, Weight, WeightSpec};

use grid_spec::GridSpec;
use suite::{run_suite, SuiteConfig};

#[derive(Parser)]
#[command(name = "onesided", version, about = "One-sided maximal, singular and square-function experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a function on a grid and print it as CSV.
    Sample {
        #[arg(long, default_value = "-8:8:1024", allow_hyphen_values = true)]
        grid: GridSpec,
        #[arg(long)]
        function: FunctionSpec,
        /// Output file; standard output when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Apply an operator to a sampled function and print the result as CSV.
    Apply {
        #[arg(long, default_value = "-8:8:1024", allow_hyphen_values = true)]
        grid: GridSpec,
        #[arg(long)]
        function: FunctionSpec,
        #[arg(long, help = ops::OPERATOR_HELP)]
        op: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Scan the one-sided Cp condition ratio over random configurations.
    WeightScan {
        #[arg(long, default_value = "-8:8:1024", allow_hyphen_values = true)]
        grid: GridSpec,
        #[arg(long)]
        weight: WeightSpec,
        #[arg(long)]
        p: f64,
        #[arg(long, default_value_t = 0.5)]
        eps: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 200)]
        count: usize,
        /// Lattice unit of the configurations.
        #[arg(long, default_value_t = 0.125)]
        unit: f64,
        #[arg(long, default_value_t = -4.0, allow_hyphen_values = true)]
        window_start: f64,
        #[arg(long, default_value_t = 4.0, allow_hyphen_values = true)]
        window_end: f64,
        /// Report file; standard output when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a suite of checks and write `report.json` and `summary.csv`.
    Verify {
        #[arg(long)]
        config: PathBuf,
        /// Output directory; overrides the suite's `output`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Overrides the corpus and generator seeds.
        #[arg(long)]
        seed: Option<u64>,
        /// Cell count, keeping the grid's extent.
        #[arg(long)]
        resolution: Option<usize>,
    },
}

/// Errors in the input map to exit code 2; a failed check maps to 1.
enum Outcome {
    Ok,
    ChecksFailed,
}

fn main() -> ExitCode {
    init_threads();
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(Outcome::Ok) => ExitCode::SUCCESS,
        Ok(Outcome::ChecksFailed) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn init_threads() {
    if let Some(n) = std::env::var("ONESIDED_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        // A second initialization fails harmlessly.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}

fn sink(out: Option<&Path>) -> anyhow::Result<Box<dyn Write>> {
    Ok(match out {
        Some(path) => Box::new(BufWriter::new(
            File::create(path).with_context(|| format!("creating {}", path.display()))?,
        )),
        None => Box::new(io::stdout().lock()),
    })
}

fn run(command: Command) -> anyhow::Result<Outcome> {
    match command {
        Command::Sample { grid, function, out } => {
            let f = sample_function(&function, &grid.grid()?)?;
            output::write_function_csv(sink(out.as_deref())?, &f)?;
        }
        Command::Apply {
            grid,
            function,
            op,
            out,
        } => {
            let expr = ops::parse_operator(&op)?;
            let f = sample_function(&function, &grid.grid()?)?;
            output::write_function_csv(sink(out.as_deref())?, &expr.eval(&f)?)?;
        }
        Command::WeightScan {
            grid,
            weight,
            p,
            eps,
            seed,
            count,
            unit,
            window_start,
            window_end,
            out,
        } => {
            let w = Weight::from_spec(&weight, &grid.grid()?)?;
            let generator = ScanGenerator::new(seed, count, unit, (window_start, window_end));
            let report = cp_plus_scan(&w, p, eps, &generator)?;
            let mut sink = sink(out.as_deref())?;
            serde_json::to_writer_pretty(&mut sink, &report)?;
            writeln!(sink)?;
        }
        Command::Verify {
            config,
            out,
            seed,
            resolution,
        } => {
            let mut suite = SuiteConfig::load(&config)?;
            if let Some(seed) = seed {
                suite.reseed(seed);
            }
            if let Some(count) = resolution {
                suite.grid = suite.grid.with_count(count);
                suite.validate()?;
            }
            let dir = out
                .or_else(|| suite.output.as_ref().map(PathBuf::from))
                .unwrap_or_else(|| PathBuf::from("onesided-report"));
            let report = run_suite(&suite)?;
            std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
            let json = serde_json::to_string_pretty(&report)?;
            std::fs::write(dir.join("report.json"), json + "\n")?;
            std::fs::write(dir.join("summary.csv"), report.summary_csv()?)?;
            for c in &report.checks {
                let status = if c.passed { "PASS" } else { "FAIL" };
                eprintln!("{status} {} sup={}", c.name, output::number(c.report.sup_ratio));
                for r in &c.reasons {
                    eprintln!("    {r}");
                }
            }
            if !report.passed() {
                return Ok(Outcome::ChecksFailed);
            }
        }
    }
    Ok(Outcome::Ok)
}
