use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;

use mtdrot::experiment::{self, ExperimentSpec, Invariants2D, Target};
use mtdrot::{io, selftest, Error, Result};

#[derive(Parser)]
#[command(name = "mtdrot", version, about = "Multi-target detection with rotations")]
struct Cli {
    /// Experiment description (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; defaults to the config's `out`, then `.`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads.
    #[arg(long, global = true, env = "MTD_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write `count` synthetic micrographs.
    Simulate {
        /// Also write the exact invariant of a 2D target.
        #[arg(long)]
        truth: bool,
    },
    /// Accumulate autocorrelation moments into `checkpoint.bin`.
    Accumulate {
        /// Micrograph files or directories.
        inputs: Vec<PathBuf>,
        /// Continue from this checkpoint.
        #[arg(long)]
        resume: Option<PathBuf>,
        /// Checkpoint after this many micrographs.
        #[arg(long, default_value_t = 8)]
        every: usize,
    },
    /// Estimate and invert the bispectrum from a 1D checkpoint.
    Recover1d { checkpoint: PathBuf },
    /// Fit a 2D image to a checkpoint, tensor or binned invariant file.
    Recover2d { input: PathBuf },
    /// Error versus count; writes `sweep.csv`.
    Sweep,
    /// Run the built-in invariant checks.
    Selftest,
}

fn load_spec(cli: &Cli) -> Result<ExperimentSpec> {
    let path = cli
        .config
        .as_deref()
        .ok_or_else(|| Error::Config("--config is required".into()))?;
    let mut spec = ExperimentSpec::load(path)?;
    if let Some(seed) = cli.seed {
        spec.seed = seed;
    }
    Ok(spec)
}

fn out_dir(cli: &Cli, spec: &ExperimentSpec) -> PathBuf {
    cli.out
        .clone()
        .or_else(|| spec.out.clone())
        .unwrap_or_else(|| PathBuf::from("."))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::InvalidInput(e.to_string()))?;
    fs::write(path, text + "\n").map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::Io {
        path: dir.to_path_buf(),
        source: e,
    })
}

fn run(cli: &Cli) -> Result<()> {
    if let Command::Selftest = cli.command {
        let checks = selftest::run();
        let mut failed = 0;
        for c in &checks {
            let verdict = if c.passed() { "PASS" } else { "FAIL" };
            println!("{verdict} {} ({:.3e} <= {:.0e})", c.name, c.value, c.tolerance);
            failed += usize::from(!c.passed());
        }
        if failed > 0 {
            return Err(Error::InvalidInput(format!("{failed} self-test check(s) failed")));
        }
        return Ok(());
    }
    let spec = load_spec(cli)?;
    let out = out_dir(cli, &spec);
    let target = spec.build_target()?;
    match &cli.command {
        Command::Simulate { truth } => {
            let paths = experiment::simulate(&spec, &target, &out, *truth)?;
            println!("wrote {} micrographs to {}", paths.len(), out.display());
        }
        Command::Accumulate { inputs, resume, every } => {
            let cfg = spec.measurement(&target)?;
            let files = experiment::collect_inputs(inputs)?;
            let resume = resume.as_deref().map(io::read_checkpoint).transpose()?;
            let checkpoint = out.join("checkpoint.bin");
            let acc = experiment::accumulate(&cfg, &files, resume, &checkpoint, *every)?;
            println!("{} micrographs in {}", acc.count, checkpoint.display());
        }
        Command::Recover1d { checkpoint } => {
            let Target::Signal(f) = &target else {
                return Err(Error::Config("recover1d needs dim = 1".into()));
            };
            let cfg = spec.measurement(&target)?;
            let acc = io::read_checkpoint(checkpoint)?;
            let report = experiment::recover1d(&spec, &cfg, f, &acc)?;
            ensure_dir(&out)?;
            write_json(&out.join("recovered_1d.json"), &report)?;
            println!(
                "invariant error {:.3e}, aligned error {:.3e}",
                report.invariant_error, report.aligned_error
            );
        }
        Command::Recover2d { input } => {
            let Target::Image { basis, coeffs, .. } = &target else {
                return Err(Error::Config("recover2d needs dim = 2".into()));
            };
            let cfg = spec.measurement(&target)?;
            let invariants = Invariants2D::load(input)?;
            let (report, image) = experiment::recover2d(&spec, &cfg, basis, coeffs, invariants)?;
            ensure_dir(&out)?;
            write_json(&out.join("recovered_2d.json"), &report)?;
            io::write_image(&out.join("recovered_image.bin"), cfg.n, &image)?;
            println!(
                "invariant error {:.3e}, final cost {:.3e}, aligned error {:.3e}",
                report.invariant_error,
                report.recovery.final_cost,
                report.recovery.aligned_error.unwrap_or(f64::NAN)
            );
        }
        Command::Sweep => {
            ensure_dir(&out)?;
            let path = out.join("sweep.csv");
            let mut csv = csv::Writer::from_path(&path).map_err(|e| csv_error(&path, e))?;
            let mut stdout = csv::Writer::from_writer(std::io::stdout());
            experiment::sweep(&spec, &target, |row| {
                csv.serialize(row).map_err(|e| csv_error(&path, e))?;
                csv.flush().map_err(|e| Error::Io {
                    path: path.clone(),
                    source: e,
                })?;
                stdout.serialize(row).map_err(|e| csv_error(&path, e))?;
                stdout.flush().map_err(|e| Error::Io {
                    path: PathBuf::from("<stdout>"),
                    source: e,
                })
            })?;
        }
        Command::Selftest => unreachable!(),
    }
    Ok(())
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source: std::io::Error::other(e),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global() {
            eprintln!("mtdrot: cannot start {threads} threads: {e}");
            return ExitCode::from(2);
        }
    }
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("mtdrot: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
