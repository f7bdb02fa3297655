//! `pmeasure`: command-line front end for `partition-measures`.

use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use partition_measures::asymptotics::symmetric_rescale;
use partition_measures::config::resolve;
use partition_measures::diagnostics::{SamplerChoice, SmallSampler};
use partition_measures::partition_function::{coefficients, ExactTable, FloatTable, TableOptions};
use partition_measures::sampler::{sample_grand, RejectionSampler};
use partition_measures::scalar::format_float;
use partition_measures::verify::{self, Criterion, VerifyOptions};
use partition_measures::{shape_curve, solve_tilt, Ensemble64, Error, RngStream};

#[derive(Parser)]
#[command(name = "pmeasure", version, about = "Multiplicative measures on integer partitions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct EnsembleArg {
    /// Catalog name (e.g. `uniform`, `gibbs(1,1)`) or path to a TOML config.
    #[arg(long, default_value = "uniform")]
    ensemble: String,
}

#[derive(Subcommand)]
enum Command {
    /// Limit shape φ on a uniform grid of (0, tmax], as `t,phi` CSV.
    Shape {
        #[command(flatten)]
        ensemble: EnsembleArg,
        #[arg(long, default_value_t = 5.0)]
        tmax: f64,
        #[arg(long, default_value_t = 500)]
        grid: usize,
        /// Report the curve in the symmetric scaling `(t/√Ω, φ√Ω)`.
        #[arg(long)]
        symmetric: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Partitions as JSON lines.
    Sample {
        #[command(flatten)]
        ensemble: EnsembleArg,
        #[arg(long)]
        n: Option<u64>,
        #[arg(long)]
        x: Option<f64>,
        #[arg(long, default_value_t = 1)]
        count: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = Mode::SmallExact)]
        mode: Mode,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Tilt x_n with E N = n, and the moments there.
    Tilt {
        #[command(flatten)]
        ensemble: EnsembleArg,
        #[arg(long)]
        n: u64,
    },
    /// Coefficients a_0..a_N of the partition function, as `n,a_n` CSV.
    Coeffs {
        #[command(flatten)]
        ensemble: EnsembleArg,
        #[arg(long)]
        n: usize,
        /// Exact rational arithmetic (default).
        #[arg(long, conflicts_with = "float")]
        exact: bool,
        /// Double precision.
        #[arg(long)]
        float: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Runs acceptance checks and prints a JSON report.
    Verify {
        /// Suite name, or `all`.
        #[arg(value_name = "SUITE")]
        name: Option<String>,
        #[arg(long, conflicts_with = "name")]
        suite: Option<String>,
        /// Replaces the ensembles of the concentration check.
        #[arg(long)]
        ensemble: Option<String>,
        #[arg(long)]
        n: Option<u64>,
        #[arg(long, default_value_t = VerifyOptions::default().seed)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Grand,
    SmallRejection,
    SmallExact,
}

enum Failure {
    Usage(String),
    Lib(Error),
    Io(io::Error),
    Verify(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Io(e)
    }
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Lib(e) => match e {
                Error::Param(_) | Error::UnknownName(_) | Error::Config { .. } => 1,
                Error::Domain(_) | Error::Regime { .. } | Error::NegativeCoefficient { .. } | Error::Unavailable(_) => 2,
                Error::BudgetExhausted { .. } => 3,
                Error::Quadrature(_)
                | Error::Convergence { .. }
                | Error::Truncation(_)
                | Error::Tail { .. }
                | Error::Table(_)
                | Error::FitUnstable(_) => 4,
            },
            Failure::Io(_) => 1,
            Failure::Verify(_) => 5,
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            match &f {
                Failure::Usage(m) | Failure::Verify(m) => eprintln!("error: {m}"),
                Failure::Lib(e @ Error::Regime { regime, .. }) => eprintln!("error [{regime}]: {e}"),
                Failure::Lib(e) => eprintln!("error: {e}"),
                Failure::Io(e) => eprintln!("error: {e}"),
            }
            ExitCode::from(f.code())
        }
    }
}

fn ensemble(arg: &str) -> Result<Ensemble64, Failure> {
    Ok(resolve(arg)?.build::<f64>()?)
}

fn emit(out: Option<&PathBuf>, text: &str) -> Result<(), Failure> {
    match out {
        Some(path) => fs::write(path, text)?,
        None => io::stdout().lock().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn run(command: Command) -> Result<(), Failure> {
    match command {
        Command::Shape { ensemble: arg, tmax, grid, symmetric, out } => {
            let e = ensemble(&arg.ensemble)?;
            let mut curve = shape_curve(&e, tmax, grid)?;
            if symmetric {
                curve.grid = symmetric_rescale(&curve.grid, curve.omega);
            }
            emit(out.as_ref(), &curve.to_csv())
        }
        Command::Sample { ensemble: arg, n, x, count, seed, mode, out } => {
            let e = ensemble(&arg.ensemble)?;
            let stream = |i: u64| RngStream::new(seed, i);
            let mut text = String::new();
            let mut push = |line: String| {
                text.push_str(&line);
                text.push('\n');
            };
            match mode {
                Mode::Grand => {
                    let x = x.ok_or_else(|| Failure::Usage("--mode grand needs --x".into()))?;
                    for i in 0..count {
                        push(sample_grand(&e, x, stream(i))?.record(stream(i)).to_json_line());
                    }
                }
                Mode::SmallRejection => {
                    let n = n.ok_or_else(|| Failure::Usage("--mode small-rejection needs --n".into()))?;
                    let s = RejectionSampler::new(&e, n, None)?;
                    for i in 0..count {
                        let (p, _) = s.sample(&mut stream(i).rng())?;
                        push(p.record(stream(i)).to_json_line());
                    }
                }
                Mode::SmallExact => {
                    let n = n.ok_or_else(|| Failure::Usage("--mode small-exact needs --n".into()))?;
                    if n == 0 {
                        return Err(Failure::Usage("--n must be at least 1".into()));
                    }
                    let s = SmallSampler::new(&e, n, SamplerChoice::Auto)?;
                    for i in 0..count {
                        push(s.sample(stream(i))?.record(stream(i)).to_json_line());
                    }
                }
            }
            emit(out.as_ref(), &text)
        }
        Command::Tilt { ensemble: arg, n } => {
            if n == 0 {
                return Err(Failure::Usage("--n must be at least 1".into()));
            }
            let e = ensemble(&arg.ensemble)?;
            let s = solve_tilt(&e, n)?;
            let rows = [
                ("x_n", s.x),
                ("tau_n", s.tau),
                ("alpha", s.alpha()),
                ("mean", s.mean),
                ("variance", s.variance),
                ("residual", s.residual),
            ];
            let mut text = String::from("quantity,value\n");
            for (k, v) in rows {
                text.push_str(&format!("{k},{}\n", format_float(v)));
            }
            emit(None, &text)
        }
        Command::Coeffs { ensemble: arg, n, exact: _, float, out } => {
            let e = ensemble(&arg.ensemble)?;
            let opts = TableOptions::default();
            let csv = if float {
                let t: FloatTable = coefficients(&e, n, &opts)?;
                t.to_csv()
            } else {
                let t: ExactTable = coefficients(&e, n, &opts)?;
                t.to_csv()
            };
            emit(out.as_ref(), &csv)
        }
        Command::Verify { name, suite, ensemble: arg, n, seed, out } => {
            let which = suite.or(name).unwrap_or_else(|| "all".into());
            let criteria: Vec<Criterion> = if which == "all" {
                Criterion::ALL.to_vec()
            } else {
                vec![Criterion::from_suite(&which).ok_or_else(|| {
                    let names: Vec<&str> = Criterion::ALL.iter().map(|c| c.suite()).collect();
                    Failure::Usage(format!("unknown suite `{which}`; expected all or one of {}", names.join(", ")))
                })?]
            };
            let opts = VerifyOptions {
                seed,
                n,
                ensemble: arg.as_deref().map(ensemble).transpose()?,
            };
            let results: Vec<_> = criteria.iter().map(|&c| verify::run(c, &opts)).collect();
            for r in &results {
                eprintln!("{}", r.line());
            }
            let report = serde_json::json!({
                "seed": seed,
                "passed": results.iter().all(|r| r.passed),
                "results": results,
            });
            let mut text = serde_json::to_string_pretty(&report).expect("report serialises");
            text.push('\n');
            emit(out.as_ref(), &text)?;
            let failed: Vec<&str> = results.iter().filter(|r| !r.passed).map(|r| r.suite).collect();
            if failed.is_empty() {
                Ok(())
            } else {
                Err(Failure::Verify(format!("failed: {}", failed.join(", "))))
            }
        }
    }
}
