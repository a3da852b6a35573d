#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use nmk::runner::{self, Observable, ResultRecord, RunConfig};
use nmk::{Error, Result};

#[derive(Parser)]
#[command(name = "nmk", version, about = "Non-Markovianity measures for dephasing, damping and BEC qubit channels")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Key/value configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output file; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Overrides `search.seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Report zero wall time so repeated runs are byte-identical.
    #[arg(long)]
    no_timing: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// One optimised measure for the configured channel.
    Measure(Common),
    /// BLP rows for the three channels.
    Table {
        #[command(flatten)]
        common: Common,
        /// 1: one qubit, 2: two qubits in independent environments, 3: common environment.
        #[arg(long, value_parser = clap::value_parser!(u8).range(1..=3))]
        which: u8,
    },
    /// LFS value versus the ground population of a diagonal input.
    SweepInitial {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 0.0)]
        from: f64,
        #[arg(long, default_value_t = 1.0)]
        to: f64,
        #[arg(long, default_value_t = 0.05)]
        step: f64,
    },
    /// Optimised measure versus a bath parameter such as `ad.lambda`.
    SweepBath {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        param: String,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
    },
    /// LFS (or fixed-input LFS with `measure = lfs0`) versus qubit number.
    Scale {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 4)]
        max_qubits: usize,
    },
    /// Time series of one observable on the base grid.
    Trajectory {
        #[command(flatten)]
        common: Common,
        /// coherence, mutual_information or trace_distance.
        #[arg(long)]
        observable: String,
        /// Ground population of the diagonal input for mutual_information.
        #[arg(long)]
        rho11: Option<f64>,
        /// Structured pair label for trace_distance, e.g. "|+>,|->".
        #[arg(long)]
        pair: Option<String>,
    },
}

fn load(common: &Common) -> Result<RunConfig> {
    let mut cfg = match &common.config {
        Some(path) => RunConfig::from_file(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.search.seed = seed;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn write_output(common: &Common, bytes: Vec<u8>) -> Result<()> {
    match &common.out {
        Some(path) => std::fs::write(path, bytes)?,
        None => std::io::stdout().write_all(&bytes)?,
    }
    Ok(())
}

fn json<T: Serialize + ?Sized>(value: &T) -> Result<Vec<u8>> {
    let mut v = serde_json::to_vec_pretty(value)?;
    v.push(b'\n');
    Ok(v)
}

fn csv_rows<T: Serialize>(rows: &[T]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

#[derive(Serialize)]
struct RecordRow<'a> {
    channel: &'a str,
    env: &'a str,
    measure: &'a str,
    n_qubits: usize,
    value: f64,
    reference: Option<f64>,
    horizon: f64,
    converged: bool,
    argmax_state: &'a str,
    evaluations: usize,
    seed: u64,
    config_hash: &'a str,
    version: &'a str,
    wall_time_s: f64,
    flag: &'a str,
}

fn name<T: Serialize>(v: &T) -> String {
    serde_json::to_value(v).ok().and_then(|j| j.as_str().map(str::to_string)).unwrap_or_default()
}

fn emit_records(common: &Common, records: Vec<ResultRecord>) -> Result<()> {
    let records: Vec<ResultRecord> =
        if common.no_timing { records.into_iter().map(ResultRecord::without_timing).collect() } else { records };
    let bytes = match common.format {
        Format::Json if records.len() == 1 => json(&records[0])?,
        Format::Json => json(&records)?,
        Format::Csv => {
            let names: Vec<[String; 3]> = records.iter().map(|r| [name(&r.channel), name(&r.env), name(&r.measure)]).collect();
            let rows: Vec<RecordRow> = records
                .iter()
                .zip(&names)
                .map(|(r, n)| RecordRow {
                    channel: &n[0],
                    env: &n[1],
                    measure: &n[2],
                    n_qubits: r.n_qubits,
                    value: r.value,
                    reference: r.extras.get("reference").copied(),
                    horizon: r.horizon,
                    converged: r.converged,
                    argmax_state: &r.argmax_state.label,
                    evaluations: r.evaluations,
                    seed: r.seed,
                    config_hash: &r.config_hash,
                    version: &r.version,
                    wall_time_s: r.wall_time_s,
                    flag: r.flag.as_deref().unwrap_or(""),
                })
                .collect();
            csv_rows(&rows)?
        }
    };
    write_output(common, bytes)
}

fn emit<T: Serialize>(common: &Common, rows: &[T]) -> Result<()> {
    let bytes = match common.format {
        Format::Json => json(rows)?,
        Format::Csv => csv_rows(rows)?,
    };
    write_output(common, bytes)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Measure(common) => {
            let cfg = load(&common)?;
            emit_records(&common, vec![runner::run_measure(&cfg)?])
        }
        Command::Table { common, which } => {
            let cfg = load(&common)?;
            emit_records(&common, runner::run_table(&cfg, which)?)
        }
        Command::SweepInitial { common, from, to, step } => {
            let cfg = load(&common)?;
            if !(step > 0.0) || !(to >= from) {
                return Err(Error::config("sweep", "need step > 0 and to >= from"));
            }
            let count = ((to - from) / step + 1e-9).floor() as usize;
            let values: Vec<f64> = (0..=count).map(|i| from + i as f64 * step).collect();
            emit(&common, &runner::run_sweep_initial(&cfg, &values)?)
        }
        Command::SweepBath { common, param, values } => {
            let cfg = load(&common)?;
            emit(&common, &runner::run_sweep_bath(&cfg, &param, &values)?)
        }
        Command::Scale { common, max_qubits } => {
            let cfg = load(&common)?;
            emit(&common, &runner::run_scaling(&cfg, max_qubits)?)
        }
        Command::Trajectory { common, observable, rho11, pair } => {
            let cfg = load(&common)?;
            let obs = Observable::parse(&observable)?;
            emit(&common, &runner::run_trajectory(&cfg, obs, rho11, pair.as_deref())?)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
