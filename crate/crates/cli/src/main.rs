//! `aefie-mor` command-line driver.

mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use aefie_mor::analysis::{self, ComparisonConfig};
use aefie_mor::fom;
use aefie_mor::io;
use aefie_mor::mor::{self, GreedyConfig, Strategy};
use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use log::{info, warn};

use crate::config::{parse_config, ExperimentConfig};

/// Environment variable holding the worker thread count.
const THREADS_ENV: &str = "AEFIE_THREADS";

#[derive(Parser)]
#[command(
    name = "aefie-mor",
    version,
    about = "Thin-wire dipole A-EFIE solver with reduced-basis frequency sweeps"
)]
#[command(
    after_help = "Environment:\n  AEFIE_THREADS  worker threads for sweeps and assembly (default: all cores)\n  RUST_LOG       log filter, e.g. debug (default: info)"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Direct full-order solve at every grid frequency.
    FomSweep(Common),
    /// Greedy reduced-basis build and ROM sweep, without the full-order sweep.
    Rom {
        #[command(flatten)]
        common: Common,
        /// Run only this strategy instead of the configured ones.
        #[arg(long, value_enum)]
        strategy: Option<StrategyArg>,
    },
    /// Full-order sweep plus both ROMs, with error metrics.
    Compare(Common),
    /// Write R, L, P and S in Matrix Market format.
    ExportMatrices(Common),
}

#[derive(Args)]
struct Common {
    /// TOML configuration file; defaults apply when omitted.
    config: Option<PathBuf>,
    /// Overrides `output.directory`.
    #[arg(long)]
    output_dir: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum StrategyArg {
    Monolithic,
    Block,
}

impl From<StrategyArg> for Strategy {
    fn from(s: StrategyArg) -> Self {
        match s {
            StrategyArg::Monolithic => Strategy::Monolithic,
            StrategyArg::Block => Strategy::Block,
        }
    }
}

enum Failure {
    Usage(String),
    Runtime(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Runtime(e)
    }
}

impl From<aefie_mor::Error> for Failure {
    fn from(e: aefie_mor::Error) -> Self {
        Failure::Runtime(e.into())
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .target(env_logger::Target::Stderr)
        .init();

    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };

    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn configure_threads() -> Result<(), Failure> {
    let Ok(value) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| {
            Failure::Usage(format!(
                "{THREADS_ENV} must be a positive integer, got {value:?}"
            ))
        })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Failure::Runtime(e.into()))
}

fn load(common: &Common) -> Result<(ExperimentConfig, PathBuf), Failure> {
    let config = match &common.config {
        Some(path) => parse_config(path).map_err(|e| Failure::Usage(e.to_string()))?,
        None => ExperimentConfig::default(),
    };
    let out = common
        .output_dir
        .clone()
        .unwrap_or_else(|| config.output.directory.clone());
    Ok((config, out))
}

fn run(cli: Cli) -> Result<(), Failure> {
    configure_threads()?;
    // Parallelism stays across frequencies; sequential dense kernels keep the
    // output independent of the thread count.
    faer::set_global_parallelism(faer::Par::Seq);
    match cli.command {
        Command::FomSweep(common) => {
            let (config, out) = load(&common)?;
            fom_sweep(&config, &out)
        }
        Command::Rom { common, strategy } => {
            let (config, out) = load(&common)?;
            let strategies = match strategy {
                Some(s) => vec![s.into()],
                None => config.strategies(),
            };
            rom(&config, &strategies, &out)
        }
        Command::Compare(common) => {
            let (config, out) = load(&common)?;
            compare(&config, &out)
        }
        Command::ExportMatrices(common) => {
            let (config, out) = load(&common)?;
            let model = config.model()?;
            let matrices = fom::assemble(&model)?;
            export_matrices(&matrices, &out)
        }
    }
}

fn short_name(strategy: Strategy) -> &'static str {
    match strategy {
        Strategy::Monolithic => "mono",
        Strategy::Block => "block",
    }
}

fn write_table(table: &io::CsvTable, dir: &Path, name: &str) -> Result<(), Failure> {
    let path = dir.join(name);
    table
        .write(&path)
        .with_context(|| format!("writing {}", path.display()))?;
    info!("wrote {}", path.display());
    Ok(())
}

fn write_text(text: &str, dir: &Path, name: &str) -> Result<(), Failure> {
    let path = dir.join(name);
    io::write_atomic(&path, text.as_bytes())
        .with_context(|| format!("writing {}", path.display()))?;
    info!("wrote {}", path.display());
    Ok(())
}

fn export_matrices(matrices: &fom::FomMatrices, out: &Path) -> Result<(), Failure> {
    write_text(&io::matrix_market_diagonal(matrices.r()), out, "R.mtx")?;
    write_text(&io::matrix_market_real(matrices.l()), out, "L.mtx")?;
    write_text(&io::matrix_market_real(matrices.p()), out, "P.mtx")?;
    write_text(&io::matrix_market_incidence(matrices.s()), out, "S.mtx")?;
    Ok(())
}

fn assemble(
    config: &ExperimentConfig,
    out: &Path,
) -> Result<(aefie_mor::geometry::WireModel, fom::FomMatrices), Failure> {
    let model = config.model()?;
    if !model.is_thin_wire() {
        warn!(
            "radius {:.3e} m is not below 0.1 x segment length {:.3e} m",
            model.radius,
            model.min_segment_length()
        );
    }
    let matrices = fom::assemble(&model)?;
    if config.output.export_matrices {
        export_matrices(&matrices, out)?;
    }
    Ok((model, matrices))
}

fn fom_sweep(config: &ExperimentConfig, out: &Path) -> Result<(), Failure> {
    let grid = config.grid()?;
    let (model, matrices) = assemble(config, out)?;
    let sweep = analysis::fom_sweep(
        &matrices,
        &grid,
        model.feed_segment,
        aefie_mor::DEFAULT_V_GAP,
        config.mor.residual.into(),
    )?;
    write_table(&io::sweep_table(&sweep, "fom"), out, "impedance.csv")
}

fn rom(config: &ExperimentConfig, strategies: &[Strategy], out: &Path) -> Result<(), Failure> {
    let grid = config.grid()?;
    let (model, matrices) = assemble(config, out)?;
    let v_gap = aefie_mor::DEFAULT_V_GAP;
    for &strategy in strategies {
        let mut gc = GreedyConfig::new(strategy, config.mor.tolerance);
        gc.max_snapshots = config.mor.max_snapshots;
        gc.residual_norm = config.mor.residual.into();
        let (basis, trace) = mor::greedy_build(&matrices, &grid, &gc, model.feed_segment, v_gap)?;
        if !trace.converged() {
            warn!(
                "{strategy} greedy did not reach tolerance {:.1e} ({:?}); writing partial results",
                config.mor.tolerance, trace.status
            );
        }
        let sweep = analysis::rom_sweep(
            &matrices,
            &basis,
            &trace,
            &grid,
            model.feed_segment,
            v_gap,
            gc.residual_norm,
        )?;
        let name = short_name(strategy);
        write_table(
            &io::trace_table(&trace),
            out,
            &format!("greedy_trace_{name}.csv"),
        )?;
        write_table(
            &io::sweep_table(&sweep, name),
            out,
            &format!("rom_impedance_{name}.csv"),
        )?;
        println!(
            "{strategy}: converged={} snapshots={} reduced_size={}",
            yes_no(trace.converged()),
            trace.snapshots(),
            basis.size_total()
        );
    }
    Ok(())
}

fn yes_no(b: bool) -> &'static str {
    if b {
        "yes"
    } else {
        "no"
    }
}

fn compare(config: &ExperimentConfig, out: &Path) -> Result<(), Failure> {
    let grid = config.grid()?;
    let (model, matrices) = assemble(config, out)?;
    let cc = ComparisonConfig {
        tolerance: config.mor.tolerance,
        max_snapshots: config.mor.max_snapshots,
        strategies: config.strategies(),
        v_gap: aefie_mor::DEFAULT_V_GAP,
        residual_norm: config.mor.residual.into(),
    };
    let cmp = analysis::compare_with(matrices, model.feed_segment, &grid, &cc)?;

    write_table(&io::impedance_table(&cmp), out, "impedance.csv")?;
    write_table(&io::err_z_table(&cmp), out, "err_z.csv")?;
    write_table(&io::err_d_table(&cmp), out, "err_d.csv")?;
    for run in &cmp.roms {
        write_table(
            &io::trace_table(&run.trace),
            out,
            &format!("greedy_trace_{}.csv", short_name(run.strategy)),
        )?;
    }
    for run in &cmp.roms {
        println!(
            "{}: converged={} snapshots={} max_err_z={:.3e}",
            run.strategy,
            yes_no(run.trace.converged()),
            run.trace.snapshots(),
            run.metrics.max_err_z()
        );
    }
    Ok(())
}
