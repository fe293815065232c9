//! `stomax` command line: drives the solver studies from TOML configs and
//! writes CSV series, SVG charts, and a run manifest under one output
//! directory.
//!
//! Exit codes: 0 success; 1 invalid configuration content or a runtime
//! failure; 2 usage errors (bad flags, unreadable config file).

mod chart;
mod config;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context, Result};
use clap::{Args, Parser, Subcommand};

use chart::Series;
use config::ResolvedConfig;
use stomax::experiments::{manifest, run_plan, ExperimentResult, FdmComparison};
use stomax::noise::sample_increments;
use stomax::wavelet::connection_coefficients;

#[derive(Parser)]
#[command(
    name = "stomax",
    version,
    about = "Structure-preserving solvers for stochastic Maxwell systems"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Single-trajectory energy or long-time study (kinds: energy, long-time).
    Run(RunArgs),
    /// Trajectory ensemble: energy band, mean series, max-energy density.
    Ensemble(RunArgs),
    /// Temporal convergence tables (kinds: det-converge, strong-converge).
    Converge(RunArgs),
    /// Wavelet midpoint vs finite-difference baseline on shared noise paths.
    CompareFdm(RunArgs),
    /// Write the connection-coefficient table for one wavelet order.
    BasisDump(BasisDumpArgs),
}

#[derive(Args)]
struct RunArgs {
    /// TOML configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Override the global seed from the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for trajectory parallelism (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Output directory; every file the run writes lives under it.
    #[arg(long, default_value = "stomax-out")]
    out: PathBuf,
    /// Restore publication scale: 32^3 grid and 100 trajectories.
    #[arg(long)]
    paper_scale: bool,
}

#[derive(Args)]
struct BasisDumpArgs {
    /// Even wavelet order (>= 4).
    #[arg(long)]
    gamma: usize,
    /// Output directory.
    #[arg(long, default_value = "stomax-out")]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run(args) => drive("run", args),
        Command::Ensemble(args) => drive("ensemble", args),
        Command::Converge(args) => drive("converge", args),
        Command::CompareFdm(args) => drive("compare-fdm", args),
        Command::BasisDump(args) => basis_dump(args).map_err(RunError::Failed),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(RunError::Usage(message)) => {
            eprintln!("stomax: {message}");
            ExitCode::from(2)
        }
        Err(RunError::Failed(err)) => {
            eprintln!("stomax: {err:#}");
            ExitCode::from(1)
        }
    }
}

enum RunError {
    /// Bad invocation (unreadable config path): exit 2.
    Usage(String),
    /// Validation or runtime failure: exit 1.
    Failed(anyhow::Error),
}

fn drive(subcommand: &'static str, args: RunArgs) -> Result<(), RunError> {
    if let Some(threads) = args.threads {
        // A second pool build (e.g. in tests) is fine to ignore.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global();
    }
    let text = fs::read_to_string(&args.config).map_err(|e| {
        RunError::Usage(format!("cannot read config {}: {e}", args.config.display()))
    })?;
    let mut resolved = config::parse_config(&text).map_err(RunError::Failed)?;
    config::check_kind(subcommand, resolved.plan.kind).map_err(RunError::Failed)?;
    if let Some(seed) = args.seed {
        resolved.plan.base_seed = seed;
    }
    if args.paper_scale {
        resolved.plan.grid_level = 5;
        resolved.plan.trajectories = 100;
        resolved
            .plan
            .validate()
            .map_err(|e| RunError::Failed(anyhow!("--paper-scale: {e}")))?;
    }
    execute(&resolved, &args.out).map_err(RunError::Failed)
}

fn execute(resolved: &ResolvedConfig, out: &Path) -> Result<()> {
    let plan = &resolved.plan;
    let log = resolved.log_level;
    let debug = |name: &str| {
        if log == config::LogLevel::Debug {
            println!("wrote {}", out.join(name).display());
        }
    };
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    // The manifest lands first so failed runs still document themselves.
    write_text(out, "manifest.toml", &manifest(plan, env!("CARGO_PKG_VERSION")))?;
    write_text(out, "config_echo.toml", &config::emit(resolved))?;
    debug("manifest.toml");
    debug("config_echo.toml");

    let result = run_plan(plan)?;
    for (name, contents) in result.csv_files() {
        write_text(out, &name, &contents)?;
        debug(&name);
    }
    write_charts(&result, out)?;

    if let ExperimentResult::Energy(study) = &result {
        if resolved.write_snapshot {
            for (lambda, state) in study.lambdas.iter().zip(&study.finals) {
                let name = format!("final_state_lambda_{}.bin", fmt_label(*lambda));
                let mut bytes = Vec::new();
                state.write_snapshot(&mut bytes)?;
                fs::write(out.join(&name), bytes)
                    .with_context(|| format!("writing {name}"))?;
                debug(&name);
            }
        }
        if resolved.dump_noise {
            write_text(out, "noise_path.csv", &noise_dump(plan)?)?;
            debug("noise_path.csv");
        }
    }
    if log != config::LogLevel::Quiet {
        println!("wrote {}", out.display());
    }
    Ok(())
}

fn fmt_label(lambda: f64) -> String {
    format!("{lambda}").replace('.', "p").replace('-', "m")
}

fn write_text(dir: &Path, name: &str, contents: &str) -> Result<()> {
    let path = dir.join(name);
    fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))
}

/// Re-sample the trajectory-0 increments (pure in the keys) as
/// `step,i,value` rows for coupling audits.
fn noise_dump(plan: &stomax::experiments::ExperimentPlan) -> Result<String> {
    let spec = stomax::noise::NoiseSpec::new(plan.lambda, plan.noise_modes, plan.base_seed)?;
    let grid = plan.grid();
    let steps = plan.steps()?;
    let mut out = String::from("step,i,value\n");
    for n in 0..steps {
        let inc = sample_increments(&spec, 0, n, plan.dt, &grid)?;
        for (i, v) in inc.values().iter().enumerate() {
            out.push_str(&format!("{n},{i},{v}\n"));
        }
    }
    Ok(out)
}

fn write_charts(result: &ExperimentResult, out: &Path) -> Result<()> {
    match result {
        ExperimentResult::Energy(study) => {
            let energy_pts: Vec<Vec<(f64, f64)>> = study
                .series
                .iter()
                .map(|s| s.iter().map(|r| (r.time, r.energy)).collect())
                .collect();
            let residual_pts: Vec<Vec<(f64, f64)>> = study
                .series
                .iter()
                .map(|s| s.iter().map(|r| (r.time, r.err)).collect())
                .collect();
            let label = |l: &f64| format!("lambda = {l}");
            let energy_series: Vec<Series> = study
                .lambdas
                .iter()
                .zip(&energy_pts)
                .map(|(l, pts)| Series {
                    label: label(l),
                    points: pts,
                })
                .collect();
            write_text(
                out,
                "energy.svg",
                &chart::line_chart("Discrete energy along one trajectory", "t", "energy", &energy_series)?,
            )?;
            let residual_series: Vec<Series> = study
                .lambdas
                .iter()
                .zip(&residual_pts)
                .map(|(l, pts)| Series {
                    label: label(l),
                    points: pts,
                })
                .collect();
            write_text(
                out,
                "residual.svg",
                &chart::line_chart(
                    "Energy residual against the initial energy",
                    "t",
                    "energy - energy(0)",
                    &residual_series,
                )?,
            )?;
        }
        ExperimentResult::Ensemble(study) => {
            let stats = &study.summary.stats;
            let mean: Vec<(f64, f64)> = stats.times.iter().zip(&stats.mean).map(|(t, v)| (*t, *v)).collect();
            let min: Vec<(f64, f64)> = stats.times.iter().zip(&stats.min).map(|(t, v)| (*t, *v)).collect();
            let max: Vec<(f64, f64)> = stats.times.iter().zip(&stats.max).map(|(t, v)| (*t, *v)).collect();
            write_text(
                out,
                "ensemble_energy.svg",
                &chart::line_chart(
                    "Energy across the ensemble",
                    "t",
                    "energy",
                    &[
                        Series { label: "mean".into(), points: &mean },
                        Series { label: "min".into(), points: &min },
                        Series { label: "max".into(), points: &max },
                    ],
                )?,
            )?;
            let hist = &study.summary.histogram;
            write_text(
                out,
                "max_energy_histogram.svg",
                &chart::histogram_chart(
                    "Density of the per-trajectory maximum energy",
                    "max energy",
                    "density",
                    &hist.centers,
                    &hist.densities,
                    hist.bin_width,
                )?,
            )?;
        }
        ExperimentResult::DetOrders(table) => {
            let pts: Vec<(f64, f64)> = table
                .dts
                .iter()
                .zip(&table.errors)
                .map(|(d, e)| (d.log2(), e.log2()))
                .collect();
            write_text(
                out,
                "convergence.svg",
                &chart::line_chart(
                    &format!("Temporal error, slope {:.2}", table.fitted_slope),
                    "log2 dt",
                    "log2 error",
                    &[Series { label: "error".into(), points: &pts }],
                )?,
            )?;
        }
        ExperimentResult::StrongOrders(study) => {
            let pts: Vec<Vec<(f64, f64)>> = study
                .tables
                .iter()
                .map(|t| {
                    t.dts
                        .iter()
                        .zip(&t.errors)
                        .map(|(d, e)| (d.log2(), e.log2()))
                        .collect()
                })
                .collect();
            let series: Vec<Series> = study
                .modes
                .iter()
                .zip(&pts)
                .zip(&study.tables)
                .map(|((m, p), t)| Series {
                    label: format!("modes = {m} (slope {:.2})", t.fitted_slope),
                    points: p,
                })
                .collect();
            write_text(
                out,
                "strong_convergence.svg",
                &chart::line_chart(
                    "Mean-square temporal error, coupled paths",
                    "log2 dt",
                    "log2 error",
                    &series,
                )?,
            )?;
        }
        ExperimentResult::FdmCompare(cmp) => {
            // The two residual series differ by many orders of magnitude, so
            // chart log10 of the normalized magnitude.
            let to_log = |errs: &[f64]| -> Vec<(f64, f64)> {
                cmp.times
                    .iter()
                    .zip(errs)
                    .map(|(t, e)| {
                        (
                            *t,
                            FdmComparison::normalized(*e).abs().max(1e-12).log10(),
                        )
                    })
                    .collect()
            };
            let wavelet = to_log(&cmp.wavelet_mean_err);
            let fdm = to_log(&cmp.fdm_mean_err);
            write_text(
                out,
                "comparison.svg",
                &chart::line_chart(
                    "Mean normalized energy drift (log10 magnitude)",
                    "t",
                    "log10 |(energy - energy0) x 1e7|",
                    &[
                        Series { label: "wavelet midpoint".into(), points: &wavelet },
                        Series { label: "fdm baseline".into(), points: &fdm },
                    ],
                )?,
            )?;
        }
    }
    Ok(())
}

fn basis_dump(args: BasisDumpArgs) -> Result<()> {
    let coeffs = connection_coefficients(args.gamma)
        .map_err(|e| anyhow!("basis construction failed: {e}"))?;
    fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    let mut csv = String::from("k,theta_prime\n");
    for (k, v) in coeffs.entries() {
        csv.push_str(&format!("{k},{v}\n"));
    }
    let name = format!("theta_prime_gamma{}.csv", args.gamma);
    write_text(&args.out, &name, &csv)?;
    println!("wrote {}", args.out.join(name).display());
    Ok(())
}
