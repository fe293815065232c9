//! Configuration parsing: a TOML document with one section of keys, strict
//! about unknown fields, with per-experiment defaults filled in and echoed.

use anyhow::{anyhow, bail, Result};
use serde::{Deserialize, Serialize};
use stomax::experiments::{ExperimentKind, ExperimentPlan};

/// Raw on-disk schema. Every key except `experiment` is optional; defaults
/// depend on the experiment kind (see the README table).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub experiment: String,
    pub seed: Option<u64>,
    pub grid_level: Option<u32>,
    pub gamma: Option<usize>,
    pub lambda: Option<f64>,
    pub lambda_list: Option<Vec<f64>>,
    pub dt: Option<f64>,
    pub t_final: Option<f64>,
    pub trajectories: Option<usize>,
    pub noise_modes: Option<usize>,
    pub modes_list: Option<Vec<usize>>,
    pub dt_list: Option<Vec<f64>>,
    pub dt_reference: Option<f64>,
    pub fp_tol: Option<f64>,
    pub fp_max_iters: Option<usize>,
    pub histogram_bins: Option<usize>,
    pub fdm_order: Option<usize>,
    pub write_snapshot: Option<bool>,
    pub dump_noise: Option<bool>,
    pub log_level: Option<String>,
}

/// Console verbosity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LogLevel {
    Quiet,
    Info,
    Debug,
}

impl LogLevel {
    fn parse(name: &str) -> Option<Self> {
        Some(match name {
            "quiet" => LogLevel::Quiet,
            "info" => LogLevel::Info,
            "debug" => LogLevel::Debug,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            LogLevel::Quiet => "quiet",
            LogLevel::Info => "info",
            LogLevel::Debug => "debug",
        }
    }
}

/// Fully-resolved configuration: a validated plan plus output switches.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedConfig {
    pub plan: ExperimentPlan,
    pub write_snapshot: bool,
    pub dump_noise: bool,
    pub log_level: LogLevel,
}

const SQRT2: f64 = std::f64::consts::SQRT_2;

struct KindDefaults {
    dt: f64,
    t_final: f64,
    lambda: f64,
    lambda_list: Vec<f64>,
    trajectories: usize,
    dt_list: Vec<f64>,
    modes_list: Vec<usize>,
}

fn defaults_for(kind: ExperimentKind) -> KindDefaults {
    let dyadic = |k: i32| 2f64.powi(k);
    let converge_dts = vec![dyadic(-6), dyadic(-7), dyadic(-8), dyadic(-9), dyadic(-10)];
    match kind {
        ExperimentKind::Energy => KindDefaults {
            dt: 0.005,
            t_final: 20.0,
            lambda: 0.5,
            lambda_list: vec![0.0, 0.5, 1.0, 5.0],
            trajectories: 1,
            dt_list: vec![],
            modes_list: vec![],
        },
        ExperimentKind::LongTime => KindDefaults {
            dt: 0.005,
            t_final: 200.0,
            lambda: 1.0,
            lambda_list: vec![1.0],
            trajectories: 1,
            dt_list: vec![],
            modes_list: vec![],
        },
        ExperimentKind::Ensemble => KindDefaults {
            dt: 0.005,
            t_final: 5.0,
            lambda: 0.5,
            lambda_list: vec![0.5],
            trajectories: 20,
            dt_list: vec![],
            modes_list: vec![],
        },
        ExperimentKind::CompareFdm => KindDefaults {
            dt: 1.0 / 64.0,
            t_final: 10.0,
            lambda: SQRT2,
            lambda_list: vec![SQRT2],
            trajectories: 20,
            dt_list: vec![],
            modes_list: vec![],
        },
        ExperimentKind::DetConverge => KindDefaults {
            dt: dyadic(-11),
            t_final: 1.0,
            lambda: 0.0,
            lambda_list: vec![0.0],
            trajectories: 1,
            dt_list: converge_dts,
            modes_list: vec![],
        },
        ExperimentKind::StrongConverge => KindDefaults {
            dt: dyadic(-11),
            t_final: 1.0,
            lambda: SQRT2,
            lambda_list: vec![SQRT2],
            trajectories: 20,
            dt_list: vec![dyadic(-6), dyadic(-7), dyadic(-8), dyadic(-9)],
            modes_list: vec![1, 4],
        },
    }
}

/// Parse and validate a config document, filling kind-specific defaults.
pub fn parse_config(text: &str) -> Result<ResolvedConfig> {
    let raw: RunConfig = toml::from_str(text).map_err(|e| anyhow!("config parse error: {e}"))?;
    resolve(raw)
}

pub fn resolve(raw: RunConfig) -> Result<ResolvedConfig> {
    let kind = ExperimentKind::parse(&raw.experiment).ok_or_else(|| {
        anyhow!(
            "experiment: unknown kind {:?} (expected energy | long-time | ensemble | \
             compare-fdm | det-converge | strong-converge)",
            raw.experiment
        )
    })?;
    let d = defaults_for(kind);
    let plan = ExperimentPlan {
        kind,
        grid_level: raw.grid_level.unwrap_or(4),
        gamma: raw.gamma.unwrap_or(10),
        lambda: raw.lambda.unwrap_or(d.lambda),
        lambda_list: raw
            .lambda_list
            .or_else(|| raw.lambda.map(|l| vec![l]))
            .unwrap_or(d.lambda_list),
        dt: raw.dt.unwrap_or(d.dt),
        t_final: raw.t_final.unwrap_or(d.t_final),
        trajectories: raw.trajectories.unwrap_or(d.trajectories),
        noise_modes: raw.noise_modes.unwrap_or(200),
        modes_list: raw.modes_list.unwrap_or(d.modes_list),
        dt_list: raw.dt_list.unwrap_or(d.dt_list),
        dt_reference: raw.dt_reference.unwrap_or(2f64.powi(-11)),
        base_seed: raw.seed.unwrap_or(42),
        fp_tol: raw.fp_tol.unwrap_or(1e-12),
        fp_max_iters: raw.fp_max_iters.unwrap_or(200),
        histogram_bins: raw.histogram_bins.unwrap_or(30),
        fdm_order: raw.fdm_order.unwrap_or(2),
    };
    plan.validate()
        .map_err(|e| anyhow!("config validation error: {e}"))?;
    let log_level = match &raw.log_level {
        None => LogLevel::Info,
        Some(name) => LogLevel::parse(name).ok_or_else(|| {
            anyhow!("log_level: unknown value {name:?} (expected quiet | info | debug)")
        })?,
    };
    Ok(ResolvedConfig {
        plan,
        write_snapshot: raw.write_snapshot.unwrap_or(false),
        dump_noise: raw.dump_noise.unwrap_or(false),
        log_level,
    })
}

/// Render a resolved config back to TOML with every field explicit.
/// `parse_config(emit(c))` reproduces `c` exactly.
pub fn emit(config: &ResolvedConfig) -> String {
    let plan = &config.plan;
    let raw = RunConfig {
        experiment: plan.kind.name().to_string(),
        seed: Some(plan.base_seed),
        grid_level: Some(plan.grid_level),
        gamma: Some(plan.gamma),
        lambda: Some(plan.lambda),
        lambda_list: Some(plan.lambda_list.clone()),
        dt: Some(plan.dt),
        t_final: Some(plan.t_final),
        trajectories: Some(plan.trajectories),
        noise_modes: Some(plan.noise_modes),
        modes_list: Some(plan.modes_list.clone()),
        dt_list: Some(plan.dt_list.clone()),
        dt_reference: Some(plan.dt_reference),
        fp_tol: Some(plan.fp_tol),
        fp_max_iters: Some(plan.fp_max_iters),
        histogram_bins: Some(plan.histogram_bins),
        fdm_order: Some(plan.fdm_order),
        write_snapshot: Some(config.write_snapshot),
        dump_noise: Some(config.dump_noise),
        log_level: Some(config.log_level.name().to_string()),
    };
    toml::to_string(&raw).expect("config serializes")
}

/// Which experiment kinds each CLI subcommand accepts.
pub fn kind_allowed(subcommand: &str, kind: ExperimentKind) -> bool {
    matches!(
        (subcommand, kind),
        ("run", ExperimentKind::Energy)
            | ("run", ExperimentKind::LongTime)
            | ("ensemble", ExperimentKind::Ensemble)
            | ("converge", ExperimentKind::DetConverge)
            | ("converge", ExperimentKind::StrongConverge)
            | ("compare-fdm", ExperimentKind::CompareFdm)
    )
}

/// Error out unless the config kind matches the subcommand.
pub fn check_kind(subcommand: &str, kind: ExperimentKind) -> Result<()> {
    if kind_allowed(subcommand, kind) {
        Ok(())
    } else {
        bail!(
            "experiment kind \"{}\" cannot be driven by `stomax {subcommand}`",
            kind.name()
        );
    }
}
