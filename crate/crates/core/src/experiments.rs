//! Scripted studies: energy conservation runs, long-time stability,
//! trajectory ensembles, the finite-difference comparison, and the
//! deterministic/strong temporal-convergence tables.
//!
//! Every study is a pure function of its plan: trajectory and step streams
//! are keyed from the plan seed, trajectories are merged in id order, and
//! all reductions are deterministic, so re-running a plan reproduces its
//! rendered output byte for byte regardless of the worker-pool size.

use rayon::prelude::*;

use crate::diagnostics::{
    ensemble_stats, ensemble_csv, histogram_csv, trajectory_csv, DiagnosticsRecord,
    EnsembleSummary,
};
use crate::error::{CoreError, Result};
use crate::grid::{grid_inner_product, Axis, FieldState, GridSpec, Lattice};
use crate::integrator::{
    evolve, KeyedQWiener, NoNoise, PrecomputedPath, Scheme, SpatialOps, StepperConfig,
};
use crate::noise::{aggregate_increments, sample_increments, NoiseSpec, WienerIncrements};

/// Which study to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    /// Single-trajectory energy/residual series for several noise sizes.
    Energy,
    /// Same as `Energy` with a long horizon.
    LongTime,
    /// Many trajectories: energy band, averaged energy, max-energy density.
    Ensemble,
    /// Wavelet midpoint vs explicit finite differences on shared paths.
    CompareFdm,
    /// Temporal order against a fine reference, no noise.
    DetConverge,
    /// Mean-square temporal order with coupled Brownian paths.
    StrongConverge,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Energy => "energy",
            ExperimentKind::LongTime => "long-time",
            ExperimentKind::Ensemble => "ensemble",
            ExperimentKind::CompareFdm => "compare-fdm",
            ExperimentKind::DetConverge => "det-converge",
            ExperimentKind::StrongConverge => "strong-converge",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        Some(match name {
            "energy" => ExperimentKind::Energy,
            "long-time" => ExperimentKind::LongTime,
            "ensemble" => ExperimentKind::Ensemble,
            "compare-fdm" => ExperimentKind::CompareFdm,
            "det-converge" => ExperimentKind::DetConverge,
            "strong-converge" => ExperimentKind::StrongConverge,
            _ => return None,
        })
    }
}

/// Fully-resolved parameters for one study on the unit cube.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentPlan {
    pub kind: ExperimentKind,
    /// Per-axis refinement: `2^grid_level` points per axis.
    pub grid_level: u32,
    pub gamma: usize,
    /// Noise size for single-lambda studies.
    pub lambda: f64,
    /// Noise sizes for the energy studies (run one trajectory per entry).
    pub lambda_list: Vec<f64>,
    pub dt: f64,
    pub t_final: f64,
    pub trajectories: usize,
    pub noise_modes: usize,
    /// Mode truncations for the strong-convergence table.
    pub modes_list: Vec<usize>,
    /// Coarse steps for the convergence tables.
    pub dt_list: Vec<f64>,
    /// Reference step for the convergence tables.
    pub dt_reference: f64,
    pub base_seed: u64,
    pub fp_tol: f64,
    pub fp_max_iters: usize,
    pub histogram_bins: usize,
    pub fdm_order: usize,
}

fn integer_ratio(value: f64, base: f64) -> Option<u64> {
    if base <= 0.0 || value <= 0.0 {
        return None;
    }
    let ratio = value / base;
    let rounded = ratio.round();
    if rounded >= 1.0 && (ratio - rounded).abs() <= 1e-9 * ratio.max(1.0) {
        Some(rounded as u64)
    } else {
        None
    }
}

impl ExperimentPlan {
    pub fn grid(&self) -> GridSpec {
        GridSpec::unit_cube(self.grid_level)
    }

    pub fn steps(&self) -> Result<u64> {
        integer_ratio(self.t_final, self.dt).ok_or_else(|| {
            CoreError::InvalidPlan(format!(
                "t_final {} must be an integer multiple of dt {}",
                self.t_final, self.dt
            ))
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.gamma < 4 || !self.gamma.is_multiple_of(2) {
            return Err(CoreError::InvalidPlan(format!(
                "gamma must be even and >= 4, got {}",
                self.gamma
            )));
        }
        let points = 1usize << self.grid_level;
        if points < self.gamma {
            return Err(CoreError::InvalidPlan(format!(
                "grid_level {} gives {points} points per axis, fewer than gamma {}",
                self.grid_level, self.gamma
            )));
        }
        if self.dt <= 0.0 || self.dt.is_nan() {
            return Err(CoreError::InvalidPlan(format!(
                "dt must be positive, got {}",
                self.dt
            )));
        }
        if self.t_final <= 0.0 || self.t_final.is_nan() {
            return Err(CoreError::InvalidPlan(format!(
                "t_final must be positive, got {}",
                self.t_final
            )));
        }
        self.steps()?;
        if self.lambda < 0.0 || self.lambda.is_nan() {
            return Err(CoreError::InvalidPlan(format!(
                "lambda must be >= 0, got {}",
                self.lambda
            )));
        }
        if self.noise_modes == 0 {
            return Err(CoreError::InvalidPlan("noise_modes must be positive".into()));
        }
        if self.trajectories == 0 {
            return Err(CoreError::InvalidPlan("trajectories must be positive".into()));
        }
        if self.fp_tol <= 0.0 || self.fp_tol.is_nan() || self.fp_max_iters == 0 {
            return Err(CoreError::InvalidPlan(
                "fp_tol must be positive and fp_max_iters nonzero".into(),
            ));
        }
        if self.histogram_bins == 0 {
            return Err(CoreError::InvalidPlan("histogram_bins must be positive".into()));
        }
        if self.fdm_order == 0 || !self.fdm_order.is_multiple_of(2) {
            return Err(CoreError::InvalidPlan(format!(
                "fdm_order must be even and positive, got {}",
                self.fdm_order
            )));
        }
        match self.kind {
            ExperimentKind::Energy | ExperimentKind::LongTime => {
                if self.lambda_list.is_empty() {
                    return Err(CoreError::InvalidPlan("lambda_list must not be empty".into()));
                }
                for l in &self.lambda_list {
                    if *l < 0.0 || l.is_nan() {
                        return Err(CoreError::InvalidPlan(format!(
                            "lambda_list entries must be >= 0, got {l}"
                        )));
                    }
                }
            }
            ExperimentKind::DetConverge | ExperimentKind::StrongConverge => {
                if self.dt_list.is_empty() {
                    return Err(CoreError::InvalidPlan("dt_list must not be empty".into()));
                }
                for dt in &self.dt_list {
                    if integer_ratio(self.t_final, *dt).is_none() {
                        return Err(CoreError::InvalidPlan(format!(
                            "t_final {} must be an integer multiple of dt_list entry {dt}",
                            self.t_final
                        )));
                    }
                    let ratio = integer_ratio(*dt, self.dt_reference);
                    if ratio.is_none() {
                        return Err(CoreError::InvalidPlan(format!(
                            "dt_list entry {dt} must be an integer multiple of dt_reference {}",
                            self.dt_reference
                        )));
                    }
                    if *dt <= self.dt_reference {
                        return Err(CoreError::InvalidPlan(format!(
                            "dt_reference {} must be finer than every dt_list entry (got {dt})",
                            self.dt_reference
                        )));
                    }
                }
                if integer_ratio(self.t_final, self.dt_reference).is_none() {
                    return Err(CoreError::InvalidPlan(format!(
                        "t_final {} must be an integer multiple of dt_reference {}",
                        self.t_final, self.dt_reference
                    )));
                }
                if self.kind == ExperimentKind::DetConverge && self.lambda != 0.0 {
                    return Err(CoreError::InvalidPlan(
                        "det-converge requires lambda = 0".into(),
                    ));
                }
                if self.kind == ExperimentKind::StrongConverge {
                    if self.lambda <= 0.0 {
                        return Err(CoreError::InvalidPlan(
                            "strong-converge requires lambda > 0".into(),
                        ));
                    }
                    if self.trajectories < 2 {
                        return Err(CoreError::InvalidPlan(
                            "strong-converge requires at least 2 trajectories".into(),
                        ));
                    }
                    if self.modes_list.is_empty() {
                        return Err(CoreError::InvalidPlan("modes_list must not be empty".into()));
                    }
                }
            }
            _ => {}
        }
        Ok(())
    }

    fn wavelet_config(&self, dt: f64) -> StepperConfig {
        StepperConfig {
            dt,
            scheme: Scheme::WaveletMidpoint,
            fp_tol: self.fp_tol,
            fp_max_iters: self.fp_max_iters,
            gamma: self.gamma,
            fdm_order: self.fdm_order,
        }
    }

    fn fdm_config(&self, dt: f64) -> StepperConfig {
        StepperConfig {
            dt,
            scheme: Scheme::FdmBaseline,
            fp_tol: self.fp_tol,
            fp_max_iters: self.fp_max_iters,
            gamma: self.gamma,
            fdm_order: self.fdm_order,
        }
    }
}

/// The standing-wave initial data used throughout:
/// `E = (1, -2, 1) * cos(2 pi (x+y+z))`, `H = (sqrt 3, 0, -sqrt 3) * cos(...)`.
/// Divergence-free because each coefficient triple sums to zero.
pub fn initial_condition(grid: &GridSpec) -> Result<FieldState> {
    for axis in Axis::ALL {
        if grid.axis(axis).extent != 1 {
            return Err(CoreError::InvalidPlan(format!(
                "initial condition is defined on the unit cube; axis {axis:?} has extent {}",
                grid.axis(axis).extent
            )));
        }
    }
    let base = |x: f64, y: f64, z: f64| (2.0 * std::f64::consts::PI * (x + y + z)).cos();
    let sqrt3 = 3f64.sqrt();
    let mut state = FieldState::zeros(*grid);
    *state.component_mut(0) = Lattice::from_fn(grid, base);
    *state.component_mut(1) = Lattice::from_fn(grid, |x, y, z| -2.0 * base(x, y, z));
    *state.component_mut(2) = Lattice::from_fn(grid, base);
    *state.component_mut(3) = Lattice::from_fn(grid, |x, y, z| sqrt3 * base(x, y, z));
    *state.component_mut(5) = Lattice::from_fn(grid, |x, y, z| -sqrt3 * base(x, y, z));
    Ok(state)
}

/// `||a - b||` in the six-component grid norm.
pub fn state_distance(a: &FieldState, b: &FieldState) -> Result<f64> {
    let diff = a.scaled_add(-1.0, b);
    Ok(grid_inner_product(&diff, &diff)?.sqrt())
}

/// Energy/residual series per noise size.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyStudy {
    pub lambdas: Vec<f64>,
    pub series: Vec<Vec<DiagnosticsRecord>>,
    /// Final state per noise size (snapshot export).
    pub finals: Vec<FieldState>,
}

/// Run one trajectory per configured noise size, all driven by the same
/// keyed Brownian path so the curves differ only through lambda.
pub fn energy_study(plan: &ExperimentPlan) -> Result<EnergyStudy> {
    plan.validate()?;
    let grid = plan.grid();
    let cfg = plan.wavelet_config(plan.dt);
    let ops = SpatialOps::for_config(grid, &cfg)?;
    let u0 = initial_condition(&grid)?;
    let steps = plan.steps()?;
    let runs: Vec<(Vec<DiagnosticsRecord>, FieldState)> = plan
        .lambda_list
        .par_iter()
        .map(|&lambda| -> Result<(Vec<DiagnosticsRecord>, FieldState)> {
            let source = KeyedQWiener {
                spec: NoiseSpec::new(lambda, plan.noise_modes, plan.base_seed)?,
                trajectory: 0,
                dt: plan.dt,
                grid,
            };
            let (state, records) = evolve(&u0, &cfg, &ops, &source, steps, |_, _| {})?;
            Ok((records, state))
        })
        .collect::<Result<Vec<_>>>()?;
    let (series, finals) = runs.into_iter().unzip();
    Ok(EnergyStudy {
        lambdas: plan.lambda_list.clone(),
        series,
        finals,
    })
}

/// Ensemble study output: per-trajectory series plus merged statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleStudy {
    pub records: Vec<Vec<DiagnosticsRecord>>,
    pub summary: EnsembleSummary,
}

pub fn ensemble_study(plan: &ExperimentPlan) -> Result<EnsembleStudy> {
    plan.validate()?;
    let grid = plan.grid();
    let cfg = plan.wavelet_config(plan.dt);
    let ops = SpatialOps::for_config(grid, &cfg)?;
    let u0 = initial_condition(&grid)?;
    let steps = plan.steps()?;
    let records: Vec<Vec<DiagnosticsRecord>> = (0..plan.trajectories as u64)
        .into_par_iter()
        .map(|trajectory| -> Result<Vec<DiagnosticsRecord>> {
            let source = KeyedQWiener {
                spec: NoiseSpec::new(plan.lambda, plan.noise_modes, plan.base_seed)?,
                trajectory,
                dt: plan.dt,
                grid,
            };
            let (_, records) = evolve(&u0, &cfg, &ops, &source, steps, |_, _| {})?;
            Ok(records)
        })
        .collect::<Result<Vec<_>>>()?;
    let summary = ensemble_stats(&records, plan.histogram_bins)?;
    Ok(EnsembleStudy { records, summary })
}

/// One row block of a temporal-convergence table.
#[derive(Debug, Clone, PartialEq)]
pub struct OrderTable {
    pub dts: Vec<f64>,
    pub errors: Vec<f64>,
    /// `log2(e_i / e_{i+1}) / log2(dt_i / dt_{i+1})`, `None` on the first row.
    pub orders: Vec<Option<f64>>,
    /// Monte-Carlo standard errors (empty for deterministic tables).
    pub std_errors: Vec<f64>,
    /// Least-squares slope of `ln e` against `ln dt`.
    pub fitted_slope: f64,
}

fn order_table(dts: &[f64], errors: Vec<f64>, std_errors: Vec<f64>) -> OrderTable {
    let mut orders = vec![None];
    for i in 1..dts.len() {
        let o = (errors[i - 1] / errors[i]).ln() / (dts[i - 1] / dts[i]).ln();
        orders.push(Some(o));
    }
    let n = dts.len() as f64;
    let xs: Vec<f64> = dts.iter().map(|d| d.ln()).collect();
    let ys: Vec<f64> = errors.iter().map(|e| e.ln()).collect();
    let mean_x: f64 = xs.iter().sum::<f64>() / n;
    let mean_y: f64 = ys.iter().sum::<f64>() / n;
    let cov: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (x - mean_x) * (y - mean_y))
        .sum();
    let var: f64 = xs.iter().map(|x| (x - mean_x) * (x - mean_x)).sum();
    let fitted_slope = if var > 0.0 { cov / var } else { f64::NAN };
    OrderTable {
        dts: dts.to_vec(),
        errors,
        orders,
        std_errors,
        fitted_slope,
    }
}

/// Deterministic (lambda = 0) temporal convergence against the reference
/// step: `e_dt = ||u_ref(T) - u_dt(T)||`.
pub fn deterministic_convergence(plan: &ExperimentPlan) -> Result<OrderTable> {
    plan.validate()?;
    let grid = plan.grid();
    let u0 = initial_condition(&grid)?;
    let ref_cfg = plan.wavelet_config(plan.dt_reference);
    let ops = SpatialOps::for_config(grid, &ref_cfg)?;
    let ref_steps = integer_ratio(plan.t_final, plan.dt_reference).unwrap();
    let (u_ref, _) = evolve(&u0, &ref_cfg, &ops, &NoNoise, ref_steps, |_, _| {})?;

    let errors: Vec<f64> = plan
        .dt_list
        .par_iter()
        .map(|&dt| -> Result<f64> {
            let cfg = plan.wavelet_config(dt);
            let steps = integer_ratio(plan.t_final, dt).unwrap();
            let (u_dt, _) = evolve(&u0, &cfg, &ops, &NoNoise, steps, |_, _| {})?;
            state_distance(&u_ref, &u_dt)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(order_table(&plan.dt_list, errors, Vec::new()))
}

/// Strong-convergence tables, one per mode truncation.
#[derive(Debug, Clone, PartialEq)]
pub struct StrongStudy {
    pub modes: Vec<usize>,
    pub tables: Vec<OrderTable>,
}

/// Mean-square temporal convergence with per-trajectory path coupling: the
/// coarse runs consume aggregated fine increments of the same Brownian
/// path that drives the reference solution.
pub fn strong_convergence(plan: &ExperimentPlan) -> Result<StrongStudy> {
    plan.validate()?;
    let grid = plan.grid();
    let u0 = initial_condition(&grid)?;
    let ref_cfg = plan.wavelet_config(plan.dt_reference);
    let ops = SpatialOps::for_config(grid, &ref_cfg)?;
    let ref_steps = integer_ratio(plan.t_final, plan.dt_reference).unwrap();

    let mut tables = Vec::with_capacity(plan.modes_list.len());
    for &modes in &plan.modes_list {
        let spec = NoiseSpec::new(plan.lambda, modes, plan.base_seed)?;
        // squared errors per trajectory, one row per dt
        let per_traj: Vec<Vec<f64>> = (0..plan.trajectories as u64)
            .into_par_iter()
            .map(|trajectory| -> Result<Vec<f64>> {
                let fine: Vec<WienerIncrements> = (0..ref_steps)
                    .map(|n| sample_increments(&spec, trajectory, n, plan.dt_reference, &grid))
                    .collect::<Result<Vec<_>>>()?;
                let fine_signature = fine.iter().fold(0u64, |acc, i| acc ^ i.signature());
                let ref_path = PrecomputedPath::new(plan.lambda, fine.clone());
                let (u_ref, _) = evolve(&u0, &ref_cfg, &ops, &ref_path, ref_steps, |_, _| {})?;

                let mut sq_errors = Vec::with_capacity(plan.dt_list.len());
                for &dt in &plan.dt_list {
                    let factor = integer_ratio(dt, plan.dt_reference).unwrap() as usize;
                    let coarse: Vec<WienerIncrements> = fine
                        .chunks(factor)
                        .map(aggregate_increments)
                        .collect::<Result<Vec<_>>>()?;
                    let coarse_signature =
                        coarse.iter().fold(0u64, |acc, i| acc ^ i.signature());
                    if coarse_signature != fine_signature {
                        return Err(CoreError::CouplingMismatch(format!(
                            "trajectory {trajectory}, dt {dt}: aggregated path checksum \
                             does not match the fine path"
                        )));
                    }
                    let cfg = plan.wavelet_config(dt);
                    let steps = integer_ratio(plan.t_final, dt).unwrap();
                    let path = PrecomputedPath::new(plan.lambda, coarse);
                    let (u_dt, _) = evolve(&u0, &cfg, &ops, &path, steps, |_, _| {})?;
                    let e = state_distance(&u_ref, &u_dt)?;
                    sq_errors.push(e * e);
                }
                Ok(sq_errors)
            })
            .collect::<Result<Vec<_>>>()?;

        let count = plan.trajectories as f64;
        let mut errors = Vec::with_capacity(plan.dt_list.len());
        let mut std_errors = Vec::with_capacity(plan.dt_list.len());
        for col in 0..plan.dt_list.len() {
            let mean_sq: f64 = per_traj.iter().map(|row| row[col]).sum::<f64>() / count;
            let var_sq: f64 = per_traj
                .iter()
                .map(|row| (row[col] - mean_sq).powi(2))
                .sum::<f64>()
                / (count - 1.0).max(1.0);
            let e = mean_sq.sqrt();
            // delta method: se(sqrt(m)) = se(m) / (2 sqrt(m))
            let se = (var_sq / count).sqrt() / (2.0 * e.max(f64::MIN_POSITIVE));
            errors.push(e);
            std_errors.push(se);
        }
        tables.push(order_table(&plan.dt_list, errors, std_errors));
    }
    Ok(StrongStudy {
        modes: plan.modes_list.clone(),
        tables,
    })
}

/// Paired normalized-energy series from the scheme comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct FdmComparison {
    pub times: Vec<f64>,
    /// Mean over trajectories of `energy - energy0`, per scheme.
    pub wavelet_mean_err: Vec<f64>,
    pub fdm_mean_err: Vec<f64>,
    pub energy0: f64,
}

impl FdmComparison {
    /// The plotted quantity: `(mean energy residual) * 1e7`.
    pub fn normalized(err: f64) -> f64 {
        err * 1e7
    }
}

/// Run both schemes over the same keyed noise paths and average the energy
/// residual series.
pub fn compare_fdm(plan: &ExperimentPlan) -> Result<FdmComparison> {
    plan.validate()?;
    let grid = plan.grid();
    let wavelet_cfg = plan.wavelet_config(plan.dt);
    let fdm_cfg = plan.fdm_config(plan.dt);
    let wavelet_ops = SpatialOps::for_config(grid, &wavelet_cfg)?;
    let fdm_ops = SpatialOps::for_config(grid, &fdm_cfg)?;
    let u0 = initial_condition(&grid)?;
    let steps = plan.steps()?;

    let pairs: Vec<(Vec<DiagnosticsRecord>, Vec<DiagnosticsRecord>)> = (0..plan.trajectories
        as u64)
        .into_par_iter()
        .map(|trajectory| -> Result<_> {
            let source = KeyedQWiener {
                spec: NoiseSpec::new(plan.lambda, plan.noise_modes, plan.base_seed)?,
                trajectory,
                dt: plan.dt,
                grid,
            };
            let (_, wavelet) = evolve(&u0, &wavelet_cfg, &wavelet_ops, &source, steps, |_, _| {})?;
            let (_, fdm) = evolve(&u0, &fdm_cfg, &fdm_ops, &source, steps, |_, _| {})?;
            Ok((wavelet, fdm))
        })
        .collect::<Result<Vec<_>>>()?;

    let count = plan.trajectories as f64;
    let len = steps as usize + 1;
    let times: Vec<f64> = pairs[0].0.iter().map(|r| r.time).collect();
    let mut wavelet_mean_err = vec![0.0; len];
    let mut fdm_mean_err = vec![0.0; len];
    for (wavelet, fdm) in &pairs {
        for i in 0..len {
            wavelet_mean_err[i] += wavelet[i].err;
            fdm_mean_err[i] += fdm[i].err;
        }
    }
    for v in wavelet_mean_err.iter_mut().chain(fdm_mean_err.iter_mut()) {
        *v /= count;
    }
    Ok(FdmComparison {
        times,
        wavelet_mean_err,
        fdm_mean_err,
        energy0: pairs[0].0[0].energy,
    })
}

/// Structured result of `run_plan`.
#[derive(Debug, Clone, PartialEq)]
pub enum ExperimentResult {
    Energy(EnergyStudy),
    Ensemble(EnsembleStudy),
    DetOrders(OrderTable),
    StrongOrders(StrongStudy),
    FdmCompare(FdmComparison),
}

/// Dispatch a plan to its study.
pub fn run_plan(plan: &ExperimentPlan) -> Result<ExperimentResult> {
    Ok(match plan.kind {
        ExperimentKind::Energy | ExperimentKind::LongTime => {
            ExperimentResult::Energy(energy_study(plan)?)
        }
        ExperimentKind::Ensemble => ExperimentResult::Ensemble(ensemble_study(plan)?),
        ExperimentKind::DetConverge => ExperimentResult::DetOrders(deterministic_convergence(plan)?),
        ExperimentKind::StrongConverge => ExperimentResult::StrongOrders(strong_convergence(plan)?),
        ExperimentKind::CompareFdm => ExperimentResult::FdmCompare(compare_fdm(plan)?),
    })
}

fn format_lambda(lambda: f64) -> String {
    format!("{lambda}").replace('.', "p").replace('-', "m")
}

fn order_csv(table: &OrderTable, with_se: bool) -> String {
    let mut out = String::from(if with_se {
        "dt,error,order,std_error\n"
    } else {
        "dt,error,order\n"
    });
    for i in 0..table.dts.len() {
        let order = table.orders[i]
            .map(|o| format!("{o:.4}"))
            .unwrap_or_else(|| "-".into());
        if with_se {
            out.push_str(&format!(
                "{},{},{},{}\n",
                table.dts[i], table.errors[i], order, table.std_errors[i]
            ));
        } else {
            out.push_str(&format!("{},{},{}\n", table.dts[i], table.errors[i], order));
        }
    }
    out.push_str(&format!("# fitted_slope,{:.6}\n", table.fitted_slope));
    out
}

impl ExperimentResult {
    /// Render every output series as `(file name, CSV contents)`.
    pub fn csv_files(&self) -> Vec<(String, String)> {
        match self {
            ExperimentResult::Energy(study) => study
                .lambdas
                .iter()
                .zip(&study.series)
                .map(|(lambda, records)| {
                    (
                        format!("trajectory_lambda_{}.csv", format_lambda(*lambda)),
                        trajectory_csv(records),
                    )
                })
                .collect(),
            ExperimentResult::Ensemble(study) => vec![
                ("ensemble_energy.csv".into(), ensemble_csv(&study.summary.stats)),
                (
                    "max_energy_histogram.csv".into(),
                    histogram_csv(&study.summary.histogram),
                ),
            ],
            ExperimentResult::DetOrders(table) => {
                vec![("deterministic_orders.csv".into(), order_csv(table, false))]
            }
            ExperimentResult::StrongOrders(study) => study
                .modes
                .iter()
                .zip(&study.tables)
                .map(|(m, table)| (format!("strong_orders_m{m}.csv"), order_csv(table, true)))
                .collect(),
            ExperimentResult::FdmCompare(cmp) => {
                let render = |errs: &[f64]| {
                    let mut out = String::from("t,normalized_energy\n");
                    for (t, e) in cmp.times.iter().zip(errs) {
                        out.push_str(&format!("{t},{}\n", FdmComparison::normalized(*e)));
                    }
                    out
                };
                vec![
                    (
                        "normalized_energy_wavelet.csv".into(),
                        render(&cmp.wavelet_mean_err),
                    ),
                    ("normalized_energy_fdm.csv".into(), render(&cmp.fdm_mean_err)),
                ]
            }
        }
    }
}

/// Deterministic manifest echoing the plan, the seed, and the code version.
pub fn manifest(plan: &ExperimentPlan, version: &str) -> String {
    let list = |values: &[f64]| {
        let parts: Vec<String> = values.iter().map(|v| format!("{v}")).collect();
        format!("[{}]", parts.join(", "))
    };
    let ulist = |values: &[usize]| {
        let parts: Vec<String> = values.iter().map(|v| format!("{v}")).collect();
        format!("[{}]", parts.join(", "))
    };
    let mut out = String::new();
    out.push_str(&format!("version = \"{version}\"\n"));
    out.push_str(&format!("experiment = \"{}\"\n", plan.kind.name()));
    out.push_str(&format!("seed = {}\n", plan.base_seed));
    out.push_str(&format!("grid_level = {}\n", plan.grid_level));
    out.push_str(&format!("grid_points = {}\n", 1u64 << plan.grid_level));
    out.push_str(&format!("gamma = {}\n", plan.gamma));
    out.push_str(&format!("lambda = {}\n", plan.lambda));
    out.push_str(&format!("lambda_list = {}\n", list(&plan.lambda_list)));
    out.push_str(&format!("dt = {}\n", plan.dt));
    out.push_str(&format!("t_final = {}\n", plan.t_final));
    out.push_str(&format!("trajectories = {}\n", plan.trajectories));
    out.push_str(&format!("noise_modes = {}\n", plan.noise_modes));
    out.push_str(&format!("modes_list = {}\n", ulist(&plan.modes_list)));
    out.push_str(&format!("dt_list = {}\n", list(&plan.dt_list)));
    out.push_str(&format!("dt_reference = {}\n", plan.dt_reference));
    out.push_str(&format!("fp_tol = {}\n", plan.fp_tol));
    out.push_str(&format!("fp_max_iters = {}\n", plan.fp_max_iters));
    out.push_str(&format!("histogram_bins = {}\n", plan.histogram_bins));
    out.push_str(&format!("fdm_order = {}\n", plan.fdm_order));
    out
}
