//! Time steppers: the implicit-midpoint wavelet-collocation scheme, an
//! explicit finite-difference baseline, tangent (variational) evolution, and
//! the trajectory driver.
//!
//! One step of the midpoint scheme solves, with `m = (u^n + u^{n+1})/2` and
//! the x-varying noise lattice `W`,
//!
//! ```text
//! E^{n+1} = E^n + dt * curl(m_H) - lambda * m_H (*) W
//! H^{n+1} = H^n - dt * curl(m_E) + lambda * m_E (*) W
//! ```
//!
//! The noise factor is stiff when `lambda * |W_i|` is large, so the solver
//! moves it to the left-hand side: writing the noise as `a J` with
//! `J(E,H) = (-H, E)` acting per cell and `a_i = lambda W_i`, the update is
//!
//! ```text
//! u^{n+1} = (I - a J / 2)^{-1} [ u^n + (a/2) J u^n + dt * C(m) ]
//! ```
//!
//! where the cellwise inverse is the exact 2x2 Cayley rotation
//! `(I + a J / 2)/(1 + a^2/4)`. Only the curl term is iterated, so the
//! Picard contraction factor is `dt * ||curl|| / 2`, independent of the
//! noise size; the fixed point itself is unchanged. Iterations start from
//! the explicit Euler predictor and, after reaching the requested tolerance,
//! continue while still converging rapidly, which polishes the step to the
//! rounding floor and keeps the per-step energy defect at machine scale.

use crate::diagnostics::{energy, DiagnosticsRecord, PairingRecord};
use crate::error::{CoreError, Result};
use crate::grid::{discrete_curl, AxisStencils, Axis, FieldState, GridSpec, TangentState};
use crate::noise::{sample_increments, NoiseSpec, WienerIncrements};
use crate::wavelet::{central_diff_stencil, connection_coefficients, diff_stencil};

/// Spatial discretization selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    /// Implicit midpoint in time, wavelet-collocation derivatives in space.
    WaveletMidpoint,
    /// Explicit Euler-Maruyama in time, central differences in space.
    FdmBaseline,
}

/// Stepper parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepperConfig {
    pub dt: f64,
    pub scheme: Scheme,
    /// Max-norm tolerance on fixed-point updates.
    pub fp_tol: f64,
    pub fp_max_iters: usize,
    /// Wavelet order for the midpoint scheme.
    pub gamma: usize,
    /// Central-difference accuracy order for the baseline.
    pub fdm_order: usize,
}

impl StepperConfig {
    pub fn wavelet(dt: f64, gamma: usize) -> Self {
        Self {
            dt,
            scheme: Scheme::WaveletMidpoint,
            fp_tol: 1e-12,
            fp_max_iters: 200,
            gamma,
            fdm_order: 2,
        }
    }

    pub fn fdm(dt: f64) -> Self {
        Self {
            dt,
            scheme: Scheme::FdmBaseline,
            fp_tol: 1e-12,
            fp_max_iters: 200,
            gamma: 10,
            fdm_order: 2,
        }
    }

    /// User-facing validation; the step functions themselves accept signed
    /// `dt` so the reversibility diagnostics can run the map backwards.
    pub fn validate(&self) -> Result<()> {
        if self.dt <= 0.0 || self.dt.is_nan() {
            return Err(CoreError::InvalidTimeStep(self.dt));
        }
        if self.fp_tol <= 0.0 || self.fp_tol.is_nan() || self.fp_max_iters == 0 {
            return Err(CoreError::InvalidPlan(
                "fp_tol must be positive and fp_max_iters nonzero".into(),
            ));
        }
        if self.gamma < 4 || !self.gamma.is_multiple_of(2) {
            return Err(CoreError::InvalidWaveletOrder(self.gamma));
        }
        if self.fdm_order == 0 || !self.fdm_order.is_multiple_of(2) {
            return Err(CoreError::InvalidPlan(format!(
                "fdm_order must be even and positive, got {}",
                self.fdm_order
            )));
        }
        Ok(())
    }
}

/// Per-axis stencils bound to a grid, built once per run.
#[derive(Debug, Clone)]
pub struct SpatialOps {
    pub grid: GridSpec,
    pub stencils: AxisStencils,
}

impl SpatialOps {
    pub fn for_config(grid: GridSpec, cfg: &StepperConfig) -> Result<Self> {
        match cfg.scheme {
            Scheme::WaveletMidpoint => Self::wavelet(grid, cfg.gamma),
            Scheme::FdmBaseline => Self::finite_difference(grid, cfg.fdm_order),
        }
    }

    pub fn wavelet(grid: GridSpec, gamma: usize) -> Result<Self> {
        let coeffs = connection_coefficients(gamma)?;
        let stencil = |axis: Axis| {
            let spec = grid.axis(axis);
            diff_stencil(&coeffs, spec.level as i32, spec.points())
        };
        Ok(Self {
            grid,
            stencils: AxisStencils {
                x: stencil(Axis::X)?,
                y: stencil(Axis::Y)?,
                z: stencil(Axis::Z)?,
            },
        })
    }

    pub fn finite_difference(grid: GridSpec, order: usize) -> Result<Self> {
        let stencil = |axis: Axis| {
            let spec = grid.axis(axis);
            central_diff_stencil(order, spec.level as i32, spec.points())
        };
        Ok(Self {
            grid,
            stencils: AxisStencils {
                x: stencil(Axis::X)?,
                y: stencil(Axis::Y)?,
                z: stencil(Axis::Z)?,
            },
        })
    }
}

/// `E-rows = +curl(v_H)`, `H-rows = -curl(v_E)` (the Maxwell right-hand side
/// without noise, unscaled).
fn curl_block(v: &FieldState, ops: &SpatialOps) -> Result<FieldState> {
    let curl_h = discrete_curl([v.h(0), v.h(1), v.h(2)], &ops.stencils)?;
    let curl_e = discrete_curl([v.e(0), v.e(1), v.e(2)], &ops.stencils)?;
    let mut out = FieldState::zeros(v.grid);
    out.time = v.time;
    let [ch0, ch1, ch2] = curl_h;
    let [mut ce0, mut ce1, mut ce2] = curl_e;
    for lat in [&mut ce0, &mut ce1, &mut ce2] {
        for v in lat.as_mut_slice() {
            *v = -*v;
        }
    }
    *out.component_mut(0) = ch0;
    *out.component_mut(1) = ch1;
    *out.component_mut(2) = ch2;
    *out.component_mut(3) = ce0;
    *out.component_mut(4) = ce1;
    *out.component_mut(5) = ce2;
    Ok(out)
}

/// In place: `(E,H) += scale * a_i * J(E0,H0)` with `J(E,H) = (-H, E)`,
/// reading from `from` and accumulating into `onto`. The factor `a` varies
/// along x only, so each x-row reuses the same noise slice.
fn add_scaled_noise_rotation(onto: &mut FieldState, from: &FieldState, a: &[f64], scale: f64) {
    let [n1, n2, n3] = from.grid.shape();
    let (e_onto, h_onto) = onto.components_mut().split_at_mut(3);
    for c in 0..3 {
        for row in 0..n2 * n3 {
            let base = row * n1;
            let e_src = &from.e(c).as_slice()[base..base + n1];
            let h_src = &from.h(c).as_slice()[base..base + n1];
            let e_dst = &mut e_onto[c].as_mut_slice()[base..base + n1];
            for ((e, h), ai) in e_dst.iter_mut().zip(h_src).zip(a) {
                *e -= scale * ai * h;
            }
            let h_dst = &mut h_onto[c].as_mut_slice()[base..base + n1];
            for ((h, e), ai) in h_dst.iter_mut().zip(e_src).zip(a) {
                *h += scale * ai * e;
            }
        }
    }
}

/// Solve `(I - (a/2) J) x = z` cell by cell via the Cayley form
/// `x = (I + (a/2) J) z / (1 + a^2/4)`.
fn cayley_solve(z: &FieldState, a: &[f64]) -> FieldState {
    let mut out = z.clone();
    let [n1, n2, n3] = z.grid.shape();
    let (e_out, h_out) = out.components_mut().split_at_mut(3);
    for c in 0..3 {
        for row in 0..n2 * n3 {
            let base = row * n1;
            let e_src = &z.e(c).as_slice()[base..base + n1];
            let h_src = &z.h(c).as_slice()[base..base + n1];
            let e_dst = &mut e_out[c].as_mut_slice()[base..base + n1];
            let h_dst = &mut h_out[c].as_mut_slice()[base..base + n1];
            for ((((eo, ho), ze), zh), ai) in e_dst
                .iter_mut()
                .zip(h_dst.iter_mut())
                .zip(e_src)
                .zip(h_src)
                .zip(a)
            {
                let half = 0.5 * ai;
                let denom = 1.0 + half * half;
                *eo = (ze - half * zh) / denom;
                *ho = (zh + half * ze) / denom;
            }
        }
    }
    out
}

/// Generic Picard iteration with divergence detection and floor polishing.
///
/// Convergence means the update max-norm fell to `tol`; the iteration then
/// keeps going while each update is still less than half the previous one,
/// stopping at the rounding floor. Five consecutive growing updates above
/// `tol` report divergence.
pub fn fixed_point_solve<T>(
    map: impl Fn(&T) -> T,
    guess: T,
    distance: impl Fn(&T, &T) -> f64,
    tol: f64,
    max_iters: usize,
) -> Result<(T, usize)> {
    let mut current = guess;
    let mut prev_delta = f64::INFINITY;
    let mut growth_streak = 0usize;
    for iteration in 1..=max_iters {
        let next = map(&current);
        let delta = distance(&next, &current);
        if !delta.is_finite() {
            return Err(CoreError::NonFiniteField);
        }
        if delta <= tol && (delta == 0.0 || delta > 0.5 * prev_delta) {
            return Ok((next, iteration));
        }
        if delta > prev_delta && delta > tol {
            growth_streak += 1;
            if growth_streak >= 5 {
                return Err(CoreError::FixedPointDiverged {
                    iterations: iteration,
                    residual: delta,
                });
            }
        } else {
            growth_streak = 0;
        }
        prev_delta = delta;
        current = next;
    }
    if prev_delta <= tol {
        Ok((current, max_iters))
    } else {
        Err(CoreError::FixedPointStalled {
            iterations: max_iters,
            residual: prev_delta,
            tolerance: tol,
        })
    }
}

fn check_increments(
    increments: &WienerIncrements,
    cfg_dt: f64,
    n1: usize,
) -> Result<()> {
    let span = increments.span();
    if (span - cfg_dt.abs()).abs() > 1e-12 * cfg_dt.abs() {
        return Err(CoreError::IncrementSpanMismatch {
            got: span,
            want: cfg_dt,
        });
    }
    if increments.values().len() != n1 {
        return Err(CoreError::ShapeMismatch(format!(
            "noise has {} cells, grid x-axis has {n1}",
            increments.values().len()
        )));
    }
    Ok(())
}

/// One step of the stochastic implicit-midpoint wavelet-collocation scheme.
/// Returns the new state and the number of fixed-point iterations.
pub fn midpoint_step(
    u: &FieldState,
    increments: &WienerIncrements,
    lambda: f64,
    cfg: &StepperConfig,
    ops: &SpatialOps,
) -> Result<(FieldState, usize)> {
    let dt = cfg.dt;
    let n1 = u.grid.shape()[0];
    let noise_on = lambda != 0.0;

    let mut base = u.clone();
    let mut guess = u.scaled_add(dt, &curl_block(u, ops)?);
    let a: Vec<f64> = if noise_on {
        check_increments(increments, dt, n1)?;
        let a: Vec<f64> = increments.values().iter().map(|w| lambda * w).collect();
        // base = u + (a/2) J u; explicit Euler predictor gets the full a J u.
        add_scaled_noise_rotation(&mut base, u, &a, 0.5);
        add_scaled_noise_rotation(&mut guess, u, &a, 1.0);
        a
    } else {
        Vec::new()
    };

    let map = |v: &FieldState| {
        let mid = u.midpoint(v);
        let rhs = curl_block(&mid, ops).expect("shapes verified");
        let z = base.scaled_add(dt, &rhs);
        if noise_on {
            cayley_solve(&z, &a)
        } else {
            z
        }
    };

    let (mut next, iterations) = fixed_point_solve(
        map,
        guess,
        |a, b| a.max_abs_diff(b),
        cfg.fp_tol,
        cfg.fp_max_iters,
    )?;
    if !next.is_finite() {
        return Err(CoreError::NonFiniteField);
    }
    next.time = u.time + dt;
    Ok((next, iterations))
}

/// One explicit Euler-Maruyama step with central-difference curls. Cheap,
/// but conserves nothing; it exists as the drift baseline.
pub fn fdm_baseline_step(
    u: &FieldState,
    increments: &WienerIncrements,
    lambda: f64,
    cfg: &StepperConfig,
    ops: &SpatialOps,
) -> Result<(FieldState, usize)> {
    let dt = cfg.dt;
    let n1 = u.grid.shape()[0];
    let mut next = u.scaled_add(dt, &curl_block(u, ops)?);
    if lambda != 0.0 {
        check_increments(increments, dt, n1)?;
        let a: Vec<f64> = increments.values().iter().map(|w| lambda * w).collect();
        add_scaled_noise_rotation(&mut next, u, &a, 1.0);
    }
    if !next.is_finite() {
        return Err(CoreError::NonFiniteField);
    }
    next.time = u.time + dt;
    Ok((next, 1))
}

/// Advance a tangent state. The system is linear, so the variational update
/// is the same affine map as the state update with zero inhomogeneity; it is
/// implemented by reusing the stepper on the variation itself.
pub fn tangent_step(
    v: &TangentState,
    increments: &WienerIncrements,
    lambda: f64,
    cfg: &StepperConfig,
    ops: &SpatialOps,
) -> Result<(TangentState, usize)> {
    match cfg.scheme {
        Scheme::WaveletMidpoint => midpoint_step(v, increments, lambda, cfg, ops),
        Scheme::FdmBaseline => fdm_baseline_step(v, increments, lambda, cfg, ops),
    }
}

/// Dispatch one step according to the configured scheme.
pub fn step(
    u: &FieldState,
    increments: &WienerIncrements,
    lambda: f64,
    cfg: &StepperConfig,
    ops: &SpatialOps,
) -> Result<(FieldState, usize)> {
    match cfg.scheme {
        Scheme::WaveletMidpoint => midpoint_step(u, increments, lambda, cfg, ops),
        Scheme::FdmBaseline => fdm_baseline_step(u, increments, lambda, cfg, ops),
    }
}

/// Source of per-step Wiener increments for one trajectory.
pub trait NoiseSource: Sync {
    fn lambda(&self) -> f64;
    fn increments(&self, step: u64) -> Result<WienerIncrements>;
}

/// Samples increments on demand from the keyed counter-based streams.
#[derive(Debug, Clone)]
pub struct KeyedQWiener {
    pub spec: NoiseSpec,
    pub trajectory: u64,
    pub dt: f64,
    pub grid: GridSpec,
}

impl NoiseSource for KeyedQWiener {
    fn lambda(&self) -> f64 {
        self.spec.lambda
    }

    fn increments(&self, step: u64) -> Result<WienerIncrements> {
        sample_increments(&self.spec, self.trajectory, step, self.dt, &self.grid)
    }
}

/// Replays a precomputed (usually aggregated) table of increments; entry `k`
/// is consumed by step `k`. Used for coupled-path convergence runs.
#[derive(Debug, Clone)]
pub struct PrecomputedPath {
    lambda: f64,
    table: Vec<WienerIncrements>,
}

impl PrecomputedPath {
    pub fn new(lambda: f64, table: Vec<WienerIncrements>) -> Self {
        Self { lambda, table }
    }

    /// XOR of the signatures of every increment in the table.
    pub fn signature(&self) -> u64 {
        self.table.iter().fold(0, |acc, inc| acc ^ inc.signature())
    }
}

impl NoiseSource for PrecomputedPath {
    fn lambda(&self) -> f64 {
        self.lambda
    }

    fn increments(&self, step: u64) -> Result<WienerIncrements> {
        self.table
            .get(step as usize)
            .cloned()
            .ok_or(CoreError::IncrementGap {
                expected: step,
                found: self.table.len() as u64,
            })
    }
}

/// Noiseless source for deterministic runs.
#[derive(Debug, Clone, Copy)]
pub struct NoNoise;

impl NoiseSource for NoNoise {
    fn lambda(&self) -> f64 {
        0.0
    }

    fn increments(&self, step: u64) -> Result<WienerIncrements> {
        Ok(WienerIncrements::zeros(step, 1.0, 1))
    }
}

/// Advance `steps` steps from `u0`, recording diagnostics after each step
/// and invoking `observer` with every fresh record.
///
/// When `lambda == 0` the noise source is never sampled and the noise terms
/// never enter the arithmetic, so trajectories are bit-identical no matter
/// how the source is keyed.
pub fn evolve(
    u0: &FieldState,
    cfg: &StepperConfig,
    ops: &SpatialOps,
    source: &dyn NoiseSource,
    steps: u64,
    mut observer: impl FnMut(&DiagnosticsRecord, &FieldState),
) -> Result<(FieldState, Vec<DiagnosticsRecord>)> {
    let lambda = source.lambda();
    let energy0 = energy(u0);
    let mut records = Vec::with_capacity(steps as usize + 1);
    records.push(DiagnosticsRecord {
        step: 0,
        time: u0.time,
        energy: energy0,
        err: 0.0,
        iterations: 0,
    });
    let mut state = u0.clone();
    let zero = WienerIncrements::zeros(0, cfg.dt, u0.grid.shape()[0]);
    for n in 0..steps {
        let increments = if lambda == 0.0 {
            zero.clone()
        } else {
            source.increments(n).map_err(|e| e.at_step(n))?
        };
        let (next, iterations) =
            step(&state, &increments, lambda, cfg, ops).map_err(|e| e.at_step(n))?;
        state = next;
        state.time = u0.time + (n + 1) as f64 * cfg.dt;
        let e = energy(&state);
        let record = DiagnosticsRecord {
            step: n + 1,
            time: state.time,
            energy: e,
            err: e - energy0,
            iterations,
        };
        observer(&record, &state);
        records.push(record);
    }
    Ok((state, records))
}

/// Evolve two tangent states under one shared noise path and record the
/// symplectic pairing after every step.
pub fn evolve_tangent_pair(
    v0: &TangentState,
    w0: &TangentState,
    cfg: &StepperConfig,
    ops: &SpatialOps,
    source: &dyn NoiseSource,
    steps: u64,
) -> Result<Vec<PairingRecord>> {
    let lambda = source.lambda();
    let mut v = v0.clone();
    let mut w = w0.clone();
    let mut records = Vec::with_capacity(steps as usize + 1);
    records.push(PairingRecord {
        step: 0,
        time: v0.time,
        pairing: crate::diagnostics::symplectic_pairing(&v, &w)?,
    });
    let zero = WienerIncrements::zeros(0, cfg.dt, v0.grid.shape()[0]);
    for n in 0..steps {
        let increments = if lambda == 0.0 {
            zero.clone()
        } else {
            source.increments(n).map_err(|e| e.at_step(n))?
        };
        v = tangent_step(&v, &increments, lambda, cfg, ops)
            .map_err(|e| e.at_step(n))?
            .0;
        w = tangent_step(&w, &increments, lambda, cfg, ops)
            .map_err(|e| e.at_step(n))?
            .0;
        records.push(PairingRecord {
            step: n + 1,
            time: v0.time + (n + 1) as f64 * cfg.dt,
            pairing: crate::diagnostics::symplectic_pairing(&v, &w)?,
        });
    }
    Ok(records)
}
