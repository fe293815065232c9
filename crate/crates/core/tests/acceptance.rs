//! Acceptance suite: every structural claim the toolkit makes, run at its
//! stated tolerance, one pass/fail line per criterion.
//!
//! Criterion 2 (long-horizon stability) runs for ~40k steps and is marked
//! `#[ignore]`; run it with `cargo test -p stomax --test acceptance -- --ignored`.
//!
//! Tolerances are centralized below with their justification; none of them
//! is tuned after the fact.

use rand_core::{RngCore, SeedableRng};
use std::f64::consts::PI;

use stomax::diagnostics::energy;
use stomax::experiments::{
    compare_fdm, deterministic_convergence, energy_study, initial_condition, strong_convergence,
    ExperimentKind, ExperimentPlan,
};
use stomax::grid::{FieldState, GridSpec, Lattice};
use stomax::integrator::{evolve_tangent_pair, KeyedQWiener, SpatialOps, StepperConfig};
use stomax::noise::{
    aggregate_increments, psi, sample_increments, standard_normal_quantile, trace_q, NoiseSpec,
    WienerIncrements,
};
use stomax::wavelet::{connection_coefficients, dd_filter, diff_stencil};

/// Global seed for every acceptance run; all streams are keyed from it.
const SEED: u64 = 42;

/// Energy conservation over T = 20 (the scheme is exact; the budget covers
/// solver tolerance accumulated over 4000 steps).
const ENERGY_DRIFT_T20: f64 = 1e-10;
/// Long-horizon drift budget over T = 200 (one decade looser).
const ENERGY_DRIFT_T200: f64 = 1e-9;
/// Relative drift of the global symplectic pairing over 1000 steps.
const PAIRING_DRIFT: f64 = 1e-8;
/// Window for consecutive deterministic temporal orders.
const DET_ORDER_WINDOW: (f64, f64) = (1.8, 2.4);
/// Reference deterministic error at dt = 2^-6, paper grid; measured values
/// must agree within a factor of three.
const DET_ERROR_REF: f64 = 6.39e-2;
/// Window for fitted strong-convergence slopes.
const STRONG_SLOPE_WINDOW: (f64, f64) = (0.9, 1.7);
/// Reference strong error at dt = 2^-6, one noise mode, paper grid.
const STRONG_ERROR_REF: f64 = 3.03e-1;
const FACTOR_OF: f64 = 3.0;
/// Wavelet-vs-baseline separation: the baseline's final mean energy
/// residual must exceed the wavelet scheme's by at least this factor.
const FDM_SEPARATION: f64 = 1e3;
/// Refinement-consistency residual for the connection coefficients.
const REFINEMENT_RESIDUAL: f64 = 1e-12;
/// Trig differentiation on 32 points: the error decays like (2 pi / N)^gamma;
/// gamma = 10 additionally meets the absolute 1e-6 bound.
const TRIG_ABS_GAMMA10: f64 = 1e-6;
/// Quadrature agreement between integral(Psi) and the covariance trace.
const PSI_QUADRATURE: f64 = 1e-10;

fn base_plan(kind: ExperimentKind) -> ExperimentPlan {
    ExperimentPlan {
        kind,
        grid_level: 4,
        gamma: 10,
        lambda: 0.5,
        lambda_list: vec![0.0, 0.5, 1.0, 5.0],
        dt: 0.005,
        t_final: 20.0,
        trajectories: 20,
        noise_modes: 200,
        modes_list: vec![1, 4],
        dt_list: vec![],
        dt_reference: 2f64.powi(-11),
        base_seed: SEED,
        fp_tol: 1e-12,
        fp_max_iters: 200,
        histogram_bins: 30,
        fdm_order: 2,
    }
}

#[test]
fn acceptance_1_energy_conservation_t20() {
    let plan = base_plan(ExperimentKind::Energy);
    let study = energy_study(&plan).expect("energy study runs");
    let mut worst = 0.0f64;
    for (lambda, series) in study.lambdas.iter().zip(&study.series) {
        let max_err = series.iter().map(|r| r.err.abs()).fold(0.0f64, f64::max);
        println!(
            "  lambda = {lambda:>4}: max |energy residual| = {max_err:.3e} over {} steps",
            series.len() - 1
        );
        worst = worst.max(max_err);
        assert!(
            max_err <= ENERGY_DRIFT_T20,
            "lambda {lambda}: energy drift {max_err:.3e} exceeds {ENERGY_DRIFT_T20:.1e}"
        );
    }
    println!(
        "acceptance 1 (energy conservation, T=20, lambda in {{0, 0.5, 1, 5}}): \
         PASS (worst {worst:.3e} <= {ENERGY_DRIFT_T20:.0e})"
    );
}

#[test]
#[ignore = "long horizon (~40k steps); run with: cargo test -p stomax --test acceptance -- --ignored"]
fn acceptance_2_long_time_stability_t200() {
    let mut plan = base_plan(ExperimentKind::LongTime);
    plan.t_final = 200.0;
    plan.lambda_list = vec![1.0];
    let study = energy_study(&plan).expect("long-time study runs");
    let max_err = study.series[0]
        .iter()
        .map(|r| r.err.abs())
        .fold(0.0f64, f64::max);
    assert!(
        max_err <= ENERGY_DRIFT_T200,
        "T=200 energy drift {max_err:.3e} exceeds {ENERGY_DRIFT_T200:.1e}"
    );
    println!(
        "acceptance 2 (long-time stability, T=200, lambda=1): PASS \
         (max residual {max_err:.3e} <= {ENERGY_DRIFT_T200:.0e})"
    );
}

/// Gaussian lattice states keyed from the global seed, for tangent pairs.
fn random_tangent(grid: GridSpec, tag: u64) -> FieldState {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&SEED.to_le_bytes());
    key[8..16].copy_from_slice(&tag.to_le_bytes());
    key[16..].copy_from_slice(b"stomax-tangent-1");
    let mut rng = rand_chacha::ChaCha12Rng::from_seed(key);
    let mut state = FieldState::zeros(grid);
    for c in 0..6 {
        *state.component_mut(c) = Lattice::from_fn(&grid, |_, _, _| {
            let u = ((rng.next_u64() >> 11) as f64 + 0.5) * (-53f64).exp2();
            standard_normal_quantile(u)
        });
    }
    state
}

#[test]
fn acceptance_3_symplectic_pairing_conservation() {
    let grid = GridSpec::unit_cube(4);
    let cfg = StepperConfig::wavelet(0.005, 10);
    let ops = SpatialOps::for_config(grid, &cfg).expect("ops build");
    let v0 = random_tangent(grid, 1);
    let w0 = random_tangent(grid, 2);
    let source = KeyedQWiener {
        spec: NoiseSpec::new(1.0, 200, SEED).unwrap(),
        trajectory: 0,
        dt: cfg.dt,
        grid,
    };
    let records = evolve_tangent_pair(&v0, &w0, &cfg, &ops, &source, 1000).expect("pair evolves");
    let p0 = records[0].pairing;
    assert!(
        p0.abs() > 1e-6,
        "degenerate initial pairing {p0:.3e}; pick different tangent seeds"
    );
    let drift = records
        .iter()
        .map(|r| (r.pairing - p0).abs())
        .fold(0.0f64, f64::max)
        / p0.abs();
    assert!(
        drift <= PAIRING_DRIFT,
        "pairing drift {drift:.3e} exceeds {PAIRING_DRIFT:.1e}"
    );
    println!(
        "acceptance 3 (multi-symplectic pairing, 1000 steps, shared noise): PASS \
         (relative drift {drift:.3e} <= {PAIRING_DRIFT:.0e})"
    );
}

#[test]
fn acceptance_4_deterministic_second_order() {
    // Orders on the desk grid. The tabulated reference values correspond to
    // one time unit (see the convergence notes in the README); the order
    // window itself is horizon-independent, so the cheap check uses T = 1/8.
    let mut plan = base_plan(ExperimentKind::DetConverge);
    plan.lambda = 0.0;
    plan.t_final = 0.125;
    plan.dt_list = vec![
        2f64.powi(-6),
        2f64.powi(-7),
        2f64.powi(-8),
        2f64.powi(-9),
    ];
    let table = deterministic_convergence(&plan).expect("det convergence runs");
    for (i, order) in table.orders.iter().enumerate().skip(1) {
        let o = order.expect("consecutive order");
        println!(
            "  dt = 2^-{}: error = {:.4e}, order = {o:.3}",
            6 + i,
            table.errors[i]
        );
        assert!(
            (DET_ORDER_WINDOW.0..=DET_ORDER_WINDOW.1).contains(&o),
            "order {o:.3} outside {DET_ORDER_WINDOW:?}"
        );
    }

    // Error magnitude at paper scale (32^3), T = 1, dt = 2^-6.
    let mut paper = plan.clone();
    paper.grid_level = 5;
    paper.t_final = 1.0;
    paper.dt_list = vec![2f64.powi(-6)];
    let paper_table = deterministic_convergence(&paper).expect("paper-scale det run");
    let err = paper_table.errors[0];
    let ratio = err / DET_ERROR_REF;
    assert!(
        (1.0 / FACTOR_OF..=FACTOR_OF).contains(&ratio),
        "paper-scale error {err:.3e} not within a factor {FACTOR_OF} of {DET_ERROR_REF:.3e}"
    );
    println!(
        "acceptance 4 (deterministic order 2): PASS (orders in {DET_ORDER_WINDOW:?}; \
         paper-scale error {err:.3e}, x{ratio:.2} of {DET_ERROR_REF:.2e})"
    );
}

#[test]
fn acceptance_5_strong_order_slopes() {
    let mut plan = base_plan(ExperimentKind::StrongConverge);
    plan.lambda = 2f64.sqrt();
    plan.t_final = 0.125;
    plan.modes_list = vec![1, 4];
    plan.dt_list = vec![
        2f64.powi(-6),
        2f64.powi(-7),
        2f64.powi(-8),
        2f64.powi(-9),
    ];
    let study = strong_convergence(&plan).expect("strong convergence runs");
    for (modes, table) in study.modes.iter().zip(&study.tables) {
        println!(
            "  modes = {modes}: errors = {:?}, slope = {:.3}",
            table
                .errors
                .iter()
                .map(|e| format!("{e:.3e}"))
                .collect::<Vec<_>>(),
            table.fitted_slope
        );
        for pair in table.errors.windows(2) {
            assert!(
                pair[1] < pair[0],
                "strong errors must decrease with dt: {:?}",
                table.errors
            );
        }
        assert!(
            (STRONG_SLOPE_WINDOW.0..=STRONG_SLOPE_WINDOW.1).contains(&table.fitted_slope),
            "modes {modes}: slope {:.3} outside {STRONG_SLOPE_WINDOW:?}",
            table.fitted_slope
        );
    }
    println!(
        "acceptance 5a (strong order, 20 coupled trajectories, modes {{1,4}}): PASS \
         (slopes within {STRONG_SLOPE_WINDOW:?})"
    );
}

#[test]
fn acceptance_5_strong_error_paper_scale() {
    let mut plan = base_plan(ExperimentKind::StrongConverge);
    plan.grid_level = 5;
    plan.lambda = 2f64.sqrt();
    plan.t_final = 1.0;
    plan.modes_list = vec![1];
    plan.dt_list = vec![2f64.powi(-6)];
    let study = strong_convergence(&plan).expect("paper-scale strong run");
    let err = study.tables[0].errors[0];
    let se = study.tables[0].std_errors[0];
    let ratio = err / STRONG_ERROR_REF;
    assert!(
        (1.0 / FACTOR_OF..=FACTOR_OF).contains(&ratio),
        "paper-scale strong error {err:.3e} not within a factor {FACTOR_OF} of {STRONG_ERROR_REF:.3e}"
    );
    println!(
        "acceptance 5b (strong error at paper scale, modes=1, dt=2^-6): PASS \
         (error {err:.3e} +- {se:.1e}, x{ratio:.2} of {STRONG_ERROR_REF:.2e})"
    );
}

#[test]
fn acceptance_6_fdm_comparison() {
    let mut plan = base_plan(ExperimentKind::CompareFdm);
    plan.lambda = 2f64.sqrt();
    plan.dt = 1.0 / 64.0;
    plan.t_final = 10.0;
    plan.trajectories = 20;
    let cmp = compare_fdm(&plan).expect("comparison runs");

    let wavelet_max = cmp
        .wavelet_mean_err
        .iter()
        .map(|e| e.abs())
        .fold(0.0f64, f64::max);
    assert!(
        wavelet_max <= 1e-9 * cmp.energy0,
        "wavelet mean residual {wavelet_max:.3e} exceeds 1e-9 * energy0"
    );

    let fdm_final = cmp.fdm_mean_err.last().unwrap().abs();
    let wavelet_final = cmp.wavelet_mean_err.last().unwrap().abs();
    assert!(
        fdm_final >= FDM_SEPARATION * wavelet_final.max(f64::MIN_POSITIVE),
        "baseline residual {fdm_final:.3e} not {FDM_SEPARATION:.0e}x above wavelet {wavelet_final:.3e}"
    );

    // Growth trend: quarterly samples of the baseline residual increase.
    let len = cmp.fdm_mean_err.len();
    let quarters: Vec<f64> = (1..=4).map(|q| cmp.fdm_mean_err[q * (len - 1) / 4]).collect();
    for pair in quarters.windows(2) {
        assert!(
            pair[1] > pair[0],
            "baseline residual must grow in trend: {quarters:?}"
        );
    }
    println!(
        "acceptance 6 (scheme comparison, shared paths): PASS \
         (wavelet max {wavelet_max:.2e}, baseline final {fdm_final:.2e}, \
         separation {:.1e}x)",
        fdm_final / wavelet_final.max(f64::MIN_POSITIVE)
    );
}

#[test]
fn acceptance_7_basis_correctness() {
    let n = 32usize;
    for gamma in [4usize, 6, 10] {
        let cc = connection_coefficients(gamma).expect("basis builds");
        let filter = dd_filter(gamma / 2).unwrap();
        let residual = cc.refinement_residual(&filter);
        assert!(
            residual <= REFINEMENT_RESIDUAL,
            "gamma {gamma}: refinement residual {residual:.3e}"
        );
        for k in 0..=cc.max_offset() {
            assert_eq!(cc.theta_prime(-k), -cc.theta_prime(k), "antisymmetry at {k}");
        }
        let moment: f64 = cc.entries().map(|(k, v)| k as f64 * v).sum();
        assert!(
            (moment + 1.0).abs() <= 1e-13,
            "gamma {gamma}: normalization sum k theta'(k) = {moment}"
        );

        let st = diff_stencil(&cc, 5, n).unwrap();
        let f: Vec<f64> = (0..n).map(|i| (2.0 * PI * i as f64 / n as f64).sin()).collect();
        let mut out = vec![0.0; n];
        st.apply_line(&f, &mut out);
        let err = (0..n)
            .map(|i| (out[i] - 2.0 * PI * (2.0 * PI * i as f64 / n as f64).cos()).abs())
            .fold(0.0f64, f64::max);
        let order_bound = (2.0 * PI / n as f64).powi(gamma as i32);
        assert!(
            err <= order_bound,
            "gamma {gamma}: trig error {err:.3e} exceeds (2pi/N)^gamma = {order_bound:.3e}"
        );
        if gamma == 10 {
            assert!(
                err <= TRIG_ABS_GAMMA10,
                "gamma 10: trig error {err:.3e} exceeds {TRIG_ABS_GAMMA10:.0e}"
            );
        }
        println!(
            "  gamma = {gamma:>2}: refinement {residual:.2e}, sin->cos error {err:.2e} \
             (bound {order_bound:.2e})"
        );
    }
    println!("acceptance 7 (basis correctness, gamma in {{4, 6, 10}}): PASS");
}

#[test]
fn acceptance_8_noise_sampler_statistics_and_coupling() {
    let grid = GridSpec::unit_cube(4);
    let n1 = 16usize;
    let dx = 1.0 / 16.0;
    let dt = 0.005;
    let draws = 10_000u64;

    for modes in [1usize, 200] {
        let spec = NoiseSpec::new(1.0, modes, SEED).unwrap();
        for i in [0usize, 7, 13] {
            // Analytic variance straight from the increment formula.
            let var_analytic: f64 = (1..=modes)
                .map(|m| {
                    let mf = m as f64;
                    let c = (2.0 / (mf * mf)).sqrt() / (mf * PI * dx)
                        * ((mf * PI * i as f64 * dx).cos() - (mf * PI * (i + 1) as f64 * dx).cos());
                    dt * c * c
                })
                .sum();
            let (mut sum, mut sum_sq) = (0.0f64, 0.0f64);
            for step in 0..draws {
                let v = sample_increments(&spec, 1, step, dt, &grid).unwrap().values()[i];
                sum += v;
                sum_sq += v * v;
            }
            let mean = sum / draws as f64;
            let var = sum_sq / draws as f64 - mean * mean;
            let se_mean = (var_analytic / draws as f64).sqrt();
            let se_var = var_analytic * (2.0 / draws as f64).sqrt();
            assert!(
                mean.abs() <= 3.0 * se_mean,
                "modes {modes}, cell {i}: mean {mean:.3e} beyond 3 SE {se_mean:.3e}"
            );
            assert!(
                (var - var_analytic).abs() <= 3.0 * se_var,
                "modes {modes}, cell {i}: var {var:.4e} vs analytic {var_analytic:.4e} (3 SE {se_var:.3e})"
            );
        }
        println!("  modes = {modes}: mean and variance within 3 SE at cells {{0, 7, 13}}");
    }

    // Path coupling: aggregate-of-split equals the coarse increment exactly.
    let spec = NoiseSpec::new(1.0, 8, SEED).unwrap();
    let fine: Vec<WienerIncrements> = (0..64)
        .map(|n| sample_increments(&spec, 0, n, 2f64.powi(-11), &grid).unwrap())
        .collect();
    let coarse: Vec<WienerIncrements> = fine
        .chunks(32)
        .map(|c| aggregate_increments(c).unwrap())
        .collect();
    assert_eq!(coarse.len(), 2);
    for (k, agg) in coarse.iter().enumerate() {
        assert_eq!(agg.span(), 2f64.powi(-6));
        for i in 0..n1 {
            let manual: f64 = fine[k * 32..(k + 1) * 32].iter().map(|f| f.values()[i]).sum();
            assert_eq!(agg.values()[i], manual, "coupling must be exact, cell {i}");
        }
    }
    let sig_fine = fine.iter().fold(0u64, |a, f| a ^ f.signature());
    let sig_coarse = coarse.iter().fold(0u64, |a, c| a ^ c.signature());
    assert_eq!(sig_fine, sig_coarse, "path checksums must agree");
    println!("acceptance 8 (noise sampler statistics + exact path coupling): PASS");
}

#[test]
fn acceptance_9_psi_diagnostics() {
    for modes in [1usize, 200] {
        let intervals = 1 << 15;
        let h = 1.0 / intervals as f64;
        let mut acc = psi(0.0, modes) + psi(1.0, modes);
        for i in 1..intervals {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            acc += w * psi(i as f64 * h, modes);
        }
        let integral = acc * h / 3.0;
        let trace = trace_q(modes);
        assert!(
            (integral - trace).abs() <= PSI_QUADRATURE,
            "modes {modes}: Simpson integral {integral} vs trace {trace}"
        );
        println!("  modes = {modes}: integral(Psi) = {integral:.12} matches trace {trace:.12}");
    }
    for i in 0..=10_000 {
        let x = i as f64 / 10_000.0;
        assert!(psi(x, 200) >= 0.0, "Psi must be nonnegative at x = {x}");
    }
    println!("acceptance 9 (Psi trace identity + nonnegativity): PASS");
}

/// Figures-as-properties: a small ensemble's energy band collapses onto the
/// initial energy (flat averaged energy, density concentrated at Upsilon^0).
#[test]
fn acceptance_figures_energy_density_properties() {
    let mut plan = base_plan(ExperimentKind::Ensemble);
    plan.trajectories = 8;
    plan.t_final = 1.0;
    plan.lambda = 0.5;
    let study = stomax::experiments::ensemble_study(&plan).expect("ensemble runs");
    let e0 = study.records[0][0].energy;
    for m in &study.summary.max_energy {
        assert!(
            (m - e0).abs() <= 1e-10 * e0,
            "max energy {m} should concentrate at {e0}"
        );
    }
    let (lo, hi) = study
        .summary
        .stats
        .mean
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &m| {
            (lo.min(m), hi.max(m))
        });
    assert!(hi - lo <= 1e-9 * e0, "averaged energy band {:.3e}", hi - lo);
    assert_eq!(
        study.summary.histogram.centers.len(),
        1,
        "density must collapse to a single bin at the conserved energy"
    );
    println!(
        "figure properties (flat averaged energy, concentrated max-energy density): PASS \
         (band {:.2e})",
        hi - lo
    );
}

/// Smoke check that the paper-scale grid also conserves energy step one;
/// keeps a 32^3 configuration exercised even in the default run.
#[test]
fn paper_scale_single_step_conservation() {
    let grid = GridSpec::unit_cube(5);
    let cfg = StepperConfig::wavelet(0.005, 10);
    let ops = SpatialOps::for_config(grid, &cfg).unwrap();
    let u0 = initial_condition(&grid).unwrap();
    let source = KeyedQWiener {
        spec: NoiseSpec::new(1.0, 200, SEED).unwrap(),
        trajectory: 0,
        dt: cfg.dt,
        grid,
    };
    let (_, records) = stomax::integrator::evolve(&u0, &cfg, &ops, &source, 3, |_, _| {}).unwrap();
    let drift = records.iter().map(|r| r.err.abs()).fold(0.0f64, f64::max);
    assert!(drift <= 1e-12, "paper-scale drift {drift:.3e}");
    let _ = energy(&u0);
}

/// The lambda = 0 trajectory must be bit-identical no matter how the noise
/// is keyed (the stream is never consulted).
#[test]
fn lambda_zero_trajectories_are_seed_independent() {
    let mut plan_a = base_plan(ExperimentKind::Energy);
    plan_a.lambda_list = vec![0.0];
    plan_a.t_final = 0.05;
    let mut plan_b = plan_a.clone();
    plan_b.base_seed = SEED ^ 0xdead_beef;
    let a = energy_study(&plan_a).unwrap();
    let b = energy_study(&plan_b).unwrap();
    assert_eq!(a.series, b.series, "lambda = 0 must ignore noise keys");
}
