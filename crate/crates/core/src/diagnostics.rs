//! Conserved-quantity diagnostics: discrete energy, the symplectic pairing
//! evolved tangent states must conserve, ensemble statistics, and the CSV
//! emitters for all of them.

use crate::error::{CoreError, Result};
use crate::grid::{grid_inner_product, FieldState, KahanSum, TangentState};

/// Per-step diagnostics for one trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticsRecord {
    pub step: u64,
    pub time: f64,
    /// Discrete energy `||E||^2 + ||H||^2`.
    pub energy: f64,
    /// Residual against the initial energy, exactly zero at step zero.
    pub err: f64,
    /// Fixed-point iterations spent on this step (zero for the baseline row).
    pub iterations: usize,
}

/// Symplectic pairing samples along a tangent-pair evolution.
#[derive(Debug, Clone, PartialEq)]
pub struct PairingRecord {
    pub step: u64,
    pub time: f64,
    pub pairing: f64,
}

/// Discrete energy `dx dy dz * sum (|E|^2 + |H|^2)`.
pub fn energy(state: &FieldState) -> f64 {
    grid_inner_product(state, state).expect("state is self-consistent")
}

/// Grid sum of the canonical two-form evaluated on a pair of variations:
/// `dV * sum_cells sum_c (v_Hc w_Ec - v_Ec w_Hc)`.
///
/// The wavelet midpoint update conserves the global sum exactly, so its
/// drift along paired tangent evolutions measures solver error only.
pub fn symplectic_pairing(v: &TangentState, w: &TangentState) -> Result<f64> {
    if v.grid != w.grid {
        return Err(CoreError::ShapeMismatch(
            "pairing requires a common grid".into(),
        ));
    }
    let mut acc = KahanSum::default();
    for c in 0..3 {
        for (vh, we) in v.h(c).as_slice().iter().zip(w.e(c).as_slice()) {
            acc.add(vh * we);
        }
        for (ve, wh) in v.e(c).as_slice().iter().zip(w.h(c).as_slice()) {
            acc.add(-(ve * wh));
        }
    }
    Ok(v.grid.cell_volume() * acc.value())
}

/// Per-time mean/min/max of the energy across trajectories.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleStats {
    pub times: Vec<f64>,
    pub mean: Vec<f64>,
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

/// Raw binned density (no smoothing) of per-trajectory maxima.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub centers: Vec<f64>,
    pub densities: Vec<f64>,
    pub bin_width: f64,
}

impl Histogram {
    /// Bin `values` into `bins` equal-width bins spanning their range.
    ///
    /// A degenerate span (all values equal, the expected outcome for an
    /// energy-conserving scheme) collapses to a single bin centred on the
    /// common value.
    pub fn from_values(values: &[f64], bins: usize) -> Result<Self> {
        if values.is_empty() || bins == 0 {
            return Err(CoreError::MisalignedSeries(
                "histogram needs at least one value and one bin".into(),
            ));
        }
        let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let span = hi - lo;
        if span <= 1e-12 * hi.abs().max(1.0) {
            let width = (1e-12 * hi.abs()).max(1e-15);
            return Ok(Self {
                centers: vec![0.5 * (lo + hi)],
                densities: vec![1.0 / width],
                bin_width: width,
            });
        }
        let width = span / bins as f64;
        let mut counts = vec![0usize; bins];
        for v in values {
            let idx = (((v - lo) / width) as usize).min(bins - 1);
            counts[idx] += 1;
        }
        let total = values.len() as f64;
        Ok(Self {
            centers: (0..bins).map(|b| lo + (b as f64 + 0.5) * width).collect(),
            densities: counts.iter().map(|c| *c as f64 / (total * width)).collect(),
            bin_width: width,
        })
    }
}

/// Summary of an ensemble of trajectory diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleSummary {
    pub stats: EnsembleStats,
    pub max_energy: Vec<f64>,
    pub histogram: Histogram,
}

/// Merge per-trajectory series (in trajectory order) into per-time
/// statistics plus the density of `max_n energy`.
pub fn ensemble_stats(records: &[Vec<DiagnosticsRecord>], bins: usize) -> Result<EnsembleSummary> {
    let first = records
        .first()
        .ok_or_else(|| CoreError::MisalignedSeries("no trajectories".into()))?;
    let len = first.len();
    let times: Vec<f64> = first.iter().map(|r| r.time).collect();
    for (t, series) in records.iter().enumerate() {
        if series.len() != len {
            return Err(CoreError::MisalignedSeries(format!(
                "trajectory {t} has {} records, expected {len}",
                series.len()
            )));
        }
        for (r, expected) in series.iter().zip(&times) {
            if r.time != *expected {
                return Err(CoreError::MisalignedSeries(format!(
                    "trajectory {t} time grid diverges at step {}",
                    r.step
                )));
            }
        }
    }

    let count = records.len() as f64;
    let mut mean = Vec::with_capacity(len);
    let mut min = Vec::with_capacity(len);
    let mut max = Vec::with_capacity(len);
    for idx in 0..len {
        let mut acc = KahanSum::default();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for series in records {
            let e = series[idx].energy;
            acc.add(e);
            lo = lo.min(e);
            hi = hi.max(e);
        }
        mean.push(acc.value() / count);
        min.push(lo);
        max.push(hi);
    }

    let max_energy: Vec<f64> = records
        .iter()
        .map(|series| series.iter().map(|r| r.energy).fold(f64::NEG_INFINITY, f64::max))
        .collect();
    let histogram = Histogram::from_values(&max_energy, bins)?;
    Ok(EnsembleSummary {
        stats: EnsembleStats {
            times,
            mean,
            min,
            max,
        },
        max_energy,
        histogram,
    })
}

/// CSV with columns `n,t,energy,err,iters`.
pub fn trajectory_csv(records: &[DiagnosticsRecord]) -> String {
    let mut out = String::from("n,t,energy,err,iters\n");
    for r in records {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.step, r.time, r.energy, r.err, r.iterations
        ));
    }
    out
}

/// CSV with columns `t,mean,min,max`.
pub fn ensemble_csv(stats: &EnsembleStats) -> String {
    let mut out = String::from("t,mean,min,max\n");
    for i in 0..stats.times.len() {
        out.push_str(&format!(
            "{},{},{},{}\n",
            stats.times[i], stats.mean[i], stats.min[i], stats.max[i]
        ));
    }
    out
}

/// CSV with columns `bin_center,density`.
pub fn histogram_csv(hist: &Histogram) -> String {
    let mut out = String::from("bin_center,density\n");
    for (c, d) in hist.centers.iter().zip(&hist.densities) {
        out.push_str(&format!("{c},{d}\n"));
    }
    out
}

/// CSV with columns `n,t,pairing`.
pub fn pairing_csv(records: &[PairingRecord]) -> String {
    let mut out = String::from("n,t,pairing\n");
    for r in records {
        out.push_str(&format!("{},{},{}\n", r.step, r.time, r.pairing));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{FieldState, GridSpec, Lattice};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn state_with(grid: GridSpec, mut fill: impl FnMut(usize, f64, f64, f64) -> f64) -> FieldState {
        let mut s = FieldState::zeros(grid);
        for c in 0..6 {
            *s.component_mut(c) = Lattice::from_fn(&grid, |x, y, z| fill(c, x, y, z));
        }
        s
    }

    #[test]
    fn energy_of_zero_state_is_zero() {
        let s = FieldState::zeros(GridSpec::unit_cube(3));
        assert_eq!(energy(&s), 0.0);
    }

    #[test]
    fn energy_is_positive_definite() {
        let grid = GridSpec::unit_cube(3);
        let s = state_with(grid, |c, x, y, _| if c == 2 { x - y } else { 0.0 });
        assert!(energy(&s) > 0.0);
    }

    #[test]
    fn pairing_of_state_with_itself_vanishes() {
        let grid = GridSpec::unit_cube(3);
        let v = state_with(grid, |c, x, y, z| (c as f64 + 1.0) * (x + 2.0 * y - z));
        assert_eq!(symplectic_pairing(&v, &v).unwrap(), 0.0);
    }

    #[test]
    fn pairing_of_unit_cells_gives_cell_volume() {
        let grid = GridSpec::unit_cube(3);
        let mut v = FieldState::zeros(grid);
        let mut w = FieldState::zeros(grid);
        // v = unit H1 at one cell, w = unit E1 at the same cell
        v.component_mut(3).set(1, 2, 3, 1.0);
        w.component_mut(0).set(1, 2, 3, 1.0);
        assert_abs_diff_eq!(
            symplectic_pairing(&v, &w).unwrap(),
            grid.cell_volume(),
            epsilon = 1e-18
        );
        assert_abs_diff_eq!(
            symplectic_pairing(&w, &v).unwrap(),
            -grid.cell_volume(),
            epsilon = 1e-18
        );
    }

    #[test]
    fn pairing_rejects_mismatched_grids() {
        let v = FieldState::zeros(GridSpec::unit_cube(3));
        let w = FieldState::zeros(GridSpec::unit_cube(4));
        assert!(symplectic_pairing(&v, &w).is_err());
    }

    #[test]
    fn single_trajectory_mean_is_that_trajectory() {
        let series = vec![vec![
            DiagnosticsRecord {
                step: 0,
                time: 0.0,
                energy: 6.0,
                err: 0.0,
                iterations: 0,
            },
            DiagnosticsRecord {
                step: 1,
                time: 0.5,
                energy: 6.25,
                err: 0.25,
                iterations: 3,
            },
        ]];
        let summary = ensemble_stats(&series, 4).unwrap();
        assert_eq!(summary.stats.mean, vec![6.0, 6.25]);
        assert_eq!(summary.stats.min, summary.stats.max);
        assert_eq!(summary.max_energy, vec![6.25]);
    }

    #[test]
    fn misaligned_series_detected() {
        let a = vec![DiagnosticsRecord {
            step: 0,
            time: 0.0,
            energy: 1.0,
            err: 0.0,
            iterations: 0,
        }];
        let b: Vec<DiagnosticsRecord> = vec![];
        assert!(ensemble_stats(&[a, b], 4).is_err());
    }

    #[test]
    fn histogram_of_identical_values_collapses_to_one_bin() {
        let h = Histogram::from_values(&[6.0, 6.0, 6.0 + 1e-14], 30).unwrap();
        assert_eq!(h.centers.len(), 1);
        assert!((h.centers[0] - 6.0).abs() < 1e-12);
        // density integrates to one over the single bin
        assert_abs_diff_eq!(h.densities[0] * h.bin_width, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn histogram_density_normalizes() {
        let values: Vec<f64> = (0..100).map(|i| i as f64 / 10.0).collect();
        let h = Histogram::from_values(&values, 30).unwrap();
        let mass: f64 = h.densities.iter().map(|d| d * h.bin_width).sum();
        assert_abs_diff_eq!(mass, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn csv_emitters_have_stable_headers() {
        let rec = DiagnosticsRecord {
            step: 1,
            time: 0.005,
            energy: 6.0,
            err: 1e-12,
            iterations: 14,
        };
        let csv = trajectory_csv(&[rec]);
        assert!(csv.starts_with("n,t,energy,err,iters\n"));
        assert!(csv.contains("1,0.005,6,"));
        let hist = Histogram::from_values(&[1.0, 2.0, 3.0], 2).unwrap();
        assert!(histogram_csv(&hist).starts_with("bin_center,density\n"));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        /// Bilinearity and antisymmetry of the pairing on random states.
        #[test]
        fn prop_pairing_antisymmetric_bilinear(seed in 0u64..500, alpha in -2.0f64..2.0) {
            let grid = GridSpec::unit_cube(2);
            let mut s = seed.wrapping_mul(0x9e3779b97f4a7c15) | 1;
            let mut next = move || {
                s ^= s << 13; s ^= s >> 7; s ^= s << 17;
                (s >> 11) as f64 / (1u64 << 53) as f64 - 0.5
            };
            let v = state_with(grid, |_, _, _, _| next());
            let w = state_with(grid, |_, _, _, _| next());
            let u = state_with(grid, |_, _, _, _| next());
            let pvw = symplectic_pairing(&v, &w).unwrap();
            let pwv = symplectic_pairing(&w, &v).unwrap();
            prop_assert!((pvw + pwv).abs() <= 1e-13 * pvw.abs().max(1.0));
            // linearity in the first slot: pairing(u + alpha v, w)
            let combo = u.scaled_add(alpha, &v);
            let lhs = symplectic_pairing(&combo, &w).unwrap();
            let rhs = symplectic_pairing(&u, &w).unwrap() + alpha * pvw;
            prop_assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(1.0));
        }
    }
}
