//! Truncated Q-Wiener increments on the collocation grid.
//!
//! The covariance operator has eigenpairs `eta_m = 1/m^2`,
//! `e_m(x) = sqrt(2) sin(m pi x)` on `x in [0,1]`, and the noise varies along
//! the x axis only (constant in y and z). A step increment at cell `i` is
//!
//! ```text
//! dW_i = (1/dx) * sum_m sqrt(2 eta_m)/(m pi)
//!        * [cos(m pi x_i) - cos(m pi x_{i+1})] * (beta_m(t_{n+1}) - beta_m(t_n))
//! ```
//!
//! with `beta_m` increments equal to `sqrt(dt)` times standard normals.
//!
//! # Stream contract
//!
//! Gaussians are a pure function of `(base_seed, trajectory, step, mode)`:
//! the ChaCha12 key is `base_seed || trajectory || "stomax-qwiener-1"`, the
//! stream number is the step index, and mode `m` reads the 64-bit word at
//! position `2(m-1)`. The word maps to a uniform
//! `u = ((w >> 11) + 0.5) * 2^-53` and then through the rational inverse
//! normal CDF below. Any port that reproduces these four steps reproduces
//! the trajectories bit for bit.

use rand_chacha::ChaCha12Rng;
use rand_core::{RngCore, SeedableRng};

use crate::error::{CoreError, Result};
use crate::grid::{Axis, GridSpec};

/// Parameters of the truncated Q-Wiener process.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    /// Noise size multiplier applied by the stepper, not by the sampler.
    pub lambda: f64,
    /// Number of retained eigenmodes.
    pub modes: usize,
    /// Global seed from which every stream is keyed.
    pub base_seed: u64,
}

impl NoiseSpec {
    pub fn new(lambda: f64, modes: usize, base_seed: u64) -> Result<Self> {
        if modes == 0 {
            return Err(CoreError::InvalidTruncation);
        }
        if lambda < 0.0 || lambda.is_nan() {
            return Err(CoreError::InvalidPlan(format!(
                "lambda must be >= 0, got {lambda}"
            )));
        }
        Ok(Self {
            lambda,
            modes,
            base_seed,
        })
    }
}

/// Sampled per-cell Wiener increments for a contiguous run of fine steps.
///
/// `values[i]` is the increment for every cell with x-index `i`. After
/// aggregation the record spans several fine steps; `span()` is the total
/// time covered. The signature is an order-insensitive XOR fold used to
/// detect coupling mistakes when coarse solvers consume aggregated paths.
#[derive(Debug, Clone, PartialEq)]
pub struct WienerIncrements {
    first_step: u64,
    step_count: u64,
    step_dt: f64,
    values: Vec<f64>,
    signature: u64,
}

impl WienerIncrements {
    pub fn first_step(&self) -> u64 {
        self.first_step
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    /// Time-step of the underlying fine sampling.
    pub fn step_dt(&self) -> f64 {
        self.step_dt
    }

    /// Total time span covered by this record.
    pub fn span(&self) -> f64 {
        self.step_count as f64 * self.step_dt
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn signature(&self) -> u64 {
        self.signature
    }

    /// All-zero increments (used when the noise amplitude is zero).
    pub fn zeros(step: u64, dt: f64, cells: usize) -> Self {
        Self::from_raw_parts(step, 1, dt, vec![0.0; cells])
    }

    /// Low-level constructor from explicit per-cell values; the signature is
    /// derived from the payload. Mainly useful for tests and replaying
    /// externally stored paths.
    pub fn from_raw_parts(first_step: u64, step_count: u64, step_dt: f64, values: Vec<f64>) -> Self {
        let signature = signature_of(first_step, &values);
        Self {
            first_step,
            step_count,
            step_dt,
            values,
            signature,
        }
    }
}

fn signature_of(step: u64, values: &[f64]) -> u64 {
    let mut h = mix64(step ^ 0x71ee_7ab5_0c57_b1d3);
    for v in values {
        h ^= mix64(v.to_bits().wrapping_add(h.rotate_left(17)));
    }
    h
}

fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn stream_rng(spec: &NoiseSpec, trajectory: u64, step: u64) -> ChaCha12Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&spec.base_seed.to_le_bytes());
    key[8..16].copy_from_slice(&trajectory.to_le_bytes());
    key[16..].copy_from_slice(b"stomax-qwiener-1");
    let mut rng = ChaCha12Rng::from_seed(key);
    rng.set_stream(step);
    rng
}

/// Standard normal draw for `(spec.base_seed, trajectory, step, mode)`.
/// `mode` is 1-based, matching the eigenmode index.
pub fn keyed_gaussian(spec: &NoiseSpec, trajectory: u64, step: u64, mode: usize) -> f64 {
    let mut rng = stream_rng(spec, trajectory, step);
    rng.set_word_pos(2 * (mode as u128 - 1));
    let w = rng.next_u64();
    let u = ((w >> 11) as f64 + 0.5) * (-53f64).exp2();
    standard_normal_quantile(u)
}

/// Geometry factors `sqrt(2 eta_m)/(m pi dx) * [cos(m pi x_i) - cos(m pi x_{i+1})]`
/// for `m = 1..=modes`, `i = 0..n1`, flattened mode-major.
fn cell_mode_coefficients(modes: usize, n1: usize, dx: f64) -> Vec<f64> {
    let mut coeff = Vec::with_capacity(modes * n1);
    for m in 1..=modes {
        let mf = m as f64;
        let amp = (2.0 / (mf * mf)).sqrt() / (mf * std::f64::consts::PI * dx);
        for i in 0..n1 {
            let a = mf * std::f64::consts::PI * (i as f64) * dx;
            let b = mf * std::f64::consts::PI * ((i + 1) as f64) * dx;
            coeff.push(amp * (a.cos() - b.cos()));
        }
    }
    coeff
}

/// Combine per-mode Brownian increments into per-cell values.
///
/// `brownian[m-1]` is `beta_m(t_{n+1}) - beta_m(t_n)`; for sampling this is
/// `sqrt(dt) * g_m`. Exposed separately so the arithmetic can be tested with
/// hand-chosen Gaussians.
pub fn combine_increments(modes: usize, n1: usize, dx: f64, brownian: &[f64]) -> Vec<f64> {
    assert_eq!(brownian.len(), modes);
    let coeff = cell_mode_coefficients(modes, n1, dx);
    let mut values = vec![0.0; n1];
    for m in 0..modes {
        let db = brownian[m];
        for (v, c) in values.iter_mut().zip(&coeff[m * n1..(m + 1) * n1]) {
            *v += c * db;
        }
    }
    values
}

/// Sample the increments for one step of one trajectory.
///
/// The grid must have unit x-extent since the eigenbasis lives on `[0,1]`.
pub fn sample_increments(
    spec: &NoiseSpec,
    trajectory: u64,
    step: u64,
    dt: f64,
    grid: &GridSpec,
) -> Result<WienerIncrements> {
    if spec.modes == 0 {
        return Err(CoreError::InvalidTruncation);
    }
    if dt <= 0.0 {
        return Err(CoreError::InvalidTimeStep(dt));
    }
    let x_axis = grid.axis(Axis::X);
    if x_axis.extent != 1 {
        return Err(CoreError::NonUnitNoiseDomain(x_axis.extent));
    }
    let n1 = x_axis.points();
    let dx = x_axis.spacing();
    let sqrt_dt = dt.sqrt();

    let mut rng = stream_rng(spec, trajectory, step);
    let mut brownian = Vec::with_capacity(spec.modes);
    for mode in 1..=spec.modes {
        rng.set_word_pos(2 * (mode as u128 - 1));
        let w = rng.next_u64();
        let u = ((w >> 11) as f64 + 0.5) * (-53f64).exp2();
        brownian.push(sqrt_dt * standard_normal_quantile(u));
    }
    let values = combine_increments(spec.modes, n1, dx, &brownian);
    let signature = signature_of(step, &values);
    Ok(WienerIncrements {
        first_step: step,
        step_count: 1,
        step_dt: dt,
        values,
        signature,
    })
}

/// Sum contiguous fine increments into the increment a coarser stepper
/// consumes. This is exactly the Brownian path coupling: the coarse
/// increment equals the sum of its fine constituents, bit for bit.
pub fn aggregate_increments(fine: &[WienerIncrements]) -> Result<WienerIncrements> {
    let first = fine.first().ok_or(CoreError::EmptyIncrementSequence)?;
    let mut values = first.values.clone();
    let mut signature = first.signature;
    let mut expected = first.first_step + first.step_count;
    let mut step_count = first.step_count;
    for inc in &fine[1..] {
        if inc.first_step != expected {
            return Err(CoreError::IncrementGap {
                expected,
                found: inc.first_step,
            });
        }
        if inc.step_dt != first.step_dt || inc.values.len() != values.len() {
            return Err(CoreError::CouplingMismatch(
                "aggregated increments must share dt and cell count".into(),
            ));
        }
        for (v, w) in values.iter_mut().zip(&inc.values) {
            *v += w;
        }
        signature ^= inc.signature;
        expected += inc.step_count;
        step_count += inc.step_count;
    }
    Ok(WienerIncrements {
        first_step: first.first_step,
        step_count,
        step_dt: first.step_dt,
        values,
        signature,
    })
}

/// `Psi(x) = sum_{m<=modes} 2 eta_m sin^2(m pi x)`, the trace density that
/// makes the Ito and Stratonovich descriptions agree.
pub fn psi(x: f64, modes: usize) -> f64 {
    let mut acc = 0.0;
    for m in 1..=modes {
        let mf = m as f64;
        let s = (mf * std::f64::consts::PI * x).sin();
        acc += 2.0 / (mf * mf) * s * s;
    }
    acc
}

/// Trace of the truncated covariance operator: `sum_{m<=modes} 1/m^2`.
pub fn trace_q(modes: usize) -> f64 {
    (1..=modes).map(|m| 1.0 / (m as f64 * m as f64)).sum()
}

/// Rational approximation to the inverse standard normal CDF (Wichura's
/// PPND16 algorithm), accurate to about 1e-16 relative error. Pinned here,
/// rather than taken from a crate, so the stream contract can never drift.
pub fn standard_normal_quantile(p: f64) -> f64 {
    assert!(p > 0.0 && p < 1.0, "quantile requires p in (0,1)");
    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180625 - q * q;
        return q * poly(&A, r) / poly(&B, r);
    }
    let r = if q < 0.0 { p } else { 1.0 - p };
    let mut r = (-r.ln()).sqrt();
    let value = if r <= 5.0 {
        r -= 1.6;
        poly(&C, r) / poly(&D, r)
    } else {
        r -= 5.0;
        poly(&E, r) / poly(&F, r)
    };
    if q < 0.0 {
        -value
    } else {
        value
    }
}

fn poly(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c)
}

const A: [f64; 8] = [
    3.387_132_872_796_366_5e0,
    1.331_416_678_917_843_8e2,
    1.971_590_950_306_551_3e3,
    1.373_169_376_550_946e4,
    4.592_195_393_154_987e4,
    6.726_577_092_700_87e4,
    3.343_057_558_358_813e4,
    2.509_080_928_730_122_7e3,
];
const B: [f64; 8] = [
    1.0,
    4.231_333_070_160_091e1,
    6.871_870_074_920_579e2,
    5.394_196_021_424_751e3,
    2.121_379_430_158_659_7e4,
    3.930_789_580_009_271e4,
    2.872_908_573_572_194_3e4,
    5.226_495_278_852_545e3,
];
const C: [f64; 8] = [
    1.423_437_110_749_683_5e0,
    4.630_337_846_156_546e0,
    5.769_497_221_460_691e0,
    3.647_848_324_763_204_5e0,
    1.270_458_252_452_368_4e0,
    2.417_807_251_774_506e-1,
    2.272_384_498_926_918_4e-2,
    7.745_450_142_783_414e-4,
];
const D: [f64; 8] = [
    1.0,
    2.053_191_626_637_759e0,
    1.676_384_830_183_803_8e0,
    6.897_673_349_851e-1,
    1.481_039_764_274_800_8e-1,
    1.519_866_656_361_645_7e-2,
    5.475_938_084_995_345e-4,
    1.050_750_071_644_416_9e-9,
];
const E: [f64; 8] = [
    6.657_904_643_501_103e0,
    5.463_784_911_164_114e0,
    1.784_826_539_917_291_3e0,
    2.965_605_718_285_048_7e-1,
    2.653_218_952_657_612_4e-2,
    1.242_660_947_388_078_4e-3,
    2.711_555_568_743_487_6e-5,
    2.010_334_399_292_288_1e-7,
];
const F: [f64; 8] = [
    1.0,
    5.998_322_065_558_88e-1,
    1.369_298_809_227_358e-1,
    1.487_536_129_085_061_5e-2,
    7.868_691_311_456_133e-4,
    1.846_318_317_510_054_8e-5,
    1.421_511_758_316_446e-7,
    2.044_263_103_389_939_7e-15,
];
