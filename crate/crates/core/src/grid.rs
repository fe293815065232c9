//! Periodic collocation grid, scalar lattices, the six-component field
//! state, and the discrete spatial operators (axis derivatives, curl, grid
//! inner product).
//!
//! Lattices are stored i-fastest (`index = i + n1*(j + n2*k)`), but every
//! operator is defined index-wise so the layout never leaks into semantics.
//! All reductions run in one fixed traversal order with compensated
//! summation, so diagnostics are bit-reproducible regardless of how many
//! worker threads drive the trajectories.

use std::io::Write;

use crate::error::{CoreError, Result};
use crate::wavelet::CirculantStencil;

/// One periodic axis: `extent` unit cells refined to dyadic `level`, giving
/// `extent * 2^level` collocation points with spacing `2^-level`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AxisSpec {
    pub extent: u32,
    pub level: u32,
}

impl AxisSpec {
    pub fn new(extent: u32, level: u32) -> Result<Self> {
        if extent == 0 {
            return Err(CoreError::InvalidAxisExtent(extent));
        }
        Ok(Self { extent, level })
    }

    pub fn points(&self) -> usize {
        (self.extent as usize) << self.level
    }

    pub fn spacing(&self) -> f64 {
        (-(self.level as f64)).exp2()
    }

    /// Collocation coordinate of point `i`.
    pub fn coord(&self, i: usize) -> f64 {
        i as f64 * self.spacing()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::X, Axis::Y, Axis::Z];

    pub fn index(self) -> usize {
        match self {
            Axis::X => 0,
            Axis::Y => 1,
            Axis::Z => 2,
        }
    }
}

/// Periodic collocation grid for the three spatial axes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridSpec {
    axes: [AxisSpec; 3],
}

impl GridSpec {
    pub fn new(axes: [AxisSpec; 3]) -> Self {
        Self { axes }
    }

    /// Unit cube `[0,1]^3` at a common dyadic level (`2^level` points per axis).
    pub fn unit_cube(level: u32) -> Self {
        let axis = AxisSpec { extent: 1, level };
        Self { axes: [axis; 3] }
    }

    pub fn axis(&self, axis: Axis) -> AxisSpec {
        self.axes[axis.index()]
    }

    pub fn shape(&self) -> [usize; 3] {
        [
            self.axes[0].points(),
            self.axes[1].points(),
            self.axes[2].points(),
        ]
    }

    pub fn cells(&self) -> usize {
        self.shape().iter().product()
    }

    /// Volume element `dx dy dz`.
    pub fn cell_volume(&self) -> f64 {
        self.axes.iter().map(|a| a.spacing()).product()
    }
}

/// Scalar field sampled on a `GridSpec`, stored i-fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct Lattice {
    shape: [usize; 3],
    data: Vec<f64>,
}

impl Lattice {
    pub fn zeros(grid: &GridSpec) -> Self {
        let shape = grid.shape();
        Self {
            shape,
            data: vec![0.0; shape.iter().product()],
        }
    }

    /// Sample `f(x, y, z)` at the collocation points.
    pub fn from_fn(grid: &GridSpec, mut f: impl FnMut(f64, f64, f64) -> f64) -> Self {
        let [n1, n2, n3] = grid.shape();
        let (ax, ay, az) = (
            grid.axis(Axis::X),
            grid.axis(Axis::Y),
            grid.axis(Axis::Z),
        );
        let mut data = Vec::with_capacity(n1 * n2 * n3);
        for k in 0..n3 {
            let z = az.coord(k);
            for j in 0..n2 {
                let y = ay.coord(j);
                for i in 0..n1 {
                    data.push(f(ax.coord(i), y, z));
                }
            }
        }
        Self {
            shape: [n1, n2, n3],
            data,
        }
    }

    pub fn shape(&self) -> [usize; 3] {
        self.shape
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize, k: usize) -> f64 {
        self.data[i + self.shape[0] * (j + self.shape[1] * k)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, k: usize, v: f64) {
        self.data[i + self.shape[0] * (j + self.shape[1] * k)] = v;
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn max_abs_diff(&self, other: &Lattice) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()))
    }
}

fn check_same_shape(a: [usize; 3], b: [usize; 3], what: &str) -> Result<()> {
    if a != b {
        return Err(CoreError::ShapeMismatch(format!(
            "{what}: {a:?} vs {b:?}"
        )));
    }
    Ok(())
}

/// Apply a differentiation stencil along one axis of a lattice:
/// `out(i,j,k) = sum_d c_d * in(..., idx - d mod n, ...)` on the chosen axis.
///
/// Equivalent to the Kronecker forms `B (x) I (x) I`, `I (x) B (x) I`,
/// `I (x) I (x) B` acting on the vectorized field.
pub fn apply_diff(input: &Lattice, axis: Axis, stencil: &CirculantStencil) -> Result<Lattice> {
    let [n1, n2, n3] = input.shape();
    let n = [n1, n2, n3][axis.index()];
    if stencil.size() != n {
        return Err(CoreError::ShapeMismatch(format!(
            "stencil size {} does not match axis extent {n}",
            stencil.size()
        )));
    }
    let mut out = Lattice {
        shape: input.shape(),
        data: vec![0.0; n1 * n2 * n3],
    };
    let src = input.as_slice();
    let b = stencil.half_bandwidth() as i64;

    match axis {
        // x lines are contiguous: apply per line.
        Axis::X => {
            let mut line_out = vec![0.0f64; n1];
            for base in (0..n1 * n2 * n3).step_by(n1) {
                stencil.apply_line(&src[base..base + n1], &mut line_out);
                out.data[base..base + n1].copy_from_slice(&line_out);
            }
        }
        // y: for fixed (d, j, k) the i-run is contiguous, so accumulate
        // row-against-row with wrapped row indices.
        Axis::Y => {
            for d in -b..=b {
                let c = stencil.coefficient(d);
                if c == 0.0 {
                    continue;
                }
                for k in 0..n3 {
                    let plane = k * n1 * n2;
                    for j in 0..n2 {
                        let jn = (j as i64 - d).rem_euclid(n2 as i64) as usize;
                        let dst = plane + j * n1;
                        let srd = plane + jn * n1;
                        for (o, i) in out.data[dst..dst + n1]
                            .iter_mut()
                            .zip(&src[srd..srd + n1])
                        {
                            *o += c * i;
                        }
                    }
                }
            }
        }
        // z: whole (i,j) planes are contiguous.
        Axis::Z => {
            let plane = n1 * n2;
            for d in -b..=b {
                let c = stencil.coefficient(d);
                if c == 0.0 {
                    continue;
                }
                for k in 0..n3 {
                    let kn = (k as i64 - d).rem_euclid(n3 as i64) as usize;
                    let dst = k * plane;
                    let srd = kn * plane;
                    for (o, i) in out.data[dst..dst + plane]
                        .iter_mut()
                        .zip(&src[srd..srd + plane])
                    {
                        *o += c * i;
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Per-axis differentiation stencils for one grid.
#[derive(Debug, Clone)]
pub struct AxisStencils {
    pub x: CirculantStencil,
    pub y: CirculantStencil,
    pub z: CirculantStencil,
}

impl AxisStencils {
    pub fn get(&self, axis: Axis) -> &CirculantStencil {
        match axis {
            Axis::X => &self.x,
            Axis::Y => &self.y,
            Axis::Z => &self.z,
        }
    }
}

/// Discrete curl of a three-component field:
/// `(A2 F3 - A3 F2, A3 F1 - A1 F3, A1 F2 - A2 F1)`.
pub fn discrete_curl(
    fields: [&Lattice; 3],
    stencils: &AxisStencils,
) -> Result<[Lattice; 3]> {
    let shape = fields[0].shape();
    check_same_shape(shape, fields[1].shape(), "curl components")?;
    check_same_shape(shape, fields[2].shape(), "curl components")?;

    let dy_f3 = apply_diff(fields[2], Axis::Y, &stencils.y)?;
    let dz_f2 = apply_diff(fields[1], Axis::Z, &stencils.z)?;
    let dz_f1 = apply_diff(fields[0], Axis::Z, &stencils.z)?;
    let dx_f3 = apply_diff(fields[2], Axis::X, &stencils.x)?;
    let dx_f2 = apply_diff(fields[1], Axis::X, &stencils.x)?;
    let dy_f1 = apply_diff(fields[0], Axis::Y, &stencils.y)?;

    let sub = |a: Lattice, b: &Lattice| {
        let mut out = a;
        for (o, v) in out.data.iter_mut().zip(&b.data) {
            *o -= v;
        }
        out
    };
    Ok([sub(dy_f3, &dz_f2), sub(dz_f1, &dx_f3), sub(dx_f2, &dy_f1)])
}

/// Compensated (Kahan) accumulator used for all deterministic reductions.
#[derive(Debug, Clone, Copy, Default)]
pub struct KahanSum {
    sum: f64,
    compensation: f64,
}

impl KahanSum {
    pub fn add(&mut self, value: f64) {
        let y = value - self.compensation;
        let t = self.sum + y;
        self.compensation = (t - self.sum) - y;
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum
    }
}

/// Six-component electromagnetic state sampled on one grid.
///
/// Components are ordered `E1, E2, E3, H1, H2, H3`.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldState {
    pub grid: GridSpec,
    pub time: f64,
    components: [Lattice; 6],
}

/// A variation of the field state; the linearized scheme evolves it with the
/// same update map as the state itself.
pub type TangentState = FieldState;

impl FieldState {
    pub fn zeros(grid: GridSpec) -> Self {
        Self {
            grid,
            time: 0.0,
            components: std::array::from_fn(|_| Lattice::zeros(&grid)),
        }
    }

    pub fn from_components(grid: GridSpec, time: f64, components: [Lattice; 6]) -> Result<Self> {
        for c in &components {
            check_same_shape(c.shape(), grid.shape(), "field component")?;
        }
        Ok(Self {
            grid,
            time,
            components,
        })
    }

    pub fn e(&self, c: usize) -> &Lattice {
        &self.components[c]
    }

    pub fn h(&self, c: usize) -> &Lattice {
        &self.components[3 + c]
    }

    pub fn component(&self, idx: usize) -> &Lattice {
        &self.components[idx]
    }

    pub fn component_mut(&mut self, idx: usize) -> &mut Lattice {
        &mut self.components[idx]
    }

    pub fn components(&self) -> &[Lattice; 6] {
        &self.components
    }

    pub fn components_mut(&mut self) -> &mut [Lattice; 6] {
        &mut self.components
    }

    pub fn is_finite(&self) -> bool {
        self.components.iter().all(|c| c.is_finite())
    }

    /// Max-norm of the componentwise difference.
    pub fn max_abs_diff(&self, other: &FieldState) -> f64 {
        self.components
            .iter()
            .zip(&other.components)
            .fold(0.0f64, |m, (a, b)| m.max(a.max_abs_diff(b)))
    }

    /// Cellwise midpoint `(self + other) / 2`.
    pub fn midpoint(&self, other: &FieldState) -> FieldState {
        let mut out = self.clone();
        for (c, oc) in out.components.iter_mut().zip(&other.components) {
            for (a, b) in c.data.iter_mut().zip(&oc.data) {
                *a = 0.5 * (*a + b);
            }
        }
        out
    }

    /// `self + scale * other`, componentwise.
    pub fn scaled_add(&self, scale: f64, other: &FieldState) -> FieldState {
        let mut out = self.clone();
        for (c, oc) in out.components.iter_mut().zip(&other.components) {
            for (a, b) in c.data.iter_mut().zip(&oc.data) {
                *a += scale * b;
            }
        }
        out
    }

    /// Write a raw little-endian snapshot: magic, shape, spacings, time, then
    /// the six components in storage order. Layout documented in the README.
    pub fn write_snapshot<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        w.write_all(b"SMAXSNP1")?;
        for n in self.grid.shape() {
            w.write_all(&(n as u32).to_le_bytes())?;
        }
        for axis in Axis::ALL {
            w.write_all(&self.grid.axis(axis).spacing().to_le_bytes())?;
        }
        w.write_all(&self.time.to_le_bytes())?;
        for c in &self.components {
            for v in c.as_slice() {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    }
}

/// Weighted inner product `dx dy dz * sum_cells sum_components a*b`,
/// accumulated in one fixed traversal order.
pub fn grid_inner_product(a: &FieldState, b: &FieldState) -> Result<f64> {
    if a.grid != b.grid {
        return Err(CoreError::ShapeMismatch(
            "inner product requires a common grid".into(),
        ));
    }
    let mut acc = KahanSum::default();
    for (ca, cb) in a.components.iter().zip(&b.components) {
        for (x, y) in ca.data.iter().zip(&cb.data) {
            acc.add(x * y);
        }
    }
    Ok(a.grid.cell_volume() * acc.value())
}
