use std::time::Instant;
use stomax::diagnostics::energy;
use stomax::experiments::initial_condition;
use stomax::grid::GridSpec;
use stomax::integrator::{evolve, KeyedQWiener, SpatialOps, StepperConfig};
use stomax::noise::NoiseSpec;

fn main() {
    for (level, lambda, steps) in [(4u32, 0.0f64, 400u64), (4, 5.0, 400), (5, 1.4142135623730951, 100)] {
        let grid = GridSpec::unit_cube(level);
        let cfg = StepperConfig::wavelet(0.005, 10);
        let ops = SpatialOps::for_config(grid, &cfg).unwrap();
        let u0 = initial_condition(&grid).unwrap();
        let source = KeyedQWiener {
            spec: NoiseSpec::new(lambda, 200, 42).unwrap(),
            trajectory: 0,
            dt: cfg.dt,
            grid,
        };
        let t0 = Instant::now();
        let (u, records) = evolve(&u0, &cfg, &ops, &source, steps, |_, _| {}).unwrap();
        let dt_wall = t0.elapsed().as_secs_f64();
        let max_err = records.iter().map(|r| r.err.abs()).fold(0.0f64, f64::max);
        let iters: usize = records.iter().map(|r| r.iterations).sum();
        println!(
            "level={} lambda={:.3} steps={}  wall={:.2}s  ({:.1} ms/step, {:.1} iters/step)  max|err|={:.2e}  E_T={:.12}",
            level, lambda, steps, dt_wall, 1e3 * dt_wall / steps as f64,
            iters as f64 / steps as f64, max_err, energy(&u)
        );
    }
}
