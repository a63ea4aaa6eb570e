#![allow(dead_code)]

use std::sync::Arc;

use laguerre_flow::geometry::{Domain, Mode, Point};
use laguerre_flow::{EnergyModel, ParticleSystem};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `n` points in the box `[lo, hi]^2`, pairwise at least `gap` apart.
pub fn spread_points(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64, gap: f64) -> Vec<Point> {
    let mut pts: Vec<Point> = Vec::with_capacity(n);
    while pts.len() < n {
        let p = Point::new(rng.gen_range(lo..hi), rng.gen_range(lo..hi));
        if pts.iter().all(|q| q.distance(p) >= gap) {
            pts.push(p);
        }
    }
    pts
}

pub const GAMMAS: [f64; 3] = [1.5, 2.0, 4.0];

/// A small random particle system on the unit square.
pub fn random_system(rng: &mut ChaCha8Rng, n: usize, mode: Mode, gamma: f64) -> ParticleSystem {
    let positions = spread_points(rng, n, 0.1, 0.9, 0.08);
    let total = match mode {
        Mode::Full => rng.gen_range(0.5..2.0),
        Mode::Clipped => rng.gen_range(0.2..0.8),
    };
    let raw: Vec<f64> = (0..n).map(|_| rng.gen_range(0.5..1.5)).collect();
    let sum: f64 = raw.iter().sum();
    let masses = raw.iter().map(|m| m * total / sum).collect();
    let epsilon = rng.gen_range(0.05..0.3);
    ParticleSystem::new(
        Arc::new(Domain::unit_square()),
        positions,
        masses,
        epsilon,
        mode,
        EnergyModel::power(gamma).unwrap(),
    )
    .unwrap()
}

/// Index of the cell containing `x` by direct comparison of power distances.
pub fn owner(x: Point, positions: &[Point], weights: &[f64], mode: Mode) -> Option<usize> {
    let mut best = None;
    let mut best_val = f64::INFINITY;
    for (i, (&p, &w)) in positions.iter().zip(weights).enumerate() {
        let v = (x - p).norm_squared() - w;
        if v < best_val {
            best_val = v;
            best = Some(i);
        }
    }
    match mode {
        Mode::Full => best,
        Mode::Clipped => best.filter(|_| best_val <= 0.0),
    }
}

pub fn random_weights(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(lo..hi)).collect()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Standard scores of exact cell moments (area, first moments, second moment
/// about the particle) against a plain Monte-Carlo estimate with `samples`
/// uniform draws over the unit square. One entry per cell and moment.
pub fn moment_z_scores(rng: &mut ChaCha8Rng, n: usize, mode: Mode, samples: usize) -> Vec<f64> {
    let domain = Domain::unit_square();
    let positions = spread_points(rng, n, 0.05, 0.95, 0.05);
    let weights = match mode {
        Mode::Full => random_weights(rng, n, 0.0, 0.02),
        Mode::Clipped => random_weights(rng, n, 0.01, 0.08),
    };
    let tess = laguerre_flow::build_tessellation(&domain, &positions, &weights, mode).unwrap();

    // per cell: sums of f and f^2 for f in {1, x, y, |x - x_i|^2}
    let mut sums = vec![[0.0f64; 4]; n];
    let mut squares = vec![[0.0f64; 4]; n];
    for _ in 0..samples {
        let x = Point::new(rng.gen::<f64>(), rng.gen::<f64>());
        if let Some(i) = owner(x, &positions, &weights, mode) {
            let f = [1.0, x.x, x.y, (x - positions[i]).norm_squared()];
            for k in 0..4 {
                sums[i][k] += f[k];
                squares[i][k] += f[k] * f[k];
            }
        }
    }
    let s = samples as f64;
    let mut z = Vec::new();
    for (i, cell) in tess.cells.iter().enumerate() {
        let b = cell.barycenter.unwrap_or(Point::ORIGIN);
        let exact = [cell.area, cell.area * b.x, cell.area * b.y, cell.second_moment];
        for k in 0..4 {
            let mean = sums[i][k] / s;
            let var = (squares[i][k] / s - mean * mean).max(0.0);
            let se = (var / s).sqrt();
            if se == 0.0 {
                // empty in both views
                assert!(exact[k].abs() < 1e-12, "cell {i} has moment {} but no samples", exact[k]);
                continue;
            }
            z.push((exact[k] - mean) / se);
        }
    }
    z
}

/// Largest entry of `|J - J_fd|`, relative to the largest entry of `J`, where
/// `J_fd` is the central difference of the areas in the weights.
pub fn jacobian_error(rng: &mut ChaCha8Rng, n: usize, mode: Mode) -> f64 {
    let domain = Domain::unit_square();
    let positions = spread_points(rng, n, 0.1, 0.9, 0.08);
    let weights = match mode {
        Mode::Full => random_weights(rng, n, 0.0, 0.02),
        Mode::Clipped => random_weights(rng, n, 0.01, 0.06),
    };
    let tess = laguerre_flow::build_tessellation(&domain, &positions, &weights, mode).unwrap();
    let jac = laguerre_flow::geometry::area_jacobian(&tess).unwrap().to_dense();
    let h = 1e-7;
    let mut worst: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for j in 0..n {
        let mut up = weights.clone();
        let mut down = weights.clone();
        up[j] += h;
        down[j] -= h;
        let a_up = laguerre_flow::build_tessellation(&domain, &positions, &up, mode).unwrap().areas();
        let a_down = laguerre_flow::build_tessellation(&domain, &positions, &down, mode).unwrap().areas();
        for i in 0..n {
            let fd = (a_up[i] - a_down[i]) / (2.0 * h);
            worst = worst.max((fd - jac[i][j]).abs());
            scale = scale.max(jac[i][j].abs());
        }
    }
    worst / scale
}

/// `|L_i| (x_i - b_i) / eps`, the energy gradient from the converged cells.
pub fn energy_gradient(sys: &ParticleSystem, state: &laguerre_flow::SolverState) -> Vec<Point> {
    state
        .tessellation
        .cells
        .iter()
        .zip(&sys.positions)
        .map(|(c, &x)| match c.barycenter {
            Some(b) => (x - b) * (c.area / sys.epsilon),
            None => Point::ORIGIN,
        })
        .collect()
}

/// Max-norm error of the cell gradient against central differences of the
/// primal energy with step `h`, relative to the max-norm of the gradient.
pub fn gradient_error(sys: &ParticleSystem, h: f64) -> f64 {
    let (_, state) = laguerre_flow::primal_energy(sys).unwrap();
    let grad = energy_gradient(sys, &state);
    let energy_at = |positions: Vec<Point>| laguerre_flow::primal_energy(&sys.with_positions(positions)).unwrap().0;
    let mut worst: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for i in 0..sys.len() {
        for axis in 0..2 {
            let offset = if axis == 0 { Point::new(h, 0.0) } else { Point::new(0.0, h) };
            let mut up = sys.positions.clone();
            let mut down = sys.positions.clone();
            up[i] = up[i] + offset;
            down[i] = down[i] - offset;
            let fd = (energy_at(up) - energy_at(down)) / (2.0 * h);
            let exact = if axis == 0 { grad[i].x } else { grad[i].y };
            worst = worst.max((fd - exact).abs());
            scale = scale.max(exact.abs());
        }
    }
    worst / scale
}

/// Maximizes the dual one weight at a time: each coordinate is set by
/// bisection on the sign of its partial derivative, sweeping until no weight
/// moves by more than `tol`.
pub fn coordinate_ascent(sys: &ParticleSystem, tol: f64) -> Vec<f64> {
    let n = sys.len();
    let mut w = sys.initial_weights().unwrap();
    for _ in 0..100_000 {
        let mut moved: f64 = 0.0;
        for i in 0..n {
            let slope = |w: &[f64]| laguerre_flow::dual::dual_gradient(sys, w).unwrap()[i];
            let mut lo = w.clone();
            let mut hi = w.clone();
            // the slope is +inf at 0 and negative for large weights
            lo[i] = w[i];
            while slope(&lo) <= 0.0 {
                lo[i] *= 0.5;
            }
            hi[i] = w[i];
            while slope(&hi) > 0.0 {
                hi[i] *= 2.0;
            }
            while hi[i] - lo[i] > 1e-15 * hi[i] {
                let mut mid = w.clone();
                mid[i] = 0.5 * (lo[i] + hi[i]);
                if mid[i] == lo[i] || mid[i] == hi[i] {
                    break;
                }
                if slope(&mid) > 0.0 {
                    lo[i] = mid[i];
                } else {
                    hi[i] = mid[i];
                }
            }
            let next = 0.5 * (lo[i] + hi[i]);
            moved = moved.max((next - w[i]).abs());
            w[i] = next;
        }
        if moved <= tol {
            return w;
        }
    }
    panic!("coordinate ascent did not settle");
}

/// Max-norm distance between Newton and coordinate-ascent weights, and the
/// relative gap between primal and dual values at the Newton optimum.
pub fn oracle_gaps(sys: &ParticleSystem) -> (f64, f64) {
    let state = laguerre_flow::solve_weights(sys, None).unwrap();
    let reference = coordinate_ascent(sys, 1e-12);
    let primal = laguerre_flow::dual::energy_of(sys, &state.tessellation);
    let dual = laguerre_flow::dual::dual_at(sys, &state);
    (max_abs_diff(&state.weights, &reference), (primal - dual).abs() / primal.abs().max(1e-300))
}

/// Largest distance, over the recorded times, between a lone particle and
/// `b + exp(-|Omega| t / (m eps)) (x0 - b)` with `b` the domain barycenter.
pub fn single_particle_error(tau: f64, mode: Mode) -> f64 {
    let domain = Arc::new(Domain::rectangle(Point::new(-0.5, 0.0), Point::new(1.5, 1.0)).unwrap());
    let (m, eps) = (0.8, 0.3);
    let x0 = Point::new(1.2, 0.1);
    let sys = ParticleSystem::new(domain.clone(), vec![x0], vec![m], eps, mode, EnergyModel::power(2.0).unwrap()).unwrap();
    let mut settings = laguerre_flow::SimulationSettings::new(tau, 0.0, 1.0);
    settings.snapshot_times = (1..10).map(|k| k as f64 / 10.0).collect();
    let run = laguerre_flow::simulate(sys, &settings).unwrap();
    assert!(run.snapshots.len() >= 2);
    let b = domain.barycenter();
    run.snapshots
        .iter()
        .map(|s| {
            let exact = b + (x0 - b) * (-domain.area() * s.time / (m * eps)).exp();
            s.positions[0].distance(exact)
        })
        .fold(0.0, f64::max)
}

/// Geometric invariants of a converged state: the weight-gap bound, hull
/// confinement, the area partition in full mode and, in clipped mode,
/// containment of sampled cell points in the particle's ball and power cell.
pub fn state_invariants(sys: &ParticleSystem, state: &laguerre_flow::SolverState) -> Result<(), String> {
    let w = &state.weights;
    let diam = sys.domain.diameter();
    if state.tessellation.cells.iter().all(|c| !c.is_empty()) {
        weight_bound(&sys.positions, w, diam)?;
    }
    hull(&sys.domain, &sys.positions)?;
    match sys.mode {
        Mode::Full => {
            let total = state.tessellation.total_area();
            let area = sys.domain.area();
            if (total - area).abs() > 1e-9 * area {
                return Err(format!("cells cover {total} of {area}"));
            }
        }
        Mode::Clipped => {
            let tol = 1e-9 * diam * diam;
            let grid = NeighborGrid::new(&sys.positions, w);
            for (i, cell) in state.tessellation.cells.iter().enumerate() {
                let mut pts = cell.boundary_points(0.1);
                if let Some(b) = cell.barycenter {
                    let extra: Vec<Point> = pts.iter().map(|&p| b + (p - b) * 0.5).collect();
                    pts.extend(extra);
                    pts.push(b);
                }
                for x in pts {
                    let own = (x - sys.positions[i]).norm_squared() - w[i];
                    if own > tol {
                        return Err(format!("cell {i} leaves its ball by {own}"));
                    }
                    if let Some(j) = grid.violator(x, own - tol) {
                        return Err(format!("cell {i} reaches into the power cell of {j}"));
                    }
                }
            }
        }
    }
    Ok(())
}

pub fn weight_bound(positions: &[Point], w: &[f64], diam: f64) -> Result<(), String> {
    for i in 0..positions.len() {
        for j in i + 1..positions.len() {
            let gap = (w[i] - w[j]).abs();
            let bound = 2.0 * diam * positions[i].distance(positions[j]);
            if gap > bound + 1e-12 * (1.0 + bound) {
                return Err(format!("weights {i},{j} differ by {gap} > {bound}"));
            }
        }
    }
    Ok(())
}

pub fn hull(domain: &Domain, positions: &[Point]) -> Result<(), String> {
    match positions.iter().position(|&p| domain.hull_excess(p) > 1e-12) {
        Some(i) => Err(format!("particle {i} left the hull")),
        None => Ok(()),
    }
}

/// Buckets of particles for power-distance queries restricted to balls.
struct NeighborGrid<'a> {
    positions: &'a [Point],
    weights: &'a [f64],
    reach: f64,
    buckets: std::collections::HashMap<(i64, i64), Vec<usize>>,
}

impl<'a> NeighborGrid<'a> {
    fn new(positions: &'a [Point], weights: &'a [f64]) -> Self {
        let reach = weights.iter().fold(0.0f64, |a, &w| a.max(w)).sqrt().max(1e-12);
        let mut buckets: std::collections::HashMap<(i64, i64), Vec<usize>> = Default::default();
        for (i, p) in positions.iter().enumerate() {
            buckets.entry(((p.x / reach).floor() as i64, (p.y / reach).floor() as i64)).or_default().push(i);
        }
        Self { positions, weights, reach, buckets }
    }

    /// A particle whose power distance at `x` is below `level <= 0`; such a
    /// particle's ball contains `x`, so only nearby buckets are searched.
    fn violator(&self, x: Point, level: f64) -> Option<usize> {
        let (gx, gy) = ((x.x / self.reach).floor() as i64, (x.y / self.reach).floor() as i64);
        for dx in -1..=1 {
            for dy in -1..=1 {
                for &j in self.buckets.get(&(gx + dx, gy + dy)).into_iter().flatten() {
                    let v = (x - self.positions[j]).norm_squared() - self.weights[j];
                    if v < level {
                        return Some(j);
                    }
                }
            }
        }
        None
    }
}
