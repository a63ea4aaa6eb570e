//! Particle velocities and the exponential time stepping of the cell-center
//! dynamics.

use serde::Serialize;
use thiserror::Error;
use tracing::{debug, info};

use crate::dual::{energy_of, internal_energy, solve_weights_with, ParticleSystem, SolverError, SolverOptions, SolverState};
use crate::energy::Potential;
use crate::geometry::Point;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error("solver state does not match the particle positions")]
    StaleState,
    #[error("the closed-form step needs a quadratic potential")]
    UnsupportedPotential,
    #[error("energy increased at step {step}: {before:e} -> {after:e}")]
    DissipationViolation { step: usize, before: f64, after: f64 },
    #[error("invalid simulation settings: {0}")]
    InvalidSettings(String),
}

fn check_fresh(sys: &ParticleSystem, state: &SolverState) -> Result<(), DynamicsError> {
    if state.tessellation.positions != sys.positions {
        return Err(DynamicsError::StaleState);
    }
    Ok(())
}

/// `-(|L_i| / m_i) (x_i - b_i) / eps` for every particle.
pub fn velocity(sys: &ParticleSystem, state: &SolverState) -> Result<Vec<Point>, DynamicsError> {
    check_fresh(sys, state)?;
    Ok(state
        .tessellation
        .cells
        .iter()
        .zip(&sys.positions)
        .zip(&sys.masses)
        .map(|((cell, &x), &m)| match cell.barycenter {
            Some(b) => (x - b) * (-cell.area / (m * sys.epsilon)),
            None => Point::ORIGIN,
        })
        .collect())
}

fn exponential_positions(sys: &ParticleSystem, state: &SolverState, tau: f64) -> Vec<Point> {
    state
        .tessellation
        .cells
        .iter()
        .zip(&sys.positions)
        .zip(&sys.masses)
        .map(|((cell, &x), &m)| match cell.barycenter {
            Some(b) => b + (x - b) * (-cell.area * tau / (m * sys.epsilon)).exp(),
            None => x,
        })
        .collect()
}

fn quadratic_positions(sys: &ParticleSystem, state: &SolverState, tau: f64, center: Point) -> Vec<Point> {
    state
        .tessellation
        .cells
        .iter()
        .zip(&sys.positions)
        .zip(&sys.masses)
        .map(|((cell, &x), &m)| {
            let lambda = cell.area / (m * sys.epsilon) + 1.0;
            let b = cell.barycenter.unwrap_or(x);
            let c = b + (center - b) / lambda;
            c + (x - c) * (-lambda * tau).exp()
        })
        .collect()
}

fn resolve(
    sys: &ParticleSystem,
    positions: Vec<Point>,
    warm: &[f64],
    opts: &SolverOptions,
) -> Result<(ParticleSystem, SolverState), DynamicsError> {
    let next = sys.with_positions(positions);
    let state = solve_weights_with(&next, Some(warm), opts)?;
    Ok((next, state))
}

/// One exponential step with frozen cells, followed by the weight solve at
/// the new positions warm-started from the current weights.
pub fn step(sys: &ParticleSystem, state: &SolverState, tau: f64) -> Result<(ParticleSystem, SolverState), DynamicsError> {
    check_fresh(sys, state)?;
    let positions = exponential_positions(sys, state, tau);
    resolve(sys, positions, &state.weights, &SolverOptions::default())
}

/// Closed-form step for the quadratic confinement `|x - center|^2 / 2`.
pub fn step_with_potential(
    sys: &ParticleSystem,
    state: &SolverState,
    tau: f64,
    potential: &Potential,
) -> Result<(ParticleSystem, SolverState), DynamicsError> {
    check_fresh(sys, state)?;
    let positions = match potential {
        Potential::None => exponential_positions(sys, state, tau),
        Potential::Quadratic { center } => quadratic_positions(sys, state, tau, *center),
        Potential::General { .. } => return Err(DynamicsError::UnsupportedPotential),
    };
    resolve(sys, positions, &state.weights, &SolverOptions::default())
}

/// Lie splitting for an arbitrary potential: exponential cell step, then one
/// explicit Euler step along `-grad V`.
pub fn step_split(
    sys: &ParticleSystem,
    state: &SolverState,
    tau: f64,
    potential: &Potential,
) -> Result<(ParticleSystem, SolverState), DynamicsError> {
    check_fresh(sys, state)?;
    let positions = exponential_positions(sys, state, tau)
        .into_iter()
        .map(|x| x - potential.gradient(x) * tau)
        .collect();
    resolve(sys, positions, &state.weights, &SolverOptions::default())
}

#[derive(Clone, Debug)]
pub struct SimulationSettings {
    pub tau: f64,
    pub t0: f64,
    pub t_end: f64,
    /// Times at which full particle states are recorded, in addition to the
    /// initial and final ones.
    pub snapshot_times: Vec<f64>,
    pub potential: Potential,
    pub solver: SolverOptions,
    /// Fail on any increase of the energy beyond roundoff.
    pub assert_dissipation: bool,
}

impl SimulationSettings {
    pub fn new(tau: f64, t0: f64, t_end: f64) -> Self {
        Self {
            tau,
            t0,
            t_end,
            snapshot_times: Vec::new(),
            potential: Potential::None,
            solver: SolverOptions::default(),
            assert_dissipation: true,
        }
    }

    fn validate(&self) -> Result<(), DynamicsError> {
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(DynamicsError::InvalidSettings(format!("time step {} is not positive", self.tau)));
        }
        if !(self.t_end > self.t0) {
            return Err(DynamicsError::InvalidSettings(format!(
                "final time {} does not exceed initial time {}",
                self.t_end, self.t0
            )));
        }
        Ok(())
    }

    /// Step sizes from `t0` to `t_end`: full steps, then one shorter step if
    /// the window is not a multiple of `tau`.
    pub fn schedule(&self) -> (usize, f64) {
        let ratio = (self.t_end - self.t0) / self.tau;
        let full = (ratio + 1e-9).floor() as usize;
        let rest = self.t_end - (self.t0 + full as f64 * self.tau);
        if rest > 1e-12 * self.tau {
            (full, rest)
        } else {
            (full, 0.0)
        }
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct EnergyRecord {
    pub step: usize,
    pub time: f64,
    /// Regularized energy plus potential energy.
    pub total: f64,
    /// `sum_i U(m_i / |L_i|) |L_i|`.
    pub internal: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct Snapshot {
    pub step: usize,
    pub time: f64,
    pub positions: Vec<Point>,
    pub weights: Vec<f64>,
    pub areas: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct TrajectoryRecord {
    pub masses: Vec<f64>,
    pub energies: Vec<EnergyRecord>,
    pub snapshots: Vec<Snapshot>,
    pub final_system: ParticleSystem,
    pub final_state: SolverState,
    /// Newton iterations summed over all steps.
    pub newton_iterations: usize,
}

impl TrajectoryRecord {
    pub fn final_positions(&self) -> &[Point] {
        &self.final_system.positions
    }

    /// Largest relative energy increase between consecutive steps, or 0.
    pub fn worst_energy_increase(&self) -> f64 {
        self.energies
            .windows(2)
            .map(|p| (p[1].total - p[0].total) / (1.0 + p[0].total.abs()))
            .fold(0.0, f64::max)
    }
}

fn total_energy(sys: &ParticleSystem, state: &SolverState, potential: &Potential) -> (f64, f64) {
    let f = energy_of(sys, &state.tessellation);
    let v: f64 = match potential {
        Potential::None => 0.0,
        _ => sys.positions.iter().zip(&sys.masses).map(|(&x, &m)| m * potential.value(x)).sum(),
    };
    (f + v, internal_energy(sys, &state.tessellation))
}

fn snapshot(step: usize, time: f64, sys: &ParticleSystem, state: &SolverState) -> Snapshot {
    Snapshot {
        step,
        time,
        positions: sys.positions.clone(),
        weights: state.weights.clone(),
        areas: state.tessellation.areas(),
    }
}

/// The last few converged weight vectors, used to extrapolate a Newton
/// starting point for the next step.
#[derive(Default)]
struct WeightHistory {
    entries: std::collections::VecDeque<(f64, Vec<f64>)>,
}

impl WeightHistory {
    const DEPTH: usize = 3;

    fn push(&mut self, time: f64, weights: &[f64]) {
        if self.entries.len() == Self::DEPTH {
            self.entries.pop_front();
        }
        self.entries.push_back((time, weights.to_vec()));
    }

    /// Lagrange extrapolation through the stored weights; `None` when there
    /// is too little history or the guess leaves the positive orthant.
    fn predict(&self, time: f64) -> Option<Vec<f64>> {
        if self.entries.len() < 2 {
            return None;
        }
        let times: Vec<f64> = self.entries.iter().map(|e| e.0).collect();
        let coeffs: Vec<f64> = (0..times.len())
            .map(|j| {
                (0..times.len())
                    .filter(|&k| k != j)
                    .map(|k| (time - times[k]) / (times[j] - times[k]))
                    .product()
            })
            .collect();
        let n = self.entries[0].1.len();
        let guess: Vec<f64> = (0..n)
            .map(|i| self.entries.iter().zip(&coeffs).map(|(e, c)| c * e.1[i]).sum())
            .collect();
        guess.iter().all(|&w| w > 0.0).then_some(guess)
    }
}

/// Fixed-step march of the particle system from `t0` to `t_end`.
pub fn simulate(initial: ParticleSystem, settings: &SimulationSettings) -> Result<TrajectoryRecord, DynamicsError> {
    simulate_observed(initial, settings, &mut |_, _, _, _| Ok(()))
}

/// Observer called with `(step, time, system, state)` after every solve,
/// including the initial one.
pub type Observer<'a> = dyn FnMut(usize, f64, &ParticleSystem, &SolverState) -> Result<(), DynamicsError> + 'a;

/// As [`simulate`], reporting every converged state to `observer`.
pub fn simulate_observed(
    initial: ParticleSystem,
    settings: &SimulationSettings,
    observer: &mut Observer<'_>,
) -> Result<TrajectoryRecord, DynamicsError> {
    settings.validate()?;
    let (full, rest) = settings.schedule();
    let total_steps = full + usize::from(rest > 0.0);
    let mut pending: Vec<f64> = settings
        .snapshot_times
        .iter()
        .copied()
        .filter(|&s| s > settings.t0 && s < settings.t_end)
        .collect();
    pending.sort_by(f64::total_cmp);
    pending.reverse();

    let mut sys = initial;
    let mut state = solve_weights_with(&sys, None, &settings.solver)?;
    let mut newton_iterations = state.iterations;
    let (e0, i0) = total_energy(&sys, &state, &settings.potential);
    let mut energies = vec![EnergyRecord { step: 0, time: settings.t0, total: e0, internal: i0 }];
    let mut snapshots = vec![snapshot(0, settings.t0, &sys, &state)];
    observer(0, settings.t0, &sys, &state)?;
    let mut history = WeightHistory::default();
    history.push(settings.t0, &state.weights);
    let report_every = (total_steps / 20).max(1);

    for n in 1..=total_steps {
        let (tau, time) = if n <= full {
            (settings.tau, settings.t0 + n as f64 * settings.tau)
        } else {
            (rest, settings.t_end)
        };
        let positions = match &settings.potential {
            Potential::None => exponential_positions(&sys, &state, tau),
            Potential::Quadratic { center } => quadratic_positions(&sys, &state, tau, *center),
            Potential::General { .. } => exponential_positions(&sys, &state, tau)
                .into_iter()
                .map(|x| x - settings.potential.gradient(x) * tau)
                .collect(),
        };
        let warm = history.predict(time).unwrap_or_else(|| state.weights.clone());
        let next = sys.with_positions(positions);
        let next_state = match solve_weights_with(&next, Some(&warm), &settings.solver) {
            Ok(s) => s,
            Err(_) => solve_weights_with(&next, Some(&state.weights), &settings.solver)?,
        };
        newton_iterations += next_state.iterations;
        history.push(time, &next_state.weights);
        state = next_state;
        sys = next;

        let (total, internal) = total_energy(&sys, &state, &settings.potential);
        let before = energies.last().map(|e| e.total).unwrap_or(total);
        if settings.assert_dissipation
            && !matches!(settings.potential, Potential::General { .. })
            && total > before + 1e-12 * (1.0 + before.abs())
        {
            return Err(DynamicsError::DissipationViolation { step: n, before, after: total });
        }
        energies.push(EnergyRecord { step: n, time, total, internal });
        observer(n, time, &sys, &state)?;

        let mut due = false;
        while pending.last().is_some_and(|&s| s <= time + 1e-12 * (1.0 + time.abs())) {
            pending.pop();
            due = true;
        }
        if due || n == total_steps {
            snapshots.push(snapshot(n, time, &sys, &state));
        }
        if n % report_every == 0 {
            info!(step = n, of = total_steps, time, energy = total, "simulation progress");
        }
        debug!(step = n, iterations = state.iterations, residual = state.residual, "step");
    }

    Ok(TrajectoryRecord {
        masses: sys.masses.clone(),
        energies,
        snapshots,
        final_system: sys,
        final_state: state,
        newton_iterations,
    })
}
