//! The concave dual functional in the weights, its gradient, and the damped
//! Newton solver for the optimal tessellation.

use std::sync::Arc;

use serde::Serialize;
use thiserror::Error;
use tracing::debug;

use crate::energy::{EnergyError, EnergyModel};
use crate::geometry::{area_jacobian, build_tessellation, Domain, GeometryError, Mode, Point, Tessellation};
use crate::linalg::conjugate_gradient;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Energy(#[from] EnergyError),
    #[error("invalid particle system: {0}")]
    InvalidSystem(String),
    #[error("weight {0} is outside the domain of the conjugate cost")]
    ConjugateDomain(usize),
    #[error("Newton failed after {iterations} iterations, best residual {residual:e}")]
    NewtonFailure { iterations: usize, residual: f64 },
}

/// Particles with their masses, regularization and tessellation mode.
#[derive(Clone, Debug)]
pub struct ParticleSystem {
    pub positions: Vec<Point>,
    pub masses: Vec<f64>,
    pub epsilon: f64,
    pub mode: Mode,
    pub domain: Arc<Domain>,
    pub energy: EnergyModel,
}

impl ParticleSystem {
    pub fn new(
        domain: Arc<Domain>,
        positions: Vec<Point>,
        masses: Vec<f64>,
        epsilon: f64,
        mode: Mode,
        energy: EnergyModel,
    ) -> Result<Self, SolverError> {
        if positions.len() != masses.len() {
            return Err(SolverError::InvalidSystem(format!(
                "{} positions but {} masses",
                positions.len(),
                masses.len()
            )));
        }
        if positions.is_empty() {
            return Err(SolverError::InvalidSystem("no particles".into()));
        }
        if let Some(i) = masses.iter().position(|&m| !(m > 0.0 && m.is_finite())) {
            return Err(SolverError::InvalidSystem(format!("mass {i} is not positive")));
        }
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(SolverError::InvalidSystem(format!("epsilon {epsilon} is not positive")));
        }
        Ok(Self { positions, masses, epsilon, mode, domain, energy })
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn total_mass(&self) -> f64 {
        self.masses.iter().sum()
    }

    pub fn with_positions(&self, positions: Vec<Point>) -> Self {
        Self { positions, ..self.clone() }
    }

    pub fn tessellate(&self, weights: &[f64]) -> Result<Tessellation, GeometryError> {
        build_tessellation(&self.domain, &self.positions, weights, self.mode)
    }

    /// Cold-start weights: every cell assumed to have area `|Omega| / N`.
    pub fn initial_weights(&self) -> Result<Vec<f64>, SolverError> {
        let n = self.len() as f64;
        let area = self.domain.area();
        self.masses
            .iter()
            .map(|&m| Ok(2.0 * self.epsilon * self.energy.pressure(m * n / area)?))
            .collect()
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct SolverOptions {
    pub tolerance: f64,
    pub max_iterations: usize,
    pub cg_tolerance: f64,
    pub min_step: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { tolerance: 1e-10, max_iterations: 100, cg_tolerance: 1e-6, min_step: 2f64.powi(-30) }
    }
}

/// One Newton iteration as seen at its start.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct IterationRecord {
    pub residual: f64,
    pub step: f64,
    pub dual_value: f64,
    pub min_area: f64,
}

#[derive(Clone, Debug)]
pub struct SolverState {
    pub weights: Vec<f64>,
    pub tessellation: Tessellation,
    /// Max-norm of `P(m_i / |L_i|) - w_i / (2 eps)`.
    pub residual: f64,
    pub iterations: usize,
    pub trace: Vec<IterationRecord>,
}

fn geometric_term(tess: &Tessellation, weights: &[f64], epsilon: f64) -> f64 {
    tess.cells
        .iter()
        .zip(weights)
        .map(|(c, &w)| (c.second_moment - w * c.area) / (2.0 * epsilon))
        .sum()
}

fn dual_from_tessellation(sys: &ParticleSystem, tess: &Tessellation, weights: &[f64]) -> f64 {
    if weights.iter().any(|&w| w < 0.0) {
        return f64::NEG_INFINITY;
    }
    let conj: f64 = sys
        .masses
        .iter()
        .zip(weights)
        .map(|(&m, &w)| sys.energy.cstar(m, -w / (2.0 * sys.epsilon)))
        .sum();
    geometric_term(tess, weights, sys.epsilon) - conj
}

/// Dual functional; `-inf` when some weight is negative.
pub fn dual_value(sys: &ParticleSystem, weights: &[f64]) -> Result<f64, SolverError> {
    if weights.iter().any(|&w| w < 0.0) {
        return Ok(f64::NEG_INFINITY);
    }
    let tess = sys.tessellate(weights)?;
    Ok(dual_from_tessellation(sys, &tess, weights))
}

fn gradient_from_tessellation(sys: &ParticleSystem, tess: &Tessellation, weights: &[f64]) -> Result<Vec<f64>, SolverError> {
    let two_eps = 2.0 * sys.epsilon;
    weights
        .iter()
        .enumerate()
        .map(|(i, &w)| {
            let g = sys
                .energy
                .cstar_prime(sys.masses[i], -w / two_eps)
                .map_err(|_| SolverError::ConjugateDomain(i))?;
            Ok((g - tess.cells[i].area) / two_eps)
        })
        .collect()
}

/// Gradient of the dual functional; requires all weights positive.
pub fn dual_gradient(sys: &ParticleSystem, weights: &[f64]) -> Result<Vec<f64>, SolverError> {
    if let Some(i) = weights.iter().position(|&w| !(w > 0.0)) {
        return Err(SolverError::ConjugateDomain(i));
    }
    let tess = sys.tessellate(weights)?;
    gradient_from_tessellation(sys, &tess, weights)
}

/// Scaled optimality residual; infinite if some cell is empty.
pub fn optimality_residual(sys: &ParticleSystem, tess: &Tessellation, weights: &[f64]) -> f64 {
    let two_eps = 2.0 * sys.epsilon;
    let mut worst: f64 = 0.0;
    for (i, cell) in tess.cells.iter().enumerate() {
        if cell.is_empty() {
            return f64::INFINITY;
        }
        let p = sys.energy.inner().pressure(sys.masses[i] / cell.area);
        worst = worst.max((p - weights[i] / two_eps).abs());
    }
    worst
}

fn min_positive_area(tess: &Tessellation) -> f64 {
    tess.cells
        .iter()
        .map(|c| c.area)
        .filter(|&a| a > 0.0)
        .fold(f64::INFINITY, f64::min)
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Maximizes the dual functional by damped Newton.
pub fn solve_weights(sys: &ParticleSystem, warm_start: Option<&[f64]>) -> Result<SolverState, SolverError> {
    solve_weights_with(sys, warm_start, &SolverOptions::default())
}

pub fn solve_weights_with(
    sys: &ParticleSystem,
    warm_start: Option<&[f64]>,
    opts: &SolverOptions,
) -> Result<SolverState, SolverError> {
    let n = sys.len();
    let two_eps = 2.0 * sys.epsilon;
    let mut weights = match warm_start {
        Some(w) if w.len() == n && w.iter().all(|&x| x > 0.0 && x.is_finite()) => w.to_vec(),
        _ => sys.initial_weights()?,
    };
    let mut tess = sys.tessellate(&weights)?;
    let mut dual = dual_from_tessellation(sys, &tess, &weights);
    let mut grad = gradient_from_tessellation(sys, &tess, &weights)?;
    let mut trace = Vec::new();
    let mut best = f64::INFINITY;
    let mut last_step = 0.0;

    for iteration in 0..=opts.max_iterations {
        let residual = optimality_residual(sys, &tess, &weights);
        best = best.min(residual);
        let min_area = min_positive_area(&tess);
        trace.push(IterationRecord { residual, step: last_step, dual_value: dual, min_area });
        debug!(iteration, residual, step = last_step, dual, min_area, "newton");

        let scale = weights.iter().fold(0.0f64, |a, &w| a.max(w.abs())) / two_eps;
        if residual <= opts.tolerance * (1.0 + scale) {
            return Ok(SolverState { weights, tessellation: tess, residual, iterations: iteration, trace });
        }
        if iteration == opts.max_iterations {
            break;
        }

        // H = dA/dw - d/dw (C*)'(-w/2eps) is symmetric positive definite and
        // the Newton direction solves H delta = 2 eps R.
        let mut hessian = area_jacobian(&tess)?;
        let mut shift = Vec::with_capacity(n);
        for (i, &w) in weights.iter().enumerate() {
            let c2 = sys.energy.cstar_second(sys.masses[i], -w / two_eps)?;
            shift.push(c2 / two_eps);
        }
        hessian.add_diagonal(&shift);
        let rhs: Vec<f64> = grad.iter().map(|r| r * two_eps).collect();
        let (delta, _) = conjugate_gradient(&hessian, &rhs, opts.cg_tolerance, 10 * n + 100);

        let grad_norm = norm2(&grad);
        let nonempty: Vec<bool> = tess.cells.iter().map(|c| !c.is_empty()).collect();
        let floor = 0.5 * min_area;
        let slack = 1e-14 * (1.0 + dual.abs());
        let mut t = 1.0;
        let accepted = loop {
            if t < opts.min_step {
                break None;
            }
            let trial: Vec<f64> = weights.iter().zip(&delta).map(|(w, d)| w + t * d).collect();
            if trial.iter().any(|&w| !(w > 0.0)) {
                t *= 0.5;
                continue;
            }
            let trial_tess = sys.tessellate(&trial)?;
            let collapsed = trial_tess
                .cells
                .iter()
                .zip(&nonempty)
                .any(|(c, &was)| was && c.area < floor);
            if collapsed {
                t *= 0.5;
                continue;
            }
            let trial_grad = gradient_from_tessellation(sys, &trial_tess, &trial)?;
            let trial_dual = dual_from_tessellation(sys, &trial_tess, &trial);
            if norm2(&trial_grad) < grad_norm && trial_dual >= dual - slack {
                break Some((trial, trial_tess, trial_grad, trial_dual));
            }
            t *= 0.5;
        };
        match accepted {
            Some((w, tsl, g, d)) => {
                weights = w;
                tess = tsl;
                grad = g;
                dual = d;
                last_step = t;
            }
            None => {
                return Err(SolverError::NewtonFailure { iterations: iteration + 1, residual: best });
            }
        }
    }
    Err(SolverError::NewtonFailure { iterations: opts.max_iterations, residual: best })
}

/// `sum_i U(m_i / |L_i|) |L_i|`.
pub fn internal_energy(sys: &ParticleSystem, tess: &Tessellation) -> f64 {
    tess.cells
        .iter()
        .zip(&sys.masses)
        .map(|(c, &m)| sys.energy.cell_cost(m, c.area))
        .sum()
}

/// Primal energy of a tessellation: transport term plus internal energy.
pub fn energy_of(sys: &ParticleSystem, tess: &Tessellation) -> f64 {
    let transport: f64 = tess.cells.iter().map(|c| c.second_moment).sum::<f64>() / (2.0 * sys.epsilon);
    transport + internal_energy(sys, tess)
}

/// Regularized energy at the optimal tessellation, with the solver state.
pub fn primal_energy(sys: &ParticleSystem) -> Result<(f64, SolverState), SolverError> {
    let state = solve_weights(sys, None)?;
    Ok((energy_of(sys, &state.tessellation), state))
}

/// Dual value at a converged state, without rebuilding the tessellation.
pub fn dual_at(sys: &ParticleSystem, state: &SolverState) -> f64 {
    dual_from_tessellation(sys, &state.tessellation, &state.weights)
}
