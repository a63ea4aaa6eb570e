//! The self-similar convergence study: one simulation per `(gamma, N)` and
//! the resulting error and rate table.

use std::fmt::Write as _;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::barenblatt::BarenblattSpec;
use super::initial::{build_initial_data, InitialData};
use super::metrics::{convergence_rates, flow_error, relative_internal_energy};
use super::AnalysisError;
use crate::dual::ParticleSystem;
use crate::dynamics::{simulate_observed, DynamicsError, SimulationSettings, TrajectoryRecord};
use crate::energy::EnergyModel;
use crate::geometry::{Domain, Mode, Point};

/// How the regularization and the time step scale with `N`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "lowercase")]
pub enum Preset {
    /// `eps = 10 / N`, `tau = 10 / N^2`.
    Standard,
    Fixed { epsilon: f64, tau: f64 },
}

impl Preset {
    pub fn epsilon(&self, n: usize) -> f64 {
        match self {
            Preset::Standard => 10.0 / n as f64,
            Preset::Fixed { epsilon, .. } => *epsilon,
        }
    }

    pub fn tau(&self, n: usize) -> f64 {
        match self {
            Preset::Standard => 10.0 / (n as f64 * n as f64),
            Preset::Fixed { tau, .. } => *tau,
        }
    }
}

/// One self-similar run.
#[derive(Clone, Debug, Serialize)]
pub struct BarenblattRun {
    pub gamma: f64,
    pub c: f64,
    pub t0: f64,
    pub t_end: f64,
    pub n: usize,
    pub lloyd_iterations: usize,
    pub preset: Preset,
    /// Half-width of the square domain centered at the origin.
    pub domain_half_width: f64,
    pub mode: Mode,
    /// Number of evenly spaced steps at which the relative internal energy
    /// is evaluated; zero disables it.
    pub entropy_samples: usize,
    pub snapshot_times: Vec<f64>,
}

impl BarenblattRun {
    pub fn standard(gamma: f64, n: usize) -> Self {
        Self {
            gamma,
            c: 1.0 / 3.0,
            t0: 1.0 / 16.0,
            t_end: 1.0,
            n,
            lloyd_iterations: 20,
            preset: Preset::Standard,
            domain_half_width: 2.0,
            mode: Mode::Clipped,
            entropy_samples: 0,
            snapshot_times: Vec::new(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct BarenblattOutcome {
    pub run: BarenblattRun,
    pub epsilon: f64,
    pub tau: f64,
    pub flow_error: f64,
    /// Largest sampled relative internal energy, when sampled.
    pub max_relative_entropy: Option<f64>,
    pub initial: InitialData,
    pub exact_final: Vec<Point>,
    pub trajectory: TrajectoryRecord,
}

pub fn run_barenblatt(run: &BarenblattRun) -> Result<BarenblattOutcome, AnalysisError> {
    let spec = BarenblattSpec::new(run.gamma, run.c, run.t0)?;
    let initial = build_initial_data(&spec, run.n, run.lloyd_iterations)?;
    let domain = Arc::new(Domain::square(Point::ORIGIN, run.domain_half_width)?);
    let energy = EnergyModel::power(run.gamma).map_err(|e| AnalysisError::InvalidParameter(e.to_string()))?;
    let epsilon = run.preset.epsilon(run.n);
    let tau = run.preset.tau(run.n);
    let sys = ParticleSystem::new(domain, initial.positions.clone(), initial.masses.clone(), epsilon, run.mode, energy.clone())?;

    let mut settings = SimulationSettings::new(tau, run.t0, run.t_end);
    settings.snapshot_times = run.snapshot_times.clone();
    let (full, rest) = settings.schedule();
    let total_steps = full + usize::from(rest > 0.0);
    let stride = if run.entropy_samples == 0 { usize::MAX } else { (total_steps / run.entropy_samples).max(1) };

    let mut max_entropy: Option<f64> = None;
    let mut observer = |step: usize, time: f64, sys: &ParticleSystem, state: &crate::dual::SolverState| {
        if run.entropy_samples > 0 && (step % stride == 0 || step == total_steps) {
            let value = relative_internal_energy(&state.tessellation, &sys.masses, &energy, |x| spec.density(time, x))
                .map_err(|e| DynamicsError::InvalidSettings(e.to_string()))?;
            max_entropy = Some(max_entropy.map_or(value, |m: f64| m.max(value)));
        }
        Ok(())
    };
    let trajectory = simulate_observed(sys, &settings, &mut observer)?;

    let exact_final: Vec<Point> = initial.positions.iter().map(|&x| spec.flow(run.t_end, x)).collect();
    let error = flow_error(trajectory.final_positions(), &exact_final, &initial.masses)?;
    Ok(BarenblattOutcome {
        run: run.clone(),
        epsilon,
        tau,
        flow_error: error,
        max_relative_entropy: max_entropy,
        initial,
        exact_final,
        trajectory,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct RateRow {
    pub gamma: f64,
    pub n: usize,
    pub inv_sqrt_n: f64,
    pub error: f64,
    pub rate: Option<f64>,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct RateTable {
    pub rows: Vec<RateRow>,
}

impl RateTable {
    pub fn from_errors(gamma: f64, ns: &[usize], errors: &[f64]) -> Self {
        let rates = convergence_rates(ns, errors);
        let rows = ns
            .iter()
            .zip(errors)
            .zip(rates)
            .map(|((&n, &error), rate)| RateRow { gamma, n, inv_sqrt_n: 1.0 / (n as f64).sqrt(), error, rate })
            .collect();
        Self { rows }
    }

    pub fn column(&self, gamma: f64) -> Vec<&RateRow> {
        self.rows.iter().filter(|r| r.gamma == gamma).collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("gamma,n,inv_sqrt_n,error,rate\n");
        for r in &self.rows {
            let rate = r.rate.map(|x| format!("{x:.6e}")).unwrap_or_default();
            let _ = writeln!(out, "{},{},{:.6e},{:.6e},{}", r.gamma, r.n, r.inv_sqrt_n, r.error, rate);
        }
        out
    }
}

/// Runs every `(gamma, N)` combination on the current rayon pool and builds
/// the rate table, ordered by `gamma` then `N`.
pub fn convergence_study(
    gammas: &[f64],
    ns: &[usize],
    template: &BarenblattRun,
) -> Result<(RateTable, Vec<BarenblattOutcome>), AnalysisError> {
    if ns.windows(2).any(|w| w[1] <= w[0]) {
        return Err(AnalysisError::InvalidParameter("particle counts must increase".into()));
    }
    let jobs: Vec<BarenblattRun> = gammas
        .iter()
        .flat_map(|&gamma| ns.iter().map(move |&n| BarenblattRun { gamma, n, ..template.clone() }))
        .collect();
    let outcomes: Vec<BarenblattOutcome> = jobs.par_iter().map(run_barenblatt).collect::<Result<_, _>>()?;
    let mut table = RateTable::default();
    for (k, &gamma) in gammas.iter().enumerate() {
        let errors: Vec<f64> = outcomes[k * ns.len()..(k + 1) * ns.len()].iter().map(|o| o.flow_error).collect();
        table.rows.extend(RateTable::from_errors(gamma, ns, &errors).rows);
    }
    Ok((table, outcomes))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standard_preset_arithmetic() {
        assert_eq!(Preset::Standard.epsilon(100), 0.1);
        assert_eq!(Preset::Standard.tau(100), 1e-3);
    }

    #[test]
    fn csv_has_one_row_per_run() {
        let t = RateTable::from_errors(2.0, &[100, 400], &[0.08, 0.04]);
        let csv = t.to_csv();
        assert_eq!(csv.lines().count(), 3);
        assert!(csv.lines().nth(2).unwrap().ends_with("1.000000e0"));
    }

    #[test]
    fn small_run_is_close_to_the_exact_flow() {
        let mut run = BarenblattRun::standard(2.0, 25);
        run.preset = Preset::Fixed { epsilon: 0.4, tau: 0.05 };
        run.lloyd_iterations = 5;
        let out = run_barenblatt(&run).unwrap();
        assert!(out.flow_error.is_finite() && out.flow_error < 0.5);
        assert!(out.trajectory.worst_energy_increase() <= 1e-12);
    }
}
