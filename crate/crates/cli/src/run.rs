//! Runs a resolved experiment and writes its tables and manifest.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use laguerre_flow::analysis::{
    cross_initializer, equilibrium_profile, run_barenblatt, BarenblattOutcome, BarenblattRun, BarenblattSpec,
    CrossShape, Preset, RateTable,
};
use laguerre_flow::{
    simulate as simulate_system, Domain, EnergyModel, ParticleSystem, Point, Potential, SimulationSettings,
    TrajectoryRecord,
};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};
use tracing::info;

use crate::config::{Case, ConfigError, PotentialKind, Resolved};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Simulate,
    Study,
    Cross,
}

/// A run that was set up correctly but did not finish.
#[derive(Debug)]
pub struct RunFailure {
    pub message: String,
    /// Whatever could still be written: the manifest flagged as failed.
    pub written: Vec<PathBuf>,
}

/// Files produced by a run, kept in memory until it finishes.
struct Outputs {
    files: Vec<(&'static str, String)>,
    extra_files: Vec<(String, String)>,
    results: Value,
}

/// A particle system ready to run, built before anything is written.
struct Prepared {
    system: ParticleSystem,
    settings: SimulationSettings,
    equilibrium: Option<f64>,
}

pub fn execute(cmd: Command, cfg: &Resolved, workers: usize) -> Result<Result<Vec<PathBuf>, RunFailure>, ConfigError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| ConfigError::Invalid(format!("cannot start {workers} workers: {e}")))?;
    pool.install(|| {
        let prepared = prepare(cmd, cfg)?;
        info!(command = ?cmd, case = ?cfg.case, output = %cfg.output.display(), "starting");
        let outcome = match (cmd, prepared) {
            (Command::Study, _) => study(cfg),
            (_, Some(p)) => particle_run(cfg, p),
            (_, None) => single_barenblatt(cfg),
        };
        Ok(finish(cmd, cfg, workers, outcome))
    })
}

/// Checks everything that can be checked without running, so that an
/// invalid setup leaves no files behind.
fn prepare(cmd: Command, cfg: &Resolved) -> Result<Option<Prepared>, ConfigError> {
    let bad = |e: &dyn std::fmt::Display| ConfigError::Invalid(e.to_string());
    let energy = EnergyModel::power(cfg.gamma).map_err(|e| bad(&e))?;
    if cmd == Command::Study && cfg.case != Case::Barenblatt {
        return Err(ConfigError::Invalid("studies are defined for the barenblatt case only".into()));
    }
    let center = Point::new(cfg.center[0], cfg.center[1]);
    let (domain, positions, masses) = match cfg.case {
        Case::Barenblatt => {
            let gammas = if cmd == Command::Study { cfg.gammas.clone() } else { vec![cfg.gamma] };
            for g in gammas {
                BarenblattSpec::new(g, cfg.c, cfg.t0).map_err(|e| bad(&e))?;
            }
            return Ok(None);
        }
        Case::Cross => {
            let data = cross_initializer(cfg.n, cfg.mass, &CrossShape::new(center, cfg.thickness));
            let domain = Domain::square(center, cfg.domain_half_width).map_err(|e| bad(&e))?;
            (domain, data.positions, data.masses)
        }
        Case::Custom => {
            let domain_rows = read_table(cfg.domain_file.as_deref().unwrap(), 2)?;
            let domain = Domain::new(domain_rows.iter().map(|r| Point::new(r[0], r[1])).collect()).map_err(|e| bad(&e))?;
            let rows = read_table(cfg.particle_file.as_deref().unwrap(), 3)?;
            (domain, rows.iter().map(|r| Point::new(r[0], r[1])).collect(), rows.iter().map(|r| r[2]).collect())
        }
    };
    if let Some(k) = positions.iter().position(|&p| !domain.contains(p)) {
        return Err(ConfigError::Invalid(format!("particle {k} lies outside the domain")));
    }
    let n = positions.len();
    let system = ParticleSystem::new(Arc::new(domain), positions, masses, cfg.epsilon_for(n), cfg.mode, energy)
        .map_err(|e| bad(&e))?;
    let mut settings = SimulationSettings::new(cfg.tau_for(n), cfg.t0, cfg.t_end);
    settings.snapshot_times = cfg.snapshot_times.clone();
    if cfg.potential == PotentialKind::Quadratic {
        settings.potential = Potential::Quadratic { center };
    }
    let equilibrium = (cfg.case == Case::Cross && cfg.gamma == 2.0 && cfg.potential == PotentialKind::Quadratic)
        .then(|| equilibrium_profile(system.masses.iter().sum(), center).1);
    Ok(Some(Prepared { system, settings, equilibrium }))
}

/// Whitespace- or comma-separated numeric rows; `#` starts a comment and a
/// non-numeric first line is taken as a header.
fn read_table(path: &Path, columns: usize) -> Result<Vec<Vec<f64>>, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read { path: path.into(), source })?;
    let mut rows = Vec::new();
    for (k, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap().trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(|c: char| c == ',' || c.is_whitespace()).filter(|f| !f.is_empty()).collect();
        let parsed: Result<Vec<f64>, _> = fields.iter().map(|f| f.parse::<f64>()).collect();
        match parsed {
            Ok(values) if values.len() == columns && values.iter().all(|v| v.is_finite()) => rows.push(values),
            Err(_) if rows.is_empty() && k == 0 => continue,
            _ => {
                return Err(ConfigError::Invalid(format!(
                    "{} line {}: expected {columns} numbers",
                    path.display(),
                    k + 1
                )))
            }
        }
    }
    Ok(rows)
}

fn barenblatt_run(cfg: &Resolved, gamma: f64, n: usize) -> BarenblattRun {
    BarenblattRun {
        gamma,
        c: cfg.c,
        t0: cfg.t0,
        t_end: cfg.t_end,
        n,
        lloyd_iterations: cfg.lloyd_iters,
        preset: Preset::Fixed { epsilon: cfg.epsilon_for(n), tau: cfg.tau_for(n) },
        domain_half_width: cfg.domain_half_width,
        mode: cfg.mode,
        entropy_samples: cfg.entropy_samples,
        snapshot_times: cfg.snapshot_times.clone(),
    }
}

fn outcome_summary(o: &BarenblattOutcome) -> Value {
    json!({
        "gamma": o.run.gamma,
        "n": o.run.n,
        "epsilon": o.epsilon,
        "tau": o.tau,
        "flow_error": o.flow_error,
        "max_relative_internal_energy": o.max_relative_entropy,
        "initial_projection_error": o.initial.delta_n,
        "steps": o.trajectory.energies.len() - 1,
        "newton_iterations": o.trajectory.newton_iterations,
        "worst_energy_increase": o.trajectory.worst_energy_increase(),
    })
}

fn single_barenblatt(cfg: &Resolved) -> Result<Outputs, String> {
    let outcome = run_barenblatt(&barenblatt_run(cfg, cfg.gamma, cfg.n)).map_err(|e| e.to_string())?;
    let table = RateTable::from_errors(cfg.gamma, &[cfg.n], &[outcome.flow_error]);
    Ok(Outputs {
        files: vec![
            ("snapshots.csv", snapshots_csv(&outcome.trajectory)),
            ("energy.csv", energy_csv(&outcome.trajectory)),
            ("rates.csv", table.to_csv()),
        ],
        extra_files: Vec::new(),
        results: outcome_summary(&outcome),
    })
}

fn study(cfg: &Resolved) -> Result<Outputs, String> {
    let jobs: Vec<BarenblattRun> =
        cfg.gammas.iter().flat_map(|&g| cfg.ns.iter().map(move |&n| barenblatt_run(cfg, g, n))).collect();
    let outcomes: Vec<BarenblattOutcome> = jobs
        .par_iter()
        .map(|job| {
            let o = run_barenblatt(job);
            if let Ok(o) = &o {
                info!(gamma = job.gamma, n = job.n, error = o.flow_error, "study cell finished");
            }
            o
        })
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    let mut table = RateTable::default();
    for (k, &gamma) in cfg.gammas.iter().enumerate() {
        let block = &outcomes[k * cfg.ns.len()..(k + 1) * cfg.ns.len()];
        let errors: Vec<f64> = block.iter().map(|o| o.flow_error).collect();
        table.rows.extend(RateTable::from_errors(gamma, &cfg.ns, &errors).rows);
    }
    let extra_files =
        outcomes.iter().map(|o| (format!("energy_gamma{}_n{}.csv", o.run.gamma, o.run.n), energy_csv(&o.trajectory))).collect();
    Ok(Outputs {
        files: vec![("rates.csv", table.to_csv())],
        extra_files,
        results: json!({ "runs": outcomes.iter().map(outcome_summary).collect::<Vec<_>>() }),
    })
}

fn particle_run(cfg: &Resolved, p: Prepared) -> Result<Outputs, String> {
    let n = p.system.positions.len();
    let trajectory = simulate_system(p.system, &p.settings).map_err(|e| e.to_string())?;
    let last = trajectory.energies.last().expect("at least the initial energy");
    let mut results = json!({
        "particles": n,
        "epsilon": cfg.epsilon_for(n),
        "tau": cfg.tau_for(n),
        "steps": trajectory.energies.len() - 1,
        "newton_iterations": trajectory.newton_iterations,
        "final_energy": last.total,
        "final_internal_energy": last.internal,
        "worst_energy_increase": trajectory.worst_energy_increase(),
    });
    if let Some(target) = p.equilibrium {
        results["equilibrium_internal_energy"] = json!(target);
        results["relative_gap"] = json!((last.internal - target).abs() / target);
    }
    Ok(Outputs {
        files: vec![("snapshots.csv", snapshots_csv(&trajectory)), ("energy.csv", energy_csv(&trajectory))],
        extra_files: Vec::new(),
        results,
    })
}

pub fn snapshots_csv(t: &TrajectoryRecord) -> String {
    let mut out = String::from("step,time,id,x,y,mass,area,density\n");
    for s in &t.snapshots {
        for (i, (p, &area)) in s.positions.iter().zip(&s.areas).enumerate() {
            let m = t.masses[i];
            let _ = writeln!(out, "{},{},{},{},{},{},{},{}", s.step, s.time, i, p.x, p.y, m, area, m / area);
        }
    }
    out
}

pub fn energy_csv(t: &TrajectoryRecord) -> String {
    let mut out = String::from("step,time,F,internal\n");
    for e in &t.energies {
        let _ = writeln!(out, "{},{},{},{}", e.step, e.time, e.total, e.internal);
    }
    out
}

fn finish(cmd: Command, cfg: &Resolved, workers: usize, outcome: Result<Outputs, String>) -> Result<Vec<PathBuf>, RunFailure> {
    let dir = &cfg.output;
    let mut written = Vec::new();
    let write = |name: &str, text: &str, written: &mut Vec<PathBuf>| -> Result<(), String> {
        let path = dir.join(name);
        std::fs::write(&path, text).map_err(|e| format!("cannot write {}: {e}", path.display()))?;
        written.push(path);
        Ok(())
    };
    let io_failure = |message: String, written: Vec<PathBuf>| RunFailure { message, written };
    std::fs::create_dir_all(dir).map_err(|e| io_failure(format!("cannot create {}: {e}", dir.display()), Vec::new()))?;

    let (status, error, results, names) = match &outcome {
        Ok(out) => {
            let mut names: Vec<String> = Vec::new();
            for (name, text) in &out.files {
                write(name, text, &mut written).map_err(|m| io_failure(m, written.clone()))?;
                names.push(name.to_string());
            }
            for (name, text) in &out.extra_files {
                write(name, text, &mut written).map_err(|m| io_failure(m, written.clone()))?;
                names.push(name.clone());
            }
            ("complete", None, out.results.clone(), names)
        }
        Err(e) => ("failed", Some(e.clone()), Value::Null, Vec::new()),
    };
    let manifest = json!({
        "program": env!("CARGO_PKG_NAME"),
        "version": env!("CARGO_PKG_VERSION"),
        "command": cmd,
        "status": status,
        "error": error,
        "workers": workers,
        "config": cfg,
        "results": results,
        "files": names,
    });
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n";
    write("manifest.json", &text, &mut written).map_err(|m| io_failure(m, written.clone()))?;
    match outcome {
        Ok(_) => Ok(written),
        Err(message) => Err(RunFailure { message, written }),
    }
}
