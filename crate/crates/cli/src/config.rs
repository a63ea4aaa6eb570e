//! Flat TOML experiment configuration and its resolution into concrete,
//! validated parameters.

use std::path::{Path, PathBuf};

use laguerre_flow::Mode;
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("malformed configuration: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

fn invalid(msg: impl Into<String>) -> ConfigError {
    ConfigError::Invalid(msg.into())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Case {
    Barenblatt,
    Cross,
    Custom,
}

/// A time step or regularization: a number, or the name of a scaling rule.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Scale {
    Value(f64),
    Rule(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PotentialKind {
    None,
    Quadratic,
}

/// Everything a configuration file may set. Unset keys take the defaults of
/// the selected case.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub case: Option<Case>,
    pub mode: Option<String>,
    pub energy: Option<String>,
    pub gamma: Option<f64>,
    pub epsilon: Option<Scale>,
    pub tau: Option<Scale>,
    pub t0: Option<f64>,
    pub t_end: Option<f64>,
    pub n: Option<usize>,
    /// Barenblatt constant.
    pub c: Option<f64>,
    pub lloyd_iters: Option<usize>,
    pub domain_half_width: Option<f64>,
    pub entropy_samples: Option<usize>,
    pub gammas: Option<Vec<f64>>,
    pub ns: Option<Vec<usize>>,
    pub mass: Option<f64>,
    pub thickness: Option<f64>,
    pub center: Option<[f64; 2]>,
    pub potential: Option<PotentialKind>,
    pub domain_file: Option<PathBuf>,
    pub particle_file: Option<PathBuf>,
    pub snapshot_times: Option<Vec<f64>>,
    pub output: Option<PathBuf>,
    pub seed: Option<u64>,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read { path: path.into(), source })?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        Ok(toml::from_str(text)?)
    }
}

/// How the time step and regularization are chosen.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(untagged)]
pub enum ResolvedScale {
    Value(f64),
    /// `eps = 10 / N`, `tau = 10 / N^2` for particle systems;
    /// `eps = 2/300`, `tau = 1/300` for the cross experiment.
    Standard(&'static str),
}

impl ResolvedScale {
    fn parse(name: &str, value: Option<Scale>, default: ResolvedScale) -> Result<Self, ConfigError> {
        match value {
            None => Ok(default),
            Some(Scale::Value(v)) if v > 0.0 && v.is_finite() => Ok(ResolvedScale::Value(v)),
            Some(Scale::Value(v)) => Err(invalid(format!("{name} must be positive, got {v}"))),
            Some(Scale::Rule(r)) if r == "standard" => Ok(ResolvedScale::Standard("standard")),
            Some(Scale::Rule(r)) => Err(invalid(format!("unknown {name} rule {r:?}"))),
        }
    }
}

/// Fully resolved parameters; echoed verbatim into the run manifest.
#[derive(Clone, Debug, Serialize)]
pub struct Resolved {
    pub case: Case,
    pub mode: Mode,
    pub energy: String,
    pub gamma: f64,
    pub epsilon: ResolvedScale,
    pub tau: ResolvedScale,
    pub t0: f64,
    pub t_end: f64,
    pub n: usize,
    pub c: f64,
    pub lloyd_iters: usize,
    pub domain_half_width: f64,
    pub entropy_samples: usize,
    pub gammas: Vec<f64>,
    pub ns: Vec<usize>,
    pub mass: f64,
    pub thickness: f64,
    pub center: [f64; 2],
    pub potential: PotentialKind,
    pub domain_file: Option<PathBuf>,
    pub particle_file: Option<PathBuf>,
    pub snapshot_times: Vec<f64>,
    pub output: PathBuf,
    pub seed: u64,
}

/// Values fixed by the subcommand rather than by the file.
pub struct Overrides {
    pub case: Option<Case>,
    pub output: Option<PathBuf>,
    pub seed: Option<u64>,
}

pub fn resolve(cfg: ExperimentConfig, over: Overrides) -> Result<Resolved, ConfigError> {
    let case = match (over.case, cfg.case) {
        (Some(forced), Some(given)) if forced != given => {
            return Err(invalid(format!("this command runs the {forced:?} case but the file selects {given:?}")))
        }
        (Some(forced), _) => forced,
        (None, given) => given.unwrap_or(Case::Barenblatt),
    };
    let cross = case == Case::Cross;
    let standard = ResolvedScale::Standard("standard");
    let mode = match cfg.mode.as_deref() {
        None => Mode::Clipped,
        Some(m) => m.parse().map_err(ConfigError::Invalid)?,
    };
    let energy = cfg.energy.unwrap_or_else(|| "power".into());
    if energy != "power" {
        return Err(invalid(format!("unknown energy family {energy:?}; only \"power\" is available")));
    }
    let (t0_default, t_end_default) = match case {
        Case::Barenblatt => (1.0 / 16.0, 1.0),
        Case::Cross => (0.0, 8.0),
        Case::Custom => (0.0, 1.0),
    };
    let gamma = cfg.gamma.unwrap_or(2.0);
    let resolved = Resolved {
        case,
        mode,
        energy,
        gamma,
        epsilon: ResolvedScale::parse("epsilon", cfg.epsilon, standard)?,
        tau: ResolvedScale::parse("tau", cfg.tau, standard)?,
        t0: cfg.t0.unwrap_or(t0_default),
        t_end: cfg.t_end.unwrap_or(t_end_default),
        n: cfg.n.unwrap_or(if cross { 2000 } else { 100 }),
        c: cfg.c.unwrap_or(1.0 / 3.0),
        lloyd_iters: cfg.lloyd_iters.unwrap_or(20),
        domain_half_width: cfg.domain_half_width.unwrap_or(if cross { 1.0 } else { 2.0 }),
        entropy_samples: cfg.entropy_samples.unwrap_or(0),
        gammas: cfg.gammas.unwrap_or_else(|| vec![1.5, 2.0, 4.0]),
        ns: cfg.ns.unwrap_or_else(|| vec![100, 400, 1600]),
        mass: cfg.mass.unwrap_or(0.12),
        thickness: cfg.thickness.unwrap_or(0.25),
        center: cfg.center.unwrap_or([0.0, 0.0]),
        potential: cfg.potential.unwrap_or(if cross { PotentialKind::Quadratic } else { PotentialKind::None }),
        domain_file: cfg.domain_file,
        particle_file: cfg.particle_file,
        snapshot_times: cfg.snapshot_times.unwrap_or_default(),
        output: over.output.or(cfg.output).unwrap_or_else(|| PathBuf::from("output")),
        seed: over.seed.or(cfg.seed).unwrap_or(0),
    };
    resolved.validate()?;
    Ok(resolved)
}

impl Resolved {
    fn validate(&self) -> Result<(), ConfigError> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(invalid(format!("{name} must be positive, got {v}")))
            }
        };
        if !(self.gamma > 1.0 && self.gamma.is_finite()) {
            return Err(invalid(format!("gamma must exceed 1, got {}", self.gamma)));
        }
        if !(self.t0.is_finite() && self.t_end.is_finite() && self.t_end > self.t0) {
            return Err(invalid(format!("t_end {} must exceed t0 {}", self.t_end, self.t0)));
        }
        if self.n == 0 {
            return Err(invalid("n must be at least 1"));
        }
        positive("domain_half_width", self.domain_half_width)?;
        if let Some(t) = self.snapshot_times.iter().find(|&&t| !(t >= self.t0 && t <= self.t_end)) {
            return Err(invalid(format!("snapshot time {t} lies outside [{}, {}]", self.t0, self.t_end)));
        }
        match self.case {
            Case::Barenblatt => {
                positive("c", self.c)?;
                positive("t0", self.t0)?;
                if self.gammas.is_empty() || self.ns.is_empty() {
                    return Err(invalid("gammas and ns must not be empty"));
                }
                if let Some(g) = self.gammas.iter().find(|&&g| !(g > 1.0 && g.is_finite())) {
                    return Err(invalid(format!("gamma must exceed 1, got {g}")));
                }
                if self.ns.contains(&0) || self.ns.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(invalid("ns must be positive and strictly increasing"));
                }
            }
            Case::Cross => {
                positive("mass", self.mass)?;
                positive("thickness", self.thickness)?;
                if self.thickness > 1.0 {
                    return Err(invalid("cross thickness cannot exceed its unit extent"));
                }
            }
            Case::Custom => {
                for (name, file) in [("domain_file", &self.domain_file), ("particle_file", &self.particle_file)] {
                    match file {
                        None => return Err(invalid(format!("the custom case needs {name}"))),
                        Some(p) if !p.is_file() => return Err(invalid(format!("{name} {} does not exist", p.display()))),
                        Some(_) => {}
                    }
                }
            }
        }
        Ok(())
    }

    /// Regularization for `n` particles.
    pub fn epsilon_for(&self, n: usize) -> f64 {
        match self.epsilon {
            ResolvedScale::Value(v) => v,
            ResolvedScale::Standard(_) if self.case == Case::Cross => 2.0 / 300.0,
            ResolvedScale::Standard(_) => 10.0 / n as f64,
        }
    }

    /// Time step for `n` particles.
    pub fn tau_for(&self, n: usize) -> f64 {
        match self.tau {
            ResolvedScale::Value(v) => v,
            ResolvedScale::Standard(_) if self.case == Case::Cross => 1.0 / 300.0,
            ResolvedScale::Standard(_) => 10.0 / (n as f64 * n as f64),
        }
    }
}
