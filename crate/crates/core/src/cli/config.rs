//! `key = value` run configuration with scenario defaults.
//!
//! Files hold one assignment per line. `#` starts a comment, keys may be
//! dotted (`physics.r`) or grouped under `[physics]` headers. Values given on
//! the command line win over the file, which wins over scenario defaults.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::reconstruction::SchemeParams;
use crate::state::PhysicalParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ScenarioKind {
    Riemann,
    RestPerturbation,
    InternalWave,
    LockExchange,
    GravityCurrent,
}

impl ScenarioKind {
    pub const ALL: [ScenarioKind; 5] = [
        ScenarioKind::Riemann,
        ScenarioKind::RestPerturbation,
        ScenarioKind::InternalWave,
        ScenarioKind::LockExchange,
        ScenarioKind::GravityCurrent,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ScenarioKind::Riemann => "riemann",
            ScenarioKind::RestPerturbation => "rest_perturbation",
            ScenarioKind::InternalWave => "internal_wave",
            ScenarioKind::LockExchange => "lock_exchange",
            ScenarioKind::GravityCurrent => "gravity_current",
        }
    }
}

impl fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ScenarioKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().replace('-', "_");
        Self::ALL
            .into_iter()
            .find(|k| k.name() == key)
            .ok_or_else(|| Error::UnknownScenario(s.to_string()))
    }
}

/// Everything needed to set up and drive one run.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationConfig {
    pub scenario: ScenarioKind,
    pub n_cells: usize,
    pub t_end: f64,
    /// Snapshot times, sorted, within `[0, t_end]`.
    pub output_times: Vec<f64>,
    pub physics: PhysicalParams,
    pub scheme: SchemeParams,
    /// Vertical spacing of the width tables.
    pub dz: f64,
    pub well_balanced: bool,
    pub output_dir: Option<PathBuf>,
    pub geometry_file: Option<PathBuf>,
    /// Amplitude of the initial bump in `rest_perturbation`.
    pub perturbation: f64,
    /// Stop once the max norm of the right-hand side drops below this value.
    pub steady_tol: Option<f64>,
    pub strict_hyperbolicity: bool,
    pub check_conservation: bool,
}

impl SimulationConfig {
    /// Defaults of a scenario.
    pub fn for_scenario(scenario: ScenarioKind) -> Self {
        let base = Self {
            scenario,
            n_cells: 200,
            t_end: 1.0,
            output_times: vec![],
            physics: PhysicalParams::default(),
            scheme: SchemeParams::default(),
            dz: 0.01,
            well_balanced: true,
            output_dir: None,
            geometry_file: None,
            perturbation: 0.0,
            steady_tol: None,
            strict_hyperbolicity: false,
            check_conservation: false,
        };
        let friction = PhysicalParams { n_i: 0.009, n_b: 0.009, friction_enabled: true, ..PhysicalParams::default() };
        let mut cfg = match scenario {
            ScenarioKind::Riemann => Self { t_end: 0.12, ..base },
            ScenarioKind::RestPerturbation => Self {
                t_end: 5.0,
                output_times: vec![0.0, 0.03, 0.1, 5.0],
                physics: PhysicalParams { r: 0.98, ..friction },
                perturbation: 1e-2,
                ..base
            },
            ScenarioKind::InternalWave => Self { t_end: 200.0, steady_tol: Some(1e-8), ..base },
            ScenarioKind::LockExchange => Self {
                t_end: 50.0,
                output_times: vec![0.0, 0.25, 1.0, 50.0],
                physics: PhysicalParams { r: 0.95, ..friction },
                ..base
            },
            ScenarioKind::GravityCurrent => Self {
                t_end: 2.0,
                output_times: vec![0.0, 1.0, 1.5, 2.0],
                physics: PhysicalParams { r: 0.95, entrain_k: 0.1, entrainment_enabled: true, ..friction },
                ..base
            },
        };
        if cfg.output_times.is_empty() {
            cfg.output_times = vec![0.0, cfg.t_end];
        }
        cfg
    }

    pub fn validate(&self) -> Result<()> {
        self.physics.validate()?;
        self.scheme.validate()?;
        if self.n_cells < 4 {
            return Err(Error::Parameter(format!("need at least 4 cells, got {}", self.n_cells)));
        }
        if !(self.t_end >= 0.0) || !self.t_end.is_finite() {
            return Err(Error::Parameter(format!("t_end must be finite and non-negative, got {}", self.t_end)));
        }
        if !(self.dz > 0.0) {
            return Err(Error::Parameter(format!("dz must be positive, got {}", self.dz)));
        }
        if self.output_times.windows(2).any(|w| !(w[0] <= w[1])) {
            return Err(Error::Parameter("output times must be sorted".into()));
        }
        if self.output_times.iter().any(|&t| !(0.0..=self.t_end).contains(&t)) {
            return Err(Error::Parameter(format!("output times must lie within [0, {}]", self.t_end)));
        }
        if !(self.perturbation.is_finite()) {
            return Err(Error::Parameter("perturbation must be finite".into()));
        }
        if let Some(tol) = self.steady_tol {
            if !(tol > 0.0) {
                return Err(Error::Parameter(format!("steady tolerance must be positive, got {tol}")));
            }
        }
        Ok(())
    }

    /// Clips output times to a changed `t_end` and makes sure it is included.
    pub fn set_t_end(&mut self, t_end: f64) {
        self.t_end = t_end;
        self.output_times.retain(|&t| t <= t_end);
        if self.output_times.last().is_none_or(|&t| t < t_end) {
            self.output_times.push(t_end);
        }
    }

    /// Applies one `key = value` assignment; `line` is only used in messages.
    pub fn set(&mut self, key: &str, value: &str, line: usize) -> Result<()> {
        let err = |message: String| Error::Config { line, message };
        let f = || -> Result<f64> {
            value.parse::<f64>().map_err(|_| err(format!("`{key}` expects a number, got `{value}`")))
        };
        let b = || -> Result<bool> {
            match value {
                "true" | "yes" | "on" | "1" => Ok(true),
                "false" | "no" | "off" | "0" => Ok(false),
                _ => Err(err(format!("`{key}` expects true or false, got `{value}`"))),
            }
        };
        match key {
            "scenario" | "scenario.name" => self.scenario = value.parse().map_err(|e: Error| err(e.to_string()))?,
            "cells" | "grid.cells" => {
                self.n_cells = value.parse().map_err(|_| err(format!("`{key}` expects a cell count, got `{value}`")))?
            }
            "t_end" | "time.t_end" => self.set_t_end(f()?),
            "output_times" | "time.outputs" => {
                self.output_times = value
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(|s| s.parse::<f64>().map_err(|_| err(format!("bad output time `{s}`"))))
                    .collect::<Result<_>>()?
            }
            "physics.g" => self.physics.g = f()?,
            "physics.r" => self.physics.r = f()?,
            "physics.n_i" => self.physics.n_i = f()?,
            "physics.n_b" => self.physics.n_b = f()?,
            "physics.k" => self.physics.entrain_k = f()?,
            "physics.friction" => self.physics.friction_enabled = b()?,
            "physics.entrainment" => self.physics.entrainment_enabled = b()?,
            "scheme.nu" => self.scheme.nu = f()?,
            "scheme.alpha" => self.scheme.alpha = f()?,
            "scheme.delta_b" => self.scheme.delta_b = f()?,
            "scheme.delta_a" => self.scheme.delta_a = f()?,
            "scheme.dz" | "geometry.dz" => self.dz = f()?,
            "scheme.well_balanced" => self.well_balanced = b()?,
            "geometry.file" => self.geometry_file = Some(PathBuf::from(value)),
            "output.dir" => self.output_dir = Some(PathBuf::from(value)),
            "scenario.perturbation" => self.perturbation = f()?,
            "run.steady_tol" => {
                self.steady_tol = match value {
                    "none" | "off" => None,
                    _ => Some(f()?),
                }
            }
            "run.strict_hyperbolicity" => self.strict_hyperbolicity = b()?,
            "run.check_conservation" => self.check_conservation = b()?,
            _ => return Err(err(format!("unknown key `{key}`"))),
        }
        Ok(())
    }
}

/// One parsed assignment with its 1-based source line.
#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    pub line: usize,
    pub key: String,
    pub value: String,
}

pub fn parse_assignments(text: &str) -> Result<Vec<Assignment>> {
    let mut section = String::new();
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if let Some(rest) = content.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .ok_or_else(|| Error::Config { line, message: format!("unterminated section header `{content}`") })?;
            section = name.trim().to_string();
            continue;
        }
        let (key, value) = content
            .split_once('=')
            .ok_or_else(|| Error::Config { line, message: format!("expected `key = value`, got `{content}`") })?;
        let key = key.trim();
        if key.is_empty() {
            return Err(Error::Config { line, message: "empty key".into() });
        }
        let value = value.trim().trim_matches('"').to_string();
        let key = if section.is_empty() { key.to_string() } else { format!("{section}.{key}") };
        out.push(Assignment { line, key, value });
    }
    Ok(out)
}

/// Overrides coming from command-line flags.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub scenario: Option<ScenarioKind>,
    pub n_cells: Option<usize>,
    pub nu: Option<f64>,
    pub t_end: Option<f64>,
    pub output_dir: Option<PathBuf>,
    pub no_well_balance: bool,
    pub no_friction: bool,
    pub no_entrainment: bool,
}

/// Scenario defaults, then `text`, then `overrides`.
pub fn load_config_str(text: &str, overrides: &Overrides) -> Result<SimulationConfig> {
    let assignments = parse_assignments(text)?;
    let scenario = match overrides.scenario {
        Some(s) => s,
        None => {
            let a = assignments
                .iter()
                .rev()
                .find(|a| a.key == "scenario" || a.key == "scenario.name")
                .ok_or_else(|| Error::Usage("no scenario given on the command line or in the config".into()))?;
            a.value.parse().map_err(|e: Error| Error::Config { line: a.line, message: e.to_string() })?
        }
    };
    let mut cfg = SimulationConfig::for_scenario(scenario);
    for a in &assignments {
        cfg.set(&a.key, &a.value, a.line)?;
    }
    cfg.scenario = scenario;
    if let Some(n) = overrides.n_cells {
        cfg.n_cells = n;
    }
    if let Some(nu) = overrides.nu {
        cfg.scheme.nu = nu;
    }
    if let Some(t) = overrides.t_end {
        cfg.set_t_end(t);
    }
    if let Some(dir) = &overrides.output_dir {
        cfg.output_dir = Some(dir.clone());
    }
    if overrides.no_well_balance {
        cfg.well_balanced = false;
    }
    if overrides.no_friction {
        cfg.physics.friction_enabled = false;
    }
    if overrides.no_entrainment {
        cfg.physics.entrainment_enabled = false;
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: Option<&Path>, overrides: &Overrides) -> Result<SimulationConfig> {
    let text = match path {
        Some(p) => fs::read_to_string(p)?,
        None => String::new(),
    };
    load_config_str(&text, overrides)
}
