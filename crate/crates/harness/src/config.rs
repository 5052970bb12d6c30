//! Flat `key = value` experiment configuration.
//!
//! One key per line, `#` starts a comment, blank lines are ignored. Model
//! parameters carry the model name as a prefix (`fpu.omega`, `string.tension`,
//! `plate.thickness`). Command-line `--set key=value` pairs are applied after
//! the file, in order.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use ieqsim::integrators::{Scheme, Start};
use ieqsim::models::fpu::FpuParams;
use ieqsim::models::plate::PlateParams;
use ieqsim::models::string::StringParams;

use crate::error::{config_err, HarnessError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Model {
    Fpu,
    String,
    Plate,
}

impl Model {
    pub fn name(self) -> &'static str {
        match self {
            Model::Fpu => "fpu",
            Model::String => "string",
            Model::Plate => "plate",
        }
    }
}

impl fmt::Display for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Model {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fpu" => Ok(Model::Fpu),
            "string" => Ok(Model::String),
            "plate" => Ok(Model::Plate),
            other => config_err(format!("unknown model `{other}`")),
        }
    }
}

/// A generic scheme, or one of the model-specific baselines.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Generic(Scheme),
    StringImplicit,
    PlateLinImp,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Generic(s) => s.name(),
            Method::StringImplicit => "string_implicit",
            Method::PlateLinImp => "plate_linimp",
        }
    }

    pub fn supports(self, model: Model) -> bool {
        match self {
            Method::Generic(_) => true,
            Method::StringImplicit => model == Model::String,
            Method::PlateLinImp => model == Model::Plate,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "string_implicit" => Ok(Method::StringImplicit),
            "plate_linimp" => Ok(Method::PlateLinImp),
            other => other
                .parse::<Scheme>()
                .map(Method::Generic)
                .map_err(|_| HarnessError::Config(format!("unknown scheme `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub model: Model,
    pub scheme: Method,
    /// Schemes compared by `converge`, `bench` and `scan`; `[scheme]` when empty.
    pub schemes: Vec<Method>,
    pub fpu: FpuParams,
    pub string: StringParams,
    pub string_segments: Option<usize>,
    /// Step used by the string grid rule `h ≥ 1.05 √(E/ρ) k`.
    pub string_grid_dt: Option<f64>,
    pub plate: PlateParams,
    pub plate_grid: Option<usize>,
    /// Step used by the plate grid rule.
    pub plate_grid_dt: Option<f64>,
    pub dt: f64,
    pub dt_sequence: Option<Vec<f64>>,
    /// Simulated time in seconds.
    pub duration: f64,
    pub alpha: f64,
    /// `None` selects the model default (`1e8` for the string, `0` otherwise).
    pub eps: Option<f64>,
    pub quad_nodes: usize,
    pub start: Start,
    pub allow_unstable: bool,
    pub divergence_threshold: f64,
    /// Output coordinate override.
    pub probe: Option<usize>,
    pub seed: u64,
    /// Amplitude of a seeded uniform perturbation added to `q₀`.
    pub noise: f64,
    /// Write every n-th row of the trace.
    pub output_every: usize,
    pub output: Option<PathBuf>,
    pub newton_tol: f64,
    pub newton_max_iter: usize,
    pub dt_list: Vec<f64>,
    pub fine_dt: Option<f64>,
    pub reference: Option<PathBuf>,
    pub repetitions: usize,
    pub scan_min: f64,
    pub scan_max: f64,
    pub scan_cells: usize,
    pub scan_steps: usize,
    pub checkpoint: Option<PathBuf>,
    pub resume: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            model: Model::Fpu,
            scheme: Method::Generic(Scheme::Ieq),
            schemes: Vec::new(),
            fpu: FpuParams::default(),
            string: StringParams::c3(),
            string_segments: None,
            string_grid_dt: None,
            plate: PlateParams::steel(),
            plate_grid: None,
            plate_grid_dt: None,
            dt: 1e-3,
            dt_sequence: None,
            duration: 1.0,
            alpha: 1.0,
            eps: None,
            quad_nodes: 4,
            start: Start::default(),
            allow_unstable: false,
            divergence_threshold: 10.0,
            probe: None,
            seed: 0,
            noise: 0.0,
            output_every: 1,
            output: None,
            newton_tol: 1e-13,
            newton_max_iter: 20,
            dt_list: Vec::new(),
            fine_dt: None,
            reference: None,
            repetitions: 3,
            scan_min: 1e-4,
            scan_max: 1e-1,
            scan_cells: 40,
            scan_steps: 1000,
            checkpoint: None,
            resume: None,
        }
    }
}

fn num<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value.parse().map_err(|_| HarnessError::Config(format!("bad value `{value}` for `{key}`")))
}

fn list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    value.split(',').map(str::trim).filter(|s| !s.is_empty()).map(|s| num(key, s)).collect()
}

fn flag(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => config_err(format!("bad value `{value}` for `{key}`")),
    }
}

impl ExperimentConfig {
    /// Reads `path`, then applies `overrides` (each `key=value`).
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let mut cfg = ExperimentConfig::default();
        if let Some(path) = path {
            let text = std::fs::read_to_string(path)
                .map_err(|e| HarnessError::Config(format!("cannot read {}: {e}", path.display())))?;
            cfg.apply_text(&text)?;
        }
        for o in overrides {
            let (k, v) = o
                .split_once('=')
                .ok_or_else(|| HarnessError::Config(format!("override `{o}` is not key=value")))?;
            cfg.set(k.trim(), v.trim())?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = ExperimentConfig::default();
        cfg.apply_text(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| HarnessError::Config(format!("line {}: expected key = value", i + 1)))?;
            self.set(k.trim(), v.trim())
                .map_err(|e| HarnessError::Config(format!("line {}: {e}", i + 1)))?;
        }
        Ok(())
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let path = |v: &str| Some(PathBuf::from(v));
        match key {
            "model" => self.model = value.parse()?,
            "scheme" => self.scheme = value.parse()?,
            "schemes" => self.schemes = value.split(',').map(|s| s.trim().parse()).collect::<Result<_>>()?,
            "dt" => self.dt = num(key, value)?,
            "dt_sequence" => self.dt_sequence = Some(list(key, value)?),
            "duration" => self.duration = num(key, value)?,
            "alpha" => self.alpha = num(key, value)?,
            "eps" => self.eps = Some(num(key, value)?),
            "quad_nodes" => self.quad_nodes = num(key, value)?,
            "start" => self.start = value.parse().map_err(|e: ieqsim::Error| HarnessError::Config(e.to_string()))?,
            "allow_unstable" => self.allow_unstable = flag(key, value)?,
            "divergence_threshold" => self.divergence_threshold = num(key, value)?,
            "probe" => self.probe = Some(num(key, value)?),
            "seed" => self.seed = num(key, value)?,
            "noise" => self.noise = num(key, value)?,
            "output_every" => self.output_every = num(key, value)?,
            "output" => self.output = path(value),
            "newton_tol" => self.newton_tol = num(key, value)?,
            "newton_max_iter" => self.newton_max_iter = num(key, value)?,
            "dt_list" => self.dt_list = list(key, value)?,
            "fine_dt" => self.fine_dt = Some(num(key, value)?),
            "reference" => self.reference = path(value),
            "repetitions" => self.repetitions = num(key, value)?,
            "scan_min" => self.scan_min = num(key, value)?,
            "scan_max" => self.scan_max = num(key, value)?,
            "scan_cells" => self.scan_cells = num(key, value)?,
            "scan_steps" => self.scan_steps = num(key, value)?,
            "checkpoint" => self.checkpoint = path(value),
            "resume" => self.resume = path(value),
            "fpu.half_count" => self.fpu.half_count = num(key, value)?,
            "fpu.omega" => self.fpu.omega = num(key, value)?,
            "string.rho" => self.string.rho = num(key, value)?,
            "string.area" => self.string.area = num(key, value)?,
            "string.length" => self.string.length = num(key, value)?,
            "string.young" => self.string.young = num(key, value)?,
            "string.tension" => self.string.tension = num(key, value)?,
            "string.segments" => self.string_segments = Some(num(key, value)?),
            "string.grid_dt" => self.string_grid_dt = Some(num(key, value)?),
            "plate.rho" => self.plate.rho = num(key, value)?,
            "plate.thickness" => self.plate.thickness = num(key, value)?,
            "plate.young" => self.plate.young = num(key, value)?,
            "plate.poisson" => self.plate.poisson = num(key, value)?,
            "plate.side" => self.plate.side = num(key, value)?,
            "plate.grid" => self.plate_grid = Some(num(key, value)?),
            "plate.grid_dt" => self.plate_grid_dt = Some(num(key, value)?),
            "plate.probe_x" => self.plate.probe.0 = num(key, value)?,
            "plate.probe_y" => self.plate.probe.1 = num(key, value)?,
            other => return config_err(format!("unknown key `{other}`")),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if !self.scheme.supports(self.model) {
            return config_err(format!("scheme {} cannot run the {} model", self.scheme, self.model));
        }
        if let Some(m) = self.schemes.iter().find(|m| !m.supports(self.model)) {
            return config_err(format!("scheme {m} cannot run the {} model", self.model));
        }
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                config_err(format!("{name} must be positive, got {v}"))
            }
        };
        positive("dt", self.dt)?;
        if !(self.duration >= 0.0) || !self.duration.is_finite() {
            return config_err(format!("duration must be non-negative, got {}", self.duration));
        }
        if !self.alpha.is_finite() {
            return config_err("alpha must be finite");
        }
        for dt in &self.dt_list {
            positive("dt_list entry", *dt)?;
        }
        if let Some(f) = self.fine_dt {
            positive("fine_dt", f)?;
        }
        if self.output_every == 0 {
            return config_err("output_every must be at least 1");
        }
        if self.scan_cells == 0 || !(self.scan_min > 0.0) || !(self.scan_max >= self.scan_min) {
            return config_err("scan range needs 0 < scan_min <= scan_max and scan_cells >= 1");
        }
        Ok(())
    }

    /// `schemes`, or the single `scheme` when no list was given.
    pub fn scheme_list(&self) -> Vec<Method> {
        if self.schemes.is_empty() {
            vec![self.scheme]
        } else {
            self.schemes.clone()
        }
    }

    pub fn eps_or_default(&self) -> f64 {
        self.eps.unwrap_or(match self.model {
            Model::String => 1e8,
            Model::Fpu | Model::Plate => 0.0,
        })
    }

    /// Number of steps covering `duration` at step `dt`.
    pub fn steps_for(&self, dt: f64) -> usize {
        (self.duration / dt).round() as usize
    }

    pub fn string_params(&self) -> StringParams {
        let segments = self
            .string_segments
            .or_else(|| self.string_grid_dt.map(|k| self.string.segments_for_dt(k)))
            .unwrap_or(self.string.segments);
        self.string.with_segments(segments)
    }

    pub fn plate_params(&self) -> PlateParams {
        let grid = self
            .plate_grid
            .or_else(|| self.plate_grid_dt.map(|k| self.plate.grid_for_dt(k)))
            .unwrap_or(self.plate.grid);
        self.plate.with_grid(grid)
    }
}
