//! Building a model from a config, single runs and reference trajectories.

use std::fmt;
use std::io::{BufRead, Write};
use std::time::Instant;

use ieqsim::integrators::{
    build_stepper, relative_energy_deviation, DivergenceMonitor, IeqStepper, Scheme, SchemeConfig, StepCounters,
    Stepper,
};
use ieqsim::models::fpu::{fpu_build, fpu_initial};
use ieqsim::models::plate::{plate_build, plate_initial, Plate, PlateLinImp};
use ieqsim::models::string::{string_build, string_initial, NewtonSettings, StringImplicitStepper, StringParams};
use ieqsim::HamiltonianSystem;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::checkpoint::{read_checkpoint, write_checkpoint};
use crate::config::{ExperimentConfig, Method, Model};
use crate::error::{config_err, HarnessError, Result};
use crate::table::{fmt_f64, write_row};

enum Built {
    Fpu(HamiltonianSystem),
    String(StringParams, HamiltonianSystem),
    Plate(Plate),
}

/// A built model with its initial state, shareable across threads.
pub struct Setup {
    pub config: ExperimentConfig,
    built: Built,
    q0: Vec<f64>,
    p0: Vec<f64>,
}

fn relabel(sys: HamiltonianSystem, probe: Option<usize>) -> Result<HamiltonianSystem> {
    match probe {
        Some(i) => Ok(sys.with_probe(i, format!("q[{i}]"))?),
        None => Ok(sys),
    }
}

impl Setup {
    pub fn new(config: &ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let (built, (mut q0, p0)) = match config.model {
            Model::Fpu => {
                let sys = relabel(fpu_build(&config.fpu)?, config.probe)?;
                (Built::Fpu(sys), fpu_initial(&config.fpu, config.alpha)?)
            }
            Model::String => {
                let params = config.string_params();
                let sys = relabel(string_build(&params)?, config.probe)?;
                let init = string_initial(&params, config.alpha)?;
                (Built::String(params, sys), init)
            }
            Model::Plate => {
                let params = config.plate_params();
                let mut plate = plate_build(&params)?;
                plate.system = relabel(plate.system, config.probe)?;
                (Built::Plate(plate), plate_initial(&params, config.alpha)?)
            }
        };
        if config.noise != 0.0 {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            q0.iter_mut().for_each(|q| *q += config.noise * rng.gen_range(-1.0..1.0));
        }
        Ok(Setup { config: config.clone(), built, q0, p0 })
    }

    pub fn system(&self) -> &HamiltonianSystem {
        match &self.built {
            Built::Fpu(sys) | Built::String(_, sys) => sys,
            Built::Plate(plate) => &plate.system,
        }
    }

    pub fn initial(&self) -> (&[f64], &[f64]) {
        (&self.q0, &self.p0)
    }

    pub fn scheme_config(&self, scheme: Scheme, dt: f64) -> SchemeConfig {
        let c = &self.config;
        let mut sc = SchemeConfig::new(scheme, dt)
            .with_eps(c.eps_or_default())
            .with_quad_nodes(c.quad_nodes)
            .with_start(c.start);
        sc.divergence_threshold = c.divergence_threshold;
        sc.allow_unstable = c.allow_unstable;
        if let Some(seq) = &c.dt_sequence {
            sc = sc.with_dt_sequence(seq.clone());
        }
        sc
    }

    /// A fresh stepper for `method` at step `dt`, started from the initial state.
    pub fn stepper(&self, method: Method, dt: f64) -> Result<Box<dyn Stepper + '_>> {
        self.stepper_with(method, dt, false)
    }

    fn stepper_with(&self, method: Method, dt: f64, force_unstable: bool) -> Result<Box<dyn Stepper + '_>> {
        let (q0, p0) = self.initial();
        let c = &self.config;
        Ok(match (method, &self.built) {
            (Method::Generic(s), _) => {
                let mut sc = self.scheme_config(s, dt);
                sc.allow_unstable |= force_unstable;
                build_stepper(self.system(), &sc, q0, p0)?
            }
            (Method::StringImplicit, Built::String(params, _)) => {
                let newton = NewtonSettings { tol: c.newton_tol, max_iter: c.newton_max_iter };
                Box::new(StringImplicitStepper::new(params, dt, newton, c.start, q0, p0)?)
            }
            (Method::PlateLinImp, Built::Plate(plate)) => Box::new(PlateLinImp::new(plate, dt, c.start, q0, p0)?),
            (m, _) => return config_err(format!("scheme {m} cannot run the {} model", c.model)),
        })
    }

    /// Like [`Setup::stepper`] but ignoring the split stability bound.
    pub fn probing_stepper(&self, method: Method, dt: f64) -> Result<Box<dyn Stepper + '_>> {
        self.stepper_with(method, dt, true)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub scheme: Method,
    /// Steps taken.
    pub steps: usize,
    /// Data rows written (header excluded).
    pub rows: usize,
    pub max_abs_h_rel: f64,
    pub wall_time: f64,
    pub gradient_evals_per_step: f64,
    pub counters: StepCounters,
    /// Step at which the divergence monitor tripped.
    pub diverged_at: Option<usize>,
}

impl fmt::Display for RunSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "scheme = {}", self.scheme)?;
        writeln!(f, "steps = {}", self.steps)?;
        writeln!(f, "rows = {}", self.rows)?;
        writeln!(f, "max_abs_h_rel = {:e}", self.max_abs_h_rel)?;
        writeln!(f, "wall_time_s = {:.6}", self.wall_time)?;
        writeln!(f, "gradient_evals_per_step = {}", self.gradient_evals_per_step)?;
        writeln!(f, "linear_solves = {}", self.counters.linear_solves)?;
        match self.diverged_at {
            Some(n) => writeln!(f, "diverged_at = {n}"),
            None => writeln!(f, "diverged_at = none"),
        }
    }
}

pub const TRACE_HEADER: [&str; 6] = ["step", "t", "probe_q", "probe_p", "H", "H_rel"];

fn trace_row(s: &dyn Stepper, probe: usize, h: f64, rel: f64) -> Vec<String> {
    vec![
        s.step_index().to_string(),
        fmt_f64(s.time()),
        fmt_f64(s.q()[probe]),
        fmt_f64(s.p_half()[probe]),
        fmt_f64(h),
        fmt_f64(rel),
    ]
}

/// Steps the configured scheme over `duration` and writes the energy trace.
///
/// On divergence the rows written so far are flushed and the error returned.
pub fn run(config: &ExperimentConfig, out: &mut dyn Write) -> Result<RunSummary> {
    let setup = Setup::new(config)?;
    let sys = setup.system();
    let mut stepper = match &config.resume {
        Some(path) => resume(&setup, path)?,
        None => setup.stepper(config.scheme, config.dt)?,
    };
    let steps = config.steps_for(config.dt);
    let probe = sys.probe();
    let h0 = stepper.energy()?;
    let monitor = DivergenceMonitor::new(sys, h0, config.divergence_threshold)?;
    write_row(out, &TRACE_HEADER.map(String::from))?;
    write_row(out, &trace_row(stepper.as_ref(), probe, h0, 0.0))?;
    let mut summary = RunSummary {
        scheme: config.scheme,
        steps: 0,
        rows: 1,
        max_abs_h_rel: 0.0,
        wall_time: 0.0,
        gradient_evals_per_step: 0.0,
        counters: StepCounters::default(),
        diverged_at: None,
    };
    let before = stepper.counters();
    let clock = Instant::now();
    for i in 1..=steps {
        let stepped = stepper.advance().and_then(|_| monitor.check(stepper.step_index(), stepper.q(), stepper.p_half()));
        if let Err(e) = stepped {
            out.flush()?;
            let e = match e {
                ieqsim::Error::Diverged { reason, .. } => {
                    ieqsim::Error::Diverged { step: stepper.step_index(), reason }
                }
                other => other,
            };
            return Err(e.into());
        }
        let h = stepper.energy()?;
        let rel = relative_energy_deviation(h, h0);
        summary.max_abs_h_rel = summary.max_abs_h_rel.max(rel.abs());
        summary.steps = i;
        if i % config.output_every == 0 || i == steps {
            write_row(out, &trace_row(stepper.as_ref(), probe, h, rel))?;
            summary.rows += 1;
        }
    }
    out.flush()?;
    summary.wall_time = clock.elapsed().as_secs_f64();
    let after = stepper.counters();
    summary.counters = after;
    if steps > 0 {
        summary.gradient_evals_per_step = (after.gradient_evals - before.gradient_evals) as f64 / steps as f64;
    }
    if let Some(path) = &config.checkpoint {
        let cp = stepper
            .checkpoint()
            .ok_or_else(|| HarnessError::Config(format!("scheme {} does not write checkpoints", config.scheme)))?;
        write_checkpoint(path, &cp)?;
    }
    Ok(summary)
}

fn resume<'a>(setup: &'a Setup, path: &std::path::Path) -> Result<Box<dyn Stepper + 'a>> {
    let cp = read_checkpoint(path)?;
    match setup.config.scheme {
        Method::Generic(s @ (Scheme::Ieq | Scheme::IeqSplit)) => {
            let sc = setup.scheme_config(s, cp.dt);
            if cp.dt != setup.config.dt {
                return config_err(format!("checkpoint dt {} differs from dt {}", cp.dt, setup.config.dt));
            }
            Ok(Box::new(IeqStepper::from_checkpoint(setup.system(), &sc, &cp)?))
        }
        other => config_err(format!("resuming is supported for ieq and ieq_split, not {other}")),
    }
}

/// Positions sampled every `dt` seconds.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub dt: f64,
    pub samples: Vec<Vec<f64>>,
}

/// `m` with `dt = fine · 2^m`, if there is one.
pub fn power_of_two_ratio(dt: f64, fine: f64) -> Option<u32> {
    let r = dt / fine;
    let m = r.log2().round();
    if m >= 0.0 && m < 63.0 && (r - m.exp2()).abs() <= 1e-9 * r {
        Some(m as u32)
    } else {
        None
    }
}

/// Integer `dt / base`, if `dt` is a whole multiple of `base`.
pub fn whole_ratio(dt: f64, base: f64) -> Option<usize> {
    let r = dt / base;
    let n = r.round();
    (n >= 1.0 && (r - n).abs() <= 1e-9 * r).then_some(n as usize)
}

/// Störmer–Verlet at `fine_dt`, sampled every `config.dt` over `duration`.
pub fn reference(config: &ExperimentConfig, fine_dt: f64) -> Result<Trajectory> {
    let m = power_of_two_ratio(config.dt, fine_dt)
        .ok_or(HarnessError::NonCommensurateSteps { dt: config.dt, fine: fine_dt })?;
    let stride = 1usize << m;
    let setup = Setup::new(config)?;
    let samples_wanted = config.steps_for(config.dt);
    let mut s = setup.stepper(Method::Generic(Scheme::StormerVerlet), fine_dt)?;
    let mut samples = Vec::with_capacity(samples_wanted + 1);
    samples.push(s.q().to_vec());
    for i in 1..=samples_wanted * stride {
        s.advance()?;
        if !s.q().iter().all(|x| x.is_finite()) {
            return Err(ieqsim::Error::Diverged { step: i, reason: "non-finite reference".into() }.into());
        }
        if i % stride == 0 {
            samples.push(s.q().to_vec());
        }
    }
    Ok(Trajectory { dt: config.dt, samples })
}

pub fn write_trajectory(out: &mut dyn Write, traj: &Trajectory) -> Result<()> {
    let n = traj.samples.first().map_or(0, Vec::len);
    let mut header = vec!["step".to_string(), "t".to_string()];
    header.extend((0..n).map(|i| format!("q{i}")));
    write_row(out, &header)?;
    for (i, q) in traj.samples.iter().enumerate() {
        let mut row = vec![i.to_string(), fmt_f64(i as f64 * traj.dt)];
        row.extend(q.iter().map(|x| fmt_f64(*x)));
        write_row(out, &row)?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_trajectory(input: &mut dyn BufRead) -> Result<Trajectory> {
    let bad = |m: &str| HarnessError::Config(format!("trajectory: {m}"));
    let mut lines = input.lines();
    lines.next().ok_or_else(|| bad("empty file"))??;
    let mut samples = Vec::new();
    let mut times = Vec::new();
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() < 3 {
            return Err(bad("short row"));
        }
        times.push(cells[1].parse::<f64>().map_err(|_| bad("bad time"))?);
        let q = cells[2..].iter().map(|c| c.parse::<f64>().map_err(|_| bad("bad value"))).collect::<Result<Vec<_>>>()?;
        samples.push(q);
    }
    if samples.len() < 2 {
        return Err(bad("needs at least two rows"));
    }
    Ok(Trajectory { dt: times[1] - times[0], samples })
}
