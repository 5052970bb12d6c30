//! Time-stepping schemes for [`HamiltonianSystem`]s.
//!
//! Each scheme is available both as free per-step functions and as a
//! [`Stepper`] that owns an interleaved state, counts its own work and reports
//! a numerical energy. A stepper at row `n` holds `qⁿ` together with the
//! half-step quantities `pⁿ⁺½` (and `ψⁿ⁺½` for the quadratised schemes).

mod ieq;
mod marazzato;
pub mod quadrature;
mod stormer_verlet;
mod variable;

use std::fmt;
use std::str::FromStr;

pub use ieq::{ieq_energy, ieq_split_step, ieq_step, max_stable_dt, psi_init, IeqStepper, IeqUpdate};
pub use marazzato::{marazzato_energy, marazzato_step, MarazzatoStepper};
pub use stormer_verlet::{sv_init, sv_init_taylor, sv_step, StormerVerletStepper};
pub use variable::{ieq_variable_step, IeqVariableStepper};

use crate::error::{Error, Result};
use crate::hamiltonian::HamiltonianSystem;
use crate::linalg::{norm2, Flops, MassMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scheme {
    StormerVerlet,
    Marazzato,
    Ieq,
    IeqSplit,
    IeqVariable,
}

impl Scheme {
    pub const ALL: [Scheme; 5] =
        [Scheme::StormerVerlet, Scheme::Marazzato, Scheme::Ieq, Scheme::IeqSplit, Scheme::IeqVariable];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::StormerVerlet => "sv",
            Scheme::Marazzato => "marazzato",
            Scheme::Ieq => "ieq",
            Scheme::IeqSplit => "ieq_split",
            Scheme::IeqVariable => "ieq_variable",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sv" | "stormer_verlet" => Ok(Scheme::StormerVerlet),
            "marazzato" => Ok(Scheme::Marazzato),
            "ieq" => Ok(Scheme::Ieq),
            "ieq_split" => Ok(Scheme::IeqSplit),
            "ieq_variable" => Ok(Scheme::IeqVariable),
            other => Err(Error::InvalidParameter(format!("unknown scheme `{other}`"))),
        }
    }
}

/// How the second level `q¹` is formed from `(q₀, p₀)`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum Start {
    /// `q¹ = q₀ + k M⁻¹p₀`. The `O(k²)` defect in `q¹` acts as an `O(k)`
    /// velocity error, so trajectories converge at first order only.
    Plain,
    /// `q¹ = q₀ + k M⁻¹p₀ − (k²/2) M⁻¹∇V(q₀)`; costs one extra gradient.
    #[default]
    Taylor,
}

impl Start {
    pub fn name(self) -> &'static str {
        match self {
            Start::Plain => "plain",
            Start::Taylor => "taylor",
        }
    }
}

impl fmt::Display for Start {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Start {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "plain" => Ok(Start::Plain),
            "taylor" => Ok(Start::Taylor),
            other => Err(Error::InvalidParameter(format!("unknown start `{other}`"))),
        }
    }
}

/// `(q⁰, q¹)` for the chosen start.
pub fn start_levels(
    sys: &HamiltonianSystem,
    q0: &[f64],
    p0: &[f64],
    k: f64,
    start: Start,
) -> Result<(Vec<f64>, Vec<f64>)> {
    match start {
        Start::Plain => sv_init(sys, q0, p0, k),
        Start::Taylor => sv_init_taylor(sys, q0, p0, k),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SchemeConfig {
    pub scheme: Scheme,
    /// Time step `k` in seconds.
    pub dt: f64,
    /// Cycled sequence of `q` steps for [`Scheme::IeqVariable`]; `[dt]` when absent.
    pub dt_sequence: Option<Vec<f64>>,
    /// Shift `ε ≥ 0` added to the quadratised potential.
    pub eps: f64,
    /// Gauss–Legendre nodes for the free-flight integral.
    pub quad_nodes: usize,
    /// Multiplier on the momentum bound beyond which a run is declared diverged.
    pub divergence_threshold: f64,
    /// Permit split steps above the stability bound.
    pub allow_unstable: bool,
    pub start: Start,
}

impl SchemeConfig {
    pub fn new(scheme: Scheme, dt: f64) -> Self {
        SchemeConfig {
            scheme,
            dt,
            dt_sequence: None,
            eps: 0.0,
            quad_nodes: 4,
            divergence_threshold: 10.0,
            allow_unstable: false,
            start: Start::default(),
        }
    }

    pub fn with_start(mut self, start: Start) -> Self {
        self.start = start;
        self
    }

    pub fn with_eps(mut self, eps: f64) -> Self {
        self.eps = eps;
        self
    }

    pub fn with_quad_nodes(mut self, n: usize) -> Self {
        self.quad_nodes = n;
        self
    }

    pub fn with_dt_sequence(mut self, seq: Vec<f64>) -> Self {
        self.dt_sequence = Some(seq);
        self
    }

    pub fn allowing_unstable(mut self) -> Self {
        self.allow_unstable = true;
        self
    }

    pub fn validate(&self, sys: &HamiltonianSystem) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return bad(format!("dt must be positive, got {}", self.dt));
        }
        if !(self.eps >= 0.0) {
            return bad(format!("eps must be non-negative, got {}", self.eps));
        }
        if self.quad_nodes == 0 {
            return bad("quad_nodes must be at least 1".into());
        }
        if !(self.divergence_threshold > 0.0) {
            return bad("divergence_threshold must be positive".into());
        }
        if let Some(seq) = &self.dt_sequence {
            if seq.is_empty() || seq.iter().any(|k| !(*k > 0.0) || !k.is_finite()) {
                return bad("dt_sequence entries must be positive".into());
            }
        }
        if self.scheme == Scheme::IeqSplit {
            sys.split().ok_or(Error::NoSplit)?;
            if !self.allow_unstable {
                let limit = max_stable_dt(sys)?;
                if self.dt > limit {
                    return bad(format!("dt = {} exceeds the split stability bound {limit}", self.dt));
                }
            }
        }
        Ok(())
    }
}

/// Work done by a stepper since it was built (initialisation included).
#[derive(Debug, Default, Clone, Copy, PartialEq, Eq)]
pub struct StepCounters {
    pub steps: u64,
    pub gradient_evals: u64,
    pub mass_solves: u64,
    pub linear_solves: u64,
    pub newton_iterations: u64,
    /// Arithmetic of the update excluding gradient evaluations, mass solves
    /// and stiffness applications.
    pub flops: Flops,
}

/// One row of an energy trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergySample {
    pub step: usize,
    pub energy: f64,
    pub rel: f64,
}

/// `(H − H₀) / H₀`; the absolute deviation when `H₀ = 0`.
pub fn relative_energy_deviation(energy: f64, reference: f64) -> f64 {
    if reference == 0.0 {
        energy - reference
    } else {
        (energy - reference) / reference
    }
}

/// Restart data: the two most recent `q` levels and `ψ`.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    /// Row index `n` of `q_prev`.
    pub step: usize,
    pub dt: f64,
    /// `qⁿ⁺¹`
    pub q: Vec<f64>,
    /// `qⁿ`
    pub q_prev: Vec<f64>,
    /// `ψⁿ⁺½`
    pub psi: Option<f64>,
}

/// A time stepper owning its state.
pub trait Stepper {
    /// Row index `n`.
    fn step_index(&self) -> usize;

    /// `tⁿ`
    fn time(&self) -> f64;

    /// `qⁿ`
    fn q(&self) -> &[f64];

    /// `pⁿ⁺½`
    fn p_half(&self) -> &[f64];

    /// The scheme's numerical energy at this row.
    fn energy(&mut self) -> Result<f64>;

    /// Moves from row `n` to row `n + 1`.
    fn advance(&mut self) -> Result<()>;

    fn counters(&self) -> StepCounters;

    fn checkpoint(&self) -> Option<Checkpoint> {
        None
    }
}

/// Builds the stepper for `cfg` from initial conditions `(q0, p0)`.
pub fn build_stepper<'a>(
    sys: &'a HamiltonianSystem,
    cfg: &SchemeConfig,
    q0: &[f64],
    p0: &[f64],
) -> Result<Box<dyn Stepper + 'a>> {
    cfg.validate(sys)?;
    Ok(match cfg.scheme {
        Scheme::StormerVerlet => Box::new(StormerVerletStepper::new(sys, cfg, q0, p0)?),
        Scheme::Marazzato => Box::new(MarazzatoStepper::new(sys, cfg, q0, p0)?),
        Scheme::Ieq | Scheme::IeqSplit => Box::new(IeqStepper::new(sys, cfg, q0, p0)?),
        Scheme::IeqVariable => Box::new(IeqVariableStepper::new(sys, cfg, q0, p0)?),
    })
}

/// Aborts a run on non-finite values or momenta far beyond the bound implied
/// by the initial energy.
#[derive(Debug, Clone, Copy)]
pub struct DivergenceMonitor {
    limit: f64,
}

impl DivergenceMonitor {
    pub fn new(sys: &HamiltonianSystem, initial_energy: f64, threshold: f64) -> Result<Self> {
        let bound = crate::hamiltonian::momentum_bound(sys, initial_energy.abs())?;
        Ok(DivergenceMonitor { limit: threshold * bound })
    }

    pub fn unbounded() -> Self {
        DivergenceMonitor { limit: f64::INFINITY }
    }

    pub fn limit(&self) -> f64 {
        self.limit
    }

    pub fn check(&self, step: usize, q: &[f64], p: &[f64]) -> Result<()> {
        if !q.iter().chain(p).all(|x| x.is_finite()) {
            return Err(Error::Diverged { step, reason: "non-finite state".into() });
        }
        let pn = norm2(p);
        if pn > self.limit {
            return Err(Error::Diverged {
                step,
                reason: format!("|p| = {pn:e} exceeds {:e}", self.limit),
            });
        }
        Ok(())
    }
}

/// `p = M (q_next − q) / k`
pub(crate) fn momentum_from_difference(
    sys: &HamiltonianSystem,
    q_next: &[f64],
    q: &[f64],
    k: f64,
    out: &mut Vec<f64>,
) -> Result<()> {
    out.clear();
    out.extend(q_next.iter().zip(q).map(|(a, b)| (a - b) / k));
    match sys.mass() {
        MassMatrix::Scalar { c, .. } => out.iter_mut().for_each(|x| *x *= c),
        MassMatrix::Diagonal(d) => out.iter_mut().zip(d).for_each(|(x, di)| *x *= di),
        m @ MassMatrix::Dense { .. } => *out = m.apply(out)?,
    }
    Ok(())
}

/// Advances `stepper` by `steps` rows, recording the energy of every row
/// visited (the starting row included) and stopping with
/// [`Error::Diverged`] when `monitor` trips.
pub fn run_steps(
    stepper: &mut dyn Stepper,
    steps: usize,
    monitor: &DivergenceMonitor,
) -> Result<Vec<EnergySample>> {
    let mut out = Vec::with_capacity(steps + 1);
    let h0 = stepper.energy()?;
    out.push(EnergySample { step: stepper.step_index(), energy: h0, rel: 0.0 });
    for _ in 0..steps {
        stepper.advance()?;
        monitor.check(stepper.step_index(), stepper.q(), stepper.p_half())?;
        let h = stepper.energy()?;
        out.push(EnergySample { step: stepper.step_index(), energy: h, rel: relative_energy_deviation(h, h0) });
    }
    Ok(out)
}

/// Largest `|H_rel|` in a trace.
pub fn max_abs_rel(trace: &[EnergySample]) -> f64 {
    trace.iter().fold(0.0, |m, s| m.max(s.rel.abs()))
}
