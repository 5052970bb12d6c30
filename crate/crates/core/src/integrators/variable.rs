use super::{momentum_from_difference, psi_init, start_levels, Checkpoint, Start, SchemeConfig, StepCounters, Stepper};
use crate::error::{check_dim, Error, Result};
use crate::hamiltonian::{aux_gradient_into, HamiltonianSystem, QuadMode, StateVector};
use crate::linalg::{axpy_counted, dot_counted, Flops};

/// One step of the variable-step scheme in momentum form.
///
/// `state` carries `qⁿ`, `pⁿ⁻½` and `ψⁿ⁻½`. The momentum and `ψ` updates use
/// `k_n = tⁿ⁺½ − tⁿ⁻½`, the position update `k_phalf = tⁿ⁺¹ − tⁿ`. Eliminating
/// `ψⁿ⁺½` leaves `(I + αβᵀ) pⁿ⁺½ = pⁿ⁻½ − k_n g ψⁿ⁻½ − α βᵀpⁿ⁻½` with
/// `α = (k_n/2) g`, `β = (k_n/2) M⁻¹g`.
pub fn ieq_variable_step(
    sys: &HamiltonianSystem,
    state: &StateVector,
    k_n: f64,
    k_phalf: f64,
    eps: f64,
) -> Result<StateVector> {
    check_dim(sys.dim(), state.q.len())?;
    check_dim(sys.dim(), state.p.len())?;
    if !(k_n > 0.0 && k_phalf > 0.0) {
        return Err(Error::InvalidParameter(format!("steps must be positive, got {k_n} and {k_phalf}")));
    }
    let psi = state.psi.ok_or_else(|| Error::InvalidParameter("state has no psi".into()))?;
    let n = sys.dim();
    let mut ws = Workspace::new(n);
    let mut p = vec![0.0; n];
    let mut q = vec![0.0; n];
    let mut flops = Flops::default();
    let psi = kernel(sys, &state.q, &state.p, psi, k_n, k_phalf, eps, &mut ws, &mut p, &mut q, &mut flops)?;
    if !psi.is_finite() || !q.iter().chain(&p).all(|x| x.is_finite()) {
        return Err(Error::Diverged { step: state.step + 1, reason: "non-finite state".into() });
    }
    Ok(StateVector { q, p, psi: Some(psi), step: state.step + 1, dt: k_phalf })
}

struct Workspace {
    g: Vec<f64>,
    w: Vec<f64>,
}

impl Workspace {
    fn new(n: usize) -> Self {
        Workspace { g: vec![0.0; n], w: vec![0.0; n] }
    }
}

/// Writes `pⁿ⁺½` and `qⁿ⁺¹`, returns `ψⁿ⁺½`.
#[allow(clippy::too_many_arguments)]
fn kernel(
    sys: &HamiltonianSystem,
    q_n: &[f64],
    p_mhalf: &[f64],
    psi_mhalf: f64,
    k_n: f64,
    k_phalf: f64,
    eps: f64,
    ws: &mut Workspace,
    p_out: &mut [f64],
    q_out: &mut [f64],
    flops: &mut Flops,
) -> Result<f64> {
    aux_gradient_into(sys.quadratised_potential(QuadMode::Full)?, q_n, eps, &mut ws.g)?;
    sys.mass().solve_into(&ws.g, &mut ws.w)?;
    let h = 0.5 * k_n;
    let w_pm = dot_counted(&ws.w, p_mhalf, flops);
    p_out.copy_from_slice(p_mhalf);
    axpy_counted(-k_n * psi_mhalf - h * h * w_pm, &ws.g, p_out, flops);
    let denominator = 1.0 + h * h * dot_counted(&ws.w, &ws.g, flops);
    flops.add(8);
    if !(denominator >= 1e-14) {
        return Err(Error::SingularUpdate { denominator });
    }
    let w_rhs = dot_counted(&ws.w, p_out, flops);
    axpy_counted(-h * h * w_rhs / denominator, &ws.g, p_out, flops);
    let w_pp = dot_counted(&ws.w, p_out, flops);
    let psi = psi_mhalf + h * (w_pp + w_pm);
    flops.add(6);

    sys.mass().solve_into(p_out, q_out)?;
    for (x, q) in q_out.iter_mut().zip(q_n) {
        *x = q + k_phalf * *x;
    }
    flops.add(2 * q_n.len());
    Ok(psi)
}

/// Variable-step quadratised stepper.
///
/// The position steps `k^{n+½}` cycle through the configured sequence; the
/// half-step instants sit at the midpoints of the position intervals, so
/// `kⁿ = (k^{n−½} + k^{n+½}) / 2`.
pub struct IeqVariableStepper<'a> {
    sys: &'a HamiltonianSystem,
    seq: Vec<f64>,
    eps: f64,
    n: usize,
    t: f64,
    q: Vec<f64>,
    q_next: Vec<f64>,
    p: Vec<f64>,
    psi: f64,
    p_scratch: Vec<f64>,
    q_scratch: Vec<f64>,
    ws: Workspace,
    counters: StepCounters,
}

impl<'a> IeqVariableStepper<'a> {
    pub fn new(sys: &'a HamiltonianSystem, cfg: &SchemeConfig, q0: &[f64], p0: &[f64]) -> Result<Self> {
        let seq = cfg.dt_sequence.clone().unwrap_or_else(|| vec![cfg.dt]);
        if seq.is_empty() || seq.iter().any(|k| !(*k > 0.0)) {
            return Err(Error::InvalidParameter("dt_sequence entries must be positive".into()));
        }
        let (q, q_next) = start_levels(sys, q0, p0, seq[0], cfg.start)?;
        let psi = psi_init(sys, q0, p0, seq[0], cfg.eps, QuadMode::Full)?;
        let mut p = Vec::new();
        momentum_from_difference(sys, &q_next, &q, seq[0], &mut p)?;
        let n = sys.dim();
        let extra = (cfg.start == Start::Taylor) as u64;
        Ok(IeqVariableStepper {
            sys,
            seq,
            eps: cfg.eps,
            n: 0,
            t: 0.0,
            q,
            q_next,
            p,
            psi,
            p_scratch: vec![0.0; n],
            q_scratch: vec![0.0; n],
            ws: Workspace::new(n),
            counters: StepCounters { gradient_evals: 1 + extra, mass_solves: 2 + extra, ..Default::default() },
        })
    }

    /// `k^{j+½}`
    pub fn q_step(&self, j: usize) -> f64 {
        self.seq[j % self.seq.len()]
    }

    /// `ψⁿ⁺½`
    pub fn psi(&self) -> f64 {
        self.psi
    }
}

impl Stepper for IeqVariableStepper<'_> {
    fn step_index(&self) -> usize {
        self.n
    }

    fn time(&self) -> f64 {
        self.t
    }

    fn q(&self) -> &[f64] {
        &self.q
    }

    fn p_half(&self) -> &[f64] {
        &self.p
    }

    fn energy(&mut self) -> Result<f64> {
        Ok(0.5 * self.sys.mass().inverse_inner(&self.p, &self.p)? + 0.5 * self.psi * self.psi)
    }

    fn advance(&mut self) -> Result<()> {
        let k_before = self.q_step(self.n);
        let k_after = self.q_step(self.n + 1);
        let k_mid = 0.5 * (k_before + k_after);
        self.psi = kernel(
            self.sys,
            &self.q_next,
            &self.p,
            self.psi,
            k_mid,
            k_after,
            self.eps,
            &mut self.ws,
            &mut self.p_scratch,
            &mut self.q_scratch,
            &mut self.counters.flops,
        )?;
        self.counters.gradient_evals += 1;
        self.counters.mass_solves += 2;
        std::mem::swap(&mut self.p, &mut self.p_scratch);
        std::mem::swap(&mut self.q, &mut self.q_next);
        std::mem::swap(&mut self.q_next, &mut self.q_scratch);
        self.t += k_before;
        self.counters.steps += 1;
        self.n += 1;
        Ok(())
    }

    fn counters(&self) -> StepCounters {
        self.counters
    }

    fn checkpoint(&self) -> Option<Checkpoint> {
        Some(Checkpoint {
            step: self.n,
            dt: self.q_step(self.n),
            q: self.q_next.clone(),
            q_prev: self.q.clone(),
            psi: Some(self.psi),
        })
    }
}
