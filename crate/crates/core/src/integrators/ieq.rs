use super::{momentum_from_difference, start_levels, Checkpoint, Scheme, SchemeConfig, Start, StepCounters, Stepper};
use crate::error::{check_dim, Error, Result};
use crate::hamiltonian::{aux_gradient_into, HamiltonianSystem, QuadMode};
use crate::linalg::{axpy_counted, dot_counted, max_eig_sym, Flops, PowerIteration};

/// Result of one explicit quadratised step.
#[derive(Debug, Clone, PartialEq)]
pub struct IeqUpdate {
    /// `qⁿ⁺¹`
    pub q: Vec<f64>,
    /// `ψⁿ⁺½`
    pub psi: f64,
    /// `pⁿ⁺½ = M (qⁿ⁺¹ − qⁿ) / k`
    pub p: Vec<f64>,
}

/// `ψ^½ = ψ(q₀) + (k/2) g(q₀)ᵀ M⁻¹ p₀`, with `ψ` and `g` built from `V′`
/// in residual mode.
pub fn psi_init(sys: &HamiltonianSystem, q0: &[f64], p0: &[f64], k: f64, eps: f64, mode: QuadMode) -> Result<f64> {
    check_dim(sys.dim(), q0.len())?;
    check_dim(sys.dim(), p0.len())?;
    let mut g = vec![0.0; sys.dim()];
    let psi = aux_gradient_into(sys.quadratised_potential(mode)?, q0, eps, &mut g)?;
    Ok(psi + 0.5 * k * sys.mass().inverse_inner(p0, &g)?)
}

/// One step of the non-split scheme: `qⁿ⁺¹` from `(qⁿ, qⁿ⁻¹, ψⁿ⁻½)` by a
/// rank-1 solve, then `ψⁿ⁺½` and `pⁿ⁺½`.
pub fn ieq_step(
    sys: &HamiltonianSystem,
    q_n: &[f64],
    q_nm1: &[f64],
    psi_mhalf: f64,
    k: f64,
    eps: f64,
) -> Result<IeqUpdate> {
    single_step(sys, QuadMode::Full, q_n, q_nm1, psi_mhalf, k, eps)
}

/// As [`ieq_step`] with the linear part `K` treated explicitly and `ψ`
/// quadratising the residual `V′` only.
pub fn ieq_split_step(
    sys: &HamiltonianSystem,
    q_n: &[f64],
    q_nm1: &[f64],
    psi_mhalf: f64,
    k: f64,
    eps: f64,
) -> Result<IeqUpdate> {
    sys.split().ok_or(Error::NoSplit)?;
    single_step(sys, QuadMode::Residual, q_n, q_nm1, psi_mhalf, k, eps)
}

fn single_step(
    sys: &HamiltonianSystem,
    mode: QuadMode,
    q_n: &[f64],
    q_nm1: &[f64],
    psi_mhalf: f64,
    k: f64,
    eps: f64,
) -> Result<IeqUpdate> {
    check_dim(sys.dim(), q_n.len())?;
    check_dim(sys.dim(), q_nm1.len())?;
    let mut ws = Workspace::new(sys.dim());
    let mut q = vec![0.0; sys.dim()];
    let mut flops = Flops::default();
    let psi = kernel(sys, mode, q_n, q_nm1, psi_mhalf, k, eps, &mut ws, &mut q, &mut flops)?;
    let mut p = Vec::new();
    momentum_from_difference(sys, &q, q_n, k, &mut p)?;
    if !psi.is_finite() || !q.iter().all(|x| x.is_finite()) {
        return Err(Error::Diverged { step: 0, reason: "non-finite state".into() });
    }
    Ok(IeqUpdate { q, psi, p })
}

/// Numerical energy `½ pᵀM⁻¹p + ½ψ²`, plus `½ (qⁿ⁺¹)ᵀ K qⁿ` when the pair
/// `(qⁿ⁺¹, qⁿ)` is given (split form).
pub fn ieq_energy(sys: &HamiltonianSystem, p_half: &[f64], psi_half: f64, q_pair: Option<(&[f64], &[f64])>) -> Result<f64> {
    let mut h = 0.5 * sys.mass().inverse_inner(p_half, p_half)? + 0.5 * psi_half * psi_half;
    if let Some((q_next, q_n)) = q_pair {
        let split = sys.split().ok_or(Error::NoSplit)?;
        h += 0.5 * split.stiffness.bilinear(q_next, q_n)?;
    }
    Ok(h)
}

/// Largest step keeping the split energy non-negative:
/// `2 / √λ_max(M^{-1/2} K M^{-T/2})`. Cached on the system after the first call.
pub fn max_stable_dt(sys: &HamiltonianSystem) -> Result<f64> {
    let split = sys.split().ok_or(Error::NoSplit)?;
    sys.stable_dt_cell()
        .get_or_init(|| {
            let op = sys.mass().congruence(&split.stiffness)?;
            let lam = max_eig_sym(&op, PowerIteration::default())?;
            Ok(if lam > 0.0 { 2.0 / lam.sqrt() } else { f64::INFINITY })
        })
        .clone()
}

pub(super) struct Workspace {
    g: Vec<f64>,
    alpha: Vec<f64>,
    kq: Vec<f64>,
    minv_kq: Vec<f64>,
}

impl Workspace {
    pub(super) fn new(n: usize) -> Self {
        Workspace { g: vec![0.0; n], alpha: vec![0.0; n], kq: Vec::new(), minv_kq: Vec::new() }
    }
}

/// Writes `qⁿ⁺¹` into `out` and returns `ψⁿ⁺½`.
///
/// With `α = (k/2) M⁻¹g`, `β = (k/2) g` the right-hand side
/// `2qⁿ − qⁿ⁻¹ + α (βᵀqⁿ⁻¹ − 2kψⁿ⁻½)` (less `k² M⁻¹K qⁿ` when split) is built
/// directly in `out` and the rank-1 system solved in place.
#[allow(clippy::too_many_arguments)]
pub(super) fn kernel(
    sys: &HamiltonianSystem,
    mode: QuadMode,
    q_n: &[f64],
    q_nm1: &[f64],
    psi_mhalf: f64,
    k: f64,
    eps: f64,
    ws: &mut Workspace,
    out: &mut [f64],
    flops: &mut Flops,
) -> Result<f64> {
    let n = q_n.len();
    aux_gradient_into(sys.quadratised_potential(mode)?, q_n, eps, &mut ws.g)?;
    sys.mass().solve_into(&ws.g, &mut ws.alpha)?;
    let half_k = 0.5 * k;
    ws.alpha.iter_mut().for_each(|a| *a *= half_k);
    flops.add(n);

    let g_qm1 = dot_counted(&ws.g, q_nm1, flops);
    let coeff = half_k * g_qm1 - 2.0 * k * psi_mhalf;
    flops.add(4);
    for i in 0..n {
        out[i] = 2.0 * q_n[i] - q_nm1[i] + ws.alpha[i] * coeff;
    }
    flops.add(4 * n);
    if mode == QuadMode::Residual {
        let split = sys.split().ok_or(Error::NoSplit)?;
        ws.kq.resize(n, 0.0);
        ws.minv_kq.resize(n, 0.0);
        split.stiffness.apply_into(q_n, &mut ws.kq)?;
        sys.mass().solve_into(&ws.kq, &mut ws.minv_kq)?;
        let k2 = k * k;
        out.iter_mut().zip(&ws.minv_kq).for_each(|(o, v)| *o -= k2 * v);
        flops.add(2 * n);
    }

    // βᵀα = (k/2) gᵀα
    let beta_alpha = half_k * dot_counted(&ws.g, &ws.alpha, flops);
    let denominator = 1.0 + beta_alpha;
    flops.add(2);
    if !(denominator >= 1e-14) {
        // α = (k/2)M⁻¹g makes βᵀα ≥ 0; anything else is a broken input.
        return Err(Error::SingularUpdate { denominator });
    }
    let beta_b = half_k * dot_counted(&ws.g, out, flops);
    flops.add(1);
    axpy_counted(-beta_b / denominator, &ws.alpha, out, flops);

    // ψⁿ⁺½ = ψⁿ⁻½ + ½ gᵀ(qⁿ⁺¹ − qⁿ⁻¹)
    let psi = psi_mhalf + 0.5 * (dot_counted(&ws.g, out, flops) - g_qm1);
    flops.add(3);
    Ok(psi)
}

/// Explicit quadratised stepper, split or not.
pub struct IeqStepper<'a> {
    sys: &'a HamiltonianSystem,
    mode: QuadMode,
    k: f64,
    eps: f64,
    n: usize,
    q: Vec<f64>,
    q_next: Vec<f64>,
    psi: f64,
    p: Vec<f64>,
    scratch: Vec<f64>,
    ws: Workspace,
    counters: StepCounters,
}

impl<'a> IeqStepper<'a> {
    pub fn new(sys: &'a HamiltonianSystem, cfg: &SchemeConfig, q0: &[f64], p0: &[f64]) -> Result<Self> {
        let mode = match cfg.scheme {
            Scheme::Ieq => QuadMode::Full,
            Scheme::IeqSplit => QuadMode::Residual,
            other => return Err(Error::InvalidParameter(format!("{other} is not an explicit quadratised scheme"))),
        };
        let k = cfg.dt;
        let (q, q_next) = start_levels(sys, q0, p0, k, cfg.start)?;
        let psi = psi_init(sys, q0, p0, k, cfg.eps, mode)?;
        let mut p = Vec::new();
        momentum_from_difference(sys, &q_next, &q, k, &mut p)?;
        let n = sys.dim();
        let extra = (cfg.start == Start::Taylor) as u64;
        Ok(IeqStepper {
            sys,
            mode,
            k,
            eps: cfg.eps,
            n: 0,
            q,
            q_next,
            psi,
            p,
            scratch: vec![0.0; n],
            ws: Workspace::new(n),
            counters: StepCounters { gradient_evals: 1 + extra, mass_solves: 2 + extra, ..Default::default() },
        })
    }

    /// `ψⁿ⁺½`
    pub fn psi(&self) -> f64 {
        self.psi
    }

    /// Resumes from a checkpoint written by [`Stepper::checkpoint`].
    pub fn from_checkpoint(sys: &'a HamiltonianSystem, cfg: &SchemeConfig, cp: &Checkpoint) -> Result<Self> {
        check_dim(sys.dim(), cp.q.len())?;
        check_dim(sys.dim(), cp.q_prev.len())?;
        let mut s = IeqStepper::new(sys, cfg, &cp.q_prev, &vec![0.0; sys.dim()])?;
        s.n = cp.step;
        s.q_next.copy_from_slice(&cp.q);
        s.psi = cp.psi.ok_or_else(|| Error::InvalidParameter("checkpoint has no psi".into()))?;
        momentum_from_difference(sys, &s.q_next, &s.q, s.k, &mut s.p)?;
        s.counters = StepCounters::default();
        Ok(s)
    }
}

impl Stepper for IeqStepper<'_> {
    fn step_index(&self) -> usize {
        self.n
    }

    fn time(&self) -> f64 {
        self.n as f64 * self.k
    }

    fn q(&self) -> &[f64] {
        &self.q
    }

    fn p_half(&self) -> &[f64] {
        &self.p
    }

    fn energy(&mut self) -> Result<f64> {
        let pair = match self.mode {
            QuadMode::Full => None,
            QuadMode::Residual => Some((self.q_next.as_slice(), self.q.as_slice())),
        };
        ieq_energy(self.sys, &self.p, self.psi, pair)
    }

    fn advance(&mut self) -> Result<()> {
        // (qⁿ, qⁿ⁺¹, ψⁿ⁺½) → (qⁿ⁺¹, qⁿ⁺², ψⁿ⁺³ᐟ²)
        self.psi = kernel(
            self.sys,
            self.mode,
            &self.q_next,
            &self.q,
            self.psi,
            self.k,
            self.eps,
            &mut self.ws,
            &mut self.scratch,
            &mut self.counters.flops,
        )?;
        self.counters.gradient_evals += 1;
        self.counters.mass_solves += if self.mode == QuadMode::Residual { 2 } else { 1 };
        std::mem::swap(&mut self.q, &mut self.q_next);
        std::mem::swap(&mut self.q_next, &mut self.scratch);
        momentum_from_difference(self.sys, &self.q_next, &self.q, self.k, &mut self.p)?;
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
            dt: self.k,
            q: self.q_next.clone(),
            q_prev: self.q.clone(),
            psi: Some(self.psi),
        })
    }
}
