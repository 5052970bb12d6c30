use super::{momentum_from_difference, start_levels, Checkpoint, SchemeConfig, Start, StepCounters, Stepper};
use crate::error::{check_dim, Error, Result};
use crate::hamiltonian::HamiltonianSystem;
use crate::linalg::axpy;

/// Starting pair `(q⁰, q¹)` with `q¹ = q₀ + k M⁻¹ p₀`.
pub fn sv_init(sys: &HamiltonianSystem, q0: &[f64], p0: &[f64], k: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    check_dim(sys.dim(), q0.len())?;
    check_dim(sys.dim(), p0.len())?;
    let mut q1 = sys.mass().solve(p0)?;
    q1.iter_mut().zip(q0).for_each(|(x, q)| *x = q + k * *x);
    Ok((q0.to_vec(), q1))
}

/// [`sv_init`] with the curvature term `−(k²/2) M⁻¹∇V(q₀)` added to `q¹`.
pub fn sv_init_taylor(sys: &HamiltonianSystem, q0: &[f64], p0: &[f64], k: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    let (q0, mut q1) = sv_init(sys, q0, p0, k)?;
    let mut grad = vec![0.0; sys.dim()];
    sys.potential().value_and_gradient(&q0, &mut grad);
    let accel = sys.mass().solve(&grad)?;
    axpy(-0.5 * k * k, &accel, &mut q1);
    Ok((q0, q1))
}

/// `qⁿ⁺¹ = 2qⁿ − qⁿ⁻¹ − k² M⁻¹ ∇V(qⁿ)`, with one gradient evaluation.
pub fn sv_step(sys: &HamiltonianSystem, q_n: &[f64], q_nm1: &[f64], k: f64) -> Result<Vec<f64>> {
    check_dim(sys.dim(), q_n.len())?;
    check_dim(sys.dim(), q_nm1.len())?;
    let mut grad = vec![0.0; sys.dim()];
    sys.potential().value_and_gradient(q_n, &mut grad);
    let mut out = vec![0.0; sys.dim()];
    step_into(sys, q_n, q_nm1, k, &grad, &mut out)?;
    if !out.iter().all(|x| x.is_finite()) {
        return Err(Error::Diverged { step: 0, reason: "non-finite state".into() });
    }
    Ok(out)
}

fn step_into(sys: &HamiltonianSystem, q_n: &[f64], q_nm1: &[f64], k: f64, grad: &[f64], out: &mut [f64]) -> Result<()> {
    sys.mass().solve_into(grad, out)?;
    let k2 = k * k;
    for ((o, a), b) in out.iter_mut().zip(q_n).zip(q_nm1) {
        *o = 2.0 * a - b - k2 * *o;
    }
    Ok(())
}

/// Störmer–Verlet stepper.
///
/// The reported energy is `½ pᵀM⁻¹p + ½ (V(qⁿ) + V(qⁿ⁺¹))` with
/// `p = M (qⁿ⁺¹ − qⁿ) / k`. It is not conserved exactly, but it stays bounded
/// while the scheme is stable and blows up with it.
pub struct StormerVerletStepper<'a> {
    sys: &'a HamiltonianSystem,
    k: f64,
    n: usize,
    q: Vec<f64>,
    q_next: Vec<f64>,
    v: f64,
    v_next: f64,
    grad: Vec<f64>,
    scratch: Vec<f64>,
    p: Vec<f64>,
    counters: StepCounters,
}

impl<'a> StormerVerletStepper<'a> {
    pub fn new(sys: &'a HamiltonianSystem, cfg: &SchemeConfig, q0: &[f64], p0: &[f64]) -> Result<Self> {
        let k = cfg.dt;
        let (q, q_next) = start_levels(sys, q0, p0, k, cfg.start)?;
        let mut grad = vec![0.0; sys.dim()];
        let v = sys.potential().value(&q);
        let v_next = sys.potential().value_and_gradient(&q_next, &mut grad);
        let mut p = Vec::new();
        momentum_from_difference(sys, &q_next, &q, k, &mut p)?;
        let extra = (cfg.start == Start::Taylor) as u64;
        let counters = StepCounters { gradient_evals: 1 + extra, mass_solves: 1 + extra, ..Default::default() };
        let scratch = vec![0.0; sys.dim()];
        Ok(StormerVerletStepper { sys, k, n: 0, q, q_next, v, v_next, grad, scratch, p, counters })
    }
}

impl Stepper for StormerVerletStepper<'_> {
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
        Ok(0.5 * self.sys.mass().inverse_inner(&self.p, &self.p)? + 0.5 * (self.v + self.v_next))
    }

    fn advance(&mut self) -> Result<()> {
        // `grad` holds ∇V(qⁿ⁺¹) from the previous step.
        step_into(self.sys, &self.q_next, &self.q, self.k, &self.grad, &mut self.scratch)?;
        self.counters.flops.add(4 * self.q.len());
        self.counters.mass_solves += 1;
        std::mem::swap(&mut self.q, &mut self.q_next);
        std::mem::swap(&mut self.q_next, &mut self.scratch);
        self.v = self.v_next;
        self.v_next = self.sys.potential().value_and_gradient(&self.q_next, &mut self.grad);
        self.counters.gradient_evals += 1;
        momentum_from_difference(self.sys, &self.q_next, &self.q, self.k, &mut self.p)?;
        self.counters.steps += 1;
        self.n += 1;
        Ok(())
    }

    fn counters(&self) -> StepCounters {
        self.counters
    }

    fn checkpoint(&self) -> Option<Checkpoint> {
        Some(Checkpoint { step: self.n, dt: self.k, q: self.q_next.clone(), q_prev: self.q.clone(), psi: None })
    }
}
