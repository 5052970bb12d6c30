use super::quadrature::gauss_legendre;
use super::{SchemeConfig, Start, StepCounters, Stepper};
use crate::error::{check_dim, Error, Result};
use crate::hamiltonian::HamiltonianSystem;
use crate::linalg::axpy;

/// One free-flight step.
///
/// Returns `qⁿ⁺¹ = qⁿ + k M⁻¹pⁿ⁺½` and
/// `pⁿ⁺³ᐟ² = pⁿ⁻½ − 2 ∫ ∇V(qⁿ + (t − nk) M⁻¹pⁿ⁺½) dt` over `[nk, (n+1)k]`,
/// the integral taken by `quad_nodes`-point Gauss–Legendre.
pub fn marazzato_step(
    sys: &HamiltonianSystem,
    q_n: &[f64],
    p_half: &[f64],
    p_mhalf: &[f64],
    k: f64,
    quad_nodes: usize,
) -> Result<(Vec<f64>, Vec<f64>)> {
    check_dim(sys.dim(), q_n.len())?;
    check_dim(sys.dim(), p_half.len())?;
    check_dim(sys.dim(), p_mhalf.len())?;
    if quad_nodes == 0 {
        return Err(Error::InvalidParameter("quad_nodes must be at least 1".into()));
    }
    let rule = gauss_legendre(quad_nodes);
    let mut ws = Workspace::new(sys.dim());
    let mut q_next = vec![0.0; sys.dim()];
    let mut p_next = vec![0.0; sys.dim()];
    free_flight(sys, &rule, q_n, p_half, p_mhalf, k, &mut ws, &mut q_next, &mut p_next)?;
    if !q_next.iter().chain(&p_next).all(|x| x.is_finite()) {
        return Err(Error::Diverged { step: 0, reason: "non-finite state".into() });
    }
    Ok((q_next, p_next))
}

/// `½ (pⁿ⁺½)ᵀ M⁻¹ pⁿ⁻½ + V(qⁿ)`. Not sign-definite.
pub fn marazzato_energy(sys: &HamiltonianSystem, p_half: &[f64], p_mhalf: &[f64], q_n: &[f64]) -> Result<f64> {
    check_dim(sys.dim(), q_n.len())?;
    Ok(0.5 * sys.mass().inverse_inner(p_half, p_mhalf)? + sys.potential().value(q_n))
}

struct Workspace {
    velocity: Vec<f64>,
    point: Vec<f64>,
    grad: Vec<f64>,
}

impl Workspace {
    fn new(n: usize) -> Self {
        Workspace { velocity: vec![0.0; n], point: vec![0.0; n], grad: vec![0.0; n] }
    }
}

#[allow(clippy::too_many_arguments)]
fn free_flight(
    sys: &HamiltonianSystem,
    rule: &(Vec<f64>, Vec<f64>),
    q_n: &[f64],
    p_half: &[f64],
    p_mhalf: &[f64],
    k: f64,
    ws: &mut Workspace,
    q_next: &mut [f64],
    p_next: &mut [f64],
) -> Result<()> {
    sys.mass().solve_into(p_half, &mut ws.velocity)?;
    p_next.copy_from_slice(p_mhalf);
    for (&tau, &w) in rule.0.iter().zip(&rule.1) {
        ws.point.copy_from_slice(q_n);
        axpy(k * tau, &ws.velocity, &mut ws.point);
        sys.potential().value_and_gradient(&ws.point, &mut ws.grad);
        axpy(-2.0 * k * w, &ws.grad, p_next);
    }
    q_next.copy_from_slice(q_n);
    axpy(k, &ws.velocity, q_next);
    Ok(())
}

/// Free-flight (Marazzato) stepper.
///
/// With [`Start::Plain`] it begins from `p^½ = p₀` and `p^{−½} = p₀ + k ∇V(q₀)`;
/// with [`Start::Taylor`] from `p^{±½} = p₀ ∓ (k/2) ∇V(q₀)`. Either way `q¹`
/// agrees with the matching Störmer–Verlet start and the two interleaved
/// momentum chains begin a full step apart.
pub struct MarazzatoStepper<'a> {
    sys: &'a HamiltonianSystem,
    k: f64,
    n: usize,
    rule: (Vec<f64>, Vec<f64>),
    q: Vec<f64>,
    p_half: Vec<f64>,
    p_mhalf: Vec<f64>,
    q_next: Vec<f64>,
    p_next: Vec<f64>,
    ws: Workspace,
    counters: StepCounters,
}

impl<'a> MarazzatoStepper<'a> {
    pub fn new(sys: &'a HamiltonianSystem, cfg: &SchemeConfig, q0: &[f64], p0: &[f64]) -> Result<Self> {
        check_dim(sys.dim(), q0.len())?;
        check_dim(sys.dim(), p0.len())?;
        let n = sys.dim();
        let mut grad = vec![0.0; n];
        sys.potential().value_and_gradient(q0, &mut grad);
        let (lead, lag) = match cfg.start {
            Start::Plain => (0.0, cfg.dt),
            Start::Taylor => (-0.5 * cfg.dt, 0.5 * cfg.dt),
        };
        let mut p_half = p0.to_vec();
        axpy(lead, &grad, &mut p_half);
        let mut p_mhalf = p0.to_vec();
        axpy(lag, &grad, &mut p_mhalf);
        Ok(MarazzatoStepper {
            sys,
            k: cfg.dt,
            n: 0,
            rule: gauss_legendre(cfg.quad_nodes),
            q: q0.to_vec(),
            p_half,
            p_mhalf,
            q_next: vec![0.0; n],
            p_next: vec![0.0; n],
            ws: Workspace::new(n),
            counters: StepCounters { gradient_evals: 1, ..Default::default() },
        })
    }

    /// `pⁿ⁻½`
    pub fn p_mhalf(&self) -> &[f64] {
        &self.p_mhalf
    }
}

impl Stepper for MarazzatoStepper<'_> {
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
        &self.p_half
    }

    /// `Hⁿ`, which pairs `pⁿ⁺½` with `pⁿ⁻½`.
    fn energy(&mut self) -> Result<f64> {
        let kinetic = 0.5 * self.sys.mass().inverse_inner(&self.p_half, &self.p_mhalf)?;
        Ok(kinetic + self.sys.potential().value(&self.q))
    }

    fn advance(&mut self) -> Result<()> {
        free_flight(
            self.sys,
            &self.rule,
            &self.q,
            &self.p_half,
            &self.p_mhalf,
            self.k,
            &mut self.ws,
            &mut self.q_next,
            &mut self.p_next,
        )?;
        let n = self.q.len();
        let nodes = self.rule.0.len();
        self.counters.gradient_evals += nodes as u64;
        self.counters.mass_solves += 1;
        self.counters.flops.add(nodes * 4 * n + 2 * n);
        std::mem::swap(&mut self.q, &mut self.q_next);
        // (pⁿ⁻½, pⁿ⁺½, pⁿ⁺³ᐟ²) → (pⁿ⁺½, pⁿ⁺³ᐟ², ·)
        std::mem::swap(&mut self.p_mhalf, &mut self.p_half);
        std::mem::swap(&mut self.p_half, &mut self.p_next);
        self.counters.steps += 1;
        self.n += 1;
        Ok(())
    }

    fn counters(&self) -> StepCounters {
        self.counters
    }
}
