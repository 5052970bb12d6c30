//! Geometrically exact string with fixed ends, transverse displacement `u`
//! and longitudinal displacement `v`, discretised on `M` segments.
//!
//! With `ζ = D₋u`, `η = D₋v` and `s = √((1 + η)² + ζ²)` the potential density
//! is `𝒱 = T₀/2 (ζ² + η²) + (EA − T₀)/2 (s − 1)²`.

use std::sync::Arc;

use crate::error::{check_dim, Error, Result};
use crate::hamiltonian::{HamiltonianSystem, Potential};
use crate::integrators::{start_levels, Checkpoint, Start, StepCounters, Stepper};
use crate::linalg::{norm_inf, CsrMatrix, MassMatrix};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StringParams {
    /// Density `ρ` (kg/m³).
    pub rho: f64,
    /// Cross-section `A` (m²).
    pub area: f64,
    /// Unstretched length `L` (m).
    pub length: f64,
    /// Young's modulus `E` (Pa).
    pub young: f64,
    /// Tension `T₀` (N).
    pub tension: f64,
    /// Number of segments `M`; `h = L / M`.
    pub segments: usize,
}

impl StringParams {
    /// Piano C3 string on the grid matched to `k = 2.4e-7 s`.
    pub fn c3() -> Self {
        let mut p = StringParams {
            rho: 7850.0,
            area: 8.87e-7,
            length: 1.259,
            young: 2.02e11,
            tension: 759.0,
            segments: 2,
        };
        p.segments = p.segments_for_dt(2.4e-7);
        p
    }

    /// Segment count for time step `k`: the smallest `h ≥ 1.05 √(E/ρ) k`
    /// with `L / h` an integer.
    pub fn segments_for_dt(&self, k: f64) -> usize {
        let h0 = 1.05 * (self.young / self.rho).sqrt() * k;
        ((self.length / h0).floor() as usize).max(2)
    }

    pub fn with_segments(mut self, m: usize) -> Self {
        self.segments = m;
        self
    }

    pub fn h(&self) -> f64 {
        self.length / self.segments as f64
    }

    /// `EA − T₀`
    pub fn stiffening(&self) -> f64 {
        self.young * self.area - self.tension
    }

    pub fn dim(&self) -> usize {
        2 * (self.segments - 1)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("rho", self.rho),
            ("area", self.area),
            ("length", self.length),
            ("young", self.young),
            ("tension", self.tension),
        ];
        if let Some((name, v)) = positive.iter().find(|(_, v)| !(*v > 0.0) || !v.is_finite()) {
            return Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")));
        }
        if self.segments < 2 {
            return Err(Error::InvalidParameter("string needs at least 2 segments".into()));
        }
        if self.stiffening() <= 0.0 {
            return Err(Error::InvalidParameter("string requires EA > T0".into()));
        }
        Ok(())
    }
}

/// `s − 1` without cancellation for small strains.
#[inline]
fn stretch_minus_one(zeta: f64, eta: f64) -> (f64, f64) {
    let s = ((1.0 + eta) * (1.0 + eta) + zeta * zeta).sqrt();
    ((2.0 * eta + eta * eta + zeta * zeta) / (s + 1.0), s)
}

/// `𝒱(ζ, η)` in the tension/stretch form.
pub fn density(params: &StringParams, zeta: f64, eta: f64) -> f64 {
    let (sm1, _) = stretch_minus_one(zeta, eta);
    0.5 * params.tension * (zeta * zeta + eta * eta) + 0.5 * params.stiffening() * sm1 * sm1
}

/// `𝒱(ζ, η)` in the axial-stiffness form `EA/2 (ζ² + η²) − (EA − T₀)(s − 1 − η)`.
pub fn density_axial_form(params: &StringParams, zeta: f64, eta: f64) -> f64 {
    let ea = params.young * params.area;
    let (sm1, _) = stretch_minus_one(zeta, eta);
    0.5 * ea * (zeta * zeta + eta * eta) - params.stiffening() * (sm1 - eta)
}

/// `(∂𝒱/∂ζ, ∂𝒱/∂η)`; the `T₀` terms are dropped when `tension` is false.
pub fn density_gradient(params: &StringParams, zeta: f64, eta: f64, tension: bool) -> (f64, f64) {
    let (sm1, s) = stretch_minus_one(zeta, eta);
    let c = params.stiffening() * sm1 / s;
    let t = if tension { params.tension } else { 0.0 };
    (t * zeta + c * zeta, t * eta + c * (1.0 + eta))
}

/// Strains `ζ_l`, `η_l` for `l = 1..=M` from `q = [u; v]`.
fn strains(m: usize, h: f64, q: &[f64], l: usize) -> (f64, f64) {
    let n = m - 1;
    let at = |x: &[f64], j: usize| if j == 0 || j == m { 0.0 } else { x[j - 1] };
    let (u, v) = q.split_at(n);
    ((at(u, l) - at(u, l - 1)) / h, (at(v, l) - at(v, l - 1)) / h)
}

/// Full potential `h Σ 𝒱` or the residual `h (EA − T₀)/2 Σ (s − 1)²`.
struct StringPotential {
    params: StringParams,
    residual: bool,
}

impl Potential for StringPotential {
    fn dim(&self) -> usize {
        self.params.dim()
    }

    fn value(&self, q: &[f64]) -> f64 {
        let (m, h) = (self.params.segments, self.params.h());
        let c = 0.5 * self.params.stiffening();
        let t = if self.residual { 0.0 } else { 0.5 * self.params.tension };
        let mut sum = 0.0;
        for l in 1..=m {
            let (zeta, eta) = strains(m, h, q, l);
            let (sm1, _) = stretch_minus_one(zeta, eta);
            sum += t * (zeta * zeta + eta * eta) + c * sm1 * sm1;
        }
        h * sum
    }

    /// `∇ᵤV = −h D₊ ∂𝒱/∂ζ`, which is `w_j − w_{j+1}` componentwise.
    fn value_and_gradient(&self, q: &[f64], grad: &mut [f64]) -> f64 {
        let (m, h) = (self.params.segments, self.params.h());
        let n = m - 1;
        let c = 0.5 * self.params.stiffening();
        let t = if self.residual { 0.0 } else { 0.5 * self.params.tension };
        grad.fill(0.0);
        let mut sum = 0.0;
        for l in 1..=m {
            let (zeta, eta) = strains(m, h, q, l);
            let (sm1, _) = stretch_minus_one(zeta, eta);
            sum += t * (zeta * zeta + eta * eta) + c * sm1 * sm1;
            let (wz, we) = density_gradient(&self.params, zeta, eta, !self.residual);
            if l <= n {
                grad[l - 1] += wz;
                grad[n + l - 1] += we;
            }
            if l >= 2 {
                grad[l - 2] -= wz;
                grad[n + l - 2] -= we;
            }
        }
        h * sum
    }
}

/// `T₀ h D₋ᵀD₋` on each of `u` and `v`.
pub fn string_stiffness(params: &StringParams) -> CsrMatrix {
    let n = params.segments - 1;
    let c = params.tension / params.h();
    let mut t = Vec::with_capacity(6 * n);
    for b in [0, n] {
        for i in 0..n {
            t.push((b + i, b + i, 2.0 * c));
            if i + 1 < n {
                t.push((b + i, b + i + 1, -c));
                t.push((b + i + 1, b + i, -c));
            }
        }
    }
    CsrMatrix::from_triplets(2 * n, 2 * n, &t)
}

/// Mass `ρAh I`, full potential and the tension/stretch split. The probe is
/// `u` at the grid point nearest `x = L/2`.
pub fn string_build(params: &StringParams) -> Result<HamiltonianSystem> {
    params.validate()?;
    let mass = MassMatrix::scalar(params.dim(), params.rho * params.area * params.h())?;
    let full = StringPotential { params: *params, residual: false };
    let residual = StringPotential { params: *params, residual: true };
    let mid = ((params.segments as f64) / 2.0).round() as usize;
    let mid = mid.clamp(1, params.segments - 1);
    HamiltonianSystem::new(mass, Arc::new(full))?
        .with_split(string_stiffness(params), Arc::new(residual))?
        .with_probe(mid - 1, format!("u[x={:.4}]", mid as f64 * params.h()))
}

/// `u_l = α √A sin(π x_l / L)`, `v = 0`, `p = 0`.
pub fn string_initial(params: &StringParams, alpha: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    params.validate()?;
    let n = params.segments - 1;
    let mut q = vec![0.0; 2 * n];
    let amp = alpha * params.area.sqrt();
    for (i, u) in q[..n].iter_mut().enumerate() {
        let x = (i + 1) as f64 * params.h();
        *u = amp * (std::f64::consts::PI * x / params.length).sin();
    }
    Ok((q, vec![0.0; 2 * n]))
}

/// Newton settings for the implicit scheme.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonSettings {
    /// Stop once `|Δ|∞ ≤ tol · |q|∞`.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for NewtonSettings {
    fn default() -> Self {
        NewtonSettings { tol: 1e-13, max_iter: 20 }
    }
}

/// Discrete-gradient quotient in `ζ` (η held) and its derivative in `ζ⁺`.
///
/// `[𝒱(ζ⁺, η) − 𝒱(ζ⁻, η)] / (ζ⁺ − ζ⁻)` reduces to
/// `T₀ σ/2 + (EA − T₀)/2 · (S − 2) σ / S` with `σ = ζ⁺ + ζ⁻`, `S = s⁺ + s⁻`;
/// this form is regular as `ζ⁺ → ζ⁻`.
fn quotient_zeta(params: &StringParams, zp: f64, zm: f64, eta: f64) -> (f64, f64) {
    let c = 0.5 * params.stiffening();
    let (sp_m1, sp) = stretch_minus_one(zp, eta);
    let (sm_m1, sm) = stretch_minus_one(zm, eta);
    let big = sp + sm;
    let sigma = zp + zm;
    let ratio = (sp_m1 + sm_m1) / big; // (S − 2) / S
    let value = 0.5 * params.tension * sigma + c * ratio * sigma;
    let deriv = 0.5 * params.tension + c * (ratio + 2.0 * sigma * zp / (sp * big * big));
    (value, deriv)
}

/// As [`quotient_zeta`] in `η` with `ζ` held: `(S − 2)(2 + η⁺ + η⁻) / S`.
fn quotient_eta(params: &StringParams, ep: f64, em: f64, zeta: f64) -> (f64, f64) {
    let c = 0.5 * params.stiffening();
    let (sp_m1, sp) = stretch_minus_one(zeta, ep);
    let (sm_m1, sm) = stretch_minus_one(zeta, em);
    let big = sp + sm;
    let tau = 2.0 + ep + em;
    let ratio = (sp_m1 + sm_m1) / big;
    let value = 0.5 * params.tension * (ep + em) + c * ratio * tau;
    let deriv = 0.5 * params.tension + c * (ratio + 2.0 * tau * (1.0 + ep) / (sp * big * big));
    (value, deriv)
}

/// Per-step Newton statistics.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct NewtonReport {
    pub iterations: usize,
    pub last_update: f64,
}

/// Scratch space for one displacement component.
struct Component {
    x: Vec<f64>,
    d_prev: Vec<f64>,
    held: Vec<f64>,
    g: Vec<f64>,
    dg: Vec<f64>,
    residual: Vec<f64>,
    lower: Vec<f64>,
    diag: Vec<f64>,
    upper: Vec<f64>,
}

impl Component {
    fn new(n: usize) -> Self {
        Component {
            x: vec![0.0; n],
            d_prev: vec![0.0; n + 1],
            held: vec![0.0; n + 1],
            g: vec![0.0; n + 1],
            dg: vec![0.0; n + 1],
            residual: vec![0.0; n],
            lower: vec![0.0; n],
            diag: vec![0.0; n],
            upper: vec![0.0; n],
        }
    }
}

#[inline]
fn diff(x: &[f64], l: usize, m: usize, h: f64) -> f64 {
    let at = |j: usize| if j == 0 || j == m { 0.0 } else { x[j - 1] };
    (at(l) - at(l - 1)) / h
}

/// Solves the tridiagonal system in place (Thomas algorithm); `rhs` becomes
/// the solution.
fn thomas(lower: &[f64], diag: &mut [f64], upper: &[f64], rhs: &mut [f64]) -> Result<()> {
    let n = diag.len();
    for i in 1..n {
        if diag[i - 1] == 0.0 || !diag[i - 1].is_finite() {
            return Err(Error::LinearSolveFailure(format!("zero pivot at row {}", i - 1)));
        }
        let w = lower[i] / diag[i - 1];
        diag[i] -= w * upper[i - 1];
        rhs[i] -= w * rhs[i - 1];
    }
    if diag[n - 1] == 0.0 || !diag[n - 1].is_finite() {
        return Err(Error::LinearSolveFailure(format!("zero pivot at row {}", n - 1)));
    }
    rhs[n - 1] /= diag[n - 1];
    for i in (0..n - 1).rev() {
        rhs[i] = (rhs[i] - upper[i] * rhs[i + 1]) / diag[i];
    }
    Ok(())
}

/// Newton solve for one component of the implicit update:
/// `x − 2xⁿ + x⁻ − (k²/ρA) D₊ 𝔤(D₋x) = 0`.
#[allow(clippy::too_many_arguments)]
fn solve_component(
    params: &StringParams,
    transverse: bool,
    x_n: &[f64],
    x_nm1: &[f64],
    k: f64,
    newton: NewtonSettings,
    c: &mut Component,
) -> Result<NewtonReport> {
    let m = params.segments;
    let n = m - 1;
    let h = params.h();
    let lam = k * k / (params.rho * params.area);
    let inv_h = 1.0 / h;
    // Explicit predictor.
    for l in 1..=m {
        c.d_prev[l - 1] = diff(x_nm1, l, m, h);
    }
    let mut report = NewtonReport::default();
    for i in 0..n {
        c.x[i] = 2.0 * x_n[i] - x_nm1[i];
    }
    loop {
        for l in 1..=m {
            let d_new = diff(&c.x, l, m, h);
            let (g, dg) = if transverse {
                quotient_zeta(params, d_new, c.d_prev[l - 1], c.held[l - 1])
            } else {
                quotient_eta(params, d_new, c.d_prev[l - 1], c.held[l - 1])
            };
            c.g[l - 1] = g;
            c.dg[l - 1] = dg;
        }
        // (D₊ w)_j = (w_{j+1} − w_j)/h, 1-based j, w indexed 1..=M.
        for j in 0..n {
            let d_plus = (c.g[j + 1] - c.g[j]) * inv_h;
            c.residual[j] = -(c.x[j] - 2.0 * x_n[j] + x_nm1[j] - lam * d_plus);
            let scale = lam * inv_h * inv_h;
            c.diag[j] = 1.0 + scale * (c.dg[j] + c.dg[j + 1]);
            c.lower[j] = -scale * c.dg[j];
            c.upper[j] = -scale * c.dg[j + 1];
        }
        thomas(&c.lower, &mut c.diag, &c.upper, &mut c.residual)?;
        let step = norm_inf(&c.residual);
        for (x, d) in c.x.iter_mut().zip(&c.residual) {
            *x += d;
        }
        report.iterations += 1;
        report.last_update = step;
        if !step.is_finite() {
            return Err(Error::Diverged { step: 0, reason: "non-finite Newton update".into() });
        }
        if step <= newton.tol * norm_inf(&c.x) {
            return Ok(report);
        }
        if report.iterations >= newton.max_iter {
            return Err(Error::NewtonNoConvergence { iterations: report.iterations, last_update: step });
        }
    }
}

/// Fully implicit discrete-gradient scheme for the string.
///
/// The transverse and longitudinal updates decouple because each quotient
/// holds the other strain at time `n`.
pub struct StringImplicit {
    params: StringParams,
    newton: NewtonSettings,
    u: Component,
    v: Component,
}

impl StringImplicit {
    pub fn new(params: &StringParams, newton: NewtonSettings) -> Result<Self> {
        params.validate()?;
        let n = params.segments - 1;
        Ok(StringImplicit { params: *params, newton, u: Component::new(n), v: Component::new(n) })
    }

    /// `qⁿ⁺¹` from `(qⁿ, qⁿ⁻¹)`; returns the combined Newton report.
    pub fn step(&mut self, q_n: &[f64], q_nm1: &[f64], k: f64, out: &mut [f64]) -> Result<NewtonReport> {
        let p = self.params;
        check_dim(p.dim(), q_n.len())?;
        check_dim(p.dim(), q_nm1.len())?;
        check_dim(p.dim(), out.len())?;
        let (m, h) = (p.segments, p.h());
        let n = m - 1;
        let (u_n, v_n) = q_n.split_at(n);
        let (u_m, v_m) = q_nm1.split_at(n);
        for l in 1..=m {
            self.u.held[l - 1] = diff(v_n, l, m, h);
            self.v.held[l - 1] = diff(u_n, l, m, h);
        }
        let ru = solve_component(&p, true, u_n, u_m, k, self.newton, &mut self.u)?;
        let rv = solve_component(&p, false, v_n, v_m, k, self.newton, &mut self.v)?;
        out[..n].copy_from_slice(&self.u.x);
        out[n..].copy_from_slice(&self.v.x);
        Ok(NewtonReport {
            iterations: ru.iterations + rv.iterations,
            last_update: ru.last_update.max(rv.last_update),
        })
    }

    /// `(ρAh/2) |(qⁿ⁺¹ − qⁿ)/k|² + (h/2) Σ [𝒱(ζⁿ⁺¹, ηⁿ) + 𝒱(ζⁿ, ηⁿ⁺¹)]`
    pub fn energy(&self, q_np1: &[f64], q_n: &[f64], k: f64) -> Result<f64> {
        let p = &self.params;
        check_dim(p.dim(), q_np1.len())?;
        check_dim(p.dim(), q_n.len())?;
        let (m, h) = (p.segments, p.h());
        let kinetic: f64 = q_np1.iter().zip(q_n).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()
            * 0.5
            * p.rho
            * p.area
            * h
            / (k * k);
        let mut pot = 0.0;
        for l in 1..=m {
            let (z1, e1) = strains(m, h, q_np1, l);
            let (z0, e0) = strains(m, h, q_n, l);
            pot += density(p, z1, e0) + density(p, z0, e1);
        }
        Ok(kinetic + 0.5 * h * pot)
    }
}

/// One implicit step with default scratch allocation.
pub fn string_implicit_step(
    params: &StringParams,
    q_n: &[f64],
    q_nm1: &[f64],
    k: f64,
    newton: NewtonSettings,
) -> Result<(Vec<f64>, NewtonReport)> {
    let mut scheme = StringImplicit::new(params, newton)?;
    let mut out = vec![0.0; params.dim()];
    let report = scheme.step(q_n, q_nm1, k, &mut out)?;
    Ok((out, report))
}

/// Stepper for the implicit string scheme, started like Störmer–Verlet.
pub struct StringImplicitStepper {
    scheme: StringImplicit,
    mass: f64,
    k: f64,
    n: usize,
    q: Vec<f64>,
    q_next: Vec<f64>,
    scratch: Vec<f64>,
    p: Vec<f64>,
    counters: StepCounters,
}

impl StringImplicitStepper {
    pub fn new(
        params: &StringParams,
        k: f64,
        newton: NewtonSettings,
        start: Start,
        q0: &[f64],
        p0: &[f64],
    ) -> Result<Self> {
        let scheme = StringImplicit::new(params, newton)?;
        let mass = params.rho * params.area * params.h();
        let (_, q_next) = start_levels(&string_build(params)?, q0, p0, k, start)?;
        let mut s = StringImplicitStepper {
            scheme,
            mass,
            k,
            n: 0,
            q: q0.to_vec(),
            q_next,
            scratch: vec![0.0; params.dim()],
            p: vec![0.0; params.dim()],
            counters: StepCounters::default(),
        };
        s.update_momentum();
        Ok(s)
    }

    fn update_momentum(&mut self) {
        let c = self.mass / self.k;
        for ((p, a), b) in self.p.iter_mut().zip(&self.q_next).zip(&self.q) {
            *p = c * (a - b);
        }
    }
}

impl Stepper for StringImplicitStepper {
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
        self.scheme.energy(&self.q_next, &self.q, self.k)
    }

    fn advance(&mut self) -> Result<()> {
        let report = self.scheme.step(&self.q_next, &self.q, self.k, &mut self.scratch)?;
        self.counters.newton_iterations += report.iterations as u64;
        self.counters.linear_solves += report.iterations as u64;
        std::mem::swap(&mut self.q, &mut self.q_next);
        std::mem::swap(&mut self.q_next, &mut self.scratch);
        self.update_momentum();
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
