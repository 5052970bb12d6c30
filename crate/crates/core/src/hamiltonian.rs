//! Separable Hamiltonian systems `H(p, q) = ½ pᵀM⁻¹p + V(q)` with `V ≥ 0`,
//! an optional split `V = ½ qᵀKq + V′(q)`, and the quadratised auxiliary
//! variable `ψ = √(2(V + ε))` with its gradient `g = ∇V / ψ`.

use std::fmt;
use std::sync::{Arc, OnceLock};

use crate::error::{check_dim, Error, Result};
use crate::linalg::{dot, norm2, CsrMatrix, MassMatrix};

/// A potential energy with an analytic gradient.
///
/// Implementations must be non-negative. `value_and_gradient` is the unit of
/// cost the steppers count: one call is one gradient evaluation.
pub trait Potential: Send + Sync {
    fn dim(&self) -> usize;

    fn value(&self, q: &[f64]) -> f64;

    /// Writes `∇V(q)` into `grad` and returns `V(q)`.
    fn value_and_gradient(&self, q: &[f64], grad: &mut [f64]) -> f64;
}

/// Potential built from two closures. Handy for small test systems.
pub struct FnPotential<V, G> {
    dim: usize,
    value: V,
    gradient: G,
}

impl<V, G> FnPotential<V, G>
where
    V: Fn(&[f64]) -> f64 + Send + Sync,
    G: Fn(&[f64], &mut [f64]) + Send + Sync,
{
    pub fn new(dim: usize, value: V, gradient: G) -> Self {
        FnPotential { dim, value, gradient }
    }
}

impl<V, G> Potential for FnPotential<V, G>
where
    V: Fn(&[f64]) -> f64 + Send + Sync,
    G: Fn(&[f64], &mut [f64]) + Send + Sync,
{
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, q: &[f64]) -> f64 {
        (self.value)(q)
    }

    fn value_and_gradient(&self, q: &[f64], grad: &mut [f64]) -> f64 {
        (self.gradient)(q, grad);
        (self.value)(q)
    }
}

/// `V = ½ qᵀKq` for symmetric positive semi-definite `K`.
pub struct QuadraticPotential {
    k: CsrMatrix,
}

impl QuadraticPotential {
    pub fn new(k: CsrMatrix) -> Result<Self> {
        check_dim(k.rows(), k.cols())?;
        Ok(QuadraticPotential { k })
    }
}

impl Potential for QuadraticPotential {
    fn dim(&self) -> usize {
        self.k.rows()
    }

    fn value(&self, q: &[f64]) -> f64 {
        0.5 * self.k.bilinear(q, q).expect("dimension")
    }

    fn value_and_gradient(&self, q: &[f64], grad: &mut [f64]) -> f64 {
        self.k.apply_into(q, grad).expect("dimension");
        0.5 * dot(q, grad)
    }
}

/// `V ≡ 0`
pub struct ZeroPotential(pub usize);

impl Potential for ZeroPotential {
    fn dim(&self) -> usize {
        self.0
    }

    fn value(&self, _q: &[f64]) -> f64 {
        0.0
    }

    fn value_and_gradient(&self, _q: &[f64], grad: &mut [f64]) -> f64 {
        grad.fill(0.0);
        0.0
    }
}

/// Linear stiffness `K` and non-negative residual `V′` with `V = ½qᵀKq + V′`.
#[derive(Clone)]
pub struct Split {
    pub stiffness: CsrMatrix,
    pub residual: Arc<dyn Potential>,
}

/// Which potential the auxiliary variable quadratises.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QuadMode {
    /// `ψ² = 2(V + ε)`
    Full,
    /// `ψ² = 2(V′ + ε)`
    Residual,
}

/// An immutable separable Hamiltonian system.
#[derive(Clone)]
pub struct HamiltonianSystem {
    mass: MassMatrix,
    potential: Arc<dyn Potential>,
    split: Option<Split>,
    probe: usize,
    label: String,
    stable_dt: Arc<OnceLock<Result<f64>>>,
}

impl fmt::Debug for HamiltonianSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("HamiltonianSystem")
            .field("label", &self.label)
            .field("dim", &self.dim())
            .field("split", &self.split.is_some())
            .field("probe", &self.probe)
            .finish()
    }
}

impl HamiltonianSystem {
    pub fn new(mass: MassMatrix, potential: Arc<dyn Potential>) -> Result<Self> {
        check_dim(mass.dim(), potential.dim())?;
        Ok(HamiltonianSystem {
            mass,
            potential,
            split: None,
            probe: 0,
            label: "q[0]".into(),
            stable_dt: Arc::new(OnceLock::new()),
        })
    }

    /// Attaches `V = ½qᵀKq + V′`. `K` must be symmetric; consistency with the
    /// full potential is the caller's contract.
    pub fn with_split(mut self, stiffness: CsrMatrix, residual: Arc<dyn Potential>) -> Result<Self> {
        check_dim(self.dim(), stiffness.rows())?;
        check_dim(self.dim(), stiffness.cols())?;
        check_dim(self.dim(), residual.dim())?;
        let scale = (0..stiffness.rows())
            .flat_map(|r| stiffness.row(r).map(|(_, v)| v.abs()))
            .fold(0.0, f64::max);
        if !stiffness.is_symmetric(1e-12 * scale.max(1.0)) {
            return Err(Error::InvalidParameter("split stiffness is not symmetric".into()));
        }
        self.split = Some(Split { stiffness, residual });
        self.stable_dt = Arc::new(OnceLock::new());
        Ok(self)
    }

    pub fn with_probe(mut self, index: usize, label: impl Into<String>) -> Result<Self> {
        if index >= self.dim() {
            return Err(Error::IndexOutOfRange { index, len: self.dim() });
        }
        self.probe = index;
        self.label = label.into();
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.mass.dim()
    }

    pub fn mass(&self) -> &MassMatrix {
        &self.mass
    }

    pub fn potential(&self) -> &dyn Potential {
        self.potential.as_ref()
    }

    pub fn split(&self) -> Option<&Split> {
        self.split.as_ref()
    }

    pub fn probe(&self) -> usize {
        self.probe
    }

    pub fn probe_label(&self) -> &str {
        &self.label
    }

    /// The potential quadratised under `mode`.
    pub fn quadratised_potential(&self, mode: QuadMode) -> Result<&dyn Potential> {
        match mode {
            QuadMode::Full => Ok(self.potential.as_ref()),
            QuadMode::Residual => self.split.as_ref().map(|s| s.residual.as_ref()).ok_or(Error::NoSplit),
        }
    }

    pub(crate) fn stable_dt_cell(&self) -> &OnceLock<Result<f64>> {
        &self.stable_dt
    }
}

/// `½ pᵀM⁻¹p + V(q)`
pub fn energy_continuous(sys: &HamiltonianSystem, q: &[f64], p: &[f64]) -> Result<f64> {
    check_dim(sys.dim(), q.len())?;
    check_dim(sys.dim(), p.len())?;
    Ok(0.5 * sys.mass().inverse_inner(p, p)? + sys.potential().value(q))
}

/// `ψ = √(2(V(q) + ε))`, or with `V′` in residual mode.
pub fn quadratise(sys: &HamiltonianSystem, q: &[f64], eps: f64, mode: QuadMode) -> Result<f64> {
    check_dim(sys.dim(), q.len())?;
    let v = sys.quadratised_potential(mode)?.value(q);
    psi_of(v, eps)
}

pub(crate) fn psi_of(v: f64, eps: f64) -> Result<f64> {
    let shifted = v + eps;
    if shifted < 0.0 || !shifted.is_finite() {
        return Err(Error::NegativePotential { value: shifted });
    }
    Ok((2.0 * shifted).sqrt())
}

/// Below this value of `V + ε` the quadratisation is treated as degenerate.
const DEGENERATE_FLOOR: f64 = 1e-300;

/// Evaluates `g = ∇V / √(2(V + ε))` into `g` and returns `ψ`.
///
/// Where `∇V = 0` the result is `g = 0` whatever the value of `V`; a vanishing
/// `V + ε` with a non-zero gradient is an error.
pub(crate) fn aux_gradient_into(
    potential: &dyn Potential,
    q: &[f64],
    eps: f64,
    g: &mut [f64],
) -> Result<f64> {
    let v = potential.value_and_gradient(q, g);
    let psi = psi_of(v, eps)?;
    let grad_norm = norm2(g);
    if grad_norm == 0.0 {
        return Ok(psi);
    }
    if v + eps <= DEGENERATE_FLOOR {
        return Err(Error::DegeneratePotential { gradient_norm: grad_norm });
    }
    let inv = 1.0 / psi;
    g.iter_mut().for_each(|x| *x *= inv);
    Ok(psi)
}

/// `g = ∇ψ`
pub fn aux_gradient(sys: &HamiltonianSystem, q: &[f64], eps: f64, mode: QuadMode) -> Result<Vec<f64>> {
    check_dim(sys.dim(), q.len())?;
    let mut g = vec![0.0; sys.dim()];
    aux_gradient_into(sys.quadratised_potential(mode)?, q, eps, &mut g)?;
    Ok(g)
}

/// `√(2 λ_max(M) H₀)`, the bound on `|p|` along any trajectory of energy `H₀`.
pub fn momentum_bound(sys: &HamiltonianSystem, h0: f64) -> Result<f64> {
    Ok((2.0 * sys.mass().lambda_max()? * h0.max(0.0)).sqrt())
}

/// Interleaved integrator state: `q` at step `n`, `p` and `ψ` at `n − ½`
/// (the values that produced `q` from the previous step).
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    pub q: Vec<f64>,
    pub p: Vec<f64>,
    pub psi: Option<f64>,
    pub step: usize,
    pub dt: f64,
}

impl StateVector {
    pub fn is_finite(&self) -> bool {
        self.q.iter().chain(&self.p).all(|x| x.is_finite()) && self.psi.map_or(true, f64::is_finite)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quartic() -> HamiltonianSystem {
        let pot = FnPotential::new(1, |q: &[f64]| q[0].powi(4), |q: &[f64], g: &mut [f64]| g[0] = 4.0 * q[0].powi(3));
        HamiltonianSystem::new(MassMatrix::identity(1), Arc::new(pot)).unwrap()
    }

    #[test]
    fn quadratise_small_values() {
        let sys = quartic();
        assert_eq!(quadratise(&sys, &[0.0], 0.0, QuadMode::Full).unwrap(), 0.0);
        let two = 2f64.powf(0.25);
        assert!((quadratise(&sys, &[two], 0.0, QuadMode::Full).unwrap() - 2.0).abs() < 1e-15);
        assert_eq!(quadratise(&sys, &[0.0], 0.0, QuadMode::Residual), Err(Error::NoSplit));
    }

    #[test]
    fn aux_gradient_of_quartic_at_one() {
        let g = aux_gradient(&quartic(), &[1.0], 0.0, QuadMode::Full).unwrap();
        assert!((g[0] - 2.0 * 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn aux_gradient_is_zero_at_a_minimum() {
        assert_eq!(aux_gradient(&quartic(), &[0.0], 0.0, QuadMode::Full).unwrap(), vec![0.0]);
    }

    #[test]
    fn degenerate_and_negative_potentials_are_errors() {
        let lin = FnPotential::new(1, |_: &[f64]| 0.0, |_: &[f64], g: &mut [f64]| g[0] = 1.0);
        let sys = HamiltonianSystem::new(MassMatrix::identity(1), Arc::new(lin)).unwrap();
        assert!(matches!(aux_gradient(&sys, &[0.0], 0.0, QuadMode::Full), Err(Error::DegeneratePotential { .. })));
        assert!(aux_gradient(&sys, &[0.0], 1e-3, QuadMode::Full).is_ok());
        assert!(matches!(quadratise(&sys, &[0.0], -1.0, QuadMode::Full), Err(Error::NegativePotential { .. })));
    }

    #[test]
    fn momentum_bounds() {
        let zero = Arc::new(ZeroPotential(2));
        let sys = HamiltonianSystem::new(MassMatrix::identity(2), zero.clone()).unwrap();
        assert_eq!(momentum_bound(&sys, 2.0).unwrap(), 2.0);
        let sys = HamiltonianSystem::new(MassMatrix::scalar(2, 3.0).unwrap(), zero.clone()).unwrap();
        assert!((momentum_bound(&sys, 5.0).unwrap() - 30f64.sqrt()).abs() < 1e-14);
        let sys = HamiltonianSystem::new(MassMatrix::diagonal(vec![1.0, 4.0]).unwrap(), zero).unwrap();
        assert!((momentum_bound(&sys, 1.0).unwrap() - 8f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn kinetic_energy_of_mass_times_velocity() {
        let m = MassMatrix::dense(2, vec![2.0, 0.5, 0.5, 1.0]).unwrap();
        let sys = HamiltonianSystem::new(m.clone(), Arc::new(ZeroPotential(2))).unwrap();
        let w = [0.7, -1.1];
        let p = m.apply(&w).unwrap();
        let expected = 0.5 * dot(&w, &p);
        let e = energy_continuous(&sys, &[0.0, 0.0], &p).unwrap();
        assert!((e - expected).abs() < 1e-15 * expected);
        assert!(energy_continuous(&sys, &[0.0], &p).is_err());
    }

    #[test]
    fn split_requires_symmetric_stiffness() {
        let sys = HamiltonianSystem::new(MassMatrix::identity(2), Arc::new(ZeroPotential(2))).unwrap();
        let k = CsrMatrix::from_dense(2, 2, &[1.0, 1.0, 0.0, 1.0]);
        assert!(sys.clone().with_split(k, Arc::new(ZeroPotential(2))).is_err());
        assert!(sys.with_probe(5, "x").is_err());
    }
}
