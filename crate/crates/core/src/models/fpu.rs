//! Fermi–Pasta–Ulam chain: `2M` unit masses joined alternately by linear
//! springs of frequency `ω` and quartic springs, with fixed walls at both
//! ends.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::hamiltonian::{HamiltonianSystem, Potential};
use crate::linalg::{CsrMatrix, MassMatrix};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FpuParams {
    /// Number of mass pairs `M`; the state has `N = 2M` coordinates.
    pub half_count: usize,
    /// Linear spring frequency `ω` (1/s).
    pub omega: f64,
}

impl Default for FpuParams {
    fn default() -> Self {
        FpuParams { half_count: 3, omega: 50.0 }
    }
}

impl FpuParams {
    pub fn validate(&self) -> Result<()> {
        if self.half_count < 1 {
            return Err(Error::InvalidParameter("FPU needs at least one mass pair".into()));
        }
        if !(self.omega > 0.0) || !self.omega.is_finite() {
            return Err(Error::InvalidParameter(format!("omega must be positive, got {}", self.omega)));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        2 * self.half_count
    }
}

/// `(ω²/4) Σ (q₂ᵢ − q₂ᵢ₋₁)²` and/or `Σ (q₂ᵢ₊₁ − q₂ᵢ)⁴`.
struct FpuPotential {
    m: usize,
    omega: f64,
    linear: bool,
    quartic: bool,
}

impl FpuPotential {
    /// Quartic spring `i ∈ 0..=M` joins `q₂ᵢ` and `q₂ᵢ₊₁` (1-based, walls at
    /// `q₀` and `q₂M₊₁`). Returns the stretch and the 0-based indices of the
    /// two ends, `None` standing for a wall.
    fn quartic_spring(&self, q: &[f64], i: usize) -> (f64, Option<usize>, Option<usize>) {
        let left = if i == 0 { None } else { Some(2 * i - 1) };
        let right = if i == self.m { None } else { Some(2 * i) };
        let at = |j: Option<usize>| j.map_or(0.0, |j| q[j]);
        (at(right) - at(left), left, right)
    }
}

impl Potential for FpuPotential {
    fn dim(&self) -> usize {
        2 * self.m
    }

    fn value(&self, q: &[f64]) -> f64 {
        let mut v = 0.0;
        if self.linear {
            let c = 0.25 * self.omega * self.omega;
            v += (0..self.m).map(|i| c * (q[2 * i + 1] - q[2 * i]).powi(2)).sum::<f64>();
        }
        if self.quartic {
            v += (0..=self.m).map(|i| self.quartic_spring(q, i).0.powi(4)).sum::<f64>();
        }
        v
    }

    fn value_and_gradient(&self, q: &[f64], grad: &mut [f64]) -> f64 {
        grad.fill(0.0);
        let mut v = 0.0;
        if self.linear {
            let c = 0.25 * self.omega * self.omega;
            for i in 0..self.m {
                let d = q[2 * i + 1] - q[2 * i];
                v += c * d * d;
                grad[2 * i + 1] += 2.0 * c * d;
                grad[2 * i] -= 2.0 * c * d;
            }
        }
        if self.quartic {
            for i in 0..=self.m {
                let (d, left, right) = self.quartic_spring(q, i);
                let d2 = d * d;
                v += d2 * d2;
                let f = 4.0 * d2 * d;
                if let Some(r) = right {
                    grad[r] += f;
                }
                if let Some(l) = left {
                    grad[l] -= f;
                }
            }
        }
        v
    }
}

/// `K = (ω²/2) I_M ⊗ [[1, −1], [−1, 1]]`
pub fn fpu_stiffness(params: &FpuParams) -> CsrMatrix {
    let c = 0.5 * params.omega * params.omega;
    let mut t = Vec::with_capacity(4 * params.half_count);
    for i in 0..params.half_count {
        let (a, b) = (2 * i, 2 * i + 1);
        t.extend([(a, a, c), (a, b, -c), (b, a, -c), (b, b, c)]);
    }
    CsrMatrix::from_triplets(params.dim(), params.dim(), &t)
}

/// Unit masses, the full potential and the split into linear springs plus
/// the quartic residual. The probe is `q₁`.
pub fn fpu_build(params: &FpuParams) -> Result<HamiltonianSystem> {
    params.validate()?;
    let (m, omega) = (params.half_count, params.omega);
    let full = FpuPotential { m, omega, linear: true, quartic: true };
    let residual = FpuPotential { m, omega, linear: false, quartic: true };
    HamiltonianSystem::new(MassMatrix::identity(params.dim()), Arc::new(full))?
        .with_split(fpu_stiffness(params), Arc::new(residual))?
        .with_probe(0, "q1")
}

/// The chain with the quartic springs removed, split with `V′ ≡ 0`.
pub fn fpu_build_linear(params: &FpuParams) -> Result<HamiltonianSystem> {
    params.validate()?;
    let (m, omega) = (params.half_count, params.omega);
    let linear = FpuPotential { m, omega, linear: true, quartic: false };
    let none = FpuPotential { m, omega, linear: false, quartic: false };
    HamiltonianSystem::new(MassMatrix::identity(params.dim()), Arc::new(linear))?
        .with_split(fpu_stiffness(params), Arc::new(none))?
        .with_probe(0, "q1")
}

/// `q₀` with `α` in the fourth coordinate and zeros elsewhere; `p₀ = 0`.
pub fn fpu_initial(params: &FpuParams, alpha: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = params.dim();
    if n < 4 {
        return Err(Error::IndexOutOfRange { index: 3, len: n });
    }
    let mut q = vec![0.0; n];
    q[3] = alpha;
    Ok((q, vec![0.0; n]))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn energies_at_fourth_coordinate_displacement() {
        let p = FpuParams::default();
        let sys = fpu_build(&p).unwrap();
        let (q, _) = fpu_initial(&p, 100.0).unwrap();
        let split = sys.split().unwrap();
        assert_eq!(sys.potential().value(&q), 1.0625e8);
        assert_eq!(split.residual.value(&q), 1e8);
        assert_eq!(0.5 * split.stiffness.bilinear(&q, &q).unwrap(), 6.25e6);
    }

    #[test]
    fn walls_enter_the_end_gradients() {
        // N = 4: V = (ω²/4)[(q2−q1)² + (q4−q3)²] + q1⁴ + (q3−q2)⁴ + q4⁴
        let p = FpuParams { half_count: 2, omega: 3.0 };
        let sys = fpu_build(&p).unwrap();
        let q: [f64; 4] = [0.3, -0.2, 0.5, 0.7];
        let c = 9.0 / 4.0;
        let expected = [
            -2.0 * c * (q[1] - q[0]) + 4.0 * q[0].powi(3),
            2.0 * c * (q[1] - q[0]) - 4.0 * (q[2] - q[1]).powi(3),
            -2.0 * c * (q[3] - q[2]) + 4.0 * (q[2] - q[1]).powi(3),
            2.0 * c * (q[3] - q[2]) + 4.0 * q[3].powi(3),
        ];
        let mut g = [0.0; 4];
        let v = sys.potential().value_and_gradient(&q, &mut g);
        let v_expected = c * ((q[1] - q[0]).powi(2) + (q[3] - q[2]).powi(2))
            + q[0].powi(4)
            + (q[2] - q[1]).powi(4)
            + q[3].powi(4);
        assert!((v - v_expected).abs() < 1e-15);
        for (a, b) in g.iter().zip(&expected) {
            assert!((a - b).abs() < 1e-14, "{g:?} vs {expected:?}");
        }
    }

    #[test]
    fn small_chain_has_no_fourth_coordinate() {
        let p = FpuParams { half_count: 1, omega: 1.0 };
        assert!(matches!(fpu_initial(&p, 1.0), Err(Error::IndexOutOfRange { .. })));
    }
}
