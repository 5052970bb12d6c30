//! Föppl–von Kármán plate on a square with simply supported edges.
//!
//! Displacement `q` and Airy stress function `F` live on the `(M − 1)²`
//! interior points of a grid of spacing `h = L / M`; values outside the
//! interior are taken as zero.

use std::sync::Arc;

use crate::error::{check_dim, Error, Result};
use crate::hamiltonian::{HamiltonianSystem, Potential};
use crate::integrators::{start_levels, sv_step, Start, Checkpoint, StepCounters, Stepper};
use crate::linalg::{dot, spd_factorize, CsrMatrix, FactorizationHandle, MassMatrix};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlateParams {
    /// Density `ρ` (kg/m³).
    pub rho: f64,
    /// Thickness `ξ` (m).
    pub thickness: f64,
    /// Young's modulus `E` (Pa).
    pub young: f64,
    /// Poisson's ratio `ν`.
    pub poisson: f64,
    /// Side length `L` (m).
    pub side: f64,
    /// Grid divisions `M`; `h = L / M`.
    pub grid: usize,
    /// Output point as fractions of `L`.
    pub probe: (f64, f64),
}

impl PlateParams {
    /// 2 mm steel plate of side 0.5 m on the grid fitted to `k = 2e-5 s`.
    pub fn steel() -> Self {
        let mut p = PlateParams {
            rho: 7850.0,
            thickness: 2e-3,
            young: 2e11,
            poisson: 0.3,
            side: 0.5,
            grid: 3,
            probe: (0.3, 0.3),
        };
        p.grid = p.grid_for_dt(2e-5);
        p
    }

    /// Flexural rigidity `Q = E ξ³ / 12(1 − ν²)`.
    pub fn rigidity(&self) -> f64 {
        self.young * self.thickness.powi(3) / (12.0 * (1.0 - self.poisson * self.poisson))
    }

    /// `h_min = 2 √k (Q / ρξ)^¼`
    pub fn h_min(&self, k: f64) -> f64 {
        2.0 * k.sqrt() * (self.rigidity() / (self.rho * self.thickness)).powf(0.25)
    }

    /// Largest `M` with `L / M ≥ h_min(k)`.
    pub fn grid_for_dt(&self, k: f64) -> usize {
        ((self.side / self.h_min(k)).floor() as usize).max(3)
    }

    pub fn with_grid(mut self, m: usize) -> Self {
        self.grid = m;
        self
    }

    pub fn h(&self) -> f64 {
        self.side / self.grid as f64
    }

    pub fn dim(&self) -> usize {
        (self.grid - 1) * (self.grid - 1)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [("rho", self.rho), ("thickness", self.thickness), ("young", self.young), ("side", self.side)];
        if let Some((name, v)) = positive.iter().find(|(_, v)| !(*v > 0.0) || !v.is_finite()) {
            return Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")));
        }
        if !(self.poisson > 0.0 && self.poisson < 0.5) {
            return Err(Error::InvalidParameter(format!("poisson must lie in (0, 0.5), got {}", self.poisson)));
        }
        if self.grid < 3 {
            return Err(Error::InvalidParameter("plate grid needs M >= 3".into()));
        }
        let (px, py) = self.probe;
        if !(0.0..=1.0).contains(&px) || !(0.0..=1.0).contains(&py) {
            return Err(Error::InvalidParameter("probe fractions must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

type Stencil = &'static [(isize, isize, f64)];

const DXX: Stencil = &[(-1, 0, 1.0), (0, 0, -2.0), (1, 0, 1.0)];
const DYY: Stencil = &[(0, -1, 1.0), (0, 0, -2.0), (0, 1, 1.0)];
const DXP_YP: Stencil = &[(1, 1, 1.0), (1, 0, -1.0), (0, 1, -1.0), (0, 0, 1.0)];
const DXP_YM: Stencil = &[(1, 0, 1.0), (1, -1, -1.0), (0, 0, -1.0), (0, -1, 1.0)];
const DXM_YP: Stencil = &[(0, 1, 1.0), (0, 0, -1.0), (-1, 1, -1.0), (-1, 0, 1.0)];
const DXM_YM: Stencil = &[(0, 0, 1.0), (0, -1, -1.0), (-1, 0, -1.0), (-1, -1, 1.0)];

/// The six products of the centred form, `(stencil on f, stencil on g, weight)`.
const ELL_TERMS: [(Stencil, Stencil, f64); 6] = [
    (DXX, DYY, 1.0),
    (DYY, DXX, 1.0),
    (DXP_YP, DXP_YP, -0.5),
    (DXP_YM, DXP_YM, -0.5),
    (DXM_YP, DXM_YP, -0.5),
    (DXM_YM, DXM_YM, -0.5),
];

/// Grid operators shared by the plate potentials and steppers.
#[derive(Debug)]
pub struct PlateOps {
    /// Interior points per side, `M − 1`.
    n1: usize,
    h: f64,
    laplacian: CsrMatrix,
    biharmonic: CsrMatrix,
    factor: FactorizationHandle,
}

impl PlateOps {
    pub fn new(m: usize, h: f64) -> Result<Self> {
        let n1 = m - 1;
        let mut t = Vec::with_capacity(5 * n1 * n1);
        let c = 1.0 / (h * h);
        for l in 0..n1 {
            for j in 0..n1 {
                let p = l * n1 + j;
                t.push((p, p, -4.0 * c));
                if l > 0 {
                    t.push((p, p - n1, c));
                }
                if l + 1 < n1 {
                    t.push((p, p + n1, c));
                }
                if j > 0 {
                    t.push((p, p - 1, c));
                }
                if j + 1 < n1 {
                    t.push((p, p + 1, c));
                }
            }
        }
        let laplacian = CsrMatrix::from_triplets(n1 * n1, n1 * n1, &t);
        let biharmonic = laplacian.matmul(&laplacian);
        let factor = spd_factorize(&biharmonic)?;
        Ok(PlateOps { n1, h, laplacian, biharmonic, factor })
    }

    pub fn dim(&self) -> usize {
        self.n1 * self.n1
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    /// `D_Δ`
    pub fn laplacian(&self) -> &CsrMatrix {
        &self.laplacian
    }

    /// `D_ΔΔ = D_Δ²`
    pub fn biharmonic(&self) -> &CsrMatrix {
        &self.biharmonic
    }

    /// Cached Cholesky factor of `D_ΔΔ`.
    pub fn biharmonic_factor(&self) -> &FactorizationHandle {
        &self.factor
    }

    #[inline]
    fn apply_stencil(&self, s: Stencil, f: &[f64], l: usize, j: usize) -> f64 {
        let n1 = self.n1 as isize;
        let mut acc = 0.0;
        for &(dl, dj, w) in s {
            let (a, b) = (l as isize + dl, j as isize + dj);
            if a >= 0 && a < n1 && b >= 0 && b < n1 {
                acc += w * f[(a * n1 + b) as usize];
            }
        }
        acc
    }

    /// `ℓ(f, g)` written into `out`.
    pub fn ell_into(&self, f: &[f64], g: &[f64], out: &mut [f64]) {
        let inv_h4 = 1.0 / self.h.powi(4);
        for l in 0..self.n1 {
            for j in 0..self.n1 {
                let mut acc = 0.0;
                for &(sf, sg, w) in &ELL_TERMS {
                    acc += w * self.apply_stencil(sf, f, l, j) * self.apply_stencil(sg, g, l, j);
                }
                out[l * self.n1 + j] = acc * inv_h4;
            }
        }
    }

    pub fn ell(&self, f: &[f64], g: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim(), f.len())?;
        check_dim(self.dim(), g.len())?;
        let mut out = vec![0.0; self.dim()];
        self.ell_into(f, g, &mut out);
        Ok(out)
    }

    /// The matrix of `g ↦ ℓ(f, g)`, symmetric for any `f`.
    pub fn ell_matrix(&self, f: &[f64]) -> Result<CsrMatrix> {
        check_dim(self.dim(), f.len())?;
        let n1 = self.n1 as isize;
        let inv_h4 = 1.0 / self.h.powi(4);
        let mut t = Vec::with_capacity(self.dim() * 21);
        for l in 0..self.n1 {
            for j in 0..self.n1 {
                let row = l * self.n1 + j;
                for &(sf, sg, w) in &ELL_TERMS {
                    let coeff = w * self.apply_stencil(sf, f, l, j) * inv_h4;
                    if coeff == 0.0 {
                        continue;
                    }
                    for &(dl, dj, wg) in sg {
                        let (a, b) = (l as isize + dl, j as isize + dj);
                        if a >= 0 && a < n1 && b >= 0 && b < n1 {
                            t.push((row, (a * n1 + b) as usize, coeff * wg));
                        }
                    }
                }
            }
        }
        Ok(CsrMatrix::from_triplets(self.dim(), self.dim(), &t))
    }

    /// Solves `D_ΔΔ x = b` in place.
    pub fn biharmonic_solve_in_place(&self, b: &mut [f64]) -> Result<()> {
        self.factor.solve_in_place(b)
    }
}

/// `F = −(Eξ/2) D_ΔΔ⁻¹ ℓ(q, q)`
fn airy_into(ops: &PlateOps, params: &PlateParams, q: &[f64], f: &mut [f64]) -> Result<()> {
    ops.ell_into(q, q, f);
    ops.biharmonic_solve_in_place(f)?;
    let c = -0.5 * params.young * params.thickness;
    f.iter_mut().for_each(|x| *x *= c);
    Ok(())
}

/// `Qh²/2 |D_Δ q|² + h²/2Eξ |D_Δ F|²`, or the second term alone.
struct PlatePotential {
    ops: Arc<PlateOps>,
    params: PlateParams,
    residual: bool,
}

impl PlatePotential {
    fn value_with_airy(&self, q: &[f64], f: &mut [f64], scratch: &mut [f64]) -> f64 {
        airy_into(&self.ops, &self.params, q, f).expect("cached factor matches grid");
        let h2 = self.ops.h * self.ops.h;
        self.ops.laplacian.apply_into(f, scratch).expect("dimension");
        let mut v = h2 / (2.0 * self.params.young * self.params.thickness) * dot(scratch, scratch);
        if !self.residual {
            self.ops.laplacian.apply_into(q, scratch).expect("dimension");
            v += 0.5 * self.params.rigidity() * h2 * dot(scratch, scratch);
        }
        v
    }
}

impl Potential for PlatePotential {
    fn dim(&self) -> usize {
        self.ops.dim()
    }

    fn value(&self, q: &[f64]) -> f64 {
        let mut f = vec![0.0; self.dim()];
        let mut scratch = vec![0.0; self.dim()];
        self.value_with_airy(q, &mut f, &mut scratch)
    }

    /// `∇V′ = −h² ℓ(q, F)`, plus `Q h² D_ΔΔ q` for the full potential.
    fn value_and_gradient(&self, q: &[f64], grad: &mut [f64]) -> f64 {
        let mut f = vec![0.0; self.dim()];
        let v = self.value_with_airy(q, &mut f, grad);
        self.ops.ell_into(q, &f, grad);
        let h2 = self.ops.h * self.ops.h;
        grad.iter_mut().for_each(|x| *x *= -h2);
        if !self.residual {
            let mut kq = vec![0.0; self.dim()];
            self.ops.biharmonic.apply_into(q, &mut kq).expect("dimension");
            let c = self.params.rigidity() * h2;
            grad.iter_mut().zip(&kq).for_each(|(g, x)| *g += c * x);
        }
        v
    }
}

/// A built plate: parameters, grid operators and the Hamiltonian system
/// (mass `ρξh² I`, split `K = Q h² D_ΔΔ`, `V′ = h²/2Eξ |D_Δ F|²`).
#[derive(Debug, Clone)]
pub struct Plate {
    pub params: PlateParams,
    pub ops: Arc<PlateOps>,
    pub system: HamiltonianSystem,
}

impl Plate {
    pub fn system(&self) -> &HamiltonianSystem {
        &self.system
    }
}

pub fn plate_build(params: &PlateParams) -> Result<Plate> {
    params.validate()?;
    let h = params.h();
    let ops = Arc::new(PlateOps::new(params.grid, h)?);
    let n = ops.dim();
    let mass = MassMatrix::scalar(n, params.rho * params.thickness * h * h)?;
    let full = PlatePotential { ops: ops.clone(), params: *params, residual: false };
    let residual = PlatePotential { ops: ops.clone(), params: *params, residual: true };
    let stiffness = ops.biharmonic.scale(params.rigidity() * h * h);
    let n1 = params.grid - 1;
    let pick = |frac: f64| ((frac * params.grid as f64).round() as usize).clamp(1, n1);
    let (lx, ly) = (pick(params.probe.0), pick(params.probe.1));
    let system = HamiltonianSystem::new(mass, Arc::new(full))?
        .with_split(stiffness, Arc::new(residual))?
        .with_probe((lx - 1) * n1 + (ly - 1), format!("q[x={:.4},y={:.4}]", lx as f64 * h, ly as f64 * h))?;
    Ok(Plate { params: *params, ops, system })
}

/// Airy stress function for displacement `q`.
pub fn plate_airy_solve(plate: &Plate, q: &[f64]) -> Result<Vec<f64>> {
    check_dim(plate.ops.dim(), q.len())?;
    let mut f = vec![0.0; q.len()];
    airy_into(&plate.ops, &plate.params, q, &mut f)?;
    Ok(f)
}

/// `q = αξ sin(πx/L) sin(πy/L)` on the grid, `p = 0`.
pub fn plate_initial(params: &PlateParams, alpha: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    params.validate()?;
    let n1 = params.grid - 1;
    let h = params.h();
    let mut q = vec![0.0; n1 * n1];
    let w = std::f64::consts::PI / params.side;
    for l in 0..n1 {
        for j in 0..n1 {
            let (x, y) = ((l + 1) as f64 * h, (j + 1) as f64 * h);
            q[l * n1 + j] = alpha * params.thickness * (w * x).sin() * (w * y).sin();
        }
    }
    Ok((q, vec![0.0; n1 * n1]))
}

/// One Störmer–Verlet step with `Fⁿ` recomputed from `qⁿ`.
pub fn plate_sv_step(plate: &Plate, q_n: &[f64], q_nm1: &[f64], k: f64) -> Result<Vec<f64>> {
    sv_step(&plate.system, q_n, q_nm1, k)
}

/// Linearly implicit conservative scheme coupling `q` and `F`.
///
/// Each step assembles `(1/Eξ) D_ΔΔ + (k²/2ρξ) Lₙ²`, with `Lₙ g = ℓ(qⁿ, g)`,
/// factors it, solves for the new `F` and recovers `q` explicitly. The
/// conserved energy is
/// `½ pᵀM⁻¹p + ½ (qⁿ⁺¹)ᵀK qⁿ + h²/4Eξ (|D_Δ Fⁿ⁺¹|² + |D_Δ Fⁿ|²)`.
pub struct PlateLinImp<'a> {
    plate: &'a Plate,
    k: f64,
    n: usize,
    q: Vec<f64>,
    q_next: Vec<f64>,
    f: Vec<f64>,
    f_next: Vec<f64>,
    p: Vec<f64>,
    counters: StepCounters,
}

impl<'a> PlateLinImp<'a> {
    pub fn new(plate: &'a Plate, k: f64, start: Start, q0: &[f64], p0: &[f64]) -> Result<Self> {
        let (q, q_next) = start_levels(&plate.system, q0, p0, k, start)?;
        let f = plate_airy_solve(plate, &q)?;
        // (1/Eξ) D_ΔΔ (F¹ + F⁰) = −ℓ(q¹, q⁰)
        let ops = &plate.ops;
        let mut f_next = ops.ell(&q_next, &q)?;
        ops.biharmonic_solve_in_place(&mut f_next)?;
        let c = plate.params.young * plate.params.thickness;
        f_next.iter_mut().zip(&f).for_each(|(x, f0)| *x = -c * *x - f0);
        let mut s = PlateLinImp {
            plate,
            k,
            n: 0,
            q,
            q_next,
            f,
            f_next,
            p: Vec::new(),
            counters: StepCounters { linear_solves: 2, ..Default::default() },
        };
        s.update_momentum()?;
        Ok(s)
    }

    fn update_momentum(&mut self) -> Result<()> {
        let mass = self.plate.system.mass();
        let v: Vec<f64> = self.q_next.iter().zip(&self.q).map(|(a, b)| (a - b) / self.k).collect();
        self.p = mass.apply(&v)?;
        Ok(())
    }

    /// `Fⁿ⁺¹`, the stress companion of `qⁿ⁺¹`.
    pub fn stress(&self) -> &[f64] {
        &self.f_next
    }
}

/// One linearly implicit step: `(qⁿ⁺¹, Fⁿ⁺¹)` from `qⁿ, qⁿ⁻¹, Fⁿ, Fⁿ⁻¹`.
pub fn plate_linimp_step(
    plate: &Plate,
    q_n: &[f64],
    q_nm1: &[f64],
    f_n: &[f64],
    f_nm1: &[f64],
    k: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let ops = &plate.ops;
    let n = ops.dim();
    for v in [q_n, q_nm1, f_n, f_nm1] {
        check_dim(n, v.len())?;
    }
    let pr = &plate.params;
    let rho_xi = pr.rho * pr.thickness;
    let e_xi = pr.young * pr.thickness;
    let a = k * k / (2.0 * rho_xi);
    let ln = ops.ell_matrix(q_n)?;

    // r1 = (2I − (Qk²/ρξ) D_ΔΔ) qⁿ − qⁿ⁻¹ + a Lₙ Fⁿ⁻¹
    let bq = ops.biharmonic.apply(q_n)?;
    let lf = ln.apply(f_nm1)?;
    let cq = pr.rigidity() * k * k / rho_xi;
    let r1: Vec<f64> = (0..n).map(|i| 2.0 * q_n[i] - cq * bq[i] - q_nm1[i] + a * lf[i]).collect();

    // ((1/Eξ) D_ΔΔ + a Lₙ²) Fⁿ⁺¹ = −Lₙ r1 − (1/Eξ) D_ΔΔ Fⁿ
    let system = ops.biharmonic.scale(1.0 / e_xi).add_scaled(a, &ln.matmul(&ln));
    let factor = spd_factorize(&system).map_err(|e| Error::LinearSolveFailure(e.to_string()))?;
    let lr = ln.apply(&r1)?;
    let bf = ops.biharmonic.apply(f_n)?;
    let mut f_new: Vec<f64> = (0..n).map(|i| -lr[i] - bf[i] / e_xi).collect();
    factor.solve_in_place(&mut f_new).map_err(|e| Error::LinearSolveFailure(e.to_string()))?;

    let lf_new = ln.apply(&f_new)?;
    let q_new: Vec<f64> = (0..n).map(|i| r1[i] + a * lf_new[i]).collect();
    if !q_new.iter().chain(&f_new).all(|x| x.is_finite()) {
        return Err(Error::LinearSolveFailure("non-finite solution".into()));
    }
    Ok((q_new, f_new))
}

impl Stepper for PlateLinImp<'_> {
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
        let sys = &self.plate.system;
        let split = sys.split().ok_or(Error::NoSplit)?;
        let kinetic = 0.5 * sys.mass().inverse_inner(&self.p, &self.p)?;
        let linear = 0.5 * split.stiffness.bilinear(&self.q_next, &self.q)?;
        let lap = self.plate.ops.laplacian();
        let (a, b) = (lap.apply(&self.f_next)?, lap.apply(&self.f)?);
        let pr = &self.plate.params;
        let h2 = self.plate.ops.h * self.plate.ops.h;
        let stress = h2 / (4.0 * pr.young * pr.thickness) * (dot(&a, &a) + dot(&b, &b));
        Ok(kinetic + linear + stress)
    }

    fn advance(&mut self) -> Result<()> {
        let (q_new, f_new) = plate_linimp_step(self.plate, &self.q_next, &self.q, &self.f_next, &self.f, self.k)?;
        self.q = std::mem::replace(&mut self.q_next, q_new);
        self.f = std::mem::replace(&mut self.f_next, f_new);
        self.update_momentum()?;
        self.counters.linear_solves += 1;
        self.counters.steps += 1;
        self.n += 1;
        Ok(())
    }

    fn counters(&self) -> StepCounters {
        self.counters
    }

    fn checkpoint(&self) -> Option<Checkpoint> {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn steel_defaults() {
        let p = PlateParams::steel();
        assert_eq!(p.grid, 31);
        assert_eq!(p.dim(), 900);
        assert!((p.h_min(5e-6) - 7.8e-3).abs() < 5e-5);
    }

    #[test]
    fn ell_matrix_matches_operator_and_is_symmetric() {
        let ops = PlateOps::new(6, 0.1).unwrap();
        let f: Vec<f64> = (0..25).map(|i| ((i * 7 % 11) as f64 - 5.0) * 0.1).collect();
        let g: Vec<f64> = (0..25).map(|i| ((i * 3 % 13) as f64 - 6.0) * 0.2).collect();
        let m = ops.ell_matrix(&f).unwrap();
        assert!(m.is_symmetric(1e-9));
        let direct = ops.ell(&f, &g).unwrap();
        let via = m.apply(&g).unwrap();
        assert!(crate::linalg::rel_diff(&via, &direct) < 1e-13);
    }
}
