use super::{max_eig_sym, spd_factorize_dense, CsrMatrix, FactorizationHandle, LinearOperator, PowerIteration};
use crate::error::{check_dim, Error, Result};

/// Constant symmetric positive definite mass matrix `M`.
#[derive(Debug, Clone)]
pub enum MassMatrix {
    /// `c · I`
    Scalar { n: usize, c: f64 },
    Diagonal(Vec<f64>),
    /// Row-major dense matrix with its Cholesky factor.
    Dense { n: usize, a: Vec<f64>, factor: FactorizationHandle },
}

impl MassMatrix {
    pub fn identity(n: usize) -> Self {
        MassMatrix::Scalar { n, c: 1.0 }
    }

    pub fn scalar(n: usize, c: f64) -> Result<Self> {
        if !(c > 0.0) || !c.is_finite() {
            return Err(Error::NotPositiveDefinite { row: 0, pivot: c });
        }
        Ok(MassMatrix::Scalar { n, c })
    }

    pub fn diagonal(d: Vec<f64>) -> Result<Self> {
        if let Some((row, &pivot)) = d.iter().enumerate().find(|(_, &v)| !(v > 0.0) || !v.is_finite()) {
            return Err(Error::NotPositiveDefinite { row, pivot });
        }
        Ok(MassMatrix::Diagonal(d))
    }

    /// Checks symmetry and factors; fails on a non-positive pivot.
    pub fn dense(n: usize, a: Vec<f64>) -> Result<Self> {
        check_dim(n * n, a.len())?;
        for i in 0..n {
            for j in 0..i {
                let (x, y) = (a[i * n + j], a[j * n + i]);
                if (x - y).abs() > 1e-12 * (x.abs() + y.abs()).max(1.0) {
                    return Err(Error::InvalidParameter(format!("mass matrix not symmetric at ({i}, {j})")));
                }
            }
        }
        let factor = spd_factorize_dense(&a, n)?;
        Ok(MassMatrix::Dense { n, a, factor })
    }

    pub fn dim(&self) -> usize {
        match self {
            MassMatrix::Scalar { n, .. } | MassMatrix::Dense { n, .. } => *n,
            MassMatrix::Diagonal(d) => d.len(),
        }
    }

    /// `out = M⁻¹ p`
    pub fn solve_into(&self, p: &[f64], out: &mut [f64]) -> Result<()> {
        check_dim(self.dim(), p.len())?;
        check_dim(self.dim(), out.len())?;
        match self {
            MassMatrix::Scalar { c, .. } => {
                let inv = 1.0 / c;
                out.iter_mut().zip(p).for_each(|(o, x)| *o = x * inv);
            }
            MassMatrix::Diagonal(d) => {
                out.iter_mut().zip(p.iter().zip(d)).for_each(|(o, (x, di))| *o = x / di);
            }
            MassMatrix::Dense { factor, .. } => {
                out.copy_from_slice(p);
                factor.solve_in_place(out)?;
            }
        }
        Ok(())
    }

    pub fn solve(&self, p: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; p.len()];
        self.solve_into(p, &mut out)?;
        Ok(out)
    }

    /// `M v`
    pub fn apply(&self, v: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim(), v.len())?;
        Ok(match self {
            MassMatrix::Scalar { c, .. } => v.iter().map(|x| c * x).collect(),
            MassMatrix::Diagonal(d) => v.iter().zip(d).map(|(x, di)| x * di).collect(),
            MassMatrix::Dense { n, a, .. } => (0..*n)
                .map(|i| a[i * n..(i + 1) * n].iter().zip(v).map(|(x, y)| x * y).sum())
                .collect(),
        })
    }

    /// `pᵀ M⁻¹ r`
    pub fn inverse_inner(&self, p: &[f64], r: &[f64]) -> Result<f64> {
        check_dim(self.dim(), r.len())?;
        let w = self.solve(p)?;
        Ok(super::dot(&w, r))
    }

    pub fn lambda_max(&self) -> Result<f64> {
        match self {
            MassMatrix::Scalar { c, .. } => Ok(*c),
            MassMatrix::Diagonal(d) => Ok(d.iter().cloned().fold(0.0, f64::max)),
            MassMatrix::Dense { n, a, .. } => {
                max_eig_sym(&CsrMatrix::from_dense(*n, *n, a), PowerIteration::default())
            }
        }
    }

    /// The operator `L⁻¹ K L⁻ᵀ` with `M = L Lᵀ`, which shares its spectrum
    /// with `M⁻¹ K`.
    pub fn congruence<'a>(&'a self, k: &'a CsrMatrix) -> Result<Congruence<'a>> {
        check_dim(self.dim(), k.rows())?;
        check_dim(self.dim(), k.cols())?;
        Ok(Congruence { mass: self, k })
    }
}

pub struct Congruence<'a> {
    mass: &'a MassMatrix,
    k: &'a CsrMatrix,
}

impl LinearOperator for Congruence<'_> {
    fn dim(&self) -> usize {
        self.mass.dim()
    }

    fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        let mut t = x.to_vec();
        match self.mass {
            MassMatrix::Scalar { c, .. } => t.iter_mut().for_each(|v| *v /= c.sqrt()),
            MassMatrix::Diagonal(d) => t.iter_mut().zip(d).for_each(|(v, di)| *v /= di.sqrt()),
            MassMatrix::Dense { factor, .. } => factor.backward_in_place(&mut t).expect("dimension checked"),
        }
        self.k.apply_into(&t, y).expect("dimension checked");
        match self.mass {
            MassMatrix::Scalar { c, .. } => y.iter_mut().for_each(|v| *v /= c.sqrt()),
            MassMatrix::Diagonal(d) => y.iter_mut().zip(d).for_each(|(v, di)| *v /= di.sqrt()),
            MassMatrix::Dense { factor, .. } => factor.forward_in_place(y).expect("dimension checked"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn construction_rejects_non_positive_entries() {
        assert!(MassMatrix::scalar(3, 0.0).is_err());
        assert!(MassMatrix::diagonal(vec![1.0, -2.0]).is_err());
        assert!(MassMatrix::dense(2, vec![1.0, 2.0, 2.0, 1.0]).is_err());
        assert!(MassMatrix::dense(2, vec![1.0, 0.5, 0.0, 1.0]).is_err());
    }

    #[test]
    fn dense_solve_inverts_apply() {
        let m = MassMatrix::dense(2, vec![2.0, 0.5, 0.5, 1.0]).unwrap();
        let v = [0.3, -1.2];
        let back = m.solve(&m.apply(&v).unwrap()).unwrap();
        assert!(crate::linalg::rel_diff(&back, &v) < 1e-14);
    }

    #[test]
    fn congruence_matches_inverse_mass_spectrum() {
        let m = MassMatrix::diagonal(vec![1.0, 4.0]).unwrap();
        let k = CsrMatrix::from_dense(2, 2, &[2.0, 0.0, 0.0, 2.0]);
        let op = m.congruence(&k).unwrap();
        let lam = max_eig_sym(&op, PowerIteration::default()).unwrap();
        assert!((lam - 2.0).abs() < 1e-9, "{lam}");
    }
}
