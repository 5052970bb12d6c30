use super::CsrMatrix;
use crate::error::{check_dim, Error, Result};

/// Below this dimension `spd_factorize` uses a dense factor.
pub const DENSE_CUTOFF: usize = 32;

/// Cholesky factor `A = L Lᵀ` of a symmetric positive definite matrix.
///
/// Computed once and reused for every solve. Large sparse matrices are
/// factored in envelope (skyline) storage: row `i` of `L` keeps the entries
/// from its first structural non-zero up to the diagonal, which is where all
/// fill-in of a banded or grid operator lands.
#[derive(Debug, Clone)]
pub struct FactorizationHandle {
    n: usize,
    repr: Repr,
}

#[derive(Debug, Clone)]
enum Repr {
    /// Row-major lower triangle, full `n × n` storage.
    Dense(Vec<f64>),
    Skyline {
        first: Vec<usize>,
        start: Vec<usize>,
        data: Vec<f64>,
    },
}

/// Factors a symmetric positive definite sparse matrix. Only the lower
/// triangle is read.
pub fn spd_factorize(a: &CsrMatrix) -> Result<FactorizationHandle> {
    check_dim(a.rows(), a.cols())?;
    let n = a.rows();
    if n < DENSE_CUTOFF {
        return spd_factorize_dense(&a.to_dense(), n);
    }
    let first: Vec<usize> = (0..n)
        .map(|i| a.row(i).map(|(c, _)| c).filter(|&c| c <= i).min().unwrap_or(i))
        .collect();
    let mut start = vec![0usize; n + 1];
    for i in 0..n {
        start[i + 1] = start[i] + (i - first[i] + 1);
    }
    let mut data = vec![0.0; start[n]];
    for i in 0..n {
        for (c, v) in a.row(i) {
            if c <= i {
                data[start[i] + c - first[i]] = v;
            }
        }
    }
    for i in 0..n {
        let fi = first[i];
        let row_i = start[i];
        for j in fi..i {
            let fj = first[j];
            let k0 = fi.max(fj);
            let row_j = start[j];
            let mut s = data[row_i + j - fi];
            for k in k0..j {
                s -= data[row_i + k - fi] * data[row_j + k - fj];
            }
            data[row_i + j - fi] = s / data[row_j + j - fj];
        }
        let mut d = data[row_i + i - fi];
        for k in fi..i {
            let l = data[row_i + k - fi];
            d -= l * l;
        }
        if !(d > 0.0) || !d.is_finite() {
            return Err(Error::NotPositiveDefinite { row: i, pivot: d });
        }
        data[row_i + i - fi] = d.sqrt();
    }
    Ok(FactorizationHandle { n, repr: Repr::Skyline { first, start, data } })
}

/// Factors a dense row-major symmetric positive definite matrix.
pub fn spd_factorize_dense(a: &[f64], n: usize) -> Result<FactorizationHandle> {
    check_dim(n * n, a.len())?;
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if !(s > 0.0) || !s.is_finite() {
                    return Err(Error::NotPositiveDefinite { row: i, pivot: s });
                }
                l[i * n + i] = s.sqrt();
            } else {
                l[i * n + j] = s / l[j * n + j];
            }
        }
    }
    Ok(FactorizationHandle { n, repr: Repr::Dense(l) })
}

impl FactorizationHandle {
    pub fn dim(&self) -> usize {
        self.n
    }

    /// Number of stored factor entries.
    pub fn stored(&self) -> usize {
        match &self.repr {
            Repr::Dense(_) => self.n * (self.n + 1) / 2,
            Repr::Skyline { data, .. } => data.len(),
        }
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x)?;
        Ok(x)
    }

    /// Overwrites `x` (holding `b`) with `A⁻¹ b`.
    pub fn solve_in_place(&self, x: &mut [f64]) -> Result<()> {
        self.forward_in_place(x)?;
        self.backward_in_place(x)
    }

    /// `x ← L⁻¹ x`
    pub fn forward_in_place(&self, x: &mut [f64]) -> Result<()> {
        check_dim(self.n, x.len())?;
        let n = self.n;
        match &self.repr {
            Repr::Dense(l) => {
                for i in 0..n {
                    let mut s = x[i];
                    for k in 0..i {
                        s -= l[i * n + k] * x[k];
                    }
                    x[i] = s / l[i * n + i];
                }
            }
            Repr::Skyline { first, start, data } => {
                for i in 0..n {
                    let fi = first[i];
                    let row = &data[start[i]..start[i + 1]];
                    let mut s = x[i];
                    for (lk, xk) in row[..i - fi].iter().zip(&x[fi..i]) {
                        s -= lk * xk;
                    }
                    x[i] = s / row[i - fi];
                }
            }
        }
        Ok(())
    }

    /// `x ← L⁻ᵀ x`
    pub fn backward_in_place(&self, x: &mut [f64]) -> Result<()> {
        check_dim(self.n, x.len())?;
        let n = self.n;
        match &self.repr {
            Repr::Dense(l) => {
                for i in (0..n).rev() {
                    let xi = x[i] / l[i * n + i];
                    x[i] = xi;
                    for k in 0..i {
                        x[k] -= l[i * n + k] * xi;
                    }
                }
            }
            Repr::Skyline { first, start, data } => {
                for i in (0..n).rev() {
                    let fi = first[i];
                    let row = &data[start[i]..start[i + 1]];
                    let xi = x[i] / row[i - fi];
                    x[i] = xi;
                    for (xk, lk) in x[fi..i].iter_mut().zip(&row[..i - fi]) {
                        *xk -= lk * xi;
                    }
                }
            }
        }
        Ok(())
    }
}
