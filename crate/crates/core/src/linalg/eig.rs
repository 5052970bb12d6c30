use super::{dot, norm2, CsrMatrix};
use crate::error::{Error, Result};

/// Anything that can be applied to a vector.
pub trait LinearOperator {
    fn dim(&self) -> usize;
    fn apply_into(&self, x: &[f64], y: &mut [f64]);
}

impl LinearOperator for CsrMatrix {
    fn dim(&self) -> usize {
        self.rows()
    }

    fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        CsrMatrix::apply_into(self, x, y).expect("square operator")
    }
}

/// Power-iteration settings.
#[derive(Debug, Clone, Copy)]
pub struct PowerIteration {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for PowerIteration {
    fn default() -> Self {
        PowerIteration { tol: 1e-10, max_iter: 100_000 }
    }
}

/// Largest eigenvalue of a symmetric positive semi-definite operator by power
/// iteration.
///
/// Two deterministic start vectors are probed, all ones and ones with
/// alternating sign, and the iteration starts from the one with the larger
/// `|A v| / |v|`. The estimate `|A v|` for unit `v` never exceeds `λ_max`;
/// iteration stops once its relative change drops below `settings.tol`.
pub fn max_eig_sym(op: &dyn LinearOperator, settings: PowerIteration) -> Result<f64> {
    let n = op.dim();
    if n == 0 {
        return Ok(0.0);
    }
    let scale = 1.0 / (n as f64).sqrt();
    let ones = vec![scale; n];
    let alternating: Vec<f64> =
        (0..n).map(|i| if i % 2 == 0 { scale } else { -scale }).collect();
    let mut w = vec![0.0; n];
    op.apply_into(&ones, &mut w);
    let r_ones = norm2(&w);
    op.apply_into(&alternating, &mut w);
    let r_alt = norm2(&w);
    let mut v = if r_alt > r_ones { alternating } else { ones };
    if r_ones.max(r_alt) == 0.0 {
        return Ok(0.0);
    }
    let mut estimate = f64::NAN;
    for _ in 0..settings.max_iter {
        op.apply_into(&v, &mut w);
        let norm = norm2(&w);
        if !norm.is_finite() {
            return Err(Error::NoConvergence { iterations: 0 });
        }
        if norm == 0.0 {
            return Ok(0.0);
        }
        let previous = estimate;
        estimate = norm;
        for (vi, wi) in v.iter_mut().zip(&w) {
            *vi = wi / norm;
        }
        if (estimate - previous).abs() <= settings.tol * estimate {
            // One more Rayleigh step pins the value from below as well.
            op.apply_into(&v, &mut w);
            return Ok(norm2(&w).max(dot(&v, &w)));
        }
    }
    Err(Error::NoConvergence { iterations: settings.max_iter })
}
