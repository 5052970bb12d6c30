//! Minimal linear-algebra kernel: compressed-row operators, SPD factorization,
//! the rank-1 Sherman–Morrison solve and a power-iteration bound on the
//! largest eigenvalue.
//!
//! Vectors are plain `[f64]` slices throughout. Routines that sit on the
//! per-step path of the explicit schemes take a [`Flops`] counter so the cost
//! of an update can be measured rather than assumed.

mod cholesky;
mod eig;
mod mass;
pub(crate) mod sherman_morrison;
mod sparse;

pub use cholesky::{spd_factorize, spd_factorize_dense, FactorizationHandle, DENSE_CUTOFF};
pub use eig::{max_eig_sym, LinearOperator, PowerIteration};
pub use mass::{Congruence, MassMatrix};
pub use sherman_morrison::{sherman_morrison_solve, sherman_morrison_solve_counted};
pub use sparse::CsrMatrix;

/// Running count of floating-point operations (one per add or multiply).
#[derive(Debug, Default, Clone, Copy, PartialEq, Eq)]
pub struct Flops(pub u64);

impl Flops {
    #[inline]
    pub fn add(&mut self, n: usize) {
        self.0 += n as u64;
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub(crate) fn dot_counted(a: &[f64], b: &[f64], flops: &mut Flops) -> f64 {
    flops.add(2 * a.len());
    dot(a, b)
}

#[inline]
pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[inline]
pub fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

/// `y += a * x`
#[inline]
pub fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

pub(crate) fn axpy_counted(a: f64, x: &[f64], y: &mut [f64], flops: &mut Flops) {
    flops.add(2 * x.len());
    axpy(a, x, y);
}

/// Relative Euclidean distance `|a - b| / max(|b|, tiny)`.
pub fn rel_diff(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    let den = norm2(b);
    if den == 0.0 {
        num
    } else {
        num / den
    }
}
