use super::{axpy_counted, dot_counted, Flops};
use crate::error::{check_dim, Error, Result};

const SINGULAR_TOL: f64 = 1e-14;

/// Solves `(I + α βᵀ) x = b` in O(N) using the closed-form inverse
/// `I − α βᵀ / (1 + βᵀ α)`.
pub fn sherman_morrison_solve(alpha: &[f64], beta: &[f64], b: &[f64]) -> Result<Vec<f64>> {
    let mut flops = Flops::default();
    sherman_morrison_solve_counted(alpha, beta, b, &mut flops)
}

/// As [`sherman_morrison_solve`], accumulating the operation count.
pub fn sherman_morrison_solve_counted(
    alpha: &[f64],
    beta: &[f64],
    b: &[f64],
    flops: &mut Flops,
) -> Result<Vec<f64>> {
    check_dim(alpha.len(), beta.len())?;
    check_dim(alpha.len(), b.len())?;
    let denominator = denominator(alpha, beta, flops)?;
    let mut x = b.to_vec();
    solve_in_place(alpha, beta, denominator, &mut x, flops);
    Ok(x)
}

/// Overwrites `x` (holding `b`) with the solution, given `1 + βᵀα`.
pub(crate) fn solve_in_place(alpha: &[f64], beta: &[f64], denominator: f64, x: &mut [f64], flops: &mut Flops) {
    let coeff = dot_counted(beta, x, flops) / denominator;
    flops.add(1);
    axpy_counted(-coeff, alpha, x, flops);
}

/// `1 + βᵀα`, failing when the update is singular.
pub(crate) fn denominator(alpha: &[f64], beta: &[f64], flops: &mut Flops) -> Result<f64> {
    let d = 1.0 + dot_counted(beta, alpha, flops);
    flops.add(1);
    if d.abs() < SINGULAR_TOL || !d.is_finite() {
        return Err(Error::SingularUpdate { denominator: d });
    }
    Ok(d)
}
