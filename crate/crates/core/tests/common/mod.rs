#![allow(dead_code)]

use std::sync::Arc;

use ieqsim::hamiltonian::FnPotential;
use ieqsim::linalg::{CsrMatrix, MassMatrix};
use ieqsim::{HamiltonianSystem, Potential};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| scale * rng.gen_range(-1.0..1.0)).collect()
}

/// Gaussian elimination with partial pivoting on a row-major copy of `a`.
pub fn dense_solve(a: &[f64], b: &[f64]) -> Vec<f64> {
    let n = b.len();
    let mut m = a.to_vec();
    let mut x = b.to_vec();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| m[i * n + col].abs().total_cmp(&m[j * n + col].abs())).unwrap();
        if piv != col {
            for c in 0..n {
                m.swap(col * n + c, piv * n + c);
            }
            x.swap(col, piv);
        }
        for r in col + 1..n {
            let f = m[r * n + col] / m[col * n + col];
            for c in col..n {
                m[r * n + c] -= f * m[col * n + c];
            }
            x[r] -= f * x[col];
        }
    }
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|c| m[r * n + c] * x[c]).sum();
        x[r] = (x[r] - s) / m[r * n + r];
    }
    x
}

pub fn dense_matvec(a: &[f64], x: &[f64]) -> Vec<f64> {
    let n = x.len();
    (0..a.len() / n).map(|i| (0..n).map(|j| a[i * n + j] * x[j]).sum()).collect()
}

/// `BᵀB + shift·I` for a random `B`.
pub fn random_spd(rng: &mut ChaCha8Rng, n: usize, shift: f64) -> Vec<f64> {
    let b = uniform(rng, n * n, 1.0);
    let mut a = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            a[i * n + j] = (0..n).map(|k| b[k * n + i] * b[k * n + j]).sum::<f64>() + if i == j { shift } else { 0.0 };
        }
    }
    a
}

pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    let den: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    if den == 0.0 {
        num
    } else {
        num / den
    }
}

/// Central differences of `V` with per-coordinate step `h · max(|qᵢ|, floor)`.
pub fn fd_gradient(v: &dyn Potential, q: &[f64], h: f64, floor: f64) -> Vec<f64> {
    let mut x = q.to_vec();
    (0..q.len())
        .map(|i| {
            let d = h * q[i].abs().max(floor);
            x[i] = q[i] + d;
            let up = v.value(&x);
            x[i] = q[i] - d;
            let down = v.value(&x);
            x[i] = q[i];
            (up - down) / (2.0 * d)
        })
        .collect()
}

pub fn analytic_gradient(v: &dyn Potential, q: &[f64]) -> Vec<f64> {
    let mut g = vec![0.0; q.len()];
    v.value_and_gradient(q, &mut g);
    g
}

/// Chain with anharmonic springs: `V = Σ cᵢ qᵢ² + Σ (qᵢ₊₁ − qᵢ)⁴` and walls at
/// both ends. Non-negative, non-trivially coupled.
pub fn quartic_chain(n: usize, c: Vec<f64>) -> FnPotential<impl Fn(&[f64]) -> f64 + Send + Sync, impl Fn(&[f64], &mut [f64]) + Send + Sync> {
    let c2 = c.clone();
    let value = move |q: &[f64]| {
        let mut v: f64 = q.iter().zip(&c).map(|(x, ci)| ci * x * x).sum();
        for i in 0..=q.len() {
            let left = if i == 0 { 0.0 } else { q[i - 1] };
            let right = if i == q.len() { 0.0 } else { q[i] };
            v += (right - left).powi(4);
        }
        v
    };
    let gradient = move |q: &[f64], g: &mut [f64]| {
        for (i, gi) in g.iter_mut().enumerate() {
            let left = if i == 0 { 0.0 } else { q[i - 1] };
            let right = if i + 1 == q.len() { 0.0 } else { q[i + 1] };
            *gi = 2.0 * c2[i] * q[i] + 4.0 * (q[i] - left).powi(3) - 4.0 * (right - q[i]).powi(3);
        }
    };
    FnPotential::new(n, value, gradient)
}

/// A quartic chain with a dense random mass matrix.
pub fn dense_mass_system(seed: u64, n: usize) -> (HamiltonianSystem, Vec<f64>) {
    let mut r = rng(seed);
    let m = random_spd(&mut r, n, 1.0);
    let c: Vec<f64> = (0..n).map(|_| r.gen_range(0.5..2.0)).collect();
    let sys = HamiltonianSystem::new(MassMatrix::dense(n, m.clone()).unwrap(), Arc::new(quartic_chain(n, c))).unwrap();
    (sys, m)
}

/// `V = ½ qᵀKq + Σ qᵢ⁴` with `K` the scaled second-difference matrix, split
/// accordingly.
pub fn split_chain(n: usize, stiffness: f64) -> HamiltonianSystem {
    let mut t = Vec::new();
    for i in 0..n {
        t.push((i, i, 2.0 * stiffness));
        if i + 1 < n {
            t.push((i, i + 1, -stiffness));
            t.push((i + 1, i, -stiffness));
        }
    }
    let k = CsrMatrix::from_triplets(n, n, &t);
    let k_full = k.clone();
    let full = FnPotential::new(
        n,
        move |q: &[f64]| 0.5 * k_full.bilinear(q, q).unwrap() + q.iter().map(|x| x.powi(4)).sum::<f64>(),
        {
            let k = k.clone();
            move |q: &[f64], g: &mut [f64]| {
                k.apply_into(q, g).unwrap();
                g.iter_mut().zip(q).for_each(|(gi, x)| *gi += 4.0 * x.powi(3));
            }
        },
    );
    let residual = FnPotential::new(
        n,
        |q: &[f64]| q.iter().map(|x| x.powi(4)).sum::<f64>(),
        |q: &[f64], g: &mut [f64]| g.iter_mut().zip(q).for_each(|(gi, x)| *gi = 4.0 * x.powi(3)),
    );
    HamiltonianSystem::new(MassMatrix::identity(n), Arc::new(full))
        .unwrap()
        .with_split(k, Arc::new(residual))
        .unwrap()
}
