mod common;

use common::{dense_matvec, dense_solve, random_spd, rel_err, rng, uniform};
use ieqsim::linalg::{
    max_eig_sym, sherman_morrison_solve, sherman_morrison_solve_counted, spd_factorize, CsrMatrix, Flops,
    MassMatrix, PowerIteration,
};
use ieqsim::Error;
use proptest::prelude::*;
use rand::Rng;

#[test]
fn sherman_morrison_matches_dense_solve() {
    let mut r = rng(7);
    for n in [1, 2, 3, 6, 20, 64] {
        for _ in 0..40 {
            let alpha = uniform(&mut r, n, 1.0);
            let mut beta = uniform(&mut r, n, 1.0);
            // keep 1 + βᵀα away from zero so the dense oracle is well conditioned
            let d: f64 = 1.0 + alpha.iter().zip(&beta).map(|(a, b)| a * b).sum::<f64>();
            if d.abs() < 0.2 {
                beta.iter_mut().for_each(|b| *b = -*b);
            }
            let b = uniform(&mut r, n, 3.0);
            let mut a = vec![0.0; n * n];
            for i in 0..n {
                for j in 0..n {
                    a[i * n + j] = alpha[i] * beta[j] + if i == j { 1.0 } else { 0.0 };
                }
            }
            let x = sherman_morrison_solve(&alpha, &beta, &b).unwrap();
            let oracle = dense_solve(&a, &b);
            assert!(rel_err(&x, &oracle) < 1e-12, "n = {n}: {}", rel_err(&x, &oracle));
        }
    }
}

#[test]
fn sherman_morrison_cost_is_linear() {
    let mut counts = Vec::new();
    for n in [1000, 2000, 4000] {
        let v = vec![0.01; n];
        let mut f = Flops::default();
        sherman_morrison_solve_counted(&v, &v, &v, &mut f).unwrap();
        counts.push(f.0 as f64);
    }
    assert!((counts[1] / counts[0] - 2.0).abs() < 0.01, "{counts:?}");
    assert!((counts[2] / counts[1] - 2.0).abs() < 0.01, "{counts:?}");
}

#[test]
fn singular_rank_one_update_is_an_error() {
    let alpha = [1.0, 0.0];
    let beta = [-1.0, 5.0];
    assert!(matches!(sherman_morrison_solve(&alpha, &beta, &[1.0, 1.0]), Err(Error::SingularUpdate { .. })));
}

#[test]
fn cholesky_matches_dense_solve_on_both_paths() {
    let mut r = rng(11);
    for n in [3, 10, 40, 80] {
        let a = random_spd(&mut r, n, 0.5);
        let f = spd_factorize(&CsrMatrix::from_dense(n, n, &a)).unwrap();
        let b = uniform(&mut r, n, 1.0);
        let x = f.solve(&b).unwrap();
        assert!(rel_err(&x, &dense_solve(&a, &b)) < 1e-10, "n = {n}");
        assert!(rel_err(&dense_matvec(&a, &x), &b) < 1e-12, "n = {n}");
    }
}

#[test]
fn banded_factor_solves_the_discrete_biharmonic() {
    // D⁴ on a 1-D grid with zero ends: pentadiagonal and SPD
    let n = 200;
    let mut t = Vec::new();
    for i in 0..n {
        for (off, v) in [(-2i64, 1.0), (-1, -4.0), (0, 6.0), (1, -4.0), (2, 1.0)] {
            let j = i as i64 + off;
            if j >= 0 && j < n as i64 {
                t.push((i, j as usize, v));
            }
        }
    }
    let a = CsrMatrix::from_triplets(n, n, &t);
    let f = spd_factorize(&a).unwrap();
    let x_true: Vec<f64> = (0..n).map(|i| (i as f64 * 0.1).sin()).collect();
    let b = a.apply(&x_true).unwrap();
    assert!(rel_err(&f.solve(&b).unwrap(), &x_true) < 1e-8);
}

#[test]
fn power_iteration_on_second_difference_matrix() {
    // eigenvalues 2 − 2cos(jπ/(n+1)); the largest is 2 + 2cos(π/(n+1))
    for n in [5, 20, 60] {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0));
            if i + 1 < n {
                t.push((i, i + 1, -1.0));
                t.push((i + 1, i, -1.0));
            }
        }
        let a = CsrMatrix::from_triplets(n, n, &t);
        let exact = 2.0 + 2.0 * (std::f64::consts::PI / (n + 1) as f64).cos();
        let lam = max_eig_sym(&a, PowerIteration { tol: 1e-13, max_iter: 1_000_000 }).unwrap();
        assert!(lam <= exact * (1.0 + 1e-14), "estimate must not exceed the spectrum");
        assert!((lam - exact).abs() < 1e-6 * exact, "n = {n}: {lam} vs {exact}");
    }
}

#[test]
fn generalized_eigenvalue_through_dense_mass_congruence() {
    // M = [[2, 1], [1, 2]], K = I: eigenvalues of M⁻¹ are 1 and 1/3
    let m = MassMatrix::dense(2, vec![2.0, 1.0, 1.0, 2.0]).unwrap();
    let k = CsrMatrix::identity(2);
    let lam = max_eig_sym(&m.congruence(&k).unwrap(), PowerIteration::default()).unwrap();
    assert!((lam - 1.0).abs() < 1e-8, "{lam}");
}

#[test]
fn mass_inverse_inner_product_against_dense_oracle() {
    let mut r = rng(3);
    let n = 12;
    let a = random_spd(&mut r, n, 1.0);
    let m = MassMatrix::dense(n, a.clone()).unwrap();
    let p = uniform(&mut r, n, 1.0);
    let q = uniform(&mut r, n, 1.0);
    let oracle: f64 = dense_solve(&a, &p).iter().zip(&q).map(|(x, y)| x * y).sum();
    assert!((m.inverse_inner(&p, &q).unwrap() - oracle).abs() < 1e-12 * oracle.abs().max(1.0));
    let d = MassMatrix::diagonal((1..=n).map(|i| i as f64).collect()).unwrap();
    let w = d.solve(&p).unwrap();
    for (i, (x, y)) in w.iter().zip(&p).enumerate() {
        assert_eq!(*x, y / (i + 1) as f64);
    }
    assert_eq!(d.lambda_max().unwrap(), n as f64);
}

#[test]
fn mismatched_dimensions_are_reported() {
    let m = MassMatrix::identity(3);
    assert!(matches!(m.solve(&[1.0, 2.0]), Err(Error::DimensionMismatch { expected: 3, got: 2 })));
    assert!(sherman_morrison_solve(&[1.0], &[1.0, 2.0], &[1.0]).is_err());
}

fn arb_matrix() -> impl Strategy<Value = (usize, usize, Vec<f64>)> {
    (1usize..8, 1usize..8).prop_flat_map(|(r, c)| {
        proptest::collection::vec(prop_oneof![Just(0.0), -5.0..5.0f64], r * c).prop_map(move |v| (r, c, v))
    })
}

proptest! {
    #[test]
    fn csr_apply_matches_dense((r, c, a) in arb_matrix(), seed in any::<u64>()) {
        let mut g = rng(seed);
        let x: Vec<f64> = (0..c).map(|_| g.gen_range(-1.0..1.0)).collect();
        let m = CsrMatrix::from_dense(r, c, &a);
        let y = m.apply(&x).unwrap();
        let oracle = dense_matvec(&a, &x);
        for (u, v) in y.iter().zip(&oracle) {
            prop_assert!((u - v).abs() <= 1e-12 * (1.0 + v.abs()));
        }
        prop_assert_eq!(m.to_dense(), a);
        prop_assert_eq!(m.transpose().transpose(), m);
    }

    #[test]
    fn symmetric_bilinear_form_is_symmetric(n in 1usize..10, seed in any::<u64>()) {
        let mut g = rng(seed);
        let a = random_spd(&mut g, n, 0.1);
        let m = CsrMatrix::from_dense(n, n, &a);
        let x = uniform(&mut g, n, 1.0);
        let y = uniform(&mut g, n, 1.0);
        let (xy, yx) = (m.bilinear(&x, &y).unwrap(), m.bilinear(&y, &x).unwrap());
        prop_assert!((xy - yx).abs() <= 1e-12 * (1.0 + xy.abs()));
        prop_assert!(m.bilinear(&x, &x).unwrap() >= 0.0);
    }
}
