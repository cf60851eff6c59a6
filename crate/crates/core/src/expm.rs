//! Dense complex matrix exponential: scaling and squaring with a degree-13
//! Padé approximant (Higham 2005).

use faer::linalg::solvers::Solve;
use faer::{c64, Mat, MatRef};

const THETA_13: f64 = 5.371920351148152;

// b_k / b_0 for the [13/13] approximant
const B: [f64; 14] = [
    1.0,
    0.5,
    0.12,
    1.833_333_333_333_333_3e-2,
    1.992_753_623_188_405_7e-3,
    1.630_434_782_608_695_8e-4,
    1.035_196_687_370_600_3e-5,
    5.175_983_436_853_002e-7,
    2.043_151_356_652_500_8e-8,
    6.306_022_705_717_595e-10,
    1.483_770_048_404_14e-11,
    2.529_153_491_597_966e-13,
    2.810_170_546_219_962_3e-15,
    1.544_049_750_670_308_8e-17,
];

fn norm_one(a: MatRef<'_, c64>) -> f64 {
    (0..a.ncols())
        .map(|j| (0..a.nrows()).map(|i| a[(i, j)].norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

fn lincomb(terms: &[(f64, &Mat<c64>)], n: usize) -> Mat<c64> {
    Mat::from_fn(n, n, |i, j| terms.iter().map(|(s, m)| m[(i, j)] * *s).sum())
}

pub fn expm(a: MatRef<'_, c64>) -> Mat<c64> {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "expm needs a square matrix");
    if n == 0 {
        return Mat::zeros(0, 0);
    }
    let norm = norm_one(a);
    let s = if norm > THETA_13 { (norm / THETA_13).log2().ceil() as i32 } else { 0 };
    let scale = 0.5f64.powi(s);
    let a = Mat::from_fn(n, n, |i, j| a[(i, j)] * scale);

    let id = Mat::<c64>::identity(n, n);
    let a2 = &a * &a;
    let a4 = &a2 * &a2;
    let a6 = &a2 * &a4;

    let w1 = lincomb(&[(B[13], &a6), (B[11], &a4), (B[9], &a2)], n);
    let w = &(&a6 * &w1) + &lincomb(&[(B[7], &a6), (B[5], &a4), (B[3], &a2), (B[1], &id)], n);
    let u = &a * &w;
    let z1 = lincomb(&[(B[12], &a6), (B[10], &a4), (B[8], &a2)], n);
    let v = &(&a6 * &z1) + &lincomb(&[(B[6], &a6), (B[4], &a4), (B[2], &a2), (B[0], &id)], n);

    let p = &v + &u;
    let q = &v - &u;
    let mut r = q.partial_piv_lu().solve(&p);
    for _ in 0..s {
        r = &r * &r;
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagonal_exponential() {
        let d = [c64::new(-1.0, 2.0), c64::new(0.5, 0.0), c64::new(-30.0, -7.0)];
        let a = Mat::from_fn(3, 3, |i, j| if i == j { d[i] } else { c64::new(0.0, 0.0) });
        let e = expm(a.as_ref());
        for i in 0..3 {
            assert!((e[(i, i)] - d[i].exp()).norm() <= 1e-13 * d[i].exp().norm().max(1e-300));
        }
    }

    #[test]
    fn nilpotent_exponential() {
        let mut a = Mat::<c64>::zeros(3, 3);
        a[(0, 1)] = c64::new(2.0, 0.0);
        a[(1, 2)] = c64::new(3.0, 0.0);
        let e = expm(a.as_ref());
        assert!((e[(0, 2)].re - 3.0).abs() < 1e-13);
        assert!((e[(0, 1)].re - 2.0).abs() < 1e-13);
        assert!((e[(0, 0)].re - 1.0).abs() < 1e-13);
    }

    #[test]
    fn rotation_with_large_norm() {
        let w = 40.0;
        let mut a = Mat::<c64>::zeros(2, 2);
        a[(0, 1)] = c64::new(-w, 0.0);
        a[(1, 0)] = c64::new(w, 0.0);
        let e = expm(a.as_ref());
        assert!((e[(0, 0)].re - w.cos()).abs() < 1e-12);
        assert!((e[(1, 0)].re - w.sin()).abs() < 1e-12);
    }
}
