//! Top exterior powers of 2-forms through Pfaffians.

use nalgebra::DMatrix;
use num_complex::Complex64;

/// Pfaffian of an antisymmetric matrix by skew Gaussian elimination with
/// partial pivoting.
pub fn pfaffian(m: &DMatrix<Complex64>) -> Complex64 {
    let n = m.nrows();
    assert_eq!(n, m.ncols(), "square matrix");
    if n % 2 == 1 {
        return Complex64::new(0.0, 0.0);
    }
    let mut a = m.clone();
    let mut pf = Complex64::new(1.0, 0.0);
    for k in (0..n).step_by(2) {
        let kp = (k + 1..n)
            .max_by(|&i, &j| a[(k, i)].norm().total_cmp(&a[(k, j)].norm()))
            .expect("k + 1 < n");
        if kp != k + 1 {
            a.swap_rows(k + 1, kp);
            a.swap_columns(k + 1, kp);
            pf = -pf;
        }
        let piv = a[(k, k + 1)];
        if piv.norm() == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        pf *= piv;
        if k + 2 < n {
            let tau: Vec<Complex64> = (k + 2..n).map(|j| a[(k, j)] / piv).collect();
            let col: Vec<Complex64> = (k + 2..n).map(|i| a[(i, k + 1)]).collect();
            for (ii, i) in (k + 2..n).enumerate() {
                for (jj, j) in (k + 2..n).enumerate() {
                    a[(i, j)] += tau[ii] * col[jj] - col[ii] * tau[jj];
                }
            }
        }
    }
    pf
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// Coefficient of `ω^m` on `e^1 ∧ … ∧ e^{2m}` for the 2-form with matrix
/// `w[(a, b)] = ω(e_a, e_b)`.
pub fn top_power(w: &DMatrix<Complex64>) -> Complex64 {
    factorial(w.nrows() / 2) * pfaffian(w)
}

/// Coefficient of `α^k ∧ β^k` on the volume element, `4k` being the
/// dimension. Extracted as the `s^k` coefficient of `Pf(sα + β)` by a
/// discrete Fourier transform over roots of unity.
pub fn mixed_top_power(alpha: &DMatrix<Complex64>, beta: &DMatrix<Complex64>) -> Complex64 {
    let dim = alpha.nrows();
    assert!(dim % 4 == 0, "dimension must be a multiple of 4");
    let k = dim / 4;
    let nodes = 2 * k + 1;
    let mut coeff = Complex64::new(0.0, 0.0);
    for j in 0..nodes {
        let s = Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * j as f64 / nodes as f64);
        coeff += pfaffian(&(alpha * s + beta)) * s.powi(-(k as i32));
    }
    coeff /= nodes as f64;
    // (sα + β)^{2k} = (2k)! Pf(sα + β) and its s^k term is C(2k, k) α^k β^k
    factorial(k) * factorial(k) * coeff
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    fn skew(n: usize, upper: &[f64]) -> DMatrix<Complex64> {
        let mut m = DMatrix::zeros(n, n);
        let mut it = upper.iter();
        for i in 0..n {
            for j in i + 1..n {
                let v = *it.next().unwrap();
                m[(i, j)] = c(v);
                m[(j, i)] = c(-v);
            }
        }
        m
    }

    #[test]
    fn four_by_four_closed_form() {
        let u = [1.5, -0.3, 2.0, 0.7, 1.1, -0.9];
        let m = skew(4, &u);
        // a12 a34 - a13 a24 + a14 a23
        let exact = u[0] * u[5] - u[1] * u[4] + u[2] * u[3];
        assert!((pfaffian(&m) - c(exact)).norm() < 1e-14);
    }

    #[test]
    fn square_is_the_determinant() {
        let upper: Vec<f64> = (0..15).map(|k| ((k * 7 % 11) as f64 - 5.0) / 3.0).collect();
        let m = skew(6, &upper);
        let pf = pfaffian(&m);
        let det = m.map(|z| z.re).determinant();
        assert!((pf * pf - c(det)).norm() < 1e-12 * det.abs());
    }

    #[test]
    fn odd_and_degenerate_forms_vanish() {
        assert_eq!(pfaffian(&skew(3, &[1.0, 2.0, 3.0])), c(0.0));
        assert_eq!(pfaffian(&skew(4, &[1.0, 0.0, 0.0, 0.0, 0.0, 0.0])), c(0.0));
    }

    #[test]
    fn mixed_power_of_a_form_with_itself() {
        let upper: Vec<f64> = (0..28).map(|k| ((k * 5 % 13) as f64 - 6.0) / 4.0).collect();
        let w = skew(8, &upper);
        // α^2 ∧ α^2 = α^4
        assert!((mixed_top_power(&w, &w) - top_power(&w)).norm() < 1e-12 * top_power(&w).norm());
    }
}
