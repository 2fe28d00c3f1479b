//! Small dense complex linear-algebra helpers.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

/// Eigenvalues of a Hermitian matrix, ascending.
pub fn hermitian_eigenvalues(m: &DMatrix<Complex64>) -> Vec<f64> {
    if m.nrows() == 0 {
        return Vec::new();
    }
    let mut ev: Vec<f64> = m.clone().symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

pub fn min_eigenvalue(m: &DMatrix<Complex64>) -> f64 {
    hermitian_eigenvalues(m).first().copied().unwrap_or(0.0)
}

/// Largest entrywise deviation `|M - M^H|`.
pub fn hermitian_defect(m: &DMatrix<Complex64>) -> f64 {
    let mut worst = 0.0_f64;
    for i in 0..m.nrows() {
        for j in i..m.ncols() {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

pub fn trace_re(m: &DMatrix<Complex64>) -> f64 {
    m.diagonal().iter().map(|z| z.re).sum()
}

/// `v v^H`, built so the result is exactly Hermitian.
pub fn outer(v: &DVector<Complex64>) -> DMatrix<Complex64> {
    let n = v.len();
    DMatrix::from_fn(n, n, |i, j| v[i] * v[j].conj())
}

/// `h M h^H` for a row vector `h` stored as its entries.
pub fn row_quadratic_form(h: &DVector<Complex64>, m: &DMatrix<Complex64>) -> f64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for i in 0..h.len() {
        let mut row = Complex64::new(0.0, 0.0);
        for j in 0..h.len() {
            row += m[(i, j)] * h[j].conj();
        }
        acc += h[i] * row;
    }
    acc.re
}

/// `v^H M v` for a column vector `v`.
pub fn column_quadratic_form(v: &DVector<Complex64>, m: &DMatrix<Complex64>) -> f64 {
    row_quadratic_form(&v.map(|z| z.conj()), m)
}

pub fn norm_sqr(v: &DVector<Complex64>) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum()
}

/// Conjugate inner product `a^H b`.
pub fn inner(a: &DVector<Complex64>, b: &DVector<Complex64>) -> Complex64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn outer_is_exactly_hermitian() {
        let v = DVector::from_vec(vec![
            Complex64::new(0.3, -1.2),
            Complex64::new(-2.0, 0.7),
            Complex64::new(1e-3, 5.0),
        ]);
        let m = outer(&v);
        assert_eq!(hermitian_defect(&m), 0.0);
        let ev = hermitian_eigenvalues(&m);
        assert!((ev[2] - norm_sqr(&v)).abs() < 1e-12);
        assert!(ev[0].abs() < 1e-12 && ev[1].abs() < 1e-12);
    }

    #[test]
    fn quadratic_forms_agree() {
        let v = DVector::from_vec(vec![Complex64::new(1.0, 2.0), Complex64::new(-0.5, 0.25)]);
        let m = DMatrix::from_row_slice(
            2,
            2,
            &[
                Complex64::new(2.0, 0.0),
                Complex64::new(0.3, 0.4),
                Complex64::new(0.3, -0.4),
                Complex64::new(1.0, 0.0),
            ],
        );
        // v^H M v by hand
        let mv = &m * &v;
        let expected = inner(&v, &mv).re;
        assert!((column_quadratic_form(&v, &m) - expected).abs() < 1e-12);
    }
}
