use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{
    collapse_pairs, distinct_count, eigen_multiset, inverse, multiset_equal, rel_dist, Matrix, ToleranceConfig,
};

use super::reduce::ReducedLinearization;
use super::spectrum::extract_abc;

/// A congruence `R` with `Rᵀ A₁ R ≈ A₂` and `Rᵀ B₁ R ≈ B₂`.
#[derive(Debug, Clone, PartialEq)]
pub struct Witness {
    pub r: Matrix,
    /// `‖Rᵀ A₁ R − A₂‖_F / ‖A₂‖_F`.
    pub residual_a: f64,
    /// `‖Rᵀ B₁ R − B₂‖_F / ‖B₂‖_F`.
    pub residual_b: f64,
}

/// Right singular vectors for the `count` smallest singular values of a square matrix.
fn smallest_right_vectors(m: DMatrix<Complex64>, count: usize) -> DMatrix<Complex64> {
    let svd = m.svd(false, true);
    let v_t = svd.v_t.expect("right singular vectors requested");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| svd.singular_values[i].total_cmp(&svd.singular_values[j]));
    let mut out = DMatrix::zeros(v_t.ncols(), count);
    for (col, &i) in order.iter().take(count).enumerate() {
        for r in 0..v_t.ncols() {
            out[(r, col)] = v_t[(i, r)].conj();
        }
    }
    out
}

fn smallest_right_vectors_real(m: Matrix, count: usize) -> Matrix {
    let svd = m.svd(false, true);
    let v_t = svd.v_t.expect("right singular vectors requested");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| svd.singular_values[i].total_cmp(&svd.singular_values[j]));
    let mut out = Matrix::zeros(v_t.ncols(), count);
    for (col, &i) in order.iter().take(count).enumerate() {
        out.set_column(col, &v_t.row(i).transpose());
    }
    out
}

fn bilinear(x: &DVector<Complex64>, a: &DMatrix<Complex64>, y: &DVector<Complex64>) -> Complex64 {
    (x.transpose() * a * y)[(0, 0)]
}

/// Basis `P` in which `(A, B)` takes the block form fixed by `values`:
/// for real `λ` the blocks `(J, 4λJ)`, for `λ = a + bi` with `b > 0` the blocks
/// `(K, 4K·diag(R, Rᵀ))` with `K = [[0, I], [−I, 0]]`, `R = [[a, b], [−b, a]]`.
/// `values` lists one representative per real value or conjugate pair.
fn canonical_basis(a: &Matrix, b: &Matrix, values: &[Complex64]) -> Result<Matrix> {
    let m = a.nrows();
    let a_inv = inverse(a).ok_or_else(|| Error::Validation("A is singular".into()))?;
    let t = a_inv * b * 0.25;
    let tc = t.map(|x| Complex64::new(x, 0.0));
    let ac = a.map(|x| Complex64::new(x, 0.0));
    let mut p = Matrix::zeros(m, m);
    let mut col = 0;
    for &lambda in values {
        let width = if lambda.im == 0.0 { 2 } else { 4 };
        if col + width > m {
            return Err(Error::DimensionMismatch("too many eigenvalues for the pencil".into()));
        }
        if lambda.im == 0.0 {
            let e = smallest_right_vectors_real(&t - Matrix::identity(m, m) * lambda.re, 2);
            let pairing = (e.column(0).transpose() * a * e.column(1))[(0, 0)];
            if pairing == 0.0 {
                return Err(Error::DegenerateSpectrum {
                    distinct: 0,
                    expected: values.len(),
                });
            }
            p.set_column(col, &e.column(0));
            p.set_column(col + 1, &(e.column(1) / pairing));
        } else {
            let e = smallest_right_vectors(&tc - DMatrix::<Complex64>::identity(m, m) * lambda, 2);
            let e1 = e.column(0).into_owned();
            let e2 = e.column(1).into_owned();
            let pairing = bilinear(&e1, &ac, &e2);
            if pairing.norm() == 0.0 {
                return Err(Error::DegenerateSpectrum {
                    distinct: 0,
                    expected: values.len(),
                });
            }
            let e2 = e2 / pairing;
            let k = std::f64::consts::SQRT_2;
            for r in 0..m {
                p[(r, col)] = k * e1[r].re;
                p[(r, col + 1)] = k * e1[r].im;
                p[(r, col + 2)] = k * e2[r].re;
                p[(r, col + 3)] = -k * e2[r].im;
            }
        }
        col += width;
    }
    if col != m {
        return Err(Error::DimensionMismatch(format!("eigenvalues fill {col} of {m} dimensions")));
    }
    Ok(p)
}

/// Representatives (real values and the upper half-plane) of a collapsed multiset.
fn representatives(collapsed: &[Complex64]) -> Vec<Complex64> {
    collapsed.iter().copied().filter(|z| z.im >= 0.0).collect()
}

fn relative_residual(r: &Matrix, x1: &Matrix, x2: &Matrix) -> f64 {
    let diff = r.transpose() * x1 * r - x2;
    diff.norm() / x2.norm().max(f64::MIN_POSITIVE)
}

/// Congruence between two pairs of nonsingular skew matrices whose pencils have
/// `s` distinct eigenvalues. `None` when the spectra of `¼A⁻¹B` differ.
pub fn congruence_witness(
    a1: &Matrix,
    b1: &Matrix,
    a2: &Matrix,
    b2: &Matrix,
    tol: &ToleranceConfig,
) -> Result<Option<Witness>> {
    let m = a1.nrows();
    if !m.is_multiple_of(2) || [a1, b1, a2, b2].iter().any(|x| x.shape() != (m, m)) {
        return Err(Error::DimensionMismatch("pencils must be square of equal even size".into()));
    }
    let s = m / 2;
    let spectrum = |a: &Matrix, b: &Matrix| -> Result<Vec<Complex64>> {
        let a_inv = inverse(a).ok_or_else(|| Error::Validation("A is singular".into()))?;
        collapse_pairs(&eigen_multiset(&(a_inv * b * 0.25), tol)?, tol)
    };
    let c1 = spectrum(a1, b1)?;
    let c2 = spectrum(a2, b2)?;
    for c in [&c1, &c2] {
        let distinct = distinct_count(c, tol);
        if distinct < s {
            return Err(Error::DegenerateSpectrum { distinct, expected: s });
        }
    }
    if !multiset_equal(&c1, &c2, tol) {
        return Ok(None);
    }
    let reps1 = representatives(&c1);
    let mut reps2 = representatives(&c2);
    let mut ordered2 = Vec::with_capacity(reps1.len());
    for z in &reps1 {
        let (j, _) = reps2
            .iter()
            .enumerate()
            .map(|(j, w)| (j, rel_dist(*z, *w)))
            .min_by(|x, y| x.1.total_cmp(&y.1))
            .ok_or_else(|| Error::DimensionMismatch("spectra have different sizes".into()))?;
        ordered2.push(reps2.remove(j));
    }
    let p1 = canonical_basis(a1, b1, &reps1)?;
    let p2 = canonical_basis(a2, b2, &ordered2)?;
    let p2_inv = inverse(&p2).ok_or_else(|| Error::NoConvergence("canonical basis is singular".into()))?;
    let r = p1 * p2_inv;
    Ok(Some(Witness {
        residual_a: relative_residual(&r, a1, a2),
        residual_b: relative_residual(&r, b1, b2),
        r,
    }))
}

/// Congruence between the C-normalized `(A, B)` blocks of two reduced linearizations.
pub fn linear_equivalence_witness(
    rl1: &ReducedLinearization,
    rl2: &ReducedLinearization,
    tol: &ToleranceConfig,
) -> Result<Option<Witness>> {
    if rl1.s() != rl2.s() {
        return Ok(None);
    }
    let n1 = extract_abc(rl1, tol)?.c_normalized()?;
    let n2 = extract_abc(rl2, tol)?.c_normalized()?;
    congruence_witness(&n1.a, &n1.b, &n2.a, &n2.b, tol)
}
