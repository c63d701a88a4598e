//! Seeded generators for randomized checks: skew forms, subspaces, linear
//! symplectomorphisms.

use rand::Rng;

use crate::linalg::{inverse, singular_values, Matrix, Subspace, ToleranceConfig};

/// Smallest accepted ratio σ_min/σ_max for generated nonsingular matrices.
const MIN_CONDITION_RATIO: f64 = 1e-3;

pub fn uniform<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.gen_range(-1.0..1.0))
}

fn well_conditioned(m: &Matrix) -> bool {
    let sv = singular_values(m);
    match (sv.first(), sv.last()) {
        (Some(&max), Some(&min)) => max > 0.0 && min / max > MIN_CONDITION_RATIO,
        _ => true,
    }
}

/// Random invertible matrix with bounded condition number.
pub fn invertible<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> Matrix {
    loop {
        let m = uniform(rng, dim, dim);
        if well_conditioned(&m) {
            return m;
        }
    }
}

/// Random nonsingular skew-symmetric matrix of even size.
pub fn nonsingular_skew<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> Matrix {
    assert!(dim.is_multiple_of(2), "skew matrices of odd size are singular");
    loop {
        let x = uniform(rng, dim, dim);
        let s = &x - x.transpose();
        if well_conditioned(&s) {
            return s;
        }
    }
}

pub fn symmetric<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> Matrix {
    let x = uniform(rng, dim, dim);
    (&x + x.transpose()) * 0.5
}

/// `exp(μ⁻¹ S)` for a random symmetric `S`; preserves `μ` up to exponential roundoff.
pub fn symplectic<R: Rng + ?Sized>(rng: &mut R, mu: &Matrix, scale: f64) -> Matrix {
    let dim = mu.nrows();
    let mu_inv = inverse(mu).expect("form must be nonsingular");
    let hamiltonian = mu_inv * symmetric(rng, dim);
    let norm = hamiltonian.norm().max(f64::MIN_POSITIVE);
    (hamiltonian * (scale / norm)).exp()
}

/// Random `d`-dimensional subspace of `ℝ^ambient` with an orthonormal basis.
pub fn subspace<R: Rng + ?Sized>(rng: &mut R, ambient: usize, d: usize) -> Subspace {
    let tol = ToleranceConfig::default();
    loop {
        let b = uniform(rng, ambient, d);
        if well_conditioned(&b) {
            return Subspace::span(&b, &tol);
        }
    }
}
