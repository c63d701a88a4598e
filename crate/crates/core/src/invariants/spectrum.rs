use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{
    antisymmetrize, bottleneck_distance, collapse_pairs, distinct_count, eigen_multiset, hstack, inverse,
    numerical_rank, skew_complement, solve, Matrix, Subspace, ToleranceConfig,
};

use super::reduce::ReducedLinearization;

/// Coordinates in the basis of `u` of the projection of each column of `v`
/// onto `u` along `k`, where `W = U ⊕ K`.
fn project_along(u: &Subspace, k: &Subspace, v: &Matrix, which: usize, tol: &ToleranceConfig) -> Result<Matrix> {
    let split = hstack(&[u.basis(), k.basis()]);
    let dim = split.nrows();
    let rank = numerical_rank(&split, tol);
    if split.ncols() != dim || rank != dim {
        return Err(Error::DegenerateSplitting(format!(
            "U{which} + U{which}^sigma has rank {rank}, expected {dim}"
        )));
    }
    let coeffs = solve(&split, v)
        .ok_or_else(|| Error::DegenerateSplitting(format!("U{which} + U{which}^sigma is singular")))?;
    Ok(coeffs.rows(0, u.dim()).into_owned())
}

/// `T₁ = π₁ ∘ π₂|U₁` and `T₂ = π₂ ∘ π₁|U₂` in the stored bases of `U₁`, `U₂`.
pub fn transfer_operators(rl: &ReducedLinearization, tol: &ToleranceConfig) -> Result<(Matrix, Matrix)> {
    if rl.s() == 0 {
        return Ok((Matrix::zeros(0, 0), Matrix::zeros(0, 0)));
    }
    let sigma = rl.sigma();
    let (u1, u2) = (rl.u1(), rl.u2());
    let k1 = skew_complement(u1, sigma, tol)?;
    let k2 = skew_complement(u2, sigma, tol)?;
    // p21: π₂ restricted to U₁, from U₁-coordinates to U₂-coordinates.
    let p21 = project_along(u2, &k2, u1.basis(), 2, tol)?;
    let p12 = project_along(u1, &k1, u2.basis(), 1, tol)?;
    Ok((&p12 * &p21, &p21 * &p12))
}

/// The blocks of `σ` on `U₁ ⊕ U₂`: `A = −½ σ|U₁`, `B = (½ σ|U₂)⁻¹`, `C = σ(U₁, U₂)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Abc {
    pub a: Matrix,
    pub b: Matrix,
    pub c: Matrix,
}

pub fn extract_abc(rl: &ReducedLinearization, tol: &ToleranceConfig) -> Result<Abc> {
    let sigma = rl.sigma();
    let (b1, b2) = (rl.u1().basis(), rl.u2().basis());
    let g11 = antisymmetrize(&(b1.transpose() * sigma * b1));
    let g22 = antisymmetrize(&(b2.transpose() * sigma * b2));
    let c = b1.transpose() * sigma * b2;
    let a = g11 * -0.5;
    let b = inverse(&(g22 * 0.5))
        .map(|m| antisymmetrize(&m))
        .ok_or_else(|| Error::GenericityViolation("sigma restricted to U2 is singular".into()))?;
    if numerical_rank(&c, tol) != c.nrows() {
        return Err(Error::SingularC {
            det: c.clone().determinant(),
        });
    }
    Ok(Abc { a, b, c })
}

impl Abc {
    /// Rebases `U₁` by `Q = C⁻ᵀ` so that the cross block becomes the identity.
    pub fn c_normalized(&self) -> Result<Abc> {
        let q = inverse(&self.c.transpose()).ok_or(Error::SingularC {
            det: self.c.clone().determinant(),
        })?;
        let m = self.a.nrows();
        Ok(Abc {
            a: antisymmetrize(&(q.transpose() * &self.a * &q)),
            b: self.b.clone(),
            c: Matrix::identity(m, m),
        })
    }

    /// `¼ A⁻¹ B`, the matrix of `T₁` once `C = I`.
    pub fn operator(&self) -> Result<Matrix> {
        let a_inv = inverse(&self.a).ok_or_else(|| Error::GenericityViolation("A is singular".into()))?;
        Ok(a_inv * &self.b * 0.25)
    }
}

/// Eigenvalues of `T₁`, computed twice and cross-checked.
#[derive(Debug, Clone, PartialEq)]
pub struct CharNumbers {
    /// `2s` eigenvalues of `T₁` from the transfer operators.
    pub raw: Vec<Complex64>,
    /// `2s` eigenvalues of `¼ A′⁻¹ B` after C-normalization.
    pub raw_formula: Vec<Complex64>,
    /// `s` values, one per multiplicity-2 pair.
    pub collapsed: Vec<Complex64>,
    pub distinct_count: usize,
    /// Bottleneck distance between `raw` and `raw_formula`.
    pub route_residual: f64,
}

impl CharNumbers {
    pub fn s(&self) -> usize {
        self.collapsed.len()
    }
}

pub fn characteristic_numbers(rl: &ReducedLinearization, tol: &ToleranceConfig) -> Result<CharNumbers> {
    let (t1, _) = transfer_operators(rl, tol)?;
    let raw = eigen_multiset(&t1, tol)?;
    let abc = extract_abc(rl, tol)?;
    let raw_formula = if rl.s() == 0 {
        Vec::new()
    } else {
        eigen_multiset(&abc.c_normalized()?.operator()?, tol)?
    };
    let route_residual = bottleneck_distance(&raw, &raw_formula).unwrap_or(f64::INFINITY);
    if route_residual > tol.eig_pair_tol {
        return Err(Error::RouteMismatch {
            residual: route_residual,
        });
    }
    let collapsed = collapse_pairs(&raw, tol)?;
    let distinct_count = distinct_count(&collapsed, tol);
    Ok(CharNumbers {
        raw,
        raw_formula,
        collapsed,
        distinct_count,
        route_residual,
    })
}
