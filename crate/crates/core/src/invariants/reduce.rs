use crate::error::{Error, Result};
use crate::germ::Dims;
use crate::linalg::{
    hstack, intersect, inverse, null_space, numerical_rank, restricted_gram, skew_complement, sum, Matrix,
    Subspace, ToleranceConfig,
};

use super::linear::LinearTuple;

/// `(W, σ, U₁ ∪ U₂)`. `sigma` and the `Uᵢ` are expressed in coordinates of an
/// orthonormal basis of `W`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedLinearization {
    w: Subspace,
    sigma: Matrix,
    u1: Subspace,
    u2: Subspace,
    s: usize,
}

/// Kernel of `ω` restricted to `t`, as a subspace of the ambient space.
pub fn restricted_kernel(t: &Subspace, mu: &Matrix, tol: &ToleranceConfig) -> Subspace {
    let t = t.orthonormalized(tol);
    let g = restricted_gram(mu, &t);
    let k = null_space(&g, tol);
    Subspace::span(&(t.basis() * k), tol)
}

/// Rank of `ω` restricted to `t`.
pub fn restricted_rank(t: &Subspace, mu: &Matrix, tol: &ToleranceConfig) -> usize {
    let t = t.orthonormalized(tol);
    numerical_rank(&restricted_gram(mu, &t), tol)
}

/// The subspace `W` selected by the case table for `dims`.
pub fn reduced_space(lt: &LinearTuple, dims: Dims, tol: &ToleranceConfig) -> Result<Subspace> {
    let n = lt.ambient_dim() / 2;
    let mu = lt.mu();
    let (t1, t2) = (lt.u1(), lt.u2());
    let high = dims.is_high(n);
    let mut w = if dims.is_equal() {
        if high {
            skew_complement(&intersect(t1, t2, tol), mu, tol)?
        } else {
            sum(t1, t2, tol)
        }
    } else {
        let t1_plus_t2_perp = sum(t1, &skew_complement(t2, mu, tol)?, tol);
        let base = if high {
            skew_complement(&intersect(t1, t2, tol), mu, tol)?
        } else {
            sum(t1, t2, tol)
        };
        intersect(&base, &t1_plus_t2_perp, tol)
    };
    if dims.is_odd() {
        let l1 = restricted_kernel(t1, mu, tol);
        let l2 = restricted_kernel(t2, mu, tol);
        w = intersect(&w, &skew_complement(&sum(&l1, &l2, tol), mu, tol)?, tol);
    }
    Ok(w.orthonormalized(tol))
}

fn violation(what: &str, measured: usize, expected: usize) -> Error {
    Error::GenericityViolation(format!("{what}: measured {measured}, expected {expected}"))
}

/// Builds the reduced linearization and certifies properties (a)-(d):
/// `dim W = 4s`, `σ` nonsingular, `U₁`, `U₂` transversal symplectic of dimension
/// `2s`, and `U₁^σ` transversal to `U₂`.
pub fn reduce(lt: &LinearTuple, dims: Dims, tol: &ToleranceConfig) -> Result<ReducedLinearization> {
    let n = lt.ambient_dim() / 2;
    if !lt.ambient_dim().is_multiple_of(2) {
        return Err(Error::DimensionMismatch("ambient dimension is odd".into()));
    }
    dims.validate(n)?;
    for i in 0..2 {
        if lt.subspace(i).dim() != dims.stratum(i) {
            return Err(Error::DimensionMismatch(format!(
                "tangent space {} has dimension {}, expected {}",
                i + 1,
                lt.subspace(i).dim(),
                dims.stratum(i)
            )));
        }
    }
    let s = dims.s(n);
    let w = reduced_space(lt, dims, tol)?;
    if w.dim() != 4 * s {
        return Err(violation("(a) dim W", w.dim(), 4 * s));
    }
    let wb = w.basis();
    let sigma = restricted_gram(lt.mu(), &w);
    let to_w = |t: &Subspace| -> Subspace {
        let inside = intersect(t, &w, tol);
        Subspace::span(&(wb.transpose() * inside.basis()), tol)
    };
    let u1 = to_w(lt.u1());
    let u2 = to_w(lt.u2());
    ReducedLinearization::certified(w, sigma, u1, u2, s, tol)
}

impl ReducedLinearization {
    fn certified(
        w: Subspace,
        sigma: Matrix,
        u1: Subspace,
        u2: Subspace,
        s: usize,
        tol: &ToleranceConfig,
    ) -> Result<Self> {
        let rank = numerical_rank(&sigma, tol);
        if rank != 4 * s {
            return Err(violation("(b) rank of sigma", rank, 4 * s));
        }
        for (i, u) in [&u1, &u2].into_iter().enumerate() {
            if u.dim() != 2 * s {
                return Err(violation(&format!("(c) dim U{}", i + 1), u.dim(), 2 * s));
            }
            let r = numerical_rank(&restricted_gram(&sigma, u), tol);
            if r != 2 * s {
                return Err(violation(&format!("(c) rank of sigma on U{}", i + 1), r, 2 * s));
            }
        }
        let r = numerical_rank(&hstack(&[u1.basis(), u2.basis()]), tol);
        if r != 4 * s {
            return Err(violation("(c) dim (U1 + U2)", r, 4 * s));
        }
        if s > 0 {
            let u1_perp = skew_complement(&u1, &sigma, tol)?;
            let r = numerical_rank(&hstack(&[u1_perp.basis(), u2.basis()]), tol);
            if r != 4 * s {
                return Err(violation("(d) dim (U1^sigma + U2)", r, 4 * s));
            }
        }
        Ok(ReducedLinearization { w, sigma, u1, u2, s })
    }

    /// The tuple in the coordinate form `σ = −Σ A dx∧dx + Σ B⁻¹ dy∧dy + Σ C dx∧dy`
    /// on `ℝ^{4s}` with `U₁ = span(∂x)` and `U₂ = span(∂y)`.
    pub fn from_abc(a: &Matrix, b: &Matrix, c: &Matrix, tol: &ToleranceConfig) -> Result<Self> {
        let m = a.nrows();
        if !m.is_multiple_of(2) || [a, b, c].iter().any(|x| x.shape() != (m, m)) {
            return Err(Error::DimensionMismatch("A, B, C must be square of equal even size".into()));
        }
        let b_inv = inverse(b).ok_or_else(|| Error::Validation("B is singular".into()))?;
        let mut sigma = Matrix::zeros(2 * m, 2 * m);
        sigma.view_mut((0, 0), (m, m)).copy_from(&(a * -2.0));
        sigma.view_mut((m, m), (m, m)).copy_from(&(b_inv * 2.0));
        sigma.view_mut((0, m), (m, m)).copy_from(c);
        sigma.view_mut((m, 0), (m, m)).copy_from(&(-c.transpose()));
        let sigma = crate::linalg::antisymmetrize(&sigma);
        let axes = |range: std::ops::Range<usize>| Subspace::axes(2 * m, &range.collect::<Vec<_>>());
        ReducedLinearization::certified(
            Subspace::whole(2 * m),
            sigma,
            axes(0..m),
            axes(m..2 * m),
            m / 2,
            tol,
        )
    }

    /// `W` as a subspace of the ambient space, with the orthonormal basis that
    /// defines the coordinates of `sigma`, `u1` and `u2`.
    pub fn w(&self) -> &Subspace {
        &self.w
    }

    pub fn sigma(&self) -> &Matrix {
        &self.sigma
    }

    pub fn u1(&self) -> &Subspace {
        &self.u1
    }

    pub fn u2(&self) -> &Subspace {
        &self.u2
    }

    pub fn s(&self) -> usize {
        self.s
    }
}
