//! Dense linear algebra over explicit bases with tolerance-controlled rank decisions.
//!
//! Every geometric predicate in the crate (transversality, kernel dimension,
//! nondegeneracy of a restricted form) goes through [`numerical_rank`], so the
//! single knob [`ToleranceConfig::rank_tol`] governs all of them.

use std::cmp::Ordering;

use nalgebra::{DMatrix, Schur};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Matrix = DMatrix<f64>;

/// Numeric thresholds shared by every decision in the pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ToleranceConfig {
    /// Relative singular-value threshold for rank decisions.
    pub rank_tol: f64,
    /// Relative radius used when pairing eigenvalues and comparing multisets.
    pub eig_pair_tol: f64,
    /// Relative clustering radius for counting distinct eigenvalues.
    pub eig_distinct_tol: f64,
}

impl Default for ToleranceConfig {
    fn default() -> Self {
        ToleranceConfig {
            rank_tol: 1e-9,
            eig_pair_tol: 1e-6,
            eig_distinct_tol: 1e-6,
        }
    }
}

impl ToleranceConfig {
    pub fn new(rank_tol: f64, eig_pair_tol: f64, eig_distinct_tol: f64) -> Result<Self> {
        let ok = |x: f64| x.is_finite() && x > 0.0;
        if !ok(rank_tol) || !ok(eig_pair_tol) || !ok(eig_distinct_tol) {
            return Err(Error::Validation(
                "tolerances must be finite and strictly positive".into(),
            ));
        }
        if rank_tol >= 1.0 {
            return Err(Error::Validation("rank_tol must be < 1".into()));
        }
        Ok(ToleranceConfig {
            rank_tol,
            eig_pair_tol,
            eig_distinct_tol,
        })
    }

    pub fn with_rank_tol(self, rank_tol: f64) -> Result<Self> {
        ToleranceConfig::new(rank_tol, self.eig_pair_tol, self.eig_distinct_tol)
    }
}

/// Singular values sorted in decreasing order.
pub fn singular_values(m: &Matrix) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    let mut sv: Vec<f64> = m.clone().svd(false, false).singular_values.iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    sv
}

/// Number of singular values above `rank_tol` times the largest one.
pub fn numerical_rank(m: &Matrix, tol: &ToleranceConfig) -> usize {
    let sv = singular_values(m);
    let Some(&max) = sv.first() else { return 0 };
    if max == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > tol.rank_tol * max).count()
}

/// Orthonormal basis (as columns) of the kernel of `m`.
pub fn null_space(m: &Matrix, tol: &ToleranceConfig) -> Matrix {
    let (r, c) = m.shape();
    if c == 0 {
        return Matrix::zeros(0, 0);
    }
    if r == 0 {
        return Matrix::identity(c, c);
    }
    // Pad with zero rows so that the SVD returns a full right factor.
    let padded = if r < c {
        let mut p = Matrix::zeros(c, c);
        p.view_mut((0, 0), (r, c)).copy_from(m);
        p
    } else {
        m.clone()
    };
    let svd = padded.svd(false, true);
    let v_t = svd.v_t.expect("right singular vectors requested");
    let max = svd.singular_values.iter().copied().fold(0.0, f64::max);
    let threshold = tol.rank_tol * max;
    let mut null_rows: Vec<usize> = svd
        .singular_values
        .iter()
        .enumerate()
        .filter(|(_, &s)| max == 0.0 || s <= threshold)
        .map(|(i, _)| i)
        .collect();
    null_rows.sort_unstable();
    let mut out = Matrix::zeros(c, null_rows.len());
    for (j, &i) in null_rows.iter().enumerate() {
        out.set_column(j, &v_t.row(i).transpose());
    }
    out
}

/// Orthonormal basis (as columns) of the column span of `m`.
pub fn column_basis(m: &Matrix, tol: &ToleranceConfig) -> Matrix {
    let (r, c) = m.shape();
    if r == 0 || c == 0 {
        return Matrix::zeros(r, 0);
    }
    let svd = m.clone().svd(true, false);
    let u = svd.u.expect("left singular vectors requested");
    let max = svd.singular_values.iter().copied().fold(0.0, f64::max);
    if max == 0.0 {
        return Matrix::zeros(r, 0);
    }
    let mut keep: Vec<(usize, f64)> = svd
        .singular_values
        .iter()
        .copied()
        .enumerate()
        .filter(|&(_, s)| s > tol.rank_tol * max)
        .collect();
    keep.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let mut out = Matrix::zeros(r, keep.len());
    for (j, &(i, _)) in keep.iter().enumerate() {
        out.set_column(j, &u.column(i));
    }
    out
}

/// Horizontal concatenation of matrices with equal row counts.
pub fn hstack(parts: &[&Matrix]) -> Matrix {
    let rows = parts.first().map_or(0, |m| m.nrows());
    let cols: usize = parts.iter().map(|m| m.ncols()).sum();
    let mut out = Matrix::zeros(rows, cols);
    let mut at = 0;
    for m in parts {
        assert_eq!(m.nrows(), rows, "hstack: row count mismatch");
        out.view_mut((0, at), (rows, m.ncols())).copy_from(*m);
        at += m.ncols();
    }
    out
}

/// `(m - mᵀ) / 2`; exactly antisymmetric.
pub fn antisymmetrize(m: &Matrix) -> Matrix {
    let mut out = Matrix::zeros(m.nrows(), m.ncols());
    for i in 0..m.nrows() {
        for j in (i + 1)..m.ncols() {
            let v = 0.5 * (m[(i, j)] - m[(j, i)]);
            out[(i, j)] = v;
            out[(j, i)] = -v;
        }
    }
    out
}

pub fn solve(a: &Matrix, b: &Matrix) -> Option<Matrix> {
    if a.nrows() == 0 {
        return Some(Matrix::zeros(0, b.ncols()));
    }
    a.clone().lu().solve(b)
}

pub fn inverse(a: &Matrix) -> Option<Matrix> {
    if a.nrows() == 0 {
        return Some(Matrix::zeros(0, 0));
    }
    a.clone().try_inverse()
}

/// A linear subspace of `ℝ^ambient`, stored as a basis of columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Subspace {
    basis: Matrix,
}

impl Subspace {
    /// Wraps `basis`, rejecting it if its columns are dependent at working tolerance.
    pub fn new(basis: Matrix, tol: &ToleranceConfig) -> Result<Self> {
        if !basis.iter().all(|x| x.is_finite()) {
            return Err(Error::Validation("subspace basis has non-finite entries".into()));
        }
        let rank = numerical_rank(&basis, tol);
        if rank != basis.ncols() {
            return Err(Error::Validation(format!(
                "subspace basis has {} columns but rank {rank}",
                basis.ncols()
            )));
        }
        Ok(Subspace { basis })
    }

    /// Orthonormal basis of the span of the columns of `vectors`.
    pub fn span(vectors: &Matrix, tol: &ToleranceConfig) -> Self {
        Subspace {
            basis: column_basis(vectors, tol),
        }
    }

    pub fn zero(ambient_dim: usize) -> Self {
        Subspace {
            basis: Matrix::zeros(ambient_dim, 0),
        }
    }

    pub fn whole(ambient_dim: usize) -> Self {
        Subspace {
            basis: Matrix::identity(ambient_dim, ambient_dim),
        }
    }

    /// Span of the given coordinate axes.
    pub fn axes(ambient_dim: usize, axes: &[usize]) -> Self {
        let mut basis = Matrix::zeros(ambient_dim, axes.len());
        for (j, &i) in axes.iter().enumerate() {
            basis[(i, j)] = 1.0;
        }
        Subspace { basis }
    }

    pub fn ambient_dim(&self) -> usize {
        self.basis.nrows()
    }

    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    pub fn basis(&self) -> &Matrix {
        &self.basis
    }

    pub fn into_basis(self) -> Matrix {
        self.basis
    }

    pub fn orthonormalized(&self, tol: &ToleranceConfig) -> Subspace {
        Subspace::span(&self.basis, tol)
    }

    /// `other ⊆ self` to rank tolerance.
    pub fn contains(&self, other: &Subspace, tol: &ToleranceConfig) -> bool {
        if other.dim() == 0 {
            return true;
        }
        let a = column_basis(&self.basis, tol);
        let b = column_basis(&other.basis, tol);
        numerical_rank(&hstack(&[&a, &b]), tol) == a.ncols()
    }

    /// Mutual containment.
    pub fn same_span(&self, other: &Subspace, tol: &ToleranceConfig) -> bool {
        self.ambient_dim() == other.ambient_dim()
            && self.dim() == other.dim()
            && self.contains(other, tol)
    }

    /// Image of the subspace under a linear map.
    pub fn map(&self, l: &Matrix, tol: &ToleranceConfig) -> Subspace {
        Subspace::span(&(l * &self.basis), tol)
    }
}

/// `{v : ω(u, v) = 0 for all u ∈ U}`.
pub fn skew_complement(u: &Subspace, omega: &Matrix, tol: &ToleranceConfig) -> Result<Subspace> {
    let dim = u.ambient_dim();
    if omega.nrows() != dim || omega.ncols() != dim {
        return Err(Error::DimensionMismatch(format!(
            "form is {}x{}, subspace lives in dimension {dim}",
            omega.nrows(),
            omega.ncols()
        )));
    }
    let rank = numerical_rank(omega, tol);
    if rank != dim {
        return Err(Error::SingularForm { rank, dim });
    }
    if u.dim() == 0 {
        return Ok(Subspace::whole(dim));
    }
    let ub = column_basis(u.basis(), tol);
    let pairing = ub.transpose() * omega;
    Ok(Subspace {
        basis: null_space(&pairing, tol),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Combine {
    Sum,
    Intersect,
}

pub fn subspace_combine(op: Combine, u: &Subspace, v: &Subspace, tol: &ToleranceConfig) -> Subspace {
    assert_eq!(u.ambient_dim(), v.ambient_dim(), "subspaces live in different spaces");
    let ub = column_basis(u.basis(), tol);
    let vb = column_basis(v.basis(), tol);
    match op {
        Combine::Sum => Subspace::span(&hstack(&[&ub, &vb]), tol),
        Combine::Intersect => {
            if ub.ncols() == 0 || vb.ncols() == 0 {
                return Subspace::zero(u.ambient_dim());
            }
            let stacked = hstack(&[&ub, &(-&vb)]);
            let kernel = null_space(&stacked, tol);
            let coeffs = kernel.rows(0, ub.ncols()).into_owned();
            Subspace::span(&(&ub * coeffs), tol)
        }
    }
}

pub fn sum(u: &Subspace, v: &Subspace, tol: &ToleranceConfig) -> Subspace {
    subspace_combine(Combine::Sum, u, v, tol)
}

pub fn intersect(u: &Subspace, v: &Subspace, tol: &ToleranceConfig) -> Subspace {
    subspace_combine(Combine::Intersect, u, v, tol)
}

/// Gram matrix `G[i][j] = ω(bᵢ, bⱼ)` on the stored basis, antisymmetrized exactly.
pub fn restricted_gram(omega: &Matrix, u: &Subspace) -> Matrix {
    let b = u.basis();
    antisymmetrize(&(b.transpose() * omega * b))
}

/// `|a - b| / (1 + max(|a|, |b|))`.
pub fn rel_dist(a: Complex64, b: Complex64) -> f64 {
    (a - b).norm() / (1.0 + a.norm().max(b.norm()))
}

pub fn cmp_complex(a: &Complex64, b: &Complex64) -> Ordering {
    a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im))
}

/// All eigenvalues of a real square matrix, made exactly closed under conjugation.
pub fn eigen_multiset(m: &Matrix, tol: &ToleranceConfig) -> Result<Vec<Complex64>> {
    if m.nrows() != m.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "eigenvalues of a {}x{} matrix",
            m.nrows(),
            m.ncols()
        )));
    }
    if m.nrows() == 0 {
        return Ok(Vec::new());
    }
    if !m.iter().all(|x| x.is_finite()) {
        return Err(Error::NoConvergence("matrix has non-finite entries".into()));
    }
    let schur = Schur::try_new(m.clone(), f64::EPSILON, 100_000)
        .ok_or_else(|| Error::NoConvergence("Schur iteration limit reached".into()))?;
    let (_, t) = schur.unpack();
    let vals = quasi_triangular_eigenvalues(&t);
    if vals.iter().any(|z| !z.is_finite()) {
        return Err(Error::NoConvergence("non-finite eigenvalue".into()));
    }
    symmetrize_conjugates(&vals, tol)
}

/// Eigenvalues of a real Schur factor, one 1x1 or 2x2 diagonal block at a time.
/// Computed here because the 2x2 formula in nalgebra yields NaN when the
/// discriminant is a tiny negative number.
fn quasi_triangular_eigenvalues(t: &Matrix) -> Vec<Complex64> {
    let n = t.nrows();
    let mut out = Vec::with_capacity(n);
    let mut i = 0;
    while i < n {
        if i + 1 < n && t[(i + 1, i)] != 0.0 {
            let (a, b, c, d) = (t[(i, i)], t[(i, i + 1)], t[(i + 1, i)], t[(i + 1, i + 1)]);
            let mid = 0.5 * (a + d);
            let half = 0.5 * (a - d);
            let disc = half * half + b * c;
            if disc >= 0.0 {
                let r = disc.sqrt();
                out.push(Complex64::new(mid + r, 0.0));
                out.push(Complex64::new(mid - r, 0.0));
            } else {
                let r = (-disc).sqrt();
                out.push(Complex64::new(mid, r));
                out.push(Complex64::new(mid, -r));
            }
            i += 2;
        } else {
            out.push(Complex64::new(t[(i, i)], 0.0));
            i += 1;
        }
    }
    out
}

/// Pairs each non-real value with its nearest conjugate and replaces the pair by
/// `m = (λ + conj μ)/2` and `conj m`. Values whose imaginary part is within
/// `eig_pair_tol` of zero are taken as real.
pub fn symmetrize_conjugates(vals: &[Complex64], tol: &ToleranceConfig) -> Result<Vec<Complex64>> {
    let near_real = |z: &Complex64| z.im.abs() <= tol.eig_pair_tol * (1.0 + z.norm());
    let mut out: Vec<Complex64> = Vec::with_capacity(vals.len());
    let mut upper = Vec::new();
    let mut lower = Vec::new();
    for z in vals {
        if near_real(z) {
            out.push(Complex64::new(z.re, 0.0));
        } else if z.im > 0.0 {
            upper.push(*z);
        } else {
            lower.push(*z);
        }
    }
    if upper.len() != lower.len() {
        return Err(Error::NoConvergence(format!(
            "spectrum is not conjugate-closed ({} values above the real axis, {} below)",
            upper.len(),
            lower.len()
        )));
    }
    upper.sort_by(cmp_complex);
    let mut used = vec![false; lower.len()];
    for u in upper {
        let (j, d) = lower
            .iter()
            .enumerate()
            .filter(|(j, _)| !used[*j])
            .map(|(j, l)| (j, rel_dist(u, l.conj())))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .expect("counts checked above");
        if d > tol.eig_pair_tol {
            return Err(Error::NoConvergence(format!(
                "eigenvalue {u} has no conjugate partner (distance {d:.3e})"
            )));
        }
        used[j] = true;
        let m = (u + lower[j].conj()) * 0.5;
        out.push(m);
        out.push(m.conj());
    }
    out.sort_by(cmp_complex);
    Ok(out)
}

fn greedy_pairs(mut vals: Vec<Complex64>, tol: &ToleranceConfig) -> Result<Vec<Complex64>> {
    vals.sort_by(cmp_complex);
    let mut out = Vec::with_capacity(vals.len() / 2);
    let mut rest = vals;
    while !rest.is_empty() {
        let first = rest.remove(0);
        let Some((j, d)) = rest
            .iter()
            .enumerate()
            .map(|(j, z)| (j, rel_dist(first, *z)))
            .min_by(|a, b| a.1.total_cmp(&b.1))
        else {
            return Err(Error::UnpairedEigenvalue {
                value: first.to_string(),
            });
        };
        if d > tol.eig_pair_tol {
            return Err(Error::UnpairedEigenvalue {
                value: format!("{first} (nearest partner at relative distance {d:.3e})"),
            });
        }
        let partner = rest.remove(j);
        out.push((first + partner) * 0.5);
    }
    Ok(out)
}

/// Collapses a conjugate-closed multiset in which every value occurs twice into
/// one representative per pair. The result is exactly conjugate-closed.
pub fn collapse_pairs(raw: &[Complex64], tol: &ToleranceConfig) -> Result<Vec<Complex64>> {
    let reals: Vec<Complex64> = raw.iter().copied().filter(|z| z.im == 0.0).collect();
    let upper: Vec<Complex64> = raw.iter().copied().filter(|z| z.im > 0.0).collect();
    let lower = raw.iter().filter(|z| z.im < 0.0).count();
    if lower != upper.len() {
        return Err(Error::UnpairedEigenvalue {
            value: "multiset is not conjugate-closed".into(),
        });
    }
    let mut out = greedy_pairs(reals, tol)?;
    let up = greedy_pairs(upper, tol)?;
    out.extend(up.iter().copied());
    out.extend(up.iter().map(|z| z.conj()));
    out.sort_by(cmp_complex);
    Ok(out)
}

/// Number of clusters under single-linkage clustering with radius `eig_distinct_tol`.
pub fn distinct_count(vals: &[Complex64], tol: &ToleranceConfig) -> usize {
    let n = vals.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    for i in 0..n {
        for j in (i + 1)..n {
            if rel_dist(vals[i], vals[j]) <= tol.eig_distinct_tol {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                parent[a] = b;
            }
        }
    }
    (0..n).filter(|&i| find(&mut parent, i) == i).count()
}

fn has_perfect_matching(adj: &[Vec<bool>]) -> bool {
    let n = adj.len();
    let mut owner: Vec<Option<usize>> = vec![None; n];
    fn augment(i: usize, adj: &[Vec<bool>], seen: &mut [bool], owner: &mut [Option<usize>]) -> bool {
        for j in 0..adj.len() {
            if adj[i][j] && !seen[j] {
                seen[j] = true;
                if owner[j].is_none_or(|k| augment(k, adj, seen, owner)) {
                    owner[j] = Some(i);
                    return true;
                }
            }
        }
        false
    }
    (0..n).all(|i| {
        let mut seen = vec![false; n];
        augment(i, adj, &mut seen, &mut owner)
    })
}

/// Smallest `t` such that a perfect matching between `a` and `b` exists with
/// every matched pair at [`rel_dist`] at most `t`. `None` when sizes differ.
pub fn bottleneck_distance(a: &[Complex64], b: &[Complex64]) -> Option<f64> {
    if a.len() != b.len() {
        return None;
    }
    if a.is_empty() {
        return Some(0.0);
    }
    let d: Vec<Vec<f64>> = a.iter().map(|x| b.iter().map(|y| rel_dist(*x, *y)).collect()).collect();
    let mut candidates: Vec<f64> = d.iter().flatten().copied().collect();
    candidates.sort_by(f64::total_cmp);
    candidates.dedup();
    let feasible = |t: f64| {
        let adj: Vec<Vec<bool>> = d.iter().map(|row| row.iter().map(|&x| x <= t).collect()).collect();
        has_perfect_matching(&adj)
    };
    let (mut lo, mut hi) = (0, candidates.len() - 1);
    while lo < hi {
        let mid = (lo + hi) / 2;
        if feasible(candidates[mid]) {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    Some(candidates[lo])
}

/// True iff a perfect matching exists pairing values within `eig_pair_tol` (relative).
pub fn multiset_equal(a: &[Complex64], b: &[Complex64], tol: &ToleranceConfig) -> bool {
    bottleneck_distance(a, b).is_some_and(|d| d <= tol.eig_pair_tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn standard_omega(n: usize) -> Matrix {
        // coordinates (x1..xn, y1..yn)
        let mut m = Matrix::zeros(2 * n, 2 * n);
        for i in 0..n {
            m[(i, n + i)] = 1.0;
            m[(n + i, i)] = -1.0;
        }
        m
    }

    #[test]
    fn nearly_real_schur_block() {
        let t = Matrix::from_row_slice(3, 3, &[-0.1348, 5.032e-16, 1.0, -5.436e-16, -0.1348, 2.0, 0.0, 0.0, 3.0]);
        let vals = quasi_triangular_eigenvalues(&t);
        assert!(vals.iter().all(|z| z.is_finite()));
        let sym = symmetrize_conjugates(&vals, &ToleranceConfig::default()).unwrap();
        assert_eq!(sym, vec![c(-0.1348, 0.0), c(-0.1348, 0.0), c(3.0, 0.0)]);
        let rot = Matrix::from_row_slice(2, 2, &[1.0, 2.0, -2.0, 1.0]);
        assert_eq!(quasi_triangular_eigenvalues(&rot), vec![c(1.0, 2.0), c(1.0, -2.0)]);
    }

    #[test]
    fn rank_examples() {
        let tol = ToleranceConfig::default();
        assert_eq!(numerical_rank(&Matrix::identity(2, 2), &tol), 2);
        assert_eq!(numerical_rank(&Matrix::zeros(2, 2), &tol), 0);
        // σ₂ of [[1,1],[1,1+ε]] is ≈ ε/2 while σ₁ ≈ 2.
        let m = Matrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0 + 1e-15]);
        assert_eq!(numerical_rank(&m, &tol), 1);
        assert_eq!(numerical_rank(&Matrix::zeros(0, 3), &tol), 0);
    }

    #[test]
    fn skew_complement_examples() {
        let tol = ToleranceConfig::default();
        let omega = standard_omega(2); // order x1 x2 y1 y2
        let u = Subspace::axes(4, &[0]);
        let c = skew_complement(&u, &omega, &tol).unwrap();
        assert!(c.same_span(&Subspace::axes(4, &[0, 1, 3]), &tol));

        let whole = Subspace::whole(4);
        assert_eq!(skew_complement(&whole, &omega, &tol).unwrap().dim(), 0);

        let lag = Subspace::axes(4, &[0, 1]);
        assert!(skew_complement(&lag, &omega, &tol).unwrap().same_span(&lag, &tol));

        let mut singular = omega.clone();
        singular[(1, 3)] = 0.0;
        singular[(3, 1)] = 0.0;
        assert!(matches!(
            skew_complement(&lag, &singular, &tol),
            Err(Error::SingularForm { rank: 2, dim: 4 })
        ));
    }

    #[test]
    fn combine_examples() {
        let tol = ToleranceConfig::default();
        let x1 = Subspace::axes(4, &[0]);
        let y1 = Subspace::axes(4, &[2]);
        assert_eq!(sum(&x1, &y1, &tol).dim(), 2);
        let a = Subspace::axes(4, &[0, 1]);
        let b = Subspace::axes(4, &[1, 2]);
        assert!(intersect(&a, &b, &tol).same_span(&Subspace::axes(4, &[1]), &tol));
        assert!(intersect(&a, &a, &tol).same_span(&a, &tol));
    }

    #[test]
    fn gram_examples() {
        let omega = standard_omega(2);
        let u = Subspace::axes(4, &[0, 2]);
        assert_eq!(
            restricted_gram(&omega, &u),
            Matrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0])
        );
        assert_eq!(restricted_gram(&omega, &Subspace::axes(4, &[0, 1])), Matrix::zeros(2, 2));
    }

    #[test]
    fn eigen_examples() {
        let tol = ToleranceConfig::default();
        assert_eq!(eigen_multiset(&Matrix::identity(2, 2), &tol).unwrap(), vec![c(1.0, 0.0); 2]);
        let rot = Matrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
        let e = eigen_multiset(&rot, &tol).unwrap();
        assert_eq!(e.len(), 2);
        assert_eq!(e[0], e[1].conj());
        assert!((e[1] - c(0.0, 1.0)).norm() < 1e-14);
    }

    #[test]
    fn quarter_ainv_b_example() {
        // A = J4, B = 4·A·diag(2,2,3,3): ¼A⁻¹B = diag(2,2,3,3).
        let tol = ToleranceConfig::default();
        let mut a = Matrix::zeros(4, 4);
        for b in 0..2 {
            a[(2 * b, 2 * b + 1)] = 1.0;
            a[(2 * b + 1, 2 * b)] = -1.0;
        }
        let d = Matrix::from_diagonal(&nalgebra::DVector::from_vec(vec![2.0, 2.0, 3.0, 3.0]));
        let b = (&a * d) * 4.0;
        let t = inverse(&a).unwrap() * b * 0.25;
        let e = eigen_multiset(&t, &tol).unwrap();
        assert!(multiset_equal(&e, &[c(2.0, 0.0), c(2.0, 0.0), c(3.0, 0.0), c(3.0, 0.0)], &tol));
        let collapsed = collapse_pairs(&e, &tol).unwrap();
        assert!(multiset_equal(&collapsed, &[c(2.0, 0.0), c(3.0, 0.0)], &tol));
        assert_eq!(distinct_count(&collapsed, &tol), 2);
    }

    #[test]
    fn multiset_examples() {
        let tol = ToleranceConfig::default().with_rank_tol(1e-9).unwrap();
        let tight = ToleranceConfig::new(1e-9, 1e-9, 1e-9).unwrap();
        assert!(multiset_equal(&[c(2.0, 0.0), c(3.0, 0.0)], &[c(3.0, 0.0), c(2.0, 0.0)], &tol));
        assert!(multiset_equal(&[c(2.0, 0.0)], &[c(2.0 + 1e-12, 0.0)], &tight));
        assert!(!multiset_equal(&[c(2.0, 0.0), c(3.0, 0.0)], &[c(2.0, 0.0)], &tol));
        assert!(!multiset_equal(&[c(2.0, 0.0)], &[c(2.1, 0.0)], &tol));
    }

    #[test]
    fn collapse_handles_equal_real_parts() {
        let tol = ToleranceConfig::default();
        let eps = 1e-14;
        let raw = vec![
            c(1.0, 1.0),
            c(1.0 + eps, 1.0),
            c(1.0 - eps, 2.0),
            c(1.0, 2.0),
        ];
        let mut full = raw.clone();
        full.extend(raw.iter().map(|z| z.conj()));
        let sym = symmetrize_conjugates(&full, &tol).unwrap();
        let collapsed = collapse_pairs(&sym, &tol).unwrap();
        let expected = [c(1.0, 1.0), c(1.0, -1.0), c(1.0, 2.0), c(1.0, -2.0)];
        assert!(multiset_equal(&collapsed, &expected, &tol));
    }

    #[test]
    fn collapse_rejects_simple_eigenvalue() {
        let tol = ToleranceConfig::default();
        let raw = [c(1.0, 0.0), c(2.0, 0.0)];
        assert!(matches!(collapse_pairs(&raw, &tol), Err(Error::UnpairedEigenvalue { .. })));
    }

    fn arb_matrix(rows: usize, cols: usize) -> impl Strategy<Value = Matrix> {
        proptest::collection::vec(-1.0f64..1.0, rows * cols)
            .prop_map(move |v| Matrix::from_column_slice(rows, cols, &v))
    }

    fn arb_subspace_pair() -> impl Strategy<Value = (Subspace, Subspace)> {
        (2usize..8)
            .prop_flat_map(|n| (Just(n), 0..=n, 0..=n))
            .prop_flat_map(|(n, a, b)| (arb_matrix(n, a), arb_matrix(n, b)))
            .prop_map(|(a, b)| {
                let tol = ToleranceConfig::default();
                (Subspace::span(&a, &tol), Subspace::span(&b, &tol))
            })
    }

    proptest! {
        #[test]
        fn grassmann_identity((u, v) in arb_subspace_pair()) {
            let tol = ToleranceConfig::default();
            let s = sum(&u, &v, &tol).dim();
            let i = intersect(&u, &v, &tol).dim();
            prop_assert_eq!(s + i, u.dim() + v.dim());
        }

        #[test]
        fn double_complement_is_identity(n in 1usize..5, d in 0usize..8, seed in any::<u64>()) {
            use rand::SeedableRng;
            let tol = ToleranceConfig::default();
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let omega = crate::random::nonsingular_skew(&mut rng, 2 * n);
            let d = d.min(2 * n);
            let u = crate::random::subspace(&mut rng, 2 * n, d);
            let c = skew_complement(&u, &omega, &tol).unwrap();
            prop_assert_eq!(c.dim() + u.dim(), 2 * n);
            let cc = skew_complement(&c, &omega, &tol).unwrap();
            prop_assert!(cc.same_span(&u, &tol));
        }

        #[test]
        fn gram_is_exactly_skew(m in arb_matrix(4, 4), b in arb_matrix(4, 3)) {
            let tol = ToleranceConfig::default();
            let u = Subspace::span(&b, &tol);
            let g = restricted_gram(&m, &u);
            prop_assert_eq!(g.transpose(), -g);
        }

        #[test]
        fn eigen_multiset_is_conjugate_closed(m in arb_matrix(6, 6)) {
            let tol = ToleranceConfig::default();
            let e = eigen_multiset(&m, &tol).unwrap();
            let mut conj: Vec<Complex64> = e.iter().map(|z| z.conj()).collect();
            conj.sort_by(cmp_complex);
            prop_assert_eq!(e, conj);
        }

        #[test]
        fn multiset_equal_is_symmetric(a in proptest::collection::vec(-3.0f64..3.0, 0..5),
                                       b in proptest::collection::vec(-3.0f64..3.0, 0..5)) {
            let tol = ToleranceConfig::default();
            let a: Vec<Complex64> = a.into_iter().map(|x| c(x, 0.0)).collect();
            let b: Vec<Complex64> = b.into_iter().map(|x| c(x, 0.0)).collect();
            prop_assert_eq!(multiset_equal(&a, &b, &tol), multiset_equal(&b, &a, &tol));
            prop_assert!(multiset_equal(&a, &a, &tol));
        }
    }
}
