//! The validated germ-pair model shared by every stage of the pipeline.

use std::fmt;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::expr::{CompiledExpr, Expr};
use crate::linalg::{numerical_rank, Matrix, ToleranceConfig};

/// Tolerance for "this point lies on that stratum" checks, relative to `1 + |point|`.
pub const MEMBERSHIP_TOL: f64 = 1e-9;

/// Stratum dimensions: equal (`k`) or unequal (`k₁ < k₂`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(untagged)]
pub enum Dims {
    Equal(usize),
    Unequal(usize, usize),
}

impl Dims {
    pub fn k1(&self) -> usize {
        match *self {
            Dims::Equal(k) => k,
            Dims::Unequal(k1, _) => k1,
        }
    }

    pub fn k2(&self) -> usize {
        match *self {
            Dims::Equal(k) => k,
            Dims::Unequal(_, k2) => k2,
        }
    }

    /// Dimension of stratum `i` (0 or 1).
    pub fn stratum(&self, i: usize) -> usize {
        if i == 0 {
            self.k1()
        } else {
            self.k2()
        }
    }

    pub fn is_equal(&self) -> bool {
        matches!(self, Dims::Equal(_))
    }

    /// `k₁ + k₂ > 2n`: the strata meet along a manifold of positive dimension.
    pub fn is_high(&self, n: usize) -> bool {
        self.k1() + self.k2() > 2 * n
    }

    pub fn is_odd(&self) -> bool {
        self.k1() % 2 == 1
    }

    /// Number of characteristic numbers: `min([k₁/2], [(2n − k₂)/2])`.
    pub fn s(&self, n: usize) -> usize {
        (self.k1() / 2).min((2 * n - self.k2()) / 2)
    }

    /// Dimension of `Q = S₁ ∩ S₂` in the high regime, 0 otherwise.
    pub fn q_dim(&self, n: usize) -> usize {
        (self.k1() + self.k2()).saturating_sub(2 * n)
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if n == 0 {
            return Err(Error::OutOfRange("n must be positive".into()));
        }
        match *self {
            Dims::Equal(k) => {
                if k == 0 || k >= 2 * n {
                    return Err(Error::OutOfRange(format!("k = {k} must satisfy 1 <= k <= {}", 2 * n - 1)));
                }
            }
            Dims::Unequal(k1, k2) => {
                if k1 == 0 || k1 >= k2 || k2 >= 2 * n {
                    return Err(Error::OutOfRange(format!(
                        "(k1, k2) = ({k1}, {k2}) must satisfy 1 <= k1 < k2 <= {}",
                        2 * n - 1
                    )));
                }
                if (k1 + k2) % 2 != 0 {
                    return Err(Error::OutOfRange(format!("k1 + k2 = {} must be even", k1 + k2)));
                }
            }
        }
        Ok(())
    }
}

impl fmt::Display for Dims {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Dims::Equal(k) => write!(f, "k={k}"),
            Dims::Unequal(k1, k2) => write!(f, "k1={k1},k2={k2}"),
        }
    }
}

/// A 2-form with coefficient expressions: `entries[i][j] = ω(∂ᵢ, ∂ⱼ)`.
#[derive(Debug, Clone)]
pub struct TwoFormGerm {
    source: Vec<Vec<Expr>>,
    compiled: Vec<Vec<CompiledExpr>>,
}

impl TwoFormGerm {
    fn new(source: Vec<Vec<Expr>>, coords: &[String]) -> Result<Self> {
        let compiled = source
            .iter()
            .enumerate()
            .map(|(i, row)| {
                row.iter()
                    .enumerate()
                    .map(|(j, e)| {
                        e.compile(coords).map_err(|v| {
                            Error::Validation(format!("omega[{i}][{j}] uses unknown coordinate {v:?}"))
                        })
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(TwoFormGerm { source, compiled })
    }

    pub fn dim(&self) -> usize {
        self.source.len()
    }

    pub fn source(&self) -> &[Vec<Expr>] {
        &self.source
    }

    /// Gram matrix of the form at `q`.
    pub fn eval(&self, q: &DVector<f64>) -> Result<Matrix> {
        let d = self.dim();
        let mut m = Matrix::zeros(d, d);
        for i in 0..d {
            for j in 0..d {
                let v = self.compiled[i][j].eval(q.as_slice());
                if !v.is_finite() {
                    return Err(Error::Eval(format!("omega[{i}][{j}] is not finite at {:?}", q.as_slice())));
                }
                m[(i, j)] = v;
            }
        }
        Ok(m)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StratumKind {
    Parametric,
    Implicit,
}

/// A stratum given by a parametrization `a ↦ φ(a)` or by equations `F(q) = 0`.
#[derive(Debug, Clone)]
pub struct StratumGerm {
    kind: StratumKind,
    dim: usize,
    vars: Vec<String>,
    exprs: Vec<Expr>,
    compiled: Vec<CompiledExpr>,
    jacobian: Vec<Vec<CompiledExpr>>,
}

impl StratumGerm {
    fn new(kind: StratumKind, dim: usize, vars: Vec<String>, exprs: Vec<Expr>, index: usize) -> Result<Self> {
        let compile = |e: &Expr| {
            e.compile(&vars)
                .map_err(|v| Error::Validation(format!("stratum {index} uses unknown variable {v:?}")))
        };
        let compiled = exprs.iter().map(compile).collect::<Result<Vec<_>>>()?;
        let jacobian = exprs
            .iter()
            .map(|e| vars.iter().map(|v| compile(&e.derivative(v))).collect::<Result<Vec<_>>>())
            .collect::<Result<Vec<_>>>()?;
        Ok(StratumGerm {
            kind,
            dim,
            vars,
            exprs,
            compiled,
            jacobian,
        })
    }

    pub fn kind(&self) -> StratumKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn vars(&self) -> &[String] {
        &self.vars
    }

    pub fn exprs(&self) -> &[Expr] {
        &self.exprs
    }

    /// Number of unknowns the defining map takes (parameters or ambient coordinates).
    pub fn arity(&self) -> usize {
        self.vars.len()
    }

    pub fn eval(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        let v = DVector::from_iterator(self.compiled.len(), self.compiled.iter().map(|e| e.eval(x.as_slice())));
        if v.iter().all(|x| x.is_finite()) {
            Ok(v)
        } else {
            Err(Error::Eval(format!("stratum map is not finite at {:?}", x.as_slice())))
        }
    }

    pub fn jacobian(&self, x: &DVector<f64>) -> Result<Matrix> {
        let rows = self.jacobian.len();
        let cols = self.vars.len();
        let m = Matrix::from_fn(rows, cols, |i, j| self.jacobian[i][j].eval(x.as_slice()));
        if m.iter().all(|x| x.is_finite()) {
            Ok(m)
        } else {
            Err(Error::Eval(format!("stratum Jacobian is not finite at {:?}", x.as_slice())))
        }
    }
}

/// Raw, unvalidated description of one stratum.
#[derive(Debug, Clone)]
pub struct StratumSpec {
    pub kind: StratumKind,
    pub vars: Vec<String>,
    pub exprs: Vec<Expr>,
}

/// A validated germ at `base_point` of a 2-form and two strata through it.
#[derive(Debug, Clone)]
pub struct GermPair {
    n: usize,
    dims: Dims,
    coords: Vec<String>,
    base_point: DVector<f64>,
    omega: TwoFormGerm,
    strata: [StratumGerm; 2],
    warnings: Vec<String>,
}

fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

fn check_names(names: &[String], what: &str) -> Result<()> {
    for (i, name) in names.iter().enumerate() {
        if !is_identifier(name) {
            return Err(Error::Validation(format!("{what} name {name:?} is not an identifier")));
        }
        if names[..i].contains(name) {
            return Err(Error::Validation(format!("{what} name {name:?} is repeated")));
        }
    }
    Ok(())
}

impl GermPair {
    /// Validates the raw data and builds a germ pair. Checks run in a fixed order
    /// and the first failure is reported.
    pub fn new(
        n: usize,
        dims: Dims,
        coords: Vec<String>,
        base_point: Vec<f64>,
        omega: Vec<Vec<Expr>>,
        strata: [StratumSpec; 2],
        tol: &ToleranceConfig,
    ) -> Result<Self> {
        dims.validate(n).map_err(|e| Error::Validation(e.to_string()))?;
        let dim = 2 * n;
        if coords.len() != dim {
            return Err(Error::Validation(format!("expected {dim} coordinate names, got {}", coords.len())));
        }
        check_names(&coords, "coordinate")?;
        if base_point.len() != dim {
            return Err(Error::Validation(format!("base_point has {} entries, expected {dim}", base_point.len())));
        }
        if !base_point.iter().all(|x| x.is_finite()) {
            return Err(Error::Validation("base_point has non-finite entries".into()));
        }
        if omega.len() != dim || omega.iter().any(|r| r.len() != dim) {
            return Err(Error::Validation(format!("omega must be a {dim}x{dim} array")));
        }
        let omega = TwoFormGerm::new(omega, &coords)?;

        let [s1, s2] = strata;
        let mut built = Vec::with_capacity(2);
        for (index, spec) in [s1, s2].into_iter().enumerate() {
            let k = dims.stratum(index);
            let vars = match spec.kind {
                StratumKind::Parametric => {
                    if spec.exprs.len() != dim {
                        return Err(Error::Validation(format!(
                            "parametric stratum {index} needs {dim} expressions, got {}",
                            spec.exprs.len()
                        )));
                    }
                    if spec.vars.len() != k {
                        return Err(Error::Validation(format!(
                            "parametric stratum {index} needs {k} parameters, got {}",
                            spec.vars.len()
                        )));
                    }
                    check_names(&spec.vars, "parameter")?;
                    spec.vars
                }
                StratumKind::Implicit => {
                    if spec.exprs.len() != dim - k {
                        return Err(Error::Validation(format!(
                            "implicit stratum {index} needs {} equations, got {}",
                            dim - k,
                            spec.exprs.len()
                        )));
                    }
                    if !spec.vars.is_empty() && spec.vars != coords {
                        return Err(Error::Validation(format!(
                            "implicit stratum {index}: vars must be empty or equal to coords"
                        )));
                    }
                    coords.clone()
                }
            };
            built.push(StratumGerm::new(spec.kind, k, vars, spec.exprs, index)?);
        }
        let strata: [StratumGerm; 2] = built.try_into().expect("two strata");

        let mut gp = GermPair {
            n,
            dims,
            coords,
            base_point: DVector::from_vec(base_point),
            omega,
            strata,
            warnings: Vec::new(),
        };
        gp.validate_at_base(tol)?;
        Ok(gp)
    }

    fn validate_at_base(&mut self, tol: &ToleranceConfig) -> Result<()> {
        let p = &self.base_point;
        let dim = 2 * self.n;
        let w = self
            .omega
            .eval(p)
            .map_err(|e| Error::Validation(format!("omega at base point: {e}")))?;
        let scale = w.amax().max(1.0);
        for i in 0..dim {
            for j in i..dim {
                if (w[(i, j)] + w[(j, i)]).abs() > tol.rank_tol * scale {
                    return Err(Error::Validation(format!(
                        "omega is not skew at the base point: omega[{i}][{j}] = {}, omega[{j}][{i}] = {}",
                        w[(i, j)],
                        w[(j, i)]
                    )));
                }
            }
        }
        let rank = numerical_rank(&w, tol);
        if rank != dim {
            return Err(Error::Validation(format!(
                "omega is singular at the base point (rank {rank} < {dim})"
            )));
        }
        let point_tol = MEMBERSHIP_TOL * (1.0 + p.amax());
        for (index, s) in self.strata.iter().enumerate() {
            match s.kind {
                StratumKind::Parametric => {
                    let origin = DVector::zeros(s.arity());
                    let image = s.eval(&origin).map_err(|e| Error::Validation(e.to_string()))?;
                    let miss = (&image - p).amax();
                    if miss > point_tol {
                        return Err(Error::Validation(format!(
                            "parametric stratum {index} does not map 0 to the base point (miss {miss:.3e})"
                        )));
                    }
                    let jac = s.jacobian(&origin).map_err(|e| Error::Validation(e.to_string()))?;
                    let r = numerical_rank(&jac, tol);
                    if r != s.dim {
                        return Err(Error::Validation(format!(
                            "parametric stratum {index} is not immersed at 0 (Jacobian rank {r} < {})",
                            s.dim
                        )));
                    }
                }
                StratumKind::Implicit => {
                    let value = s.eval(p).map_err(|e| Error::Validation(e.to_string()))?;
                    let miss = value.amax();
                    if miss > point_tol {
                        return Err(Error::Validation(format!(
                            "implicit stratum {index} does not vanish at the base point (residual {miss:.3e})"
                        )));
                    }
                    let jac = s.jacobian(p).map_err(|e| Error::Validation(e.to_string()))?;
                    let r = numerical_rank(&jac, tol);
                    if r != dim - s.dim {
                        return Err(Error::Validation(format!(
                            "implicit stratum {index} has Jacobian rank {r} < {} at the base point",
                            dim - s.dim
                        )));
                    }
                }
            }
        }
        let closedness = self.closedness_defect()?;
        if closedness > tol.rank_tol * scale {
            self.warnings.push(format!(
                "omega is not closed at the base point: max |d omega| = {closedness:.6e}"
            ));
        }
        Ok(())
    }

    /// `max |∂ᵢω_jl + ∂ⱼω_li + ∂ₗω_ij|` at the base point, from exact symbolic derivatives.
    pub fn closedness_defect(&self) -> Result<f64> {
        let dim = 2 * self.n;
        let p = self.base_point.as_slice();
        let src = self.omega.source();
        let partial = |a: usize, b: usize, c: usize| -> Result<f64> {
            let d = src[a][b]
                .derivative(&self.coords[c])
                .compile(&self.coords)
                .expect("variables already checked");
            Ok(d.eval(p))
        };
        let mut worst: f64 = 0.0;
        for i in 0..dim {
            for j in (i + 1)..dim {
                for l in (j + 1)..dim {
                    let v = partial(j, l, i)? + partial(l, i, j)? + partial(i, j, l)?;
                    if !v.is_finite() {
                        return Err(Error::Validation("exterior derivative of omega is not finite".into()));
                    }
                    worst = worst.max(v.abs());
                }
            }
        }
        Ok(worst)
    }

    /// Germ pair with constant form `mu` and linear parametric strata through the origin.
    pub fn from_linear(mu: &Matrix, t1: &Matrix, t2: &Matrix, dims: Dims, tol: &ToleranceConfig) -> Result<Self> {
        let dim = mu.nrows();
        if !dim.is_multiple_of(2) || mu.ncols() != dim {
            return Err(Error::DimensionMismatch("form must be square of even size".into()));
        }
        let n = dim / 2;
        let coords: Vec<String> = (1..=dim).map(|i| format!("q{i}")).collect();
        let omega = (0..dim)
            .map(|i| (0..dim).map(|j| Expr::Num(mu[(i, j)])).collect())
            .collect();
        let linear = |t: &Matrix, prefix: &str| {
            let vars: Vec<String> = (1..=t.ncols()).map(|j| format!("{prefix}{j}")).collect();
            let exprs = (0..dim)
                .map(|i| {
                    (0..t.ncols()).fold(Expr::Num(0.0), |acc, j| {
                        crate::ingest::expr::add(acc, crate::ingest::expr::mul(Expr::Num(t[(i, j)]), Expr::Var(vars[j].clone())))
                    })
                })
                .collect();
            StratumSpec {
                kind: StratumKind::Parametric,
                vars,
                exprs,
            }
        };
        GermPair::new(
            n,
            dims,
            coords,
            vec![0.0; dim],
            omega,
            [linear(t1, "a"), linear(t2, "b")],
            tol,
        )
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn ambient_dim(&self) -> usize {
        2 * self.n
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn coords(&self) -> &[String] {
        &self.coords
    }

    pub fn base_point(&self) -> &DVector<f64> {
        &self.base_point
    }

    pub fn omega(&self) -> &TwoFormGerm {
        &self.omega
    }

    pub fn stratum(&self, i: usize) -> &StratumGerm {
        &self.strata[i]
    }

    pub fn strata(&self) -> &[StratumGerm; 2] {
        &self.strata
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }
}
