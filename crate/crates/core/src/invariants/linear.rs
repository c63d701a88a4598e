use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::germ::{GermPair, StratumGerm, StratumKind, MEMBERSHIP_TOL};
use crate::linalg::{antisymmetrize, null_space, numerical_rank, Matrix, Subspace, ToleranceConfig};

const INVERSION_MAX_ITER: usize = 50;

/// Linear data `(V, μ, U₁ ∪ U₂)` of a germ pair at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearTuple {
    mu: Matrix,
    u1: Subspace,
    u2: Subspace,
}

impl LinearTuple {
    pub fn new(mu: Matrix, u1: Subspace, u2: Subspace, tol: &ToleranceConfig) -> Result<Self> {
        let dim = mu.nrows();
        if mu.ncols() != dim || u1.ambient_dim() != dim || u2.ambient_dim() != dim {
            return Err(Error::DimensionMismatch(format!(
                "form is {}x{}, subspaces live in dimensions {} and {}",
                mu.nrows(),
                mu.ncols(),
                u1.ambient_dim(),
                u2.ambient_dim()
            )));
        }
        let scale = mu.amax().max(f64::MIN_POSITIVE);
        if (&mu + mu.transpose()).amax() > tol.rank_tol * scale {
            return Err(Error::Validation("form is not skew-symmetric".into()));
        }
        let rank = numerical_rank(&mu, tol);
        if rank != dim {
            return Err(Error::SingularForm { rank, dim });
        }
        Ok(LinearTuple {
            mu: antisymmetrize(&mu),
            u1,
            u2,
        })
    }

    pub fn ambient_dim(&self) -> usize {
        self.mu.nrows()
    }

    pub fn mu(&self) -> &Matrix {
        &self.mu
    }

    pub fn u1(&self) -> &Subspace {
        &self.u1
    }

    pub fn u2(&self) -> &Subspace {
        &self.u2
    }

    pub fn subspace(&self, i: usize) -> &Subspace {
        if i == 0 {
            &self.u1
        } else {
            &self.u2
        }
    }

    /// The tuple `(Lᵀ μ L, L⁻¹U₁, L⁻¹U₂)`, equivalent to `self` via `L`.
    pub fn pull_back(&self, l: &Matrix, tol: &ToleranceConfig) -> Result<Self> {
        let l_inv = crate::linalg::inverse(l).ok_or_else(|| Error::Validation("map is singular".into()))?;
        LinearTuple::new(
            l.transpose() * &self.mu * l,
            self.u1.map(&l_inv, tol),
            self.u2.map(&l_inv, tol),
            tol,
        )
    }
}

fn membership_tol(point: &DVector<f64>) -> f64 {
    MEMBERSHIP_TOL * (1.0 + point.amax())
}

/// Finds parameters `a` with `φ(a) = point` by Gauss-Newton from `start`.
pub fn invert_parametrization(
    stratum: &StratumGerm,
    index: usize,
    point: &DVector<f64>,
    start: DVector<f64>,
) -> Result<DVector<f64>> {
    let target = membership_tol(point);
    let mut a = start;
    let mut residual = &stratum.eval(&a)? - point;
    for _ in 0..INVERSION_MAX_ITER {
        if residual.amax() <= 1e-14 * (1.0 + point.amax()) {
            break;
        }
        let jac = stratum.jacobian(&a)?;
        let step = jac
            .svd(true, true)
            .solve(&residual, f64::EPSILON)
            .map_err(|e| Error::Eval(e.to_string()))?;
        let next = &a - step;
        let next_residual = &stratum.eval(&next)? - point;
        if next_residual.amax() >= residual.amax() {
            break;
        }
        a = next;
        residual = next_residual;
    }
    let miss = residual.amax();
    if miss > target {
        return Err(Error::PointNotOnStratum {
            stratum: index,
            residual: miss,
        });
    }
    Ok(a)
}

/// Tangent space of a stratum at `point`. For parametric strata `hint` gives the
/// parameters of `point` if known.
pub fn tangent_space(
    stratum: &StratumGerm,
    index: usize,
    point: &DVector<f64>,
    hint: Option<&DVector<f64>>,
    tol: &ToleranceConfig,
) -> Result<Subspace> {
    let dim = point.len();
    match stratum.kind() {
        StratumKind::Parametric => {
            let a = match hint {
                Some(a) => {
                    let miss = (&stratum.eval(a)? - point).amax();
                    if miss > membership_tol(point) {
                        return Err(Error::PointNotOnStratum {
                            stratum: index,
                            residual: miss,
                        });
                    }
                    a.clone()
                }
                None => invert_parametrization(stratum, index, point, DVector::zeros(stratum.arity()))?,
            };
            let jac = stratum.jacobian(&a)?;
            let rank = numerical_rank(&jac, tol);
            if rank != stratum.dim() {
                return Err(Error::SingularJacobian {
                    stratum: index,
                    rank,
                    expected: stratum.dim(),
                });
            }
            Ok(Subspace::span(&jac, tol))
        }
        StratumKind::Implicit => {
            let miss = stratum.eval(point)?.amax();
            if miss > membership_tol(point) {
                return Err(Error::PointNotOnStratum {
                    stratum: index,
                    residual: miss,
                });
            }
            let jac = stratum.jacobian(point)?;
            let rank = numerical_rank(&jac, tol);
            if rank != dim - stratum.dim() {
                return Err(Error::SingularJacobian {
                    stratum: index,
                    rank,
                    expected: dim - stratum.dim(),
                });
            }
            Subspace::new(null_space(&jac, tol), tol)
        }
    }
}

/// Linearization at `point`, which must lie on both strata.
pub fn linearize(gp: &GermPair, point: &DVector<f64>, tol: &ToleranceConfig) -> Result<LinearTuple> {
    linearize_hinted(gp, point, [None, None], tol)
}

/// As [`linearize`], with known parameters for parametric strata.
pub fn linearize_hinted(
    gp: &GermPair,
    point: &DVector<f64>,
    hints: [Option<&DVector<f64>>; 2],
    tol: &ToleranceConfig,
) -> Result<LinearTuple> {
    if point.len() != gp.ambient_dim() {
        return Err(Error::DimensionMismatch(format!(
            "point has {} coordinates, expected {}",
            point.len(),
            gp.ambient_dim()
        )));
    }
    let mu = gp.omega().eval(point)?;
    let u1 = tangent_space(gp.stratum(0), 0, point, hints[0], tol)?;
    let u2 = tangent_space(gp.stratum(1), 1, point, hints[1], tol)?;
    LinearTuple::new(mu, u1, u2, tol)
}

/// Linearization at the base point.
pub fn linearize_at_base(gp: &GermPair, tol: &ToleranceConfig) -> Result<LinearTuple> {
    linearize(gp, gp.base_point(), tol)
}
