//! Characteristic Hamiltonians on the intersection manifold `Q = S₁ ∩ S₂`.

use nalgebra::DVector;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::germ::{GermPair, StratumKind};
use crate::invariants::{
    applicable, characteristic_numbers, check_linear, linearize_hinted, reduce, tangent_space,
    Condition,
};
use crate::linalg::{antisymmetrize, hstack, intersect, numerical_rank, rel_dist, solve, Matrix, ToleranceConfig};

/// Residual required of every chart point.
pub const NEWTON_TOL: f64 = 1e-12;
const NEWTON_MAX_ITER: usize = 50;

/// Step and radius of the stencil used to evaluate G7 at the base point.
pub const G7_STEP: f64 = 0.1;

/// A chart of `Q` near the base point, parametrized by `dim_q` ambient coordinates
/// measured from the base point.
#[derive(Debug, Clone)]
pub struct QChart<'a> {
    gp: &'a GermPair,
    selected: Vec<usize>,
    /// Layout of the unknown vector: `q`, then the parameters of each parametric stratum.
    offsets: [Option<usize>; 2],
    unknowns: usize,
    anchor: DVector<f64>,
    predictor: Matrix,
}

/// One Newton-corrected point of a chart.
#[derive(Debug, Clone, PartialEq)]
pub struct ChartPoint {
    pub params: Vec<f64>,
    pub q: DVector<f64>,
    /// Parameters of `q` on each parametric stratum.
    pub stratum_params: [Option<DVector<f64>>; 2],
    /// `∂q/∂t`, a basis of `T_q Q`.
    pub tangent: Matrix,
    pub residual: f64,
    pub iterations: usize,
}

/// Picks `d` rows of `basis` (ambient × d) with full-pivoting elimination.
fn pivot_rows(basis: &Matrix) -> Vec<usize> {
    let mut m = basis.clone();
    let (rows, cols) = m.shape();
    let mut used_rows = vec![false; rows];
    let mut used_cols = vec![false; cols];
    let mut picked = Vec::with_capacity(cols);
    for _ in 0..cols {
        let mut best = (0, 0, -1.0);
        for r in (0..rows).filter(|&r| !used_rows[r]) {
            for c in (0..cols).filter(|&c| !used_cols[c]) {
                if m[(r, c)].abs() > best.2 {
                    best = (r, c, m[(r, c)].abs());
                }
            }
        }
        let (pr, pc, _) = best;
        used_rows[pr] = true;
        used_cols[pc] = true;
        picked.push(pr);
        let pivot_row = m.row(pr).into_owned();
        for r in 0..rows {
            if r != pr {
                let f = m[(r, pc)] / pivot_row[pc];
                for c in 0..cols {
                    m[(r, c)] -= f * pivot_row[c];
                }
            }
        }
    }
    picked.sort_unstable();
    picked
}

impl<'a> QChart<'a> {
    pub fn germ(&self) -> &'a GermPair {
        self.gp
    }

    pub fn dim_q(&self) -> usize {
        self.selected.len()
    }

    /// Ambient coordinates used as chart parameters, ascending.
    pub fn selected(&self) -> &[usize] {
        &self.selected
    }

    pub fn param_names(&self) -> Vec<String> {
        self.selected.iter().map(|&i| self.gp.coords()[i].clone()).collect()
    }

    pub fn anchor(&self) -> &DVector<f64> {
        &self.anchor
    }

    fn split(&self, z: &DVector<f64>) -> (DVector<f64>, [Option<DVector<f64>>; 2]) {
        let dim = self.gp.ambient_dim();
        let q = z.rows(0, dim).into_owned();
        let params = [0, 1].map(|i| {
            self.offsets[i].map(|o| z.rows(o, self.gp.stratum(i).arity()).into_owned())
        });
        (q, params)
    }

    fn residual(&self, z: &DVector<f64>, t: &[f64]) -> Result<DVector<f64>> {
        let dim = self.gp.ambient_dim();
        let (q, params) = self.split(z);
        let mut parts: Vec<f64> = Vec::with_capacity(self.unknowns);
        for i in 0..2 {
            let s = self.gp.stratum(i);
            match (s.kind(), &params[i]) {
                (StratumKind::Parametric, Some(a)) => parts.extend((s.eval(a)? - &q).iter()),
                _ => parts.extend(s.eval(&q)?.iter()),
            }
        }
        let p = self.gp.base_point();
        for (j, &c) in self.selected.iter().enumerate() {
            parts.push(q[c] - p[c] - t[j]);
        }
        debug_assert_eq!(parts.len(), self.unknowns);
        let _ = dim;
        Ok(DVector::from_vec(parts))
    }

    fn jacobian(&self, z: &DVector<f64>) -> Result<Matrix> {
        let dim = self.gp.ambient_dim();
        let (q, params) = self.split(z);
        let mut j = Matrix::zeros(self.unknowns, self.unknowns);
        let mut row = 0;
        for i in 0..2 {
            let s = self.gp.stratum(i);
            match (s.kind(), &params[i]) {
                (StratumKind::Parametric, Some(a)) => {
                    let o = self.offsets[i].expect("parametric offset");
                    j.view_mut((row, o), (dim, s.arity())).copy_from(&s.jacobian(a)?);
                    for r in 0..dim {
                        j[(row + r, r)] = -1.0;
                    }
                    row += dim;
                }
                _ => {
                    let jf = s.jacobian(&q)?;
                    j.view_mut((row, 0), (jf.nrows(), dim)).copy_from(&jf);
                    row += jf.nrows();
                }
            }
        }
        for (k, &c) in self.selected.iter().enumerate() {
            j[(row + k, c)] = 1.0;
        }
        Ok(j)
    }

    /// `∂z/∂t` at `z`: the implicit-function derivative of the chart.
    fn derivative(&self, z: &DVector<f64>) -> Result<Matrix> {
        let d = self.dim_q();
        let mut rhs = Matrix::zeros(self.unknowns, d);
        for k in 0..d {
            rhs[(self.unknowns - d + k, k)] = 1.0;
        }
        let j = self.jacobian(z)?;
        solve(&j, &rhs).ok_or_else(|| {
            Error::NewtonDivergence("chart Jacobian is singular (strata not transverse along Q)".into())
        })
    }

    /// Newton-corrected point of `Q` at chart parameters `t`.
    pub fn point(&self, t: &[f64]) -> Result<ChartPoint> {
        let d = self.dim_q();
        if t.len() != d {
            return Err(Error::DimensionMismatch(format!("chart has {d} parameters, got {}", t.len())));
        }
        let tv = DVector::from_column_slice(t);
        let mut z = &self.anchor + &self.predictor * &tv;
        let mut iterations = 0;
        let mut r = self.residual(&z, t)?;
        loop {
            let scale = 1.0f64.max(z.amax());
            if r.amax() <= NEWTON_TOL * scale {
                break;
            }
            if iterations == NEWTON_MAX_ITER {
                return Err(Error::NewtonDivergence(format!(
                    "no convergence at chart parameters {t:?} (residual {:.3e})",
                    r.amax()
                )));
            }
            let j = self.jacobian(&z)?;
            let rhs = Matrix::from_column_slice(r.len(), 1, r.as_slice());
            let step = solve(&j, &rhs)
                .map(|m| m.column(0).into_owned())
                .ok_or_else(|| Error::NewtonDivergence(format!("singular Newton system at {t:?}")))?;
            z -= step;
            iterations += 1;
            r = self.residual(&z, t)?;
            if !r.iter().all(|x| x.is_finite()) {
                return Err(Error::NewtonDivergence(format!("non-finite residual at {t:?}")));
            }
        }
        let dz = self.derivative(&z)?;
        let dim = self.gp.ambient_dim();
        let (q, stratum_params) = self.split(&z);
        Ok(ChartPoint {
            params: t.to_vec(),
            q,
            stratum_params,
            tangent: dz.rows(0, dim).into_owned(),
            residual: r.amax(),
            iterations,
        })
    }
}

/// Chart of `Q = S₁ ∩ S₂` at the base point. Requires `k₁ + k₂ > 2n` and G2.
pub fn intersection_chart<'a>(gp: &'a GermPair, tol: &ToleranceConfig) -> Result<QChart<'a>> {
    let n = gp.n();
    let dims = gp.dims();
    if !dims.is_high(n) {
        return Err(Error::WrongRegime(format!(
            "strata of dimensions {dims} in dimension {} meet at an isolated point",
            2 * n
        )));
    }
    let dim = gp.ambient_dim();
    let p = gp.base_point();
    let t1 = tangent_space(gp.stratum(0), 0, p, None, tol)?;
    let t2 = tangent_space(gp.stratum(1), 1, p, None, tol)?;
    let span = numerical_rank(&hstack(&[t1.basis(), t2.basis()]), tol);
    if span != dim {
        return Err(Error::GenericityViolation(format!(
            "G2: tangent spaces span dimension {span}, expected {dim}"
        )));
    }
    let tq = intersect(&t1, &t2, tol);
    let selected = pivot_rows(tq.basis());
    let mut offsets = [None, None];
    let mut unknowns = dim;
    let mut anchor_parts: Vec<f64> = p.iter().copied().collect();
    for i in 0..2 {
        let s = gp.stratum(i);
        if s.kind() == StratumKind::Parametric {
            offsets[i] = Some(unknowns);
            unknowns += s.arity();
            let a = crate::invariants::invert_parametrization(s, i, p, DVector::zeros(s.arity()))?;
            anchor_parts.extend(a.iter());
        }
    }
    let mut chart = QChart {
        gp,
        selected,
        offsets,
        unknowns,
        anchor: DVector::from_vec(anchor_parts),
        predictor: Matrix::zeros(unknowns, tq.dim()),
    };
    chart.predictor = chart.derivative(&chart.anchor)?;
    Ok(chart)
}

/// `ω` restricted to `T_q Q` at chart parameters `t`.
pub fn omega_q(chart: &QChart<'_>, t: &[f64], tol: &ToleranceConfig) -> Result<Matrix> {
    let pt = chart.point(t)?;
    omega_q_at(chart, &pt, tol)
}

fn omega_q_at(chart: &QChart<'_>, pt: &ChartPoint, tol: &ToleranceConfig) -> Result<Matrix> {
    let w = chart.germ().omega().eval(&pt.q)?;
    let g = antisymmetrize(&(pt.tangent.transpose() * w * &pt.tangent));
    let rank = numerical_rank(&g, tol);
    if rank != g.nrows() {
        return Err(Error::DegenerateRestriction { rank, dim: g.nrows() });
    }
    Ok(g)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Stencil {
    /// Full tensor grid.
    Full,
    /// The anchor and the grid points on the coordinate axes.
    Axes,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridSpec {
    pub points_per_axis: usize,
    pub radius: f64,
    pub stencil: Stencil,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            points_per_axis: 5,
            radius: 0.2,
            stencil: Stencil::Full,
        }
    }
}

impl GridSpec {
    pub fn new(points_per_axis: usize, radius: f64, stencil: Stencil) -> Result<Self> {
        if points_per_axis < 3 || points_per_axis.is_multiple_of(2) {
            return Err(Error::OutOfRange(format!(
                "points per axis must be odd and at least 3, got {points_per_axis}"
            )));
        }
        if !(radius.is_finite() && radius > 0.0) {
            return Err(Error::OutOfRange(format!("grid radius must be positive, got {radius}")));
        }
        Ok(GridSpec {
            points_per_axis,
            radius,
            stencil,
        })
    }

    pub fn step(&self) -> f64 {
        2.0 * self.radius / (self.points_per_axis - 1) as f64
    }

    fn centre(&self) -> usize {
        self.points_per_axis / 2
    }

    /// Multi-indices of the grid points in lexicographic order.
    fn indices(&self, d: usize) -> Vec<Vec<usize>> {
        let m = self.points_per_axis;
        let c = self.centre();
        match self.stencil {
            Stencil::Full => {
                let total = m.pow(d as u32);
                (0..total)
                    .map(|mut flat| {
                        let mut idx = vec![0; d];
                        for slot in idx.iter_mut().rev() {
                            *slot = flat % m;
                            flat /= m;
                        }
                        idx
                    })
                    .collect()
            }
            Stencil::Axes => {
                let mut out = vec![vec![c; d]];
                for axis in 0..d {
                    for i in (0..m).filter(|&i| i != c) {
                        let mut idx = vec![c; d];
                        idx[axis] = i;
                        out.push(idx);
                    }
                }
                out.sort();
                out
            }
        }
    }

    fn params(&self, idx: &[usize]) -> Vec<f64> {
        let c = self.centre() as f64;
        idx.iter().map(|&i| (i as f64 - c) * self.step()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FieldPoint {
    pub index: Vec<usize>,
    pub params: Vec<f64>,
    /// Branch values in branch order; absent for excluded points.
    #[serde(serialize_with = "crate::report::serialize_optional_complex_list")]
    pub values: Option<Vec<Complex64>>,
    /// Why the point was excluded.
    pub excluded: Option<String>,
    /// Two values at this point are closer than the pairing tolerance.
    pub branch_crossing: bool,
}

/// Sampled characteristic Hamiltonians over a grid in chart parameters.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HamiltonianField {
    pub grid: GridSpec,
    pub step: f64,
    pub param_names: Vec<String>,
    pub s: usize,
    #[serde(serialize_with = "crate::report::serialize_complex_list")]
    pub base_values: Vec<Complex64>,
    pub points: Vec<FieldPoint>,
    pub flags: Vec<String>,
}

impl HamiltonianField {
    /// Branch values at the grid point with this multi-index.
    pub fn values_at(&self, index: &[usize]) -> Option<&[Complex64]> {
        self.points
            .iter()
            .find(|p| p.index == index)
            .and_then(|p| p.values.as_deref())
    }

    pub fn excluded_count(&self) -> usize {
        self.points.iter().filter(|p| p.excluded.is_some()).count()
    }
}

/// Collapsed characteristic numbers at a chart point, or why the point is excluded.
fn numbers_at(chart: &QChart<'_>, t: &[f64], tol: &ToleranceConfig) -> std::result::Result<Vec<Complex64>, String> {
    let gp = chart.germ();
    let pt = chart.point(t).map_err(|e| e.to_string())?;
    omega_q_at(chart, &pt, tol).map_err(|e| e.to_string())?;
    let hints = [pt.stratum_params[0].as_ref(), pt.stratum_params[1].as_ref()];
    let lt = linearize_hinted(gp, &pt.q, hints, tol).map_err(|e| e.to_string())?;
    let dims = gp.dims();
    let required: Vec<Condition> = applicable(dims, gp.n())
        .into_iter()
        .filter(|&c| c != Condition::G7)
        .collect();
    let report = check_linear(&lt, dims, tol);
    if let Some(failed) = report.first_failure(&required) {
        return Err(format!("genericity condition {} fails", report.label(failed.condition)));
    }
    let rl = reduce(&lt, dims, tol).map_err(|e| e.to_string())?;
    characteristic_numbers(&rl, tol)
        .map(|c| c.collapsed)
        .map_err(|e| e.to_string())
}

/// Orders `values` to continue `previous` by globally greedy nearest matching.
fn match_branches(previous: &[Complex64], values: &[Complex64]) -> Vec<Complex64> {
    let mut candidates: Vec<(f64, usize, usize)> = Vec::new();
    for (i, p) in previous.iter().enumerate() {
        for (j, v) in values.iter().enumerate() {
            candidates.push((rel_dist(*p, *v), i, j));
        }
    }
    candidates.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut out = vec![None; previous.len()];
    let mut taken = vec![false; values.len()];
    for (_, i, j) in candidates {
        if out[i].is_none() && !taken[j] {
            out[i] = Some(values[j]);
            taken[j] = true;
        }
    }
    out.into_iter().map(|v| v.expect("equal sizes")).collect()
}

fn has_crossing(values: &[Complex64], tol: &ToleranceConfig) -> bool {
    values
        .iter()
        .enumerate()
        .any(|(i, a)| values[i + 1..].iter().any(|b| rel_dist(*a, *b) <= tol.eig_pair_tol))
}

/// Samples the characteristic Hamiltonians over `grid`. Points are computed in
/// parallel; the output is in grid order.
pub fn sample_hamiltonians(chart: &QChart<'_>, grid: &GridSpec, tol: &ToleranceConfig) -> Result<HamiltonianField> {
    let d = chart.dim_q();
    let gp = chart.germ();
    let s = gp.dims().s(gp.n());
    let indices = grid.indices(d);
    let centre = vec![grid.centre(); d];
    let raw: Vec<std::result::Result<Vec<Complex64>, String>> = indices
        .par_iter()
        .map(|idx| numbers_at(chart, &grid.params(idx), tol))
        .collect();
    let anchor_pos = indices.iter().position(|i| *i == centre).expect("grid contains its centre");
    let base_values = raw[anchor_pos]
        .clone()
        .map_err(|e| Error::GenericityViolation(format!("at the base point: {e}")))?;

    // Continue branches outward, ring by ring.
    let mut order: Vec<usize> = (0..indices.len()).collect();
    let ring = |idx: &[usize]| idx.iter().map(|&i| i.abs_diff(grid.centre())).max().unwrap_or(0);
    order.sort_by_key(|&k| (ring(&indices[k]), k));
    let position = |idx: &[usize]| indices.iter().position(|i| i == idx);
    let mut matched: Vec<Option<Vec<Complex64>>> = vec![None; indices.len()];
    let mut flags = Vec::new();
    for &k in &order {
        let Ok(values) = &raw[k] else { continue };
        if k == anchor_pos {
            matched[k] = Some(values.clone());
            continue;
        }
        let mut pred = indices[k].clone();
        let previous = loop {
            for (slot, &c) in pred.iter_mut().zip(centre.iter()) {
                if *slot > c {
                    *slot -= 1;
                } else if *slot < c {
                    *slot += 1;
                }
            }
            if let Some(v) = position(&pred).and_then(|p| matched[p].clone()) {
                break Some(v);
            }
            if pred == centre {
                break None;
            }
        };
        let Some(previous) = previous else { continue };
        matched[k] = Some(match_branches(&previous, values));
    }
    let points = indices
        .iter()
        .enumerate()
        .map(|(k, idx)| {
            let params = grid.params(idx);
            let excluded = match &raw[k] {
                Err(e) => Some(e.clone()),
                Ok(_) if matched[k].is_none() => Some("no matched neighbour towards the anchor".to_string()),
                Ok(_) => None,
            };
            let branch_crossing = matched[k].as_deref().is_some_and(|v| has_crossing(v, tol));
            if branch_crossing {
                flags.push(format!("BranchCrossing at {params:?}"));
            }
            FieldPoint {
                index: idx.clone(),
                params,
                values: matched[k].clone(),
                excluded,
                branch_crossing,
            }
        })
        .collect();
    Ok(HamiltonianField {
        grid: *grid,
        step: grid.step(),
        param_names: chart.param_names(),
        s,
        base_values,
        points,
        flags,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct G7Check {
    pub holds: bool,
    pub gradient: Vec<f64>,
    pub norm: f64,
    pub threshold: f64,
}

/// Central-difference gradient of the single branch at the anchor.
pub fn check_g7(field: &HamiltonianField, tol: &ToleranceConfig) -> Result<G7Check> {
    if field.s != 1 {
        return Err(Error::WrongRegime(format!("G7 needs exactly one characteristic Hamiltonian, s = {}", field.s)));
    }
    let d = field.param_names.len();
    let c = field.grid.points_per_axis / 2;
    let h = field.step;
    let mut gradient = Vec::with_capacity(d);
    for axis in 0..d {
        let mut plus = vec![c; d];
        let mut minus = vec![c; d];
        plus[axis] += 1;
        minus[axis] -= 1;
        let (Some(vp), Some(vm)) = (field.values_at(&plus), field.values_at(&minus)) else {
            return Err(Error::GenericityViolation(format!(
                "G7: neighbours of the anchor along {} are not available",
                field.param_names[axis]
            )));
        };
        gradient.push((vp[0].re - vm[0].re) / (2.0 * h));
    }
    let norm = gradient.iter().map(|g| g * g).sum::<f64>().sqrt();
    let threshold = 100.0 * tol.eig_pair_tol / h;
    Ok(G7Check {
        holds: norm > threshold,
        gradient,
        norm,
        threshold,
    })
}

/// G7 at the base point from a three-point axis stencil of step [`G7_STEP`].
pub fn g7_at_base(gp: &GermPair, tol: &ToleranceConfig) -> Result<G7Check> {
    let chart = intersection_chart(gp, tol)?;
    let grid = GridSpec::new(3, G7_STEP, Stencil::Axes)?;
    let field = sample_hamiltonians(&chart, &grid, tol)?;
    check_g7(&field, tol)
}

/// CSV export: one row per grid point, columns `param…, branch{j}_re, branch{j}_im`.
/// Excluded points have empty branch cells.
pub fn field_to_csv(field: &HamiltonianField) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header: Vec<String> = field.param_names.clone();
    for j in 1..=field.s {
        header.push(format!("branch{j}_re"));
        header.push(format!("branch{j}_im"));
    }
    let io = |e: csv::Error| Error::Io(e.to_string());
    w.write_record(&header).map_err(io)?;
    for p in &field.points {
        let mut row: Vec<String> = p.params.iter().map(|x| format!("{x:.16e}")).collect();
        match &p.values {
            Some(v) => {
                for z in v {
                    row.push(format!("{:.16e}", z.re));
                    row.push(format!("{:.16e}", z.im));
                }
            }
            None => row.extend(std::iter::repeat_n(String::new(), 2 * field.s)),
        }
        w.write_record(&row).map_err(io)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Io(e.to_string()))
}
