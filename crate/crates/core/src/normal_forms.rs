//! Normal-form tuples built from invariant data, and their round trip through the
//! invariants pipeline.

use std::collections::BTreeSet;
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::germ::{Dims, GermPair, StratumKind};
use crate::hamiltonians::{intersection_chart, sample_hamiltonians, GridSpec};
use crate::ingest::{load_germ_pair, parse_expression, Coefficient, Expr, GermPairDoc, StratumDoc};
use crate::invariants::{
    applicable, characteristic_numbers, check_genericity, linearize_at_base, reduce, Condition, GenericityReport,
};
use crate::linalg::{bottleneck_distance, ToleranceConfig};

/// Largest residual accepted by [`roundtrip_verify`].
pub const ROUNDTRIP_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Case {
    #[serde(rename = "k1")]
    K1,
    /// `2 ≤ k ≤ n`, `s = 1`.
    #[serde(rename = "k-le-n-s1")]
    KLeNS1,
    #[serde(rename = "k-le-n")]
    KLeN,
    /// `n < k ≤ 2n − 4`.
    #[serde(rename = "functional")]
    Functional,
    /// `n < k`, `k ∈ {2n − 3, 2n − 2}`.
    #[serde(rename = "single-lambda-high")]
    SingleLambdaHigh,
    #[serde(rename = "k-2n-1")]
    K2nMinus1,
}

impl fmt::Display for Case {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let v = serde_json::to_value(self).expect("case serializes");
        write!(f, "{}", v.as_str().expect("case is a string"))
    }
}

impl Case {
    /// The row of the table for these dimensions; `s = 1` low rows use [`Case::KLeNS1`].
    pub fn infer(k: usize, n: usize) -> Result<Case> {
        Dims::Equal(k).validate(n).map_err(|e| Error::InvalidSpec(e.to_string()))?;
        let s = Dims::Equal(k).s(n);
        Ok(if k == 1 {
            Case::K1
        } else if k == 2 * n - 1 {
            Case::K2nMinus1
        } else if k <= n {
            if s == 1 {
                Case::KLeNS1
            } else {
                Case::KLeN
            }
        } else if s == 1 {
            Case::SingleLambdaHigh
        } else {
            Case::Functional
        })
    }

    fn admits(self, k: usize, n: usize) -> bool {
        let inferred = match Case::infer(k, n) {
            Ok(c) => c,
            Err(_) => return false,
        };
        inferred == self || (self == Case::KLeN && inferred == Case::KLeNS1)
    }
}

/// A characteristic number: real, or `{re, im}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Lambda {
    Real(f64),
    Complex { re: f64, im: f64 },
}

impl Lambda {
    pub fn value(self) -> Complex64 {
        match self {
            Lambda::Real(x) => Complex64::new(x, 0.0),
            Lambda::Complex { re, im } => Complex64::new(re, im),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NormalFormSpec {
    pub n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k1: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k2: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub case: Option<Case>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub lambdas: Vec<Lambda>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub hamiltonians: Vec<String>,
}

impl NormalFormSpec {
    pub fn with_lambdas(n: usize, k: usize, lambdas: Vec<Lambda>) -> Self {
        NormalFormSpec {
            n,
            k: Some(k),
            k1: None,
            k2: None,
            case: None,
            lambdas,
            hamiltonians: Vec::new(),
        }
    }

    pub fn with_hamiltonians(n: usize, k: usize, hamiltonians: Vec<String>) -> Self {
        NormalFormSpec {
            n,
            k: Some(k),
            k1: None,
            k2: None,
            case: None,
            lambdas: Vec::new(),
            hamiltonians,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::InvalidSpec(format!("malformed spec: {e}")))
    }

    fn k(&self) -> Result<usize> {
        match (self.k, self.k1, self.k2) {
            (Some(k), None, None) => Ok(k),
            (None, Some(k1), Some(k2)) if k1 == k2 => Ok(k1),
            (None, Some(k1), Some(k2)) => Err(Error::InvalidSpec(format!(
                "normal forms are tabulated for equal dimensions only, got k1 = {k1}, k2 = {k2}"
            ))),
            _ => Err(Error::InvalidSpec("spec must give either k or both k1 and k2".into())),
        }
    }
}

/// One `dx∧dx + dy∧dy/λ` slot pair of the normal form.
#[derive(Debug, Clone, PartialEq)]
enum Block {
    Real(f64),
    /// `λ = re + i·im` with `im > 0` and its conjugate; occupies two slots.
    Pair(f64, f64),
    Hamiltonian(Expr, String),
}

impl Block {
    fn width(&self) -> usize {
        match self {
            Block::Pair(..) => 2,
            _ => 1,
        }
    }
}

/// A validated spec: dimensions, row, and the blocks in slot order.
#[derive(Debug, Clone)]
struct Plan {
    n: usize,
    k: usize,
    case: Case,
    blocks: Vec<Block>,
}

impl Plan {
    fn s(&self) -> usize {
        Dims::Equal(self.k).s(self.n)
    }

    fn high(&self) -> bool {
        self.k > self.n
    }

    /// `(m, r)`: `x, y ∈ ℝᵐ`, `u, v ∈ ℝʳ`.
    fn layout(&self) -> (usize, usize) {
        if self.high() {
            (2 * self.n - self.k, self.k - self.n)
        } else {
            (self.k, self.n - self.k)
        }
    }

    fn coords(&self) -> Vec<String> {
        let (m, r) = self.layout();
        [("x", m), ("y", m), ("u", r), ("v", r)]
            .iter()
            .flat_map(|&(p, c)| (1..=c).map(move |i| format!("{p}{i}")))
            .collect()
    }

    fn q_names(&self) -> BTreeSet<String> {
        let (_, r) = self.layout();
        (1..=r).flat_map(|i| [format!("u{i}"), format!("v{i}")]).collect()
    }

    /// Characteristic values at the base point.
    fn base_values(&self) -> Result<Vec<Complex64>> {
        let mut out = Vec::new();
        for b in &self.blocks {
            match b {
                Block::Real(l) => out.push(Complex64::new(*l, 0.0)),
                Block::Pair(a, c) => {
                    out.push(Complex64::new(*a, *c));
                    out.push(Complex64::new(*a, -*c));
                }
                Block::Hamiltonian(h, _) => out.push(Complex64::new(eval_h(h, &[], &[])?, 0.0)),
            }
        }
        Ok(out)
    }

    fn has_hamiltonians(&self) -> bool {
        self.blocks.iter().any(|b| matches!(b, Block::Hamiltonian(..)))
    }
}

fn eval_h(h: &Expr, names: &[String], values: &[f64]) -> Result<f64> {
    let mut all: Vec<String> = names.to_vec();
    let mut vals: Vec<f64> = values.to_vec();
    for v in h.variables() {
        if !all.contains(&v) {
            all.push(v);
            vals.push(0.0);
        }
    }
    let c = h.compile(&all).map_err(Error::InvalidSpec)?;
    Ok(c.eval(&vals))
}

fn plan(spec: &NormalFormSpec) -> Result<Plan> {
    let k = spec.k()?;
    let n = spec.n;
    let inferred = Case::infer(k, n)?;
    let case = match spec.case {
        Some(c) if c.admits(k, n) => c,
        Some(c) => {
            return Err(Error::InvalidSpec(format!(
                "case {c} does not match k = {k}, n = {n} (expected {inferred})"
            )))
        }
        None => inferred,
    };
    let s = Dims::Equal(k).s(n);
    let mut p = Plan {
        n,
        k,
        case,
        blocks: Vec::new(),
    };
    match case {
        Case::K1 | Case::K2nMinus1 => {
            if !spec.lambdas.is_empty() || !spec.hamiltonians.is_empty() {
                return Err(Error::InvalidSpec(format!("case {case} has no invariants")));
            }
            return Ok(p);
        }
        Case::KLeN | Case::KLeNS1 => {
            if !spec.hamiltonians.is_empty() {
                return Err(Error::InvalidSpec(format!("case {case} takes numbers, not Hamiltonians")));
            }
        }
        Case::SingleLambdaHigh | Case::Functional => {
            if !spec.lambdas.is_empty() && !spec.hamiltonians.is_empty() {
                return Err(Error::InvalidSpec("give either lambdas or hamiltonians, not both".into()));
            }
        }
    }
    if spec.hamiltonians.is_empty() {
        p.blocks = lambda_blocks(&spec.lambdas)?;
    } else {
        let allowed = p.q_names();
        for (i, text) in spec.hamiltonians.iter().enumerate() {
            let h = parse_expression(text).map_err(|e| Error::InvalidSpec(format!("hamiltonians[{i}]: {e}")))?;
            if let Some(bad) = h.variables().into_iter().find(|v| !allowed.contains(v)) {
                return Err(Error::InvalidSpec(format!(
                    "hamiltonians[{i}] uses {bad:?}; only u1..u{r}, v1..v{r} are allowed",
                    r = k - n
                )));
            }
            let h0 = eval_h(&h, &[], &[])?;
            if !h0.is_finite() || h0 == 0.0 {
                return Err(Error::InvalidSpec(format!("hamiltonians[{i}] vanishes at the origin")));
            }
            if h0 == 1.0 {
                return Err(Error::InvalidSpec(format!(
                    "hamiltonians[{i}] equals 1 at the origin, which makes the form degenerate"
                )));
            }
            p.blocks.push(Block::Hamiltonian(h, text.clone()));
        }
    }
    let width: usize = p.blocks.iter().map(Block::width).sum();
    if width != s {
        return Err(Error::InvalidSpec(format!("case {case} with k = {k}, n = {n} needs {s} values, got {width}")));
    }
    Ok(p)
}

/// Groups the numbers into real blocks and conjugate-pair blocks, in input order.
fn lambda_blocks(lambdas: &[Lambda]) -> Result<Vec<Block>> {
    let values: Vec<Complex64> = lambdas.iter().map(|l| l.value()).collect();
    let mut used = vec![false; values.len()];
    let mut blocks = Vec::new();
    for (i, z) in values.iter().enumerate() {
        if !(z.re.is_finite() && z.im.is_finite()) || z.norm() == 0.0 {
            return Err(Error::InvalidSpec(format!("lambdas[{i}] = {z} must be finite and nonzero")));
        }
        if *z == Complex64::new(1.0, 0.0) {
            return Err(Error::InvalidSpec(format!("lambdas[{i}] = 1 makes the form degenerate")));
        }
        if used[i] {
            continue;
        }
        used[i] = true;
        if z.im == 0.0 {
            blocks.push(Block::Real(z.re));
            continue;
        }
        let partner = (0..values.len()).find(|&j| !used[j] && values[j] == z.conj());
        let Some(j) = partner else {
            return Err(Error::InvalidSpec(format!("lambdas[{i}] = {z} has no conjugate partner")));
        };
        used[j] = true;
        blocks.push(Block::Pair(z.re, z.im.abs()));
    }
    Ok(blocks)
}

fn number(x: f64) -> Coefficient {
    Coefficient::Number(x)
}

/// The normal-form document for a spec.
pub fn synthesize_doc(spec: &NormalFormSpec) -> Result<GermPairDoc> {
    let p = plan(spec)?;
    let (m, r) = p.layout();
    let dim = 2 * p.n;
    let (x, y, u, v) = (0, m, 2 * m, 2 * m + r);
    let mut omega = vec![vec![number(0.0); dim]; dim];
    let mut set = |i: usize, j: usize, c: Coefficient| {
        let negated = match &c {
            Coefficient::Number(a) => Coefficient::Number(-a),
            Coefficient::Text(t) => Coefficient::Text(format!("-{t}")),
        };
        omega[i][j] = c;
        omega[j][i] = negated;
    };
    for i in 0..m {
        set(x + i, y + i, number(1.0));
    }
    for i in 0..r {
        set(u + i, v + i, number(1.0));
    }
    let mut slot = 0;
    for b in &p.blocks {
        let (a1, a2) = (2 * slot, 2 * slot + 1);
        match b {
            Block::Real(l) => {
                set(x + a1, x + a2, number(1.0));
                set(y + a1, y + a2, number(1.0 / l));
            }
            Block::Hamiltonian(_, text) => {
                set(x + a1, x + a2, number(1.0));
                set(y + a1, y + a2, Coefficient::Text(format!("1/({text})")));
            }
            Block::Pair(re, im) => {
                // Coordinates (e1, e2, e3, e4) = slots 2·slot+1 ... 2·slot+4.
                // x-block [[0, I], [−I, 0]]; y-block [[0, R⁻¹], [−R⁻ᵀ, 0]] with
                // R = [[re, im], [−im, re]].
                let e = |t: usize| 2 * slot + t;
                set(x + e(0), x + e(2), number(1.0));
                set(x + e(1), x + e(3), number(1.0));
                let d = re * re + im * im;
                let r_inv = [[re / d, -im / d], [im / d, re / d]];
                for (a, row) in r_inv.iter().enumerate() {
                    for (c, val) in row.iter().enumerate() {
                        if *val != 0.0 {
                            set(y + e(a), y + e(2 + c), number(*val));
                        }
                    }
                }
            }
        }
        slot += b.width();
    }
    let coords = p.coords();
    let zero_set = |ranges: &[(usize, usize)]| StratumDoc {
        kind: StratumKind::Implicit,
        exprs: ranges
            .iter()
            .flat_map(|&(start, len)| (start..start + len).map(|i| Coefficient::Text(coords[i].clone())))
            .collect(),
        vars: Vec::new(),
    };
    let strata = if p.high() {
        vec![zero_set(&[(y, m)]), zero_set(&[(x, m)])]
    } else {
        vec![zero_set(&[(y, m), (u, 2 * r)]), zero_set(&[(x, m), (u, 2 * r)])]
    };
    Ok(GermPairDoc {
        n: p.n,
        k: Some(p.k),
        k1: None,
        k2: None,
        coords,
        base_point: vec![0.0; dim],
        omega,
        strata,
    })
}

pub fn synthesize(spec: &NormalFormSpec, tol: &ToleranceConfig) -> Result<GermPair> {
    load_germ_pair(&synthesize_doc(spec)?, tol)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Residual {
    pub quantity: String,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RoundtripReport {
    pub case: Case,
    pub n: usize,
    pub k: usize,
    pub s: usize,
    pub genericity: GenericityReport,
    #[serde(serialize_with = "crate::report::serialize_complex_list")]
    pub expected: Vec<Complex64>,
    #[serde(serialize_with = "crate::report::serialize_complex_list")]
    pub recovered: Vec<Complex64>,
    /// Grid points compared against the prescribed Hamiltonians.
    pub field_points: usize,
    pub residuals: Vec<Residual>,
    pub max_residual: f64,
    pub warnings: Vec<String>,
}

fn failure(quantity: impl Into<String>, detail: impl Into<String>) -> Error {
    Error::RoundtripFailure {
        quantity: quantity.into(),
        detail: detail.into(),
    }
}

/// Synthesizes the spec, recomputes its invariants and compares them with the
/// prescribed ones. G7 is reported but not required.
pub fn roundtrip_verify(spec: &NormalFormSpec, tol: &ToleranceConfig) -> Result<RoundtripReport> {
    let p = plan(spec)?;
    let gp = synthesize(spec, tol)?;
    let (n, dims) = (gp.n(), gp.dims());
    let genericity = check_genericity(&gp, tol);
    let required: Vec<Condition> = applicable(dims, n).into_iter().filter(|&c| c != Condition::G7).collect();
    if let Some(failed) = genericity.first_failure(&required) {
        return Err(failure(
            format!("genericity condition {}", genericity.label(failed.condition)),
            format!("{:?}", failed.witness),
        ));
    }
    let mut warnings: Vec<String> = gp.warnings().to_vec();
    if let Some(g7) = genericity.get(Condition::G7).filter(|e| !e.holds) {
        warnings.push(format!("G7 fails: {:?}", g7.witness));
    }
    let expected = p.base_values()?;
    let lt = linearize_at_base(&gp, tol)?;
    let rl = reduce(&lt, dims, tol)?;
    if rl.s() != p.s() {
        return Err(failure("s", format!("expected {}, recovered {}", p.s(), rl.s())));
    }
    let cn = characteristic_numbers(&rl, tol)?;
    let recovered = cn.collapsed.clone();
    let base = bottleneck_distance(&expected, &recovered)
        .ok_or_else(|| failure("characteristic numbers", "multisets differ in size"))?;
    let mut residuals = vec![
        Residual {
            quantity: "characteristic numbers".into(),
            residual: base,
        },
        Residual {
            quantity: "route agreement".into(),
            residual: cn.route_residual,
        },
    ];
    let mut field_points = 0;
    if p.has_hamiltonians() {
        let chart = intersection_chart(&gp, tol)?;
        let field = sample_hamiltonians(&chart, &GridSpec::default(), tol)?;
        warnings.extend(field.flags.iter().cloned());
        let names = chart.param_names();
        let mut worst: f64 = 0.0;
        for pt in &field.points {
            let Some(values) = &pt.values else {
                return Err(failure(
                    format!("characteristic Hamiltonians at {:?}", pt.params),
                    pt.excluded.clone().unwrap_or_default(),
                ));
            };
            let want = p
                .blocks
                .iter()
                .map(|b| match b {
                    Block::Hamiltonian(h, _) => eval_h(h, &names, &pt.params).map(|x| Complex64::new(x, 0.0)),
                    Block::Real(l) => Ok(Complex64::new(*l, 0.0)),
                    Block::Pair(..) => unreachable!("Hamiltonian specs hold real blocks only"),
                })
                .collect::<Result<Vec<_>>>()?;
            let d = bottleneck_distance(&want, values)
                .ok_or_else(|| failure("characteristic Hamiltonians", "branch count differs"))?;
            worst = worst.max(d);
            field_points += 1;
        }
        residuals.push(Residual {
            quantity: "characteristic Hamiltonians".into(),
            residual: worst,
        });
    }
    let max_residual = residuals.iter().map(|r| r.residual).fold(0.0, f64::max);
    if let Some(r) = residuals.iter().find(|r| !(r.residual <= ROUNDTRIP_TOL)) {
        return Err(failure(r.quantity.clone(), format!("residual {:.3e} exceeds {ROUNDTRIP_TOL:.0e}", r.residual)));
    }
    Ok(RoundtripReport {
        case: p.case,
        n,
        k: p.k,
        s: p.s(),
        genericity,
        expected,
        recovered,
        field_points,
        residuals,
        max_residual,
        warnings,
    })
}
