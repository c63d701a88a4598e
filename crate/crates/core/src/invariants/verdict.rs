use std::fmt;

use num_complex::Complex64;
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::germ::{Dims, GermPair};
use crate::linalg::{bottleneck_distance, multiset_equal, ToleranceConfig};

use super::genericity::{applicable, check_genericity, GenericityReport};
use super::linear::linearize_at_base;
use super::reduce::reduce;
use super::spectrum::characteristic_numbers;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Status {
    Equivalent,
    NotEquivalent,
    Undetermined,
}

/// Which classification statement a pair of germs falls under.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// `s = 0`: all generic germs are equivalent.
    ZeroTuple,
    /// Strata meet at a point and `s ≥ 1`: finitely many numeric moduli.
    Numbers,
    /// Strata meet along `Q` and `s = 1`: one Hamiltonian, decided by its value.
    SingleHamiltonian,
    /// Strata meet along `Q` and `s ≥ 2`: functional moduli.
    Functional,
}

impl Regime {
    pub fn of(dims: Dims, n: usize) -> Regime {
        let s = dims.s(n);
        match (s, dims.is_high(n)) {
            (0, _) => Regime::ZeroTuple,
            (_, false) => Regime::Numbers,
            (1, true) => Regime::SingleHamiltonian,
            (_, true) => Regime::Functional,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Verdict {
    pub status: Status,
    pub regime: Regime,
    /// The theorem that licensed the verdict, when one did.
    pub rule: Option<String>,
    /// Why no verdict was reached, or what refuted equivalence.
    pub reason: Option<String>,
    /// Characteristic numbers of each germ at its base point, when computed.
    #[serde(serialize_with = "crate::report::serialize_complex_lists")]
    pub invariants: Vec<Vec<Complex64>>,
    /// Bottleneck distance between the two invariant multisets.
    pub distance: Option<f64>,
}

fn rule_name(dims: Dims, n: usize) -> &'static str {
    let primed = !dims.is_equal();
    match (Regime::of(dims, n), primed) {
        (Regime::ZeroTuple, true) => "A'",
        (Regime::ZeroTuple, false) if dims.k1() == 1 => "A1",
        (Regime::ZeroTuple, false) => "A2",
        (Regime::Numbers, false) => "B",
        (Regime::Numbers, true) => "B'",
        (Regime::SingleHamiltonian, false) => "3.2",
        (Regime::SingleHamiltonian, true) => "C'",
        (Regime::Functional, false) => "C",
        (Regime::Functional, true) => "C'",
    }
}

fn base_numbers(gp: &GermPair, tol: &ToleranceConfig) -> Result<Vec<Complex64>> {
    let lt = linearize_at_base(gp, tol)?;
    let rl = reduce(&lt, gp.dims(), tol)?;
    Ok(characteristic_numbers(&rl, tol)?.collapsed)
}

/// Decides equivalence of two germ pairs where a classification theorem applies.
pub fn decide_equivalence(gp1: &GermPair, gp2: &GermPair, tol: &ToleranceConfig) -> Result<Verdict> {
    let reports = [check_genericity(gp1, tol), check_genericity(gp2, tol)];
    decide_with_reports(gp1, gp2, &reports, tol)
}

/// As [`decide_equivalence`], reusing genericity reports already computed.
pub fn decide_with_reports(
    gp1: &GermPair,
    gp2: &GermPair,
    reports: &[GenericityReport; 2],
    tol: &ToleranceConfig,
) -> Result<Verdict> {
    if gp1.n() != gp2.n() || gp1.dims() != gp2.dims() {
        return Err(Error::DimensionMismatch(format!(
            "germs live in (n={}, {}) and (n={}, {})",
            gp1.n(),
            gp1.dims(),
            gp2.n(),
            gp2.dims()
        )));
    }
    let (n, dims) = (gp1.n(), gp1.dims());
    let regime = Regime::of(dims, n);
    let rule = rule_name(dims, n);
    let required = applicable(dims, n);
    let mut verdict = Verdict {
        status: Status::Undetermined,
        regime,
        rule: None,
        reason: None,
        invariants: Vec::new(),
        distance: None,
    };
    for (i, report) in reports.iter().enumerate() {
        if let Some(failed) = report.first_failure(&required) {
            verdict.reason = Some(format!(
                "germ {}: genericity condition {} fails",
                i + 1,
                report.label(failed.condition)
            ));
            return Ok(verdict);
        }
    }
    if regime == Regime::ZeroTuple {
        verdict.status = Status::Equivalent;
        verdict.rule = Some(rule.to_string());
        return Ok(verdict);
    }
    let a = base_numbers(gp1, tol)?;
    let b = base_numbers(gp2, tol)?;
    verdict.distance = bottleneck_distance(&a, &b);
    let equal = multiset_equal(&a, &b, tol);
    verdict.invariants = vec![a, b];
    match regime {
        Regime::ZeroTuple => unreachable!("handled above"),
        Regime::Numbers | Regime::SingleHamiltonian => {
            verdict.status = if equal { Status::Equivalent } else { Status::NotEquivalent };
            verdict.rule = Some(rule.to_string());
            if !equal {
                verdict.reason = Some("characteristic numbers differ".into());
            }
        }
        Regime::Functional => {
            if equal {
                verdict.reason = Some(
                    "functional moduli: characteristic Hamiltonians agree at the base point; \
                     equivalence depends on a symplectomorphism of Q"
                        .into(),
                );
            } else {
                verdict.status = Status::NotEquivalent;
                verdict.rule = Some(rule.to_string());
                verdict.reason = Some("characteristic Hamiltonians differ at the base point".into());
            }
        }
    }
    Ok(verdict)
}

/// Number of moduli: finite, or infinite (functional).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Moduli {
    Finite(usize),
    Infinite,
}

impl fmt::Display for Moduli {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Moduli::Finite(m) => write!(f, "{m}"),
            Moduli::Infinite => write!(f, "infinity"),
        }
    }
}

impl Serialize for Moduli {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Moduli::Finite(m) => serializer.serialize_u64(*m as u64),
            Moduli::Infinite => serializer.serialize_str("infinity"),
        }
    }
}

/// Number of moduli of generic germs with these dimensions.
pub fn moduli_count(dims: Dims, n: usize) -> Result<Moduli> {
    dims.validate(n)?;
    let s = dims.s(n);
    Ok(match (s, dims.is_high(n)) {
        (s, false) => Moduli::Finite(s),
        (0, true) => Moduli::Finite(0),
        (1, true) => Moduli::Finite(1),
        (_, true) => Moduli::Infinite,
    })
}
