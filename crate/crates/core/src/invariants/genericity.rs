use std::fmt;

use serde::Serialize;

use crate::germ::{Dims, GermPair};
use crate::linalg::{hstack, intersect, numerical_rank, skew_complement, sum, ToleranceConfig};

use super::linear::{linearize_at_base, LinearTuple};
use super::reduce::{reduce, restricted_kernel, restricted_rank};
use super::spectrum::characteristic_numbers;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub enum Condition {
    G1,
    G2,
    G3,
    G4,
    G5,
    G6,
    G7,
    G8,
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

/// What was measured for one condition.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Witness {
    /// Measured ranks or dimensions against the required ones.
    Ranks { measured: Vec<usize>, required: Vec<usize> },
    /// Gradient of the single characteristic Hamiltonian at the base point.
    Gradient { gradient: Vec<f64>, norm: f64, threshold: f64 },
    /// The condition could not be evaluated.
    Error { message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionEntry {
    pub condition: Condition,
    pub holds: bool,
    pub witness: Witness,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GenericityReport {
    /// Unequal stratum dimensions: the conditions are the primed variants.
    pub primed: bool,
    pub entries: Vec<ConditionEntry>,
}

impl GenericityReport {
    pub fn get(&self, c: Condition) -> Option<&ConditionEntry> {
        self.entries.iter().find(|e| e.condition == c)
    }

    /// Display name, with a prime for the unequal-dimension variants of G1-G6.
    pub fn label(&self, c: Condition) -> String {
        if self.primed && c <= Condition::G6 {
            format!("{c}'")
        } else {
            c.to_string()
        }
    }

    /// First condition among `required` that is present and fails.
    pub fn first_failure(&self, required: &[Condition]) -> Option<&ConditionEntry> {
        self.entries
            .iter()
            .find(|e| required.contains(&e.condition) && !e.holds)
    }

    pub fn holds_all(&self, required: &[Condition]) -> bool {
        self.first_failure(required).is_none()
    }

    pub fn push(&mut self, entry: ConditionEntry) {
        self.entries.retain(|e| e.condition != entry.condition);
        self.entries.push(entry);
        self.entries.sort_by_key(|e| e.condition);
    }

    fn failed_everywhere(dims: Dims, n: usize, message: &str) -> Self {
        let entries = applicable(dims, n)
            .into_iter()
            .filter(|&c| c != Condition::G7)
            .map(|condition| ConditionEntry {
                condition,
                holds: false,
                witness: Witness::Error {
                    message: message.to_string(),
                },
            })
            .collect();
        GenericityReport {
            primed: !dims.is_equal(),
            entries,
        }
    }
}

/// Conditions that apply to germ pairs with these dimensions.
pub fn applicable(dims: Dims, n: usize) -> Vec<Condition> {
    let mut out = vec![Condition::G1, Condition::G2, Condition::G3];
    if dims.is_odd() {
        out.push(Condition::G4);
    }
    out.push(Condition::G5);
    let s = dims.s(n);
    if s >= 2 {
        out.push(Condition::G6);
    }
    if dims.is_high(n) && s == 1 {
        out.push(Condition::G7);
    }
    if !dims.is_equal() {
        out.push(Condition::G8);
    }
    out
}

fn ranks(condition: Condition, measured: Vec<usize>, required: Vec<usize>) -> ConditionEntry {
    ConditionEntry {
        condition,
        holds: measured == required,
        witness: Witness::Ranks { measured, required },
    }
}

fn error(condition: Condition, message: String) -> ConditionEntry {
    ConditionEntry {
        condition,
        holds: false,
        witness: Witness::Error { message },
    }
}

/// Evaluates the pointwise conditions G1-G6 and G8 on linear data. G7 needs the
/// germ away from the point and is left out.
pub fn check_linear(lt: &LinearTuple, dims: Dims, tol: &ToleranceConfig) -> GenericityReport {
    let dim = lt.ambient_dim();
    let n = dim / 2;
    let mu = lt.mu();
    let (t1, t2) = (lt.u1(), lt.u2());
    let (k1, k2) = (dims.k1(), dims.k2());
    let high = dims.is_high(n);
    let mut report = GenericityReport {
        primed: !dims.is_equal(),
        entries: Vec::new(),
    };

    report.push(ranks(
        Condition::G1,
        vec![restricted_rank(t1, mu, tol), restricted_rank(t2, mu, tol)],
        vec![2 * (k1 / 2), 2 * (k2 / 2)],
    ));

    let span_rank = numerical_rank(&hstack(&[t1.basis(), t2.basis()]), tol);
    report.push(ranks(
        Condition::G2,
        vec![span_rank],
        vec![if high { dim } else { k1 + k2 }],
    ));

    let g3 = if high {
        let q = intersect(t1, t2, tol);
        (restricted_rank(&q, mu, tol), k1 + k2 - dim)
    } else {
        (restricted_rank(&sum(t1, t2, tol), mu, tol), k1 + k2)
    };
    report.push(ranks(Condition::G3, vec![g3.0], vec![g3.1]));

    if dims.is_odd() {
        let l1 = restricted_kernel(t1, mu, tol);
        let l2 = restricted_kernel(t2, mu, tol);
        if l1.dim() != 1 || l2.dim() != 1 {
            report.push(ranks(Condition::G4, vec![l1.dim(), l2.dim()], vec![1, 1]));
        } else {
            let plane = sum(&l1, &l2, tol);
            report.push(ranks(Condition::G4, vec![restricted_rank(&plane, mu, tol)], vec![2]));
        }
    }

    match skew_complement(t1, mu, tol) {
        Ok(t1_perp) => {
            let r = numerical_rank(&hstack(&[t1_perp.basis(), t2.basis()]), tol);
            report.push(ranks(Condition::G5, vec![r], vec![dim]));
            if !dims.is_equal() {
                let inner = intersect(&t1_perp, t2, tol);
                report.push(ranks(Condition::G8, vec![restricted_rank(&inner, mu, tol)], vec![k2 - k1]));
            }
        }
        Err(e) => {
            report.push(error(Condition::G5, e.to_string()));
            if !dims.is_equal() {
                report.push(error(Condition::G8, e.to_string()));
            }
        }
    }

    let s = dims.s(n);
    if s >= 2 {
        let prerequisites = [Condition::G1, Condition::G2, Condition::G3, Condition::G4, Condition::G5, Condition::G8];
        let entry = if let Some(failed) = report.first_failure(&prerequisites) {
            error(
                Condition::G6,
                format!("not evaluated: {} fails", report.label(failed.condition)),
            )
        } else {
            match reduce(lt, dims, tol).and_then(|rl| characteristic_numbers(&rl, tol)) {
                Ok(cn) => ranks(Condition::G6, vec![cn.distinct_count], vec![s]),
                Err(e) => error(Condition::G6, e.to_string()),
            }
        };
        report.push(entry);
    }
    report
}

/// Genericity of a germ pair at its base point, including G7 where it applies.
pub fn check_genericity(gp: &GermPair, tol: &ToleranceConfig) -> GenericityReport {
    let dims = gp.dims();
    let n = gp.n();
    let mut report = match linearize_at_base(gp, tol) {
        Ok(lt) => check_linear(&lt, dims, tol),
        Err(e) => GenericityReport::failed_everywhere(dims, n, &e.to_string()),
    };
    if applicable(dims, n).contains(&Condition::G7) {
        let entry = match crate::hamiltonians::g7_at_base(gp, tol) {
            Ok(g) => ConditionEntry {
                condition: Condition::G7,
                holds: g.holds,
                witness: Witness::Gradient {
                    gradient: g.gradient,
                    norm: g.norm,
                    threshold: g.threshold,
                },
            },
            Err(e) => error(Condition::G7, e.to_string()),
        };
        report.push(entry);
    }
    report
}
