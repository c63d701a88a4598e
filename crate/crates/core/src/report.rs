//! Reports and their deterministic serialization.

use std::fmt::Write as _;

use num_complex::Complex64;
use serde::ser::{SerializeSeq, Serializer};
use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::{ErrorClass, Result};
use crate::germ::GermPair;
use crate::hamiltonians::{check_g7, intersection_chart, sample_hamiltonians, G7Check, GridSpec};
use crate::invariants::{
    applicable, characteristic_numbers, check_genericity, decide_with_reports, linearize_at_base, moduli_count,
    reduce, GenericityReport, Moduli, Regime, Verdict,
};
use crate::linalg::ToleranceConfig;

#[derive(Serialize)]
struct ComplexRepr {
    re: f64,
    im: f64,
}

impl From<&Complex64> for ComplexRepr {
    fn from(z: &Complex64) -> Self {
        ComplexRepr { re: z.re, im: z.im }
    }
}

pub fn serialize_complex_list<S: Serializer>(values: &[Complex64], s: S) -> std::result::Result<S::Ok, S::Error> {
    let mut seq = s.serialize_seq(Some(values.len()))?;
    for z in values {
        seq.serialize_element(&ComplexRepr::from(z))?;
    }
    seq.end()
}

pub fn serialize_complex_lists<S: Serializer>(
    values: &[Vec<Complex64>],
    s: S,
) -> std::result::Result<S::Ok, S::Error> {
    let mut seq = s.serialize_seq(Some(values.len()))?;
    for list in values {
        let reprs: Vec<ComplexRepr> = list.iter().map(ComplexRepr::from).collect();
        seq.serialize_element(&reprs)?;
    }
    seq.end()
}

pub fn serialize_optional_complex_list<S: Serializer>(
    values: &Option<Vec<Complex64>>,
    s: S,
) -> std::result::Result<S::Ok, S::Error> {
    match values {
        Some(v) => serialize_complex_list(v, s),
        None => s.serialize_none(),
    }
}

/// `sha256:<hex>` of the input bytes.
pub fn digest(bytes: &[u8]) -> String {
    format!("sha256:{}", hex::encode(Sha256::digest(bytes)))
}

fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

fn write_value(out: &mut String, v: &Value, indent: usize) {
    let pad = |n: usize| "  ".repeat(n);
    match v {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => {
            if n.is_f64() {
                out.push_str(&format_float(n.as_f64().expect("f64 number")));
            } else {
                out.push_str(&n.to_string());
            }
        }
        Value::String(s) => out.push_str(&serde_json::to_string(s).expect("string serializes")),
        Value::Array(items) if items.is_empty() => out.push_str("[]"),
        Value::Array(items) => {
            out.push_str("[\n");
            for (i, item) in items.iter().enumerate() {
                out.push_str(&pad(indent + 1));
                write_value(out, item, indent + 1);
                out.push_str(if i + 1 < items.len() { ",\n" } else { "\n" });
            }
            out.push_str(&pad(indent));
            out.push(']');
        }
        Value::Object(map) if map.is_empty() => out.push_str("{}"),
        Value::Object(map) => {
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            out.push_str("{\n");
            for (i, k) in keys.iter().enumerate() {
                out.push_str(&pad(indent + 1));
                out.push_str(&serde_json::to_string(k).expect("key serializes"));
                out.push_str(": ");
                write_value(out, &map[*k], indent + 1);
                out.push_str(if i + 1 < keys.len() { ",\n" } else { "\n" });
            }
            out.push_str(&pad(indent));
            out.push('}');
        }
    }
}

/// JSON with sorted keys, two-space indentation and every float written with
/// 17 significant digits. Non-finite floats become `null`.
pub fn to_canonical_json<T: Serialize>(value: &T) -> String {
    let v = serde_json::to_value(value).expect("report serializes");
    let mut out = String::new();
    write_value(&mut out, &v, 0);
    out.push('\n');
    out
}

fn write_text(out: &mut String, path: &str, v: &Value) {
    match v {
        Value::Object(map) => {
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            for k in keys {
                let p = if path.is_empty() { k.clone() } else { format!("{path}.{k}") };
                write_text(out, &p, &map[k]);
            }
        }
        Value::Array(items) if !items.is_empty() => {
            for (i, item) in items.iter().enumerate() {
                write_text(out, &format!("{path}[{i}]"), item);
            }
        }
        Value::Number(n) if n.is_f64() => {
            let _ = writeln!(out, "{path} = {}", format_float(n.as_f64().expect("f64 number")));
        }
        other => {
            let _ = writeln!(out, "{path} = {other}");
        }
    }
}

/// One `path = value` line per leaf, in sorted key order.
pub fn to_text<T: Serialize>(value: &T) -> String {
    let v = serde_json::to_value(value).expect("report serializes");
    let mut out = String::new();
    write_text(&mut out, "", &v);
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NumbersReport {
    #[serde(serialize_with = "serialize_complex_list")]
    pub raw: Vec<Complex64>,
    #[serde(serialize_with = "serialize_complex_list")]
    pub collapsed: Vec<Complex64>,
    pub distinct_count: usize,
    pub route_residual: f64,
}

/// Summary of the characteristic Hamiltonians; the full field is exported by the
/// `hamiltonians` command.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FieldReference {
    pub dim_q: usize,
    pub chart_params: Vec<String>,
    #[serde(serialize_with = "serialize_complex_list")]
    pub base_values: Vec<Complex64>,
    pub g7: Option<G7Check>,
    pub flags: Vec<String>,
}

/// Everything computed about one germ pair at its base point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GermReport {
    pub input_digest: String,
    pub n: usize,
    pub k1: usize,
    pub k2: usize,
    pub regime: Regime,
    pub s: usize,
    pub moduli: Moduli,
    pub genericity: GenericityReport,
    /// `Generic` when every applicable condition holds, otherwise `Undetermined`.
    pub status: String,
    pub failing_condition: Option<String>,
    pub characteristic_numbers: Option<NumbersReport>,
    pub invariants_error: Option<String>,
    pub hamiltonians: Option<FieldReference>,
    pub warnings: Vec<String>,
}

/// Builds the report of one germ pair. Errors of class [`ErrorClass::Internal`]
/// are returned; input-level failures are recorded in the report.
pub fn germ_report(gp: &GermPair, input: &[u8], tol: &ToleranceConfig) -> Result<GermReport> {
    let (n, dims) = (gp.n(), gp.dims());
    let genericity = check_genericity(gp, tol);
    let failing_condition = genericity
        .first_failure(&applicable(dims, n))
        .map(|e| genericity.label(e.condition));
    let mut warnings: Vec<String> = gp.warnings().to_vec();
    let mut invariants_error = None;
    let numbers = linearize_at_base(gp, tol)
        .and_then(|lt| reduce(&lt, dims, tol))
        .and_then(|rl| characteristic_numbers(&rl, tol));
    let characteristic_numbers = match numbers {
        Ok(cn) => Some(NumbersReport {
            raw: cn.raw,
            collapsed: cn.collapsed,
            distinct_count: cn.distinct_count,
            route_residual: cn.route_residual,
        }),
        Err(e) if failing_condition.is_none() && e.class() == ErrorClass::Internal => return Err(e),
        Err(e) => {
            invariants_error = Some(e.to_string());
            None
        }
    };
    let hamiltonians = if dims.is_high(n) && dims.s(n) >= 1 {
        match field_reference(gp, tol) {
            Ok(f) => {
                warnings.extend(f.flags.iter().cloned());
                Some(f)
            }
            Err(e) => {
                warnings.push(format!("characteristic Hamiltonians unavailable: {e}"));
                None
            }
        }
    } else {
        None
    };
    Ok(GermReport {
        input_digest: digest(input),
        n,
        k1: dims.k1(),
        k2: dims.k2(),
        regime: Regime::of(dims, n),
        s: dims.s(n),
        moduli: moduli_count(dims, n)?,
        status: if failing_condition.is_none() { "Generic" } else { "Undetermined" }.to_string(),
        failing_condition,
        genericity,
        characteristic_numbers,
        invariants_error,
        hamiltonians,
        warnings,
    })
}

fn field_reference(gp: &GermPair, tol: &ToleranceConfig) -> Result<FieldReference> {
    let chart = intersection_chart(gp, tol)?;
    let field = sample_hamiltonians(&chart, &GridSpec::default(), tol)?;
    let g7 = if field.s == 1 { Some(check_g7(&field, tol)?) } else { None };
    Ok(FieldReference {
        dim_q: chart.dim_q(),
        chart_params: chart.param_names(),
        base_values: field.base_values.clone(),
        g7,
        flags: field.flags.clone(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquivReport {
    pub input_digests: [String; 2],
    pub verdict: Verdict,
    pub genericity: [GenericityReport; 2],
    pub moduli: Moduli,
    pub warnings: Vec<String>,
}

pub fn equiv_report(
    gps: [&GermPair; 2],
    inputs: [&[u8]; 2],
    tol: &ToleranceConfig,
) -> Result<EquivReport> {
    let genericity = [check_genericity(gps[0], tol), check_genericity(gps[1], tol)];
    let verdict = decide_with_reports(gps[0], gps[1], &genericity, tol)?;
    let mut warnings = Vec::new();
    for (i, gp) in gps.iter().enumerate() {
        warnings.extend(gp.warnings().iter().map(|w| format!("germ {}: {w}", i + 1)));
    }
    Ok(EquivReport {
        input_digests: [digest(inputs[0]), digest(inputs[1])],
        moduli: moduli_count(gps[0].dims(), gps[0].n())?,
        verdict,
        genericity,
        warnings,
    })
}
