use serde::{Deserialize, Serialize};

use super::parser::parse_expression;
use crate::error::{Error, Result};
use crate::germ::{Dims, GermPair, StratumKind, StratumSpec};
use crate::ingest::expr::Expr;
use crate::linalg::ToleranceConfig;

/// A coefficient as written in a document: an expression string or a bare number.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Coefficient {
    Number(f64),
    Text(String),
}

impl Coefficient {
    fn to_expr(&self, context: impl Fn() -> String) -> Result<Expr> {
        match self {
            Coefficient::Number(x) => Ok(Expr::Num(*x)),
            Coefficient::Text(t) => parse_expression(t).map_err(|source| Error::Parse {
                context: context(),
                source,
            }),
        }
    }
}

impl From<&str> for Coefficient {
    fn from(s: &str) -> Self {
        Coefficient::Text(s.to_string())
    }
}

impl From<String> for Coefficient {
    fn from(s: String) -> Self {
        Coefficient::Text(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StratumDoc {
    pub kind: StratumKind,
    pub exprs: Vec<Coefficient>,
    #[serde(default)]
    pub vars: Vec<String>,
}

/// On-disk description of a germ pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GermPairDoc {
    pub n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k1: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k2: Option<usize>,
    pub coords: Vec<String>,
    pub base_point: Vec<f64>,
    pub omega: Vec<Vec<Coefficient>>,
    pub strata: Vec<StratumDoc>,
}

impl GermPairDoc {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Validation(format!("malformed document: {e}")))
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("document serializes");
        s.push('\n');
        s
    }

    pub fn dims(&self) -> Result<Dims> {
        match (self.k, self.k1, self.k2) {
            (Some(k), None, None) => Ok(Dims::Equal(k)),
            (None, Some(k1), Some(k2)) if k1 == k2 => Ok(Dims::Equal(k1)),
            (None, Some(k1), Some(k2)) => Ok(Dims::Unequal(k1, k2)),
            _ => Err(Error::Validation("document must give either k or both k1 and k2".into())),
        }
    }
}

/// Parses every expression in the document and validates it into a [`GermPair`].
pub fn load_germ_pair(doc: &GermPairDoc, tol: &ToleranceConfig) -> Result<GermPair> {
    let dims = doc.dims()?;
    if doc.strata.len() != 2 {
        return Err(Error::Validation(format!("expected 2 strata, got {}", doc.strata.len())));
    }
    let omega = doc
        .omega
        .iter()
        .enumerate()
        .map(|(i, row)| {
            row.iter()
                .enumerate()
                .map(|(j, c)| c.to_expr(|| format!("omega[{i}][{j}]")))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let mut strata = Vec::with_capacity(2);
    for (index, s) in doc.strata.iter().enumerate() {
        let exprs = s
            .exprs
            .iter()
            .enumerate()
            .map(|(j, c)| c.to_expr(|| format!("strata[{index}].exprs[{j}]")))
            .collect::<Result<Vec<_>>>()?;
        strata.push(StratumSpec {
            kind: s.kind,
            vars: s.vars.clone(),
            exprs,
        });
    }
    let strata: [StratumSpec; 2] = strata.try_into().expect("length checked");
    GermPair::new(
        doc.n,
        dims,
        doc.coords.clone(),
        doc.base_point.clone(),
        omega,
        strata,
        tol,
    )
}

pub fn load_germ_pair_json(text: &str, tol: &ToleranceConfig) -> Result<GermPair> {
    load_germ_pair(&GermPairDoc::from_json(text)?, tol)
}
