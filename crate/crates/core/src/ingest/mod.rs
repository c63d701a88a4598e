//! Germ-pair documents and the coefficient expression language.

mod document;
pub mod expr;
mod parser;

pub use document::{load_germ_pair, load_germ_pair_json, Coefficient, GermPairDoc, StratumDoc};
pub use expr::{CompiledExpr, Expr};
pub use parser::{parse_expression, ParseError};
