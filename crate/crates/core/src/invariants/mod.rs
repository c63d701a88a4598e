//! Linearization, genericity, reduced linearization, characteristic numbers and
//! equivalence decisions.

mod genericity;
mod linear;
mod reduce;
mod spectrum;
mod verdict;
mod witness;

pub use genericity::{applicable, check_genericity, check_linear, Condition, ConditionEntry, GenericityReport, Witness as ConditionWitness};
pub use linear::{invert_parametrization, linearize, linearize_at_base, linearize_hinted, tangent_space, LinearTuple};
pub use reduce::{reduce, reduced_space, restricted_kernel, restricted_rank, ReducedLinearization};
pub use spectrum::{characteristic_numbers, extract_abc, transfer_operators, Abc, CharNumbers};
pub use verdict::{decide_equivalence, decide_with_reports, moduli_count, Moduli, Regime, Status, Verdict};
pub use witness::{congruence_witness, linear_equivalence_witness, Witness};
