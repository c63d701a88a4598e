//! Seeded random generators and the randomized property suite behind `selftest`.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::germ::{Dims, GermPair};
use crate::invariants::{
    applicable, characteristic_numbers, check_linear, congruence_witness, decide_equivalence, reduce,
    transfer_operators, Condition, LinearTuple, Status,
};
use crate::linalg::{
    bottleneck_distance, collapse_pairs, eigen_multiset, inverse, multiset_equal, Matrix, ToleranceConfig,
};
use crate::normal_forms::{roundtrip_verify, Lambda, NormalFormSpec};
use crate::random;

/// Generator for case `index` of the check `stream` under `seed`.
pub fn case_rng(seed: u64, stream: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ index.wrapping_mul(0x9e37_79b9_7f4a_7c15));
    rng.set_stream(stream);
    rng
}

const MAX_ATTEMPTS: usize = 1000;

/// Random linear tuple on which every applicable condition except G7 holds.
pub fn generic_tuple<R: Rng + ?Sized>(
    rng: &mut R,
    n: usize,
    dims: Dims,
    tol: &ToleranceConfig,
) -> Result<LinearTuple> {
    dims.validate(n)?;
    let required: Vec<Condition> = applicable(dims, n).into_iter().filter(|&c| c != Condition::G7).collect();
    for _ in 0..MAX_ATTEMPTS {
        let mu = random::nonsingular_skew(rng, 2 * n);
        let u1 = random::subspace(rng, 2 * n, dims.k1());
        let u2 = random::subspace(rng, 2 * n, dims.k2());
        let lt = LinearTuple::new(mu, u1, u2, tol)?;
        if check_linear(&lt, dims, tol).holds_all(&required) {
            return Ok(lt);
        }
    }
    Err(Error::NoConvergence(format!("no generic tuple for {dims} in dimension {} found", 2 * n)))
}

/// `count` distinct reals in `[lo, hi]`, pairwise relative gap at least `gap`,
/// and away from 1 (a characteristic number never equals 1).
pub fn distinct_reals<R: Rng + ?Sized>(rng: &mut R, count: usize, lo: f64, hi: f64, gap: f64) -> Vec<f64> {
    let mut out: Vec<f64> = Vec::with_capacity(count);
    while out.len() < count {
        let x = rng.gen_range(lo..=hi);
        let far = |y: f64| (x - y).abs() >= gap * x.abs().max(y.abs());
        if far(1.0) && out.iter().all(|&y| far(y)) {
            out.push(x);
        }
    }
    out
}

/// `s` characteristic numbers made of `⌊s/2⌋` conjugate pairs (imaginary parts of
/// modulus at least 0.1) and one real value when `s` is odd.
pub fn conjugate_lambdas<R: Rng + ?Sized>(rng: &mut R, s: usize) -> Vec<Lambda> {
    let mut out = Vec::with_capacity(s);
    let mut used: Vec<Complex64> = Vec::new();
    while out.len() + 1 < s {
        let z = Complex64::new(rng.gen_range(-5.0..5.0), rng.gen_range(0.1..5.0));
        if used.iter().any(|w| (z - w).norm() < 0.05 * z.norm()) {
            continue;
        }
        used.push(z);
        out.push(Lambda::Complex { re: z.re, im: z.im });
        out.push(Lambda::Complex { re: z.re, im: -z.im });
    }
    if out.len() < s {
        out.push(Lambda::Real(distinct_reals(rng, 1, 0.1, 10.0, 0.05)[0]));
    }
    out
}

/// Random polynomial of degree at most 2 in `names` with constant term in
/// `[c_lo, c_hi]` and other coefficients in `[-coef, coef]`.
pub fn random_polynomial<R: Rng + ?Sized>(rng: &mut R, names: &[&str], c_lo: f64, c_hi: f64, coef: f64) -> String {
    let mut terms = vec![format!("{:.6}", rng.gen_range(c_lo..=c_hi))];
    let mut c = || format!("({:.6})", rng.gen_range(-coef..=coef));
    for (i, a) in names.iter().enumerate() {
        terms.push(format!("{}*{a}", c()));
        for b in &names[i..] {
            terms.push(format!("{}*{a}*{b}", c()));
        }
    }
    terms.join(" + ")
}

/// Random congruence-related pencils `(A, B)` and `(RᵀAR, RᵀBR)` of size `2s`.
pub fn congruent_pencils<R: Rng + ?Sized>(rng: &mut R, s: usize) -> (Matrix, Matrix, Matrix, Matrix) {
    let a = random::nonsingular_skew(rng, 2 * s);
    let b = random::nonsingular_skew(rng, 2 * s);
    let r = random::invertible(rng, 2 * s);
    let a2 = crate::linalg::antisymmetrize(&(r.transpose() * &a * &r));
    let b2 = crate::linalg::antisymmetrize(&(r.transpose() * &b * &r));
    (a, b, a2, b2)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub cases: usize,
    pub failures: usize,
    /// Largest measured residual over the passing cases.
    pub max_residual: f64,
    pub first_failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SelftestReport {
    pub seed: u64,
    pub tolerances: ToleranceConfig,
    pub passed: bool,
    pub checks: Vec<CheckResult>,
}

type CaseFn = fn(&mut ChaCha8Rng, &ToleranceConfig) -> std::result::Result<f64, String>;

fn run_check(name: &str, stream: u64, cases: usize, seed: u64, tol: &ToleranceConfig, f: CaseFn) -> CheckResult {
    let outcomes: Vec<std::result::Result<f64, String>> = (0..cases)
        .into_par_iter()
        .map(|i| f(&mut case_rng(seed, stream, i as u64), tol))
        .collect();
    let mut failures = 0;
    let mut first_failure = None;
    let mut max_residual: f64 = 0.0;
    for (i, o) in outcomes.into_iter().enumerate() {
        match o {
            Ok(r) => max_residual = max_residual.max(r),
            Err(e) => {
                failures += 1;
                first_failure.get_or_insert(format!("case {i}: {e}"));
            }
        }
    }
    CheckResult {
        name: name.to_string(),
        cases,
        failures,
        max_residual,
        first_failure,
    }
}

fn random_dims(rng: &mut ChaCha8Rng, max_n: usize) -> (usize, Dims) {
    let n = rng.gen_range(2..=max_n);
    let k = rng.gen_range(2..=2 * n - 2);
    (n, Dims::Equal(k))
}

fn expect(cond: bool, what: impl FnOnce() -> String) -> std::result::Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(what())
    }
}

fn case_invariance(rng: &mut ChaCha8Rng, tol: &ToleranceConfig) -> std::result::Result<f64, String> {
    let (n, dims) = random_dims(rng, 4);
    let lt = generic_tuple(rng, n, dims, tol).map_err(|e| e.to_string())?;
    let l = random::symplectic(rng, lt.mu(), 1.0);
    let moved = lt.pull_back(&l, tol).map_err(|e| e.to_string())?;
    let numbers = |t: &LinearTuple| {
        reduce(t, dims, tol)
            .and_then(|rl| characteristic_numbers(&rl, tol))
            .map(|c| c.collapsed)
            .map_err(|e| e.to_string())
    };
    let (a, b) = (numbers(&lt)?, numbers(&moved)?);
    expect(multiset_equal(&a, &b, tol), || format!("{dims}, n = {n}: {a:?} vs {b:?}"))?;
    Ok(bottleneck_distance(&a, &b).unwrap_or(f64::INFINITY))
}

fn case_even_multiplicity(rng: &mut ChaCha8Rng, tol: &ToleranceConfig) -> std::result::Result<f64, String> {
    let s = rng.gen_range(1..=4);
    let a = random::nonsingular_skew(rng, 2 * s);
    let b = random::nonsingular_skew(rng, 2 * s);
    let m = inverse(&a).ok_or("A is singular")? * b;
    let raw = eigen_multiset(&m, tol).map_err(|e| e.to_string())?;
    let collapsed = collapse_pairs(&raw, tol).map_err(|e| e.to_string())?;
    let doubled: Vec<Complex64> = collapsed.iter().flat_map(|z| [*z, *z]).collect();
    Ok(bottleneck_distance(&raw, &doubled).unwrap_or(f64::INFINITY))
}

fn case_routes(rng: &mut ChaCha8Rng, tol: &ToleranceConfig) -> std::result::Result<f64, String> {
    let (n, dims) = random_dims(rng, 4);
    let lt = generic_tuple(rng, n, dims, tol).map_err(|e| e.to_string())?;
    let rl = reduce(&lt, dims, tol).map_err(|e| e.to_string())?;
    let cn = characteristic_numbers(&rl, tol).map_err(|e| e.to_string())?;
    let (t1, t2) = transfer_operators(&rl, tol).map_err(|e| e.to_string())?;
    let e1 = eigen_multiset(&t1, tol).map_err(|e| e.to_string())?;
    let e2 = eigen_multiset(&t2, tol).map_err(|e| e.to_string())?;
    let transfer = bottleneck_distance(&e1, &e2).unwrap_or(f64::INFINITY);
    expect(transfer <= tol.eig_pair_tol, || format!("T1/T2 spectra differ by {transfer:.3e}"))?;
    Ok(cn.route_residual.max(transfer))
}

fn case_zero_tuple(rng: &mut ChaCha8Rng, tol: &ToleranceConfig) -> std::result::Result<f64, String> {
    let n = rng.gen_range(1..=4);
    let k = if rng.gen_bool(0.5) { 1 } else { 2 * n - 1 };
    let dims = Dims::Equal(k);
    let make = |rng: &mut ChaCha8Rng| -> std::result::Result<GermPair, String> {
        let lt = generic_tuple(rng, n, dims, tol).map_err(|e| e.to_string())?;
        GermPair::from_linear(lt.mu(), lt.u1().basis(), lt.u2().basis(), dims, tol).map_err(|e| e.to_string())
    };
    let (a, b) = (make(rng)?, make(rng)?);
    let v = decide_equivalence(&a, &b, tol).map_err(|e| e.to_string())?;
    expect(v.status == Status::Equivalent, || format!("k = {k}, n = {n}: {v:?}"))?;
    Ok(0.0)
}

fn case_roundtrip_real(rng: &mut ChaCha8Rng, tol: &ToleranceConfig) -> std::result::Result<f64, String> {
    let n = rng.gen_range(2..=5);
    let k = rng.gen_range(2..=n);
    let s = k / 2;
    let lambdas = distinct_reals(rng, s, 0.1, 10.0, 0.05).into_iter().map(Lambda::Real).collect();
    let r = roundtrip_verify(&NormalFormSpec::with_lambdas(n, k, lambdas), tol).map_err(|e| e.to_string())?;
    Ok(r.max_residual)
}

fn case_roundtrip_complex(rng: &mut ChaCha8Rng, tol: &ToleranceConfig) -> std::result::Result<f64, String> {
    let n = rng.gen_range(4..=6);
    let k = rng.gen_range(4..=n);
    let lambdas = conjugate_lambdas(rng, k / 2);
    let r = roundtrip_verify(&NormalFormSpec::with_lambdas(n, k, lambdas), tol).map_err(|e| e.to_string())?;
    Ok(r.max_residual)
}

fn case_witness(rng: &mut ChaCha8Rng, tol: &ToleranceConfig) -> std::result::Result<f64, String> {
    let s = rng.gen_range(1..=4);
    let (a, b, a2, b2) = congruent_pencils(rng, s);
    let w = congruence_witness(&a, &b, &a2, &b2, tol)
        .map_err(|e| e.to_string())?
        .ok_or("spectra of congruent pencils differ")?;
    Ok(w.residual_a.max(w.residual_b))
}

fn case_appendix(rng: &mut ChaCha8Rng, tol: &ToleranceConfig) -> std::result::Result<f64, String> {
    let n = rng.gen_range(2..=6);
    let k1 = rng.gen_range(1..=2 * n - 3);
    let k2 = loop {
        let k2 = rng.gen_range(k1 + 1..=2 * n - 1);
        if (k1 + k2) % 2 == 0 {
            break k2;
        }
    };
    let dims = Dims::Unequal(k1, k2);
    let lt = generic_tuple(rng, n, dims, tol).map_err(|e| e.to_string())?;
    let rl = reduce(&lt, dims, tol).map_err(|e| e.to_string())?;
    let s = (k1 / 2).min((2 * n - k2) / 2);
    expect(rl.w().dim() == 4 * s, || format!("{dims}, n = {n}: dim W = {}", rl.w().dim()))?;
    Ok(0.0)
}

const CHECKS: [(&str, CaseFn); 8] = [
    ("symplectic_invariance", case_invariance),
    ("even_multiplicity", case_even_multiplicity),
    ("route_agreement", case_routes),
    ("zero_tuple", case_zero_tuple),
    ("roundtrip_real", case_roundtrip_real),
    ("roundtrip_complex", case_roundtrip_complex),
    ("congruence_witness", case_witness),
    ("appendix_dimensions", case_appendix),
];

/// Runs every check on `cases` seeded cases. The report depends only on `seed`,
/// `cases` and `tol`.
pub fn run_selftest(seed: u64, cases: usize, tol: &ToleranceConfig) -> SelftestReport {
    let checks: Vec<CheckResult> = CHECKS
        .iter()
        .enumerate()
        .map(|(i, (name, f))| run_check(name, i as u64, cases, seed, tol, *f))
        .collect();
    SelftestReport {
        seed,
        tolerances: *tol,
        passed: checks.iter().all(|c| c.failures == 0),
        checks,
    }
}
