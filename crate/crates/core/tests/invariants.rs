use germinv::ingest::load_germ_pair_json;
use germinv::invariants::{
    characteristic_numbers, check_genericity, congruence_witness, decide_equivalence, extract_abc,
    linear_equivalence_witness, linearize, linearize_at_base, moduli_count, reduce, tangent_space,
    transfer_operators, Condition, ConditionWitness, Moduli, ReducedLinearization, Regime, Status,
};
use germinv::linalg::{eigen_multiset, multiset_equal, Subspace};
use germinv::normal_forms::{synthesize, Lambda, NormalFormSpec};
use germinv::{Dims, Error, GermPair, Matrix, ToleranceConfig};
use nalgebra::DVector;
use num_complex::Complex64;

fn tol() -> ToleranceConfig {
    ToleranceConfig::default()
}

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

fn j2() -> Matrix {
    Matrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0])
}

fn block_diag(blocks: &[Matrix]) -> Matrix {
    let n: usize = blocks.iter().map(|b| b.nrows()).sum();
    let mut m = Matrix::zeros(n, n);
    let mut o = 0;
    for b in blocks {
        m.view_mut((o, o), b.shape()).copy_from(b);
        o += b.nrows();
    }
    m
}

fn normal_form(n: usize, k: usize, lambdas: &[f64]) -> GermPair {
    let spec = NormalFormSpec::with_lambdas(n, k, lambdas.iter().map(|&l| Lambda::Real(l)).collect());
    synthesize(&spec, &tol()).unwrap()
}

fn axes(dim: usize, idx: &[usize]) -> Subspace {
    Subspace::axes(dim, idx)
}

#[test]
fn linearize_k1_normal_form() {
    let gp = normal_form(2, 1, &[]);
    let lt = linearize_at_base(&gp, &tol()).unwrap();
    let mut darboux = Matrix::zeros(4, 4);
    darboux[(0, 1)] = 1.0;
    darboux[(1, 0)] = -1.0;
    darboux[(2, 3)] = 1.0;
    darboux[(3, 2)] = -1.0;
    assert_eq!(lt.mu(), &darboux);
    assert!(lt.u1().same_span(&axes(4, &[0]), &tol()));
    assert!(lt.u2().same_span(&axes(4, &[1]), &tol()));
}

#[test]
fn tangent_of_parabola() {
    let json = r#"{"n": 1, "k": 1, "coords": ["x", "y"], "base_point": [0, 0],
        "omega": [["0", "1"], ["-1", "0"]],
        "strata": [{"kind": "implicit", "exprs": ["y - x^2"]},
                   {"kind": "parametric", "vars": ["t"], "exprs": ["t^2", "t"]}]}"#;
    let gp = load_germ_pair_json(json, &tol()).unwrap();
    let p = DVector::zeros(2);
    let t1 = tangent_space(gp.stratum(0), 0, &p, None, &tol()).unwrap();
    assert!(t1.same_span(&axes(2, &[0]), &tol()));
    let t2 = tangent_space(gp.stratum(1), 1, &p, None, &tol()).unwrap();
    assert!(t2.same_span(&axes(2, &[1]), &tol()));
}

#[test]
fn linearize_off_stratum_fails() {
    let gp = normal_form(2, 2, &[2.0]);
    let p = DVector::from_vec(vec![0.0, 0.0, 0.5, 0.0]);
    assert!(matches!(linearize(&gp, &p, &tol()), Err(Error::PointNotOnStratum { .. })));
}

#[test]
fn linearize_table_row_k_le_n() {
    let gp = normal_form(2, 2, &[2.0]);
    let lt = linearize_at_base(&gp, &tol()).unwrap();
    let mu = lt.mu();
    assert_eq!(mu[(0, 1)], 1.0);
    assert_eq!(mu[(2, 3)], 0.5);
    assert_eq!(mu[(0, 2)], 1.0);
    assert_eq!(mu[(1, 3)], 1.0);
    assert_eq!(mu[(0, 3)], 0.0);
}

#[test]
fn table_row_is_generic() {
    let gp = normal_form(4, 4, &[2.0, 3.0]);
    let report = check_genericity(&gp, &tol());
    for c in [Condition::G1, Condition::G2, Condition::G3, Condition::G5, Condition::G6] {
        assert!(report.get(c).unwrap().holds, "{c}: {:?}", report.get(c));
    }
    assert!(report.get(Condition::G4).is_none());
    assert!(report.get(Condition::G8).is_none());
}

#[test]
fn coincident_strata_fail_g2() {
    let json = r#"{"n": 2, "k": 2, "coords": ["x1", "x2", "y1", "y2"], "base_point": [0, 0, 0, 0],
        "omega": [["0", "0", "1", "0"], ["0", "0", "0", "1"], ["-1", "0", "0", "0"], ["0", "-1", "0", "0"]],
        "strata": [{"kind": "implicit", "exprs": ["y1", "y2"]},
                   {"kind": "implicit", "exprs": ["y1", "y2"]}]}"#;
    let gp = load_germ_pair_json(json, &tol()).unwrap();
    let report = check_genericity(&gp, &tol());
    let g2 = report.get(Condition::G2).unwrap();
    assert!(!g2.holds);
    assert_eq!(
        g2.witness,
        ConditionWitness::Ranks {
            measured: vec![2],
            required: vec![4]
        }
    );
}

/// ℝ⁶ = (x1, x2, y1, y2, z1, z2), a block form with σ = −A dx∧dx + B⁻¹ dy∧dy + dx∧dy.
fn block_form(lambda: f64) -> Matrix {
    let mut mu = Matrix::zeros(6, 6);
    mu.view_mut((0, 0), (2, 2)).copy_from(&j2());
    mu.view_mut((2, 2), (2, 2)).copy_from(&(j2() / lambda));
    mu.view_mut((0, 2), (2, 2)).copy_from(&Matrix::identity(2, 2));
    mu.view_mut((2, 0), (2, 2)).copy_from(&(-Matrix::identity(2, 2)));
    mu.view_mut((4, 4), (2, 2)).copy_from(&j2());
    mu
}

#[test]
fn unequal_dimensions_g8() {
    // k1 = 2: S₁ = span(∂x). k2 = 4: S₂ = span(∂y, ∂z).
    let mu = block_form(3.0);
    let t1 = Matrix::from_fn(6, 2, |i, j| if i == j { 1.0 } else { 0.0 });
    let t2 = Matrix::from_fn(6, 4, |i, j| if i == j + 2 { 1.0 } else { 0.0 });
    let gp = GermPair::from_linear(&mu, &t1, &t2, Dims::Unequal(2, 4), &tol()).unwrap();
    let report = check_genericity(&gp, &tol());
    let g8 = report.get(Condition::G8).unwrap();
    assert!(g8.holds);
    assert_eq!(
        g8.witness,
        ConditionWitness::Ranks {
            measured: vec![2],
            required: vec![2]
        }
    );
    assert_eq!(report.label(Condition::G3), "G3'");
    let rl = reduce(&linearize_at_base(&gp, &tol()).unwrap(), gp.dims(), &tol()).unwrap();
    assert_eq!(rl.w().dim(), 4);
    let cn = characteristic_numbers(&rl, &tol()).unwrap();
    assert!((cn.collapsed[0] - c(3.0)).norm() < 1e-10);
}

#[test]
fn zero_tuple_k1() {
    let gp = normal_form(2, 1, &[]);
    let rl = reduce(&linearize_at_base(&gp, &tol()).unwrap(), gp.dims(), &tol()).unwrap();
    assert_eq!(rl.s(), 0);
    assert_eq!(rl.w().dim(), 0);
    let (t1, t2) = transfer_operators(&rl, &tol()).unwrap();
    assert_eq!(t1.shape(), (0, 0));
    assert_eq!(t2.shape(), (0, 0));
    let cn = characteristic_numbers(&rl, &tol()).unwrap();
    assert!(cn.raw.is_empty() && cn.collapsed.is_empty());
}

#[test]
fn reduce_k_equals_n_equals_two() {
    let gp = normal_form(2, 2, &[2.0]);
    let lt = linearize_at_base(&gp, &tol()).unwrap();
    let rl = reduce(&lt, gp.dims(), &tol()).unwrap();
    assert_eq!(rl.s(), 1);
    assert!(rl.w().same_span(&Subspace::whole(4), &tol()));
    let wb = rl.w().basis();
    let u1 = Subspace::span(&(wb * rl.u1().basis()), &tol());
    let u2 = Subspace::span(&(wb * rl.u2().basis()), &tol());
    assert!(u1.same_span(&axes(4, &[0, 1]), &tol()));
    assert!(u2.same_span(&axes(4, &[2, 3]), &tol()));
}

#[test]
fn reduce_odd_k3_n3() {
    // S₁: y = z2 = 0, S₂: x = z1 = 0, with ℓ₁ = span(∂z1), ℓ₂ = span(∂z2).
    let mu = block_form(2.0);
    let t1 = Matrix::from_fn(6, 3, |i, j| if [0, 1, 4][j] == i { 1.0 } else { 0.0 });
    let t2 = Matrix::from_fn(6, 3, |i, j| if [2, 3, 5][j] == i { 1.0 } else { 0.0 });
    let gp = GermPair::from_linear(&mu, &t1, &t2, Dims::Equal(3), &tol()).unwrap();
    let report = check_genericity(&gp, &tol());
    assert!(report.get(Condition::G4).unwrap().holds);
    let rl = reduce(&linearize_at_base(&gp, &tol()).unwrap(), gp.dims(), &tol()).unwrap();
    assert_eq!(rl.w().dim(), 4);
    assert!(rl.w().same_span(&axes(6, &[0, 1, 2, 3]), &tol()));
    let cn = characteristic_numbers(&rl, &tol()).unwrap();
    assert!((cn.collapsed[0] - c(2.0)).norm() < 1e-10);
}

#[test]
fn transfer_operator_is_scalar_for_table_row() {
    let gp = normal_form(2, 2, &[2.0]);
    let rl = reduce(&linearize_at_base(&gp, &tol()).unwrap(), gp.dims(), &tol()).unwrap();
    let (t1, t2) = transfer_operators(&rl, &tol()).unwrap();
    assert!((t1 - Matrix::identity(2, 2) * 2.0).amax() < 1e-12);
    assert!((t2 - Matrix::identity(2, 2) * 2.0).amax() < 1e-12);
}

#[test]
fn abc_of_table_row() {
    for lambda in [2.0, 3.0] {
        let a = Matrix::from_row_slice(2, 2, &[0.0, -0.5, 0.5, 0.0]);
        let b = Matrix::from_row_slice(2, 2, &[0.0, -2.0 * lambda, 2.0 * lambda, 0.0]);
        let rl = ReducedLinearization::from_abc(&a, &b, &Matrix::identity(2, 2), &tol()).unwrap();
        // The form on W is exactly the table row: dx1∧dx2 + dy1∧dy2/λ + Σ dxᵢ∧dyᵢ.
        assert_eq!(rl.sigma()[(0, 1)], 1.0);
        assert!((rl.sigma()[(2, 3)] - 1.0 / lambda).abs() < 1e-15);
        let abc = extract_abc(&rl, &tol()).unwrap();
        assert!((&abc.a - &a).amax() < 1e-14);
        assert!((&abc.b - &b).amax() < 1e-12);
        assert_eq!(abc.c, Matrix::identity(2, 2));
        assert_eq!(abc.a.transpose(), -&abc.a);
        assert_eq!(abc.b.transpose(), -&abc.b);
        let op = abc.c_normalized().unwrap().operator().unwrap();
        assert!((op - Matrix::identity(2, 2) * lambda).amax() < 1e-12);
    }
}

#[test]
fn singular_cross_block_fails_transversality() {
    let a = block_diag(&[j2(), j2()]) * 0.5;
    let b = block_diag(&[j2(), j2()]) * 3.0;
    let mut c = Matrix::identity(4, 4);
    c[(3, 3)] = 0.0;
    let err = ReducedLinearization::from_abc(&a, &b, &c, &tol()).unwrap_err();
    assert!(matches!(&err, Error::GenericityViolation(m) if m.contains("(d)")), "{err}");
}

#[test]
fn two_distinct_numbers() {
    // A = J₄, B = 4·J₄·diag(2, 2, 3, 3): ¼A⁻¹B = diag(2, 2, 3, 3).
    let a = block_diag(&[j2(), j2()]);
    let b = &a * Matrix::from_diagonal(&DVector::from_vec(vec![2.0, 2.0, 3.0, 3.0])) * 4.0;
    let direct = eigen_multiset(&(a.clone().try_inverse().unwrap() * &b * 0.25), &tol()).unwrap();
    assert!(multiset_equal(&direct, &[c(2.0), c(2.0), c(3.0), c(3.0)], &tol()));
    let rl = ReducedLinearization::from_abc(&a, &b, &Matrix::identity(4, 4), &tol()).unwrap();
    let cn = characteristic_numbers(&rl, &tol()).unwrap();
    assert!(multiset_equal(&cn.collapsed, &[c(2.0), c(3.0)], &tol()));
    assert_eq!(cn.distinct_count, 2);
    assert!(cn.route_residual < 1e-10);
}

#[test]
fn witness_examples() {
    let gp = normal_form(4, 4, &[2.0, 5.0]);
    let rl = reduce(&linearize_at_base(&gp, &tol()).unwrap(), gp.dims(), &tol()).unwrap();
    let w = linear_equivalence_witness(&rl, &rl, &tol()).unwrap().unwrap();
    assert!(w.residual_a < 1e-12 && w.residual_b < 1e-12, "{w:?}");

    let other = normal_form(4, 4, &[2.0, 3.0]);
    let rl2 = reduce(&linearize_at_base(&other, &tol()).unwrap(), other.dims(), &tol()).unwrap();
    assert!(linear_equivalence_witness(&rl, &rl2, &tol()).unwrap().is_none());
}

#[test]
fn witness_for_complex_pencil() {
    // ¼A⁻¹B has eigenvalues 1 ± 2i, each twice.
    let r = Matrix::from_row_slice(2, 2, &[1.0, 2.0, -2.0, 1.0]);
    let k = Matrix::from_row_slice(4, 4, &[0., 0., 1., 0., 0., 0., 0., 1., -1., 0., 0., 0., 0., -1., 0., 0.]);
    let b = &k * block_diag(&[r.clone(), r.transpose()]) * 4.0;
    let p = Matrix::from_fn(4, 4, |i, j| ((i * 7 + j * 3) % 5) as f64 - 2.0 + if i == j { 4.0 } else { 0.0 });
    let (a2, b2) = (p.transpose() * &k * &p, p.transpose() * &b * &p);
    let w = congruence_witness(&k, &b, &a2, &b2, &tol()).unwrap().unwrap();
    assert!(w.residual_a < 1e-9 && w.residual_b < 1e-9, "{w:?}");
}

#[test]
fn degenerate_spectrum_has_no_witness() {
    let a = block_diag(&[j2(), j2()]);
    let b = &a * 8.0;
    assert!(matches!(
        congruence_witness(&a, &b, &a, &b, &tol()),
        Err(Error::DegenerateSpectrum { distinct: 1, expected: 2 })
    ));
}

#[test]
fn equivalence_verdicts() {
    let v = decide_equivalence(&normal_form(2, 2, &[2.0]), &normal_form(2, 2, &[3.0]), &tol()).unwrap();
    assert_eq!(v.status, Status::NotEquivalent);
    assert_eq!(v.rule.as_deref(), Some("B"));

    let v = decide_equivalence(&normal_form(2, 2, &[2.0]), &normal_form(2, 2, &[2.0]), &tol()).unwrap();
    assert_eq!(v.status, Status::Equivalent);

    let v = decide_equivalence(&normal_form(2, 2, &[2.0]), &normal_form(3, 2, &[2.0]), &tol());
    assert!(matches!(v, Err(Error::DimensionMismatch(_))));
}

#[test]
fn k1_crossings_at_different_angles_are_equivalent() {
    let mu = Matrix::from_row_slice(4, 4, &[0., 0., 1., 0., 0., 0., 0., 1., -1., 0., 0., 0., 0., -1., 0., 0.]);
    let line = |v: [f64; 4]| Matrix::from_column_slice(4, 1, &v);
    let a = GermPair::from_linear(&mu, &line([1., 0., 0., 0.]), &line([0., 0., 1., 0.]), Dims::Equal(1), &tol()).unwrap();
    let b = GermPair::from_linear(&mu, &line([1., 0., 0., 0.]), &line([1., 1., 0.3, 0.]), Dims::Equal(1), &tol()).unwrap();
    let v = decide_equivalence(&a, &b, &tol()).unwrap();
    assert_eq!(v.status, Status::Equivalent);
    assert_eq!(v.rule.as_deref(), Some("A1"));
    assert_eq!(v.regime, Regime::ZeroTuple);
}

#[test]
fn functional_regime_is_undetermined_unless_values_differ() {
    let h = |a: &str, b: &str| {
        synthesize(&NormalFormSpec::with_hamiltonians(5, 6, vec![a.into(), b.into()]), &tol()).unwrap()
    };
    let v = decide_equivalence(&h("2 + u1", "3 + v1"), &h("3 - v1", "2 + u1*v1"), &tol()).unwrap();
    assert_eq!(v.status, Status::Undetermined);
    assert!(v.reason.unwrap().contains("functional moduli"));
    let v = decide_equivalence(&h("2 + u1", "3 + v1"), &h("2 + u1", "4 + v1"), &tol()).unwrap();
    assert_eq!(v.status, Status::NotEquivalent);
    assert_eq!(v.rule.as_deref(), Some("C"));
}

#[test]
fn moduli_examples() {
    assert_eq!(moduli_count(Dims::Equal(4), 4).unwrap(), Moduli::Finite(2));
    assert_eq!(moduli_count(Dims::Equal(6), 5).unwrap(), Moduli::Infinite);
    assert_eq!(moduli_count(Dims::Equal(1), 3).unwrap(), Moduli::Finite(0));
    assert!(moduli_count(Dims::Equal(6), 3).is_err());
    assert_eq!(serde_json::to_string(&Moduli::Infinite).unwrap(), "\"infinity\"");
}

#[test]
fn pull_back_preserves_numbers() {
    let gp = normal_form(3, 2, &[4.0]);
    let lt = linearize_at_base(&gp, &tol()).unwrap();
    let l = Matrix::from_fn(6, 6, |i, j| if i == j { 2.0 } else { 0.1 * (i as f64 - j as f64) });
    let moved = lt.pull_back(&l, &tol()).unwrap();
    let a = characteristic_numbers(&reduce(&lt, gp.dims(), &tol()).unwrap(), &tol()).unwrap();
    let b = characteristic_numbers(&reduce(&moved, gp.dims(), &tol()).unwrap(), &tol()).unwrap();
    assert!(multiset_equal(&a.collapsed, &b.collapsed, &tol()));
}
