import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from scipy import integrate

import mbp.verify as verify
from mbp.diffops import (
    PolyDiffOp,
    build_bochner_operator,
    build_tilde_operator,
    conjugate_by_unipotent,
    eigenvalue_sequence,
)
from mbp.orthopoly import check_eigenfunction, monic_sequence
from mbp.polyops import unipotent_factor, unipotent_inverse
from mbp.verify import (
    CHECK_NAMES,
    SuiteOptions,
    absolute_mass,
    commutant_dimension,
    counterexample_fixture,
    quadrature_oracle_moment,
    run_suite,
)
from mbp.weights import MatrixWeightSpec, evaluate_weight, matrix_moments

from conftest import CORRUPTED, load_fixture

# -- commutant ----------------------------------------------------------------


def E(i, j, N=2):
    M = np.zeros((N, N))
    M[i, j] = 1.0
    return M


def test_commutant_of_matrix_units_is_scalar():
    assert commutant_dimension([E(0, 1), E(1, 0)]) == 1


def test_commutant_of_identity_is_everything():
    assert commutant_dimension([np.eye(3)]) == 9


def test_commutant_of_zero_is_everything():
    assert commutant_dimension([np.zeros((2, 2))]) == 4


@given(d=arrays(np.float64, (4,), elements=st.floats(-5, 5), unique=True).filter(lambda v: np.min(np.diff(np.sort(v))) > 1e-2))
def test_commutant_of_distinct_diagonal_is_diagonal(d):
    # Conjugating by a fixed invertible matrix must not change the dimension.
    S = np.eye(4) + np.triu(np.ones((4, 4)), 1)
    X = S @ np.diag(d) @ np.linalg.inv(S)
    assert commutant_dimension([X]) == 4


def test_commutant_is_scale_invariant():
    assert commutant_dimension([1e8 * E(0, 1), 1e-8 * E(1, 0)]) == 1


def test_commutant_needs_matrices():
    with pytest.raises(ValueError):
        commutant_dimension([])


def test_lambda_commutant_for_n2_fixture():
    D = build_bochner_operator(load_fixture("hermite_2x2"))
    assert commutant_dimension(eigenvalue_sequence(D, 5).values) == 1


@pytest.mark.parametrize("name", ["hermite_n3", "hermite_n4", "laguerre_n4", "jacobi_n4"])
def test_lambda_commutant_is_not_scalar_beyond_n2(name):
    # Lambda_n(D) = Lambda_0 + n X (+ scalar) and both non-scalar parts live in
    # the even columns, so for N >= 3 they leave an N-dimensional commutant.
    spec = load_fixture(name)
    D = build_bochner_operator(spec)
    assert commutant_dimension(eigenvalue_sequence(D, 5).values) == spec.N


@pytest.mark.parametrize("name", ["hermite_n3", "hermite_n4", "laguerre_n3", "jacobi_n4"])
def test_polynomial_coefficients_pin_the_commutant(name):
    spec = load_fixture(name)
    seq = monic_sequence(matrix_moments(spec, 11), 5)
    lam = list(eigenvalue_sequence(build_bochner_operator(spec), 5).values)
    coeffs = [c for P in seq.P[1:] for c in P.coeffs[:-1]]
    assert commutant_dimension(lam + coeffs) == 1


def test_reducible_control():
    spec = MatrixWeightSpec.hermite([1.0, 0.0], [0.0])
    Dt = build_tilde_operator(spec)
    assert commutant_dimension(eigenvalue_sequence(Dt, 5).values) == 4
    seq = monic_sequence(matrix_moments(spec, 11), 5)
    coeffs = [c for P in seq.P[1:] for c in P.coeffs[:-1]]
    assert commutant_dimension(list(eigenvalue_sequence(Dt, 5).values) + coeffs) == 2


# -- quadrature oracle --------------------------------------------------------


@pytest.mark.parametrize("name", ["hermite_n3", "laguerre_2x2", "jacobi_2x2"])
def test_quadrature_oracle_agrees_with_closed_forms(name):
    spec = load_fixture(name)
    M = matrix_moments(spec, 12)
    for k in (0, 5, 12):
        Q = quadrature_oracle_moment(spec, k)
        np.testing.assert_allclose(M[k], Q, rtol=1e-8, atol=1e-9)


@pytest.mark.parametrize("name,support", [("hermite_n3", (-np.inf, np.inf)), ("jacobi_2x2", (-1.0, 1.0))])
@pytest.mark.parametrize("k", [1, 2, 3])
def test_absolute_mass_bounds_the_absolute_integrand(name, support, k):
    spec = load_fixture(name)
    bound = absolute_mass(matrix_moments(spec, 4), k)
    for i in range(spec.N):
        for j in range(spec.N):
            f = lambda x: abs(x**k * evaluate_weight(spec, x)[i, j])
            mass, _ = integrate.quad(f, *support, limit=200)
            assert mass <= bound[i, j] * (1 + 1e-9)


def test_quadrature_oracle_order_cap():
    with pytest.raises(ValueError):
        quadrature_oracle_moment(load_fixture("hermite_2x2"), 13)


# -- counterexample -----------------------------------------------------------


@pytest.mark.parametrize("a", [1.0, 0.5, -2.0])
def test_counterexample_operator_is_an_eigenoperator_but_not_diagonalisable(a):
    spec, D = counterexample_fixture(a)
    seq = monic_sequence(matrix_moments(spec, 17), 8)
    assert check_eigenfunction(seq, D).max_residual < 1e-8
    back = conjugate_by_unipotent(D, unipotent_inverse(unipotent_factor(spec.A)))
    assert not back.is_diagonal(1e-6)


# -- suite --------------------------------------------------------------------


def test_suite_passes_on_2x2_hermite():
    report = run_suite(load_fixture("hermite_2x2"))
    assert [c.name for c in report.checks] == list(CHECK_NAMES)
    assert report.passed and report.verdict == "pass"
    doc = report.to_dict()
    assert doc["schema"] == "mbp/1" and doc["passed"] == doc["total"] == 13


def test_suite_is_deterministic_apart_from_timing():
    spec = load_fixture("hermite_n3")
    a = run_suite(spec).to_dict(timing=False)
    b = run_suite(spec).to_dict(timing=False)
    assert a == b
    assert "runtime_ms" not in a["checks"][0]


@pytest.mark.parametrize("name", [n for n in CORRUPTED if n != "bad_jacobi_sum"])
def test_invalid_spec_skips_everything(name):
    report = run_suite(load_fixture(name))
    assert not report.valid and not report.passed
    assert all(c.status == "skipped" for c in report.checks)
    assert report.violations


def test_jacobi_sum_violation_keeps_weight_checks():
    report = run_suite(load_fixture("bad_jacobi_sum"))
    status = {c.name: c.status for c in report.checks}
    for name in CHECK_NAMES[4:12]:
        assert status[name] == "skipped"
    for name in ("moments_vs_quadrature", "weight_positivity", "monic_dual_path", "three_term_recurrence"):
        assert status[name] == "pass"
    assert report.verdict == "fail"
    assert report.violations[0]["name"] == "JacobiSumViolation"


def test_fast_suite_skips_expensive_checks():
    report = run_suite(load_fixture("hermite_2x2"), SuiteOptions(suite="fast"))
    status = {c.name: c.status for c in report.checks}
    assert status["moments_vs_quadrature"] == status["counterexample"] == "skipped"
    assert report.passed
    assert report.record("eigenfunction").detail.startswith("D^1..D^2")


def test_wrong_operator_is_caught(monkeypatch):
    real = verify.build_bochner_operator

    def perturbed(spec):
        return real(spec) + PolyDiffOp.zero_order(1e-4 * np.ones((spec.N, spec.N)))

    monkeypatch.setattr(verify, "build_bochner_operator", perturbed)
    report = run_suite(load_fixture("hermite_2x2"), SuiteOptions(suite="fast"))
    status = {c.name: c.status for c in report.checks}
    assert status["eigenfunction"] == status["symmetry"] == status["diagonal_conjugation"] == "fail"
    assert status["weight_positivity"] == "pass"
    assert report.verdict == "fail"
    assert report.record("eigenfunction").residual > 1e-8


def test_tolerance_option_is_applied():
    report = run_suite(load_fixture("hermite_n4"), SuiteOptions(suite="fast", tolerance=1e-14))
    assert report.record("eigenfunction").status == "fail"
    assert report.record("eigenfunction").tolerance == 1e-14
