import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nlap_galerkin.brouwer import (
    FiniteField, brouwer_solve, certify_boundary, fd_jacobian, find_zero, sphere_directions)
from nlap_galerkin.errors import CertificateError, ParameterError, SearchBudgetError

from oracles import grid_zero_2d


def test_certify_identity_and_negation():
    for rho in (0.3, 1.0, 7.0):
        c = certify_boundary(FiniteField(3, lambda x: x, radius=rho), 64)
        assert c.passed and c.min_value == pytest.approx(rho ** 2, rel=1e-12)
        c = certify_boundary(FiniteField(3, lambda x: -x, radius=rho), 64)
        assert not c.passed and c.min_value < 0
        assert np.linalg.norm(c.failing_point) == pytest.approx(rho)


def test_certify_sample_count_guard():
    with pytest.raises(ParameterError):
        certify_boundary(FiniteField(4, lambda x: x), 7)


def test_certify_non_euclidean_norm():
    inf_norm = lambda x: float(np.max(np.abs(x)))
    c = certify_boundary(FiniteField(2, lambda x: x, norm=inf_norm, radius=1.0), 256)
    # on the unit l-inf sphere |x|_2^2 ranges over [1, 2]
    assert 1.0 - 1e-12 <= c.min_value <= 1.2


def test_sphere_directions_deterministic():
    a = sphere_directions(5, 40, seed=3)
    b = sphere_directions(5, 40, seed=3)
    assert np.array_equal(a, b) and a.shape == (40, 5)


def test_find_zero_examples():
    r = find_zero(FiniteField(1, lambda x: x - 0.5, radius=1.0), 1e-12)
    assert r.point[0] == pytest.approx(0.5, abs=1e-12)
    r = find_zero(FiniteField(2, lambda x: x), 1e-12)
    assert np.allclose(r.point, 0, atol=1e-12)


def cubic_field(x):
    return np.array([x[0] ** 3 - x[1] + 0.1, x[1] ** 3 + x[0] - 0.2])


def test_cubic_planar_field_against_grid_oracle():
    field = FiniteField(2, cubic_field, radius=2.0)
    res, cert = brouwer_solve(field, 1e-12, samples=256)
    assert cert.passed
    ref = grid_zero_2d(lambda X: np.array([X[0] ** 3 - X[1] + 0.1, X[1] ** 3 + X[0] - 0.2]), 2.0)
    assert np.allclose(res.point, ref, atol=1e-8)


def test_certificate_failure_is_distinct():
    with pytest.raises(CertificateError) as exc:
        brouwer_solve(FiniteField(2, lambda x: -x), 1e-8)
    assert not exc.value.certificate.passed


def test_budget_exhaustion_reports_best_residual():
    # |x|^2 + 1 has no zero; the field fails the boundary hypothesis but find_zero alone may be asked
    field = FiniteField(1, lambda x: x ** 2 + 1.0, radius=1.0)
    with pytest.raises(SearchBudgetError) as exc:
        find_zero(field, 1e-10, max_iter=20)
    assert exc.value.best_residual == pytest.approx(1.0, abs=1e-6)


def test_fd_jacobian_matches_analytic():
    x = np.array([0.3, -1.2])
    J = fd_jacobian(cubic_field, x)
    exact = np.array([[3 * 0.09, -1.0], [1.0, 3 * 1.44]])
    assert np.allclose(J, exact, atol=1e-5)


def random_field(rng, d):
    b = rng.uniform(-1, 1, d)
    b *= 0.3 * rng.uniform() / np.linalg.norm(b)
    C = rng.standard_normal((d, d))
    C /= np.linalg.norm(C, 2)
    return lambda x: x + b + 0.1 * (C @ x) ** 2 + 0.1 * x ** 3


@given(st.integers(1, 6), st.integers(0, 2 ** 32 - 1))
@settings(max_examples=40, deadline=None)
def test_random_coercive_fields(d, seed):
    rng = np.random.default_rng(seed)
    F = random_field(rng, d)
    field = FiniteField(d, F, radius=1.0)
    res, cert = brouwer_solve(field, 1e-8, samples=max(64, 2 * d))
    assert cert.passed
    assert np.linalg.norm(F(res.point)) <= 1e-8
    assert np.linalg.norm(res.point) <= 1.0 + 1e-9


@given(st.floats(0.01, 100), st.integers(0, 1000))
@settings(max_examples=25, deadline=None)
def test_scale_equivariance(c, seed):
    rng = np.random.default_rng(seed)
    F = random_field(rng, 3)
    z1 = find_zero(FiniteField(3, F), 1e-11).point
    z2 = find_zero(FiniteField(3, lambda x: c * F(x)), 1e-11 * c).point
    assert np.allclose(z1, z2, atol=1e-9)
    assert np.linalg.norm(c * F(z1)) == pytest.approx(c * np.linalg.norm(F(z1)), rel=1e-12,
                                                     abs=1e-300)


@given(st.integers(0, 1000))
@settings(max_examples=30, deadline=None)
def test_norm_axioms_on_sampled_triples(seed):
    rng = np.random.default_rng(seed)
    W = rng.standard_normal((4, 4)) + 4 * np.eye(4)
    norm = lambda x: float(np.linalg.norm(W @ x))
    x, y = rng.standard_normal((2, 4))
    c = rng.normal()
    assert norm(x + y) <= norm(x) + norm(y) + 1e-12
    assert norm(c * x) == pytest.approx(abs(c) * norm(x))
    field = FiniteField(4, lambda z: z, norm=norm, radius=2.0)
    res = find_zero(field, 1e-12)
    assert norm(res.point) <= 2.0


def test_invalid_field():
    with pytest.raises(ParameterError):
        FiniteField(0, lambda x: x)
    with pytest.raises(ParameterError):
        FiniteField(1, lambda x: x, radius=0)
    with pytest.raises(ParameterError):
        find_zero(FiniteField(1, lambda x: x), 0.0)
