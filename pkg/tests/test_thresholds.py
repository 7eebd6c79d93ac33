import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from nlap_galerkin.errors import ParameterError
from nlap_galerkin.mesh import build_mesh
from nlap_galerkin.nonlinearity import ProblemParams
from nlap_galerkin.thresholds import (
    C_Lambda, H_eval, Q_eval, compute_rho_lambda_star, estimate_constants,
    nonexistence_certificate, principal_eigenvalue, random_profiles, solve_t1, tm_radius)
from nlap_galerkin.thresholds import _rayleigh_parts
from nlap_galerkin.weights import Weight

from oracles import H_mp, bessel_sigma1, shooting_eigenvalue

BASE = dict(N=2, p=4.0, q=1.5, alpha=1.0)


def test_rho_lambda_star_examples():
    # alpha small so the TM radius exceeds 1 and rho = (2 K2 C)^{-1/(p-N)} = 1
    P = ProblemParams(N=2, p=4, q=1.5, alpha=0.1)
    sc = compute_rho_lambda_star(P, K1=1.0, K2=0.5, C_alphaN=1.0)
    assert sc.rho == 1.0
    assert sc.lambda_star == 0.25
    sc = compute_rho_lambda_star(P, K1=1.0, K2=1.0, C_alphaN=1.0)
    assert sc.rho == pytest.approx(2 ** -0.5, rel=1e-15)
    assert tm_radius(2, 1.0) == pytest.approx(0.25 * math.sqrt(2 * math.pi), rel=1e-15)
    sc = compute_rho_lambda_star(ProblemParams(**BASE), 1.0, 1e-3, 1.0)
    assert sc.rho == pytest.approx(0.626657, abs=1e-6)


def test_rho_rejects_nonpositive():
    with pytest.raises(ParameterError):
        compute_rho_lambda_star(ProblemParams(**BASE), 0.0, 1.0, 1.0)


@given(st.floats(1e-3, 1e3), st.floats(1e-3, 1e3), st.floats(1e-3, 1e3),
       st.floats(1.05, 1.95), st.floats(2.1, 8))
def test_lambda_star_identity(K1, K2, C, q, p):
    P = ProblemParams(N=2, p=p, q=q)
    sc = compute_rho_lambda_star(P, K1, K2, C)
    assert sc.lambda_star > 0
    assert sc.lambda_star * 4 * K1 == pytest.approx(sc.rho ** (2 - q), rel=1e-14)
    # at lambda < lambda*, varsigma > rho^N / 4
    lam = 0.999 * sc.lambda_star
    vs = compute_rho_lambda_star(P.with_lambda(lam), K1, K2, C).varsigma
    assert vs > sc.rho ** 2 / 4


def test_H_examples():
    assert H_eval(0.0, **BASE) == 0.0
    assert H_eval(1.0, **BASE) == pytest.approx(2 * (math.e - 1) + 2 * math.e, rel=1e-14)
    for t in (0.3, 1.7, 4.0):
        assert H_eval(t, **BASE) == pytest.approx(float(H_mp(t, **BASE)), rel=1e-13)
        assert H_eval(t, 3, 9.0, 2.5, 0.7) == pytest.approx(float(H_mp(t, 3, 9.0, 2.5, 0.7)),
                                                            rel=1e-13)
    with pytest.raises(ParameterError):
        H_eval(-1.0, **BASE)


@pytest.mark.parametrize("N,p,q,alpha", [(2, 4.0, 1.5, 1.0), (2, 2.5, 1.1, 0.3),
                                         (3, 5.0, 2.0, 1.0), (4, 6.0, 3.5, 2.0)])
def test_H_strictly_increasing(N, p, q, alpha):
    t = np.linspace(1e-3, 10, 5000)
    t = t[alpha * t ** (N / (N - 1)) < 700]
    assert np.all(np.diff(H_eval(t, N, p, q, alpha)) > 0)


def test_t1_examples():
    Lam = H_eval(1.0, **BASE) / 0.5
    assert solve_t1(Lam, **BASE) == pytest.approx(1.0, abs=1e-11)
    t1 = solve_t1(10.0, **BASE)
    assert abs(H_eval(t1, **BASE) - 10 * 0.5) <= 1e-10
    grid = np.linspace(1e-4, 3, 300001)
    h = H_eval(grid, **BASE) - 5.0
    crossings = np.flatnonzero(np.diff(np.sign(h)) != 0)
    assert crossings.size == 1
    assert abs(grid[crossings[0]] - t1) <= 1e-5
    with pytest.raises(ParameterError):
        solve_t1(0.0, **BASE)


def test_t1_and_C_Lambda_monotone_in_Lambda():
    lams = np.geomspace(1e-3, 1e4, 40)
    t1 = np.array([solve_t1(L, **BASE) for L in lams])
    CL = np.array([C_Lambda(t, L, **BASE) for t, L in zip(t1, lams)])
    assert np.all(np.diff(t1) > 0)
    assert np.all(np.diff(CL) > 0)


@pytest.mark.parametrize("Lam", [0.01, 1.0, 10.0, 300.0])
def test_C_Lambda_is_global_min(Lam):
    t1 = solve_t1(Lam, **BASE)
    CL = C_Lambda(t1, Lam, **BASE)
    ts = np.concatenate([np.linspace(t1 * 1e-3, t1, 100, endpoint=False),
                         np.linspace(t1, min(4 * t1, 5.0), 101)[1:]])
    assert np.all(Q_eval(ts, Lam, **BASE) >= CL - 1e-12 * CL)
    # lower-bound sanity over the sampled range
    assert CL >= Lam * np.min(ts ** (1.5 - 2))
    # Q blows up at both ends and its sampled argmin sits within one cell of t1
    grid = np.linspace(1e-3, 4.0, 40001)
    Q = Q_eval(grid, Lam, **BASE)
    assert Q[0] > 10 * CL and Q[-1] > 10 * CL
    assert abs(grid[np.argmin(Q)] - t1) <= grid[1] - grid[0]


@pytest.fixture(scope="module")
def eig_N2():
    m = build_mesh(1.0, 400, N=2)
    return m, principal_eigenvalue(m, 2)


def test_eigenvalue_N2_against_bessel_and_shooting(eig_N2):
    _, (sigma, phi1) = eig_N2
    assert sigma == pytest.approx(bessel_sigma1(), rel=1e-4)
    assert sigma == pytest.approx(shooting_eigenvalue(2, 1.0), rel=1e-4)
    assert np.min(phi1.values[:-1]) > 0
    assert phi1.sup() == pytest.approx(1.0)


def test_eigenvalue_local_minimality(eig_N2):
    m, (sigma, phi1) = eig_N2
    rng = np.random.default_rng(0)
    x = phi1.values[:-1]
    for _ in range(100):
        y = x + 1e-2 * rng.standard_normal(x.size)
        num, den, *_ = _rayleigh_parts(m, y, 2)
        assert num / den >= sigma * (1 - 1e-12)


def test_eigenvalue_scaling_N2():
    vals = {R: principal_eigenvalue(build_mesh(R, 200, N=2), 2)[0] for R in (1.0, 2.0, 4.0)}
    for R in (2.0, 4.0):
        assert vals[R] * R ** 2 == pytest.approx(vals[1.0], rel=1e-10)


def test_eigenvalue_N3_against_shooting():
    sigma, phi1 = principal_eigenvalue(build_mesh(1.0, 400, N=3), 3)
    assert sigma == pytest.approx(shooting_eigenvalue(3, 1.0), rel=2e-3)
    assert np.min(phi1.values[:-1]) > 0
    s2, _ = principal_eigenvalue(build_mesh(2.0, 400, N=3), 3)
    assert s2 * 8 == pytest.approx(sigma, rel=1e-6)


def test_nonexistence_sweep():
    m = build_mesh(1.0, 200, N=2)
    P = ProblemParams(**BASE)
    w = Weight("exponential", 1.0)
    sigma, _ = principal_eigenvalue(m, 2)
    lams = np.geomspace(1e-4, 1e4, 25)
    reps = [nonexistence_certificate(l, 1.0, 0.1, m, P, w, sigma) for l in lams]
    flags = [r.certified for r in reps]
    assert not flags[0] and flags[-1]
    first = flags.index(True)
    assert all(flags[first:])
    assert reps[0].Lambda == pytest.approx(1e-4 * math.exp(-1))
    for r in reps:
        assert r.certified == (r.C_Lambda >= r.sigma1 + r.delta + 1)


def test_constants_estimation_properties():
    m = build_mesh(4.0, 200)
    P = ProblemParams(**BASE)
    w = Weight("exponential", 1.0)
    a = estimate_constants(m, P, w, n_profiles=20, seed=1)
    b = estimate_constants(m, P, w, n_profiles=20, seed=1)
    c = estimate_constants(m, P, w, n_profiles=40, seed=1)
    assert a == b
    assert all(v > 0 for v in a.values())
    # the first 20 profiles of the larger sample are the same, so maxima can only grow
    assert all(c[k] >= a[k] for k in a)
    prof = random_profiles(m, 5, seed=2)
    assert np.all(prof[:, -1] == 0) and np.all(prof[:, :-1] > 0)
