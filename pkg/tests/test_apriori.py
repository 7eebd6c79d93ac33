import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, strategies as st

from nlap_galerkin.apriori import (
    build_ledger, cap_fraction, decay_bound, offcentre_ball_norm, offcentre_sup, q_infinity,
    sup_bound, theta_exponent)
from nlap_galerkin.errors import ParameterError
from nlap_galerkin.mesh import GridFunction, build_mesh

from oracles import q_inf_oracle


@pytest.fixture(scope="module")
def L():
    return build_ledger(2, 10.0, 4.5, C_star=0.5, C_rho=2.0, A=0.1, R_star=1.0)


def test_ledger_example(L):
    assert L.P == pytest.approx(0.9, rel=1e-15)
    assert L.beta0 == pytest.approx(2 / 9, rel=1e-14)
    assert L.S1 == 4.5
    Q, rem = q_inf_oracle(0.9)
    assert L.Q_inf == pytest.approx(Q, rel=max(rem, 1e-12) * 2)
    assert L.Q_inf == pytest.approx(77756.42, rel=1e-6)
    assert theta_exponent(L) == pytest.approx((2 / 9) / ((20 / 9) * Q), rel=1e-11)


def test_ledger_errors():
    with pytest.raises(ParameterError):
        build_ledger(2, 8.0, 3.0, 1.0)
    with pytest.raises(ParameterError):
        build_ledger(2, 10.0, 5.5, 1.0)
    with pytest.raises(ParameterError):
        build_ledger(2, 10.0, 3.9, 1.0)
    with pytest.raises(ParameterError):
        build_ledger(2, 10.0, 4.5, 0.0)


def test_small_P_limit():
    L = build_ledger(2, 1e7, 4.5, 1.0)
    assert L.P < 1e-5
    assert L.S1 == pytest.approx(1 / (2 + L.beta0), rel=1e-5)
    assert L.Q_inf == pytest.approx(1.0, abs=1e-9)


def test_beta_recurrence(L):
    for n in range(1, 30):
        assert L.beta(n) + L.N == pytest.approx((L.N + L.beta(n - 1)) / L.P, rel=1e-13)
    assert L.beta(200) > 1e8


def test_S1_partial_sums(L):
    partial = math.fsum(1 / (L.N + L.beta(n)) for n in range(400))
    assert partial == pytest.approx(L.S1, abs=1e-10)


def test_S2_S3_against_mpmath(L):
    N, b0, P = L.N, mp.mpf(L.beta0), mp.mpf(L.P)
    Bn = lambda n: (N + b0) * P ** (-n)
    S2 = mp.nsum(lambda n: N / Bn(n) * mp.log(Bn(n)), [0, mp.inf])
    Dn = lambda n: mp.mpf(L.Cprime) * 2 ** (N * (n + 1))
    S3 = mp.nsum(lambda n: mp.log(L.C0 + Dn(n)) / Bn(n), [0, mp.inf])
    assert L.S2 == pytest.approx(float(S2), abs=1e-10)
    assert L.S3 == pytest.approx(float(S3), abs=1e-10)
    assert L.tails["S2"] < 1e-12 and L.tails["S3"] < 1e-12


def test_Q_n_increasing(L):
    Qs = [L.Q(n) for n in range(1, 60)]
    assert Qs[0] == pytest.approx(1 / (1 - 0.81))
    assert all(b > a for a, b in zip(Qs, Qs[1:]))
    assert Qs[-1] <= L.Q_inf


@given(st.floats(0.01, 0.99))
def test_q_infinity_oracle(P):
    Q, rem, _ = q_infinity(P)
    ref, ref_rem = q_inf_oracle(P)
    assert Q == pytest.approx(ref, rel=1e-10)
    assert Q > 1


def test_N3_defaults():
    L = build_ledger(3, 20.0, 6.5, 1.0)
    assert 0 < L.Theta < L.beta0 / (3 + L.beta0)
    assert math.isfinite(L.S3)


def test_sup_bound_properties(L):
    base = sup_bound(L, 0.0)
    assert sup_bound(L, 1 / L.C_star) == base
    assert sup_bound(L, 0.5 / L.C_star) == base
    vals = [sup_bound(L, x) for x in np.linspace(0, 100, 50)]
    assert all(b >= a for a, b in zip(vals, vals[1:]))
    assert base == pytest.approx(math.exp(L.S1 * math.log(L.C) + L.S2 + L.S3), rel=1e-13)


def test_decay_bound_examples(L):
    assert decay_bound(L, 0.0) == 0.0
    assert decay_bound(L, 1.0) == pytest.approx((2 * L.S1 * L.S2) ** (1 / (2 + L.beta0)))
    vals = [decay_bound(L, x) for x in np.geomspace(1e-30, 1e3, 50)]
    assert all(b >= a for a, b in zip(vals, vals[1:]))
    assert L.Theta < L.beta0 / (L.N + L.beta0)
    with pytest.raises(ParameterError):
        decay_bound(L, -1.0)


def test_cap_fraction_closed_forms():
    th = np.linspace(0, np.pi, 13)
    assert np.allclose(cap_fraction(2, np.cos(th)), th / np.pi, atol=1e-14)
    assert np.allclose(cap_fraction(3, np.cos(th)), (1 - np.cos(th)) / 2, atol=1e-14)


def test_offcentre_norm_constant_function():
    m = build_mesh(10.0, 2000)
    one = GridFunction(m, np.where(m.nodes < 10, 1.0, 0.0))
    assert offcentre_ball_norm(one, 3.0, 1.0, 2.0) == pytest.approx(math.sqrt(math.pi), rel=1e-3)
    assert offcentre_ball_norm(one, 0.0, 2.0, 1.0) == pytest.approx(4 * math.pi, rel=1e-12)


def test_offcentre_norm_against_planar_quadrature():
    m = build_mesh(10.0, 4000)
    u = GridFunction.from_callable(m, lambda r: np.exp(-r) * (10 - r) / 10)
    x0, rad, s = 1.5, 1.0, 3.0
    # Gauss-Legendre tensor rule in polar coordinates centred at x0
    xr, wr = np.polynomial.legendre.leggauss(600)
    rr, wr = (xr + 1) * rad / 2, wr * rad / 2
    th = np.linspace(0, 2 * np.pi, 1200, endpoint=False)
    R, T = np.meshgrid(rr, th, indexing="ij")
    vals = u(np.hypot(x0 + R * np.cos(T), R * np.sin(T))) ** s * R
    ref = float(np.sum(vals * wr[:, None]) * (2 * np.pi / th.size))
    assert offcentre_ball_norm(u, x0, rad, s) == pytest.approx(ref ** (1 / s), rel=1e-4)


def test_offcentre_sup_decreasing_profile():
    m = build_mesh(10.0, 1000)
    u = GridFunction.from_callable(m, lambda r: np.exp(-r) * (10 - r))
    assert offcentre_sup(u, 5.0, 1.0) == pytest.approx(float(u(4.0)), rel=1e-12)
    assert offcentre_sup(u, 0.5, 1.0) == pytest.approx(10.0)
