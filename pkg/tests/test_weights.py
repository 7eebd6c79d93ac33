import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nlap_galerkin.errors import ParameterError
from nlap_galerkin.mesh import build_mesh
from nlap_galerkin.weights import (
    Weight, integrability_ok, validate_weight, weight_eval, weight_inf_on_ball, weight_norm,
    weight_sup)


def test_eval_examples():
    assert weight_eval(Weight("exponential", 1.0, 1.0), 0.0) == 1.0
    ball = Weight("constant-on-ball", rate=2.0, amplitude=1.0, radius=3.0)
    r = np.linspace(0, 3, 31)
    assert np.all(weight_eval(ball, r) == 1.0)
    out = weight_eval(ball, np.array([3.5, 4.0, 6.0]))
    assert np.allclose(out, np.exp(-2 * np.array([0.5, 1.0, 3.0])))
    assert weight_eval(Weight("power-decay", 1.5, 2.0), 1.0) == pytest.approx(2 * 2 ** -1.5)
    with pytest.raises(ParameterError):
        weight_eval(Weight("exponential"), -1.0)


def test_validation_examples():
    assert integrability_ok(Weight("power-decay", 1.0), 2, 1.5)
    validate_weight(Weight("power-decay", 1.0), 2, 1.5)
    with pytest.raises(ParameterError, match="N-q"):
        validate_weight(Weight("power-decay", 0.4), 2, 1.5)


@given(st.floats(0.05, 3), st.floats(1.05, 1.95))
@settings(max_examples=50, deadline=None)
def test_validation_rejects_exactly_power_violations(gamma, q):
    w = Weight("power-decay", gamma)
    ok = gamma > 2 - q
    assert integrability_ok(w, 2, q) == ok
    if ok and gamma * 2 / (2 - q) - 2 > 0.05:
        assert math.isfinite(validate_weight(w, 2, q))
    elif not ok:
        with pytest.raises(ParameterError):
            validate_weight(w, 2, q)


def test_invalid_weights():
    for kw in ({"kind": "gaussian"}, {"kind": "exponential", "amplitude": 0},
               {"kind": "exponential", "rate": -1}, {"kind": "tabulated", "table": ((0, 1),)},
               {"kind": "tabulated", "table": ((0, 1), (1, -1))}):
        with pytest.raises(ParameterError):
            Weight(**kw)


@pytest.mark.parametrize("w,N,s", [
    (Weight("exponential", 1.0, 1.0), 2, 4.0),
    (Weight("exponential", 0.5, 2.0), 3, 2.0),
    (Weight("power-decay", 2.0, 1.0), 2, 4.0),
    (Weight("constant-on-ball", 1.0, 1.0, 2.0), 2, 4.0),
])
def test_norm_against_mpmath(w, N, s):
    om = 2 * mp.pi ** (mp.mpf(N) / 2) / mp.gamma(mp.mpf(N) / 2)
    if w.kind == "exponential":
        a = lambda r: w.amplitude * mp.e ** (-w.rate * r)
        pts = [0, mp.inf]
    elif w.kind == "power-decay":
        a = lambda r: w.amplitude * (1 + r) ** (-w.rate)
        pts = [0, 1, mp.inf]
    else:
        a = lambda r: w.amplitude * (1 if r <= w.radius else mp.e ** (-w.rate * (r - w.radius)))
        pts = [0, w.radius, mp.inf]
    ref = (om * mp.quad(lambda r: a(r) ** s * r ** (N - 1), pts)) ** (1 / mp.mpf(s))
    assert weight_norm(w, N, s) == pytest.approx(float(ref), rel=1e-9)


def test_inf_on_ball_examples():
    assert weight_inf_on_ball(Weight("exponential", 1.0), 2.0) == pytest.approx(math.exp(-2))
    c = Weight("constant-on-ball", 1.0, 3.3, radius=5.0)
    assert weight_inf_on_ball(c, 4.0) == 3.3
    assert weight_sup(c) == 3.3
    with pytest.raises(ParameterError):
        weight_inf_on_ball(c, 0.0)


def test_inf_on_ball_tabulated_refinement_oracle():
    rs = np.linspace(0, 4, 9)
    vs = 1.5 + np.sin(2 * rs)
    w = Weight("tabulated", table=tuple(zip(rs.tolist(), vs.tolist())))
    coarse = weight_inf_on_ball(w, 3.0, build_mesh(3.0, 60))
    fine_grid = np.linspace(0, 3, 6001)
    fine = float(np.min(weight_eval(w, fine_grid)))
    assert coarse >= fine - 1e-12
    assert coarse - fine < 1e-3
    assert weight_sup(w) == pytest.approx(vs.max())


@given(st.sampled_from(["power-decay", "exponential", "constant-on-ball"]),
       st.floats(0.1, 20), st.floats(0.1, 20))
def test_inf_nonincreasing_in_R(kind, R1, R2):
    w = Weight(kind, 1.3, 2.0, 4.0)
    lo, hi = sorted((R1, R2))
    assert weight_inf_on_ball(w, hi) <= weight_inf_on_ball(w, lo)


@given(st.sampled_from(["power-decay", "exponential", "constant-on-ball"]), st.floats(0, 1e3))
def test_positive_and_bounded(kind, r):
    w = Weight(kind, 0.7, 1.9, 2.0)
    v = weight_eval(w, r)
    assert 0 <= v <= weight_sup(w)
    if r < 50:
        assert v > 0
