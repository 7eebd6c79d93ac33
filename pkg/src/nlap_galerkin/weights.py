"""Radial weights a(r) for the concave term lambda a(x) |u|^{q-2} u."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate
from scipy.interpolate import PchipInterpolator
from scipy.special import gamma, gammaincc

from .errors import ParameterError
from .mesh import sphere_measure

WEIGHT_KINDS = ("power-decay", "exponential", "constant-on-ball", "tabulated")
# kinds whose profile is nonincreasing in r, so inf over B_R is a(R)
DECREASING = ("power-decay", "exponential", "constant-on-ball")

INTEGRATION_CUTOFF = 1e4


@dataclass(frozen=True)
class Weight:
    """Radial weight.

    power-decay:      amplitude (1+r)^{-rate}
    exponential:      amplitude exp(-rate r)
    constant-on-ball: amplitude on r <= radius, amplitude exp(-rate (r-radius)) beyond
    tabulated:        monotone-cubic through `table`, exp(-rate (r-r_last)) beyond
    """

    kind: str
    rate: float = 1.0
    amplitude: float = 1.0
    radius: float = 1.0
    table: tuple = ()

    def __post_init__(self):
        if self.kind not in WEIGHT_KINDS:
            raise ParameterError(f"unknown weight kind {self.kind!r}")
        if self.amplitude <= 0:
            raise ParameterError("weight amplitude must be > 0")
        if self.rate <= 0:
            raise ParameterError("weight rate must be > 0")
        if self.kind == "constant-on-ball" and self.radius <= 0:
            raise ParameterError("constant-on-ball radius must be > 0")
        if self.kind == "tabulated":
            rs = np.array([r for r, _ in self.table], float)
            vs = np.array([v for _, v in self.table], float)
            if rs.size < 2 or rs[0] != 0.0 or np.any(np.diff(rs) <= 0):
                raise ParameterError("tabulated weight needs increasing radii starting at 0")
            if np.any(vs <= 0):
                raise ParameterError("tabulated weight must be positive")


def _tab_interp(w):
    rs = np.array([r for r, _ in w.table], float)
    vs = np.array([v for _, v in w.table], float)
    return PchipInterpolator(rs, vs, extrapolate=False), rs[-1], vs[-1]


def weight_eval(w: Weight, r):
    r_arr = np.asarray(r, dtype=float)
    if np.any(r_arr < 0):
        raise ParameterError("weight evaluated at negative radius")
    if w.kind == "power-decay":
        out = w.amplitude * (1.0 + r_arr) ** (-w.rate)
    elif w.kind == "exponential":
        out = w.amplitude * np.exp(-w.rate * r_arr)
    elif w.kind == "constant-on-ball":
        out = w.amplitude * np.exp(-w.rate * np.maximum(r_arr - w.radius, 0.0))
    else:
        interp, r_last, v_last = _tab_interp(w)
        inside = r_arr <= r_last
        out = np.where(inside, interp(np.minimum(r_arr, r_last)),
                       v_last * np.exp(-w.rate * np.maximum(r_arr - r_last, 0.0)))
    return out if out.ndim else float(out)


def weight_sup(w: Weight) -> float:
    if w.kind == "tabulated":
        return float(max(v for _, v in w.table))
    return w.amplitude


def weight_inf_on_ball(w: Weight, R: float, mesh=None) -> float:
    """inf of a over B_R: a(R) for decreasing kinds, else the minimum over quadrature points."""
    if R <= 0:
        raise ParameterError("R must be > 0")
    if w.kind in DECREASING:
        return float(weight_eval(w, R))
    if mesh is not None:
        pts = np.concatenate([mesh.nodes, mesh.qpts.ravel()])
    else:
        pts = np.linspace(0.0, R, 4001)
    pts = pts[pts <= R]
    return float(np.min(weight_eval(w, np.append(pts, R))))


def _tail_bound(w: Weight, N: int, s: float, cut: float) -> float:
    """Closed-form bound on int_cut^inf a^s r^{N-1} dr."""
    if w.kind == "power-decay":
        e = w.rate * s - N
        return w.amplitude ** s * cut ** (-e) / e
    # exponential-type tails: a <= A e^{-rate (r - r0)}; int_cut^inf r^{N-1} e^{-c r} dr
    r0 = w.radius if w.kind == "constant-on-ball" else 0.0
    if w.kind == "tabulated":
        r0 = w.table[-1][0]
        amp = w.table[-1][1]
    else:
        amp = w.amplitude
    c = w.rate * s
    # upper incomplete gamma Gamma(N, c cut) / c^N, times the prefactor
    return amp ** s * math.exp(c * r0) * gammaincc(N, c * cut) * gamma(N) / c ** N


def integrability_ok(w: Weight, N: int, q: float) -> bool:
    """Closed-form criterion for a in L^{N/(N-q)}: power decay needs rate > N - q."""
    if w.kind == "power-decay":
        return w.rate > N - q
    return True


def weight_norm(w: Weight, N: int, s: float) -> float:
    """||a||_{L^s(R^N)} for the radial weight: quadrature to r = 1e4 plus closed-form tail."""
    if w.kind == "power-decay" and w.rate * s <= N:
        return math.inf
    cut = INTEGRATION_CUTOFF
    pts = [1.0, 10.0, 100.0, 1000.0]
    if w.kind == "constant-on-ball":
        pts = sorted(set(pts + [w.radius]))
    if w.kind == "tabulated":
        pts = sorted(set(pts + [r for r, _ in w.table if 0 < r < cut]))
    total = 0.0
    edges = [0.0] + [x for x in pts if x < cut] + [cut]
    for lo, hi in zip(edges[:-1], edges[1:]):
        val, _ = integrate.quad(lambda r: weight_eval(w, r) ** s * r ** (N - 1), lo, hi,
                                limit=200, epsrel=1e-12)
        total += val
    total += _tail_bound(w, N, s, cut)
    return float((sphere_measure(N) * total) ** (1.0 / s))


def validate_weight(w: Weight, N: int, q: float) -> float:
    """Raise unless a is in L^{N/(N-q)} and bounded; return the norm."""
    if not integrability_ok(w, N, q):
        raise ParameterError(
            f"weight not in L^(N/(N-q)): power decay needs rate > N-q = {N - q}, got {w.rate}")
    norm = weight_norm(w, N, N / (N - q))
    if not math.isfinite(norm):
        raise ParameterError("weight integral diverges")
    return norm
