"""Critical-growth nonlinearities, their primitives and Strauss approximations.

The canonical right-hand side is the odd function

    f(t) = |t|^{p-2} t * phi_N(alpha |t|^{N/(N-1)}),

where phi_N is the exponential with its first N-1 Taylor terms removed.
Everything here is vectorised over numpy arrays; scalars in give scalars out.
"""
from __future__ import annotations

import math
import threading
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import integrate
from scipy.interpolate import PchipInterpolator

from .errors import ParameterError, QuadratureError, RangeError

KINDS = ("canonical", "sine-modulated", "positive-part-sine", "custom-tabulated", "zero")

# largest t with exp(t) finite in double precision
EXP_MAX = math.log(np.finfo(float).max)


@dataclass(frozen=True)
class ProblemParams:
    """Parameters of -Delta_N u + |u|^{N-2}u = lam a(x)|u|^{q-2}u + f(u)."""

    N: int = 2
    p: float = 4.0
    q: float = 1.5
    alpha: float = 1.0
    a1: float = 1.0
    lam: float = 0.0
    weight_gamma: float | None = None

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 2:
            raise ParameterError(f"N must be an integer >= 2, got {self.N}")
        if not (1.0 < self.q < self.N < self.p):
            raise ParameterError(
                f"need 1<q<N<p, got q={self.q}, N={self.N}, p={self.p}")
        if self.alpha <= 0:
            raise ParameterError(f"alpha must be > 0, got {self.alpha}")
        if self.a1 <= 0:
            raise ParameterError(f"a1 must be > 0, got {self.a1}")
        if self.lam < 0:
            raise ParameterError(f"lambda must be >= 0, got {self.lam}")
        if self.weight_gamma is not None and self.weight_gamma <= self.N - self.q:
            raise ParameterError(
                f"weight_gamma > N-q required, got {self.weight_gamma} <= {self.N - self.q}")

    @property
    def Nprime(self) -> float:
        return self.N / (self.N - 1)

    def with_lambda(self, lam: float) -> "ProblemParams":
        return ProblemParams(self.N, self.p, self.q, self.alpha, self.a1, lam, self.weight_gamma)


@dataclass(frozen=True)
class Nonlinearity:
    kind: str
    params: ProblemParams = field(default_factory=ProblemParams)
    table: tuple = ()

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ParameterError(f"unknown nonlinearity kind {self.kind!r}")
        if self.kind == "custom-tabulated":
            _check_table(self.table)


def tabulated(params: ProblemParams, ts, fs) -> Nonlinearity:
    """Build a custom-tabulated nonlinearity, inserting (0, 0) if absent."""
    ts = np.asarray(ts, float)
    fs = np.asarray(fs, float)
    if ts.shape != fs.shape or ts.ndim != 1:
        raise ParameterError("table abscissae and values must be 1-D of equal length")
    if not np.any(ts == 0.0):
        ts = np.append(ts, 0.0)
        fs = np.append(fs, 0.0)
    order = np.argsort(ts)
    table = tuple(zip(ts[order].tolist(), fs[order].tolist()))
    return Nonlinearity("custom-tabulated", params, table)


def _check_table(table):
    if len(table) < 3:
        raise ParameterError("tabulated nonlinearity needs at least 3 samples")
    ts = np.array([t for t, _ in table])
    fs = np.array([v for _, v in table])
    if np.any(np.diff(ts) <= 0):
        raise ParameterError("table abscissae must be strictly increasing")
    if np.any(ts * fs < 0):
        bad = ts[ts * fs < 0]
        raise ParameterError(f"sign condition t*f(t) >= 0 violated at t={bad.tolist()}")
    zero = ts == 0.0
    if not zero.any() or fs[zero][0] != 0.0:
        raise ParameterError("tabulated f must contain the sample (0, 0)")


@lru_cache(maxsize=64)
def _pchip(table):
    ts = np.array([t for t, _ in table])
    fs = np.array([v for _, v in table])
    interp = PchipInterpolator(ts, fs, extrapolate=False)
    return interp, interp.antiderivative()


# ---------------------------------------------------------------- phi_N

def _tail_series(m, t):
    """sum_{i >= m} t^i / i! for 0 <= t < m + 1 (no cancellation)."""
    term = t ** m / math.factorial(m)
    total = term.copy()
    i = m
    while True:
        i += 1
        term = term * t / i
        total += term
        if np.all(term <= 1e-17 * total):
            return total


def phi(j: int, t):
    """e^t - sum_{i=0}^{j-2} t^i/i!; for j <= 1 the subtracted sum is empty."""
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < 0):
        raise ParameterError("phi is defined for t >= 0 only")
    if np.any(t_arr > EXP_MAX):
        bad = float(t_arr.max())
        raise RangeError(f"exp overflow: phi argument {bad} > {EXP_MAX:.3f}", where=bad)
    m = max(j - 1, 0)
    if m == 0:
        out = np.exp(t_arr)
    elif m == 1:
        out = np.expm1(t_arr)
    else:
        out = np.empty_like(t_arr)
        small = t_arr < max(j, 1)
        if np.any(small):
            out[small] = _tail_series(m, t_arr[small])
        big = ~small
        if np.any(big):
            tb = t_arr[big]
            partial = sum(tb ** i / math.factorial(i) for i in range(m))
            out[big] = np.exp(tb) - partial
    return out if out.ndim else float(out)


def phi_N(N: int, t):
    return phi(N, t)


def log_phi(j: int, t):
    """log(phi_j(t)) without overflow; -inf at t = 0 when j >= 2."""
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < 0):
        raise ParameterError("phi is defined for t >= 0 only")
    out = np.empty_like(t_arr)
    moderate = t_arr <= 700.0
    with np.errstate(divide="ignore"):
        if np.any(moderate):
            out[moderate] = np.log(phi(j, t_arr[moderate]))
        big = ~moderate
        if np.any(big):
            tb = t_arr[big]
            m = max(j - 1, 0)
            # partial sum times e^{-t}, evaluated in log space
            corr = sum(np.exp(i * np.log(tb) - math.lgamma(i + 1) - tb) for i in range(m))
            out[big] = tb + np.log1p(-corr)
    return out if out.ndim else float(out)


# ---------------------------------------------------------------- f and G

def _growth_arg(nl, t):
    P = nl.params
    return P.alpha * np.abs(t) ** P.Nprime


def f_eval(nl: Nonlinearity, t):
    """Evaluate f(t); raises RangeError when the exponential overflows."""
    t_arr = np.asarray(t, dtype=float)
    P = nl.params
    kind = nl.kind
    if kind == "zero":
        out = np.zeros_like(t_arr)
    elif kind == "custom-tabulated":
        interp, _ = _pchip(nl.table)
        out = interp(t_arr)
        if np.any(np.isnan(out)):
            raise ParameterError(
                f"t outside tabulated range [{nl.table[0][0]}, {nl.table[-1][0]}]")
    else:
        arg = _growth_arg(nl, t_arr)
        if np.any(arg > EXP_MAX):
            bad = t_arr.flat[int(np.argmax(arg))]
            raise RangeError(f"f overflow at t={bad}", where=float(bad))
        base = np.abs(t_arr) ** (P.p - 2) * t_arr * phi(P.N, arg)
        if kind == "canonical":
            out = base
        elif kind == "sine-modulated":
            out = base * np.sin(t_arr) ** 2
        else:
            out = base * np.maximum(np.sin(t_arr), 0.0)
        if not np.all(np.isfinite(out)):
            bad = t_arr.flat[int(np.argmax(~np.isfinite(out)))]
            raise RangeError(f"f overflow at t={bad}", where=float(bad))
    return out if out.ndim else float(out)


_G_CACHE: dict = {}
_G_LOCK = threading.Lock()


def _kinks(nl, lo, hi):
    if nl.kind == "positive-part-sine":
        first = math.ceil(lo / math.pi)
        last = math.floor(hi / math.pi)
        return [m * math.pi for m in range(first, last + 1) if lo < m * math.pi < hi]
    if nl.kind == "custom-tabulated":
        return [t for t, _ in nl.table if lo < t < hi]
    return []


def primitive_G(nl: Nonlinearity, t: float, tol: float = 1e-12) -> float:
    """G(t) = int_0^t f by adaptive Gauss-Kronrod quadrature (cached).

    The returned value has estimated error <= max(tol, 1e-12 |G(t)|); the
    relative floor is needed once G exceeds ~1e4 in magnitude.
    """
    if tol <= 0:
        raise ParameterError("tol must be positive")
    t = float(t)
    if t == 0.0 or nl.kind == "zero":
        return 0.0
    key = (nl, t, tol)
    with _G_LOCK:
        if key in _G_CACHE:
            return _G_CACHE[key]
    if nl.kind == "custom-tabulated":
        _, anti = _pchip(nl.table)
        if not nl.table[0][0] <= t <= nl.table[-1][0]:
            raise ParameterError(f"t={t} outside tabulated range")
        value = float(anti(t) - anti(0.0))
    else:
        lo, hi = min(0.0, t), max(0.0, t)
        pts = _kinks(nl, lo, hi) or None
        value, err, *_ = integrate.quad(lambda s: f_eval(nl, s), 0.0, t, epsabs=tol,
                                        epsrel=1e-13, limit=500, points=pts,
                                        full_output=1)
        if err > max(tol, 1e-12 * abs(value)):
            raise QuadratureError(f"G({t}) did not converge", achieved=err)
    with _G_LOCK:
        _G_CACHE[key] = value
    return value


_GL_X, _GL_W = np.polynomial.legendre.leggauss(10)


def _gauss_mean(nl, a, w, panels):
    loc = ((np.arange(panels)[:, None] + (_GL_X + 1.0) / 2.0) / panels).ravel()
    pts = a[:, None] + w[:, None] * loc[None, :]
    return f_eval(nl, pts) @ np.tile(_GL_W / (2.0 * panels), panels)


def _smooth_mean(nl, a, w, rtol):
    out = _gauss_mean(nl, a, w, 1)
    todo = np.arange(a.size)
    panels = 1
    while todo.size and panels < 4096:
        panels *= 2
        fine = _gauss_mean(nl, a[todo], w[todo], panels)
        done = np.abs(fine - out[todo]) <= rtol * np.abs(fine)
        out[todo] = fine
        todo = todo[~done]
    if todo.size:
        raise QuadratureError("interval mean did not converge",
                              achieved=float(np.max(np.abs(out[todo]))))
    return out


def interval_mean(nl: Nonlinearity, a, w, rtol: float = 1e-13):
    """(1/w) int_a^{a+w} f for w > 0, vectorised.

    The width enters only through the node positions, so k * int_s^{s+1/k} f
    keeps full relative accuracy even when 1/k is far below the spacing of s.
    """
    a_arr, w_arr = np.broadcast_arrays(np.asarray(a, float), np.asarray(w, float))
    shape = a_arr.shape
    a_arr, w_arr = a_arr.ravel().copy(), w_arr.ravel().copy()
    if np.any(w_arr <= 0):
        raise ParameterError("interval width must be positive")
    if nl.kind == "zero" or a_arr.size == 0:
        out = np.zeros(a_arr.size)
    elif nl.kind == "custom-tabulated":
        _, anti = _pchip(nl.table)
        wide = w_arr > 1e-6 * np.maximum(1.0, np.abs(a_arr))
        out = np.empty(a_arr.size)
        out[wide] = (anti(a_arr[wide] + w_arr[wide]) - anti(a_arr[wide])) / w_arr[wide]
        out[~wide] = f_eval(nl, a_arr[~wide] + w_arr[~wide] / 2)
        if np.any(np.isnan(out)):
            raise ParameterError("interval outside tabulated range")
    elif nl.kind == "positive-part-sine":
        # split at the kink m*pi inside the interval (widths here are below pi)
        c = np.pi * np.ceil(a_arr / np.pi)
        split = (c > a_arr) & (c < a_arr + w_arr)
        out = np.empty(a_arr.size)
        keep = ~split
        if keep.any():
            out[keep] = _smooth_mean(nl, a_arr[keep], w_arr[keep], rtol)
        if split.any():
            a_s, w_s, c_s = a_arr[split], w_arr[split], c[split]
            w1 = c_s - a_s
            w2 = a_s + w_s - c_s
            out[split] = (w1 * _smooth_mean(nl, a_s, w1, rtol)
                          + w2 * _smooth_mean(nl, c_s, w2, rtol)) / w_s
    else:
        out = _smooth_mean(nl, a_arr, w_arr, rtol)
    out = out.reshape(shape)
    return out if out.ndim else float(out)


def increment(nl: Nonlinearity, a, b, rtol: float = 1e-13):
    """G(b) - G(a) = int_a^b f, vectorised."""
    a_arr, b_arr = np.broadcast_arrays(np.asarray(a, float), np.asarray(b, float))
    lo, hi = np.minimum(a_arr, b_arr), np.maximum(a_arr, b_arr)
    width = hi - lo
    out = np.zeros(width.shape)
    nz = width > 0
    if np.any(nz):
        out[nz] = width[nz] * interval_mean(nl, lo[nz], width[nz], rtol)
    out = np.where(b_arr >= a_arr, out, -out)
    return out if out.ndim else float(out)


# ---------------------------------------------------------------- Strauss f_k

def strauss_fk(nl: Nonlinearity, k: int, s):
    """Lipschitz approximation f_k of f by difference quotients of G.

    Each branch k[G(b) - G(a)] with b - a = 1/k is the mean of f over [a, b].
    """
    if k < 1:
        raise ParameterError("k must be >= 1")
    s_arr = np.asarray(s, dtype=float)
    flat = s_arr.ravel()
    out = np.zeros_like(flat)
    kf = float(k)
    inv = 1.0 / kf

    far_neg = flat <= -kf
    mid_neg = (flat > -kf) & (flat < -inv)
    near_neg = (flat >= -inv) & (flat < 0.0)
    near_pos = (flat > 0.0) & (flat <= inv)
    mid_pos = (flat > inv) & (flat < kf)
    far_pos = flat >= kf

    if far_neg.any():
        out[far_neg] = interval_mean(nl, -kf - inv, inv)
    if mid_neg.any():
        out[mid_neg] = interval_mean(nl, flat[mid_neg] - inv, inv)
    if near_neg.any():
        out[near_neg] = -kf * flat[near_neg] * interval_mean(nl, -2 * inv, inv)
    if near_pos.any():
        out[near_pos] = kf * flat[near_pos] * interval_mean(nl, inv, inv)
    if mid_pos.any():
        out[mid_pos] = interval_mean(nl, flat[mid_pos], inv)
    if far_pos.any():
        out[far_pos] = interval_mean(nl, kf, inv)
    out = out.reshape(s_arr.shape)
    return out if out.ndim else float(out)


# ---------------------------------------------------------------- checks

@dataclass
class GrowthReport:
    n_points: int
    violations: list

    @property
    def ok(self) -> bool:
        return not self.violations


def _log_growth_bound(P, t):
    at = np.abs(t)
    with np.errstate(divide="ignore"):
        return math.log(P.a1) + P.p * np.log(at) + log_phi(P.N, P.alpha * at ** P.Nprime)


def check_growth(nl: Nonlinearity, grid, rtol: float = 1e-12) -> GrowthReport:
    """Check 0 <= t f(t) <= a1 |t|^p phi_N(alpha |t|^{N'}) on every grid point."""
    t = np.asarray(grid, dtype=float).ravel()
    tf = t * f_eval(nl, t)
    bad = tf < 0
    pos = tf > 0
    with np.errstate(divide="ignore"):
        lhs = np.log(np.where(pos, tf, 1.0))
    over = pos & (lhs > _log_growth_bound(nl.params, t) + rtol * np.maximum(1.0, np.abs(lhs)))
    return GrowthReport(t.size, t[bad | over].tolist())


def _envelope_constants(P):
    C1 = P.a1 * 2.0 ** P.p
    C2 = P.a1 * 2.0 ** (P.p - 1) * math.exp(2.0 ** P.Nprime * P.alpha)
    return C1, C2


def log_fk_envelope(nl: Nonlinearity, k: int, s):
    """log of the growth envelope for s f_k(s); -inf at s = 0."""
    P = nl.params
    C1, C2 = _envelope_constants(P)
    a = np.abs(np.asarray(s, dtype=float))
    inner = a <= 1.0 / k
    with np.errstate(divide="ignore"):
        outer_val = (math.log(C1) + P.p * np.log(a)
                     + log_phi(P.N, 2.0 ** P.Nprime * P.alpha * a ** P.Nprime))
        inner_val = math.log(C2) - (P.p - 2) * math.log(k) + 2 * np.log(a)
    out = np.where(inner, inner_val, outer_val)
    return out if out.ndim else float(out)


def fk_envelope(nl: Nonlinearity, k: int, s):
    """Return (bound, branch) with branch 'outer' for |s| >= 1/k else 'inner'.

    Arrays in give (array, array-of-str) out. Overflow raises RangeError;
    use log_fk_envelope for far-out arguments.
    """
    if k < 1:
        raise ParameterError("k must be >= 1")
    P = nl.params
    C1, C2 = _envelope_constants(P)
    a = np.abs(np.asarray(s, dtype=float))
    inner = a <= 1.0 / k
    arg = 2.0 ** P.Nprime * P.alpha * a ** P.Nprime
    if np.any(arg[~inner] > EXP_MAX):
        raise RangeError("envelope overflow", where=float(a[~inner].max()))
    outer_val = C1 * a ** P.p * phi(P.N, np.where(inner, 0.0, arg))
    inner_val = C2 * float(k) ** (-(P.p - 2)) * a ** 2
    val = np.where(inner, inner_val, outer_val)
    if not np.all(np.isfinite(val)):
        raise RangeError("envelope overflow", where=float(a.max()))
    branch = np.where(inner, "inner", "outer")
    if val.ndim == 0:
        return float(val), str(branch)
    return val, branch


def envelope_violations(nl: Nonlinearity, k: int, s, rtol: float = 1e-12):
    """Grid points where s f_k(s) exceeds the growth envelope or is negative."""
    s = np.asarray(s, dtype=float).ravel()
    sf = s * strauss_fk(nl, k, s)
    pos = sf > 0
    with np.errstate(divide="ignore"):
        lhs = np.log(np.where(pos, sf, 1.0))
    bound = log_fk_envelope(nl, k, s)
    over = pos & (lhs > bound + rtol * np.maximum(1.0, np.abs(lhs)))
    return s[over | (sf < 0)]


def phi_power_ratio(N: int, alpha: float, r: float, beta: float, u) -> float:
    """sup over samples of phi_N(alpha|u|^N')^r / phi_N(beta alpha |u|^N')."""
    if not (r > 1 and beta > r):
        raise ParameterError("need r > 1 and beta > r")
    a = np.abs(np.asarray(u, dtype=float)).ravel()
    a = a[a > 0]
    if a.size == 0:
        return 0.0
    Np = N / (N - 1)
    x = alpha * a ** Np
    logs = r * log_phi(N, x) - log_phi(N, beta * x)
    return float(np.exp(np.max(logs)))
