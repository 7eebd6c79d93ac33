"""Moser-iteration constant ledger and the resulting sup-norm and decay bounds.

With P = ptilde N / pbar_star < 1 and beta_0 = pbar_star/ptilde - N, the
iteration exponents satisfy N + beta_n = (N + beta_0) P^{-n}. The bound is

    sup |u| <= C^{S1} e^{S2} e^{S3} max{1, C_* ||u||_{W^{1,N}}},

and locally sup_{B(x0,R*)} u <= (N S1 S2)^{1/(N+beta_0)} ||u||_{L^pbar(B(x0,2R*))}^Theta
with Theta = beta_0 / ((N + beta_0) Q_inf).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import betainc

from .errors import ParameterError
from .mesh import GridFunction, ball_volume

TERM_TOL = 1e-14
TAIL_TOL = 1e-12


@dataclass
class MoserLedger:
    N: int
    pbar_star: float
    ptilde: float
    beta0: float
    P: float
    S1: float
    S2: float
    S3: float
    Q_inf: float
    C_star: float
    B0: float
    C0: float
    Cprime: float
    C: float
    Theta: float
    R_star: float
    tails: dict = field(default_factory=dict)
    terms: dict = field(default_factory=dict)

    def beta(self, n: int) -> float:
        return (self.N + self.beta0) * self.P ** (-n) - self.N

    def Q(self, n: int) -> float:
        """Q_n = prod_{k=2}^{n+1} (1 - P^k)^{-1}."""
        return float(np.prod([1.0 / (1.0 - self.P ** k) for k in range(2, n + 2)]))

    def dump(self) -> str:
        keys = ("N", "pbar_star", "ptilde", "beta0", "P", "S1", "S2", "S3", "Q_inf",
                "C_star", "B0", "C0", "Cprime", "C", "Theta", "R_star")
        lines = [f"{k} = {getattr(self, k)!r}" for k in keys]
        lines += [f"tail_{k} = {v!r}" for k, v in sorted(self.tails.items())]
        return "\n".join(lines)


def _geometric_moments(P, K):
    """sum_{n>K} P^n and sum_{n>K} n P^n."""
    s0 = P ** (K + 1) / (1 - P)
    s1 = (K + 1) * P ** (K + 1) / (1 - P) + P ** (K + 2) / (1 - P) ** 2
    return s0, s1


def _sum_S2(N, beta0, P):
    a = math.log(N + beta0)
    b = math.log(1.0 / P)
    pref = N / (N + beta0)
    total, n = 0.0, 0
    while True:
        term = pref * P ** n * (a + n * b)
        total += term
        s0, s1 = _geometric_moments(P, n)
        tail = pref * (a * s0 + b * s1)
        if term < TERM_TOL and tail < TAIL_TOL:
            return total, tail, n + 1
        n += 1


def _sum_S3(N, beta0, P, C0, Cp):
    # ln(C0 + D_n) <= ln(C0 + C') + N (n+1) ln 2 bounds the tail
    pref = 1.0 / (N + beta0)
    c = math.log(C0 + Cp)
    d = N * math.log(2.0)
    total, n = 0.0, 0
    while True:
        log_Dn = math.log(Cp) + N * (n + 1) * math.log(2.0)
        term = pref * P ** n * float(np.logaddexp(math.log(C0), log_Dn))
        total += term
        s0, s1 = _geometric_moments(P, n)
        tail = pref * ((c + d) * s0 + d * s1)
        if term < TERM_TOL and tail < TAIL_TOL:
            return total, tail, n + 1
        n += 1


def q_infinity(P: float):
    """prod_{k>=2} (1-P^k)^{-1} with relative tail < 1e-12.

    After factor K the log-remainder is -sum_{k>K} ln(1-P^k) <= 2 P^{K+1}/(1-P)
    (valid once P^{K+1} <= 1/2).
    """
    if not 0 < P < 1:
        raise ParameterError("P must lie in (0, 1)")
    log_q, k = 0.0, 2
    while True:
        x = P ** k
        log_q -= math.log1p(-x)
        rem = 2.0 * P ** (k + 1) / (1 - P)
        if P ** (k + 1) <= 0.5 and math.expm1(rem) < TAIL_TOL and abs(math.log1p(-x)) < TAIL_TOL:
            return math.exp(log_q), math.expm1(rem), k - 1
        k += 1


def build_ledger(N: int, pbar_star: float, ptilde: float, C_star: float,
                 C_rho: float = 1.0, A: float = 0.0, R_star: float = 1.0) -> MoserLedger:
    """Fill the iteration constants; C_rho and A enter through C0 = C(rho) + A + 1."""
    if not pbar_star > 2 * N * N:
        raise ParameterError(f"pbar_star must exceed 2N^2 = {2 * N * N}")
    if not 2 * N < ptilde < pbar_star / N:
        raise ParameterError(f"ptilde must lie in (2N, pbar_star/N) = ({2 * N}, {pbar_star / N})")
    if C_star <= 0 or R_star <= 0 or C_rho < 0 or A < 0:
        raise ParameterError("C_star, R_star must be > 0 and C_rho, A >= 0")
    beta0 = pbar_star / ptilde - N
    P = ptilde * N / pbar_star
    # 1/((N+beta0)(1-P)) rewritten without cancellation
    S1 = ptilde / (pbar_star - N * ptilde)
    B0 = 1.0 + ball_volume(N, 2.0 * R_star)
    C0 = C_rho + A + 1.0
    Cp = (N ** N * 2.0 ** (2 * N - 1) + 2.0 ** (N - 1)) / R_star ** N
    C = 2.0 ** N * (C_star + 1.0) ** N * B0
    S2, t2, n2 = _sum_S2(N, beta0, P)
    S3, t3, n3 = _sum_S3(N, beta0, P, C0, Cp)
    Q, tq, nq = q_infinity(P)
    Theta = beta0 / ((N + beta0) * Q)
    return MoserLedger(N, pbar_star, ptilde, beta0, P, S1, S2, S3, Q, C_star, B0, C0, Cp, C,
                       Theta, R_star, tails=dict(S2=t2, S3=t3, Q_inf=tq),
                       terms=dict(S2=n2, S3=n3, Q_inf=nq))


def sup_bound(ledger: MoserLedger, w1n_norm_value: float) -> float:
    L = ledger
    log_pref = L.S1 * math.log(L.C) + L.S2 + L.S3
    return math.exp(log_pref) * max(1.0, L.C_star * w1n_norm_value)


def decay_bound(ledger: MoserLedger, lp_norm_on_annulus: float) -> float:
    if lp_norm_on_annulus < 0:
        raise ParameterError("norm must be nonnegative")
    L = ledger
    return (L.N * L.S1 * L.S2) ** (1.0 / (L.N + L.beta0)) * lp_norm_on_annulus ** L.Theta


def theta_exponent(ledger: MoserLedger) -> float:
    return ledger.Theta


def cap_fraction(N: int, cos_theta):
    """Fraction of the unit sphere S^{N-1} with polar angle <= theta."""
    c = np.clip(np.asarray(cos_theta, float), -1.0, 1.0)
    s2 = 1.0 - c * c
    half = 0.5 * betainc((N - 1) / 2.0, 0.5, s2)
    return np.where(c >= 0, half, 1.0 - half)


def offcentre_ball_norm(u: GridFunction, x0: float, radius: float, s: float) -> float:
    """||u||_{L^s(B(x0, radius))} for radial u, x0 on a coordinate ray at distance |x0|."""
    m = u.mesh
    N = m.N
    d = abs(x0)
    r = m.qpts
    uq = np.abs(u.at_quad())
    with np.errstate(divide="ignore", invalid="ignore"):
        cos_t = (r * r + d * d - radius * radius) / (2.0 * r * d) if d > 0 else None
    if d == 0:
        frac = (r <= radius).astype(float)
    else:
        frac = np.where(r <= radius - d, 1.0, np.where(r >= radius + d, 0.0,
                                                       cap_fraction(N, cos_t)))
        frac = np.where(r + d <= radius, 1.0, frac)
        frac = np.where(np.abs(r - d) >= radius, np.where(r + d <= radius, 1.0, 0.0), frac)
    vals = uq ** s * frac * m.omega * r ** (N - 1) * m.qwts
    return float(np.sum(vals) ** (1.0 / s))


def offcentre_sup(u: GridFunction, x0: float, radius: float) -> float:
    """sup |u| over B(x0, radius), i.e. over radii in [|x0| - radius, |x0| + radius]."""
    d = abs(x0)
    lo, hi = max(d - radius, 0.0), d + radius
    r = u.mesh.nodes
    sel = (r >= lo) & (r <= hi)
    vals = list(np.abs(u.values[sel])) + [abs(float(u(lo))), abs(float(u(min(hi, u.mesh.R))))]
    return float(max(vals))
