"""Existence-window constants and the nonexistence threshold.

Existence: rho = min{(2 K2 C(alpha,N))^{-1/(p-N)}, (1/4)(alpha_N/(N alpha))^{(N-1)/N}},
lambda* = rho^{N-q} / (4 K1), varsigma = rho^N/2 - lambda K1 rho^q.

Nonexistence: Q(t) = Lambda t^{q-N} + t^{p-N} phi_N(alpha t^{N'}) has a unique
critical point t1, H(t1) = Lambda (N-q), and C_Lambda = Q(t1). The
certificate flags C_Lambda >= sigma1 + delta + 1.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import spsolve

from .errors import ParameterError, RangeError, StagnationError
from .mesh import GridFunction, RadialMesh, alpha_N, ls_norm, tm_functional, w1n_norm
from .nonlinearity import EXP_MAX, ProblemParams, phi
from .weights import Weight, weight_eval, weight_inf_on_ball

DEFAULT_PBAR = {2: 10.0, 3: 20.0}


def default_pbar_star(N: int) -> float:
    return DEFAULT_PBAR.get(N, 2.0 * N * N + 2.0)


@dataclass
class SolverConstants:
    K1: float
    K2: float
    K3: float
    C_alphaN: float
    C_star: float
    rho: float
    varsigma: float
    lambda_star: float
    tm_radius: float = math.nan
    reference_R: float = math.nan

    def as_dict(self):
        return dict(K1=self.K1, K2=self.K2, K3=self.K3, C_alphaN=self.C_alphaN,
                    C_star=self.C_star, rho=self.rho, varsigma=self.varsigma,
                    lambda_star=self.lambda_star)


def tm_radius(N: int, alpha: float) -> float:
    """(1/4)(alpha_N/(N alpha))^{(N-1)/N}, the smallness radius for the TM estimate."""
    return 0.25 * (alpha_N(N) / (N * alpha)) ** ((N - 1) / N)


def compute_rho_lambda_star(params: ProblemParams, K1: float, K2: float, C_alphaN: float,
                            K3: float = math.nan, C_star: float = math.nan) -> SolverConstants:
    for name, v in (("K1", K1), ("K2", K2), ("C_alphaN", C_alphaN)):
        if not v > 0:
            raise ParameterError(f"{name} must be > 0, got {v}")
    N, p, q = params.N, params.p, params.q
    first = (2.0 * K2 * C_alphaN) ** (-1.0 / (p - N))
    tm = tm_radius(N, params.alpha)
    rho = min(first, tm)
    lam_star = rho ** (N - q) / (4.0 * K1)
    vs = rho ** N / 2.0 - params.lam * K1 * rho ** q
    return SolverConstants(K1, K2, K3, C_alphaN, C_star, rho, vs, lam_star, tm)


def random_profiles(mesh: RadialMesh, count: int, seed: int = 0) -> np.ndarray:
    """Smooth nonnegative Dirichlet profiles sum_i c_i exp(-(r/l_i)^b_i) (1 - (r/R)^2)."""
    rng = np.random.default_rng(seed)
    r = mesh.nodes
    R = mesh.R
    lo, hi = math.log(0.05), math.log(max(R / 2, 0.1))
    out = np.empty((count, r.size))
    for i in range(count):
        c = rng.uniform(0.1, 1.0, 3)
        ell = np.exp(rng.uniform(lo, hi, 3))
        beta = rng.uniform(1.0, 2.0, 3)
        prof = sum(c[j] * np.exp(-(r / ell[j]) ** beta[j]) for j in range(3))
        out[i] = prof * (1.0 - (r / R) ** 2)
    out[:, -1] = 0.0
    return out


def estimate_constants(mesh: RadialMesh, params: ProblemParams, weight: Weight,
                       n_profiles: int = 200, seed: int = 0, pbar_star: float | None = None,
                       phi_aux=None) -> dict:
    """Heuristic lower bounds for K1, K2, K3, C(alpha,N), C_* from random profiles.

    Each constant is the largest ratio seen over the sample, so true
    suprema can only be larger.
    """
    N, p, q = params.N, params.p, params.q
    pbar = default_pbar_star(N) if pbar_star is None else pbar_star
    W = mesh.measure_weights
    a_q = weight_eval(weight, mesh.qpts)
    phi_q = np.exp(-mesh.qpts) if phi_aux is None else phi_aux(mesh.qpts)
    tm = tm_radius(N, params.alpha)
    beta_tm = N * 2.0 ** (2 * params.Nprime) * params.alpha
    K1 = K2 = K3 = C_star = C_tm = 0.0
    for vals in random_profiles(mesh, n_profiles, seed):
        u = GridFunction(mesh, vals)
        nrm = w1n_norm(u)
        uq = np.abs(u.at_quad())
        K1 = max(K1, 2.0 * np.sum(a_q * uq ** q * W) / nrm ** q)
        K2 = max(K2, ls_norm(u, N * p) ** p / nrm ** p)
        K3 = max(K3, 2.0 * np.sum(phi_q * uq * W) / nrm)
        C_star = max(C_star, ls_norm(u, pbar) / nrm)
        scaled = GridFunction(mesh, vals * (tm / nrm))
        try:
            C_tm = max(C_tm, tm_functional(scaled, beta_tm) ** (1.0 / params.Nprime))
        except RangeError:
            continue
    return dict(K1=float(K1), K2=float(K2), K3=float(K3), C_alphaN=float(C_tm),
                C_star=float(C_star))


def solver_constants(mesh: RadialMesh, params: ProblemParams, weight: Weight,
                     overrides: dict | None = None, n_profiles: int = 200, seed: int = 0,
                     pbar_star: float | None = None) -> SolverConstants:
    """Estimate the constants (unless all are overridden) and derive rho, lambda*, varsigma."""
    overrides = {k: v for k, v in (overrides or {}).items() if v is not None}
    names = ("K1", "K2", "K3", "C_alphaN", "C_star")
    if all(k in overrides for k in names):
        est = {}
    else:
        est = estimate_constants(mesh, params, weight, n_profiles, seed, pbar_star)
    est.update(overrides)
    sc = compute_rho_lambda_star(params, est["K1"], est["K2"], est["C_alphaN"],
                                 est["K3"], est["C_star"])
    sc.reference_R = mesh.R
    return sc


# ---------------------------------------------------------------- H, t1, C_Lambda

def H_eval(t, N: int, p: float, q: float, alpha: float):
    """phi_N(a t^{N'})(p-N) t^{p-q} + a N' t^{p-q+N'} phi_{N-1}(a t^{N'})."""
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < 0):
        raise ParameterError("H is defined for t >= 0")
    Np = N / (N - 1)
    x = alpha * t_arr ** Np
    out = (phi(N, x) * (p - N) * t_arr ** (p - q)
           + alpha * Np * t_arr ** (p - q + Np) * phi(N - 1, x))
    if not np.all(np.isfinite(out)):
        raise RangeError("H overflow", where=float(np.max(t_arr)))
    return out if out.ndim else float(out)


def Q_eval(t, Lambda: float, N: int, p: float, q: float, alpha: float):
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr <= 0):
        raise ParameterError("Q is defined for t > 0")
    Np = N / (N - 1)
    out = Lambda * t_arr ** (q - N) + t_arr ** (p - N) * phi(N, alpha * t_arr ** Np)
    return out if out.ndim else float(out)


def _t_overflow(N, alpha):
    return (EXP_MAX / alpha) ** ((N - 1) / N)


def solve_t1(Lambda: float, N: int, p: float, q: float, alpha: float, tol: float = 1e-10) -> float:
    """Unique t1 > 0 with H(t1) = Lambda (N - q), by doubling bracket and bisection."""
    if Lambda <= 0:
        raise ParameterError("Lambda must be > 0")
    target = Lambda * (N - q)
    t_max = _t_overflow(N, alpha)
    lo, hi = 0.0, 1.0
    while H_eval(hi, N, p, q, alpha) < target:
        lo, hi = hi, 2.0 * hi
        if hi > t_max:
            hi = t_max * (1 - 1e-12)
            if H_eval(hi, N, p, q, alpha) < target:
                raise RangeError("no bracket for t1 below the overflow bound", where=hi)
            break
    while True:
        mid = 0.5 * (lo + hi)
        h = H_eval(mid, N, p, q, alpha)
        if abs(h - target) <= tol or mid <= lo or mid >= hi:
            return mid
        if h < target:
            lo = mid
        else:
            hi = mid


def C_Lambda(t1: float, Lambda: float, N: int, p: float, q: float, alpha: float) -> float:
    if t1 <= 0:
        raise ParameterError("t1 must be > 0")
    return float(Q_eval(t1, Lambda, N, p, q, alpha))


# ---------------------------------------------------------------- eigenvalue

def _rayleigh_parts(mesh, x, N):
    u = np.append(x, 0.0)
    du = np.diff(u) / mesh.h
    uq = u[:-1, None] + (u[1:] - u[:-1])[:, None] * mesh.xi[None, :]
    gm = mesh.grad_measure
    num = np.sum(np.abs(du) ** N * gm)
    W = mesh.qpts ** (N - 1) * mesh.qwts
    den = np.sum(np.abs(uq) ** N * W)
    cg = N * np.abs(du) ** (N - 2) * du * gm / mesh.h
    g_num = np.zeros(u.size)
    g_num[:-1] -= cg
    g_num[1:] += cg
    s = N * np.abs(uq) ** (N - 2) * uq * W
    g_den = np.zeros(u.size)
    g_den[:-1] += s @ (1.0 - mesh.xi)
    g_den[1:] += s @ mesh.xi
    return num, den, g_num[:-1], g_den[:-1], du


def _preconditioner(mesh, du, N):
    """Stiffness matrix weighted by |u'|^{N-2} (floored), Dirichlet at r = R."""
    wgt = np.abs(du) ** (N - 2) if N > 2 else np.ones_like(du)
    if N > 2:
        wgt = np.maximum(wgt, 1e-3 * max(float(np.max(wgt)), 1e-300))
    k = wgt * mesh.grad_measure / mesh.h ** 2
    n = mesh.M + 1
    diag = np.zeros(n)
    diag[:-1] += k
    diag[1:] += k
    return sp.diags([-k[:-1], diag[:-1], -k[:-1]], [-1, 0, 1], format="csc")


def _descend(mesh, x, N, tol, max_iter):
    num, den, gn, gd, du = _rayleigh_parts(mesh, x, N)
    rq = num / den
    for it in range(max_iter):
        grad = (gn - rq * gd) / den
        d = spsolve(_preconditioner(mesh, du, N), grad) * den / N
        slope = float(grad @ d)
        t = 1.0
        while True:
            xn = np.abs(x - t * d)
            xn /= np.max(xn)
            num_n, den_n, gn_n, gd_n, du_n = _rayleigh_parts(mesh, xn, N)
            rq_n = num_n / den_n
            if rq_n <= rq - 1e-4 * t * slope or t < 1e-10:
                break
            t *= 0.5
        done = rq - rq_n <= tol * rq
        if rq_n <= rq:
            x, rq, gn, gd, du, den = xn, rq_n, gn_n, gd_n, du_n, den_n
        if done:
            return x, rq, True
    return x, rq, False


def principal_eigenvalue(mesh: RadialMesh, N: int, tol: float = 1e-12, restarts: int = 5,
                         seed: int = 0, max_iter: int = 500):
    """First Dirichlet eigenpair of -Delta_N on B_R by preconditioned projected descent.

    Returns (sigma1, phi1) with phi1 >= 0 normalised to sup 1.
    """
    if mesh.N != N:
        raise ParameterError("mesh dimension differs from N")
    rng = np.random.default_rng(seed)
    r = mesh.nodes[:-1]
    R = mesh.R
    best = None
    for i in range(restarts):
        coef = rng.uniform(-0.3, 0.3, 4)
        x = (1.0 - (r / R) ** 2) * (1.0 + sum(c * np.cos((j + 1) * np.pi * r / R)
                                              for j, c in enumerate(coef)))
        x = np.abs(x) + 1e-3 * (1.0 - r / R)
        x /= np.max(x)
        x, rq, ok = _descend(mesh, x, N, tol, max_iter)
        if ok and (best is None or rq < best[0]):
            best = (rq, x)
    if best is None:
        raise StagnationError("eigenvalue descent stalled above tolerance")
    rq, x = best
    return float(rq), GridFunction(mesh, np.append(x, 0.0))


@dataclass
class NonexistenceReport:
    lam: float
    Lambda: float
    t1: float
    C_Lambda: float
    sigma1: float
    delta: float
    certified: bool


def nonexistence_certificate(lam: float, R: float, delta: float, mesh: RadialMesh,
                             params: ProblemParams, weight: Weight,
                             sigma1: float | None = None) -> NonexistenceReport:
    """Lambda = lam a_R; flags C_Lambda >= sigma1 + delta + 1."""
    if delta <= 0:
        raise ParameterError("delta must be > 0")
    if lam <= 0:
        raise ParameterError("lambda must be > 0")
    N, p, q, alpha = params.N, params.p, params.q, params.alpha
    aR = weight_inf_on_ball(weight, R, mesh)
    Lam = lam * aR
    t1 = solve_t1(Lam, N, p, q, alpha)
    CL = C_Lambda(t1, Lam, N, p, q, alpha)
    if sigma1 is None:
        sigma1, _ = principal_eigenvalue(mesh, N)
    return NonexistenceReport(lam, Lam, t1, CL, sigma1, delta, bool(CL >= sigma1 + delta + 1))
