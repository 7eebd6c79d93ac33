"""Zero finding for continuous fields that point outward on a sphere.

If <F(x), x> >= 0 on {||x||_d = rho} then F has a zero in the closed ball.
The existence argument is topological; here we certify the boundary
condition by sampling and then locate the zero with damped Newton,
falling back to trust-region least squares.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.sparse as sp
from scipy import optimize
from scipy.sparse.linalg import spsolve
from scipy.stats import norm as _normal, qmc

from .errors import CertificateError, ParameterError, SearchBudgetError


def euclidean(x):
    return float(np.linalg.norm(x))


@dataclass
class FiniteField:
    dim: int
    eval: Callable
    norm: Callable = euclidean
    radius: float = 1.0
    jac: Callable | None = None

    def __post_init__(self):
        if self.dim < 1:
            raise ParameterError("dim must be >= 1")
        if self.radius <= 0:
            raise ParameterError("radius must be > 0")


@dataclass
class Certificate:
    passed: bool
    min_value: float
    failing_point: np.ndarray | None
    samples: int
    threshold: float


@dataclass
class ZeroResult:
    point: np.ndarray
    residual: float
    iterations: int
    start: int
    method: str


def sphere_directions(dim: int, samples: int, seed: int = 0) -> np.ndarray:
    """Quasi-random directions: scrambled Sobol points mapped through the normal quantile."""
    sob = qmc.Sobol(dim, scramble=True, seed=seed)
    m = max(int(np.ceil(np.log2(samples))), 0)
    u = sob.random_base2(m)[:samples]
    u = np.clip(u, 1e-12, 1 - 1e-12)
    g = _normal.ppf(u)
    g[np.linalg.norm(g, axis=1) == 0] = 1.0
    return g


def certify_boundary(field: FiniteField, samples: int | None = None, threshold: float = 0.0,
                     seed: int = 0, sampler: Callable | None = None,
                     sampler_dim: int | None = None) -> Certificate:
    """Sample <F(x), x> on the ||.||_d sphere of radius rho.

    `sampler` maps an array of low-dimensional Gaussian coordinates (rows) to
    points of R^dim; the sample count must be at least twice its dimension.
    """
    sdim = field.dim if sampler is None else int(sampler_dim)
    if samples is None:
        samples = 2 * sdim
    if samples < 2 * sdim:
        raise ParameterError(f"need at least 2*{sdim} samples, got {samples}")
    g = sphere_directions(sdim, samples, seed)
    pts = g if sampler is None else sampler(g)
    best, worst = np.inf, None
    for x in pts:
        nx = field.norm(x)
        if nx == 0:
            continue
        x = x * (field.radius / nx)
        val = float(np.dot(field.eval(x), x))
        if val < best:
            best, worst = val, x
    passed = bool(best >= threshold)
    return Certificate(passed, best, None if passed else worst, samples, threshold)


def fd_jacobian(F, x, fx=None):
    """Forward differences with step max(1e-7, 1e-7 |x_j|)."""
    fx = F(x) if fx is None else fx
    J = np.empty((fx.size, x.size))
    for j in range(x.size):
        h = max(1e-7, 1e-7 * abs(x[j]))
        xp = x.copy()
        xp[j] += h
        J[:, j] = (F(xp) - fx) / h
    return J


def _solve_linear(J, rhs):
    if sp.issparse(J):
        step = spsolve(J.tocsc(), rhs)
        if np.all(np.isfinite(step)):
            return step
        J = J.toarray()
    try:
        step = np.linalg.solve(J, rhs)
        if np.all(np.isfinite(step)):
            return step
    except np.linalg.LinAlgError:
        pass
    return np.linalg.lstsq(J, rhs, rcond=None)[0]


def _newton(field, x, tol, max_iter, accept):
    F = field.eval
    fx = F(x)
    r = float(np.linalg.norm(fx))
    for it in range(max_iter):
        if not np.isfinite(r):
            return x, r, it, False
        if r <= tol and accept(x):
            return x, r, it, True
        J = field.jac(x) if field.jac is not None else fd_jacobian(F, x, fx)
        dx = _solve_linear(J, -fx)
        t = 1.0
        while True:
            xt = x + t * dx
            try:
                ft = F(xt)
                rt = float(np.linalg.norm(ft))
            except (OverflowError, FloatingPointError):
                rt = np.inf
            if rt <= (1.0 - 1e-4 * t) * r or (rt < r and t < 1e-3):
                break
            t *= 0.5
            if t < 1e-12:
                return x, r, it, r <= tol and accept(x)
        small_step = np.linalg.norm(xt - x) <= 1e-15 * max(1.0, np.linalg.norm(x))
        x, fx, r = xt, ft, rt
        if small_step:
            return x, r, it + 1, r <= tol and accept(x)
    return x, r, max_iter, r <= tol and accept(x)


def default_starts(field: FiniteField, seed: int = 0, n_random: int = 7):
    """Origin plus points at +-0.5 rho along random directions (alternating sign)."""
    rng = np.random.default_rng(seed)
    starts = [np.zeros(field.dim)]
    for i in range(n_random):
        d = rng.standard_normal(field.dim)
        nd = field.norm(d)
        if nd == 0:
            continue
        sign = 1.0 if i % 2 == 0 else -1.0
        starts.append(sign * 0.5 * field.radius * d / nd)
    return starts


def find_zero(field: FiniteField, tol: float, starts=None, seed: int = 0, max_iter: int = 60,
              accept: Callable | None = None, n_random: int = 7, norm_slack: float = 1e-9,
              first_success: bool = False) -> ZeroResult:
    """Locate z with |F(z)|_2 <= tol and ||z||_d <= rho; best residual wins among starts."""
    if tol <= 0:
        raise ParameterError("tol must be positive")
    starts = list(starts) if starts is not None else []
    starts += default_starts(field, seed, n_random)
    bound = field.radius * (1 + norm_slack) + norm_slack

    def ok(x):
        return field.norm(x) <= bound and (accept is None or accept(x))

    best = None
    best_any = (None, np.inf)
    for i, x0 in enumerate(starts):
        x, r, it, good = _newton(field, np.asarray(x0, float).copy(), tol, max_iter, ok)
        if r < best_any[1]:
            best_any = (x, r)
        if good and (best is None or r < best.residual):
            best = ZeroResult(x, r, it, i, "newton")
            if first_success:
                return best
    if best is not None:
        return best

    # fallback: minimise |F|^2 by trust-region reflective least squares from each start
    for i, x0 in enumerate(starts):
        jac = "2-point"
        if field.jac is not None:
            jac = lambda z: field.jac(z)
        sol = optimize.least_squares(field.eval, np.asarray(x0, float), jac=jac, method="trf",
                                     xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=200 * field.dim)
        x, r, it, good = _newton(field, sol.x, tol, max_iter, ok)
        if r < best_any[1]:
            best_any = (x, r)
        if good:
            return ZeroResult(x, r, sol.nfev + it, i, "least-squares")
    raise SearchBudgetError(
        f"no zero with residual <= {tol} found from {len(starts)} starts "
        f"(best {best_any[1]:.3e})", best_point=best_any[0], best_residual=best_any[1])


def brouwer_solve(field: FiniteField, tol: float, samples: int | None = None, seed: int = 0,
                  threshold: float = 0.0, **kw) -> tuple[ZeroResult, Certificate]:
    """Certify the boundary condition, then search for the zero."""
    cert = certify_boundary(field, samples, threshold=threshold, seed=seed)
    if not cert.passed:
        raise CertificateError(
            f"boundary condition fails: min <F(x),x> = {cert.min_value:.6g} < {threshold}",
            certificate=cert)
    return find_zero(field, tol, seed=seed, **kw), cert
