"""Hat-function Galerkin discretisation of the radial problem and its solvers.

Unknowns are the nodal values at r_0, ..., r_{M-1}; the node at r = R
carries the Dirichlet condition u(R) = 0.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .brouwer import FiniteField, certify_boundary, find_zero
from .errors import CertificateError, ParameterError, ScheduleError
from .mesh import GridFunction, RadialMesh, build_mesh, w1n_norm
from .nonlinearity import Nonlinearity, ProblemParams, f_eval, strauss_fk
from .weights import Weight, weight_eval

EPS_LADDER = (1e-2, 1e-4, 1e-6, 0.0)
SCHEDULE_BASE = (10, 100, 1000, 10000)
K_CAP = 10 ** 8
N_MAX = 10 ** 16
CAUCHY_RTOL = 1e-6
RESIDUAL_RTOL = 1e-10


@dataclass(eq=False)
class GalerkinState:
    mesh: RadialMesh
    nl: Nonlinearity
    weight: Weight
    reg_n: float | None = None
    strauss_k: int | None = None
    phi_aux: GridFunction | None = None
    eps: float = 0.0

    def __post_init__(self):
        if self.nl.params.N != self.mesh.N:
            raise ParameterError("mesh dimension differs from params.N")
        if self.reg_n is not None and self.reg_n < 1:
            raise ParameterError("reg_n must be >= 1")
        if self.strauss_k is not None and self.strauss_k < 1:
            raise ParameterError("strauss_k must be >= 1")
        if self.phi_aux is None:
            self.phi_aux = GridFunction.from_callable(self.mesh, lambda r: np.exp(-r))
        if np.any(self.phi_aux.values[:-1] <= 0):
            raise ParameterError("phi_aux must be positive on the interior")
        m = self.mesh
        self.W = m.measure_weights
        self.a_q = weight_eval(self.weight, m.qpts)
        self.phi_q = self.phi_aux.at_quad()
        self.A = m.omega * m.grad_measure
        self.basis = np.stack([1.0 - m.xi, m.xi])

    @property
    def params(self) -> ProblemParams:
        return self.nl.params

    @property
    def dofs(self) -> int:
        return self.mesh.M

    def replace(self, **kw) -> "GalerkinState":
        args = dict(mesh=self.mesh, nl=self.nl, weight=self.weight, reg_n=self.reg_n,
                    strauss_k=self.strauss_k, phi_aux=self.phi_aux, eps=self.eps)
        args.update(kw)
        if "mesh" in kw and "phi_aux" not in kw:
            args["phi_aux"] = None
        return GalerkinState(**args)


def full_values(xi) -> np.ndarray:
    return np.append(np.asarray(xi, float), 0.0)


def to_grid(state: GalerkinState, xi) -> GridFunction:
    return GridFunction(state.mesh, full_values(xi))


def coefficient_norm(state: GalerkinState, xi) -> float:
    """|xi|_m = ||sum xi_j w_j||_{W^{1,N}}."""
    return w1n_norm(to_grid(state, xi))


def _rhs_f(state, up):
    """f or f_k at nonnegative arguments; f(0) = 0 so only positive entries are evaluated."""
    out = np.zeros_like(up)
    if state.nl.kind == "zero":
        return out
    pos = up > 0
    if state.strauss_k is None:
        out[pos] = f_eval(state.nl, up[pos])
    else:
        out[pos] = strauss_fk(state.nl, state.strauss_k, up[pos])
    return out


def _flux(du, N, eps):
    if N == 2:
        return du
    return (du * du + eps * eps) ** ((N - 2) / 2) * du


def _flux_prime(du, N, eps):
    if N == 2:
        return np.ones_like(du)
    s = du * du + eps * eps
    with np.errstate(divide="ignore", invalid="ignore"):
        out = s ** ((N - 4) / 2) * ((N - 1) * du * du + eps * eps)
    return np.where(s > 0, out, 0.0)


def _parts(state, xi):
    u = full_values(xi)
    m = state.mesh
    uq = u[:-1, None] + (u[1:] - u[:-1])[:, None] * m.xi[None, :]
    du = np.diff(u) / m.h
    return u, uq, du


def _assemble(state, c_grad, s_quad):
    """Load per-element gradient coefficients and quadrature-point integrands into rows."""
    F = np.zeros(state.mesh.M + 1)
    F[:-1] -= c_grad
    F[1:] += c_grad
    sw = s_quad * state.W
    F[:-1] += sw @ state.basis[0]
    F[1:] += sw @ state.basis[1]
    return F[:-1]


def _source_quad(state, uq):
    """lambda a u_+^{q-1} + f(u_+) + phi/n at quadrature points."""
    P = state.params
    up = np.maximum(uq, 0.0)
    src = P.lam * state.a_q * up ** (P.q - 1) + _rhs_f(state, up)
    if state.reg_n is not None:
        src = src + state.phi_q / state.reg_n
    return src


def assemble_F(state: GalerkinState, xi) -> np.ndarray:
    """F_j(xi) = int (|u'|^{N-2}u' w_j' + |u|^{N-2}u w_j - source w_j) omega r^{N-1} dr."""
    xi = np.asarray(xi, float)
    if xi.shape != (state.dofs,):
        raise ParameterError(f"xi must have length {state.dofs}")
    N = state.params.N
    _, uq, du = _parts(state, xi)
    c = _flux(du, N, state.eps) * state.A / state.mesh.h
    s = np.abs(uq) ** (N - 2) * uq - _source_quad(state, uq)
    return _assemble(state, c, s)


def source_vector(state: GalerkinState, xi) -> np.ndarray:
    """Assembled right-hand-side terms; its size sets the residual scale."""
    _, uq, _ = _parts(state, np.asarray(xi, float))
    return _assemble(state, np.zeros(state.mesh.M), _source_quad(state, uq))


def _fprime(state, up):
    """Central difference of the scalar map t -> f_k(t) (f may have kinks)."""
    h = 1e-6 * np.maximum(up, 1e-6)
    return (_rhs_f(state, up + h) - _rhs_f(state, np.maximum(up - h, 0.0))) / (
        up + h - np.maximum(up - h, 0.0))


def assemble_J(state: GalerkinState, xi) -> sp.csr_matrix:
    """Tridiagonal Jacobian of assemble_F."""
    P = state.params
    N, q = P.N, P.q
    m = state.mesh
    _, uq, du = _parts(state, np.asarray(xi, float))
    kg = _flux_prime(du, N, state.eps) * state.A / m.h ** 2
    pos = uq > 0
    ds = (N - 1) * np.abs(uq) ** (N - 2)
    if P.lam > 0 or state.nl.kind != "zero":
        dsrc = np.zeros_like(uq)
        up = uq[pos]
        dsrc[pos] = P.lam * state.a_q[pos] * (q - 1) * up ** (q - 2)
        if state.nl.kind != "zero":
            dsrc[pos] += _fprime(state, up)
        ds = ds - dsrc
    dw = ds * state.W
    b0, b1 = state.basis
    m00 = dw @ (b0 * b0)
    m01 = dw @ (b0 * b1)
    m11 = dw @ (b1 * b1)
    n = m.M + 1
    diag = np.zeros(n)
    diag[:-1] += kg + m00
    diag[1:] += kg + m11
    off = -kg + m01
    J = sp.diags([off[:-1], diag[:-1], off[:-1]], [-1, 0, 1], shape=(n - 1, n - 1), format="csr")
    return J


def galerkin_field(state: GalerkinState, rho: float) -> FiniteField:
    return FiniteField(state.dofs, lambda x: assemble_F(state, x),
                       lambda x: coefficient_norm(state, x), rho,
                       jac=lambda x: assemble_J(state, x))


# ------------------------------------------------------------------ sampling

def smooth_modes(mesh: RadialMesh, n_cos: int = 12, lengths=(0.25, 1.0, 4.0)) -> np.ndarray:
    """Low-frequency Dirichlet profiles used to sample the |xi|_m sphere (rows)."""
    r = mesh.nodes[:-1]
    R = mesh.R
    rows = [np.cos((j - 0.5) * np.pi * r / R) for j in range(1, n_cos + 1)]
    for ell in lengths:
        ell = min(ell, R / 2)
        rows.append(np.exp(-r / ell) - math.exp(-R / ell))
    rows.append(1.0 - (r / R) ** 2)
    return np.array(rows)


def varsigma(params: ProblemParams, rho: float, K1: float) -> float:
    return rho ** params.N / 2 - params.lam * K1 * rho ** params.q


@dataclass
class BoundaryCertificate:
    passed: bool
    min_value: float
    threshold: float
    varsigma: float
    samples: int


def certify_galerkin(state: GalerkinState, rho: float, K1: float, seed: int = 0,
                     samples: int | None = None) -> BoundaryCertificate:
    """Pass iff varsigma > rho^N/4 (equivalently lambda < lambda*) and the sampled
    minimum of <F(xi),xi> over |xi|_m = rho is at least varsigma/2."""
    field_ = galerkin_field(state, rho)
    modes = smooth_modes(state.mesh)
    sdim = modes.shape[0]
    samples = max(2 * sdim, 64) if samples is None else samples
    vs = varsigma(state.params, rho, K1)
    thr = vs / 2
    cert = certify_boundary(field_, samples, threshold=thr, seed=seed,
                            sampler=lambda g: g @ modes, sampler_dim=sdim)
    admissible = vs > rho ** state.params.N / 4
    return BoundaryCertificate(bool(admissible and cert.passed), cert.min_value, thr, vs, samples)



# ------------------------------------------------------------------ solves

@dataclass
class SolveReport:
    solution: GridFunction
    residual: float
    w1n: float
    sup: float
    iterations: int
    certificate_min: float
    positivity_min: float
    rel_residual: float = 0.0
    lam: float = 0.0
    R: float = 0.0
    k: int | None = None
    n: float | None = None
    trace: list = field(default_factory=list)


def positive_starts(state: GalerkinState, scales=(1.0, 0.1, 10.0)):
    """Positive bump profiles sized by the concave-term scaling u ~ (lambda a)^{1/(N-q)}."""
    P = state.params
    r = state.mesh.nodes[:-1]
    amp = max(P.lam * float(np.max(state.a_q)), 1e-300) ** (1.0 / (P.N - P.q))
    amp = max(amp, 1e-12)
    bump = 1.0 - (r / state.mesh.R) ** 2
    return [s * amp * bump for s in scales]


def _solve_state(state, rho, tol, starts, seed, need_positive):
    field_ = galerkin_field(state, rho)

    def accept(x):
        if need_positive and np.min(x) <= 0:
            return False
        res = np.linalg.norm(assemble_F(state, x))
        scale = np.linalg.norm(source_vector(state, x))
        return res <= max(RESIDUAL_RTOL * scale, 1e-300) or res == 0.0

    return find_zero(field_, tol, starts=starts, seed=seed, accept=accept, first_success=True)


def _report(state, xi, zr, cert_min, rho):
    u = to_grid(state, xi)
    F = assemble_F(state, xi)
    scale = np.linalg.norm(source_vector(state, xi))
    res = float(np.linalg.norm(F))
    return SolveReport(u, res, w1n_norm(u), u.sup(), zr.iterations if zr else 0, cert_min,
                       float(np.min(xi)), res / scale if scale > 0 else 0.0,
                       state.params.lam, state.mesh.R, state.strauss_k, state.reg_n)


def solve_PDn(state: GalerkinState, rho: float, tol: float, K1: float, seed: int = 0,
              warm=None, certify: bool = True) -> SolveReport:
    """Certify the sphere |xi|_m = rho, then find the positive zero inside it."""
    if rho <= 0 or tol <= 0:
        raise ParameterError("rho and tol must be positive")
    cert_min = math.nan
    if certify:
        bc = certify_galerkin(state, rho, K1, seed)
        cert_min = bc.min_value
        if not bc.passed:
            raise CertificateError(
                f"sphere certificate failed: varsigma={bc.varsigma:.6g}, "
                f"min <F,xi>={bc.min_value:.6g} < {bc.threshold:.6g}", certificate=bc)
    need_positive = state.params.lam > 0 or state.reg_n is not None
    starts = [] if warm is None else [np.asarray(warm, float)]
    starts += positive_starts(state)
    N = state.params.N
    eps_list = EPS_LADDER if N > 2 and state.eps == 0.0 else (state.eps,)
    xi, zr = None, None
    for eps in eps_list:
        st = state.replace(eps=eps)
        zr = _solve_state(st, rho, tol, starts, seed, need_positive and eps == eps_list[-1])
        xi = zr.point
        starts = [xi] + starts[1:]
    return _report(state, xi, zr, cert_min, rho)


def schedule_pairs():
    """(k, n) continuation steps: the base ladder, then n tenfold up to 1e16 with k capped."""
    pairs = [(v, v) for v in SCHEDULE_BASE]
    n = SCHEDULE_BASE[-1]
    while n < N_MAX:
        n *= 10
        pairs.append((min(n, K_CAP), n))
    return pairs


def solve_PD(state: GalerkinState, rho: float, tol: float, K1: float, seed: int = 0,
             warm=None) -> SolveReport:
    """Drive k, n up the schedule until successive solutions agree, then solve the unregularised problem."""
    trace = []
    prev = None
    xi = None if warm is None else np.asarray(warm, float)
    converged = False
    streak = 0
    for k, n in schedule_pairs():
        st = state.replace(strauss_k=k, reg_n=float(n), eps=0.0)
        rep = solve_PDn(st, rho, tol, K1, seed, warm=xi)
        xi = rep.solution.values[:-1]
        if prev is not None:
            diff = w1n_norm(GridFunction(state.mesh, rep.solution.values - prev.values))
            trace.append((k, n, diff))
            small = diff <= CAUCHY_RTOL * rep.w1n or (rep.w1n <= tol and diff <= tol)
            streak = streak + 1 if small else 0
            if streak >= 2:
                converged = True
                break
        prev = rep.solution
    if not converged:
        raise ScheduleError("(k, n) schedule did not converge", trace=trace)
    final_state = state.replace(strauss_k=None, reg_n=None, eps=0.0)
    if final_state.params.lam > 0:
        rep = solve_PDn(final_state, rho, tol, K1, seed, warm=xi)
    else:
        # without the concave term and the phi/n forcing, u = 0 is the zero in the ball
        zero = np.zeros(state.dofs)
        rep = _report(final_state, zero, None, math.nan, rho)
    diff = w1n_norm(GridFunction(state.mesh, rep.solution.values - prev.values))
    trace.append((None, None, diff))
    rep.trace = trace
    return rep


def solve_sublinear(b: float, mesh: RadialMesh, N: int, q: float, tol: float,
                    seed: int = 0, warm=None) -> GridFunction:
    """Positive solution of -Delta_N u + u^{N-1} = b u^{q-1} on B_R with u(R) = 0."""
    if b <= 0:
        raise ParameterError("b must be > 0")
    if not 1 < q < N:
        raise ParameterError("need 1 < q < N")
    if mesh.N != N:
        raise ParameterError("mesh dimension differs from N")
    params = ProblemParams(N=N, p=N + 1.0, q=q, lam=b)
    state = GalerkinState(mesh, Nonlinearity("zero", params),
                          Weight("constant-on-ball", rate=1.0, radius=2 * mesh.R))
    bound = 1e3 * max(b, 1.0) ** (1.0 / (N - q)) * (1.0 + mesh.R) ** N
    rep = solve_PDn(state, bound, tol, 0.0, seed, warm=warm, certify=False)
    return rep.solution


def comparison_check(u1: GridFunction, u2: GridFunction, tol: float) -> bool:
    """True iff u2 >= u1 - tol at every node."""
    if u1.mesh is not u2.mesh and (u1.mesh.nodes.shape != u2.mesh.nodes.shape
                                   or not np.array_equal(u1.mesh.nodes, u2.mesh.nodes)):
        raise ParameterError("comparison needs functions on the same mesh")
    return bool(np.all(u2.values >= u1.values - tol))


def rho_tilde(params: ProblemParams, K1: float, rho: float) -> float:
    if params.lam <= 0:
        return 0.0
    return min((2 * params.lam * K1) ** (1.0 / (params.N - params.q)), rho)


def annulus_sups(u: GridFunction) -> np.ndarray:
    """max |u| over {m <= r <= m+1} for m = 0, 1, ..., floor(R) - 1."""
    r = u.mesh.nodes
    out = []
    for m in range(int(math.floor(u.mesh.R))):
        sel = (r >= m) & (r <= m + 1)
        out.append(float(np.max(np.abs(u.values[sel]))))
    return np.array(out)


@dataclass
class ExhaustionReport:
    reports: list
    window_diffs: list
    annulus_sup: np.ndarray
    rho_tilde: float


def ball_exhaustion(nl: Nonlinearity, weight: Weight, R_list, M: int, grading: float,
                    tol: float, rho: float, K1: float, seed: int = 0) -> ExhaustionReport:
    """Solve on increasing balls, warm-starting each from the previous solution extended by zero.

    M is the element count on the first ball; later balls keep the same
    element size (M scaled by R/R_0) so the nodes of B_{R_0} are shared.
    """
    R_list = list(R_list)
    if any(b <= a for a, b in zip(R_list, R_list[1:])):
        raise ParameterError("R_list must be increasing")
    reports = []
    prev = None
    for R in R_list:
        M_R = M if grading != 1.0 else int(round(M * R / R_list[0]))
        mesh = build_mesh(R, M_R, grading, nl.params.N)
        state = GalerkinState(mesh, nl, weight)
        warm = None if prev is None else prev.interpolate(mesh).values[:-1]
        rep = solve_PD(state, rho, tol, K1, seed, warm=warm)
        reports.append(rep)
        prev = rep.solution
    window = reports[0].solution.mesh
    diffs = []
    for a, b in zip(reports, reports[1:]):
        ua = a.solution.interpolate(window)
        ub = b.solution.interpolate(window)
        diffs.append(w1n_norm(GridFunction(window, ub.values - ua.values)))
    return ExhaustionReport(reports, diffs, annulus_sups(reports[-1].solution),
                            rho_tilde(nl.params, K1, rho))
