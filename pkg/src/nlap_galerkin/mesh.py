"""Graded radial meshes, piecewise-linear grid functions and their norms."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ParameterError, RangeError
from .nonlinearity import EXP_MAX, phi

CSV_VERSION = "# nlap-galerkin v0.1.0"


def sphere_measure(N: int) -> float:
    """omega_{N-1} = 2 pi^{N/2} / Gamma(N/2), surface measure of the unit sphere in R^N."""
    return 2.0 * math.pi ** (N / 2) / math.gamma(N / 2)


def alpha_N(N: int) -> float:
    if N < 2:
        raise ParameterError("N must be >= 2")
    return N * sphere_measure(N) ** (1.0 / (N - 1))


def ball_volume(N: int, R: float) -> float:
    return sphere_measure(N) * R ** N / N


@dataclass(frozen=True, eq=False)
class RadialMesh:
    R: float
    nodes: np.ndarray
    N: int
    npts: int = 4

    def __post_init__(self):
        x, w = np.polynomial.legendre.leggauss(self.npts)
        xi = (x + 1.0) / 2.0
        h = np.diff(self.nodes)
        object.__setattr__(self, "xi", xi)
        object.__setattr__(self, "h", h)
        object.__setattr__(self, "qpts", self.nodes[:-1, None] + h[:, None] * xi[None, :])
        # dr weights; the r^{N-1} factor is applied by callers
        object.__setattr__(self, "qwts", h[:, None] * (w / 2.0)[None, :])
        rN = self.nodes ** self.N
        # exact int_{r_e}^{r_{e+1}} r^{N-1} dr, used for the piecewise-constant gradient
        object.__setattr__(self, "grad_measure", np.diff(rN) / self.N)

    @property
    def M(self) -> int:
        return self.nodes.size - 1

    @property
    def omega(self) -> float:
        return sphere_measure(self.N)

    @property
    def measure_weights(self) -> np.ndarray:
        """omega r^{N-1} dr quadrature weights, shape (M, npts)."""
        return self.omega * self.qpts ** (self.N - 1) * self.qwts


def build_mesh(R: float, M: int, grading: float = 1.0, N: int = 2, npts: int = 4) -> RadialMesh:
    if R <= 0:
        raise ParameterError(f"R must be > 0, got {R}")
    if M < 8:
        raise ParameterError(f"M must be >= 8, got {M}")
    if grading < 1:
        raise ParameterError(f"grading must be >= 1, got {grading}")
    if N < 2:
        raise ParameterError("N must be >= 2")
    nodes = R * (np.arange(M + 1) / M) ** grading
    nodes[-1] = R
    return RadialMesh(float(R), nodes, int(N), int(npts))


def mesh_from_nodes(nodes, N: int, npts: int = 4) -> RadialMesh:
    nodes = np.asarray(nodes, dtype=float)
    if nodes.size < 9 or nodes[0] != 0.0 or np.any(np.diff(nodes) <= 0):
        raise ParameterError("nodes must start at 0, increase strictly and number at least 9")
    return RadialMesh(float(nodes[-1]), nodes.copy(), int(N), int(npts))


@dataclass(eq=False)
class GridFunction:
    mesh: RadialMesh
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != self.mesh.nodes.shape:
            raise ParameterError("values must have one entry per mesh node")

    @classmethod
    def from_callable(cls, mesh: RadialMesh, fn) -> "GridFunction":
        return cls(mesh, np.asarray(fn(mesh.nodes), dtype=float))

    def at_quad(self) -> np.ndarray:
        v = self.values
        return v[:-1, None] + (v[1:] - v[:-1])[:, None] * self.mesh.xi[None, :]

    def derivative(self) -> np.ndarray:
        return np.diff(self.values) / self.mesh.h

    def interpolate(self, mesh: RadialMesh) -> "GridFunction":
        """Linear interpolation onto another mesh, extended by zero beyond R."""
        vals = np.interp(mesh.nodes, self.mesh.nodes, self.values, right=0.0)
        return GridFunction(mesh, vals)

    def __call__(self, r):
        return np.interp(r, self.mesh.nodes, self.values, right=0.0)

    def sup(self) -> float:
        return float(np.max(np.abs(self.values)))


def w1n_norm(u: GridFunction) -> float:
    """(omega int (|u'|^N + |u|^N) r^{N-1} dr)^{1/N}."""
    m = u.mesh
    N = m.N
    du = np.abs(u.derivative())
    uq = np.abs(u.at_quad())
    # scale out the magnitude so tiny or huge amplitudes neither underflow nor overflow
    scale = max(float(np.max(du)), float(np.max(uq)))
    if scale == 0.0:
        return 0.0
    grad = m.omega * np.sum((du / scale) ** N * m.grad_measure)
    mass = np.sum((uq / scale) ** N * m.measure_weights)
    return float(scale * (grad + mass) ** (1.0 / N))


def ls_norm(u: GridFunction, s: float) -> float:
    if s < 1:
        raise ParameterError("s must be >= 1")
    uq = np.abs(u.at_quad())
    scale = float(np.max(uq))
    if scale == 0.0:
        return 0.0
    return float(scale * np.sum((uq / scale) ** s * u.mesh.measure_weights) ** (1.0 / s))


def tm_functional(u: GridFunction, alpha: float) -> float:
    """omega int phi_N(alpha |u|^{N'}) r^{N-1} dr."""
    if alpha <= 0:
        raise ParameterError("alpha must be > 0")
    m = u.mesh
    Np = m.N / (m.N - 1)
    arg_nodes = alpha * np.abs(u.values) ** Np
    if np.any(arg_nodes > EXP_MAX):
        i = int(np.argmax(arg_nodes))
        raise RangeError(f"exp overflow at node {i} (r={m.nodes[i]})", where=float(m.nodes[i]))
    vals = phi(m.N, alpha * np.abs(u.at_quad()) ** Np)
    return float(np.sum(vals * m.measure_weights))


def write_csv(u: GridFunction, path) -> None:
    lines = [CSV_VERSION, f"# N={u.mesh.N} npts={u.mesh.npts}", "r,u"]
    lines += [f"{r!r},{v!r}" for r, v in zip(u.mesh.nodes.tolist(), u.values.tolist())]
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_csv(path, N: int | None = None) -> GridFunction:
    meta = {}
    rows = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                for tok in line[1:].split():
                    if "=" in tok:
                        key, val = tok.split("=", 1)
                        meta[key] = int(val)
                continue
            if line == "r,u":
                continue
            r, v = line.split(",")
            rows.append((float(r), float(v)))
    dim = N if N is not None else meta.get("N")
    if dim is None:
        raise ParameterError("dimension N missing from CSV and not supplied")
    arr = np.array(rows)
    mesh = mesh_from_nodes(arr[:, 0], dim, meta.get("npts", 4))
    return GridFunction(mesh, arr[:, 1])
