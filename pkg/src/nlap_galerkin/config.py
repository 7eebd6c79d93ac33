"""YAML run configuration with strict key checking."""
from __future__ import annotations

from dataclasses import dataclass, field

import yaml

from .errors import ParameterError
from .nonlinearity import KINDS, Nonlinearity, ProblemParams, tabulated
from .thresholds import default_pbar_star
from .weights import Weight, validate_weight

SCHEMA = {
    "problem": {"N", "p", "q", "alpha", "a1", "lambda", "lambda_fraction", "nonlinearity",
                "table"},
    "weight": {"kind", "rate", "amplitude", "radius", "table"},
    "mesh": {"R", "R_list", "M", "grading", "quad_points"},
    "sweep": {"lambda_fractions", "lambdas"},
    "threshold": {"R", "M", "delta", "lambda_min", "lambda_max", "count", "lambdas"},
    "constants": {"K1", "K2", "K3", "C_alphaN", "C_star", "C_rho", "n_profiles"},
    "ledger": {"pbar_star", "ptilde", "R_star"},
    "check_fk": {"s_max", "step", "k_max", "k_uniform", "bound"},
    "tolerances": {"solve", "eigen"},
    "output": {"dir"},
    "seed": None,
}


@dataclass
class RunConfig:
    params: ProblemParams
    nl_kind: str
    nl_table: tuple
    weight: Weight
    lambda_abs: float | None
    lambda_fraction: float | None
    R: float
    R_list: list
    M: int
    grading: float
    quad_points: int
    sweep_fractions: list
    sweep_lambdas: list
    threshold: dict
    constants: dict
    n_profiles: int
    C_rho: float | None
    pbar_star: float
    ptilde: float
    R_star: float
    check_fk: dict
    tol: float
    eigen_tol: float
    out_dir: str
    seed: int
    raw: dict = field(default_factory=dict)

    def nonlinearity(self, lam: float) -> Nonlinearity:
        params = self.params.with_lambda(lam)
        if self.nl_kind == "custom-tabulated":
            ts, fs = zip(*self.nl_table)
            return tabulated(params, ts, fs)
        return Nonlinearity(self.nl_kind, params)

    @property
    def reference_R(self) -> float:
        return max([self.R] + list(self.R_list))


def _check_keys(data, where, allowed):
    if not isinstance(data, dict):
        raise ParameterError(f"section {where!r} must be a mapping")
    extra = set(data) - allowed
    if extra:
        raise ParameterError(f"unknown key(s) in {where}: {sorted(extra)}")


def parse_config(data: dict) -> RunConfig:
    data = data or {}
    _check_keys(data, "config", set(SCHEMA))
    for sec, keys in SCHEMA.items():
        if keys is not None and sec in data:
            _check_keys(data[sec], sec, keys)
    pr = data.get("problem", {})
    N = int(pr.get("N", 2))
    p = float(pr.get("p", 4.0))
    q = float(pr.get("q", 1.5))
    if not 1 < q < N < p:
        raise ParameterError(f"invariant 1<q<N<p violated (q={q}, N={N}, p={p})")
    kind = pr.get("nonlinearity", "canonical")
    if kind not in KINDS:
        raise ParameterError(f"unknown nonlinearity {kind!r}; choose from {KINDS}")
    table = tuple(tuple(map(float, row)) for row in pr.get("table", ()))
    if kind == "custom-tabulated" and not table:
        raise ParameterError("custom-tabulated nonlinearity needs problem.table")

    wd = data.get("weight", {})
    weight = Weight(wd.get("kind", "exponential"), float(wd.get("rate", 1.0)),
                    float(wd.get("amplitude", 1.0)), float(wd.get("radius", 1.0)),
                    tuple(tuple(map(float, row)) for row in wd.get("table", ())))
    validate_weight(weight, N, q)
    gamma = weight.rate if weight.kind == "power-decay" else None
    params = ProblemParams(N, p, q, float(pr.get("alpha", 1.0)), float(pr.get("a1", 1.0)),
                           0.0, gamma)
    if kind != "custom-tabulated":
        Nonlinearity(kind, params)
    else:
        ts, fs = zip(*table)
        tabulated(params, ts, fs)

    lam_abs = pr.get("lambda")
    lam_frac = pr.get("lambda_fraction")
    if lam_abs is not None and lam_frac is not None:
        raise ParameterError("give either problem.lambda or problem.lambda_fraction, not both")
    if lam_abs is None and lam_frac is None:
        lam_frac = 0.01
    if lam_abs is not None and float(lam_abs) < 0:
        raise ParameterError("lambda must be >= 0")
    if lam_frac is not None and float(lam_frac) < 0:
        raise ParameterError("lambda_fraction must be >= 0")

    me = data.get("mesh", {})
    R = float(me.get("R", 8.0))
    R_list = [float(x) for x in me.get("R_list", [4.0, 8.0, 16.0, 32.0])]
    M = int(me.get("M", 2000))
    if R <= 0 or M < 8:
        raise ParameterError("mesh needs R > 0 and M >= 8")
    if any(b <= a for a, b in zip(R_list, R_list[1:])):
        raise ParameterError("mesh.R_list must be strictly increasing")

    sw = data.get("sweep", {})
    fr = [float(x) for x in sw.get("lambda_fractions", [2.0 ** -j for j in range(1, 11)])]
    lams = [float(x) for x in sw.get("lambdas", [])]
    for seq in (fr, lams):
        if any(b >= a for a, b in zip(seq, seq[1:])):
            raise ParameterError("sweep lambdas must be strictly decreasing")

    th = data.get("threshold", {})
    threshold = dict(R=float(th.get("R", 1.0)), M=int(th.get("M", 400)),
                     delta=float(th.get("delta", 0.1)),
                     lambda_min=float(th.get("lambda_min", 1e-3)),
                     lambda_max=float(th.get("lambda_max", 1e3)),
                     count=int(th.get("count", 30)),
                     lambdas=[float(x) for x in th.get("lambdas", [])])
    if threshold["delta"] <= 0:
        raise ParameterError("threshold.delta must be > 0")

    co = data.get("constants", {})
    constants = {k: float(co[k]) for k in ("K1", "K2", "K3", "C_alphaN", "C_star") if k in co}
    for k, v in constants.items():
        if not v > 0:
            raise ParameterError(f"constants.{k} must be > 0")

    le = data.get("ledger", {})
    pbar = float(le.get("pbar_star", default_pbar_star(N)))
    ptilde = float(le.get("ptilde", {2: 4.5, 3: 6.5}.get(N, (2 * N + pbar / N) / 2)))
    if not (pbar > 2 * N * N and 2 * N < ptilde < pbar / N):
        raise ParameterError("ledger needs pbar_star > 2N^2 and 2N < ptilde < pbar_star/N")

    cf = data.get("check_fk", {})
    check_fk = dict(s_max=float(cf.get("s_max", 20.0)), step=float(cf.get("step", 0.01)),
                    k_max=int(cf.get("k_max", 100)),
                    k_uniform=[int(k) for k in cf.get("k_uniform", [10, 100, 1000, 10000])],
                    bound=float(cf.get("bound", 10.0)))
    tol = data.get("tolerances", {})
    return RunConfig(
        params=params, nl_kind=kind, nl_table=table, weight=weight,
        lambda_abs=None if lam_abs is None else float(lam_abs),
        lambda_fraction=None if lam_frac is None else float(lam_frac),
        R=R, R_list=R_list, M=M, grading=float(me.get("grading", 1.0)),
        quad_points=int(me.get("quad_points", 4)), sweep_fractions=fr, sweep_lambdas=lams,
        threshold=threshold, constants=constants, n_profiles=int(co.get("n_profiles", 200)),
        C_rho=None if "C_rho" not in co else float(co["C_rho"]),
        pbar_star=pbar, ptilde=ptilde, R_star=float(le.get("R_star", 1.0)),
        check_fk=check_fk, tol=float(tol.get("solve", 1e-8)),
        eigen_tol=float(tol.get("eigen", 1e-12)),
        out_dir=str(data.get("output", {}).get("dir", "out")), seed=int(data.get("seed", 0)),
        raw=data)


def load_config(path) -> RunConfig:
    try:
        with open(path) as fh:
            data = yaml.safe_load(fh)
    except (OSError, yaml.YAMLError) as exc:
        raise ParameterError(f"cannot read config {path}: {exc}") from exc
    if data is not None and not isinstance(data, dict):
        raise ParameterError("config root must be a mapping")
    return parse_config(data or {})
