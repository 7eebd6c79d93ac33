"""nlap-galerkin command-line driver."""
from __future__ import annotations

import argparse
import json
import math
import os
import sys

import numpy as np

from . import __version__
from .apriori import build_ledger, sup_bound
from .config import RunConfig, load_config
from .errors import (CertificateError, NlapError, ParameterError, ScheduleError,
                     SearchBudgetError)
from .galerkin import GalerkinState, ball_exhaustion, rho_tilde, solve_PD, varsigma
from .mesh import build_mesh, write_csv
from .nonlinearity import check_growth, envelope_violations, f_eval, strauss_fk
from .thresholds import nonexistence_certificate, principal_eigenvalue, solver_constants
from .weights import weight_norm

HEADER = f"# nlap-galerkin v{__version__}"
EXIT_OK, EXIT_CONFIG, EXIT_CERT, EXIT_BUDGET = 0, 2, 3, 4


def fmt(v) -> str:
    if v is None:
        return "inf"
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, str):
        return v
    return repr(float(v))


def write_table(path, columns, rows):
    with open(path, "w") as fh:
        fh.write(HEADER + "\n")
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(fmt(v) for v in row) + "\n")


class Context:
    """Mesh, constants and ledger shared by the subcommands."""

    def __init__(self, cfg: RunConfig, R_ref: float):
        self.cfg = cfg
        N = cfg.params.N
        self.ref_mesh = build_mesh(R_ref, cfg.M, cfg.grading, N, cfg.quad_points)
        self.const = solver_constants(self.ref_mesh, cfg.params, cfg.weight, cfg.constants,
                                      cfg.n_profiles, cfg.seed, cfg.pbar_star)

    def lam(self) -> float:
        cfg = self.cfg
        lam = cfg.lambda_abs
        if lam is None:
            lam = cfg.lambda_fraction * self.const.lambda_star
        self.const.varsigma = varsigma(cfg.params.with_lambda(lam), self.const.rho, self.const.K1)
        return lam

    def ledger(self):
        cfg, c = self.cfg, self.const
        N, q, p = cfg.params.N, cfg.params.q, cfg.params.p
        C_rho = cfg.C_rho if cfg.C_rho is not None else c.K2 * c.C_alphaN * c.rho ** p
        A = c.lambda_star * weight_norm(cfg.weight, N, N / (N - q))
        return build_ledger(N, cfg.pbar_star, cfg.ptilde, c.C_star, C_rho, A, cfg.R_star)

    def state(self, lam, mesh=None):
        mesh = mesh or build_mesh(self.cfg.R, self.cfg.M, self.cfg.grading, self.cfg.params.N,
                                  self.cfg.quad_points)
        return GalerkinState(mesh, self.cfg.nonlinearity(lam), self.cfg.weight)


def _dump_constants(path, ctx, ledger, extra=None):
    lines = [HEADER]
    lines += [f"{k} = {v!r}" for k, v in ctx.const.as_dict().items()]
    lines.append(f"reference_R = {ctx.const.reference_R!r}")
    for k, v in (extra or {}).items():
        lines.append(f"{k} = {v!r}")
    lines.append(ledger.dump())
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


REPORT_COLUMNS = ["lambda", "R", "k", "n", "residual", "w1n", "sup", "positivity_min",
                  "certificate_min"]


def _report_row(rep):
    return [rep.lam, rep.R, rep.k, rep.n, rep.residual, rep.w1n, rep.sup, rep.positivity_min,
            rep.certificate_min]


def cmd_solve(cfg: RunConfig, out: str) -> int:
    ctx = Context(cfg, cfg.R)
    lam = ctx.lam()
    ledger = ctx.ledger()
    st = ctx.state(lam)
    rep = solve_PD(st, ctx.const.rho, cfg.tol, ctx.const.K1, cfg.seed)
    write_csv(rep.solution, os.path.join(out, "solution.csv"))
    write_table(os.path.join(out, "report.csv"), REPORT_COLUMNS, [_report_row(rep)])
    write_table(os.path.join(out, "schedule.csv"), ["k", "n", "cauchy_diff"], rep.trace)
    rt = rho_tilde(st.params, ctx.const.K1, ctx.const.rho)
    _dump_constants(os.path.join(out, "ledger.txt"), ctx, ledger,
                    dict(lambda_=lam, rho_tilde=rt, sup_bound=sup_bound(ledger, rep.w1n)))
    return EXIT_OK


def cmd_sweep_lambda(cfg: RunConfig, out: str) -> int:
    ctx = Context(cfg, cfg.R)
    ledger = ctx.ledger()
    c = ctx.const
    N, q = cfg.params.N, cfg.params.q
    lams = cfg.sweep_lambdas or [f * c.lambda_star for f in cfg.sweep_fractions]
    rows = []
    C_tilde = None
    warm = None
    for lam in lams:
        st = ctx.state(lam)
        try:
            rep = solve_PD(st, c.rho, cfg.tol, c.K1, cfg.seed, warm=warm)
        except NlapError as exc:
            rows.append([lam] + [math.nan] * 8 + [type(exc).__name__])
            continue
        warm = rep.solution.values[:-1] * 0.25 ** (1.0 / (N - q))
        nb = (2 * lam * c.K1) ** (1.0 / (N - q))
        if C_tilde is None:
            C_tilde = rep.sup / rep.w1n ** ledger.Theta
        sb = sup_bound(ledger, rep.w1n)
        rows.append([lam, rep.w1n, rep.sup, rep.residual, nb, rep.w1n <= nb * (1 + 1e-6),
                     C_tilde * rep.w1n ** ledger.Theta,
                     rep.sup <= C_tilde * rep.w1n ** ledger.Theta * (1 + 1e-12),
                     sb, "ok" if rep.sup <= sb else "sup_bound_violated"])
    cols = ["lambda", "w1n", "sup", "residual", "norm_bound", "norm_ok", "theta_bound",
            "theta_ok", "sup_bound", "status"]
    rows = [r if len(r) == len(cols) else r[:1] + [math.nan] * 8 + r[-1:] for r in rows]
    write_table(os.path.join(out, "sweep.csv"), cols, rows)
    _dump_constants(os.path.join(out, "ledger.txt"), ctx, ledger,
                    dict(C_tilde=C_tilde if C_tilde is not None else math.nan))
    return EXIT_OK


def _threshold_lambdas(cfg):
    th = cfg.threshold
    if th["lambdas"]:
        return th["lambdas"]
    return np.geomspace(th["lambda_min"], th["lambda_max"], th["count"]).tolist()


def cmd_threshold(cfg: RunConfig, out: str) -> int:
    if cfg.nl_kind != "canonical":
        raise ParameterError("threshold needs the canonical nonlinearity")
    th = cfg.threshold
    N = cfg.params.N
    mesh = build_mesh(th["R"], th["M"], 1.0, N, cfg.quad_points)
    sigma1, _ = principal_eigenvalue(mesh, N, cfg.eigen_tol, seed=cfg.seed)
    rows = []
    first = None
    for lam in _threshold_lambdas(cfg):
        rep = nonexistence_certificate(lam, th["R"], th["delta"], mesh, cfg.params, cfg.weight,
                                       sigma1)
        rows.append([lam, rep.Lambda, rep.t1, rep.C_Lambda, rep.sigma1, rep.certified])
        if rep.certified and first is None:
            first = lam
    write_table(os.path.join(out, "threshold.csv"),
                ["lambda", "Lambda", "t1", "C_Lambda", "sigma1", "certified"], rows)
    with open(os.path.join(out, "threshold.txt"), "w") as fh:
        fh.write(f"{HEADER}\nfirst_certified_lambda = {fmt(first) if first else 'none'}\n")
    return EXIT_OK


def cmd_exhaust(cfg: RunConfig, out: str) -> int:
    ctx = Context(cfg, cfg.reference_R)
    c = ctx.const
    lam = ctx.lam()
    # element size of the configured R/M mesh carried over to the first ball
    M0 = max(8, int(round(cfg.M * cfg.R_list[0] / cfg.R)))
    ex = ball_exhaustion(cfg.nonlinearity(lam), cfg.weight, cfg.R_list, M0, cfg.grading,
                         cfg.tol, c.rho, c.K1, cfg.seed)
    rows = [_report_row(r) + [r.w1n <= ex.rho_tilde * (1 + 1e-6)] for r in ex.reports]
    write_table(os.path.join(out, "exhaust.csv"), REPORT_COLUMNS + ["norm_ok"], rows)
    write_table(os.path.join(out, "annulus.csv"), ["m", "sup"],
                [[m, s] for m, s in enumerate(ex.annulus_sup)])
    write_table(os.path.join(out, "window.csv"), ["R_prev", "R_next", "w1n_diff"],
                [[a, b, d] for a, b, d in zip(cfg.R_list, cfg.R_list[1:], ex.window_diffs)])
    write_csv(ex.reports[-1].solution, os.path.join(out, "solution.csv"))
    return EXIT_OK


def cmd_check_fk(cfg: RunConfig, out: str) -> int:
    cf = cfg.check_fk
    nl = cfg.nonlinearity(0.0)
    n = int(round(2 * cf["s_max"] / cf["step"]))
    s = np.linspace(-cf["s_max"], cf["s_max"], n + 1)
    rows = []
    for k in range(1, cf["k_max"] + 1):
        rows.append(["envelope", k, float(len(envelope_violations(nl, k, s)))])
    sb = s[np.abs(s) <= cf["bound"]]
    fb = f_eval(nl, sb)
    for k in cf["k_uniform"]:
        rows.append(["uniform_error", k, float(np.max(np.abs(strauss_fk(nl, k, sb) - fb)))])
    gr = check_growth(nl, s)
    rows.append(["growth_violations", 0, float(len(gr.violations))])
    write_table(os.path.join(out, "check_fk.csv"), ["check", "k", "value"], rows)
    return EXIT_OK


def cmd_eigen(cfg: RunConfig, out: str) -> int:
    N = cfg.params.N
    mesh = build_mesh(cfg.R, cfg.M, cfg.grading, N, cfg.quad_points)
    sigma1, phi1 = principal_eigenvalue(mesh, N, cfg.eigen_tol, seed=cfg.seed)
    write_csv(phi1, os.path.join(out, "eigenfunction.csv"))
    write_table(os.path.join(out, "eigen.csv"), ["N", "R", "sigma1"], [[N, cfg.R, sigma1]])
    return EXIT_OK


COMMANDS = {
    "solve": cmd_solve,
    "sweep-lambda": cmd_sweep_lambda,
    "threshold": cmd_threshold,
    "exhaust": cmd_exhaust,
    "check-fk": cmd_check_fk,
    "eigen": cmd_eigen,
}


def _error_record(out, command, kind, exc, code):
    rec = {"command": command, "error": kind, "message": str(exc), "exit_code": code}
    cert = getattr(exc, "certificate", None)
    if cert is not None:
        rec["certificate"] = {k: (float(v) if isinstance(v, (float, np.floating)) else v)
                              for k, v in vars(cert).items() if not isinstance(v, np.ndarray)}
    if isinstance(exc, SearchBudgetError):
        rec["best_residual"] = float(exc.best_residual)
    if isinstance(exc, ScheduleError):
        rec["trace"] = [[fmt(x) for x in row] for row in exc.trace]
    try:
        os.makedirs(out, exist_ok=True)
        with open(os.path.join(out, "error.json"), "w") as fh:
            json.dump(rec, fh, indent=2, sort_keys=True)
    except OSError:
        pass
    print(json.dumps(rec, sort_keys=True), file=sys.stderr)


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="nlap-galerkin", description=__doc__)
    ap.add_argument("command", choices=sorted(COMMANDS))
    ap.add_argument("--config", required=True)
    ap.add_argument("--out", default=None)
    ap.add_argument("--seed", type=int, default=None)
    ap.add_argument("--tol", type=float, default=None)
    args = ap.parse_args(argv)
    out = args.out or "out"
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg.seed = args.seed
        if args.tol is not None:
            if args.tol <= 0:
                raise ParameterError("--tol must be positive")
            cfg.tol = args.tol
        out = args.out or cfg.out_dir
        os.makedirs(out, exist_ok=True)
    except (ParameterError, OSError) as exc:
        _error_record(out, args.command, "config", exc, EXIT_CONFIG)
        return EXIT_CONFIG
    try:
        return COMMANDS[args.command](cfg, out)
    except ParameterError as exc:
        _error_record(out, args.command, "config", exc, EXIT_CONFIG)
        return EXIT_CONFIG
    except CertificateError as exc:
        _error_record(out, args.command, "certificate", exc, EXIT_CERT)
        return EXIT_CERT
    except (SearchBudgetError, ScheduleError) as exc:
        _error_record(out, args.command, "search-budget", exc, EXIT_BUDGET)
        return EXIT_BUDGET


if __name__ == "__main__":
    sys.exit(main())
