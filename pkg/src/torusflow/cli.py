"""Command-line front end.

Exit codes: 0 when every asserted bound holds, 1 on configuration errors,
2 when a nonlinear or iterative solver fails to converge, 3 when a solve
succeeds but an asserted bound or audit fails.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import config as C
from . import io, plotting
from .errors import ConfigError, NewtonFailed, NoConvergence, TorusflowError
from .field import decay_slope, sobolev_norm

EXIT_OK, EXIT_CONFIG, EXIT_NOCONV, EXIT_BOUND = 0, 1, 2, 3
RECOVERY_TOL = 1e-8


def _decay(u):
    s = decay_slope(u)
    return -s if np.isfinite(s) else float("nan")


# -- single solves -------------------------------------------------------------
def run_stokes(cfg, M=None):
    from .stokes import StokesData, solve_stokes

    A = C.build_tensor(cfg)
    f, _ = C.build_vector(cfg, "forcing", M=M)
    g = C.build_g(cfg, M=M)
    try:
        sol = solve_stokes(A, StokesData(f, g), s=cfg.s)
    except TorusflowError as exc:
        raise ConfigError(f"data: {exc}") from None
    rep = sol.report.to_dict()
    rep.update(solver="stokes", iterations=0, decay_slope=_decay(sol.u))
    ok = bool(sol.report.estimates_pass)
    return sol.u, sol.p, rep, ok


def run_oseen(cfg, M=None):
    from .oseen import OseenProblem, solve_oseen

    A = C.build_tensor(cfg)
    f, _ = C.build_vector(cfg, "forcing", M=M)
    g = C.build_g(cfg, M=M)
    U = C.build_wind(cfg, M=M)
    try:
        problem = OseenProblem(A, U, f, g, tol=cfg.tol, max_iter=cfg.max_iter)
    except TorusflowError as exc:
        raise ConfigError(f"data: {exc}") from None
    strategy = cfg.raw.get("strategy", "gmres")
    if strategy not in ("gmres", "picard"):
        raise ConfigError(f"key 'strategy' must be 'gmres' or 'picard', got {strategy!r}")
    sol = solve_oseen(problem, strategy=strategy)
    rep = sol.report.to_dict()
    rep.update(solver="oseen", decay_slope=_decay(sol.u))
    ok = rep["oseen_bound_pass"] is not False
    return sol.u, sol.p, rep, ok


def _smallness(cfg, A, f):
    from .audit import estimate_embedding
    from .navier_stokes import smallness_report

    n = cfg.n
    if n not in (2, 3, 4):
        return {}
    emb = estimate_embedding(4.0, n, min(cfg.M, 8 if n == 2 else 3), seed=cfg.seed)
    return smallness_report(A, f, emb)


def run_ns(cfg, M=None):
    from .navier_stokes import solve_ns_picard

    A = C.build_tensor(cfg)
    f, extra = C.build_vector(cfg, "forcing", M=M)
    u, p, report = solve_ns_picard(A, f, tol=cfg.tol, max_iter=cfg.max_iter, damping=cfg.damping)
    rep = report.to_dict()
    small = _smallness(cfg, A, f)
    rep.update(smallness_threshold=small.get("threshold"),
               smallness_verdict=small.get("smallness_verdict"),
               decay_slope=_decay(u), solver="ns-picard", iterations=report.iterations,
               norm_f_Hm1=sobolev_norm(f, -1.0))
    nf = rep["norm_f_Hm1"]
    rep["residual"] = report.residual_momentum / nf if nf > 0 else report.residual_momentum
    ok = bool(report.apriori_pass)
    if extra is not None:
        err = sobolev_norm(u - extra["u_exact"], 1.0)
        rep["recovery_error_H1"] = err
        rep["recovery_pass"] = bool(err <= RECOVERY_TOL)
        ok = ok and rep["recovery_pass"]
    return u, p, rep, ok


def run_galerkin(cfg, M=None):
    from .navier_stokes import energy_gap, galerkin_solve

    A = C.build_tensor(cfg)
    spec = cfg.raw.get("galerkin", {})
    if not isinstance(spec, dict):
        raise ConfigError("key 'galerkin' must be an object")
    Mb = M if M is not None else spec.get("M", cfg.M)
    modes = spec.get("modes")
    f, _ = C.build_vector(cfg, "forcing", M=M)
    try:
        system, u, p = galerkin_solve(A, f, M=None if modes else C._int(Mb, "galerkin.M", 1),
                                      modes=modes, newton_tol=cfg.tol)
    except NewtonFailed as exc:
        raise NoConvergence(0, float("nan"), str(exc)) from None
    except ValueError as exc:
        raise ConfigError(f"galerkin: {exc}") from None
    eta_norm = float(np.linalg.norm(system.eta))
    gap = energy_gap(A, u, f)
    rep = {
        "solver": "galerkin",
        "coefficients": system.m,
        "iterations": system.newton_iterations,
        "newton_residual": system.residual,
        "homotopy_used": system.homotopy_used,
        "eta_norm": eta_norm,
        "radius_rho": system.radius_rho,
        "radius_pass": bool(eta_norm <= system.radius_rho),
        "energy_gap": gap,
        "norm_u_Hs": sobolev_norm(u, 1.0),
        "decay_slope": _decay(u),
    }
    ok = rep["radius_pass"] and gap <= 1e-10
    rep["eta"] = [float(x) for x in system.eta]
    return u, p, rep, ok


RUNNERS = {"stokes": run_stokes, "oseen": run_oseen, "ns-picard": run_ns, "galerkin": run_galerkin}
COMMAND_SOLVER = {"solve-stokes": "stokes", "solve-oseen": "oseen", "solve-ns": "ns-picard",
                  "galerkin-oracle": "galerkin"}


def write_solution(out, u, p, report):
    out.mkdir(parents=True, exist_ok=True)
    io.write_coefficients(out / "u_coeffs.csv", u)
    io.write_coefficients(out / "p_coeffs.csv", p)
    io.write_grid(out / "u_grid.csv", u)
    io.write_report(out / "report.json", report)
    plotting.plot_spectrum(out / "spectrum.png", {"u": u, "p": p})


def cmd_solve(cfg, solver, out):
    u, p, rep, ok = RUNNERS[solver](cfg)
    rep["seed"] = cfg.seed
    rep["verdict"] = "PASS" if ok else "FAIL"
    write_solution(out, u, p, rep)
    print(f"{solver}: {rep['verdict']} (artifacts in {out})")
    return EXIT_OK if ok else EXIT_BOUND


def study_rows(cfg, Ms, solver):
    """Repeat the solve across truncations with data fixed at the largest M."""
    base = C.ProblemConfig(dict(cfg.raw, M=max(Ms)), cfg.base_dir)
    runner = RUNNERS[solver]
    rows = []
    for M in Ms:
        u, p, rep, ok = runner(base, M)
        if solver == "galerkin":
            res = rep["newton_residual"]
        else:
            res = rep.get("residual")
            if res is None:
                res = max(rep.get("residual_momentum", 0.0), rep.get("residual_divergence", 0.0))
        rows.append({"M": M, "norm_u_Hs": float(rep["norm_u_Hs"]), "residual": float(res),
                     "iterations": int(rep.get("iterations", 0)),
                     "decay_slope": float(rep["decay_slope"]), "ok": ok})
    return rows


def cmd_study(cfg, out):
    Ms = C.m_list(cfg)
    solver = C.solver_name(cfg)
    rows = study_rows(cfg, Ms, solver)
    out.mkdir(parents=True, exist_ok=True)
    cols = ["M", "norm_u_Hs", "residual", "iterations", "decay_slope"]
    io.write_table(out / "table.csv", rows, cols)
    plotting.plot_study(out / "study.png", rows)
    ok = all(r["ok"] for r in rows)
    print(f"study ({solver}, M={Ms}): {'PASS' if ok else 'FAIL'} (artifacts in {out})")
    return EXIT_OK if ok else EXIT_BOUND


def cmd_audit(cfg, out, seed):
    from . import audit

    spec = cfg.raw.get("audit", {}) if cfg is not None else {}
    if not isinstance(spec, dict):
        raise ConfigError("key 'audit' must be an object")
    checks = spec.get("checks", list(audit.ALL_AUDITS))
    if not isinstance(checks, list) or not checks:
        raise ConfigError("key 'audit.checks' must be a non-empty list")
    out.mkdir(parents=True, exist_ok=True)
    ok = True
    for name in checks:
        if name not in audit.ALL_AUDITS:
            raise ConfigError(f"key 'audit.checks': unknown check {name!r}")
        kwargs = {}
        fn = audit.ALL_AUDITS[name]
        params = fn.__code__.co_varnames[: fn.__code__.co_argcount]
        for key in ("trials", "n", "M"):
            if key in spec and key in params:
                kwargs[key] = C._int(spec[key], f"audit.{key}", minimum=1)
        if "seed" in params:
            kwargs["seed"] = seed
        report = fn(**kwargs)
        text = report.to_json() + "\n"
        (out / f"audit_{name}.json").write_text(text)
        sys.stdout.write(text)
        ok = ok and report.passed
    return EXIT_OK if ok else EXIT_BOUND


# -- argument parsing ------------------------------------------------------------
def build_parser():
    parser = argparse.ArgumentParser(prog="torusflow", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("solve-stokes", "solve-oseen", "solve-ns", "galerkin-oracle", "audit", "study"):
        p = sub.add_parser(name)
        p.add_argument("--config", type=Path, required=name != "audit")
        p.add_argument("--seed", type=int)
        p.add_argument("--out", type=Path, default=Path("out"))
        p.add_argument("--tol", type=float)
        p.add_argument("--max-iter", type=int, dest="max_iter")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = C.load_config(args.config) if args.config else None
        if cfg is not None:
            C.apply_overrides(cfg, seed=args.seed, tol=args.tol, max_iter=args.max_iter)
        if args.command == "audit":
            seed = args.seed if args.seed is not None else (cfg.seed if cfg else 0)
            return cmd_audit(cfg, args.out, seed)
        if args.command == "study":
            return cmd_study(cfg, args.out)
        return cmd_solve(cfg, COMMAND_SOLVER[args.command], args.out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NoConvergence as exc:
        print(f"no convergence: {exc}", file=sys.stderr)
        return EXIT_NOCONV
    except TorusflowError as exc:
        print(f"config error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
