"""Command-line front end.

    python3 -m nsminimax --mode solve --config run.json --seed 7 --out results/

Exit codes: 0 success, 1 input error, 2 hypothesis-check failure,
3 solver nonconvergence or other solver failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import subprocess
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Optional

import numpy as np

from . import __version__
from .clarke import LipschitzFunctional
from .dirichlet import (
    DirichletProblem,
    DirichletReport,
    linear_oracle,
    linear_problem,
    solve_dirichlet,
    tanh_problem,
)
from .errors import HypothesisFailure, InputError, NonConvergenceError, NsMinimaxError, StageError
from .expr import expression_dims, parse_expression, parse_nonlinearity
from .hypotheses import (
    ConditionReport,
    check_anticoercive_V,
    check_coercive_on_W,
    check_DO,
    check_quasiconcave_V,
    check_weak_lsc,
)
from .minimax import AuditConfig, CriticalityConfig, CriticalPointReport, MinimaxProblem, OuterConfig, solve_saddle
from .selection import SelectionConfig
from .splitspace import SplitSpace

EXIT_OK, EXIT_INPUT, EXIT_HYPOTHESIS, EXIT_SOLVER = 0, 1, 2, 3
MODES = ("check", "solve", "dirichlet", "sweep", "selftest")


# Configuration --------------------------------------------------------------

@dataclass
class RunConfig:
    mode: str
    problem: dict = field(default_factory=dict)
    dirichlet: dict = field(default_factory=dict)
    sweep: dict = field(default_factory=dict)
    selection: dict = field(default_factory=dict)
    outer: dict = field(default_factory=dict)
    criticality: dict = field(default_factory=dict)
    audit: dict = field(default_factory=dict)
    seed: int = 0
    out: str = "nsminimax-out"
    force: bool = False
    threads: int = 1

    def __post_init__(self):
        if self.mode not in MODES:
            raise InputError(f"unknown mode {self.mode!r}; expected one of {', '.join(MODES)}")
        if isinstance(self.seed, bool) or not isinstance(self.seed, int) or not 0 <= self.seed < 2 ** 64:
            raise InputError(f"seed must be an integer in [0, 2^64), got {self.seed!r}")
        if not isinstance(self.threads, int) or self.threads < 1:
            raise InputError("threads must be a positive integer")

    def echo(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


def load_config(path: Optional[str]) -> dict:
    if path is None:
        return {}
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise InputError(f"cannot read config {path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise InputError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise InputError("config must be a JSON object")
    return data


def build_config(args: argparse.Namespace) -> RunConfig:
    data = load_config(args.config)
    known = {f.name for f in fields(RunConfig)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise InputError(f"unknown config field(s): {', '.join(unknown)}")
    for key in ("mode", "seed", "out", "threads"):
        val = getattr(args, key)
        if val is not None:
            data[key] = val
    if args.force:
        data["force"] = True
    if "mode" not in data:
        raise InputError("no mode given (use --mode or the config field 'mode')")
    return RunConfig(**data)


def _dataclass_from(cls, overrides: dict, seed: int, tuples=()):
    names = {f.name for f in fields(cls)}
    bad = sorted(set(overrides) - names)
    if bad:
        raise InputError(f"unknown {cls.__name__} field(s): {', '.join(bad)}")
    kw = {k: (tuple(v) if k in tuples and v is not None else v) for k, v in overrides.items()}
    if "seed" in names:
        kw.setdefault("seed", seed)
    try:
        return cls(**kw)
    except TypeError as exc:
        raise InputError(str(exc)) from exc


def solver_configs(cfg: RunConfig):
    sel = _dataclass_from(SelectionConfig, cfg.selection, cfg.seed, tuples=("gs_radii",))
    outer = _dataclass_from(OuterConfig, cfg.outer, cfg.seed, tuples=("w0", "fallback_radii"))
    crit = _dataclass_from(CriticalityConfig, cfg.criticality, cfg.seed, tuples=("schedule",))
    audit = _dataclass_from(AuditConfig, cfg.audit, cfg.seed)
    return sel, outer, crit, audit


# Problems -------------------------------------------------------------------

def quadratic_saddle(a: float = 3.0, b: float = -2.0) -> LipschitzFunctional:
    """Phi(v, w) = -v^2/2 + w^2/2 + a v + b w, saddle at (a, -b) with value (a^2 - b^2)/2."""
    return LipschitzFunctional(
        eval=lambda u: -0.5 * u[0] ** 2 + 0.5 * u[1] ** 2 + a * u[0] + b * u[1],
        dim=2,
        grad_opt=lambda u: np.array([a - u[0], u[1] + b]),
        lipschitz_hint=None,
        name=f"quadratic_saddle(a={a:g}, b={b:g})",
    )


def nonsmooth_abs() -> LipschitzFunctional:
    """Phi(v, w) = -|v| + w^2."""
    return LipschitzFunctional(eval=lambda u: -abs(u[0]) + u[1] ** 2, dim=2, smooth=False, name="nonsmooth_abs")


BUILTINS = {"quadratic_saddle": quadratic_saddle, "nonsmooth_abs": nonsmooth_abs}


def build_problem(spec: dict) -> tuple[LipschitzFunctional, SplitSpace]:
    if "expression" in spec:
        k, m = expression_dims(spec["expression"], spec.get("k"), spec.get("m"))
        phi = parse_expression(spec["expression"], k, m)
        return phi, SplitSpace.coordinate(k, m)
    name = spec.get("builtin", "quadratic_saddle")
    if name not in BUILTINS:
        raise InputError(f"unknown built-in problem {name!r}; known: {', '.join(sorted(BUILTINS))}")
    try:
        phi = BUILTINS[name](**spec.get("params", {}))
    except TypeError as exc:
        raise InputError(f"bad parameters for {name}: {exc}") from exc
    return phi, SplitSpace.coordinate(1, 1)


def build_dirichlet(spec: dict, cfg: RunConfig) -> DirichletProblem:
    sel, outer, crit, _ = solver_configs(cfg)
    kw = dict(n=int(spec.get("n", 127)), k=int(spec.get("k", 1)), force=cfg.force,
              selection_cfg=replace(sel, starts=cfg.selection.get("starts", 4)), criticality_cfg=crit)
    if cfg.outer:
        kw["outer_cfg"] = outer
    name = spec.get("builtin")
    if "f" in spec:
        f, smooth = parse_nonlinearity(spec["f"])
        return DirichletProblem(f=f, smooth=smooth, name=spec["f"], **kw)
    if name in (None, "dirichlet_linear"):
        return linear_problem(float(spec.get("mu", 25.0)), **kw)
    if name == "dirichlet_tanh":
        return tanh_problem(float(spec.get("mu", 25.0)), float(spec.get("jump", 0.5)),
                            float(spec.get("width", 1e-6)), **kw)
    raise InputError(f"unknown Dirichlet built-in {name!r}; known: dirichlet_linear, dirichlet_tanh")


# Serialization --------------------------------------------------------------

def jsonable(obj: Any) -> Any:
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else None
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def condition_dict(r: ConditionReport) -> dict:
    return {"condition": r.condition_id, "verdict": r.verdict, "witnesses": list(r.witnesses),
            "sample_spec": r.sample_spec, "details": r.details, "note": r.note}


def critical_point_dict(r: CriticalPointReport) -> dict:
    cert = r.criticality
    return {
        "u_bar": r.u_bar, "v_bar": r.v_bar, "w_bar": r.w_bar, "c": r.c, "phi_of_w_bar": r.phi_of_w_bar,
        "criticality": {"verdict": cert.verdict, "residual": cert.residual, "eps_crit": cert.eps_crit,
                        "radius_schedule": cert.radius_schedule, "residuals": cert.residuals},
        "criticality_split": {"v": r.criticality_split[0], "w": r.criticality_split[1]},
        "saddle_audit": {"max_v_minus_c": r.saddle_audit[0], "min_w_minus_c": r.saddle_audit[1],
                         "tol_saddle": r.tol_saddle},
        "iterations": r.iterations, "degenerate": r.degenerate, "switched": r.switched,
        "switch_events": [e.event for e in r.trace if e.event.startswith("switch")],
    }


def dirichlet_dict(r: DirichletReport) -> dict:
    return {"critical_point": critical_point_dict(r.report), "residual_inf": r.residual_inf,
            "lambda_k_kp1": [r.eigenvalues[0], r.eigenvalues[1]] if r.eigenvalues is not None else None,
            "nonresonance": [condition_dict(c) for c in r.nonresonance],
            "hypotheses": [condition_dict(c) for c in r.hypotheses], "forced": r.forced}


def version_string() -> str:
    rev = "unknown"
    try:
        out = subprocess.run(["git", "rev-parse", "--short", "HEAD"], capture_output=True, text=True, timeout=5,
                             cwd=Path(__file__).resolve().parent)
        if out.returncode == 0 and out.stdout.strip():
            rev = out.stdout.strip()
    except (OSError, subprocess.SubprocessError):
        pass
    return f"nsminimax {__version__}+g{rev}"


def write_table(path: Path, header: list, rows: list) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow(["" if v is None or (isinstance(v, float) and not math.isfinite(v)) else repr(v)
                        if isinstance(v, float) else v for v in row])


def trace_rows(r: CriticalPointReport) -> list:
    return [[e.iteration, e.phi, e.step_norm, e.grad_norm, e.mode, e.event] for e in r.trace]


def residual_rows(r: CriticalPointReport) -> list:
    return [[rad, res] for rad, res in zip(r.criticality.radius_schedule, r.criticality.residuals)]


# Modes ------------------------------------------------------------------------

@dataclass
class Outcome:
    exit_code: int
    results: dict
    tables: dict = field(default_factory=dict)  # file name -> (header, rows)
    message: str = ""


def run_checks(phi: LipschitzFunctional, split: SplitSpace, seed: int) -> list[ConditionReport]:
    radii = (1.0, 2.0, 4.0, 8.0, 16.0)
    return [check_coercive_on_W(phi, split, radii, seed=seed),
            check_quasiconcave_V(phi, split, seed=seed),
            check_anticoercive_V(phi, split, radii, seed=seed),
            check_weak_lsc(),
            check_DO(phi, split, seed=seed)]


def mode_check(cfg: RunConfig, timings: dict) -> Outcome:
    phi, split = build_problem(cfg.problem)
    t0 = time.perf_counter()
    reps = run_checks(phi, split, cfg.seed)
    timings["check"] = time.perf_counter() - t0
    failed = [r.condition_id for r in reps if r.verdict == "fails"]
    return Outcome(EXIT_HYPOTHESIS if failed else EXIT_OK,
                   {"problem": phi.name, "conditions": [condition_dict(r) for r in reps]},
                   message=f"hypothesis check failed: {', '.join(failed)}" if failed else "")


def mode_solve(cfg: RunConfig, timings: dict) -> Outcome:
    phi, split = build_problem(cfg.problem)
    sel, outer, crit, audit = solver_configs(cfg)
    t0 = time.perf_counter()
    reps = run_checks(phi, split, cfg.seed)
    timings["check"] = time.perf_counter() - t0
    failed = [r.condition_id for r in reps if r.verdict == "fails"]
    results = {"problem": phi.name, "conditions": [condition_dict(r) for r in reps], "forced": bool(failed)}
    if failed and not cfg.force:
        return Outcome(EXIT_HYPOTHESIS, results, message=f"hypothesis check failed: {', '.join(failed)}")
    rep = solve_saddle(MinimaxProblem(phi, split, sel, outer, crit, audit))
    timings.update(rep.timings)
    results["critical_point"] = critical_point_dict(rep)
    return Outcome(EXIT_OK, results, {
        "trace.csv": (["iteration", "phi", "step_norm", "grad_norm", "mode", "event"], trace_rows(rep)),
        "residuals.csv": (["radius", "residual"], residual_rows(rep))})


def mode_dirichlet(cfg: RunConfig, timings: dict) -> Outcome:
    prob = build_dirichlet(cfg.dirichlet, cfg)
    t0 = time.perf_counter()
    rep = solve_dirichlet(prob)
    timings["dirichlet"] = time.perf_counter() - t0
    timings.update(rep.report.timings)
    nodes = prob.nodes
    return Outcome(EXIT_OK, {"problem": prob.name, "n": prob.n, "k": prob.k, "dirichlet": dirichlet_dict(rep)}, {
        "trace.csv": (["iteration", "phi", "step_norm", "grad_norm", "mode", "event"], trace_rows(rep.report)),
        "residuals.csv": (["radius", "residual"], residual_rows(rep.report)),
        "solution.csv": (["x", "u"], [[float(x), float(u)] for x, u in zip(nodes, rep.u)])})


def _sweep_one(mu: float, spec: dict, cfg: RunConfig) -> dict:
    prob = build_dirichlet({**spec, "builtin": "dirichlet_linear", "mu": mu}, cfg)
    rep = solve_dirichlet(prob)
    oracle = linear_oracle(mu, prob.n)
    return {"mu": mu, "c": rep.report.c, "oracle_error_inf": float(np.max(np.abs(rep.u - oracle))),
            "residual_inf": rep.residual_inf, "report": dirichlet_dict(rep)}


def mode_sweep(cfg: RunConfig, timings: dict) -> Outcome:
    spec = dict(cfg.sweep)
    mus = [float(m) for m in spec.pop("mu", [12, 20, 25, 35])]
    t0 = time.perf_counter()
    if cfg.threads > 1:
        with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
            runs = list(pool.map(lambda m: _sweep_one(m, spec, cfg), mus))
    else:
        runs = [_sweep_one(m, spec, cfg) for m in mus]
    timings["sweep"] = time.perf_counter() - t0
    rows = [[r["mu"], r["c"], r["oracle_error_inf"], r["residual_inf"]] for r in runs]
    return Outcome(EXIT_OK, {"runs": runs},
                   {"sweep.csv": (["mu", "c", "oracle_error_inf", "residual_inf"], rows)})


def selftest_results(seed: int = 0) -> dict:
    """Small invariant suite covering each module."""
    from .clarke import generalized_dir_derivative, min_norm_point, optimality_violation, subdifferential_approx
    from .hypotheses import run_bundled_cases
    from .selection import perturbed_selection

    checks = {}
    absf = LipschitzFunctional(lambda x: abs(x[0]), 1, smooth=False)
    checks["dir_derivative_abs"] = all(
        abs(generalized_dir_derivative(absf, np.zeros(1), np.array([v])) - abs(v)) <= 1e-6 for v in (1, -1, 3, -3))
    sub = subdifferential_approx(absf, np.zeros(1), 1e-4, 50, seed=seed)
    checks["subdifferential_abs"] = bool(abs(sub.generators.min() + 1) <= 1e-3 and abs(sub.generators.max() - 1)
                                         <= 1e-3 and sub.min_norm_value <= 1e-3)
    rng = np.random.default_rng(seed)
    G = rng.normal(size=(8, 3))
    p, _ = min_norm_point(G)
    checks["min_norm_optimality"] = optimality_violation(p, G) <= 1e-10
    plateau = LipschitzFunctional(lambda u: -max(0.0, abs(u[0]) - 1) ** 2 + u[1] ** 2, 2)
    ps = perturbed_selection(plateau, SplitSpace.coordinate(1, 1), [0.0], cfg=SelectionConfig(seed=seed))
    checks["plateau_min_norm_selection"] = bool(np.linalg.norm(ps.v_star) <= 1e-3)
    outcomes = run_bundled_cases(seed)
    checks["bundled_hypothesis_cases"] = all(o.correct and o.witnesses_reproduce for o in outcomes)
    rep = solve_saddle(MinimaxProblem(quadratic_saddle(), SplitSpace.coordinate(1, 1),
                                      SelectionConfig(seed=seed), OuterConfig(seed=seed),
                                      CriticalityConfig(seed=seed), AuditConfig(seed=seed)))
    checks["quadratic_saddle"] = bool(abs(rep.c - 2.5) <= 1e-10 and np.allclose(rep.u_bar, [3, 2], atol=1e-8))
    return checks


def mode_selftest(cfg: RunConfig, timings: dict) -> Outcome:
    t0 = time.perf_counter()
    checks = selftest_results(cfg.seed)
    timings["selftest"] = time.perf_counter() - t0
    failed = [k for k, ok in checks.items() if not ok]
    return Outcome(EXIT_HYPOTHESIS if failed else EXIT_OK, {"checks": checks},
                   message=f"selftest failed: {', '.join(failed)}" if failed else "")


MODE_FUNCS = {"check": mode_check, "solve": mode_solve, "dirichlet": mode_dirichlet, "sweep": mode_sweep,
              "selftest": mode_selftest}


def run(cfg: RunConfig) -> int:
    """Execute ``cfg`` and write report.json plus CSV tables into ``cfg.out``."""
    timings: dict = {}
    t0 = time.perf_counter()
    try:
        out = MODE_FUNCS[cfg.mode](cfg, timings)
    except HypothesisFailure as exc:
        out = Outcome(EXIT_HYPOTHESIS, {"conditions": [condition_dict(r) for r in exc.reports]}, message=str(exc))
    except StageError as exc:
        out = Outcome(EXIT_INPUT if isinstance(exc.cause, InputError) else EXIT_SOLVER,
                      {"failed_stage": exc.stage}, message=str(exc))
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (NonConvergenceError, NsMinimaxError) as exc:
        out = Outcome(EXIT_SOLVER, {}, message=str(exc))
    timings["total"] = time.perf_counter() - t0
    report = {"version": version_string(), "mode": cfg.mode, "seed": cfg.seed, "exit_code": out.exit_code,
              "message": out.message, "config": cfg.echo(), "results": out.results, "timings": timings}
    try:
        outdir = Path(cfg.out)
        outdir.mkdir(parents=True, exist_ok=True)
        with open(outdir / "report.json", "w", encoding="utf-8") as fh:
            json.dump(jsonable(report), fh, indent=2, allow_nan=False)
            fh.write("\n")
        for name, (header, rows) in out.tables.items():
            write_table(outdir / name, header, rows)
    except OSError as exc:
        print(f"error: cannot write outputs to {cfg.out}: {exc.strerror}", file=sys.stderr)
        return EXIT_INPUT
    if out.message:
        print(out.message, file=sys.stderr)
    return out.exit_code


def make_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="nsminimax", description="Nonsmooth min-max critical point solver.")
    p.add_argument("--mode", choices=MODES, default=None)
    p.add_argument("--config", default=None, help="JSON run configuration")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default=None, help="output directory (default: nsminimax-out)")
    p.add_argument("--force", action="store_true", help="run the solver even when hypothesis checks fail")
    p.add_argument("--threads", type=int, default=None, help="worker threads for sweeps")
    return p


def main(argv: Optional[list] = None) -> int:
    parser = make_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_INPUT
    try:
        cfg = build_config(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
