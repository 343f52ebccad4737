"""The min-max driver: minimize phi(w) = max_v Phi(v + w) over W.

The outer loop is a line-search descent on phi. While the inner maximizer is
unique and Phi is flagged smooth, the gradient of phi is the W-part of the
gradient of Phi at (s(w), w) (envelope theorem) and directions come from a
BFGS model. Once a degenerate inner maximum or a nonsmooth functional is
seen, the selection switches to the minimal-norm (perturbed) selection and the
descent continues by gradient sampling on phi; the switch is logged in the
trace.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ._optim import gradient_sampling_minimize
from .clarke import (
    DEFAULT_SCHEDULE,
    CriticalityCertificate,
    LipschitzFunctional,
    ball_points,
    certify_critical,
    min_norm_point,
    subdifferential_approx,
)
from .errors import InputError, NonConvergenceError, NsMinimaxError, StageError
from .selection import SelectionConfig, SelectionResult, inner_max, perturbed_selection
from .splitspace import SplitSpace


@dataclass(frozen=True)
class OuterConfig:
    w0: Optional[tuple] = None
    max_iter: int = 2000
    eps_outer: Optional[float] = None  # None -> 1e-8 * (1 + |phi(w0)|)
    fallback_radii: tuple[float, ...] = (1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-7)
    fallback_samples: int = 0  # 0 -> dim_w + 1
    fallback_max_iter: int = 200
    seed: int = 0


@dataclass(frozen=True)
class CriticalityConfig:
    eps_crit: Optional[float] = None  # None -> 1e-6 * max(1, local Lipschitz estimate)
    schedule: tuple[float, ...] = DEFAULT_SCHEDULE
    samples: Optional[int] = None
    seed: int = 0


@dataclass(frozen=True)
class AuditConfig:
    v_samples: int = 1000
    w_samples: int = 100
    v_radius: float = 1.0
    w_radius: float = 1.0
    seed: int = 0


@dataclass(frozen=True)
class MinimaxProblem:
    phi: LipschitzFunctional
    split: SplitSpace
    selection_cfg: SelectionConfig = SelectionConfig()
    outer_cfg: OuterConfig = OuterConfig()
    criticality_cfg: CriticalityConfig = CriticalityConfig()
    audit_cfg: AuditConfig = AuditConfig()

    def __post_init__(self):
        if self.phi.dim != self.split.dim_total:
            raise InputError(f"phi.dim = {self.phi.dim} but the split lives in dimension {self.split.dim_total}")


@dataclass
class TraceEntry:
    iteration: int
    w: list
    phi: float
    step_norm: float
    grad_norm: float
    mode: str
    event: str = ""


@dataclass(frozen=True)
class CriticalPointReport:
    u_bar: np.ndarray
    w_bar: np.ndarray
    v_bar: np.ndarray
    c: float
    phi_of_w_bar: float
    criticality: CriticalityCertificate
    criticality_split: tuple[float, float]
    saddle_audit: tuple[float, float]
    tol_saddle: float
    iterations: int
    trace: list
    degenerate: bool
    switched: bool
    timings: dict = field(default_factory=dict)


class ValueFunction:
    """phi(w) by fresh inner solves, warm-started from the previous maximizer."""

    def __init__(self, problem: MinimaxProblem):
        self.problem = problem
        self.warm = None
        self.perturbed = False
        self.evaluations = 0

    def select(self, w, warm: bool = True) -> SelectionResult:
        p = self.problem
        self.evaluations += 1
        sel = inner_max(p.phi, p.split, w, p.selection_cfg, warm_start=self.warm if warm else None)
        if sel.degeneracy_flag:
            self.perturbed = True
        if self.perturbed:
            sel = perturbed_selection(p.phi, p.split, w, cfg=p.selection_cfg, base=sel)
        if warm:
            self.warm = sel.v_star
        return sel

    def __call__(self, w) -> float:
        return self.select(w).phi_of_w


def envelope_gradient(problem: MinimaxProblem, sel: SelectionResult) -> Optional[np.ndarray]:
    """W-coordinates of grad Phi at (s(w), w); None where Phi is not differentiable."""
    u = problem.split.embed(sel.v_star, sel.w_coords)
    g = problem.phi.gradient(u)
    return None if g is None else problem.split.basis_w.T @ g


def outer_gradient(problem: MinimaxProblem, w_coords, sel: SelectionResult, radius: float | None = None,
                   vf: ValueFunction | None = None, seed: int = 0) -> np.ndarray:
    """Gradient (or min-norm sampled subgradient) of phi at w.

    Smooth, nondegenerate case: envelope gradient. Otherwise: the min-norm
    element of the hull of envelope gradients of phi at w and at points
    sampled in B(w, radius), each with its own inner solve.
    """
    w = np.asarray(w_coords, dtype=float)
    if not sel.degeneracy_flag and problem.phi.smooth:
        g = envelope_gradient(problem, sel)
        if g is not None:
            return g
    if vf is None:
        vf = ValueFunction(problem)
        vf.perturbed = sel.degeneracy_flag
    if radius is None:
        radius = problem.outer_cfg.fallback_radii[0] * (1 + float(np.linalg.norm(w)))
    m = problem.outer_cfg.fallback_samples or problem.split.dim_w + 1
    rng = np.random.default_rng(seed)
    G = []
    g0 = envelope_gradient(problem, sel)
    if g0 is not None:
        G.append(g0)
    for wp in ball_points(w, radius, m, rng):
        g = envelope_gradient(problem, vf.select(wp, warm=False))
        if g is not None:
            G.append(g)
    if not G:
        raise NsMinimaxError("no differentiable sample for the outer subgradient")
    return min_norm_point(np.vstack(G))[0]


def _bfgs_phase(problem: MinimaxProblem, vf: ValueFunction, w, sel, eps, trace, max_iter):
    """Returns (w, sel, status) with status in converged | switch | stalled | maxiter."""
    n = w.size
    g = envelope_gradient(problem, sel)
    if g is None:
        return w, sel, "switch"
    f = sel.phi_of_w
    H = None
    for it in range(max_iter):
        gn = float(np.linalg.norm(g))
        if gn <= eps:
            return w, sel, "converged"
        d = -g if H is None else -(H @ g)
        slope = float(g @ d)
        if slope >= 0:
            H, d, slope = None, -g, -gn * gn
        t = 1.0 if H is not None else min(1.0, 1.0 / gn)
        while True:
            wn = w + t * d
            seln = vf.select(wn)
            fn = seln.phi_of_w
            if fn <= f + 1e-4 * t * slope:
                break
            t *= 0.5
            if t * np.linalg.norm(d) <= 1e-16 * (1 + np.linalg.norm(w)):
                return w, sel, "stalled"
        if vf.perturbed:
            trace.append(TraceEntry(len(trace), wn.tolist(), fn, float(np.linalg.norm(wn - w)), gn, "bfgs",
                                    "degenerate inner maximum"))
            return wn, seln, "switch"
        gnew = envelope_gradient(problem, seln)
        trace.append(TraceEntry(len(trace), wn.tolist(), fn, float(np.linalg.norm(wn - w)), gn, "bfgs"))
        if gnew is None:
            return wn, seln, "switch"
        s, y = wn - w, gnew - g
        sy = float(s @ y)
        if sy > 1e-12 * np.linalg.norm(s) * np.linalg.norm(y):
            if H is None:
                H = np.eye(n) * (sy / float(y @ y))
            rho = 1.0 / sy
            Hy = H @ y
            H = H - rho * (np.outer(s, Hy) + np.outer(Hy, s)) + (rho * rho * float(y @ Hy) + rho) * np.outer(s, s)
        w, sel, f, g = wn, seln, fn, gnew
    return w, sel, "maxiter"


def outer_minimize(problem: MinimaxProblem):
    """Minimize phi over W. Returns (w_bar, selection at w_bar, trace, switched)."""
    oc = problem.outer_cfg
    split = problem.split
    w = np.zeros(split.dim_w) if oc.w0 is None else np.asarray(oc.w0, dtype=float).reshape(split.dim_w)
    vf = ValueFunction(problem)
    sel = vf.select(w)
    eps = oc.eps_outer if oc.eps_outer is not None else 1e-8 * (1 + abs(sel.phi_of_w))
    trace = [TraceEntry(0, w.tolist(), sel.phi_of_w, 0.0, float("nan"), "start")]
    status = "switch"
    if not vf.perturbed:
        w, sel, status = _bfgs_phase(problem, vf, w, sel, eps, trace, oc.max_iter)
    if status == "converged" and problem.phi.smooth:
        return w, sel, trace, False
    if status == "maxiter":
        raise NonConvergenceError(f"outer descent hit {oc.max_iter} iterations", trace)

    reason = ("degenerate inner maximum" if vf.perturbed else
              "nonsmooth functional" if not problem.phi.smooth else f"smooth phase {status}")
    vf.perturbed = vf.perturbed or sel.degeneracy_flag
    trace.append(TraceEntry(len(trace), w.tolist(), sel.phi_of_w, 0.0, float("nan"), "switch",
                            f"switch to sampled subgradient: {reason}"))
    m = oc.fallback_samples or split.dim_w + 1
    scale = 1.0 + float(np.linalg.norm(w))
    radii = tuple(r * scale for r in oc.fallback_radii)

    def grad(wp):
        return envelope_gradient(problem, vf.select(wp, warm=False))

    def on_step(x, f, gnorm, radius):
        trace.append(TraceEntry(len(trace), x.tolist(), f, float("nan"), gnorm, "sampled",
                                f"radius={radius:.3g}"))

    res = gradient_sampling_minimize(vf, grad, w, radii, tol=eps, samples=m, seed=oc.seed,
                                     max_iter=oc.fallback_max_iter, on_step=on_step)
    if res.status == "maxiter":
        raise NonConvergenceError(f"sampled-subgradient phase hit {oc.fallback_max_iter} iterations", trace)
    w = res.x
    sel = vf.select(w)
    return w, sel, trace, True


def saddle_audit(problem: MinimaxProblem, v_bar, w_bar, c: float) -> tuple[float, float]:
    """(max_v Phi(v + w_bar) - c, min_w phi(w) - c) over sampled v and w, with fresh inner solves for phi."""
    ac = problem.audit_cfg
    split = problem.split
    rng = np.random.default_rng(ac.seed)
    vs = ball_points(v_bar, ac.v_radius * (1 + float(np.linalg.norm(v_bar))), ac.v_samples, rng)
    upper = max(problem.phi.value(split.embed(v, w_bar)) for v in vs) - c
    ws = ball_points(w_bar, ac.w_radius * (1 + float(np.linalg.norm(w_bar))), ac.w_samples, rng)
    vf = ValueFunction(problem)
    lower = min(vf.select(w, warm=False).phi_of_w for w in ws) - c
    return float(upper), float(lower)


def _stage(name, fn, *args, timings=None):
    t0 = time.perf_counter()
    try:
        return fn(*args)
    except StageError:
        raise
    except NsMinimaxError as exc:
        raise StageError(name, exc) from exc
    finally:
        if timings is not None:
            timings[name] = time.perf_counter() - t0


def solve_saddle(problem: MinimaxProblem) -> CriticalPointReport:
    """Outer minimization, final selection, criticality certificate and saddle audit."""
    timings: dict = {}
    w_bar, sel, trace, switched = _stage("outer", outer_minimize, problem, timings=timings)
    split, phi = problem.split, problem.phi
    v_bar = np.asarray(sel.v_star, dtype=float)
    u_bar = split.embed(v_bar, w_bar)
    c = phi.value(u_bar)

    cc = problem.criticality_cfg
    eps_crit = cc.eps_crit
    if eps_crit is None:
        probe = subdifferential_approx(phi, u_bar, cc.schedule[0], cc.samples, seed=cc.seed)
        lip = float(np.max(np.linalg.norm(probe.generators, axis=1)))
        eps_crit = 1e-6 * max(1.0, lip)
    cert = _stage("certify", certify_critical, phi, u_bar, eps_crit, cc.schedule, cc.samples, cc.seed,
                  timings=timings)
    pv, pw = split.coords(cert.min_norm_point)
    upper, lower = _stage("audit", saddle_audit, problem, v_bar, w_bar, c, timings=timings)
    return CriticalPointReport(u_bar=u_bar, w_bar=w_bar, v_bar=v_bar, c=c, phi_of_w_bar=sel.phi_of_w,
                               criticality=cert,
                               criticality_split=(float(np.linalg.norm(pv)), float(np.linalg.norm(pw))),
                               saddle_audit=(upper, lower), tol_saddle=1e-6 * (1 + abs(c)),
                               iterations=len(trace) - 1, trace=trace, degenerate=sel.degeneracy_flag,
                               switched=switched, timings=timings)
