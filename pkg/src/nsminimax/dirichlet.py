"""Semilinear Dirichlet problems -u'' = f(x, u) on (0, 1), u(0) = u(1) = 0.

Second-order finite differences on n interior nodes; the energy
Phi(u) = h/2 u^T A u - h sum F(x_i, u_i) is split at the k-th discrete
eigenvalue of A and handed to the min-max driver (max over the low modes V,
min over the high modes W).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .clarke import LipschitzFunctional
from .errors import HypothesisFailure, InputError
from .hypotheses import (
    ConditionReport,
    check_anticoercive_V,
    check_coercive_on_W,
    check_nonresonance,
    check_quasiconcave_V,
)
from .minimax import CriticalityConfig, CriticalPointReport, MinimaxProblem, OuterConfig, solve_saddle
from .selection import SelectionConfig
from .splitspace import SplitSpace, eigensplit

_GL_PANELS = 4
_gl_x, _gl_w = np.polynomial.legendre.leggauss(32)
_GL_NODES, _GL_WEIGHTS = (_gl_x + 1) / 2, _gl_w / 2
_PANELS = np.arange(_GL_PANELS) / _GL_PANELS


@dataclass(frozen=True)
class DirichletProblem:
    """``f(x, s)`` and ``F(x, t)`` must accept numpy arrays elementwise."""

    n: int
    f: Callable
    k: int = 1
    F: Optional[Callable] = None
    smooth: bool = True
    name: str = ""
    force: bool = False
    s_grid: tuple = tuple(np.linspace(-1e3, 1e3, 41)) + tuple(np.linspace(-10, 10, 41))
    selection_cfg: SelectionConfig = SelectionConfig(starts=4)
    outer_cfg: Optional[OuterConfig] = None  # None -> eps_outer tied to the mesh size
    criticality_cfg: CriticalityConfig = CriticalityConfig()

    def __post_init__(self):
        if self.n < 3:
            raise InputError(f"need n >= 3 interior nodes, got {self.n}")
        if not 1 <= self.k < self.n:
            raise InputError(f"split index k must satisfy 1 <= k < n, got k={self.k}")

    @property
    def h(self) -> float:
        return 1.0 / (self.n + 1)

    @property
    def nodes(self) -> np.ndarray:
        return np.arange(1, self.n + 1) * self.h

    def potential(self, t) -> np.ndarray:
        """F(x_i, t_i) at every node; Gauss-Legendre quadrature when no closed form is given."""
        t = np.asarray(t, dtype=float)
        if self.F is not None:
            return np.broadcast_to(np.asarray(self.F(self.nodes, t), dtype=float), t.shape)
        # F(x, t) = t * int_0^1 f(x, tau t) dtau, vectorized over nodes and panels
        tau = (_PANELS[:, None] + _GL_NODES[None, :] / _GL_PANELS).ravel()
        wts = np.tile(_GL_WEIGHTS / _GL_PANELS, _GL_PANELS)
        x = np.broadcast_to(self.nodes[:, None], (self.n, tau.size))
        vals = np.asarray(self.f(x, t[:, None] * tau[None, :]), dtype=float)
        return t * (vals @ wts)


@dataclass(frozen=True)
class DiscreteEnergy:
    stiffness: np.ndarray
    weights: np.ndarray

    @property
    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.stiffness)


def stiffness_matrix(n: int) -> np.ndarray:
    h = 1.0 / (n + 1)
    return (2 * np.eye(n) - np.eye(n, k=1) - np.eye(n, k=-1)) / (h * h)


def closed_form_eigenvalues(n: int) -> np.ndarray:
    h = 1.0 / (n + 1)
    return (2 - 2 * np.cos(np.arange(1, n + 1) * np.pi * h)) / (h * h)


def assemble(problem: DirichletProblem) -> tuple[DiscreteEnergy, SplitSpace]:
    A = stiffness_matrix(problem.n)
    split = eigensplit(A, problem.k)
    return DiscreteEnergy(A, np.full(problem.n, problem.h)), split


def _check_u(problem: DirichletProblem, u) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    if u.shape != (problem.n,):
        raise InputError(f"expected a vector of length {problem.n}, got shape {u.shape}")
    return u


def energy(problem: DirichletProblem, en: DiscreteEnergy, u) -> float:
    u = _check_u(problem, u)
    return float(0.5 * problem.h * (u @ en.stiffness @ u) - en.weights @ problem.potential(u))


def energy_residual(problem: DirichletProblem, en: DiscreteEnergy, u) -> np.ndarray:
    """A u - f(x, u) nodewise (the energy gradient divided by the quadrature weight)."""
    u = _check_u(problem, u)
    return en.stiffness @ u - np.asarray(problem.f(problem.nodes, u), dtype=float)


def energy_functional(problem: DirichletProblem, en: DiscreteEnergy) -> LipschitzFunctional:
    return LipschitzFunctional(
        eval=lambda u: energy(problem, en, u),
        dim=problem.n,
        grad_opt=lambda u: en.weights * energy_residual(problem, en, u),
        smooth=problem.smooth,
        name=problem.name or "dirichlet-energy",
    )


def nonresonance_reports(problem: DirichletProblem, lam: np.ndarray) -> tuple[ConditionReport, ConditionReport]:
    lk, lk1 = float(lam[problem.k - 1]), float(lam[problem.k])
    return tuple(check_nonresonance(problem.f, lk, lk1, problem.s_grid, condition=c, F=problem.F)
                 for c in ("eq1", "eq2"))


def energy_hypotheses(phi: LipschitzFunctional, split: SplitSpace, seed: int = 0) -> tuple:
    """Sampled checks of coercivity on W, quasi-concavity and anti-coercivity on V."""
    radii = (1.0, 2.0, 4.0, 8.0, 16.0)
    return (check_coercive_on_W(phi, split, radii, seed=seed),
            check_quasiconcave_V(phi, split, seed=seed),
            check_anticoercive_V(phi, split, radii, seed=seed))


@dataclass(frozen=True)
class DirichletReport:
    report: CriticalPointReport
    residual_inf: Optional[float]  # None for nonsmooth f
    eigenvalues: np.ndarray
    nonresonance: tuple
    hypotheses: tuple
    forced: bool
    u: np.ndarray = field(repr=False, default=None)


def solve_dirichlet(problem: DirichletProblem) -> DirichletReport:
    """Gate on nonresonance (unless forced), then run the min-max solver on the discrete energy."""
    en, split = assemble(problem)
    lam = split.eigenvalues
    checks = nonresonance_reports(problem, lam)
    failed = [c for c in checks if c.verdict == "fails"]
    if failed and not problem.force:
        raise HypothesisFailure(
            f"nonresonance fails between lambda_{problem.k} = {lam[problem.k - 1]:.6g} and "
            f"lambda_{problem.k + 1} = {lam[problem.k]:.6g}", list(checks))
    phi = energy_functional(problem, en)
    hyp = energy_hypotheses(phi, split, problem.criticality_cfg.seed)
    bad = [c for c in hyp if c.verdict == "fails"]
    if bad and not problem.force:
        raise HypothesisFailure("sampled hypothesis check failed: " + ", ".join(c.condition_id for c in bad),
                                list(hyp))
    failed += bad
    # the energy gradient carries a factor h, so the stopping rule does too
    oc = problem.outer_cfg or OuterConfig(eps_outer=1e-9 * problem.h)
    rep = solve_saddle(MinimaxProblem(phi, split, problem.selection_cfg, oc, problem.criticality_cfg))
    res = float(np.max(np.abs(energy_residual(problem, en, rep.u_bar)))) if problem.smooth else None
    return DirichletReport(rep, res, lam, checks, hyp, bool(failed), rep.u_bar)


# Built-in nonlinearities ----------------------------------------------------

def linear_problem(mu: float = 25.0, n: int = 127, k: int = 1, **kw) -> DirichletProblem:
    """f(x, s) = mu s + sin(pi x)."""
    return DirichletProblem(
        n=n, k=k,
        f=lambda x, s: mu * s + np.sin(np.pi * x),
        F=lambda x, t: 0.5 * mu * t * t + np.sin(np.pi * x) * t,
        name=f"linear(mu={mu:g})", **kw)


def _logcosh(z):
    a = np.abs(z)
    return a + np.log1p(np.exp(-2 * a)) - np.log(2.0)


def tanh_problem(mu: float = 25.0, jump: float = 0.5, width: float = 1e-6, n: int = 127, k: int = 1,
                 **kw) -> DirichletProblem:
    """f(x, s) = mu s + jump tanh(s / width): a near-discontinuous step in f."""
    return DirichletProblem(
        n=n, k=k,
        f=lambda x, s: mu * s + jump * np.tanh(np.asarray(s) / width),
        F=lambda x, t: 0.5 * mu * t * t + jump * width * _logcosh(np.asarray(t) / width),
        smooth=False, name=f"tanh(mu={mu:g}, jump={jump:g}, width={width:g})", **kw)


def linear_oracle(mu: float, n: int) -> np.ndarray:
    """Direct solve of (A - mu I) u = sin(pi x)."""
    A = stiffness_matrix(n)
    x = np.arange(1, n + 1) / (n + 1)
    return np.linalg.solve(A - mu * np.eye(n), np.sin(np.pi * x))
