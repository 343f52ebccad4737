"""Numerical Clarke calculus for locally Lipschitz functionals.

The generalized directional derivative is estimated by maximizing difference
quotients over points sampled near ``x``; the Clarke subdifferential is
approximated by the convex hull of gradients sampled in a small ball (gradient
sampling), and its minimal-norm element certifies criticality.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Literal, Optional, Sequence

import numpy as np

from .errors import DegenerateSamplingError, EvaluationError, InputError

Vector = np.ndarray

# One-sided quotients that disagree by more than this (relative) mark a kink at
# the finite-difference resolution; the sample is then discarded.
KINK_TOL = 1e-3


@dataclass(frozen=True)
class LipschitzFunctional:
    """A locally Lipschitz map R^dim -> R.

    ``grad_opt`` may return ``None`` at points where the functional is not
    differentiable; when it is absent, central differences are used.
    ``smooth`` is a hint for the solvers: ``False`` routes them to the
    gradient-sampling code paths.
    """

    eval: Callable[[Vector], float]
    dim: int
    grad_opt: Optional[Callable[[Vector], Optional[Vector]]] = None
    lipschitz_hint: Optional[float] = None
    smooth: bool = True
    name: str = ""

    def __post_init__(self):
        if self.dim < 1:
            raise InputError(f"dim must be positive, got {self.dim}")
        if self.lipschitz_hint is not None and not self.lipschitz_hint > 0:
            raise InputError("lipschitz_hint must be positive")

    def value(self, x) -> float:
        x = np.asarray(x, dtype=float)
        val = float(self.eval(x))
        if not np.isfinite(val):
            raise EvaluationError(x, val)
        return val

    def gradient(self, x, fd_step: float = 1e-6, kink_tol: float = KINK_TOL) -> Optional[Vector]:
        """Gradient at ``x``, or ``None`` where the functional is not differentiable."""
        x = np.asarray(x, dtype=float)
        if self.grad_opt is not None:
            g = self.grad_opt(x)
            if g is None:
                return None
            g = np.asarray(g, dtype=float).reshape(self.dim)
            return g if np.all(np.isfinite(g)) else None
        return fd_gradient(self.eval, x, fd_step, kink_tol)


def fd_gradient(fun, x: Vector, step: float, kink_tol: float = KINK_TOL) -> Optional[Vector]:
    """Central differences; ``None`` if any value is non-finite or a kink is detected.

    One-sided quotients that disagree are re-tested at step/10 and step/100:
    curvature makes the gap shrink with the step, a kink inside the stencil
    does not. The point counts as a kink only if the gap persists.
    """
    f0 = float(fun(x))
    if not np.isfinite(f0):
        return None
    g = np.empty(x.size)
    e = np.zeros(x.size)
    for i in range(x.size):
        floor = 1e-9 * (1.0 + abs(x[i]))
        for s in (step, step / 10, step / 100):
            if s < floor and s != step:
                break
            e[i] = s
            fp = float(fun(x + e))
            fm = float(fun(x - e))
            e[i] = 0.0
            if not (np.isfinite(fp) and np.isfinite(fm)):
                return None
            fwd = (fp - f0) / s
            bwd = (f0 - fm) / s
            g[i] = 0.5 * (fwd + bwd)
            kink = abs(fwd - bwd) > kink_tol * (1.0 + abs(g[i]))
            if not kink:
                break
        if kink:
            return None
    return g


@dataclass(frozen=True)
class SamplingConfig:
    """Sampling parameters for the directional-derivative estimator.

    ``steps`` are displacement lengths ``t*|v|`` (not raw ``t``), which makes the
    estimate exactly positively homogeneous in ``v``.
    """

    radius: float = 1e-4
    samples: int = 50
    steps: tuple[float, ...] = (1e-6, 5e-7)
    seed: int = 0

    def __post_init__(self):
        if not self.radius > 0:
            raise InputError("radius must be positive")
        if self.samples < 1:
            raise InputError("samples must be >= 1")
        st = tuple(float(s) for s in self.steps)
        if not st or any(s <= 0 for s in st) or any(a <= b for a, b in zip(st, st[1:])):
            raise InputError("steps must be positive and strictly decreasing")


DEFAULT_RADII = (1e-2, 1e-3, 1e-4)


def ball_points(x: Vector, radius: float, m: int, rng: np.random.Generator) -> np.ndarray:
    """``m`` points uniformly distributed in the Euclidean ball B(x, radius)."""
    d = x.size
    z = rng.standard_normal((m, d))
    z /= np.linalg.norm(z, axis=1, keepdims=True)
    r = radius * rng.random(m) ** (1.0 / d)
    return x + z * r[:, None]


def generalized_dir_derivative(f: LipschitzFunctional, x, v, cfg: SamplingConfig = SamplingConfig()) -> float:
    """Sampled estimate of the Clarke derivative f°(x; v).

    Returns the max of (f(y + t v) - f(y)) / t over y in {x} and ``cfg.samples``
    points of B(x, cfg.radius), and over the step grid. When ``f.lipschitz_hint``
    is set, an estimate above hint * |v| raises InputError.
    """
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    if x.shape != (f.dim,) or v.shape != (f.dim,):
        raise InputError(f"expected vectors of length {f.dim}")
    vnorm = float(np.linalg.norm(v))
    if not np.isfinite(vnorm):
        raise InputError("direction must be finite")
    if vnorm == 0:
        return 0.0
    unit = v / vnorm
    rng = np.random.default_rng(cfg.seed)
    ys = np.vstack([x, ball_points(x, cfg.radius, cfg.samples, rng)])
    best = -np.inf
    for y in ys:
        fy = f.value(y)
        for s in cfg.steps:
            q = (f.value(y + s * unit) - fy) / s
            if q > best:
                best = q
    L = f.lipschitz_hint
    if L is not None and abs(best) > L * (1 + 1e-6) + 1e-12:
        raise InputError(f"|f°(x; v)| = {abs(best) * vnorm:.6g} exceeds lipschitz_hint * |v| = {L * vnorm:.6g}")
    return float(vnorm * best)


def dir_derivative_profile(f: LipschitzFunctional, x, v, radii: Sequence[float] = DEFAULT_RADII,
                           cfg: SamplingConfig = SamplingConfig()) -> list[float]:
    """Estimates of f°(x; v) on a decreasing radius grid; the spread exposes non-convergence."""
    out = []
    for r in radii:
        c = SamplingConfig(radius=r, samples=cfg.samples, steps=cfg.steps, seed=cfg.seed)
        out.append(generalized_dir_derivative(f, x, v, c))
    return out


# ---------------------------------------------------------------------------
# minimum-norm point of a polytope (Wolfe's nearest point algorithm)


def _affine_minimizer(Q: np.ndarray) -> np.ndarray:
    """Weights (summing to one) of the point of aff(rows of Q) nearest the origin."""
    if Q.shape[0] == 1:
        return np.ones(1)
    D = (Q[1:] - Q[0]).T
    beta, *_ = np.linalg.lstsq(D, -Q[0], rcond=None)
    return np.concatenate([[1.0 - beta.sum()], beta])


def min_norm_point(generators, tol: float = 1e-12, max_iter: int | None = None) -> tuple[Vector, Vector]:
    """Nearest point to the origin in conv(generators), with certifying weights.

    Wolfe's algorithm: alternate between adding the vertex most violating the
    optimality condition and projecting onto the affine hull of the active set,
    dropping vertices whose weights hit zero. Stops once
    <x, g - x> >= -tol * max(1, max |g|^2) for every generator g.
    """
    try:
        rows = [np.asarray(g, dtype=float).ravel() for g in generators]
    except (TypeError, ValueError) as exc:
        raise InputError(f"bad generators: {exc}") from exc
    if not rows:
        raise InputError("generators must be nonempty")
    d = rows[0].size
    if any(r.size != d for r in rows):
        raise InputError("generators have mismatched dimensions")
    G = np.vstack(rows)
    if not np.all(np.isfinite(G)):
        raise InputError("generators contain non-finite entries")

    P, first_idx = np.unique(G, axis=0, return_index=True)
    scale = max(1.0, float(np.max(np.einsum("ij,ij->i", P, P))))
    thresh = tol * scale
    if max_iter is None:
        max_iter = 50 * (P.shape[0] + d) + 100

    S = [int(np.argmin(np.einsum("ij,ij->i", P, P)))]
    lam = np.ones(1)
    x = P[S[0]].copy()
    for _ in range(max_iter):
        dots = P @ x
        j = int(np.argmin(dots))
        if x @ x - dots[j] <= thresh or j in S:
            break
        S.append(j)
        lam = np.append(lam, 0.0)
        while True:
            alpha = _affine_minimizer(P[S])
            if np.all(alpha > 1e-15):
                lam = alpha
                break
            neg = alpha <= 1e-15
            denom = lam[neg] - alpha[neg]
            with np.errstate(divide="ignore", invalid="ignore"):
                ratios = np.where(denom > 0, lam[neg] / denom, np.inf)
            theta = float(min(1.0, ratios.min()))
            lam = lam + theta * (alpha - lam)
            keep = lam > 1e-15
            if keep.all():
                # numerically stuck on the boundary; drop the smallest weight
                keep[int(np.argmin(lam))] = False
            S = [s for s, k in zip(S, keep) if k]
            lam = lam[keep]
            lam = lam / lam.sum()
        x_new = lam @ P[S]
        if x_new @ x_new >= x @ x * (1 + 1e-15) and len(S) > 1:
            break
        x = x_new

    weights = np.zeros(G.shape[0])
    weights[first_idx[S]] = lam
    weights = np.clip(weights, 0.0, None)
    weights /= weights.sum()
    return weights @ G, weights


def optimality_violation(point: Vector, generators) -> float:
    """max(0, -min_g <point, g - point>): zero for the exact min-norm point."""
    G = np.atleast_2d(np.asarray(generators, dtype=float))
    gap = G @ point - point @ point
    return float(max(0.0, -gap.min()))


# ---------------------------------------------------------------------------
# subdifferential approximation


def default_samples(dim: int) -> int:
    return max(dim + 1, 20)


@dataclass(frozen=True)
class SubdifferentialApprox:
    center: Vector
    radius: float
    generators: np.ndarray
    min_norm_point: Vector
    min_norm_value: float
    weights: Vector
    sample_points: np.ndarray = field(repr=False, default=None)

    def support(self, v) -> float:
        """max over generators of <g, v>."""
        return float(np.max(self.generators @ np.asarray(v, dtype=float)))


def sample_gradients(f: LipschitzFunctional, x: Vector, radius: float, m: int,
                     rng: np.random.Generator, include_center: bool = True):
    pts = ball_points(x, radius, m, rng)
    if include_center:
        pts = np.vstack([x, pts])
    step = radius / 100.0
    grads, used = [], []
    for p in pts:
        g = f.gradient(p, fd_step=step)
        if g is not None:
            grads.append(g)
            used.append(p)
    return grads, used


def subdifferential_approx(f: LipschitzFunctional, x, radius: float, m: int | None = None,
                           seed: int = 0) -> SubdifferentialApprox:
    """Gradient-sampling approximation of the Clarke subdifferential at ``x``.

    Gradients are taken at ``x`` and at ``m`` uniform samples of B(x, radius)
    wherever the functional is differentiable (via ``grad_opt`` or central
    differences with step radius/100).
    """
    x = np.asarray(x, dtype=float)
    if x.shape != (f.dim,):
        raise InputError(f"expected a point of length {f.dim}")
    if not radius > 0:
        raise InputError("radius must be positive")
    if m is None:
        m = default_samples(f.dim)
    if m < f.dim + 1:
        raise InputError(f"need at least dim+1 = {f.dim + 1} samples, got {m}")
    rng = np.random.default_rng(seed)
    grads, used = sample_gradients(f, x, radius, m, rng)
    if not grads:
        raise DegenerateSamplingError(f"no usable gradient among {m + 1} samples near {x.tolist()}")
    G = np.vstack(grads)
    p, w = min_norm_point(G)
    return SubdifferentialApprox(center=x, radius=float(radius), generators=G, min_norm_point=p,
                                 min_norm_value=float(np.linalg.norm(p)), weights=w,
                                 sample_points=np.vstack(used))


# ---------------------------------------------------------------------------
# criticality


Verdict = Literal["critical", "not-critical", "inconclusive"]

DEFAULT_SCHEDULE = (1e-2, 1e-3, 1e-4, 1e-5, 1e-6)


@dataclass(frozen=True)
class CriticalityCertificate:
    point: Vector
    residual: float
    radius_schedule: tuple[float, ...]
    verdict: Verdict
    residuals: tuple[float, ...] = ()
    eps_crit: float = 0.0
    min_norm_point: Optional[Vector] = None


def certify_critical(f: LipschitzFunctional, x, eps_crit: float,
                     schedule: Sequence[float] = DEFAULT_SCHEDULE, m: int | None = None,
                     seed: int = 0) -> CriticalityCertificate:
    """Check 0 in the sampled subdifferential along a decreasing radius schedule."""
    sched = tuple(float(r) for r in schedule)
    if not sched or any(a <= b for a, b in zip(sched, sched[1:])) or sched[-1] < 1e-12:
        raise InputError("schedule must be strictly decreasing and end >= 1e-12")
    if not eps_crit > 0:
        raise InputError("eps_crit must be positive")
    x = np.asarray(x, dtype=float)
    residuals = []
    approx = None
    for i, r in enumerate(sched):
        approx = subdifferential_approx(f, x, r, m, seed=seed + i)
        residuals.append(approx.min_norm_value)
    final = residuals[-1]
    if final <= eps_crit:
        verdict = "critical"
    elif all(res >= 10 * eps_crit for res in residuals):
        verdict = "not-critical"
    else:
        verdict = "inconclusive"
    return CriticalityCertificate(point=x, residual=final, radius_schedule=sched, verdict=verdict,
                                  residuals=tuple(residuals), eps_crit=float(eps_crit),
                                  min_norm_point=approx.min_norm_point)


# ---------------------------------------------------------------------------
# Lebourg mean value property


@dataclass(frozen=True)
class LebourgReport:
    passed: bool
    increment: float
    interval: tuple[float, float]
    tolerance: float


def lebourg_containment_test(f: LipschitzFunctional, x, y, segment_samples: int = 20,
                             m: int | None = None, seed: int = 0) -> LebourgReport:
    """Check f(y) - f(x) lies in the range of <g, y - x> over sampled subgradients on ]x, y[.

    Subdifferentials are sampled at the midpoints of ``segment_samples`` equal
    cells with radius equal to one cell length, so the balls cover the segment.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    d = y - x
    dn = float(np.linalg.norm(d))
    if not dn > 0:
        raise InputError("x and y must be distinct")
    if segment_samples < 10:
        raise InputError("segment_samples must be >= 10")
    if m is None:
        m = max(f.dim + 1, 20 * f.dim)
    radius = dn / segment_samples
    lo, hi = np.inf, -np.inf
    for i in range(segment_samples):
        z = x + (i + 0.5) / segment_samples * d
        sub = subdifferential_approx(f, z, radius, m, seed=seed + i)
        vals = sub.generators @ d
        lo, hi = min(lo, float(vals.min())), max(hi, float(vals.max()))
    inc = f.value(y) - f.value(x)
    L = f.lipschitz_hint or 0.0
    tol = 1e-6 * (1 + dn) * (1 + L)
    return LebourgReport(passed=bool(lo - tol <= inc <= hi + tol), increment=inc,
                         interval=(lo, hi), tolerance=tol)
