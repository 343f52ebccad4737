"""Inner maximization over V and continuous selections of w -> V(w).

``inner_max`` computes phi(w) = max_v Phi(v + w) by multistart ascent and
flags non-unique maximizers. ``perturbed_selection`` picks the minimal-norm
element of the (epsilon-)argmax set by penalizing ``Phi(v + w) - sigma*|v|``,
which is the tie-break that keeps the selection continuous in w. The
multivalued-map utilities at the bottom work on sampled polytope-valued maps
over a 1-D mesh.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np

from ._optim import bfgs_minimize, gradient_sampling_minimize
from .clarke import LipschitzFunctional, ball_points, fd_gradient, min_norm_point
from .errors import AntiCoercivityError, InputError, LscFailureError, SelectionFailure
from .splitspace import SplitSpace


@dataclass(frozen=True)
class SelectionConfig:
    starts: int = 8
    start_radius: float = 1.0
    r_max: float = 1e6
    gtol: float = 1e-10
    max_iter: int = 500
    seed: int = 0
    delta_tie: float = 1e-4
    eps_tie_rel: float = 1e-8
    gs_radii: tuple[float, ...] = (1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-7, 1e-8)
    gs_tol: float = 1e-9
    gs_samples: int = 0  # 0 -> max(2*dim_v, 4)

    def __post_init__(self):
        if self.starts < 1:
            raise InputError("need at least one start")
        if not (self.start_radius > 0 and self.r_max > 0):
            raise InputError("start_radius and r_max must be positive")


@dataclass(frozen=True)
class SelectionResult:
    w_coords: np.ndarray
    v_star: np.ndarray
    phi_of_w: float
    multistart_values: tuple[float, ...]
    degeneracy_flag: bool
    maximizers: np.ndarray = field(repr=False, default=None)
    start_index: int = 0
    escaped: int = 0
    method: str = "argmax"
    value_at_v_star: float = np.nan

    @property
    def max_separation(self) -> float:
        M = self.maximizers
        if M is None or len(M) < 2:
            return 0.0
        diff = M[:, None, :] - M[None, :, :]
        return float(np.sqrt((diff ** 2).sum(-1)).max())


class _Reduced:
    """v -> Phi(embed(v, w)) with V-coordinate gradients."""

    def __init__(self, phi: LipschitzFunctional, split: SplitSpace, w: np.ndarray):
        self.phi, self.split, self.w = phi, split, w

    def value(self, v) -> float:
        return self.phi.value(self.split.embed(v, self.w))

    def grad(self, v):
        g = self.phi.gradient(self.split.embed(v, self.w))
        return None if g is None else self.split.basis_v.T @ g

    def grad_always(self, v):
        g = self.grad(v)
        if g is None:
            g = _plain_fd(self.value, np.asarray(v, dtype=float))
        return g


def _plain_fd(fun, x, step=1e-7):
    h = step * (1.0 + np.abs(x))
    g = np.empty(x.size)
    for i in range(x.size):
        e = np.zeros(x.size)
        e[i] = h[i]
        g[i] = (fun(x + e) - fun(x - e)) / (2 * h[i])
    return g


def _check_w(split: SplitSpace, w_coords) -> np.ndarray:
    w = np.asarray(w_coords, dtype=float).reshape(-1)
    if w.size != split.dim_w:
        raise InputError(f"w_coords must have length {split.dim_w}")
    return w


def _ascend(red: _Reduced, v0, cfg: SelectionConfig, smooth: bool, seed: int):
    """Maximize v -> Phi(v + w) from v0; returns (v, value, status)."""
    neg = lambda v: -red.value(v)
    res = bfgs_minimize(neg, lambda v: -red.grad_always(v), v0, gtol=cfg.gtol,
                        max_iter=cfg.max_iter, max_norm=cfg.r_max)
    if res.status == "escaped":
        return res.x, -res.fun, "escaped"
    if not smooth:
        m = cfg.gs_samples or max(2 * v0.size, 4)
        scale = 1.0 + float(np.linalg.norm(res.x))
        radii = tuple(r * scale for r in cfg.gs_radii)

        def ngrad(v):
            g = red.grad(v)
            return None if g is None else -g

        res = gradient_sampling_minimize(neg, ngrad, res.x, radii, tol=cfg.gs_tol, samples=m,
                                         seed=seed, max_iter=cfg.max_iter, max_norm=cfg.r_max)
        if res.status == "escaped":
            return res.x, -res.fun, "escaped"
    return res.x, -res.fun, res.status


def inner_max(phi: LipschitzFunctional, split: SplitSpace, w_coords,
              cfg: SelectionConfig = SelectionConfig(), warm_start=None) -> SelectionResult:
    """phi(w) = max over V of Phi(v + w) by multistart ascent.

    Starts are the warm start (if any), the origin, and ``cfg.starts - 1`` points
    of the ball of radius ``cfg.start_radius``. The best value wins; values
    within eps_tie of it count as ties and the lowest start index is kept.
    """
    if phi.dim != split.dim_total:
        raise InputError("functional and split dimensions differ")
    w = _check_w(split, w_coords)
    k = split.dim_v
    rng = np.random.default_rng(cfg.seed)
    starts = [np.zeros(k)]
    if cfg.starts > 1:
        starts += list(ball_points(np.zeros(k), cfg.start_radius, cfg.starts - 1, rng))
    if warm_start is not None:
        starts.insert(0, np.asarray(warm_start, dtype=float).reshape(k))
    red = _Reduced(phi, split, w)
    ends, vals = [], []
    escaped = 0
    for i, v0 in enumerate(starts):
        v, val, status = _ascend(red, np.array(v0, dtype=float), cfg, phi.smooth, seed=cfg.seed + 7919 * i)
        if status == "escaped":
            escaped += 1
            vals.append(-np.inf)
        else:
            vals.append(val)
        ends.append(v)
    if escaped == len(starts):
        raise AntiCoercivityError(
            f"all {len(starts)} ascent trajectories exceeded |v| > {cfg.r_max} at w={w.tolist()[:6]}")
    vals_arr = np.asarray(vals)
    best = float(vals_arr.max())
    eps_tie = cfg.eps_tie_rel * (1 + abs(best))
    ties = [i for i in range(len(starts)) if vals_arr[i] >= best - eps_tie]
    i_star = ties[0]
    maxim = np.vstack([ends[i] for i in ties])
    sel = SelectionResult(w_coords=w, v_star=np.array(ends[i_star]), phi_of_w=float(vals_arr[i_star]),
                          multistart_values=tuple(float(x) for x in vals), degeneracy_flag=False,
                          maximizers=maxim, start_index=i_star, escaped=escaped,
                          value_at_v_star=float(vals_arr[i_star]))
    return replace(sel, degeneracy_flag=sel.max_separation > cfg.delta_tie)


def dominance_violation(phi: LipschitzFunctional, split: SplitSpace, sel: SelectionResult,
                        n: int = 100, radius: float | None = None, seed: int = 0) -> float:
    """Largest excess of Phi(v + w) over phi(w) on sampled v (tolerance-scaled; <= 0 is good)."""
    rng = np.random.default_rng(seed)
    if radius is None:
        radius = 2.0 * (1.0 + float(np.linalg.norm(sel.v_star)))
    vs = np.vstack([ball_points(sel.v_star, radius, n // 2, rng),
                    ball_points(np.zeros(split.dim_v), radius, n - n // 2, rng)])
    tol = 1e-8 * (1 + abs(sel.phi_of_w))
    worst = max(phi.value(split.embed(v, sel.w_coords)) for v in vs)
    return worst - sel.phi_of_w - tol


def perturbed_selection(phi: LipschitzFunctional, split: SplitSpace, w_coords, delta: float | None = None,
                        cfg: SelectionConfig = SelectionConfig(), base: SelectionResult | None = None,
                        warm_start=None) -> SelectionResult:
    """Minimal-norm element of {v : Phi(v + w) >= phi(w) - delta}.

    Phase 1 computes phi(w) with ``inner_max``. Phase 2 maximizes
    Phi(v + w) - sigma*|v| for an increasing ladder of sigma (warm-started),
    refines the largest feasible sigma by bisection, and returns the feasible
    point of smallest norm seen. The returned ``phi_of_w`` is phi(w) itself;
    ``value_at_v_star`` is within ``delta`` of it.
    """
    w = _check_w(split, w_coords)
    if base is None:
        base = inner_max(phi, split, w, cfg, warm_start=warm_start)
    M = base.phi_of_w
    if delta is None:
        delta = 1e-8 * (1 + abs(M))
    if not delta > 0:
        raise InputError("delta must be positive")
    red = _Reduced(phi, split, w)
    floor = M - delta

    cands = [np.array(v) for v in base.maximizers]
    cvals = [red.value(v) for v in cands]
    feas = [(float(np.linalg.norm(v)), i) for i, (v, val) in enumerate(zip(cands, cvals)) if val >= floor]
    if not feas:
        raise SelectionFailure("no maximizer satisfies the value floor", {"phi_of_w": M, "delta": delta})
    best_norm, bi = min(feas)
    best_v, best_val = cands[bi], cvals[bi]

    k = split.dim_v
    m = cfg.gs_samples or max(2 * k, 4)

    def solve(sigma, v0):
        obj = lambda v: -(red.value(v) - sigma * np.linalg.norm(v))

        def grad(v):
            g = red.grad(v)
            nv = np.linalg.norm(v)
            if g is None or nv == 0.0:
                return None
            return -(g - sigma * v / nv)

        scale = 1.0 + float(np.linalg.norm(v0))
        radii = tuple(r * scale for r in cfg.gs_radii)
        res = gradient_sampling_minimize(obj, grad, v0, radii, tol=cfg.gs_tol * (1 + sigma), samples=m,
                                         seed=cfg.seed, max_iter=cfg.max_iter, max_norm=cfg.r_max)
        return res.x

    def consider(v):
        nonlocal best_v, best_val, best_norm
        val = red.value(v)
        nv = float(np.linalg.norm(v))
        ok = val >= floor
        if ok and nv < best_norm:
            best_v, best_val, best_norm = np.array(v), val, nv
        return ok

    sig_scale = 1 + abs(M)
    lo_sigma, hi_sigma = None, None
    v_prev = best_v
    for j in range(-10, 7):
        sigma = sig_scale * 10.0 ** j
        v = solve(sigma, v_prev)
        if consider(v):
            lo_sigma, v_prev = sigma, v
        else:
            hi_sigma = sigma
            break
    if lo_sigma is not None and hi_sigma is not None:
        for _ in range(12):
            mid = np.sqrt(lo_sigma * hi_sigma)
            v = solve(mid, v_prev)
            if consider(v):
                lo_sigma, v_prev = mid, v
            else:
                hi_sigma = mid
    return replace(base, v_star=best_v, value_at_v_star=float(best_val), method="perturbed")


@dataclass(frozen=True)
class ContinuityAudit:
    modulus: float
    ratios: tuple[float, ...]
    selections: np.ndarray
    discontinuous: bool
    jump_threshold: float


def selection_continuity_audit(phi: LipschitzFunctional, split: SplitSpace, path: Sequence,
                               cfg: SelectionConfig = SelectionConfig(), jump_threshold: float = 1e3,
                               delta: float | None = None) -> ContinuityAudit:
    """max |s(w_{i+1}) - s(w_i)| / |w_{i+1} - w_i| for the perturbed selection along a path."""
    W = [_check_w(split, w) for w in path]
    for i in range(len(W)):
        for j in range(i + 1, len(W)):
            if np.array_equal(W[i], W[j]):
                raise InputError("path points must be pairwise distinct")
    S = np.vstack([perturbed_selection(phi, split, w, delta, cfg).v_star for w in W])
    ratios = tuple(float(np.linalg.norm(S[i + 1] - S[i]) / np.linalg.norm(W[i + 1] - W[i]))
                   for i in range(len(W) - 1))
    mod = max(ratios) if ratios else 0.0
    return ContinuityAudit(modulus=mod, ratios=ratios, selections=S,
                           discontinuous=bool(mod > jump_threshold), jump_threshold=jump_threshold)


# ---------------------------------------------------------------------------
# sampled multivalued maps


@dataclass(frozen=True)
class MultiMapSample:
    """Polytope-valued map sampled on a mesh; values[i] is a (p_i, dim) vertex array.

    ``source`` (optional) regenerates the map on finer meshes for the probe.
    """

    domain_mesh: np.ndarray
    values: tuple
    h: float
    source: Optional[Callable] = None

    def __post_init__(self):
        mesh = np.asarray(self.domain_mesh, dtype=float)
        if mesh.ndim == 1:
            mesh = mesh[:, None]
        vals = tuple(np.atleast_2d(np.asarray(v, dtype=float)) for v in self.values)
        if len(vals) != len(mesh):
            raise InputError("one polytope per mesh point required")
        if any(v.size == 0 for v in vals):
            raise InputError("polytopes must be nonempty")
        if len({v.shape[1] for v in vals}) != 1:
            raise InputError("vertex dimensions must agree")
        if not self.h > 0:
            raise InputError("mesh spacing must be positive")
        object.__setattr__(self, "domain_mesh", mesh)
        object.__setattr__(self, "values", vals)


def sample_multimap(T: Callable, lo: float, hi: float, nodes: int) -> MultiMapSample:
    """Sample a callable T(m) -> vertex array on a uniform mesh of [lo, hi]."""
    mesh = np.linspace(lo, hi, nodes)
    return MultiMapSample(mesh, tuple(T(float(m)) for m in mesh), (hi - lo) / (nodes - 1),
                          source=lambda n, T=T, lo=lo, hi=hi: sample_multimap(T, lo, hi, n))


def polytope_distance(y, vertices) -> float:
    p, _ = min_norm_point(np.atleast_2d(vertices) - np.asarray(y, dtype=float))
    return float(np.linalg.norm(p))


@dataclass(frozen=True)
class LscReport:
    violations: tuple  # (m, y, m_neighbor, distance)
    raw_violations: int
    levels: int
    kappa: float

    @property
    def ok(self) -> bool:
        return not self.violations


def _raw_lsc(T: MultiMapSample, kappa: float):
    mesh, h = T.domain_mesh, T.h
    out = []
    for i, m in enumerate(mesh):
        dists = np.linalg.norm(mesh - m, axis=1)
        nbrs = [j for j in np.flatnonzero(dists <= 2 * h * (1 + 1e-9)) if j != i]
        for j in nbrs:
            # the nearest vertex bounds the polytope distance from above
            near = np.sqrt(((T.values[i][:, None, :] - T.values[j][None, :, :]) ** 2).sum(-1)).min(1)
            for y in T.values[i][near > kappa * h]:
                dist = polytope_distance(y, T.values[j])
                if dist > kappa * h:
                    out.append((mesh[i].copy(), y.copy(), mesh[j].copy(), dist))
    return out


def lsc_probe(T: MultiMapSample, kappa: float = 4.0, levels: int = 3) -> LscReport:
    """Lower-semicontinuity probe.

    A triple (m, y, m') is raw-violating when y is a vertex of T(m), m' is a
    neighbour within 2h and dist(y, T(m')) > kappa*h. When the sample carries a
    ``source``, the mesh is halved ``levels - 1`` times and only violations at
    base points m that persist on every finer mesh are reported: a violation
    that disappears as h -> 0 is a mesh artefact, not a failure at m.
    """
    raw = _raw_lsc(T, kappa)
    if T.source is None or levels <= 1 or not raw:
        return LscReport(tuple(raw), len(raw), 1, kappa)
    persistent = {tuple(np.round(v[0], 12)) for v in raw}
    n = len(T.domain_mesh)
    for _ in range(levels - 1):
        n = 2 * n - 1
        finer = T.source(n)
        bases = {tuple(np.round(v[0], 12)) for v in _raw_lsc(finer, kappa)}
        persistent &= bases
        if not persistent:
            break
    kept = tuple(v for v in raw if tuple(np.round(v[0], 12)) in persistent)
    return LscReport(kept, len(raw), levels, kappa)


@dataclass(frozen=True)
class MeshSelection:
    """Piecewise-linear selection through the node values."""

    mesh: np.ndarray
    node_values: np.ndarray
    max_excursion: float

    def __call__(self, m: float) -> np.ndarray:
        return np.array([np.interp(m, self.mesh, self.node_values[:, j])
                         for j in range(self.node_values.shape[1])])


def _interpolate_polytope(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    if A.shape == B.shape:
        return 0.5 * (A + B)
    return 0.5 * (A[:, None, :] + B[None, :, :]).reshape(-1, A.shape[1])


def michael_selection_mesh(T: MultiMapSample, kappa: float = 4.0) -> MeshSelection:
    """Continuous selection of an l.s.c. convex-valued map on a 1-D mesh.

    Each node takes the minimal-norm element of T(m), which stays inside T at
    the node exactly; between nodes the selection is linear. The largest
    distance from s(m_hat) to the interpolated T(m_hat) at midpoints is recorded.
    """
    if T.domain_mesh.shape[1] != 1:
        raise InputError("Michael construction is restricted to 1-D meshes")
    rep = lsc_probe(T, kappa)
    if not rep.ok:
        raise LscFailureError(f"{len(rep.violations)} l.s.c. violations; no selection built", rep.violations)
    order = np.argsort(T.domain_mesh[:, 0])
    mesh = T.domain_mesh[order, 0]
    vals = [T.values[i] for i in order]
    nodes = np.vstack([min_norm_point(V)[0] for V in vals])
    exc = 0.0
    for i in range(len(mesh) - 1):
        mid = 0.5 * (nodes[i] + nodes[i + 1])
        exc = max(exc, polytope_distance(mid, _interpolate_polytope(vals[i], vals[i + 1])))
    return MeshSelection(mesh, nodes, exc)
