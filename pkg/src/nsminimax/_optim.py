"""Small unconstrained minimizers used by the inner and outer loops."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .clarke import ball_points, min_norm_point


@dataclass
class OptResult:
    x: np.ndarray
    fun: float
    grad_norm: float
    nit: int
    status: str  # converged | stalled | maxiter | escaped


def bfgs_minimize(fun: Callable, grad: Callable, x0, gtol: float = 1e-10, max_iter: int = 500,
                  max_norm: Optional[float] = None) -> OptResult:
    """BFGS with Armijo backtracking. ``grad`` must return a vector everywhere."""
    x = np.array(x0, dtype=float)
    f = fun(x)
    g = grad(x)
    n = x.size
    H = None
    stalls = 0
    for it in range(max_iter):
        gn = float(np.linalg.norm(g))
        if gn <= gtol:
            return OptResult(x, f, gn, it, "converged")
        d = -g if H is None else -(H @ g)
        slope = float(g @ d)
        if slope >= 0:
            H = None
            d = -g
            slope = -gn * gn
        t = 1.0 if H is not None else min(1.0, 1.0 / gn)
        while True:
            xn = x + t * d
            fn = fun(xn)
            if fn <= f + 1e-4 * t * slope:
                break
            t *= 0.5
            if t * np.linalg.norm(d) <= 1e-17 * (1.0 + np.linalg.norm(x)):
                return OptResult(x, f, gn, it, "stalled")
        if max_norm is not None and np.linalg.norm(xn) > max_norm:
            return OptResult(xn, fn, gn, it, "escaped")
        gnew = grad(xn)
        s = xn - x
        y = gnew - g
        sy = float(s @ y)
        if sy > 1e-12 * np.linalg.norm(s) * np.linalg.norm(y):
            if H is None:
                H = np.eye(n) * (sy / float(y @ y))
            rho = 1.0 / sy
            Hy = H @ y
            H = H - rho * (np.outer(s, Hy) + np.outer(Hy, s)) + (rho * rho * float(y @ Hy) + rho) * np.outer(s, s)
        stalls = stalls + 1 if f - fn <= 1e-16 * (1.0 + abs(f)) else 0
        x, f, g = xn, fn, gnew
        if stalls >= 5:
            return OptResult(x, f, float(np.linalg.norm(g)), it + 1, "stalled")
    return OptResult(x, f, float(np.linalg.norm(g)), max_iter, "maxiter")


def gradient_sampling_minimize(fun: Callable, grad: Callable, x0, radii: Sequence[float],
                               tol: float, samples: int, seed: int = 0, max_iter: int = 1000,
                               max_norm: Optional[float] = None, on_step: Callable | None = None) -> OptResult:
    """Gradient sampling for nonsmooth functions.

    ``grad`` may return ``None`` at non-differentiable points (those samples are
    skipped). The search direction is minus the min-norm element of the hull of
    gradients sampled in B(x, eps); eps moves down ``radii`` whenever that
    element is shorter than ``tol`` or the line search fails.
    """
    rng = np.random.default_rng(seed)
    x = np.array(x0, dtype=float)
    f = fun(x)
    ri = 0
    gnorm = np.inf
    for it in range(max_iter):
        eps = radii[ri]
        pts = np.vstack([x, ball_points(x, eps, samples, rng)])
        G = [g for g in (grad(p) for p in pts) if g is not None]
        if not G:
            ri += 1
            if ri == len(radii):
                return OptResult(x, f, gnorm, it, "stalled")
            continue
        p, _ = min_norm_point(np.vstack(G))
        gnorm = float(np.linalg.norm(p))
        if gnorm <= tol:
            ri += 1
            if ri == len(radii):
                return OptResult(x, f, gnorm, it, "converged")
            continue
        d = -p
        t = 1.0
        accepted = False
        while t * gnorm > 1e-16 * (1.0 + np.linalg.norm(x)):
            xn = x + t * d
            fn = fun(xn)
            if fn <= f - 1e-6 * t * gnorm * gnorm:
                accepted = True
                break
            t *= 0.5
        if not accepted:
            ri += 1
            if ri == len(radii):
                return OptResult(x, f, gnorm, it, "stalled")
            continue
        if t == 1.0:
            # expand while the decrease keeps paying off
            for _ in range(30):
                xt = x + 2 * t * d
                ft = fun(xt)
                if ft <= fn - 1e-6 * t * gnorm * gnorm:
                    t, xn, fn = 2 * t, xt, ft
                else:
                    break
        if max_norm is not None and np.linalg.norm(xn) > max_norm:
            return OptResult(xn, fn, gnorm, it, "escaped")
        x, f = xn, fn
        if on_step is not None:
            on_step(x, f, gnorm, eps)
    return OptResult(x, f, gnorm, max_iter, "maxiter")
