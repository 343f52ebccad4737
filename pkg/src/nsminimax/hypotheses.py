"""Sampled falsifiers for the minimax hypotheses.

Each checker returns a ``ConditionReport``. ``holds-on-sample`` means no
counterexample was found, never that the condition is proved. Every ``fails``
verdict carries witnesses that :func:`witness_reproduces` re-evaluates.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable, Literal, Optional, Sequence

import numpy as np
from scipy import integrate

from .clarke import LipschitzFunctional, ball_points
from .errors import EvaluationError, InputError
from .selection import SelectionConfig, inner_max
from .splitspace import SplitSpace

ConditionId = Literal["i", "ii", "ii'", "ii''", "iii", "iv-proxy", "DO", "eq1", "eq2"]
Verdict = Literal["holds-on-sample", "fails", "not-checkable"]


@dataclass(frozen=True)
class ConditionReport:
    condition_id: str
    verdict: str
    witnesses: tuple = ()
    sample_spec: dict = field(default_factory=dict)
    details: dict = field(default_factory=dict)
    note: str = ""

    @property
    def holds(self) -> bool:
        return self.verdict == "holds-on-sample"


def _sphere(dim: int, r: float, n: int, rng) -> np.ndarray:
    z = rng.standard_normal((n, dim))
    z /= np.linalg.norm(z, axis=1, keepdims=True)
    return r * z


def _strictly_increasing(xs) -> bool:
    return all(b > a for a, b in zip(xs, xs[1:]))


def check_coercive_on_W(phi: LipschitzFunctional, split: SplitSpace, radii: Sequence[float],
                        samples_per_radius: int = 32, growth_floor: float = 0.0,
                        seed: int = 0) -> ConditionReport:
    """Condition (i): the per-sphere minimum of Phi(0 + w) must grow with |w|.

    Holds on sample iff those minima increase strictly over the upper half of
    ``radii`` and the last exceeds the first by more than ``growth_floor``.
    """
    radii = [float(r) for r in radii]
    if len(radii) < 3 or not _strictly_increasing(radii):
        raise InputError("radii must be increasing with at least 3 entries")
    rng = np.random.default_rng(seed)
    zero_v = np.zeros(split.dim_v)
    mins, argmins = [], []
    for r in radii:
        W = _sphere(split.dim_w, r, samples_per_radius, rng)
        vals = np.array([phi.value(split.embed(zero_v, w)) for w in W])
        i = int(np.argmin(vals))
        mins.append(float(vals[i]))
        argmins.append(W[i])
    top = len(radii) // 2
    ok = _strictly_increasing(mins[top:]) and mins[-1] - mins[0] > growth_floor
    wit = []
    if not ok:
        bad = next((j for j in range(top, len(radii) - 1) if mins[j + 1] <= mins[j]), None)
        if bad is None:
            wit.append({"kind": "coercive", "w": argmins[-1].tolist(), "w_ref": argmins[0].tolist(),
                        "value": mins[-1], "value_ref": mins[0], "floor": growth_floor})
        else:
            wit.append({"kind": "coercive", "w": argmins[bad + 1].tolist(), "w_ref": argmins[bad].tolist(),
                        "value": mins[bad + 1], "value_ref": mins[bad], "floor": 0.0})
    return ConditionReport("i", "holds-on-sample" if ok else "fails", tuple(wit),
                           {"seed": seed, "samples_per_radius": samples_per_radius, "radii": radii},
                           {"sphere_minima": mins})


def check_quasiconcave_V(phi: LipschitzFunctional, split: SplitSpace, w_samples: int = 8,
                         segment_samples: int = 16, strict: bool = False, radius: float = 3.0,
                         w_radius: float = 1.0, interior: int = 9, tol: float = 1e-10,
                         margin: float = 0.0, seed: int = 0) -> ConditionReport:
    """Condition (ii) (or (ii'') when ``strict``) on random segments [v_a, v_b] of V.

    Non-strict: Phi(v_t + w) >= min(Phi(v_a + w), Phi(v_b + w)) - tol at interior t.
    Strict: at the midpoint, Phi > min + margin whenever v_a != v_b.
    """
    if w_samples < 1 or segment_samples < 1:
        raise InputError("counts must be >= 1")
    rng = np.random.default_rng(seed)
    ts = np.array([0.5]) if strict else np.linspace(0, 1, interior + 2)[1:-1]
    wit = []
    checked = 0
    for w in ball_points(np.zeros(split.dim_w), w_radius, w_samples, rng):
        for _ in range(segment_samples):
            va, vb = ball_points(np.zeros(split.dim_v), radius, 2, rng)
            fa = phi.value(split.embed(va, w))
            fb = phi.value(split.embed(vb, w))
            lo = min(fa, fb)
            for t in ts:
                vt = (1 - t) * va + t * vb
                ft = phi.value(split.embed(vt, w))
                checked += 1
                bad = (ft <= lo + margin) if strict else (ft < lo - tol * (1 + abs(lo)))
                if bad:
                    wit.append({"kind": "quasiconcave", "strict": strict, "w": w.tolist(), "v_a": va.tolist(),
                                "v_b": vb.tolist(), "t": float(t), "value_t": ft, "min_end": lo,
                                "tol": tol, "margin": margin})
    cid = "ii''" if strict else "ii"
    return ConditionReport(cid, "fails" if wit else "holds-on-sample", tuple(wit),
                           {"seed": seed, "w_samples": w_samples, "segment_samples": segment_samples,
                            "radius": radius, "w_radius": w_radius},
                           {"tests": checked, "violations": len(wit)})


def check_anticoercive_V(phi: LipschitzFunctional, split: SplitSpace, v_radii: Sequence[float],
                         w_bound: float = 1.0, samples: int = 16, ceiling: Optional[float] = None,
                         seed: int = 0) -> ConditionReport:
    """Condition (iii): max over |w| <= w_bound and |v| = r of Phi(v + w) must fall as r grows.

    Holds on sample iff the per-radius maxima decrease strictly over the upper
    half of ``v_radii`` and the last one lies below ``ceiling`` (default: the
    first one).
    """
    radii = [float(r) for r in v_radii]
    if len(radii) < 3 or not _strictly_increasing(radii):
        raise InputError("v_radii must be increasing with at least 3 entries")
    rng = np.random.default_rng(seed)
    W = ball_points(np.zeros(split.dim_w), w_bound, samples, rng)
    W = np.vstack([np.zeros(split.dim_w), W])
    dirs = _sphere(split.dim_v, 1.0, samples, rng)
    if split.dim_v == 1:
        dirs = np.array([[1.0], [-1.0]])
    maxes, argmaxes = [], []
    for r in radii:
        best, arg = -np.inf, None
        for w in W:
            for d in dirs:
                val = phi.value(split.embed(r * d, w))
                if val > best:
                    best, arg = val, (r * d, w)
        maxes.append(float(best))
        argmaxes.append(arg)
    top = len(radii) // 2
    cap = maxes[0] if ceiling is None else ceiling
    ok = all(b < a for a, b in zip(maxes[top:], maxes[top + 1:])) and maxes[-1] < cap
    wit = []
    if not ok:
        bad = next((j for j in range(top, len(radii) - 1) if maxes[j + 1] >= maxes[j]), None)
        j, bound = (len(radii) - 1, cap) if bad is None else (bad + 1, maxes[bad])
        v, w = argmaxes[j]
        wit.append({"kind": "anticoercive", "v": v.tolist(), "w": w.tolist(), "value": maxes[j], "bound": bound})
    return ConditionReport("iii", "holds-on-sample" if ok else "fails", tuple(wit),
                           {"seed": seed, "samples": samples, "v_radii": radii, "w_bound": w_bound},
                           {"sphere_maxima": maxes})


def check_weak_lsc() -> ConditionReport:
    """Condition (iv) is not checkable by sampling: in finite dimensions it is plain continuity."""
    return ConditionReport("iv-proxy", "not-checkable",
                           note="weak and strong topologies coincide in finite dimensions; "
                                "(iv) reduces to continuity, which every locally Lipschitz functional has")


def check_DO(phi: LipschitzFunctional, split: SplitSpace, w_samples: int = 4, starts: int = 24,
             delta_do: float = 1e-2, w_radius: float = 1.0, cfg: SelectionConfig = SelectionConfig(),
             seed: int = 0) -> ConditionReport:
    """Condition (DO): at most one maximum of Phi on w + V.

    Runs a wide multistart inner_max at sampled w; fails iff two tied
    maximizers are more than ``delta_do`` apart.
    """
    if w_samples < 1:
        raise InputError("w_samples must be >= 1")
    rng = np.random.default_rng(seed)
    Ws = np.vstack([np.zeros(split.dim_w), ball_points(np.zeros(split.dim_w), w_radius, w_samples - 1, rng)])
    run_cfg = SelectionConfig(**{**cfg.__dict__, "starts": starts, "seed": seed})
    wit = []
    seps = []
    for w in Ws:
        sel = inner_max(phi, split, w, run_cfg)
        sep = sel.max_separation
        seps.append(sep)
        if sel.degeneracy_flag and sep > delta_do:
            M = sel.maximizers
            i, j = np.unravel_index(np.argmax(((M[:, None] - M[None]) ** 2).sum(-1)), (len(M), len(M)))
            wit.append({"kind": "DO", "w": w.tolist(), "v_1": M[i].tolist(), "v_2": M[j].tolist(),
                        "phi_of_w": sel.phi_of_w, "eps_tie": run_cfg.eps_tie_rel * (1 + abs(sel.phi_of_w)),
                        "delta_do": delta_do})
    return ConditionReport("DO", "fails" if wit else "holds-on-sample", tuple(wit),
                           {"seed": seed, "w_samples": w_samples, "starts": starts, "delta_do": delta_do},
                           {"max_separations": seps})


def _quad(f: Callable, x: float, a: float, b: float) -> float:
    pieces = max(1, int(min(abs(b - a), 1e5) // 50) + 1)
    # geometric breakpoints resolve thin layers of f around s = 0
    near0 = np.concatenate([10.0 ** np.arange(-8, 2), -(10.0 ** np.arange(-8, 2))])
    lo, hi = min(a, b), max(a, b)
    edges = np.unique(np.concatenate([np.linspace(lo, hi, pieces + 1), near0[(near0 > lo) & (near0 < hi)]]))
    if b < a:
        edges = edges[::-1]
    total = 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        with warnings.catch_warnings():
            # roundoff warnings at epsrel=1e-12 still leave an accurate value
            warnings.simplefilter("ignore", integrate.IntegrationWarning)
            val, _ = integrate.quad(lambda s: f(x, s), lo, hi, limit=200, epsabs=0.0, epsrel=1e-12)
        if not np.isfinite(val):
            raise EvaluationError([x, a, b], val, "quadrature of f returned a non-finite value")
        total += val
    return float(total)


def potential(f: Callable, x: float, t: float) -> float:
    """F(x, t) = integral_0^t f(x, s) ds by adaptive Gauss-Kronrod quadrature."""
    return 0.0 if t == 0 else _quad(f, x, 0.0, float(t))


def potential_many(f: Callable, x: float, ts) -> np.ndarray:
    """F(x, t) for many t, integrating between consecutive sorted values."""
    ts = np.asarray(ts, dtype=float)
    out = np.zeros(ts.size)
    for sign in (1.0, -1.0):
        idx = [i for i in np.argsort(sign * ts) if sign * ts[i] > 0]
        acc, prev = 0.0, 0.0
        for i in idx:
            acc += _quad(f, x, prev, ts[i])
            prev = ts[i]
            out[i] = acc
    return out


def check_nonresonance(f: Callable, lambda_k: float, lambda_kp1: float, s_grid: Sequence[float],
                       x_samples: Sequence[float] = (0.25, 0.5, 0.75), gap: float | None = None,
                       condition: Literal["eq1", "eq2"] = "eq1",
                       F: Optional[Callable] = None) -> ConditionReport:
    """Asymptotic slope band of f(x,s)/s (eq1) or 2F(x,s)/s^2 (eq2) between lambda_k and lambda_k+1.

    The outermost 20% of ``s_grid`` (by |s|) estimates liminf/limsup as a
    [min, max] band; it must sit inside [lambda_k + gap, lambda_k+1 - gap].
    """
    if not lambda_k < lambda_kp1:
        raise InputError("need lambda_k < lambda_k+1")
    s = np.asarray(s_grid, dtype=float)
    if not np.any(np.abs(s) >= 1e3):
        raise InputError("s_grid must contain values with |s| >= 1e3")
    if condition not in ("eq1", "eq2"):
        raise InputError(f"unknown condition {condition!r}")
    if gap is None:
        gap = 1e-3 * (lambda_kp1 - lambda_k)
    order = np.argsort(-np.abs(s))
    tail = s[order[: max(1, int(np.ceil(0.2 * s.size)))]]
    ratios = []
    for x in x_samples:
        if condition == "eq1":
            rs = [f(x, si) / si for si in tail]
        elif F is not None:
            rs = [2.0 * F(x, si) / si ** 2 for si in tail]
        else:
            rs = 2.0 * potential_many(f, x, tail) / tail ** 2
        ratios += [(float(x), float(si), float(r)) for si, r in zip(tail, rs)]
    rs = np.array([r for *_, r in ratios])
    lo, hi = float(rs.min()), float(rs.max())
    ok = lo >= lambda_k + gap and hi <= lambda_kp1 - gap
    wit = []
    if not ok:
        for x, si, r in ratios:
            if r < lambda_k + gap or r > lambda_kp1 - gap:
                wit.append({"kind": condition, "x": x, "s": si, "ratio": r,
                            "lower": lambda_k + gap, "upper": lambda_kp1 - gap})
    return ConditionReport(condition, "holds-on-sample" if ok else "fails", tuple(wit),
                           {"tail_size": int(tail.size), "x_samples": [float(x) for x in x_samples], "gap": gap},
                           {"band": [lo, hi], "lambda_k": lambda_k, "lambda_kp1": lambda_kp1})


def witness_reproduces(witness: dict, phi: LipschitzFunctional | None = None, split: SplitSpace | None = None,
                       f: Callable | None = None, F: Callable | None = None) -> bool:
    """Re-evaluate a witness and confirm it still violates its condition."""
    kind = witness["kind"]
    if kind == "coercive":
        z = np.zeros(split.dim_v)
        a = phi.value(split.embed(z, witness["w"]))
        b = phi.value(split.embed(z, witness["w_ref"]))
        return a == witness["value"] and a - b <= witness["floor"]
    if kind == "quasiconcave":
        w = np.asarray(witness["w"])
        va, vb, t = np.asarray(witness["v_a"]), np.asarray(witness["v_b"]), witness["t"]
        fa, fb = phi.value(split.embed(va, w)), phi.value(split.embed(vb, w))
        ft = phi.value(split.embed((1 - t) * va + t * vb, w))
        lo = min(fa, fb)
        if witness["strict"]:
            return ft <= lo + witness["margin"]
        return ft < lo - witness["tol"] * (1 + abs(lo))
    if kind == "anticoercive":
        val = phi.value(split.embed(witness["v"], witness["w"]))
        return val == witness["value"] and val >= witness["bound"]
    if kind == "DO":
        w = witness["w"]
        a = phi.value(split.embed(witness["v_1"], w))
        b = phi.value(split.embed(witness["v_2"], w))
        M = witness["phi_of_w"]
        sep = float(np.linalg.norm(np.subtract(witness["v_1"], witness["v_2"])))
        return abs(a - M) <= witness["eps_tie"] and abs(b - M) <= witness["eps_tie"] and sep > witness["delta_do"]
    if kind in ("eq1", "eq2"):
        x, s = witness["x"], witness["s"]
        if kind == "eq1":
            r = f(x, s) / s
        else:
            r = 2.0 * (F(x, s) if F is not None else potential(f, x, s)) / s ** 2
        return r < witness["lower"] or r > witness["upper"]
    raise InputError(f"unknown witness kind {kind!r}")


@dataclass(frozen=True)
class BundledCase:
    """A labeled example: running ``check`` must give the ``expected`` verdict."""

    label: str
    condition: str
    expected: str
    check: Callable[[int], ConditionReport]
    phi: Optional[LipschitzFunctional] = None
    f: Optional[Callable] = None


@dataclass(frozen=True)
class BundledOutcome:
    case: BundledCase
    report: ConditionReport
    correct: bool
    witnesses_reproduce: bool


def _plane(fun, smooth=True) -> LipschitzFunctional:
    return LipschitzFunctional(fun, 2, smooth=smooth)


def bundled_cases() -> list[BundledCase]:
    sp = SplitSpace.coordinate(1, 1)
    radii = (1.0, 2.0, 4.0, 8.0, 16.0)
    s_grid = np.concatenate([np.linspace(10, 1e4, 200), -np.linspace(10, 1e4, 200)])
    lam1, lam2 = np.pi ** 2, 4 * np.pi ** 2
    cases = []

    def add(label, cond, expected, phi, run):
        cases.append(BundledCase(label, cond, expected, lambda seed, phi=phi: run(phi, seed), phi=phi))

    for label, fun, exp in [("-v^2 + w^2", lambda u: -u[0] ** 2 + u[1] ** 2, "holds-on-sample"),
                            ("-v^2 - w^2", lambda u: -u[0] ** 2 - u[1] ** 2, "fails"),
                            ("-v^2 + |w|", lambda u: -u[0] ** 2 + abs(u[1]), "holds-on-sample")]:
        add(label, "i", exp, _plane(fun), lambda phi, seed: check_coercive_on_W(phi, sp, radii, seed=seed))
    for label, fun, exp, strict in [("-|v| + w", lambda u: -abs(u[0]) + u[1], "holds-on-sample", False),
                                    ("v^2", lambda u: u[0] ** 2, "fails", False),
                                    ("-v^2 (strict)", lambda u: -u[0] ** 2, "holds-on-sample", True)]:
        add(label, "ii''" if strict else "ii", exp, _plane(fun),
            lambda phi, seed, strict=strict: check_quasiconcave_V(phi, sp, strict=strict, seed=seed))
    for label, fun, exp in [("-v^2 + w^2", lambda u: -u[0] ** 2 + u[1] ** 2, "holds-on-sample"),
                            ("sin(v) + w^2", lambda u: np.sin(u[0]) + u[1] ** 2, "fails"),
                            ("-|v| + w^2", lambda u: -abs(u[0]) + u[1] ** 2, "holds-on-sample")]:
        add(label, "iii", exp, _plane(fun),
            lambda phi, seed: check_anticoercive_V(phi, sp, radii, w_bound=10.0, seed=seed))
    for label, fun, exp in [("-v^2 + w^2", lambda u: -u[0] ** 2 + u[1] ** 2, "holds-on-sample"),
                            ("-(v^2 - 1)^2", lambda u: -(u[0] ** 2 - 1) ** 2, "fails"),
                            ("-max(0, |v| - 1)^2", lambda u: -max(0.0, abs(u[0]) - 1) ** 2, "fails")]:
        add(label, "DO", exp, _plane(fun), lambda phi, seed: check_DO(phi, sp, seed=seed))
    for label, f, exp in [("25 s + cos s", lambda x, s: 25 * s + np.cos(s), "holds-on-sample"),
                          ("pi^2 s", lambda x, s: np.pi ** 2 * s, "fails"),
                          ("25 s + 5 sin(s) s / (1 + |s|)",
                           lambda x, s: 25 * s + 5 * np.sin(s) * s / (1 + np.abs(s)), "holds-on-sample")]:
        for cond in ("eq1", "eq2"):
            cases.append(BundledCase(label, cond, exp, lambda seed, f=f, cond=cond: check_nonresonance(
                f, lam1, lam2, s_grid, condition=cond), f=f))
    return cases


def run_bundled_cases(seed: int = 0) -> list[BundledOutcome]:
    """Run every bundled case; a case passes if the verdict matches and all witnesses reproduce."""
    sp = SplitSpace.coordinate(1, 1)
    out = []
    for case in bundled_cases():
        rep = case.check(seed)
        repro = all(witness_reproduces(w, case.phi, sp, f=case.f) for w in rep.witnesses)
        out.append(BundledOutcome(case, rep, rep.verdict == case.expected, repro))
    return out
