import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nsminimax import (
    AntiCoercivityError,
    InputError,
    LipschitzFunctional,
    MinimaxProblem,
    NonConvergenceError,
    OuterConfig,
    SplitSpace,
    StageError,
    inner_max,
    outer_gradient,
    outer_minimize,
    solve_saddle,
)
from nsminimax.cli import quadratic_saddle

from oracles import QUAD_SADDLE

PLANE = SplitSpace.coordinate(1, 1)


def F(fun, dim=2, smooth=True):
    return LipschitzFunctional(fun, dim, smooth=smooth)


def phi_of(problem, w):
    return inner_max(problem.phi, problem.split, w, problem.selection_cfg).phi_of_w


class TestOuterGradient:
    def test_decoupled(self):
        p = MinimaxProblem(F(lambda u: -u[0] ** 2 / 2 + u[1] ** 2 / 2), PLANE)
        np.testing.assert_allclose(outer_gradient(p, [3.0], inner_max(p.phi, PLANE, [3.0])), [3.0], atol=1e-6)

    def test_envelope(self):
        p = MinimaxProblem(F(lambda u: -(u[0] - u[1]) ** 2 + u[1] ** 2), PLANE)
        np.testing.assert_allclose(outer_gradient(p, [2.0], inner_max(p.phi, PLANE, [2.0])), [4.0], atol=1e-6)

    def test_nonsmooth_kink(self):
        p = MinimaxProblem(F(lambda u: -u[0] ** 2 / 2 + abs(u[1]), smooth=False), PLANE)
        g = outer_gradient(p, [0.0], inner_max(p.phi, PLANE, [0.0]))
        assert np.linalg.norm(g) <= 1e-6

    @settings(max_examples=10, deadline=None)
    @given(st.floats(-2, 2))
    def test_matches_central_differences(self, w):
        phi = F(lambda u: -(u[0] - np.sin(u[1])) ** 2 - 0.1 * u[0] ** 4 + np.cosh(u[1]))
        p = MinimaxProblem(phi, PLANE)
        g = outer_gradient(p, [w], inner_max(phi, PLANE, [w]))
        h = 1e-5
        fd = (phi_of(p, [w + h]) - phi_of(p, [w - h])) / (2 * h)
        assert abs(g[0] - fd) <= max(1e-5, 1e-3 * abs(g[0]))


class TestOuterMinimize:
    def test_quadratic(self):
        w, sel, trace, switched = outer_minimize(MinimaxProblem(quadratic_saddle(), PLANE))
        np.testing.assert_allclose(w, [QUAD_SADDLE["w"]], atol=1e-8)
        assert sel.phi_of_w == pytest.approx(QUAD_SADDLE["c"], abs=1e-10)
        assert not switched

    def test_shifted(self):
        w, sel, *_ = outer_minimize(MinimaxProblem(F(lambda u: -(u[0] - 1) ** 2 + (u[1] + 1) ** 2), PLANE))
        np.testing.assert_allclose(w, [-1.0], atol=1e-8)
        assert sel.phi_of_w == pytest.approx(0.0, abs=1e-12)

    def test_monotone_trace(self):
        phi = F(lambda u: -(u[0] - np.sin(u[1])) ** 2 + np.cosh(u[1] - 0.5) + 0.1 * u[1] ** 4)
        _, _, trace, _ = outer_minimize(MinimaxProblem(phi, PLANE, outer_cfg=OuterConfig(w0=(2.0,))))
        vals = [e.phi for e in trace if e.mode in ("start", "bfgs", "sampled")]
        for a, b in zip(vals, vals[1:]):
            assert b <= a + 1e-12 * (1 + abs(a))

    def test_iteration_cap(self):
        phi = F(lambda u: -u[0] ** 2 + np.cosh(u[1] - 3.0) + 0.01 * u[1] ** 6)
        with pytest.raises(NonConvergenceError) as err:
            outer_minimize(MinimaxProblem(phi, PLANE, outer_cfg=OuterConfig(max_iter=1, w0=(-3.0,))))
        assert err.value.trace

    def test_anticoercivity_propagates_with_stage(self):
        with pytest.raises(StageError) as err:
            solve_saddle(MinimaxProblem(F(lambda u: u[0] + u[1] ** 2), PLANE))
        assert err.value.stage == "outer"
        assert isinstance(err.value.cause, AntiCoercivityError)

    def test_dimension_mismatch(self):
        with pytest.raises(InputError):
            MinimaxProblem(F(lambda u: 0.0, dim=3), PLANE)

    def test_degenerate_inner_switches(self):
        phi = F(lambda u: -max(0.0, abs(u[0]) - 1) ** 2 + (u[1] - 0.5) ** 2)
        w, sel, trace, switched = outer_minimize(MinimaxProblem(phi, PLANE))
        assert switched
        assert any("degenerate" in e.event for e in trace)
        np.testing.assert_allclose(w, [0.5], atol=1e-4)
        assert abs(sel.v_star[0]) <= 1e-3


class TestSolveSaddle:
    def test_quadratic_report(self):
        rep = solve_saddle(MinimaxProblem(quadratic_saddle(), PLANE))
        np.testing.assert_allclose([rep.v_bar[0], rep.w_bar[0]], [QUAD_SADDLE["v"], QUAD_SADDLE["w"]], atol=1e-8)
        assert rep.c == pytest.approx(QUAD_SADDLE["c"], abs=1e-10)
        assert rep.criticality.residual <= 1e-6
        assert rep.criticality.verdict == "critical"

    def test_report_invariants(self):
        phi = F(lambda u: -(u[0] - np.sin(u[1])) ** 2 + np.cosh(u[1] - 0.5))
        rep = solve_saddle(MinimaxProblem(phi, PLANE))
        np.testing.assert_allclose(rep.u_bar, PLANE.embed(rep.v_bar, rep.w_bar), atol=1e-12)
        assert abs(phi.value(rep.u_bar) - rep.c) <= 1e-10 * (1 + abs(rep.c))
        assert abs(rep.phi_of_w_bar - rep.c) <= 1e-10 * (1 + abs(rep.c))
        upper, lower = rep.saddle_audit
        assert upper <= rep.tol_saddle and lower >= -rep.tol_saddle
        eps = rep.criticality.eps_crit
        assert rep.criticality_split[0] <= eps and rep.criticality_split[1] <= eps

    def test_nonsmooth_saddle(self):
        rep = solve_saddle(MinimaxProblem(F(lambda u: -abs(u[0]) + u[1] ** 2, smooth=False), PLANE))
        np.testing.assert_allclose(rep.u_bar, [0, 0], atol=1e-6)
        assert rep.c == pytest.approx(0.0, abs=1e-10)
        assert rep.criticality.residual <= 1e-3
        assert rep.switched

    def test_deterministic(self):
        a = solve_saddle(MinimaxProblem(F(lambda u: -abs(u[0]) + u[1] ** 2, smooth=False), PLANE))
        b = solve_saddle(MinimaxProblem(F(lambda u: -abs(u[0]) + u[1] ** 2, smooth=False), PLANE))
        np.testing.assert_array_equal(a.u_bar, b.u_bar)
        assert a.criticality.residuals == b.criticality.residuals
        assert a.saddle_audit == b.saddle_audit

    def test_higher_dimensional_split(self):
        rng = np.random.default_rng(0)
        Q, _ = np.linalg.qr(rng.normal(size=(4, 4)))
        D = np.diag([-2.0, -1.0, 1.5, 3.0])
        H = Q @ D @ Q.T
        b = rng.normal(size=4)
        phi = LipschitzFunctional(lambda u: 0.5 * u @ H @ u - b @ u, 4, grad_opt=lambda u: H @ u - b)
        sp = SplitSpace(Q[:, :2], Q[:, 2:])
        rep = solve_saddle(MinimaxProblem(phi, sp))
        np.testing.assert_allclose(rep.u_bar, np.linalg.solve(H, b), atol=1e-7)
