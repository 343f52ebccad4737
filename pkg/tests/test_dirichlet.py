import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nsminimax import DirichletProblem, HypothesisFailure, InputError, NsMinimaxError, OuterConfig, assemble, energy, energy_residual, solve_dirichlet
from nsminimax.dirichlet import (
    closed_form_eigenvalues,
    energy_functional,
    linear_oracle,
    linear_problem,
    stiffness_matrix,
    tanh_problem,
)
from nsminimax.hypotheses import potential

from oracles import N3_EIGENVALUES, continuum_linear, dense_linear_oracle


class TestAssemble:
    def test_three_points(self):
        en, sp = assemble(linear_problem(n=3))
        np.testing.assert_allclose(sp.eigenvalues, N3_EIGENVALUES, rtol=1e-12)
        assert sp.dim_v == 1

    @pytest.mark.parametrize("n", [7, 63, 127])
    def test_closed_form_spectrum(self, n):
        _, sp = assemble(linear_problem(n=n))
        np.testing.assert_allclose(sp.eigenvalues, closed_form_eigenvalues(n), rtol=1e-8)

    def test_first_eigenvalue_near_pi_squared(self):
        lam = assemble(linear_problem(n=127))[1].eigenvalues
        assert abs(lam[0] - np.pi ** 2) <= 2e-3 * np.pi ** 2
        lam63 = assemble(linear_problem(n=63))[1].eigenvalues
        assert abs(lam63[0] - np.pi ** 2) <= 0.02 * np.pi ** 2

    def test_stencil_rows(self):
        n = 9
        h = 1 / (n + 1)
        rows = stiffness_matrix(n).sum(1) * h * h
        np.testing.assert_allclose(rows[1:-1], 0, atol=1e-12)
        np.testing.assert_allclose(rows[[0, -1]], 1)

    def test_spd(self):
        A = stiffness_matrix(15)
        np.testing.assert_array_equal(A, A.T)
        assert np.linalg.eigvalsh(A).min() > 0

    def test_spacing(self):
        p = linear_problem(n=31)
        assert p.h * (p.n + 1) == pytest.approx(1.0, abs=1e-14)

    def test_validation(self):
        with pytest.raises(InputError):
            linear_problem(n=2)
        with pytest.raises(InputError):
            linear_problem(n=5, k=5)


class TestEnergy:
    def test_zero(self):
        p = linear_problem(n=15)
        en, _ = assemble(p)
        assert energy(p, en, np.zeros(15)) == 0.0
        np.testing.assert_allclose(energy_residual(p, en, np.zeros(15)), -np.sin(np.pi * p.nodes))

    def test_rayleigh_identity(self):
        n = 31
        free = DirichletProblem(n=n, f=lambda x, s: 0 * s, F=lambda x, t: 0 * t)
        en, sp = assemble(free)
        e1 = sp.basis_v[:, 0] / np.sqrt(free.h)  # unit discrete L2 norm
        assert energy(free, en, e1) == pytest.approx(0.5 * sp.eigenvalues[0], rel=1e-12)
        lin = DirichletProblem(n=n, f=lambda x, s: s, F=lambda x, t: 0.5 * t * t)
        assert energy(lin, en, e1) == pytest.approx(0.5 * (sp.eigenvalues[0] - 1), rel=1e-12)

    def test_residual_is_stiffness_when_f_vanishes(self):
        p = DirichletProblem(n=9, f=lambda x, s: 0 * s, F=lambda x, t: 0 * t)
        en, _ = assemble(p)
        u = np.random.default_rng(0).normal(size=9)
        np.testing.assert_allclose(energy_residual(p, en, u), en.stiffness @ u)

    def test_residual_vanishes_at_oracle(self):
        p = linear_problem(n=31)
        en, _ = assemble(p)
        res = energy_residual(p, en, linear_oracle(25.0, 31))
        assert np.abs(res).max() <= 1e-9

    def test_gradient_consistency(self):
        p = DirichletProblem(n=11, f=lambda x, s: 25 * s + np.sin(s) + x,
                             F=lambda x, t: 12.5 * t * t + 1 - np.cos(t) + x * t)
        en, _ = assemble(p)
        rng = np.random.default_rng(1)
        for _ in range(20):
            u = rng.normal(size=11)
            grad = p.h * energy_residual(p, en, u)
            fd = np.array([(energy(p, en, u + 1e-6 * e) - energy(p, en, u - 1e-6 * e)) / 2e-6
                           for e in np.eye(11)])
            np.testing.assert_allclose(fd, grad, rtol=1e-6, atol=1e-9)

    @settings(max_examples=20, deadline=None)
    @given(st.floats(-50, 50), st.floats(0.05, 0.95))
    def test_closed_form_potential_matches_quadrature(self, t, x):
        p = tanh_problem(n=5, width=1e-2)
        Fq = potential(p.f, x, t)
        assert abs(p.F(x, t) - Fq) <= 1e-8 * (1 + abs(Fq))

    def test_quadrature_potential_when_no_closed_form(self):
        p = DirichletProblem(n=5, f=lambda x, s: 25 * s + x)
        np.testing.assert_allclose(p.potential(np.full(5, 2.0)), 50 + 2 * p.nodes, rtol=1e-10)

    def test_bad_length(self):
        p = linear_problem(n=5)
        with pytest.raises(InputError):
            energy(p, assemble(p)[0], np.zeros(4))


class TestSolve:
    def test_linear_oracle(self):
        rep = solve_dirichlet(linear_problem(n=63))
        np.testing.assert_allclose(rep.u, dense_linear_oracle(63, 25.0, lambda x: np.sin(np.pi * x)), atol=1e-6)
        assert rep.residual_inf <= 1e-6

    def test_forcing_in_all_modes(self):
        n = 63
        p = DirichletProblem(n=n, f=lambda x, s: 25 * s + x, F=lambda x, t: 12.5 * t * t + x * t)
        rep = solve_dirichlet(p)
        np.testing.assert_allclose(rep.u, dense_linear_oracle(n, 25.0, lambda x: x), atol=1e-6)
        assert rep.residual_inf <= 1e-6
        assert rep.report.iterations > 5

    def test_mesh_convergence(self):
        errs = []
        for n in (63, 127):
            p = linear_problem(n=n)
            errs.append(np.abs(solve_dirichlet(p).u - continuum_linear(p.nodes)).max())
        assert 3.5 <= errs[0] / errs[1] <= 4.5

    def test_resonance_refused(self):
        p = DirichletProblem(n=31, f=lambda x, s: np.pi ** 2 * s, F=lambda x, t: 0.5 * np.pi ** 2 * t * t)
        with pytest.raises(HypothesisFailure) as err:
            solve_dirichlet(p)
        ids = {r.condition_id for r in err.value.reports}
        assert {"eq1", "eq2"} <= ids

    def test_gate_passes_without_force(self):
        p = DirichletProblem(n=15, f=lambda x, s: 12 * s + np.sin(np.pi * x),
                             F=lambda x, t: 6 * t * t + np.sin(np.pi * x) * t)
        rep = solve_dirichlet(p)
        assert not rep.forced
        assert all(r.verdict == "holds-on-sample" for r in rep.nonresonance)

    def test_resonance_forced(self):
        # mu below lambda_1: the gate refuses, force runs the solver anyway and records it
        p = DirichletProblem(n=7, f=lambda x, s: 9.0 * s + np.sin(np.pi * x),
                             F=lambda x, t: 4.5 * t * t + np.sin(np.pi * x) * t, force=True,
                             outer_cfg=OuterConfig(max_iter=20, fallback_max_iter=5))
        try:
            rep = solve_dirichlet(p)
        except NsMinimaxError:
            return
        assert rep.forced
        assert any(r.verdict == "fails" for r in rep.nonresonance)

    def test_nonsmooth_small(self):
        rep = solve_dirichlet(tanh_problem(n=15))
        assert rep.residual_inf is None
        assert rep.report.criticality.residual <= 1e-3
        assert rep.report.switched
