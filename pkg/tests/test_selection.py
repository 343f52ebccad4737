import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nsminimax import (
    AntiCoercivityError,
    InputError,
    LipschitzFunctional,
    LscFailureError,
    SelectionConfig,
    SplitSpace,
    inner_max,
    lsc_probe,
    michael_selection_mesh,
    perturbed_selection,
    selection_continuity_audit,
)
from nsminimax.selection import MultiMapSample, dominance_violation, polytope_distance, sample_multimap

from oracles import disc_min_norm, polygon_disc

PLANE = SplitSpace.coordinate(1, 1)


def plateau(shift=0.0):
    return LipschitzFunctional(lambda u: -max(0.0, abs(u[0]) - 1) ** 2 + shift * u[1], 2)


def jump_up(m):
    return np.array([[0.0]]) if m < 0 else np.array([[-1.0], [1.0]])


def jump_down(m):
    return np.array([[-1.0], [1.0]]) if m < 0 else np.array([[0.0]])


class TestInnerMax:
    def test_tracks_w(self):
        phi = LipschitzFunctional(lambda u: -(u[0] - u[1]) ** 2, 2)
        for w in (-2.0, 0.0, 1.5):
            sel = inner_max(phi, PLANE, [w])
            np.testing.assert_allclose(sel.v_star, [w], atol=1e-8)
            assert sel.phi_of_w == pytest.approx(0.0, abs=1e-12)

    def test_quadratic(self):
        phi = LipschitzFunctional(lambda u: -u[0] ** 2 / 2 + u[1] ** 2 / 2 + 3 * u[0], 2)
        sel = inner_max(phi, PLANE, [1.0])
        np.testing.assert_allclose(sel.v_star, [3.0], atol=1e-8)
        assert sel.phi_of_w == pytest.approx(5.0, abs=1e-10)
        assert not sel.degeneracy_flag

    def test_plateau_is_degenerate(self):
        sel = inner_max(plateau(1.0), PLANE, [0.3])
        assert sel.degeneracy_flag
        assert abs(sel.v_star[0]) <= 1 + 1e-6

    def test_anticoercivity_violation(self):
        phi = LipschitzFunctional(lambda u: u[0] + u[1], 2)
        with pytest.raises(AntiCoercivityError):
            inner_max(phi, PLANE, [0.0], SelectionConfig(r_max=50.0))

    def test_dimension_mismatch(self):
        with pytest.raises(InputError):
            inner_max(LipschitzFunctional(lambda u: 0.0, 3), PLANE, [0.0])

    def test_v_star_reproduces_value(self):
        phi = LipschitzFunctional(lambda u: -np.cosh(u[0] - 0.2) + np.sin(u[1]), 2)
        sel = inner_max(phi, PLANE, [0.7])
        assert abs(phi.value(PLANE.embed(sel.v_star, [0.7])) - sel.phi_of_w) <= 1e-10 * (1 + abs(sel.phi_of_w))

    def test_tie_break_deterministic(self):
        a = inner_max(plateau(), PLANE, [0.0])
        b = inner_max(plateau(), PLANE, [0.0])
        np.testing.assert_array_equal(a.v_star, b.v_star)
        assert a.start_index == b.start_index

    def test_nonsmooth_inner(self):
        phi = LipschitzFunctional(lambda u: -abs(u[0] - 0.4) + u[1] ** 2, 2, smooth=False)
        sel = inner_max(phi, PLANE, [0.0])
        np.testing.assert_allclose(sel.v_star, [0.4], atol=1e-6)

    @settings(max_examples=15, deadline=None)
    @given(st.floats(-3, 3))
    def test_dominance_on_audit_sample(self, w):
        phi = LipschitzFunctional(lambda u: -(u[0] - np.sin(u[1])) ** 2 - 0.1 * u[0] ** 4, 2)
        sel = inner_max(phi, PLANE, [w])
        assert dominance_violation(phi, PLANE, sel) <= 0.0

    def test_strictly_quasiconcave_starts_agree(self):
        phi = LipschitzFunctional(lambda u: -np.log1p((u[0] - 1) ** 2) + u[1], 2)
        sel = inner_max(phi, PLANE, [0.0])
        vals = np.array(sel.multistart_values)
        assert np.ptp(vals) <= 1e-8 * (1 + abs(sel.phi_of_w))


class TestPerturbedSelection:
    def test_plateau_picks_zero(self):
        sel = perturbed_selection(plateau(), PLANE, [0.0])
        assert abs(sel.v_star[0]) <= 1e-3
        assert sel.method == "perturbed"

    def test_singleton_unchanged(self):
        phi = LipschitzFunctional(lambda u: -(u[0] - 2) ** 2, 2)
        sel = perturbed_selection(phi, PLANE, [0.0])
        np.testing.assert_allclose(sel.v_star, [2.0], atol=1e-3)

    def test_disc_min_norm(self):
        sp = SplitSpace.coordinate(2, 1)
        phi = LipschitzFunctional(lambda u: -max(0.0, np.hypot(u[0] - 1, u[1]) - 1) ** 2, 3)
        sel = perturbed_selection(phi, sp, [0.0])
        assert np.linalg.norm(sel.v_star) <= 1e-3

    def test_value_within_delta(self):
        sel = perturbed_selection(plateau(), PLANE, [0.0])
        delta = 1e-8 * (1 + abs(sel.phi_of_w))
        assert sel.value_at_v_star >= sel.phi_of_w - delta

    def test_norm_minimality_on_shifted_plateaus(self):
        for c in (0.5, 2.0, -1.5):
            phi = LipschitzFunctional(lambda u, c=c: -max(0.0, abs(u[0] - c) - 1) ** 2, 2)
            sel = perturbed_selection(phi, PLANE, [0.0])
            assert abs(sel.v_star[0]) <= max(0.0, abs(c) - 1) + 1e-3

    def test_bad_delta(self):
        with pytest.raises(InputError):
            perturbed_selection(plateau(), PLANE, [0.0], delta=-1.0)


class TestContinuityAudit:
    def test_identity_selection(self):
        phi = LipschitzFunctional(lambda u: -(u[0] - u[1]) ** 2, 2)
        audit = selection_continuity_audit(phi, PLANE, [[w] for w in np.linspace(0, 1, 11)])
        assert audit.modulus == pytest.approx(1.0, abs=1e-6)
        assert not audit.discontinuous

    def test_constant_in_v(self):
        phi = LipschitzFunctional(lambda u: u[1] ** 2, 2)
        audit = selection_continuity_audit(phi, PLANE, [[w] for w in np.linspace(-1, 1, 5)])
        assert audit.modulus <= 1e-3

    def test_pitchfork_modulus_finite(self):
        phi = LipschitzFunctional(lambda u: -u[0] ** 4 / 4 + u[0] ** 2 * u[1], 2)
        audit = selection_continuity_audit(phi, PLANE, [[0.0], [0.1]])
        # maximizers +-sqrt(2w): either branch is sqrt(0.2) away from v = 0
        assert audit.modulus == pytest.approx(np.sqrt(0.2) / 0.1, rel=1e-3)

    def test_repeated_points_rejected(self):
        phi = LipschitzFunctional(lambda u: -(u[0] - u[1]) ** 2, 2)
        with pytest.raises(InputError):
            selection_continuity_audit(phi, PLANE, [[0.0], [0.0]])


class TestMultiMaps:
    def test_constant_square_no_violations(self):
        sq = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
        T = sample_multimap(lambda m: sq, -1, 1, 21)
        assert lsc_probe(T).ok

    def test_jump_up_violates(self):
        rep = lsc_probe(sample_multimap(jump_up, -1, 1, 21))
        assert len(rep.violations) > 0
        assert all(abs(m) <= 0.2 for m, *_ in [(t[0][0],) for t in rep.violations])

    def test_jump_down_clean(self):
        rep = lsc_probe(sample_multimap(jump_down, -1, 1, 21))
        assert rep.ok

    def test_michael_constant_square(self):
        sq = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
        s = michael_selection_mesh(sample_multimap(lambda m: sq, -1, 1, 11))
        for m in np.linspace(-1, 1, 7):
            np.testing.assert_allclose(s(m), [0, 0], atol=1e-12)

    def test_michael_interval(self):
        s = michael_selection_mesh(sample_multimap(lambda m: np.array([[m], [m + 1]]), 0, 1, 11))
        for m in np.linspace(0, 1, 11):
            np.testing.assert_allclose(s(m), [m], atol=1e-12)

    def test_michael_moving_disc(self):
        T = sample_multimap(lambda m: polygon_disc((m, 0.0)), 0, 2, 41)
        s = michael_selection_mesh(T)
        for m in T.domain_mesh[:, 0]:
            np.testing.assert_allclose(s(m), disc_min_norm(m), atol=1e-3)
        assert s.max_excursion <= 1e-3

    def test_michael_refuses_jump_up(self):
        with pytest.raises(LscFailureError):
            michael_selection_mesh(sample_multimap(jump_up, -1, 1, 21))

    def test_multimap_validation(self):
        with pytest.raises(InputError):
            MultiMapSample(np.array([0.0, 1.0]), (np.zeros((1, 2)),), 1.0)
        with pytest.raises(InputError):
            MultiMapSample(np.array([0.0, 1.0]), (np.zeros((1, 2)), np.zeros((1, 3))), 1.0)

    def test_polytope_distance(self):
        seg = np.array([[0.0, 0.0], [2.0, 0.0]])
        assert polytope_distance([1.0, 1.0], seg) == pytest.approx(1.0, abs=1e-10)
        assert polytope_distance([1.0, 0.0], seg) == pytest.approx(0.0, abs=1e-10)
