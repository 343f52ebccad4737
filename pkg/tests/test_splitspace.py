import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from nsminimax import DegenerateGapError, InputError, SplitSpace, eigensplit
from nsminimax.dirichlet import stiffness_matrix

from oracles import N3_EIGENVALUES


def random_split(n, k, seed):
    rng = np.random.default_rng(seed)
    M = rng.normal(size=(n, n))
    return eigensplit(M + M.T, k)


class TestEigensplit:
    def test_diagonal(self):
        sp = eigensplit(np.diag([1.0, 5.0, 9.0]), 1)
        np.testing.assert_allclose(sp.eigenvalues, [1, 5, 9])
        np.testing.assert_allclose(np.abs(sp.basis_v[:, 0]), [1, 0, 0], atol=1e-12)

    def test_three_point_laplacian(self):
        sp = eigensplit(stiffness_matrix(3), 1)
        np.testing.assert_allclose(sp.eigenvalues, N3_EIGENVALUES, rtol=1e-12)

    def test_k_equal_n_rejected(self):
        with pytest.raises(InputError):
            eigensplit(np.eye(3), 3)

    def test_gap_across_cut_rejected(self):
        with pytest.raises(DegenerateGapError):
            eigensplit(np.diag([1.0, 2.0, 2.0]), 2)

    def test_tie_below_cut_allowed(self):
        sp = eigensplit(np.diag([1.0, 1.0, 2.0]), 2)
        assert sp.dim_v == 2

    def test_asymmetric_rejected(self):
        with pytest.raises(InputError):
            eigensplit(np.array([[1.0, 2.0], [0.0, 1.0]]), 1)

    def test_spectral_consistency(self):
        A = stiffness_matrix(15)
        sp = eigensplit(A, 4)
        for i in range(4):
            col = sp.basis_v[:, i]
            lam = sp.eigenvalues[i]
            np.testing.assert_allclose(A @ col, lam * col, atol=1e-8 * (1 + abs(lam)))


class TestProjections:
    def test_project_v(self):
        sp = eigensplit(np.diag([1.0, 5.0, 9.0]), 1)
        np.testing.assert_allclose(sp.project([3.0, 4.0, 5.0], "V"), [3, 0, 0], atol=1e-12)

    def test_w_column_has_no_v_part(self):
        sp = random_split(6, 2, 1)
        np.testing.assert_allclose(sp.project(sp.basis_w[:, 0], "V"), 0, atol=1e-10)

    def test_embed_zero(self):
        sp = random_split(5, 2, 0)
        np.testing.assert_array_equal(sp.embed(np.zeros(2), np.zeros(3)), np.zeros(5))

    def test_bad_which(self):
        with pytest.raises(InputError):
            SplitSpace.coordinate(1, 1).project([1.0, 2.0], "X")

    def test_bad_lengths(self):
        sp = SplitSpace.coordinate(1, 2)
        with pytest.raises(InputError):
            sp.embed([1.0, 2.0], [1.0])
        with pytest.raises(InputError):
            sp.coords([1.0, 2.0])

    @pytest.mark.parametrize("n,k", [(2, 1), (5, 2), (9, 8)])
    def test_orthonormal_and_complementary(self, n, k):
        sp = random_split(n, k, n + k)
        np.testing.assert_allclose(sp.basis_v.T @ sp.basis_v, np.eye(k), atol=1e-10)
        np.testing.assert_allclose(sp.basis_w.T @ sp.basis_w, np.eye(n - k), atol=1e-10)
        np.testing.assert_allclose(sp.basis_v.T @ sp.basis_w, 0, atol=1e-10)
        np.testing.assert_allclose(sp.projector("V") + sp.projector("W"), np.eye(n), atol=1e-10)

    @settings(max_examples=50, deadline=None)
    @given(arrays(float, 6, elements=st.floats(-1e3, 1e3)))
    def test_idempotent(self, u):
        sp = random_split(6, 3, 2)
        p = sp.project(u, "V")
        np.testing.assert_allclose(sp.project(p, "V"), p, atol=1e-12 * (1 + np.abs(u).max()))

    @settings(max_examples=100, deadline=None)
    @given(arrays(float, 2, elements=st.floats(-100, 100)), arrays(float, 3, elements=st.floats(-100, 100)))
    def test_round_trip_and_pythagoras(self, v, w):
        sp = random_split(5, 2, 4)
        u = sp.embed(v, w)
        v2, w2 = sp.coords(u)
        np.testing.assert_allclose(v2, v, atol=1e-10 * (1 + np.abs(u).max()))
        np.testing.assert_allclose(w2, w, atol=1e-10 * (1 + np.abs(u).max()))
        assert np.linalg.norm(u) ** 2 == pytest.approx(v @ v + w @ w, rel=1e-10, abs=1e-10)
        np.testing.assert_allclose(sp.project(sp.embed(v, np.zeros(3)), "V"), sp.basis_v @ v, atol=1e-10)
