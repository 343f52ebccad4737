"""Orthogonal splitting E = V + W from the spectrum of a symmetric operator."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal, Optional

import numpy as np

from .errors import DegenerateGapError, InputError


@dataclass(frozen=True)
class SplitSpace:
    """Orthonormal bases of V (first ``dim_v`` modes) and W = V^perp.

    All solvers work in coordinates (v, w); ``embed`` maps them back to E.
    """

    basis_v: np.ndarray
    basis_w: np.ndarray
    eigenvalues: Optional[np.ndarray] = None

    def __post_init__(self):
        bv = np.asarray(self.basis_v, dtype=float)
        bw = np.asarray(self.basis_w, dtype=float)
        if bv.ndim != 2 or bw.ndim != 2 or bv.shape[0] != bw.shape[0]:
            raise InputError("bases must be n x k and n x (n-k) matrices")
        if bv.shape[1] < 1 or bw.shape[1] < 1:
            raise InputError("both V and W must be nontrivial")
        if bv.shape[1] + bw.shape[1] != bv.shape[0]:
            raise InputError("dim V + dim W must equal n")
        object.__setattr__(self, "basis_v", bv)
        object.__setattr__(self, "basis_w", bw)
        if self.eigenvalues is not None:
            object.__setattr__(self, "eigenvalues", np.asarray(self.eigenvalues, dtype=float))

    @property
    def dim_total(self) -> int:
        return self.basis_v.shape[0]

    @property
    def dim_v(self) -> int:
        return self.basis_v.shape[1]

    @property
    def dim_w(self) -> int:
        return self.basis_w.shape[1]

    @classmethod
    def coordinate(cls, k: int, m: int) -> "SplitSpace":
        """E = R^(k+m) with V the first k coordinates."""
        eye = np.eye(k + m)
        return cls(eye[:, :k], eye[:, k:])

    def projector(self, which: Literal["V", "W"]) -> np.ndarray:
        B = self._basis(which)
        return B @ B.T

    def _basis(self, which: str) -> np.ndarray:
        if which == "V":
            return self.basis_v
        if which == "W":
            return self.basis_w
        raise InputError(f"which must be 'V' or 'W', got {which!r}")

    def _check_full(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        if u.shape != (self.dim_total,):
            raise InputError(f"expected a vector of length {self.dim_total}, got shape {u.shape}")
        return u

    def project(self, u, which: Literal["V", "W"]) -> np.ndarray:
        u = self._check_full(u)
        B = self._basis(which)
        return B @ (B.T @ u)

    def coords(self, u) -> tuple[np.ndarray, np.ndarray]:
        """(v_coords, w_coords) of a vector of E."""
        u = self._check_full(u)
        return self.basis_v.T @ u, self.basis_w.T @ u

    def embed(self, v_coords, w_coords) -> np.ndarray:
        v = np.asarray(v_coords, dtype=float).reshape(-1)
        w = np.asarray(w_coords, dtype=float).reshape(-1)
        if v.size != self.dim_v or w.size != self.dim_w:
            raise InputError(f"coordinate lengths must be ({self.dim_v}, {self.dim_w}), got ({v.size}, {w.size})")
        return self.basis_v @ v + self.basis_w @ w


def eigensplit(A, k: int, sym_tol: float = 1e-12, gap_tol: float = 1e-10) -> SplitSpace:
    """V = span of eigenvectors of the k smallest eigenvalues of A, W = the rest."""
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise InputError("A must be a square matrix")
    n = A.shape[0]
    if not 1 <= k < n:
        raise InputError(f"need 1 <= k < n, got k={k}, n={n}")
    scale = np.linalg.norm(A)
    if np.linalg.norm(A - A.T) > sym_tol * max(scale, 1e-300):
        raise InputError("A is not symmetric")
    lam, Q = np.linalg.eigh(A)
    if abs(lam[k] - lam[k - 1]) <= gap_tol * (1 + abs(lam[k - 1])):
        raise DegenerateGapError(k, float(lam[k - 1]), float(lam[k]))
    return SplitSpace(Q[:, :k], Q[:, k:], lam)
