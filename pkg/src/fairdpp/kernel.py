"""Gram kernels over nonnegative feature vectors and their principal minors.

Determinants are always handled in log space.  A singular principal submatrix
has log-determinant ``-inf``; callers test for it with :func:`is_singular`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Literal

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.linalg.lapack import dpstrf

from fairdpp.errors import InputError

Normalization = Literal["l2", "l1", "none"]

SYMMETRY_RTOL = 1e-12
PSD_RTOL = 1e-9
PIVOT_RTOL = 1e-12
EIGEN_CLAMP_RTOL = 1e-12

SINGULAR = -math.inf


def is_singular(logdet: float) -> bool:
    return logdet == SINGULAR


def _readonly(a: NDArray) -> NDArray:
    a = np.array(a, dtype=float, copy=True)
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class FeatureMatrix:
    """``n x d`` matrix of nonnegative, histogram-like feature rows."""

    values: NDArray[np.float64]

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 2:
            raise InputError(f"features must be a 2-D array, got shape {values.shape}")
        if not np.all(np.isfinite(values)):
            raise InputError("features contain non-finite entries")
        if np.any(values < 0):
            bad = int(np.argwhere(values < 0)[0, 0])
            raise InputError(f"features must be nonnegative (row {bad} has a negative entry)")
        norms = np.linalg.norm(values, axis=1)
        if np.any(norms == 0):
            bad = int(np.flatnonzero(norms == 0)[0])
            raise InputError(f"row {bad} has zero norm")
        object.__setattr__(self, "values", _readonly(values))

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def d(self) -> int:
        return self.values.shape[1]

    def normalized(self, mode: Normalization = "l2") -> NDArray[np.float64]:
        if mode == "l2":
            return self.values / np.linalg.norm(self.values, axis=1, keepdims=True)
        if mode == "l1":
            return self.values / self.values.sum(axis=1, keepdims=True)
        if mode == "none":
            return np.array(self.values)
        raise InputError(f"unknown normalization mode {mode!r}")


@dataclass(frozen=True, eq=False)
class Kernel:
    """Symmetric positive semidefinite ``n x n`` kernel matrix.

    Construction validates symmetry (relative tolerance 1e-12) and positive
    semidefiniteness (smallest eigenvalue >= -1e-9 times the largest).
    Kernels that fail are rejected, never repaired.
    """

    matrix: NDArray[np.float64]

    def __post_init__(self) -> None:
        m = np.asarray(self.matrix, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise InputError(f"kernel must be square, got shape {m.shape}")
        if not np.all(np.isfinite(m)):
            raise InputError("kernel contains non-finite entries")
        scale = max(float(np.max(np.abs(m), initial=0.0)), np.finfo(float).tiny)
        if np.max(np.abs(m - m.T), initial=0.0) > SYMMETRY_RTOL * scale:
            raise InputError("kernel is not symmetric")
        m = 0.5 * (m + m.T)
        if m.shape[0]:
            eig = np.linalg.eigvalsh(m)
            if eig[0] < -PSD_RTOL * max(eig[-1], 0.0):
                raise InputError(
                    f"kernel is not positive semidefinite (min eigenvalue {eig[0]:.3g}, "
                    f"max {eig[-1]:.3g})"
                )
        object.__setattr__(self, "matrix", _readonly(m))

    @classmethod
    def _trusted(cls, matrix: NDArray) -> Kernel:
        # Principal submatrices of a validated kernel are PSD already.
        k = object.__new__(cls)
        object.__setattr__(k, "matrix", _readonly(matrix))
        return k

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    def submatrix(self, indices: ArrayLike) -> NDArray[np.float64]:
        idx = np.asarray(indices, dtype=np.intp)
        return self.matrix[np.ix_(idx, idx)]

    def restrict(self, indices: ArrayLike) -> Kernel:
        """Kernel on the items ``indices`` (in the given order)."""
        return Kernel._trusted(self.submatrix(check_indices(indices, self.n)))


def check_indices(indices: Iterable[int] | ArrayLike, n: int) -> NDArray[np.intp]:
    idx = np.asarray(list(indices) if not isinstance(indices, np.ndarray) else indices)
    if idx.size == 0:
        return np.zeros(0, dtype=np.intp)
    if idx.ndim != 1 or not np.issubdtype(idx.dtype, np.integer):
        raise InputError("index set must be a flat sequence of integers")
    idx = idx.astype(np.intp)
    if idx.min() < 0 or idx.max() >= n:
        raise InputError(f"index out of range for {n} items: {idx.tolist()}")
    if np.unique(idx).size != idx.size:
        raise InputError(f"index set has repeated entries: {idx.tolist()}")
    return idx


def build_gram_kernel(features: FeatureMatrix, normalize: Normalization = "l2") -> Kernel:
    """Dot-product kernel of the (optionally normalized) feature rows."""
    rows = features.normalized(normalize)
    return Kernel(rows @ rows.T)


def logdet_psd(block: NDArray[np.float64]) -> float:
    """Log-determinant of a PSD block by pivoted Cholesky.

    Returns ``-inf`` once the largest remaining Schur-complement pivot falls
    to ``1e-12`` times the block's largest diagonal entry or below.
    """
    k = block.shape[0]
    if k == 0:
        return 0.0
    top = block.diagonal().max()
    if not top > 0:
        return SINGULAR
    c, _, rank, info = dpstrf(block, tol=PIVOT_RTOL * top)
    if info != 0 or rank < k:
        return SINGULAR
    return 2.0 * float(np.log(c.diagonal()).sum())


def log_det_submatrix(kernel: Kernel, subset: Iterable[int] | ArrayLike) -> float:
    """``ln det K[S, S]``; 0 for the empty set, ``-inf`` when singular."""
    idx = check_indices(subset, kernel.n)
    return logdet_psd(kernel.matrix[np.ix_(idx, idx)])


@dataclass(frozen=True, eq=False)
class KernelSpectrum:
    """Eigendecomposition ``K = V diag(lambda) V^T`` with eigenvalues descending."""

    eigenvalues: NDArray[np.float64]
    eigenvectors: NDArray[np.float64]

    @property
    def n(self) -> int:
        return self.eigenvalues.shape[0]

    @property
    def rank(self) -> int:
        return int(np.count_nonzero(self.eigenvalues))

    def reconstruct(self) -> NDArray[np.float64]:
        v = self.eigenvectors
        return (v * self.eigenvalues) @ v.T


def spectral_decompose(kernel: Kernel) -> KernelSpectrum:
    """Eigendecomposition with eigenvalues below ``1e-12 * max`` clamped to 0."""
    vals, vecs = np.linalg.eigh(kernel.matrix)
    order = np.argsort(vals)[::-1]
    vals, vecs = vals[order], vecs[:, order]
    top = vals[0] if vals.size else 0.0
    vals = np.where(vals < EIGEN_CLAMP_RTOL * top, 0.0, vals)
    return KernelSpectrum(_readonly(vals), _readonly(vecs))
