"""Label dimensions, quota constraints and the per-subset diversity metrics."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray

from fairdpp.errors import InfeasibleQuotaError, InputError
from fairdpp.kernel import Kernel, log_det_submatrix


@dataclass(frozen=True, eq=False)
class LabelDimension:
    """A categorical attribute partitioning the items into ``p`` parts.

    ``labels[x]`` is the 0-based part id of item ``x``.  ``part_names`` is
    optional and only used for reporting.
    """

    name: str
    labels: NDArray[np.intp]
    p: int
    part_names: tuple[str, ...] = field(default=())

    def __post_init__(self) -> None:
        labels = np.asarray(self.labels)
        if labels.ndim != 1:
            raise InputError(f"labels of {self.name!r} must be one-dimensional")
        if self.p < 1:
            raise InputError(f"dimension {self.name!r} needs p >= 1, got {self.p}")
        if labels.size and not np.issubdtype(labels.dtype, np.integer):
            raise InputError(f"labels of {self.name!r} must be integer part ids")
        labels = labels.astype(np.intp)
        if labels.size and (labels.min() < 0 or labels.max() >= self.p):
            raise InputError(f"labels of {self.name!r} must lie in 0..{self.p - 1}")
        if self.part_names and len(self.part_names) != self.p:
            raise InputError(f"{self.name!r}: {len(self.part_names)} part names for p={self.p}")
        labels.flags.writeable = False
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "part_names", tuple(self.part_names))

    @classmethod
    def from_values(cls, name: str, values: Sequence) -> LabelDimension:
        """Map arbitrary hashable values to part ids in order of first appearance."""
        ids: dict = {}
        labels = [ids.setdefault(v, len(ids)) for v in values]
        return cls(name, np.asarray(labels, dtype=np.intp), max(len(ids), 1),
                   tuple(str(v) for v in ids))

    @property
    def n(self) -> int:
        return self.labels.shape[0]

    def part_sizes(self) -> NDArray[np.intp]:
        return np.bincount(self.labels, minlength=self.p)

    def members(self, part: int) -> NDArray[np.intp]:
        return np.flatnonzero(self.labels == part)

    def counts(self, subset: ArrayLike) -> NDArray[np.intp]:
        """Number of items of each part inside ``subset``."""
        idx = np.asarray(subset, dtype=np.intp)
        return np.bincount(self.labels[idx], minlength=self.p)

    def take(self, indices: ArrayLike) -> LabelDimension:
        """The same dimension restricted to ``indices`` (part ids unchanged)."""
        return LabelDimension(self.name, self.labels[np.asarray(indices, dtype=np.intp)],
                              self.p, self.part_names)


def product_dimension(a: LabelDimension, b: LabelDimension, name: str | None = None) -> LabelDimension:
    """Cross two dimensions; part ``i * b.p + j`` holds items labelled (i, j)."""
    if a.n != b.n:
        raise InputError(f"cannot cross dimensions of sizes {a.n} and {b.n}")
    names = ()
    if a.part_names and b.part_names:
        names = tuple(f"{x}/{y}" for x in a.part_names for y in b.part_names)
    return LabelDimension(name or f"{a.name}_x_{b.name}", a.labels * b.p + b.labels,
                          a.p * b.p, names)


@dataclass(frozen=True, eq=False)
class QuotaConstraint:
    """Exact per-part counts ``quotas[i] = |S & X_i|`` over one dimension."""

    dimension: LabelDimension
    quotas: tuple[int, ...]

    def __post_init__(self) -> None:
        quotas = tuple(int(q) for q in self.quotas)
        if len(quotas) != self.dimension.p:
            raise InputError(
                f"{len(quotas)} quotas given for dimension {self.dimension.name!r} "
                f"with p={self.dimension.p}"
            )
        if any(q < 0 for q in quotas):
            raise InputError(f"quotas must be nonnegative, got {quotas}")
        sizes = self.dimension.part_sizes()
        for part, (q, size) in enumerate(zip(quotas, sizes)):
            if q > size:
                raise InfeasibleQuotaError(
                    f"quota {q} exceeds the {size} items of part {self._part_label(part)} "
                    f"in dimension {self.dimension.name!r}"
                )
        object.__setattr__(self, "quotas", quotas)

    def _part_label(self, part: int) -> str:
        names = self.dimension.part_names
        return f"{part} ({names[part]})" if names else str(part)

    @property
    def k(self) -> int:
        return sum(self.quotas)

    @classmethod
    def balanced(cls, dimension: LabelDimension, k: int) -> QuotaConstraint:
        """Equal quotas ``k / p`` on every part; ``k`` must be divisible by ``p``."""
        if k % dimension.p:
            raise InputError(f"k={k} cannot be split evenly over {dimension.p} parts")
        return cls(dimension, (k // dimension.p,) * dimension.p)

    @classmethod
    def unconstrained(cls, n: int, k: int) -> QuotaConstraint:
        """A single-part constraint, i.e. plain cardinality ``k``."""
        return cls(LabelDimension("all", np.zeros(n, dtype=np.intp), 1), (k,))


def check_quota(subset: ArrayLike, quota: QuotaConstraint) -> bool:
    counts = quota.dimension.counts(subset)
    return bool(np.array_equal(counts, quota.quotas))


def _proportions(subset: Iterable[int] | ArrayLike, dim: LabelDimension) -> NDArray[np.float64]:
    idx = np.asarray(list(subset) if not isinstance(subset, np.ndarray) else subset, dtype=np.intp)
    if idx.size == 0:
        raise InputError("diversity index is undefined for an empty subset")
    counts = dim.counts(idx)
    return counts[counts > 0] / idx.size


def fairness_entropy(subset: Iterable[int] | ArrayLike, dim: LabelDimension) -> float:
    """Shannon entropy, in bits, of the part proportions of ``subset``."""
    s = _proportions(subset, dim)
    return min(max(0.0, float(-(s * np.log2(s)).sum())), float(np.log2(dim.p)))


def effective_diversity(subset: Iterable[int] | ArrayLike, dim: LabelDimension) -> float:
    """``2 ** fairness_entropy``: the effective number of parts, in ``[1, p]``."""
    return min(float(2.0 ** fairness_entropy(subset, dim)), float(dim.p))


def geometric_diversity(subset: Iterable[int] | ArrayLike, kernel: Kernel) -> float:
    """``ln det K[S, S]`` (``-inf`` when the submatrix is singular)."""
    return log_det_submatrix(kernel, subset)

