"""Exact subset distributions by brute-force enumeration, for validating samplers."""

from __future__ import annotations

import itertools
import math
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Mapping

import numpy as np
from numpy.typing import ArrayLike

from fairdpp.errors import EnumerationTooLargeError, InputError
from fairdpp.kernel import Kernel
from fairdpp.partitions import QuotaConstraint

ENUMERATION_CAP = 10**6

SubsetKey = tuple[int, ...]


@dataclass(frozen=True)
class SubsetDistribution:
    """Finite distribution over subsets keyed by sorted index tuples."""

    probabilities: Mapping[SubsetKey, float]

    def __post_init__(self) -> None:
        probs = dict(self.probabilities)
        if any(p < 0 for p in probs.values()):
            raise InputError("negative probability in subset distribution")
        total = math.fsum(probs.values())
        if abs(total - 1.0) > 1e-12:
            raise InputError(f"probabilities sum to {total!r}, not 1")
        object.__setattr__(self, "probabilities", probs)

    @property
    def support(self) -> list[SubsetKey]:
        return [s for s, p in self.probabilities.items() if p > 0]

    def __getitem__(self, subset: Iterable[int]) -> float:
        return self.probabilities.get(subset_key(subset), 0.0)

    def marginals(self, n: int) -> np.ndarray:
        """Inclusion probability of every item."""
        out = np.zeros(n)
        for s, p in self.probabilities.items():
            out[list(s)] += p
        return out


def subset_key(subset: Iterable[int] | ArrayLike) -> SubsetKey:
    return tuple(sorted(int(x) for x in np.asarray(subset).ravel()))


def _det(kernel: Kernel, subset: SubsetKey) -> float:
    # Plain LU determinant keeps the oracle off the Cholesky path it checks.
    if not subset:
        return 1.0
    return max(float(np.linalg.det(kernel.submatrix(list(subset)))), 0.0)


def _normalized(weights: dict[SubsetKey, float]) -> SubsetDistribution:
    total = math.fsum(weights.values())
    if total <= 0:
        raise InputError("every enumerated subset has zero determinant")
    probs = {s: w / total for s, w in weights.items()}
    # Renormalize once more so the fsum check sees 1 to rounding.
    total = math.fsum(probs.values())
    return SubsetDistribution({s: p / total for s, p in probs.items()})


def _check_size(count: int) -> None:
    if count > ENUMERATION_CAP:
        raise EnumerationTooLargeError(f"{count} subsets exceed the enumeration cap {ENUMERATION_CAP}")


def _quota_count(quota: QuotaConstraint) -> int:
    sizes = quota.dimension.part_sizes()
    return math.prod(math.comb(int(s), q) for s, q in zip(sizes, quota.quotas))


def enumerate_kdpp(kernel: Kernel, k: int) -> SubsetDistribution:
    _check_size(math.comb(kernel.n, k))
    return _normalized({s: _det(kernel, s) for s in itertools.combinations(range(kernel.n), k)})


def _quota_subsets(quota: QuotaConstraint):
    dim = quota.dimension
    blocks = [list(itertools.combinations(dim.members(p).tolist(), q))
              for p, q in enumerate(quota.quotas)]
    for combo in itertools.product(*blocks):
        yield tuple(sorted(itertools.chain.from_iterable(combo))), combo


def enumerate_pdpp(kernel: Kernel, quota: QuotaConstraint) -> SubsetDistribution:
    _check_size(_quota_count(quota))
    return _normalized({s: _det(kernel, s) for s, _ in _quota_subsets(quota)})


def enumerate_kidpp(kernel: Kernel, quota: QuotaConstraint) -> SubsetDistribution:
    """Product of independent per-part k_i-DPPs, each normalized on its own block."""
    _check_size(_quota_count(quota))
    dim = quota.dimension
    per_part = []
    for part, q in enumerate(quota.quotas):
        blocks = list(itertools.combinations(dim.members(part).tolist(), q))
        dets = {b: _det(kernel, b) for b in blocks}
        z = math.fsum(dets.values())
        if z <= 0:
            raise InputError(f"part {part}: every size-{q} block has zero determinant")
        per_part.append({b: d / z for b, d in dets.items()})
    probs = {}
    for s, combo in _quota_subsets(quota):
        probs[s] = math.prod(per_part[p][b] for p, b in enumerate(combo))
    return _normalized(probs)


def tv_distance(a: SubsetDistribution, b: SubsetDistribution) -> float:
    keys = set(a.probabilities) | set(b.probabilities)
    return 0.5 * math.fsum(abs(a.probabilities.get(s, 0.0) - b.probabilities.get(s, 0.0)) for s in keys)


def empirical_distribution(samples: Iterable[Iterable[int] | ArrayLike]) -> SubsetDistribution:
    counts = Counter(subset_key(s) for s in samples)
    if not counts:
        raise InputError("empirical distribution of an empty sample list")
    total = sum(counts.values())
    return _normalized({s: c / total for s, c in counts.items()})
