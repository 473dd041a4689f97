"""Subset samplers: UNIF, exact k-DPP, k_i-DPP and the quota-constrained swap chain.

Subsets are sorted ``numpy`` arrays of 0-based item indices.  Every sampler
takes an explicit :class:`numpy.random.Generator`; nothing touches global
random state.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, replace

import numpy as np
from numpy.typing import ArrayLike, NDArray

from fairdpp.errors import DegenerateKernelError, InputError, InsufficientRankError
from fairdpp.kernel import (
    PIVOT_RTOL,
    SINGULAR,
    Kernel,
    KernelSpectrum,
    logdet_psd,
    spectral_decompose,
)
from fairdpp.partitions import LabelDimension, QuotaConstraint, check_quota

BURN_IN_FACTOR = 20
_DRAW_BLOCK = 1 << 14


def sample_uniform(n: int, k: int, rng: np.random.Generator) -> NDArray[np.intp]:
    if not 0 <= k <= n:
        raise InputError(f"cannot draw {k} items out of {n}")
    return np.sort(rng.choice(n, size=k, replace=False)).astype(np.intp)


def elementary_symmetric(eigenvalues: ArrayLike, k: int) -> NDArray[np.float64]:
    """Table ``E[j, m] = e_j(lambda_1, ..., lambda_m)`` for ``j <= k``, ``m <= n``."""
    lam = np.asarray(eigenvalues, dtype=float)
    n = lam.shape[0]
    table = np.zeros((k + 1, n + 1))
    table[0, :] = 1.0
    for m in range(1, n + 1):
        table[1:, m] = table[1:, m - 1] + lam[m - 1] * table[:-1, m - 1]
    return table


def _select_eigenvectors(eigenvalues: NDArray, k: int, rng: np.random.Generator) -> list[int]:
    nonzero = eigenvalues[eigenvalues > 0]
    # Inclusion ratios are scale free; rescaling keeps e_k in floating range.
    lam = eigenvalues / nonzero.mean()
    table = elementary_symmetric(lam, k)
    chosen = []
    remaining = k
    for m in range(lam.shape[0], 0, -1):
        if remaining == 0:
            break
        if m == remaining:
            marginal = 1.0
        else:
            marginal = lam[m - 1] * table[remaining - 1, m - 1] / table[remaining, m]
        if rng.random() < marginal:
            chosen.append(m - 1)
            remaining -= 1
    return chosen


def _sample_projection(vectors: NDArray, rng: np.random.Generator) -> list[int]:
    """Draw ``r`` items from the projection DPP spanned by ``r`` orthonormal columns."""
    v = np.array(vectors)
    picked: list[int] = []
    while v.shape[1]:
        weights = np.einsum("ij,ij->i", v, v)
        weights[picked] = 0.0
        np.clip(weights, 0.0, None, out=weights)
        cdf = np.cumsum(weights)
        item = int(np.searchsorted(cdf, rng.random() * cdf[-1], side="right"))
        item = min(item, v.shape[0] - 1)
        picked.append(item)
        pivot = int(np.argmax(np.abs(v[item])))
        col = v[:, pivot]
        v = np.delete(v, pivot, axis=1)
        if v.shape[1]:
            v = v - np.outer(col / col[item], v[item])
            v, _ = np.linalg.qr(v)
    return picked


def sample_kdpp_exact(spectrum: KernelSpectrum, k: int, rng: np.random.Generator) -> NDArray[np.intp]:
    """Exact k-DPP draw: eigenvector selection by elementary symmetric ratios, then projection sampling."""
    if k < 0 or k > spectrum.n:
        raise InputError(f"cannot draw {k} items out of {spectrum.n}")
    if spectrum.rank < k:
        raise InsufficientRankError(f"kernel rank {spectrum.rank} is below k={k}")
    if k == 0:
        return np.zeros(0, dtype=np.intp)
    chosen = _select_eigenvectors(spectrum.eigenvalues, k, rng)
    items = _sample_projection(spectrum.eigenvectors[:, chosen], rng)
    return np.sort(np.asarray(items, dtype=np.intp))


def part_spectra(kernel: Kernel, dimension: LabelDimension) -> dict[int, KernelSpectrum]:
    """Spectrum of every part's diagonal kernel block, for repeated k_i-DPP draws."""
    return {part: spectral_decompose(kernel.restrict(dimension.members(part)))
            for part in range(dimension.p) if dimension.members(part).size}


def sample_kidpp(
    kernel: Kernel,
    quota: QuotaConstraint,
    rng: np.random.Generator,
    spectra: dict[int, KernelSpectrum] | None = None,
) -> NDArray[np.intp]:
    """Union of independent exact k_i-DPP draws, one per part's kernel block."""
    dim = quota.dimension
    out = []
    for part, k_part in enumerate(quota.quotas):
        if k_part == 0:
            continue
        members = dim.members(part)
        spectrum = spectra[part] if spectra is not None else spectral_decompose(kernel.restrict(members))
        if spectrum.rank < k_part:
            raise InsufficientRankError(
                f"part {part} of {dim.name!r}: block rank {spectrum.rank} is below quota {k_part}"
            )
        out.append(members[sample_kdpp_exact(spectrum, k_part, rng)])
    if not out:
        return np.zeros(0, dtype=np.intp)
    return np.sort(np.concatenate(out))


def greedy_warm_start(kernel: Kernel, quota: QuotaConstraint) -> NDArray[np.intp]:
    """Greedy log-determinant maximization under the part quotas.

    Each step adds the admissible item with the largest Schur-complement
    diagonal, i.e. the largest incremental log-determinant; ties go to the
    lowest index.  Singular steps fall through to the same rule.
    """
    if quota.dimension.n != kernel.n:
        raise InputError(f"quota covers {quota.dimension.n} items, kernel has {kernel.n}")
    k_total = quota.k
    labels = quota.dimension.labels
    mat = kernel.matrix
    remaining = np.asarray(quota.quotas)
    residual = mat.diagonal().copy()
    floor = PIVOT_RTOL * max(residual.max(initial=0.0), 0.0)
    factors = np.zeros((k_total, kernel.n))
    taken = np.zeros(kernel.n, dtype=bool)
    picked = []
    for step in range(k_total):
        candidates = np.flatnonzero(~taken & (remaining[labels] > 0))
        best = int(candidates[np.argmax(residual[candidates])])
        if residual[best] > floor:
            row = (mat[best] - factors[:step, best] @ factors[:step]) / math.sqrt(residual[best])
            factors[step] = row
            residual = residual - row**2
        taken[best] = True
        remaining[labels[best]] -= 1
        picked.append(best)
    return np.sort(np.asarray(picked, dtype=np.intp))


@dataclass(frozen=True, eq=False)
class ChainState:
    """A state of the swap chain with its cached log-determinant."""

    current: NDArray[np.intp]
    logdet: float
    step_count: int = 0


def init_chain(kernel: Kernel, quota: QuotaConstraint) -> ChainState:
    start = greedy_warm_start(kernel, quota)
    return ChainState(start, logdet_psd(kernel.submatrix(start)), 0)


def acceptance_probability(logdet_current: float, logdet_proposal: float) -> float:
    """Lazy Metropolis acceptance ``0.5 * min(1, det_T / det_S)`` in log space.

    From a singular state every proposal is taken with probability 1/2 so a
    degenerate warm start can still move.
    """
    if logdet_current == SINGULAR:
        return 0.5
    if logdet_proposal == SINGULAR:
        return 0.0
    return 0.5 * math.exp(min(0.0, logdet_proposal - logdet_current))


def mcmc_step(
    state: ChainState, kernel: Kernel, quota: QuotaConstraint, rng: np.random.Generator
) -> ChainState:
    """One swap proposal: remove a uniform ``i in S``, add a uniform ``j not in S``."""
    current = state.current
    k, n = current.size, kernel.n
    if k == 0 or k == n:
        return replace(state, step_count=state.step_count + 1)
    outside = np.setdiff1d(np.arange(n), current, assume_unique=True)
    i = current[rng.integers(k)]
    j = outside[rng.integers(n - k)]
    u = rng.random()
    labels = quota.dimension.labels
    if labels[i] != labels[j]:
        return replace(state, step_count=state.step_count + 1)
    proposal = np.sort(np.append(current[current != i], j))
    logdet = logdet_psd(kernel.submatrix(proposal))
    if u < acceptance_probability(state.logdet, logdet):
        return ChainState(proposal, logdet, state.step_count + 1)
    return replace(state, step_count=state.step_count + 1)


def run_chain(
    state: ChainState,
    kernel: Kernel,
    quota: QuotaConstraint,
    iterations: int,
    rng: np.random.Generator,
) -> ChainState:
    """Advance the chain ``iterations`` steps; same transition rule as :func:`mcmc_step`."""
    k, n = state.current.size, kernel.n
    if k == 0 or k == n or iterations <= 0:
        return replace(state, step_count=state.step_count + max(iterations, 0))
    mat = kernel.matrix
    labels = quota.dimension.labels
    inside = state.current.copy()
    outside = np.setdiff1d(np.arange(n), inside, assume_unique=True)
    logdet = state.logdet
    done = 0
    while done < iterations:
        block = min(_DRAW_BLOCK, iterations - done)
        pos_in = rng.integers(k, size=block)
        pos_out = rng.integers(n - k, size=block)
        coins = rng.random(block)
        for a, b, u in zip(pos_in.tolist(), pos_out.tolist(), coins.tolist()):
            i, j = inside[a], outside[b]
            if labels[i] != labels[j]:
                continue
            inside[a] = j
            proposed = logdet_psd(mat[np.ix_(inside, inside)])
            if u < acceptance_probability(logdet, proposed):
                outside[b] = i
                logdet = proposed
            else:
                inside[a] = i
        done += block
    return ChainState(np.sort(inside), logdet, state.step_count + iterations)


def default_iterations(n: int, k: int) -> int:
    """Burn-in budget ``20 k (n - k)`` per independent draw."""
    return BURN_IN_FACTOR * k * (n - k)


def sample_pdpp_mcmc(
    kernel: Kernel,
    quota: QuotaConstraint,
    rng: np.random.Generator,
    iterations: int | None = None,
) -> NDArray[np.intp]:
    """Approximate P-DPP draw: greedy warm start followed by the swap chain."""
    if iterations is None:
        iterations = default_iterations(kernel.n, quota.k)
    state = run_chain(init_chain(kernel, quota), kernel, quota, iterations, rng)
    if state.logdet == SINGULAR and quota.k:
        raise DegenerateKernelError(
            f"degenerate kernel under quotas {quota.quotas}: chain stayed on singular subsets"
        )
    return state.current


def sample_kdpp_mcmc(
    kernel: Kernel, k: int, rng: np.random.Generator, iterations: int | None = None
) -> NDArray[np.intp]:
    """Unconstrained swap-chain k-DPP draw, the MCMC counterpart of :func:`sample_kdpp_exact`."""
    return sample_pdpp_mcmc(kernel, QuotaConstraint.unconstrained(kernel.n, k), rng, iterations)


def _batched_logdet(blocks: NDArray) -> NDArray[np.float64]:
    sign, logdet = np.linalg.slogdet(blocks)
    return np.where(sign > 0, logdet, SINGULAR)


def sample_pdpp_mcmc_batch(
    kernel: Kernel,
    quota: QuotaConstraint,
    n_samples: int,
    rng: np.random.Generator,
    iterations: int | None = None,
) -> NDArray[np.intp]:
    """``n_samples`` independent chains advanced in lockstep; rows are sorted subsets.

    Intended for oracle comparisons with many short chains.  Uses batched
    ``slogdet`` instead of pivoted Cholesky, so near-singular proposals are
    judged by sign only.
    """
    if iterations is None:
        iterations = default_iterations(kernel.n, quota.k)
    start = greedy_warm_start(kernel, quota)
    k, n = start.size, kernel.n
    inside = np.tile(start, (n_samples, 1))
    if k == 0 or k == n:
        return inside
    outside = np.tile(np.setdiff1d(np.arange(n), start), (n_samples, 1))
    mat = kernel.matrix
    labels = quota.dimension.labels
    logdet = np.full(n_samples, logdet_psd(kernel.submatrix(start)))
    rows = np.arange(n_samples)
    for _ in range(iterations):
        pos_in = rng.integers(k, size=n_samples)
        pos_out = rng.integers(n - k, size=n_samples)
        coins = rng.random(n_samples)
        i = inside[rows, pos_in]
        j = outside[rows, pos_out]
        live = np.flatnonzero(labels[i] == labels[j])
        if live.size == 0:
            continue
        proposal = inside[live].copy()
        proposal[np.arange(live.size), pos_in[live]] = j[live]
        proposed = _batched_logdet(mat[proposal[:, :, None], proposal[:, None, :]])
        current = logdet[live]
        with np.errstate(invalid="ignore"):
            ratio = np.exp(np.minimum(0.0, proposed - current))
        accept_p = np.where(current == SINGULAR, 0.5,
                            np.where(proposed == SINGULAR, 0.0, 0.5 * ratio))
        move = live[coins[live] < accept_p]
        inside[move, pos_in[move]] = j[move]
        outside[move, pos_out[move]] = i[move]
        logdet[move] = proposed[coins[live] < accept_p]
    return np.sort(inside, axis=1)


def feasible_subsets(quota: QuotaConstraint):
    """Yield every quota-satisfying subset as a sorted tuple."""
    dim = quota.dimension
    per_part = [itertools.combinations(dim.members(p).tolist(), q)
                for p, q in enumerate(quota.quotas)]
    for combo in itertools.product(*(list(c) for c in per_part)):
        yield tuple(sorted(itertools.chain.from_iterable(combo)))


def swap_transition_matrix(
    kernel: Kernel, quota: QuotaConstraint
) -> tuple[list[tuple[int, ...]], NDArray[np.float64]]:
    """Exact one-step transition matrix of the swap chain over feasible subsets."""
    states = list(feasible_subsets(quota))
    index = {s: a for a, s in enumerate(states)}
    logdets = [logdet_psd(kernel.submatrix(list(s))) for s in states]
    n, k = kernel.n, quota.k
    labels = quota.dimension.labels
    trans = np.zeros((len(states), len(states)))
    if k == 0 or k == n:
        np.fill_diagonal(trans, 1.0)
        return states, trans
    per_pair = 1.0 / (k * (n - k))
    for a, s in enumerate(states):
        members = set(s)
        for i in s:
            for j in range(n):
                if j in members or labels[i] != labels[j]:
                    continue
                t = tuple(sorted((members - {i}) | {j}))
                b = index[t]
                trans[a, b] += per_pair * acceptance_probability(logdets[a], logdets[b])
        trans[a, a] += 1.0 - trans[a].sum()
    return states, trans

