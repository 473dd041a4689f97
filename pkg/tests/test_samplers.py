import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fairdpp.errors import InputError, InsufficientRankError
from fairdpp.kernel import FeatureMatrix, Kernel, build_gram_kernel, is_singular, logdet_psd, spectral_decompose
from fairdpp.oracle import empirical_distribution, enumerate_kdpp, enumerate_kidpp, enumerate_pdpp, tv_distance
from fairdpp.partitions import LabelDimension, QuotaConstraint, check_quota
from fairdpp.samplers import (
    ChainState,
    acceptance_probability,
    default_iterations,
    elementary_symmetric,
    greedy_warm_start,
    init_chain,
    mcmc_step,
    run_chain,
    sample_kdpp_exact,
    sample_kdpp_mcmc,
    sample_kidpp,
    sample_pdpp_mcmc,
    sample_pdpp_mcmc_batch,
    sample_uniform,
    swap_transition_matrix,
)


def random_kernel(rng, n, d=None):
    return build_gram_kernel(FeatureMatrix(rng.random((n, d or n))))


def halves(n):
    return LabelDimension("half", np.repeat([0, 1], [n // 2, n - n // 2]), 2)


def test_uniform_frequencies():
    rng = np.random.default_rng(0)
    counts = np.zeros(10)
    draws = 60000
    for _ in range(draws):
        s = sample_uniform(10, 3, rng)
        assert len(set(s.tolist())) == 3
        counts[s] += 1
    np.testing.assert_allclose(counts / draws, 0.3, atol=0.005)


def test_uniform_rejects_bad_k():
    with pytest.raises(InputError):
        sample_uniform(3, 4, np.random.default_rng(0))


def test_elementary_symmetric_small_cases():
    table = elementary_symmetric([1.0, 2.0, 3.0], 3)
    assert table[:, 3].tolist() == [1.0, 6.0, 11.0, 6.0]
    assert table[2, 2] == 2.0
    assert table[3, 2] == 0.0


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(0.0, 5.0), min_size=1, max_size=7))
def test_elementary_symmetric_matches_subset_sums(lam):
    k = len(lam)
    table = elementary_symmetric(lam, k)
    for j in range(k + 1):
        brute = math.fsum(math.prod(c) for c in itertools.combinations(lam, j))
        assert table[j, -1] == pytest.approx(brute, rel=1e-12, abs=1e-12)


def test_kdpp_exact_identity_is_uniform():
    rng = np.random.default_rng(1)
    spectrum = spectral_decompose(Kernel(np.eye(6)))
    emp = empirical_distribution(sample_kdpp_exact(spectrum, 2, rng) for _ in range(50000))
    assert tv_distance(emp, enumerate_kdpp(Kernel(np.eye(6)), 2)) < 0.02


def test_kdpp_exact_matches_enumeration():
    rng = np.random.default_rng(2)
    kernel = random_kernel(rng, 8, 5)
    spectrum = spectral_decompose(kernel)
    emp = empirical_distribution(sample_kdpp_exact(spectrum, 3, rng) for _ in range(100000))
    assert tv_distance(emp, enumerate_kdpp(kernel, 3)) < 0.02


def test_kdpp_exact_rank_shortfall():
    v = np.array([[1.0, 2.0, 0.5, 1.0]])
    spectrum = spectral_decompose(Kernel(v.T @ v))
    with pytest.raises(InsufficientRankError):
        sample_kdpp_exact(spectrum, 2, np.random.default_rng(0))
    assert sample_kdpp_exact(spectrum, 1, np.random.default_rng(0)).size == 1


def test_kdpp_exact_full_and_empty():
    spectrum = spectral_decompose(Kernel(np.eye(4)))
    rng = np.random.default_rng(0)
    assert sample_kdpp_exact(spectrum, 4, rng).tolist() == [0, 1, 2, 3]
    assert sample_kdpp_exact(spectrum, 0, rng).size == 0


def test_kidpp_single_part_is_kdpp():
    rng = np.random.default_rng(3)
    kernel = random_kernel(rng, 6, 4)
    quota = QuotaConstraint.unconstrained(6, 2)
    emp = empirical_distribution(sample_kidpp(kernel, quota, rng) for _ in range(40000))
    assert tv_distance(emp, enumerate_kdpp(kernel, 2)) < 0.02


def test_kidpp_zero_quota_part_contributes_nothing():
    rng = np.random.default_rng(4)
    kernel = random_kernel(rng, 6)
    quota = QuotaConstraint(halves(6), (0, 2))
    for _ in range(50):
        assert set(sample_kidpp(kernel, quota, rng).tolist()) <= {3, 4, 5}


def test_kidpp_factorizes_over_parts():
    rng = np.random.default_rng(5)
    kernel = random_kernel(rng, 8, 6)
    quota = QuotaConstraint(halves(8), (2, 2))
    emp = empirical_distribution(sample_kidpp(kernel, quota, rng) for _ in range(60000))
    assert tv_distance(emp, enumerate_kidpp(kernel, quota)) < 0.03


def test_kidpp_rank_error_names_part():
    x = np.array([[1.0, 0.0], [2.0, 0.0], [0.0, 1.0], [1.0, 1.0]])
    kernel = build_gram_kernel(FeatureMatrix(x))
    with pytest.raises(InsufficientRankError, match="part 0"):
        sample_kidpp(kernel, QuotaConstraint(halves(4), (2, 0)), np.random.default_rng(0))


def test_greedy_identity_takes_lowest_indices():
    quota = QuotaConstraint(halves(6), (2, 1))
    assert greedy_warm_start(Kernel(np.eye(6)), quota).tolist() == [0, 1, 3]


def test_greedy_on_known_kernel_is_at_least_feasible_median():
    x = np.array([
        [2.0, 0.1, 0.3], [1.5, 1.4, 0.0], [0.2, 0.3, 1.0],
        [0.1, 2.2, 0.4], [1.0, 1.0, 1.0], [0.3, 0.2, 1.8],
    ])
    kernel = build_gram_kernel(FeatureMatrix(x), "none")
    quota = QuotaConstraint(halves(6), (1, 1))
    chosen = greedy_warm_start(kernel, quota)
    assert check_quota(chosen, quota)
    dets = [np.linalg.det(kernel.submatrix([a, b])) for a in range(3) for b in range(3, 6)]
    greedy = math.exp(logdet_psd(kernel.submatrix(chosen)))
    assert min(dets) <= greedy <= max(dets) + 1e-12
    assert greedy >= np.median(dets)


def test_greedy_rejects_mismatched_sizes():
    with pytest.raises(InputError):
        greedy_warm_start(Kernel(np.eye(4)), QuotaConstraint(halves(6), (1, 1)))


def test_cross_part_proposals_are_rejected():
    kernel = Kernel(np.eye(4))
    dim = LabelDimension("d", np.array([0, 1, 2, 3]), 4)
    quota = QuotaConstraint(dim, (1, 1, 0, 0))
    state = init_chain(kernel, quota)
    rng = np.random.default_rng(0)
    for _ in range(200):
        state = mcmc_step(state, kernel, quota, rng)
        assert state.current.tolist() == [0, 1]
    assert state.step_count == 200


def test_acceptance_rule():
    assert acceptance_probability(0.0, 0.0) == 0.5
    assert acceptance_probability(-1.0, 3.0) == 0.5
    assert acceptance_probability(0.0, math.log(0.3)) == pytest.approx(0.15)
    assert acceptance_probability(0.0, -math.inf) == 0.0
    assert acceptance_probability(-math.inf, -math.inf) == 0.5


def test_identity_kernel_accepts_half_of_feasible_swaps():
    kernel = Kernel(np.eye(8))
    quota = QuotaConstraint.unconstrained(8, 3)
    state = init_chain(kernel, quota)
    rng = np.random.default_rng(7)
    moves = 0
    steps = 20000
    for _ in range(steps):
        new = mcmc_step(state, kernel, quota, rng)
        moves += not np.array_equal(new.current, state.current)
        state = new
    assert moves / steps == pytest.approx(0.5, abs=0.015)


def test_duplicate_item_swap_never_accepted():
    x = np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [1.0, 0.0, 0.0]])
    kernel = build_gram_kernel(FeatureMatrix(x))
    quota = QuotaConstraint.unconstrained(3, 2)
    state = ChainState(np.array([0, 1]), logdet_psd(kernel.submatrix([0, 1])))
    rng = np.random.default_rng(0)
    for _ in range(500):
        state = mcmc_step(state, kernel, quota, rng)
        assert not is_singular(state.logdet)
        assert state.current.tolist() in ([0, 1], [1, 2])


def test_pdpp_matches_enumeration():
    rng = np.random.default_rng(8)
    kernel = random_kernel(rng, 8, 6)
    quota = QuotaConstraint(halves(8), (2, 1))
    emp = empirical_distribution(sample_pdpp_mcmc(kernel, quota, rng) for _ in range(4000))
    assert tv_distance(emp, enumerate_pdpp(kernel, quota)) < 0.05


def test_batch_chain_matches_enumeration():
    rng = np.random.default_rng(9)
    kernel = random_kernel(rng, 8, 6)
    quota = QuotaConstraint(halves(8), (2, 1))
    samples = sample_pdpp_mcmc_batch(kernel, quota, 20000, rng)
    assert all(check_quota(s, quota) for s in samples[:500])
    assert tv_distance(empirical_distribution(samples), enumerate_pdpp(kernel, quota)) < 0.03


def test_kdpp_mcmc_matches_enumeration():
    rng = np.random.default_rng(10)
    kernel = random_kernel(rng, 7, 5)
    emp = empirical_distribution(sample_kdpp_mcmc(kernel, 2, rng) for _ in range(4000))
    assert tv_distance(emp, enumerate_kdpp(kernel, 2)) < 0.05


def test_full_quota_has_a_single_state():
    kernel = random_kernel(np.random.default_rng(0), 4)
    quota = QuotaConstraint(halves(4), (2, 2))
    assert sample_pdpp_mcmc(kernel, quota, np.random.default_rng(0)).tolist() == [0, 1, 2, 3]


def test_chain_logdet_does_not_drift():
    rng = np.random.default_rng(11)
    kernel = random_kernel(rng, 30, 20)
    quota = QuotaConstraint.balanced(halves(30), 10)
    state = run_chain(init_chain(kernel, quota), kernel, quota, 100000, rng)
    assert state.step_count == 100000
    assert abs(state.logdet - logdet_psd(kernel.submatrix(state.current))) <= 1e-6


def test_detailed_balance_against_enumeration():
    rng = np.random.default_rng(12)
    kernel = random_kernel(rng, 6, 4)
    quota = QuotaConstraint(halves(6), (2, 1))
    states, trans = swap_transition_matrix(kernel, quota)
    np.testing.assert_allclose(trans.sum(axis=1), 1.0, atol=1e-12)
    target = enumerate_pdpp(kernel, quota)
    pi = np.array([target[s] for s in states])
    flow = pi[:, None] * trans
    np.testing.assert_allclose(flow, flow.T, atol=1e-10)
    np.testing.assert_allclose(pi @ trans, pi, atol=1e-10)


def test_same_seed_same_draws():
    kernel = random_kernel(np.random.default_rng(13), 12, 8)
    quota = QuotaConstraint.balanced(halves(12), 4)
    a = [sample_pdpp_mcmc(kernel, quota, np.random.default_rng(5)).tolist() for _ in range(3)]
    b = [sample_pdpp_mcmc(kernel, quota, np.random.default_rng(5)).tolist() for _ in range(3)]
    assert a == b


def test_step_and_block_runner_agree_in_distribution():
    # run_chain pre-draws proposals in blocks, so paths differ from mcmc_step;
    # both must target the same distribution.
    rng = np.random.default_rng(14)
    kernel = random_kernel(rng, 6, 5)
    quota = QuotaConstraint(halves(6), (1, 1))
    target = enumerate_pdpp(kernel, quota)
    state = init_chain(kernel, quota)
    visits = []
    for _ in range(60000):
        state = mcmc_step(state, kernel, quota, rng)
        visits.append(state.current)
    assert tv_distance(empirical_distribution(visits), target) < 0.03
    assert default_iterations(6, 2) == 20 * 2 * 4
