"""Generator determinism, unbiased bounded draws, Fisher-Yates uniformity."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from xit.rng import MASK64, Rng, fisher_yates


def test_same_seed_same_stream():
    a, b = Rng(0), Rng(0)
    assert [a.u64() for _ in range(100)] == [b.u64() for _ in range(100)]


def test_different_seeds_differ():
    a = [Rng(1).u64() for _ in range(1)][0]
    assert [Rng(1).u64_block(100).tolist()] != [Rng(2).u64_block(100).tolist()]
    assert a == Rng(1).u64()


@pytest.mark.parametrize("seed", [0, 1, 2, 42, 7_000_000_000, MASK64, 123456789])
def test_block_matches_scalar(seed):
    scalar = Rng(seed)
    values = [scalar.u64() for _ in range(257)]
    assert Rng(seed).u64_block(257).tolist() == values


def test_determinism_many_seeds_many_draws():
    # invariant: ten seeds, 10k draws each, two instantiations agree
    for seed in range(10):
        assert np.array_equal(Rng(seed).u64_block(10_000), Rng(seed).u64_block(10_000))


def test_unit_floats_in_range_and_match_scalar():
    rng = Rng(9)
    floats = rng.unit_floats(10_000)
    assert floats.min() >= 0.0 and floats.max() < 1.0
    scalar = Rng(9)
    assert [scalar.unit_float() for _ in range(5)] == floats[:5].tolist()


def test_below_rejects_bad_bounds():
    with pytest.raises(ValueError):
        Rng(0).below(0)


def test_below_range_and_coverage():
    rng = Rng(5)
    draws = [rng.below(10) for _ in range(2000)]
    assert set(draws) == set(range(10))


def test_below_one_consumes_nothing():
    rng = Rng(3)
    assert rng.below(1) == 0
    assert rng.counter == 0


def test_permutation_matches_naive_below_loop():
    # the buffered permutation must consume the exact same draw sequence
    def naive(n, seed):
        rng = Rng(seed)
        idx = list(range(n))
        for i in range(n - 1, 0, -1):
            j = rng.below(i + 1)
            idx[i], idx[j] = idx[j], idx[i]
        return idx, rng.counter

    for n in (0, 1, 2, 3, 5, 8, 9, 64, 65, 1000):
        for seed in (0, 1, 99):
            expected, consumed = naive(n, seed)
            rng = Rng(seed)
            assert rng.permutation(n) == expected, (n, seed)
            assert rng.counter == consumed, (n, seed)


def test_fisher_yates_trivial_cases():
    assert fisher_yates([], Rng(0)) == []
    assert fisher_yates([7], Rng(0)) == [7]


def test_fisher_yates_repeatable():
    items = list(range(10))
    assert fisher_yates(items, Rng(42)) == fisher_yates(items, Rng(42))


@settings(max_examples=60, deadline=None)
@given(st.lists(st.integers(-50, 50), max_size=40), st.integers(0, 2**32))
def test_fisher_yates_multiset(items, seed):
    assert sorted(fisher_yates(items, Rng(seed))) == sorted(items)


def test_fisher_yates_uniform_over_24_permutations():
    # 24 000 seeded shuffles of [1,2,3,4]: each of the 24 orderings within
    # 3 sigma of Binomial(24000, 1/24), and a sane chi-square
    counts = {}
    trials = 24_000
    rng = Rng(2024)
    for _ in range(trials):
        key = tuple(fisher_yates([1, 2, 3, 4], rng))
        counts[key] = counts.get(key, 0) + 1
    assert len(counts) == 24
    expected = trials / 24
    sigma = (trials * (1 / 24) * (23 / 24)) ** 0.5
    for key, count in counts.items():
        assert abs(count - expected) <= 3 * sigma, (key, count)
    chi2 = sum((c - expected) ** 2 / expected for c in counts.values())
    assert chi2 < 49.73  # chi-square 0.999 critical value at 23 df
