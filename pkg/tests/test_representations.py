import itertools
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from covergap import representations as reps
from covergap.free_group import mul, reduce_word

words = st.lists(st.sampled_from([1, -1, 2, -2]), max_size=4).map(reduce_word)


def test_permutation_uniformity_chi_square():
    counts = Counter()
    rng = reps.make_rng(11)
    for _ in range(60000):
        counts[tuple(rng.permutation(3))] += 1
    assert len(counts) == 6
    sigma = np.sqrt(60000 * (1 / 6) * (5 / 6))
    for c in counts.values():
        assert abs(c - 10000) <= 3 * sigma
    assert stats.chisquare(list(counts.values())).pvalue > 1e-3


def test_sample_reproducible_and_per_seed():
    a = reps.sample("permutation", 10, 2, 3)
    b = reps.sample("permutation", 10, 2, 3)
    c = reps.sample("permutation", 10, 2, 4)
    assert all(np.array_equal(x, y) for x, y in zip(a.permutations, b.permutations))
    assert not all(np.array_equal(x, y) for x, y in zip(a.permutations, c.permutations))


def test_dimension_error():
    with pytest.raises(reps.DimensionError):
        reps.sample("unitary", 1, 2, 0)
    with pytest.raises(ValueError):
        reps.sample("orthogonal", 4, 2, 0)


def test_unitary_columns_orthonormal():
    u = reps.sample("unitary", 4, 2, 0).unitaries[0]
    assert np.abs(u.conj().T @ u - np.eye(4)).max() <= 1e-12


def test_haar_left_invariance_ks():
    rng = reps.make_rng(1)
    v = reps.haar_unitary(8, reps.make_rng(99))
    x = np.array([abs(reps.haar_unitary(8, rng)[0, 0]) ** 2 for _ in range(5000)])
    y = np.array([abs((v @ reps.haar_unitary(8, rng))[0, 0]) ** 2 for _ in range(5000)])
    assert stats.ks_2samp(x, y).pvalue > 0.01


def test_haar_second_moment():
    # E|tr U|^2 = 1, checked against a sampler built from scipy
    rng = reps.make_rng(2)
    ours = np.mean([abs(np.trace(reps.haar_unitary(6, rng))) ** 2 for _ in range(10000)])
    ref = np.mean([abs(np.trace(u)) ** 2 for u in stats.unitary_group.rvs(6, size=10000, random_state=5)])
    assert abs(ours - 1) <= 0.1
    assert abs(ref - 1) <= 0.1


@pytest.mark.parametrize("flavor", ["permutation", "unitary"])
def test_images_valid(flavor):
    rep = reps.sample(flavor, 7, 2, 0)
    for w in [(), (1,), (-2, 1), (1, 2, -1, -2)]:
        m = reps.evaluate(rep, w)
        if flavor == "permutation":
            assert np.array_equal(m.sum(0), np.ones(7)) and np.array_equal(m.sum(1), np.ones(7))
            assert np.array_equal(m @ np.ones(7), np.ones(7))
        else:
            assert np.abs(m.conj().T @ m - np.eye(7)).max() <= 1e-12
    assert np.allclose(reps.evaluate(rep, ()), np.eye(7))
    assert np.allclose(reps.evaluate(rep, (1, -1)), np.eye(7))


@settings(max_examples=40, deadline=None)
@given(words, words, st.sampled_from(["permutation", "unitary"]))
def test_homomorphism(u, v, flavor):
    rep = reps.sample(flavor, 6, 2, 7)
    lhs = reps.evaluate(rep, mul(u, v))
    rhs = reps.evaluate(rep, u) @ reps.evaluate(rep, v)
    assert np.abs(lhs - rhs).max() <= 1e-10


def test_permutation_convention():
    rep = reps.sample("permutation", 5, 1, 0)
    p = rep.permutations[0]
    m = reps.evaluate(rep, (1,))
    for i in range(5):
        assert m[p[i], i] == 1


@pytest.mark.parametrize("n", [2, 5, 9])
def test_projector(n):
    p = reps.zero_mean_projector(n)
    assert np.allclose(p @ p, p) and np.allclose(p, p.T)
    assert np.allclose(p @ np.ones(n), 0)
    assert np.linalg.matrix_rank(p) == n - 1


def test_restrict_zero_mean_examples():
    rep = reps.sample("permutation", 4, 2, 0)
    assert np.allclose(reps.restrict_zero_mean(rep, ()), reps.zero_mean_projector(4))
    swap = reps.RepresentationSample("permutation", 2, 1, 0, permutations=[np.array([1, 0])])
    ev = np.sort(np.linalg.eigvalsh(reps.restrict_zero_mean(swap, (1,))))
    assert np.allclose(ev, [-1, 0])
    with pytest.raises(ValueError):
        reps.restrict_zero_mean(reps.sample("unitary", 3, 1, 0), ())


def test_transitivity_examples():
    ident = reps.RepresentationSample("permutation", 2, 1, 0, permutations=[np.array([0, 1])])
    cycle = reps.RepresentationSample("permutation", 5, 1, 0, permutations=[np.roll(np.arange(5), 1)])
    assert not reps.is_transitive(ident)
    assert reps.is_transitive(cycle)


def test_transitivity_fraction_n100():
    frac = np.mean([reps.is_transitive(reps.sample("permutation", 100, 2, s)) for s in range(1000)])
    assert frac >= 0.95


def test_json_roundtrip():
    for flavor in reps.FLAVORS:
        rep = reps.sample(flavor, 5, 2, 12)
        back = reps.RepresentationSample.from_json(rep.to_json())
        for w in itertools.islice([(1,), (2, -1), (-2, -2)], 3):
            assert np.allclose(reps.evaluate(rep, w), reps.evaluate(back, w))


def test_trial_seeds_distinct():
    seeds = {reps.trial_seed(7, t) for t in range(100)}
    assert len(seeds) == 100
