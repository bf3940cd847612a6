import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from covergap.free_group import BudgetExceededError, inv, mul, reduce_word
from covergap.hyperbolic import (
    DomainError,
    FordDomain,
    LatticePointSet,
    SurfaceModel,
    cosh_distance,
    cusp_region_height,
    diam_K_bound,
    hyp_distance,
    lattice_point_set,
    moebius,
    word_length_bound_check,
    word_to_moebius,
)

MODEL = SurfaceModel.punctured_torus()
points = st.builds(complex, st.floats(-3, 3), st.floats(0.1, 5))
short_words = st.lists(st.sampled_from([1, -1, 2, -2]), max_size=5).map(reduce_word)


def test_distance_examples():
    assert hyp_distance(1j, 1j) == 0.0
    assert hyp_distance(1j, 2j) == pytest.approx(math.log(2), abs=1e-14)
    assert cosh_distance(1j, 1 + 1j) == pytest.approx(1.5)
    with pytest.raises(DomainError):
        hyp_distance(1j, 2.0 + 0j)


@settings(max_examples=50, deadline=None)
@given(points, points, points)
def test_metric_axioms(z, w, u):
    assert hyp_distance(z, w) == pytest.approx(hyp_distance(w, z), abs=1e-12)
    assert hyp_distance(z, u) <= hyp_distance(z, w) + hyp_distance(w, u) + 1e-9


@settings(max_examples=50, deadline=None)
@given(short_words, points, points)
def test_isometry(w, z, u):
    g = word_to_moebius(MODEL, w)
    assert abs(hyp_distance(moebius(g, z), moebius(g, u)) - hyp_distance(z, u)) <= 1e-10 * max(
        1.0, hyp_distance(z, u)
    )


def test_model_properties():
    assert np.allclose(word_to_moebius(MODEL, ()), np.eye(2))
    c = MODEL.commutator()
    assert abs(abs(np.trace(c)) - 2) <= 1e-12
    assert not np.allclose(c, np.eye(2)) and not np.allclose(c, -np.eye(2))
    w = (1, -2, 2, 2, -1)
    assert np.abs(word_to_moebius(MODEL, mul(reduce_word(w), inv(reduce_word(w)))) - np.eye(2)).max() <= 1e-12
    assert MODEL.check_freeness(8)
    assert MODEL.domain.area() == pytest.approx(2 * math.pi)


def test_model_json_roundtrip():
    back = SurfaceModel.from_json(MODEL.to_json())
    assert back.name == MODEL.name
    assert all(np.allclose(a, b) for a, b in zip(back.generators, MODEL.generators))
    assert back.domain == MODEL.domain


def test_model_rejects_bad_matrices():
    with pytest.raises(ValueError):
        SurfaceModel("bad", [np.array([[2.0, 0.0], [0.0, 1.0]])])


def test_ford_domain_contains():
    dom = FordDomain(-0.5, 6.0)
    assert dom.contains(0.0 + 2j)
    assert not dom.contains(0.0 + 0.5j)
    assert not dom.contains(-1.0 + 2j)


def test_lattice_trivial_and_contents():
    lps = lattice_point_set(MODEL, 0.1, 1.0, C_geo=0.0)
    assert lps.words == [()]
    lps = lattice_point_set(MODEL, 2.0, 0.9, C_geo=0.0)
    assert () in lps.as_set()
    assert np.all(lps.displacements <= lps.radius_bound + 1e-12)
    for w, dist in zip(lps.words, lps.displacements):
        g = word_to_moebius(MODEL, w)
        assert hyp_distance(moebius(g, 1j), 1j) == pytest.approx(dist, abs=1e-9)


def test_lattice_monotone_in_T():
    a = lattice_point_set(MODEL, 2.0, 0.9, C_geo=0.0)
    b = lattice_point_set(MODEL, 3.0, 0.9, C_geo=0.0)
    assert a.as_set() <= b.as_set()
    assert word_length_bound_check(a)["max_word_length"] <= word_length_bound_check(b)["max_word_length"]


@pytest.mark.parametrize("T", [2.0, 3.0, 4.0])
def test_lattice_stable_under_doubled_slack(T):
    a = lattice_point_set(MODEL, T, 0.9, C_geo=0.0)
    b = lattice_point_set(MODEL, T, 0.9, C_geo=0.0, prune_slack=2 * 2 * MODEL.generator_displacements().max())
    assert a.as_set() == b.as_set()


def test_lattice_budget():
    with pytest.raises(BudgetExceededError):
        lattice_point_set(MODEL, 5.0, 0.5, budget=1000)


def test_lattice_csv():
    lps = lattice_point_set(MODEL, 1.0, 0.9, C_geo=0.0)
    lines = lps.to_csv().splitlines()
    assert lines[0] == "word,word_length,displacement"
    assert len(lines) == len(lps) + 1


def test_word_length_report():
    rep = word_length_bound_check(LatticePointSet(1.0, 0.5, 1.0, [()], np.zeros(1)))
    assert rep["max_word_length"] == 0
    lps = lattice_point_set(MODEL, 4.0, 0.5)
    rep = word_length_bound_check(lps)
    assert rep["bounded_by_count"]
    assert rep["max_word_length"] <= rep["size"]
    assert rep["constant_kappa_squared"] > 0 and rep["constant_inverse_kappa_squared"] > 0


def test_cusp_helpers():
    assert cusp_region_height(1.0) == 1.0
    assert diam_K_bound(1.0) == 1.0
    assert diam_K_bound(0.01) == pytest.approx(1 + math.log(100))
    ks = [0.01, 0.1, 0.5, 0.9]
    vals = [diam_K_bound(k) for k in ks]
    assert all(a > b for a, b in zip(vals, vals[1:]))
