import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from covergap import representations as reps
from covergap.free_group import IDENTITY, SupportSet, mul, inv
from covergap.linearization import (
    DimensionBudgetError,
    NotHermitianError,
    SquareRootError,
    _psd_sqrt,
    block_structure_defect,
    build_chain,
    chain_dimension_bound,
    chain_dimensions,
    half_step,
    propagate_epsilon,
    random_instance,
    verify_step,
)
from covergap.operator_lab import CoefficientMap, assemble, hermitize, triangle_upper


def dense(cm, rep, zm=False):
    return assemble(cm, rep, zero_mean=zm, dense_cap=10**9).to_dense()


def test_scalar_identity_step():
    cm = CoefficientMap(1, {IDENTITY: np.ones((1, 1))}, 2)
    hs = half_step(cm, 2)
    assert hs.s1 == [IDENTITY]
    assert np.allclose(hs.a_tilde, [[1.0]])
    assert hs.theta == pytest.approx(1.0)
    rep = reps.sample("unitary", 4, 2, 0)
    assert verify_step(hs, rep) == pytest.approx(0.0, abs=1e-14)
    off, ident = block_structure_defect(hs, rep)
    assert off == 0.0 and ident <= 1e-14


def test_generator_sum_identity():
    # the raw generator sum is self-adjoint but its spectrum need not be
    # symmetric, so ||Q||^2 - theta equals the top eigenvalue of P
    cm = CoefficientMap.generator_sum(2)
    for s in range(5):
        rep = reps.sample("unitary", 5, 2, s)
        hs = half_step(cm, 2)
        q = dense(hs.output_map, rep)
        top = np.linalg.eigvalsh(dense(cm, rep)).max()
        assert abs(np.linalg.norm(q, 2) ** 2 - hs.theta - top) <= 1e-8
        assert verify_step(half_step(hermitize(cm), 2), rep) <= 1e-8


def test_invariants_of_step():
    rng = np.random.default_rng(0)
    for _ in range(20):
        l = int(rng.choice([2, 3, 4]))
        cm = random_instance(rng, 2, l, 6, int(rng.integers(1, 4)))
        hs = half_step(cm, l)
        k = len(hs.s1)
        assert IDENTITY in hs.s1
        assert hs.theta == pytest.approx(k * hs.a_tilde_norm)
        shifted = hs.a_tilde + hs.a_tilde_norm * np.eye(hs.a_tilde.shape[0])
        assert np.linalg.eigvalsh(shifted).min() >= -1e-10
        assert np.abs(hs.b_tilde @ hs.b_tilde - shifted).max() <= 1e-9
        # row-sum identity: the blocks over pairs with g^{-1} h = w add up to a_w
        m = cm.m
        blocks = hs.a_tilde.reshape(m, k, m, k)
        for w, a in cm.entries.items():
            tot = sum(blocks[:, p, :, q] for p, g in enumerate(hs.s1) for q, h in enumerate(hs.s1)
                      if mul(inv(g), h) == w)
            assert np.allclose(tot, a)
        assert hs.theta <= k * triangle_upper(cm) + 1e-9


def test_a_tilde_norm_bound():
    rng = np.random.default_rng(1)
    for _ in range(50):
        l = int(rng.choice([2, 4]))
        cm = random_instance(rng, 2, l, 6, int(rng.integers(1, 3)))
        hs = half_step(cm, l)
        rhs = np.linalg.norm(sum(a @ a.conj().T for a in cm.entries.values()), 2)
        assert hs.a_tilde_norm**2 <= rhs + 1e-9


def test_multiplicity_table_counts():
    cm = random_instance(np.random.default_rng(2), 2, 2, 6, 1)
    hs = half_step(cm, 2)
    table = hs.multiplicity_table()
    assert len(table) == len(hs.s1) ** 2
    assert sum(1 for (g, h) in table if mul(inv(g), h) == IDENTITY) == hs.multiplicity[IDENTITY]


def test_errors():
    with pytest.raises(NotHermitianError):
        half_step(CoefficientMap(1, {(1,): np.ones((1, 1))}, 2), 2)
    with pytest.raises(SquareRootError):
        _psd_sqrt(np.diag([1.0, -0.5]))
    big = random_instance(np.random.default_rng(3), 2, 8, 6, 3)
    with pytest.raises(DimensionBudgetError, match="level"):
        build_chain(big, 8, max_dim=20)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32), st.sampled_from([2, 3, 4]), st.integers(1, 3),
       st.sampled_from(["unitary", "permutation"]), st.integers(2, 8))
def test_exact_identity_property(seed, l, m, flavor, n):
    rng = np.random.default_rng(seed)
    cm = random_instance(rng, 2, l, 6, m)
    hs = half_step(cm, l)
    zm = flavor == "permutation"
    rep = reps.sample(flavor, n, 2, seed)
    assert verify_step(hs, rep, zm) <= 1e-7
    off, ident = block_structure_defect(hs, rep, zm)
    assert off <= 1e-9 and ident <= 1e-9


def test_zero_mean_n6():
    rng = np.random.default_rng(4)
    for i in range(10):
        cm = random_instance(rng, 2, 4, 6, 2)
        assert verify_step(half_step(cm, 4), reps.sample("permutation", 6, 2, i), True) <= 1e-7


def test_chain_l2_single_step():
    cm = random_instance(np.random.default_rng(5), 2, 2, 6, 1)
    ch = build_chain(cm, 2)
    assert ch.v == 1 and ch.final_map.support.radius <= 1


def test_chain_l4_bound_and_unwind():
    rng = np.random.default_rng(6)
    cm = hermitize(CoefficientMap(1, {(1, 2, 1, 2): rng.standard_normal((1, 1)), (1,): np.ones((1, 1)),
                                     IDENTITY: np.ones((1, 1))}, 2))
    assert chain_dimension_bound(4, 3) == 288
    ch = build_chain(cm, 4)
    assert ch.v == 2
    assert ch.final_map.support.radius <= 1
    for k, lv in enumerate(ch.levels, 1):
        assert lv.step.input_map.support.radius <= 2 ** (ch.v - k + 1)
        assert lv.theta >= 0
    rep = reps.sample("unitary", 5, 2, 1)
    top = np.linalg.norm(dense(ch.final_map, rep), 2)
    assert abs(ch.unwind(top) - np.linalg.norm(dense(cm, rep), 2)) <= 1e-6
    data = ch.to_json()
    assert '"n_k"' in data and '"theta"' in data


def test_chain_dimensions_match_build_chain():
    rng = np.random.default_rng(7)
    for l in (2, 3, 4):
        cm = random_instance(rng, 2, l, 6, 1)
        ch = build_chain(cm, l)
        ledger = chain_dimensions(cm.support, l)
        assert [x[2] for x in ledger] == [lv.n_k for lv in ch.levels]


def test_epsilon_examples():
    assert propagate_epsilon(0.0, 4, 3).exact == 0.0
    r = propagate_epsilon(0.01, 2, 3)
    assert r.closed_form == pytest.approx(0.24)
    assert r.exact == pytest.approx(0.48)
    assert r.exact > r.closed_form
    r = propagate_epsilon(0.2, 4, 5)
    assert r.closed_form == pytest.approx(640.0)
    assert not r.admissible and not r.closed_form_admissible
    with pytest.raises(ValueError):
        propagate_epsilon(1.0, 2, 3)


def test_support_set_symmetric_from_instance():
    cm = random_instance(np.random.default_rng(9), 2, 4, 6, 2)
    assert SupportSet(frozenset(cm.entries)).is_symmetric()
    assert len(cm.support) <= 6
