import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from covergap.hyperbolic import SurfaceModel, lattice_point_set
from covergap.parametrix import (
    SMOOTHERSTEP_SUP_D1,
    SMOOTHERSTEP_SUP_D2,
    GridError,
    GridSpec,
    build_cutoffs,
    build_fundamental_grid,
    cusp_norm_bound,
    deviation_check,
    discretize_a_gamma,
    envelope_admissibility,
    fit_envelope,
    grid_for,
    kappa_pairing,
    kernel_s_derivative,
    kernel_s_derivative_check,
    kernel_table,
    remainder_constant,
    remainder_kernel,
    resolvent_kernel,
    resolvent_kernel_dr,
    resolvent_s1_closed_form,
    resolvent_values,
    schur_bound,
    smootherstep,
    spherical_bound,
    svd_truncate,
)

MODEL = SurfaceModel.punctured_torus()


def test_smootherstep_constants():
    x = np.linspace(-0.5, 1.5, 200001)
    assert np.abs(smootherstep(x, 1)).max() == pytest.approx(SMOOTHERSTEP_SUP_D1, rel=1e-6)
    assert np.abs(smootherstep(x, 2)).max() == pytest.approx(SMOOTHERSTEP_SUP_D2, rel=1e-6)
    assert smootherstep(-0.1) == 0.0 and smootherstep(1.2) == 1.0


@pytest.mark.parametrize("kappa", [1.0, 0.1, 0.01])
def test_cutoff_invariants(kappa):
    pair = build_cutoffs(kappa)
    t = np.linspace(0.0, 3.0 * pair.tau_n, 10**4)
    assert np.all(np.abs(pair.chi_plus(t, 1)) <= kappa / 30)
    assert np.all(np.abs(pair.chi_plus(t, 2) - pair.chi_plus(t, 1)) <= kappa / 30)
    assert np.all(pair.chi_plus(t) * pair.chi_minus(t) == pair.chi_minus(t))
    assert pair.chi_plus(0.5) == 0.0
    assert pair.chi_plus(2 * pair.tau_n) == 1.0
    assert np.all(pair.chi_minus(t[t <= pair.tau_n]) == 0.0)
    assert np.all(pair.chi_minus(t[t >= 2 * pair.tau_n]) == 1.0)
    assert cusp_norm_bound(pair) <= 1 / 8


def test_tau_n_rescaling():
    pair = build_cutoffs(0.01)
    assert pair.tau_n == pytest.approx(6000 * (pair.tau0 - 1) + 1)
    with pytest.raises(ValueError):
        build_cutoffs(0.0)


def test_resolvent_closed_form_anchor():
    for r in (0.5, 1.0, 2.0, 4.0):
        assert resolvent_kernel(1.0, r) == pytest.approx(float(resolvent_s1_closed_form(r)), abs=1e-8)
    # (1/2 pi) log coth 2 is about 0.00583
    assert resolvent_kernel(1.0, 4.0) == pytest.approx(0.00575, rel=0.02)


def test_resolvent_against_direct_quadrature():
    # oracle: plain quadrature after t = u^2, which removes the endpoint singularity
    for s in (0.55, 0.7, 0.9):
        for r in (0.3, 1.5, 3.0):
            u = math.sinh(r / 2) ** 2
            f = lambda x: 2 * x ** (2 * s - 1) * (1 - x * x) ** (s - 1) * (x * x + u) ** (-s)
            ref = integrate.quad(f, 0, 1, limit=400, epsrel=1e-12)[0] / (4 * math.pi)
            assert resolvent_kernel(s, r) == pytest.approx(ref, rel=1e-7)
            assert float(resolvent_values(s, r)) == pytest.approx(ref, rel=1e-7)


def test_resolvent_derivative_and_domain():
    for s in (0.6, 1.0):
        for r in (0.7, 2.5):
            h = 1e-5
            fd = (resolvent_kernel(s, r + h) - resolvent_kernel(s, r - h)) / (2 * h)
            assert resolvent_kernel_dr(s, r) == pytest.approx(fd, rel=1e-6)
            assert float(resolvent_values(s, r, deriv=True)[1]) == pytest.approx(fd, rel=1e-6)
    with pytest.raises(ValueError):
        resolvent_kernel(0.8, 0.0)
    with pytest.raises(ValueError):
        resolvent_kernel(0.4, 1.0)


def test_resolvent_positive_decreasing():
    r = np.linspace(0.1, 10, 300)
    vals = resolvent_values(0.6, r)
    assert np.all(vals > 0) and np.all(np.diff(vals) < 0)


@settings(max_examples=40, deadline=None)
@given(st.floats(0.5, 1.0), st.floats(0.5, 12.0), st.floats(0.0, 14.0))
def test_remainder_support_exact(s, T, r0):
    val = remainder_kernel(s, T, r0 + 1e-9)
    if not T < r0 + 1e-9 < T + 1:
        assert val == 0.0


def test_remainder_examples_and_constant():
    assert remainder_kernel(0.8, 5.0, 4.9) == 0.0
    assert remainder_kernel(0.8, 5.0, 6.1) == 0.0
    assert remainder_constant([2.0, 5.0, 10.0], [0.6, 0.8, 1.0]) <= 10.0


def test_kernel_table_csv():
    text = kernel_table([0.7], 2.0, np.linspace(1.5, 3.5, 5))
    lines = text.splitlines()
    assert lines[0] == "s,T,r,R,dR_dr,L"
    assert len(lines) == 6


def test_s_derivative_check():
    rep = kernel_s_derivative_check(5.0)
    assert np.isfinite(rep["max_h"]) and rep["relative_change"] <= 0.01
    assert np.all(kernel_s_derivative(0.8, 5.0, np.array([4.0, 6.5])) == 0.0)
    r = np.linspace(5.0, 6.0, 41)
    for s1, s2 in [(0.6, 0.7), (0.75, 0.9), (0.9, 1.0)]:
        diff = np.abs(remainder_kernel(s1, 5.0, r) - remainder_kernel(s2, 5.0, r))
        assert np.all(diff <= 1.05 * rep["max_h"] * abs(s1 - s2))


def test_norm_bounds_and_envelope():
    assert schur_bound(1.0, 10.0) <= schur_bound(0.6, 10.0)
    assert spherical_bound(0.8, 5.0) <= schur_bound(0.8, 5.0)
    for s in (0.6, 0.8, 1.0):
        fit = fit_envelope(s, [5.0, 10.0, 15.0])
        assert all(abs(x - 1) <= 0.2 for x in fit["relative"])
    assert envelope_admissibility(10.0) == pytest.approx(0.1)
    assert kappa_pairing(10.0) == pytest.approx(4 * math.log(10) ** 2 / 100)


def test_grid_area_and_error():
    grid = build_fundamental_grid(MODEL.domain, 50.0, GridSpec())
    assert grid.size == 400
    assert grid.weights.sum() == pytest.approx(2 * math.pi - 6 / 50.0, rel=0.05)
    assert np.all(MODEL.domain.contains(grid.points))
    with pytest.raises(GridError):
        build_fundamental_grid(MODEL.domain, 50.0, GridSpec(1, 1, 1, 1), area_tol=1e-6)


def test_discretize_zero_for_far_element():
    far = (1, 1, 1, 1, 1, 1, 1, 1)
    ag = discretize_a_gamma(MODEL, far, 0.8, 1.0, 0.5, GridSpec(10, 6, 2, 20))
    assert ag.hs_norm == 0.0 and not np.any(ag.matrix)
    assert svd_truncate(ag, 5).rank == 0


def test_discretize_hs_and_singular_values():
    lps = lattice_point_set(MODEL, 3.0, 0.5)
    cut = build_cutoffs(0.5)
    grid = grid_for(MODEL, 3.0, 0.5, GridSpec(), cut)
    for g in lps.words[:25]:
        ag = discretize_a_gamma(MODEL, g, 0.8, 3.0, 0.5, grid)
        assert ag.hs_norm**2 == pytest.approx(float(np.sum(ag.singular_values**2)), rel=1e-8, abs=1e-300)
        assert ag.within_hs_budget()
        tr = svd_truncate(ag, len(lps))
        assert np.linalg.norm(ag.matrix - tr.matrix, 2) <= 1 / (20 * len(lps)) + 1e-15
        assert tr.rank <= tr.rank_bound
    csv = ag.singular_values_csv().splitlines()
    assert csv[0] == "index,singular_value" and len(csv) == grid.size + 1


def test_grid_doubling_hs_norm():
    a = discretize_a_gamma(MODEL, (), 0.8, 3.0, 0.5, GridSpec())
    b = discretize_a_gamma(MODEL, (), 0.8, 3.0, 0.5, GridSpec().refined())
    assert abs(a.hs_norm - b.hs_norm) / b.hs_norm < 0.02


def test_svd_truncate_rank_one():
    u = np.zeros(6)
    u[0] = 1.0
    tr = svd_truncate(np.outer(u, u), 1)
    assert tr.rank == 1 and tr.error == 0.0 and tr.reached


def test_deviation_check_stability():
    spec = GridSpec(10, 6, 2, 20)
    a = deviation_check(MODEL, (), 0.6, 0.61, 3.0, 0.5, spec)
    b = deviation_check(MODEL, (), 0.6, 0.605, 3.0, 0.5, spec)
    assert abs(a - b) <= 0.2 * b
    with pytest.raises(ValueError):
        deviation_check(MODEL, (), 0.7, 0.7, 3.0, 0.5, spec)
    # c3 is fitted on adjacent pairs covering [1/2, 1], then refined once
    def fitted(step):
        s = np.linspace(0.5, 1.0, int(round(0.5 / step)) + 1)
        return max(deviation_check(MODEL, (), p, q, 3.0, 0.5, spec) for p, q in zip(s, s[1:]))

    c3 = fitted(0.05)
    assert abs(fitted(0.025) - c3) <= 0.2 * c3
    later = [(0.6, 0.62), (0.7, 0.8), (0.52, 0.58), (0.8, 0.83), (0.95, 0.99),
             (0.5, 1.0), (0.58, 0.9), (0.66, 0.67), (0.72, 0.99), (0.88, 0.89)]
    assert all(deviation_check(MODEL, (), p, q, 3.0, 0.5, spec) <= 1.2 * c3 for p, q in later)
