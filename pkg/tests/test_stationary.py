import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import minimize_scalar

from cavity_ising.errors import InvalidParameterError, NoBistabilityError
from cavity_ising.stationary import (
    epsilon_of_xa,
    find_bifurcations,
    phase_diagram,
    secular_frequencies,
    slope,
    stationary_points,
)
from cavity_ising.tfim import ModelParams


def reference_eps(x_a, p):
    """Stationary drive written out directly from the mode sum."""
    k = (2 * np.arange(1, p.n // 2 + 1) - 1) * np.pi / p.n
    b = p.bx - p.g * x_a
    x_s = 2 * np.sum((b - p.j0 * np.cos(k)) / np.sqrt(p.j0**2 + b**2 - 2 * b * p.j0 * np.cos(k)))
    return p.g * x_s - x_a * (p.delta_c**2 + p.kappa**2 / 4) / (2 * p.delta_c)


def test_epsilon_matches_direct_formula(params):
    for x in (-3.0, 0.0, 43.0, 80.0):
        assert epsilon_of_xa(x, params) == pytest.approx(reference_eps(x, params), rel=1e-13)


def test_folds_agree_with_direct_extremum_search(params, bifurcation):
    # the paramagnetic fold is a local maximum of eps(x_a), the ferromagnetic one a minimum
    upper = minimize_scalar(lambda x: -reference_eps(x, params), bounds=(30, 50), method="bounded",
                            options={"xatol": 1e-9})
    lower = minimize_scalar(lambda x: reference_eps(x, params), bounds=(50, 70), method="bounded",
                            options={"xatol": 1e-9})
    assert bifurcation.eps2 == pytest.approx(-upper.fun, abs=1e-9)
    assert bifurcation.eps1 == pytest.approx(lower.fun, abs=1e-9)
    assert bifurcation.upper.x_a == pytest.approx(upper.x, abs=1e-4)
    assert bifurcation.lower.x_a == pytest.approx(lower.x, abs=1e-4)
    assert bifurcation.eps1 < bifurcation.eps2


def test_bifurcation_values(bifurcation):
    assert bifurcation.eps2 == pytest.approx(3.3592379, abs=1e-6)
    assert bifurcation.eps1 == pytest.approx(3.2038344, abs=1e-6)
    assert bifurcation.upper.b_eff == pytest.approx(1.0746388, abs=1e-6)
    assert bifurcation.lower.b_eff == pytest.approx(0.8493478, abs=1e-6)


def test_three_points_inside_window(params, bifurcation):
    eps = 0.5 * (bifurcation.eps1 + bifurcation.eps2)
    pts = stationary_points(eps, params)
    assert len(pts) == 3
    assert [p.stable for p in pts] == [True, False, True]
    assert pts[0].b_eff > params.j0 > pts[-1].b_eff
    for p in pts:
        assert p.eps == pytest.approx(eps, abs=1e-9)


def test_single_point_outside_window(params, bifurcation):
    for eps in (bifurcation.eps1 - 0.05, bifurcation.eps2 + 0.05, 2.23, 3.6):
        pts = stationary_points(eps, params)
        assert len(pts) == 1 and pts[0].stable


def test_drive_anchor(params):
    assert epsilon_of_xa(0.0, params) == pytest.approx(2.2334, abs=1e-4)
    (pt,) = stationary_points(2.23, params)
    assert pt.x_a == pytest.approx(0.0, abs=0.2)


@settings(max_examples=25, deadline=None)
@given(eps=st.floats(min_value=1.0, max_value=5.0))
def test_points_are_consistent(params, eps):
    for p in stationary_points(eps, params):
        assert p.b_eff == params.bx - params.g * p.x_a
        assert p.p_a == pytest.approx(-params.kappa / (2 * params.delta_c) * p.x_a, rel=1e-14)
        assert (p.slope > 0) == p.stable


def test_secular_frequencies_sign_follows_slope(params, bifurcation):
    eps = 0.5 * (bifurcation.eps1 + bifurcation.eps2)
    for p in stationary_points(eps, params):
        growth = max(z.real for z in secular_frequencies(p.x_a, params))
        assert (growth < 0) == p.stable


def test_slope_vanishes_at_folds(params, bifurcation):
    for fold in (bifurcation.lower, bifurcation.upper):
        assert abs(slope(fold.x_a, params)) < 1e-9


def test_no_bistability_without_coupling(params):
    with pytest.raises(NoBistabilityError):
        find_bifurcations(params.with_(g=0.0))


def test_no_bistability_for_weak_coupling(params):
    with pytest.raises(NoBistabilityError):
        find_bifurcations(params.with_(g=0.001))


def test_bad_scan():
    with pytest.raises(InvalidParameterError):
        stationary_points(1.0, ModelParams(), scan=(1.0, 0.0))


def test_phase_diagram_order_independent_of_jobs(params):
    values = [-0.08, -0.05, 0.05, -0.03]
    serial = phase_diagram(params, "delta_c", values, jobs=1)
    parallel = phase_diagram(params, "delta_c", values, jobs=2)
    assert [r.value for r in serial] == values
    assert [r.value for r in parallel] == values
    for a, b in zip(serial, parallel):
        assert a.bistable == b.bistable
        if a.bistable:
            assert a.result.eps2 == b.result.eps2
    # positive detuning has no fold
    assert not serial[2].bistable


def test_phase_diagram_rejects_unknown_axis(params):
    with pytest.raises(InvalidParameterError):
        phase_diagram(params, "j0", [1.0])


def test_folds_affine_in_bx(params):
    bx = np.array([1.6, 1.8, 1.95, 2.1, 2.3])
    eps2 = [find_bifurcations(params.with_(bx=b)).eps2 for b in bx]
    fit = np.polyfit(bx, eps2, 1)
    resid = eps2 - np.polyval(fit, bx)
    assert np.max(np.abs(resid)) < 1e-8
