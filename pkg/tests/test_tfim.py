import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cavity_ising import oracle
from cavity_ising.errors import InvalidParameterError
from cavity_ising.tfim import (
    ModelParams,
    SpinModeState,
    batch_observables,
    bogoliubov_angles,
    ground_mode_state,
    ground_probability,
    make_kgrid,
    mode_spectrum,
    nex_pairs,
    pair_excited_state,
    project_alpha_beta,
    x_average,
    x_average_ground,
    x_derivative_ground,
    zz_correlator,
)

fields = st.floats(min_value=0.0, max_value=3.0, allow_nan=False)
sizes = st.sampled_from([4, 6, 8])


def test_kgrid_values():
    k = make_kgrid(8).k
    np.testing.assert_allclose(k, np.pi * np.array([1, 3, 5, 7]) / 8)
    assert not k.flags.writeable


@pytest.mark.parametrize("n", [3, 7, 2, 0, 4.5])
def test_kgrid_rejects_bad_n(n):
    with pytest.raises(InvalidParameterError):
        make_kgrid(n)


@pytest.mark.parametrize("change", [{"n": 121}, {"j0": 0.0}, {"kappa": -1.0}, {"g": np.nan}])
def test_model_params_validation(change):
    with pytest.raises(InvalidParameterError):
        ModelParams(**change)


def test_cavity_factor_needs_detuning():
    with pytest.raises(InvalidParameterError):
        ModelParams(delta_c=0.0).cavity_factor


@given(b=fields)
def test_bogoliubov_unit_circle_and_energy(b):
    k = make_kgrid(12).k
    theta, c2, s2, eps = bogoliubov_angles(b, 1.0, k)
    np.testing.assert_allclose(c2**2 + s2**2, 1.0, atol=1e-12)
    np.testing.assert_allclose(eps, 2 * np.sqrt(1 + b**2 - 2 * b * np.cos(k)), atol=1e-12)
    assert np.all((theta >= 0) & (theta < np.pi / 2))


def test_bogoliubov_broadcasts_over_fields():
    k = make_kgrid(6).k
    _, c2, _, _ = bogoliubov_angles(np.array([0.5, 1.5]), 1.0, k)
    assert c2.shape == (2, 3)


@settings(max_examples=30, deadline=None)
@given(n=sizes, b=fields)
def test_mode_sums_match_even_sector_ed(n, b):
    params = ModelParams(n=n)
    spec = mode_spectrum(b, params)
    ed = oracle.ed_ground(n, b)
    state = ground_mode_state(spec)
    assert spec.ground_energy == pytest.approx(ed.energy, abs=1e-8)
    assert x_average(state, n) == pytest.approx(ed.x, abs=1e-8)
    assert x_average_ground(b, params) == pytest.approx(ed.x, abs=1e-8)
    assert zz_correlator(state, n) == pytest.approx(ed.c_zz, abs=1e-8)


def test_thermodynamic_x_matches_large_chain():
    params = ModelParams(n=4000)
    for b in (0.5, 1.95):
        assert x_average_ground(b, params, thermodynamic=True) == pytest.approx(
            x_average_ground(b, params), rel=1e-5)


def test_x_derivative_matches_finite_difference(params):
    h = 1e-5
    for b in (0.3, 1.07, 1.95):
        fd = (x_average_ground(b + h, params) - x_average_ground(b - h, params)) / (2 * h)
        assert x_derivative_ground(b, params) == pytest.approx(fd, rel=1e-7)


def test_pair_excitation_counts_one(params):
    spec = mode_spectrum(1.3, params)
    dec = project_alpha_beta(pair_excited_state(spec, 0), spec)
    assert nex_pairs(dec) == pytest.approx(1.0, abs=1e-14)
    assert ground_probability(dec) == pytest.approx(0.0, abs=1e-14)


def test_ground_probability_uses_log_sum_for_many_modes():
    n = 400
    spec = mode_spectrum(1.2, ModelParams(n=n))
    # tilt every pair slightly away from the ground state
    tilt = 0.05
    theta = spec.theta + tilt
    state = SpinModeState(U=np.cos(theta), V=np.sin(theta))
    p = ground_probability(project_alpha_beta(state, spec))
    assert p == pytest.approx(np.cos(tilt) ** (2 * (n // 2)), rel=1e-12)


def test_batch_observables_match_scalar_functions(params):
    rng = np.random.default_rng(1)
    m = params.n // 2
    U = rng.normal(size=(3, m)) + 1j * rng.normal(size=(3, m))
    V = rng.normal(size=(3, m)) + 1j * rng.normal(size=(3, m))
    norm = np.sqrt(np.abs(U) ** 2 + np.abs(V) ** 2)
    U, V = U / norm, V / norm
    b = np.array([0.2, 1.0, 2.5])
    x, p_g, n_ex = batch_observables(U, V, b, params.j0, make_kgrid(params.n).k)
    for i in range(3):
        state = SpinModeState(U=U[i], V=V[i])
        dec = project_alpha_beta(state, mode_spectrum(b[i], params))
        assert x[i] == pytest.approx(x_average(state, params.n), abs=1e-10)
        assert p_g[i] == pytest.approx(ground_probability(dec), rel=1e-10, abs=1e-300)
        assert n_ex[i] == pytest.approx(nex_pairs(dec), abs=1e-10)


def test_zz_correlator_on_random_states_matches_ed():
    n = 6
    rng = np.random.default_rng(7)
    U = rng.normal(size=3) + 1j * rng.normal(size=3)
    V = rng.normal(size=3) + 1j * rng.normal(size=3)
    norm = np.sqrt(np.abs(U) ** 2 + np.abs(V) ** 2)
    state = SpinModeState(U=U / norm, V=V / norm)
    vec = oracle.mode_state_vector(state, n)
    assert zz_correlator(state, n) == pytest.approx(oracle.expect_zz(n, vec), abs=1e-12)
    assert x_average(state, n) == pytest.approx(oracle.expect_x(n, vec), abs=1e-12)


def test_state_length_checked(params):
    state = ground_mode_state(mode_spectrum(1.0, ModelParams(n=8)))
    with pytest.raises(InvalidParameterError):
        x_average(state, params.n)
