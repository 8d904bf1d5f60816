import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cavity_ising import oracle
from cavity_ising.analysis import (
    adiabatic_readout,
    empirical_lambda_fit,
    lz_ground_probability,
    lz_mode_probability,
    nex_from_czz,
    nex_sigma_x,
    nex_sigma_zz,
)
from cavity_ising.dynamics import IntegratorConfig, prepare_stationary_state, run_linear_tfim
from cavity_ising.errors import InvalidParameterError
from cavity_ising.tfim import (
    ModelParams,
    ground_mode_state,
    make_kgrid,
    mode_spectrum,
    nex_pairs,
    pair_excited_state,
    project_alpha_beta,
)

GRID = make_kgrid(120)


def test_lz_mode_examples():
    exponent = 2 * np.pi * (np.pi / 120) ** 2 / 0.0013
    assert exponent == pytest.approx(3.313, abs=1e-3)
    assert lz_mode_probability(np.pi / 120, 0.0013) == pytest.approx(np.exp(-exponent), rel=1e-14)
    assert lz_mode_probability(np.pi / 120, 0.0013) == pytest.approx(0.0364, abs=1e-4)
    assert lz_mode_probability(3 * np.pi / 120, 0.0013) == pytest.approx(1.1e-13, rel=0.1)
    assert lz_mode_probability(np.pi / 120, -0.0013) == lz_mode_probability(np.pi / 120, 0.0013)
    assert lz_mode_probability(0.1, 0.0) == 0.0
    assert lz_mode_probability(0.1, 1e-9) == 0.0


@given(k1=st.floats(0.01, 3.0), k2=st.floats(0.01, 3.0), lam=st.floats(1e-3, 1.0))
def test_lz_monotone_in_k(k1, k2, lam):
    if k1 < k2:
        assert lz_mode_probability(k1, lam) >= lz_mode_probability(k2, lam)


@given(lam1=st.floats(1e-3, 1.0), lam2=st.floats(1e-3, 1.0))
def test_lz_monotone_in_rate(lam1, lam2):
    k = np.pi / 120
    if lam1 < lam2:
        assert lz_mode_probability(k, lam1) <= lz_mode_probability(k, lam2)


def test_lz_ground_probability():
    pred = lz_ground_probability(-0.0013, GRID)
    assert pred.p_g == pytest.approx(0.964, abs=0.003)
    assert pred.p_g == pytest.approx(np.prod(1 - pred.p_k), rel=1e-15)
    assert pred.n_ex == pytest.approx(np.sum(pred.p_k), rel=1e-15)
    assert pred.rate == 0.0013
    assert lz_ground_probability(0.0, GRID).p_g == 1.0


@pytest.mark.parametrize("lam", [0.001, 0.0013, 0.003, 0.0056])
def test_lowest_mode_dominates(lam):
    pred = lz_ground_probability(lam, GRID)
    assert pred.p_k[0] / pred.n_ex > 0.99


def test_sigma_x_estimator_limits():
    params = ModelParams()
    spec = mode_spectrum(1e6, params)
    assert nex_sigma_x(ground_mode_state(spec), params.n) == pytest.approx(0.0, abs=1e-6)
    assert nex_sigma_x(pair_excited_state(spec, 5), params.n) == pytest.approx(1.0, abs=1e-3)


def test_sigma_zz_estimator_limits():
    params = ModelParams()
    assert nex_sigma_zz(ground_mode_state(mode_spectrum(0.0, params)), params.n) == pytest.approx(0.0, abs=1e-12)


def test_single_flipped_spin_counts_one_pair():
    n, flipped = 8, 3
    # sz eigenstates in the sx-diagonal basis: |up> = (|0> - |1>)/sqrt2, |down> = (|0> + |1>)/sqrt2
    up = np.array([1.0, -1.0]) / np.sqrt(2)
    down = np.array([1.0, 1.0]) / np.sqrt(2)
    vec = np.array([1.0])
    for site in reversed(range(n)):
        vec = np.kron(vec, down if site == flipped else up)
    assert oracle.expect_zz(n, vec) == pytest.approx(n - 4, abs=1e-12)
    assert nex_from_czz(oracle.expect_zz(n, vec), n) == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("b_start, b_mid, duration, b_read, estimator", [
    (3.0, 1.3, 20.0, 100.0, nex_sigma_x),
    (0.6, 0.1, 5.0, 0.01, nex_sigma_zz),
])
def test_estimators_track_pair_count_for_evolved_states(b_start, b_mid, duration, b_read, estimator):
    params = ModelParams()
    # a fast sweep on one side of the critical point leaves a few pairs excited,
    # a slow one carries them to the readout field
    fast = run_linear_tfim(b_start, (b_mid - b_start) / duration, duration, params)
    slow_time = 2000.0
    steps = int(slow_time * 2 * (max(b_mid, b_read) + 1) / 0.3)
    cfg = IntegratorConfig(dt=slow_time / steps, sample_stride=steps, method="magnus")
    slow = run_linear_tfim(b_mid, (b_read - b_mid) / slow_time, slow_time, params, cfg,
                           initial=fast.final.spins)
    spins = slow.final.spins
    n_ex = nex_pairs(project_alpha_beta(spins, mode_spectrum(b_read, params)))
    assert n_ex > 0.02
    assert estimator(spins, params.n) == pytest.approx(n_ex, abs=1e-3)


def test_readout_after_quench(params, quench):
    res = adiabatic_readout(quench.trajectory.final, "to-zero-field", 2000.0, params)
    assert res.b_target == pytest.approx(0.01)
    assert abs(res.nex_after - res.nex_before) < 1e-3
    assert res.estimate == pytest.approx(res.nex_before, abs=1e-3)
    assert res.nex_before == pytest.approx(quench.n_ex, abs=1e-12)


def test_readout_of_ground_state_to_strong_field(params):
    state = prepare_stationary_state(2.23, "paramagnetic", params)
    res = adiabatic_readout(state, "to-strong-field", 2000.0, params)
    assert res.estimate == pytest.approx(0.0, abs=1e-3)
    assert res.trajectory.max_norm_drift < 1e-10


def test_readout_refuses_to_cross(params, quench):
    with pytest.raises(InvalidParameterError, match="cross the critical point"):
        adiabatic_readout(quench.trajectory.final, "to-strong-field", 100.0, params)
    state = prepare_stationary_state(2.23, "paramagnetic", params)
    with pytest.raises(InvalidParameterError, match="cross the critical point"):
        adiabatic_readout(state, "to-zero-field", 100.0, params)
    with pytest.raises(InvalidParameterError):
        adiabatic_readout(state, "sideways", 100.0, params)


def test_readout_budget_enforced(params):
    from cavity_ising.errors import AdiabaticityError

    state = prepare_stationary_state(2.23, "paramagnetic", params)
    with pytest.raises(AdiabaticityError):
        adiabatic_readout(state, "to-strong-field", 20.0, params)


def test_scaling_fit_anchor():
    pairs = [(400.0, -0.0056), (800.0, -0.0040), (1600.0, -0.0029)]
    fit = empirical_lambda_fit(pairs)
    assert fit.anchored
    assert fit.c == pytest.approx(20 * 0.0056)
    assert fit.deviations[0] == 0.0


def test_scaling_fit_exact_model():
    c = 0.113
    pairs = [(t, -c / np.sqrt(t)) for t in (300.0, 700.0, 1100.0, 2000.0)]
    fit = empirical_lambda_fit(pairs)
    assert not fit.anchored
    assert fit.c == pytest.approx(c, rel=1e-12)
    assert fit.max_deviation < 1e-12
    np.testing.assert_allclose(fit.predict([300.0]), [c / np.sqrt(300.0)])


def test_scaling_fit_rejects_bad_input():
    with pytest.raises(InvalidParameterError):
        empirical_lambda_fit([(400.0, -0.005), (800.0, -0.004)])
    with pytest.raises(InvalidParameterError):
        empirical_lambda_fit([(400.0, -0.005), (800.0, 0.004), (1200.0, -0.003)])
