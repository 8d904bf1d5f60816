import numpy as np
import pytest

from cavity_ising import oracle
from cavity_ising.dynamics import DriveSchedule, IntegratorConfig, integrate, prepare_stationary_state, run_linear_tfim
from cavity_ising.errors import InvalidParameterError
from cavity_ising.stationary import epsilon_of_xa
from cavity_ising.tfim import ModelParams, ground_mode_state, mode_spectrum


def test_dense_system_structure():
    system = oracle.build_system(6, 0.8)
    h = system.hamiltonian.toarray()
    proj = system.even_projector.toarray()
    assert np.max(np.abs(h - h.conj().T)) < 1e-12
    assert np.max(np.abs(proj @ proj - proj)) < 1e-12
    parity = np.diag(system.parity)
    assert np.max(np.abs(h @ parity - parity @ h)) < 1e-12


def test_zero_field_energy():
    assert oracle.ed_ground(4, 0.0).energy == pytest.approx(-4.0, abs=1e-12)


def test_strong_field_energy():
    b = 1e3
    assert oracle.ed_ground(6, b).energy / (-6 * b) == pytest.approx(1.0, abs=1e-5)


def test_mode_state_vector_is_ed_ground_state():
    for n, b in ((4, 0.4), (8, 1.5)):
        vec = oracle.mode_state_vector(ground_mode_state(mode_spectrum(b, ModelParams(n=n))), n)
        assert abs(np.vdot(oracle.ed_ground(n, b).vector, vec)) ** 2 == pytest.approx(1.0, abs=1e-12)


def test_size_limits():
    with pytest.raises(InvalidParameterError):
        oracle.ed_ground(oracle.MAX_GROUND_SITES + 2, 1.0)
    with pytest.raises(InvalidParameterError):
        oracle.ed_evolve(np.zeros(1 << 12), lambda t: 1.0, 0.1, 12)


def test_static_field_keeps_x_constant():
    g = oracle.ed_ground(6, 1.3)
    traj = oracle.ed_evolve(g.vector, lambda t: 1.3, 2.0, 6, sample_every=20)
    assert np.max(np.abs(traj.x - g.x)) < 1e-8
    assert np.min(traj.p_g) > 1 - 1e-10


def test_parity_conserved_in_full_space():
    n = 6
    start = oracle.ed_ground(n, 2.0).vector
    traj = oracle.ed_evolve(start, ((0.0, 2.0), (2.0, 0.5)), 2.0, n, sample_every=20, sector="full")
    assert np.max(traj.odd_weight) < 1e-10


def test_linear_ramp_matches_mode_evolution():
    n, t_total = 8, 50.0
    ed = oracle.ed_evolve(oracle.ed_ground(n, 2.0).vector, ((0.0, t_total), (2.0, 0.2)),
                          t_total, n, sample_every=500)
    modes = run_linear_tfim(2.0, -1.8 / t_total, t_total, ModelParams(n=n),
                            IntegratorConfig(dt=0.005, sample_stride=100))
    assert modes.p_g[-1] == pytest.approx(ed.p_g[-1], abs=1e-6)
    assert modes.x_avg[-1] == pytest.approx(ed.x[-1], abs=1e-6)


def test_coupled_loop_matches_dynamics():
    params = ModelParams(n=8)
    eps0 = epsilon_of_xa(40.0, params)
    start = prepare_stationary_state(eps0, 0, params)
    eps1, t_total = eps0 + 0.05, 20.0
    traj = integrate(start, DriveSchedule.step(eps0, eps1, t_total),
                     IntegratorConfig(dt=0.005, sample_stride=100), params)
    ed = oracle.ed_evolve_coupled(oracle.mode_state_vector(start.spins, params.n),
                                  start.cavity.x_a, start.cavity.p_a, eps1, params, t_total,
                                  sample_every=50)
    np.testing.assert_allclose(ed.t, traj.t, atol=1e-9)
    assert np.max(np.abs(ed.x - traj.x_avg)) < 1e-5
    assert np.max(np.abs(ed.x_a - traj.x_a)) < 1e-5
    # the drive step must actually move the field
    assert np.ptp(traj.b_eff) > 0.01
