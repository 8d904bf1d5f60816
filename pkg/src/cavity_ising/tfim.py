"""Momentum-space machinery for the transverse-field Ising chain.

After the Jordan-Wigner transformation the chain

    H = -B sum_i sx_i - J0 sum_i sz_i sz_{i+1}

decouples into independent (k, -k) fermion pairs with k = (2m - 1) pi / N,
m = 1 .. N/2 (anti-periodic fermions, even-parity sector). Each pair lives in
the two-dimensional space spanned by the pair vacuum and the doubly occupied
state, so a many-body state of the even sector reachable from a ground state
is a list of amplitude pairs (U_k, V_k):

    |psi> = prod_{k>0} (U_k + i V_k c_k^+ c_{-k}^+) |0>

Everything observable in this package is computed from those pairs.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy import integrate

from .errors import InvalidParameterError

_TINY = 1e-300
# above this many modes, products of probabilities are accumulated as log sums
_LOG_PRODUCT_MODES = 64


def _frozen(a, dtype=float) -> np.ndarray:
    arr = np.array(a, dtype=dtype)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class ModelParams:
    """Static constants of the cavity-coupled chain.

    Energies are in units of the coupling; the defaults use ``j0 = 1``.
    The defaults are the parameter set used throughout the quench and ramp
    experiments.
    """

    j0: float = 1.0
    bx: float = 1.95
    g: float = 0.02
    kappa: float = 0.07
    delta_c: float = -0.05
    n: int = 120

    def __post_init__(self):
        for name in ("j0", "bx", "g", "kappa", "delta_c"):
            value = getattr(self, name)
            if not np.isfinite(value):
                raise InvalidParameterError(f"{name} must be finite, got {value!r}")
        if int(self.n) != self.n or self.n % 2 or self.n < 4:
            raise InvalidParameterError(f"n must be even and >= 4, got {self.n!r}")
        if self.j0 <= 0:
            raise InvalidParameterError(f"j0 must be positive, got {self.j0!r}")
        if self.kappa <= 0:
            raise InvalidParameterError(f"kappa must be positive, got {self.kappa!r}")
        object.__setattr__(self, "n", int(self.n))

    def with_(self, **changes) -> "ModelParams":
        return replace(self, **changes)

    @property
    def cavity_factor(self) -> float:
        """(delta_c^2 + kappa^2/4) / (2 delta_c), the linear cavity response."""
        if self.delta_c == 0:
            raise InvalidParameterError("delta_c = 0: cavity response diverges")
        return (self.delta_c**2 + self.kappa**2 / 4) / (2 * self.delta_c)


@dataclass(frozen=True)
class KGrid:
    n: int
    k: np.ndarray

    def __len__(self):
        return len(self.k)


def make_kgrid(n: int) -> KGrid:
    """Positive quasimomenta (2m - 1) pi / n, m = 1 .. n/2."""
    if int(n) != n or n % 2 or n < 4:
        raise InvalidParameterError(f"n must be even and >= 4, got {n!r}")
    n = int(n)
    m = np.arange(1, n // 2 + 1)
    return KGrid(n=n, k=_frozen((2 * m - 1) * np.pi / n))


def bogoliubov_angles(b, j0: float, k: np.ndarray):
    """Return ``(theta, cos2theta, sin2theta, epsilon)`` for field(s) ``b``.

    ``b`` may be a scalar or an array; array fields broadcast against ``k``
    along a new trailing axis. ``theta = atan2(j0 sin k, b - j0 cos k) / 2``
    lies in [0, pi/2) for k in (0, pi) and is continuous in ``b``.
    """
    b = np.asarray(b, dtype=float)[..., None]
    a = b - j0 * np.cos(k)
    s = j0 * np.sin(k) + 0.0 * b
    r = np.maximum(np.hypot(a, s), _TINY)
    theta = 0.5 * np.arctan2(s, a)
    return theta, a / r, s / r, 2.0 * r


@dataclass(frozen=True)
class ModeSpectrum:
    """Bogoliubov data of the chain at one (effective) transverse field."""

    effective_field: float
    j0: float
    n: int
    k: np.ndarray
    theta: np.ndarray
    epsilon: np.ndarray
    u: np.ndarray
    v: np.ndarray
    ground_energy: float

    @property
    def cos2theta(self) -> np.ndarray:
        return np.cos(2 * self.theta)

    @property
    def sin2theta(self) -> np.ndarray:
        return np.sin(2 * self.theta)


def mode_spectrum(b: float, params: ModelParams, grid: KGrid | None = None) -> ModeSpectrum:
    """Bogoliubov angles, quasiparticle energies and ground energy at field ``b``.

    The ground energy is ``sum_{k>0} eps_k (cos 2theta_k - 1) - N b``.
    """
    if grid is None:
        grid = make_kgrid(params.n)
    elif grid.n != params.n:
        raise InvalidParameterError(f"grid built for n={grid.n}, params have n={params.n}")
    theta, c2, _, eps = bogoliubov_angles(b, params.j0, grid.k)
    e_g = float(np.sum(eps * (c2 - 1.0)) - params.n * b)
    return ModeSpectrum(
        effective_field=float(b),
        j0=params.j0,
        n=params.n,
        k=grid.k,
        theta=_frozen(theta),
        epsilon=_frozen(eps),
        u=_frozen(np.cos(theta)),
        v=_frozen(np.sin(theta)),
        ground_energy=e_g,
    )


@dataclass(frozen=True)
class SpinModeState:
    """Amplitude pairs (U_k, V_k) for every k > 0 (global phase dropped)."""

    U: np.ndarray
    V: np.ndarray

    def __post_init__(self):
        U = _frozen(self.U, complex)
        V = _frozen(self.V, complex)
        if U.shape != V.shape or U.ndim != 1:
            raise InvalidParameterError("U and V must be 1-d arrays of equal length")
        object.__setattr__(self, "U", U)
        object.__setattr__(self, "V", V)

    def __len__(self):
        return len(self.U)

    @property
    def norm_drift(self) -> float:
        """max_k | |U_k|^2 + |V_k|^2 - 1 |"""
        return float(np.max(np.abs(np.abs(self.U) ** 2 + np.abs(self.V) ** 2 - 1.0)))


def ground_mode_state(spec: ModeSpectrum) -> SpinModeState:
    return SpinModeState(U=spec.u, V=spec.v)


def pair_excited_state(spec: ModeSpectrum, index: int) -> SpinModeState:
    """Ground state with the quasiparticle pair of mode ``index`` excited.

    In that mode the pair reads ``(U, V) = (-v_k, u_k)``.
    """
    U = np.array(spec.u, dtype=complex)
    V = np.array(spec.v, dtype=complex)
    U[index], V[index] = -spec.v[index], spec.u[index]
    return SpinModeState(U=U, V=V)


def _check_length(state: SpinModeState, n: int):
    if 2 * len(state) != n:
        raise InvalidParameterError(f"state has {len(state)} pairs, expected n/2 = {n // 2}")


def x_average(state: SpinModeState, n: int) -> float:
    """<sum_i sx_i> = N - 4 sum_{k>0} |V_k|^2."""
    _check_length(state, n)
    return float(n - 4.0 * np.sum(np.abs(state.V) ** 2))


def x_average_ground(b, params: ModelParams, thermodynamic: bool = False):
    """Ground-state <sum_i sx_i> at field ``b``.

    The finite chain uses ``2 sum_{k>0} cos 2theta_k``. With
    ``thermodynamic=True`` the k-sum is replaced by its N -> infinity
    integral, evaluated by adaptive quadrature (scalar ``b`` only).
    Array-valued ``b`` returns an array.
    """
    j0, n = params.j0, params.n
    if thermodynamic:
        def integrand(k):
            return (b - j0 * np.cos(k)) / max(np.sqrt(j0**2 + b**2 - 2 * b * j0 * np.cos(k)), _TINY)

        val, _ = integrate.quad(integrand, 0.0, np.pi, points=[0.0], limit=200,
                                epsabs=1e-13, epsrel=1e-12)
        return n / np.pi * val
    k = make_kgrid(n).k
    _, c2, _, _ = bogoliubov_angles(b, j0, k)
    out = 2.0 * np.sum(c2, axis=-1)
    return float(out) if np.ndim(out) == 0 else out


def x_derivative_ground(b, params: ModelParams):
    """dX/dB of the ground state: 2 sum_{k>0} j0^2 sin^2 k / (j0^2 + B^2 - 2 B j0 cos k)^{3/2}."""
    j0 = params.j0
    k = make_kgrid(params.n).k
    b = np.asarray(b, dtype=float)[..., None]
    r2 = j0**2 + b**2 - 2 * b * j0 * np.cos(k)
    out = 2.0 * np.sum(j0**2 * np.sin(k) ** 2 / np.maximum(r2, _TINY) ** 1.5, axis=-1)
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class AmplitudeDecomposition:
    """Ground (alpha_k) and pair-excited (beta_k) amplitudes w.r.t. a reference field."""

    alpha: np.ndarray
    beta: np.ndarray
    reference_field: float


def project_alpha_beta(state: SpinModeState, spec: ModeSpectrum) -> AmplitudeDecomposition:
    if len(state) != len(spec.u):
        raise InvalidParameterError("state and spectrum sizes differ")
    alpha = spec.u * state.U + spec.v * state.V
    beta = -spec.v * state.U + spec.u * state.V
    return AmplitudeDecomposition(
        alpha=_frozen(alpha, complex), beta=_frozen(beta, complex),
        reference_field=spec.effective_field,
    )


def _product_of_probabilities(p: np.ndarray, axis=-1):
    p = np.asarray(p, dtype=float)
    if p.shape[axis] <= _LOG_PRODUCT_MODES:
        return np.prod(p, axis=axis)
    with np.errstate(divide="ignore"):
        return np.exp(np.sum(np.log(p), axis=axis))


def ground_probability(dec: AmplitudeDecomposition) -> float:
    """Probability of the instantaneous many-body ground state, prod_k |alpha_k|^2."""
    return float(np.clip(_product_of_probabilities(np.abs(dec.alpha) ** 2), 0.0, 1.0))


def nex_pairs(dec: AmplitudeDecomposition) -> float:
    """Number of excited quasiparticle pairs, sum_{k>0} |beta_k|^2."""
    return float(np.sum(np.abs(dec.beta) ** 2))


def zz_correlator(state: SpinModeState, n: int) -> float:
    """<sum_i sz_i sz_{i+1}> on the periodic chain.

    With <n_k + n_-k> = 2|V_k|^2 and <c_k^+ c_-k^+ - c_-k c_k> = -2i Re(U_k^* V_k),
    the nearest-neighbour bond sum becomes

        C_zz = sum_{k>0} 4 cos k |V_k|^2 + 4 sin k Re(U_k^* V_k).
    """
    _check_length(state, n)
    k = make_kgrid(n).k
    U, V = state.U, state.V
    return float(np.sum(4 * np.cos(k) * np.abs(V) ** 2 + 4 * np.sin(k) * np.real(np.conj(U) * V)))


def batch_observables(U: np.ndarray, V: np.ndarray, b: np.ndarray, j0: float, k: np.ndarray):
    """Vectorised (X, P_g, N_ex) for stacked states ``U, V`` of shape (samples, modes).

    ``b`` holds the reference field of each sample.
    """
    n = 2 * U.shape[-1]
    theta, _, _, _ = bogoliubov_angles(b, j0, k)
    u, v = np.cos(theta), np.sin(theta)
    alpha = u * U + v * V
    beta = -v * U + u * V
    x = n - 4.0 * np.sum(np.abs(V) ** 2, axis=-1)
    p_g = np.clip(_product_of_probabilities(np.abs(alpha) ** 2), 0.0, 1.0)
    n_ex = np.sum(np.abs(beta) ** 2, axis=-1)
    return x, p_g, n_ex
