"""Brute-force exact diagonalization of small periodic chains.

Used to validate the momentum-space code. States live in the fermion
occupation basis: bit ``i`` of a basis index is ``n_{i+1}``. Under the
Jordan-Wigner map ``sx_i = 1 - 2 n_i`` is diagonal and ``sz_i = -(a_i + a_i^+)``
flips bit ``i``, so the bond ``sz_i sz_{i+1}`` flips two neighbouring bits
with amplitude +1. The momentum-space solution corresponds to the even
sector of the spin parity ``prod_i sx_i = (-1)^{N_f}``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import sparse

from .errors import InvalidParameterError
from .tfim import SpinModeState, make_kgrid

MAX_GROUND_SITES = 12
MAX_EVOLVE_SITES = 10


def _popcount(states: np.ndarray) -> np.ndarray:
    return np.array([bin(int(s)).count("1") for s in states], dtype=np.int64)


@lru_cache(maxsize=None)
def _operators(n: int):
    """(sx_sum diagonal, bond-flip sparse matrix, parity diagonal) on 2^n states."""
    dim = 1 << n
    states = np.arange(dim)
    occ = _popcount(states)
    sx_sum = (n - 2 * occ).astype(float)
    rows, cols = [], []
    for i in range(n):
        mask = (1 << i) | (1 << ((i + 1) % n))
        rows.append(states)
        cols.append(states ^ mask)
    bonds = sparse.csr_matrix(
        (np.ones(n * dim), (np.concatenate(rows), np.concatenate(cols))), shape=(dim, dim)
    )
    parity = np.where(occ % 2 == 0, 1.0, -1.0)
    return sx_sum, bonds, parity


@lru_cache(maxsize=None)
def _even_blocks(n: int):
    sx_sum, bonds, parity = _operators(n)
    even = np.flatnonzero(parity > 0)
    return even, sx_sum[even], bonds[even][:, even].toarray()


@dataclass(frozen=True)
class DenseSpinSystem:
    """Periodic chain H = -b sum sx_i - j0 sum sz_i sz_{i+1} on the full 2^n space."""

    n: int
    j0: float
    b: float
    hamiltonian: sparse.csr_matrix
    parity: np.ndarray  # diagonal of prod_i sx_i

    @property
    def even_projector(self) -> sparse.csr_matrix:
        return sparse.diags((1.0 + self.parity) / 2.0, format="csr")


def build_system(n: int, b: float, j0: float = 1.0) -> DenseSpinSystem:
    if n > MAX_GROUND_SITES:
        raise InvalidParameterError(f"exact diagonalization limited to n <= {MAX_GROUND_SITES}")
    sx_sum, bonds, parity = _operators(n)
    h = (sparse.diags(-b * sx_sum) - j0 * bonds).tocsr()
    return DenseSpinSystem(n=n, j0=j0, b=b, hamiltonian=h, parity=parity)


def _even_hamiltonian(n: int, b: float, j0: float) -> np.ndarray:
    _, sx_even, bonds_even = _even_blocks(n)
    return np.diag(-b * sx_even) - j0 * bonds_even


def _embed(n: int, even_vec: np.ndarray) -> np.ndarray:
    even, _, _ = _even_blocks(n)
    full = np.zeros(1 << n, dtype=complex)
    full[even] = even_vec
    return full


def expect_x(n: int, vec: np.ndarray) -> float:
    sx_sum, _, _ = _operators(n)
    return float(np.real(np.vdot(vec, sx_sum * vec)) / np.real(np.vdot(vec, vec)))


def expect_zz(n: int, vec: np.ndarray) -> float:
    _, bonds, _ = _operators(n)
    return float(np.real(np.vdot(vec, bonds @ vec)) / np.real(np.vdot(vec, vec)))


@dataclass(frozen=True)
class EDGround:
    energy: float
    x: float
    c_zz: float
    vector: np.ndarray  # full 2^n space, zero outside the even sector


def ed_ground(n: int, b: float, j0: float = 1.0) -> EDGround:
    """Lowest eigenpair of the even-parity block and its observables."""
    if n > MAX_GROUND_SITES:
        raise InvalidParameterError(f"exact diagonalization limited to n <= {MAX_GROUND_SITES}")
    w, vecs = np.linalg.eigh(_even_hamiltonian(n, b, j0))
    vec = _embed(n, vecs[:, 0])
    return EDGround(energy=float(w[0]), x=expect_x(n, vec), c_zz=expect_zz(n, vec), vector=vec)


@lru_cache(maxsize=None)
def _annihilators(n: int):
    """Jordan-Wigner fermion annihilators c_1 .. c_n as sparse matrices."""
    dim = 1 << n
    states = np.arange(dim)
    ops = []
    for i in range(n):
        occupied = states[(states >> i) & 1 == 1]
        below = occupied & ((1 << i) - 1)
        sign = np.where(_popcount(below) % 2 == 0, 1.0, -1.0)
        ops.append(sparse.csr_matrix((sign, (occupied ^ (1 << i), occupied)), shape=(dim, dim)))
    return ops


def mode_state_vector(state: SpinModeState, n: int) -> np.ndarray:
    """Map momentum amplitude pairs to a vector in the occupation basis.

    Builds prod_{k>0} (U_k + i V_k c_k^+ c_{-k}^+) |0> with
    c_k = n^{-1/2} sum_j exp(-i k j) c_j.
    """
    if 2 * len(state) != n:
        raise InvalidParameterError("state length does not match n")
    sites = np.arange(1, n + 1)
    c = _annihilators(n)
    vec = np.zeros(1 << n, dtype=complex)
    vec[0] = 1.0
    for k, U, V in zip(make_kgrid(n).k, state.U, state.V):
        ck_dag = sum(np.exp(1j * k * j) * op.T for j, op in zip(sites, c)) / np.sqrt(n)
        cmk_dag = sum(np.exp(-1j * k * j) * op.T for j, op in zip(sites, c)) / np.sqrt(n)
        vec = U * vec + 1j * V * (ck_dag @ (cmk_dag @ vec))
    return vec


@dataclass(frozen=True)
class EDTrajectory:
    t: np.ndarray
    b: np.ndarray
    x: np.ndarray
    p_g: np.ndarray
    odd_weight: np.ndarray
    final: np.ndarray
    x_a: np.ndarray | None = None


def _field_function(schedule):
    if callable(schedule):
        return schedule
    times, fields = (np.asarray(a, dtype=float) for a in schedule)
    return lambda t: float(np.interp(t, times, fields))


def _propagator(h: np.ndarray, dt: float) -> np.ndarray:
    w, vecs = np.linalg.eigh(h)
    return (vecs * np.exp(-1j * w * dt)) @ vecs.conj().T


def ed_evolve(initial: np.ndarray, schedule, total_time: float, n: int, j0: float = 1.0,
              interval: float = 0.01, sample_every: int = 1, sector: str = "even") -> EDTrajectory:
    """Evolve ``initial`` under H(B(t)) by midpoint-field matrix exponentials.

    ``schedule`` is a callable B(t) or a pair of knot arrays (times, fields)
    interpolated linearly. ``sector="full"`` evolves on all 2^n states (slow;
    used to check parity conservation).
    """
    if n > MAX_EVOLVE_SITES:
        raise InvalidParameterError(f"exact evolution limited to n <= {MAX_EVOLVE_SITES}")
    field_at = _field_function(schedule)
    steps = int(round(total_time / interval))
    even, _, _ = _even_blocks(n)
    sx_sum, bonds, parity = _operators(n)
    if sector == "even":
        psi = np.asarray(initial, dtype=complex)[even].copy()

        def hamiltonian(b):
            return _even_hamiltonian(n, b, j0)

        def to_full(v):
            return _embed(n, v)
    elif sector == "full":
        psi = np.asarray(initial, dtype=complex).copy()
        bonds_dense = bonds.toarray()

        def hamiltonian(b):
            return np.diag(-b * sx_sum) - j0 * bonds_dense

        def to_full(v):
            return v
    else:
        raise InvalidParameterError(f"unknown sector {sector!r}")

    rows = []

    def record(t, v):
        full = to_full(v)
        b = field_at(t)
        gs = ed_ground(n, b, j0).vector
        rows.append((t, b, expect_x(n, full), abs(np.vdot(gs, full)) ** 2,
                     float(np.sum(np.abs(full[parity < 0]) ** 2))))

    record(0.0, psi)
    for step in range(steps):
        t0 = step * interval
        psi = _propagator(hamiltonian(field_at(t0 + interval / 2)), interval) @ psi
        if (step + 1) % sample_every == 0:
            record((step + 1) * interval, psi)
    t, b, x, p_g, odd = (np.array(col) for col in zip(*rows))
    return EDTrajectory(t=t, b=b, x=x, p_g=p_g, odd_weight=odd, final=to_full(psi))


def ed_evolve_coupled(initial: np.ndarray, x_a: float, p_a: float, eps, params,
                      total_time: float, interval: float = 0.01, substeps: int = 4,
                      sample_every: int = 1) -> EDTrajectory:
    """Exact spins plus mean-field cavity quadratures, co-integrated.

    Each interval: predict the cavity to the midpoint with X frozen, apply
    exp(-i H(B_mid) h) to the spin vector, then advance the cavity over the
    full interval by RK4 with X interpolated linearly between the interval
    ends. ``eps`` is a constant or a callable eps(t).
    """
    n, j0 = params.n, params.j0
    if n > MAX_EVOLVE_SITES:
        raise InvalidParameterError(f"exact evolution limited to n <= {MAX_EVOLVE_SITES}")
    eps_at = eps if callable(eps) else (lambda t: float(eps))
    even, sx_even, _ = _even_blocks(n)
    psi = np.asarray(initial, dtype=complex)[even].copy()

    def x_of(v):
        return float(np.real(np.vdot(v, sx_even * v)))

    def cavity_rhs(t, y, x_val):
        xa, pa = y
        return np.array([
            -params.delta_c * pa - 0.5 * params.kappa * xa,
            params.delta_c * xa - 0.5 * params.kappa * pa + 2 * (eps_at(t) - params.g * x_val),
        ])

    def rk4(t, y, span, x_func):
        h = span / substeps
        for i in range(substeps):
            ti = t + i * h
            k1 = cavity_rhs(ti, y, x_func(ti))
            k2 = cavity_rhs(ti + h / 2, y + h / 2 * k1, x_func(ti + h / 2))
            k3 = cavity_rhs(ti + h / 2, y + h / 2 * k2, x_func(ti + h / 2))
            k4 = cavity_rhs(ti + h, y + h * k3, x_func(ti + h))
            y = y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        return y

    y = np.array([x_a, p_a], dtype=float)
    rows = []

    def record(t, v, y):
        b = params.bx - params.g * y[0]
        full = _embed(n, v)
        gs = ed_ground(n, b, j0).vector
        rows.append((t, b, x_of(v), abs(np.vdot(gs, full)) ** 2, 0.0, y[0]))

    record(0.0, psi, y)
    steps = int(round(total_time / interval))
    for step in range(steps):
        t0 = step * interval
        x0 = x_of(psi)
        y_mid = rk4(t0, y, interval / 2, lambda t: x0)
        b_mid = params.bx - params.g * y_mid[0]
        psi = _propagator(_even_hamiltonian(n, b_mid, j0), interval) @ psi
        x1 = x_of(psi)
        y = rk4(t0, y, interval, lambda t: x0 + (x1 - x0) * (t - t0) / interval)
        if (step + 1) % sample_every == 0:
            record((step + 1) * interval, psi, y)
    t, b, x, p_g, odd, xa = (np.array(col) for col in zip(*rows))
    return EDTrajectory(t=t, b=b, x=x, p_g=p_g, odd_weight=odd, final=_embed(n, psi), x_a=xa)
