"""Self-consistent stationary states of the driven cavity + Ising chain.

Setting the quadrature derivatives to zero gives, for a stationary
displacement x_a with the chain in its ground state at ``B = bx - g x_a``,

    eps(x_a) = g X_s(bx - g x_a) - x_a (delta_c^2 + kappa^2/4) / (2 delta_c)

This is single valued in x_a, so every stationary point at a given drive is a
root of ``eps(x_a) - eps`` and the folds of the curve (``d eps / d x_a = 0``)
are the bifurcation points. Stability follows from the sign of the slope for
``delta_c < 0``.
"""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .errors import InvalidParameterError, NoBistabilityError
from .tfim import ModelParams, x_average_ground, x_derivative_ground

log = logging.getLogger(__name__)

X_TOL = 1e-10
DEFAULT_SAMPLES = 4000


@dataclass(frozen=True)
class StationaryPoint:
    x_a: float
    p_a: float
    eps: float
    b_eff: float
    x_s: float
    slope: float
    stable: bool
    secular: tuple[complex, complex]


@dataclass(frozen=True)
class BifurcationPoint:
    eps: float
    x_a: float
    b_eff: float
    x_prime: float


@dataclass(frozen=True)
class BifurcationResult:
    """Lower (``eps1``) and upper (``eps2``) fold of the stationary curve.

    ``eps1`` closes the bistable window on the ferromagnetic side (larger
    x_a), ``eps2`` on the paramagnetic side.
    """

    lower: BifurcationPoint
    upper: BifurcationPoint

    @property
    def eps1(self) -> float:
        return self.lower.eps

    @property
    def eps2(self) -> float:
        return self.upper.eps


def epsilon_of_xa(x_a, params: ModelParams):
    """Drive amplitude for which ``x_a`` is a stationary displacement."""
    factor = params.cavity_factor
    b = params.bx - params.g * np.asarray(x_a, dtype=float)
    out = params.g * x_average_ground(b, params) - np.asarray(x_a) * factor
    return float(out) if np.ndim(out) == 0 else out


def x_prime(x_a, params: ModelParams):
    """dX_s/dx_a = -g dX/dB at the effective field."""
    b = params.bx - params.g * np.asarray(x_a, dtype=float)
    return -params.g * x_derivative_ground(b, params)


def slope(x_a, params: ModelParams):
    """d eps / d x_a = g X' - (delta_c^2 + kappa^2/4) / (2 delta_c)."""
    return params.g * x_prime(x_a, params) - params.cavity_factor


def secular_frequencies(x_a: float, params: ModelParams) -> tuple[complex, complex]:
    """Eigenvalues of the linearised quadrature dynamics around ``x_a``."""
    dc = params.delta_c
    root = np.sqrt(complex(2 * dc * params.g * x_prime(x_a, params) - dc**2))
    return (-params.kappa / 2 + root, -params.kappa / 2 - root)


def default_scan(params: ModelParams, eps: float | None = None) -> tuple[float, float]:
    """x_a interval covering B_eff from above bx down past zero.

    When ``eps`` is given the interval is widened so that it also contains
    every possible root: since |X_s| <= N, a root satisfies
    x_a = (g X_s - eps) / factor with X_s in [-N, N].
    """
    lo, hi = -10.0, 10.0
    if params.g > 0:
        hi = params.bx / params.g + 10.0
    if eps is not None:
        factor = params.cavity_factor
        ends = [(params.g * s * params.n - eps) / factor for s in (-1, 1)]
        lo = min(lo, min(ends) - 1.0)
        hi = max(hi, max(ends) + 1.0)
    return lo, hi


def _sign_changes(values: np.ndarray) -> np.ndarray:
    s = np.sign(values)
    return np.flatnonzero(s[:-1] * s[1:] <= 0)


def _roots_on_grid(func, grid: np.ndarray, values: np.ndarray) -> list[float]:
    roots = []
    for i in _sign_changes(values):
        a, b = grid[i], grid[i + 1]
        if values[i] == 0:
            root = a
        elif values[i + 1] == 0:
            continue  # picked up as the left end of the next interval
        else:
            root = brentq(func, a, b, xtol=X_TOL, rtol=4 * np.finfo(float).eps)
        if not roots or abs(root - roots[-1]) > 10 * X_TOL:
            roots.append(float(root))
    return roots


def make_point(x_a: float, params: ModelParams) -> StationaryPoint:
    sl = float(slope(x_a, params))
    b = params.bx - params.g * x_a
    return StationaryPoint(
        x_a=float(x_a),
        p_a=float(-(params.kappa / (2 * params.delta_c)) * x_a),
        eps=epsilon_of_xa(x_a, params),
        b_eff=float(b),
        x_s=x_average_ground(b, params),
        slope=sl,
        stable=sl > 0,
        secular=secular_frequencies(x_a, params),
    )


def stationary_points(eps: float, params: ModelParams, scan: tuple[float, float] | None = None,
                      samples: int = DEFAULT_SAMPLES) -> list[StationaryPoint]:
    """All stationary points at drive ``eps``, sorted by x_a.

    Roots of ``eps(x_a) - eps`` are bracketed on a uniform grid of ``samples``
    points over ``scan`` and polished with Brent's method.
    """
    lo, hi = scan if scan is not None else default_scan(params, eps)
    if not hi > lo or samples < 2:
        raise InvalidParameterError(f"empty scan range [{lo}, {hi}] with {samples} samples")
    grid = np.linspace(lo, hi, samples)
    values = epsilon_of_xa(grid, params) - eps
    roots = _roots_on_grid(lambda x: epsilon_of_xa(x, params) - eps, grid, values)
    return [make_point(x, params) for x in roots]


def find_bifurcations(params: ModelParams, scan: tuple[float, float] | None = None,
                      samples: int = DEFAULT_SAMPLES) -> BifurcationResult:
    """Locate the two folds d eps / d x_a = 0 of the stationary curve."""
    if params.g == 0:
        raise NoBistabilityError("g = 0: eps(x_a) is linear, no bistable regime")
    lo, hi = scan if scan is not None else default_scan(params)
    grid = np.linspace(lo, hi, samples)
    roots = _roots_on_grid(lambda x: slope(x, params), grid, slope(grid, params))
    if len(roots) < 2:
        raise NoBistabilityError(
            f"no bistable regime: slope has {len(roots)} sign change(s) on [{lo:.4g}, {hi:.4g}]"
        )
    if len(roots) > 2:
        log.warning("slope has %d zeros; using the outermost pair", len(roots))
    points = []
    for x in (roots[-1], roots[0]):
        points.append(BifurcationPoint(
            eps=epsilon_of_xa(x, params),
            x_a=x,
            b_eff=params.bx - params.g * x,
            x_prime=float(x_prime(x, params)),
        ))
    lower, upper = sorted(points, key=lambda p: p.eps)
    return BifurcationResult(lower=lower, upper=upper)


@dataclass(frozen=True)
class PhaseDiagramRow:
    axis: str
    value: float
    result: BifurcationResult | None
    reason: str = ""

    @property
    def bistable(self) -> bool:
        return self.result is not None


_AXES = {"delta_c": "delta_c", "bx": "bx", "g": "g", "kappa": "kappa"}


def _phase_row(args) -> PhaseDiagramRow:
    params, axis, value = args
    try:
        res = find_bifurcations(params.with_(**{_AXES[axis]: value}))
    except (NoBistabilityError, InvalidParameterError) as exc:
        return PhaseDiagramRow(axis, float(value), None, str(exc))
    return PhaseDiagramRow(axis, float(value), res)


def phase_diagram(params: ModelParams, axis: str, values, jobs: int = 1) -> list[PhaseDiagramRow]:
    """Bifurcation points along a grid of ``axis`` values ("delta_c", "bx", ...).

    Grid points without bistability are returned with ``result=None``.
    Rows come back in the order of ``values`` for any ``jobs``.
    """
    if axis not in _AXES:
        raise InvalidParameterError(f"unknown axis {axis!r}; expected one of {sorted(_AXES)}")
    tasks = [(params, axis, float(v)) for v in values]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(_phase_row, tasks))
    return [_phase_row(t) for t in tasks]
