"""Coupled time evolution of the cavity quadratures and the mode pairs.

The cavity obeys

    dx_a/dt = -delta_c p_a - kappa/2 x_a
    dp_a/dt =  delta_c x_a - kappa/2 p_a + 2 (eps(t) - g X)

and each (k, -k) pair evolves under the instantaneous field
``B_eff = bx - g x_a`` with the traceless 2x2 generator built from
eps_k cos 2theta_k and eps_k sin 2theta_k. The common phase of the pairs is
not tracked. Integration is fixed-step RK4 (by default in the interaction
picture of the per-step frozen spin generator, see :class:`IntegratorConfig`);
per-pair norms are monitored but never renormalised.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.integrate import trapezoid

from . import _kernels
from .errors import BranchNotFoundError, IntegrationQualityError, InvalidParameterError
from .stationary import (
    BifurcationResult,
    StationaryPoint,
    find_bifurcations,
    make_point,
    stationary_points,
)
from .tfim import (
    ModelParams,
    SpinModeState,
    batch_observables,
    ground_mode_state,
    make_kgrid,
    mode_spectrum,
)

log = logging.getLogger(__name__)

# samples per compiled-kernel call; bounds the memory held for amplitudes
_CHUNK = 2048


@dataclass(frozen=True)
class CavityState:
    x_a: float
    p_a: float

    @property
    def amplitude(self) -> complex:
        """<a> = (x_a + i p_a) / 2."""
        return complex(self.x_a, self.p_a) / 2


@dataclass(frozen=True)
class SystemState:
    t: float
    spins: SpinModeState
    cavity: CavityState
    eps_current: float

    def b_eff(self, params: ModelParams) -> float:
        return params.bx - params.g * self.cavity.x_a


@dataclass(frozen=True)
class DriveSchedule:
    """Piecewise-linear drive eps(t) given by knots.

    Beyond the last knot the drive holds its final value; integration runs
    until ``t_end``.
    """

    kind: str
    times: tuple
    values: tuple
    eps_before: float | None = None

    def __post_init__(self):
        if len(self.times) != len(self.values) or len(self.times) < 1:
            raise InvalidParameterError("schedule needs matching, non-empty knot lists")
        if any(b < a for a, b in zip(self.times, self.times[1:])):
            raise InvalidParameterError("schedule knot times must be non-decreasing")

    @property
    def t_end(self) -> float:
        return float(self.times[-1])

    def at(self, t):
        return np.interp(t, self.times, self.values)

    @classmethod
    def constant(cls, eps: float, duration: float, t0: float = 0.0) -> "DriveSchedule":
        _positive(duration, "duration")
        return cls("constant", (t0, t0 + duration), (eps, eps))

    @classmethod
    def step(cls, eps_before: float, eps_after: float, duration: float) -> "DriveSchedule":
        """Drive switched from ``eps_before`` to ``eps_after`` at t = 0."""
        _positive(duration, "duration")
        return cls("step", (0.0, duration), (eps_after, eps_after), eps_before=eps_before)

    @classmethod
    def ramp(cls, eps0: float, epsf: float, t_ramp: float, park_fraction: float = 0.2,
             t0: float = 0.0) -> "DriveSchedule":
        """Linear ramp over ``t_ramp`` then parked at ``epsf`` for ``park_fraction * t_ramp``."""
        _positive(t_ramp, "t_ramp")
        if park_fraction < 0:
            raise InvalidParameterError("park_fraction must be >= 0")
        t1 = t0 + t_ramp
        return cls("linear-ramp-with-park", (t0, t1, t1 + park_fraction * t_ramp), (eps0, epsf, epsf))

    @classmethod
    def piecewise(cls, times, values) -> "DriveSchedule":
        return cls("piecewise", tuple(float(t) for t in times), tuple(float(v) for v in values))


def _positive(value, name):
    if not value > 0:
        raise InvalidParameterError(f"{name} must be positive, got {value!r}")


METHODS = ("lawson-rk4", "rk4", "magnus")


@dataclass(frozen=True)
class IntegratorConfig:
    """Fixed-step integration settings.

    ``method`` is one of

    * ``"lawson-rk4"`` (default): classical RK4 in the interaction picture of
      the spin generator frozen at the start of each step. Exact at fixed
      points and free of the per-step norm loss of plain RK4.
    * ``"rk4"``: classical RK4 on the full equations. Loses about
      ``(eps_k dt)^6 / 72`` of norm per step and pair.
    * ``"magnus"``: unitary fourth-order Magnus step, spin-only runs only.
    """

    dt: float = 0.005
    sample_stride: int = 20
    max_norm_drift: float = 1e-6
    method: str = "lawson-rk4"

    def __post_init__(self):
        _positive(self.dt, "dt")
        if int(self.sample_stride) != self.sample_stride or self.sample_stride < 1:
            raise InvalidParameterError("sample_stride must be a positive integer")
        if self.method not in METHODS:
            raise InvalidParameterError(f"method must be one of {METHODS}, got {self.method!r}")


@dataclass(frozen=True)
class Trajectory:
    """Sampled observables. ``eps``, ``x_a`` and ``p_a`` are NaN for spin-only runs."""

    t: np.ndarray
    eps: np.ndarray
    x_a: np.ndarray
    p_a: np.ndarray
    b_eff: np.ndarray
    x_avg: np.ndarray
    p_g: np.ndarray
    n_ex: np.ndarray
    final: SystemState
    max_norm_drift: float

    def __len__(self):
        return len(self.t)

    def columns(self) -> dict[str, np.ndarray]:
        return {
            "t": self.t, "eps": self.eps, "x_a": self.x_a, "p_a": self.p_a,
            "b_eff": self.b_eff, "x_avg": self.x_avg, "p_g": self.p_g, "n_ex": self.n_ex,
        }

    def window(self, t_start: float, t_stop: float = np.inf) -> "Trajectory":
        keep = (self.t >= t_start) & (self.t <= t_stop)
        cols = {k: v[keep] for k, v in self.columns().items()}
        return Trajectory(**cols, final=self.final, max_norm_drift=self.max_norm_drift)

    @staticmethod
    def concatenate(first: "Trajectory", second: "Trajectory") -> "Trajectory":
        a, b = first.columns(), second.columns()
        skip = 1 if len(second) and len(first) and second.t[0] <= first.t[-1] else 0
        cols = {k: np.concatenate([a[k], b[k][skip:]]) for k in a}
        return Trajectory(**cols, final=second.final,
                          max_norm_drift=max(first.max_norm_drift, second.max_norm_drift))


def _steps_schedule(n_steps: int, stride: int) -> np.ndarray:
    full, rest = divmod(n_steps, stride)
    steps = np.full(full, stride, dtype=np.int64)
    if rest:
        steps = np.append(steps, rest)
    return steps


def _evolve(params: ModelParams, spins: SpinModeState, x_a: float, p_a: float, t0: float,
            t_end: float, knot_t, knot_v, coupled: bool, cfg: IntegratorConfig):
    k = make_kgrid(params.n).k
    if len(spins) != len(k):
        raise InvalidParameterError("initial state does not match params.n")
    n_steps = int(round((t_end - t0) / cfg.dt))
    if n_steps < 1:
        raise InvalidParameterError(f"nothing to integrate between t={t0} and t={t_end}")
    if abs(n_steps * cfg.dt - (t_end - t0)) > 1e-9 * max(1.0, t_end):
        log.warning("duration %.6g is not a multiple of dt=%g; stopping at %.6g",
                    t_end - t0, cfg.dt, t0 + n_steps * cfg.dt)
    steps = _steps_schedule(n_steps, int(cfg.sample_stride))
    ck, sk = np.cos(k), np.sin(k)
    knot_t = np.ascontiguousarray(knot_t, dtype=float)
    knot_v = np.ascontiguousarray(knot_v, dtype=float)
    U = np.array(spins.U, dtype=complex)
    V = np.array(spins.V, dtype=complex)
    x, p = float(x_a), float(p_a)

    drive0 = float(np.interp(t0, knot_t, knot_v))
    b0 = params.bx - params.g * x if coupled else drive0
    cols = {key: [np.array([val])] for key, val in
            (("t", t0), ("drive", drive0), ("x", x), ("p", p), ("b", b0))}
    obs = batch_observables(U[None], V[None], np.array([b0]), params.j0, k)
    cols.update({"x_avg": [obs[0]], "p_g": [obs[1]], "n_ex": [obs[2]]})
    drift = float(np.max(np.abs(np.abs(U) ** 2 + np.abs(V) ** 2 - 1)))

    steps_done = 0
    for start in range(0, len(steps), _CHUNK):
        block = steps[start:start + _CHUNK]
        t_block = t0 + steps_done * cfg.dt
        if cfg.method == "magnus":
            done, ts, ds, Us, Vs = _kernels.advance_bare_magnus(
                U, V, t_block, cfg.dt, block, knot_t, knot_v, ck, sk, params.j0)
            xs = ps = np.full_like(ts, np.nan)
        else:
            x, p, done, ts, ds, xs, ps, Us, Vs = _kernels.advance(
                x, p, U, V, t_block, cfg.dt, block, knot_t, knot_v, coupled,
                cfg.method == "lawson-rk4", ck, sk, params.j0, params.bx, params.g, params.kappa, params.delta_c,
                float(params.n),
            )
        steps_done += done
        bs = params.bx - params.g * xs if coupled else ds
        x_avg, p_g, n_ex = batch_observables(Us, Vs, bs, params.j0, k)
        drift = max(drift, float(np.max(np.abs(np.abs(Us) ** 2 + np.abs(Vs) ** 2 - 1))))
        for key, val in (("t", ts), ("drive", ds), ("x", xs), ("p", ps), ("b", bs),
                         ("x_avg", x_avg), ("p_g", p_g), ("n_ex", n_ex)):
            cols[key].append(val)
        if drift > cfg.max_norm_drift:
            raise IntegrationQualityError(
                f"per-pair norm drift {drift:.3g} exceeds {cfg.max_norm_drift:g} "
                f"by t={ts[-1]:.6g}; reduce dt (currently {cfg.dt:g})"
            )
    out = {key: np.concatenate(val) for key, val in cols.items()}
    return out, SpinModeState(U=U, V=V), x, p, drift


def integrate(initial: SystemState, schedule: DriveSchedule, cfg: IntegratorConfig,
              params: ModelParams) -> Trajectory:
    """Integrate from ``initial.t`` to ``schedule.t_end`` with fixed-step RK4."""
    if cfg.method == "magnus":
        raise InvalidParameterError("the Magnus step only applies to spin-only runs")
    out, spins, x, p, drift = _evolve(
        params, initial.spins, initial.cavity.x_a, initial.cavity.p_a, initial.t,
        schedule.t_end, schedule.times, schedule.values, True, cfg,
    )
    final = SystemState(t=float(out["t"][-1]), spins=spins, cavity=CavityState(x, p),
                        eps_current=float(out["drive"][-1]))
    return Trajectory(t=out["t"], eps=out["drive"], x_a=out["x"], p_a=out["p"], b_eff=out["b"],
                      x_avg=out["x_avg"], p_g=out["p_g"], n_ex=out["n_ex"],
                      final=final, max_norm_drift=drift)


@dataclass(frozen=True)
class StateDerivative:
    dx_a: float
    dp_a: float
    dU: np.ndarray
    dV: np.ndarray


def rhs(state: SystemState, eps: float, params: ModelParams) -> StateDerivative:
    """Time derivative of the full state at drive ``eps``."""
    k = make_kgrid(params.n).k
    dU = np.empty(len(k), dtype=complex)
    dV = np.empty(len(k), dtype=complex)
    dx, dp = _kernels.derivatives(
        state.cavity.x_a, state.cavity.p_a,
        np.array(state.spins.U, dtype=complex), np.array(state.spins.V, dtype=complex),
        float(eps), True, np.cos(k), np.sin(k), params.j0, params.bx, params.g,
        params.kappa, params.delta_c, float(params.n), dU, dV,
    )
    return StateDerivative(dx_a=dx, dp_a=dp, dU=dU, dV=dV)


def state_from_point(point: StationaryPoint, params: ModelParams, t: float = 0.0) -> SystemState:
    spins = ground_mode_state(mode_spectrum(point.b_eff, params))
    return SystemState(t=t, spins=spins, cavity=CavityState(point.x_a, point.p_a),
                       eps_current=point.eps)


def prepare_stationary_state(eps: float, branch, params: ModelParams) -> SystemState:
    """Stationary state at drive ``eps`` on the requested branch.

    ``branch`` is "paramagnetic" (smallest-x_a point, requires B_eff > j0),
    "ferromagnetic" (largest-x_a point, requires B_eff < j0) or an integer
    index into the x_a-sorted stationary points.
    """
    points = stationary_points(eps, params)
    labels = []
    for i, pt in enumerate(points):
        phase = "paramagnetic" if pt.b_eff > params.j0 else "ferromagnetic"
        labels.append(f"{i}: x_a={pt.x_a:.6g} ({phase}, {'stable' if pt.stable else 'unstable'})")
    available = "; ".join(labels) or "none"
    chosen = None
    if isinstance(branch, (int, np.integer)):
        if -len(points) <= branch < len(points):
            chosen = points[branch]
    elif branch == "paramagnetic":
        if points and points[0].b_eff > params.j0:
            chosen = points[0]
    elif branch == "ferromagnetic":
        if points and points[-1].b_eff < params.j0:
            chosen = points[-1]
    else:
        raise InvalidParameterError(f"unknown branch {branch!r}")
    if chosen is None:
        raise BranchNotFoundError(f"branch {branch!r} absent at eps={eps:.8g}; available: {available}")
    return state_from_point(chosen, params)


def prepare_fold_state(params: ModelParams, which: str = "upper",
                       bifurcation: BifurcationResult | None = None) -> SystemState:
    """Stationary state sitting exactly on a fold of the stationary curve.

    ``which="upper"`` is the end of the paramagnetic branch at eps2,
    ``"lower"`` the end of the ferromagnetic branch at eps1.
    """
    bif = bifurcation or find_bifurcations(params)
    fold = bif.upper if which == "upper" else bif.lower
    return state_from_point(make_point(fold.x_a, params), params)


def extract_tc_lambda(traj: Trajectory, j0: float, direction: str = "any",
                      t_min: float = -np.inf):
    """First time B_eff crosses ``j0`` after ``t_min`` and the slope there.

    ``t_c`` is linearly interpolated between the bracketing samples and
    ``lambda_c`` is the centred-difference derivative of B_eff interpolated
    to ``t_c``. ``direction`` selects "down", "up" or "any" crossings.
    Returns ``None`` when no crossing exists.
    """
    t, b = traj.t, traj.b_eff
    if len(t) < 3:
        return None
    d = b - j0
    below = d[1:] < 0
    above = d[1:] > 0
    down = (d[:-1] >= 0) & below
    up = (d[:-1] <= 0) & above
    mask = {"down": down, "up": up, "any": down | up}[direction] & (t[1:] > t_min)
    hits = np.flatnonzero(mask)
    if hits.size == 0:
        return None
    i = hits[0]
    frac = d[i] / (d[i] - d[i + 1])
    t_c = t[i] + frac * (t[i + 1] - t[i])
    rate = np.gradient(b, t)
    lam = rate[i] + frac * (rate[i + 1] - rate[i])
    return float(t_c), float(lam)


@dataclass(frozen=True)
class QuenchReport:
    trajectory: Trajectory
    eps_before: float
    eps_after: float
    initial: SystemState
    bifurcation: BifurcationResult
    t_c: float | None
    lambda_c: float | None
    p_g: float
    n_ex: float
    b_eff_end: float


def run_quench(params: ModelParams, delta_eps: float = 0.01, t_total: float = 400.0,
               cfg: IntegratorConfig | None = None, start: str = "fold") -> QuenchReport:
    """Sudden quench of the drive across the upper bifurcation point eps2.

    ``start="fold"`` prepares the stationary state at the fold itself
    (x_a and B_eff of eps2) and steps the drive from eps2 to
    ``eps2 + delta_eps``. ``start="below"`` prepares the paramagnetic state
    at ``eps2 - delta_eps/2`` and steps to ``eps2 + delta_eps/2``.
    """
    cfg = cfg or IntegratorConfig()
    bif = find_bifurcations(params)
    eps2 = bif.eps2
    if start == "fold":
        initial = prepare_fold_state(params, "upper", bif)
        eps_before, eps_after = eps2, eps2 + delta_eps
    elif start == "below":
        eps_before, eps_after = eps2 - delta_eps / 2, eps2 + delta_eps / 2
        initial = prepare_stationary_state(eps_before, "paramagnetic", params)
    else:
        raise InvalidParameterError(f"start must be 'fold' or 'below', got {start!r}")
    schedule = DriveSchedule.step(eps_before, eps_after, t_total)
    traj = integrate(initial, schedule, cfg, params)
    crossing = extract_tc_lambda(traj, params.j0, direction="down")
    t_c, lam = crossing if crossing else (None, None)
    return QuenchReport(
        trajectory=traj, eps_before=eps_before, eps_after=eps_after, initial=initial,
        bifurcation=bif, t_c=t_c, lambda_c=lam, p_g=float(traj.p_g[-1]),
        n_ex=float(traj.n_ex[-1]), b_eff_end=float(traj.b_eff[-1]),
    )


@dataclass(frozen=True)
class RampReport:
    trajectory: Trajectory
    t_ramp: float
    t_c: float | None
    lambda_c: float | None
    n_ex: float
    p_g: float
    b_eff_end_of_ramp: float
    b_eff_end: float


def _ramp_report(traj: Trajectory, t_ramp: float, j0: float, direction: str, t_min: float) -> RampReport:
    crossing = extract_tc_lambda(traj, j0, direction=direction, t_min=t_min)
    t_c, lam = crossing if crossing else (None, None)
    t_ramp_end = t_min + t_ramp if np.isfinite(t_min) else traj.t[0] + t_ramp
    return RampReport(
        trajectory=traj, t_ramp=t_ramp, t_c=t_c, lambda_c=lam,
        n_ex=float(traj.n_ex[-1]), p_g=float(traj.p_g[-1]),
        b_eff_end_of_ramp=float(np.interp(t_ramp_end, traj.t, traj.b_eff)),
        b_eff_end=float(traj.b_eff[-1]),
    )


def run_ramp(params: ModelParams, eps0: float, epsf: float, t_ramp: float,
             cfg: IntegratorConfig | None = None, park_fraction: float = 0.2,
             branch="paramagnetic") -> RampReport:
    """Linear drive ramp eps0 -> epsf over ``t_ramp``, then parked for ``park_fraction * t_ramp``."""
    cfg = cfg or IntegratorConfig()
    initial = prepare_stationary_state(eps0, branch, params)
    traj = integrate(initial, DriveSchedule.ramp(eps0, epsf, t_ramp, park_fraction), cfg, params)
    direction = "down" if epsf > eps0 else "up"
    return _ramp_report(traj, t_ramp, params.j0, direction, -np.inf)


@dataclass(frozen=True)
class HysteresisReport:
    up: RampReport
    down: RampReport

    @property
    def trajectory(self) -> Trajectory:
        return Trajectory.concatenate(self.up.trajectory, self.down.trajectory)

    def loop_area(self) -> float:
        """|closed integral of B_eff d eps| over the up and down sweeps."""
        traj = self.trajectory
        return float(abs(trapezoid(traj.b_eff, traj.eps)))


def run_hysteresis(params: ModelParams, eps0: float, epsf: float, t_ramp: float,
                   cfg: IntegratorConfig | None = None, park_fraction: float = 0.2,
                   branch="paramagnetic") -> HysteresisReport:
    """Ramp up with park, then ramp back down with park, continuing from the evolved state."""
    cfg = cfg or IntegratorConfig()
    initial = prepare_stationary_state(eps0, branch, params)
    up_sched = DriveSchedule.ramp(eps0, epsf, t_ramp, park_fraction)
    up = integrate(initial, up_sched, cfg, params)
    t1 = up.final.t
    down_sched = DriveSchedule.ramp(epsf, eps0, t_ramp, park_fraction, t0=t1)
    down = integrate(up.final, down_sched, cfg, params)
    first = "down" if epsf > eps0 else "up"
    second = "up" if first == "down" else "down"
    return HysteresisReport(
        up=_ramp_report(up, t_ramp, params.j0, first, -np.inf),
        down=_ramp_report(down, t_ramp, params.j0, second, t1),
    )


def run_linear_tfim(b0: float, rate: float, t_total: float, params: ModelParams,
                    cfg: IntegratorConfig | None = None,
                    initial: SpinModeState | None = None) -> Trajectory:
    """Bare chain (no cavity) under B(t) = b0 + rate * t, starting in the ground state of b0."""
    cfg = cfg or IntegratorConfig()
    spins = initial if initial is not None else ground_mode_state(mode_spectrum(b0, params))
    knots_t = (0.0, float(t_total))
    knots_b = (b0, b0 + rate * t_total)
    out, spins, _, _, drift = _evolve(params, spins, np.nan, np.nan, 0.0, t_total,
                                      knots_t, knots_b, False, cfg)
    nan = np.full_like(out["t"], np.nan)
    final = SystemState(t=float(out["t"][-1]), spins=spins, cavity=CavityState(np.nan, np.nan),
                        eps_current=np.nan)
    return Trajectory(t=out["t"], eps=nan, x_a=nan.copy(), p_a=nan.copy(), b_eff=out["b"],
                      x_avg=out["x_avg"], p_g=out["p_g"], n_ex=out["n_ex"],
                      final=final, max_norm_drift=drift)
