"""Fixed-step RK4 and embedded Dormand-Prince 5(4) time stepping."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Optional

import numpy as np

from . import _accel, kernels
from .dynamics import System
from .errors import AbortedDomainError, ConfigError, DomainError, StepUnderflow
from .model import ThermoPhaseState


class Method(str, Enum):
    RK4_FIXED = "RK4Fixed"
    EMBEDDED_ADAPTIVE = "EmbeddedAdaptive"


@dataclass(frozen=True)
class IntegratorConfig:
    method: Method = Method.EMBEDDED_ADAPTIVE
    t_end: float = 1.0
    dt: float = 1e-3  # fixed step, or first trial step of the adaptive method
    rtol: float = 1e-8
    atol: float = 1e-12
    dt_min: float = 1e-14
    dt_max: float = math.inf
    record_stride: int = 1
    max_steps: int = 50_000_000
    use_kernel: bool = True  # compiled RK4 loop when the system provides a kernel

    def __post_init__(self):
        object.__setattr__(self, "method", Method(self.method))
        if not self.t_end >= 0:
            raise ConfigError(f"t_end must be >= 0, got {self.t_end}")
        if not self.dt > 0:
            raise ConfigError(f"dt must be > 0, got {self.dt}")
        if not (self.rtol > 0 and self.atol > 0):
            raise ConfigError("rtol and atol must be > 0")
        if not (0 < self.dt_min <= self.dt_max):
            raise ConfigError("need 0 < dt_min <= dt_max")
        if int(self.record_stride) < 1:
            raise ConfigError("record_stride must be >= 1")

    def replace(self, **kw) -> "IntegratorConfig":
        from dataclasses import replace

        return replace(self, **kw)


@dataclass
class Trajectory:
    """Recorded samples of one integration run.

    ``observables`` maps names (H, T, sigma, then class-specific extras) to
    arrays aligned with ``t``. ``aborted`` holds the reason when a domain
    error stopped the run early.
    """

    t: np.ndarray
    y: np.ndarray
    system: Optional[System] = None
    observables: dict = field(default_factory=dict)
    aborted: Optional[str] = None
    n_steps: int = 0
    n_rejected: int = 0

    def __len__(self):
        return self.t.size

    def state(self, i: int) -> ThermoPhaseState:
        return self.system.unpack(float(self.t[i]), self.y[i])

    @property
    def final_state(self) -> ThermoPhaseState:
        return self.state(-1)

    def __getitem__(self, name: str) -> np.ndarray:
        return self.observables[name]

    def raise_if_aborted(self) -> "Trajectory":
        if self.aborted:
            raise AbortedDomainError(self.aborted)
        return self


def step_rk4(f: Callable, t: float, y, dt: float) -> np.ndarray:
    """Classical fourth-order Runge-Kutta step of y' = f(t, y)."""
    y = np.asarray(y, dtype=float)
    k1 = f(t, y)
    k2 = f(t + 0.5 * dt, y + 0.5 * dt * k1)
    k3 = f(t + 0.5 * dt, y + 0.5 * dt * k2)
    k4 = f(t + dt, y + dt * k3)
    return y + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


# Dormand-Prince 5(4)
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B5 = np.array(_A[6] + [0.0])
_B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])
_E = _B5 - _B4


def _observables(system, ts, ys) -> dict:
    if system is None or not hasattr(system, "observables") or len(ts) == 0:
        return {}
    rows = [system.observables(float(t), y) for t, y in zip(ts, ys)]
    return {k: np.array([row[k] for row in rows], dtype=float) for k in rows[0]}


def _finish(system, ts, ys, aborted, n_steps, n_rejected, observe=True) -> Trajectory:
    ts = np.asarray(ts, dtype=float)
    ys = np.asarray(ys, dtype=float).reshape(len(ts), -1)
    if not np.all(np.isfinite(ys)):
        raise AssertionError("non-finite value in an accepted sample")
    if np.any(np.diff(ts) <= 0):
        raise AssertionError("sample times are not strictly increasing")
    obs = _observables(system, ts, ys) if observe else {}
    return Trajectory(ts, ys, system, obs, aborted, n_steps, n_rejected)


def _kernel_rk4(system, t0, y0, config, nsteps, dt):
    ts, ys, nrec, status = kernels.rk4_run(
        system.kernel, float(t0), np.ascontiguousarray(y0, dtype=float), float(dt), int(nsteps),
        int(config.record_stride), system.kernel_params,
    )
    return ts[:nrec], ys[:nrec], status


def integrate(field, state0, config: IntegratorConfig, observe: bool = True, t0: float = 0.0) -> Trajectory:
    """Integrate ``field`` from ``state0`` to ``config.t_end``.

    ``field`` is a :class:`System` (then ``state0`` is a ThermoPhaseState or a
    packed vector starting at ``t0``) or a plain callable ``f(t, y)`` with an
    array ``state0``. Domain errors end the run early with ``Trajectory.aborted`` set.
    """
    if isinstance(field, System):
        system = field
        if isinstance(state0, ThermoPhaseState):
            t0, y0 = state0.t, system.pack(state0)
        else:
            y0 = np.asarray(state0, dtype=float)
        f = system.rhs
    else:
        system = None
        f = field
        y0 = np.asarray(state0, dtype=float).reshape(-1)
    y0 = np.array(y0, dtype=float)
    t_end = t0 + config.t_end
    if config.t_end == 0:
        return _finish(system, [t0], [y0], None, 0, 0, observe)
    if config.method == Method.RK4_FIXED:
        return _integrate_rk4(system, f, t0, y0, t_end, config, observe)
    return _integrate_dopri(system, f, t0, y0, t_end, config, observe)


def integrate_at(field, state0, times, config: IntegratorConfig) -> np.ndarray:
    """Packed states at the given increasing ``times`` (the first is the start).

    Each interval is a separate run, so two formulations integrated this way
    are compared at identical instants without interpolation.
    """
    times = np.asarray(times, dtype=float)
    if isinstance(state0, ThermoPhaseState):
        y = field.pack(state0)
    else:
        y = np.asarray(state0, dtype=float)
    out = [y]
    for ta, tb in zip(times[:-1], times[1:]):
        tr = integrate(field, y, config.replace(t_end=tb - ta), observe=False, t0=ta)
        tr.raise_if_aborted()
        y = tr.y[-1]
        out.append(y)
    return np.array(out)


def _integrate_rk4(system, f, t0, y0, t_end, config, observe):
    span = t_end - t0
    nsteps = max(1, int(math.ceil(span / config.dt - 1e-9)))
    if nsteps > config.max_steps:
        raise ConfigError(f"{nsteps} steps exceed max_steps={config.max_steps}")
    dt = span / nsteps
    stride = int(config.record_stride)
    if config.use_kernel and system is not None and getattr(system, "kernel", None) is not None:
        ts, ys, status = _kernel_rk4(system, t0, y0, config, nsteps, dt)
        aborted = None
        if status != kernels.OK:
            aborted = f"kernel status {status} ({_status_text(status)}) after t={ts[-1]}"
        return _finish(system, ts, ys, aborted, len(ts) - 1, 0, observe)
    ts, ys = [t0], [y0]
    y = y0
    aborted = None
    for i in range(nsteps):
        t = t0 + i * dt
        try:
            y_new = step_rk4(f, t, y, dt)
        except DomainError as exc:
            aborted = f"{type(exc).__name__}: {exc}"
            break
        if not np.all(np.isfinite(y_new)):
            aborted = f"non-finite state after t={t}"
            break
        y = y_new
        if (i + 1) % stride == 0 or i + 1 == nsteps:
            ts.append(t0 + (i + 1) * dt)
            ys.append(y)
    return _finish(system, ts, ys, aborted, nsteps, 0, observe)


def _status_text(status):
    return {kernels.DOMAIN: "domain error", kernels.NONPOSITIVE_T: "non-positive temperature",
            kernels.NONFINITE: "non-finite rates"}.get(status, "unknown")


def _integrate_dopri(system, f, t0, y0, t_end, config, observe):
    rtol, atol = config.rtol, config.atol
    stride = int(config.record_stride)
    ts, ys = [t0], [y0]
    t, y = t0, y0
    dt = min(config.dt, config.dt_max, t_end - t0)
    try:
        k1 = np.asarray(f(t, y), dtype=float)
    except DomainError as exc:
        return _finish(system, ts, ys, f"{type(exc).__name__}: {exc}", 0, 0, observe)
    k = [k1] + [None] * 6
    n_acc = n_rej = 0
    last_domain = None
    while t < t_end:
        if n_acc + n_rej >= config.max_steps:
            raise StepUnderflow(f"max_steps={config.max_steps} reached at t={t}")
        last = t + dt >= t_end - 1e-14 * max(1.0, abs(t_end))
        h = t_end - t if last else dt
        try:
            for s in range(1, 7):
                ys_stage = y + h * sum(a * k[j] for j, a in enumerate(_A[s]) if a != 0.0)
                k[s] = np.asarray(f(t + _C[s] * h, ys_stage), dtype=float)
            y_new = ys_stage  # stage 7 evaluates at the 5th-order solution (FSAL)
            err_vec = h * sum(e * kj for e, kj in zip(_E, k) if e != 0.0)
            scale = atol + rtol * np.maximum(np.abs(y), np.abs(y_new))
            err = float(np.max(np.abs(err_vec) / scale)) if y.size else 0.0
            if not np.isfinite(err) or not np.all(np.isfinite(y_new)):
                raise DomainError("non-finite trial step")
            last_domain = None
        except DomainError as exc:
            last_domain = f"{type(exc).__name__}: {exc}"
            err = math.inf
        if err <= 1.0:
            t = t_end if last else t + h
            y = y_new
            k[0] = k[6]
            n_acc += 1
            if n_acc % stride == 0 or t >= t_end:
                ts.append(t)
                ys.append(y)
            factor = 5.0 if err == 0 else min(5.0, max(0.2, 0.9 * err ** -0.2))
            dt = min(config.dt_max, h * factor) if not last else dt
        else:
            n_rej += 1
            factor = 0.25 if not np.isfinite(err) else max(0.2, 0.9 * err ** -0.2)
            dt = h * min(1.0, factor)
            if dt < config.dt_min:
                if last_domain is not None:
                    return _finish(system, ts, ys, f"{last_domain} (step {dt:.3g} below dt_min at t={t})", n_acc, n_rej, observe)
                raise StepUnderflow(f"step size {dt:.3g} below dt_min={config.dt_min:g} at t={t}")
    return _finish(system, ts, ys, None, n_acc, n_rej, observe)


def backend() -> str:
    return _accel.backend()
