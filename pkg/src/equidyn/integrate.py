"""Explicit Runge-Kutta integration of N-agent fields, batched over initial states."""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import ConfigError, DomainViolation
from .families import DynamicsFamily, arclength
from .invariants import frame_arrays
from .lie import Configuration, Scenario, canonicalize, get_chart


class Scheme(str, Enum):
    RK4_FIXED = "rk4_fixed"
    RK45_ADAPTIVE = "rk45_adaptive"


class Termination(str, Enum):
    COMPLETED = "completed"
    DOMAIN_VIOLATION = "domain_violation"
    STEP_UNDERFLOW = "step_underflow"


@dataclass(frozen=True)
class IntegratorConfig:
    scheme: Scheme = Scheme.RK4_FIXED
    dt: float = 1e-3
    t_end: float = 1.0
    arclength: bool = False
    record_every: int = 1
    rtol: float = 1e-8
    atol: float = 1e-10
    dt_min: float = 1e-12
    dt_max: float = 0.1

    def __post_init__(self):
        try:
            object.__setattr__(self, "scheme", Scheme(self.scheme))
        except ValueError:
            raise ConfigError(f"unknown integration scheme {self.scheme!r}") from None
        if not (self.dt > 0 and self.dt_min > 0 and self.dt_max >= self.dt_min):
            raise ConfigError("step sizes must be positive with dt_min <= dt_max")
        if not (0 < self.rtol < 1 and 0 < self.atol < 1):
            raise ConfigError("rtol and atol must lie in (0, 1)")
        if not (self.t_end >= 0 and math.isfinite(self.t_end)):
            raise ConfigError("t_end must be finite and nonnegative")
        if not (isinstance(self.record_every, (int, np.integer)) and self.record_every >= 1):
            raise ConfigError("record_every must be an integer >= 1")

    def replace(self, **changes) -> "IntegratorConfig":
        return IntegratorConfig(**{**self.__dict__, **changes})


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Recorded snapshots. ``states`` has shape (K, D), or (K, B, D) for a batch."""

    scenario: Scenario
    n_agents: int
    c: float
    times: np.ndarray
    states: np.ndarray
    termination: Termination
    reason: str = ""

    @property
    def completed(self) -> bool:
        return self.termination is Termination.COMPLETED

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]

    def configurations(self) -> list[Configuration]:
        if self.states.ndim != 2:
            raise ConfigError("configurations() needs a single (unbatched) trajectory")
        return [Configuration(self.scenario, self.n_agents, s, self.c) for s in self.states]

    def blocks(self) -> np.ndarray:
        d = get_chart(self.scenario, self.c).dim_per_agent
        return self.states.reshape(self.states.shape[:-1] + (self.n_agents, d))


def _post_step(scenario, n_agents, coords):
    """Wrap angles to [0, 2 pi) and project sphere states back onto the sphere."""
    coords = canonicalize(scenario, coords, n_agents)
    if scenario is Scenario.SPHERE_SO3:
        blocks = coords.reshape(coords.shape[:-1] + (n_agents, 3))
        blocks = blocks / np.linalg.norm(blocks, axis=-1, keepdims=True)
        coords = blocks.reshape(coords.shape)
    return coords


def _rk4_step(f, y, h):
    k1 = f(y)
    k2 = f(y + 0.5 * h * k1)
    k3 = f(y + 0.5 * h * k2)
    k4 = f(y + h * k3)
    return y + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)


# Dormand-Prince 5(4) tableau
_DP_C = np.array([0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1, 1])
_DP_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_DP_B5 = np.array([35 / 384, 0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0])
_DP_B4 = np.array([5179 / 57600, 0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])


def _dp_step(f, y, h, k1):
    ks = [k1]
    for row in _DP_A[1:]:
        incr = sum(a * k for a, k in zip(row, ks))
        ks.append(f(y + h * incr))
    y5 = y + h * sum(b * k for b, k in zip(_DP_B5, ks))
    y4 = y + h * sum(b * k for b, k in zip(_DP_B4, ks))
    return y5, y5 - y4, ks[-1]


def integrate_coords(field, scenario, n_agents, y0, cfg: IntegratorConfig, c: float = 1.0):
    """Integrate a batched field on raw coordinates; returns a Trajectory.

    ``field(coords)`` must raise DomainViolation when a stage leaves the domain.
    """
    scenario = get_chart(scenario, c).scenario
    y = np.array(y0, dtype=float)
    times, states = [0.0], [y.copy()]
    termination, reason = Termination.COMPLETED, ""

    if cfg.scheme is Scheme.RK4_FIXED:
        steps = max(1, math.ceil(cfg.t_end / cfg.dt - 1e-9)) if cfg.t_end > 0 else 0
        h = cfg.t_end / steps if steps else 0.0
        for k in range(1, steps + 1):
            try:
                y_new = _rk4_step(field, y, h)
                if not np.all(np.isfinite(y_new)):
                    raise DomainViolation("state became non-finite")
                y_new = _post_step(scenario, n_agents, y_new)
                field(y_new)  # the accepted state must itself be admissible
            except DomainViolation as exc:
                termination, reason = Termination.DOMAIN_VIOLATION, f"t={k * h:.6g}: {exc}"
                break
            y = y_new
            if k % cfg.record_every == 0 or k == steps:
                times.append(k * h)
                states.append(y.copy())
    else:
        t, h, accepted = 0.0, min(cfg.dt, cfg.dt_max), 0
        try:
            k1 = field(y)
        except DomainViolation as exc:
            k1, termination, reason = None, Termination.DOMAIN_VIOLATION, f"t=0: {exc}"
        while k1 is not None and t < cfg.t_end * (1 - 1e-15):
            h = min(h, cfg.t_end - t)
            try:
                y_new, err, k_last = _dp_step(field, y, h, k1)
                if not np.all(np.isfinite(y_new)):
                    raise DomainViolation("state became non-finite")
                y_new = _post_step(scenario, n_agents, y_new)
                k_last = field(y_new)
            except DomainViolation as exc:
                if h / 2 < cfg.dt_min:
                    termination, reason = Termination.DOMAIN_VIOLATION, f"t={t:.6g}: {exc}"
                    break
                h /= 2
                continue
            scale = cfg.atol + cfg.rtol * np.maximum(np.abs(y), np.abs(y_new))
            # angle wrapping may shift y_new by 2 pi; the error estimate is unaffected
            norm = float(np.sqrt(np.mean((err / scale) ** 2, axis=-1)).max()) if err.size else 0.0
            if norm <= 1.0:
                t += h
                y, k1 = y_new, k_last
                accepted += 1
                if accepted % cfg.record_every == 0 or t >= cfg.t_end * (1 - 1e-15):
                    times.append(t)
                    states.append(y.copy())
            factor = 0.9 * norm ** -0.2 if norm > 0 else 5.0
            h = min(cfg.dt_max, h * min(5.0, max(0.2, factor)))
            if h < cfg.dt_min and t < cfg.t_end * (1 - 1e-15):
                termination, reason = Termination.STEP_UNDERFLOW, f"t={t:.6g}: step below {cfg.dt_min:g}"
                break

    return Trajectory(scenario, n_agents, c, np.array(times), np.array(states), termination, reason)


def integrate(f: DynamicsFamily, x0, cfg: IntegratorConfig | None = None) -> Trajectory:
    """Integrate ``f`` from a Configuration, or from a (B, D) batch of coordinates."""
    cfg = cfg or IntegratorConfig()
    family = arclength(f) if cfg.arclength else f
    if isinstance(x0, Configuration):
        if x0.scenario is not f.scenario or x0.n_agents != f.n_agents:
            raise ConfigError("initial configuration does not match the family")
        coords = x0.coords
    else:
        coords = np.asarray(x0, dtype=float)
    if not np.all(family.valid_mask(coords)):
        raise DomainViolation(f"initial state outside the domain of {f.kind}")
    return integrate_coords(family.field_coords, f.scenario, f.n_agents, coords, cfg, f.c)


@dataclass(frozen=True, eq=False)
class QuotientSeries:
    times: np.ndarray
    names: tuple
    values: np.ndarray  # (K, len(names))
    truncated: bool
    reason: str = ""

    def __getitem__(self, name: str) -> np.ndarray:
        return self.values[:, self.names.index(name)]


def quotient_observable(traj: Trajectory) -> QuotientSeries:
    """Invariant frame along a single trajectory, truncated at the first invalid snapshot."""
    if traj.states.ndim != 2:
        raise ConfigError("quotient_observable needs a single trajectory")
    fa = frame_arrays(traj.scenario, traj.blocks(), traj.c)
    valid = np.asarray(fa.valid)
    stop = len(traj.times) if valid.all() else int(np.argmin(valid))
    values = np.stack([fa.values[k] for k in fa.names], axis=-1) if fa.names else \
        np.zeros((len(traj.times), 0))
    return QuotientSeries(traj.times[:stop], fa.names, values[:stop], stop < len(traj.times),
                          "" if stop == len(traj.times) else fa.reason)
