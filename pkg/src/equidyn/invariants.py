"""Jointly radial coordinates (invariant frames) for every scenario.

Each frame is a named list of functions of the configuration that are
constant on orbits of the diagonal action. Difference variables are taken
with respect to agent 1. Angular entries are reduced to (-pi, pi].

=====================  ====================================================
scenario               frame variables
=====================  ====================================================
SE2_PLANE              rho2..rhoN, th32..thN2 (polar data of Z_k = X_k - X_1)
REL_LINE   N=2         r = sqrt(c^2 dT^2 - dx^2)
           N>=3        m{j}{k} = Minkowski products Z_j.Z_k, w{j}{k} = Z_j ^ Z_k
REL_PLANE  N=2         r;   N>=3: m{j}{k}
CIRCLE                 d21..dN1 = th_k - th_1 (alias ``a`` for N=2)
SPHERE_SO2_STEREO      rho1..rhoN, th21..thN1
SPHERE_SO3             d{j}{k}, pairwise geodesic distances
SL2_PLANE              w12 = X1 ^ X2, (p_i, q_i) = [X1|X2]^-1 X_i for i >= 3
UNICYCLE               rho_k, al_k = alpha_k - th_1, th{k}1 = th_k - th_1
REL_UNICYCLE           r_i, a_i = th_i - al_i, da_i = al_i - al_1 (i >= 2);
                       aliases r, a for N=1
SU2_QUANTUM            omega, delta1, delta2, re_a, im_a
=====================  ====================================================
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import quantum
from .errors import DomainViolation
from .expr import ParamExpr, evaluate
from .lie import TAU, Configuration, Scenario, flat_to_complex, generator_coords, get_chart, reduce_angle
from .numdiff import directional_derivative

SMALL = 1e-12


@dataclass(frozen=True, eq=False)
class InvariantFrame:
    scenario: Scenario
    names: tuple[str, ...]
    values: np.ndarray
    valid: bool
    reason: str = ""
    periods: tuple[float, ...] = ()

    def as_dict(self) -> dict[str, float]:
        if not self.valid:
            raise DomainViolation(f"invalid invariant frame: {self.reason}")
        return dict(zip(self.names, map(float, self.values)))


@dataclass(frozen=True)
class FrameArrays:
    """Batched frame data: ``values[name]`` has the batch shape."""

    names: tuple[str, ...]
    values: dict
    periods: dict
    valid: np.ndarray
    reason: str


def _polar(Z):
    return np.hypot(Z[..., 0], Z[..., 1]), np.arctan2(Z[..., 1], Z[..., 0])


def _wedge(a, b):
    return a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]


def frame_arrays(scenario: Scenario, blocks, c: float = 1.0) -> FrameArrays:
    """Compute the invariant frame on batched agent blocks of shape (..., N, dim)."""
    blocks = np.asarray(blocks, dtype=float)
    n = blocks.shape[-2]
    batch = blocks.shape[:-2]
    vals: dict = {}
    periods: dict = {}
    valid = np.ones(batch, dtype=bool)
    reason = ""

    def invalid_where(mask, why):
        nonlocal valid, reason
        if np.any(mask) and not reason:
            reason = why
        valid = valid & ~mask

    S = Scenario(scenario)
    with np.errstate(all="ignore"):
        if S is Scenario.SE2_PLANE:
            Z = blocks[..., 1:, :] - blocks[..., :1, :]
            rho, ang = _polar(Z)
            for k in range(2, n + 1):
                vals[f"rho{k}"] = rho[..., k - 2]
            for k in range(3, n + 1):
                vals[f"th{k}2"] = reduce_angle(ang[..., k - 2] - ang[..., 0])
                periods[f"th{k}2"] = TAU
            if n >= 2:
                invalid_where(rho[..., 0] < SMALL, "rho2 = 0 (agents 1 and 2 coincide)")
                invalid_where(np.any(rho < SMALL, axis=-1), "some agent coincides with agent 1")

        elif S is Scenario.REL_LINE:
            Z = blocks[..., 1:, :] - blocks[..., :1, :]
            if n == 2:
                r2 = (c * Z[..., 0, 0]) ** 2 - Z[..., 0, 1] ** 2
                invalid_where(~(r2 > 0), "r^2 = c^2 dT^2 - dx^2 <= 0 (not timelike)")
                vals["r"] = np.sqrt(np.where(r2 > 0, r2, 0.0))
            for j in range(2, n + 1) if n >= 3 else ():
                for k in range(j, n + 1):
                    a, b = Z[..., j - 2, :], Z[..., k - 2, :]
                    vals[f"m{j}{k}"] = c * c * a[..., 0] * b[..., 0] - a[..., 1] * b[..., 1]
                    if k > j:
                        vals[f"w{j}{k}"] = _wedge(a, b)

        elif S is Scenario.REL_PLANE:
            Z = blocks[..., 1:, :] - blocks[..., :1, :]

            def mink(a, b):
                return c * c * a[..., 0] * b[..., 0] - a[..., 1] * b[..., 1] - a[..., 2] * b[..., 2]

            if n == 2:
                r2 = mink(Z[..., 0, :], Z[..., 0, :])
                invalid_where(~(r2 > 0), "r^2 <= 0 (not timelike)")
                vals["r"] = np.sqrt(np.where(r2 > 0, r2, 0.0))
            elif n >= 3:
                for j in range(2, n + 1):
                    for k in range(j, n + 1):
                        vals[f"m{j}{k}"] = mink(Z[..., j - 2, :], Z[..., k - 2, :])

        elif S is Scenario.CIRCLE:
            th = blocks[..., 0]
            for k in range(2, n + 1):
                vals[f"d{k}1"] = reduce_angle(th[..., k - 1] - th[..., 0])
                periods[f"d{k}1"] = TAU
            if n == 2:
                vals["a"] = vals["d21"]
                periods["a"] = TAU

        elif S is Scenario.SPHERE_SO2_STEREO:
            rho, ang = _polar(blocks)
            for i in range(1, n + 1):
                vals[f"rho{i}"] = rho[..., i - 1]
            for k in range(2, n + 1):
                vals[f"th{k}1"] = reduce_angle(ang[..., k - 1] - ang[..., 0])
                periods[f"th{k}1"] = TAU
            invalid_where(np.any(rho < SMALL, axis=-1), "an agent sits at the origin (a pole)")

        elif S is Scenario.SPHERE_SO3:
            for j in range(1, n + 1):
                for k in range(j + 1, n + 1):
                    a, b = blocks[..., j - 1, :], blocks[..., k - 1, :]
                    cross = np.linalg.norm(np.cross(a, b), axis=-1)
                    vals[f"d{j}{k}"] = np.arctan2(cross, np.sum(a * b, axis=-1))

        elif S is Scenario.SL2_PLANE:
            if n >= 2:
                X1, X2 = blocks[..., 0, :], blocks[..., 1, :]
                w = _wedge(X1, X2)
                vals["w12"] = w
                invalid_where(np.abs(w) < SMALL, "X1 ^ X2 = 0")
                safe = np.where(np.abs(w) < SMALL, 1.0, w)
                for i in range(3, n + 1):
                    Xi = blocks[..., i - 1, :]
                    vals[f"p{i}"] = _wedge(Xi, X2) / safe
                    vals[f"q{i}"] = _wedge(X1, Xi) / safe

        elif S is Scenario.UNICYCLE:
            Z = blocks[..., 1:, :2] - blocks[..., :1, :2]
            rho, alpha = _polar(Z)
            th = blocks[..., 2]
            for k in range(2, n + 1):
                vals[f"rho{k}"] = rho[..., k - 2]
                vals[f"al{k}"] = reduce_angle(alpha[..., k - 2] - th[..., 0])
                vals[f"th{k}1"] = reduce_angle(th[..., k - 1] - th[..., 0])
                periods[f"al{k}"] = periods[f"th{k}1"] = TAU
            if n >= 2:
                invalid_where(np.any(rho < SMALL, axis=-1), "some agent coincides with agent 1")

        elif S is Scenario.REL_UNICYCLE:
            T, rho, al, th = (blocks[..., k] for k in range(4))
            r2 = T * T - rho * rho
            invalid_where(np.any(~(r2 > 0) | ~(rho > SMALL), axis=-1), "r^2 <= 0 or rho = 0")
            r = np.sqrt(np.where(r2 > 0, r2, 0.0))
            for i in range(1, n + 1):
                vals[f"r{i}"] = r[..., i - 1]
                vals[f"a{i}"] = reduce_angle(th[..., i - 1] - al[..., i - 1])
                periods[f"a{i}"] = TAU
            for i in range(2, n + 1):
                vals[f"da{i}"] = reduce_angle(al[..., i - 1] - al[..., 0])
                periods[f"da{i}"] = TAU
            if n == 1:
                vals["r"], vals["a"] = vals["r1"], vals["a1"]
                periods["a"] = TAU

        elif S is Scenario.SU2_QUANTUM:
            X = flat_to_complex(blocks[..., 0, :])
            (omega, d1, d2, re_a, im_a), degenerate = quantum.invariant_arrays(X)
            vals.update(omega=omega, delta1=d1, delta2=d2, re_a=re_a, im_a=im_a)
            periods["omega"] = np.pi
            invalid_where(degenerate, "symmetric part has coincident singular values")

    names = tuple(vals)
    vals = {k: v if np.shape(v) == batch else np.broadcast_to(v, batch) for k, v in vals.items()}
    return FrameArrays(names, vals, periods, valid, reason)


def frame(x: Configuration) -> InvariantFrame:
    """Invariant coordinates of one configuration."""
    fa = frame_arrays(x.scenario, x.blocks, x.c)
    values = np.array([float(fa.values[k]) for k in fa.names])
    return InvariantFrame(x.scenario, fa.names, values, bool(fa.valid),
                          "" if fa.valid else fa.reason,
                          tuple(fa.periods.get(k, 0.0) for k in fa.names))


def frame_names(scenario: Scenario | str, n_agents: int, c: float = 1.0) -> tuple[str, ...]:
    chart = get_chart(scenario, c)
    probe = np.zeros((n_agents, chart.dim_per_agent))
    return frame_arrays(chart.scenario, probe, c).names


def frame_distance(f1: InvariantFrame, f2: InvariantFrame) -> float:
    """Max-norm distance between two frames, periodic entries compared modulo their period."""
    diff = np.abs(f1.values - f2.values)
    for k, period in enumerate(f1.periods):
        if period:
            diff[k] = min(diff[k] % period, period - diff[k] % period)
    return float(diff.max()) if diff.size else 0.0


def raw_bindings(scenario: Scenario, coords, n_agents: int, c: float = 1.0) -> dict:
    """Raw chart coordinates by name (x1, y1, th1, ...); angles reduced to (-pi, pi]."""
    chart = get_chart(scenario, c)
    coords = np.asarray(coords, dtype=float)
    blocks = coords.reshape(coords.shape[:-1] + (n_agents, chart.dim_per_agent))
    out = {}
    for i in range(n_agents):
        for k, name in enumerate(chart.coordinate_names):
            value = blocks[..., i, k]
            out[f"{name}{i + 1}"] = reduce_angle(value) if chart.angular[k] else value
    return out


def radiality_residual(phi: ParamExpr | Callable, x: Configuration) -> float:
    """max over generators of |grad(phi) . l^(x)|, by central differences.

    ``phi`` is either an expression over raw coordinate names or a callable
    taking flat coordinates (batched on the leading axes).
    """
    if isinstance(phi, ParamExpr):
        def scalar(coords):
            return evaluate(phi, raw_bindings(x.scenario, coords, x.n_agents, x.c))
    else:
        scalar = phi

    chart = x.chart

    def f(coords):
        if not np.all(chart.domain_mask(coords, x.n_agents)):
            raise DomainViolation("finite-difference stencil left the domain")
        return np.broadcast_to(np.asarray(scalar(coords), dtype=float), np.shape(coords)[:-1])[..., None]

    worst = 0.0
    for gen in chart.generators:
        v = generator_coords(gen, x.coords, x.n_agents)
        worst = max(worst, float(np.abs(directional_derivative(f, x.coords, v)).max()))
    return worst
