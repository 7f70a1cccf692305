"""Constructors for the equivariant N-agent vector fields of every scenario.

Each constructor binds parsed parameter expressions to the scenario's
invariant frame and returns an immutable :class:`DynamicsFamily`. Field
evaluation is vectorized over leading batch axes of the flat coordinates.

Parameter slot names use ``<name><agent>`` for per-agent slots and
``<name><agent>_<k>`` when a second index selects a basis vector.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np

from . import invariants
from .errors import ConfigError, DomainViolation
from .expr import Neg, ParamExpr, evaluate, parse
from .invariants import SMALL, FrameArrays, frame_arrays
from .lie import ISOMETRIC, SPHERE_NEIGHBORHOOD, TAU, Configuration, Scenario, complex_to_flat, flat_to_complex, get_chart, reduce_angle

# Configurations closer than this to a family's singular set are avoided when sampling.
DEFAULT_MARGIN = 0.2


@dataclass(frozen=True, eq=False)
class DynamicsFamily:
    """An evaluable N-agent vector field on one scenario chart."""

    kind: str
    scenario: Scenario
    n_agents: int
    params: Mapping[str, ParamExpr]
    c: float = 1.0
    flags: frozenset = frozenset()
    indices: tuple = ()
    compute: Callable = field(default=None, repr=False)
    validity: Callable = field(default=None, repr=False)
    margin: Callable = field(default=None, repr=False)
    # compute() already raises DomainViolation off the domain of validity
    prevalidated: bool = field(default=False, repr=False)

    @property
    def chart(self):
        return get_chart(self.scenario, self.c)

    @property
    def dim(self) -> int:
        return self.n_agents * self.chart.dim_per_agent

    def _blocks(self, coords):
        coords = np.asarray(coords, dtype=float)
        if coords.shape[-1] != self.dim:
            raise ConfigError(f"{self.kind} expects {self.dim} coordinates, got {coords.shape[-1]}")
        return coords.reshape(coords.shape[:-1] + (self.n_agents, self.chart.dim_per_agent))

    def valid_mask(self, coords):
        """Where the field is defined (chart domain and frame validity); never raises."""
        blocks = self._blocks(coords)
        ok = self.chart.domain_mask(coords, self.n_agents, SPHERE_NEIGHBORHOOD)
        if self.validity is not None:
            mask, _ = self.validity(blocks)
            ok = ok & mask
        return ok

    def conditioning(self, coords):
        """Distance-like margin to the singular set; +inf when there is none."""
        blocks = self._blocks(coords)
        if self.margin is None:
            return np.full(blocks.shape[:-2], np.inf)
        with np.errstate(all="ignore"):
            return np.nan_to_num(self.margin(blocks), nan=0.0)

    def field_coords(self, coords):
        """Velocity for flat coordinates of shape (..., n*dim)."""
        blocks = self._blocks(coords)
        if not np.all(self.chart.domain_mask(coords, self.n_agents, SPHERE_NEIGHBORHOOD)):
            raise DomainViolation(f"{self.kind}: configuration outside the {self.scenario.value} chart")
        if self.validity is not None and not self.prevalidated:
            mask, reason = self.validity(blocks)
            if not np.all(mask):
                raise DomainViolation(f"{self.kind}: {reason}")
        with np.errstate(all="ignore"):
            out = self.compute(blocks)
        out = np.asarray(out, dtype=float).reshape(np.shape(coords))
        if not np.all(np.isfinite(out)):
            raise DomainViolation(f"{self.kind}: field is not finite")
        return out

    def field(self, x: Configuration) -> np.ndarray:
        if x.scenario is not self.scenario or x.n_agents != self.n_agents:
            raise ConfigError(
                f"{self.kind} is defined for {self.n_agents} agents on {self.scenario.value}")
        return self.field_coords(x.coords)

    __call__ = field

    def describe(self) -> dict:
        return {
            "kind": self.kind,
            "scenario_id": self.scenario.value,
            "n_agents": self.n_agents,
            "c": self.c,
            "params": {k: v.source for k, v in sorted(self.params.items())},
            "flags": sorted(self.flags),
            "indices": list(self.indices),
        }


# --------------------------------------------------------------------------
# shared plumbing

def _as_expr(value) -> ParamExpr:
    return value if isinstance(value, ParamExpr) else parse(value)


def _bind_params(kind, params, slots, allowed, strict, raw_names=()):
    """Parse, check the slot set is exact and every variable is bound."""
    params = {k: _as_expr(v) for k, v in dict(params).items()}
    missing = [s for s in slots if s not in params]
    extra = sorted(set(params) - set(slots))
    if missing:
        raise ConfigError(f"{kind}: missing parameter slots {missing}")
    if extra:
        raise ConfigError(f"{kind}: unknown parameter slots {extra}; expected {list(slots)}")
    names = set(allowed) | (set() if strict else set(raw_names))
    for slot in slots:
        unbound = sorted(params[slot].free_vars - names)
        if unbound:
            raise ConfigError(
                f"{kind}: parameter {slot} = {params[slot].source!r} uses {unbound}; "
                f"available variables: {sorted(names) or 'none (constants only)'}")
    return {s: params[s] for s in slots}


def _evaluate_params(params, bindings, batch_shape):
    out = {}
    for k, e in params.items():
        v = np.asarray(evaluate(e, bindings), dtype=float)
        out[k] = v if v.shape == batch_shape else np.broadcast_to(v, batch_shape)
    return out


def _frame_validity(scenario, c):
    def validity(blocks):
        fa = frame_arrays(scenario, blocks, c)
        return fa.valid, fa.reason
    return validity


def _raw_env(scenario, blocks, c):
    flat = blocks.reshape(blocks.shape[:-2] + (-1,))
    return invariants.raw_bindings(scenario, flat, blocks.shape[-2], c)


def _standard(kind, scenario, n, params, slots, assemble, *, c=1.0, strict=True, flags=(),
              indices=(), extra_validity=None, margin=None):
    """Family whose parameters are evaluated on the scenario's invariant frame."""
    chart = get_chart(scenario, c)
    names = invariants.frame_names(scenario, n, c)
    raw = chart.agent_names(n)
    bound = _bind_params(kind, params, slots, names, strict, raw)

    def compute(blocks):
        fa = frame_arrays(scenario, blocks, c)
        if not np.all(fa.valid):
            raise DomainViolation(f"{kind}: {fa.reason}")
        if extra_validity is not None:
            mask, why = extra_validity(blocks)
            if not np.all(mask):
                raise DomainViolation(f"{kind}: {why}")
        env = dict(fa.values)
        if not strict:
            env.update(_raw_env(scenario, blocks, c))
        values = _evaluate_params(bound, env, blocks.shape[:-2])
        return assemble(blocks, fa, values)

    def validity(blocks):
        fa = frame_arrays(scenario, blocks, c)
        ok, reason = fa.valid, fa.reason
        if extra_validity is not None:
            mask, why = extra_validity(blocks)
            if np.any(~mask & ok):
                reason = reason or why
            ok = ok & mask
        return ok, reason

    used = set().union(*(e.free_vars for e in bound.values())) if bound else set()

    def full_margin(blocks):
        # keep samples away from the branch cut of reduced angles the parameters read
        m = margin(blocks) if margin is not None else np.full(blocks.shape[:-2], np.inf)
        fa = frame_arrays(scenario, blocks, c)
        for name in used & set(fa.periods):
            v, period = fa.values[name], fa.periods[name]
            if name == "omega":  # stored in [0, pi)
                m = np.minimum(m, np.minimum(v, period - v))
            else:  # stored in (-period/2, period/2]
                m = np.minimum(m, period / 2 - np.abs(v))
        return m

    return DynamicsFamily(kind, chart.scenario, n, bound, chart.c, frozenset(flags),
                          tuple(indices), compute, validity, full_margin, prevalidated=True)


def _check_n(kind, n, minimum):
    if not isinstance(n, (int, np.integer)) or n < minimum:
        raise ConfigError(f"{kind} needs at least {minimum} agents, got {n}")


def _check_indices(kind, indices, count, n, low=1):
    indices = tuple(int(i) for i in indices)
    if len(indices) != count or len(set(indices)) != count:
        raise ConfigError(f"{kind}: need {count} distinct indices, got {list(indices)}")
    if any(i < low or i > n for i in indices):
        raise ConfigError(f"{kind}: indices must lie in {low}..{n}, got {list(indices)}")
    return indices


def _pair_min(rho):
    return np.min(rho, axis=-1) if rho.shape[-1] else np.full(rho.shape[:-1], np.inf)


# --------------------------------------------------------------------------
# SE(2) on the plane

def _se2_apply(D, lam, mu):
    """[[dx, -dy], [dy, dx]] . (lam, mu) for difference vectors D (..., 2)."""
    dx, dy = D[..., 0], D[..., 1]
    return np.stack([dx * lam - dy * mu, dy * lam + dx * mu], axis=-1)


def se2_family(n: int, params: Mapping, *, strict: bool = True, kind: str = "se2",
               flags=()) -> DynamicsFamily:
    """f_i = [[x2-x1, y1-y2], [y2-y1, x2-x1]] . (lambda_i, mu_i)."""
    _check_n(kind, n, 2)
    slots = [f"lambda{i}" for i in range(1, n + 1)] + [f"mu{i}" for i in range(1, n + 1)]

    def assemble(blocks, fa, p):
        D = blocks[..., 1, :] - blocks[..., 0, :]
        lam = np.stack([p[f"lambda{i}"] for i in range(1, n + 1)], axis=-1)
        mu = np.stack([p[f"mu{i}"] for i in range(1, n + 1)], axis=-1)
        return _se2_apply(D[..., None, :], lam, mu)

    def margin(blocks):
        return _pair_min(np.linalg.norm(blocks[..., 1:, :] - blocks[..., :1, :], axis=-1))

    return _standard(kind, Scenario.SE2_PLANE, n, params, slots, assemble,
                     strict=strict, flags=flags, margin=margin)


def gradient_flow_se2(Lambda, n: int = 2) -> DynamicsFamily:
    """se2_family with lambda1 = -Lambda, lambda2 = Lambda, mu = 0: a gradient flow."""
    if n != 2:
        raise ConfigError("gradient_flow_se2 is defined for two agents")
    Lambda = _as_expr(Lambda)
    minus = ParamExpr(f"-({Lambda.source})", Neg(Lambda.ast), Lambda.free_vars)
    params = {"lambda1": minus, "lambda2": Lambda, "mu1": parse("0"), "mu2": parse("0")}
    family = se2_family(2, params, kind="gradient_se2", flags=("gradient",))
    return _with_params(family, {"Lambda": Lambda})


def counterexample_mu_field(n: int = 2) -> DynamicsFamily:
    """mu2 = 1/rho2^2 = -mu1: equivariant, locally a gradient, but not globally."""
    if n != 2:
        raise ConfigError("counterexample_mu_field is defined for two agents")
    params = {"lambda1": "0", "lambda2": "0", "mu1": "-pow(rho2, -2)", "mu2": "pow(rho2, -2)"}
    return se2_family(2, params, kind="counterexample_mu")


def _with_params(family: DynamicsFamily, params) -> DynamicsFamily:
    return DynamicsFamily(family.kind, family.scenario, family.n_agents, dict(params), family.c,
                          family.flags, family.indices, family.compute, family.validity,
                          family.margin, family.prevalidated)


def pepd_local_frame(blocks) -> FrameArrays:
    """Per-agent variables of the permutation-equivariant SE(2) family.

    For agent i: rho1..rho{N-1} are the distances to the other agents in index
    order, tau1..tau{N-2} the angles theta_{j,i} - theta_{i+1,i} for
    j not in {i, i+1} (index N+1 wraps to 1). Values carry a trailing agent axis.
    """
    n = blocks.shape[-2]
    diff = blocks[..., None, :, :] - blocks[..., :, None, :]  # [..., i, j] = X_j - X_i
    rho = np.hypot(diff[..., 0], diff[..., 1])
    ang = np.arctan2(diff[..., 1], diff[..., 0])
    vals, periods = {}, {}
    for slot in range(1, n):
        vals[f"rho{slot}"] = np.stack(
            [rho[..., i, [j for j in range(n) if j != i][slot - 1]] for i in range(n)], axis=-1)
    for slot in range(1, n - 1):
        cols = []
        for i in range(n):
            nxt = (i + 1) % n
            j = [j for j in range(n) if j not in (i, nxt)][slot - 1]
            cols.append(reduce_angle(ang[..., i, j] - ang[..., i, nxt]))
        vals[f"tau{slot}"] = np.stack(cols, axis=-1)
        periods[f"tau{slot}"] = TAU
    off = np.where(np.eye(n, dtype=bool), np.inf, rho)
    valid = np.min(off, axis=(-2, -1)) >= SMALL
    return FrameArrays(tuple(vals), vals, periods, valid, "two agents coincide")


def se2_pepd_family(n: int, lam, mu) -> DynamicsFamily:
    """f_i = [[Sx, -Sy], [Sy, Sx]] . (lambda, mu) with S = sum_{j != i} (X_j - X_i)."""
    kind = "se2_pepd"
    _check_n(kind, n, 2)
    names = [f"rho{k}" for k in range(1, n)] + [f"tau{k}" for k in range(1, n - 1)]
    bound = _bind_params(kind, {"lambda": lam, "mu": mu}, ["lambda", "mu"], names, True)

    def compute(blocks):
        fa = pepd_local_frame(blocks)
        p = _evaluate_params(bound, fa.values, blocks.shape[:-1])
        S = blocks.sum(axis=-2, keepdims=True) - n * blocks
        return _se2_apply(S, p["lambda"], p["mu"])

    def validity(blocks):
        fa = pepd_local_frame(blocks)
        return fa.valid, fa.reason

    def margin(blocks):
        S = blocks.sum(axis=-2, keepdims=True) - n * blocks
        diff = blocks[..., None, :, :] - blocks[..., :, None, :]
        dist = np.where(np.eye(n, dtype=bool), np.inf, np.linalg.norm(diff, axis=-1))
        return np.minimum(np.min(np.linalg.norm(S, axis=-1), axis=-1), np.min(dist, axis=(-2, -1)))

    return DynamicsFamily(kind, Scenario.SE2_PLANE, n, bound, 1.0, frozenset({"pepd"}), (),
                          compute, validity, margin)


def pepd_excluded(x: Configuration, tol: float = 1e-12) -> bool:
    """True on the removed set where sum_j X_j - N X_i = 0 for some agent i."""
    blocks = x.blocks
    S = blocks.sum(axis=0) - x.n_agents * blocks
    return bool(np.any(np.linalg.norm(S, axis=-1) < tol))


# --------------------------------------------------------------------------
# relativistic line and plane

def rel_line_family(n: int, c: float, params: Mapping, *, indices=(2, 3)) -> DynamicsFamily:
    """N=2: f_i = [[dT, dx/c], [dx, c dT]] . (phi_i(r), psi_i(r)).

    N>=3: f_i = psi_{i,1} Z_{k1} + psi_{i,2} Z_{k2} with Z_k = X_k - X_1.
    """
    kind = "rel_line"
    if n < 2:
        raise ConfigError("rel_line: for one agent the only equivariant field is zero")
    if not c > 0:
        raise ConfigError("rel_line: c must be positive")
    if n == 2:
        slots = ["phi1", "phi2", "psi1", "psi2"]

        def assemble(blocks, fa, p):
            D = blocks[..., 1, :] - blocks[..., 0, :]
            phi = np.stack([p["phi1"], p["phi2"]], axis=-1)
            psi = np.stack([p["psi1"], p["psi2"]], axis=-1)
            dT, dx = D[..., None, 0], D[..., None, 1]
            return np.stack([dT * phi + dx / c * psi, dx * phi + c * dT * psi], axis=-1)

        def margin(blocks):
            D = blocks[..., 1, :] - blocks[..., 0, :]
            r2 = (c * D[..., 0]) ** 2 - D[..., 1] ** 2
            return np.sqrt(np.maximum(r2, 0)) / c

        return _standard(kind, Scenario.REL_LINE, n, params, slots, assemble, c=c, margin=margin)

    k1, k2 = _check_indices(kind, indices, 2, n, low=2)
    slots = [f"psi{i}_{k}" for i in range(1, n + 1) for k in (1, 2)]

    def basis(blocks):
        return blocks[..., k1 - 1, :] - blocks[..., 0, :], blocks[..., k2 - 1, :] - blocks[..., 0, :]

    def assemble(blocks, fa, p):
        Z1, Z2 = basis(blocks)
        a = np.stack([p[f"psi{i}_1"] for i in range(1, n + 1)], axis=-1)[..., None]
        b = np.stack([p[f"psi{i}_2"] for i in range(1, n + 1)], axis=-1)[..., None]
        return a * Z1[..., None, :] + b * Z2[..., None, :]

    def independent(blocks):
        Z1, Z2 = basis(blocks)
        w = Z1[..., 0] * Z2[..., 1] - Z1[..., 1] * Z2[..., 0]
        return np.abs(w) > SMALL, f"Z{k1} and Z{k2} are parallel"

    def margin(blocks):
        Z1, Z2 = basis(blocks)
        return np.abs(Z1[..., 0] * Z2[..., 1] - Z1[..., 1] * Z2[..., 0])

    return _standard(kind, Scenario.REL_LINE, n, params, slots, assemble, c=c,
                     indices=(k1, k2), extra_validity=independent, margin=margin)


def _minkowski(a, b, c):
    return c * c * a[..., 0] * b[..., 0] - a[..., 1] * b[..., 1] - a[..., 2] * b[..., 2]


def rel_plane_family(n: int, params: Mapping, *, c: float = 1.0, indices=(2, 3, 4)) -> DynamicsFamily:
    """N=2: f_i = psi_i(r) Z. N=3: f_i = phi_i Z2 + psi_i Z3 (a sub-family).

    N>=4: f_i = sum_k psi_{i,k} Z_{k-th index}.
    """
    kind = "rel_plane"
    if n < 2:
        raise ConfigError("rel_plane: for one agent the only equivariant field is zero")
    if n == 2:
        def assemble(blocks, fa, p):
            Z = blocks[..., 1, :] - blocks[..., 0, :]
            psi = np.stack([p["psi1"], p["psi2"]], axis=-1)
            return psi[..., None] * Z[..., None, :]

        def margin(blocks):
            Z = blocks[..., 1, :] - blocks[..., 0, :]
            return np.sqrt(np.maximum(_minkowski(Z, Z, c), 0)) / c

        return _standard(kind, Scenario.REL_PLANE, n, params, ["psi1", "psi2"], assemble, c=c,
                         margin=margin)

    if n == 3:
        idx = (2, 3)
        slots = [f"{s}{i}" for s in ("phi", "psi") for i in range(1, 4)]
        flags = ("contains",)
    else:
        idx = _check_indices(kind, indices, 3, n, low=2)
        slots = [f"psi{i}_{k}" for i in range(1, n + 1) for k in (1, 2, 3)]
        flags = ()

    def basis(blocks):
        return [blocks[..., k - 1, :] - blocks[..., 0, :] for k in idx]

    def coefficient(p, i, k):
        if n == 3:
            return p[("phi", "psi")[k] + str(i)]
        return p[f"psi{i}_{k + 1}"]

    def assemble(blocks, fa, p):
        Zs = basis(blocks)
        out = 0.0
        for k, Z in enumerate(Zs):
            coef = np.stack([coefficient(p, i, k) for i in range(1, n + 1)], axis=-1)
            out = out + coef[..., None] * Z[..., None, :]
        return out

    def gram_det(blocks):
        Zs = basis(blocks)
        G = np.array([[_minkowski(a, b, c) for b in Zs] for a in Zs])
        return np.moveaxis(G, (0, 1), (-2, -1))

    def independent(blocks):
        Zs = basis(blocks)
        M = np.stack(Zs, axis=-1)
        if len(Zs) == 3:
            ok = np.abs(np.linalg.det(M)) > SMALL
        else:
            ok = np.linalg.norm(np.cross(Zs[0], Zs[1]), axis=-1) > SMALL
        return ok, "difference vectors are dependent"

    def margin(blocks):
        Zs = basis(blocks)
        if len(Zs) == 3:
            return np.abs(np.linalg.det(np.stack(Zs, axis=-1)))
        return np.linalg.norm(np.cross(Zs[0], Zs[1]), axis=-1)

    return _standard(kind, Scenario.REL_PLANE, n, params, slots, assemble, c=c, flags=flags,
                     indices=idx, extra_validity=independent, margin=margin)


# --------------------------------------------------------------------------
# circle and spheres

def _probe_periodicity(kind, params, periodic_names, raw_names):
    """Reject parameters that are not 2*pi-periodic in each angle-difference variable."""
    rng = np.random.default_rng(20240229)
    for slot, e in params.items():
        for var in sorted(e.free_vars & set(periodic_names)):
            env = {v: rng.uniform(-np.pi, np.pi, size=16) for v in e.free_vars}
            base = evaluate(e, env)
            shifted = evaluate(e, {**env, var: env[var] + TAU})
            if np.any(np.abs(shifted - base) > 1e-9 * (1 + np.abs(base))):
                raise ConfigError(f"{kind}: parameter {slot} = {e.source!r} is not "
                                  f"2*pi-periodic in {var}")


def circle_family(n: int, params: Mapping, *, strict: bool = True) -> DynamicsFamily:
    """theta_i' = phi_i(theta_2 - theta_1, ..., theta_N - theta_1); constants for N=1."""
    kind = "circle"
    _check_n(kind, n, 1)
    slots = [f"phi{i}" for i in range(1, n + 1)]

    def assemble(blocks, fa, p):
        return np.stack([p[s] for s in slots], axis=-1)[..., None]

    family = _standard(kind, Scenario.CIRCLE, n, params, slots, assemble, strict=strict)
    names = invariants.frame_names(Scenario.CIRCLE, n)
    _probe_periodicity(kind, family.params, names, get_chart(Scenario.CIRCLE).agent_names(n))
    return family


def _unit(v):
    return v / np.linalg.norm(v, axis=-1, keepdims=True)


def geodesic_direction(a, b):
    """Unit tangent at a pointing away from b along the great circle (gradient of d(., b))."""
    a, b = _unit(a), _unit(b)
    tangential = b - np.sum(a * b, axis=-1, keepdims=True) * a
    return -tangential / np.linalg.norm(tangential, axis=-1, keepdims=True)


def _so3_partners(n, i, preferred):
    order = list(preferred) + [k for k in range(1, n + 1) if k not in preferred]
    return [k for k in order if k != i][:2]


def sphere_so3_family(n: int, params: Mapping, *, indices=None) -> DynamicsFamily:
    """f_i = phi_{i,1} h + phi_{i,2} h_perp (N=2), or phi_{i,1} h_p + phi_{i,2} h_q (N>=3).

    h = geodesic_direction(X_i, X_partner); h_perp = X_i x h. For N>=3 agent i
    uses its first two partners from ``indices`` (default 1, 2, 3, ...), skipping i.
    """
    kind = "sphere_so3"
    _check_n(kind, n, 2)
    preferred = tuple(range(1, n + 1)) if indices is None else tuple(int(k) for k in indices)
    if len(set(preferred)) != len(preferred) or any(k < 1 or k > n for k in preferred):
        raise ConfigError(f"{kind}: bad partner indices {list(preferred)}")
    slots = [f"phi{i}_{k}" for i in range(1, n + 1) for k in (1, 2)]
    if n == 2:
        pairs = [(1, 2, None), (2, 1, None)]
    else:
        pairs = [(i, *_so3_partners(n, i, preferred)) for i in range(1, n + 1)]

    def directions(blocks, i, p, q):
        Xi = _unit(blocks[..., i - 1, :])
        h1 = geodesic_direction(Xi, blocks[..., p - 1, :])
        h2 = np.cross(Xi, h1) if q is None else geodesic_direction(Xi, blocks[..., q - 1, :])
        return h1, h2

    def assemble(blocks, fa, p):
        out = []
        for i, a, b in pairs:
            h1, h2 = directions(blocks, i, a, b)
            out.append(p[f"phi{i}_1"][..., None] * h1 + p[f"phi{i}_2"][..., None] * h2)
        return np.stack(out, axis=-2)

    def sines(blocks):
        vals = []
        for i, a, b in pairs:
            for k in (a, b):
                if k is not None:
                    u, v = _unit(blocks[..., i - 1, :]), _unit(blocks[..., k - 1, :])
                    vals.append(np.linalg.norm(np.cross(u, v), axis=-1))
        return np.min(np.stack(vals, axis=-1), axis=-1)

    def defined(blocks):
        return sines(blocks) > SMALL, "two agents are equal or antipodal"

    def margin(blocks):
        m = sines(blocks)
        if n >= 3:
            for i, a, b in pairs:
                h1, h2 = directions(blocks, i, a, b)
                m = np.minimum(m, np.linalg.norm(np.cross(h1, h2), axis=-1))
        return m

    return _standard(kind, Scenario.SPHERE_SO3, n, params, slots, assemble,
                     indices=preferred if n >= 3 else (), extra_validity=defined, margin=margin)


def sphere_so2_family(n: int, params: Mapping) -> DynamicsFamily:
    """Stereographic plane: f_i = [[x_i, -y_i], [y_i, x_i]] . (phi_i, psi_i)."""
    kind = "sphere_so2"
    _check_n(kind, n, 1)
    slots = [f"phi{i}" for i in range(1, n + 1)] + [f"psi{i}" for i in range(1, n + 1)]

    def assemble(blocks, fa, p):
        phi = np.stack([p[f"phi{i}"] for i in range(1, n + 1)], axis=-1)
        psi = np.stack([p[f"psi{i}"] for i in range(1, n + 1)], axis=-1)
        return _se2_apply(blocks, phi, psi)

    def margin(blocks):
        return np.min(np.linalg.norm(blocks, axis=-1), axis=-1)

    return _standard(kind, Scenario.SPHERE_SO2_STEREO, n, params, slots, assemble, margin=margin)


# --------------------------------------------------------------------------
# SL(2) on the plane

def sl2_family(n: int, params: Mapping, *, indices=(1, 2)) -> DynamicsFamily:
    """N=1: F = alpha X. N>=2: f_i = phi_{i,1} X_{j1} + phi_{i,2} X_{j2}."""
    kind = "sl2"
    _check_n(kind, n, 1)
    if n == 1:
        def assemble(blocks, fa, p):
            return p["alpha"][..., None, None] * blocks

        def margin(blocks):
            return np.linalg.norm(blocks[..., 0, :], axis=-1)

        return _standard(kind, Scenario.SL2_PLANE, 1, params, ["alpha"], assemble, margin=margin)

    j1, j2 = _check_indices(kind, indices, 2, n)
    slots = [f"phi{i}_{k}" for i in range(1, n + 1) for k in (1, 2)]

    def wedge(blocks):
        a, b = blocks[..., j1 - 1, :], blocks[..., j2 - 1, :]
        return a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]

    def assemble(blocks, fa, p):
        a = np.stack([p[f"phi{i}_1"] for i in range(1, n + 1)], axis=-1)[..., None]
        b = np.stack([p[f"phi{i}_2"] for i in range(1, n + 1)], axis=-1)[..., None]
        return a * blocks[..., None, j1 - 1, :] + b * blocks[..., None, j2 - 1, :]

    def independent(blocks):
        return np.abs(wedge(blocks)) > SMALL, f"X{j1} ^ X{j2} = 0"

    def margin(blocks):
        X1, X2 = blocks[..., 0, :], blocks[..., 1, :]
        w12 = np.abs(X1[..., 0] * X2[..., 1] - X1[..., 1] * X2[..., 0])
        return np.minimum(np.abs(wedge(blocks)), w12)

    return _standard(kind, Scenario.SL2_PLANE, n, params, slots, assemble,
                     indices=(j1, j2), extra_validity=independent, margin=margin)


# --------------------------------------------------------------------------
# unicycles

def unicycle_family(n: int, params: Mapping, *, strict: bool = True) -> DynamicsFamily:
    """X_i' = u_i (cos th_i, sin th_i, 0) + v_i (0, 0, 1)."""
    kind = "unicycle"
    _check_n(kind, n, 1)
    slots = [f"u{i}" for i in range(1, n + 1)] + [f"v{i}" for i in range(1, n + 1)]

    def assemble(blocks, fa, p):
        u = np.stack([p[f"u{i}"] for i in range(1, n + 1)], axis=-1)
        v = np.stack([p[f"v{i}"] for i in range(1, n + 1)], axis=-1)
        th = blocks[..., 2]
        return np.stack([u * np.cos(th), u * np.sin(th), v], axis=-1)

    def margin(blocks):
        return _pair_min(np.linalg.norm(blocks[..., 1:, :2] - blocks[..., :1, :2], axis=-1))

    return _standard(kind, Scenario.UNICYCLE, n, params, slots, assemble, strict=strict,
                     margin=margin)


def rel_unicycle_family(n: int, params: Mapping) -> DynamicsFamily:
    """Per agent on (T, rho, al, th): T' = T cos(th-al) u, rho' = rho cos(th-al) u,
    al' = sin(th-al) u, th' = v."""
    kind = "rel_unicycle"
    _check_n(kind, n, 1)
    slots = [f"u{i}" for i in range(1, n + 1)] + [f"v{i}" for i in range(1, n + 1)]

    def assemble(blocks, fa, p):
        u = np.stack([p[f"u{i}"] for i in range(1, n + 1)], axis=-1)
        v = np.stack([p[f"v{i}"] for i in range(1, n + 1)], axis=-1)
        T, rho, al, th = (blocks[..., k] for k in range(4))
        cos, sin = np.cos(th - al), np.sin(th - al)
        return np.stack([T * cos * u, rho * cos * u, sin * u, v], axis=-1)

    def margin(blocks):
        T, rho = blocks[..., 0], blocks[..., 1]
        r = np.sqrt(np.maximum(T * T - rho * rho, 0))
        return np.min(np.minimum(r, rho), axis=-1)

    return _standard(kind, Scenario.REL_UNICYCLE, n, params, slots, assemble, margin=margin)


# --------------------------------------------------------------------------
# two spins

def quantum_family(phi1, phi2) -> DynamicsFamily:
    """X' = i phi1 S + i phi2 A over the SU(2) invariants (omega, delta1, delta2, re_a, im_a)."""
    kind = "quantum"

    def assemble(blocks, fa, p):
        X = flat_to_complex(blocks[..., 0, :])
        XT = np.swapaxes(X, -1, -2)
        S, A = (X + XT) / 2, (X - XT) / 2
        dX = 1j * p["phi1"][..., None, None] * S + 1j * p["phi2"][..., None, None] * A
        return complex_to_flat(dX)[..., None, :]

    def margin(blocks):
        fa = frame_arrays(Scenario.SU2_QUANTUM, blocks)
        d1, d2 = fa.values["delta1"], fa.values["delta2"]
        return np.minimum(d1 - d2, d2)

    return _standard(kind, Scenario.SU2_QUANTUM, 1, {"phi1": phi1, "phi2": phi2},
                     ["phi1", "phi2"], assemble, margin=margin)


# --------------------------------------------------------------------------
# derived fields

def arclength(family: DynamicsFamily) -> DynamicsFamily:
    """F / |F| in the chart's Euclidean product norm (isometric scenarios only)."""
    if family.scenario not in ISOMETRIC:
        raise ConfigError(f"arclength reparametrization needs an isometric scenario, "
                          f"not {family.scenario.value}")
    base = family.compute

    def compute(blocks):
        F = base(blocks)
        norm = np.linalg.norm(F.reshape(F.shape[:-2] + (-1,)), axis=-1)
        if np.any(norm < 1e-10):
            raise DomainViolation("arclength: |F| < 1e-10 (equilibrium)")
        return F / norm[..., None, None]

    return DynamicsFamily(family.kind + "_arclength", family.scenario, family.n_agents,
                          family.params, family.c, family.flags | {"arclength"}, family.indices,
                          compute, family.validity, family.margin, family.prevalidated)


def custom_family(scenario: Scenario | str, n: int, fn: Callable, *, kind: str = "custom",
                  c: float = 1.0, validity: Callable | None = None) -> DynamicsFamily:
    """Wrap an arbitrary field ``fn(coords) -> velocity`` on flat batched coordinates.

    Used for hand-built fields such as the negative controls of the checker.
    """
    chart = get_chart(scenario, c)
    d = chart.dim_per_agent

    def compute(blocks):
        flat = blocks.reshape(blocks.shape[:-2] + (n * d,))
        return np.asarray(fn(flat), dtype=float).reshape(blocks.shape)

    return DynamicsFamily(kind, chart.scenario, n, {}, chart.c, frozenset({"custom"}), (),
                          compute, validity, None)


def perturbed(family: DynamicsFamily, extra: Callable, kind: str | None = None) -> DynamicsFamily:
    """family + extra(coords), keeping the family's domain."""
    base = family.compute

    def compute(blocks):
        flat = blocks.reshape(blocks.shape[:-2] + (-1,))
        return base(blocks) + np.asarray(extra(flat)).reshape(blocks.shape)

    return DynamicsFamily(kind or family.kind + "_perturbed", family.scenario, family.n_agents,
                          family.params, family.c, (family.flags - {"gradient"}) | {"custom"},
                          family.indices, compute, family.validity, family.margin,
                          family.prevalidated)
