"""Scenario manifolds, their diagonal group actions and Lie-algebra generators.

Every scenario is represented in a chart where the action on one agent is
affine, ``X -> L @ X + s``, followed by wrapping of angular coordinates.
Group elements therefore store a ``(linear, shift)`` pair and compose by the
semidirect-product rule ``(L2, s2) * (L1, s1) = (L2 L1, L2 s1 + s2)``.
Generators are affine vector fields ``X -> M @ X + b`` in the same chart.

Layouts per agent:

=====================  ===  =========================================
scenario               dim  coordinates
=====================  ===  =========================================
SE2_PLANE              2    x, y
REL_LINE               2    T, x
REL_PLANE              3    T, x, y
CIRCLE                 1    th (angle)
SPHERE_SO3             3    x, y, z (unit vector)
SPHERE_SO2_STEREO      2    x, y (stereographic plane, origin removed)
SL2_PLANE              2    x, y
UNICYCLE               3    x, y, th (angle)
REL_UNICYCLE           4    T, rho, al (angle), th (angle)
SU2_QUANTUM            8    Re/Im interleaved row-major entries of X
=====================  ===  =========================================

A SU2_QUANTUM configuration holds the whole two-spin tensor state as a
single 8-real block, so its ``n_agents`` is 1.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache

import numpy as np
from scipy.linalg import expm

from .errors import ConfigError, DomainViolation

TAU = 2.0 * np.pi


class Scenario(str, Enum):
    SE2_PLANE = "SE2_PLANE"
    REL_LINE = "REL_LINE"
    REL_PLANE = "REL_PLANE"
    CIRCLE = "CIRCLE"
    SPHERE_SO3 = "SPHERE_SO3"
    SPHERE_SO2_STEREO = "SPHERE_SO2_STEREO"
    SL2_PLANE = "SL2_PLANE"
    UNICYCLE = "UNICYCLE"
    REL_UNICYCLE = "REL_UNICYCLE"
    SU2_QUANTUM = "SU2_QUANTUM"

    @classmethod
    def parse(cls, value: "Scenario | str") -> "Scenario":
        try:
            return cls(value)
        except ValueError:
            raise ConfigError(f"unknown scenario_id {value!r}") from None


# Scenarios whose group acts by isometries of the chart's Euclidean product norm.
ISOMETRIC = frozenset({
    Scenario.SE2_PLANE, Scenario.CIRCLE, Scenario.SPHERE_SO3,
    Scenario.SPHERE_SO2_STEREO, Scenario.UNICYCLE, Scenario.SU2_QUANTUM,
})

# Scenarios whose charts are subsets of the plane; figures draw them as curves.
PLANAR = frozenset({
    Scenario.SE2_PLANE, Scenario.SPHERE_SO2_STEREO, Scenario.SL2_PLANE, Scenario.UNICYCLE,
})

_LAYOUT: dict[Scenario, tuple[tuple[str, ...], tuple[bool, ...]]] = {
    Scenario.SE2_PLANE: (("x", "y"), (False, False)),
    Scenario.REL_LINE: (("T", "x"), (False, False)),
    Scenario.REL_PLANE: (("T", "x", "y"), (False, False, False)),
    Scenario.CIRCLE: (("th",), (True,)),
    Scenario.SPHERE_SO3: (("x", "y", "z"), (False, False, False)),
    Scenario.SPHERE_SO2_STEREO: (("x", "y"), (False, False)),
    Scenario.SL2_PLANE: (("x", "y"), (False, False)),
    Scenario.UNICYCLE: (("x", "y", "th"), (False, False, True)),
    Scenario.REL_UNICYCLE: (("T", "rho", "al", "th"), (False, False, True, True)),
    Scenario.SU2_QUANTUM: (
        ("re_x11", "im_x11", "re_x12", "im_x12", "re_x21", "im_x21", "re_x22", "im_x22"),
        (False,) * 8,
    ),
}


# --------------------------------------------------------------------------
# angles

def wrap_angle(theta):
    """Map angles to [0, 2*pi)."""
    out = np.mod(theta, TAU)
    return np.where(out >= TAU, 0.0, out)


def reduce_angle(theta):
    """Map angles to (-pi, pi]."""
    return np.pi - np.mod(np.pi - np.asarray(theta, dtype=float), TAU)


# --------------------------------------------------------------------------
# complex layout for SU2_QUANTUM

def flat_to_complex(v):
    """(..., 8) interleaved reals -> (..., 2, 2) complex."""
    v = np.asarray(v, dtype=float)
    z = v[..., 0::2] + 1j * v[..., 1::2]
    return z.reshape(v.shape[:-1] + (2, 2))


def complex_to_flat(X):
    """(..., 2, 2) complex -> (..., 8) interleaved reals."""
    X = np.asarray(X, dtype=complex)
    z = X.reshape(X.shape[:-2] + (4,))
    out = np.empty(z.shape[:-1] + (8,))
    out[..., 0::2] = z.real
    out[..., 1::2] = z.imag
    return out


def _real_matrix_of(complex_map) -> np.ndarray:
    """8x8 real matrix of an R-linear map on 2x2 complex matrices."""
    cols = []
    for k in range(8):
        e = np.zeros(8)
        e[k] = 1.0
        cols.append(complex_to_flat(complex_map(flat_to_complex(e))))
    return np.array(cols).T


# --------------------------------------------------------------------------
# generators and charts

@dataclass(frozen=True, eq=False)
class AlgebraGenerator:
    """Affine vector field ``X -> matrix @ X + offset`` on one agent's chart."""

    scenario: Scenario
    index: int
    name: str
    matrix: np.ndarray
    offset: np.ndarray
    native: np.ndarray | None = None  # su(2) element for SU2_QUANTUM

    def eval(self, points):
        """Evaluate on points of shape (..., dim)."""
        return points @ self.matrix.T + self.offset


def _gen(scenario, index, name, matrix, offset=None, native=None):
    matrix = np.asarray(matrix, dtype=float)
    offset = np.zeros(matrix.shape[0]) if offset is None else np.asarray(offset, dtype=float)
    matrix.setflags(write=False)
    offset.setflags(write=False)
    return AlgebraGenerator(scenario, index, name, matrix, offset, native)


PAULI_I = (
    np.array([[0, 1j], [1j, 0]]),
    np.array([[0, 1], [-1, 0]], dtype=complex),
    np.array([[1j, 0], [0, -1j]]),
)


def _generators(scenario: Scenario, c: float) -> tuple[AlgebraGenerator, ...]:
    S = scenario
    rot2 = [[0, -1], [1, 0]]
    z2, z3, z4 = np.zeros((2, 2)), np.zeros((3, 3)), np.zeros((4, 4))
    if S is Scenario.SE2_PLANE:
        return (_gen(S, 0, "dx", z2, [1, 0]), _gen(S, 1, "dy", z2, [0, 1]),
                _gen(S, 2, "rot", rot2))
    if S is Scenario.UNICYCLE:
        return (_gen(S, 0, "dx", z3, [1, 0, 0]), _gen(S, 1, "dy", z3, [0, 1, 0]),
                _gen(S, 2, "rot", [[0, -1, 0], [1, 0, 0], [0, 0, 0]], [0, 0, 1]))
    if S is Scenario.REL_LINE:
        return (_gen(S, 0, "dT", z2, [1, 0]), _gen(S, 1, "dx", z2, [0, 1]),
                _gen(S, 2, "boost", [[0, 1 / c], [c, 0]]))
    if S is Scenario.REL_PLANE:
        return (
            _gen(S, 0, "dT", z3, [1, 0, 0]), _gen(S, 1, "dx", z3, [0, 1, 0]),
            _gen(S, 2, "dy", z3, [0, 0, 1]),
            _gen(S, 3, "boost_x", [[0, 1 / c, 0], [c, 0, 0], [0, 0, 0]]),
            _gen(S, 4, "boost_y", [[0, 0, 1 / c], [0, 0, 0], [c, 0, 0]]),
            _gen(S, 5, "rot", [[0, 0, 0], [0, 0, -1], [0, 1, 0]]),
        )
    if S is Scenario.CIRCLE:
        return (_gen(S, 0, "dth", [[0.0]], [1.0]),)
    if S is Scenario.SPHERE_SO3:
        return (
            _gen(S, 0, "A", [[0, 0, 0], [0, 0, -1], [0, 1, 0]]),
            _gen(S, 1, "B", [[0, 0, 1], [0, 0, 0], [-1, 0, 0]]),
            _gen(S, 2, "C", [[0, -1, 0], [1, 0, 0], [0, 0, 0]]),
        )
    if S is Scenario.SPHERE_SO2_STEREO:
        return (_gen(S, 0, "rot", rot2),)
    if S is Scenario.SL2_PLANE:
        return (_gen(S, 0, "e", [[0, 1], [0, 0]]), _gen(S, 1, "f", [[0, 0], [1, 0]]),
                _gen(S, 2, "h", [[1, 0], [0, -1]]))
    if S is Scenario.REL_UNICYCLE:
        boost = z4.copy()
        boost[0, 1] = boost[1, 0] = 1.0
        return (_gen(S, 0, "boost", boost), _gen(S, 1, "rot", z4, [0, 0, 1, 1]))
    if S is Scenario.SU2_QUANTUM:
        return tuple(
            _gen(S, k, name, _real_matrix_of(lambda X, l=l: l @ X + X @ l.T), native=l)
            for k, (name, l) in enumerate(zip(("isx", "isy", "isz"), PAULI_I))
        )
    raise ConfigError(f"unsupported scenario {scenario}")


# |X| = 1 tolerance for sphere configurations, and the wider shell where fields are defined
SPHERE_TOL = 1e-8
SPHERE_NEIGHBORHOOD = 1e-2


@dataclass(frozen=True, eq=False)
class Chart:
    scenario: Scenario
    dim_per_agent: int
    coordinate_names: tuple[str, ...]
    angular: tuple[bool, ...]
    c: float
    generators: tuple[AlgebraGenerator, ...] = field(repr=False)

    def agent_names(self, n_agents: int) -> list[str]:
        """Flat column names, agent-major: x1, y1, x2, y2, ..."""
        return [f"{name}{i}" for i in range(1, n_agents + 1) for name in self.coordinate_names]

    def domain_mask(self, coords, n_agents: int, sphere_tol: float = SPHERE_TOL):
        """Chart-level domain membership for (..., n*dim) coordinates.

        ``sphere_tol`` bounds | |X| - 1 | on SPHERE_SO3; fields use the looser
        SPHERE_NEIGHBORHOOD since they are extended radially off the sphere.
        """
        blocks = np.asarray(coords, dtype=float).reshape(
            np.shape(coords)[:-1] + (n_agents, self.dim_per_agent))
        return _domain_mask(self.scenario, blocks, sphere_tol)

    def domain_predicate(self, x: "Configuration") -> bool:
        return bool(self.domain_mask(x.coords, x.n_agents))


def _domain_mask(scenario: Scenario, blocks, sphere_tol=SPHERE_TOL):
    ok = np.all(np.isfinite(blocks), axis=(-2, -1))
    if scenario is Scenario.SPHERE_SO3:
        ok &= np.all(np.abs(np.linalg.norm(blocks, axis=-1) - 1.0) < sphere_tol, axis=-1)
    elif scenario in (Scenario.SPHERE_SO2_STEREO, Scenario.SL2_PLANE):
        ok &= np.all(np.hypot(blocks[..., 0], blocks[..., 1]) > 1e-12, axis=-1)
    elif scenario is Scenario.REL_UNICYCLE:
        T, rho = blocks[..., 0], blocks[..., 1]
        ok &= np.all((rho > 1e-12) & (T > rho), axis=-1)
    return ok


@lru_cache(maxsize=None)
def get_chart(scenario: Scenario | str, c: float = 1.0) -> Chart:
    scenario = Scenario.parse(scenario)
    if not c > 0:
        raise ConfigError("light speed c must be positive")
    names, angular = _LAYOUT[scenario]
    return Chart(scenario, len(names), names, angular, float(c), _generators(scenario, float(c)))


def canonicalize(scenario: Scenario, coords, n_agents: int):
    """Wrap the angular columns of (..., n*dim) coordinates into [0, 2*pi)."""
    names, angular = _LAYOUT[scenario]
    if not any(angular):
        return coords
    d = len(names)
    out = np.array(coords, dtype=float, copy=True)
    blocks = out.reshape(out.shape[:-1] + (n_agents, d))
    for k, is_angle in enumerate(angular):
        if is_angle:
            blocks[..., k] = wrap_angle(blocks[..., k])
    return out


# --------------------------------------------------------------------------
# configurations

@dataclass(frozen=True, eq=False)
class Configuration:
    """Stacked state of ``n_agents`` agents, flat agent-major layout."""

    scenario: Scenario
    n_agents: int
    coords: np.ndarray
    c: float = 1.0

    def __post_init__(self):
        scenario = Scenario.parse(self.scenario)
        object.__setattr__(self, "scenario", scenario)
        if self.n_agents < 1:
            raise ConfigError("n_agents must be at least 1")
        if scenario is Scenario.SU2_QUANTUM and self.n_agents != 1:
            raise ConfigError("SU2_QUANTUM stores the tensor state as one 8-real block (n_agents = 1)")
        coords = np.array(self.coords, dtype=float).reshape(-1)
        d = get_chart(scenario, self.c).dim_per_agent
        if coords.size != self.n_agents * d:
            raise ConfigError(
                f"{scenario.value} with {self.n_agents} agents needs {self.n_agents * d} "
                f"coordinates, got {coords.size}")
        coords = canonicalize(scenario, coords, self.n_agents)
        coords.setflags(write=False)
        object.__setattr__(self, "coords", coords)

    @property
    def chart(self) -> Chart:
        return get_chart(self.scenario, self.c)

    @property
    def blocks(self) -> np.ndarray:
        return self.coords.reshape(self.n_agents, -1)

    def replace(self, coords) -> "Configuration":
        return Configuration(self.scenario, self.n_agents, coords, self.c)

    def in_domain(self) -> bool:
        return self.chart.domain_predicate(self)


# --------------------------------------------------------------------------
# group elements

@dataclass(frozen=True, eq=False)
class GroupElement:
    """Affine chart action ``X -> linear @ X + shift`` applied to every agent."""

    scenario: Scenario
    linear: np.ndarray
    shift: np.ndarray
    native: np.ndarray | None = None  # complex 2x2 for SU2_QUANTUM


def _element(scenario, linear, shift=None, native=None) -> GroupElement:
    linear = np.array(linear, dtype=float)
    shift = np.zeros(linear.shape[0]) if shift is None else np.array(shift, dtype=float)
    linear.setflags(write=False)
    shift.setflags(write=False)
    return GroupElement(Scenario.parse(scenario), linear, shift, native)


def rotation2(tau: float) -> np.ndarray:
    c, s = np.cos(tau), np.sin(tau)
    return np.array([[c, -s], [s, c]])


def boost2(lam: float, c: float = 1.0) -> np.ndarray:
    """Hyperbolic rotation of (T, x) preserving c^2 T^2 - x^2."""
    ch, sh = np.cosh(lam), np.sinh(lam)
    return np.array([[ch, sh / c], [c * sh, ch]])


def se2_element(tau: float, a: float = 0.0, b: float = 0.0) -> GroupElement:
    """Rotation by ``tau`` followed by translation ``(a, b)``."""
    return _element(Scenario.SE2_PLANE, rotation2(tau), [a, b])


def unicycle_element(tau: float, a: float = 0.0, b: float = 0.0) -> GroupElement:
    linear = np.eye(3)
    linear[:2, :2] = rotation2(tau)
    return _element(Scenario.UNICYCLE, linear, [a, b, tau])


def circle_element(alpha: float) -> GroupElement:
    return _element(Scenario.CIRCLE, [[1.0]], [alpha])


def so2_stereo_element(tau: float) -> GroupElement:
    return _element(Scenario.SPHERE_SO2_STEREO, rotation2(tau))


def so3_element(rotation) -> GroupElement:
    return _element(Scenario.SPHERE_SO3, rotation)


def sl2_element(matrix) -> GroupElement:
    return _element(Scenario.SL2_PLANE, matrix)


def rel_line_element(lam: float, a: float = 0.0, b: float = 0.0, c: float = 1.0) -> GroupElement:
    """Boost of rapidity ``lam`` followed by translation ``(a, b)`` in (T, x)."""
    return _element(Scenario.REL_LINE, boost2(lam, c), [a, b])


def rel_plane_element(lorentz, shift=(0.0, 0.0, 0.0)) -> GroupElement:
    return _element(Scenario.REL_PLANE, lorentz, shift)


def rel_unicycle_element(lam: float, omega: float) -> GroupElement:
    linear = np.eye(4)
    linear[:2, :2] = boost2(lam)
    return _element(Scenario.REL_UNICYCLE, linear, [0.0, 0.0, omega, omega])


def su2_element(g) -> GroupElement:
    g = np.array(g, dtype=complex)
    g.setflags(write=False)
    return _element(Scenario.SU2_QUANTUM, _real_matrix_of(lambda X: g @ X @ g.T), native=g)


def identity(scenario: Scenario | str, c: float = 1.0) -> GroupElement:
    scenario = Scenario.parse(scenario)
    d = get_chart(scenario, c).dim_per_agent
    native = np.eye(2, dtype=complex) if scenario is Scenario.SU2_QUANTUM else None
    return _element(scenario, np.eye(d), native=native)


def compose(g2: GroupElement, g1: GroupElement) -> GroupElement:
    """The product g2 * g1 (apply g1 first)."""
    if g1.scenario is not g2.scenario:
        raise ConfigError("cannot compose elements of different scenarios")
    native = None if g1.native is None else g2.native @ g1.native
    return _element(g1.scenario, g2.linear @ g1.linear, g2.linear @ g1.shift + g2.shift, native)


def inverse(g: GroupElement) -> GroupElement:
    inv = np.linalg.inv(g.linear)
    native = None if g.native is None else np.linalg.inv(g.native)
    return _element(g.scenario, inv, -inv @ g.shift, native)


def group_constraint_residual(g: GroupElement, c: float = 1.0) -> float:
    """How far the stored payload is from satisfying the group's defining equations."""
    S, L = g.scenario, g.linear
    if S is Scenario.SU2_QUANTUM:
        u = g.native
        return float(max(np.abs(u.conj().T @ u - np.eye(2)).max(), abs(np.linalg.det(u) - 1)))
    if S is Scenario.CIRCLE:
        return float(abs(L[0, 0] - 1))
    if S in (Scenario.SE2_PLANE, Scenario.SPHERE_SO2_STEREO, Scenario.SPHERE_SO3, Scenario.UNICYCLE):
        R = L[:3, :3] if S is Scenario.SPHERE_SO3 else L[:2, :2]
        res = max(np.abs(R.T @ R - np.eye(len(R))).max(), abs(np.linalg.det(R) - 1))
        if S is Scenario.UNICYCLE:
            res = max(res, np.abs(L[2] - [0, 0, 1]).max(), np.abs(L[:2, 2]).max())
        return float(res)
    if S is Scenario.SL2_PLANE:
        return float(abs(np.linalg.det(L) - 1))
    if S in (Scenario.REL_LINE, Scenario.REL_PLANE, Scenario.REL_UNICYCLE):
        B = L[:2, :2] if S is Scenario.REL_UNICYCLE else L
        eta = np.diag([c * c] + [-1.0] * (len(B) - 1))
        if S is Scenario.REL_UNICYCLE:
            eta = np.diag([1.0, -1.0])
        res = max(np.abs(B.T @ eta @ B - eta).max(), abs(np.linalg.det(B) - 1))
        return float(res if B[0, 0] > 0 else np.inf)
    raise ConfigError(f"unsupported scenario {S}")


def act_coords(g: GroupElement, coords, n_agents: int):
    """Diagonal action on raw (..., n*dim) coordinates; no domain check."""
    L = g.linear
    d = L.shape[0]
    coords = np.asarray(coords, dtype=float)
    blocks = coords.reshape(coords.shape[:-1] + (n_agents, d))
    out = (blocks @ L.T + g.shift).reshape(coords.shape)
    return canonicalize(g.scenario, out, n_agents)


def act(g: GroupElement, x: Configuration) -> Configuration:
    """Apply ``g`` to every agent of ``x``."""
    if g.scenario is not x.scenario:
        raise ConfigError(f"group element for {g.scenario.value} applied to {x.scenario.value}")
    out = act_coords(g, x.coords, x.n_agents)
    if not x.chart.domain_mask(out, x.n_agents):
        raise DomainViolation(f"action maps the configuration out of the {x.scenario.value} domain")
    return x.replace(out)


def generator_coords(gen: AlgebraGenerator, coords, n_agents: int):
    """Diagonal extension of ``gen`` on raw (..., n*dim) coordinates."""
    coords = np.asarray(coords, dtype=float)
    d = gen.matrix.shape[0]
    blocks = coords.reshape(coords.shape[:-1] + (n_agents, d))
    return gen.eval(blocks).reshape(coords.shape)


def generator_field(gen: AlgebraGenerator, x: Configuration) -> np.ndarray:
    """Diagonal extension l^(x) = (l(X1), ..., l(XN)), flat."""
    if gen.scenario is not x.scenario:
        raise ConfigError("generator and configuration belong to different scenarios")
    if not x.in_domain():
        raise DomainViolation("generator evaluated outside the chart domain")
    return generator_coords(gen, x.coords, x.n_agents)


def group_exp(gen: AlgebraGenerator, t: float) -> GroupElement:
    """Closed-form exp(t * gen) via the augmented affine matrix."""
    d = gen.matrix.shape[0]
    aug = np.zeros((d + 1, d + 1))
    aug[:d, :d] = gen.matrix
    aug[:d, d] = gen.offset
    E = expm(t * aug)
    native = None if gen.native is None else expm(t * gen.native)
    return _element(gen.scenario, E[:d, :d], E[:d, d], native)


def exp_action(gen: AlgebraGenerator, t: float, x: Configuration) -> Configuration:
    """Flow of the diagonal generator for time ``t``."""
    return act(group_exp(gen, t), x)


def structure_constants(scenario: Scenario | str, c: float = 1.0) -> np.ndarray:
    """``C[i, j, k]`` with [l_i, l_j] = sum_k C[i, j, k] l_k.

    The vector-field bracket convention is [X, Y] = DY.X - DX.Y. For affine
    fields that gives (M2 M1 - M1 M2, M2 b1 - M1 b2).
    """
    gens = get_chart(scenario, c).generators
    basis = np.array([np.concatenate([g.matrix.ravel(), g.offset]) for g in gens]).T
    k = len(gens)
    out = np.zeros((k, k, k))
    for i, gi in enumerate(gens):
        for j, gj in enumerate(gens):
            M = gj.matrix @ gi.matrix - gi.matrix @ gj.matrix
            b = gj.matrix @ gi.offset - gi.matrix @ gj.offset
            target = np.concatenate([M.ravel(), b])
            coef, *_ = np.linalg.lstsq(basis, target, rcond=None)
            out[i, j] = np.where(np.abs(coef) < 1e-12, 0.0, coef)
    return out


# --------------------------------------------------------------------------
# random sampling of group elements (used by checks and tests)

def random_rotation3(rng: np.random.Generator) -> np.ndarray:
    q = rng.normal(size=4)
    w, x, y, z = q / np.linalg.norm(q)
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
        [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
        [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)],
    ])


def random_su2(rng: np.random.Generator) -> np.ndarray:
    q = rng.normal(size=4)
    a, b, c, d = q / np.linalg.norm(q)
    return np.array([[a + 1j * b, -c + 1j * d], [c + 1j * d, a - 1j * b]])


def random_group_element(scenario: Scenario | str, rng: np.random.Generator,
                         c: float = 1.0) -> GroupElement:
    """Draw an element with moderate parameters (bounded boosts and shears)."""
    S = Scenario.parse(scenario)
    u = rng.uniform
    if S is Scenario.SE2_PLANE:
        return se2_element(u(0, TAU), u(-3, 3), u(-3, 3))
    if S is Scenario.UNICYCLE:
        return unicycle_element(u(0, TAU), u(-3, 3), u(-3, 3))
    if S is Scenario.CIRCLE:
        return circle_element(u(0, TAU))
    if S is Scenario.SPHERE_SO2_STEREO:
        return so2_stereo_element(u(0, TAU))
    if S is Scenario.SPHERE_SO3:
        return so3_element(random_rotation3(rng))
    if S is Scenario.SL2_PLANE:
        e, f, h = rng.normal(scale=0.4, size=3)
        return sl2_element(expm(np.array([[h, e], [f, -h]])))
    if S is Scenario.REL_LINE:
        return rel_line_element(u(-1, 1), u(-3, 3), u(-3, 3), c)
    if S is Scenario.REL_PLANE:
        gens = get_chart(S, c).generators[3:]
        A = sum(coef * g.matrix for coef, g in zip(rng.uniform(-0.8, 0.8, size=3), gens))
        return rel_plane_element(expm(A), rng.uniform(-3, 3, size=3))
    if S is Scenario.REL_UNICYCLE:
        return rel_unicycle_element(u(-0.5, 0.5), u(0, TAU))
    if S is Scenario.SU2_QUANTUM:
        return su2_element(random_su2(rng))
    raise ConfigError(f"unsupported scenario {S}")


# --------------------------------------------------------------------------
# quaternion rank check

QUAT_I = np.array([[0, -1, 0, 0], [1, 0, 0, 0], [0, 0, 0, 1], [0, 0, -1, 0]], dtype=float)
QUAT_J = np.array([[0, 0, 1, 0], [0, 0, 0, 1], [-1, 0, 0, 0], [0, -1, 0, 0]], dtype=float)
QUAT_K = np.array([[0, 0, 0, -1], [0, 0, 1, 0], [0, -1, 0, 0], [1, 0, 0, 0]], dtype=float)


def quaternion_frame(x) -> np.ndarray:
    """Columns x, i^x, j^x, k^x."""
    x = np.asarray(x, dtype=float)
    return np.column_stack([x, QUAT_I @ x, QUAT_J @ x, QUAT_K @ x])


def quaternion_rank_check(x) -> bool:
    """True iff {x, i^x, j^x, k^x} is a basis of R^4."""
    x = np.asarray(x, dtype=float)
    if x.shape != (4,):
        raise ConfigError("quaternion rank check needs a 4-vector")
    norm = np.linalg.norm(x)
    if norm == 0:
        raise DomainViolation("quaternion rank check is undefined at x = 0")
    return bool(abs(np.linalg.det(quaternion_frame(x))) > 1e-12 * norm**4)


# --------------------------------------------------------------------------
# sphere charts

def sphere_chart_view(points) -> np.ndarray:
    """Unit vectors with z > 0 -> (rho, theta) of the upper-hemisphere chart."""
    points = np.asarray(points, dtype=float)
    if np.any(points[..., 2] <= 0):
        raise DomainViolation("the (rho, theta) chart only covers z > 0")
    rho = np.hypot(points[..., 0], points[..., 1])
    return np.stack([rho, wrap_angle(np.arctan2(points[..., 1], points[..., 0]))], axis=-1)


def sphere_from_chart(rho_theta) -> np.ndarray:
    rho_theta = np.asarray(rho_theta, dtype=float)
    rho, th = rho_theta[..., 0], rho_theta[..., 1]
    return np.stack([rho * np.cos(th), rho * np.sin(th), np.sqrt(1 - rho**2)], axis=-1)


def sphere_chart_generator(index: int, rho_theta) -> np.ndarray:
    """Generators A, B, C of so(3) written in the (rho, theta) chart."""
    rho_theta = np.asarray(rho_theta, dtype=float)
    rho, th = rho_theta[..., 0], rho_theta[..., 1]
    if np.any(rho <= 0) or np.any(rho >= 1):
        raise DomainViolation("(rho, theta) chart generators need 0 < rho < 1")
    w = np.sqrt(1 - rho**2)
    if index == 0:
        out = (-w * np.sin(th), -w * np.cos(th) / rho)
    elif index == 1:
        out = (w * np.cos(th), -w * np.sin(th) / rho)
    elif index == 2:
        out = (np.zeros_like(rho), np.ones_like(rho))
    else:
        raise ConfigError("so(3) has three generators")
    return np.stack(out, axis=-1)


def stereographic(points) -> np.ndarray:
    """(x, y, z) on the unit sphere -> (x, y) / (1 - z)."""
    points = np.asarray(points, dtype=float)
    den = 1 - points[..., 2]
    if np.any(np.abs(den) < 1e-12) or np.any(np.abs(1 + points[..., 2]) < 1e-12):
        raise DomainViolation("stereographic projection is undefined at the poles")
    return points[..., :2] / den[..., None]


def inverse_stereographic(plane) -> np.ndarray:
    plane = np.asarray(plane, dtype=float)
    r2 = np.sum(plane**2, axis=-1)
    return np.concatenate([2 * plane, (r2 - 1)[..., None]], axis=-1) / (r2 + 1)[..., None]
