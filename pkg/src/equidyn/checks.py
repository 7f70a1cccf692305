"""Numerical certification of structural properties of constructed fields.

Every check draws its samples from a random stream derived from
``(seed, check name)``, so reports are reproducible and independent of the
order or parallelism with which checks run.
"""

from __future__ import annotations

import json
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from enum import Enum
from typing import Callable, Sequence

import numpy as np

from .errors import ConfigError, DomainViolation
from .families import DEFAULT_MARGIN, DynamicsFamily
from .integrate import IntegratorConfig, Termination, integrate, integrate_coords
from .invariants import radiality_residual
from .lie import (ISOMETRIC, TAU, Configuration, Scenario, act_coords, complex_to_flat,
                  generator_coords, get_chart, random_group_element, reduce_angle)
from .numdiff import directional_derivative, jacobian

BRACKET_TOL = 1e-4
FLOW_TOL = 1e-6
PERMUTATION_TOL = 1e-10
GRADIENT_TOL = 1e-4
CIRCULATION_TOL = 1e-4
CONSTRAINT_TOL = 1e-12
NORM_TOL = 1e-8
NORM_RADIALITY_TOL = 1e-5


class Verdict(str, Enum):
    PASS = "pass"
    FAIL = "fail"
    INCONCLUSIVE = "inconclusive"


@dataclass(frozen=True)
class CheckEntry:
    name: str
    samples: int
    max_residual: float
    tolerance: float
    verdict: Verdict
    detail: str = ""

    @classmethod
    def judge(cls, name, samples, residual, tol, detail=""):
        verdict = Verdict.PASS if residual <= tol else Verdict.FAIL
        return cls(name, int(samples), float(residual), float(tol), verdict, detail)

    @classmethod
    def inconclusive(cls, name, samples, tol, detail):
        return cls(name, int(samples), float("nan"), float(tol), Verdict.INCONCLUSIVE, detail)


@dataclass
class CheckReport:
    family: dict
    seed: int
    entries: list = field(default_factory=list)

    @property
    def verdict(self) -> Verdict:
        verdicts = {e.verdict for e in self.entries}
        if Verdict.FAIL in verdicts:
            return Verdict.FAIL
        if Verdict.INCONCLUSIVE in verdicts:
            return Verdict.INCONCLUSIVE
        return Verdict.PASS

    @property
    def passed(self) -> bool:
        return self.verdict is Verdict.PASS

    def entry(self, name: str) -> CheckEntry:
        for e in self.entries:
            if e.name == name:
                return e
        raise KeyError(name)

    def to_dict(self) -> dict:
        def clean(e):
            d = asdict(e)
            d["verdict"] = e.verdict.value
            if not np.isfinite(d["max_residual"]):
                d["max_residual"] = None
            return d
        return {"family": self.family, "seed": self.seed, "verdict": self.verdict.value,
                "checks": [clean(e) for e in self.entries]}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"

    def to_text(self) -> str:
        rows = [("check", "samples", "max residual", "tolerance", "verdict")]
        for e in self.entries:
            rows.append((e.name, str(e.samples), f"{e.max_residual:.3e}", f"{e.tolerance:.1e}",
                         e.verdict.value))
        widths = [max(len(r[k]) for r in rows) for k in range(5)]
        lines = [f"family: {self.family.get('kind')} on {self.family.get('scenario_id')} "
                 f"(N={self.family.get('n_agents')}), seed {self.seed}"]
        for r in rows:
            lines.append("  ".join(cell.ljust(w) for cell, w in zip(r, widths)).rstrip())
        lines.append(f"overall: {self.verdict.value}")
        return "\n".join(lines) + "\n"


def check_rng(seed: int, name: str) -> np.random.Generator:
    """Independent stream per (seed, check name)."""
    return np.random.default_rng(np.random.SeedSequence([int(seed) & 0xFFFFFFFF,
                                                         zlib.crc32(name.encode())]))


# --------------------------------------------------------------------------
# sampling

def _propose(scenario: Scenario, n: int, count: int, rng, c: float):
    chart = get_chart(scenario, c)
    d = chart.dim_per_agent
    S = chart.scenario
    if S in (Scenario.SE2_PLANE, Scenario.SL2_PLANE, Scenario.SPHERE_SO2_STEREO):
        return rng.uniform(-3, 3, size=(count, n * d))
    if S is Scenario.UNICYCLE:
        out = rng.uniform(-3, 3, size=(count, n, d))
        out[..., 2] = rng.uniform(0, TAU, size=(count, n))
        return out.reshape(count, -1)
    if S is Scenario.CIRCLE:
        return rng.uniform(0, TAU, size=(count, n))
    if S is Scenario.SPHERE_SO3:
        v = rng.normal(size=(count, n, 3))
        return (v / np.linalg.norm(v, axis=-1, keepdims=True)).reshape(count, -1)
    if S in (Scenario.REL_LINE, Scenario.REL_PLANE):
        base = rng.uniform(-3, 3, size=(count, 1, d))
        dT = rng.uniform(0.5, 3, size=(count, n - 1))
        if S is Scenario.REL_LINE:
            dx = rng.uniform(-1, 1, size=(count, n - 1)) * 0.9 * c * dT
            diff = np.stack([dT, dx], axis=-1)
        else:
            radius = np.sqrt(rng.uniform(0, 1, size=(count, n - 1))) * 0.9 * c * dT
            ang = rng.uniform(0, TAU, size=(count, n - 1))
            diff = np.stack([dT, radius * np.cos(ang), radius * np.sin(ang)], axis=-1)
        rest = base + diff
        return np.concatenate([base, rest], axis=1).reshape(count, -1)
    if S is Scenario.REL_UNICYCLE:
        rho = rng.uniform(0.3, 3, size=(count, n))
        T = rho / rng.uniform(0.1, 0.9, size=(count, n))
        al, th = rng.uniform(0, TAU, size=(2, count, n))
        return np.stack([T, rho, al, th], axis=-1).reshape(count, -1)
    if S is Scenario.SU2_QUANTUM:
        X = rng.normal(size=(count, 2, 2)) + 1j * rng.normal(size=(count, 2, 2))
        return complex_to_flat(X)
    raise ConfigError(f"no sampler for {S}")


def sample_configurations(family: DynamicsFamily, count: int, rng: np.random.Generator,
                          margin: float = DEFAULT_MARGIN) -> np.ndarray:
    """Rejection-sample ``count`` well-conditioned domain points, shape (count, D).

    Raises ConfigError when more than 90% of proposals are rejected.
    """
    chunk = max(10 * count, 100)
    proposals = _propose(family.scenario, family.n_agents, chunk, rng, family.c)
    ok = family.valid_mask(proposals)
    ok &= family.conditioning(proposals) >= margin
    rate = float(np.mean(ok))
    if rate < 0.1:
        raise ConfigError(f"{family.kind}: {100 * (1 - rate):.1f}% of sampled configurations "
                          "were rejected; the admissible domain is too thin")
    return proposals[ok][:count]


def _sample_actions(family, xs, n_groups, rng, margin):
    """For each x (rows of xs) draw n_groups elements keeping g.x well conditioned.

    Returns g_list (list of lists) and acted coordinates (n_groups, len(xs), D).
    """
    n = family.n_agents
    acted = np.empty((n_groups,) + xs.shape)
    elements = [[None] * len(xs) for _ in range(n_groups)]
    for k in range(n_groups):
        g = random_group_element(family.scenario, rng, family.c)
        y = act_coords(g, xs, n)
        good = family.valid_mask(y) & (family.conditioning(y) >= margin / 2)
        acted[k] = y
        for i in range(len(xs)):
            elements[k][i] = g
            tries = 0
            while not good[i]:
                tries += 1
                if tries > 200:
                    raise ConfigError(f"{family.kind}: cannot find group elements keeping "
                                      "sampled configurations in the domain")
                h = random_group_element(family.scenario, rng, family.c)
                yi = act_coords(h, xs[i], n)
                good_i = family.valid_mask(yi) & (family.conditioning(yi) >= margin / 2)
                if good_i:
                    acted[k, i], elements[k][i], good[i] = yi, h, True
    return elements, acted


def _state_difference(scenario, n, a, b, c=1.0):
    """a - b with angular components reduced to (-pi, pi]."""
    chart = get_chart(scenario, c)
    diff = np.asarray(a) - np.asarray(b)
    mask = np.tile(np.asarray(chart.angular, dtype=bool), n)
    if mask.any():
        diff = diff.copy()
        diff[..., mask] = reduce_angle(diff[..., mask])
    return diff


# --------------------------------------------------------------------------
# checks

def bracket_check(f: DynamicsFamily, samples: int = 50, seed: int = 0, *,
                  tol: float = BRACKET_TOL, xs=None) -> CheckEntry:
    """max over samples and generators of |[F, l^](x)| / (1 + |F| + |l^|)."""
    name = "bracket"
    xs = sample_configurations(f, samples, check_rng(seed, name)) if xs is None else np.asarray(xs)
    n = f.n_agents
    try:
        F = f.field_coords(xs)
        worst = 0.0
        for gen in f.chart.generators:
            def lhat(y, gen=gen):
                return generator_coords(gen, y, n)
            v = lhat(xs)
            br = directional_derivative(lhat, xs, F) - directional_derivative(f.field_coords, xs, v)
            scale = 1 + np.linalg.norm(F, axis=-1) + np.linalg.norm(v, axis=-1)
            worst = max(worst, float((np.abs(br).max(axis=-1) / scale).max()))
    except DomainViolation as exc:
        return CheckEntry.inconclusive(name, len(xs), tol, f"stencil left the domain: {exc}")
    return CheckEntry.judge(name, len(xs), worst, tol)


def flow_equivariance_check(f: DynamicsFamily, g_samples: int = 20, x_samples: int = 50,
                            t: float = 1.0, cfg: IntegratorConfig | None = None, seed: int = 0,
                            *, tol: float = FLOW_TOL, retries: int = 4) -> CheckEntry:
    """Compare g.Phi_t(x) with Phi_t(g.x) over x_samples * g_samples pairs."""
    name = "flow_equivariance"
    rng = check_rng(seed, name)
    xs = sample_configurations(f, x_samples, rng)
    elements, acted = _sample_actions(f, xs, g_samples, rng, DEFAULT_MARGIN)
    n, D = f.n_agents, f.dim
    cfg = cfg or IntegratorConfig()
    horizon = t
    for _ in range(retries + 1):
        run = cfg.replace(scheme="rk4_fixed", t_end=horizon, arclength=False, record_every=10**9)
        left = integrate(f, xs, run)
        right = integrate(f, acted.reshape(-1, D), run)
        if left.completed and right.completed:
            break
        horizon /= 2
    else:
        return CheckEntry.inconclusive(name, xs.shape[0] * g_samples, tol,
                                       f"trajectories leave the domain even for t={2 * horizon:g}")
    end_left, end_right = left.final, right.final.reshape(acted.shape)
    worst = 0.0
    for k in range(g_samples):
        for i in range(len(xs)):
            moved = act_coords(elements[k][i], end_left[i], n)
            diff = _state_difference(f.scenario, n, moved, end_right[k, i], f.c)
            worst = max(worst, float(np.abs(diff).max() / (1 + np.linalg.norm(end_right[k, i]))))
    detail = "" if horizon == t else f"horizon reduced to t={horizon:g}"
    return CheckEntry.judge(name, len(xs) * g_samples, worst, tol, detail)


def permutation_check(f: DynamicsFamily, samples: int = 50, seed: int = 0, *,
                      tol: float = PERMUTATION_TOL) -> CheckEntry:
    """F(sigma x) = sigma F(x) for random transpositions sigma."""
    name = "permutation"
    n = f.n_agents
    if n < 2:
        raise ConfigError("permutation_check needs at least two agents")
    rng = check_rng(seed, name)
    xs = sample_configurations(f, samples, rng)
    d = f.chart.dim_per_agent
    worst = 0.0
    for x in xs:
        i, j = rng.choice(n, size=2, replace=False)
        order = np.arange(n)
        order[[i, j]] = order[[j, i]]

        def permute(v):
            return v.reshape(n, d)[order].reshape(-1)

        F = f.field_coords(x)
        Fp = f.field_coords(permute(x))
        diff = _state_difference(f.scenario, n, Fp, permute(F), f.c)
        worst = max(worst, float(np.abs(diff).max() / (1 + np.linalg.norm(F))))
    return CheckEntry.judge(name, len(xs), worst, tol)


def gradient_check(f: DynamicsFamily, samples: int = 50, seed: int = 0, *,
                   tol: float = GRADIENT_TOL) -> CheckEntry:
    """Symmetry of the finite-difference Jacobian: max |J - J^T| <= tol (1 + |J|)."""
    name = "gradient_symmetry"
    if f.scenario is not Scenario.SE2_PLANE:
        raise ConfigError("gradient_check needs a Euclidean scenario (SE2_PLANE)")
    xs = sample_configurations(f, samples, check_rng(seed, name))
    worst = 0.0
    for x in xs:
        J = jacobian(f.field_coords, x)
        worst = max(worst, float(np.abs(J - J.T).max() / (1 + np.linalg.norm(J))))
    return CheckEntry.judge(name, len(xs), worst, tol)


def unit_loop(center=(0.0, 0.0), radius: float = 1.0) -> Callable:
    """Loop s in [0, 1] -> (X1 = center, X2 = center + radius (cos 2 pi s, sin 2 pi s))."""
    cx, cy = center

    def loop(s):
        s = np.asarray(s, dtype=float)
        ang = TAU * s
        return np.stack([np.full_like(s, cx), np.full_like(s, cy),
                         cx + radius * np.cos(ang), cy + radius * np.sin(ang)], axis=-1)
    return loop


def circulation_check(f: DynamicsFamily, loop: Callable | None = None, steps: int = 4000) -> float:
    """Trapezoidal line integral of the 1-form F . dX along a closed curve s in [0, 1]."""
    loop = loop or unit_loop()
    points = loop(np.linspace(0.0, 1.0, steps + 1))
    if not np.all(f.valid_mask(points)):
        raise DomainViolation("the loop leaves the domain of the field")
    F = f.field_coords(points)
    chords = np.diff(points, axis=0)
    return float(np.sum(0.5 * (F[1:] + F[:-1]) * chords))


def circulation_entry(f: DynamicsFamily, expect: float = 0.0, *, tol: float = CIRCULATION_TOL,
                      loop: Callable | None = None, steps: int = 4000) -> CheckEntry:
    """|circulation - expect| around ``loop`` (default: X2 on the unit circle about X1)."""
    try:
        value = circulation_check(f, loop, steps)
    except DomainViolation as exc:
        return CheckEntry.inconclusive("circulation", steps, tol, str(exc))
    return CheckEntry.judge("circulation", steps, abs(value - expect), tol,
                            f"circulation {value:.10f}, expected {expect:.10f}")


def constraint_residuals(f: DynamicsFamily, coords) -> np.ndarray:
    """Per-point nonholonomic constraint residual of the field."""
    coords = np.atleast_2d(np.asarray(coords, dtype=float))
    F = f.field_coords(coords).reshape(coords.shape[0], f.n_agents, -1)
    X = coords.reshape(F.shape)
    if f.scenario is Scenario.UNICYCLE:
        th = X[..., 2]
        res = np.abs(-np.sin(th) * F[..., 0] + np.cos(th) * F[..., 1])
    elif f.scenario is Scenario.REL_UNICYCLE:
        T, rho, al, th = (X[..., k] for k in range(4))
        dT, drho, dal = F[..., 0], F[..., 1], F[..., 2]
        lateral = np.abs(drho * np.sin(th - al) - rho * dal * np.cos(th - al))
        boost = np.abs(dT * rho - drho * T)
        res = np.maximum(lateral, boost)
    else:
        raise ConfigError("constraint checks apply to UNICYCLE and REL_UNICYCLE")
    return res.max(axis=-1)


def constraint_check(f: DynamicsFamily, samples: int = 50, seed: int = 0, *,
                     tol: float = CONSTRAINT_TOL, xs=None) -> CheckEntry:
    name = "constraint"
    xs = sample_configurations(f, samples, check_rng(seed, name)) if xs is None else np.asarray(xs)
    return CheckEntry.judge(name, len(np.atleast_2d(xs)), float(constraint_residuals(f, xs).max()),
                            tol)


def norm_conservation_check(f: DynamicsFamily, traj=None, samples: int = 20, seed: int = 0, *,
                            t_end: float = 10.0, dt: float = 1e-2,
                            tol: float | None = None) -> CheckEntry:
    """SU2_QUANTUM: Frobenius norm drift along trajectories.

    Isometric scenarios: radiality of |F|^2 at sampled configurations.
    """
    name = "norm_conservation"
    rng = check_rng(seed, name)
    if f.scenario is Scenario.SU2_QUANTUM:
        tol = NORM_TOL if tol is None else tol
        if traj is None:
            xs = sample_configurations(f, samples, rng)
            xs = xs / np.linalg.norm(xs, axis=-1, keepdims=True)
            traj = integrate(f, xs, IntegratorConfig(t_end=t_end, dt=dt))
            if traj.termination is not Termination.COMPLETED:
                return CheckEntry.inconclusive(name, samples, tol, traj.reason)
        norms = np.linalg.norm(traj.states, axis=-1)
        drift = float(np.abs(norms - norms[:1]).max())
        return CheckEntry.judge(name, norms[0].size, drift, tol)
    if f.scenario not in ISOMETRIC:
        raise ConfigError("norm conservation needs SU2_QUANTUM or an isometric scenario")
    tol = NORM_RADIALITY_TOL if tol is None else tol
    xs = sample_configurations(f, samples, rng)

    def sq_norm(coords):
        return np.sum(f.field_coords(coords) ** 2, axis=-1)

    worst = 0.0
    for x in xs:
        cfg = Configuration(f.scenario, f.n_agents, x, f.c)
        worst = max(worst, radiality_residual(sq_norm, cfg) / (1 + float(sq_norm(x))))
    return CheckEntry.judge("norm_radiality", len(xs), worst, tol)


# --------------------------------------------------------------------------
# suites

def default_checks(f: DynamicsFamily) -> list[str]:
    names = ["bracket", "flow_equivariance"]
    if "pepd" in f.flags:
        names.append("permutation")
    if "gradient" in f.flags:
        names.append("gradient_symmetry")
    if f.scenario in (Scenario.UNICYCLE, Scenario.REL_UNICYCLE):
        names.append("constraint")
    if f.scenario is Scenario.SU2_QUANTUM:
        names.append("norm_conservation")
    return names


CHECKS = {
    "bracket": bracket_check,
    "flow_equivariance": flow_equivariance_check,
    "permutation": permutation_check,
    "gradient_symmetry": gradient_check,
    "constraint": constraint_check,
    "norm_conservation": norm_conservation_check,
}


def run_checks(f: DynamicsFamily, names: Sequence | None = None, *, seed: int = 0,
               samples: int = 50, groups: int = 20, tolerances: dict | None = None,
               expectations: dict | None = None, workers: int = 1) -> CheckReport:
    """Run the named checks (default suite when ``names`` is None) and collect a report.

    ``expectations`` gives target values for value-type checks (circulation).
    """
    names = list(names or default_checks(f))
    tolerances = tolerances or {}
    expectations = expectations or {}
    unknown = [n for n in names if n not in CHECKS and n != "circulation"]
    if unknown:
        raise ConfigError(f"unknown checks {unknown}; known: {sorted(CHECKS)}")

    def run(name):
        kwargs = {"seed": seed}
        if name in tolerances:
            kwargs["tol"] = tolerances[name]
        if name == "circulation":
            return circulation_entry(f, expectations.get(name, 0.0),
                                     **{k: v for k, v in kwargs.items() if k == "tol"})
        if name == "flow_equivariance":
            return flow_equivariance_check(f, groups, samples, **kwargs)
        if name == "norm_conservation":
            return norm_conservation_check(f, samples=min(samples, 20), **kwargs)
        return CHECKS[name](f, samples, **kwargs)

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            entries = list(pool.map(run, names))
    else:
        entries = [run(name) for name in names]
    return CheckReport(f.describe(), int(seed), entries)
