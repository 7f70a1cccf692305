"""Scenario files: strict JSON descriptions of a family, an initial state and a run.

Example::

    {
      "name": "A3",
      "family": "se2",
      "n_agents": 2,
      "params": {"lambda1": "-1 + rho2", "lambda2": "1 - rho2", "mu1": "0", "mu2": "0"},
      "initial": [0, 0, 1, 1],
      "integrator": {"scheme": "rk45_adaptive", "t_end": 20},
      "checks": ["bracket", {"name": "flow_equivariance", "tol": 1e-6}],
      "outputs": {"csv": true, "svg": true}
    }
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from . import families as fam
from .checks import CHECKS, default_checks
from .errors import ConfigError, DomainViolation, ExprSyntaxError
from .integrate import IntegratorConfig
from .lie import Configuration, Scenario, get_chart

FAMILY_KINDS = (
    "se2", "se2_pepd", "gradient_se2", "counterexample_mu", "rel_line", "rel_plane", "circle",
    "sphere_so3", "sphere_so2", "sl2", "unicycle", "rel_unicycle", "quantum",
    "broken_se2_translation", "lateral_slip",
)

_FAMILY_SCENARIO = {
    "se2": Scenario.SE2_PLANE, "se2_pepd": Scenario.SE2_PLANE, "gradient_se2": Scenario.SE2_PLANE,
    "counterexample_mu": Scenario.SE2_PLANE, "broken_se2_translation": Scenario.SE2_PLANE,
    "rel_line": Scenario.REL_LINE, "rel_plane": Scenario.REL_PLANE, "circle": Scenario.CIRCLE,
    "sphere_so3": Scenario.SPHERE_SO3, "sphere_so2": Scenario.SPHERE_SO2_STEREO,
    "sl2": Scenario.SL2_PLANE, "unicycle": Scenario.UNICYCLE, "lateral_slip": Scenario.UNICYCLE,
    "rel_unicycle": Scenario.REL_UNICYCLE, "quantum": Scenario.SU2_QUANTUM,
}

_KEYS = {"name", "title", "scenario_id", "family", "n_agents", "c", "params", "indices", "strict",
         "initial", "integrator", "checks", "outputs", "notes"}
_CHECK_NAMES = set(CHECKS) | {"circulation"}

EXAMPLE_SETS = {
    "A": [f"A{k}" for k in range(1, 13)],
    "B": [f"B{k}" for k in range(1, 7)],
    "C": [f"C{k}" for k in range(1, 5)],
    "D": [f"D{k}" for k in range(1, 5)],
    "E": [f"E{k}" for k in range(1, 4)],
    "unicycle": ["unicycle"],
    "quantum": ["quantum"],
    "extras": ["rel_unicycle", "sl2", "sphere_so3", "sphere_so3_n3", "rel_plane", "pepd3",
               "gradient", "mu_field"],
    "broken": ["broken_translation", "broken_circle", "broken_slip"],
}


@dataclass(frozen=True)
class CheckSpec:
    name: str
    tol: float | None = None
    expect: float = 0.0


@dataclass(frozen=True, eq=False)
class ScenarioSpec:
    name: str
    title: str
    family: fam.DynamicsFamily
    initial: Configuration
    integrator: IntegratorConfig
    checks: tuple
    outputs: dict = field(default_factory=lambda: {"csv": True, "svg": True})
    notes: str = ""


def _build_family(kind, n, params, c, indices, strict):
    p = dict(params)
    if kind == "se2":
        return fam.se2_family(n, p, strict=strict)
    if kind == "se2_pepd":
        _only(kind, p, {"lambda", "mu"})
        return fam.se2_pepd_family(n, p["lambda"], p["mu"])
    if kind == "gradient_se2":
        _only(kind, p, {"Lambda"})
        return fam.gradient_flow_se2(p["Lambda"], n)
    if kind == "counterexample_mu":
        _only(kind, p, set())
        return fam.counterexample_mu_field(n)
    if kind == "rel_line":
        return fam.rel_line_family(n, c, p, **({"indices": indices} if indices else {}))
    if kind == "rel_plane":
        return fam.rel_plane_family(n, p, c=c, **({"indices": indices} if indices else {}))
    if kind == "circle":
        return fam.circle_family(n, p, strict=strict)
    if kind == "sphere_so3":
        return fam.sphere_so3_family(n, p, indices=indices or None)
    if kind == "sphere_so2":
        return fam.sphere_so2_family(n, p)
    if kind == "sl2":
        return fam.sl2_family(n, p, **({"indices": indices} if indices else {}))
    if kind == "unicycle":
        return fam.unicycle_family(n, p, strict=strict)
    if kind == "rel_unicycle":
        return fam.rel_unicycle_family(n, p)
    if kind == "quantum":
        _only(kind, p, {"phi1", "phi2"})
        return fam.quantum_family(p["phi1"], p["phi2"])
    if kind == "broken_se2_translation":
        return broken_translation_field(fam.se2_family(n, p))
    if kind == "lateral_slip":
        _only(kind, p, set())
        return lateral_slip_field(n)
    raise ConfigError(f"unknown family {kind!r}; known: {', '.join(FAMILY_KINDS)}")


def _only(kind, params, slots):
    if set(params) != slots:
        raise ConfigError(f"{kind} takes parameter slots {sorted(slots)}, got {sorted(params)}")


def broken_translation_field(base: fam.DynamicsFamily) -> fam.DynamicsFamily:
    """Negative control: every agent gets an extra (x1, 0), which breaks translation equivariance."""
    n = base.n_agents

    def extra(coords):
        out = np.zeros_like(coords)
        out[..., 0::2] = coords[..., :1]
        return out
    return fam.perturbed(base, extra, kind="broken_se2_translation")


def lateral_slip_field(n: int) -> fam.DynamicsFamily:
    """Negative control: every unicycle slides with velocity (0, 1, 0), violating the constraint."""
    def slip(coords):
        out = np.zeros_like(coords)
        out[..., 1::3] = 1.0
        return out
    return fam.custom_family(Scenario.UNICYCLE, n, slip, kind="lateral_slip")


def _check_specs(raw, family):
    if raw is None:
        return tuple(CheckSpec(n) for n in default_checks(family))
    if not isinstance(raw, list):
        raise ConfigError("checks must be a list")
    out = []
    for item in raw:
        if isinstance(item, str):
            item = {"name": item}
        if not isinstance(item, dict) or "name" not in item:
            raise ConfigError(f"bad check entry {item!r}")
        extra = set(item) - {"name", "tol", "expect"}
        if extra:
            raise ConfigError(f"check {item['name']!r}: unknown keys {sorted(extra)}")
        if item["name"] not in _CHECK_NAMES:
            raise ConfigError(f"unknown check {item['name']!r}; known: {sorted(_CHECK_NAMES)}")
        tol = item.get("tol")
        if tol is not None and not (isinstance(tol, (int, float)) and tol > 0):
            raise ConfigError(f"check {item['name']!r}: tol must be a positive number")
        out.append(CheckSpec(item["name"], None if tol is None else float(tol),
                             float(item.get("expect", 0.0))))
    return tuple(out)


def parse_scenario(data: dict, origin: str = "<scenario>") -> ScenarioSpec:
    """Validate a decoded scenario document and build its family and initial state."""
    if not isinstance(data, dict):
        raise ConfigError(f"{origin}: top level must be an object")
    unknown = set(data) - _KEYS
    if unknown:
        raise ConfigError(f"{origin}: unknown keys {sorted(unknown)}")
    for key in ("name", "family", "n_agents", "initial"):
        if key not in data:
            raise ConfigError(f"{origin}: missing key {key!r}")
    kind = data["family"]
    if kind not in _FAMILY_SCENARIO:
        raise ConfigError(f"{origin}: unknown family {kind!r}; known: {', '.join(FAMILY_KINDS)}")
    scenario = _FAMILY_SCENARIO[kind]
    if "scenario_id" in data:
        try:
            declared = Scenario.parse(data["scenario_id"])
        except (ConfigError, ValueError):
            raise ConfigError(f"{origin}: unknown scenario_id {data['scenario_id']!r}") from None
        if declared is not scenario:
            raise ConfigError(f"{origin}: family {kind!r} lives on {scenario.value}, "
                              f"not {declared.value}")
    n = data["n_agents"]
    if not isinstance(n, int) or isinstance(n, bool) or n < 1:
        raise ConfigError(f"{origin}: n_agents must be a positive integer")
    c = float(data.get("c", 1.0))
    params = data.get("params", {})
    if not isinstance(params, dict):
        raise ConfigError(f"{origin}: params must be an object")
    for slot, text in params.items():
        if not isinstance(text, (str, int, float)) or isinstance(text, bool):
            raise ConfigError(f"{origin}: params.{slot} must be expression text or a number")
    try:
        family = _build_family(kind, n, params, c, tuple(data.get("indices", ())),
                               bool(data.get("strict", True)))
    except ExprSyntaxError as exc:
        slot = next((s for s, t in params.items() if str(t) == exc.source), "?")
        raise ConfigError(f"{origin}: params.{slot}: {exc}") from exc
    except ConfigError as exc:
        raise ConfigError(f"{origin}: {exc}") from exc

    initial = data["initial"]
    dim = get_chart(scenario, c).dim_per_agent
    if not isinstance(initial, list) or len(initial) != n * dim:
        raise ConfigError(f"{origin}: initial must list {n} x {dim} = {n * dim} numbers")
    try:
        x0 = Configuration(scenario, n, np.array(initial, dtype=float), c)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{origin}: initial: {exc}") from exc

    integ = data.get("integrator", {})
    if not isinstance(integ, dict):
        raise ConfigError(f"{origin}: integrator must be an object")
    try:
        cfg = IntegratorConfig(**integ)
    except TypeError as exc:
        raise ConfigError(f"{origin}: integrator: {exc}") from exc

    outputs = {"csv": True, "svg": True, **data.get("outputs", {})}
    if set(outputs) != {"csv", "svg"}:
        raise ConfigError(f"{origin}: outputs takes only csv and svg")
    return ScenarioSpec(str(data["name"]), str(data.get("title", data["name"])), family, x0, cfg,
                        _check_specs(data.get("checks"), family),
                        {k: bool(v) for k, v in outputs.items()}, str(data.get("notes", "")))


def bundled_names() -> list[str]:
    root = resources.files("equidyn") / "scenarios"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json"))


def resolve(path_or_name: str | Path) -> Path:
    """A file path, or the name of a bundled scenario (``A3``)."""
    p = Path(path_or_name)
    if p.exists():
        return p
    bundled = resources.files("equidyn") / "scenarios" / f"{path_or_name}.json"
    if bundled.is_file():
        return Path(str(bundled))
    raise ConfigError(f"no scenario file or bundled scenario named {str(path_or_name)!r}")


def load_scenario(path_or_name: str | Path) -> ScenarioSpec:
    path = resolve(path_or_name)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON at line {exc.lineno}, column {exc.colno}: "
                          f"{exc.msg}") from exc
    return parse_scenario(data, str(path))


def example_set(name: str) -> list[ScenarioSpec]:
    if name not in EXAMPLE_SETS:
        raise ConfigError(f"unknown example set {name!r}; known: {', '.join(EXAMPLE_SETS)}")
    return [load_scenario(n) for n in EXAMPLE_SETS[name]]


def initial_in_domain(spec: ScenarioSpec) -> None:
    if not bool(spec.family.valid_mask(spec.initial.coords)):
        raise DomainViolation(f"{spec.name}: initial state is outside the domain of "
                              f"{spec.family.kind}")
