"""Command-line entry point: ``equidyn run | verify | examples``.

Exit codes: 0 ok, 1 a check failed, 2 configuration error, 3 domain
violation, 4 inconclusive check (and none failed).
"""

from __future__ import annotations

import argparse
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from .checks import Verdict, run_checks
from .errors import ConfigError, DomainViolation
from .integrate import Termination, integrate
from .plotting import write_outputs
from .scenario import EXAMPLE_SETS, ScenarioSpec, example_set, initial_in_domain, load_scenario

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_DOMAIN, EXIT_INCONCLUSIVE = 0, 1, 2, 3, 4


def _seed(arg) -> int:
    if arg is not None:
        return arg
    env = os.environ.get("EQUIDYN_SEED")
    if env is None:
        return 0
    try:
        return int(env)
    except ValueError:
        raise ConfigError(f"EQUIDYN_SEED must be an integer, got {env!r}") from None


def run_spec(spec: ScenarioSpec, out_dir: Path) -> tuple[int, str]:
    """Integrate one scenario and write its outputs; returns (exit code, message)."""
    initial_in_domain(spec)
    traj = integrate(spec.family, spec.initial, spec.integrator)
    write_outputs(traj, out_dir, spec.name, spec.title, **spec.outputs)
    if traj.termination is Termination.COMPLETED:
        return EXIT_OK, f"{spec.name}: completed at t={traj.times[-1]:g}"
    return EXIT_DOMAIN, f"{spec.name}: {traj.termination.value} ({traj.reason}); partial output written"


def cmd_run(args) -> int:
    spec = load_scenario(args.scenario)
    code, message = run_spec(spec, Path(args.out))
    print(message, file=sys.stdout if code == EXIT_OK else sys.stderr)
    return code


def _parse_tolerances(items) -> dict:
    out = {}
    for item in items or ():
        name, sep, value = item.partition("=")
        try:
            out[name] = float(value)
        except ValueError:
            sep = ""
        if not sep or out[name] <= 0:
            raise ConfigError(f"--tol expects NAME=POSITIVE_NUMBER, got {item!r}")
    return out


def cmd_verify(args) -> int:
    spec = load_scenario(args.scenario)
    seed = _seed(args.seed)
    tolerances = {c.name: c.tol for c in spec.checks if c.tol is not None}
    tolerances.update(_parse_tolerances(args.tol))
    expectations = {c.name: c.expect for c in spec.checks}
    report = run_checks(spec.family, [c.name for c in spec.checks], seed=seed,
                        samples=args.samples, groups=args.groups, tolerances=tolerances,
                        expectations=expectations)
    report.family["name"] = spec.name
    sys.stdout.write(report.to_text())
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / f"{spec.name}_report.json").write_text(report.to_json(), encoding="utf-8", newline="\n")
    return {Verdict.PASS: EXIT_OK, Verdict.FAIL: EXIT_FAIL,
            Verdict.INCONCLUSIVE: EXIT_INCONCLUSIVE}[report.verdict]


def cmd_examples(args) -> int:
    specs = example_set(args.set)
    out = Path(args.out)

    def job(spec):
        try:
            return run_spec(spec, out)
        except DomainViolation as exc:
            return EXIT_DOMAIN, f"{spec.name}: {exc}"

    with ThreadPoolExecutor(max_workers=min(8, len(specs))) as pool:
        results = list(pool.map(job, specs))
    for code, message in results:
        print(message, file=sys.stdout if code == EXIT_OK else sys.stderr)
    return max(code for code, _ in results)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="equidyn",
                                     description="Equivariant N-agent dynamics: run, verify, plot.")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="integrate a scenario and write CSV/SVG")
    run.add_argument("scenario", help="scenario JSON file or bundled name (e.g. A3)")
    run.add_argument("--out", default=".", help="output directory (default: .)")
    run.set_defaults(func=cmd_run)

    verify = sub.add_parser("verify", help="run the scenario's structural checks")
    verify.add_argument("scenario")
    verify.add_argument("--seed", type=int, default=None,
                        help="random seed (default: $EQUIDYN_SEED or 0)")
    verify.add_argument("--samples", type=int, default=50, help="sampled configurations")
    verify.add_argument("--groups", type=int, default=20, help="group elements per configuration")
    verify.add_argument("--tol", action="append", metavar="NAME=VALUE",
                        help="override a check tolerance (repeatable)")
    verify.add_argument("--out", default=".", help="directory for <name>_report.json")
    verify.set_defaults(func=cmd_verify)

    ex = sub.add_parser("examples", help="reproduce a bundled example set")
    ex.add_argument("set", choices=sorted(EXAMPLE_SETS))
    ex.add_argument("--out", default=".", help="output directory (default: .)")
    ex.set_defaults(func=cmd_examples)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DomainViolation as exc:
        print(f"domain violation: {exc}", file=sys.stderr)
        return EXIT_DOMAIN


if __name__ == "__main__":
    sys.exit(main())
