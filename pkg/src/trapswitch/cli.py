"""Command-line entry points.

`run` and `validate` operate on spec files; the remaining subcommands run a
single experiment from built-in defaults.  Every spec field can be overridden
on any subcommand with repeated `--set section.key=value` flags.  The exit
code is 0 exactly when the run completed and every declared tolerance check
passed.
"""

import argparse
import sys

import yaml

from .errors import SpecValidationError, TrapSwitchError
from .experiments import run_experiment
from .io import apply_overrides, load_spec, parse_spec, spec_problems
from .propagate import PropagationSetup, default_absorber, validate_setup

#: subcommand -> experiment name it shorthands
_DIRECT = {
    "poles": "poles",
    "isocurve": "iso-curves",
    "groundstate": "ground-state",
    "delay": "delay-spectrum",
    "propagate": "decay-curves",
    "spectrum": "spectrum-vs-T",
    "scan-t": "t-scan",
}


def _load_document(path: str):
    with open(path, "r", encoding="utf-8") as fh:
        try:
            return yaml.safe_load(fh)
        except yaml.YAMLError as exc:
            mark = getattr(exc, "problem_mark", None)
            where = f" at line {mark.line + 1}, column {mark.column + 1}" if mark else ""
            raise SpecValidationError(f"spec parse error{where}: {exc}") from exc


def _numerics_diagnostics(spec) -> list[str]:
    """Static numerics constraint violations, without running anything."""
    if spec.name not in ("decay-curves", "spectrum-vs-T", "t-scan"):
        return []
    num = spec.numerics
    box = float(num.get("box_length", 150.0))
    setup = PropagationSetup(
        schedule=spec.schedule(),
        dx=float(num.get("dx", 0.05)),
        box_length=box,
        dt=float(num.get("dt", 2e-4)),
        t_end=float(num.get("t_end", 2.5)),
        e_cut=float(num.get("e_cut", 1000.0)),
        absorber=default_absorber(box),
    )
    return validate_setup(setup, spec.unit)


def _cmd_validate(args) -> int:
    document = _load_document(args.spec)
    apply_overrides(document, args.set or [])
    problems = spec_problems(document)
    if not problems:
        problems = _numerics_diagnostics(parse_spec(document))
    for problem in problems:
        print(problem)
    if problems:
        return 1
    print("ok")
    return 0


def _run_document(document) -> int:
    spec = parse_spec(document)
    path, checks = run_experiment(spec)
    for check in checks:
        print(check.line())
    print(f"report: {path}/report.txt")
    return 0 if all(c.passed for c in checks) else 1


def _cmd_run(args) -> int:
    document = _load_document(args.spec)
    apply_overrides(document, args.set or [])
    return _run_document(document)


def _cmd_direct(args) -> int:
    document = {
        "experiment": {"name": _DIRECT[args.command]},
        "physics": {},
        "numerics": {},
        "outputs": {},
    }
    if args.out:
        document["outputs"]["directory"] = args.out
    apply_overrides(document, args.set or [])
    return _run_document(document)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="trapswitch",
        description="Pole analysis and timed-release simulation of a wall/well/barrier trap.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run an experiment spec file")
    p_run.add_argument("spec", help="path to the YAML spec")
    p_run.add_argument("--set", action="append", metavar="KEY=VALUE",
                       help="override a spec field, e.g. physics.final.v_well=120")
    p_run.set_defaults(func=_cmd_run)

    p_val = sub.add_parser("validate", help="check a spec without running it")
    p_val.add_argument("spec", help="path to the YAML spec")
    p_val.add_argument("--set", action="append", metavar="KEY=VALUE")
    p_val.set_defaults(func=_cmd_validate)

    for name, experiment in _DIRECT.items():
        p = sub.add_parser(name, help=f"run the {experiment} experiment with defaults")
        p.add_argument("--out", help="output directory (default out/<experiment>)")
        p.add_argument("--set", action="append", metavar="KEY=VALUE",
                       help="override any spec field")
        p.set_defaults(func=_cmd_direct)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except SpecValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        for problem in getattr(exc, "problems", ()):
            print(f"  - {problem}", file=sys.stderr)
        return 2
    except TrapSwitchError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
