"""Command-line front end: parse a spec, dispatch one command, emit a report."""

from __future__ import annotations

import argparse
import logging
import sys
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
import voluptuous as vol

from .algebra import OneParameterSubgroup
from .const import (
    DEFAULT_RECHECK_TOL,
    EXIT_INCONSISTENT,
    EXIT_OK,
    EXIT_PARSE_ERROR,
    TOL_RECHECK,
    TOOL_NAME,
    TOOL_VERSION,
)
from .coordinator import AnalysisCoordinator, Job
from .exceptions import MomentToolkitError, SchemaMismatch, SpecParseError
from .serialization import Report, audit_certificate, error_to_dict, load_report, load_spec
from .spec_schema import RATIONAL_VECTOR, with_overrides

_LOGGER = logging.getLogger(__name__)

FORMAT_TEXT = "text"
FORMAT_MACHINE = "machine"


@dataclass(frozen=True)
class RunFlags:
    names: tuple[str, ...] = ()
    seed: int | None = None
    delta: float | None = None
    t_grid: tuple[float, ...] = ()
    ops: OneParameterSubgroup | None = None
    tol: Mapping[str, float] = field(default_factory=dict)


# --- flag parsing ---


def parse_t_grid(text: str) -> tuple[float, ...]:
    """"start:stop:count" as a geometric grid."""
    try:
        start, stop, count = text.split(":")
        start_f, stop_f, count_i = float(start), float(stop), int(count)
    except ValueError as err:
        raise SpecParseError(f"--t-grid must be start:stop:count, got {text!r}") from err
    if not (start_f > 0 and stop_f > 0 and count_i >= 1):
        raise SpecParseError("--t-grid needs positive endpoints and a positive count")
    return tuple(float(t) for t in np.geomspace(start_f, stop_f, count_i))


def parse_ops(text: str) -> OneParameterSubgroup:
    """Comma-separated integers or "p/q" rationals."""
    try:
        values = RATIONAL_VECTOR([part.strip() for part in text.split(",")])
    except vol.Invalid as err:
        raise SpecParseError(f"--ops: {err}") from err
    lattice = all(q.denominator == 1 for q in values)
    return OneParameterSubgroup(tuple(values), lattice=lattice)


def parse_tol(pairs: Sequence[str]) -> dict[str, float]:
    overrides: dict[str, float] = {}
    for pair in pairs:
        name, sep, value = pair.partition("=")
        if not sep:
            raise SpecParseError(f"--tol expects name=value, got {pair!r}")
        try:
            overrides[name.strip()] = float(value)
        except ValueError as err:
            raise SpecParseError(f"--tol {name}: {value!r} is not a number") from err
    return overrides


# --- operations ---


def run(command: str, spec_path: str | Path | None, flags: RunFlags) -> tuple[Report, int]:
    """Load the spec file, run one command and return the report with its exit code."""
    try:
        spec = load_spec(spec_path) if spec_path is not None else None
        base = spec.tolerances if spec is not None else {}
        tolerances = with_overrides(base, flags.tol)
    except MomentToolkitError as err:
        _LOGGER.error("Spec: %s", err)
        report = Report(spec_digest=None, seed=flags.seed, exit_code=err.exit_code)
        report.add(command, error_to_dict(err))
        return report, err.exit_code

    seed = flags.seed if flags.seed is not None else (spec.seed if spec is not None else 0)
    coordinator = AnalysisCoordinator(spec, tolerances, seed)
    job = Job(
        command=command,
        names=tuple(flags.names),
        delta=flags.delta,
        t_grid=tuple(flags.t_grid),
        ops=flags.ops,
    )
    report = coordinator.run([job])
    return report, report.exit_code


def verify_certificate(report_path: str | Path, recheck_tol: float = DEFAULT_RECHECK_TOL) -> bool:
    """Re-derive every certificate in a report from its raw fields; True iff all pass."""
    report = load_report(report_path)
    records = report.certificates()
    if not records:
        raise SchemaMismatch(f"{report_path} contains no certificates")
    ok = True
    for index, record in enumerate(records):
        failures = audit_certificate(record, recheck_tol)
        if failures:
            _LOGGER.warning("Verify: certificate %d failed %s", index, ", ".join(failures))
            ok = False
    _LOGGER.info("Verify: %d certificates, %s", len(records), "all pass" if ok else "rejected")
    return ok


# --- output ---


def _fmt(value: Any) -> str:
    if isinstance(value, float):
        return f"{value:.6g}"
    if isinstance(value, dict) and "xi" in value:
        return "(" + ", ".join(value["xi"]) + ")"
    return str(value)


_TEXT_FIELDS: dict[str, tuple[str, ...]] = {
    "stability": ("stability", "evidence", "witness", "iterations", "moment_norm"),
    "cross_validation": ("stability", "agree", "flow_witness_valid", "oracle_witness_valid"),
    "zero_certificate": ("lambda_used", "mu_norm_initial", "eta_norm", "mu_norm_final", "digest"),
    "scaling": ("t_star", "decay_slope"),
    "degeneration": ("rho", "limit_exists", "weight", "dim_start", "dim_limit", "is_product"),
    "selftest": ("ok",),
    "error": ("error", "message", "exit_code"),
}


def format_text(report: Report) -> str:
    lines = [f"{TOOL_NAME} {TOOL_VERSION}  spec {report.spec_digest or '-'}  seed {report.seed}"]
    for result in report.results:
        kind = result.get("kind", "?")
        lines.append(f"[{result['label']}] {kind}")
        for key in _TEXT_FIELDS.get(kind, ()):
            if key in result:
                lines.append(f"  {key}: {_fmt(result[key])}")
        if kind == "scaling":
            lines.append("  t          |mu|        lambda      product")
            for s in result["samples"]:
                lines.append(
                    "  "
                    + "  ".join(
                        f"{_fmt(s[key]):<10}" if s[key] is not None else f"{'-':<10}"
                        for key in ("t", "mu_norm", "lambda", "product")
                    )
                    + (f"  {s['note']}" if s["note"] else "")
                )
        if kind == "selftest":
            for check in result["checks"]:
                lines.append(f"  {'PASS' if check['passed'] else 'FAIL'} {check['name']}")
    lines.append(f"exit {report.exit_code}")
    return "\n".join(lines) + "\n"


def emit(report: Report, fmt: str, out: str | None) -> None:
    if fmt == FORMAT_MACHINE:
        payload = report.to_bytes()
    else:
        payload = format_text(report).encode("utf-8")
    if out:
        Path(out).write_bytes(payload)
    else:
        sys.stdout.buffer.write(payload)
        sys.stdout.flush()


# --- entry point ---


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--spec", type=str, default=None, help="Spec file (JSON).")
    common.add_argument(
        "--seed", type=int, default=None, help="Overrides the seed from the spec file."
    )
    common.add_argument("--delta", type=float, default=None, help="Radius of the η-ball.")
    common.add_argument("--t-grid", type=str, default=None, help="start:stop:count, geometric.")
    common.add_argument("--ops", type=str, default=None, help="One-parameter subgroup, e.g. 1,-1.")
    common.add_argument(
        "--tol", action="append", default=[], metavar="NAME=VALUE", help="Tolerance override."
    )
    common.add_argument("--out", type=str, default=None, help="Write the report here.")
    common.add_argument(
        "--format", choices=[FORMAT_TEXT, FORMAT_MACHINE], default=FORMAT_TEXT, dest="fmt"
    )
    common.add_argument("-v", "--verbose", action="count", default=0)

    parser = argparse.ArgumentParser(
        prog=TOOL_NAME,
        description="Stability, moment-map zeros and certified perturbation for linear actions.",
    )
    parser.add_argument("--version", action="version", version=f"{TOOL_NAME} {TOOL_VERSION}")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("classify", parents=[common], help="Stability class with cross-validation.")
    sub.add_parser("flow", parents=[common], help="Kempf-Ness flow with its trace.")
    sub.add_parser("perturb", parents=[common], help="Certify a zero near a point.")
    sub.add_parser("scan", parents=[common], help="Scale a balanced vector until certified.")
    sub.add_parser("degenerate", parents=[common], help="One-parameter degeneration record.")
    sub.add_parser("selftest", parents=[common], help="Run the property suite.")
    sub.add_parser("verify", parents=[common], help="Re-verify certificates in a report.")
    for name, positional in (
        ("classify", ("point",)),
        ("flow", ("point",)),
        ("perturb", ("model", "point")),
        ("scan", ("model", "point")),
        ("degenerate", ("point",)),
        ("verify", ("report",)),
    ):
        for arg in positional:
            sub.choices[name].add_argument(arg)
    return parser


def _flags(args: argparse.Namespace) -> RunFlags:
    names = tuple(
        getattr(args, arg) for arg in ("model", "point") if getattr(args, arg, None) is not None
    )
    return RunFlags(
        names=names,
        seed=args.seed,
        delta=args.delta,
        t_grid=parse_t_grid(args.t_grid) if args.t_grid else (),
        ops=parse_ops(args.ops) if args.ops else None,
        tol=parse_tol(args.tol),
    )


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING
    if args.verbose:
        level = logging.DEBUG if args.verbose > 1 else logging.INFO
    logging.basicConfig(
        level=level,
        format="%(name)s:%(levelname)s:%(message)s",
        stream=sys.stderr,
    )

    if args.command == "verify":
        try:
            recheck = parse_tol(args.tol).get(TOL_RECHECK, DEFAULT_RECHECK_TOL)
            ok = verify_certificate(args.report, recheck)
        except MomentToolkitError as err:
            sys.stderr.write(f"{TOOL_NAME}: {err}\n")
            return err.exit_code
        sys.stdout.write("certificates verified\n" if ok else "certificate verification failed\n")
        return EXIT_OK if ok else EXIT_INCONSISTENT

    try:
        flags = _flags(args)
    except SpecParseError as err:
        sys.stderr.write(f"{TOOL_NAME}: {err}\n")
        return EXIT_PARSE_ERROR
    report, code = run(args.command, args.spec, flags)
    emit(report, args.fmt, args.out)
    return code


if __name__ == "__main__":
    sys.exit(main())
