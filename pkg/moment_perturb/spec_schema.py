"""Voluptuous schemas for spec files, tolerance overrides and reports."""

from __future__ import annotations

from collections.abc import Mapping
from fractions import Fraction
from typing import Any

import voluptuous as vol

from .const import (
    CONF_BALL_RADIUS,
    CONF_COEFF,
    CONF_DESCRIPTION,
    CONF_FORM_SCALE,
    CONF_GENERATORS,
    CONF_GROUP,
    CONF_GROUP_TYPE,
    CONF_MATRICES,
    CONF_MODELS,
    CONF_OUTER,
    CONF_PARAM,
    CONF_PARAMS,
    CONF_PHI,
    CONF_POINTS,
    CONF_POWERS,
    CONF_REPRESENTATION,
    CONF_SCHEMA_VERSION,
    CONF_SEED,
    CONF_TOLERANCES,
    CONF_WEIGHTS,
    DEFAULT_BALL_RADIUS,
    DEFAULT_OPTIONS,
    DEFAULT_SEED,
    DEFAULT_TOLERANCES,
    GROUP_MATRIX,
    GROUP_TORUS,
    REPORT_SCHEMA_VERSION,
    SPEC_SCHEMA_VERSION,
)
from .exceptions import SchemaMismatch, SpecParseError

REAL = vol.All(vol.Any(int, float), vol.Coerce(float))
POSITIVE = vol.All(REAL, vol.Range(min=0, min_included=False))
COMPLEX = vol.All(vol.ExactSequence([REAL, REAL]), list)  # [re, im]
COMPLEX_VECTOR = vol.All([COMPLEX], vol.Length(min=1))
INTEGER_MATRIX = vol.All([vol.All([int], vol.Length(min=1))], vol.Length(min=1))


def _square(matrix: list) -> list:
    if not matrix or any(len(row) != len(matrix) for row in matrix):
        raise vol.Invalid("matrix must be square and non-empty")
    return matrix


def _rectangular(matrix: list) -> list:
    if any(len(row) != len(matrix[0]) for row in matrix):
        raise vol.Invalid("all rows must have the same length")
    return matrix


def rational(value: Any) -> Fraction:
    """Accept integers and "p/q" strings."""
    if isinstance(value, bool):
        raise vol.Invalid("expected a rational, got a boolean")
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, str):
        try:
            return Fraction(value)
        except (ValueError, ZeroDivisionError) as err:
            raise vol.Invalid(f"not a rational: {value!r}") from err
    raise vol.Invalid(f"expected an integer or a 'p/q' string, got {value!r}")


COMPLEX_MATRIX = vol.All([[COMPLEX]], _square)
RATIONAL_VECTOR = vol.All([rational], vol.Length(min=1))

GROUP_SCHEMA = vol.Schema(
    {
        vol.Required(CONF_GROUP_TYPE): vol.In([GROUP_TORUS, GROUP_MATRIX]),
        vol.Optional(CONF_GENERATORS): vol.All([COMPLEX_MATRIX], vol.Length(min=1)),
    }
)

REPRESENTATION_SCHEMA = vol.Schema(
    {
        vol.Exclusive(CONF_WEIGHTS, "rep"): vol.All(INTEGER_MATRIX, _rectangular),
        vol.Exclusive(CONF_MATRICES, "rep"): vol.All([COMPLEX_MATRIX], vol.Length(min=1)),
    }
)

TERM_SCHEMA = vol.Schema(
    {
        vol.Required(CONF_COEFF): COMPLEX,
        vol.Required(CONF_POWERS): [vol.All(int, vol.Range(min=0))],
        vol.Optional(CONF_PARAM): str,
    }
)

MODEL_SCHEMA = vol.Schema(
    {
        vol.Required(CONF_OUTER): REPRESENTATION_SCHEMA,
        vol.Required(CONF_PHI): vol.All([[TERM_SCHEMA]], vol.Length(min=1)),
        vol.Optional(CONF_BALL_RADIUS, default=DEFAULT_BALL_RADIUS): POSITIVE,
        vol.Optional(CONF_PARAMS, default={}): {str: COMPLEX},
        vol.Optional(CONF_FORM_SCALE, default=1.0): POSITIVE,
    }
)

TOLERANCE_SCHEMA = vol.Schema(
    {vol.Optional(key): POSITIVE for key in (*DEFAULT_TOLERANCES, *DEFAULT_OPTIONS)}
)

SPEC_SCHEMA = vol.Schema(
    {
        vol.Required(CONF_SCHEMA_VERSION): int,
        vol.Optional(CONF_SEED, default=DEFAULT_SEED): vol.All(int, vol.Range(min=0)),
        vol.Optional(CONF_DESCRIPTION): str,
        vol.Required(CONF_GROUP): GROUP_SCHEMA,
        vol.Required(CONF_REPRESENTATION): REPRESENTATION_SCHEMA,
        vol.Optional(CONF_POINTS, default={}): {str: COMPLEX_VECTOR},
        vol.Optional(CONF_MODELS, default={}): {str: MODEL_SCHEMA},
        vol.Optional(CONF_TOLERANCES, default={}): TOLERANCE_SCHEMA,
    }
)

CERTIFICATE_SCHEMA = vol.Schema(
    {
        vol.Required("kind"): "zero_certificate",
        vol.Required("model"): dict,
        vol.Required("x0"): COMPLEX_VECTOR,
        vol.Required("eta"): [REAL],
        vol.Required("y"): COMPLEX_VECTOR,
        vol.Required("lambda_used"): REAL,
        vol.Required("delta_used"): REAL,
        vol.Required("mu_norm_initial"): REAL,
        vol.Required("mu_norm_final"): REAL,
        vol.Required("eta_norm"): REAL,
        vol.Required("zero_tol"): REAL,
        vol.Required("lambda_recipe"): {
            vol.Required("samples"): int,
            vol.Required("margin"): REAL,
            vol.Required("seed"): int,
            vol.Required("rank_tol"): REAL,
        },
        vol.Required("iterations"): int,
        vol.Required("mu_trace"): [REAL],
        vol.Required("digest"): str,
    }
)

REPORT_SCHEMA = vol.Schema(
    {
        vol.Required(CONF_SCHEMA_VERSION): int,
        vol.Required("tool_version"): str,
        vol.Required("spec_digest"): vol.Any(str, None),
        vol.Required("results"): [dict],
    },
    extra=vol.ALLOW_EXTRA,
)


def _schema_with_defaults(schema: vol.Schema, defaults: Mapping[str, Any]) -> vol.Schema:
    """Return a copy of the schema whose optional keys default to the given values."""
    new_schema = {}
    for key, val in schema.schema.items():
        if str(key) in defaults:
            new_key = (
                vol.Optional(str(key), default=defaults[str(key)])
                if isinstance(key, vol.Optional)
                else vol.Required(str(key), default=defaults[str(key)])
            )
            new_schema[new_key] = val
        else:
            new_schema[key] = val
    return vol.Schema(new_schema)


def with_overrides(
    tolerances: Mapping[str, float], overrides: Mapping[str, float] | None = None
) -> dict[str, float]:
    """Full tolerance mapping: built-in defaults < spec file values < command-line overrides."""
    defaults = {**DEFAULT_TOLERANCES, **DEFAULT_OPTIONS, **tolerances}
    try:
        return _schema_with_defaults(TOLERANCE_SCHEMA, defaults)(dict(overrides or {}))
    except vol.Invalid as err:
        raise SpecParseError(f"Invalid tolerance override: {err}", path=_path(err)) from err


def _path(err: vol.Invalid) -> list[str]:
    return [str(p) for p in err.path]


def validate_spec(data: Any) -> dict[str, Any]:
    """Validate a decoded spec document; version mismatches are reported separately."""
    if isinstance(data, Mapping):
        version = data.get(CONF_SCHEMA_VERSION)
        if version is not None and version != SPEC_SCHEMA_VERSION:
            raise SchemaMismatch(
                f"Spec schema version {version!r} is not supported (expected "
                f"{SPEC_SCHEMA_VERSION})",
                found=version,
                expected=SPEC_SCHEMA_VERSION,
            )
    try:
        return SPEC_SCHEMA(data)
    except vol.Invalid as err:
        raise SpecParseError(f"Invalid spec file: {err}", path=_path(err)) from err


def validate_report(data: Any) -> dict[str, Any]:
    try:
        report = REPORT_SCHEMA(data)
    except vol.Invalid as err:
        raise SchemaMismatch(f"Not a report: {err}", path=_path(err)) from err
    if report[CONF_SCHEMA_VERSION] != REPORT_SCHEMA_VERSION:
        raise SchemaMismatch(
            f"Report schema version {report[CONF_SCHEMA_VERSION]} is not supported",
            found=report[CONF_SCHEMA_VERSION],
            expected=REPORT_SCHEMA_VERSION,
        )
    return report


def validate_certificate(data: Any) -> dict[str, Any]:
    try:
        return CERTIFICATE_SCHEMA(data)
    except vol.Invalid as err:
        raise SchemaMismatch(f"Malformed certificate record: {err}", path=_path(err)) from err
