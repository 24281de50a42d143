"""Spec files, reports and self-contained certificate records.

Every JSON document is written canonically (sorted keys, fixed separators,
trailing newline) so identical content is byte-identical, and digests are
taken over the compact canonical form.
"""

from __future__ import annotations

import hashlib
import json
import logging
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any

import numpy as np

from .algebra import GroupAction, OneParameterSubgroup, StatePoint
from .const import (
    CONF_BALL_RADIUS,
    CONF_COEFF,
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
    DEFAULT_RECHECK_TOL,
    GROUP_MATRIX,
    GROUP_TORUS,
    REPORT_SCHEMA_VERSION,
    SPEC_SCHEMA_VERSION,
    TOOL_VERSION,
)
from .exceptions import (
    DimensionMismatch,
    MomentToolkitError,
    SchemaMismatch,
    SpecParseError,
)
from .invariants import DegenerationRecord, SemicontinuityReport
from .moment import SliceModel
from .perturb import ScalingReport, ZeroCertificate, check_certificate
from .polynomial import PolynomialMap, Term
from .spec_schema import (
    validate_certificate,
    validate_report,
    validate_spec,
    with_overrides,
)
from .stability import CrossValidation, StabilityVerdict

_LOGGER = logging.getLogger(__name__)

CERTIFICATE_KIND = "zero_certificate"


# --- canonical JSON ---


def jsonable(value: Any) -> Any:
    """Plain JSON types for numpy scalars and arrays, fractions, complex numbers and tuples."""
    if isinstance(value, Mapping):
        return {str(k): jsonable(v) for k, v in value.items()}
    if isinstance(value, np.ndarray):
        return jsonable(value.tolist())
    if isinstance(value, (list, tuple)):
        return [jsonable(v) for v in value]
    if isinstance(value, Fraction):
        return f"{value.numerator}/{value.denominator}"
    if isinstance(value, (complex, np.complexfloating)):
        return [float(value.real), float(value.imag)]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        return float(value)
    if value is None or isinstance(value, str):
        return value
    return repr(value)


def canonical_json_bytes(obj: Any) -> bytes:
    """Stable, human-readable JSON (sorted keys, indent 2, trailing newline)."""
    text = json.dumps(jsonable(obj), sort_keys=True, indent=2, separators=(",", ": "))
    return (text + "\n").encode("utf-8")


def content_digest(obj: Any) -> str:
    """sha256 of the compact canonical JSON form."""
    compact = json.dumps(jsonable(obj), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(compact.encode("utf-8")).hexdigest()


def encode_vector(values: np.ndarray) -> list[list[float]]:
    return [[float(z.real), float(z.imag)] for z in np.asarray(values, dtype=complex)]


def decode_vector(pairs: Sequence[Sequence[float]]) -> np.ndarray:
    return np.array([complex(re, im) for re, im in pairs], dtype=complex)


def encode_matrices(mats: np.ndarray) -> list[list[list[list[float]]]]:
    return [[encode_vector(row) for row in mat] for mat in np.asarray(mats, dtype=complex)]


def decode_matrices(data: Sequence[Sequence[Sequence[Sequence[float]]]]) -> np.ndarray:
    return np.array([[decode_vector(row) for row in mat] for mat in data], dtype=complex)


# --- spec files ---


@dataclass(frozen=True, eq=False)
class SpecFile:
    """A validated spec document and the objects built from it."""

    raw: dict[str, Any]
    action: GroupAction
    points: dict[str, StatePoint]
    models: dict[str, SliceModel]
    tolerances: dict[str, float]
    seed: int
    digest: str

    def point(self, name: str) -> StatePoint:
        if name not in self.points:
            raise SpecParseError(f"Unknown point {name!r}", known=sorted(self.points))
        return self.points[name]

    def model(self, name: str) -> SliceModel:
        if name not in self.models:
            raise SpecParseError(f"Unknown model {name!r}", known=sorted(self.models))
        return self.models[name]

    def to_bytes(self) -> bytes:
        return canonical_json_bytes(self.raw)


def build_action(group: Mapping[str, Any], representation: Mapping[str, Any]) -> GroupAction:
    if group[CONF_GROUP_TYPE] == GROUP_TORUS:
        if CONF_WEIGHTS not in representation:
            raise SpecParseError("A torus group needs a weight matrix", path=[CONF_REPRESENTATION])
        return GroupAction.from_weights(np.array(representation[CONF_WEIGHTS], dtype=np.int64))
    if CONF_GENERATORS not in group or CONF_MATRICES not in representation:
        raise SpecParseError(
            "A matrix group needs generators and representation matrices", path=[CONF_GROUP]
        )
    return GroupAction.from_matrices(
        decode_matrices(group[CONF_GENERATORS]), decode_matrices(representation[CONF_MATRICES])
    )


def build_model(
    inner: GroupAction, group: Mapping[str, Any], conf: Mapping[str, Any], name: str
) -> SliceModel:
    outer_conf = conf[CONF_OUTER]
    if group[CONF_GROUP_TYPE] == GROUP_TORUS:
        if CONF_WEIGHTS not in outer_conf:
            raise SpecParseError(f"Model {name!r} needs outer weights", path=[name, CONF_OUTER])
        outer = GroupAction.from_weights(
            np.array(outer_conf[CONF_WEIGHTS], dtype=np.int64), like=inner
        )
    else:
        if CONF_MATRICES not in outer_conf:
            raise SpecParseError(f"Model {name!r} needs outer matrices", path=[name, CONF_OUTER])
        outer = GroupAction.from_matrices(
            decode_matrices(group[CONF_GENERATORS]), decode_matrices(outer_conf[CONF_MATRICES])
        )
    params = {key: complex(re, im) for key, (re, im) in conf[CONF_PARAMS].items()}
    terms = [
        [
            Term(complex(*term[CONF_COEFF]), tuple(term[CONF_POWERS]), term.get(CONF_PARAM))
            for term in row
        ]
        for row in conf[CONF_PHI]
    ]
    phi = PolynomialMap.from_terms(inner.ambient_dim, terms, params)
    return SliceModel(
        inner,
        outer,
        phi,
        ball_radius=conf[CONF_BALL_RADIUS],
        name=name,
        params=params,
        form_scale=conf[CONF_FORM_SCALE],
    )


def spec_from_dict(data: Any, validate_models: bool = True) -> SpecFile:
    """Validate, then build the action, points and models; any algebra failure is a parse error."""
    raw = validate_spec(data)
    try:
        action = build_action(raw[CONF_GROUP], raw[CONF_REPRESENTATION])
        points: dict[str, StatePoint] = {}
        for name, coords in raw[CONF_POINTS].items():
            point = StatePoint(decode_vector(coords))
            if point.dim != action.ambient_dim:
                raise DimensionMismatch(
                    f"Point {name!r} lives in C^{point.dim}, the action acts on "
                    f"C^{action.ambient_dim}"
                )
            points[name] = point
        rng = np.random.default_rng(raw[CONF_SEED])
        models: dict[str, SliceModel] = {}
        for name, conf in raw[CONF_MODELS].items():
            model = build_model(action, raw[CONF_GROUP], conf, name)
            if validate_models:
                model.validate(rng)
            models[name] = model
    except SpecParseError:
        raise
    except MomentToolkitError as err:
        raise SpecParseError(
            f"Spec does not describe a valid action: {err}", cause=err.kind, **err.diagnostics
        ) from err
    return SpecFile(
        raw=raw,
        action=action,
        points=points,
        models=models,
        tolerances=with_overrides(raw[CONF_TOLERANCES]),
        seed=raw[CONF_SEED],
        digest=content_digest(raw),
    )


def parse_spec(text: str | bytes) -> SpecFile:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as err:
        raise SpecParseError(f"Spec is not valid JSON: {err}", line=err.lineno) from err
    return spec_from_dict(data)


def load_spec(path: str | Path) -> SpecFile:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as err:
        raise SpecParseError(f"Cannot read spec {path}: {err}") from err
    spec = parse_spec(text)
    _LOGGER.debug("Spec %s: digest %s", path, spec.digest)
    return spec


# --- model records ---


def model_record(model: SliceModel) -> dict[str, Any]:
    """The model in spec-file form, with parameters already folded into the coefficients."""
    inner, outer = model.inner_action, model.outer_action
    if inner.is_torus:
        group: dict[str, Any] = {CONF_GROUP_TYPE: GROUP_TORUS}
        representation = {CONF_WEIGHTS: inner.rep.lattice.tolist()}
        outer_rep = {CONF_WEIGHTS: outer.rep.lattice.tolist()}
    else:
        group = {
            CONF_GROUP_TYPE: GROUP_MATRIX,
            CONF_GENERATORS: encode_matrices(inner.basis.generators),
        }
        representation = {CONF_MATRICES: encode_matrices(inner.rep.matrices())}
        outer_rep = {CONF_MATRICES: encode_matrices(outer.rep.matrices())}

    phi = model.phi
    rows: list[list[dict[str, Any]]] = [[] for _ in range(phi.n_out)]
    for coeff, powers, out in zip(phi.coeffs, phi.powers, phi.outputs, strict=True):
        rows[int(out)].append(
            {CONF_COEFF: [float(coeff.real), float(coeff.imag)], CONF_POWERS: powers.tolist()}
        )
    return {
        "name": model.name,
        CONF_GROUP: group,
        CONF_REPRESENTATION: representation,
        "model": {
            CONF_OUTER: outer_rep,
            CONF_PHI: rows,
            CONF_BALL_RADIUS: float(model.ball_radius),
            CONF_PARAMS: {},
            CONF_FORM_SCALE: float(model.form_scale),
        },
    }


def model_from_record(record: Mapping[str, Any]) -> SliceModel:
    try:
        spec = spec_from_dict(
            {
                CONF_SCHEMA_VERSION: SPEC_SCHEMA_VERSION,
                CONF_GROUP: record[CONF_GROUP],
                CONF_REPRESENTATION: record[CONF_REPRESENTATION],
                CONF_MODELS: {record.get("name") or "model": record["model"]},
            },
            validate_models=False,
        )
    except (KeyError, TypeError) as err:
        raise SchemaMismatch(f"Malformed model record: {err}") from err
    except SpecParseError as err:
        raise SchemaMismatch(f"Invalid model record: {err}", **err.diagnostics) from err
    return next(iter(spec.models.values()))


# --- result encoders ---


def _point(point: StatePoint | None) -> list[list[float]] | None:
    return None if point is None else encode_vector(point.coords)


def _optional_float(value: float | None) -> float | None:
    return None if value is None else float(value)


def encode_rho(rho: OneParameterSubgroup | None) -> dict[str, Any] | None:
    if rho is None:
        return None
    return {"xi": rho.to_strings(), "lattice": rho.lattice}


def decode_rho(data: Mapping[str, Any]) -> OneParameterSubgroup:
    return OneParameterSubgroup(tuple(Fraction(q) for q in data["xi"]), bool(data["lattice"]))


def verdict_to_dict(verdict: StabilityVerdict, include_trace: bool = False) -> dict[str, Any]:
    result: dict[str, Any] = {
        "kind": "stability",
        "stability": str(verdict.stability),
        "evidence": str(verdict.evidence),
        "witness": encode_rho(verdict.witness),
        "zero_point": _point(verdict.zero_point),
        "iterations": verdict.iterations,
        "moment_norm": _optional_float(verdict.moment_norm),
        "norm": _optional_float(verdict.norm),
    }
    if include_trace:
        result["trace"] = [
            {
                "iteration": s.iteration,
                "log_norm": s.log_norm,
                "moment_norm": s.moment_norm,
                "step_norm": s.step_norm,
            }
            for s in verdict.trace
        ]
    return result


def cross_validation_to_dict(report: CrossValidation) -> dict[str, Any]:
    return {
        "kind": "cross_validation",
        "stability": str(report.stability),
        "agree": report.agree,
        "flow": verdict_to_dict(report.flow),
        "oracle": verdict_to_dict(report.oracle),
        "flow_witness_valid": report.flow_witness_valid,
        "oracle_witness_valid": report.oracle_witness_valid,
    }


def certificate_to_dict(cert: ZeroCertificate, model: SliceModel) -> dict[str, Any]:
    """Self-contained record: everything a verifier needs, sealed with a digest."""
    record = {
        "kind": CERTIFICATE_KIND,
        "model": model_record(model),
        "x0": encode_vector(cert.x0.coords),
        "eta": [float(c) for c in cert.eta],
        "y": encode_vector(cert.y.coords),
        "lambda_used": float(cert.lambda_used),
        "delta_used": float(cert.delta_used),
        "mu_norm_initial": float(cert.mu_norm_initial),
        "mu_norm_final": float(cert.mu_norm_final),
        "eta_norm": float(cert.eta_norm),
        "zero_tol": float(cert.zero_tol),
        "lambda_recipe": {
            "samples": int(cert.lambda_samples),
            "margin": float(cert.lambda_margin),
            "seed": int(cert.seed),
            "rank_tol": float(cert.rank_tol),
        },
        "iterations": int(cert.iterations),
        "mu_trace": [float(m) for m in cert.mu_trace],
    }
    record["digest"] = content_digest(record)
    return record


def certificate_digest_ok(record: Mapping[str, Any]) -> bool:
    body = {key: value for key, value in record.items() if key != "digest"}
    return record.get("digest") == content_digest(body)


def certificate_from_dict(data: Any) -> tuple[ZeroCertificate, SliceModel]:
    record = validate_certificate(data)
    recipe = record["lambda_recipe"]
    cert = ZeroCertificate(
        x0=StatePoint(decode_vector(record["x0"])),
        eta=np.array(record["eta"], dtype=float),
        y=StatePoint(decode_vector(record["y"])),
        lambda_used=record["lambda_used"],
        delta_used=record["delta_used"],
        mu_norm_initial=record["mu_norm_initial"],
        mu_norm_final=record["mu_norm_final"],
        eta_norm=record["eta_norm"],
        zero_tol=record["zero_tol"],
        lambda_samples=recipe["samples"],
        lambda_margin=recipe["margin"],
        seed=recipe["seed"],
        rank_tol=recipe["rank_tol"],
        iterations=record["iterations"],
        mu_trace=tuple(record["mu_trace"]),
    )
    return cert, model_from_record(record["model"])


def audit_certificate(
    record: Mapping[str, Any], recheck_tol: float = DEFAULT_RECHECK_TOL
) -> list[str]:
    """Names of the failed checks of a certificate record; empty when it verifies."""
    failures = [] if certificate_digest_ok(record) else ["digest"]
    try:
        cert, model = certificate_from_dict(dict(record))
    except SchemaMismatch as err:
        _LOGGER.debug("Certificate audit: unreadable record: %s", err)
        return failures + ["schema"]
    return failures + check_certificate(cert, model, recheck_tol)


def scaling_to_dict(report: ScalingReport, model: SliceModel) -> dict[str, Any]:
    return {
        "kind": "scaling",
        "v": _point(report.v),
        "balanced": _point(report.balanced),
        "t_star": float(report.t_star),
        "decay_slope": float(report.decay_slope),
        "samples": [
            {
                "t": s.t,
                "mu_norm": _optional_float(s.mu_norm),
                "lambda": _optional_float(s.lam),
                "product": _optional_float(s.product),
                "satisfied": s.satisfied,
                "note": s.note,
            }
            for s in report.samples
        ],
        "certificate": certificate_to_dict(report.certificate, model),
    }


def degeneration_to_dict(record: DegenerationRecord) -> dict[str, Any]:
    return {
        "kind": "degeneration",
        "rho": encode_rho(record.rho),
        "limit_exists": True,
        "start": _point(record.start),
        "limit": _point(record.limit),
        "weight": float(record.weight),
        "dim_start": record.dim_jump[0],
        "dim_limit": record.dim_jump[1],
        "is_product": record.is_product,
        "orbit_distance": float(record.orbit_distance),
    }


def semicontinuity_to_dict(report: SemicontinuityReport) -> dict[str, Any]:
    return {
        "kind": "semicontinuity",
        "ok": report.ok,
        "violations": list(report.violations),
        "records": [degeneration_to_dict(r) for r in report.records],
    }


def error_to_dict(err: MomentToolkitError) -> dict[str, Any]:
    return {
        "kind": "error",
        "error": err.kind,
        "message": str(err),
        "exit_code": err.exit_code,
        "diagnostics": jsonable(err.diagnostics),
    }


# --- reports ---


@dataclass
class Report:
    """Ordered per-command results plus the provenance needed to reproduce them."""

    spec_digest: str | None
    tolerances: dict[str, float] = field(default_factory=dict)
    seed: int | None = None
    results: list[dict[str, Any]] = field(default_factory=list)
    timings: dict[str, float] = field(default_factory=dict)
    exit_code: int = 0

    def add(self, label: str, result: Mapping[str, Any]) -> None:
        self.results.append({"label": label, **result})

    def certificates(self) -> list[dict[str, Any]]:
        """Every certificate record, including those nested in scaling reports."""
        found: list[dict[str, Any]] = []
        for result in self.results:
            if result.get("kind") == CERTIFICATE_KIND:
                found.append(result)
            elif isinstance(result.get("certificate"), Mapping):
                found.append(result["certificate"])
        return found

    def to_dict(self, include_timings: bool = True) -> dict[str, Any]:
        data: dict[str, Any] = {
            CONF_SCHEMA_VERSION: REPORT_SCHEMA_VERSION,
            "tool_version": TOOL_VERSION,
            "spec_digest": self.spec_digest,
            CONF_SEED: self.seed,
            CONF_TOLERANCES: dict(self.tolerances),
            "results": list(self.results),
            "exit_code": self.exit_code,
        }
        if include_timings:
            data["timings"] = dict(self.timings)
        return data

    def to_bytes(self, include_timings: bool = True) -> bytes:
        return canonical_json_bytes(self.to_dict(include_timings))

    @classmethod
    def from_dict(cls, data: Any) -> Report:
        raw = validate_report(data)
        return cls(
            spec_digest=raw["spec_digest"],
            tolerances=dict(raw.get(CONF_TOLERANCES) or {}),
            seed=raw.get(CONF_SEED),
            results=list(raw["results"]),
            timings=dict(raw.get("timings") or {}),
            exit_code=int(raw.get("exit_code", 0)),
        )


def load_report(path: str | Path) -> Report:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as err:
        raise SchemaMismatch(f"Cannot read report {path}: {err}") from err
    except json.JSONDecodeError as err:
        raise SchemaMismatch(f"Report is not valid JSON: {err}", line=err.lineno) from err
    return Report.from_dict(data)
