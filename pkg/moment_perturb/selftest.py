"""Property suite behind the `selftest` command.

Every check is seeded from one integer, so a failing run can be replayed
exactly.
"""

from __future__ import annotations

import copy
import logging
import math
import time
from collections.abc import Callable
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .algebra import StatePoint, algebra_element, q_operator
from .bundled import (
    BALANCED_VECTORS,
    BUNDLED_MODELS,
    destabilizing_degeneration,
    su2_defining_action,
    su2_pair_model,
)
from .const import FINITE_DIFFERENCE_STEP, HESSIAN_CHECK_TOL
from .exceptions import (
    EmptyComplement,
    MomentToolkitError,
    NeverSatisfied,
    OracleMismatch,
    PreconditionFailed,
)
from .invariants import (
    analyze_degeneration,
    futaki_character,
    random_degeneration,
    semicontinuity_scan,
)
from .moment import (
    SliceModel,
    hessian_defect,
    linear_moment,
    loglog_slope,
    slice_moment,
    symplectic_form,
)
from .perturb import PerturbOptions, scaling_search
from .serialization import audit_certificate, certificate_to_dict, content_digest
from .stability import check_log_norm_hessian, cross_validate, random_torus_instance

_LOGGER = logging.getLogger(__name__)

IDENTITY_INSTANCES = 200
IDENTITY_TOL = 1e-8
HESSIAN_INSTANCES = 50
ORACLE_INSTANCES = 200
ORTHOGONALITY_SAMPLES = 500
ORTHOGONALITY_TOL = 1e-9
DECAY_GRID = tuple(np.geomspace(1e-3, 1e-1, 20))
MIN_DECAY_SLOPE = 2.9
SCALING_VARIATION = 0.01
SELFTEST_DELTA = 0.5
SCAN_GRID = tuple(np.geomspace(1.0, 1e-3, 16))
DEGENERATIONS = 50
TAMPER_MUTATIONS = 200
ROUNDOFF = 1e-13  # ‖μ(tv)‖ below ROUNDOFF·t²‖v‖² is cancellation noise of the quadratic term


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: dict[str, Any]
    elapsed: float


@dataclass
class SelftestOutcome:
    checks: list[CheckResult] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return all(check.passed for check in self.checks)

    def failed(self) -> list[str]:
        return [check.name for check in self.checks if not check.passed]

    def to_dict(self) -> dict[str, Any]:
        return {
            "kind": "selftest",
            "ok": self.ok,
            "checks": [
                {"name": c.name, "passed": c.passed, "detail": c.detail} for c in self.checks
            ],
        }


# --- checks ---


def check_moment_identity(rng: np.random.Generator) -> tuple[bool, dict[str, Any]]:
    """⟨dν_v(u), ξ⟩ by central differences against Ω₀(σ_v(ξ), u)."""
    matrix_actions = [su2_defining_action(), su2_pair_model().outer_action]
    h = FINITE_DIFFERENCE_STEP
    worst = 0.0
    for index in range(IDENTITY_INSTANCES):
        if index % 4 == 3:
            action = matrix_actions[(index // 4) % len(matrix_actions)]
        else:
            action, _ = random_torus_instance(rng)
        n, k = action.ambient_dim, action.dim
        v = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        u = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        v, u = v / np.linalg.norm(v), u / np.linalg.norm(u)
        xi = rng.standard_normal(k)
        xi /= np.linalg.norm(xi)
        forward = linear_moment(action, StatePoint(v + h * u)).pairing(xi)
        backward = linear_moment(action, StatePoint(v - h * u)).pairing(xi)
        derivative = (forward - backward) / (2.0 * h)
        expected = symplectic_form(algebra_element(action, xi) @ v, u)
        worst = max(worst, abs(derivative - expected))
    return worst < IDENTITY_TOL, {"instances": IDENTITY_INSTANCES, "max_defect": worst}


def check_hessians(rng: np.random.Generator) -> tuple[bool, dict[str, Any]]:
    """Second-order terms against central differences: the flow's log-norm and each model's ν₁."""
    flow_worst = 0.0
    for _ in range(HESSIAN_INSTANCES):
        action, v = random_torus_instance(rng, zero_probability=0.0)
        flow_worst = max(flow_worst, check_log_norm_hessian(action, v))
    model_worst = 0.0
    for factory in BUNDLED_MODELS.values():
        model = factory()
        n = model.inner_action.ambient_dim
        v = StatePoint(rng.standard_normal(n) + 1j * rng.standard_normal(n))
        model_worst = max(model_worst, hessian_defect(model, v))
    passed = flow_worst < HESSIAN_CHECK_TOL and model_worst < HESSIAN_CHECK_TOL
    return passed, {"log_norm_defect": flow_worst, "model_defect": model_worst}


def check_oracle_equivalence(rng: np.random.Generator) -> tuple[bool, dict[str, Any]]:
    agreements = 0
    mismatches: list[dict[str, Any]] = []
    for index in range(ORACLE_INSTANCES):
        action, v = random_torus_instance(rng)
        try:
            report = cross_validate(action, v)
        except OracleMismatch as err:
            mismatches.append({"instance": index, **err.diagnostics})
            continue
        except MomentToolkitError as err:
            mismatches.append({"instance": index, "error": err.kind, "message": str(err)})
            continue
        if report.agree:
            agreements += 1
    return agreements == ORACLE_INSTANCES, {
        "agreements": agreements,
        "instances": ORACLE_INSTANCES,
        "mismatches": mismatches[:5],
    }


def _sample_point(rng: np.random.Generator, model: SliceModel) -> StatePoint:
    n = model.inner_action.ambient_dim
    z = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    z[rng.random(n) < 0.4] = 0.0
    if not np.any(z):
        z[int(rng.integers(n))] = 1.0
    radius = float(rng.uniform(0.1, 2.0))
    return StatePoint(radius * z / np.linalg.norm(z))


def check_orthogonality(rng: np.random.Generator) -> tuple[bool, dict[str, Any]]:
    """⟨μ(x), ξ⟩ vanishes for ξ in the stabilizer algebra of x."""
    models = [factory() for factory in BUNDLED_MODELS.values()]
    worst = 0.0
    nontrivial = 0
    for index in range(ORTHOGONALITY_SAMPLES):
        model = models[index % len(models)]
        character = futaki_character(model, _sample_point(rng, model))
        if character.size:
            nontrivial += 1
            worst = max(worst, float(np.max(np.abs(character))))
    return worst < ORTHOGONALITY_TOL, {
        "samples": ORTHOGONALITY_SAMPLES,
        "with_stabilizer": nontrivial,
        "max_component": worst,
    }


def _decay_values(model: SliceModel, v: StatePoint) -> list[float]:
    values = []
    for t in DECAY_GRID:
        norm = slice_moment(model, v.scaled(t)).norm
        values.append(norm if norm > ROUNDOFF * t * t * v.norm2 else 0.0)
    return values


def check_cubic_decay(rng: np.random.Generator) -> tuple[bool, dict[str, Any]]:
    slopes: dict[str, list[float]] = {}
    for name, factory in BUNDLED_MODELS.items():
        model = factory()
        slopes[name] = [
            loglog_slope(DECAY_GRID, _decay_values(model, v)) for v in BALANCED_VECTORS[name]
        ]
    worst = min(s for values in slopes.values() for s in values)
    return worst >= MIN_DECAY_SLOPE, {"slopes": slopes, "min_slope": worst}


def check_scaling_law(rng: np.random.Generator) -> tuple[bool, dict[str, Any]]:
    """Λ_{tv}·t² is constant on linear models."""
    variations: dict[str, float] = {}
    for name in ("identity-pair", "identity-triple"):
        model = BUNDLED_MODELS[name]()
        for index, v in enumerate(BALANCED_VECTORS[name]):
            try:
                scaled = [
                    q_operator(model.outer_action, model.embed(v.scaled(t))).lam * t * t
                    for t in DECAY_GRID
                ]
            except EmptyComplement:
                continue
            variations[f"{name}[{index}]"] = (max(scaled) - min(scaled)) / float(np.mean(scaled))
    worst = max(variations.values(), default=math.inf)
    return worst < SCALING_VARIATION, {"variation": variations, "max_variation": worst}


def _scan_outcomes(seed: int) -> tuple[list[dict[str, Any]], list[dict[str, Any]]]:
    """Run the scaling pipeline on every bundled balanced vector.

    Returns the certificate records and one outcome entry per run.
    """
    opts = PerturbOptions(seed=seed)
    records: list[dict[str, Any]] = []
    outcomes: list[dict[str, Any]] = []
    for name, factory in BUNDLED_MODELS.items():
        model = factory()
        for index, v in enumerate(BALANCED_VECTORS[name]):
            label = f"{name}[{index}]"
            try:
                report = scaling_search(model, v, SELFTEST_DELTA, SCAN_GRID, opts)
            except NeverSatisfied as err:
                products = [s["product"] for s in err.diagnostics.get("samples", [])]
                honest = all(p is None or p >= SELFTEST_DELTA for p in products)
                outcomes.append({"run": label, "outcome": "refused", "sound": honest})
                continue
            except PreconditionFailed:
                outcomes.append({"run": label, "outcome": "not polystable", "sound": True})
                continue
            except MomentToolkitError as err:
                outcomes.append({"run": label, "outcome": err.kind, "sound": False})
                continue
            record = certificate_to_dict(report.certificate, model)
            failures = audit_certificate(record)
            records.append(record)
            outcomes.append(
                {
                    "run": label,
                    "outcome": "certified",
                    "t_star": report.t_star,
                    "failures": failures,
                    "sound": not failures,
                }
            )
    return records, outcomes


def check_certificate_soundness(
    rng: np.random.Generator, scans: tuple[list[dict[str, Any]], list[dict[str, Any]]]
) -> tuple[bool, dict[str, Any]]:
    _, outcomes = scans
    return all(o["sound"] for o in outcomes), {"runs": outcomes}


def check_semicontinuity(rng: np.random.Generator) -> tuple[bool, dict[str, Any]]:
    violations: list[str] = []
    non_product = 0
    for index in range(DEGENERATIONS):
        action, rho, v = random_degeneration(rng)
        report = semicontinuity_scan(action, [(rho, v)])
        violations += [f"degeneration {index}: {msg}" for msg in report.violations]
        non_product += sum(not r.is_product for r in report.records)
    return not violations, {
        "degenerations": DEGENERATIONS,
        "non_product": non_product,
        "violations": violations,
    }


def check_destabilization(rng: np.random.Generator) -> tuple[bool, dict[str, Any]]:
    action, rho, v = destabilizing_degeneration()
    record = analyze_degeneration(action, rho, v)
    passed = not record.is_product and record.dim_jump == (0, 1) and record.weight == 0.0
    return passed, {
        "is_product": record.is_product,
        "dim_jump": list(record.dim_jump),
        "weight": record.weight,
    }


_SEMANTIC_FIELDS = (
    "x0",
    "eta",
    "y",
    "lambda_used",
    "mu_norm_initial",
    "mu_norm_final",
    "eta_norm",
    "zero_tol",
)
_SEALED_FIELDS = (*_SEMANTIC_FIELDS, "delta_used", "iterations", "mu_trace")


def _bump(value: float) -> float:
    return value + 0.1 * max(abs(value), 1.0)


def mutate_certificate(
    record: dict[str, Any], rng: np.random.Generator, reseal: bool
) -> tuple[dict[str, Any], str]:
    """One field changed by at least 10%; with `reseal` the digest is recomputed."""
    mutated = copy.deepcopy(record)
    name = str(rng.choice(_SEMANTIC_FIELDS if reseal else _SEALED_FIELDS))
    value = mutated[name]
    if name in ("x0", "y"):
        entry = int(rng.integers(len(value)))
        part = int(rng.integers(2))
        value[entry][part] = _bump(value[entry][part])
    elif name in ("eta", "mu_trace"):
        if value:
            entry = int(rng.integers(len(value)))
            value[entry] = _bump(value[entry])
        else:
            value.append(1.0)
    elif name == "iterations":
        mutated[name] = value + 1
    else:
        mutated[name] = _bump(value)
    if reseal:
        body = {key: val for key, val in mutated.items() if key != "digest"}
        mutated["digest"] = content_digest(body)
    return mutated, name


def check_tamper_detection(
    rng: np.random.Generator, scans: tuple[list[dict[str, Any]], list[dict[str, Any]]]
) -> tuple[bool, dict[str, Any]]:
    records, _ = scans
    if not records:
        return False, {"reason": "no certificates to mutate"}
    accepted: list[str] = []
    for index in range(TAMPER_MUTATIONS):
        record = records[index % len(records)]
        mutated, name = mutate_certificate(record, rng, reseal=bool(index % 2))
        if not audit_certificate(mutated):
            accepted.append(f"mutation {index} of {name}")
    return not accepted, {"mutations": TAMPER_MUTATIONS, "accepted": accepted}


# --- driver ---

Check = Callable[[np.random.Generator], tuple[bool, dict[str, Any]]]


def run_selftest(seed: int = 0) -> SelftestOutcome:
    """Run every check; a check that raises counts as failed."""
    outcome = SelftestOutcome()
    scans: tuple[list[dict[str, Any]], list[dict[str, Any]]] | None = None

    def scanned() -> tuple[list[dict[str, Any]], list[dict[str, Any]]]:
        nonlocal scans
        if scans is None:
            scans = _scan_outcomes(seed)
        return scans

    checks: list[tuple[str, Check]] = [
        ("moment_identity", check_moment_identity),
        ("hessians", check_hessians),
        ("oracle_equivalence", check_oracle_equivalence),
        ("orthogonality", check_orthogonality),
        ("cubic_decay", check_cubic_decay),
        ("scaling_law", check_scaling_law),
        ("certificate_soundness", lambda rng: check_certificate_soundness(rng, scanned())),
        ("semicontinuity", check_semicontinuity),
        ("destabilization", check_destabilization),
        ("tamper_detection", lambda rng: check_tamper_detection(rng, scanned())),
    ]
    for index, (name, check) in enumerate(checks):
        rng = np.random.default_rng([seed, index])
        started = time.perf_counter()
        try:
            passed, detail = check(rng)
        except MomentToolkitError as err:
            passed, detail = False, {"error": err.kind, "message": str(err)}
        elapsed = time.perf_counter() - started
        outcome.checks.append(CheckResult(name, passed, detail, elapsed))
        _LOGGER.log(
            logging.INFO if passed else logging.ERROR,
            "Selftest: %s %s in %.2fs",
            name,
            "passed" if passed else "FAILED",
            elapsed,
        )
    return outcome
