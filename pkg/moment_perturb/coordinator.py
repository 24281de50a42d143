"""Analysis coordinator: dispatches commands, fans them out, assembles the report."""

from __future__ import annotations

import asyncio
import logging
import time
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field
from typing import Any

from .algebra import OneParameterSubgroup, StatePoint
from .const import (
    EXIT_INCONSISTENT,
    EXIT_OK,
    OPT_ORBIT_RADIUS,
    TOL_ORBIT,
    TOL_RANK,
    TOL_RECHECK,
    TOL_SPECTRUM,
)
from .exceptions import (
    DimensionMismatch,
    InternalConsistencyError,
    MomentToolkitError,
    NoLimit,
    SpecParseError,
)
from .invariants import analyze_degeneration, futaki_character
from .moment import SliceModel
from .perturb import (
    PerturbOptions,
    ZeroCertificate,
    check_certificate,
    perturb_to_zero,
    scaling_search,
)
from .selftest import run_selftest
from .serialization import (
    Report,
    SpecFile,
    certificate_to_dict,
    cross_validation_to_dict,
    degeneration_to_dict,
    encode_rho,
    error_to_dict,
    scaling_to_dict,
    verdict_to_dict,
)
from .stability import FlowOptions, cross_validate, kempf_ness_flow

_LOGGER = logging.getLogger(__name__)

COMMANDS = ("classify", "flow", "perturb", "scan", "degenerate", "selftest")


@dataclass(frozen=True)
class Job:
    """One command invocation; `names` are the point (and model) it refers to."""

    command: str
    names: tuple[str, ...] = ()
    delta: float | None = None
    t_grid: tuple[float, ...] = ()
    ops: OneParameterSubgroup | None = None

    @property
    def label(self) -> str:
        return " ".join((self.command, *self.names))


@dataclass
class AnalysisCoordinator:
    """Runs jobs against one spec; the only place toolkit errors are caught."""

    spec: SpecFile | None
    tolerances: dict[str, float]
    seed: int = 0
    _handlers: dict[str, Callable[[Job], dict[str, Any]]] = field(init=False, repr=False)

    def __post_init__(self) -> None:
        self._handlers = {
            "classify": self._classify,
            "flow": self._flow,
            "perturb": self._perturb,
            "scan": self._scan,
            "degenerate": self._degenerate,
            "selftest": self._selftest,
        }

    @property
    def flow_options(self) -> FlowOptions:
        return FlowOptions.from_mapping(self.tolerances)

    @property
    def perturb_options(self) -> PerturbOptions:
        return PerturbOptions.from_mapping(self.tolerances, self.seed)

    def _spec(self) -> SpecFile:
        if self.spec is None:
            raise SpecParseError("This command needs a spec file (--spec)")
        return self.spec

    def _point(self, job: Job, index: int = 0) -> StatePoint:
        if len(job.names) <= index:
            raise SpecParseError(f"{job.command} needs a point name")
        return self._spec().point(job.names[index])

    # --- handlers ---

    def _classify(self, job: Job) -> dict[str, Any]:
        spec = self._spec()
        v = self._point(job)
        if spec.action.is_torus:
            result = cross_validation_to_dict(cross_validate(spec.action, v, self.flow_options))
        else:
            result = verdict_to_dict(kempf_ness_flow(spec.action, v, self.flow_options))
        result["futaki"] = futaki_character(spec.action, v, self.tolerances[TOL_RANK]).tolist()
        return result

    def _flow(self, job: Job) -> dict[str, Any]:
        spec = self._spec()
        verdict = kempf_ness_flow(spec.action, self._point(job), self.flow_options)
        return verdict_to_dict(verdict, include_trace=True)

    def _model_and_point(self, job: Job) -> tuple[SliceModel, StatePoint]:
        if len(job.names) < 2:
            raise SpecParseError(f"{job.command} needs a model name and a point name")
        spec = self._spec()
        return spec.model(job.names[0]), self._point(job, 1)

    def _require_delta(self, job: Job) -> float:
        if job.delta is None or not job.delta > 0:
            raise SpecParseError(f"{job.command} needs a positive --delta")
        return job.delta

    def _verify_or_raise(
        self, record: dict[str, Any], cert: ZeroCertificate, model: SliceModel
    ) -> None:
        failures = check_certificate(cert, model, self.tolerances[TOL_RECHECK])
        if failures:
            raise InternalConsistencyError(
                "Freshly issued certificate failed its own verification",
                failures=failures,
                digest=record["digest"],
            )

    def _perturb(self, job: Job) -> dict[str, Any]:
        model, x0 = self._model_and_point(job)
        cert = perturb_to_zero(model, x0, self._require_delta(job), self.perturb_options)
        record = certificate_to_dict(cert, model)
        self._verify_or_raise(record, cert, model)
        return record

    def _scan(self, job: Job) -> dict[str, Any]:
        model, v = self._model_and_point(job)
        if not job.t_grid:
            raise SpecParseError("scan needs a --t-grid")
        report = scaling_search(
            model, v, self._require_delta(job), job.t_grid, self.perturb_options
        )
        result = scaling_to_dict(report, model)
        self._verify_or_raise(result["certificate"], report.certificate, model)
        return result

    def _degenerate(self, job: Job) -> dict[str, Any]:
        spec = self._spec()
        if job.ops is None:
            raise SpecParseError("degenerate needs --ops")
        if len(job.ops.xi) != spec.action.dim:
            raise SpecParseError(
                f"--ops has {len(job.ops.xi)} entries, the group has rank {spec.action.dim}"
            )
        rho = job.ops if spec.action.is_torus else OneParameterSubgroup(job.ops.xi, lattice=False)
        try:
            record = analyze_degeneration(
                spec.action,
                rho,
                self._point(job),
                orbit_tol=self.tolerances[TOL_ORBIT],
                orbit_radius=self.tolerances[OPT_ORBIT_RADIUS],
                rank_tol=self.tolerances[TOL_RANK],
                spectrum_tol=self.tolerances[TOL_SPECTRUM],
            )
        except DimensionMismatch as err:
            raise SpecParseError(str(err), **err.diagnostics) from err
        except NoLimit:
            _LOGGER.info("Coordinator: %s has no limit", job.label)
            return {"kind": "degeneration", "rho": encode_rho(rho), "limit_exists": False}
        return degeneration_to_dict(record)

    def _selftest(self, job: Job) -> dict[str, Any]:
        outcome = run_selftest(self.seed)
        if not outcome.ok:
            raise InternalConsistencyError(
                "Self-test failed", failed=outcome.failed(), results=outcome.to_dict()
            )
        return outcome.to_dict()

    # --- execution ---

    def _execute(self, job: Job) -> tuple[dict[str, Any], int, float]:
        started = time.perf_counter()
        handler = self._handlers.get(job.command)
        try:
            if handler is None:
                raise SpecParseError(f"Unknown command {job.command!r}", known=list(COMMANDS))
            result, code = handler(job), EXIT_OK
        except MomentToolkitError as err:
            _LOGGER.warning("Coordinator: %s failed: %s (%s)", job.label, err, err.kind)
            result, code = error_to_dict(err), err.exit_code
        return result, code, time.perf_counter() - started

    async def async_run(self, jobs: Sequence[Job]) -> Report:
        """Run jobs concurrently in worker threads; the report keeps the job order."""
        _LOGGER.debug("Coordinator: running %d jobs", len(jobs))
        outcomes = await asyncio.gather(
            *(asyncio.to_thread(self._execute, job) for job in jobs)
        )
        report = Report(
            spec_digest=self.spec.digest if self.spec is not None else None,
            tolerances=dict(self.tolerances),
            seed=self.seed,
        )
        worst = EXIT_OK
        for job, (result, code, elapsed) in zip(jobs, outcomes, strict=True):
            report.add(job.label, result)
            report.timings[job.label] = round(elapsed, 6)
            worst = max(worst, code)
        report.exit_code = worst
        if worst >= EXIT_INCONSISTENT:
            _LOGGER.error("Coordinator: finished with exit code %d", worst)
        else:
            _LOGGER.info("Coordinator: finished with exit code %d", worst)
        return report

    def run(self, jobs: Sequence[Job]) -> Report:
        return asyncio.run(self.async_run(jobs))
