"""GIT stability: Kempf-Ness flow, the torus weight-polytope oracle and their cross-check."""

from __future__ import annotations

import logging
import math
from collections.abc import Mapping, Sequence
from dataclasses import dataclass
from enum import StrEnum

import numpy as np
import sympy as sp
from scipy import linalg

from .algebra import (
    Direction,
    GroupAction,
    OneParameterSubgroup,
    StatePoint,
    exp_action,
    infinitesimal_action,
    lattice_from_coefficients,
    ops_limit,
    stabilizer,
)
from .const import (
    ARMIJO_C1,
    ARMIJO_MAX_HALVINGS,
    DEFAULT_ESCAPE_STEP,
    DEFAULT_MAX_ITER,
    DEFAULT_MAX_STEP,
    DEFAULT_RANK_TOL,
    DEFAULT_SPECTRUM_TOL,
    DEFAULT_STAGNATION_TOL,
    DEFAULT_STAGNATION_WINDOW,
    DEFAULT_UNSTABLE_RATIO,
    DEFAULT_ZERO_TOL,
    FINITE_DIFFERENCE_STEP,
    HESSIAN_CHECK_TOL,
    MAX_DENOMINATOR,
    OPT_MAX_ITER,
    OPT_MAX_STEP,
    OPT_STAGNATION_WINDOW,
    SUPPORT_TOL,
    TOL_ESCAPE_STEP,
    TOL_RANK,
    TOL_SPECTRUM,
    TOL_STAGNATION,
    TOL_UNSTABLE,
    TOL_ZERO,
    WITNESS_DRIFT_STEPS,
)
from .exceptions import DimensionMismatch, IrrationalSpectrum, MaxIterExceeded, OracleMismatch
from .hull import HullPosition, analyze_weights
from .moment import linear_moment
from .representation import TorusWeights

_LOGGER = logging.getLogger(__name__)

# Share of ‖x‖² below which a coordinate counts as escaped at a semistable stop
_ESCAPED_MASS = 1e-5


class StabilityClass(StrEnum):
    STABLE = "stable"
    POLYSTABLE = "polystable_not_stable"
    SEMISTABLE = "semistable_not_polystable"
    UNSTABLE = "unstable"

    @property
    def is_polystable(self) -> bool:
        return self in (StabilityClass.STABLE, StabilityClass.POLYSTABLE)


class Evidence(StrEnum):
    ORACLE = "oracle"
    FLOW = "flow"
    CROSS_VALIDATED = "cross_validated"
    FLOW_EVIDENCE_ONLY = "flow_evidence_only"  # non-abelian: no exact oracle


@dataclass(frozen=True)
class FlowOptions:
    zero_tol: float = DEFAULT_ZERO_TOL
    max_iter: int = DEFAULT_MAX_ITER
    unstable_ratio: float = DEFAULT_UNSTABLE_RATIO
    stagnation_window: int = DEFAULT_STAGNATION_WINDOW
    stagnation_tol: float = DEFAULT_STAGNATION_TOL
    escape_step: float = DEFAULT_ESCAPE_STEP
    max_step: float = DEFAULT_MAX_STEP
    rank_tol: float = DEFAULT_RANK_TOL
    spectrum_tol: float = DEFAULT_SPECTRUM_TOL

    @classmethod
    def from_mapping(cls, values: Mapping[str, float]) -> FlowOptions:
        return cls(
            zero_tol=values.get(TOL_ZERO, DEFAULT_ZERO_TOL),
            max_iter=int(values.get(OPT_MAX_ITER, DEFAULT_MAX_ITER)),
            unstable_ratio=values.get(TOL_UNSTABLE, DEFAULT_UNSTABLE_RATIO),
            stagnation_window=int(values.get(OPT_STAGNATION_WINDOW, DEFAULT_STAGNATION_WINDOW)),
            stagnation_tol=values.get(TOL_STAGNATION, DEFAULT_STAGNATION_TOL),
            escape_step=values.get(TOL_ESCAPE_STEP, DEFAULT_ESCAPE_STEP),
            max_step=values.get(OPT_MAX_STEP, DEFAULT_MAX_STEP),
            rank_tol=values.get(TOL_RANK, DEFAULT_RANK_TOL),
            spectrum_tol=values.get(TOL_SPECTRUM, DEFAULT_SPECTRUM_TOL),
        )


@dataclass(frozen=True)
class FlowSample:
    iteration: int
    log_norm: float  # log ‖x‖²
    moment_norm: float
    step_norm: float


@dataclass(frozen=True, eq=False)
class StabilityVerdict:
    stability: StabilityClass
    evidence: Evidence
    witness: OneParameterSubgroup | None = None
    zero_point: StatePoint | None = None
    iterations: int = 0
    moment_norm: float | None = None
    norm: float | None = None
    steps: tuple[np.ndarray, ...] = ()  # applied steps, orthonormal coordinates
    trace: tuple[FlowSample, ...] = ()

    def replay(self, action: GroupAction, x: StatePoint) -> StatePoint:
        """Apply the flow's group element to a point of another representation."""
        for step in self.steps:
            x = exp_action(action, step, 1.0, x, Direction.IMAGINARY)
        return x


def kempf_ness_value(action: GroupAction, v: StatePoint, xi: np.ndarray, s: float) -> float:
    """½‖e^{s·iA_ξ}v‖²; its s-derivative at 0 is 2⟨ν(v), ξ⟩."""
    return 0.5 * exp_action(action, xi, s, v, Direction.IMAGINARY).norm2


# --- flow ---


def _log_norm_gradient(action: GroupAction, x: StatePoint) -> np.ndarray:
    return 4.0 * linear_moment(action, x).coeffs / x.norm2


def log_norm_hessian(action: GroupAction, x: StatePoint) -> np.ndarray:
    """∇²f at the identity for f(η) = log‖e^{iA_η}x‖²: 4σᵀσ/‖x‖² − 16ννᵀ/‖x‖⁴."""
    nu = linear_moment(action, x).coeffs
    n2 = x.norm2
    sigma = infinitesimal_action(action, x)
    return 4.0 * (sigma.T @ sigma) / n2 - 16.0 * np.outer(nu, nu) / n2**2


def check_log_norm_hessian(
    action: GroupAction, x: StatePoint, h: float = FINITE_DIFFERENCE_STEP
) -> float:
    """Largest relative defect of ξᵀ∇²f ξ against central differences of the gradient.

    Along x_s = e^{s·iA_ξ}x the derivative of f is exactly ∇f(x_s)·ξ. The basis
    vectors and their pairwise sums determine the symmetric Hessian.
    """
    if x.norm2 == 0.0:
        raise ValueError("The log-norm is undefined at the origin")
    hessian = log_norm_hessian(action, x)
    eye = np.eye(action.dim)
    directions = [eye[i] for i in range(action.dim)] + [
        eye[i] + eye[j] for i in range(action.dim) for j in range(i + 1, action.dim)
    ]
    worst = 0.0
    for xi in directions:
        forward = _log_norm_gradient(action, exp_action(action, xi, h, x, Direction.IMAGINARY))
        backward = _log_norm_gradient(action, exp_action(action, xi, -h, x, Direction.IMAGINARY))
        numeric = float((forward - backward) @ xi) / (2.0 * h)
        exact = float(xi @ hessian @ xi)
        worst = max(worst, abs(numeric - exact) / max(1.0, abs(exact)))
    if worst > HESSIAN_CHECK_TOL:
        _LOGGER.warning("Kempf-Ness flow: log-norm Hessian off by %.3e", worst)
    return worst


def _newton_direction(action: GroupAction, x: StatePoint) -> tuple[np.ndarray, np.ndarray]:
    """Gradient of f = log‖x‖² and its Levenberg-regularized Newton direction."""
    gradient = _log_norm_gradient(action, x)
    g_norm = float(np.linalg.norm(gradient))
    if g_norm == 0.0:
        return gradient, np.zeros_like(gradient)
    damped = log_norm_hessian(action, x) + g_norm * np.eye(action.dim)
    return gradient, -linalg.lstsq(damped, gradient)[0]


def orbit_stabilizer_dim(action: GroupAction, v: StatePoint) -> int:
    """Complex dimension of {ξ ∈ 𝔨⊗C : A_ξ v = 0}; the same at every point of the orbit G·v."""
    singular = linalg.svdvals(action.rep.columns(v.coords))
    rank = int(np.count_nonzero(singular > SUPPORT_TOL * max(v.norm, 1.0)))
    return action.dim - rank


def kempf_ness_flow(
    action: GroupAction, v: StatePoint, opts: FlowOptions | None = None
) -> StabilityVerdict:
    """Minimize log‖g·v‖² over g = exp(iA_η) and classify v from how the minimization ends.

    Each iteration tries the full Newton step and backtracks (Armijo) from there.
    The flow stops on a collapse of the norm (unstable), on a moment-map zero
    (polystable, or semistable when the zero has a larger stabilizer than the
    orbit of v), or when the log-norm stalls for `stagnation_window` steps that
    keep moving (semistable).
    """
    opts = opts or FlowOptions()
    evidence = Evidence.FLOW if action.is_torus else Evidence.FLOW_EVIDENCE_ONLY

    if v.norm2 == 0.0:
        return _zero_verdict(action, v, v, evidence, 0, (), (), opts)

    x = v
    initial_norm2 = v.norm2
    steps: list[np.ndarray] = []
    trace: list[FlowSample] = []
    log_norms: list[float] = [math.log(x.norm2)]
    step_norms: list[float] = []

    for iteration in range(opts.max_iter):
        moment_norm = linear_moment(action, x).norm
        if x.norm2 < opts.unstable_ratio**2 * initial_norm2:
            _LOGGER.info(
                "Kempf-Ness flow: norm collapsed after %d iterations, unstable", iteration
            )
            witness = _extract_witness(
                action, v, steps[-WITNESS_DRIFT_STEPS:], opts, StabilityClass.UNSTABLE
            )
            return StabilityVerdict(
                stability=StabilityClass.UNSTABLE,
                evidence=evidence,
                witness=witness,
                iterations=iteration,
                moment_norm=moment_norm,
                norm=x.norm,
                steps=tuple(steps),
                trace=tuple(trace),
            )

        gradient, direction = _newton_direction(action, x)
        d_norm = float(np.linalg.norm(direction))
        near_zero = moment_norm <= opts.zero_tol * max(1.0, x.norm2)
        # a long last step means the flow may still be escaping
        settled = not step_norms or step_norms[-1] < opts.escape_step
        if near_zero and settled and d_norm < opts.escape_step:
            return _zero_verdict(
                action, v, x, evidence, iteration, tuple(steps), tuple(trace), opts
            )

        if d_norm > opts.max_step:
            direction *= opts.max_step / d_norm

        f_current = log_norms[-1]
        accepted = None
        step = direction
        for _ in range(ARMIJO_MAX_HALVINGS):
            candidate = exp_action(action, step, 1.0, x, Direction.IMAGINARY)
            if candidate.norm2 > 0.0:
                f_candidate = math.log(candidate.norm2)
                if f_candidate <= f_current + ARMIJO_C1 * float(gradient @ step):
                    accepted = (step, candidate, f_candidate)
                    break
            step = 0.5 * step

        if accepted is None:
            if near_zero:
                return _zero_verdict(
                    action, v, x, evidence, iteration, tuple(steps), tuple(trace), opts
                )
            raise MaxIterExceeded(
                "Kempf-Ness flow: line search failed away from a moment-map zero",
                iterations=iteration,
                moment_norm=moment_norm,
                norm=x.norm,
            )

        step, x, f_new = accepted
        steps.append(step)
        log_norms.append(f_new)
        step_norms.append(float(np.linalg.norm(step)))
        trace.append(FlowSample(iteration, f_new, moment_norm, step_norms[-1]))
        _LOGGER.debug(
            "Kempf-Ness flow: iteration %d, log-norm %.12g, |nu| %.3e, step %.3e",
            iteration,
            f_new,
            moment_norm,
            step_norms[-1],
        )

        window = opts.stagnation_window
        if (
            len(step_norms) >= window
            and log_norms[-window - 1] - log_norms[-1] < opts.stagnation_tol
            and min(step_norms[-window:]) >= opts.escape_step
        ):
            _LOGGER.info(
                "Kempf-Ness flow: norm stagnated while escaping after %d iterations, "
                "semistable",
                iteration + 1,
            )
            return _semistable_verdict(
                action, v, x, evidence, iteration + 1, tuple(steps), tuple(trace), opts
            )

    raise MaxIterExceeded(
        f"Kempf-Ness flow: no termination criterion after {opts.max_iter} iterations",
        iterations=opts.max_iter,
        moment_norm=linear_moment(action, x).norm,
        norm=x.norm,
    )


def _zero_verdict(
    action: GroupAction,
    v: StatePoint,
    zero: StatePoint,
    evidence: Evidence,
    iterations: int,
    steps: tuple[np.ndarray, ...],
    trace: tuple[FlowSample, ...],
    opts: FlowOptions,
) -> StabilityVerdict:
    stab = stabilizer(action, zero, opts.rank_tol)
    orbit_dim = orbit_stabilizer_dim(action, v)
    if stab.dim > orbit_dim:
        # the zero lies in the boundary of the orbit closure
        _LOGGER.info(
            "Kempf-Ness flow: zero after %d iterations has stabilizer dim %d > %d, semistable",
            iterations,
            stab.dim,
            orbit_dim,
        )
        return _semistable_verdict(action, v, zero, evidence, iterations, steps, trace, opts)

    stability = (
        StabilityClass.STABLE if stab.dim == action.trivial_dim else StabilityClass.POLYSTABLE
    )
    _LOGGER.info(
        "Kempf-Ness flow: moment-map zero after %d iterations, %s (stabilizer dim %d)",
        iterations,
        stability,
        stab.dim,
    )
    return StabilityVerdict(
        stability=stability,
        evidence=evidence,
        zero_point=zero,
        iterations=iterations,
        moment_norm=linear_moment(action, zero).norm,
        norm=zero.norm,
        steps=steps,
        trace=trace,
    )


def _semistable_verdict(
    action: GroupAction,
    v: StatePoint,
    final: StatePoint,
    evidence: Evidence,
    iterations: int,
    steps: tuple[np.ndarray, ...],
    trace: tuple[FlowSample, ...],
    opts: FlowOptions,
) -> StabilityVerdict:
    witness = _extract_witness(action, v, steps, opts, StabilityClass.SEMISTABLE, final=final)
    return StabilityVerdict(
        stability=StabilityClass.SEMISTABLE,
        evidence=evidence,
        witness=witness,
        iterations=iterations,
        moment_norm=linear_moment(action, final).norm,
        norm=final.norm,
        steps=steps,
        trace=trace,
    )


# --- witnesses ---


def _kept_annihilator(action: GroupAction, final: StatePoint) -> np.ndarray | None:
    """Integer basis (columns) of the lattice functionals vanishing on the weights that survive."""
    rep = action.rep
    assert isinstance(rep, TorusWeights)
    mass = np.abs(final.coords) ** 2 / final.norm2
    kept = np.flatnonzero(mass >= _ESCAPED_MASS)
    if kept.size == 0:
        return None
    null = sp.Matrix(rep.lattice[:, kept].tolist()).T.nullspace()
    if not null:
        return None
    columns = []
    for vector in null:
        common = math.lcm(*(int(sp.Rational(entry).q) for entry in vector))
        columns.append([int(sp.Rational(entry) * common) for entry in vector])
    return np.array(columns, dtype=np.int64).T


def _witness_is_valid(
    action: GroupAction,
    rho: OneParameterSubgroup,
    v: StatePoint,
    stability: StabilityClass,
    opts: FlowOptions,
) -> bool:
    try:
        exists, limit = ops_limit(action, rho, v, opts.spectrum_tol)
    except IrrationalSpectrum:
        return False
    if not exists or limit is None:
        return False
    if stability == StabilityClass.UNSTABLE:
        return limit.norm <= opts.unstable_ratio * v.norm
    if limit.norm == 0.0:
        return False
    return stabilizer(action, limit, opts.rank_tol).dim > stabilizer(action, v, opts.rank_tol).dim


def _round_drift(
    action: GroupAction,
    drift: np.ndarray,
    stability: StabilityClass,
    final: StatePoint | None,
) -> OneParameterSubgroup | None:
    if not action.is_torus:
        return OneParameterSubgroup.from_direction(drift, lattice=False)
    kernel = linalg.null_space(action.rep.weights.T)
    drift = drift - kernel @ (kernel.T @ drift)
    direction = lattice_from_coefficients(action, drift)
    basis = None
    if stability == StabilityClass.SEMISTABLE and final is not None:
        basis = _kept_annihilator(action, final)
    if basis is None:
        return OneParameterSubgroup.from_direction(direction)
    # round in annihilator coordinates so the witness stays on the face exactly
    coeffs = OneParameterSubgroup.from_direction(
        linalg.lstsq(basis.astype(float), direction)[0]
    )
    if coeffs is None:
        return None
    integral = basis @ np.array([int(q) for q in coeffs.xi], dtype=np.int64)
    return OneParameterSubgroup(tuple(int(n) for n in integral)).primitive()


def _extract_witness(
    action: GroupAction,
    v: StatePoint,
    steps: Sequence[np.ndarray],
    opts: FlowOptions,
    stability: StabilityClass,
    final: StatePoint | None = None,
) -> OneParameterSubgroup | None:
    """Round the flow's drift to a one-parameter subgroup with denominators ≤ 64 and verify it."""
    drift = np.sum(steps, axis=0) if steps else np.zeros(action.dim)
    rho = _round_drift(action, drift, stability, final)
    valid = rho is not None and not rho.is_trivial
    if valid and _witness_is_valid(action, rho, v, stability, opts):
        return rho
    _LOGGER.warning(
        "Kempf-Ness flow: no %s witness with denominator <= %d near drift %s",
        stability,
        MAX_DENOMINATOR,
        np.round(drift, 6).tolist(),
    )
    return None


# --- torus oracle ---


def torus_polystability(
    weights: Sequence[Sequence[int]] | np.ndarray, support: Sequence[int]
) -> StabilityVerdict:
    """Exact Hilbert-Mumford verdict from the active weights (no flow, no point)."""
    weights = np.asarray(weights).tolist()
    analysis = analyze_weights(weights, support)
    witness = (
        OneParameterSubgroup(analysis.functional, lattice=True)
        if analysis.functional is not None
        else None
    )
    match analysis.position:
        case HullPosition.EMPTY:
            stability = (
                StabilityClass.STABLE if analysis.weight_rank == 0 else StabilityClass.POLYSTABLE
            )
        case HullPosition.INTERIOR_FULL:
            stability = StabilityClass.STABLE
        case HullPosition.INTERIOR:
            stability = StabilityClass.POLYSTABLE
        case HullPosition.BOUNDARY:
            stability = StabilityClass.SEMISTABLE
        case HullPosition.OUTSIDE:
            stability = StabilityClass.UNSTABLE
    return StabilityVerdict(stability=stability, evidence=Evidence.ORACLE, witness=witness)


@dataclass(frozen=True, eq=False)
class CrossValidation:
    flow: StabilityVerdict
    oracle: StabilityVerdict
    agree: bool
    flow_witness_valid: bool
    oracle_witness_valid: bool

    @property
    def stability(self) -> StabilityClass:
        return self.oracle.stability


def cross_validate(
    action: GroupAction, v: StatePoint, opts: FlowOptions | None = None
) -> CrossValidation:
    """Run the flow and the oracle on a torus point and insist they agree."""
    opts = opts or FlowOptions()
    if not action.is_torus:
        raise DimensionMismatch("The weight-polytope oracle only exists for torus actions")
    flow = kempf_ness_flow(action, v, opts)
    oracle = torus_polystability(action.rep.lattice, np.flatnonzero(v.support()).tolist())

    def witness_ok(verdict: StabilityVerdict) -> bool:
        if verdict.stability.is_polystable:
            return True
        return verdict.witness is not None and _witness_is_valid(
            action, verdict.witness, v, verdict.stability, opts
        )

    if flow.stability != oracle.stability:
        raise OracleMismatch(
            f"Flow says {flow.stability}, oracle says {oracle.stability}",
            flow=str(flow.stability),
            oracle=str(oracle.stability),
            iterations=flow.iterations,
            weights=action.rep.lattice.tolist(),
        )
    _LOGGER.debug("Cross-validation: both say %s", flow.stability)
    return CrossValidation(
        flow=flow,
        oracle=oracle,
        agree=True,
        flow_witness_valid=witness_ok(flow),
        oracle_witness_valid=witness_ok(oracle),
    )


# --- instance generation ---


def random_torus_instance(
    rng: np.random.Generator,
    max_rank: int = 3,
    max_dim: int = 6,
    weight_bound: int = 5,
    zero_probability: float = 0.3,
) -> tuple[GroupAction, StatePoint]:
    """Random torus action with integer weights and a point with random support.

    The weight rows may be dependent, in which case the torus acts with a kernel.
    """
    k = int(rng.integers(1, max_rank + 1))
    n = int(rng.integers(max(k, 2), max_dim + 1))
    weights = rng.integers(-weight_bound, weight_bound + 1, size=(k, n))
    coords = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    coords[rng.random(n) < zero_probability] = 0.0
    return GroupAction.from_weights(weights), StatePoint(coords)
