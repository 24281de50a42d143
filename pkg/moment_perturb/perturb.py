"""Certified perturbation of approximate moment-map zeros and the t-scaling pipeline."""

from __future__ import annotations

import logging
import math
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg
from scipy.stats import qmc

from .algebra import (
    Direction,
    StatePoint,
    exp_action,
    infinitesimal_action,
    q_operator,
    stabilizer,
)
from .const import (
    BALL_SAMPLE_SHRINK,
    DEFAULT_CERTIFICATE_SLACK,
    DEFAULT_LAMBDA_MARGIN,
    DEFAULT_LAMBDA_SAMPLES,
    DEFAULT_ORTHOGONALITY_TOL,
    DEFAULT_RANK_TOL,
    DEFAULT_RECHECK_TOL,
    DEFAULT_ZERO_TOL,
    NEWTON_DAMPING_FRACTION,
    NEWTON_MAX_HALVINGS,
    NEWTON_MAX_ITER,
    OPT_LAMBDA_MARGIN,
    OPT_LAMBDA_SAMPLES,
    TOL_CERTIFICATE_SLACK,
    TOL_ORTHOGONALITY,
    TOL_RANK,
    TOL_RECHECK,
    TOL_ZERO,
)
from .exceptions import (
    BallExitsModel,
    BoundViolated,
    EmptyComplement,
    HypothesisFailed,
    InternalConsistencyError,
    LeftBall,
    MomentToolkitError,
    NeverSatisfied,
    OrthogonalityFailed,
    OutsideBall,
    PreconditionFailed,
    Stagnation,
)
from .moment import MomentValue, SliceModel, decay_slope, hessian_moment, slice_moment
from .stability import FlowOptions, kempf_ness_flow

_LOGGER = logging.getLogger(__name__)


@dataclass(frozen=True)
class PerturbOptions:
    zero_tol: float = DEFAULT_ZERO_TOL  # scaled by (1 + ‖x₀‖²)
    rank_tol: float = DEFAULT_RANK_TOL
    orthogonality_tol: float = DEFAULT_ORTHOGONALITY_TOL
    lambda_samples: int = DEFAULT_LAMBDA_SAMPLES
    lambda_margin: float = DEFAULT_LAMBDA_MARGIN
    certificate_slack: float = DEFAULT_CERTIFICATE_SLACK
    recheck_tol: float = DEFAULT_RECHECK_TOL
    seed: int = 0
    flow: FlowOptions = field(default_factory=FlowOptions)

    @classmethod
    def from_mapping(cls, values: Mapping[str, float], seed: int = 0) -> PerturbOptions:
        return cls(
            zero_tol=values.get(TOL_ZERO, DEFAULT_ZERO_TOL),
            rank_tol=values.get(TOL_RANK, DEFAULT_RANK_TOL),
            orthogonality_tol=values.get(TOL_ORTHOGONALITY, DEFAULT_ORTHOGONALITY_TOL),
            lambda_samples=int(values.get(OPT_LAMBDA_SAMPLES, DEFAULT_LAMBDA_SAMPLES)),
            lambda_margin=values.get(OPT_LAMBDA_MARGIN, DEFAULT_LAMBDA_MARGIN),
            certificate_slack=values.get(TOL_CERTIFICATE_SLACK, DEFAULT_CERTIFICATE_SLACK),
            recheck_tol=values.get(TOL_RECHECK, DEFAULT_RECHECK_TOL),
            seed=seed,
            flow=FlowOptions.from_mapping(values),
        )


# --- λ estimation ---


@dataclass(frozen=True)
class LambdaEstimate:
    value: float  # (1 + margin)·max Λ
    max_lam: float
    samples: int
    margin: float
    seed: int
    argmax: tuple[float, ...]


def ball_samples(k: int, delta: float, samples: int, seed: int) -> np.ndarray:
    """Deterministic points of the closed δ-ball in R^k.

    ξ = 0, the 2k axis points just inside the boundary, then Halton points
    (skipping the first `seed`) pushed radially from the cube onto the ball.
    """
    radius = delta * (1.0 - BALL_SAMPLE_SHRINK)
    points = [np.zeros(k)]
    for j in range(k):
        for sign in (1.0, -1.0):
            axis = np.zeros(k)
            axis[j] = sign * radius
            points.append(axis)
    engine = qmc.Halton(d=k, scramble=False)
    if seed:
        engine.fast_forward(seed)
    for u in engine.random(samples):
        y = 2.0 * u - 1.0
        length = float(np.linalg.norm(y))
        if length == 0.0:
            points.append(np.zeros(k))
            continue
        points.append(radius * float(np.max(np.abs(y))) * y / length)
    return np.array(points)


def estimate_lambda(
    model: SliceModel,
    x0: StatePoint,
    delta: float,
    samples: int = DEFAULT_LAMBDA_SAMPLES,
    margin: float = DEFAULT_LAMBDA_MARGIN,
    seed: int = 0,
    rank_tol: float = DEFAULT_RANK_TOL,
) -> LambdaEstimate:
    if not delta > 0:
        raise ValueError(f"delta must be positive, got {delta}")
    best = -math.inf
    argmax = np.zeros(model.inner_action.dim)
    for xi in ball_samples(model.inner_action.dim, delta, samples, seed):
        x = exp_action(model.inner_action, xi, 1.0, x0, Direction.IMAGINARY)
        try:
            image = model.embed(x)
        except OutsideBall as err:
            raise BallExitsModel(
                "The δ-ball around x₀ leaves the model ball",
                xi=xi.tolist(),
                norm=x.norm,
                ball_radius=model.ball_radius,
            ) from err
        lam = q_operator(model.outer_action, image, rank_tol).lam / model.form_scale
        if lam > best:
            best, argmax = lam, xi
    _LOGGER.debug("Perturbation: max Λ %.6g over %d samples at ξ=%s", best, samples, argmax)
    return LambdaEstimate(
        value=(1.0 + margin) * best,
        max_lam=best,
        samples=samples,
        margin=margin,
        seed=seed,
        argmax=tuple(float(c) for c in argmax),
    )


def lambda_bound(
    model: SliceModel,
    x0: StatePoint,
    delta: float,
    samples: int = DEFAULT_LAMBDA_SAMPLES,
    margin: float = DEFAULT_LAMBDA_MARGIN,
    seed: int = 0,
    rank_tol: float = DEFAULT_RANK_TOL,
) -> float:
    """λ ≥ Λ_x over e^{iξ}x₀, ‖ξ‖ < δ, estimated by sampling with a safety margin.

    Raises EmptyComplement when a sampled point is fixed by the whole group.
    """
    return estimate_lambda(model, x0, delta, samples, margin, seed, rank_tol).value


# --- certified solve ---


@dataclass(frozen=True, eq=False)
class ZeroCertificate:
    x0: StatePoint
    eta: np.ndarray  # in 𝔨_{x₀}^⊥, orthonormal coordinates
    y: StatePoint
    lambda_used: float
    delta_used: float
    mu_norm_initial: float
    mu_norm_final: float
    eta_norm: float
    zero_tol: float
    lambda_samples: int
    lambda_margin: float
    seed: int
    rank_tol: float
    iterations: int = 0
    mu_trace: tuple[float, ...] = ()  # ‖μ‖ at every accepted iterate


def _zero_tol(opts: PerturbOptions, x0: StatePoint) -> float:
    return opts.zero_tol * (1.0 + x0.norm2)


def _full_q(model: SliceModel, y: StatePoint) -> np.ndarray:
    sigma = infinitesimal_action(model.outer_action, model.embed(y))
    return model.form_scale * (sigma.T @ sigma)


def perturb_to_zero(
    model: SliceModel,
    x0: StatePoint,
    delta: float,
    opts: PerturbOptions | None = None,
) -> ZeroCertificate:
    """Find y = e^{iη}x₀ with μ(y) = 0 and ‖η‖ ≤ λ‖μ(x₀)‖, or refuse."""
    opts = opts or PerturbOptions()
    k = model.inner_action.dim
    mu0 = slice_moment(model, x0)
    zero_tol = _zero_tol(opts, x0)
    stab0 = stabilizer(model.outer_action, model.embed(x0), opts.rank_tol)

    if stab0.codim == 0:
        if mu0.norm > zero_tol:
            raise InternalConsistencyError(
                "Full stabilizer with μ(x₀) ≠ 0 contradicts μ(x) ⊥ 𝔨ₓ",
                mu_norm=mu0.norm,
            )
        _LOGGER.info("Perturbation: x₀ is fixed by the whole group, trivial certificate")
        return _certificate(x0, np.zeros(k), x0, 0.0, delta, mu0, mu0, zero_tol, opts, 0, ())

    along_kx = float(np.linalg.norm(stab0.component_in_kx(mu0.coeffs)))
    if along_kx > opts.orthogonality_tol * max(1.0, x0.norm2):
        raise OrthogonalityFailed(
            "μ(x₀) has a component along the stabilizer algebra",
            component=along_kx,
            tol=opts.orthogonality_tol,
        )

    estimate = estimate_lambda(
        model, x0, delta, opts.lambda_samples, opts.lambda_margin, opts.seed, opts.rank_tol
    )
    product = estimate.value * mu0.norm
    if product >= delta:
        _LOGGER.info(
            "Perturbation: refusing, λ‖μ(x₀)‖ = %.6g ≥ δ = %.6g", product, delta
        )
        raise HypothesisFailed(
            f"λ‖μ(x₀)‖ = {product:.6g} is not below δ = {delta:.6g}",
            lambda_used=estimate.value,
            mu_norm=mu0.norm,
            product=product,
            delta=delta,
        )

    complement = stab0.complement
    max_step = delta / NEWTON_DAMPING_FRACTION
    eta = np.zeros(k)
    y, mu = x0, mu0
    trace = [mu0.norm]
    iterations = 0
    while mu.norm > zero_tol:
        if iterations >= NEWTON_MAX_ITER:
            raise Stagnation(
                f"Perturbation: no zero after {iterations} Newton steps",
                mu_trace=trace,
            )
        reduced = complement @ _full_q(model, y) @ complement.T
        step = -complement.T @ linalg.solve(reduced, complement @ mu.coeffs, assume_a="pos")
        step_norm = float(np.linalg.norm(step))
        if step_norm > max_step:
            step *= max_step / step_norm

        for _ in range(NEWTON_MAX_HALVINGS):
            candidate_eta = eta + step
            if np.linalg.norm(candidate_eta) >= delta:
                raise LeftBall(
                    "Continuation path left the δ-ball; λ was underestimated",
                    eta_norm=float(np.linalg.norm(candidate_eta)),
                    delta=delta,
                    mu_trace=trace,
                )
            candidate = exp_action(model.inner_action, candidate_eta, 1.0, x0, Direction.IMAGINARY)
            try:
                candidate_mu = slice_moment(model, candidate)
            except OutsideBall as err:
                raise BallExitsModel(
                    "Continuation path left the model ball", mu_trace=trace
                ) from err
            if candidate_mu.norm < mu.norm:
                break
            step *= 0.5
        else:
            raise Stagnation(
                "Perturbation: backtracking found no decrease of ‖μ‖",
                mu_norm=mu.norm,
                mu_trace=trace,
            )

        eta, y, mu = candidate_eta, candidate, candidate_mu
        trace.append(mu.norm)
        iterations += 1
        _LOGGER.debug(
            "Perturbation: iteration %d, |mu| %.3e, |eta| %.6g",
            iterations,
            mu.norm,
            np.linalg.norm(eta),
        )

    eta_norm = float(np.linalg.norm(eta))
    bound = estimate.value * mu0.norm
    if eta_norm > bound * (1.0 + opts.certificate_slack):
        raise BoundViolated(
            f"‖η‖ = {eta_norm:.6g} exceeds λ‖μ(x₀)‖ = {bound:.6g}",
            eta_norm=eta_norm,
            bound=bound,
        )
    _LOGGER.info(
        "Perturbation: zero found after %d steps, |eta| %.6g <= %.6g", iterations, eta_norm, bound
    )
    return _certificate(
        x0, eta, y, estimate.value, delta, mu0, mu, zero_tol, opts, iterations, tuple(trace)
    )


def _certificate(
    x0: StatePoint,
    eta: np.ndarray,
    y: StatePoint,
    lam: float,
    delta: float,
    mu0: MomentValue,
    mu: MomentValue,
    zero_tol: float,
    opts: PerturbOptions,
    iterations: int,
    trace: tuple[float, ...],
) -> ZeroCertificate:
    return ZeroCertificate(
        x0=x0,
        eta=eta,
        y=y,
        lambda_used=lam,
        delta_used=delta,
        mu_norm_initial=mu0.norm,
        mu_norm_final=mu.norm,
        eta_norm=float(np.linalg.norm(eta)),
        zero_tol=zero_tol,
        lambda_samples=opts.lambda_samples,
        lambda_margin=opts.lambda_margin,
        seed=opts.seed,
        rank_tol=opts.rank_tol,
        iterations=iterations,
        mu_trace=trace,
    )


def check_certificate(
    cert: ZeroCertificate, model: SliceModel, recheck_tol: float = DEFAULT_RECHECK_TOL
) -> list[str]:
    """Re-derive every certificate claim from its raw fields; return the names of failed checks."""
    failures: list[str] = []
    scale = max(1.0, cert.x0.norm2)

    def close(a: float, b: float, tol: float) -> bool:
        return abs(a - b) <= tol

    if not cert.lambda_used * cert.mu_norm_initial < cert.delta_used:
        failures.append("hypothesis")
    eta_bound = cert.lambda_used * cert.mu_norm_initial * (1.0 + DEFAULT_CERTIFICATE_SLACK)
    if not cert.eta_norm <= eta_bound:
        failures.append("eta_bound")
    if not close(float(np.linalg.norm(cert.eta)), cert.eta_norm, recheck_tol):
        failures.append("eta_norm")
    # the recorded tolerance may be stricter than the default, never looser
    zero_tol_cap = DEFAULT_ZERO_TOL * (1.0 + cert.x0.norm2)
    if not 0.0 < cert.zero_tol <= zero_tol_cap * (1.0 + recheck_tol):
        failures.append("zero_tol")

    try:
        mu0 = slice_moment(model, cert.x0)
        recomputed_y = exp_action(model.inner_action, cert.eta, 1.0, cert.x0, Direction.IMAGINARY)
        mu_y = slice_moment(model, cert.y)
        stab0 = stabilizer(model.outer_action, model.embed(cert.x0), cert.rank_tol)
    except (MomentToolkitError, linalg.LinAlgError, ValueError) as err:
        _LOGGER.debug("Certificate check: evaluation failed: %s", err)
        return failures + ["evaluation"]

    if not close(mu0.norm, cert.mu_norm_initial, recheck_tol * scale):
        failures.append("mu_norm_initial")
    if float(np.linalg.norm(recomputed_y.coords - cert.y.coords)) > recheck_tol * max(
        1.0, cert.x0.norm
    ):
        failures.append("y")
    if not close(mu_y.norm, cert.mu_norm_final, recheck_tol * scale):
        failures.append("mu_norm_final")
    if not mu_y.norm < cert.zero_tol:
        failures.append("zero")
    leak = float(np.linalg.norm(stab0.component_in_kx(cert.eta)))
    if leak > recheck_tol * max(1.0, cert.eta_norm):
        failures.append("eta_orthogonality")

    if stab0.codim == 0:
        if cert.lambda_used != 0.0 or cert.eta_norm != 0.0:
            failures.append("lambda")
    else:
        try:
            lam = lambda_bound(
                model,
                cert.x0,
                cert.delta_used,
                cert.lambda_samples,
                cert.lambda_margin,
                cert.seed,
                cert.rank_tol,
            )
        except (MomentToolkitError, linalg.LinAlgError, ValueError) as err:
            _LOGGER.debug("Certificate check: λ reproduction failed: %s", err)
            failures.append("lambda")
        else:
            if not close(lam, cert.lambda_used, recheck_tol * max(1.0, abs(lam))):
                failures.append("lambda")

    if failures:
        _LOGGER.warning("Certificate check: failed %s", ", ".join(failures))
    return failures


# --- scaling ---


@dataclass(frozen=True)
class ScalingSample:
    t: float
    mu_norm: float | None
    lam: float | None
    product: float | None
    satisfied: bool
    note: str = ""


@dataclass(frozen=True, eq=False)
class ScalingReport:
    v: StatePoint
    balanced: StatePoint  # g·v with ν₁ = 0, the point that is actually scaled
    t_star: float
    certificate: ZeroCertificate
    samples: tuple[ScalingSample, ...]
    decay_slope: float


def scaling_search(
    model: SliceModel,
    v: StatePoint,
    delta: float,
    t_grid: Sequence[float],
    opts: PerturbOptions | None = None,
) -> ScalingReport:
    """Walk t down the grid until λ‖μ(tv)‖ < δ, then certify a zero near tv."""
    opts = opts or PerturbOptions()
    verdict = kempf_ness_flow(model.outer_action, model.linear_image(v), opts.flow)
    if not verdict.stability.is_polystable:
        raise PreconditionFailed(
            f"v is {verdict.stability} for the linearized action",
            stability=str(verdict.stability),
        )
    balanced = verdict.replay(model.inner_action, v)
    residual = hessian_moment(model, balanced).norm
    if residual > opts.flow.zero_tol * max(1.0, model.linear_image(balanced).norm2) * 10.0:
        raise InternalConsistencyError(
            "Replaying the flow did not balance v", nu1_norm=residual
        )

    grid = sorted((float(t) for t in t_grid), reverse=True)
    inside = [t for t in grid if balanced.norm * t <= model.ball_radius]
    slope = decay_slope(model, balanced, inside)
    samples: list[ScalingSample] = []
    for t in grid:
        x0 = balanced.scaled(t)
        if x0.norm > model.ball_radius:
            samples.append(ScalingSample(t, None, None, None, False, "outside model ball"))
            continue
        mu = slice_moment(model, x0)
        try:
            lam = lambda_bound(
                model, x0, delta, opts.lambda_samples, opts.lambda_margin, opts.seed, opts.rank_tol
            )
        except BallExitsModel:
            samples.append(ScalingSample(t, mu.norm, None, None, False, "δ-ball exits model"))
            continue
        except EmptyComplement:
            samples.append(ScalingSample(t, mu.norm, None, None, True, "fixed by the group"))
            certificate = perturb_to_zero(model, x0, delta, opts)
            _LOGGER.info("Perturbation: tv is a fixed point at t*=%.4g", t)
            return ScalingReport(v, balanced, t, certificate, tuple(samples), slope)
        product = lam * mu.norm
        satisfied = product < delta
        samples.append(ScalingSample(t, mu.norm, lam, product, satisfied))
        if not satisfied:
            _LOGGER.info(
                "Perturbation: hypothesis fails at t=%.4g (λ‖μ‖ = %.4g ≥ δ = %.4g)",
                t,
                product,
                delta,
            )
            continue
        certificate = perturb_to_zero(model, x0, delta, opts)
        _LOGGER.info("Perturbation: certified a zero at t*=%.4g", t)
        return ScalingReport(v, balanced, t, certificate, tuple(samples), slope)

    raise NeverSatisfied(
        "λ‖μ(tv)‖ < δ never held on the grid",
        samples=[
            {"t": s.t, "mu_norm": s.mu_norm, "lambda": s.lam, "product": s.product}
            for s in samples
        ],
        decay_slope=slope,
    )
