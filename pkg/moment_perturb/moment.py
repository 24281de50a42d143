"""Linear moment maps, slice models and their Taylor diagnostics.

Fixed convention: ⟨ν(v), ξ⟩ = ½·Im⟨A_ξ v, v⟩, Ω₀(u, w) = Im⟨u, w⟩.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field

import numpy as np

from .algebra import (
    Direction,
    GroupAction,
    StatePoint,
    exp_action,
    structure_constants,
)
from .const import (
    DEFAULT_BALL_RADIUS,
    EQUIVARIANCE_SAMPLES,
    EQUIVARIANCE_TOL,
    FINITE_DIFFERENCE_STEP,
    HESSIAN_CHECK_TOL,
)
from .exceptions import DimensionMismatch, NonEquivariantModel, OutsideBall
from .polynomial import PolynomialMap

_LOGGER = logging.getLogger(__name__)

_BALL_SLACK = 1e-12


@dataclass(frozen=True, eq=False)
class MomentValue:
    """An element of 𝔨 in orthonormal coordinates."""

    coeffs: np.ndarray

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.coeffs))

    def pairing(self, xi: np.ndarray) -> float:
        return float(np.dot(self.coeffs, np.asarray(xi, dtype=float)))


def symplectic_form(u: np.ndarray, w: np.ndarray) -> float:
    """Ω₀(u, w) = Im⟨u, w⟩."""
    return float(np.vdot(u, w).imag)


def linear_moment(action: GroupAction, v: StatePoint) -> MomentValue:
    columns = action.rep.columns(v.coords)
    return MomentValue(0.5 * (columns.conj().T @ v.coords).imag)


def moment_derivative(action: GroupAction, v: StatePoint, u: np.ndarray) -> MomentValue:
    """dν_v(u); component j is Im⟨A_j v, u⟩ = Ω₀(σ_v(ξ_j), u)."""
    columns = action.rep.columns(v.coords)
    return MomentValue((columns.conj().T @ np.asarray(u, dtype=complex)).imag)


@dataclass(frozen=True, eq=False)
class LinearMomentMap:
    action: GroupAction

    def __call__(self, v: StatePoint) -> MomentValue:
        return linear_moment(self.action, v)

    def derivative(self, v: StatePoint, u: np.ndarray) -> MomentValue:
        return moment_derivative(self.action, v, u)


# --- slice models ---


@dataclass(frozen=True, eq=False)
class SliceModel:
    """Equivariant polynomial embedding Φ of a ball of H into W.

    μ = form_scale·ν_W∘Φ and Ω = form_scale·Φ*Ω_W; form_scale is the free
    normalization of the outer symplectic form.
    """

    inner_action: GroupAction
    outer_action: GroupAction
    phi: PolynomialMap
    ball_radius: float = DEFAULT_BALL_RADIUS
    name: str = ""
    params: Mapping[str, complex] = field(default_factory=dict)
    form_scale: float = 1.0

    def __post_init__(self) -> None:
        if self.phi.n_in != self.inner_action.ambient_dim:
            raise DimensionMismatch(
                f"Φ takes C^{self.phi.n_in}, inner action acts on "
                f"C^{self.inner_action.ambient_dim}"
            )
        if self.phi.n_out != self.outer_action.ambient_dim:
            raise DimensionMismatch(
                f"Φ lands in C^{self.phi.n_out}, outer action acts on "
                f"C^{self.outer_action.ambient_dim}"
            )
        if self.inner_action.dim != self.outer_action.dim or not np.allclose(
            structure_constants(self.inner_action.basis),
            structure_constants(self.outer_action.basis),
            atol=EQUIVARIANCE_TOL,
        ):
            raise DimensionMismatch("Inner and outer actions must share one algebra basis")
        if not self.ball_radius > 0:
            raise DimensionMismatch(f"Ball radius must be positive, got {self.ball_radius}")
        if not self.form_scale > 0:
            raise DimensionMismatch(f"Form scale must be positive, got {self.form_scale}")

    @classmethod
    def identity(
        cls, action: GroupAction, ball_radius: float = DEFAULT_BALL_RADIUS, name: str = ""
    ) -> SliceModel:
        """Φ = inclusion, so μ = ν."""
        n = action.ambient_dim
        return cls(action, action, PolynomialMap.inclusion(n), ball_radius, name or "identity")

    def check_ball(self, x: StatePoint) -> None:
        if x.norm > self.ball_radius * (1.0 + _BALL_SLACK):
            raise OutsideBall(
                f"‖x‖ = {x.norm:.6g} exceeds the model ball radius {self.ball_radius:.6g}",
                norm=x.norm,
                ball_radius=self.ball_radius,
            )

    def embed(self, x: StatePoint) -> StatePoint:
        """Φ(x)."""
        self.check_ball(x)
        return StatePoint(self.phi.evaluate(x.coords))

    def linear_image(self, v: StatePoint) -> StatePoint:
        """dΦ₀v."""
        return StatePoint(self.phi.linear_part() @ v.coords)

    def validate(self, rng: np.random.Generator, samples: int = EQUIVARIANCE_SAMPLES) -> None:
        """Check equivariance, the base point and injectivity of dΦ₀."""
        base = StatePoint(self.phi.evaluate(np.zeros(self.phi.n_in, dtype=complex)))
        base_moment = linear_moment(self.outer_action, base).norm
        if base_moment > EQUIVARIANCE_TOL * max(1.0, base.norm2):
            raise NonEquivariantModel(
                "Φ(0) is not a zero of the outer moment map", base_moment=base_moment
            )

        linear = self.phi.linear_part()
        rank = int(np.linalg.matrix_rank(linear))
        if rank < self.phi.n_in:
            raise NonEquivariantModel("dΦ₀ is not injective", rank=rank, expected=self.phi.n_in)

        radius = min(self.ball_radius, 1.0)
        k = self.inner_action.dim
        for _ in range(samples):
            z = rng.standard_normal(self.phi.n_in) + 1j * rng.standard_normal(self.phi.n_in)
            x = StatePoint(z * radius * rng.uniform(0.1, 0.9) / np.linalg.norm(z))
            xi = rng.standard_normal(k)
            s = float(rng.uniform(-1.0, 1.0))
            moved = exp_action(self.inner_action, xi, s, x, Direction.REAL)
            lhs = self.phi.evaluate(moved.coords)
            rhs = exp_action(self.outer_action, xi, s, self.embed(x), Direction.REAL).coords
            defect = float(np.linalg.norm(lhs - rhs))
            if defect > EQUIVARIANCE_TOL * max(1.0, float(np.linalg.norm(rhs))):
                raise NonEquivariantModel(
                    "Φ(e^{sA}x) differs from e^{sA'}Φ(x)", defect=defect, model=self.name
                )
        _LOGGER.debug("Slice model %s: validated on %d samples", self.name, samples)


def slice_moment(model: SliceModel, x: StatePoint) -> MomentValue:
    """μ(x) = ν_W(Φ(x))."""
    value = linear_moment(model.outer_action, model.embed(x))
    return MomentValue(model.form_scale * value.coeffs)


def pulled_back_form(model: SliceModel, x: StatePoint, u: np.ndarray, w: np.ndarray) -> float:
    """Ω_x(u, w) = Ω_W(dΦ_x u, dΦ_x w)."""
    model.check_ball(x)
    jac = model.phi.jacobian(x.coords)
    return model.form_scale * symplectic_form(jac @ u, jac @ w)


def hessian_moment(model: SliceModel, v: StatePoint) -> MomentValue:
    """ν₁(v) = ν_W(dΦ₀v), the t² coefficient of μ(tv)."""
    value = linear_moment(model.outer_action, model.linear_image(v))
    return MomentValue(model.form_scale * value.coeffs)


def taylor_defect(model: SliceModel, v: StatePoint, t: float) -> float:
    """‖μ(tv) − t²·ν₁(v)‖."""
    mu = slice_moment(model, v.scaled(t))
    return float(np.linalg.norm(mu.coeffs - t * t * hessian_moment(model, v).coeffs))


def hessian_defect(model: SliceModel, v: StatePoint, h: float = FINITE_DIFFERENCE_STEP) -> float:
    """Relative gap between 2ν₁(v) and the second difference (μ(hv) − 2μ(0) + μ(−hv))/h²."""
    exact = 2.0 * hessian_moment(model, v).coeffs
    origin = slice_moment(model, v.scaled(0.0)).coeffs
    forward = slice_moment(model, v.scaled(h)).coeffs
    backward = slice_moment(model, v.scaled(-h)).coeffs
    numeric = (forward - 2.0 * origin + backward) / (h * h)
    defect = float(np.linalg.norm(numeric - exact)) / max(1.0, float(np.linalg.norm(exact)))
    if defect > HESSIAN_CHECK_TOL:
        _LOGGER.warning("Slice model %s: Hessian term off by %.3e", model.name, defect)
    return defect


def loglog_slope(ts: Sequence[float], values: Sequence[float]) -> float:
    """Least-squares slope of log(value) against log(t).

    Exactly vanishing values carry no decay rate and are dropped; when fewer
    than two remain the decay is faster than any power and inf is returned.
    """
    pairs = [(t, v) for t, v in zip(ts, values, strict=True) if v > 0.0]
    if len(pairs) < 2:
        return math.inf
    log_t = np.log([t for t, _ in pairs])
    log_v = np.log([v for _, v in pairs])
    slope, _ = np.polyfit(log_t, log_v, 1)
    return float(slope)


def decay_slope(model: SliceModel, v: StatePoint, ts: Sequence[float]) -> float:
    """Log-log slope of ‖μ(tv)‖ over the given scales."""
    return loglog_slope(ts, [slice_moment(model, v.scaled(t)).norm for t in ts])
