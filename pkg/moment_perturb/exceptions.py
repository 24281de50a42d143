"""Exception hierarchy. Every error carries an exit code and structured diagnostics."""

from __future__ import annotations

from typing import Any

from .const import EXIT_INCONSISTENT, EXIT_PARSE_ERROR, EXIT_REFUSAL


class MomentToolkitError(Exception):
    """Base class for all toolkit errors."""

    exit_code: int = EXIT_INCONSISTENT

    def __init__(self, message: str, **diagnostics: Any) -> None:
        super().__init__(message)
        self.diagnostics: dict[str, Any] = diagnostics

    @property
    def kind(self) -> str:
        return type(self).__name__


# --- algebra ---


class DimensionMismatch(MomentToolkitError):
    pass


class NonAntiHermitian(MomentToolkitError):
    pass


class RankDeficient(MomentToolkitError):
    pass


class InvalidAction(MomentToolkitError):
    """Generators not closed under commutator, or the representation is not a homomorphism."""


class EmptyComplement(MomentToolkitError):
    """The stabilizer is the whole algebra, so Q_x has nothing to act on."""


class IrrationalSpectrum(MomentToolkitError):
    pass


class NoLimit(MomentToolkitError):
    """lim_{λ→0} ρ(λ)·x does not exist."""


# --- moment ---


class OutsideBall(MomentToolkitError):
    pass


class NonEquivariantModel(MomentToolkitError):
    pass


# --- stability ---


class MaxIterExceeded(MomentToolkitError):
    pass


class OracleMismatch(MomentToolkitError):
    pass


# --- perturb ---


class HypothesisFailed(MomentToolkitError):
    """λ‖μ(x₀)‖ ≥ δ. An honest refusal, not a failure."""

    exit_code = EXIT_REFUSAL


class PreconditionFailed(MomentToolkitError):
    exit_code = EXIT_REFUSAL


class NeverSatisfied(MomentToolkitError):
    exit_code = EXIT_REFUSAL


class OrthogonalityFailed(MomentToolkitError):
    pass


class LeftBall(MomentToolkitError):
    pass


class BallExitsModel(MomentToolkitError):
    pass


class Stagnation(MomentToolkitError):
    pass


class BoundViolated(MomentToolkitError):
    pass


class InternalConsistencyError(MomentToolkitError):
    pass


# --- cli ---


class SpecParseError(MomentToolkitError):
    exit_code = EXIT_PARSE_ERROR


class SchemaMismatch(MomentToolkitError):
    exit_code = EXIT_PARSE_ERROR
