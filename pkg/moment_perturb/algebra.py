"""Compact Lie algebras, their complexified linear actions, stabilizers and Q_x.

Conventions used throughout the package:
  - the Hermitian product ⟨u, w⟩ is conjugate-linear in the first slot (np.vdot);
  - the algebra carries the negative trace form −tr(AB), and every algebra element
    is a real coefficient vector in a trace-orthonormal basis;
  - C^N is identified with R^{2N} by stacking real parts over imaginary parts.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from enum import StrEnum
from fractions import Fraction
from functools import cached_property
from itertools import combinations
from typing import NamedTuple

import numpy as np
from scipy import linalg, optimize

from .const import (
    ANTI_HERMITIAN_TOL,
    CLOSURE_TOL,
    CONDITIONING_FACTOR,
    DEFAULT_ORBIT_RADIUS,
    DEFAULT_RANK_TOL,
    DEFAULT_SPECTRUM_TOL,
    DEPENDENCE_TOL,
    GENERATOR_CHECK_TOL,
    MAX_DENOMINATOR,
    SUPPORT_TOL,
)
from .exceptions import (
    DimensionMismatch,
    EmptyComplement,
    InvalidAction,
    IrrationalSpectrum,
    NonAntiHermitian,
    RankDeficient,
)
from .representation import MatrixRep, Representation, TorusWeights

_LOGGER = logging.getLogger(__name__)


class Direction(StrEnum):
    REAL = "real"
    IMAGINARY = "imaginary"


def realify(z: np.ndarray) -> np.ndarray:
    """C^N → R^{2N}, real parts first."""
    z = np.asarray(z, dtype=complex)
    return np.concatenate([z.real, z.imag], axis=0)


def complexify(r: np.ndarray) -> np.ndarray:
    """Inverse of realify."""
    r = np.asarray(r, dtype=float)
    n = r.shape[0] // 2
    return r[:n] + 1j * r[n:]


def _anti_hermitian_defect(mats: np.ndarray) -> float:
    if mats.shape[0] == 0:
        return 0.0
    return float(max(np.linalg.norm(m + m.conj().T) for m in mats))


def _commutator(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return a @ b - b @ a


# --- Lie algebra basis ---


@dataclass(frozen=True, eq=False)
class LieAlgebraBasis:
    """Trace-orthonormal basis of a compact Lie algebra of n×n matrices.

    `transform` is the change of basis from the generators handed to
    orthonormalize: generators[i] = Σ_j transform[i, j]·raw[j].
    """

    generators: np.ndarray
    transform: np.ndarray
    closure_residual: float

    @property
    def dim(self) -> int:
        return self.generators.shape[0]

    def element(self, coeffs: np.ndarray) -> np.ndarray:
        return np.tensordot(np.asarray(coeffs, dtype=float), self.generators, axes=1)

    def coordinates(self, matrix: np.ndarray) -> np.ndarray:
        """Orthonormal coordinates −tr(G_j·M) of an element of the span."""
        return -np.einsum("jab,ba->j", self.generators, np.asarray(matrix)).real


def orthonormalize(generators: np.ndarray) -> LieAlgebraBasis:
    """Gram-Schmidt in the order given, with respect to −tr(AB)."""
    raw = np.asarray(generators, dtype=complex)
    if raw.ndim != 3 or raw.shape[1] != raw.shape[2]:
        raise DimensionMismatch(
            f"Generators must have shape (k, n, n), got {raw.shape}", shape=list(raw.shape)
        )
    if raw.shape[0] == 0:
        raise RankDeficient("No generators given", rank=0)

    defect = _anti_hermitian_defect(raw)
    if defect > ANTI_HERMITIAN_TOL:
        raise NonAntiHermitian(
            f"Generator fails G† = −G by {defect:.3e}", defect=defect, tol=ANTI_HERMITIAN_TOL
        )
    raw = 0.5 * (raw - np.conj(np.transpose(raw, (0, 2, 1))))

    gram = -np.einsum("iab,jba->ij", raw, raw).real
    eigenvalues = linalg.eigvalsh(gram)
    if eigenvalues[-1] <= 0 or eigenvalues[0] <= DEPENDENCE_TOL * eigenvalues[-1]:
        raise RankDeficient(
            "Generators are real-linearly dependent",
            gram_eigenvalues=eigenvalues.tolist(),
        )

    # gram = L·Lᵀ; the rows of L⁻¹ applied to raw are exactly Gram-Schmidt in order
    cholesky = linalg.cholesky(gram, lower=True)
    transform = linalg.solve_triangular(cholesky, np.eye(gram.shape[0]), lower=True)
    basis_generators = np.tensordot(transform, raw, axes=1)
    residual = _closure_residual(basis_generators)
    basis_generators.setflags(write=False)
    transform.setflags(write=False)
    _LOGGER.debug(
        "Algebra: orthonormalized %d generators, closure residual %.3e",
        gram.shape[0],
        residual,
    )
    return LieAlgebraBasis(basis_generators, transform, residual)


def _closure_residual(gens: np.ndarray) -> float:
    residual = 0.0
    for i, j in combinations(range(gens.shape[0]), 2):
        bracket = _commutator(gens[i], gens[j])
        coords = -np.einsum("lab,ba->l", gens, bracket).real
        leftover = bracket - np.tensordot(coords, gens, axes=1)
        residual = max(residual, float(np.linalg.norm(leftover)))
    return residual


def structure_constants(basis: LieAlgebraBasis) -> np.ndarray:
    """c[i, j, l] with [G_i, G_j] = Σ_l c[i, j, l]·G_l."""
    k = basis.dim
    constants = np.zeros((k, k, k))
    for i, j in combinations(range(k), 2):
        coords = basis.coordinates(_commutator(basis.generators[i], basis.generators[j]))
        constants[i, j] = coords
        constants[j, i] = -coords
    return constants


# --- group actions ---


@dataclass(frozen=True, eq=False)
class GroupAction:
    """A compact algebra basis together with its linear representation on C^N."""

    basis: LieAlgebraBasis
    rep: Representation

    def __post_init__(self) -> None:
        if self.basis.dim != self.rep.rank:
            raise DimensionMismatch(
                f"Algebra has dimension {self.basis.dim}, representation has "
                f"{self.rep.rank} generators",
                algebra_dim=self.basis.dim,
                rep_rank=self.rep.rank,
            )
        if self.basis.closure_residual > CLOSURE_TOL:
            raise InvalidAction(
                "Generators are not closed under commutator",
                closure_residual=self.basis.closure_residual,
            )
        if isinstance(self.rep, TorusWeights):
            return
        mats = self.rep.matrices()
        scale = max(1.0, float(max(np.linalg.norm(m) for m in mats)))
        defect = _anti_hermitian_defect(mats)
        if defect > GENERATOR_CHECK_TOL * scale:
            raise NonAntiHermitian(
                f"Representation matrix fails A† = −A by {defect:.3e}", defect=defect
            )
        residual = self.homomorphism_residual
        if residual > CLOSURE_TOL * scale**2:
            raise InvalidAction(
                "Representation is not a Lie algebra homomorphism",
                homomorphism_residual=residual,
            )

    @property
    def dim(self) -> int:
        return self.basis.dim

    @property
    def ambient_dim(self) -> int:
        return self.rep.ambient_dim

    @property
    def is_torus(self) -> bool:
        return isinstance(self.rep, TorusWeights)

    @cached_property
    def homomorphism_residual(self) -> float:
        constants = structure_constants(self.basis)
        mats = self.rep.matrices()
        residual = 0.0
        for i, j in combinations(range(self.dim), 2):
            leftover = _commutator(mats[i], mats[j]) - np.tensordot(
                constants[i, j], mats, axes=1
            )
            residual = max(residual, float(np.linalg.norm(leftover)))
        return residual

    @cached_property
    def trivial_dim(self) -> int:
        """Dimension of the subalgebra acting trivially on C^N."""
        flat = self.rep.matrices().reshape(self.dim, -1).T
        singular = linalg.svdvals(realify(flat))
        padded = np.zeros(self.dim)
        padded[: singular.shape[0]] = singular
        return int(np.sum(padded <= DEFAULT_RANK_TOL * max(1.0, padded.max(initial=0.0))))

    @classmethod
    def from_weights(cls, weights: np.ndarray, like: GroupAction | None = None) -> GroupAction:
        """Torus action with integer weight matrix (rows = lattice generators).

        With `like`, the algebra basis and lattice transform of another torus
        action of the same torus are reused, so both actions share coordinates.
        """
        lattice = np.atleast_2d(np.asarray(weights))
        if lattice.ndim != 2 or lattice.size == 0:
            raise DimensionMismatch("Weights must form a non-empty k×N matrix")
        if not np.all(np.equal(np.mod(lattice, 1), 0)):
            raise DimensionMismatch("Torus weights must be integers", weights=lattice.tolist())
        lattice = lattice.astype(np.int64)

        if like is None:
            basis = _torus_basis(lattice)
            transform = basis.transform
        else:
            if not like.is_torus or like.dim != lattice.shape[0]:
                raise DimensionMismatch(
                    "Shared torus basis needs a torus action of the same rank",
                    rank=lattice.shape[0],
                    like_rank=like.dim,
                )
            basis = like.basis
            transform = like.rep.transform
        return cls(basis, TorusWeights(lattice, transform))

    @classmethod
    def from_matrices(cls, generators: np.ndarray, rep_matrices: np.ndarray) -> GroupAction:
        """Matrix action: algebra generators and their images, in matching order."""
        basis = orthonormalize(generators)
        raw = np.asarray(rep_matrices, dtype=complex)
        if raw.ndim != 3 or raw.shape[0] != basis.dim or raw.shape[1] != raw.shape[2]:
            raise DimensionMismatch(
                f"Expected {basis.dim} square representation matrices, got shape {raw.shape}",
                shape=list(raw.shape),
            )
        return cls(basis, MatrixRep(np.tensordot(basis.transform, raw, axes=1)))


def _torus_basis(lattice: np.ndarray) -> LieAlgebraBasis:
    """Orthonormal basis of the torus algebra R^k for the weight matrix `lattice`.

    The metric is the trace form Σ_c w_c w_cᵀ of the diagonal generators. When
    the rows are dependent the torus acts with a kernel; there the trace form
    degenerates and is completed by the standard metric on its null space.
    """
    k, n = lattice.shape
    weights = lattice.astype(float)
    gram = weights @ weights.T
    eigenvalues, vectors = linalg.eigh(gram)
    cutoff = DEPENDENCE_TOL * max(1.0, float(eigenvalues[-1]))
    null = vectors[:, eigenvalues <= cutoff]
    if null.shape[1]:
        _LOGGER.debug("Algebra: torus acts with a %d-dimensional kernel", null.shape[1])
        gram = gram + null @ null.T
    cholesky = linalg.cholesky(gram, lower=True)
    transform = linalg.solve_triangular(cholesky, np.eye(k), lower=True)
    generators = np.zeros((k, n, n), dtype=complex)
    idx = np.arange(n)
    generators[:, idx, idx] = 1j * (transform @ weights)
    generators.setflags(write=False)
    transform.setflags(write=False)
    return LieAlgebraBasis(generators, transform, 0.0)


def algebra_element(action: GroupAction, coeffs: np.ndarray) -> np.ndarray:
    """The N×N matrix A_ξ."""
    return action.rep.element(coeffs)


# --- points ---


@dataclass(frozen=True, eq=False)
class StatePoint:
    """A vector of C^N with its squared Hermitian norm."""

    coords: np.ndarray
    norm2: float = field(init=False)

    def __post_init__(self) -> None:
        arr = np.array(self.coords, dtype=complex)
        if arr.ndim != 1:
            raise DimensionMismatch(f"Point must be a vector, got shape {arr.shape}")
        arr.setflags(write=False)
        object.__setattr__(self, "coords", arr)
        object.__setattr__(self, "norm2", float(np.vdot(arr, arr).real))

    @property
    def dim(self) -> int:
        return self.coords.shape[0]

    @property
    def norm(self) -> float:
        return math.sqrt(self.norm2)

    def scaled(self, t: float) -> StatePoint:
        return StatePoint(t * self.coords)

    def support(self) -> np.ndarray:
        """Boolean mask of coordinates that are numerically nonzero."""
        return np.abs(self.coords) > SUPPORT_TOL * self.norm


def _check_point(action: GroupAction, x: StatePoint) -> None:
    if x.dim != action.ambient_dim:
        raise DimensionMismatch(
            f"Point has dimension {x.dim}, action acts on C^{action.ambient_dim}",
            point_dim=x.dim,
            ambient_dim=action.ambient_dim,
        )


def infinitesimal_action(action: GroupAction, x: StatePoint) -> np.ndarray:
    """σ_x as a real (2N × k) matrix: column j is realify(A_j x)."""
    _check_point(action, x)
    return realify(action.rep.columns(x.coords))


def exp_action(
    action: GroupAction,
    xi: np.ndarray,
    s: float,
    x: StatePoint,
    direction: Direction = Direction.IMAGINARY,
) -> StatePoint:
    """exp(s·A_ξ)·x (real, an isometry) or exp(s·iA_ξ)·x (imaginary)."""
    _check_point(action, x)
    xi = np.asarray(xi, dtype=float)
    z = s * xi if direction == Direction.REAL else 1j * s * xi
    return StatePoint(action.rep.exp_apply(z, x.coords))


# --- stabilizers ---


@dataclass(frozen=True, eq=False)
class StabilizerData:
    point: StatePoint
    basis_of_kx: np.ndarray  # (dim, k) orthonormal rows spanning 𝔨ₓ
    complement: np.ndarray  # (k - dim, k) orthonormal rows spanning 𝔨ₓ^⊥
    singular_values: np.ndarray  # singular values of σ_x, padded to length k
    threshold: float
    sigma_min_perp: float | None  # None when 𝔨ₓ^⊥ is empty

    @property
    def dim(self) -> int:
        return self.basis_of_kx.shape[0]

    @property
    def codim(self) -> int:
        return self.complement.shape[0]

    def component_in_kx(self, coeffs: np.ndarray) -> np.ndarray:
        """Coordinates of the orthogonal projection onto 𝔨ₓ, in its basis."""
        return self.basis_of_kx @ np.asarray(coeffs, dtype=float)

    def project_perp(self, coeffs: np.ndarray) -> np.ndarray:
        coeffs = np.asarray(coeffs, dtype=float)
        return coeffs - self.basis_of_kx.T @ (self.basis_of_kx @ coeffs)


def stabilizer(
    action: GroupAction, x: StatePoint, rank_tol: float = DEFAULT_RANK_TOL
) -> StabilizerData:
    """Numerical kernel of σ_x with threshold rank_tol·max(‖x‖, 1)."""
    sigma = infinitesimal_action(action, x)
    k = action.dim
    _, singular, vt = linalg.svd(sigma, full_matrices=True)
    padded = np.zeros(k)
    padded[: singular.shape[0]] = singular
    threshold = rank_tol * max(x.norm, 1.0)

    in_kernel = padded <= threshold
    borderline = (padded > threshold / CONDITIONING_FACTOR) & (
        padded < threshold * CONDITIONING_FACTOR
    )
    if np.any(borderline):
        _LOGGER.warning(
            "Stabilizer: singular values %s within a factor %g of the rank threshold %.3e",
            padded[borderline].tolist(),
            CONDITIONING_FACTOR,
            threshold,
        )

    perp = padded[~in_kernel]
    return StabilizerData(
        point=x,
        basis_of_kx=vt[in_kernel],
        complement=vt[~in_kernel],
        singular_values=padded,
        threshold=threshold,
        sigma_min_perp=float(perp.min()) if perp.size else None,
    )


@dataclass(frozen=True, eq=False)
class QOperator:
    """Q_x = σ_x*σ_x restricted to 𝔨ₓ^⊥, in the coordinates of `stabilizer.complement`."""

    matrix: np.ndarray
    lam: float  # Λ_x = ‖Q_x⁻¹‖
    stabilizer: StabilizerData

    @property
    def eigenvalues(self) -> np.ndarray:
        return linalg.eigvalsh(self.matrix)

    def solve(self, coeffs: np.ndarray) -> np.ndarray:
        """Q_x⁻¹ applied to the 𝔨ₓ^⊥ part of an algebra element, as a full k-vector."""
        basis = self.stabilizer.complement
        reduced = linalg.solve(self.matrix, basis @ np.asarray(coeffs, dtype=float), assume_a="pos")
        return basis.T @ reduced


def q_operator(
    action: GroupAction, x: StatePoint, rank_tol: float = DEFAULT_RANK_TOL
) -> QOperator:
    stab = stabilizer(action, x, rank_tol)
    if stab.codim == 0:
        raise EmptyComplement(
            "Stabilizer is the whole algebra; Q_x has no domain", stabilizer_dim=stab.dim
        )
    reduced = infinitesimal_action(action, x) @ stab.complement.T
    matrix = reduced.T @ reduced
    lam = 1.0 / float(linalg.eigvalsh(matrix)[0])
    return QOperator(matrix=matrix, lam=lam, stabilizer=stab)


# --- one-parameter subgroups ---


@dataclass(frozen=True)
class OneParameterSubgroup:
    """ρ: C* → K^c generated by a rational algebra element.

    With `lattice=True` (torus actions) ξ is an integer vector in the
    coordinates of the weight-matrix rows; otherwise ξ is given in the
    orthonormal algebra basis.
    """

    xi: tuple[Fraction, ...]
    lattice: bool = True

    def __post_init__(self) -> None:
        values = tuple(Fraction(q) for q in self.xi)
        if self.lattice and any(q.denominator != 1 for q in values):
            raise ValueError(f"Lattice one-parameter subgroup must be integral: {values}")
        object.__setattr__(self, "xi", values)

    @classmethod
    def trivial(cls, k: int, lattice: bool = True) -> OneParameterSubgroup:
        return cls(tuple(Fraction(0) for _ in range(k)), lattice)

    @classmethod
    def from_direction(
        cls,
        direction: np.ndarray,
        lattice: bool = True,
        max_denominator: int = MAX_DENOMINATOR,
    ) -> OneParameterSubgroup | None:
        """Nearest primitive integer direction, via continued-fraction rounding.

        Returns None for a zero direction.
        """
        direction = np.asarray(direction, dtype=float)
        scale = float(np.max(np.abs(direction), initial=0.0))
        if scale == 0.0 or not math.isfinite(scale):
            return None
        rounded = [Fraction(float(c) / scale).limit_denominator(max_denominator) for c in direction]
        return cls(_primitive(rounded), lattice)

    @property
    def is_trivial(self) -> bool:
        return all(q == 0 for q in self.xi)

    def as_array(self) -> np.ndarray:
        return np.array([float(q) for q in self.xi])

    def inverse(self) -> OneParameterSubgroup:
        return OneParameterSubgroup(tuple(-q for q in self.xi), self.lattice)

    def primitive(self) -> OneParameterSubgroup:
        if self.is_trivial:
            return self
        return OneParameterSubgroup(_primitive(list(self.xi)), self.lattice)

    def coefficients(self, action: GroupAction) -> np.ndarray:
        """ξ in the orthonormal algebra basis."""
        if len(self.xi) != action.dim:
            raise DimensionMismatch(
                f"One-parameter subgroup has {len(self.xi)} entries, algebra dimension is "
                f"{action.dim}"
            )
        if not self.lattice:
            return self.as_array()
        if not action.is_torus:
            raise DimensionMismatch("Lattice one-parameter subgroups need a torus action")
        # A_η = i·diag(ηᵀT W) must equal i·diag(ξᵀW), so Tᵀη = ξ
        return linalg.solve(action.rep.transform.T, self.as_array())

    def to_strings(self) -> list[str]:
        return [f"{q.numerator}/{q.denominator}" for q in self.xi]


def _primitive(values: list[Fraction]) -> tuple[Fraction, ...]:
    common = math.lcm(*(q.denominator for q in values))
    integers = [int(q * common) for q in values]
    divisor = math.gcd(*integers) or 1
    return tuple(Fraction(n // divisor) for n in integers)


def lattice_from_coefficients(action: GroupAction, coeffs: np.ndarray) -> np.ndarray:
    """Orthonormal algebra coordinates → torus lattice coordinates (ξ = Tᵀη)."""
    return action.rep.transform.T @ np.asarray(coeffs, dtype=float)


class LimitResult(NamedTuple):
    exists: bool
    limit: StatePoint | None


def _rational_signs(eigenvalues: np.ndarray, spectrum_tol: float) -> np.ndarray:
    scale = float(np.max(np.abs(eigenvalues), initial=0.0))
    if scale == 0.0:
        return np.zeros(eigenvalues.shape, dtype=int)
    signs = np.zeros(eigenvalues.shape, dtype=int)
    for idx, value in enumerate(eigenvalues):
        ratio = float(value) / scale
        nearest = Fraction(ratio).limit_denominator(MAX_DENOMINATOR)
        if abs(ratio - float(nearest)) > spectrum_tol:
            raise IrrationalSpectrum(
                "Generator spectrum is not recognizably rational",
                eigenvalues=eigenvalues.tolist(),
                offending_ratio=ratio,
            )
        signs[idx] = (nearest > 0) - (nearest < 0)
    return signs


def ops_limit(
    action: GroupAction,
    rho: OneParameterSubgroup,
    x: StatePoint,
    spectrum_tol: float = DEFAULT_SPECTRUM_TOL,
) -> LimitResult:
    """lim_{λ→0} ρ(λ)·x.

    An eigencomponent of H = −iA_ξ with eigenvalue m scales by λ^m: m > 0 dies,
    m = 0 stays and a nonzero m < 0 component diverges.
    """
    _check_point(action, x)
    if rho.lattice and action.is_torus:
        pairings = action.rep.pairings(np.array([int(q) for q in rho.xi], dtype=np.int64))
        if np.any(x.support() & (pairings < 0)):
            return LimitResult(False, None)
        return LimitResult(True, StatePoint(np.where(pairings > 0, 0, x.coords)))

    hermitian = action.rep.hermitian(rho.coefficients(action))
    eigenvalues, vectors = linalg.eigh(hermitian)
    signs = _rational_signs(eigenvalues, spectrum_tol)
    components = vectors.conj().T @ x.coords
    active = np.abs(components) > SUPPORT_TOL * x.norm
    if np.any(active & (signs < 0)):
        return LimitResult(False, None)
    components = np.where(signs > 0, 0, components)
    return LimitResult(True, StatePoint(vectors @ components))


# --- orbits ---


def orbit_distance(
    action: GroupAction,
    v: StatePoint,
    target: StatePoint,
    radius: float = DEFAULT_ORBIT_RADIUS,
) -> float:
    """min ‖g·v − target‖/‖v‖ over g = exp(A_θ + iA_η), |θ_j|, |η_j| ≤ radius.

    The orbit of 0 is {0}; there the absolute distance ‖target‖ is returned.
    """
    _check_point(action, v)
    _check_point(action, target)
    if v.norm2 == 0.0:
        return target.norm
    k = action.dim

    def residual(params: np.ndarray) -> np.ndarray:
        z = params[:k] + 1j * params[k:]
        return realify(action.rep.exp_apply(z, v.coords) - target.coords) / v.norm

    result = optimize.least_squares(
        residual,
        np.zeros(2 * k),
        bounds=(-radius, radius),
        xtol=1e-15,
        ftol=1e-15,
        gtol=1e-15,
    )
    if not result.success:
        _LOGGER.warning("Orbit distance: solver stopped without converging: %s", result.message)
    return float(np.linalg.norm(result.fun))
