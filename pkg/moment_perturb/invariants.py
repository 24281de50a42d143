"""Futaki-type characters and test-configuration diagnostics for one-parameter degenerations."""

from __future__ import annotations

import logging
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from .algebra import (
    GroupAction,
    OneParameterSubgroup,
    StatePoint,
    ops_limit,
    orbit_distance,
    stabilizer,
)
from .const import (
    DEFAULT_ORBIT_RADIUS,
    DEFAULT_ORBIT_TOL,
    DEFAULT_RANK_TOL,
    DEFAULT_SPECTRUM_TOL,
)
from .exceptions import NoLimit
from .moment import SliceModel, linear_moment, slice_moment
from .stability import random_torus_instance

_LOGGER = logging.getLogger(__name__)


def futaki_character(
    model_or_action: SliceModel | GroupAction,
    x: StatePoint,
    rank_tol: float = DEFAULT_RANK_TOL,
) -> np.ndarray:
    """⟨μ(x), ξ_i⟩ over an orthonormal basis of 𝔨ₓ. Identically zero for a genuine moment map."""
    if isinstance(model_or_action, SliceModel):
        mu = slice_moment(model_or_action, x)
        stab = stabilizer(model_or_action.outer_action, model_or_action.embed(x), rank_tol)
    else:
        mu = linear_moment(model_or_action, x)
        stab = stabilizer(model_or_action, x, rank_tol)
    return stab.component_in_kx(mu.coeffs)


def _limit_or_raise(
    action: GroupAction,
    rho: OneParameterSubgroup,
    v: StatePoint,
    spectrum_tol: float = DEFAULT_SPECTRUM_TOL,
) -> StatePoint:
    exists, limit = ops_limit(action, rho, v, spectrum_tol)
    if not exists or limit is None:
        raise NoLimit(
            "lim ρ(λ)·v does not exist as λ → 0",
            rho=rho.to_strings(),
        )
    return limit


def degeneration_weight(
    action: GroupAction,
    rho: OneParameterSubgroup,
    v: StatePoint,
    spectrum_tol: float = DEFAULT_SPECTRUM_TOL,
) -> float:
    """⟨ν(v₀), ξ_ρ⟩ at the central fibre v₀ = lim ρ(λ)·v."""
    limit = _limit_or_raise(action, rho, v, spectrum_tol)
    return linear_moment(action, limit).pairing(rho.coefficients(action))


@dataclass(frozen=True, eq=False)
class DegenerationRecord:
    rho: OneParameterSubgroup
    start: StatePoint
    limit: StatePoint
    weight: float
    dim_jump: tuple[int, int]  # (dim 𝔨_start, dim 𝔨_limit)
    is_product: bool
    orbit_distance: float


def analyze_degeneration(
    action: GroupAction,
    rho: OneParameterSubgroup,
    v: StatePoint,
    orbit_tol: float = DEFAULT_ORBIT_TOL,
    orbit_radius: float = DEFAULT_ORBIT_RADIUS,
    rank_tol: float = DEFAULT_RANK_TOL,
    spectrum_tol: float = DEFAULT_SPECTRUM_TOL,
) -> DegenerationRecord:
    """Product configuration iff the stabilizer does not jump and the limit stays in the orbit."""
    limit = _limit_or_raise(action, rho, v, spectrum_tol)
    weight = linear_moment(action, limit).pairing(rho.coefficients(action))
    dims = (stabilizer(action, v, rank_tol).dim, stabilizer(action, limit, rank_tol).dim)
    distance = orbit_distance(action, v, limit, orbit_radius)
    is_product = dims[0] == dims[1] and distance < orbit_tol
    _LOGGER.debug(
        "Degeneration: rho %s, stabilizer %d -> %d, orbit distance %.3e, weight %.3e",
        rho.to_strings(),
        dims[0],
        dims[1],
        distance,
        weight,
    )
    return DegenerationRecord(
        rho=rho,
        start=v,
        limit=limit,
        weight=weight,
        dim_jump=dims,
        is_product=is_product,
        orbit_distance=distance,
    )


@dataclass(frozen=True, eq=False)
class SemicontinuityReport:
    records: tuple[DegenerationRecord, ...]
    violations: tuple[str, ...]

    @property
    def ok(self) -> bool:
        return not self.violations


def semicontinuity_scan(
    action: GroupAction,
    cases: Sequence[tuple[OneParameterSubgroup, StatePoint]],
    orbit_tol: float = DEFAULT_ORBIT_TOL,
    orbit_radius: float = DEFAULT_ORBIT_RADIUS,
    rank_tol: float = DEFAULT_RANK_TOL,
) -> SemicontinuityReport:
    """dim 𝔨_limit ≥ dim 𝔨_v always, strictly whenever the limit left the orbit."""
    records: list[DegenerationRecord] = []
    violations: list[str] = []
    for index, (rho, v) in enumerate(cases):
        try:
            record = analyze_degeneration(action, rho, v, orbit_tol, orbit_radius, rank_tol)
        except NoLimit:
            violations.append(f"case {index}: limit does not exist")
            continue
        records.append(record)
        start_dim, limit_dim = record.dim_jump
        if limit_dim < start_dim:
            violations.append(f"case {index}: stabilizer shrank {start_dim} -> {limit_dim}")
        elif record.orbit_distance >= orbit_tol and limit_dim == start_dim:
            violations.append(f"case {index}: limit left the orbit without a stabilizer jump")
    if violations:
        _LOGGER.warning("Semicontinuity scan: %d violations", len(violations))
    return SemicontinuityReport(tuple(records), tuple(violations))


def random_degeneration(
    rng: np.random.Generator, weight_bound: int = 5, rho_bound: int = 3
) -> tuple[GroupAction, OneParameterSubgroup, StatePoint]:
    """Random torus degeneration whose limit exists: coordinates that would diverge are cleared."""
    action, v = random_torus_instance(rng, weight_bound=weight_bound)
    while True:
        xi = rng.integers(-rho_bound, rho_bound + 1, size=action.dim)
        if np.any(xi):
            break
    rho = OneParameterSubgroup(tuple(int(c) for c in xi)).primitive()
    pairings = action.rep.pairings(np.array([int(q) for q in rho.xi]))
    return action, rho, StatePoint(np.where(pairings < 0, 0, v.coords))
