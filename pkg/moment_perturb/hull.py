"""Exact rational geometry of torus weight polytopes.

Everything here runs in sympy rationals: the Hilbert-Mumford test for a torus
reduces to where 0 sits relative to the convex hull of the active weights.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Iterable, Sequence
from dataclasses import dataclass
from enum import StrEnum
from itertools import combinations

import sympy as sp

_LOGGER = logging.getLogger(__name__)


class HullPosition(StrEnum):
    EMPTY = "empty"  # no active weights (the origin)
    INTERIOR_FULL = "interior_full"  # 0 in the relative interior, full rank
    INTERIOR = "interior"
    BOUNDARY = "boundary"
    OUTSIDE = "outside"


@dataclass(frozen=True)
class HullAnalysis:
    position: HullPosition
    face: tuple[int, ...]  # coordinates whose weights span the face containing 0
    functional: tuple[int, ...] | None  # primitive lattice vector, None when 0 is interior
    active_rank: int
    weight_rank: int


def primitive_integer(vector: Iterable[sp.Rational]) -> tuple[int, ...]:
    """Scale a nonzero rational vector to coprime integers."""
    entries = [sp.Rational(e) for e in vector]
    common = math.lcm(*(int(e.q) for e in entries))
    integers = [int(e * common) for e in entries]
    divisor = math.gcd(*integers) or 1
    return tuple(n // divisor for n in integers)


def positive_circuit_support(points: dict[int, sp.Matrix]) -> set[int]:
    """Indices carried by some dependency Σλ_a·a = 0 with every λ_a ≥ 0.

    Any such dependency decomposes into sign-consistent circuits, so the
    union of the supports of the positive circuits is the whole answer.
    """
    if not points:
        return set()
    dim = next(iter(points.values())).rows
    indices = sorted(points)
    found: set[int] = set()
    for size in range(1, min(len(indices), dim + 1) + 1):
        for subset in combinations(indices, size):
            if set(subset) <= found:
                continue
            null = sp.Matrix.hstack(*(points[i] for i in subset)).nullspace()
            if len(null) != 1:
                continue
            vec = null[0]
            if all(e > 0 for e in vec) or all(e < 0 for e in vec):
                found.update(subset)
    return found


def min_norm_point(points: Sequence[sp.Matrix], metric: sp.Matrix) -> sp.Matrix:
    """The point of conv(points) nearest 0 in the metric pᵀ·metric·p.

    Enumerates affinely independent subsets, solves the barycentric KKT system
    on each and returns the first candidate passing the global optimality test
    (a − p)ᵀ·metric·p ≥ 0 for every point a.
    """
    distinct: list[sp.Matrix] = []
    for p in points:
        if all(p != q for q in distinct):
            distinct.append(p)
    dim = distinct[0].rows
    for size in range(1, min(len(distinct), dim + 1) + 1):
        ones = sp.ones(size, 1)
        rhs = sp.Matrix([0] * size + [1])
        for subset in combinations(distinct, size):
            basis = sp.Matrix.hstack(*subset)
            gram = basis.T * metric * basis
            kkt = sp.Matrix.vstack(
                sp.Matrix.hstack(gram, ones), sp.Matrix.hstack(ones.T, sp.zeros(1, 1))
            )
            if kkt.det() == 0:
                continue
            solution = kkt.LUsolve(rhs)
            weights = solution[:size, 0]
            if any(w < 0 for w in weights):
                continue
            candidate = basis * weights
            if all(((a - candidate).T * metric * candidate)[0, 0] >= 0 for a in distinct):
                return candidate
    raise ArithmeticError("No minimum-norm point found; the metric is not positive definite")


def _lattice_metric(weights: sp.Matrix) -> sp.Matrix:
    """Inverse Gram matrix of the weight rows, the trace form read in lattice coordinates."""
    gram = weights * weights.T
    if gram.det() == 0:
        # a non-faithful torus has no trace metric on its lattice; fall back to the standard one
        return sp.eye(weights.rows)
    return gram.inv()


def analyze_weights(weights: Sequence[Sequence[int]], support: Iterable[int]) -> HullAnalysis:
    """Position of 0 relative to conv{w_c : c ∈ support}, with a destabilizing functional.

    `weights` is the k×N integer matrix whose column c is the weight of coordinate c.
    The functional ξ is a lattice vector with ⟨w_c, ξ⟩ = 0 on the face containing 0
    and > 0 on every other active weight.
    """
    matrix = sp.Matrix(weights)
    weight_rank = matrix.rank()
    active = sorted(set(support))
    if not active:
        return HullAnalysis(HullPosition.EMPTY, (), None, 0, weight_rank)

    columns = {c: matrix[:, c] for c in active}
    active_rank = sp.Matrix.hstack(*columns.values()).rank()
    face = positive_circuit_support(columns)

    if not face:
        metric = _lattice_metric(matrix)
        nearest = min_norm_point(list(columns.values()), metric)
        functional = primitive_integer(metric * nearest)
        _LOGGER.debug("Weight hull: 0 outside, functional %s", functional)
        return HullAnalysis(HullPosition.OUTSIDE, (), functional, active_rank, weight_rank)

    if face == set(active):
        position = (
            HullPosition.INTERIOR_FULL if active_rank == weight_rank else HullPosition.INTERIOR
        )
        return HullAnalysis(position, tuple(active), None, active_rank, weight_rank)

    span = sp.Matrix.hstack(*(columns[c] for c in sorted(face)))
    annihilator = sp.Matrix.hstack(*span.T.nullspace())
    quotient = [annihilator.T * columns[c] for c in active if c not in face]
    nearest = min_norm_point(quotient, sp.eye(annihilator.cols))
    functional = primitive_integer(annihilator * nearest)
    _LOGGER.debug(
        "Weight hull: 0 on the boundary, face %s, functional %s", sorted(face), functional
    )
    return HullAnalysis(
        HullPosition.BOUNDARY, tuple(sorted(face)), functional, active_rank, weight_rank
    )
