"""Bundled actions and slice models with known closed-form behavior."""

from __future__ import annotations

import math
from collections.abc import Callable

import numpy as np

from .algebra import GroupAction, OneParameterSubgroup, StatePoint
from .moment import SliceModel
from .polynomial import PolynomialMap, Term

DEFAULT_EPSILON = 0.5
MODEL_BALL_RADIUS = 10.0

PAULI = np.array(
    [
        [[0, 1], [1, 0]],
        [[0, -1j], [1j, 0]],
        [[1, 0], [0, -1]],
    ],
    dtype=complex,
)


def pair_action() -> GroupAction:
    """U(1) on C² with weights (1, −1)."""
    return GroupAction.from_weights([[1, -1]])


def triple_action() -> GroupAction:
    """U(1) on C³ with weights (1, −1, 0)."""
    return GroupAction.from_weights([[1, -1, 0]])


def su2_generators() -> np.ndarray:
    return 1j * PAULI


def su2_defining_action() -> GroupAction:
    gens = su2_generators()
    return GroupAction.from_matrices(gens, gens)


def _symmetric_square_isometry() -> np.ndarray:
    """C³ → C²⊗C² onto symmetric tensors, columns e₁⊗e₁, (e₁⊗e₂+e₂⊗e₁)/√2, e₂⊗e₂."""
    iso = np.zeros((4, 3), dtype=complex)
    iso[0, 0] = 1.0
    iso[1, 1] = iso[2, 1] = 1.0 / math.sqrt(2.0)
    iso[3, 2] = 1.0
    return iso


def symmetric_square(a: np.ndarray) -> np.ndarray:
    """The induced action of a 2×2 matrix on Sym²(C²) in the orthonormal monomial basis."""
    iso = _symmetric_square_isometry()
    eye = np.eye(2)
    return iso.conj().T @ (np.kron(a, eye) + np.kron(eye, a)) @ iso


def _block_diag(*blocks: np.ndarray) -> np.ndarray:
    size = sum(b.shape[0] for b in blocks)
    out = np.zeros((size, size), dtype=complex)
    offset = 0
    for block in blocks:
        n = block.shape[0]
        out[offset : offset + n, offset : offset + n] = block
        offset += n
    return out


def identity_pair_model() -> SliceModel:
    return SliceModel.identity(pair_action(), MODEL_BALL_RADIUS, "identity-pair")


def identity_triple_model() -> SliceModel:
    return SliceModel.identity(triple_action(), MODEL_BALL_RADIUS, "identity-triple")


def quadratic_torus_model(epsilon: complex = DEFAULT_EPSILON) -> SliceModel:
    """Φ(z₁, z₂) = (z₁, z₂, εz₁²) into C³ with weights (1, −1, 2)."""
    inner = pair_action()
    outer = GroupAction.from_weights([[1, -1, 2]], like=inner)
    terms = [
        [Term(1.0, (1, 0))],
        [Term(1.0, (0, 1))],
        [Term(1.0, (2, 0), "epsilon")],
    ]
    params = {"epsilon": complex(epsilon)}
    phi = PolynomialMap.from_terms(2, terms, params)
    return SliceModel(inner, outer, phi, MODEL_BALL_RADIUS, "quadratic-torus", params)


def su2_pair_model(epsilon: complex = DEFAULT_EPSILON) -> SliceModel:
    """SU(2) on C²⊕C², embedded in C²⊕C²⊕Sym²(C²) by (z, w) ↦ (z, w, ε·z⊗z)."""
    gens = su2_generators()
    inner = GroupAction.from_matrices(gens, [_block_diag(g, g) for g in gens])
    outer = GroupAction.from_matrices(
        gens, [_block_diag(g, g, symmetric_square(g)) for g in gens]
    )
    root2 = math.sqrt(2.0)
    terms = [[Term(1.0, tuple(int(i == j) for i in range(4)))] for j in range(4)]
    terms += [
        [Term(1.0, (2, 0, 0, 0), "epsilon")],
        [Term(root2, (1, 1, 0, 0), "epsilon")],
        [Term(1.0, (0, 2, 0, 0), "epsilon")],
    ]
    params = {"epsilon": complex(epsilon)}
    phi = PolynomialMap.from_terms(4, terms, params)
    return SliceModel(inner, outer, phi, MODEL_BALL_RADIUS, "su2-pair", params)


BUNDLED_MODELS: dict[str, Callable[[], SliceModel]] = {
    "identity-pair": identity_pair_model,
    "identity-triple": identity_triple_model,
    "quadratic-torus": quadratic_torus_model,
    "su2-pair": su2_pair_model,
}

# Vectors with ν₁(v) = 0 for the linear part of each bundled model
BALANCED_VECTORS: dict[str, list[StatePoint]] = {
    "identity-pair": [StatePoint([1.0, 1.0]), StatePoint([2.0, 2.0j])],
    "identity-triple": [StatePoint([1.0, 1.0, 0.5]), StatePoint([0.0, 0.0, 1.0])],
    "quadratic-torus": [StatePoint([1.0, 1.0]), StatePoint([1.0j, 1.0])],
    "su2-pair": [StatePoint([1.0, 0.0, 0.0, 1.0]), StatePoint([0.0, 1.0, -1.0, 0.0])],
}


def destabilizing_degeneration() -> tuple[GroupAction, OneParameterSubgroup, StatePoint]:
    """Weights (1, −1, 0), ξ = (1), v = (1, 0, 1): a non-product degeneration with zero weight."""
    return triple_action(), OneParameterSubgroup((1,)), StatePoint([1.0, 0.0, 1.0])
