"""Abstract linear representation interface and its torus/dense implementations."""

from __future__ import annotations

from abc import ABC, abstractmethod

import numpy as np
from scipy import linalg


class Representation(ABC):
    """Linear action of an orthonormal algebra basis {ξ_1..ξ_k} on C^N.

    Every method takes algebra elements as real coefficient vectors in the
    orthonormal basis; complex coefficients parametrize the complexified group.
    """

    @property
    @abstractmethod
    def rank(self) -> int:
        """Number of basis elements k."""

    @property
    @abstractmethod
    def ambient_dim(self) -> int:
        """Dimension N of the representation space."""

    @abstractmethod
    def matrices(self) -> np.ndarray:
        """Anti-Hermitian matrices A_1..A_k as a (k, N, N) array."""

    @abstractmethod
    def columns(self, x: np.ndarray) -> np.ndarray:
        """The (N, k) complex matrix whose j-th column is A_j x."""

    @abstractmethod
    def exp_apply(self, z: np.ndarray, x: np.ndarray) -> np.ndarray:
        """exp(Σ z_j A_j)·x for complex coefficients z."""

    def apply(self, coeffs: np.ndarray, x: np.ndarray) -> np.ndarray:
        """A_ξ x."""
        return self.columns(x) @ np.asarray(coeffs, dtype=float)

    def element(self, coeffs: np.ndarray) -> np.ndarray:
        """The matrix A_ξ."""
        return np.tensordot(np.asarray(coeffs, dtype=float), self.matrices(), axes=1)

    def hermitian(self, coeffs: np.ndarray) -> np.ndarray:
        """H = −iA_ξ, whose spectrum gives the weights of the 1-PS generated by ξ."""
        return -1j * self.element(coeffs)


class TorusWeights(Representation):
    """Diagonal action A_j = i·diag(r_j), r_j the weights in the orthonormal basis.

    `lattice` keeps the integer weights (rows = lattice generators of the torus)
    and `transform` the change of basis T with r = T·lattice.
    """

    def __init__(self, lattice: np.ndarray, transform: np.ndarray) -> None:
        self._lattice = np.array(lattice, dtype=np.int64)
        self._transform = np.array(transform, dtype=float)
        self._weights = self._transform @ self._lattice.astype(float)
        for arr in (self._lattice, self._transform, self._weights):
            arr.setflags(write=False)

    @property
    def rank(self) -> int:
        return self._weights.shape[0]

    @property
    def ambient_dim(self) -> int:
        return self._weights.shape[1]

    @property
    def lattice(self) -> np.ndarray:
        return self._lattice

    @property
    def transform(self) -> np.ndarray:
        return self._transform

    @property
    def weights(self) -> np.ndarray:
        return self._weights

    def matrices(self) -> np.ndarray:
        k, n = self._weights.shape
        mats = np.zeros((k, n, n), dtype=complex)
        idx = np.arange(n)
        mats[:, idx, idx] = 1j * self._weights
        return mats

    def columns(self, x: np.ndarray) -> np.ndarray:
        return 1j * self._weights.T * np.asarray(x, dtype=complex)[:, None]

    def apply(self, coeffs: np.ndarray, x: np.ndarray) -> np.ndarray:
        m = np.asarray(coeffs, dtype=float) @ self._weights
        return 1j * m * np.asarray(x, dtype=complex)

    def exp_apply(self, z: np.ndarray, x: np.ndarray) -> np.ndarray:
        exponent = 1j * (np.asarray(z, dtype=complex) @ self._weights)
        return np.exp(exponent) * np.asarray(x, dtype=complex)

    def pairings(self, lattice_xi: np.ndarray) -> np.ndarray:
        """Integer pairings ⟨w_c, ξ⟩ of every coordinate weight with a lattice vector."""
        return np.asarray(lattice_xi) @ self._lattice


class MatrixRep(Representation):
    """Dense representation given by explicit anti-Hermitian matrices."""

    def __init__(self, matrices: np.ndarray) -> None:
        self._matrices = np.array(matrices, dtype=complex)
        if self._matrices.ndim != 3 or self._matrices.shape[1] != self._matrices.shape[2]:
            raise ValueError(f"Expected shape (k, N, N), got {self._matrices.shape}")
        self._matrices.setflags(write=False)

    @property
    def rank(self) -> int:
        return self._matrices.shape[0]

    @property
    def ambient_dim(self) -> int:
        return self._matrices.shape[1]

    def matrices(self) -> np.ndarray:
        return self._matrices

    def columns(self, x: np.ndarray) -> np.ndarray:
        return np.einsum("kij,j->ik", self._matrices, np.asarray(x, dtype=complex))

    def exp_apply(self, z: np.ndarray, x: np.ndarray) -> np.ndarray:
        generator = np.tensordot(np.asarray(z, dtype=complex), self._matrices, axes=1)
        return linalg.expm(generator) @ np.asarray(x, dtype=complex)
