"""Holomorphic polynomial maps C^N → C^M given by explicit coefficient lists."""

from __future__ import annotations

from collections.abc import Mapping, Sequence
from dataclasses import dataclass

import numpy as np

from .exceptions import DimensionMismatch


@dataclass(frozen=True)
class Term:
    coeff: complex
    powers: tuple[int, ...]
    param: str | None = None  # coefficient is multiplied by this named model parameter

    @property
    def degree(self) -> int:
        return sum(self.powers)


@dataclass(frozen=True, eq=False)
class PolynomialMap:
    """Φ with Φ_m(z) = Σ_t coeff_t·z^{powers_t} over the terms of output m.

    Terms are flattened into three arrays so evaluation and the exact Jacobian
    are vectorized over monomials.
    """

    n_in: int
    n_out: int
    coeffs: np.ndarray  # (T,) complex, parameters already applied
    powers: np.ndarray  # (T, n_in) non-negative integers
    outputs: np.ndarray  # (T,) output coordinate of each term

    @classmethod
    def from_terms(
        cls,
        n_in: int,
        terms: Sequence[Sequence[Term]],
        params: Mapping[str, complex] | None = None,
    ) -> PolynomialMap:
        params = params or {}
        coeffs: list[complex] = []
        powers: list[tuple[int, ...]] = []
        outputs: list[int] = []
        for out, row in enumerate(terms):
            for term in row:
                if len(term.powers) != n_in or any(p < 0 for p in term.powers):
                    raise DimensionMismatch(
                        f"Term of output {out} has powers {term.powers}, expected {n_in} "
                        "non-negative exponents"
                    )
                if term.param is not None and term.param not in params:
                    raise DimensionMismatch(f"Unknown model parameter {term.param!r}")
                factor = params[term.param] if term.param is not None else 1.0
                coeffs.append(complex(term.coeff) * complex(factor))
                powers.append(tuple(term.powers))
                outputs.append(out)
        return cls(
            n_in=n_in,
            n_out=len(terms),
            coeffs=np.array(coeffs, dtype=complex),
            powers=np.array(powers, dtype=np.int64).reshape(len(powers), n_in),
            outputs=np.array(outputs, dtype=np.int64),
        )

    @classmethod
    def inclusion(cls, n_in: int, n_out: int | None = None) -> PolynomialMap:
        """z ↦ (z, 0, …, 0)."""
        n_out = n_in if n_out is None else n_out
        eye = np.eye(n_in, dtype=np.int64)
        return cls(
            n_in=n_in,
            n_out=n_out,
            coeffs=np.ones(n_in, dtype=complex),
            powers=eye,
            outputs=np.arange(n_in, dtype=np.int64),
        )

    @property
    def degree(self) -> int:
        return int(self.powers.sum(axis=1).max(initial=0))

    def _monomials(self, z: np.ndarray, powers: np.ndarray) -> np.ndarray:
        # integer powers only; 0**0 == 1
        return np.prod(np.where(powers == 0, 1.0 + 0j, z[None, :] ** powers), axis=1)

    def _check(self, z: np.ndarray) -> np.ndarray:
        z = np.asarray(z, dtype=complex)
        if z.shape != (self.n_in,):
            raise DimensionMismatch(f"Expected a point of C^{self.n_in}, got shape {z.shape}")
        return z

    def evaluate(self, z: np.ndarray) -> np.ndarray:
        z = self._check(z)
        values = self.coeffs * self._monomials(z, self.powers)
        result = np.zeros(self.n_out, dtype=complex)
        np.add.at(result, self.outputs, values)
        return result

    def jacobian(self, z: np.ndarray) -> np.ndarray:
        """Complex (n_out × n_in) matrix ∂Φ_m/∂z_i, differentiated term by term."""
        z = self._check(z)
        jac = np.zeros((self.n_out, self.n_in), dtype=complex)
        for i in range(self.n_in):
            exponent = self.powers[:, i]
            mask = exponent > 0
            if not np.any(mask):
                continue
            lowered = self.powers[mask].copy()
            lowered[:, i] -= 1
            values = self.coeffs[mask] * exponent[mask] * self._monomials(z, lowered)
            np.add.at(jac[:, i], self.outputs[mask], values)
        return jac

    def linear_part(self) -> np.ndarray:
        """dΦ₀ as a complex (n_out × n_in) matrix."""
        return self.jacobian(np.zeros(self.n_in, dtype=complex))
