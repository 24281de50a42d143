"""Unit tests for moment_perturb.algebra: orthonormal bases, actions, stabilizers, limits."""

import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from moment_perturb.algebra import (
    Direction,
    GroupAction,
    OneParameterSubgroup,
    StatePoint,
    algebra_element,
    exp_action,
    infinitesimal_action,
    lattice_from_coefficients,
    ops_limit,
    orbit_distance,
    orthonormalize,
    q_operator,
    stabilizer,
    structure_constants,
)
from moment_perturb.bundled import (
    PAULI,
    pair_action,
    su2_defining_action,
    su2_generators,
    triple_action,
)
from moment_perturb.exceptions import (
    DimensionMismatch,
    EmptyComplement,
    InvalidAction,
    NonAntiHermitian,
    RankDeficient,
)
from moment_perturb.stability import random_torus_instance

ROOT2 = math.sqrt(2.0)


def trace_form(a: np.ndarray, b: np.ndarray) -> float:
    return float(-np.trace(a @ b).real)


# --- orthonormalize ---


class TestOrthonormalize:
    def test_su2_basis_is_orthonormal(self):
        basis = orthonormalize(su2_generators())
        gram = np.array(
            [[trace_form(a, b) for b in basis.generators] for a in basis.generators]
        )
        assert gram == pytest.approx(np.eye(3), abs=1e-12)

    def test_su2_basis_keeps_the_given_order(self):
        basis = orthonormalize(su2_generators())
        assert basis.generators[0] == pytest.approx(1j * PAULI[0] / ROOT2)
        assert basis.generators[2] == pytest.approx(1j * PAULI[2] / ROOT2)

    def test_closed_algebra_has_no_residual(self):
        assert orthonormalize(su2_generators()).closure_residual < 1e-12

    def test_coordinates_invert_element(self):
        basis = orthonormalize(su2_generators())
        coeffs = np.array([0.3, -1.2, 2.0])
        assert basis.coordinates(basis.element(coeffs)) == pytest.approx(coeffs)

    def test_su2_structure_constants(self):
        c = structure_constants(orthonormalize(su2_generators()))
        assert c[0, 1, 2] == pytest.approx(-ROOT2)
        assert c[1, 2, 0] == pytest.approx(-ROOT2)
        assert c[1, 0, 2] == pytest.approx(ROOT2)
        assert c[0, 0] == pytest.approx(np.zeros(3))

    def test_dependent_generators_rejected(self):
        g = 1j * PAULI[2]
        with pytest.raises(RankDeficient):
            orthonormalize(np.array([g, 2.0 * g]))

    def test_hermitian_generator_rejected(self):
        with pytest.raises(NonAntiHermitian):
            orthonormalize(np.array([PAULI[0]]))

    def test_non_square_rejected(self):
        with pytest.raises(DimensionMismatch):
            orthonormalize(np.zeros((1, 2, 3), dtype=complex))

    def test_empty_rejected(self):
        with pytest.raises(RankDeficient):
            orthonormalize(np.zeros((0, 2, 2), dtype=complex))


# --- actions ---


class TestGroupAction:
    def test_pair_weights_in_orthonormal_basis(self):
        action = pair_action()
        assert action.is_torus
        assert action.dim == 1
        assert action.ambient_dim == 2
        assert action.rep.weights[0] == pytest.approx([1 / ROOT2, -1 / ROOT2])
        assert action.rep.lattice.tolist() == [[1, -1]]

    def test_pairings_use_integer_weights(self):
        action = triple_action()
        assert action.rep.pairings(np.array([2])).tolist() == [2, -2, 0]

    def test_non_integer_weights_rejected(self):
        with pytest.raises(DimensionMismatch):
            GroupAction.from_weights([[1.5, -1]])

    def test_shared_basis_needs_matching_rank(self):
        with pytest.raises(DimensionMismatch):
            GroupAction.from_weights([[1, 0], [0, 1]], like=pair_action())

    def test_shared_basis_reuses_transform(self):
        inner = pair_action()
        outer = GroupAction.from_weights([[1, -1, 2]], like=inner)
        assert outer.rep.transform == pytest.approx(inner.rep.transform)
        assert outer.rep.weights[0] == pytest.approx([1 / ROOT2, -1 / ROOT2, 2 / ROOT2])

    def test_dependent_weights_act_with_a_kernel(self):
        action = GroupAction.from_weights([[1, -1], [2, -2]])
        assert action.dim == 2
        assert action.trivial_dim == 1
        assert action.rep.lattice.tolist() == [[1, -1], [2, -2]]
        # the effective circle still carries the weights ±1/√2 up to sign
        effective = action.rep.weights[:, 0] @ action.rep.weights
        assert np.abs(effective) == pytest.approx([0.5, 0.5])

    def test_zero_weight_row(self):
        action = GroupAction.from_weights([[1, -1], [0, 0]])
        assert action.trivial_dim == 1
        assert action.rep.weights[1] == pytest.approx([0.0, 0.0])

    def test_su2_defining_action_is_valid(self):
        action = su2_defining_action()
        assert not action.is_torus
        assert action.dim == 3
        assert action.homomorphism_residual < 1e-10
        assert action.trivial_dim == 0

    def test_unclosed_generators_rejected(self):
        gens = su2_generators()[:2]
        with pytest.raises(InvalidAction):
            GroupAction.from_matrices(gens, gens)

    def test_non_homomorphism_rejected(self):
        gens = su2_generators()
        wrong = np.array([gens[0], gens[1], -gens[2]])
        with pytest.raises(InvalidAction):
            GroupAction.from_matrices(gens, wrong)

    def test_representation_count_mismatch(self):
        gens = su2_generators()
        with pytest.raises(DimensionMismatch):
            GroupAction.from_matrices(gens, gens[:2])

    def test_trivial_dim_counts_kernel(self):
        gens = su2_generators()
        action = GroupAction.from_matrices(gens, np.zeros((3, 2, 2), dtype=complex))
        assert action.trivial_dim == 3


# --- points ---


class TestStatePoint:
    def test_norm(self):
        x = StatePoint([3.0, 4.0j])
        assert x.norm2 == pytest.approx(25.0)
        assert x.norm == pytest.approx(5.0)
        assert x.dim == 2

    def test_scaled(self):
        assert StatePoint([1.0, 2.0]).scaled(3.0).coords == pytest.approx([3.0, 6.0])

    def test_support(self):
        assert StatePoint([1.0, 0.0, 1e-20]).support().tolist() == [True, False, False]

    def test_coords_are_read_only(self):
        x = StatePoint([1.0, 2.0])
        with pytest.raises(ValueError):
            x.coords[0] = 5.0

    def test_matrix_rejected(self):
        with pytest.raises(DimensionMismatch):
            StatePoint([[1.0, 0.0], [0.0, 1.0]])

    def test_wrong_dimension_for_action(self):
        with pytest.raises(DimensionMismatch):
            stabilizer(pair_action(), StatePoint([1.0, 0.0, 0.0]))


class TestExpAction:
    def test_imaginary_direction_rescales(self):
        action = pair_action()
        s = math.log(2.0) / ROOT2
        y = exp_action(action, np.array([1.0]), s, StatePoint([2.0, 1.0]), Direction.IMAGINARY)
        assert y.coords == pytest.approx([ROOT2, ROOT2])

    def test_real_direction_is_isometry(self):
        action = su2_defining_action()
        x = StatePoint([1.0 + 2.0j, -0.5])
        y = exp_action(action, np.array([0.4, -1.1, 0.7]), 1.3, x, Direction.REAL)
        assert y.norm == pytest.approx(x.norm)


class TestInfinitesimalAction:
    def test_algebra_element_of_pair(self):
        element = algebra_element(pair_action(), np.array([ROOT2]))
        assert element == pytest.approx(np.diag([1j, -1j]))

    def test_pair_columns_are_realified(self):
        sigma = infinitesimal_action(pair_action(), StatePoint([2.0, 1.0]))
        assert sigma.shape == (4, 1)
        assert sigma[:, 0] == pytest.approx([0.0, 0.0, ROOT2, -1 / ROOT2])

    def test_matches_algebra_element(self):
        action = su2_defining_action()
        x = StatePoint([1.0 - 0.5j, 0.25 + 2.0j])
        xi = np.array([0.7, -0.2, 1.1])
        applied = algebra_element(action, xi) @ x.coords
        sigma = infinitesimal_action(action, x)
        assert sigma @ xi == pytest.approx(np.concatenate([applied.real, applied.imag]))


# --- stabilizers ---


class TestStabilizer:
    def test_generic_pair_point(self):
        stab = stabilizer(pair_action(), StatePoint([2.0, 1.0]))
        assert stab.dim == 0
        assert stab.codim == 1
        assert stab.sigma_min_perp == pytest.approx(math.sqrt(2.5))

    def test_origin_is_fixed(self):
        stab = stabilizer(pair_action(), StatePoint([0.0, 0.0]))
        assert stab.dim == 1
        assert stab.codim == 0
        assert stab.sigma_min_perp is None

    def test_zero_weight_coordinate_is_fixed(self):
        assert stabilizer(triple_action(), StatePoint([0.0, 0.0, 1.0])).dim == 1

    def test_su2_vector_has_trivial_stabilizer(self):
        action = su2_defining_action()
        assert stabilizer(action, StatePoint([1.0, 0.0])).dim == 0

    def test_projection_splits_coefficients(self):
        action = triple_action()
        stab = stabilizer(action, StatePoint([0.0, 0.0, 1.0]))
        assert np.abs(stab.component_in_kx(np.array([2.0]))) == pytest.approx([2.0])
        assert stab.project_perp(np.array([2.0])) == pytest.approx([0.0])


class TestQOperator:
    def test_pair_value(self):
        q = q_operator(pair_action(), StatePoint([2.0, 1.0]))
        assert q.eigenvalues == pytest.approx([2.5])
        assert q.lam == pytest.approx(0.4)

    def test_solve_inverts(self):
        q = q_operator(pair_action(), StatePoint([2.0, 1.0]))
        assert q.solve(np.array([5.0])) == pytest.approx([2.0])

    def test_full_stabilizer_has_no_domain(self):
        with pytest.raises(EmptyComplement):
            q_operator(pair_action(), StatePoint([0.0, 0.0]))


# --- one-parameter subgroups ---


class TestOneParameterSubgroup:
    def test_lattice_must_be_integral(self):
        with pytest.raises(ValueError):
            OneParameterSubgroup((Fraction(1, 2),), lattice=True)

    def test_rational_allowed_off_lattice(self):
        rho = OneParameterSubgroup((Fraction(1, 2), 1), lattice=False)
        assert rho.to_strings() == ["1/2", "1/1"]

    def test_from_direction_rounds_to_primitive(self):
        rho = OneParameterSubgroup.from_direction(np.array([0.5, -1.0]))
        assert rho.xi == (Fraction(1), Fraction(-2))

    def test_from_direction_zero(self):
        assert OneParameterSubgroup.from_direction(np.zeros(2)) is None

    def test_primitive_and_inverse(self):
        rho = OneParameterSubgroup((2, -4))
        assert rho.primitive().xi == (1, -2)
        assert rho.inverse().xi == (-2, 4)
        assert OneParameterSubgroup.trivial(3).is_trivial

    def test_coefficients_solve_transform(self):
        action = pair_action()
        coeffs = OneParameterSubgroup((1,)).coefficients(action)
        assert coeffs == pytest.approx([ROOT2])
        assert lattice_from_coefficients(action, coeffs) == pytest.approx([1.0])

    def test_coefficients_dimension(self):
        with pytest.raises(DimensionMismatch):
            OneParameterSubgroup((1, 0)).coefficients(pair_action())

    def test_lattice_needs_torus(self):
        with pytest.raises(DimensionMismatch):
            OneParameterSubgroup((1, 0, 0)).coefficients(su2_defining_action())


class TestOpsLimit:
    def test_positive_weight_dies(self):
        exists, limit = ops_limit(pair_action(), OneParameterSubgroup((1,)), StatePoint([1.0, 0.0]))
        assert exists
        assert limit.coords == pytest.approx([0.0, 0.0])

    def test_negative_weight_diverges(self):
        result = ops_limit(pair_action(), OneParameterSubgroup((1,)), StatePoint([0.0, 1.0]))
        assert not result.exists
        assert result.limit is None

    def test_zero_weight_survives(self):
        _, limit = ops_limit(
            triple_action(), OneParameterSubgroup((1,)), StatePoint([1.0, 0.0, 1.0])
        )
        assert limit.coords == pytest.approx([0.0, 0.0, 1.0])

    def test_matrix_action_uses_spectrum(self):
        action = su2_defining_action()
        rho = OneParameterSubgroup((0, 0, 1), lattice=False)
        x = StatePoint([1.0, 0.0])
        forward = ops_limit(action, rho, x)
        backward = ops_limit(action, rho.inverse(), x)
        assert forward.exists != backward.exists
        limit = forward.limit if forward.exists else backward.limit
        assert limit.norm == pytest.approx(0.0, abs=1e-12)


# --- orbits ---


class TestOrbitDistance:
    def test_balanced_point_is_in_orbit(self):
        d = orbit_distance(pair_action(), StatePoint([2.0, 1.0]), StatePoint([ROOT2, ROOT2]))
        assert d == pytest.approx(0.0, abs=1e-7)

    def test_collapsed_limit_is_outside_orbit(self):
        d = orbit_distance(
            triple_action(), StatePoint([1.0, 0.0, 1.0]), StatePoint([0.0, 0.0, 1.0])
        )
        assert d > 1e-5

    def test_orbit_of_origin(self):
        d = orbit_distance(pair_action(), StatePoint([0.0, 0.0]), StatePoint([3.0, 4.0]))
        assert d == pytest.approx(5.0)


class TestTorusAsMatrixAction:
    WEIGHTS = [[1, 0, -1], [0, 1, -1]]

    @pytest.fixture
    def actions(self):
        torus = GroupAction.from_weights(self.WEIGHTS)
        diagonal = np.array([1j * np.diag(row) for row in np.array(self.WEIGHTS, dtype=float)])
        return torus, GroupAction.from_matrices(diagonal, diagonal)

    @pytest.mark.parametrize(
        "coords", [[1.0, 1.0, 1.0], [2.0, 0.5j, 1.0], [1.0, 0.0, 1.0], [0.0, 0.0, 1.0]]
    )
    def test_same_infinitesimal_data(self, actions, coords):
        torus, matrix = actions
        x = StatePoint(coords)
        assert infinitesimal_action(torus, x) == pytest.approx(
            infinitesimal_action(matrix, x), abs=1e-12
        )
        torus_stab, matrix_stab = stabilizer(torus, x), stabilizer(matrix, x)
        assert torus_stab.dim == matrix_stab.dim
        assert torus_stab.singular_values == pytest.approx(matrix_stab.singular_values, abs=1e-12)
        assert q_operator(torus, x).lam == pytest.approx(q_operator(matrix, x).lam, rel=1e-10)


# --- properties ---


@settings(max_examples=40, deadline=None)
@given(st.integers(min_value=0, max_value=2**32 - 1))
def test_random_torus_basis_is_orthonormal(seed):
    # the trace form is the identity off the kernel of the action and vanishes on it
    action, _ = random_torus_instance(np.random.default_rng(seed))
    mats = action.rep.matrices()
    gram = np.array([[trace_form(a, b) for b in mats] for a in mats])
    assert gram @ gram == pytest.approx(gram, abs=1e-9)
    assert np.trace(gram) == pytest.approx(action.dim - action.trivial_dim, abs=1e-9)
