import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cstarphase.eigen import build_eigen_record, validate_eigen_record
from cstarphase.linalg import dagger
from cstarphase.qubit import (
    SIGMA,
    QubitModel,
    QubitModelParams,
    build_qubit_universe,
    circle_curve,
    qubit_rotation,
    rotation_derivative,
)
from oracles import pauli_exp, qubit_h0_entries, qubit_shift

points = st.lists(st.floats(-2.0, 2.0), min_size=3, max_size=3).map(np.array)
P1 = np.diag([0.0, 1.0]).astype(complex)


class TestUniverse:
    def test_uncoupled_hamiltonian_is_diagonal(self):
        p = QubitModelParams(omega_c=1.3, omega_b=0.7, chi=0.0, hbar=1.1)
        h0, _, _ = build_qubit_universe(p)
        assert np.allclose(h0, np.diag([0, 1.1 * 0.7, 1.1 * 1.3, 1.1 * 2.0]), atol=1e-15)

    def test_hamiltonian_matches_entrywise_oracle(self):
        p = QubitModelParams(omega_c=1.3, omega_b=0.7, chi=0.45, hbar=1.1)
        assert np.allclose(build_qubit_universe(p)[0], qubit_h0_entries(1.3, 0.7, 0.45, 1.1), atol=1e-15)

    def test_top_state_at_zero_coupling(self):
        h0, _, _ = build_qubit_universe(QubitModelParams(chi=0.0))
        ket = np.array([0, 0, 0, 1.0])
        assert np.allclose(h0 @ ket, 2.0 * ket)

    def test_ladder_operators_commute_across_factors(self):
        _, c, b = build_qubit_universe(QubitModelParams())
        assert np.allclose(c @ b, b @ c)
        assert np.allclose(c @ dagger(c) + dagger(c) @ c, np.eye(4))

    def test_nonpositive_frequency_rejected(self):
        with pytest.raises(ValueError):
            QubitModelParams(omega_c=0.0)


class TestRotation:
    def test_origin(self):
        assert np.array_equal(qubit_rotation(np.zeros(3)), np.eye(2))

    def test_half_turn(self):
        assert np.allclose(qubit_rotation([np.pi, 0, 0]), -np.eye(2), atol=1e-15)

    @pytest.mark.parametrize("mu", range(3))
    def test_derivative_at_origin(self, mu):
        h = 1e-6
        e = np.eye(3)[mu]
        fd = (qubit_rotation(h * e) - qubit_rotation(-h * e)) / (2 * h)
        assert np.allclose(fd, 1j * SIGMA[mu], atol=1e-9)
        assert np.allclose(rotation_derivative(np.zeros(3), mu), 1j * SIGMA[mu], atol=1e-15)

    @given(points)
    @settings(max_examples=50, deadline=None)
    def test_unitary_and_matches_series(self, x):
        u = qubit_rotation(x)
        assert np.allclose(u @ dagger(u), np.eye(2), atol=1e-12)
        assert np.allclose(u, pauli_exp(x), atol=1e-12)

    @given(points, st.integers(0, 2))
    @settings(max_examples=30, deadline=None)
    def test_exact_derivative_matches_finite_difference(self, x, mu):
        h = 1e-5
        e = np.eye(3)[mu]
        fd = (qubit_rotation(x + h * e) - qubit_rotation(x - h * e)) / (2 * h)
        assert np.allclose(rotation_derivative(x, mu), fd, atol=1e-8)


class TestEigenData:
    def test_shift_closed_form(self):
        m = QubitModel(QubitModelParams(1.0, 1.0, 0.0, 1.0))
        assert m.lam == pytest.approx(2.0, abs=1e-15)
        m = QubitModel(QubitModelParams(1.2, 0.8, 0.37, 1.05))
        assert m.lam == pytest.approx(qubit_shift(1.2, 0.8, 0.37, 1.05), abs=1e-14)

    def test_frame_vector_at_zero_coupling(self):
        m = QubitModel(QubitModelParams(chi=0.0))
        assert np.allclose(m.phi_frame, [0, 0, 0, 1])

    def test_reduced_state_in_frame(self, model):
        assert np.allclose(model.mixed_eigenstate(np.zeros(3)), P1, atol=1e-15)
        rec = model.analytic_eigen(np.zeros(3))
        assert np.allclose(rec.rho, P1, atol=1e-15)

    @given(points)
    @settings(max_examples=100, deadline=None)
    def test_eigen_relations_at_random_points(self, x):
        m = QubitModel()
        h = m.hamiltonian(x)
        big = np.kron(m.eigenoperator(x), np.eye(2))
        phi = m.star_eigenvector(x)
        assert np.linalg.norm(h @ phi - big @ phi) <= 1e-10
        assert np.linalg.norm(h @ big - big @ h) <= 1e-10
        u = qubit_rotation(x)
        assert np.allclose(m.analytic_eigen(x).rho, u @ P1 @ dagger(u), atol=1e-12)

    @given(points)
    @settings(max_examples=25, deadline=None)
    def test_analytic_record_passes_validator(self, x):
        m = QubitModel()
        report = validate_eigen_record(m.analytic_eigen(x), m.hamiltonian(x))
        assert all(report["passed"].values())

    @given(points)
    @settings(max_examples=25, deadline=None)
    def test_numeric_solver_finds_same_branch(self, x):
        m = QubitModel()
        rec = build_eigen_record(m.hamiltonian, m.seed, -1, x)
        overlap = np.vdot(m.star_eigenvector(x), rec.phi.amplitudes)
        assert abs(overlap) == pytest.approx(1.0, abs=1e-8)
        assert rec.lam == pytest.approx(m.lam, abs=1e-10)


class TestGenerators:
    def test_origin_values(self, model):
        full, reduced = model.analytic_generators(np.zeros(3))
        assert np.allclose(reduced[2], -1j * P1, atol=1e-15)
        assert np.allclose(reduced[0], 0, atol=1e-15)
        assert np.allclose(full[0], [[0, 1j], [0, 0]], atol=1e-15)

    @given(points)
    @settings(max_examples=50, deadline=None)
    def test_trace_property_of_closed_forms(self, x):
        m = QubitModel()
        full, _ = m.analytic_generators(x)
        rho = m.mixed_eigenstate(x)
        for g in full:
            assert abs(np.trace(rho @ (g + dagger(g)))) <= 1e-10

    @given(points)
    @settings(max_examples=50, deadline=None)
    def test_generator_relation_of_closed_forms(self, x):
        m = QubitModel()
        full, _ = m.analytic_generators(x)
        u = qubit_rotation(x)
        for mu, g in enumerate(full):
            du = rotation_derivative(x, mu)
            drho = du @ P1 @ dagger(u) + u @ P1 @ dagger(du)
            rho = u @ P1 @ dagger(u)
            assert np.allclose(drho, g @ rho + rho @ dagger(g), atol=1e-12)

    @given(points, st.lists(st.floats(-1, 1), min_size=3, max_size=3))
    @settings(max_examples=30, deadline=None)
    def test_coupling_equals_remainder_norm(self, x, v):
        m = QubitModel()
        v = np.array(v)
        full, reduced = m.analytic_generators(x)
        rem = np.einsum("m,mij->ij", v, full - reduced)
        assert np.linalg.norm(rem, 2) == pytest.approx(float(m.adiabatic_coupling(x, v)), abs=1e-12)


class TestMembership:
    x = np.array([0.3, -0.7, 0.2])

    def conj(self, m):
        u = qubit_rotation(self.x)
        return u @ np.asarray(m, dtype=complex) @ dagger(u)

    def test_lower_triangular_with_complex_corner(self, model):
        flags = model.gauge_algebra_membership(self.x, self.conj([[1, 0], [2, 3j]]))
        assert flags["g"] and flags["j0"] and not flags["j1"]

    def test_real_corner_is_outside_isotropy(self, model):
        flags = model.gauge_algebra_membership(self.x, self.conj([[1, 0], [2, 3]]))
        assert flags["g"] and not flags["j0"] and not flags["j1"]

    def test_zero_corner(self, model):
        flags = model.gauge_algebra_membership(self.x, self.conj([[1, 0], [2, 0]]))
        assert flags["g"] and flags["j0"] and flags["j1"] and not flags["k"]

    def test_sigma_x_is_outside(self, model):
        assert not model.gauge_algebra_membership(self.x, SIGMA[0])["g"]

    def test_environment_algebra(self, model):
        assert model.gauge_algebra_membership(self.x, 0.4j * np.eye(2))["k"]
        assert not model.gauge_algebra_membership(self.x, 0.4 * np.eye(2))["k"]

    def test_isotropy_members_annihilate_state(self, model):
        rho = model.mixed_eigenstate(self.x)
        for m in ([[1, 0], [2, 0.5j]], [[0.3, 0], [-1j, 0]]):
            op = self.conj(m)
            assert np.linalg.norm(op @ rho + rho @ dagger(op)) <= 1e-12


class TestCircle:
    def test_closed_loop_through_origin(self):
        c = circle_curve(0.5, 2.0)
        assert np.allclose(c(0.0), 0) and np.allclose(c(2.0), 0, atol=1e-15)
        assert np.allclose(c(1.0), [1.0, 0, 0])

    def test_bad_plane(self):
        with pytest.raises(ValueError, match="plane"):
            circle_curve(plane=(1, 1))
