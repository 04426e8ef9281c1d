import csv

import numpy as np
import pytest
import scipy.linalg

from cstarphase.cstar import star_norm_sq
from cstarphase.eigen import BatchedFamily, SectionField
from cstarphase.linalg import dagger
from cstarphase.qubit import SIGMA, circle_curve
from cstarphase.transport import (
    TRANSPORT_COLUMNS,
    ParameterPath,
    SchrodingerResult,
    TransportResult,
    adiabatic_transport,
    adiabaticity_diagnostic,
    leakage,
    parallel_transport_check,
    path_generators,
    schrodinger_integrate,
    time_ordered_exp,
    transport_error,
    write_transport_csv,
)
from oracles import expm_taylor, loglog_slope, random_hermitian, random_state


def constant_family(h):
    return BatchedFamily(lambda x: np.broadcast_to(h, x.shape[:-1] + h.shape))


def loop_setup(model, T, N=None, substeps=10):
    path = ParameterPath(circle_curve(0.5, T), T, N or max(1000, int(10 * T)))
    fine = path.fine_grid(substeps)
    sec = model.section(fine, points=path.points(fine.axes[0]))
    return path, fine, sec


class TestSchrodinger:
    def test_stationary_state(self):
        h = np.diag([0.3, 1.1, -0.4, 2.0]).astype(complex)
        path = ParameterPath.stationary(np.zeros(3), 5.0, 200)
        psi0 = np.eye(4)[1].astype(complex)
        res = schrodinger_integrate(constant_family(h), psi0, path)
        assert np.allclose(res.psi, np.exp(-1.1j * res.t)[:, None] * psi0, atol=1e-10)

    def test_constant_generic_hamiltonian(self, rng):
        h = random_hermitian(rng, 4)
        psi0 = random_state(rng, 4)
        path = ParameterPath.stationary(np.zeros(3), 3.0, 300)
        res = schrodinger_integrate(constant_family(h), psi0, path, hbar=0.7)
        expected = np.stack([expm_taylor(-1j * h * t / 0.7) @ psi0 for t in res.t])
        assert np.allclose(res.psi, expected, atol=1e-8)

    def test_step_too_large(self):
        h = np.diag([0.0, 10.0]).astype(complex)
        path = ParameterPath.stationary(np.zeros(1), 10.0, 2)
        with pytest.raises(ValueError, match="refine N"):
            schrodinger_integrate(constant_family(h), np.array([1, 1]) / np.sqrt(2), path, substeps=1)

    def test_non_hermitian(self):
        h = np.array([[0, 1], [0, 0]], dtype=complex)
        path = ParameterPath.stationary(np.zeros(1), 1.0, 10)
        with pytest.raises(ValueError, match="not Hermitian"):
            schrodinger_integrate(constant_family(h), np.array([1, 0]), path)

    def test_leakage_decreases_on_slower_loops(self, model):
        values = []
        for T in (10, 30, 100):
            path, _, sec = loop_setup(model, T)
            exact = schrodinger_integrate(model.hamiltonian, sec.phi[0], path)
            values.append(leakage(exact.psi, sec.projector[::20]).max())
        assert values[0] > values[1] > values[2]


class TestPath:
    def test_validation(self):
        with pytest.raises(ValueError):
            ParameterPath.stationary(np.zeros(2), 0.0, 10)
        with pytest.raises(ValueError):
            ParameterPath.stationary(np.zeros(2), 1.0, 1)

    def test_closed_waypoint_spline_is_periodic(self):
        path = ParameterPath.from_waypoints([[0, 0], [1, 0], [1, 1], [0, 1]], 4.0, 40, closed=True)
        assert np.allclose(path.points(0.0), path.points(4.0))
        assert np.allclose(path.velocity(0.0), path.velocity(4.0), atol=1e-6)
        assert np.allclose(path.points(1.0), [1, 0])

    def test_fine_grid_layout(self):
        path = ParameterPath.stationary(np.zeros(1), 2.0, 4)
        fine = path.fine_grid(3)
        assert fine.axes[0].size == 2 * 4 * 3 + 1
        assert np.allclose(fine.axes[0][::6], path.times())


class TestTimeOrderedExp:
    def test_scalar(self):
        t = np.linspace(0, 2.0, 401)
        e = np.full((401, 1, 1), 1.7 + 0j)
        assert np.allclose(time_ordered_exp(e, t), np.exp(-1.7j * 2.0), atol=1e-10)

    def test_diagonal_time_dependent(self):
        t = np.linspace(0, 1.0, 401)
        e = np.stack([np.diag([np.cos(s), s**2]) for s in t]).astype(complex)
        expected = np.diag(np.exp(-1j * np.array([np.sin(1.0), 1 / 3])))
        assert np.allclose(time_ordered_exp(e, t, hbar=1.0), expected, atol=1e-10)

    def test_piecewise_non_commuting(self):
        e1, e2 = SIGMA[0] * 0.8, SIGMA[2] * 1.3
        expected = scipy.linalg.expm(-1j * 0.7 * e2) @ scipy.linalg.expm(-1j * 1.0 * e1)
        fine = np.concatenate([np.linspace(0, 1, 201), np.linspace(1, 1.7, 141)])
        fine_e = np.concatenate([np.tile(e1, (201, 1, 1)), np.tile(e2, (141, 1, 1))])
        assert np.allclose(time_ordered_exp(fine_e, fine), expected, atol=1e-10)


class TestAdiabaticTransport:
    def test_stationary_path(self, model):
        x0 = np.array([0.3, -0.1, 0.6])
        path = ParameterPath.stationary(x0, 4.0, 40)
        fine = path.fine_grid(2)
        sec = model.section(fine, points=path.points(fine.axes[0]))
        tr = adiabatic_transport(sec, substeps=2)
        e = model.eigenoperator(x0)
        rho0 = model.mixed_eigenstate(x0)
        assert np.allclose(tr.g[-1], scipy.linalg.expm(-1j * e * 4.0), atol=1e-8)
        assert np.linalg.norm(e @ rho0 - rho0 @ e) <= 1e-12
        assert np.allclose(tr.rho, rho0, atol=1e-8)
        assert tr.max_diagnostic <= 1e-12

    def test_grid_must_match_substeps(self, model):
        path, fine, sec = loop_setup(model, 10.0, N=100, substeps=3)
        with pytest.raises(ValueError, match="substep"):
            adiabatic_transport(sec, substeps=7)

    def test_unknown_generator(self, model):
        _, _, sec = loop_setup(model, 10.0, N=100, substeps=1)
        with pytest.raises(ValueError, match="generator"):
            adiabatic_transport(sec, "other")

    def test_trace_preserved(self, model):
        _, _, sec = loop_setup(model, 100.0)
        tr = adiabatic_transport(sec, substeps=10)
        assert tr.trace_residual.max() <= 1e-8

    def test_fast_loop_warns(self, model):
        _, _, sec = loop_setup(model, 2.0, N=200)
        with pytest.warns(UserWarning, match="adiabatic condition weak"):
            tr = adiabatic_transport(sec, substeps=10)
        assert tr.warnings

    def test_closed_system_is_exact(self):
        # trivial environment, E = H: the full transport reproduces the Schrodinger state
        T, theta = 3.0, 0.8

        def ham(x):
            phi = x[..., 0]
            n = np.stack([np.sin(theta) * np.cos(phi), np.sin(theta) * np.sin(phi), np.full(phi.shape, np.cos(theta))], -1)
            return np.einsum("...m,mij->...ij", n, SIGMA)

        path = ParameterPath(lambda t: (2 * np.pi * np.asarray(t) / T)[..., None], T, 300)
        fine = path.fine_grid(4)
        phis = path.points(fine.axes[0])[..., 0]
        vec = np.stack([np.cos(theta / 2) * np.ones_like(phis), np.exp(1j * phis) * np.sin(theta / 2)], -1)
        hs = ham(path.points(fine.axes[0]))
        eye = np.broadcast_to(np.eye(2, dtype=complex), hs.shape).copy()
        sec = SectionField(fine, 2, 1, vec, hs, eye)
        tr = adiabatic_transport(sec, substeps=4)
        assert tr.max_diagnostic <= 1e-12
        exact = schrodinger_integrate(BatchedFamily(ham), vec[0], path, substeps=4)
        rho_exact = star_norm_sq(exact.psi, 2, 1)
        # limited by the finite-difference generator on the fine grid
        assert np.max(np.abs(rho_exact - tr.rho)) <= 1e-5


class TestDiagnostic:
    def test_stationary(self):
        assert adiabaticity_diagnostic(np.zeros((5, 2, 2)))[0] == 0.0

    def test_components_contracted_with_velocity(self, rng):
        comps = rng.normal(size=(4, 3, 2, 2))
        v = rng.normal(size=(4, 3))
        value, series = adiabaticity_diagnostic(comps, v)
        direct = [np.linalg.norm(np.einsum("mij,m->ij", comps[k], v[k]), 2) for k in range(4)]
        assert np.allclose(series, direct) and value == pytest.approx(max(direct))

    def test_scales_inversely_with_duration(self, model):
        values = []
        for T in (20.0, 40.0):
            _, _, sec = loop_setup(model, T, N=400, substeps=1)
            values.append(adiabaticity_diagnostic(path_generators(sec)["remainder"])[0])
        assert values[0] / values[1] == pytest.approx(2.0, rel=1e-5)

    def test_matches_closed_form_coupling(self, model):
        path, fine, sec = loop_setup(model, 20.0, N=400, substeps=1)
        _, series = adiabaticity_diagnostic(path_generators(sec)["remainder"][::2])
        t = path.times()
        coupling = model.adiabatic_coupling(path.points(t), path.velocity(t))
        assert np.allclose(series, coupling, atol=1e-6)

    def test_single_mode_environment_has_no_remainder(self, rng):
        # trivial system factor: the generator is a scalar and carries no coupling
        g_ax = np.linspace(0, 1, 21)
        from cstarphase.forms import Grid

        grid = Grid((g_ax,), (0,), np.zeros(1))
        vec = np.stack([np.cos(g_ax), np.sin(g_ax) * np.exp(1j * g_ax)], -1)
        proj = np.einsum("ki,kj->kij", vec, vec.conj())
        sec = SectionField(grid, 1, 2, vec, np.zeros((21, 1, 1)), proj)
        assert np.allclose(path_generators(sec)["remainder"], 0, atol=1e-12)


class TestTransportError:
    def make(self, psi, rho, t):
        exact = SchrodingerResult(t, psi, np.zeros(t.size))
        tr = TransportResult(t, np.zeros((t.size, 2, 2)), rho, np.zeros(t.size), np.zeros(t.size))
        return exact, tr

    def test_identical(self, rng):
        psi = np.stack([random_state(rng, 4) for _ in range(3)])
        rho = star_norm_sq(psi, 2, 2)
        err = transport_error(*self.make(psi, rho, np.arange(3.0)), 2, 2)
        assert err["max_trace_distance"] <= 1e-14
        assert err["final_fidelity"] == pytest.approx(1.0, abs=1e-6)

    def test_orthogonal_pure_states(self):
        psi = np.array([[1, 0, 0, 0]], dtype=complex)
        rho = np.array([[[0, 0], [0, 1]]], dtype=complex)
        err = transport_error(*self.make(psi, rho, np.zeros(1)), 2, 2)
        assert err["max_trace_distance"] == pytest.approx(1.0)

    def test_time_grid_mismatch(self):
        psi = np.array([[1, 0, 0, 0]] * 2, dtype=complex)
        exact, tr = self.make(psi, star_norm_sq(psi, 2, 2), np.arange(2.0))
        tr.t = tr.t + 0.5
        with pytest.raises(ValueError, match="time-grid mismatch"):
            transport_error(exact, tr, 2, 2)


class TestParallelTransport:
    def test_constant(self):
        t = np.linspace(0, 1, 21)
        rho = np.tile(np.diag([0.3, 0.7]).astype(complex), (21, 1, 1))
        assert parallel_transport_check(np.zeros((21, 2, 2)), rho, t)["residual"] <= 1e-13

    def test_full_generator_transports_state(self, model):
        path, fine, sec = loop_setup(model, 5.0, N=500, substeps=2)
        gens = path_generators(sec)
        res = parallel_transport_check(gens["full"], sec.rho, fine.axes[0], 2)
        assert res["residual"] <= 1e-5

    def test_reduced_generator_leaves_remainder_term(self, model):
        # d/dt of the transported state is g (R rho + rho R^+) g^+ when only A is used
        path, fine, sec = loop_setup(model, 5.0, N=500, substeps=2)
        gens = path_generators(sec)
        res = parallel_transport_check(gens["reduced"], sec.rho, fine.axes[0], 2)
        rem, rho = gens["remainder"][::4], sec.rho[::4]
        expected = np.linalg.norm(rem @ rho + rho @ dagger(rem), 2, axis=(-2, -1))
        assert np.allclose(res["series"][1:-1], expected[1:-1], rtol=1e-3)

    def test_corrupted_generator_detected(self, model):
        path, fine, sec = loop_setup(model, 5.0, N=500, substeps=2)
        gens = path_generators(sec)
        v = path.velocity(fine.axes[0])
        bad = gens["full"] + 0.01 * v.sum(axis=-1)[:, None, None] * SIGMA[0]
        assert parallel_transport_check(bad, sec.rho, fine.axes[0], 2)["residual"] >= 1e-3


def test_full_generator_converges(model):
    """Diagnostic: the whole generator gives an adiabatic error falling roughly like 1/T."""
    Ts, errs = (10.0, 30.0, 100.0), []
    for T in Ts:
        path, _, sec = loop_setup(model, T)
        exact = schrodinger_integrate(model.hamiltonian, sec.phi[0], path)
        tr = adiabatic_transport(sec, "full", substeps=10, adiabatic_threshold=1.0)
        errs.append(transport_error(exact, tr, 2, 2)["max_trace_distance"])
    assert errs[0] > errs[1] > errs[2]
    assert loglog_slope(Ts, errs) <= -0.8


def test_csv_layout(tmp_path):
    out = tmp_path / "series.csv"
    write_transport_csv(out, [0.0, 0.1], [1e-17, 2e-17], [0, 0.5], [0.25, 1 / 3], [0, 0])
    raw = out.read_bytes()
    assert raw.count(b"\r\n") == 3
    rows = list(csv.reader(raw.decode().splitlines()))
    assert tuple(rows[0]) == TRANSPORT_COLUMNS
    assert float(rows[2][3]) == 1 / 3
