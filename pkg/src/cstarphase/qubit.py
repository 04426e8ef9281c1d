"""Rotated qubit coupled to a single two-level environment mode (phase damping).

Basis order is ``|0>, |1>`` on each factor, universe index ``2 * i_S + i_E``.
The lowering operator maps ``|1>`` to ``|0>``; ladder operators are embedded
as ``c (x) 1`` and ``1 (x) b`` so they commute across factors.

    H0   = hbar w_c c+c (x) 1 + hbar w_b 1 (x) b+b + chi c+c (x) (b + b+)
    U(x) = exp(i x . sigma),   H(x) = (U (x) 1) H0 (U (x) 1)^dagger

The tracked branch has seed ``E0 = hbar w_c c c+`` and shift
``lam = (sqrt(4 chi^2 + hbar^2 w_b^2) + 2 hbar w_c + hbar w_b) / 2``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .eigen import BatchedFamily, EigenRecord, SectionField
from .forms import Grid
from .linalg import BipartiteVector, dagger

SIGMA = np.array(
    [
        [[0, 1], [1, 0]],
        [[0, -1j], [1j, 0]],
        [[1, 0], [0, -1]],
    ],
    dtype=complex,
)
LOWER = np.array([[0, 1], [0, 0]], dtype=complex)
EYE2 = np.eye(2, dtype=complex)
KET1_PROJ = np.diag([0.0, 1.0]).astype(complex)


@dataclass(frozen=True)
class QubitModelParams:
    omega_c: float = 1.0
    omega_b: float = 1.0
    chi: float = 0.3
    hbar: float = 1.0

    def __post_init__(self) -> None:
        if not (self.omega_c > 0 and self.omega_b > 0):
            raise ValueError("omega_c and omega_b must be positive")
        if not self.hbar > 0:
            raise ValueError("hbar must be positive")


def build_qubit_universe(p: QubitModelParams) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Return ``(H0, c (x) 1, 1 (x) b)`` as 4x4 matrices."""
    c = np.kron(LOWER, EYE2)
    b = np.kron(EYE2, LOWER)
    cd, bd = dagger(c), dagger(b)
    h0 = p.hbar * p.omega_c * cd @ c + p.hbar * p.omega_b * bd @ b + p.chi * cd @ c @ (b + bd)
    return h0, c, b


def qubit_rotation(x) -> np.ndarray:
    """``exp(i x . sigma)`` in closed form; accepts stacked points ``(..., 3)``."""
    x = np.asarray(x, dtype=float)
    theta = np.linalg.norm(x, axis=-1)
    # sin(theta)/theta without a singularity at the origin
    sinc = np.sinc(theta / np.pi)
    gen = np.einsum("...m,mij->...ij", x, SIGMA)
    return np.cos(theta)[..., None, None] * EYE2 + 1j * sinc[..., None, None] * gen


def rotation_derivative(x, direction: int) -> np.ndarray:
    """Exact ``dU/dx^mu`` from the block-triangular exponential ``exp([[X, dX], [0, X]])``."""
    x = np.asarray(x, dtype=float)
    gen = 1j * np.einsum("...m,mij->...ij", x, SIGMA)
    block = np.zeros(x.shape[:-1] + (4, 4), dtype=complex)
    block[..., :2, :2] = gen
    block[..., 2:, 2:] = gen
    block[..., :2, 2:] = 1j * SIGMA[direction]
    return scipy.linalg.expm(block)[..., :2, 2:]


class QubitModel:
    """Closed-form eigen data and generators for the rotated phase-damping qubit."""

    n_s = 2
    n_e = 2

    def __init__(self, params: QubitModelParams | None = None):
        self.params = params or QubitModelParams()
        p = self.params
        self.H0, self.c, self.b = build_qubit_universe(p)
        root = np.sqrt(4 * p.chi**2 + (p.hbar * p.omega_b) ** 2)
        self.lam = 0.5 * (root + 2 * p.hbar * p.omega_c + p.hbar * p.omega_b)
        self.E0_frame = p.hbar * p.omega_c * LOWER @ dagger(LOWER)
        phi = np.zeros(4, dtype=complex)
        phi[2] = 2 * p.chi
        phi[3] = root + p.hbar * p.omega_b
        self.phi_frame = phi / np.linalg.norm(phi)
        self.hamiltonian = BatchedFamily(self._hamiltonian)
        self.seed = BatchedFamily(self._seed)

    # --- families over parameter points -----------------------------------

    def _lift(self, u: np.ndarray) -> np.ndarray:
        return np.einsum("...ij,ab->...iajb", u, EYE2).reshape(u.shape[:-2] + (4, 4))

    def _hamiltonian(self, x: np.ndarray) -> np.ndarray:
        big = self._lift(qubit_rotation(x))
        return big @ self.H0 @ dagger(big)

    def _seed(self, x: np.ndarray) -> np.ndarray:
        u = qubit_rotation(x)
        return u @ self.E0_frame @ dagger(u)

    def eigenoperator(self, x) -> np.ndarray:
        u = qubit_rotation(x)
        return u @ (self.E0_frame + self.lam * EYE2) @ dagger(u)

    def star_eigenvector(self, x) -> np.ndarray:
        return np.einsum("...ij,j->...i", self._lift(qubit_rotation(x)), self.phi_frame)

    def mixed_eigenstate(self, x) -> np.ndarray:
        u = qubit_rotation(x)
        return u @ KET1_PROJ @ dagger(u)

    def projector(self, x) -> np.ndarray:
        """Projector onto ker(H - E (x) 1); this kernel is one-dimensional."""
        phi = self.star_eigenvector(x)
        return np.einsum("...i,...j->...ij", phi, phi.conj())

    # --- records and sections -----------------------------------------------

    def analytic_eigen(self, x) -> EigenRecord:
        x = np.asarray(x, dtype=float)
        u = qubit_rotation(x)
        return EigenRecord(
            x=x,
            E0=u @ self.E0_frame @ dagger(u),
            lam=float(self.lam),
            phi=BipartiteVector(2, 2, self.star_eigenvector(x)),
            E=self.eigenoperator(x),
            rho=self.mixed_eigenstate(x),
            projector=self.projector(x),
        )

    def section(self, grid: Grid, chart: str | None = None, points: np.ndarray | None = None) -> SectionField:
        """Closed-form section on ``grid`` (or at ``points`` indexed like the grid)."""
        pts = grid.points() if points is None else np.asarray(points, dtype=float)
        return SectionField(
            grid,
            2,
            2,
            self.star_eigenvector(pts),
            self.eigenoperator(pts),
            self.projector(pts),
            np.full(grid.shape, self.lam),
            chart,
        )

    def analytic_generators(self, x, directions=(0, 1, 2)) -> tuple[np.ndarray, np.ndarray]:
        """Full and reduced generator components at ``x`` from the exact derivative of U.

        In the rotated frame the full generator has entries ``<0|K|1>`` and
        ``<1|K|1>`` in its second column (``K = U^-1 dU``); the reduced part keeps
        only ``<1|K|1>``.
        """
        x = np.asarray(x, dtype=float)
        u = qubit_rotation(x)
        ud = dagger(u)
        full, reduced = [], []
        for mu in directions:
            k = ud @ rotation_derivative(x, mu)
            frame_full = np.zeros(k.shape, dtype=complex)
            frame_full[..., :, 1] = k[..., :, 1]
            frame_red = np.zeros(k.shape, dtype=complex)
            frame_red[..., 1, 1] = k[..., 1, 1]
            full.append(u @ frame_full @ ud)
            reduced.append(u @ frame_red @ ud)
        return np.stack(full), np.stack(reduced)

    def adiabatic_coupling(self, x, velocity) -> np.ndarray:
        """``|<0| U^-1 dU/dx^mu |1> xdot^mu|`` along stacked points."""
        x = np.asarray(x, dtype=float)
        velocity = np.asarray(velocity, dtype=float)
        ud = dagger(qubit_rotation(x))
        total = sum(velocity[..., mu] * (ud @ rotation_derivative(x, mu))[..., 0, 1] for mu in range(3))
        return np.abs(total)

    def gauge_algebra_membership(self, x, op: np.ndarray, tol: float = 1e-10) -> dict[str, bool]:
        """Which of the model's explicit gauge algebras contain ``op`` at ``x``.

        In the rotated frame: lower triangular for the maximal algebra, with an
        imaginary (or zero) lower-right entry for the two isotropy pieces; the
        environment algebra is the imaginary multiples of the identity.
        """
        u = qubit_rotation(x)
        op = np.asarray(op, dtype=complex)
        m = dagger(u) @ op @ u
        scale = max(1.0, float(np.linalg.norm(op)))
        in_g = abs(m[0, 1]) <= tol * scale
        return {
            "g": bool(in_g),
            "j0": bool(in_g and abs(m[1, 1].real) <= tol * scale),
            "j1": bool(in_g and abs(m[1, 1]) <= tol * scale),
            "k": bool(np.linalg.norm(op - op[0, 0] * EYE2) <= tol * scale and abs(op[0, 0].real) <= tol * scale),
        }


def circle_curve(radius: float = 0.5, period: float = 1.0, plane: tuple[int, int] = (0, 2), dim: int = 3):
    """Closed loop through the origin in a coordinate plane, one turn per ``period``.

    The default plane is ``(x^1, x^3)``; the loop starts at the origin and its
    centre sits at ``radius`` along the first plane axis.
    """
    first, second = plane
    if first == second or not (0 <= first < dim and 0 <= second < dim):
        raise ValueError("plane must name two distinct parameter axes")

    def curve(t):
        th = 2 * np.pi * np.asarray(t, dtype=float) / period
        out = np.zeros(th.shape + (dim,))
        out[..., first] = radius - radius * np.cos(th)
        out[..., second] = radius * np.sin(th)
        return out

    return curve
