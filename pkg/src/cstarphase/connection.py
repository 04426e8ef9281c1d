"""Phase generators of a *-eigenvector section and their curvatures.

For a section ``phi`` with reduced state ``rho`` the generator solves
``G_mu rho = tr_E |d_mu phi>><<phi|``.  The minimal-norm solution (zero on
``ker rho``) is returned.  Projecting ``d phi`` onto the *-eigenspace and onto
its complement splits the generator into a gauge potential ``A`` and a
remainder ``R``; ``R`` measures non-adiabatic coupling.
"""

from __future__ import annotations

import numpy as np

from .cstar import star_inner
from .eigen import SectionField
from .forms import (
    MatrixOneForm,
    MatrixThreeForm,
    MatrixTwoForm,
    bracket,
    exterior_derivative,
    field_diff_one_form,
    wedge,
)
from .linalg import RANK_TOL, dagger, pinv

SOLVE_TOL = 1e-8


def _ranks(rho: np.ndarray, rank_tol: float) -> np.ndarray:
    w = np.linalg.eigvalsh(0.5 * (rho + dagger(rho)))
    return np.sum(w > rank_tol * w[..., -1:], axis=-1)


def _check_rank(rho: np.ndarray, rank_tol: float) -> None:
    ranks = _ranks(rho, rank_tol)
    if ranks.size and ranks.min() != ranks.max():
        raise ValueError(f"rank change of the mixed state across samples ({ranks.min()} to {ranks.max()})")


def solve_generator_equation(rhs: np.ndarray, rho: np.ndarray, rank_tol: float = RANK_TOL) -> np.ndarray:
    """Minimal-norm ``G`` with ``G rho = rhs``, after checking that a solution exists.

    A solution exists exactly when ``rhs`` annihilates ``ker rho``.
    """
    rho_inv = pinv(rho, rank_tol)
    kernel_proj = np.eye(rho.shape[-1]) - rho @ rho_inv
    leak = np.linalg.norm(rhs @ kernel_proj, axis=(-2, -1))
    scale = np.maximum(1.0, np.linalg.norm(rhs, axis=(-2, -1)))
    if np.any(leak > SOLVE_TOL * scale):
        raise ValueError("no solution: inconsistent right-hand side (support on ker rho)")
    return rhs @ rho_inv


def generator_from_section(sec: SectionField, direction: int, rank_tol: float = RANK_TOL) -> np.ndarray:
    """Component ``direction`` of the full phase generator at every grid sample."""
    rho = sec.rho
    _check_rank(rho, rank_tol)
    dphi = sec.grid.diff(sec.phi, direction)
    return solve_generator_equation(star_inner(sec.phi, dphi, sec.n_s, sec.n_e), rho, rank_tol)


def split_generator(sec: SectionField, direction: int, rank_tol: float = RANK_TOL) -> tuple[np.ndarray, np.ndarray]:
    """``(A_mu, R_mu)``: eigenspace and complementary parts of the generator."""
    rho = sec.rho
    _check_rank(rho, rank_tol)
    dphi = sec.grid.diff(sec.phi, direction)
    inside = np.einsum("...ij,...j->...i", sec.projector, dphi)
    outside = dphi - inside
    a = solve_generator_equation(star_inner(sec.phi, inside, sec.n_s, sec.n_e), rho, rank_tol)
    r = solve_generator_equation(star_inner(sec.phi, outside, sec.n_s, sec.n_e), rho, rank_tol)
    return a, r


def generator_forms(sec: SectionField, rank_tol: float = RANK_TOL) -> tuple[MatrixOneForm, MatrixOneForm, MatrixOneForm]:
    """Full generator, gauge potential and remainder as 1-forms on the section's grid."""
    full, pot, rem = {}, {}, {}
    for mu in range(sec.grid.ndim):
        full[(mu,)] = generator_from_section(sec, mu, rank_tol)
        pot[(mu,)], rem[(mu,)] = split_generator(sec, mu, rank_tol)
    g, c = sec.grid, sec.chart
    return MatrixOneForm(g, full, c), MatrixOneForm(g, pot, c), MatrixOneForm(g, rem, c)


def breve_generator(rho: np.ndarray, grid, direction: int, rank_tol: float = RANK_TOL) -> np.ndarray:
    """``(1/2) d_mu rho rho^-1`` for a full-rank mixed-state field."""
    w = np.linalg.eigvalsh(0.5 * (rho + dagger(rho)))
    if np.any(w[..., 0] <= rank_tol * w[..., -1]):
        raise ValueError("breve generator undefined; use generator_from_section")
    return 0.5 * grid.diff(rho, direction) @ np.linalg.inv(rho)


def isotropy_residual(op: np.ndarray, rho: np.ndarray) -> np.ndarray:
    """Pointwise ``|op rho + rho op^dagger|``; zero for the isotropy algebra of ``rho``."""
    return np.linalg.norm(op @ rho + rho @ dagger(op), ord=2, axis=(-2, -1))


def generator_relation_residual(sec: SectionField, full: MatrixOneForm) -> np.ndarray:
    """Pointwise max over directions of ``|d rho - G rho - rho G^dagger|``."""
    rho = sec.rho
    out = np.zeros(sec.grid.shape)
    for mu in range(sec.grid.ndim):
        g = full[mu]
        res = sec.grid.diff(rho, mu) - g @ rho - rho @ dagger(g)
        out = np.maximum(out, np.linalg.norm(res, ord=2, axis=(-2, -1)))
    return out


def antiselfadjoint_trace(full: MatrixOneForm, rho: np.ndarray) -> np.ndarray:
    """Pointwise max over directions of ``|tr(rho (G + G^dagger))|``."""
    vals = [np.abs(np.trace(rho @ (full[m] + dagger(full[m])), axis1=-2, axis2=-1)) for m in range(full.grid.ndim)]
    return np.max(vals, axis=0)


def gauge_transform_generator(
    full: MatrixOneForm, g: np.ndarray, eta: MatrixOneForm | None = None
) -> MatrixOneForm:
    """``g G g^-1 + dg g^-1 + g eta g^-1`` with ``dg`` by finite differences."""
    det = np.abs(np.linalg.det(g))
    if np.any(det < 1e-12):
        raise ValueError("singular g")
    g_inv = np.linalg.inv(g)
    out = full.similar(g, g_inv) + field_diff_one_form(full.grid, g, full.chart).right(g_inv)
    if eta is not None:
        out = out + eta.similar(g, g_inv)
    return out


def curvatures(
    full: MatrixOneForm, pot: MatrixOneForm, rem: MatrixOneForm
) -> tuple[MatrixTwoForm, MatrixTwoForm, MatrixThreeForm | None]:
    """Curving ``B``, fake curvature ``F`` and true curvature ``H = dB - [A, B]``.

    ``H`` is ``None`` on grids with fewer than three axes.
    """
    curving = exterior_derivative(full) - wedge(full, full)
    fake = exterior_derivative(rem) - bracket(pot, rem) - wedge(rem, rem)
    true = None
    if full.grid.ndim >= 3:
        true = exterior_derivative(curving) - bracket(pot, curving)
    return curving, fake, true


def curvature_identities(
    full: MatrixOneForm, pot: MatrixOneForm, rem: MatrixOneForm, rho: np.ndarray
) -> dict[str, float]:
    """Max residuals of the curvature identities over the whole grid.

    ``curving_isotropy``: ``B rho + rho B^dagger``.
    ``curving_split``: ``B - (dA - A^A + F)``.
    ``true_curvature``: ``(dB - [A, B]) - (dF - [A, F])`` (3-D grids only).
    """
    curving, fake, _ = curvatures(full, pot, rem)
    iso = max(float(np.max(isotropy_residual(curving.components[k], rho))) for k in curving.keys())
    split = curving - (exterior_derivative(pot) - wedge(pot, pot) + fake)
    out = {"curving_isotropy": iso, "curving_split": split.max_norm()}
    if full.grid.ndim >= 3:
        lhs = exterior_derivative(curving) - bracket(pot, curving)
        rhs = exterior_derivative(fake) - bracket(pot, fake)
        out["true_curvature"] = (lhs - rhs).max_norm()
    return out
