"""Eigenoperators of a universe Hamiltonian and their validation.

An eigenoperator seed ``E0`` on the system commutes with ``H`` once lifted to
``E0 (x) 1``.  Every eigenpair ``(lam, phi)`` of ``H - E0 (x) 1`` then gives an
eigenoperator ``E = E0 + lam`` with ``H phi = (E (x) 1) phi``.  Records are
computed pointwise; fields over grids or paths keep the eigenvector phase
continuous by aligning each sample with an already visited neighbour.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .cstar import lindbladian_apply, lindbladian_lifted, star_norm_sq
from .forms import Grid
from .linalg import BipartiteVector, dagger, herm_eig

BRANCH_OVERLAP_MIN = 0.5
NULL_TOL = 1e-10


def evaluate_family(family: Callable, xs: np.ndarray) -> np.ndarray:
    """Stack ``family(x)`` over points ``xs`` of shape ``(..., d)``.

    Families flagged with ``batched = True`` receive the whole array at once.
    """
    xs = np.asarray(xs, dtype=float)
    if getattr(family, "batched", False):
        return np.asarray(family(xs))
    flat = xs.reshape(-1, xs.shape[-1])
    out = np.stack([np.asarray(family(x), dtype=complex) for x in flat])
    return out.reshape(xs.shape[:-1] + out.shape[1:])


class BatchedFamily:
    """Wrap a function that already accepts stacked parameter points."""

    batched = True

    def __init__(self, fn: Callable[[np.ndarray], np.ndarray]):
        self.fn = fn

    def __call__(self, x) -> np.ndarray:
        return self.fn(np.asarray(x, dtype=float))


def commutant_basis(h: np.ndarray, n_s: int, n_e: int, tol: float = NULL_TOL) -> list[np.ndarray]:
    """Hilbert-Schmidt orthonormal basis of ``{E0 : [E0 (x) 1, H] = 0}``."""
    h = np.asarray(h, dtype=complex)
    eye_e = np.eye(n_e)
    cols = []
    for i in range(n_s):
        for j in range(n_s):
            unit = np.zeros((n_s, n_s), dtype=complex)
            unit[i, j] = 1.0
            lifted = np.kron(unit, eye_e)
            cols.append((lifted @ h - h @ lifted).reshape(-1))
    m = np.stack(cols, axis=1)
    _, s, vh = np.linalg.svd(m)
    s_full = np.zeros(n_s * n_s)
    s_full[: s.size] = s
    cut = tol * (s_full[0] if s_full[0] > 0 else 1.0)
    null = vh.conj().T[:, s_full <= cut]
    return [null[:, k].reshape(n_s, n_s) for k in range(null.shape[1])]


def _check_seed(h: np.ndarray, e0: np.ndarray, tol: float) -> int:
    n_s = e0.shape[0]
    if h.shape[0] % n_s:
        raise ValueError("bad bipartite shape: seed does not divide the universe dimension")
    n_e = h.shape[0] // n_s
    if np.linalg.norm(e0 - e0.conj().T) > tol * max(1.0, np.linalg.norm(e0)):
        raise ValueError("not an eigenoperator seed: E0 must be Hermitian")
    lifted = np.kron(e0, np.eye(n_e))
    scale = max(1.0, np.linalg.norm(h, 2)) * max(1.0, np.linalg.norm(e0, 2))
    if np.linalg.norm(lifted @ h - h @ lifted, 2) > tol * scale:
        raise ValueError("not an eigenoperator seed: [E0 (x) 1, H] != 0")
    return n_e


def solve_star_eigen(h: np.ndarray, e0: np.ndarray, tol: float = 1e-10) -> list[tuple[float, np.ndarray]]:
    """All eigenpairs ``(lam, phi)`` of ``H - E0 (x) 1``, ascending in ``lam``."""
    h = np.asarray(h, dtype=complex)
    e0 = np.asarray(e0, dtype=complex)
    n_e = _check_seed(h, e0, tol)
    w, v = herm_eig(h - np.kron(e0, np.eye(n_e)))
    return [(float(w[k]), v[:, k]) for k in range(w.size)]


@dataclass(frozen=True)
class EigenRecord:
    x: np.ndarray
    E0: np.ndarray
    lam: float
    phi: BipartiteVector
    E: np.ndarray
    rho: np.ndarray
    projector: np.ndarray
    multiplicity: int = 1
    flags: tuple[str, ...] = field(default_factory=tuple)

    @property
    def possibly_degenerate(self) -> bool:
        return self.multiplicity > 1


Selector = int | Callable[[np.ndarray, np.ndarray], int] | None


def _pick(w: np.ndarray, v: np.ndarray, selector: Selector, previous: np.ndarray | None) -> int:
    if selector is None:
        if previous is None:
            raise ValueError("branch selector required without a previous sample")
        return int(np.argmax(np.abs(v.conj().T @ previous)))
    if callable(selector):
        return int(selector(w, v))
    return int(selector)


def _fix_phase(vec: np.ndarray, previous: np.ndarray | None) -> np.ndarray:
    if previous is None:
        # gauge convention: the largest amplitude is real and positive
        k = int(np.argmax(np.abs(vec) - 1e-12 * np.arange(vec.size)))
        return vec * (abs(vec[k]) / vec[k])
    ov = np.vdot(previous, vec)
    if abs(ov) < BRANCH_OVERLAP_MIN:
        raise ValueError(f"branch tracking lost: overlap {abs(ov):.3g} < {BRANCH_OVERLAP_MIN}")
    return vec * (abs(ov) / ov)


def _record_from_spectrum(
    x, e0: np.ndarray, w: np.ndarray, v: np.ndarray, n_e: int, selector: Selector, previous, deg_tol: float
) -> EigenRecord:
    k = _pick(w, v, selector, previous)
    lam = float(w[k])
    phi = _fix_phase(v[:, k], previous)
    scale = max(1.0, float(np.max(np.abs(w))))
    same = np.abs(w - lam) <= deg_tol * scale
    basis = v[:, same]
    proj = basis @ basis.conj().T
    n_s = e0.shape[0]
    e = e0 + lam * np.eye(n_s)
    mult = int(same.sum())
    return EigenRecord(
        x=np.asarray(x, dtype=float),
        E0=e0,
        lam=lam,
        phi=BipartiteVector(n_s, n_e, phi),
        E=e,
        rho=star_norm_sq(phi, n_s, n_e),
        projector=proj,
        multiplicity=mult,
        flags=("possibly degenerate",) if mult > 1 else (),
    )


def build_eigen_record(
    h_family: Callable,
    e0_family: Callable,
    branch_selector: Selector,
    x,
    previous: np.ndarray | BipartiteVector | None = None,
    deg_tol: float = 1e-8,
) -> EigenRecord:
    """Solve at ``x`` and select one branch.

    ``branch_selector`` is an index into the ascending spectrum, a callable
    ``(eigenvalues, eigenvectors) -> index``, or ``None`` to follow
    ``previous`` by maximal overlap.
    """
    if isinstance(previous, BipartiteVector):
        previous = previous.amplitudes
    x = np.asarray(x, dtype=float)
    h = np.asarray(h_family(x), dtype=complex)
    e0 = np.asarray(e0_family(x), dtype=complex)
    n_e = _check_seed(h, e0, 1e-10)
    w, v = herm_eig(h - np.kron(e0, np.eye(n_e)))
    return _record_from_spectrum(x, e0, w, v, n_e, branch_selector, previous, deg_tol)


def track_branch(
    h_family: Callable, e0_family: Callable, points: np.ndarray, branch_selector: Selector
) -> list[EigenRecord]:
    """Records along a sequence of points, the branch followed by overlap after the first."""
    records: list[EigenRecord] = []
    for k, x in enumerate(np.asarray(points, dtype=float)):
        prev = records[-1].phi.amplitudes if records else None
        records.append(build_eigen_record(h_family, e0_family, branch_selector if k == 0 else None, x, prev))
    return records


def validate_eigen_record(rec: EigenRecord, h: np.ndarray, tol: float = 1e-10) -> dict:
    """Residuals of every defining property of an eigenoperator record.

    Each residual comes with the norm scale it is compared against; the
    ``passed`` map applies ``residual <= tol * scale``.
    """
    h = np.asarray(h, dtype=complex)
    n_s, n_e = rec.phi.n_s, rec.phi.n_e
    phi = rec.phi.amplitudes
    e = np.asarray(rec.E, dtype=complex)
    big = np.kron(e, np.eye(n_e))
    norm_h = max(1.0, float(np.linalg.norm(h, 2)))
    norm_e = max(1.0, float(np.linalg.norm(e, 2)))
    lind = lindbladian_apply(h, phi, n_s, n_e)
    rho = rec.rho
    e_rho = e @ rho - rho @ e.conj().T
    second_lhs = lindbladian_lifted(h, phi, n_s, n_e, e)
    second_rhs = e @ lind - lind @ e.conj().T
    proj = rec.projector
    e_phi = big @ phi
    residuals = {
        "eigen": float(np.linalg.norm(h @ phi - e_phi)),
        "commutation": float(np.linalg.norm(big @ h - h @ big, 2)),
        "trace_antihermitian": float(abs(np.trace(rho @ (e - e.conj().T)))),
        "lindblad_eigen": float(np.linalg.norm(lind - e_rho, 2)),
        "second_order": float(np.linalg.norm(second_lhs - second_rhs, 2)),
        "g_membership": float(np.linalg.norm(e_phi - proj @ e_phi)),
    }
    scales = {
        "eigen": norm_h,
        "commutation": norm_h * norm_e,
        "trace_antihermitian": norm_e,
        "lindblad_eigen": norm_h,
        "second_order": norm_h * norm_e,
        "g_membership": norm_e,
    }
    return {
        "residuals": residuals,
        "scales": scales,
        "passed": {k: residuals[k] <= tol * scales[k] for k in residuals},
        "possibly_degenerate": rec.possibly_degenerate,
    }


@dataclass
class SectionField:
    """A *-eigenvector and its eigen data sampled on a grid (a chart-local section)."""

    grid: Grid
    n_s: int
    n_e: int
    phi: np.ndarray
    E: np.ndarray
    projector: np.ndarray
    lam: np.ndarray | None = None
    chart: str | None = None

    @property
    def rho(self) -> np.ndarray:
        return star_norm_sq(self.phi, self.n_s, self.n_e, tol=1e-8)

    def with_phase(self, theta: np.ndarray, chart: str | None = None) -> SectionField:
        """Same eigen data, section multiplied by ``exp(i theta)`` pointwise."""
        return SectionField(
            self.grid,
            self.n_s,
            self.n_e,
            self.phi * np.exp(1j * np.asarray(theta))[..., None],
            self.E,
            self.projector,
            self.lam,
            chart,
        )

    def record_at(self, index: tuple[int, ...]) -> EigenRecord:
        e = self.E[index]
        lam = float(self.lam[index]) if self.lam is not None else float(np.trace(e).real / self.n_s)
        return EigenRecord(
            x=self.grid.points()[index],
            E0=e - lam * np.eye(self.n_s),
            lam=lam,
            phi=BipartiteVector(self.n_s, self.n_e, self.phi[index]),
            E=e,
            rho=self.rho[index],
            projector=self.projector[index],
        )


def _walk_order(shape: tuple[int, ...]) -> list[tuple[tuple[int, ...], tuple[int, ...] | None]]:
    """Visit every grid index once; pair each with an already visited neighbour."""
    order = []
    for idx in np.ndindex(*shape):
        parent = None
        for ax in reversed(range(len(shape))):
            if idx[ax] > 0:
                p = list(idx)
                p[ax] -= 1
                parent = tuple(p)
                break
        order.append((idx, parent))
    return order


def solve_section_on_grid(
    h_family: Callable,
    e0_family: Callable,
    grid: Grid,
    branch_selector: Selector,
    chart: str | None = None,
    deg_tol: float = 1e-8,
    points: np.ndarray | None = None,
) -> SectionField:
    """Numerically solved, phase-continuous section over every grid point.

    ``points`` overrides the parameter point at each grid index; a 1-D time
    grid with the points of a path gives a section along that path.
    """
    pts = grid.points() if points is None else np.asarray(points, dtype=float)
    hs = evaluate_family(h_family, pts)
    e0s = evaluate_family(e0_family, pts)
    n_s = e0s.shape[-1]
    n_e = hs.shape[-1] // n_s
    shifted = hs - np.einsum("...ij,ab->...iajb", e0s, np.eye(n_e)).reshape(hs.shape)
    w_all, v_all = np.linalg.eigh(0.5 * (shifted + dagger(shifted)))
    phi = np.zeros(grid.shape + (n_s * n_e,), dtype=complex)
    es = np.zeros(grid.shape + (n_s, n_s), dtype=complex)
    projs = np.zeros(grid.shape + (n_s * n_e,) * 2, dtype=complex)
    lams = np.zeros(grid.shape)
    for idx, parent in _walk_order(grid.shape):
        prev = phi[parent] if parent is not None else None
        rec = _record_from_spectrum(
            pts[idx], e0s[idx], w_all[idx], v_all[idx], n_e, branch_selector if prev is None else None, prev, deg_tol
        )
        phi[idx] = rec.phi.amplitudes
        es[idx] = rec.E
        projs[idx] = rec.projector
        lams[idx] = rec.lam
    return SectionField(grid, n_s, n_e, phi, es, projs, lams, chart)
