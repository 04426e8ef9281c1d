"""Exact universe dynamics along a control path and its adiabatic approximation.

The adiabatic state is ``rho(t) = g(t) rho_E(x(t)) g(t)^dagger`` with
``g = T exp(-(i/hbar) int E dt) . P exp(-int (A + eta))``.  The dynamical
factor is time-ordered with later times on the left; the geometric factor is
ordered with later times on the right, so that ``g rho_E g^dagger`` stays
constant when the full generator is used.

Sections along a path live on a fine time grid: even nodes are RK4 step
boundaries, odd nodes supply the midpoint stages, and every ``2 * substeps``-th
node is an output time.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.interpolate
import scipy.linalg

from .baseline import ordered_exp
from .connection import generator_from_section, split_generator
from .cstar import star_norm_sq
from .eigen import SectionField, evaluate_family
from .forms import Grid
from .linalg import dagger

NORM_DRIFT_MAX = 1e-6


@dataclass(frozen=True)
class ParameterPath:
    """``t -> x(t)`` on ``[0, T]`` sampled at ``N + 1`` equally spaced times."""

    curve: Callable[[np.ndarray], np.ndarray]
    T: float
    N: int

    def __post_init__(self) -> None:
        if not self.T > 0:
            raise ValueError("duration must be positive")
        if self.N < 2:
            raise ValueError("need at least 2 steps")

    @classmethod
    def from_waypoints(cls, waypoints, T: float, N: int, closed: bool = False) -> ParameterPath:
        """Cubic spline through waypoints spread evenly over ``[0, T]``."""
        pts = np.asarray(waypoints, dtype=float)
        if closed and not np.allclose(pts[0], pts[-1]):
            pts = np.vstack([pts, pts[:1]])
        knots = np.linspace(0.0, T, len(pts))
        spline = scipy.interpolate.CubicSpline(knots, pts, axis=0, bc_type="periodic" if closed else "not-a-knot")
        return cls(lambda t: spline(np.asarray(t, dtype=float)), T, N)

    @classmethod
    def stationary(cls, x, T: float, N: int) -> ParameterPath:
        x = np.asarray(x, dtype=float)
        return cls(lambda t: np.broadcast_to(x, np.shape(t) + x.shape).copy(), T, N)

    @property
    def dt(self) -> float:
        return self.T / self.N

    @property
    def dim(self) -> int:
        return int(np.asarray(self.curve(np.zeros(1))).shape[-1])

    def times(self, refine: int = 1) -> np.ndarray:
        return np.linspace(0.0, self.T, self.N * refine + 1)

    def points(self, t) -> np.ndarray:
        return np.asarray(self.curve(np.asarray(t, dtype=float)), dtype=float)

    def velocity(self, t) -> np.ndarray:
        """Central-difference velocity with a step far below the sample spacing."""
        t = np.asarray(t, dtype=float)
        h = 1e-4 * self.dt
        v = (self.points(t + h) - self.points(t - h)) / (2 * h)
        if not np.all(np.isfinite(v)):
            raise ValueError("non-finite path velocity")
        return v

    def fine_grid(self, substeps: int = 1) -> Grid:
        """Time grid with ``substeps`` RK4 steps per interval and their midpoints."""
        return Grid((self.times(2 * substeps),), (0,), np.zeros(1))


@dataclass
class SchrodingerResult:
    t: np.ndarray
    psi: np.ndarray
    norm_drift: np.ndarray


def schrodinger_integrate(
    h_family: Callable, psi0, path: ParameterPath, substeps: int = 10, hbar: float = 1.0, renormalize: bool = False
) -> SchrodingerResult:
    """RK4 for ``i hbar dpsi/dt = H(x(t)) psi`` with ``substeps`` steps per path interval."""
    psi = np.array(getattr(psi0, "amplitudes", psi0), dtype=complex)
    n_steps = path.N * substeps
    fine_t = np.linspace(0.0, path.T, 2 * n_steps + 1)
    hs = evaluate_family(h_family, path.points(fine_t))
    if np.linalg.norm(hs - dagger(hs)) > 1e-10 * max(1.0, float(np.linalg.norm(hs))):
        raise ValueError("not Hermitian")
    # a constant energy shift only changes the global phase, restored exactly below;
    # centring the spectrum keeps RK4 closer to unitary
    shift = float(np.mean(np.trace(hs, axis1=-2, axis2=-1).real) / hs.shape[-1])
    gens = (-1j / hbar) * (hs - shift * np.eye(hs.shape[-1]))
    h = path.T / n_steps
    out = np.empty((path.N + 1, psi.size), dtype=complex)
    out[0] = psi
    for k in range(n_steps):
        a0, am, a1 = gens[2 * k], gens[2 * k + 1], gens[2 * k + 2]
        k1 = a0 @ psi
        k2 = am @ (psi + 0.5 * h * k1)
        k3 = am @ (psi + 0.5 * h * k2)
        k4 = a1 @ (psi + h * k3)
        psi = psi + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        if renormalize:
            psi = psi / np.linalg.norm(psi)
        if (k + 1) % substeps == 0:
            out[(k + 1) // substeps] = psi
    out *= np.exp(-1j * shift * path.times() / hbar)[:, None]
    drift = np.abs(np.linalg.norm(out, axis=1) - 1.0)
    if drift.max() > NORM_DRIFT_MAX:
        raise ValueError(f"refine N: norm drift {drift.max():.2e} exceeds {NORM_DRIFT_MAX:g}")
    return SchrodingerResult(path.times(), out, drift)


def ordered_series(
    values: np.ndarray, t: np.ndarray, mids: np.ndarray, order: str, scale: complex, stride: int = 1
) -> np.ndarray:
    """Cumulative ordered exponentials, recorded every ``stride`` RK4 steps.

    ``order="left"`` solves ``G' = scale M G``; ``"right"`` solves ``G' = scale G M``.
    """
    n = values.shape[-1]
    steps = t.size - 1
    if steps % stride:
        raise ValueError("stride must divide the number of steps")
    out = np.empty((steps // stride + 1, n, n), dtype=complex)
    g = np.eye(n, dtype=complex)
    out[0] = g
    vals = scale * np.asarray(values, dtype=complex)
    mid = scale * np.asarray(mids, dtype=complex)
    dts = np.diff(t)
    left = order == "left"
    for k in range(steps):
        h = dts[k]
        a0, am, a1 = vals[k], mid[k], vals[k + 1]
        if left:
            k1 = a0 @ g
            k2 = am @ (g + 0.5 * h * k1)
            k3 = am @ (g + 0.5 * h * k2)
            k4 = a1 @ (g + h * k3)
        else:
            k1 = g @ a0
            k2 = (g + 0.5 * h * k1) @ am
            k3 = (g + 0.5 * h * k2) @ am
            k4 = (g + h * k3) @ a1
        g = g + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        if (k + 1) % stride == 0:
            out[(k + 1) // stride] = g
    return out


def time_ordered_exp(
    e_samples: np.ndarray, t: np.ndarray, hbar: float = 1.0, midpoints: np.ndarray | None = None
) -> np.ndarray:
    """``T exp(-(i/hbar) int E dt)`` with later times acting on the left."""
    return ordered_exp(e_samples, t, midpoints, "left", scale=-1j / hbar)


@dataclass
class TransportResult:
    t: np.ndarray
    g: np.ndarray
    rho: np.ndarray
    trace_residual: np.ndarray
    diagnostic: np.ndarray
    leakage: np.ndarray | None = None
    warnings: list[str] = field(default_factory=list)

    @property
    def max_diagnostic(self) -> float:
        return float(self.diagnostic.max())


def path_generators(sec: SectionField) -> dict[str, np.ndarray]:
    """Pulled-back generators ``G_mu xdot^mu`` on a path section's fine time grid."""
    pot, rem = split_generator(sec, 0)
    return {"full": generator_from_section(sec, 0), "reduced": pot, "remainder": rem}


def adiabaticity_diagnostic(remainder: np.ndarray, velocity: np.ndarray | None = None) -> tuple[float, np.ndarray]:
    """``max_t |R_mu(x(t)) xdot^mu(t)|`` (spectral norm) and the per-sample series.

    ``remainder`` is either already contracted with the velocity, shape
    ``(K, n, n)``, or has components ``(K, d, n, n)`` with ``velocity`` ``(K, d)``.
    """
    r = np.asarray(remainder)
    if velocity is not None:
        r = np.einsum("kmij,km->kij", r, np.asarray(velocity))
    series = np.linalg.norm(r, ord=2, axis=(-2, -1))
    return float(series.max()) if series.size else 0.0, series


def adiabatic_transport(
    sec: SectionField,
    generator: str = "reduced",
    eta: np.ndarray | None = None,
    hbar: float = 1.0,
    substeps: int = 1,
    adiabatic_threshold: float = 0.1,
) -> TransportResult:
    """Transported state ``g rho_E g^dagger`` along a path section.

    ``sec`` lives on ``ParameterPath.fine_grid(substeps)``; results are reported
    at the path's own sample times.  ``generator="reduced"`` uses the
    eigenspace part ``A`` of the generator and ``"full"`` the whole generator.
    ``eta`` adds an isotropy-valued correction sampled on the same fine grid.
    The scalar part of ``E`` contributes the exact phase ``exp(-(i/hbar) int lam)``.
    """
    if generator not in ("reduced", "full"):
        raise ValueError("generator must be 'reduced' or 'full'")
    t_fine = sec.grid.axes[0]
    if (t_fine.size - 1) % (2 * substeps):
        raise ValueError("fine time grid does not match the substep count")
    gens = path_generators(sec)
    m = gens[generator] if eta is None else gens[generator] + eta
    t_rk = t_fine[::2]
    geo = ordered_series(m[::2], t_rk, m[1::2], "right", -1.0, substeps)
    n = sec.n_s
    # the scalar part of E commutes with everything: integrate it exactly (Simpson)
    # and time-order only the traceless remainder, which keeps RK4 near unitary
    scalar = np.trace(sec.E, axis1=-2, axis2=-1) / n
    traceless = sec.E - scalar[..., None, None] * np.eye(n)
    dyn = ordered_series(traceless[::2], t_rk, traceless[1::2], "left", -1j / hbar, substeps)
    widths = t_fine[2::2] - t_fine[:-2:2]
    simpson = widths / 6 * (scalar[:-2:2] + 4 * scalar[1::2] + scalar[2::2])
    phase_int = np.concatenate([[0.0], np.cumsum(simpson)])
    dyn = dyn * np.exp(-1j * phase_int[::substeps] / hbar)[:, None, None]
    g = dyn @ geo
    stride = 2 * substeps
    t = t_fine[::stride]
    rho = g @ sec.rho[::stride] @ dagger(g)
    trace_res = np.abs(np.trace(rho, axis1=-2, axis2=-1) - 1.0)
    diag_max, diag = adiabaticity_diagnostic(gens["remainder"][::stride])
    notes = []
    if diag_max > adiabatic_threshold:
        notes.append(f"adiabatic condition weak: max |R xdot| = {diag_max:.3g}")
        warnings.warn(notes[-1], stacklevel=2)
    return TransportResult(t, g, rho, trace_res, diag, warnings=notes)


def leakage(psi: np.ndarray, projector: np.ndarray) -> np.ndarray:
    """``1 - <<psi|P_E|psi>>`` per sample."""
    return 1.0 - np.einsum("ki,kij,kj->k", psi.conj(), projector, psi).real


def fidelity(a: np.ndarray, b: np.ndarray) -> float:
    root = scipy.linalg.sqrtm(a)
    val = np.trace(scipy.linalg.sqrtm(root @ b @ root)).real
    return float(min(1.0, val**2))


def transport_error(exact: SchrodingerResult, transported: TransportResult, n_s: int, n_e: int) -> dict:
    """Trace-distance series between exact reduced states and transported states."""
    if exact.t.shape != transported.t.shape or not np.allclose(exact.t, transported.t, rtol=0, atol=1e-12):
        raise ValueError("time-grid mismatch")
    rho_exact = star_norm_sq(exact.psi, n_s, n_e, tol=1e-6)
    diff = rho_exact - transported.rho
    dist = 0.5 * np.linalg.svd(diff, compute_uv=False).sum(axis=-1)
    return {
        "trace_distance": dist,
        "max_trace_distance": float(dist.max()),
        "final_fidelity": fidelity(rho_exact[-1], transported.rho[-1]),
    }


def parallel_transport_check(
    generator_fine: np.ndarray, rho_fine: np.ndarray, t_fine: np.ndarray, substeps: int = 1
) -> dict:
    """Largest time derivative of ``P exp(-int G) rho_E (P exp(-int G))^dagger``.

    ``generator_fine`` is the pulled-back generator (``A + eta`` or similar)
    on the fine grid.  Zero derivative means ``G`` parallel-transports ``rho_E``.
    """
    t_rk = t_fine[::2]
    g = ordered_series(generator_fine[::2], t_rk, generator_fine[1::2], "right", -1.0, substeps)
    stride = 2 * substeps
    t = t_fine[::stride]
    sigma = g @ rho_fine[::stride] @ dagger(g)
    deriv = np.gradient(sigma, t, axis=0, edge_order=2)
    series = np.linalg.norm(deriv, ord=2, axis=(-2, -1))
    return {"residual": float(series.max()), "series": series}


TRANSPORT_COLUMNS = ("t", "trace_residual", "leakage", "trace_distance", "diagnostic")


def write_transport_csv(path, t, trace_residual, leakage_series, trace_distance, diagnostic) -> None:
    """One row per sample, 17 significant digits, RFC-4180 quoting."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\r\n")
        w.writerow(TRANSPORT_COLUMNS)
        for row in zip(t, trace_residual, leakage_series, trace_distance, diagnostic):
            w.writerow([f"{float(v):.17g}" for v in row])
