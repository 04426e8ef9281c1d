"""Closed-system and dissipative geometric phases along sampled paths.

These are the pure-state references the operator-valued machinery reduces
to.  A section along a path is a list of eigenvectors (or orthonormal frames
of a degenerate eigenspace) at increasing parameter values ``s``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .linalg import dagger


@dataclass(frozen=True)
class VectorSection:
    """Eigenvectors ``phi[k]`` at path parameters ``s[k]``.

    ``phi`` has shape ``(K, n)`` for a vector or ``(K, n, m)`` for a frame.
    For ``closed=True`` the path is a loop of length ``period`` and the
    samples are ``s[k]`` without repeating the starting point.
    """

    s: np.ndarray
    phi: np.ndarray
    energies: np.ndarray | None = None
    closed: bool = False
    period: float | None = None
    chart: str | None = None

    def __post_init__(self) -> None:
        s = np.asarray(self.s, dtype=float)
        phi = np.asarray(self.phi, dtype=complex)
        if phi.shape[0] != s.size:
            raise ValueError("one eigenvector per sample point")
        if np.any(np.diff(s) <= 0):
            raise ValueError("samples must be strictly increasing along the path")
        if self.closed and self.period is None:
            object.__setattr__(self, "period", float(s[-1] - s[0] + (s[1] - s[0])))
        object.__setattr__(self, "s", s)
        object.__setattr__(self, "phi", phi)

    def derivative(self) -> np.ndarray:
        if self.s.size < 3:
            raise ValueError("path too short: need at least 3 samples")
        if not self.closed:
            return np.gradient(self.phi, self.s, axis=0, edge_order=2)
        # periodic central differences on a uniform loop
        step = self.period / self.s.size
        return (np.roll(self.phi, -1, axis=0) - np.roll(self.phi, 1, axis=0)) / (2 * step)

    def integrate(self, values: np.ndarray) -> np.ndarray:
        """Integral of sampled values along the path (rectangle rule on loops)."""
        if self.closed:
            return np.sum(values, axis=0) * (self.period / self.s.size)
        return np.trapezoid(values, self.s, axis=0)


def _as_frames(phi: np.ndarray) -> np.ndarray:
    return phi[..., None] if phi.ndim == 2 else phi


def berry_connection(sec: VectorSection) -> np.ndarray:
    """Samples of ``<phi|d phi>`` along the path (``m x m`` blocks for frames)."""
    frames = _as_frames(sec.phi)
    conn = dagger(frames) @ _as_frames(sec.derivative())
    return conn[:, 0, 0] if sec.phi.ndim == 2 else conn


def dissipative_generator(sec: VectorSection) -> tuple[np.ndarray, np.ndarray]:
    """``<phi|d phi> / |phi|^2`` and its real part for an unnormalized section."""
    norms = np.sum(np.abs(sec.phi) ** 2, axis=1)
    if np.any(norms <= 1e-300):
        raise ValueError("degenerate section: zero-norm sample")
    a = np.einsum("ki,ki->k", sec.phi.conj(), sec.derivative()) / norms
    return a, a.real


def _lagrange_mid(tn: np.ndarray, vals: np.ndarray, tm: float) -> np.ndarray:
    out = np.zeros_like(vals[0])
    for i in range(tn.size):
        w = 1.0
        for j in range(tn.size):
            if j != i:
                w *= (tm - tn[j]) / (tn[i] - tn[j])
        out = out + w * vals[i]
    return out


def _midpoints(t: np.ndarray, vals: np.ndarray) -> np.ndarray:
    """Cubic (or lower-order on short pieces) interpolation at interval midpoints."""
    k_total = t.size
    mids = np.empty((k_total - 1,) + vals.shape[1:], dtype=complex)
    width = min(4, k_total)
    for k in range(k_total - 1):
        lo = min(max(k - (width // 2 - 1), 0), k_total - width)
        sl = slice(lo, lo + width)
        mids[k] = _lagrange_mid(t[sl], vals[sl], 0.5 * (t[k] + t[k + 1]))
    return mids


def _rk4_product(t, vals, mids, start, order: str, scale: complex = -1.0) -> np.ndarray:
    g = start
    for k in range(t.size - 1):
        h = t[k + 1] - t[k]
        a0, am, a1 = scale * vals[k], scale * mids[k], scale * vals[k + 1]
        if order == "left":
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
    return g


def ordered_exp(
    values: np.ndarray,
    t: np.ndarray,
    midpoints: np.ndarray | None = None,
    order: str = "left",
    scale: complex = -1.0,
) -> np.ndarray:
    """Solve ``G' = scale M(t) G`` (``order="left"``) or ``G' = scale G M(t)`` (``"right"``), ``G(0) = 1``.

    ``values`` are samples of ``M`` at times ``t``.  A repeated time splits
    the samples into independent pieces, which represents a jump of ``M``.
    Midpoint values come from ``midpoints`` when given, otherwise from cubic
    interpolation within each piece.
    """
    if order not in ("left", "right"):
        raise ValueError("order must be 'left' or 'right'")
    vals = np.asarray(values, dtype=complex)
    if vals.ndim == 1:
        vals = vals[:, None, None]
    t = np.asarray(t, dtype=float)
    if t.size < 2 or vals.shape[0] != t.size:
        raise ValueError("need at least 2 samples, one per time")
    if np.any(np.diff(t) < 0):
        raise ValueError("times must be nondecreasing")
    if midpoints is not None:
        midpoints = np.asarray(midpoints, dtype=complex)
        if midpoints.ndim == 1:
            midpoints = midpoints[:, None, None]
    g = np.eye(vals.shape[-1], dtype=complex)
    cuts = [0] + [k + 1 for k in np.flatnonzero(np.diff(t) == 0)] + [t.size]
    for lo, hi in zip(cuts[:-1], cuts[1:]):
        if hi - lo < 2:
            continue
        tp, vp = t[lo:hi], vals[lo:hi]
        mp = midpoints[lo : hi - 1] if midpoints is not None else _midpoints(tp, vp)
        piece = _rk4_product(tp, vp, mp, np.eye(vals.shape[-1], dtype=complex), order, scale)
        g = piece @ g if order == "left" else g @ piece
    return g


def path_ordered_exp(
    values: np.ndarray, t: np.ndarray, midpoints: np.ndarray | None = None, order: str = "left"
) -> np.ndarray:
    """Path-ordered ``exp(-int A)`` for pulled-back connection samples ``A(t) = A_mu xdot^mu``."""
    return ordered_exp(values, t, midpoints, order, scale=-1.0)


def loop_phase(sec: VectorSection) -> complex:
    """``int A`` along the section (for a closed loop, the Berry phase exponent)."""
    return complex(sec.integrate(berry_connection(sec)))


def stokes_check(phi: np.ndarray, axes: tuple[np.ndarray, np.ndarray]) -> dict[str, complex | float]:
    """Compare ``exp(loop integral of A)`` with ``exp(surface integral of dA)`` on a grid rectangle.

    ``phi`` has shape ``(n1, n2, n)``; the loop is the grid boundary traversed
    counter-clockwise in the ``(axis 1, axis 2)`` plane.  Both sides use the
    same finite-difference connection and the trapezoidal rule.
    """
    x1, x2 = (np.asarray(a, dtype=float) for a in axes)
    phi = np.asarray(phi, dtype=complex)
    if min(x1.size, x2.size) < 3:
        raise ValueError("path too short: need at least 3 samples")
    d1 = np.gradient(phi, x1, axis=0, edge_order=2)
    d2 = np.gradient(phi, x2, axis=1, edge_order=2)
    a1 = np.einsum("abi,abi->ab", phi.conj(), d1)
    a2 = np.einsum("abi,abi->ab", phi.conj(), d2)
    curl = np.gradient(a2, x1, axis=0, edge_order=2) - np.gradient(a1, x2, axis=1, edge_order=2)
    surface = np.trapezoid(np.trapezoid(curl, x2, axis=1), x1)
    loop = (
        np.trapezoid(a1[:, 0], x1)
        + np.trapezoid(a2[-1, :], x2)
        - np.trapezoid(a1[:, -1], x1)
        - np.trapezoid(a2[0, :], x2)
    )
    return {
        "loop": complex(loop),
        "surface": complex(surface),
        "residual": float(abs(np.exp(loop) - np.exp(surface))),
    }


def two_chart_transport(
    frames_a: np.ndarray, frames_b: np.ndarray, t: np.ndarray, switch: int, c0: np.ndarray
) -> np.ndarray:
    """Coefficients in chart ``b`` after transporting ``c0`` from chart ``a``.

    Chart ``a`` is used on ``t[:switch+1]`` and chart ``b`` afterwards; at the
    switch the coefficients change by ``g^{ba} = <phi^b|phi^a>``.
    """
    sec_a = VectorSection(t[: switch + 1], frames_a[: switch + 1])
    sec_b = VectorSection(t[switch:], frames_b[switch:])
    g_ba = dagger(frames_b[switch]) @ frames_a[switch]
    first = path_ordered_exp(berry_connection(sec_a), sec_a.s)
    second = path_ordered_exp(berry_connection(sec_b), sec_b.s)
    return second @ g_ba @ first @ np.asarray(c0, dtype=complex)
