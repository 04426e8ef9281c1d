"""Operator-valued inner product on S (x) E and the reduced dynamics it induces.

``star_inner(psi, phi)`` is the environment partial trace of ``|phi>><<psi|``.
It is linear in ``phi`` and antilinear in ``psi``, and its value on the diagonal
is the reduced density matrix.  All functions also accept raw amplitude arrays
with leading batch axes, given the factor dimensions.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .linalg import BipartiteVector, dagger, partial_trace_env


@dataclass(frozen=True)
class DensityMatrix:
    entries: np.ndarray

    def __post_init__(self) -> None:
        m = np.array(self.entries, dtype=complex)
        problems = density_violations(m)
        if problems:
            raise ValueError("not a density matrix: " + ", ".join(problems))
        m.setflags(write=False)
        object.__setattr__(self, "entries", m)

    @property
    def n_s(self) -> int:
        return self.entries.shape[0]


def density_violations(m: np.ndarray, tol: float = 1e-10) -> list[str]:
    out = []
    if not np.all(np.isfinite(m)):
        return ["non-finite entries"]
    if np.linalg.norm(m - m.conj().T) > tol:
        out.append("not Hermitian")
    elif np.linalg.eigvalsh(0.5 * (m + m.conj().T))[0] < -tol:
        out.append("negative eigenvalue")
    if abs(np.trace(m) - 1.0) > tol:
        out.append("trace != 1")
    return out


def _amplitude_matrix(v, n_s: int | None, n_e: int | None) -> tuple[np.ndarray, int, int]:
    if isinstance(v, BipartiteVector):
        return v.matrix(), v.n_s, v.n_e
    v = np.asarray(v, dtype=complex)
    if n_s is None or n_e is None:
        raise ValueError("factor dimensions required for raw amplitudes")
    if v.shape[-1] != n_s * n_e:
        raise ValueError(f"bad bipartite shape: {v.shape[-1]} != {n_s}*{n_e}")
    return v.reshape(v.shape[:-1] + (n_s, n_e)), n_s, n_e


def star_inner(psi, phi, n_s: int | None = None, n_e: int | None = None) -> np.ndarray:
    """``tr_E |phi>><<psi|`` as an ``n_s x n_s`` matrix (batched over leading axes)."""
    a, ns_a, ne_a = _amplitude_matrix(psi, n_s, n_e)
    b, ns_b, ne_b = _amplitude_matrix(phi, n_s, n_e)
    if (ns_a, ne_a) != (ns_b, ne_b):
        raise ValueError("bad bipartite shape: factor dimensions differ")
    return b @ dagger(a)


def star_norm_sq(psi, n_s: int | None = None, n_e: int | None = None, tol: float = 1e-10) -> np.ndarray:
    """Reduced density matrix of a normalized universe state."""
    m, _, _ = _amplitude_matrix(psi, n_s, n_e)
    norms = np.einsum("...ij,...ij->...", m.conj(), m).real
    if np.any(np.abs(norms - 1.0) > tol):
        raise ValueError("unnormalized input: <<psi|psi>> != 1")
    return m @ dagger(m)


def lindbladian_apply(h: np.ndarray, psi, n_s: int | None = None, n_e: int | None = None) -> np.ndarray:
    """Reduced generator ``tr_E [H, |psi>><<psi|]`` evaluated through the universe.

    Energy units; ``i hbar d rho/dt`` equals this for a state evolving under ``h``.
    """
    h = np.asarray(h, dtype=complex)
    if np.linalg.norm(h - dagger(h)) > 1e-10 * max(1.0, np.linalg.norm(h)):
        raise ValueError("not Hermitian")
    m, ns, ne = _amplitude_matrix(psi, n_s, n_e)
    flat = m.reshape(m.shape[:-2] + (ns * ne,))
    h_psi = np.einsum("...ij,...j->...i", h, flat)
    # tr_E(H|psi><psi|) - tr_E(|psi><psi|H) = X - X^dagger
    x = star_inner(flat, h_psi, ns, ne)
    return x - dagger(x)


def lindbladian_lifted(h: np.ndarray, psi, n_s: int, n_e: int, op: np.ndarray) -> np.ndarray:
    """Reduced generator applied to ``op rho - rho op^dagger`` through its universe lift.

    Evaluates ``tr_E [H, (op (x) 1)|psi>><<psi| - |psi>><<psi|(op^dagger (x) 1)]``,
    whose partial trace is ``op rho - rho op^dagger``.
    """
    h = np.asarray(h, dtype=complex)
    psi = np.asarray(psi.amplitudes if isinstance(psi, BipartiteVector) else psi)
    big = np.kron(np.asarray(op, dtype=complex), np.eye(n_e))
    proj = np.outer(psi, psi.conj())
    w = big @ proj - proj @ big.conj().T
    return partial_trace_env(h @ w - w @ h, n_s, n_e)
