"""Dense complex linear algebra used throughout the package.

Bipartite index convention: a universe vector on S (x) E is stored flat with
``(i_S, i_E) -> i_S * n_E + i_E``.  This is the order produced by
:func:`numpy.kron`, and every partial trace below agrees with it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

RANK_TOL = 1e-10


def kron(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Tensor product with block ``(i, j)`` equal to ``a[i, j] * b``."""
    return np.kron(np.asarray(a, dtype=complex), np.asarray(b, dtype=complex))


def partial_trace_env(m: np.ndarray, n_s: int, n_e: int) -> np.ndarray:
    """Trace out the environment factor of an operator on S (x) E.

    Leading axes are treated as a batch, so a field of operators with shape
    ``(..., n_s*n_e, n_s*n_e)`` reduces to ``(..., n_s, n_s)``.
    """
    m = np.asarray(m)
    dim = n_s * n_e
    if m.ndim < 2 or m.shape[-2:] != (dim, dim):
        raise ValueError(f"bad bipartite shape: {m.shape[-2:]} for n_S={n_s}, n_E={n_e}")
    blocks = m.reshape(m.shape[:-2] + (n_s, n_e, n_s, n_e))
    return np.einsum("...iaja->...ij", blocks)


def herm_eig(m: np.ndarray, tol: float = 1e-10) -> tuple[np.ndarray, np.ndarray]:
    """Eigen-decomposition of a Hermitian matrix, eigenvalues ascending."""
    m = np.asarray(m, dtype=complex)
    scale = max(1.0, float(np.linalg.norm(m, 2)))
    if np.linalg.norm(m - m.conj().T, 2) > tol * scale:
        raise ValueError("not Hermitian")
    w, v = np.linalg.eigh(0.5 * (m + m.conj().T))
    return w, v


def matrix_exp(m: np.ndarray) -> np.ndarray:
    # scipy's Pade scaling-and-squaring meets the 1e-12 relative target for |M| <= 10
    return scipy.linalg.expm(np.asarray(m, dtype=complex))


def pinv(m: np.ndarray, rank_tol: float = RANK_TOL) -> np.ndarray:
    """Moore-Penrose pseudo-inverse, cutting singular values at ``rank_tol * s_max``.

    Stacks of matrices are inverted independently.
    """
    return np.linalg.pinv(np.asarray(m, dtype=complex), rcond=rank_tol)


def dagger(m: np.ndarray) -> np.ndarray:
    """Conjugate transpose over the last two axes (batched)."""
    return np.conj(np.swapaxes(m, -1, -2))


def commutator(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return a @ b - b @ a


def op_norm(m: np.ndarray) -> float:
    """Largest spectral norm over a batch of matrices."""
    m = np.asarray(m)
    if m.ndim == 2:
        return float(np.linalg.norm(m, 2))
    return float(np.max(np.linalg.norm(m.reshape((-1,) + m.shape[-2:]), ord=2, axis=(-2, -1))))


def trace_distance(a: np.ndarray, b: np.ndarray) -> float:
    """Half the trace norm of ``a - b``."""
    return 0.5 * float(np.sum(np.linalg.svd(np.asarray(a) - np.asarray(b), compute_uv=False)))


@dataclass(frozen=True)
class BipartiteVector:
    """A state of the universe S (x) E with its factor dimensions."""

    n_s: int
    n_e: int
    amplitudes: np.ndarray

    def __post_init__(self) -> None:
        amps = np.array(self.amplitudes, dtype=complex).reshape(-1)
        if amps.size != self.n_s * self.n_e:
            raise ValueError(f"bad bipartite shape: {amps.size} != {self.n_s}*{self.n_e}")
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)

    @classmethod
    def product(cls, sys: np.ndarray, env: np.ndarray) -> BipartiteVector:
        sys = np.asarray(sys, dtype=complex)
        env = np.asarray(env, dtype=complex)
        return cls(sys.size, env.size, np.kron(sys, env))

    @property
    def norm_sq(self) -> float:
        return float(np.vdot(self.amplitudes, self.amplitudes).real)

    def is_normalized(self, tol: float = 1e-12) -> bool:
        return abs(self.norm_sq - 1.0) <= tol

    def normalized(self) -> BipartiteVector:
        return BipartiteVector(self.n_s, self.n_e, self.amplitudes / np.sqrt(self.norm_sq))

    def apply(self, op: np.ndarray) -> BipartiteVector:
        """Apply an operator on S (``n_s x n_s``) or on the universe."""
        op = np.asarray(op, dtype=complex)
        if op.shape == (self.n_s, self.n_s) and self.n_e != 1:
            op = np.kron(op, np.eye(self.n_e))
        return BipartiteVector(self.n_s, self.n_e, op @ self.amplitudes)

    def matrix(self) -> np.ndarray:
        """Amplitudes reshaped to ``(n_s, n_e)``."""
        return self.amplitudes.reshape(self.n_s, self.n_e)


# --- interchange format: nested arrays of [re, im] pairs, row-major ---------


def to_interchange(m: np.ndarray) -> list:
    m = np.asarray(m, dtype=complex)
    if m.ndim == 0:
        return [float(m.real), float(m.imag)]
    return [to_interchange(row) for row in m]


def from_interchange(data) -> np.ndarray:
    arr = np.asarray(data, dtype=float)
    if arr.shape[-1] != 2:
        raise ValueError("interchange entries must be [re, im] pairs")
    return arr[..., 0] + 1j * arr[..., 1]
