"""Independent reference computations used only by the tests.

Nothing here calls into the package: loops instead of einsum, series
instead of Pade, closed forms instead of solvers.
"""

import math

import numpy as np


def kron_loops(a, b):
    a, b = np.asarray(a, dtype=complex), np.asarray(b, dtype=complex)
    ra, ca = a.shape
    rb, cb = b.shape
    out = np.zeros((ra * rb, ca * cb), dtype=complex)
    for i in range(ra):
        for j in range(ca):
            for k in range(rb):
                for m in range(cb):
                    out[i * rb + k, j * cb + m] = a[i, j] * b[k, m]
    return out


def partial_trace_loops(m, n_s, n_e):
    out = np.zeros((n_s, n_s), dtype=complex)
    for i in range(n_s):
        for j in range(n_s):
            out[i, j] = sum(m[i * n_e + a, j * n_e + a] for a in range(n_e))
    return out


def star_inner_dense(psi, phi, n_s, n_e):
    """``tr_E |phi><psi|`` through the full outer product."""
    return partial_trace_loops(np.outer(phi, np.conj(psi)), n_s, n_e)


def expm_taylor(m, terms=60):
    """Scaling-and-squaring Taylor series; accurate for moderate norms."""
    m = np.asarray(m, dtype=complex)
    norm = np.linalg.norm(m, 1)
    s = max(0, int(math.ceil(math.log2(norm))) + 1) if norm > 0 else 0
    a = m / 2**s
    out = np.eye(m.shape[0], dtype=complex)
    term = np.eye(m.shape[0], dtype=complex)
    for k in range(1, terms):
        term = term @ a / k
        out = out + term
    for _ in range(s):
        out = out @ out
    return out


def random_unitary(rng, n):
    z = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def random_hermitian(rng, n):
    z = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    return 0.5 * (z + z.conj().T)


def random_state(rng, n):
    v = rng.normal(size=n) + 1j * rng.normal(size=n)
    return v / np.linalg.norm(v)


def pauli_exp(x):
    """``exp(i x . sigma)`` from the spectral decomposition of ``x . sigma``."""
    sx = np.array([[0, 1], [1, 0]], dtype=complex)
    sy = np.array([[0, -1j], [1j, 0]], dtype=complex)
    sz = np.array([[1, 0], [0, -1]], dtype=complex)
    gen = x[0] * sx + x[1] * sy + x[2] * sz
    w, v = np.linalg.eigh(gen)
    return v @ np.diag(np.exp(1j * w)) @ v.conj().T


def qubit_shift(omega_c, omega_b, chi, hbar):
    """Closed-form eigenvalue shift of the tracked branch of the phase-damping qubit."""
    return 0.5 * (math.sqrt(4 * chi**2 + hbar**2 * omega_b**2) + 2 * hbar * omega_c + hbar * omega_b)


def qubit_h0_entries(omega_c, omega_b, chi, hbar):
    """H0 written out entry by entry on the basis 00, 01, 10, 11."""
    h = np.zeros((4, 4), dtype=complex)
    h[1, 1] = hbar * omega_b
    h[2, 2] = hbar * omega_c
    h[3, 3] = hbar * omega_c + hbar * omega_b
    h[2, 3] = h[3, 2] = chi
    return h


def berry_phase_latitude(theta):
    """Loop integral of <phi|d phi> for the spin-1/2 eigenvector on a latitude circle.

    For the section (-e^{-i phi} sin(theta/2), cos(theta/2)) the integrand is
    -i sin^2(theta/2) d phi, so the loop gives -i/2 times the solid angle
    2 pi (1 - cos theta) of the cap around the north pole.
    """
    return -1j * np.pi * (1 - np.cos(theta))


def loglog_slope(x, y):
    x, y = np.log(np.asarray(x, dtype=float)), np.log(np.asarray(y, dtype=float))
    xm, ym = x.mean(), y.mean()
    return float(np.sum((x - xm) * (y - ym)) / np.sum((x - xm) ** 2))


def convergence_order(errors, ratio=2.0):
    e = np.asarray(errors, dtype=float)
    return np.log(e[:-1] / e[1:]) / np.log(ratio)


def anti_hermitian(rng, n):
    z = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    return 0.5 * (z - z.conj().T)
