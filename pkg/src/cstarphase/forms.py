"""Matrix-valued differential forms sampled on rectangular parameter grids.

A :class:`Grid` is a rectangular slice of parameter space.  Each grid axis
moves one parameter direction, the others stay at ``base``.  Forms carry one
matrix per sample and per (sorted) index tuple of grid axes.

Sign conventions, used identically on both sides of every identity check::

    (a ^ b)_{mn}      = a_m b_n - a_n b_m
    [a, b]_{mn}       = a_m b_n - a_n b_m + b_m a_n - b_n a_m      (1-forms)
    (dw)_{mns}        = d_m w_{ns} + d_n w_{sm} + d_s w_{mn}
    (a ^ w)_{mns}     = a_m w_{ns} + a_n w_{sm} + a_s w_{mn}
    (w ^ a)_{mns}     = w_{mn} a_s + w_{ns} a_m + w_{sm} a_n
    [a, w]            = a ^ w - w ^ a                               (1-form, 2-form)

Derivatives are second-order central differences in the interior and
second-order one-sided stencils on the boundary (``numpy.gradient`` with
``edge_order=2``).  Differences along distinct axes commute exactly, so
``d(d w) = 0`` holds to roundoff.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations

import numpy as np


@dataclass(frozen=True)
class Grid:
    axes: tuple[np.ndarray, ...]
    directions: tuple[int, ...]
    base: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self) -> None:
        axes = tuple(np.asarray(a, dtype=float) for a in self.axes)
        if len(axes) != len(self.directions):
            raise ValueError("one parameter direction per grid axis")
        for a in axes:
            if a.ndim != 1 or a.size < 1 or np.any(np.diff(a) <= 0):
                raise ValueError("grid axes must be strictly increasing 1-D arrays")
        object.__setattr__(self, "axes", axes)
        object.__setattr__(self, "directions", tuple(int(d) for d in self.directions))
        object.__setattr__(self, "base", np.asarray(self.base, dtype=float))

    @classmethod
    def box(
        cls,
        lower: list[float],
        upper: list[float],
        counts: list[int],
        directions: list[int],
        base: np.ndarray | None = None,
    ) -> Grid:
        axes = tuple(np.linspace(lo, hi, n) for lo, hi, n in zip(lower, upper, counts))
        dim = max(directions) + 1 if base is None else len(base)
        return cls(axes, tuple(directions), np.zeros(dim) if base is None else np.asarray(base))

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(a.size for a in self.axes)

    @property
    def ndim(self) -> int:
        return len(self.axes)

    def points(self) -> np.ndarray:
        """Parameter points, shape ``shape + (len(base),)``."""
        mesh = np.meshgrid(*self.axes, indexing="ij")
        pts = np.broadcast_to(self.base, self.shape + self.base.shape).copy()
        for coords, direction in zip(mesh, self.directions):
            pts[..., direction] = coords
        return pts

    def require_stencil(self, axis: int | None = None) -> None:
        axes = range(self.ndim) if axis is None else [axis]
        for k in axes:
            if self.axes[k].size < 3:
                raise ValueError("grid too small: need at least 3 points per direction")

    def diff(self, values: np.ndarray, axis: int) -> np.ndarray:
        """Partial derivative of a sampled field along one grid axis."""
        self.require_stencil(axis)
        return np.gradient(values, self.axes[axis], axis=axis, edge_order=2)


def _mm(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.matmul(a, b)


class _Form:
    degree = 0

    def __init__(self, grid: Grid, components: dict, chart: str | None = None):
        self.grid = grid
        self.components = components
        self.chart = chart

    @classmethod
    def zeros(cls, grid: Grid, n: int, chart: str | None = None):
        keys = combinations(range(grid.ndim), cls.degree)
        return cls(grid, {k: np.zeros(grid.shape + (n, n), dtype=complex) for k in keys}, chart)

    def keys(self) -> list[tuple[int, ...]]:
        return sorted(self.components)

    def _combine(self, other, op):
        return type(self)(self.grid, {k: op(self.components[k], other.components[k]) for k in self.keys()}, self.chart)

    def __add__(self, other):
        return self._combine(other, np.add)

    def __sub__(self, other):
        return self._combine(other, np.subtract)

    def __neg__(self):
        return self.scale(-1.0)

    def scale(self, s):
        return type(self)(self.grid, {k: s * v for k, v in self.components.items()}, self.chart)

    def similar(self, left: np.ndarray, right: np.ndarray):
        """Pointwise ``left @ w @ right`` for matrix fields ``left``, ``right``."""
        return type(self)(self.grid, {k: _mm(_mm(left, v), right) for k, v in self.components.items()}, self.chart)

    def left(self, m: np.ndarray):
        return type(self)(self.grid, {k: _mm(m, v) for k, v in self.components.items()}, self.chart)

    def right(self, m: np.ndarray):
        return type(self)(self.grid, {k: _mm(v, m) for k, v in self.components.items()}, self.chart)

    def pointwise_norms(self, mask: np.ndarray | None = None) -> np.ndarray:
        """Largest component spectral norm at each sample."""
        norms = np.zeros(self.grid.shape)
        for v in self.components.values():
            norms = np.maximum(norms, np.linalg.norm(v, ord=2, axis=(-2, -1)))
        return norms if mask is None else norms[mask]

    def max_norm(self, mask: np.ndarray | None = None) -> float:
        vals = self.pointwise_norms(mask)
        return float(vals.max()) if vals.size else 0.0


class MatrixOneForm(_Form):
    degree = 1

    @classmethod
    def from_array(cls, grid: Grid, comps: np.ndarray, chart: str | None = None) -> MatrixOneForm:
        """Build from an array of shape ``(grid.ndim,) + grid.shape + (n, n)``."""
        comps = np.asarray(comps, dtype=complex)
        if comps.shape[0] != grid.ndim:
            raise ValueError("component count must equal the grid dimension")
        return cls(grid, {(m,): comps[m] for m in range(grid.ndim)}, chart)

    def __getitem__(self, mu: int) -> np.ndarray:
        return self.components[(mu,)]

    def as_array(self) -> np.ndarray:
        return np.stack([self[m] for m in range(self.grid.ndim)])

    def contract(self, velocity: np.ndarray) -> np.ndarray:
        """``sum_mu w_mu v^mu`` with ``velocity`` of shape ``grid.shape + (ndim,)``."""
        velocity = np.asarray(velocity)
        return sum(velocity[..., m, None, None] * self[m] for m in range(self.grid.ndim))


class MatrixTwoForm(_Form):
    degree = 2

    def __getitem__(self, key: tuple[int, int]) -> np.ndarray:
        mu, nu = key
        if mu == nu:
            return np.zeros_like(next(iter(self.components.values())))
        if mu < nu:
            return self.components[(mu, nu)]
        return -self.components[(nu, mu)]


class MatrixThreeForm(_Form):
    degree = 3

    def __getitem__(self, key: tuple[int, int, int]) -> np.ndarray:
        order = np.argsort(key)
        if len(set(key)) < 3:
            return np.zeros_like(next(iter(self.components.values())))
        sign = 1 if _parity(order) == 0 else -1
        return sign * self.components[tuple(int(key[i]) for i in order)]


def _parity(perm) -> int:
    perm = list(perm)
    swaps = 0
    for i in range(len(perm)):
        while perm[i] != i:
            j = perm[i]
            perm[i], perm[j] = perm[j], perm[i]
            swaps += 1
    return swaps % 2


def exterior_derivative(w: _Form) -> _Form:
    g = w.grid
    g.require_stencil()
    if isinstance(w, MatrixOneForm):
        comps = {(m, n): g.diff(w[n], m) - g.diff(w[m], n) for m, n in combinations(range(g.ndim), 2)}
        return MatrixTwoForm(g, comps, w.chart)
    if isinstance(w, MatrixTwoForm):
        comps = {
            (m, n, s): g.diff(w[n, s], m) + g.diff(w[s, m], n) + g.diff(w[m, n], s)
            for m, n, s in combinations(range(g.ndim), 3)
        }
        return MatrixThreeForm(g, comps, w.chart)
    raise TypeError("exterior derivative implemented for 1- and 2-forms")


def wedge(a: _Form, b: _Form) -> _Form:
    g = a.grid
    if isinstance(a, MatrixOneForm) and isinstance(b, MatrixOneForm):
        comps = {(m, n): _mm(a[m], b[n]) - _mm(a[n], b[m]) for m, n in combinations(range(g.ndim), 2)}
        return MatrixTwoForm(g, comps, a.chart)
    if isinstance(a, MatrixOneForm) and isinstance(b, MatrixTwoForm):
        comps = {
            (m, n, s): _mm(a[m], b[n, s]) + _mm(a[n], b[s, m]) + _mm(a[s], b[m, n])
            for m, n, s in combinations(range(g.ndim), 3)
        }
        return MatrixThreeForm(g, comps, a.chart)
    if isinstance(a, MatrixTwoForm) and isinstance(b, MatrixOneForm):
        comps = {
            (m, n, s): _mm(a[m, n], b[s]) + _mm(a[n, s], b[m]) + _mm(a[s, m], b[n])
            for m, n, s in combinations(range(g.ndim), 3)
        }
        return MatrixThreeForm(g, comps, a.chart)
    raise TypeError("unsupported wedge degrees")


def bracket(a: _Form, b: _Form) -> _Form:
    """Graded commutator: symmetric for two 1-forms, ``a^w - w^a`` for a 1-form and a 2-form."""
    if isinstance(a, MatrixOneForm) and isinstance(b, MatrixOneForm):
        return wedge(a, b) + wedge(b, a)
    if isinstance(a, MatrixOneForm) and isinstance(b, MatrixTwoForm):
        return wedge(a, b) - wedge(b, a)
    raise TypeError("unsupported bracket degrees")


def field_diff_one_form(grid: Grid, values: np.ndarray, chart: str | None = None) -> MatrixOneForm:
    """The 1-form ``d f`` of a matrix field ``f`` sampled on ``grid``."""
    return MatrixOneForm(grid, {(m,): grid.diff(values, m) for m in range(grid.ndim)}, chart)
