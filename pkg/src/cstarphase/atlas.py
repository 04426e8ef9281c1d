"""Chart atlases of *-eigenvector sections and their transition data.

All charts share one grid.  Each chart has a boolean mask (its domain) and a
section defined on the whole grid, so finite differences never cross a mask
boundary; residuals are only evaluated where the relevant charts overlap.
Transitions ``g[a, b]`` are stored for chart pairs in atlas order and the
reverse direction is the pointwise inverse.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from itertools import combinations, permutations

import numpy as np

from .connection import curvatures, generator_forms, isotropy_residual
from .eigen import SectionField
from .forms import Grid, MatrixOneForm, MatrixTwoForm, bracket, exterior_derivative, field_diff_one_form, wedge
from .linalg import dagger, from_interchange, to_interchange


@dataclass
class Chart:
    id: str
    mask: np.ndarray
    section: SectionField


class ChartAtlas:
    def __init__(self, grid: Grid, charts: list[Chart], transitions: dict[tuple[str, str], np.ndarray]):
        self.grid = grid
        self.charts = charts
        self.order = {c.id: k for k, c in enumerate(charts)}
        self.transitions = {}
        for (a, b), g in transitions.items():
            if self.order[a] > self.order[b]:
                a, b, g = b, a, np.linalg.inv(g)
            self.transitions[(a, b)] = np.asarray(g, dtype=complex)

    @property
    def ids(self) -> list[str]:
        return [c.id for c in self.charts]

    def chart(self, cid: str) -> Chart:
        return self.charts[self.order[cid]]

    def overlap(self, *ids: str) -> np.ndarray:
        mask = np.ones(self.grid.shape, dtype=bool)
        for cid in ids:
            mask &= self.chart(cid).mask
        return mask

    def g(self, a: str, b: str) -> np.ndarray:
        if a == b:
            n = self.chart(a).section.n_s
            return np.broadcast_to(np.eye(n, dtype=complex), self.grid.shape + (n, n))
        if (a, b) in self.transitions:
            return self.transitions[(a, b)]
        if (b, a) in self.transitions:
            return np.linalg.inv(self.transitions[(b, a)])
        raise KeyError(f"no transition between {a} and {b}")

    def h(self, a: str, b: str, c: str) -> np.ndarray:
        return self.g(a, b) @ self.g(b, c) @ self.g(c, a)

    # --- serialization ----------------------------------------------------

    def to_json(self) -> str:
        doc = {
            "grid": {
                "axes": [a.tolist() for a in self.grid.axes],
                "directions": list(self.grid.directions),
                "base": self.grid.base.tolist(),
            },
            "charts": [
                {
                    "id": c.id,
                    "mask": c.mask.astype(int).tolist(),
                    "n_s": c.section.n_s,
                    "n_e": c.section.n_e,
                    "phi": to_interchange(c.section.phi),
                    "E": to_interchange(c.section.E),
                    "projector": to_interchange(c.section.projector),
                }
                for c in self.charts
            ],
            "transitions": [{"from": a, "to": b, "g": to_interchange(g)} for (a, b), g in self.transitions.items()],
        }
        return json.dumps(doc)

    @classmethod
    def from_json(cls, text: str) -> ChartAtlas:
        doc = json.loads(text)
        gd = doc["grid"]
        grid = Grid(tuple(np.asarray(a) for a in gd["axes"]), tuple(gd["directions"]), np.asarray(gd["base"]))
        charts = []
        for c in doc["charts"]:
            sec = SectionField(
                grid,
                c["n_s"],
                c["n_e"],
                from_interchange(c["phi"]),
                from_interchange(c["E"]),
                from_interchange(c["projector"]),
                chart=c["id"],
            )
            charts.append(Chart(c["id"], np.asarray(c["mask"], dtype=bool), sec))
        trans = {(t["from"], t["to"]): from_interchange(t["g"]) for t in doc["transitions"]}
        return cls(grid, charts, trans)


def _masked_max(values: np.ndarray, mask: np.ndarray) -> float:
    v = np.asarray(values)[mask]
    return float(v.max()) if v.size else 0.0


def _op_norms(m: np.ndarray) -> np.ndarray:
    return np.linalg.norm(m, ord=2, axis=(-2, -1))


@dataclass
class TransitionData:
    atlas: ChartAtlas
    full: dict[str, MatrixOneForm]
    potential: dict[str, MatrixOneForm]
    remainder: dict[str, MatrixOneForm]
    eta: dict[tuple[str, str], MatrixOneForm]
    report: dict[str, float]


def potential_transformation(atlas: ChartAtlas, pot: dict[str, MatrixOneForm], a: str, b: str) -> MatrixOneForm:
    """``g A^b g^-1 - A^a + dg g^-1`` on the common grid."""
    g = np.asarray(atlas.g(a, b))
    g_inv = np.linalg.inv(g)
    dg = field_diff_one_form(atlas.grid, g)
    return pot[b].similar(g, g_inv) - pot[a] + dg.right(g_inv)


def transition_functions(atlas: ChartAtlas) -> TransitionData:
    """Generators per chart, potential transformations per overlap, and a residual report.

    Report keys (max over the relevant overlap samples):
    ``state_consistency`` |rho^a - g rho^b g^+|, ``h_isotropy`` |h rho^a h^+ - rho^a|,
    ``h_cyclic``, ``h_reverse``, ``h_swap``, ``h_quadruple`` (the four generalized
    cocycle relations), ``eta_isotropy`` |eta rho^a + rho^a eta^+|, and
    ``eta_cocycle``.
    """
    ids = atlas.ids
    full, pot, rem = {}, {}, {}
    for c in atlas.charts:
        full[c.id], pot[c.id], rem[c.id] = generator_forms(c.section)
    rho = {c.id: c.section.rho for c in atlas.charts}
    report = dict.fromkeys(
        ["state_consistency", "h_isotropy", "h_cyclic", "h_reverse", "h_swap", "h_quadruple", "eta_isotropy", "eta_cocycle"],
        0.0,
    )
    pairs = [(a, b) for a, b in combinations(ids, 2) if atlas.overlap(a, b).any()]
    if any(atlas.overlap(a, b).any() for a, b in combinations(ids, 2)) and not atlas.transitions:
        raise ValueError("overlap with no transition data")
    eta = {}
    for a, b in pairs:
        mask = atlas.overlap(a, b)
        g = atlas.g(a, b)
        report["state_consistency"] = max(
            report["state_consistency"], _masked_max(_op_norms(rho[a] - g @ rho[b] @ dagger(g)), mask)
        )
        eta[(a, b)] = potential_transformation(atlas, pot, a, b)
        iso = max(_masked_max(isotropy_residual(eta[(a, b)][m], rho[a]), mask) for m in range(atlas.grid.ndim))
        report["eta_isotropy"] = max(report["eta_isotropy"], iso)

    inv = np.linalg.inv
    for a, b, c in combinations(ids, 3):
        mask = atlas.overlap(a, b, c)
        if not mask.any():
            continue
        for p, q, r in permutations((a, b, c)):
            h = atlas.h(p, q, r)
            report["h_isotropy"] = max(
                report["h_isotropy"], _masked_max(_op_norms(h @ rho[p] @ dagger(h) - rho[p]), mask)
            )
        h_abc = atlas.h(a, b, c)
        g_ab = atlas.g(a, b)
        checks = {
            "h_cyclic": h_abc - g_ab @ atlas.h(b, c, a) @ inv(g_ab),
            "h_reverse": atlas.h(a, c, b) - inv(h_abc),
            "h_swap": atlas.h(b, a, c) - inv(g_ab) @ inv(h_abc) @ g_ab,
        }
        for key, val in checks.items():
            report[key] = max(report[key], _masked_max(_op_norms(val), mask))

        if (a, b) in eta and (b, c) in eta and (a, c) in eta:
            h_inv = inv(h_abc)
            lhs = eta[(a, b)] + eta[(b, c)].similar(g_ab, inv(g_ab)) - eta[(a, c)].similar(h_abc, h_inv)
            dh = field_diff_one_form(atlas.grid, h_abc)
            comm = MatrixOneForm(
                atlas.grid, {k: v @ h_abc - h_abc @ v for k, v in pot[a].components.items()}
            )
            rhs = (dh - comm).right(h_inv)
            report["eta_cocycle"] = max(report["eta_cocycle"], (lhs - rhs).max_norm(mask))

    for a, b, c, d in combinations(ids, 4):
        mask = atlas.overlap(a, b, c, d)
        if not mask.any():
            continue
        g_ab = atlas.g(a, b)
        lhs = atlas.h(a, d, c) @ atlas.h(a, c, b)
        rhs = atlas.h(a, d, b) @ g_ab @ atlas.h(b, d, c) @ inv(g_ab)
        report["h_quadruple"] = max(report["h_quadruple"], _masked_max(_op_norms(lhs - rhs), mask))
    return TransitionData(atlas, full, pot, rem, eta, report)


def curving_transformation(rem: MatrixOneForm, eta: MatrixOneForm) -> MatrixTwoForm:
    return bracket(rem, eta)


def curvature_gauge_check(data: TransitionData) -> dict[str, float]:
    """Residuals of the curving, fake-curvature and curving-transformation laws.

    With ``chi = [R^a, eta]``:
    ``fake_law``     F^b - g^-1 (F^a - chi) g
    ``curving_law``  B^b - g^-1 (B^a + d eta - eta^eta - [A^a, eta] - chi) g
    ``chi_cocycle``  chi^ab + g chi^bc g^-1 - h chi^ac h^-1 + h [F^a, h^-1]
    """
    atlas = data.atlas
    curv, fake = {}, {}
    for cid in atlas.ids:
        curv[cid], fake[cid], _ = curvatures(data.full[cid], data.potential[cid], data.remainder[cid])
    report = {"fake_law": 0.0, "curving_law": 0.0, "chi_cocycle": 0.0}
    chi = {}
    inv = np.linalg.inv
    for (a, b), eta in data.eta.items():
        mask = atlas.overlap(a, b)
        g = np.asarray(atlas.g(a, b))
        g_inv = inv(g)
        chi[(a, b)] = curving_transformation(data.remainder[a], eta)
        fake_rhs = (fake[a] - chi[(a, b)]).similar(g_inv, g)
        report["fake_law"] = max(report["fake_law"], (fake[b] - fake_rhs).max_norm(mask))
        inner = curv[a] + exterior_derivative(eta) - wedge(eta, eta) - bracket(data.potential[a], eta) - chi[(a, b)]
        report["curving_law"] = max(report["curving_law"], (curv[b] - inner.similar(g_inv, g)).max_norm(mask))
    for a, b, c in combinations(atlas.ids, 3):
        if not all(k in chi for k in ((a, b), (b, c), (a, c))):
            continue
        mask = atlas.overlap(a, b, c)
        if not mask.any():
            continue
        h = atlas.h(a, b, c)
        h_inv = inv(h)
        g_ab = np.asarray(atlas.g(a, b))
        lhs = chi[(a, b)] + chi[(b, c)].similar(g_ab, inv(g_ab)) - chi[(a, c)].similar(h, h_inv)
        comm = MatrixTwoForm(atlas.grid, {k: v @ h_inv - h_inv @ v for k, v in fake[a].components.items()})
        report["chi_cocycle"] = max(report["chi_cocycle"], (lhs + comm.left(h)).max_norm(mask))
    return report


# --- synthetic atlases --------------------------------------------------------


def restricted_atlas(section: SectionField, masks: dict[str, np.ndarray]) -> ChartAtlas:
    """One global section restricted to several charts; every transition is the identity."""
    n = section.n_s
    charts = [Chart(cid, m, section) for cid, m in masks.items()]
    eye = np.broadcast_to(np.eye(n, dtype=complex), section.grid.shape + (n, n)).copy()
    trans = {(a.id, b.id): eye for a, b in combinations(charts, 2)}
    return ChartAtlas(section.grid, charts, trans)


def quadrant_masks(grid: Grid, n_charts: int = 4, overlap: float = 0.6) -> dict[str, np.ndarray]:
    """Overlapping rectangular chart domains that share a common central region."""
    frac = [np.linspace(0.0, 1.0, n) for n in grid.shape]
    mesh = np.meshgrid(*frac, indexing="ij")
    masks = {}
    for k in range(n_charts):
        m = np.ones(grid.shape, dtype=bool)
        for ax in range(min(2, grid.ndim)):
            upper = (k >> ax) & 1
            m &= mesh[ax] >= 1 - overlap if upper else mesh[ax] <= overlap
        masks[f"U{k}"] = m
    return masks


def phase_atlas(section: SectionField, n_charts: int = 4, seed: int = 0, amplitude: float = 1.0) -> ChartAtlas:
    """Charts related by smooth scalar phases, so the cocycle defect is a nontrivial phase.

    Chart ``a`` carries the section ``exp(i theta_a) phi``; the transition
    ``g_ab = exp(i gamma_ab)`` is an independent smooth phase field.
    """
    rng = np.random.default_rng(seed)
    grid = section.grid
    pts = grid.points()[..., list(grid.directions)]

    def smooth_phase() -> np.ndarray:
        k = rng.normal(size=grid.ndim)
        c = rng.uniform(0, 2 * np.pi)
        return amplitude * (np.sin(pts @ k + c) + 0.5 * np.cos(pts @ rng.normal(size=grid.ndim)))

    masks = quadrant_masks(grid, n_charts)
    charts = [Chart(cid, m, section.with_phase(smooth_phase(), cid)) for cid, m in masks.items()]
    n = section.n_s
    eye = np.eye(n, dtype=complex)
    trans = {(a.id, b.id): np.exp(1j * smooth_phase())[..., None, None] * eye for a, b in combinations(charts, 2)}
    return ChartAtlas(grid, charts, trans)
