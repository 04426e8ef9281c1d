"""Experiment runners shared by the command line tool, the demos and the tests.

Each runner takes a validated configuration dictionary and returns an
:class:`Outcome`: scalar residuals, named checks with tolerances, and an
optional table for CSV output.  Runners never write files.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .atlas import curvature_gauge_check, phase_atlas, transition_functions
from .connection import (
    antiselfadjoint_trace,
    curvature_identities,
    generator_forms,
    generator_relation_residual,
)
from .eigen import BatchedFamily, SectionField, build_eigen_record, solve_section_on_grid, validate_eigen_record
from .forms import Grid
from .linalg import dagger, from_interchange
from .qubit import QubitModel, QubitModelParams, circle_curve, qubit_rotation
from .transport import (
    ParameterPath,
    adiabatic_transport,
    leakage,
    schrodinger_integrate,
    transport_error,
)

EXPERIMENTS = ("eigen-validate", "generator", "curvature", "transport", "atlas-cocycle", "sweep")
PRESETS = ("qubit-phase-damping",)

# per-experiment default tolerances; a configuration may override any of them
DEFAULT_TOLERANCES = {
    "eigen": 1e-10,
    "commutation": 1e-10,
    "trace_antihermitian": 1e-10,
    "lindblad_eigen": 1e-10,
    "second_order": 1e-10,
    "g_membership": 1e-10,
    "analytic_overlap": 1e-8,
    "closed_form_shift": 1e-12,
    "generator_relation": 1e-6,
    "antiselfadjoint_trace": 1e-8,
    "remainder_trace": 1e-10,
    "analytic_potential": 1e-6,
    "curving_isotropy": 1e-6,
    "curving_split": 1e-6,
    "true_curvature": 1e-6,
    "state_consistency": 1e-10,
    "h_isotropy": 1e-10,
    "h_cyclic": 1e-10,
    "h_reverse": 1e-10,
    "h_swap": 1e-10,
    "h_quadruple": 1e-10,
    "eta_isotropy": 1e-6,
    "eta_cocycle": 1e-6,
    "fake_law": 1e-6,
    "curving_law": 1e-6,
    "chi_cocycle": 1e-6,
    "trace_residual": 1e-8,
    "norm_drift": 1e-8,
}

# the property each check guards, quoted in failure messages
PROPERTIES = {
    "eigen": "eigenoperator equation H phi = (E x 1) phi",
    "commutation": "commutation [E x 1, H] = 0",
    "trace_antihermitian": "trace condition tr(rho (E - E^+)) = 0",
    "lindblad_eigen": "Lindbladian eigen relation L(phi) = E rho - rho E^+",
    "second_order": "second-order Lindbladian relation",
    "g_membership": "E phi stays in the *-eigenspace",
    "analytic_overlap": "numeric branch equals the closed-form branch",
    "closed_form_shift": "closed-form eigenvalue shift",
    "generator_relation": "generator relation d rho = G rho + rho G^+",
    "antiselfadjoint_trace": "almost antiselfadjointness tr(rho (G + G^+)) = 0",
    "remainder_trace": "remainder trace tr(rho R) = 0",
    "analytic_potential": "gauge potential equals its closed form on range(rho)",
    "curving_isotropy": "curving isotropy B rho + rho B^+ = 0",
    "curving_split": "curving split B = dA - A^A + F",
    "true_curvature": "true curvature identity dB - [A,B] = dF - [A,F]",
    "state_consistency": "single-valued mixed state across charts",
    "h_isotropy": "2-transition functions fix the mixed state",
    "h_cyclic": "cyclic cocycle relation",
    "h_reverse": "reversed cocycle relation",
    "h_swap": "swapped cocycle relation",
    "h_quadruple": "quadruple-overlap cocycle relation",
    "eta_isotropy": "potential transformation lies in the isotropy algebra",
    "eta_cocycle": "potential-transformation cocycle relation",
    "fake_law": "fake curvature transformation law",
    "curving_law": "curving transformation law",
    "chi_cocycle": "curving-transformation cocycle relation",
    "trace_residual": "trace preservation along adiabatic transport",
    "norm_drift": "norm conservation of the exact dynamics",
    "trace_distance": "adiabatic transport error bound",
    "leakage_monotone": "eigenspace confinement improves with slower driving",
    "trace_distance_monotone": "transport error decreases with slower driving",
    "slope": "adiabatic convergence rate",
}


class ConfigError(ValueError):
    """Raised for configurations that cannot be run."""


@dataclass
class Check:
    value: float
    tolerance: float
    passed: bool
    property: str

    def as_dict(self) -> dict:
        return {"value": self.value, "tolerance": self.tolerance, "passed": self.passed, "property": self.property}


@dataclass
class Outcome:
    experiment: str
    params: dict
    residuals: dict[str, float] = field(default_factory=dict)
    checks: dict[str, Check] = field(default_factory=dict)
    header: tuple[str, ...] | None = None
    rows: list[tuple] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks.values())

    def check(self, name: str, value: float, tolerances: dict, upper: bool = True) -> None:
        tol = float(tolerances.get(name, DEFAULT_TOLERANCES.get(name, math.inf)))
        value = float(value)
        ok = value <= tol if upper else value >= tol
        self.checks[name] = Check(value, tol, bool(ok and math.isfinite(value)), PROPERTIES.get(name, name))

    def flag(self, name: str, ok: bool) -> None:
        self.checks[name] = Check(float(ok), 1.0, bool(ok), PROPERTIES.get(name, name))


# --- systems ------------------------------------------------------------------


def _polynomial_family(terms: list[dict]) -> BatchedFamily:
    powers = [np.asarray(t["powers"], dtype=int) for t in terms]
    mats = [from_interchange(t["matrix"]) for t in terms]
    if len({m.shape for m in mats}) != 1 or mats[0].ndim != 2 or mats[0].shape[0] != mats[0].shape[1]:
        raise ConfigError("polynomial terms must be square matrices of one size")
    if len({p.size for p in powers}) != 1:
        raise ConfigError("polynomial powers must all have the parameter dimension")

    def fn(x: np.ndarray) -> np.ndarray:
        out = np.zeros(x.shape[:-1] + mats[0].shape, dtype=complex)
        for p, m in zip(powers, mats):
            out = out + np.prod(x**p, axis=-1)[..., None, None] * m
        return out

    return BatchedFamily(fn)


def _rotation_family(mat: np.ndarray, n_e: int = 1) -> BatchedFamily:
    """``(U (x) 1) mat (U (x) 1)^dagger`` with ``U = exp(i x . sigma)`` on the system qubit."""
    env = np.eye(n_e)

    def fn(x: np.ndarray) -> np.ndarray:
        u = qubit_rotation(x)
        big = np.einsum("...ij,ab->...iajb", u, env).reshape(u.shape[:-2] + (2 * n_e, 2 * n_e))
        return big @ mat @ dagger(big)

    return BatchedFamily(fn)


@dataclass
class System:
    n_s: int
    n_e: int
    dim: int
    hamiltonian: Callable
    seed: Callable
    selector: int
    hbar: float
    model: QubitModel | None = None

    def section(self, grid: Grid, points: np.ndarray | None = None, chart: str | None = None) -> SectionField:
        if self.model is not None:
            return self.model.section(grid, chart, points)
        return solve_section_on_grid(self.hamiltonian, self.seed, grid, self.selector, chart, points=points)


def build_system(cfg: dict) -> System:
    block = cfg["system"]
    hbar = float(cfg.get("hbar", 1.0))
    if "preset" in block:
        params = dict(block.get("params", {}))
        if "hbar" in params and "hbar" in cfg and float(params["hbar"]) != hbar:
            raise ConfigError("conflicting hbar between system params and top level")
        params.setdefault("hbar", hbar)
        try:
            model = QubitModel(QubitModelParams(**params))
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad preset parameters: {exc}") from exc
        return System(2, 2, 3, model.hamiltonian, model.seed, -1, model.params.hbar, model)
    n_s, n_e = int(block["n_s"]), int(block["n_e"])
    if "rotation" in block:
        if n_s != 2:
            raise ConfigError("rotation systems need a two-level system factor")
        h0 = from_interchange(block["rotation"]["H0"])
        e0 = from_interchange(block["rotation"]["E0"])
        if h0.shape != (2 * n_e, 2 * n_e):
            raise ConfigError("H0 has the wrong shape")
        if e0.shape != (2, 2):
            raise ConfigError("E0 must be 2x2")
        h_fam, e_fam, dim = _rotation_family(h0, n_e), _rotation_family(e0), 3
    else:
        poly = block["polynomial"]
        h_fam, e_fam = _polynomial_family(poly["H"]), _polynomial_family(poly["E0"])
        dim = len(poly["H"][0]["powers"])
    probe = np.zeros(dim)
    if h_fam(probe).shape != (n_s * n_e, n_s * n_e) or e_fam(probe).shape != (n_s, n_s):
        raise ConfigError("matrix sizes do not match n_s and n_e")
    return System(n_s, n_e, dim, h_fam, e_fam, int(block.get("selector", -1)), hbar)


def build_path(cfg: dict, system: System, T: float | None = None) -> ParameterPath:
    block = cfg["path"]
    T = float(block["T"] if T is None else T)
    if "N" in block and T == float(block.get("T", -1)):
        n = int(block["N"])
    else:
        n = max(int(block.get("min_steps", 2000)), math.ceil(float(block.get("steps_per_unit_time", 10)) * T))
    if "circle" in block:
        c = block["circle"]
        curve = circle_curve(float(c.get("radius", 0.5)), T, tuple(c.get("plane", (0, 2))), system.dim)
        return ParameterPath(curve, T, n)
    pts = np.asarray(block["waypoints"], dtype=float)
    if pts.ndim != 2 or pts.shape[1] != system.dim:
        raise ConfigError("waypoints must be points of the parameter space")
    return ParameterPath.from_waypoints(pts, T, n, closed=bool(block.get("closed", False)))


def _grid(cfg: dict, system: System, default_dirs: list[int], extent: float = 0.01) -> Grid:
    block = cfg.get("grid", {})
    dirs = list(block.get("directions", default_dirs))
    lower = np.asarray(block.get("lower", [0.3, 0.2, 0.25][: len(dirs)]), dtype=float)
    extent = float(block.get("extent", extent))
    counts = [int(block.get("points", 21))] * len(dirs)
    base = np.asarray(block.get("base", [0.3, 0.2, 0.25][: system.dim] + [0.0] * max(0, system.dim - 3)), dtype=float)
    if len(lower) != len(dirs) or max(dirs) >= system.dim:
        raise ConfigError("grid directions do not fit the parameter space")
    return Grid.box(list(lower), list(lower + extent), counts, dirs, base)


# --- runners --------------------------------------------------------------------


def run_eigen_validate(cfg: dict, seed: int) -> Outcome:
    system = build_system(cfg)
    opts = cfg.get("eigen", {})
    samples, box = int(opts.get("samples", 100)), float(opts.get("box", 1.0))
    tols = cfg.get("tolerances", {})
    rng = np.random.default_rng(seed)
    xs = rng.uniform(-box, box, size=(samples, system.dim))
    out = Outcome("eigen-validate", {"samples": samples, "box": box, "seed": seed})
    keys = ("eigen", "commutation", "trace_antihermitian", "lindblad_eigen", "second_order", "g_membership")
    worst = dict.fromkeys(keys, 0.0)
    out.header = ("sample",) + tuple(f"x{k}" for k in range(system.dim)) + ("lam",) + keys
    overlap_gap = 0.0
    for k, x in enumerate(xs):
        rec = build_eigen_record(system.hamiltonian, system.seed, system.selector, x)
        report = validate_eigen_record(rec, system.hamiltonian(x))
        rel = {key: report["residuals"][key] / report["scales"][key] for key in keys}
        for key in keys:
            worst[key] = max(worst[key], rel[key])
        if report["possibly_degenerate"]:
            out.warnings.append(f"sample {k}: possibly degenerate")
        out.rows.append((k, *x, rec.lam, *(rel[key] for key in keys)))
        if system.model is not None:
            ref = system.model.star_eigenvector(x)
            overlap_gap = max(overlap_gap, abs(1.0 - abs(np.vdot(ref, rec.phi.amplitudes))))
    for key in keys:
        out.check(key, worst[key], tols)
    if system.model is not None:
        out.check("analytic_overlap", overlap_gap, tols)
        shift_err = max(abs(r[1 + system.dim] - system.model.lam) for r in out.rows)
        out.check("closed_form_shift", shift_err, tols)
    out.residuals = {k: c.value for k, c in out.checks.items()}
    return out


def run_generator(cfg: dict, seed: int) -> Outcome:
    system = build_system(cfg)
    # a small cell keeps the finite-difference trace error below the pinned tolerance
    grid = _grid(cfg, system, [0, 1], extent=0.004)
    tols = cfg.get("tolerances", {})
    sec = system.section(grid)
    full, pot, rem = generator_forms(sec)
    rho = sec.rho
    out = Outcome("generator", {"grid_shape": list(grid.shape), "directions": list(grid.directions)})
    out.check("generator_relation", generator_relation_residual(sec, full).max(), tols)
    out.check("antiselfadjoint_trace", antiselfadjoint_trace(full, rho).max(), tols)
    rem_tr = max(float(np.abs(np.trace(rho @ rem[m], axis1=-2, axis2=-1)).max()) for m in range(grid.ndim))
    out.check("remainder_trace", rem_tr, tols)
    if system.model is not None:
        _, reduced = system.model.analytic_generators(grid.points(), grid.directions)
        err = max(float(np.linalg.norm((pot[m] - reduced[m]) @ rho, ord=2, axis=(-2, -1)).max()) for m in range(grid.ndim))
        out.check("analytic_potential", err, tols)
    out.residuals = {k: c.value for k, c in out.checks.items()}
    return out


def run_curvature(cfg: dict, seed: int) -> Outcome:
    system = build_system(cfg)
    grid = _grid(cfg, system, [0, 1])
    tols = cfg.get("tolerances", {})
    sec = system.section(grid)
    full, pot, rem = generator_forms(sec)
    ident = curvature_identities(full, pot, rem, sec.rho)
    out = Outcome("curvature", {"grid_shape": list(grid.shape), "directions": list(grid.directions)})
    for key, val in ident.items():
        out.check(key, val, tols)
    out.residuals = {k: c.value for k, c in out.checks.items()}
    return out


def run_atlas(cfg: dict, seed: int) -> Outcome:
    system = build_system(cfg)
    block = cfg.get("atlas", {})
    grid_cfg = {"grid": {"points": 41, **cfg.get("grid", {})}}
    grid = _grid(grid_cfg, system, [0, 1])
    tols = cfg.get("tolerances", {})
    sec = system.section(grid)
    atlas = phase_atlas(sec, int(block.get("charts", 4)), seed, float(block.get("amplitude", 1.0)))
    data = transition_functions(atlas)
    out = Outcome("atlas-cocycle", {"charts": len(atlas.ids), "grid_shape": list(grid.shape), "seed": seed})
    for key, val in {**data.report, **curvature_gauge_check(data)}.items():
        out.check(key, val, tols)
    out.residuals = {k: c.value for k, c in out.checks.items()}
    return out


def transport_point(cfg: dict, T: float | None = None) -> dict:
    """Exact dynamics and adiabatic transport along the configured path at duration ``T``."""
    system = build_system(cfg)
    path = build_path(cfg, system, T)
    opts = cfg.get("transport", {})
    substeps = int(cfg["path"].get("substeps", 10))
    fine = path.fine_grid(substeps)
    sec = system.section(fine, points=path.points(fine.axes[0]))
    psi0 = sec.phi[0]
    exact = schrodinger_integrate(system.hamiltonian, psi0, path, substeps, system.hbar)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        tr = adiabatic_transport(
            sec,
            opts.get("generator", "reduced"),
            hbar=system.hbar,
            substeps=substeps,
            adiabatic_threshold=float(opts.get("adiabatic_threshold", 0.1)),
        )
    err = transport_error(exact, tr, system.n_s, system.n_e)
    leak = leakage(exact.psi, sec.projector[:: 2 * substeps])
    return {
        "T": path.T,
        "N": path.N,
        "t": tr.t,
        "trace_residual": tr.trace_residual,
        "leakage": leak,
        "trace_distance": err["trace_distance"],
        "diagnostic": tr.diagnostic,
        "norm_drift": float(exact.norm_drift.max()),
        "final_fidelity": err["final_fidelity"],
        "warnings": [str(w.message) for w in caught],
    }


def run_transport(cfg: dict, seed: int) -> Outcome:
    res = transport_point(cfg)
    tols = cfg.get("tolerances", {})
    out = Outcome(
        "transport",
        {"T": res["T"], "N": res["N"], "generator": cfg.get("transport", {}).get("generator", "reduced")},
    )
    out.header = ("t", "trace_residual", "leakage", "trace_distance", "diagnostic")
    out.rows = list(zip(res["t"], res["trace_residual"], res["leakage"], res["trace_distance"], res["diagnostic"]))
    out.check("trace_residual", res["trace_residual"].max(), tols)
    out.check("norm_drift", res["norm_drift"], tols)
    if "trace_distance" in tols:
        out.check("trace_distance", res["trace_distance"].max(), tols)
    out.residuals = {
        "max_trace_residual": float(res["trace_residual"].max()),
        "norm_drift": res["norm_drift"],
        "max_trace_distance": float(res["trace_distance"].max()),
        "final_fidelity": res["final_fidelity"],
        "max_leakage": float(res["leakage"].max()),
        "max_diagnostic": float(res["diagnostic"].max()),
    }
    out.warnings = res["warnings"]
    return out


def _sweep_summary(cfg: dict, T: float) -> dict:
    res = transport_point(cfg, T)
    return {
        "T": T,
        "max_trace_distance": float(res["trace_distance"].max()),
        "max_leakage": float(res["leakage"].max()),
        "max_trace_residual": float(res["trace_residual"].max()),
        "max_diagnostic": float(res["diagnostic"].max()),
        "norm_drift": res["norm_drift"],
        "warnings": res["warnings"],
    }


def loglog_slope(x, y) -> float:
    """Least-squares slope of ``log y`` against ``log x``."""
    return float(np.polyfit(np.log(np.asarray(x, dtype=float)), np.log(np.asarray(y, dtype=float)), 1)[0])


def run_sweep(cfg: dict, seed: int, workers: int = 1) -> Outcome:
    durations = sorted(float(t) for t in cfg["sweep"]["T"])
    tols = cfg.get("tolerances", {})
    if workers > 1 and len(durations) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            points = list(pool.map(_sweep_summary, [cfg] * len(durations), durations))
    else:
        points = [_sweep_summary(cfg, T) for T in durations]
    points.sort(key=lambda p: p["T"])
    dist = [p["max_trace_distance"] for p in points]
    leak = [p["max_leakage"] for p in points]
    out = Outcome(
        "sweep",
        {"T": durations, "generator": cfg.get("transport", {}).get("generator", "reduced")},
    )
    out.header = ("T", "max_trace_distance", "max_leakage", "max_trace_residual", "max_diagnostic")
    out.rows = [tuple(p[k] for k in out.header) for p in points]
    slope_dist = loglog_slope(durations, dist) if len(points) > 1 else math.nan
    slope_leak = loglog_slope(durations, leak) if len(points) > 1 else math.nan
    out.rows.append(("slope", slope_dist, slope_leak, "", ""))
    out.check("trace_residual", max(p["max_trace_residual"] for p in points), tols)
    out.check("norm_drift", max(p["norm_drift"] for p in points), tols)
    out.flag("leakage_monotone", all(b <= a for a, b in zip(leak, leak[1:])))
    out.flag("trace_distance_monotone", all(b < a for a, b in zip(dist, dist[1:])))
    if "slope" in tols:
        out.check("slope", slope_dist, tols)
    out.residuals = {"slope_trace_distance": slope_dist, "slope_leakage": slope_leak}
    out.warnings = sorted({w for p in points for w in p["warnings"]})
    return out


RUNNERS = {
    "eigen-validate": run_eigen_validate,
    "generator": run_generator,
    "curvature": run_curvature,
    "transport": run_transport,
    "atlas-cocycle": run_atlas,
}


def run_experiment(cfg: dict, seed: int = 0, workers: int = 1) -> Outcome:
    name = cfg["experiment"]
    if name == "sweep":
        return run_sweep(cfg, seed, workers)
    return RUNNERS[name](cfg, seed)
