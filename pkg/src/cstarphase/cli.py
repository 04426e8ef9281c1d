"""Batch experiment runner.

    cstarphase run CONFIG.json [--out DIR] [--seed N] [--workers N] [--verbose]

Exit status: 0 when every check passes, 1 when a check fails or the
computation breaks down, 2 for configuration errors (nothing is written).
The output directory is taken from ``--out``, then ``$CSTARPHASE_OUT``, then
the configuration's ``output.dir``, then the current directory.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
import time
from pathlib import Path

import jsonschema

from .experiments import EXPERIMENTS, PRESETS, ConfigError, Outcome, build_path, build_system, run_experiment

log = logging.getLogger("cstarphase")

OUT_ENV = "CSTARPHASE_OUT"
EXIT_OK, EXIT_FAILED, EXIT_CONFIG = 0, 1, 2

_MATRIX = {"type": "array", "items": {"type": "array"}}
_TERMS = {
    "type": "array",
    "minItems": 1,
    "items": {
        "type": "object",
        "required": ["powers", "matrix"],
        "properties": {"powers": {"type": "array", "items": {"type": "integer", "minimum": 0}}, "matrix": _MATRIX},
    },
}

CONFIG_SCHEMA = {
    "type": "object",
    "required": ["version", "experiment", "system", "path"],
    "additionalProperties": False,
    "properties": {
        "version": {"const": 1},
        "name": {"type": "string", "pattern": "^[A-Za-z0-9_.-]+$"},
        "experiment": {"enum": list(EXPERIMENTS)},
        "system": {
            "oneOf": [
                {
                    "type": "object",
                    "required": ["preset"],
                    "additionalProperties": False,
                    "properties": {
                        "preset": {"enum": list(PRESETS)},
                        "params": {
                            "type": "object",
                            "additionalProperties": False,
                            "properties": {
                                k: {"type": "number", "exclusiveMinimum": 0} for k in ("omega_c", "omega_b", "hbar")
                            }
                            | {"chi": {"type": "number"}},
                        },
                    },
                },
                {
                    "type": "object",
                    "required": ["n_s", "n_e"],
                    "additionalProperties": False,
                    "properties": {
                        "n_s": {"type": "integer", "minimum": 1},
                        "n_e": {"type": "integer", "minimum": 1},
                        "selector": {"type": "integer"},
                        "rotation": {
                            "type": "object",
                            "required": ["H0", "E0"],
                            "properties": {"H0": _MATRIX, "E0": _MATRIX},
                        },
                        "polynomial": {
                            "type": "object",
                            "required": ["H", "E0"],
                            "properties": {"H": _TERMS, "E0": _TERMS},
                        },
                    },
                    "oneOf": [{"required": ["rotation"]}, {"required": ["polynomial"]}],
                },
            ]
        },
        "path": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "T": {"type": "number", "exclusiveMinimum": 0},
                "N": {"type": "integer", "minimum": 2},
                "substeps": {"type": "integer", "minimum": 1},
                "steps_per_unit_time": {"type": "number", "exclusiveMinimum": 0},
                "min_steps": {"type": "integer", "minimum": 2},
                "circle": {
                    "type": "object",
                    "additionalProperties": False,
                    "properties": {
                        "radius": {"type": "number", "exclusiveMinimum": 0},
                        "plane": {"type": "array", "items": {"type": "integer", "minimum": 0}, "minItems": 2, "maxItems": 2},
                    },
                },
                "waypoints": {"type": "array", "minItems": 2, "items": {"type": "array", "items": {"type": "number"}}},
                "closed": {"type": "boolean"},
            },
            "oneOf": [{"required": ["circle"]}, {"required": ["waypoints"]}],
        },
        "sweep": {
            "type": "object",
            "required": ["T"],
            "properties": {"T": {"type": "array", "minItems": 1, "items": {"type": "number", "exclusiveMinimum": 0}}},
        },
        "eigen": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"samples": {"type": "integer", "minimum": 1}, "box": {"type": "number", "exclusiveMinimum": 0}},
        },
        "grid": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "directions": {"type": "array", "items": {"type": "integer", "minimum": 0}, "minItems": 1, "maxItems": 3},
                "lower": {"type": "array", "items": {"type": "number"}},
                "extent": {"type": "number", "exclusiveMinimum": 0},
                "points": {"type": "integer", "minimum": 3},
                "base": {"type": "array", "items": {"type": "number"}},
            },
        },
        "atlas": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"charts": {"type": "integer", "minimum": 1, "maximum": 4}, "amplitude": {"type": "number"}},
        },
        "transport": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "generator": {"enum": ["reduced", "full"]},
                "adiabatic_threshold": {"type": "number", "exclusiveMinimum": 0},
            },
        },
        "tolerances": {"type": "object", "additionalProperties": {"type": "number"}},
        "hbar": {"type": "number", "exclusiveMinimum": 0},
        "seed": {"type": "integer", "minimum": 0},
        "output": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"dir": {"type": "string"}},
        },
    },
}


def load_config(path: str | Path) -> dict:
    """Parse and validate a configuration file; raises :class:`ConfigError`."""
    try:
        cfg = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    # reject unknown experiments before anything else is looked at
    if cfg.get("experiment") not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment {cfg.get('experiment')!r}; expected one of {', '.join(EXPERIMENTS)}")
    try:
        jsonschema.validate(cfg, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"invalid config at {where}: {exc.message}") from exc
    if cfg["experiment"] == "transport" and "T" not in cfg["path"]:
        raise ConfigError("transport needs path.T")
    if cfg["experiment"] == "sweep" and "sweep" not in cfg:
        raise ConfigError("sweep needs a sweep.T list")
    # building the system and path catches shape errors before any computation
    try:
        system = build_system(cfg)
        if cfg["experiment"] in ("transport", "sweep"):
            build_path(cfg, system, cfg["sweep"]["T"][0] if cfg["experiment"] == "sweep" else None)
    except ConfigError:
        raise
    except (ValueError, KeyError, TypeError, IndexError) as exc:
        raise ConfigError(f"invalid system or path: {exc}") from exc
    return cfg


def resolve_out_dir(flag: str | None, cfg: dict) -> Path:
    """``--out`` beats ``$CSTARPHASE_OUT`` beats ``output.dir`` in the config."""
    if flag:
        return Path(flag)
    if os.environ.get(OUT_ENV):
        return Path(os.environ[OUT_ENV])
    return Path(cfg.get("output", {}).get("dir", "."))


def _cell(v) -> str:
    if isinstance(v, str):
        return v
    if isinstance(v, int) and not isinstance(v, bool):
        return str(v)
    return f"{float(v):.17g}"


def emit_report(outcome: Outcome, out_dir: Path, name: str, wall_time: float) -> list[Path]:
    """Write ``<name>.csv`` (when there are rows) and ``<name>.json``; return the paths."""
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    if outcome.header is not None and outcome.rows:
        csv_path = out_dir / f"{name}.csv"
        with open(csv_path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\r\n")
            w.writerow(outcome.header)
            for row in outcome.rows:
                w.writerow([_cell(v) for v in row])
        written.append(csv_path)
    summary = {
        "experiment": outcome.experiment,
        "params": outcome.params,
        "residuals": outcome.residuals,
        "checks": {k: c.as_dict() for k, c in outcome.checks.items()},
        "passed": outcome.passed,
        "warnings": outcome.warnings,
        "wall_time": wall_time,
    }
    json_path = out_dir / f"{name}.json"
    json_path.write_text(json.dumps(summary, indent=2, sort_keys=True, default=float) + "\n")
    written.append(json_path)
    return written


def run(config_path: str, out: str | None = None, seed: int | None = None, workers: int = 1) -> int:
    """Run one configuration and return the exit status."""
    try:
        cfg = load_config(config_path)
    except ConfigError as exc:
        log.error("config error: %s", exc)
        return EXIT_CONFIG
    seed = seed if seed is not None else int(cfg.get("seed", 0))
    out_dir = resolve_out_dir(out, cfg)
    name = cfg.get("name", cfg["experiment"])
    start = time.perf_counter()
    try:
        outcome = run_experiment(cfg, seed, workers)
    except ConfigError as exc:
        log.error("config error: %s", exc)
        return EXIT_CONFIG
    except (ValueError, ArithmeticError, RuntimeError) as exc:
        log.error("run failed: %s", exc)
        return EXIT_FAILED
    wall = time.perf_counter() - start
    try:
        paths = emit_report(outcome, out_dir, name, wall)
    except OSError as exc:
        log.error("cannot write report: %s", exc)
        return EXIT_CONFIG
    for p in paths:
        log.info("wrote %s", p)
    for w in outcome.warnings:
        log.warning("%s", w)
    failed = [(k, c) for k, c in outcome.checks.items() if not c.passed]
    for key, c in failed:
        log.error("check failed: %s (%s): %.3e exceeds %.3e", key, c.property, c.value, c.tolerance)
    return EXIT_FAILED if failed else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cstarphase", description="Operator-valued geometric phase experiments.")
    sub = parser.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run an experiment configuration")
    r.add_argument("config", help="JSON experiment configuration")
    r.add_argument("--out", help=f"output directory (overrides ${OUT_ENV} and the config)")
    r.add_argument("--seed", type=int, help="seed for randomized checks (default: config seed or 0)")
    r.add_argument("--workers", type=int, default=1, help="parallel sweep workers")
    r.add_argument("--verbose", action="store_true", help="log progress to stderr")
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    if args.workers < 1:
        log.error("config error: --workers must be at least 1")
        return EXIT_CONFIG
    return run(args.config, args.out, args.seed, args.workers)


if __name__ == "__main__":
    sys.exit(main())
