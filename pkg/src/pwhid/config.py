"""Experiment configuration: a JSON file with explicit seeds.

A config names either a ground-truth system (matrices inline) or a
kernel file, never both; every random choice is seeded from the file, so
a config pins its outputs byte for byte.  Malformed JSON is rejected
with the parser's line/column; semantic problems are rejected with the
offending key before any computation starts.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .recovery import ALSOptions
from .volterra import PWHSystem


class ConfigError(ValueError):
    """Invalid or inconsistent experiment configuration."""


_ALS_KEYS = {
    "max_cycles": int,
    "rel_change_tol": float,
    "pinv_cutoff": float,
    "restarts": int,
    "normalize_each_cycle": bool,
    "success_residual": float,
    "parallel_restarts": bool,
}


@dataclass(eq=False)
class ExperimentConfig:
    """Validated contents of a config file."""

    r: int
    L1: int
    L2: int
    d: int
    N: int
    points_seed: int
    als: ALSOptions
    system: PWHSystem = field(default=None)
    kernel_file: str = field(default=None)
    out_dir: str = "results"

    @property
    def memory(self) -> int:
        return self.L1 + self.L2 - 1


def _require(obj: dict, key: str, path):
    if key not in obj:
        raise ConfigError(f"{path}: missing required key '{key}'")
    return obj[key]


def _positive_int(obj: dict, key: str, path) -> int:
    v = _require(obj, key, path)
    if not isinstance(v, int) or isinstance(v, bool) or v < 1:
        raise ConfigError(f"{path}: key '{key}' must be a positive integer, got {v!r}")
    return v


def _matrix(obj: dict, key: str, rows: int, cols: int, path) -> np.ndarray:
    v = _require(obj, key, path)
    try:
        m = np.array(v, dtype=float)
    except (TypeError, ValueError):
        raise ConfigError(f"{path}: key 'system.{key}' must be a numeric matrix") from None
    if m.shape != (rows, cols):
        raise ConfigError(
            f"{path}: key 'system.{key}' must be {rows}x{cols} (rows of lists), got {m.shape}"
        )
    return m


def load_config(path) -> ExperimentConfig:
    """Parse and validate a config file.

    Raises
    ------
    ConfigError
        On malformed JSON (with line/column) or inconsistent contents.
    OSError
        If the file cannot be read.
    """
    with open(path, "r", encoding="utf-8") as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(
                f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}"
            ) from None
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: top level must be an object")

    r = _positive_int(raw, "r", path)
    L1 = _positive_int(raw, "L1", path)
    L2 = _positive_int(raw, "L2", path)
    d = _positive_int(raw, "d", path)
    n = _positive_int(raw, "N", path)

    seeds = _require(raw, "seeds", path)
    if not isinstance(seeds, dict):
        raise ConfigError(f"{path}: key 'seeds' must be an object")
    points_seed = seeds.get("points")
    als_seed = seeds.get("als")
    if not isinstance(points_seed, int) or not isinstance(als_seed, int):
        raise ConfigError(
            f"{path}: 'seeds' must carry integer 'points' and 'als' entries; "
            "seeds are never taken from the clock"
        )

    als_raw = raw.get("als", {})
    if not isinstance(als_raw, dict):
        raise ConfigError(f"{path}: key 'als' must be an object")
    unknown = set(als_raw) - set(_ALS_KEYS)
    if unknown:
        raise ConfigError(f"{path}: unknown 'als' option(s): {sorted(unknown)}")
    als_kwargs = {}
    for key, typ in _ALS_KEYS.items():
        if key in als_raw:
            v = als_raw[key]
            if typ is bool and not isinstance(v, bool):
                raise ConfigError(f"{path}: 'als.{key}' must be true or false")
            if typ is int and (not isinstance(v, int) or isinstance(v, bool)):
                raise ConfigError(f"{path}: 'als.{key}' must be an integer")
            if typ is float and not isinstance(v, (int, float)):
                raise ConfigError(f"{path}: 'als.{key}' must be a number")
            als_kwargs[key] = typ(v)
    try:
        als = ALSOptions(seed=als_seed, **als_kwargs)
    except ValueError as exc:
        raise ConfigError(f"{path}: 'als': {exc}") from None

    has_system = "system" in raw
    has_kernels = "kernel_file" in raw
    if has_system == has_kernels:
        raise ConfigError(
            f"{path}: exactly one of 'system' and 'kernel_file' must be present"
        )

    system = None
    kernel_file = None
    if has_system:
        sys_raw = raw["system"]
        if not isinstance(sys_raw, dict):
            raise ConfigError(f"{path}: key 'system' must be an object")
        A = _matrix(sys_raw, "A", L1, r, path)
        B = _matrix(sys_raw, "B", L2, r, path)
        C = _matrix(sys_raw, "coefficients", d, r, path)
        const0 = np.asarray(sys_raw.get("const0", [0.0] * r), dtype=float)
        if const0.shape != (r,):
            raise ConfigError(f"{path}: 'system.const0' must have {r} entries")
        try:
            system = PWHSystem(A=A, B=B, C=C, const0=const0)
        except ValueError as exc:
            raise ConfigError(f"{path}: 'system': {exc}") from None
    else:
        kernel_file = raw["kernel_file"]
        if not isinstance(kernel_file, str) or not kernel_file:
            raise ConfigError(f"{path}: 'kernel_file' must be a non-empty path string")

    out_dir = raw.get("out_dir", "results")
    if not isinstance(out_dir, str) or not out_dir:
        raise ConfigError(f"{path}: 'out_dir' must be a non-empty string")

    known = {"r", "L1", "L2", "d", "N", "seeds", "als", "system", "kernel_file", "out_dir"}
    extra = set(raw) - known
    if extra:
        raise ConfigError(f"{path}: unknown key(s): {sorted(extra)}")

    return ExperimentConfig(
        r=r, L1=L1, L2=L2, d=d, N=n,
        points_seed=points_seed, als=als,
        system=system, kernel_file=kernel_file, out_dir=out_dir,
    )
