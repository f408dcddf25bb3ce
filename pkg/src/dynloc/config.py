"""Flat ``key = value`` run configuration.

Lines are ``key = value``; ``#`` starts a comment.  Grids accept either a
comma list (``0, 0.5, 0.7``) or an inclusive range ``start:step:stop``.
"""

from dataclasses import dataclass, fields, asdict
import math

import numpy as np

from .forcing import ScaledParams

EXPERIMENTS = (
    "waveform_table", "impulse_curve", "layer_width_curve", "dp_sweep_lambda",
    "dp_sweep_m", "psos", "qsos", "qsos_sequence",
)


class ConfigError(ValueError):
    def __init__(self, message, line=None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


def parse_grid(text):
    text = text.strip()
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ValueError("range must be start:step:stop")
        start, stp, stop = (float(s) for s in parts)
        if stp <= 0 or stop < start:
            raise ValueError("range needs step > 0 and stop >= start")
        n = int(math.floor((stop - start) / stp + 1e-9)) + 1
        # rounding keeps 0:0.1:1 from producing 0.30000000000000004
        return tuple(float(np.round(start + i * stp, 12)) for i in range(n))
    if not text:
        return ()
    return tuple(float(s) for s in text.split(","))


def _fmt_grid(values):
    return ", ".join(repr(float(v)) for v in values)


# name: (type, default, constraint description, check)
_SPEC = {
    "experiment": (str, "impulse_curve", f"one of {', '.join(EXPERIMENTS)}", lambda v: v in EXPERIMENTS),
    "kappa": (float, 0.36, "> 0 and finite", lambda v: 0 < v < math.inf),
    "lambda": (float, 2.0, ">= 0 and finite", lambda v: 0 <= v < math.inf),
    "m": (float, 0.0, "in [0, 1]", lambda v: 0 <= v <= 1),
    "hbar_eff": (float, 0.16, "> 0 and finite", lambda v: 0 < v < math.inf),
    "m_grid": ("grid", parse_grid("0:0.05:0.95") + (0.99,), "values in [0, 1)", lambda v: len(v) > 0 and all(0 <= x < 1 for x in v)),
    "m_values": ("grid", (0.0, 0.5, 0.7, 0.9), "values in [0, 1]", lambda v: len(v) > 0 and all(0 <= x <= 1 for x in v)),
    "lambda_grid": ("grid", parse_grid("0:0.25:7"), "values >= 0", lambda v: len(v) > 0 and all(x >= 0 for x in v)),
    "tau_samples": (int, 257, ">= 2", lambda v: v >= 2),
    "ensemble_size": (int, 100_000, ">= 1", lambda v: v >= 1),
    "n_periods": (int, 50, ">= 1", lambda v: v >= 1),
    "avg_window": (int, 10, ">= 1", lambda v: v >= 1),
    "classical_steps": (int, 1000, ">= 1", lambda v: v >= 1),
    "quantum_steps": (int, 2048, ">= 1", lambda v: v >= 1),
    "n_packets": (int, 8, ">= 1", lambda v: v >= 1),
    "n_cells": (int, 16, ">= 1", lambda v: v >= 1),
    "points_per_cell": (int, 64, "a power of two >= 32", lambda v: v >= 32 and not v & (v - 1)),
    "psos_nx": (int, 24, ">= 1", lambda v: v >= 1),
    "psos_np": (int, 24, ">= 1", lambda v: v >= 1),
    "psos_periods": (int, 200, ">= 1", lambda v: v >= 1),
    "p_min": (float, -3.0, "finite", math.isfinite),
    "p_max": (float, 3.0, "finite and > p_min", math.isfinite),
    "x0": (float, math.pi, "finite", math.isfinite),
    "p0": (float, 1.0, "finite", math.isfinite),
    "alpha": (float, 3.0, "> 0 and finite", lambda v: 0 < v < math.inf),
    "husimi_nx": (int, 128, ">= 2", lambda v: v >= 2),
    "husimi_np": (int, 121, ">= 2", lambda v: v >= 2),
    "seed": (int, 0, ">= 0", lambda v: v >= 0),
    "threads": (int, 0, ">= 0 (0 = auto)", lambda v: v >= 0),
    "output_path": (str, "results", "non-empty", lambda v: bool(v)),
}


def _attr(key):
    return "lam" if key == "lambda" else key


@dataclass(frozen=True)
class RunConfig:
    experiment: str = _SPEC["experiment"][1]
    kappa: float = _SPEC["kappa"][1]
    lam: float = _SPEC["lambda"][1]
    m: float = _SPEC["m"][1]
    hbar_eff: float = _SPEC["hbar_eff"][1]
    m_grid: tuple = _SPEC["m_grid"][1]
    m_values: tuple = _SPEC["m_values"][1]
    lambda_grid: tuple = _SPEC["lambda_grid"][1]
    tau_samples: int = _SPEC["tau_samples"][1]
    ensemble_size: int = _SPEC["ensemble_size"][1]
    n_periods: int = _SPEC["n_periods"][1]
    avg_window: int = _SPEC["avg_window"][1]
    classical_steps: int = _SPEC["classical_steps"][1]
    quantum_steps: int = _SPEC["quantum_steps"][1]
    n_packets: int = _SPEC["n_packets"][1]
    n_cells: int = _SPEC["n_cells"][1]
    points_per_cell: int = _SPEC["points_per_cell"][1]
    psos_nx: int = _SPEC["psos_nx"][1]
    psos_np: int = _SPEC["psos_np"][1]
    psos_periods: int = _SPEC["psos_periods"][1]
    p_min: float = _SPEC["p_min"][1]
    p_max: float = _SPEC["p_max"][1]
    x0: float = _SPEC["x0"][1]
    p0: float = _SPEC["p0"][1]
    alpha: float = _SPEC["alpha"][1]
    husimi_nx: int = _SPEC["husimi_nx"][1]
    husimi_np: int = _SPEC["husimi_np"][1]
    seed: int = _SPEC["seed"][1]
    threads: int = _SPEC["threads"][1]
    output_path: str = _SPEC["output_path"][1]

    @property
    def params(self):
        return ScaledParams(kappa=self.kappa, lam=self.lam, m=self.m, hbar_eff=self.hbar_eff)

    def to_dict(self):
        d = asdict(self)
        d["lambda"] = d.pop("lam")
        return d

    def with_overrides(self, **kw):
        """Copy with some keys replaced, re-validated (keys use config names)."""
        d = self.to_dict()
        d.update({k: v for k, v in kw.items() if v is not None})
        return _build(d, {})


def _convert(key, raw):
    kind = _SPEC[key][0]
    if kind == "grid":
        return parse_grid(raw)
    if kind is int:
        try:
            return int(raw)  # exact, also above 2**53
        except ValueError:
            pass
        f = float(raw)
        if not f.is_integer():
            raise ValueError("expected an integer")
        return int(f)
    if kind is float:
        return float(raw)
    return raw


def _build(values, lines):
    for key, val in values.items():
        _, _, desc, check = _SPEC[key]
        if not check(val):
            raise ConfigError(f"{key} = {val!r} violates constraint: {key} {desc}", lines.get(key))
    if values.get("p_max", _SPEC["p_max"][1]) <= values.get("p_min", _SPEC["p_min"][1]):
        raise ConfigError("p_max must be greater than p_min", lines.get("p_max"))
    return RunConfig(**{_attr(k): v for k, v in values.items()})


def parse_config(text):
    """Parse and validate config text; unknown keys and bad values raise ConfigError."""
    values = {}
    lines = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {line!r}", lineno)
        key, raw = (s.strip() for s in line.split("=", 1))
        if key not in _SPEC:
            raise ConfigError(f"unknown key {key!r}", lineno)
        if key in values:
            raise ConfigError(f"duplicate key {key!r}", lineno)
        try:
            values[key] = _convert(key, raw)
        except ValueError as exc:
            raise ConfigError(f"bad value for {key}: {raw!r} ({exc})", lineno) from None
        lines[key] = lineno
    return _build(values, lines)


def emit_config(cfg):
    """Render a config as text that ``parse_config`` reads back unchanged."""
    out = []
    for key, val in cfg.to_dict().items():
        if _SPEC[key][0] == "grid":
            out.append(f"{key} = {_fmt_grid(val)}")
        elif isinstance(val, float):
            out.append(f"{key} = {val!r}")
        else:
            out.append(f"{key} = {val}")
    return "\n".join(out) + "\n"


def describe_defaults():
    rows = []
    for key, (kind, default, desc, _) in _SPEC.items():
        shown = _fmt_grid(default) if kind == "grid" else default
        rows.append(f"  {key:<16} {desc:<28} default: {shown}")
    return "\n".join(rows)


CONFIG_KEYS = tuple(_SPEC)
assert {_attr(k) for k in _SPEC} == {f.name for f in fields(RunConfig)}
