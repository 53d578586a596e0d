"""Model configurations and their file format (TOML or JSON, fixed key sets)."""

from __future__ import annotations

import json
import sys
from dataclasses import asdict, dataclass, fields
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

__all__ = ["ConfigError", "FHNConfig", "TubularConfig", "load_mapping", "config_from_mapping",
           "load_profile"]


class ConfigError(ValueError):
    """Invalid configuration (unknown key, wrong type, out-of-range value)."""


@dataclass(frozen=True)
class FHNConfig:
    """FitzHugh-Nagumo setup on ``s in [0, L]``.

    ``quadratic_coeff`` is the ``v**2`` coefficient of the cubic source
    ``-v**3 + a v**2 - 0.1 v``. The default 1.1 is the standard
    ``v (v - 0.1) (1 - v)`` kinetics, which has the oscillatory regime.
    ``flux_sign`` relates the stimulus to the left flux, ``v_s(0) = flux_sign * u``.
    """

    l: float = 1.0
    c: float = 0.05
    gamma: float = 2.0
    h: float = 0.5
    epsilon: float = 0.015
    n: int = 512
    t_f: float = 12.0
    quadratic_coeff: float = 1.1
    flux_sign: float = -1.0

    def __post_init__(self):
        _check_types(self)
        if self.n < 3:
            raise ConfigError("n must be at least 3")
        if self.epsilon <= 0:
            raise ConfigError("epsilon must be positive")
        if self.l <= 0 or self.t_f <= 0:
            raise ConfigError("l and t_f must be positive")
        if self.flux_sign not in (-1.0, 1.0):
            raise ConfigError("flux_sign must be 1 or -1")


@dataclass(frozen=True)
class TubularConfig:
    """Non-adiabatic tubular reactor with one Arrhenius reaction on ``s in [0, 1]``."""

    pe: float = 5.0
    damkohler: float = 0.167
    b_const: float = 0.5
    beta: float = 2.5
    gamma: float = 25.0
    theta_ref: float = 1.0
    mu: float = 1.0
    n: int = 100
    t_f: float = 30.0
    convection: str = "upwind"

    def __post_init__(self):
        _check_types(self)
        if self.n < 3:
            raise ConfigError("n must be at least 3")
        if self.pe <= 0:
            raise ConfigError("pe must be positive")
        if self.convection not in ("upwind", "central"):
            raise ConfigError("convection must be 'upwind' or 'central'")
        if self.t_f <= 0:
            raise ConfigError("t_f must be positive")


def _check_types(cfg):
    for f in fields(cfg):
        val = getattr(cfg, f.name)
        if f.type in ("float", float):
            if isinstance(val, bool) or not isinstance(val, (int, float)):
                raise ConfigError(f"key {f.name!r} must be a number, got {val!r}")
            object.__setattr__(cfg, f.name, float(val))
        elif f.type in ("int", int):
            if isinstance(val, bool) or not isinstance(val, int):
                raise ConfigError(f"key {f.name!r} must be an integer, got {val!r}")
        elif f.type in ("str", str) and not isinstance(val, str):
            raise ConfigError(f"key {f.name!r} must be a string, got {val!r}")


def config_from_mapping(kind, mapping):
    cls = {"fhn": FHNConfig, "tubular": TubularConfig}.get(kind)
    if cls is None:
        raise ConfigError(f"unknown model {kind!r}")
    allowed = {f.name for f in fields(cls)}
    unknown = sorted(set(mapping) - allowed)
    if unknown:
        raise ConfigError(f"unknown {kind} config key(s): {', '.join(unknown)}")
    return cls(**mapping)


def load_mapping(path):
    """Read a TOML or JSON file into a dict (format chosen by suffix)."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        if path.suffix.lower() == ".json":
            return json.loads(text)
        return tomllib.loads(text)
    except (json.JSONDecodeError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError(f"cannot parse config {path}: {exc}") from exc


def as_dict(cfg):
    return asdict(cfg)


def load_profile(path, n, length=1.0):
    """Read an ``(s, value)`` CSV profile and interpolate it onto the ``n`` grid nodes.

    A header row is optional. ``s`` must be increasing and cover ``[0, length]``.
    """
    import numpy as np

    try:
        data = np.genfromtxt(path, delimiter=",", dtype=float)
    except OSError as exc:
        raise ConfigError(f"cannot read profile {path}: {exc}") from exc
    data = np.atleast_2d(data)
    data = data[~np.isnan(data).any(axis=1)]
    if data.ndim != 2 or data.shape[1] != 2 or len(data) < 2:
        raise ConfigError(f"profile {path} must hold at least two (s, value) rows")
    s, v = data[:, 0], data[:, 1]
    if np.any(np.diff(s) <= 0):
        raise ConfigError(f"profile {path}: s must be strictly increasing")
    if s[0] > 0 or s[-1] < length:
        raise ConfigError(f"profile {path} does not cover [0, {length:g}]")
    return np.interp(np.linspace(0.0, length, n), s, v)
