"""Experiment configuration: a flat ``key = value`` file and its validated form.

Keys are dotted (``mechanism.beta``); a ``[section]`` line prefixes the keys
that follow it.  Values are JSON literals, and anything that is not valid
JSON is taken as a bare string.  Lines starting with ``#`` are comments.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .errors import ConfigError, DomainError
from .gwgen import OffspringLaw
from .mechanism import BROWNIAN, BranchingMechanism

__all__ = [
    "KINDS",
    "ExperimentConfig",
    "parse_flat",
    "dump_flat",
    "load_config",
]

KINDS = ("gen", "mark", "cuts", "theorem31", "corollary32", "rayleigh", "zmoments", "calibrate")


def parse_flat(text: str) -> dict:
    out: dict = {}
    section = ""
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip()
            if not section:
                raise ConfigError(f"line {lineno}: empty section name")
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        if not key:
            raise ConfigError(f"line {lineno}: missing key")
        if section:
            key = f"{section}.{key}"
        if key in out:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        value = value.strip()
        try:
            out[key] = json.loads(value)
        except json.JSONDecodeError:
            out[key] = value
    return out


def dump_flat(flat: dict) -> str:
    return "".join(f"{k} = {json.dumps(v, sort_keys=True)}\n" for k, v in sorted(flat.items()))


def load_config(path) -> dict:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_flat(text)


def _int(key, v, lo=None):
    if isinstance(v, bool) or not isinstance(v, int):
        raise ConfigError(f"{key}: expected an integer, got {v!r}")
    if lo is not None and v < lo:
        raise ConfigError(f"{key}: must be >= {lo}, got {v}")
    return v


def _float(key, v, positive=False, nonneg=False):
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
        raise ConfigError(f"{key}: expected a finite number, got {v!r}")
    if positive and not v > 0:
        raise ConfigError(f"{key}: must be positive, got {v}")
    if nonneg and not v >= 0:
        raise ConfigError(f"{key}: must be non-negative, got {v}")
    return float(v)


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str
    n: int = 1000
    replicas: int = 100
    master_seed: int = 0
    out: str = "out"
    beta: float = 0.5
    thresholds: tuple = (0.1, 0.05, 0.02)
    alpha: float = 0.05
    threads: int = 1
    mechanism: BranchingMechanism = BROWNIAN
    offspring: OffspringLaw = field(default_factory=lambda: OffspringLaw("poisson"))
    edge_scale: Optional[float] = None
    node_mass_scale: float = 0.0
    pilot_reps: int = 200
    cuts_parent: Optional[tuple] = None
    zmoment_orders: tuple = (1, 2, 3, 4)
    save_trees: bool = False

    _FLAT = {
        "kind": "kind", "n": "n", "replicas": "replicas", "seed": "master_seed", "out": "out",
        "beta": "beta", "thresholds": "thresholds", "alpha": "alpha", "threads": "threads",
        "scaling.edge_scale": "edge_scale", "scaling.node_mass_scale": "node_mass_scale",
        "calibrate.pilot_reps": "pilot_reps", "cuts.parent": "cuts_parent",
        "zmoments.orders": "zmoment_orders", "gen.save_trees": "save_trees",
    }

    @classmethod
    def from_flat(cls, flat: dict, kind: Optional[str] = None) -> "ExperimentConfig":
        flat = dict(flat)
        if kind is not None:
            if "kind" in flat and flat["kind"] != kind:
                raise ConfigError(f"kind: config says {flat['kind']!r} but {kind!r} was requested")
            flat["kind"] = kind
        kw = {}
        mech = {}
        off = {}
        for key, v in flat.items():
            if key in cls._FLAT:
                kw[cls._FLAT[key]] = v
            elif key.startswith("mechanism."):
                mech[key[len("mechanism."):]] = v
            elif key.startswith("offspring."):
                off[key[len("offspring."):]] = v
            else:
                raise ConfigError(f"{key}: unknown configuration key")
        if mech:
            try:
                kw["mechanism"] = BranchingMechanism.from_config(
                    {"alpha": mech.pop("alpha", 0.0), "beta": mech.pop("beta", 0.0), "levy": mech.pop("levy", "none")})
            except (DomainError, KeyError, TypeError, ValueError) as exc:
                raise ConfigError(f"mechanism: {exc}") from exc
            if mech:
                raise ConfigError(f"mechanism.{sorted(mech)[0]}: unknown configuration key")
        if off:
            try:
                kw["offspring"] = OffspringLaw.from_config({"kind": "poisson", **off})
            except (DomainError, KeyError, TypeError, ValueError) as exc:
                raise ConfigError(f"offspring: {exc}") from exc
        if "kind" not in kw:
            raise ConfigError("kind: missing experiment kind")
        for name in ("thresholds", "zmoment_orders", "cuts_parent"):
            if isinstance(kw.get(name), list):
                kw[name] = tuple(kw[name])
        cfg = cls(**kw)
        cfg.validate()
        return cfg

    def validate(self) -> None:
        if self.kind not in KINDS:
            raise ConfigError(f"kind: must be one of {', '.join(KINDS)}, got {self.kind!r}")
        _int("replicas", self.replicas, 1)
        _int("seed", self.master_seed, 0)
        _int("threads", self.threads, 1)
        _int("calibrate.pilot_reps", self.pilot_reps, 200)
        if self.kind == "calibrate" and self.replicas < 200:
            raise ConfigError(f"replicas: calibrate needs at least 200 pilot trees, got {self.replicas}")
        if self.cuts_parent is None:
            _int("n", self.n, 2)
        else:
            if not self.cuts_parent or not all(isinstance(p, int) for p in self.cuts_parent):
                raise ConfigError("cuts.parent: expected a list of integer parent indices")
        _float("beta", self.beta, nonneg=True)
        a = _float("alpha", self.alpha)
        if not 0 < a < 1:
            raise ConfigError(f"alpha: must lie in (0, 1), got {a}")
        if not isinstance(self.thresholds, tuple) or not self.thresholds:
            raise ConfigError("thresholds: expected a non-empty list")
        for e in self.thresholds:
            _float("thresholds", e, positive=True)
        if any(b >= a for a, b in zip(self.thresholds, self.thresholds[1:])):
            raise ConfigError(f"thresholds: must be strictly descending, got {list(self.thresholds)}")
        if self.edge_scale is not None:
            _float("scaling.edge_scale", self.edge_scale, positive=True)
        _float("scaling.node_mass_scale", self.node_mass_scale, nonneg=True)
        for k in self.zmoment_orders:
            _int("zmoments.orders", k, 1)
        if not isinstance(self.save_trees, bool):
            raise ConfigError(f"gen.save_trees: expected true or false, got {self.save_trees!r}")
        if not isinstance(self.out, str) or not self.out:
            raise ConfigError("out: expected a directory path")

    def to_flat(self) -> dict:
        """Flat echo of every setting; ``from_flat(to_flat())`` round-trips."""
        flat = {key: getattr(self, name) for key, name in self._FLAT.items()}
        for key in ("thresholds", "zmoments.orders", "cuts.parent"):
            if flat[key] is not None:
                flat[key] = list(flat[key])
        for k, v in self.mechanism.to_config().items():
            flat[f"mechanism.{k}"] = v
        for k, v in self.offspring.to_config().items():
            flat[f"offspring.{k}"] = v
        return flat
