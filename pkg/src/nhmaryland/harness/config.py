"""Experiment configuration: defaults, JSON files and validation."""

from __future__ import annotations

import dataclasses
import enum
import hashlib
import json
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from ..errors import ConfigError
from ..model import ModelParams, RationalApproximant, fibonacci_approximant

SCHEMA_VERSION = 1


class Kind(str, enum.Enum):
    SPECTRUM = "Spectrum"
    WINDING_SWEEP = "WindingSweep"
    PHASE_DIAGRAM = "PhaseDiagram"
    LYAPUNOV = "Lyapunov"
    ROTATIONS = "Rotations"
    VERIFY = "Verify"


# lattice sizes as Fibonacci indices of q: 610 = F_15, 377 = F_14, 233 = F_13
DEFAULT_FIB_INDEX = {
    Kind.SPECTRUM: 15,
    Kind.WINDING_SWEEP: 14,
    Kind.ROTATIONS: 13,
    Kind.PHASE_DIAGRAM: 14,
    Kind.LYAPUNOV: 14,
    Kind.VERIFY: 14,
}

DEFAULT_EPSILONS = {
    Kind.SPECTRUM: [0.1, 0.4407, 0.46, 0.5306, 0.6],
    Kind.WINDING_SWEEP: [round(0.05 + i * 0.75 / 29, 12) for i in range(30)],
    Kind.PHASE_DIAGRAM: [round(0.02 * i, 12) for i in range(1, 51)],
    Kind.LYAPUNOV: [0.1, 0.3, 0.6],
    Kind.ROTATIONS: [0.2],
    Kind.VERIFY: [0.1],
}

DEFAULT_TOLERANCES = {
    "loop_distance": 1e-2,
    "segment_distance": 1e-2,
    "edge_margin": 0.1,
    "lyapunov": 1e-2,
    "solvability": 1e-8,
    "off_spectrum": 1e-2,
    "decay_rate": 1e-2,
    "wavefunction": 1e-6,
    "multiset": 1e-8,
    "determinant": 1e-10,
    "flow_loop": 1e-2,
    "flow_sum": 1e-3,
    "circle": 0.05,
    "threshold": 1e-4,
}


@dataclass
class ExperimentConfig:
    kind: Kind
    V: float = 1.0
    epsilons: list[float] = field(default_factory=list)
    theta: float = 0.0
    fib_index: int | None = None
    pq: str | None = None
    theta_steps: int = 256
    out: str = "results"
    fmt: str = "csv"
    plot: bool = False
    tolerances: dict[str, float] = field(default_factory=lambda: dict(DEFAULT_TOLERANCES))
    base_energy: complex | None = None
    energies: list[complex] = field(default_factory=list)
    V_values: list[float] = field(default_factory=list)
    steps: int = 100_000
    phase_samples: int = 8
    only: list[str] = field(default_factory=list)
    workers: int | None = None

    @property
    def approximant(self) -> RationalApproximant:
        if self.pq:
            return RationalApproximant.parse(self.pq)
        return fibonacci_approximant(self.fib_index or DEFAULT_FIB_INDEX[self.kind])

    def params(self, epsilon: float, V: float | None = None) -> ModelParams:
        return ModelParams(self.V if V is None else V, epsilon, self.theta)

    def to_dict(self) -> dict[str, Any]:
        d = dataclasses.asdict(self)
        d["kind"] = self.kind.value
        d["base_energy"] = None if self.base_energy is None else _complex_text(self.base_energy)
        d["energies"] = [_complex_text(e) for e in self.energies]
        return d

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()


def _complex_text(z: complex) -> str:
    return repr(complex(z))


def parse_complex(text) -> complex:
    """Accepts numbers, strings like '1+0.5j' and JSON pairs [re, im]."""
    if isinstance(text, (int, float, complex)):
        return complex(text)
    if isinstance(text, (list, tuple)) and len(text) == 2:
        return complex(float(text[0]), float(text[1]))
    try:
        return complex(str(text).replace(" ", "").replace("i", "j"))
    except ValueError as exc:
        raise ConfigError(f"cannot parse complex number {text!r}") from exc


_FILE_KEYS = {
    "V", "epsilon", "epsilons", "theta", "fib_index", "pq", "theta_steps", "out", "format",
    "plot", "tolerances", "base_energy", "energies", "V_values", "steps", "phase_samples",
    "only", "workers", "kind",
}


def load_config_file(path: str | os.PathLike) -> dict[str, Any]:
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config file must hold a JSON object")
    unknown = set(data) - _FILE_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    return data


def build_config(kind: Kind, file_values: dict[str, Any] | None = None,
                 **overrides) -> ExperimentConfig:
    """Defaults, then the config file, then non-None CLI overrides."""
    values: dict[str, Any] = {}
    for source in (file_values or {}, {k: v for k, v in overrides.items() if v is not None}):
        for key, value in source.items():
            if key == "kind":
                continue
            if key == "epsilon":
                key = "epsilons"
                value = [value] if isinstance(value, (int, float)) else list(value)
            if key == "format":
                key = "fmt"
            if key in ("epsilons", "energies", "V_values", "only") and isinstance(value, tuple):
                value = list(value)
            if key == "tolerances":
                merged = dict(values.get("tolerances", DEFAULT_TOLERANCES))
                merged.update(value)
                value = merged
            values[key] = value
    try:
        cfg = ExperimentConfig(kind=kind, **values)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc
    if not cfg.epsilons and "epsilons" not in values:
        cfg.epsilons = list(DEFAULT_EPSILONS[kind])
    cfg.energies = [parse_complex(e) for e in cfg.energies]
    if cfg.base_energy is not None:
        cfg.base_energy = parse_complex(cfg.base_energy)
    validate(cfg)
    return cfg


def validate(cfg: ExperimentConfig):
    if not cfg.epsilons:
        raise ConfigError("the epsilon grid is empty")
    if any(not isinstance(e, (int, float)) or e < 0 for e in cfg.epsilons):
        raise ConfigError("epsilon values must be numbers >= 0")
    if cfg.kind in (Kind.SPECTRUM, Kind.WINDING_SWEEP, Kind.ROTATIONS) and min(cfg.epsilons) <= 0:
        raise ConfigError("ring experiments need epsilon > 0")
    if cfg.V < 0:
        raise ConfigError("V must be >= 0")
    if cfg.theta_steps < 64 and cfg.kind is Kind.WINDING_SWEEP:
        raise ConfigError("theta_steps must be >= 64 for winding sweeps")
    if cfg.theta_steps < 32:
        raise ConfigError("theta_steps must be >= 32")
    if cfg.fmt not in ("csv", "json"):
        raise ConfigError("format must be csv or json")
    if cfg.fib_index is not None and cfg.pq is not None:
        raise ConfigError("give either fib_index or pq, not both")
    try:
        cfg.approximant
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    if cfg.kind is not Kind.VERIFY:
        bad = [k for k, v in cfg.tolerances.items() if not (isinstance(v, (int, float)) and v > 0)]
        if bad:
            raise ConfigError(f"tolerances must be positive: {bad}")
    if cfg.steps < 10_000 or cfg.phase_samples < 1:
        raise ConfigError("need steps >= 1e4 and phase_samples >= 1")
    if cfg.workers is not None and cfg.workers < 1:
        raise ConfigError("workers must be >= 1")
    ensure_writable(cfg.out)


def ensure_writable(directory: str):
    path = Path(directory)
    try:
        path.mkdir(parents=True, exist_ok=True)
        with tempfile.NamedTemporaryFile(dir=path):
            pass
    except OSError as exc:
        raise ConfigError(f"output directory {directory} is not writable: {exc}") from exc


def worker_count(cfg: ExperimentConfig) -> int:
    cap = os.environ.get("NHM_WORKERS")
    n = cfg.workers or min(4, os.cpu_count() or 1)
    if cap:
        try:
            n = min(n, max(1, int(cap)))
        except ValueError as exc:
            raise ConfigError(f"NHM_WORKERS must be an integer, got {cap!r}") from exc
    return n
