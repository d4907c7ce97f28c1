"""Deterministic CSV/JSON writers and the run manifest."""

from __future__ import annotations

import csv
import json
import math
import platform
import time
from contextlib import contextmanager
from pathlib import Path
from typing import Any, Iterable, Sequence

from .config import SCHEMA_VERSION, ExperimentConfig


def fmt_float(x: float) -> str:
    """17 significant digits; integers and labels pass through unchanged."""
    if isinstance(x, bool):
        return str(x).lower()
    if isinstance(x, int):
        return str(x)
    if isinstance(x, float):
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return format(x, ".17g")
    return str(x)


def _jsonable(value):
    if isinstance(value, complex):
        return [value.real, value.imag]
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if hasattr(value, "item"):
        return _jsonable(value.item())
    if hasattr(value, "value") and not isinstance(value, (int, float, str)):
        return value.value
    return value


def write_table(path: Path, header: Sequence[str], rows: Iterable[Sequence[Any]], fmt: str,
                extra: dict[str, Any] | None = None) -> Path:
    """Write rows as CSV (header, LF endings) or JSON with a schema_version field."""
    rows = [[_jsonable(v) for v in row] for row in rows]
    if fmt == "csv":
        path = path.with_suffix(".csv")
        with open(path, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for row in rows:
                w.writerow([fmt_float(v) for v in row])
    else:
        path = path.with_suffix(".json")
        doc = {"schema_version": SCHEMA_VERSION, "columns": list(header),
               "rows": [dict(zip(header, row)) for row in rows]}
        if extra:
            doc.update(_jsonable(extra))
        write_json(path, doc)
    return path


def write_json(path: Path, doc: dict[str, Any]) -> Path:
    doc = _jsonable(doc)
    doc.setdefault("schema_version", SCHEMA_VERSION)
    text = json.dumps(doc, indent=2, sort_keys=True, allow_nan=True, default=str)
    path.write_text(text + "\n", encoding="utf-8")
    return path


class Manifest:
    def __init__(self, cfg: ExperimentConfig):
        self.cfg = cfg
        self.stages: dict[str, float] = {}
        self.files: list[str] = []
        self.incomplete: list[str] = []

    @contextmanager
    def stage(self, name: str):
        t0 = time.perf_counter()
        try:
            yield
        except Exception:
            self.incomplete.append(name)
            raise
        finally:
            self.stages[name] = time.perf_counter() - t0

    def add(self, path: Path):
        self.files.append(path.name)

    def write(self) -> Path:
        import numba
        import numpy
        import scipy

        from .. import __version__

        doc = {
            "kind": self.cfg.kind.value,
            "config": self.cfg.to_dict(),
            "config_sha256": self.cfg.digest(),
            "versions": {"nhmaryland": __version__, "numpy": numpy.__version__,
                         "scipy": scipy.__version__, "numba": numba.__version__,
                         "python": platform.python_version()},
            "stage_seconds": self.stages,
            "files": sorted(self.files),
            "incomplete": self.incomplete,
        }
        return write_json(Path(self.cfg.out) / "manifest.json", doc)
