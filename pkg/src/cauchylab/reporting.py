"""Configuration parsing and report serialization (CSV, JSON, SVG).

Configs are flat TOML documents: top-level ``key = value`` pairs, with nested
arrays for polynomial coefficient tables. Every artifact records the seed.
"""

from __future__ import annotations

import csv
import io as _io  # stdlib
import json
import logging
import math
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Sequence

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover - exercised on 3.10
    import tomli as tomllib

log = logging.getLogger("cauchylab")

KINDS = ("subspace-random", "scale-random", "sweep-1d", "disk-crossing", "verify-all")
VERB_TO_KIND = {
    "subspace-lab": "subspace-random",
    "scale-lab": "scale-random",
    "sweep-1d": "sweep-1d",
    "disk-crossing": "disk-crossing",
    "verify": "verify-all",
}


class ConfigError(ValueError):
    """Malformed configuration; the message names the offending line or key."""


@dataclass
class ExperimentConfig:
    kind: str
    seed: int = 1
    params: dict = field(default_factory=dict)
    out: str | None = None
    source: str | None = None

    def to_dict(self) -> dict:
        return {"kind": self.kind, "seed": self.seed, **self.params}


# allowed keys and their types per kind; values are defaults
SCHEMAS: dict[str, dict[str, Any]] = {
    "subspace-random": {
        "trials": 200,
        "dim_min": 2,
        "dim_max": 12,
        "family_grid": [1e-3, 1e-2, 1e-1],
    },
    "scale-random": {
        "operators": 200,
        "K_max": 16,
        "fiber_max": 2,
        "t_list": [0.5, 1.0, 2.7],
        "triples": 5,
        "transfer_t": 1.5,
        "transfer_grid": [1e-3, 1e-2, 1e-1],
    },
    "sweep-1d": {
        "d": 2,
        "m": 1,
        "coeffs": [[[[[0.0, 0.0]]]], [[[[0.0, 0.0]]]], [[[[-1.0, 0.0]]]]],
        "q": [[[[[1.0, 0.0]]], [[[1.0, 0.0]]], [[[-2.0, 0.0]]], [[[3.0, 0.0]]]]],
        "b0": 0.5,
        "steps": [1e-1, 1e-2, 1e-3],
        "refinement_factor": 5.0,
        "final_tol": 1e-2,
    },
    "disk-crossing": {
        "V": [0.0],
        "b": 5.8,
        "bracket_halfwidth": 0.5,
        "pole_mode": 0,
        "K": 20,
        "s_list": [-1.0, 0.0, 1.0],
        "grid": [-0.1, -0.01, -0.001, 0.001, 0.01, 0.1],
        "lipschitz_budget": 10.0,
    },
    "verify-all": {
        "criteria": [1, 2, 3, 4, 5, 6, 7, 8, 9],
    },
}


def _check_type(kind: str, key: str, value, default):
    if isinstance(default, bool):
        ok = isinstance(value, bool)
    elif isinstance(default, int):
        ok = isinstance(value, int) and not isinstance(value, bool)
    elif isinstance(default, float):
        ok = isinstance(value, (int, float)) and not isinstance(value, bool)
    elif isinstance(default, list):
        ok = isinstance(value, list)
    else:
        ok = True
    if not ok:
        raise ConfigError(f"key '{key}' of kind '{kind}' expects {type(default).__name__}, got {value!r}")
    if isinstance(value, float) and not math.isfinite(value):
        raise ConfigError(f"key '{key}' must be finite")


def parse_config(text: str, kind: str | None = None, source: str | None = None) -> ExperimentConfig:
    """Parse and validate a TOML config string.

    ``kind`` (from the CLI verb) is used when the document has no ``kind`` key
    and must agree with it otherwise.
    """
    where = source or "<config>"
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{where}: {exc}") from None
    doc_kind = data.pop("kind", None)
    if doc_kind is not None and kind is not None and doc_kind != kind:
        raise ConfigError(f"{where}: key 'kind' is '{doc_kind}' but the command expects '{kind}'")
    kind = doc_kind or kind
    if kind not in KINDS:
        raise ConfigError(f"{where}: key 'kind' must be one of {', '.join(KINDS)}")
    seed = data.pop("seed", 1)
    if not isinstance(seed, int) or isinstance(seed, bool) or seed < 0:
        raise ConfigError(f"{where}: key 'seed' must be a non-negative integer")
    out = data.pop("out", None)
    if out is not None and not isinstance(out, str):
        raise ConfigError(f"{where}: key 'out' must be a string")
    schema = SCHEMAS[kind]
    params = {}
    for key, value in data.items():
        if key not in schema:
            raise ConfigError(f"{where}: unknown key '{key}' for kind '{kind}'")
        if isinstance(value, dict):
            raise ConfigError(f"{where}: key '{key}': tables are not allowed (flat keys only)")
        _check_type(kind, key, value, schema[key])
        params[key] = value
    merged = {k: (params[k] if k in params else v) for k, v in schema.items()}
    return ExperimentConfig(kind, seed, merged, out, source)


def load_config(path: str | os.PathLike | None, kind: str) -> ExperimentConfig:
    if path is None:
        return parse_config("", kind)
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {p}: {exc.strerror}") from None
    return parse_config(text, kind, str(p))


@dataclass
class Assertion:
    name: str
    lhs: float
    rhs: float
    relation: str = "<="

    @property
    def passed(self) -> bool:
        if self.relation == "<=":
            return bool(self.lhs <= self.rhs)
        if self.relation == ">=":
            return bool(self.lhs >= self.rhs)
        raise ValueError(self.relation)

    @property
    def slack(self) -> float:
        return float(self.rhs - self.lhs) if self.relation == "<=" else float(self.lhs - self.rhs)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "lhs": float(self.lhs),
            "relation": self.relation,
            "rhs": float(self.rhs),
            "slack": self.slack,
            "passed": self.passed,
        }


def fmt(x) -> str:
    """Numbers with 17 significant digits; integers and text verbatim."""
    if isinstance(x, bool):
        return "1" if x else "0"
    if isinstance(x, int):
        return str(x)
    if isinstance(x, float):
        return "%.17g" % x
    return str(x)


@dataclass
class Table:
    name: str
    columns: Sequence[str]
    rows: list = field(default_factory=list)

    def add(self, *row):
        if len(row) != len(self.columns):
            raise ValueError(f"table {self.name}: row has {len(row)} fields, expected {len(self.columns)}")
        self.rows.append(tuple(row))

    def column(self, name: str) -> list:
        i = list(self.columns).index(name)
        return [r[i] for r in self.rows]


def write_csv(table: Table, path: Path, header: dict) -> Path:
    """CSV with one ``# key=value`` comment line, then a header row."""
    buf = _io.StringIO()
    buf.write("# " + " ".join(f"{k}={v}" for k, v in header.items()) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(table.columns)
    for row in table.rows:
        w.writerow([fmt(v) for v in row])
    path.write_text(buf.getvalue(), encoding="utf-8")
    return path


def _jsonable(x):
    if isinstance(x, float):
        return x if math.isfinite(x) else str(x)
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if hasattr(x, "item"):
        return _jsonable(x.item())
    return x


def write_json(data: dict, path: Path) -> Path:
    path.write_text(json.dumps(_jsonable(data), indent=2, sort_keys=False) + "\n", encoding="utf-8")
    return path


def plot_lines(
    path: Path,
    series: Iterable[tuple[str, Sequence[float], Sequence[float]]],
    xlabel: str,
    ylabel: str,
    title: str,
    log_scale: bool = False,
    seed: int | None = None,
) -> Path | None:
    """Write one SVG line plot; returns ``None`` (and warns) when there is nothing to draw."""
    series = [(lab, list(x), list(y)) for lab, x, y in series if len(x)]
    if not series:
        log.warning("no data for plot %s; skipped", path.name)
        return None
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    with matplotlib.rc_context({"svg.hashsalt": "cauchylab", "svg.fonttype": "none"}):
        fig, ax = plt.subplots(figsize=(6.4, 4.0))
        for label, x, y in series:
            if log_scale:
                pairs = [(a, b) for a, b in zip(x, y) if b > 0]
                x, y = [p[0] for p in pairs], [p[1] for p in pairs]
            ax.plot(x, y, marker="o", markersize=3, label=label)
        if log_scale:
            ax.set_yscale("log")
        ax.set_xlabel(xlabel)
        ax.set_ylabel(ylabel)
        ax.set_title(title)
        if len(series) > 1:
            ax.legend(fontsize="small")
        fig.tight_layout()
        desc = f"seed={seed}" if seed is not None else ""
        fig.savefig(path, format="svg", metadata={"Date": None, "Title": title, "Description": desc})
        plt.close(fig)
    return path
