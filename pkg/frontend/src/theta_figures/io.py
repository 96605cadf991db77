"""Readers for the persisted artifacts the renderers consume.

A series file is plain CSV preceded by ``#``-prefixed metadata lines
(``# key: value``), then one header row, then float rows.  A verdict file
is a JSON document ``{"pass": bool, "metrics": {...}}``.  Readers validate
shape and report schema problems with a column diagnostic; they never write.
"""

import json
from dataclasses import dataclass, field

import numpy as np


class SchemaError(ValueError):
    """A series file does not match the shape a renderer expects."""


@dataclass(frozen=True)
class Series:
    """One parsed CSV series: metadata, column names, and a float matrix."""

    meta: dict = field(default_factory=dict)
    columns: tuple = ()
    values: np.ndarray = field(default_factory=lambda: np.empty((0, 0)))

    def column(self, name: str) -> np.ndarray:
        try:
            idx = self.columns.index(name)
        except ValueError:
            raise SchemaError(
                f"no column {name!r}; file has columns {list(self.columns)}"
            ) from None
        return self.values[:, idx]


def read_series(path: str) -> Series:
    """Parse a metadata-prefixed CSV series file.

    Raises :class:`SchemaError` for an empty file, a missing header, rows
    whose width disagrees with the header, or non-numeric cells.
    """

    meta = {}
    header = None
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                body = line.lstrip("#").strip()
                key, sep, value = body.partition(":")
                if sep:
                    meta[key.strip()] = value.strip()
                continue
            cells = [c.strip() for c in line.split(",")]
            if header is None:
                header = cells
                continue
            if len(cells) != len(header):
                raise SchemaError(
                    f"{path}:{lineno}: row has {len(cells)} cells but the "
                    f"header names {len(header)} columns {header}")
            try:
                rows.append([float(c) for c in cells])
            except ValueError:
                raise SchemaError(
                    f"{path}:{lineno}: non-numeric cell in row {cells}"
                ) from None
    if header is None:
        raise SchemaError(f"{path}: no header row found")
    if not rows:
        raise SchemaError(f"{path}: header {header} but no data rows")
    return Series(meta=meta, columns=tuple(header),
                  values=np.array(rows, dtype=np.float64))


def require_columns(series: Series, expected, kind: str, path: str) -> None:
    """Fail with a column diagnostic unless the header matches exactly."""

    if list(series.columns) != list(expected):
        raise SchemaError(
            f"{path}: {kind} expects columns {list(expected)}, "
            f"got {list(series.columns)}")


def read_verdict(path: str) -> dict:
    """Load a verdict JSON document (``{"pass": ..., "metrics": ...}``)."""

    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    if not isinstance(doc, dict) or "metrics" not in doc:
        raise SchemaError(f"{path}: verdict JSON must carry a 'metrics' object")
    return doc


def verdict_rate_slope(verdict: dict, kind: str, theta: float = None):
    """Fetch the fitted slope for one error kind from a rate verdict.

    ``metrics.fits`` maps labels like ``"theta=0.0 variance"`` to either
    ``{"slope": ..., "r_squared": ...}`` or ``{"exact": true}``.  With a
    ``theta`` the label must match it; otherwise a unique slope-bearing
    entry of the requested kind is accepted.
    """

    fits = verdict.get("metrics", {}).get("fits", {})
    matches = []
    for label, fit in fits.items():
        if not label.endswith(" " + kind) or "slope" not in fit:
            continue
        if theta is not None and not label.startswith(f"theta={theta} "):
            continue
        matches.append(float(fit["slope"]))
    if len(matches) == 1:
        return matches[0]
    if not matches:
        return None
    raise SchemaError(
        f"verdict has {len(matches)} {kind!r} fits; pass a theta to pick one")
