"""Four figure kinds rendered from persisted series files.

Rendering is deterministic given the inputs, reads files but never writes
back to them, and overwrites the output image idempotently.  Matplotlib
runs on the Agg backend so no display is required.
"""

import os
import re
from dataclasses import dataclass, field
from typing import Optional

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be pinned first)
import numpy as np  # noqa: E402

from .io import (  # noqa: E402
    SchemaError,
    Series,
    read_series,
    read_verdict,
    require_columns,
    verdict_rate_slope,
)

SCHEMAS = {
    "density_evolution": ("t", "x", "mass"),
    "ks_timeline": ("t", "statistic", "p_value"),
    "rate_loglog": ("h", "err_bl", "err_var"),
    "heatmap_2d": ("t", "x", "y", "mass"),
}

KINDS = tuple(sorted(SCHEMAS))


@dataclass(frozen=True)
class FigureSpec:
    """What to draw: figure kind, input series, optional verdict, output path."""

    kind: str
    input_path: str
    output_path: str
    verdict_path: Optional[str] = None

    def __post_init__(self):
        if self.kind not in SCHEMAS:
            raise SchemaError(
                f"unknown figure kind {self.kind!r}; choose from {list(KINDS)}")


@dataclass(frozen=True)
class RenderResult:
    """Where the image landed plus the text annotations drawn onto it."""

    kind: str
    output_path: str
    annotations: dict = field(default_factory=dict)


def _snapshot_groups(series: Series):
    """Yield ``(t, row_mask)`` per distinct time, in time order."""

    times = series.column("t")
    for t in np.unique(times):
        yield float(t), times == t


def _draw_density_evolution(ax, series: Series) -> dict:
    xs = series.column("x")
    mass = series.column("mass")
    for t, mask in _snapshot_groups(series):
        ax.plot(xs[mask], mass[mask], label=f"t = {t:g}", linewidth=1.2)
    ax.set_xlabel("x")
    ax.set_ylabel("density")
    ax.set_title("Empirical density over time")
    ax.legend(fontsize=8)
    return {}


def _draw_ks_timeline(ax, series: Series) -> dict:
    t = series.column("t")
    p = series.column("p_value")
    ax.plot(t, p, linewidth=1.2, label="K-S p-value")
    ax.axhline(0.05, color="crimson", linestyle="--", linewidth=1.0,
               label="p = 0.05")
    ax.set_xlabel("t")
    ax.set_ylabel("p-value")
    ax.set_ylim(-0.02, 1.02)
    ax.set_title("Distributional agreement along the run")
    ax.legend(fontsize=8)
    return {"reference_level": "0.05"}


def _theta_from_name(path: str):
    """Recover the theta encoded in a rate series filename, if any."""

    m = re.search(r"theta([0-9]+p[0-9]+|[0-9]+)", os.path.basename(path))
    if not m:
        return None
    return float(m.group(1).replace("p", "."))


def _draw_rate_loglog(ax, series: Series, spec: FigureSpec) -> dict:
    hs = series.column("h")
    err_var = series.column("err_var")
    err_bl = series.column("err_bl")
    if np.isfinite(err_var).all() and (err_var > 0).all():
        errors, kind_label = err_var, "variance"
    else:
        errors, kind_label = err_bl, "bl"
    if not ((errors > 0) & np.isfinite(errors)).all():
        raise SchemaError(
            f"{spec.input_path}: rate errors must be positive and finite "
            f"to plot on log-log axes")

    coeffs = np.polyfit(np.log(hs), np.log(errors), 1)
    slope = float(coeffs[0])
    source = "fit"
    if spec.verdict_path is not None:
        verdict_slope = verdict_rate_slope(
            read_verdict(spec.verdict_path), kind_label,
            theta=_theta_from_name(spec.input_path))
        if verdict_slope is not None:
            slope, source = verdict_slope, "verdict"

    ax.loglog(hs, errors, "o", label=f"{kind_label} error")
    grid = np.linspace(np.log(hs.min()), np.log(hs.max()), 50)
    ax.loglog(np.exp(grid), np.exp(coeffs[1] + coeffs[0] * grid), "-",
              linewidth=1.0, label="least-squares fit")
    annotation = f"slope = {slope:.2f}"
    ax.annotate(annotation, xy=(0.05, 0.9), xycoords="axes fraction")
    ax.set_xlabel("step size h")
    ax.set_ylabel("error")
    ax.set_title("Error against step size")
    ax.legend(fontsize=8)
    return {"slope": annotation, "slope_source": source,
            "error_kind": kind_label}


def _draw_heatmap_2d(fig, ax, series: Series) -> dict:
    last_t = float(np.unique(series.column("t"))[-1])
    mask = series.column("t") == last_t
    xs = series.column("x")[mask]
    ys = series.column("y")[mask]
    mass = series.column("mass")[mask]
    ux, uy = np.unique(xs), np.unique(ys)
    grid = np.full((ux.size, uy.size), np.nan)
    grid[np.searchsorted(ux, xs), np.searchsorted(uy, ys)] = mass
    if np.isnan(grid).any():
        raise SchemaError(
            "heatmap rows do not cover a full x-y grid at the final time")
    mesh = ax.pcolormesh(ux, uy, grid.T, shading="nearest", cmap="viridis")
    fig.colorbar(mesh, ax=ax, label="density")
    ax.set_xlabel("x")
    ax.set_ylabel("y")
    ax.set_title(f"Joint density at t = {last_t:g}")
    return {"time": f"{last_t:g}"}


def render(spec: FigureSpec) -> RenderResult:
    """Draw one figure from files and write the image at ``output_path``.

    Raises :class:`SchemaError` (before writing anything) when the series
    is empty or its header does not match the figure kind.
    """

    series = read_series(spec.input_path)
    require_columns(series, SCHEMAS[spec.kind], spec.kind, spec.input_path)

    fig, ax = plt.subplots(figsize=(6.4, 4.2), dpi=120)
    try:
        if spec.kind == "density_evolution":
            annotations = _draw_density_evolution(ax, series)
        elif spec.kind == "ks_timeline":
            annotations = _draw_ks_timeline(ax, series)
        elif spec.kind == "rate_loglog":
            annotations = _draw_rate_loglog(ax, series, spec)
        else:
            annotations = _draw_heatmap_2d(fig, ax, series)
        fig.tight_layout()
        fig.savefig(spec.output_path)
    finally:
        plt.close(fig)
    return RenderResult(kind=spec.kind, output_path=spec.output_path,
                        annotations=annotations)
