"""Panel figures for spectra sweeps plus a parameter-plane manifold map.

One image per gain value found in the sweep CSV.  Real parts are drawn as
curves; nonzero imaginary parts become shaded ribbons whose half-width is
|Im eps| in data units, so a gain value of exactly zero yields a pure line
plot.  Curve styling encodes the band indices: linestyle follows the first
metric (+1 solid, -1 dashed) and colour follows the second (+1 blue, -1
orange); with a single metric the linestyle carries everything and the
colour stays fixed.  Segments whose indices are undefined are neutral gray.

Rendering is deterministic: Agg backend, fixed figure geometry, pinned SVG
hashsalt and no date metadata, so repeated runs produce identical bytes.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  backend must be set first
import numpy as np  # noqa: E402

from .csvio import (  # noqa: E402
    GAMMA_MATCH_TOL,
    SchemaError,
    SweepTable,
    load_events,
    load_manifold,
    load_sweep,
)

DEFAULT_STYLE: dict = {
    "figsize": (7.2, 4.6),
    "dpi": 100,
    "linewidth": 1.3,
    "ribbon_alpha": 0.30,
    "colors": {1: "tab:blue", -1: "tab:orange"},
    "single_metric_color": "black",
    "undefined_color": "0.6",
    "diabolical": {"marker": "o", "color": "tab:red", "size": 7.0},
    "ep2": {"marker": "D", "color": "black", "size": 6.0},
    "unresolved": {"marker": "o", "color": "0.45", "size": 6.0},
    "avoided_span_color": "#b0c4de",
    "avoided_span_alpha": 0.6,
    "termination_markers": {
        "EPBoundary": ("D", "black"),
        "DomainBoundary": ("o", "white"),
        "StepLimit": ("s", "0.6"),
    },
}


@dataclass(frozen=True)
class FigureSpec:
    """Inputs and layout of one rendering job.

    Panels are laid out one per gain value present in the sweep file, in
    file order.  Every gain value referenced by the events file must exist
    in the sweep file; the manifold file, when given, adds one extra
    parameter-plane figure.
    """

    sweep: Path
    events: Path
    manifold: Optional[Path] = None
    out_dir: Path = Path(".")
    fmt: str = "png"
    styling: dict = field(default_factory=lambda: dict(DEFAULT_STYLE))


def render(spec: FigureSpec) -> list:
    """Render all figures for a spec; returns the written paths."""
    if spec.fmt not in ("png", "svg"):
        raise SchemaError(f"unsupported format '{spec.fmt}'")
    table = load_sweep(spec.sweep)
    events = load_events(spec.events)
    _check_gammas_known(events, table, spec.events)
    manifold = load_manifold(spec.manifold) if spec.manifold else None

    out = Path(spec.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    _pin_rcparams(spec.styling)

    written = []
    for gamma in table.gammas:
        fig = panel_figure(table, events, gamma, spec.styling)
        dest = out / f"panel_gamma_{gamma:g}.{spec.fmt}"
        _save(fig, dest, spec.fmt)
        written.append(dest)
    if manifold is not None:
        fig = manifold_figure(manifold, spec.styling)
        dest = out / f"manifold.{spec.fmt}"
        _save(fig, dest, spec.fmt)
        written.append(dest)
    return written


def _check_gammas_known(events, table: SweepTable, path) -> None:
    for ev in events:
        if not any(abs(ev.gamma - g) <= GAMMA_MATCH_TOL for g in table.gammas):
            raise SchemaError(
                f"{path}: gamma_tilde value {ev.gamma:.17g} does not appear "
                f"in the sweep file"
            )


def _pin_rcparams(styling: dict) -> None:
    plt.rcParams.update(
        {
            "figure.dpi": styling["dpi"],
            "savefig.dpi": styling["dpi"],
            "font.size": 10,
            "svg.hashsalt": "pseudospec-plots",
            "path.simplify": False,
        }
    )


def _save(fig, dest: Path, fmt: str) -> None:
    # SVG output embeds a creation date unless told not to; drop it so
    # reruns are byte-identical
    metadata = {"Date": None} if fmt == "svg" else {"Software": "pseudospec-plots"}
    fig.savefig(dest, format=fmt, metadata=metadata)
    plt.close(fig)


def _segment_style(row, labels, styling: dict):
    """Map one sample's indices onto (linestyle, color)."""
    first = row.indices.get(labels[0]) if labels else None
    second = row.indices.get(labels[1]) if len(labels) > 1 else None
    defined = first is not None and (len(labels) < 2 or second is not None)
    if not defined:
        return "-", styling["undefined_color"]
    ls = "-" if first > 0 else "--"
    if len(labels) < 2:
        return ls, styling["single_metric_color"]
    return ls, styling["colors"][1 if second > 0 else -1]


def _segments(rows, labels, styling: dict):
    """Split a band into maximal runs of constant style.

    Runs share their boundary sample so the curve stays visually
    continuous across a style switch; samples without an energy (bridged
    or defective points) break the run.
    """
    current: list = []
    style = None
    for row in rows:
        if row.re is None:
            if len(current) > 1:
                yield style, current
            current, style = [], None
            continue
        s = _segment_style(row, labels, styling)
        if style is None:
            style = s
        elif s != style:
            current.append(row)
            if len(current) > 1:
                yield style, current
            current, style = [row], s
            continue
        current.append(row)
    if len(current) > 1:
        yield style, current


def panel_figure(table: SweepTable, events, gamma: float, styling=None):
    """Build the figure for one gain value; caller owns the figure."""
    styling = styling or DEFAULT_STYLE
    fig, ax = plt.subplots(figsize=styling["figsize"])
    bands = table.bands[gamma]
    for band_id in sorted(bands):
        for (ls, color), seg in _segments(bands[band_id], table.labels, styling):
            xs = np.array([r.j for r in seg])
            re = np.array([r.re for r in seg])
            im = np.abs([0.0 if r.im is None else r.im for r in seg])
            ax.plot(xs, re, ls, color=color, linewidth=styling["linewidth"])
            if np.any(im > 0.0):
                ax.fill_between(
                    xs,
                    re - im,
                    re + im,
                    color=color,
                    alpha=styling["ribbon_alpha"],
                    linewidth=0,
                )
    _draw_events(ax, table, events, gamma, styling)
    ax.set_xlabel("j_tilde")
    ax.set_ylabel("Re eps_tilde")
    ax.set_title(f"gamma_tilde = {gamma:g}")
    fig.tight_layout()
    return fig


def _event_energy(table: SweepTable, ev, gamma: float) -> Optional[float]:
    """Vertical placement for an event marker: band energy at nearest j."""
    values = []
    for band_id in (ev.band_a, ev.band_b):
        rows = [r for r in table.bands[gamma].get(band_id, ()) if r.re is not None]
        if rows:
            values.append(min(rows, key=lambda r: abs(r.j - ev.j)).re)
    if not values:
        return None
    return float(np.mean(values))


def _draw_events(ax, table, events, gamma, styling) -> None:
    xs = [r.j for rows in table.bands[gamma].values() for r in rows]
    span_halfwidth = 0.004 * (max(xs) - min(xs)) if xs else 0.0
    for ev in events:
        if abs(ev.gamma - gamma) > GAMMA_MATCH_TOL:
            continue
        if ev.classification == "Avoided":
            # avoided gaps have no single locus; shade a short parameter
            # span around the closest-approach point instead of a marker
            hw = max(ev.gap_residual, span_halfwidth)
            ax.axvspan(
                ev.j - hw,
                ev.j + hw,
                color=styling["avoided_span_color"],
                alpha=styling["avoided_span_alpha"],
                zorder=0,
            )
            continue
        energy = _event_energy(table, ev, gamma)
        if energy is None:
            continue
        if ev.classification == "Diabolical":
            mk = styling["diabolical"]
            face = mk["color"]
        elif ev.classification == "EP2":
            mk = styling["ep2"]
            face = mk["color"]
        else:
            mk = styling["unresolved"]
            face = "none"
        ax.plot(
            [ev.j],
            [energy],
            linestyle="none",
            marker=mk["marker"],
            markersize=mk["size"],
            markerfacecolor=face,
            markeredgecolor=mk["color"],
            zorder=5,
        )


def manifold_figure(points, styling=None):
    """Parameter-plane map of the traced degeneracy lines."""
    styling = styling or DEFAULT_STYLE
    fig, ax = plt.subplots(figsize=styling["figsize"])
    traces: dict = {}
    for p in points:
        traces.setdefault(p.trace_id, []).append(p)
    for trace_id in sorted(traces):
        pts = sorted(traces[trace_id], key=lambda p: p.point_index)
        ax.plot(
            [p.j for p in pts],
            [p.gamma for p in pts],
            "-",
            color="tab:red",
            linewidth=styling["linewidth"],
        )
        for p in (pts[0], pts[-1]):
            mark = styling["termination_markers"].get(p.termination)
            if mark is None:
                continue
            marker, face = mark
            ax.plot(
                [p.j],
                [p.gamma],
                linestyle="none",
                marker=marker,
                markersize=6.0,
                markerfacecolor=face,
                markeredgecolor="black",
                zorder=5,
            )
    ax.set_xlabel("j_tilde")
    ax.set_ylabel("gamma_tilde")
    ax.set_title("degeneracy manifold")
    fig.tight_layout()
    return fig
