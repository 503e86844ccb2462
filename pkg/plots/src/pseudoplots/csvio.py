"""Schema-checked readers for the three CSV layouts the renderer accepts.

sweep:    gamma_tilde, j_tilde, band_id, re_eps_tilde, im_eps_tilde,
          then one (index_<label>, quality_<label>) pair per metric
events:   gamma_tilde, j_tilde, band_a, band_b, classification,
          then product_<label> columns, then gap_residual
manifold: trace_id, point_index, j_tilde, gamma_tilde, gap, termination

Numeric fields may be empty where the producer had nothing defined
(defective samples, undefined indices, unset products).  Any deviation
from the layouts above raises SchemaError naming the offending column,
which the CLI turns into a non-zero exit.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

GAMMA_MATCH_TOL = 1e-12

SWEEP_FIXED = ("gamma_tilde", "j_tilde", "band_id", "re_eps_tilde", "im_eps_tilde")
EVENTS_FIXED = ("gamma_tilde", "j_tilde", "band_a", "band_b", "classification")
MANIFOLD_COLUMNS = ("trace_id", "point_index", "j_tilde", "gamma_tilde", "gap", "termination")


class SchemaError(Exception):
    """An input CSV does not match the expected column layout."""


@dataclass(frozen=True)
class SweepRow:
    j: float
    re: Optional[float]
    im: Optional[float]
    indices: dict  # label -> int or None


@dataclass(frozen=True)
class SweepTable:
    labels: tuple  # metric labels in file order
    gammas: tuple  # distinct gain values in file order
    bands: dict  # gamma -> {band_id: [SweepRow, ...]}


@dataclass(frozen=True)
class EventRow:
    gamma: float
    j: float
    band_a: int
    band_b: int
    classification: str
    products: dict  # label -> int or None
    gap_residual: float


@dataclass(frozen=True)
class ManifoldPoint:
    trace_id: int
    point_index: int
    j: float
    gamma: float
    gap: float
    termination: str


def _read_rows(path: Path) -> tuple:
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
    except OSError as err:
        raise SchemaError(f"cannot read {path}: {err.strerror}") from err
    if not rows:
        raise SchemaError(f"{path}: file is empty, no header row")
    return rows[0], rows[1:]


def _float(value: str, path: Path, line: int, column: str) -> float:
    try:
        return float(value)
    except ValueError:
        raise SchemaError(
            f"{path} line {line}: column '{column}' has non-numeric value {value!r}"
        ) from None


def _opt_float(value, path, line, column) -> Optional[float]:
    return None if value == "" else _float(value, path, line, column)


def _int(value: str, path: Path, line: int, column: str) -> int:
    try:
        return int(value)
    except ValueError:
        raise SchemaError(
            f"{path} line {line}: column '{column}' has non-integer value {value!r}"
        ) from None


def _check_fixed(header, fixed, path: Path) -> None:
    for pos, name in enumerate(fixed):
        if pos >= len(header):
            raise SchemaError(f"{path}: missing column '{name}'")
        if header[pos] != name:
            raise SchemaError(
                f"{path}: expected column '{name}' at position {pos + 1}, "
                f"found '{header[pos]}'"
            )


def _check_width(row, width, path: Path, line: int) -> None:
    if len(row) != width:
        raise SchemaError(
            f"{path} line {line}: expected {width} fields, found {len(row)}"
        )


def load_sweep(path) -> SweepTable:
    """Parse a sweep CSV into bands grouped by gain value."""
    path = Path(path)
    header, body = _read_rows(path)
    _check_fixed(header, SWEEP_FIXED, path)
    tail = header[len(SWEEP_FIXED):]
    labels = []
    for pos in range(0, len(tail), 2):
        name = tail[pos]
        if not name.startswith("index_"):
            raise SchemaError(
                f"{path}: expected an 'index_<label>' column, found '{name}'"
            )
        label = name[len("index_"):]
        want = f"quality_{label}"
        if pos + 1 >= len(tail):
            raise SchemaError(f"{path}: missing column '{want}'")
        if tail[pos + 1] != want:
            raise SchemaError(
                f"{path}: expected column '{want}' after '{name}', "
                f"found '{tail[pos + 1]}'"
            )
        labels.append(label)

    gammas: list = []
    bands: dict = {}
    for n, row in enumerate(body, start=2):
        _check_width(row, len(header), path, n)
        gamma = _float(row[0], path, n, "gamma_tilde")
        key = _match_gamma(gamma, gammas)
        if key is None:
            key = gamma
            gammas.append(gamma)
            bands[gamma] = {}
        indices = {}
        for k, label in enumerate(labels):
            raw = row[5 + 2 * k]
            indices[label] = None if raw == "" else _int(raw, path, n, f"index_{label}")
        bands[key].setdefault(_int(row[2], path, n, "band_id"), []).append(
            SweepRow(
                j=_float(row[1], path, n, "j_tilde"),
                re=_opt_float(row[3], path, n, "re_eps_tilde"),
                im=_opt_float(row[4], path, n, "im_eps_tilde"),
                indices=indices,
            )
        )
    if not gammas:
        raise SchemaError(f"{path}: no data rows")
    return SweepTable(labels=tuple(labels), gammas=tuple(gammas), bands=bands)


def _match_gamma(gamma: float, known) -> Optional[float]:
    for g in known:
        if abs(g - gamma) <= GAMMA_MATCH_TOL:
            return g
    return None


def load_events(path) -> list:
    """Parse a crossing-events CSV; rows keep their file order."""
    path = Path(path)
    header, body = _read_rows(path)
    _check_fixed(header, EVENTS_FIXED, path)
    if header[-1] != "gap_residual":
        raise SchemaError(f"{path}: missing column 'gap_residual'")
    product_cols = header[len(EVENTS_FIXED):-1]
    for name in product_cols:
        if not name.startswith("product_"):
            raise SchemaError(
                f"{path}: expected a 'product_<label>' column, found '{name}'"
            )
    labels = [name[len("product_"):] for name in product_cols]

    events = []
    for n, row in enumerate(body, start=2):
        _check_width(row, len(header), path, n)
        products = {}
        for k, label in enumerate(labels):
            raw = row[5 + k]
            products[label] = None if raw == "" else _int(raw, path, n, f"product_{label}")
        events.append(
            EventRow(
                gamma=_float(row[0], path, n, "gamma_tilde"),
                j=_float(row[1], path, n, "j_tilde"),
                band_a=_int(row[2], path, n, "band_a"),
                band_b=_int(row[3], path, n, "band_b"),
                classification=row[4],
                products=products,
                gap_residual=_float(row[-1], path, n, "gap_residual"),
            )
        )
    return events


def load_manifold(path) -> list:
    """Parse a manifold-trace CSV into a flat point list in file order."""
    path = Path(path)
    header, body = _read_rows(path)
    _check_fixed(header, MANIFOLD_COLUMNS, path)
    if len(header) != len(MANIFOLD_COLUMNS):
        raise SchemaError(
            f"{path}: unexpected extra column '{header[len(MANIFOLD_COLUMNS)]}'"
        )
    points = []
    for n, row in enumerate(body, start=2):
        _check_width(row, len(header), path, n)
        points.append(
            ManifoldPoint(
                trace_id=_int(row[0], path, n, "trace_id"),
                point_index=_int(row[1], path, n, "point_index"),
                j=_float(row[2], path, n, "j_tilde"),
                gamma=_float(row[3], path, n, "gamma_tilde"),
                gap=_float(row[4], path, n, "gap"),
                termination=row[5],
            )
        )
    return points
