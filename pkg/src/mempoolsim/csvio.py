"""CSV reading and writing: traces, result tables and payoff matrices.

Every file is written to a temporary sibling first and renamed into place,
so a failed run never leaves a half-written output behind.
"""

from __future__ import annotations

import csv
import io
import math
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .game import EquilibriumReport, PayoffMatrix
from .mempool import Strategy

TRACE_HEADER = ("arrival_time_s", "fee_satoshi", "size_bytes")


class TraceError(ValueError):
    """A trace file that cannot be ingested; the message names the row."""


def fmt(value) -> str:
    """Render a cell: integers verbatim, floats with 6 significant digits."""
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        x = float(value)
        if not math.isfinite(x):
            return "nan" if math.isnan(x) else ("inf" if x > 0 else "-inf")
        if x == 0:
            return "0"
        return np.format_float_positional(x, precision=6, unique=False, fractional=False, trim="-")
    if isinstance(value, Strategy):
        return value.value
    return str(value)


def atomic_write_text(path: str | os.PathLike, text: str) -> Path:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except FileNotFoundError:
            pass
        raise
    return path


def render_csv(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    return buf.getvalue()


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    return atomic_write_text(path, render_csv(header, rows))


def read_csv(path) -> tuple[list[str], list[list[str]]]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty file") from None
        return header, [row for row in reader if row]


def ensure_writable_dir(path) -> Path:
    """Create ``path`` if needed and prove a file can be written there."""
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    fd, probe = tempfile.mkstemp(prefix=".probe.", dir=path)
    os.close(fd)
    os.unlink(probe)
    return path


@dataclass(frozen=True)
class TraceArrivals:
    """Recorded arrivals in time order: seconds, satoshi, bytes."""

    arrival_time: np.ndarray
    fee: np.ndarray
    size: np.ndarray

    def __post_init__(self) -> None:
        t = np.asarray(self.arrival_time, dtype=np.float64)
        f = np.asarray(self.fee, dtype=np.int64)
        s = np.asarray(self.size, dtype=np.int64)
        if not (t.shape == f.shape == s.shape and t.ndim == 1):
            raise TraceError("trace columns must be 1-d and equally long")
        for name, bad in (
            ("arrival_time_s", ~np.isfinite(t) | (t < 0)),
            ("fee_satoshi", f <= 0),
            ("size_bytes", s < 1),
        ):
            if bad.any():
                raise TraceError(f"row {int(np.argmax(bad))}: invalid {name}")
        back = np.flatnonzero(np.diff(t) < 0)
        if back.size:
            raise TraceError(f"row {int(back[0]) + 1}: arrival time goes backwards")
        object.__setattr__(self, "arrival_time", t)
        object.__setattr__(self, "fee", f)
        object.__setattr__(self, "size", s)

    def __len__(self) -> int:
        return len(self.arrival_time)


def _parse_positive_int(text: str, row: int, name: str, minimum: int) -> int:
    try:
        x = float(text)
    except ValueError:
        raise TraceError(f"row {row}: {name} is not a number: {text!r}") from None
    if not math.isfinite(x) or x != int(x):
        raise TraceError(f"row {row}: {name} must be a whole number, got {text!r}")
    if x < minimum:
        raise TraceError(f"row {row}: {name} must be >= {minimum}, got {text!r}")
    return int(x)


def load_trace(path) -> TraceArrivals:
    """Read a trace CSV.  Row indices in errors count data rows from 0."""
    try:
        header, rows = read_csv(path)
    except ValueError as exc:
        raise TraceError(str(exc)) from None
    if tuple(h.strip() for h in header) != TRACE_HEADER:
        raise TraceError(f"expected header {','.join(TRACE_HEADER)}, got {','.join(header)}")
    if not rows:
        raise TraceError(f"{path}: trace has no rows")
    t = np.empty(len(rows))
    f = np.empty(len(rows), dtype=np.int64)
    s = np.empty(len(rows), dtype=np.int64)
    prev = -math.inf
    for i, row in enumerate(rows):
        if len(row) != 3:
            raise TraceError(f"row {i}: expected 3 fields, got {len(row)}")
        try:
            t[i] = float(row[0])
        except ValueError:
            raise TraceError(f"row {i}: arrival_time_s is not a number: {row[0]!r}") from None
        if not math.isfinite(t[i]) or t[i] < 0:
            raise TraceError(f"row {i}: arrival_time_s must be finite and >= 0")
        if t[i] < prev:
            raise TraceError(f"row {i}: arrival time {t[i]} is before the previous row ({prev})")
        prev = t[i]
        f[i] = _parse_positive_int(row[1], i, "fee_satoshi", 1)
        s[i] = _parse_positive_int(row[2], i, "size_bytes", 1)
    return TraceArrivals(t, f, s)


def write_trace(path, arrival_time, fee, size) -> Path:
    """Write a trace with timestamps at full (round-trip) precision."""
    buf = io.StringIO()
    buf.write(",".join(TRACE_HEADER) + "\n")
    for t, f, s in zip(np.asarray(arrival_time, dtype=float).tolist(), np.asarray(fee).tolist(), np.asarray(size).tolist()):
        buf.write(f"{t!r},{int(f)},{int(s)}\n")
    return atomic_write_text(path, buf.getvalue())


def _label(s) -> str:
    return s.value if isinstance(s, Strategy) else str(s)


def write_payoff_matrix(path, matrix: PayoffMatrix) -> Path:
    labels = [_label(s) for s in matrix.strategies]
    header = ["p1_strategy"] + [f"{c}_{p}" for c in labels for p in ("p1", "p2")]
    rows = []
    for i, r in enumerate(labels):
        row: list = [r]
        for j in range(len(labels)):
            row += [float(matrix.p1[i, j]), float(matrix.p2[i, j])]
        rows.append(row)
    return write_csv(path, header, rows)


def read_payoff_matrix(path) -> PayoffMatrix:
    """Read a payoff CSV; labels that name a strategy become :class:`Strategy`."""
    header, rows = read_csv(path)
    if not header or header[0] != "p1_strategy" or (len(header) - 1) % 2:
        raise ValueError(f"{path}: not a payoff-matrix CSV")
    cols = [h[: -len("_p1")] for h in header[1::2]]
    if [h for h in header[2::2]] != [c + "_p2" for c in cols]:
        raise ValueError(f"{path}: payoff columns must come in <strategy>_p1,<strategy>_p2 pairs")
    if [r[0] for r in rows] != cols:
        raise ValueError(f"{path}: row strategies {[r[0] for r in rows]} differ from columns {cols}")

    def label(x: str):
        try:
            return Strategy.parse(x)
        except ValueError:
            return x

    vals = np.array([[float(v) for v in r[1:]] for r in rows])
    return PayoffMatrix(tuple(label(c) for c in cols), vals[:, 0::2], vals[:, 1::2])


EQUILIBRIUM_HEADER = ("kind", "player", "opponent_strategy", "p1_strategy", "p2_strategy")


def equilibrium_rows(report: EquilibriumReport) -> list[list]:
    """One row per dominant strategy, best reply and pure Nash cell."""
    none = "none"
    rows: list[list] = [
        ["dominant", 1, "", _label(report.dominant_p1) if report.dominant_p1 is not None else none, ""],
        ["dominant", 2, "", "", _label(report.dominant_p2) if report.dominant_p2 is not None else none],
    ]
    for opp, br in report.best_responses_p1.items():
        rows.append(["best_response", 1, _label(opp), _label(br), ""])
    for opp, br in report.best_responses_p2.items():
        rows.append(["best_response", 2, _label(opp), "", _label(br)])
    for a, b in report.pure_nash:
        rows.append(["pure_nash", "", "", _label(a), _label(b)])
    if not report.pure_nash:
        rows.append(["pure_nash", "", "", none, none])
    return rows


def write_equilibrium(path, report: EquilibriumReport) -> Path:
    return write_csv(path, EQUILIBRIUM_HEADER, equilibrium_rows(report))
