"""Waiting-time and fill-rate statistics over simulation results.

Records are stored in seconds; every waiting-time figure reported here is
in minutes.  Transactions that arrived before the warmup cutoff, and blocks
created before it, are left out.  Transactions still pending at the horizon
are right-censored and never counted as waiting.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .engine import SimResult


class EmptySummaryError(ValueError):
    """Raised when a statistic has no included transactions to work with."""


class QuantileKey(str, enum.Enum):
    FEE = "fee"
    FEE_PER_BYTE = "fee_per_byte"


@dataclass(frozen=True)
class SummaryMetrics:
    """Run-level statistics.

    ``mean_wait`` and ``std_wait`` are None when no transaction was
    included after warmup (see :attr:`empty`); the fill statistics are None
    when no block was created after warmup.
    """

    mean_wait: float | None
    std_wait: float | None
    fill_mean: float | None
    fill_std: float | None
    included_count: int
    pending_count: int

    @property
    def empty(self) -> bool:
        return self.included_count == 0


@dataclass(frozen=True)
class QuantileSummary:
    key: QuantileKey
    thresholds: tuple[float, float, float]
    bucket_sizes: tuple[int, int, int, int]
    bucket_mean_wait: tuple[float | None, ...]
    bucket_ecdf: tuple[list[tuple[float, float]], ...]


@dataclass(frozen=True)
class RunSample:
    """The post-warmup part of one or more runs that the statistics need.

    Much smaller than a :class:`SimResult`, so sweeps can pool many
    replications.  ``waits`` are minutes.
    """

    waits: np.ndarray
    fee: np.ndarray
    fee_per_byte: np.ndarray
    fills: np.ndarray
    pending_count: int

    @classmethod
    def from_result(cls, result: SimResult, warmup: float | None = None) -> RunSample:
        cut = result.config_echo.warmup if warmup is None else warmup
        tx = result.transactions
        late = tx.arrival_time >= cut
        mask = tx.included & late
        return cls(
            waits=tx.waiting_time[mask] / 60.0,
            fee=tx.fee[mask],
            fee_per_byte=tx.fee[mask] / tx.size[mask],
            fills=result.fill_rate[result.block_time >= cut],
            pending_count=int(np.count_nonzero(late & ~tx.included)),
        )

    @classmethod
    def pool(cls, samples: Sequence[RunSample]) -> RunSample:
        samples = list(samples)
        if len(samples) == 1:
            return samples[0]
        return cls(
            waits=np.concatenate([s.waits for s in samples]),
            fee=np.concatenate([s.fee for s in samples]),
            fee_per_byte=np.concatenate([s.fee_per_byte for s in samples]),
            fills=np.concatenate([s.fills for s in samples]),
            pending_count=sum(s.pending_count for s in samples),
        )


def _sample(data, warmup: float | None) -> RunSample:
    if isinstance(data, RunSample):
        return data
    if isinstance(data, SimResult):
        return RunSample.from_result(data, warmup)
    return RunSample.pool([_sample(d, warmup) for d in data])


def summarize(result, warmup: float | None = None) -> SummaryMetrics:
    """Summary statistics of a result, a :class:`RunSample`, or a pooled sequence.

    ``warmup`` overrides the cutoff stored in each result's config.
    """
    s = _sample(result, warmup)
    w, f = s.waits, s.fills
    return SummaryMetrics(
        mean_wait=float(w.mean()) if w.size else None,
        std_wait=float(w.std()) if w.size else None,
        fill_mean=float(f.mean()) if f.size else None,
        fill_std=float(f.std()) if f.size else None,
        included_count=int(w.size),
        pending_count=s.pending_count,
    )


def ecdf(values) -> list[tuple[float, float]]:
    """Step points (value, fraction <= value) of the empirical CDF.

    Values are returned in the units given; the final fraction is 1.0.
    """
    x = np.sort(np.asarray(values, dtype=float))
    if x.size == 0:
        raise ValueError("ecdf of an empty sample")
    last = np.flatnonzero(np.append(x[1:] != x[:-1], True))
    frac = (last + 1) / x.size
    return list(zip(x[last].tolist(), frac.tolist()))


def ecdf_at(points: list[tuple[float, float]], x: float) -> float:
    """Evaluate a step ECDF at ``x``."""
    xs = np.array([p[0] for p in points])
    i = np.searchsorted(xs, x, side="right")
    return 0.0 if i == 0 else points[i - 1][1]


def ecdf_quantile(points: list[tuple[float, float]], p: float) -> float:
    """Smallest value whose ECDF reaches ``p``."""
    fr = np.array([q[1] for q in points])
    i = int(np.searchsorted(fr, p - 1e-12, side="left"))
    return points[min(i, len(points) - 1)][0]


def thin_ecdf(points: list[tuple[float, float]], max_points: int) -> list[tuple[float, float]]:
    """Keep at most ``max_points`` of the step points, evenly spread by rank.

    The kept points are exact ECDF values; the last point is always kept.
    ``max_points`` of 0 keeps everything.
    """
    if max_points <= 0 or len(points) <= max_points:
        return list(points)
    idx = np.unique(np.linspace(0, len(points) - 1, max_points).round().astype(int))
    return [points[i] for i in idx]


def quartile_report(
    result,
    key: QuantileKey | str = QuantileKey.FEE_PER_BYTE,
    warmup: float | None = None,
) -> QuantileSummary:
    """Waiting time by quartile bucket of fee or fee-per-byte.

    Thresholds are linear-interpolation empirical quartiles of the key over
    included transactions.  A value equal to a threshold goes to the lower
    bucket.
    """
    key = QuantileKey(key)
    s = _sample(result, warmup)
    k = s.fee_per_byte if key is QuantileKey.FEE_PER_BYTE else s.fee.astype(float)
    w = s.waits
    if k.size < 4:
        raise EmptySummaryError(f"quartile report needs >= 4 included transactions, got {k.size}")

    thresholds = np.quantile(k, [0.25, 0.5, 0.75])
    bucket = np.searchsorted(thresholds, k, side="left")
    sizes, means, curves = [], [], []
    for b in range(4):
        wb = w[bucket == b]
        sizes.append(int(wb.size))
        means.append(float(wb.mean()) if wb.size else None)
        curves.append(ecdf(wb) if wb.size else [])
    return QuantileSummary(
        key=key,
        thresholds=tuple(float(t) for t in thresholds),
        bucket_sizes=tuple(sizes),
        bucket_mean_wait=tuple(means),
        bucket_ecdf=tuple(curves),
    )
