"""Discrete-event loop: Poisson arrivals into the backlog, exponential block events."""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterator, Sequence

import numpy as np

from . import _kernel
from .mempool import Backlog, Strategy, Transaction, sort_key
from .stochastic import AttributeModel, IntensityFunction, sample_arrival_times, sample_attributes

DAY = 86_400.0
MB = 1_000_000
DEFAULT_MU = 1.0 / 600.0
# offered bytes per unit of block capacity above which the heap loop is faster
HEAP_LOAD_THRESHOLD = 0.9


def default_intensity() -> IntensityFunction:
    return IntensityFunction.sinusoid(3.0, 3.3, period=3600.0)


@dataclass(frozen=True)
class SimConfig:
    """One experiment.  ``warmup`` defaults to 10% of the horizon."""

    intensity: IntensityFunction = field(default_factory=default_intensity)
    attributes: AttributeModel = field(default_factory=AttributeModel)
    mu: float = DEFAULT_MU
    capacity: int = MB
    strategy: Strategy = Strategy.FEE_PER_BYTE
    horizon: float = 30 * DAY
    warmup: float | None = None
    seed: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "strategy", Strategy.parse(self.strategy))
        if not (math.isfinite(self.mu) and self.mu > 0):
            raise ValueError(f"mu: must be > 0, got {self.mu}")
        if int(self.capacity) != self.capacity:
            raise ValueError(f"capacity: must be an integer byte count, got {self.capacity}")
        object.__setattr__(self, "capacity", int(self.capacity))
        if self.capacity < self.attributes.min_size:
            raise ValueError(
                f"capacity: {self.capacity} is below min_size {self.attributes.min_size}"
            )
        if not (math.isfinite(self.horizon) and self.horizon > 0):
            raise ValueError(f"horizon: must be > 0, got {self.horizon}")
        if self.warmup is None:
            object.__setattr__(self, "warmup", 0.1 * self.horizon)
        if not 0 <= self.warmup < self.horizon:
            raise ValueError(f"warmup: must satisfy 0 <= warmup < horizon, got {self.warmup}")
        if not 0 <= self.seed < 2**64:
            raise ValueError(f"seed: must be an unsigned 64-bit integer, got {self.seed}")


@dataclass(frozen=True)
class Block:
    block_id: int
    creation_time: float
    tx_ids: np.ndarray
    used_bytes: int
    capacity: int
    collected_fee: int
    miner_id: int = 0

    @property
    def fill_rate(self) -> float:
        return self.used_bytes / self.capacity


@dataclass(frozen=True)
class TransactionTable:
    """Column store of every generated transaction.

    ``block_id`` is -1 and ``waiting_time`` NaN for transactions still
    pending at the horizon.  Indexing yields :class:`Transaction` records.
    """

    arrival_time: np.ndarray
    size: np.ndarray
    fee: np.ndarray
    block_id: np.ndarray
    waiting_time: np.ndarray

    def __len__(self) -> int:
        return len(self.arrival_time)

    def __getitem__(self, i: int) -> Transaction:
        included = self.block_id[i] >= 0
        return Transaction(
            id=int(i),
            arrival_time=float(self.arrival_time[i]),
            size=int(self.size[i]),
            fee=int(self.fee[i]),
            waiting_time=float(self.waiting_time[i]) if included else None,
            block_id=int(self.block_id[i]) if included else None,
        )

    def __iter__(self) -> Iterator[Transaction]:
        for i in range(len(self)):
            yield self[i]

    @property
    def ids(self) -> np.ndarray:
        return np.arange(len(self))

    @property
    def included(self) -> np.ndarray:
        return self.block_id >= 0

    @property
    def fee_per_byte(self) -> np.ndarray:
        return self.fee / self.size


@dataclass(frozen=True)
class SimResult:
    transactions: TransactionTable
    block_time: np.ndarray
    block_used: np.ndarray
    block_fee: np.ndarray
    block_miner: np.ndarray
    config_echo: SimConfig

    @property
    def n_blocks(self) -> int:
        return len(self.block_time)

    @property
    def fill_rate(self) -> np.ndarray:
        return self.block_used / self.config_echo.capacity

    @cached_property
    def blocks(self) -> list[Block]:
        tx_block = self.transactions.block_id
        inc = np.flatnonzero(tx_block >= 0)
        inc = inc[np.argsort(tx_block[inc], kind="stable")]
        bounds = np.searchsorted(tx_block[inc], np.arange(self.n_blocks + 1))
        cap = self.config_echo.capacity
        return [
            Block(
                block_id=k,
                creation_time=float(self.block_time[k]),
                tx_ids=inc[bounds[k] : bounds[k + 1]],
                used_bytes=int(self.block_used[k]),
                capacity=cap,
                collected_fee=int(self.block_fee[k]),
                miner_id=int(self.block_miner[k]),
            )
            for k in range(self.n_blocks)
        ]


def rng_streams(seed: int) -> dict[str, np.random.Generator]:
    """Independent generators for arrivals, attributes, blocks and miners."""
    children = np.random.SeedSequence(seed).spawn(4)
    names = ("arrivals", "attributes", "blocks", "miners")
    return {name: np.random.default_rng(c) for name, c in zip(names, children)}


def sample_block_interval(mu: float, rng: np.random.Generator) -> float:
    if not mu > 0:
        raise ValueError(f"mu must be > 0, got {mu}")
    return -math.log1p(-rng.random()) / mu


def sample_block_times(mu: float, horizon: float, rng: np.random.Generator) -> np.ndarray:
    """Block creation times on (0, horizon]; draws match repeated sample_block_interval."""
    if not mu > 0:
        raise ValueError(f"mu must be > 0, got {mu}")
    expected = mu * horizon
    chunk = int(expected + 6.0 * math.sqrt(expected)) + 16
    out = []
    t = 0.0
    while True:
        gaps = -np.log1p(-rng.random(chunk)) / mu
        gaps[0] += t
        times = np.cumsum(gaps)
        n_in = int(np.searchsorted(times, horizon, side="right"))
        out.append(times[:n_in])
        if n_in < chunk:
            break
        t = float(times[-1])
    return np.concatenate(out)


def simulate_arrivals(
    arrival_time: np.ndarray,
    fee: np.ndarray,
    size: np.ndarray,
    block_time: np.ndarray,
    block_strategy: Sequence[Strategy],
    config: SimConfig,
    block_miner: np.ndarray | None = None,
    backend: str = "compiled",
) -> SimResult:
    """Run the block events in ``block_time`` against a fixed arrival stream.

    ``block_strategy[k]`` is the ordering the producer of block ``k`` uses.
    ``backend="reference"`` replays the same events through :class:`Backlog`
    one transaction at a time; it exists to cross-check the compiled loop.
    """
    arrival_time = np.ascontiguousarray(arrival_time, dtype=np.float64)
    fee = np.ascontiguousarray(fee, dtype=np.int64)
    size = np.ascontiguousarray(size, dtype=np.int64)
    block_time = np.ascontiguousarray(block_time, dtype=np.float64)
    n_blocks = len(block_time)
    if len(block_strategy) != n_blocks:
        raise ValueError("need one strategy per block")
    if block_miner is None:
        block_miner = np.zeros(n_blocks, dtype=np.int64)
    if np.any(np.diff(arrival_time) < 0):
        raise ValueError("arrival times must be nondecreasing")
    if np.any(np.diff(block_time) <= 0):
        raise ValueError("block times must be strictly increasing")

    if backend == "compiled":
        tx_block, used, fees = _run_compiled(
            arrival_time, fee, size, block_time, block_strategy, config.capacity
        )
    elif backend == "reference":
        tx_block, used, fees = _run_reference(
            arrival_time, fee, size, block_time, block_strategy, config.capacity
        )
    else:
        raise ValueError(f"unknown backend {backend!r}")

    included = tx_block >= 0
    waiting = np.full(len(arrival_time), np.nan)
    waiting[included] = block_time[tx_block[included]] - arrival_time[included]
    table = TransactionTable(arrival_time, size, fee, tx_block, waiting)
    return SimResult(table, block_time, used, fees, np.asarray(block_miner), config)


def _run_compiled(arrival_time, fee, size, block_time, block_strategy, capacity):
    used_strats = sorted(set(block_strategy), key=list(Strategy).index) or [Strategy.FIFO]
    keys = np.stack([sort_key(arrival_time, fee, size, s) for s in used_strats])
    row_of = {s: i for i, s in enumerate(used_strats)}
    block_order = np.array([row_of[s] for s in block_strategy], dtype=np.int64)
    min_size = int(size.min()) if len(size) else 1
    offered = size.sum() / max(1, len(block_time) * capacity)
    run = _kernel.run_blocks_heap if offered > HEAP_LOAD_THRESHOLD else _kernel.run_blocks_merge
    tx_block, used, fees, _ = run(
        arrival_time, size, fee, keys, block_time, block_order, capacity, min_size
    )
    return tx_block, used, fees


def _run_reference(arrival_time, fee, size, block_time, block_strategy, capacity):
    txs = [
        Transaction(i, float(t), int(s), int(f))
        for i, (t, s, f) in enumerate(zip(arrival_time, size, fee))
    ]
    # arrivals sort before a block at the same instant (kind 0 < kind 1)
    events = heapq.merge(
        ((tx.arrival_time, 0, i) for i, tx in enumerate(txs)),
        ((float(t), 1, k) for k, t in enumerate(block_time)),
    )
    backlog = Backlog()
    used = np.zeros(len(block_time), dtype=np.int64)
    fees = np.zeros(len(block_time), dtype=np.int64)
    for t, kind, idx in events:
        if kind == 0:
            backlog.insert(txs[idx])
            continue
        chosen = backlog.select_block(capacity, block_strategy[idx])
        for tx in chosen:
            tx.include(idx, t)
        used[idx] = sum(tx.size for tx in chosen)
        fees[idx] = sum(tx.fee for tx in chosen)
        backlog.remove_all(chosen)
    tx_block = np.array([-1 if tx.block_id is None else tx.block_id for tx in txs], dtype=np.int64)
    return tx_block, used, fees


def generate_arrivals(config: SimConfig, streams=None):
    """Arrival times with their sampled (fee, size) attributes."""
    streams = streams or rng_streams(config.seed)
    times = sample_arrival_times(config.intensity, config.horizon, streams["arrivals"])
    fee, size = sample_attributes(config.attributes, len(times), streams["attributes"])
    return times, fee, size


def run_simulation(config: SimConfig, backend: str = "compiled") -> SimResult:
    streams = rng_streams(config.seed)
    times, fee, size = generate_arrivals(config, streams)
    blocks = sample_block_times(config.mu, config.horizon, streams["blocks"])
    return simulate_arrivals(
        times, fee, size, blocks, [config.strategy] * len(blocks), config, backend=backend
    )


def run_trace_simulation(trace, config: SimConfig, backend: str = "compiled") -> SimResult:
    """Replay recorded arrivals; only the block process is random.

    Trace rows later than ``config.horizon`` are ignored.
    """
    t = np.asarray(trace.arrival_time, dtype=np.float64)
    keep = t <= config.horizon
    streams = rng_streams(config.seed)
    blocks = sample_block_times(config.mu, config.horizon, streams["blocks"])
    return simulate_arrivals(
        t[keep],
        np.asarray(trace.fee)[keep],
        np.asarray(trace.size)[keep],
        blocks,
        [config.strategy] * len(blocks),
        config,
        backend=backend,
    )
