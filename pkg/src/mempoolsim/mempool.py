"""Pending-transaction backlog and block assembly strategies."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from ._kernel import stabilize_ties


class Strategy(str, enum.Enum):
    """Order in which a miner scans the backlog when assembling a block."""

    FEE_PER_BYTE = "fee_per_byte"
    FEE_BASED = "fee_based"
    FIFO = "fifo"

    @classmethod
    def parse(cls, value: "str | Strategy") -> "Strategy":
        if isinstance(value, Strategy):
            return value
        norm = str(value).strip().lower().replace("-", "_").replace(" ", "_")
        aliases = {
            "feeperbyte": cls.FEE_PER_BYTE,
            "fee_per_byte": cls.FEE_PER_BYTE,
            "feebased": cls.FEE_BASED,
            "fee_based": cls.FEE_BASED,
            "fee": cls.FEE_BASED,
            "fifo": cls.FIFO,
        }
        try:
            return aliases[norm]
        except KeyError:
            raise ValueError(f"unknown strategy {value!r}") from None


@dataclass(slots=True)
class Transaction:
    id: int
    arrival_time: float
    size: int
    fee: int
    waiting_time: float | None = None
    block_id: int | None = None

    def __post_init__(self) -> None:
        if not self.fee > 0:
            raise ValueError(f"tx {self.id}: fee must be > 0")
        if not self.size >= 1:
            raise ValueError(f"tx {self.id}: size must be >= 1")

    @property
    def fee_per_byte(self) -> float:
        return self.fee / self.size

    @property
    def included(self) -> bool:
        return self.block_id is not None

    def include(self, block_id: int, block_time: float) -> None:
        if self.block_id is not None:
            raise RuntimeError(f"tx {self.id} already included in block {self.block_id}")
        wait = block_time - self.arrival_time
        if wait < 0:
            raise RuntimeError(f"tx {self.id} included before it arrived")
        self.waiting_time = wait
        self.block_id = block_id


def rank_key(tx: Transaction, strategy: Strategy) -> tuple:
    """Sort key; smaller sorts first.  Ties fall back to arrival time, then id."""
    if strategy is Strategy.FEE_PER_BYTE:
        return (-tx.fee_per_byte, tx.arrival_time, tx.id)
    if strategy is Strategy.FEE_BASED:
        return (-tx.fee, tx.arrival_time, tx.id)
    return (tx.arrival_time, tx.id)


def sort_key(arrival_time, fee, size, strategy: Strategy) -> np.ndarray:
    """Primary ascending sort key as float64 (ties are left to the caller)."""
    if strategy is Strategy.FEE_PER_BYTE:
        return -(np.asarray(fee) / np.asarray(size))
    if strategy is Strategy.FEE_BASED:
        return -np.asarray(fee, dtype=np.float64)
    return np.asarray(arrival_time, dtype=np.float64)


def rank_order(
    arrival_time: np.ndarray,
    fee: np.ndarray,
    size: np.ndarray,
    strategy: Strategy,
    ids: np.ndarray | None = None,
) -> np.ndarray:
    """Array form of :func:`rank_key`: indices sorted into strategy order."""
    if ids is None:
        if np.all(arrival_time[1:] >= arrival_time[:-1]):
            # index order already is (arrival_time, id) order
            if strategy is Strategy.FIFO:
                return np.arange(len(arrival_time))
            key = -(fee / size) if strategy is Strategy.FEE_PER_BYTE else -np.asarray(fee)
            order = np.argsort(key)
            return stabilize_ties(order, key[order])
        ids = np.arange(len(arrival_time))
    if strategy is Strategy.FEE_PER_BYTE:
        return np.lexsort((ids, arrival_time, -(fee / size)))
    if strategy is Strategy.FEE_BASED:
        return np.lexsort((ids, arrival_time, -fee))
    return np.lexsort((ids, arrival_time))


class Backlog:
    """Unbounded mempool with running byte and fee totals."""

    def __init__(self, txs: Iterable[Transaction] = ()) -> None:
        self._pending: dict[int, Transaction] = {}
        self.total_bytes = 0
        self.total_fee = 0
        for tx in txs:
            self.insert(tx)

    def __len__(self) -> int:
        return len(self._pending)

    def __contains__(self, tx_id: int) -> bool:
        return tx_id in self._pending

    def __iter__(self):
        return iter(self._pending.values())

    @property
    def pending(self) -> list[Transaction]:
        return list(self._pending.values())

    def insert(self, tx: Transaction) -> Backlog:
        if tx.id in self._pending:
            raise KeyError(f"duplicate transaction id {tx.id}")
        if tx.included:
            raise ValueError(f"tx {tx.id} is already in block {tx.block_id}")
        self._pending[tx.id] = tx
        self.total_bytes += tx.size
        self.total_fee += tx.fee
        return self

    def rank(self, strategy: Strategy) -> list[Transaction]:
        strategy = Strategy.parse(strategy)
        return sorted(self._pending.values(), key=lambda tx: rank_key(tx, strategy))

    def select_block(self, capacity: int, strategy: Strategy) -> list[Transaction]:
        """Greedy skip-and-continue packing over the ranked backlog.

        A transaction that does not fit the remaining space is skipped and the
        scan goes on, so smaller transactions further down can still fill the
        block.  The backlog itself is left untouched.
        """
        if not capacity > 0:
            raise ValueError(f"capacity must be > 0, got {capacity}")
        room = capacity
        chosen = []
        for tx in self.rank(strategy):
            if tx.size <= room:
                chosen.append(tx)
                room -= tx.size
        return chosen

    def remove_all(self, txs: Iterable[Transaction]) -> Backlog:
        txs = list(txs)
        ids = [tx.id for tx in txs]
        if len(set(ids)) != len(ids):
            raise RuntimeError("remove_all given the same transaction twice")
        missing = [i for i in ids if i not in self._pending]
        if missing:
            raise RuntimeError(f"transactions not pending: {missing[:5]}")
        for tx in txs:
            del self._pending[tx.id]
            self.total_bytes -= tx.size
            self.total_fee -= tx.fee
        return self
