"""Miners competing over one shared backlog, and payoff-matrix analysis."""

from __future__ import annotations

import dataclasses
import enum
import math
from dataclasses import dataclass
from typing import Hashable, Sequence

import numpy as np

from .engine import SimConfig, SimResult, generate_arrivals, rng_streams, sample_block_times, simulate_arrivals
from .mempool import Strategy


class GameMode(str, enum.Enum):
    TWO_MINER = "two_miner"
    ONE_VS_FOUR = "one_vs_four"


@dataclass(frozen=True)
class MinerProfile:
    miner_id: int
    strategy: Strategy
    win_probability: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "strategy", Strategy.parse(self.strategy))
        if not 0.0 <= self.win_probability <= 1.0:
            raise ValueError(f"miner {self.miner_id}: win_probability must lie in [0, 1]")


@dataclass(frozen=True)
class GameOutcome:
    miner_ids: tuple[int, ...]
    per_miner_fee: np.ndarray
    blocks_won: np.ndarray
    result: SimResult

    @property
    def total_fee(self) -> int:
        return int(self.per_miner_fee.sum())

    @property
    def per_miner_share(self) -> np.ndarray:
        total = self.total_fee
        if total == 0:
            return np.zeros(len(self.miner_ids))
        return self.per_miner_fee / total


def _check_miners(miners: Sequence[MinerProfile]) -> None:
    if not miners:
        raise ValueError("need at least one miner")
    ids = [m.miner_id for m in miners]
    if len(set(ids)) != len(ids):
        raise ValueError(f"duplicate miner ids in {ids}")
    total = math.fsum(m.win_probability for m in miners)
    if abs(total - 1.0) > 1e-9:
        raise ValueError(f"win probabilities must sum to 1, got {total}")


def run_game(config: SimConfig, miners: Sequence[MinerProfile]) -> GameOutcome:
    """Simulate a shared backlog where each block goes to a randomly drawn miner.

    The winner of every block is drawn by win probability and assembles the
    block with its own strategy; all blocks are accepted.  Arrival and block
    streams are the ones ``run_simulation`` would use for the same seed.
    """
    _check_miners(miners)
    streams = rng_streams(config.seed)
    times, fee, size = generate_arrivals(config, streams)
    blocks = sample_block_times(config.mu, config.horizon, streams["blocks"])
    probs = np.array([m.win_probability for m in miners])
    winner = streams["miners"].choice(len(miners), size=len(blocks), p=probs / probs.sum())
    result = simulate_arrivals(
        times,
        fee,
        size,
        blocks,
        [miners[w].strategy for w in winner],
        config,
        block_miner=np.array([miners[w].miner_id for w in winner], dtype=np.int64),
    )
    per_fee = np.zeros(len(miners), dtype=np.int64)
    np.add.at(per_fee, winner, result.block_fee)
    won = np.bincount(winner, minlength=len(miners))
    return GameOutcome(tuple(m.miner_id for m in miners), per_fee, won, result)


@dataclass(frozen=True)
class PayoffMatrix:
    """Bimatrix game; rows are player 1's strategies, columns player 2's.

    ``p1[i, j]`` and ``p2[i, j]`` are the payoffs when player 1 plays
    ``strategies[i]`` and player 2 plays ``strategies[j]``.
    """

    strategies: tuple[Hashable, ...]
    p1: np.ndarray
    p2: np.ndarray

    def __post_init__(self) -> None:
        n = len(self.strategies)
        if n == 0:
            raise ValueError("empty strategy set")
        if len(set(self.strategies)) != n:
            raise ValueError("duplicate strategies")
        p1 = np.asarray(self.p1, dtype=float)
        p2 = np.asarray(self.p2, dtype=float)
        if p1.shape != (n, n) or p2.shape != (n, n):
            raise ValueError(f"payoff arrays must be {n}x{n}")
        if not (np.all(np.isfinite(p1)) and np.all(np.isfinite(p2))):
            raise ValueError("payoff matrix has missing or non-finite cells")
        object.__setattr__(self, "strategies", tuple(self.strategies))
        object.__setattr__(self, "p1", p1)
        object.__setattr__(self, "p2", p2)

    @classmethod
    def from_cells(cls, strategies, cells) -> PayoffMatrix:
        """Build from nested rows of (payoff_p1, payoff_p2) pairs."""
        arr = np.asarray(cells, dtype=float)
        return cls(tuple(strategies), arr[..., 0], arr[..., 1])

    @property
    def cells(self) -> list[list[tuple[float, float]]]:
        n = len(self.strategies)
        return [[(self.p1[i, j], self.p2[i, j]) for j in range(n)] for i in range(n)]

    def index(self, strategy) -> int:
        try:
            return self.strategies.index(strategy)
        except ValueError:
            raise KeyError(f"strategy {strategy!r} not in {self.strategies}") from None


@dataclass(frozen=True)
class EquilibriumReport:
    dominant_p1: Hashable | None
    dominant_p2: Hashable | None
    best_responses_p1: dict
    best_responses_p2: dict
    pure_nash: list[tuple[Hashable, Hashable]]


def _strict_dominant(payoff: np.ndarray) -> int | None:
    # payoff[i, j]: own strategy i against opponent strategy j
    n = payoff.shape[0]
    for i in range(n):
        others = np.delete(payoff, i, axis=0)
        if others.size == 0 or np.all(payoff[i] > others):
            return i
    return None


def find_dominant_strategies(matrix: PayoffMatrix) -> tuple[Hashable | None, Hashable | None]:
    """Strictly dominant strategy of each player, or None."""
    i = _strict_dominant(matrix.p1)
    j = _strict_dominant(matrix.p2.T)
    s = matrix.strategies
    return (None if i is None else s[i], None if j is None else s[j])


def best_response(matrix: PayoffMatrix, player: int, opponent_strategy) -> Hashable:
    """Payoff-maximising reply; ties go to the earliest strategy in the set."""
    k = matrix.index(opponent_strategy)
    if player == 1:
        return matrix.strategies[int(np.argmax(matrix.p1[:, k]))]
    if player == 2:
        return matrix.strategies[int(np.argmax(matrix.p2[k, :]))]
    raise ValueError(f"player must be 1 or 2, got {player}")


def find_pure_nash(matrix: PayoffMatrix) -> list[tuple[Hashable, Hashable]]:
    """Cells where both players are (weakly) best-responding, in row-major order."""
    col_best = matrix.p1 >= matrix.p1.max(axis=0, keepdims=True)
    row_best = matrix.p2 >= matrix.p2.max(axis=1, keepdims=True)
    s = matrix.strategies
    return [(s[i], s[j]) for i, j in zip(*np.nonzero(col_best & row_best))]


def analyze(matrix: PayoffMatrix) -> EquilibriumReport:
    d1, d2 = find_dominant_strategies(matrix)
    return EquilibriumReport(
        dominant_p1=d1,
        dominant_p2=d2,
        best_responses_p1={s: best_response(matrix, 1, s) for s in matrix.strategies},
        best_responses_p2={s: best_response(matrix, 2, s) for s in matrix.strategies},
        pure_nash=find_pure_nash(matrix),
    )


def game_miners(mode: GameMode, s1: Strategy, s2: Strategy) -> list[MinerProfile]:
    mode = GameMode(mode)
    if mode is GameMode.TWO_MINER:
        return [MinerProfile(0, s1, 0.5), MinerProfile(1, s2, 0.5)]
    return [MinerProfile(0, s1, 0.2)] + [MinerProfile(k, s2, 0.2) for k in range(1, 5)]


def derive_seed(*entropy: int) -> int:
    return int(np.random.SeedSequence(list(entropy)).generate_state(1, np.uint64)[0])


@dataclass(frozen=True)
class GameMatrices:
    """Mean satoshi payoffs plus the same cells as shares of collected fees."""

    fee: PayoffMatrix
    share: PayoffMatrix


def _play_cell(task) -> tuple[int, int, np.ndarray, np.ndarray]:
    config, mode, s1, s2, i, j = task
    out = run_game(config, game_miners(mode, s1, s2))
    shares = out.per_miner_share
    fees = np.array([out.per_miner_fee[0], out.per_miner_fee[1:].mean()], dtype=float)
    return i, j, fees, np.array([shares[0], shares[1:].mean()])


def build_payoff_matrix(
    config: SimConfig,
    strategy_set: Sequence[Strategy],
    mode: GameMode | str = GameMode.TWO_MINER,
    replications: int = 20,
    common_random_numbers: bool = False,
    jobs: int = 1,
) -> GameMatrices:
    """Average miner payoffs over ``replications`` games for every strategy pair.

    In ``one_vs_four`` mode player 2's payoff is the mean over the four group
    members.  Replication seeds derive from (seed, cell index, replication),
    or from (seed, replication) alone with ``common_random_numbers``.  With
    ``jobs > 1`` games run in worker processes; the result does not depend
    on ``jobs``.
    """
    if replications < 1:
        raise ValueError("replications must be >= 1")
    mode = GameMode(mode)
    strategies = tuple(Strategy.parse(s) for s in strategy_set)
    n = len(strategies)
    tasks = []
    for i, s1 in enumerate(strategies):
        for j, s2 in enumerate(strategies):
            cell = i * n + j
            for rep in range(replications):
                seed = (
                    derive_seed(config.seed, rep)
                    if common_random_numbers
                    else derive_seed(config.seed, cell, rep)
                )
                tasks.append((dataclasses.replace(config, seed=seed), mode, s1, s2, i, j))

    fee = np.zeros((2, n, n))
    share = np.zeros((2, n, n))
    # summation order is fixed by the task list, so parallel runs add up identically
    for i, j, f, sh in parallel_map(_play_cell, tasks, jobs):
        fee[:, i, j] += f
        share[:, i, j] += sh
    fee /= replications
    share /= replications
    return GameMatrices(
        fee=PayoffMatrix(strategies, fee[0], fee[1]),
        share=PayoffMatrix(strategies, share[0], share[1]),
    )


def parallel_map(fn, items, jobs: int = 1):
    """``map`` in input order, optionally over a process pool."""
    items = list(items)
    if jobs <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    from concurrent.futures import ProcessPoolExecutor

    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))
