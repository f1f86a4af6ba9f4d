"""Discrete-event simulator of a Bitcoin-style transaction backlog.

Arrivals follow an inhomogeneous Poisson process, blocks an exponential
clock, and each block is packed from the backlog under a miner strategy.
"""

from .engine import Block, SimConfig, SimResult, TransactionTable, run_simulation, run_trace_simulation
from .game import (
    EquilibriumReport,
    GameMode,
    GameOutcome,
    MinerProfile,
    PayoffMatrix,
    analyze,
    best_response,
    build_payoff_matrix,
    find_dominant_strategies,
    find_pure_nash,
    run_game,
)
from .mempool import Backlog, Strategy, Transaction
from .metrics import QuantileSummary, SummaryMetrics, ecdf, quartile_report, summarize
from .stochastic import AttributeModel, IntensityFunction, sample_arrival_times, sample_attributes

__all__ = [
    "AttributeModel",
    "Backlog",
    "Block",
    "EquilibriumReport",
    "GameMode",
    "GameOutcome",
    "IntensityFunction",
    "MinerProfile",
    "PayoffMatrix",
    "QuantileSummary",
    "SimConfig",
    "SimResult",
    "Strategy",
    "SummaryMetrics",
    "Transaction",
    "TransactionTable",
    "analyze",
    "best_response",
    "build_payoff_matrix",
    "ecdf",
    "find_dominant_strategies",
    "find_pure_nash",
    "quartile_report",
    "run_game",
    "run_simulation",
    "run_trace_simulation",
    "sample_arrival_times",
    "sample_attributes",
    "summarize",
]
