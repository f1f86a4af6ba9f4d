"""Command-line entry point: ``mempoolsim {simulate,sweep,game,validate}``.

Exit status is 0 on success, 1 for configuration or validation errors and
2 for I/O errors.  All files are written after the runs finish, each one
atomically.
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
import time
from pathlib import Path
from typing import Sequence

import numpy as np

from .config import ConfigError, ExperimentSpec, dumps_config, load_config
from .csvio import (
    TraceError,
    atomic_write_text,
    ensure_writable_dir,
    load_trace,
    write_csv,
    write_equilibrium,
    write_payoff_matrix,
    write_trace,
)
from .engine import SimConfig, run_simulation, run_trace_simulation
from .game import GameMode, analyze, build_payoff_matrix, parallel_map
from .mempool import Strategy
from .metrics import (
    EmptySummaryError,
    QuantileKey,
    RunSample,
    quartile_report,
    summarize,
    thin_ecdf,
)

log = logging.getLogger("mempoolsim")

SUMMARY_HEADER = (
    "capacity", "strategy", "mean_wait_min", "std_wait_min", "fill_mean", "fill_std",
    "included_count", "pending_count",
)
QUARTILE_HEADER = (
    "capacity", "strategy", "key", "bucket", "upper_threshold", "count", "mean_wait_min",
)
BUCKETS = ("Q1", "Q2", "Q3", "Q4")


def natural_key(strategy: Strategy) -> QuantileKey:
    """Key whose quartiles the strategy orders by (fee-per-byte for FIFO)."""
    return QuantileKey.FEE if strategy is Strategy.FEE_BASED else QuantileKey.FEE_PER_BYTE


def replication_seed(seed: int, rep: int) -> int:
    # replication 0 keeps the configured seed so single runs match `simulate`
    if rep == 0:
        return seed
    return int(np.random.SeedSequence([seed, rep]).generate_state(1, np.uint64)[0])


def _sample_run(config: SimConfig) -> RunSample:
    t0 = time.perf_counter()
    sample = RunSample.from_result(run_simulation(config))
    log.info(
        "capacity=%d strategy=%s seed=%d: %d included in %.1fs",
        config.capacity, config.strategy.value, config.seed, sample.waits.size,
        time.perf_counter() - t0,
    )
    return sample


def summary_row(capacity: int, strategy: Strategy, sample) -> list:
    m = summarize(sample)
    return [capacity, strategy, m.mean_wait, m.std_wait, m.fill_mean, m.fill_std,
            m.included_count, m.pending_count]


def quartile_rows(capacity: int, strategy: Strategy, sample) -> tuple[list, dict]:
    rows, reports = [], {}
    for key in QuantileKey:
        try:
            q = quartile_report(sample, key)
        except EmptySummaryError as exc:
            log.warning("capacity=%d strategy=%s: %s", capacity, strategy.value, exc)
            continue
        reports[key] = q
        uppers = list(q.thresholds) + [None]
        for b, name in enumerate(BUCKETS):
            rows.append([capacity, strategy, key.value, name, uppers[b],
                         q.bucket_sizes[b], q.bucket_mean_wait[b]])
    return rows, reports


def write_ecdfs(out: Path, capacity: int, strategy: Strategy, report, max_points: int) -> None:
    for b, name in enumerate(BUCKETS):
        pts = thin_ecdf(report.bucket_ecdf[b], max_points)
        write_csv(out / f"ecdf_{capacity}_{strategy.value}_{name}.csv", ("wait_min", "fraction"), pts)


def _prepare(args, spec: ExperimentSpec) -> Path:
    out = Path(args.out or spec.output_dir)
    ensure_writable_dir(out)
    return out


def cmd_simulate(spec: ExperimentSpec, out: Path, args) -> None:
    config = spec.base
    result = run_simulation(config)
    sample = RunSample.from_result(result)
    write_csv(out / "summary.csv", SUMMARY_HEADER, [summary_row(config.capacity, config.strategy, sample)])
    rows, _ = quartile_rows(config.capacity, config.strategy, sample)
    write_csv(out / "quartiles.csv", QUARTILE_HEADER, rows)

    counts = np.bincount(result.transactions.block_id[result.transactions.included],
                         minlength=result.n_blocks)
    write_csv(
        out / "blocks.csv",
        ("block_id", "creation_time_s", "tx_count", "used_bytes", "fill_rate",
         "collected_fee_satoshi", "miner_id"),
        (
            [k, result.block_time[k], counts[k], result.block_used[k], result.fill_rate[k],
             result.block_fee[k], result.block_miner[k]]
            for k in range(result.n_blocks)
        ),
    )
    tx = result.transactions
    if args.transactions:
        write_csv(
            out / "transactions.csv",
            ("id", "arrival_time_s", "size_bytes", "fee_satoshi", "fee_per_byte",
             "waiting_time_s", "block_id"),
            (
                [i, tx.arrival_time[i], tx.size[i], tx.fee[i], tx.fee[i] / tx.size[i],
                 tx.waiting_time[i] if tx.block_id[i] >= 0 else None,
                 tx.block_id[i] if tx.block_id[i] >= 0 else None]
                for i in range(len(tx))
            ),
        )
    if args.trace_out:
        write_trace(out / args.trace_out, tx.arrival_time, tx.fee, tx.size)


def cmd_sweep(spec: ExperimentSpec, out: Path, args) -> None:
    grid = [(c, s) for c in spec.sweep_capacities for s in spec.sweep_strategies]
    configs = [
        dataclasses.replace(spec.base, capacity=c, strategy=s,
                            seed=replication_seed(spec.base.seed, rep))
        for c, s in grid
        for rep in range(spec.replications)
    ]
    samples = parallel_map(_sample_run, configs, args.jobs)

    summary, quartiles, ecdfs = [], [], []
    for g, (c, s) in enumerate(grid):
        pooled = RunSample.pool(samples[g * spec.replications : (g + 1) * spec.replications])
        summary.append(summary_row(c, s, pooled))
        rows, reports = quartile_rows(c, s, pooled)
        quartiles += rows
        if natural_key(s) in reports:
            ecdfs.append((c, s, reports[natural_key(s)]))
    write_csv(out / "summary.csv", SUMMARY_HEADER, summary)
    write_csv(out / "quartiles.csv", QUARTILE_HEADER, quartiles)
    for c, s, rep in ecdfs:
        write_ecdfs(out, c, s, rep, spec.ecdf_max_points)


def cmd_game(spec: ExperimentSpec, out: Path, args) -> None:
    mode = GameMode(args.mode) if args.mode else spec.game.mode
    for cap in spec.game_capacities:
        config = dataclasses.replace(spec.base, capacity=cap)
        mats = build_payoff_matrix(
            config, spec.game.strategies, mode, spec.game.replications,
            spec.game.common_random_numbers, jobs=args.jobs,
        )
        write_payoff_matrix(out / f"payoff_matrix_{cap}.csv", mats.fee)
        write_payoff_matrix(out / f"payoff_share_{cap}.csv", mats.share)
        write_equilibrium(out / f"equilibrium_{cap}.csv", analyze(mats.fee))


def _validate_pair(task) -> tuple:
    trace, config = task
    model = summarize(run_simulation(config))
    driven = summarize(run_trace_simulation(trace, config))
    return driven, model


def cmd_validate(spec: ExperimentSpec, out: Path, args) -> None:
    if not args.trace:
        raise ConfigError("validate needs --trace PATH")
    trace = load_trace(args.trace)
    log.info("trace %s: %d rows", args.trace, len(trace))
    configs = [dataclasses.replace(spec.base, capacity=c) for c in spec.sweep_capacities]
    pairs = parallel_map(_validate_pair, [(trace, c) for c in configs], args.jobs)
    rows = []
    for config, (driven, model) in zip(configs, pairs):
        rel = None
        if driven.mean_wait is not None and model.mean_wait:
            rel = (driven.mean_wait - model.mean_wait) / model.mean_wait
        rows.append([config.capacity, config.strategy, driven.mean_wait, model.mean_wait, rel,
                     driven.included_count, model.included_count])
    write_csv(
        out / "validation.csv",
        ("capacity", "strategy", "trace_mean_wait_min", "model_mean_wait_min",
         "relative_error", "trace_included", "model_included"),
        rows,
    )


COMMANDS = {
    "simulate": cmd_simulate,
    "sweep": cmd_sweep,
    "game": cmd_game,
    "validate": cmd_validate,
}


def _seed(text: str) -> int:
    v = int(text, 0)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="mempoolsim",
        description="Simulate a transaction backlog under miner selection strategies.",
    )
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", type=Path, help="TOML configuration (defaults apply when omitted)")
        sp.add_argument("--out", type=Path, help="output directory (overrides experiment.output_dir)")
        sp.add_argument("--seed", type=_seed, help="overrides the configured seed")
        sp.add_argument("--jobs", type=int, default=1, help="worker processes for independent runs")
        sp.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")

    sp = sub.add_parser("simulate", help="one run at the configured capacity and strategy")
    common(sp)
    sp.add_argument("--transactions", action="store_true", help="also write transactions.csv")
    sp.add_argument("--trace-out", metavar="NAME", help="write the generated arrivals as a trace CSV")

    sp = sub.add_parser("sweep", help="capacity x strategy grid")
    common(sp)

    sp = sub.add_parser("game", help="payoff matrices and equilibria")
    common(sp)
    sp.add_argument("--mode", choices=[m.value for m in GameMode])

    sp = sub.add_parser("validate", help="trace-driven vs synthetic arrivals over the capacity sweep")
    common(sp)
    sp.add_argument("--trace", type=Path, help="trace CSV (arrival_time_s,fee_satoshi,size_bytes)")
    return p


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(message)s",
    )
    try:
        spec = load_config(args.config) if args.config else ExperimentSpec()
        if args.seed is not None:
            spec = spec.with_seed(args.seed)
        if args.jobs < 1:
            raise ConfigError("--jobs must be >= 1")
        out = _prepare(args, spec)
        atomic_write_text(out / "config_echo.toml", dumps_config(spec))
        COMMANDS[args.command](spec, out, args)
    except (ConfigError, TraceError, EmptySummaryError, ValueError) as exc:
        print(f"mempoolsim: error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"mempoolsim: I/O error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
