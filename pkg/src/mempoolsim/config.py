"""TOML experiment configuration.

Key names carry their units (``horizon_s``, ``capacity_bytes`` ...).  Every
key is optional; a file holding only ``seed = 7`` yields the defaults::

    seed = 7

    [intensity]
    kind = "sinusoid"            # constant | sinusoid | linear_ramp
    lambda_lo_per_s = 3.0
    lambda_hi_per_s = 3.3
    period_s = 3600.0            # sinusoid
    ramp_duration_s = 2592000.0  # linear_ramp; defaults to the horizon
    lambda_max_per_s = 7.2

    [attributes]
    fee_mu_log = 9.0
    fee_sigma_log = 1.0
    size_mu_log = 5.95
    size_sigma_log = 0.6
    copula_rho = 0.2
    min_size_bytes = 150

    [simulation]
    block_rate_per_s = 0.0016666666666666668
    capacity_bytes = 1000000
    strategy = "fee_per_byte"
    horizon_s = 2592000.0
    warmup_s = 259200.0          # defaults to 10% of the horizon

    [experiment]
    sweep_capacities_bytes = [1000000, 2000000, ..., 8000000]
    sweep_strategies = ["fee_per_byte", "fee_based", "fifo"]
    replications = 1
    output_dir = "out"
    ecdf_max_points = 2000       # 0 keeps every ECDF step

    [game]
    mode = "two_miner"           # two_miner | one_vs_four
    strategies = ["fee_based", "fee_per_byte", "fifo"]
    capacities_bytes = [1000000]
    replications = 20
    common_random_numbers = false
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field, replace
from pathlib import Path

import tomli_w

from .engine import MB, SimConfig
from .game import GameMode
from .mempool import Strategy
from .stochastic import AttributeModel, IntensityFunction, IntensityKind

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib


class ConfigError(ValueError):
    """Unreadable or invalid configuration; the message names the key."""


ALL_STRATEGIES = (Strategy.FEE_PER_BYTE, Strategy.FEE_BASED, Strategy.FIFO)
GAME_STRATEGIES = (Strategy.FEE_BASED, Strategy.FEE_PER_BYTE, Strategy.FIFO)


@dataclass(frozen=True)
class GameSpec:
    mode: GameMode = GameMode.TWO_MINER
    strategies: tuple[Strategy, ...] = GAME_STRATEGIES
    capacities: tuple[int, ...] | None = None  # None: the base capacity
    replications: int = 20
    common_random_numbers: bool = False

    def __post_init__(self) -> None:
        object.__setattr__(self, "mode", GameMode(self.mode))
        object.__setattr__(self, "strategies", tuple(Strategy.parse(s) for s in self.strategies))
        if not self.strategies:
            raise ValueError("strategies: must not be empty")
        if len(set(self.strategies)) != len(self.strategies):
            raise ValueError("strategies: duplicates")
        if self.capacities is not None:
            object.__setattr__(self, "capacities", tuple(int(c) for c in self.capacities))
            if not self.capacities:
                raise ValueError("capacities: must not be empty")
        if self.replications < 1:
            raise ValueError("replications: must be >= 1")


@dataclass(frozen=True)
class ExperimentSpec:
    base: SimConfig = field(default_factory=SimConfig)
    sweep_capacities: tuple[int, ...] = tuple(k * MB for k in range(1, 9))
    sweep_strategies: tuple[Strategy, ...] = ALL_STRATEGIES
    replications: int = 1
    output_dir: str = "out"
    ecdf_max_points: int = 2000
    game: GameSpec = field(default_factory=GameSpec)

    def __post_init__(self) -> None:
        object.__setattr__(self, "sweep_capacities", tuple(int(c) for c in self.sweep_capacities))
        object.__setattr__(
            self, "sweep_strategies", tuple(Strategy.parse(s) for s in self.sweep_strategies)
        )
        if not self.sweep_capacities:
            raise ValueError("sweep_capacities: must not be empty")
        if not self.sweep_strategies:
            raise ValueError("sweep_strategies: must not be empty")
        for c in self.sweep_capacities + (self.game.capacities or ()):
            if c < self.base.attributes.min_size:
                raise ValueError(f"capacity: {c} is below min_size {self.base.attributes.min_size}")
        if self.replications < 1:
            raise ValueError("replications: must be >= 1")
        if self.ecdf_max_points < 0:
            raise ValueError("ecdf_max_points: must be >= 0")

    @property
    def game_capacities(self) -> tuple[int, ...]:
        return self.game.capacities or (self.base.capacity,)

    def with_seed(self, seed: int) -> ExperimentSpec:
        return replace(self, base=replace(self.base, seed=seed))


_SECTIONS = {
    "intensity": {"kind", "lambda_lo_per_s", "lambda_hi_per_s", "period_s", "ramp_duration_s", "lambda_max_per_s"},
    "attributes": {"fee_mu_log", "fee_sigma_log", "size_mu_log", "size_sigma_log", "copula_rho", "min_size_bytes"},
    "simulation": {"block_rate_per_s", "capacity_bytes", "strategy", "horizon_s", "warmup_s"},
    "experiment": {"sweep_capacities_bytes", "sweep_strategies", "replications", "output_dir", "ecdf_max_points"},
    "game": {"mode", "strategies", "capacities_bytes", "replications", "common_random_numbers"},
}

# field names used by the dataclasses, mapped to the key that sets them
_FIELD_KEYS = {
    "capacity": "simulation.capacity_bytes",
    "mu": "simulation.block_rate_per_s",
    "horizon": "simulation.horizon_s",
    "warmup": "simulation.warmup_s",
    "seed": "seed",
    "replications": "replications",
}


def _check_keys(doc: dict) -> None:
    for key, value in doc.items():
        if key == "seed":
            continue
        if key not in _SECTIONS:
            raise ConfigError(f"{key}: unknown key")
        if not isinstance(value, dict):
            raise ConfigError(f"{key}: must be a table")
        unknown = sorted(set(value) - _SECTIONS[key])
        if unknown:
            raise ConfigError(f"{key}.{unknown[0]}: unknown key")


def _num(table: dict, section: str, key: str, default, kind=float):
    v = table.get(key, default)
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{section}.{key}: expected a number, got {v!r}")
    if kind is int:
        if v != int(v):
            raise ConfigError(f"{section}.{key}: expected an integer, got {v!r}")
        return int(v)
    return float(v)


def spec_from_dict(doc: dict) -> ExperimentSpec:
    """Build and validate an ExperimentSpec from a parsed TOML document."""
    _check_keys(doc)
    seed = doc.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int) or not 0 <= seed < 2**64:
        raise ConfigError(f"seed: must be an unsigned 64-bit integer, got {seed!r}")

    sim = doc.get("simulation", {})
    horizon = _num(sim, "simulation", "horizon_s", 30 * 86_400.0)
    try:
        intensity = _intensity(doc.get("intensity", {}), horizon)
        a = doc.get("attributes", {})
        attributes = AttributeModel(
            fee_mu_log=_num(a, "attributes", "fee_mu_log", 9.0),
            fee_sigma_log=_num(a, "attributes", "fee_sigma_log", 1.0),
            size_mu_log=_num(a, "attributes", "size_mu_log", 5.95),
            size_sigma_log=_num(a, "attributes", "size_sigma_log", 0.6),
            copula_rho=_num(a, "attributes", "copula_rho", 0.2),
            min_size=_num(a, "attributes", "min_size_bytes", 150, int),
        )
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(f"{_section_of(exc)}: {exc}") from None

    warmup = sim.get("warmup_s")
    try:
        base = SimConfig(
            intensity=intensity,
            attributes=attributes,
            mu=_num(sim, "simulation", "block_rate_per_s", 1.0 / 600.0),
            capacity=_num(sim, "simulation", "capacity_bytes", MB, int),
            strategy=Strategy.parse(sim.get("strategy", "fee_per_byte")),
            horizon=horizon,
            warmup=None if warmup is None else _num(sim, "simulation", "warmup_s", None),
            seed=seed,
        )
        e = doc.get("experiment", {})
        g = doc.get("game", {})
        game_caps = g.get("capacities_bytes")
        game = GameSpec(
            mode=g.get("mode", GameMode.TWO_MINER.value),
            strategies=tuple(g.get("strategies", [s.value for s in GAME_STRATEGIES])),
            capacities=None if game_caps is None else tuple(_int_list(game_caps, "game.capacities_bytes")),
            replications=_num(g, "game", "replications", 20, int),
            common_random_numbers=_bool(g, "game", "common_random_numbers", False),
        )
        return ExperimentSpec(
            base=base,
            sweep_capacities=tuple(
                _int_list(e.get("sweep_capacities_bytes", [k * MB for k in range(1, 9)]), "experiment.sweep_capacities_bytes")
            ),
            sweep_strategies=tuple(e.get("sweep_strategies", [s.value for s in ALL_STRATEGIES])),
            replications=_num(e, "experiment", "replications", 1, int),
            output_dir=str(e.get("output_dir", "out")),
            ecdf_max_points=_num(e, "experiment", "ecdf_max_points", 2000, int),
            game=game,
        )
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(_name_field(str(exc))) from None


def _section_of(exc: ValueError) -> str:
    msg = str(exc)
    if any(k in msg for k in ("lambda", "period", "ramp", "intensity")):
        return "intensity"
    return "attributes"


def _name_field(msg: str) -> str:
    head, sep, rest = msg.partition(":")
    if sep and head in _FIELD_KEYS:
        return f"{_FIELD_KEYS[head]} ({head}):{rest}"
    return msg


def _int_list(v, key: str) -> list[int]:
    if not isinstance(v, list) or not all(isinstance(x, int) and not isinstance(x, bool) for x in v):
        raise ConfigError(f"{key}: expected a list of integers, got {v!r}")
    return v


def _bool(table: dict, section: str, key: str, default: bool) -> bool:
    v = table.get(key, default)
    if not isinstance(v, bool):
        raise ConfigError(f"{section}.{key}: expected true or false, got {v!r}")
    return v


def _intensity(t: dict, horizon: float) -> IntensityFunction:
    kind = IntensityKind(t.get("kind", "sinusoid"))
    if kind is IntensityKind.CONSTANT:
        lo = _num(t, "intensity", "lambda_lo_per_s", 3.0)
        hi = _num(t, "intensity", "lambda_hi_per_s", lo)
    else:
        lo = _num(t, "intensity", "lambda_lo_per_s", 3.0)
        hi = _num(t, "intensity", "lambda_hi_per_s", 3.3)
    lam_max = t.get("lambda_max_per_s")
    lam_max = (
        IntensityFunction.default_bound(hi)
        if lam_max is None
        else _num(t, "intensity", "lambda_max_per_s", None)
    )
    return IntensityFunction(
        kind,
        lo,
        hi,
        lam_max,
        period=_num(t, "intensity", "period_s", 3600.0),
        ramp_duration=(
            _num(t, "intensity", "ramp_duration_s", horizon)
            if kind is IntensityKind.LINEAR_RAMP
            else 0.0
        ),
    )


def loads_config(text: str) -> ExperimentSpec:
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        # the decoder message carries "(at line L, column C)"
        raise ConfigError(f"parse error: {exc}") from None
    return spec_from_dict(doc)


def load_config(path) -> ExperimentSpec:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except UnicodeDecodeError as exc:
        raise ConfigError(f"{path}: not UTF-8 text ({exc})") from None
    return loads_config(text)


def spec_to_dict(spec: ExperimentSpec) -> dict:
    b = spec.base
    i, a = b.intensity, b.attributes
    doc = {
        "seed": b.seed,
        "intensity": {
            "kind": i.kind.value,
            "lambda_lo_per_s": i.lambda_lo,
            "lambda_hi_per_s": i.lambda_hi,
            "period_s": i.period,
            "ramp_duration_s": i.ramp_duration,
            "lambda_max_per_s": i.lambda_max,
        },
        "attributes": {
            "fee_mu_log": a.fee_mu_log,
            "fee_sigma_log": a.fee_sigma_log,
            "size_mu_log": a.size_mu_log,
            "size_sigma_log": a.size_sigma_log,
            "copula_rho": a.copula_rho,
            "min_size_bytes": a.min_size,
        },
        "simulation": {
            "block_rate_per_s": b.mu,
            "capacity_bytes": b.capacity,
            "strategy": b.strategy.value,
            "horizon_s": b.horizon,
            "warmup_s": b.warmup,
        },
        "experiment": {
            "sweep_capacities_bytes": list(spec.sweep_capacities),
            "sweep_strategies": [s.value for s in spec.sweep_strategies],
            "replications": spec.replications,
            "output_dir": spec.output_dir,
            "ecdf_max_points": spec.ecdf_max_points,
        },
        "game": {
            "mode": spec.game.mode.value,
            "strategies": [s.value for s in spec.game.strategies],
            "replications": spec.game.replications,
            "common_random_numbers": spec.game.common_random_numbers,
        },
    }
    if spec.game.capacities is not None:
        doc["game"]["capacities_bytes"] = list(spec.game.capacities)
    return doc


def dumps_config(spec: ExperimentSpec) -> str:
    """TOML text that :func:`loads_config` maps back to an equal spec."""
    return tomli_w.dumps(spec_to_dict(spec))
