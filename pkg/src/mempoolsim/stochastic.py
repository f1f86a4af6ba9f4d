"""Arrival-time and transaction-attribute sampling.

Arrivals come from an inhomogeneous Poisson process generated by thinning a
homogeneous process at the bounding rate ``lambda_max``.  Fee and size are
drawn from lognormal marginals coupled by a Gaussian copula.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr, ndtri

#: Default thinning bound in tx/s (nominal Bitcoin throughput).
DEFAULT_LAMBDA_MAX = 7.2

# keeps ndtri finite when ndtr rounds to exactly 0 or 1
_U_LO = np.finfo(float).tiny
_U_HI = 1.0 - 2.0**-53


class IntensityKind(str, enum.Enum):
    CONSTANT = "constant"
    SINUSOID = "sinusoid"
    LINEAR_RAMP = "linear_ramp"


@dataclass(frozen=True)
class IntensityFunction:
    """Arrival rate lambda(t) in tx/s together with its thinning bound.

    Use the :meth:`constant`, :meth:`sinusoid` and :meth:`linear_ramp`
    constructors rather than building instances field by field.
    """

    kind: IntensityKind
    lambda_lo: float
    lambda_hi: float
    lambda_max: float
    period: float = 3600.0
    ramp_duration: float = 0.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", IntensityKind(self.kind))
        if not (math.isfinite(self.lambda_lo) and self.lambda_lo >= 0):
            raise ValueError(f"lambda_lo must be >= 0, got {self.lambda_lo}")
        if not self.lambda_hi >= self.lambda_lo:
            raise ValueError(
                f"lambda_hi ({self.lambda_hi}) must be >= lambda_lo ({self.lambda_lo})"
            )
        if self.kind is IntensityKind.CONSTANT and self.lambda_hi != self.lambda_lo:
            raise ValueError("constant intensity requires lambda_hi == lambda_lo")
        if self.kind is IntensityKind.SINUSOID and not self.period > 0:
            raise ValueError(f"period must be > 0, got {self.period}")
        if self.kind is IntensityKind.LINEAR_RAMP and not self.ramp_duration > 0:
            raise ValueError(f"ramp_duration must be > 0, got {self.ramp_duration}")
        # every kind stays within [lambda_lo, lambda_hi], so this is the
        # whole-horizon check that thinning needs
        if not self.lambda_max >= self.lambda_hi:
            raise ValueError(
                f"lambda_max ({self.lambda_max}) is below the peak intensity "
                f"({self.lambda_hi}); thinning would be biased"
            )
        if self.lambda_max <= 0 and self.lambda_hi > 0:
            raise ValueError("lambda_max must be > 0")

    @staticmethod
    def default_bound(lambda_hi: float) -> float:
        return DEFAULT_LAMBDA_MAX if lambda_hi <= DEFAULT_LAMBDA_MAX else float(lambda_hi)

    @classmethod
    def constant(cls, rate: float, lambda_max: float | None = None) -> IntensityFunction:
        if lambda_max is None:
            lambda_max = cls.default_bound(rate)
        return cls(IntensityKind.CONSTANT, rate, rate, lambda_max)

    @classmethod
    def sinusoid(
        cls,
        lo: float,
        hi: float,
        period: float = 3600.0,
        lambda_max: float | None = None,
    ) -> IntensityFunction:
        if lambda_max is None:
            lambda_max = cls.default_bound(hi)
        return cls(IntensityKind.SINUSOID, lo, hi, lambda_max, period=period)

    @classmethod
    def linear_ramp(
        cls,
        lo: float,
        hi: float,
        duration: float,
        lambda_max: float | None = None,
    ) -> IntensityFunction:
        if lambda_max is None:
            lambda_max = cls.default_bound(hi)
        return cls(IntensityKind.LINEAR_RAMP, lo, hi, lambda_max, ramp_duration=duration)

    @property
    def mean_rate(self) -> float:
        """Long-run time average of the intensity (over whole periods)."""
        return 0.5 * (self.lambda_lo + self.lambda_hi)

    def __call__(self, t):
        return evaluate_intensity(self, t)


def evaluate_intensity(intensity: IntensityFunction, t):
    """Return lambda(t); ``t`` may be a scalar or an array of seconds."""
    lo, hi = intensity.lambda_lo, intensity.lambda_hi
    t_arr = np.asarray(t, dtype=float)
    if intensity.kind is IntensityKind.CONSTANT:
        out = np.full_like(t_arr, lo)
    elif intensity.kind is IntensityKind.SINUSOID:
        mid = 0.5 * (lo + hi)
        half = 0.5 * (hi - lo)
        out = mid + half * np.sin(2.0 * np.pi * t_arr / intensity.period)
        out = np.clip(out, lo, hi)
    else:
        frac = np.clip(t_arr / intensity.ramp_duration, 0.0, 1.0)
        out = lo + (hi - lo) * frac
    if out.ndim == 0:
        return float(out)
    return out


def thin_candidates(
    intensity: IntensityFunction, horizon: float, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    """Homogeneous candidates in (0, horizon] and their acceptance mask.

    Uniforms are consumed in the order (x_1, D_1, x_2, D_2, ...): ``x`` gives
    the inter-candidate gap ``-ln(x) / lambda_max`` and ``D`` the acceptance
    test ``D <= lambda(s) / lambda_max``.
    """
    if not horizon > 0:
        raise ValueError(f"horizon must be > 0, got {horizon}")
    lam = intensity.lambda_max
    if lam <= 0:
        return np.empty(0), np.empty(0, dtype=bool)

    expected = lam * horizon
    chunk = int(expected + 6.0 * math.sqrt(expected)) + 64
    times: list[np.ndarray] = []
    accept: list[np.ndarray] = []
    s = 0.0
    while True:
        draws = rng.random((chunk, 2))
        gaps = -np.log1p(-draws[:, 0]) / lam  # 1 - u lies in (0, 1]
        gaps[0] += s
        cand = np.cumsum(gaps)
        n_in = int(np.searchsorted(cand, horizon, side="right"))
        cand = cand[:n_in]
        ratio = evaluate_intensity(intensity, cand) / lam
        times.append(cand)
        accept.append(draws[:n_in, 1] <= ratio)
        if n_in < chunk:
            break
        s = float(cand[-1])
        chunk = max(1024, chunk // 4)
    return np.concatenate(times), np.concatenate(accept)


def sample_arrival_times(
    intensity: IntensityFunction, horizon: float, rng: np.random.Generator
) -> np.ndarray:
    """Arrival timestamps on (0, horizon] by Lewis-Shedler thinning."""
    cand, keep = thin_candidates(intensity, horizon, rng)
    return cand[keep]


@dataclass(frozen=True)
class AttributeModel:
    """Lognormal fee/size marginals joined by a Gaussian copula."""

    fee_mu_log: float = 9.0
    fee_sigma_log: float = 1.0
    size_mu_log: float = 5.95
    size_sigma_log: float = 0.6
    copula_rho: float = 0.2
    min_size: int = 150

    def __post_init__(self) -> None:
        for name in ("fee_sigma_log", "size_sigma_log"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0")
        if not -1.0 < self.copula_rho < 1.0:
            raise ValueError(f"copula_rho must lie in (-1, 1), got {self.copula_rho}")
        if int(self.min_size) != self.min_size or self.min_size < 1:
            raise ValueError(f"min_size must be an integer >= 1, got {self.min_size}")

    @property
    def mean_size(self) -> float:
        """Mean of the raw (unfloored, unrounded) size marginal."""
        return math.exp(self.size_mu_log + 0.5 * self.size_sigma_log**2)


def gaussian_copula_normals(
    rho: float, n: int, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    """Standard normal pairs with correlation ``rho``."""
    z = rng.standard_normal((n, 2))
    z1 = z[:, 0]
    z2 = rho * z1 + math.sqrt(1.0 - rho * rho) * z[:, 1]
    return z1, z2


def gaussian_copula_uniforms(
    rho: float, n: int, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    z1, z2 = gaussian_copula_normals(rho, n, rng)
    return ndtr(z1), ndtr(z2)


def lognormal_ppf(u: np.ndarray, mu_log: float, sigma_log: float) -> np.ndarray:
    return np.exp(mu_log + sigma_log * ndtri(np.clip(u, _U_LO, _U_HI)))


def sample_attributes(
    model: AttributeModel, n: int, rng: np.random.Generator, exact_copula: bool = False
) -> tuple[np.ndarray, np.ndarray]:
    """Draw ``n`` (fee, size) pairs as int64 satoshi and int64 bytes.

    With lognormal marginals, ``lognormal_ppf(ndtr(z))`` is exactly
    ``exp(mu + sigma * z)``, so the copula normals are mapped in one step;
    ``exact_copula=True`` takes the literal uniform round trip instead.
    """
    if exact_copula:
        u_fee, u_size = gaussian_copula_uniforms(model.copula_rho, n, rng)
        fee = lognormal_ppf(u_fee, model.fee_mu_log, model.fee_sigma_log)
        size = lognormal_ppf(u_size, model.size_mu_log, model.size_sigma_log)
    else:
        z1, z2 = gaussian_copula_normals(model.copula_rho, n, rng)
        fee = np.exp(model.fee_mu_log + model.fee_sigma_log * z1)
        size = np.exp(model.size_mu_log + model.size_sigma_log * z2)
    fee = np.ceil(fee)
    size = np.ceil(size)
    fee = np.maximum(fee, 1).astype(np.int64)
    size = np.maximum(size, model.min_size).astype(np.int64)
    return fee, size


def sample_attribute_pair(model: AttributeModel, rng: np.random.Generator) -> tuple[int, int]:
    fee, size = sample_attributes(model, 1, rng)
    return int(fee[0]), int(size[0])
