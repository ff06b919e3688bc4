"""Stochastic market inputs: fundamental path, arrivals, noise draws, shocks."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

TRADING_MINUTES_PER_YEAR = 252 * 390

#: Years per timestamp; one timestamp is one trading minute, so the
#: "5-minute" trade metrics span exactly five timestamps.
STEP_YEARS = 1.0 / TRADING_MINUTES_PER_YEAR

#: Extra path values generated beyond the playable rounds so the insider's
#: five-step-ahead signal is defined at the final round.
LOOKAHEAD = 5


def substream(seed: int, purpose: int) -> np.random.Generator:
    """Independent deterministic RNG stream for one (run, purpose) pair.

    Adding a new purpose index never perturbs draws on existing streams.
    """
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(purpose,)))


def _as_generator(rng: int | np.random.Generator) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


@dataclass(frozen=True)
class AssetSpec:
    """Annualized return/volatility and starting price of the traded asset."""

    ticker: str
    annual_return: float
    annual_volatility: float
    initial_price: float
    step_years: float = STEP_YEARS

    def __post_init__(self) -> None:
        if self.annual_volatility < 0:
            raise ValueError("annual_volatility must be >= 0")
        if self.initial_price <= 0:
            raise ValueError("initial_price must be > 0")
        if self.step_years <= 0:
            raise ValueError("step_years must be > 0")


@dataclass
class FundamentalPath:
    """Exogenous fundamental value per timestamp, plus any applied shocks."""

    values: np.ndarray
    shock_log: list[tuple[int, float]] = field(default_factory=list)

    @property
    def usable_rounds(self) -> int:
        return len(self.values) - LOOKAHEAD


@dataclass(frozen=True)
class ArrivalModel:
    """Poisson order-arrival intensity per timestamp."""

    lambda_rate: float

    def __post_init__(self) -> None:
        if self.lambda_rate < 0:
            raise ValueError("lambda_rate must be >= 0")


@dataclass(frozen=True)
class NoiseDistributions:
    """Normal price-spread and order-quantity distributions for noise flow."""

    spread_mean: float = 0.05
    spread_sd: float = 0.02
    quantity_mean: float = 5.0
    quantity_sd: float = 2.0

    def __post_init__(self) -> None:
        if self.spread_sd < 0 or self.quantity_sd < 0:
            raise ValueError("standard deviations must be >= 0")


@dataclass(frozen=True)
class ShockSpec:
    """One multiplicative jump in the fundamental value."""

    shock_time: int
    multiplier: float = 1.30
    convergence_band: float = 0.01

    def __post_init__(self) -> None:
        if self.shock_time < 1:
            raise ValueError("shock_time must be >= 1")
        if self.multiplier <= 0:
            raise ValueError("multiplier must be > 0")
        if self.convergence_band <= 0:
            raise ValueError("convergence_band must be > 0")


def generate_fundamental_path(
    spec: AssetSpec, rounds: int, rng: int | np.random.Generator
) -> FundamentalPath:
    """Geometric Brownian motion sampled on the timestamp grid.

    values[0] = P0 and values[k+1] = values[k] * exp((mu - sigma^2/2) dt
    + sigma sqrt(dt) Z_k). The path carries LOOKAHEAD extra values beyond
    `rounds` for the insider signal.
    """
    if rounds < 1:
        raise ValueError("rounds must be >= 1")
    rng = _as_generator(rng)
    n = rounds + LOOKAHEAD
    dt = spec.step_years
    drift = (spec.annual_return - 0.5 * spec.annual_volatility**2) * dt
    vol = spec.annual_volatility * math.sqrt(dt)
    z = rng.standard_normal(n - 1)
    values = np.empty(n)
    values[0] = spec.initial_price
    values[1:] = spec.initial_price * np.exp(np.cumsum(drift + vol * z))
    return FundamentalPath(values)


def poisson_arrivals(model: ArrivalModel, rng: np.random.Generator) -> int:
    return int(rng.poisson(model.lambda_rate))


def draw_spread(dist: NoiseDistributions, rng: np.random.Generator) -> float:
    """Normal spread draw, clamped at zero."""
    return max(0.0, float(rng.normal(dist.spread_mean, dist.spread_sd)))


def draw_quantity(dist: NoiseDistributions, rng: np.random.Generator) -> int:
    """Normal quantity draw rounded to the nearest share, at least 1."""
    return max(1, int(math.floor(rng.normal(dist.quantity_mean, dist.quantity_sd) + 0.5)))


def apply_shock(path: FundamentalPath, shock: ShockSpec) -> FundamentalPath:
    """Scale the fundamental from ``shock_time`` onward; shocks compose."""
    if shock.shock_time >= len(path.values):
        raise ValueError(
            f"shock_time {shock.shock_time} out of range for path of length {len(path.values)}"
        )
    values = path.values.copy()
    values[shock.shock_time :] *= shock.multiplier
    return FundamentalPath(values, path.shock_log + [(shock.shock_time, shock.multiplier)])


def save_historical_path(path: FundamentalPath, filename) -> None:
    with open(filename, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["timestamp", "price"])
        for t, price in enumerate(path.values):
            writer.writerow([t, repr(float(price))])


def load_historical_path(filename) -> FundamentalPath:
    """Read a ``timestamp,price`` CSV into a fundamental path.

    The file must hold strictly increasing timestamps and positive prices;
    the last LOOKAHEAD rows are reserved for the insider signal, so a file
    of N rows supports N - LOOKAHEAD playable rounds.
    """
    values: list[float] = []
    last_t: int | None = None
    with open(filename, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [c.strip().lower() for c in header[:2]] != ["timestamp", "price"]:
            raise ValueError(f"{filename}: expected header 'timestamp,price'")
        for lineno, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) < 2:
                raise ValueError(f"{filename}:{lineno}: expected 'timestamp,price'")
            try:
                t = int(row[0])
                price = float(row[1])
            except ValueError as exc:
                raise ValueError(f"{filename}:{lineno}: malformed row {row!r}") from exc
            if last_t is not None and t <= last_t:
                raise ValueError(f"{filename}:{lineno}: timestamps must be strictly increasing")
            if price <= 0:
                raise ValueError(f"{filename}:{lineno}: price must be > 0, got {price}")
            last_t = t
            values.append(price)
    if len(values) <= LOOKAHEAD:
        raise ValueError(
            f"{filename}: needs more than {LOOKAHEAD} rows "
            f"({LOOKAHEAD} are reserved for the insider lookahead), got {len(values)}"
        )
    return FundamentalPath(np.asarray(values, dtype=float))
