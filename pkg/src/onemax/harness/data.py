"""Price series: CSV ingestion, normalization to ``[1, theta]`` and a synthetic stand-in."""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from onemax.core import Instance, ProblemParams
from onemax.errors import DomainError, InputDataError

HEADER = "timestamp,price"


@dataclass(frozen=True, eq=False)
class PriceSeries:
    """Positive prices at nondecreasing integer timestamps (seconds)."""

    timestamps: np.ndarray
    prices: np.ndarray

    def __post_init__(self):
        ts = np.asarray(self.timestamps, dtype=np.int64).ravel()
        px = np.asarray(self.prices, dtype=float).ravel()
        if ts.shape != px.shape:
            raise DomainError("timestamps and prices differ in length")
        if np.any(~np.isfinite(px)) or np.any(px <= 0):
            raise DomainError("prices must be positive and finite")
        if np.any(np.diff(ts) < 0):
            raise DomainError("timestamps must be nondecreasing")
        object.__setattr__(self, "timestamps", ts)
        object.__setattr__(self, "prices", px)

    def __len__(self) -> int:
        return self.prices.size


def ingest_csv(path: str | Path) -> PriceSeries:
    """Read a ``timestamp,price`` file; any bad row aborts with its line number."""
    path = Path(path)
    try:
        handle = path.open("r", encoding="utf-8-sig", newline="")
    except FileNotFoundError as exc:
        raise InputDataError("missing_file", f"{path} does not exist") from exc
    except OSError as exc:
        raise InputDataError("missing_file", f"cannot open {path}: {exc.strerror}") from exc
    with handle:
        header = handle.readline().strip()
        if header.replace(" ", "") != HEADER:
            raise InputDataError("bad_header", f"expected header {HEADER!r}, got {header!r}", line=1)
        stamps: list[int] = []
        prices: list[float] = []
        last = None
        for lineno, line in enumerate(handle, start=2):
            line = line.strip()
            if not line:
                continue
            fields = line.split(",")
            if len(fields) != 2:
                raise InputDataError("malformed_row", f"expected 2 fields, got {len(fields)}", line=lineno)
            try:
                ts = int(fields[0])
                price = float(fields[1])
            except ValueError:
                raise InputDataError("malformed_row", f"cannot parse {line!r}", line=lineno) from None
            if not math.isfinite(price) or price <= 0:
                raise InputDataError("non_positive", f"price {fields[1].strip()!r} is not positive", line=lineno)
            if last is not None and ts < last:
                raise InputDataError("non_monotone", f"timestamp {ts} precedes {last}", line=lineno)
            last = ts
            stamps.append(ts)
            prices.append(price)
    return PriceSeries(np.array(stamps, dtype=np.int64), np.array(prices, dtype=float))


def write_series_csv(series: PriceSeries, path: str | Path) -> None:
    lines = [HEADER]
    lines.extend(f"{t},{p!r}" for t, p in zip(series.timestamps.tolist(), series.prices.tolist()))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def normalize_series(series: PriceSeries) -> tuple[Instance, float, float]:
    """Divide by the observed minimum ``L``; returns ``(instance, theta, L)`` with ``theta = U/L``."""
    if len(series) == 0:
        raise DomainError("cannot normalize an empty series")
    low = float(series.prices.min())
    theta = float(series.prices.max()) / low
    params = ProblemParams(theta)
    return Instance(np.minimum(series.prices / low, theta), params), theta, low


def generate_gbm(length: int, seed: int, drift: float = 0.0, volatility: float = 0.001,
                 start: float = 1.0, step_seconds: int = 60,
                 price_range: Optional[tuple[float, float]] = None) -> PriceSeries:
    """Geometric Brownian motion sampled every ``step_seconds``.

    With ``price_range=(L, U)`` the log-path is rescaled affinely so that its
    minimum is exactly ``L`` and its maximum exactly ``U``.
    """
    if length < 2:
        raise DomainError("a synthetic series needs at least two points")
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))
    steps = (drift - 0.5 * volatility ** 2) + volatility * rng.standard_normal(length - 1)
    log_path = math.log(start) + np.concatenate(([0.0], np.cumsum(steps)))
    if price_range is not None:
        low, high = price_range
        if not (0 < low < high):
            raise DomainError("price_range needs 0 < L < U")
        lo, hi = log_path.min(), log_path.max()
        if hi == lo:
            raise DomainError("flat path cannot be rescaled")
        log_path = math.log(low) + (log_path - lo) / (hi - lo) * math.log(high / low)
        prices = np.exp(log_path)
        prices[np.argmin(log_path)] = low
        prices[np.argmax(log_path)] = high
    else:
        prices = np.exp(log_path)
    return PriceSeries(np.arange(length, dtype=np.int64) * step_seconds, prices)
