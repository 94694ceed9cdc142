"""Price sequences, threshold execution, error measures and worst-case instances."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Optional

import numpy as np

from onemax.errors import DomainError


@dataclass(frozen=True)
class ProblemParams:
    """Global price range: every price and prediction lives in ``[1, theta]``."""

    theta: float

    def __post_init__(self):
        if not np.isfinite(self.theta) or self.theta <= 1.0:
            raise DomainError(f"theta must be a finite real > 1, got {self.theta!r}")

    def check_price(self, value: float, name: str = "price") -> float:
        value = float(value)
        if not (1.0 <= value <= self.theta):
            raise DomainError(f"{name}={value!r} outside [1, {self.theta}]")
        return value


@dataclass(frozen=True, eq=False)
class Instance:
    """A fully materialized price sequence with all prices in ``[1, theta]``."""

    prices: np.ndarray
    params: ProblemParams

    def __post_init__(self):
        prices = np.asarray(self.prices, dtype=float)
        if prices.ndim != 1 or prices.size == 0:
            raise DomainError("an instance needs at least one price")
        if np.any(prices < 1.0) or np.any(prices > self.params.theta) or np.any(np.isnan(prices)):
            raise DomainError(f"prices must lie in [1, {self.params.theta}]")
        prices.setflags(write=False)
        object.__setattr__(self, "prices", prices)

    def __len__(self) -> int:
        return self.prices.size

    def __eq__(self, other):
        if not isinstance(other, Instance):
            return NotImplemented
        return self.params == other.params and np.array_equal(self.prices, other.prices)

    __hash__ = None


@dataclass(frozen=True)
class Outcome:
    """Result of running a threshold rule.

    ``accepted_index`` is 1-based; ``None`` means nothing was accepted and the
    payoff fell back to 1.
    """

    payoff: float
    accepted_index: Optional[int] = None


def max_price(instance: Instance) -> float:
    return float(instance.prices.max())


def run_threshold(instance: Instance, threshold: float) -> Outcome:
    """Accept the first price that is at least ``threshold``."""
    threshold = instance.params.check_price(threshold, "threshold")
    hits = np.flatnonzero(instance.prices >= threshold)
    if hits.size == 0:
        return Outcome(payoff=1.0)
    i = int(hits[0])
    return Outcome(payoff=float(instance.prices[i]), accepted_index=i + 1)


def multiplicative_error(p_star, y, params: Optional[ProblemParams] = None):
    """Scale-invariant error ``min(p*/y, y/p*)``, equal to 1 only for a perfect prediction.

    Works elementwise on arrays. When ``params`` is given the inputs are
    checked against ``[1, theta]``.
    """
    p_star = np.asarray(p_star, dtype=float)
    y = np.asarray(y, dtype=float)
    if params is not None:
        for name, v in (("p_star", p_star), ("y", y)):
            if np.any(v < 1.0) or np.any(v > params.theta):
                raise DomainError(f"{name} outside [1, {params.theta}]")
    elif np.any(p_star <= 0) or np.any(y <= 0):
        raise DomainError("multiplicative error needs positive arguments")
    out = np.minimum(p_star / y, y / p_star)
    return float(out) if out.ndim == 0 else out


def additive_error(p_star, y):
    out = np.abs(np.asarray(p_star, dtype=float) - np.asarray(y, dtype=float))
    return float(out) if out.ndim == 0 else out


@lru_cache(maxsize=32)
def price_grid(theta: float, n: int) -> np.ndarray:
    """Uniform grid ``1 + (theta-1)(i-1)/(n-1)``, i = 1..n, with exact endpoints."""
    if n < 2:
        raise DomainError(f"grid needs n >= 2, got {n}")
    grid = np.linspace(1.0, theta, n)
    grid.setflags(write=False)
    return grid


def worst_case_instance(params: ProblemParams, n: int, q: float) -> Instance:
    """Prices rise along the uniform grid while they stay <= q, then drop to 1."""
    if n < 2:
        raise DomainError(f"worst-case instances need n >= 2, got {n}")
    q = params.check_price(q, "q")
    grid = price_grid(params.theta, n)
    return Instance(np.where(grid <= q, grid, 1.0), params)


def worst_case_payoff(params: ProblemParams, n: int, q, threshold):
    """Vectorized ``(payoff, max price)`` of a threshold rule on ``I_n(q)``.

    Equivalent to ``run_threshold(worst_case_instance(params, n, q), threshold)``
    without materializing the instance; ``q`` and ``threshold`` broadcast.
    """
    grid = price_grid(params.theta, n)
    q, threshold = np.broadcast_arrays(np.asarray(q, dtype=float), np.asarray(threshold, dtype=float))
    top = np.searchsorted(grid, q, side="right") - 1
    p_max = grid[np.clip(top, 0, n - 1)]
    first = np.searchsorted(grid, threshold, side="left")
    candidate = grid[np.clip(first, 0, n - 1)]
    accepted = (first < n) & (candidate <= p_max)
    payoff = np.where(accepted, candidate, 1.0)
    return payoff, p_max
