"""Price and prediction laws, and the stochastic guarantee functionals.

For a prediction law ``G`` the quality of predictions at price ``p*`` is
``Lambda(p*) = E[E(p*, Y)^s]``; for a price law ``F`` the mirror quantity is
``Upsilon(y) = E[P* E(P*, y)^s] / E[P*]``. Both are computed in closed form by
splitting the integral at the conditioning point, so only partial power
moments ``int_{x <= c} x^a dG`` of each law are needed.
"""

from __future__ import annotations

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

from onemax.core import ProblemParams, multiplicative_error, worst_case_payoff
from onemax.errors import DomainError, UnsupportedExponentError
from onemax.guarantees import smoothness_exponent
from onemax.quadrature import gauss_legendre
from onemax.thresholds import ThresholdSpec, phi_rho

_MASS_TOL = 1e-12


def _power_integral(a: float, x0, x1):
    """``int_{x0}^{x1} x^a dx`` for ``0 < x0 <= x1``, stable as ``a -> -1``."""
    x0 = np.asarray(x0, dtype=float)
    x1 = np.asarray(x1, dtype=float)
    b = a + 1.0
    log_ratio = np.log(x1 / x0)
    if b == 0.0:
        return log_ratio
    return x0 ** b * np.expm1(b * log_ratio) / b


def _scalar(out):
    out = np.asarray(out)
    return float(out) if out.ndim == 0 else out


class Distribution(ABC):
    """A law on ``[1, theta]`` described through its partial power moments."""

    @abstractmethod
    def partial_moment(self, a: float, c):
        """``int_{x <= c} x^a dG``, vectorized over ``c``."""

    @abstractmethod
    def total_moment(self, a: float) -> float:
        ...

    @abstractmethod
    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        """Inverse-CDF draws: one uniform variate per sample."""

    @property
    @abstractmethod
    def support(self) -> tuple[float, float]:
        ...

    @property
    @abstractmethod
    def breakpoints(self) -> tuple[float, ...]:
        """Atoms and interval ends: where integrals against this law have kinks."""

    def upper_moment(self, a: float, c):
        """``int_{x > c} x^a dG``."""
        return _scalar(self.total_moment(a) - np.asarray(self.partial_moment(a, c)))

    def mean(self) -> float:
        return self.total_moment(1.0)

    def validate(self, params: ProblemParams) -> None:
        lo, hi = self.support
        if lo < 1.0 or hi > params.theta:
            raise DomainError(f"support [{lo}, {hi}] not inside [1, {params.theta}]")


@dataclass(frozen=True)
class Dirac(Distribution):
    point: float

    def __post_init__(self):
        if not (math.isfinite(self.point) and self.point >= 1.0):
            raise DomainError(f"Dirac point {self.point!r} must be >= 1")

    def partial_moment(self, a, c):
        c = np.asarray(c, dtype=float)
        return _scalar(np.where(self.point <= c, self.point ** a, 0.0))

    def total_moment(self, a):
        return self.point ** a

    def sample(self, rng, size):
        return np.full(size, self.point)

    @property
    def support(self):
        return self.point, self.point

    @property
    def breakpoints(self):
        return (self.point,)


@dataclass(frozen=True)
class UniformInterval(Distribution):
    lo: float
    hi: float

    def __post_init__(self):
        if not (math.isfinite(self.lo) and math.isfinite(self.hi)) or not (1.0 <= self.lo < self.hi):
            raise DomainError(f"need 1 <= lo < hi, got [{self.lo}, {self.hi}]")

    @classmethod
    def centered(cls, center: float, eps: float) -> "UniformInterval":
        return cls(center - eps, center + eps)

    @property
    def width(self) -> float:
        return self.hi - self.lo

    def partial_moment(self, a, c):
        c = np.clip(np.asarray(c, dtype=float), self.lo, self.hi)
        return _scalar(_power_integral(a, self.lo, c) / self.width)

    def total_moment(self, a):
        return float(_power_integral(a, self.lo, self.hi)) / self.width

    def sample(self, rng, size):
        return self.lo + self.width * rng.random(size)

    @property
    def support(self):
        return self.lo, self.hi

    @property
    def breakpoints(self):
        return self.lo, self.hi


@dataclass(frozen=True)
class UniformMixture(Distribution):
    """Finite mixture of uniforms on pairwise disjoint intervals, sorted by position."""

    weights: tuple[float, ...]
    intervals: tuple[UniformInterval, ...]

    def __post_init__(self):
        weights = tuple(float(w) for w in self.weights)
        intervals = tuple(iv if isinstance(iv, UniformInterval) else UniformInterval(*iv)
                          for iv in self.intervals)
        if not weights or len(weights) != len(intervals):
            raise DomainError("mixture needs one positive weight per interval")
        if any(w <= 0 for w in weights) or abs(sum(weights) - 1.0) > _MASS_TOL:
            raise DomainError("mixture weights must be positive and sum to 1")
        order = sorted(range(len(intervals)), key=lambda k: intervals[k].lo)
        weights = tuple(weights[k] for k in order)
        intervals = tuple(intervals[k] for k in order)
        for left, right in zip(intervals, intervals[1:]):
            if right.lo < left.hi:
                raise DomainError(f"intervals {left.support} and {right.support} overlap")
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "intervals", intervals)

    def partial_moment(self, a, c):
        return _scalar(sum(w * np.asarray(iv.partial_moment(a, c)) for w, iv in zip(self.weights, self.intervals)))

    def total_moment(self, a):
        return sum(w * iv.total_moment(a) for w, iv in zip(self.weights, self.intervals))

    def sample(self, rng, size):
        u = rng.random(size)
        cum = np.cumsum(self.weights)
        cum[-1] = 1.0
        k = np.minimum(np.searchsorted(cum, u, side="right"), len(cum) - 1)
        start = np.concatenate(([0.0], cum[:-1]))[k]
        within = (u - start) / np.asarray(self.weights)[k]
        lo = np.array([iv.lo for iv in self.intervals])[k]
        width = np.array([iv.width for iv in self.intervals])[k]
        return lo + width * np.clip(within, 0.0, 1.0)

    @property
    def support(self):
        return self.intervals[0].lo, self.intervals[-1].hi

    @property
    def breakpoints(self):
        return tuple(x for iv in self.intervals for x in iv.support)


@dataclass(frozen=True, eq=False)
class Empirical(Distribution):
    """Weighted atoms; uniform weights when none are given. Stored sorted."""

    samples: np.ndarray
    weights: Optional[np.ndarray] = None
    _cum: dict = field(default_factory=dict, init=False, repr=False)

    def __post_init__(self):
        x = np.asarray(self.samples, dtype=float).ravel()
        if x.size == 0 or np.any(~np.isfinite(x)) or np.any(x < 1.0):
            raise DomainError("empirical samples must be finite, nonempty and >= 1")
        if self.weights is None:
            w = np.full(x.size, 1.0 / x.size)
        else:
            w = np.asarray(self.weights, dtype=float).ravel()
            if w.shape != x.shape or np.any(w < 0) or abs(w.sum() - 1.0) > 1e-9:
                raise DomainError("empirical weights must be nonnegative, match samples and sum to 1")
        order = np.argsort(x, kind="stable")
        x, w = x[order], w[order]
        x.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "samples", x)
        object.__setattr__(self, "weights", w)

    def _cumulative(self, a):
        if a not in self._cum:
            self._cum[a] = np.concatenate(([0.0], np.cumsum(self.weights * self.samples ** a)))
        return self._cum[a]

    def partial_moment(self, a, c):
        idx = np.searchsorted(self.samples, np.asarray(c, dtype=float), side="right")
        return _scalar(self._cumulative(a)[idx])

    def total_moment(self, a):
        return float(self._cumulative(a)[-1])

    def sample(self, rng, size):
        cum = np.cumsum(self.weights)
        idx = np.searchsorted(cum, rng.random(size) * cum[-1], side="right")
        return self.samples[np.minimum(idx, self.samples.size - 1)]

    @property
    def support(self):
        return float(self.samples[0]), float(self.samples[-1])

    @property
    def breakpoints(self):
        return tuple(np.unique(self.samples).tolist())


DistributionSpec = Union[Dirac, UniformInterval, UniformMixture, Empirical]


def _check_s(s: float) -> float:
    if not (s >= 1.0) or math.isnan(s):
        raise DomainError(f"exponent s={s!r} must be >= 1")
    return float(s)


def lambda_functional(G: Distribution, p_star, s: float):
    """``Lambda(p*) = E_{Y~G}[E(p*, Y)^s]``, vectorized over ``p_star``."""
    s = _check_s(s)
    p = np.asarray(p_star, dtype=float)
    if np.any(p < 1.0):
        raise DomainError("p_star must be >= 1")
    below = p ** -s * np.asarray(G.partial_moment(s, p))
    above = p ** s * np.asarray(G.upper_moment(-s, p))
    return _scalar(below + above)


def upsilon_functional(F: Distribution, y, s: float):
    """``Upsilon(y) = E_{P~F}[P E(P, y)^s] / E[P]``, vectorized over ``y``."""
    s = _check_s(s)
    y = np.asarray(y, dtype=float)
    if np.any(y < 1.0):
        raise DomainError("y must be >= 1")
    below = y ** -s * np.asarray(F.partial_moment(1.0 + s, y))
    above = y ** s * np.asarray(F.upper_moment(1.0 - s, y))
    return _scalar((below + above) / F.mean())


def uniform_expansion_constant(s: float, params: ProblemParams) -> float:
    """Constant ``C`` of the second-order term for a centred uniform prediction."""
    theta = params.theta
    c1 = s * (s - 1.0) / 6.0 * theta ** min(0.0, 2.0 - s)
    c2 = s * (1.0 + s) / 6.0
    return 0.5 * (c1 * theta ** -s + c2)


def lambda_uniform_lower_bound(p_star: float, eps: float, s: float, params: ProblemParams) -> float:
    """Lower bound ``1 - s eps / (2 p*) - C eps^2`` on ``Lambda`` for ``Y ~ U[p* - eps, p* + eps]``."""
    s = _check_s(s)
    p_star = params.check_price(p_star, "p_star")
    if not (0.0 < eps <= min(params.theta - p_star, p_star - 1.0) + 1e-12):
        raise DomainError(f"eps={eps!r} must lie in (0, min(theta - p*, p* - 1)]")
    return 1.0 - s * eps / (2.0 * p_star) - uniform_expansion_constant(s, params) * eps ** 2


def lambda_multiplicative_uniform_lower_bound(p_star: float, eps_rel: float, s: float,
                                              params: ProblemParams) -> float:
    """Same bound for ``Y ~ U[p*(1 - eps'), p*(1 + eps')]``, i.e. ``eps = eps' p*``."""
    return lambda_uniform_lower_bound(p_star, eps_rel * p_star, s, params)


@dataclass(frozen=True)
class MixtureBound:
    """Guaranteed part of the mixture bound and its dropped second-order residual.

    ``bound`` is a valid lower bound on ``Lambda`` by itself; ``residual`` is
    ``C * sum_k w_k eps_k^2``, the size of the second-order correction.
    """

    bound: float
    residual: float


def lambda_mixture_lower_bound(mix: UniformMixture, p_star: float, s: float,
                               params: ProblemParams) -> MixtureBound:
    """First-order lower bound on ``Lambda`` for a mixture of uniform predictions.

    The interval containing ``p*`` contributes ``w (1 - s E|Y - p*| / p*)``, the
    tangent-line bound of ``E^s``; with ``p*`` at the centre this is
    ``w (1 - s eps / (2 p*))``. Every other interval contributes
    ``w E(p*, mu)^s`` at its midpoint ``mu``, which Jensen's inequality makes a
    lower bound since ``E(p*, .)^s`` is convex on each side of ``p*``.
    """
    s = _check_s(s)
    mix.validate(params)
    p_star = params.check_price(p_star, "p_star")
    bound = 0.0
    weighted_sq = 0.0
    for w, iv in zip(mix.weights, mix.intervals):
        eps = 0.5 * iv.width
        weighted_sq += w * eps ** 2
        if iv.lo <= p_star <= iv.hi:
            mean_abs = ((p_star - iv.lo) ** 2 + (iv.hi - p_star) ** 2) / (2.0 * iv.width)
            bound += w * (1.0 - s * mean_abs / p_star)
        else:
            mid = 0.5 * (iv.lo + iv.hi)
            bound += w * multiplicative_error(p_star, mid) ** s
    return MixtureBound(bound, uniform_expansion_constant(s, params) * weighted_sq)


# ---------------------------------------------------------------- couplings


@dataclass(frozen=True)
class Independent:
    F: Distribution
    G: Distribution


@dataclass(frozen=True, eq=False)
class PairedSamples:
    """Empirical coupling: equally (or explicitly) weighted ``(p*, y)`` pairs."""

    prices: np.ndarray
    predictions: np.ndarray
    weights: Optional[np.ndarray] = None

    def __post_init__(self):
        p = np.asarray(self.prices, dtype=float).ravel()
        y = np.asarray(self.predictions, dtype=float).ravel()
        if p.size == 0 or p.shape != y.shape:
            raise DomainError("paired samples need equal, nonzero lengths")
        if np.any(p < 1.0) or np.any(y < 1.0):
            raise DomainError("paired samples must be >= 1")
        w = np.full(p.size, 1.0 / p.size) if self.weights is None else np.asarray(self.weights, dtype=float).ravel()
        if w.shape != p.shape or np.any(w < 0) or abs(w.sum() - 1.0) > 1e-9:
            raise DomainError("pair weights must be nonnegative and sum to 1")
        object.__setattr__(self, "prices", p)
        object.__setattr__(self, "predictions", y)
        object.__setattr__(self, "weights", w)


@dataclass(frozen=True, eq=False)
class DiscreteMatrix:
    """Joint weights over a price grid (rows) and a prediction grid (columns)."""

    f_atoms: np.ndarray
    f_weights: np.ndarray
    g_atoms: np.ndarray
    g_weights: np.ndarray
    joint: np.ndarray

    def __post_init__(self):
        arrays = {name: np.asarray(getattr(self, name), dtype=float)
                  for name in ("f_atoms", "f_weights", "g_atoms", "g_weights", "joint")}
        joint = arrays["joint"]
        if joint.shape != (arrays["f_atoms"].size, arrays["g_atoms"].size):
            raise DomainError("joint matrix shape must be (len(f_atoms), len(g_atoms))")
        if np.any(joint < 0) or abs(joint.sum() - 1.0) > 1e-9:
            raise DomainError("joint weights must be nonnegative and sum to 1")
        if (np.max(np.abs(joint.sum(axis=1) - arrays["f_weights"])) > 1e-9
                or np.max(np.abs(joint.sum(axis=0) - arrays["g_weights"])) > 1e-9):
            raise DomainError("joint marginals disagree with declared weights")
        if np.any(arrays["f_atoms"] < 1.0) or np.any(arrays["g_atoms"] < 1.0):
            raise DomainError("atoms must be >= 1")
        for name, arr in arrays.items():
            object.__setattr__(self, name, arr)

    def pairs(self) -> PairedSamples:
        p, y = np.meshgrid(self.f_atoms, self.g_atoms, indexing="ij")
        return PairedSamples(p.ravel(), y.ravel(), self.joint.ravel() / self.joint.sum())


CouplingSpec = Union[Independent, PairedSamples, DiscreteMatrix]


def _integrate_against(dist: Distribution, func, extra_breaks: Sequence[float]) -> float:
    """``int func dDist`` for a vectorized ``func`` that is smooth between ``extra_breaks``."""
    if isinstance(dist, Dirac):
        return float(func(np.array([dist.point]))[0])
    if isinstance(dist, Empirical):
        return float(np.dot(dist.weights, func(dist.samples)))
    if isinstance(dist, UniformInterval):
        return gauss_legendre(func, dist.lo, dist.hi, extra_breaks) / dist.width
    if isinstance(dist, UniformMixture):
        return sum(w * _integrate_against(iv, func, extra_breaks)
                   for w, iv in zip(dist.weights, dist.intervals))
    raise DomainError(f"unsupported distribution {type(dist).__name__}")


def coupling_fraction(coupling: CouplingSpec, s: float, method: str = "lambda") -> float:
    """``E[P* E(P*, Y)^s] / E[P*]`` under ``coupling``.

    For independent marginals ``method="lambda"`` integrates ``p Lambda_G(p)``
    against ``F`` and ``method="upsilon"`` integrates ``Upsilon_F`` against ``G``;
    both are exact on discrete laws and use Gauss-Legendre on uniform pieces.
    """
    s = _check_s(s)
    if isinstance(coupling, DiscreteMatrix):
        coupling = coupling.pairs()
    if isinstance(coupling, PairedSamples):
        p, y, w = coupling.prices, coupling.predictions, coupling.weights
        return float(np.dot(w, p * multiplicative_error(p, y) ** s) / np.dot(w, p))
    if not isinstance(coupling, Independent):
        raise DomainError(f"unsupported coupling {type(coupling).__name__}")
    F, G = coupling.F, coupling.G
    if method == "lambda":
        value = _integrate_against(F, lambda p: p * lambda_functional(G, p, s), G.breakpoints)
        return value / F.mean()
    if method == "upsilon":
        return _integrate_against(G, lambda y: upsilon_functional(F, y, s), F.breakpoints)
    raise DomainError(f"unknown method {method!r}")


def expected_ratio_bound(coupling: CouplingSpec, spec: ThresholdSpec) -> float:
    """``max(r, coupling_fraction / (r theta))`` with the exponent of ``A^1_r``."""
    s = smoothness_exponent(spec.with_rho(1.0))
    return max(spec.r, coupling_fraction(coupling, s) * spec.consistency)


def independent_uniform_closed_form(c1: float, c2: float, s: float, params: ProblemParams,
                                    form: str = "corrected") -> float:
    """Normalized fraction ``E[P* E^s]/E[P*]`` for ``F = G = U[c1, c2]`` (without ``1/(r theta)``).

    With ``zeta(g) = (c2^g - c1^g)/g``, the corrected form is
    ``(A + B) / (zeta(1) zeta(2))`` where
    ``A = (zeta(3) - c1^(1+s) zeta(2-s)) / (1+s)`` and
    ``B = (c2^(1-s) zeta(2+s) - zeta(3)) / (1-s)``.
    ``form="as_printed"`` is the older bracketed expression with prefactor
    ``2/zeta(1)^3``. It disagrees with quadrature and is kept only for comparison.
    """
    if not (1.0 <= c1 < c2 <= params.theta):
        raise DomainError(f"need 1 <= c1 < c2 <= theta, got [{c1}, {c2}]")
    s = _check_s(s)
    if s in (1.0, 2.0):
        raise UnsupportedExponentError(f"s={s} is singular for the closed form; use coupling_fraction")

    def zeta(g):
        return (c2 ** g - c1 ** g) / g

    if form == "corrected":
        a = (zeta(3) - c1 ** (1 + s) * zeta(2 - s)) / (1 + s)
        b = (c2 ** (1 - s) * zeta(2 + s) - zeta(3)) / (1 - s)
        return (a + b) / (zeta(1) * zeta(2))
    if form == "as_printed":
        bracket = (zeta(2 - s) * zeta(1 - s) - c1 ** (2 - s) * zeta(1 + s) / (2 - s)
                   + zeta(2 + s) * zeta(1 + s) - c2 ** (2 + s) * zeta(1 - s) / (2 + s)
                   - zeta(3) * (1 / (2 - s) - 1 / (2 + s)))
        return 2.0 / zeta(1) ** 3 * bracket
    raise DomainError(f"unknown form {form!r}")


# ---------------------------------------------------------------- Monte Carlo


def _mean_se(values: np.ndarray) -> tuple[float, float]:
    n = values.size
    se = float(values.std(ddof=1) / math.sqrt(n)) if n > 1 else math.inf
    return float(values.mean()), se


def monte_carlo_lambda(G: Distribution, p_star: float, s: float, n: int,
                       rng: np.random.Generator) -> tuple[float, float]:
    """Sample mean and standard error of ``E(p*, Y)^s`` with ``Y ~ G``."""
    y = G.sample(rng, n)
    return _mean_se(multiplicative_error(p_star, y) ** _check_s(s))


def monte_carlo_upsilon(F: Distribution, y: float, s: float, n: int,
                        rng: np.random.Generator) -> tuple[float, float]:
    """Sample mean and standard error of ``P E(P, y)^s / E[P]`` with ``P ~ F``."""
    p = F.sample(rng, n)
    return _mean_se(p * multiplicative_error(p, y) ** _check_s(s) / F.mean())


def expected_payoff_ratio(coupling: Union[PairedSamples, DiscreteMatrix], spec: ThresholdSpec,
                          n: int) -> float:
    """Exact ``E[A^1_r(I_n(P*), Y)] / E[max I_n(P*)]`` over a discrete coupling."""
    if isinstance(coupling, DiscreteMatrix):
        coupling = coupling.pairs()
    spec1 = spec.with_rho(1.0)
    params = spec.params
    p, y, w = coupling.prices, coupling.predictions, coupling.weights
    if np.any(p > params.theta) or np.any(y > params.theta):
        raise DomainError(f"coupling support exceeds theta={params.theta}")
    payoff, p_max = worst_case_payoff(params, n, p, phi_rho(spec1, y))
    return float(np.dot(w, payoff) / np.dot(w, p_max))
