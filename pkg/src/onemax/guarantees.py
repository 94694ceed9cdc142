"""Closed-form guarantees of the threshold family and empirical checks against them.

The multiplicative guarantee of ``A^rho_r`` is ``max(r, E^s / (r theta))`` with
smoothness exponent ``s``; the additive guarantee of ``A^1_r`` is
``max(r, 1/(r theta) - beta* eta / p*)``. The sweeps here run the algorithm on
the worst-case instances ``I_n(q)`` and report the smallest margin by which the
realized ratio beats the bound.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from onemax.core import ProblemParams, multiplicative_error, worst_case_payoff
from onemax.errors import DomainError
from onemax.thresholds import ThresholdSpec, phi_rho

_LOG_RT_EPS = 1e-12


def _log_ratio(spec: ThresholdSpec) -> float:
    rt = spec.r_theta
    if rt <= 1.0 + _LOG_RT_EPS:
        raise DomainError(f"r*theta={rt!r} must exceed 1 (r > 1/theta)")
    return math.log(spec.theta) / math.log(rt)


def lower_bound_exponent(spec: ThresholdSpec) -> float:
    """Smallest exponent any Pareto-optimal algorithm can certify: ``ln theta / ln(r theta) - 2``."""
    return _log_ratio(spec) - 2.0


def smoothness_exponent(spec: ThresholdSpec) -> float:
    """Exponent ``s_rho = max(1, k / rho)`` with ``k = ln theta / ln(r theta) - 2``.

    ``rho = 0`` gives ``math.inf`` whenever ``k > 0``: the bound collapses from
    consistency to robustness under any error.
    """
    k = lower_bound_exponent(spec)
    if spec.rho == 0.0:
        return math.inf if k > 0.0 else 1.0
    return max(1.0, k / spec.rho)


def additive_beta_star(spec: ThresholdSpec) -> float:
    """Optimal additive smoothness slope ``(1 - r^2 theta)/(r theta) * max(1/(1-r), 1/(r theta - 1))``."""
    r, rt = spec.r, spec.r_theta
    if r >= 1.0 or rt <= 1.0 + _LOG_RT_EPS:
        raise DomainError("beta* needs r < 1 and r*theta > 1")
    return max(0.0, (1.0 - r * rt) / rt) * max(1.0 / (1.0 - r), 1.0 / (rt - 1.0))


@dataclass(frozen=True)
class GuaranteeParams:
    spec: ThresholdSpec
    s_rho: float
    beta_star: float

    @classmethod
    def from_spec(cls, spec: ThresholdSpec) -> "GuaranteeParams":
        return cls(spec, smoothness_exponent(spec), additive_beta_star(spec))

    @property
    def r(self) -> float:
        return self.spec.r

    @property
    def consistency(self) -> float:
        return self.spec.consistency


def multiplicative_bound(gp: GuaranteeParams, err):
    """``max(r, err^s / (r theta))`` for multiplicative error ``err`` in ``[1/theta, 1]``."""
    err = np.asarray(err, dtype=float)
    theta = gp.spec.theta
    if np.any(err < 1.0 / theta - 1e-12) or np.any(err > 1.0 + 1e-12):
        raise DomainError(f"multiplicative error outside [1/{theta}, 1]")
    err = np.clip(err, 1.0 / theta, 1.0)
    if math.isinf(gp.s_rho):
        smooth = np.where(err >= 1.0, 1.0, 0.0)
    else:
        smooth = err ** gp.s_rho
    out = np.maximum(gp.r, smooth * gp.consistency)
    return float(out) if out.ndim == 0 else out


def additive_bound(gp: GuaranteeParams, eta, p_star):
    p_star = np.asarray(p_star, dtype=float)
    eta = np.asarray(eta, dtype=float)
    if np.any(p_star < 1.0) or np.any(p_star > gp.spec.theta):
        raise DomainError("p_star outside [1, theta]")
    if np.any(eta < 0):
        raise DomainError("eta must be nonnegative")
    out = np.maximum(gp.r, gp.consistency - gp.beta_star * eta / p_star)
    return float(out) if out.ndim == 0 else out


def brittleness_witness(spec: ThresholdSpec, delta: float, n: int) -> tuple[float, float]:
    """Ratios of ``A^0_r`` and ``A^1_r`` when ``p* = 1/r - delta`` and ``y = 1/r + delta``.

    The prediction is almost perfect, yet the jump of the ``rho = 0`` threshold
    at ``1/r`` sits above ``p*``, so that algorithm takes the default payoff 1.
    """
    inv_r = 1.0 / spec.r
    p_star, y = inv_r - delta, inv_r + delta
    if delta <= 0 or p_star <= spec.r_theta or y > spec.theta:
        raise DomainError(f"delta={delta!r} needs 1/r - delta > r*theta and 1/r + delta <= theta")
    ratios = []
    for rho in (0.0, 1.0):
        threshold = phi_rho(spec.with_rho(rho), y)
        payoff, p_max = worst_case_payoff(spec.params, n, p_star, threshold)
        ratios.append(float(payoff / p_max))
    return ratios[0], ratios[1]


@dataclass(frozen=True)
class SlackReport:
    """Smallest ``ratio - bound + step`` over a (q, y) grid and where it occurs."""

    min_slack: float
    q: float
    y: float
    ratio: float
    bound: float
    step: float

    @property
    def ok(self) -> bool:
        return self.min_slack >= -1e-9


def _sweep(spec: ThresholdSpec, n: int, grid_q: int, grid_y: int):
    if n < 2:
        raise DomainError("n must be >= 2")
    theta = spec.theta
    q = np.linspace(1.0, theta, grid_q)[:, None]
    y = np.linspace(1.0, theta, grid_y)[None, :]
    payoff, p_max = worst_case_payoff(spec.params, n, q, phi_rho(spec, y))
    y = np.broadcast_to(y, payoff.shape)
    return np.broadcast_to(q, payoff.shape), y, payoff / p_max, p_max


def _report(q, y, ratio, bound, step) -> SlackReport:
    slack = ratio - bound + step
    i = np.unravel_index(int(np.argmin(slack)), slack.shape)
    return SlackReport(float(slack[i]), float(q[i]), float(y[i]), float(ratio[i]), float(bound[i]), step)


def verify_multiplicative_bound(spec: ThresholdSpec, n: int, grid_q: int, grid_y: int) -> SlackReport:
    gp = GuaranteeParams(spec, smoothness_exponent(spec), math.nan)
    q, y, ratio, p_max = _sweep(spec, n, grid_q, grid_y)
    bound = multiplicative_bound(gp, multiplicative_error(p_max, y))
    return _report(q, y, ratio, bound, (spec.theta - 1.0) / (n - 1))


def verify_additive_bound(spec: ThresholdSpec, n: int, grid_q: int, grid_y: int) -> SlackReport:
    """Additive analogue; the guarantee is stated for ``rho = 1`` only."""
    gp = GuaranteeParams(spec, math.nan, additive_beta_star(spec))
    q, y, ratio, p_max = _sweep(spec, n, grid_q, grid_y)
    bound = additive_bound(gp, np.abs(p_max - y), p_max)
    return _report(q, y, ratio, bound, (spec.theta - 1.0) / (n - 1))


def additive_slope_witnesses(spec: ThresholdSpec, eps: float, n: int) -> tuple[float, float]:
    """Realized additive slopes of ``A^1_r`` on the two extremal constructions.

    First: ``y = theta`` with ``q = (1/r)/(1 + eps)`` just below the threshold.
    Second: ``y = r theta`` with ``q = theta``. The slope is
    ``(1/(r theta) - ratio) / (eta / p*)``; both tend to the one-sided lower
    bounds on beta whose maximum is ``beta*``.
    """
    spec1 = spec.with_rho(1.0)
    theta = spec.theta
    slopes = []
    for y, q in ((theta, (1.0 / spec.r) / (1.0 + eps)), (spec.r_theta, theta)):
        payoff, p_max = worst_case_payoff(spec.params, n, q, phi_rho(spec1, y))
        p_max = float(p_max)
        ratio = float(payoff) / p_max
        slopes.append((spec.consistency - ratio) * p_max / abs(p_max - y))
    return slopes[0], slopes[1]


def beta_one_sided_bounds(spec: ThresholdSpec) -> tuple[float, float]:
    """The two limits of :func:`additive_slope_witnesses`."""
    r, rt = spec.r, spec.r_theta
    gap = 1.0 - r * rt
    return gap / (rt * (rt - 1.0)), gap / (rt * (1.0 - r))


def prior_randomized_bounds(rho: float, r: float, params: ProblemParams,
                            variant: str = "as_printed") -> tuple[float, float]:
    """Consistency and maximal robustness of the earlier randomized smooth family.

    ``variant="as_printed"`` uses ``|1 - e^rho| / rho``; ``"exp_neg"`` uses
    ``(1 - e^-rho) / rho``. Returns ``(consistency, max_robustness)``.
    """
    if not (0.0 < rho <= 1.0):
        raise DomainError(f"rho={rho!r} outside (0, 1]")
    if variant == "as_printed":
        factor = abs(1.0 - math.exp(rho)) / rho
    elif variant == "exp_neg":
        factor = (1.0 - math.exp(-rho)) / rho
    else:
        raise DomainError(f"unknown variant {variant!r}")
    theta = params.theta
    return factor ** 2 / (r * theta), factor * theta ** -0.5
