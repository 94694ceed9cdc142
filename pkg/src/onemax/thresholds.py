"""The interpolating threshold family and its Pareto-optimality certificate."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from onemax.core import ProblemParams
from onemax.errors import DomainError

# slack when validating r against its admissible range; lambda_to_r rounds
_RANGE_RTOL = 1e-12


@dataclass(frozen=True)
class ThresholdSpec:
    """One member of the family: robustness target ``r`` and interpolation ``rho``.

    ``r`` ranges over ``[1/theta, 1/sqrt(theta)]``; consistency is ``1/(r theta)``.
    ``rho = 0`` is the brittle Pareto-optimal threshold with a jump at ``1/r``;
    ``rho = 1`` is the continuous ``max(r theta, varphi_r)``.
    """

    r: float
    rho: float
    params: ProblemParams

    def __post_init__(self):
        theta = self.params.theta
        lo, hi = 1.0 / theta, theta ** -0.5
        if not (lo * (1 - _RANGE_RTOL) <= self.r <= hi * (1 + _RANGE_RTOL)):
            raise DomainError(f"r={self.r!r} outside [{lo}, {hi}] for theta={theta}")
        if not (0.0 <= self.rho <= 1.0):
            raise DomainError(f"rho={self.rho!r} outside [0, 1]")

    @classmethod
    def from_lambda(cls, lam: float, rho: float, params: ProblemParams) -> "ThresholdSpec":
        return cls(lambda_to_r(lam, params), rho, params)

    @property
    def theta(self) -> float:
        return self.params.theta

    @property
    def r_theta(self) -> float:
        return self.r * self.params.theta

    @property
    def consistency(self) -> float:
        return 1.0 / (self.r * self.params.theta)

    @property
    def slope(self) -> float:
        """Slope of the line through ``(r theta, r theta)`` and ``(theta, 1/r)``."""
        r, theta = self.r, self.params.theta
        return (1.0 - r * r * theta) / ((1.0 - r) * r * theta)

    @property
    def ramp_end(self) -> float:
        """Right end of the ramp piece, ``1/r + rho (theta - 1/r)``."""
        inv_r = 1.0 / self.r
        return inv_r + self.rho * (self.params.theta - inv_r)

    def with_rho(self, rho: float) -> "ThresholdSpec":
        return ThresholdSpec(self.r, rho, self.params)


def lambda_to_r(lam: float, params: ProblemParams) -> float:
    """Trust parametrization ``r = theta^-(1 - lam/2)``; lam = 1 trusts the prediction most."""
    if not (0.0 <= lam <= 1.0):
        raise DomainError(f"lambda={lam!r} outside [0, 1]")
    return params.theta ** -(1.0 - lam / 2.0)


def varphi(spec: ThresholdSpec, z):
    """The line ``varphi_r`` through ``(r theta, r theta)`` and ``(theta, 1/r)``."""
    r, theta = spec.r, spec.theta
    if r >= 1.0:
        raise DomainError("varphi needs r < 1")
    z = np.asarray(z, dtype=float)
    rt = r * theta
    out = (rt - 1.0) / (1.0 - r) + (1.0 - r * rt) / (1.0 - r) * z / rt
    return float(out) if out.ndim == 0 else out


def phi_rho(spec: ThresholdSpec, y):
    """Threshold ``Phi^rho_r(y)``, elementwise over ``y`` in ``[1, theta]``.

    Pieces are left-closed/right-open: flat at ``r theta`` below ``r theta``,
    the line ``varphi_r`` up to ``1/r``, a ramp of slope ``slope/rho`` from
    ``varphi_r(1/r)`` up to ``1/r`` (empty when ``rho = 0``), then flat at ``1/r``.
    """
    y = np.asarray(y, dtype=float)
    theta = spec.theta
    if np.any(np.isnan(y)) or np.any(y < 1.0) or np.any(y > theta):
        raise DomainError(f"prediction outside [1, {theta}]")
    rt, inv_r = spec.r_theta, 1.0 / spec.r
    out = np.where(y < rt, rt, varphi(spec, y))
    out = np.where(y >= inv_r, inv_r, out)
    if spec.rho > 0.0:
        on_ramp = (y >= inv_r) & (y < spec.ramp_end)
        # divide only on-ramp offsets, which are below rho (theta - 1/r), so tiny rho cannot overflow
        ramp = varphi(spec, inv_r) + spec.slope * (np.where(on_ramp, y - inv_r, 0.0) / spec.rho)
        out = np.where(on_ramp, ramp, out)
    # exact arithmetic keeps the value in [r theta, 1/r] and below y once y >= r theta;
    # clamp so rounding cannot break a tie between the threshold and a price.
    out = np.clip(out, rt, inv_r)
    out = np.where(y >= rt, np.minimum(out, y), out)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class ParetoCheck:
    ok: bool
    z: Optional[float] = None
    constraint: Optional[str] = None
    value: Optional[float] = None

    def __bool__(self) -> bool:
        return self.ok


# checked in this order at each grid point
CONSTRAINTS = ("robust_lower", "robust_upper", "consistent_lower", "consistent_upper")


def is_pareto_optimal_threshold(z, values, spec: ThresholdSpec, tol: float = 1e-9) -> ParetoCheck:
    """Certify on a sampled grid that a threshold achieves ``(r, 1/(r theta))``.

    Checks ``r theta <= Phi(z) <= 1/r`` everywhere and ``z/(r theta) <= Phi(z) <= z``
    for ``z >= r theta``. Returns the first failing grid point and constraint.
    """
    z = np.asarray(z, dtype=float)
    values = np.asarray(values, dtype=float)
    if z.ndim != 1 or z.size == 0:
        raise DomainError("empty grid")
    if z.shape != values.shape:
        raise DomainError("grid and values must have the same shape")
    if z.size < 2:
        raise DomainError("grid needs at least two points")
    if tol < 0:
        raise DomainError("tol must be nonnegative")
    theta = spec.theta
    if z.min() > 1.0 + 1e-9 or z.max() < theta - 1e-9 or z.min() < 1.0 - 1e-9 or z.max() > theta + 1e-9:
        raise DomainError(f"grid must cover [1, {theta}]")

    order = np.argsort(z, kind="stable")
    z, values = z[order], values[order]
    rt, inv_r = spec.r_theta, 1.0 / spec.r
    upper_zone = z >= rt
    masks = (
        values < rt - tol,
        values > inv_r + tol,
        upper_zone & (values < z / rt - tol),
        upper_zone & (values > z + tol),
    )
    bad = np.logical_or.reduce(masks)
    if not bad.any():
        return ParetoCheck(True)
    i = int(np.argmax(bad))
    name = next(c for c, m in zip(CONSTRAINTS, masks) if m[i])
    return ParetoCheck(False, float(z[i]), name, float(values[i]))
