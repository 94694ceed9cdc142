"""Discrete optimal transport between price and prediction marginals.

Every transport problem here is a small bipartite linear program, solved
exactly with the HiGHS simplex through :func:`scipy.optimize.linprog`. The
dual is solved as its own LP so strong duality can be checked rather than
assumed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np
from scipy import sparse
from scipy.optimize import linprog

from onemax.core import ProblemParams
from onemax.errors import DomainError
from onemax.guarantees import smoothness_exponent
from onemax.stochastic import Dirac, Distribution, Empirical, UniformInterval, UniformMixture
from onemax.thresholds import ThresholdSpec

_MASS_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class DiscreteMarginal:
    """Atoms at strictly increasing locations with positive weights summing to 1."""

    atoms: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.atoms, dtype=float).ravel()
        w = np.asarray(self.weights, dtype=float).ravel()
        if x.size == 0 or x.shape != w.shape:
            raise DomainError("a marginal needs matching, nonempty atoms and weights")
        if np.any(~np.isfinite(x)) or np.any(x < 1.0):
            raise DomainError("atom locations must be finite and >= 1")
        if np.any(np.diff(x) <= 0):
            raise DomainError("atom locations must be strictly increasing")
        if np.any(w <= 0) or abs(w.sum() - 1.0) > _MASS_TOL:
            raise DomainError("weights must be positive with total mass 1")
        x.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "atoms", x)
        object.__setattr__(self, "weights", w)

    @classmethod
    def from_samples(cls, samples, weights=None) -> "DiscreteMarginal":
        """Merge duplicate locations and renormalize."""
        x = np.asarray(samples, dtype=float).ravel()
        w = np.full(x.size, 1.0) if weights is None else np.asarray(weights, dtype=float).ravel()
        atoms, inverse = np.unique(x, return_inverse=True)
        merged = np.bincount(inverse, weights=w)
        keep = merged > 0
        return cls(atoms[keep], merged[keep] / merged[keep].sum())

    @classmethod
    def discretize(cls, dist: Distribution, atoms: int) -> "DiscreteMarginal":
        """Midpoint discretization of uniform pieces; discrete laws are copied."""
        if isinstance(dist, Dirac):
            return cls([dist.point], [1.0])
        if isinstance(dist, Empirical):
            return cls.from_samples(dist.samples, dist.weights)
        if isinstance(dist, UniformInterval):
            dist = UniformMixture((1.0,), (dist,))
        if isinstance(dist, UniformMixture):
            if atoms < len(dist.intervals):
                raise DomainError("need at least one atom per mixture component")
            locs, wts = [], []
            for w, iv in zip(dist.weights, dist.intervals):
                k = max(1, round(atoms * w))
                edges = np.linspace(iv.lo, iv.hi, k + 1)
                locs.append(0.5 * (edges[:-1] + edges[1:]))
                wts.append(np.full(k, w / k))
            return cls.from_samples(np.concatenate(locs), np.concatenate(wts))
        raise DomainError(f"cannot discretize {type(dist).__name__}")

    @property
    def size(self) -> int:
        return self.atoms.size

    def mean(self) -> float:
        return float(np.dot(self.atoms, self.weights))

    def as_distribution(self) -> Empirical:
        return Empirical(self.atoms, self.weights)

    def validate(self, params: ProblemParams) -> None:
        if self.atoms[-1] > params.theta:
            raise DomainError(f"atoms exceed theta={params.theta}")


@dataclass(frozen=True, eq=False)
class TransportPlan:
    joint: np.ndarray
    objective: float

    def marginal_error(self, F: DiscreteMarginal, G: DiscreteMarginal) -> float:
        rows = np.abs(self.joint.sum(axis=1) - F.weights).max()
        cols = np.abs(self.joint.sum(axis=0) - G.weights).max()
        return float(max(rows, cols))


def cost_multiplicative(p, y, s: float):
    """``c(p, y) = p min(p/y, y/p)^s``."""
    p = np.asarray(p, dtype=float)
    y = np.asarray(y, dtype=float)
    out = p * np.minimum(p / y, y / p) ** s
    return float(out) if out.ndim == 0 else out


def cost_additive(p, y):
    """``p |p - y|``, the additive analogue weighted by the price."""
    p = np.asarray(p, dtype=float)
    out = p * np.abs(p - np.asarray(y, dtype=float))
    return float(out) if out.ndim == 0 else out


def _marginal_constraints(m: int, n: int):
    rows = sparse.kron(sparse.eye(m), np.ones((1, n)))
    cols = sparse.kron(np.ones((1, m)), sparse.eye(n))
    return sparse.vstack([rows, cols]).tocsr()


def _check_masses(F: DiscreteMarginal, G: DiscreteMarginal):
    if abs(F.weights.sum() - G.weights.sum()) > 1e-9:
        raise DomainError("marginals carry different total mass")


def solve_transport(cost: np.ndarray, F: DiscreteMarginal, G: DiscreteMarginal,
                    maximize: bool = False) -> TransportPlan:
    """Exact optimal plan for an arbitrary cost matrix (rows F, columns G)."""
    _check_masses(F, G)
    cost = np.asarray(cost, dtype=float)
    m, n = F.size, G.size
    if cost.shape != (m, n):
        raise DomainError(f"cost matrix must be {m}x{n}")
    sign = -1.0 if maximize else 1.0
    res = linprog(sign * cost.ravel(), A_eq=_marginal_constraints(m, n),
                  b_eq=np.concatenate([F.weights, G.weights]), bounds=(0, None), method="highs")
    if res.status != 0:
        raise DomainError(f"transport LP failed: {res.message}")
    joint = np.maximum(res.x.reshape(m, n), 0.0)
    return TransportPlan(joint, float(np.sum(joint * cost)))


def transport_dual(cost: np.ndarray, F: DiscreteMarginal, G: DiscreteMarginal):
    """Maximize ``sum f_i u_i + sum g_j v_j`` subject to ``u_i + v_j <= c_ij``.

    Returns ``(u, v, value)``.
    """
    _check_masses(F, G)
    cost = np.asarray(cost, dtype=float)
    m, n = F.size, G.size
    res = linprog(-np.concatenate([F.weights, G.weights]), A_ub=_marginal_constraints(m, n).T.tocsr(),
                  b_ub=cost.ravel(), bounds=(None, None), method="highs")
    if res.status != 0:
        raise DomainError(f"dual LP failed: {res.message}")
    return res.x[:m], res.x[m:], float(-res.fun)


def min_cost_coupling(F: DiscreteMarginal, G: DiscreteMarginal, s: float) -> TransportPlan:
    """Coupling of ``F`` and ``G`` minimizing ``E[P E(P, Y)^s]``."""
    return solve_transport(cost_multiplicative(F.atoms[:, None], G.atoms[None, :], s), F, G)


def ot_ratio_bound(F: DiscreteMarginal, G: DiscreteMarginal, spec: ThresholdSpec) -> float:
    """Coupling-free bound ``max(r, min-cost / (r theta E[P*]))`` for ``A^1_r``."""
    F.validate(spec.params)
    G.validate(spec.params)
    s = smoothness_exponent(spec.with_rho(1.0))
    fraction = min_cost_coupling(F, G, s).objective / F.mean()
    return max(spec.r, spec.consistency * fraction)


def _as_distribution(F: Union[Distribution, DiscreteMarginal]) -> Distribution:
    return F.as_distribution() if isinstance(F, DiscreteMarginal) else F


def dual_lower_bound(F: Union[Distribution, DiscreteMarginal], s: float, params: ProblemParams,
                     form: str = "corrected") -> float:
    """Normalized value of the c-transform of the zero potential, before ``1/(r theta)``.

    The c-transform of zero is ``min(1/p, p/theta)^s p``: ``p^(1+s) theta^-s``
    up to ``sqrt(theta)`` and ``p^(1-s)`` above. This is the minimum of the
    primal over every prediction law ``G``. ``form="as_printed"`` omits the
    factor ``theta^-s`` on the lower branch. That version can exceed the
    primal and is kept only for comparison.
    """
    dist = _as_distribution(F)
    dist.validate(params)
    root = math.sqrt(params.theta)
    low = float(dist.partial_moment(1.0 + s, root))
    high = float(dist.upper_moment(1.0 - s, root))
    if form == "corrected":
        low *= params.theta ** -s
    elif form != "as_printed":
        raise DomainError(f"unknown form {form!r}")
    return (low + high) / dist.mean()


def c_transform(g_grid, potential, f_grid, s: float, params: Optional[ProblemParams] = None):
    """``phi^c(p) = min_j c(p, y_j) - phi(y_j)`` on ``f_grid``."""
    g_grid = np.asarray(g_grid, dtype=float).ravel()
    potential = np.broadcast_to(np.asarray(potential, dtype=float), g_grid.shape)
    f_grid = np.asarray(f_grid, dtype=float).ravel()
    if g_grid.size == 0 or f_grid.size == 0:
        raise DomainError("empty grid")
    if params is not None:
        theta = params.theta
        if g_grid.min() > 1.0 + 1e-9 or g_grid.max() < theta - 1e-9:
            raise DomainError(f"prediction grid must cover [1, {theta}]")
        if f_grid.min() < 1.0 or f_grid.max() > theta:
            raise DomainError(f"price grid must lie in [1, {theta}]")
    cost = cost_multiplicative(f_grid[:, None], g_grid[None, :], s)
    return (cost - potential[None, :]).min(axis=1)


def zero_potential_transform(p, s: float, params: ProblemParams):
    """Closed form of ``c_transform`` for ``phi = 0`` over the full range ``[1, theta]``."""
    p = np.asarray(p, dtype=float)
    out = np.minimum(p ** (1.0 + s) * params.theta ** -s, p ** (1.0 - s))
    return float(out) if out.ndim == 0 else out


def max_cost_additive(F: DiscreteMarginal, G: DiscreteMarginal) -> float:
    """``sup_pi E[P |P - Y|] / E[P]``: the worst coupling for the additive guarantee."""
    plan = solve_transport(cost_additive(F.atoms[:, None], G.atoms[None, :]), F, G, maximize=True)
    return plan.objective / F.mean()


def wasserstein_1(F: DiscreteMarginal, G: DiscreteMarginal) -> float:
    """W1 from the transport LP with cost ``|p - y|``."""
    return solve_transport(np.abs(F.atoms[:, None] - G.atoms[None, :]), F, G).objective


def wasserstein_1_quantile(F: DiscreteMarginal, G: DiscreteMarginal) -> float:
    """W1 in one dimension as ``int |F(x) - G(x)| dx`` over the merged atoms."""
    xs = np.union1d(F.atoms, G.atoms)
    cdf_f = np.cumsum(F.weights)[np.searchsorted(F.atoms, xs, side="right") - 1] * (xs >= F.atoms[0])
    cdf_g = np.cumsum(G.weights)[np.searchsorted(G.atoms, xs, side="right") - 1] * (xs >= G.atoms[0])
    return float(np.sum(np.abs(cdf_f - cdf_g)[:-1] * np.diff(xs)))


@dataclass(frozen=True)
class SuboptimalityReport:
    """Diagnostics of a declared coupling against the optimal one (no guarantees attached).

    ``gap`` is the additive excess of the declared cost over the minimum, normalized
    by ``E[P*]``; ``ratio`` is the multiplicative version.
    """

    declared: float
    optimal: float
    gap: float
    ratio: float


def transport_suboptimality(joint, F: DiscreteMarginal, G: DiscreteMarginal, s: float) -> SuboptimalityReport:
    joint = np.asarray(joint, dtype=float)
    if joint.shape != (F.size, G.size):
        raise DomainError("joint shape does not match the marginals")
    if (np.abs(joint.sum(axis=1) - F.weights).max() > 1e-9
            or np.abs(joint.sum(axis=0) - G.weights).max() > 1e-9):
        raise DomainError("joint is not a coupling of F and G")
    cost = cost_multiplicative(F.atoms[:, None], G.atoms[None, :], s)
    mean = F.mean()
    declared = float(np.sum(joint * cost)) / mean
    optimal = solve_transport(cost, F, G).objective / mean
    return SuboptimalityReport(declared, optimal, declared - optimal, declared / optimal)
