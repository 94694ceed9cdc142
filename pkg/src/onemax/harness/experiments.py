"""Experiment drivers. Each returns its records plus any guarantee violations found.

Randomness comes from Philox streams keyed by ``SeedSequence(seed, spawn_key=cell)``
where ``cell`` indexes the grid cell (and, for the real-data driver, the
repetition). A cell's draws never depend on other cells, so the order or
concurrency of evaluation cannot change the output. Draws are shared across
``rho`` values, which makes the comparison between family members paired.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from onemax.core import ProblemParams, multiplicative_error, price_grid, worst_case_payoff
from onemax.errors import DomainError, InputDataError
from onemax.guarantees import (
    GuaranteeParams,
    additive_beta_star,
    additive_bound,
    multiplicative_bound,
    smoothness_exponent,
)
from onemax.harness.config import ExperimentConfig
from onemax.harness.data import PriceSeries, generate_gbm, ingest_csv, normalize_series
from onemax.harness.records import RunRecord
from onemax.stochastic import (
    Independent,
    UniformInterval,
    coupling_fraction,
    expected_payoff_ratio,
    independent_uniform_closed_form,
    lambda_functional,
    lambda_uniform_lower_bound,
    PairedSamples,
)
from onemax.thresholds import ThresholdSpec, is_pareto_optimal_threshold, phi_rho
from onemax.transport import (
    DiscreteMarginal,
    dual_lower_bound,
    min_cost_coupling,
    ot_ratio_bound,
    wasserstein_1,
)

REAL_DATA_NOTE = "prediction_from_unmodified_window;forced_final_sale"


@dataclass
class ExperimentResult:
    records: list[RunRecord] = field(default_factory=list)
    violations: list[str] = field(default_factory=list)


def cell_rng(seed: int, *cell: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=tuple(cell))))


def _record(cfg: ExperimentConfig, spec: Optional[ThresholdSpec], **fields) -> RunRecord:
    params = spec.params if spec is not None else cfg.params
    base = dict(
        experiment=cfg.kind,
        theta=params.theta,
        lam=cfg.resolve_lambda(params) if spec is not None else None,
        r=spec.r if spec is not None else None,
        rho=spec.rho if spec is not None else None,
        n=cfg.n,
        trials=cfg.trials,
        seed=cfg.seed,
    )
    base.update(fields)
    return RunRecord(**base)


def _step(params: ProblemParams, n: int) -> float:
    return (params.theta - 1.0) / (n - 1)


def _pstar_grid(params: ProblemParams, n: int, count: int) -> np.ndarray:
    """``count`` prices taken from the instance grid, so ``max I_n(p*) = p*`` exactly."""
    grid = price_grid(params.theta, n)
    idx = np.unique(np.round(np.linspace(0, n - 1, min(count, n))).astype(int))
    return grid[idx]


def _map(cfg: ExperimentConfig, fn: Callable, items):
    if cfg.workers > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            return list(pool.map(fn, items))
    return [fn(item) for item in items]


def _mean_se(values: np.ndarray, axis: int = -1):
    mean = values.mean(axis=axis)
    count = values.shape[axis]
    se = values.std(axis=axis, ddof=1) / math.sqrt(count) if count > 1 else np.zeros_like(mean)
    return mean, se


# ------------------------------------------------------------------ drivers


def pareto_check(cfg: ExperimentConfig) -> ExperimentResult:
    """Sampled membership certificate plus the consistency sweep at perfect predictions."""
    out = ExperimentResult()
    params = cfg.params
    step = _step(params, cfg.n)
    z = np.linspace(1.0, params.theta, cfg.grid)
    q = price_grid(params.theta, cfg.n)
    for rho in cfg.rho:
        spec = cfg.threshold_spec(rho)
        check = is_pareto_optimal_threshold(z, phi_rho(spec, z), spec)
        payoff, p_max = worst_case_payoff(params, cfg.n, q, phi_rho(spec, q))
        ratio = float(np.min(payoff / p_max))
        c = spec.consistency
        note = "spo_ok" if check else f"spo_fail:{check.constraint}@{check.value:.6g}"
        if not check:
            out.violations.append(f"rho={rho}: threshold leaves S_PO ({check.constraint} at z={check.z})")
        if not (c - 1e-12 <= ratio <= c + step):
            out.violations.append(f"rho={rho}: perfect-prediction ratio {ratio} not within step of {c}")
        out.records.append(_record(cfg, spec, error_kind="multiplicative", error_level=1.0,
                                   s=smoothness_exponent(spec), realized_ratio=ratio, std_error=0.0,
                                   bound=c, bound_applies=True, reference=float(bool(check)), note=note))
    return out


def _sweep(cfg: ExperimentConfig, additive: bool) -> ExperimentResult:
    out = ExperimentResult()
    params = cfg.params
    theta, step = params.theta, _step(params, cfg.n)
    pstars = _pstar_grid(params, cfg.n, cfg.pgrid)
    levels = np.linspace(0.0, theta - 1.0, cfg.grid) if additive else np.linspace(1.0, 1.0 / theta, cfg.grid)
    specs = [cfg.threshold_spec(rho) for rho in cfg.rho]

    def run_level(i):
        level = float(levels[i])
        u = np.stack([cell_rng(cfg.seed, i, j).random(cfg.trials) for j in range(pstars.size)])
        p = pstars[:, None]
        if additive:
            raw = p + level * (2.0 * u - 1.0)
        else:
            raw = p * level + (p / level - p * level) * u
        y = np.clip(raw, 1.0, theta)
        clipped = bool(np.any(raw != y))
        rows = []
        for spec in specs:
            payoff, p_max = worst_case_payoff(params, cfg.n, p, phi_rho(spec, y))
            ratio = payoff / p_max
            mean, se = _mean_se(ratio)
            j = int(np.argmin(mean))
            if additive:
                applies = spec.rho == 1.0
                cell_bounds = additive_bound(GuaranteeParams(spec, math.nan, additive_beta_star(spec)),
                                             level, pstars) if applies else None
                per_draw = (additive_bound(GuaranteeParams(spec, math.nan, additive_beta_star(spec)),
                                           np.abs(y - p), p) if applies else None)
                bound = float(np.min(cell_bounds)) if applies else None
            else:
                applies = True
                gp = GuaranteeParams(spec, smoothness_exponent(spec), math.nan)
                bound = multiplicative_bound(gp, level)
                per_draw = multiplicative_bound(gp, multiplicative_error(p, y))
            bad = None
            if per_draw is not None and np.any(ratio < per_draw - step - 1e-12):
                k = np.unravel_index(int(np.argmin(ratio - per_draw)), ratio.shape)
                bad = f"{cfg.kind} rho={spec.rho} level={level}: ratio {ratio[k]} below bound {per_draw[k]}"
            rows.append((spec, float(mean[j]), float(se[j]), bound, applies, clipped, bad))
        return level, rows

    for level, rows in _map(cfg, run_level, range(levels.size)):
        for spec, mean, se, bound, applies, clipped, bad in rows:
            if bad:
                out.violations.append(bad)
            out.records.append(_record(
                cfg, spec, error_kind="additive" if additive else "multiplicative", error_level=level,
                s=smoothness_exponent(spec), realized_ratio=mean, std_error=se, bound=bound,
                bound_applies=applies, clipped=clipped))
    return out


def sweep_mult(cfg: ExperimentConfig) -> ExperimentResult:
    """Worst mean ratio over ``p*`` when ``y ~ U[p* E, p*/E]`` (clipped to the range)."""
    return _sweep(cfg, additive=False)


def sweep_add(cfg: ExperimentConfig) -> ExperimentResult:
    """Worst mean ratio over ``p*`` when ``y ~ U[p* - eta, p* + eta]`` (clipped to the range)."""
    return _sweep(cfg, additive=True)


def brittleness(cfg: ExperimentConfig) -> ExperimentResult:
    """Near-perfect predictions straddling ``1/r``: ``p* = 1/r - delta``, ``y = 1/r + delta``."""
    out = ExperimentResult()
    params = cfg.params
    base = cfg.threshold_spec(1.0)
    inv_r = 1.0 / base.r
    room = min(params.theta - inv_r, inv_r - base.r_theta)
    if cfg.delta >= room:
        raise DomainError(f"delta={cfg.delta} leaves no room around 1/r (max {room})")
    deltas = np.geomspace(cfg.delta, max(cfg.delta, 0.9 * room), cfg.grid) if cfg.grid > 1 else np.array([cfg.delta])
    step = _step(params, cfg.n)
    for delta in deltas:
        p_star, y = inv_r - delta, inv_r + delta
        for rho in cfg.rho:
            spec = cfg.threshold_spec(rho)
            payoff, p_max = worst_case_payoff(params, cfg.n, p_star, phi_rho(spec, y))
            ratio = float(payoff / p_max)
            err = multiplicative_error(float(p_max), y)
            bound = multiplicative_bound(GuaranteeParams(spec, smoothness_exponent(spec), math.nan), err)
            if ratio < bound - step:
                out.violations.append(f"brittleness rho={rho} delta={delta}: {ratio} < {bound}")
            out.records.append(_record(cfg, spec, error_kind="multiplicative", error_level=err,
                                       s=smoothness_exponent(spec), realized_ratio=ratio, std_error=0.0,
                                       bound=bound, bound_applies=True, reference=float(delta)))
    return out


def stochastic_bounds(cfg: ExperimentConfig) -> ExperimentResult:
    """``P* = p*`` fixed, ``Y ~ U[p* - eps, p* + eps]``: Monte-Carlo ratio against ``max(r, Lambda/(r theta))``.

    ``reference`` holds the cruder second-order bound ``max(r, (1 - s eps/(2p*) - C eps^2)/(r theta))``.
    """
    out = ExperimentResult()
    params = cfg.params
    spec = cfg.threshold_spec(1.0)
    s = smoothness_exponent(spec)
    grid = price_grid(params.theta, cfg.n)
    p_star = float(grid[np.argmin(np.abs(grid - 0.5 * (1.0 + params.theta)))])
    eps_max = min(params.theta - p_star, p_star - 1.0)
    step = _step(params, cfg.n)
    for i, eps in enumerate(np.linspace(eps_max / cfg.grid, eps_max, cfg.grid)):
        G = UniformInterval.centered(p_star, eps)
        y = G.sample(cell_rng(cfg.seed, i), cfg.trials)
        payoff, p_max = worst_case_payoff(params, cfg.n, p_star, phi_rho(spec, y))
        mean, se = _mean_se(payoff / p_max)
        lam_exact = lambda_functional(G, p_star, s)
        lam_low = lambda_uniform_lower_bound(p_star, eps, s, params)
        bound = max(spec.r, spec.consistency * lam_exact)
        if lam_low > lam_exact + 1e-12:
            out.violations.append(f"eps={eps}: second-order bound {lam_low} exceeds Lambda {lam_exact}")
        if mean < bound - step - 3.0 * se:
            out.violations.append(f"eps={eps}: mean ratio {mean} below {bound}")
        out.records.append(_record(cfg, spec, error_kind="uniform_eps", error_level=float(eps), s=s,
                                   realized_ratio=float(mean), std_error=float(se), bound=bound,
                                   bound_applies=True,
                                   reference=max(spec.r, spec.consistency * lam_low)))
    return out


def _random_marginal(rng: np.random.Generator, support: np.ndarray, max_atoms: int) -> DiscreteMarginal:
    k = int(rng.integers(1, min(max_atoms, support.size) + 1))
    atoms = np.sort(rng.choice(support, size=k, replace=False))
    weights = rng.random(k) + 0.05
    return DiscreteMarginal(atoms, weights / weights.sum())


def ot_bounds(cfg: ExperimentConfig) -> ExperimentResult:
    """Random discrete marginal pairs: independent-coupling performance vs coupling-free bounds.

    ``realized_ratio`` is the exact expected ratio of ``A^1_r`` under the
    product coupling, ``bound`` the optimal-transport bound and ``reference``
    the c-transform (dual) bound. ``error_level`` is ``W1(F, G)``.
    """
    out = ExperimentResult()
    params = cfg.params
    spec = cfg.threshold_spec(1.0)
    s = smoothness_exponent(spec)
    support = _pstar_grid(params, cfg.n, 200)
    step = _step(params, cfg.n)
    for k in range(cfg.trials):
        rng = cell_rng(cfg.seed, k)
        F = _random_marginal(rng, support, cfg.atoms)
        G = _random_marginal(rng, support, cfg.atoms)
        mean = F.mean()
        primal = min_cost_coupling(F, G, s).objective / mean
        dual = dual_lower_bound(F, s, params)
        p, y = np.meshgrid(F.atoms, G.atoms, indexing="ij")
        product = PairedSamples(p.ravel(), y.ravel(), np.outer(F.weights, G.weights).ravel())
        fixed = coupling_fraction(product, s)
        realized = expected_payoff_ratio(product, spec, cfg.n)
        bound = ot_ratio_bound(F, G, spec)
        if not (dual <= primal + 1e-8 and primal <= fixed + 1e-8):
            out.violations.append(f"pair {k}: chain broken dual={dual} primal={primal} fixed={fixed}")
        if realized < bound - step:
            out.violations.append(f"pair {k}: ratio {realized} below transport bound {bound}")
        out.records.append(_record(cfg, spec, error_kind="w1", error_level=wasserstein_1(F, G), s=s,
                                   realized_ratio=realized, std_error=0.0, bound=bound, bound_applies=True,
                                   reference=max(spec.r, spec.consistency * dual)))
    return out


def _load_series(cfg: ExperimentConfig) -> PriceSeries:
    if cfg.input:
        return ingest_csv(cfg.input)
    price_range = (cfg.gbm_low, cfg.gbm_high) if cfg.gbm_low is not None else None
    return generate_gbm(cfg.window * cfg.gbm_windows, cfg.seed, cfg.gbm_drift, cfg.gbm_vol,
                        price_range=price_range)


def real_data(cfg: ExperimentConfig, series: Optional[PriceSeries] = None) -> ExperimentResult:
    """Window experiment on a price series (or the synthetic stand-in).

    Windows are aligned blocks of ``window`` rows; a partial trailing block is
    dropped. Each repetition samples ``windows`` blocks ``W_0`` (each with a
    predecessor ``W_-1``) and records ``R_m = min_j ratio_j``. The prediction
    ``alpha max W_-1 + (1 - alpha) max W_0`` is taken before the final price is
    replaced by ``L`` (probability ``replace_prob``). When no price reaches the
    threshold the trader sells at the final price.
    """
    out = ExperimentResult()
    series = series if series is not None else _load_series(cfg)
    try:
        instance, theta, _ = normalize_series(series)
    except DomainError as exc:
        raise InputDataError("degenerate_series", str(exc)) from exc
    params = instance.params
    count = len(instance) // cfg.window
    if count < 2 or cfg.window < 2:
        raise InputDataError("insufficient_span",
                             f"need at least two full windows of {cfg.window} rows, have {len(instance)} rows")
    blocks = np.asarray(instance.prices[: count * cfg.window]).reshape(count, cfg.window)
    body_cummax = np.maximum.accumulate(blocks[:, :-1], axis=1)
    body_max = body_cummax[:, -1]
    last = blocks[:, -1]
    full_max = np.maximum(body_max, last)
    specs = [cfg.threshold_spec(rho, params) for rho in cfg.rho]

    draws = []
    for t in range(cfg.trials):
        rng = cell_rng(cfg.seed, t)
        idx = rng.integers(1, count, size=cfg.windows)
        replaced = rng.random(cfg.windows) < cfg.replace_prob
        draws.append((idx, replaced))

    for alpha in np.linspace(0.0, 1.0, cfg.grid):
        for spec in specs:
            minima = np.empty(cfg.trials)
            for t, (idx, replaced) in enumerate(draws):
                y = alpha * full_max[idx - 1] + (1.0 - alpha) * full_max[idx]
                thresholds = np.atleast_1d(phi_rho(spec, np.minimum(y, theta)))
                final = np.where(replaced, 1.0, last[idx])
                ratios = np.empty(idx.size)
                for j, (w, thr) in enumerate(zip(idx, thresholds)):
                    first = int(np.searchsorted(body_cummax[w], thr, side="left"))
                    payoff = blocks[w, first] if first < cfg.window - 1 else final[j]
                    ratios[j] = payoff / max(body_max[w], final[j])
                minima[t] = ratios.min()
            mean, se = _mean_se(minima)
            if np.any(minima < spec.r - 1e-12):
                out.violations.append(f"real-data rho={spec.rho} alpha={alpha}: ratio below robustness {spec.r}")
            out.records.append(_record(cfg, spec, error_kind="alpha", error_level=float(alpha),
                                       s=smoothness_exponent(spec), realized_ratio=float(mean),
                                       std_error=float(se), bound=spec.r, bound_applies=True,
                                       reference=spec.consistency, note=REAL_DATA_NOTE))
    return out


def quad_surface(cfg: ExperimentConfig) -> ExperimentResult:
    """Normalized fraction for ``F = G = U[1, theta]`` over a ``(theta, s)`` grid.

    ``bound`` is the fraction before the ``1/(r theta)`` factor; ``reference``
    is the closed form where it is defined (``s`` not 1 or 2).
    """
    out = ExperimentResult()
    thetas = np.linspace(1.01, cfg.theta_max, cfg.grid)
    exponents = np.linspace(1.0, cfg.s_max, cfg.grid)
    for theta in thetas:
        params = ProblemParams(float(theta))
        dist = UniformInterval(1.0, float(theta))
        previous = math.inf
        for s in exponents:
            value = coupling_fraction(Independent(dist, dist), float(s))
            try:
                closed = independent_uniform_closed_form(1.0, float(theta), float(s), params)
            except DomainError:
                closed = None
            if value > previous + 1e-12:
                out.violations.append(f"theta={theta}: fraction increases in s at s={s}")
            if closed is not None and abs(closed - value) > 1e-6:
                out.violations.append(f"theta={theta} s={s}: closed form {closed} vs quadrature {value}")
            previous = value
            out.records.append(RunRecord(
                experiment=cfg.kind, theta=float(theta), lam=None, r=None, rho=1.0, n=None, trials=None,
                seed=cfg.seed, error_kind="none", error_level=None, s=float(s), realized_ratio=None,
                std_error=None, bound=value, bound_applies=True, reference=closed,
                note="fraction_before_consistency_factor"))
    return out


DRIVERS = {
    "pareto-check": pareto_check,
    "sweep-mult": sweep_mult,
    "sweep-add": sweep_add,
    "brittleness": brittleness,
    "stochastic-bounds": stochastic_bounds,
    "ot-bounds": ot_bounds,
    "real-data": real_data,
    "quad-surface": quad_surface,
}


def run_experiment(cfg: ExperimentConfig) -> ExperimentResult:
    return DRIVERS[cfg.kind](cfg)
