"""Numerical integration used as an independent check on the closed forms.

``adaptive_simpson`` is the slow, trustworthy oracle. ``gauss_legendre`` is the
fast path for integrands that are smooth between known breakpoints.
"""

from __future__ import annotations

import math
from functools import lru_cache
from typing import Callable, Iterable

import numpy as np

from onemax.errors import DomainError


def _pieces(a: float, b: float, breakpoints: Iterable[float]) -> list[float]:
    if not (math.isfinite(a) and math.isfinite(b)) or b < a:
        raise DomainError(f"bad integration range [{a}, {b}]")
    inner = sorted({float(x) for x in breakpoints if a < x < b})
    return [a, *inner, b]


def adaptive_simpson(f: Callable[[float], float], a: float, b: float, tol: float = 1e-10,
                     breakpoints: Iterable[float] = (), max_depth: int = 48) -> float:
    """Integrate ``f`` over ``[a, b]`` to absolute tolerance ``tol``.

    The range is first split at ``breakpoints`` (kinks of the integrand) and
    the tolerance is shared among the pieces in proportion to their length.
    """
    nodes = _pieces(a, b, breakpoints)
    if b == a:
        return 0.0
    total = 0.0
    for lo, hi in zip(nodes[:-1], nodes[1:]):
        total += _simpson_piece(f, lo, hi, tol * (hi - lo) / (b - a), max_depth)
    return total


def _simpson_piece(f, a, b, tol, max_depth):
    fa, fb, m = f(a), f(b), 0.5 * (a + b)
    fm = f(m)
    whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    # explicit stack instead of recursion; each entry is one panel to refine
    stack = [(a, b, fa, fm, fb, whole, tol, 0)]
    total = 0.0
    while stack:
        a, b, fa, fm, fb, whole, tol, depth = stack.pop()
        m = 0.5 * (a + b)
        lm, rm = 0.5 * (a + m), 0.5 * (m + b)
        flm, frm = f(lm), f(rm)
        left = (m - a) / 6.0 * (fa + 4.0 * flm + fm)
        right = (b - m) / 6.0 * (fm + 4.0 * frm + fb)
        delta = left + right - whole
        if depth >= max_depth or abs(delta) <= 15.0 * tol:
            total += left + right + delta / 15.0
        else:
            stack.append((m, b, fm, frm, fb, right, 0.5 * tol, depth + 1))
            stack.append((a, m, fa, flm, fm, left, 0.5 * tol, depth + 1))
    return total


@lru_cache(maxsize=8)
def _gl_rule(order: int):
    x, w = np.polynomial.legendre.leggauss(order)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def gauss_legendre(f: Callable[[np.ndarray], np.ndarray], a: float, b: float,
                   breakpoints: Iterable[float] = (), order: int = 48, panels: int = 4) -> float:
    """Composite Gauss-Legendre for a vectorized ``f`` smooth between breakpoints."""
    nodes = _pieces(a, b, breakpoints)
    edges = [np.linspace(lo, hi, panels + 1) for lo, hi in zip(nodes[:-1], nodes[1:]) if hi > lo]
    if not edges:
        return 0.0
    edges = np.unique(np.concatenate(edges))
    lo, hi = edges[:-1, None], edges[1:, None]
    x, w = _gl_rule(order)
    half = 0.5 * (hi - lo)
    pts = lo + half * (x + 1.0)
    vals = np.asarray(f(pts.ravel()), dtype=float).reshape(pts.shape)
    return float(np.sum(half * (vals @ w[:, None])))
