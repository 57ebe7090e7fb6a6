"""Adaptive composite Gauss-Legendre quadrature.

Panels are bisected until the difference between a panel's single-rule
estimate and the sum of its two halves falls within the panel's share of
the global tolerance.  Integrands are evaluated in batches: ``f`` receives a
1-D array of abscissae and returns an array whose last axis matches it, so
vector-valued integrands (one component per leading index) are supported.

Like any adaptive rule this can miss a feature narrower than the starting
panels, since neither estimate samples it; pass breakpoints around peaks.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from functools import lru_cache
from typing import Callable, NamedTuple, Sequence

import numpy as np

__all__ = [
    "ConvergenceError",
    "QuadratureConfig",
    "Integral",
    "integrate",
    "integrate_full",
    "integrate_intervals",
    "cumulative",
]


class ConvergenceError(RuntimeError):
    """Adaptive quadrature hit its subdivision budget before meeting tolerance."""


@dataclass(frozen=True)
class QuadratureConfig:
    """Tolerances and limits for the adaptive integrator.

    ``differentiation_step`` is the step (in the integrand's own units, usually
    radians) used wherever a density is checked against a numerical derivative.
    """

    rel_tol: float = 1e-8
    abs_tol: float = 1e-12
    max_subdivisions: int = 20000
    differentiation_step: float = 1e-5
    order: int = 10

    def tightened(self, factor: float = 1e-2) -> "QuadratureConfig":
        """Config for an integral nested inside one using ``self``."""
        return replace(self, rel_tol=self.rel_tol * factor, abs_tol=self.abs_tol * factor)

    def __post_init__(self):
        if not (self.rel_tol > 0 and self.abs_tol > 0):
            raise ValueError("quadrature tolerances must be positive")
        if self.max_subdivisions < 1:
            raise ValueError("max_subdivisions must be >= 1")
        if self.differentiation_step <= 0:
            raise ValueError("differentiation_step must be positive")
        if self.order < 2:
            raise ValueError("Gauss-Legendre order must be >= 2")


DEFAULT_QUAD = QuadratureConfig()
_ROUNDOFF = 50.0 * np.finfo(float).eps


class Integral(NamedTuple):
    value: np.ndarray | float
    error: np.ndarray | float
    n_panels: int


@lru_cache(maxsize=16)
def _rule(order: int) -> tuple[np.ndarray, np.ndarray]:
    nodes, weights = np.polynomial.legendre.leggauss(order)
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return nodes, weights


def _apply_rule(f, a, b, nodes, weights):
    half = 0.5 * (b - a)
    mid = 0.5 * (a + b)
    x = mid[:, None] + half[:, None] * nodes[None, :]
    y = np.asarray(f(x.ravel()), dtype=float)
    y = y.reshape(y.shape[:-1] + x.shape)
    return (y * weights).sum(axis=-1) * half


def integrate_intervals(
    f: Callable[[np.ndarray], np.ndarray],
    edges: Sequence[float] | np.ndarray,
    quad: QuadratureConfig = DEFAULT_QUAD,
) -> Integral:
    """Integrate ``f`` over each interval ``[edges[i], edges[i+1]]``.

    The tolerance is global: the error of every interval is bounded by its
    length share of ``max(abs_tol, rel_tol * |total|)`` where ``total`` is the
    integral over the whole span.  Returns per-interval values with shape
    ``(..., len(edges) - 1)``.
    """
    edges = np.asarray(edges, dtype=float)
    if edges.ndim != 1 or edges.size < 2:
        raise ValueError("need at least two edges")
    if np.any(np.diff(edges) < 0) or not np.all(np.isfinite(edges)):
        raise ValueError("edges must be finite and nondecreasing")
    nodes, weights = _rule(quad.order)
    n_int = edges.size - 1
    span = edges[-1] - edges[0]
    if span == 0.0:
        probe = np.asarray(f(np.array([edges[0]])))
        zeros = np.zeros(probe.shape[:-1] + (n_int,))
        return Integral(zeros, zeros.copy(), 0)

    a = edges[:-1].copy()
    b = edges[1:].copy()
    owner = np.arange(n_int)
    keep = b > a
    a, b, owner = a[keep], b[keep], owner[keep]
    coarse = _apply_rule(f, a, b, nodes, weights)
    lead = coarse.shape[:-1]
    accepted = np.zeros(lead + (n_int,))
    err_acc = np.zeros(lead + (n_int,))
    n_panels = a.size

    while a.size:
        mid = 0.5 * (a + b)
        left = _apply_rule(f, a, mid, nodes, weights)
        right = _apply_rule(f, mid, b, nodes, weights)
        fine = left + right
        err = np.abs(fine - coarse)
        total = accepted.sum(axis=-1) + fine.sum(axis=-1)
        tol = np.maximum(quad.abs_tol, quad.rel_tol * np.abs(total))
        share = (b - a) / span
        # Errors already at roundoff level cannot be reduced by bisection.
        ok = (err <= tol[..., None] * share) | (err <= _ROUNDOFF * (np.abs(left) + np.abs(right)))
        if ok.ndim > 1:
            ok = ok.reshape(-1, ok.shape[-1]).all(axis=0)
        # Panels too narrow to split further are accepted as-is.
        ok |= (mid <= a) | (mid >= b)
        if np.any(ok):
            idx = owner[ok]
            for k in np.ndindex(*lead) if lead else [()]:
                np.add.at(accepted[k], idx, fine[k][ok])
                np.add.at(err_acc[k], idx, err[k][ok])
        bad = ~ok
        if not np.any(bad):
            break
        n_panels += int(bad.sum())
        if n_panels > quad.max_subdivisions:
            raise ConvergenceError(
                f"adaptive quadrature exceeded {quad.max_subdivisions} panels "
                f"(estimated error {float(np.max(err[..., bad])):.3e})"
            )
        a = np.concatenate([a[bad], mid[bad]])
        b = np.concatenate([mid[bad], b[bad]])
        owner = np.concatenate([owner[bad], owner[bad]])
        coarse = np.concatenate([left[..., bad], right[..., bad]], axis=-1)
        order = np.argsort(a, kind="stable")
        a, b, owner, coarse = a[order], b[order], owner[order], coarse[..., order]
    return Integral(accepted, err_acc, n_panels)


def integrate_full(
    f: Callable[[np.ndarray], np.ndarray],
    a: float,
    b: float,
    quad: QuadratureConfig = DEFAULT_QUAD,
    breakpoints: Sequence[float] = (),
) -> Integral:
    """Integrate ``f`` over ``[a, b]``; ``b`` may be ``inf``.

    An infinite upper limit is mapped to ``[0, 1)`` with ``x = a + s / (1 - s)``.
    """
    if b == np.inf:
        if not np.isfinite(a):
            raise ValueError("lower limit must be finite")

        def g(s, _f=f, _a=a):
            s = np.asarray(s)
            one_minus = 1.0 - s
            return _f(_a + s / one_minus) / one_minus**2

        bps = [(p - a) / (1.0 + p - a) for p in breakpoints if a < p < np.inf]
        return integrate_full(g, 0.0, 1.0, quad, bps)
    if b < a:
        res = integrate_full(f, b, a, quad, breakpoints)
        return Integral(-res.value, res.error, res.n_panels)
    inner = sorted(p for p in breakpoints if a < p < b)
    edges = np.array([a, *inner, b], dtype=float)
    res = integrate_intervals(f, edges, quad)
    value = res.value.sum(axis=-1)
    error = res.error.sum(axis=-1)
    if np.ndim(value) == 0:
        value, error = float(value), float(error)
    return Integral(value, error, res.n_panels)


def integrate(f, a, b, quad: QuadratureConfig = DEFAULT_QUAD, breakpoints=()):
    """Value-only shorthand for :func:`integrate_full`."""
    return integrate_full(f, a, b, quad, breakpoints).value


def cumulative(f, x, lower: float, quad: QuadratureConfig = DEFAULT_QUAD):
    """Return ``F(x_i) = integral of f from lower to x_i`` for an array ``x``.

    ``x`` need not be sorted; every point must be ``>= lower``.
    """
    x = np.asarray(x, dtype=float)
    flat = x.ravel()
    if flat.size == 0:
        return np.zeros_like(x)
    if np.any(flat < lower):
        raise ValueError("all points must lie at or above the lower limit")
    uniq, inverse = np.unique(flat, return_inverse=True)
    edges = np.concatenate([[lower], uniq])
    pieces = integrate_intervals(f, edges, quad).value
    if pieces.ndim != 1:
        raise ValueError("cumulative() needs a scalar-valued integrand")
    return np.cumsum(pieces)[inverse].reshape(x.shape)
