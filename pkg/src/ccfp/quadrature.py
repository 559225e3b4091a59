"""Cell quadrature rules for the interface exponent.

Every rule samples strictly interior points of the cell, because the
diffusion coefficient may vanish on the domain boundary and the integrand
``(B + D') / D`` is then singular at the outermost nodes.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Callable

import numpy as np


class QuadratureError(ArithmeticError):
    """An integrand produced a non-finite sample."""

    def __init__(self, message: str, abscissa: float | None = None, interface: int | None = None):
        super().__init__(message)
        self.abscissa = abscissa
        self.interface = interface


class SingularIntegrandError(QuadratureError):
    """The diffusion coefficient is not positive at a sampled point."""


class RuleKind(str, Enum):
    MIDPOINT = "midpoint"
    ONC4 = "onc4"
    ONC6 = "onc6"
    GAUSS = "gauss"


# Open Newton-Cotes on n + 1 equal sub-intervals using the n interior points,
# as fractions of the cell length.
_OPEN_NEWTON_COTES = {
    RuleKind.MIDPOINT: (np.array([1.0]), 1),
    RuleKind.ONC4: (np.array([2.0, -1.0, 2.0]) / 3.0, 3),
    RuleKind.ONC6: (np.array([11.0, -14.0, 26.0, -14.0, 11.0]) / 20.0, 5),
}


@dataclass(frozen=True)
class QuadratureRule:
    """Quadrature on a single cell, stored on the reference interval [0, 1].

    ``gauss_points`` is only read for ``RuleKind.GAUSS``.
    """

    kind: RuleKind = RuleKind.MIDPOINT
    gauss_points: int = 8
    nodes: np.ndarray = field(init=False, repr=False, compare=False)
    weights: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        kind = RuleKind(self.kind)
        object.__setattr__(self, "kind", kind)
        if kind is RuleKind.GAUSS:
            if self.gauss_points < 1:
                raise ValueError("gauss_points must be positive")
            x, w = np.polynomial.legendre.leggauss(self.gauss_points)
            nodes, weights = 0.5 * (x + 1.0), 0.5 * w
        else:
            weights, npts = _OPEN_NEWTON_COTES[kind]
            nodes = np.arange(1, npts + 1) / (npts + 1)
        nodes.setflags(write=False)
        weights.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "weights", weights)

    @property
    def degree(self) -> int:
        """Highest polynomial degree integrated exactly."""
        if self.kind is RuleKind.GAUSS:
            return 2 * self.gauss_points - 1
        return {RuleKind.MIDPOINT: 1, RuleKind.ONC4: 3, RuleKind.ONC6: 5}[self.kind]

    @property
    def order(self) -> int:
        """Convergence order of the composite rule (degree + 1)."""
        return self.degree + 1

    @classmethod
    def from_config(cls, kind: str, points: int = 8) -> "QuadratureRule":
        return cls(RuleKind(kind), gauss_points=points)

    def sample_points(self, a, b) -> np.ndarray:
        """Abscissae for cells ``[a, b]``; shape ``np.shape(a) + (n_points,)``."""
        a = np.asarray(a, dtype=float)[..., None]
        b = np.asarray(b, dtype=float)[..., None]
        return a + (b - a) * self.nodes


def integrate(rule: QuadratureRule, integrand: Callable, a: float, b: float) -> float:
    """Approximate the integral of ``integrand`` over ``[a, b]``.

    ``integrand`` must accept a numpy array of abscissae.
    """
    if not a < b:
        raise ValueError(f"need a < b, got [{a}, {b}]")
    return float(integrate_cells(rule, integrand, np.array([a]), np.array([b]))[0])


def integrate_cells(rule: QuadratureRule, integrand: Callable, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Vectorised :func:`integrate` over many cells at once."""
    x = rule.sample_points(a, b)
    values = np.asarray(integrand(x), dtype=float)
    bad = ~np.isfinite(values)
    if bad.any():
        idx = np.unravel_index(np.argmax(bad), bad.shape)
        raise QuadratureError(
            f"non-finite integrand sample at x={x[idx]!r}",
            abscissa=float(x[idx]),
            interface=int(idx[0]) if bad.ndim > 1 else None,
        )
    return (np.asarray(b, dtype=float) - np.asarray(a, dtype=float)) * (values @ rule.weights)


def lambda_weights(
    rule: QuadratureRule,
    drift: Callable,
    diffusion: Callable,
    diffusion_prime: Callable,
    left: np.ndarray,
    right: np.ndarray,
) -> np.ndarray:
    """Interface exponents ``lambda = int (B + D') / D`` over each cell.

    All three callables receive abscissae of shape ``(n_cells, n_points)``.
    Any of them may return extra trailing axes (one per independent problem
    sharing the grid); the result then has shape ``(n_cells, ...)``.
    """
    x = rule.sample_points(left, right)
    d = np.asarray(diffusion(x), dtype=float)
    if np.any(~(d > 0.0)):
        idx = np.unravel_index(np.argmax(~(d > 0.0)), d.shape)
        raise SingularIntegrandError(
            f"diffusion not positive at x={x[idx[:2]]!r} (interface {idx[0]})",
            abscissa=float(x[idx[:2]]),
            interface=int(idx[0]),
        )
    b = np.asarray(drift(x), dtype=float)
    dp = np.asarray(diffusion_prime(x), dtype=float)
    ndim = max(b.ndim, d.ndim, dp.ndim)
    b, d, dp = (a.reshape(a.shape + (1,) * (ndim - a.ndim)) for a in (b, d, dp))
    values = (b + dp) / d
    bad = ~np.isfinite(values)
    if bad.any():
        idx = np.unravel_index(np.argmax(bad), bad.shape)
        raise SingularIntegrandError(
            f"non-finite integrand at x={x[idx[:2]]!r} (interface {idx[0]})",
            abscissa=float(x[idx[:2]]),
            interface=int(idx[0]),
        )
    extra = (1,) * (ndim - x.ndim)
    h = (np.asarray(right, dtype=float) - np.asarray(left, dtype=float)).reshape((-1,) + extra)
    return h * np.einsum("nk...,k->n...", values, rule.weights)


def lambda_weight(rule: QuadratureRule, drift_plus_dprime_over_d: Callable, w_i: float, w_ip1: float) -> float:
    """Single-cell exponent from a ready-made integrand ``(B + D') / D``."""
    return integrate(rule, drift_plus_dprime_over_d, w_i, w_ip1)
