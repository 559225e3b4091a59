"""Dimension-by-dimension Chang-Cooper fluxes on a tensor grid.

Each axis gets its own interface coefficients, computed per grid line with
the state frozen along that line, and the two flux differences are added
without splitting.  Arrays are indexed ``f[i, j]`` with ``i`` along
``grid.axis_w`` and ``j`` along ``grid.axis_v``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Protocol

import numpy as np

from .fpcore import InterfaceCoefficients, divergence, fluxes
from .grid import Grid2D
from .integrators import cfl_explicit
from .quadrature import QuadratureRule, SingularIntegrandError, lambda_weights


class Model2D(Protocol):
    def drift(self, f: np.ndarray, grid: Grid2D) -> tuple[Callable, Callable]:
        """``(along_w, along_v)`` drift callables for a frozen state.

        ``along_w(w)`` maps abscissae of shape ``(n, k)`` to the w-drift at
        ``(w, v_j)`` with shape ``(n, k, n_v)``; ``along_v(v)`` likewise
        returns shape ``(n, k, n_w)`` evaluated at ``(w_i, v)``.
        """
        ...

    def diffusion(self, w: np.ndarray, v: np.ndarray) -> np.ndarray: ...

    def diffusion_dw(self, w: np.ndarray, v: np.ndarray) -> np.ndarray: ...

    def diffusion_dv(self, w: np.ndarray, v: np.ndarray) -> np.ndarray: ...


def axis_coefficients(
    f: np.ndarray, grid: Grid2D, model: Model2D, rule: QuadratureRule, axis: int
) -> InterfaceCoefficients:
    """Coefficients for every grid line along ``axis``.

    The result is batched: arrays have shape ``(n_axis - 1, n_other)``, so
    for ``axis=1`` they act on ``f.T``.
    """
    along_w, along_v = model.drift(f, grid)
    if axis == 0:
        line, other = grid.axis_w, grid.axis_v.nodes

        def d(x):
            return model.diffusion(x[..., None], other)

        def dp(x):
            return model.diffusion_dw(x[..., None], other)

        drift = along_w
        d_face = model.diffusion(line.midpoints[:, None], other[None, :])
    elif axis == 1:
        line, other = grid.axis_v, grid.axis_w.nodes

        def d(x):
            return model.diffusion(other, x[..., None])

        def dp(x):
            return model.diffusion_dv(other, x[..., None])

        drift = along_v
        d_face = model.diffusion(other[None, :], line.midpoints[:, None])
    else:
        raise ValueError(f"axis must be 0 or 1, got {axis}")
    w = line.nodes
    try:
        lam = lambda_weights(rule, drift, d, dp, w[:-1], w[1:])
    except SingularIntegrandError as exc:
        raise SingularIntegrandError(
            f"cell exponent undefined along axis {axis}: {exc}", abscissa=exc.abscissa, interface=exc.interface
        ) from exc
    return InterfaceCoefficients.from_lambda(lam, np.broadcast_to(d_face, lam.shape), line.dw)


def _line(coeffs: InterfaceCoefficients, j: int) -> InterfaceCoefficients:
    if not 0 <= j < coeffs.lam.shape[1]:
        raise IndexError(f"line index {j} outside 0..{coeffs.lam.shape[1] - 1}")
    return InterfaceCoefficients(
        coeffs.lam[:, j], coeffs.delta[:, j], coeffs.c_tilde[:, j], coeffs.d_face[:, j], coeffs.dw
    )


def coefficients_axis_w(f: np.ndarray, grid: Grid2D, model: Model2D, rule: QuadratureRule, j: int) -> InterfaceCoefficients:
    """Interfaces ``(i + 1/2, j)`` along row ``j``."""
    return _line(axis_coefficients(f, grid, model, rule, 0), j)


def coefficients_axis_v(f: np.ndarray, grid: Grid2D, model: Model2D, rule: QuadratureRule, i: int) -> InterfaceCoefficients:
    """Interfaces ``(i, j + 1/2)`` along column ``i``."""
    return _line(axis_coefficients(f, grid, model, rule, 1), i)


def rhs_2d(f: np.ndarray, grid: Grid2D, model: Model2D, rule: QuadratureRule) -> np.ndarray:
    """Sum of the two flux differences with zero flux on all four sides."""
    f = np.asarray(f, dtype=float)
    cw = axis_coefficients(f, grid, model, rule, 0)
    cv = axis_coefficients(f, grid, model, rule, 1)
    return divergence(fluxes(f, cw), grid.axis_w.dw) + divergence(fluxes(f.T, cv), grid.axis_v.dw).T


def mass_2d(f: np.ndarray, grid: Grid2D) -> float:
    return float(grid.cell_area * np.sum(f))


@dataclass(frozen=True)
class FPProblem2D:
    grid: Grid2D
    model: Model2D
    rule: QuadratureRule

    def positivity_bound(self, kind: str, f: np.ndarray) -> float:
        """Explicit positivity bound with both axes draining the diagonal."""
        if kind == "semi-implicit":
            raise NotImplementedError("the semi-implicit step is one-dimensional")
        cw = axis_coefficients(f, self.grid, self.model, self.rule, 0)
        cv = axis_coefficients(f, self.grid, self.model, self.rule, 1)
        inv = 1.0 / cfl_explicit(cw, cw.dw) + 1.0 / cfl_explicit(cv, cv.dw)
        return np.inf if inv == 0.0 else 1.0 / inv

    def rhs(self, f: np.ndarray) -> np.ndarray:
        return rhs_2d(f, self.grid, self.model, self.rule)
