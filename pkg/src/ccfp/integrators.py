"""Time stepping for the Chang-Cooper semi-discretisation.

Explicit steppers call ``problem.rhs`` at every stage, so the nonlinear
drift is refreshed per stage.  The semi-implicit step freezes the
coefficients at the old state and solves one tridiagonal system per
independent problem (trailing axes of ``f``).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Protocol

import numpy as np
from scipy.linalg import solve_banded

from .fpcore import InterfaceCoefficients, as_column

log = logging.getLogger(__name__)

AUTO_DT_SAFETY = 0.9


class Problem(Protocol):
    """Anything with ``rhs``; ``coefficients`` is needed by the semi-implicit
    step and by ``dt="auto"`` unless the problem offers ``positivity_bound``."""

    def coefficients(self, f: np.ndarray) -> InterfaceCoefficients: ...

    def rhs(self, f: np.ndarray) -> np.ndarray: ...


class IntegratorKind(str, Enum):
    EULER = "euler"
    SSPRK2 = "ssprk2"
    RK4 = "rk4"
    SEMI_IMPLICIT = "semi-implicit"


# --------------------------------------------------------------------------
# Positivity bounds
# --------------------------------------------------------------------------


def cfl_explicit(coeffs: InterfaceCoefficients, dw: float) -> float:
    """Largest forward-Euler step that keeps the update nonnegative.

    ``dw**2 / (2 (M dw + D))`` with ``M = max |C|`` and ``D = max D_{i+1/2}``;
    ``inf`` when both vanish.
    """
    m = float(np.max(np.abs(coeffs.c_tilde)))
    d = float(np.max(coeffs.d_face))
    denom = 2.0 * (m * dw + d)
    return np.inf if denom == 0.0 else dw * dw / denom


def cfl_semi_implicit(coeffs: InterfaceCoefficients, dw: float) -> float:
    """Step bound ``dw / (2 M)`` of the semi-implicit scheme (``inf`` if ``M == 0``)."""
    m = float(np.max(np.abs(coeffs.c_tilde)))
    return np.inf if m == 0.0 else dw / (2.0 * m)


# --------------------------------------------------------------------------
# Explicit steppers
# --------------------------------------------------------------------------


def step_forward_euler(problem: Problem, f: np.ndarray, dt: float) -> np.ndarray:
    return f + dt * problem.rhs(f)


def step_ssprk2(problem: Problem, f: np.ndarray, dt: float) -> np.ndarray:
    """Two-stage SSP Runge-Kutta (Heun): average of two Euler steps."""
    f1 = step_forward_euler(problem, f, dt)
    return 0.5 * f + 0.5 * step_forward_euler(problem, f1, dt)


def step_rk4(problem: Problem, f: np.ndarray, dt: float) -> np.ndarray:
    k1 = problem.rhs(f)
    k2 = problem.rhs(f + 0.5 * dt * k1)
    k3 = problem.rhs(f + 0.5 * dt * k2)
    k4 = problem.rhs(f + dt * k3)
    return f + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


# --------------------------------------------------------------------------
# Semi-implicit scheme
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class TridiagonalSystem:
    """``R_i x_i - Q_i x_{i+1} - P_i x_{i-1} = rhs_i`` along axis 0.

    ``lower`` holds ``P`` (``P[0] == 0``), ``upper`` holds ``Q``
    (``Q[-1] == 0``); both are stored with positive sign.
    """

    lower: np.ndarray
    diag: np.ndarray
    upper: np.ndarray
    rhs: np.ndarray

    def matvec(self, x: np.ndarray) -> np.ndarray:
        y = self.diag * x
        y[1:] -= self.lower[1:] * x[:-1]
        y[:-1] -= self.upper[:-1] * x[1:]
        return y

    def dense(self) -> np.ndarray:
        """Dense matrix (1D systems only)."""
        return np.diag(self.diag) - np.diag(self.upper[:-1], 1) - np.diag(self.lower[1:], -1)


def assemble_semi_implicit(f: np.ndarray, coeffs: InterfaceCoefficients, dt: float) -> TridiagonalSystem:
    f = np.asarray(f, dtype=float)
    k = dt / coeffs.dw**2
    d = as_column(coeffs.d_face, f.ndim)
    alpha = k * d * as_column(coeffs.weight_left, f.ndim)
    # alpha * exp(lambda) is bernoulli(-lambda), no overflow
    alpha_e = k * d * as_column(coeffs.weight_right, f.ndim)
    shape = np.broadcast_shapes(f.shape, (f.shape[0],) + alpha.shape[1:])
    lower = np.zeros(shape)
    upper = np.zeros(shape)
    diag = np.ones(shape)
    upper[:-1] = alpha_e
    lower[1:] = alpha
    diag[:-1] += alpha
    diag[1:] += alpha_e
    return TridiagonalSystem(lower, diag, upper, np.broadcast_to(f, shape).copy())


def solve_tridiagonal(system: TridiagonalSystem) -> np.ndarray:
    """Solve along axis 0.

    A single system goes to LAPACK; a batch (trailing axes, each with its
    own matrix) uses the Thomas algorithm vectorised over the batch.
    """
    if system.diag.ndim == 1:
        ab = np.empty((3, system.diag.size))
        ab[0, 1:] = -system.upper[:-1]
        ab[1] = system.diag
        ab[2, :-1] = -system.lower[1:]
        try:
            return solve_banded((1, 1), ab, system.rhs, check_finite=False)
        except np.linalg.LinAlgError as exc:
            raise ZeroDivisionError(f"singular tridiagonal system: {exc}") from exc
    a = -system.lower
    b = system.diag
    c = -system.upper
    d = system.rhs
    n = b.shape[0]
    cp = np.empty_like(b)
    dp = np.empty_like(b)
    piv = b[0]
    if np.any(piv == 0.0):
        raise ZeroDivisionError("zero pivot in tridiagonal solve (row 0)")
    cp[0] = c[0] / piv
    dp[0] = d[0] / piv
    for i in range(1, n):
        piv = b[i] - a[i] * cp[i - 1]
        if np.any(piv == 0.0):
            raise ZeroDivisionError(f"zero pivot in tridiagonal solve (row {i})")
        cp[i] = c[i] / piv
        dp[i] = (d[i] - a[i] * dp[i - 1]) / piv
    x = np.empty_like(dp)
    x[-1] = dp[-1]
    for i in range(n - 2, -1, -1):
        x[i] = dp[i] - cp[i] * x[i + 1]
    return x


def step_semi_implicit(problem: Problem, f: np.ndarray, dt: float) -> np.ndarray:
    coeffs = problem.coefficients(f)
    return solve_tridiagonal(assemble_semi_implicit(f, coeffs, dt))


# --------------------------------------------------------------------------
# Driver
# --------------------------------------------------------------------------

STEPPERS: dict[IntegratorKind, Callable[[Problem, np.ndarray, float], np.ndarray]] = {
    IntegratorKind.EULER: step_forward_euler,
    IntegratorKind.SSPRK2: step_ssprk2,
    IntegratorKind.RK4: step_rk4,
    IntegratorKind.SEMI_IMPLICIT: step_semi_implicit,
}


def positivity_bound(kind: IntegratorKind, coeffs: InterfaceCoefficients) -> float:
    """The bound that guards positivity for ``kind``.

    RK4 is not SSP; it borrows the explicit bound as its parabolic step.
    """
    if IntegratorKind(kind) is IntegratorKind.SEMI_IMPLICIT:
        return cfl_semi_implicit(coeffs, coeffs.dw)
    return cfl_explicit(coeffs, coeffs.dw)


@dataclass
class TimeStepper:
    """Fixed-step time integration of ``df/dt = rhs(f)`` up to ``t_end``.

    ``dt="auto"`` uses ``AUTO_DT_SAFETY`` times the positivity bound of the
    initial state, shrunk so that an integer number of steps lands on
    ``t_end``.  ``negative_steps`` counts steps that produced a negative
    nodal value.
    """

    kind: IntegratorKind
    dt: float | str = "auto"
    t_end: float = 1.0
    negative_steps: int = 0

    def __post_init__(self) -> None:
        self.kind = IntegratorKind(self.kind)
        if self.t_end < 0:
            raise ValueError("t_end must be nonnegative")
        if self.dt != "auto" and not float(self.dt) > 0:
            raise ValueError("dt must be positive or 'auto'")

    def resolve_dt(self, problem: Problem, f: np.ndarray) -> float:
        if self.dt == "auto":
            if hasattr(problem, "positivity_bound"):
                bound = problem.positivity_bound(self.kind.value, f)
            else:
                bound = positivity_bound(self.kind, problem.coefficients(f))
            dt = AUTO_DT_SAFETY * bound
            if not np.isfinite(dt):
                dt = self.t_end if self.t_end > 0 else 1.0
        else:
            dt = float(self.dt)
        if self.t_end > 0:
            dt = self.t_end / max(1, int(np.ceil(self.t_end / dt - 1e-12)))
        return dt

    def step(self, problem: Problem, f: np.ndarray, dt: float) -> np.ndarray:
        out = STEPPERS[self.kind](problem, f, dt)
        if np.any(out < 0.0):
            self.negative_steps += 1
            log.debug("negative nodal value %.3e after %s step", float(out.min()), self.kind.value)
        return out

    def run(
        self,
        problem: Problem,
        f0: np.ndarray,
        callback: Callable[[int, float, np.ndarray], None] | None = None,
        dt: float | None = None,
    ) -> np.ndarray:
        """Advance ``f0`` to ``t_end``; ``callback(n, t, f)`` sees every state."""
        f = np.array(f0, dtype=float)
        if dt is None:
            dt = self.resolve_dt(problem, f)
        n_steps = int(round(self.t_end / dt)) if self.t_end > 0 else 0
        if callback is not None:
            callback(0, 0.0, f)
        for n in range(1, n_steps + 1):
            f = self.step(problem, f, dt)
            if callback is not None:
                callback(n, self.t_end if n == n_steps else n * dt, f)
        return f
