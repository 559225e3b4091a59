"""Generalised Chang-Cooper discretisation of 1D mean-field Fokker-Planck equations.

The equation is written in conservative form ``df/dt = dF/dw`` with flux

    F = (B[f] + D') f + D f'

and discretised as ``df_i/dt = (F_{i+1/2} - F_{i-1/2}) / dw`` with the
interface flux

    F_{i+1/2} = C_{i+1/2} [(1 - delta) f_{i+1} + delta f_i] + D_{i+1/2} (f_{i+1} - f_i) / dw.

The weight ``delta`` and the averaged drift ``C`` are built from the cell
exponent ``lambda = int_{w_i}^{w_{i+1}} (B + D') / D dw`` so that the flux
vanishes exactly on the discrete profile ``f_{i+1} / f_i = exp(-lambda)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Protocol

import numpy as np

from .grid import Grid1D
from .quadrature import QuadratureRule, SingularIntegrandError, lambda_weights

_SERIES_CUTOFF = 0.05
_ASYMPTOTIC_CUTOFF = 500.0


class Model1D(Protocol):
    def drift(self, f: np.ndarray, grid: Grid1D) -> Callable[[np.ndarray], np.ndarray]: ...

    def diffusion(self, w: np.ndarray) -> np.ndarray: ...

    def diffusion_prime(self, w: np.ndarray) -> np.ndarray: ...


@dataclass(frozen=True)
class InterfaceCoefficients:
    """Per-interface data; index ``i`` refers to interface ``i + 1/2``.

    ``weight_right`` and ``weight_left`` are the flux weights in the combined
    form ``F = (D/dw) (weight_right f[i+1] - weight_left f[i])``, i.e.
    ``bernoulli(-lam)`` and ``bernoulli(lam)``.
    """

    lam: np.ndarray
    delta: np.ndarray
    c_tilde: np.ndarray
    d_face: np.ndarray
    dw: float
    weight_right: np.ndarray = field(init=False, repr=False, compare=False)
    weight_left: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "weight_right", np.asarray(bernoulli(-np.asarray(self.lam, dtype=float))))
        object.__setattr__(self, "weight_left", np.asarray(bernoulli(np.asarray(self.lam, dtype=float))))

    def __len__(self) -> int:
        return len(self.lam)

    @classmethod
    def from_lambda(cls, lam: np.ndarray, d_face: np.ndarray, dw: float) -> "InterfaceCoefficients":
        lam = np.asarray(lam, dtype=float)
        d_face = np.asarray(d_face, dtype=float)
        return cls(lam, delta_formula(lam), as_column(d_face, lam.ndim) * lam / dw, d_face, dw)


def delta_formula(lam):
    """Chang-Cooper weight ``1/lambda + 1/(1 - exp(lambda))``.

    Uses the Taylor series near zero and the exact asymptotes for large
    ``|lambda|`` so the result stays in (0, 1) without overflow.
    """
    lam = np.asarray(lam, dtype=float)
    out = np.empty_like(lam)
    small = np.abs(lam) <= _SERIES_CUTOFF
    big = lam > _ASYMPTOTIC_CUTOFF
    neg = lam < -_ASYMPTOTIC_CUTOFF
    mid = ~(small | big | neg)
    x = lam[small]
    x2 = x * x
    # Bernoulli-number series; the first omitted term is below 1e-20 on the cutoff.
    out[small] = 0.5 - x / 12.0 * (1.0 - x2 / 60.0 * (1.0 - x2 / 42.0 * (1.0 - x2 / 40.0)))
    out[big] = 1.0 / lam[big]
    out[neg] = 1.0 + 1.0 / lam[neg]
    out[mid] = 1.0 / lam[mid] - 1.0 / np.expm1(lam[mid])
    return out if out.ndim else float(out)


def bernoulli(lam):
    """``lambda / (exp(lambda) - 1)`` with the removable singularity filled in.

    ``bernoulli(-lam) == bernoulli(lam) * exp(lam)``, which is how products
    like ``alpha * exp(lambda)`` are formed without overflow.
    """
    lam = np.asarray(lam, dtype=float)
    out = np.empty_like(lam)
    small = np.abs(lam) <= _SERIES_CUTOFF
    x = lam[small]
    x2 = x * x
    out[small] = 1.0 - x / 2.0 + x2 / 12.0 * (1.0 - x2 / 60.0 * (1.0 - x2 / 42.0))
    rest = ~small
    with np.errstate(over="ignore"):
        out[rest] = lam[rest] / np.expm1(lam[rest])
    return out if out.ndim else float(out)


def compute_coefficients(f: np.ndarray, grid: Grid1D, model: Model1D, rule: QuadratureRule) -> InterfaceCoefficients:
    """Interface coefficients for the current state ``f``.

    ``B[f]`` is frozen at ``f`` and integrated over each cell with ``rule``.
    """
    drift = model.drift(f, grid)
    w = grid.nodes
    try:
        lam = lambda_weights(rule, drift, model.diffusion, model.diffusion_prime, w[:-1], w[1:])
    except SingularIntegrandError as exc:
        raise SingularIntegrandError(
            f"cell exponent undefined at interface {exc.interface}: {exc}",
            abscissa=exc.abscissa,
            interface=exc.interface,
        ) from exc
    d_face = model.diffusion(grid.midpoints)
    return InterfaceCoefficients.from_lambda(lam, d_face, grid.dw)


def as_column(a: np.ndarray, ndim: int) -> np.ndarray:
    """Append singleton axes so ``a`` broadcasts against an ``ndim`` array along axis 0."""
    a = np.asarray(a)
    return a.reshape(a.shape + (1,) * (ndim - a.ndim))


def fluxes(f: np.ndarray, coeffs: InterfaceCoefficients) -> np.ndarray:
    """All interior interface fluxes along axis 0 of ``f``.

    Trailing axes of ``f`` are independent problems; coefficient arrays may be
    shared (shape ``(N,)``) or per problem (shape ``(N, ...)``).

    Evaluated as ``(D/dw) (bernoulli(-lam) f[i+1] - bernoulli(lam) f[i])``,
    which is the ``delta`` / ``C`` flux with its terms collected.  The
    collected form never subtracts two large terms, which matters at
    degenerate cells where ``|lam|`` runs into the thousands.
    """
    f = np.asarray(f, dtype=float)
    d = as_column(coeffs.d_face, f.ndim) / coeffs.dw
    wr = as_column(coeffs.weight_right, f.ndim)
    wl = as_column(coeffs.weight_left, f.ndim)
    return d * (wr * f[1:] - wl * f[:-1])


def flux(f: np.ndarray, coeffs: InterfaceCoefficients, i: int) -> float:
    if not 0 <= i < len(coeffs):
        raise IndexError(f"interface index {i} outside 0..{len(coeffs) - 1}")
    return float(coeffs.d_face[i] / coeffs.dw * (coeffs.weight_right[i] * f[i + 1] - coeffs.weight_left[i] * f[i]))


def flux_delta_form(f: np.ndarray, coeffs: InterfaceCoefficients) -> np.ndarray:
    """The same fluxes written with ``delta`` and ``C`` (for comparison)."""
    f = np.asarray(f, dtype=float)
    c = as_column(coeffs.c_tilde, f.ndim)
    d = as_column(coeffs.delta, f.ndim)
    dface = as_column(coeffs.d_face, f.ndim)
    return c * ((1.0 - d) * f[1:] + d * f[:-1]) + dface * (f[1:] - f[:-1]) / coeffs.dw


def divergence(face_flux: np.ndarray, dw: float) -> np.ndarray:
    """``(F_{i+1/2} - F_{i-1/2}) / dw`` with zero flux beyond both ends (axis 0)."""
    pad = [(1, 1)] + [(0, 0)] * (face_flux.ndim - 1)
    padded = np.pad(face_flux, pad)
    return np.diff(padded, axis=0) / dw


def rhs(f: np.ndarray, coeffs: InterfaceCoefficients) -> np.ndarray:
    return divergence(fluxes(f, coeffs), coeffs.dw)


def steady_ratio(coeffs: InterfaceCoefficients, i: int) -> float:
    """Discrete steady ratio ``f_{i+1} / f_i = exp(-lambda_{i+1/2})``."""
    with np.errstate(over="ignore", under="ignore"):
        return float(np.exp(-coeffs.lam[i]))


def log_steady_profile(lam: np.ndarray) -> np.ndarray:
    """``log f`` of the zero-flux profile along axis 0, zero at its maximum.

    The partial sums are restarted from the maximum so that the huge
    exponents of degenerate boundary cells do not pollute interior values.
    """
    lam = np.asarray(lam, dtype=float)
    zero = np.zeros((1,) + lam.shape[1:])
    crude = np.concatenate([zero, -np.cumsum(lam, axis=0)])
    peak = np.argmax(crude, axis=0)
    if lam.ndim == 1:
        k = int(peak)
        right = -np.cumsum(lam[k:])
        left = np.cumsum(lam[:k][::-1])[::-1]
        return np.concatenate([left, [0.0], right])
    return np.stack(
        [log_steady_profile(col) for col in lam.reshape(lam.shape[0], -1).T], axis=-1
    ).reshape(crude.shape)


def discrete_steady_state(coeffs: InterfaceCoefficients) -> tuple[np.ndarray, np.ndarray]:
    """Unit-mass zero-flux profile for frozen coefficients.

    Returns ``(f, log_f)``; ``log_f`` stays finite where ``f`` underflows.
    """
    logf = log_steady_profile(coeffs.lam)
    with np.errstate(under="ignore"):
        f = np.exp(logf)
    scale = coeffs.dw * f.sum()
    return f / scale, logf - np.log(scale)


@dataclass(frozen=True)
class FPProblem:
    """A 1D homogeneous mean-field problem ready for time stepping."""

    grid: Grid1D
    model: Model1D
    rule: QuadratureRule

    def coefficients(self, f: np.ndarray) -> InterfaceCoefficients:
        return compute_coefficients(f, self.grid, self.model, self.rule)

    def rhs(self, f: np.ndarray) -> np.ndarray:
        return rhs(f, self.coefficients(f))
