"""Observables of a run and checks of the discrete entropy structure.

Steady states enter the entropy quantities through ``log f_inf`` so that
profiles spanning hundreds of orders of magnitude (degenerate diffusion at
the boundary) stay representable.  For a frozen drift, the discrete steady
state returned by :func:`ccfp.fpcore.discrete_steady_state` is the profile
with respect to which the scheme dissipates entropy.
"""

from __future__ import annotations

import logging
import math
from dataclasses import astuple, dataclass, fields

import numpy as np

from .fpcore import InterfaceCoefficients, as_column, bernoulli, discrete_steady_state, fluxes
from .grid import Grid1D, Grid2D

log = logging.getLogger(__name__)

UNDERFLOW = 1e-300


class SupportError(ValueError):
    """A quantity is undefined because ``f`` and the reference disagree on support."""


def mass(f: np.ndarray, grid: Grid1D | Grid2D) -> float:
    """Nodal sum times the cell size (``dw`` in 1D, ``dw * dv`` in 2D)."""
    cell = grid.cell_area if isinstance(grid, Grid2D) else grid.dw
    return float(cell * np.sum(f))


def mean(f: np.ndarray, grid: Grid1D) -> float:
    m0 = np.sum(f)
    if m0 == 0.0:
        return math.nan
    return float(np.dot(grid.nodes, f) / m0)


def _log_reference(f_inf: np.ndarray | None, log_f_inf: np.ndarray | None) -> np.ndarray:
    """``log f_inf`` with underflowed nodes marked ``-inf``."""
    if log_f_inf is not None:
        return np.asarray(log_f_inf, dtype=float)
    f_inf = np.asarray(f_inf, dtype=float)
    if np.any(f_inf < 0):
        raise ValueError("reference profile has negative values")
    logr = np.full(f_inf.shape, -np.inf)
    keep = f_inf > UNDERFLOW
    logr[keep] = np.log(f_inf[keep])
    return logr


def relative_entropy(
    f: np.ndarray, f_inf: np.ndarray | None, dw: float, *, log_f_inf: np.ndarray | None = None
) -> float:
    """``dw * sum f log(f / f_inf)``.

    Nodes where the reference underflows (below ``1e-300``, or ``-inf`` in
    ``log_f_inf``) are skipped, with a warning if ``f`` carries
    non-negligible mass there.  Nodes with ``f == 0`` contribute zero.
    """
    f = np.asarray(f, dtype=float)
    if np.any(f < 0):
        raise ValueError("relative entropy needs f >= 0")
    logr = _log_reference(f_inf, log_f_inf)
    dropped = ~np.isfinite(logr)
    if dropped.any():
        lost = float(np.sum(f[dropped]))
        if lost > 1e-12 * float(np.sum(f)):
            log.warning(
                "relative entropy skipped %d nodes holding mass %.3e where the reference vanishes",
                int(np.count_nonzero(dropped)),
                dw * lost,
            )
        else:
            log.debug("relative entropy skipped %d underflowed nodes", int(np.count_nonzero(dropped)))
    use = ~dropped & (f > 0)
    return float(dw * np.sum(f[use] * (np.log(f[use]) - logr[use])))


def skipped_nodes(f_inf: np.ndarray) -> int:
    """Number of nodes the entropy ignores because the reference underflows."""
    return int(np.count_nonzero(~(np.asarray(f_inf) > UNDERFLOW)))


def log_mean_steady(a, b):
    """``a b log(b / a) / (b - a)``, continuous across ``a == b``.

    Written as ``a * x / (1 - exp(-x))`` with ``x = log(b / a)``.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if np.any(~(a > 0)) or np.any(~(b > 0)):
        raise ValueError("log mean needs positive arguments")
    out = a * bernoulli(-np.log(b / a))
    return out if out.ndim else float(out)


def _log_mean_factors(log_f_inf: np.ndarray, ndim: int) -> tuple[np.ndarray, np.ndarray]:
    """``(fhat / f_inf[i+1], fhat / f_inf[i])`` per interface from log values."""
    step = np.diff(np.asarray(log_f_inf, dtype=float), axis=0)
    step = as_column(step, ndim)
    return bernoulli(step), bernoulli(-step)


def log_mean_flux(f: np.ndarray, log_f_inf: np.ndarray, coeffs: InterfaceCoefficients) -> tuple[np.ndarray, np.ndarray]:
    """Interface fluxes in log-mean form and the size of their two terms.

    ``(D / dw) * fhat * (f[i+1] / f_inf[i+1] - f[i] / f_inf[i])`` with
    ``fhat`` the log mean of neighbouring steady values.  Returns
    ``(flux, scale)`` where ``scale`` is the sum of the magnitudes of the two
    terms, a natural yardstick for round-off.
    """
    f = np.asarray(f, dtype=float)
    right, left = _log_mean_factors(log_f_inf, f.ndim)
    d = as_column(coeffs.d_face, f.ndim) / coeffs.dw
    t1 = d * right * f[1:]
    t0 = d * left * f[:-1]
    return t1 - t0, np.abs(t1) + np.abs(t0)


def flux_identity_deviation(f: np.ndarray, log_f_inf: np.ndarray, coeffs: InterfaceCoefficients) -> float:
    """Largest relative gap between the direct flux and its log-mean form.

    Terms in the subnormal range carry no relative precision, so the
    yardstick is floored at the smallest normal double.
    """
    direct = fluxes(f, coeffs)
    other, scale = log_mean_flux(f, log_f_inf, coeffs)
    gap = np.abs(direct - other)
    nz = scale > 0
    if np.any(gap[~nz] > 0):
        return math.inf
    floor = np.finfo(float).tiny
    return float(np.max(gap[nz] / np.maximum(scale[nz], floor), initial=0.0))


def dissipation_terms(f: np.ndarray, log_f_inf: np.ndarray, coeffs: InterfaceCoefficients) -> np.ndarray:
    """Per-interface summands of the discrete entropy dissipation.

    ``(D/dw) fhat (r[i+1] - r[i]) (log r[i+1] - log r[i])`` with
    ``r = f / f_inf``.  Interfaces where the flux factor vanishes contribute
    zero even if ``f`` is zero on one side; a vacuum node next to a nonzero
    flux gives ``+inf``, the limit of ``(x - y) log(x / y)``.
    """
    f = np.asarray(f, dtype=float)
    if np.any(f < 0):
        raise ValueError("dissipation needs f >= 0")
    flux, _ = log_mean_flux(f, log_f_inf, coeffs)
    with np.errstate(divide="ignore", invalid="ignore"):
        logf = np.log(f)
        dlog = np.diff(logf, axis=0) - as_column(np.diff(np.asarray(log_f_inf, dtype=float), axis=0), f.ndim)
        out = flux * dlog
    out[flux == 0.0] = 0.0
    if np.any(np.isnan(out)):
        raise SupportError("dissipation undefined: f vanishes where the flux does not")
    return out


def discrete_dissipation(f: np.ndarray, log_f_inf: np.ndarray, coeffs: InterfaceCoefficients) -> float:
    """Entropy dissipation; ``dH/dt = -I`` along the semi-discrete flow."""
    return float(np.sum(dissipation_terms(f, log_f_inf, coeffs)))


def entropy_balance_check(
    f_prev: np.ndarray,
    f_next: np.ndarray,
    log_f_inf: np.ndarray,
    coeffs: InterfaceCoefficients,
    dt: float,
) -> float:
    """``|(H(f_next) - H(f_prev)) / dt + (I(f_prev) + I(f_next)) / 2|``.

    The trapezoidal average makes the estimator itself second order, so the
    residual shrinks at the order of the integrator that produced
    ``f_next`` (up to two).
    """
    dw = coeffs.dw
    dh = relative_entropy(f_next, None, dw, log_f_inf=log_f_inf) - relative_entropy(
        f_prev, None, dw, log_f_inf=log_f_inf
    )
    i_avg = 0.5 * (discrete_dissipation(f_prev, log_f_inf, coeffs) + discrete_dissipation(f_next, log_f_inf, coeffs))
    return abs(dh / dt + i_avg)


def l1_relative_error(f: np.ndarray, f_ref: np.ndarray) -> float:
    ref = np.abs(np.asarray(f_ref, dtype=float)).sum()
    if ref == 0.0:
        raise ValueError("reference has zero L1 norm")
    return float(np.abs(np.asarray(f, dtype=float) - f_ref).sum() / ref)


def observed_order(err_coarse: float, err_fine: float, refinement: float = 2.0) -> float:
    """``log(err_coarse / err_fine) / log(refinement)``."""
    if not (err_coarse > 0 and err_fine > 0):
        raise ValueError("errors must be positive")
    if not refinement > 1:
        raise ValueError("refinement must exceed 1")
    return math.log(err_coarse / err_fine) / math.log(refinement)


def fitted_order(spacings, errors) -> float:
    """Least-squares slope of ``log error`` against ``log spacing``."""
    h = np.log(np.asarray(spacings, dtype=float))
    e = np.asarray(errors, dtype=float)
    if np.any(~(e > 0)):
        raise ValueError("errors must be positive")
    return float(np.polyfit(h, np.log(e), 1)[0])


@dataclass(frozen=True)
class DiagnosticsRecord:
    t: float
    mass: float
    mean: float
    l1_err: float
    entropy: float
    dissipation: float

    @classmethod
    def header(cls) -> list[str]:
        return [f.name for f in fields(cls)]

    def row(self) -> tuple[float, ...]:
        return astuple(self)


def diagnose(
    t: float, f: np.ndarray, grid: Grid1D, coeffs: InterfaceCoefficients, f_ref: np.ndarray | None = None
) -> DiagnosticsRecord:
    """Snapshot of a 1D state.

    Entropy and dissipation are taken relative to the discrete steady state
    of the current coefficients, scaled to the mass of ``f``.
    """
    m = mass(f, grid)
    _, logs = discrete_steady_state(coeffs)
    if m > 0:
        logs = logs + math.log(m)
        h = relative_entropy(f, None, grid.dw, log_f_inf=logs)
        i = discrete_dissipation(f, logs, coeffs)
    else:
        h = i = math.nan
    err = l1_relative_error(f, f_ref) if f_ref is not None else math.nan
    return DiagnosticsRecord(float(t), m, mean(f, grid), err, h, i)
