"""Drift functionals, diffusion coefficients and steady states of the four models.

All nonlocal integrals are rectangle sums over nodal values, matching the
nodal mass convention ``mass = dw * sum(f)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .grid import Grid1D, Grid2D


def _mass(f: np.ndarray, dw: float) -> float:
    return float(dw * np.sum(f))


# --------------------------------------------------------------------------
# Opinion model on [-1, 1]: B[f] = w - u, D = sigma2/2 (1 - w^2)^2
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class OpinionModel:
    """Opinion consensus model with ``u`` the current mean opinion.

    Passing ``frozen_u`` turns it into the linear prototype with a fixed
    target opinion, for which the entropy identity holds exactly.
    """

    sigma2: float
    frozen_u: float | None = None

    def __post_init__(self) -> None:
        if self.sigma2 <= 0:
            raise ValueError("sigma2 must be positive")
        if self.frozen_u is not None and not -1.0 < self.frozen_u < 1.0:
            raise ValueError("frozen_u must lie in (-1, 1)")

    name = "opinion"
    domain = (-1.0, 1.0)

    def mean_opinion(self, f: np.ndarray, grid: Grid1D) -> float:
        if self.frozen_u is not None:
            return self.frozen_u
        return opinion_drift(f, grid)[0]

    def drift(self, f, grid):
        u = self.mean_opinion(f, grid)
        return lambda w: w - u

    def diffusion(self, w):
        return 0.5 * self.sigma2 * (1.0 - w * w) ** 2

    def diffusion_prime(self, w):
        return -2.0 * self.sigma2 * w * (1.0 - w * w)


def opinion_drift(f: np.ndarray, grid: Grid1D):
    """Mean opinion ``u`` and the drift ``B(w) = w - u``."""
    m0 = _mass(f, grid.dw)
    if not m0 > 0.0:
        raise ValueError("opinion drift needs positive mass")
    u = float(grid.dw * np.dot(grid.nodes, f) / m0)
    return u, (lambda w: w - u)


def opinion_log_steady_state(m_bar: float, sigma2: float, w: np.ndarray) -> np.ndarray:
    """Unnormalised ``log f_inf`` of the opinion model; ``-inf`` at w = +-1.

    Zero-flux profile of ``B = w - m_bar`` with ``D = sigma2/2 (1 - w^2)^2``;
    the power-law exponents carry ``m_bar / (2 sigma2)``.
    """
    w = np.asarray(w, dtype=float)
    out = np.full(w.shape, -np.inf)
    inside = np.abs(w) < 1.0
    x = w[inside]
    k = 0.5 * m_bar / sigma2
    out[inside] = (
        (-2.0 + k) * np.log1p(x)
        + (-2.0 - k) * np.log1p(-x)
        - (1.0 - m_bar * x) / (sigma2 * (1.0 - x * x))
    )
    return out


def opinion_steady_state(m_bar: float, sigma2: float, grid: Grid1D) -> np.ndarray:
    """Analytic steady state at the nodes, normalised to unit discrete mass."""
    if not abs(m_bar) < 1.0:
        raise ValueError("|m_bar| must be < 1")
    logf = opinion_log_steady_state(m_bar, sigma2, grid.nodes)
    with np.errstate(under="ignore"):
        f = np.exp(logf - logf.max())
    return f / _mass(f, grid.dw)


def initial_two_bumps(grid: Grid1D, c: float = 30.0) -> np.ndarray:
    """Two Gaussian bumps at -1/2 and 1/2 with unit discrete mass."""
    w = grid.nodes
    f = np.exp(-c * (w + 0.5) ** 2) + np.exp(-c * (w - 0.5) ** 2)
    return f / _mass(f, grid.dw)


# --------------------------------------------------------------------------
# Homogeneous wealth model on (0, w_max]: B = w - m, D = sigma2/2 w^2
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class WealthModel:
    """Homogeneous wealth exchange model.

    ``mean_wealth`` fixes the conserved mean of the untruncated problem; with
    ``None`` it is recomputed from the state (not conserved once the domain
    is truncated, so the long-time state drifts).
    """

    sigma2: float
    w_max: float = 10.0
    mean_wealth: float | None = 1.0

    name = "wealth"

    def __post_init__(self) -> None:
        if self.sigma2 <= 0 or self.w_max <= 0:
            raise ValueError("sigma2 and w_max must be positive")

    @property
    def pareto_exponent(self) -> float:
        return 1.0 + 2.0 / self.sigma2

    def grid(self, n_nodes: int) -> Grid1D:
        """Grid on ``[dw, w_max]`` with ``dw = w_max / n_nodes``."""
        dw = self.w_max / n_nodes
        return Grid1D(dw, self.w_max, n_nodes)

    def drift(self, f, grid):
        if self.mean_wealth is not None:
            m = self.mean_wealth
            return lambda w: w - m
        m0 = _mass(f, grid.dw)
        m1 = float(grid.dw * np.dot(grid.nodes, f))
        return lambda w: m0 * w - m1

    def diffusion(self, w):
        return 0.5 * self.sigma2 * w * w

    def diffusion_prime(self, w):
        return self.sigma2 * w


def wealth_steady_state(sigma2: float, grid: Grid1D) -> np.ndarray:
    """Inverse-gamma profile with Pareto exponent ``1 + 2/sigma2`` and unit mean."""
    w = grid.nodes
    if np.any(w <= 0):
        raise ValueError("wealth grid must exclude w <= 0")
    mu = 1.0 + 2.0 / sigma2
    logf = mu * math.log(mu - 1.0) - math.lgamma(mu) - (1.0 + mu) * np.log(w) - (mu - 1.0) / w
    with np.errstate(under="ignore"):
        return np.exp(logf)


def initial_wealth(grid: Grid1D, mean: float = 1.0, width: float = 0.3) -> np.ndarray:
    """Gaussian wealth profile around ``mean`` with unit discrete mass."""
    f = np.exp(-0.5 * ((grid.nodes - mean) / width) ** 2)
    return f / _mass(f, grid.dw)


# --------------------------------------------------------------------------
# Cucker-Smale flocking: f[i, j] at (x_i, w_j)
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class CuckerSmaleModel:
    gamma: float = 0.1
    diffusion_const: float = 0.1

    name = "cucker-smale"

    def __post_init__(self) -> None:
        if self.gamma < 0 or self.diffusion_const <= 0:
            raise ValueError("need gamma >= 0 and positive diffusion")

    def kernel(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        """Communication weight ``H(x, y) = (1 + (x - y)^2)^(-gamma)``."""
        return (1.0 + (np.subtract.outer(x, y)) ** 2) ** (-self.gamma)

    def alignment_moments(self, f: np.ndarray, grid: Grid2D) -> tuple[np.ndarray, np.ndarray]:
        """``(A_i, C_i)`` such that ``B(x_i, w) = A_i w - C_i``."""
        x, w = grid.axis_w, grid.axis_v
        m0 = w.dw * f.sum(axis=1)
        m1 = w.dw * (f @ w.nodes)
        h = self.kernel(x.nodes, x.nodes)
        return x.dw * (h @ m0), x.dw * (h @ m1)

    def diffusion(self, w):
        return np.full(np.shape(w), self.diffusion_const)

    def diffusion_prime(self, w):
        return np.zeros(np.shape(w))


def cs_drift(f: np.ndarray, grid: Grid2D, model: CuckerSmaleModel) -> np.ndarray:
    """Nodal alignment drift ``B(x_i, w_j)`` (double rectangle sum)."""
    a, c = model.alignment_moments(f, grid)
    return np.outer(a, grid.axis_v.nodes) - c[:, None]


@dataclass(frozen=True)
class VelocityAlignment:
    """Velocity-space part of the flocking model as a batch of 1D problems.

    The state is ``f.T`` (velocity along axis 0, one column per position),
    which is the layout the 1D scheme and the tridiagonal solver expect.
    """

    model: CuckerSmaleModel
    grid: Grid2D

    def drift(self, f_t, grid):
        a, c = self.model.alignment_moments(np.asarray(f_t).T, self.grid)
        return lambda w: a * w[..., None] - c

    def diffusion(self, w):
        return self.model.diffusion(w)

    def diffusion_prime(self, w):
        return self.model.diffusion_prime(w)


def initial_flocking(grid: Grid2D, velocity: float = 1.5, x_width: float = 0.5, w_width: float = 0.3) -> np.ndarray:
    """Population centred at x = 0 split between velocities ``+-velocity``."""
    x, w = grid.mesh()
    f = np.exp(-0.5 * (x / x_width) ** 2) * (
        np.exp(-0.5 * ((w - velocity) / w_width) ** 2) + np.exp(-0.5 * ((w + velocity) / w_width) ** 2)
    )
    return f / (grid.cell_area * f.sum())


# --------------------------------------------------------------------------
# Opinion dynamics on networks: f[x, l] with x in 0..c_max, w_l in [-1, 1]
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class NetworkModel:
    c_max: int = 250
    sigma2: float = 1e-3
    d0: float = 1.01
    alpha: float = 0.1
    beta: float = 0.0
    v_r: float = 1.0
    v_a: float = 1.0

    name = "network"

    def __post_init__(self) -> None:
        if self.c_max < 1 or self.sigma2 <= 0 or self.alpha <= 0 or self.beta < 0:
            raise ValueError("invalid network parameters")
        if self.v_r < 0 or self.v_a < 0 or self.d0 < 0:
            raise ValueError("rates and confidence scale must be nonnegative")

    @property
    def levels(self) -> np.ndarray:
        return np.arange(self.c_max + 1)

    def confidence(self) -> np.ndarray:
        """Confidence radius per connectivity level."""
        return self.d0 * self.levels / self.c_max

    def diffusion(self, w):
        return 0.5 * self.sigma2 * (1.0 - w * w) ** 2

    def diffusion_prime(self, w):
        return -2.0 * self.sigma2 * w * (1.0 - w * w)

    def transition_rates(self, gamma_t: float) -> tuple[np.ndarray, np.ndarray]:
        """Per-level rates ``(down, up)`` with transitions out of range disabled."""
        x = self.levels.astype(float)
        down = 2.0 * self.v_r * (x + self.beta) / (gamma_t + self.beta)
        up = 2.0 * self.v_a * (x + self.alpha) / (gamma_t + self.alpha)
        down[0] = 0.0
        up[-1] = 0.0
        return down, up


def network_drift_at(f: np.ndarray, grid: Grid1D, radius: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Bounded-confidence drift evaluated at arbitrary opinions.

    ``radius`` holds one confidence radius per level; ``w`` has shape
    ``(..., n_levels)`` so each level is sampled at its own points.  The
    interaction sums over the opinion marginal of all levels.
    """
    v = grid.nodes
    g = grid.dw * f.sum(axis=0)
    c0 = np.concatenate([[0.0], np.cumsum(g)])
    c1 = np.concatenate([[0.0], np.cumsum(g * v)])
    # |w - v_l| <= r  <=>  v_l in [w - r, w + r]; tolerance keeps node-exact ties inside.
    tol = 1e-12 * grid.dw
    lo = np.searchsorted(v, w - radius - tol, side="left")
    hi = np.searchsorted(v, w + radius + tol, side="right")
    out = w * (c0[hi] - c0[lo]) - (c1[hi] - c1[lo])
    # A zero radius only ever sees the target itself; keep that exactly zero.
    return np.where(radius > 0, out, 0.0)


def network_drift(f: np.ndarray, grid: Grid1D, model: NetworkModel) -> np.ndarray:
    """Nodal drift ``B(x, w_l)``, shape ``(c_max + 1, n_nodes)``."""
    radius = model.confidence()
    w = np.broadcast_to(grid.nodes[:, None], (grid.n_nodes, radius.size))
    return network_drift_at(f, grid, radius, w).T


@dataclass(frozen=True)
class NetworkOpinionFP:
    """Opinion dynamics of all connectivity levels as a batch of 1D problems.

    The state is ``f.T`` with shape ``(n_nodes, c_max + 1)``.
    """

    model: NetworkModel

    def drift(self, f_t, grid):
        f = np.asarray(f_t).T
        radius = self.model.confidence()
        return lambda w: network_drift_at(f, grid, radius, np.broadcast_to(w[..., None], w.shape + radius.shape))

    def diffusion(self, w):
        return self.model.diffusion(w)

    def diffusion_prime(self, w):
        return self.model.diffusion_prime(w)


def network_L(f: np.ndarray, model: NetworkModel, gamma_t: float) -> np.ndarray:
    """Connection operator ``L[f]``; the evolution is ``df/dt = -L[f] + ...``."""
    if not gamma_t > 0:
        raise ValueError("mean connectivity must be positive")
    down, up = model.transition_rates(gamma_t)
    loss = (down + up)[:, None] * f
    gain = np.zeros_like(f)
    gain[:-1] += down[1:, None] * f[1:]
    gain[1:] += up[:-1, None] * f[:-1]
    return loss - gain


def gamma_mean_connectivity(f: np.ndarray, grid: Grid1D) -> float:
    """Mean connectivity ``sum_x x * int f(x, w) dw``."""
    x = np.arange(f.shape[0])
    return float(grid.dw * np.dot(x, f.sum(axis=1)))


def power_law_connectivity(c_max: int, mean: float = 30.0, exponent: float = 3.0) -> np.ndarray:
    """Shifted power law ``p(x) ~ (x + s)^-exponent`` on 0..c_max with the given mean."""
    x = np.arange(c_max + 1, dtype=float)

    def profile(s: float) -> np.ndarray:
        p = (x + s) ** (-exponent)
        return p / p.sum()

    if not 0.0 < mean < c_max / 2:
        raise ValueError("target mean connectivity out of reach of a decaying power law")
    s = brentq(lambda s: np.dot(x, profile(s)) - mean, 1e-8, 1e8, xtol=1e-14, rtol=1e-15)
    return profile(s)


def initial_network(grid: Grid1D, model: NetworkModel, gamma0: float = 30.0) -> np.ndarray:
    """Uniform opinions times a power-law connectivity profile, unit total mass."""
    p = power_law_connectivity(model.c_max, gamma0)
    f = np.outer(p, np.ones(grid.n_nodes))
    return f / _mass(f, grid.dw)
