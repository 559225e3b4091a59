"""Experiment drivers shared by the command line and the acceptance tests.

Drivers return plain data; writing files is left to :mod:`ccfp.cli`.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.signal import find_peaks

from . import diagnostics as dg
from .config import RunConfig
from .fpcore import FPProblem, discrete_steady_state
from .grid import Grid1D, Grid2D
from .integrators import TimeStepper, assemble_semi_implicit, cfl_semi_implicit, solve_tridiagonal
from .models import (
    CuckerSmaleModel,
    NetworkModel,
    NetworkOpinionFP,
    OpinionModel,
    VelocityAlignment,
    WealthModel,
    gamma_mean_connectivity,
    initial_flocking,
    initial_network,
    initial_two_bumps,
    initial_wealth,
    network_L,
    opinion_steady_state,
    wealth_steady_state,
)
from .quadrature import QuadratureRule
from .transport import AdvectionField, periodic_grid, strang_step

log = logging.getLogger(__name__)

Callback = Callable[[int, float, np.ndarray], None]


# --------------------------------------------------------------------------
# 1D set-up
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Setup1D:
    grid: Grid1D
    problem: FPProblem
    f0: np.ndarray
    reference: np.ndarray | None


def opinion_setup(
    sigma2: float, n: int, rule: QuadratureRule, *, frozen_u: float | None = None, c: float = 30.0
) -> Setup1D:
    """Two-bump start on [-1, 1]; the reference is the analytic steady state."""
    grid = Grid1D(-1.0, 1.0, n)
    model = OpinionModel(sigma2, frozen_u)
    f0 = initial_two_bumps(grid, c)
    m_bar = frozen_u if frozen_u is not None else dg.mean(f0, grid)
    return Setup1D(grid, FPProblem(grid, model, rule), f0, opinion_steady_state(m_bar, sigma2, grid))


def wealth_setup(sigma2: float, n: int, rule: QuadratureRule, *, w_max: float = 10.0, width: float = 0.3) -> Setup1D:
    """Truncated wealth problem; the reference is the inverse-gamma profile
    renormalised to unit mass on the truncated grid."""
    model = WealthModel(sigma2, w_max)
    grid = model.grid(n)
    ref = wealth_steady_state(sigma2, grid)
    return Setup1D(grid, FPProblem(grid, model, rule), initial_wealth(grid, 1.0, width), ref / dg.mass(ref, grid))


def setup_from_config(cfg: RunConfig) -> Setup1D:
    rule = QuadratureRule.from_config(cfg.quadrature.kind, cfg.quadrature.points)
    params = cfg.model_params()
    if cfg.model_name == "opinion":
        return opinion_setup(
            params.get("sigma2", 0.2), cfg.grid.n, rule, frozen_u=params.get("frozen_u"), c=cfg.initial.get("c", 30.0)
        )
    if cfg.model_name == "wealth":
        return wealth_setup(
            params.get("sigma2", 1.0),
            cfg.grid.n,
            rule,
            w_max=params.get("w_max", 10.0),
            width=cfg.initial.get("width", 0.3),
        )
    raise ValueError(f"model {cfg.model_name!r} is not a one-dimensional model")


def advance(
    problem,
    f0: np.ndarray,
    kind: str,
    dt: float | str,
    checkpoints,
    callback: Callback | None = None,
) -> dict[float, np.ndarray]:
    """Integrate through increasing ``checkpoints`` and return the states there.

    Each segment gets its own step size so that every checkpoint is hit
    exactly; ``callback`` sees a global step counter.
    """
    f = np.array(f0, dtype=float)
    out: dict[float, np.ndarray] = {}
    t_prev, n_prev = 0.0, 0
    if callback is not None:
        callback(0, 0.0, f)
    for t in sorted(checkpoints):
        if t < t_prev:
            raise ValueError("checkpoints must be nonnegative")
        if t > t_prev:
            stepper = TimeStepper(kind, dt, t - t_prev)
            seg_dt = stepper.resolve_dt(problem, f)
            counter = [n_prev]

            def inner(n, s, state, _t0=t_prev, _n0=n_prev, _counter=counter):
                if n == 0:
                    return
                _counter[0] = _n0 + n
                if callback is not None:
                    callback(_n0 + n, _t0 + s, state)

            f = stepper.run(problem, f, inner, dt=seg_dt)
            n_prev = counter[0]
            t_prev = t
        out[t] = f.copy()
    return out


# --------------------------------------------------------------------------
# Convergence study
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class OrderRow:
    t: float
    quadrature: str
    reference: str
    n_coarse: int
    n_fine: int
    err_coarse: float
    err_fine: float
    order: float

    @property
    def pair(self) -> str:
        return f"{self.n_coarse}-{self.n_fine}"


@dataclass
class ConvergenceResult:
    errors: dict[tuple[str, str, float, int], float] = field(default_factory=dict)
    rows: list[OrderRow] = field(default_factory=list)
    negative_steps: dict[tuple[str, int], int] = field(default_factory=dict)

    def orders(self, quadrature: str, t: float, reference: str) -> list[float]:
        return [
            r.order for r in self.rows if r.quadrature == quadrature and r.t == t and r.reference == reference
        ]


def _refinement(n_coarse: int, n_fine: int) -> float:
    return (n_fine - 1) / (n_coarse - 1)


def convergence_study(
    sigma2: float,
    grids,
    times,
    quadratures,
    *,
    integrator: str = "rk4",
    gauss_points: int = 8,
    fine_n: int | None = 641,
    fine_times=(1.0,),
    fine_quadrature: str = "onc6",
    progress: Callable[[str], None] | None = None,
) -> ConvergenceResult:
    """Errors and observed orders of the opinion test on nested grids.

    Two references are used.  ``"steady"`` is the analytic steady state,
    the meaningful target once the transient has decayed.  ``"fine"`` is
    the solution on a finer nested grid at the same time, needed while the
    solution is still far from equilibrium (there the steady reference
    would only measure the distance to equilibrium).
    """
    grids = sorted(grids)
    times = sorted(times)
    fine_times = sorted(t for t in fine_times if t in times) if fine_n else []
    result = ConvergenceResult()
    fine_states: dict[float, np.ndarray] = {}
    if fine_times:
        for n in grids:
            if (fine_n - 1) % (n - 1):
                raise ValueError(f"fine grid {fine_n} is not nested with {n}")
        ref_setup = opinion_setup(sigma2, fine_n, QuadratureRule.from_config(fine_quadrature, gauss_points))
        if progress:
            progress(f"fine reference N={fine_n} ({fine_quadrature})")
        fine_states = advance(ref_setup.problem, ref_setup.f0, integrator, "auto", fine_times)

    for q in quadratures:
        rule = QuadratureRule.from_config(q, gauss_points)
        for n in grids:
            if progress:
                progress(f"{q} N={n}")
            s = opinion_setup(sigma2, n, rule)
            negatives = [0]

            def count(_n, _t, f, _neg=negatives):
                if np.any(f < 0):
                    _neg[0] += 1

            states = advance(s.problem, s.f0, integrator, "auto", times, count)
            result.negative_steps[(q, n)] = negatives[0]
            for t, f in states.items():
                result.errors[(q, "steady", t, n)] = dg.l1_relative_error(f, s.reference)
                if t in fine_states:
                    stride = (fine_n - 1) // (n - 1)
                    result.errors[(q, "fine", t, n)] = dg.l1_relative_error(f, fine_states[t][::stride])

    for (q, ref, t, n), err in sorted(result.errors.items(), key=lambda kv: (kv[0][2], quadratures.index(kv[0][0]), kv[0][1], kv[0][3])):
        i = grids.index(n)
        if i + 1 >= len(grids):
            continue
        n2 = grids[i + 1]
        err2 = result.errors[(q, ref, t, n2)]
        try:
            order = dg.observed_order(err, err2, _refinement(n, n2))
        except ValueError:
            order = math.nan
        if order == 0.0:
            log.warning("no error reduction for %s at T=%g between N=%d and N=%d", q, t, n, n2)
        result.rows.append(OrderRow(t, q, ref, n, n2, err, err2, order))
    return result


# --------------------------------------------------------------------------
# Entropy certification
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class EntropyRow:
    t: float
    entropy: float
    dissipation: float
    balance_residual: float
    flux_identity: float
    min_term: float


def entropy_run(setup: Setup1D, kind: str, dt: float | str, t_end: float, stride: int = 1) -> list[EntropyRow]:
    """Monitor entropy quantities of a frozen-drift run.

    The steady profile is the discrete one of the (state independent)
    coefficients, normalised to the initial mass.
    """
    coeffs = setup.problem.coefficients(setup.f0)
    _, log_ss = discrete_steady_state(coeffs)
    log_ss = log_ss + math.log(dg.mass(setup.f0, setup.grid))
    dw = setup.grid.dw
    rows: list[EntropyRow] = []
    prev: list[np.ndarray | None] = [None]
    dt_used: list[float] = [0.0]

    def row(t, f, residual):
        terms = dg.dissipation_terms(f, log_ss, coeffs)
        return EntropyRow(
            t,
            dg.relative_entropy(f, None, dw, log_f_inf=log_ss),
            float(terms.sum()),
            residual,
            dg.flux_identity_deviation(f, log_ss, coeffs),
            float(terms.min(initial=0.0)),
        )

    stepper = TimeStepper(kind, dt, t_end)
    step_dt = stepper.resolve_dt(setup.problem, setup.f0) if t_end > 0 else 0.0
    dt_used[0] = step_dt

    def cb(n, t, f):
        if n == 0:
            rows.append(row(t, f, 0.0))
        elif n % stride == 0 or abs(t - t_end) < 0.5 * step_dt:
            res = dg.entropy_balance_check(prev[0], f, log_ss, coeffs, step_dt)
            rows.append(row(t, f, res))
        prev[0] = f

    stepper.run(setup.problem, setup.f0, cb, dt=step_dt if t_end > 0 else None)
    return rows


# --------------------------------------------------------------------------
# Flocking (transport + velocity alignment, Strang splitting)
# --------------------------------------------------------------------------


@dataclass
class FlockingResult:
    grid: Grid2D
    times: list[float]
    mass: list[float]
    w_variance: list[float]
    x_deviation: list[float]
    snapshots: dict[float, np.ndarray]


def flocking_grid(cfg_x_min=-3.0, cfg_x_max=3.0, dx=0.06, w_min=-5.0, w_max=5.0, n_w=201) -> Grid2D:
    return Grid2D(periodic_grid(cfg_x_min, cfg_x_max, dx), Grid1D(w_min, w_max, n_w))


def _x_marginal_deviation(f: np.ndarray, grid: Grid2D, length: float) -> float:
    rho = grid.axis_v.dw * f.sum(axis=1)
    total = grid.axis_w.dw * rho.sum()
    return float(np.max(np.abs(rho - total / length)))


def _w_variance(f: np.ndarray, grid: Grid2D) -> float:
    g = f.sum(axis=0)
    w = grid.axis_v.nodes
    m0 = g.sum()
    mu = np.dot(w, g) / m0
    return float(np.dot((w - mu) ** 2, g) / m0)


def flocking_run(
    model: CuckerSmaleModel,
    grid: Grid2D,
    f0: np.ndarray,
    t_end: float,
    *,
    rule: QuadratureRule | None = None,
    cfl: float = 0.25,
    snapshot_times=(),
    stride: int = 1,
) -> FlockingResult:
    """Strang splitting: half alignment step, full transport step, half alignment step.

    Transport uses WENO3 with SSPRK2, alignment the semi-implicit scheme
    (one tridiagonal solve per x column).  The step obeys
    ``dt = cfl * dx / max|w|`` and is shortened to land on every snapshot
    time; alignment half steps are sub-cycled if they would exceed the
    semi-implicit positivity bound.
    """
    rule = rule or QuadratureRule.from_config("gauss")
    xg, wg = grid.axis_w, grid.axis_v
    length = xg.n_nodes * xg.dw
    fp = FPProblem(wg, VelocityAlignment(model, grid), rule)
    adv = AdvectionField(wg.nodes, xg)
    dt_max = adv.max_dt(cfl)

    def fp_half(f, h):
        g = f.T
        m = max(1, math.ceil(h / cfl_semi_implicit(fp.coefficients(g), wg.dw)))
        for _ in range(m):
            g = solve_tridiagonal(assemble_semi_implicit(g, fp.coefficients(g), h / m))
        return g.T

    f = np.array(f0, dtype=float)
    res = FlockingResult(grid, [], [], [], [], {})

    def record(t, f):
        res.times.append(t)
        res.mass.append(dg.mass(f, grid))
        res.w_variance.append(_w_variance(f, grid))
        res.x_deviation.append(_x_marginal_deviation(f, grid, length))

    stops = sorted(set(float(s) for s in snapshot_times if 0 <= s <= t_end) | {float(t_end)})
    t, n = 0.0, 0
    record(0.0, f)
    if 0.0 in stops:
        res.snapshots[0.0] = f.copy()
    for stop in stops:
        if stop <= t:
            continue
        steps = math.ceil((stop - t) / dt_max - 1e-12)
        dt = (stop - t) / steps
        for k in range(1, steps + 1):
            f = strang_step(lambda s: fp_half(s, 0.5 * dt), lambda s: adv.step(s, dt), f)
            n += 1
            tk = t + k * dt
            if n % stride == 0 or k == steps:
                record(tk, f)
        t = stop
        if stop in snapshot_times:
            res.snapshots[stop] = f.copy()
    return res


# --------------------------------------------------------------------------
# Opinion dynamics on networks
# --------------------------------------------------------------------------


@dataclass
class NetworkResult:
    grid: Grid1D
    model: NetworkModel
    times: list[float]
    mass: list[float]
    gamma: list[float]
    l_column_defect: list[float]
    snapshots: dict[float, np.ndarray]
    steps: int = 0


def network_run(
    model: NetworkModel,
    grid: Grid1D,
    t_end: float,
    *,
    gamma0: float = 30.0,
    rule: QuadratureRule | None = None,
    snapshot_times=(),
    safety: float = 0.9,
    stride: int = 10,
) -> NetworkResult:
    """Strang splitting of the connection operator and the opinion dynamics.

    Half steps of forward Euler on ``-L`` (with ``gamma(t)`` refreshed at
    each half step) wrap one semi-implicit Fokker-Planck step per
    connectivity level.  The step is ``safety`` times the smaller of the
    semi-implicit bound and ``1 / max(rate sum)``.
    """
    rule = rule or QuadratureRule.from_config("midpoint")
    fp = FPProblem(grid, NetworkOpinionFP(model), rule)
    f = initial_network(grid, model, gamma0)
    res = NetworkResult(grid, model, [], [], [], [], {})

    def l_half(f, h):
        lf = network_L(f, model, gamma_mean_connectivity(f, grid))
        res.l_column_defect.append(float(np.max(np.abs(lf.sum(axis=0))) / max(np.max(np.abs(lf)), 1e-300)))
        return f - h * lf

    def record(t, f):
        res.times.append(t)
        res.mass.append(dg.mass(f, grid))
        res.gamma.append(gamma_mean_connectivity(f, grid))

    stops = sorted(set(float(s) for s in snapshot_times if 0 <= s <= t_end) | {float(t_end)})
    t, n = 0.0, 0
    record(t, f)
    if 0.0 in snapshot_times:
        res.snapshots[0.0] = f.copy()
    for stop in stops:
        while t < stop - 1e-12:
            down, up = model.transition_rates(gamma_mean_connectivity(f, grid))
            coeffs = fp.coefficients(f.T)
            dt = safety * min(1.0 / float(np.max(down + up)), cfl_semi_implicit(coeffs, grid.dw))
            dt = min(dt, stop - t)
            f = l_half(f, 0.5 * dt)
            g = f.T
            g = solve_tridiagonal(assemble_semi_implicit(g, fp.coefficients(g), dt))
            f = l_half(g.T, 0.5 * dt)
            t = stop if stop - (t + dt) < 1e-12 else t + dt
            n += 1
            if n % stride == 0:
                record(t, f)
        if not res.times or res.times[-1] != t:
            record(t, f)
        if stop in snapshot_times:
            res.snapshots[stop] = f.copy()
    res.steps = n
    return res


def count_modes(profile: np.ndarray, rel_prominence: float = 0.01) -> int:
    """Local maxima whose prominence exceeds ``rel_prominence * max``.

    The profile is padded with zeros so maxima at the ends count too.
    """
    p = np.concatenate([[0.0], np.asarray(profile, dtype=float), [0.0]])
    peaks, _ = find_peaks(p, prominence=rel_prominence * p.max())
    return int(peaks.size)


def opinion_profile(f: np.ndarray, levels) -> np.ndarray:
    """Opinion density summed over the given connectivity levels."""
    return np.asarray(f)[list(levels)].sum(axis=0)
