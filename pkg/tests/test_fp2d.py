from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ccfp.fp2d import (
    FPProblem2D,
    axis_coefficients,
    coefficients_axis_v,
    coefficients_axis_w,
    mass_2d,
    rhs_2d,
)
from ccfp.fpcore import compute_coefficients, discrete_steady_state, rhs
from ccfp.grid import Grid1D, Grid2D
from ccfp.integrators import TimeStepper
from ccfp.quadrature import QuadratureRule, RuleKind, SingularIntegrandError

GRID = Grid2D(Grid1D(-1.0, 1.0, 21), Grid1D(-2.0, 2.0, 31))
MIDPOINT = QuadratureRule(RuleKind.MIDPOINT)
GAUSS = QuadratureRule(RuleKind.GAUSS, 6)


class Separable:
    """Linear relaxation along each axis with a v-dependent w-diffusion if asked."""

    def __init__(self, kw=1.5, kv=-0.7, d=0.3, v_dependent=False):
        self.kw, self.kv, self.d, self.v_dependent = kw, kv, d, v_dependent

    def drift(self, f, grid):
        n_v, n_w = grid.axis_v.n_nodes, grid.axis_w.n_nodes
        return (
            lambda w: np.broadcast_to((self.kw * w)[..., None], w.shape + (n_v,)),
            lambda v: np.broadcast_to((self.kv * (v - 0.2))[..., None], v.shape + (n_w,)),
        )

    def diffusion(self, w, v):
        base = np.broadcast_to(self.d, np.broadcast_shapes(np.shape(w), np.shape(v)))
        return base * (1.0 + 0.2 * np.asarray(v) ** 2) if self.v_dependent else base.copy()

    def diffusion_dw(self, w, v):
        return np.zeros(np.broadcast_shapes(np.shape(w), np.shape(v)))

    def diffusion_dv(self, w, v):
        if self.v_dependent:
            return np.broadcast_to(self.d * 0.4 * np.asarray(v), np.broadcast_shapes(np.shape(w), np.shape(v))).copy()
        return np.zeros(np.broadcast_shapes(np.shape(w), np.shape(v)))


class Line:
    """The w-part of :class:`Separable` as a 1D model."""

    def __init__(self, kw, d):
        self.kw, self.d = kw, d

    def drift(self, f, grid):
        return lambda w: self.kw * w

    def diffusion(self, w):
        return np.full(np.shape(w), self.d)

    def diffusion_prime(self, w):
        return np.zeros(np.shape(w))


def test_zero_drift_central_weights_on_both_axes():
    model = Separable(kw=0.0, kv=0.0)
    f = np.ones(GRID.shape)
    assert np.all(axis_coefficients(f, GRID, model, GAUSS, 0).delta == 0.5)
    assert np.all(axis_coefficients(f, GRID, model, GAUSS, 1).delta == 0.5)
    assert np.all(rhs_2d(f, GRID, model, GAUSS) == 0.0)


def test_rows_identical_when_model_ignores_v():
    f = np.random.default_rng(0).random(GRID.shape)
    c = axis_coefficients(f, GRID, Separable(), GAUSS, 0)
    assert c.lam.shape == (20, 31)
    assert np.all(c.lam == c.lam[:, :1])


def test_row_matches_one_dimensional_scheme():
    f = np.random.default_rng(1).random(GRID.shape)
    row = coefficients_axis_w(f, GRID, Separable(), MIDPOINT, 7)
    one_d = compute_coefficients(f[:, 7], GRID.axis_w, Line(1.5, 0.3), MIDPOINT)
    assert np.allclose(row.lam, one_d.lam, rtol=1e-14, atol=0)
    assert np.allclose(row.delta, one_d.delta, rtol=1e-14, atol=0)


def test_column_coefficients_see_v_dependent_diffusion():
    f = np.ones(GRID.shape)
    col = coefficients_axis_v(f, GRID, Separable(v_dependent=True), GAUSS, 3)
    assert col.lam.shape == (30,)
    assert col.d_face == pytest.approx(0.3 * (1 + 0.2 * GRID.axis_v.midpoints**2))
    with pytest.raises(IndexError):
        coefficients_axis_v(f, GRID, Separable(), GAUSS, 21)


def test_tensor_steady_state_is_stationary():
    model = Separable()
    f = np.ones(GRID.shape)
    cw = axis_coefficients(f, GRID, model, GAUSS, 0)
    cv = axis_coefficients(f, GRID, model, GAUSS, 1)
    g, _ = discrete_steady_state(coefficients_axis_w(f, GRID, model, GAUSS, 0))
    h, _ = discrete_steady_state(coefficients_axis_v(f, GRID, model, GAUSS, 0))
    steady = np.outer(g, h)
    r = rhs_2d(steady, GRID, model, GAUSS)
    scale = steady.max() * (np.abs(cw.c_tilde).max() / GRID.axis_w.dw + np.abs(cv.c_tilde).max() / GRID.axis_v.dw)
    assert np.abs(r).max() <= 1e-13 * scale


def test_reduces_to_one_dimensional_rhs():
    model = Separable(kv=0.0)
    g = np.exp(-4 * GRID.axis_w.nodes ** 2)
    f = np.repeat(g[:, None], GRID.shape[1], axis=1)
    r = rhs_2d(f, GRID, model, GAUSS)
    r1 = rhs(g, compute_coefficients(g, GRID.axis_w, Line(1.5, 0.3), GAUSS))
    assert np.allclose(r, r1[:, None], rtol=1e-13, atol=1e-13)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_rhs_conserves_mass(seed):
    f = np.random.default_rng(seed).random(GRID.shape)
    r = rhs_2d(f, GRID, Separable(v_dependent=True), GAUSS)
    assert abs(mass_2d(r, GRID)) <= 1e-13 * GRID.cell_area * np.abs(r).sum()


def test_explicit_run_positive_and_conservative():
    problem = FPProblem2D(GRID, Separable(v_dependent=True), GAUSS)
    f0 = np.zeros(GRID.shape)
    f0[5:9, 10:20] = 1.0
    stepper = TimeStepper("ssprk2", "auto", 0.2)
    f = stepper.run(problem, f0)
    assert stepper.negative_steps == 0
    assert mass_2d(f, GRID) == pytest.approx(mass_2d(f0, GRID), rel=1e-13)


def test_semi_implicit_not_offered():
    with pytest.raises(NotImplementedError):
        FPProblem2D(GRID, Separable(), GAUSS).positivity_bound("semi-implicit", np.ones(GRID.shape))


def test_bad_axis_and_singular_diffusion():
    with pytest.raises(ValueError):
        axis_coefficients(np.ones(GRID.shape), GRID, Separable(), GAUSS, 2)
    with pytest.raises(SingularIntegrandError):
        axis_coefficients(np.ones(GRID.shape), GRID, Separable(d=0.0), GAUSS, 1)
