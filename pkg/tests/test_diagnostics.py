from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from ccfp import diagnostics as dg
from ccfp.fpcore import FPProblem, InterfaceCoefficients, discrete_steady_state
from ccfp.grid import Grid1D, Grid2D
from ccfp.integrators import TimeStepper
from ccfp.models import OpinionModel, initial_two_bumps, opinion_steady_state
from ccfp.quadrature import QuadratureRule, RuleKind

GRID = Grid1D(-1.0, 1.0, 41)
positive = st.floats(1e-6, 1e6)


def frozen_opinion(u=0.25, rule=RuleKind.GAUSS):
    p = FPProblem(GRID, OpinionModel(0.2, u), QuadratureRule(rule))
    f0 = initial_two_bumps(GRID)
    c = p.coefficients(f0)
    _, log_ss = discrete_steady_state(c)
    return p, f0, c, log_ss


# --- mass and moments ----------------------------------------------------


def test_mass_examples():
    assert dg.mass(np.ones(41), GRID) == pytest.approx(2.05)
    assert dg.mass(np.zeros(41), GRID) == 0.0
    assert dg.mass(initial_two_bumps(GRID), GRID) == pytest.approx(1.0, abs=1e-15)
    g2 = Grid2D(GRID, Grid1D(0.0, 1.0, 11))
    assert dg.mass(np.ones(g2.shape), g2) == pytest.approx(41 * 11 * 0.05 * 0.1)


def test_mean_of_empty_state_is_nan():
    assert math.isnan(dg.mean(np.zeros(41), GRID))


# --- relative entropy ----------------------------------------------------


def test_entropy_zero_at_reference():
    ref = opinion_steady_state(0.0, 0.2, GRID)
    assert dg.relative_entropy(ref, ref, GRID.dw) == pytest.approx(0.0, abs=1e-15)


@settings(max_examples=100)
@given(hnp.arrays(float, 15, elements=positive), hnp.arrays(float, 15, elements=positive))
def test_gibbs_inequality(a, b):
    b = b * a.sum() / b.sum()
    assert dg.relative_entropy(a, b, 0.1) >= -1e-12 * 0.1 * a.sum()


def test_entropy_positive_for_two_bumps():
    ref = opinion_steady_state(0.0, 0.2, GRID)
    assert dg.relative_entropy(initial_two_bumps(GRID), ref, GRID.dw) > 0.1


def test_entropy_skips_underflowed_reference_nodes():
    ref = opinion_steady_state(0.0, 0.2, GRID)
    assert dg.skipped_nodes(ref) == 2
    f = initial_two_bumps(GRID)
    logr = np.log(np.where(ref > 0, ref, 1.0))
    logr[ref == 0] = -np.inf
    assert dg.relative_entropy(f, ref, GRID.dw) == pytest.approx(
        dg.relative_entropy(f, None, GRID.dw, log_f_inf=logr), rel=1e-15
    )


def test_entropy_warns_about_mass_outside_support(caplog):
    ref = np.ones(41)
    ref[5] = 0.0
    f = np.ones(41)
    with caplog.at_level("WARNING", logger="ccfp.diagnostics"):
        h = dg.relative_entropy(f, ref, GRID.dw)
    assert h == pytest.approx(0.0, abs=1e-15)
    assert "skipped 1 nodes" in caplog.text
    with pytest.raises(ValueError):
        dg.relative_entropy(-np.ones(41), np.ones(41), GRID.dw)


# --- log mean ------------------------------------------------------------


def test_log_mean_examples():
    assert dg.log_mean_steady(2.5, 2.5) == pytest.approx(2.5, rel=1e-15)
    assert dg.log_mean_steady(1.0, math.e) == pytest.approx(math.e / (math.e - 1), rel=1e-15)
    assert dg.log_mean_steady(1.0, math.e) == pytest.approx(1.5819767, abs=1e-7)
    with pytest.raises(ValueError):
        dg.log_mean_steady(0.0, 1.0)


@given(positive, positive)
def test_log_mean_bounds_and_symmetry(a, b):
    m = dg.log_mean_steady(a, b)
    assert min(a, b) * (1 - 1e-14) <= m <= max(a, b) * (1 + 1e-14)
    assert m == pytest.approx(dg.log_mean_steady(b, a), rel=1e-13)


@given(positive, positive, st.floats(1e-3, 1e3))
def test_log_mean_homogeneous(a, b, s):
    assert dg.log_mean_steady(s * a, s * b) == pytest.approx(s * dg.log_mean_steady(a, b), rel=1e-12)


def test_log_mean_matches_textbook_formula():
    a, b = 0.3, 1.7
    assert dg.log_mean_steady(a, b) == pytest.approx(a * b * math.log(b / a) / (b - a), rel=1e-15)


# --- dissipation and the flux identity ------------------------------------


def test_dissipation_vanishes_on_steady_multiples():
    _, _, c, log_ss = frozen_opinion()
    f_ss, _ = discrete_steady_state(c)
    for scale in (1.0, 3.7):
        assert dg.discrete_dissipation(scale * f_ss, log_ss + math.log(scale), c) == pytest.approx(0.0, abs=1e-12)
        assert dg.discrete_dissipation(scale * f_ss, log_ss, c) == pytest.approx(0.0, abs=1e-12)


@settings(max_examples=100, deadline=None)
@given(hnp.arrays(float, 41, elements=st.floats(1e-8, 10)))
def test_dissipation_terms_nonnegative(f):
    _, _, c, log_ss = frozen_opinion()
    assert dg.dissipation_terms(f, log_ss, c).min() >= 0.0


def test_dissipation_with_zero_nodes():
    c = InterfaceCoefficients.from_lambda(np.zeros(4), np.ones(4), 0.1)
    f = np.array([0.0, 0.0, 1.0, 0.0, 0.0])
    terms = dg.dissipation_terms(f, np.zeros(5), c)
    assert terms.tolist() == [0.0, np.inf, np.inf, 0.0]
    assert dg.dissipation_terms(np.zeros(5), np.zeros(5), c).tolist() == [0.0] * 4


def test_flux_identity_on_frozen_run():
    p, f0, c, log_ss = frozen_opinion()
    worst = [0.0]

    def check(n, t, f):
        worst[0] = max(worst[0], dg.flux_identity_deviation(f, log_ss, c))

    TimeStepper("rk4", "auto", 0.5).run(p, f0, check)
    assert worst[0] <= 1e-12


def test_entropy_balance_at_steady_state():
    _, _, c, log_ss = frozen_opinion()
    f_ss, _ = discrete_steady_state(c)
    assert dg.entropy_balance_check(f_ss, f_ss, log_ss, c, 1e-3) == pytest.approx(0.0, abs=1e-10)


@pytest.mark.parametrize("kind, order", [("euler", 1.0), ("ssprk2", 2.0)])
def test_entropy_balance_residual_order(kind, order):
    p, f0, c, log_ss = frozen_opinion()
    from ccfp.integrators import STEPPERS, IntegratorKind

    step = STEPPERS[IntegratorKind(kind)]
    f1 = TimeStepper("rk4", "auto", 0.05).run(p, f0)
    base = 0.9 * 0.05 * GRID.dw**2
    res = []
    for k in range(3):
        dt = base / 2**k
        res.append(dg.entropy_balance_check(f1, step(p, f1, dt), log_ss, c, dt))
    orders = np.log2(np.array(res[:-1]) / res[1:])
    assert np.all(np.abs(orders - order) < 0.15)


# --- errors and orders ---------------------------------------------------


def test_l1_error_examples():
    ref = opinion_steady_state(0.0, 0.2, GRID)
    assert dg.l1_relative_error(ref, ref) == 0.0
    assert dg.l1_relative_error(1.01 * ref, ref) == pytest.approx(0.01, rel=1e-12)
    with pytest.raises(ValueError):
        dg.l1_relative_error(ref, np.zeros(41))


def test_observed_order_examples():
    assert dg.observed_order(4e-2, 1e-2, 2) == pytest.approx(2.0)
    assert dg.observed_order(math.e, math.e, 2) == 0.0
    with pytest.raises(ValueError):
        dg.observed_order(0.0, 1.0)
    with pytest.raises(ValueError):
        dg.observed_order(1.0, 1.0, 1.0)


@given(st.floats(-6, 6), st.floats(1e-3, 1e3))
def test_fitted_order_recovers_power_law(p, c):
    h = np.array([0.1, 0.05, 0.025, 0.0125])
    assert dg.fitted_order(h, c * h**p) == pytest.approx(p, abs=1e-9)


def test_diagnose_record():
    p = FPProblem(GRID, OpinionModel(0.2), QuadratureRule(RuleKind.GAUSS))
    f0 = initial_two_bumps(GRID)
    rec = dg.diagnose(0.0, f0, GRID, p.coefficients(f0), opinion_steady_state(0.0, 0.2, GRID))
    assert dg.DiagnosticsRecord.header() == ["t", "mass", "mean", "l1_err", "entropy", "dissipation"]
    t, m, u, err, h, i = rec.row()
    assert m == pytest.approx(1.0) and abs(u) < 1e-15 and err > 0.5 and h > 0 and i > 0
    assert math.isnan(dg.diagnose(0.0, f0, GRID, p.coefficients(f0)).l1_err)
