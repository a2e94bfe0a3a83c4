import math
from fractions import Fraction

import numpy as np
import pytest

from pamlab.cumulant import bernoulli_pm, double_exp, power_tail
from pamlab.scales import (
    AssumptionViolatedError,
    DiffusionFunction,
    NoRootError,
    PhaseReport,
    TabulatedDiffusion,
    UnsupportedPhaseError,
    alpha_closed_form,
    alpha_residual,
    alpha_sanity,
    classify_phase,
    classify_tabulated,
    parse_kappa,
    predicted_log_moment,
    solve_alpha,
)


def test_worked_examples():
    assert classify_phase(DiffusionFunction(1.0, 0), 1, 1).phase == 2
    r = classify_phase(DiffusionFunction(1.0, 1), 0, 1)
    assert r.phase == 3 and r.alpha_exponent == Fraction(2, 3)
    assert classify_phase(DiffusionFunction(1.0, 2), 0, 1).phase == 4
    assert classify_phase(DiffusionFunction(1.0, "-1/2"), double_exp(1.0), 1).phase == 1
    assert classify_phase(DiffusionFunction(1.0, 3), 0, 1).phase == 5


def test_boundary_values_are_exact():
    # beta = gamma - 1 exactly: kappa_star is the constant c
    r = classify_phase(DiffusionFunction(2.5, Fraction(-1, 2)), Fraction(1, 2), 1)
    assert r.phase == 2 and r.kappa_star == 2.5
    r = classify_phase(DiffusionFunction(0.3, Fraction(2, 3)), 0, 3)
    assert r.phase == 4 and r.kappa_sup == 0.3


def test_assumption_violation():
    with pytest.raises(AssumptionViolatedError):
        classify_phase(DiffusionFunction(1.0, -2), 0, 1)


def test_report_json_round_trip():
    for beta in (0, 1, 2, 3, "-1/2"):
        r = classify_phase(DiffusionFunction(1.0, beta), 0, 1)
        back = PhaseReport.from_json(r.to_json())
        assert back == r


def test_tabulated_classification():
    ts = np.geomspace(1, 1e6, 40)
    tab = TabulatedDiffusion(ts, ts**-0.5)
    assert classify_tabulated(tab, lambda t: t, 1, 1e6).phase == 1
    tab = TabulatedDiffusion(ts, ts**1.0)
    assert classify_tabulated(tab, lambda t: 1.0, 1, 1e6).phase == 3
    tab = TabulatedDiffusion(ts, np.full_like(ts, 1.0))
    v = classify_tabulated(tab, lambda t: t, 1, 1e6)
    assert v.phase is None and v.verdict.startswith("inconclusive")


@pytest.mark.parametrize("t", [8.0, 1e3, 1e6])
def test_alpha_matches_closed_form(t):
    kappa = DiffusionFunction(1.0, 1)
    a = solve_alpha(t, kappa, lambda s: 1.0, 1)
    assert a == pytest.approx(alpha_closed_form(t, kappa, 0.0, 1), rel=1e-10)
    assert alpha_residual(t, a, kappa, lambda s: 1.0, 1) < 1e-10
    assert solve_alpha(t, kappa, lambda s: 1.0, 1, method="fixed_point") == pytest.approx(a, rel=1e-8)


def test_alpha_examples():
    kappa = DiffusionFunction(1.0, 1)
    assert solve_alpha(8.0, kappa, lambda s: 1.0, 1) == pytest.approx(4.0)
    assert solve_alpha(1000.0, kappa, lambda s: 1.0, 1) == pytest.approx(100.0)


def test_alpha_gamma_half():
    kappa = DiffusionFunction(1.0, 1)
    hs = power_tail(1.0, 0.5).hscale
    t = 1e4
    a = solve_alpha(t, kappa, hs, 1)
    assert a == pytest.approx(alpha_closed_form(t, kappa, 0.5, 1), rel=1e-9)


def test_alpha_no_root():
    with pytest.raises(NoRootError):
        solve_alpha(0.5, DiffusionFunction(1.0, 0), lambda s: 1.0, 1)


def test_alpha_sanity_monotone():
    s = alpha_sanity([1e2, 1e3, 1e4, 1e5], DiffusionFunction(1.0, 1), lambda t: 1.0, 1)
    assert s["alpha_increasing"] and s["spread_increasing"]


def test_parse_kappa():
    k = parse_kappa("c=2 beta=1/2")
    assert isinstance(k, DiffusionFunction) and k.beta == Fraction(1, 2)
    assert k(4.0) == pytest.approx(4.0)
    tab = parse_kappa("table=1:1,10:0.1,100:0.01")
    assert tab(math.sqrt(10)) == pytest.approx(10**-0.5)
    assert k.rescale_time(4.0)(1.0) == pytest.approx(k(4.0))


def test_predicted_log_moment():
    m = double_exp(1.0)
    k = DiffusionFunction(1.0, "-1/2")
    r1 = classify_phase(k, m, 1)
    assert predicted_log_moment(r1, 100.0, m, k, 1) == pytest.approx(m.H(100.0) - 2 * 10.0)
    r2 = classify_phase(DiffusionFunction(1.0, 0), 1, 1)
    with pytest.raises(ValueError):
        predicted_log_moment(r2, 10.0, m, DiffusionFunction(1.0, 0), 1)
    r5 = classify_phase(DiffusionFunction(1.0, 3), 0, 1)
    with pytest.raises(UnsupportedPhaseError):
        predicted_log_moment(r5, 10.0, bernoulli_pm(), DiffusionFunction(1.0, 3), 1)
