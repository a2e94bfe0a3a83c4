import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pamlab.cumulant import (
    DomainOverflowError,
    EssSupClass,
    HatH,
    NonPositiveValueError,
    UnsupportedFamilyError,
    bernoulli_pm,
    dehaan_residual,
    double_exp,
    eval_H,
    eval_hat_H,
    format_model,
    parse_model,
    power_tail,
    rv_index_estimate,
    sample_potential,
    table_based,
)

FAMILIES = [double_exp(1.0), double_exp(2.5), power_tail(1.0, 0.5), power_tail(2.0, 0.0), power_tail(0.7, 1.5), bernoulli_pm()]


def test_eval_H_examples():
    assert eval_H(bernoulli_pm(), 1.0) == pytest.approx(math.log(math.cosh(1.0)), abs=1e-15)
    assert eval_H(bernoulli_pm(), 1.0) == pytest.approx(0.433781, abs=1e-6)
    assert eval_H(double_exp(2.0), math.e) == pytest.approx(2 * math.e, rel=1e-15)
    for m in FAMILIES:
        assert eval_H(m, 0.0) == 0.0


def test_bernoulli_log_cosh_is_stable_for_large_t():
    assert eval_H(bernoulli_pm(), 1000.0) == pytest.approx(1000.0 - math.log(2.0), rel=1e-15)


def test_power_tail_signs_and_rho():
    m = power_tail(1.5, 0.5)
    assert m.rho == pytest.approx(0.75)
    assert eval_H(m, 4.0) == pytest.approx(-3.0)
    assert m.esssup == 0.0
    up = power_tail(1.0, 1.5)
    assert eval_H(up, 4.0) == pytest.approx(8.0)
    assert up.esssup == math.inf
    assert eval_H(power_tail(2.0, 0.0), 3.0) == -2.0


@pytest.mark.parametrize("gamma", [0.0, 0.3, 1.0, 1.7])
def test_hat_H_vanishes_at_one(gamma):
    assert eval_hat_H(HatH(gamma), 1.0) == pytest.approx(0.0, abs=1e-15)


def test_hat_H_branches():
    assert eval_hat_H(HatH(1.0), math.e) == pytest.approx(math.e)
    assert eval_hat_H(HatH(1.0), 0.0) == 0.0
    assert eval_hat_H(HatH(0.0), 0.0) == 0.0
    assert eval_hat_H(HatH(0.0), 3.0) == pytest.approx(2.0)
    assert eval_hat_H(HatH(0.5), 4.0) == pytest.approx((4 - 2) / 0.5)


@pytest.mark.parametrize("gamma", [0.0, 0.4, 1.0, 1.5, 2.5])
def test_hat_H_convex(gamma):
    y = np.linspace(0.05, 10, 400)
    v = np.asarray(eval_hat_H(HatH(gamma), y))
    assert np.all(np.diff(v, 2) >= -1e-12)


def test_dehaan_residual_exact_for_reference_families():
    for t in (1.0, 10.0, 1e3):
        for y in (1.0, 2.0, 7.5):
            assert dehaan_residual(double_exp(1.3), t, y) == pytest.approx(0.0, abs=1e-10)
    assert dehaan_residual(power_tail(1.0, 0.5), 10.0, 2.0) == pytest.approx(0.0, abs=1e-14)


def test_dehaan_residual_nonincreasing_in_t():
    for m in FAMILIES:
        for y in np.linspace(0.1, 10, 12):
            r = [abs(dehaan_residual(m, t, y)) for t in (10.0, 1e2, 1e3, 1e4)]
            assert all(b <= a + 1e-9 for a, b in zip(r, r[1:])), (m, y, r)


@settings(max_examples=200, deadline=None)
@given(st.floats(1e-3, 40), st.floats(1e-3, 40))
def test_superadditivity(a, b):
    for m in FAMILIES:
        hab = eval_H(m, a + b)
        assert eval_H(m, a) + eval_H(m, b) <= hab + 1e-12 * (1 + abs(hab))


def test_superadditivity_random_pairs(rng):
    a, b = rng.uniform(0, 30, (2, 10_000))
    for m in FAMILIES:
        hab = np.asarray(eval_H(m, a + b))
        assert np.all(np.asarray(eval_H(m, a)) + np.asarray(eval_H(m, b)) <= hab + 1e-12 * (1 + np.abs(hab)))


def test_slope_monotone(rng):
    t = np.sort(rng.uniform(0.01, 50, 500))
    for m in FAMILIES:
        s = np.asarray(eval_H(m, t)) / t
        assert np.all(np.diff(s) >= -1e-12)


def test_derivatives_match_finite_differences():
    t = np.array([0.3, 1.0, 2.0, 7.0])
    h = 1e-5
    for m in FAMILIES[:3] + FAMILIES[4:]:
        fd = (np.asarray(m.H(t + h)) - np.asarray(m.H(t - h))) / (2 * h)
        assert np.allclose(m.dH(t), fd, rtol=1e-6, atol=1e-8)
        fd2 = (np.asarray(m.dH(t + h)) - np.asarray(m.dH(t - h))) / (2 * h)
        assert np.allclose(m.d2H(t), fd2, rtol=1e-5, atol=1e-7)


def test_rv_index_estimate():
    assert rv_index_estimate(lambda t: t**2, [10, 100, 1000]) == pytest.approx(2.0, abs=1e-12)
    assert rv_index_estimate(lambda t: 5.0 + 0 * t, [1, 10, 100]) == pytest.approx(0.0, abs=1e-12)
    m = double_exp(1.0)
    lo = rv_index_estimate(m.H, [1e2, 1e3, 1e4])
    hi = rv_index_estimate(m.H, [1e4, 1e5, 1e6])
    assert 1.0 < lo < 1.35 and 1.0 < hi < lo
    with pytest.raises(NonPositiveValueError):
        rv_index_estimate(lambda t: -t, [1, 10, 100])


def test_sample_potential():
    f = sample_potential(bernoulli_pm(), (10,), seed=3)
    assert f.shape == (10,) and set(np.unique(f)) <= {-1.0, 1.0}
    assert np.array_equal(f, sample_potential(bernoulli_pm(), (10,), seed=3))
    big = sample_potential(bernoulli_pm(), (10**6,), seed=1)
    assert abs(big.mean()) < 0.005
    with pytest.raises(UnsupportedFamilyError):
        sample_potential(power_tail(1.0, 0.5), (3,), seed=0)


def test_double_exp_sampler_has_matching_tail():
    x = sample_potential(double_exp(1.0), (200_000,), seed=2)
    # P(xi > s) = exp(-e^s) for rho = 1
    for s in (0.0, 0.5, 1.0):
        assert np.mean(x > s) == pytest.approx(math.exp(-math.exp(s)), abs=5e-3)


def test_table_based_matches_log_cosh():
    draws = sample_potential(bernoulli_pm(), (10**6,), seed=0)
    m = table_based(draws, t_max=10)
    t = np.linspace(0, 3, 31)
    assert np.max(np.abs(np.asarray(m.H(t)) - np.log(np.cosh(t)))) < 0.01
    assert m.H(0.0) == 0.0
    with pytest.raises(DomainOverflowError):
        m.H(11.0)


def test_table_based_handles_2d_input():
    m = table_based(np.array([-1.0, 1.0]))
    t = np.arange(6.0).reshape(2, 3)
    assert np.allclose(m.H(t), np.log(np.cosh(t)))


def test_text_round_trip(tmp_path):
    for m in (double_exp(2.0), power_tail(1.0, 0.5), bernoulli_pm()):
        back = parse_model(format_model(m))
        assert back.family == m.family and back.gamma == m.gamma and back.rho == pytest.approx(m.rho)
    p = tmp_path / "xi.txt"
    np.savetxt(p, [-1.0, 1.0, 1.0, -1.0])
    m = parse_model(f"family=table_based file={p.name} esssup_class=mean_zero", base_dir=tmp_path)
    assert m.esssup_class is EssSupClass.MEAN_ZERO
    assert m.H(1.0) == pytest.approx(math.log(math.cosh(1.0)))
    with pytest.raises(ValueError):
        parse_model("family=nonsense")
