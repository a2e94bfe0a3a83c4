import math

import numpy as np
import pytest

from pamlab.cumulant import double_exp, table_based
from pamlab.feynman_kac import (
    LocalTimes,
    QuenchedField,
    annealed_moment_mc,
    default_tilt,
    few_jumps_oracle,
    path_functionals,
    quenched_path_mc,
    quenched_solve,
    sample_local_times,
    simulate_paths,
)


def zero_model():
    return table_based(np.zeros(4), t_max=100.0)


def test_local_times_sum_to_t():
    for seed in range(20):
        lt = sample_local_times(3.0, 1.0, 2, seed)
        assert lt.total() == pytest.approx(3.0, rel=1e-12)
        assert all(len(k) == 2 for k in lt.occupation)


def test_local_times_csv_round_trip():
    lt = sample_local_times(5.0, 0.7, 1, 11)
    back = LocalTimes.from_csv(lt.to_csv())
    assert back.t == lt.t and back.jumps == lt.jumps and back.seed == lt.seed
    assert back.occupation.keys() == lt.occupation.keys()
    for k, v in lt.occupation.items():
        assert back.occupation[k] == pytest.approx(v, rel=1e-15)


def test_jump_count_mean():
    batch = simulate_paths(20000, 10.0, 1.0, 1, seed=0)
    # rate 2 d kappa
    assert batch.jumps.mean() == pytest.approx(20.0, rel=0.02)


def test_seed_reproducible():
    a = path_functionals(4.0, 0.5, double_exp(1.0), 1, 500, seed=4)
    b = path_functionals(4.0, 0.5, double_exp(1.0), 1, 500, seed=4)
    assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])


def test_zero_potential_estimate_is_exact():
    est = annealed_moment_mc(5.0, 1.0, zero_model(), 2000, seed=0, tilt=0.0)
    assert est.log_estimate == pytest.approx(0.0, abs=1e-12)


def test_tilted_zero_potential_is_unbiased():
    est = annealed_moment_mc(5.0, 1.0, zero_model(), 40000, seed=1, tilt=0.5)
    assert abs(est.log_estimate) < est.ci
    est = annealed_moment_mc(5.0, 1.0, zero_model(), 40000, seed=2, tilt=0.3, away_tilt=0.2)
    assert abs(est.log_estimate) < est.ci


def test_single_site_closed_form():
    # k_max = 0: only the no-jump path survives
    m = double_exp(1.0)
    br = few_jumps_oracle(10.0, 0.01, m, k_max=0)
    assert br.log_lower == pytest.approx(m.H(10.0) - 0.2, abs=1e-12)
    assert br.log_upper >= br.log_lower


def test_few_jumps_bracket_tightens_with_k():
    m = double_exp(1.0)
    widths = [few_jumps_oracle(10.0, 0.01, m, k_max=k).log_upper - few_jumps_oracle(10.0, 0.01, m, k_max=k).log_lower
              for k in (1, 2, 3)]
    assert widths[0] > widths[1] > widths[2]


def test_two_site_oracle_matches_direct_quadrature():
    # one jump: the walk spends s at 0 and t - s at +-1
    from scipy.integrate import quad

    m = double_exp(1.0)
    t, k = 3.0, 0.05
    r = 2 * k
    direct = quad(lambda s: math.exp(float(m.H(s)) + float(m.H(t - s))), 0, t)[0] * r * math.exp(-r * t)
    br = few_jumps_oracle(t, k, m, k_max=1)
    lower0 = few_jumps_oracle(t, k, m, k_max=0).log_lower
    assert np.logaddexp(lower0, math.log(direct)) == pytest.approx(br.log_lower, rel=1e-8)


def test_default_tilt_targets_jump_count():
    tilt = default_tilt(10.0, 1.0, 1, target_jumps=1)
    assert 2 * 10.0 * math.exp(-tilt) == pytest.approx(1.0)


def test_quenched_methods_agree():
    rng = np.random.default_rng(0)
    xi = rng.choice([-1.0, 1.0], size=31)
    f = QuenchedField(xi, 1.0)
    a = quenched_solve(f, 1.0, "expm")
    b = quenched_solve(f, 1.0, "rk-adaptive")
    assert a.total_mass == pytest.approx(b.total_mass, rel=1e-6)


def test_quenched_free_walk_conserves_mass():
    f = QuenchedField(np.zeros(81), 1.0)
    out = quenched_solve(f, 1.0)
    assert out.total_mass == pytest.approx(1.0, abs=1e-12)


def test_quenched_constant_potential():
    f = QuenchedField(np.full(61, 0.3), 0.5)
    assert quenched_solve(f, 2.0).total_mass == pytest.approx(math.exp(0.6), rel=1e-9)


def test_quenched_path_mc_small():
    rng = np.random.default_rng(3)
    xi = rng.choice([-1.0, 1.0], size=41)
    f = QuenchedField(xi, 1.0)
    ref = quenched_solve(f, 1.0).total_mass
    est, hw = quenched_path_mc(f, 1.0, 20000, seed=5)
    assert abs(est - ref) < 3 * hw


def test_estimate_json():
    est = annealed_moment_mc(2.0, 0.5, double_exp(1.0), 1000, seed=0, tilt=0.0)
    d = est.to_dict()
    assert d["n_paths"] == 1000 and d["seed"] == 0
    log_est, ci = est
    assert log_est == est.log_estimate and ci > 0
