import math
import warnings

import numpy as np
import pytest

from pamlab.discrete import (
    DiscreteProblem,
    ExistenceRangeWarning,
    Kind,
    SolverOptions,
    brute_force_oracle,
    objective,
    oracle_search,
    parse_problem,
    rho_continuation,
    solve,
    support_profile,
)
from pamlab.lattice import LatticeMeasure


def test_objective_examples():
    prob = DiscreteProblem(Kind.DB, 0.5, 1, 4, gamma=0.0)
    assert objective(prob, LatticeMeasure.delta(1, 4)) == pytest.approx(2.0)
    two = LatticeMeasure.uniform([0, 1], 1, 4)
    assert objective(prob, two) == pytest.approx(1.0 + 0.5)


def test_small_rho_gamma0_closed_form():
    prob = DiscreteProblem(Kind.DB, 0.5, 1, 6, gamma=0.0)
    sol = solve(prob)
    oracle = brute_force_oracle(prob)
    assert sol.value == pytest.approx(oracle, abs=1e-6)
    assert sol.value <= 2.0


def test_solver_beats_delta_and_matches_oracle_de():
    prob = DiscreteProblem(Kind.DE, 1.0, 1, 8)
    sol = solve(prob)
    assert sol.value <= 2.0 + 1e-12
    assert sol.value <= brute_force_oracle(prob, 3) + 1e-9
    assert sol.converged


def test_minimizer_is_probability_and_symmetric_enough():
    sol = solve(DiscreteProblem(Kind.DB, 1.0, 1, 10, gamma=0.5))
    v = sol.minimizer.values
    assert v.sum() == pytest.approx(1.0, abs=1e-12)
    assert np.all(v >= 0)
    assert objective(sol.problem, sol.minimizer) == pytest.approx(sol.value, abs=1e-9)


def test_large_rho_goes_to_delta():
    sol = solve(DiscreteProblem(Kind.DB, 50.0, 1, 6, gamma=0.5))
    assert sol.value == pytest.approx(2.0, rel=2e-2)
    assert sol.minimizer.values.max() > 0.95


def test_two_dimensional_solve():
    prob = DiscreteProblem(Kind.DB, 2.0, 2, 3, gamma=0.0)
    sol = solve(prob)
    assert sol.value <= 4.0 + 1e-12
    assert sol.value <= brute_force_oracle(prob, 3) + 1e-6


def test_rho_continuation_monotone():
    base = DiscreteProblem(Kind.DB, 0.1, 1, 8, gamma=0.3)
    rows = rho_continuation(base, [0.1, 0.5, 1.0, 5.0])
    vals = [v for _, v in rows]
    # value is nondecreasing in rho because the penalty is nonnegative
    assert all(b >= a - 1e-9 for a, b in zip(vals, vals[1:]))
    with pytest.raises(ValueError):
        rho_continuation(base, [1.0, 0.5])


def test_support_profile_compact_for_small_gamma():
    sol = solve(DiscreteProblem(Kind.DB, 1.0, 1, 12, gamma=0.0))
    size, tail, log_tail = support_profile(sol)
    assert size <= 6
    assert tail == 0.0 and log_tail == -math.inf


def test_oracle_reports_pattern():
    res = oracle_search(DiscreteProblem(Kind.DB, 5.0, 1, 4, gamma=0.0))
    assert res.support_size == 1
    assert res.value == pytest.approx(2.0)


def test_validation_and_parse():
    with pytest.raises(ValueError):
        DiscreteProblem(Kind.DB, 1.0, gamma=1.0)
    with pytest.raises(ValueError):
        DiscreteProblem(Kind.DB, -1.0, gamma=0.5)
    with pytest.raises(ValueError):
        DiscreteProblem(Kind.DE, 1.0, gamma=0.5)
    with pytest.warns(ExistenceRangeWarning):
        DiscreteProblem(Kind.DB, 0.1, 1, 4, gamma=2.5)
    p = parse_problem("kind=db gamma=0.5 rho=1.0 d=1 R=20 boundary=free")
    assert p == DiscreteProblem(Kind.DB, 1.0, 1, 20, gamma=0.5)
    assert parse_problem(p.describe()) == p


def test_seed_reproducible():
    prob = DiscreteProblem(Kind.DB, 1.0, 1, 8, gamma=0.8)
    opts = SolverOptions(seed=7)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        a = solve(prob, opts)
        b = solve(prob, opts)
    assert a.value == b.value
    assert np.array_equal(a.minimizer.values, b.minimizer.values)
