import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pamlab.continuous.fem import cutoff_psi, discretize_g, fem_interpolate
from pamlab.continuous.grid import (
    ContinuousKind,
    ContinuousProblem,
    GridFunction,
    GridOptions,
    gaussian_candidate,
    gaussian_oracle_AB,
    objective_grid,
    sine_oracle_B0,
    solve_grid,
)
from pamlab.continuous.transfer import lattice_spacing, transform
from pamlab.cumulant import bernoulli_pm
from pamlab.lattice import Boundary, LatticeMeasure, dirichlet_form

FAST = GridOptions(richardson=False, restarts=0)


def test_oracle_values():
    assert gaussian_oracle_AB(1.0, 1) == pytest.approx(1 + math.log(math.pi) / 2)
    assert sine_oracle_B0(1.0) == pytest.approx(3 * (math.pi**2 / 4) ** (1 / 3) - 1)
    assert sine_oracle_B0(1.0) == pytest.approx(3.0539, abs=1e-4)


def test_gaussian_candidate_close_to_oracle():
    g = gaussian_candidate(1.0, 12.0, 0.02)
    prob = ContinuousProblem(ContinuousKind.AB, 1, 12.0, 0.02, rho=1.0)
    assert objective_grid(prob, g) == pytest.approx(gaussian_oracle_AB(1.0, 1), rel=1e-3)


def test_ab_grid_solve_below_candidate():
    prob = ContinuousProblem(ContinuousKind.AB, 1, 8.0, 0.05, rho=1.0)
    sol = solve_grid(prob, FAST)
    assert sol.converged
    assert sol.minimizer.is_normalized(1e-9)
    assert sol.minimizer.is_dirichlet()
    assert sol.value <= objective_grid(prob, gaussian_candidate(1.0, 8.0, 0.05)) + 1e-9
    assert sol.value == pytest.approx(gaussian_oracle_AB(1.0, 1), rel=2e-2)


def test_b0_grid_solve_near_sine():
    prob = ContinuousProblem(ContinuousKind.B, 1, 8.0, 0.05, rho=1.0, gamma=0.0)
    sol = solve_grid(prob, FAST)
    assert sol.value == pytest.approx(sine_oracle_B0(1.0), rel=5e-2)


def test_rwrs_log_cosh_value_is_negative_finite():
    prob = ContinuousProblem(ContinuousKind.RWRS, 1, 6.0, 0.1, model=bernoulli_pm(), theta=1.0)
    sol = solve_grid(prob, FAST)
    assert math.isfinite(sol.value)
    # H(g^2) <= g^2 gives a lower bound of -theta; the kinetic term keeps it above that
    assert sol.value > -1.0


def test_problem_validation():
    with pytest.raises(ValueError):
        ContinuousProblem(ContinuousKind.B, 1, 1.0, 0.3, rho=1.0, gamma=0.0)
    with pytest.raises(ValueError):
        ContinuousProblem(ContinuousKind.B, 1, 6.0, 0.1, rho=1.0, gamma=3.0)
    with pytest.raises(ValueError):
        ContinuousProblem(ContinuousKind.GKS, 1, 6.0, 0.1, model=bernoulli_pm())
    with pytest.raises(ValueError):
        ContinuousProblem(ContinuousKind.AB, 3, 6.0, 0.1, rho=1.0)


def _random_periodic(rng, d, M):
    v = rng.random((2 * M + 1,) * d)
    return LatticeMeasure(v / v.sum(), Boundary.PERIODIC, check=False)


@pytest.mark.parametrize("d", [1, 2])
def test_fem_identity(rng, d):
    for a in range(2, 9):
        p = _random_periodic(rng, d, 3)
        g = fem_interpolate(p, a)
        assert g.gradient_energy() == pytest.approx(a**2 * dirichlet_form(p), rel=1e-12)
        assert g.l2_norm_sq() <= 1.0 + 1e-12


def test_fem_values_at_nodes_and_midpoints(rng):
    p = _random_periodic(rng, 1, 4)
    g = fem_interpolate(p, 3)
    nodes = g.axis()
    assert np.allclose(g(nodes), g.values)
    mid = 0.5 * (nodes[:-1] + nodes[1:])
    assert np.allclose(g(mid), 0.5 * (g.values[:-1] + g.values[1:]))


def test_fem_requires_periodic():
    with pytest.raises(ValueError):
        fem_interpolate(LatticeMeasure.delta(1, 2), 2)
    with pytest.raises(ValueError):
        fem_interpolate(LatticeMeasure(np.full(3, 1 / 3), Boundary.PERIODIC), 0)


def test_discretize_preserves_mass():
    g = gaussian_candidate(1.0, 6.0, 0.05)
    p = discretize_g(g, 0.5)
    assert p.values.sum() == pytest.approx(1.0)
    assert abs(p.mass.get((0,), 0) - p.mass.get((-1,), 0)) < 0.02


def test_cutoff_vanishes_on_boundary():
    g = GridFunction.from_callable(lambda x: np.exp(-x * x / 50), 9.0, 0.1)
    c = cutoff_psi(g, 9.0)
    assert c.boundary_max() == 0.0
    assert np.allclose(c.values[np.abs(c.axis()) <= 6.0], g.values[np.abs(g.axis()) <= 6.0])
    with pytest.raises(ValueError):
        cutoff_psi(g, 2.0)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 2), st.integers(3, 12), st.floats(0.01, 1.0))
def test_grid_function_round_trips(d, n, mesh):
    rng = np.random.default_rng(n)
    g = GridFunction(rng.random((n,) * d), -1.5, mesh)
    back = GridFunction.from_bytes(g.to_bytes())
    assert np.array_equal(back.values, g.values) and back.mesh == g.mesh and back.lower == g.lower
    back = GridFunction.from_csv(g.to_csv())
    assert np.allclose(back.values, g.values, rtol=1e-15)


def test_transform_identities():
    assert lattice_spacing(0.0, 1, 1e4) == pytest.approx(1e4 ** (-1 / 3))
    assert lattice_spacing(1.0, 1, 100.0) == pytest.approx(0.1)
    # at kappa = 1 the map is the identity for every gamma
    for g in (0.0, 0.5, 1.0, 1.5):
        assert transform(g, 1.0, 1, 1.0, 2.5) == pytest.approx(2.5)
