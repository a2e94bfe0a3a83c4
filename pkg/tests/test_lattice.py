import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from pamlab.lattice import (
    Boundary,
    DegenerateMeasureError,
    LatticeMeasure,
    dirichlet_form,
    entropy_term,
    gamma_sum,
    laplacian_matrix,
    periodize,
    sobolev_ratio,
)


def random_measure(rng, d, R, boundary=Boundary.FREE, sparsity=0.5):
    v = rng.random((2 * R + 1,) * d) * (rng.random((2 * R + 1,) * d) > sparsity)
    if v.sum() == 0:
        v[(R,) * d] = 1.0
    return LatticeMeasure(v / v.sum(), boundary, check=False)


@pytest.mark.parametrize("d", [1, 2, 3])
def test_delta_dirichlet_is_2d(d):
    assert dirichlet_form(LatticeMeasure.delta(d)) == 2 * d
    assert dirichlet_form(LatticeMeasure.delta(d, radius=3)) == 2 * d


def test_dirichlet_examples():
    two = LatticeMeasure.uniform([0, 1], 1, 2)
    assert dirichlet_form(two) == pytest.approx(1.0)
    flat = LatticeMeasure(np.full(5, 0.2), Boundary.PERIODIC)
    assert dirichlet_form(flat) == pytest.approx(0.0, abs=1e-15)


def test_dirichlet_matches_laplacian_quadratic_form(rng):
    for d, per in [(1, False), (2, False), (1, True), (2, True)]:
        p = random_measure(rng, d, 3, Boundary.PERIODIC if per else Boundary.FREE)
        q = p.sqrt().ravel()
        L = laplacian_matrix(p.values.shape, periodic=per)
        assert dirichlet_form(p) == pytest.approx(float(q @ (L @ q)), rel=1e-13)


def test_entropy_and_gamma_sum():
    assert entropy_term(LatticeMeasure.delta(1)) == 0.0
    u = LatticeMeasure.uniform([(-1,), (0,), (1,)], 1, 2)
    assert entropy_term(u) == pytest.approx(-math.log(3))
    p = LatticeMeasure.from_mapping({0: 0.25, 1: 0.75}, 1, 1)
    assert entropy_term(p) == pytest.approx(-0.56234, abs=1e-5)
    assert gamma_sum(LatticeMeasure.delta(1, 4), 0.0) == 1
    assert gamma_sum(p, 1.0) == pytest.approx(1.0)
    four = LatticeMeasure.uniform([-1, 0, 1, 2], 1, 2)
    assert gamma_sum(four, 2.0) == pytest.approx(0.25)


def test_support_floor_counts():
    v = np.array([1e-11, 0.5, 0.5 - 1e-11])
    assert gamma_sum(LatticeMeasure(v, check=False), 0.0) == 2


def test_gamma_sum_nonincreasing_in_gamma(rng):
    for _ in range(50):
        p = random_measure(rng, 1, 5)
        vals = [gamma_sum(p, g) for g in np.linspace(1, 4, 13)]
        assert all(b <= a + 1e-15 for a, b in zip(vals, vals[1:]))


def test_periodize_examples():
    p = LatticeMeasure.from_mapping({4: 1.0}, 1, 4)
    folded = periodize(p, 1)
    assert folded.mass == {(1,): 1.0}
    assert folded.boundary is Boundary.PERIODIC
    inside = LatticeMeasure.uniform([-1, 0, 1], 1, 1)
    assert np.array_equal(periodize(inside, 1).values, inside.values)


def test_periodize_mass_and_energy(rng):
    for i in range(1000):
        d = 1 + i % 2
        R = int(rng.integers(1, 6))
        p = random_measure(rng, d, R + int(rng.integers(0, 6)))
        f = periodize(p, R)
        assert abs(f.values.sum() - 1.0) < 1e-14
        assert dirichlet_form(f) <= dirichlet_form(p) + 1e-12


def test_sobolev_ratio():
    assert sobolev_ratio(LatticeMeasure.delta(1, 2), 1.5) == pytest.approx(2 ** -0.25)
    two = LatticeMeasure.uniform([0, 1], 1, 2)
    assert sobolev_ratio(two, 1.5) == pytest.approx(1 / math.sqrt(2))
    with pytest.raises(DegenerateMeasureError):
        sobolev_ratio(LatticeMeasure(np.full(3, 1 / 3), Boundary.PERIODIC), 1.5)
    ratios = [sobolev_ratio(LatticeMeasure.uniform(range(n), 1, 200), 1.5) for n in range(2, 201)]
    assert max(ratios) < 1.0


def test_sobolev_ratio_empirical_max_is_stable(rng):
    first = max(sobolev_ratio(random_measure(rng, 1, 6), 1.5) for _ in range(1000))
    refined = max(sobolev_ratio(random_measure(rng, 1, 24, sparsity=0.2), 1.5) for _ in range(1000))
    assert refined <= 2 * first


@settings(max_examples=60, deadline=None)
@given(arrays(np.float64, 7, elements=st.floats(0, 1)))
def test_csv_round_trip(v):
    if v.sum() <= 0:
        v = v.copy()
        v[3] = 1.0
    p = LatticeMeasure(v / v.sum(), check=False)
    assert LatticeMeasure.from_csv(p.to_csv()) == p


def test_csv_file_round_trip_2d(tmp_path, rng):
    p = random_measure(rng, 2, 2, Boundary.PERIODIC)
    path = tmp_path / "p.csv"
    p.to_csv(path)
    assert LatticeMeasure.load_csv(path) == p


def test_measure_validation():
    with pytest.raises(ValueError):
        LatticeMeasure([0.5, 0.5])
    with pytest.raises(ValueError):
        LatticeMeasure([0.5, 0.6, -0.1])
    with pytest.raises(ValueError):
        LatticeMeasure.from_mapping({5: 1.0}, 1, 2)
    p = LatticeMeasure.delta(1, 2)
    with pytest.raises(ValueError):
        p.values[0] = 1.0
