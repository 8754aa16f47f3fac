"""Wasserstein distances, mollification, and empirical-vs-grid comparison."""

import itertools
import math

import numpy as np
import pytest

from conftest import make_state
from swarmlim.errors import GridTooSmallError, NormalizationError, SizeCapError
from swarmlim.transport import (
    EmpiricalMeasure,
    Mollifier,
    mollify_to_grid,
    moment,
    w1_1d,
    w1_empirical_vs_grid,
    w1_exact,
    w1_multispecies,
    w1_sliced,
)


def dirac(point):
    return EmpiricalMeasure(np.atleast_2d(np.asarray(point, dtype=float)), np.ones(1))


def equal_weight(points):
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if pts.shape[0] == 1 and pts.shape[1] > 1:
        pts = pts.T
    n = pts.shape[0]
    return EmpiricalMeasure(pts, np.full(n, 1.0 / n))


def random_measure(rng, n, d, equal=False):
    pts = rng.normal(size=(n, d))
    if equal:
        w = np.full(n, 1.0 / n)
    else:
        w = rng.uniform(0.2, 1.0, size=n)
        w /= w.sum()
    return EmpiricalMeasure(pts, w)


class TestW1OneD:
    def test_point_masses_unit_apart(self):
        assert w1_1d(dirac([0.0]), dirac([1.0])) == pytest.approx(1.0, abs=1e-15)

    def test_identical_is_zero(self, rng):
        mu = random_measure(rng, 11, 1)
        assert w1_1d(mu, mu) == 0.0

    def test_shifted_pair(self):
        mu = equal_weight([[0.0], [2.0]])
        nu = equal_weight([[1.0], [3.0]])
        assert w1_1d(mu, nu) == pytest.approx(1.0, abs=1e-15)

    def test_translation_is_shift_norm(self, rng):
        for _ in range(20):
            mu = random_measure(rng, 9, 1)
            h = float(rng.normal())
            nu = EmpiricalMeasure(mu.points + h, mu.weights)
            assert w1_1d(mu, nu) == pytest.approx(abs(h), abs=1e-12)

    def test_matches_exact_solver(self, rng):
        for _ in range(200):
            n, m = rng.integers(1, 9, size=2)
            mu = random_measure(rng, int(n), 1)
            nu = random_measure(rng, int(m), 1)
            assert w1_1d(mu, nu) == pytest.approx(w1_exact(mu, nu), abs=1e-10)


class TestW1Exact:
    def test_point_masses_plane(self):
        assert w1_exact(dirac([0.0, 0.0]), dirac([3.0, 4.0])) == pytest.approx(
            5.0, abs=1e-14
        )

    def test_self_distance_zero(self, rng):
        for d in (1, 2, 3):
            mu = random_measure(rng, 7, d)
            assert w1_exact(mu, mu) <= 1e-12

    def test_three_point_brute_force(self, rng):
        for _ in range(20):
            mu = random_measure(rng, 3, 2, equal=True)
            nu = random_measure(rng, 3, 2, equal=True)
            cost = np.linalg.norm(
                mu.points[:, None, :] - nu.points[None, :, :], axis=-1
            )
            best = min(
                sum(cost[i, p[i]] for i in range(3)) / 3.0
                for p in itertools.permutations(range(3))
            )
            assert w1_exact(mu, nu) == pytest.approx(best, abs=1e-10)

    def test_size_cap(self, rng):
        mu = random_measure(rng, 12, 1, equal=True)
        nu = random_measure(rng, 12, 1, equal=True)
        with pytest.raises(SizeCapError):
            w1_exact(mu, nu, support_cap=10)

    def test_metric_axioms(self, rng):
        for _ in range(10):
            sizes = rng.integers(2, 10, size=3)
            mu, nu, rho = (random_measure(rng, int(n), 2) for n in sizes)
            dmn = w1_exact(mu, nu)
            dnm = w1_exact(nu, mu)
            assert dmn == pytest.approx(dnm, abs=1e-12)
            assert dmn >= 0.0
            assert w1_exact(mu, rho) <= dmn + w1_exact(nu, rho) + 1e-10


class TestW1Sliced:
    def test_reduces_to_1d(self, rng):
        mu = random_measure(rng, 8, 1)
        nu = random_measure(rng, 5, 1)
        assert w1_sliced(mu, nu, n_directions=17, seed=3) == pytest.approx(
            w1_1d(mu, nu), abs=1e-12
        )

    def test_point_mass_average_projection(self):
        # E|cos theta| * 5 = (2/pi) * 5 for the planar pair (0,0) vs (3,4)
        got = w1_sliced(dirac([0.0, 0.0]), dirac([3.0, 4.0]), n_directions=1_000_000, seed=7)
        want = 10.0 / math.pi
        assert abs(got - want) / want < 3e-3

    def test_deterministic_given_seed(self, rng):
        mu = random_measure(rng, 6, 3)
        nu = random_measure(rng, 6, 3)
        a = w1_sliced(mu, nu, n_directions=64, seed=11)
        b = w1_sliced(mu, nu, n_directions=64, seed=11)
        assert a == b


class TestMeasureValidation:
    def test_rejects_unnormalized(self):
        with pytest.raises(NormalizationError):
            EmpiricalMeasure(np.zeros((2, 1)), np.array([0.7, 0.7]))

    def test_multispecies_sums_per_species(self, rng):
        mus = [random_measure(rng, 5, 1) for _ in range(2)]
        nus = [random_measure(rng, 5, 1) for _ in range(2)]
        per = [w1_exact(m, n) for m, n in zip(mus, nus)]
        assert w1_multispecies(mus, nus, method="exact") == pytest.approx(
            sum(per), abs=1e-12
        )


class TestMollification:
    def test_mass_preserved(self):
        mu = equal_weight([[0.0], [0.4], [-0.3]])
        grid = mollify_to_grid(mu, Mollifier(4), -2.0, 2.0, 160)
        assert grid.values[0].sum() * grid.dx == pytest.approx(1.0, abs=1e-9)

    def test_support_containment(self):
        grid = mollify_to_grid(dirac([0.0]), Mollifier(4), -2.0, 2.0, 80)
        dx = grid.dx
        centers = grid.centers
        occupied = centers[grid.values[0] > 0.0]
        assert np.max(np.abs(occupied)) <= 0.25 + dx

    def test_peak_cell_value(self):
        # delta_0 smoothed with the unit-scale bump onto 17 cells spanning
        # [-2.125, 2.125]: the center cell averages the bump over
        # [-0.125, 0.125]
        grid = mollify_to_grid(dirac([0.0]), Mollifier(1), -2.125, 2.125, 17)
        k_mid = 8
        assert grid.values[0, k_mid] == pytest.approx(
            0.8242330734142601214, abs=1e-12
        )
        assert grid.values[0, k_mid + 1] == pytest.approx(
            0.7699413045337049835, abs=1e-12
        )
        np.testing.assert_allclose(
            grid.values[0, k_mid + 1 :],
            grid.values[0, k_mid - 1 :: -1][: 17 - k_mid - 1],
            atol=1e-14,
        )

    def test_grid_too_small(self):
        with pytest.raises(GridTooSmallError):
            mollify_to_grid(dirac([1.9]), Mollifier(2), -2.0, 2.0, 40)


class TestEmpiricalVsGrid:
    def test_point_mass_against_its_mollification(self):
        mu = dirac([0.0])
        grid = mollify_to_grid(mu, Mollifier(8), -1.0, 1.0, 400)
        d = w1_empirical_vs_grid(mu, grid)
        assert 0.0 < d < 1.0 / 8.0

    def test_translation_lower_bound(self):
        # W1 between delta_h and a symmetric-about-zero density is >= |h|
        # minus the density's first absolute moment; with a tight mollifier
        # the distance approaches |h|
        grid = mollify_to_grid(dirac([0.0]), Mollifier(16), -1.0, 1.0, 800)
        d = w1_empirical_vs_grid(dirac([0.5]), grid)
        assert d == pytest.approx(0.5, abs=1.0 / 16.0)

    def test_matches_particle_w1_for_fine_grids(self, rng):
        pts = rng.uniform(-0.5, 0.5, size=(6, 1))
        mu = equal_weight(pts)
        grid = mollify_to_grid(mu, Mollifier(64), -1.0, 1.0, 4000)
        nu = dirac([0.1])
        direct = w1_1d(mu, nu)
        against_grid = w1_empirical_vs_grid(nu, grid)
        assert against_grid == pytest.approx(direct, abs=0.05)


class TestMoments:
    def test_first_moment_two_points(self):
        assert moment(equal_weight([[0.0], [2.0]]), 1) == pytest.approx(1.0)

    def test_second_moment_point_mass(self):
        assert moment(dirac([3.0, 4.0]), 2) == pytest.approx(25.0)

    def test_matches_direct_sum(self, rng):
        for _ in range(5):
            mu = random_measure(rng, 8, 2)
            direct = float(
                np.sum(mu.weights * np.linalg.norm(mu.points, axis=1))
            )
            assert moment(mu, 1) == pytest.approx(direct, rel=1e-13)


class TestStateBridge:
    def test_from_ensemble_phase_space(self):
        state = make_state([[[1.0], [2.0]]], [[[3.0], [4.0]]])
        mu = EmpiricalMeasure.from_ensemble(state.species[0], phase_space=True)
        assert mu.points.shape == (2, 2)
        np.testing.assert_array_equal(mu.points, [[1.0, 3.0], [2.0, 4.0]])
