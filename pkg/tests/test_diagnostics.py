"""Alignment, energies, grid norms, and the modulated functional."""

import math

import numpy as np
import pytest

from conftest import make_state
from swarmlim.diagnostics import (
    DiagnosticsSeries,
    ModulatedEnergy,
    _quadratic_form_row,
    _toeplitz_quadratic,
    free_energy,
    interaction_energy,
    lp_norm,
    modulated_energy,
    second_moment_energy,
    velocity_alignment,
)
from swarmlim.ensemble import IntegratorConfig, step_first_order
from swarmlim.errors import (
    GridMismatchError,
    MissingVelocitiesError,
    QuadratureDivergenceError,
    SingularEvaluationError,
)
from swarmlim.grids import DensityGrid1D
from swarmlim.kernels import KernelMatrix, KernelSpec, assemble_field
from swarmlim.transport import EmpiricalMeasure, Mollifier, mollify_to_grid

QUAD = KernelMatrix.uniform(KernelSpec.quadratic(1.0), 1, 1)


class TestVelocityAlignment:
    def test_slaved_velocities_align_exactly(self, rng):
        pos = rng.normal(size=(8, 1))
        probe = make_state([pos], [np.zeros((8, 1))])
        matrix = KernelMatrix.uniform(KernelSpec.gaussian(1.0, 1.0, 0.4, 2.0), 1, 1)
        e = assemble_field(matrix, probe.species, 0, pos)
        state = make_state([pos], [e])
        assert velocity_alignment(state, matrix)[0] == pytest.approx(0.0, abs=1e-15)

    def test_free_particle_unit_mismatch(self):
        state = make_state([[[0.0]]], [[[1.0]]])
        matrix = KernelMatrix.uniform(KernelSpec.zero(), 1, 1)
        assert velocity_alignment(state, matrix)[0] == pytest.approx(1.0, abs=1e-15)

    def test_cross_species_field(self):
        zero = KernelSpec.zero()
        quad = KernelSpec.quadratic(1.0)
        matrix = KernelMatrix(((zero, quad), (zero, zero)), dimension=1)
        state = make_state([[[0.0]], [[-1.0]]], [[[3.0]], [[0.0]]])
        out = velocity_alignment(state, matrix)
        assert out[0] == pytest.approx(4.0, abs=1e-15)
        assert out[1] == pytest.approx(0.0, abs=1e-15)

    def test_requires_velocities(self):
        with pytest.raises(MissingVelocitiesError):
            velocity_alignment(make_state([[[0.0]]]), QUAD)


class TestFreeEnergy:
    def test_two_particle_quadratic(self):
        state = make_state([[[0.0], [1.0]]])
        assert free_energy(state, QUAD) == pytest.approx(0.25, abs=1e-15)

    def test_zero_kernels(self, rng):
        state = make_state([rng.normal(size=(5, 1))])
        matrix = KernelMatrix.uniform(KernelSpec.zero(), 1, 1)
        assert free_energy(state, matrix) == 0.0

    def test_matches_brute_force(self, rng):
        state = make_state([rng.normal(size=(3, 1)), rng.normal(size=(3, 1))])
        matrix = KernelMatrix.uniform(KernelSpec.gaussian(1.0, 1.0, 0.6, 0.7), 2, 1)
        from swarmlim.kernels import eval_potential

        want = 0.0
        for i, a in enumerate(state.species):
            for j, b in enumerate(state.species):
                spec = matrix.entries[i][j]
                for zh, wh in zip(a.positions, a.weights):
                    for zk, wk in zip(b.positions, b.weights):
                        want += wh * wk * float(eval_potential(spec, zh - zk))
        assert free_energy(state, matrix) == pytest.approx(want, rel=1e-12)

    def test_decays_along_first_order_flow(self, rng):
        state = make_state([rng.uniform(-1, 1, size=(12, 1))])
        matrix = KernelMatrix.uniform(KernelSpec.gaussian(1.0, 1.0, 0.3, 2.0), 1, 1)
        cfg = IntegratorConfig(scheme="rk4", dt=0.01)
        values = [free_energy(state, matrix)]
        for _ in range(50):
            state = step_first_order(state, matrix, cfg)
            values.append(free_energy(state, matrix))
        diffs = np.diff(values)
        assert np.all(diffs <= 1e-8 + 10 * 0.01**2)


class TestInteractionEnergy:
    def test_regularized_pair_with_self_terms(self):
        state = make_state([[[0.0], [1.0]]])
        spec = KernelSpec.regularized_riesz(1.0, 1.0, 1.0)
        assert interaction_energy(state, 0, spec) == pytest.approx(0.75, abs=1e-15)

    def test_zero_kernel(self, rng):
        state = make_state([rng.normal(size=(4, 1))])
        assert interaction_energy(state, 0, KernelSpec.zero()) == 0.0

    def test_matches_brute_force(self, rng):
        state = make_state([rng.normal(size=(4, 1))])
        spec = KernelSpec.regularized_riesz(1.0, 0.7, 0.5)
        ens = state.species[0]
        want = 0.0
        for zh, wh in zip(ens.positions, ens.weights):
            for zk, wk in zip(ens.positions, ens.weights):
                want += wh * wk / (abs(float(zh[0] - zk[0])) ** 0.7 + 0.5)
        assert interaction_energy(state, 0, spec) == pytest.approx(want, rel=1e-12)

    def test_singular_self_pairs_skipped_with_warning(self):
        state = make_state([[[0.0], [1.0]]])
        spec = KernelSpec.riesz(1.0, 0.5)
        with pytest.warns(RuntimeWarning, match="self-pairs"):
            value = interaction_energy(state, 0, spec)
        assert value == pytest.approx(2 * 0.25 * 1.0, abs=1e-15)

    def test_singular_self_pairs_raise_when_not_skipped(self):
        state = make_state([[[0.0], [1.0]]])
        spec = KernelSpec.riesz(1.0, 0.5)
        with pytest.raises(SingularEvaluationError):
            interaction_energy(state, 0, spec, skip_singular_self=False)


class TestSecondMomentEnergy:
    def test_single_phase_point(self):
        state = make_state([[[1.0]]], [[[2.0]]])
        assert second_moment_energy(state)[0] == pytest.approx(2.5, abs=1e-15)

    def test_origin_is_zero(self):
        state = make_state([[[0.0]]], [[[0.0]]])
        assert second_moment_energy(state)[0] == 0.0

    def test_matches_direct_sum(self, rng):
        for _ in range(10):
            pos = rng.normal(size=(6, 2))
            vel = rng.normal(size=(6, 2))
            state = make_state([pos], [vel])
            want = 0.5 * np.mean(np.sum(pos**2, axis=1) + np.sum(vel**2, axis=1))
            assert second_moment_energy(state)[0] == pytest.approx(want, rel=1e-13)

    def test_requires_velocities(self):
        with pytest.raises(MissingVelocitiesError):
            second_moment_energy(make_state([[[1.0]]]))


class TestLpNorm:
    def test_unit_indicator(self):
        grid = DensityGrid1D(0.0, 1.0, np.ones((1, 10)))
        assert lp_norm(grid, 1) == pytest.approx(1.0, abs=1e-14)
        assert lp_norm(grid, 2) == pytest.approx(1.0, abs=1e-14)
        assert lp_norm(grid, math.inf) == pytest.approx(1.0, abs=1e-14)

    def test_homogeneity(self, rng):
        vals = rng.uniform(0.0, 2.0, size=(1, 30))
        grid = DensityGrid1D(-1.0, 2.0, vals)
        scaled = DensityGrid1D(-1.0, 2.0, 3.0 * vals)
        for p in (1, 2, 5, math.inf):
            assert lp_norm(scaled, p) == pytest.approx(3.0 * lp_norm(grid, p), rel=1e-13)

    def test_gaussian_l2_reference_value(self):
        from scipy.stats import norm

        edges = np.linspace(-8.0, 8.0, 1601)
        cdf = norm.cdf(edges)
        vals = np.diff(cdf) / 0.01
        grid = DensityGrid1D(-8.0, 8.0, vals[None, :])
        assert lp_norm(grid, 2) == pytest.approx(0.53112596601359845724, abs=1e-4)


def matched_setup(rng, n_cells=200):
    pos = rng.uniform(-0.4, 0.4, size=(16, 1))
    mu = EmpiricalMeasure(pos, np.full(16, 1.0 / 16.0))
    dx = 2.0 / n_cells
    mol = Mollifier(max(1, round(1.0 / (2.0 * dx))))
    ref = mollify_to_grid(mu, mol, -1.0, 1.0, n_cells)
    u = np.sin(ref.centers)[None, :]
    vel = np.interp(pos[:, 0], ref.centers, u[0])[:, None]
    state = make_state([pos], [vel])
    return state, ref, u, mol


class TestModulatedEnergy:
    def test_matched_state_is_zero(self, rng):
        state, ref, u, mol = matched_setup(rng)
        out = modulated_energy(state, ref, u, 0.1, QUAD, mollifier=mol)
        assert out.kinetic_part == pytest.approx(0.0, abs=1e-13)
        assert out.interaction_part == pytest.approx(0.0, abs=1e-13)
        assert out.total == pytest.approx(0.0, abs=1e-12)

    def test_velocity_offset_gives_kinetic_part(self, rng):
        state, ref, u, mol = matched_setup(rng)
        flat = np.full_like(u, 2.0)
        zero_vel = make_state(
            [state.species[0].positions], [np.zeros_like(state.species[0].velocities)]
        )
        out = modulated_energy(zero_vel, ref, flat, 0.1, QUAD, mollifier=mol)
        assert out.kinetic_part == pytest.approx(2.0, abs=1e-13)
        assert out.interaction_part == pytest.approx(0.0, abs=1e-13)

    def test_interaction_part_nonnegative_riesz(self, rng):
        matrix = KernelMatrix.uniform(KernelSpec.riesz(1.0, 0.5), 1, 1)
        for _ in range(5):
            pos = rng.uniform(-0.5, 0.5, size=(8, 1))
            state = make_state([pos], [rng.normal(size=(8, 1))])
            shifted = EmpiricalMeasure(pos + 0.2, np.full(8, 0.125))
            ref = mollify_to_grid(shifted, Mollifier(16), -2.0, 2.0, 128)
            u = np.zeros((1, 128))
            out = modulated_energy(state, ref, u, 0.05, matrix)
            assert out.interaction_part >= -1e-10

    def test_shape_mismatch_rejected(self, rng):
        state, ref, u, mol = matched_setup(rng)
        with pytest.raises(GridMismatchError):
            modulated_energy(state, ref, u[:, :-1], 0.1, QUAD, mollifier=mol)

    def test_requires_velocities(self, rng):
        state, ref, u, mol = matched_setup(rng)
        bare = make_state([state.species[0].positions])
        with pytest.raises(MissingVelocitiesError):
            modulated_energy(bare, ref, u, 0.1, QUAD, mollifier=mol)


class TestRieszQuadrature:
    def test_cellpair_row_matches_fine_point_sampling(self):
        # signed mean-zero profile: difference of two shifted bumps
        spec = KernelSpec.riesz(1.0, 0.5)
        n, lo, hi = 64, -2.0, 2.0
        dx = (hi - lo) / n
        mol = Mollifier(4)
        centers = lo + (np.arange(n) + 0.5) * dx
        plus = mollify_to_grid(
            EmpiricalMeasure(np.array([[-0.5]]), np.ones(1)), mol, lo, hi, n
        )
        minus = mollify_to_grid(
            EmpiricalMeasure(np.array([[0.5]]), np.ones(1)), mol, lo, hi, n
        )
        g = plus.values[0] - minus.values[0]
        coarse = _toeplitz_quadratic(_quadratic_form_row(spec, dx, n), g) * dx**2

        # independent estimate: 64x finer mesh, kernel point values off the
        # diagonal plus the closed-form same-cell integral
        # int_0^h int_0^h |x-y|^-alpha dx dy = 2 h^(2-alpha)/((1-alpha)(2-alpha))
        r = 64
        dxf = dx / r
        gf = np.repeat(g, r)
        row = np.empty(n * r)
        row[0] = 2.0 * dxf**1.5 / (0.5 * 1.5) / dxf**2
        row[1:] = (np.arange(1, n * r) * dxf) ** -0.5
        fine = _toeplitz_quadratic(row, gf) * dxf**2
        assert coarse == pytest.approx(fine, rel=1e-2)
        del centers

    def test_unregularized_steep_riesz_rejected(self):
        with pytest.raises(QuadratureDivergenceError):
            _quadratic_form_row(KernelSpec.riesz(1.0, 1.2), 0.1, 32)

    def test_row_is_positive_definite_quadratic_form(self, rng):
        row = _quadratic_form_row(KernelSpec.riesz(1.0, 0.5), 0.05, 40)
        for _ in range(20):
            g = rng.normal(size=40)
            g -= g.mean()
            assert _toeplitz_quadratic(row, g) >= -1e-10


class TestDiagnosticsSeries:
    def test_shape_validation(self):
        with pytest.raises(Exception):
            DiagnosticsSeries(times=np.array([0.0, 1.0]), channels={"a": np.array([1.0])})

    def test_channel_lookup(self):
        s = DiagnosticsSeries(
            times=np.array([0.0, 1.0]), channels={"a": np.array([2.0, 3.0])}
        )
        np.testing.assert_array_equal(s["a"], [2.0, 3.0])

    def test_total_property(self):
        m = ModulatedEnergy(kinetic_part=1.5, interaction_part=0.25)
        assert m.total == 1.75
