"""Characteristic flows, push-forward measures, and the fixed-point solver."""

import math

import numpy as np
import pytest

from conftest import make_state
from swarmlim.ensemble import IntegratorConfig, step_second_order
from swarmlim.errors import (
    DegenerateInitialDistanceError,
    FieldEvaluationError,
    NoConvergenceError,
)
from swarmlim.kernels import KernelMatrix, KernelSpec, kernel_bounds
from swarmlim.kinetic import (
    FieldFn,
    PhasePoint,
    PicardConfig,
    field_from_state,
    flow_map,
    picard_solve,
    pushforward,
    stability_ratio,
)
from swarmlim.transport import EmpiricalMeasure

ZERO_FIELD_1D = FieldFn(evaluate=lambda t, xs: np.zeros_like(xs), dimension=1)


def constant_field(value):
    value = np.asarray(value, dtype=float)
    return FieldFn(
        evaluate=lambda t, xs: np.broadcast_to(value, xs.shape).copy(),
        dimension=value.size,
    )


def weak_gaussian_matrix(n_species, amplitude=0.05):
    spec = KernelSpec.gaussian(amplitude, 1.0, 0.0, 1.0)
    return KernelMatrix.uniform(spec, n_species, 1)


class TestFlowMap:
    def test_zero_field_closed_form(self):
        p = flow_map(ZERO_FIELD_1D, 1.0, PhasePoint(np.array([0.0]), np.array([1.0])), 1.0, 0.25)
        assert p.x[0] == pytest.approx(1.0 - math.exp(-1.0), abs=1e-14)
        assert p.v[0] == pytest.approx(math.exp(-1.0), abs=1e-14)

    def test_constant_field_closed_form(self):
        t = math.log(2.0)
        p = flow_map(
            constant_field([2.0]), 1.0, PhasePoint(np.array([0.0]), np.array([0.0])), t, t / 8
        )
        assert p.v[0] == pytest.approx(1.0, abs=1e-13)
        assert p.x[0] == pytest.approx(2.0 * math.log(2.0) - 1.0, abs=1e-13)

    def test_zero_time_is_identity(self):
        p0 = PhasePoint(np.array([0.7, -0.2]), np.array([1.5, 0.0]))
        p = flow_map(constant_field([1.0, 1.0]), 0.3, p0, 0.0, 0.1)
        np.testing.assert_array_equal(p.x, p0.x)
        np.testing.assert_array_equal(p.v, p0.v)

    def test_semigroup_for_constant_field(self):
        field = constant_field([0.4, -0.2])
        p0 = PhasePoint(np.array([1.0, 2.0]), np.array([-0.5, 0.3]))
        full = flow_map(field, 0.7, p0, 0.9, 0.1)
        half = flow_map(field, 0.7, p0, 0.4, 0.1)
        rest = flow_map(field, 0.7, half, 0.5, 0.1)
        np.testing.assert_allclose(rest.x, full.x, atol=1e-13)
        np.testing.assert_allclose(rest.v, full.v, atol=1e-13)

    def test_batch_matches_singles(self, rng):
        field = FieldFn(evaluate=lambda t, xs: np.sin(xs), dimension=2)
        xs = rng.normal(size=(5, 2))
        vs = rng.normal(size=(5, 2))
        batch = flow_map(field, 0.5, PhasePoint(xs, vs), 0.4, 0.01)
        for k in range(5):
            one = flow_map(field, 0.5, PhasePoint(xs[k], vs[k]), 0.4, 0.01)
            np.testing.assert_allclose(batch.x[k], one.x, atol=1e-14)
            np.testing.assert_allclose(batch.v[k], one.v, atol=1e-14)

    def test_bad_field_shape_raises(self):
        bad = FieldFn(evaluate=lambda t, xs: xs[:, :0], dimension=1)
        with pytest.raises(FieldEvaluationError):
            flow_map(bad, 1.0, PhasePoint(np.array([0.0]), np.array([0.0])), 1.0, 0.5)

    def test_lipschitz_envelope(self, rng):
        # linear field E(x) = -x has Lipschitz constant 1; phase distances may
        # grow at most like exp((1 + (1 + L)/eps) t)
        field = FieldFn(
            evaluate=lambda t, xs: -xs, dimension=1, lipschitz_bound=1.0
        )
        eps, t = 0.8, 0.5
        rate = 1.0 + (1.0 + 1.0) / eps
        envelope = math.exp(rate * t)
        for _ in range(100):
            pa = PhasePoint(rng.normal(size=1), rng.normal(size=1))
            pb = PhasePoint(rng.normal(size=1), rng.normal(size=1))
            d0 = math.hypot(pa.x[0] - pb.x[0], pa.v[0] - pb.v[0])
            fa = flow_map(field, eps, pa, t, 1e-3)
            fb = flow_map(field, eps, pb, t, 1e-3)
            dt_ = math.hypot(fa.x[0] - fb.x[0], fa.v[0] - fb.v[0])
            assert dt_ <= envelope * d0 * (1.0 + 1e-9)

    @pytest.mark.parametrize("eps,t", [(0.2, 1.0), (1.0, 0.3), (0.5, 0.5)])
    def test_field_perturbation_bound(self, eps, t):
        # flows under E = 0 and E = eta separate by at most
        # (exp(Ct) - 1) / (C eps) * eta with C = 1 + 1/eps
        eta = 0.7
        p0 = PhasePoint(np.array([0.0]), np.array([0.0]))
        a = flow_map(ZERO_FIELD_1D, eps, p0, t, 1e-3)
        b = flow_map(constant_field([eta]), eps, p0, t, 1e-3)
        gap = math.hypot(b.x[0] - a.x[0], b.v[0] - a.v[0])
        c = 1.0 + 1.0 / eps
        bound = (math.exp(c * t) - 1.0) / (c * eps) * eta
        assert gap <= bound


class TestPushforward:
    def test_weights_invariant(self, rng):
        field = FieldFn(evaluate=lambda t, xs: np.cos(xs), dimension=1)
        for _ in range(50):
            n = int(rng.integers(1, 12))
            w = rng.uniform(0.1, 1.0, size=n)
            w /= w.sum()
            mu = EmpiricalMeasure(rng.normal(size=(n, 2)), w)
            out = pushforward(field, 0.4, mu, 0.3, 0.05)
            np.testing.assert_array_equal(out.weights, mu.weights)

    def test_zero_field_formula(self, rng):
        mu = EmpiricalMeasure(rng.normal(size=(6, 2)), np.full(6, 1.0 / 6.0))
        eps, t = 0.5, 0.8
        out = pushforward(ZERO_FIELD_1D, eps, mu, t, 0.1)
        decay = math.exp(-t / eps)
        x0, v0 = mu.points[:, 0], mu.points[:, 1]
        np.testing.assert_allclose(out.points[:, 0], x0 + eps * v0 * (1 - decay), atol=1e-13)
        np.testing.assert_allclose(out.points[:, 1], v0 * decay, atol=1e-13)

    def test_zero_time_unchanged(self, rng):
        mu = EmpiricalMeasure(rng.normal(size=(4, 2)), np.full(4, 0.25))
        out = pushforward(ZERO_FIELD_1D, 1.0, mu, 0.0, 0.1)
        np.testing.assert_array_equal(out.points, mu.points)


class TestFieldFromState:
    def test_matches_direct_assembly(self, rng):
        state = make_state(
            [rng.normal(size=(5, 1)), rng.normal(size=(3, 1))],
            [rng.normal(size=(5, 1)), rng.normal(size=(3, 1))],
        )
        matrix = weak_gaussian_matrix(2, amplitude=1.0)
        field = field_from_state(matrix, state, 0)
        from swarmlim.kernels import assemble_field

        q = rng.normal(size=(7, 1))
        np.testing.assert_array_equal(field.evaluate(0.0, q), assemble_field(matrix, state.species, 0, q))


def small_two_species_state(rng, m=8):
    return make_state(
        [rng.uniform(-0.5, 0.5, size=(m, 1)), rng.uniform(-0.5, 0.5, size=(m, 1))],
        [rng.uniform(-0.1, 0.1, size=(m, 1)), rng.uniform(-0.1, 0.1, size=(m, 1))],
    )


class TestPicard:
    def test_zero_kernels_converges_immediately(self, rng):
        state = small_two_species_state(rng)
        matrix = KernelMatrix.uniform(KernelSpec.zero(), 2, 1)
        res = picard_solve(state, matrix, 0.5, PicardConfig(T=0.25, dt=0.0125))
        assert res.converged
        assert res.iterations == (1,)
        assert res.distances[0][0] <= 1e-15

    def test_contraction_rate_bound(self, rng):
        state = small_two_species_state(rng)
        matrix = weak_gaussian_matrix(2)
        eps, window = 0.5, 0.25
        bounds = kernel_bounds(matrix, 2.0)
        ups = bounds.upsilon
        c2 = 1.0 + (1.0 + ups) / eps
        kappa = (math.exp(c2 * window) - 1.0) / (c2 * eps) * ups
        assert kappa < 1.0
        cfg = PicardConfig(T=window, dt=window / 32, tol=1e-12, max_iter=40)
        res = picard_solve(state, matrix, eps, cfg)
        dists = res.distances[0]
        for a, b in zip(dists, dists[1:]):
            if a > 1e-12:
                assert b / a <= kappa * 1.1

    def test_fixed_point_matches_self_consistent_stepping(self, rng):
        state = small_two_species_state(rng)
        matrix = weak_gaussian_matrix(2)
        dt = 0.0125
        cfg = PicardConfig(T=0.25, dt=dt, tol=1e-13, max_iter=60)
        res = picard_solve(state, matrix, 0.5, cfg)
        direct = state
        icfg = IntegratorConfig(scheme="exp-euler", dt=dt)
        for _ in range(20):
            direct = step_second_order(direct, matrix, 0.5, icfg)
        for i in range(2):
            np.testing.assert_allclose(
                res.states[-1].species[i].positions,
                direct.species[i].positions,
                atol=1e-9,
            )
            np.testing.assert_allclose(
                res.states[-1].species[i].velocities,
                direct.species[i].velocities,
                atol=1e-9,
            )

    def test_windowing_covers_horizon(self, rng):
        state = small_two_species_state(rng, m=4)
        matrix = weak_gaussian_matrix(2)
        cfg = PicardConfig(T=0.5, dt=0.025, window=0.25)
        res = picard_solve(state, matrix, 0.5, cfg)
        assert len(res.distances) == 2
        assert res.times[0] == 0.0
        assert res.times[-1] == pytest.approx(0.5, abs=1e-12)
        np.testing.assert_allclose(np.diff(res.times), 0.025, atol=1e-12)

    def test_no_convergence_carries_history(self, rng):
        state = small_two_species_state(rng)
        # strong kernels over a long window break the contraction estimate
        matrix = KernelMatrix.uniform(KernelSpec.quadratic(40.0), 2, 1)
        cfg = PicardConfig(T=2.0, dt=0.05, tol=1e-14, max_iter=2)
        with pytest.raises(NoConvergenceError) as err:
            picard_solve(state, matrix, 0.1, cfg)
        assert len(err.value.distances[0]) == 2


class TestStability:
    def test_translation_under_zero_kernels(self, rng):
        state_f = small_two_species_state(rng, m=5)
        shift = 0.8
        state_g = make_state(
            [e.positions + shift for e in state_f.species],
            [e.velocities for e in state_f.species],
        )
        matrix = KernelMatrix.uniform(KernelSpec.zero(), 2, 1)
        cfg = PicardConfig(T=0.25, dt=0.0125, n_compare=8)
        res = stability_ratio(state_f, state_g, matrix, 0.5, cfg)
        assert res.initial_distance == pytest.approx(2 * shift, abs=1e-10)
        np.testing.assert_allclose(res.ratios, 1.0, atol=1e-9)

    def test_identical_initial_data_rejected(self, rng):
        state = small_two_species_state(rng, m=4)
        matrix = KernelMatrix.uniform(KernelSpec.zero(), 2, 1)
        with pytest.raises(DegenerateInitialDistanceError):
            stability_ratio(state, state, matrix, 0.5, PicardConfig(T=0.25, dt=0.025))


class TestConfigValidation:
    def test_window_must_divide_horizon(self):
        with pytest.raises(ValueError):
            PicardConfig(T=1.0, dt=0.1, window=0.3)

    def test_dt_must_divide_window(self):
        with pytest.raises(ValueError):
            PicardConfig(T=1.0, dt=0.15, window=0.5)
