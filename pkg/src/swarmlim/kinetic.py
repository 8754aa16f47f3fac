"""Measure solutions of the kinetic system via characteristics.

The phase-space characteristic system for inertia parameter eps is

    dX/dt = V,      dV/dt = (E(t, X) - V) / eps,

integrated with the exponential scheme (field frozen over each step, damping
integrated exactly).  Measure solutions are empirical measures pushed along
these characteristics.  picard_solve runs the fixed-point construction: each
iterate transports the initial measure along the field generated by the
previous iterate, starting from the push-forward along the time-frozen
initial field.  Consecutive iterates are compared in the summed phase-space
transport distance, sup over a uniform grid of sample times.
"""

from __future__ import annotations

from dataclasses import dataclass
from types import SimpleNamespace
from typing import Callable, NamedTuple

import numpy as np

from .ensemble import MultiSpeciesState, _phi_coeffs, _rebuild
from .errors import (
    DegenerateInitialDistanceError,
    DimensionMismatchError,
    FieldEvaluationError,
    MissingVelocitiesError,
    NoConvergenceError,
)
from .kernels import KernelMatrix, assemble_field
from .transport import EmpiricalMeasure, w1_exact


class PhasePoint(NamedTuple):
    """One phase-space point (position, velocity)."""

    x: np.ndarray
    v: np.ndarray


@dataclass(frozen=True)
class FieldFn:
    """Time-dependent velocity field with optional declared bounds.

    evaluate(t, X) maps a batch of positions (n, d) to field values (n, d).
    growth_bound bounds |E(t, x)| / (1 + |x|), lipschitz_bound the local
    spatial Lipschitz constant; both are informational.
    """

    evaluate: Callable[[float, np.ndarray], np.ndarray]
    dimension: int
    growth_bound: float = None
    lipschitz_bound: float = None


@dataclass(frozen=True)
class PicardConfig:
    """Fixed-point iteration controls.

    T is the horizon, dt the characteristic step (dt must divide T).  The
    iteration restarts on windows of length `window` (defaults to T, i.e. a
    single window); contraction is only guaranteed for short windows.
    Consecutive iterates are compared on n_compare+1 uniformly spaced sample
    times per window.
    """

    T: float
    dt: float
    tol: float = 1e-8
    max_iter: int = 20
    window: float = None
    n_compare: int = 32
    support_cap: int = 4096

    def __post_init__(self):
        if not self.T > 0 or not self.dt > 0:
            raise ValueError("T and dt must be positive")
        if self.tol <= 0 or self.max_iter < 1:
            raise ValueError("tol must be positive, max_iter >= 1")
        w = self.T if self.window is None else float(self.window)
        object.__setattr__(self, "window", w)
        if not 0 < w <= self.T + 1e-12:
            raise ValueError("window must lie in (0, T]")
        _steps_exact(w, self.dt, "window")
        _steps_exact(self.T, w, "horizon")


def _steps_exact(total: float, step: float, what: str) -> int:
    n = int(round(total / step))
    if n < 1 or abs(n * step - total) > 1e-9 * max(1.0, abs(total)):
        raise ValueError(f"{what} {total} is not an integer multiple of {step}")
    return n


def flow_map(field: FieldFn, eps: float, p0: PhasePoint, t: float, dt: float) -> PhasePoint:
    """Phase point transported over [0, t] along the damped characteristics."""
    if not eps > 0:
        raise ValueError("eps must be positive")
    if t < 0 or dt <= 0:
        raise ValueError("need t >= 0 and dt > 0")
    x = np.atleast_2d(np.asarray(p0.x, dtype=float))
    v = np.atleast_2d(np.asarray(p0.v, dtype=float))
    single = np.asarray(p0.x).ndim == 1
    if x.shape != v.shape or x.shape[1] != field.dimension:
        raise DimensionMismatchError("phase point does not match field dimension")
    x, v = _integrate_batch(lambda tau, xs: field.evaluate(tau, xs), eps, x, v, t, dt)
    if single:
        return PhasePoint(x=x[0], v=v[0])
    return PhasePoint(x=x, v=v)


def _integrate_batch(eval_fn, eps, x, v, t, dt):
    """exp-euler in time over [0, t]; last step shortened to land on t."""
    remaining = float(t)
    tau = 0.0
    while remaining > 1e-15 * max(1.0, t):
        h = min(dt, remaining)
        a, em, c2 = _phi_coeffs(h / eps)
        e = np.asarray(eval_fn(tau, x), dtype=float)
        if e.shape != x.shape or not np.all(np.isfinite(e)):
            raise FieldEvaluationError(
                f"field returned shape {e.shape} with non-finite entries present"
                if e.shape == x.shape
                else f"field returned shape {e.shape}, expected {x.shape}"
            )
        x = x + eps * em * v + eps * c2 * e
        v = a * v + em * e
        tau += h
        remaining -= h
    return x, v


def pushforward(
    field: FieldFn, eps: float, mu: EmpiricalMeasure, t: float, dt: float
) -> EmpiricalMeasure:
    """Push a phase-space empirical measure along the characteristic flow."""
    d = field.dimension
    if mu.dimension != 2 * d:
        raise DimensionMismatchError(
            f"phase-space measure must live in dimension {2 * d}, got {mu.dimension}"
        )
    x = np.ascontiguousarray(mu.points[:, :d])
    v = np.ascontiguousarray(mu.points[:, d:])
    x, v = _integrate_batch(lambda tau, xs: field.evaluate(tau, xs), eps, x, v, t, dt)
    return EmpiricalMeasure(np.concatenate([x, v], axis=1), mu.weights)


def field_from_state(matrix: KernelMatrix, state: MultiSpeciesState, i: int) -> FieldFn:
    """Autonomous field of species i generated by a frozen state."""
    shims = [
        SimpleNamespace(positions=e.positions, weights=e.weights) for e in state.species
    ]
    return FieldFn(
        evaluate=lambda t, xs: assemble_field(matrix, shims, i, xs),
        dimension=matrix.dimension,
    )


@dataclass(frozen=True)
class PicardResult:
    """Fixed-point outcome: trajectory on the step grid plus iterate history."""

    times: np.ndarray
    states: tuple
    distances: tuple  # one list of consecutive-iterate distances per window
    iterations: tuple  # Picard applications per window
    converged: bool


def _phase_clouds(positions, velocities, weights):
    return [
        EmpiricalMeasure(np.concatenate([x, v], axis=1), w)
        for x, v, w in zip(positions, velocities, weights)
    ]


def _traj_distance(traj_a, traj_b, weights, sample_idx, cap):
    """sup over sampled steps of the summed phase-space transport distance."""
    worst = 0.0
    for j in sample_idx:
        xa, va = traj_a[0][j], traj_a[1][j]
        xb, vb = traj_b[0][j], traj_b[1][j]
        total = 0.0
        for i in range(len(weights)):
            mu = EmpiricalMeasure(np.concatenate([xa[i], va[i]], axis=1), weights[i])
            nu = EmpiricalMeasure(np.concatenate([xb[i], vb[i]], axis=1), weights[i])
            total += w1_exact(mu, nu, support_cap=cap)
        worst = max(worst, total)
    return worst


def _transport_along(matrix, state0, eps, dt, n_steps, source_traj):
    """One Picard application: move state0 along the field of source_traj.

    source_traj is (positions_by_step, ...) giving, for each step j, the
    per-species source positions generating the field on [t_j, t_{j+1}).
    Returns the new trajectory as (positions_by_step, velocities_by_step).
    """
    weights = [e.weights for e in state0.species]
    n_species = state0.n_species
    x = [e.positions.copy() for e in state0.species]
    v = [e.velocities.copy() for e in state0.species]
    xs_by_step = [[xi.copy() for xi in x]]
    vs_by_step = [[vi.copy() for vi in v]]
    a, em, c2 = _phi_coeffs(dt / eps)
    for j in range(n_steps):
        shims = [
            SimpleNamespace(positions=p, weights=w)
            for p, w in zip(source_traj[j], weights)
        ]
        for i in range(n_species):
            e = assemble_field(matrix, shims, i, x[i])
            x[i] = x[i] + eps * em * v[i] + eps * c2 * e
            v[i] = a * v[i] + em * e
        xs_by_step.append([xi.copy() for xi in x])
        vs_by_step.append([vi.copy() for vi in v])
    return xs_by_step, vs_by_step


def _sample_indices(n_steps: int, n_compare: int) -> np.ndarray:
    k = min(n_compare, n_steps)
    return np.unique(np.round(np.linspace(0, n_steps, k + 1)).astype(int))


def picard_solve(
    state0: MultiSpeciesState, matrix: KernelMatrix, eps: float, config: PicardConfig
) -> PicardResult:
    """Construct the measure solution on [0, T] by windowed fixed-point iteration."""
    if not state0.has_velocities:
        raise MissingVelocitiesError("kinetic initial data needs velocities")
    if not eps > 0:
        raise ValueError("eps must be positive")
    n_windows = _steps_exact(config.T, config.window, "horizon")
    steps_per_window = _steps_exact(config.window, config.dt, "window")
    sample_idx = _sample_indices(steps_per_window, config.n_compare)
    weights = [e.weights for e in state0.species]

    all_states = [state0]
    all_times = [state0.time]
    distances = []
    iterations = []
    converged = True
    current = state0
    for w in range(n_windows):
        # iterate 0: field of the initial datum frozen in time
        frozen = [[e.positions for e in current.species]] * steps_per_window
        traj = _transport_along(matrix, current, eps, config.dt, steps_per_window, frozen)
        window_dists = []
        ok = False
        for _ in range(config.max_iter):
            new_traj = _transport_along(
                matrix, current, eps, config.dt, steps_per_window, traj[0]
            )
            d = _traj_distance(new_traj, traj, weights, sample_idx, config.support_cap)
            window_dists.append(d)
            traj = new_traj
            if d <= config.tol:
                ok = True
                break
        distances.append(window_dists)
        iterations.append(len(window_dists))
        if not ok:
            converged = False
            err = NoConvergenceError(
                f"window {w}: iterate distance {window_dists[-1]:.3e} above "
                f"tolerance {config.tol:.3e} after {config.max_iter} iterations"
            )
            err.distances = tuple(distances)
            raise err
        t0 = current.time
        for j in range(1, steps_per_window + 1):
            state_j = _rebuild(
                current, t0 + j * config.dt, traj[0][j], traj[1][j]
            )
            all_states.append(state_j)
            all_times.append(state_j.time)
        current = all_states[-1]
    return PicardResult(
        times=np.asarray(all_times),
        states=tuple(all_states),
        distances=tuple(tuple(d) for d in distances),
        iterations=tuple(iterations),
        converged=converged,
    )


@dataclass(frozen=True)
class StabilityResult:
    """Relative separation of two measure solutions over time."""

    times: np.ndarray
    ratios: np.ndarray
    initial_distance: float


def stability_ratio(
    state_f: MultiSpeciesState,
    state_g: MultiSpeciesState,
    matrix: KernelMatrix,
    eps: float,
    config: PicardConfig,
) -> StabilityResult:
    """r(t) = W1(f(t), g(t)) / W1(f0, g0) on sampled times of both solutions."""
    mus = _phase_clouds(
        [e.positions for e in state_f.species],
        [e.velocities for e in state_f.species],
        [e.weights for e in state_f.species],
    )
    nus = _phase_clouds(
        [e.positions for e in state_g.species],
        [e.velocities for e in state_g.species],
        [e.weights for e in state_g.species],
    )
    d0 = sum(w1_exact(a, b, support_cap=config.support_cap) for a, b in zip(mus, nus))
    if d0 == 0.0:
        raise DegenerateInitialDistanceError("initial configurations coincide")
    res_f = picard_solve(state_f, matrix, eps, config)
    res_g = picard_solve(state_g, matrix, eps, config)
    n_total = len(res_f.states) - 1
    idx = _sample_indices(n_total, config.n_compare)
    times = res_f.times[idx]
    ratios = np.empty(idx.shape[0])
    for k, j in enumerate(idx):
        sf, sg = res_f.states[j], res_g.states[j]
        total = 0.0
        for i in range(sf.n_species):
            mu = EmpiricalMeasure.from_ensemble(sf.species[i], phase_space=True)
            nu = EmpiricalMeasure.from_ensemble(sg.species[i], phase_space=True)
            total += w1_exact(mu, nu, support_cap=config.support_cap)
        ratios[k] = total / d0
    return StabilityResult(times=times, ratios=ratios, initial_distance=d0)
