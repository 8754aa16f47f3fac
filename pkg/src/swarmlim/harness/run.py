"""Run orchestration: single runs, reference comparisons, parameter sweeps.

A sweep evolves the inertial system once per parameter value from shared
initial data and compares each trajectory to a single reference computed
from the base config (except the analytic reference, which depends on
epsilon and is rebuilt per point).  Sweep points may execute on a thread
pool; results are merged in parameter order, so output bytes do not
depend on the worker count.
"""

from __future__ import annotations

import copy
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .. import _accel
from .._version import __version__
from ..diagnostics import (
    DiagnosticsSeries,
    free_energy,
    interaction_energy,
    modulated_energy,
    second_moment_energy,
    velocity_alignment,
)
from ..ensemble import (
    IntegratorConfig,
    MultiSpeciesState,
    SpeciesEnsemble,
    step_first_order,
    step_second_order,
    support_radius,
)
from ..errors import ConfigError, InsufficientValuesError, SwarmlimError
from ..grids import DensityGrid1D
from ..kinetic import PicardConfig, picard_solve
from ..macro import (
    CFL_NUMBER,
    grid_solve_1d,
    transport_velocity_centers,
    velocity_field,
)
from ..transport import (
    EmpiricalMeasure,
    Mollifier,
    mollify_to_grid,
    w1_empirical_vs_grid,
    w1_multispecies,
)
from .config import ExperimentConfig, SweepConfig, parse_experiment
from .io import (
    finish_manifest,
    sweep_header,
    write_csv,
    write_diagnostics,
    write_grids,
    write_json,
    write_picard_distances,
    write_snapshot_series,
)

WORKER_ENV = "SWARMLIM_WORKERS"


def worker_cap() -> int:
    raw = os.environ.get(WORKER_ENV, "")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def _sample_indices(n_steps: int, samples: int) -> np.ndarray:
    if n_steps == 0:
        return np.zeros(1, dtype=np.intp)
    k = min(samples, n_steps + 1)
    if k == 1:
        return np.zeros(1, dtype=np.intp)
    return np.unique(np.round(np.linspace(0.0, n_steps, k)).astype(np.intp))


def _strip_velocities(state: MultiSpeciesState) -> MultiSpeciesState:
    species = tuple(
        SpeciesEnsemble(positions=e.positions, weights=e.weights) for e in state.species
    )
    return MultiSpeciesState(time=state.time, species=species)


def _evolve_sampled(config: ExperimentConfig, state0: MultiSpeciesState, eps=None):
    """(times, states at the sampled step indices, Picard result or None)."""
    T, dt = config.horizon, config.integrator.dt
    n_steps = 0 if T == 0 else round(T / dt)
    idx = _sample_indices(n_steps, config.diagnostics.samples)
    times = idx * dt
    kind = config.dynamics.kind
    if kind == "kinetic_picard" and T > 0:
        pc = PicardConfig(
            T=T,
            dt=dt,
            tol=config.dynamics.tol,
            max_iter=config.dynamics.max_iter,
            window=config.dynamics.window,
            n_compare=config.dynamics.n_compare,
        )
        eff = config.dynamics.epsilon if eps is None else eps
        result = picard_solve(state0, config.kernels, eff, pc)
        states = [result.states[k] for k in idx]
        return times, states, result
    wanted = set(int(k) for k in idx)
    states = [state0] if 0 in wanted else []
    state = state0
    for k in range(1, n_steps + 1):
        if kind == "first_order":
            state = step_first_order(state, config.kernels, config.integrator)
        else:
            eff = config.dynamics.epsilon if eps is None else eps
            state = step_second_order(state, config.kernels, eff, config.integrator)
        if k in wanted:
            states.append(state)
    return times, states, None


def _evaluate_channels(
    config: ExperimentConfig, times: np.ndarray, states
) -> DiagnosticsSeries:
    channels: dict = {}
    n = config.n_species
    for name in config.diagnostics.channels:
        if name == "alignment":
            vals = np.array([velocity_alignment(s, config.kernels) for s in states])
            for i in range(n):
                channels[f"alignment_{i}"] = vals[:, i]
        elif name == "free_energy":
            channels["free_energy"] = np.array(
                [free_energy(s, config.kernels) for s in states]
            )
        elif name == "interaction":
            for i in range(n):
                spec = config.kernels.entries[i][i]
                channels[f"interaction_{i}"] = np.array(
                    [interaction_energy(s, i, spec) for s in states]
                )
        elif name == "second_moment":
            vals = np.array([second_moment_energy(s) for s in states])
            for i in range(n):
                channels[f"second_moment_{i}"] = vals[:, i]
        elif name == "support_radius":
            channels["support_radius"] = np.array([support_radius(s) for s in states])
    return DiagnosticsSeries(times=times, channels=channels)


def simulate_trajectory(config: ExperimentConfig):
    """(times, sampled states, diagnostics series) for a single run."""
    from .samplers import build_initial_state

    state0 = build_initial_state(config)
    times, states, _ = _evolve_sampled(config, state0)
    series = _evaluate_channels(config, times, states)
    return times, states, series


def run(config: ExperimentConfig, out_dir=None):
    """Execute a run and write snapshots, diagnostics and the manifest.

    Numerical failures are recorded in the manifest instead of raising;
    config and I/O problems raise as usual.
    """
    from .samplers import build_initial_state

    t0 = time.perf_counter()
    target = out_dir or config.output_dir
    if target is None:
        raise ConfigError("output_dir", "no output directory given")
    target = Path(target)
    target.mkdir(parents=True, exist_ok=True)
    _accel.set_threads(worker_cap())
    chash = config.config_hash()
    paths = []
    error = None
    try:
        state0 = build_initial_state(config)
        times, states, picard = _evolve_sampled(config, state0)
        series = _evaluate_channels(config, times, states)
        paths += write_snapshot_series(target, times, states)
        if picard is not None:
            dist_path = target / "picard_distances.csv"
            write_picard_distances(dist_path, picard.distances)
            paths.append(dist_path)
        paths += write_diagnostics(target, series, chash)
    except ConfigError:
        raise
    except (SwarmlimError, FloatingPointError, ValueError) as exc:
        error = f"{type(exc).__name__}: {exc}"
    return finish_manifest(target, paths, chash, __version__, config.seed, t0, error)


def _analytic_state(state0: MultiSpeciesState, eps: float, t: float) -> MultiSpeciesState:
    """Closed-form damped free flight (all kernels zero)."""
    decay = math.exp(-t / eps)
    species = []
    for ens in state0.species:
        z = ens.positions + eps * (1.0 - decay) * ens.velocities
        v = decay * ens.velocities
        species.append(SpeciesEnsemble(positions=z, weights=ens.weights, velocities=v))
    return MultiSpeciesState(time=state0.time + t, species=species)


@dataclass(frozen=True, eq=False)
class _Reference:
    """Per-sample-time reference data: particle states or density grids."""

    kind: str
    matrix: object = None
    states: tuple = ()
    grids: tuple = ()


def _grid_from_particles(config: ExperimentConfig, state) -> DensityGrid1D:
    gs = config.comparison.grid
    dx = (gs.x_max - gs.x_min) / gs.n_cells
    mol = Mollifier(max(1, round(1.0 / (2.0 * dx))))
    rows = []
    for ens in state.species:
        mu = EmpiricalMeasure(ens.positions, ens.weights)
        rows.append(mollify_to_grid(mu, mol, gs.x_min, gs.x_max, gs.n_cells).values[0])
    return DensityGrid1D(gs.x_min, gs.x_max, np.stack(rows))


def _auto_grid_dt(grid0: DensityGrid1D, config: ExperimentConfig) -> float:
    """Grid step: an exact divisor of the particle step, within CFL at t=0
    with a 4x margin for later speed growth."""
    dt = config.integrator.dt
    w0 = transport_velocity_centers(grid0, config.kernels)
    wmax = float(np.max(np.abs(w0))) if w0.size else 0.0
    if wmax == 0.0:
        return dt
    target = CFL_NUMBER * grid0.dx / (4.0 * wmax)
    return dt / max(1, math.ceil(dt / target))


def _build_reference(config: ExperimentConfig, state0, times, eps):
    cmp = config.comparison
    if cmp.reference == "analytic":
        states = tuple(_analytic_state(state0, eps, float(t)) for t in times)
        return _Reference(kind="analytic", matrix=config.kernels, states=states)
    if cmp.reference == "macro_particle":
        macro_cfg = IntegratorConfig(scheme="rk4", dt=config.integrator.dt)
        bare = _strip_velocities(state0)
        n_steps = 0 if config.horizon == 0 else round(config.horizon / macro_cfg.dt)
        idx = _sample_indices(n_steps, config.diagnostics.samples)
        wanted = set(int(k) for k in idx)
        states = [bare] if 0 in wanted else []
        state = bare
        for k in range(1, n_steps + 1):
            state = step_first_order(state, config.kernels, macro_cfg)
            if k in wanted:
                states.append(state)
        return _Reference(kind="macro_particle", matrix=config.kernels, states=tuple(states))
    # grid_1d
    grid0 = _grid_from_particles(config, state0)
    gs = cmp.grid
    dt_grid = gs.dt if gs.dt is not None else _auto_grid_dt(grid0, config)
    if config.horizon == 0:
        return _Reference(kind="grid_1d", matrix=config.kernels, grids=(grid0,))
    traj = grid_solve_1d(grid0, config.kernels, dt_grid, config.horizon)
    grids = tuple(traj.at_time(float(t)) for t in times)
    return _Reference(kind="grid_1d", matrix=config.kernels, grids=grids)


def _reference_grid_and_velocity(config, ref: _Reference, k: int):
    """(density grid, transport velocity at centers) at sample index k."""
    if ref.kind == "grid_1d":
        grid = ref.grids[k]
        return grid, transport_velocity_centers(grid, ref.matrix)
    state = ref.states[k]
    grid = _grid_from_particles(config, state)
    ens = list(state.species)
    sample = velocity_field(ens, ref.matrix, grid.centers)
    return grid, -sample.values[:, :, 0]


def _metric_value(config, ref: _Reference, k: int, state_eps) -> float:
    cmp = config.comparison
    if ref.kind == "grid_1d":
        total = 0.0
        for i, ens in enumerate(state_eps.species):
            mu = EmpiricalMeasure(ens.positions, ens.weights)
            total += w1_empirical_vs_grid(mu, ref.grids[k], species=i)
        return total
    mus = [EmpiricalMeasure(e.positions, e.weights) for e in state_eps.species]
    nus = [EmpiricalMeasure(e.positions, e.weights) for e in ref.states[k].species]
    if cmp.metric == "w1_exact":
        return w1_multispecies(mus, nus, method="exact")
    if cmp.metric == "w1_1d":
        return w1_multispecies(mus, nus, method="1d")
    return w1_multispecies(
        mus, nus, method="sliced", n_directions=cmp.n_directions, seed=cmp.metric_seed
    )


def _sample_times(config: ExperimentConfig) -> np.ndarray:
    T, dt = config.horizon, config.integrator.dt
    n_steps = 0 if T == 0 else round(T / dt)
    return _sample_indices(n_steps, config.diagnostics.samples) * dt


def _compare_series(config, eps, state0, *, metric_hook=None, ref=None) -> DiagnosticsSeries:
    """Channels of one epsilon run against the configured reference."""
    times, states, _ = _evolve_sampled(config, state0, eps=eps)
    if ref is None:
        ref = _build_reference(config, state0, times, eps)
    n = config.n_species
    with_mod = config.comparison.grid is not None
    w1 = np.empty(times.size)
    align = np.empty((times.size, n))
    moments = np.empty((times.size, n))
    ekin = np.empty(times.size)
    eint = np.empty(times.size)
    for k, state in enumerate(states):
        if metric_hook is not None:
            w1[k] = metric_hook(eps, float(times[k]), state, ref)
        else:
            w1[k] = _metric_value(config, ref, k, state)
        align[k] = velocity_alignment(state, config.kernels)
        moments[k] = second_moment_energy(state)
        if with_mod:
            grid, w_centers = _reference_grid_and_velocity(config, ref, k)
            em = modulated_energy(state, grid, w_centers, eps, config.kernels)
            ekin[k] = em.kinetic_part
            eint[k] = em.interaction_part
    channels = {"w1": w1}
    for i in range(n):
        channels[f"alignment_{i}"] = align[:, i]
    if with_mod:
        channels["ekin_mod"] = ekin
        channels["eint_mod"] = eint
        channels["etotal_mod"] = ekin + eint
    for i in range(n):
        channels[f"second_moment_{i}"] = moments[:, i]
    return DiagnosticsSeries(times=times, channels=channels)


def compare_to_macro(config: ExperimentConfig, eps=None) -> DiagnosticsSeries:
    """Side-by-side epsilon system vs reference on shared initial data."""
    from .samplers import build_initial_state

    if config.comparison is None:
        raise ConfigError("comparison", "comparison table required")
    if config.dynamics.kind == "first_order":
        raise ConfigError("dynamics.kind", "comparison needs inertial dynamics")
    if eps is None:
        eps = config.dynamics.epsilon
    _accel.set_threads(worker_cap())
    state0 = build_initial_state(config)
    return _compare_series(config, float(eps), state0)


def _point_config(sw: SweepConfig, value: float) -> ExperimentConfig:
    """Re-parse the base raw dict with the sweep parameter substituted."""
    raw = copy.deepcopy(sw.base.raw)
    if sw.parameter == "epsilon":
        raw["dynamics"]["epsilon"] = value
    else:
        for row in raw["kernels"]["rows"]:
            for entry in row:
                if entry.get("type") == "riesz":
                    entry["type"] = "regularized_riesz"
                    entry["delta"] = value
                elif entry.get("type") == "regularized_riesz":
                    entry["delta"] = value
    return parse_experiment(raw, allow_sweep_table=True)


@dataclass(frozen=True, eq=False)
class SweepResult:
    """Merged convergence table plus the fitted log-log rate."""

    parameter: str
    values: tuple
    times: np.ndarray
    series: tuple
    finals: np.ndarray
    slope: float
    intercept: float
    degenerate: bool
    errors: dict
    output_dir: str | None = None
    manifest: object = None


def _fit_rate(values, finals):
    ok = np.isfinite(finals) & (finals > 0.0)
    degenerate = bool((~ok).any()) or int(ok.sum()) < 2
    if degenerate:
        return float("nan"), float("nan"), True
    slope, intercept = np.polyfit(np.log(np.asarray(values)), np.log(finals), 1)
    return float(slope), float(intercept), False


def sweep(sw: SweepConfig, out_dir=None, *, metric_hook=None) -> SweepResult:
    """Run the parameter study and fit the final-time convergence rate."""
    from .samplers import build_initial_state

    if len(sw.values) < 3:
        raise InsufficientValuesError("need at least 3 parameter values")
    base = sw.base
    _accel.set_threads(worker_cap())
    state0 = build_initial_state(base)
    shared_ref = None
    if base.comparison.reference != "analytic":
        # one reference for every point, built from the base kernels
        shared_ref = _build_reference(
            base, state0, _sample_times(base), base.dynamics.epsilon or 1.0
        )

    def _wrap_hook(value):
        if metric_hook is None:
            return None
        return lambda eps, t, state, ref: metric_hook(value, t, state, ref)

    def point(value: float):
        cfg = _point_config(sw, value)
        eps = cfg.dynamics.epsilon
        return _compare_series(
            cfg, eps, state0, metric_hook=_wrap_hook(value), ref=shared_ref
        )

    results: list = [None] * len(sw.values)
    errors: dict = {}
    cap = min(worker_cap(), len(sw.values))
    if cap == 1:
        for k, value in enumerate(sw.values):
            try:
                results[k] = point(value)
            except SwarmlimError as exc:
                errors[value] = f"{type(exc).__name__}: {exc}"
    else:
        with ThreadPoolExecutor(max_workers=cap) as pool:
            futures = [pool.submit(point, value) for value in sw.values]
            for k, fut in enumerate(futures):
                try:
                    results[k] = fut.result()
                except SwarmlimError as exc:
                    errors[sw.values[k]] = f"{type(exc).__name__}: {exc}"

    times = None
    finals = np.full(len(sw.values), np.nan)
    for k, series in enumerate(results):
        if series is None:
            continue
        times = series.times
        w = min(sw.fit_window, series.times.size)
        finals[k] = float(np.mean(series.channels["w1"][-w:]))
    slope, intercept, degenerate = _fit_rate(sw.values, finals)

    manifest = None
    if out_dir is not None:
        manifest = _write_sweep(sw, out_dir, results, finals, slope, intercept,
                                degenerate, errors, shared_ref)
    return SweepResult(
        parameter=sw.parameter,
        values=sw.values,
        times=times if times is not None else np.zeros(0),
        series=tuple(results),
        finals=finals,
        slope=slope,
        intercept=intercept,
        degenerate=degenerate,
        errors=errors,
        output_dir=None if out_dir is None else str(out_dir),
        manifest=manifest,
    )


def _write_sweep(sw, out_dir, results, finals, slope, intercept, degenerate,
                 errors, shared_ref=None):
    t0 = time.perf_counter()
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    base = sw.base
    chash = base.config_hash()
    n = base.n_species
    paths = []
    if shared_ref is not None and shared_ref.kind == "grid_1d":
        grid_path = out_dir / "reference_grids.csv"
        sampled = list(zip(_sample_times(base), shared_ref.grids))
        write_grids(grid_path, sampled, shared_ref.matrix)
        paths.append(grid_path)
    rows = []
    for value, series in zip(sw.values, results):
        if series is None:
            continue
        point_dir = out_dir / f"point_{value:g}"
        point_dir.mkdir(parents=True, exist_ok=True)
        point_hash = _point_config(sw, value).config_hash()
        paths += write_diagnostics(point_dir, series, point_hash)
        has_mod = "ekin_mod" in series.channels
        for k, t in enumerate(series.times):
            row = [value, t, series.channels["w1"][k]]
            row += [series.channels[f"alignment_{i}"][k] for i in range(n)]
            row.append(series.channels["ekin_mod"][k] if has_mod else float("nan"))
            rows.append(row)
    table_path = out_dir / "sweep.csv"
    write_csv(table_path, sweep_header(n), rows)
    paths.append(table_path)
    summary = {
        "parameter": sw.parameter,
        "values": list(sw.values),
        "finals": [None if not np.isfinite(v) else v for v in finals],
        "slope": None if not np.isfinite(slope) else slope,
        "intercept": None if not np.isfinite(intercept) else intercept,
        "degenerate": degenerate,
        "fit_window": sw.fit_window,
        "errors": {f"{k:g}": v for k, v in errors.items()},
    }
    summary_path = out_dir / "sweep.json"
    write_json(summary_path, summary)
    paths.append(summary_path)
    error = "; ".join(f"{k:g}: {v}" for k, v in errors.items()) or None
    return finish_manifest(out_dir, paths, chash, __version__, base.seed, t0, error)
