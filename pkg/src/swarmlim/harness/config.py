"""Experiment and sweep configuration: parsing, validation, hashing.

TOML is the native format; a JSON mirror with the same structure is
accepted (chosen by file extension, .json vs anything else).  Validation
errors carry the dotted path of the offending field, e.g.
``species[1].initial.kind``.
"""

from __future__ import annotations

import hashlib
import json
import sys
from dataclasses import dataclass
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from ..ensemble import IntegratorConfig, SCHEMES
from ..errors import ConfigError
from ..kernels import KernelMatrix, KernelSpec

_DYNAMICS = ("first_order", "second_order", "kinetic_picard")
_REFERENCES = ("analytic", "macro_particle", "grid_1d")
_METRICS = ("w1_exact", "w1_1d", "w1_sliced")
_CHANNELS = (
    "alignment",
    "free_energy",
    "interaction",
    "second_moment",
    "support_radius",
)
_FIRST_ORDER_SCHEMES = ("euler", "rk4")
_SAMPLER_KINDS = ("uniform_interval", "uniform_ball", "gaussian", "two_bump", "grid")
_VELOCITY_KINDS = ("zero", "constant", "well_prepared")

_KERNEL_FIELDS = {
    "zero": (),
    "quadratic": ("a",),
    "morse": ("C_a", "l_a", "C_r", "l_r"),
    "gaussian": ("C_a", "l_a", "C_r", "l_r"),
    "riesz": ("C", "alpha"),
    "regularized_riesz": ("C", "alpha", "delta"),
}
_KERNEL_CTORS = {
    "zero": KernelSpec.zero,
    "quadratic": KernelSpec.quadratic,
    "morse": KernelSpec.morse,
    "gaussian": KernelSpec.gaussian,
    "riesz": KernelSpec.riesz,
    "regularized_riesz": KernelSpec.regularized_riesz,
}
# spec.variant -> config tag
_VARIANT_TAGS = {
    "zero": "zero",
    "quadratic": "quadratic",
    "morse": "morse",
    "gaussian": "gaussian",
    "riesz": "riesz",
    "regriesz": "regularized_riesz",
}

_MISSING = object()


def _table(value, path: str) -> dict:
    if not isinstance(value, dict):
        raise ConfigError(path, "expected a table")
    return value


def _get(table: dict, key: str, path: str, default=_MISSING):
    if key in table:
        return table[key]
    if default is _MISSING:
        raise ConfigError(f"{path}.{key}" if path else key, "required field is missing")
    return default


def _num(value, path: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(path, f"expected a number, got {type(value).__name__}")
    return float(value)


def _int(value, path: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(path, f"expected an integer, got {type(value).__name__}")
    return value


def _str(value, path: str, allowed=None) -> str:
    if not isinstance(value, str):
        raise ConfigError(path, f"expected a string, got {type(value).__name__}")
    if allowed is not None and value not in allowed:
        raise ConfigError(path, f"{value!r} is not one of {list(allowed)}")
    return value


def _no_extra(table: dict, known: tuple, path: str) -> None:
    extra = sorted(set(table) - set(known))
    if extra:
        raise ConfigError(path or "<root>", f"unknown keys {extra}")


def _vector(value, dimension: int, path: str) -> tuple:
    """Scalar broadcast or explicit list of length d."""
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return (float(value),) * dimension
    if isinstance(value, list):
        if len(value) != dimension:
            raise ConfigError(path, f"expected {dimension} components, got {len(value)}")
        return tuple(_num(v, f"{path}[{k}]") for k, v in enumerate(value))
    raise ConfigError(path, "expected a number or a list of numbers")


def kernel_from_table(tab, path: str) -> KernelSpec:
    tab = _table(tab, path)
    tag = _str(_get(tab, "type", path), f"{path}.type", _KERNEL_FIELDS)
    fields = _KERNEL_FIELDS[tag]
    _no_extra(tab, ("type", *fields), path)
    args = []
    for name in fields:
        args.append(_num(_get(tab, name, path), f"{path}.{name}"))
    try:
        return _KERNEL_CTORS[tag](*args)
    except ValueError as exc:
        raise ConfigError(path, str(exc)) from exc


def kernel_to_table(spec: KernelSpec) -> dict:
    tag = _VARIANT_TAGS[spec.variant]
    return {
        "type": tag,
        **dict(zip(_KERNEL_FIELDS[tag], (float(p) for p in spec.params))),
    }


@dataclass(frozen=True)
class SamplerSpec:
    """Named initial-position density plus its parameters."""

    kind: str
    params: dict


@dataclass(frozen=True)
class VelocitySpec:
    kind: str
    value: tuple | None = None


@dataclass(frozen=True)
class SpeciesConfig:
    count: int
    initial: SamplerSpec
    velocity: VelocitySpec | None


@dataclass(frozen=True)
class GridSpec:
    x_min: float
    x_max: float
    n_cells: int
    dt: float | None = None


@dataclass(frozen=True)
class ComparisonSpec:
    reference: str
    metric: str
    n_directions: int = 64
    metric_seed: int = 0
    grid: GridSpec | None = None


@dataclass(frozen=True)
class DynamicsSpec:
    kind: str
    epsilon: float | None = None
    tol: float = 1e-8
    max_iter: int = 20
    window: float | None = None
    n_compare: int = 32


@dataclass(frozen=True)
class DiagnosticsSelection:
    channels: tuple = ()
    samples: int = 33


@dataclass(frozen=True, eq=False)
class ExperimentConfig:
    dimension: int
    seed: int
    horizon: float
    dynamics: DynamicsSpec
    integrator: IntegratorConfig
    species: tuple
    kernels: KernelMatrix
    diagnostics: DiagnosticsSelection
    comparison: ComparisonSpec | None
    output_dir: str | None
    raw: dict

    @property
    def n_species(self) -> int:
        return len(self.species)

    def config_hash(self) -> str:
        return canonical_hash(self.raw)


@dataclass(frozen=True, eq=False)
class SweepConfig:
    base: ExperimentConfig
    parameter: str
    values: tuple
    fit_window: int = 1


def canonical_hash(raw: dict) -> str:
    """Hash of the parsed config, independent of key order and output dir."""
    clean = {k: v for k, v in raw.items() if k != "output_dir"}
    blob = json.dumps(clean, sort_keys=True, separators=(",", ":"), allow_nan=False)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def _parse_sampler(tab, dimension: int, path: str) -> SamplerSpec:
    tab = _table(tab, path)
    kind = _str(_get(tab, "kind", path), f"{path}.kind", _SAMPLER_KINDS)
    if kind == "uniform_interval":
        _no_extra(tab, ("kind", "a", "b"), path)
        a = _num(_get(tab, "a", path), f"{path}.a")
        b = _num(_get(tab, "b", path), f"{path}.b")
        if not a < b:
            raise ConfigError(f"{path}.b", "interval needs a < b")
        params = {"a": a, "b": b}
    elif kind == "uniform_ball":
        _no_extra(tab, ("kind", "center", "radius"), path)
        center = _vector(_get(tab, "center", path, 0.0), dimension, f"{path}.center")
        radius = _num(_get(tab, "radius", path), f"{path}.radius")
        if radius <= 0:
            raise ConfigError(f"{path}.radius", "radius must be positive")
        params = {"center": center, "radius": radius}
    elif kind == "gaussian":
        _no_extra(tab, ("kind", "mean", "std"), path)
        mean = _vector(_get(tab, "mean", path, 0.0), dimension, f"{path}.mean")
        std = _num(_get(tab, "std", path, 1.0), f"{path}.std")
        if std <= 0:
            raise ConfigError(f"{path}.std", "std must be positive")
        params = {"mean": mean, "std": std}
    elif kind == "two_bump":
        _no_extra(tab, ("kind", "centers", "std", "weight"), path)
        centers = _get(tab, "centers", path)
        if not isinstance(centers, list) or len(centers) != 2:
            raise ConfigError(f"{path}.centers", "expected a list of two centers")
        c0 = _vector(centers[0], dimension, f"{path}.centers[0]")
        c1 = _vector(centers[1], dimension, f"{path}.centers[1]")
        std = _num(_get(tab, "std", path, 1.0), f"{path}.std")
        weight = _num(_get(tab, "weight", path, 0.5), f"{path}.weight")
        if std <= 0:
            raise ConfigError(f"{path}.std", "std must be positive")
        if not 0.0 < weight < 1.0:
            raise ConfigError(f"{path}.weight", "mixture weight must lie in (0, 1)")
        params = {"centers": (c0, c1), "std": std, "weight": weight}
    else:  # grid
        _no_extra(tab, ("kind", "a", "b"), path)
        a = _num(_get(tab, "a", path), f"{path}.a")
        b = _num(_get(tab, "b", path), f"{path}.b")
        if not a < b:
            raise ConfigError(f"{path}.b", "box needs a < b")
        params = {"a": a, "b": b}
    return SamplerSpec(kind=kind, params=params)


def _parse_velocity(tab, dimension: int, path: str) -> VelocitySpec:
    tab = _table(tab, path)
    kind = _str(_get(tab, "kind", path), f"{path}.kind", _VELOCITY_KINDS)
    if kind == "constant":
        _no_extra(tab, ("kind", "value"), path)
        value = _vector(_get(tab, "value", path), dimension, f"{path}.value")
        return VelocitySpec(kind=kind, value=value)
    _no_extra(tab, ("kind",), path)
    return VelocitySpec(kind=kind)


def _parse_dynamics(tab, path: str) -> DynamicsSpec:
    tab = _table(tab, path)
    kind = _str(_get(tab, "kind", path), f"{path}.kind", _DYNAMICS)
    if kind == "first_order":
        _no_extra(tab, ("kind",), path)
        return DynamicsSpec(kind=kind)
    known = ("kind", "epsilon")
    if kind == "kinetic_picard":
        known = ("kind", "epsilon", "tol", "max_iter", "window", "n_compare")
    _no_extra(tab, known, path)
    eps = _num(_get(tab, "epsilon", path), f"{path}.epsilon")
    if eps <= 0:
        raise ConfigError(f"{path}.epsilon", "epsilon must be positive")
    if kind == "second_order":
        return DynamicsSpec(kind=kind, epsilon=eps)
    tol = _num(_get(tab, "tol", path, 1e-8), f"{path}.tol")
    max_iter = _int(_get(tab, "max_iter", path, 20), f"{path}.max_iter")
    window = tab.get("window")
    if window is not None:
        window = _num(window, f"{path}.window")
        if window <= 0:
            raise ConfigError(f"{path}.window", "window must be positive")
    n_compare = _int(_get(tab, "n_compare", path, 32), f"{path}.n_compare")
    if tol <= 0:
        raise ConfigError(f"{path}.tol", "tol must be positive")
    if max_iter < 1:
        raise ConfigError(f"{path}.max_iter", "max_iter must be >= 1")
    if n_compare < 2:
        raise ConfigError(f"{path}.n_compare", "n_compare must be >= 2")
    return DynamicsSpec(
        kind=kind, epsilon=eps, tol=tol, max_iter=max_iter, window=window, n_compare=n_compare
    )


def _parse_grid(tab, path: str) -> GridSpec:
    tab = _table(tab, path)
    _no_extra(tab, ("x_min", "x_max", "n_cells", "dt"), path)
    x_min = _num(_get(tab, "x_min", path), f"{path}.x_min")
    x_max = _num(_get(tab, "x_max", path), f"{path}.x_max")
    n_cells = _int(_get(tab, "n_cells", path), f"{path}.n_cells")
    if not x_min < x_max:
        raise ConfigError(f"{path}.x_max", "grid needs x_min < x_max")
    if n_cells < 4:
        raise ConfigError(f"{path}.n_cells", "need at least 4 cells")
    dt = tab.get("dt")
    if dt is not None:
        dt = _num(dt, f"{path}.dt")
        if dt <= 0:
            raise ConfigError(f"{path}.dt", "dt must be positive")
    return GridSpec(x_min=x_min, x_max=x_max, n_cells=n_cells, dt=dt)


def _parse_comparison(tab, dimension: int, path: str) -> ComparisonSpec:
    tab = _table(tab, path)
    _no_extra(tab, ("reference", "metric", "n_directions", "metric_seed", "grid"), path)
    reference = _str(_get(tab, "reference", path), f"{path}.reference", _REFERENCES)
    metric = _str(_get(tab, "metric", path, "w1_exact"), f"{path}.metric", _METRICS)
    n_directions = _int(_get(tab, "n_directions", path, 64), f"{path}.n_directions")
    if n_directions < 1:
        raise ConfigError(f"{path}.n_directions", "need at least one direction")
    metric_seed = _int(_get(tab, "metric_seed", path, 0), f"{path}.metric_seed")
    grid = None
    if "grid" in tab:
        grid = _parse_grid(tab["grid"], f"{path}.grid")
    if reference == "grid_1d":
        if dimension != 1:
            raise ConfigError(f"{path}.reference", "grid_1d reference needs dimension 1")
        if grid is None:
            raise ConfigError(f"{path}.grid", "grid_1d reference needs a grid table")
    if grid is not None and dimension != 1:
        raise ConfigError(f"{path}.grid", "grids are one-dimensional")
    if metric == "w1_1d" and dimension != 1:
        raise ConfigError(f"{path}.metric", "w1_1d needs dimension 1")
    return ComparisonSpec(
        reference=reference,
        metric=metric,
        n_directions=n_directions,
        metric_seed=metric_seed,
        grid=grid,
    )


def _parse_diagnostics(tab, dynamics: DynamicsSpec, path: str) -> DiagnosticsSelection:
    tab = _table(tab, path)
    _no_extra(tab, ("channels", "samples"), path)
    channels = tab.get("channels", [])
    if not isinstance(channels, list):
        raise ConfigError(f"{path}.channels", "expected a list of channel names")
    out = []
    for k, name in enumerate(channels):
        name = _str(name, f"{path}.channels[{k}]", _CHANNELS)
        if name in ("alignment", "second_moment") and dynamics.kind == "first_order":
            raise ConfigError(
                f"{path}.channels[{k}]", f"{name} needs velocities (second-order dynamics)"
            )
        if name in out:
            raise ConfigError(f"{path}.channels[{k}]", f"duplicate channel {name!r}")
        out.append(name)
    samples = _int(_get(tab, "samples", path, 33), f"{path}.samples")
    if samples < 1:
        raise ConfigError(f"{path}.samples", "need at least one sample")
    return DiagnosticsSelection(channels=tuple(out), samples=samples)


_TOP_KEYS = (
    "dimension",
    "seed",
    "horizon",
    "output_dir",
    "dynamics",
    "integrator",
    "species",
    "kernels",
    "diagnostics",
    "comparison",
    "sweep",
)


def parse_experiment(raw: dict, *, allow_sweep_table: bool = False) -> ExperimentConfig:
    raw = _table(raw, "<root>")
    _no_extra(raw, _TOP_KEYS, "")
    if "sweep" in raw and not allow_sweep_table:
        raise ConfigError("sweep", "sweep table present; use the sweep entry point")
    dimension = _int(_get(raw, "dimension", ""), "dimension")
    if dimension < 1:
        raise ConfigError("dimension", "dimension must be >= 1")
    seed = _int(_get(raw, "seed", ""), "seed")
    horizon = _num(_get(raw, "horizon", ""), "horizon")
    if horizon < 0:
        raise ConfigError("horizon", "horizon must be >= 0")
    dynamics = _parse_dynamics(_get(raw, "dynamics", ""), "dynamics")

    itab = _table(_get(raw, "integrator", ""), "integrator")
    _no_extra(itab, ("scheme", "dt"), "integrator")
    default_scheme = "rk4" if dynamics.kind == "first_order" else "exp-euler"
    scheme = _str(
        _get(itab, "scheme", "integrator", default_scheme), "integrator.scheme", SCHEMES
    )
    if dynamics.kind == "first_order" and scheme not in _FIRST_ORDER_SCHEMES:
        raise ConfigError(
            "integrator.scheme", f"{scheme!r} is not a first-order scheme (euler, rk4)"
        )
    dt = _num(_get(itab, "dt", "integrator"), "integrator.dt")
    if dt <= 0:
        raise ConfigError("integrator.dt", "dt must be positive")
    integrator = IntegratorConfig(scheme=scheme, dt=dt)
    if horizon > 0:
        n = round(horizon / dt)
        if n < 1 or abs(n * dt - horizon) > 1e-9 * max(1.0, horizon):
            raise ConfigError("integrator.dt", f"horizon {horizon} is not a multiple of dt")

    species_raw = _get(raw, "species", "")
    if not isinstance(species_raw, list) or not species_raw:
        raise ConfigError("species", "expected a non-empty list of species tables")
    species = []
    for k, stab in enumerate(species_raw):
        spath = f"species[{k}]"
        stab = _table(stab, spath)
        _no_extra(stab, ("count", "initial", "velocity"), spath)
        count = _int(_get(stab, "count", spath), f"{spath}.count")
        if count < 1:
            raise ConfigError(f"{spath}.count", "count must be >= 1")
        initial = _parse_sampler(_get(stab, "initial", spath), dimension, f"{spath}.initial")
        velocity = None
        if "velocity" in stab:
            if dynamics.kind == "first_order":
                raise ConfigError(
                    f"{spath}.velocity", "first-order dynamics carries no velocities"
                )
            velocity = _parse_velocity(stab["velocity"], dimension, f"{spath}.velocity")
        elif dynamics.kind != "first_order":
            velocity = VelocitySpec(kind="zero")
        species.append(SpeciesConfig(count=count, initial=initial, velocity=velocity))

    ktab = _table(_get(raw, "kernels", ""), "kernels")
    _no_extra(ktab, ("rows",), "kernels")
    rows_raw = _get(ktab, "rows", "kernels")
    if not isinstance(rows_raw, list) or len(rows_raw) != len(species):
        raise ConfigError(
            "kernels.rows", f"expected {len(species)} rows (one per species)"
        )
    rows = []
    for i, row in enumerate(rows_raw):
        if not isinstance(row, list) or len(row) != len(species):
            raise ConfigError(f"kernels.rows[{i}]", f"expected {len(species)} entries")
        rows.append(
            tuple(
                kernel_from_table(entry, f"kernels.rows[{i}][{j}]")
                for j, entry in enumerate(row)
            )
        )
    try:
        kernels = KernelMatrix(entries=tuple(rows), dimension=dimension)
    except Exception as exc:
        raise ConfigError("kernels.rows", str(exc)) from exc

    diagnostics = DiagnosticsSelection()
    if "diagnostics" in raw:
        diagnostics = _parse_diagnostics(raw["diagnostics"], dynamics, "diagnostics")
    comparison = None
    if "comparison" in raw:
        comparison = _parse_comparison(raw["comparison"], dimension, "comparison")
        if comparison.reference == "analytic" and not all(
            spec.variant == "zero" for row in kernels.entries for spec in row
        ):
            raise ConfigError(
                "comparison.reference", "analytic reference needs all-zero kernels"
            )
    output_dir = raw.get("output_dir")
    if output_dir is not None:
        output_dir = _str(output_dir, "output_dir")
    if dynamics.kind == "kinetic_picard" and dynamics.window is not None and horizon > 0:
        n = round(horizon / dynamics.window)
        if n < 1 or abs(n * dynamics.window - horizon) > 1e-9 * max(1.0, horizon):
            raise ConfigError(
                "dynamics.window", f"horizon {horizon} is not a multiple of the window"
            )
    return ExperimentConfig(
        dimension=dimension,
        seed=seed,
        horizon=horizon,
        dynamics=dynamics,
        integrator=integrator,
        species=tuple(species),
        kernels=kernels,
        diagnostics=diagnostics,
        comparison=comparison,
        output_dir=output_dir,
        raw=raw,
    )


def parse_sweep(raw: dict) -> SweepConfig:
    raw = _table(raw, "<root>")
    if "sweep" not in raw:
        raise ConfigError("sweep", "sweep table is missing")
    base = parse_experiment(raw, allow_sweep_table=True)
    tab = _table(raw["sweep"], "sweep")
    _no_extra(tab, ("parameter", "values", "fit_window"), "sweep")
    parameter = _str(_get(tab, "parameter", "sweep"), "sweep.parameter", ("epsilon", "delta"))
    values_raw = _get(tab, "values", "sweep")
    if not isinstance(values_raw, list) or len(values_raw) < 3:
        raise ConfigError("sweep.values", "need at least 3 values for rate fitting")
    values = tuple(_num(v, f"sweep.values[{k}]") for k, v in enumerate(values_raw))
    if any(v <= 0 for v in values):
        raise ConfigError("sweep.values", "values must be positive")
    if any(b >= a for a, b in zip(values, values[1:])):
        raise ConfigError("sweep.values", "values must be strictly decreasing")
    fit_window = _int(_get(tab, "fit_window", "sweep", 1), "sweep.fit_window")
    if fit_window < 1:
        raise ConfigError("sweep.fit_window", "fit_window must be >= 1")
    if parameter == "epsilon" and base.dynamics.kind == "first_order":
        raise ConfigError("sweep.parameter", "epsilon sweep needs epsilon-dependent dynamics")
    if parameter == "delta" and not any(
        spec.variant in ("riesz", "regriesz")
        for row in base.kernels.entries
        for spec in row
    ):
        raise ConfigError("sweep.parameter", "delta sweep needs a power-law kernel entry")
    if base.comparison is None:
        raise ConfigError("comparison", "sweeps need a comparison table")
    return SweepConfig(base=base, parameter=parameter, values=values, fit_window=fit_window)


def load_raw(path) -> dict:
    p = Path(path)
    try:
        data = p.read_bytes()
    except OSError as exc:
        raise ConfigError(str(path), f"cannot read config: {exc}") from exc
    try:
        if p.suffix.lower() == ".json":
            return json.loads(data.decode("utf-8"))
        return tomllib.loads(data.decode("utf-8"))
    except (ValueError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError(str(path), f"cannot parse config: {exc}") from exc


def load_experiment(path) -> ExperimentConfig:
    return parse_experiment(load_raw(path))


def load_sweep(path) -> SweepConfig:
    return parse_sweep(load_raw(path))
