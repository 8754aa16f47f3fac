"""Experiment orchestration: configs, samplers, file I/O, runs and sweeps."""

from .config import (
    ComparisonSpec,
    DiagnosticsSelection,
    DynamicsSpec,
    ExperimentConfig,
    GridSpec,
    SamplerSpec,
    SpeciesConfig,
    SweepConfig,
    VelocitySpec,
    kernel_from_table,
    kernel_to_table,
    load_experiment,
    load_raw,
    load_sweep,
    parse_experiment,
    parse_sweep,
)
from .io import (
    RunManifest,
    load_manifest,
    read_snapshot,
    write_grids,
    write_snapshot,
)
from .run import SweepResult, compare_to_macro, run, simulate_trajectory, sweep, worker_cap
from .samplers import build_initial_state, sample_positions

__all__ = [
    "ComparisonSpec",
    "DiagnosticsSelection",
    "DynamicsSpec",
    "ExperimentConfig",
    "GridSpec",
    "RunManifest",
    "SamplerSpec",
    "SpeciesConfig",
    "SweepConfig",
    "SweepResult",
    "VelocitySpec",
    "build_initial_state",
    "compare_to_macro",
    "kernel_from_table",
    "kernel_to_table",
    "load_experiment",
    "load_manifest",
    "load_raw",
    "load_sweep",
    "parse_experiment",
    "parse_sweep",
    "read_snapshot",
    "run",
    "sample_positions",
    "simulate_trajectory",
    "sweep",
    "worker_cap",
    "write_grids",
    "write_snapshot",
]
