"""Scalar functionals recorded along simulations.

Velocity alignment measures how far particle velocities sit from the
interaction field they would relax to; it is the quantity that collapses
at rate epsilon in the small-inertia regime.  The modulated energy
combines that kinetic mismatch with a positive-definite quadratic form of
the density mismatch; for power-law kernels the form is assembled from
exact cell-pair averages of the true kernel, which keeps the interaction
part nonnegative at any resolution.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from . import _accel
from .ensemble import MultiSpeciesState, state_fields
from .errors import (
    DimensionMismatchError,
    GridMismatchError,
    MissingVelocitiesError,
    QuadratureDivergenceError,
    SingularEvaluationError,
)
from .grids import DensityGrid1D
from .kernels import KernelMatrix, KernelSpec
from .transport import EmpiricalMeasure, Mollifier, mollify_to_grid


@dataclass(frozen=True)
class DiagnosticsSeries:
    """Sampled time series: shared times plus named scalar channels."""

    times: np.ndarray
    channels: dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self) -> None:
        times = np.asarray(self.times, dtype=np.float64)
        object.__setattr__(self, "times", times)
        if times.ndim != 1:
            raise DimensionMismatchError("times must be a 1-D array")
        clean: dict[str, np.ndarray] = {}
        for name, values in self.channels.items():
            arr = np.asarray(values, dtype=np.float64)
            if arr.shape != times.shape:
                raise DimensionMismatchError(
                    f"channel {name!r} has {arr.shape[0] if arr.ndim == 1 else arr.ndim} "
                    f"values for {times.shape[0]} times"
                )
            clean[name] = arr
        object.__setattr__(self, "channels", clean)

    def __getitem__(self, name: str) -> np.ndarray:
        return self.channels[name]


def velocity_alignment(state: MultiSpeciesState, matrix: KernelMatrix) -> np.ndarray:
    """Per-species weighted mean |v - E_i(z)| against the empirical field."""
    if not state.has_velocities:
        raise MissingVelocitiesError("velocity alignment needs particle velocities")
    fields = state_fields(state, matrix)
    out = np.empty(state.n_species, dtype=np.float64)
    for i, (ens, e_field) in enumerate(zip(state.species, fields)):
        mismatch = np.linalg.norm(ens.velocities - e_field, axis=1)
        out[i] = float(ens.weights @ mismatch)
    return out


def interaction_energy(
    state: MultiSpeciesState,
    i: int,
    spec: KernelSpec,
    *,
    skip_singular_self: bool = True,
) -> float:
    """Double sum sum_{k,h} w_k w_h K(z_k - z_h) within species i."""
    ens = state.species[i]
    code, params = spec.packed()
    skip = spec.is_singular and skip_singular_self
    value, flag, n_skipped = _accel.pair_energy(
        ens.positions, ens.weights, ens.positions, ens.weights, code, params, True, skip
    )
    if flag:
        raise SingularEvaluationError(
            "singular kernel evaluated at coincident distinct particles"
        )
    if n_skipped:
        warnings.warn(
            f"skipped {n_skipped} singular self-pairs in interaction energy",
            RuntimeWarning,
            stacklevel=2,
        )
    return value


def free_energy(
    state: MultiSpeciesState,
    matrix: KernelMatrix,
    *,
    skip_singular_self: bool = True,
) -> float:
    """Total interaction functional sum_{ij} iint K_ij d rho_i d rho_j."""
    total = 0.0
    total_skipped = 0
    for i, ens_i in enumerate(state.species):
        for j, ens_j in enumerate(state.species):
            spec = matrix.entries[i][j]
            if spec.variant == "zero":
                continue
            code, params = spec.packed()
            skip = i == j and spec.is_singular and skip_singular_self
            value, flag, n_skipped = _accel.pair_energy(
                ens_i.positions,
                ens_i.weights,
                ens_j.positions,
                ens_j.weights,
                code,
                params,
                i == j,
                skip,
            )
            if flag:
                raise SingularEvaluationError(
                    "singular kernel evaluated at coincident particles of "
                    f"species pair ({i}, {j})"
                )
            total_skipped += n_skipped
            total += value
    if total_skipped:
        warnings.warn(
            f"skipped {total_skipped} singular self-pairs in free energy",
            RuntimeWarning,
            stacklevel=2,
        )
    return total


def second_moment_energy(state: MultiSpeciesState) -> np.ndarray:
    """Per-species sum_k w_k (|z_k|^2 + |v_k|^2) / 2."""
    if not state.has_velocities:
        raise MissingVelocitiesError("second moment energy needs particle velocities")
    out = np.empty(state.n_species, dtype=np.float64)
    for i, ens in enumerate(state.species):
        sq = np.sum(ens.positions**2, axis=1) + np.sum(ens.velocities**2, axis=1)
        out[i] = 0.5 * float(ens.weights @ sq)
    return out


def lp_norm(grid: DensityGrid1D, p: float, species: int = 0) -> float:
    """L^p norm of one species row; p = inf gives the max cell value."""
    if p < 1.0:
        raise ValueError("p must be >= 1")
    row = grid.values[species]
    if np.isinf(p):
        return float(np.max(row))
    return float((np.sum(row**p) * grid.dx) ** (1.0 / p))


def _cellpair_row_riesz(c: float, alpha: float, dx: float, n_cells: int) -> np.ndarray:
    """Exact cell-averaged Riesz interactions by lag, via the double
    antiderivative F(z) = C z^{2-a} / ((1-a)(2-a)).  Positive definite as a
    Toeplitz form for 0 < a < 1."""

    def anti(z: np.ndarray) -> np.ndarray:
        return c * z ** (2.0 - alpha) / ((1.0 - alpha) * (2.0 - alpha))

    lags = np.arange(n_cells, dtype=np.float64) * dx
    row = np.empty(n_cells, dtype=np.float64)
    row[0] = 2.0 * anti(np.array(dx)) / dx**2
    m = lags[1:]
    row[1:] = (anti(m + dx) - 2.0 * anti(m) + anti(m - dx)) / dx**2
    return row


def _quadratic_form_row(spec: KernelSpec, dx: float, n_cells: int) -> np.ndarray:
    """Toeplitz row q[m] ~ average of K over cell pairs at lag m."""
    if spec.variant == "zero":
        return np.zeros(n_cells, dtype=np.float64)
    if spec.variant in ("riesz", "regriesz"):
        c, alpha = spec.params[0], spec.params[1]
        if alpha < 1.0:
            # cell-pair averages of the unregularized power law: the
            # modulated functional is defined against the true kernel
            return _cellpair_row_riesz(c, alpha, dx, n_cells)
        if spec.variant == "riesz":
            raise QuadratureDivergenceError(
                "cell quadrature of an unregularized kernel with exponent >= 1 "
                "diverges; regularize first"
            )
        # bounded surrogate: point-sample the regularized kernel
        code, params = spec.packed()
        lags = np.arange(n_cells, dtype=np.float64) * dx
        return _accel._pot_value_numpy(code, params, lags)
    code, params = spec.packed()
    lags = np.arange(n_cells, dtype=np.float64) * dx
    return _accel._pot_value_numpy(code, params, lags)


def _toeplitz_quadratic(row: np.ndarray, g: np.ndarray) -> float:
    """sum_{c,c'} g_c g_c' row[|c - c'|] using the autocorrelation of g."""
    corr = np.correlate(g, g, mode="full")[g.size - 1 :]
    return float(row[0] * corr[0] + 2.0 * np.dot(row[1:], corr[1:]))


@dataclass(frozen=True)
class ModulatedEnergy:
    """Kinetic and interaction parts of the modulated functional."""

    kinetic_part: float
    interaction_part: float

    @property
    def total(self) -> float:
        return self.kinetic_part + self.interaction_part


def modulated_energy(
    state: MultiSpeciesState,
    ref: DensityGrid1D,
    u_transport: np.ndarray,
    eps: float,
    matrix: KernelMatrix,
    *,
    mollifier: Mollifier | None = None,
) -> ModulatedEnergy:
    """Distance-like functional between a particle state and a limit profile.

    Kinetic part: (1/2) sum_i sum_k w_k |u_i(z_k) - v_k|^2 with u_i read off
    the grid by linear interpolation.  Interaction part:
    (1/(2 eps)) sum_i <g_i, K_ii g_i> where g_i is the difference between the
    reference density and the mollified particle density on the same grid.
    Mollification width defaults to two cells.
    """
    if state.dimension != 1:
        raise DimensionMismatchError("modulated energy is computed on 1-D grids")
    if not state.has_velocities:
        raise MissingVelocitiesError("modulated energy needs particle velocities")
    if eps <= 0.0:
        raise ValueError("eps must be positive")
    u = np.asarray(u_transport, dtype=np.float64)
    if u.shape != (state.n_species, ref.n_cells):
        raise GridMismatchError(
            f"u_transport shape {u.shape} does not match "
            f"({state.n_species}, {ref.n_cells})"
        )
    if ref.n_species != state.n_species:
        raise GridMismatchError("reference grid species count mismatch")
    if mollifier is None:
        mollifier = Mollifier(max(1, round(1.0 / (2.0 * ref.dx))))
    centers = ref.centers
    kinetic = 0.0
    interaction = 0.0
    for i, ens in enumerate(state.species):
        xs = ens.positions[:, 0]
        u_at = np.interp(xs, centers, u[i])
        mismatch = u_at - ens.velocities[:, 0]
        kinetic += 0.5 * float(ens.weights @ mismatch**2)
        mu = EmpiricalMeasure(ens.positions, ens.weights)
        mollified = mollify_to_grid(mu, mollifier, ref.x_min, ref.x_max, ref.n_cells)
        g = ref.values[i] - mollified.values[0]
        row = _quadratic_form_row(matrix.entries[i][i], ref.dx, ref.n_cells)
        interaction += (0.5 / eps) * _toeplitz_quadratic(row, g) * ref.dx**2
    return ModulatedEnergy(kinetic_part=kinetic, interaction_part=interaction)
