"""First-order (zero inertia) dynamics: particle solver, velocity fields,
and a conservative 1-D finite-volume reference.

Sign conventions.  The limit system is written as

    d rho_i / dt = div(rho_i u_i),    u_i = sum_j grad K_ij * rho_j,

so u_i equals minus the interaction field E_i of kernels.assemble_field and
mass is transported with velocity w_i = -u_i = E_i.  The finite-volume
update uses w at cell faces (averaged from adjacent cell centers) with
upwind fluxes and zero flux through the outer boundary.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .ensemble import IntegratorConfig, MultiSpeciesState, step_first_order
from .errors import (
    CFLViolationError,
    DimensionMismatchError,
    QuadratureDivergenceError,
    SpeciesCountMismatchError,
)
from .grids import DensityGrid1D
from .kernels import KernelMatrix, assemble_field, eval_grad

CFL_NUMBER = 0.5


@dataclass(frozen=True)
class VelocityFieldSample:
    """u_i sampled at query points: values[i, q] = u_i(x_q).

    route records how the sample was produced: "particles" (exact pairwise
    sums) or "grid" (midpoint quadrature over cells).
    """

    queries: np.ndarray
    values: np.ndarray
    route: str


def _steps_exact(total: float, step: float, what: str) -> int:
    n = int(round(total / step))
    if n < 1 or abs(n * step - total) > 1e-9 * max(1.0, abs(total)):
        raise ValueError(f"{what} {total} is not an integer multiple of {step}")
    return n


def macro_particle_solve(
    state0: MultiSpeciesState, matrix: KernelMatrix, config: IntegratorConfig, T: float
) -> list:
    """Trajectory of the first-order particle system on [t0, t0 + T]."""
    n = _steps_exact(T, config.dt, "horizon")
    states = [state0]
    for _ in range(n):
        states.append(step_first_order(states[-1], matrix, config))
    return states


def _diagonal_quadrature_ok(matrix: KernelMatrix):
    """Grid quadrature of grad K_ii * rho diverges for unregularized alpha >= 1."""
    for i in range(matrix.n_species):
        spec = matrix.entries[i][i]
        if spec.is_singular and spec.params[1] >= 1.0:
            raise QuadratureDivergenceError(
                f"grid quadrature diverges for unregularized riesz exponent "
                f"alpha={spec.params[1]} >= 1 on the diagonal of species {i}"
            )


@lru_cache(maxsize=64)
def _kernel_row(spec, dx: float, n_cells: int) -> np.ndarray:
    """grad K at the 2C-1 center offsets m*dx; the zero offset is 0 (odd
    integrand / radial-symmetry convention)."""
    m = np.arange(-(n_cells - 1), n_cells) * dx
    row = np.zeros(m.shape[0])
    keep = m != 0.0
    row[keep] = eval_grad(spec, m[keep].reshape(-1, 1)).ravel()
    return row


def _grid_velocity(grid: DensityGrid1D, matrix: KernelMatrix, queries: np.ndarray) -> np.ndarray:
    """Midpoint quadrature of sum_j grad K_ij * rho_j at 1-D query points.

    For singular diagonal kernels the cell containing the query point is
    dropped (symmetric principal value: the odd integrand cancels over the
    centered cell).  Queries at the cell centers go through a cached
    Toeplitz row and one convolution per species pair.
    """
    centers = grid.centers
    dx = grid.dx
    n = matrix.n_species
    c = grid.n_cells
    out = np.zeros((n, queries.shape[0], 1))
    on_centers = queries.shape[0] == c and np.array_equal(queries, centers)
    for i in range(n):
        for j in range(n):
            spec = matrix.entries[i][j]
            if spec.variant == "zero":
                continue
            if on_centers:
                row = _kernel_row(spec, dx, c)
                out[i, :, 0] += np.convolve(grid.values[j], row)[c - 1 : 2 * c - 1] * dx
                continue
            diff = queries[:, None] - centers[None, :]
            gvals = np.zeros_like(diff)
            if spec.is_singular:
                keep = np.abs(diff) > 0.5 * dx  # drop the containing cell
            else:
                keep = np.abs(diff) > 0.0  # grad K(0) = 0 by radial symmetry
            gvals[keep] = eval_grad(spec, diff[keep].reshape(-1, 1)).ravel()
            out[i, :, 0] += (gvals * grid.values[j][None, :]).sum(axis=1) * dx
    return out


def velocity_field(source, matrix: KernelMatrix, queries) -> VelocityFieldSample:
    """u_i = sum_j grad K_ij * rho_j at the query points.

    source is either a sequence of particle ensembles (exact pairwise route,
    equal to minus the interaction field) or a DensityGrid1D (cell midpoint
    quadrature).
    """
    queries = np.asarray(queries, dtype=float)
    if isinstance(source, DensityGrid1D):
        if matrix.dimension != 1:
            raise DimensionMismatchError("grid route requires dimension 1")
        if source.n_species != matrix.n_species:
            raise SpeciesCountMismatchError(
                f"grid holds {source.n_species} species, matrix {matrix.n_species}"
            )
        _diagonal_quadrature_ok(matrix)
        q = queries.ravel()
        values = _grid_velocity(source, matrix, q)
        return VelocityFieldSample(queries=q[:, None], values=values, route="grid")
    if queries.ndim == 1:
        queries = queries[:, None]
    values = np.stack(
        [
            -assemble_field(matrix, source, i, queries)
            for i in range(matrix.n_species)
        ]
    )
    return VelocityFieldSample(queries=queries, values=values, route="particles")


@dataclass(frozen=True)
class GridTrajectory:
    """Finite-volume trajectory: density grids at the stored step times."""

    times: np.ndarray
    grids: tuple

    def at_time(self, t: float) -> DensityGrid1D:
        k = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[k] - t) > 1e-9 * max(1.0, abs(t)):
            raise ValueError(f"time {t} not stored (closest is {self.times[k]})")
        return self.grids[k]


def transport_velocity_centers(grid: DensityGrid1D, matrix: KernelMatrix) -> np.ndarray:
    """w_i = -u_i at the cell centers, shape (n_species, n_cells)."""
    sample = velocity_field(grid, matrix, grid.centers)
    return -sample.values[:, :, 0]


def grid_solve_1d(
    grid0: DensityGrid1D,
    matrix: KernelMatrix,
    dt: float,
    T: float,
    *,
    cfl: float = CFL_NUMBER,
) -> GridTrajectory:
    """Conservative upwind finite-volume solution of the limit system.

    Face transport velocities are averages of the adjacent cell-center
    values; outer boundary fluxes vanish, so total mass per species is
    conserved to rounding.  Every step enforces dt <= cfl * dx / max|w|.
    """
    if matrix.dimension != 1:
        raise DimensionMismatchError("grid solver is one-dimensional")
    if grid0.n_species != matrix.n_species:
        raise SpeciesCountMismatchError(
            f"grid holds {grid0.n_species} species, matrix {matrix.n_species}"
        )
    _diagonal_quadrature_ok(matrix)
    n_steps = _steps_exact(T, dt, "horizon")
    dx = grid0.dx
    grids = [grid0]
    times = [0.0]
    rho = grid0.values.copy()
    for k in range(n_steps):
        grid_k = grids[-1]
        w = transport_velocity_centers(grid_k, matrix)
        wmax = float(np.max(np.abs(w))) if w.size else 0.0
        if wmax > 0 and dt > cfl * dx / wmax:
            raise CFLViolationError(
                f"step {k}: dt={dt} exceeds CFL bound {cfl * dx / wmax:.3e} "
                f"(max transport speed {wmax:.3e})"
            )
        new = np.empty_like(rho)
        for i in range(rho.shape[0]):
            w_face = np.zeros(rho.shape[1] + 1)
            w_face[1:-1] = 0.5 * (w[i, :-1] + w[i, 1:])
            flux = np.where(
                w_face[1:-1] > 0, w_face[1:-1] * rho[i, :-1], w_face[1:-1] * rho[i, 1:]
            )
            full = np.zeros(rho.shape[1] + 1)
            full[1:-1] = flux
            new[i] = rho[i] - (dt / dx) * (full[1:] - full[:-1])
        rho = new
        grids.append(DensityGrid1D(grid0.x_min, grid0.x_max, rho))
        times.append((k + 1) * dt)
    return GridTrajectory(times=np.asarray(times), grids=tuple(grids))


def material_derivative(
    u_prev: np.ndarray, u_now: np.ndarray, dt: float, dx: float
) -> np.ndarray:
    """e = du/dt + u du/dx on cell centers: backward difference in time,
    central difference in space (one-sided at the boundary cells)."""
    u_prev = np.asarray(u_prev, dtype=float)
    u_now = np.asarray(u_now, dtype=float)
    if u_prev.shape != u_now.shape or u_now.ndim != 1:
        raise DimensionMismatchError("expected matching 1-D center samples")
    if dt <= 0 or dx <= 0:
        raise ValueError("dt and dx must be positive")
    dudx = np.gradient(u_now, dx)
    return (u_now - u_prev) / dt + u_now * dudx
