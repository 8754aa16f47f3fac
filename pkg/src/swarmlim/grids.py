"""Uniform 1-D cell grids holding per-species densities."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatchError, GridMismatchError


@dataclass(frozen=True)
class DensityGrid1D:
    """Cell-averaged densities on a uniform grid over [x_min, x_max].

    values has shape (n_species, n_cells) and is nonnegative; the mass of
    species i is values[i].sum() * dx.
    """

    x_min: float
    x_max: float
    values: np.ndarray

    def __post_init__(self):
        vals = np.atleast_2d(np.asarray(self.values, dtype=float))
        object.__setattr__(self, "values", vals)
        if not self.x_max > self.x_min:
            raise ValueError("grid needs x_max > x_min")
        if vals.ndim != 2 or vals.shape[1] < 1:
            raise DimensionMismatchError("values must have shape (n_species, n_cells)")
        if not np.all(np.isfinite(vals)):
            raise ValueError("density values must be finite")
        if np.any(vals < 0):
            raise ValueError("density values must be nonnegative")

    @property
    def n_species(self) -> int:
        return self.values.shape[0]

    @property
    def n_cells(self) -> int:
        return self.values.shape[1]

    @property
    def dx(self) -> float:
        return (self.x_max - self.x_min) / self.n_cells

    @property
    def centers(self) -> np.ndarray:
        return self.x_min + (np.arange(self.n_cells) + 0.5) * self.dx

    @property
    def edges(self) -> np.ndarray:
        return self.x_min + np.arange(self.n_cells + 1) * self.dx

    def masses(self) -> np.ndarray:
        return self.values.sum(axis=1) * self.dx

    def same_geometry(self, other: "DensityGrid1D") -> bool:
        return (
            self.n_cells == other.n_cells
            and self.x_min == other.x_min
            and self.x_max == other.x_max
        )

    def require_same_geometry(self, other: "DensityGrid1D"):
        if not self.same_geometry(other):
            raise GridMismatchError(
                f"grids differ: [{self.x_min}, {self.x_max}] x {self.n_cells} vs "
                f"[{other.x_min}, {other.x_max}] x {other.n_cells}"
            )
