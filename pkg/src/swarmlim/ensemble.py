"""Weighted particle ensembles and time steppers.

Dynamics covered, per species i with field E_i assembled from the kernel
matrix (see kernels.assemble_field):

  first order    dz/dt = E_i(z)
  second order   dz/dt = u,  du/dt = (E_i(z) - u) / eps

Schemes: "euler" and "rk4" for both orders; "exp-euler" and "exp-strang"
only for the second order.  exp-euler freezes the field over the step and
integrates the damped system exactly, so it is robust for eps much smaller
than dt; exp-strang is its symmetric kick-drift-kick variant (second-order
accurate in dt).
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from types import SimpleNamespace

import numpy as np

from .errors import (
    DimensionMismatchError,
    MissingVelocitiesError,
    NormalizationError,
    SchemeMismatchError,
    SpeciesCountMismatchError,
)
from .kernels import KernelMatrix, assemble_field

_FIRST_ORDER_SCHEMES = ("euler", "rk4")
_SECOND_ORDER_SCHEMES = ("euler", "rk4", "exp-euler", "exp-strang")
SCHEMES = _SECOND_ORDER_SCHEMES
_WEIGHT_TOL = 1e-12


@dataclass(frozen=True)
class SpeciesEnsemble:
    """One species: positions (M, d), weights (M,), optional velocities (M, d)."""

    positions: np.ndarray
    weights: np.ndarray
    velocities: np.ndarray = None

    def __post_init__(self):
        pos = np.atleast_2d(np.asarray(self.positions, dtype=float))
        w = np.asarray(self.weights, dtype=float).ravel()
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "weights", w)
        if pos.ndim != 2:
            raise DimensionMismatchError("positions must have shape (M, d)")
        if w.shape[0] != pos.shape[0]:
            raise DimensionMismatchError(
                f"{pos.shape[0]} positions but {w.shape[0]} weights"
            )
        if not np.all(np.isfinite(pos)) or not np.all(np.isfinite(w)):
            raise ValueError("positions and weights must be finite")
        if np.any(w <= 0):
            raise NormalizationError("weights must be strictly positive")
        if abs(w.sum() - 1.0) > _WEIGHT_TOL:
            raise NormalizationError(
                f"weights must sum to 1 within {_WEIGHT_TOL}; got {w.sum()!r}"
            )
        if self.velocities is not None:
            vel = np.atleast_2d(np.asarray(self.velocities, dtype=float))
            object.__setattr__(self, "velocities", vel)
            if vel.shape != pos.shape:
                raise DimensionMismatchError(
                    f"velocities shape {vel.shape} does not match positions {pos.shape}"
                )
            if not np.all(np.isfinite(vel)):
                raise ValueError("velocities must be finite")

    @property
    def count(self) -> int:
        return self.positions.shape[0]

    @property
    def dimension(self) -> int:
        return self.positions.shape[1]

    @property
    def has_velocities(self) -> bool:
        return self.velocities is not None


@dataclass(frozen=True)
class MultiSpeciesState:
    """Snapshot of every species at a common time."""

    time: float
    species: tuple

    def __post_init__(self):
        sp = tuple(self.species)
        object.__setattr__(self, "species", sp)
        if len(sp) == 0:
            raise SpeciesCountMismatchError("state needs at least one species")
        d = sp[0].dimension
        hv = sp[0].has_velocities
        for k, ens in enumerate(sp):
            if ens.dimension != d:
                raise DimensionMismatchError(
                    f"species {k} has dimension {ens.dimension}, species 0 has {d}"
                )
            if ens.has_velocities != hv:
                raise MissingVelocitiesError(
                    "either every species carries velocities or none does"
                )

    @property
    def n_species(self) -> int:
        return len(self.species)

    @property
    def dimension(self) -> int:
        return self.species[0].dimension

    @property
    def has_velocities(self) -> bool:
        return self.species[0].has_velocities


@dataclass(frozen=True)
class IntegratorConfig:
    """Time stepper selection: scheme name plus step size."""

    scheme: str
    dt: float

    def __post_init__(self):
        if self.scheme not in _SECOND_ORDER_SCHEMES:
            raise SchemeMismatchError(
                f"unknown scheme {self.scheme!r}; choose from {_SECOND_ORDER_SCHEMES}"
            )
        if not self.dt > 0:
            raise ValueError("dt must be positive")


def _check_state(state: MultiSpeciesState, matrix: KernelMatrix):
    if state.n_species != matrix.n_species:
        raise SpeciesCountMismatchError(
            f"state has {state.n_species} species, kernel matrix {matrix.n_species}"
        )
    if state.dimension != matrix.dimension:
        raise DimensionMismatchError(
            f"state dimension {state.dimension} does not match matrix {matrix.dimension}"
        )


def _fields_at(matrix: KernelMatrix, source_pos, weights, query_pos):
    """E_i at query_pos[i] with sources at source_pos (lists over species)."""
    shims = [SimpleNamespace(positions=p, weights=w) for p, w in zip(source_pos, weights)]
    return [
        assemble_field(matrix, shims, i, query_pos[i]) for i in range(len(source_pos))
    ]


def state_fields(state: MultiSpeciesState, matrix: KernelMatrix):
    """Interaction field of each species evaluated at its own particles."""
    _check_state(state, matrix)
    pos = [ens.positions for ens in state.species]
    wts = [ens.weights for ens in state.species]
    return _fields_at(matrix, pos, wts, pos)


def _rebuild(state: MultiSpeciesState, t, positions, velocities=None) -> MultiSpeciesState:
    species = []
    for k, ens in enumerate(state.species):
        vel = None if velocities is None else velocities[k]
        species.append(replace(ens, positions=positions[k], velocities=vel))
    return MultiSpeciesState(time=t, species=tuple(species))


def step_first_order(
    state: MultiSpeciesState, matrix: KernelMatrix, config: IntegratorConfig
) -> MultiSpeciesState:
    """One step of dz/dt = E(z)."""
    if config.scheme not in _FIRST_ORDER_SCHEMES:
        raise SchemeMismatchError(
            f"scheme {config.scheme!r} is only valid for second-order dynamics"
        )
    _check_state(state, matrix)
    dt = config.dt
    z = [ens.positions for ens in state.species]
    w = [ens.weights for ens in state.species]
    if config.scheme == "euler":
        k1 = _fields_at(matrix, z, w, z)
        znew = [zi + dt * ki for zi, ki in zip(z, k1)]
    else:  # rk4
        k1 = _fields_at(matrix, z, w, z)
        z2 = [zi + 0.5 * dt * ki for zi, ki in zip(z, k1)]
        k2 = _fields_at(matrix, z2, w, z2)
        z3 = [zi + 0.5 * dt * ki for zi, ki in zip(z, k2)]
        k3 = _fields_at(matrix, z3, w, z3)
        z4 = [zi + dt * ki for zi, ki in zip(z, k3)]
        k4 = _fields_at(matrix, z4, w, z4)
        znew = [
            zi + (dt / 6.0) * (a + 2 * b + 2 * c + d)
            for zi, a, b, c, d in zip(z, k1, k2, k3, k4)
        ]
    vel = [ens.velocities for ens in state.species] if state.has_velocities else None
    return _rebuild(state, state.time + dt, znew, vel)


def _phi_coeffs(h: float):
    """(e^-h, 1 - e^-h, h - (1 - e^-h)) with cancellation-safe small-h forms."""
    a = np.exp(-h)
    em = -np.expm1(-h)
    if h < 1e-3:
        c2 = h * h / 2.0 - h**3 / 6.0 + h**4 / 24.0 - h**5 / 120.0
    else:
        c2 = h - em
    return a, em, c2


def step_second_order(
    state: MultiSpeciesState,
    matrix: KernelMatrix,
    eps: float,
    config: IntegratorConfig,
) -> MultiSpeciesState:
    """One step of dz/dt = u, du/dt = (E(z) - u)/eps."""
    _check_state(state, matrix)
    if not state.has_velocities:
        raise MissingVelocitiesError("second-order stepping requires velocities")
    if not eps > 0:
        raise ValueError("inertia parameter eps must be positive")
    dt = config.dt
    z = [ens.positions for ens in state.species]
    u = [ens.velocities for ens in state.species]
    w = [ens.weights for ens in state.species]

    if config.scheme == "exp-euler":
        a, em, c2 = _phi_coeffs(dt / eps)
        e0 = _fields_at(matrix, z, w, z)
        znew = [zi + eps * em * ui + eps * c2 * ei for zi, ui, ei in zip(z, u, e0)]
        unew = [a * ui + em * ei for ui, ei in zip(u, e0)]
    elif config.scheme == "exp-strang":
        b, eb, _ = _phi_coeffs(0.5 * dt / eps)
        e0 = _fields_at(matrix, z, w, z)
        uh = [b * ui + eb * ei for ui, ei in zip(u, e0)]
        znew = [zi + dt * ui for zi, ui in zip(z, uh)]
        e1 = _fields_at(matrix, znew, w, znew)
        unew = [b * ui + eb * ei for ui, ei in zip(uh, e1)]
    elif config.scheme == "euler":
        e0 = _fields_at(matrix, z, w, z)
        znew = [zi + dt * ui for zi, ui in zip(z, u)]
        unew = [ui + (dt / eps) * (ei - ui) for ui, ei in zip(u, e0)]
    else:  # rk4 on the coupled system
        def rhs(zs, us):
            es = _fields_at(matrix, zs, w, zs)
            return us, [(ei - ui) / eps for ui, ei in zip(us, es)]

        kz1, ku1 = rhs(z, u)
        kz2, ku2 = rhs(
            [zi + 0.5 * dt * ki for zi, ki in zip(z, kz1)],
            [ui + 0.5 * dt * ki for ui, ki in zip(u, ku1)],
        )
        kz3, ku3 = rhs(
            [zi + 0.5 * dt * ki for zi, ki in zip(z, kz2)],
            [ui + 0.5 * dt * ki for ui, ki in zip(u, ku2)],
        )
        kz4, ku4 = rhs(
            [zi + dt * ki for zi, ki in zip(z, kz3)],
            [ui + dt * ki for ui, ki in zip(u, ku3)],
        )
        znew = [
            zi + (dt / 6.0) * (a1 + 2 * a2 + 2 * a3 + a4)
            for zi, a1, a2, a3, a4 in zip(z, kz1, kz2, kz3, kz4)
        ]
        unew = [
            ui + (dt / 6.0) * (a1 + 2 * a2 + 2 * a3 + a4)
            for ui, a1, a2, a3, a4 in zip(u, ku1, ku2, ku3, ku4)
        ]
    return _rebuild(state, state.time + dt, znew, unew)


def support_radius(state: MultiSpeciesState) -> float:
    """Largest phase-space norm sqrt(|z|^2 + |v|^2) over all particles."""
    best = 0.0
    for ens in state.species:
        r2 = np.sum(ens.positions**2, axis=1)
        if ens.has_velocities:
            r2 = r2 + np.sum(ens.velocities**2, axis=1)
        if r2.size:
            best = max(best, float(np.sqrt(r2.max())))
    return best
