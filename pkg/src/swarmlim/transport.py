"""Transport distances between weighted point clouds, and mollification.

w1_exact solves the discrete optimal-transport problem with cost |x - y|:
a Hungarian assignment when both sides have equal counts and uniform
weights (the optimal coupling is then a permutation), a HiGHS linear
program otherwise.  w1_1d uses the closed-form quantile merge, w1_sliced
averages 1-D distances of random projections.  All solvers are
deterministic: fixed tie-breaking, seeded directions, fixed combination
order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.optimize import linear_sum_assignment, linprog

from . import _accel
from .errors import (
    DimensionMismatchError,
    GridTooSmallError,
    NormalizationError,
    SizeCapError,
    SpeciesCountMismatchError,
)
from .grids import DensityGrid1D

_WEIGHT_TOL = 1e-12
DEFAULT_SUPPORT_CAP = 4096

# 1 / integral of exp(-1/(1-x^2)) over [-1, 1], precomputed at high precision
_BUMP_NORM_1D = 2.2522836210435810105


@dataclass(frozen=True)
class EmpiricalMeasure:
    """Weighted point cloud: points (n, m), positive weights summing to one.

    Unnormalized input is refused rather than silently rescaled.
    """

    points: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        w = np.asarray(self.weights, dtype=float).ravel()
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", w)
        if pts.ndim != 2 or pts.shape[0] < 1:
            raise DimensionMismatchError("points must have shape (n, m) with n >= 1")
        if w.shape[0] != pts.shape[0]:
            raise DimensionMismatchError(f"{pts.shape[0]} points but {w.shape[0]} weights")
        if not np.all(np.isfinite(pts)) or not np.all(np.isfinite(w)):
            raise ValueError("points and weights must be finite")
        if np.any(w <= 0):
            raise NormalizationError("weights must be strictly positive")
        if abs(w.sum() - 1.0) > _WEIGHT_TOL:
            raise NormalizationError(
                f"weights must sum to 1 within {_WEIGHT_TOL}; got {w.sum()!r}"
            )

    @property
    def count(self) -> int:
        return self.points.shape[0]

    @property
    def dimension(self) -> int:
        return self.points.shape[1]

    @staticmethod
    def from_ensemble(ensemble, phase_space: bool = False) -> "EmpiricalMeasure":
        """Spatial marginal of a species, or the full phase-space cloud."""
        if phase_space:
            if not ensemble.has_velocities:
                raise DimensionMismatchError("phase-space measure needs velocities")
            pts = np.concatenate([ensemble.positions, ensemble.velocities], axis=1)
        else:
            pts = ensemble.positions
        return EmpiricalMeasure(pts, ensemble.weights)


def _check_pair(mu: EmpiricalMeasure, nu: EmpiricalMeasure):
    if mu.dimension != nu.dimension:
        raise DimensionMismatchError(
            f"measures live in dimension {mu.dimension} vs {nu.dimension}"
        )


def w1_1d(mu: EmpiricalMeasure, nu: EmpiricalMeasure) -> float:
    """Exact 1-D transport distance (integrated CDF difference)."""
    _check_pair(mu, nu)
    if mu.dimension != 1:
        raise DimensionMismatchError("w1_1d requires one-dimensional measures")
    xa = mu.points[:, 0]
    xb = nu.points[:, 0]
    oa = np.argsort(xa, kind="stable")
    ob = np.argsort(xb, kind="stable")
    return float(
        _accel.w1_pair_sorted(
            np.ascontiguousarray(xa[oa]),
            np.ascontiguousarray(mu.weights[oa]),
            np.ascontiguousarray(xb[ob]),
            np.ascontiguousarray(nu.weights[ob]),
        )
    )


def _uniform_weights(w: np.ndarray) -> bool:
    return bool(np.all(np.abs(w - 1.0 / w.shape[0]) <= 1e-15))


def _cost_matrix(mu: EmpiricalMeasure, nu: EmpiricalMeasure) -> np.ndarray:
    diff = mu.points[:, None, :] - nu.points[None, :, :]
    return np.sqrt(np.sum(diff * diff, axis=2))


def w1_exact(
    mu: EmpiricalMeasure, nu: EmpiricalMeasure, support_cap: int = DEFAULT_SUPPORT_CAP
) -> float:
    """Exact transport distance in any dimension.

    Combined support size is capped (default 4096).  Equal-count uniform
    clouds go through the assignment solver; the general weighted case is a
    linear program over couplings.
    """
    _check_pair(mu, nu)
    if mu.count + nu.count > support_cap:
        raise SizeCapError(
            f"combined support {mu.count + nu.count} exceeds cap {support_cap}"
        )
    cost = _cost_matrix(mu, nu)
    if mu.count == nu.count and _uniform_weights(mu.weights) and _uniform_weights(nu.weights):
        rows, cols = linear_sum_assignment(cost)
        return float(np.sum(cost[rows, cols]) / mu.count)
    n, m = mu.count, nu.count
    # row-sum and column-sum equality constraints on the coupling
    row_idx = np.repeat(np.arange(n), m)
    col_idx = np.arange(n * m)
    a_rows = sparse.coo_matrix((np.ones(n * m), (row_idx, col_idx)), shape=(n, n * m))
    row_idx2 = np.tile(np.arange(m), n)
    a_cols = sparse.coo_matrix((np.ones(n * m), (row_idx2, col_idx)), shape=(m, n * m))
    a_eq = sparse.vstack([a_rows, a_cols]).tocsr()
    b_eq = np.concatenate([mu.weights, nu.weights])
    res = linprog(cost.ravel(), A_eq=a_eq, b_eq=b_eq, bounds=(0, None), method="highs")
    if not res.success:  # pragma: no cover - defensive
        raise RuntimeError(f"transport LP failed: {res.message}")
    return float(res.fun)


def w1_sliced(
    mu: EmpiricalMeasure, nu: EmpiricalMeasure, n_directions: int, seed: int = 0
) -> float:
    """Sliced distance: mean 1-D distance over seeded random unit directions."""
    _check_pair(mu, nu)
    if n_directions < 1:
        raise ValueError("need at least one direction")
    rng = np.random.default_rng(seed)
    dirs = rng.standard_normal((n_directions, mu.dimension))
    norms = np.sqrt(np.sum(dirs * dirs, axis=1))
    # resample the (probability-zero) degenerate draws
    bad = norms == 0.0
    while np.any(bad):  # pragma: no cover - essentially unreachable
        dirs[bad] = rng.standard_normal((int(bad.sum()), mu.dimension))
        norms = np.sqrt(np.sum(dirs * dirs, axis=1))
        bad = norms == 0.0
    dirs /= norms[:, None]
    proj_a = np.ascontiguousarray(dirs @ mu.points.T)
    proj_b = np.ascontiguousarray(dirs @ nu.points.T)
    dists = _accel.w1_1d_batch(proj_a, mu.weights, proj_b, nu.weights)
    return float(np.mean(dists))


def w1_multispecies(mus, nus, method: str = "exact", **kwargs) -> float:
    """Sum of per-species distances; species are compared pairwise in order."""
    if len(mus) != len(nus):
        raise SpeciesCountMismatchError(f"{len(mus)} vs {len(nus)} species")
    if method == "exact":
        dist = lambda a, b: w1_exact(a, b, **kwargs)
    elif method == "1d":
        dist = lambda a, b: w1_1d(a, b)
    elif method == "sliced":
        dist = lambda a, b: w1_sliced(a, b, **kwargs)
    else:
        raise ValueError(f"unknown method {method!r}; use exact, 1d or sliced")
    return float(sum(dist(a, b) for a, b in zip(mus, nus)))


# ---------------------------------------------------------------------------
# mollification
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Mollifier:
    """Scaled C-infinity bump: gamma_n(x) = n gamma(n x) with support 1/n.

    gamma is the normalized exp(-1/(1-x^2)) bump on (-1, 1); unit mass and
    absolute first moment below 1/n hold by construction.
    """

    n: int = 1

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise ValueError("mollifier index n must be an integer >= 1")
        object.__setattr__(self, "n", int(self.n))

    @property
    def support_radius(self) -> float:
        return 1.0 / self.n

    def value(self, x) -> np.ndarray:
        """Pointwise density gamma_n(x) for scalar or array x."""
        x = np.asarray(x, dtype=float)
        s = self.n * x
        out = np.zeros_like(s)
        inside = np.abs(s) < 1.0
        si = s[inside]
        out[inside] = self.n * _BUMP_NORM_1D * np.exp(-1.0 / (1.0 - si * si))
        return out


# Gauss-Legendre nodes/weights reused by the cell integrals
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(16)


def _bump_integral(mol: Mollifier, lo: float, hi: float) -> float:
    """integral of gamma_n over [lo, hi] by composite Gauss-Legendre."""
    rad = mol.support_radius
    lo = max(lo, -rad)
    hi = min(hi, rad)
    if hi <= lo:
        return 0.0
    pieces = max(2, int(np.ceil((hi - lo) / (rad / 8.0))))
    edges = np.linspace(lo, hi, pieces + 1)
    mid = 0.5 * (edges[:-1] + edges[1:])
    half = 0.5 * np.diff(edges)
    pts = mid[:, None] + half[:, None] * _GL_NODES[None, :]
    vals = mol.value(pts)
    return float(np.sum(vals * _GL_WEIGHTS[None, :] * half[:, None]))


def mollify_to_grid(
    mu: EmpiricalMeasure, mol: Mollifier, x_min: float, x_max: float, n_cells: int
) -> DensityGrid1D:
    """Cell averages of the mollified measure gamma_n * mu on a uniform grid.

    The grid must cover the support of mu inflated by the mollifier radius;
    total mass is then conserved exactly up to quadrature error.
    """
    if mu.dimension != 1:
        raise DimensionMismatchError("grid mollification is one-dimensional")
    if n_cells < 1:
        raise ValueError("need at least one cell")
    rad = mol.support_radius
    lo_needed = float(mu.points.min()) - rad
    hi_needed = float(mu.points.max()) + rad
    if lo_needed < x_min or hi_needed > x_max:
        raise GridTooSmallError(
            f"grid [{x_min}, {x_max}] does not cover inflated support "
            f"[{lo_needed}, {hi_needed}]"
        )
    dx = (x_max - x_min) / n_cells
    cell_mass = np.zeros(n_cells)
    for xk, wk in zip(mu.points[:, 0], mu.weights):
        c_lo = int(np.floor((xk - rad - x_min) / dx))
        c_hi = int(np.floor((xk + rad - x_min) / dx))
        c_lo = max(c_lo, 0)
        c_hi = min(c_hi, n_cells - 1)
        for c in range(c_lo, c_hi + 1):
            a = x_min + c * dx - xk
            b = a + dx
            m = _bump_integral(mol, a, b)
            if m != 0.0:
                cell_mass[c] += wk * m
    return DensityGrid1D(x_min=x_min, x_max=x_max, values=(cell_mass / dx)[None, :])


def w1_empirical_vs_grid(mu: EmpiricalMeasure, grid: DensityGrid1D, species: int = 0) -> float:
    """Exact 1-D transport distance between a point cloud and a cell density.

    Integrates |F_mu - F_grid| where F_grid is the piecewise-linear CDF of
    the cell-averaged density (normalized by its total mass, which must be
    within 1e-9 of one).
    """
    if mu.dimension != 1:
        raise DimensionMismatchError("grid comparison is one-dimensional")
    rho = grid.values[species]
    mass = float(rho.sum() * grid.dx)
    if abs(mass - 1.0) > 1e-9:
        raise NormalizationError(f"grid mass {mass!r} is not 1 within 1e-9")
    edges = grid.edges
    cdf_edges = np.concatenate([[0.0], np.cumsum(rho) * grid.dx]) / mass
    pts = np.sort(mu.points[:, 0])
    order = np.argsort(mu.points[:, 0], kind="stable")
    wts = mu.weights[order]
    # merged breakpoints: outside the grid the grid CDF is flat 0 or 1
    breaks = np.unique(np.concatenate([edges, pts]))
    f_grid = np.interp(breaks, edges, cdf_edges)
    f_emp = np.cumsum(np.concatenate([[0.0], wts]))[
        np.searchsorted(pts, breaks, side="right")
    ]
    total = 0.0
    for a, b, fe, ga, gb in zip(breaks[:-1], breaks[1:], f_emp[:-1], f_grid[:-1], f_grid[1:]):
        u = fe - ga
        w = fe - gb
        if u == 0.0 and w == 0.0:
            continue
        if u * w >= 0.0:
            total += 0.5 * abs(u + w) * (b - a)
        else:
            total += 0.5 * (u * u + w * w) / abs(u - w) * (b - a)
    return float(total)


def moment(mu: EmpiricalMeasure, p: float) -> float:
    """p-th absolute moment: sum of w_k |x_k|^p (Euclidean norm)."""
    if p < 0:
        raise ValueError("moment order must be nonnegative")
    r = np.sqrt(np.sum(mu.points**2, axis=1))
    return float(np.sum(mu.weights * r**p))
