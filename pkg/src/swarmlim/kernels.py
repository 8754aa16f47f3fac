"""Interaction kernel catalogue and pairwise field assembly.

A kernel is a radial pair potential K(x) = k(|x|).  Supported variants:

========  ===========================  =============================
variant   parameters                   k(r)
========  ===========================  =============================
zero      -                            0
quadratic a                            a r^2 / 2
morse     C_a, l_a, C_r, l_r           -C_a e^{-r/l_a} + C_r e^{-r/l_r}
gaussian  C_a, l_a, C_r, l_r           -C_a e^{-r^2/l_a} + C_r e^{-r^2/l_r}
riesz     C, alpha                     C r^{-alpha}
regriesz  C, alpha, delta              C / (r^alpha + delta)
========  ===========================  =============================

Only "riesz" is classified singular; every other variant is smooth and its
gradient at the origin is defined as the zero vector (radial symmetry).  The
gradients of "morse" (kink) and of "regriesz" with alpha < 1 (unbounded near
the origin) are not globally Lipschitz; reported bounds for them are taken on
a documented radial mesh excluding the origin.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from . import _accel
from .errors import (
    DimensionMismatchError,
    NotRegularizableWarning,
    SingularEntryError,
    SingularEvaluationError,
)

_VARIANTS = ("zero", "quadratic", "morse", "gaussian", "riesz", "regriesz")

_CODES = {
    "zero": _accel.CODE_ZERO,
    "quadratic": _accel.CODE_QUADRATIC,
    "morse": _accel.CODE_MORSE,
    "gaussian": _accel.CODE_GAUSSIAN,
    "riesz": _accel.CODE_RIESZ,
    "regriesz": _accel.CODE_REGRIESZ,
}

# radial mesh used for sampled gradient bounds; the floor is absolute so the
# sampled supremum of a decreasing profile does not move with R
_BOUNDS_MESH_LIN = 10001
_BOUNDS_MESH_LOG = 4096
_BOUNDS_FLOOR = 1e-9


@dataclass(frozen=True)
class KernelSpec:
    """One interaction kernel: a variant tag plus its parameters."""

    variant: str
    params: tuple = ()

    def __post_init__(self):
        if self.variant not in _VARIANTS:
            raise ValueError(f"unknown kernel variant {self.variant!r}")
        p = tuple(float(v) for v in self.params)
        object.__setattr__(self, "params", p)
        if self.variant == "quadratic":
            if len(p) != 1:
                raise ValueError("quadratic kernel takes one parameter a")
        elif self.variant in ("morse", "gaussian"):
            if len(p) != 4:
                raise ValueError(f"{self.variant} kernel takes C_a, l_a, C_r, l_r")
            ca, la, cr, lr = p
            if ca < 0 or cr < 0:
                raise ValueError("amplitudes C_a, C_r must be nonnegative")
            if ca > 0 and la <= 0:
                raise ValueError("length scale l_a must be positive")
            if cr > 0 and lr <= 0:
                raise ValueError("length scale l_r must be positive")
            # canonicalize unused length scales so downstream math never
            # divides by zero
            object.__setattr__(self, "params", (ca, la if ca > 0 else 1.0, cr, lr if cr > 0 else 1.0))
        elif self.variant == "riesz":
            if len(p) != 2:
                raise ValueError("riesz kernel takes C, alpha")
            if p[0] <= 0:
                raise ValueError("riesz amplitude C must be positive")
            if p[1] <= 0:
                raise ValueError("riesz exponent alpha must be positive")
        elif self.variant == "regriesz":
            if len(p) != 3:
                raise ValueError("regriesz kernel takes C, alpha, delta")
            if p[0] <= 0 or p[1] <= 0 or p[2] <= 0:
                raise ValueError("regriesz requires C > 0, alpha > 0, delta > 0")
        elif self.variant == "zero" and len(p) != 0:
            raise ValueError("zero kernel takes no parameters")

    # -- constructors ------------------------------------------------------

    @staticmethod
    def zero() -> "KernelSpec":
        return KernelSpec("zero")

    @staticmethod
    def quadratic(a: float) -> "KernelSpec":
        return KernelSpec("quadratic", (a,))

    @staticmethod
    def morse(C_a: float, l_a: float, C_r: float, l_r: float) -> "KernelSpec":
        return KernelSpec("morse", (C_a, l_a, C_r, l_r))

    @staticmethod
    def gaussian(C_a: float, l_a: float, C_r: float, l_r: float) -> "KernelSpec":
        return KernelSpec("gaussian", (C_a, l_a, C_r, l_r))

    @staticmethod
    def riesz(C: float, alpha: float) -> "KernelSpec":
        return KernelSpec("riesz", (C, alpha))

    @staticmethod
    def regularized_riesz(C: float, alpha: float, delta: float) -> "KernelSpec":
        return KernelSpec("regriesz", (C, alpha, delta))

    # -- classification ----------------------------------------------------

    @property
    def is_singular(self) -> bool:
        return self.variant == "riesz"

    @property
    def is_smooth(self) -> bool:
        return not self.is_singular

    def packed(self) -> tuple[int, np.ndarray]:
        """(integer code, padded parameter vector) for the compiled loops."""
        p = np.zeros(4)
        p[: len(self.params)] = self.params
        if self.variant in ("morse", "gaussian"):
            p[:] = self.params
        return _CODES[self.variant], p


@dataclass(frozen=True)
class KernelMatrix:
    """Square table of kernels K_ij plus the ambient dimension.

    Off-diagonal entries must be smooth; unregularized riesz kernels are only
    admitted on the diagonal, with exponent alpha < dimension.
    """

    entries: tuple
    dimension: int

    def __post_init__(self):
        rows = tuple(tuple(row) for row in self.entries)
        object.__setattr__(self, "entries", rows)
        n = len(rows)
        if n == 0:
            raise ValueError("kernel matrix must have at least one species")
        for row in rows:
            if len(row) != n:
                raise ValueError("kernel matrix must be square")
            for spec in row:
                if not isinstance(spec, KernelSpec):
                    raise TypeError("kernel matrix entries must be KernelSpec")
        if self.dimension < 1:
            raise DimensionMismatchError("ambient dimension must be >= 1")
        for i in range(n):
            for j in range(n):
                spec = rows[i][j]
                if spec.is_singular and i != j:
                    raise SingularEntryError(
                        f"singular kernel at off-diagonal entry ({i}, {j}); "
                        "only diagonal entries may be singular"
                    )
                if spec.variant in ("riesz", "regriesz"):
                    alpha = spec.params[1]
                    if not alpha < self.dimension:
                        raise SingularEntryError(
                            f"kernel entry ({i}, {j}): exponent alpha={alpha} "
                            f"requires alpha < dimension {self.dimension}"
                        )

    @property
    def n_species(self) -> int:
        return len(self.entries)

    @property
    def is_smooth(self) -> bool:
        return all(spec.is_smooth for row in self.entries for spec in row)

    def row_packed(self, i: int) -> tuple[np.ndarray, np.ndarray]:
        """(codes, params) arrays for row i, ready for the compiled loops."""
        n = self.n_species
        codes = np.empty(n, dtype=np.int64)
        params = np.zeros((n, 4))
        for j in range(n):
            codes[j], params[j] = self.entries[i][j].packed()
        return codes, params

    @staticmethod
    def uniform(spec: KernelSpec, n_species: int, dimension: int) -> "KernelMatrix":
        row = tuple(spec for _ in range(n_species))
        return KernelMatrix(tuple(row for _ in range(n_species)), dimension)


@dataclass(frozen=True)
class KernelBounds:
    """Gradient bounds on the ball of radius 2R.

    xi is the summed sup-norm of the gradients, upsilon the summed gradient
    Lipschitz constants; per-entry tables are kept for diagnostics.  Values
    are finite exactly when every entry is smooth (sampled on a radial mesh
    for variants without closed-form extrema).
    """

    R: float
    xi: float
    upsilon: float
    sup_grad: np.ndarray = field(repr=False, default=None)
    lip_grad: np.ndarray = field(repr=False, default=None)


# ---------------------------------------------------------------------------
# pointwise evaluation
# ---------------------------------------------------------------------------


def _as_points(x) -> tuple[np.ndarray, bool]:
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 1:
        return arr[None, :], True
    if arr.ndim == 2:
        return arr, False
    raise DimensionMismatchError(f"expected point of shape (d,) or batch (n, d), got {arr.shape}")


def eval_potential(spec: KernelSpec, x):
    """K(x) for a point (d,) or batch (n, d) of points."""
    pts, single = _as_points(x)
    r = np.sqrt(np.sum(pts * pts, axis=1))
    code, p = spec.packed()
    if spec.is_singular and np.any(r == 0.0):
        raise SingularEvaluationError("riesz potential evaluated at zero separation")
    vals = _accel._pot_value_numpy(code, p, r)
    return float(vals[0]) if single else vals


def eval_grad(spec: KernelSpec, x):
    """grad K(x); zero vector at the origin for smooth variants."""
    pts, single = _as_points(x)
    r = np.sqrt(np.sum(pts * pts, axis=1))
    code, p = spec.packed()
    zero = r == 0.0
    if spec.is_singular and np.any(zero):
        raise SingularEvaluationError("riesz gradient evaluated at zero separation")
    coeff = np.zeros_like(r)
    pos = ~zero
    coeff[pos] = _accel._grad_coeff_numpy(code, p, r[pos])
    out = coeff[:, None] * pts
    return out[0] if single else out


def regularize(spec: KernelSpec, delta: float) -> KernelSpec:
    """Replace a singular riesz kernel by its bounded surrogate.

    Smooth kernels are returned unchanged with a warning: there is nothing to
    regularize.
    """
    if delta <= 0:
        raise ValueError("regularization parameter delta must be positive")
    if spec.variant == "riesz":
        return KernelSpec.regularized_riesz(spec.params[0], spec.params[1], delta)
    warnings.warn(
        f"regularize called on smooth variant {spec.variant!r}; returned unchanged",
        NotRegularizableWarning,
        stacklevel=2,
    )
    return spec


def regularize_matrix(matrix: KernelMatrix, delta: float) -> KernelMatrix:
    """Regularize every singular diagonal entry; smooth entries untouched."""
    rows = []
    for i, row in enumerate(matrix.entries):
        rows.append(
            tuple(
                regularize(spec, delta) if spec.is_singular else spec
                for spec in row
            )
        )
    return KernelMatrix(tuple(rows), matrix.dimension)


# ---------------------------------------------------------------------------
# gradient bounds
# ---------------------------------------------------------------------------


def _radial_profiles(spec: KernelSpec, r: np.ndarray):
    """(|k'(r)|, |k''(r)|) on positive radii r."""
    code, p = spec.packed()
    kprime = _accel._grad_coeff_numpy(code, p, r) * r
    if spec.variant == "zero":
        ksecond = np.zeros_like(r)
    elif spec.variant == "quadratic":
        ksecond = np.full_like(r, p[0])
    elif spec.variant == "morse":
        ca, la, cr, lr = p
        ksecond = -(ca / la**2) * np.exp(-r / la) + (cr / lr**2) * np.exp(-r / lr)
    elif spec.variant == "gaussian":
        ca, la, cr, lr = p
        ksecond = (2 * ca / la) * (1 - 2 * r * r / la) * np.exp(-r * r / la) - (
            2 * cr / lr
        ) * (1 - 2 * r * r / lr) * np.exp(-r * r / lr)
    elif spec.variant == "riesz":
        c, a = p[0], p[1]
        ksecond = c * a * (a + 1) * r ** (-a - 2)
    else:  # regriesz
        c, a, d = p[0], p[1], p[2]
        ra = r**a
        ksecond = -c * a * r ** (a - 2) * ((a - 1) * (ra + d) - 2 * a * ra) / (ra + d) ** 3
    return np.abs(kprime), np.abs(ksecond)


def _grad_limit_at_zero(spec: KernelSpec) -> float:
    """lim_{r->0+} |k'(r)| where finite, else +inf."""
    if spec.variant in ("zero", "quadratic", "gaussian"):
        return 0.0
    if spec.variant == "morse":
        ca, la, cr, lr = spec.params
        return abs(ca / la - cr / lr)
    if spec.variant == "riesz":
        return np.inf
    # regriesz: k'(r) = -C a r^(a-1)/(r^a+delta)^2
    c, a, d = spec.params
    if a > 1:
        return 0.0
    if a == 1:
        return c / d**2
    return np.inf


def _entry_bounds(spec: KernelSpec, two_r: float, dimension: int) -> tuple[float, float]:
    if spec.variant == "zero":
        return 0.0, 0.0
    if spec.variant == "quadratic":
        a = abs(spec.params[0])
        return a * two_r, a
    if spec.variant == "riesz":
        return np.inf, np.inf
    if two_r == 0.0:
        return 0.0, 0.0
    mesh = np.unique(
        np.concatenate(
            [
                np.linspace(0.0, two_r, _BOUNDS_MESH_LIN)[1:],
                np.geomspace(min(_BOUNDS_FLOOR, two_r), two_r, _BOUNDS_MESH_LOG),
            ]
        )
    )
    kp, ks = _radial_profiles(spec, mesh)
    limit = _grad_limit_at_zero(spec)
    sup = float(max(kp.max(), limit)) if np.isfinite(limit) else float(kp.max())
    if dimension == 1:
        lip = float(ks.max())
    else:
        lip = float(max(ks.max(), (kp / mesh).max()))
    return sup, lip


def kernel_bounds(matrix: KernelMatrix, R: float) -> KernelBounds:
    """Summed gradient sup-norm and Lipschitz constants on the ball |x| <= 2R.

    Closed forms are used for zero/quadratic entries; the remaining variants
    are sampled on a dense radial mesh (linear plus geometric refinement near
    the origin, absolute floor 1e-9) together with the analytic r -> 0 limit.
    Unregularized riesz entries report +inf.
    """
    if R < 0:
        raise ValueError("radius R must be nonnegative")
    n = matrix.n_species
    sup = np.zeros((n, n))
    lip = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            sup[i, j], lip[i, j] = _entry_bounds(matrix.entries[i][j], 2.0 * R, matrix.dimension)
    return KernelBounds(R=float(R), xi=float(sup.sum()), upsilon=float(lip.sum()), sup_grad=sup, lip_grad=lip)


# ---------------------------------------------------------------------------
# field assembly
# ---------------------------------------------------------------------------


def assemble_field(
    matrix: KernelMatrix,
    ensembles,
    i: int,
    queries: np.ndarray,
    *,
    skip_singular_self: bool = True,
) -> np.ndarray:
    """Velocity field felt by species i at the query points.

    E_i(x) = - sum_j sum_h w_{j,h} grad K_ij(x - z_{j,h}) over all species
    ensembles (objects with .positions (M, d) and .weights (M,)).  When the
    diagonal kernel is singular, a query coinciding with a source of species
    i is skipped (its own contribution; enabled by default); with skipping
    disabled such a hit raises SingularEvaluationError.
    """
    if not 0 <= i < matrix.n_species:
        raise IndexError(f"species index {i} out of range")
    if len(ensembles) != matrix.n_species:
        raise DimensionMismatchError(
            f"matrix has {matrix.n_species} species, got {len(ensembles)} ensembles"
        )
    queries = np.ascontiguousarray(queries, dtype=float)
    single = queries.ndim == 1
    if single:
        queries = queries[None, :]
    if queries.shape[1] != matrix.dimension:
        raise DimensionMismatchError(
            f"queries have dimension {queries.shape[1]}, matrix expects {matrix.dimension}"
        )
    pos = []
    wts = []
    offsets = np.zeros(matrix.n_species + 1, dtype=np.int64)
    for j, ens in enumerate(ensembles):
        p = np.ascontiguousarray(ens.positions, dtype=float)
        if p.shape[1] != matrix.dimension:
            raise DimensionMismatchError(
                f"species {j} positions have dimension {p.shape[1]}, expected {matrix.dimension}"
            )
        pos.append(p)
        wts.append(np.ascontiguousarray(ens.weights, dtype=float))
        offsets[j + 1] = offsets[j] + p.shape[0]
    sources = np.concatenate(pos, axis=0) if pos else np.zeros((0, matrix.dimension))
    weights = np.concatenate(wts) if wts else np.zeros(0)
    codes, params = matrix.row_packed(i)
    out, flagged = _accel.field_sum(
        queries, sources, weights, offsets, codes, params, bool(skip_singular_self)
    )
    if flagged:
        raise SingularEvaluationError(
            "query point coincides with a source under an unregularized "
            "singular kernel and self-pair skipping is disabled"
        )
    return out[0] if single else out
