"""Hot numerical loops: pairwise field assembly, pairwise energies, batched
1-D transport distances.

Two implementations live side by side: numba-compiled loops and pure-numpy
vectorized twins with identical semantics.  The active one is chosen once at
import time; set SWARMLIM_NO_NUMBA=1 to force the numpy path (it is also the
automatic fallback when numba is not importable).

Determinism contract: all routines sum sources in a fixed order (species
block-major, source index ascending) and any thread parallelism is across
independent output slots only, so results never depend on the worker count.
"""

from __future__ import annotations

import os

import numpy as np

CODE_ZERO = 0
CODE_QUADRATIC = 1
CODE_MORSE = 2
CODE_GAUSSIAN = 3
CODE_RIESZ = 4
CODE_REGRIESZ = 5

_TRUTHY = ("1", "true", "yes", "on")
_DISABLED = os.environ.get("SWARMLIM_NO_NUMBA", "").strip().lower() in _TRUTHY

try:
    import numba
    from numba import njit, prange

    NUMBA_AVAILABLE = True
except ImportError:  # pragma: no cover - exercised only without numba
    NUMBA_AVAILABLE = False

USING_NUMBA = NUMBA_AVAILABLE and not _DISABLED


def set_threads(n: int) -> int:
    """Clamp and apply the numba thread count; returns the value in effect."""
    if not USING_NUMBA:
        return 1
    limit = numba.config.NUMBA_NUM_THREADS
    n = max(1, min(int(n), limit))
    numba.set_num_threads(n)
    return n


# ---------------------------------------------------------------------------
# numpy reference implementations
# ---------------------------------------------------------------------------


def _grad_coeff_numpy(code: int, p: np.ndarray, r: np.ndarray) -> np.ndarray:
    """K'(r)/r for positive separations r (so that grad K(x) = coeff * x)."""
    if code == CODE_QUADRATIC:
        return np.full_like(r, p[0])
    if code == CODE_MORSE:
        out = (p[0] / p[1]) * np.exp(-r / p[1]) / r
        if p[2] != 0.0:
            out = out - (p[2] / p[3]) * np.exp(-r / p[3]) / r
        return out
    if code == CODE_GAUSSIAN:
        out = 2.0 * (p[0] / p[1]) * np.exp(-r * r / p[1])
        if p[2] != 0.0:
            out = out - 2.0 * (p[2] / p[3]) * np.exp(-r * r / p[3])
        return out
    if code == CODE_RIESZ:
        return -p[0] * p[1] * r ** (-p[1] - 2.0)
    if code == CODE_REGRIESZ:
        ra = r**p[1]
        return -p[0] * p[1] * ra / (r * r * (ra + p[2]) ** 2)
    return np.zeros_like(r)


def _pot_value_numpy(code: int, p: np.ndarray, r: np.ndarray) -> np.ndarray:
    """K(r) elementwise; r may contain zeros for every code but riesz."""
    if code == CODE_QUADRATIC:
        return 0.5 * p[0] * r * r
    if code == CODE_MORSE:
        out = -p[0] * np.exp(-r / p[1])
        if p[2] != 0.0:
            out = out + p[2] * np.exp(-r / p[3])
        return out
    if code == CODE_GAUSSIAN:
        out = -p[0] * np.exp(-r * r / p[1])
        if p[2] != 0.0:
            out = out + p[2] * np.exp(-r * r / p[3])
        return out
    if code == CODE_RIESZ:
        return p[0] * r ** (-p[1])
    if code == CODE_REGRIESZ:
        return p[0] / (r ** p[1] + p[2])
    return np.zeros_like(r)


def _field_sum_numpy(queries, sources, weights, offsets, codes, params, skip_singular):
    nq, dim = queries.shape
    out = np.zeros((nq, dim))
    flag = 0
    block = 512
    for j in range(offsets.shape[0] - 1):
        code = int(codes[j])
        if code == CODE_ZERO or offsets[j] == offsets[j + 1]:
            continue
        src = sources[offsets[j] : offsets[j + 1]]
        w = weights[offsets[j] : offsets[j + 1]]
        p = params[j]
        for q0 in range(0, nq, block):
            q1 = min(q0 + block, nq)
            diff = queries[q0:q1, None, :] - src[None, :, :]
            r = np.sqrt(np.sum(diff * diff, axis=2))
            zero = r == 0.0
            if zero.any() and code == CODE_RIESZ and not skip_singular:
                flag = 1
            coeff = np.zeros_like(r)
            pos = ~zero
            coeff[pos] = _grad_coeff_numpy(code, p, r[pos])
            out[q0:q1] -= np.sum((coeff * w[None, :])[:, :, None] * diff, axis=1)
    return out, flag


def _pair_energy_numpy(pa, wa, pb, wb, code, params, same_species, skip_self):
    if code == CODE_ZERO:
        return 0.0, 0, 0
    diff = pa[:, None, :] - pb[None, :, :]
    r = np.sqrt(np.sum(diff * diff, axis=2))
    zero = r == 0.0
    vals = np.zeros_like(r)
    vals[~zero] = _pot_value_numpy(code, params, r[~zero])
    n_skipped = 0
    flag = 0
    if code == CODE_RIESZ:
        if same_species and skip_self:
            ma, mb = r.shape
            k = np.arange(min(ma, mb))
            self_mask = np.zeros_like(zero)
            self_mask[k, k] = True
            n_skipped = int(np.count_nonzero(zero & self_mask))
            if np.count_nonzero(zero & ~self_mask):
                flag = 1
        elif zero.any():
            flag = 1
    else:
        vals[zero] = _pot_value_numpy(code, params, np.zeros(int(zero.sum())))
    total = float(wa @ vals @ wb)
    return total, flag, n_skipped


def _w1_pair_sorted_numpy(xa, wa, xb, wb):
    x = np.concatenate([xa, xb])
    order = np.argsort(x, kind="stable")
    deltas = np.concatenate([wa, -wb])[order]
    f = np.cumsum(deltas)
    xs = x[order]
    return float(np.sum(np.abs(f[:-1]) * np.diff(xs)))


def _w1_1d_batch_numpy(xa, wa, xb, wb):
    nl, na = xa.shape
    nb = xb.shape[1]
    x = np.concatenate([xa, xb], axis=1)
    order = np.argsort(x, axis=1, kind="stable")
    xs = np.take_along_axis(x, order, axis=1)
    deltas = np.concatenate([np.broadcast_to(wa, (nl, na)), np.broadcast_to(-wb, (nl, nb))], axis=1)
    f = np.cumsum(np.take_along_axis(deltas, order, axis=1), axis=1)
    return np.sum(np.abs(f[:, :-1]) * np.diff(xs, axis=1), axis=1)


# ---------------------------------------------------------------------------
# numba implementations
# ---------------------------------------------------------------------------

if NUMBA_AVAILABLE:

    @njit(inline="always", cache=True)
    def _grad_coeff_nb(code, p0, p1, p2, p3, r):
        if code == CODE_QUADRATIC:
            return p0
        if code == CODE_MORSE:
            out = (p0 / p1) * np.exp(-r / p1) / r
            if p2 != 0.0:
                out -= (p2 / p3) * np.exp(-r / p3) / r
            return out
        if code == CODE_GAUSSIAN:
            out = 2.0 * (p0 / p1) * np.exp(-r * r / p1)
            if p2 != 0.0:
                out -= 2.0 * (p2 / p3) * np.exp(-r * r / p3)
            return out
        if code == CODE_RIESZ:
            return -p0 * p1 * r ** (-p1 - 2.0)
        if code == CODE_REGRIESZ:
            ra = r**p1
            return -p0 * p1 * ra / (r * r * (ra + p2) ** 2)
        return 0.0

    @njit(inline="always", cache=True)
    def _pot_value_nb(code, p0, p1, p2, p3, r):
        if code == CODE_QUADRATIC:
            return 0.5 * p0 * r * r
        if code == CODE_MORSE:
            out = -p0 * np.exp(-r / p1)
            if p2 != 0.0:
                out += p2 * np.exp(-r / p3)
            return out
        if code == CODE_GAUSSIAN:
            out = -p0 * np.exp(-r * r / p1)
            if p2 != 0.0:
                out += p2 * np.exp(-r * r / p3)
            return out
        if code == CODE_RIESZ:
            return p0 * r ** (-p1)
        if code == CODE_REGRIESZ:
            return p0 / (r**p1 + p2)
        return 0.0

    @njit(parallel=True, cache=True)
    def _field_sum_nb(queries, sources, weights, offsets, codes, params, skip_singular):
        nq, dim = queries.shape
        out = np.zeros((nq, dim))
        flags = np.zeros(nq, dtype=np.int64)
        for q in prange(nq):
            for j in range(offsets.shape[0] - 1):
                code = codes[j]
                if code == CODE_ZERO:
                    continue
                p0 = params[j, 0]
                p1 = params[j, 1]
                p2 = params[j, 2]
                p3 = params[j, 3]
                for h in range(offsets[j], offsets[j + 1]):
                    r2 = 0.0
                    for c in range(dim):
                        dc = queries[q, c] - sources[h, c]
                        r2 += dc * dc
                    if r2 == 0.0:
                        if code == CODE_RIESZ and not skip_singular:
                            flags[q] = 1
                        continue
                    r = np.sqrt(r2)
                    coeff = weights[h] * _grad_coeff_nb(code, p0, p1, p2, p3, r)
                    for c in range(dim):
                        out[q, c] -= coeff * (queries[q, c] - sources[h, c])
        return out, int(flags.max()) if nq > 0 else 0

    @njit(parallel=True, cache=True)
    def _pair_energy_nb(pa, wa, pb, wb, code, p0, p1, p2, p3, same_species, skip_self):
        ma = pa.shape[0]
        mb = pb.shape[0]
        dim = pa.shape[1]
        partial = np.zeros(ma)
        flags = np.zeros(ma, dtype=np.int64)
        skipped = np.zeros(ma, dtype=np.int64)
        for k in prange(ma):
            acc = 0.0
            for h in range(mb):
                r2 = 0.0
                for c in range(dim):
                    dc = pa[k, c] - pb[h, c]
                    r2 += dc * dc
                r = np.sqrt(r2)
                if r == 0.0 and code == CODE_RIESZ:
                    if same_species and skip_self and k == h:
                        skipped[k] += 1
                    else:
                        flags[k] = 1
                    continue
                acc += wb[h] * _pot_value_nb(code, p0, p1, p2, p3, r)
            partial[k] = wa[k] * acc
        return float(np.sum(partial)), int(flags.max()) if ma > 0 else 0, int(skipped.sum())

    @njit(inline="always", cache=True)
    def _w1_merge_nb(xa, wa, xb, wb):
        na = xa.shape[0]
        nb = xb.shape[0]
        ia = 0
        ib = 0
        fa = 0.0
        fb = 0.0
        dist = 0.0
        prev = xa[0] if xa[0] < xb[0] else xb[0]
        while ia < na or ib < nb:
            ca = xa[ia] if ia < na else np.inf
            cb = xb[ib] if ib < nb else np.inf
            x = ca if ca < cb else cb
            d = fa - fb
            if d < 0.0:
                d = -d
            dist += d * (x - prev)
            prev = x
            if ca <= cb:
                fa += wa[ia]
                ia += 1
            else:
                fb += wb[ib]
                ib += 1
        return dist

    @njit(parallel=True, cache=True)
    def _w1_1d_batch_nb(xa, wa, xb, wb):
        nl = xa.shape[0]
        out = np.empty(nl)
        for l in prange(nl):
            oa = np.argsort(xa[l])
            ob = np.argsort(xb[l])
            out[l] = _w1_merge_nb(xa[l][oa], wa[oa], xb[l][ob], wb[ob])
        return out

    @njit(cache=True)
    def _w1_pair_sorted_nb(xa, wa, xb, wb):
        return _w1_merge_nb(xa, wa, xb, wb)


# ---------------------------------------------------------------------------
# dispatch
# ---------------------------------------------------------------------------


def field_sum(queries, sources, weights, offsets, codes, params, skip_singular):
    """Interaction field at each query point: minus the weighted gradient sum.

    Returns (field array (nq, d), flag); flag is nonzero when a zero
    separation met an unregularized singular kernel with skipping disabled.
    """
    if USING_NUMBA:
        return _field_sum_nb(queries, sources, weights, offsets, codes, params, skip_singular)
    return _field_sum_numpy(queries, sources, weights, offsets, codes, params, skip_singular)


def pair_energy(pa, wa, pb, wb, code, params, same_species, skip_self):
    """Double sum of wa_k wb_h K(pa_k - pb_h); returns (value, flag, n_skipped)."""
    if USING_NUMBA:
        return _pair_energy_nb(
            pa, wa, pb, wb, code, params[0], params[1], params[2], params[3], same_species, skip_self
        )
    return _pair_energy_numpy(pa, wa, pb, wb, code, params, same_species, skip_self)


def w1_pair_sorted(xa, wa, xb, wb):
    """1-D transport distance between sorted weighted samples."""
    if USING_NUMBA:
        return float(_w1_pair_sorted_nb(xa, wa, xb, wb))
    return _w1_pair_sorted_numpy(xa, wa, xb, wb)


def w1_1d_batch(xa, wa, xb, wb):
    """Row-wise 1-D transport distances for projection batches (L, n)."""
    if USING_NUMBA:
        return _w1_1d_batch_nb(xa, wa, xb, wb)
    return _w1_1d_batch_numpy(xa, wa, xb, wb)
