"""Dynamic time warping distances and DBA barycenter averaging.

DTW here is the square root of the minimal cumulative sum of squared
pointwise differences over a monotone warping path, optionally constrained
to a Sakoe-Chiba band |i - j| <= band_radius. The multivariate variant is
"dependent" DTW: one shared warping path, per-step cost summed across
variables. Barycenters are computed with DBA: align every member to the
current average, then move each average coordinate to the mean of the
member values aligned to it.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numba import njit, prange


@dataclass(frozen=True)
class WarpConfig:
    """DTW configuration. ``band_radius=None`` means unconstrained."""

    band_radius: int | None = None

    def __post_init__(self):
        if self.band_radius is not None and self.band_radius < 0:
            raise ValueError("band_radius must be >= 0 or None")


@dataclass
class Barycenter:
    """DBA result: the average sequence plus its descent trace."""

    values: np.ndarray
    iterations_run: int
    final_cost: float
    cost_sequence: list[float] = field(default_factory=list)


@njit(cache=True)
def _acc_cost(a, b, band):
    # a: (V, la), b: (V, lb). band < 0 means unconstrained.
    nvar, la = a.shape
    lb = b.shape[1]
    acc = np.full((la, lb), np.inf)
    for i in range(la):
        if band < 0:
            jlo, jhi = 0, lb
        else:
            jlo = max(0, i - band)
            jhi = min(lb, i + band + 1)
        for j in range(jlo, jhi):
            c = 0.0
            for v in range(nvar):
                d = a[v, i] - b[v, j]
                c += d * d
            if i == 0 and j == 0:
                best = 0.0
            else:
                best = np.inf
                if i > 0 and j > 0 and acc[i - 1, j - 1] < best:
                    best = acc[i - 1, j - 1]
                if i > 0 and acc[i - 1, j] < best:
                    best = acc[i - 1, j]
                if j > 0 and acc[i, j - 1] < best:
                    best = acc[i, j - 1]
            acc[i, j] = c + best
    return acc


@njit(cache=True)
def _sqdist(a, b, band):
    acc = _acc_cost(a, b, band)
    return acc[acc.shape[0] - 1, acc.shape[1] - 1]


@njit(cache=True)
def _warp_path(acc):
    # Backtrack from the end corner; ties prefer diagonal, then the row step.
    la, lb = acc.shape
    ia = np.empty(la + lb, np.int64)
    ib = np.empty(la + lb, np.int64)
    i = la - 1
    j = lb - 1
    k = 0
    ia[k] = i
    ib[k] = j
    k += 1
    while i > 0 or j > 0:
        if i == 0:
            j -= 1
        elif j == 0:
            i -= 1
        else:
            diag = acc[i - 1, j - 1]
            up = acc[i - 1, j]
            left = acc[i, j - 1]
            if diag <= up and diag <= left:
                i -= 1
                j -= 1
            elif up <= left:
                i -= 1
            else:
                j -= 1
        ia[k] = i
        ib[k] = j
        k += 1
    return ia[:k][::-1].copy(), ib[:k][::-1].copy()


@njit(cache=True)
def _dba_step(members, avg, band):
    # One DBA update: returns the new average. Coordinates that receive no
    # alignment (guarded; cannot happen with this step pattern) keep their
    # previous value.
    n, nvar, _ = members.shape
    la = avg.shape[1]
    sums = np.zeros((nvar, la))
    counts = np.zeros(la)
    for s in range(n):
        acc = _acc_cost(avg, members[s], band)
        ia, ib = _warp_path(acc)
        for p in range(ia.shape[0]):
            t = ia[p]
            u = ib[p]
            counts[t] += 1.0
            for v in range(nvar):
                sums[v, t] += members[s, v, u]
    out = np.empty_like(avg)
    for t in range(la):
        if counts[t] > 0.0:
            for v in range(nvar):
                out[v, t] = sums[v, t] / counts[t]
        else:
            for v in range(nvar):
                out[v, t] = avg[v, t]
    return out


@njit(cache=True)
def _total_sqcost(members, avg, band):
    total = 0.0
    for s in range(members.shape[0]):
        total += _sqdist(avg, members[s], band)
    return total


@njit(cache=True, parallel=True)
def _pairwise_sqdist(stack, band):
    n = stack.shape[0]
    out = np.zeros((n, n))
    for i in prange(n):
        for j in range(i + 1, n):
            d = _sqdist(stack[i], stack[j], band)
            out[i, j] = d
            out[j, i] = d
    return out


def _band_code(config: WarpConfig | None) -> int:
    if config is None or config.band_radius is None:
        return -1
    return int(config.band_radius)


def _to_2d(x, name: str) -> np.ndarray:
    arr = np.ascontiguousarray(np.asarray(x, dtype=np.float64))
    if arr.ndim == 1:
        arr = arr.reshape(1, -1)
    if arr.ndim != 2 or arr.shape[1] == 0:
        raise ValueError(f"{name} must be a non-empty 1-D or 2-D sequence")
    return arr


def _check_band(a: np.ndarray, b: np.ndarray, band: int) -> None:
    if band >= 0 and abs(a.shape[1] - b.shape[1]) > band:
        raise ValueError(
            f"band radius {band} infeasible for lengths "
            f"{a.shape[1]} and {b.shape[1]}"
        )


def dtw(a, b, config: WarpConfig | None = None) -> float:
    """DTW distance between two univariate sequences."""
    x = _to_2d(a, "a")
    y = _to_2d(b, "b")
    if x.shape[0] != 1 or y.shape[0] != 1:
        raise ValueError("dtw expects 1-D sequences; use dtw_multivariate")
    band = _band_code(config)
    _check_band(x, y, band)
    return float(np.sqrt(_sqdist(x, y, band)))


def dtw_multivariate(a, b, config: WarpConfig | None = None) -> float:
    """Dependent multivariate DTW over V x L matrices (shared warping path)."""
    x = _to_2d(a, "a")
    y = _to_2d(b, "b")
    if x.shape[0] != y.shape[0]:
        raise ValueError(
            f"variable count mismatch: {x.shape[0]} vs {y.shape[0]}"
        )
    band = _band_code(config)
    _check_band(x, y, band)
    return float(np.sqrt(_sqdist(x, y, band)))


def _member_stack(members) -> tuple[np.ndarray, bool]:
    """Normalize members to an (N, V, L) stack; flag univariate input."""
    try:
        arr = np.asarray(members, dtype=np.float64)
    except ValueError as exc:
        raise ValueError("members must share one segment length") from exc
    if arr.ndim == 2:
        return np.ascontiguousarray(arr[:, None, :]), True
    if arr.ndim == 3:
        return np.ascontiguousarray(arr), False
    raise ValueError("members must be an (N, L) or (N, V, L) array")


def medoid_index(stack: np.ndarray, band: int = -1) -> int:
    """Index of the member minimizing the sum of DTW distances to the rest."""
    dists = np.sqrt(_pairwise_sqdist(stack, band))
    return int(np.argmin(dists.sum(axis=1)))


def dba(
    members,
    config: WarpConfig | None = None,
    max_iter: int = 30,
    tol: float = 1e-6,
    init: np.ndarray | None = None,
) -> Barycenter:
    """DBA average of equal-length members.

    Starts at the medoid (or ``init`` when given, e.g. for warm starts inside
    k-means), then iterates alignment/averaging until the relative cost
    improvement drops below ``tol`` or ``max_iter`` updates ran. The returned
    ``cost_sequence`` (sum of squared DTW distances to the members, recorded
    at the start and after every accepted update) is non-increasing: an
    update that fails to improve the cost is discarded and iteration stops.
    """
    stack, univariate = _member_stack(members)
    if stack.shape[0] == 0:
        raise ValueError("empty member set")
    band = _band_code(config)
    if init is None:
        avg = stack[medoid_index(stack, band)].copy()
    else:
        avg = _to_2d(init, "init").copy()
        if avg.shape != stack.shape[1:]:
            raise ValueError("init shape does not match member shape")

    cost = float(_total_sqcost(stack, avg, band))
    costs = [cost]
    iterations = 0
    for _ in range(max_iter):
        if cost == 0.0:
            break
        candidate = _dba_step(stack, avg, band)
        new_cost = float(_total_sqcost(stack, candidate, band))
        if new_cost > cost:
            break  # float-noise ascent; keep the best iterate
        avg = candidate
        iterations += 1
        costs.append(new_cost)
        improved = cost - new_cost
        cost = new_cost
        if improved <= tol * max(cost, np.finfo(float).tiny):
            break

    values = avg[0].copy() if univariate else avg
    return Barycenter(
        values=values,
        iterations_run=iterations,
        final_cost=cost,
        cost_sequence=costs,
    )
