"""Matrix Profile over regular series: motif and discord discovery.

The profile records, for every length-m window, the smallest z-normalized
Euclidean distance to any other window outside a trivial-match exclusion
zone, together with the index of that nearest neighbor. Distances use the
correlation identity d = sqrt(2m(1 - rho)); a naive reference that
z-normalizes windows explicitly is kept alongside as an independent oracle.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

# Windows with population std below this are treated as constant.
CONSTANT_STD_EPS = 1e-8
# Profile entries below this are recomputed from explicitly z-normalized
# windows, so exact duplicates report a distance of exactly 0.
_REFINE_BELOW = 1e-4


@dataclass
class MatrixProfileResult:
    profile: np.ndarray
    indices: np.ndarray
    m: int
    exclusion_radius: int

    def __len__(self) -> int:
        return len(self.profile)


class MotifPair(NamedTuple):
    index_a: int
    index_b: int
    distance: float


class Discord(NamedTuple):
    index: int
    distance: float


def default_exclusion_radius(m: int) -> int:
    """Trivial-match exclusion radius: ceil(m / 2)."""
    return -(-m // 2)


def _as_series(series, min_len: int, name: str = "series") -> np.ndarray:
    arr = np.asarray(series, dtype=np.float64)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be 1-D")
    if len(arr) < min_len:
        raise ValueError(f"{name} of length {len(arr)} too short; need >= {min_len}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return arr


def _window_stats(series: np.ndarray, m: int):
    windows = sliding_window_view(series, m)
    mu = windows.mean(axis=1)
    sigma = windows.std(axis=1)  # population std
    constant = sigma < CONSTANT_STD_EPS
    return windows, mu, sigma, constant


def _znorm_window(window: np.ndarray) -> np.ndarray:
    sigma = window.std()
    if sigma < CONSTANT_STD_EPS:
        return np.zeros_like(window)
    return (window - window.mean()) / sigma


def _exact_distance(a: np.ndarray, b: np.ndarray) -> float:
    """Distance from explicitly z-normalized windows, with the constant rules."""
    m = len(a)
    const_a = a.std() < CONSTANT_STD_EPS
    const_b = b.std() < CONSTANT_STD_EPS
    if const_a and const_b:
        return 0.0
    if const_a or const_b:
        return float(np.sqrt(2.0 * m))
    return float(np.linalg.norm(_znorm_window(a) - _znorm_window(b)))


def znorm_distance_profile(query, series) -> np.ndarray:
    """z-normalized Euclidean distance from one query window to every window.

    Uses d(i) = sqrt(2m(1 - rho_i)) with rho from a sliding dot product.
    Constant windows follow the fixed convention: distance sqrt(2m) against a
    non-constant counterpart, 0 against another constant window.
    """
    q = np.asarray(query, dtype=np.float64)
    if q.ndim != 1 or len(q) < 3:
        raise ValueError("query must be 1-D with length >= 3")
    m = len(q)
    t = _as_series(series, m)
    # z-normalized distances are shift-invariant; centering avoids the
    # cancellation in qt - m*mu_q*mu_i for series with large offsets.
    center = t.mean()
    t = t - center
    q = q - center
    windows, mu, sigma, constant = _window_stats(t, m)

    q_mu = q.mean()
    q_sigma = q.std()
    q_const = q_sigma < CONSTANT_STD_EPS

    dists = np.full(len(mu), np.sqrt(2.0 * m))
    if q_const:
        dists[constant] = 0.0
        return dists

    ok = ~constant
    qt = np.convolve(t, q[::-1], mode="valid")
    rho = np.zeros(len(mu))
    rho[ok] = (qt[ok] - m * q_mu * mu[ok]) / (m * q_sigma * sigma[ok])
    np.clip(rho, -1.0, 1.0, out=rho)
    dists[ok] = np.sqrt(2.0 * m * (1.0 - rho[ok]))
    dists[constant] = np.sqrt(2.0 * m)

    refine = np.nonzero(dists < _REFINE_BELOW)[0]
    for i in refine:
        dists[i] = _exact_distance(q, windows[i])
    return dists


def _pairwise_znorm_distances(series: np.ndarray, m: int) -> np.ndarray:
    """Full window-pair distance matrix via the correlation identity."""
    series = series - series.mean()  # shift-invariant; tames qt cancellation
    windows, mu, sigma, constant = _window_stats(series, m)
    p = len(mu)
    qt = windows @ windows.T
    sig = np.where(constant, 1.0, sigma)
    rho = (qt - m * np.outer(mu, mu)) / (m * np.outer(sig, sig))
    np.clip(rho, -1.0, 1.0, out=rho)
    dists = np.sqrt(2.0 * m * (1.0 - rho))
    if constant.any():
        dists[constant, :] = np.sqrt(2.0 * m)
        dists[:, constant] = np.sqrt(2.0 * m)
        both = np.ix_(constant, constant)
        dists[both] = 0.0
    return dists


def _apply_exclusion(dists: np.ndarray, radius: int) -> None:
    p = dists.shape[0]
    for i in range(p):
        dists[i, max(0, i - radius) : min(p, i + radius + 1)] = np.inf


def matrix_profile(
    series, m: int, exclusion_radius: int | None = None
) -> MatrixProfileResult:
    """Self-join matrix profile of a gap-free series.

    Requires len(series) >= 2m so every window has at least one admissible
    non-trivial match. Ties in the nearest neighbor break toward the
    smallest index. Near-zero profile entries are recomputed exactly from
    z-normalized windows.
    """
    if m < 3:
        raise ValueError("window length m must be >= 3")
    t = _as_series(series, 2 * m)
    radius = default_exclusion_radius(m) if exclusion_radius is None else int(exclusion_radius)
    if radius < 0:
        raise ValueError("exclusion_radius must be >= 0")
    p = len(t) - m + 1
    # A middle window is the binding case: it needs an admissible match on
    # one side, so p >= 2*radius + 2, i.e. len(series) >= m + 2*radius + 1.
    if p < 2 * radius + 2:
        raise ValueError(
            f"series of length {len(t)} too short for m={m} with exclusion "
            f"radius {radius}; need >= {m + 2 * radius + 1}"
        )

    dists = _pairwise_znorm_distances(t, m)
    _apply_exclusion(dists, radius)
    indices = np.argmin(dists, axis=1)
    profile = dists[np.arange(p), indices]

    windows = sliding_window_view(t, m)
    for i in np.nonzero(profile < _REFINE_BELOW)[0]:
        profile[i] = _exact_distance(windows[i], windows[indices[i]])

    return MatrixProfileResult(
        profile=profile, indices=indices, m=m, exclusion_radius=radius
    )


def matrix_profile_naive(
    series, m: int, exclusion_radius: int | None = None
) -> MatrixProfileResult:
    """Reference O(n^2 m) matrix profile from explicitly z-normalized windows.

    Kept deliberately independent of :func:`matrix_profile` (no shared
    distance computation) so the two can cross-check each other.
    """
    if m < 3:
        raise ValueError("window length m must be >= 3")
    t = _as_series(series, 2 * m)
    radius = default_exclusion_radius(m) if exclusion_radius is None else int(exclusion_radius)
    p = len(t) - m + 1
    if radius < 0 or p < 2 * radius + 2:
        raise ValueError("invalid exclusion radius for this series length")

    znormed = np.empty((p, m))
    constant = np.empty(p, dtype=bool)
    for i in range(p):
        w = t[i : i + m]
        constant[i] = w.std() < CONSTANT_STD_EPS
        znormed[i] = _znorm_window(w)

    flat = np.sqrt(2.0 * m)
    profile = np.empty(p)
    indices = np.empty(p, dtype=np.int64)
    for i in range(p):
        row = np.linalg.norm(znormed - znormed[i], axis=1)
        if constant[i]:
            row = np.where(constant, 0.0, flat)
        elif constant.any():
            row[constant] = flat
        row[max(0, i - radius) : min(p, i + radius + 1)] = np.inf
        j = int(np.argmin(row))
        profile[i] = row[j]
        indices[i] = j
    return MatrixProfileResult(
        profile=profile, indices=indices, m=m, exclusion_radius=radius
    )


def top_motif(result: MatrixProfileResult) -> MotifPair:
    """Lowest-profile window and its nearest neighbor (ties: smallest index)."""
    if len(result.profile) == 0:
        raise ValueError("empty profile")
    a = int(np.argmin(result.profile))
    return MotifPair(a, int(result.indices[a]), float(result.profile[a]))


def top_discord(result: MatrixProfileResult) -> Discord:
    """Highest-profile window (ties: smallest index)."""
    if len(result.profile) == 0:
        raise ValueError("empty profile")
    i = int(np.argmax(result.profile))
    return Discord(i, float(result.profile[i]))
