"""Shared test oracles, deliberately independent of the library internals."""

from __future__ import annotations

import numpy as np

# Two-sided 97.5% Student-t quantiles from a published table (df -> t).
T_TABLE_975 = {
    1: 12.706, 2: 4.303, 3: 3.182, 4: 2.776, 5: 2.571,
    6: 2.447, 7: 2.365, 8: 2.306, 9: 2.262, 10: 2.228,
    14: 2.145, 19: 2.093, 29: 2.045, 49: 2.010, 99: 1.984,
}


def brute_dtw(a, b, band=None):
    """DTW by exhaustive enumeration of monotone warping paths."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.ndim == 1:
        a = a[None, :]
        b = b[None, :]
    la, lb = a.shape[1], b.shape[1]

    def cost(i, j):
        d = a[:, i] - b[:, j]
        return float(np.dot(d, d))

    best = [np.inf]

    def walk(i, j, acc):
        if band is not None and abs(i - j) > band:
            return
        acc += cost(i, j)
        if acc >= best[0]:
            return
        if i == la - 1 and j == lb - 1:
            best[0] = acc
            return
        if i + 1 < la and j + 1 < lb:
            walk(i + 1, j + 1, acc)
        if i + 1 < la:
            walk(i + 1, j, acc)
        if j + 1 < lb:
            walk(i, j + 1, acc)

    walk(0, 0, 0.0)
    return float(np.sqrt(best[0]))


def brute_znorm_distances(query, series, eps=1e-8):
    """Scalar two-loop z-normalized distance profile with constant rules."""
    query = np.asarray(query, dtype=float)
    series = np.asarray(series, dtype=float)
    m = len(query)
    out = np.empty(len(series) - m + 1)
    q_std = query.std()
    q_const = q_std < eps
    if not q_const:
        zq = (query - query.mean()) / q_std
    for i in range(len(out)):
        w = series[i : i + m]
        w_std = w.std()
        w_const = w_std < eps
        if q_const and w_const:
            out[i] = 0.0
        elif q_const or w_const:
            out[i] = np.sqrt(2.0 * m)
        else:
            zw = (w - w.mean()) / w_std
            total = 0.0
            for k in range(m):
                total += (zq[k] - zw[k]) ** 2
            out[i] = np.sqrt(total)
    return out


def brute_matrix_profile(series, m, exclusion_radius):
    """Two-loop matrix profile over brute_znorm_distances rows."""
    series = np.asarray(series, dtype=float)
    p = len(series) - m + 1
    profile = np.empty(p)
    indices = np.empty(p, dtype=int)
    for i in range(p):
        row = brute_znorm_distances(series[i : i + m], series)
        lo = max(0, i - exclusion_radius)
        hi = min(p, i + exclusion_radius + 1)
        row[lo:hi] = np.inf
        indices[i] = int(np.argmin(row))
        profile[i] = row[indices[i]]
    return profile, indices


def rand_index(labels_a, labels_b) -> float:
    a = np.asarray(labels_a)
    b = np.asarray(labels_b)
    iu = np.triu_indices(len(a), 1)
    same_a = (a[:, None] == a[None, :])[iu]
    same_b = (b[:, None] == b[None, :])[iu]
    return float((same_a == same_b).mean())
