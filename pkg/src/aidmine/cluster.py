"""Time-series k-means under DTW with DBA barycenters, model selection,
and leave-one-fold-out stability cross-validation.

Lloyd iterations alternate DTW assignment with DBA barycenter updates
(warm-started from the current barycenter so inertia never increases).
Restarts use seeded k-means++-style initialization over DTW distances.
Stability matches clusters across fold runs by optimal assignment on
barycenter DTW distances and compares the worst matched distance to the
mean between-cluster distance.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numba import njit
from scipy.optimize import linear_sum_assignment

from .resample import SegmentSet
from .warp import WarpConfig, _band_code, _pairwise_sqdist, _sqdist, dba


@njit(cache=True)
def _sqdist_to_center(stack, center, band):
    n = stack.shape[0]
    out = np.empty(n)
    for i in range(n):
        out[i] = _sqdist(stack[i], center, band)
    return out


@dataclass
class ClusterModel:
    k: int
    assignments: np.ndarray
    barycenters: list[np.ndarray]  # k arrays of shape (V, L)
    variables: tuple[str, ...]
    inertia: float
    silhouette: float | None
    seed: int
    config: dict
    inertia_history: list[float] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "assignments": self.assignments.tolist(),
            "barycenters": [b.tolist() for b in self.barycenters],
            "variables": list(self.variables),
            "inertia": self.inertia,
            "silhouette": self.silhouette,
            "seed": self.seed,
            "config": self.config,
        }


@dataclass
class SilhouetteResult:
    mean: float
    per_sample: np.ndarray


@dataclass
class FoldPlan:
    n_folds: int
    membership: np.ndarray  # fold id per segment

    def fold_indices(self, fold: int) -> np.ndarray:
        return np.nonzero(self.membership == fold)[0]

    def sizes(self) -> list[int]:
        return [int(np.count_nonzero(self.membership == f)) for f in range(self.n_folds)]


def _as_stack(segments, variables=None) -> tuple[np.ndarray, tuple[str, ...]]:
    if isinstance(segments, SegmentSet):
        use = tuple(variables) if variables is not None else segments.variables
        return np.ascontiguousarray(segments.to_matrix(use)), use
    arr = np.asarray(segments, dtype=np.float64)
    if arr.ndim == 2:
        arr = arr[:, None, :]
    if arr.ndim != 3:
        raise ValueError("segments must be a SegmentSet or an (n, L)/(n, V, L) array")
    return np.ascontiguousarray(arr), tuple(f"v{i}" for i in range(arr.shape[1]))


def pairwise_distances(stack: np.ndarray, config: WarpConfig | None = None) -> np.ndarray:
    """Full DTW distance matrix over an (n, V, L) stack."""
    return np.sqrt(_pairwise_sqdist(np.ascontiguousarray(stack), _band_code(config)))


def _plus_plus_init(stack: np.ndarray, k: int, rng: np.random.Generator, band: int) -> list[int]:
    n = stack.shape[0]
    chosen = [int(rng.integers(n))]
    d2 = _sqdist_to_center(stack, stack[chosen[0]], band)
    while len(chosen) < k:
        total = d2.sum()
        if total > 0:
            idx = int(rng.choice(n, p=d2 / total))
        else:
            remaining = [i for i in range(n) if i not in chosen]
            idx = int(rng.choice(np.asarray(remaining)))
        chosen.append(idx)
        d2 = np.minimum(d2, _sqdist_to_center(stack, stack[idx], band))
    return chosen


def _lloyd(
    stack: np.ndarray,
    k: int,
    centers: list[np.ndarray],
    band: int,
    max_iter: int,
    tol: float,
    barycenter_max_iter: int,
) -> tuple[np.ndarray, list[np.ndarray], float, list[float]]:
    n = stack.shape[0]
    config = WarpConfig(band_radius=None if band < 0 else band)
    prev_assign: np.ndarray | None = None
    history: list[float] = []
    assign = np.zeros(n, dtype=np.int64)
    for it in range(max_iter):
        d2 = np.column_stack([_sqdist_to_center(stack, c, band) for c in centers])
        assign = np.argmin(d2, axis=1)
        best = d2[np.arange(n), assign]
        # Empty-cluster repair: reseed with the sample farthest from its
        # barycenter, taken from a cluster that can spare a member.
        for c in range(k):
            if np.any(assign == c):
                continue
            counts = np.bincount(assign, minlength=k)
            candidates = np.nonzero(counts[assign] > 1)[0]
            s = int(candidates[np.argmax(best[candidates])])
            centers[c] = stack[s].copy()
            assign[s] = c
            best[s] = 0.0
        history.append(float(best.sum()))
        if prev_assign is not None and np.array_equal(assign, prev_assign):
            break
        if it == max_iter - 1:
            break  # keep assignments consistent with the published centers
        for c in range(k):
            members = stack[assign == c]
            centers[c] = np.ascontiguousarray(
                dba(
                    members,
                    config=config,
                    max_iter=barycenter_max_iter,
                    tol=tol,
                    init=centers[c],
                ).values
            )
        prev_assign = assign
    return assign, centers, history[-1], history


def kmeans_fit(
    segments,
    k: int,
    variables: tuple[str, ...] | None = None,
    config: WarpConfig | None = None,
    seed: int = 0,
    n_init: int = 5,
    max_iter: int = 50,
    tol: float = 1e-6,
    barycenter_max_iter: int = 10,
    compute_silhouette: bool = True,
    extra_init: list[np.ndarray] | None = None,
    _dmatrix: np.ndarray | None = None,
) -> ClusterModel:
    """Best-of-restarts DTW k-means with DBA barycenter updates.

    ``extra_init`` adds one deterministic warm-start restart (used by the
    elbow scan so inertia is non-increasing in k).
    """
    stack, var_names = _as_stack(segments, variables)
    n = stack.shape[0]
    if k < 1 or k > n:
        raise ValueError(f"k must be within [1, {n}], got {k}")
    band = _band_code(config)

    snapshot = {
        "band_radius": None if band < 0 else band,
        "n_init": n_init,
        "max_iter": max_iter,
        "tol": tol,
        "barycenter_max_iter": barycenter_max_iter,
        "variables": list(var_names),
    }

    if k == 1:
        bary = dba(stack, config=config, tol=tol)
        center = np.ascontiguousarray(bary.values)
        inertia = float(_sqdist_to_center(stack, center, band).sum())
        return ClusterModel(
            k=1,
            assignments=np.zeros(n, dtype=np.int64),
            barycenters=[center],
            variables=var_names,
            inertia=inertia,
            silhouette=None,
            seed=seed,
            config=snapshot,
            inertia_history=[inertia],
        )

    seeds = np.random.SeedSequence(seed).spawn(n_init)
    best: tuple[float, int] | None = None
    best_state = None
    inits: list[list[np.ndarray]] = []
    for r in range(n_init):
        rng = np.random.default_rng(seeds[r])
        idx = _plus_plus_init(stack, k, rng, band)
        inits.append([stack[i].copy() for i in idx])
    if extra_init is not None:
        if len(extra_init) != k:
            raise ValueError("extra_init must supply exactly k barycenters")
        inits.append([np.ascontiguousarray(np.atleast_2d(c)) for c in extra_init])

    for r, centers in enumerate(inits):
        assign, fit_centers, inertia, history = _lloyd(
            stack, k, [c.copy() for c in centers], band, max_iter, tol, barycenter_max_iter
        )
        if best is None or inertia < best[0]:
            best = (inertia, r)
            best_state = (assign, fit_centers, history)

    assert best_state is not None
    assign, centers, history = best_state
    sil = None
    if compute_silhouette:
        sil = silhouette(
            stack, assign, config=config, dmatrix=_dmatrix
        ).mean
    return ClusterModel(
        k=k,
        assignments=assign,
        barycenters=centers,
        variables=var_names,
        inertia=best[0],
        silhouette=sil,
        seed=seed,
        config=snapshot,
        inertia_history=history,
    )


def silhouette(
    segments,
    assignments,
    config: WarpConfig | None = None,
    dmatrix: np.ndarray | None = None,
    metric: str = "dtw",
) -> SilhouetteResult:
    """Mean and per-sample silhouette scores over pairwise distances.

    Distances are DTW under ``config`` (or plain Euclidean with
    ``metric="euclidean"``); singleton clusters contribute a score of 0.
    """
    stack, _ = _as_stack(segments)
    labels = np.asarray(assignments, dtype=np.int64)
    if len(labels) != stack.shape[0]:
        raise ValueError("assignments length must match segment count")
    uniq = np.unique(labels)
    if len(uniq) < 2:
        raise ValueError("silhouette undefined for a single cluster")
    if dmatrix is None:
        if metric == "dtw":
            dmatrix = pairwise_distances(stack, config)
        elif metric == "euclidean":
            flat = stack.reshape(stack.shape[0], -1)
            diff = flat[:, None, :] - flat[None, :, :]
            dmatrix = np.sqrt((diff * diff).sum(axis=2))
        else:
            raise ValueError(f"unknown metric {metric!r}")

    n = stack.shape[0]
    scores = np.zeros(n)
    members = {int(c): np.nonzero(labels == c)[0] for c in uniq}
    for i in range(n):
        own = members[int(labels[i])]
        if len(own) == 1:
            scores[i] = 0.0
            continue
        a = dmatrix[i, own].sum() / (len(own) - 1)
        b = np.inf
        for c, idx in members.items():
            if c == int(labels[i]):
                continue
            b = min(b, dmatrix[i, idx].mean())
        denom = max(a, b)
        scores[i] = 0.0 if denom == 0.0 else (b - a) / denom
    return SilhouetteResult(mean=float(scores.mean()), per_sample=scores)


@dataclass
class ElbowPoint:
    k: int
    inertia: float
    silhouette: float | None


@dataclass
class ElbowResult:
    points: list[ElbowPoint]
    knee: int | None

    def to_rows(self) -> list[dict]:
        return [
            {"k": p.k, "inertia": p.inertia, "silhouette": p.silhouette}
            for p in self.points
        ]


def _greedy_extend(stack: np.ndarray, centers: list[np.ndarray], k: int, band: int) -> list[np.ndarray]:
    out = [np.ascontiguousarray(c) for c in centers]
    while len(out) < k:
        d2 = np.min(
            np.column_stack([_sqdist_to_center(stack, c, band) for c in out]), axis=1
        )
        out.append(stack[int(np.argmax(d2))].copy())
    return out[:k]


def elbow_scan(
    segments,
    k_range,
    config: WarpConfig | None = None,
    seed: int = 0,
    n_init: int = 5,
    **fit_kwargs,
) -> ElbowResult:
    """kmeans_fit per k plus the knee (max second difference of inertia).

    Each k warm-starts one restart from the previous k's barycenters so the
    inertia column is non-increasing.
    """
    stack, _ = _as_stack(segments)
    ks = sorted(int(k) for k in k_range)
    if not ks:
        raise ValueError("empty k_range")
    band = _band_code(config)
    dmatrix = pairwise_distances(stack, config)
    points: list[ElbowPoint] = []
    prev_centers: list[np.ndarray] | None = None
    for k in ks:
        extra = None
        if prev_centers is not None and len(prev_centers) <= k:
            extra = _greedy_extend(stack, prev_centers, k, band)
        model = kmeans_fit(
            stack,
            k,
            config=config,
            seed=seed,
            n_init=n_init,
            compute_silhouette=(k >= 2),
            extra_init=extra,
            _dmatrix=dmatrix if k >= 2 else None,
            **fit_kwargs,
        )
        prev_centers = model.barycenters
        points.append(ElbowPoint(k=k, inertia=model.inertia, silhouette=model.silhouette))

    knee = None
    if len(points) >= 3:
        curvature = [
            (points[i - 1].inertia - 2.0 * points[i].inertia + points[i + 1].inertia, points[i].k)
            for i in range(1, len(points) - 1)
        ]
        best = max(curvature, key=lambda t: (t[0], -t[1]))
        knee = best[1]
    return ElbowResult(points=points, knee=knee)


def kfold_split(segment_count: int, n_folds: int, seed: int = 0, shuffle: bool = False) -> FoldPlan:
    """Contiguous-in-time folds of near-equal size (sizes differ by <= 1).

    ``shuffle=True`` permutes segments first (seeded, deterministic).
    """
    if n_folds < 2:
        raise ValueError("n_folds must be >= 2")
    if n_folds > segment_count:
        raise ValueError("n_folds cannot exceed the segment count")
    base, rem = divmod(segment_count, n_folds)
    sizes = [base + 1 if f < rem else base for f in range(n_folds)]
    contiguous = np.repeat(np.arange(n_folds), sizes)
    if not shuffle:
        return FoldPlan(n_folds=n_folds, membership=contiguous)
    perm = np.random.default_rng(seed).permutation(segment_count)
    membership = np.empty(segment_count, dtype=np.int64)
    membership[perm] = contiguous
    return FoldPlan(n_folds=n_folds, membership=membership)


@dataclass
class StabilityReport:
    k: int
    n_folds: int
    threshold: float
    per_run_matched: list[list[float]]  # matched barycenter distance per ref cluster
    per_cluster_max: list[float]
    between_mean: float
    max_ratio: float
    stable: bool
    cluster_count_mismatch: bool = False

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "n_folds": self.n_folds,
            "threshold": self.threshold,
            "per_run_matched": self.per_run_matched,
            "per_cluster_max": self.per_cluster_max,
            "between_mean": self.between_mean,
            "max_ratio": self.max_ratio,
            "stable": self.stable,
            "cluster_count_mismatch": self.cluster_count_mismatch,
        }


def _barycenter_distance_matrix(a: list[np.ndarray], b: list[np.ndarray], band: int) -> np.ndarray:
    out = np.empty((len(a), len(b)))
    for i, ba in enumerate(a):
        for j, bb in enumerate(b):
            out[i, j] = np.sqrt(_sqdist(np.ascontiguousarray(ba), np.ascontiguousarray(bb), band))
    return out


def cross_validate_stability(
    segments,
    k: int,
    config: WarpConfig | None = None,
    n_folds: int = 11,
    seed: int = 0,
    threshold: float = 0.5,
    **fit_kwargs,
) -> StabilityReport:
    """Leave-one-fold-out persistence check for the clustering.

    Fits a reference model on everything, then one model per fold drop;
    matches each run's barycenters to the reference by optimal assignment
    on DTW distance; stable iff the worst matched distance stays below
    ``threshold`` times the mean between-cluster barycenter distance.
    """
    if k < 2:
        raise ValueError("stability ratio undefined for k < 2")
    stack, _ = _as_stack(segments)
    n = stack.shape[0]
    plan = kfold_split(n, n_folds, seed=seed)
    band = _band_code(config)

    reference = kmeans_fit(
        stack, k, config=config, seed=seed, compute_silhouette=False, **fit_kwargs
    )
    between = _barycenter_distance_matrix(reference.barycenters, reference.barycenters, band)
    between_mean = float(between[np.triu_indices(k, 1)].mean())

    per_run: list[list[float]] = []
    mismatch = False
    for fold in range(n_folds):
        keep = np.nonzero(plan.membership != fold)[0]
        model = kmeans_fit(
            stack[keep], k, config=config, seed=seed, compute_silhouette=False, **fit_kwargs
        )
        if len(model.barycenters) != k:
            mismatch = True
            continue
        dmat = _barycenter_distance_matrix(reference.barycenters, model.barycenters, band)
        rows, cols = linear_sum_assignment(dmat)
        matched = [0.0] * k
        for i, j in zip(rows, cols):
            matched[int(i)] = float(dmat[i, j])
        per_run.append(matched)

    if per_run:
        per_cluster_max = [max(run[c] for run in per_run) for c in range(k)]
        max_ratio = (
            float(max(per_cluster_max) / between_mean) if between_mean > 0 else np.inf
        )
    else:
        per_cluster_max = [np.inf] * k
        max_ratio = np.inf
    stable = (not mismatch) and max_ratio < threshold
    return StabilityReport(
        k=k,
        n_folds=n_folds,
        threshold=threshold,
        per_run_matched=per_run,
        per_cluster_max=per_cluster_max,
        between_mean=between_mean,
        max_ratio=max_ratio,
        stable=stable,
        cluster_count_mismatch=mismatch,
    )
