import numpy as np
import pytest

from aidmine.cluster import (
    cross_validate_stability,
    elbow_scan,
    kfold_split,
    kmeans_fit,
    silhouette,
)
from aidmine.warp import WarpConfig, dba

from helpers import rand_index


def two_blob_segments(n_per=20, length=24, noise=0.05, seed=0):
    rng = np.random.default_rng(seed)
    t = np.linspace(0, 2 * np.pi, length)
    a = np.sin(t)
    b = np.cos(2 * t)
    rows = [a + rng.normal(0, noise, length) for _ in range(n_per)]
    rows += [b + rng.normal(0, noise, length) for _ in range(n_per)]
    labels = np.array([0] * n_per + [1] * n_per)
    return np.asarray(rows), labels


def test_k_of_one_is_dba_of_all():
    X, _ = two_blob_segments(n_per=6)
    model = kmeans_fit(X, 1, seed=0)
    reference = dba(X)
    assert np.allclose(model.barycenters[0][0], reference.values, atol=1e-12)
    assert model.silhouette is None
    assert model.inertia == pytest.approx(reference.final_cost, rel=1e-9)


def test_planted_partition_recovered():
    X, labels = two_blob_segments()
    model = kmeans_fit(X, 2, seed=1)
    assert rand_index(labels, model.assignments) >= 0.95
    assert all(np.any(model.assignments == c) for c in range(2))


def test_k_bounds_rejected():
    X, _ = two_blob_segments(n_per=3)
    with pytest.raises(ValueError):
        kmeans_fit(X, 0)
    with pytest.raises(ValueError):
        kmeans_fit(X, len(X) + 1)


def test_inertia_history_never_increases():
    X, _ = two_blob_segments(noise=0.3, seed=2)
    model = kmeans_fit(X, 3, seed=2)
    hist = model.inertia_history
    assert all(b <= a + 1e-9 for a, b in zip(hist, hist[1:]))


def test_permutation_changes_only_labels():
    X, _ = two_blob_segments(seed=3)
    rng = np.random.default_rng(3)
    perm = rng.permutation(len(X))
    m1 = kmeans_fit(X, 2, seed=4)
    m2 = kmeans_fit(X[perm], 2, seed=4)
    assert rand_index(m1.assignments[perm], m2.assignments) == 1.0


def test_silhouette_duplicated_separated_clusters_score_one():
    a = np.tile(np.sin(np.linspace(0, 2 * np.pi, 12)), (5, 1))
    b = a + 10.0
    X = np.vstack([a, b])
    labels = np.array([0] * 5 + [1] * 5)
    result = silhouette(X, labels)
    assert result.mean == 1.0
    assert np.all(result.per_sample == 1.0)


def test_silhouette_requires_two_clusters():
    X, _ = two_blob_segments(n_per=3)
    with pytest.raises(ValueError, match="silhouette undefined"):
        silhouette(X, np.zeros(len(X), dtype=int))


def test_silhouette_bounds_and_singletons():
    X, _ = two_blob_segments(n_per=4, noise=0.4, seed=5)
    labels = np.zeros(len(X), dtype=int)
    labels[0] = 1  # singleton cluster contributes exactly 0
    result = silhouette(X, labels)
    assert result.per_sample[0] == 0.0
    assert np.all(result.per_sample >= -1.0) and np.all(result.per_sample <= 1.0)
    assert -1.0 <= result.mean <= 1.0


def test_silhouette_random_split_near_zero():
    rng = np.random.default_rng(6)
    X = rng.normal(size=(30, 10))
    labels = rng.integers(0, 2, size=30)
    while len(np.unique(labels)) < 2:
        labels = rng.integers(0, 2, size=30)
    result = silhouette(X, labels)
    assert abs(result.mean) <= 0.15


def test_silhouette_euclidean_metric_option():
    X, labels = two_blob_segments(n_per=5)
    result = silhouette(X, labels, metric="euclidean")
    assert result.mean > 0.5


def test_elbow_inertia_monotone_and_knee():
    rng = np.random.default_rng(7)
    t = np.linspace(0, 2 * np.pi, 16)
    shapes = [np.sin(t), -np.sin(t), np.cos(2 * t)]
    rows = [s + rng.normal(0, 0.05, 16) for s in shapes for _ in range(8)]
    X = np.asarray(rows)
    result = elbow_scan(X, range(1, 6), seed=7)
    inertias = [p.inertia for p in result.points]
    assert all(b <= a + 1e-9 for a, b in zip(inertias, inertias[1:]))
    assert result.knee == 3
    assert result.points[0].silhouette is None


def test_elbow_k_equals_n_gives_zero_inertia():
    X, _ = two_blob_segments(n_per=3)
    result = elbow_scan(X, [1, 2, len(X)], seed=8)
    assert result.points[-1].inertia == pytest.approx(0.0, abs=1e-12)


def test_kfold_exact_and_uneven_sizes():
    plan = kfold_split(253, 11)
    assert plan.sizes() == [23] * 11

    plan = kfold_split(25, 11)
    sizes = plan.sizes()
    assert sorted(sizes, reverse=True) == [3, 3, 3, 2, 2, 2, 2, 2, 2, 2, 2]
    assert max(sizes) - min(sizes) <= 1


def test_kfold_contiguous_and_partition():
    plan = kfold_split(10, 3)
    assert np.array_equal(plan.membership, [0, 0, 0, 0, 1, 1, 1, 2, 2, 2])
    all_idx = np.concatenate([plan.fold_indices(f) for f in range(3)])
    assert sorted(all_idx.tolist()) == list(range(10))


def test_kfold_leave_one_out_and_errors():
    plan = kfold_split(5, 5)
    assert plan.sizes() == [1] * 5
    with pytest.raises(ValueError):
        kfold_split(10, 1)
    with pytest.raises(ValueError):
        kfold_split(3, 4)


def test_kfold_shuffle_deterministic_per_seed():
    a = kfold_split(20, 4, seed=3, shuffle=True)
    b = kfold_split(20, 4, seed=3, shuffle=True)
    c = kfold_split(20, 4, seed=4, shuffle=True)
    assert np.array_equal(a.membership, b.membership)
    assert not np.array_equal(a.membership, c.membership)
    assert sorted(a.sizes()) == [5, 5, 5, 5]


def test_crossval_duplicated_archetypes_stable():
    t = np.linspace(0, 2 * np.pi, 12)
    X = np.vstack([np.tile(np.sin(t), (12, 1)), np.tile(np.cos(2 * t) + 2.0, (12, 1))])
    report = cross_validate_stability(X, 2, n_folds=4, seed=0, n_init=2)
    assert report.stable
    assert report.max_ratio < 0.05
    assert not report.cluster_count_mismatch
    assert len(report.per_run_matched) == 4


def test_crossval_requires_k_of_two():
    X, _ = two_blob_segments(n_per=4)
    with pytest.raises(ValueError):
        cross_validate_stability(X, 1, n_folds=2)


def test_banded_clustering_runs():
    X, labels = two_blob_segments(n_per=6)
    model = kmeans_fit(X, 2, seed=0, config=WarpConfig(band_radius=3))
    assert rand_index(labels, model.assignments) >= 0.9
