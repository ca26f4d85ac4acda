import numpy as np
import pytest

from aidmine.warp import Barycenter, WarpConfig, dba, dtw, dtw_multivariate

from helpers import brute_dtw


def test_dtw_identity():
    rng = np.random.default_rng(0)
    for _ in range(5):
        x = rng.normal(size=rng.integers(1, 12))
        assert dtw(x, x) == 0.0


def test_dtw_constant_offset_diagonal():
    assert dtw([0, 0, 0], [1, 1, 1]) == pytest.approx(np.sqrt(3), abs=1e-12)


def test_dtw_small_case_matches_enumeration():
    assert dtw([0, 1, 0], [0, 0, 1]) == pytest.approx(brute_dtw([0, 1, 0], [0, 0, 1]), abs=1e-12)


def test_dtw_matches_enumeration_on_corpus():
    rng = np.random.default_rng(7)
    for _ in range(60):
        a = rng.normal(size=rng.integers(1, 7))
        b = rng.normal(size=rng.integers(1, 7))
        assert dtw(a, b) == pytest.approx(brute_dtw(a, b), abs=1e-9)


def test_dtw_symmetry():
    rng = np.random.default_rng(3)
    for _ in range(30):
        a = rng.normal(size=rng.integers(2, 15))
        b = rng.normal(size=rng.integers(2, 15))
        assert dtw(a, b) == pytest.approx(dtw(b, a), abs=1e-9)


def test_dtw_bounded_by_euclidean():
    rng = np.random.default_rng(4)
    for _ in range(20):
        n = int(rng.integers(2, 20))
        a = rng.normal(size=n)
        b = rng.normal(size=n)
        assert dtw(a, b) <= np.linalg.norm(a - b) + 1e-12


def test_band_monotonicity_and_unconstrained_limit():
    rng = np.random.default_rng(5)
    a = rng.normal(size=8)
    b = rng.normal(size=8)
    dists = [dtw(a, b, WarpConfig(band_radius=r)) for r in range(9)]
    for lo, hi in zip(dists[1:], dists[:-1]):
        assert lo <= hi + 1e-12
    assert dists[-1] == pytest.approx(dtw(a, b), abs=1e-12)


def test_band_infeasible_length_difference():
    with pytest.raises(ValueError, match="infeasible"):
        dtw([1, 2, 3, 4, 5], [1, 2], WarpConfig(band_radius=1))


def test_band_radius_negative_rejected():
    with pytest.raises(ValueError):
        WarpConfig(band_radius=-1)


def test_empty_input_rejected():
    with pytest.raises(ValueError):
        dtw([], [1.0])


def test_multivariate_single_variable_reduces_to_univariate():
    rng = np.random.default_rng(6)
    a = rng.normal(size=9)
    b = rng.normal(size=9)
    assert dtw_multivariate(a[None, :], b[None, :]) == pytest.approx(dtw(a, b), abs=1e-12)


def test_multivariate_identity_and_brute():
    rng = np.random.default_rng(8)
    a = rng.normal(size=(2, 5))
    assert dtw_multivariate(a, a) == 0.0
    for _ in range(20):
        x = rng.normal(size=(2, int(rng.integers(2, 6))))
        y = rng.normal(size=(2, int(rng.integers(2, 6))))
        assert dtw_multivariate(x, y) == pytest.approx(brute_dtw(x, y), abs=1e-9)


def test_multivariate_variable_count_mismatch():
    with pytest.raises(ValueError, match="mismatch"):
        dtw_multivariate(np.zeros((2, 4)), np.zeros((3, 4)))


def test_dba_singleton_returns_member():
    x = np.array([0.3, 1.7, -2.0, 0.4])
    result = dba(x[None, :])
    assert np.array_equal(result.values, x)
    assert result.final_cost == 0.0


def test_dba_duplicates_return_member_exactly():
    x = np.array([0.1, 0.2, 0.7, -0.3, 1.1])
    members = np.tile(x, (5, 1))
    result = dba(members)
    assert np.array_equal(result.values, x)
    assert result.final_cost == 0.0


def test_dba_descends_from_medoid():
    rng = np.random.default_rng(9)
    template = np.sin(np.linspace(0, 2 * np.pi, 20))
    members = template + rng.normal(0, 0.3, size=(8, 20))
    result = dba(members)
    costs = result.cost_sequence
    assert result.final_cost <= costs[0]
    for earlier, later in zip(costs, costs[1:]):
        assert later <= earlier


def test_dba_multivariate_shape_and_descent():
    rng = np.random.default_rng(10)
    members = rng.normal(size=(6, 3, 12))
    result = dba(members)
    assert result.values.shape == (3, 12)
    for earlier, later in zip(result.cost_sequence, result.cost_sequence[1:]):
        assert later <= earlier


def test_dba_empty_rejected():
    with pytest.raises(ValueError, match="empty"):
        dba(np.empty((0, 5)))


def test_dba_ragged_members_rejected():
    with pytest.raises(ValueError):
        dba([[1.0, 2.0], [1.0, 2.0, 3.0]])


def test_dba_warm_start_init():
    rng = np.random.default_rng(11)
    members = rng.normal(size=(5, 10))
    init = members.mean(axis=0)
    result = dba(members, init=init)
    assert isinstance(result, Barycenter)
    assert result.cost_sequence[0] >= result.final_cost
