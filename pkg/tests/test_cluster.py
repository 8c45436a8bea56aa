import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from littoral.cluster import (
    CFAR_DBSCAN,
    DbscanParams,
    clusters_to_measurements,
    dbscan,
    detections_to_measurements,
)
from oracles import dbscan_brute


def _cells(rng, n, extent=20):
    pts = rng.integers(0, extent, size=(n, 2)).astype(float)
    pts = np.unique(pts, axis=0)
    return np.column_stack([pts, rng.random(len(pts))])


def _check_against_oracle(dets, params):
    labels = dbscan(dets, params)
    core, comp, nbr = dbscan_brute(dets[:, :2], params.eps, params.min_pts)
    # core points: same partition as the connected components of the core graph
    core_idx = np.flatnonzero(core)
    for i in core_idx:
        for j in core_idx:
            assert (labels[i] == labels[j]) == (comp[i] == comp[j])
    for i in np.flatnonzero(~core):
        core_nbrs = [j for j in nbr[i] if core[j]]
        if core_nbrs:
            # border point joins a cluster of one of its core neighbours
            assert labels[i] in {labels[j] for j in core_nbrs}
        else:
            assert labels[i] == -1
    # labels are 0..k-1 without gaps
    used = sorted(set(labels[labels >= 0]))
    assert used == list(range(len(used)))


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**31), st.integers(0, 60), st.sampled_from([1.0, 1.5, 2.0, 4.0]), st.integers(1, 6))
def test_dbscan_matches_oracle(seed, n, eps, min_pts):
    dets = _cells(np.random.default_rng(seed), n)
    _check_against_oracle(dets, DbscanParams(eps, min_pts))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31))
def test_dbscan_permutation_invariant(seed):
    rng = np.random.default_rng(seed)
    dets = _cells(rng, 50, extent=12)
    perm = rng.permutation(len(dets))
    a = dbscan(dets, CFAR_DBSCAN)
    b = dbscan(dets[perm], CFAR_DBSCAN)
    np.testing.assert_array_equal(a[perm], b)


def test_dbscan_empty_and_params():
    assert dbscan(np.zeros((0, 3)), CFAR_DBSCAN).shape == (0,)
    with pytest.raises(ValueError):
        DbscanParams(0.0, 2)
    with pytest.raises(ValueError):
        DbscanParams(1.0, 0)


def test_two_blobs_give_two_measurements():
    blob = np.array([[a, r] for a in range(3) for r in range(3)], dtype=float)
    dets = np.vstack([np.column_stack([blob, np.full(9, 0.5)]),
                      np.column_stack([blob + [20, 30], np.full(9, 0.8)])])
    dets[4, 2] = 0.9
    Z = detections_to_measurements(dets, DbscanParams(1.0, 5))
    np.testing.assert_allclose(Z, [[1, 1, 0.9], [21, 31, 0.8]])
    Zm = detections_to_measurements(dets, DbscanParams(1.0, 5), scoring="mean")
    # corners sit sqrt(2) from the lone core cell, so only the plus shape clusters
    assert Zm[0, 2] == pytest.approx((0.5 * 4 + 0.9) / 5)


def test_isolated_cells_are_noise():
    dets = np.array([[0, 0, 1.0], [10, 10, 1.0]])
    assert dbscan(dets, CFAR_DBSCAN).tolist() == [-1, -1]
    assert detections_to_measurements(dets, CFAR_DBSCAN).shape == (0, 3)


def test_bad_scoring():
    with pytest.raises(ValueError):
        clusters_to_measurements(np.zeros((1, 3)), np.zeros(1, dtype=int), scoring="median")
