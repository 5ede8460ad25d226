import numpy as np
import pytest
from hypothesis import given, strategies as st

from ggiwt.partitioning import Cell, Partition, dbscan, default_eps_grid, generate_partitions

point_sets = st.integers(0, 40).flatmap(
    lambda n: st.lists(st.tuples(st.floats(0, 50), st.floats(0, 50)), min_size=n, max_size=n))


def brute_components(pts, eps):
    n = len(pts)
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in range(n):
        for j in range(i + 1, n):
            if np.linalg.norm(pts[i] - pts[j]) <= eps:
                parent[find(i)] = find(j)
    groups = {}
    for i in range(n):
        groups.setdefault(find(i), []).append(i)
    return frozenset(Cell(tuple(g)) for g in groups.values())


@given(point_sets, st.floats(0.5, 15))
def test_dbscan_matches_union_find(pts, eps):
    pts = np.array(pts, dtype=float).reshape(-1, 2)
    part = dbscan(pts, eps)
    assert part.covers(len(pts))
    assert part.key() == brute_components(pts, eps)


@given(point_sets, st.floats(1, 15), st.integers(2, 5))
def test_dbscan_min_pts_matches_sklearn(pts, eps, min_pts):
    cluster = pytest.importorskip("sklearn.cluster")
    pts = np.array(pts, dtype=float).reshape(-1, 2)
    if len(pts) == 0:
        return
    ref = cluster.DBSCAN(eps=eps, min_samples=min_pts).fit(pts)
    part = dbscan(pts, eps, min_pts)
    assert part.covers(len(pts))
    core = set(ref.core_sample_indices_.tolist())
    labels = {}
    for k, c in enumerate(part.cells):
        for i in c.indices:
            labels[i] = k
    # core points group identically; noise points are singletons
    for i in range(len(pts)):
        for j in range(len(pts)):
            if i in core and j in core:
                assert (labels[i] == labels[j]) == (ref.labels_[i] == ref.labels_[j])
        if ref.labels_[i] == -1:
            assert len(part.cells[labels[i]]) == 1


def test_partitions_deduplicated_and_ordered():
    pts = np.array([[0, 0], [1, 0], [10, 0], [11, 0], [30, 0]], dtype=float)
    parts = generate_partitions(pts, [0.5, 0.8, 2.0, 3.0, 10.0, 25.0])
    assert [len(p.cells) for p in parts] == [5, 3, 2, 1]
    assert len({p.key() for p in parts}) == len(parts)


def test_empty_scan_and_errors():
    assert generate_partitions(np.zeros((0, 2)), [1.0]) == [Partition(())]
    with pytest.raises(ValueError):
        generate_partitions(np.zeros((1, 2)), [])
    with pytest.raises(ValueError):
        dbscan(np.zeros((1, 2)), 0.0)
    with pytest.raises(ValueError):
        Cell(())
    with pytest.raises(ValueError):
        Cell((2, 1))


def test_default_eps_grid():
    grid = default_eps_grid(1.0, 9.0 * np.eye(2))
    assert grid[0] == pytest.approx(2.0) and grid[-1] == pytest.approx(12.0)
    assert np.all(np.diff(grid) > 0)
