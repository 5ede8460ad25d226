"""Measurement-set partitions from distance-based DBSCAN over a grid of radii."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree


@dataclass(frozen=True)
class Cell:
    indices: tuple

    def __post_init__(self):
        idx = tuple(int(i) for i in self.indices)
        if not idx:
            raise ValueError("a cell must be non-empty")
        if any(b <= a for a, b in zip(idx, idx[1:])):
            raise ValueError("cell indices must be strictly increasing")
        object.__setattr__(self, "indices", idx)

    def __len__(self):
        return len(self.indices)


@dataclass(frozen=True)
class Partition:
    cells: tuple

    def key(self):
        return frozenset(self.cells)

    def covers(self, n_points: int) -> bool:
        seen = [i for c in self.cells for i in c.indices]
        return len(seen) == len(set(seen)) == n_points and set(seen) == set(range(n_points))


def _canonical(labels) -> Partition:
    groups = {}
    for i, lab in enumerate(labels):
        groups.setdefault(int(lab), []).append(i)
    cells = sorted((Cell(tuple(g)) for g in groups.values()), key=lambda c: c.indices[0])
    return Partition(tuple(cells))


def dbscan(points, eps: float, min_pts: int = 1) -> Partition:
    """DBSCAN where noise points become singleton cells.

    With ``min_pts = 1`` every point is a core point and the clusters are the
    connected components of the eps-neighbourhood graph.
    """
    if not eps > 0:
        raise ValueError("eps must be positive")
    if min_pts < 1:
        raise ValueError("min_pts must be at least 1")
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    n = len(pts)
    if n == 0:
        return Partition(())
    tree = cKDTree(pts)
    pairs = tree.query_pairs(eps, output_type="ndarray")
    degree = np.ones(n, dtype=int) + np.bincount(pairs.ravel(), minlength=n)
    core = degree >= min_pts
    core_pairs = pairs[core[pairs[:, 0]] & core[pairs[:, 1]]]
    graph = coo_matrix((np.ones(len(core_pairs)), (core_pairs[:, 0], core_pairs[:, 1])), shape=(n, n))
    _, labels = connected_components(graph, directed=False)
    labels = labels.astype(int)
    if min_pts > 1:
        # border points join the cluster of their lowest-index core neighbour; noise stays alone
        next_label = labels.max() + 1
        neighbours = tree.query_ball_point(pts, eps)
        for i in np.flatnonzero(~core):
            core_nb = sorted(j for j in neighbours[i] if core[j])
            if core_nb:
                labels[i] = labels[core_nb[0]]
            else:
                labels[i] = next_label
                next_label += 1
    return _canonical(labels)


def default_eps_grid(sigma_r: float, birth_extent_mean, count: int = 10):
    lo = max(2.0 * sigma_r, 1.0)
    hi = 4.0 * float(np.sqrt(np.max(np.linalg.eigvalsh(np.asarray(birth_extent_mean)))))
    hi = max(hi, lo)
    return list(np.geomspace(lo, hi, count))


def generate_partitions(points, eps_grid) -> list:
    if len(eps_grid) == 0:
        raise ValueError("eps grid must be non-empty")
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    if len(pts) == 0:
        return [Partition(())]
    seen = set()
    out = []
    for eps in eps_grid:
        part = dbscan(pts, eps)
        key = part.key()
        if key not in seen:
            seen.add(key)
            out.append(part)
    return out
