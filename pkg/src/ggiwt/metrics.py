"""Trajectory GOSPA with a Gaussian-Wasserstein base distance.

The cost between a true and an estimated trajectory at one scan is the
Gaussian-Wasserstein distance between their (position, extent) pairs, cut off
at ``c``. Assignments may change between scans at a switch cost; the optimal
assignment sequence is found by a Viterbi pass over partial assignments.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog
from scipy.sparse import coo_matrix

from .errors import LengthMismatch, NonSPDInput

EIG_FLOOR = 1e-12
MAX_DP_STATES = 4000


@dataclass(frozen=True)
class MetricConfig:
    c: float = 10.0
    p: float = 2.0
    switch_penalty: float = 2.0

    def problems(self):
        out = []
        if not self.c > 0:
            out.append("metric cutoff c must be positive")
        if not self.p >= 1:
            out.append("metric order p must be at least 1")
        if not self.switch_penalty >= 0:
            out.append("switch_penalty must be non-negative")
        return out


@dataclass(eq=False)
class MetricReport:
    """Per-scan metric values. Arrays share one length (number of scans)."""

    total: np.ndarray
    c_l: np.ndarray
    c_m: np.ndarray
    c_f: np.ndarray
    c_t: np.ndarray
    est_card: np.ndarray
    true_card: np.ndarray

    FIELDS = ("total", "c_l", "c_m", "c_f", "c_t", "est_card", "true_card")

    def __len__(self):
        return len(self.total)

    @classmethod
    def from_rows(cls, rows):
        """``rows`` is a sequence of (total, c_l, c_m, c_f, c_t, est_card, true_card)."""
        cols = np.array(rows, dtype=float).reshape(-1, 7).T
        return cls(*cols)


def _sqrtm_sym(A):
    w, U = np.linalg.eigh(A)
    w = np.maximum(w, EIG_FLOOR)
    return (U * np.sqrt(w)[..., None, :]) @ np.swapaxes(U, -1, -2)


def _check_spd(X):
    X = np.asarray(X, dtype=float)
    if X.shape[-2:] != (2, 2) or not np.allclose(X, np.swapaxes(X, -1, -2)):
        raise NonSPDInput("extent must be a symmetric 2x2 matrix")
    if X.size and np.min(np.linalg.eigvalsh(X)) <= 0:
        raise NonSPDInput("extent must be positive definite")
    return X


def gw_squared(ma, Xa, mb, Xb):
    """Batched squared Gaussian-Wasserstein distance (no input checks)."""
    ma, Xa, mb, Xb = (np.asarray(a, dtype=float) for a in (ma, Xa, mb, Xb))
    ra = _sqrtm_sym(Xa)
    cross = _sqrtm_sym(ra @ Xb @ ra)
    tr = np.trace(Xa + Xb - 2.0 * cross, axis1=-2, axis2=-1)
    diff = ma - mb
    return np.sum(diff * diff, axis=-1) + np.maximum(tr, 0.0)


def gw_distance(a, b) -> float:
    """Gaussian-Wasserstein distance between two (mean, extent) pairs."""
    ma, Xa = np.asarray(a[0], dtype=float), _check_spd(a[1])
    mb, Xb = np.asarray(b[0], dtype=float), _check_spd(b[1])
    if np.array_equal(ma, mb) and np.array_equal(Xa, Xb):
        return 0.0
    # symmetrise the evaluation order so d(a, b) == d(b, a) bit for bit
    d2 = 0.5 * (gw_squared(ma, Xa, mb, Xb) + gw_squared(mb, Xb, ma, Xa))
    return float(np.sqrt(d2))


# -- trajectory tabulation ----------------------------------------------------

def _tabulate(trajs, n_scans):
    """Existence mask, positions and extents of each trajectory on scans 0..n_scans-1."""
    n = len(trajs)
    exists = np.zeros((n, n_scans), dtype=bool)
    pos = np.zeros((n, n_scans, 2))
    ext = np.tile(np.eye(2), (n, n_scans, 1, 1))
    for i, tr in enumerate(trajs):
        b = int(tr.birth_time)
        means = np.asarray(tr.means, dtype=float)
        extents = np.asarray(tr.extents, dtype=float)
        lo, hi = max(b, 0), min(b + len(means), n_scans)
        if hi <= lo:
            continue
        exists[i, lo:hi] = True
        pos[i, lo:hi] = means[lo - b:hi - b, :2]
        ext[i, lo:hi] = _check_spd(extents[lo - b:hi - b])
    return exists, pos, ext


def _pair_costs(tx, ty, n_scans, cfg: MetricConfig):
    """Cut-off base distances to the power p, shape (T, nx, ny), plus existence masks."""
    ex_x, px, Xx = _tabulate(tx, n_scans)
    ex_y, py, Xy = _tabulate(ty, n_scans)
    nx, ny = len(tx), len(ty)
    dist = np.full((n_scans, nx, ny), np.inf)
    both = ex_x[:, None, :] & ex_y[None, :, :]            # (nx, ny, T)
    ii, jj, tt = np.nonzero(both)
    if len(ii):
        d2 = gw_squared(px[ii, tt], Xx[ii, tt], py[jj, tt], Xy[jj, tt])
        dist[tt, ii, jj] = np.sqrt(d2)
    return dist, ex_x.T, ex_y.T                           # masks as (T, n)


def _injections(nx, ny):
    """All partial injections truth -> estimate, as rows with 0 = unassigned, j+1 = estimate j."""
    rows = []
    for k in range(min(nx, ny) + 1):
        for xs in itertools.combinations(range(nx), k):
            for ys in itertools.permutations(range(ny), k):
                row = [0] * nx
                for i, j in zip(xs, ys):
                    row[i] = j + 1
                rows.append(row)
    return np.array(rows, dtype=int).reshape(len(rows), nx)


def _state_count(nx, ny):
    from math import comb, perm
    return sum(comb(nx, k) * perm(ny, k) for k in range(min(nx, ny) + 1))


def _switch_weights(a, b):
    """Per-truth switch indicator between two assignments: 0, 1/2 or 1."""
    changed = a != b
    half = (a == 0) | (b == 0)
    return np.where(changed, np.where(half, 0.5, 1.0), 0.0)


def _decompose(assign, dist, ex_x, ex_y, cfg: MetricConfig):
    """Split the cost of an integral assignment sequence into its four parts."""
    c_p = cfg.c ** cfg.p
    T, nx = assign.shape
    loc = miss = false = 0.0
    for t in range(T):
        used = np.zeros(ex_y.shape[1], dtype=bool)
        for i in range(nx):
            j = assign[t, i] - 1
            if j >= 0:
                used[j] = True
            if not ex_x[t, i]:
                if j >= 0 and ex_y[t, j]:
                    false += c_p / 2
                continue
            if j < 0 or not ex_y[t, j]:
                miss += c_p / 2
            elif dist[t, i, j] < cfg.c:
                loc += dist[t, i, j] ** cfg.p
            else:
                miss += c_p / 2
                false += c_p / 2
        false += c_p / 2 * np.count_nonzero(ex_y[t] & ~used)
    sw = 0.0
    if T > 1:
        sw = cfg.switch_penalty ** cfg.p * float(_switch_weights(assign[:-1], assign[1:]).sum())
    return loc, miss, false, sw


def _viterbi(dist, ex_x, ex_y, cfg: MetricConfig):
    T, nx, ny = dist.shape
    c_p = cfg.c ** cfg.p
    states = _injections(nx, ny)
    # per-scan cost of assigning truth i to slot s (0 = none), minus the false cost the
    # estimate would otherwise pay; unassigned estimates add their false cost as a constant
    false_j = c_p / 2 * ex_y                                        # (T, ny)
    pair = np.where(np.isfinite(dist), np.minimum(dist, cfg.c) ** cfg.p, 0.0)
    pair = np.where(ex_x[:, :, None] & ex_y[:, None, :], pair,
                    c_p / 2 * (ex_x[:, :, None].astype(float) + ex_y[:, None, :]))
    B = np.empty((T, nx, ny + 1))
    B[:, :, 0] = c_p / 2 * ex_x
    B[:, :, 1:] = pair - false_j[:, None, :]
    cols = np.arange(nx)
    state_cost = B[:, cols[None, :], states].sum(axis=2) + false_j.sum(axis=1)[:, None]   # (T, S)
    W = cfg.switch_penalty ** cfg.p * _switch_weights(states[:, None, :], states[None, :, :]).sum(axis=2)

    V = state_cost[0].copy()
    back = np.zeros((T, len(states)), dtype=int)
    for t in range(1, T):
        cand = V[:, None] + W
        back[t] = np.argmin(cand, axis=0)
        V = cand[back[t], np.arange(len(states))] + state_cost[t]
    s = int(np.argmin(V))
    path = [s]
    for t in range(T - 1, 0, -1):
        s = int(back[t, s])
        path.append(s)
    return states[path[::-1]]


def _lp(dist, ex_x, ex_y, cfg: MetricConfig):
    """LP relaxation of the assignment-sequence problem; returns (loc, miss, false, switch).

    Exact whenever the relaxation has an integral optimum, which is common but
    not guaranteed; only used for sets too large for the exact Viterbi pass.
    """
    T, nx, ny = dist.shape
    c_p = cfg.c ** cfg.p
    g_p = cfg.switch_penalty ** cfg.p
    nw = (nx + 1) * (ny + 1)

    def widx(t, i, j):
        return t * nw + i * (ny + 1) + j

    n_w = T * nw
    n_e = max(T - 1, 0) * nx * ny
    cost = np.zeros(n_w + n_e)
    loc_c = np.zeros(n_w)
    miss_c = np.zeros(n_w)
    false_c = np.zeros(n_w)
    for t in range(T):
        for i in range(nx):
            miss_c[widx(t, i, ny)] = c_p / 2 * ex_x[t, i]
            for j in range(ny):
                k = widx(t, i, j)
                if ex_x[t, i] and ex_y[t, j]:
                    if dist[t, i, j] < cfg.c:
                        loc_c[k] = dist[t, i, j] ** cfg.p
                    else:
                        miss_c[k] = false_c[k] = c_p / 2
                else:
                    miss_c[k] = c_p / 2 * ex_x[t, i]
                    false_c[k] = c_p / 2 * ex_y[t, j]
        for j in range(ny):
            false_c[widx(t, nx, j)] = c_p / 2 * ex_y[t, j]
    cost[:n_w] = loc_c + miss_c + false_c
    cost[n_w:] = g_p / 2

    r, c, v, b_eq = [], [], [], []
    row = 0
    for t in range(T):
        for i in range(nx):
            for j in range(ny + 1):
                r.append(row); c.append(widx(t, i, j)); v.append(1.0)
            b_eq.append(1.0); row += 1
        for j in range(ny):
            for i in range(nx + 1):
                r.append(row); c.append(widx(t, i, j)); v.append(1.0)
            b_eq.append(1.0); row += 1
    A_eq = coo_matrix((v, (r, c)), shape=(row, n_w + n_e))

    r, c, v = [], [], []
    row = 0
    e = n_w
    for t in range(T - 1):
        for i in range(nx):
            for j in range(ny):
                for sign in (1.0, -1.0):
                    r += [row, row, row]
                    c += [widx(t, i, j), widx(t + 1, i, j), e]
                    v += [sign, -sign, -1.0]
                    row += 1
                e += 1
    A_ub = coo_matrix((v, (r, c)), shape=(row, n_w + n_e)) if row else None
    bounds = [(0, 1)] * n_w + [(0, None)] * n_e
    for t in range(T):
        bounds[widx(t, nx, ny)] = (0, 0)
    res = linprog(cost, A_ub=A_ub, b_ub=np.zeros(row) if row else None, A_eq=A_eq,
                  b_eq=np.array(b_eq), bounds=bounds, method="highs")
    x = res.x
    w = x[:n_w]
    return float(loc_c @ w), float(miss_c @ w), float(false_c @ w), float(g_p / 2 * x[n_w:].sum())


def trajectory_distance(truth, est, cfg: MetricConfig = MetricConfig(), n_scans=None):
    """Trajectory metric over scans 0..n_scans-1.

    Returns (total, c_l, c_m, c_f, c_t) with total^p = sum of the parts^p.
    Trajectories need ``birth_time``, ``means`` (first two columns are the
    position) and ``extents``.
    """
    truth, est = list(truth), list(est)
    if n_scans is None:
        ends = [int(t.birth_time) + len(t.means) for t in truth + est]
        n_scans = max(ends, default=0)
    if n_scans <= 0 or not (truth or est):
        return 0.0, 0.0, 0.0, 0.0, 0.0
    dist, ex_x, ex_y = _pair_costs(truth, est, n_scans, cfg)
    if _state_count(len(truth), len(est)) <= MAX_DP_STATES:
        parts = _decompose(_viterbi(dist, ex_x, ex_y, cfg), dist, ex_x, ex_y, cfg)
    else:
        parts = _lp(dist, ex_x, ex_y, cfg)
    parts = [max(x, 0.0) for x in parts]
    inv = 1.0 / cfg.p
    return (sum(parts) ** inv,) + tuple(x ** inv for x in parts)


def rms_over_runs(per_run) -> MetricReport:
    """Root mean square over runs of every per-scan cost; cardinalities are averaged."""
    per_run = list(per_run)
    if not per_run:
        raise LengthMismatch("no reports to aggregate")
    n = len(per_run[0])
    if any(len(r) != n for r in per_run):
        raise LengthMismatch("reports cover different numbers of scans")
    out = {}
    for name in MetricReport.FIELDS:
        stack = np.array([getattr(r, name) for r in per_run], dtype=float)
        if name.endswith("card"):
            out[name] = stack.mean(axis=0)
        else:
            out[name] = np.sqrt(np.mean(stack**2, axis=0))
    return MetricReport(**out)
