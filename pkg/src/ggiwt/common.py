"""Pieces shared by the GGIW and GGIWT PHD filters.

The measurement update of both filters has identical weight arithmetic: the
weights only see the last-state marginal of each predicted component. That
arithmetic lives here in :func:`plan_update`; each filter then materialises
the (partition, cell, component) hypotheses it keeps.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .distributions import (IW_OFFSET, GammaParams, GaussianParams, GGIWParams, InverseWishartParams,
                            cell_stats, log_translation_integral, update_terms)
from .errors import NoPartitions
from .models import DEFAULT_BIRTH_DOF, MeasModel
from .partitioning import Partition, default_eps_grid, generate_partitions


@dataclass(frozen=True, eq=False)
class BirthTemplate:
    weight: float
    params: GGIWParams


def default_birth() -> tuple:
    deg = math.pi / 180
    params = GGIWParams(
        rate=GammaParams(20.0, 2.0),
        kin=GaussianParams(np.array([0.0, 0.0, 5.0, 0.0, 0.0]),
                           np.diag([2.0**2, 2.0**2, 2.0**2, (10 * deg) ** 2, (2 * deg) ** 2])),
        ext=InverseWishartParams(DEFAULT_BIRTH_DOF, (DEFAULT_BIRTH_DOF - IW_OFFSET) * 9.0 * np.eye(2)),
    )
    return (BirthTemplate(0.03, params),)


@dataclass(frozen=True, eq=False)
class FilterConfig:
    p_survival: float = 0.99
    p_detect: float = 0.99
    clutter_rate: float = 100.0
    clutter_density: float = 1.0 / (400.0 * 400.0)
    birth: tuple = field(default_factory=default_birth)
    persistent_birth: tuple = ()
    prune_T: float = 1e-3
    merge_U: float = 5.0
    cap_M: int = 50
    extract_threshold: float = 0.5
    gate: float = 50.0
    clutter_all_cells: bool = True
    eps_grid: tuple | None = None
    l_scan: int | None = None

    def eps_values(self, mm: MeasModel):
        if self.eps_grid is not None:
            return list(self.eps_grid)
        ext = max((iw_mean_raw(b.params.ext.dof, b.params.ext.scale) for b in self.birth),
                  key=lambda x: np.max(np.linalg.eigvalsh(x)), default=np.eye(2))
        return default_eps_grid(mm.sigma_r, ext)

    def partitions(self, scan, mm: MeasModel):
        return generate_partitions(scan, self.eps_values(mm))

    def problems(self):
        out = []
        for name in ("p_survival", "p_detect"):
            val = getattr(self, name)
            if not (0 < val <= 1):
                out.append(f"{name} must lie in (0, 1]")
        if not self.clutter_rate > 0:
            out.append("clutter_rate must be positive")
        if not self.clutter_density > 0:
            out.append("clutter_density must be positive")
        for name in ("prune_T", "merge_U", "extract_threshold", "gate"):
            if not getattr(self, name) > 0:
                out.append(f"{name} must be positive")
        if not (isinstance(self.cap_M, int) and self.cap_M >= 1):
            out.append("cap_M must be a positive integer")
        if self.l_scan is not None and self.l_scan < 1:
            out.append("l_scan must be at least 1")
        if self.eps_grid is not None:
            grid = list(self.eps_grid)
            if not grid or any(e <= 0 for e in grid) or grid != sorted(grid):
                out.append("eps_grid must be non-empty, positive and ascending")
        for i, b in enumerate(tuple(self.birth) + tuple(self.persistent_birth)):
            if not b.weight > 0:
                out.append(f"birth template {i} weight must be positive")
            if not b.params.ext.dof > IW_OFFSET:
                out.append(f"birth template {i} extent dof must exceed {IW_OFFSET}")
        return out


def iw_mean_raw(dof, scale):
    return np.asarray(scale) / (dof - IW_OFFSET)


@dataclass(eq=False)
class EstimatedTrajectory:
    """Per-step estimates of one object from ``birth_time`` onwards."""

    birth_time: int
    means: np.ndarray            # (n, 5)
    extents: np.ndarray          # (n, 2, 2)
    rate: float
    weight: float = 1.0
    alive: bool = True
    label: int | None = None
    smoothed: bool = False
    fallback_steps: tuple = ()

    @property
    def length(self) -> int:
        return len(self.means)

    @property
    def end_time(self) -> int:
        return self.birth_time + len(self.means) - 1

    @property
    def positions(self):
        return self.means[:, :2]

    def to_json(self) -> dict:
        return {
            "birth_time": int(self.birth_time),
            "label": self.label,
            "weight": float(self.weight),
            "rate": float(self.rate),
            "smoothed": bool(self.smoothed),
            "states": [[float(x) for x in row] for row in self.means],
            "extents": [[float(x) for x in e.ravel()] for e in self.extents],
        }


# -- shared update -----------------------------------------------------------

@dataclass
class Marginals:
    """Stacked last-state marginals of the predicted components."""

    log_w: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray
    m: np.ndarray        # (J, 5)
    P: np.ndarray        # (J, 5, 5)
    dof: np.ndarray
    scale: np.ndarray    # (J, 2, 2)

    @classmethod
    def stack(cls, items):
        """``items`` yields (log_w, alpha, beta, m, P, dof, scale) tuples."""
        items = list(items)
        if not items:
            return cls(np.zeros(0), np.zeros(0), np.zeros(0), np.zeros((0, 5)),
                       np.zeros((0, 5, 5)), np.zeros(0), np.zeros((0, 2, 2)))
        cols = list(zip(*items))
        return cls(*(np.array(c, dtype=float) for c in cols))

    def __len__(self):
        return len(self.log_w)


def missed_detection(alpha, beta, p_detect):
    """Weight factor and moment-matched gamma after a missed detection.

    The two-term gamma mixture (1 - P_D) G(a, b) + P_D (b/(b+1))^a G(a, b+1)
    is reduced to one gamma with the same mean and variance.
    """
    alpha = np.asarray(alpha, dtype=float)
    beta = np.asarray(beta, dtype=float)
    w1 = 1.0 - p_detect
    w2 = p_detect * np.exp(alpha * (np.log(beta) - np.log1p(beta)))
    q = w1 + w2
    mu = (w1 * alpha / beta + w2 * alpha / (beta + 1.0)) / q
    second = (w1 * alpha * (alpha + 1.0) / beta**2
              + w2 * alpha * (alpha + 1.0) / (beta + 1.0) ** 2) / q
    var = second - mu**2
    return q, mu**2 / var, mu / var


@dataclass
class DetectedHyp:
    partition: int
    cell: int
    pair: int          # row into UpdatePlan.pair_terms
    source: int        # predicted component index
    log_w: float


@dataclass
class BirthHyp:
    partition: int
    cell: int
    template: int
    log_w: float


@dataclass
class UpdatePlan:
    missed_log_w: np.ndarray
    missed_alpha: np.ndarray
    missed_beta: np.ndarray
    detected: list
    births: list
    pair_terms: object           # UpdateTerms over gated (component, cell) pairs
    birth_terms: list            # per template: UpdateTerms over cells
    birth_kin: list              # per template: (means (U, 5), cov (5, 5))
    cells: list                  # unique Cell objects
    log_omega: np.ndarray        # per partition
    log_d: np.ndarray            # per unique cell


def kalman_last_block(mean, cov, eps, S, S_inv):
    """Update a (stacked) Gaussian with the position of its last state block."""
    K = cov[:, -5:-3] @ S_inv
    mean_new = mean + K @ eps
    cov_new = cov - K @ S @ K.T
    return mean_new, 0.5 * (cov_new + cov_new.T)


def plan_update(marg: Marginals, scan, partitions, cfg: FilterConfig, mm: MeasModel,
                min_weight: float = 0.0) -> UpdatePlan:
    scan = np.asarray(scan, dtype=float).reshape(-1, 2)
    if len(scan) and not partitions:
        raise NoPartitions("non-empty scan but no partitions were supplied")
    if not len(scan):
        partitions = [Partition(())]

    qf, a_m, b_m = missed_detection(marg.alpha, marg.beta, cfg.p_detect)
    missed_log_w = marg.log_w + np.log(qf)

    index = {}
    cells = []
    part_cells = []
    for part in partitions:
        ids = []
        for cell in part.cells:
            if cell not in index:
                index[cell] = len(cells)
                cells.append(cell)
            ids.append(index[cell])
        part_cells.append(ids)
    U, J = len(cells), len(marg)
    log_clutter = math.log(cfg.clutter_rate * cfg.clutter_density)
    log_pd = math.log(cfg.p_detect)
    log_min = math.log(min_weight) if min_weight > 0 else -np.inf

    if U:
        n = np.array([len(c) for c in cells], dtype=float)
        stats = [cell_stats(scan[list(c.indices)]) for c in cells]
        centroid = np.array([s[0] for s in stats])
        scatter = np.array([s[1] for s in stats])
    else:
        n = np.zeros(0)
        centroid = np.zeros((0, 2))
        scatter = np.zeros((0, 2, 2))

    # normalised clutter hypothesis; with clutter_all_cells a multi-point cell may
    # also be clutter, otherwise only singletons can be
    log_d = np.where((n == 1) | cfg.clutter_all_cells, 0.0, -np.inf)

    # gated (component, cell) pairs
    pair_j = pair_u = np.zeros(0, dtype=int)
    pair_terms = None
    pair_log_l = np.zeros(0)
    if J and U:
        pos = marg.m[:, :2]
        hph = marg.P[:, :2, :2]
        x_hat = marg.scale / (marg.dof - IW_OFFSET)[:, None, None]
        r_hat = mm.rho * x_hat + mm.noise_cov(pos)
        S = hph[:, None] + r_hat[:, None] / n[None, :, None, None]
        eps = centroid[None] - pos[:, None]
        Sd = S[..., 0, 0] * S[..., 1, 1] - S[..., 0, 1] ** 2
        maha = (S[..., 1, 1] * eps[..., 0] ** 2 - 2 * S[..., 0, 1] * eps[..., 0] * eps[..., 1]
                + S[..., 0, 0] * eps[..., 1] ** 2) / Sd
        pair_j, pair_u = np.nonzero(maha <= cfg.gate)
        if len(pair_j):
            pair_terms = update_terms(
                marg.alpha[pair_j], marg.beta[pair_j], pos[pair_j], hph[pair_j], marg.dof[pair_j],
                marg.scale[pair_j], n[pair_u], centroid[pair_u], scatter[pair_u],
                mm.noise_cov(pos)[pair_j], mm.rho)
            pair_log_l = log_pd + pair_terms.log_evidence - n[pair_u] * log_clutter
            np.logaddexp.at(log_d, pair_u, pair_log_l + marg.log_w[pair_j])

    birth_terms, birth_kin, birth_log_l = [], [], []
    if U:
        for tmpl in cfg.birth:
            kin = tmpl.params.kin
            means = np.repeat(kin.mean[None], U, axis=0)
            means[:, :2] = centroid
            terms = update_terms(
                np.full(U, tmpl.params.rate.alpha), np.full(U, tmpl.params.rate.beta), centroid,
                np.repeat(kin.cov[None, :2, :2], U, axis=0), np.full(U, tmpl.params.ext.dof),
                np.repeat(tmpl.params.ext.scale[None], U, axis=0), n, centroid, scatter,
                mm.noise_cov(centroid), mm.rho)
            # the birth position is uniform over the area (density = clutter_density);
            # the posterior is still centred on the cell centroid
            x_hat = iw_mean_raw(tmpl.params.ext.dof, tmpl.params.ext.scale)
            log_ev = log_translation_integral(terms, np.repeat(x_hat[None], U, axis=0))
            log_l = log_pd + log_ev + math.log(cfg.clutter_density) - n * log_clutter
            np.logaddexp.at(log_d, np.arange(U), log_l + math.log(tmpl.weight))
            birth_terms.append(terms)
            birth_kin.append((means, kin.cov))
            birth_log_l.append(log_l)

    scores = np.array([log_d[ids].sum() for ids in part_cells])
    log_omega = scores - logsumexp(scores)

    pairs_by_cell = {}
    for r, u in enumerate(pair_u):
        pairs_by_cell.setdefault(int(u), []).append(r)
    detected, births = [], []
    for p, ids in enumerate(part_cells):
        for u in ids:
            base = log_omega[p] - log_d[u]
            for r in pairs_by_cell.get(u, ()):
                lw = base + pair_log_l[r] + marg.log_w[pair_j[r]]
                if lw > log_min:
                    detected.append(DetectedHyp(p, u, r, int(pair_j[r]), float(lw)))
            for b, tmpl in enumerate(cfg.birth):
                lw = base + birth_log_l[b][u] + math.log(tmpl.weight)
                if lw > log_min:
                    births.append(BirthHyp(p, u, b, float(lw)))

    return UpdatePlan(missed_log_w, a_m, b_m, detected, births, pair_terms, birth_terms,
                      birth_kin, cells, log_omega, log_d)


def birth_posterior(plan: UpdatePlan, hyp: BirthHyp):
    """Updated (alpha, beta, m, P, dof, scale) of a centroid-born hypothesis and its prior extent."""
    terms = plan.birth_terms[hyp.template]
    means, cov = plan.birth_kin[hyp.template]
    u = hyp.cell
    m, P = kalman_last_block(means[u], cov, terms.eps[u], terms.S[u], terms.S_inv[u])
    return (terms.alpha_post[u], terms.beta_post[u], m, P, terms.dof_post[u], terms.scale_post[u])


def detected_extent(plan: UpdatePlan, hyp: DetectedHyp):
    t = plan.pair_terms
    r = hyp.pair
    return t.alpha_post[r], t.beta_post[r], t.dof_post[r], t.scale_post[r], t.eps[r], t.S[r], t.S_inv[r]


def reduction_groups(log_w, alpha, beta, m, P, prune_T, merge_U):
    """Prune, then greedily group components around the heaviest survivor.

    Returns a list of index arrays, one per group, in selection order; the
    first index of each group is its argmax-weight member.
    """
    log_w = np.asarray(log_w, dtype=float)
    keep = (log_w > math.log(prune_T)) & (np.asarray(alpha) / np.asarray(beta) > 1.0)
    remaining = np.flatnonzero(keep)
    groups = []
    while len(remaining):
        j = remaining[np.argmax(log_w[remaining])]
        diff = m[remaining] - m[j]
        sol = np.linalg.solve(P[j], diff.T).T
        dist = np.einsum("ij,ij->i", diff, sol)
        in_group = dist <= merge_U
        in_group[remaining == j] = True
        members = remaining[in_group]
        members = np.concatenate([[j], members[members != j]])
        groups.append(members)
        remaining = remaining[~in_group]
    return groups


def cap(groups_w, cap_M):
    """Indices of the ``cap_M`` heaviest entries, kept in their original order."""
    groups_w = np.asarray(groups_w)
    if len(groups_w) <= cap_M:
        return np.arange(len(groups_w))
    top = np.argsort(-groups_w, kind="stable")[:cap_M]
    return np.sort(top)
