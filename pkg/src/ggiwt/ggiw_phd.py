"""Baseline GGIW-PHD filter with labelled components.

Labels give an ad-hoc way of chaining per-scan estimates into trajectories;
:func:`build_labeled_trajectories` does that chaining.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .common import (EstimatedTrajectory, FilterConfig, Marginals, birth_posterior, cap,
                     detected_extent, kalman_last_block, plan_update, reduction_groups)
from .distributions import (GammaParams, GaussianParams, GGIWParams, InverseWishartParams,
                            gamma_mean, iw_mean)
from .models import (MeasModel, MotionConfig, _predict_extent_raw, kinematics_jacobian,
                     predict_kinematics, process_noise, rotate_extent)


@dataclass(frozen=True, eq=False)
class GGIWComponent:
    log_w: float
    params: GGIWParams
    label: int = -1

    @property
    def weight(self) -> float:
        return math.exp(self.log_w)

    @classmethod
    def create(cls, weight, alpha, beta, m, P, dof, scale, label=-1):
        return cls(math.log(weight), _params(alpha, beta, m, P, dof, scale), label)


def _params(alpha, beta, m, P, dof, scale):
    return GGIWParams(GammaParams(float(alpha), float(beta)), GaussianParams(m, P),
                      InverseWishartParams(float(dof), scale))


@dataclass(frozen=True, eq=False)
class GGIWMixture:
    components: tuple = ()
    time: int = -1
    next_label: int = 0

    @property
    def weights(self):
        return np.array([c.weight for c in self.components])

    def __len__(self):
        return len(self.components)


@dataclass(frozen=True, eq=False)
class Estimate:
    label: int
    weight: float
    rate: float
    mean: np.ndarray
    extent: np.ndarray


def _marginals(components) -> Marginals:
    return Marginals.stack(
        (c.log_w, c.params.rate.alpha, c.params.rate.beta, c.params.kin.mean, c.params.kin.cov,
         c.params.ext.dof, c.params.ext.scale) for c in components)


def predict_params(p: GGIWParams, motion: MotionConfig) -> GGIWParams:
    m, P = p.kin.mean, p.kin.cov
    F = kinematics_jacobian(m, motion)
    P_new = F @ P @ F.T + process_noise(motion)
    dof, scale = _predict_extent_raw(p.ext.dof, p.ext.scale, m[4], motion)
    return _params(p.rate.alpha / motion.eta, p.rate.beta / motion.eta,
                   predict_kinematics(m, motion), 0.5 * (P_new + P_new.T), dof, scale)


def predict(mix: GGIWMixture, cfg: FilterConfig, motion: MotionConfig) -> GGIWMixture:
    log_ps = math.log(cfg.p_survival)
    comps = [GGIWComponent(c.log_w + log_ps, predict_params(c.params, motion), c.label)
             for c in mix.components]
    label = mix.next_label
    for b in cfg.persistent_birth:
        comps.append(GGIWComponent(math.log(b.weight), b.params, label))
        label += 1
    return GGIWMixture(tuple(comps), mix.time + 1, label)


def update(mix: GGIWMixture, scan, partitions, cfg: FilterConfig, mm: MeasModel,
           min_weight: float = 0.0) -> GGIWMixture:
    """Missed-detection, detected and centroid-birth branches of the PHD update.

    ``min_weight`` skips materialising hypotheses at or below that weight; the
    recursion passes the pruning threshold, which leaves reduction unchanged.
    """
    comps = mix.components
    plan = plan_update(_marginals(comps), scan, partitions, cfg, mm, min_weight)
    out = []
    for j, c in enumerate(comps):
        p = c.params
        out.append(GGIWComponent(
            float(plan.missed_log_w[j]),
            GGIWParams(GammaParams(float(plan.missed_alpha[j]), float(plan.missed_beta[j])), p.kin, p.ext),
            c.label))
    cache = {}
    for hyp in plan.detected:
        if hyp.pair not in cache:
            src = comps[hyp.source].params
            a, b, dof, scale, eps, S, S_inv = detected_extent(plan, hyp)
            m, P = kalman_last_block(src.kin.mean, src.kin.cov, eps, S, S_inv)
            cache[hyp.pair] = _params(a, b, m, P, dof, scale)
        out.append(GGIWComponent(hyp.log_w, cache[hyp.pair], comps[hyp.source].label))
    label = mix.next_label
    for hyp in plan.births:
        out.append(GGIWComponent(hyp.log_w, _params(*birth_posterior(plan, hyp)), label))
        label += 1
    return GGIWMixture(tuple(out), mix.time, label)


def reduce(mix: GGIWMixture, cfg: FilterConfig) -> GGIWMixture:
    """Prune, merge and cap.

    Merged parameters are weight-averaged; the merged component keeps the
    label of its heaviest member.
    """
    comps = mix.components
    if not comps:
        return mix
    log_w = np.array([c.log_w for c in comps])
    alpha = np.array([c.params.rate.alpha for c in comps])
    beta = np.array([c.params.rate.beta for c in comps])
    m = np.array([c.params.kin.mean for c in comps])
    P = np.array([c.params.kin.cov for c in comps])
    groups = reduction_groups(log_w, alpha, beta, m, P, cfg.prune_T, cfg.merge_U)
    merged = []
    for g in groups:
        head = comps[g[0]]
        if len(g) == 1:
            merged.append(head)
            continue
        lw = logsumexp(log_w[g])
        w = np.exp(log_w[g] - lw)
        dof = np.array([comps[i].params.ext.dof for i in g])
        scale = np.array([comps[i].params.ext.scale for i in g])
        params = _params(w @ alpha[g], w @ beta[g], w @ m[g], np.einsum("i,ijk->jk", w, P[g]),
                         w @ dof, np.einsum("i,ijk->jk", w, scale))
        merged.append(GGIWComponent(float(lw), params, head.label))
    keep = cap([c.log_w for c in merged], cfg.cap_M)
    return GGIWMixture(tuple(merged[i] for i in keep), mix.time, mix.next_label)


def extract(mix: GGIWMixture, cfg: FilterConfig) -> list:
    """Estimates of every component whose weight strictly exceeds the threshold,
    heaviest first."""
    log_thr = math.log(cfg.extract_threshold)
    chosen = sorted((c for c in mix.components if c.log_w > log_thr), key=lambda c: -c.log_w)
    return [Estimate(c.label, c.weight, gamma_mean(c.params.rate), c.params.kin.mean.copy(),
                     iw_mean(c.params.ext)) for c in chosen]


def step(mix: GGIWMixture, scan, cfg: FilterConfig, motion: MotionConfig, mm: MeasModel,
         partitions=None):
    """One predict/update/reduce/extract cycle. Returns (mixture, estimates)."""
    mix = predict(mix, cfg, motion)
    if partitions is None:
        partitions = cfg.partitions(scan, mm)
    mix = update(mix, scan, partitions, cfg, mm, min_weight=cfg.prune_T)
    mix = reduce(mix, cfg)
    return mix, extract(mix, cfg)


def build_labeled_trajectories(history, motion: MotionConfig | None = None, end_time=None) -> list:
    """Chain per-scan estimates sharing a label into trajectories.

    ``history[k]`` is the estimate list of scan ``k``. A one-scan gap is bridged
    by predicting the previous estimate; a longer absence ends the trajectory
    and a later reappearance starts a new one. When a label occurs several
    times in one scan the first (heaviest) estimate is used.
    """
    motion = motion or MotionConfig()
    end_time = len(history) - 1 if end_time is None else end_time
    open_tracks = {}
    finished = []

    def close(label):
        tr = open_tracks.pop(label)
        finished.append(tr)

    for k, estimates in enumerate(history):
        seen = set()
        for est in estimates:
            if est.label in seen:
                continue
            seen.add(est.label)
            tr = open_tracks.get(est.label)
            if tr is not None and tr["last"] == k - 2:
                prev_mean, prev_ext = tr["means"][-1], tr["extents"][-1]
                tr["means"].append(predict_kinematics(prev_mean, motion))
                tr["extents"].append(rotate_extent(prev_ext, prev_mean[4], motion.Ts))
            elif tr is not None and tr["last"] < k - 2:
                close(est.label)
                tr = None
            if tr is None:
                tr = {"birth": k, "means": [], "extents": [], "rates": [], "weights": [], "label": est.label}
                open_tracks[est.label] = tr
            tr["means"].append(np.asarray(est.mean, dtype=float))
            tr["extents"].append(np.asarray(est.extent, dtype=float))
            tr["rates"].append(est.rate)
            tr["weights"].append(est.weight)
            tr["last"] = k
        for label in [lab for lab, tr in open_tracks.items() if tr["last"] < k - 1]:
            close(label)
    finished.extend(open_tracks.values())
    out = []
    for tr in sorted(finished, key=lambda t: (t["birth"], t["label"])):
        out.append(EstimatedTrajectory(
            birth_time=tr["birth"], means=np.array(tr["means"]), extents=np.array(tr["extents"]),
            rate=float(tr["rates"][-1]), weight=float(tr["weights"][-1]),
            alive=tr["last"] == end_time, label=tr["label"]))
    return out
