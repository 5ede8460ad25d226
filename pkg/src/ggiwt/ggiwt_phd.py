"""GGIWT-PHD filter: PHD filtering over sets of extended-object trajectories.

Each component carries a stacked Gaussian over the whole kinematic history,
a per-step inverse-Wishart sequence for the extent, and the predicted extent
parameters of every step so that the extent sequence can be smoothed after
extraction.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .common import (EstimatedTrajectory, FilterConfig, Marginals, birth_posterior, cap,
                     detected_extent, kalman_last_block, plan_update, reduction_groups)
from .distributions import IW_OFFSET, GammaParams, is_spd
from .errors import DofTooSmall
from .models import (STATE_DIM, MeasModel, MotionConfig, _predict_extent_raw, kinematics_jacobian,
                     predict_kinematics, process_noise, rotation)


@dataclass(frozen=True, eq=False)
class TrajectoryComponent:
    log_w: float
    birth_time: int
    rate: GammaParams
    mean: np.ndarray          # (5n,)
    cov: np.ndarray           # (5n, 5n)
    ext_dof: np.ndarray       # (n,)
    ext_scale: np.ndarray     # (n, 2, 2)
    pred_dof: np.ndarray      # (n,) predicted dof at each step
    pred_scale: np.ndarray    # (n, 2, 2) predicted scale at each step
    ext_rot: np.ndarray       # (n,) rotation angle used to predict step i from i-1

    @property
    def weight(self) -> float:
        return math.exp(self.log_w)

    @property
    def n(self) -> int:
        return len(self.ext_dof)

    @property
    def last_mean(self):
        return self.mean[-STATE_DIM:]

    @property
    def last_cov(self):
        return self.cov[-STATE_DIM:, -STATE_DIM:]

    def step_means(self):
        return self.mean.reshape(-1, STATE_DIM)

    def problems(self):
        out = []
        if self.n < 1:
            out.append("trajectory length must be at least 1")
        if self.mean.shape != (STATE_DIM * self.n,) or self.cov.shape != (STATE_DIM * self.n,) * 2:
            out.append("stacked mean/covariance size does not match length")
        elif np.max(np.abs(self.cov - self.cov.T)) > 1e-9:
            out.append("trajectory covariance not symmetric")
        if np.any(self.ext_dof <= IW_OFFSET):
            out.append("extent dof must exceed 2d + 2")
        if not all(is_spd(s) for s in self.ext_scale):
            out.append("extent scale not SPD")
        if len(self.pred_dof) != self.n:
            out.append("stored predictions must match length")
        return out


@dataclass(frozen=True, eq=False)
class TrajectoryMixture:
    components: tuple = ()
    time: int = -1

    @property
    def weights(self):
        return np.array([c.weight for c in self.components])

    def __len__(self):
        return len(self.components)


def single_step(log_w, time, alpha, beta, m, P, dof, scale, pred_dof=None, pred_scale=None):
    """Length-one trajectory component."""
    pred_dof = dof if pred_dof is None else pred_dof
    pred_scale = scale if pred_scale is None else pred_scale
    return TrajectoryComponent(
        float(log_w), int(time), GammaParams(float(alpha), float(beta)), np.array(m, dtype=float),
        np.array(P, dtype=float), np.array([float(dof)]), np.array(scale, dtype=float)[None],
        np.array([float(pred_dof)]), np.array(pred_scale, dtype=float)[None], np.zeros(1))


def _marginals(components) -> Marginals:
    return Marginals.stack(
        (c.log_w, c.rate.alpha, c.rate.beta, c.last_mean, c.last_cov, c.ext_dof[-1], c.ext_scale[-1])
        for c in components)


def _extend_cov(cov, F, Q, l_scan):
    size = cov.shape[0]
    last = cov[-STATE_DIM:]
    out = np.empty((size + STATE_DIM, size + STATE_DIM))
    out[:size, :size] = cov
    cross = F @ last                     # F P[last, :]
    out[size:, :size] = cross
    out[:size, size:] = cross.T
    corner = F @ cov[-STATE_DIM:, -STATE_DIM:] @ F.T + Q
    out[size:, size:] = 0.5 * (corner + corner.T)
    if l_scan is not None:
        n_new = size // STATE_DIM + 1
        old = STATE_DIM * max(n_new - l_scan, 0)
        if old:
            out[:old, old:] = 0.0
            out[old:, :old] = 0.0
    return out


def predict_component(c: TrajectoryComponent, motion: MotionConfig, l_scan=None, log_ps=0.0):
    m_last = c.last_mean
    F = kinematics_jacobian(m_last, motion)
    mean = np.concatenate([c.mean, predict_kinematics(m_last, motion)])
    cov = _extend_cov(c.cov, F, process_noise(motion), l_scan)
    dof, scale = _predict_extent_raw(c.ext_dof[-1], c.ext_scale[-1], m_last[4], motion)
    return TrajectoryComponent(
        c.log_w + log_ps, c.birth_time, GammaParams(c.rate.alpha / motion.eta, c.rate.beta / motion.eta),
        mean, cov, np.append(c.ext_dof, dof), np.concatenate([c.ext_scale, scale[None]]),
        np.append(c.pred_dof, dof), np.concatenate([c.pred_scale, scale[None]]),
        np.append(c.ext_rot, m_last[4] * motion.Ts))


def t_predict(mix: TrajectoryMixture, cfg: FilterConfig, motion: MotionConfig) -> TrajectoryMixture:
    log_ps = math.log(cfg.p_survival)
    comps = [predict_component(c, motion, cfg.l_scan, log_ps) for c in mix.components]
    t = mix.time + 1
    for b in cfg.persistent_birth:
        p = b.params
        comps.append(single_step(math.log(b.weight), t, p.rate.alpha, p.rate.beta, p.kin.mean,
                                 p.kin.cov, p.ext.dof, p.ext.scale))
    return TrajectoryMixture(tuple(comps), t)


def t_update(mix: TrajectoryMixture, scan, partitions, cfg: FilterConfig, mm: MeasModel,
             min_weight: float = 0.0) -> TrajectoryMixture:
    """Same hypothesis structure and weights as the GGIW update; detected
    components update the whole stacked trajectory through its cross-covariances,
    extents are updated at the last step only."""
    comps = mix.components
    plan = plan_update(_marginals(comps), scan, partitions, cfg, mm, min_weight)
    out = []
    for j, c in enumerate(comps):
        out.append(TrajectoryComponent(
            float(plan.missed_log_w[j]), c.birth_time,
            GammaParams(float(plan.missed_alpha[j]), float(plan.missed_beta[j])),
            c.mean, c.cov, c.ext_dof, c.ext_scale, c.pred_dof, c.pred_scale, c.ext_rot))
    cache = {}
    for hyp in plan.detected:
        if hyp.pair not in cache:
            c = comps[hyp.source]
            a, b, dof, scale, eps, S, S_inv = detected_extent(plan, hyp)
            mean, cov = kalman_last_block(c.mean, c.cov, eps, S, S_inv)
            ext_dof = c.ext_dof.copy()
            ext_dof[-1] = dof
            ext_scale = c.ext_scale.copy()
            ext_scale[-1] = scale
            cache[hyp.pair] = (c.birth_time, GammaParams(float(a), float(b)), mean, cov, ext_dof,
                               ext_scale, c.pred_dof, c.pred_scale, c.ext_rot)
        out.append(TrajectoryComponent(hyp.log_w, *cache[hyp.pair]))
    for hyp in plan.births:
        a, b, m, P, dof, scale = birth_posterior(plan, hyp)
        prior = cfg.birth[hyp.template].params.ext
        out.append(single_step(hyp.log_w, mix.time, a, b, m, P, dof, scale, prior.dof, prior.scale))
    return TrajectoryMixture(tuple(out), mix.time)


def t_reduce(mix: TrajectoryMixture, cfg: FilterConfig) -> TrajectoryMixture:
    """Prune, absorb and cap.

    Each group keeps its heaviest member's full parameter set unchanged and
    takes the summed weight. Gating uses the last-state marginal.
    """
    comps = mix.components
    if not comps:
        return mix
    log_w = np.array([c.log_w for c in comps])
    alpha = np.array([c.rate.alpha for c in comps])
    beta = np.array([c.rate.beta for c in comps])
    m = np.array([c.last_mean for c in comps])
    P = np.array([c.last_cov for c in comps])
    groups = reduction_groups(log_w, alpha, beta, m, P, cfg.prune_T, cfg.merge_U)
    kept = []
    for g in groups:
        head = comps[g[0]]
        lw = float(logsumexp(log_w[g])) if len(g) > 1 else head.log_w
        kept.append(TrajectoryComponent(lw, head.birth_time, head.rate, head.mean, head.cov,
                                        head.ext_dof, head.ext_scale, head.pred_dof,
                                        head.pred_scale, head.ext_rot))
    idx = cap([c.log_w for c in kept], cfg.cap_M)
    return TrajectoryMixture(tuple(kept[i] for i in idx), mix.time)


def _to_estimate(c: TrajectoryComponent, extents, **kw):
    return EstimatedTrajectory(birth_time=c.birth_time, means=c.step_means().copy(), extents=extents,
                               rate=c.rate.alpha / c.rate.beta, weight=c.weight, **kw)


def _iw_means(dof, scale):
    denom = dof - IW_OFFSET
    if np.any(denom <= 0):
        raise DofTooSmall("inverse-Wishart mean needs dof > 2d + 2")
    return scale / denom[:, None, None]


def extracted_components(mix: TrajectoryMixture, cfg: FilterConfig) -> list:
    log_thr = math.log(cfg.extract_threshold)
    return sorted((c for c in mix.components if c.log_w > log_thr), key=lambda c: -c.log_w)


def t_extract(mix: TrajectoryMixture, cfg: FilterConfig) -> list:
    return [_to_estimate(c, _iw_means(c.ext_dof, c.ext_scale))
            for c in extracted_components(mix, cfg)]


def smoothed_extent_params(c: TrajectoryComponent):
    """Backward pass over the extent sequence.

    Returns smoothed (dof, scale) arrays and the steps where the smoothed
    scale lost positive definiteness and the filtered value was kept.
    """
    n = c.n
    dof = c.ext_dof.astype(float).copy()
    scale = c.ext_scale.astype(float).copy()
    fallback = []
    for k in range(n - 2, -1, -1):
        d_dof = dof[k + 1] - c.pred_dof[k + 1]
        d_scale = scale[k + 1] - c.pred_scale[k + 1]
        M_inv = rotation(-c.ext_rot[k + 1])
        cand_scale = c.ext_scale[k] + M_inv @ d_scale @ M_inv.T
        cand_scale = 0.5 * (cand_scale + cand_scale.T)
        cand_dof = c.ext_dof[k] + d_dof
        if cand_dof > IW_OFFSET and is_spd(cand_scale):
            dof[k], scale[k] = cand_dof, cand_scale
        else:
            dof[k], scale[k] = c.ext_dof[k], c.ext_scale[k]
            fallback.append(k)
    return dof, scale, tuple(sorted(fallback))


def smooth_extents(c: TrajectoryComponent) -> EstimatedTrajectory:
    dof, scale, fallback = smoothed_extent_params(c)
    return _to_estimate(c, _iw_means(dof, scale), smoothed=True, fallback_steps=fallback)


def recursion_step(mix: TrajectoryMixture, scan, cfg: FilterConfig, motion: MotionConfig,
                   mm: MeasModel, partitions=None):
    """Predict, update, reduce, extract and smooth. Returns (mixture, unsmoothed, smoothed)."""
    mix = t_predict(mix, cfg, motion)
    if partitions is None:
        partitions = cfg.partitions(scan, mm)
    mix = t_update(mix, scan, partitions, cfg, mm, min_weight=cfg.prune_T)
    mix = t_reduce(mix, cfg)
    chosen = extracted_components(mix, cfg)
    raw = [_to_estimate(c, _iw_means(c.ext_dof, c.ext_scale)) for c in chosen]
    smooth = [smooth_extents(c) for c in chosen]
    return mix, raw, smooth
